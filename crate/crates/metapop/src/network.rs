//! Degree distributions and mixing kernels for annealed degree-structured
//! networks, including the uncorrelated closure P(k'|k) = k' p(k') / <k> and
//! the connectivity matrix C with C_kk' = (k/k') P(k'|k).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::kahan_sum;

pub const NORMALIZATION_TOL: f64 = 1e-12;
pub const BALANCE_TOL: f64 = 1e-10;

/// Sparse degree support: only degrees present in the network are listed and
/// every listed degree carries strictly positive probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeDistribution {
    degrees: Vec<u32>,
    probs: Vec<f64>,
}

impl DegreeDistribution {
    pub fn new(degrees: Vec<u32>, probs: Vec<f64>) -> Result<Self> {
        if degrees.len() != probs.len() {
            return Err(Error::DimensionMismatch(
                "degrees and probs must have equal length".into(),
            ));
        }
        if degrees.len() < 2 {
            return Err(Error::InvalidInput(
                "at least two distinct degree classes are required".into(),
            ));
        }
        if degrees.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "degrees must be strictly increasing".into(),
            ));
        }
        if degrees[0] == 0 {
            return Err(Error::InvalidInput("degrees must be positive".into()));
        }
        if probs.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidInput(
                "every listed degree must have probability > 0".into(),
            ));
        }
        let total = kahan_sum(probs.iter().copied());
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NonNormalizable(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { degrees, probs })
    }

    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn min_degree(&self) -> u32 {
        self.degrees[0]
    }

    pub fn max_degree(&self) -> u32 {
        *self.degrees.last().unwrap()
    }

    /// <k>, computed with compensated summation.
    pub fn mean_degree(&self) -> f64 {
        kahan_sum(
            self.degrees
                .iter()
                .zip(&self.probs)
                .map(|(&k, &p)| k as f64 * p),
        )
    }

    /// p(k)-weighted sum of an arbitrary per-class quantity.
    pub fn weighted_mean(&self, values: &[f64]) -> f64 {
        kahan_sum(self.probs.iter().zip(values).map(|(&p, &v)| p * v))
    }
}

/// p(k) proportional to k^-exponent on the integer support [k_min, k_max].
///
/// The realized mean degree is whatever the normalization implies; nothing is
/// rescaled. Exponents <= 1 are rejected (the tail is not normalizable as
/// k_max grows and such inputs invariably indicate a mistake).
pub fn build_truncated_power_law(exponent: f64, k_min: u32, k_max: u32) -> Result<DegreeDistribution> {
    if !(exponent > 1.0) {
        return Err(Error::NonNormalizable(format!(
            "power-law exponent must exceed 1, got {exponent}"
        )));
    }
    if k_min < 1 {
        return Err(Error::InvalidInput("k_min must be at least 1".into()));
    }
    if k_max <= k_min {
        return Err(Error::InvalidInput(format!(
            "k_max ({k_max}) must exceed k_min ({k_min})"
        )));
    }
    let degrees: Vec<u32> = (k_min..=k_max).collect();
    let weights: Vec<f64> = degrees
        .iter()
        .map(|&k| (k as f64).powf(-exponent))
        .collect();
    let z = kahan_sum(weights.iter().copied());
    let probs: Vec<f64> = weights.iter().map(|w| w / z).collect();
    DegreeDistribution::new(degrees, probs)
}

/// Result of searching (k_max, exponent) for a target mean degree.
#[derive(Debug, Clone, Serialize)]
pub struct PowerLawCalibration {
    pub exponent: f64,
    pub k_min: u32,
    pub k_max: u32,
    pub mean_degree: f64,
    pub target: f64,
    pub residual: f64,
}

/// Searches k_max (and, failing that, the exponent) so the truncated power
/// law approaches a target mean degree. Probabilities are never rescaled;
/// the realized mean and residual are reported.
pub fn calibrate_power_law(
    target_mean: f64,
    exponent: f64,
    k_min: u32,
    k_max_cap: u32,
    tol: f64,
) -> Result<PowerLawCalibration> {
    if !(target_mean > k_min as f64) {
        return Err(Error::InvalidInput(format!(
            "target mean degree {target_mean} must exceed k_min {k_min}"
        )));
    }
    let mut best: Option<PowerLawCalibration> = None;
    for k_max in (k_min + 1)..=k_max_cap.max(k_min + 1) {
        let dist = build_truncated_power_law(exponent, k_min, k_max)?;
        let mean = dist.mean_degree();
        let cal = PowerLawCalibration {
            exponent,
            k_min,
            k_max,
            mean_degree: mean,
            target: target_mean,
            residual: mean - target_mean,
        };
        if best
            .as_ref()
            .map(|b| cal.residual.abs() < b.residual.abs())
            .unwrap_or(true)
        {
            best = Some(cal);
        }
        // Mean degree is increasing in k_max; once past the target it only gets worse.
        if mean > target_mean {
            break;
        }
    }
    let mut best = best.expect("k_max range is nonempty");
    if best.residual.abs() <= tol {
        return Ok(best);
    }
    // The k_max search saturated (truncated tail too light). Bisect on the
    // exponent at the cap: mean degree is continuous and decreasing in it.
    let k_max = k_max_cap.max(k_min + 1);
    let mut lo = 1.0 + 1e-6;
    let mut hi = exponent.max(1.0 + 1e-3);
    let mean_at = |e: f64| -> Result<f64> {
        Ok(build_truncated_power_law(e, k_min, k_max)?.mean_degree())
    };
    if mean_at(lo)? < target_mean {
        // Even the heaviest admissible tail cannot reach the target.
        return Ok(best);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let m = mean_at(mid)?;
        if m > target_mean {
            lo = mid;
        } else {
            hi = mid;
        }
        if (m - target_mean).abs() <= tol {
            break;
        }
    }
    let e = 0.5 * (lo + hi);
    let mean = mean_at(e)?;
    if (mean - target_mean).abs() < best.residual.abs() {
        best = PowerLawCalibration {
            exponent: e,
            k_min,
            k_max,
            mean_degree: mean,
            target: target_mean,
            residual: mean - target_mean,
        };
    }
    Ok(best)
}

/// A violation reported by `validate_consistency`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ConsistencyViolation {
    /// Row for degree `k` sums to `sum` (deviation beyond 1e-12).
    RowSum { k: u32, sum: f64, deviation: f64 },
    /// Detailed balance k P(k'|k) p(k) = k' P(k|k') p(k') fails for (k, k').
    DetailedBalance {
        k: u32,
        k_prime: u32,
        lhs: f64,
        rhs: f64,
        deviation: f64,
    },
}

/// Checks row normalization and detailed balance of a raw kernel matrix
/// against a degree distribution. Diagnostics only; an empty list means the
/// kernel is consistent.
pub fn validate_consistency(
    dist: &DegreeDistribution,
    kernel_rows: &DMatrix<f64>,
) -> Vec<ConsistencyViolation> {
    let n = dist.len();
    assert_eq!(
        (kernel_rows.nrows(), kernel_rows.ncols()),
        (n, n),
        "kernel dimensions must match the distribution"
    );
    let mut out = Vec::new();
    let ks = dist.degrees();
    let ps = dist.probs();
    for i in 0..n {
        let sum = kahan_sum(kernel_rows.row(i).iter().copied());
        let deviation = (sum - 1.0).abs();
        if deviation > NORMALIZATION_TOL {
            out.push(ConsistencyViolation::RowSum {
                k: ks[i],
                sum,
                deviation,
            });
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let lhs = ks[i] as f64 * kernel_rows[(i, j)] * ps[i];
            let rhs = ks[j] as f64 * kernel_rows[(j, i)] * ps[j];
            let scale = lhs.abs().max(rhs.abs()).max(1.0);
            let deviation = (lhs - rhs).abs() / scale;
            if deviation > BALANCE_TOL {
                out.push(ConsistencyViolation::DetailedBalance {
                    k: ks[i],
                    k_prime: ks[j],
                    lhs,
                    rhs,
                    deviation,
                });
            }
        }
    }
    out
}

/// Conditional connection probabilities P(k'|k) (row = k, column = k') with
/// the derived connectivity matrix cached at construction.
#[derive(Debug, Clone)]
pub struct MixingKernel {
    rows: DMatrix<f64>,
    uncorrelated: bool,
    connectivity: DMatrix<f64>,
}

impl MixingKernel {
    /// Validates row sums and detailed balance before accepting the kernel.
    pub fn new(dist: &DegreeDistribution, rows: DMatrix<f64>) -> Result<Self> {
        let n = dist.len();
        if rows.nrows() != n || rows.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "kernel is {}x{}, distribution has {} classes",
                rows.nrows(),
                rows.ncols(),
                n
            )));
        }
        if rows.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidInput(
                "kernel entries must be finite and nonnegative".into(),
            ));
        }
        let violations = validate_consistency(dist, &rows);
        if !violations.is_empty() {
            return Err(Error::InvalidInput(format!(
                "kernel fails consistency checks: {violations:?}"
            )));
        }
        let connectivity = connectivity_from_rows(dist, &rows);
        Ok(Self {
            rows,
            uncorrelated: false,
            connectivity,
        })
    }

    /// The uncorrelated closure: every row equals k' p(k') / <k>.
    pub fn uncorrelated(dist: &DegreeDistribution) -> Self {
        let n = dist.len();
        let kbar = dist.mean_degree();
        let row: Vec<f64> = dist
            .degrees()
            .iter()
            .zip(dist.probs())
            .map(|(&k, &p)| k as f64 * p / kbar)
            .collect();
        let rows = DMatrix::from_fn(n, n, |_, j| row[j]);
        let connectivity = connectivity_from_rows(dist, &rows);
        Self {
            rows,
            uncorrelated: true,
            connectivity,
        }
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn is_uncorrelated(&self) -> bool {
        self.uncorrelated
    }

    pub fn connectivity(&self) -> &DMatrix<f64> {
        &self.connectivity
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn connectivity_from_rows(dist: &DegreeDistribution, rows: &DMatrix<f64>) -> DMatrix<f64> {
    let ks = dist.degrees();
    DMatrix::from_fn(dist.len(), dist.len(), |i, j| {
        ks[i] as f64 / ks[j] as f64 * rows[(i, j)]
    })
}

/// C with C_kk' = (k/k') P(k'|k); for the uncorrelated closure this equals
/// k p(k') / <k>, a rank-one matrix fixing the vector v_k = k.
pub fn connectivity_matrix(dist: &DegreeDistribution, kernel: &MixingKernel) -> Result<DMatrix<f64>> {
    if kernel.len() != dist.len() {
        return Err(Error::DimensionMismatch(format!(
            "kernel has {} classes, distribution has {}",
            kernel.len(),
            dist.len()
        )));
    }
    Ok(kernel.connectivity().clone())
}

/// Random correlated kernel satisfying detailed balance, built by symmetric
/// Sinkhorn scaling of a positive symmetric edge-weight matrix to the stub
/// targets r_k = k p(k).
pub fn balanced_random_kernel(dist: &DegreeDistribution, seed: u64) -> MixingKernel {
    let n = dist.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = DMatrix::from_fn(n, n, |_, _| rng.gen_range(0.2..1.0));
    // symmetrize
    theta = (&theta + theta.transpose()) * 0.5;
    let targets: Vec<f64> = dist
        .degrees()
        .iter()
        .zip(dist.probs())
        .map(|(&k, &p)| k as f64 * p)
        .collect();
    let mut scale = DVector::from_element(n, 1.0);
    for _ in 0..20_000 {
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += scale[i] * theta[(i, j)] * scale[j];
            }
            worst = worst.max((row / targets[i] - 1.0).abs());
            scale[i] *= (targets[i] / row).sqrt();
        }
        if worst < 1e-15 {
            break;
        }
    }
    for i in 0..n {
        for j in 0..n {
            theta[(i, j)] *= scale[i] * scale[j];
        }
    }
    // P(k'|k) = Theta_kk' / (k p(k)); rows sum to 1 by construction.
    let rows = DMatrix::from_fn(n, n, |i, j| theta[(i, j)] / targets[i]);
    MixingKernel::new(dist, rows).expect("Sinkhorn-balanced kernel is consistent")
}

/// On-disk network description: `kernel` omitted means the uncorrelated
/// closure is used.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub degrees: Vec<u32>,
    pub probs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub uncorrelated: bool,
}

impl NetworkSpec {
    pub fn from_parts(dist: &DegreeDistribution, kernel: &MixingKernel) -> Self {
        if kernel.is_uncorrelated() {
            Self {
                degrees: dist.degrees().to_vec(),
                probs: dist.probs().to_vec(),
                kernel: None,
                uncorrelated: true,
            }
        } else {
            let rows = kernel.rows();
            Self {
                degrees: dist.degrees().to_vec(),
                probs: dist.probs().to_vec(),
                kernel: Some(
                    (0..rows.nrows())
                        .map(|i| rows.row(i).iter().copied().collect())
                        .collect(),
                ),
                uncorrelated: false,
            }
        }
    }

    pub fn build(&self) -> Result<(DegreeDistribution, MixingKernel)> {
        let dist = DegreeDistribution::new(self.degrees.clone(), self.probs.clone())?;
        let kernel = match &self.kernel {
            None => MixingKernel::uncorrelated(&dist),
            Some(rows) => {
                let n = dist.len();
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::DimensionMismatch(
                        "kernel rows do not match the degree support".into(),
                    ));
                }
                let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
                MixingKernel::new(&dist, m)?
            }
        };
        Ok((dist, kernel))
    }
}
