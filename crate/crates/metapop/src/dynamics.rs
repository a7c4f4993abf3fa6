//! Right-hand sides of the SEIR metapopulation models (general kernel and
//! uncorrelated closure, standard-incidence and mass-action transmission),
//! aggregation over degree classes, and the invariant-region check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{DegreeDistribution, MixingKernel};
use crate::util::kahan_sum;

/// Epidemiological and diffusion rate constants.
///
/// `eta` has no published value in the source parameter table; 0.2/year is a
/// repository default and every constructor and config file can override it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Recruitment, individuals/year.
    pub lambda: f64,
    /// Transmission coefficient. Per year per capita for standard incidence,
    /// per year per individual-density for mass action.
    pub beta: f64,
    /// Natural death rate, 1/year.
    pub mu: f64,
    /// Fast-progression fraction, dimensionless in [0, 1].
    pub q: f64,
    /// Slow progression rate, 1/year.
    pub alpha: f64,
    /// Chemoprophylaxis effectiveness, dimensionless in [0, 1].
    pub theta: f64,
    /// Treatment recovery rate of infectious, 1/year.
    pub delta: f64,
    /// Chemoprophylaxis recovery rate, 1/year.
    pub eta: f64,
    /// Natural recovery rate of infectious, 1/year.
    pub gamma: f64,
    /// Disease-induced death rate, 1/year.
    pub d: f64,
    /// Relapse rate, 1/year.
    pub xi: f64,
    #[serde(rename = "D_S")]
    pub d_s: f64,
    #[serde(rename = "D_E")]
    pub d_e: f64,
    #[serde(rename = "D_I")]
    pub d_i: f64,
    #[serde(rename = "D_R")]
    pub d_r: f64,
}

/// Default eta when the caller has no better estimate (see `Params` docs).
pub const DEFAULT_ETA: f64 = 0.2;

impl Params {
    /// Published TB parameter set (transmission coefficient supplied by the
    /// caller, eta defaulted, unit diffusion).
    pub fn baseline_tb(beta: f64) -> Self {
        Self {
            lambda: 1001.0,
            beta,
            mu: 0.017,
            q: 0.015,
            alpha: 0.0024,
            theta: 0.001,
            delta: 0.7372,
            eta: DEFAULT_ETA,
            gamma: 0.7372 / 4.0,
            d: 0.0012,
            xi: 0.0986,
            d_s: 1.0,
            d_e: 1.0,
            d_i: 1.0,
            d_r: 1.0,
        }
    }

    /// Every violated constraint, by field, for config validation.
    pub fn violations(&self) -> Vec<String> {
        let mut bad = Vec::new();
        let nonneg = [
            ("lambda", self.lambda),
            ("beta", self.beta),
            ("mu", self.mu),
            ("alpha", self.alpha),
            ("delta", self.delta),
            ("eta", self.eta),
            ("gamma", self.gamma),
            ("d", self.d),
            ("xi", self.xi),
        ];
        for (name, v) in nonneg {
            if !v.is_finite() || v < 0.0 {
                bad.push(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        for (name, v) in [("q", self.q), ("theta", self.theta)] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                bad.push(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !self.xi.is_finite() || self.xi > 1.0 {
            // (1 - xi) scales re-infection of recovered; xi beyond 1 would
            // flip its sign.
            bad.push(format!("xi must lie in [0, 1], got {}", self.xi));
        }
        for (name, v) in [
            ("D_S", self.d_s),
            ("D_E", self.d_e),
            ("D_I", self.d_i),
            ("D_R", self.d_r),
        ] {
            if !v.is_finite() || v <= 0.0 {
                bad.push(format!("{name} must be strictly positive, got {v}"));
            }
        }
        bad
    }

    pub fn validated(self) -> Result<Self> {
        let bad = self.violations();
        if bad.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidParams(bad))
        }
    }
}

/// Transmission law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IncidenceKind {
    /// beta * rho_I * rho_S / rho (frequency-dependent).
    StandardIncidence,
    /// beta * rho_I * rho_S (density-dependent).
    MassAction,
}

/// Per-degree-class compartment densities. The class total rho_k is always
/// computed from the four compartments, never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetapopState {
    pub s: Vec<f64>,
    pub e: Vec<f64>,
    pub i: Vec<f64>,
    pub r: Vec<f64>,
}

impl MetapopState {
    pub fn new(s: Vec<f64>, e: Vec<f64>, i: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        let n = s.len();
        if e.len() != n || i.len() != n || r.len() != n {
            return Err(Error::DimensionMismatch(
                "compartment vectors must share one length".into(),
            ));
        }
        Ok(Self { s, e, i, r })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            s: vec![0.0; n],
            e: vec![0.0; n],
            i: vec![0.0; n],
            r: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// rho_k = rho_S,k + rho_E,k + rho_I,k + rho_R,k.
    pub fn class_total(&self, k: usize) -> f64 {
        self.s[k] + self.e[k] + self.i[k] + self.r[k]
    }

    pub fn is_nonnegative(&self) -> bool {
        self.iter_all().all(|v| v >= 0.0)
    }

    pub fn min_entry(&self) -> f64 {
        self.iter_all().fold(f64::INFINITY, f64::min)
    }

    fn iter_all(&self) -> impl Iterator<Item = f64> + '_ {
        self.s
            .iter()
            .chain(&self.e)
            .chain(&self.i)
            .chain(&self.r)
            .copied()
    }

    /// Flat layout [S..., E..., I..., R...] used by the integrator.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(4 * self.len());
        out.extend_from_slice(&self.s);
        out.extend_from_slice(&self.e);
        out.extend_from_slice(&self.i);
        out.extend_from_slice(&self.r);
        out
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() % 4 != 0 {
            return Err(Error::DimensionMismatch(
                "flat state length must be a multiple of 4".into(),
            ));
        }
        let n = flat.len() / 4;
        Ok(Self {
            s: flat[0..n].to_vec(),
            e: flat[n..2 * n].to_vec(),
            i: flat[2 * n..3 * n].to_vec(),
            r: flat[3 * n..4 * n].to_vec(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.iter_all().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// p(k)-weighted means of the four compartments and their total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub rho_s: f64,
    pub rho_e: f64,
    pub rho_i: f64,
    pub rho_r: f64,
    pub rho: f64,
}

pub fn aggregate(state: &MetapopState, dist: &DegreeDistribution) -> Aggregates {
    let rho_s = dist.weighted_mean(&state.s);
    let rho_e = dist.weighted_mean(&state.e);
    let rho_i = dist.weighted_mean(&state.i);
    let rho_r = dist.weighted_mean(&state.r);
    Aggregates {
        rho_s,
        rho_e,
        rho_i,
        rho_r,
        rho: kahan_sum([rho_s, rho_e, rho_i, rho_r]),
    }
}

/// Standard-incidence force of infection with the rho = 0 limit pinned to 0
/// (on nonnegative states rho_I <= rho, so the 0/0 limit is 0).
#[inline]
fn foi_standard(beta: f64, i: f64, other: f64, total: f64) -> f64 {
    if total > 0.0 {
        beta * i * other / total
    } else {
        0.0
    }
}

fn check_state(state: &MetapopState, n: usize) -> Result<()> {
    if state.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "state has {} classes, network has {n}",
            state.len()
        )));
    }
    if !state.is_nonnegative() {
        return Err(Error::InvalidInput(format!(
            "state has negative entries (min {})",
            state.min_entry()
        )));
    }
    Ok(())
}

/// Reaction part shared by every model variant: everything except diffusion.
/// `reinfection` controls the beta (1 - xi) I R term (dropped in the
/// restricted system used for endemic-equilibrium cross-validation).
#[inline]
#[allow(clippy::too_many_arguments)]
fn reaction_terms(
    p: &Params,
    s: f64,
    e: f64,
    i: f64,
    r: f64,
    kind: IncidenceKind,
    reinfection: bool,
) -> [f64; 4] {
    let total = s + e + i + r;
    let (foi, foi_r) = match kind {
        IncidenceKind::StandardIncidence => (
            foi_standard(p.beta, i, s, total),
            if reinfection {
                foi_standard(p.beta * (1.0 - p.xi), i, r, total)
            } else {
                0.0
            },
        ),
        IncidenceKind::MassAction => (
            p.beta * i * s,
            if reinfection {
                p.beta * (1.0 - p.xi) * i * r
            } else {
                0.0
            },
        ),
    };
    let slow = p.alpha * (1.0 - p.theta);
    let ds = p.lambda - foi - p.mu * s;
    let de = (1.0 - p.q) * foi + foi_r + p.gamma * i - (p.mu + p.eta + slow) * e;
    let di = p.q * foi + slow * e - (p.mu + p.d + p.gamma + p.delta) * i + p.xi * r;
    let dr = -foi_r + p.eta * e + p.delta * i - (p.mu + p.xi) * r;
    [ds, de, di, dr]
}

/// General-kernel model: diffusion is -D_X rho_X,k + k D_X sum_k' P(k'|k) rho_X,k'/k',
/// i.e. outflow minus the connectivity-matrix inflow.
pub fn rhs_general(
    state: &MetapopState,
    p: &Params,
    dist: &DegreeDistribution,
    kernel: &MixingKernel,
    kind: IncidenceKind,
) -> Result<MetapopState> {
    let n = dist.len();
    check_state(state, n)?;
    if kernel.len() != n {
        return Err(Error::DimensionMismatch(
            "kernel does not match the distribution".into(),
        ));
    }
    let c = kernel.connectivity();
    let mut out = MetapopState::zeros(n);
    // inflow_X = C * rho_X
    let inflow = |v: &[f64], row: usize| -> f64 {
        let mut acc = 0.0;
        for j in 0..n {
            acc += c[(row, j)] * v[j];
        }
        acc
    };
    for k in 0..n {
        let [ds, de, di, dr] = reaction_terms(
            p, state.s[k], state.e[k], state.i[k], state.r[k], kind, true,
        );
        out.s[k] = ds - p.d_s * state.s[k] + p.d_s * inflow(&state.s, k);
        out.e[k] = de - p.d_e * state.e[k] + p.d_e * inflow(&state.e, k);
        out.i[k] = di - p.d_i * state.i[k] + p.d_i * inflow(&state.i, k);
        out.r[k] = dr - p.d_r * state.r[k] + p.d_r * inflow(&state.r, k);
    }
    Ok(out)
}

fn rhs_uncorrelated(
    state: &MetapopState,
    p: &Params,
    dist: &DegreeDistribution,
    kind: IncidenceKind,
    reinfection: bool,
) -> Result<MetapopState> {
    let n = dist.len();
    check_state(state, n)?;
    let kbar = dist.mean_degree();
    let agg = aggregate(state, dist);
    let mut out = MetapopState::zeros(n);
    for k in 0..n {
        let [ds, de, di, dr] = reaction_terms(
            p,
            state.s[k],
            state.e[k],
            state.i[k],
            state.r[k],
            kind,
            reinfection,
        );
        let share = dist.degrees()[k] as f64 / kbar;
        out.s[k] = ds - p.d_s * (state.s[k] - share * agg.rho_s);
        out.e[k] = de - p.d_e * (state.e[k] - share * agg.rho_e);
        out.i[k] = di - p.d_i * (state.i[k] - share * agg.rho_i);
        out.r[k] = dr - p.d_r * (state.r[k] - share * agg.rho_r);
    }
    Ok(out)
}

/// Uncorrelated closure, standard incidence.
pub fn rhs_uncorrelated_freq(
    state: &MetapopState,
    p: &Params,
    dist: &DegreeDistribution,
) -> Result<MetapopState> {
    rhs_uncorrelated(state, p, dist, IncidenceKind::StandardIncidence, true)
}

/// Uncorrelated closure, mass action. Chemoprophylaxis recovery flows E -> R
/// (the transfer-matrix convention).
pub fn rhs_uncorrelated_mass(
    state: &MetapopState,
    p: &Params,
    dist: &DegreeDistribution,
) -> Result<MetapopState> {
    rhs_uncorrelated(state, p, dist, IncidenceKind::MassAction, true)
}

/// Mass-action variant with no re-infection after recovery (relapse kept).
/// This is the system whose endemic equilibria the fixed-point solver targets.
pub fn rhs_uncorrelated_mass_no_reinfection(
    state: &MetapopState,
    p: &Params,
    dist: &DegreeDistribution,
) -> Result<MetapopState> {
    rhs_uncorrelated(state, p, dist, IncidenceKind::MassAction, false)
}

/// Invariant-region diagnostics: nonnegative entries and aggregated
/// rho <= Lambda/mu (relative slack 1e-6).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InvariantCheck {
    pub inside: bool,
    pub min_entry: f64,
    pub rho: f64,
    pub bound: f64,
    /// rho - bound; positive means the population cap is violated.
    pub margin: f64,
}

pub fn check_invariant_region(
    state: &MetapopState,
    p: &Params,
    dist: &DegreeDistribution,
) -> InvariantCheck {
    let agg = aggregate(state, dist);
    let bound = p.lambda / p.mu;
    let tol = 1e-6 * bound;
    let min_entry = state.min_entry();
    InvariantCheck {
        inside: min_entry >= 0.0 && agg.rho <= bound + tol,
        min_entry,
        rho: agg.rho,
        bound,
        margin: agg.rho - bound,
    }
}
