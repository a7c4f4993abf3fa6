//! Endemic-equilibrium machinery for the mass-action model without
//! re-infection after recovery: the compact selection operator and injection
//! vectors, the closed-form inverse of P(z), the scalar certificate H, and a
//! damped vector fixed-point solver with multi-start scanning.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{rhs_uncorrelated_mass_no_reinfection, MetapopState, Params};
use crate::error::{Error, Result};
use crate::network::{DegreeDistribution, MixingKernel};
use crate::util::kahan_sum;

/// Floor applied to iterates that dip below zero during fixed-point steps.
const ITERATE_FLOOR: f64 = 1e-14;

/// The 3n-column selection operator B = [0, beta I, 0] and the injection
/// vectors K_i carrying 1-q into slot i of the E block and q into slot i of
/// the I block.
#[derive(Debug, Clone)]
pub struct CompactForm {
    pub b: DMatrix<f64>,
    pub k_vectors: Vec<DVector<f64>>,
}

pub fn compact_form_vectors(p: &Params, dist: &DegreeDistribution) -> CompactForm {
    let n = dist.len();
    let mut b = DMatrix::zeros(n, 3 * n);
    for i in 0..n {
        b[(i, n + i)] = p.beta;
    }
    let k_vectors = (0..n)
        .map(|i| {
            let mut k = DVector::zeros(3 * n);
            k[i] = 1.0 - p.q;
            k[n + i] = p.q;
            k
        })
        .collect();
    CompactForm { b, k_vectors }
}

/// Precomputed quantities shared by H, the limit, and the solver.
struct EndemicContext {
    /// Column i is B V^-1 K_i.
    g: DMatrix<f64>,
    /// V^-1 K_i, kept for reconstructing the full equilibrium.
    v_inv_k: Vec<DVector<f64>>,
    /// DFE susceptible profile.
    x0: DVector<f64>,
    /// P(0) = (mu + D_S) I - D_S C.
    p0: DMatrix<f64>,
    c: DMatrix<f64>,
}

fn endemic_context(p: &Params, dist: &DegreeDistribution) -> Result<EndemicContext> {
    let n = dist.len();
    let (_, v) = crate::ngm::assemble_fv(p, dist, crate::dynamics::IncidenceKind::MassAction);
    let lu = v.lu();
    let compact = compact_form_vectors(p, dist);
    let mut g = DMatrix::zeros(n, n);
    let mut v_inv_k = Vec::with_capacity(n);
    for (i, k_vec) in compact.k_vectors.iter().enumerate() {
        let sol = lu.solve(k_vec).ok_or_else(|| Error::SingularMatrix {
            which: "V".into(),
            cond: f64::INFINITY,
        })?;
        g.set_column(i, &(&compact.b * &sol));
        v_inv_k.push(sol);
    }
    let x0 = DVector::from_vec(crate::ngm::dfe_susceptible(p, dist));
    let c = MixingKernel::uncorrelated(dist).connectivity().clone();
    let p0 = DMatrix::identity(n, n) * (p.mu + p.d_s) - &c * p.d_s;
    Ok(EndemicContext {
        g,
        v_inv_k,
        x0,
        p0,
        c,
    })
}

/// Closed-form inverse of P(z) = diag(z) + (mu + D_S) I - D_S C via the
/// rank-one update formula:
/// diag(u) [I + D_S C diag(u) / (1 - (D_S/<k>) sum_k k p(k) u_k)], u_k = 1/(z_k + mu + D_S).
pub fn p_inverse(z: &DVector<f64>, p: &Params, dist: &DegreeDistribution) -> Result<DMatrix<f64>> {
    let n = dist.len();
    if z.len() != n {
        return Err(Error::DimensionMismatch(
            "z does not match the degree support".into(),
        ));
    }
    if z.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidInput("z must be finite and nonnegative".into()));
    }
    let kernel = MixingKernel::uncorrelated(dist);
    p_inverse_with(z, p, dist, kernel.connectivity())
}

fn p_inverse_with(
    z: &DVector<f64>,
    p: &Params,
    dist: &DegreeDistribution,
    c: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = dist.len();
    let u: Vec<f64> = z.iter().map(|&zk| 1.0 / (zk + p.mu + p.d_s)).collect();
    let kbar = dist.mean_degree();
    let core = 1.0
        - p.d_s / kbar
            * kahan_sum(
                dist.degrees()
                    .iter()
                    .zip(dist.probs())
                    .zip(&u)
                    .map(|((&k, &pk), &uk)| k as f64 * pk * uk),
            );
    if !core.is_finite() || core.abs() < 1e-14 {
        return Err(Error::DegenerateDenominator {
            expression: "1 - (D_S/<k>) sum_k k p(k)/(z_k + mu + D_S)".into(),
            value: core,
        });
    }
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut entry = p.d_s * c[(i, j)] * u[j] / core;
            if i == j {
                entry += 1.0;
            }
            out[(i, j)] = u[i] * entry;
        }
    }
    Ok(out)
}

fn h_with(ctx: &EndemicContext, p: &Params, dist: &DegreeDistribution, z: &DVector<f64>) -> Result<f64> {
    let total = kahan_sum(z.iter().copied());
    if !(total > 0.0) {
        return Err(Error::InvalidInput(
            "H requires a nonnegative z with positive sum".into(),
        ));
    }
    let p_inv = p_inverse_with(z, p, dist, &ctx.c)?;
    let w = &p_inv * (&ctx.p0 * &ctx.x0);
    // column sums of G are <1 | B V^-1 K_i>
    let mut acc = 0.0;
    for i in 0..z.len() {
        let gcol = ctx.g.column(i).sum();
        acc += z[i] * w[i] * gcol;
    }
    Ok(acc / total)
}

/// H(z) from the compact equilibrium equation; fixed points of the model
/// satisfy H(z*) = 1.
pub fn h_function(z: &DVector<f64>, p: &Params, dist: &DegreeDistribution) -> Result<f64> {
    let ctx = endemic_context(p, dist)?;
    h_with(&ctx, p, dist, z)
}

/// sum_i x0_i <1 | B V^-1 K_i>, the published z -> 0 limit of H. By the
/// column-sum bound it dominates the mass-action R0 = rho(A) with
/// A = sum_i x0_i B V^-1 K_i e_i^T. (The radial limit of H along the
/// all-ones direction equals this sum divided by n.)
pub fn h_limit_zero(p: &Params, dist: &DegreeDistribution) -> Result<f64> {
    let ctx = endemic_context(p, dist)?;
    Ok((&ctx.g * &ctx.x0).sum())
}

/// A converged endemic equilibrium. `z_star` is beta times the infectious
/// profile; `y_star` stacks (E, I, R).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EndemicSolution {
    pub z_star: Vec<f64>,
    pub x_star: Vec<f64>,
    pub y_star: Vec<f64>,
    pub residual: f64,
    pub h_value: f64,
    pub iterations: usize,
    /// Number of times an iterate was floored back to the nonnegative cone.
    pub floor_events: usize,
}

impl EndemicSolution {
    /// The equilibrium as a compartment state (S from x*, E/I/R from y*).
    pub fn to_state(&self) -> MetapopState {
        let n = self.x_star.len();
        MetapopState {
            s: self.x_star.clone(),
            e: self.y_star[0..n].to_vec(),
            i: self.y_star[n..2 * n].to_vec(),
            r: self.y_star[2 * n..3 * n].to_vec(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.z_star.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Outcome of a fixed-point solve.
#[derive(Debug, Clone, Serialize)]
pub enum SolveOutcome {
    Converged(EndemicSolution),
    /// The iteration contracted to the origin: no endemic equilibrium found
    /// from this start (expected when R0 <= 1).
    CollapsedToZero { iterations: usize },
    NotConverged { residual_history: Vec<f64> },
}

/// Damped fixed-point iteration z <- (1 - damping) z + damping Phi(z) on the
/// compact equilibrium map. On convergence the full equilibrium (x*, y*) is
/// reconstructed and verified against the mass-action right-hand side
/// (no re-infection) at relative tolerance 1e-6.
pub fn solve_endemic(
    p: &Params,
    dist: &DegreeDistribution,
    init: &DVector<f64>,
    damping: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SolveOutcome> {
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Error::InvalidInput("damping must lie in (0, 1]".into()));
    }
    if init.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidInput("init must be entrywise positive".into()));
    }
    let n = dist.len();
    if init.len() != n {
        return Err(Error::DimensionMismatch(
            "init does not match the degree support".into(),
        ));
    }
    let ctx = endemic_context(p, dist)?;
    let mut z = init.clone();
    let mut floor_events = 0usize;
    let mut history: Vec<f64> = Vec::new();
    // z = beta * I is bounded by beta * Lambda / mu on the invariant region;
    // an iterate many orders below that scale is the zero fixed point, not
    // an endemic one (the disease-free state also zeroes the residual
    // checks, so size is the only discriminator).
    let collapse_level = (1e-9 * p.beta * p.lambda / p.mu).max(1e-13);

    for it in 1..=max_iter {
        let p_inv = p_inverse_with(&z, p, dist, &ctx.c)?;
        let w = &p_inv * (&ctx.p0 * &ctx.x0);
        // Phi(z) = G (z .* w)
        let zw = DVector::from_fn(n, |i, _| z[i] * w[i]);
        let mut next = &ctx.g * zw;
        next *= damping;
        next.axpy(1.0 - damping, &z, 1.0);
        for v in next.iter_mut() {
            if *v < 0.0 {
                *v = ITERATE_FLOOR;
                floor_events += 1;
            }
        }
        let residual = (0..n)
            .map(|i| (next[i] - z[i]).abs())
            .fold(0.0, f64::max)
            / (1.0 + z.amax());
        z = next;
        if residual <= tol {
            if z.amax() <= collapse_level {
                return Ok(SolveOutcome::CollapsedToZero { iterations: it });
            }
            let h_value = h_with(&ctx, p, dist, &z)?;
            let x_star = p_inverse_with(&z, p, dist, &ctx.c)?
                * DVector::from_element(n, p.lambda);
            let mut y_star = DVector::zeros(3 * n);
            for i in 0..n {
                y_star.axpy(z[i] * x_star[i], &ctx.v_inv_k[i], 1.0);
            }
            let state = MetapopState {
                s: x_star.iter().copied().collect(),
                e: y_star.as_slice()[0..n].to_vec(),
                i: y_star.as_slice()[n..2 * n].to_vec(),
                r: y_star.as_slice()[2 * n..3 * n].to_vec(),
            };
            let rhs = rhs_uncorrelated_mass_no_reinfection(&state, p, dist)?;
            let rhs_rel = rhs.max_abs() / state.max_abs().max(1e-300);
            if rhs_rel > 1e-6 {
                return Err(Error::NonConvergence {
                    iterations: it,
                    residual: rhs_rel,
                });
            }
            return Ok(SolveOutcome::Converged(EndemicSolution {
                z_star: z.iter().copied().collect(),
                x_star: x_star.iter().copied().collect(),
                y_star: y_star.iter().copied().collect(),
                residual,
                h_value,
                iterations: it,
                floor_events,
            }));
        }
        if z.amax() <= collapse_level {
            return Ok(SolveOutcome::CollapsedToZero { iterations: it });
        }
        history.push(residual);
    }
    let tail = history.len().saturating_sub(50);
    Ok(SolveOutcome::NotConverged {
        residual_history: history.split_off(tail),
    })
}

/// Runs the solver from `starts` log-uniform initial guesses (deterministic
/// in `seed`), deduplicates converged solutions closer than 1e-6 relative,
/// and returns them sorted by norm.
pub fn multi_start_scan(
    p: &Params,
    dist: &DegreeDistribution,
    starts: usize,
    seed: u64,
    damping: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<EndemicSolution>> {
    if starts == 0 {
        return Err(Error::InvalidInput("starts must be at least 1".into()));
    }
    let n = dist.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut solutions: Vec<EndemicSolution> = Vec::new();
    for _ in 0..starts {
        let init = DVector::from_fn(n, |_, _| {
            let exp: f64 = rng.gen_range(-6.0..2.0);
            10f64.powf(exp)
        });
        if let SolveOutcome::Converged(sol) = solve_endemic(p, dist, &init, damping, tol, max_iter)?
        {
            let duplicate = solutions.iter().any(|existing| {
                let scale = existing
                    .z_star
                    .iter()
                    .zip(&sol.z_star)
                    .map(|(a, b)| a.abs().max(b.abs()))
                    .fold(0.0, f64::max)
                    .max(1e-300);
                existing
                    .z_star
                    .iter()
                    .zip(&sol.z_star)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
                    / scale
                    < 1e-6
            });
            if !duplicate {
                solutions.push(sol);
            }
        }
    }
    solutions.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap());
    Ok(solutions)
}
