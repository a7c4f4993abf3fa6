//! Parameter sweeps: reproduction-number phase grids over (beta, k_max) or
//! (delta, k_max), and steady-state prevalence tables across migration rates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{IncidenceKind, MetapopState, Params};
use crate::error::{Error, Result};
use crate::network::{build_truncated_power_law, DegreeDistribution};
use crate::ngm::{r0_closed_form_freq, r0_numeric};
use crate::sim::{steady_state, IntegrationControls, RhsKind, SteadyState};

/// One sweep axis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxisSpec {
    /// "beta", "delta", or "kmax".
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
    #[serde(default)]
    pub log: bool,
}

impl AxisSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.steps < 2 {
            return Err(Error::InvalidInput(format!(
                "axis {} needs at least 2 steps",
                self.name
            )));
        }
        if !(self.max > self.min) {
            return Err(Error::InvalidInput(format!(
                "axis {}: max must exceed min",
                self.name
            )));
        }
        if self.log && self.min <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "axis {}: log spacing needs positive endpoints",
                self.name
            )));
        }
        let n = self.steps;
        Ok((0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                if self.log {
                    (self.min.ln() + t * (self.max.ln() - self.min.ln())).exp()
                } else {
                    self.min + t * (self.max - self.min)
                }
            })
            .collect())
    }
}

/// Which parameter the non-degree axis of a phase sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseParameter {
    Beta,
    Delta,
}

/// Phase sweep definition: closed-form standard-incidence R0 over a
/// (parameter, k_max) grid built on truncated power-law networks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: PhaseParameter,
    pub axis: AxisSpec,
    pub kmax_axis: AxisSpec,
    pub base: Params,
    pub exponent: f64,
    pub k_min: u32,
    /// Fraction of cells cross-checked against the dense next-generation
    /// matrix (deterministic stride).
    pub cross_check_fraction: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PhaseCell {
    pub param_value: f64,
    pub k_max: u32,
    pub r0: f64,
    pub valid: bool,
    /// Cell borders a sign change of R0 - 1.
    pub on_contour: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub numeric_rel_err: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseGrid {
    pub parameter: PhaseParameter,
    pub param_values: Vec<f64>,
    pub k_max_values: Vec<u32>,
    /// Row-major: cells[i][j] for param_values[i], k_max_values[j].
    pub cells: Vec<Vec<PhaseCell>>,
}

impl PhaseGrid {
    pub fn to_csv(&self) -> String {
        let pname = match self.parameter {
            PhaseParameter::Beta => "beta",
            PhaseParameter::Delta => "delta",
        };
        let mut out = format!("{pname},k_max,r0,valid,on_contour,numeric_rel_err\n");
        for row in &self.cells {
            for cell in row {
                let err = cell
                    .numeric_rel_err
                    .map(|e| e.to_string())
                    .unwrap_or_default();
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    cell.param_value, cell.k_max, cell.r0, cell.valid, cell.on_contour, err
                ));
            }
        }
        out
    }
}

/// Evaluates the closed-form standard-incidence R0 over the grid, marks the
/// R0 = 1 contour cells, and cross-checks a deterministic sample of cells
/// against the dense next-generation matrix. Degenerate cells are recorded
/// as invalid and the sweep continues.
pub fn sweep_r0_phase(spec: &SweepSpec) -> Result<PhaseGrid> {
    let param_values = spec.axis.values()?;
    let kmax_raw = spec.kmax_axis.values()?;
    let k_max_values: Vec<u32> = kmax_raw
        .iter()
        .map(|&v| (v.round() as u32).max(spec.k_min + 1))
        .collect();
    if !(0.0..=1.0).contains(&spec.cross_check_fraction) {
        return Err(Error::InvalidInput(
            "cross_check_fraction must lie in [0, 1]".into(),
        ));
    }
    let stride = if spec.cross_check_fraction > 0.0 {
        (1.0 / spec.cross_check_fraction).round().max(1.0) as usize
    } else {
        usize::MAX
    };

    let cells: Vec<Vec<PhaseCell>> = param_values
        .par_iter()
        .enumerate()
        .map(|(i, &pv)| {
            let mut params = spec.base;
            match spec.parameter {
                PhaseParameter::Beta => params.beta = pv,
                PhaseParameter::Delta => params.delta = pv,
            }
            let closed = r0_closed_form_freq(&params);
            k_max_values
                .iter()
                .enumerate()
                .map(|(j, &k_max)| {
                    let flat = i * k_max_values.len() + j;
                    let mut cell = PhaseCell {
                        param_value: pv,
                        k_max,
                        r0: f64::NAN,
                        valid: false,
                        on_contour: false,
                        numeric_rel_err: None,
                    };
                    match &closed {
                        Ok(report) => {
                            cell.r0 = report.value;
                            cell.valid = true;
                            if flat % stride == 0 {
                                if let Ok(dist) =
                                    build_truncated_power_law(spec.exponent, spec.k_min, k_max)
                                {
                                    if let Ok(num) = r0_numeric(
                                        &params,
                                        &dist,
                                        IncidenceKind::StandardIncidence,
                                    ) {
                                        let denom = num.value.abs().max(1e-300);
                                        cell.numeric_rel_err =
                                            Some((report.value - num.value).abs() / denom);
                                    }
                                }
                            }
                        }
                        Err(_) => {
                            cell.valid = false;
                        }
                    }
                    cell
                })
                .collect()
        })
        .collect();

    let mut grid = PhaseGrid {
        parameter: spec.parameter,
        param_values,
        k_max_values,
        cells,
    };
    mark_contour(&mut grid);
    Ok(grid)
}

fn mark_contour(grid: &mut PhaseGrid) {
    let (ni, nj) = (grid.param_values.len(), grid.k_max_values.len());
    let side = |cell: &PhaseCell| -> Option<bool> {
        if cell.valid && cell.r0.is_finite() {
            Some(cell.r0 >= 1.0)
        } else {
            None
        }
    };
    let mut flags = vec![vec![false; nj]; ni];
    for i in 0..ni {
        for j in 0..nj {
            let here = match side(&grid.cells[i][j]) {
                Some(s) => s,
                None => continue,
            };
            let neighbors = [
                (i.wrapping_sub(1), j),
                (i + 1, j),
                (i, j.wrapping_sub(1)),
                (i, j + 1),
            ];
            for (ni_, nj_) in neighbors {
                if ni_ < ni && nj_ < nj {
                    if let Some(other) = side(&grid.cells[ni_][nj_]) {
                        if other != here {
                            flags[i][j] = true;
                        }
                    }
                }
            }
        }
    }
    for i in 0..ni {
        for j in 0..nj {
            grid.cells[i][j].on_contour = flags[i][j];
        }
    }
}

/// Steady-state prevalence by degree for one migration rate.
#[derive(Debug, Clone, Serialize)]
pub struct MigrationRow {
    pub diffusion: f64,
    pub settled: bool,
    pub residual: f64,
    /// (degree, prevalence) pairs.
    pub prevalence: Vec<(u32, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MigrationTable {
    pub rows: Vec<MigrationRow>,
}

impl MigrationTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("D,k,prevalence,settled\n");
        for row in &self.rows {
            for &(k, prev) in &row.prevalence {
                out.push_str(&format!("{},{},{},{}\n", row.diffusion, k, prev, row.settled));
            }
        }
        out
    }
}

/// For each diffusion value (applied to all four compartments at once),
/// integrate the mass-action model to steady state and tabulate prevalence
/// by degree. Non-settled rows are flagged, not dropped.
pub fn sweep_migration(
    d_values: &[f64],
    base: &Params,
    dist: &DegreeDistribution,
    state0: &MetapopState,
    t_transient: f64,
    controls: &IntegrationControls,
) -> Result<MigrationTable> {
    if d_values.is_empty() {
        return Err(Error::InvalidInput("need at least one diffusion value".into()));
    }
    if d_values.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::InvalidInput(
            "diffusion rates must be strictly positive".into(),
        ));
    }
    let rows: Vec<MigrationRow> = d_values
        .par_iter()
        .map(|&dv| -> Result<MigrationRow> {
            let mut p = *base;
            p.d_s = dv;
            p.d_e = dv;
            p.d_i = dv;
            p.d_r = dv;
            let ss: SteadyState = steady_state(
                RhsKind::UncorrelatedMass,
                state0,
                &p,
                dist,
                None,
                t_transient,
                controls,
            )?;
            let prevalence = dist
                .degrees()
                .iter()
                .enumerate()
                .map(|(k, &deg)| {
                    let total = ss.state.class_total(k);
                    let prev = if total > 0.0 && ss.state.i[k] > 1e-12 {
                        ss.state.i[k] / total
                    } else {
                        0.0
                    };
                    (deg, prev)
                })
                .collect();
            Ok(MigrationRow {
                diffusion: dv,
                settled: ss.settled,
                residual: ss.residual,
                prevalence,
            })
        })
        .collect::<Result<_>>()?;
    Ok(MigrationTable { rows })
}

/// Trajectory CSV: one row per (time, degree class).
pub fn trajectory_to_csv(
    traj: &crate::sim::Trajectory,
    dist: &DegreeDistribution,
) -> String {
    let mut out = String::from("time,k,rho_S,rho_E,rho_I,rho_R,rho\n");
    for (t, state) in traj.times.iter().zip(&traj.states) {
        for (idx, &k) in dist.degrees().iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                t,
                k,
                state.s[idx],
                state.e[idx],
                state.i[idx],
                state.r[idx],
                state.class_total(idx)
            ));
        }
    }
    out
}

/// Connectivity-matrix CSV export (one row per degree class).
pub fn connectivity_to_csv(dist: &DegreeDistribution, c: &nalgebra::DMatrix<f64>) -> String {
    let mut out = String::from("k");
    for &k in dist.degrees() {
        out.push_str(&format!(",{k}"));
    }
    out.push('\n');
    for (i, &k) in dist.degrees().iter().enumerate() {
        out.push_str(&k.to_string());
        for j in 0..dist.len() {
            out.push_str(&format!(",{}", c[(i, j)]));
        }
        out.push('\n');
    }
    out
}
