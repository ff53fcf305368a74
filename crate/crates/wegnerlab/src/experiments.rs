//! Seeded Monte Carlo studies of eigenvalue-counting statistics.
//!
//! Each run draws coupling fields from a measure, assembles H = H₀ + V(ω) on
//! a ladder of box sizes, eigensolves, and tabulates per-realization
//! statistics in a tidy [`ResultTable`]:
//!
//! * `run_wegner`: the window count Tr E_Λ([E₀−ε, E₀+ε]) and the indicator
//!   of dist(σ(H_Λ), E₀) < ε, whose means scale like s(2ε)·|Λ|;
//! * `run_ids`: the normalized counting function N_Λ(E)/|Λ| on an energy
//!   grid and its increments across the ε grid;
//! * `run_landau`: the same window count for the magnetic (Peierls) operator
//!   at a Landau band center, with the exact flux-count degeneracy check.
//!
//! Draw streams are addressed by (master seed, L, realization, site), so
//! tables are bitwise reproducible for a fixed master seed no matter how
//! many workers run the realizations, and two runs sharing (seed, L) see the
//! same coupling fields.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::{MeasureError, MeasureSpec};
use crate::operators::{
    assemble_anderson, build_background, flux_quanta, BoxSpec, CellPotential, CouplingField,
    OperatorError, PotentialSpec,
};
use crate::seeding::substream;
use crate::spectra::{eigensolve, Interval, SpectraError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("epsilon grid must be nonempty with every ε in (0, 1] (got {0})")]
    EpsilonOutOfRange(f64),
    #[error("need at least 8 realizations (got {0})")]
    TooFewRealizations(usize),
    #[error("no box sizes configured")]
    NoBoxes,
    #[error("magnetic runs need dimension 2 and B ≠ 0")]
    NotAMagneticModel,
    #[error("flux B·L²/2π = {quanta} is not an integer for L = {l}; no admissible flux")]
    NoAdmissibleFlux { l: usize, quanta: f64 },
    #[error("Landau band {index} is not isolated for L = {l}")]
    BandNotIsolated { index: usize, l: usize },
    #[error("power-law fit needs at least 4 positive points")]
    NonPositiveData,
    #[error("statistic {0:?} not present in the table")]
    MissingStatistic(String),
    #[error("solver failed at realization {realization}: {source}")]
    SolverAt {
        realization: u64,
        source: SpectraError,
    },
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
}

/// The operator family under study: one box per entry of `cells_per_side`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub dimension: usize,
    pub cells_per_side: Vec<usize>,
    pub points_per_cell: usize,
    pub u: PotentialSpec,
    pub v0: CellPotential,
    #[serde(default)]
    pub field_b: f64,
}

/// How the window center E₀ is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnergyPolicy {
    Fixed {
        value: f64,
    },
    /// Midpoint of the spectrum of H₀ on the first configured box.
    MidSpectrum,
    /// Center of the n-th Landau band of the unperturbed magnetic operator.
    LandauBandCenter {
        index: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub measure: MeasureSpec,
    pub energy_e0: EnergyPolicy,
    pub epsilons: Vec<f64>,
    pub n_realizations: usize,
    pub master_seed: u64,
    /// 0 = use the global rayon pool.
    #[serde(default)]
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.model.cells_per_side.is_empty() {
            return Err(ExperimentError::NoBoxes);
        }
        for l in &self.model.cells_per_side {
            BoxSpec::new(self.model.dimension, *l, self.model.points_per_cell)?;
        }
        if self.epsilons.is_empty() {
            return Err(ExperimentError::EpsilonOutOfRange(f64::NAN));
        }
        for &e in &self.epsilons {
            if !(e > 0.0 && e <= 1.0) {
                return Err(ExperimentError::EpsilonOutOfRange(e));
            }
        }
        if self.n_realizations < 8 {
            return Err(ExperimentError::TooFewRealizations(self.n_realizations));
        }
        self.measure.validate()?;
        Ok(())
    }
}

/// One tidy observation: (realization, L, ε, statistic, value).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub realization: u64,
    pub l: usize,
    pub epsilon: f64,
    pub statistic: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSummary {
    pub name: String,
    pub estimate: f64,
    pub stderr: f64,
}

/// Rows plus derived summaries, in canonical order.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub summaries: Vec<FitSummary>,
}

impl ResultTable {
    pub fn canonical_sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.statistic
                .cmp(&b.statistic)
                .then(a.l.cmp(&b.l))
                .then(a.epsilon.total_cmp(&b.epsilon))
                .then(a.realization.cmp(&b.realization))
        });
    }

    pub fn summary(&self, name: &str) -> Option<&FitSummary> {
        self.summaries.iter().find(|s| s.name == name)
    }

    /// Mean and standard error of one statistic at fixed (L, ε).
    pub fn mean_stderr(&self, statistic: &str, l: usize, epsilon: f64) -> Option<(f64, f64)> {
        let values: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.statistic == statistic && r.l == l && r.epsilon == epsilon)
            .map(|r| r.value)
            .collect();
        if values.len() < 2 {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        Some((mean, (var / n).sqrt()))
    }
}

/// Draws the coupling field for (seed, L, realization) with one independent
/// substream per lattice site, so the draw does not depend on iteration
/// order or scheduling.
pub fn draw_couplings(
    box_spec: &BoxSpec,
    measure: &MeasureSpec,
    master_seed: u64,
    realization: u64,
) -> CouplingField {
    let cells = box_spec.total_cells();
    let l = box_spec.cells_per_side as u64;
    let values = (0..cells)
        .map(|site| {
            let mut rng = substream(master_seed, &[l, realization, site as u64]);
            measure.sample(&mut rng)
        })
        .collect();
    CouplingField { values }
}

fn run_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        job()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("worker pool");
        pool.install(job)
    }
}

fn resolve_e0(cfg: &ExperimentConfig) -> Result<f64, ExperimentError> {
    match cfg.energy_e0 {
        EnergyPolicy::Fixed { value } => Ok(value),
        EnergyPolicy::MidSpectrum => {
            let bx = BoxSpec::new(
                cfg.model.dimension,
                cfg.model.cells_per_side[0],
                cfg.model.points_per_cell,
            )?;
            let h0 = build_background(&bx, &cfg.model.v0, cfg.model.field_b)?;
            let sd = eigensolve(&h0, false)?;
            Ok(0.5 * (sd.min_eigenvalue() + sd.max_eigenvalue()))
        }
        EnergyPolicy::LandauBandCenter { index } => {
            let bx = BoxSpec::new(
                cfg.model.dimension,
                cfg.model.cells_per_side[0],
                cfg.model.points_per_cell,
            )?;
            let band = landau_band(&bx, cfg, index)?;
            Ok(band.center)
        }
    }
}

/// Unperturbed Landau band data for one box.
#[derive(Debug, Clone, Copy)]
pub struct LandauBand {
    pub flux_quanta: usize,
    pub center: f64,
    pub lo: f64,
    pub hi: f64,
    /// Distance from the band to the rest of the unperturbed spectrum.
    pub gap: f64,
    /// Exact state count inside [lo, hi].
    pub degeneracy: usize,
}

/// Locates the `index`-th Landau band of H₀(B) on one box and checks the
/// flux-count degeneracy.
pub fn landau_band(
    box_spec: &BoxSpec,
    cfg: &ExperimentConfig,
    index: usize,
) -> Result<LandauBand, ExperimentError> {
    let quanta = flux_quanta(box_spec, cfg.model.field_b);
    if (quanta - quanta.round()).abs() > 1e-9 || quanta.round() < 1.0 {
        return Err(ExperimentError::NoAdmissibleFlux {
            l: box_spec.cells_per_side,
            quanta,
        });
    }
    let n_phi = quanta.round() as usize;
    let h0 = build_background(box_spec, &cfg.model.v0, cfg.model.field_b)?;
    let sd0 = eigensolve(&h0, false)?;
    let dim = sd0.dim();
    let (i0, i1) = (n_phi * index, n_phi * (index + 1));
    if i1 > dim {
        return Err(ExperimentError::BandNotIsolated {
            index,
            l: box_spec.cells_per_side,
        });
    }
    let lo = sd0.eigenvalues[i0];
    let hi = sd0.eigenvalues[i1 - 1];
    let gap_below = if i0 == 0 {
        f64::INFINITY
    } else {
        lo - sd0.eigenvalues[i0 - 1]
    };
    let gap_above = if i1 == dim {
        f64::INFINITY
    } else {
        sd0.eigenvalues[i1] - hi
    };
    let gap = gap_below.min(gap_above);
    let width = hi - lo;
    if !(gap > 4.0 * width.max(1e-12)) {
        return Err(ExperimentError::BandNotIsolated {
            index,
            l: box_spec.cells_per_side,
        });
    }
    let pad = 0.25 * gap;
    let degeneracy = sd0.interval_trace(Interval::new(lo - pad, hi + pad).expect("pad > 0"));
    Ok(LandauBand {
        flux_quanta: n_phi,
        center: 0.5 * (lo + hi),
        lo,
        hi,
        gap,
        degeneracy,
    })
}

/// Window-count statistics Tr E_Λ([E₀−ε, E₀+ε]) per realization, box, and ε,
/// plus the indicator of dist(σ(H_Λ), E₀) < ε.
pub fn run_wegner(cfg: &ExperimentConfig) -> Result<ResultTable, ExperimentError> {
    cfg.validate()?;
    let e0 = resolve_e0(cfg)?;
    run_pool(cfg.workers, || window_count_run(cfg, e0))
}

/// The magnetic variant: E₀ sits at a Landau band center, the unperturbed
/// degeneracy is checked against the flux count exactly, and the volume is
/// |Λ| = L².
pub fn run_landau(
    cfg: &ExperimentConfig,
    landau_index: usize,
) -> Result<ResultTable, ExperimentError> {
    cfg.validate()?;
    if cfg.model.dimension != 2 || cfg.model.field_b == 0.0 {
        return Err(ExperimentError::NotAMagneticModel);
    }
    // The flux must be admissible for every configured box.
    let mut bands = Vec::new();
    for &l in &cfg.model.cells_per_side {
        let bx = BoxSpec::new(2, l, cfg.model.points_per_cell)?;
        bands.push((l, landau_band(&bx, cfg, landau_index)?));
    }
    // Fixed flux density makes the band center L-independent; take the first.
    let e0 = bands[0].1.center;
    let mut table = run_pool(cfg.workers, || window_count_run(cfg, e0))?;
    for (l, band) in &bands {
        table.summaries.push(FitSummary {
            name: format!("unperturbed_degeneracy_L{l}"),
            estimate: band.degeneracy as f64,
            stderr: 0.0,
        });
        table.summaries.push(FitSummary {
            name: format!("flux_quanta_L{l}"),
            estimate: band.flux_quanta as f64,
            stderr: 0.0,
        });
        table.summaries.push(FitSummary {
            name: format!("band_gap_L{l}"),
            estimate: band.gap,
            stderr: 0.0,
        });
    }
    table.summaries.push(FitSummary {
        name: "energy_e0".into(),
        estimate: e0,
        stderr: 0.0,
    });
    Ok(table)
}

fn window_count_run(cfg: &ExperimentConfig, e0: f64) -> Result<ResultTable, ExperimentError> {
    let mut rows: Vec<ResultRow> = Vec::new();
    for &l in &cfg.model.cells_per_side {
        let bx = BoxSpec::new(cfg.model.dimension, l, cfg.model.points_per_cell)?;
        let u = cfg.model.u.build(&bx)?;
        let h0 = build_background(&bx, &cfg.model.v0, cfg.model.field_b)?;
        let per_real: Result<Vec<Vec<ResultRow>>, ExperimentError> = (0..cfg.n_realizations as u64)
            .into_par_iter()
            .map(|r| {
                let field = draw_couplings(&bx, &cfg.measure, cfg.master_seed, r);
                let v = assemble_anderson(&bx, &u, &field)?;
                let h = h0.add(&v)?;
                let sd = eigensolve(&h, false).map_err(|source| ExperimentError::SolverAt {
                    realization: r,
                    source,
                })?;
                let min_dist = sd
                    .eigenvalues
                    .iter()
                    .map(|&lam| (lam - e0).abs())
                    .fold(f64::INFINITY, f64::min);
                let mut out = Vec::with_capacity(2 * cfg.epsilons.len());
                for &eps in &cfg.epsilons {
                    let window = Interval::centered(e0, eps).expect("eps > 0");
                    out.push(ResultRow {
                        realization: r,
                        l,
                        epsilon: eps,
                        statistic: "trace_window".into(),
                        value: sd.interval_trace(window) as f64,
                    });
                    out.push(ResultRow {
                        realization: r,
                        l,
                        epsilon: eps,
                        statistic: "dist_below_eps".into(),
                        value: if min_dist < eps { 1.0 } else { 0.0 },
                    });
                }
                Ok(out)
            })
            .collect();
        rows.extend(per_real?.into_iter().flatten());
    }
    let mut table = ResultTable {
        rows,
        summaries: Vec::new(),
    };
    table.canonical_sort();
    attach_window_summaries(cfg, e0, &mut table)?;
    Ok(table)
}

fn attach_window_summaries(
    cfg: &ExperimentConfig,
    e0: f64,
    table: &mut ResultTable,
) -> Result<(), ExperimentError> {
    let dim_exp = cfg.model.dimension as i32;
    // Mean window count and the Wegner ratio mean/(|Λ|·s(2ε)) per (L, ε).
    for &l in &cfg.model.cells_per_side {
        let volume = (l as f64).powi(dim_exp);
        for &eps in &cfg.epsilons {
            if let Some((mean, stderr)) = table.mean_stderr("trace_window", l, eps) {
                table.summaries.push(FitSummary {
                    name: format!("mean_trace_L{l}_eps{eps}"),
                    estimate: mean,
                    stderr,
                });
                let s = cfg.measure.modulus_s(2.0 * eps)?;
                let denom = volume * (s.value + s.error_bound);
                if denom > 0.0 {
                    table.summaries.push(FitSummary {
                        name: format!("wegner_ratio_L{l}_eps{eps}"),
                        estimate: mean / denom,
                        stderr: stderr / denom,
                    });
                }
            }
        }
    }
    // Volume-scaling slope per ε and ε-scaling slope per L, where defined.
    for &eps in &cfg.epsilons {
        let pts: Vec<(f64, f64)> = cfg
            .model
            .cells_per_side
            .iter()
            .filter_map(|&l| {
                table
                    .mean_stderr("trace_window", l, eps)
                    .filter(|(m, _)| *m > 0.0)
                    .map(|(m, _)| ((l as f64).powi(dim_exp), m))
            })
            .collect();
        if let Ok(slope) = loglog_slope(&pts) {
            table.summaries.push(FitSummary {
                name: format!("volume_exponent_eps{eps}"),
                estimate: slope,
                stderr: 0.0,
            });
        }
    }
    for &l in &cfg.model.cells_per_side {
        let pts: Vec<(f64, f64)> = cfg
            .epsilons
            .iter()
            .filter_map(|&eps| {
                table
                    .mean_stderr("trace_window", l, eps)
                    .filter(|(m, _)| *m > 0.0)
                    .map(|(m, _)| (eps, m))
            })
            .collect();
        if let Ok(slope) = loglog_slope(&pts) {
            table.summaries.push(FitSummary {
                name: format!("epsilon_exponent_L{l}"),
                estimate: slope,
                stderr: 0.0,
            });
        }
    }
    table.summaries.push(FitSummary {
        name: "energy_e0".into(),
        estimate: e0,
        stderr: 0.0,
    });
    Ok(())
}

/// Normalized counting function N_Λ(E)/|Λ| on `energy_grid` (stored in the
/// epsilon column) and its increments over the configured ε grid around E₀.
pub fn run_ids(
    cfg: &ExperimentConfig,
    energy_grid: &[f64],
) -> Result<ResultTable, ExperimentError> {
    cfg.validate()?;
    let e0 = resolve_e0(cfg)?;
    run_pool(cfg.workers, || {
        let mut rows: Vec<ResultRow> = Vec::new();
        for &l in &cfg.model.cells_per_side {
            let bx = BoxSpec::new(cfg.model.dimension, l, cfg.model.points_per_cell)?;
            let u = cfg.model.u.build(&bx)?;
            let h0 = build_background(&bx, &cfg.model.v0, cfg.model.field_b)?;
            let volume = bx.volume();
            let per_real: Result<Vec<Vec<ResultRow>>, ExperimentError> = (0..cfg.n_realizations
                as u64)
                .into_par_iter()
                .map(|r| {
                    let field = draw_couplings(&bx, &cfg.measure, cfg.master_seed, r);
                    let v = assemble_anderson(&bx, &u, &field)?;
                    let h = h0.add(&v)?;
                    let sd = eigensolve(&h, false).map_err(|source| ExperimentError::SolverAt {
                        realization: r,
                        source,
                    })?;
                    let mut out = Vec::with_capacity(energy_grid.len() + cfg.epsilons.len());
                    for &e in energy_grid {
                        out.push(ResultRow {
                            realization: r,
                            l,
                            epsilon: e,
                            statistic: "ids_density".into(),
                            value: sd.counting_function(e) as f64 / volume,
                        });
                    }
                    for &eps in &cfg.epsilons {
                        let inc =
                            sd.counting_function(e0 + eps) as f64 - sd.counting_function(e0) as f64;
                        out.push(ResultRow {
                            realization: r,
                            l,
                            epsilon: eps,
                            statistic: "ids_increment".into(),
                            value: inc / volume,
                        });
                    }
                    Ok(out)
                })
                .collect();
            rows.extend(per_real?.into_iter().flatten());
        }
        let mut table = ResultTable {
            rows,
            summaries: Vec::new(),
        };
        table.canonical_sort();
        for &l in &cfg.model.cells_per_side {
            for &eps in &cfg.epsilons {
                if let Some((mean, stderr)) = table.mean_stderr("ids_increment", l, eps) {
                    table.summaries.push(FitSummary {
                        name: format!("mean_ids_increment_L{l}_eps{eps}"),
                        estimate: mean,
                        stderr,
                    });
                }
            }
        }
        table.summaries.push(FitSummary {
            name: "energy_e0".into(),
            estimate: e0,
            stderr: 0.0,
        });
        Ok(table)
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub stderr: f64,
    pub r_squared: f64,
    pub amplitude: f64,
}

/// Weighted least squares for y = A·xᵖ on log–log axes. Requires at least 4
/// strictly positive points; weights come from the per-point standard errors
/// when given (propagated to log scale), otherwise the fit is unweighted.
pub fn powerlaw_fit(
    points: &[(f64, f64)],
    stderrs: Option<&[f64]>,
) -> Result<PowerLawFit, ExperimentError> {
    if points.len() < 4 || points.iter().any(|&(x, y)| !(x > 0.0) || !(y > 0.0)) {
        return Err(ExperimentError::NonPositiveData);
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let weights: Vec<f64> = match stderrs {
        Some(errs) if errs.len() == points.len() && errs.iter().all(|&e| e > 0.0) => errs
            .iter()
            .zip(points)
            .map(|(&e, &(_, y))| {
                let sigma_log = e / y;
                1.0 / (sigma_log * sigma_log)
            })
            .collect(),
        _ => vec![1.0; points.len()],
    };
    let wsum: f64 = weights.iter().sum();
    let mx = xs.iter().zip(&weights).map(|(x, w)| x * w).sum::<f64>() / wsum;
    let my = ys.iter().zip(&weights).map(|(y, w)| y * w).sum::<f64>() / wsum;
    let sxx: f64 = xs
        .iter()
        .zip(&weights)
        .map(|(x, w)| w * (x - mx) * (x - mx))
        .sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .zip(&weights)
        .map(|((x, y), w)| w * (x - mx) * (y - my))
        .sum();
    if sxx == 0.0 {
        return Err(ExperimentError::NonPositiveData);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .zip(&weights)
        .map(|((x, y), w)| {
            let p = intercept + slope * x;
            w * (y - p) * (y - p)
        })
        .sum();
    let ss_tot: f64 = ys
        .iter()
        .zip(&weights)
        .map(|(y, w)| w * (y - my) * (y - my))
        .sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    let stderr = if stderrs.is_some() {
        (1.0 / sxx).sqrt()
    } else {
        let dof = (points.len() - 2).max(1) as f64;
        ((ss_res / dof) / sxx).sqrt()
    };
    Ok(PowerLawFit {
        exponent: slope,
        stderr,
        r_squared,
        amplitude: intercept.exp(),
    })
}

/// Plain log–log slope for short ladders (two or three sizes), where the
/// 4-point precondition of [`powerlaw_fit`] is out of reach.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<f64, ExperimentError> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0) || !(y > 0.0)) {
        return Err(ExperimentError::NonPositiveData);
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(ExperimentError::NonPositiveData);
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}
