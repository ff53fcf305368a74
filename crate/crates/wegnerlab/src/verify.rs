//! Randomized verification suites for every quantitative bound in the crate.
//!
//! Each suite generates seeded instances, evaluates the relevant certified
//! quantity, and reduces to [`CheckOutcome`]s plus per-instance
//! [`InstanceReport`]s. A failed check is a falsification event: the lower
//! estimates are sums of exact evaluations, so they cannot overshoot, and
//! the certified upper estimates include all slack, so they cannot
//! undershoot.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::averaging::{
    arctan_projector_check, averaging_sum, dissipative_bound, dissipative_sum, ell_bound,
    ell_value, resolvent_expectation, self_adjoint_bound, suggested_truncation, AveragingInstance,
    ResolventModel,
};
use crate::experiments::{
    loglog_slope, powerlaw_fit, run_landau, run_wegner, EnergyPolicy, ExperimentConfig,
    ExperimentError, ModelSpec, ResultTable,
};
use crate::measures::MeasureSpec;
use crate::operators::{
    assemble_anderson, assemble_tilde, build_background, BoxSpec, CellPotential, CouplingField,
    PotentialSpec, SingleSitePotential,
};
use crate::report::{CheckOutcome, InstanceReport};
use crate::seeding::substream;
use crate::spectra::{eigensolve, eigensolve_sym, ucp_constant, Interval, IntervalPair};
use crate::tracebounds::{
    decay_fit, green_kernel_r2_oracle_1d, iterated_trace_inequality, k0_comparison,
    resolvent_squared, sandwich_trace_norm, smooth_kernel_norm, CutoffPair, SmoothBumpSpec,
};

fn pi() -> f64 {
    std::f64::consts::PI
}

/// Random symmetric A, random PSD B with spectrum in [0.01, 1] and ‖B‖
/// pinned at the top, random unit φ; dimension in 2..=dim_max.
pub fn random_self_adjoint_instance(
    master_seed: u64,
    idx: u64,
    dim_max: usize,
) -> AveragingInstance {
    let mut rng = substream(master_seed, &[0x5A, idx]);
    let dim = 2 + (rng.random::<u64>() as usize) % (dim_max - 1);
    let scale = 2.0 / (dim as f64).sqrt();
    let raw = DMatrix::from_fn(dim, dim, |_, _| (rng.random::<f64>() * 2.0 - 1.0) * scale);
    let a = (&raw + raw.transpose()) * 0.5;
    let b = random_psd(&mut rng, dim, 0.01, 1.0);
    let phi = random_unit(&mut rng, dim);
    AveragingInstance::self_adjoint(a, b, phi).expect("generator output is valid")
}

/// Random dissipative instance (A₀ + iΓ, B, φ) with Γ ⪰ 0 and B ⪰ 0.02.
pub fn random_dissipative_instance(
    master_seed: u64,
    idx: u64,
    dim_max: usize,
    lambda: f64,
) -> AveragingInstance {
    let mut rng = substream(master_seed, &[0xD1, idx]);
    let dim = 2 + (rng.random::<u64>() as usize) % (dim_max - 1);
    let scale = 2.0 / (dim as f64).sqrt();
    let raw = DMatrix::from_fn(dim, dim, |_, _| (rng.random::<f64>() * 2.0 - 1.0) * scale);
    let a0 = (&raw + raw.transpose()) * 0.5;
    let gamma = random_psd(&mut rng, dim, 0.0, 0.8);
    let b = random_psd(&mut rng, dim, 0.02, 1.0);
    let phi = random_unit(&mut rng, dim);
    AveragingInstance::dissipative(a0, Some(gamma), b, phi, lambda)
        .expect("generator output is valid")
}

fn random_psd(rng: &mut rand_chacha::ChaCha8Rng, dim: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let raw = DMatrix::from_fn(dim, dim, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let q = raw.qr().q();
    let mut evals = DVector::from_fn(dim, |_, _| lo + (hi - lo) * rng.random::<f64>());
    let imax = evals.imax();
    evals[imax] = hi;
    let scaled = DMatrix::from_fn(dim, dim, |i, j| q[(i, j)] * evals[j]);
    &scaled * q.transpose()
}

fn random_unit(rng: &mut rand_chacha::ChaCha8Rng, dim: usize) -> DVector<f64> {
    let mut phi = DVector::from_fn(dim, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let norm = phi.norm();
    if norm > 0.0 {
        phi /= norm;
    } else {
        phi[0] = 1.0;
    }
    phi
}

/// Certified upper estimates of the self-adjoint averaging sum against
/// 2π·‖φ‖² on seeded random instances (dim ≤ dim_max, B ⪰ 0.01, ‖B‖ ≤ 1).
pub fn verify_spectral_averaging(
    n_instances: usize,
    dim_max: usize,
    master_seed: u64,
    y_grid: usize,
) -> (Vec<InstanceReport>, CheckOutcome) {
    let reports: Vec<InstanceReport> = (0..n_instances as u64)
        .into_par_iter()
        .map(|idx| {
            let inst = random_self_adjoint_instance(master_seed, idx, dim_max);
            let n_trunc = suggested_truncation(&inst).expect("PD instance");
            let sum = averaging_sum(&inst, n_trunc, y_grid).expect("valid instance");
            let upper = sum
                .upper_estimate()
                .expect("B ⪰ 0.01 certifies a two-sided estimate");
            let b_norm = eigensolve_sym(&inst.b, false)
                .expect("small dim")
                .max_eigenvalue();
            let theorem = self_adjoint_bound(b_norm, inst.phi.norm_squared());
            InstanceReport {
                instance_seed: idx,
                lhs: upper,
                bound: theorem,
                margin: theorem - upper,
                certified: true,
            }
        })
        .collect();
    // The acceptance gate normalizes by the flat 2π‖φ‖² bound (‖φ‖ = 1).
    let worst = reports
        .iter()
        .map(|r| r.lhs / (2.0 * pi()))
        .fold(f64::NEG_INFINITY, f64::max);
    let violations = reports.iter().filter(|r| r.lhs > 2.0 * pi()).count();
    let check = CheckOutcome {
        id: "spectral_averaging_bound".into(),
        statement: "certified Σ_n sup_y ⟨Bφ,((A+(n+y)B)²+1)⁻¹Bφ⟩ ≤ 2π·‖φ‖²".into(),
        measured: worst,
        bound: 1.0,
        margin: 1.0 - worst,
        passed: violations == 0,
    };
    (reports, check)
}

/// Partial (lower) dissipative sums against π(1 + 1/λ)‖φ‖².
pub fn verify_dissipative(
    n_instances: usize,
    dim_max: usize,
    lambdas: &[f64],
    master_seed: u64,
    y_grid: usize,
) -> (Vec<InstanceReport>, CheckOutcome) {
    let reports: Vec<InstanceReport> = (0..n_instances as u64)
        .into_par_iter()
        .map(|idx| {
            let lambda = lambdas[(idx as usize) % lambdas.len()];
            let inst = random_dissipative_instance(master_seed, idx, dim_max, lambda);
            let n_trunc = suggested_truncation(&inst).expect("PD instance");
            let sum = dissipative_sum(&inst, n_trunc, y_grid).expect("valid instance");
            let bound = dissipative_bound(lambda, inst.phi.norm_squared());
            // The partial sum is a rigorous lower estimate; exceeding the
            // bound falsifies the inequality outright. Nonnegativity of the
            // summands is part of the contract.
            let lhs = if sum.min_term < -1e-12 {
                f64::INFINITY
            } else {
                sum.lower_estimate()
            };
            InstanceReport {
                instance_seed: idx,
                lhs,
                bound,
                margin: bound - lhs,
                certified: sum.upper_estimate().is_some(),
            }
        })
        .collect();
    let worst = reports
        .iter()
        .map(|r| r.lhs / r.bound)
        .fold(f64::NEG_INFINITY, f64::max);
    let violations = reports.iter().filter(|r| r.lhs > r.bound).count();
    let check = CheckOutcome {
        id: "dissipative_averaging_bound".into(),
        statement: "Σ_n sup_y (−Im)⟨B^½φ,(A+(n+y)B+iλB)⁻¹B^½φ⟩ ≤ π(1+1/λ)‖φ‖²".into(),
        measured: worst,
        bound: 1.0,
        margin: 1.0 - worst,
        passed: violations == 0,
    };
    (reports, check)
}

/// ℓ(κ; b) ≤ π(1 + 1/b) over the (κ, b) grid, plus the closed-form value
/// ℓ(0; 1) = 1 + π·coth(π) as an exactness anchor.
pub fn verify_ell_grid(n_trunc: usize) -> (Vec<InstanceReport>, Vec<CheckOutcome>) {
    let kappas: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let bs = [0.1, 0.5, 1.0, 2.0, 10.0];
    let mut reports = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for (i, &kappa) in kappas.iter().enumerate() {
        for (j, &b) in bs.iter().enumerate() {
            let sum = ell_value(kappa, b, n_trunc).expect("valid grid point");
            let upper = sum.upper_estimate().expect("closed form certifies");
            let bound = ell_bound(b);
            worst = worst.max(upper / bound);
            reports.push(InstanceReport {
                instance_seed: (i * bs.len() + j) as u64,
                lhs: upper,
                bound,
                margin: bound - upper,
                certified: true,
            });
        }
    }
    let oracle = 1.0 + pi() / pi().tanh();
    let at_origin = ell_value(0.0, 1.0, n_trunc).expect("valid").partial_sum;
    let checks = vec![
        CheckOutcome {
            id: "lattice_sum_bound".into(),
            statement: "ℓ(κ; b) ≤ π(1 + 1/b) on κ ∈ {0..1}, b ∈ {0.1,0.5,1,2,10}".into(),
            measured: worst,
            bound: 1.0,
            margin: 1.0 - worst,
            passed: reports.iter().all(|r| r.lhs <= r.bound),
        },
        CheckOutcome::upper(
            "lattice_sum_origin_value",
            "|ℓ(0; 1) − (1 + π·coth π)| ≤ 1e-3",
            (at_origin - oracle).abs(),
            1e-3,
        ),
    ];
    (reports, checks)
}

/// lhs ≥ rhs − 1e−10 on random (H, φ, E₀, ε), plus exact endpoint equality
/// in the scalar worst case.
pub fn verify_arctan(
    n_instances: usize,
    dim_max: usize,
    master_seed: u64,
) -> (Vec<InstanceReport>, Vec<CheckOutcome>) {
    let reports: Vec<InstanceReport> = (0..n_instances as u64)
        .into_par_iter()
        .map(|idx| {
            let mut rng = substream(master_seed, &[0xA7, idx]);
            let dim = 1 + (rng.random::<u64>() as usize) % dim_max;
            let raw = DMatrix::from_fn(dim, dim, |_, _| rng.random::<f64>() * 4.0 - 2.0);
            let h = (&raw + raw.transpose()) * 0.5;
            let sd = eigensolve_sym(&h, true).expect("small dim");
            let phi = random_unit(&mut rng, dim);
            let span = (sd.max_eigenvalue() - sd.min_eigenvalue()).max(1.0);
            let e0 = sd.min_eigenvalue() - 0.1 * span + 1.2 * span * rng.random::<f64>();
            let eps = 1e-3 + rng.random::<f64>().powi(2);
            let (lhs, rhs) = arctan_projector_check(&sd, &phi, e0, eps).expect("eps > 0");
            InstanceReport {
                instance_seed: idx,
                lhs: rhs, // checked quantity: rhs must not exceed lhs
                bound: lhs,
                margin: lhs - rhs,
                certified: true,
            }
        })
        .collect();
    let worst_defect = reports
        .iter()
        .map(|r| r.bound - r.lhs)
        .fold(f64::INFINITY, f64::min);
    // Scalar endpoint case: eigenvalue exactly at E₀ gives equality at π/4.
    let op = crate::operators::LatticeOperator {
        repr: crate::operators::OperatorRepr::Diagonal(DVector::from_element(1, 0.25)),
        box_spec: BoxSpec::new(1, 1, 1).expect("valid"),
        provenance: crate::operators::Provenance::Sum,
    };
    let sd = eigensolve(&op, true).expect("scalar");
    let (lhs_eq, rhs_eq) =
        arctan_projector_check(&sd, &DVector::from_element(1, 1.0), 0.25, 0.5).expect("eps > 0");
    let checks = vec![
        CheckOutcome {
            id: "arctan_projector_inequality".into(),
            statement: "⟨φ,[arctan((E₀+ε−H)/ε) − arctan((E₀−H)/ε)]φ⟩ ≥ (π/4)⟨φ,E_H(Δ_ε)φ⟩".into(),
            measured: worst_defect,
            bound: -1e-10,
            margin: worst_defect + 1e-10,
            passed: worst_defect >= -1e-10,
        },
        CheckOutcome::upper(
            "arctan_endpoint_equality",
            "scalar endpoint case attains equality at π/4 to 1e-12",
            (lhs_eq - pi() / 4.0).abs().max((rhs_eq - pi() / 4.0).abs()),
            1e-12,
        ),
    ];
    (reports, checks)
}

/// Monte Carlo means of the averaged resolvent window integral and projector
/// matrix element against 2π·s(ε)‖φ‖² and 8·s(ε)‖φ‖², at 3σ.
pub fn verify_resolvent_bounds(
    epsilons: &[f64],
    n_realizations: usize,
    master_seed: u64,
) -> Result<Vec<CheckOutcome>, crate::averaging::AveragingError> {
    let l = 64;
    let bx = BoxSpec::new(1, l, 1)?;
    let h0 = build_background(&bx, &CellPotential::zero(), 0.0)?;
    let u = SingleSitePotential::cell_indicator(1, 1);
    let measure = MeasureSpec::uniform(0.0, 1.0)?;
    // Freeze every other site at a fixed draw; the bound concerns the
    // conditional average over the single remaining coupling.
    let site_j = l / 2;
    let mut frozen = {
        let field = crate::experiments::draw_couplings(&bx, &measure, master_seed, u64::MAX);
        field.values
    };
    frozen[site_j] = 0.0;
    let v_rest = assemble_anderson(&bx, &u, &CouplingField { values: frozen })?;
    let h_perp = h0.add(&v_rest)?;
    let mut u_site = DVector::zeros(l);
    u_site[site_j] = 1.0;
    let model = ResolventModel {
        h_perp,
        u_site,
        measure,
    };
    let mut rng = substream(master_seed, &[0x9E]);
    let phi = random_unit(&mut rng, l);
    // Window near the middle of the perturbed spectrum.
    let e0 = 2.2;
    let mut checks = Vec::new();
    for &eps in epsilons {
        let out = resolvent_expectation(&model, &phi, e0, eps, n_realizations, master_seed)?;
        checks.push(CheckOutcome::upper(
            &format!("resolvent_integral_bound_eps{eps}"),
            "E{∫_Δε Im⟨uφ,(H(ω)−E−iε)⁻¹uφ⟩dE} ≤ 2π·s(ε)‖φ‖² + 3σ",
            out.integral_mean,
            out.bound_2pi + 3.0 * out.integral_stderr,
        ));
        checks.push(CheckOutcome::upper(
            &format!("projector_expectation_bound_eps{eps}"),
            "E{⟨φ,uE_H(Δε)uφ⟩} ≤ 8·s(ε)‖φ‖² + 3σ",
            out.projector_mean,
            out.bound_8s + 3.0 * out.projector_stderr,
        ));
    }
    Ok(checks)
}

/// Volume scaling of the mean window count on a 1D ladder: the log–log slope
/// against |Λ| must sit at 1 within the stated tolerance.
pub fn verify_wegner_volume_scaling(
    cells: &[usize],
    epsilon: f64,
    n_realizations: usize,
    master_seed: u64,
) -> Result<(ResultTable, CheckOutcome), ExperimentError> {
    // Coupling width 3 smooths the averaged density of states past the
    // clean-spectrum level spacing of the smallest box, so the window mass
    // is volume-proportional without finite-size lumps. E₀ = 2 + 3/2 is
    // mid-spectrum for the averaged operator.
    let cfg = ExperimentConfig {
        model: ModelSpec {
            dimension: 1,
            cells_per_side: cells.to_vec(),
            points_per_cell: 1,
            u: PotentialSpec::CellIndicator,
            v0: CellPotential::zero(),
            field_b: 0.0,
        },
        measure: MeasureSpec::uniform(0.0, 3.0)?,
        energy_e0: EnergyPolicy::Fixed { value: 3.5 },
        epsilons: vec![epsilon],
        n_realizations,
        master_seed,
        workers: 0,
    };
    let table = run_wegner(&cfg)?;
    let pts: Vec<(f64, f64)> = cells
        .iter()
        .filter_map(|&l| {
            table
                .mean_stderr("trace_window", l, epsilon)
                .map(|(m, _)| (l as f64, m))
        })
        .collect();
    let slope = loglog_slope(&pts)?;
    let check = CheckOutcome::in_range(
        "wegner_volume_scaling",
        "E{Tr E_Λ([E₀−ε,E₀+ε])} grows like |Λ|: log-log slope within 1.0 ± 0.15",
        slope,
        0.85,
        1.15,
    );
    Ok((table, check))
}

/// Transfer of the measure's modulus exponent to the window statistic:
/// uniform couplings give a Lipschitz (slope 1) window count, Cantor
/// couplings the Hölder slope log2/log3, and a point mass shows the plateau
/// that rules out any decay.
///
/// The Cantor case needs the single-coupling regime: eigenvalues that depend
/// on several couplings have convolution-smoothed laws and the window count
/// turns Lipschitz no matter how rough the single-site measure is. Strong
/// coupling (amplitude A ≫ bandwidth) pins each eigenvalue to one site, and
/// windows matched to the level-j ternary cell around the measure-generic
/// point 1/4 = 0.0202...₃ capture exactly one cell of mass 2⁻ʲ = s(2ε), the
/// worst case of the window bound. The amplitude grows faster than the
/// windows shrink so that resonant hybridization (probability ~ A^(−α) per
/// neighbor) stays negligible down to the deepest window.
pub fn verify_modulus_transfer(
    l: usize,
    n_realizations: usize,
    master_seed: u64,
) -> Result<(Vec<ResultTable>, Vec<CheckOutcome>), ExperimentError> {
    let mut tables = Vec::new();
    let mut checks = Vec::new();
    let base_model = ModelSpec {
        dimension: 1,
        cells_per_side: vec![l],
        points_per_cell: 1,
        u: PotentialSpec::CellIndicator,
        v0: CellPotential::zero(),
        field_b: 0.0,
    };

    // Uniform couplings on [0, 3]: smooth averaged density of states and a
    // clean Lipschitz window count. E₀ = 2 (Laplacian diagonal) + 3/2 (mean
    // coupling) sits mid-spectrum of the averaged operator.
    let eps_uniform = vec![0.02, 0.04, 0.08, 0.16];
    let cfg = ExperimentConfig {
        model: base_model.clone(),
        measure: MeasureSpec::uniform(0.0, 3.0)?,
        energy_e0: EnergyPolicy::Fixed { value: 3.5 },
        epsilons: eps_uniform.clone(),
        n_realizations,
        master_seed,
        workers: 0,
    };
    let table = run_wegner(&cfg)?;
    let (pts, errs) = collect_eps_points(&table, l, &eps_uniform);
    let fit = powerlaw_fit(&pts, Some(&errs))?;
    checks.push(CheckOutcome::in_range(
        "modulus_transfer_uniform",
        "uniform couplings: ε-exponent of E{Tr E(Δ_ε)} within 1.0 ± 0.15",
        fit.exponent,
        0.85,
        1.15,
    ));
    tables.push(table);

    // Cantor couplings scaled by A = 1.2·3⁸, windows = the level-j cell
    // around A/4 for j = 8..11, each of mass exactly 2⁻ʲ.
    let j0 = 8;
    let amp = 1.2 * 3.0f64.powi(j0);
    let cantor_scaled = MeasureSpec::toeplitz(
        MeasureSpec::cantor(30)?,
        vec![crate::measures::FilterCoefficient {
            offset: vec![0],
            alpha: amp,
        }],
    )?;
    let mut pts = Vec::new();
    let mut errs = Vec::new();
    let mut cantor_rows = ResultTable::default();
    for j in j0..(j0 + 4) {
        let w = 3.0f64.powi(-j);
        let center = cantor_cell_left(0.25, j) + 0.5 * w;
        let eps = 0.5 * amp * w;
        let cfg = ExperimentConfig {
            model: base_model.clone(),
            measure: cantor_scaled.clone(),
            energy_e0: EnergyPolicy::Fixed {
                value: 2.0 + amp * center,
            },
            epsilons: vec![eps],
            n_realizations,
            master_seed,
            workers: 0,
        };
        let table = run_wegner(&cfg)?;
        if let Some((mean, stderr)) = table.mean_stderr("trace_window", l, eps) {
            if mean > 0.0 {
                pts.push((eps, mean));
                errs.push(stderr.max(1e-12 * mean));
            }
        }
        cantor_rows.rows.extend(table.rows);
        cantor_rows.summaries.extend(table.summaries);
    }
    cantor_rows.canonical_sort();
    let fit = powerlaw_fit(&pts, Some(&errs))?;
    let alpha = 2.0f64.ln() / 3.0f64.ln();
    checks.push(CheckOutcome::in_range(
        "modulus_transfer_cantor",
        "Cantor couplings: ε-exponent within log2/log3 ± 0.10",
        fit.exponent,
        alpha - 0.10,
        alpha + 0.10,
    ));
    tables.push(cantor_rows);

    // Point-mass negative control: E₀ pinned at an eigenvalue of the (now
    // deterministic) operator; the window count cannot vanish as ε → 0.
    let bx = BoxSpec::new(1, l, 1)?;
    let u = PotentialSpec::CellIndicator.build(&bx)?;
    let h_det = build_background(&bx, &CellPotential::zero(), 0.0)?.add(&assemble_anderson(
        &bx,
        &u,
        &CouplingField::constant(&bx, 0.5),
    )?)?;
    let sd = eigensolve(&h_det, false)?;
    let mid = 0.5 * (sd.min_eigenvalue() + sd.max_eigenvalue());
    let e_atom = sd
        .eigenvalues
        .iter()
        .cloned()
        .min_by(|a, b| (a - mid).abs().total_cmp(&(b - mid).abs()))
        .expect("nonempty spectrum");
    let eps_atomic = vec![0.001, 0.01, 0.1];
    let cfg = ExperimentConfig {
        model: base_model,
        measure: MeasureSpec::atomic(vec![(0.5, 1.0)])?,
        energy_e0: EnergyPolicy::Fixed { value: e_atom },
        epsilons: eps_atomic.clone(),
        n_realizations,
        master_seed,
        workers: 0,
    };
    let table = run_wegner(&cfg)?;
    let plateau = eps_atomic
        .iter()
        .filter_map(|&eps| table.mean_stderr("trace_window", l, eps))
        .map(|(m, _)| m)
        .fold(f64::INFINITY, f64::min);
    checks.push(CheckOutcome::lower(
        "modulus_transfer_atomic_plateau",
        "point-mass couplings: window count plateaus (≥ 1 state) as ε → 0",
        plateau,
        1.0,
    ));
    tables.push(table);
    Ok((tables, checks))
}

/// Left endpoint of the level-j ternary cell containing x (x must carry no
/// digit 1 above level j; exact for x = 1/4 whose f64 ternary walk is
/// periodic and exact).
fn cantor_cell_left(x: f64, level: i32) -> f64 {
    let (mut a, mut xx, mut w) = (0.0, x, 1.0);
    for _ in 0..level {
        w /= 3.0;
        let y = 3.0 * xx;
        let d = if y >= 2.0 {
            2.0
        } else if y >= 1.0 {
            1.0
        } else {
            0.0
        };
        a += d * w;
        xx = y - d;
    }
    a
}

fn collect_eps_points(
    table: &ResultTable,
    l: usize,
    epsilons: &[f64],
) -> (Vec<(f64, f64)>, Vec<f64>) {
    let mut pts = Vec::new();
    let mut errs = Vec::new();
    for &eps in epsilons {
        if let Some((mean, stderr)) = table.mean_stderr("trace_window", l, eps) {
            if mean > 0.0 {
                pts.push((eps, mean));
                errs.push(stderr.max(1e-12 * mean));
            }
        }
    }
    (pts, errs)
}

/// The magnetic case at the lowest Landau band: exact flux-count degeneracy
/// and |Λ| = L² volume scaling of the window count.
pub fn verify_landau_scaling(
    cells: &[usize],
    flux_denominator: usize,
    epsilon: f64,
    n_realizations: usize,
    master_seed: u64,
) -> Result<(ResultTable, Vec<CheckOutcome>), ExperimentError> {
    let field_b = 2.0 * pi() / flux_denominator as f64;
    // Couplings centered on zero keep the perturbed band at the Landau
    // level, so the window at the band center sees the band itself.
    let cfg = ExperimentConfig {
        model: ModelSpec {
            dimension: 2,
            cells_per_side: cells.to_vec(),
            points_per_cell: 1,
            u: PotentialSpec::CosineBump { radius_cells: 0.45 },
            v0: CellPotential::zero(),
            field_b,
        },
        measure: MeasureSpec::uniform(-0.5, 0.5)?,
        energy_e0: EnergyPolicy::LandauBandCenter { index: 0 },
        epsilons: vec![epsilon],
        n_realizations,
        master_seed,
        workers: 0,
    };
    let table = run_landau(&cfg, 0)?;
    let mut checks = Vec::new();
    for &l in cells {
        let degeneracy = table
            .summary(&format!("unperturbed_degeneracy_L{l}"))
            .map(|s| s.estimate)
            .unwrap_or(f64::NAN);
        let quanta = table
            .summary(&format!("flux_quanta_L{l}"))
            .map(|s| s.estimate)
            .unwrap_or(f64::NAN);
        checks.push(CheckOutcome::upper(
            &format!("landau_degeneracy_L{l}"),
            "unperturbed band count equals the flux quanta B·L²/2π exactly",
            (degeneracy - quanta).abs(),
            0.0,
        ));
    }
    let pts: Vec<(f64, f64)> = cells
        .iter()
        .filter_map(|&l| {
            table
                .mean_stderr("trace_window", l, epsilon)
                .filter(|(m, _)| *m > 0.0)
                .map(|(m, _)| ((l * l) as f64, m))
        })
        .collect();
    let slope = loglog_slope(&pts)?;
    checks.push(CheckOutcome::in_range(
        "landau_volume_scaling",
        "E{Tr E(Δ)} at the lowest band center grows like L²: exponent 1.0 ± 0.2",
        slope,
        0.8,
        1.2,
    ));
    Ok((table, checks))
}

/// The K₀ comparison on a dim-64 free operator with random probes.
pub fn verify_k0(n_probes: usize, master_seed: u64) -> Result<CheckOutcome, ExperimentError> {
    let bx = BoxSpec::new(1, 64, 1)?;
    let h0 = build_background(&bx, &CellPotential::zero(), 0.0)?;
    let sd = eigensolve(&h0, true)?;
    let delta = Interval::new(1.8, 2.2).expect("valid");
    let tilde = Interval::new(1.5, 2.5).expect("valid");
    let ip = IntervalPair::new(delta, tilde, 1.0, &sd)?;
    let worst = (0..n_probes as u64)
        .into_par_iter()
        .map(|idx| {
            let mut rng = substream(master_seed, &[0xC0, idx]);
            let psi = DVector::from_fn(64, |_, _| rng.random::<f64>() - 0.5);
            let probe = delta.lo + delta.width() * rng.random::<f64>();
            let (lhs, rhs, _) = k0_comparison(&sd, &ip, probe, &psi).expect("valid probe");
            rhs - lhs
        })
        .reduce(|| f64::INFINITY, f64::min);
    Ok(CheckOutcome {
        id: "k0_resolvent_comparison".into(),
        statement: "⟨ψ,E₀(Δ̃ᶜ)(H₀−E)⁻²ψ⟩ ≤ K₀⟨ψ,(H₀+M)⁻²ψ⟩".into(),
        measured: worst,
        bound: -1e-10,
        margin: worst + 1e-10,
        passed: worst >= -1e-10,
    })
}

/// The iterated trace inequality on random projector/operator pairs.
pub fn verify_iterated_trace(n_instances: usize, master_seed: u64) -> CheckOutcome {
    let worst = (0..n_instances as u64)
        .into_par_iter()
        .map(|idx| {
            let mut rng = substream(master_seed, &[0x17, idx]);
            let dim = 32;
            let rank = 8;
            let raw = DMatrix::from_fn(dim, dim, |_, _| rng.random::<f64>() - 0.5);
            let q = raw.qr().q();
            let frame = q.columns(0, rank).into_owned();
            let p = &frame * frame.transpose();
            let raw_k = DMatrix::from_fn(dim, dim, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let k = (&raw_k + raw_k.transpose()) * 0.5;
            let mut min_margin = f64::INFINITY;
            for m in 1..=3usize {
                let sigmas: Vec<f64> = (0..m).map(|_| 0.2 + 1.8 * rng.random::<f64>()).collect();
                let (lhs, rhs) = iterated_trace_inequality(&p, &k, m, &sigmas)
                    .expect("projector within tolerance");
                min_margin = min_margin.min(rhs - lhs);
                // The canonical weights σ_j = K₀^(−2^(j−1)) for a sampled K₀.
                let k0 = 1.5 + 3.0 * rng.random::<f64>();
                let (lhs, rhs) = iterated_trace_inequality(
                    &p,
                    &k,
                    m,
                    &crate::tracebounds::canonical_sigmas(k0, m),
                )
                .expect("projector within tolerance");
                min_margin = min_margin.min(rhs - lhs);
            }
            min_margin
        })
        .reduce(|| f64::INFINITY, f64::min);
    CheckOutcome {
        id: "iterated_trace_inequality".into(),
        statement: "|Tr PK̃| ≤ Σ_j σ_j/(2ʲσ₁⋯σ_{j−1})·TrP + TrPK̃^(2^m)/(2ᵐσ₁⋯σ_m)".into(),
        measured: worst,
        bound: -1e-10,
        margin: worst + 1e-10,
        passed: worst >= -1e-10,
    }
}

/// Decay of ‖χ_i(H₀+M)⁻²χ_j‖₁ on the 1D free lattice against the
/// closed-form Green-function oracle, plus the smooth-cutoff polynomial
/// decay. Returns the decay rows (separation, trace norm, fit residual).
pub fn verify_trace_decay(
    master_seed: u64,
) -> Result<(Vec<(f64, f64, f64)>, Vec<CheckOutcome>), ExperimentError> {
    let _ = master_seed; // deterministic scan; kept for interface symmetry
    let l = 64;
    let bx = BoxSpec::new(1, l, 1)?;
    let h0 = build_background(&bx, &CellPotential::zero(), 0.0)?;
    let sd0 = eigensolve(&h0, true)?;
    let m_shift = 1.0;
    let r2 = resolvent_squared(&sd0, m_shift).map_err(|_| ExperimentError::NonPositiveData)?;
    let seps: Vec<f64> = (4..=24).step_by(2).map(|d| d as f64).collect();
    let mut norms = Vec::new();
    let mut oracle = Vec::new();
    for &d in &seps {
        let pair = CutoffPair::sites(&bx, 0, d as usize, 0.0)
            .map_err(|_| ExperimentError::NonPositiveData)?;
        norms.push(sandwich_trace_norm(&r2, &pair));
        oracle.push(green_kernel_r2_oracle_1d(m_shift, d));
    }
    let (c0_amp, rate, r_squared) =
        decay_fit(&seps, &norms).map_err(|_| ExperimentError::NonPositiveData)?;
    let (_, rate_oracle, _) =
        decay_fit(&seps, &oracle).map_err(|_| ExperimentError::NonPositiveData)?;
    let rows: Vec<(f64, f64, f64)> = seps
        .iter()
        .zip(&norms)
        .map(|(&s, &n)| (s, n, n.ln() - (c0_amp.ln() - rate * s)))
        .collect();

    let mut checks = vec![
        CheckOutcome::upper(
            "trace_decay_rate_vs_oracle",
            "fitted c₀ within 15% of the 1D lattice Green-function oracle (M = 1)",
            (rate / rate_oracle - 1.0).abs(),
            0.15,
        ),
        CheckOutcome::lower(
            "trace_decay_fit_quality",
            "exponential decay fit with r² ≥ 0.95",
            r_squared,
            0.95,
        ),
    ];
    // At M = 5 the rate is arccosh(3.5) = 2·arccosh(1.5) by the cosh
    // doubling identity; check the doubled-rate value directly.
    let r2_m5 = resolvent_squared(&sd0, 5.0).map_err(|_| ExperimentError::NonPositiveData)?;
    let norms5: Vec<f64> = seps
        .iter()
        .map(|&d| {
            let pair = CutoffPair::sites(&bx, 0, d as usize, 0.0).expect("valid");
            sandwich_trace_norm(&r2_m5, &pair)
        })
        .collect();
    let (_, rate5, _) = decay_fit(&seps, &norms5).map_err(|_| ExperimentError::NonPositiveData)?;
    let doubled = 2.0 * (1.5f64).acosh();
    checks.push(CheckOutcome::upper(
        "trace_decay_doubled_rate_m5",
        "fitted c₀ at M = 5 within 15% of 2·arccosh(1.5) = arccosh(3.5)",
        (rate5 / doubled - 1.0).abs(),
        0.15,
    ));
    // Smooth spectral cutoff: log-log slope at most −2 over the same range.
    let bump = SmoothBumpSpec {
        center: 0.0,
        half_width: 1.0,
        order: 3,
    };
    let mut pts = Vec::new();
    for &d in &seps {
        let pair = CutoffPair::sites(&bx, 0, d as usize, 0.0).expect("valid");
        let v =
            smooth_kernel_norm(&sd0, &bump, &pair).map_err(|_| ExperimentError::NonPositiveData)?;
        if v > 0.0 {
            pts.push((d, v));
        }
    }
    let slope = loglog_slope(&pts)?;
    checks.push(CheckOutcome::upper(
        "smooth_cutoff_polynomial_decay",
        "‖χ_j f(H₀) χ_k‖₁ log-log slope ≤ −2 for a C² bump",
        slope,
        -2.0,
    ));
    Ok((rows, checks))
}

/// Positivity and L-stability of the unique-continuation constant for the
/// default bump across a ladder of box sizes.
pub fn verify_ucp_stability(
    cells: &[usize],
) -> Result<(Vec<(usize, f64)>, Vec<CheckOutcome>), ExperimentError> {
    let points_per_cell = 4;
    let band = Interval::new(-0.1, 1.0).expect("valid");
    let mut constants = Vec::new();
    for &l in cells {
        let bx = BoxSpec::new(1, l, points_per_cell)?;
        let h0 = build_background(&bx, &CellPotential::zero(), 0.0)?;
        let sd0 = eigensolve(&h0, true)?;
        let u = SingleSitePotential::cosine_bump(1, points_per_cell, 0.4)?;
        let tilde = assemble_tilde(&bx, &u)?;
        let c = ucp_constant(&sd0, band, &tilde)?;
        constants.push((l, c));
    }
    let min_c = constants.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let max_c = constants.iter().map(|p| p.1).fold(0.0f64, f64::max);
    let checks = vec![
        CheckOutcome::lower(
            "ucp_constant_positive",
            "min eig of E₀(Δ̃)ṼE₀(Δ̃) on range E₀(Δ̃) is strictly positive",
            min_c,
            f64::MIN_POSITIVE,
        ),
        CheckOutcome::upper(
            "ucp_constant_stable",
            "unique-continuation constant varies by less than 2× across the ladder",
            max_c / min_c,
            2.0,
        ),
    ];
    Ok((constants, checks))
}
