//! `wegnerlab` — build random lattice Hamiltonians, run the Monte Carlo
//! counting experiments, and check every quantitative spectral bound the
//! library certifies.
//!
//! Exit codes separate science from plumbing: 0 means every configured bound
//! check passed, 2 means some numerical inequality was falsified (the
//! offending instance seed is in the summary), and 1 means a usage, config,
//! or I/O problem.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use wegnerlab::experiments::{run_ids, run_landau, run_wegner, ExperimentConfig, ResultTable};
use wegnerlab::report::{self, RunSummary};
use wegnerlab::verify;

/// What to run, where to read the config, and where to write results.
#[derive(Debug, Parser)]
#[command(name = "wegnerlab", version, about)]
struct RunManifest {
    #[command(subcommand)]
    subcommand: Action,
    /// Path to the JSON configuration.
    #[arg(long, global = true, default_value = "configs/default.json")]
    config: PathBuf,
    /// Output directory for results.csv, summary.json, and reports.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread count override (0 = all cores). Falls back to the
    /// WEGNERLAB_WORKERS environment variable, then to the config.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Action {
    /// Window-count statistics Tr E([E₀−ε, E₀+ε]) over the box ladder.
    Wegner,
    /// Normalized eigenvalue-counting function on an energy grid.
    Ids,
    /// Window counts at a Landau band center of the magnetic operator.
    Landau,
    /// Certified spectral-averaging suites (lattice sum, self-adjoint,
    /// dissipative, arctan/projector, resolvent expectations).
    Averaging,
    /// Trace-norm decay scans and operator-norm comparisons.
    Tracebounds,
    /// Everything: all bound checks plus the scaling experiments.
    VerifyAll,
}

/// Top-level configuration file: an experiment section for the Monte Carlo
/// subcommands and a suites section for the verification runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ConfigFile {
    #[serde(default)]
    experiment: Option<ExperimentSection>,
    #[serde(default)]
    suites: SuiteConfig,
    #[serde(default)]
    master_seed: Option<u64>,
    #[serde(default)]
    workers: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ExperimentSection {
    #[serde(flatten)]
    config: ExperimentConfig,
    /// Energy grid for the `ids` subcommand.
    #[serde(default)]
    energy_grid: Vec<f64>,
    /// Landau band index for the `landau` subcommand.
    #[serde(default)]
    landau_index: usize,
}

/// Sizes for the verification suites; every field has a sensible default so
/// a config may specify only what it wants to change.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct SuiteConfig {
    averaging_instances: usize,
    dissipative_instances: usize,
    arctan_instances: usize,
    dim_max: usize,
    y_grid: usize,
    ell_truncation: usize,
    lambdas: Vec<f64>,
    k0_probes: usize,
    iterated_trace_instances: usize,
    resolvent_epsilons: Vec<f64>,
    resolvent_realizations: usize,
    wegner_cells: Vec<usize>,
    wegner_epsilon: f64,
    wegner_realizations: usize,
    modulus_cells: usize,
    modulus_realizations: usize,
    landau_cells: Vec<usize>,
    landau_flux_denominator: usize,
    landau_epsilon: f64,
    landau_realizations: usize,
    ucp_cells: Vec<usize>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            averaging_instances: 200,
            dissipative_instances: 150,
            arctan_instances: 300,
            dim_max: 32,
            y_grid: 16,
            ell_truncation: 10_000,
            lambdas: vec![0.25, 0.5, 1.0],
            k0_probes: 300,
            iterated_trace_instances: 100,
            resolvent_epsilons: vec![0.02, 0.05, 0.1],
            resolvent_realizations: 200,
            wegner_cells: vec![32, 64, 128],
            wegner_epsilon: 0.05,
            wegner_realizations: 100,
            modulus_cells: 64,
            modulus_realizations: 1500,
            landau_cells: vec![12, 24],
            landau_flux_denominator: 12,
            landau_epsilon: 0.05,
            landau_realizations: 12,
            ucp_cells: vec![8, 16, 32],
        }
    }
}

fn main() {
    std::process::exit(run());
}

/// 0 = all checks passed; 1 = usage/config/IO error; 2 = a bound check
/// (a numerical inequality) failed.
fn run() -> i32 {
    let manifest = match RunManifest::try_parse() {
        Ok(m) => m,
        Err(e) => {
            // clap's help/version "errors" are successful exits.
            if e.use_stderr() {
                eprintln!("{e}");
                return 1;
            }
            print!("{e}");
            return 0;
        }
    };
    match dispatch(&manifest) {
        Ok(true) => 0,
        Ok(false) => {
            eprintln!("FALSIFIED: at least one bound check failed; see summary.json");
            2
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn dispatch(manifest: &RunManifest) -> Result<bool> {
    let text = std::fs::read_to_string(&manifest.config)
        .with_context(|| format!("cannot read config {}", manifest.config.display()))?;
    let mut cfg: ConfigFile =
        serde_json::from_str(&text).context("config does not parse as JSON")?;

    // Precedence: CLI flag, then environment, then config file.
    let workers = manifest
        .workers
        .or_else(|| {
            std::env::var("WEGNERLAB_WORKERS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .or(cfg.workers)
        .unwrap_or(0);
    if workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .ok();
    }
    let master_seed = manifest.seed.or(cfg.master_seed).unwrap_or_else(|| {
        cfg.experiment
            .as_ref()
            .map(|e| e.config.master_seed)
            .unwrap_or(0)
    });
    if let Some(exp) = cfg.experiment.as_mut() {
        exp.config.master_seed = master_seed;
    }

    match manifest.subcommand {
        Action::Wegner => {
            let exp = require_experiment(&cfg)?;
            exp.config.validate().map_err(anyhow::Error::from)?;
            let table = run_wegner(&exp.config)?;
            emit_experiment(&manifest.out, master_seed, &table)?;
            Ok(true)
        }
        Action::Ids => {
            let exp = require_experiment(&cfg)?;
            exp.config.validate().map_err(anyhow::Error::from)?;
            anyhow::ensure!(
                !exp.energy_grid.is_empty(),
                "ids needs a nonempty experiment.energy_grid"
            );
            let table = run_ids(&exp.config, &exp.energy_grid)?;
            emit_experiment(&manifest.out, master_seed, &table)?;
            Ok(true)
        }
        Action::Landau => {
            let exp = require_experiment(&cfg)?;
            exp.config.validate().map_err(anyhow::Error::from)?;
            let table = run_landau(&exp.config, exp.landau_index)?;
            emit_experiment(&manifest.out, master_seed, &table)?;
            Ok(true)
        }
        Action::Averaging => {
            let mut summary = RunSummary::new(master_seed);
            run_averaging_suites(&cfg.suites, master_seed, &manifest.out, &mut summary)?;
            report::write_json(&manifest.out.join("summary.json"), &summary)?;
            Ok(summary.all_passed)
        }
        Action::Tracebounds => {
            let mut summary = RunSummary::new(master_seed);
            run_tracebound_suites(&cfg.suites, master_seed, &manifest.out, &mut summary)?;
            report::write_json(&manifest.out.join("summary.json"), &summary)?;
            Ok(summary.all_passed)
        }
        Action::VerifyAll => {
            let mut summary = RunSummary::new(master_seed);
            let mut all_rows = Vec::new();

            run_averaging_suites(&cfg.suites, master_seed, &manifest.out, &mut summary)?;
            run_tracebound_suites(&cfg.suites, master_seed, &manifest.out, &mut summary)?;

            let s = &cfg.suites;
            let (table, check) = verify::verify_wegner_volume_scaling(
                &s.wegner_cells,
                s.wegner_epsilon,
                s.wegner_realizations,
                master_seed,
            )?;
            summary.push_check(check);
            merge_rows(&mut all_rows, "wegner", table);

            let (tables, checks) = verify::verify_modulus_transfer(
                s.modulus_cells,
                s.modulus_realizations,
                master_seed,
            )?;
            summary.extend_checks(checks);
            for (name, table) in ["modulus_uniform", "modulus_cantor", "modulus_atomic"]
                .iter()
                .zip(tables)
            {
                merge_rows(&mut all_rows, name, table);
            }

            let (table, checks) = verify::verify_landau_scaling(
                &s.landau_cells,
                s.landau_flux_denominator,
                s.landau_epsilon,
                s.landau_realizations,
                master_seed,
            )?;
            summary.extend_checks(checks);
            merge_rows(&mut all_rows, "landau", table);

            let (constants, checks) = verify::verify_ucp_stability(&s.ucp_cells)?;
            summary.extend_checks(checks);
            for (l, c) in constants {
                summary.fits.push(wegnerlab::experiments::FitSummary {
                    name: format!("ucp_constant_L{l}"),
                    estimate: c,
                    stderr: 0.0,
                });
            }

            all_rows.sort_by(|a, b| {
                a.statistic
                    .cmp(&b.statistic)
                    .then(a.l.cmp(&b.l))
                    .then(a.epsilon.total_cmp(&b.epsilon))
                    .then(a.realization.cmp(&b.realization))
            });
            report::write_results_csv(&manifest.out.join("results.csv"), &all_rows)?;
            report::write_json(&manifest.out.join("summary.json"), &summary)?;
            for check in summary.checks.iter() {
                println!(
                    "{} {} (measured {:.6}, bound {:.6})",
                    if check.passed { "PASS" } else { "FAIL" },
                    check.id,
                    check.measured,
                    check.bound
                );
            }
            Ok(summary.all_passed)
        }
    }
}

fn require_experiment(cfg: &ConfigFile) -> Result<ExperimentSection> {
    cfg.experiment
        .clone()
        .ok_or_else(|| anyhow::anyhow!("config has no \"experiment\" section"))
}

fn emit_experiment(out: &Path, master_seed: u64, table: &ResultTable) -> Result<()> {
    let mut summary = RunSummary::new(master_seed);
    summary.fits = table.summaries.clone();
    report::write_results_csv(&out.join("results.csv"), &table.rows)?;
    report::write_json(&out.join("summary.json"), &summary)?;
    Ok(())
}

fn merge_rows(
    all_rows: &mut Vec<wegnerlab::experiments::ResultRow>,
    prefix: &str,
    table: ResultTable,
) {
    for mut row in table.rows {
        row.statistic = format!("{prefix}/{}", row.statistic);
        all_rows.push(row);
    }
}

fn run_averaging_suites(
    s: &SuiteConfig,
    master_seed: u64,
    out: &Path,
    summary: &mut RunSummary,
) -> Result<()> {
    let (ell_reports, checks) = verify::verify_ell_grid(s.ell_truncation);
    summary.extend_checks(checks);
    let (sa_reports, check) =
        verify::verify_spectral_averaging(s.averaging_instances, s.dim_max, master_seed, s.y_grid);
    summary.push_check(check);
    let (diss_reports, check) = verify::verify_dissipative(
        s.dissipative_instances,
        s.dim_max,
        &s.lambdas,
        master_seed,
        s.y_grid,
    );
    summary.push_check(check);
    let (arctan_reports, checks) =
        verify::verify_arctan(s.arctan_instances, s.dim_max.max(2) * 2, master_seed);
    summary.extend_checks(checks);
    let checks = verify::verify_resolvent_bounds(
        &s.resolvent_epsilons,
        s.resolvent_realizations,
        master_seed,
    )?;
    summary.extend_checks(checks);

    #[derive(Serialize)]
    struct AveragingReport<'a> {
        lattice_sum: &'a [report::InstanceReport],
        self_adjoint: &'a [report::InstanceReport],
        dissipative: &'a [report::InstanceReport],
        arctan_projector: &'a [report::InstanceReport],
    }
    report::write_json(
        &out.join("averaging_report.json"),
        &AveragingReport {
            lattice_sum: &ell_reports,
            self_adjoint: &sa_reports,
            dissipative: &diss_reports,
            arctan_projector: &arctan_reports,
        },
    )?;
    Ok(())
}

fn run_tracebound_suites(
    s: &SuiteConfig,
    master_seed: u64,
    out: &Path,
    summary: &mut RunSummary,
) -> Result<()> {
    let (decay_rows, checks) = verify::verify_trace_decay(master_seed)?;
    summary.extend_checks(checks);
    report::write_decay_csv(&out.join("trace_decay.csv"), &decay_rows)?;
    summary.push_check(verify::verify_k0(s.k0_probes, master_seed)?);
    summary.push_check(verify::verify_iterated_trace(
        s.iterated_trace_instances,
        master_seed,
    ));
    Ok(())
}
