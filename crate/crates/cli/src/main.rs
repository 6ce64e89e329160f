//! Command-line front end for the response toolkit.
//!
//! Six subcommands drive the library end to end: `density`, `response`,
//! `validate`, `audit`, `spectrum`, and `psi`. Configuration comes from an
//! optional key-value file plus flag overrides (flags win); every run
//! leaves its artifacts and a `manifest.json` in the output directory.
//!
//! Exit codes: 0 ok, 1 config error, 2 numerical failure, 3 validation
//! FAIL.

// Negated comparisons like `!(x > 0.0)` are NaN-rejecting guards and must
// stay in that form.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod artifacts;
mod config;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use artifacts::{
    format_real, real, reals, write_atomic, write_csv, write_loglog_svg, write_profile_csv,
    Manifest,
};
use config::{ConfigError, RunConfig};
use response_lab::op::psi_components;
use response_lab::response::{deriv_consistency_l1, response_term, validate_fd_with, EDGE_BAND};
use response_lab::solver::{invariant_density_with, resolvent_solve_with, spectrum};
use response_lab::{
    audit::audit_assumptions, AuditStatus, FamilyRegistry, MapError, MapFamily, NormKind,
    Quadrature, SolveOptions, SolverError, ValidateOptions,
};

#[derive(Parser)]
#[command(
    name = "response-lab",
    version,
    about = "Invariant densities and linear response for cusped interval maps"
)]
struct Cli {
    /// Key-value config file; flags override its entries.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Map family registry name.
    #[arg(long, global = true)]
    family: Option<String>,

    /// Parameter value(s), comma separated.
    #[arg(long, global = true, value_delimiter = ',', value_name = "REALS")]
    epsilon: Option<Vec<f64>>,

    /// Grid cells for collocation solves.
    #[arg(long, global = true, value_name = "N")]
    grid_n: Option<usize>,

    /// Refine certificate quadrature near the support edge.
    #[arg(long, global = true, value_name = "BOOL")]
    refine_near_ae: Option<bool>,

    /// Fixed-point solve tolerance.
    #[arg(long, global = true, value_name = "TOL")]
    tol_fixed_point: Option<f64>,

    /// Resolvent solve tolerance.
    #[arg(long, global = true, value_name = "TOL")]
    tol_resolvent: Option<f64>,

    /// Perturbation sizes for validate/psi, comma separated, decreasing.
    #[arg(long, global = true, value_delimiter = ',', value_name = "REALS")]
    eps_list: Option<Vec<f64>>,

    /// Seed for stochastic diagnostics.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory receiving all artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    output_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the invariant density and write h0.csv.
    Density,
    /// Full response pipeline at epsilon = 0: h0.csv, q.csv, response.csv.
    Response,
    /// Finite-difference validation of the response: deltas.csv + SVG plot.
    Validate {
        /// Negative control: compare the quotients against zero instead of
        /// the computed response (expected to FAIL).
        #[arg(long)]
        null_response: bool,
    },
    /// Run the A1-A9 assumption audit and write audit.json.
    Audit,
    /// Dense collocation eigenvalues and write spectrum.json.
    Spectrum,
    /// Per-branch operator components vs epsilon and write psi.csv.
    Psi,
}

/// A failure routed to its exit code.
enum Failure {
    Config(String),
    Numerical(String),
    Validation(String),
}

impl Failure {
    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numerical(m) | Failure::Validation(m) => m,
        }
    }

    fn exit(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Validation(_) => 3,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

/// Parameter-precondition and domain errors are configuration mistakes;
/// everything else is a numerical failure.
fn from_solver(e: SolverError) -> Failure {
    match &e {
        SolverError::InvalidParameter { .. }
        | SolverError::Map(MapError::EpsilonOutOfRange { .. })
        | SolverError::Map(MapError::OutOfDomain { .. })
        | SolverError::Map(MapError::BadOrder { .. }) => Failure::Config(e.to_string()),
        _ => Failure::Numerical(e.to_string()),
    }
}

fn io_fail(e: std::io::Error) -> Failure {
    Failure::Numerical(format!("artifact write failed: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    init_thread_pool()?;

    let mut config = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = cli.family {
        config.family = v;
    }
    if let Some(v) = cli.epsilon {
        config.epsilon = v;
    }
    if let Some(v) = cli.grid_n {
        config.grid_n = v;
    }
    if let Some(v) = cli.refine_near_ae {
        config.refine_near_ae = v;
    }
    if let Some(v) = cli.tol_fixed_point {
        config.tol_fixed_point = v;
    }
    if let Some(v) = cli.tol_resolvent {
        config.tol_resolvent = v;
    }
    if let Some(v) = cli.eps_list {
        config.eps_list = v;
    }
    if let Some(v) = cli.seed {
        config.seed = v;
    }
    if let Some(v) = cli.output_dir {
        config.output_dir = v;
    }
    config.validate()?;

    let registry = FamilyRegistry::with_builtins();
    let family = registry.get(&config.family).ok_or_else(|| {
        Failure::Config(format!(
            "unknown family '{}' (known: {})",
            config.family,
            registry.names().join(", ")
        ))
    })?;

    std::fs::create_dir_all(&config.output_dir).map_err(|e| {
        Failure::Config(format!(
            "cannot create output dir {}: {e}",
            config.output_dir.display()
        ))
    })?;

    match cli.command {
        Command::Density => cmd_density(family.as_ref(), &config),
        Command::Response => cmd_response(family.as_ref(), &config),
        Command::Validate { null_response } => {
            cmd_validate(family.as_ref(), &config, null_response)
        }
        Command::Audit => cmd_audit(family.as_ref(), &config),
        Command::Spectrum => cmd_spectrum(family.as_ref(), &config),
        Command::Psi => cmd_psi(family.as_ref(), &config),
    }
}

/// Caps the rayon pool when RESPONSE_LAB_THREADS is set. A pool that
/// already exists (second call in-process) is left alone.
fn init_thread_pool() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("RESPONSE_LAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.parse().map_err(|_| {
        Failure::Config(format!(
            "RESPONSE_LAB_THREADS = '{raw}' is not a positive integer"
        ))
    })?;
    if threads == 0 {
        return Err(Failure::Config(
            "RESPONSE_LAB_THREADS must be at least 1".to_string(),
        ));
    }
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    Ok(())
}

fn solve_options(config: &RunConfig) -> SolveOptions {
    SolveOptions {
        refine_near_edge: config.refine_near_ae,
        ..SolveOptions::default()
    }
}

/// Records the failing stage in the manifest before surfacing the error,
/// so a partial run still leaves a diagnosable trail on disk.
fn fail_stage(
    mut manifest: Manifest,
    config: &RunConfig,
    stage: &'static str,
    failure: Failure,
) -> Failure {
    manifest.stage(
        "failed_stage",
        json!({ "stage": stage, "error": failure.message() }),
    );
    let _ = manifest.write(&config.output_dir);
    failure
}

fn cmd_density(family: &dyn MapFamily, config: &RunConfig) -> Result<(), Failure> {
    let eps = config.single_epsilon()?;
    let mut manifest = Manifest::new(config);
    let t0 = Instant::now();
    let solve = invariant_density_with(
        family,
        eps,
        config.grid_n,
        config.tol_fixed_point,
        &solve_options(config),
    )
    .map_err(|e| fail_stage(Manifest::new(config), config, "density", from_solver(e)))?;
    let wall = t0.elapsed().as_secs_f64();

    write_profile_csv(
        &config.output_dir.join("h0.csv"),
        "h",
        solve.density.values(),
    )
    .map_err(io_fail)?;
    manifest.stage(
        "density",
        json!({
            "epsilon": real(eps),
            "grid_n": config.grid_n,
            "residual_l1": real(solve.residual_l1),
            "iterations": solve.iterations,
            "converged": true,
            "wall_clock_s": real(wall),
        }),
    );
    manifest.write(&config.output_dir).map_err(io_fail)?;
    println!(
        "density: residual_l1 = {:.3e} after {} iterations -> {}",
        solve.residual_l1,
        solve.iterations,
        config.output_dir.join("h0.csv").display()
    );
    Ok(())
}

fn cmd_response(family: &dyn MapFamily, config: &RunConfig) -> Result<(), Failure> {
    let mut manifest = Manifest::new(config);
    let t0 = Instant::now();

    let t = Instant::now();
    let fixed_point = invariant_density_with(
        family,
        0.0,
        config.grid_n,
        config.tol_fixed_point,
        &solve_options(config),
    )
    .map_err(|e| fail_stage(Manifest::new(config), config, "fixed_point", from_solver(e)))?;
    let wall_fixed_point = t.elapsed().as_secs_f64();
    let h0 = fixed_point.density;

    let t = Instant::now();
    let q = response_term(family, &h0, config.grid_n)
        .map_err(|e| fail_stage(Manifest::new(config), config, "source_term", from_solver(e)))?;
    let quad = Quadrature::uniform_refined(config.grid_n, family.turning_image(0.0), EDGE_BAND);
    let q_mean = q.integral_on(&quad);
    let wall_source_term = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let resolvent = resolvent_solve_with(family, 0.0, &q, config.tol_resolvent, Some(&h0))
        .map_err(|e| fail_stage(Manifest::new(config), config, "resolvent", from_solver(e)))?;
    let wall_resolvent = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let deriv_consistency = deriv_consistency_l1(family, &h0, 0.0).map_err(|e| {
        fail_stage(
            Manifest::new(config),
            config,
            "deriv_consistency",
            from_solver(e),
        )
    })?;
    let wall_deriv = t.elapsed().as_secs_f64();

    write_profile_csv(&config.output_dir.join("h0.csv"), "h", h0.values()).map_err(io_fail)?;
    write_profile_csv(&config.output_dir.join("q.csv"), "q", q.values()).map_err(io_fail)?;
    write_profile_csv(
        &config.output_dir.join("response.csv"),
        "response",
        resolvent.solution.values(),
    )
    .map_err(io_fail)?;
    manifest.stage(
        "response",
        json!({
            "grid_n": config.grid_n,
            "fixed_point_residual_l1": real(fixed_point.residual_l1),
            "fixed_point_iterations": fixed_point.iterations,
            "q_mean": real(q_mean),
            "resolvent_terms": resolvent.terms_used,
            "resolvent_residual_l1": real(resolvent.residual_l1),
            "deriv_consistency_l1": real(deriv_consistency),
            "wall_fixed_point_s": real(wall_fixed_point),
            "wall_source_term_s": real(wall_source_term),
            "wall_resolvent_s": real(wall_resolvent),
            "wall_deriv_consistency_s": real(wall_deriv),
            "wall_clock_s": real(t0.elapsed().as_secs_f64()),
        }),
    );
    manifest.write(&config.output_dir).map_err(io_fail)?;
    println!(
        "response: q_mean = {:.3e}, {} resolvent terms, residual_l1 = {:.3e}",
        q_mean, resolvent.terms_used, resolvent.residual_l1
    );
    Ok(())
}

fn cmd_validate(
    family: &dyn MapFamily,
    config: &RunConfig,
    null_response: bool,
) -> Result<(), Failure> {
    let mut manifest = Manifest::new(config);
    let options = ValidateOptions {
        null_response,
        resolvent_tol: Some(config.tol_resolvent),
    };
    let t0 = Instant::now();
    let report = validate_fd_with(
        family,
        config.grid_n,
        &config.eps_list,
        config.tol_fixed_point,
        &options,
    )
    .map_err(|e| fail_stage(Manifest::new(config), config, "validate", from_solver(e)))?;
    let wall = t0.elapsed().as_secs_f64();

    let mut rows = Vec::new();
    for (k, (&eps, &delta)) in report.eps_list.iter().zip(&report.deltas).enumerate() {
        let delta_cell = if delta.is_finite() {
            format_real(delta)
        } else {
            "nan".to_string()
        };
        let ratio_cell = match k {
            0 => String::new(),
            _ => {
                let prev = report.deltas[k - 1];
                if delta.is_finite() && prev.is_finite() && prev != 0.0 {
                    format_real(delta / prev)
                } else {
                    String::new()
                }
            }
        };
        rows.push(vec![format_real(eps), delta_cell, ratio_cell]);
    }
    write_csv(
        &config.output_dir.join("deltas.csv"),
        &["epsilon", "delta_l1", "ratio"],
        &rows,
    )
    .map_err(io_fail)?;

    let points: Vec<(f64, f64)> = report
        .eps_list
        .iter()
        .zip(&report.deltas)
        .map(|(&e, &d)| (e, d))
        .collect();
    write_loglog_svg(
        &config.output_dir.join("validate.svg"),
        &points,
        "finite-difference convergence",
        "epsilon",
        "delta L1",
    )
    .map_err(io_fail)?;

    let verdict = match report.fd_pass {
        Some(true) => "PASS",
        Some(false) => "FAIL",
        None => "NO VERDICT",
    };
    manifest.stage(
        "validate",
        json!({
            "grid_n": config.grid_n,
            "null_response": null_response,
            "eps_list": reals(&report.eps_list),
            "deltas": reals(&report.deltas),
            "delta_ratio": report.delta_ratio.map_or(Value::Null, real),
            "fd_pass": report.fd_pass.map_or(Value::Null, Value::Bool),
            "failed_eps": reals(&report.failed_eps),
            "q_mean": real(report.q_mean),
            "resolvent_residual_l1": real(report.resolvent_residual_l1),
            "wall_clock_s": real(wall),
        }),
    );
    manifest.write(&config.output_dir).map_err(io_fail)?;

    println!(
        "validate: {verdict} ({} parameters, ratio = {})",
        report.eps_list.len(),
        report
            .delta_ratio
            .map_or("n/a".to_string(), |r| format!("{r:.3}"))
    );
    match report.fd_pass {
        Some(false) => Err(Failure::Validation(
            "finite-difference deltas do not certify the response".to_string(),
        )),
        None => {
            eprintln!("WARN: fewer than two usable parameters; monotone decrease not checked");
            Ok(())
        }
        Some(true) => Ok(()),
    }
}

fn cmd_audit(family: &dyn MapFamily, config: &RunConfig) -> Result<(), Failure> {
    let mut manifest = Manifest::new(config);
    let t0 = Instant::now();
    let audit = audit_assumptions(family, config.grid_n, &config.epsilon)
        .map_err(|e| fail_stage(Manifest::new(config), config, "audit", from_solver(e)))?;
    let wall = t0.elapsed().as_secs_f64();

    let entries: Vec<Value> = audit
        .entries
        .iter()
        .map(|e| {
            let measured: serde_json::Map<String, Value> = e
                .measured
                .iter()
                .map(|(k, v)| (k.clone(), real(*v)))
                .collect();
            json!({
                "id": e.id,
                "status": match e.status {
                    AuditStatus::Pass => "pass",
                    AuditStatus::Fail => "fail",
                    AuditStatus::NotCheckable => "not-checkable",
                },
                "measured": measured,
                "note": e.note,
            })
        })
        .collect();
    let doc = json!({
        "family": config.family,
        "grid_size": config.grid_n,
        "eps_samples": reals(&config.epsilon),
        "entries": entries,
        "all_pass": audit.all_pass(),
    });
    write_atomic(
        &config.output_dir.join("audit.json"),
        &(serde_json::to_string_pretty(&doc).expect("audit serialization cannot fail") + "\n"),
    )
    .map_err(io_fail)?;

    let failures = audit.failures();
    manifest.stage(
        "audit",
        json!({
            "all_pass": audit.all_pass(),
            "failures": failures,
            "wall_clock_s": real(wall),
        }),
    );
    manifest.write(&config.output_dir).map_err(io_fail)?;

    for e in &audit.entries {
        let status = match e.status {
            AuditStatus::Pass => "pass",
            AuditStatus::Fail => "FAIL",
            AuditStatus::NotCheckable => "not checkable",
        };
        println!("audit: {} {} - {}", e.id, status, e.note);
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Validation(format!(
            "assumption audit failed: {}",
            failures.join(", ")
        )))
    }
}

fn cmd_spectrum(family: &dyn MapFamily, config: &RunConfig) -> Result<(), Failure> {
    let eps = config.single_epsilon()?;
    let mut manifest = Manifest::new(config);
    let t0 = Instant::now();
    let diag = spectrum(family, eps, config.grid_n)
        .map_err(|e| fail_stage(Manifest::new(config), config, "spectrum", from_solver(e)))?;
    let wall = t0.elapsed().as_secs_f64();

    let doc = json!({
        "family": config.family,
        "epsilon": real(eps),
        "grid_n": config.grid_n,
        "leading_eig": real(diag.leading_eig),
        "subdominant_modulus": real(diag.subdominant_modulus),
        "lambda_ly": real(diag.lambda_ly),
        "m_ly": real(diag.m_ly),
        "ess_radius_bound": real(diag.ess_radius_bound),
        "moduli_above_ess": reals(&diag.moduli_above_ess),
        "moduli_top": reals(&diag.moduli_top),
    });
    write_atomic(
        &config.output_dir.join("spectrum.json"),
        &(serde_json::to_string_pretty(&doc).expect("spectrum serialization cannot fail") + "\n"),
    )
    .map_err(io_fail)?;

    manifest.stage(
        "spectrum",
        json!({
            "leading_eig": real(diag.leading_eig),
            "subdominant_modulus": real(diag.subdominant_modulus),
            "ess_radius_bound": real(diag.ess_radius_bound),
            "wall_clock_s": real(wall),
        }),
    );
    manifest.write(&config.output_dir).map_err(io_fail)?;
    println!(
        "spectrum: leading |eig| = {:.12}, subdominant = {:.6}, essential radius <= {:.6}",
        diag.leading_eig, diag.subdominant_modulus, diag.ess_radius_bound
    );
    Ok(())
}

fn cmd_psi(family: &dyn MapFamily, config: &RunConfig) -> Result<(), Failure> {
    for &eps in &config.eps_list {
        if !(eps > 0.0) {
            return Err(Failure::Config(format!(
                "eps_list entry {eps} must be strictly positive for the component gaps"
            )));
        }
    }
    let mut manifest = Manifest::new(config);
    let t0 = Instant::now();
    let h0 = invariant_density_with(
        family,
        0.0,
        config.grid_n,
        config.tol_fixed_point,
        &solve_options(config),
    )
    .map_err(|e| fail_stage(Manifest::new(config), config, "fixed_point", from_solver(e)))?
    .density;
    let base = psi_components(family, &h0, 0.0)
        .map_err(|e| fail_stage(Manifest::new(config), config, "psi", from_solver(e.into())))?;
    let quad = Quadrature::uniform(config.grid_n);

    let mut rows = Vec::new();
    let mut gaps_left = Vec::new();
    let mut gaps_right = Vec::new();
    for &eps in &config.eps_list {
        let pair = psi_components(family, &h0, eps)
            .map_err(|e| fail_stage(Manifest::new(config), config, "psi", from_solver(e.into())))?;
        let g1 = pair
            .left
            .linear_comb(1.0, &base.left, -1.0)
            .norm_on(NormKind::L2, &quad);
        let g2 = pair
            .right
            .linear_comb(1.0, &base.right, -1.0)
            .norm_on(NormKind::L2, &quad);
        rows.push(vec![format_real(eps), format_real(g1), format_real(g2)]);
        gaps_left.push(g1);
        gaps_right.push(g2);
    }
    let wall = t0.elapsed().as_secs_f64();
    write_csv(
        &config.output_dir.join("psi.csv"),
        &["epsilon", "l2_gap_psi1", "l2_gap_psi2"],
        &rows,
    )
    .map_err(io_fail)?;

    // Meaningful only when eps_list is ordered largest-first, as configured.
    let decreasing = gaps_left.windows(2).all(|w| w[1] < w[0])
        && gaps_right.windows(2).all(|w| w[1] < w[0]);
    manifest.stage(
        "psi",
        json!({
            "grid_n": config.grid_n,
            "eps_list": reals(&config.eps_list),
            "l2_gap_psi1": reals(&gaps_left),
            "l2_gap_psi2": reals(&gaps_right),
            "decreasing": decreasing,
            "wall_clock_s": real(wall),
        }),
    );
    manifest.write(&config.output_dir).map_err(io_fail)?;
    println!(
        "psi: {} parameters, gaps decreasing = {decreasing} -> {}",
        config.eps_list.len(),
        config.output_dir.join("psi.csv").display()
    );
    Ok(())
}
