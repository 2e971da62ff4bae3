use std::fmt::Write as _;
use std::io::Write;

use mmot_core::harness::{converge, converge_measure, swap_search, ConvergeOptions, ConvergenceTable};
use mmot_core::mmot::{load_plan, load_potentials, save_plan, save_potentials, VerifyOptions};
use mmot_core::{
    discretize, load_measure, solve_mmot, verify_duality, CostKind, CostMode, CostModel, DiscreteMeasure,
    DualityReport, GridSpec, SolveOptions, TransportPlan,
};
use serde::Serialize;

use crate::config::{RunConfig, SubcommandKind, TableFormat};
use crate::density::DensitySpec;
use crate::{CliError, EXIT_OK, EXIT_VERIFY};

/// Relative tolerance for the level-to-level monotonicity check.
const MONO_TOL: f64 = 1e-9;

pub fn dispatch(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    match cfg.subcommand {
        SubcommandKind::Solve => solve(cfg, stdout, stderr),
        SubcommandKind::Converge => converge_cmd(cfg, stdout, stderr),
        SubcommandKind::Verify => verify(cfg, stdout, stderr),
        SubcommandKind::Improve => improve(cfg, stdout, stderr),
    }
}

/// Exit code of a convergence study: 4 when any row violates the gap
/// tolerance, admissibility, the potential bound or monotonicity.
pub fn table_exit_code(table: &ConvergenceTable, gap_tol: f64) -> i32 {
    if table.violations(gap_tol, MONO_TOL).is_empty() {
        EXIT_OK
    } else {
        EXIT_VERIFY
    }
}

fn emit(cfg: &RunConfig, stdout: &mut dyn Write, text: &str) -> Result<(), CliError> {
    match &cfg.opts.out {
        Some(path) => std::fs::write(path, text).map_err(|e| io_error(path, e)),
        None => stdout.write_all(text.as_bytes()).map_err(|e| CliError::Config(format!("stdout: {e}"))),
    }
}

fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

fn say(stderr: &mut dyn Write, text: &str) {
    let _ = stderr.write_all(text.as_bytes());
}

fn cost_name(model: &CostModel) -> String {
    match model.kind {
        CostKind::Coulomb => "coulomb".into(),
        CostKind::Power(s) => format!("power(s={s})"),
    }
}

/// Discrete measure at `level`: presets are discretized, files are read and
/// aggregated down when finer.
fn measure_at(cfg: &RunConfig, spec: &DensitySpec, level: u32) -> Result<DiscreteMeasure, CliError> {
    match spec {
        DensitySpec::Preset(d) => {
            let grid = GridSpec::new(level, cfg.opts.r, d.dim())?;
            Ok(discretize(d, &grid, cfg.opts.samples_per_cell)?)
        }
        DensitySpec::File(path) => {
            let m = load_measure(path)?;
            if m.grid().level < level {
                return Err(CliError::Config(format!(
                    "{} is given at level {}, coarser than the requested level {level}",
                    path.display(),
                    m.grid().level
                )));
            }
            Ok(m.coarsen_to(level)?)
        }
    }
}

fn verify_options(cfg: &RunConfig, cost_mode: CostMode) -> VerifyOptions {
    VerifyOptions {
        cost_mode,
        feas_tol: cfg.opts.feas_tol,
        window: None,
        m_fraction: cfg.opts.m_fraction,
    }
}

fn report_failures(report: &DualityReport, gap_tol: f64) -> Vec<String> {
    let mut out = Vec::new();
    if !(report.relative_gap <= gap_tol) {
        out.push(format!("relative gap {:e} exceeds {gap_tol:e}", report.relative_gap));
    }
    if !report.dual_feasible {
        out.push(format!("potentials violate the cost by {:e}", report.max_dual_violation));
    }
    if report.potential_bound.is_some() && !report.potential_bound_satisfied {
        out.push("potentials exceed the a priori bound".into());
    }
    out
}

#[derive(Serialize)]
struct ReportOutput<'a> {
    level: u32,
    n_marginals: usize,
    cost: String,
    cost_mode: String,
    seed: u64,
    support: usize,
    plan_atoms: usize,
    report: &'a DualityReport,
}

fn render_report(cfg: &RunConfig, out: &ReportOutput) -> Result<String, CliError> {
    if cfg.opts.json {
        let mut s = serde_json::to_string_pretty(out).map_err(|e| CliError::Config(e.to_string()))?;
        s.push('\n');
        return Ok(s);
    }
    let mut s = String::new();
    let _ = writeln!(s, "level={}", out.level);
    let _ = writeln!(s, "N={}", out.n_marginals);
    let _ = writeln!(s, "cost={}", out.cost);
    let _ = writeln!(s, "cost_mode={}", out.cost_mode);
    let _ = writeln!(s, "seed={}", out.seed);
    let _ = writeln!(s, "support={}", out.support);
    let _ = writeln!(s, "plan_atoms={}", out.plan_atoms);
    s.push_str(&out.report.to_key_value());
    if !s.ends_with('\n') {
        s.push('\n');
    }
    Ok(s)
}

fn finish_report(
    cfg: &RunConfig,
    out: ReportOutput,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, CliError> {
    emit(cfg, stdout, &render_report(cfg, &out)?)?;
    let r = out.report;
    say(
        stderr,
        &format!(
            "level {} N={} {}: primal {:.12} dual {:.12} gap {:.2e} alpha {} sup|u| {:.6}\n",
            out.level,
            out.n_marginals,
            out.cost,
            r.primal_value,
            r.dual_value,
            r.relative_gap,
            if r.diagonal_clearance_alpha == f64::MAX {
                "inf".to_string()
            } else {
                format!("{:.6}", r.diagonal_clearance_alpha)
            },
            r.potential_sup
        ),
    );
    let failures = report_failures(r, cfg.opts.gap_tol);
    if failures.is_empty() {
        Ok(EXIT_OK)
    } else {
        Err(CliError::Verification(failures.join("; ")))
    }
}

fn solve(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    let spec = cfg.density.as_ref().expect("validated");
    let level = cfg.opts.level;
    let measure = measure_at(cfg, spec, level)?;
    let mode = cfg.cost_mode();
    let options = SolveOptions {
        cost_mode: mode,
        ..SolveOptions::default()
    };
    let sol = solve_mmot(&measure, &cfg.model, &options)?;
    let report = verify_duality(&sol.plan, &sol.potentials, &cfg.model, &measure, &verify_options(cfg, mode))?;
    if let Some(p) = &cfg.opts.plan {
        save_plan(&sol.plan, p)?;
    }
    if let Some(p) = &cfg.opts.potentials {
        save_potentials(&sol.potentials, p)?;
    }
    say(
        stderr,
        &format!(
            "solved {} support cells in {} rounds, {} columns\n",
            measure.support_cardinality(),
            sol.rounds,
            sol.columns
        ),
    );
    let out = ReportOutput {
        level,
        n_marginals: cfg.model.n_marginals,
        cost: cost_name(&cfg.model),
        cost_mode: mode.to_string(),
        seed: cfg.opts.seed,
        support: measure.support_cardinality(),
        plan_atoms: sol.plan.len(),
        report: &report,
    };
    finish_report(cfg, out, stdout, stderr)
}

fn converge_cmd(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    let options = ConvergeOptions {
        cost_mode: cfg.cost_mode(),
        samples_per_cell: cfg.opts.samples_per_cell,
        m_fraction: cfg.opts.m_fraction,
        ..ConvergeOptions::default()
    };
    let levels = cfg.levels.clone();
    let table = match cfg.density.as_ref().expect("validated") {
        DensitySpec::Preset(d) => converge(d, &cfg.model, levels, cfg.opts.r, &options)?,
        spec @ DensitySpec::File(_) => {
            let finest = measure_at(cfg, spec, *levels.end())?;
            converge_measure(&finest, &cfg.model, levels, &options)?
        }
    };
    let text = match cfg.opts.format {
        TableFormat::Csv => table.to_csv(cfg.opts.timing),
        TableFormat::Kv => table.to_key_value(cfg.opts.timing),
    };
    emit(cfg, stdout, &text)?;
    let mut summary = String::new();
    for row in &table.rows {
        match &row.result {
            Ok(x) => {
                let _ = writeln!(summary, "level {}: primal {:.12} gap {:.2e} support {}", row.level, x.primal, x.gap, x.support);
            }
            Err(e) => {
                let _ = writeln!(summary, "level {}: failed: {e}", row.level);
            }
        }
    }
    if let Some(u) = table.reference_upper {
        let _ = writeln!(summary, "product-plan cost {u:.12}");
    }
    say(stderr, &summary);
    let code = table_exit_code(&table, cfg.opts.gap_tol);
    if code != EXIT_OK {
        let v = table.violations(cfg.opts.gap_tol, MONO_TOL);
        return Err(CliError::Verification(v.join("; ")));
    }
    Ok(code)
}

fn verify(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    let plan = load_plan(cfg.opts.plan.as_ref().expect("validated"))?;
    let u = load_potentials(cfg.opts.potentials.as_ref().expect("validated"))?;
    let model = cfg.model_for(plan.n_marginals())?;
    let measure = match &cfg.density {
        Some(spec) => measure_at(cfg, spec, plan.grid().level)?,
        None => plan.marginal_measure()?,
    };
    let mode = cfg.cost_mode();
    let report = verify_duality(&plan, &u, &model, &measure, &verify_options(cfg, mode))?;
    let out = ReportOutput {
        level: plan.grid().level,
        n_marginals: model.n_marginals,
        cost: cost_name(&model),
        cost_mode: mode.to_string(),
        seed: cfg.opts.seed,
        support: measure.support_cardinality(),
        plan_atoms: plan.len(),
        report: &report,
    };
    finish_report(cfg, out, stdout, stderr)
}

fn improve(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    let plan: TransportPlan = load_plan(cfg.opts.plan.as_ref().expect("validated"))?;
    let model = cfg.model_for(plan.n_marginals())?;
    let before = plan.cost_lower(&model);
    let (improved, moves) = swap_search(&plan, &model, cfg.opts.max_rounds);
    let mut log = String::new();
    for m in &moves {
        let centers: Vec<String> = m
            .centers
            .iter()
            .map(|t| {
                t.cells()
                    .iter()
                    .map(|c| c.coords().iter().map(i64::to_string).collect::<Vec<_>>().join(","))
                    .collect::<Vec<_>>()
                    .join("|")
            })
            .collect();
        let _ = writeln!(
            log,
            "round={} radius={:?} cost_before={:?} cost_after={:?} centers={}",
            m.round,
            m.radius,
            m.cost_before,
            m.cost_after,
            centers.join(";")
        );
    }
    match &cfg.opts.log {
        Some(p) => std::fs::write(p, &log).map_err(|e| io_error(p, e))?,
        None => say(stderr, &log),
    }
    emit(cfg, stdout, &improved.to_text())?;
    let after = improved.cost_lower(&model);
    say(
        stderr,
        &format!("{} swap moves: cost {before:.12} -> {after:.12}\n", moves.len()),
    );
    Ok(EXIT_OK)
}
