//! Command implementations behind the `ks` binary, configuration parsing,
//! sweeps and file outputs.

pub mod config;
pub mod output;
pub mod sweep;

use std::io::Write;
use std::path::Path;

use crate::diagnostics::{classify_boundedness, mass_bound_check, mass_ode_monitor, PlateauPolicy};
use crate::exponents::{classify_theorem, feasible_pq, Classification, ExponentCase, FeasibilityReport, ModelParams};
use crate::stepper::{run, RunStatus};

pub use config::{parse_config, parse_config_with, Config, ConfigError, Ini, KineticsSpec};
pub use sweep::{run_sweep, run_sweep_with, AxisRange, PhaseClass, PhaseDiagram, PhaseRow, SweepAxis, SweepConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_BLOWUP: i32 = 2;
pub const EXIT_NOT_COVERED: i32 = 3;

/// Field order of the machine-readable block.
pub const REPORT_KEYS: [&str; 15] = [
    "covered", "lhs", "threshold", "p_floor", "p", "q_lower", "q_upper", "q", "s", "theta1", "theta2", "kappa1",
    "kappa2", "f1", "f2",
];

/// `key=value` lines in [`REPORT_KEYS`] order. Feasibility fields are `nan`
/// when no witness was computed.
pub fn report_block(class: &Classification, feas: Option<&FeasibilityReport>) -> String {
    let nan = f64::NAN;
    let f = |get: fn(&FeasibilityReport) -> f64| feas.map_or(nan, get);
    let values = [
        class.covered.to_string(),
        class.lhs.to_string(),
        class.threshold.to_string(),
        f(|r| r.p_floor).to_string(),
        f(|r| r.p_witness).to_string(),
        f(|r| r.q_lower).to_string(),
        f(|r| r.q_upper).to_string(),
        f(|r| r.q_witness).to_string(),
        f(|r| r.s_effective).to_string(),
        f(|r| r.checks.theta1).to_string(),
        f(|r| r.checks.theta2).to_string(),
        f(|r| r.checks.kappa1).to_string(),
        f(|r| r.checks.kappa2).to_string(),
        f(|r| r.checks.f1).to_string(),
        f(|r| r.checks.f2).to_string(),
    ];
    let mut out = String::new();
    for (k, v) in REPORT_KEYS.iter().zip(values) {
        out.push_str(k);
        out.push('=');
        out.push_str(&v);
        out.push('\n');
    }
    out
}

/// Parses a block produced by [`report_block`].
pub fn parse_report_block(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .filter(|(k, _)| REPORT_KEYS.contains(k))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn branch_label(gamma: f64) -> &'static str {
    match ExponentCase::for_gamma(gamma) {
        ExponentCase::SubQuadratic => "1 <= gamma < 2",
        ExponentCase::Quadratic => "gamma >= 2",
    }
}

fn describe(w: &mut dyn Write, params: &ModelParams, class: &Classification) -> std::io::Result<()> {
    writeln!(
        w,
        "n = {}, alpha = {}, beta = {}, gamma = {}",
        params.n, params.alpha, params.beta, params.gamma
    )?;
    writeln!(
        w,
        "alpha + 2 beta = {} vs threshold {} ({} branch): {}",
        class.lhs,
        class.threshold,
        branch_label(params.gamma),
        if class.covered { "covered" } else { "not covered" }
    )
}

/// Prints the classification; the feasibility fields are filled in when a
/// witness exists (`n >= 2` and covered). Exit 0 when covered, 3 otherwise.
pub fn cmd_classify(params: &ModelParams, out: &mut dyn Write) -> i32 {
    if let Err(e) = params.validate() {
        let _ = writeln!(out, "error: {e}");
        return EXIT_ERROR;
    }
    let class = classify_theorem(params);
    let feas = if params.n >= 2 && class.covered {
        feasible_pq(params, ExponentCase::for_gamma(params.gamma)).ok()
    } else {
        None
    };
    let _ = describe(out, params, &class);
    let _ = write!(out, "{}", report_block(&class, feas.as_ref()));
    if class.covered {
        EXIT_OK
    } else {
        EXIT_NOT_COVERED
    }
}

/// Exit 0 with a passing witness, 3 when none was found, 1 on invalid input.
pub fn cmd_feasible(params: &ModelParams, case: Option<ExponentCase>, out: &mut dyn Write) -> i32 {
    if let Err(e) = params.validate() {
        let _ = writeln!(out, "error: {e}");
        return EXIT_ERROR;
    }
    let case = case.unwrap_or_else(|| ExponentCase::for_gamma(params.gamma));
    let class = classify_theorem(params);
    let _ = describe(out, params, &class);
    let _ = writeln!(out, "case = {case}");
    match feasible_pq(params, case) {
        Ok(report) => {
            let _ = write!(out, "{}", report_block(&class, Some(&report)));
            if report.feasible {
                EXIT_OK
            } else {
                EXIT_NOT_COVERED
            }
        }
        Err(crate::exponents::ExponentError::Infeasible { .. }) => {
            let _ = writeln!(out, "no witness: parameters lie outside the {case} region");
            let _ = write!(out, "{}", report_block(&class, None));
            EXIT_NOT_COVERED
        }
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            EXIT_ERROR
        }
    }
}

/// Runs one configuration and writes `series.csv` plus snapshot files into `out_dir`.
pub fn cmd_simulate(text: &str, overrides: &[String], out_dir: &Path, out: &mut dyn Write) -> i32 {
    let config = match parse_config_with(text, overrides) {
        Ok(Config::Sim(c)) => c,
        Ok(Config::Sweep(_)) => {
            let _ = writeln!(out, "error: config has a [sweep] section; use `ks sweep`");
            return EXIT_ERROR;
        }
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            return EXIT_ERROR;
        }
    };
    let result = match run(&config) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            return EXIT_ERROR;
        }
    };
    if let Err(e) = output::write_run(out_dir, &config.grid, &result) {
        let _ = writeln!(out, "error: writing outputs to {}: {e}", out_dir.display());
        return EXIT_ERROR;
    }

    let class = classify_theorem(config.kinetics.params());
    let verdict = classify_boundedness(&result.series, result.status, &PlateauPolicy::default());
    let _ = writeln!(
        out,
        "status = {}\nt_final = {}\nsteps = {}\nrejected_steps = {}\ncovered = {}\nboundedness = {}",
        result.status.name(),
        result.t_final,
        result.steps,
        result.rejected_steps,
        class.covered,
        verdict.name()
    );
    if let Some(t) = result.blowup_time_estimate {
        let _ = writeln!(out, "blowup_time_estimate = {t}");
    }
    let envelope = config.kinetics.envelope_constants().ok();
    let volume = config.grid.volume();
    let monitor = mass_ode_monitor(&result.series, envelope.as_ref(), volume);
    if monitor.applicable {
        let _ = writeln!(out, "mass_ode_violations = {}", monitor.violations);
    } else {
        let _ = writeln!(out, "mass_ode_violations = n/a");
    }
    if let Some(env) = envelope {
        let bound = mass_bound_check(&result.series, &env, volume, result.initial_mass);
        let _ = writeln!(out, "mass_bound_c2 = {}\nmass_bound_ok = {}", bound.c2, bound.ok);
    }
    match result.status {
        RunStatus::Completed => EXIT_OK,
        RunStatus::SuspectedBlowup => EXIT_BLOWUP,
        RunStatus::StepUnderflow => EXIT_ERROR,
    }
}

/// Runs a sweep configuration and writes `phase.csv` into `out_dir`.
pub fn cmd_sweep(text: &str, overrides: &[String], out_dir: &Path, out: &mut dyn Write) -> i32 {
    let sweep = match parse_config_with(text, overrides) {
        Ok(Config::Sweep(s)) => s,
        Ok(Config::Sim(_)) => {
            let _ = writeln!(out, "error: config has no [sweep] section");
            return EXIT_ERROR;
        }
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            return EXIT_ERROR;
        }
    };
    let diagram = match run_sweep(&sweep) {
        Ok(d) => d,
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            return EXIT_ERROR;
        }
    };
    if let Err(e) = output::write_phase(out_dir, &diagram) {
        let _ = writeln!(out, "error: writing outputs to {}: {e}", out_dir.display());
        return EXIT_ERROR;
    }
    let count = |c: PhaseClass| diagram.rows.iter().filter(|r| r.classification == c).count();
    let _ = writeln!(
        out,
        "points = {}\nbounded = {}\nsuspected_blowup = {}\ninconclusive = {}\nerrors = {}",
        diagram.rows.len(),
        count(PhaseClass::Bounded),
        count(PhaseClass::SuspectedBlowup),
        count(PhaseClass::Inconclusive),
        count(PhaseClass::Error)
    );
    for r in diagram.rows.iter().filter(|r| r.error.is_some()) {
        let _ = writeln!(
            out,
            "error at ({}, {}): {}",
            r.axis1,
            r.axis2,
            r.error.as_deref().unwrap_or("")
        );
    }
    EXIT_OK
}
