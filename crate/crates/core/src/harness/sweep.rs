//! Parameter sweeps over two exponent axes, one independent run per lattice point.

use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::diagnostics::{classify_boundedness, csv_number, Boundedness, PlateauPolicy};
use crate::exponents::{classify_theorem, ModelParams};
use crate::stepper::{run, SimConfig};

use super::config::KineticsSpec;

/// Environment variable that overrides the configured worker count.
pub const WORKERS_ENV: &str = "KS_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    Alpha,
    Beta,
    Gamma,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Alpha => "alpha",
            SweepAxis::Beta => "beta",
            SweepAxis::Gamma => "gamma",
        }
    }

    fn set(self, params: &mut ModelParams, value: f64) {
        match self {
            SweepAxis::Alpha => params.alpha = value,
            SweepAxis::Beta => params.beta = value,
            SweepAxis::Gamma => params.gamma = value,
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "alpha" => Ok(SweepAxis::Alpha),
            "beta" => Ok(SweepAxis::Beta),
            "gamma" => Ok(SweepAxis::Gamma),
            other => Err(format!("unknown axis `{other}` (expected alpha|beta|gamma)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisRange {
    pub axis: SweepAxis,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl AxisRange {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err("range must be finite".into());
        }
        if self.max < self.min {
            return Err(format!("max {} below min {}", self.max, self.min));
        }
        if self.steps < 2 {
            return Err(format!("need at least 2 steps, got {}", self.steps));
        }
        Ok(())
    }

    /// Evenly spaced values, both endpoints included.
    pub fn values(&self) -> Vec<f64> {
        let span = self.max - self.min;
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| if i + 1 == self.steps { self.max } else { self.min + span * i as f64 / last })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub axes: [AxisRange; 2],
    /// Base kinetics; the two axis parameters are overwritten per point.
    pub kinetics: KineticsSpec,
    /// Grid, initial data, controls and diagnostics shared by every run.
    pub template: SimConfig,
    pub workers: Option<usize>,
    pub policy: PlateauPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhaseClass {
    Bounded,
    SuspectedBlowup,
    Inconclusive,
    Error,
}

impl From<Boundedness> for PhaseClass {
    fn from(b: Boundedness) -> Self {
        match b {
            Boundedness::Bounded => PhaseClass::Bounded,
            Boundedness::SuspectedBlowup => PhaseClass::SuspectedBlowup,
            Boundedness::Inconclusive => PhaseClass::Inconclusive,
        }
    }
}

impl fmt::Display for PhaseClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhaseClass::Bounded => "Bounded",
            PhaseClass::SuspectedBlowup => "SuspectedBlowup",
            PhaseClass::Inconclusive => "Inconclusive",
            PhaseClass::Error => "Error",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRow {
    pub axis1: f64,
    pub axis2: f64,
    pub covered: bool,
    pub classification: PhaseClass,
    pub max_linf: f64,
    pub t_end: f64,
    /// Smallest cell values of `u` and `v` over the run (not written to CSV).
    pub min_u: f64,
    pub min_v: f64,
    /// Why the point failed, for `Error` rows.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDiagram {
    pub axes: [SweepAxis; 2],
    pub rows: Vec<PhaseRow>,
}

pub const PHASE_HEADER: &str = "axis1,axis2,covered,classification,max_linf,t_end";

impl PhaseDiagram {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{PHASE_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                csv_number(r.axis1),
                csv_number(r.axis2),
                r.covered,
                r.classification,
                csv_number(r.max_linf),
                csv_number(r.t_end)
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is ASCII")
    }
}

impl SweepConfig {
    /// Lattice points in row order: `axis1` outer, `axis2` inner.
    pub fn lattice(&self) -> Vec<(f64, f64)> {
        let a2 = self.axes[1].values();
        self.axes[0]
            .values()
            .into_iter()
            .flat_map(|x| a2.iter().map(move |&y| (x, y)))
            .collect()
    }

    fn point_params(&self, x: f64, y: f64) -> ModelParams {
        let mut params = self.kinetics.params;
        params.n = self.template.grid.dim() as u32;
        self.axes[0].axis.set(&mut params, x);
        self.axes[1].axis.set(&mut params, y);
        params
    }

    /// Runs a single lattice point. Failures become `Error` rows.
    pub fn run_point(&self, x: f64, y: f64) -> PhaseRow {
        let params = self.point_params(x, y);
        let error_row = |covered: bool, e: String| PhaseRow {
            axis1: x,
            axis2: y,
            covered,
            classification: PhaseClass::Error,
            max_linf: f64::NAN,
            t_end: 0.0,
            min_u: f64::NAN,
            min_v: f64::NAN,
            error: Some(e),
        };
        let spec = KineticsSpec {
            params,
            ..self.kinetics.clone()
        };
        let kinetics = match spec.build() {
            Ok(k) => k,
            Err(e) => {
                let covered = params.validate().is_ok() && classify_theorem(&params).covered;
                return error_row(covered, e.to_string());
            }
        };
        // the cubic preset pins gamma, so classify what was actually simulated
        let covered = classify_theorem(kinetics.params()).covered;
        let t = &self.template;
        let config = SimConfig::new(
            t.grid.clone(),
            kinetics,
            t.init.clone(),
            t.controls.clone(),
            t.diagnostics.clone(),
        );
        match run(&config) {
            Ok(result) => PhaseRow {
                axis1: x,
                axis2: y,
                covered,
                classification: classify_boundedness(&result.series, result.status, &self.policy).into(),
                max_linf: result
                    .series
                    .records()
                    .iter()
                    .map(|r| r.linf_u)
                    .fold(f64::NEG_INFINITY, f64::max),
                t_end: result.t_final,
                min_u: result.min_u,
                min_v: result.min_v,
                error: None,
            },
            Err(e) => error_row(covered, e.to_string()),
        }
    }
}

/// Worker count: `KS_WORKERS` if set and positive, else the configured value.
pub fn resolve_workers(configured: Option<usize>) -> Result<Option<usize>, String> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) | Err(_) => Err(format!("{WORKERS_ENV}=`{v}` is not a positive integer")),
            Ok(w) => Ok(Some(w)),
        },
        Err(_) => Ok(configured),
    }
}

/// Runs every lattice point on a pool of `workers` threads (rayon's default
/// when `None`). Rows come back in lattice order whatever the scheduling.
pub fn run_sweep_with(sweep: &SweepConfig, workers: Option<usize>) -> Result<PhaseDiagram, String> {
    let lattice = sweep.lattice();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| e.to_string())?;
    let rows = pool.install(|| lattice.par_iter().map(|&(x, y)| sweep.run_point(x, y)).collect());
    Ok(PhaseDiagram {
        axes: [sweep.axes[0].axis, sweep.axes[1].axis],
        rows,
    })
}

pub fn run_sweep(sweep: &SweepConfig) -> Result<PhaseDiagram, String> {
    run_sweep_with(sweep, resolve_workers(sweep.workers)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_values_hit_endpoints() {
        let r = AxisRange {
            axis: SweepAxis::Beta,
            min: 0.0,
            max: 2.0,
            steps: 9,
        };
        let v = r.values();
        assert_eq!(v.len(), 9);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[4], 1.0);
        assert_eq!(v[8], 2.0);
    }

    #[test]
    fn axis_validation() {
        let mut r = AxisRange {
            axis: SweepAxis::Gamma,
            min: 1.0,
            max: 3.0,
            steps: 1,
        };
        assert!(r.validate().is_err());
        r.steps = 2;
        assert!(r.validate().is_ok());
        r.max = f64::INFINITY;
        assert!(r.validate().is_err());
    }
}
