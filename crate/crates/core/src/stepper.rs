//! Time integration: explicit upwind update for `u`, backward Euler for `v`.
//!
//! Each step first advances `u` with the conservative flux form, rejecting and
//! halving `dt` whenever a cell would go negative, and then solves
//! `((1 + dt) I - dt Lap_h) v_new = v + dt u_new`. The matrix is an M-matrix, so
//! a nonnegative right-hand side gives a nonnegative `v_new`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::diagnostics::{DiagnosticsConfig, DiagnosticsSeries};
use crate::grid::{Field, Grid};
use crate::kinetics::Kinetics;

/// Steps shorter than this are treated as a breakdown.
pub const MIN_DT: f64 = 1e-12;
/// Relative residual for the implicit `v` solve in 2D.
pub const SOLVE_TOL: f64 = 1e-10;
const EPS_SPEED: f64 = 1e-30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("step size underflow: dt = {dt:e} at t = {t}")]
    StepUnderflow { t: f64, dt: f64 },
    #[error("implicit solve did not converge (residual {residual:e} after {iterations} iterations)")]
    SolveFailed { residual: f64, iterations: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid run setting `{name}`: {reason}")]
    Control { name: &'static str, reason: String },
    #[error("grid has dimension {grid} but kinetics were built for n = {kinetics}")]
    DimensionMismatch { grid: usize, kinetics: u32 },
    #[error("initial data: {0}")]
    Init(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub u: Field,
    pub v: Field,
    pub t: f64,
    pub dt: f64,
}

impl SimState {
    pub fn is_valid(&self) -> bool {
        self.u.iter().chain(self.v.iter()).all(|x| x.is_finite() && *x >= 0.0) && self.t >= 0.0
    }
}

/// Largest step allowed by diffusion, advection and donor-cell positivity,
/// scaled by `sigma` and capped at `dt_max`.
pub fn stable_dt(state: &SimState, k: &Kinetics, g: &Grid, sigma: f64, dt_max: f64) -> f64 {
    let u = &state.u;
    let v = &state.v;
    let d_max = u.iter().map(|&x| k.diffusivity(x)).fold(0.0, f64::max);
    let inv_h2: f64 = g.h().iter().map(|h| 1.0 / (h * h)).sum();
    let dt_diff = 1.0 / (2.0 * d_max * inv_h2);

    let nx = g.cells()[0];
    let ny = if g.dim() == 2 { g.cells()[1] } else { 1 };
    let mut outflow = vec![0.0; g.len()];
    let mut dt_adv = f64::INFINITY;
    for axis in 0..g.dim() {
        let h = g.h()[axis];
        let stride = if axis == 0 { 1 } else { nx };
        let mut c_max: f64 = 0.0;
        for j in 0..ny {
            for i in 0..nx {
                let (along, extent) = if axis == 0 { (i, nx) } else { (j, ny) };
                if along + 1 == extent {
                    continue;
                }
                let l = i + nx * j;
                let r = l + stride;
                let grad = (v[r] - v[l]) / h;
                let donor = if grad > 0.0 { l } else { r };
                let ud = u[donor];
                c_max = c_max.max(k.sensitivity_slope(ud).abs() * grad.abs());
                outflow[donor] += k.sensitivity_ratio(ud) * grad.abs() / h;
            }
        }
        dt_adv = dt_adv.min(h / (c_max + EPS_SPEED));
    }
    let out_max = outflow.iter().cloned().fold(0.0, f64::max);
    let dt_pos = 1.0 / (out_max + EPS_SPEED);
    (sigma * dt_diff.min(dt_adv).min(dt_pos)).min(dt_max)
}

/// Solver for `((1 + tau) I - tau Lap_h) x = b`.
#[derive(Debug, Clone)]
struct HelmholtzSolver {
    // tridiagonal scratch (1D)
    c_prime: Vec<f64>,
    d_prime: Vec<f64>,
    // CG scratch (2D)
    r: Vec<f64>,
    z: Vec<f64>,
    p: Vec<f64>,
    ap: Vec<f64>,
}

impl HelmholtzSolver {
    fn new(n: usize) -> Self {
        Self {
            c_prime: vec![0.0; n],
            d_prime: vec![0.0; n],
            r: vec![0.0; n],
            z: vec![0.0; n],
            p: vec![0.0; n],
            ap: vec![0.0; n],
        }
    }

    /// Writes the solution into `x`; in 2D its entry value is the initial guess.
    fn solve(&mut self, g: &Grid, tau: f64, b: &[f64], x: &mut [f64]) -> Result<(), StepError> {
        if g.dim() == 1 {
            self.solve_tridiagonal(g, tau, b, x);
            Ok(())
        } else {
            self.solve_cg(g, tau, b, x)
        }
    }

    /// Thomas algorithm. For nonnegative `b` every intermediate is a sum of
    /// nonnegative terms, so `x >= 0` holds exactly in floating point.
    fn solve_tridiagonal(&mut self, g: &Grid, tau: f64, b: &[f64], x: &mut [f64]) {
        let n = g.len();
        let h = g.h()[0];
        let off = tau / (h * h);
        let diag = |i: usize| {
            let neighbours = if i == 0 || i + 1 == n { 1.0 } else { 2.0 };
            1.0 + tau + neighbours * off
        };
        // matrix entries: lower = upper = -off
        let mut denom = diag(0);
        self.c_prime[0] = off / denom;
        self.d_prime[0] = b[0] / denom;
        for i in 1..n {
            denom = diag(i) - off * self.c_prime[i - 1];
            self.c_prime[i] = if i + 1 < n { off / denom } else { 0.0 };
            self.d_prime[i] = (b[i] + off * self.d_prime[i - 1]) / denom;
        }
        x[n - 1] = self.d_prime[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = self.d_prime[i] + self.c_prime[i] * x[i + 1];
        }
    }

    fn apply(g: &Grid, tau: f64, input: &[f64], out: &mut [f64]) {
        g.laplacian_into(input, out);
        for (o, &i) in out.iter_mut().zip(input) {
            *o = (1.0 + tau) * i - tau * *o;
        }
    }

    /// Jacobi-preconditioned conjugate gradients.
    fn solve_cg(&mut self, g: &Grid, tau: f64, b: &[f64], x: &mut [f64]) -> Result<(), StepError> {
        let n = g.len();
        let nx = g.cells()[0];
        let ny = g.cells()[1];
        let (hx, hy) = (g.h()[0], g.h()[1]);
        let diag = |k: usize| {
            let i = k % nx;
            let j = k / nx;
            let cx = (if i > 0 { 1.0 } else { 0.0 }) + (if i + 1 < nx { 1.0 } else { 0.0 });
            let cy = (if j > 0 { 1.0 } else { 0.0 }) + (if j + 1 < ny { 1.0 } else { 0.0 });
            1.0 + tau + tau * (cx / (hx * hx) + cy / (hy * hy))
        };
        let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if b_norm == 0.0 {
            x.fill(0.0);
            return Ok(());
        }
        let mut ap = std::mem::take(&mut self.ap);
        Self::apply(g, tau, x, &mut ap);
        for k in 0..n {
            self.r[k] = b[k] - ap[k];
            self.z[k] = self.r[k] / diag(k);
            self.p[k] = self.z[k];
        }
        let mut rz: f64 = self.r.iter().zip(&self.z).map(|(a, b)| a * b).sum();
        let max_iter = 10 * n + 100;
        let mut residual = self.r.iter().map(|v| v * v).sum::<f64>().sqrt() / b_norm;
        let mut iterations = 0;
        while residual > SOLVE_TOL && iterations < max_iter {
            Self::apply(g, tau, &self.p, &mut ap);
            let pap: f64 = self.p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            let alpha = rz / pap;
            for k in 0..n {
                x[k] += alpha * self.p[k];
                self.r[k] -= alpha * ap[k];
                self.z[k] = self.r[k] / diag(k);
            }
            let rz_new: f64 = self.r.iter().zip(&self.z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..n {
                self.p[k] = self.z[k] + beta * self.p[k];
            }
            residual = self.r.iter().map(|v| v * v).sum::<f64>().sqrt() / b_norm;
            iterations += 1;
        }
        self.ap = ap;
        if residual > SOLVE_TOL {
            return Err(StepError::SolveFailed {
                residual,
                iterations,
            });
        }
        // The exact solution is nonnegative; only solver noise can dip below 0.
        for xk in x.iter_mut() {
            if *xk < 0.0 {
                *xk = 0.0;
            }
        }
        Ok(())
    }
}

/// Owns the grid, kinetics and scratch space for repeated steps.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: Grid,
    kinetics: Kinetics,
    rhs: Vec<f64>,
    chem: Vec<f64>,
    diff_coef: Vec<f64>,
    solver: HelmholtzSolver,
    rejected: usize,
}

impl Stepper {
    pub fn new(grid: Grid, kinetics: Kinetics) -> Self {
        let n = grid.len();
        Self {
            grid,
            kinetics,
            rhs: vec![0.0; n],
            chem: vec![0.0; n],
            diff_coef: vec![0.0; n],
            solver: HelmholtzSolver::new(n),
            rejected: 0,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn kinetics(&self) -> &Kinetics {
        &self.kinetics
    }

    /// Number of steps rejected for positivity so far.
    pub fn rejected(&self) -> usize {
        self.rejected
    }

    pub fn stable_dt(&self, state: &SimState, sigma: f64, dt_max: f64) -> f64 {
        stable_dt(state, &self.kinetics, &self.grid, sigma, dt_max)
    }

    /// `du/dt` at the current state: diffusion minus chemotaxis plus source.
    pub fn u_rate(&mut self, u: &[f64], v: &[f64]) -> &[f64] {
        self.grid.diffusive_into(u, &self.kinetics, &mut self.diff_coef, &mut self.rhs);
        self.grid.chemotactic_into(u, v, &self.kinetics, &mut self.chem);
        for ((r, &c), &ui) in self.rhs.iter_mut().zip(&self.chem).zip(u) {
            *r += self.kinetics.source(ui) - c;
        }
        &self.rhs
    }

    /// Advances by `state.dt`, halving it until `u` stays nonnegative.
    pub fn step(&mut self, state: &SimState) -> Result<SimState, StepError> {
        self.u_rate(&state.u, &state.v);
        let mut dt = state.dt;
        let mut u_new = vec![0.0; self.grid.len()];
        loop {
            if !(dt >= MIN_DT) {
                return Err(StepError::StepUnderflow { t: state.t, dt });
            }
            let mut negative = false;
            for ((un, &u), &r) in u_new.iter_mut().zip(state.u.iter()).zip(&self.rhs) {
                *un = u + dt * r;
                negative |= *un < 0.0;
            }
            if !negative {
                break;
            }
            self.rejected += 1;
            dt *= 0.5;
        }
        let b: Vec<f64> = state
            .v
            .iter()
            .zip(&u_new)
            .map(|(&v, &u)| v + dt * u)
            .collect();
        let mut v_new = state.v.0.clone();
        self.solver.solve(&self.grid, dt, &b, &mut v_new)?;
        Ok(SimState {
            u: Field(u_new),
            v: Field(v_new),
            t: state.t + dt,
            dt,
        })
    }

    /// One backward-Euler step of the `v` equation with `u` frozen.
    pub fn relax_v(&mut self, u: &[f64], v: &[f64], tau: f64) -> Result<Field, StepError> {
        let b: Vec<f64> = v.iter().zip(u).map(|(&v, &u)| v + tau * u).collect();
        let mut out = v.to_vec();
        self.solver.solve(&self.grid, tau, &b, &mut out)?;
        Ok(Field(out))
    }
}

/// Initial cell density profile.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Constant(f64),
    /// `mean + amplitude * prod cos(mode pi x_a / L_a)`.
    Cosine { mean: f64, amplitude: f64, mode: u32 },
    /// `base + peak * exp(-|x - c|^2 / (2 width^2))`, `center` given as fractions of the lengths.
    Gaussian {
        base: f64,
        peak: f64,
        center: [f64; 2],
        width: f64,
    },
    /// Independent uniform samples in `[0, u_max]`.
    Random { u_max: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialV {
    /// One backward-Euler step of unit length starting from `v = u0`.
    Smooth,
    Copy,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub profile: Profile,
    pub v0: InitialV,
}

impl InitialData {
    pub fn sample_u(&self, g: &Grid) -> Field {
        let lengths = [g.lengths()[0], g.lengths().get(1).copied().unwrap_or(1.0)];
        match &self.profile {
            Profile::Constant(c) => g.constant(*c),
            Profile::Cosine {
                mean,
                amplitude,
                mode,
            } => {
                let m = f64::from(*mode) * std::f64::consts::PI;
                let two_d = g.dim() == 2;
                g.sample(|x, y| {
                    let cy = if two_d { (m * y / lengths[1]).cos() } else { 1.0 };
                    mean + amplitude * (m * x / lengths[0]).cos() * cy
                })
            }
            Profile::Gaussian {
                base,
                peak,
                center,
                width,
            } => {
                let cx = center[0] * lengths[0];
                let cy = center[1] * lengths[1];
                let two_d = g.dim() == 2;
                g.sample(|x, y| {
                    let dy = if two_d { y - cy } else { 0.0 };
                    let r2 = (x - cx).powi(2) + dy * dy;
                    base + peak * (-r2 / (2.0 * width * width)).exp()
                })
            }
            Profile::Random { u_max, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Field((0..g.len()).map(|_| rng.gen::<f64>() * u_max).collect())
            }
        }
    }

    pub fn build(&self, stepper: &mut Stepper) -> Result<SimState, SimError> {
        let g = stepper.grid().clone();
        let u = self.sample_u(&g);
        if u.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(SimError::Init("u0 must be finite and nonnegative".into()));
        }
        let v = match self.v0 {
            InitialV::Smooth => {
                let doubled: Vec<f64> = u.iter().map(|x| 2.0 * x).collect();
                let mut v = u.0.clone();
                stepper
                    .solver
                    .solve(&g, 1.0, &doubled, &mut v)
                    .map_err(|e| SimError::Init(e.to_string()))?;
                Field(v)
            }
            InitialV::Copy => u.clone(),
            InitialV::Value(c) => {
                if !(c.is_finite() && c >= 0.0) {
                    return Err(SimError::Init("v0 must be finite and nonnegative".into()));
                }
                g.constant(c)
            }
        };
        Ok(SimState { u, v, t: 0.0, dt: 0.0 })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunControls {
    pub t_end: f64,
    pub u_cap: f64,
    pub dt_max: f64,
    pub sigma: f64,
    pub record_every: f64,
    pub snapshot_times: Vec<f64>,
}

impl Default for RunControls {
    fn default() -> Self {
        Self {
            t_end: 10.0,
            u_cap: 1e6,
            dt_max: 1e-2,
            sigma: 0.4,
            record_every: 0.1,
            snapshot_times: Vec::new(),
        }
    }
}

impl RunControls {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |name, reason: &str| {
            Err(SimError::Control {
                name,
                reason: reason.to_string(),
            })
        };
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("t_end", "must be positive and finite");
        }
        if !(self.u_cap > 0.0) {
            return bad("u_cap", "must be positive");
        }
        if !(self.dt_max > 0.0) {
            return bad("dt_max", "must be positive");
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return bad("sigma", "must lie in (0, 1)");
        }
        if !(self.record_every > 0.0 && self.record_every.is_finite()) {
            return bad("record_every", "must be positive and finite");
        }
        if self.snapshot_times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return bad("snapshots", "times must be finite and >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub grid: Grid,
    pub kinetics: Kinetics,
    pub init: InitialData,
    pub controls: RunControls,
    pub diagnostics: DiagnosticsConfig,
}

impl SimConfig {
    /// Sets the kinetics' dimension to the grid's.
    pub fn new(
        grid: Grid,
        kinetics: Kinetics,
        init: InitialData,
        controls: RunControls,
        diagnostics: DiagnosticsConfig,
    ) -> Self {
        let kinetics = kinetics.with_dimension(grid.dim() as u32);
        Self {
            grid,
            kinetics,
            init,
            controls,
            diagnostics,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RunStatus {
    Completed,
    SuspectedBlowup,
    StepUnderflow,
}

impl RunStatus {
    pub fn name(self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::SuspectedBlowup => "suspected_blowup",
            RunStatus::StepUnderflow => "step_underflow",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub status: RunStatus,
    pub t_final: f64,
    pub series: DiagnosticsSeries,
    pub final_state: SimState,
    pub blowup_time_estimate: Option<f64>,
    pub snapshots: Vec<SimState>,
    pub steps: usize,
    pub rejected_steps: usize,
    /// Smallest cell value of `u` and `v` over every accepted state.
    pub min_u: f64,
    pub min_v: f64,
    pub initial_mass: f64,
}

/// Accumulates everything a run reports besides the final state.
struct RunLog {
    series: DiagnosticsSeries,
    snapshots: Vec<SimState>,
    steps: usize,
    min_u: f64,
    min_v: f64,
    initial_mass: f64,
}

impl RunLog {
    fn finish(self, status: RunStatus, state: SimState, blowup: Option<f64>, rejected: usize) -> RunResult {
        RunResult {
            status,
            t_final: state.t,
            series: self.series,
            final_state: state,
            blowup_time_estimate: blowup,
            snapshots: self.snapshots,
            steps: self.steps,
            rejected_steps: rejected,
            min_u: self.min_u,
            min_v: self.min_v,
            initial_mass: self.initial_mass,
        }
    }
}

/// Integrates to `t_end`, stopping early when `max u` exceeds `u_cap` or the
/// step size underflows. Steps are shortened to land exactly on record and
/// snapshot times.
pub fn run(config: &SimConfig) -> Result<RunResult, SimError> {
    let c = &config.controls;
    c.validate()?;
    let grid = &config.grid;
    if config.kinetics.params().n as usize != grid.dim() {
        return Err(SimError::DimensionMismatch {
            grid: grid.dim(),
            kinetics: config.kinetics.params().n,
        });
    }
    config.diagnostics.validate().map_err(|reason| SimError::Control {
        name: "diagnostics",
        reason,
    })?;
    let mut stepper = Stepper::new(grid.clone(), config.kinetics.clone());
    let mut state = config.init.build(&mut stepper)?;
    let gamma = config.kinetics.params().gamma;

    let mut snapshot_times: Vec<f64> = c.snapshot_times.iter().cloned().filter(|t| *t <= c.t_end).collect();
    snapshot_times.sort_by(f64::total_cmp);
    snapshot_times.dedup();
    let mut next_snap = 0;

    let mut log = RunLog {
        series: DiagnosticsSeries::new(config.diagnostics.clone(), gamma),
        snapshots: Vec::new(),
        steps: 0,
        min_u: state.u.min(),
        min_v: state.v.min(),
        initial_mass: grid.integrate(&state.u),
    };
    while next_snap < snapshot_times.len() && snapshot_times[next_snap] <= 0.0 {
        log.snapshots.push(state.clone());
        next_snap += 1;
    }
    let dt0 = stepper.stable_dt(&state, c.sigma, c.dt_max);
    log.series.record(grid, &state, dt0);
    if !state.u.all_finite() || state.u.max() > c.u_cap {
        return Ok(log.finish(RunStatus::SuspectedBlowup, state, Some(0.0), 0));
    }

    let mut record_index = 1u64;
    let mut last_record_linf = state.u.max();
    loop {
        let next_record = (record_index as f64 * c.record_every).min(c.t_end);
        let next_stop = match snapshot_times.get(next_snap) {
            Some(&ts) => next_record.min(ts),
            None => next_record,
        };
        let remaining = next_stop - state.t;
        let mut dt = stepper.stable_dt(&state, c.sigma, c.dt_max);
        let clipped = dt >= remaining * (1.0 - 1e-6);
        if clipped {
            dt = remaining;
        }
        state.dt = dt;
        let mut next = match stepper.step(&state) {
            Ok(s) => s,
            Err(StepError::StepUnderflow { .. }) => {
                let rejected = stepper.rejected();
                return Ok(if state.u.max() > last_record_linf {
                    let t = state.t;
                    log.finish(RunStatus::SuspectedBlowup, state, Some(t), rejected)
                } else {
                    log.finish(RunStatus::StepUnderflow, state, None, rejected)
                });
            }
            Err(StepError::SolveFailed { .. }) => {
                return Ok(log.finish(RunStatus::StepUnderflow, state, None, stepper.rejected()));
            }
        };
        log.steps += 1;
        let landed = clipped && next.dt == dt;
        if landed {
            next.t = next_stop;
        }
        log.min_u = log.min_u.min(next.u.min());
        log.min_v = log.min_v.min(next.v.min());
        state = next;

        let linf = state.u.max();
        if !state.u.all_finite() || !state.v.all_finite() || linf > c.u_cap {
            log.series.record(grid, &state, state.dt);
            let t = state.t;
            return Ok(log.finish(RunStatus::SuspectedBlowup, state, Some(t), stepper.rejected()));
        }
        if landed && next_stop == next_record {
            log.series.record(grid, &state, state.dt);
            last_record_linf = linf;
            record_index += 1;
        }
        while landed && next_snap < snapshot_times.len() && snapshot_times[next_snap] <= state.t {
            log.snapshots.push(state.clone());
            next_snap += 1;
        }
        if landed && next_stop >= c.t_end {
            return Ok(log.finish(RunStatus::Completed, state, None, stepper.rejected()));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::ModelParams;
    use crate::kinetics::Table;

    fn logistic(a: f64, mu: f64, gamma: f64, r: f64) -> Kinetics {
        let p = ModelParams::new(1, 0.0, 1.0, gamma, a, mu, 1.0, 1.0).unwrap();
        Kinetics::power_law(p, r).unwrap()
    }

    #[test]
    fn diffusion_limited_dt() {
        let g = Grid::line(1.0, 64).unwrap();
        let k = logistic(0.0, 1.0, 2.0, 0.0);
        let s = SimState { u: g.constant(0.0), v: g.constant(0.0), t: 0.0, dt: 0.0 };
        let h = 1.0 / 64.0;
        assert!((stable_dt(&s, &k, &g, 0.4, f64::INFINITY) - 0.4 * h * h / 2.0).abs() < 1e-18);
        let g2 = Grid::line(1.0, 128).unwrap();
        let s2 = SimState { u: g2.constant(0.0), v: g2.constant(0.0), t: 0.0, dt: 0.0 };
        let ratio = stable_dt(&s, &k, &g, 0.4, 1.0) / stable_dt(&s2, &k, &g2, 0.4, 1.0);
        assert!((ratio - 4.0).abs() < 1e-12);
        assert_eq!(stable_dt(&s, &k, &g, 0.4, 1e-6), 1e-6);
    }

    #[test]
    fn steep_gradient_switches_to_advective_limit() {
        let g = Grid::line(1.0, 64).unwrap();
        let k = logistic(0.0, 1.0, 2.0, 0.0);
        let u = g.constant(1.0);
        let gentle = SimState { u: u.clone(), v: g.sample(|x, _| x), t: 0.0, dt: 0.0 };
        let steep = SimState { u, v: g.sample(|x, _| 1e4 * x), t: 0.0, dt: 0.0 };
        let h = 1.0 / 64.0;
        let diff = 0.4 * h * h / 2.0;
        assert_eq!(stable_dt(&gentle, &k, &g, 0.4, 1.0), diff);
        let dt = stable_dt(&steep, &k, &g, 0.4, 1.0);
        assert!(dt < diff);
        // S = u, donor outflow speed 1e4 per face
        assert!((dt - 0.4 * h / 1e4).abs() < 1e-15);
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let g = Grid::line(2.0, 32).unwrap();
        let k = logistic(1.0, 1.0, 2.0, 0.0);
        let mut st = Stepper::new(g.clone(), k);
        let mut s = SimState { u: g.constant(1.0), v: g.constant(1.0), t: 0.0, dt: 0.0 };
        for _ in 0..50 {
            s.dt = st.stable_dt(&s, 0.4, 0.01);
            s = st.step(&s).unwrap();
        }
        assert!(s.u.iter().all(|&x| (x - 1.0).abs() < 1e-13));
        assert!(s.v.iter().all(|&x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn tridiagonal_matches_cg_operator() {
        let g = Grid::line(1.0, 16).unwrap();
        let mut solver = HelmholtzSolver::new(g.len());
        let b: Vec<f64> = (0..16).map(|i| 1.0 + (i as f64).sin()).collect();
        let mut x = vec![0.0; 16];
        solver.solve(&g, 0.3, &b, &mut x).unwrap();
        let mut ax = vec![0.0; 16];
        HelmholtzSolver::apply(&g, 0.3, &x, &mut ax);
        for (a, bb) in ax.iter().zip(&b) {
            assert!((a - bb).abs() < 1e-12);
        }
    }

    #[test]
    fn cg_solves_2d_helmholtz() {
        let g = Grid::rectangle(1.0, 2.0, 8, 12).unwrap();
        let mut solver = HelmholtzSolver::new(g.len());
        let b: Vec<f64> = (0..g.len()).map(|i| 1.0 + (0.3 * i as f64).cos()).collect();
        let mut x = vec![0.0; g.len()];
        solver.solve(&g, 0.05, &b, &mut x).unwrap();
        let mut ax = vec![0.0; g.len()];
        HelmholtzSolver::apply(&g, 0.05, &x, &mut ax);
        let err: f64 = ax.iter().zip(&b).map(|(a, bb)| (a - bb).powi(2)).sum::<f64>().sqrt();
        let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err / bn < 1e-9);
        assert!(x.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn positivity_rejection_halves_dt() {
        let g = Grid::line(1.0, 8).unwrap();
        // f(u) = -10 u^2 with u = 1: dt = 0.2 would overshoot to -1
        let k = logistic(0.0, 10.0, 2.0, 0.0);
        let mut st = Stepper::new(g.clone(), k);
        let s = SimState { u: g.constant(1.0), v: g.constant(1.0), t: 0.0, dt: 0.2 };
        let next = st.step(&s).unwrap();
        assert!(next.dt < 0.1 + 1e-15);
        assert!(st.rejected() >= 1);
        assert!(next.u.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn underflow_error() {
        let g = Grid::line(1.0, 8).unwrap();
        let k = logistic(0.0, 1.0, 2.0, 0.0);
        let mut st = Stepper::new(g.clone(), k);
        let s = SimState { u: g.constant(1.0), v: g.constant(1.0), t: 0.0, dt: 1e-13 };
        assert!(matches!(st.step(&s), Err(StepError::StepUnderflow { .. })));
    }

    #[test]
    fn v_relaxes_to_frozen_density() {
        for g in [Grid::line(1.0, 16).unwrap(), Grid::rectangle(1.0, 1.0, 8, 8).unwrap()] {
            let k = Kinetics::tabulated(
                ModelParams::new(g.dim() as u32, 0.0, 1.0, 2.0, 0.0, 1.0, 1.0, 1.0).unwrap(),
                Table::pure_diffusion(1.0).unwrap(),
            )
            .unwrap();
            let mut st = Stepper::new(g.clone(), k);
            let c = 2.5;
            let u = g.constant(c);
            let mut v = g.sample(|x, y| 1.0 + (3.0 * x).cos() * (1.0 + y));
            let tau = 0.05;
            for _ in 0..800 {
                v = st.relax_v(&u, &v, tau).unwrap();
            }
            assert!(v.iter().all(|&x| (x - c).abs() <= 1e-8));
        }
    }

    #[test]
    fn initial_profiles() {
        let g = Grid::line(2.0, 16).unwrap();
        let init = InitialData {
            profile: Profile::Random { u_max: 3.0, seed: 7 },
            v0: InitialV::Copy,
        };
        let a = init.sample_u(&g);
        assert_eq!(a, init.sample_u(&g));
        assert!(a.iter().all(|&x| (0.0..=3.0).contains(&x)));
        let init = InitialData {
            profile: Profile::Cosine { mean: 1.0, amplitude: 0.5, mode: 1 },
            v0: InitialV::Smooth,
        };
        let k = logistic(0.0, 1.0, 2.0, 0.0);
        let mut st = Stepper::new(g.clone(), k);
        let s = init.build(&mut st).unwrap();
        // one implicit step preserves the mean and damps the mode
        assert!((g.integrate(&s.v) - g.integrate(&s.u)).abs() < 1e-12);
        assert!(s.v.max() < s.u.max());
    }

    #[test]
    fn controls_validation() {
        let c = RunControls { sigma: 1.0, ..RunControls::default() };
        assert!(c.validate().is_err());
        let c = RunControls { t_end: -1.0, ..RunControls::default() };
        assert!(c.validate().is_err());
        assert!(RunControls::default().validate().is_ok());
    }
}
