mod common;

use ks_core::diagnostics::{mass_ode_monitor, DiagnosticsConfig};
use ks_core::grid::{Field, Grid};
use ks_core::kinetics::Kinetics;
use ks_core::exponents::ModelParams;
use ks_core::stepper::{run, InitialData, InitialV, Profile, RunStatus, SimConfig, SimState, Stepper};

use common::*;

fn uniform(value: f64) -> InitialData {
    InitialData {
        profile: Profile::Constant(value),
        v0: InitialV::Value(value),
    }
}

fn logistic_error_at(t_end: f64, dt_max: f64) -> f64 {
    // u' = 1 - u^2 has u(t) = tanh(t + atanh(u0))
    let u0: f64 = 0.2;
    let k = power_law(1, 0.0, 1.0, 2.0, 1.0, 1.0);
    let mut ctl = controls(t_end, t_end / 4.0);
    ctl.dt_max = dt_max;
    let r = run(&config(Grid::line(1.0, 8).unwrap(), k, uniform(u0), ctl)).unwrap();
    assert_eq!(r.status, RunStatus::Completed);
    let exact = (t_end + u0.atanh()).tanh();
    r.final_state.u.iter().map(|u| (u - exact).abs()).fold(0.0, f64::max)
}

#[test]
fn uniform_data_follows_the_logistic_ode() {
    assert!(logistic_error_at(5.0, 1e-3) <= 1e-4);
    // explicit Euler: halving dt halves the error
    let ratio = logistic_error_at(0.5, 1e-3) / logistic_error_at(0.5, 5e-4);
    assert!((ratio - 2.0).abs() < 0.1, "ratio {ratio}");
}

#[test]
fn one_step_mass_law() {
    let g = Grid::rectangle(1.0, 1.5, 12, 9).unwrap();
    let k = power_law(2, 0.5, 1.0, 1.5, 0.7, 1.3);
    let mut stepper = Stepper::new(g.clone(), k.clone());
    let u = g.sample(|x, y| 0.4 + (3.0 * x).sin().powi(2) + y);
    let v = g.sample(|x, y| 1.0 + x * y);
    let mut state = SimState {
        u,
        v,
        t: 0.0,
        dt: 0.0,
    };
    state.dt = stepper.stable_dt(&state, 0.4, 1e-2);
    let next = stepper.step(&state).unwrap();
    let source: Vec<f64> = state.u.iter().map(|&x| k.source(x)).collect();
    let predicted = g.integrate(&state.u) + next.dt * g.integrate(&source);
    let got = g.integrate(&next.u);
    assert!((got - predicted).abs() <= 1e-13 * predicted.abs());
}

#[test]
fn pure_logistic_is_tight_in_the_mass_monitor() {
    // with no transport the mass inequality is an equality up to the time step
    let k = power_law(1, 0.0, 1.0, 2.0, 1.0, 1.0);
    let env = k.envelope_constants().unwrap();
    let mut ctl = controls(4.0, 0.1);
    ctl.dt_max = 1e-3;
    let r = run(&config(Grid::line(1.0, 8).unwrap(), k, uniform(0.1), ctl)).unwrap();
    let report = mass_ode_monitor(&r.series, Some(&env), 1.0);
    assert_eq!(report.violations, 0);
    // the gap is the variation of the right-hand side over one record interval
    assert!(report.worst_gap < 0.1, "gap {}", report.worst_gap);
    assert!(report.worst_gap > 0.0);
}

#[test]
fn v_relaxes_to_frozen_u() {
    let g = Grid::rectangle(1.0, 1.0, 8, 8).unwrap();
    let mut stepper = Stepper::new(g.clone(), power_law(2, 0.0, 1.0, 2.0, 0.0, 1.0));
    let u = g.constant(1.7);
    let mut v = g.constant(0.0);
    for _ in 0..400 {
        v = stepper.relax_v(&u, &v, 0.1).unwrap();
    }
    // limited by the conjugate-gradient tolerance
    assert!(v.iter().all(|x| (x - 1.7).abs() < 1e-8));
}

#[test]
fn runs_are_deterministic() {
    let k = power_law(2, 0.0, 1.0, 2.0, 1.0, 1.0);
    let init = InitialData {
        profile: Profile::Random { u_max: 2.0, seed: 7 },
        v0: InitialV::Smooth,
    };
    let cfg = SimConfig::new(
        Grid::rectangle(1.0, 1.0, 10, 10).unwrap(),
        k,
        init,
        controls(0.5, 0.05),
        DiagnosticsConfig::default(),
    );
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(a.series, b.series);
    assert_eq!(a.final_state, b.final_state);
}

#[test]
fn snapshots_land_on_requested_times() {
    let k = Kinetics::cubic_bistable(ModelParams::new(1, 0.0, 1.0, 3.0, 0.0, 1.0, 1.0, 1.0).unwrap(), 0.3).unwrap();
    let mut ctl = controls(1.0, 0.25);
    ctl.snapshot_times = vec![0.0, 0.37, 1.0];
    let r = run(&config(Grid::line(2.0, 16).unwrap(), k, cosine(0.6, 0.2), ctl)).unwrap();
    let times: Vec<f64> = r.snapshots.iter().map(|s| s.t).collect();
    assert_eq!(times.len(), 3);
    for (t, want) in times.iter().zip([0.0, 0.37, 1.0]) {
        assert!((t - want).abs() < 1e-12, "{t} vs {want}");
    }
    let recorded: Vec<f64> = r.series.records().iter().map(|x| x.t).collect();
    assert_eq!(recorded.len(), 5);
    assert!(Field(r.final_state.u.0.clone()).min() >= 0.0);
}
