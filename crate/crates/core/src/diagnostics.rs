//! Norms recorded along a run and the checks built on them: the mass
//! inequality, the uniform mass bound, and the two-window plateau test.

use std::io::{self, Write};

use crate::grid::Grid;
use crate::kinetics::{logistic_offset, Envelope};
use crate::stepper::{RunStatus, SimState};

/// `(integrate(u^p))^{1/p}`; `p = inf` gives the maximum.
pub fn lp_norm(g: &Grid, u: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        return g.integrate(u);
    }
    let m = u.iter().fold(0.0_f64, |acc, &x| acc.max(x.abs()));
    if p.is_infinite() || m == 0.0 {
        return m;
    }
    let sum: f64 = u.iter().map(|&x| (x.abs() / m).powf(p)).sum();
    m * (g.cell_volume() * sum).powf(1.0 / p)
}

/// `(integrate(|grad v|^s))^{1/s}` with cell-averaged face gradients.
pub fn grad_lnorm(g: &Grid, v: &[f64], s: f64) -> f64 {
    let g2 = g.gradient_magnitude_sq(v);
    let m = g2.iter().cloned().fold(0.0, f64::max);
    if m == 0.0 {
        return 0.0;
    }
    if s.is_infinite() {
        return m.sqrt();
    }
    let sum: f64 = g2.iter().map(|&x| (x / m).powf(0.5 * s)).sum();
    m.sqrt() * (g.cell_volume() * sum).powf(1.0 / s)
}

/// `(1/p) integrate((u+1)^p) + (1/(2q)) integrate(|grad v|^{2q})`.
///
/// Returns `+inf` rather than NaN when the value exceeds the `f64` range.
pub fn energy_y(g: &Grid, state: &SimState, p: f64, q: f64) -> f64 {
    let g2 = g.gradient_magnitude_sq(&state.v);
    let vol = g.cell_volume();
    let max_u = state.u.iter().cloned().fold(0.0, f64::max);
    let max_g2 = g2.iter().cloned().fold(0.0, f64::max);
    let direct = p * (1.0 + max_u).ln() < 700.0 && (max_g2 == 0.0 || q * max_g2.ln() < 700.0);
    if direct {
        let a: f64 = state.u.iter().map(|&x| (1.0 + x).powf(p)).sum();
        let b: f64 = g2.iter().map(|&x| x.powf(q)).sum();
        return vol * a / p + vol * b / (2.0 * q);
    }
    let log_a = log_sum_exp(state.u.iter().map(|&x| p * (1.0 + x).ln())) + vol.ln() - p.ln();
    let log_b = log_sum_exp(g2.iter().filter(|&&x| x > 0.0).map(|&x| q * x.ln())) + vol.ln() - (2.0 * q).ln();
    let top = log_a.max(log_b);
    let log_y = top + ((log_a - top).exp() + (log_b - top).exp()).ln();
    if log_y >= f64::MAX.ln() {
        f64::INFINITY
    } else {
        log_y.exp()
    }
}

fn log_sum_exp<I: Iterator<Item = f64> + Clone>(terms: I) -> f64 {
    let top = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + terms.map(|x| (x - top).exp()).sum::<f64>().ln()
}

/// Which norms a run records.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsConfig {
    pub lp: Vec<f64>,
    pub ls: Vec<f64>,
    pub energy_p: f64,
    pub energy_q: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            lp: vec![2.0, 4.0],
            ls: vec![1.5],
            energy_p: 2.0,
            energy_q: 2.0,
        }
    }
}

impl DiagnosticsConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.lp.iter().any(|&p| !(p >= 1.0)) {
            return Err("lp exponents must be >= 1".into());
        }
        if self.ls.iter().any(|&s| !(s >= 1.0)) {
            return Err("ls exponents must be >= 1".into());
        }
        if !(self.energy_p > 1.0 && self.energy_p.is_finite()) {
            return Err("energy_p must be finite and > 1".into());
        }
        if !(self.energy_q > 1.0 && self.energy_q.is_finite()) {
            return Err("energy_q must be finite and > 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub t: f64,
    pub mass: f64,
    pub linf_u: f64,
    pub lp_u: Vec<f64>,
    pub l2_gradv: f64,
    pub ls_gradv: Vec<f64>,
    pub energy_y: f64,
    pub dt: f64,
    /// `integrate(u^gamma)` for the kinetics' logistic exponent.
    pub u_gamma_integral: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsSeries {
    config: DiagnosticsConfig,
    gamma: f64,
    records: Vec<Record>,
}

impl DiagnosticsSeries {
    pub fn new(config: DiagnosticsConfig, gamma: f64) -> Self {
        Self {
            config,
            gamma,
            records: Vec::new(),
        }
    }

    pub fn config(&self) -> &DiagnosticsConfig {
        &self.config
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&Record> {
        self.records.last()
    }

    /// Appends a record; timestamps must increase strictly.
    pub fn record(&mut self, g: &Grid, state: &SimState, dt: f64) {
        if let Some(last) = self.records.last() {
            assert!(state.t > last.t, "record times must increase ({} after {})", state.t, last.t);
        }
        let u = &state.u;
        let v = &state.v;
        let lp_u = self.config.lp.iter().map(|&p| lp_norm(g, u, p)).collect();
        let ls_gradv = self.config.ls.iter().map(|&s| grad_lnorm(g, v, s)).collect();
        let u_gamma_integral = g.integrate(&u.iter().map(|&x| x.powf(self.gamma)).collect::<Vec<_>>());
        self.records.push(Record {
            t: state.t,
            mass: g.integrate(u),
            linf_u: u.max(),
            lp_u,
            l2_gradv: grad_lnorm(g, v, 2.0),
            ls_gradv,
            energy_y: energy_y(g, state, self.config.energy_p, self.config.energy_q),
            dt,
            u_gamma_integral,
        });
    }

    pub fn column<F: Fn(&Record) -> f64>(&self, f: F) -> Vec<(f64, f64)> {
        self.records.iter().map(|r| (r.t, f(r))).collect()
    }

    pub fn csv_header(&self) -> String {
        let mut cols = vec!["t".to_string(), "mass".into(), "linf_u".into()];
        cols.extend(self.config.lp.iter().map(|p| format!("lp_u_p{p}")));
        cols.push("l2_gradv".into());
        cols.extend(self.config.ls.iter().map(|s| format!("ls_gradv_s{s}")));
        cols.push("energy_y".into());
        cols.push("dt".into());
        cols.join(",")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", self.csv_header())?;
        for r in &self.records {
            let mut fields = vec![r.t, r.mass, r.linf_u];
            fields.extend(&r.lp_u);
            fields.push(r.l2_gradv);
            fields.extend(&r.ls_gradv);
            fields.push(r.energy_y);
            fields.push(r.dt);
            let line: Vec<String> = fields.iter().map(|&x| csv_number(x)).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Shortest round-trip decimal, switching to exponent form outside `[1e-4, 1e15)`.
pub fn csv_number(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassOdeReport {
    /// False when the kinetics admit no envelope; nothing was checked.
    pub applicable: bool,
    pub pairs: usize,
    pub violations: usize,
    /// Largest `lhs - rhs - slack` over record pairs (negative when all hold).
    pub worst_excess: f64,
    /// Largest `|lhs - rhs|`, a measure of how tight the inequality is.
    pub worst_gap: f64,
}

/// Checks `(m_{k+1} - m_k)/dt <= a|Omega| - mu integrate(u^gamma)(t_k) + slack_k`
/// over consecutive records.
///
/// `slack_k = 1e-10 * scale + 2 |R_{k+1} - R_k|` where `R` is the right-hand
/// side: the step-averaged source differs from its left-endpoint value by at
/// most the variation of `R` across the record interval.
pub fn mass_ode_monitor(series: &DiagnosticsSeries, envelope: Option<&Envelope>, volume: f64) -> MassOdeReport {
    let Some(env) = envelope else {
        return MassOdeReport {
            applicable: false,
            pairs: 0,
            violations: 0,
            worst_excess: f64::NEG_INFINITY,
            worst_gap: 0.0,
        };
    };
    assert_eq!(
        env.gamma, series.gamma,
        "series recorded integrate(u^gamma) for a different gamma"
    );
    let rhs = |r: &Record| env.a * volume - env.mu * r.u_gamma_integral;
    let mut violations = 0;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_gap: f64 = 0.0;
    for w in series.records.windows(2) {
        let (r0, r1) = (&w[0], &w[1]);
        let dt = r1.t - r0.t;
        let lhs = (r1.mass - r0.mass) / dt;
        let rhs0 = rhs(r0);
        let scale = 1.0_f64.max(lhs.abs()).max((env.a * volume).abs()).max(env.mu * r0.u_gamma_integral);
        let slack = 1e-10 * scale + 2.0 * (rhs(r1) - rhs0).abs();
        let excess = lhs - rhs0 - slack;
        worst_excess = worst_excess.max(excess);
        worst_gap = worst_gap.max((lhs - rhs0).abs());
        if excess > 0.0 {
            violations += 1;
        }
    }
    MassOdeReport {
        applicable: true,
        pairs: series.records.len().saturating_sub(1),
        violations,
        worst_excess,
        worst_gap,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassBoundCheck {
    /// `max_{u >= 0} (u - u^gamma)`.
    pub c1: f64,
    /// `max{integrate(u0), (a + C1 mu)|Omega|/mu}`.
    pub c2: f64,
    /// `max_k (mass_k - C2)`.
    pub max_violation: f64,
    pub ok: bool,
}

pub const MASS_BOUND_TOL: f64 = 0.02;

pub fn mass_bound_check(series: &DiagnosticsSeries, envelope: &Envelope, volume: f64, u0_mass: f64) -> MassBoundCheck {
    let c1 = logistic_offset(envelope.gamma);
    let c2 = u0_mass.max((envelope.a + c1 * envelope.mu) * volume / envelope.mu);
    let max_violation = series
        .records
        .iter()
        .map(|r| r.mass - c2)
        .fold(f64::NEG_INFINITY, f64::max);
    MassBoundCheck {
        c1,
        c2,
        max_violation,
        ok: max_violation <= MASS_BOUND_TOL * c2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundedness {
    Bounded,
    SuspectedBlowup,
    Inconclusive,
}

impl Boundedness {
    pub fn name(self) -> &'static str {
        match self {
            Boundedness::Bounded => "bounded",
            Boundedness::SuspectedBlowup => "suspected_blowup",
            Boundedness::Inconclusive => "inconclusive",
        }
    }
}

/// Two dyadic windows: `sup over [T/2, T] <= ratio * sup over [T/4, T/2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauPolicy {
    pub ratio: f64,
}

impl Default for PlateauPolicy {
    fn default() -> Self {
        Self { ratio: 1.05 }
    }
}

impl PlateauPolicy {
    /// `samples` are `(t, value)` pairs; `t_end` is the end of the run.
    pub fn holds(&self, samples: &[(f64, f64)], t_end: f64) -> bool {
        let sup = |lo: f64, hi: f64| {
            samples
                .iter()
                .filter(|(t, _)| *t >= lo && *t <= hi)
                .map(|&(_, x)| x)
                .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))))
        };
        match (sup(0.25 * t_end, 0.5 * t_end), sup(0.5 * t_end, t_end)) {
            (Some(early), Some(late)) => late.is_finite() && late <= self.ratio * early,
            _ => false,
        }
    }
}

pub fn classify_boundedness(series: &DiagnosticsSeries, status: RunStatus, policy: &PlateauPolicy) -> Boundedness {
    match status {
        RunStatus::SuspectedBlowup => Boundedness::SuspectedBlowup,
        RunStatus::StepUnderflow => Boundedness::Inconclusive,
        RunStatus::Completed => {
            let t_end = series.last().map_or(0.0, |r| r.t);
            if policy.holds(&series.column(|r| r.linf_u), t_end) {
                Boundedness::Bounded
            } else {
                Boundedness::Inconclusive
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Field;
    use std::f64::consts::PI;

    fn state(u: Field, v: Field) -> SimState {
        SimState { u, v, t: 0.0, dt: 0.0 }
    }

    #[test]
    fn lp_of_constant() {
        let g = Grid::line(1.0, 32).unwrap();
        let u = g.constant(2.5);
        for p in [1.0, 1.5, 2.0, 7.0, f64::INFINITY] {
            assert!((lp_norm(&g, &u, p) - 2.5).abs() < 1e-14);
        }
    }

    #[test]
    fn l1_is_integral_exactly() {
        let g = Grid::rectangle(1.0, 2.0, 7, 9).unwrap();
        let u = g.sample(|x, y| 0.1 + x * y * y);
        assert_eq!(lp_norm(&g, &u, 1.0), g.integrate(&u));
    }

    #[test]
    fn lp_nondecreasing_on_unit_volume() {
        let g = Grid::line(1.0, 64).unwrap();
        let u = g.sample(|x, _| if (x - 0.3).abs() < 0.1 { 5.0 } else { 0.2 });
        let ps = [1.0, 1.25, 1.5, 2.0, 3.0, 5.0, 8.0, 20.0, f64::INFINITY];
        let norms: Vec<f64> = ps.iter().map(|&p| lp_norm(&g, &u, p)).collect();
        for w in norms.windows(2) {
            assert!(w[1] >= w[0] * (1.0 - 1e-14));
        }
    }

    #[test]
    fn gradient_norms() {
        let g = Grid::line(1.0, 16).unwrap();
        assert_eq!(grad_lnorm(&g, &g.constant(3.0), 2.0), 0.0);
        let err = |n: usize| {
            let g = Grid::line(1.0, n).unwrap();
            let v = g.sample(|x, _| (PI * x).cos());
            (grad_lnorm(&g, &v, 2.0) - PI / 2.0_f64.sqrt()).abs()
        };
        let ratio = err(32) / err(64);
        assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
        let v = g.sample(|x, _| (2.0 * x).sin() + x * x);
        assert!(grad_lnorm(&g, &v, 1.0) <= grad_lnorm(&g, &v, 2.0));
    }

    #[test]
    fn energy_examples() {
        let g = Grid::line(1.0, 16).unwrap();
        let y = energy_y(&g, &state(g.constant(0.0), g.constant(0.0)), 3.0, 2.0);
        assert!((y - 1.0 / 3.0).abs() < 1e-15);
        let y = energy_y(&g, &state(g.constant(1.0), g.constant(4.0)), 2.0, 2.0);
        assert!((y - 2.0).abs() < 1e-15);
    }

    #[test]
    fn energy_overflow_is_infinite_not_nan() {
        let g = Grid::line(1.0, 8).unwrap();
        let y = energy_y(&g, &state(g.constant(1e200), g.constant(0.0)), 5.0, 2.0);
        assert_eq!(y, f64::INFINITY);
        // large but representable: log path agrees with the closed form
        let y = energy_y(&g, &state(g.constant(1e70), g.constant(0.0)), 4.0, 2.0);
        let expected = (1.0 + 1e70_f64).powf(4.0) / 4.0;
        assert!(((y - expected) / expected).abs() < 1e-12);
    }

    #[test]
    fn mass_bound_constants() {
        let env = Envelope { a: 0.0, mu: 1.0, gamma: 2.0 };
        let series = DiagnosticsSeries::new(DiagnosticsConfig::default(), 2.0);
        let check = mass_bound_check(&series, &env, 1.0, 2.0);
        assert!((check.c1 - 0.25).abs() < 1e-15);
        assert_eq!(check.c2, 2.0);
        let env1 = Envelope { a: 1.0, mu: 2.0, gamma: 1.0 };
        let check = mass_bound_check(&series, &env1, 3.0, 0.1);
        assert_eq!(check.c1, 0.0);
        assert_eq!(check.c2, 1.5);
    }

    fn series_from(linf: &[(f64, f64)]) -> DiagnosticsSeries {
        let mut s = DiagnosticsSeries::new(DiagnosticsConfig { lp: vec![], ls: vec![], ..Default::default() }, 2.0);
        for &(t, l) in linf {
            s.records.push(Record {
                t,
                mass: 1.0,
                linf_u: l,
                lp_u: vec![],
                l2_gradv: 0.0,
                ls_gradv: vec![],
                energy_y: 0.0,
                dt: 0.1,
                u_gamma_integral: 1.0,
            });
        }
        s
    }

    #[test]
    fn boundedness_policy() {
        let policy = PlateauPolicy::default();
        let flat: Vec<(f64, f64)> = (0..=40).map(|k| (k as f64 * 0.25, 1.0)).collect();
        let s = series_from(&flat);
        assert_eq!(classify_boundedness(&s, RunStatus::Completed, &policy), Boundedness::Bounded);
        assert_eq!(classify_boundedness(&s, RunStatus::SuspectedBlowup, &policy), Boundedness::SuspectedBlowup);
        // sup late / sup early = 1.2
        let growing: Vec<(f64, f64)> = (0..=40)
            .map(|k| {
                let t = k as f64 * 0.25;
                (t, if t <= 5.0 { 1.0 } else { 1.0 + 0.2 * (t - 5.0) / 5.0 })
            })
            .collect();
        let s = series_from(&growing);
        assert_eq!(classify_boundedness(&s, RunStatus::Completed, &policy), Boundedness::Inconclusive);
    }

    #[test]
    fn mass_monitor_guard() {
        let s = series_from(&[(0.0, 1.0), (1.0, 1.0)]);
        assert!(!mass_ode_monitor(&s, None, 1.0).applicable);
    }

    #[test]
    fn csv_numbers_round_trip() {
        for x in [0.0, 10.0, 0.05, 5.788852326134135e-14, 1e300, -2.5e-9, f64::INFINITY] {
            assert_eq!(csv_number(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(csv_number(10.0), "10");
        assert_eq!(csv_number(1.5e-7), "1.5e-7");
    }

    #[test]
    fn csv_header_suffixes() {
        let s = DiagnosticsSeries::new(
            DiagnosticsConfig { lp: vec![2.0, 4.0], ls: vec![1.5], energy_p: 3.0, energy_q: 2.0 },
            2.0,
        );
        assert_eq!(
            s.csv_header(),
            "t,mass,linf_u,lp_u_p2,lp_u_p4,l2_gradv,ls_gradv_s1.5,energy_y,dt"
        );
    }
}
