//! Concrete diffusivity `D`, sensitivity `S` and source `f`, together with the
//! envelope constants `(a, mu, gamma)` for which `f(u) <= a - mu u^gamma`.

use thiserror::Error;

use crate::exponents::{ModelParams, ParamError};
use crate::optimize::maximize_scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KineticsError {
    #[error("cubic parameter b = {0} must lie in (0, 1/2)")]
    CubicParameter(f64),
    #[error("linear growth rate r = {0} must be finite and >= 0")]
    GrowthRate(f64),
    #[error("invalid table: {0}")]
    Table(String),
    #[error("no envelope constants for preset {0:?}")]
    UnsupportedPreset(Preset),
    #[error("growth rate r = {r} is not dominated by mu = {mu} when gamma = 1")]
    NoEnvelope { r: f64, mu: f64 },
    #[error(transparent)]
    Params(#[from] ParamError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// `D = M1 (1+u)^{-alpha}`, `S = M2 u (1+u)^{beta-1}`, `f = a + r u - mu u^gamma`.
    PowerLaw,
    /// Power-law `D`, `S` with `f = u (u - b)(1 - u)`.
    CubicBistable,
    /// Piecewise-linear tables for all three functions.
    Tabulated,
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "power_law" | "powerlaw" => Ok(Preset::PowerLaw),
            "cubic_bistable" | "cubic" => Ok(Preset::CubicBistable),
            other => Err(format!(
                "unknown preset `{other}` (expected power_law|cubic_bistable)"
            )),
        }
    }
}

/// Preset-specific extras: `r` is the linear growth rate of the power-law
/// source, `b` the middle root of the cubic source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresetExtra {
    pub r: f64,
    pub b: f64,
}

impl Default for PresetExtra {
    fn default() -> Self {
        Self { r: 0.0, b: 0.25 }
    }
}

/// Nodes `u_0 = 0 < u_1 < ...` with values of `D`, `S`, `f`. Values are
/// interpolated linearly and held constant beyond the last node.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    u: Vec<f64>,
    d: Vec<f64>,
    s: Vec<f64>,
    f: Vec<f64>,
}

impl Table {
    pub fn new(u: Vec<f64>, d: Vec<f64>, s: Vec<f64>, f: Vec<f64>) -> Result<Self, KineticsError> {
        let len = u.len();
        if len < 2 || d.len() != len || s.len() != len || f.len() != len {
            return Err(KineticsError::Table(
                "need at least two nodes and equal column lengths".into(),
            ));
        }
        if u[0] != 0.0 {
            return Err(KineticsError::Table("first node must be u = 0".into()));
        }
        if u.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(KineticsError::Table("nodes must be strictly increasing".into()));
        }
        if d.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(KineticsError::Table("D must be positive and finite".into()));
        }
        if s[0] != 0.0 {
            return Err(KineticsError::Table("S(0) must be 0".into()));
        }
        if !(f[0] >= 0.0) {
            return Err(KineticsError::Table("f(0) must be >= 0".into()));
        }
        if s.iter().chain(f.iter()).any(|x| !x.is_finite()) {
            return Err(KineticsError::Table("values must be finite".into()));
        }
        Ok(Self { u, d, s, f })
    }

    /// Constant `D`, vanishing `S` and `f`: plain diffusion.
    pub fn pure_diffusion(d: f64) -> Result<Self, KineticsError> {
        Self::new(vec![0.0, 1.0], vec![d, d], vec![0.0, 0.0], vec![0.0, 0.0])
    }

    fn locate(&self, u: f64) -> (usize, f64) {
        let last = self.u.len() - 1;
        if u >= self.u[last] {
            return (last - 1, 1.0);
        }
        let k = self.u.partition_point(|&x| x <= u).saturating_sub(1).min(last - 1);
        let w = (u - self.u[k]) / (self.u[k + 1] - self.u[k]);
        (k, w)
    }

    fn interp(&self, col: &[f64], u: f64) -> f64 {
        let (k, w) = self.locate(u);
        col[k] + w * (col[k + 1] - col[k])
    }

    fn slope(&self, col: &[f64], u: f64) -> f64 {
        if u >= self.u[self.u.len() - 1] {
            return 0.0;
        }
        let (k, _) = self.locate(u);
        (col[k + 1] - col[k]) / (self.u[k + 1] - self.u[k])
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Source {
    PowerLaw { r: f64 },
    Cubic { b: f64 },
    Tabulated(Table),
}

/// `f(u) <= a - mu u^gamma` for all `u >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub a: f64,
    pub mu: f64,
    pub gamma: f64,
}

impl Envelope {
    pub fn bound(&self, u: f64) -> f64 {
        self.a - self.mu * u.powf(self.gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticValues {
    pub d: f64,
    pub s: f64,
    pub f: f64,
}

/// Sampled check of the three structure inequalities.
///
/// Margins are the worst sampled value of `lhs - rhs` (oriented so that a
/// nonnegative margin means the inequality holds), divided by
/// `max(1, |function value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeReport {
    pub d_ok: bool,
    pub s_ok: bool,
    pub f_ok: bool,
    pub d_margin: f64,
    pub s_margin: f64,
    pub f_margin: f64,
    /// Sample at which the `f` margin is attained.
    pub f_worst_u: f64,
    pub samples: usize,
}

impl EnvelopeReport {
    pub fn all_ok(&self) -> bool {
        self.d_ok && self.s_ok && self.f_ok
    }
}

/// Tolerance on the relative margins in [`EnvelopeReport`].
pub const ENVELOPE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Kinetics {
    params: ModelParams,
    source: Source,
}

impl Kinetics {
    pub fn power_law(params: ModelParams, r: f64) -> Result<Self, KineticsError> {
        params.validate()?;
        if !(r >= 0.0) || !r.is_finite() {
            return Err(KineticsError::GrowthRate(r));
        }
        Ok(Self {
            params,
            source: Source::PowerLaw { r },
        })
    }

    /// Records `gamma = 3` in the stored parameters regardless of the input.
    pub fn cubic_bistable(mut params: ModelParams, b: f64) -> Result<Self, KineticsError> {
        if !(b > 0.0 && b < 0.5) {
            return Err(KineticsError::CubicParameter(b));
        }
        params.gamma = 3.0;
        params.validate()?;
        Ok(Self {
            params,
            source: Source::Cubic { b },
        })
    }

    pub fn tabulated(params: ModelParams, table: Table) -> Result<Self, KineticsError> {
        params.validate()?;
        Ok(Self {
            params,
            source: Source::Tabulated(table),
        })
    }

    pub fn make(preset: Preset, params: ModelParams, extra: PresetExtra) -> Result<Self, KineticsError> {
        match preset {
            Preset::PowerLaw => Self::power_law(params, extra.r),
            Preset::CubicBistable => Self::cubic_bistable(params, extra.b),
            Preset::Tabulated => Err(KineticsError::Table(
                "tabulated kinetics are built from a Table".into(),
            )),
        }
    }

    pub fn preset(&self) -> Preset {
        match self.source {
            Source::PowerLaw { .. } => Preset::PowerLaw,
            Source::Cubic { .. } => Preset::CubicBistable,
            Source::Tabulated(_) => Preset::Tabulated,
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn with_dimension(mut self, n: u32) -> Self {
        self.params.n = n;
        self
    }

    #[inline]
    pub fn diffusivity(&self, u: f64) -> f64 {
        let u = u.max(0.0);
        match &self.source {
            Source::Tabulated(t) => t.interp(&t.d, u),
            _ => {
                if self.params.alpha == 0.0 {
                    self.params.m1
                } else {
                    self.params.m1 * (1.0 + u).powf(-self.params.alpha)
                }
            }
        }
    }

    /// `S(u) / u`, extended continuously to `u = 0`.
    #[inline]
    pub fn sensitivity_ratio(&self, u: f64) -> f64 {
        let u = u.max(0.0);
        match &self.source {
            Source::Tabulated(t) => {
                if u > 0.0 {
                    t.interp(&t.s, u) / u
                } else {
                    t.slope(&t.s, 0.0)
                }
            }
            _ => {
                let exp = self.params.beta - 1.0;
                if exp == 0.0 {
                    self.params.m2
                } else {
                    self.params.m2 * (1.0 + u).powf(exp)
                }
            }
        }
    }

    #[inline]
    pub fn sensitivity(&self, u: f64) -> f64 {
        let u = u.max(0.0);
        match &self.source {
            Source::Tabulated(t) => t.interp(&t.s, u),
            _ => u * self.sensitivity_ratio(u),
        }
    }

    /// `S'(u)`.
    pub fn sensitivity_slope(&self, u: f64) -> f64 {
        let u = u.max(0.0);
        match &self.source {
            Source::Tabulated(t) => t.slope(&t.s, u),
            _ => {
                let beta = self.params.beta;
                self.params.m2 * (1.0 + u).powf(beta - 2.0) * (1.0 + beta * u)
            }
        }
    }

    #[inline]
    pub fn source(&self, u: f64) -> f64 {
        let u = u.max(0.0);
        match &self.source {
            Source::PowerLaw { r } => {
                self.params.a + r * u - self.params.mu * u.powf(self.params.gamma)
            }
            Source::Cubic { b } => u * (u - b) * (1.0 - u),
            Source::Tabulated(t) => t.interp(&t.f, u),
        }
    }

    pub fn evaluate(&self, u: f64) -> KineticValues {
        KineticValues {
            d: self.diffusivity(u),
            s: self.sensitivity(u),
            f: self.source(u),
        }
    }

    pub fn envelope_constants(&self) -> Result<Envelope, KineticsError> {
        let p = &self.params;
        match &self.source {
            Source::PowerLaw { r } => {
                let r = *r;
                if r == 0.0 {
                    return Ok(Envelope {
                        a: p.a,
                        mu: p.mu,
                        gamma: p.gamma,
                    });
                }
                if p.gamma == 1.0 {
                    return if r < p.mu {
                        Ok(Envelope {
                            a: p.a,
                            mu: p.mu - r,
                            gamma: 1.0,
                        })
                    } else {
                        Err(KineticsError::NoEnvelope { r, mu: p.mu })
                    };
                }
                let half = 0.5 * p.mu;
                let shift = if p.gamma == 2.0 {
                    r * r / (2.0 * p.mu)
                } else {
                    let root = (r / half).powf(1.0 / (p.gamma - 1.0));
                    maximize_scalar(|u| r * u - half * u.powf(p.gamma), 0.0, root + 1.0).1
                };
                Ok(Envelope {
                    a: p.a + shift,
                    mu: half,
                    gamma: p.gamma,
                })
            }
            Source::Cubic { b } => {
                let b = *b;
                let (_, a) = maximize_scalar(
                    |u| u * (u - b) * (1.0 - u) + 0.5 * u * u * u,
                    0.0,
                    2.0 * (1.0 + b) + 1.0,
                );
                Ok(Envelope {
                    a: a.max(0.0),
                    mu: 0.5,
                    gamma: 3.0,
                })
            }
            Source::Tabulated(_) => Err(KineticsError::UnsupportedPreset(Preset::Tabulated)),
        }
    }

    /// Checks (1) `D >= M1 (1+u)^{-alpha}`, (2) `S <= M2 (1+u)^beta`, and
    /// (3) `f <= a - mu u^gamma` on a log-spaced sample of `[0, u_max]`.
    ///
    /// Condition (3) uses [`Self::envelope_constants`] when available and the
    /// stored `(a, mu, gamma)` otherwise.
    pub fn verify_envelopes(&self, u_max: f64, samples: usize) -> EnvelopeReport {
        let envelope = self.envelope_constants().unwrap_or(Envelope {
            a: self.params.a,
            mu: self.params.mu,
            gamma: self.params.gamma,
        });
        self.verify_against(&envelope, u_max, samples)
    }

    pub fn verify_against(&self, envelope: &Envelope, u_max: f64, samples: usize) -> EnvelopeReport {
        assert!(u_max > 0.0 && samples >= 2);
        let p = &self.params;
        let mut d_margin = f64::INFINITY;
        let mut s_margin = f64::INFINITY;
        let mut f_margin = f64::INFINITY;
        let mut f_worst_u = 0.0;
        for u in log_samples(u_max, samples) {
            let KineticValues { d, s, f } = self.evaluate(u);
            let d_env = p.m1 * (1.0 + u).powf(-p.alpha);
            d_margin = d_margin.min((d - d_env) / d.abs().max(1.0));
            let s_env = p.m2 * (1.0 + u).powf(p.beta);
            s_margin = s_margin.min((s_env - s) / s.abs().max(1.0));
            let fm = (envelope.bound(u) - f) / f.abs().max(1.0);
            if fm < f_margin {
                f_margin = fm;
                f_worst_u = u;
            }
        }
        EnvelopeReport {
            d_ok: d_margin >= -ENVELOPE_TOL,
            s_ok: s_margin >= -ENVELOPE_TOL,
            f_ok: f_margin >= -ENVELOPE_TOL,
            d_margin,
            s_margin,
            f_margin,
            f_worst_u,
            samples,
        }
    }
}

/// `0` followed by `samples - 1` geometrically spaced points ending at `u_max`.
fn log_samples(u_max: f64, samples: usize) -> impl Iterator<Item = f64> {
    let rest = samples - 1;
    let u_min = (u_max * 1e-9).min(1e-6);
    let ratio = if rest > 1 {
        (u_max / u_min).powf(1.0 / (rest - 1) as f64)
    } else {
        1.0
    };
    std::iter::once(0.0).chain((0..rest).map(move |k| {
        if k + 1 == rest {
            u_max
        } else {
            u_min * ratio.powi(k as i32)
        }
    }))
}

/// `max_{u >= 0} (u - u^gamma)`; zero when `gamma = 1`.
pub fn logistic_offset(gamma: f64) -> f64 {
    if gamma == 1.0 {
        return 0.0;
    }
    maximize_scalar(|u| u - u.powf(gamma), 0.0, 2.0).1.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha: f64, beta: f64, gamma: f64, a: f64, mu: f64) -> ModelParams {
        ModelParams::new(1, alpha, beta, gamma, a, mu, 1.0, 1.0).unwrap()
    }

    #[test]
    fn minimal_model_sensitivity_is_linear() {
        let mut p = params(0.0, 1.0, 2.0, 0.0, 1.0);
        p.m2 = 3.5;
        let k = Kinetics::power_law(p, 0.0).unwrap();
        for u in [0.0, 0.3, 2.0, 17.0] {
            assert_eq!(k.sensitivity(u), 3.5 * u);
            assert_eq!(k.diffusivity(u), 1.0);
        }
    }

    #[test]
    fn cubic_roots() {
        let k = Kinetics::cubic_bistable(params(0.0, 1.0, 2.0, 0.0, 1.0), 0.25).unwrap();
        assert_eq!(k.params().gamma, 3.0);
        assert_eq!(k.source(0.0), 0.0);
        assert_eq!(k.source(0.25), 0.0);
        assert_eq!(k.source(1.0), 0.0);
        assert!(k.source(1.5) < 0.0 && k.source(40.0) < 0.0);
        assert_eq!(k.source(0.5), 1.0 / 16.0);
    }

    #[test]
    fn cubic_parameter_range() {
        let p = params(0.0, 1.0, 2.0, 0.0, 1.0);
        assert!(Kinetics::cubic_bistable(p, 0.0).is_err());
        assert!(Kinetics::cubic_bistable(p, 0.5).is_err());
        assert!(Kinetics::cubic_bistable(p, 0.49).is_ok());
    }

    #[test]
    fn evaluate_example() {
        let k = Kinetics::power_law(params(0.0, 1.0, 2.0, 0.0, 1.0), 0.0).unwrap();
        let v = k.evaluate(2.0);
        assert_eq!((v.d, v.s, v.f), (1.0, 2.0, -4.0));
    }

    #[test]
    fn sensitivity_vanishes_at_zero() {
        let p = params(0.7, -0.4, 1.5, 1.0, 1.0);
        let table = Table::new(
            vec![0.0, 1.0, 2.0],
            vec![1.0, 2.0, 3.0],
            vec![0.0, 1.0, 1.5],
            vec![1.0, 0.0, -1.0],
        )
        .unwrap();
        for k in [
            Kinetics::power_law(p, 0.3).unwrap(),
            Kinetics::cubic_bistable(p, 0.1).unwrap(),
            Kinetics::tabulated(p, table).unwrap(),
        ] {
            assert_eq!(k.sensitivity(0.0), 0.0);
            assert_eq!(k.evaluate(-1e-17).s, 0.0);
        }
    }

    #[test]
    fn negative_roundoff_is_clamped() {
        let k = Kinetics::power_law(params(0.0, 1.0, 1.5, 1.0, 1.0), 0.0).unwrap();
        let v = k.evaluate(-1e-17);
        assert!(v.f.is_finite() && v.d.is_finite());
        assert_eq!(v.f, 1.0);
    }

    #[test]
    fn table_validation_and_interpolation() {
        assert!(Table::new(vec![0.0], vec![1.0], vec![0.0], vec![0.0]).is_err());
        assert!(Table::new(vec![0.0, 1.0], vec![1.0, 1.0], vec![0.1, 0.0], vec![0.0, 0.0]).is_err());
        assert!(Table::new(vec![0.0, 1.0], vec![1.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]).is_err());
        let t = Table::new(vec![0.0, 2.0], vec![1.0, 3.0], vec![0.0, 4.0], vec![0.0, 0.0]).unwrap();
        let k = Kinetics::tabulated(params(0.0, 1.0, 2.0, 0.0, 1.0), t).unwrap();
        assert_eq!(k.diffusivity(1.0), 2.0);
        assert_eq!(k.diffusivity(10.0), 3.0);
        assert_eq!(k.sensitivity_ratio(0.0), 2.0);
        assert_eq!(k.sensitivity_slope(1.0), 2.0);
    }

    #[test]
    fn power_law_slope_matches_difference_quotient() {
        let k = Kinetics::power_law(params(0.0, 1.7, 2.0, 0.0, 1.0), 0.0).unwrap();
        for u in [0.0, 0.5, 3.0] {
            let h = 1e-6;
            let fd = (k.sensitivity(u + h) - k.sensitivity((u - h).max(0.0))) / (u + h - (u - h).max(0.0));
            assert!((fd - k.sensitivity_slope(u)).abs() < 1e-5);
        }
    }

    #[test]
    fn power_law_envelopes_saturate() {
        let k = Kinetics::power_law(params(0.5, 1.0, 2.0, 1.0, 2.0), 0.0).unwrap();
        let rep = k.verify_envelopes(1e3, 500);
        assert!(rep.all_ok());
        assert_eq!(rep.d_margin, 0.0);
        assert_eq!(rep.f_margin, 0.0);
        assert_eq!(k.envelope_constants().unwrap(), Envelope { a: 1.0, mu: 2.0, gamma: 2.0 });
    }

    #[test]
    fn logistic_square_completion() {
        let (lambda, mu) = (3.0, 2.0);
        let k = Kinetics::power_law(params(0.0, 1.0, 2.0, 0.0, mu), lambda).unwrap();
        let env = k.envelope_constants().unwrap();
        assert_eq!(env, Envelope { a: lambda * lambda / (2.0 * mu), mu: mu / 2.0, gamma: 2.0 });
        assert!(k.verify_against(&env, 1e4, 2000).f_ok);
    }

    #[test]
    fn linear_source_fails_unit_envelope() {
        let k = Kinetics::power_law(params(0.0, 1.0, 2.0, 0.0, 1.0), 1.0).unwrap();
        let env = Envelope { a: 0.0, mu: 1.0, gamma: 2.0 };
        assert_eq!(env.bound(0.5) - k.source(0.5), -0.5);
        assert!(!k.verify_against(&env, 10.0, 100).f_ok);
    }

    #[test]
    fn general_gamma_envelope_matches_closed_form() {
        let (r, mu, gamma) = (1.5, 1.0, 3.0);
        let k = Kinetics::power_law(params(0.0, 1.0, gamma, 0.2, mu), r).unwrap();
        let env = k.envelope_constants().unwrap();
        // max of r u - (mu/2) u^gamma at u* = (2r/(gamma mu))^{1/(gamma-1)}
        let ustar = (2.0 * r / (gamma * mu)).powf(1.0 / (gamma - 1.0));
        let closed = r * ustar - 0.5 * mu * ustar.powf(gamma);
        assert!((env.a - 0.2 - closed).abs() < 1e-12);
    }

    #[test]
    fn gamma_one_envelope() {
        let k = Kinetics::power_law(params(0.0, 1.0, 1.0, 0.0, 1.0), 0.4).unwrap();
        let env = k.envelope_constants().unwrap();
        assert!((env.mu - 0.6).abs() < 1e-15);
        let k = Kinetics::power_law(params(0.0, 1.0, 1.0, 0.0, 1.0), 1.0).unwrap();
        assert!(k.envelope_constants().is_err());
    }

    #[test]
    fn tabulated_has_no_envelope_constants() {
        let k = Kinetics::tabulated(params(0.0, 1.0, 2.0, 0.0, 1.0), Table::pure_diffusion(1.0).unwrap()).unwrap();
        assert!(matches!(k.envelope_constants(), Err(KineticsError::UnsupportedPreset(_))));
    }

    #[test]
    fn logistic_offset_values() {
        assert_eq!(logistic_offset(1.0), 0.0);
        assert!((logistic_offset(2.0) - 0.25).abs() < 1e-15);
        for gamma in [1.5_f64, 3.0, 4.5] {
            let ustar = gamma.powf(-1.0 / (gamma - 1.0));
            let closed = ustar - ustar.powf(gamma);
            assert!((logistic_offset(gamma) - closed).abs() < 1e-14);
        }
    }
}
