//! Boundedness classifier and the exponent algebra behind the `L^p`/`|grad v|^{2q}`
//! energy estimate.
//!
//! Everything here is a pure function of its inputs. The brute-force lattice
//! oracle in [`oracle`] re-derives every quantity from the defining formulas and
//! shares no code with the closed-form interval construction in [`feasible_pq`].

pub mod oracle;

use std::fmt;

use thiserror::Error;

pub use oracle::{brute_force_feasibility, OracleGrid, OracleReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("spatial dimension must be at least 1, got {0}")]
    Dimension(u32),
    #[error("parameter `{name}` = {value} is invalid: {reason}")]
    Invalid {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExponentError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parameters outside the coverage region (alpha+2beta = {lhs}, threshold {threshold})")]
    Infeasible { lhs: f64, threshold: f64 },
    #[error("feasibility search needs n >= 2, got n = {0}")]
    Dimension(u32),
    #[error(transparent)]
    Params(#[from] ParamError),
}

/// The parameter tuple `(n, alpha, beta, gamma, a, mu, M1, M2)`.
///
/// `D(u) >= M1 (u+1)^{-alpha}`, `S(u) <= M2 (u+1)^beta`, `f(u) <= a - mu u^gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub n: u32,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub a: f64,
    pub mu: f64,
    pub m1: f64,
    pub m2: f64,
}

impl ModelParams {
    pub fn new(
        n: u32,
        alpha: f64,
        beta: f64,
        gamma: f64,
        a: f64,
        mu: f64,
        m1: f64,
        m2: f64,
    ) -> Result<Self, ParamError> {
        let params = Self {
            n,
            alpha,
            beta,
            gamma,
            a,
            mu,
            m1,
            m2,
        };
        params.validate()?;
        Ok(params)
    }

    /// Unit source and coefficient constants (`a = 0`, `mu = M1 = M2 = 1`).
    pub fn exponents_only(n: u32, alpha: f64, beta: f64, gamma: f64) -> Result<Self, ParamError> {
        Self::new(n, alpha, beta, gamma, 0.0, 1.0, 1.0, 1.0)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if self.n < 1 {
            return Err(ParamError::Dimension(self.n));
        }
        let finite = |name, value: f64| {
            if value.is_finite() {
                Ok(())
            } else {
                Err(ParamError::Invalid {
                    name,
                    value,
                    reason: "must be finite",
                })
            }
        };
        finite("alpha", self.alpha)?;
        finite("beta", self.beta)?;
        finite("gamma", self.gamma)?;
        finite("a", self.a)?;
        finite("mu", self.mu)?;
        finite("m1", self.m1)?;
        finite("m2", self.m2)?;
        if self.gamma < 1.0 {
            return Err(ParamError::Invalid {
                name: "gamma",
                value: self.gamma,
                reason: "logistic exponent must satisfy gamma >= 1",
            });
        }
        if self.a < 0.0 {
            return Err(ParamError::Invalid {
                name: "a",
                value: self.a,
                reason: "must be >= 0",
            });
        }
        if self.mu <= 0.0 {
            return Err(ParamError::Invalid {
                name: "mu",
                value: self.mu,
                reason: "must be > 0",
            });
        }
        if self.m1 <= 0.0 {
            return Err(ParamError::Invalid {
                name: "m1",
                value: self.m1,
                reason: "must be > 0",
            });
        }
        if self.m2 <= 0.0 {
            return Err(ParamError::Invalid {
                name: "m2",
                value: self.m2,
                reason: "must be > 0",
            });
        }
        Ok(())
    }

    /// `alpha + 2 beta`.
    pub fn chemotactic_load(&self) -> f64 {
        self.alpha + 2.0 * self.beta
    }

    /// `gamma + 1 - alpha - 2 beta`, the denominator of `theta_1`.
    pub fn coupling_gap(&self) -> f64 {
        self.gamma + 1.0 - self.alpha - 2.0 * self.beta
    }

    fn nf(&self) -> f64 {
        f64::from(self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub covered: bool,
    pub lhs: f64,
    pub threshold: f64,
    pub margin: f64,
}

/// Which gradient estimate the energy argument rests on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExponentCase {
    /// `1 <= gamma < 2`: only `||grad v||_{L^s}` for `s < n/(n-1)` is available.
    SubQuadratic,
    /// `gamma >= 2`: `||grad v||_{L^2}` is available.
    Quadratic,
}

impl ExponentCase {
    pub fn for_gamma(gamma: f64) -> Self {
        if gamma >= 2.0 {
            ExponentCase::Quadratic
        } else {
            ExponentCase::SubQuadratic
        }
    }

    /// Right-hand side of the coverage inequality for this case.
    pub fn threshold(self, gamma: f64, n: u32) -> f64 {
        let n = f64::from(n);
        match self {
            ExponentCase::SubQuadratic => gamma - 1.0 + 2.0 / n,
            ExponentCase::Quadratic => gamma - 1.0 + 4.0 / (n + 2.0),
        }
    }

    /// The Lebesgue index the interval construction works at (`n/(n-1)` or 2).
    pub fn formal_s(self, n: u32) -> f64 {
        match self {
            ExponentCase::SubQuadratic => {
                let n = f64::from(n);
                n / (n - 1.0)
            }
            ExponentCase::Quadratic => 2.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ExponentCase::SubQuadratic => "subquadratic",
            ExponentCase::Quadratic => "quadratic",
        }
    }
}

impl fmt::Display for ExponentCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ExponentCase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "subquadratic" | "sub-quadratic" | "sub" => Ok(ExponentCase::SubQuadratic),
            "quadratic" | "quad" => Ok(ExponentCase::Quadratic),
            other => Err(format!("unknown case `{other}` (expected quadratic|subquadratic)")),
        }
    }
}

/// Coverage test: `alpha + 2 beta < gamma - 1 + 2/n` for `1 <= gamma < 2`,
/// `gamma - 1 + 4/(n+2)` for `gamma >= 2`. Strict.
pub fn classify_theorem(params: &ModelParams) -> Classification {
    let lhs = params.chemotactic_load();
    let threshold = ExponentCase::for_gamma(params.gamma).threshold(params.gamma, params.n);
    let margin = threshold - lhs;
    Classification {
        covered: margin > 0.0,
        lhs,
        threshold,
        margin,
    }
}

/// Lebesgue indices `(p, q, s)` at which the exponents are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentQuery {
    pub p: f64,
    pub q: f64,
    pub s: f64,
}

impl ExponentQuery {
    pub fn new(p: f64, q: f64, s: f64) -> Result<Self, ExponentError> {
        if !(p.is_finite() && q.is_finite() && s.is_finite()) {
            return Err(ExponentError::Domain("p, q, s must be finite".into()));
        }
        if p < 1.0 || q < 1.0 || s < 1.0 {
            return Err(ExponentError::Domain(format!(
                "need p, q, s >= 1 (got p={p}, q={q}, s={s})"
            )));
        }
        Ok(Self { p, q, s })
    }

    /// Query at the case's formal index (`n/(n-1)` or 2).
    pub fn for_case(p: f64, q: f64, case: ExponentCase, n: u32) -> Result<Self, ExponentError> {
        if case == ExponentCase::SubQuadratic && n < 2 {
            return Err(ExponentError::Dimension(n));
        }
        Self::new(p, q, case.formal_s(n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentCheck {
    pub theta1: f64,
    pub theta2: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub f1: f64,
    pub f2: f64,
}

impl ExponentCheck {
    pub fn all_pass(&self) -> bool {
        let in_unit = |k: f64| k > 0.0 && k < 1.0;
        in_unit(self.kappa1) && in_unit(self.kappa2) && self.f1 < 2.0 && self.f2 < 2.0
    }
}

/// `(theta_1, theta_2)`:
/// `theta_1 = 2(p+gamma-1)/(gamma+1-alpha-2beta)`,
/// `theta_2 = 2(q-1)(p+gamma-1)/(p+gamma-3)`.
pub fn theta_exponents(p: f64, q: f64, params: &ModelParams) -> Result<(f64, f64), ExponentError> {
    let gap = params.coupling_gap();
    if gap <= 0.0 {
        return Err(ExponentError::Domain(format!(
            "gamma+1-alpha-2beta = {gap} must be positive"
        )));
    }
    let shifted = p + params.gamma - 3.0;
    if shifted <= 0.0 {
        return Err(ExponentError::Domain(format!(
            "p+gamma-3 = {shifted} must be positive"
        )));
    }
    let pg = p + params.gamma - 1.0;
    Ok((2.0 * pg / gap, 2.0 * (q - 1.0) * pg / shifted))
}

/// `q/s - (1/2 - 1/n)`, the shared denominator of `kappa_i` and `f_i`.
fn interpolation_denominator(q: f64, s: f64, n: u32) -> f64 {
    q / s - (0.5 - 1.0 / f64::from(n))
}

fn kappa_of(theta: f64, q: f64, s: f64, n: u32) -> f64 {
    (q / s - q / theta) / interpolation_denominator(q, s, n)
}

fn f_of(theta: f64, q: f64, s: f64, n: u32) -> f64 {
    (theta / s - 1.0) / interpolation_denominator(q, s, n)
}

pub fn kappa_f(query: &ExponentQuery, params: &ModelParams) -> Result<ExponentCheck, ExponentError> {
    let ExponentQuery { p, q, s } = *query;
    let denom = interpolation_denominator(q, s, params.n);
    if denom <= 0.0 {
        return Err(ExponentError::Domain(format!(
            "q/s - (1/2 - 1/n) = {denom} must be positive"
        )));
    }
    let (theta1, theta2) = theta_exponents(p, q, params)?;
    if theta1 == 0.0 || theta2 == 0.0 {
        return Err(ExponentError::Domain(
            "theta vanishes (q = 1); kappa undefined".into(),
        ));
    }
    let n = params.n;
    Ok(ExponentCheck {
        theta1,
        theta2,
        kappa1: kappa_of(theta1, q, s, n),
        kappa2: kappa_of(theta2, q, s, n),
        f1: f_of(theta1, q, s, n),
        f2: f_of(theta2, q, s, n),
    })
}

/// Result of testing the sufficient condition `theta > s`, `q > theta/2 - s/n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClaimOutcome {
    pub premises_hold: bool,
    pub kappa: f64,
    pub f: f64,
    pub kappa_in_01: bool,
    pub f_below_2: bool,
    /// `theta > s` agrees with `kappa > 0` on this tuple.
    pub theta_kappa_equiv: bool,
    /// `kappa < 1` agrees with `q > theta/2 - theta/n` on this tuple.
    pub kappa_one_equiv: bool,
}

impl ClaimOutcome {
    /// The implication premises => conclusion holds for this tuple.
    pub fn implication_holds(&self) -> bool {
        !self.premises_hold || (self.kappa_in_01 && self.f_below_2)
    }
}

pub fn claim_check(theta: f64, s: f64, q: f64, n: u32) -> ClaimOutcome {
    let nf = f64::from(n);
    let kappa = kappa_of(theta, q, s, n);
    let f = f_of(theta, q, s, n);
    let premises_hold = theta > s && q > theta / 2.0 - s / nf;
    ClaimOutcome {
        premises_hold,
        kappa,
        f,
        kappa_in_01: kappa > 0.0 && kappa < 1.0,
        f_below_2: f < 2.0,
        theta_kappa_equiv: (theta > s) == (kappa > 0.0),
        kappa_one_equiv: (kappa < 1.0) == (q > theta / 2.0 - theta / nf),
    }
}

/// Initial continuity offset for the sub-quadratic case: `s = (1 - delta) n/(n-1)`.
pub const SUBQUADRATIC_DELTA: f64 = 1e-3;
const MIN_DELTA: f64 = 1e-12;
const MAX_P_DOUBLINGS: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport {
    pub case: ExponentCase,
    pub p_floor: f64,
    pub p_witness: f64,
    pub q_lower: f64,
    pub q_upper: f64,
    pub q_witness: f64,
    pub s_effective: f64,
    /// Offset actually used for `s_effective` (0 in the quadratic case).
    pub delta: f64,
    pub checks: ExponentCheck,
    pub feasible: bool,
}

/// Lower bound on `p` beyond which an admissible `q` exists (`p_0` or `p̄_0`).
pub fn p_floor(params: &ModelParams, case: ExponentCase) -> f64 {
    let n = params.nf();
    let gap = params.coupling_gap();
    let gamma = params.gamma;
    let last = match case {
        ExponentCase::SubQuadratic => 3.0 * n * gap / (2.0 * (n - 1.0)) - (gamma - 1.0),
        ExponentCase::Quadratic => (2.0 * n + 2.0) * gap / n - (gamma - 1.0),
    };
    [1.0, 3.0 - gamma, 2.0 - params.chemotactic_load(), last]
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Admissible open `q` interval at a given `p`, evaluated at the formal index.
pub fn q_interval(params: &ModelParams, case: ExponentCase, p: f64) -> (f64, f64) {
    let n = params.nf();
    let gap = params.coupling_gap();
    let pg = p + params.gamma - 1.0;
    match case {
        ExponentCase::SubQuadratic => {
            let c = n / (2.0 * (n - 1.0));
            let lower = (c + 1.0).max(pg / gap - 1.0 / (n - 1.0));
            let upper = c * p + c * (params.gamma - 1.0) - 1.0 / (n - 1.0);
            (lower, upper)
        }
        ExponentCase::Quadratic => {
            let c = (n + 2.0) / (2.0 * n);
            let lower = 2.0_f64.max(pg / gap - 2.0 / n);
            let upper = c * p + c * (params.gamma - 1.0) - 2.0 / n;
            (lower, upper)
        }
    }
}

/// Constructs a witness `(p, q, s)` for which `kappa_i in (0,1)` and `f_i < 2`.
///
/// `p = p_floor + 1` (doubled while the `q` interval is empty), `q` is the
/// interval midpoint. In the sub-quadratic case the interval is built at
/// `s = n/(n-1)` and the checks are re-run at `(1 - delta) n/(n-1)`, starting
/// from [`SUBQUADRATIC_DELTA`] and halving `delta` until they pass.
pub fn feasible_pq(
    params: &ModelParams,
    case: ExponentCase,
) -> Result<FeasibilityReport, ExponentError> {
    params.validate()?;
    if params.n < 2 {
        return Err(ExponentError::Dimension(params.n));
    }
    let lhs = params.chemotactic_load();
    let threshold = case.threshold(params.gamma, params.n);
    if !(lhs < threshold) {
        return Err(ExponentError::Infeasible { lhs, threshold });
    }

    let floor = p_floor(params, case);
    let mut p = floor + 1.0;
    let p_limit = floor * f64::from(1u32 << MAX_P_DOUBLINGS);
    let (mut lower, mut upper) = q_interval(params, case, p);
    while lower >= upper && p * 2.0 <= p_limit {
        p *= 2.0;
        (lower, upper) = q_interval(params, case, p);
    }
    let interval_ok = lower < upper;
    let q = 0.5 * (lower + upper);

    let formal_s = case.formal_s(params.n);
    let (s_effective, delta, checks) = match case {
        ExponentCase::Quadratic => (formal_s, 0.0, kappa_f(&ExponentQuery::new(p, q, formal_s)?, params)?),
        ExponentCase::SubQuadratic => {
            let mut delta = SUBQUADRATIC_DELTA;
            loop {
                let s = (1.0 - delta) * formal_s;
                let checks = kappa_f(&ExponentQuery::new(p, q, s)?, params)?;
                if checks.all_pass() || delta * 0.5 < MIN_DELTA || !interval_ok {
                    break (s, delta, checks);
                }
                delta *= 0.5;
            }
        }
    };

    Ok(FeasibilityReport {
        case,
        p_floor: floor,
        p_witness: p,
        q_lower: lower,
        q_upper: upper,
        q_witness: q,
        s_effective,
        delta,
        checks,
        feasible: interval_ok && checks.all_pass(),
    })
}
