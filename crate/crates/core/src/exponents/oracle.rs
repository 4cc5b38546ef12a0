//! Lattice scan of `(p, q)` that evaluates `theta_i`, `kappa_i`, `f_i` straight
//! from their definitions.
//!
//! Nothing here calls into the parent module's exponent functions; only the
//! window bound `p_floor` is borrowed, and it does not affect any verdict.

use super::{p_floor, ExponentCase, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleGrid {
    /// Lattice spacing in `p`; lattice points are `1 + k * p_step`.
    pub p_step: f64,
    /// Lattice spacing in `q`; lattice points are `1 + j * q_step`.
    pub q_step: f64,
    /// The scan covers `p <= p_floor + p_span`.
    pub p_span: f64,
}

impl Default for OracleGrid {
    fn default() -> Self {
        Self {
            p_step: 0.25,
            q_step: 0.01,
            p_span: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub case: ExponentCase,
    /// Lebesgue index the scan was run at.
    pub s: f64,
    pub p_max: f64,
    /// Lattice points at which all four conditions hold.
    pub passing: Vec<(f64, f64)>,
    pub scanned: usize,
    params: ModelParams,
}

impl OracleReport {
    pub fn is_empty(&self) -> bool {
        self.passing.is_empty()
    }

    /// Direct membership test at an arbitrary `(p, q)`, off-lattice included.
    pub fn passes(&self, p: f64, q: f64) -> bool {
        passes_at(&self.params, p, q, self.s)
    }

    /// Lattice membership, matching coordinates to within half a lattice step.
    pub fn contains_lattice_point(&self, p: f64, q: f64, grid: &OracleGrid) -> bool {
        self.passing
            .iter()
            .any(|&(pp, qq)| (pp - p).abs() < 0.5 * grid.p_step && (qq - q).abs() < 0.5 * grid.q_step)
    }

    /// Passing `q` values at lattice row `p` (exact lattice coordinate).
    pub fn row(&self, p: f64) -> Vec<f64> {
        self.passing
            .iter()
            .filter(|&&(pp, _)| pp == p)
            .map(|&(_, q)| q)
            .collect()
    }
}

/// All four conditions from the raw definitions, at index `s`.
fn passes_at(params: &ModelParams, p: f64, q: f64, s: f64) -> bool {
    let n = f64::from(params.n);
    let alpha = params.alpha;
    let beta = params.beta;
    let gamma = params.gamma;

    let gap = gamma + 1.0 - alpha - 2.0 * beta;
    let shift = p + gamma - 3.0;
    if gap <= 0.0 || shift <= 0.0 {
        return false;
    }
    let denom = q / s - (0.5 - 1.0 / n);
    if denom <= 0.0 {
        return false;
    }
    let theta1 = 2.0 * (p + gamma - 1.0) / gap;
    let theta2 = 2.0 * (q - 1.0) * (p + gamma - 1.0) / shift;
    [theta1, theta2].into_iter().all(|theta| {
        if theta == 0.0 {
            return false;
        }
        let kappa = (q / s - q / theta) / denom;
        let f = (theta / s - 1.0) / denom;
        kappa > 0.0 && kappa < 1.0 && f < 2.0
    })
}

/// Scans `p in [1, p_floor + p_span]`, `q in [1, p + gamma]`.
///
/// The `q` window uses only the a priori bound `q < p + gamma - 1` that the
/// second condition implies for every `s <= 2`, `n >= 2`.
pub fn brute_force_feasibility(
    params: &ModelParams,
    case: ExponentCase,
    grid: &OracleGrid,
) -> OracleReport {
    let n = params.n;
    let s = if n >= 2 { case.formal_s(n) } else { f64::INFINITY };
    let p_max = p_floor(params, case) + grid.p_span;
    let mut passing = Vec::new();
    let mut scanned = 0usize;
    if n >= 2 && p_max.is_finite() {
        let p_count = ((p_max - 1.0) / grid.p_step).floor() as usize;
        for k in 0..=p_count {
            let p = 1.0 + k as f64 * grid.p_step;
            let q_max = p + params.gamma;
            let q_count = ((q_max - 1.0) / grid.q_step).floor() as usize;
            for j in 0..=q_count {
                let q = 1.0 + j as f64 * grid.q_step;
                scanned += 1;
                if passes_at(params, p, q, s) {
                    passing.push((p, q));
                }
            }
        }
    }
    OracleReport {
        case,
        s,
        p_max,
        passing,
        scanned,
        params: *params,
    }
}
