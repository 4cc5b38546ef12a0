#![allow(dead_code)]

use std::f64::consts::PI;

use ks_core::diagnostics::DiagnosticsConfig;
use ks_core::exponents::ModelParams;
use ks_core::grid::Grid;
use ks_core::kinetics::{Kinetics, Table};
use ks_core::stepper::{InitialData, InitialV, Profile, RunControls, SimConfig};

pub fn params(n: u32, alpha: f64, beta: f64, gamma: f64, a: f64, mu: f64) -> ModelParams {
    ModelParams::new(n, alpha, beta, gamma, a, mu, 1.0, 1.0).unwrap()
}

pub fn power_law(n: u32, alpha: f64, beta: f64, gamma: f64, a: f64, mu: f64) -> Kinetics {
    Kinetics::power_law(params(n, alpha, beta, gamma, a, mu), 0.0).unwrap()
}

/// `D = 1`, `S = 0`, `f = 0`.
pub fn pure_diffusion(n: u32) -> Kinetics {
    Kinetics::tabulated(params(n, 0.0, 0.0, 1.0, 0.0, 1.0), Table::pure_diffusion(1.0).unwrap()).unwrap()
}

pub fn gaussian(base: f64, peak: f64, width: f64) -> InitialData {
    InitialData {
        profile: Profile::Gaussian {
            base,
            peak,
            center: [0.3, 0.4],
            width,
        },
        v0: InitialV::Smooth,
    }
}

pub fn cosine(mean: f64, amplitude: f64) -> InitialData {
    InitialData {
        profile: Profile::Cosine {
            mean,
            amplitude,
            mode: 1,
        },
        v0: InitialV::Smooth,
    }
}

pub fn controls(t_end: f64, record_every: f64) -> RunControls {
    RunControls {
        t_end,
        record_every,
        ..RunControls::default()
    }
}

pub fn config(grid: Grid, kinetics: Kinetics, init: InitialData, controls: RunControls) -> SimConfig {
    SimConfig::new(grid, kinetics, init, controls, DiagnosticsConfig::default())
}

/// Manufactured fields on `[0, 1]` (and `[0, 1]^2`) with zero normal derivative.
pub fn mms_u(x: f64) -> f64 {
    1.0 + 0.5 * (PI * x).cos()
}

pub fn mms_v(x: f64) -> f64 {
    (PI * x).cos()
}

fn max_err(numeric: &[f64], exact: &[f64]) -> f64 {
    numeric
        .iter()
        .zip(exact)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Max-norm error of the discrete Laplacian of `cos(pi x) [cos(pi y)]`.
pub fn laplacian_error(dim: usize, cells: usize) -> f64 {
    let g = if dim == 1 {
        Grid::line(1.0, cells).unwrap()
    } else {
        Grid::rectangle(1.0, 1.0, cells, cells).unwrap()
    };
    let two_d = dim == 2;
    let f = g.sample(|x, y| mms_v(x) * if two_d { mms_v(y) } else { 1.0 });
    let scale = if two_d { 2.0 } else { 1.0 };
    let exact: Vec<f64> = f.iter().map(|v| -scale * PI * PI * v).collect();
    max_err(&g.laplacian_neumann(&f), &exact)
}

/// Max-norm error of `div((1+u)^{-alpha} grad u)` for `u = 1 + cos(pi x)/2`.
pub fn diffusive_error(cells: usize, alpha: f64) -> f64 {
    let g = Grid::line(1.0, cells).unwrap();
    let k = power_law(1, alpha, 1.0, 2.0, 0.0, 1.0);
    let u = g.sample(|x, _| mms_u(x));
    let exact: Vec<f64> = (0..g.len())
        .map(|i| {
            let x = g.center(i)[0];
            let u = mms_u(x);
            let du = -0.5 * PI * (PI * x).sin();
            let d2u = -0.5 * PI * PI * (PI * x).cos();
            let d = (1.0 + u).powf(-alpha);
            let dd = -alpha * (1.0 + u).powf(-alpha - 1.0);
            dd * du * du + d * d2u
        })
        .collect();
    max_err(&g.diffusive_divergence(&u, &k), &exact)
}

/// Max-norm error of `div(u (1+u)^{beta-1} grad v)` with `v = cos(pi x)`.
pub fn chemotactic_error(cells: usize, beta: f64) -> f64 {
    let g = Grid::line(1.0, cells).unwrap();
    let k = power_law(1, 0.0, beta, 2.0, 0.0, 1.0);
    let u = g.sample(|x, _| mms_u(x));
    let v = g.sample(|x, _| mms_v(x));
    let exact: Vec<f64> = (0..g.len())
        .map(|i| {
            let x = g.center(i)[0];
            let u = mms_u(x);
            let du = -0.5 * PI * (PI * x).sin();
            let dv = -PI * (PI * x).sin();
            let d2v = -PI * PI * (PI * x).cos();
            let s = u * (1.0 + u).powf(beta - 1.0);
            let ds = (1.0 + u).powf(beta - 1.0) + (beta - 1.0) * u * (1.0 + u).powf(beta - 2.0);
            ds * du * dv + s * d2v
        })
        .collect();
    max_err(&g.chemotactic_divergence(&u, &v, &k), &exact)
}

/// `err(n) / err(2n)` for each consecutive pair of `cells`.
pub fn ratios(cells: &[usize], err: impl Fn(usize) -> f64) -> Vec<f64> {
    let e: Vec<f64> = cells.iter().map(|&n| err(n)).collect();
    e.windows(2).map(|w| w[0] / w[1]).collect()
}
