#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use gkp_core::{Field, Grid, Potential, PowerLaw, Problem};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn grid(l: f64, n: usize) -> Arc<Grid> {
    Arc::new(Grid::new(l, l, n, n).unwrap())
}

pub fn problem(l: f64, n: usize, p: f64, pot: Potential, eps: f64) -> Problem {
    Problem::new(grid(l, n), Arc::new(PowerLaw::new(p).unwrap()), pot, eps).unwrap()
}

pub fn random_field(g: &Arc<Grid>, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Field::from_values(g, vals).unwrap()
}

/// Random smooth admissible field: a few low modes with nonzero x wavenumber.
pub fn random_admissible(g: &Arc<Grid>, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            let m = rng.gen_range(1..4) as f64;
            let n = rng.gen_range(-3..4) as f64;
            (m, n, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI))
        })
        .collect();
    let (lx, ly) = (g.lx(), g.ly());
    Field::from_fn(g, |x, y| {
        modes
            .iter()
            .map(|&(m, n, a, ph)| a * (2.0 * PI * (m * x / lx + n * y / ly) + ph).cos())
            .sum()
    })
}

/// Signed wavenumber for index `k` of an `n`-point axis of length `l`.
fn wavenumber(k: usize, n: usize, l: f64) -> f64 {
    let m = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
    2.0 * PI * m / l
}

/// Direct O(N⁴) forward DFT, unnormalized, `e^{-2πi k·n/N}`.
pub fn dft(values: &[f64], nx: usize, ny: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); nx * ny];
    for ky in 0..ny {
        for kx in 0..nx {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..ny {
                for i in 0..nx {
                    let ph = -2.0 * PI * ((kx * i) as f64 / nx as f64 + (ky * j) as f64 / ny as f64);
                    acc += values[j * nx + i] * Complex64::from_polar(1.0, ph);
                }
            }
            out[ky * nx + kx] = acc;
        }
    }
    out
}

/// Direct inverse DFT, dividing by `nx·ny`.
pub fn idft(coeffs: &[Complex64], nx: usize, ny: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); nx * ny];
    let n = (nx * ny) as f64;
    for j in 0..ny {
        for i in 0..nx {
            let mut acc = Complex64::new(0.0, 0.0);
            for ky in 0..ny {
                for kx in 0..nx {
                    let ph = 2.0 * PI * ((kx * i) as f64 / nx as f64 + (ky * j) as f64 / ny as f64);
                    acc += coeffs[ky * nx + kx] * Complex64::from_polar(1.0, ph);
                }
            }
            out[j * nx + i] = acc / n;
        }
    }
    out
}

/// Multiplier applied through the direct DFT pair.
pub fn dft_multiply(g: &Grid, values: &[f64], s: impl Fn(f64, f64) -> Complex64) -> Vec<Complex64> {
    let (nx, ny) = (g.nx(), g.ny());
    let mut c = dft(values, nx, ny);
    for ky in 0..ny {
        for kx in 0..nx {
            c[ky * nx + kx] *= s(wavenumber(kx, nx, g.lx()), wavenumber(ky, ny, g.ly()));
        }
    }
    idft(&c, nx, ny)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
