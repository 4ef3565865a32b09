//! Periodic grid, discrete Fourier transform and the anisotropic energy space.
//!
//! Normalization: the forward transform is the unnormalized sum
//! `F(k) = Σ_n f(n) e^{-2πi k·n/N}` and the inverse divides by `Nx·Ny`. With
//! this convention the trapezoid integral of a product on the box is
//!
//! ```text
//! ∫ u v dx dy = dx·dy Σ u v = (Lx·Ly)/(Nx·Ny)² · Σ_k û(k) conj(v̂(k)),
//! ```
//!
//! which is exact up to round-off; see [`Grid::parseval_weight`].
//!
//! Odd-order multipliers (`∂x`, `∂y`, `D_x⁻¹`, Φ₃ with its `−i`) zero the
//! Nyquist coefficient so that real fields map to real fields. Even symbols
//! (Φ₁, Φ₂, `∂x²`, the norm weight) keep it.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Relative tolerance on the `ξ₁ = 0` column for a field to count as an
/// x-derivative.
pub const TOL_MEAN: f64 = 1e-10;

#[derive(Clone)]
struct Plans {
    fwd_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

/// Periodic box `[-Lx/2, Lx/2) × [-Ly/2, Ly/2)` with `Nx × Ny` samples.
///
/// Samples are stored row-major with x as the fast axis: index `j·Nx + i`
/// holds the value at `(x_i, y_j)`.
#[derive(Clone)]
pub struct Grid {
    lx: f64,
    ly: f64,
    nx: usize,
    ny: usize,
    kx: Vec<f64>,
    ky: Vec<f64>,
    plans: Plans,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("lx", &self.lx)
            .field("ly", &self.ly)
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.lx == other.lx && self.ly == other.ly
    }
}

fn wavenumbers(n: usize, length: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let m = if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
            2.0 * PI * m / length
        })
        .collect()
}

impl Grid {
    pub fn new(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(lx.is_finite() && lx > 0.0) {
            return Err(Error::InvalidGrid(format!("Lx must be positive, got {lx}")));
        }
        if !(ly.is_finite() && ly > 0.0) {
            return Err(Error::InvalidGrid(format!("Ly must be positive, got {ly}")));
        }
        for (name, n) in [("Nx", nx), ("Ny", ny)] {
            if n < 4 {
                return Err(Error::InvalidGrid(format!("{name} must be at least 4, got {n}")));
            }
            if n % 2 != 0 {
                return Err(Error::InvalidGrid(format!("{name} must be even, got {n}")));
            }
        }
        let mut planner = FftPlanner::new();
        let plans = Plans {
            fwd_x: planner.plan_fft_forward(nx),
            fwd_y: planner.plan_fft_forward(ny),
            inv_x: planner.plan_fft_inverse(nx),
            inv_y: planner.plan_fft_inverse(ny),
        };
        Ok(Self {
            lx,
            ly,
            nx,
            ny,
            kx: wavenumbers(nx, lx),
            ky: wavenumbers(ny, ly),
            plans,
        })
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    /// Angular wavenumbers `2π·m/Lx` in FFT order `0, 1, …, N/2-1, -N/2, …, -1`.
    pub fn kx(&self) -> &[f64] {
        &self.kx
    }

    pub fn ky(&self) -> &[f64] {
        &self.ky
    }

    pub fn x(&self, i: usize) -> f64 {
        -0.5 * self.lx + i as f64 * self.dx()
    }

    pub fn y(&self, j: usize) -> f64 {
        -0.5 * self.ly + j as f64 * self.dy()
    }

    /// Weight turning `Σ_k û conj(v̂)` into the box integral of `u v`.
    pub fn parseval_weight(&self) -> f64 {
        let n = (self.nx * self.ny) as f64;
        self.lx * self.ly / (n * n)
    }

    pub fn nyquist_x(&self) -> usize {
        self.nx / 2
    }

    pub fn nyquist_y(&self) -> usize {
        self.ny / 2
    }

    /// Grid node closest to the point `(x, y)`, with periodic wrap.
    pub fn nearest_node(&self, x: f64, y: f64) -> (usize, usize) {
        let wrap = |v: f64, l: f64, d: f64, n: usize| {
            let s = ((v + 0.5 * l) / d).round() as i64;
            s.rem_euclid(n as i64) as usize
        };
        (
            wrap(x, self.lx, self.dx(), self.nx),
            wrap(y, self.ly, self.dy(), self.ny),
        )
    }

    fn fft2(&self, buf: &mut [Complex64], inverse: bool) {
        let (px, py) = if inverse {
            (&self.plans.inv_x, &self.plans.inv_y)
        } else {
            (&self.plans.fwd_x, &self.plans.fwd_y)
        };
        // rows are contiguous; rustfft processes consecutive chunks
        px.process(buf);
        let (nx, ny) = (self.nx, self.ny);
        let mut cols = vec![Complex64::new(0.0, 0.0); nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                cols[i * ny + j] = buf[j * nx + i];
            }
        }
        py.process(&mut cols);
        for i in 0..nx {
            for j in 0..ny {
                buf[j * nx + i] = cols[i * ny + j];
            }
        }
    }
}

fn ensure_same(a: &Grid, b: &Grid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Real samples of a candidate wave on a [`Grid`].
#[derive(Clone)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("grid", &*self.grid)
            .field("max_abs", &self.max_abs())
            .finish_non_exhaustive()
    }
}

impl Field {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    /// Samples `f(x_i, y_j)` at every node.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            let y = grid.y(j);
            for i in 0..grid.nx() {
                values.push(f(grid.x(i), y));
            }
        }
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.nx() + i]
    }

    pub fn forward(&self) -> SpectralField {
        let mut coeffs: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.grid.fft2(&mut coeffs, false);
        SpectralField {
            grid: Arc::clone(&self.grid),
            coeffs,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination `f(self, other)`.
    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        ensure_same(&self.grid, &other.grid)?;
        Ok(Field {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scaled(&self, alpha: f64) -> Field {
        self.map(|v| alpha * v)
    }

    /// `self + alpha·other`.
    pub fn axpy(&self, alpha: f64, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a + alpha * b)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Trapezoid quadrature over the periodic box.
    pub fn integrate(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    /// Quadrature of `u·v`.
    pub fn l2_dot(&self, other: &Field) -> Result<f64> {
        ensure_same(&self.grid, &other.grid)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(s * self.grid.cell_area())
    }

    /// Removes the mean of every horizontal line, i.e. zeroes the `ξ₁ = 0`
    /// Fourier column. The result is the closest x-derivative in L².
    pub fn project_admissible(&self) -> Field {
        let nx = self.grid.nx();
        let mut values = self.values.clone();
        for row in values.chunks_mut(nx) {
            let mean = row.iter().sum::<f64>() / nx as f64;
            row.iter_mut().for_each(|v| *v -= mean);
        }
        Field {
            grid: Arc::clone(&self.grid),
            values,
        }
    }

    /// Periodic shift by `(di, dj)` nodes: `out(i + di, j + dj) = self(i, j)`.
    pub fn roll(&self, di: i64, dj: i64) -> Field {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut values = vec![0.0; nx * ny];
        for j in 0..ny {
            let jj = (j as i64 + dj).rem_euclid(ny as i64) as usize;
            for i in 0..nx {
                let ii = (i as i64 + di).rem_euclid(nx as i64) as usize;
                values[jj * nx + ii] = self.values[j * nx + i];
            }
        }
        Field {
            grid: Arc::clone(&self.grid),
            values,
        }
    }
}

/// Fourier coefficients of a real field, same layout as [`Field`].
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Arc<Grid>,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn from_coeffs(grid: &Arc<Grid>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                actual: coeffs.len(),
            });
        }
        Ok(Self {
            grid: Arc::clone(grid),
            coeffs,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize, j: usize) -> Complex64 {
        self.coeffs[j * self.grid.nx() + i]
    }

    /// Inverse transform, keeping the real part.
    pub fn inverse(&self) -> Field {
        self.inverse_with_imag().0
    }

    /// Inverse transform plus the largest imaginary part that was discarded.
    pub fn inverse_with_imag(&self) -> (Field, f64) {
        let mut buf = self.coeffs.clone();
        self.grid.fft2(&mut buf, true);
        let scale = 1.0 / self.grid.len() as f64;
        let mut imag = 0.0_f64;
        let values = buf
            .iter()
            .map(|c| {
                imag = imag.max((c.im * scale).abs());
                c.re * scale
            })
            .collect();
        (
            Field {
                grid: Arc::clone(&self.grid),
                values,
            },
            imag,
        )
    }

    /// Pointwise multiplication by a real symbol `s(ξ₁, ξ₂)`.
    pub fn apply_symbol(&self, s: impl Fn(f64, f64) -> f64) -> SpectralField {
        self.apply_complex_symbol(|k1, k2| Complex64::new(s(k1, k2), 0.0))
    }

    pub fn apply_complex_symbol(&self, s: impl Fn(f64, f64) -> Complex64) -> SpectralField {
        let g = &self.grid;
        let nx = g.nx();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, &c)| c * s(g.kx()[idx % nx], g.ky()[idx / nx]))
            .collect();
        SpectralField {
            grid: Arc::clone(&self.grid),
            coeffs,
        }
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        ensure_same(&self.grid, &other.grid)?;
        Ok(SpectralField {
            grid: Arc::clone(&self.grid),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
        })
    }

    /// Size of the `ξ₁ = 0` column relative to the ℓ² norm of all coefficients.
    pub fn zero_column_ratio(&self) -> f64 {
        let total = self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if total == 0.0 {
            return 0.0;
        }
        let nx = self.grid.nx();
        let column = (0..self.grid.ny())
            .map(|j| self.coeffs[j * nx].norm_sqr())
            .sum::<f64>()
            .sqrt();
        column / total
    }

    /// Checks that the field is (numerically) an x-derivative.
    pub fn check_admissible(&self) -> Result<()> {
        let magnitude = self.zero_column_ratio();
        if magnitude > TOL_MEAN {
            Err(Error::NotAdmissible {
                magnitude,
                tolerance: TOL_MEAN,
            })
        } else {
            Ok(())
        }
    }
}

pub fn forward(f: &Field) -> SpectralField {
    f.forward()
}

pub fn inverse(f: &SpectralField) -> Field {
    f.inverse()
}

pub fn apply_symbol(f: &SpectralField, s: impl Fn(f64, f64) -> f64) -> SpectralField {
    f.apply_symbol(s)
}

#[inline]
fn anisotropic_denominator(xi1: f64, xi2: f64) -> f64 {
    let a = xi1 * xi1;
    a + xi2 * xi2 + a * a
}

/// Φ₁(ξ) = ξ₁² / (|ξ|² + ξ₁⁴), zero on the `ξ₁ = 0` axis.
pub fn phi1(xi1: f64, xi2: f64) -> f64 {
    if xi1 == 0.0 {
        return 0.0;
    }
    xi1 * xi1 / anisotropic_denominator(xi1, xi2)
}

/// Φ₂(ξ) = ξ₁⁴ / (|ξ|² + ξ₁⁴), zero on the `ξ₁ = 0` axis.
pub fn phi2(xi1: f64, xi2: f64) -> f64 {
    if xi1 == 0.0 {
        return 0.0;
    }
    let a = xi1 * xi1;
    a * a / anisotropic_denominator(xi1, xi2)
}

/// Φ₃(ξ) = ξ₁² ξ₂ / (|ξ|² + ξ₁⁴), zero on the `ξ₁ = 0` axis. Callers supply
/// the accompanying `−i` factor.
pub fn phi3(xi1: f64, xi2: f64) -> f64 {
    if xi1 == 0.0 {
        return 0.0;
    }
    xi1 * xi1 * xi2 / anisotropic_denominator(xi1, xi2)
}

/// Density of the energy inner product in Fourier space,
/// `ξ₁² + ξ₂²/ξ₁² + 1 = 1/Φ₁`; only the `uv` term survives at `ξ₁ = 0`.
pub fn x_weight(xi1: f64, xi2: f64) -> f64 {
    if xi1 == 0.0 {
        return 1.0;
    }
    1.0 + xi1 * xi1 + xi2 * xi2 / (xi1 * xi1)
}

/// Energy inner product of two spectral fields, without admissibility checks.
pub(crate) fn x_inner_spectral(u: &SpectralField, v: &SpectralField) -> f64 {
    let g = &u.grid;
    let nx = g.nx();
    let s: f64 = u
        .coeffs
        .iter()
        .zip(&v.coeffs)
        .enumerate()
        .map(|(idx, (a, b))| x_weight(g.kx()[idx % nx], g.ky()[idx / nx]) * (a * b.conj()).re)
        .sum();
    s * g.parseval_weight()
}

/// `(u, v) = ∫ u_x v_x + D_x⁻¹u_y D_x⁻¹v_y + u v`, evaluated spectrally.
pub fn x_inner(u: &Field, v: &Field) -> Result<f64> {
    ensure_same(&u.grid, &v.grid)?;
    let (uh, vh) = (u.forward(), v.forward());
    uh.check_admissible()?;
    vh.check_admissible()?;
    Ok(x_inner_spectral(&uh, &vh))
}

pub fn x_norm(u: &Field) -> Result<f64> {
    let uh = u.forward();
    uh.check_admissible()?;
    Ok(x_inner_spectral(&uh, &uh).max(0.0).sqrt())
}

fn first_derivative(f: &Field, along_x: bool) -> Field {
    let g = f.grid();
    let (nyq_x, nyq_y) = (g.kx()[g.nyquist_x()], g.ky()[g.nyquist_y()]);
    f.forward()
        .apply_complex_symbol(|k1, k2| {
            let k = if along_x { k1 } else { k2 };
            let nyq = if along_x { nyq_x } else { nyq_y };
            if k == nyq {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, k)
            }
        })
        .inverse()
}

/// Spectral `∂x`.
pub fn derivative_x(f: &Field) -> Field {
    first_derivative(f, true)
}

/// Spectral `∂y`.
pub fn derivative_y(f: &Field) -> Field {
    first_derivative(f, false)
}

/// Spectral `∂x²`.
pub fn derivative_xx(f: &Field) -> Field {
    f.forward().apply_symbol(|k1, _| -k1 * k1).inverse()
}

/// `D_x⁻¹`: division by `iξ₁` off the `ξ₁ = 0` column, which is set to zero.
pub fn x_antiderivative(f: &Field) -> Result<Field> {
    let fh = f.forward();
    fh.check_admissible()?;
    let g = f.grid();
    let nyq = g.kx()[g.nyquist_x()];
    Ok(fh
        .apply_complex_symbol(|k1, _| {
            if k1 == 0.0 || k1 == nyq {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, -1.0 / k1)
            }
        })
        .inverse())
}

/// The energy norm squared evaluated in real space from explicitly formed
/// `u_x` and `D_x⁻¹ u_y`. Differs from [`x_norm`]² only by Nyquist content.
pub fn x_norm_sq_real_space(u: &Field) -> Result<f64> {
    let ux = derivative_x(u);
    let w = x_antiderivative(&derivative_y(u))?;
    Ok(ux.l2_dot(&ux)? + w.l2_dot(&w)? + u.l2_dot(u)?)
}
