//! Regularity and decay diagnostics for computed solutions.
//!
//! With `g = −V h(u)`, a solution satisfies `û = −Φ₁ ĝ`, hence
//! `u_xx = (Φ₂ ĝ)^∨` and `u_y = (Φ₃ · (−i ĝ))^∨`. Recovering the derivatives
//! through the multipliers and comparing them with direct spectral
//! differentiation checks that the computed state solves the equation, not
//! just the fixed-point map. On a periodic grid every norm is finite, so the
//! informative quantities are the spectral tail and the spatial decay.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use crate::concentration::find_argmax;
use crate::energy::Problem;
use crate::error::{Error, Result};
use crate::spectral::{
    derivative_x, derivative_xx, derivative_y, phi2, phi3, x_norm, x_norm_sq_real_space, x_weight, Field,
};

pub const LQ_EXPONENTS: [f64; 5] = [1.0, 2.0, 3.0, 4.0, 6.0];
/// Exponent used for derivative norms when `p = 3`.
pub const Q_PRIME_AT_P3: f64 = 1.4;

fn same_grid(a: &Field, b: &Field) -> Result<()> {
    if **a.grid() == **b.grid() {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// `g = −V h(u)`.
pub fn source_term(problem: &Problem, u: &Field) -> Field {
    problem.source(u).scaled(-1.0)
}

/// `u_xx` reconstructed as `(Φ₂ ĝ)^∨`.
pub fn recover_uxx(u: &Field, g: &Field) -> Result<Field> {
    same_grid(u, g)?;
    Ok(g.forward().apply_symbol(phi2).inverse())
}

/// `u_y` reconstructed as `(Φ₃ · (−i ĝ))^∨`, with the discarded imaginary
/// part of the inverse transform.
pub fn recover_uy_with_imag(u: &Field, g: &Field) -> Result<(Field, f64)> {
    same_grid(u, g)?;
    let grid = g.grid();
    let nyq = grid.ky()[grid.nyquist_y()];
    Ok(g
        .forward()
        .apply_complex_symbol(|k1, k2| {
            if k2 == nyq {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, -phi3(k1, k2))
            }
        })
        .inverse_with_imag())
}

pub fn recover_uy(u: &Field, g: &Field) -> Result<Field> {
    recover_uy_with_imag(u, g).map(|(f, _)| f)
}

/// `(Σ |u|^q dx dy)^{1/q}`.
pub fn lq_norm(u: &Field, q: f64) -> Result<f64> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::InvalidArgument(format!("Lq norm needs q >= 1, got {q}")));
    }
    let s: f64 = u.values().iter().map(|v| v.abs().powf(q)).sum();
    Ok((s * u.grid().cell_area()).powf(1.0 / q))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayRing {
    /// Outer radius of the square ring, in units of the shorter half box.
    pub radius: f64,
    pub max_abs: f64,
}

/// Largest `|u|` over `n_rings` concentric square rings around the argmax.
///
/// A node at periodic offset `(di, dj)` from the argmax has normalized
/// distance `s = max(|di|/(Nx/2), |dj|/(Ny/2)) ∈ [0, 1]`; ring `k` holds
/// `s ∈ (k/n, (k+1)/n]` (ring 0 also holds the centre). The last ring
/// contains the box boundary as seen from the argmax.
pub fn decay_profile(u: &Field, n_rings: usize) -> Result<Vec<DecayRing>> {
    if n_rings == 0 {
        return Err(Error::InvalidArgument("need at least one ring".into()));
    }
    let a = find_argmax(u)?;
    let grid = u.grid();
    let (nx, ny) = (grid.nx() as i64, grid.ny() as i64);
    let half = 0.5 * grid.lx().min(grid.ly());
    let mut maxima = vec![0.0_f64; n_rings];
    for j in 0..ny {
        let dj = (j - a.j as i64).rem_euclid(ny);
        let dj = dj.min(ny - dj) as f64 / (ny / 2) as f64;
        for i in 0..nx {
            let di = (i - a.i as i64).rem_euclid(nx);
            let di = di.min(nx - di) as f64 / (nx / 2) as f64;
            let s = di.max(dj);
            let ring = ((s * n_rings as f64).ceil() as usize).saturating_sub(1).min(n_rings - 1);
            let v = u.at(i as usize, j as usize).abs();
            maxima[ring] = maxima[ring].max(v);
        }
    }
    Ok(maxima
        .into_iter()
        .enumerate()
        .map(|(k, max_abs)| DecayRing {
            radius: (k + 1) as f64 / n_rings as f64 * half,
            max_abs,
        })
        .collect())
}

/// Fraction of the energy-norm content carried by modes with
/// `|ξ₁| > ξ₁,max/2` or `|ξ₂| > ξ₂,max/2`.
pub fn spectral_tail(u: &Field) -> f64 {
    let grid = u.grid();
    let uh = u.forward();
    let (kx_cut, ky_cut) = (
        0.5 * grid.kx()[grid.nyquist_x()].abs(),
        0.5 * grid.ky()[grid.nyquist_y()].abs(),
    );
    let nx = grid.nx();
    let (mut top, mut total) = (0.0, 0.0);
    for (idx, c) in uh.coeffs().iter().enumerate() {
        let (k1, k2) = (grid.kx()[idx % nx], grid.ky()[idx / nx]);
        let e = x_weight(k1, k2) * c.norm_sqr();
        total += e;
        if k1.abs() > kx_cut || k2.abs() > ky_cut {
            top += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        top / total
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DerivNorms {
    pub q_prime: f64,
    pub uxx: f64,
    pub uy: f64,
    pub ux: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegularityReport {
    pub p: Option<f64>,
    /// `‖u‖_{L^q}` keyed by `q`.
    pub lq_norms: BTreeMap<String, f64>,
    pub deriv_norms: DerivNorms,
    pub decay: Vec<DecayRing>,
    /// Last decay ring maximum over `max|u|`.
    pub boundary_ratio: f64,
    pub spectral_tail: f64,
    /// Relative L² mismatch of multiplier-recovered and directly
    /// differentiated `u_xx`.
    pub uxx_recovery_error: f64,
    pub uy_recovery_error: f64,
    pub uy_max_imag: f64,
    pub x_norm_sq: f64,
    /// Relative gap between the spectral and real-space energy norms.
    pub parseval_gap: f64,
}

fn rel_l2(a: &Field, b: &Field) -> Result<f64> {
    let d = a.axpy(-1.0, b)?;
    let den = b.l2_dot(b)?.sqrt();
    let num = d.l2_dot(&d)?.sqrt();
    Ok(if den == 0.0 { num } else { num / den })
}

/// Derivative-norm exponent `q' = 6/(p+1)`, or `override_q` when given; at
/// `p = 3` the default is [`Q_PRIME_AT_P3`].
pub fn q_prime(p: Option<f64>, override_q: Option<f64>) -> f64 {
    if let Some(q) = override_q {
        return q;
    }
    match p {
        Some(3.0) => Q_PRIME_AT_P3,
        Some(p) => 6.0 / (p + 1.0),
        None => 2.0,
    }
}

pub fn regularity_report(
    problem: &Problem,
    u: &Field,
    n_rings: usize,
    q_prime_override: Option<f64>,
) -> Result<RegularityReport> {
    let p = problem.nonlinearity().degree();
    let qp = q_prime(p, q_prime_override);
    let g = source_term(problem, u);

    let uxx_direct = derivative_xx(u);
    let uy_direct = derivative_y(u);
    let ux = derivative_x(u);
    let uxx = recover_uxx(u, &g)?;
    let (uy, uy_max_imag) = recover_uy_with_imag(u, &g)?;

    let mut lq_norms = BTreeMap::new();
    for q in LQ_EXPONENTS {
        lq_norms.insert(format!("{q}"), lq_norm(u, q)?);
    }
    let decay = decay_profile(u, n_rings)?;
    let peak = u.max_abs();
    let boundary_ratio = decay.last().map_or(0.0, |r| r.max_abs / peak);
    let x_norm_sq = x_norm(u)?.powi(2);
    let real = x_norm_sq_real_space(u)?;

    Ok(RegularityReport {
        p,
        lq_norms,
        deriv_norms: DerivNorms {
            q_prime: qp,
            uxx: lq_norm(&uxx_direct, qp)?,
            uy: lq_norm(&uy_direct, qp)?,
            ux: lq_norm(&ux, qp)?,
        },
        decay,
        boundary_ratio,
        spectral_tail: spectral_tail(u),
        uxx_recovery_error: rel_l2(&uxx, &uxx_direct)?,
        uy_recovery_error: rel_l2(&uy, &uy_direct)?,
        uy_max_imag,
        x_norm_sq,
        parseval_gap: (x_norm_sq - real).abs() / x_norm_sq.max(f64::MIN_POSITIVE),
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use super::*;
    use crate::spectral::{phi1, Grid};

    fn grid(l: f64, n: usize) -> Arc<Grid> {
        Arc::new(Grid::new(l, l, n, n).unwrap())
    }

    #[test]
    fn lq_norm_cases() {
        let g = grid(4.0, 8);
        let z = Field::zeros(&g);
        assert_eq!(lq_norm(&z, 2.0).unwrap(), 0.0);
        let mut spike = Field::zeros(&g);
        spike.values_mut()[9] = 1.0;
        let area = g.cell_area();
        for q in [1.0, 2.0, 3.5, 6.0] {
            assert!((lq_norm(&spike, q).unwrap() - area.powf(1.0 / q)).abs() < 1e-15);
        }
        assert!(lq_norm(&spike, 0.5).is_err());
        assert!(lq_norm(&spike, f64::NAN).is_err());
    }

    #[test]
    fn recovery_of_zero() {
        let g = grid(4.0, 8);
        let z = Field::zeros(&g);
        assert!(recover_uxx(&z, &z).unwrap().is_zero());
        assert!(recover_uy(&z, &z).unwrap().is_zero());
    }

    #[test]
    fn multiplier_identities_on_grid() {
        let g = Grid::new(40.0, 60.0, 64, 96).unwrap();
        for &k1 in g.kx() {
            for &k2 in g.ky() {
                if k1 == 0.0 {
                    continue;
                }
                let p1 = phi1(k1, k2);
                let w = 1.0 + k1 * k1 + k2 * k2 / (k1 * k1);
                assert!((p1 * w - 1.0).abs() < 1e-14);
                assert!((phi2(k1, k2) - k1 * k1 * p1).abs() <= 1e-14 * phi2(k1, k2).max(1.0));
                assert!((phi3(k1, k2) - k2 * p1).abs() <= 1e-14 * phi3(k1, k2).abs().max(1.0));
            }
        }
    }

    #[test]
    fn decay_of_compact_bump() {
        let g = grid(20.0, 40);
        let u = Field::from_fn(&g, |x, y| {
            let r2 = x * x + y * y;
            if r2 < 4.0 {
                (4.0 - r2).powi(2)
            } else {
                0.0
            }
        });
        let rings = decay_profile(&u, 5).unwrap();
        assert_eq!(rings.len(), 5);
        assert!(rings[0].max_abs > 0.0);
        assert!(rings[2..].iter().all(|r| r.max_abs == 0.0));
        assert!((rings[4].radius - 10.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_tail_of_band_limited_field() {
        let g = grid(2.0 * PI, 32);
        let low = Field::from_fn(&g, |x, y| x.sin() * y.cos());
        assert!(spectral_tail(&low) < 1e-25);
        let high = Field::from_fn(&g, |x, _| (12.0 * x).sin());
        assert!((spectral_tail(&high) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn q_prime_rules() {
        assert_eq!(q_prime(Some(2.0), None), 2.0);
        assert_eq!(q_prime(Some(3.0), None), Q_PRIME_AT_P3);
        assert_eq!(q_prime(Some(3.0), Some(1.2)), 1.2);
    }
}
