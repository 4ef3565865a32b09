//! The energy functional
//!
//! ```text
//! I_ε(u) = ½‖u‖² − ∫ V(εx, εy) H(u) dx dy
//! ```
//!
//! on the discrete energy space, with its derivative pairing, Riesz gradient
//! and the projection of a ray onto the Nehari manifold `I'_ε(u)u = 0`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{Nonlinearity, Potential};
use crate::spectral::{phi1, x_inner_spectral, Field, Grid, SpectralField};

/// Tolerance on `|I'(t*u)(t*u)| / ‖t*u‖²` for a Nehari projection.
pub const NEHARI_TOL: f64 = 1e-12;
const BRACKET: (f64, f64) = (1e-8, 1e8);

/// A fixed problem instance: grid, `h`, `V` and the scaling ε.
#[derive(Clone, Debug)]
pub struct Problem {
    grid: Arc<Grid>,
    nonlinearity: Arc<dyn Nonlinearity>,
    potential: Potential,
    eps: f64,
    sampled: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct NehariResult {
    pub t_star: f64,
    pub projected: Field,
    pub pairing_residual: f64,
}

impl Problem {
    pub fn new(
        grid: Arc<Grid>,
        nonlinearity: Arc<dyn Nonlinearity>,
        potential: Potential,
        eps: f64,
    ) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
        }
        let sampled = Field::from_fn(&grid, |x, y| potential.value(eps * x, eps * y)).into_values();
        Ok(Self {
            grid,
            nonlinearity,
            potential,
            eps,
            sampled,
        })
    }

    /// Same grid and nonlinearity with a different potential or ε.
    pub fn with_potential(&self, potential: Potential, eps: f64) -> Result<Self> {
        Self::new(Arc::clone(&self.grid), Arc::clone(&self.nonlinearity), potential, eps)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn nonlinearity(&self) -> &dyn Nonlinearity {
        self.nonlinearity.as_ref()
    }

    pub fn nonlinearity_arc(&self) -> &Arc<dyn Nonlinearity> {
        &self.nonlinearity
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `V(εx_i, εy_j)` at every node.
    pub fn sampled_potential(&self) -> &[f64] {
        &self.sampled
    }

    fn check_grid(&self, u: &Field) -> Result<()> {
        if **u.grid() == *self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `V·h(u)` sampled on the grid.
    pub fn source(&self, u: &Field) -> Field {
        let h = &self.nonlinearity;
        let vals = u
            .values()
            .iter()
            .zip(&self.sampled)
            .map(|(&t, &v)| v * h.h(t))
            .collect();
        Field::from_values(&self.grid, vals).expect("grid-sized finite field")
    }

    /// `∫ V H(u)`.
    pub fn potential_energy(&self, u: &Field) -> f64 {
        let h = &self.nonlinearity;
        let s: f64 = u
            .values()
            .iter()
            .zip(&self.sampled)
            .map(|(&t, &v)| v * h.primitive(t))
            .sum();
        s * self.grid.cell_area()
    }

    /// `∫ V h(u) v`.
    pub fn potential_pairing(&self, u: &Field, v: &Field) -> f64 {
        let h = &self.nonlinearity;
        let s: f64 = u
            .values()
            .iter()
            .zip(v.values())
            .zip(&self.sampled)
            .map(|((&a, &b), &w)| w * h.h(a) * b)
            .sum();
        s * self.grid.cell_area()
    }

    fn admissible_spectrum(&self, u: &Field) -> Result<SpectralField> {
        self.check_grid(u)?;
        let uh = u.forward();
        uh.check_admissible()?;
        Ok(uh)
    }

    pub fn energy(&self, u: &Field) -> Result<f64> {
        let uh = self.admissible_spectrum(u)?;
        Ok(0.5 * x_inner_spectral(&uh, &uh) - self.potential_energy(u))
    }

    /// `I'_ε(u) v = (u, v) − ∫ V h(u) v`.
    pub fn pairing(&self, u: &Field, v: &Field) -> Result<f64> {
        let uh = self.admissible_spectrum(u)?;
        let vh = self.admissible_spectrum(v)?;
        Ok(x_inner_spectral(&uh, &vh) - self.potential_pairing(u, v))
    }

    /// Spectrum of `K[Vh(u)] = (Φ₁ · F[V h(u)])^∨`.
    pub(crate) fn fixed_point_spectrum(&self, u: &Field) -> SpectralField {
        self.source(u).forward().apply_symbol(phi1)
    }

    /// `K[Vh(u)]`, the Riesz representative of `v ↦ ∫ V h(u) v`.
    pub fn fixed_point_map(&self, u: &Field) -> Result<Field> {
        self.admissible_spectrum(u)?;
        Ok(self.fixed_point_spectrum(u).inverse())
    }

    /// Riesz representative of `I'_ε(u)`: `u − K[Vh(u)]`.
    pub fn gradient(&self, u: &Field) -> Result<Field> {
        let k = self.fixed_point_map(u)?;
        u.axpy(-1.0, &k)
    }

    /// Scales `u` onto the Nehari manifold along its ray.
    pub fn nehari_project(&self, u: &Field) -> Result<NehariResult> {
        let uh = self.admissible_spectrum(u)?;
        if u.is_zero() {
            return Err(Error::ZeroField);
        }
        let norm2 = x_inner_spectral(&uh, &uh);
        let denom = self.potential_pairing(u, u);
        if !(denom > 0.0) {
            return Err(Error::NoNehariCrossing(format!(
                "∫ V h(u) u = {denom:.3e} is not positive"
            )));
        }
        let t_star = match self.nonlinearity.degree() {
            Some(p) => (norm2 / denom).powf(1.0 / p),
            None => self.nehari_scalar_solve(u, norm2)?,
        };
        let projected = u.scaled(t_star);
        let pairing_residual = (t_star * t_star * norm2 - self.potential_pairing(&projected, &projected)).abs();
        Ok(NehariResult {
            t_star,
            projected,
            pairing_residual,
        })
    }

    // Root of φ(t) = ‖u‖² − ∫ V h(tu) u / t, increasing-to-decreasing by (h₄).
    fn nehari_scalar_solve(&self, u: &Field, norm2: f64) -> Result<f64> {
        let h = &self.nonlinearity;
        let area = self.grid.cell_area();
        let phi = |t: f64| {
            let s: f64 = u
                .values()
                .iter()
                .zip(&self.sampled)
                .map(|(&a, &w)| w * h.h(t * a) * a)
                .sum();
            norm2 - s * area / t
        };
        let dphi = |t: f64| {
            let s: f64 = u
                .values()
                .iter()
                .zip(&self.sampled)
                .map(|(&a, &w)| w * (h.h_prime(t * a) * a * a * t - h.h(t * a) * a))
                .sum();
            -s * area / (t * t)
        };
        let (mut lo, mut hi) = BRACKET;
        if !(phi(lo) > 0.0 && phi(hi) < 0.0) {
            return Err(Error::NoNehariCrossing(format!(
                "no sign change of the ray pairing on [{lo:e}, {hi:e}]"
            )));
        }
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if phi(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi / lo - 1.0 < 1e-6 {
                break;
            }
        }
        let mut t = (lo * hi).sqrt();
        for _ in 0..20 {
            let f = phi(t);
            if f.abs() <= NEHARI_TOL * norm2 {
                break;
            }
            let d = dphi(t);
            if d == 0.0 {
                break;
            }
            let next = t - f / d;
            t = if next > lo * 0.5 && next < hi * 2.0 { next } else { break };
        }
        Ok(t)
    }

    /// `I_ε(t*u)`, the value of the ray maximum.
    pub fn nehari_value(&self, u: &Field) -> Result<f64> {
        let r = self.nehari_project(u)?;
        self.energy(&r.projected)
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::model::PowerLaw;
    use crate::spectral::x_inner;

    fn problem(l: f64, n: usize, p: f64, pot: Potential, eps: f64) -> Problem {
        let g = Arc::new(Grid::new(l, l, n, n).unwrap());
        Problem::new(g, Arc::new(PowerLaw::new(p).unwrap()), pot, eps).unwrap()
    }

    fn random_admissible(g: &Arc<Grid>, rng: &mut ChaCha8Rng) -> Field {
        Field::from_values(g, (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap()
            .project_admissible()
    }

    #[test]
    fn energy_of_sine() {
        let pb = problem(2.0 * PI, 32, 2.0, Potential::constant(1.0), 1.0);
        let u = Field::from_fn(pb.grid(), |x, _| x.sin());
        let e = pb.energy(&u).unwrap();
        let expected = 2.0 * PI * PI - 3.0 * PI * PI / 8.0;
        assert!((e - expected).abs() < 1e-11, "{e} vs {expected}");
        assert_eq!(pb.energy(&Field::zeros(pb.grid())).unwrap(), 0.0);
    }

    #[test]
    fn pairing_unwound_for_constant_potential() {
        let pb = problem(2.0 * PI, 32, 2.0, Potential::constant(1.0), 1.0);
        let u = Field::from_fn(pb.grid(), |x, y| x.sin() + 0.3 * (2.0 * x + y).cos());
        let direct = x_norm_sq(&u) - u.map(|t| t.abs().powi(4)).integrate();
        assert!((pb.pairing(&u, &u).unwrap() - direct).abs() < 1e-10);
        let z = Field::zeros(pb.grid());
        assert_eq!(pb.pairing(&z, &u).unwrap(), 0.0);
    }

    fn x_norm_sq(u: &Field) -> f64 {
        x_inner(u, u).unwrap()
    }

    #[test]
    fn gradient_of_zero_is_zero() {
        let pb = problem(10.0, 16, 1.0, Potential::bump(1.0, 1.0, 1.0, [0.0, 0.0]), 1.0);
        assert!(pb.gradient(&Field::zeros(pb.grid())).unwrap().is_zero());
    }

    #[test]
    fn riesz_identity_and_finite_differences() {
        let pb = problem(12.0, 16, 1.5, Potential::bump(1.0, 1.0, 2.0, [0.0, 0.0]), 0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = random_admissible(pb.grid(), &mut rng);
        let grad = pb.gradient(&u).unwrap();
        for _ in 0..10 {
            let v = random_admissible(pb.grid(), &mut rng);
            let lhs = x_inner(&grad, &v).unwrap();
            let rhs = pb.pairing(&u, &v).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0), "{lhs} {rhs}");

            let d = 1e-5;
            let ep = pb.energy(&u.axpy(d, &v).unwrap()).unwrap();
            let em = pb.energy(&u.axpy(-d, &v).unwrap()).unwrap();
            let fd = (ep - em) / (2.0 * d);
            assert!((fd - rhs).abs() < 1e-6 * rhs.abs(), "{fd} {rhs}");
        }
    }

    #[test]
    fn nehari_closed_form() {
        // ‖u‖² = 2, ∫V|u|⁴ = 1 with p = 2 gives t* = √2
        let pb = problem(2.0 * PI, 16, 2.0, Potential::constant(1.0), 1.0);
        let u = Field::from_fn(pb.grid(), |x, _| x.sin());
        let norm2 = x_norm_sq(&u);
        let quartic = u.map(|t| t.powi(4)).integrate();
        // rescale potential so the two integrals are 2 and 1
        let a = (2.0 / norm2).sqrt();
        let v = quartic * a.powi(4);
        let pb = pb.with_potential(Potential::constant(1.0 / v), 1.0).unwrap();
        let r = pb.nehari_project(&u.scaled(a)).unwrap();
        assert!((r.t_star - 2.0_f64.sqrt()).abs() < 1e-12);

        let again = pb.nehari_project(&r.projected).unwrap();
        assert!((again.t_star - 1.0).abs() < 1e-10);

        let p = 2.0;
        let nv = pb.energy(&r.projected).unwrap();
        let expected = (0.5 - 1.0 / (p + 2.0)) * r.t_star.powi(2) * 2.0;
        assert!((nv - expected).abs() < 1e-12);
    }

    #[test]
    fn nehari_rejects_nonpositive_denominator() {
        let pb = problem(2.0 * PI, 16, 2.0, Potential::constant(0.0), 1.0);
        let u = Field::from_fn(pb.grid(), |x, _| x.sin());
        assert!(matches!(pb.nehari_project(&u), Err(Error::NoNehariCrossing(_))));
        assert!(matches!(pb.nehari_project(&Field::zeros(pb.grid())), Err(Error::ZeroField)));
    }

    #[derive(Debug)]
    struct Saturating;

    // h(t) = t³ + t|t|, satisfies (h₃) with θ = 3 and (h₄); not homogeneous
    impl Nonlinearity for Saturating {
        fn h(&self, t: f64) -> f64 {
            t * t * t + t * t.abs()
        }
        fn h_prime(&self, t: f64) -> f64 {
            3.0 * t * t + 2.0 * t.abs()
        }
        fn h_second(&self, t: f64) -> f64 {
            6.0 * t + 2.0 * t.signum()
        }
        fn primitive(&self, t: f64) -> f64 {
            t.powi(4) / 4.0 + t.abs().powi(3) / 3.0
        }
        fn theta(&self) -> f64 {
            3.0
        }
    }

    #[test]
    fn nehari_bisection_for_general_h() {
        let g = Arc::new(Grid::new(10.0, 10.0, 16, 16).unwrap());
        let pb = Problem::new(g, Arc::new(Saturating), Potential::bump(1.0, 1.0, 2.0, [0.0, 0.0]), 1.0).unwrap();
        let u = Field::from_fn(pb.grid(), |x, y| (-(x * x + y * y) / 4.0).exp()).project_admissible();
        let r = pb.nehari_project(&u).unwrap();
        let n2 = x_norm_sq(&r.projected);
        assert!(r.pairing_residual <= NEHARI_TOL * n2 * 10.0, "{}", r.pairing_residual / n2);
        assert!(pb.pairing(&r.projected, &r.projected).unwrap().abs() < 1e-10 * n2);
    }

    #[test]
    fn ray_is_unimodal_with_max_at_t_star() {
        let pb = problem(16.0, 32, 1.0, Potential::bump(1.0, 1.0, 2.0, [0.0, 0.0]), 1.0);
        let u = Field::from_fn(pb.grid(), |x, y| (-(x * x + y * y) / 3.0).exp()).project_admissible();
        let t_star = pb.nehari_project(&u).unwrap().t_star;
        let ts: Vec<f64> = (1..400).map(|k| t_star * k as f64 / 200.0).collect();
        let es: Vec<f64> = ts.iter().map(|&t| pb.energy(&u.scaled(t)).unwrap()).collect();
        let imax = es
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(imax, 199);
        assert!(es[..=imax].windows(2).all(|w| w[1] > w[0]));
        assert!(es[imax..].windows(2).all(|w| w[1] < w[0]));
        // mountain-pass geometry along the ray
        assert!(es[0] > 0.0);
        assert!(pb.energy(&u.scaled(50.0 * t_star)).unwrap() < 0.0);
    }

    #[test]
    fn larger_potential_lowers_nehari_value() {
        let pb = problem(16.0, 32, 2.0, Potential::bump(1.0, 1.0, 2.0, [0.0, 0.0]), 1.0);
        let u = Field::from_fn(pb.grid(), |x, y| (-(x * x + y * y) / 3.0).exp()).project_admissible();
        let lower = pb.nehari_value(&u).unwrap();
        let raised = pb
            .with_potential(Potential::bump(1.1, 1.0, 2.0, [0.0, 0.0]), 1.0)
            .unwrap()
            .nehari_value(&u)
            .unwrap();
        assert!(raised <= lower);
    }
}
