//! Nonlinearities `h` and potentials `V`, with numerical validators for the
//! structural hypotheses the existence and concentration theory relies on.

use std::fmt::Debug;

use serde::Serialize;

/// A nonlinearity `h` with primitive `H(t) = ∫₀ᵗ h`.
///
/// Implementors outside the crate are validated numerically with [`check_h`].
pub trait Nonlinearity: Debug + Send + Sync {
    fn h(&self, t: f64) -> f64;
    fn h_prime(&self, t: f64) -> f64;
    fn h_second(&self, t: f64) -> f64;
    /// The primitive `H(t)`.
    fn primitive(&self, t: f64) -> f64;
    /// Ambrosetti–Rabinowitz exponent θ > 2 with `θ H(t) ≤ h(t) t`.
    fn theta(&self) -> f64;
    /// `Some(p)` when `h(λt) = λ^{p+1} h(t)` for all `λ > 0`.
    fn degree(&self) -> Option<f64> {
        None
    }
}

/// `h(t) = |t|^p t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerLaw {
    p: f64,
}

impl PowerLaw {
    /// Accepts `p ∈ (0, 4)`; only `p ∈ (1, 4)` comes with regularity.
    pub fn new(p: f64) -> Option<Self> {
        (p.is_finite() && p > 0.0 && p < 4.0).then_some(Self { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Whether `p` lies in the range where solutions are known to be regular.
    pub fn has_regularity(&self) -> bool {
        self.p > 1.0 && self.p < 4.0
    }
}

impl Nonlinearity for PowerLaw {
    fn h(&self, t: f64) -> f64 {
        t.abs().powf(self.p) * t
    }

    fn h_prime(&self, t: f64) -> f64 {
        (self.p + 1.0) * t.abs().powf(self.p)
    }

    // p ≤ 1 at t = 0: the limit does not exist (p < 1) or is ±2 (p = 1); 0 by convention
    fn h_second(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        self.p * (self.p + 1.0) * t.abs().powf(self.p - 1.0) * t.signum()
    }

    fn primitive(&self, t: f64) -> f64 {
        t.abs().powf(self.p + 2.0) / (self.p + 2.0)
    }

    fn theta(&self) -> f64 {
        self.p + 2.0
    }

    fn degree(&self) -> Option<f64> {
        Some(self.p)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct HCheckReport {
    /// `min (h(t)t − θH(t)) / |h(t)t|` over the samples; ≥ 0 (up to round-off) passes.
    pub ar_margin: f64,
    pub ar_pass: bool,
    /// Smallest increment of `h(t)/|t|` between consecutive sorted samples.
    pub monotone_margin: f64,
    pub monotone_pass: bool,
    pub passed: bool,
}

/// Checks `0 < θH(t) ≤ h(t)t` and strict growth of `h(t)/|t|` on the
/// nonzero samples. Failures are reported, never raised.
pub fn check_h(n: &dyn Nonlinearity, sample_ts: &[f64]) -> HCheckReport {
    let theta = n.theta();
    let mut ts: Vec<f64> = sample_ts.iter().copied().filter(|t| *t != 0.0 && t.is_finite()).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();

    let mut ar_margin = f64::INFINITY;
    let mut ar_pass = theta > 2.0;
    for &t in &ts {
        let ht = n.h(t) * t;
        let big_h = theta * n.primitive(t);
        let scale = ht.abs().max(f64::MIN_POSITIVE);
        let margin = (ht - big_h) / scale;
        ar_margin = ar_margin.min(margin);
        if !(big_h > 0.0) || margin < -1e-12 {
            ar_pass = false;
        }
    }

    let mut monotone_margin = f64::INFINITY;
    for w in ts.windows(2) {
        let a = n.h(w[0]) / w[0].abs();
        let b = n.h(w[1]) / w[1].abs();
        monotone_margin = monotone_margin.min(b - a);
    }
    let monotone_pass = monotone_margin > 0.0;
    if ts.is_empty() {
        ar_pass = false;
    }
    HCheckReport {
        ar_margin,
        ar_pass,
        monotone_margin,
        monotone_pass,
        passed: ar_pass && monotone_pass,
    }
}

/// Gaussian `a·exp(−|z − z₀|²/σ²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Gaussian {
    pub height: f64,
    pub sigma: f64,
    pub center: [f64; 2],
}

impl Gaussian {
    fn value(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.center[0], y - self.center[1]);
        self.height * (-(dx * dx + dy * dy) / (self.sigma * self.sigma)).exp()
    }

    fn grad(&self, x: f64, y: f64) -> [f64; 2] {
        let s2 = self.sigma * self.sigma;
        let (dx, dy) = (x - self.center[0], y - self.center[1]);
        let g = self.value(x, y);
        [-2.0 * dx / s2 * g, -2.0 * dy / s2 * g]
    }

    fn hessian(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let s2 = self.sigma * self.sigma;
        let (dx, dy) = (x - self.center[0], y - self.center[1]);
        let g = self.value(x, y);
        let xx = (4.0 * dx * dx / (s2 * s2) - 2.0 / s2) * g;
        let yy = (4.0 * dy * dy / (s2 * s2) - 2.0 / s2) * g;
        let xy = 4.0 * dx * dy / (s2 * s2) * g;
        [[xx, xy], [xy, yy]]
    }
}

/// Analytic potential models.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Potential {
    Constant { value: f64 },
    Bump { base: f64, bump: Gaussian },
    TwoBump { base: f64, bumps: [Gaussian; 2] },
}

impl Potential {
    pub fn constant(value: f64) -> Self {
        Potential::Constant { value }
    }

    pub fn bump(base: f64, height: f64, sigma: f64, center: [f64; 2]) -> Self {
        Potential::Bump {
            base,
            bump: Gaussian { height, sigma, center },
        }
    }

    pub fn two_bump(base: f64, first: Gaussian, second: Gaussian) -> Self {
        Potential::TwoBump {
            base,
            bumps: [first, second],
        }
    }

    fn gaussians(&self) -> &[Gaussian] {
        match self {
            Potential::Constant { .. } => &[],
            Potential::Bump { bump, .. } => std::slice::from_ref(bump),
            Potential::TwoBump { bumps, .. } => bumps,
        }
    }

    fn base(&self) -> f64 {
        match *self {
            Potential::Constant { value } => value,
            Potential::Bump { base, .. } | Potential::TwoBump { base, .. } => base,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Potential::Constant { .. })
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.base() + self.gaussians().iter().map(|g| g.value(x, y)).sum::<f64>()
    }

    pub fn grad(&self, x: f64, y: f64) -> [f64; 2] {
        self.gaussians().iter().fold([0.0, 0.0], |acc, g| {
            let d = g.grad(x, y);
            [acc[0] + d[0], acc[1] + d[1]]
        })
    }

    pub fn hessian(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        self.gaussians().iter().fold([[0.0; 2]; 2], |acc, g| {
            let d = g.hessian(x, y);
            [
                [acc[0][0] + d[0][0], acc[0][1] + d[0][1]],
                [acc[1][0] + d[1][0], acc[1][1] + d[1][1]],
            ]
        })
    }

    /// `lim V` at infinity.
    pub fn v_inf(&self) -> f64 {
        self.base()
    }

    /// A maximizer of `V` and the maximum `V₀`. For two bumps the maximizer
    /// is found by Newton ascent from each center.
    pub fn maximum(&self) -> ([f64; 2], f64) {
        match self {
            Potential::Constant { value } => ([0.0, 0.0], *value),
            Potential::Bump { base, bump } => {
                if bump.height > 0.0 {
                    (bump.center, base + bump.height)
                } else {
                    // supremum approached at infinity
                    (bump.center, *base)
                }
            }
            Potential::TwoBump { base, bumps } => {
                let mut best = (bumps[0].center, f64::NEG_INFINITY);
                for g in bumps.iter().filter(|g| g.height > 0.0) {
                    let z = self.newton_ascent(g.center);
                    let v = self.value(z[0], z[1]);
                    if v > best.1 {
                        best = (z, v);
                    }
                }
                if best.1 < *base {
                    best = (bumps[0].center, *base);
                }
                best
            }
        }
    }

    fn newton_ascent(&self, start: [f64; 2]) -> [f64; 2] {
        let mut z = start;
        for _ in 0..50 {
            let g = self.grad(z[0], z[1]);
            let h = self.hessian(z[0], z[1]);
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            // only take Newton steps where the Hessian is negative definite
            if !(h[0][0] < 0.0 && det > 0.0) {
                break;
            }
            let step = [
                (h[1][1] * g[0] - h[0][1] * g[1]) / det,
                (-h[1][0] * g[0] + h[0][0] * g[1]) / det,
            ];
            z = [z[0] - step[0], z[1] - step[1]];
            if step[0].hypot(step[1]) < 1e-14 {
                break;
            }
        }
        z
    }

    pub fn v0(&self) -> f64 {
        self.maximum().1
    }

    /// Closed-form upper bounds on `(sup|V|, sup|∇V|, sup‖D²V‖)`.
    pub fn derivative_bounds(&self) -> [f64; 3] {
        let mut b = [self.base().abs(), 0.0, 0.0];
        for g in self.gaussians() {
            let a = g.height.abs();
            b[0] += a;
            b[1] += a * std::f64::consts::SQRT_2 / g.sigma * (-0.5_f64).exp();
            b[2] += 2.0 * a / (g.sigma * g.sigma);
        }
        b
    }

    /// Rough length scale of the potential, used to size sampling lattices.
    fn extent(&self) -> ([f64; 2], f64) {
        let gs = self.gaussians();
        if gs.is_empty() {
            return ([0.0, 0.0], 1.0);
        }
        let cx = gs.iter().map(|g| g.center[0]).sum::<f64>() / gs.len() as f64;
        let cy = gs.iter().map(|g| g.center[1]).sum::<f64>() / gs.len() as f64;
        let r = gs
            .iter()
            .map(|g| (g.center[0] - cx).hypot(g.center[1] - cy) + 4.0 * g.sigma)
            .fold(0.0, f64::max);
        ([cx, cy], r)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VCheckReport {
    pub v0: f64,
    pub v_inf: f64,
    /// `V_∞ < V₀`.
    pub concentration_pass: bool,
    /// Smallest value on the sample lattice.
    pub min_sampled: f64,
    pub nonnegative_pass: bool,
    pub bounds: [f64; 3],
    pub flags: Vec<String>,
    pub passed: bool,
}

/// Reports `V₀`, `V_∞`, checks `V_∞ < V₀` and `V ≥ 0` on a sample lattice.
pub fn check_v(p: &Potential) -> VCheckReport {
    let v0 = p.v0();
    let v_inf = p.v_inf();
    let mut flags = Vec::new();
    let concentration_pass = v_inf < v0;
    if !concentration_pass {
        flags.push("no concentration regime: V_inf >= V0".to_string());
    }
    let (center, r) = p.extent();
    let n = 201;
    let mut min_sampled = f64::INFINITY;
    for j in 0..n {
        for i in 0..n {
            let x = center[0] - r + 2.0 * r * i as f64 / (n - 1) as f64;
            let y = center[1] - r + 2.0 * r * j as f64 / (n - 1) as f64;
            min_sampled = min_sampled.min(p.value(x, y));
        }
    }
    min_sampled = min_sampled.min(v_inf);
    let nonnegative_pass = min_sampled >= 0.0;
    if !nonnegative_pass {
        flags.push(format!("V takes negative values (min sampled {min_sampled:.6})"));
    }
    VCheckReport {
        v0,
        v_inf,
        concentration_pass,
        min_sampled,
        nonnegative_pass,
        bounds: p.derivative_bounds(),
        flags,
        passed: concentration_pass && nonnegative_pass,
    }
}
