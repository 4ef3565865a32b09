//! ε-continuation sweeps and the concentration verdict.
//!
//! As ε → 0 the levels `c_ε` approach `c₀` (the level for `V ≡ V₀`) and the
//! maxima `q_ε` of `|u_ε|` satisfy `V(ε q_ε) → max V`.

use serde::Serialize;
use thiserror::Error;

use crate::energy::Problem;
use crate::error::{Error, Result};
use crate::groundstate::{self, GroundState, SolverConfig};
use crate::model::Potential;
use crate::spectral::Field;

/// Location of the largest `|u|` on the grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Argmax {
    pub i: usize,
    pub j: usize,
    pub x: f64,
    pub y: f64,
    /// Signed sample `u(x, y)`.
    pub value: f64,
    /// Sub-grid location from 1D quadratic fits of `|u|` through the
    /// neighbours, when the node is a strict local maximum along an axis.
    pub refined: Option<[f64; 2]>,
}

/// Grid point maximizing `|u|`; ties go to the smallest `(j, i)`.
pub fn find_argmax(u: &Field) -> Result<Argmax> {
    if u.is_zero() {
        return Err(Error::ZeroField);
    }
    let grid = u.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut best = (0usize, 0usize, -1.0_f64);
    for j in 0..ny {
        for i in 0..nx {
            let a = u.at(i, j).abs();
            if a > best.2 {
                best = (i, j, a);
            }
        }
    }
    let (i, j, peak) = best;
    let fit = |m: f64, p: f64| {
        let curv = m - 2.0 * peak + p;
        (curv < 0.0).then(|| (0.5 * (m - p) / curv).clamp(-0.5, 0.5))
    };
    let ox = fit(u.at((i + nx - 1) % nx, j).abs(), u.at((i + 1) % nx, j).abs());
    let oy = fit(u.at(i, (j + ny - 1) % ny).abs(), u.at(i, (j + 1) % ny).abs());
    let refined = match (ox, oy) {
        (Some(ox), Some(oy)) => Some([grid.x(i) + ox * grid.dx(), grid.y(j) + oy * grid.dy()]),
        _ => None,
    };
    Ok(Argmax {
        i,
        j,
        x: grid.x(i),
        y: grid.y(j),
        value: u.at(i, j),
        refined,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub c_eps: f64,
    pub qx: f64,
    pub qy: f64,
    /// `V(ε q_ε)`.
    pub v_at_eps_q: f64,
    pub residual: f64,
    pub nehari_residual: f64,
    pub iterations: usize,
    /// `c_ε < c_∞`: the regime where a nontrivial ground state is guaranteed.
    pub below_c_inf: bool,
    /// The argmax stays away from the box boundary.
    pub interior: bool,
    /// For two-bump potentials, the bump whose scaled centre is nearest `ε q_ε`.
    pub peak: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub c0: f64,
    pub c_inf: f64,
    pub v0: f64,
    pub v_inf: f64,
    /// Full width at half maximum of `|u|` along x and y for the `V ≡ V₀` state.
    pub core_width: [f64; 2],
    /// Grid points across the narrower core width.
    pub core_points: f64,
    pub grid_adequate: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Error)]
#[error("sweep aborted: {source}")]
pub struct SweepError {
    pub partial: Box<SweepReport>,
    #[source]
    pub source: Error,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepOptions {
    /// Start each ε from the previous solution, recentred at the potential maximum.
    pub warm_start: bool,
    /// Points required across the solitary-wave core for the grid to count as adequate.
    pub min_core_points: f64,
    /// Fraction of the half box that the argmax must stay within.
    pub interior_fraction: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            warm_start: true,
            min_core_points: 8.0,
            interior_fraction: 0.8,
        }
    }
}

/// Full width at half maximum of `|u|` through the argmax along both axes.
pub fn core_width(u: &Field) -> Result<[f64; 2]> {
    let a = find_argmax(u)?;
    let grid = u.grid();
    let half = 0.5 * a.value.abs();
    let (nx, ny) = (grid.nx(), grid.ny());
    let span = |n: usize, at: &dyn Fn(usize) -> f64, center: usize| {
        let mut count = 1;
        for dir in [1, n - 1] {
            let mut k = 1;
            while k < n / 2 && at((center + dir * k) % n).abs() >= half {
                count += 1;
                k += 1;
            }
        }
        count as f64
    };
    let wx = span(nx, &|i| u.at(i, a.j), a.i) * grid.dx();
    let wy = span(ny, &|j| u.at(a.i, j), a.j) * grid.dy();
    Ok([wx, wy])
}

fn interior(problem: &Problem, a: &Argmax, fraction: f64) -> bool {
    let g = problem.grid();
    a.x.abs() <= fraction * 0.5 * g.lx() && a.y.abs() <= fraction * 0.5 * g.ly()
}

fn nearest_peak(potential: &Potential, z: [f64; 2]) -> Option<usize> {
    match potential {
        Potential::TwoBump { bumps, .. } => {
            let d = |k: usize| (bumps[k].center[0] - z[0]).hypot(bumps[k].center[1] - z[1]);
            Some(if d(0) <= d(1) { 0 } else { 1 })
        }
        _ => None,
    }
}

/// Shift `u` so its argmax lands on the node nearest `z*/ε` and project it
/// onto the Nehari manifold of `problem`.
fn recenter(problem: &Problem, u: &Field) -> Result<Field> {
    let grid = problem.grid();
    let a = find_argmax(u)?;
    let (zmax, _) = problem.potential().maximum();
    let (ti, tj) = grid.nearest_node(zmax[0] / problem.eps(), zmax[1] / problem.eps());
    let shifted = u.roll(ti as i64 - a.i as i64, tj as i64 - a.j as i64);
    Ok(problem.nehari_project(&shifted)?.projected)
}

fn row_from(problem: &Problem, gs: &GroundState, c_inf: f64, opts: &SweepOptions) -> SweepRow {
    let eps = problem.eps();
    let (qx, qy) = (gs.argmax.x, gs.argmax.y);
    SweepRow {
        eps,
        c_eps: gs.c,
        qx,
        qy,
        v_at_eps_q: problem.potential().value(eps * qx, eps * qy),
        residual: gs.residual,
        nehari_residual: gs.nehari_residual,
        iterations: gs.iterations,
        below_c_inf: gs.c < c_inf,
        interior: interior(problem, &gs.argmax, opts.interior_fraction),
        peak: nearest_peak(problem.potential(), [eps * qx, eps * qy]),
    }
}

/// Solves for every ε in the strictly decreasing `eps_list` with the
/// potential of `template`, plus the reference levels `c₀` and `c_∞`.
pub fn sweep(
    template: &Problem,
    eps_list: &[f64],
    cfg: &SolverConfig,
    opts: &SweepOptions,
) -> std::result::Result<SweepReport, SweepError> {
    sweep_with(template, eps_list, cfg, opts, |_, _| {})
}

/// [`sweep`], handing each converged row's problem and state to `visit`.
pub fn sweep_with(
    template: &Problem,
    eps_list: &[f64],
    cfg: &SolverConfig,
    opts: &SweepOptions,
    mut visit: impl FnMut(&Problem, &GroundState),
) -> std::result::Result<SweepReport, SweepError> {
    let potential = template.potential().clone();
    let v0 = potential.v0();
    let v_inf = potential.v_inf();
    let mut report = SweepReport {
        v0,
        v_inf,
        c0: f64::NAN,
        c_inf: f64::NAN,
        ..SweepReport::default()
    };
    macro_rules! bail {
        ($e:expr) => {
            return Err(SweepError {
                partial: Box::new(report),
                source: $e,
            })
        };
    }
    if eps_list.is_empty() {
        bail!(Error::InvalidArgument("eps_list is empty".into()));
    }
    if eps_list.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        bail!(Error::InvalidArgument("eps values must be positive".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        bail!(Error::InvalidArgument("eps_list must be strictly decreasing".into()));
    }
    if v0 <= v_inf {
        report
            .notes
            .push("no concentration regime: potential has V_inf >= V0".to_string());
    }

    let reference = |value: f64| -> Result<GroundState> {
        groundstate::solve(&template.with_potential(Potential::constant(value), 1.0)?, cfg)
    };
    let (ground0, ground_inf) = if v0 == v_inf {
        let g = reference(v0);
        let c = g.as_ref().map(|g| g.c).ok();
        (g, c.map(Ok))
    } else if v_inf > 0.0 {
        let (a, b) = rayon::join(|| reference(v0), || reference(v_inf).map(|g| g.c));
        (a, Some(b))
    } else {
        (reference(v0), None)
    };
    let ground0 = match ground0 {
        Ok(g) => g,
        Err(e) => bail!(e),
    };
    report.c0 = ground0.c;
    report.c_inf = match ground_inf {
        Some(Ok(c)) => c,
        Some(Err(e)) => bail!(e),
        // V_∞ = 0 has no nontrivial critical points
        None => f64::INFINITY,
    };
    match core_width(&ground0.u) {
        Ok(w) => {
            let g = template.grid();
            report.core_width = w;
            report.core_points = (w[0] / g.dx()).min(w[1] / g.dy());
            report.grid_adequate = report.core_points >= opts.min_core_points;
            if !report.grid_adequate {
                report.notes.push(format!(
                    "grid resolves the core with {:.1} points (< {})",
                    report.core_points, opts.min_core_points
                ));
            }
        }
        Err(e) => bail!(e),
    }

    let mut previous: Option<Field> = None;
    for &eps in eps_list {
        let problem = match template.with_potential(potential.clone(), eps) {
            Ok(p) => p,
            Err(e) => bail!(e),
        };
        let solved = match (&previous, opts.warm_start) {
            (Some(prev), true) => {
                recenter(&problem, prev).and_then(|init| groundstate::two_stage(&problem, cfg, &init))
            }
            _ => groundstate::solve(&problem, cfg),
        };
        let gs = match solved {
            Ok(gs) if gs.converged => gs,
            Ok(gs) => bail!(Error::NotConverged {
                iterations: gs.iterations,
                residual: gs.residual,
                state: Box::new(gs),
            }),
            Err(e) => bail!(e),
        };
        let row = row_from(&problem, &gs, report.c_inf, opts);
        if !row.interior {
            report
                .notes
                .push(format!("eps = {eps}: argmax near the box boundary, row invalid"));
        }
        report.rows.push(row);
        visit(&problem, &gs);
        previous = Some(gs.u);
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    /// `|c_{ε_min} − c₀| / c₀`.
    pub level_gap: f64,
    pub level_ok: bool,
    /// `(V₀ − V(ε_min q_{ε_min})) / V₀`.
    pub v_gap: f64,
    pub v_ok: bool,
    /// `(c_∞ − c_{ε_min}) / c_∞`; positive when the level is below `c_∞`.
    pub c_inf_margin: f64,
    pub below_c_inf_ok: bool,
    /// `V_∞ < V₀`; without it there is nothing to concentrate at.
    pub regime_ok: bool,
    pub passed: bool,
    pub notes: Vec<String>,
}

/// Concentration verdict at the smallest ε of the report.
pub fn check_concentration(r: &SweepReport, tol_level: f64, tol_v: f64) -> Verdict {
    let mut notes = r.notes.clone();
    let Some(last) = r.rows.last().filter(|_| r.rows.len() >= 3) else {
        notes.push(format!("need at least 3 rows, have {}", r.rows.len()));
        return Verdict {
            level_gap: f64::NAN,
            level_ok: false,
            v_gap: f64::NAN,
            v_ok: false,
            c_inf_margin: f64::NAN,
            below_c_inf_ok: false,
            regime_ok: r.v_inf < r.v0,
            passed: false,
            notes,
        };
    };
    let level_gap = (last.c_eps - r.c0).abs() / r.c0;
    let v_gap = (r.v0 - last.v_at_eps_q) / r.v0;
    let c_inf_margin = if r.c_inf.is_finite() {
        (r.c_inf - last.c_eps) / r.c_inf
    } else {
        1.0
    };
    let level_ok = level_gap <= tol_level;
    let v_ok = v_gap <= tol_v;
    let below_c_inf_ok = last.c_eps < r.c_inf;
    let regime_ok = r.v_inf < r.v0;
    if !regime_ok && !notes.iter().any(|n| n.starts_with("no concentration regime")) {
        notes.push("no concentration regime: potential has V_inf >= V0".into());
    }
    Verdict {
        level_gap,
        level_ok,
        v_gap,
        v_ok,
        c_inf_margin,
        below_c_inf_ok,
        regime_ok,
        passed: regime_ok && level_ok && v_ok && below_c_inf_ok,
        notes,
    }
}
