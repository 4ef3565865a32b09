//! Run configuration, read from TOML.
//!
//! Every key is optional; missing keys take the defaults of
//! [`RunConfig::default`]. Errors always name the offending key.

use std::fmt;
use std::path::{Path, PathBuf};

use gkp_core::model::Gaussian;
use gkp_core::{Potential, SeedKind, SolverConfig};
use serde::Serialize;
use toml::{Table, Value};

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.key.is_empty() {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "config key `{}`: {}", self.key, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(key: &str, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        key: key.to_string(),
        message: message.into(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridConfig {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelConfig {
    pub p: f64,
    pub eps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverSection {
    pub gamma: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub seeds: usize,
    pub step: f64,
    pub seed_width: f64,
    pub perturbation: f64,
    pub seed_kind: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSection {
    pub eps_list: Option<Vec<f64>>,
    pub tol_level: f64,
    pub tol_v: f64,
    pub min_core_points: f64,
    pub warm_start: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub model: ModelConfig,
    pub potential: Potential,
    pub solver: SolverSection,
    pub sweep: SweepSection,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            grid: GridConfig {
                lx: 40.0,
                ly: 40.0,
                nx: 128,
                ny: 128,
            },
            model: ModelConfig { p: 1.0, eps: 1.0 },
            potential: Potential::bump(1.0, 1.0, 2.0, [0.0, 0.0]),
            solver: SolverSection {
                gamma: None,
                tol: s.tol_residual,
                max_iter: s.max_iter,
                seeds: s.seeds,
                step: s.descent_step,
                seed_width: s.seed_width,
                perturbation: s.perturbation,
                seed_kind: "gaussian".into(),
            },
            sweep: SweepSection {
                eps_list: None,
                tol_level: 0.1,
                tol_v: 0.05,
                min_core_points: 8.0,
                warm_start: true,
            },
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            gamma: self.solver.gamma,
            tol_residual: self.solver.tol,
            max_iter: self.solver.max_iter,
            descent_step: self.solver.step,
            seed_kind: if self.solver.seed_kind == "dx_gaussian" {
                SeedKind::DxGaussian
            } else {
                SeedKind::Gaussian
            },
            seed_width: self.solver.seed_width,
            seeds: self.solver.seeds,
            perturbation: self.solver.perturbation,
            rng_seed: self.seed,
            odd_x: self.solver.seed_kind == "dx_gaussian",
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).or_else(|e| err("", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let table: Table = match text.parse() {
            Ok(t) => t,
            Err(e) => return err("", format!("malformed TOML: {}", e.message())),
        };
        let mut r = Reader::new(table);
        let mut cfg = RunConfig::default();

        if let Some(g) = r.section("grid")? {
            let mut g = Reader::scoped(g, "grid");
            cfg.grid.lx = g.positive("Lx")?.unwrap_or(cfg.grid.lx);
            cfg.grid.ly = g.positive("Ly")?.unwrap_or(cfg.grid.ly);
            cfg.grid.nx = g.grid_count("Nx")?.unwrap_or(cfg.grid.nx);
            cfg.grid.ny = g.grid_count("Ny")?.unwrap_or(cfg.grid.ny);
            g.finish()?;
        }

        if let Some(m) = r.section("model")? {
            let mut m = Reader::scoped(m, "model");
            if let Some(p) = m.float("p")? {
                if !(p > 0.0 && p < 4.0) {
                    return err("model.p", format!("must lie in (0, 4), got {p}"));
                }
                cfg.model.p = p;
            }
            cfg.model.eps = m.positive("eps")?.unwrap_or(cfg.model.eps);
            m.finish()?;
        }

        if let Some(p) = r.section("potential")? {
            cfg.potential = parse_potential(Reader::scoped(p, "potential"))?;
        }

        if let Some(s) = r.section("solver")? {
            let mut s = Reader::scoped(s, "solver");
            if let Some(g) = s.float("gamma")? {
                if !(g > 1.0) {
                    return err("solver.gamma", format!("must exceed 1, got {g}"));
                }
                cfg.solver.gamma = Some(g);
            }
            cfg.solver.tol = s.positive("tol")?.unwrap_or(cfg.solver.tol);
            cfg.solver.max_iter = s.count("max_iter", 1)?.unwrap_or(cfg.solver.max_iter);
            cfg.solver.seeds = s.count("seeds", 1)?.unwrap_or(cfg.solver.seeds);
            cfg.solver.step = s.positive("step")?.unwrap_or(cfg.solver.step);
            cfg.solver.seed_width = s.positive("seed_width")?.unwrap_or(cfg.solver.seed_width);
            if let Some(a) = s.float("perturbation")? {
                if a < 0.0 {
                    return err("solver.perturbation", format!("must be nonnegative, got {a}"));
                }
                cfg.solver.perturbation = a;
            }
            if let Some(k) = s.string("seed_kind")? {
                if k != "gaussian" && k != "dx_gaussian" {
                    return err("solver.seed_kind", format!("expected \"gaussian\" or \"dx_gaussian\", got {k:?}"));
                }
                cfg.solver.seed_kind = k;
            }
            s.finish()?;
        }

        if let Some(s) = r.section("sweep")? {
            let mut s = Reader::scoped(s, "sweep");
            if let Some(list) = s.float_list("eps_list")? {
                if list.is_empty() {
                    return err("sweep.eps_list", "must not be empty");
                }
                if let Some(e) = list.iter().find(|e| !(**e > 0.0)) {
                    return err("sweep.eps_list", format!("entries must be positive, got {e}"));
                }
                if list.windows(2).any(|w| w[1] >= w[0]) {
                    return err("sweep.eps_list", "must be strictly decreasing");
                }
                cfg.sweep.eps_list = Some(list);
            }
            cfg.sweep.tol_level = s.positive("tol_level")?.unwrap_or(cfg.sweep.tol_level);
            cfg.sweep.tol_v = s.positive("tol_v")?.unwrap_or(cfg.sweep.tol_v);
            cfg.sweep.min_core_points = s.positive("min_core_points")?.unwrap_or(cfg.sweep.min_core_points);
            cfg.sweep.warm_start = s.boolean("warm_start")?.unwrap_or(cfg.sweep.warm_start);
            s.finish()?;
        }

        if let Some(o) = r.section("output")? {
            let mut o = Reader::scoped(o, "output");
            if let Some(d) = o.string("dir")? {
                if d.is_empty() {
                    return err("output.dir", "must not be empty");
                }
                cfg.output_dir = PathBuf::from(d);
            }
            o.finish()?;
        }

        if let Some(v) = r.take("seed") {
            match v {
                Value::Integer(i) if i >= 0 => cfg.seed = i as u64,
                other => return err("seed", format!("expected a nonnegative integer, got {}", describe(&other))),
            }
        }
        r.finish()?;
        Ok(cfg)
    }
}

fn parse_potential(mut p: Reader) -> Result<Potential, ConfigError> {
    let kind = p.string("type")?.unwrap_or_else(|| "bump".into());
    let base = p.float("base")?;
    if let Some(b) = base {
        if b < 0.0 {
            return err("potential.base", format!("must be nonnegative, got {b}"));
        }
    }
    let pot = match kind.as_str() {
        "constant" => {
            let value = match p.float("value")? {
                Some(v) => Some(v),
                None => base,
            }
            .unwrap_or(1.0);
            if value < 0.0 {
                return err("potential.value", format!("must be nonnegative, got {value}"));
            }
            Potential::constant(value)
        }
        "bump" => {
            let height = p.float("height")?.unwrap_or(1.0);
            let sigma = p.positive("sigma")?.unwrap_or(2.0);
            let center = p.point("center")?.unwrap_or([0.0, 0.0]);
            Potential::bump(base.unwrap_or(1.0), height, sigma, center)
        }
        "two_bump" => {
            let height = p.float("height")?.unwrap_or(1.0);
            let height2 = p.float("height2")?.unwrap_or(height);
            let sigma = p.positive("sigma")?.unwrap_or(2.0);
            let sigma2 = p.positive("sigma2")?.unwrap_or(sigma);
            let Some(center) = p.point("center")? else {
                return err("potential.center", "required for two_bump");
            };
            let Some(center2) = p.point("center2")? else {
                return err("potential.center2", "required for two_bump");
            };
            Potential::two_bump(
                base.unwrap_or(1.0),
                Gaussian { height, sigma, center },
                Gaussian {
                    height: height2,
                    sigma: sigma2,
                    center: center2,
                },
            )
        }
        other => {
            return err(
                "potential.type",
                format!("expected \"constant\", \"bump\" or \"two_bump\", got {other:?}"),
            )
        }
    };
    p.finish()?;
    Ok(pot)
}

fn describe(v: &Value) -> String {
    match v {
        Value::String(s) => format!("string {s:?}"),
        Value::Integer(i) => format!("integer {i}"),
        Value::Float(f) => format!("float {f}"),
        Value::Boolean(b) => format!("boolean {b}"),
        Value::Datetime(_) => "a datetime".into(),
        Value::Array(_) => "an array".into(),
        Value::Table(_) => "a table".into(),
    }
}

/// Takes keys out of a table so that leftovers can be reported as unknown.
struct Reader {
    table: Table,
    prefix: String,
}

impl Reader {
    fn new(table: Table) -> Self {
        Self {
            table,
            prefix: String::new(),
        }
    }

    fn scoped(table: Table, prefix: &str) -> Self {
        Self {
            table,
            prefix: format!("{prefix}."),
        }
    }

    fn key(&self, name: &str) -> String {
        format!("{}{name}", self.prefix)
    }

    fn take(&mut self, name: &str) -> Option<Value> {
        self.table.remove(name)
    }

    fn section(&mut self, name: &str) -> Result<Option<Table>, ConfigError> {
        match self.take(name) {
            None => Ok(None),
            Some(Value::Table(t)) => Ok(Some(t)),
            Some(other) => err(&self.key(name), format!("expected a table, got {}", describe(&other))),
        }
    }

    fn float(&mut self, name: &str) -> Result<Option<f64>, ConfigError> {
        let v = match self.take(name) {
            None => return Ok(None),
            Some(Value::Float(f)) => f,
            Some(Value::Integer(i)) => i as f64,
            Some(other) => return err(&self.key(name), format!("expected a number, got {}", describe(&other))),
        };
        if !v.is_finite() {
            return err(&self.key(name), format!("must be finite, got {v}"));
        }
        Ok(Some(v))
    }

    fn positive(&mut self, name: &str) -> Result<Option<f64>, ConfigError> {
        match self.float(name)? {
            Some(v) if v <= 0.0 => err(&self.key(name), format!("must be positive, got {v}")),
            v => Ok(v),
        }
    }

    fn count(&mut self, name: &str, min: i64) -> Result<Option<usize>, ConfigError> {
        match self.take(name) {
            None => Ok(None),
            Some(Value::Integer(i)) if i >= min && i <= u32::MAX as i64 => Ok(Some(i as usize)),
            Some(Value::Integer(i)) => err(&self.key(name), format!("must be an integer in [{min}, {}], got {i}", u32::MAX)),
            Some(other) => err(&self.key(name), format!("expected an integer, got {}", describe(&other))),
        }
    }

    fn grid_count(&mut self, name: &str) -> Result<Option<usize>, ConfigError> {
        match self.count(name, 4) {
            Ok(Some(n)) if n % 2 != 0 => err(&self.key(name), format!("must be even, got {n}")),
            Err(ConfigError { key, .. }) => err(&key, "must be an even integer >= 4"),
            other => other,
        }
    }

    fn string(&mut self, name: &str) -> Result<Option<String>, ConfigError> {
        match self.take(name) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(other) => err(&self.key(name), format!("expected a string, got {}", describe(&other))),
        }
    }

    fn boolean(&mut self, name: &str) -> Result<Option<bool>, ConfigError> {
        match self.take(name) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(b)),
            Some(other) => err(&self.key(name), format!("expected a boolean, got {}", describe(&other))),
        }
    }

    fn float_list(&mut self, name: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let key = self.key(name);
        match self.take(name) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .into_iter()
                .enumerate()
                .map(|(k, v)| match v {
                    Value::Float(f) if f.is_finite() => Ok(f),
                    Value::Integer(i) => Ok(i as f64),
                    other => err(&format!("{key}[{k}]"), format!("expected a finite number, got {}", describe(&other))),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(other) => err(&key, format!("expected an array of numbers, got {}", describe(&other))),
        }
    }

    fn point(&mut self, name: &str) -> Result<Option<[f64; 2]>, ConfigError> {
        match self.float_list(name)? {
            None => Ok(None),
            Some(v) if v.len() == 2 => Ok(Some([v[0], v[1]])),
            Some(v) => err(&self.key(name), format!("expected [x, y], got {} entries", v.len())),
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.table.keys().next() {
            None => Ok(()),
            Some(k) => err(&self.key(k), "unknown key"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(text: &str) -> String {
        RunConfig::parse(text).unwrap_err().key
    }

    #[test]
    fn empty_config_uses_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn full_config() {
        let c = RunConfig::parse(
            r#"
            seed = 7
            [grid]
            Lx = 60
            Ly = 50.0
            Nx = 192
            Ny = 160
            [model]
            p = 1.5
            eps = 0.5
            [potential]
            type = "two_bump"
            base = 0.5
            height = 1.0
            sigma = 1.5
            center = [-3, 0]
            center2 = [3, 0]
            [solver]
            gamma = 1.8
            tol = 1e-9
            max_iter = 500
            seeds = 2
            step = 0.25
            [sweep]
            eps_list = [1, 0.5, 0.25]
            [output]
            dir = "runs/a"
            "#,
        )
        .unwrap();
        assert_eq!(c.grid, GridConfig { lx: 60.0, ly: 50.0, nx: 192, ny: 160 });
        assert_eq!(c.model, ModelConfig { p: 1.5, eps: 0.5 });
        assert_eq!(c.potential.v_inf(), 0.5);
        assert_eq!(c.solver.gamma, Some(1.8));
        assert_eq!(c.sweep.eps_list, Some(vec![1.0, 0.5, 0.25]));
        assert_eq!(c.output_dir, PathBuf::from("runs/a"));
        let s = c.solver_config();
        assert_eq!((s.rng_seed, s.seeds, s.max_iter), (7, 2, 500));
    }

    #[test]
    fn errors_name_their_key() {
        assert_eq!(key_of("[grid]\nNx = 127"), "grid.Nx");
        assert_eq!(key_of("[grid]\nNy = 2"), "grid.Ny");
        assert_eq!(key_of("[grid]\nLx = -1"), "grid.Lx");
        assert_eq!(key_of("[grid]\nLx = \"big\""), "grid.Lx");
        assert_eq!(key_of("[grid]\nNz = 8"), "grid.Nz");
        assert_eq!(key_of("[model]\np = 4.5"), "model.p");
        assert_eq!(key_of("[model]\neps = 0"), "model.eps");
        assert_eq!(key_of("[potential]\ntype = \"ring\""), "potential.type");
        assert_eq!(key_of("[potential]\ntype = \"two_bump\"\ncenter = [0, 0]"), "potential.center2");
        assert_eq!(key_of("[potential]\ncenter = [0]"), "potential.center");
        assert_eq!(key_of("[solver]\ngamma = 0.5"), "solver.gamma");
        assert_eq!(key_of("[solver]\nmax_iter = 0"), "solver.max_iter");
        assert_eq!(key_of("[sweep]\neps_list = [0.5, 1]"), "sweep.eps_list");
        assert_eq!(key_of("[sweep]\neps_list = [1, \"a\"]"), "sweep.eps_list[1]");
        assert_eq!(key_of("seed = -1"), "seed");
        assert_eq!(key_of("grid = 3"), "grid");
        assert_eq!(key_of("colour = 3"), "colour");
    }

    #[test]
    fn malformed_toml_is_a_diagnostic() {
        let e = RunConfig::parse("[grid\nNx = ").unwrap_err();
        assert!(e.key.is_empty());
        assert!(e.to_string().starts_with("config: malformed TOML"));
    }

    #[test]
    fn constant_potential_reads_value() {
        let c = RunConfig::parse("[potential]\ntype = \"constant\"\nvalue = 2.5").unwrap();
        assert_eq!(c.potential, Potential::constant(2.5));
    }
}
