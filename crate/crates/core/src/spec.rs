//! Polynomial families and their on-disk description.
//!
//! A family is either the graph of a polynomial map `G: ℝⁿ → ℝˢ`
//! (`W = {(x, G(x))}`) or the zero set of one polynomial `F(x, y)` in
//! `ℝⁿ × ℝˢ`. Fibers are the sets `W_y ⊂ ℝⁿ` over parameter values `y`.
//! The file format is documented in `docs/spec-format.md`.

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::poly::{parse_polynomial, var_names, Polynomial};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyKind {
    MapGraph,
    HypersurfaceFamily,
}

impl FamilyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FamilyKind::MapGraph => "map-graph",
            FamilyKind::HypersurfaceFamily => "hypersurface-family",
        }
    }
}

/// Geometric radius schedule `r0, r0·f, …, r0·f^(steps-1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadiusSchedule {
    pub r0: f64,
    pub factor: f64,
    pub steps: usize,
}

impl RadiusSchedule {
    pub const MAX_RADIUS: f64 = 1e9;

    pub fn new(r0: f64, factor: f64, steps: usize) -> Result<Self> {
        let s = Self { r0, factor, steps };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r0 > 0.0 && self.r0.is_finite()) {
            return Err(Error::Spec("schedule r0 must be positive".into()));
        }
        if !(self.factor > 1.0 && self.factor.is_finite()) {
            return Err(Error::Spec("schedule factor must exceed 1".into()));
        }
        if self.steps < 3 {
            return Err(Error::Spec("schedule needs at least 3 radii".into()));
        }
        if self.max_radius() > Self::MAX_RADIUS {
            return Err(Error::Spec("final schedule radius exceeds 1e9".into()));
        }
        Ok(())
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.steps).map(|j| self.r0 * self.factor.powi(j as i32)).collect()
    }

    pub fn max_radius(&self) -> f64 {
        self.r0 * self.factor.powi(self.steps as i32 - 1)
    }

    /// The same schedule with `extra` more radii appended.
    pub fn extended(&self, extra: usize) -> Self {
        Self {
            steps: self.steps + extra,
            ..*self
        }
    }

    /// Parses `r0:factor:steps`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Spec(format!("schedule '{text}' is not r0:factor:steps")));
        }
        let bad = |_| Error::Spec(format!("schedule '{text}' has a malformed field"));
        Self::new(
            parts[0].trim().parse().map_err(bad)?,
            parts[1].trim().parse().map_err(bad)?,
            parts[2]
                .trim()
                .parse()
                .map_err(|_| Error::Spec(format!("bad steps in '{text}'")))?,
        )
    }
}

impl Default for RadiusSchedule {
    /// `R = 4·2^j`, `j = 0..6`.
    fn default() -> Self {
        Self {
            r0: 4.0,
            factor: 2.0,
            steps: 7,
        }
    }
}

/// Uniform grid over one parameter axis, endpoints included.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl GridAxis {
    pub fn values(&self) -> Vec<f64> {
        if self.steps <= 1 {
            return vec![self.min];
        }
        let m = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| self.min + (self.max - self.min) * i as f64 / m)
            .collect()
    }

    pub fn cell(&self) -> f64 {
        if self.steps <= 1 {
            0.0
        } else {
            (self.max - self.min) / (self.steps - 1) as f64
        }
    }

    /// Parses `min:max:steps`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        let err = || Error::Spec(format!("grid '{text}' is not min:max:steps"));
        if parts.len() != 3 {
            return Err(err());
        }
        let g = Self {
            min: parts[0].trim().parse().map_err(|_| err())?,
            max: parts[1].trim().parse().map_err(|_| err())?,
            steps: parts[2].trim().parse().map_err(|_| err())?,
        };
        if g.max.partial_cmp(&g.min).is_none_or(|o| o.is_lt()) || g.steps == 0 {
            return Err(err());
        }
        Ok(g)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sampling {
    pub planes: usize,
    pub mesh_level: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            planes: 200,
            mesh_level: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    pub n: usize,
    pub s: usize,
    /// Map-graph: `s` polynomials in `x1..xn`. Hypersurface family: one
    /// polynomial in `x1..xn, y1..ys`.
    pub polys: Vec<Polynomial>,
    pub chi_hints: BTreeMap<String, i64>,
    pub grid: Vec<GridAxis>,
    pub schedule: RadiusSchedule,
    pub sampling: Sampling,
    pub seed: u64,
}

impl FamilySpec {
    pub fn map_graph(n: usize, exprs: &[&str]) -> Result<Self> {
        let vars = var_names("x", n);
        let polys = exprs
            .iter()
            .map(|e| parse_polynomial(e, &vars))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::from_parts(FamilyKind::MapGraph, n, exprs.len(), polys)
    }

    pub fn hypersurface(n: usize, s: usize, expr: &str) -> Result<Self> {
        let mut vars = var_names("x", n);
        vars.extend(var_names("y", s));
        let p = parse_polynomial(expr, &vars)?;
        Self::from_parts(FamilyKind::HypersurfaceFamily, n, s, vec![p])
    }

    /// A single level set `{f = 0}` (or `{f ≤ 0}`) presented as the family
    /// `F(x, y) = f(x) - y` read at `y = 0`.
    pub fn single(n: usize, expr: &str) -> Result<Self> {
        let mut spec = Self::hypersurface(n, 1, &format!("({expr}) - y1"))?;
        spec.grid = vec![GridAxis {
            min: 0.0,
            max: 0.0,
            steps: 1,
        }];
        Ok(spec)
    }

    fn from_parts(kind: FamilyKind, n: usize, s: usize, polys: Vec<Polynomial>) -> Result<Self> {
        let spec = Self {
            kind,
            n,
            s,
            polys,
            chi_hints: BTreeMap::new(),
            grid: vec![
                GridAxis {
                    min: -1.0,
                    max: 1.0,
                    steps: 41
                };
                s
            ],
            schedule: RadiusSchedule::default(),
            sampling: Sampling::default(),
            seed: 0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.s == 0 {
            return Err(Error::Spec("n and s must be positive".into()));
        }
        match self.kind {
            FamilyKind::MapGraph => {
                if self.polys.len() != self.s {
                    return Err(Error::Spec(format!(
                        "map-graph needs exactly s = {} polynomials, got {}",
                        self.s,
                        self.polys.len()
                    )));
                }
                if self.polys.iter().any(|p| p.nvars() != self.n) {
                    return Err(Error::Spec("map-graph polynomials must use x1..xn".into()));
                }
            }
            FamilyKind::HypersurfaceFamily => {
                if self.polys.len() != 1 || self.polys[0].nvars() != self.n + self.s {
                    return Err(Error::Spec(
                        "hypersurface-family needs one polynomial in x1..xn, y1..ys".into(),
                    ));
                }
            }
        }
        if self.dim_w() < self.s {
            return Err(Error::Spec("dim W must be at least s".into()));
        }
        if self.grid.len() != self.s {
            return Err(Error::Spec("scan grid needs one axis per parameter".into()));
        }
        self.schedule.validate()
    }

    /// Dimension of the total space `W`.
    pub fn dim_w(&self) -> usize {
        match self.kind {
            FamilyKind::MapGraph => self.n,
            FamilyKind::HypersurfaceFamily => self.n + self.s - 1,
        }
    }

    /// Dimension of a regular fiber.
    pub fn fiber_dim(&self) -> usize {
        self.dim_w() - self.s
    }

    pub fn ambient(&self) -> usize {
        self.n + self.s
    }

    /// `w = (x, G(x))` for map-graph families.
    pub fn embed(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(self.kind, FamilyKind::MapGraph);
        let mut w = x.to_vec();
        w.extend(self.polys.iter().map(|g| g.eval(x)));
        w
    }

    /// Polynomial in `x1..xn` whose zero set is the fiber over `y`
    /// (requires a codimension-one fiber: `s = 1` map-graph or any
    /// hypersurface family).
    pub fn level_polynomial(&self, y: &[f64]) -> Result<Polynomial> {
        if y.len() != self.s {
            return Err(Error::Spec(format!(
                "parameter has {} entries, expected {}",
                y.len(),
                self.s
            )));
        }
        let xs = var_names("x", self.n);
        match self.kind {
            FamilyKind::MapGraph => {
                if self.s != 1 {
                    return Err(Error::Unsupported(
                        "fibers of codimension > 1 (map-graph with s > 1)".into(),
                    ));
                }
                Ok(self.polys[0].sub(&Polynomial::constant(&xs, y[0])))
            }
            FamilyKind::HypersurfaceFamily => {
                let mut subs: Vec<Polynomial> = (0..self.n).map(|i| Polynomial::variable(&xs, i)).collect();
                subs.extend(y.iter().map(|&v| Polynomial::constant(&xs, v)));
                Ok(self.polys[0].compose(&subs)?)
            }
        }
    }

    /// χ hint for a named set (`fiber` or `sublevel`), if the file gave one.
    pub fn chi_hint(&self, name: &str) -> Option<i64> {
        self.chi_hints.get(name).copied()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawSpec = toml::from_str(text).map_err(|e| Error::Spec(format!("malformed file: {e}")))?;
        let kind = match raw.family.kind.as_str() {
            "map-graph" => FamilyKind::MapGraph,
            "hypersurface-family" => FamilyKind::HypersurfaceFamily,
            other => return Err(Error::Spec(format!("unknown family kind '{other}'"))),
        };
        let exprs: Vec<String> = match raw.family.expr {
            ExprField::One(s) => vec![s],
            ExprField::Many(v) => v,
        };
        let (n, s) = (raw.family.n, raw.family.s);
        let mut spec = match kind {
            FamilyKind::MapGraph => {
                let refs: Vec<&str> = exprs.iter().map(String::as_str).collect();
                if refs.len() != s {
                    return Err(Error::Spec(format!(
                        "map-graph needs exactly s = {s} expressions, got {}",
                        refs.len()
                    )));
                }
                Self::map_graph(n, &refs)?
            }
            FamilyKind::HypersurfaceFamily => {
                if exprs.len() != 1 {
                    return Err(Error::Spec("hypersurface-family takes one expression".into()));
                }
                Self::hypersurface(n, s, &exprs[0])?
            }
        };
        if let Some(h) = raw.hints {
            spec.chi_hints = h.chi;
        }
        if let Some(scan) = raw.scan {
            spec.grid = scan.grid;
        }
        if let Some(sc) = raw.schedule {
            spec.schedule = RadiusSchedule {
                r0: sc.r0,
                factor: sc.factor,
                steps: sc.steps,
            };
        }
        if let Some(sm) = raw.sampling {
            spec.sampling = Sampling {
                planes: sm.planes,
                mesh_level: sm.mesh_level,
            };
        }
        spec.seed = raw.seed.unwrap_or(0);
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    family: RawFamily,
    hints: Option<RawHints>,
    scan: Option<RawScan>,
    schedule: Option<RawSchedule>,
    sampling: Option<RawSampling>,
    seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFamily {
    kind: String,
    n: usize,
    s: usize,
    expr: ExprField,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ExprField {
    One(String),
    Many(Vec<String>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHints {
    #[serde(default)]
    chi: BTreeMap<String, i64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScan {
    grid: Vec<GridAxis>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    r0: f64,
    factor: f64,
    steps: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSampling {
    planes: usize,
    mesh_level: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    const BROUGHTON: &str = r#"
seed = 42

[family]
kind = "map-graph"
n = 2
s = 1
expr = "x1 + x1^2*x2"

[hints.chi]
fiber = 2

[[scan.grid]]
min = -1.0
max = 1.0
steps = 41

[schedule]
r0 = 4.0
factor = 2.0
steps = 7

[sampling]
planes = 100
mesh_level = 4
"#;

    #[test]
    fn reads_full_file() {
        let spec = FamilySpec::from_toml(BROUGHTON).unwrap();
        assert_eq!(spec.kind, FamilyKind::MapGraph);
        assert_eq!((spec.n, spec.s, spec.dim_w(), spec.fiber_dim()), (2, 1, 2, 1));
        assert_eq!(spec.seed, 42);
        assert_eq!(spec.chi_hint("fiber"), Some(2));
        assert_eq!(spec.grid[0].values().len(), 41);
        assert!((spec.grid[0].cell() - 0.05).abs() < 1e-15);
        assert_eq!(spec.schedule.radii(), vec![4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0]);
        assert_eq!(spec.sampling.planes, 100);
    }

    #[test]
    fn hypersurface_family_levels() {
        let spec = FamilySpec::hypersurface(2, 1, "x1^2 + x2^2 - y1").unwrap();
        assert_eq!(spec.dim_w(), 2);
        let f = spec.level_polynomial(&[4.0]).unwrap();
        assert_eq!(f.eval(&[2.0, 0.0]), 0.0);
        assert_eq!(f.variables(), &["x1".to_string(), "x2".to_string()][..]);
    }

    #[test]
    fn rejects_inconsistent_specs() {
        let bad = BROUGHTON.replace("s = 1", "s = 2");
        assert!(matches!(FamilySpec::from_toml(&bad), Err(Error::Spec(_))));
        let bad = BROUGHTON.replace("x1^2*x2", "x1^2*z");
        assert!(matches!(FamilySpec::from_toml(&bad), Err(Error::Poly(_))));
        let bad = BROUGHTON.replace("steps = 7", "steps = 2");
        assert!(FamilySpec::from_toml(&bad).is_err());
        let bad = BROUGHTON.replace("map-graph", "surface");
        assert!(FamilySpec::from_toml(&bad).is_err());
        assert!(FamilySpec::from_toml("[family]\nkind = 1").is_err());
    }

    #[test]
    fn schedule_and_grid_strings() {
        let s = RadiusSchedule::parse("4:2:7").unwrap();
        assert_eq!(s.max_radius(), 256.0);
        assert!(RadiusSchedule::parse("4:1:7").is_err());
        assert!(RadiusSchedule::parse("4:2").is_err());
        assert!(RadiusSchedule::parse("1e8:100:3").is_err());
        let g = GridAxis::parse("-1:1:41").unwrap();
        assert_eq!(g.values()[20], 0.0);
    }
}
