//! Named reference sets and families with known invariants.

use crate::error::{Error, Result};
use crate::spec::{FamilySpec, GridAxis};
use crate::topology::SetKind;

/// A fiber `{f = 0}` or sub-level `{f ≤ 0}` in the plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CatalogSet {
    pub name: &'static str,
    pub n: usize,
    pub expr: &'static str,
    pub kind: SetKind,
    /// `χ(X)`.
    pub chi: i64,
    /// `[χ₁∞, …, χₙ∞]`.
    pub chi_infty: &'static [f64],
}

pub const SETS: &[CatalogSet] = &[
    CatalogSet {
        name: "line",
        n: 2,
        expr: "x2",
        kind: SetKind::Fiber,
        chi: 1,
        chi_infty: &[0.0, 1.0],
    },
    CatalogSet {
        name: "circle",
        n: 2,
        expr: "x1^2 + x2^2 - 1",
        kind: SetKind::Fiber,
        chi: 0,
        chi_infty: &[0.0, 0.0],
    },
    CatalogSet {
        name: "parabola",
        n: 2,
        expr: "x2 - x1^2",
        kind: SetKind::Fiber,
        chi: 1,
        chi_infty: &[0.0, 1.0],
    },
    CatalogSet {
        name: "hyperbola",
        n: 2,
        expr: "x1*x2 - 1",
        kind: SetKind::Fiber,
        chi: 2,
        chi_infty: &[0.0, 2.0],
    },
    CatalogSet {
        name: "half-plane",
        n: 2,
        expr: "x1",
        kind: SetKind::Sublevel,
        chi: 1,
        chi_infty: &[0.5, 0.5],
    },
    CatalogSet {
        name: "disk",
        n: 2,
        expr: "x1^2 + x2^2 - 1",
        kind: SetKind::Sublevel,
        chi: 1,
        chi_infty: &[0.0, 0.0],
    },
    CatalogSet {
        name: "below-parabola",
        n: 2,
        expr: "x2 - x1^2",
        kind: SetKind::Sublevel,
        chi: 1,
        chi_infty: &[1.0, 0.5],
    },
];

pub fn set(name: &str) -> Result<&'static CatalogSet> {
    SETS.iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::Spec(format!("unknown catalog set '{name}'")))
}

impl CatalogSet {
    /// The set as a one-parameter spec read at `y = 0`, with its Euler
    /// characteristic as the hint.
    pub fn spec(&self) -> FamilySpec {
        let mut spec = FamilySpec::single(self.n, self.expr).expect("catalog expressions parse");
        spec.chi_hints.insert(self.kind.as_str().into(), self.chi);
        spec
    }
}

/// A family with its expected estimate of `K` on the default grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CatalogFamily {
    pub name: &'static str,
    /// `true` for map-graph `G(x)`, `false` for hypersurface `F(x, y)`.
    pub map_graph: bool,
    pub n: usize,
    pub expr: &'static str,
    /// `(min, max, steps)` of the scan grid.
    pub grid: (f64, f64, usize),
}

pub const FAMILIES: &[CatalogFamily] = &[
    CatalogFamily {
        name: "x1",
        map_graph: true,
        n: 2,
        expr: "x1",
        grid: (-1.0, 1.0, 41),
    },
    CatalogFamily {
        name: "x1x2",
        map_graph: true,
        n: 2,
        expr: "x1*x2",
        grid: (-1.0, 1.0, 41),
    },
    CatalogFamily {
        name: "broughton",
        map_graph: true,
        n: 2,
        expr: "x1 + x1^2*x2",
        grid: (-1.0, 1.0, 41),
    },
    CatalogFamily {
        name: "circle",
        map_graph: false,
        n: 2,
        expr: "x1^2 + x2^2 - y1",
        grid: (-1.0, 1.0, 41),
    },
    CatalogFamily {
        name: "circle-scan",
        map_graph: false,
        n: 2,
        expr: "x1^2 + x2^2 - y1",
        grid: (0.5, 4.0, 36),
    },
    CatalogFamily {
        name: "hyperbola",
        map_graph: false,
        n: 2,
        expr: "x1*x2 - y1",
        grid: (-1.0, 1.0, 41),
    },
];

pub fn family(name: &str) -> Result<&'static CatalogFamily> {
    FAMILIES
        .iter()
        .find(|f| f.name == name)
        .ok_or_else(|| Error::Spec(format!("unknown catalog family '{name}'")))
}

impl CatalogFamily {
    pub fn spec(&self) -> FamilySpec {
        let mut spec = if self.map_graph {
            FamilySpec::map_graph(self.n, &[self.expr])
        } else {
            FamilySpec::hypersurface(self.n, 1, self.expr)
        }
        .expect("catalog expressions parse");
        let (min, max, steps) = self.grid;
        spec.grid = vec![GridAxis { min, max, steps }];
        spec
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_specs_build() {
        for s in SETS {
            let spec = s.spec();
            assert_eq!(spec.chi_hint(s.kind.as_str()), Some(s.chi));
            assert_eq!(s.chi_infty.len(), s.n);
        }
        for f in FAMILIES {
            assert_eq!(f.spec().grid[0].steps, f.grid.2);
        }
        assert!(set("torus").is_err());
        assert_eq!(family("broughton").unwrap().expr, "x1 + x1^2*x2");
    }
}
