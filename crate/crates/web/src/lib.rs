//! Browser bindings: trace a plane curve, read its invariants at infinity,
//! and compute Rabier numbers. Every entry point takes plain strings and
//! returns JSON so the page needs no glue beyond `JSON.parse`.

use infinitas::density::{estimate, DensityTarget};
use infinitas::geometry::trace_curve;
use infinitas::rabier::{check_rabier_equivalences, rabier_number, LinearMap};
use infinitas::topology::{stable_link, AlgebraicSet, SetKind};
use infinitas::{parse_polynomial, FamilySpec, Polynomial, RadiusSchedule};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn plane_poly(expr: &str) -> Result<Polynomial, String> {
    parse_polynomial(expr, &["x1".into(), "x2".into()]).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Trace {
    radius: f64,
    /// One polyline per element chain, as `[x, y]` pairs.
    segments: Vec<[[f64; 2]; 2]>,
    length: f64,
    components: usize,
}

pub fn trace_json(expr: &str, radius: f64) -> Result<String, String> {
    if !(radius > 0.0 && radius <= 1e4) {
        return Err("radius must lie in (0, 10000]".into());
    }
    let f = plane_poly(expr)?;
    let mesh = trace_curve(&f, radius, (radius / 400.0).min(0.05)).map_err(|e| e.to_string())?;
    let p = |i: usize| [mesh.vertices[i].point[0], mesh.vertices[i].point[1]];
    let segments = mesh.elements.iter().map(|e| [p(e[0]), p(e[1])]).collect();
    let out = Trace {
        radius,
        segments,
        length: mesh.measure(),
        components: mesh.components.len(),
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Invariants {
    link_chi: Option<i64>,
    link_sublevel_chi: Option<i64>,
    kappa_0: Option<f64>,
    sigma_1: Option<f64>,
    theta: Option<f64>,
    notes: Vec<String>,
}

/// Link Euler characteristics and densities at infinity of `{f = 0}` and
/// `{f ≤ 0}` over a short schedule (`R = 4·2^j`, `j < 5`).
pub fn invariants_json(expr: &str) -> Result<String, String> {
    let f = plane_poly(expr)?;
    let sched = RadiusSchedule::new(4.0, 2.0, 5).map_err(|e| e.to_string())?;
    let spec = FamilySpec::single(2, expr).map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    let mut link = |kind: SetKind| {
        let set = AlgebraicSet { poly: f.clone(), kind };
        match stable_link(&set, &sched) {
            Ok(r) => {
                if r.stable_chi.is_none() {
                    notes.push(format!("{} link did not stabilize", kind.as_str()));
                }
                r.stable_chi
            }
            Err(e) => {
                notes.push(e.to_string());
                None
            }
        }
    };
    let link_chi = link(SetKind::Fiber);
    let link_sublevel_chi = link(SetKind::Sublevel);
    let mut density = |t: DensityTarget| match estimate(&spec, &[0.0], t, &sched) {
        Ok(e) => Some(e.value),
        Err(e) => {
            notes.push(format!("{t}: {e}"));
            None
        }
    };
    let out = Invariants {
        link_chi,
        link_sublevel_chi,
        kappa_0: density(DensityTarget::Kappa { i: 0 }),
        sigma_1: density(DensityTarget::Sigma { i: 1 }),
        theta: density(DensityTarget::Theta),
        notes,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Rabier {
    nu: f64,
    infimum: Option<f64>,
    inscribed_radius: Option<f64>,
    distance_to_singular: Option<f64>,
}

/// Rows separated by newlines or `;`, entries by commas or spaces.
pub fn rabier_json(text: &str) -> Result<String, String> {
    let rows = text
        .split(['\n', ';'])
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().map_err(|_| format!("bad entry '{t}'")))
                .collect::<Result<Vec<f64>, String>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    if rows.is_empty() || rows.len() > 6 || rows.iter().any(|r| r.len() != rows[0].len() || r.len() > 6) {
        return Err("need a rectangular matrix of at most 6×6".into());
    }
    let a = LinearMap::from_rows(&rows).map_err(|e| e.to_string())?;
    let eq = (a.q() <= a.p())
        .then(|| check_rabier_equivalences(&a, 16).ok())
        .flatten();
    let out = Rabier {
        nu: rabier_number(&a),
        infimum: eq.as_ref().map(|e| e.infimum),
        inscribed_radius: eq.as_ref().map(|e| e.inscribed_radius),
        distance_to_singular: eq.as_ref().map(|e| e.distance_to_singular),
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn trace(expr: &str, radius: f64) -> Result<String, JsError> {
    trace_json(expr, radius).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn invariants(expr: &str) -> Result<String, JsError> {
    invariants_json(expr).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn rabier(matrix: &str) -> Result<String, JsError> {
    rabier_json(matrix).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hyperbola_invariants() {
        let v: serde_json::Value = serde_json::from_str(&invariants_json("x1*x2 - 1").unwrap()).unwrap();
        assert_eq!(v["link_chi"], 4);
        assert!((v["kappa_0"].as_f64().unwrap() - 4.0).abs() < 0.05);
    }

    #[test]
    fn circle_trace() {
        let v: serde_json::Value = serde_json::from_str(&trace_json("x1^2 + x2^2 - 1", 3.0).unwrap()).unwrap();
        assert_eq!(v["components"], 1);
        assert!((v["length"].as_f64().unwrap() - 2.0 * std::f64::consts::PI).abs() < 1e-3);
        assert!(trace_json("x1 +", 3.0).is_err());
    }

    #[test]
    fn rabier_matrix() {
        let v: serde_json::Value = serde_json::from_str(&rabier_json("3 4").unwrap()).unwrap();
        assert_eq!(v["nu"], 5.0);
        let v: serde_json::Value = serde_json::from_str(&rabier_json("1 0; 0 2").unwrap()).unwrap();
        assert!((v["distance_to_singular"].as_f64().unwrap() - 1.0).abs() < 1e-9);
        assert!(rabier_json("1 2; 3").is_err());
    }
}
