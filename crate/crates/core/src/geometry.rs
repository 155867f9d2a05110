//! Discretized fibers: traced plane curves, marching-tetrahedra surfaces,
//! pointwise curvature from exact jets, and integrals over ball-clipped
//! level sets.
//!
//! Orientation: the Gauss map is `ν = -∇f/|∇f|`, so the round circle
//! `|x|² - 1` has principal curvature `+1` and the parabola `x2 - x1²`
//! has `σ₁ = -2` at its vertex.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::Serialize;

use crate::density::geometric_constants;
use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm, Mat};
use crate::poly::{Jet2, Polynomial};
use crate::rng;
use crate::roots;

/// Gradient norm below which a level point counts as singular.
pub const SINGULAR_GRADIENT: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Component {
    pub closed: bool,
    pub measure: f64,
    pub elements: usize,
    /// Number of element ends on the clipping sphere.
    pub boundary_ends: usize,
}

/// A fiber clipped to the ball of radius `radius`: a polyline (`dim = 1`)
/// or a triangulation (`dim = 2`).
#[derive(Clone, Debug)]
pub struct LevelMesh {
    pub dim: usize,
    pub ambient: usize,
    pub radius: f64,
    pub vertices: Vec<Jet2>,
    pub elements: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
    pub labels: Vec<usize>,
    pub boundary: Vec<bool>,
    pub components: Vec<Component>,
}

impl LevelMesh {
    pub fn empty(dim: usize, ambient: usize, radius: f64) -> Self {
        Self {
            dim,
            ambient,
            radius,
            vertices: Vec::new(),
            elements: Vec::new(),
            weights: Vec::new(),
            labels: Vec::new(),
            boundary: Vec::new(),
            components: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `V - E + F` of the complex spanned by the elements.
    pub fn euler_characteristic(&self) -> i64 {
        let mut verts = std::collections::BTreeSet::new();
        let mut edges = std::collections::BTreeSet::new();
        for e in &self.elements {
            verts.extend(e.iter().copied());
            for i in 0..e.len() {
                for j in (i + 1)..e.len() {
                    edges.insert((e[i].min(e[j]), e[i].max(e[j])));
                }
            }
        }
        let faces = if self.dim == 2 { self.elements.len() } else { 0 };
        verts.len() as i64 - edges.len() as i64 + faces as i64
    }

    /// Plain-text OBJ dump (`v` lines, then `l` or `f` lines, 1-based).
    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# level mesh: dim {} radius {}", self.dim, self.radius);
        for v in &self.vertices {
            let p = &v.point;
            let z = if p.len() > 2 { p[2] } else { 0.0 };
            let _ = writeln!(s, "v {:.12} {:.12} {:.12}", p[0], p.get(1).copied().unwrap_or(0.0), z);
        }
        let tag = if self.dim == 1 { 'l' } else { 'f' };
        for e in &self.elements {
            let ids: Vec<String> = e.iter().map(|i| (i + 1).to_string()).collect();
            let _ = writeln!(s, "{tag} {}", ids.join(" "));
        }
        s
    }
}

fn jet(f: &Polynomial, x: &[f64]) -> Result<Jet2> {
    Ok(f.jet(x)?)
}

fn check_regular(j: &Jet2) -> Result<()> {
    let g = j.gradient_norm();
    if g < SINGULAR_GRADIENT || !g.is_finite() {
        return Err(Error::SingularPoint {
            point: j.point.clone(),
            gradient_norm: g,
        });
    }
    Ok(())
}

fn on_level_tol(j: &Jet2) -> f64 {
    1e-12 * (1.0 + j.gradient_norm() * (1.0 + norm(&j.point)))
}

/// Newton projection onto `{f = 0}` along the gradient.
fn project(f: &Polynomial, x: &[f64]) -> Result<Option<Jet2>> {
    let mut p = x.to_vec();
    for _ in 0..12 {
        let j = jet(f, &p)?;
        let g2 = dot(&j.gradient, &j.gradient);
        if g2 == 0.0 || !g2.is_finite() {
            return Ok(None);
        }
        if j.value.abs() <= on_level_tol(&j) {
            return Ok(Some(j));
        }
        linalg::axpy(-j.value / g2, &j.gradient, &mut p);
    }
    let j = jet(f, &p)?;
    Ok((j.value.abs() <= 1e-8 * (1.0 + j.gradient_norm())).then_some(j))
}

/// Newton on `{f = 0} ∩ {|x| = r}` (min-norm steps), from `x`.
fn project_on_sphere(f: &Polynomial, x: &[f64], r: f64) -> Result<Option<Jet2>> {
    let mut p = x.to_vec();
    for _ in 0..20 {
        let j = jet(f, &p)?;
        let res = [j.value, dot(&p, &p) - r * r];
        if j.value.abs() <= on_level_tol(&j) && res[1].abs() <= 1e-12 * r * r {
            return Ok(Some(j));
        }
        let two_p: Vec<f64> = p.iter().map(|v| 2.0 * v).collect();
        let jac = Mat::from_rows(&[j.gradient.clone(), two_p]);
        let Some(dx) = linalg::min_norm_solve(&jac, &res) else {
            return Ok(None);
        };
        linalg::axpy(-1.0, &dx, &mut p);
    }
    let j = jet(f, &p)?;
    let ok = j.value.abs() <= 1e-8 * (1.0 + j.gradient_norm()) && (norm(&p) - r).abs() <= 1e-8 * r;
    Ok(ok.then_some(j))
}

fn curve_tangent(j: &Jet2) -> [f64; 2] {
    let g = j.gradient_norm();
    [-j.gradient[1] / g, j.gradient[0] / g]
}

/// Curvature `|tᵀHt|/|∇f|` of a plane curve at a jet.
fn curve_curvature(j: &Jet2) -> f64 {
    let t = curve_tangent(j);
    let h = &j.hessian;
    let q = t[0] * t[0] * h[0][0] + 2.0 * t[0] * t[1] * h[0][1] + t[1] * t[1] * h[1][1];
    q.abs() / j.gradient_norm()
}

fn seg_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let l2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if l2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ((ap[0] - t * ab[0]).powi(2) + (ap[1] - t * ab[1]).powi(2)).sqrt()
}

/// Points of the curve used to start continuation: exact intersections
/// with the clipping circle, nested circles, and nested families of axis
/// lines (spacing `r/16` at each dyadic scale `r ≤ R`).
fn curve_seeds(f: &Polynomial, r: f64) -> Result<Vec<Vec<f64>>> {
    let mut seeds: Vec<Vec<f64>> = roots::circle_roots(f, r)?
        .into_iter()
        .map(|t| vec![r * t.cos(), r * t.sin()])
        .collect();
    let mut scale = r;
    while scale >= 0.25 {
        if scale < r {
            if let Ok(th) = roots::circle_roots(f, scale) {
                seeds.extend(th.into_iter().map(|t| vec![scale * t.cos(), scale * t.sin()]));
            }
        }
        let spacing = scale / 16.0;
        for k in -16..=16 {
            // offset keeps grid lines off symmetry axes of typical inputs
            let c = (k as f64 + 0.381_966_011_250_105) * spacing;
            for axis in 0..2 {
                let mut o = [0.0, 0.0];
                o[axis] = c;
                let mut d = [0.0, 0.0];
                d[1 - axis] = 1.0;
                if let Ok(ts) = roots::line_roots(f, &o, &d, -scale, scale) {
                    for t in ts {
                        let mut p = o.to_vec();
                        p[1 - axis] = t;
                        seeds.push(p);
                    }
                }
            }
        }
        scale *= 0.5;
    }
    seeds.retain(|p| norm(p) <= r * (1.0 + 1e-12));
    Ok(seeds)
}

enum BranchEnd {
    Boundary,
    Closed,
}

struct Tracer<'a> {
    f: &'a Polynomial,
    r: f64,
    step: f64,
    budget: usize,
}

impl Tracer<'_> {
    fn h_max(&self, p: &[f64]) -> f64 {
        self.step.max(0.01 * norm(p)).min(0.05 * self.r.max(self.step))
    }

    /// One predictor-corrector step of length about `h` from `p` along `t`.
    fn step_from(&self, p: &Jet2, t: [f64; 2], mut h: f64) -> Result<(Jet2, [f64; 2])> {
        let h_min = 1e-9 * (1.0 + norm(&p.point));
        loop {
            if h < h_min {
                return Err(Error::SingularPoint {
                    point: p.point.clone(),
                    gradient_norm: p.gradient_norm(),
                });
            }
            let pred = [p.point[0] + h * t[0], p.point[1] + h * t[1]];
            if let Some(q) = project(self.f, &pred)? {
                check_regular(&q)?;
                let drift = ((q.point[0] - pred[0]).powi(2) + (q.point[1] - pred[1]).powi(2)).sqrt();
                let mut tq = curve_tangent(&q);
                if tq[0] * t[0] + tq[1] * t[1] < 0.0 {
                    tq = [-tq[0], -tq[1]];
                }
                let turn = tq[0] * t[0] + tq[1] * t[1];
                if drift <= 0.2 * h && turn >= 0.9 {
                    // the chord midpoint must project close by, otherwise
                    // the corrector has hopped onto a neighbouring branch
                    let mid = [0.5 * (p.point[0] + q.point[0]), 0.5 * (p.point[1] + q.point[1])];
                    if let Some(m) = project(self.f, &mid)? {
                        let dm = ((m.point[0] - mid[0]).powi(2) + (m.point[1] - mid[1]).powi(2)).sqrt();
                        if dm <= 0.1 * h {
                            return Ok((q, tq));
                        }
                    }
                }
            }
            h *= 0.5;
        }
    }

    /// Traces from `seed` in direction `dir` until the curve leaves the
    /// ball or returns to the seed.
    fn branch(&self, seed: &Jet2, dir: [f64; 2]) -> Result<(Vec<Jet2>, BranchEnd)> {
        let mut out: Vec<Jet2> = Vec::new();
        let mut p = seed.clone();
        let mut t = dir;
        let mut travelled = 0.0;
        if norm(&seed.point) >= self.r * (1.0 - 1e-12) && dot(&seed.point, &t) > 0.0 {
            return Ok((out, BranchEnd::Boundary));
        }
        for _ in 0..self.budget {
            let kappa = curve_curvature(&p);
            let h = self.h_max(&p.point).min(0.05 / kappa.max(1e-300));
            let (q, tq) = self.step_from(&p, t, h)?;
            let chord = seg_distance(&seed.point, &p.point, &q.point);
            if travelled > 0.0 && out.len() >= 3 && chord <= 1e-7 * (1.0 + norm(&seed.point)) + 0.05 * h {
                let ahead = (seed.point[0] - p.point[0]) * t[0] + (seed.point[1] - p.point[1]) * t[1];
                if ahead > 0.0 {
                    return Ok((out, BranchEnd::Closed));
                }
            }
            if norm(&q.point) > self.r {
                // land exactly on the clipping circle
                let a = norm(&p.point);
                let b = norm(&q.point);
                let s = ((self.r - a) / (b - a)).clamp(0.0, 1.0);
                let guess = [
                    p.point[0] + s * (q.point[0] - p.point[0]),
                    p.point[1] + s * (q.point[1] - p.point[1]),
                ];
                let end = project_on_sphere(self.f, &guess, self.r)?.ok_or_else(|| Error::Tangential {
                    radius: self.r,
                    point: guess.to_vec(),
                })?;
                check_regular(&end)?;
                out.push(end);
                return Ok((out, BranchEnd::Boundary));
            }
            travelled += h;
            out.push(q.clone());
            p = q;
            t = tq;
        }
        Err(Error::TraceOverflow(self.budget))
    }
}

fn arc_weight(a: &Jet2, b: &Jet2) -> f64 {
    let c = ((a.point[0] - b.point[0]).powi(2) + (a.point[1] - b.point[1]).powi(2)).sqrt();
    let k = 0.5 * (curve_curvature(a) + curve_curvature(b));
    c * (1.0 + (k * c).powi(2) / 24.0)
}

/// Traces `{f = 0} ∩ B_R` for a polynomial in two variables.
///
/// `step` is the largest continuation step near the origin; steps grow
/// like `|x|/100` further out and are capped by `0.05/κ`.
pub fn trace_curve(f: &Polynomial, r: f64, step: f64) -> Result<LevelMesh> {
    if f.nvars() != 2 {
        return Err(Error::Unsupported(
            "trace_curve needs a polynomial in two variables".into(),
        ));
    }
    let mut mesh = LevelMesh::empty(1, 2, r);
    if f.is_zero() {
        return Err(Error::SingularPoint {
            point: vec![0.0, 0.0],
            gradient_norm: 0.0,
        });
    }
    let seeds = curve_seeds(f, r)?;
    let tracer = Tracer {
        f,
        r,
        step,
        budget: 2_000_000,
    };
    let mut traced: Vec<Vec<Jet2>> = Vec::new();
    for s in &seeds {
        let covered = traced.iter().any(|poly| {
            poly.windows(2).any(|w| {
                let len = ((w[0].point[0] - w[1].point[0]).powi(2) + (w[0].point[1] - w[1].point[1]).powi(2)).sqrt();
                let k = curve_curvature(&w[0]).max(curve_curvature(&w[1]));
                let tol = 1e-7 * (1.0 + norm(s)) + 0.2 * k * len * len;
                seg_distance(s, &w[0].point, &w[1].point) <= tol
            })
        });
        if covered {
            continue;
        }
        let Some(sj) = project(f, s)? else { continue };
        check_regular(&sj)?;
        if norm(&sj.point) > r * (1.0 + 1e-9) {
            continue;
        }
        let t = curve_tangent(&sj);
        let (fwd, end) = tracer.branch(&sj, t)?;
        let poly: Vec<Jet2> = match end {
            BranchEnd::Closed => {
                let mut v = vec![sj.clone()];
                v.extend(fwd);
                v.push(sj.clone());
                v
            }
            BranchEnd::Boundary => {
                let (bwd, bend) = tracer.branch(&sj, [-t[0], -t[1]])?;
                let mut v: Vec<Jet2>;
                if let BranchEnd::Closed = bend {
                    v = vec![sj.clone()];
                    v.extend(bwd);
                    v.push(sj.clone());
                } else {
                    v = bwd.into_iter().rev().collect();
                    v.push(sj.clone());
                    v.extend(fwd);
                }
                v
            }
        };
        if poly.len() < 2 {
            // a seed touching the circle from outside: nothing inside
            continue;
        }
        traced.push(poly);
    }
    for (label, poly) in traced.iter().enumerate() {
        let closed = poly.len() > 2 && poly[0].point == poly[poly.len() - 1].point;
        let base = mesh.vertices.len();
        let nv = if closed { poly.len() - 1 } else { poly.len() };
        mesh.vertices.extend(poly[..nv].iter().cloned());
        let mut measure = 0.0;
        let mut ends = 0;
        for i in 0..poly.len() - 1 {
            let a = base + i;
            let b = if closed && i + 1 == nv { base } else { base + i + 1 };
            let w = arc_weight(&poly[i], &poly[i + 1]);
            let on_b = |j: &Jet2| (norm(&j.point) - r).abs() <= 1e-9 * r;
            let touches = on_b(&poly[i]) || on_b(&poly[i + 1]);
            ends += usize::from(on_b(&poly[i]) && i == 0) + usize::from(on_b(&poly[i + 1]) && i + 2 == poly.len());
            mesh.elements.push(vec![a, b]);
            mesh.weights.push(w);
            mesh.labels.push(label);
            mesh.boundary.push(touches);
            measure += w;
        }
        mesh.components.push(Component {
            closed,
            measure,
            elements: poly.len() - 1,
            boundary_ends: ends,
        });
    }
    Ok(mesh)
}

// Kuhn subdivision of the unit cube into six tetrahedra sharing the main
// diagonal; corners are bit-coded (bit 0 = x, bit 1 = y, bit 2 = z).
const KUHN: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

/// Grid triangles of `{f = 0}` on a shifted grid covering `B_R`, with
/// Newton-snapped vertices (unclipped). Also returns the cell size.
fn march_tetrahedra(f: &Polynomial, r: f64, resolution: usize) -> Result<(Vec<Jet2>, Vec<[usize; 3]>, f64)> {
    let n = resolution.max(2);
    let h = 2.0 * r / n as f64;
    // shifted grid with one extra cell so grid nodes avoid symmetric planes
    let shift = 0.381_966_011_250_105 * h;
    let m = n + 2;
    let origin = -r - shift - 0.5 * h;
    let coord = |i: usize| origin + i as f64 * h;
    let idx = |i: usize, j: usize, k: usize| (i * (m + 1) + j) * (m + 1) + k;
    let mut vals = vec![0.0; (m + 1) * (m + 1) * (m + 1)];
    for i in 0..=m {
        for j in 0..=m {
            for k in 0..=m {
                vals[idx(i, j, k)] = f.eval(&[coord(i), coord(j), coord(k)]);
            }
        }
    }
    let mut mesh = LevelMesh::empty(2, 3, r);
    let mut edge_vertex: HashMap<(usize, usize), usize> = HashMap::new();
    let mut raw: Vec<[usize; 3]> = Vec::new();
    let node = |g: usize| -> [f64; 3] {
        let k = g % (m + 1);
        let j = (g / (m + 1)) % (m + 1);
        let i = g / ((m + 1) * (m + 1));
        [coord(i), coord(j), coord(k)]
    };
    let mut vertex_on_edge = |a: usize, b: usize, mesh: &mut LevelMesh| -> Result<usize> {
        let key = (a.min(b), a.max(b));
        if let Some(&v) = edge_vertex.get(&key) {
            return Ok(v);
        }
        let (fa, fb) = (vals[a], vals[b]);
        let t = fa / (fa - fb);
        let (pa, pb) = (node(a), node(b));
        let guess: Vec<f64> = (0..3).map(|c| pa[c] + t * (pb[c] - pa[c])).collect();
        let j = match project(f, &guess)? {
            Some(j) if norm(&linalg_sub(&j.point, &guess)) <= 2.0 * h => j,
            _ => jet(f, &guess)?,
        };
        check_regular(&j)?;
        mesh.vertices.push(j);
        let id = mesh.vertices.len() - 1;
        edge_vertex.insert(key, id);
        Ok(id)
    };
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let corner = |c: usize| idx(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                for tet in KUHN {
                    let g: Vec<usize> = tet.iter().map(|&c| corner(c)).collect();
                    let neg: Vec<usize> = g.iter().copied().filter(|&v| vals[v] < 0.0).collect();
                    let pos: Vec<usize> = g.iter().copied().filter(|&v| vals[v] >= 0.0).collect();
                    match (neg.len(), pos.len()) {
                        (1, 3) | (3, 1) => {
                            let (single, others) = if neg.len() == 1 { (neg[0], &pos) } else { (pos[0], &neg) };
                            let a = vertex_on_edge(single, others[0], &mut mesh)?;
                            let b = vertex_on_edge(single, others[1], &mut mesh)?;
                            let c = vertex_on_edge(single, others[2], &mut mesh)?;
                            raw.push([a, b, c]);
                        }
                        (2, 2) => {
                            let a = vertex_on_edge(neg[0], pos[0], &mut mesh)?;
                            let b = vertex_on_edge(neg[0], pos[1], &mut mesh)?;
                            let c = vertex_on_edge(neg[1], pos[1], &mut mesh)?;
                            let d = vertex_on_edge(neg[1], pos[0], &mut mesh)?;
                            raw.push([a, b, c]);
                            raw.push([a, c, d]);
                        }
                        _ => {}
                    }
                }
            }
        }
    }
    Ok((mesh.vertices, raw, h))
}

/// Marching-tetrahedra triangulation of `{f = 0} ∩ B_R` for a polynomial in
/// three variables on a grid of `resolution` cells per axis. Vertices are
/// Newton-snapped onto the level; triangles crossing the sphere are clipped
/// at points of `{f = 0} ∩ S_R`.
pub fn mesh_surface(f: &Polynomial, r: f64, resolution: usize) -> Result<LevelMesh> {
    if f.nvars() != 3 {
        return Err(Error::Unsupported(
            "mesh_surface needs a polynomial in three variables".into(),
        ));
    }
    let (mut verts, raw, _) = march_tetrahedra(f, r, resolution)?;
    let mut mesh = LevelMesh::empty(2, 3, r);
    if raw.is_empty() {
        if let Some(p) = probe_level(f, 0.0, r)? {
            return Err(Error::ResolutionTooCoarse(format!(
                "no cell of the {}³ grid changes sign but the level passes through {p:?}",
                resolution.max(2)
            )));
        }
        return Ok(mesh);
    }
    let pieces = clip_to_ball(f, r, true, &mut verts, &raw)?;
    mesh.vertices = verts;
    for (t, _, clipped) in pieces {
        let w = projected_area(&mesh.vertices[t[0]], &mesh.vertices[t[1]], &mesh.vertices[t[2]]);
        mesh.elements.push(t.to_vec());
        mesh.weights.push(w);
        mesh.boundary.push(clipped);
    }
    prune_vertices(&mut mesh);
    label_components(&mut mesh, &[]);
    Ok(mesh)
}

/// `{f = 0} ∩ B_R` assembled from dyadic shells `B_{r_k} ∖ B_{r_{k-1}}`
/// (`r_k = R/2^j`, innermost ball of radius at most `inner`), each meshed at
/// the same number of cells, so features keep the same relative resolution
/// at every scale. Shells do not share vertices; components are joined
/// across a seam when seam vertices lie within two cells of each other.
pub fn mesh_surface_multiscale(f: &Polynomial, r: f64, resolution: usize, inner: f64) -> Result<LevelMesh> {
    let mut radii = vec![r];
    while *radii.last().unwrap() > inner {
        let next = radii.last().unwrap() / 2.0;
        radii.push(next);
    }
    radii.reverse();
    if radii.len() == 1 {
        return mesh_surface(f, r, resolution);
    }
    let last = radii.len() - 1;
    let on_sphere = |p: &[f64], rad: f64| (norm(p) - rad).abs() <= 1e-9 * rad;
    let mut mesh = LevelMesh::empty(2, 3, r);
    let mut joins: Vec<(usize, usize)> = Vec::new();
    // global ids of the previous shell's vertices on its outer sphere
    let mut outer_seam: Vec<usize> = Vec::new();
    for (k, &rk) in radii.iter().enumerate() {
        let r_in = if k == 0 { 0.0 } else { radii[k - 1] };
        let (mut verts, raw, h) = march_tetrahedra(f, rk, resolution)?;
        if raw.is_empty() {
            if let Some(p) = probe_level(f, r_in, rk)? {
                return Err(Error::ResolutionTooCoarse(format!(
                    "no grid cell changes sign in the shell {r_in} < |x| < {rk} but the level passes through {p:?}"
                )));
            }
            outer_seam.clear();
            continue;
        }
        let outer = clip_to_ball(f, rk, true, &mut verts, &raw)?;
        let pieces: Vec<([usize; 3], bool)> = if k == 0 {
            outer.iter().map(|o| (o.0, o.2 && k == last)).collect()
        } else {
            let tris: Vec<[usize; 3]> = outer.iter().map(|o| o.0).collect();
            clip_to_ball(f, r_in, false, &mut verts, &tris)?
                .into_iter()
                .map(|(t, parent, _)| (t, outer[parent].2 && k == last))
                .collect()
        };
        let mut global = vec![usize::MAX; verts.len()];
        for (t, bnd) in &pieces {
            let mut e = Vec::with_capacity(3);
            for &v in t {
                if global[v] == usize::MAX {
                    global[v] = mesh.vertices.len();
                    mesh.vertices.push(verts[v].clone());
                }
                e.push(global[v]);
            }
            mesh.weights
                .push(projected_area(&verts[t[0]], &verts[t[1]], &verts[t[2]]));
            mesh.elements.push(e);
            mesh.boundary.push(*bnd);
        }
        let used: Vec<usize> = (0..verts.len()).filter(|&v| global[v] != usize::MAX).collect();
        if k > 0 {
            for &v in used.iter().filter(|&&v| on_sphere(&verts[v].point, r_in)) {
                let p = &verts[v].point;
                let near = outer_seam
                    .iter()
                    .map(|&g| (norm(&linalg_sub(&mesh.vertices[g].point, p)), g))
                    .min_by(|a, b| a.0.total_cmp(&b.0));
                if let Some((d, g)) = near {
                    if d <= 2.0 * h {
                        joins.push((g, global[v]));
                    }
                }
            }
        }
        outer_seam = used
            .iter()
            .filter(|&&v| on_sphere(&verts[v].point, rk))
            .map(|&v| global[v])
            .collect();
    }
    label_components(&mut mesh, &joins);
    Ok(mesh)
}

fn linalg_sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Newton projections from a few deterministic starts; returns a level
/// point with `r_in < |x| < r` if one is found.
fn probe_level(f: &Polynomial, r_in: f64, r: f64) -> Result<Option<Vec<f64>>> {
    let mut g = rng::substream(0x9e0b, &[f.nvars() as u64]);
    for _ in 0..32 {
        let u = rng::unit_vec(&mut g, f.nvars());
        let s: f64 = g.random::<f64>();
        let x: Vec<f64> = u.iter().map(|v| v * (r_in + (r - r_in) * s)).collect();
        if let Some(j) = project(f, &x)? {
            let d = norm(&j.point);
            if d < r && d > r_in {
                return Ok(Some(j.point));
            }
        }
    }
    Ok(None)
}

/// Area of the triangle projected onto the mean tangent plane, which keeps
/// the quadrature consistent for the skinny triangles marching tetrahedra
/// produces.
fn projected_area(a: &Jet2, b: &Jet2, c: &Jet2) -> f64 {
    let u = linalg_sub(&b.point, &a.point);
    let v = linalg_sub(&c.point, &a.point);
    let cross = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    let mut nbar = vec![0.0; 3];
    for j in [a, b, c] {
        let g = linalg::normalized(&j.gradient);
        linalg::axpy(1.0, &g, &mut nbar);
    }
    let nn = norm(&nbar);
    if nn == 0.0 {
        return 0.5 * norm(&cross);
    }
    0.5 * (dot(&cross, &nbar) / nn).abs()
}

/// Clips triangles to `B_R` (or to its complement when `keep_inside` is
/// false) by Sutherland-Hodgman, with cut points placed on `{f = 0} ∩ S_R`.
/// Returns `(triangle, parent index, was cut)`.
fn clip_to_ball(
    f: &Polynomial,
    r: f64,
    keep_inside: bool,
    verts: &mut Vec<Jet2>,
    raw: &[[usize; 3]],
) -> Result<Vec<([usize; 3], usize, bool)>> {
    let keep = |verts: &[Jet2], v: usize| (norm(&verts[v].point) <= r) == keep_inside;
    let mut clip_vertex: HashMap<(usize, usize), usize> = HashMap::new();
    let mut out = Vec::with_capacity(raw.len());
    for (parent, tri) in raw.iter().enumerate() {
        let flags: Vec<bool> = tri.iter().map(|&v| keep(verts, v)).collect();
        let count = flags.iter().filter(|&&b| b).count();
        if count == 3 {
            out.push((*tri, parent, false));
            continue;
        }
        if count == 0 {
            continue;
        }
        let mut poly: Vec<usize> = Vec::new();
        for e in 0..3 {
            let (a, b) = (tri[e], tri[(e + 1) % 3]);
            let (ia, ib) = (flags[e], flags[(e + 1) % 3]);
            if ia {
                poly.push(a);
            }
            if ia != ib {
                let key = (a.min(b), a.max(b));
                let v = match clip_vertex.get(&key) {
                    Some(&v) => v,
                    None => {
                        let (pa, pb) = (verts[a].point.clone(), verts[b].point.clone());
                        let (mut lo, mut hi) = (0.0, 1.0);
                        let at = |t: f64| -> Vec<f64> { (0..3).map(|c| pa[c] + t * (pb[c] - pa[c])).collect() };
                        let a_in = norm(&pa) <= r;
                        for _ in 0..60 {
                            let mid = 0.5 * (lo + hi);
                            if (norm(&at(mid)) <= r) == a_in {
                                lo = mid;
                            } else {
                                hi = mid;
                            }
                        }
                        let guess = at(0.5 * (lo + hi));
                        let j = match project_on_sphere(f, &guess, r)? {
                            Some(j) if norm(&linalg_sub(&j.point, &guess)) <= norm(&linalg_sub(&pa, &pb)) => j,
                            _ => jet(f, &guess)?,
                        };
                        check_regular(&j)?;
                        verts.push(j);
                        let id = verts.len() - 1;
                        clip_vertex.insert(key, id);
                        id
                    }
                };
                poly.push(v);
            }
        }
        for k in 1..poly.len().saturating_sub(1) {
            out.push(([poly[0], poly[k], poly[k + 1]], parent, true));
        }
    }
    Ok(out)
}

/// Drops vertices no element uses and renumbers.
fn prune_vertices(mesh: &mut LevelMesh) {
    let mut used = vec![usize::MAX; mesh.vertices.len()];
    let mut verts = Vec::new();
    for e in mesh.elements.iter_mut() {
        for v in e.iter_mut() {
            if used[*v] == usize::MAX {
                used[*v] = verts.len();
                verts.push(mesh.vertices[*v].clone());
            }
            *v = used[*v];
        }
    }
    mesh.vertices = verts;
}

/// Union-find over shared vertices, plus the extra vertex pairs `joins`.
fn label_components(mesh: &mut LevelMesh, joins: &[(usize, usize)]) {
    let nv = mesh.vertices.len();
    let mut parent: Vec<usize> = (0..nv).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let pairs = mesh
        .elements
        .iter()
        .flat_map(|e| e.windows(2).map(|w| (w[0], w[1])))
        .chain(joins.iter().copied());
    for (u, v) in pairs {
        let (a, b) = (find(&mut parent, u), find(&mut parent, v));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut label_of: HashMap<usize, usize> = HashMap::new();
    let mut order: Vec<usize> = Vec::new();
    mesh.labels = mesh
        .elements
        .iter()
        .map(|e| {
            let root = find(&mut parent, e[0]);
            *label_of.entry(root).or_insert_with(|| {
                order.push(root);
                order.len() - 1
            })
        })
        .collect();
    let mut comps = vec![
        Component {
            closed: true,
            measure: 0.0,
            elements: 0,
            boundary_ends: 0,
        };
        order.len()
    ];
    for (i, &l) in mesh.labels.iter().enumerate() {
        comps[l].measure += mesh.weights[i];
        comps[l].elements += 1;
        if mesh.boundary[i] {
            comps[l].closed = false;
            comps[l].boundary_ends += 1;
        }
    }
    mesh.components = comps;
}

/// Pointwise curvature data of a level set at a regular point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvatureSample {
    pub point: Vec<f64>,
    /// Principal curvatures with respect to `ν = -∇f/|∇f|` (codimension
    /// one only; empty for curves in space).
    pub principal: Vec<f64>,
    /// `σ₀..σ_d` in the direction `ν` (codimension one).
    pub sigma: Vec<f64>,
    /// Lipschitz-Killing curvatures `K₀..K_d`.
    pub lk: Vec<f64>,
    /// Orthonormal normal frame.
    pub normals: Vec<Vec<f64>>,
    /// Shape operator in the direction of each normal (`d × d`, tangent
    /// coordinates).
    pub shape: Vec<Vec<Vec<f64>>>,
}

/// Elementary symmetric functions `σ₀..σ_k` of `values`.
pub fn elementary_symmetric(values: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; values.len() + 1];
    e[0] = 1.0;
    for (k, &v) in values.iter().enumerate() {
        for i in (1..=k + 1).rev() {
            e[i] += e[i - 1] * v;
        }
    }
    e
}

fn shape_in_direction(sample: &CurvatureSample, v: &[f64]) -> Vec<f64> {
    let d = sample.shape.first().map_or(0, |s| s.len());
    let mut m = Mat::zeros(d, d);
    for (j, s) in sample.shape.iter().enumerate() {
        for a in 0..d {
            for b in 0..d {
                m[(a, b)] += v[j] * s[a][b];
            }
        }
    }
    let (vals, _) = linalg::sym_eigen(&m);
    elementary_symmetric(&vals)
}

/// Principal curvatures and symmetric functions of a hypersurface
/// `{f = 0}` at a jet: the eigenvalues of `P·H·P/|∇f|` on the tangent
/// space.
pub fn shape_operator(jet: &Jet2) -> Result<CurvatureSample> {
    let g = jet.gradient_norm();
    if g < SINGULAR_GRADIENT {
        return Err(Error::SingularPoint {
            point: jet.point.clone(),
            gradient_norm: g,
        });
    }
    let n = jet.gradient.len();
    let tangent = if n == 1 {
        Vec::new()
    } else {
        linalg::hyperplane_basis(&jet.gradient)
    };
    let d = tangent.len();
    let mut s = vec![vec![0.0; d]; d];
    for a in 0..d {
        for b in a..d {
            let mut v = 0.0;
            for i in 0..n {
                for k in 0..n {
                    v += tangent[a][i] * jet.hessian[i][k] * tangent[b][k];
                }
            }
            s[a][b] = v / g;
            s[b][a] = v / g;
        }
    }
    let mut m = Mat::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            m[(a, b)] = s[a][b];
        }
    }
    let (principal, _) = if d > 0 {
        linalg::sym_eigen(&m)
    } else {
        (Vec::new(), Mat::zeros(0, 0))
    };
    let sigma = elementary_symmetric(&principal);
    let lk = sigma
        .iter()
        .enumerate()
        .map(|(i, &x)| if i % 2 == 0 { 2.0 * x } else { 0.0 })
        .collect();
    let nu: Vec<f64> = jet.gradient.iter().map(|v| -v / g).collect();
    Ok(CurvatureSample {
        point: jet.point.clone(),
        principal,
        sigma,
        lk,
        normals: vec![nu],
        shape: vec![s],
    })
}

/// Curvature data of the space curve `{f₁ = 0} ∩ {f₂ = 0}` in ℝ³.
pub fn space_curve_sample(j1: &Jet2, j2: &Jet2) -> Result<CurvatureSample> {
    let (g1, g2) = (&j1.gradient, &j2.gradient);
    let t = [
        g1[1] * g2[2] - g1[2] * g2[1],
        g1[2] * g2[0] - g1[0] * g2[2],
        g1[0] * g2[1] - g1[1] * g2[0],
    ];
    let tn = norm(&t);
    if tn < SINGULAR_GRADIENT {
        return Err(Error::SingularPoint {
            point: j1.point.clone(),
            gradient_norm: tn,
        });
    }
    let t: Vec<f64> = t.iter().map(|v| v / tn).collect();
    let quad = |h: &Vec<Vec<f64>>| -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for k in 0..3 {
                s += t[i] * h[i][k] * t[k];
            }
        }
        s
    };
    // ∇fₐ·γ'' = -tᵀHₐt with γ'' normal: minimum-norm solution
    let jac = Mat::from_rows(&[g1.clone(), g2.clone()]);
    let accel =
        linalg::min_norm_solve(&jac, &[-quad(&j1.hessian), -quad(&j2.hessian)]).ok_or(Error::SingularPoint {
            point: j1.point.clone(),
            gradient_norm: tn,
        })?;
    let normals = linalg::orthonormalize(&[g1.clone(), g2.clone()], 1e-12);
    let shape: Vec<Vec<Vec<f64>>> = normals.iter().map(|nv| vec![vec![dot(&accel, nv)]]).collect();
    let mut sample = CurvatureSample {
        point: j1.point.clone(),
        principal: Vec::new(),
        sigma: Vec::new(),
        lk: Vec::new(),
        normals,
        shape,
    };
    sample.lk = lk_curvatures(&sample, 2)?;
    Ok(sample)
}

/// Lipschitz-Killing curvatures `K_i = ∫_{S^{c-1}} σ_i(x, v) dv` over the
/// unit normal sphere: `2σ_i`/`0` in codimension one, a 64-node
/// trapezoid over the normal circle in codimension two.
pub fn lk_curvatures(sample: &CurvatureSample, codim: usize) -> Result<Vec<f64>> {
    match codim {
        1 => {
            let sig = if sample.sigma.is_empty() {
                shape_in_direction(sample, &[1.0])
            } else {
                sample.sigma.clone()
            };
            Ok(sig
                .iter()
                .enumerate()
                .map(|(i, &x)| if i % 2 == 0 { 2.0 * x } else { 0.0 })
                .collect())
        }
        2 => {
            if sample.shape.len() != 2 {
                return Err(Error::Unsupported("codimension-two sample needs two normals".into()));
            }
            let d = sample.shape[0].len();
            let nodes = 64;
            let mut k = vec![0.0; d + 1];
            for q in 0..nodes {
                let th = 2.0 * std::f64::consts::PI * q as f64 / nodes as f64;
                let sig = shape_in_direction(sample, &[th.cos(), th.sin()]);
                for (ki, si) in k.iter_mut().zip(sig) {
                    *ki += si * 2.0 * std::f64::consts::PI / nodes as f64;
                }
            }
            // exact zeros for odd indices (the integrand is odd in v)
            for (i, ki) in k.iter_mut().enumerate() {
                if i % 2 == 1 {
                    *ki = 0.0;
                }
            }
            Ok(k)
        }
        c => Err(Error::Unsupported(format!("codimension {c}"))),
    }
}

/// Measure-weighted vertex-average quadrature of `integrand` over the mesh.
pub fn integrate_over_level<F>(mesh: &LevelMesh, integrand: F) -> Result<f64>
where
    F: Fn(&Jet2) -> Result<f64>,
{
    let values = mesh.vertices.iter().map(&integrand).collect::<Result<Vec<f64>>>()?;
    let mut total = 0.0;
    for (e, w) in mesh.elements.iter().zip(&mesh.weights) {
        let avg = e.iter().map(|&v| values[v]).sum::<f64>() / e.len() as f64;
        total += w * avg;
    }
    Ok(total)
}

/// `∫ σ_i` over the mesh with the `-∇f` orientation.
pub fn integrate_sigma(mesh: &LevelMesh, i: usize) -> Result<f64> {
    integrate_over_level(mesh, |j| {
        let s = shape_operator(j)?;
        Ok(s.sigma.get(i).copied().unwrap_or(0.0))
    })
}

/// `[∫σ₀, …, ∫σ_d]` over the mesh in one pass (`∫σ₀` is the measure).
pub fn integrate_all_sigma(mesh: &LevelMesh) -> Result<Vec<f64>> {
    let per = integrate_sigma_by_component(mesh)?;
    let mut total = vec![0.0; mesh.dim + 1];
    for c in &per {
        for (t, v) in total.iter_mut().zip(c) {
            *t += v;
        }
    }
    Ok(total)
}

/// [`integrate_all_sigma`] split by component label.
pub fn integrate_sigma_by_component(mesh: &LevelMesh) -> Result<Vec<Vec<f64>>> {
    let d = mesh.dim;
    let sig = mesh
        .vertices
        .iter()
        .map(|j| shape_operator(j).map(|s| s.sigma))
        .collect::<Result<Vec<_>>>()?;
    let mut per = vec![vec![0.0; d + 1]; mesh.components.len()];
    for ((e, w), &lab) in mesh.elements.iter().zip(&mesh.weights).zip(&mesh.labels) {
        for (i, t) in per[lab].iter_mut().enumerate() {
            let avg = e.iter().map(|&v| sig[v][i]).sum::<f64>() / e.len() as f64;
            *t += w * avg;
        }
    }
    Ok(per)
}

/// `Λ_k(Z, Z ∩ B_R) = (1/s_{n-k-1}) ∫ K_{d-k}` for a codimension-one fiber
/// mesh; `k = d` returns the measure.
pub fn manifold_lambda(mesh: &LevelMesh, k: usize) -> Result<f64> {
    let d = mesh.dim;
    if k > d {
        return Ok(0.0);
    }
    if k == d {
        return Ok(mesh.measure());
    }
    let i = d - k;
    if i % 2 == 1 {
        return Ok(0.0);
    }
    let (s, _) = geometric_constants(mesh.ambient - k - 1);
    Ok(2.0 * integrate_sigma(mesh, i)? / s)
}

/// `Λ_k(𝒳, 𝒳 ∩ B_R) = (1/s_{n-k-1}) ∫_{∂𝒳 ∩ B_R} σ_{n-1-k}` with the inward
/// normal, for a sub-level `𝒳 = {f ≤ 0}` meshed along `{f = 0}`.
pub fn boundary_lambda(mesh: &LevelMesh, k: usize) -> Result<f64> {
    let n = mesh.ambient;
    if k >= n {
        return Err(Error::Precondition(format!("boundary Λ_k needs k < n = {n}")));
    }
    if mesh.is_empty() {
        return Ok(0.0);
    }
    let (s, _) = geometric_constants(n - k - 1);
    Ok(integrate_sigma(mesh, n - 1 - k)? / s)
}

/// Monte-Carlo estimate of `vol({f ≤ 0} ∩ B_R)` with its standard error.
pub fn sublevel_volume(f: &Polynomial, r: f64, samples: usize, seed: u64) -> Result<(f64, f64)> {
    if samples < 1000 {
        return Err(Error::Precondition(
            "sublevel_volume needs at least 1000 samples".into(),
        ));
    }
    let n = f.nvars();
    if f.terms().len() == 1 && f.degree() == 0 {
        let c = f.coefficient(&vec![0; n]);
        let (_, b) = geometric_constants(n);
        return Ok(if c > 0.0 {
            (0.0, 0.0)
        } else {
            (b * r.powi(n as i32), 0.0)
        });
    }
    let mut g = rng::substream(seed, &[0x501, n as u64]);
    let mut hits = 0usize;
    for _ in 0..samples {
        let u = rng::unit_vec(&mut g, n);
        let rad = r * g.random::<f64>().powf(1.0 / n as f64);
        let x: Vec<f64> = u.iter().map(|v| v * rad).collect();
        if f.eval(&x) <= 0.0 {
            hits += 1;
        }
    }
    let (_, b) = geometric_constants(n);
    let vol = b * r.powi(n as i32);
    let p = hits as f64 / samples as f64;
    Ok((vol * p, vol * (p * (1.0 - p) / samples as f64).sqrt()))
}

/// Deterministic `vol({f ≤ 0} ∩ B_R)` by exact radial integration along
/// rays (roots of `f` on each ray are isolated exactly) and a product rule
/// over directions. `angular` sets the number of directions per angle.
pub fn sublevel_volume_radial(f: &Polynomial, r: f64, angular: usize) -> Result<f64> {
    let n = f.nvars();
    let radial = |u: &[f64]| -> f64 {
        let c = f.along_line(&vec![0.0; n], u);
        let mut knots = vec![0.0];
        match roots::real_roots(&c, 0.0, r) {
            Ok(ts) => knots.extend(ts.into_iter().filter(|&t| t > 0.0)),
            Err(_) => {
                // a tangent ray: fall back to the simple roots of a nearby
                // perturbation by sampling signs
                let ts = roots::real_roots(&c.iter().map(|v| v * (1.0 + 1e-12)).collect::<Vec<_>>(), 0.0, r)
                    .unwrap_or_default();
                knots.extend(ts);
            }
        }
        knots.push(r);
        let mut s = 0.0;
        for w in knots.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            if roots::horner(&c, mid) <= 0.0 {
                s += (w[1].powi(n as i32) - w[0].powi(n as i32)) / n as f64;
            }
        }
        s
    };
    match n {
        2 => {
            let m = angular.max(8);
            let dth = 2.0 * std::f64::consts::PI / m as f64;
            Ok((0..m)
                .map(|k| {
                    let th = (k as f64 + 0.5) * dth + 0.1234;
                    radial(&[th.cos(), th.sin()]) * dth
                })
                .sum())
        }
        3 => {
            let m = angular.max(8);
            let dphi = 2.0 * std::f64::consts::PI / (2 * m) as f64;
            let dz = 2.0 / m as f64;
            let mut total = 0.0;
            for a in 0..m {
                // equal-area bands in z = cos θ
                let z = -1.0 + (a as f64 + 0.5) * dz;
                let rho = (1.0 - z * z).sqrt();
                for b in 0..2 * m {
                    let phi = (b as f64 + 0.5) * dphi + 0.1234;
                    total += radial(&[rho * phi.cos(), rho * phi.sin(), z]) * dz * dphi;
                }
            }
            Ok(total)
        }
        _ => Err(Error::Unsupported(format!("radial volume in dimension {n}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{parse_polynomial, var_names};
    use std::f64::consts::PI;

    fn p(text: &str, n: usize) -> Polynomial {
        parse_polynomial(text, &var_names("x", n)).unwrap()
    }

    #[test]
    fn circle_is_one_loop() {
        let m = trace_curve(&p("x1^2 + x2^2 - 1", 2), 5.0, 0.05).unwrap();
        assert_eq!(m.components.len(), 1);
        assert!(m.components[0].closed);
        assert!((m.measure() - 2.0 * PI).abs() < 1e-4, "{}", m.measure());
        assert_eq!(m.euler_characteristic(), 0);
        for v in &m.vertices {
            assert!(v.value.abs() <= 1e-8 * (1.0 + v.gradient_norm()));
        }
    }

    #[test]
    fn hyperbola_arcs_match_graph_quadrature() {
        let r = 10.0;
        let m = trace_curve(&p("x1*x2 - 1", 2), r, 0.05).unwrap();
        assert_eq!(m.components.len(), 2);
        assert!(m.components.iter().all(|c| !c.closed));
        // oracle: Simpson on x2 = 1/x1 between the two circle crossings
        let a = ((r * r - (r.powi(4) - 4.0).sqrt()) / 2.0).sqrt();
        let b = 1.0 / a;
        let g = |x: f64| (1.0 + 1.0 / x.powi(4)).sqrt();
        let k = 200_000;
        let hh = (b - a) / k as f64;
        let mut s = g(a) + g(b);
        for i in 1..k {
            s += g(a + i as f64 * hh) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let oracle = 2.0 * s * hh / 3.0;
        assert!(
            (m.measure() - oracle).abs() < 0.01 * oracle,
            "{} vs {oracle}",
            m.measure()
        );
        assert_eq!(m.euler_characteristic(), 2);
    }

    #[test]
    fn empty_and_singular_levels() {
        assert!(trace_curve(&p("x1^2 + x2^2 + 1", 2), 5.0, 0.05).unwrap().is_empty());
        assert!(matches!(
            trace_curve(&p("x1*x2", 2), 5.0, 0.05),
            Err(Error::SingularPoint { .. })
        ));
    }

    #[test]
    fn broughton_zero_fiber_components() {
        let m = trace_curve(&p("x1 + x1^2*x2", 2), 64.0, 0.05).unwrap();
        assert_eq!(m.components.len(), 3);
        assert_eq!(m.euler_characteristic(), 3);
    }

    #[test]
    fn sphere_and_disk_areas() {
        let s = mesh_surface(&p("x1^2 + x2^2 + x3^2 - 1", 3), 2.0, 64).unwrap();
        assert!((s.measure() - 4.0 * PI).abs() < 0.01 * 4.0 * PI, "{}", s.measure());
        assert_eq!(s.euler_characteristic(), 2);
        let d = mesh_surface(&p("x3", 3), 1.0, 64).unwrap();
        assert!((d.measure() - PI).abs() < 0.01 * PI, "{}", d.measure());
        assert_eq!(d.euler_characteristic(), 1);
        assert!(mesh_surface(&p("x1^2 + x2^2 + x3^2 + 1", 3), 2.0, 16)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn multiscale_shells() {
        // a unit sphere is below the cell size of a 32³ grid over B_32
        let f = p("x1^2 + x2^2 + x3^2 - 1", 3);
        let s = mesh_surface_multiscale(&f, 32.0, 32, 4.0).unwrap();
        assert!((s.measure() - 4.0 * PI).abs() < 0.03 * 4.0 * PI, "{}", s.measure());
        assert_eq!(s.components.len(), 1);
        // a plane crosses every seam: one component, area π R²
        let pl = mesh_surface_multiscale(&p("x3 - 0.1", 3), 16.0, 32, 4.0).unwrap();
        let want = PI * (256.0 - 0.01);
        assert!((pl.measure() - want).abs() < 0.01 * want, "{}", pl.measure());
        assert_eq!(pl.components.len(), 1);
        assert!(pl.boundary.iter().filter(|&&b| b).count() > 0);
    }

    #[test]
    fn curvature_examples() {
        let c = p("x1^2 + x2^2 - 1", 2);
        let s = shape_operator(&c.jet(&[1.0, 0.0]).unwrap()).unwrap();
        assert!((s.principal[0] - 1.0).abs() < 1e-14);
        assert!((s.sigma[1] - 1.0).abs() < 1e-14);
        assert_eq!(lk_curvatures(&s, 1).unwrap(), vec![2.0, 0.0]);

        let r = 2.5;
        let sph = p("x1^2 + x2^2 + x3^2 - 6.25", 3);
        let s = shape_operator(&sph.jet(&[0.0, 0.0, r]).unwrap()).unwrap();
        assert!(s.principal.iter().all(|k| (k - 1.0 / r).abs() < 1e-14));
        assert!((s.sigma[1] - 2.0 / r).abs() < 1e-14);
        assert!((s.sigma[2] - 1.0 / (r * r)).abs() < 1e-14);
        let k = lk_curvatures(&s, 1).unwrap();
        assert!((k[2] - 2.0 / (r * r)).abs() < 1e-14 && k[1] == 0.0 && k[0] == 2.0);

        let plane = p("x3", 3);
        let s = shape_operator(&plane.jet(&[0.3, 0.2, 0.0]).unwrap()).unwrap();
        assert_eq!(s.sigma, vec![1.0, 0.0, 0.0]);

        let par = p("x2 - x1^2", 2);
        let s = shape_operator(&par.jet(&[0.0, 0.0]).unwrap()).unwrap();
        assert!((s.sigma[1] + 2.0).abs() < 1e-6);
    }

    #[test]
    fn line_in_space() {
        let a = p("x1", 3);
        let b = p("x2", 3);
        let x = [0.0, 0.0, 0.7];
        let s = space_curve_sample(&a.jet(&x).unwrap(), &b.jet(&x).unwrap()).unwrap();
        assert!((s.lk[0] - 2.0 * PI).abs() < 1e-12);
        assert_eq!(s.lk[1], 0.0);
    }

    #[test]
    fn circle_total_curvature_and_lambda() {
        let m = trace_curve(&p("x1^2 + x2^2 - 1", 2), 2.0, 0.05).unwrap();
        let total = integrate_sigma(&m, 1).unwrap();
        assert!((total - 2.0 * PI).abs() < 0.01 * 2.0 * PI);
        assert!((boundary_lambda(&m, 0).unwrap() - 1.0).abs() < 1e-3);
        let empty = LevelMesh::empty(1, 2, 1.0);
        assert_eq!(integrate_over_level(&empty, |_| Ok(1.0)).unwrap(), 0.0);
    }

    #[test]
    fn half_plane_boundary_lambdas() {
        let r = 7.0;
        let m = trace_curve(&p("x1", 2), r, 0.05).unwrap();
        assert!(boundary_lambda(&m, 0).unwrap().abs() < 1e-12);
        assert!((boundary_lambda(&m, 1).unwrap() - r).abs() < 1e-9);
    }

    #[test]
    fn volumes() {
        let (v, e) = sublevel_volume(&p("x1", 2), 1.0, 20_000, 3).unwrap();
        assert!((v - PI / 2.0).abs() <= 3.0 * e);
        let (v, e) = sublevel_volume(&p("x1^2 + x2^2 - 1", 2), 2.0, 20_000, 4).unwrap();
        assert!((v - PI).abs() <= 3.0 * e);
        assert_eq!(sublevel_volume(&p("1", 2), 2.0, 1000, 1).unwrap(), (0.0, 0.0));
        let v = sublevel_volume_radial(&p("x1^2 + x2^2 - 1", 2), 2.0, 512).unwrap();
        assert!((v - PI).abs() < 1e-9);
        let v = sublevel_volume_radial(&p("x1^2 + x2^2 + x3^2 - 1", 3), 2.0, 64).unwrap();
        assert!((v - 4.0 * PI / 3.0).abs() < 1e-9);
    }

    #[test]
    fn symmetric_functions_reexpand() {
        let k = [0.5, -2.0, 3.0];
        let s = elementary_symmetric(&k);
        // roots of t³ - σ₁t² + σ₂t - σ₃ recover k
        for &ki in &k {
            let v = ki.powi(3) - s[1] * ki * ki + s[2] * ki - s[3];
            assert!(v.abs() < 1e-12);
        }
    }
}
