//! Rabier numbers of linear maps, the fiberwise Rabier number of a family,
//! the Malgrange functional, and the trivialization flow.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm, Mat};
use crate::ode::{self, OdeFailure, OdeOptions};
use crate::rng;
use crate::spec::{FamilyKind, FamilySpec};

/// Scaled threshold below which a map counts as not surjective.
pub const SURJECTIVITY_TOL: f64 = 1e-9;

/// A linear map `ℝᵖ → ℝ^q` stored as a `q × p` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMap {
    mat: Mat,
}

impl LinearMap {
    pub fn new(mat: Mat) -> Result<Self> {
        if !mat.is_finite() {
            return Err(Error::Precondition("matrix has non-finite entries".into()));
        }
        Ok(Self { mat })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() || rows.iter().any(|r| r.len() != rows[0].len() || r.is_empty()) {
            return Err(Error::Precondition(
                "matrix rows must be non-empty and of equal length".into(),
            ));
        }
        Self::new(Mat::from_rows(rows))
    }

    /// Target dimension.
    pub fn q(&self) -> usize {
        self.mat.rows()
    }

    /// Source dimension.
    pub fn p(&self) -> usize {
        self.mat.cols()
    }

    pub fn as_mat(&self) -> &Mat {
        &self.mat
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { mat: self.mat.scale(s) }
    }

    /// `A` restricted to the subspace spanned by the orthonormal `basis`.
    pub fn restricted(&self, basis: &[Vec<f64>]) -> Self {
        let b = Mat::from_cols(basis, self.p());
        Self {
            mat: self.mat.matmul(&b),
        }
    }
}

/// `ν(A) = min_{|φ|=1} |Aᵀφ|`, the smallest singular value of a map with
/// `q ≤ p`; zero when `q > p`.
pub fn rabier_number(a: &LinearMap) -> f64 {
    let (q, p) = (a.q(), a.p());
    if q > p {
        return 0.0;
    }
    let m = a.as_mat();
    match q {
        1 => norm(m.row(0)),
        2 => {
            let (r0, r1) = (m.row(0), m.row(1));
            let (x, y, z) = (dot(r0, r0), dot(r0, r1), dot(r1, r1));
            let half_tr = 0.5 * (x + z);
            let disc = (0.25 * (x - z) * (x - z) + y * y).sqrt();
            let big = half_tr + disc;
            if big == 0.0 {
                return 0.0;
            }
            // det / λmax keeps the small eigenvalue accurate
            let det = (x * z - y * y).max(0.0);
            (det / big).sqrt()
        }
        _ => linalg::row_singular_values(m)[0],
    }
}

pub fn is_surjective(a: &LinearMap) -> bool {
    let s = a.as_mat().max_row_norm();
    s > 0.0 && rabier_number(a) / s > SURJECTIVITY_TOL
}

/// The three characterizations of `ν(A)` evaluated independently.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivalenceReport {
    /// `inf_{|φ|=1} |Aᵀφ|` by multistart minimization on the sphere.
    pub infimum: f64,
    /// Radius of the largest ball inscribed in `A(B^p)`, from its support
    /// function.
    pub inscribed_radius: f64,
    /// Distance to the rank-deficient maps (smallest singular value).
    pub distance_to_singular: f64,
    pub discrepancy: f64,
}

/// Minimizes a quadratic form `φ ↦ eval(φ)` (evaluated on unnormalized
/// vectors) over the unit sphere by locally optimal block iteration: each
/// step takes the exact minimum over span{φ, projected gradient, previous
/// step}, with the reduced form assembled by polarization.
fn min_quadratic_on_sphere(eval: &dyn Fn(&[f64]) -> f64, start: &[f64]) -> f64 {
    let q = start.len();
    let mut phi = linalg::normalized(start);
    let mut prev: Option<Vec<f64>> = None;
    let mut best = eval(&phi);
    if q == 1 {
        return best.max(0.0);
    }
    for _ in 0..500 {
        // gradient of a quadratic form is linear: exact by central differences
        let h = 1.0;
        let mut g = vec![0.0; q];
        for i in 0..q {
            let mut a = phi.clone();
            let mut b = phi.clone();
            a[i] += h;
            b[i] -= h;
            g[i] = (eval(&a) - eval(&b)) / (2.0 * h);
        }
        let mut cands = vec![phi.clone(), g];
        if let Some(p) = &prev {
            cands.push(p.clone());
        }
        let basis = linalg::orthonormalize(&cands, 1e-10);
        if basis.len() < 2 {
            break;
        }
        let k = basis.len();
        let mut m = Mat::zeros(k, k);
        let diag: Vec<f64> = basis.iter().map(|b| eval(b)).collect();
        for i in 0..k {
            m[(i, i)] = diag[i];
            for j in (i + 1)..k {
                let s: Vec<f64> = basis[i].iter().zip(&basis[j]).map(|(a, b)| a + b).collect();
                let v = 0.5 * (eval(&s) - diag[i] - diag[j]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        let (vals, vecs) = linalg::sym_eigen(&m);
        let mut next = vec![0.0; q];
        for (i, b) in basis.iter().enumerate() {
            linalg::axpy(vecs[(i, 0)], b, &mut next);
        }
        let next = linalg::normalized(&next);
        let val = eval(&next);
        let step: Vec<f64> = next.iter().zip(&phi).map(|(a, b)| a - b).collect();
        let improved = best - val;
        phi = next;
        prev = Some(step);
        if val < best {
            best = val;
        }
        if improved <= 1e-15 * vals[k - 1].abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    best.max(0.0)
}

fn sphere_starts(q: usize, density: usize, salt: u64) -> Vec<Vec<f64>> {
    let mut starts = Vec::new();
    for i in 0..q {
        let mut e = vec![0.0; q];
        e[i] = 1.0;
        starts.push(e);
    }
    let mut r = rng::substream(0x5eed ^ salt, &[q as u64, density as u64]);
    for _ in 0..density {
        starts.push(rng::unit_vec(&mut r, q));
    }
    starts
}

/// Support function of the image ellipsoid `A(B^p)` in direction `φ`:
/// `max_{|x| ≤ 1} ⟨Ax, φ⟩`, by ascent over `x` from the best sampled point.
fn support_function(a: &Mat, phi: &[f64], samples: &[Vec<f64>]) -> f64 {
    let value = |x: &[f64]| dot(&a.matvec(x), phi);
    let mut x = samples
        .iter()
        .max_by(|u, v| value(u).total_cmp(&value(v)))
        .cloned()
        .unwrap_or_else(|| vec![1.0; a.cols()]);
    let mut best = value(&x);
    for _ in 0..50 {
        // gradient of x ↦ ⟨Ax, φ⟩ is Aᵀφ
        let g: Vec<f64> = (0..a.cols())
            .map(|j| (0..a.rows()).map(|i| a[(i, j)] * phi[i]).sum())
            .collect();
        let gn = norm(&g);
        if gn == 0.0 {
            return 0.0;
        }
        let mut y = x.clone();
        linalg::axpy(1.0 / gn, &g, &mut y);
        let y = linalg::normalized(&y);
        let v = value(&y);
        if v <= best * (1.0 + 1e-15) {
            break;
        }
        x = y;
        best = v;
    }
    best.max(0.0)
}

/// Evaluates the three equivalent characterizations of `ν(A)` and their
/// largest pairwise discrepancy. `density` sets the number of random
/// starts on the sphere.
pub fn check_rabier_equivalences(a: &LinearMap, density: usize) -> Result<EquivalenceReport> {
    let (q, p) = (a.q(), a.p());
    if q > p || p > 8 {
        return Err(Error::Precondition("equivalence check needs q ≤ p ≤ 8".into()));
    }
    let m = a.as_mat();
    let at_phi = |phi: &[f64]| -> f64 {
        let mut s = 0.0;
        for j in 0..p {
            let v: f64 = (0..q).map(|i| m[(i, j)] * phi[i]).sum();
            s += v * v;
        }
        s
    };
    let starts = sphere_starts(q, density, 1);
    let infimum = starts
        .iter()
        .map(|s| min_quadratic_on_sphere(&at_phi, s))
        .fold(f64::INFINITY, f64::min)
        .sqrt();

    let xs = sphere_starts(p, density.max(16), 2);
    let support_sq = |phi: &[f64]| -> f64 {
        // the support function is positively homogeneous in φ
        let r = norm(phi);
        if r == 0.0 {
            return 0.0;
        }
        let u: Vec<f64> = phi.iter().map(|v| v / r).collect();
        let h = support_function(m, &u, &xs) * r;
        h * h
    };
    let inscribed_radius = starts
        .iter()
        .map(|s| min_quadratic_on_sphere(&support_sq, s))
        .fold(f64::INFINITY, f64::min)
        .sqrt();

    let dm = DMatrix::from_fn(q, p, |i, j| m[(i, j)]);
    let distance_to_singular = dm.singular_values().iter().copied().fold(f64::INFINITY, f64::min);

    let v = [infimum, inscribed_radius, distance_to_singular];
    let mut discrepancy = 0.0f64;
    for i in 0..3 {
        for j in (i + 1)..3 {
            discrepancy = discrepancy.max((v[i] - v[j]).abs());
        }
    }
    Ok(EquivalenceReport {
        infimum,
        inscribed_radius,
        distance_to_singular,
        discrepancy,
    })
}

/// Rabier number of the projection of `graph(A)` onto the target factor:
/// `ν(A)/√(1+ν(A)²)`.
pub fn nu_of_graph_projection(a: &LinearMap) -> f64 {
    let nu = rabier_number(a);
    nu / (1.0 + nu * nu).sqrt()
}

/// Norm of the component of the unit vector `u` orthogonal to span(`e`)
/// (`e` orthonormal).
pub fn delta_distance(u: &[f64], e: &[Vec<f64>]) -> Result<f64> {
    let nu = norm(u);
    if (nu - 1.0).abs() > 1e-10 {
        return Err(Error::NonUnit { norm: nu });
    }
    let mut r = u.to_vec();
    for v in e {
        let c = dot(&r, v);
        linalg::axpy(-c, v, &mut r);
    }
    Ok(norm(&r).clamp(0.0, 1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TangentFrame {
    pub point: Vec<f64>,
    /// Orthonormal basis of `T_wW` (`d` vectors in `ℝⁿ⁺ˢ`).
    pub tangent: Vec<Vec<f64>>,
    /// Orthonormal basis of the normal space.
    pub normal: Vec<Vec<f64>>,
}

impl TangentFrame {
    /// The differential of `φ(x, y) = y` on `T_wW`, as an `s × d` map.
    pub fn projection_map(&self, n: usize) -> LinearMap {
        let s = self.point.len() - n;
        let rows: Vec<Vec<f64>> = (0..s)
            .map(|i| self.tangent.iter().map(|t| t[n + i]).collect())
            .collect();
        LinearMap {
            mat: Mat::from_rows(&rows),
        }
    }
}

/// Jacobian rows of the map-graph polynomials at `x`.
pub fn graph_jacobian(spec: &FamilySpec, x: &[f64]) -> Result<Mat> {
    let rows = spec
        .polys
        .iter()
        .map(|g| g.jet(x).map(|j| j.gradient))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(Mat::from_rows(&rows))
}

/// Orthonormal tangent and normal frames of `W` at `w`.
pub fn fiber_tangent_frame(spec: &FamilySpec, w: &[f64], tol: f64) -> Result<TangentFrame> {
    let (n, s) = (spec.n, spec.s);
    if w.len() != n + s {
        return Err(crate::PolyError::DimensionMismatch {
            expected: n + s,
            found: w.len(),
        }
        .into());
    }
    match spec.kind {
        FamilyKind::MapGraph => {
            let x = &w[..n];
            let residual = spec
                .polys
                .iter()
                .zip(&w[n..])
                .map(|(g, y)| (g.eval(x) - y).abs())
                .fold(0.0, f64::max);
            if residual > tol {
                return Err(Error::OffSet { residual });
            }
            let dg = graph_jacobian(spec, x)?;
            let cands: Vec<Vec<f64>> = (0..n)
                .map(|j| {
                    let mut v = vec![0.0; n + s];
                    v[j] = 1.0;
                    for i in 0..s {
                        v[n + i] = dg[(i, j)];
                    }
                    v
                })
                .collect();
            let tangent = linalg::orthonormalize(&cands, 1e-14);
            let normal = linalg::orthogonal_complement(&tangent, n + s);
            Ok(TangentFrame {
                point: w.to_vec(),
                tangent,
                normal,
            })
        }
        FamilyKind::HypersurfaceFamily => {
            let jet = spec.polys[0].jet(w)?;
            if jet.value.abs() > tol {
                return Err(Error::OffSet {
                    residual: jet.value.abs(),
                });
            }
            let gn = jet.gradient_norm();
            if gn < 1e-9 {
                return Err(Error::SingularPoint {
                    point: w.to_vec(),
                    gradient_norm: gn,
                });
            }
            Ok(TangentFrame {
                point: w.to_vec(),
                tangent: linalg::hyperplane_basis(&jet.gradient),
                normal: vec![linalg::normalized(&jet.gradient)],
            })
        }
    }
}

const ON_SET_TOL: f64 = 1e-6;

fn on_set_tol(spec: &FamilySpec, w: &[f64]) -> f64 {
    match spec.kind {
        FamilyKind::MapGraph => ON_SET_TOL * (1.0 + norm(w)).powi(spec.polys[0].degree() as i32),
        FamilyKind::HypersurfaceFamily => ON_SET_TOL * (1.0 + norm(w)).powi(spec.polys[0].degree() as i32),
    }
}

/// `ν^φ(w)`: Rabier number of `D_wφ: T_wW → ℝˢ`.
pub fn fiber_rabier(spec: &FamilySpec, w: &[f64]) -> Result<f64> {
    let frame = fiber_tangent_frame(spec, w, on_set_tol(spec, w))?;
    Ok(rabier_number(&frame.projection_map(spec.n)))
}

/// `M(w) = (1+|w|)·ν^φ(w)`.
pub fn malgrange_functional(spec: &FamilySpec, w: &[f64]) -> Result<f64> {
    Ok((1.0 + norm(w)) * fiber_rabier(spec, w)?)
}

/// Malgrange functional of a map-graph family at `w = (x, G(x))`, using the
/// closed form for the graph projection (no frame construction).
pub fn malgrange_at_x(spec: &FamilySpec, x: &[f64]) -> Result<f64> {
    let dg = LinearMap::new(graph_jacobian(spec, x)?)?;
    let w = spec.embed(x);
    Ok((1.0 + norm(&w)) * nu_of_graph_projection(&dg))
}

/// `δ(w/|w|, T_w W_{φ(w)})`: how far the secant direction is from the
/// tangent space of the fiber through `w`.
pub fn spherical_deviation(spec: &FamilySpec, w: &[f64]) -> Result<f64> {
    let frame = fiber_tangent_frame(spec, w, on_set_tol(spec, w))?;
    let proj = frame.projection_map(spec.n);
    if !is_surjective(&proj) {
        return Err(Error::NotSurjective {
            nu: rabier_number(&proj),
        });
    }
    let ker = linalg::null_space(proj.as_mat());
    let d = frame.tangent.len();
    let fiber: Vec<Vec<f64>> = ker
        .iter()
        .map(|k| {
            let mut v = vec![0.0; w.len()];
            for j in 0..d {
                linalg::axpy(k[j], &frame.tangent[j], &mut v);
            }
            v
        })
        .collect();
    let r = norm(w);
    if r == 0.0 {
        return Err(Error::Precondition("w must be non-zero".into()));
    }
    let u: Vec<f64> = w.iter().map(|v| v / r).collect();
    delta_distance(&u, &fiber)
}

/// `V = Aᵀ(AAᵀ)⁻¹`.
pub fn right_inverse(a: &LinearMap) -> Result<LinearMap> {
    if !is_surjective(a) {
        return Err(Error::NotSurjective { nu: rabier_number(a) });
    }
    let m = a.as_mat();
    let aat = m.matmul(&m.transpose());
    let q = a.q();
    let mut inv_cols = Vec::with_capacity(q);
    for i in 0..q {
        let mut e = vec![0.0; q];
        e[i] = 1.0;
        let c = linalg::solve(&aat, &e).ok_or(Error::NotSurjective { nu: rabier_number(a) })?;
        inv_cols.push(c);
    }
    let inv = Mat::from_cols(&inv_cols, q);
    Ok(LinearMap {
        mat: m.transpose().matmul(&inv),
    })
}

#[derive(Clone, Copy, Debug)]
pub struct FlowOptions {
    pub ode: OdeOptions,
    /// Flow-identity tolerance `|G(Ψ(t)) - c - t(y-c)|`.
    pub tolerance: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            ode: OdeOptions::default(),
            tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowResult {
    pub start: Vec<f64>,
    pub endpoint: Vec<f64>,
    pub c: Vec<f64>,
    pub target: Vec<f64>,
    /// Largest flow-identity residual over accepted steps.
    pub max_residual: f64,
    pub accepted: usize,
    pub rejected: usize,
    pub corrections: usize,
    /// `(t, x)` at each accepted step.
    pub trajectory: Vec<(f64, Vec<f64>)>,
}

fn blocked(t: f64, reason: impl Into<String>) -> Error {
    Error::FlowBlocked {
        t,
        reason: reason.into(),
    }
}

/// Transports `x0` from the fiber over `c = G(x0)` to the fiber over `y`
/// along `ẋ = V(x)(y - c)`, keeping `G(Ψ(t)) = c + t(y-c)` with a Newton
/// re-projection whenever the identity drifts past half the tolerance.
pub fn transport_fiber(spec: &FamilySpec, x0: &[f64], y: &[f64], opts: &FlowOptions) -> Result<FlowResult> {
    if spec.kind != FamilyKind::MapGraph {
        return Err(Error::Unsupported("transport needs a map-graph family".into()));
    }
    if x0.len() != spec.n || y.len() != spec.s {
        return Err(Error::Precondition("start point or target has the wrong length".into()));
    }
    let g_at = |x: &[f64]| -> Vec<f64> { spec.polys.iter().map(|g| g.eval(x)).collect() };
    let c = g_at(x0);
    let dir: Vec<f64> = y.iter().zip(&c).map(|(a, b)| a - b).collect();
    let level = |t: f64| -> Vec<f64> { c.iter().zip(&dir).map(|(ci, di)| ci + t * di).collect() };
    let residual = |x: &[f64], t: f64| -> Vec<f64> { g_at(x).iter().zip(level(t)).map(|(g, l)| g - l).collect() };
    let vfield = |t: f64, x: &[f64]| -> Result<Vec<f64>> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(blocked(t, "state left the finite range"));
        }
        let a = LinearMap::new(graph_jacobian(spec, x)?)?;
        let v = right_inverse(&a).map_err(|_| blocked(t, "differential lost rank"))?;
        Ok(v.as_mat().matvec(&dir))
    };

    let mut max_residual = 0.0f64;
    let mut corrections = 0usize;
    let mut trajectory = vec![(0.0, x0.to_vec())];
    let tol = opts.tolerance;
    let on_accept = |t: f64, x: &mut Vec<f64>| -> Result<()> {
        let mut r = norm(&residual(x, t));
        let mut tries = 0;
        while r > 0.5 * tol {
            if tries == 4 {
                return Err(blocked(t, format!("re-projection failed (residual {r:.2e})")));
            }
            let a = LinearMap::new(graph_jacobian(spec, x)?)?;
            let v = right_inverse(&a).map_err(|_| blocked(t, "differential lost rank"))?;
            let dx = v.as_mat().matvec(&residual(x, t));
            linalg::axpy(-1.0, &dx, x);
            corrections += 1;
            tries += 1;
            r = norm(&residual(x, t));
        }
        max_residual = max_residual.max(r);
        trajectory.push((t, x.clone()));
        Ok(())
    };
    let out = ode::integrate(vfield, 0.0, 1.0, x0, &opts.ode, on_accept);
    let (endpoint, stats) = match out {
        Ok(v) => v,
        Err(OdeFailure::Rhs { error, .. }) => return Err(error),
        Err(OdeFailure::StepUnderflow { t }) => return Err(blocked(t, "step size underflow")),
        Err(OdeFailure::TooManySteps { t }) => return Err(blocked(t, "step budget exhausted")),
    };
    Ok(FlowResult {
        start: x0.to_vec(),
        endpoint,
        c,
        target: y.to_vec(),
        max_residual,
        accepted: stats.accepted,
        rejected: stats.rejected,
        corrections,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn map(rows: &[&[f64]]) -> LinearMap {
        LinearMap::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn rabier_examples() {
        assert!((rabier_number(&map(&[&[1.0, 0.0], &[0.0, 1.0]])) - 1.0).abs() < 1e-15);
        assert!((rabier_number(&map(&[&[3.0, 4.0]])) - 5.0).abs() < 1e-15);
        assert_eq!(rabier_number(&map(&[&[1.0, 2.0], &[2.0, 4.0]])), 0.0);
        assert!((rabier_number(&map(&[&[2.0, 0.0, 0.0], &[0.0, 3.0, 0.0]])) - 2.0).abs() < 1e-15);
        assert_eq!(rabier_number(&map(&[&[1.0], &[1.0]])), 0.0);
        let three = map(&[&[1.0, 0.0, 0.0], &[0.0, 2.0, 0.0], &[0.0, 0.0, 0.5]]);
        assert!((rabier_number(&three) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn rabier_matches_dense_circle_grid() {
        // independent check: brute force over φ = (cos t, sin t)
        let a = map(&[&[2.0, 0.0, 0.0], &[0.0, 3.0, 0.0]]);
        let m = a.as_mat();
        let brute = (0..20000)
            .map(|k| {
                let t = k as f64 * std::f64::consts::PI / 20000.0;
                let phi = [t.cos(), t.sin()];
                (0..3)
                    .map(|j| (m[(0, j)] * phi[0] + m[(1, j)] * phi[1]).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        assert!((brute - rabier_number(&a)).abs() < 1e-6);
    }

    #[test]
    fn equivalence_examples() {
        let r = check_rabier_equivalences(&map(&[&[1.0, 0.0], &[0.0, 1.0]]), 16).unwrap();
        assert!(r.discrepancy <= 1e-6, "{r:?}");
        let r = check_rabier_equivalences(&map(&[&[1.0, 1.0], &[1.0, 1.0]]), 16).unwrap();
        assert!(r.discrepancy <= 1e-6 && r.infimum < 1e-6, "{r:?}");
    }

    #[test]
    fn graph_projection_values() {
        assert_eq!(nu_of_graph_projection(&map(&[&[0.0, 0.0]])), 0.0);
        assert!((nu_of_graph_projection(&map(&[&[1.0, 0.0]])) - FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn delta_examples() {
        let e1 = vec![1.0, 0.0];
        let e2 = vec![0.0, 1.0];
        assert_eq!(delta_distance(&e1, std::slice::from_ref(&e1)).unwrap(), 0.0);
        assert_eq!(delta_distance(&e1, &[e2]).unwrap(), 1.0);
        let u = [FRAC_1_SQRT_2, FRAC_1_SQRT_2];
        assert!((delta_distance(&u, &[e1]).unwrap() - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(matches!(delta_distance(&[2.0, 0.0], &[]), Err(Error::NonUnit { .. })));
    }

    #[test]
    fn frames() {
        let spec = FamilySpec::hypersurface(2, 1, "x1*x2 - y1").unwrap();
        let f = fiber_tangent_frame(&spec, &[1.0, 1.0, 1.0], 1e-9).unwrap();
        let k = 1.0 / 3.0f64.sqrt();
        assert!(f.normal[0].iter().zip([k, k, -k]).all(|(a, b)| (a - b).abs() < 1e-15));
        for t in &f.tangent {
            assert!(dot(t, &[1.0, 1.0, -1.0]).abs() < 1e-14);
        }
        let g = FamilySpec::map_graph(2, &["x1"]).unwrap();
        let f = fiber_tangent_frame(&g, &[0.0, 0.0, 0.0], 1e-9).unwrap();
        assert!((f.tangent[0][0] - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((f.tangent[0][2] - FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(f.tangent[1], vec![0.0, 1.0, 0.0]);
        let sing = FamilySpec::hypersurface(2, 1, "x1^2 + x2^2 - y1^2").unwrap();
        assert!(matches!(
            fiber_tangent_frame(&sing, &[0.0, 0.0, 0.0], 1e-9),
            Err(Error::SingularPoint { .. })
        ));
    }

    #[test]
    fn fiber_rabier_examples() {
        let g = FamilySpec::map_graph(2, &["x1"]).unwrap();
        assert!((fiber_rabier(&g, &[3.0, -2.0, 3.0]).unwrap() - FRAC_1_SQRT_2).abs() < 1e-12);
        let h = FamilySpec::hypersurface(2, 1, "y1 - x1").unwrap();
        assert!((fiber_rabier(&h, &[0.5, 7.0, 0.5]).unwrap() - FRAC_1_SQRT_2).abs() < 1e-12);
        let c = FamilySpec::map_graph(2, &["x1^2 + x2^2"]).unwrap();
        let r: f64 = 1.7;
        let x = [r * 0.6, r * 0.8];
        let w = c.embed(&x);
        let want = 2.0 * r / (1.0 + 4.0 * r * r).sqrt();
        assert!((fiber_rabier(&c, &w).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn malgrange_examples() {
        let g = FamilySpec::map_graph(2, &["x1"]).unwrap();
        assert!((malgrange_functional(&g, &[0.0, 0.0, 0.0]).unwrap() - FRAC_1_SQRT_2).abs() < 1e-14);
        let b = FamilySpec::map_graph(2, &["x1 + x1^2*x2"]).unwrap();
        for t in [10.0, 100.0, 1000.0] {
            let x = [-1.0 / (2.0 * t), t];
            let m = malgrange_functional(&b, &b.embed(&x)).unwrap();
            assert!((m * 4.0 * t - 1.0).abs() < 1.5 / t, "t = {t}: {m}");
            assert!((malgrange_at_x(&b, &x).unwrap() - m).abs() < 1e-10 * m.max(1.0));
        }
    }

    #[test]
    fn spherical_deviation_examples() {
        let g = FamilySpec::map_graph(2, &["x1"]).unwrap();
        assert!(spherical_deviation(&g, &[0.0, 50.0, 0.0]).unwrap() < 1e-12);
        let b = FamilySpec::map_graph(2, &["x1 + x1^2*x2"]).unwrap();
        // points of the fiber over 1 far out along x2 → +∞: x1 ≈ 1 - x1²x2
        let mut last = f64::INFINITY;
        for r in [10.0f64, 100.0, 1000.0] {
            // on G = 1 with x2 = r: x1²r + x1 - 1 = 0
            let x1 = (-1.0 + (1.0f64 + 4.0 * r).sqrt()) / (2.0 * r);
            let d = spherical_deviation(&b, &b.embed(&[x1, r])).unwrap();
            assert!(d < last);
            last = d;
        }
        assert!(last < 0.05);
    }

    #[test]
    fn right_inverse_examples() {
        let v = right_inverse(&map(&[&[3.0, 4.0]])).unwrap();
        assert!((v.as_mat()[(0, 0)] - 0.12).abs() < 1e-15);
        assert!((v.as_mat()[(1, 0)] - 0.16).abs() < 1e-15);
        assert!(right_inverse(&map(&[&[1.0, 2.0], &[2.0, 4.0]])).is_err());
    }

    #[test]
    fn flows() {
        let g = FamilySpec::map_graph(2, &["x1"]).unwrap();
        let r = transport_fiber(&g, &[0.0, 5.0], &[2.0], &FlowOptions::default()).unwrap();
        assert!((r.endpoint[0] - 2.0).abs() < 1e-9 && (r.endpoint[1] - 5.0).abs() < 1e-9);

        let c = FamilySpec::map_graph(2, &["x1^2 + x2^2"]).unwrap();
        let x0 = [0.6, 0.8];
        let r = transport_fiber(&c, &x0, &[4.0], &FlowOptions::default()).unwrap();
        assert!((norm(&r.endpoint) - 2.0).abs() < 1e-6);
        assert!((r.endpoint[0] / r.endpoint[1] - 0.75).abs() < 1e-9);
        for (t, x) in &r.trajectory {
            assert!((norm(x) - (1.0 + 3.0 * t).sqrt()).abs() < 1e-6);
        }
        assert!(r.max_residual <= 1e-6);
    }
}
