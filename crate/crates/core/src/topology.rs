//! Links at infinity and their Euler characteristics, uniform sampling of
//! linear sections, the sectional averages `χ_l∞`, and Euler
//! characteristics of ball-clipped sets.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{mesh_surface, trace_curve};
use crate::linalg::{self, norm};
use crate::par;
use crate::poly::{restrict_to_plane, Polynomial};
use crate::rng;
use crate::roots;
use crate::spec::RadiusSchedule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SetKind {
    /// `{f = 0}`
    Fiber,
    /// `{f ≤ 0}`
    Sublevel,
}

impl SetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SetKind::Fiber => "fiber",
            SetKind::Sublevel => "sublevel",
        }
    }
}

/// A fiber or sub-level of one polynomial.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraicSet {
    pub poly: Polynomial,
    pub kind: SetKind,
}

impl AlgebraicSet {
    pub fn fiber(poly: Polynomial) -> Self {
        Self {
            poly,
            kind: SetKind::Fiber,
        }
    }

    pub fn sublevel(poly: Polynomial) -> Self {
        Self {
            poly,
            kind: SetKind::Sublevel,
        }
    }

    pub fn ambient(&self) -> usize {
        self.poly.nvars()
    }

    fn contains(&self, x: &[f64]) -> bool {
        let v = self.poly.eval(x);
        match self.kind {
            SetKind::Fiber => v == 0.0,
            SetKind::Sublevel => v <= 0.0,
        }
    }

    /// The set is all of space (`f ≡ 0`, or `f ≡ c < 0` for a sub-level).
    fn is_everything(&self) -> bool {
        if self.poly.is_zero() {
            return true;
        }
        self.kind == SetKind::Sublevel
            && self.poly.degree() == 0
            && self.poly.coefficient(&vec![0; self.ambient()]) < 0.0
    }
}

fn sphere_chi(dim: usize) -> i64 {
    if dim.is_multiple_of(2) {
        2
    } else {
        0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlaneSample {
    pub l: usize,
    /// `l` orthonormal vectors of length `n`.
    pub basis: Vec<Vec<f64>>,
    pub seed: u64,
    pub index: u64,
}

/// `count` independent planes from the rotation-invariant probability
/// measure on `G(l, n)`.
pub fn sample_grassmannian(l: usize, n: usize, count: usize, seed: u64) -> Result<Vec<PlaneSample>> {
    if l == 0 || l > n || n > 6 {
        return Err(Error::Precondition(format!("need 1 ≤ l ≤ n ≤ 6, got l = {l}, n = {n}")));
    }
    Ok((0..count as u64).map(|i| plane_sample(l, n, seed, i)).collect())
}

fn plane_sample(l: usize, n: usize, seed: u64, index: u64) -> PlaneSample {
    let mut g = rng::substream(seed, &[0x6a, l as u64, n as u64, index]);
    loop {
        let cols: Vec<Vec<f64>> = (0..l).map(|_| rng::gaussian_vec(&mut g, n)).collect();
        let basis = linalg::orthonormalize(&cols, 1e-8);
        if basis.len() == l {
            return PlaneSample { l, basis, seed, index };
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Section {
    pub set: AlgebraicSet,
    /// The restriction vanished identically.
    pub degenerate: bool,
}

/// `X ∩ P`, written in the plane coordinates `u1..ul`.
pub fn section_set(set: &AlgebraicSet, plane: &PlaneSample) -> Result<Section> {
    let q = restrict_to_plane(&set.poly, &plane.basis)?;
    let scale = set.poly.max_abs_coefficient().max(f64::MIN_POSITIVE);
    let degenerate = q.max_abs_coefficient() <= 1e-12 * scale;
    let q = if degenerate {
        Polynomial::zero(q.variables())
    } else {
        q.prune(1e-15)
    };
    Ok(Section {
        set: AlgebraicSet {
            poly: q,
            kind: set.kind,
        },
        degenerate,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinkSample {
    /// Radius actually used (after any tangency jitter).
    pub radius: f64,
    pub chi: i64,
    /// Points (fiber curves), arcs (sub-levels in the plane), or `0` when
    /// not counted.
    pub pieces: usize,
}

/// `χ(X ∩ S_R)`. A tangency at `R` is retried at `R·(1 ± 1%)`, up to five
/// times, before it is reported.
pub fn link_euler(set: &AlgebraicSet, r: f64) -> Result<LinkSample> {
    let jitter = [0.0, 0.01, -0.01, 0.02, -0.02, 0.03];
    let mut last = None;
    for j in jitter {
        let rr = r * (1.0 + j);
        match link_euler_at(set, rr) {
            Err(e @ Error::Tangential { .. }) => last = Some(e),
            other => return other,
        }
    }
    Err(last.expect("jitter list is non-empty"))
}

fn link_euler_at(set: &AlgebraicSet, r: f64) -> Result<LinkSample> {
    let n = set.ambient();
    if set.is_everything() {
        return Ok(LinkSample {
            radius: r,
            chi: sphere_chi(n - 1),
            pieces: 1,
        });
    }
    if set.poly.degree() == 0 {
        return Ok(LinkSample {
            radius: r,
            chi: 0,
            pieces: 0,
        });
    }
    match n {
        1 => {
            let ends = [r, -r];
            let mut count = 0;
            for t in ends {
                let v = set.poly.eval(&[t]);
                if v == 0.0 {
                    return Err(Error::Tangential {
                        radius: r,
                        point: vec![t],
                    });
                }
                if set.contains(&[t]) {
                    count += 1;
                }
            }
            Ok(LinkSample {
                radius: r,
                chi: count,
                pieces: count as usize,
            })
        }
        2 => {
            let th = roots::circle_roots(&set.poly, r)?;
            match set.kind {
                SetKind::Fiber => Ok(LinkSample {
                    radius: r,
                    chi: th.len() as i64,
                    pieces: th.len(),
                }),
                SetKind::Sublevel => {
                    if th.is_empty() {
                        // whole circle or nothing
                        let inside = set.poly.eval(&[r, 0.0]) <= 0.0;
                        return Ok(LinkSample {
                            radius: r,
                            chi: 0,
                            pieces: usize::from(inside),
                        });
                    }
                    let arcs = th.len() / 2;
                    Ok(LinkSample {
                        radius: r,
                        chi: arcs as i64,
                        pieces: arcs,
                    })
                }
            }
        }
        3 => match set.kind {
            // a compact curve on S²: disjoint circles
            SetKind::Fiber => Ok(LinkSample {
                radius: r,
                chi: 0,
                pieces: 0,
            }),
            SetKind::Sublevel => {
                let chi = sphere_region_chi(&set.poly, r)?;
                Ok(LinkSample {
                    radius: r,
                    chi,
                    pieces: 0,
                })
            }
        },
        _ => Err(Error::Unsupported(format!("links in ambient dimension {n}"))),
    }
}

struct SphereMesh {
    vertices: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
}

impl SphereMesh {
    fn icosahedron() -> Self {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let raw = [
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ];
        let vertices = raw
            .iter()
            .map(|v| {
                let l = norm(v);
                [v[0] / l, v[1] / l, v[2] / l]
            })
            .collect();
        let faces = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        Self { vertices, faces }
    }

    fn refine(&self) -> Self {
        let mut vertices = self.vertices.clone();
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vs: &mut Vec<[f64; 3]>| -> usize {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let p = [vs[a][0] + vs[b][0], vs[a][1] + vs[b][1], vs[a][2] + vs[b][2]];
                let l = norm(&p);
                vs.push([p[0] / l, p[1] / l, p[2] / l]);
                vs.len() - 1
            })
        };
        let mut faces = Vec::with_capacity(self.faces.len() * 4);
        for &[a, b, c] in &self.faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            faces.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        Self { vertices, faces }
    }

    /// χ of the sub-complex spanned by the vertices in `inside`.
    fn lower_chi(&self, inside: &[bool]) -> i64 {
        let v = inside.iter().filter(|&&b| b).count() as i64;
        let mut edges = std::collections::HashSet::new();
        let mut f = 0i64;
        for &[a, b, c] in &self.faces {
            for (p, q) in [(a, b), (b, c), (c, a)] {
                if inside[p] && inside[q] {
                    edges.insert((p.min(q), p.max(q)));
                }
            }
            if inside[a] && inside[b] && inside[c] {
                f += 1;
            }
        }
        v - edges.len() as i64 + f
    }
}

/// `χ({f ≤ 0} ∩ S²_R)` from geodesic icosahedral meshes at levels 3..7,
/// accepted once two consecutive levels agree.
fn sphere_region_chi(f: &Polynomial, r: f64) -> Result<i64> {
    // a fixed rotation keeps mesh vertices off coordinate planes
    let rot = {
        let (a, b) = (0.412_f64, 0.137_f64);
        [
            [a.cos(), -a.sin(), 0.0],
            [a.sin() * b.cos(), a.cos() * b.cos(), -b.sin()],
            [a.sin() * b.sin(), a.cos() * b.sin(), b.cos()],
        ]
    };
    let mut mesh = SphereMesh::icosahedron();
    for _ in 0..3 {
        mesh = mesh.refine();
    }
    let mut prev: Option<i64> = None;
    for _level in 3..=7 {
        let inside: Vec<bool> = mesh
            .vertices
            .iter()
            .map(|v| {
                let p: Vec<f64> = (0..3)
                    .map(|i| r * (rot[i][0] * v[0] + rot[i][1] * v[1] + rot[i][2] * v[2]))
                    .collect();
                f.eval(&p) <= 0.0
            })
            .collect();
        let chi = mesh.lower_chi(&inside);
        if prev == Some(chi) {
            return Ok(chi);
        }
        prev = Some(chi);
        mesh = mesh.refine();
    }
    Err(Error::ResolutionTooCoarse(format!(
        "sphere link at R = {r} did not settle by icosahedral level 7"
    )))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinkReport {
    pub radii: Vec<f64>,
    pub samples: Vec<Option<LinkSample>>,
    pub errors: Vec<Option<String>>,
    /// Reported only when the last three radii agree.
    pub stable_chi: Option<i64>,
    /// First radius from which every later value agrees.
    pub stable_from: Option<f64>,
}

impl LinkReport {
    pub fn is_stable(&self) -> bool {
        self.stable_chi.is_some()
    }
}

/// Radii for a stabilization test. For sets on a line the link is fixed
/// once `R` exceeds every root, so the schedule is extended past the Cauchy
/// bound when needed.
fn link_radii(set: &AlgebraicSet, schedule: &RadiusSchedule) -> Vec<f64> {
    let mut radii = schedule.radii();
    if set.ambient() == 1 && !set.poly.is_zero() {
        let c: Vec<f64> = (0..=set.poly.degree()).map(|k| set.poly.coefficient(&[k])).collect();
        let b = roots::root_bound(&c);
        let third_last = radii[radii.len() - 3];
        if b >= third_last {
            radii.extend([2.0 * b, 4.0 * b, 8.0 * b]);
        }
    }
    radii
}

/// `link_euler` across the schedule with the three-agreeing-radii rule.
pub fn stable_link(set: &AlgebraicSet, schedule: &RadiusSchedule) -> Result<LinkReport> {
    schedule.validate()?;
    let radii = link_radii(set, schedule);
    let mut samples = Vec::with_capacity(radii.len());
    let mut errors = Vec::with_capacity(radii.len());
    for &r in &radii {
        match link_euler(set, r) {
            Ok(s) => {
                samples.push(Some(s));
                errors.push(None);
            }
            Err(e) => {
                samples.push(None);
                errors.push(Some(e.to_string()));
            }
        }
    }
    let chis: Vec<Option<i64>> = samples.iter().map(|s| s.map(|s| s.chi)).collect();
    let k = chis.len();
    let stable_chi = match &chis[k - 3..] {
        [Some(a), Some(b), Some(c)] if a == b && b == c => Some(*a),
        _ => None,
    };
    let stable_from = stable_chi.map(|chi| {
        let mut i = k;
        while i > 0 && chis[i - 1] == Some(chi) {
            i -= 1;
        }
        radii[i]
    });
    Ok(LinkReport {
        radii,
        samples,
        errors,
        stable_chi,
        stable_from,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChiEstimate {
    pub l: usize,
    pub value: f64,
    pub stderr: f64,
    /// `true` for `l = n`, where no sampling is involved.
    pub exact: bool,
    pub planes: usize,
    pub failed: usize,
    pub resampled: usize,
    /// `χ(Lk∞(X ∩ P))` per plane, `None` where the section failed.
    pub per_plane: Vec<Option<i64>>,
}

/// `χ_l∞(X)`: half the mean of `χ(Lk∞(X ∩ P))` over uniform `l`-planes
/// (exactly half of `χ(Lk∞(X))` when `l = n`).
pub fn chi_l_infty(
    set: &AlgebraicSet,
    l: usize,
    planes: usize,
    schedule: &RadiusSchedule,
    seed: u64,
) -> Result<ChiEstimate> {
    let n = set.ambient();
    if l == 0 || l > n || (l < n && l > 3) {
        return Err(Error::Precondition(format!(
            "χ_l∞ needs 1 ≤ l ≤ min(n, 3), got l = {l}"
        )));
    }
    if l == n {
        let rep = stable_link(set, schedule)?;
        let chi = rep.stable_chi.ok_or_else(|| {
            Error::NotStabilized(format!("link of the {} over radii {:?}", set.kind.as_str(), rep.radii))
        })?;
        return Ok(ChiEstimate {
            l,
            value: chi as f64 / 2.0,
            stderr: 0.0,
            exact: true,
            planes: 0,
            failed: 0,
            resampled: 0,
            per_plane: Vec::new(),
        });
    }
    if planes == 0 {
        return Err(Error::Precondition("χ_l∞ needs at least one plane".into()));
    }
    let idx: Vec<u64> = (0..planes as u64).collect();
    let results: Vec<(Option<i64>, usize)> = par::map(&idx, |_, &i| {
        let mut resampled = 0;
        for attempt in 0..16u64 {
            let plane = plane_sample(l, n, seed, i + (attempt << 32));
            let sec = match section_set(set, &plane) {
                Ok(s) => s,
                Err(_) => return (None, resampled),
            };
            if sec.degenerate {
                resampled += 1;
                continue;
            }
            let chi = stable_link(&sec.set, schedule).ok().and_then(|r| r.stable_chi);
            return (chi, resampled);
        }
        (None, resampled)
    });
    let values: Vec<f64> = results.iter().filter_map(|(c, _)| c.map(|v| v as f64)).collect();
    let failed = planes - values.len();
    let resampled = results.iter().map(|(_, r)| r).sum();
    if failed as f64 > 0.05 * planes as f64 {
        return Err(Error::TooManyFailures { failed, total: planes });
    }
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    Ok(ChiEstimate {
        l,
        value: mean / 2.0,
        stderr: (var / m).sqrt() / 2.0,
        exact: false,
        planes,
        failed,
        resampled,
        per_plane: results.iter().map(|(c, _)| *c).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EulerReport {
    pub chi: i64,
    pub hint_used: bool,
    /// `(R, resolution, χ)` of every evaluation performed.
    pub checks: Vec<(f64, usize, Option<i64>)>,
}

/// `χ(X ∩ B_R)`, accepted when it agrees across a refinement and a larger
/// radius; otherwise the hint is used if given.
pub fn euler_global(set: &AlgebraicSet, r: f64, resolution: usize, hint: Option<i64>) -> Result<EulerReport> {
    let configs = [(r, resolution), (r, 2 * resolution), (2.0 * r, 2 * resolution)];
    let mut checks = Vec::new();
    let mut first_err = None;
    for (rr, res) in configs {
        match euler_in_ball(set, rr, res) {
            Ok(c) => checks.push((rr, res, Some(c))),
            Err(e) => {
                checks.push((rr, res, None));
                first_err.get_or_insert(e);
            }
        }
    }
    let vals: Vec<Option<i64>> = checks.iter().map(|c| c.2).collect();
    if let (Some(a), true) = (vals[0], vals.iter().all(|v| *v == vals[0])) {
        return Ok(EulerReport {
            chi: a,
            hint_used: false,
            checks,
        });
    }
    match hint {
        Some(h) => Ok(EulerReport {
            chi: h,
            hint_used: true,
            checks,
        }),
        None => Err(first_err.unwrap_or_else(|| Error::NotStabilized(format!("χ(X ∩ B_R) did not settle: {vals:?}")))),
    }
}

fn euler_in_ball(set: &AlgebraicSet, r: f64, resolution: usize) -> Result<i64> {
    let n = set.ambient();
    if set.is_everything() {
        return Ok(1);
    }
    match (n, set.kind) {
        (1, _) => {
            let c: Vec<f64> = (0..=set.poly.degree()).map(|k| set.poly.coefficient(&[k])).collect();
            let ts = roots::real_roots(&c, -r, r).map_err(|t| Error::Tangential {
                radius: f64::NAN,
                point: vec![t],
            })?;
            match set.kind {
                SetKind::Fiber => Ok(ts.len() as i64),
                SetKind::Sublevel => {
                    let mut knots = vec![-r];
                    knots.extend(ts);
                    knots.push(r);
                    let mut count = 0;
                    let mut prev_in = false;
                    for w in knots.windows(2) {
                        let inside = set.poly.eval(&[0.5 * (w[0] + w[1])]) <= 0.0;
                        if inside && !prev_in {
                            count += 1;
                        }
                        prev_in = inside;
                    }
                    Ok(count)
                }
            }
        }
        (2, SetKind::Fiber) => {
            let step = (2.0 * r / resolution as f64).min(0.1);
            Ok(trace_curve(&set.poly, r, step)?.euler_characteristic())
        }
        (3, SetKind::Fiber) => Ok(mesh_surface(&set.poly, r, resolution)?.euler_characteristic()),
        (2 | 3, SetKind::Sublevel) => Ok(cubical_chi(&set.poly, r, resolution)),
        _ => Err(Error::Unsupported(format!("Euler characteristic in dimension {n}"))),
    }
}

/// χ of the union of closed grid cells whose centers lie in
/// `{f ≤ 0} ∩ B_R`. Cells of all dimensions are indexed on the doubled grid,
/// where a point's dimension is its number of odd coordinates.
fn cubical_chi(f: &Polynomial, r: f64, resolution: usize) -> i64 {
    let n = f.nvars();
    let m = resolution.max(2);
    let h = 2.0 * r / m as f64;
    let shift = 0.381_966_011_250_105 * h;
    let side = 2 * m + 1;
    let total = side.pow(n as u32);
    let mut marked = vec![false; total];
    let mut cell = vec![0usize; n];
    let cells = m.pow(n as u32);
    let mut offsets: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..n {
        offsets = offsets
            .into_iter()
            .flat_map(|o| {
                (0..3).map(move |a| {
                    let mut v = o.clone();
                    v.push(a);
                    v
                })
            })
            .collect();
    }
    for c in 0..cells {
        let mut rest = c;
        for ci in cell.iter_mut() {
            *ci = rest % m;
            rest /= m;
        }
        let x: Vec<f64> = cell.iter().map(|&i| -r + (i as f64 + 0.5) * h + shift).collect();
        if norm(&x) > r || f.eval(&x) > 0.0 {
            continue;
        }
        for o in &offsets {
            let mut id = 0;
            for k in (0..n).rev() {
                id = id * side + 2 * cell[k] + o[k];
            }
            marked[id] = true;
        }
    }
    let mut chi = 0i64;
    for (id, &mk) in marked.iter().enumerate() {
        if !mk {
            continue;
        }
        let mut rest = id;
        let mut odd = 0;
        for _ in 0..n {
            odd += (rest % side) % 2;
            rest /= side;
        }
        chi += if odd % 2 == 0 { 1 } else { -1 };
    }
    chi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{parse_polynomial, var_names};

    fn set(text: &str, n: usize, kind: SetKind) -> AlgebraicSet {
        AlgebraicSet {
            poly: parse_polynomial(text, &var_names("x", n)).unwrap(),
            kind,
        }
    }

    #[test]
    fn link_examples() {
        let h = set("x1*x2 - 1", 2, SetKind::Fiber);
        assert_eq!(link_euler(&h, 10.0).unwrap().chi, 4);
        let hp = set("x1", 2, SetKind::Sublevel);
        for r in [0.5, 3.0, 100.0] {
            assert_eq!(link_euler(&hp, r).unwrap().chi, 1);
        }
        let sph = set("x1^2 + x2^2 + x3^2 - 1", 3, SetKind::Fiber);
        assert_eq!(link_euler(&sph, 2.0).unwrap().chi, 0);
        let ball = set("x1^2 + x2^2 + x3^2 - 1", 3, SetKind::Sublevel);
        assert_eq!(link_euler(&ball, 2.0).unwrap().chi, 0);
        let half = set("x3", 3, SetKind::Sublevel);
        assert_eq!(link_euler(&half, 5.0).unwrap().chi, 1);
        let outside = set("1 - x1^2 - x2^2 - x3^2", 3, SetKind::Sublevel);
        assert_eq!(link_euler(&outside, 5.0).unwrap().chi, 2);
    }

    #[test]
    fn tangency_is_jittered() {
        let l = set("x1 - 10", 2, SetKind::Fiber);
        let s = link_euler(&l, 10.0).unwrap();
        assert!(s.radius != 10.0);
    }

    #[test]
    fn stable_links() {
        let sched = RadiusSchedule::new(4.0, 2.0, 7).unwrap();
        let h = stable_link(&set("x1*x2 - 1", 2, SetKind::Fiber), &sched).unwrap();
        assert_eq!(h.stable_chi, Some(4));
        assert_eq!(h.stable_from, Some(4.0));
        let b = stable_link(&set("x1 + x1^2*x2", 2, SetKind::Fiber), &sched).unwrap();
        assert_eq!(b.stable_chi, Some(6));
        let c = stable_link(&set("x1^2 + x2^2 - 1", 2, SetKind::Fiber), &sched).unwrap();
        assert_eq!(c.stable_chi, Some(0));
    }

    #[test]
    fn chi_l_examples() {
        let sched = RadiusSchedule::default();
        let h = set("x1*x2 - 1", 2, SetKind::Fiber);
        let c2 = chi_l_infty(&h, 2, 0, &sched, 1).unwrap();
        assert!(c2.exact && c2.value == 2.0);
        let c1 = chi_l_infty(&h, 1, 200, &sched, 1).unwrap();
        assert!(c1.value.abs() < 0.05, "{c1:?}");
        let line = set("x2", 2, SetKind::Fiber);
        assert_eq!(chi_l_infty(&line, 2, 0, &sched, 1).unwrap().value, 1.0);
        let empty = set("x1^2 + x2^2 + 1", 2, SetKind::Fiber);
        assert_eq!(chi_l_infty(&empty, 2, 0, &sched, 1).unwrap().value, 0.0);
        let hp = set("x1", 2, SetKind::Sublevel);
        let c1 = chi_l_infty(&hp, 1, 200, &sched, 2).unwrap();
        assert!((c1.value - 0.5).abs() < 1e-12 && c1.stderr == 0.0);
    }

    #[test]
    fn sections() {
        let h = set("x1*x2 - 1", 2, SetKind::Fiber);
        let d = std::f64::consts::FRAC_1_SQRT_2;
        let p = PlaneSample {
            l: 1,
            basis: vec![vec![d, d]],
            seed: 0,
            index: 0,
        };
        let s = section_set(&h, &p).unwrap();
        assert!(!s.degenerate);
        assert!((s.set.poly.coefficient(&[2]) - 0.5).abs() < 1e-15);
        assert_eq!(s.set.poly.coefficient(&[0]), -1.0);
        let hp = set("x1", 2, SetKind::Sublevel);
        let p = PlaneSample {
            l: 1,
            basis: vec![vec![0.0, 1.0]],
            seed: 0,
            index: 0,
        };
        let s = section_set(&hp, &p).unwrap();
        assert!(s.degenerate && s.set.poly.is_zero());
    }

    #[test]
    fn grassmannian_frames() {
        let ps = sample_grassmannian(2, 4, 50, 3).unwrap();
        for p in &ps {
            for a in 0..2 {
                for b in 0..2 {
                    let d = linalg::dot(&p.basis[a], &p.basis[b]);
                    assert!((d - if a == b { 1.0 } else { 0.0 }).abs() < 1e-12);
                }
            }
        }
        assert!(sample_grassmannian(1, 2, 0, 1).unwrap().is_empty());
        assert!(sample_grassmannian(3, 2, 1, 1).is_err());
        assert_eq!(sample_grassmannian(2, 4, 50, 3).unwrap(), ps);
    }

    #[test]
    fn global_euler() {
        let ch = |t: &str, n: usize, k: SetKind| euler_global(&set(t, n, k), 16.0, 64, None).unwrap().chi;
        assert_eq!(ch("x1*x2 - 1", 2, SetKind::Fiber), 2);
        assert_eq!(ch("x1 + x1^2*x2", 2, SetKind::Fiber), 3);
        assert_eq!(ch("x1^2 + x2^2 - 1", 2, SetKind::Fiber), 0);
        assert_eq!(ch("x1", 2, SetKind::Sublevel), 1);
        assert_eq!(ch("x1^2 + x2^2 - 1", 2, SetKind::Sublevel), 1);
        assert_eq!(ch("1 - x1^2 - x2^2", 2, SetKind::Sublevel), 0);
        assert_eq!(ch("x2 - x1^2", 2, SetKind::Sublevel), 1);
        let sphere = euler_global(&set("x1^2 + x2^2 + x3^2 - 1", 3, SetKind::Fiber), 2.0, 24, None).unwrap();
        assert_eq!(sphere.chi, 2);
        let shell = euler_global(&set("1 - x1^2 - x2^2 - x3^2", 3, SetKind::Sublevel), 2.0, 16, None).unwrap();
        assert_eq!(shell.chi, 2);
        let singular = set("x1*x2", 2, SetKind::Fiber);
        assert!(euler_global(&singular, 4.0, 32, None).is_err());
        let hinted = euler_global(&singular, 4.0, 32, Some(1)).unwrap();
        assert!(hinted.hint_used && hinted.chi == 1);
    }
}
