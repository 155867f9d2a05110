//! Gauss-Bonnet relations at infinity checked numerically, and parameter
//! scans of the invariant vector with jump detection cross-referenced
//! against the estimated generalized critical values.

use serde::Serialize;

use crate::acv::{estimate_k, grid_nodes, AcvOptions, AcvReport};
use crate::density::{
    extrapolate, geometric_constants, lambda_infinity, level_mesh, sigma_density, theta_density, DensityEstimate,
    DensityStatus, VolumeMethod, DEFAULT_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::geometry::{integrate_sigma_by_component, LevelMesh};
use crate::par;
use crate::rng::derive_seed;
use crate::spec::{FamilySpec, RadiusSchedule};
use crate::topology::{chi_l_infty, euler_global, AlgebraicSet, ChiEstimate, SetKind};

/// Absolute floor of the identity verdict.
pub const IDENTITY_FLOOR: f64 = 0.05;
/// Absolute floor of the jump threshold.
pub const JUMP_FLOOR: f64 = 0.1;
/// Grid resolution used for `χ(X ∩ B_R)`.
pub const EULER_RESOLUTION: usize = 64;

/// One numerical quantity. Missing values are `None` with the reason in
/// `status`, never zero.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Entry {
    pub value: Option<f64>,
    pub error: Option<f64>,
    /// `ok`, `exact`, `non-convergent`, or a failure message.
    pub status: String,
}

impl Entry {
    pub fn exact(value: f64) -> Self {
        Self {
            value: Some(value),
            error: Some(0.0),
            status: "exact".into(),
        }
    }

    pub fn missing(reason: impl Into<String>) -> Self {
        Self {
            value: None,
            error: None,
            status: reason.into(),
        }
    }

    fn measured(value: f64, error: f64, converged: bool) -> Self {
        Self {
            value: Some(value),
            error: Some(error),
            status: if converged { "ok" } else { "non-convergent" }.into(),
        }
    }

    pub fn from_density(e: &DensityEstimate) -> Self {
        Self::measured(e.value, e.error, e.status == DensityStatus::Converged)
    }

    pub fn from_chi(c: &ChiEstimate) -> Self {
        if c.exact {
            Self::exact(c.value)
        } else {
            Self::measured(c.value, c.stderr, true)
        }
    }

    fn from_result<T>(r: Result<T>, f: impl FnOnce(&T) -> Entry) -> Self {
        match r {
            Ok(v) => f(&v),
            Err(e) => Self::missing(e.to_string()),
        }
    }

    /// Has a value that can be asserted on.
    pub fn is_settled(&self) -> bool {
        self.value.is_some() && (self.status == "ok" || self.status == "exact")
    }

    fn scaled(&self, c: f64) -> Self {
        Self {
            value: self.value.map(|v| c * v),
            error: self.error.map(|e| c.abs() * e),
            status: self.status.clone(),
        }
    }
}

/// `Σ cᵢ·eᵢ` with errors added in quadrature; unsettled terms carry over.
fn combine(terms: &[(f64, &Entry)]) -> Entry {
    let mut value = Some(0.0);
    let mut var = 0.0;
    let mut notes: Vec<&str> = Vec::new();
    for (c, e) in terms {
        value = value.zip(e.value).map(|(a, v)| a + c * v);
        var += (c * e.error.unwrap_or(0.0)).powi(2);
        if !e.is_settled() && !notes.contains(&e.status.as_str()) {
            notes.push(&e.status);
        }
    }
    Entry {
        value,
        error: Some(var.sqrt()),
        status: if notes.is_empty() {
            "ok".into()
        } else {
            notes.join("; ")
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityResidual {
    pub id: String,
    pub left: Option<f64>,
    pub right: Option<f64>,
    pub error: f64,
    pub verdict: Verdict,
    /// Why an ingredient did not settle.
    pub note: Option<String>,
}

impl IdentityResidual {
    fn new(id: impl Into<String>, left: &Entry, right: &Entry) -> Self {
        let error = (left.error.unwrap_or(0.0).powi(2) + right.error.unwrap_or(0.0).powi(2)).sqrt();
        let unsettled: Vec<&str> = [left, right]
            .iter()
            .filter(|e| !e.is_settled())
            .map(|e| e.status.as_str())
            .collect();
        let verdict = match (left.value, right.value) {
            _ if !unsettled.is_empty() => Verdict::Inconclusive,
            (Some(l), Some(r)) if (l - r).abs() <= IDENTITY_FLOOR.max(3.0 * error) => Verdict::Pass,
            _ => Verdict::Fail,
        };
        Self {
            id: id.into(),
            left: left.value,
            right: right.value,
            error,
            verdict,
            note: (!unsettled.is_empty()).then(|| unsettled.join("; ")),
        }
    }

    pub fn residual(&self) -> Option<f64> {
        Some((self.left? - self.right?).abs())
    }
}

fn codim_one(spec: &FamilySpec, y: &[f64]) -> Result<crate::Polynomial> {
    if !(2..=3).contains(&spec.n) {
        return Err(Error::Unsupported(format!(
            "identity checks need sets in ℝ² or ℝ³, got n = {}",
            spec.n
        )));
    }
    spec.level_polynomial(y)
}

/// `χ(X)` from the ball-clipped count, falling back to the spec's hint.
fn euler_entry(spec: &FamilySpec, set: &AlgebraicSet, schedule: &RadiusSchedule) -> Entry {
    let r = schedule.radii()[0];
    Entry::from_result(
        euler_global(set, r, EULER_RESOLUTION, spec.chi_hint(set.kind.as_str())),
        |e| Entry::exact(e.chi as f64),
    )
}

/// `[χ₁∞, …, χₙ∞]`.
fn chi_entries(set: &AlgebraicSet, planes: usize, schedule: &RadiusSchedule, seed: u64) -> Vec<Entry> {
    (1..=set.ambient())
        .map(|l| {
            Entry::from_result(
                chi_l_infty(set, l, planes, schedule, derive_seed(seed, &[0xc41, l as u64])),
                Entry::from_chi,
            )
        })
        .collect()
}

/// `χ_j` with `χ_j = 0` for `j ≤ 0`.
fn chi_at(chis: &[Entry], j: isize) -> Entry {
    if j <= 0 {
        Entry::exact(0.0)
    } else {
        chis[j as usize - 1].clone()
    }
}

/// Gauss-Bonnet relations between `Λ_k∞(X)` and `χ(X)`, `χ_l∞(X)` for the
/// fiber or sub-level of a codimension-one spec at `y`. The `Λ` side comes
/// from curvature integration, the `χ` side from link counting and plane
/// sections. The matrix form `Λ = L·u`, with `u = (χ − χₙ, χₙ, …, χ₁)` and
/// `L` unit upper triangular (`-1` on the second superdiagonal), is checked
/// as one residual (the largest componentwise gap).
pub fn gb_identity_check(
    spec: &FamilySpec,
    y: &[f64],
    kind: SetKind,
    schedule: &RadiusSchedule,
    planes: usize,
    seed: u64,
) -> Result<Vec<IdentityResidual>> {
    let f = codim_one(spec, y)?;
    let n = spec.n;
    let set = AlgebraicSet { poly: f, kind };
    let top = match kind {
        SetKind::Fiber => n - 1,
        SetKind::Sublevel => n,
    };
    let chi_x = euler_entry(spec, &set, schedule);
    let chis = chi_entries(&set, planes, schedule, seed);
    let ks: Vec<usize> = (0..=n).collect();
    let lambdas: Vec<Entry> = par::map(&ks, |_, &k| {
        if k > top {
            Entry::exact(0.0)
        } else {
            Entry::from_result(lambda_infinity(spec, y, kind, k, schedule), Entry::from_density)
        }
    });
    let ni = n as isize;
    let mut out = Vec::new();
    let rhs0 = combine(&[(1.0, &chi_x), (-1.0, &chis[n - 1]), (-1.0, &chi_at(&chis, ni - 1))]);
    out.push(IdentityResidual::new("GB-0", &lambdas[0], &rhs0));
    for k in 1..=n {
        let ki = k as isize;
        let rhs = if k + 2 <= n {
            combine(&[(-1.0, &chi_at(&chis, ni - ki - 1)), (1.0, &chi_at(&chis, ni - ki + 1))])
        } else {
            chi_at(&chis, ni - ki + 1)
        };
        out.push(IdentityResidual::new(format!("GB-{k}"), &lambdas[k], &rhs));
    }

    // matrix form, assembled independently of the loop above
    let mut u = vec![combine(&[(1.0, &chi_x), (-1.0, &chis[n - 1])])];
    u.extend((1..=n).map(|j| chis[n - j].clone()));
    let mut worst: Option<(f64, Entry, Entry)> = None;
    for k in 0..=n {
        let mut row = vec![(1.0, &u[k])];
        if k + 2 <= n {
            row.push((-1.0, &u[k + 2]));
        }
        let lu = combine(&row);
        let gap = combine(&[(1.0, &lambdas[k]), (-1.0, &lu)]);
        let g = gap.value.map_or(f64::INFINITY, f64::abs);
        if worst.as_ref().is_none_or(|w| g > w.0 || !gap.is_settled()) {
            worst = Some((g, gap, lu));
        }
    }
    if let Some((_, gap, _)) = worst {
        let left = Entry {
            value: gap.value.map(f64::abs),
            ..gap
        };
        out.push(IdentityResidual::new("matrix-L", &left, &Entry::exact(0.0)));
    }
    Ok(out)
}

/// Relations on `𝒴 = {f_y ≤ 0}` and `Y = {f_y = 0}`: `Θ∞ = χ₁∞(𝒴)`,
/// `σ_{n-1}∞/s_{n-1} = χ(𝒴) − χₙ∞ − χ_{n-1}∞`,
/// `σ_i∞/(s_i·b_{n-i-1}) = −χ_i∞ + χ_{i+2}∞`, and the bridge
/// `σ_{n-1-i}∞(Y) = s_{n-1-i}·b_i·Λ_i∞(𝒴)` with `Λ` taken one mesh level finer.
pub fn hypersurface_gb_check(
    spec: &FamilySpec,
    y: &[f64],
    schedule: &RadiusSchedule,
    planes: usize,
    seed: u64,
) -> Result<Vec<IdentityResidual>> {
    let f = codim_one(spec, y)?;
    let n = spec.n;
    let sub = AlgebraicSet::sublevel(f);
    let chi_x = euler_entry(spec, &sub, schedule);
    let chis = chi_entries(&sub, planes, schedule, seed);
    let idx: Vec<usize> = (0..n).collect();
    let sigmas: Vec<Entry> = par::map(&idx, |_, &i| {
        Entry::from_result(sigma_density(spec, y, i, schedule), Entry::from_density)
    });
    let mut fine = spec.clone();
    fine.sampling.mesh_level += 1;
    let lambdas: Vec<Entry> = par::map(&idx, |_, &i| {
        Entry::from_result(
            lambda_infinity(&fine, y, SetKind::Sublevel, i, schedule),
            Entry::from_density,
        )
    });
    let theta = Entry::from_result(
        theta_density(spec, y, schedule, VolumeMethod::default()),
        Entry::from_density,
    );
    let ni = n as isize;
    let mut out = vec![IdentityResidual::new(format!("GB-hyp-{n}"), &theta, &chis[0])];
    let (s_top, _) = geometric_constants(n - 1);
    let rhs = combine(&[(1.0, &chi_x), (-1.0, &chis[n - 1]), (-1.0, &chi_at(&chis, ni - 1))]);
    out.push(IdentityResidual::new(
        format!("GB-hyp-{}", n - 1),
        &sigmas[n - 1].scaled(1.0 / s_top),
        &rhs,
    ));
    for i in 0..n - 1 {
        let (s_i, _) = geometric_constants(i);
        let (_, b) = geometric_constants(n - i - 1);
        let ii = i as isize;
        let rhs = combine(&[(-1.0, &chi_at(&chis, ii)), (1.0, &chi_at(&chis, ii + 2))]);
        out.push(IdentityResidual::new(
            format!("GB-hyp-{i}"),
            &sigmas[i].scaled(1.0 / (s_i * b)),
            &rhs,
        ));
    }
    for i in 0..n {
        let (s, _) = geometric_constants(n - 1 - i);
        let (_, b) = geometric_constants(i);
        out.push(IdentityResidual::new(
            format!("sigma-lambda-bridge-{i}"),
            &sigmas[n - 1 - i],
            &lambdas[i].scaled(s * b),
        ));
    }
    Ok(out)
}

/// Mesh-based entries of one connected component (matched across radii).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComponentVector {
    pub label: usize,
    pub lambda: Vec<Entry>,
    /// `(i, κᵢ∞)` for even `i`.
    pub kappa: Vec<(usize, Entry)>,
    pub sigma: Vec<Entry>,
}

/// All invariants of the fiber `W_y` (and `Θ` of its sub-level) at one
/// parameter value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvariantVector {
    pub y: Vec<f64>,
    pub n: usize,
    /// Fiber dimension.
    pub d: usize,
    /// `χ_l∞`, `l = 1..n`.
    pub chi: Vec<Entry>,
    /// `Λ_k∞`, `k = 0..d`.
    pub lambda: Vec<Entry>,
    /// `(i, κᵢ∞)` for even `i ≤ d`.
    pub kappa: Vec<(usize, Entry)>,
    /// `σᵢ∞`, `i = 0..n-1`.
    pub sigma: Vec<Entry>,
    pub theta: Entry,
    /// Components of the fiber in the largest ball.
    pub components: Option<usize>,
    /// Empty when components could not be matched across radii.
    pub per_component: Vec<ComponentVector>,
    /// Within one grid cell of the estimated `K`.
    pub near_k: bool,
    /// Sampled points of each component inside the smallest ball, used to
    /// match components between grid nodes.
    #[serde(skip)]
    signatures: Vec<Vec<Vec<f64>>>,
}

impl InvariantVector {
    /// `(quantity, component, entry)` rows; the aggregate is component `all`.
    pub fn entries(&self) -> Vec<(String, String, &Entry)> {
        let mut out = Vec::new();
        let agg = mesh_rows("all", &self.lambda, &self.kappa, &self.sigma);
        let comps: Vec<_> = self
            .per_component
            .iter()
            .flat_map(|c| mesh_rows(&format!("c{}", c.label), &c.lambda, &c.kappa, &c.sigma))
            .collect();
        out.extend(
            self.chi
                .iter()
                .enumerate()
                .map(|(l, e)| (format!("chi_{}", l + 1), "all".to_string(), e)),
        );
        out.extend(agg);
        out.push(("theta".into(), "all".into(), &self.theta));
        out.extend(comps);
        out
    }

    /// Aggregate entry by quantity name (`chi_2`, `sigma_1`, `theta`, ...).
    pub fn get(&self, quantity: &str) -> Option<&Entry> {
        self.entries()
            .into_iter()
            .find(|(q, c, _)| q == quantity && c == "all")
            .map(|(_, _, e)| e)
    }
}

fn mesh_rows<'a>(
    comp: &str,
    lambda: &'a [Entry],
    kappa: &'a [(usize, Entry)],
    sigma: &'a [Entry],
) -> Vec<(String, String, &'a Entry)> {
    let mut rows = Vec::new();
    rows.extend(lambda.iter().enumerate().map(|(k, e)| (format!("lambda_{k}"), e)));
    rows.extend(kappa.iter().map(|(i, e)| (format!("kappa_{i}"), e)));
    rows.extend(sigma.iter().enumerate().map(|(i, e)| (format!("sigma_{i}"), e)));
    rows.into_iter().map(|(q, e)| (q, comp.to_string(), e)).collect()
}

/// `(Λ, κ, σ)` entries from per-radius `[∫σ₀, …, ∫σ_d]`.
fn curvature_entries(n: usize, radii: &[f64], raws: &[Vec<f64>]) -> (Vec<Entry>, Vec<(usize, Entry)>, Vec<Entry>) {
    let d = n - 1;
    let limit = |vals: Vec<f64>| -> Entry {
        Entry::from_result(extrapolate(radii, &vals, DEFAULT_TOLERANCE), |x| {
            Entry::measured(x.limit, x.error, x.converged)
        })
    };
    let sigma = (0..n)
        .map(|i| {
            limit(
                radii
                    .iter()
                    .zip(raws)
                    .map(|(r, raw)| raw[i] / r.powi((n - 1 - i) as i32))
                    .collect(),
            )
        })
        .collect();
    let (s_codim, _) = geometric_constants(n - d - 1);
    let kappa = (0..=d)
        .step_by(2)
        .map(|i| {
            let vals = radii
                .iter()
                .zip(raws)
                .map(|(r, raw)| 2.0 * raw[i] / s_codim / r.powi((d - i) as i32))
                .collect();
            (i, limit(vals))
        })
        .collect();
    let lambda = (0..=d)
        .map(|k| {
            if (d - k) % 2 == 1 {
                return Entry::exact(0.0);
            }
            let (s, _) = geometric_constants(n - k - 1);
            let (_, b) = geometric_constants(k);
            let vals = radii
                .iter()
                .zip(raws)
                .map(|(r, raw)| {
                    let v = if k == d { raw[0] } else { 2.0 * raw[d - k] / s };
                    if k == 0 {
                        v
                    } else {
                        v / (b * r.powi(k as i32))
                    }
                })
                .collect();
            limit(vals)
        })
        .collect();
    (lambda, kappa, sigma)
}

const SIGNATURE_POINTS: usize = 128;

/// Vertex positions of each component inside `B_{r0}`, thinned.
fn signatures(mesh: &LevelMesh, r0: f64) -> Vec<Vec<Vec<f64>>> {
    let mut pts: Vec<Vec<Vec<f64>>> = vec![Vec::new(); mesh.components.len()];
    let mut seen = vec![false; mesh.vertices.len()];
    for (e, &lab) in mesh.elements.iter().zip(&mesh.labels) {
        for &v in e {
            if !seen[v] {
                seen[v] = true;
                let p = &mesh.vertices[v].point;
                if p.iter().map(|x| x * x).sum::<f64>().sqrt() <= r0 * (1.0 + 1e-9) {
                    pts[lab].push(p.clone());
                }
            }
        }
    }
    for p in &mut pts {
        let stride = p.len().div_ceil(SIGNATURE_POINTS).max(1);
        *p = p.iter().step_by(stride).cloned().collect();
    }
    pts
}

/// Symmetric Hausdorff distance between finite point sets.
pub fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() && b.is_empty() {
            0.0
        } else {
            f64::INFINITY
        };
    }
    let one_way = |p: &[Vec<f64>], q: &[Vec<f64>]| {
        p.iter()
            .map(|x| {
                q.iter()
                    .map(|z| x.iter().zip(z).map(|(u, v)| (u - v).powi(2)).sum::<f64>())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
            .sqrt()
    };
    one_way(a, b).max(one_way(b, a))
}

/// Greedy matching by increasing distance; `result[i]` is the partner of
/// `a[i]` in `b` (if any within `cutoff`).
fn greedy_match(a: &[Vec<Vec<f64>>], b: &[Vec<Vec<f64>>], cutoff: f64) -> Vec<Option<usize>> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in a.iter().enumerate() {
        for (j, q) in b.iter().enumerate() {
            let h = hausdorff(p, q);
            if h <= cutoff {
                pairs.push((h, i, j));
            }
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut out = vec![None; a.len()];
    let mut taken = vec![false; b.len()];
    for (_, i, j) in pairs {
        if out[i].is_none() && !taken[j] {
            out[i] = Some(j);
            taken[j] = true;
        }
    }
    out
}

/// Per-component `[∫σ]` tables, or `None` when the component structure
/// changes between radii.
fn component_tables(meshes: &[LevelMesh], per: &[Vec<Vec<f64>>], r0: f64) -> Option<Vec<Vec<Vec<f64>>>> {
    let m = meshes[0].components.len();
    if m == 0 {
        return None;
    }
    let base = signatures(&meshes[0], r0);
    // all radii x components
    let mut tables = vec![Vec::with_capacity(meshes.len()); m];
    for (j, mesh) in meshes.iter().enumerate() {
        if mesh.components.len() != m {
            return None;
        }
        let sig = signatures(mesh, r0);
        let matched = greedy_match(&base, &sig, 0.25 * r0);
        for (c, t) in matched.into_iter().zip(tables.iter_mut()) {
            t.push(per[j][c?].clone());
        }
    }
    Some(tables)
}

/// Computes the invariant vector at one parameter value. Failures of single
/// quantities are recorded in their entries.
pub fn invariant_vector(
    spec: &FamilySpec,
    y: &[f64],
    schedule: &RadiusSchedule,
    planes: usize,
    seed: u64,
) -> InvariantVector {
    let n = spec.n;
    let d = n.saturating_sub(1);
    let blank = |why: &str| InvariantVector {
        y: y.to_vec(),
        n,
        d,
        chi: vec![Entry::missing(why); n],
        lambda: vec![Entry::missing(why); d + 1],
        kappa: (0..=d).step_by(2).map(|i| (i, Entry::missing(why))).collect(),
        sigma: vec![Entry::missing(why); n],
        theta: Entry::missing(why),
        components: None,
        per_component: Vec::new(),
        near_k: false,
        signatures: Vec::new(),
    };
    let f = match codim_one(spec, y).and_then(|f| schedule.validate().map(|_| f)) {
        Ok(f) => f,
        Err(e) => return blank(&e.to_string()),
    };
    let fiber = AlgebraicSet::fiber(f.clone());
    let chi = chi_entries(&fiber, planes, schedule, seed);
    let theta = Entry::from_result(
        theta_density(spec, y, schedule, VolumeMethod::default()),
        Entry::from_density,
    );
    let radii = schedule.radii();
    let level = spec.sampling.mesh_level;
    let meshed: Vec<Result<(LevelMesh, Vec<Vec<f64>>)>> = par::map(&radii, |_, &r| {
        let mesh = level_mesh(&f, r, level)?;
        let per = integrate_sigma_by_component(&mesh)?;
        Ok((mesh, per))
    });
    let mut v = blank("");
    v.chi = chi;
    v.theta = theta;
    let meshed: Result<Vec<_>> = meshed.into_iter().collect();
    let (meshes, per): (Vec<LevelMesh>, Vec<Vec<Vec<f64>>>) = match meshed {
        Ok(m) => m.into_iter().unzip(),
        Err(e) => {
            let why = e.to_string();
            v.lambda = vec![Entry::missing(&why); d + 1];
            v.kappa = (0..=d).step_by(2).map(|i| (i, Entry::missing(&why))).collect();
            v.sigma = vec![Entry::missing(&why); n];
            return v;
        }
    };
    let raws: Vec<Vec<f64>> = per
        .iter()
        .map(|p| {
            let mut t = vec![0.0; d + 1];
            for c in p {
                for (a, b) in t.iter_mut().zip(c) {
                    *a += b;
                }
            }
            t
        })
        .collect();
    (v.lambda, v.kappa, v.sigma) = curvature_entries(n, &radii, &raws);
    v.components = meshes.last().map(|m| m.components.len());
    if let Some(tables) = component_tables(&meshes, &per, radii[0]) {
        v.per_component = tables
            .iter()
            .enumerate()
            .map(|(label, t)| {
                let (lambda, kappa, sigma) = curvature_entries(n, &radii, t);
                ComponentVector {
                    label,
                    lambda,
                    kappa,
                    sigma,
                }
            })
            .collect();
        v.signatures = signatures(&meshes[0], radii[0]);
    }
    v
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Jump {
    pub quantity: String,
    pub component: String,
    /// Grid values at the two ends of the cell.
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    pub delta: f64,
    pub threshold: f64,
    /// The cell meets an entry of the estimated `K`.
    pub contains_k: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanReport {
    pub nodes: Vec<InvariantVector>,
    pub jumps: Vec<Jump>,
    pub acv: AcvReport,
}

impl ScanReport {
    /// Every jump cell meets the estimated `K`.
    pub fn jumps_contained(&self) -> bool {
        self.jumps.iter().all(|j| j.contains_k)
    }

    /// Aggregate values of one quantity along the grid.
    pub fn trace(&self, quantity: &str) -> Vec<Option<f64>> {
        self.nodes
            .iter()
            .map(|v| v.get(quantity).and_then(|e| e.value))
            .collect()
    }
}

/// Index sequences along each grid axis.
fn grid_lines(spec: &FamilySpec) -> Vec<Vec<usize>> {
    match spec.grid.as_slice() {
        [a] => vec![(0..a.steps).collect()],
        [a, b] => {
            let (p, q) = (a.steps, b.steps);
            let mut lines: Vec<Vec<usize>> = (0..p).map(|i| (0..q).map(|j| i * q + j).collect()).collect();
            lines.extend((0..q).map(|j| (0..p).map(|i| i * q + j).collect()));
            lines
        }
        _ => Vec::new(),
    }
}

/// Sample points of each component, with the components' labels.
type LabelledSignatures = (Vec<Vec<Vec<f64>>>, Vec<usize>);

/// Gives components matching labels along the grid: each node's components
/// take the label of the closest component at the previous node.
fn relabel_components(nodes: &mut [InvariantVector], r0: f64) {
    let mut next = 0;
    let mut prev: Option<LabelledSignatures> = None;
    for v in nodes.iter_mut() {
        if v.per_component.is_empty() {
            prev = None;
            continue;
        }
        let labels: Vec<usize> = match &prev {
            Some((sig, lab)) => greedy_match(&v.signatures, sig, 0.25 * r0)
                .into_iter()
                .map(|m| match m {
                    Some(j) => lab[j],
                    None => {
                        next += 1;
                        next - 1
                    }
                })
                .collect(),
            None => (0..v.per_component.len())
                .map(|_| {
                    next += 1;
                    next - 1
                })
                .collect(),
        };
        for (c, &l) in v.per_component.iter_mut().zip(&labels) {
            c.label = l;
        }
        v.per_component.sort_by_key(|c| c.label);
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.sort_by_key(|&i| labels[i]);
        let sig: Vec<_> = order.iter().map(|&i| v.signatures[i].clone()).collect();
        v.signatures = sig;
        let mut sorted = labels;
        sorted.sort_unstable();
        prev = Some((v.signatures.clone(), sorted));
    }
}

fn cell_meets_k(acv: &AcvReport, a: &[f64], b: &[f64]) -> bool {
    acv.k.iter().any(|e| {
        (0..a.len()).all(|i| {
            let (lo, hi) = (a[i].min(b[i]), a[i].max(b[i]));
            e.lo[i] <= hi + 1e-9 && e.hi[i] >= lo - 1e-9
        })
    })
}

/// Invariant vectors over the spec's grid, jump flags between adjacent
/// nodes (skipping nodes where a quantity is missing), and containment of
/// the jump cells in the estimated `K`.
pub fn continuity_scan(
    spec: &FamilySpec,
    schedule: &RadiusSchedule,
    planes: usize,
    opts: &AcvOptions,
    seed: u64,
) -> Result<ScanReport> {
    spec.validate()?;
    if spec.s > 2 {
        return Err(Error::Unsupported("scans over more than two parameters".into()));
    }
    let acv = estimate_k(spec, schedule, opts, derive_seed(seed, &[0xac5]))?;
    let ys = grid_nodes(spec);
    let mut nodes: Vec<InvariantVector> = par::map(&ys, |i, y| {
        invariant_vector(spec, y, schedule, planes, derive_seed(seed, &[0x5ca, i as u64]))
    });
    for v in &mut nodes {
        v.near_k = acv.near_k(&v.y, 1.0);
    }
    relabel_components(&mut nodes, schedule.radii()[0]);
    let mut jumps = Vec::new();
    for line in grid_lines(spec) {
        let mut last: std::collections::BTreeMap<(String, String), (usize, f64, f64)> = Default::default();
        for &i in &line {
            for (q, c, e) in nodes[i].entries() {
                let Some(val) = e.value else { continue };
                let err = e.error.unwrap_or(0.0);
                let key = (q, c);
                if let Some(&(j, pv, pe)) = last.get(&key) {
                    let delta = val - pv;
                    let threshold = JUMP_FLOOR.max(5.0 * (err * err + pe * pe).sqrt());
                    if delta.abs() > threshold {
                        jumps.push(Jump {
                            quantity: key.0.clone(),
                            component: key.1.clone(),
                            from: nodes[j].y.clone(),
                            to: nodes[i].y.clone(),
                            delta,
                            threshold,
                            contains_k: cell_meets_k(&acv, &nodes[j].y, &nodes[i].y),
                        });
                    }
                }
                last.insert(key, (i, val, err));
            }
        }
    }
    Ok(ScanReport { nodes, jumps, acv })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_rule() {
        let a = Entry::measured(1.0, 0.1, true);
        let b = Entry::exact(1.25);
        assert_eq!(IdentityResidual::new("x", &a, &b).verdict, Verdict::Pass);
        let c = Entry::exact(1.5);
        assert_eq!(IdentityResidual::new("x", &a, &c).verdict, Verdict::Fail);
        let tight = Entry::exact(1.04);
        assert_eq!(
            IdentityResidual::new("x", &Entry::exact(1.0), &tight).verdict,
            Verdict::Pass
        );
        let m = Entry::missing("did not stabilize");
        let r = IdentityResidual::new("x", &a, &m);
        assert_eq!(r.verdict, Verdict::Inconclusive);
        assert_eq!(r.note.as_deref(), Some("did not stabilize"));
        let nc = Entry::measured(1.0, 0.0, false);
        assert_eq!(IdentityResidual::new("x", &nc, &b).verdict, Verdict::Inconclusive);
    }

    #[test]
    fn combine_adds_errors_in_quadrature() {
        let c = combine(&[
            (1.0, &Entry::measured(1.0, 0.3, true)),
            (-2.0, &Entry::measured(0.5, 0.2, true)),
        ]);
        assert_eq!(c.value, Some(0.0));
        assert!((c.error.unwrap() - 0.5).abs() < 1e-12);
        assert!(c.is_settled());
    }

    #[test]
    fn hausdorff_and_matching() {
        let a = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        let b = vec![vec![0.0, 0.5]];
        assert!((hausdorff(&a, &b) - 1.25f64.sqrt()).abs() < 1e-12);
        let left = vec![a.clone(), vec![vec![5.0, 5.0]]];
        let right = vec![vec![vec![5.0, 5.1]], b.clone()];
        assert_eq!(greedy_match(&left, &right, 2.0), vec![Some(1), Some(0)]);
        assert_eq!(greedy_match(&left, &right[..1], 2.0), vec![None, Some(0)]);
    }

    #[test]
    fn line_identities() {
        let spec = FamilySpec::single(2, "x2").unwrap();
        let res = gb_identity_check(&spec, &[0.0], SetKind::Fiber, &RadiusSchedule::default(), 50, 1).unwrap();
        let ids: Vec<&str> = res.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["GB-0", "GB-1", "GB-2", "matrix-L"]);
        for r in &res {
            assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
        }
        assert!(res[0].left.unwrap().abs() < 1e-9);
        assert!((res[1].left.unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn circle_vector_has_explicit_shape() {
        let spec = FamilySpec::single(2, "x1^2 + x2^2 - 1").unwrap();
        let v = invariant_vector(&spec, &[0.0], &RadiusSchedule::default(), 20, 3);
        assert_eq!(
            (v.chi.len(), v.lambda.len(), v.kappa.len(), v.sigma.len()),
            (2, 2, 1, 2)
        );
        assert_eq!(v.components, Some(1));
        let s1 = v.get("sigma_1").unwrap().value.unwrap();
        assert!((s1 - 2.0 * std::f64::consts::PI).abs() < 0.02, "{s1}");
        assert_eq!(v.get("chi_2").unwrap().value, Some(0.0));
        assert_eq!(v.per_component.len(), 1);
    }
}
