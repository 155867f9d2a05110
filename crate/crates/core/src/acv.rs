//! Estimating the generalized critical values `K = K₀ ∪ K∞` of a family:
//! multistart Newton for ordinary critical values, sphere-by-sphere
//! minimization of the Malgrange functional for asymptotic ones, and the
//! plane-section test.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, norm, Mat};
use crate::par;
use crate::poly::{restrict_leading, restrict_to_plane};
use crate::rabier::{nu_of_graph_projection, LinearMap};
use crate::rng;
use crate::spec::{FamilyKind, FamilySpec, RadiusSchedule};
use crate::topology::sample_grassmannian;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AcvOptions {
    pub starts: usize,
    /// Half-width of the band `|φ(w) - c| ≤ η`.
    pub eta: f64,
    /// Suspect when `last < decay_ratio · first` ...
    pub decay_ratio: f64,
    /// ... and the fitted log-log slope is below this.
    pub slope_threshold: f64,
    /// Half-width of the `x` box searched for ordinary critical points.
    pub box_half_width: f64,
    pub max_iter: usize,
}

impl Default for AcvOptions {
    fn default() -> Self {
        Self {
            starts: 64,
            eta: 1e-2,
            decay_ratio: 0.1,
            slope_threshold: -0.25,
            box_half_width: 4.0,
            max_iter: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalWitness {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalSet {
    pub witnesses: Vec<CriticalWitness>,
    /// No start converged: the set may be incomplete.
    pub coverage_warning: bool,
}

impl CriticalSet {
    pub fn values(&self) -> Vec<Vec<f64>> {
        self.witnesses.iter().map(|w| w.y.clone()).collect()
    }
}

const CRITICAL_RESIDUAL: f64 = 1e-8;

/// Residual and Jacobian of the square (or under-determined) system whose
/// zeros are the points where `D_wφ` drops rank.
fn critical_system(spec: &FamilySpec, z: &[f64]) -> Result<(Vec<f64>, Mat)> {
    let (n, s) = (spec.n, spec.s);
    match spec.kind {
        // unknowns (x, λ): Σ λ_a ∇G_a = 0, |λ|² = 1
        FamilyKind::MapGraph => {
            let (x, lam) = z.split_at(n);
            let jets = spec
                .polys
                .iter()
                .map(|g| g.jet(x))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let mut r = vec![0.0; n + 1];
            let mut jac = Mat::zeros(n + 1, n + s);
            for (a, j) in jets.iter().enumerate() {
                for i in 0..n {
                    r[i] += lam[a] * j.gradient[i];
                    jac[(i, n + a)] = j.gradient[i];
                    for k in 0..n {
                        jac[(i, k)] += lam[a] * j.hessian[i][k];
                    }
                }
            }
            r[n] = lam.iter().map(|v| v * v).sum::<f64>() - 1.0;
            for a in 0..s {
                jac[(n, n + a)] = 2.0 * lam[a];
            }
            Ok((r, jac))
        }
        // unknowns (x, y): F = 0, ∂F/∂x = 0
        FamilyKind::HypersurfaceFamily => {
            let j = spec.polys[0].jet(z)?;
            let m = n + s;
            let mut r = vec![j.value];
            r.extend_from_slice(&j.gradient[..n]);
            let mut jac = Mat::zeros(n + 1, m);
            for k in 0..m {
                jac[(0, k)] = j.gradient[k];
                for i in 0..n {
                    jac[(1 + i, k)] = j.hessian[i][k];
                }
            }
            Ok((r, jac))
        }
    }
}

/// Ordinary critical values whose witnesses lie in `x_box` and whose values
/// lie in `y_box`, from `starts` Newton runs.
pub fn critical_values(
    spec: &FamilySpec,
    x_box: &[(f64, f64)],
    y_box: &[(f64, f64)],
    starts: usize,
    seed: u64,
) -> Result<CriticalSet> {
    let (n, s) = (spec.n, spec.s);
    if s > 2 {
        return Err(Error::Unsupported("parameter spaces of dimension > 2".into()));
    }
    if x_box.len() != n || y_box.len() != s {
        return Err(Error::Precondition("box dimensions do not match the family".into()));
    }
    let idx: Vec<u64> = (0..starts as u64).collect();
    let found: Vec<Option<CriticalWitness>> = par::map(&idx, |_, &i| {
        let mut g = rng::substream(seed, &[0xc0, i]);
        let mut z: Vec<f64> = x_box.iter().map(|&(a, b)| g.random_range(a..=b)).collect();
        match spec.kind {
            FamilyKind::MapGraph => z.extend(rng::unit_vec(&mut g, s)),
            FamilyKind::HypersurfaceFamily => z.extend(y_box.iter().map(|&(a, b)| g.random_range(a..=b))),
        }
        let diam = x_box.iter().map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt();
        for _ in 0..60 {
            let (r, jac) = critical_system(spec, &z).ok()?;
            let res = norm(&r);
            if !res.is_finite() {
                return None;
            }
            if res <= 1e-13 {
                break;
            }
            let mut dz = linalg::min_norm_solve(&jac, &r)?;
            let step = norm(&dz);
            if step > diam {
                dz.iter_mut().for_each(|v| *v *= diam / step);
            }
            linalg::axpy(-1.0, &dz, &mut z);
        }
        let (r, _) = critical_system(spec, &z).ok()?;
        let residual = norm(&r);
        if residual > CRITICAL_RESIDUAL {
            return None;
        }
        let x = z[..n].to_vec();
        let inside = x.iter().zip(x_box).all(|(v, &(a, b))| {
            let pad = 0.25 * (b - a);
            *v >= a - pad && *v <= b + pad
        });
        let y = match spec.kind {
            FamilyKind::MapGraph => spec.polys.iter().map(|g| g.eval(&x)).collect(),
            FamilyKind::HypersurfaceFamily => z[n..].to_vec(),
        };
        let in_range = y.iter().zip(y_box).all(|(v, &(a, b))| *v >= a - 1e-9 && *v <= b + 1e-9);
        (inside && in_range).then_some(CriticalWitness { x, y, residual })
    });
    let converged = found.iter().any(Option::is_some);
    let mut witnesses: Vec<CriticalWitness> = Vec::new();
    for w in found.into_iter().flatten() {
        let dup = witnesses
            .iter()
            .any(|o| o.y.iter().zip(&w.y).all(|(a, b)| (a - b).abs() <= 1e-6));
        if !dup {
            witnesses.push(w);
        }
    }
    witnesses.sort_by(|a, b| a.y.partial_cmp(&b.y).unwrap_or(std::cmp::Ordering::Equal));
    Ok(CriticalSet {
        witnesses,
        coverage_warning: !converged,
    })
}

/// Search space of the Malgrange functional: `x` for map-graph families
/// (with `w = (x, G(x))`), `w = (x, y)` for hypersurface families.
struct Problem<'a> {
    spec: &'a FamilySpec,
    r: f64,
    c: &'a [f64],
    eta: f64,
}

impl Problem<'_> {
    fn dim(&self) -> usize {
        match self.spec.kind {
            FamilyKind::MapGraph => self.spec.n,
            FamilyKind::HypersurfaceFamily => self.spec.n + self.spec.s,
        }
    }

    fn w(&self, z: &[f64]) -> Vec<f64> {
        match self.spec.kind {
            FamilyKind::MapGraph => self.spec.embed(z),
            FamilyKind::HypersurfaceFamily => z.to_vec(),
        }
    }

    /// Equality constraints: `|w| - R`, and `F = 0` for hypersurfaces.
    fn equalities(&self, z: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let w = self.w(z);
        let wn = norm(&w).max(f64::MIN_POSITIVE);
        let sphere = wn - self.r;
        match self.spec.kind {
            FamilyKind::MapGraph => {
                let n = self.spec.n;
                let mut grad: Vec<f64> = z.iter().map(|v| v / wn).collect();
                for g in &self.spec.polys {
                    let j = g.jet(z)?;
                    linalg::axpy(j.value / wn, &j.gradient[..n], &mut grad);
                }
                Ok((vec![sphere], vec![grad]))
            }
            FamilyKind::HypersurfaceFamily => {
                let j = self.spec.polys[0].jet(z)?;
                let sg: Vec<f64> = z.iter().map(|v| v / wn).collect();
                Ok((vec![j.value, sphere], vec![j.gradient, sg]))
            }
        }
    }

    /// `φ(z)` and its gradient rows.
    fn phi(&self, z: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        match self.spec.kind {
            FamilyKind::MapGraph => {
                let mut v = Vec::new();
                let mut rows = Vec::new();
                for g in &self.spec.polys {
                    let j = g.jet(z)?;
                    v.push(j.value);
                    rows.push(j.gradient);
                }
                Ok((v, rows))
            }
            FamilyKind::HypersurfaceFamily => {
                let (n, s) = (self.spec.n, self.spec.s);
                let v = z[n..].to_vec();
                let rows = (0..s)
                    .map(|a| {
                        let mut e = vec![0.0; n + s];
                        e[n + a] = 1.0;
                        e
                    })
                    .collect();
                Ok((v, rows))
            }
        }
    }

    /// `ν^φ` in closed form, valid off the set as well: the graph formula
    /// for map-graph families, `|∇ₓF|/|∇F|` for hypersurfaces.
    fn nu(&self, z: &[f64]) -> Result<f64> {
        match self.spec.kind {
            FamilyKind::MapGraph => {
                let rows = self
                    .spec
                    .polys
                    .iter()
                    .map(|g| g.jet(z).map(|j| j.gradient))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                Ok(nu_of_graph_projection(&LinearMap::from_rows(&rows)?))
            }
            FamilyKind::HypersurfaceFamily => {
                let j = self.spec.polys[0].jet(z)?;
                let g = j.gradient_norm();
                if g == 0.0 {
                    return Ok(0.0);
                }
                Ok(norm(&j.gradient[..self.spec.n]) / g)
            }
        }
    }

    /// Residuals and rows of the equalities plus the `φ` constraints:
    /// `φ = c` when `exact`, otherwise only components outside the band,
    /// pinned to its edge.
    fn system(&self, z: &[f64], exact: bool) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let (mut res, mut rows) = self.equalities(z)?;
        let (phi, prow) = self.phi(z)?;
        for (a, (&p, row)) in phi.iter().zip(prow).enumerate() {
            let (lo, hi) = (self.c[a] - self.eta, self.c[a] + self.eta);
            let target = if exact {
                Some(self.c[a])
            } else if p < lo {
                Some(lo)
            } else if p > hi {
                Some(hi)
            } else {
                None
            };
            if let Some(t) = target {
                res.push(p - t);
                rows.push(row);
            }
        }
        Ok((res, rows))
    }

    /// Damped min-norm Newton onto the feasible set.
    fn restore(&self, z: &[f64], exact: bool) -> Result<Option<Vec<f64>>> {
        let mut z = z.to_vec();
        let tol = 1e-10 * (1.0 + self.r);
        let merit = |res: &[f64]| res.iter().map(|v| v * v).sum::<f64>();
        let (mut res, mut rows) = self.system(&z, exact)?;
        for _ in 0..100 {
            if res.iter().all(|v| v.abs() <= tol) {
                return Ok(Some(z));
            }
            let jac = Mat::from_rows(&rows);
            let Some(dz) = linalg::min_norm_solve(&jac, &res) else {
                return Ok(None);
            };
            if !dz.iter().all(|v| v.is_finite()) {
                return Ok(None);
            }
            let m0 = merit(&res);
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let mut zt = z.clone();
                linalg::axpy(-alpha, &dz, &mut zt);
                let (rt, jt) = self.system(&zt, exact)?;
                let mt = merit(&rt);
                if mt.is_finite() && mt < m0 * (1.0 - 1e-4 * alpha) {
                    z = zt;
                    res = rt;
                    rows = jt;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                return Ok(None);
            }
        }
        Ok(None)
    }

    /// Projected gradient descent of `ν` along the feasible set.
    fn descend(&self, mut z: Vec<f64>, max_iter: usize) -> Result<(Vec<f64>, f64)> {
        let m = self.dim();
        let mut f = self.nu(&z)?;
        let mut step = 0.01 * self.r;
        let mut stalled = 0;
        for _ in 0..max_iter {
            let h = 1e-7 * (1.0 + norm(&z));
            let mut g = vec![0.0; m];
            for i in 0..m {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[i] += h;
                zm[i] -= h;
                g[i] = (self.nu(&zp)? - self.nu(&zm)?) / (2.0 * h);
            }
            let (_, mut rows) = self.equalities(&z)?;
            let (phi, prow) = self.phi(&z)?;
            for (a, (&p, row)) in phi.iter().zip(prow).enumerate() {
                // active band edge, with the gradient pushing outwards
                let outward = if p >= self.c[a] { 1.0 } else { -1.0 };
                let slope: f64 = -linalg::dot(&g, &row) * outward;
                if (p - self.c[a]).abs() >= self.eta * (1.0 - 1e-9) && slope > 0.0 {
                    rows.push(row);
                }
            }
            let jac = Mat::from_rows(&rows);
            let jg = jac.matvec(&g);
            let Some(v) = linalg::min_norm_solve(&jac, &jg) else {
                break;
            };
            let p: Vec<f64> = g.iter().zip(&v).map(|(a, b)| a - b).collect();
            let pn = norm(&p);
            if pn == 0.0 || !pn.is_finite() {
                break;
            }
            let mut moved = false;
            while step > 1e-13 * (1.0 + self.r) {
                let mut zt = z.clone();
                linalg::axpy(-step / pn, &p, &mut zt);
                if let Some(zr) = self.restore(&zt, false)? {
                    let ft = self.nu(&zr)?;
                    if ft < f {
                        stalled = if f - ft <= 1e-10 * f { stalled + 1 } else { 0 };
                        z = zr;
                        f = ft;
                        moved = true;
                        step *= 2.0;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !moved || stalled >= 3 {
                break;
            }
        }
        Ok((z, f))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileEntry {
    pub r: f64,
    /// `inf M` over the band on `S_R`; `None` when the band misses the
    /// sphere (fiber-bounded).
    pub value: Option<f64>,
    pub witness: Option<Vec<f64>>,
    /// Starts that reached the feasible set.
    pub feasible_starts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InfimumProfile {
    pub c: Vec<f64>,
    pub entries: Vec<ProfileEntry>,
}

/// End points handed from one radius to the next as extra starts.
const CARRIED: usize = 6;

fn linalg_diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Per-radius infimum of `M(w) = (1+|w|)·ν^φ(w)` over
/// `{w ∈ W : |w| = R, |φ(w) - c| ≤ η}`.
pub fn infimum_profile(
    spec: &FamilySpec,
    c: &[f64],
    schedule: &RadiusSchedule,
    opts: &AcvOptions,
    seed: u64,
) -> Result<InfimumProfile> {
    if c.len() != spec.s {
        return Err(Error::Spec(format!(
            "parameter has {} entries, expected {}",
            c.len(),
            spec.s
        )));
    }
    schedule.validate()?;
    let mut entries = Vec::new();
    let mut carry: Vec<Vec<f64>> = Vec::new();
    let mut prev_r: Option<f64> = None;
    for (ri, r) in schedule.radii().into_iter().enumerate() {
        let prob = Problem {
            spec,
            r,
            c,
            eta: opts.eta,
        };
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut feasible = 0;
        let mut ends: Vec<(f64, Vec<f64>)> = Vec::new();
        // random starts, then the previous radius' end points rescaled
        let scale = prev_r.map_or(1.0, |p| r / p);
        let carried: Vec<Vec<f64>> = carry.iter().map(|z| z.iter().map(|v| v * scale).collect()).collect();
        for k in 0..opts.starts + carried.len() {
            let z0: Vec<f64> = if k < opts.starts {
                let mut g = rng::substream(seed, &[0x1f, ri as u64, k as u64]);
                rng::unit_vec(&mut g, prob.dim()).iter().map(|v| v * r).collect()
            } else {
                carried[k - opts.starts].clone()
            };
            let Some(z) = prob.restore(&z0, true)? else { continue };
            feasible += 1;
            let (z, nu) = prob.descend(z, opts.max_iter)?;
            if best.as_ref().is_none_or(|(b, _)| nu < *b) {
                best = Some((nu, z.clone()));
            }
            ends.push((nu, z));
        }
        ends.sort_by(|a, b| a.0.total_cmp(&b.0));
        carry.clear();
        for (_, z) in ends {
            if carry.len() == CARRIED && !carry.is_empty() {
                break;
            }
            if carry.iter().all(|c| norm(&linalg_diff(c, &z)) > 1e-3 * (1.0 + r)) {
                carry.push(z);
            }
        }
        if !carry.is_empty() {
            prev_r = Some(r);
        }
        let (value, witness) = match best {
            Some((nu, z)) => {
                let w = prob.w(&z);
                (Some((1.0 + norm(&w)) * nu), Some(w))
            }
            None => (None, None),
        };
        entries.push(ProfileEntry {
            r,
            value,
            witness,
            feasible_starts: feasible,
        });
    }
    Ok(InfimumProfile { c: c.to_vec(), entries })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum ValueClass {
    MrRegular { lower_bound: f64 },
    AcvSuspect { slope: f64 },
    FiberBounded,
}

impl ValueClass {
    pub fn label(&self) -> &'static str {
        match self {
            ValueClass::MrRegular { .. } => "MR-regular",
            ValueClass::AcvSuspect { .. } => "ACV-suspect",
            ValueClass::FiberBounded => "fiber-bounded",
        }
    }

    /// MR holds at the value (a bounded fiber band satisfies it vacuously).
    pub fn is_regular(&self) -> bool {
        !matches!(self, ValueClass::AcvSuspect { .. })
    }
}

/// Least-squares slope of `ln M` against `ln R` over the last four finite
/// entries.
pub fn loglog_slope(entries: &[ProfileEntry]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = entries
        .iter()
        .filter_map(|e| e.value.filter(|v| *v > 0.0).map(|v| (e.r.ln(), v.ln())))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let tail = &pts[pts.len().saturating_sub(4)..];
    let m = tail.len() as f64;
    let mx = tail.iter().map(|p| p.0).sum::<f64>() / m;
    let my = tail.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

pub fn classify_value(profile: &InfimumProfile, opts: &AcvOptions) -> Result<ValueClass> {
    let finite: Vec<f64> = profile.entries.iter().filter_map(|e| e.value).collect();
    let last_bounded = profile.entries.last().is_some_and(|e| e.value.is_none());
    if last_bounded {
        return Ok(ValueClass::FiberBounded);
    }
    if finite.len() < 3 {
        return Err(Error::Precondition(format!(
            "classification needs 3 finite profile entries, got {}",
            finite.len()
        )));
    }
    let slope = loglog_slope(&profile.entries).unwrap_or(0.0);
    let (first, last) = (finite[0], finite[finite.len() - 1]);
    if last < opts.decay_ratio * first && slope < opts.slope_threshold {
        return Ok(ValueClass::AcvSuspect { slope });
    }
    Ok(ValueClass::MrRegular {
        lower_bound: finite.iter().cloned().fold(f64::INFINITY, f64::min),
    })
}

/// The strictly decreasing tail of a profile, ending at its last radius.
pub fn decreasing_witnesses(profile: &InfimumProfile) -> Vec<ProfileEntry> {
    let mut out: Vec<ProfileEntry> = Vec::new();
    for e in profile.entries.iter().rev() {
        match (e.value, out.last().and_then(|l| l.value)) {
            (Some(v), Some(next)) if v > next => out.push(e.clone()),
            (Some(_), None) if out.is_empty() => out.push(e.clone()),
            _ => break,
        }
    }
    out.reverse();
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodeReport {
    pub c: Vec<f64>,
    pub class: Option<ValueClass>,
    pub profile: Option<InfimumProfile>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KSource {
    K0,
    Kinf,
}

/// A point (`lo = hi`) or box of the estimated `K`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KEntry {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub source: KSource,
    /// Decreasing witness sequence (asymptotic entries only).
    pub witnesses: Vec<ProfileEntry>,
}

impl KEntry {
    /// Distance in the max-norm from `y` to the entry.
    pub fn distance(&self, y: &[f64]) -> f64 {
        y.iter()
            .enumerate()
            .map(|(i, &v)| (self.lo[i] - v).max(v - self.hi[i]).max(0.0))
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AcvReport {
    pub options: AcvOptions,
    pub k0: CriticalSet,
    pub nodes: Vec<NodeReport>,
    /// `K₀` points followed by merged suspect clusters.
    pub k: Vec<KEntry>,
    /// Grid spacing per parameter axis.
    pub cell: Vec<f64>,
}

impl AcvReport {
    /// `y` lies within `cells` grid cells of the estimated `K`.
    pub fn near_k(&self, y: &[f64], cells: f64) -> bool {
        let tol = self.cell.iter().cloned().fold(0.0, f64::max) * cells + 1e-9;
        self.k.iter().any(|e| e.distance(y) <= tol)
    }
}

/// Grid nodes of the spec's scan grid (one axis, or the product of two).
pub fn grid_nodes(spec: &FamilySpec) -> Vec<Vec<f64>> {
    match spec.grid.as_slice() {
        [a] => a.values().into_iter().map(|v| vec![v]).collect(),
        [a, b] => {
            let bv = b.values();
            a.values()
                .into_iter()
                .flat_map(|u| bv.iter().map(move |&v| vec![u, v]))
                .collect()
        }
        _ => Vec::new(),
    }
}

/// `K₀` from [`critical_values`] plus merged ACV-suspect grid nodes.
pub fn estimate_k(spec: &FamilySpec, schedule: &RadiusSchedule, opts: &AcvOptions, seed: u64) -> Result<AcvReport> {
    if spec.s > 2 {
        return Err(Error::Unsupported("parameter spaces of dimension > 2".into()));
    }
    let cell: Vec<f64> = spec.grid.iter().map(|a| a.cell()).collect();
    let x_box = vec![(-opts.box_half_width, opts.box_half_width); spec.n];
    let y_box: Vec<(f64, f64)> = spec
        .grid
        .iter()
        .zip(&cell)
        .map(|(a, h)| (a.min - h, a.max + h))
        .collect();
    let k0 = critical_values(spec, &x_box, &y_box, opts.starts, seed)?;
    let nodes_y = grid_nodes(spec);
    let nodes: Vec<NodeReport> = par::map(&nodes_y, |i, c| {
        let run = || -> Result<(InfimumProfile, ValueClass)> {
            let p = infimum_profile(spec, c, schedule, opts, rng::derive_seed(seed, &[0x0de, i as u64]))?;
            let class = classify_value(&p, opts)?;
            Ok((p, class))
        };
        match run() {
            Ok((p, class)) => NodeReport {
                c: c.clone(),
                class: Some(class),
                profile: Some(p),
                error: None,
            },
            Err(e) => NodeReport {
                c: c.clone(),
                class: None,
                profile: None,
                error: Some(e.to_string()),
            },
        }
    });
    let mut k: Vec<KEntry> = k0
        .witnesses
        .iter()
        .map(|w| KEntry {
            lo: w.y.clone(),
            hi: w.y.clone(),
            source: KSource::K0,
            witnesses: Vec::new(),
        })
        .collect();
    k.extend(merge_suspects(spec, &nodes));
    Ok(AcvReport {
        options: *opts,
        k0,
        nodes,
        k,
        cell,
    })
}

/// Connected clusters (grid neighbours) of suspect nodes, as bounding boxes.
fn merge_suspects(spec: &FamilySpec, nodes: &[NodeReport]) -> Vec<KEntry> {
    let suspect: Vec<bool> = nodes
        .iter()
        .map(|n| matches!(n.class, Some(ValueClass::AcvSuspect { .. })))
        .collect();
    let dims: Vec<usize> = spec.grid.iter().map(|a| a.steps).collect();
    let coords = |i: usize| -> Vec<usize> {
        if dims.len() == 2 {
            vec![i / dims[1], i % dims[1]]
        } else {
            vec![i]
        }
    };
    let mut seen = vec![false; nodes.len()];
    let mut out = Vec::new();
    for start in 0..nodes.len() {
        if !suspect[start] || seen[start] {
            continue;
        }
        let mut stack = vec![start];
        let mut members = Vec::new();
        seen[start] = true;
        while let Some(i) = stack.pop() {
            members.push(i);
            for j in 0..nodes.len() {
                if suspect[j] && !seen[j] {
                    let (a, b) = (coords(i), coords(j));
                    let d: usize = a.iter().zip(&b).map(|(x, y)| x.abs_diff(*y)).sum();
                    if d == 1 {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        members.sort_unstable();
        let s = nodes[start].c.len();
        let lo: Vec<f64> = (0..s)
            .map(|a| members.iter().map(|&i| nodes[i].c[a]).fold(f64::INFINITY, f64::min))
            .collect();
        let hi: Vec<f64> = (0..s)
            .map(|a| members.iter().map(|&i| nodes[i].c[a]).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        // witnesses from the member with the smallest final infimum
        let best = members
            .iter()
            .filter_map(|&i| nodes[i].profile.as_ref())
            .min_by(|a, b| {
                let fa = a.entries.last().and_then(|e| e.value).unwrap_or(f64::INFINITY);
                let fb = b.entries.last().and_then(|e| e.value).unwrap_or(f64::INFINITY);
                fa.total_cmp(&fb)
            });
        out.push(KEntry {
            lo,
            hi,
            source: KSource::Kinf,
            witnesses: best.map(decreasing_witnesses).unwrap_or_default(),
        });
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SectionTest {
    pub c: Vec<f64>,
    pub k: usize,
    pub planes: usize,
    pub passed: usize,
    pub pass_fraction: f64,
    pub resampled: usize,
    pub failed: usize,
}

/// Restricts the `x`-variables of a family to an `l`-plane.
pub fn restrict_family(spec: &FamilySpec, basis: &[Vec<f64>]) -> Result<FamilySpec> {
    let mut out = spec.clone();
    out.n = basis.len();
    out.polys = match spec.kind {
        FamilyKind::MapGraph => spec
            .polys
            .iter()
            .map(|g| restrict_to_plane(g, basis))
            .collect::<std::result::Result<Vec<_>, _>>()?,
        FamilyKind::HypersurfaceFamily => vec![restrict_leading(&spec.polys[0], basis, spec.n)?],
    };
    out.validate()?;
    Ok(out)
}

fn degenerate_restriction(spec: &FamilySpec, restricted: &FamilySpec) -> bool {
    let x_free = |p: &crate::poly::Polynomial, n: usize| p.terms().keys().all(|e| e[..n].iter().all(|&k| k == 0));
    match spec.kind {
        FamilyKind::MapGraph => restricted.polys.iter().any(|p| p.degree() == 0),
        FamilyKind::HypersurfaceFamily => x_free(&restricted.polys[0], restricted.n),
    }
}

/// Fraction of random sections `P × ℝˢ` (`P ∈ G(k-s, n)`) on which `c`
/// stays MR-regular (a bounded fiber band counts as regular).
pub fn section_mr_test(
    spec: &FamilySpec,
    c: &[f64],
    k: usize,
    planes: usize,
    schedule: &RadiusSchedule,
    opts: &AcvOptions,
    seed: u64,
) -> Result<SectionTest> {
    let (n, s) = (spec.n, spec.s);
    if k < n + s - spec.dim_w() || k <= s || k - s > n {
        return Err(Error::Precondition(format!(
            "section dimension k = {k} must satisfy max(n+s-dim W, s+1) ≤ k ≤ n+s"
        )));
    }
    let base = classify_value(&infimum_profile(spec, c, schedule, opts, seed)?, opts)?;
    if !base.is_regular() {
        return Err(Error::Precondition(format!(
            "value {c:?} is {}, not MR-regular",
            base.label()
        )));
    }
    let l = k - s;
    let idx: Vec<u64> = (0..planes as u64).collect();
    let results: Vec<(Option<bool>, usize)> = par::map(&idx, |_, &i| {
        let mut resampled = 0;
        for attempt in 0..16u64 {
            let Ok(ps) = sample_grassmannian(l, n, 1, rng::derive_seed(seed, &[0x5ec, i, attempt])) else {
                return (None, resampled);
            };
            let Ok(rs) = restrict_family(spec, &ps[0].basis) else {
                return (None, resampled);
            };
            if degenerate_restriction(spec, &rs) {
                resampled += 1;
                continue;
            }
            let class = infimum_profile(&rs, c, schedule, opts, rng::derive_seed(seed, &[0x5ed, i]))
                .and_then(|p| classify_value(&p, opts));
            return (class.ok().map(|cl| cl.is_regular()), resampled);
        }
        (None, resampled)
    });
    let passed = results.iter().filter(|r| r.0 == Some(true)).count();
    let failed = results.iter().filter(|r| r.0.is_none()).count();
    Ok(SectionTest {
        c: c.to_vec(),
        k,
        planes,
        passed,
        pass_fraction: if planes == 0 {
            0.0
        } else {
            passed as f64 / planes as f64
        },
        resampled: results.iter().map(|r| r.1).sum(),
        failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rabier::fiber_rabier;

    fn quick() -> AcvOptions {
        AcvOptions {
            starts: 16,
            ..AcvOptions::default()
        }
    }

    #[test]
    fn critical_value_examples() {
        let bx = [(-4.0, 4.0), (-4.0, 4.0)];
        let yb = [(-1.0, 1.0)];
        let g = FamilySpec::map_graph(2, &["x1"]).unwrap();
        let cs = critical_values(&g, &bx, &yb, 32, 1).unwrap();
        assert!(cs.witnesses.is_empty() && cs.coverage_warning);
        let g = FamilySpec::map_graph(2, &["x1*x2"]).unwrap();
        let cs = critical_values(&g, &bx, &yb, 32, 1).unwrap();
        assert_eq!(cs.witnesses.len(), 1);
        assert!(cs.witnesses[0].y[0].abs() < 1e-12 && norm(&cs.witnesses[0].x) < 1e-8);
        let f = FamilySpec::hypersurface(2, 1, "x1^2 + x2^2 - y1").unwrap();
        let cs = critical_values(&f, &bx, &yb, 32, 1).unwrap();
        assert_eq!(cs.values(), vec![vec![0.0]]);
        assert!(cs.witnesses[0].residual <= CRITICAL_RESIDUAL);
    }

    #[test]
    fn closed_form_nu_matches_frames() {
        let f = FamilySpec::hypersurface(2, 1, "x1*x2 - y1").unwrap();
        let prob = Problem {
            spec: &f,
            r: 1.0,
            c: &[0.0],
            eta: 0.01,
        };
        for w in [[1.0, 2.0, 2.0], [0.5, -3.0, -1.5]] {
            assert!((prob.nu(&w).unwrap() - fiber_rabier(&f, &w).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_profile_is_closed_form() {
        let g = FamilySpec::map_graph(2, &["x1"]).unwrap();
        let sched = RadiusSchedule::new(4.0, 2.0, 4).unwrap();
        let p = infimum_profile(&g, &[0.0], &sched, &quick(), 3).unwrap();
        for e in &p.entries {
            let want = (1.0 + e.r) / 2f64.sqrt();
            assert!((e.value.unwrap() - want).abs() < 1e-9 * want, "{e:?}");
        }
        let class = classify_value(&p, &quick()).unwrap();
        match class {
            ValueClass::MrRegular { lower_bound } => assert!((lower_bound - 5.0 / 2f64.sqrt()).abs() < 1e-8),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn broughton_profile_decays() {
        let g = FamilySpec::map_graph(2, &["x1 + x1^2*x2"]).unwrap();
        let p = infimum_profile(&g, &[0.0], &RadiusSchedule::default(), &quick(), 5).unwrap();
        let class = classify_value(&p, &quick()).unwrap();
        let ValueClass::AcvSuspect { slope } = class else {
            panic!("{class:?} {p:?}")
        };
        assert!((slope + 1.0).abs() < 0.2, "{slope}");
        // oracle: M along the path (-1/(2t), t) with |w| = R
        let last = p.entries.last().unwrap();
        let t = last.r;
        let x = [-1.0 / (2.0 * t), t];
        let m = crate::rabier::malgrange_at_x(&g, &x).unwrap();
        assert!(last.value.unwrap() <= m * 1.01, "{} vs {m}", last.value.unwrap());
        assert!(decreasing_witnesses(&p).len() >= 3);
    }

    #[test]
    fn compact_band_is_fiber_bounded() {
        let g = FamilySpec::map_graph(2, &["x1^2 + x2^2"]).unwrap();
        let p = infimum_profile(&g, &[1.0], &RadiusSchedule::default(), &quick(), 5).unwrap();
        assert!(p.entries.iter().all(|e| e.value.is_none()));
        assert_eq!(classify_value(&p, &quick()).unwrap(), ValueClass::FiberBounded);
    }
}
