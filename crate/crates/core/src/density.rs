//! Densities at infinity: curvature integrals and volumes over growing
//! balls, normalized and extrapolated along a radius schedule.

use std::f64::consts::PI;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{self, boundary_lambda, integrate_sigma, manifold_lambda, LevelMesh};
use crate::par;
use crate::poly::Polynomial;
use crate::spec::{FamilySpec, RadiusSchedule};
use crate::topology::SetKind;

/// Default convergence tolerance for [`extrapolate`].
pub const DEFAULT_TOLERANCE: f64 = 0.05;

/// `(s_l, b_l)`: the volume of the unit `l`-sphere and of the unit `l`-ball.
pub fn geometric_constants(l: usize) -> (f64, f64) {
    let sphere = |l: usize| -> f64 {
        let mut s = if l.is_multiple_of(2) { 2.0 } else { 2.0 * PI };
        let mut k = if l.is_multiple_of(2) { 0 } else { 1 };
        while k < l {
            k += 2;
            s *= 2.0 * PI / (k - 1) as f64;
        }
        s
    };
    let b = if l == 0 { 1.0 } else { sphere(l - 1) / l as f64 };
    (sphere(l), b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DensityTarget {
    Kappa { i: usize },
    Sigma { i: usize },
    Theta,
    Lambda { k: usize, set: SetKind },
}

impl fmt::Display for DensityTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensityTarget::Kappa { i } => write!(f, "kappa:{i}"),
            DensityTarget::Sigma { i } => write!(f, "sigma:{i}"),
            DensityTarget::Theta => write!(f, "theta"),
            DensityTarget::Lambda { k, set } => write!(f, "lambda:{k}:{}", set.as_str()),
        }
    }
}

impl DensityTarget {
    /// Parses `kappa:I`, `sigma:I`, `theta`, `lambda:K` (fiber) or
    /// `lambda:K:sublevel`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.trim().split(':').collect();
        let idx = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::Spec(format!("bad index '{s}' in density target '{text}'")))
        };
        match parts.as_slice() {
            ["kappa", i] => Ok(DensityTarget::Kappa { i: idx(i)? }),
            ["sigma", i] => Ok(DensityTarget::Sigma { i: idx(i)? }),
            ["theta"] => Ok(DensityTarget::Theta),
            ["lambda", k] | ["lambda", k, "fiber"] => Ok(DensityTarget::Lambda {
                k: idx(k)?,
                set: SetKind::Fiber,
            }),
            ["lambda", k, "sublevel"] => Ok(DensityTarget::Lambda {
                k: idx(k)?,
                set: SetKind::Sublevel,
            }),
            _ => Err(Error::Spec(format!("unknown density target '{text}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DensityRow {
    pub r: f64,
    pub raw: f64,
    pub normalized: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum Rule {
    Constant,
    PowerLaw {
        alpha: f64,
    },
    LastValue,
    /// Odd Lipschitz-Killing index: identically zero.
    OddIndex,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Extrapolation {
    pub limit: f64,
    pub error: f64,
    pub rule: Rule,
    pub converged: bool,
}

/// Limit of a sequence sampled at increasing radii.
///
/// Constant tails are returned as is. Monotone tails with shrinking steps
/// are fitted by `L + a·R^(-α)` (log-log regression of the last three
/// differences); the error is the gap to the three-point Aitken limit.
/// Anything else returns the last value with `|last - previous|`.
pub fn extrapolate(radii: &[f64], values: &[f64], tol: f64) -> Result<Extrapolation> {
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(values)
        .filter(|(r, v)| r.is_finite() && v.is_finite())
        .map(|(&r, &v)| (r, v))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Precondition(format!(
            "extrapolation needs 3 finite entries, got {}",
            pts.len()
        )));
    }
    let tail = &pts[pts.len().saturating_sub(4)..];
    let v: Vec<f64> = tail.iter().map(|p| p.1).collect();
    let r: Vec<f64> = tail.iter().map(|p| p.0).collect();
    let last = v[v.len() - 1];
    let d: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
    let scale = 1.0 + v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let dmax = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if dmax <= 1e-12 * scale {
        return Ok(Extrapolation {
            limit: last,
            error: dmax,
            rule: Rule::Constant,
            converged: true,
        });
    }
    let monotone = d.iter().all(|&x| x > 0.0) || d.iter().all(|&x| x < 0.0);
    let shrinking = d.windows(2).all(|w| w[1].abs() < w[0].abs());
    let fallback = || {
        let error = (last - v[v.len() - 2]).abs();
        Extrapolation {
            limit: last,
            error,
            rule: Rule::LastValue,
            converged: error <= tol,
        }
    };
    if !(monotone && shrinking) {
        return Ok(fallback());
    }
    // log |d_j| against log R at the right end of each step
    let xs: Vec<f64> = r[1..].iter().map(|x| x.ln()).collect();
    let ys: Vec<f64> = d.iter().map(|x| x.abs().ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let alpha = -sxy / sxx;
    let rho = r[r.len() - 1] / r[r.len() - 2];
    let q = rho.powf(-alpha);
    let dl = d[d.len() - 1];
    let q3 = dl / d[d.len() - 2];
    if !(alpha > 0.0 && q < 0.95 && q3 < 0.95) {
        return Ok(fallback());
    }
    let l4 = last + dl * q / (1.0 - q);
    let l3 = last + dl * q3 / (1.0 - q3);
    let error = (l4 - l3).abs();
    Ok(Extrapolation {
        limit: l4,
        error,
        rule: Rule::PowerLaw { alpha },
        converged: error <= tol,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityStatus {
    Converged,
    NonConvergent,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityEstimate {
    pub target: DensityTarget,
    pub table: Vec<DensityRow>,
    /// Present only when the extrapolation converged.
    pub limit: Option<f64>,
    /// Best available value (the limit, or the last normalized entry).
    pub value: f64,
    /// Last-step difference, not a rigorous bound.
    pub error: f64,
    pub rule: Rule,
    pub status: DensityStatus,
}

impl DensityEstimate {
    fn from_table(target: DensityTarget, table: Vec<DensityRow>, tol: f64) -> Result<Self> {
        let radii: Vec<f64> = table.iter().map(|r| r.r).collect();
        let vals: Vec<f64> = table.iter().map(|r| r.normalized).collect();
        let ex = extrapolate(&radii, &vals, tol)?;
        Ok(Self {
            target,
            table,
            limit: ex.converged.then_some(ex.limit),
            value: ex.limit,
            error: ex.error,
            rule: ex.rule,
            status: if ex.converged {
                DensityStatus::Converged
            } else {
                DensityStatus::NonConvergent
            },
        })
    }
}

/// Continuation step for plane curves at a mesh level (`0.05` at level 4).
pub fn curve_step(level: usize) -> f64 {
    0.8 / (1u64 << level.min(20)) as f64
}

/// Grid resolution for surfaces at a mesh level (`64` at level 4).
pub fn surface_resolution(level: usize) -> usize {
    4 << level.clamp(2, 6)
}

/// Radius of the innermost ball of the multiscale surface mesh.
pub const SURFACE_INNER_RADIUS: f64 = 4.0;

/// `{f = 0} ∩ B_R` for a polynomial in two or three variables (surfaces on
/// dyadic shells, see [`geometry::mesh_surface_multiscale`]).
pub fn level_mesh(f: &Polynomial, r: f64, level: usize) -> Result<LevelMesh> {
    match f.nvars() {
        2 => geometry::trace_curve(f, r, curve_step(level)),
        3 => geometry::mesh_surface_multiscale(f, r, surface_resolution(level), SURFACE_INNER_RADIUS),
        n => Err(Error::Unsupported(format!("meshing fibers in ambient dimension {n}"))),
    }
}

fn fiber_poly(spec: &FamilySpec, y: &[f64]) -> Result<Polynomial> {
    let f = spec.level_polynomial(y)?;
    if !(2..=3).contains(&spec.n) {
        return Err(Error::Unsupported(format!(
            "densities need fibers in ℝ² or ℝ³, got n = {}",
            spec.n
        )));
    }
    Ok(f)
}

/// Runs `per_r` at every schedule radius (in parallel, order kept).
fn tabulate<F>(schedule: &RadiusSchedule, per_r: F) -> Result<Vec<DensityRow>>
where
    F: Fn(f64) -> Result<DensityRow> + Sync + Send,
{
    schedule.validate()?;
    let radii = schedule.radii();
    par::map(&radii, |_, &r| per_r(r)).into_iter().collect()
}

/// `κ_i∞ = lim (1/s_{n-d-1}) R^{-(d-i)} ∫_{W_y ∩ B_R} K_i`.
pub fn kappa_density(spec: &FamilySpec, y: &[f64], i: usize, schedule: &RadiusSchedule) -> Result<DensityEstimate> {
    let target = DensityTarget::Kappa { i };
    let f = fiber_poly(spec, y)?;
    let n = spec.n;
    let d = n - 1;
    if i > d {
        return Err(Error::Precondition(format!("κ_i needs i ≤ d = {d}")));
    }
    if i % 2 == 1 {
        let table = schedule
            .radii()
            .into_iter()
            .map(|r| DensityRow {
                r,
                raw: 0.0,
                normalized: 0.0,
            })
            .collect();
        return Ok(DensityEstimate {
            target,
            table,
            limit: Some(0.0),
            value: 0.0,
            error: 0.0,
            rule: Rule::OddIndex,
            status: DensityStatus::Converged,
        });
    }
    let (s_norm, _) = geometric_constants(n - d - 1);
    let level = spec.sampling.mesh_level;
    let table = tabulate(schedule, |r| {
        let mesh = level_mesh(&f, r, level)?;
        let raw = 2.0 * integrate_sigma(&mesh, i)?;
        Ok(DensityRow {
            r,
            raw,
            normalized: raw / s_norm / r.powi((d - i) as i32),
        })
    })?;
    DensityEstimate::from_table(target, table, DEFAULT_TOLERANCE)
}

/// `σ_i∞ = lim R^{-(n-1-i)} ∫_{W_y ∩ B_R} σ_i` with the `-∇f` orientation.
pub fn sigma_density(spec: &FamilySpec, y: &[f64], i: usize, schedule: &RadiusSchedule) -> Result<DensityEstimate> {
    let f = fiber_poly(spec, y)?;
    let n = spec.n;
    if i > n - 1 {
        return Err(Error::Precondition(format!("σ_i needs i ≤ n - 1 = {}", n - 1)));
    }
    let level = spec.sampling.mesh_level;
    let table = tabulate(schedule, |r| {
        let mesh = level_mesh(&f, r, level)?;
        let raw = integrate_sigma(&mesh, i)?;
        Ok(DensityRow {
            r,
            raw,
            normalized: raw / r.powi((n - 1 - i) as i32),
        })
    })?;
    DensityEstimate::from_table(DensityTarget::Sigma { i }, table, DEFAULT_TOLERANCE)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum VolumeMethod {
    /// Exact radial integration over `directions` rays per angle.
    Radial {
        directions: usize,
    },
    MonteCarlo {
        samples: usize,
        seed: u64,
    },
}

impl Default for VolumeMethod {
    fn default() -> Self {
        VolumeMethod::Radial { directions: 2048 }
    }
}

fn sublevel_volume(f: &Polynomial, r: f64, method: VolumeMethod) -> Result<f64> {
    match method {
        VolumeMethod::Radial { directions } => {
            let per_angle = if f.nvars() == 3 {
                (directions as f64).sqrt().ceil() as usize
            } else {
                directions
            };
            geometry::sublevel_volume_radial(f, r, per_angle)
        }
        VolumeMethod::MonteCarlo { samples, seed } => {
            // one substream per radius keeps runs order-independent
            Ok(geometry::sublevel_volume(f, r, samples, seed ^ r.to_bits())?.0)
        }
    }
}

/// `Θ∞ = lim vol({f_y ≤ 0} ∩ B_R) / (b_n R^n)` (ball normalization).
pub fn theta_density(
    spec: &FamilySpec,
    y: &[f64],
    schedule: &RadiusSchedule,
    method: VolumeMethod,
) -> Result<DensityEstimate> {
    let f = fiber_poly(spec, y)?;
    let n = spec.n;
    let (_, b) = geometric_constants(n);
    let table = tabulate(schedule, |r| {
        let raw = sublevel_volume(&f, r, method)?;
        Ok(DensityRow {
            r,
            raw,
            normalized: raw / (b * r.powi(n as i32)),
        })
    })?;
    DensityEstimate::from_table(DensityTarget::Theta, table, DEFAULT_TOLERANCE)
}

/// `Λ_k∞`: `Λ_k(X, X ∩ B_R)/(b_k R^k)` for `k ≥ 1`, the plain limit for
/// `k = 0`. Fibers use the manifold formula, sub-levels the boundary one
/// (with `Λ_n` the volume).
pub fn lambda_infinity(
    spec: &FamilySpec,
    y: &[f64],
    set: SetKind,
    k: usize,
    schedule: &RadiusSchedule,
) -> Result<DensityEstimate> {
    let f = fiber_poly(spec, y)?;
    let n = spec.n;
    let top = match set {
        SetKind::Fiber => n - 1,
        SetKind::Sublevel => n,
    };
    if k > top {
        return Err(Error::Precondition(format!("Λ_k needs k ≤ {top}")));
    }
    let (_, b) = geometric_constants(k);
    let level = spec.sampling.mesh_level;
    let table = tabulate(schedule, |r| {
        let raw = match set {
            SetKind::Fiber => manifold_lambda(&level_mesh(&f, r, level)?, k)?,
            SetKind::Sublevel if k == n => sublevel_volume(&f, r, VolumeMethod::default())?,
            SetKind::Sublevel => boundary_lambda(&level_mesh(&f, r, level)?, k)?,
        };
        let normalized = if k == 0 { raw } else { raw / (b * r.powi(k as i32)) };
        Ok(DensityRow { r, raw, normalized })
    })?;
    DensityEstimate::from_table(DensityTarget::Lambda { k, set }, table, DEFAULT_TOLERANCE)
}

/// Dispatches on the target.
pub fn estimate(
    spec: &FamilySpec,
    y: &[f64],
    target: DensityTarget,
    schedule: &RadiusSchedule,
) -> Result<DensityEstimate> {
    match target {
        DensityTarget::Kappa { i } => kappa_density(spec, y, i, schedule),
        DensityTarget::Sigma { i } => sigma_density(spec, y, i, schedule),
        DensityTarget::Theta => theta_density(spec, y, schedule, VolumeMethod::default()),
        DensityTarget::Lambda { k, set } => lambda_infinity(spec, y, set, k, schedule),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants() {
        assert_eq!(geometric_constants(0), (2.0, 1.0));
        let (s1, b1) = geometric_constants(1);
        assert!((s1 - 2.0 * PI).abs() < 1e-15 && b1 == 2.0);
        let (s2, b2) = geometric_constants(2);
        assert!((s2 - 4.0 * PI).abs() < 1e-14 && (b2 - PI).abs() < 1e-15);
        let (s3, b3) = geometric_constants(3);
        assert!((s3 - 2.0 * PI * PI).abs() < 1e-13);
        assert!((b3 - 4.0 * PI / 3.0).abs() < 1e-14);
    }

    #[test]
    fn extrapolation_rules() {
        let r = [4.0, 8.0, 16.0, 32.0];
        let c = extrapolate(&r, &[2.0; 4], 0.05).unwrap();
        assert_eq!((c.limit, c.error, c.rule), (2.0, 0.0, Rule::Constant));
        let p: Vec<f64> = r.iter().map(|x| 2.0 + 1.0 / x).collect();
        let e = extrapolate(&r, &p, 0.05).unwrap();
        assert!((e.limit - 2.0).abs() < 0.01 && e.converged);
        match e.rule {
            Rule::PowerLaw { alpha } => assert!((alpha - 1.0).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
        let a = extrapolate(&r, &[1.0, -1.0, 1.0, -1.0], 0.05).unwrap();
        assert!(!a.converged && a.rule == Rule::LastValue);
        assert!(extrapolate(&r[..2], &[1.0, 1.0], 0.05).is_err());
    }

    #[test]
    fn targets_round_trip() {
        for t in ["kappa:0", "sigma:1", "theta", "lambda:0:fiber", "lambda:2:sublevel"] {
            assert_eq!(DensityTarget::parse(t).unwrap().to_string(), t);
        }
        assert!(DensityTarget::parse("kappa").is_err());
    }

    #[test]
    fn odd_kappa_is_zero_without_meshing() {
        // a singular fiber would fail if it were meshed
        let spec = FamilySpec::single(3, "x1*x2").unwrap();
        let e = kappa_density(&spec, &[0.0], 1, &RadiusSchedule::default()).unwrap();
        assert_eq!(e.limit, Some(0.0));
        assert_eq!(e.rule, Rule::OddIndex);
    }
}
