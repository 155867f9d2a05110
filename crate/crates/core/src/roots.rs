//! Real root isolation for univariate polynomials, and the intersection of
//! a plane curve `{f = 0}` with a circle or a line.
//!
//! Roots are isolated by recursion on the derivative: between consecutive
//! critical points a polynomial is monotone, so each sign change brackets
//! exactly one root, which bisection then pins down to the last bit. A
//! critical point whose value is indistinguishable from zero (within the
//! Horner rounding bound) is reported as a tangency.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::poly::{poly1_mul, var_names, Polynomial};

/// Coefficients in ascending powers.
pub fn horner(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * t + a)
}

fn horner_bound(c: &[f64], t: f64) -> f64 {
    let at = t.abs();
    let s = c.iter().rev().fold(0.0, |acc, &a| acc * at + a.abs());
    4.0 * (c.len() as f64) * f64::EPSILON * s
}

fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(k, &a)| k as f64 * a).collect()
}

/// Drops leading coefficients that are negligible against the largest one.
pub fn trim(c: &[f64]) -> Vec<f64> {
    let big = c.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let mut v = c.to_vec();
    while v.len() > 1 && v.last().is_some_and(|a| a.abs() <= 1e-14 * big) {
        v.pop();
    }
    if big == 0.0 {
        v.clear();
    }
    v
}

fn bisect(c: &[f64], mut a: f64, mut b: f64) -> f64 {
    let mut fa = horner(c, a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = horner(c, m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn isolate(c: &[f64], a: f64, b: f64) -> Vec<f64> {
    let c = trim(c);
    match c.len() {
        0 | 1 => return Vec::new(),
        2 => {
            let r = -c[0] / c[1];
            return if r >= a && r < b { vec![r] } else { Vec::new() };
        }
        _ => {}
    }
    let crit = isolate(&derivative(&c), a, b);
    let mut knots = vec![a];
    knots.extend(crit.iter().copied().filter(|&t| t > a && t < b));
    knots.push(b);
    let mut out = Vec::new();
    for w in knots.windows(2) {
        let (u, v) = (w[0], w[1]);
        let fu = horner(&c, u);
        let fv = horner(&c, v);
        if fu == 0.0 {
            if out.last().is_none_or(|&l| l < u) {
                out.push(u);
            }
            continue;
        }
        if fv != 0.0 && (fu < 0.0) != (fv < 0.0) {
            out.push(bisect(&c, u, v));
        }
    }
    out
}

/// Simple real roots of `c` in `[a, b)`, ascending. Fails with the
/// location of a critical point whose value cannot be told apart from 0.
pub fn real_roots(c: &[f64], a: f64, b: f64) -> std::result::Result<Vec<f64>, f64> {
    let c = trim(c);
    if c.len() <= 1 {
        return Ok(Vec::new());
    }
    let crit = isolate(&derivative(&c), a, b);
    for &t in &crit {
        if horner(&c, t).abs() <= horner_bound(&c, t) {
            return Err(t);
        }
    }
    Ok(isolate(&c, a, b))
}

/// Cauchy bound: every real root lies in `(-bound, bound)`.
pub fn root_bound(c: &[f64]) -> f64 {
    let c = trim(c);
    if c.len() <= 1 {
        return 1.0;
    }
    let lead = c[c.len() - 1].abs();
    1.0 + c[..c.len() - 1].iter().fold(0.0f64, |m, a| m.max(a.abs() / lead))
}

/// All simple real roots.
pub fn all_real_roots(c: &[f64]) -> std::result::Result<Vec<f64>, f64> {
    let b = root_bound(c);
    real_roots(c, -b, b)
}

/// Chart offset: chart boundaries sit at this angle (mod π) so that
/// axis-aligned curves never meet a circle exactly on a boundary.
const CHART_OFFSET: f64 = std::f64::consts::FRAC_1_PI;

/// Points of `{f = 0}` on the circle of radius `r` about the origin of
/// ℝ², returned as angles in `[CHART_OFFSET, CHART_OFFSET + 2π)` ascending.
///
/// The circle is covered by two half-angle charts
/// `θ = θ₀ + kπ + 2·atan(t)`, `t ∈ [-1, 1)`, in each of which
/// `(1+t²)^deg · f` is a polynomial in `t`.
pub fn circle_roots(f: &Polynomial, r: f64) -> Result<Vec<f64>> {
    assert_eq!(f.nvars(), 2, "circle_roots expects a plane curve");
    let deg = f.degree() as usize;
    if f.is_zero() || deg == 0 {
        return Ok(Vec::new());
    }
    let cs = var_names("c", 2);
    let mut out = Vec::new();
    for k in 0..2 {
        let a = CHART_OFFSET + k as f64 * PI;
        let (ca, sa) = (a.cos(), a.sin());
        // x = r·(ca·c - sa·s, sa·c + ca·s)
        let x1 = Polynomial::from_terms(&cs, [(vec![1, 0], r * ca), (vec![0, 1], -r * sa)])?;
        let x2 = Polynomial::from_terms(&cs, [(vec![1, 0], r * sa), (vec![0, 1], r * ca)])?;
        let g = f.compose(&[x1, x2])?;
        let mut tp = vec![0.0; 2 * deg + 1];
        for (e, &coef) in g.terms() {
            let m = (e[0] + e[1]) as usize;
            let mut p = vec![coef];
            for _ in 0..e[0] {
                p = poly1_mul(&p, &[1.0, 0.0, -1.0]);
            }
            for _ in 0..e[1] {
                p = poly1_mul(&p, &[0.0, 2.0]);
            }
            for _ in 0..(deg - m) {
                p = poly1_mul(&p, &[1.0, 0.0, 1.0]);
            }
            for (i, v) in p.iter().enumerate() {
                tp[i] += v;
            }
        }
        let roots = real_roots(&tp, -1.0, 1.0).map_err(|t| {
            let th = a + 2.0 * t.atan();
            Error::Tangential {
                radius: r,
                point: vec![r * th.cos(), r * th.sin()],
            }
        })?;
        out.extend(roots.into_iter().map(|t| a + 2.0 * t.atan()));
    }
    for th in out.iter_mut() {
        *th = polish_angle(f, r, *th);
    }
    Ok(out)
}

/// Bisection on the angle using direct evaluation, starting from a bracket
/// a few ulps wide around the chart root.
fn polish_angle(f: &Polynomial, r: f64, th: f64) -> f64 {
    let g = |t: f64| f.eval(&[r * t.cos(), r * t.sin()]);
    let mut h = 1e-13;
    let (mut a, mut b) = (th - h, th + h);
    let mut ga = g(a);
    let gb = g(b);
    if (ga < 0.0) == (gb < 0.0) {
        h = 1e-10;
        a = th - h;
        b = th + h;
        ga = g(a);
        if (ga < 0.0) == (g(b) < 0.0) {
            return th;
        }
    }
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m);
        if (gm < 0.0) == (ga < 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Parameters `t` of the points `origin + t·direction` on `{f = 0}` with
/// `t` in `[a, b)`.
pub fn line_roots(f: &Polynomial, origin: &[f64], direction: &[f64], a: f64, b: f64) -> Result<Vec<f64>> {
    let c = f.along_line(origin, direction);
    real_roots(&c, a, b).map_err(|t| Error::Tangential {
        radius: f64::NAN,
        point: origin.iter().zip(direction).map(|(o, d)| o + t * d).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::parse_polynomial;

    fn p2(text: &str) -> Polynomial {
        parse_polynomial(text, &var_names("x", 2)).unwrap()
    }

    #[test]
    fn isolates_cubic_roots() {
        // (t-1)(t+2)(t-0.5)
        let c = poly1_mul(&poly1_mul(&[-1.0, 1.0], &[2.0, 1.0]), &[-0.5, 1.0]);
        let r = all_real_roots(&c).unwrap();
        assert_eq!(r.len(), 3);
        for (got, want) in r.iter().zip([-2.0, 0.5, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn double_root_is_tangency() {
        let c = poly1_mul(&[-1.0, 1.0], &[-1.0, 1.0]);
        assert!(all_real_roots(&c).is_err());
    }

    #[test]
    fn close_roots_are_separated() {
        let c = poly1_mul(&[-1.0, 1.0], &[-(1.0 + 1e-6), 1.0]);
        assert_eq!(all_real_roots(&c).unwrap().len(), 2);
    }

    #[test]
    fn hyperbola_meets_large_circle_four_times() {
        let f = p2("x1*x2 - 1");
        for r in [2.0, 10.0, 1000.0] {
            let th = circle_roots(&f, r).unwrap();
            assert_eq!(th.len(), 4);
            for t in th {
                assert!(f.eval(&[r * t.cos(), r * t.sin()]).abs() < 1e-9 * r * r);
            }
        }
        assert!(circle_roots(&f, 1.0).is_ok());
        assert!(circle_roots(&f, 1.5).unwrap().len() == 4);
    }

    #[test]
    fn broughton_zero_fiber_has_six_ends() {
        let f = p2("x1 + x1^2*x2");
        for r in [4.0, 64.0, 1024.0] {
            assert_eq!(circle_roots(&f, r).unwrap().len(), 6, "R = {r}");
        }
    }

    #[test]
    fn tangent_circle_is_reported() {
        let f = p2("x1 - 1");
        assert!(matches!(circle_roots(&f, 1.0), Err(Error::Tangential { .. })));
    }

    #[test]
    fn line_roots_of_circle() {
        let f = p2("x1^2 + x2^2 - 4");
        let t = line_roots(&f, &[0.0, 0.0], &[1.0, 0.0], -10.0, 10.0).unwrap();
        assert_eq!(t.len(), 2);
        assert!((t[0] + 2.0).abs() < 1e-14 && (t[1] - 2.0).abs() < 1e-14);
    }
}
