//! Sparse multivariate polynomials with real coefficients.
//!
//! A [`Polynomial`] stores its terms in a `BTreeMap` keyed by exponent
//! vectors, so iteration order (and therefore every floating point
//! reduction over terms) is fixed.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::PolyError;

/// Largest exponent accepted by the parser.
pub const MAX_EXPONENT: u32 = 30;

/// Exponent vector of a monomial.
pub type Exponents = Vec<u32>;

#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    variables: Vec<String>,
    terms: BTreeMap<Exponents, f64>,
}

impl Polynomial {
    pub fn zero(variables: &[String]) -> Self {
        Self {
            variables: variables.to_vec(),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(variables: &[String], c: f64) -> Self {
        let mut p = Self::zero(variables);
        p.add_term(vec![0; variables.len()], c);
        p
    }

    /// The polynomial `x_index`.
    pub fn variable(variables: &[String], index: usize) -> Self {
        let mut e = vec![0; variables.len()];
        e[index] = 1;
        let mut p = Self::zero(variables);
        p.add_term(e, 1.0);
        p
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs; like terms
    /// are merged and zero coefficients dropped.
    pub fn from_terms<I>(variables: &[String], terms: I) -> Result<Self, PolyError>
    where
        I: IntoIterator<Item = (Exponents, f64)>,
    {
        let mut p = Self::zero(variables);
        for (e, c) in terms {
            if e.len() != variables.len() {
                return Err(PolyError::DimensionMismatch {
                    expected: variables.len(),
                    found: e.len(),
                });
            }
            p.add_term(e, c);
        }
        Ok(p)
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn nvars(&self) -> usize {
        self.variables.len()
    }

    pub fn terms(&self) -> &BTreeMap<Exponents, f64> {
        &self.terms
    }

    pub fn coefficient(&self, exponents: &[u32]) -> f64 {
        self.terms.get(exponents).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum::<u32>()).max().unwrap_or(0)
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    fn add_term(&mut self, e: Exponents, c: f64) {
        if c == 0.0 {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(e) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
        }
    }

    /// Drops terms whose magnitude is below `rel` times the largest one.
    pub fn prune(mut self, rel: f64) -> Self {
        let cut = rel * self.max_abs_coefficient();
        self.terms.retain(|_, c| c.abs() > cut);
        self
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut p = Self::zero(&self.variables);
        for (e, c) in &self.terms {
            p.add_term(e.clone(), c * s);
        }
        p
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.nvars(), other.nvars());
        let mut p = self.clone();
        for (e, c) in &other.terms {
            p.add_term(e.clone(), *c);
        }
        p
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.nvars(), other.nvars());
        let mut p = Self::zero(&self.variables);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Exponents = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                p.add_term(e, ca * cb);
            }
        }
        p
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::constant(&self.variables, 1.0);
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Exact formal partial derivative with respect to variable `var`.
    pub fn differentiate(&self, var: usize) -> Self {
        assert!(var < self.nvars(), "variable index out of range");
        let mut p = Self::zero(&self.variables);
        for (e, c) in &self.terms {
            if e[var] == 0 {
                continue;
            }
            let mut d = e.clone();
            d[var] -= 1;
            p.add_term(d, c * e[var] as f64);
        }
        p
    }

    pub fn gradient(&self) -> Vec<Self> {
        (0..self.nvars()).map(|i| self.differentiate(i)).collect()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.nvars());
        let pows = PowerTable::new(x, self.max_exponents());
        self.terms.iter().map(|(e, c)| c * pows.monomial(e, None)).sum()
    }

    fn max_exponents(&self) -> Vec<u32> {
        let mut m = vec![0; self.nvars()];
        for e in self.terms.keys() {
            for (mi, &ei) in m.iter_mut().zip(e) {
                *mi = (*mi).max(ei);
            }
        }
        m
    }

    /// Value, gradient and Hessian at `point`.
    pub fn jet(&self, point: &[f64]) -> Result<Jet2, PolyError> {
        let n = self.nvars();
        if point.len() != n {
            return Err(PolyError::DimensionMismatch {
                expected: n,
                found: point.len(),
            });
        }
        let pows = PowerTable::new(point, self.max_exponents());
        let mut value = 0.0;
        let mut gradient = vec![0.0; n];
        let mut hessian = vec![vec![0.0; n]; n];
        for (e, &c) in &self.terms {
            value += c * pows.monomial(e, None);
            for i in 0..n {
                if e[i] == 0 {
                    continue;
                }
                let ci = c * e[i] as f64;
                gradient[i] += ci * pows.monomial(e, Some((i, 1)));
                // diagonal
                if e[i] >= 2 {
                    hessian[i][i] += ci * (e[i] - 1) as f64 * pows.monomial(e, Some((i, 2)));
                }
                for j in (i + 1)..n {
                    if e[j] == 0 {
                        continue;
                    }
                    let v = ci * e[j] as f64 * pows.monomial_two(e, i, j);
                    hessian[i][j] += v;
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                hessian[j][i] = hessian[i][j];
            }
        }
        Ok(Jet2 {
            point: point.to_vec(),
            value,
            gradient,
            hessian,
        })
    }

    /// Composition `p(q_1(u), ..., q_n(u))`; all `q_i` share the variable list `u`.
    pub fn compose(&self, subs: &[Polynomial]) -> Result<Self, PolyError> {
        if subs.len() != self.nvars() {
            return Err(PolyError::DimensionMismatch {
                expected: self.nvars(),
                found: subs.len(),
            });
        }
        let vars = subs.first().map(|q| q.variables.clone()).unwrap_or_default();
        let maxe = self.max_exponents();
        // powers of each substitution, cached
        let powers: Vec<Vec<Polynomial>> = subs
            .iter()
            .zip(&maxe)
            .map(|(q, &m)| {
                let mut v = vec![Polynomial::constant(&vars, 1.0)];
                for k in 1..=m as usize {
                    let next = v[k - 1].mul(q);
                    v.push(next);
                }
                v
            })
            .collect();
        let mut out = Polynomial::zero(&vars);
        for (e, &c) in &self.terms {
            let mut mono = Polynomial::constant(&vars, c);
            for (i, &ei) in e.iter().enumerate() {
                if ei > 0 {
                    mono = mono.mul(&powers[i][ei as usize]);
                }
            }
            out = out.add(&mono);
        }
        Ok(out)
    }

    /// Coefficients (ascending powers of `t`) of the univariate polynomial
    /// `t -> p(origin + t * direction)`.
    pub fn along_line(&self, origin: &[f64], direction: &[f64]) -> Vec<f64> {
        let n = self.nvars();
        debug_assert!(origin.len() == n && direction.len() == n);
        let deg = self.degree() as usize;
        let mut out = vec![0.0; deg + 1];
        // (o_i + t d_i)^k as coefficient vectors
        let maxe = self.max_exponents();
        let lin: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|i| {
                let mut v = vec![vec![1.0]];
                for k in 1..=maxe[i] as usize {
                    v.push(poly1_mul(&v[k - 1], &[origin[i], direction[i]]));
                }
                v
            })
            .collect();
        for (e, &c) in &self.terms {
            let mut mono = vec![c];
            for (i, &ei) in e.iter().enumerate() {
                if ei > 0 {
                    mono = poly1_mul(&mono, &lin[i][ei as usize]);
                }
            }
            for (k, m) in mono.iter().enumerate() {
                out[k] += m;
            }
        }
        out
    }

    /// Renames the variables without touching the terms.
    pub fn with_variables(mut self, variables: &[String]) -> Result<Self, PolyError> {
        if variables.len() != self.nvars() {
            return Err(PolyError::DimensionMismatch {
                expected: self.nvars(),
                found: variables.len(),
            });
        }
        self.variables = variables.to_vec();
        Ok(self)
    }
}

/// Product of two univariate coefficient vectors (ascending powers).
pub(crate) fn poly1_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

struct PowerTable {
    pows: Vec<Vec<f64>>,
}

impl PowerTable {
    fn new(x: &[f64], maxe: Vec<u32>) -> Self {
        let pows = x
            .iter()
            .zip(maxe)
            .map(|(&xi, m)| {
                let mut v = Vec::with_capacity(m as usize + 1);
                let mut acc = 1.0;
                v.push(acc);
                for _ in 0..m {
                    acc *= xi;
                    v.push(acc);
                }
                v
            })
            .collect();
        Self { pows }
    }

    /// Monomial value with an optional reduction of one exponent.
    fn monomial(&self, e: &[u32], reduce: Option<(usize, u32)>) -> f64 {
        let mut v = 1.0;
        for (i, &ei) in e.iter().enumerate() {
            let k = match reduce {
                Some((r, by)) if r == i => ei - by,
                _ => ei,
            };
            v *= self.pows[i][k as usize];
        }
        v
    }

    fn monomial_two(&self, e: &[u32], a: usize, b: usize) -> f64 {
        let mut v = 1.0;
        for (i, &ei) in e.iter().enumerate() {
            let k = if i == a || i == b { ei - 1 } else { ei };
            v *= self.pows[i][k as usize];
        }
        v
    }
}

/// Second-order jet of a polynomial at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2 {
    pub point: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Symmetric by construction.
    pub hessian: Vec<Vec<f64>>,
}

impl Jet2 {
    pub fn gradient_norm(&self) -> f64 {
        self.gradient.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

impl fmt::Display for Polynomial {
    /// Terms are printed in descending exponent order; the output parses back
    /// to the identical polynomial.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (e, &c)) in self.terms.iter().rev().enumerate() {
            let neg = c < 0.0;
            let a = c.abs();
            if k == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            let factors: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0)
                .map(|(i, &p)| {
                    if p == 1 {
                        self.variables[i].clone()
                    } else {
                        format!("{}^{}", self.variables[i], p)
                    }
                })
                .collect();
            if factors.is_empty() {
                write!(f, "{a:?}")?;
            } else if a == 1.0 {
                write!(f, "{}", factors.join("*"))?;
            } else {
                write!(f, "{a:?}*{}", factors.join("*"))?;
            }
        }
        Ok(())
    }
}

/// Builds a list of variable names `prefix1..prefixN`.
pub fn var_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Parses an expression over the declared variables.
///
/// Grammar (whitespace ignored between tokens):
///
/// ```text
/// expr   := ['+'|'-'] term (('+'|'-') term)*
/// term   := factor (('*'|'/') factor)*        divisor must be constant
/// factor := atom ('^' uint)?                   uint <= 30
/// atom   := number | name | '(' expr ')' | ('+'|'-') factor
/// number := digits ['.' digits] [('e'|'E') ['+'|'-'] digits]
/// ```
pub fn parse_polynomial(text: &str, variables: &[String]) -> Result<Polynomial, PolyError> {
    let mut p = Parser {
        src: text,
        chars: text.char_indices().collect(),
        pos: 0,
        variables,
    };
    let out = p.expr()?;
    p.skip_ws();
    if p.pos < p.chars.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
    variables: &'a [String],
}

impl Parser<'_> {
    fn byte_pos(&self) -> usize {
        self.chars.get(self.pos).map(|c| c.0).unwrap_or(self.src.len())
    }

    fn syntax(&self, msg: &str) -> PolyError {
        PolyError::Syntax {
            position: self.byte_pos(),
            message: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].1.is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn is_minus(c: char) -> bool {
        c == '-' || c == '\u{2212}'
    }

    fn expr(&mut self) -> Result<Polynomial, PolyError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some('+') => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                Some(c) if Self::is_minus(c) => {
                    self.pos += 1;
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Polynomial, PolyError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some('*') => {
                    self.pos += 1;
                    acc = acc.mul(&self.factor()?);
                }
                Some('/') => {
                    self.pos += 1;
                    let at = self.byte_pos();
                    let d = self.factor()?;
                    let c = constant_value(&d).ok_or(PolyError::Syntax {
                        position: at,
                        message: "divisor must be a nonzero constant".into(),
                    })?;
                    if c == 0.0 {
                        return Err(PolyError::Syntax {
                            position: at,
                            message: "division by zero".into(),
                        });
                    }
                    acc = acc.scale(1.0 / c);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<Polynomial, PolyError> {
        let base = self.atom()?;
        if self.peek() == Some('^') {
            self.pos += 1;
            self.skip_ws();
            let at = self.byte_pos();
            let start = self.pos;
            while self.pos < self.chars.len() && self.chars[self.pos].1.is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.syntax("expected a non-negative integer exponent"));
            }
            let digits: String = self.chars[start..self.pos].iter().map(|c| c.1).collect();
            let k: u64 = digits.parse().unwrap_or(u64::MAX);
            if k > MAX_EXPONENT as u64 {
                return Err(PolyError::ExponentOverflow {
                    position: at,
                    exponent: k,
                });
            }
            return Ok(base.pow(k as u32));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Polynomial, PolyError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(')') {
                    return Err(self.syntax("expected ')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some('+') => {
                self.pos += 1;
                self.factor()
            }
            Some(c) if Self::is_minus(c) => {
                self.pos += 1;
                Ok(self.factor()?.scale(-1.0))
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_alphabetic() || c == '_' => self.name(),
            Some(_) => Err(self.syntax("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Polynomial, PolyError> {
        let start = self.pos;
        let at = self.byte_pos();
        let digit = |p: &Self| p.pos < p.chars.len() && p.chars[p.pos].1.is_ascii_digit();
        while digit(self) {
            self.pos += 1;
        }
        if self.pos < self.chars.len() && self.chars[self.pos].1 == '.' {
            self.pos += 1;
            while digit(self) {
                self.pos += 1;
            }
        }
        if self.pos < self.chars.len() && matches!(self.chars[self.pos].1, 'e' | 'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.chars.len() && matches!(self.chars[self.pos].1, '+' | '-') {
                self.pos += 1;
            }
            if digit(self) {
                while digit(self) {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text: String = self.chars[start..self.pos].iter().map(|c| c.1).collect();
        let v: f64 = text.parse().map_err(|_| PolyError::Syntax {
            position: at,
            message: format!("malformed number '{text}'"),
        })?;
        Ok(Polynomial::constant(self.variables, v))
    }

    fn name(&mut self) -> Result<Polynomial, PolyError> {
        let start = self.pos;
        let at = self.byte_pos();
        while self.pos < self.chars.len() {
            let c = self.chars[self.pos].1;
            if c.is_alphanumeric() || c == '_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        let name: String = self.chars[start..self.pos].iter().map(|c| c.1).collect();
        match self.variables.iter().position(|v| *v == name) {
            Some(i) => Ok(Polynomial::variable(self.variables, i)),
            None => Err(PolyError::UndeclaredVariable { name, position: at }),
        }
    }
}

fn constant_value(p: &Polynomial) -> Option<f64> {
    match p.terms.len() {
        0 => Some(0.0),
        1 => {
            let (e, c) = p.terms.iter().next()?;
            e.iter().all(|&k| k == 0).then_some(*c)
        }
        _ => None,
    }
}

/// Substitutes `x = basis · u` where `basis` holds `l` orthonormal columns
/// of length `n` (stored as `basis[column][row]`).
///
/// The result is a polynomial in `u1..ul`. A zero result means the plane
/// lies inside the zero set; callers treat that as a degenerate section.
pub fn restrict_to_plane(p: &Polynomial, basis: &[Vec<f64>]) -> Result<Polynomial, PolyError> {
    let n = p.nvars();
    restrict_leading(p, basis, n)
}

/// Like [`restrict_to_plane`], but only the first `n_sub` variables are
/// replaced; the remaining ones are carried over unchanged after `u1..ul`.
pub fn restrict_leading(p: &Polynomial, basis: &[Vec<f64>], n_sub: usize) -> Result<Polynomial, PolyError> {
    let l = basis.len();
    for col in basis {
        if col.len() != n_sub {
            return Err(PolyError::DimensionMismatch {
                expected: n_sub,
                found: col.len(),
            });
        }
    }
    for a in 0..l {
        for b in a..l {
            let dot: f64 = basis[a].iter().zip(&basis[b]).map(|(x, y)| x * y).sum();
            let target = if a == b { 1.0 } else { 0.0 };
            if (dot - target).abs() > 1e-12 {
                return Err(PolyError::NonOrthonormalFrame {
                    deviation: (dot - target).abs(),
                });
            }
        }
    }
    let rest = p.nvars() - n_sub;
    let mut vars = var_names("u", l);
    vars.extend(p.variables()[n_sub..].iter().cloned());
    let mut subs = Vec::with_capacity(p.nvars());
    for i in 0..n_sub {
        let mut q = Polynomial::zero(&vars);
        for (j, col) in basis.iter().enumerate() {
            let mut e = vec![0; l + rest];
            e[j] = 1;
            q.add_term(e, col[i]);
        }
        subs.push(q);
    }
    for k in 0..rest {
        subs.push(Polynomial::variable(&vars, l + k));
    }
    Ok(p.compose(&subs)?.prune(1e-14))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &[&str]) -> Vec<String> {
        n.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_and_expands() {
        let p = parse_polynomial("x1 + x1^2*x2", &v(&["x1", "x2"])).unwrap();
        assert_eq!(p.terms().len(), 2);
        assert_eq!(p.coefficient(&[1, 0]), 1.0);
        assert_eq!(p.coefficient(&[2, 1]), 1.0);
    }

    #[test]
    fn zero_times_variable_is_empty() {
        let p = parse_polynomial("0*x1", &v(&["x1"])).unwrap();
        assert!(p.is_zero());
        assert_eq!(p.to_string(), "0");
    }

    #[test]
    fn family_polynomial() {
        let p = parse_polynomial("x1*x2 - y1", &v(&["x1", "x2", "y1"])).unwrap();
        assert_eq!(p.coefficient(&[1, 1, 0]), 1.0);
        assert_eq!(p.coefficient(&[0, 0, 1]), -1.0);
        assert_eq!(p.terms().len(), 2);
    }

    #[test]
    fn parens_rationals_and_unicode_minus() {
        let p = parse_polynomial("(x1 − 1/2)^2 * 3/4", &v(&["x1"])).unwrap();
        assert_eq!(p.coefficient(&[2]), 0.75);
        assert_eq!(p.coefficient(&[1]), -0.75);
        assert_eq!(p.coefficient(&[0]), 0.1875);
    }

    #[test]
    fn parse_errors() {
        let vars = v(&["x1"]);
        match parse_polynomial("x1 + ", &vars) {
            Err(PolyError::Syntax { position, .. }) => assert_eq!(position, 5),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_polynomial("x1 + z", &vars),
            Err(PolyError::UndeclaredVariable { .. })
        ));
        assert!(matches!(
            parse_polynomial("x1^31", &vars),
            Err(PolyError::ExponentOverflow { exponent: 31, .. })
        ));
        assert!(parse_polynomial("x1^30", &vars).is_ok());
        assert!(matches!(
            parse_polynomial("x1 / x1", &vars),
            Err(PolyError::Syntax { .. })
        ));
        assert!(matches!(
            parse_polynomial("x1 x1", &vars),
            Err(PolyError::Syntax { .. })
        ));
    }

    #[test]
    fn derivatives() {
        let vars = v(&["x1", "x2"]);
        let p = parse_polynomial("x1 + x1^2*x2", &vars).unwrap();
        let d1 = p.differentiate(0);
        assert_eq!(d1, parse_polynomial("1 + 2*x1*x2", &vars).unwrap());
        let d2 = p.differentiate(1);
        assert_eq!(d2, parse_polynomial("x1^2", &vars).unwrap());
        let c = parse_polynomial("5", &vars).unwrap();
        assert!(c.differentiate(0).is_zero());
    }

    #[test]
    fn jets() {
        let vars = v(&["x1", "x2"]);
        let q = parse_polynomial("x1^2 + x2^2", &vars).unwrap();
        let j = q.jet(&[1.0, 0.0]).unwrap();
        assert_eq!(j.value, 1.0);
        assert_eq!(j.gradient, vec![2.0, 0.0]);
        assert_eq!(j.hessian, vec![vec![2.0, 0.0], vec![0.0, 2.0]]);

        let b = parse_polynomial("x1*x2", &vars).unwrap();
        let j = b.jet(&[3.0, 4.0]).unwrap();
        assert_eq!(j.value, 12.0);
        assert_eq!(j.gradient, vec![4.0, 3.0]);
        assert_eq!(j.hessian, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);

        let g = parse_polynomial("x1 + x1^2*x2", &vars).unwrap();
        let j = g.jet(&[-0.5, 1.0]).unwrap();
        assert!((j.value + 0.25).abs() < 1e-15);
        assert!(j.gradient[0].abs() < 1e-15);
        assert!((j.gradient[1] - 0.25).abs() < 1e-15);

        assert!(matches!(g.jet(&[1.0]), Err(PolyError::DimensionMismatch { .. })));
    }

    #[test]
    fn plane_restrictions() {
        let vars = v(&["x1", "x2"]);
        let p = parse_polynomial("x1*x2 - 1", &vars).unwrap();
        let id = restrict_to_plane(&p, &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(id.coefficient(&[1, 1]), 1.0);
        assert_eq!(id.coefficient(&[0, 0]), -1.0);
        assert_eq!(id.variables(), &v(&["u1", "u2"])[..]);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let diag = restrict_to_plane(&p, &[vec![s, s]]).unwrap();
        assert!((diag.coefficient(&[2]) - 0.5).abs() < 1e-15);
        assert_eq!(diag.coefficient(&[0]), -1.0);
        assert_eq!(diag.terms().len(), 2);

        let x1 = parse_polynomial("x1", &vars).unwrap();
        assert!(restrict_to_plane(&x1, &[vec![0.0, 1.0]]).unwrap().is_zero());

        assert!(matches!(
            restrict_to_plane(&p, &[vec![1.0, 1.0]]),
            Err(PolyError::NonOrthonormalFrame { .. })
        ));
    }

    #[test]
    fn restriction_keeps_parameters() {
        let vars = v(&["x1", "x2", "y1"]);
        let p = parse_polynomial("x1^2 + x2^2 - y1", &vars).unwrap();
        let r = restrict_leading(&p, &[vec![0.6, 0.8]], 2).unwrap();
        assert_eq!(r.variables(), &v(&["u1", "y1"])[..]);
        assert!((r.coefficient(&[2, 0]) - 1.0).abs() < 1e-15);
        assert_eq!(r.coefficient(&[0, 1]), -1.0);
    }

    #[test]
    fn along_line_matches_eval() {
        let vars = v(&["x1", "x2"]);
        let p = parse_polynomial("x1 + x1^2*x2 - 3*x2^3 + 2", &vars).unwrap();
        let c = p.along_line(&[0.3, -1.0], &[0.5, 2.0]);
        for &t in &[-2.0, -0.1, 0.7, 3.0] {
            let direct = p.eval(&[0.3 + 0.5 * t, -1.0 + 2.0 * t]);
            let uni: f64 = c.iter().rev().fold(0.0, |acc, k| acc * t + k);
            assert!((direct - uni).abs() < 1e-10 * (1.0 + direct.abs()));
        }
    }
}
