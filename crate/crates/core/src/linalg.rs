//! Small dense linear algebra: everything here works on matrices whose sides
//! are at most a handful of entries.

use std::ops::{Index, IndexMut};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            m.data[i * c..(i + 1) * c].copy_from_slice(row);
        }
        m
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_cols(cols: &[Vec<f64>], rows: usize) -> Self {
        let mut m = Self::zeros(rows, cols.len());
        for (j, col) in cols.iter().enumerate() {
            for i in 0..rows {
                m[(i, j)] = col[i];
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "shape mismatch");
        let mut m = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    m[(i, j)] += a * other[(k, j)];
                }
            }
        }
        m
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "shape mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn max_row_norm(&self) -> f64 {
        (0..self.rows).map(|i| norm(self.row(i))).fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        norm(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn normalized(a: &[f64]) -> Vec<f64> {
    let n = norm(a);
    a.iter().map(|x| x / n).collect()
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// the columns of the second result.
pub fn sym_eigen(a: &Mat) -> (Vec<f64>, Mat) {
    let n = a.rows();
    assert_eq!(n, a.cols());
    let mut m = a.clone();
    let mut v = Mat::identity(n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        let scale: f64 = (0..n).map(|i| m[(i, i)] * m[(i, i)]).sum::<f64>() + off;
        if off <= 1e-32 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vecs = Mat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vecs[(k, dst)] = v[(k, src)];
        }
    }
    (values, vecs)
}

/// Singular values of `a` (ascending) by one-sided Jacobi on the columns of
/// `aᵀ`; small singular values keep their relative accuracy.
pub fn row_singular_values(a: &Mat) -> Vec<f64> {
    // columns of aᵀ are the rows of a
    let mut cols: Vec<Vec<f64>> = (0..a.rows()).map(|i| a.row(i).to_vec()).collect();
    let q = cols.len();
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..q {
            for j in (i + 1)..q {
                let alpha = dot(&cols[i], &cols[i]);
                let beta = dot(&cols[j], &cols[j]);
                let gamma = dot(&cols[i], &cols[j]);
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (ci, cj) = (cols[i].clone(), cols[j].clone());
                for k in 0..ci.len() {
                    cols[i][k] = c * ci[k] - s * cj[k];
                    cols[j][k] = s * ci[k] + c * cj[k];
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut s: Vec<f64> = cols.iter().map(|c| norm(c)).collect();
    s.sort_by(f64::total_cmp);
    s
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &Mat, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.rows();
    assert_eq!(n, a.cols());
    let mut m = a.clone();
    let mut x = b.to_vec();
    let scale = a.max_row_norm().max(f64::MIN_POSITIVE);
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[(i, k)].abs().total_cmp(&m[(j, k)].abs()))?;
        if m[(p, k)].abs() <= 1e-14 * scale {
            return None;
        }
        if p != k {
            for j in 0..n {
                let tmp = m[(k, j)];
                m[(k, j)] = m[(p, j)];
                m[(p, j)] = tmp;
            }
            x.swap(k, p);
        }
        for i in (k + 1)..n {
            let f = m[(i, k)] / m[(k, k)];
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                m[(i, j)] -= f * m[(k, j)];
            }
            x[i] -= f * x[k];
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for j in (k + 1)..n {
            s -= m[(k, j)] * x[j];
        }
        x[k] = s / m[(k, k)];
    }
    Some(x)
}

/// Minimum-norm solution of the underdetermined system `j dz = r` with `j`
/// of full row rank: `dz = jᵀ (j jᵀ)⁻¹ r`.
pub fn min_norm_solve(j: &Mat, r: &[f64]) -> Option<Vec<f64>> {
    let jjt = j.matmul(&j.transpose());
    let lam = solve(&jjt, r)?;
    Some(j.transpose().matvec(&lam))
}

/// Modified Gram-Schmidt with one reorthogonalization pass. Vectors whose
/// residual falls below `tol` relative to their length are dropped.
pub fn orthonormalize(vectors: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let len = norm(v);
        if len == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let c = dot(&w, q);
                axpy(-c, q, &mut w);
            }
        }
        let r = norm(&w);
        if r > tol * len {
            out.push(w.iter().map(|x| x / r).collect());
        }
    }
    out
}

/// Orthonormal basis of the orthogonal complement of span(`basis`) in ℝᵐ,
/// built deterministically from the standard basis vectors.
pub fn orthogonal_complement(basis: &[Vec<f64>], m: usize) -> Vec<Vec<f64>> {
    let q = orthonormalize(basis, 1e-12);
    let target = m - q.len();
    let mut all = q.clone();
    let mut out = Vec::with_capacity(target);
    // take candidates in order of largest residual so the choice is stable
    let mut cands: Vec<(usize, f64)> = (0..m)
        .map(|i| {
            let mut e = vec![0.0; m];
            e[i] = 1.0;
            for v in &q {
                let c = dot(&e, v);
                axpy(-c, v, &mut e);
            }
            (i, norm(&e))
        })
        .collect();
    cands.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for (i, _) in cands {
        if out.len() == target {
            break;
        }
        let mut e = vec![0.0; m];
        e[i] = 1.0;
        let added = orthonormalize(&[e], 1e-8);
        let mut trial = all.clone();
        trial.extend(added);
        let ortho = orthonormalize(&trial, 1e-8);
        if ortho.len() > all.len() {
            let new = ortho[all.len()].clone();
            all.push(new.clone());
            out.push(new);
        }
    }
    out
}

/// Orthonormal basis of the hyperplane orthogonal to `g` via a Householder
/// reflector (columns 2..m of `I - 2 v vᵀ`).
pub fn hyperplane_basis(g: &[f64]) -> Vec<Vec<f64>> {
    let m = g.len();
    let n = normalized(g);
    let sign = if n[0] >= 0.0 { 1.0 } else { -1.0 };
    let mut v = n.clone();
    v[0] += sign;
    let vn = dot(&v, &v);
    (1..m)
        .map(|j| {
            (0..m)
                .map(|i| {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    delta - 2.0 * v[i] * v[j] / vn
                })
                .collect()
        })
        .collect()
}

/// Null space of a `k × m` matrix (orthonormal columns).
pub fn null_space(a: &Mat) -> Vec<Vec<f64>> {
    let rows: Vec<Vec<f64>> = (0..a.rows()).map(|i| a.row(i).to_vec()).collect();
    orthogonal_complement(&rows, a.cols())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_eigen_reconstructs() {
        let a = Mat::from_rows(&[vec![4.0, 1.0, 0.5], vec![1.0, 3.0, -0.2], vec![0.5, -0.2, 1.0]]);
        let (vals, vecs) = sym_eigen(&a);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        for (k, &lam) in vals.iter().enumerate() {
            let v = vecs.col(k);
            let av = a.matvec(&v);
            for i in 0..3 {
                assert!((av[i] - lam * v[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hestenes_matches_eigen() {
        let a = Mat::from_rows(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 2.0]]);
        let s = row_singular_values(&a);
        let (vals, _) = sym_eigen(&a.matmul(&a.transpose()));
        for (si, li) in s.iter().zip(&vals) {
            assert!((si * si - li).abs() < 1e-12);
        }
    }

    #[test]
    fn complements_are_orthonormal() {
        let g = vec![1.0, 1.0, -1.0];
        let t = hyperplane_basis(&g);
        assert_eq!(t.len(), 2);
        for a in &t {
            assert!(dot(a, &g).abs() < 1e-14);
            assert!((norm(a) - 1.0).abs() < 1e-14);
        }
        assert!(dot(&t[0], &t[1]).abs() < 1e-14);
        let c = orthogonal_complement(&[vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]], 3);
        assert_eq!(c.len(), 1);
        assert!((c[0][0].abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn linear_solve() {
        let a = Mat::from_rows(&[vec![0.0, 2.0], vec![3.0, 1.0]]);
        let x = solve(&a, &[4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
        let s = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(solve(&s, &[1.0, 1.0]).is_none());
    }
}
