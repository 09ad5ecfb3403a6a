//! Dense symmetric eigensolvers and a restarted Lanczos iteration.
//!
//! The dense path is Householder tridiagonalization (lower triangle only,
//! reflectors kept in place) followed by implicit QL. Eigenvectors are only
//! ever needed for one extreme eigenvalue, so they come from inverse
//! iteration on the tridiagonal matrix and one back-transformation.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{check_len, Error, Result};

/// Dense symmetric matrix in full row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Builds from `f(i, j)` evaluated on the lower triangle and mirrored,
    /// so the result is exactly symmetric.
    pub fn from_fn<F: FnMut(usize, usize) -> f64>(n: usize, mut f: F) -> Self {
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v = f(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.n;
        (0..n).all(|i| (0..i).all(|j| self.data[i * n + j] == self.data[j * n + i]))
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.data[i * self.n + i]).sum()
    }

    pub fn add_diagonal(&mut self, c: f64) {
        for i in 0..self.n {
            self.data[i * self.n + i] += c;
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            *yi = dot(self.row(i), x);
        }
    }

    /// Copies the lower triangle onto the upper one.
    fn symmetrize_from_lower(&mut self) {
        let n = self.n;
        for i in 0..n {
            for j in 0..i {
                self.data[j * n + i] = self.data[i * n + j];
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorize without reassociation.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `sum_i w_i x_i x_i^T` for the rows `x_i` of a row-major `m x n` matrix.
///
/// Accumulated in row blocks through GEMM so the scaled copy stays small.
pub fn weighted_gram(rows: &[f64], m: usize, n: usize, weights: &[f64]) -> Result<SymMatrix> {
    if rows.len() != m * n {
        return Err(Error::DimensionMismatch {
            expected: m * n,
            found: rows.len(),
        });
    }
    check_len(m, weights)?;
    let mut out = SymMatrix::zeros(n);
    let block = 1024.min(m.max(1));
    let mut scaled = vec![0.0; block * n];
    let mut start = 0;
    while start < m {
        let len = block.min(m - start);
        for r in 0..len {
            let w = weights[start + r];
            let src = &rows[(start + r) * n..(start + r + 1) * n];
            for (d, s) in scaled[r * n..(r + 1) * n].iter_mut().zip(src) {
                *d = w * s;
            }
        }
        let x = &rows[start * n..(start + len) * n];
        // out (n x n) += x^T (n x len) * scaled (len x n)
        unsafe {
            matrixmultiply::dgemm(
                n,
                len,
                n,
                1.0,
                x.as_ptr(),
                1,
                n as isize,
                scaled.as_ptr(),
                n as isize,
                1,
                1.0,
                out.data.as_mut_ptr(),
                n as isize,
                1,
            );
        }
        start += len;
    }
    // GEMM rounding can differ between (i, j) and (j, i).
    out.symmetrize_from_lower();
    Ok(out)
}

/// Householder reduction of a symmetric matrix to tridiagonal form.
struct Tridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
    /// Reflector `k` is stored in column `k` below the subdiagonal, with an
    /// implicit leading one; `tau[k]` is its scale.
    reflectors: SymMatrix,
    tau: Vec<f64>,
}

fn tridiagonalize(mut a: SymMatrix) -> Tridiagonal {
    let n = a.n;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    let mut tau = vec![0.0; n.saturating_sub(1)];
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for k in 0..n.saturating_sub(1) {
        let o = k + 1;
        let m = n - o;
        diag[k] = a.data[k * n + k];
        let alpha = a.data[o * n + k];
        let mut xnorm2 = 0.0;
        for i in o + 1..n {
            let x = a.data[i * n + k];
            xnorm2 += x * x;
        }
        if xnorm2 == 0.0 {
            off[k] = alpha;
            tau[k] = 0.0;
            continue;
        }
        let beta = -alpha.signum() * (alpha * alpha + xnorm2).sqrt();
        let t = (beta - alpha) / beta;
        let scale = 1.0 / (alpha - beta);
        v[0] = 1.0;
        for i in 1..m {
            let x = a.data[(o + i) * n + k] * scale;
            v[i] = x;
            a.data[(o + i) * n + k] = x;
        }
        off[k] = beta;
        tau[k] = t;

        // p = t * B v with B the trailing block, lower triangle only.
        let vv = &v[..m];
        let pp = &mut p[..m];
        pp.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..m {
            let row = &a.data[(o + i) * n + o..(o + i) * n + o + i];
            let vi = vv[i];
            let acc = dot(row, &vv[..i]);
            axpy(vi, row, &mut pp[..i]);
            pp[i] += acc + a.data[(o + i) * n + o + i] * vi;
        }
        pp.iter_mut().for_each(|x| *x *= t);
        let kfac = 0.5 * t * dot(pp, vv);
        // w = p - kfac v, stored back into p
        for i in 0..m {
            pp[i] -= kfac * vv[i];
        }
        for i in 0..m {
            let row = &mut a.data[(o + i) * n + o..(o + i) * n + o + i + 1];
            let (vi, wi) = (vv[i], pp[i]);
            for j in 0..=i {
                row[j] -= vi * pp[j] + wi * vv[j];
            }
        }
    }
    if n > 0 {
        diag[n - 1] = a.data[(n - 1) * n + n - 1];
    }
    Tridiagonal {
        diag,
        off,
        reflectors: a,
        tau,
    }
}

impl Tridiagonal {
    /// Maps an eigenvector of the tridiagonal matrix back to the original basis.
    fn back_transform(&self, y: &mut [f64]) {
        let n = self.diag.len();
        let a = &self.reflectors.data;
        for k in (0..n.saturating_sub(1)).rev() {
            let t = self.tau[k];
            if t == 0.0 {
                continue;
            }
            let o = k + 1;
            let mut s = y[o];
            for i in o + 1..n {
                s += a[i * n + k] * y[i];
            }
            s *= t;
            y[o] -= s;
            for i in o + 1..n {
                y[i] -= s * a[i * n + k];
            }
        }
    }
}

/// Eigenvalues (ascending) of the symmetric tridiagonal matrix with diagonal
/// `diag` and off-diagonal `off`, and optionally the first component of each
/// normalized eigenvector (what Golub-Welsch needs).
pub fn tridiagonal_eigen(
    diag: &[f64],
    off: &[f64],
    first_components: bool,
) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let n = diag.len();
    if n == 0 || off.len() + 1 != n {
        return Err(Error::InvalidArgument(
            "tridiagonal matrix needs n diagonal and n-1 off-diagonal entries".into(),
        ));
    }
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    let mut z = if first_components {
        let mut z = vec![0.0; n];
        z[0] = 1.0;
        Some(z)
    } else {
        None
    };
    implicit_ql(&mut d, &mut e, z.as_deref_mut())?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values = idx.iter().map(|&i| d[i]).collect();
    let comps = z.map(|z| idx.iter().map(|&i| z[i]).collect());
    Ok((values, comps))
}

/// Implicit QL with Wilkinson shifts. `e[n-1]` is scratch. When `z` is
/// given it tracks the first row of the accumulated rotations.
fn implicit_ql(d: &mut [f64], e: &mut [f64], mut z: Option<&mut [f64]>) -> Result<()> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Convergence {
                    solver: "implicit QL",
                    iterations: iter,
                    residual: e[l].abs(),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    let t = z[i + 1];
                    z[i + 1] = s * z[i] + c * t;
                    z[i] = c * z[i] - s * t;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Eigenvector of a tridiagonal matrix for a known eigenvalue, by inverse
/// iteration with partial-pivoting LU.
fn tridiagonal_eigvec(diag: &[f64], off: &[f64], lambda: f64) -> Vec<f64> {
    let n = diag.len();
    let scale = diag
        .iter()
        .map(|x| x.abs())
        .chain(off.iter().map(|x| x.abs()))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let shift = lambda - 1e-12 * scale;
    // Deterministic, generic start vector.
    let mut x: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * ((i as f64 * 0.618_033_988_749_895).fract() - 0.5))
        .collect();
    // Factor T - shift I = P L U with U having two superdiagonals.
    let mut u0 = vec![0.0; n];
    let mut u1 = vec![0.0; n];
    let mut u2 = vec![0.0; n];
    let mut mult = vec![0.0; n];
    let mut swapped = vec![false; n];
    let mut cur_d = diag[0] - shift;
    let mut cur_e = if n > 1 { off[0] } else { 0.0 };
    let mut cur_f = 0.0;
    for i in 0..n {
        if i + 1 == n {
            u0[i] = if cur_d == 0.0 { 1e-300 * scale } else { cur_d };
            u1[i] = 0.0;
            u2[i] = 0.0;
            break;
        }
        let below = off[i];
        let next_d = diag[i + 1] - shift;
        let next_e = if i + 2 < n { off[i + 1] } else { 0.0 };
        if below.abs() > cur_d.abs() {
            // swap rows i and i+1
            swapped[i] = true;
            u0[i] = below;
            u1[i] = next_d;
            u2[i] = next_e;
            let l = cur_d / below;
            mult[i] = l;
            cur_d = cur_e - l * next_d;
            cur_e = cur_f - l * next_e;
            cur_f = 0.0;
        } else {
            swapped[i] = false;
            let piv = if cur_d == 0.0 { 1e-300 * scale } else { cur_d };
            u0[i] = piv;
            u1[i] = cur_e;
            u2[i] = cur_f;
            let l = below / piv;
            mult[i] = l;
            cur_d = next_d - l * cur_e;
            cur_e = next_e - l * cur_f;
            cur_f = 0.0;
        }
    }
    for _ in 0..3 {
        // forward elimination
        for i in 0..n.saturating_sub(1) {
            if swapped[i] {
                x.swap(i, i + 1);
                let t = x[i + 1] - mult[i] * x[i];
                x[i + 1] = t;
            } else {
                x[i + 1] -= mult[i] * x[i];
            }
        }
        // back substitution
        for i in (0..n).rev() {
            let mut s = x[i];
            if i + 1 < n {
                s -= u1[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= u2[i] * x[i + 2];
            }
            x[i] = s / u0[i];
        }
        let nx = norm(&x);
        x.iter_mut().for_each(|v| *v /= nx);
    }
    x
}

/// Dense symmetric eigendecomposition restricted to what the spectrum
/// reports need: all eigenvalues (ascending) and the unit eigenvector of the
/// smallest one.
#[derive(Debug, Clone)]
pub struct DenseEigen {
    pub values: Vec<f64>,
    pub min_vector: Vec<f64>,
}

pub fn symmetric_eigenvalues(a: SymMatrix) -> Result<Vec<f64>> {
    let t = tridiagonalize(a);
    Ok(tridiagonal_eigen(&t.diag, &t.off, false)?.0)
}

pub fn symmetric_eigen_min(a: SymMatrix) -> Result<DenseEigen> {
    let n = a.n;
    if n == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    let t = tridiagonalize(a);
    let (values, _) = tridiagonal_eigen(&t.diag, &t.off, false)?;
    let mut y = tridiagonal_eigvec(&t.diag, &t.off, values[0]);
    t.back_transform(&mut y);
    let ny = norm(&y);
    y.iter_mut().for_each(|v| *v /= ny);
    Ok(DenseEigen {
        values,
        min_vector: y,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extreme {
    Smallest,
    Largest,
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub matvecs: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    /// Relative residual target `||Av - lv|| <= tol * max(1, |l|)`.
    pub tol: f64,
    pub max_basis: usize,
    pub max_matvecs: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            tol: 1e-10,
            max_basis: 120,
            max_matvecs: 20_000,
        }
    }
}

/// Extreme eigenpair of a symmetric operator by explicitly restarted Lanczos
/// with full reorthogonalization.
pub fn lanczos_extreme<F>(
    n: usize,
    mut op: F,
    which: Extreme,
    start: &[f64],
    opts: LanczosOptions,
) -> Result<EigenPair>
where
    F: FnMut(&[f64], &mut [f64]),
{
    check_len(n, start)?;
    if !(opts.tol > 0.0) || opts.max_basis < 2 {
        return Err(Error::InvalidArgument("Lanczos needs tol > 0 and basis >= 2".into()));
    }
    let mut x = start.to_vec();
    if norm(&x) == 0.0 {
        x = (0..n).map(|i| 1.0 + (i as f64 * 0.754_877_666).fract()).collect();
    }
    let mut matvecs = 0;
    let mut ax = vec![0.0; n];
    let kmax = opts.max_basis.min(n);
    loop {
        let nx = norm(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(kmax);
        let mut alpha: Vec<f64> = Vec::with_capacity(kmax);
        let mut beta: Vec<f64> = Vec::with_capacity(kmax);
        basis.push(x.clone());
        let mut w = vec![0.0; n];
        let mut ritz = (0.0, Vec::new());
        for j in 0..kmax {
            op(&basis[j], &mut w);
            matvecs += 1;
            let a = dot(&basis[j], &w);
            alpha.push(a);
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &w);
                    axpy(-c, q, &mut w);
                }
            }
            let b = norm(&w);
            let done = j + 1 == kmax || b <= 1e-13 * a.abs().max(1.0) || matvecs >= opts.max_matvecs;
            if done || (j + 1) % 10 == 0 {
                let (theta, s) = tridiagonal_extreme_vector(&alpha, &beta, which)?;
                let est = b * s[s.len() - 1].abs();
                ritz = (theta, s);
                if est <= 0.1 * opts.tol * theta.abs().max(1.0) || done {
                    break;
                }
            }
            beta.push(b);
            let next: Vec<f64> = w.iter().map(|v| v / b).collect();
            basis.push(next);
        }
        let (theta, s) = ritz;
        x.iter_mut().for_each(|v| *v = 0.0);
        for (q, c) in basis.iter().zip(&s) {
            axpy(*c, q, &mut x);
        }
        let nx = norm(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        op(&x, &mut ax);
        matvecs += 1;
        let res = ax
            .iter()
            .zip(&x)
            .map(|(a, v)| (a - theta * v) * (a - theta * v))
            .sum::<f64>()
            .sqrt();
        if res <= opts.tol * theta.abs().max(1.0) {
            return Ok(EigenPair {
                value: theta,
                vector: x,
                residual: res,
                matvecs,
            });
        }
        if matvecs >= opts.max_matvecs {
            return Err(Error::Convergence {
                solver: "lanczos",
                iterations: matvecs,
                residual: res,
            });
        }
    }
}

/// Extreme eigenvalue of the Lanczos tridiagonal with its full eigenvector.
fn tridiagonal_extreme_vector(alpha: &[f64], beta: &[f64], which: Extreme) -> Result<(f64, Vec<f64>)> {
    let k = alpha.len();
    let off = &beta[..k - 1];
    let (values, _) = tridiagonal_eigen(alpha, off, false)?;
    let theta = match which {
        Extreme::Smallest => values[0],
        Extreme::Largest => values[k - 1],
    };
    if k == 1 {
        return Ok((theta, vec![1.0]));
    }
    Ok((theta, tridiagonal_eigvec(alpha, off, theta)))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Cyclic Jacobi: slow but independent of the QL path.
    fn jacobi_eigenvalues(a: &SymMatrix) -> Vec<f64> {
        let n = a.n();
        let mut m: Vec<f64> = a.as_slice().to_vec();
        for _ in 0..100 {
            let mut off = 0.0;
            for i in 0..n {
                for j in 0..i {
                    off += m[i * n + j] * m[i * n + j];
                }
            }
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = m[p * n + q];
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = m[k * n + p];
                        let akq = m[k * n + q];
                        m[k * n + p] = c * akp - s * akq;
                        m[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = m[p * n + k];
                        let aqk = m[q * n + k];
                        m[p * n + k] = c * apk - s * aqk;
                        m[q * n + k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut d: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
        d.sort_by(|a, b| a.total_cmp(b));
        d
    }

    fn test_matrix(n: usize, seed: u64) -> SymMatrix {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let vals: Vec<f64> = (0..n * n).map(|_| next()).collect();
        SymMatrix::from_fn(n, |i, j| vals[i * n + j] + if i == j { (i % 3) as f64 } else { 0.0 })
    }

    #[test]
    fn dense_matches_jacobi() {
        for (n, seed) in [(1, 1), (2, 2), (7, 3), (40, 4)] {
            let a = test_matrix(n, seed);
            let expect = jacobi_eigenvalues(&a);
            let got = symmetric_eigenvalues(a.clone()).unwrap();
            for (g, e) in got.iter().zip(&expect) {
                assert!((g - e).abs() < 1e-10, "n={n}: {g} vs {e}");
            }
        }
    }

    #[test]
    fn min_vector_residual() {
        let a = test_matrix(60, 9);
        let eig = symmetric_eigen_min(a.clone()).unwrap();
        let mut av = vec![0.0; 60];
        a.matvec(&eig.min_vector, &mut av);
        let lam = eig.values[0];
        let res: f64 = av
            .iter()
            .zip(&eig.min_vector)
            .map(|(x, v)| (x - lam * v).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(res < 1e-10, "residual {res}");
        assert!((norm(&eig.min_vector) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_min_eigenvalue_still_gives_eigenvector() {
        // rank one plus zero block: smallest eigenvalue 0 with multiplicity 4
        let x = [1.0, 2.0, -1.0, 0.5, 3.0];
        let a = SymMatrix::from_fn(5, |i, j| x[i] * x[j]);
        let eig = symmetric_eigen_min(a.clone()).unwrap();
        let mut av = vec![0.0; 5];
        a.matvec(&eig.min_vector, &mut av);
        assert!(norm(&av) < 1e-10);
        assert!((eig.values[4] - dot(&x, &x)).abs() < 1e-12);
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        let n = 150;
        let a = test_matrix(n, 11);
        let dense = symmetric_eigenvalues(a.clone()).unwrap();
        let start = vec![1.0; n];
        for which in [Extreme::Smallest, Extreme::Largest] {
            let pair = lanczos_extreme(n, |x, y| a.matvec(x, y), which, &start, LanczosOptions::default())
                .unwrap();
            let expect = match which {
                Extreme::Smallest => dense[0],
                Extreme::Largest => dense[n - 1],
            };
            assert!((pair.value - expect).abs() < 1e-8, "{which:?}: {} vs {expect}", pair.value);
        }
    }

    #[test]
    fn weighted_gram_matches_direct_sum() {
        let (m, n) = (7, 5);
        let rows: Vec<f64> = (0..m * n).map(|k| ((k * 37 % 11) as f64) - 5.0).collect();
        let w: Vec<f64> = (0..m).map(|i| i as f64 - 2.5).collect();
        let g = weighted_gram(&rows, m, n, &w).unwrap();
        for i in 0..n {
            for j in 0..n {
                let e: f64 = (0..m).map(|r| w[r] * rows[r * n + i] * rows[r * n + j]).sum();
                assert!((g.get(i, j) - e).abs() < 1e-12);
            }
        }
        assert!(g.is_symmetric());
    }
}
