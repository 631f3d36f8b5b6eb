//! Truncated SVD by Householder QR followed by one-sided (Hestenes) Jacobi.
//!
//! The long side of the matrix is first compressed by a thin QR so the Jacobi
//! sweeps only ever run on a square triangular factor whose order is the
//! short side. One-sided Jacobi orthogonalizes columns to a *relative*
//! tolerance, so both singular-vector sets stay orthonormal to working
//! precision even for small singular values.

use super::{dot, norm2, Matrix, Precision};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Leading singular triplets of a matrix, `x ≈ u · diag(s) · vᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSvd {
    /// m×k' left singular vectors.
    pub u: Matrix,
    /// k' singular values, non-increasing.
    pub s: Vec<f64>,
    /// n×k' right singular vectors.
    pub v: Matrix,
    pub k_requested: usize,
}

impl TruncatedSvd {
    /// Number of retained triplets.
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `u · diag(s) · vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        self.u
            .scale_columns(&self.s)
            .and_then(|us| us.matmul_tr(&self.v))
            .expect("factor shapes are consistent by construction")
    }

    /// `diag(s) · vᵀ`, the coordinates of the columns of x in the basis `u`.
    pub fn coordinates(&self) -> Matrix {
        self.v
            .scale_columns(&self.s)
            .expect("factor shapes are consistent by construction")
            .transpose()
    }
}

/// Computes the `min(k, rows, cols, numerical rank)` leading singular triplets.
///
/// Singular values at or below `max(m, n) · s[1] · unit_roundoff` are treated
/// as zero and dropped. Each left singular vector is signed so that its entry
/// of largest magnitude (lowest row on ties) is positive, with the matching
/// right vector flipped alongside.
pub fn truncated_svd(x: &Matrix, k: usize) -> Result<TruncatedSvd> {
    let (u, s, v) = decompose(x, k, true)?;
    Ok(TruncatedSvd {
        u,
        s,
        v: v.expect("right factors requested"),
        k_requested: k,
    })
}

/// Left factors only; skips forming the right singular vectors when the
/// matrix is wide.
pub(crate) fn truncated_left(x: &Matrix, k: usize) -> Result<(Matrix, Vec<f64>)> {
    let (u, s, _) = decompose(x, k, false)?;
    Ok((u, s))
}

fn decompose(x: &Matrix, k: usize, need_v: bool) -> Result<(Matrix, Vec<f64>, Option<Matrix>)> {
    if k == 0 {
        return Err(Error::Config("truncated SVD needs k >= 1".into()));
    }
    if x.is_empty() {
        return Err(Error::Data(format!(
            "cannot decompose an empty {}x{} matrix",
            x.rows(),
            x.cols()
        )));
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite value in SVD input".into()));
    }
    let (m, n) = (x.rows(), x.cols());
    let precision = x.precision();

    // Full thin factors in double precision; `left` is m×q, `right` is n×q.
    let (left, sigma, right) = if m >= n {
        let f = tall_svd(x.as_slice(), m, n, true)?;
        (f.outer.expect("requested"), f.sigma, Some(f.inner))
    } else {
        let xt = x.transpose();
        let f = tall_svd(xt.as_slice(), n, m, need_v)?;
        (f.inner, f.sigma, f.outer)
    };
    let q = sigma.len();

    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));

    let top = order.first().map_or(0.0, |&i| sigma[i]);
    let threshold = m.max(n) as f64 * top * precision.unit_roundoff();
    let keep = order
        .iter()
        .take_while(|&&i| sigma[i] > threshold)
        .count()
        .min(k);
    let order = &order[..keep];

    let mut u_data = Vec::with_capacity(m * keep);
    let mut v_data = Vec::with_capacity(n * keep);
    let mut s = Vec::with_capacity(keep);
    for &i in order {
        let col = &left[i * m..(i + 1) * m];
        let mut pivot = 0;
        for (r, val) in col.iter().enumerate() {
            if val.abs() > col[pivot].abs() {
                pivot = r;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        u_data.extend(col.iter().map(|v| v * sign));
        if let Some(right) = &right {
            v_data.extend(right[i * n..(i + 1) * n].iter().map(|v| v * sign));
        }
        s.push(round(sigma[i], precision));
    }

    let u = Matrix::from_parts(m, keep, u_data, precision);
    let v = right.map(|_| Matrix::from_parts(n, keep, v_data, precision));
    Ok((u, s, v))
}

fn round(v: f64, precision: Precision) -> f64 {
    match precision {
        Precision::Single => v as f32 as f64,
        Precision::Double => v,
    }
}

struct TallFactors {
    /// p×q left factor of the tall matrix; absent if not requested.
    outer: Option<Vec<f64>>,
    sigma: Vec<f64>,
    /// q×q right factor.
    inner: Vec<f64>,
}

/// SVD of a tall column-major `p×q` matrix (`p >= q`), unsorted.
fn tall_svd(a: &[f64], p: usize, q: usize, need_outer: bool) -> Result<TallFactors> {
    let mut work = a.to_vec();
    let reflectors = householder_qr(&mut work, p, q);

    // R as a q×q column-major upper triangle.
    let mut w = vec![0.0; q * q];
    for j in 0..q {
        for i in 0..=j {
            w[j * q + i] = work[j * p + i];
        }
    }
    let mut rot = vec![0.0; q * q];
    for i in 0..q {
        rot[i * q + i] = 1.0;
    }
    jacobi_sweeps(&mut w, &mut rot, q).map_err(|()| Error::Numerical { rows: p, cols: q })?;

    let mut sigma = Vec::with_capacity(q);
    for j in 0..q {
        let col = &mut w[j * q..(j + 1) * q];
        let norm = norm2(col);
        if norm > 0.0 {
            for v in col.iter_mut() {
                *v /= norm;
            }
        }
        sigma.push(norm);
    }

    let outer = need_outer.then(|| apply_q(&reflectors, &w, p, q));
    Ok(TallFactors {
        outer,
        sigma,
        inner: rot,
    })
}

/// In-place Householder QR; returns unit reflectors (`None` for identity steps).
fn householder_qr(a: &mut [f64], p: usize, q: usize) -> Vec<Option<Vec<f64>>> {
    let mut reflectors = Vec::with_capacity(q);
    for j in 0..q {
        let x = &a[j * p + j..(j + 1) * p];
        let alpha = norm2(x);
        if alpha == 0.0 {
            reflectors.push(None);
            continue;
        }
        let alpha = if x[0] > 0.0 { -alpha } else { alpha };
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vnorm = norm2(&v);
        if vnorm == 0.0 {
            reflectors.push(None);
            continue;
        }
        for e in &mut v {
            *e /= vnorm;
        }
        for c in j..q {
            let col = &mut a[c * p + j..(c + 1) * p];
            let f = 2.0 * dot(&v, col);
            for (e, vi) in col.iter_mut().zip(&v) {
                *e -= f * vi;
            }
        }
        reflectors.push(Some(v));
    }
    reflectors
}

/// `Q · b` for the thin Q of `householder_qr` and a q×q `b`; returns p×q.
fn apply_q(reflectors: &[Option<Vec<f64>>], b: &[f64], p: usize, q: usize) -> Vec<f64> {
    let mut out = vec![0.0; p * q];
    for j in 0..q {
        out[j * p..j * p + q].copy_from_slice(&b[j * q..(j + 1) * q]);
    }
    for (j, refl) in reflectors.iter().enumerate().rev() {
        let Some(v) = refl else { continue };
        for c in 0..q {
            let col = &mut out[c * p + j..(c + 1) * p];
            let f = 2.0 * dot(v, col);
            if f != 0.0 {
                for (e, vi) in col.iter_mut().zip(v) {
                    *e -= f * vi;
                }
            }
        }
    }
    out
}

/// Cyclic one-sided Jacobi on the columns of the q×q matrix `w`, accumulating
/// the rotations into `rot`.
///
/// Columns whose norm is below `ε · (largest column norm)` hold only roundoff
/// from a rank-deficient input. Their mutual dot products are noise and never
/// settle, so pairs involving them are skipped; the rank cut drops them later.
fn jacobi_sweeps(w: &mut [f64], rot: &mut [f64], q: usize) -> std::result::Result<(), ()> {
    let tol = f64::EPSILON * q as f64;
    for _ in 0..MAX_SWEEPS {
        let largest = (0..q)
            .map(|c| {
                let col = &w[c * q..(c + 1) * q];
                dot(col, col)
            })
            .fold(0.0, f64::max);
        let negligible = f64::EPSILON * f64::EPSILON * largest;
        let mut rotated = false;
        for i in 0..q.saturating_sub(1) {
            for j in i + 1..q {
                let (ci, cj) = (&w[i * q..(i + 1) * q], &w[j * q..(j + 1) * q]);
                let alpha = dot(ci, ci);
                let beta = dot(cj, cj);
                if alpha.min(beta) <= negligible {
                    continue;
                }
                let gamma = dot(ci, cj);
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(w, q, i, j, c, s);
                rotate_pair(rot, q, i, j, c, s);
            }
        }
        if !rotated {
            return Ok(());
        }
    }
    Err(())
}

#[inline]
fn rotate_pair(m: &mut [f64], rows: usize, i: usize, j: usize, c: f64, s: f64) {
    let (lo, hi) = m.split_at_mut(j * rows);
    let ci = &mut lo[i * rows..(i + 1) * rows];
    let cj = &mut hi[..rows];
    for (a, b) in ci.iter_mut().zip(cj.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}
