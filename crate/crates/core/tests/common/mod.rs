#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use streambank::linalg::{Matrix, Precision};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    Matrix::from_col_major(rows, cols, data, Precision::Double).unwrap()
}

pub fn uniform(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect();
    Matrix::from_col_major(rows, cols, data, Precision::Double).unwrap()
}

/// m×n matrix of exact rank r: product of Gaussian m×r and r×n factors.
pub fn low_rank(m: usize, n: usize, r: usize, rng: &mut ChaCha8Rng) -> Matrix {
    gaussian(m, r, rng).matmul(&gaussian(r, n, rng)).unwrap()
}

/// m×r matrix with orthonormal columns.
pub fn orthonormal(m: usize, r: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let q = to_na(&gaussian(m, r, rng)).qr().q();
    from_na(&q)
}

pub fn to_na(x: &Matrix) -> DMatrix<f64> {
    DMatrix::from_column_slice(x.rows(), x.cols(), x.as_slice())
}

pub fn from_na(x: &DMatrix<f64>) -> Matrix {
    Matrix::from_col_major(
        x.nrows(),
        x.ncols(),
        x.as_slice().to_vec(),
        Precision::Double,
    )
    .unwrap()
}

/// All singular values from an independent implementation, descending.
pub fn oracle_svals(x: &Matrix) -> Vec<f64> {
    let mut s: Vec<f64> = to_na(x).singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Frobenius error of the best rank-k approximation.
pub fn best_rank_error(x: &Matrix, k: usize) -> f64 {
    oracle_svals(x)
        .iter()
        .skip(k)
        .map(|s| s * s)
        .sum::<f64>()
        .sqrt()
}

/// max |uᵀu − I|.
pub fn orthonormality_error(u: &Matrix) -> f64 {
    let g = u.tr_matmul(u).unwrap();
    g.max_abs_diff(&Matrix::identity(u.cols(), Precision::Double))
}

/// Flips rows of `a` so that each row correlates positively with the same
/// row of `b`; for comparing coordinate sets defined up to axis signs.
pub fn align_rows(a: &Matrix, b: &Matrix) -> Matrix {
    let t = a.transpose();
    let bt = b.transpose();
    let mut out = t.clone();
    for j in 0..t.cols() {
        let d: f64 = t
            .column(j)
            .iter()
            .zip(bt.column(j))
            .map(|(x, y)| x * y)
            .sum();
        if d < 0.0 {
            out.negate_column(j);
        }
    }
    out.transpose()
}

pub fn add(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!((a.rows(), a.cols()), (b.rows(), b.cols()));
    let data = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| x + y)
        .collect();
    Matrix::from_col_major(a.rows(), a.cols(), data, a.precision()).unwrap()
}

/// Relative Frobenius distance.
pub fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
    a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm()
}

/// Σ X_b X_bᵀ over the column batches of x.
pub fn gram(x: &Matrix) -> Matrix {
    x.matmul_tr(x).unwrap()
}

/// Largest principal angle (degrees) between the column spans of two
/// orthonormal bases of equal width.
pub fn max_principal_angle_deg(a: &Matrix, b: &Matrix) -> f64 {
    let c = a.tr_matmul(b).unwrap();
    let smin = oracle_svals(&c).last().copied().unwrap_or(0.0).min(1.0);
    smin.acos().to_degrees()
}

pub fn batches(x: &Matrix, size: usize) -> Vec<Matrix> {
    (0..x.cols())
        .step_by(size)
        .map(|s| x.column_range(s, (s + size).min(x.cols())).unwrap())
        .collect()
}

pub struct DetectionTask {
    pub train: Matrix,
    pub test: Matrix,
    pub labels: Vec<bool>,
}

/// Normal vectors lie on a closed curve spanning eight dimensions, embedded
/// in m dimensions with per-coordinate jitter. Anomalies are curve points
/// pushed 5σ along an in-span direction normal to the curve, where σ is the
/// RMS jitter distance off the curve.
pub fn detection_task(
    m: usize,
    n_train: usize,
    n_test_normal: usize,
    n_test_anomalous: usize,
    jitter: f64,
    seed: u64,
) -> DetectionTask {
    let mut r = rng(seed);
    let q = orthonormal(m, 8, &mut r);
    let curve = |t: f64| -> [f64; 8] {
        [
            t.cos(),
            t.sin(),
            (2.0 * t).cos(),
            (2.0 * t).sin(),
            (3.0 * t).cos(),
            (3.0 * t).sin(),
            (4.0 * t).cos(),
            (4.0 * t).sin(),
        ]
    };
    let tangent = |t: f64| -> [f64; 8] {
        [
            -t.sin(),
            t.cos(),
            -2.0 * (2.0 * t).sin(),
            2.0 * (2.0 * t).cos(),
            -3.0 * (3.0 * t).sin(),
            3.0 * (3.0 * t).cos(),
            -4.0 * (4.0 * t).sin(),
            4.0 * (4.0 * t).cos(),
        ]
    };
    let sigma = jitter * 8f64.sqrt();
    let normal = |r: &mut ChaCha8Rng| -> Vec<f64> {
        let t = r.random_range(0.0..std::f64::consts::TAU);
        let mut z = curve(t);
        for v in &mut z {
            let e: f64 = StandardNormal.sample(r);
            *v += jitter * e;
        }
        z.to_vec()
    };
    let embed = |zs: &[Vec<f64>]| -> Matrix {
        let z = Matrix::from_columns(8, zs, Precision::Double).unwrap();
        q.matmul(&z).unwrap()
    };

    let train: Vec<Vec<f64>> = (0..n_train).map(|_| normal(&mut r)).collect();
    let mut test = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n_test_normal {
        test.push(normal(&mut r));
        labels.push(false);
    }
    for _ in 0..n_test_anomalous {
        let t = r.random_range(0.0..std::f64::consts::TAU);
        let tan = tangent(t);
        let tn: f64 = tan.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut d: Vec<f64> = (0..8).map(|_| StandardNormal.sample(&mut r)).collect();
        let proj: f64 = d.iter().zip(&tan).map(|(a, b)| a * b / tn).sum();
        for (v, t) in d.iter_mut().zip(&tan) {
            *v -= proj * t / tn;
        }
        let dn: f64 = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut z = curve(t);
        for (zi, di) in z.iter_mut().zip(&d) {
            let e: f64 = StandardNormal.sample(&mut r);
            *zi += 5.0 * sigma * di / dn + jitter * e;
        }
        test.push(z.to_vec());
        labels.push(true);
    }
    DetectionTask {
        train: embed(&train),
        test: embed(&test),
        labels,
    }
}
