//! Internal dense/banded linear algebra used by the penalized least-squares
//! fits. ndarray is the crate-wide matrix type; nalgebra supplies the dense
//! Cholesky and symmetric eigen decompositions. Tensor-product learners
//! produce normal equations with a narrow band (neighbouring basis functions
//! only overlap locally), so a hand-rolled banded Cholesky keeps the
//! degrees-of-freedom calibration cheap even at ~500 columns.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};

use crate::error::Error;
use crate::Result;

/// Weighted Gram matrix `X' W X` with `W = diag(w)`.
pub fn weighted_gram(x: &Array2<f64>, w: &[f64]) -> Array2<f64> {
    let (n, p) = x.dim();
    assert_eq!(n, w.len());
    let mut gram = Array2::zeros((p, p));
    // Accumulate row outer products; only the upper triangle, mirrored at
    // the end. Row-major traversal keeps this cache-friendly.
    for i in 0..n {
        let wi = w[i];
        if wi == 0.0 {
            continue;
        }
        let row = x.row(i);
        for a in 0..p {
            let va = row[a] * wi;
            if va == 0.0 {
                continue;
            }
            for b in a..p {
                gram[[a, b]] += va * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[[a, b]] = gram[[b, a]];
        }
    }
    gram
}

/// `X' W v` for `W = diag(w)`.
pub fn weighted_xtv(x: &Array2<f64>, w: &[f64], v: &[f64]) -> Array1<f64> {
    let (n, p) = x.dim();
    assert_eq!(n, w.len());
    assert_eq!(n, v.len());
    let mut out = Array1::zeros(p);
    for i in 0..n {
        let wv = w[i] * v[i];
        if wv == 0.0 {
            continue;
        }
        let row = x.row(i);
        for a in 0..p {
            out[a] += row[a] * wv;
        }
    }
    out
}

/// Bandwidth of a symmetric matrix: largest `|i - j|` with a structurally
/// nonzero entry. Exact zeros are treated as structural.
fn bandwidth(a: &Array2<f64>) -> usize {
    let p = a.nrows();
    let mut bw = 0usize;
    for i in 0..p {
        for j in (i + bw + 1..p).rev() {
            if a[[i, j]] != 0.0 {
                bw = j - i;
                break;
            }
        }
    }
    bw
}

/// Cholesky factorization of a symmetric positive-definite matrix, stored
/// either dense (nalgebra) or as a lower band when the band is narrow
/// enough to pay off.
pub enum SpdFactor {
    Dense(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Band(BandCholesky),
}

impl SpdFactor {
    pub fn new(a: &Array2<f64>) -> Result<Self> {
        let p = a.nrows();
        assert_eq!(p, a.ncols());
        let bw = bandwidth(a);
        // Banded factorization costs O(p bw^2) against O(p^3); only bother
        // when the band is genuinely narrow and the matrix is large enough
        // for the difference to matter.
        if p >= 64 && bw * 4 <= p {
            return Ok(SpdFactor::Band(BandCholesky::new(a, bw)?));
        }
        let m = DMatrix::from_fn(p, p, |i, j| a[[i, j]]);
        match nalgebra::Cholesky::new(m) {
            Some(chol) => Ok(SpdFactor::Dense(chol)),
            None => Err(Error::numerical(
                "Cholesky factorization failed: system matrix is not positive definite",
            )),
        }
    }

    pub fn solve(&self, b: &Array1<f64>) -> Array1<f64> {
        match self {
            SpdFactor::Dense(chol) => {
                let rhs = DVector::from_iterator(b.len(), b.iter().copied());
                let sol = chol.solve(&rhs);
                Array1::from_iter(sol.iter().copied())
            }
            SpdFactor::Band(band) => band.solve(b.as_slice().expect("contiguous rhs")),
        }
    }

    /// `tr(A^{-1} M)` for a symmetric `M` of matching size, via one solve
    /// per column. Used for effective-degrees-of-freedom evaluation.
    pub fn inv_trace_product(&self, m: &Array2<f64>) -> f64 {
        let p = m.nrows();
        let mut trace = 0.0;
        let mut col = vec![0.0; p];
        for j in 0..p {
            for i in 0..p {
                col[i] = m[[i, j]];
            }
            let z = match self {
                SpdFactor::Dense(chol) => {
                    let rhs = DVector::from_column_slice(&col);
                    let sol = chol.solve(&rhs);
                    sol[j]
                }
                SpdFactor::Band(band) => band.solve(&col)[j],
            };
            trace += z;
        }
        trace
    }
}

/// Lower-band Cholesky storage: `rows[i][d]` holds `L[i, i - bw + d]`, so
/// `d = bw` is the diagonal.
pub struct BandCholesky {
    p: usize,
    bw: usize,
    rows: Vec<f64>,
}

impl BandCholesky {
    fn new(a: &Array2<f64>, bw: usize) -> Result<Self> {
        let p = a.nrows();
        let stride = bw + 1;
        let mut rows = vec![0.0f64; p * stride];
        let at = |rows: &Vec<f64>, i: usize, j: usize| -> f64 {
            // j in [i - bw, i]
            rows[i * stride + (bw + j - i)]
        };
        for i in 0..p {
            let j_lo = i.saturating_sub(bw);
            for j in j_lo..=i {
                let mut sum = a[[i, j]];
                let k_lo = j_lo.max(j.saturating_sub(bw));
                for k in k_lo..j {
                    sum -= at(&rows, i, k) * at(&rows, j, k);
                }
                if i == j {
                    if sum <= 0.0 || !sum.is_finite() {
                        return Err(Error::numerical(format!(
                            "banded Cholesky failed at pivot {i}: non-positive value {sum:.3e}"
                        )));
                    }
                    rows[i * stride + bw] = sum.sqrt();
                } else {
                    rows[i * stride + (bw + j - i)] = sum / at(&rows, j, j);
                }
            }
        }
        Ok(BandCholesky { p, bw, rows })
    }

    fn solve(&self, b: &[f64]) -> Array1<f64> {
        let (p, bw) = (self.p, self.bw);
        let stride = bw + 1;
        let l = |i: usize, j: usize| self.rows[i * stride + (bw + j - i)];
        // Forward: L y = b
        let mut y = vec![0.0f64; p];
        for i in 0..p {
            let mut sum = b[i];
            for j in i.saturating_sub(bw)..i {
                sum -= l(i, j) * y[j];
            }
            y[i] = sum / l(i, i);
        }
        // Backward: L' x = y
        let mut x = vec![0.0f64; p];
        for i in (0..p).rev() {
            let mut sum = y[i];
            let hi = (i + bw).min(p - 1);
            for j in i + 1..=hi {
                sum -= l(j, i) * x[j];
            }
            x[i] = sum / l(i, i);
        }
        Array1::from_vec(x)
    }
}

/// Eigen decomposition of a symmetric matrix, eigenvalues ascending.
/// Returns `(values, vectors)` with eigenvectors in the columns.
pub fn sym_eigen(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let p = a.nrows();
    let m = DMatrix::from_fn(p, p, |i, j| a[[i, j]]);
    let eig = nalgebra::SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .expect("eigenvalues are finite")
    });
    let mut values = Array1::zeros(p);
    let mut vectors = Array2::zeros((p, p));
    for (out_col, &src) in order.iter().enumerate() {
        values[out_col] = eig.eigenvalues[src];
        for r in 0..p {
            vectors[[r, out_col]] = eig.eigenvectors[(r, src)];
        }
    }
    (values, vectors)
}

/// Solve the ridge-stabilized weighted normal equations
/// `(X'WX + ridge I) beta = X'Wy`. Used by the imputation models and the
/// IRLS oracle, not by the boosting fits (those go through `SpdFactor`
/// with their own penalties).
pub fn solve_weighted_ridge(
    x: &Array2<f64>,
    w: &[f64],
    y: &[f64],
    ridge: f64,
) -> Result<Array1<f64>> {
    let mut a = weighted_gram(x, w);
    for d in 0..a.nrows() {
        a[[d, d]] += ridge;
    }
    let b = weighted_xtv(x, w, y);
    let factor = SpdFactor::new(&a)?;
    Ok(factor.solve(&b))
}
