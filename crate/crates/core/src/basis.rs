//! B-spline bases, difference penalties, and the centered
//! linear/nonlinear decomposition used by the smooth base learners.
//!
//! Smooth terms are represented as penalized B-splines: an equidistant
//! knot grid, a banded design matrix from the Cox–de Boor recursion, and
//! a squared difference penalty. For model selection the spline span is
//! split into an unpenalized part (intercept + centered linear trend) and
//! a fully penalized deviation that is orthogonal to it in the weighted
//! inner product, so "does this covariate act nonlinearly?" becomes a
//! selection question between two separate learners.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg;
use crate::Result;

/// Equidistant knot grid with degree-fold boundary replication.
///
/// `expanded` holds the full knot vector: the boundary knots repeated
/// `degree + 1` times on each side with `inner` strictly inside, giving
/// `inner.len() + degree + 1` basis functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotGrid {
    pub degree: usize,
    pub lo: f64,
    pub hi: f64,
    pub inner: Vec<f64>,
    expanded: Vec<f64>,
}

impl KnotGrid {
    pub fn equidistant(lo: f64, hi: f64, n_inner: usize, degree: usize) -> Result<KnotGrid> {
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::domain(format!(
                "knot range [{lo}, {hi}] is not finite"
            )));
        }
        if !(lo < hi) {
            return Err(Error::domain(format!(
                "knot range [{lo}, {hi}] is degenerate; the covariate may be constant"
            )));
        }
        let step = (hi - lo) / (n_inner as f64 + 1.0);
        let inner: Vec<f64> = (1..=n_inner).map(|i| lo + step * i as f64).collect();
        let mut expanded = Vec::with_capacity(n_inner + 2 * (degree + 1));
        expanded.extend(std::iter::repeat(lo).take(degree + 1));
        expanded.extend_from_slice(&inner);
        expanded.extend(std::iter::repeat(hi).take(degree + 1));
        Ok(KnotGrid {
            degree,
            lo,
            hi,
            inner,
            expanded,
        })
    }

    /// Grid spanning the observed range of `x`.
    pub fn from_data(x: &[f64], n_inner: usize, degree: usize) -> Result<KnotGrid> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in x {
            if !v.is_finite() {
                return Err(Error::domain(
                    "cannot build a knot grid over non-finite values".to_string(),
                ));
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if x.is_empty() {
            return Err(Error::domain(
                "cannot build a knot grid over an empty sample".to_string(),
            ));
        }
        Self::equidistant(lo, hi, n_inner, degree)
    }

    pub fn n_basis(&self) -> usize {
        self.inner.len() + self.degree + 1
    }

    pub fn expanded(&self) -> &[f64] {
        &self.expanded
    }

    /// Evaluate all basis functions at one point into `row`
    /// (length `n_basis`). Points outside the knot range are clamped;
    /// `clamped` is bumped when that happens so callers can warn once.
    fn fill_row(&self, x: f64, row: &mut [f64], clamped: &mut usize) {
        debug_assert_eq!(row.len(), self.n_basis());
        let t = &self.expanded;
        let x = if x < self.lo {
            *clamped += 1;
            self.lo
        } else if x > self.hi {
            *clamped += 1;
            self.hi
        } else {
            x
        };
        // Cox–de Boor over the full table. Degree-0 layer: half-open
        // intervals [t_i, t_{i+1}), except the last non-empty interval
        // which is closed so x == hi has support.
        let n0 = t.len() - 1;
        let mut b = vec![0.0; n0];
        if x == self.hi {
            for i in 0..n0 {
                if t[i] < t[i + 1] && t[i + 1] == self.hi {
                    b[i] = 1.0;
                }
            }
        } else {
            for i in 0..n0 {
                if t[i] <= x && x < t[i + 1] {
                    b[i] = 1.0;
                }
            }
        }
        for d in 1..=self.degree {
            for i in 0..(n0 - d) {
                // 0/0 counts as 0 in both terms
                let mut v = 0.0;
                let den1 = t[i + d] - t[i];
                if den1 > 0.0 && b[i] != 0.0 {
                    v += (x - t[i]) / den1 * b[i];
                }
                let den2 = t[i + d + 1] - t[i + 1];
                if den2 > 0.0 && b[i + 1] != 0.0 {
                    v += (t[i + d + 1] - x) / den2 * b[i + 1];
                }
                b[i] = v;
            }
        }
        row.copy_from_slice(&b[..self.n_basis()]);
    }
}

/// Design matrix of the B-spline basis over `x` (n × n_basis).
/// Out-of-range points are clamped to the boundary and reported with a
/// single warning.
pub fn bspline_design(x: &[f64], grid: &KnotGrid) -> Array2<f64> {
    let m = grid.n_basis();
    let mut out = Array2::zeros((x.len(), m));
    let mut clamped = 0usize;
    for (i, &xi) in x.iter().enumerate() {
        grid.fill_row(xi, out.row_mut(i).as_slice_mut().unwrap(), &mut clamped);
    }
    if clamped > 0 {
        log::warn!(
            "{clamped} evaluation point(s) outside the knot range [{}, {}] were clamped",
            grid.lo,
            grid.hi
        );
    }
    out
}

/// d-th order difference matrix, (n − order) × n.
pub fn difference_matrix(n: usize, order: usize) -> Array2<f64> {
    assert!(order < n);
    // first-order differences composed `order` times
    let mut d = Array2::eye(n);
    for k in 0..order {
        let rows = n - k - 1;
        let mut next = Array2::zeros((rows, n));
        for i in 0..rows {
            for j in 0..n {
                next[[i, j]] = d[[i + 1, j]] - d[[i, j]];
            }
        }
        d = next;
    }
    d
}

/// Difference penalty K = DᵀD of the given order. Its null space is the
/// polynomials of degree < order evaluated on the coefficient index.
pub fn difference_penalty(n: usize, order: usize) -> Result<Array2<f64>> {
    if order == 0 || order >= n {
        return Err(Error::config(format!(
            "difference order {order} is invalid for {n} basis functions"
        )));
    }
    let d = difference_matrix(n, order);
    Ok(d.t().dot(&d))
}

/// A smooth term split into unpenalized (intercept + centered linear) and
/// penalized nonlinear parts, orthogonal in the weighted inner product of
/// the training data.
///
/// The nonlinear design is `B·L − Z·A` where `L` maps the penalized
/// eigendirections to spline coefficients (so the penalty becomes the
/// identity) and `Z·A` removes the weighted projection onto
/// `Z = [1, x − center]`. Both matrices are frozen at construction, so
/// the same decomposition evaluates consistently on new data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothDecomposition {
    pub grid: KnotGrid,
    /// Weighted mean of the training covariate.
    pub center: f64,
    /// n_basis × r map from penalized coordinates to spline coefficients.
    pub transform: Array2<f64>,
    /// 2 × r projection coefficients of the raw penalized columns on Z.
    pub adjust: Array2<f64>,
}

impl SmoothDecomposition {
    /// Number of nonlinear columns (n_basis − order for a d-th order
    /// difference penalty).
    pub fn n_nonlinear(&self) -> usize {
        self.transform.ncols()
    }

    /// Centered linear column for new data.
    pub fn design_linear(&self, x: &[f64]) -> Array1<f64> {
        x.iter().map(|&v| v - self.center).collect()
    }

    /// Nonlinear design block for new data (n × r).
    pub fn design_nonlinear(&self, x: &[f64]) -> Array2<f64> {
        let b = bspline_design(x, &self.grid);
        let mut out = b.dot(&self.transform);
        for (i, &xi) in x.iter().enumerate() {
            for j in 0..out.ncols() {
                let z_adj = self.adjust[[0, j]] + (xi - self.center) * self.adjust[[1, j]];
                out[[i, j]] -= z_adj;
            }
        }
        out
    }
}

/// Build the decomposition from training data and weights using a
/// second-order difference penalty.
pub fn decompose_pspline(x: &[f64], w: &[f64], grid: &KnotGrid) -> Result<SmoothDecomposition> {
    const ORDER: usize = 2;
    if x.len() != w.len() {
        return Err(Error::config(format!(
            "{} covariate values but {} weights",
            x.len(),
            w.len()
        )));
    }
    let m = grid.n_basis();
    let k = difference_penalty(m, ORDER)?;
    let (eigvals, eigvecs) = linalg::sym_eigen(&k);
    // Positive eigenvalues carry the penalty; the null space (dimension =
    // ORDER) is spanned by constant-and-linear coefficient sequences and
    // is re-expressed through Z below.
    let max_ev = eigvals[eigvals.len() - 1];
    let tol = max_ev * 1e-10;
    let pos: Vec<usize> = (0..m).filter(|&j| eigvals[j] > tol).collect();
    if pos.len() != m - ORDER {
        return Err(Error::numerical(format!(
            "difference penalty eigendecomposition found {} positive eigenvalues, expected {}",
            pos.len(),
            m - ORDER
        )));
    }
    let r = pos.len();
    let mut transform = Array2::zeros((m, r));
    for (jj, &j) in pos.iter().enumerate() {
        let scale = eigvals[j].sqrt().recip();
        for i in 0..m {
            transform[[i, jj]] = eigvecs[[i, j]] * scale;
        }
    }

    let b = bspline_design(x, grid);
    let x_pen_raw = b.dot(&transform);

    // weighted projection onto Z = [1, x - center]
    let w_total: f64 = w.iter().sum();
    if !(w_total > 0.0) {
        return Err(Error::domain("weights sum to zero".to_string()));
    }
    let center = x
        .iter()
        .zip(w)
        .map(|(xi, wi)| xi * wi)
        .sum::<f64>()
        / w_total;
    let xc: Vec<f64> = x.iter().map(|&v| v - center).collect();
    let (mut a00, mut a01, mut a11) = (0.0, 0.0, 0.0);
    for (xi, wi) in xc.iter().zip(w) {
        a00 += wi;
        a01 += wi * xi;
        a11 += wi * xi * xi;
    }
    let det = a00 * a11 - a01 * a01;
    if !(det > 0.0) {
        return Err(Error::domain(
            "covariate is constant under the weights; a smooth term needs variation".to_string(),
        ));
    }
    // adjust = (ZᵀWZ)⁻¹ ZᵀW X_pen_raw, built column by column
    let mut adjust = Array2::zeros((2, r));
    for j in 0..r {
        let (mut s0, mut s1) = (0.0, 0.0);
        for i in 0..x.len() {
            let wv = w[i] * x_pen_raw[[i, j]];
            s0 += wv;
            s1 += wv * xc[i];
        }
        adjust[[0, j]] = (a11 * s0 - a01 * s1) / det;
        adjust[[1, j]] = (a00 * s1 - a01 * s0) / det;
    }

    Ok(SmoothDecomposition {
        grid: grid.clone(),
        center,
        transform,
        adjust,
    })
}

/// Row-wise tensor product of two marginal design matrices:
/// `out[i, j1·m2 + j2] = b1[i, j1] · b2[i, j2]`.
pub fn tensor_product_design(b1: &Array2<f64>, b2: &Array2<f64>) -> Array2<f64> {
    assert_eq!(b1.nrows(), b2.nrows());
    let (n, m1, m2) = (b1.nrows(), b1.ncols(), b2.ncols());
    let mut out = Array2::zeros((n, m1 * m2));
    for i in 0..n {
        for j1 in 0..m1 {
            let v1 = b1[[i, j1]];
            if v1 == 0.0 {
                continue;
            }
            for j2 in 0..m2 {
                out[[i, j1 * m2 + j2]] = v1 * b2[[i, j2]];
            }
        }
    }
    out
}

/// Full bivariate surface basis: row-wise Kronecker design over the two
/// marginal grids plus the first-order Kronecker-sum penalty
/// K₁⊗I + I⊗K₂, whose only null direction is the constant surface.
pub fn tensor_surface(
    x1: &[f64],
    x2: &[f64],
    grid1: &KnotGrid,
    grid2: &KnotGrid,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if x1.len() != x2.len() {
        return Err(Error::config(format!(
            "surface coordinates have {} and {} rows",
            x1.len(),
            x2.len()
        )));
    }
    let b1 = bspline_design(x1, grid1);
    let b2 = bspline_design(x2, grid2);
    let design = tensor_product_design(&b1, &b2);
    let k1 = difference_penalty(grid1.n_basis(), 1)?;
    let k2 = difference_penalty(grid2.n_basis(), 1)?;
    Ok((design, kronecker_sum_penalty(&k1, &k2)))
}

/// Kronecker-sum penalty K₁⊗I + I⊗K₂ for a tensor-product basis with
/// marginal penalties K₁ (m1 × m1) and K₂ (m2 × m2).
pub fn kronecker_sum_penalty(k1: &Array2<f64>, k2: &Array2<f64>) -> Array2<f64> {
    let (m1, m2) = (k1.nrows(), k2.nrows());
    assert_eq!(k1.ncols(), m1);
    assert_eq!(k2.ncols(), m2);
    let p = m1 * m2;
    let mut out = Array2::zeros((p, p));
    for a in 0..m1 {
        for b in 0..m1 {
            let v = k1[[a, b]];
            if v != 0.0 {
                for j in 0..m2 {
                    out[[a * m2 + j, b * m2 + j]] += v;
                }
            }
        }
    }
    for a in 0..m2 {
        for b in 0..m2 {
            let v = k2[[a, b]];
            if v != 0.0 {
                for i in 0..m1 {
                    out[[i * m2 + a, i * m2 + b]] += v;
                }
            }
        }
    }
    out
}

/// Sum of each design row — used in tests and sanity checks; a B-spline
/// basis over its knot range always sums to one.
pub fn row_sums(design: &Array2<f64>) -> Array1<f64> {
    design.sum_axis(Axis(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn degree1_basis_at_quarter_point() {
        // [0, 1] with one inner knot at 0.5: hat functions at 0, 0.5, 1.
        // At x = 0.25 the first two are 0.5 each.
        let grid = KnotGrid::equidistant(0.0, 1.0, 1, 1).unwrap();
        assert_eq!(grid.n_basis(), 3);
        let d = bspline_design(&[0.25], &grid);
        assert_abs_diff_eq!(d[[0, 0]], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(d[[0, 1]], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(d[[0, 2]], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn basis_count_and_expanded_knots() {
        let grid = KnotGrid::equidistant(-1.0, 1.0, 20, 3).unwrap();
        assert_eq!(grid.n_basis(), 24);
        assert_eq!(grid.expanded().len(), 20 + 2 * 4);
        assert_eq!(grid.inner.len(), 20);
        // equidistant interior
        assert_abs_diff_eq!(grid.inner[0], -1.0 + 2.0 / 21.0, epsilon = 1e-15);
    }

    #[test]
    fn partition_of_unity_everywhere_including_boundaries() {
        for degree in 1..=3 {
            let grid = KnotGrid::equidistant(-2.0, 3.0, 7, degree).unwrap();
            let xs: Vec<f64> = (0..=50)
                .map(|i| -2.0 + 5.0 * i as f64 / 50.0)
                .collect();
            let d = bspline_design(&xs, &grid);
            for (i, s) in row_sums(&d).iter().enumerate() {
                assert_abs_diff_eq!(*s, 1.0, epsilon = 1e-12);
                for j in 0..d.ncols() {
                    assert!(d[[i, j]] >= 0.0 && d[[i, j]] <= 1.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn right_boundary_has_support() {
        let grid = KnotGrid::equidistant(0.0, 1.0, 4, 3).unwrap();
        let d = bspline_design(&[1.0], &grid);
        assert_abs_diff_eq!(d[[0, grid.n_basis() - 1]], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(row_sums(&d)[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn out_of_range_points_are_clamped_to_boundary() {
        let grid = KnotGrid::equidistant(0.0, 1.0, 4, 3).unwrap();
        let d = bspline_design(&[-0.5, 1.5], &grid);
        let at_bounds = bspline_design(&[0.0, 1.0], &grid);
        assert_eq!(d, at_bounds);
    }

    #[test]
    fn degree_zero_is_an_indicator_basis() {
        // cells [0, 1/3), [1/3, 2/3), [2/3, 1]
        let grid = KnotGrid::equidistant(0.0, 1.0, 2, 0).unwrap();
        assert_eq!(grid.n_basis(), 3);
        let d = bspline_design(&[0.1, 0.5, 0.99, 1.0], &grid);
        for i in 0..4 {
            let row: Vec<f64> = (0..3).map(|j| d[[i, j]]).collect();
            assert_eq!(row.iter().filter(|v| **v == 1.0).count(), 1);
            assert_eq!(row.iter().filter(|v| **v == 0.0).count(), 2);
        }
        assert_eq!(d[[0, 0]], 1.0);
        assert_eq!(d[[1, 1]], 1.0);
        assert_eq!(d[[2, 2]], 1.0);
        assert_eq!(d[[3, 2]], 1.0); // right boundary belongs to the last cell
    }

    #[test]
    fn cubic_rows_have_local_support() {
        let grid = KnotGrid::equidistant(0.0, 1.0, 10, 3).unwrap();
        let d = bspline_design(&[0.37], &grid);
        let nonzero = (0..d.ncols()).filter(|&j| d[[0, j]] != 0.0).count();
        assert!(nonzero <= 4, "cubic basis row has {nonzero} nonzeros");
    }

    #[test]
    fn second_difference_penalty_matches_hand_computation() {
        // D = [[1,-2,1,0],[0,1,-2,1]], K = DᵀD
        let k = difference_penalty(4, 2).unwrap();
        let expected = [
            [1.0, -2.0, 1.0, 0.0],
            [-2.0, 5.0, -4.0, 1.0],
            [1.0, -4.0, 5.0, -2.0],
            [0.0, 1.0, -2.0, 1.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(k[[i, j]], expected[i][j], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn penalty_null_space_is_low_order_polynomials() {
        let m = 9;
        let k2 = difference_penalty(m, 2).unwrap();
        let ones = Array1::from_elem(m, 1.0);
        let linear: Array1<f64> = (0..m).map(|i| i as f64).collect();
        let quad: Array1<f64> = (0..m).map(|i| (i * i) as f64).collect();
        assert!(k2.dot(&ones).iter().all(|v| v.abs() < 1e-12));
        assert!(k2.dot(&linear).iter().all(|v| v.abs() < 1e-12));
        assert!(k2.dot(&quad).iter().any(|v| v.abs() > 1e-6));

        let k1 = difference_penalty(m, 1).unwrap();
        assert!(k1.dot(&ones).iter().all(|v| v.abs() < 1e-12));
        assert!(k1.dot(&linear).iter().any(|v| v.abs() > 1e-6));

        // rank = m - order by eigenvalue count
        let (ev, _) = crate::linalg::sym_eigen(&k2);
        let near_zero = ev.iter().filter(|v| v.abs() < 1e-10).count();
        assert_eq!(near_zero, 2);
    }

    fn test_sample() -> (Vec<f64>, Vec<f64>) {
        // deterministic, unevenly spaced points with uneven weights
        let x: Vec<f64> = (0..60)
            .map(|i| {
                let t = i as f64 / 59.0;
                -1.0 + 2.0 * t + 0.1 * (7.0 * t).sin()
            })
            .collect();
        let w: Vec<f64> = (0..60).map(|i| 0.5 + ((i % 7) as f64) * 0.4).collect();
        (x, w)
    }

    #[test]
    fn decomposition_is_weighted_orthogonal_to_intercept_and_trend() {
        let (x, w) = test_sample();
        let grid = KnotGrid::from_data(&x, 12, 3).unwrap();
        let dec = decompose_pspline(&x, &w, &grid).unwrap();
        let x_nl = dec.design_nonlinear(&x);
        assert_eq!(x_nl.ncols(), grid.n_basis() - 2);
        let xc = dec.design_linear(&x);
        for j in 0..x_nl.ncols() {
            let (mut s_const, mut s_lin) = (0.0, 0.0);
            for i in 0..x.len() {
                s_const += w[i] * x_nl[[i, j]];
                s_lin += w[i] * xc[i] * x_nl[[i, j]];
            }
            assert!(s_const.abs() < 1e-8, "column {j}: ⟨1, col⟩_W = {s_const}");
            assert!(s_lin.abs() < 1e-8, "column {j}: ⟨x_c, col⟩_W = {s_lin}");
        }
    }

    #[test]
    fn transformed_penalty_is_identity() {
        let (x, w) = test_sample();
        let grid = KnotGrid::from_data(&x, 12, 3).unwrap();
        let dec = decompose_pspline(&x, &w, &grid).unwrap();
        let k = difference_penalty(grid.n_basis(), 2).unwrap();
        let ltk = dec.transform.t().dot(&k).dot(&dec.transform);
        for i in 0..ltk.nrows() {
            for j in 0..ltk.ncols() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(ltk[[i, j]], expected, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn decomposition_spans_the_spline_space() {
        // every raw basis column must be reproducible from
        // {1, x_c, nonlinear columns}
        let (x, w) = test_sample();
        let grid = KnotGrid::from_data(&x, 8, 3).unwrap();
        let dec = decompose_pspline(&x, &w, &grid).unwrap();
        let b = bspline_design(&x, &grid);
        let x_nl = dec.design_nonlinear(&x);
        let xc = dec.design_linear(&x);
        let n = x.len();
        let p = 2 + x_nl.ncols();
        let mut m = Array2::zeros((n, p));
        for i in 0..n {
            m[[i, 0]] = 1.0;
            m[[i, 1]] = xc[i];
            for j in 0..x_nl.ncols() {
                m[[i, 2 + j]] = x_nl[[i, j]];
            }
        }
        let w1 = vec![1.0; n];
        let mut gram = crate::linalg::weighted_gram(&m, &w1);
        for i in 0..p {
            gram[[i, i]] += 1e-10; // basis columns overlap heavily; keep SPD
        }
        let chol = crate::linalg::SpdFactor::new(&gram).unwrap();
        for j in 0..b.ncols() {
            let col = b.column(j).to_owned();
            let rhs = crate::linalg::weighted_xtv(&m, &w1, col.as_slice().unwrap());
            let beta = chol.solve(&rhs);
            let fitted = m.dot(&beta);
            let resid = (&col - &fitted).mapv(f64::abs).sum();
            assert!(resid < 1e-7, "basis column {j} not reproduced, L1 residual {resid}");
        }
    }

    #[test]
    fn constant_covariate_is_rejected() {
        let x = vec![2.0; 10];
        assert!(KnotGrid::from_data(&x, 5, 3).is_err());
    }

    #[test]
    fn tensor_design_is_rowwise_kronecker() {
        let g1 = KnotGrid::equidistant(0.0, 1.0, 1, 1).unwrap();
        let g2 = KnotGrid::equidistant(0.0, 1.0, 2, 1).unwrap();
        let x1 = [0.25, 0.7];
        let x2 = [0.1, 0.9];
        let b1 = bspline_design(&x1, &g1);
        let b2 = bspline_design(&x2, &g2);
        let t = tensor_product_design(&b1, &b2);
        assert_eq!(t.shape(), &[2, g1.n_basis() * g2.n_basis()]);
        let m2 = g2.n_basis();
        for i in 0..2 {
            for j1 in 0..g1.n_basis() {
                for j2 in 0..m2 {
                    assert_abs_diff_eq!(
                        t[[i, j1 * m2 + j2]],
                        b1[[i, j1]] * b2[[i, j2]],
                        epsilon = 1e-15
                    );
                }
            }
            // product of two partitions of unity
            assert_abs_diff_eq!(row_sums(&t)[i], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn default_surface_width_matches_marginal_sizes() {
        let g = KnotGrid::equidistant(0.0, 1.0, 20, 1).unwrap();
        assert_eq!(g.n_basis(), 22);
        let x: Vec<f64> = (0..5).map(|i| i as f64 / 4.0).collect();
        let b = bspline_design(&x, &g);
        let t = tensor_product_design(&b, &b);
        assert_eq!(t.ncols(), 484);
    }

    #[test]
    fn kronecker_sum_penalty_has_constant_null_space() {
        let m1 = 5;
        let m2 = 4;
        let k1 = difference_penalty(m1, 1).unwrap();
        let k2 = difference_penalty(m2, 1).unwrap();
        let k = kronecker_sum_penalty(&k1, &k2);
        assert_eq!(k.shape(), &[m1 * m2, m1 * m2]);
        let ones = Array1::from_elem(m1 * m2, 1.0);
        assert!(k.dot(&ones).iter().all(|v| v.abs() < 1e-12));
        // exactly one null direction: first-order marginals each lose one
        // dimension and the sum recovers all but the joint constant
        let (ev, _) = crate::linalg::sym_eigen(&k);
        let near_zero = ev.iter().filter(|v| v.abs() < 1e-10).count();
        assert_eq!(near_zero, 1);
    }

    #[test]
    fn decomposition_serializes_and_evaluates_identically() {
        let (x, w) = test_sample();
        let grid = KnotGrid::from_data(&x, 6, 3).unwrap();
        let dec = decompose_pspline(&x, &w, &grid).unwrap();
        let json = serde_json::to_string(&dec).unwrap();
        let back: SmoothDecomposition = serde_json::from_str(&json).unwrap();
        let a = dec.design_nonlinear(&x);
        let b = back.design_nonlinear(&x);
        for (u, v) in a.iter().zip(b.iter()) {
            assert_eq!(u.to_bits(), v.to_bits());
        }
    }
}
