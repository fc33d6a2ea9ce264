//! Base learners: the uniform penalized least-squares components that
//! compete each boosting iteration.
//!
//! Every learner, whatever it models, exposes the same contract: a design
//! matrix over the current rows, a penalty, and a ridge parameter λ
//! calibrated so that its effective degrees of freedom (trace of the
//! weighted hat matrix) hit a common target. Equal-df components are what
//! keeps selection honest — otherwise flexible learners would win ties by
//! sheer capacity, not signal.
//!
//! A formula term expands to one or more learners: a smooth term becomes
//! a centered-linear learner plus a penalized nonlinear-deviation learner
//! (so "linear vs smooth" is itself a selection outcome), an interaction
//! becomes one such pair per non-reference level of its modifier, and so
//! on. Term names group learners back together for reporting.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::basis::{
    bspline_design, decompose_pspline, difference_penalty, kronecker_sum_penalty, KnotGrid,
    SmoothDecomposition,
};
use crate::data::{dummy_code, Column, ColumnKind, Dataset};
use crate::error::Error;
use crate::linalg::{self, SpdFactor};
use crate::Result;

pub const DEFAULT_INNER_KNOTS: usize = 20;
pub const DEFAULT_SMOOTH_DEGREE: usize = 3;
pub const DEFAULT_SURFACE_DEGREE: usize = 1;
/// Common effective-degrees-of-freedom target for calibrated learners.
pub const DEFAULT_SCALAR_DF: f64 = 1.0;
/// Surfaces carry a rank-1 penalty null space (the constant surface), so
/// df can only approach 1 from above; 2 is the smallest round target.
pub const DEFAULT_SURFACE_DF: f64 = 2.0;

fn default_inner() -> usize {
    DEFAULT_INNER_KNOTS
}
fn default_smooth_degree() -> usize {
    DEFAULT_SMOOTH_DEGREE
}
fn default_surface_degree() -> usize {
    DEFAULT_SURFACE_DEGREE
}

/// What a formula term asks for. One term may expand to several learners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TermKind {
    /// Continuous column → one centered linear learner; categorical
    /// column → one dummy-coded block.
    Linear,
    /// Continuous column → centered-linear learner + penalized nonlinear
    /// deviation learner.
    Smooth {
        #[serde(default = "default_inner")]
        inner_knots: usize,
        #[serde(default = "default_smooth_degree")]
        degree: usize,
    },
    /// Smooth effect of a continuous column switched on per level of a
    /// categorical modifier: one decomposed pair per non-reference level.
    VaryingCoefficient {
        by: String,
        #[serde(default = "default_inner")]
        inner_knots: usize,
        #[serde(default = "default_smooth_degree")]
        degree: usize,
    },
    /// Bivariate tensor-product surface over two continuous columns.
    Surface {
        #[serde(default = "default_inner")]
        inner_knots: usize,
        #[serde(default = "default_surface_degree")]
        degree: usize,
    },
    /// Same machinery over two coordinate columns (lon, lat).
    Spatial {
        #[serde(default = "default_inner")]
        inner_knots: usize,
        #[serde(default = "default_surface_degree")]
        degree: usize,
    },
    /// Ridge-penalized indicator block over a grouping column.
    RandomIntercept,
}

/// One term of the model formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSpec {
    pub name: String,
    pub columns: Vec<String>,
    #[serde(flatten)]
    pub kind: TermKind,
    /// Override of the common df target for this term's calibrated
    /// learners.
    #[serde(default)]
    pub df: Option<f64>,
    /// Report grouping label (e.g. an ecological level); carried through
    /// to the coefficient table.
    #[serde(default)]
    pub group: Option<String>,
}

/// Everything needed to rebuild a learner's design on any dataset with
/// the same schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LearnerKind {
    Intercept,
    LinearContinuous {
        column: String,
        center: f64,
        lo: f64,
        hi: f64,
    },
    CategoricalDummy {
        column: String,
        reference: String,
        coded_levels: Vec<String>,
    },
    SmoothLinear {
        column: String,
        center: f64,
        lo: f64,
        hi: f64,
    },
    SmoothNonlinear {
        column: String,
        decomposition: SmoothDecomposition,
    },
    VaryingLinear {
        column: String,
        by: String,
        by_level: String,
        center: f64,
        lo: f64,
        hi: f64,
    },
    VaryingNonlinear {
        column: String,
        by: String,
        by_level: String,
        decomposition: SmoothDecomposition,
    },
    Surface {
        col1: String,
        col2: String,
        grid1: KnotGrid,
        grid2: KnotGrid,
    },
    RandomIntercept {
        column: String,
        levels: Vec<String>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    None,
    Identity,
    Matrix(Array2<f64>),
}

/// A single penalized least-squares component.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaseLearner {
    pub id: String,
    /// Owning term name; several learners may share it.
    pub term: String,
    pub group: Option<String>,
    pub kind: LearnerKind,
    pub penalty: Penalty,
    pub lambda: f64,
    /// None for unpenalized learners.
    pub df_target: Option<f64>,
}

impl BaseLearner {
    pub fn is_intercept(&self) -> bool {
        matches!(self.kind, LearnerKind::Intercept)
    }

    pub fn n_cols(&self) -> usize {
        match &self.kind {
            LearnerKind::Intercept
            | LearnerKind::LinearContinuous { .. }
            | LearnerKind::SmoothLinear { .. }
            | LearnerKind::VaryingLinear { .. } => 1,
            LearnerKind::CategoricalDummy { coded_levels, .. } => coded_levels.len(),
            LearnerKind::SmoothNonlinear { decomposition, .. }
            | LearnerKind::VaryingNonlinear { decomposition, .. } => decomposition.n_nonlinear(),
            LearnerKind::Surface { grid1, grid2, .. } => grid1.n_basis() * grid2.n_basis(),
            LearnerKind::RandomIntercept { levels, .. } => levels.len(),
        }
    }

    /// Build this learner's design matrix over the rows of `ds`.
    pub fn design(&self, ds: &Dataset) -> Result<Array2<f64>> {
        match &self.kind {
            LearnerKind::Intercept => Ok(Array2::from_elem((ds.n_rows(), 1), 1.0)),
            LearnerKind::LinearContinuous { column, center, .. }
            | LearnerKind::SmoothLinear { column, center, .. } => {
                let x = ds.float_column(column)?;
                let mut out = Array2::zeros((x.len(), 1));
                for (i, v) in x.iter().enumerate() {
                    out[[i, 0]] = v - center;
                }
                Ok(out)
            }
            LearnerKind::CategoricalDummy {
                column,
                coded_levels,
                ..
            } => {
                let (x, names) = dummy_code(ds, column)?;
                if &names != coded_levels {
                    return Err(Error::config(format!(
                        "column '{column}' levels differ from the model's ({names:?} vs {coded_levels:?})"
                    )));
                }
                Ok(x)
            }
            LearnerKind::SmoothNonlinear {
                column,
                decomposition,
            } => {
                let x = ds.float_column(column)?;
                Ok(decomposition.design_nonlinear(&x))
            }
            LearnerKind::VaryingLinear {
                column,
                by,
                by_level,
                center,
                ..
            } => {
                let x = ds.float_column(column)?;
                let ind = level_indicator(ds, by, by_level)?;
                let mut out = Array2::zeros((x.len(), 1));
                for i in 0..x.len() {
                    out[[i, 0]] = (x[i] - center) * ind[i];
                }
                Ok(out)
            }
            LearnerKind::VaryingNonlinear {
                column,
                by,
                by_level,
                decomposition,
            } => {
                let x = ds.float_column(column)?;
                let ind = level_indicator(ds, by, by_level)?;
                let mut out = decomposition.design_nonlinear(&x);
                for (i, row) in out.rows_mut().into_iter().enumerate() {
                    if ind[i] == 0.0 {
                        for v in row {
                            *v = 0.0;
                        }
                    }
                }
                Ok(out)
            }
            LearnerKind::Surface {
                col1,
                col2,
                grid1,
                grid2,
            } => {
                let x1 = ds.float_column(col1)?;
                let x2 = ds.float_column(col2)?;
                let b1 = bspline_design(&x1, grid1);
                let b2 = bspline_design(&x2, grid2);
                Ok(crate::basis::tensor_product_design(&b1, &b2))
            }
            LearnerKind::RandomIntercept { column, levels } => {
                let values = text_or_level_values(ds, column)?;
                let mut out = Array2::zeros((values.len(), levels.len()));
                for (i, v) in values.iter().enumerate() {
                    match levels.iter().position(|l| l == v) {
                        Some(j) => out[[i, j]] = 1.0,
                        None => {
                            return Err(Error::domain(format!(
                                "unseen level '{v}' in grouping column '{column}'"
                            )))
                        }
                    }
                }
                Ok(out)
            }
        }
    }
}

/// 0/1 indicator of `by == level`, erroring on missing cells.
fn level_indicator(ds: &Dataset, by: &str, level: &str) -> Result<Vec<f64>> {
    let (levels, _) = ds.levels(by)?;
    let ix = levels.iter().position(|l| l == level).ok_or_else(|| {
        Error::config(format!(
            "modifier column '{by}' has no level '{level}'"
        ))
    })? as u32;
    let vals = ds.label_values(by)?;
    let mut out = Vec::with_capacity(vals.len());
    for (row, v) in vals.iter().enumerate() {
        match v {
            Some(l) => out.push(if *l == ix { 1.0 } else { 0.0 }),
            None => {
                return Err(Error::domain(format!(
                    "modifier column '{by}' is missing at data row {}; run imputation first",
                    row + 1
                )))
            }
        }
    }
    Ok(out)
}

/// String values of a grouping column: identifier text, or the level
/// labels of a categorical column.
fn text_or_level_values(ds: &Dataset, column: &str) -> Result<Vec<String>> {
    match ds.column(column)? {
        Column::Text(v) => {
            let mut out = Vec::with_capacity(v.len());
            for (row, t) in v.iter().enumerate() {
                match t {
                    Some(s) => out.push(s.clone()),
                    None => {
                        return Err(Error::domain(format!(
                            "grouping column '{column}' is missing at data row {}",
                            row + 1
                        )))
                    }
                }
            }
            Ok(out)
        }
        Column::Label(v) => {
            let (levels, _) = ds.levels(column)?;
            let mut out = Vec::with_capacity(v.len());
            for (row, l) in v.iter().enumerate() {
                match l {
                    Some(ix) => out.push(levels[*ix as usize].clone()),
                    None => {
                        return Err(Error::domain(format!(
                            "grouping column '{column}' is missing at data row {}",
                            row + 1
                        )))
                    }
                }
            }
            Ok(out)
        }
        Column::Float(_) => Err(Error::config(format!(
            "grouping column '{column}' must be an identifier or categorical column"
        ))),
    }
}

/// Result of one penalized least-squares fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub coefficients: Array1<f64>,
    pub fitted: Array1<f64>,
    pub weighted_rss: f64,
}

fn penalized_normal_matrix(
    design: &Array2<f64>,
    w: &[f64],
    penalty: &Penalty,
    lambda: f64,
) -> Array2<f64> {
    let mut a = linalg::weighted_gram(design, w);
    match penalty {
        Penalty::None => {}
        Penalty::Identity => {
            for i in 0..a.nrows() {
                a[[i, i]] += lambda;
            }
        }
        Penalty::Matrix(k) => a.scaled_add(lambda, k),
    }
    a
}

/// Solve the penalized weighted least-squares problem
/// min ‖u − Xβ‖²_W + λ βᵀKβ.
pub fn fit_penalized_ls(
    design: &Array2<f64>,
    penalty: &Penalty,
    lambda: f64,
    u: &[f64],
    w: &[f64],
) -> Result<FitResult> {
    if design.nrows() != u.len() || u.len() != w.len() {
        return Err(Error::config(format!(
            "dimension mismatch: design has {} rows, gradient {}, weights {}",
            design.nrows(),
            u.len(),
            w.len()
        )));
    }
    let a = penalized_normal_matrix(design, w, penalty, lambda);
    let factor = SpdFactor::new(&a).map_err(|_| {
        Error::numerical(
            "singular normal equations; the design may be rank-deficient at lambda = 0"
                .to_string(),
        )
    })?;
    let rhs = linalg::weighted_xtv(design, w, u);
    let coefficients = factor.solve(&rhs);
    let fitted = design.dot(&coefficients);
    let weighted_rss = u
        .iter()
        .zip(fitted.iter())
        .zip(w)
        .map(|((ui, fi), wi)| wi * (ui - fi) * (ui - fi))
        .sum();
    Ok(FitResult {
        coefficients,
        fitted,
        weighted_rss,
    })
}

/// Effective degrees of freedom tr(X(XᵀWX+λK)⁻¹XᵀW) at a given λ.
pub fn effective_df(
    design: &Array2<f64>,
    penalty: &Penalty,
    lambda: f64,
    w: &[f64],
) -> Result<f64> {
    let g = linalg::weighted_gram(design, w);
    let a = penalized_normal_matrix(design, w, penalty, lambda);
    let factor = SpdFactor::new(&a)?;
    Ok(factor.inv_trace_product(&g))
}

/// Find λ so the effective degrees of freedom hit `df_target` within
/// 1e-6, by bisection on log λ. Errors with the attainable range when the
/// target is out of reach.
pub fn calibrate_lambda_for_df(
    design: &Array2<f64>,
    penalty: &Penalty,
    w: &[f64],
    df_target: f64,
) -> Result<f64> {
    const TOL: f64 = 1e-6;
    if matches!(penalty, Penalty::None) {
        return Err(Error::config(
            "cannot calibrate an unpenalized learner".to_string(),
        ));
    }
    if !(df_target > 0.0) {
        return Err(Error::config(format!(
            "df target must be positive, got {df_target}"
        )));
    }
    let g = linalg::weighted_gram(design, w);
    let df_at = |lambda: f64| -> Result<f64> {
        let a = penalized_normal_matrix(design, w, penalty, lambda);
        let factor = SpdFactor::new(&a)?;
        Ok(factor.inv_trace_product(&g))
    };
    // Left bracket edge: the smallest λ where the system still factors
    // (near-singular designs need a little ridge before Cholesky holds).
    let mut lo = 1e-12;
    let df_hi = loop {
        match df_at(lo) {
            Ok(v) => break v,
            Err(e) => {
                lo *= 10.0;
                if lo > 1.0 {
                    return Err(e);
                }
            }
        }
    };
    let hi = 1e12;
    let df_lo = df_at(hi)?;
    if df_target > df_hi + TOL || df_target < df_lo - TOL {
        return Err(Error::domain(format!(
            "df target {df_target} is unattainable; this learner's effective degrees of freedom range over approximately [{df_lo:.6}, {df_hi:.6}]"
        )));
    }
    if (df_hi - df_target).abs() <= TOL {
        return Ok(lo);
    }
    let (mut llo, mut lhi) = (lo.ln(), hi.ln());
    for _ in 0..200 {
        let mid = 0.5 * (llo + lhi);
        let df = df_at(mid.exp())?;
        if (df - df_target).abs() <= TOL {
            return Ok(mid.exp());
        }
        // df decreases in λ
        if df > df_target {
            llo = mid;
        } else {
            lhi = mid;
        }
    }
    Err(Error::numerical(format!(
        "degrees-of-freedom calibration did not converge to target {df_target}"
    )))
}

/// The full set of base learners for a model formula, with transforms and
/// ridge parameters frozen from the data they were built on. Serializable
/// so a fitted model can be reloaded and evaluated later.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TermSet {
    pub learners: Vec<BaseLearner>,
}

impl TermSet {
    /// Names of the distinct non-intercept terms, in formula order.
    pub fn term_names(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for l in &self.learners {
            if !l.is_intercept() && seen.insert(l.term.clone()) {
                out.push(l.term.clone());
            }
        }
        out
    }

    pub fn learners_of_term(&self, term: &str) -> Vec<&BaseLearner> {
        self.learners.iter().filter(|l| l.term == term).collect()
    }
}

/// Expand formula terms into calibrated base learners. `w` must be the
/// (normalized) fitting weights: centering, decompositions, and λ
/// calibration all use them, so that selection stays fair under the same
/// weights used for fitting.
pub fn build_term_set(terms: &[TermSpec], ds: &Dataset, w: &[f64]) -> Result<TermSet> {
    if w.len() != ds.n_rows() {
        return Err(Error::config(format!(
            "{} weights for {} rows",
            w.len(),
            ds.n_rows()
        )));
    }
    let mut names = BTreeSet::new();
    for t in terms {
        if !names.insert(t.name.as_str()) {
            return Err(Error::config(format!("duplicate term name '{}'", t.name)));
        }
    }

    let mut learners = vec![BaseLearner {
        id: "(intercept)".to_string(),
        term: "(intercept)".to_string(),
        group: None,
        kind: LearnerKind::Intercept,
        penalty: Penalty::None,
        lambda: 0.0,
        df_target: None,
    }];

    for t in terms {
        build_term(t, ds, w, &mut learners)?;
    }

    // calibrate every penalized learner to its df target
    for l in &mut learners {
        if matches!(l.penalty, Penalty::None) {
            continue;
        }
        let df = l.df_target.expect("penalized learners carry a df target");
        let design = l.design(ds)?;
        l.lambda = calibrate_lambda_for_df(&design, &l.penalty, w, df)
            .map_err(|e| match e {
                Error::Domain(msg) => {
                    Error::domain(format!("term '{}' (learner '{}'): {msg}", l.term, l.id))
                }
                other => other,
            })?;
    }

    Ok(TermSet { learners })
}

fn weighted_range_center(x: &[f64], w: &[f64]) -> Result<(f64, f64, f64)> {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (xi, wi) in x.iter().zip(w) {
        num += xi * wi;
        den += wi;
        lo = lo.min(*xi);
        hi = hi.max(*xi);
    }
    if !(den > 0.0) {
        return Err(Error::domain("weights sum to zero".to_string()));
    }
    Ok((num / den, lo, hi))
}

fn one_column(t: &TermSpec) -> Result<&str> {
    match t.columns.as_slice() {
        [c] => Ok(c),
        other => Err(Error::config(format!(
            "term '{}' needs exactly one column, got {}",
            t.name,
            other.len()
        ))),
    }
}

fn build_term(
    t: &TermSpec,
    ds: &Dataset,
    w: &[f64],
    out: &mut Vec<BaseLearner>,
) -> Result<()> {
    let scalar_df = t.df.unwrap_or(DEFAULT_SCALAR_DF);
    match &t.kind {
        TermKind::Linear => {
            let col = one_column(t)?;
            match &ds.column_schema(col)?.kind {
                ColumnKind::Continuous => {
                    let x = ds.float_column(col)?;
                    let (center, lo, hi) = weighted_range_center(&x, w)?;
                    out.push(BaseLearner {
                        id: t.name.clone(),
                        term: t.name.clone(),
                        group: t.group.clone(),
                        kind: LearnerKind::LinearContinuous {
                            column: col.to_string(),
                            center,
                            lo,
                            hi,
                        },
                        penalty: Penalty::None,
                        lambda: 0.0,
                        df_target: None,
                    });
                }
                ColumnKind::Categorical { levels, reference } => {
                    let coded: Vec<String> = levels
                        .iter()
                        .filter(|l| *l != reference)
                        .cloned()
                        .collect();
                    // small dummy blocks stay unpenalized; larger ones are
                    // ridged down to the common df so a many-level factor
                    // cannot dominate selection by capacity
                    let (penalty, df_target) = if coded.len() <= 2 {
                        (Penalty::None, None)
                    } else {
                        (Penalty::Identity, Some(scalar_df))
                    };
                    out.push(BaseLearner {
                        id: t.name.clone(),
                        term: t.name.clone(),
                        group: t.group.clone(),
                        kind: LearnerKind::CategoricalDummy {
                            column: col.to_string(),
                            reference: reference.clone(),
                            coded_levels: coded,
                        },
                        penalty,
                        lambda: 0.0,
                        df_target,
                    });
                }
                _ => {
                    return Err(Error::config(format!(
                        "term '{}': column '{col}' must be continuous or categorical",
                        t.name
                    )))
                }
            }
        }
        TermKind::Smooth {
            inner_knots,
            degree,
        } => {
            let col = one_column(t)?;
            if !matches!(ds.column_schema(col)?.kind, ColumnKind::Continuous) {
                return Err(Error::config(format!(
                    "term '{}': smooth effects need a continuous column, '{col}' is not one",
                    t.name
                )));
            }
            let x = ds.float_column(col)?;
            let (_, lo, hi) = weighted_range_center(&x, w)?;
            let grid = KnotGrid::from_data(&x, *inner_knots, *degree)
                .map_err(|e| annotate_term(e, &t.name))?;
            let dec = decompose_pspline(&x, w, &grid)?;
            out.push(BaseLearner {
                id: format!("{}.lin", t.name),
                term: t.name.clone(),
                group: t.group.clone(),
                kind: LearnerKind::SmoothLinear {
                    column: col.to_string(),
                    center: dec.center,
                    lo,
                    hi,
                },
                penalty: Penalty::None,
                lambda: 0.0,
                df_target: None,
            });
            out.push(BaseLearner {
                id: format!("{}.nl", t.name),
                term: t.name.clone(),
                group: t.group.clone(),
                kind: LearnerKind::SmoothNonlinear {
                    column: col.to_string(),
                    decomposition: dec,
                },
                penalty: Penalty::Identity,
                lambda: 0.0,
                df_target: Some(scalar_df),
            });
        }
        TermKind::VaryingCoefficient {
            by,
            inner_knots,
            degree,
        } => {
            let col = one_column(t)?;
            if !matches!(ds.column_schema(col)?.kind, ColumnKind::Continuous) {
                return Err(Error::config(format!(
                    "term '{}': varying-coefficient effects need a continuous column, '{col}' is not one",
                    t.name
                )));
            }
            let (levels, reference) = match &ds.column_schema(by)?.kind {
                ColumnKind::Categorical { levels, reference } => {
                    (levels.clone(), reference.clone())
                }
                _ => {
                    return Err(Error::config(format!(
                        "term '{}': interaction modifier '{by}' must be categorical",
                        t.name
                    )))
                }
            };
            let x = ds.float_column(col)?;
            let (_, lo, hi) = weighted_range_center(&x, w)?;
            let grid = KnotGrid::from_data(&x, *inner_knots, *degree)
                .map_err(|e| annotate_term(e, &t.name))?;
            let dec = decompose_pspline(&x, w, &grid)?;
            for level in levels.iter().filter(|l| **l != reference) {
                out.push(BaseLearner {
                    id: format!("{}.by.{by}={level}.lin", t.name),
                    term: t.name.clone(),
                    group: t.group.clone(),
                    kind: LearnerKind::VaryingLinear {
                        column: col.to_string(),
                        by: by.clone(),
                        by_level: level.clone(),
                        center: dec.center,
                        lo,
                        hi,
                    },
                    penalty: Penalty::None,
                    lambda: 0.0,
                    df_target: None,
                });
                out.push(BaseLearner {
                    id: format!("{}.by.{by}={level}.nl", t.name),
                    term: t.name.clone(),
                    group: t.group.clone(),
                    kind: LearnerKind::VaryingNonlinear {
                        column: col.to_string(),
                        by: by.clone(),
                        by_level: level.clone(),
                        decomposition: dec.clone(),
                    },
                    penalty: Penalty::Identity,
                    lambda: 0.0,
                    df_target: Some(scalar_df),
                });
            }
        }
        TermKind::Surface {
            inner_knots,
            degree,
        }
        | TermKind::Spatial {
            inner_knots,
            degree,
        } => {
            let spatial = matches!(t.kind, TermKind::Spatial { .. });
            let [c1, c2] = match t.columns.as_slice() {
                [a, b] => [a.clone(), b.clone()],
                other => {
                    return Err(Error::config(format!(
                        "term '{}' needs exactly two columns, got {}",
                        t.name,
                        other.len()
                    )))
                }
            };
            for c in [&c1, &c2] {
                let kind = &ds.column_schema(c)?.kind;
                let ok = if spatial {
                    matches!(kind, ColumnKind::Coordinate)
                } else {
                    matches!(kind, ColumnKind::Continuous)
                };
                if !ok {
                    return Err(Error::config(format!(
                        "term '{}': column '{c}' has the wrong kind for a {} term",
                        t.name,
                        if spatial { "spatial" } else { "surface" }
                    )));
                }
            }
            let x1 = ds.float_column(&c1)?;
            let x2 = ds.float_column(&c2)?;
            let grid1 = KnotGrid::from_data(&x1, *inner_knots, *degree)
                .map_err(|e| annotate_term(e, &t.name))?;
            let grid2 = KnotGrid::from_data(&x2, *inner_knots, *degree)
                .map_err(|e| annotate_term(e, &t.name))?;
            let k1 = difference_penalty(grid1.n_basis(), 1)?;
            let k2 = difference_penalty(grid2.n_basis(), 1)?;
            let penalty = kronecker_sum_penalty(&k1, &k2);
            out.push(BaseLearner {
                id: t.name.clone(),
                term: t.name.clone(),
                group: t.group.clone(),
                kind: LearnerKind::Surface {
                    col1: c1,
                    col2: c2,
                    grid1,
                    grid2,
                },
                penalty: Penalty::Matrix(penalty),
                lambda: 0.0,
                df_target: Some(t.df.unwrap_or(DEFAULT_SURFACE_DF)),
            });
        }
        TermKind::RandomIntercept => {
            let col = one_column(t)?;
            let levels = match &ds.column_schema(col)?.kind {
                ColumnKind::Categorical { levels, .. } => levels.clone(),
                ColumnKind::Identifier => {
                    let observed = text_or_level_values(ds, col)?;
                    let set: BTreeSet<String> = observed.into_iter().collect();
                    set.into_iter().collect()
                }
                _ => {
                    return Err(Error::config(format!(
                        "term '{}': grouping column '{col}' must be an identifier or categorical column",
                        t.name
                    )))
                }
            };
            if levels.len() < 2 {
                return Err(Error::config(format!(
                    "term '{}': grouping column '{col}' has fewer than 2 levels",
                    t.name
                )));
            }
            out.push(BaseLearner {
                id: t.name.clone(),
                term: t.name.clone(),
                group: t.group.clone(),
                kind: LearnerKind::RandomIntercept {
                    column: col.to_string(),
                    levels,
                },
                penalty: Penalty::Identity,
                lambda: 0.0,
                df_target: Some(scalar_df),
            });
        }
    }
    Ok(())
}

fn annotate_term(e: Error, term: &str) -> Error {
    match e {
        Error::Domain(msg) => Error::domain(format!("term '{term}': {msg}")),
        Error::Config(msg) => Error::config(format!("term '{term}': {msg}")),
        other => other,
    }
}

/// A term set bound to concrete rows and weights: designs built, normal
/// matrices factorized. This is the per-fit working state; the frozen
/// `TermSet` can be prepared against any subset of rows (λ is not
/// recalibrated, matching the convention that resampling refits reuse the
/// full-data smoothing setup).
pub struct PreparedTermSet {
    pub designs: Vec<Array2<f64>>,
    factors: Vec<Option<SpdFactor>>,
    pub n_rows: usize,
}

impl TermSet {
    pub fn prepare(&self, ds: &Dataset, w: &[f64]) -> Result<PreparedTermSet> {
        let mut designs = Vec::with_capacity(self.learners.len());
        let mut factors = Vec::with_capacity(self.learners.len());
        for l in &self.learners {
            let design = l.design(ds)?;
            let a = penalized_normal_matrix(&design, w, &l.penalty, l.lambda);
            let factor = match SpdFactor::new(&a) {
                Ok(f) => Some(f),
                Err(e) => {
                    log::warn!("learner '{}' excluded from fitting: {e}", l.id);
                    None
                }
            };
            designs.push(design);
            factors.push(factor);
        }
        if factors.iter().all(Option::is_none) {
            return Err(Error::numerical(
                "no base learner could be factorized".to_string(),
            ));
        }
        Ok(PreparedTermSet {
            designs,
            factors,
            n_rows: ds.n_rows(),
        })
    }
}

impl PreparedTermSet {
    /// Fit learner `ix` to the working response `u`. `None` if the
    /// learner's normal matrix could not be factorized.
    pub fn fit_learner(&self, ix: usize, u: &[f64], w: &[f64]) -> Option<FitResult> {
        let factor = self.factors[ix].as_ref()?;
        let design = &self.designs[ix];
        let rhs = linalg::weighted_xtv(design, w, u);
        let coefficients = factor.solve(&rhs);
        let fitted = design.dot(&coefficients);
        let weighted_rss = u
            .iter()
            .zip(fitted.iter())
            .zip(w)
            .map(|((ui, fi), wi)| wi * (ui - fi) * (ui - fi))
            .sum();
        Some(FitResult {
            coefficients,
            fitted,
            weighted_rss,
        })
    }

    pub fn n_learners(&self) -> usize {
        self.designs.len()
    }
}
