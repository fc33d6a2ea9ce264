//! Row-level cleaning: plausibility filters, interquartile-range outlier
//! removal, weighted centering, and dummy coding.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Column, ColumnKind, Dataset};
use crate::error::Error;
use crate::Result;

/// Comparison operator for a filter condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Gt,
    Ge,
    Lt,
    Le,
    Eq,
    Ne,
}

impl Comparison {
    fn eval_f64(self, a: f64, b: f64) -> bool {
        match self {
            Comparison::Gt => a > b,
            Comparison::Ge => a >= b,
            Comparison::Lt => a < b,
            Comparison::Le => a <= b,
            Comparison::Eq => a == b,
            Comparison::Ne => a != b,
        }
    }
}

/// Right-hand side of a condition: another column, a numeric constant, or
/// a categorical level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterRhs {
    Column(String),
    Const(f64),
    Level(String),
}

/// One atomic comparison inside a rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterCondition {
    pub column: String,
    pub op: Comparison,
    pub rhs: FilterRhs,
}

/// A plausibility rule: the conjunction of its conditions describes an
/// implausible record, so a row where *all* conditions hold is rejected.
/// If any referenced value is missing the rule cannot fire for that row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterRule {
    pub id: String,
    #[serde(default)]
    pub description: String,
    pub all_of: Vec<FilterCondition>,
}

/// Per-rule rejection count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleRejection {
    pub id: String,
    pub description: String,
    pub rows_rejected: usize,
}

/// Outcome of a filtering pass. `rows_removed` counts distinct rows; a row
/// matching several rules appears in each rule's count but is removed once.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectionReport {
    pub rules: Vec<RuleRejection>,
    pub rows_removed: usize,
    pub rows_kept: usize,
}

impl RejectionReport {
    /// One CSV row per rule: `rule_id,description,rows_rejected`.
    pub fn to_csv_writer(&self, writer: impl std::io::Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["rule_id", "description", "rows_rejected"])?;
        for r in &self.rules {
            wtr.write_record([&r.id, &r.description, &r.rows_rejected.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_path(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        self.to_csv_writer(std::fs::File::create(path)?)
    }
}

enum ResolvedRhs {
    FloatCol(usize),
    Const(f64),
    Level(u32),
}

struct ResolvedCondition {
    lhs_col: usize,
    lhs_is_label: bool,
    op: Comparison,
    rhs: ResolvedRhs,
}

fn resolve_condition(ds: &Dataset, cond: &FilterCondition) -> Result<ResolvedCondition> {
    let lhs_col = ds.column_index(&cond.column)?;
    let lhs_schema = &ds.schema()[lhs_col];
    match (&lhs_schema.kind, &cond.rhs) {
        (ColumnKind::Categorical { levels, .. }, FilterRhs::Level(level)) => {
            if !matches!(cond.op, Comparison::Eq | Comparison::Ne) {
                return Err(Error::config(format!(
                    "filter on categorical column '{}' must use eq or ne",
                    cond.column
                )));
            }
            let ix = levels.iter().position(|l| l == level).ok_or_else(|| {
                Error::config(format!(
                    "filter references level '{level}' not declared for column '{}'",
                    cond.column
                ))
            })?;
            Ok(ResolvedCondition {
                lhs_col,
                lhs_is_label: true,
                op: cond.op,
                rhs: ResolvedRhs::Level(ix as u32),
            })
        }
        (ColumnKind::Categorical { .. }, _) => Err(Error::config(format!(
            "filter on categorical column '{}' needs a level on the right-hand side",
            cond.column
        ))),
        (ColumnKind::Identifier, _) => Err(Error::config(format!(
            "identifier column '{}' cannot appear in a filter",
            cond.column
        ))),
        (_, FilterRhs::Const(c)) => Ok(ResolvedCondition {
            lhs_col,
            lhs_is_label: false,
            op: cond.op,
            rhs: ResolvedRhs::Const(*c),
        }),
        (_, FilterRhs::Column(other)) => {
            let rhs_col = ds.column_index(other)?;
            match &ds.schema()[rhs_col].kind {
                ColumnKind::Categorical { .. } => {
                    // numeric-vs-categorical comparisons are always a
                    // config mistake, catch them early
                    if matches!(
                        ds.schema()[lhs_col].kind,
                        ColumnKind::Categorical { .. } | ColumnKind::Identifier
                    ) {
                        unreachable!("handled above");
                    }
                    Err(Error::config(format!(
                        "filter compares numeric column '{}' with categorical column '{other}'",
                        cond.column
                    )))
                }
                ColumnKind::Identifier => Err(Error::config(format!(
                    "identifier column '{other}' cannot appear in a filter"
                ))),
                _ => Ok(ResolvedCondition {
                    lhs_col,
                    lhs_is_label: false,
                    op: cond.op,
                    rhs: ResolvedRhs::FloatCol(rhs_col),
                }),
            }
        }
        (_, FilterRhs::Level(level)) => Err(Error::config(format!(
            "filter compares numeric column '{}' with level '{level}'",
            cond.column
        ))),
    }
}

impl ResolvedCondition {
    /// `Some(true/false)` when evaluable, `None` when a referenced value
    /// is missing.
    fn eval(&self, ds: &Dataset, row: usize) -> Option<bool> {
        if self.lhs_is_label {
            let Column::Label(v) = &ds.columns[self.lhs_col] else {
                unreachable!()
            };
            let lhs = v[row]?;
            let ResolvedRhs::Level(level) = self.rhs else {
                unreachable!()
            };
            return Some(match self.op {
                Comparison::Eq => lhs == level,
                Comparison::Ne => lhs != level,
                _ => unreachable!("validated at resolve time"),
            });
        }
        let Column::Float(v) = &ds.columns[self.lhs_col] else {
            unreachable!()
        };
        let lhs = v[row]?;
        let rhs = match &self.rhs {
            ResolvedRhs::Const(c) => *c,
            ResolvedRhs::FloatCol(ci) => {
                let Column::Float(rv) = &ds.columns[*ci] else {
                    unreachable!()
                };
                rv[row]?
            }
            ResolvedRhs::Level(_) => unreachable!(),
        };
        Some(self.op.eval_f64(lhs, rhs))
    }
}

/// Apply plausibility rules. A row is removed when at least one rule has
/// all of its conditions true; retained rows are carried over untouched,
/// in their original order.
pub fn apply_filters(ds: &Dataset, rules: &[FilterRule]) -> Result<(Dataset, RejectionReport)> {
    let resolved: Vec<Vec<ResolvedCondition>> = rules
        .iter()
        .map(|rule| {
            if rule.all_of.is_empty() {
                return Err(Error::config(format!(
                    "filter rule '{}' has no conditions",
                    rule.id
                )));
            }
            rule.all_of.iter().map(|c| resolve_condition(ds, c)).collect()
        })
        .collect::<Result<_>>()?;

    let mut keep = vec![true; ds.n_rows()];
    let mut counts = vec![0usize; rules.len()];
    for row in 0..ds.n_rows() {
        for (ri, conds) in resolved.iter().enumerate() {
            let fires = conds
                .iter()
                .all(|c| c.eval(ds, row).unwrap_or(false));
            if fires {
                counts[ri] += 1;
                keep[row] = false;
            }
        }
    }
    let kept = ds.retain_rows(&keep);
    let report = RejectionReport {
        rules: rules
            .iter()
            .zip(&counts)
            .map(|(r, &n)| RuleRejection {
                id: r.id.clone(),
                description: r.description.clone(),
                rows_rejected: n,
            })
            .collect(),
        rows_removed: ds.n_rows() - kept.n_rows(),
        rows_kept: kept.n_rows(),
    };
    Ok((kept, report))
}

/// Type-7 sample quantile (the default of most statistical software):
/// with sorted values x_0..x_{n-1} and h = (n-1)p, interpolate linearly
/// between x_⌊h⌋ and x_⌊h⌋+1.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    assert!((0.0..=1.0).contains(&p));
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo >= n - 1 {
        return sorted[n - 1];
    }
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Remove rows whose value in any listed column falls outside the
/// column's Tukey fences [Q1 - k·IQR, Q3 + k·IQR]. All fences come from
/// the input dataset — a single pass, not iterated until stable — so a
/// value that becomes extreme only after other outliers leave survives.
/// Missing cells never reject a row.
pub fn remove_outliers_iqr(
    ds: &Dataset,
    columns: &[String],
    multiplier: f64,
) -> Result<(Dataset, RejectionReport)> {
    if !(multiplier > 0.0) {
        return Err(Error::config(format!(
            "IQR multiplier must be positive, got {multiplier}"
        )));
    }
    struct Fence {
        col: usize,
        name: String,
        lo: f64,
        hi: f64,
    }
    let mut fences = Vec::with_capacity(columns.len());
    for name in columns {
        let col = ds.column_index(name)?;
        if !matches!(
            ds.schema()[col].kind,
            ColumnKind::Continuous | ColumnKind::Coordinate
        ) {
            return Err(Error::config(format!(
                "outlier screening needs a numeric column, '{name}' is not one"
            )));
        }
        let Column::Float(vals) = &ds.columns[col] else {
            unreachable!()
        };
        let mut observed: Vec<f64> = vals.iter().flatten().copied().collect();
        if observed.is_empty() {
            return Err(Error::domain(format!(
                "outlier screening on '{name}': no observed values"
            )));
        }
        observed.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q1 = quantile_type7(&observed, 0.25);
        let q3 = quantile_type7(&observed, 0.75);
        let iqr = q3 - q1;
        fences.push(Fence {
            col,
            name: name.clone(),
            lo: q1 - multiplier * iqr,
            hi: q3 + multiplier * iqr,
        });
    }

    let mut keep = vec![true; ds.n_rows()];
    let mut counts = vec![0usize; fences.len()];
    for row in 0..ds.n_rows() {
        for (fi, f) in fences.iter().enumerate() {
            let Column::Float(vals) = &ds.columns[f.col] else {
                unreachable!()
            };
            if let Some(v) = vals[row] {
                if v < f.lo || v > f.hi {
                    counts[fi] += 1;
                    keep[row] = false;
                }
            }
        }
    }
    let kept = ds.retain_rows(&keep);
    let report = RejectionReport {
        rules: fences
            .iter()
            .zip(&counts)
            .map(|(f, &n)| RuleRejection {
                id: format!("iqr:{}", f.name),
                description: format!("outside [{}, {}]", f.lo, f.hi),
                rows_rejected: n,
            })
            .collect(),
        rows_removed: ds.n_rows() - kept.n_rows(),
        rows_kept: kept.n_rows(),
    };
    Ok((kept, report))
}

/// Subtract the weighted mean (dataset weights) from each listed
/// continuous column. Missing cells stay missing and take no part in the
/// mean. Returns the new dataset and the centers that were removed.
pub fn center_continuous(
    ds: &Dataset,
    columns: &[String],
) -> Result<(Dataset, BTreeMap<String, f64>)> {
    let w = ds.weights();
    let mut out = ds.clone();
    let mut centers = BTreeMap::new();
    for name in columns {
        let col = ds.column_index(name)?;
        if !matches!(ds.schema()[col].kind, ColumnKind::Continuous) {
            return Err(Error::config(format!(
                "centering needs a continuous column, '{name}' is not one"
            )));
        }
        let Column::Float(vals) = &ds.columns[col] else {
            unreachable!()
        };
        let mut num = 0.0;
        let mut den = 0.0;
        for (v, wi) in vals.iter().zip(&w) {
            if let Some(x) = v {
                num += wi * x;
                den += wi;
            }
        }
        if !(den > 0.0) {
            return Err(Error::domain(format!(
                "cannot center '{name}': no observed values with positive weight"
            )));
        }
        let center = num / den;
        let Column::Float(out_vals) = &mut out.columns_mut()[col] else {
            unreachable!()
        };
        for v in out_vals.iter_mut() {
            if let Some(x) = v {
                *x -= center;
            }
        }
        centers.insert(name.clone(), center);
    }
    Ok((out, centers))
}

/// Dummy coding of a complete categorical column: one 0/1 column per
/// non-reference level, in declared level order. Returns the matrix and
/// the level name behind each column.
pub fn dummy_code(ds: &Dataset, column: &str) -> Result<(Array2<f64>, Vec<String>)> {
    let (levels, reference) = ds.levels(column)?;
    let ref_ix = levels.iter().position(|l| l == reference).unwrap();
    let coded: Vec<(usize, String)> = levels
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != ref_ix)
        .map(|(i, l)| (i, l.clone()))
        .collect();
    let labels = ds.label_values(column)?;
    let mut x = Array2::zeros((labels.len(), coded.len()));
    for (row, lv) in labels.iter().enumerate() {
        let Some(ix) = lv else {
            return Err(Error::domain(format!(
                "column '{column}' has a missing value at data row {}; run imputation first",
                row + 1
            )));
        };
        if let Some(j) = coded.iter().position(|(i, _)| *i == *ix as usize) {
            x[[row, j]] = 1.0;
        }
    }
    Ok((x, coded.into_iter().map(|(_, l)| l).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ColumnSchema;
    use approx::assert_abs_diff_eq;

    fn continuous_ds(name: &str, values: &[f64]) -> Dataset {
        let schema = vec![ColumnSchema {
            name: name.into(),
            kind: ColumnKind::Continuous,
        }];
        let col = Column::Float(values.iter().map(|v| Some(*v)).collect());
        Dataset::from_columns(schema, vec![col]).unwrap()
    }

    #[test]
    fn iqr_fences_match_hand_computation() {
        // 1..=10 plus 100: Q1 = 3.5, Q3 = 8.5, IQR = 5,
        // fences [-4, 16] -> only 100 is removed
        let vals: Vec<f64> = (1..=10).map(|v| v as f64).chain([100.0]).collect();
        let ds = continuous_ds("x", &vals);
        let (kept, report) = remove_outliers_iqr(&ds, &["x".into()], 1.5).unwrap();
        assert_eq!(kept.n_rows(), 10);
        assert_eq!(report.rows_removed, 1);
        assert_eq!(report.rules[0].rows_rejected, 1);
        assert!(report.rules[0].description.contains("[-4, 16]"));
        let survivors = kept.float_column("x").unwrap();
        assert_eq!(survivors, (1..=10).map(|v| v as f64).collect::<Vec<_>>());
    }

    #[test]
    fn outlier_pass_is_single_not_iterated() {
        // With 1000 present: Q1 = 3.75, Q3 = 9.25 (n = 12), fences
        // [-4.5, 17.5] -> only 1000 leaves and 17 survives. A re-run on
        // the survivors would drop 17, so surviving here proves the
        // fences came from the input and were applied once.
        let vals: Vec<f64> = (1..=10).map(|v| v as f64).chain([17.0, 1000.0]).collect();
        let ds = continuous_ds("x", &vals);
        let (kept, _) = remove_outliers_iqr(&ds, &["x".into()], 1.5).unwrap();
        assert_eq!(kept.n_rows(), 11);
        assert!(kept.float_column("x").unwrap().contains(&17.0));
        let (kept2, _) = remove_outliers_iqr(&kept, &["x".into()], 1.5).unwrap();
        assert!(!kept2.float_column("x").unwrap().contains(&17.0));
    }

    #[test]
    fn quantile_type7_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        // h = 3 * 0.25 = 0.75 -> 1 + 0.75
        assert_abs_diff_eq!(quantile_type7(&v, 0.25), 1.75);
        assert_abs_diff_eq!(quantile_type7(&v, 0.0), 1.0);
        assert_abs_diff_eq!(quantile_type7(&v, 1.0), 4.0);
        assert_abs_diff_eq!(quantile_type7(&v, 0.5), 2.5);
    }

    fn two_col_ds(a: &[Option<f64>], b: &[Option<f64>]) -> Dataset {
        let schema = vec![
            ColumnSchema {
                name: "age_first_sex".into(),
                kind: ColumnKind::Continuous,
            },
            ColumnSchema {
                name: "age".into(),
                kind: ColumnKind::Continuous,
            },
        ];
        Dataset::from_columns(
            schema,
            vec![Column::Float(a.to_vec()), Column::Float(b.to_vec())],
        )
        .unwrap()
    }

    #[test]
    fn filter_rejects_exactly_matching_rows() {
        // "first intercourse after current age" is impossible
        let ds = two_col_ds(
            &[Some(18.0), Some(25.0), Some(16.0)],
            &[Some(30.0), Some(20.0), Some(16.0)],
        );
        let rule = FilterRule {
            id: "r1".into(),
            description: "age_first_sex exceeds age".into(),
            all_of: vec![FilterCondition {
                column: "age_first_sex".into(),
                op: Comparison::Gt,
                rhs: FilterRhs::Column("age".into()),
            }],
        };
        let (kept, report) = apply_filters(&ds, &[rule]).unwrap();
        assert_eq!(kept.n_rows(), 2);
        assert_eq!(report.rules[0].rows_rejected, 1);
        assert_eq!(
            kept.float_column("age").unwrap(),
            vec![30.0, 16.0] // row with age 20 rejected
        );
    }

    #[test]
    fn missing_value_means_rule_cannot_fire() {
        let ds = two_col_ds(&[None, Some(25.0)], &[Some(30.0), None]);
        let rule = FilterRule {
            id: "r1".into(),
            description: String::new(),
            all_of: vec![FilterCondition {
                column: "age_first_sex".into(),
                op: Comparison::Gt,
                rhs: FilterRhs::Column("age".into()),
            }],
        };
        let (kept, report) = apply_filters(&ds, &[rule]).unwrap();
        assert_eq!(kept.n_rows(), 2);
        assert_eq!(report.rows_removed, 0);
        assert_eq!(report.rules[0].rows_rejected, 0);
    }

    #[test]
    fn overlapping_rules_count_separately_but_remove_once() {
        let ds = two_col_ds(&[Some(50.0)], &[Some(30.0)]);
        let mk = |id: &str, threshold: f64| FilterRule {
            id: id.into(),
            description: String::new(),
            all_of: vec![FilterCondition {
                column: "age_first_sex".into(),
                op: Comparison::Gt,
                rhs: FilterRhs::Const(threshold),
            }],
        };
        let (kept, report) = apply_filters(&ds, &[mk("a", 40.0), mk("b", 45.0)]).unwrap();
        assert_eq!(kept.n_rows(), 0);
        assert_eq!(report.rows_removed, 1);
        assert_eq!(report.rules[0].rows_rejected, 1);
        assert_eq!(report.rules[1].rows_rejected, 1);
    }

    #[test]
    fn conjunction_requires_all_conditions() {
        let ds = two_col_ds(&[Some(50.0), Some(50.0)], &[Some(60.0), Some(30.0)]);
        let rule = FilterRule {
            id: "r".into(),
            description: String::new(),
            all_of: vec![
                FilterCondition {
                    column: "age_first_sex".into(),
                    op: Comparison::Gt,
                    rhs: FilterRhs::Const(40.0),
                },
                FilterCondition {
                    column: "age".into(),
                    op: Comparison::Lt,
                    rhs: FilterRhs::Const(40.0),
                },
            ],
        };
        let (kept, _) = apply_filters(&ds, &[rule]).unwrap();
        // first row satisfies only the first condition
        assert_eq!(kept.float_column("age").unwrap(), vec![60.0]);
    }

    #[test]
    fn categorical_filter_matches_levels() {
        let schema = vec![ColumnSchema {
            name: "v".into(),
            kind: ColumnKind::Categorical {
                levels: vec!["no".into(), "yes".into()],
                reference: "no".into(),
            },
        }];
        let col = Column::Label(vec![Some(0), Some(1), None]);
        let ds = Dataset::from_columns(schema, vec![col]).unwrap();
        let rule = FilterRule {
            id: "r".into(),
            description: String::new(),
            all_of: vec![FilterCondition {
                column: "v".into(),
                op: Comparison::Eq,
                rhs: FilterRhs::Level("yes".into()),
            }],
        };
        let (kept, report) = apply_filters(&ds, &[rule]).unwrap();
        assert_eq!(report.rows_removed, 1);
        assert_eq!(kept.n_rows(), 2); // "no" and the missing row survive
    }

    #[test]
    fn filter_config_errors_are_caught() {
        let ds = two_col_ds(&[Some(1.0)], &[Some(2.0)]);
        let bad_level = FilterRule {
            id: "r".into(),
            description: String::new(),
            all_of: vec![FilterCondition {
                column: "age".into(),
                op: Comparison::Eq,
                rhs: FilterRhs::Level("yes".into()),
            }],
        };
        assert!(apply_filters(&ds, &[bad_level]).is_err());
        let empty = FilterRule {
            id: "r".into(),
            description: String::new(),
            all_of: vec![],
        };
        assert!(apply_filters(&ds, &[empty]).is_err());
    }

    #[test]
    fn weighted_centering_uses_weights_and_is_idempotent() {
        let schema = vec![
            ColumnSchema {
                name: "x".into(),
                kind: ColumnKind::Continuous,
            },
            ColumnSchema {
                name: "w".into(),
                kind: ColumnKind::Weight,
            },
        ];
        let ds = Dataset::from_columns(
            schema,
            vec![
                Column::Float(vec![Some(0.0), Some(0.0), Some(4.0)]),
                Column::Float(vec![Some(1.0), Some(1.0), Some(2.0)]),
            ],
        )
        .unwrap();
        // weighted mean = (0 + 0 + 2*4) / 4 = 2
        let (centered, centers) = center_continuous(&ds, &["x".into()]).unwrap();
        assert_abs_diff_eq!(centers["x"], 2.0);
        assert_eq!(
            centered.float_column("x").unwrap(),
            vec![-2.0, -2.0, 2.0]
        );
        let (again, centers2) = center_continuous(&centered, &["x".into()]).unwrap();
        assert_abs_diff_eq!(centers2["x"], 0.0, epsilon = 1e-12);
        assert_eq!(again.float_column("x").unwrap(), vec![-2.0, -2.0, 2.0]);
    }

    #[test]
    fn dummy_coding_drops_reference_and_keeps_declared_order() {
        let schema = vec![ColumnSchema {
            name: "educ".into(),
            kind: ColumnKind::Categorical {
                levels: vec!["low".into(), "medium".into(), "high".into()],
                reference: "medium".into(),
            },
        }];
        let col = Column::Label(vec![Some(0), Some(1), Some(2), Some(1)]);
        let ds = Dataset::from_columns(schema, vec![col]).unwrap();
        let (x, names) = dummy_code(&ds, "educ").unwrap();
        assert_eq!(names, vec!["low".to_string(), "high".to_string()]);
        assert_eq!(x.shape(), &[4, 2]);
        assert_eq!(x.row(0).to_vec(), vec![1.0, 0.0]);
        assert_eq!(x.row(1).to_vec(), vec![0.0, 0.0]); // reference row
        assert_eq!(x.row(2).to_vec(), vec![0.0, 1.0]);
        // every row sum is 0 or 1
        for r in 0..4 {
            let s: f64 = x.row(r).sum();
            assert!(s == 0.0 || s == 1.0);
        }
    }

    #[test]
    fn dummy_coding_requires_complete_column() {
        let schema = vec![ColumnSchema {
            name: "v".into(),
            kind: ColumnKind::Categorical {
                levels: vec!["a".into(), "b".into()],
                reference: "a".into(),
            },
        }];
        let col = Column::Label(vec![Some(0), None]);
        let ds = Dataset::from_columns(schema, vec![col]).unwrap();
        assert!(dummy_code(&ds, "v").is_err());
    }

    #[test]
    fn retained_rows_are_bit_identical() {
        // awkward floats that any accidental re-parse or arithmetic
        // would perturb
        let vals = [0.1 + 0.2, 1.0 / 3.0, f64::MIN_POSITIVE, 12345.678e-9];
        let ds = continuous_ds("x", &vals);
        let rule = FilterRule {
            id: "r".into(),
            description: String::new(),
            all_of: vec![FilterCondition {
                column: "x".into(),
                op: Comparison::Gt,
                rhs: FilterRhs::Const(1e6),
            }],
        };
        let (kept, _) = apply_filters(&ds, &[rule]).unwrap();
        let out = kept.float_column("x").unwrap();
        for (a, b) in out.iter().zip(&vals) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
