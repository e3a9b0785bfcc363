//! The predictors of the evaluation grid: linear regression, random forest,
//! gradient boosting and the always-zero baseline.

mod boosting;
mod forest;
mod linear;
mod tree;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;

pub use boosting::{BoostingParams, GradientBoosting};
pub use forest::{ForestParams, MaxFeatures, RandomForest};
pub use linear::LinearRegression;
pub use tree::{Node, RegressionTree, TreeParams};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::seed::mix64;
use crate::Execution;

/// Ordered as the columns of the result tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelKind {
    Linear,
    GradientBoosting,
    RandomForest,
    Zero,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Linear,
        ModelKind::GradientBoosting,
        ModelKind::RandomForest,
        ModelKind::Zero,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Linear => "LR",
            ModelKind::GradientBoosting => "GB",
            ModelKind::RandomForest => "RF",
            ModelKind::Zero => "0",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "LR" => Ok(ModelKind::Linear),
            "GB" => Ok(ModelKind::GradientBoosting),
            "RF" => Ok(ModelKind::RandomForest),
            "0" | "ZERO" => Ok(ModelKind::Zero),
            other => Err(Error::InvalidConfig(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelSpec {
    Linear,
    RandomForest(ForestParams),
    GradientBoosting(BoostingParams),
    Zero,
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Linear => ModelKind::Linear,
            ModelSpec::RandomForest(_) => ModelKind::RandomForest,
            ModelSpec::GradientBoosting(_) => ModelKind::GradientBoosting,
            ModelSpec::Zero => ModelKind::Zero,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            ModelSpec::RandomForest(p) => ModelSpec::RandomForest(ForestParams { seed, ..p }),
            ModelSpec::GradientBoosting(p) => ModelSpec::GradientBoosting(BoostingParams { seed, ..p }),
            other => other,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::RandomForest(p) => {
                if p.n_trees == 0 || p.min_samples_leaf == 0 {
                    return Err(Error::InvalidConfig("forest needs n_trees >= 1 and min_samples_leaf >= 1".into()));
                }
                if let MaxFeatures::Fraction(f) = p.max_features {
                    if !(f > 0.0 && f <= 1.0) {
                        return Err(Error::InvalidConfig(format!("max_features fraction {f}")));
                    }
                }
            }
            ModelSpec::GradientBoosting(p) => {
                if p.n_stages == 0 || p.min_samples_leaf == 0 {
                    return Err(Error::InvalidConfig("boosting needs n_stages >= 1 and min_samples_leaf >= 1".into()));
                }
                if !(p.learning_rate > 0.0 && p.learning_rate < 2.0) {
                    return Err(Error::InvalidConfig(format!(
                        "learning rate {} not in (0, 2)",
                        p.learning_rate
                    )));
                }
            }
            ModelSpec::Linear | ModelSpec::Zero => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Learned {
    Linear(LinearRegression),
    Forest(RandomForest),
    Boosting(GradientBoosting),
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub kind: ModelKind,
    pub columns: Vec<String>,
    pub learned: Learned,
}

fn require_rows(x: &FeatureMatrix) -> Result<()> {
    if x.n_rows() == 0 {
        Err(Error::EmptyMatrix)
    } else {
        Ok(())
    }
}

pub fn fit_linear(x: &FeatureMatrix) -> Result<FittedModel> {
    require_rows(x)?;
    Ok(FittedModel {
        kind: ModelKind::Linear,
        columns: x.columns.clone(),
        learned: Learned::Linear(LinearRegression::fit(&x.values, &x.target)?),
    })
}

/// A single CART tree on raw arrays.
pub fn fit_tree(x: &Array2<f64>, y: &[f64], params: TreeParams) -> RegressionTree {
    RegressionTree::fit(x, y, params)
}

pub fn fit_random_forest(x: &FeatureMatrix, params: &ForestParams, exec: Execution) -> Result<FittedModel> {
    require_rows(x)?;
    ModelSpec::RandomForest(*params).validate()?;
    Ok(FittedModel {
        kind: ModelKind::RandomForest,
        columns: x.columns.clone(),
        learned: Learned::Forest(RandomForest::fit(&x.values, &x.target, params, exec)),
    })
}

pub fn fit_gradient_boosting(x: &FeatureMatrix, params: &BoostingParams) -> Result<FittedModel> {
    require_rows(x)?;
    ModelSpec::GradientBoosting(*params).validate()?;
    Ok(FittedModel {
        kind: ModelKind::GradientBoosting,
        columns: x.columns.clone(),
        learned: Learned::Boosting(GradientBoosting::fit(&x.values, &x.target, params)),
    })
}

pub fn fit(spec: &ModelSpec, x: &FeatureMatrix, exec: Execution) -> Result<FittedModel> {
    match spec {
        ModelSpec::Linear => fit_linear(x),
        ModelSpec::RandomForest(p) => fit_random_forest(x, p, exec),
        ModelSpec::GradientBoosting(p) => fit_gradient_boosting(x, p),
        ModelSpec::Zero => Ok(FittedModel {
            kind: ModelKind::Zero,
            columns: x.columns.clone(),
            learned: Learned::Zero,
        }),
    }
}

pub fn predict(model: &FittedModel, x: &FeatureMatrix) -> Result<Vec<f64>> {
    if model.columns != x.columns {
        return Err(Error::ColumnMismatch {
            expected: model.columns.join(","),
            got: x.columns.join(","),
        });
    }
    let rows = x.values.rows().into_iter().map(|r| r.to_vec());
    let out: Vec<f64> = match &model.learned {
        Learned::Zero => vec![0.0; x.n_rows()],
        Learned::Linear(m) => rows.map(|r| m.predict_row(&r)).collect(),
        Learned::Forest(m) => rows.map(|r| m.predict_row(&r)).collect(),
        Learned::Boosting(m) => rows.map(|r| m.predict_row(&r)).collect(),
    };
    Ok(out)
}

/// Normalised impurity importances of a random forest, in column order.
pub fn feature_importances(model: &FittedModel) -> Result<Vec<(String, f64)>> {
    match &model.learned {
        Learned::Forest(f) => Ok(model.columns.iter().cloned().zip(f.feature_importances()).collect()),
        _ => Err(Error::NotAForest(model.kind.to_string())),
    }
}

/// The `k` largest importances, descending; ties keep column order.
pub fn top_importances(importances: &[(String, f64)], k: usize) -> Vec<(String, f64)> {
    let mut v = importances.to_vec();
    v.sort_by(|a, b| b.1.total_cmp(&a.1));
    v.truncate(k);
    v
}

impl FittedModel {
    /// Hash of every learned parameter (bitwise on floats).
    pub fn fingerprint(&self) -> u64 {
        let mut h = mix64(self.kind as u64);
        let mut eat = |v: u64| h = mix64(h ^ v);
        for c in &self.columns {
            eat(crate::seed::label(c));
        }
        let eat_tree = |t: &RegressionTree, eat: &mut dyn FnMut(u64)| {
            for n in t.nodes() {
                match *n {
                    Node::Leaf { value, n_samples } => {
                        eat(value.to_bits());
                        eat(n_samples as u64);
                    }
                    Node::Split { feature, threshold, left, right, n_samples, gain } => {
                        eat(feature as u64);
                        eat(threshold.to_bits());
                        eat(left as u64 ^ ((right as u64) << 32));
                        eat(n_samples as u64);
                        eat(gain.to_bits());
                    }
                }
            }
        };
        match &self.learned {
            Learned::Zero => {}
            Learned::Linear(m) => {
                eat(m.intercept.to_bits());
                m.coefficients.iter().for_each(|c| eat(c.to_bits()));
            }
            Learned::Forest(f) => f.trees().iter().for_each(|t| eat_tree(t, &mut eat)),
            Learned::Boosting(g) => {
                eat(g.init().to_bits());
                g.stages().iter().for_each(|t| eat_tree(t, &mut eat));
            }
        }
        h
    }
}
