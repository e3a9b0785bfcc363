//! Random forest regression: bagged CART trees averaged.

use ndarray::Array2;
use rand::Rng;

use super::tree::{BinnedMatrix, FeatureSampler, RegressionTree, TreeParams};
use crate::seed;
use crate::Execution;

/// How many features each split considers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaxFeatures {
    All,
    Sqrt,
    Third,
    Fraction(f64),
}

impl MaxFeatures {
    pub fn resolve(self, p: usize) -> usize {
        let k = match self {
            MaxFeatures::All => p,
            MaxFeatures::Sqrt => (p as f64).sqrt().round() as usize,
            MaxFeatures::Third => p / 3,
            MaxFeatures::Fraction(f) => (f * p as f64).round() as usize,
        };
        k.clamp(1, p.max(1))
    }
}

impl std::str::FromStr for MaxFeatures {
    type Err = crate::Error;

    /// `all`, `sqrt`, `third`, or a fraction in (0, 1].
    fn from_str(s: &str) -> crate::Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" => Ok(MaxFeatures::All),
            "sqrt" => Ok(MaxFeatures::Sqrt),
            "third" => Ok(MaxFeatures::Third),
            other => match other.parse::<f64>() {
                Ok(f) if f > 0.0 && f <= 1.0 => Ok(MaxFeatures::Fraction(f)),
                _ => Err(crate::Error::InvalidConfig(format!("max features `{s}`"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            bootstrap: true,
            max_features: MaxFeatures::All,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<RegressionTree>,
}

impl RandomForest {
    /// Tree `i` draws its bootstrap sample and feature subsets from a stream
    /// seeded by `(seed, i)`, so the forest is the same under any execution.
    pub fn fit(x: &Array2<f64>, y: &[f64], params: &ForestParams, exec: Execution) -> Self {
        let data = BinnedMatrix::new(x);
        let n = data.n_rows();
        let p = data.n_features();
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_samples_leaf: params.min_samples_leaf,
        };
        let per_split = params.max_features.resolve(p);
        let trees = exec.map(params.n_trees.max(1), |i| {
            let mut rng = seed::rng(seed::derive(params.seed, &[i as u64]));
            let rows: Vec<u32> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n as u32)).collect()
            } else {
                (0..n as u32).collect()
            };
            let sampler = (per_split < p).then_some(FeatureSampler {
                rng: &mut rng,
                per_split,
            });
            RegressionTree::fit_binned(&data, y, rows, tree_params, sampler)
        });
        RandomForest { trees }
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
    }

    /// Mean over trees of each feature's sample-weighted squared-error
    /// reduction, normalised to sum to 1 (all zeros if no tree split).
    pub fn feature_importances(&self) -> Vec<f64> {
        let p = self.trees.first().map_or(0, |t| t.weighted_gains().len());
        let mut total = vec![0.0; p];
        for t in &self.trees {
            for (acc, g) in total.iter_mut().zip(t.weighted_gains()) {
                *acc += g;
            }
        }
        let sum: f64 = total.iter().sum();
        if sum > 0.0 {
            total.iter_mut().for_each(|v| *v /= sum);
        }
        total
    }
}
