//! Stagewise squared-loss gradient boosting with CART base learners.

use ndarray::Array2;

use super::tree::{BinnedMatrix, RegressionTree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostingParams {
    pub n_stages: usize,
    pub learning_rate: f64,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Reserved for stochastic variants; the full-sample booster draws nothing.
    pub seed: u64,
}

impl Default for BoostingParams {
    fn default() -> Self {
        BoostingParams {
            n_stages: 100,
            learning_rate: 0.1,
            max_depth: Some(3),
            min_samples_leaf: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientBoosting {
    init: f64,
    learning_rate: f64,
    stages: Vec<RegressionTree>,
    /// Training MSE after the initial constant and after each stage.
    train_loss: Vec<f64>,
}

impl GradientBoosting {
    pub fn fit(x: &Array2<f64>, y: &[f64], params: &BoostingParams) -> Self {
        let data = BinnedMatrix::new(x);
        let n = y.len();
        let init = y.iter().sum::<f64>() / n as f64;
        let mut f = vec![init; n];
        let mse = |f: &[f64]| y.iter().zip(f).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64;
        let mut train_loss = vec![mse(&f)];
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_samples_leaf: params.min_samples_leaf,
        };
        let rows: Vec<u32> = (0..n as u32).collect();
        let mut stages = Vec::with_capacity(params.n_stages);
        for _ in 0..params.n_stages {
            let residual: Vec<f64> = y.iter().zip(&f).map(|(a, b)| a - b).collect();
            let tree = RegressionTree::fit_binned(&data, &residual, rows.clone(), tree_params, None);
            for (i, row) in x.rows().into_iter().enumerate() {
                let step = match row.as_slice() {
                    Some(s) => tree.predict_row(s),
                    None => tree.predict_row(&row.to_vec()),
                };
                f[i] += params.learning_rate * step;
            }
            train_loss.push(mse(&f));
            stages.push(tree);
        }
        GradientBoosting {
            init,
            learning_rate: params.learning_rate,
            stages,
            train_loss,
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.stages
            .iter()
            .fold(self.init, |acc, t| acc + self.learning_rate * t.predict_row(row))
    }

    pub fn init(&self) -> f64 {
        self.init
    }

    pub fn stages(&self) -> &[RegressionTree] {
        &self.stages
    }

    pub fn train_loss(&self) -> &[f64] {
        &self.train_loss
    }
}
