//! CART regression trees.
//!
//! Splits minimise the summed squared error of the two children. Candidate
//! thresholds are midpoints between consecutive distinct feature values
//! present in the node; ties in gain go to the lower feature index and then
//! the lower threshold. Features are pre-binned by their sorted distinct
//! values, so each node is scanned with a histogram (or a sort, for nodes
//! much smaller than the number of bins) without changing the exact result.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or cannot be split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Leaf {
        value: f64,
        n_samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        n_samples: usize,
        /// Reduction in summed squared error achieved by this split.
        gain: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    n_features: usize,
}

/// Feature matrix stored column-wise as bin indices into sorted distinct values.
#[derive(Debug, Clone)]
pub(crate) struct BinnedMatrix {
    bins: Vec<Vec<u32>>,
    values: Vec<Vec<f64>>,
    n_rows: usize,
}

impl BinnedMatrix {
    pub fn new(x: &Array2<f64>) -> Self {
        let (n, p) = x.dim();
        let mut bins = Vec::with_capacity(p);
        let mut values = Vec::with_capacity(p);
        for j in 0..p {
            let col = x.column(j);
            let mut uniq: Vec<f64> = col.iter().copied().collect();
            uniq.sort_by(f64::total_cmp);
            uniq.dedup();
            let b = col
                .iter()
                .map(|v| uniq.partition_point(|u| u.total_cmp(v).is_lt()) as u32)
                .collect();
            bins.push(b);
            values.push(uniq);
        }
        BinnedMatrix { bins, values, n_rows: n }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.bins.len()
    }
}

/// Per-node feature sampling for random forests.
pub(crate) struct FeatureSampler<'a> {
    pub rng: &'a mut ChaCha8Rng,
    pub per_split: usize,
}

struct Scratch {
    count: Vec<usize>,
    sum: Vec<f64>,
    pairs: Vec<(u32, f64)>,
    features: Vec<usize>,
}

struct Best {
    feature: usize,
    split_bin: u32,
    threshold: f64,
    gain: f64,
}

impl RegressionTree {
    /// Fit on all rows of `x`.
    pub fn fit(x: &Array2<f64>, y: &[f64], params: TreeParams) -> Self {
        let data = BinnedMatrix::new(x);
        let rows: Vec<u32> = (0..data.n_rows() as u32).collect();
        Self::fit_binned(&data, y, rows, params, None)
    }

    /// `rows` may repeat indices (bootstrap samples).
    pub(crate) fn fit_binned(
        data: &BinnedMatrix,
        y: &[f64],
        mut rows: Vec<u32>,
        params: TreeParams,
        mut sampler: Option<FeatureSampler<'_>>,
    ) -> Self {
        let p = data.n_features();
        let max_bins = data.values.iter().map(Vec::len).max().unwrap_or(0);
        let mut scratch = Scratch {
            count: vec![0; max_bins],
            sum: vec![0.0; max_bins],
            pairs: Vec::new(),
            features: (0..p).collect(),
        };
        let min_leaf = params.min_samples_leaf.max(1);
        let mut nodes = vec![Node::Leaf { value: 0.0, n_samples: 0 }];
        // (node slot, start, end, depth)
        let mut stack = vec![(0usize, 0usize, rows.len(), 0usize)];
        while let Some((slot, start, end, depth)) = stack.pop() {
            let idx = &mut rows[start..end];
            let n = idx.len();
            let first = y[idx[0] as usize];
            let (mut sum, mut constant) = (0.0, true);
            for &r in idx.iter() {
                let v = y[r as usize];
                sum += v;
                constant &= v == first;
            }
            let mean = if constant { first } else { sum / n as f64 };
            nodes[slot] = Node::Leaf { value: mean, n_samples: n };
            let depth_ok = params.max_depth.is_none_or(|d| depth < d);
            if constant || !depth_ok || n < 2 * min_leaf {
                continue;
            }
            let sse: f64 = idx.iter().map(|&r| (y[r as usize] - mean).powi(2)).sum();

            if let Some(s) = sampler.as_mut() {
                let k = s.per_split.clamp(1, p);
                for i in 0..k {
                    let j = s.rng.random_range(i..p);
                    scratch.features.swap(i, j);
                }
                scratch.features[..k].sort_unstable();
            }
            let n_candidates = sampler.as_ref().map_or(p, |s| s.per_split.clamp(1, p));
            let mut best: Option<Best> = None;
            for fi in 0..n_candidates {
                let f = scratch.features[fi];
                if let Some(cand) = best_split_for_feature(data, y, idx, f, sum, min_leaf, &mut scratch) {
                    if best.as_ref().is_none_or(|b| cand.gain > b.gain || (cand.gain == b.gain && cand.feature < b.feature)) {
                        best = Some(cand);
                    }
                }
            }
            if sampler.is_some() {
                scratch.features.sort_unstable();
            }
            let Some(best) = best else { continue };
            if !(best.gain > 1e-12 * sse) {
                continue;
            }

            let col = &data.bins[best.feature];
            let mut lo = 0;
            for i in 0..n {
                if col[idx[i] as usize] <= best.split_bin {
                    idx.swap(lo, i);
                    lo += 1;
                }
            }
            let left = nodes.len();
            nodes.push(Node::Leaf { value: 0.0, n_samples: 0 });
            nodes.push(Node::Leaf { value: 0.0, n_samples: 0 });
            nodes[slot] = Node::Split {
                feature: best.feature,
                threshold: best.threshold,
                left,
                right: left + 1,
                n_samples: n,
                gain: best.gain,
            };
            stack.push((left + 1, start + lo, end, depth + 1));
            stack.push((left, start, start + lo, depth + 1));
        }
        RegressionTree { nodes, n_features: p }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value, .. } => return value,
                Node::Split { feature, threshold, left, right, .. } => {
                    i = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, x: &Array2<f64>) -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|r| match r.as_slice() {
                Some(s) => self.predict_row(s),
                None => self.predict_row(&r.to_vec()),
            })
            .collect()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Summed squared-error reduction per feature, divided by the root sample count.
    pub fn weighted_gains(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_features];
        let root_n = match self.nodes[0] {
            Node::Leaf { n_samples, .. } | Node::Split { n_samples, .. } => n_samples.max(1),
        } as f64;
        for node in &self.nodes {
            if let Node::Split { feature, gain, .. } = *node {
                out[feature] += gain / root_n;
            }
        }
        out
    }
}

fn best_split_for_feature(
    data: &BinnedMatrix,
    y: &[f64],
    idx: &[u32],
    feature: usize,
    total: f64,
    min_leaf: usize,
    scratch: &mut Scratch,
) -> Option<Best> {
    let values = &data.values[feature];
    let nb = values.len();
    if nb < 2 {
        return None;
    }
    let col = &data.bins[feature];
    let n = idx.len();
    let nf = n as f64;
    let parent = total * total / nf;
    let mut best: Option<Best> = None;
    let mut consider = |prev: u32, next: u32, n_left: usize, s_left: f64| {
        let n_right = n - n_left;
        if n_left < min_leaf || n_right < min_leaf {
            return;
        }
        let s_right = total - s_left;
        let gain = s_left * s_left / n_left as f64 + s_right * s_right / n_right as f64 - parent;
        if best.as_ref().is_none_or(|b| gain > b.gain) {
            let (lo, hi) = (values[prev as usize], values[next as usize]);
            let mut threshold = lo + (hi - lo) / 2.0;
            if threshold >= hi {
                threshold = lo;
            }
            best = Some(Best { feature, split_bin: prev, threshold, gain });
        }
    };

    if n * 8 < nb {
        scratch.pairs.clear();
        scratch.pairs.extend(idx.iter().map(|&r| (col[r as usize], y[r as usize])));
        scratch.pairs.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let (mut n_left, mut s_left) = (0usize, 0.0);
        let mut i = 0;
        while i < n {
            let b = scratch.pairs[i].0;
            if i > 0 {
                consider(scratch.pairs[i - 1].0, b, n_left, s_left);
            }
            while i < n && scratch.pairs[i].0 == b {
                n_left += 1;
                s_left += scratch.pairs[i].1;
                i += 1;
            }
        }
    } else {
        for &r in idx {
            let b = col[r as usize] as usize;
            scratch.count[b] += 1;
            scratch.sum[b] += y[r as usize];
        }
        let (mut n_left, mut s_left) = (0usize, 0.0);
        let mut prev: Option<u32> = None;
        for b in 0..nb {
            let c = scratch.count[b];
            if c == 0 {
                continue;
            }
            if let Some(pb) = prev {
                consider(pb, b as u32, n_left, s_left);
            }
            n_left += c;
            s_left += scratch.sum[b];
            scratch.count[b] = 0;
            scratch.sum[b] = 0.0;
            prev = Some(b as u32);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn constant_target_is_one_leaf() {
        let x = array![[1.0, 5.0], [2.0, 3.0], [3.0, 1.0]];
        let t = RegressionTree::fit(&x, &[4.0, 4.0, 4.0], TreeParams::default());
        assert_eq!(t.nodes().len(), 1);
        assert_eq!(t.predict_row(&[9.0, 9.0]), 4.0);
    }

    #[test]
    fn separable_pair() {
        let x = array![[0.0], [1.0]];
        let t = RegressionTree::fit(&x, &[0.0, 10.0], TreeParams::default());
        assert_eq!(t.n_leaves(), 2);
        match *t.root() {
            Node::Split { feature, threshold, .. } => assert_eq!((feature, threshold), (0, 0.5)),
            _ => panic!("expected a split"),
        }
        assert_eq!(t.predict(&x), vec![0.0, 10.0]);
    }

    #[test]
    fn depth_and_leaf_limits() {
        let x = Array2::from_shape_fn((32, 1), |(i, _)| i as f64);
        let y: Vec<f64> = (0..32).map(|i| (i * i % 7) as f64).collect();
        let t = RegressionTree::fit(&x, &y, TreeParams { max_depth: Some(2), min_samples_leaf: 1 });
        assert!(t.depth() <= 2);
        let t = RegressionTree::fit(&x, &y, TreeParams { max_depth: None, min_samples_leaf: 5 });
        for n in t.nodes() {
            if let Node::Leaf { n_samples, .. } = n {
                assert!(*n_samples >= 5);
            }
        }
    }

    #[test]
    fn sort_and_histogram_paths_agree() {
        // 200 distinct values: small nodes use the sort path, the root the histogram.
        let x = Array2::from_shape_fn((200, 2), |(i, j)| ((i * 37 + j * 11) % 200) as f64);
        let y: Vec<f64> = (0..200).map(|i| ((i * 13) % 17) as f64).collect();
        let t = RegressionTree::fit(&x, &y, TreeParams::default());
        let pred = t.predict(&x);
        assert_eq!(pred, y);
    }
}
