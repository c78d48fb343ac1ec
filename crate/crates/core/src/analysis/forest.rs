//! CART random forest: Gini splits, √d features per split, bootstrap
//! resampling, probability-averaged votes.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AnalysisError, Dataset};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure.
    pub max_depth: Option<usize>,
    /// Features tried per split; `None` means `round(sqrt(d))`.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: None, max_features: None, min_samples_split: 2, bootstrap: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// `x[feature] <= threshold` goes to `left`.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    /// Class distribution of the training samples that reached the leaf.
    Leaf { probs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    /// `nodes[0]` is the root.
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn leaf_probs(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
                Node::Leaf { probs } => return probs,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForestModel {
    pub class_names: Vec<String>,
    pub n_features: usize,
    pub trees: Vec<DecisionTree>,
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    max_features: usize,
    max_depth: Option<usize>,
    min_samples_split: usize,
    nodes: Vec<Node>,
}

fn gini(counts: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / total).powi(2)).sum::<f64>()
}

impl Builder<'_> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let mut probs = vec![0.0; self.n_classes];
        for &i in idx {
            probs[self.y[i]] += 1.0;
        }
        let n = idx.len() as f64;
        probs.iter_mut().for_each(|p| *p /= n);
        self.nodes.push(Node::Leaf { probs });
        self.nodes.len() - 1
    }

    /// Best (feature, threshold, weighted child impurity) over up to
    /// `max_features` non-constant features in random order.
    fn best_split(&self, idx: &[usize], rng: &mut impl Rng) -> Option<(usize, f64)> {
        let d = self.x[0].len();
        let mut features: Vec<usize> = (0..d).collect();
        features.shuffle(rng);
        let mut tried = 0;
        let mut best: Option<(usize, f64, f64)> = None;
        let n = idx.len() as f64;
        let mut order = idx.to_vec();
        let mut total = vec![0.0; self.n_classes];
        for &i in idx {
            total[self.y[i]] += 1.0;
        }
        for f in features {
            if tried >= self.max_features {
                break;
            }
            order.sort_by(|a, b| self.x[*a][f].total_cmp(&self.x[*b][f]).then(a.cmp(b)));
            let lo = self.x[order[0]][f];
            let hi = self.x[order[order.len() - 1]][f];
            if lo == hi {
                continue;
            }
            tried += 1;
            let mut left = vec![0.0; self.n_classes];
            for k in 0..order.len() - 1 {
                left[self.y[order[k]]] += 1.0;
                let (a, b) = (self.x[order[k]][f], self.x[order[k + 1]][f]);
                if a == b {
                    continue;
                }
                let nl = (k + 1) as f64;
                let right: Vec<f64> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
                let score = (nl * gini(&left, nl) + (n - nl) * gini(&right, n - nl)) / n;
                if best.is_none_or(|(_, _, s)| score < s) {
                    best = Some((f, (a + b) / 2.0, score));
                }
            }
        }
        best.map(|(f, t, _)| (f, t))
    }

    fn grow(&mut self, idx: &[usize], depth: usize, rng: &mut impl Rng) -> usize {
        let first = self.y[idx[0]];
        let pure = idx.iter().all(|i| self.y[*i] == first);
        let depth_capped = self.max_depth.is_some_and(|m| depth >= m);
        if pure || depth_capped || idx.len() < self.min_samples_split {
            return self.leaf(idx);
        }
        let Some((feature, threshold)) = self.best_split(idx, rng) else {
            return self.leaf(idx);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|i| self.x[**i][feature] <= threshold);
        let me = self.nodes.len();
        self.nodes.push(Node::Split { feature, threshold, left: 0, right: 0 });
        let left = self.grow(&l, depth + 1, rng);
        let right = self.grow(&r, depth + 1, rng);
        self.nodes[me] = Node::Split { feature, threshold, left, right };
        me
    }
}

/// Trains a forest. Trees are built in parallel, each from its own seed, so
/// the result does not depend on thread scheduling.
pub fn train_forest(data: &Dataset, params: &ForestParams, seed: u64) -> Result<RandomForestModel, AnalysisError> {
    let n_classes = data.class_names.len();
    let present: std::collections::BTreeSet<usize> = data.labels.iter().copied().collect();
    if data.rows.is_empty() || present.len() < 2 {
        return Err(AnalysisError::DegenerateDataset(format!(
            "{} samples over {} classes",
            data.rows.len(),
            present.len()
        )));
    }
    if params.n_trees == 0 {
        return Err(AnalysisError::DegenerateDataset("zero trees".into()));
    }
    let d = data.rows[0].len();
    let x: Vec<Vec<f64>> = data.rows.iter().map(|r| r.iter().map(|v| *v as f64).collect()).collect();
    let max_features = params.max_features.unwrap_or_else(|| ((d as f64).sqrt().round() as usize).max(1)).min(d);

    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(seed::indexed_seed(seed, "tree", t as u64));
            let n = x.len();
            let idx: Vec<usize> =
                if params.bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
            let mut b = Builder {
                x: &x,
                y: &data.labels,
                n_classes,
                max_features,
                max_depth: params.max_depth,
                min_samples_split: params.min_samples_split.max(2),
                nodes: Vec::new(),
            };
            b.grow(&idx, 0, &mut rng);
            DecisionTree { nodes: b.nodes }
        })
        .collect();
    Ok(RandomForestModel { class_names: data.class_names.clone(), n_features: d, trees })
}

impl RandomForestModel {
    /// Mean of the trees' leaf distributions.
    pub fn predict_proba(&self, features: &[u32]) -> Vec<f64> {
        let x: Vec<f64> = features.iter().map(|v| *v as f64).collect();
        let mut acc = vec![0.0; self.class_names.len()];
        for t in &self.trees {
            for (a, p) in acc.iter_mut().zip(t.leaf_probs(&x)) {
                *a += p;
            }
        }
        let n = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    /// Most probable class; ties go to the lowest index.
    pub fn predict(&self, features: &[u32]) -> usize {
        let p = self.predict_proba(features);
        let mut best = 0;
        for (i, v) in p.iter().enumerate() {
            if *v > p[best] {
                best = i;
            }
        }
        best
    }

    /// Line-oriented text format, header `RFMODEL v1`.
    pub fn serialize(&self) -> String {
        let mut s = String::from("RFMODEL v1\n");
        writeln!(s, "classes {}", self.class_names.len()).unwrap();
        for c in &self.class_names {
            writeln!(s, "class {c}").unwrap();
        }
        writeln!(s, "features {}", self.n_features).unwrap();
        writeln!(s, "trees {}", self.trees.len()).unwrap();
        for t in &self.trees {
            writeln!(s, "tree {}", t.nodes.len()).unwrap();
            for n in &t.nodes {
                match n {
                    Node::Split { feature, threshold, left, right } => {
                        // {:?} on f64 round-trips exactly
                        writeln!(s, "split {feature} {threshold:?} {left} {right}").unwrap()
                    }
                    Node::Leaf { probs } => {
                        let ps: Vec<String> = probs.iter().map(|p| format!("{p:?}")).collect();
                        writeln!(s, "leaf {}", ps.join(" ")).unwrap()
                    }
                }
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, AnalysisError> {
        let bad = |line: usize, what: &str| AnalysisError::ModelFormat(format!("line {}: {what}", line + 1));
        let mut lines = text.lines().enumerate();
        let mut take = |expect: Option<&str>| -> Result<(usize, Vec<&str>), AnalysisError> {
            let (i, l) = lines.next().ok_or_else(|| AnalysisError::ModelFormat("unexpected end of model".into()))?;
            let parts: Vec<&str> = l.split(' ').collect();
            match expect {
                Some(e) if parts[0] != e => Err(bad(i, &format!("expected {e}"))),
                _ => Ok((i, parts)),
            }
        };
        fn num<T: std::str::FromStr>(i: usize, s: Option<&&str>) -> Result<T, AnalysisError> {
            s.and_then(|s| s.parse().ok())
                .ok_or_else(|| AnalysisError::ModelFormat(format!("line {}: bad number", i + 1)))
        }

        let (i, head) = take(Some("RFMODEL"))?;
        if head.get(1) != Some(&"v1") {
            return Err(bad(i, "unsupported version"));
        }
        let (i, p) = take(Some("classes"))?;
        let n_classes: usize = num(i, p.get(1))?;
        let mut class_names = Vec::with_capacity(n_classes);
        for _ in 0..n_classes {
            let (_, p) = take(Some("class"))?;
            class_names.push(p[1..].join(" "));
        }
        let (i, p) = take(Some("features"))?;
        let n_features: usize = num(i, p.get(1))?;
        let (i, p) = take(Some("trees"))?;
        let n_trees: usize = num(i, p.get(1))?;
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let (i, p) = take(Some("tree"))?;
            let n_nodes: usize = num(i, p.get(1))?;
            let mut nodes = Vec::with_capacity(n_nodes);
            for _ in 0..n_nodes {
                let (i, p) = take(None)?;
                let node = match p[0] {
                    "split" => Node::Split {
                        feature: num(i, p.get(1))?,
                        threshold: num(i, p.get(2))?,
                        left: num(i, p.get(3))?,
                        right: num(i, p.get(4))?,
                    },
                    "leaf" => Node::Leaf { probs: p[1..].iter().map(|v| num(i, Some(v))).collect::<Result<_, _>>()? },
                    _ => return Err(bad(i, "expected split or leaf")),
                };
                match &node {
                    Node::Split { feature, left, right, .. }
                        if *feature >= n_features || *left >= n_nodes || *right >= n_nodes =>
                    {
                        return Err(bad(i, "index out of range"))
                    }
                    Node::Leaf { probs } if probs.len() != n_classes => return Err(bad(i, "wrong class count")),
                    _ => {}
                }
                nodes.push(node);
            }
            trees.push(DecisionTree { nodes });
        }
        Ok(Self { class_names, n_features, trees })
    }
}
