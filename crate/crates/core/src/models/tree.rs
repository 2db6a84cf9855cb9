use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Binary regression tree; `x[feature] <= threshold` goes left. Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
            }
        }
        walk(self, 0)
    }
}

/// Growth settings shared by forests and boosting. Splits maximise the
/// second-order gain ½[G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)] − γ and leaves
/// take −G/(H+λ); with g = −y, h = 1 and λ = 0 this is variance reduction
/// with mean-valued leaves.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub max_depth: Option<usize>,
    pub min_child_weight: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub max_features: Option<usize>,
}

struct Grower<'a> {
    x: &'a Matrix,
    g: &'a [f64],
    h: &'a [f64],
    p: GrowParams,
    rng: &'a mut ChaCha8Rng,
    nodes: Vec<Node>,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Grower<'_> {
    fn leaf_value(&self, gs: f64, hs: f64) -> f64 {
        -gs / (hs + self.p.lambda)
    }

    fn score(&self, gs: f64, hs: f64) -> f64 {
        let d = hs + self.p.lambda;
        if d > 0.0 {
            gs * gs / d
        } else {
            0.0
        }
    }

    fn best_split(&mut self, samples: &mut [usize], gs: f64, hs: f64) -> Option<BestSplit> {
        let p = self.x.ncols();
        let mut features: Vec<usize> = match self.p.max_features {
            Some(m) if m < p => sample(self.rng, p, m.max(1)).into_vec(),
            _ => (0..p).collect(),
        };
        features.sort_unstable();
        let parent = self.score(gs, hs);
        let mut best: Option<BestSplit> = None;
        for f in features {
            let x = self.x;
            samples.sort_unstable_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
            let (mut gl, mut hl) = (0.0, 0.0);
            for i in 0..samples.len() - 1 {
                let s = samples[i];
                gl += self.g[s];
                hl += self.h[s];
                let (lo, hi) = (x.get(s, f), x.get(samples[i + 1], f));
                if lo >= hi {
                    continue;
                }
                let (gr, hr) = (gs - gl, hs - hl);
                if hl < self.p.min_child_weight || hr < self.p.min_child_weight {
                    continue;
                }
                let gain = 0.5 * (self.score(gl, hl) + self.score(gr, hr) - parent) - self.p.gamma;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(BestSplit { gain, feature: f, threshold });
                }
            }
        }
        // Ignore gains that are rounding noise relative to the parent score.
        best.filter(|b| b.gain > 1e-12 * parent.abs().max(f64::MIN_POSITIVE))
    }

    fn grow(&mut self, samples: &mut [usize], depth: usize) -> usize {
        let gs: f64 = samples.iter().map(|&s| self.g[s]).sum();
        let hs: f64 = samples.iter().map(|&s| self.h[s]).sum();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: self.leaf_value(gs, hs) });
        if samples.len() < 2 || self.p.max_depth.is_some_and(|d| depth >= d) {
            return id;
        }
        let Some(split) = self.best_split(samples, gs, hs) else {
            return id;
        };
        let x = self.x;
        let f = split.feature;
        samples.sort_unstable_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
        let cut = samples.partition_point(|&s| x.get(s, f) <= split.threshold);
        let (l, r) = samples.split_at_mut(cut);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split { feature: f, threshold: split.threshold, left, right };
        id
    }
}

/// Grows one tree over `samples` (row indices, repeats allowed).
pub(crate) fn grow_tree(
    x: &Matrix,
    g: &[f64],
    h: &[f64],
    mut samples: Vec<usize>,
    params: GrowParams,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let mut grower = Grower { x, g, h, p: params, rng, nodes: Vec::new() };
    if samples.is_empty() {
        return Tree { nodes: vec![Node::Leaf { value: 0.0 }] };
    }
    grower.grow(&mut samples, 0);
    Tree { nodes: grower.nodes }
}
