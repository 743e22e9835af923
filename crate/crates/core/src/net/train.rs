//! Siamese training with shared branch weights.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss;
use super::network::{Network, NetworkSpec, Trace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    /// Positive pairs per batch; each brings `neg_ratio` negatives.
    pub batch: usize,
    pub neg_ratio: usize,
    pub seed: u64,
    pub alpha_p: f64,
    pub alpha_n: f64,
    /// Per-epoch learning-rate factor.
    pub lr_decay: f64,
    /// Negatives drawn from the same patch must be at least this many
    /// frames apart; taken from the dataset's sync interval.
    #[serde(skip)]
    pub min_frame_gap: u32,
    /// `hinge-embedding` or `hinge`.
    pub objective: String,
    /// Hidden width of the decision layers used by the `hinge` objective.
    pub hidden: usize,
    /// Only positives at frames divisible by this are used.
    pub frame_stride: u32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-2,
            momentum: 0.9,
            epochs: 10,
            batch: 16,
            neg_ratio: 1,
            seed: 1,
            alpha_p: loss::ALPHA_P,
            alpha_n: loss::ALPHA_N,
            lr_decay: 0.95,
            min_frame_gap: 20,
            objective: "hinge-embedding".into(),
            hidden: 64,
            frame_stride: 2,
        }
    }
}

impl TrainConfig {
    /// 3D runs draw seven negatives per positive.
    pub fn default_3d() -> Self {
        Self { neg_ratio: 7, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be finite and >= 0");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must be in [0, 1)");
        }
        if self.batch == 0 || self.frame_stride == 0 {
            return bad("batch and frame_stride must be positive");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay must be in (0, 1]");
        }
        if self.alpha_p < 0.0 || self.alpha_n < 0.0 {
            return bad("margins must be >= 0");
        }
        Ok(())
    }
}

/// Origin of a positive pair, used to reject false negatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairMeta {
    pub patch: u64,
    pub frame: u32,
}

/// Positive pairs as flat network inputs; `coarse[i]` matches `fine[i]`.
#[derive(Debug, Clone, Default)]
pub struct PairSet {
    pub coarse: Vec<Vec<f64>>,
    pub fine: Vec<Vec<f64>>,
    pub meta: Vec<PairMeta>,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.coarse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coarse.is_empty()
    }
}

/// Whether pair `j` may serve as a negative partner for pair `i`.
pub fn is_valid_negative(meta: &[PairMeta], i: usize, j: usize, min_gap: u32) -> bool {
    i != j && (meta[i].patch != meta[j].patch || meta[i].frame.abs_diff(meta[j].frame) >= min_gap)
}

/// Random negative partner for pair `i`, or `None` if none exists.
pub fn sample_negative<R: Rng>(rng: &mut R, meta: &[PairMeta], i: usize, min_gap: u32) -> Option<usize> {
    let n = meta.len();
    if n < 2 {
        return None;
    }
    for _ in 0..32 {
        let j = rng.gen_range(0..n);
        if is_valid_negative(meta, i, j, min_gap) {
            return Some(j);
        }
    }
    let start = rng.gen_range(0..n);
    (0..n).map(|k| (start + k) % n).find(|&j| is_valid_negative(meta, i, j, min_gap))
}

/// Loss on a pair of branch descriptors.
pub trait Objective: Send + Sync {
    fn name(&self) -> &'static str;

    /// Extra trainable layers on top of the branches.
    fn head(&self, _descriptor_len: usize, _seed: u64) -> Option<Network> {
        None
    }

    /// Returns the loss and adds its gradient with respect to `d1`, `d2` and
    /// the head parameters.
    #[allow(clippy::too_many_arguments)]
    fn pair(
        &self,
        head: Option<&Network>,
        d1: &[f64],
        d2: &[f64],
        y: i8,
        g1: &mut [f64],
        g2: &mut [f64],
        head_grad: &mut [f64],
    ) -> f64;
}

pub struct HingeEmbedding {
    pub alpha_p: f64,
    pub alpha_n: f64,
}

impl Objective for HingeEmbedding {
    fn name(&self) -> &'static str {
        "hinge-embedding"
    }

    fn pair(
        &self,
        _head: Option<&Network>,
        d1: &[f64],
        d2: &[f64],
        y: i8,
        g1: &mut [f64],
        g2: &mut [f64],
        _head_grad: &mut [f64],
    ) -> f64 {
        let dist = d1.iter().zip(d2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let gd = loss::hinge_embedding_grad(dist, y, self.alpha_p, self.alpha_n);
        if gd != 0.0 && dist > 0.0 {
            for k in 0..d1.len() {
                let u = gd * (d1[k] - d2[k]) / dist;
                g1[k] += u;
                g2[k] -= u;
            }
        }
        loss::hinge_embedding(dist, y, self.alpha_p, self.alpha_n)
    }
}

/// Hinge loss on a score from decision layers over both descriptors.
pub struct Hinge {
    pub hidden: usize,
}

impl Objective for Hinge {
    fn name(&self) -> &'static str {
        "hinge"
    }

    fn head(&self, descriptor_len: usize, seed: u64) -> Option<Network> {
        Some(Network::init(NetworkSpec::decision_head(descriptor_len, self.hidden), seed))
    }

    fn pair(
        &self,
        head: Option<&Network>,
        d1: &[f64],
        d2: &[f64],
        y: i8,
        g1: &mut [f64],
        g2: &mut [f64],
        head_grad: &mut [f64],
    ) -> f64 {
        let head = head.expect("hinge objective needs decision layers");
        let z: Vec<f64> = d1.iter().chain(d2).copied().collect();
        let trace = head.forward_trace(&z).expect("head sized from descriptor");
        let s = trace.output()[0];
        let gs = loss::hinge_grad(s, y);
        if gs != 0.0 {
            let dz = head.backward(&trace, &[gs], head_grad, true);
            let n = d1.len();
            for k in 0..n {
                g1[k] += dz[k];
                g2[k] += dz[n + k];
            }
        }
        loss::hinge(s, y)
    }
}

/// Objective registry.
pub fn objective(cfg: &TrainConfig) -> Result<Box<dyn Objective>> {
    match cfg.objective.as_str() {
        "hinge-embedding" => Ok(Box::new(HingeEmbedding { alpha_p: cfg.alpha_p, alpha_n: cfg.alpha_n })),
        "hinge" => Ok(Box::new(Hinge { hidden: cfg.hidden })),
        other => Err(Error::InvalidParameter(format!(
            "unknown objective '{other}' (expected hinge-embedding or hinge)"
        ))),
    }
}

/// A descriptor branch plus optional decision layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub branch: Network,
    pub head: Option<Network>,
}

impl Model {
    pub fn new(spec: NetworkSpec, objective: &dyn Objective, seed: u64) -> Self {
        let branch = Network::init(spec, seed);
        let head = objective.head(branch.output_len(), seed.wrapping_add(0x9e37_79b9));
        Self { branch, head }
    }

    /// Loss of one pair with gradients for the branch (both sides summed)
    /// and the head.
    pub fn pair_gradient(
        &self,
        objective: &dyn Objective,
        x1: &[f64],
        x2: &[f64],
        y: i8,
    ) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let t1 = self.branch.forward_trace(x1)?;
        let t2 = self.branch.forward_trace(x2)?;
        let n = self.branch.output_len();
        let (mut g1, mut g2) = (vec![0.0; n], vec![0.0; n]);
        let mut hg = vec![0.0; self.head.as_ref().map_or(0, |h| h.params.len())];
        let l = objective.pair(self.head.as_ref(), t1.output(), t2.output(), y, &mut g1, &mut g2, &mut hg);
        let mut grad = vec![0.0; self.branch.params.len()];
        self.branch.backward(&t1, &g1, &mut grad, false);
        self.branch.backward(&t2, &g2, &mut grad, false);
        Ok((l, grad, hg))
    }

    pub fn pair_loss(&self, objective: &dyn Objective, x1: &[f64], x2: &[f64], y: i8) -> Result<f64> {
        Ok(self.pair_gradient(objective, x1, x2, y)?.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// Mean pair loss per batch.
    pub batch_loss: Vec<f64>,
    /// Mean pair loss per epoch.
    pub epoch_loss: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Input {
    Coarse(usize),
    Fine(usize),
}

/// Stochastic gradient descent with momentum. Negatives are redrawn for every
/// batch; results depend only on `cfg.seed`.
pub fn train(model: &mut Model, data: &PairSet, cfg: &TrainConfig, objective: &dyn Objective) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidParameter("training needs at least one pair".into()));
    }
    if data.fine.len() != data.len() || data.meta.len() != data.len() {
        return Err(Error::DimensionMismatch("pair set columns differ in length".into()));
    }
    let in_len = model.branch.spec().input.iter().product::<usize>();
    if data.coarse.iter().chain(&data.fine).any(|x| x.len() != in_len) {
        return Err(Error::DimensionMismatch(format!("training inputs must have {in_len} values")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut vel = vec![0.0; model.branch.params.len()];
    let mut head_vel = vec![0.0; model.head.as_ref().map_or(0, |h| h.params.len())];
    let mut report = TrainReport::default();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let dlen = model.branch.output_len();

    for epoch in 0..cfg.epochs {
        let lr = cfg.lr * cfg.lr_decay.powi(epoch as i32);
        order.shuffle(&mut rng);
        let mut epoch_sum = 0.0;
        let mut epoch_pairs = 0usize;
        for (b, chunk) in order.chunks(cfg.batch).enumerate() {
            let mut inputs: Vec<Input> = Vec::new();
            let mut slot: HashMap<Input, usize> = HashMap::new();
            let mut id = |x: Input| {
                *slot.entry(x).or_insert_with(|| {
                    inputs.push(x);
                    inputs.len() - 1
                })
            };
            let mut pairs: Vec<(usize, usize, i8)> = Vec::new();
            for &i in chunk {
                let c = id(Input::Coarse(i));
                pairs.push((c, id(Input::Fine(i)), 1));
                for _ in 0..cfg.neg_ratio {
                    if let Some(j) = sample_negative(&mut rng, &data.meta, i, cfg.min_frame_gap) {
                        pairs.push((c, id(Input::Fine(j)), -1));
                    }
                }
            }
            let branch = &model.branch;
            let traces: Vec<Trace> = inputs
                .par_iter()
                .map(|x| {
                    let v = match *x {
                        Input::Coarse(i) => &data.coarse[i],
                        Input::Fine(i) => &data.fine[i],
                    };
                    branch.forward_trace(v)
                })
                .collect::<Result<_>>()?;

            let mut dgrad = vec![vec![0.0; dlen]; inputs.len()];
            let mut head_grad = vec![0.0; head_vel.len()];
            let mut batch_sum = 0.0;
            for &(a, c, y) in &pairs {
                let (ga, gc) = two_mut(&mut dgrad, a, c);
                batch_sum += objective.pair(
                    model.head.as_ref(),
                    traces[a].output(),
                    traces[c].output(),
                    y,
                    ga,
                    gc,
                    &mut head_grad,
                );
            }
            if !batch_sum.is_finite() {
                return Err(Error::Diverged { epoch, batch: b });
            }
            let parts: Vec<Vec<f64>> = traces
                .par_iter()
                .zip(dgrad.par_iter())
                .map(|(t, g)| {
                    let mut acc = vec![0.0; branch.params.len()];
                    if g.iter().any(|v| *v != 0.0) {
                        branch.backward(t, g, &mut acc, false);
                    }
                    acc
                })
                .collect();
            let mut grad = vec![0.0; vel.len()];
            for p in &parts {
                for (a, v) in grad.iter_mut().zip(p) {
                    *a += v;
                }
            }
            let scale = 1.0 / pairs.len() as f64;
            sgd_step(&mut model.branch.params, &mut vel, &grad, lr, cfg.momentum, scale);
            if let Some(h) = model.head.as_mut() {
                sgd_step(&mut h.params, &mut head_vel, &head_grad, lr, cfg.momentum, scale);
            }
            if model.branch.params.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged { epoch, batch: b });
            }
            report.batch_loss.push(batch_sum * scale);
            epoch_sum += batch_sum;
            epoch_pairs += pairs.len();
        }
        let mean = epoch_sum / epoch_pairs.max(1) as f64;
        log::debug!("epoch {epoch}: loss {mean:.5} (lr {lr:.2e})");
        report.epoch_loss.push(mean);
    }
    Ok(report)
}

fn sgd_step(params: &mut [f64], vel: &mut [f64], grad: &[f64], lr: f64, momentum: f64, scale: f64) {
    for ((p, v), g) in params.iter_mut().zip(vel.iter_mut()).zip(grad) {
        *v = momentum * *v - lr * scale * g;
        *p += *v;
    }
}

fn two_mut<T>(v: &mut [T], a: usize, b: usize) -> (&mut T, &mut T) {
    assert_ne!(a, b);
    if a < b {
        let (l, r) = v.split_at_mut(b);
        (&mut l[a], &mut r[0])
    } else {
        let (l, r) = v.split_at_mut(a);
        (&mut r[0], &mut l[b])
    }
}
