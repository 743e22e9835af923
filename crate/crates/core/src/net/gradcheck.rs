//! Central-difference checks of the analytic gradients.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::LayerSpec;
use super::network::{Network, NetworkSpec};
use super::train::{HingeEmbedding, Hinge, Model, Objective};
use crate::error::Result;

/// Finite-difference step.
pub const STEP: f64 = 1e-5;
/// Gradients below this magnitude are compared absolutely.
pub const FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckTarget {
    Conv,
    Conv3d,
    Pool,
    Dense,
    Normalize,
    /// Both siamese branches share weights; gradients from each side sum.
    SharedBranches,
    /// Shared branches plus decision layers under the hinge loss.
    DecisionLayers,
}

impl CheckTarget {
    pub const ALL: [CheckTarget; 7] = [
        CheckTarget::Conv,
        CheckTarget::Conv3d,
        CheckTarget::Pool,
        CheckTarget::Dense,
        CheckTarget::Normalize,
        CheckTarget::SharedBranches,
        CheckTarget::DecisionLayers,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckReport {
    pub target: CheckTarget,
    pub checked: usize,
    pub max_relative_error: f64,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

fn tiny(layers: Vec<LayerSpec>, ndim: usize) -> NetworkSpec {
    let input = if ndim == 3 { [1, 6, 6, 6] } else { [1, 1, 8, 8] };
    NetworkSpec::new(ndim, input, layers).expect("tiny spec")
}

fn conv() -> LayerSpec {
    LayerSpec::Conv { in_ch: 1, out_ch: 4, kernel: 3 }
}

/// Compares analytic and numeric derivatives of a scalar function of a
/// parameter vector at `count` random indices.
fn compare(
    params: &mut [f64],
    analytic: &[f64],
    count: usize,
    rng: &mut ChaCha8Rng,
    f: &mut dyn FnMut(&[f64]) -> f64,
) -> (usize, f64) {
    let n = count.min(params.len());
    let mut worst = 0.0f64;
    for i in sample(rng, params.len(), n) {
        let p0 = params[i];
        params[i] = p0 + STEP;
        let up = f(params);
        params[i] = p0 - STEP;
        let down = f(params);
        params[i] = p0;
        worst = worst.max(relative_error(analytic[i], (up - down) / (2.0 * STEP)));
    }
    (n, worst)
}

/// Runs one check with `count` randomly chosen weights.
pub fn check(target: CheckTarget, count: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (checked, worst) = match target {
        CheckTarget::SharedBranches | CheckTarget::DecisionLayers => {
            let spec = tiny(
                vec![
                    conv(),
                    LayerSpec::Tanh,
                    LayerSpec::MaxPool { window: 2 },
                    LayerSpec::Dense { inputs: 36, outputs: 6 },
                    LayerSpec::Normalize,
                ],
                2,
            );
            let obj: Box<dyn Objective> = if target == CheckTarget::SharedBranches {
                // Margin above the largest possible distance keeps the negative active.
                Box::new(HingeEmbedding { alpha_p: 0.0, alpha_n: 2.5 })
            } else {
                Box::new(Hinge { hidden: 5 })
            };
            let mut model = Model::new(spec, obj.as_ref(), rng.gen());
            let x1: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x2: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = if target == CheckTarget::SharedBranches { -1 } else { 1 };
            let (_, g, hg) = model.pair_gradient(obj.as_ref(), &x1, &x2, y)?;
            let mut params = model.branch.params.clone();
            let (mut n, mut w) = {
                let m = model.clone();
                compare(&mut params, &g, count, &mut rng, &mut |p| {
                    let mut mm = m.clone();
                    mm.branch.params.copy_from_slice(p);
                    mm.pair_loss(obj.as_ref(), &x1, &x2, y).unwrap()
                })
            };
            if let Some(head) = model.head.take() {
                let mut hp = head.params.clone();
                let base = model.clone();
                let (n2, w2) = compare(&mut hp, &hg, count, &mut rng, &mut |p| {
                    let mut h = head.clone();
                    h.params.copy_from_slice(p);
                    let mut mm = base.clone();
                    mm.head = Some(h);
                    mm.pair_loss(obj.as_ref(), &x1, &x2, y).unwrap()
                });
                n += n2;
                w = w.max(w2);
            }
            (n, w)
        }
        _ => {
            let (layers, ndim) = match target {
                CheckTarget::Conv => (vec![conv()], 2),
                CheckTarget::Conv3d => (vec![conv()], 3),
                CheckTarget::Pool => (vec![conv(), LayerSpec::MaxPool { window: 2 }], 2),
                CheckTarget::Dense => (
                    vec![conv(), LayerSpec::Tanh, LayerSpec::Dense { inputs: 144, outputs: 6 }],
                    2,
                ),
                _ => (
                    vec![
                        conv(),
                        LayerSpec::Tanh,
                        LayerSpec::Dense { inputs: 144, outputs: 6 },
                        LayerSpec::Normalize,
                    ],
                    2,
                ),
            };
            let mut net = Network::init(tiny(layers, ndim), rng.gen());
            // Nonzero biases so they are exercised too.
            for p in net.params.iter_mut() {
                *p += rng.gen_range(-0.1..0.1);
            }
            let in_len: usize = net.spec().input.iter().product();
            let x: Vec<f64> = (0..in_len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let c: Vec<f64> = (0..net.output_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let objective = |n: &Network| -> f64 {
                n.forward(&x).unwrap().iter().zip(&c).map(|(a, b)| a * b).sum()
            };
            let trace = net.forward_trace(&x)?;
            let mut g = vec![0.0; net.params.len()];
            net.backward(&trace, &c, &mut g, false);
            let mut params = net.params.clone();
            let mut probe = net.clone();
            compare(&mut params, &g, count, &mut rng, &mut |p| {
                probe.params.copy_from_slice(p);
                objective(&probe)
            })
        }
    };
    Ok(CheckReport { target, checked, max_relative_error: worst })
}

/// Input-gradient check, used for layers without weights.
pub fn check_input_gradient(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = Network::init(
        tiny(
            vec![
                conv(),
                LayerSpec::Tanh,
                LayerSpec::MaxPool { window: 2 },
                LayerSpec::Dense { inputs: 36, outputs: 5 },
                LayerSpec::Normalize,
            ],
            2,
        ),
        rng.gen(),
    );
    let mut x: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let c: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let trace = net.forward_trace(&x)?;
    let mut g = vec![0.0; net.params.len()];
    let dx = net.backward(&trace, &c, &mut g, true);
    let (_, worst) = compare(&mut x, &dx, 64, &mut rng, &mut |xi| {
        net.forward(xi).unwrap().iter().zip(&c).map(|(a, b)| a * b).sum()
    });
    Ok(worst)
}
