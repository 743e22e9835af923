//! Recall over cut-off rank for coarse-to-fine descriptor retrieval.

mod plot;

use rayon::prelude::*;

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::net::{Descriptor, DescriptorMethod};

pub use plot::{write_csv, write_svg, RecallTable};

/// `coarse[i]` and `fine[i]` describe the same patch at the same frame; no
/// other fine descriptor is relevant to `coarse[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet {
    coarse: Vec<Vec<f64>>,
    fine: Vec<Vec<f64>>,
}

impl EvalSet {
    pub fn new(coarse: Vec<Vec<f64>>, fine: Vec<Vec<f64>>) -> Result<Self> {
        if coarse.len() != fine.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coarse vs {} fine descriptors",
                coarse.len(),
                fine.len()
            )));
        }
        if coarse.is_empty() {
            return Err(Error::EmptyField);
        }
        let dim = coarse[0].len();
        if coarse.iter().chain(&fine).any(|d| d.len() != dim) {
            return Err(Error::DimensionMismatch("descriptor lengths differ".into()));
        }
        Ok(Self { coarse, fine })
    }

    /// Describes every pair of a dataset with one method.
    pub fn from_dataset(data: &Dataset, method: &dyn DescriptorMethod) -> Result<Self> {
        let described: Result<Vec<(Descriptor, Descriptor)>> = data
            .pairs
            .par_iter()
            .map(|p| Ok((method.describe(&p.coarse)?, method.describe(&p.fine)?)))
            .collect();
        let (coarse, fine) = described?.into_iter().map(|(c, f)| (c.into_values(), f.into_values())).unzip();
        Self::new(coarse, fine)
    }

    pub fn len(&self) -> usize {
        self.coarse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coarse.is_empty()
    }

    /// Zero-based rank of each query's true partner among all fine
    /// descriptors. Equal distances are ordered by fine index.
    pub fn partner_ranks(&self) -> Vec<usize> {
        (0..self.len())
            .into_par_iter()
            .map(|i| {
                let q = &self.coarse[i];
                let own = sq_dist(q, &self.fine[i]);
                self.fine
                    .iter()
                    .enumerate()
                    .filter(|&(j, f)| {
                        if j == i {
                            return false;
                        }
                        let d = sq_dist(q, f);
                        d < own || (d == own && j < i)
                    })
                    .count()
            })
            .collect()
    }

    /// Distances from each query to every non-partner fine descriptor.
    pub fn impostor_distances(&self) -> Vec<f64> {
        (0..self.len())
            .into_par_iter()
            .flat_map_iter(|i| {
                let q = &self.coarse[i];
                self.fine.iter().enumerate().filter(move |&(j, _)| j != i).map(move |(_, f)| sq_dist(q, f).sqrt())
            })
            .collect()
    }

    /// Distance from each query to its own partner.
    pub fn partner_distances(&self) -> Vec<f64> {
        self.coarse.iter().zip(&self.fine).map(|(c, f)| sq_dist(c, f).sqrt()).collect()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Fraction of queries whose partner is among their `k` nearest fine
/// descriptors.
pub fn recall_at_k(set: &EvalSet, k: usize) -> f64 {
    let ranks = set.partner_ranks();
    ranks.iter().filter(|&&r| r < k).count() as f64 / set.len() as f64
}

/// `recall_at_k` for `k = 1..=k_max`.
pub fn recall_curve(set: &EvalSet, k_max: usize) -> Vec<f64> {
    curve_from_ranks(&set.partner_ranks(), k_max)
}

pub fn curve_from_ranks(ranks: &[usize], k_max: usize) -> Vec<f64> {
    let n = ranks.len();
    let mut hist = vec![0usize; k_max.max(1)];
    for &r in ranks {
        if r < k_max {
            hist[r] += 1;
        }
    }
    let mut found = 0;
    (0..k_max)
        .map(|k| {
            found += hist[k];
            found as f64 / n as f64
        })
        .collect()
}

/// Mean of `curve[k-1]` over `k` in `lo..=hi`.
pub fn mean_recall(curve: &[f64], lo: usize, hi: usize) -> f64 {
    let ks: Vec<usize> = (lo.max(1)..=hi.min(curve.len())).collect();
    ks.iter().map(|k| curve[k - 1]).sum::<f64>() / ks.len().max(1) as f64
}

/// Value below which a fraction `p` of the samples fall (nearest rank).
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let idx = ((p * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    v[idx]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect()
    }

    fn random_set(seed: u64, n: usize) -> EvalSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = (0..n).map(|_| random_unit(&mut rng, 8)).collect();
        let f = (0..n).map(|_| random_unit(&mut rng, 8)).collect();
        EvalSet::new(c, f).unwrap()
    }

    #[test]
    fn identical_descriptors_have_perfect_recall() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c: Vec<Vec<f64>> = (0..40).map(|_| random_unit(&mut rng, 6)).collect();
        let set = EvalSet::new(c.clone(), c).unwrap();
        assert_eq!(recall_at_k(&set, 1), 1.0);
    }

    #[test]
    fn curve_is_monotone_and_complete() {
        for seed in 0..5 {
            let set = random_set(seed, 60);
            let curve = recall_curve(&set, set.len());
            assert!(curve.windows(2).all(|w| w[1] >= w[0]));
            assert_eq!(*curve.last().unwrap(), 1.0);
            assert_eq!(recall_at_k(&set, 7), curve[6]);
        }
    }

    #[test]
    fn ties_resolve_by_index() {
        // Every fine descriptor is identical, so the partner rank is its index.
        let c = vec![vec![1.0, 0.0]; 5];
        let f = vec![vec![0.0, 1.0]; 5];
        let set = EvalSet::new(c, f).unwrap();
        assert_eq!(set.partner_ranks(), vec![0, 1, 2, 3, 4]);
        assert_eq!(recall_curve(&set, 5), vec![0.2, 0.4, 0.6, 0.8, 1.0]);
    }

    #[test]
    fn brute_force_ranks_agree() {
        let set = random_set(11, 50);
        let ranks = set.partner_ranks();
        for (i, &rank) in ranks.iter().enumerate() {
            let mut order: Vec<(f64, usize)> =
                set.fine.iter().enumerate().map(|(j, f)| (sq_dist(&set.coarse[i], f), j)).collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            assert_eq!(order.iter().position(|&(_, j)| j == i).unwrap(), rank);
        }
    }

    #[test]
    fn mismatched_sets_are_rejected() {
        assert!(EvalSet::new(vec![vec![0.0]], vec![]).is_err());
        assert!(EvalSet::new(vec![vec![0.0], vec![1.0]], vec![vec![0.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn summaries() {
        assert_eq!(mean_recall(&[0.1, 0.2, 0.3, 0.4], 2, 3), 0.25);
        assert_eq!(percentile(&[5.0, 1.0, 3.0, 2.0, 4.0], 0.2), 1.0);
        assert_eq!(percentile(&[5.0, 1.0, 3.0, 2.0, 4.0], 0.5), 3.0);
    }
}
