//! Sampling from the generative model, for self-consistency testing and
//! synthetic benchmarks.

use rand::prelude::*;
use rand_distr::{Gamma, StandardNormal};
use serde::Serialize;

use crate::dataset::{CategoryMap, GroundTruth, OrdinalScale, RatingEntry, RatingsTable};
use crate::Real;

/// Per-annotator non-spam probability scheme.
#[derive(Debug, Clone, Serialize)]
pub enum EpsilonPrior<T> {
    /// Every annotator has the same non-spam probability.
    Fixed(T),
    /// The first `round(frac_hi * N)` annotators get `hi`, the rest `lo`.
    TwoPoint { hi: T, lo: T, frac_hi: T },
}

impl<T: Real> EpsilonPrior<T> {
    fn values(&self, n: usize) -> Vec<T> {
        match *self {
            EpsilonPrior::Fixed(eps) => vec![eps; n],
            EpsilonPrior::TwoPoint { hi, lo, frac_hi } => {
                let n_hi = (frac_hi.as_f64() * n as f64).round() as usize;
                (0..n).map(|i| if i < n_hi { hi } else { lo }).collect()
            }
        }
    }
}

/// Configuration of the synthetic generator.
#[derive(Debug, Clone, Serialize)]
pub struct SynthConfig<T> {
    pub num_instances: usize,
    pub num_annotators: usize,
    pub num_levels: usize,
    /// Categories are assigned round-robin: `c(m) = m mod C`.
    pub num_categories: usize,
    pub ratings_per_instance: usize,
    /// Gamma prior (shape, rate) for annotator expertise.
    pub alpha: T,
    pub beta: T,
    /// Gamma prior (shape, rate) for category inverse difficulty.
    pub phi: T,
    pub eta: T,
    /// Gaussian prior (mean, precision) for ground truth.
    pub mu: T,
    pub lambda: T,
    /// Spam-component rating distribution (defaults to uniform).
    pub pi: Vec<T>,
    pub epsilon: EpsilonPrior<T>,
    pub seed: u64,
}

impl<T: Real> SynthConfig<T> {
    /// A moderate default: ground truth spanning the scale, expert noise
    /// around half a level, uniform spam distribution.
    pub fn new(num_instances: usize, num_annotators: usize, num_levels: usize) -> Self {
        Self {
            num_instances,
            num_annotators,
            num_levels,
            num_categories: 1,
            ratings_per_instance: 4,
            alpha: T::of(4.0),
            beta: T::of(2.0),
            phi: T::of(10.0),
            eta: T::of(5.0),
            mu: T::of((num_levels + 1) as f64 / 2.0),
            lambda: T::of(0.75),
            pi: vec![T::one() / T::of_usize(num_levels); num_levels],
            epsilon: EpsilonPrior::Fixed(T::of(0.95)),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) {
        assert!(self.num_instances > 0 && self.num_annotators > 0);
        assert!(self.num_levels >= 2);
        assert!(self.num_categories >= 1 && self.num_categories <= self.num_instances);
        assert!(self.ratings_per_instance >= 1 && self.ratings_per_instance <= self.num_annotators);
        assert_eq!(self.pi.len(), self.num_levels);
    }
}

/// The latent variables a synthetic dataset was generated from.
#[derive(Debug, Clone, Serialize)]
pub struct SynthParams<T> {
    pub z: Vec<T>,
    pub tau: Vec<T>,
    pub delta: Vec<T>,
    pub epsilon: Vec<T>,
}

/// A generated dataset: the table, full-coverage ground truth, the latent
/// variables, and the category (query) map used for difficulty sharing.
#[derive(Debug, Clone)]
pub struct SynthOutput<T> {
    pub table: RatingsTable,
    pub truth: GroundTruth<T>,
    pub params: SynthParams<T>,
    pub categories: CategoryMap,
    pub scale: OrdinalScale<T>,
}

/// Samples a dataset from the generative process: category inverse
/// difficulties and annotator expertises from their gamma priors, ground truth
/// from its Gaussian prior, then for each sampled (annotator, instance) pair a
/// spam indicator; non-spam ratings threshold a Gaussian draw around the
/// truth (out-of-range draws clamp to the extreme levels), spam ratings come
/// from the discrete distribution.
///
/// All draws happen in `f64` before conversion, so a fixed seed reproduces the
/// same dataset for every scalar type.
pub fn synth_generate<T: Real>(cfg: &SynthConfig<T>) -> SynthOutput<T> {
    cfg.validate();
    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let scale: OrdinalScale<T> = OrdinalScale::uniform(cfg.num_levels);

    let gamma = |shape: T, rate: T, rng: &mut StdRng| -> f64 {
        Gamma::new(shape.as_f64(), 1.0 / rate.as_f64())
            .expect("valid gamma parameters")
            .sample(rng)
    };

    let delta: Vec<f64> = (0..cfg.num_categories)
        .map(|_| gamma(cfg.phi, cfg.eta, &mut rng))
        .collect();
    let tau: Vec<f64> = (0..cfg.num_annotators)
        .map(|_| gamma(cfg.alpha, cfg.beta, &mut rng))
        .collect();
    let z: Vec<f64> = (0..cfg.num_instances)
        .map(|_| {
            cfg.mu.as_f64()
                + rng.sample::<f64, _>(StandardNormal) / cfg.lambda.as_f64().sqrt()
        })
        .collect();
    let epsilon = cfg.epsilon.values(cfg.num_annotators);

    let pi_cum: Vec<f64> = {
        let mut acc = 0.0;
        cfg.pi
            .iter()
            .map(|&p| {
                acc += p.as_f64();
                acc
            })
            .collect()
    };
    let sample_pi = |rng: &mut StdRng| -> usize {
        let u: f64 = rng.gen::<f64>() * pi_cum.last().unwrap();
        1 + pi_cum.iter().position(|&c| u < c).unwrap_or(cfg.num_levels - 1)
    };

    let mut entries = Vec::with_capacity(cfg.num_instances * cfg.ratings_per_instance);
    let mut pool: Vec<usize> = (0..cfg.num_annotators).collect();
    for m in 0..cfg.num_instances {
        let c = m % cfg.num_categories;
        // partial Fisher-Yates: distinct annotators for this instance
        for j in 0..cfg.ratings_per_instance {
            let pick = rng.gen_range(j..pool.len());
            pool.swap(j, pick);
        }
        for &n in pool.iter().take(cfg.ratings_per_instance) {
            let spam = rng.gen::<f64>() >= epsilon[n].as_f64();
            let level = if spam {
                sample_pi(&mut rng)
            } else {
                let sd = 1.0 / (tau[n] * delta[c]).sqrt();
                let x = z[m] + sd * rng.sample::<f64, _>(StandardNormal);
                scale.level_of_clamped(T::of(x))
            };
            entries.push(RatingEntry { instance: m, annotator: n, level });
        }
    }

    let table = RatingsTable::from_dense_entries(
        cfg.num_instances,
        cfg.num_annotators,
        cfg.num_levels,
        entries,
    )
    .expect("generator satisfies table invariants");
    let assignment: Vec<usize> = (0..cfg.num_instances).map(|m| m % cfg.num_categories).collect();
    let category_ids = (0..cfg.num_categories).map(|c| format!("q{c}")).collect();
    let categories = CategoryMap::from_assignment(&table, assignment, category_ids);

    SynthOutput {
        table,
        truth: GroundTruth::full(z.iter().map(|&v| T::of(v)).collect()),
        params: SynthParams {
            z: z.into_iter().map(T::of).collect(),
            tau: tau.into_iter().map(T::of).collect(),
            delta: delta.into_iter().map(T::of).collect(),
            epsilon,
        },
        categories,
        scale,
    }
}
