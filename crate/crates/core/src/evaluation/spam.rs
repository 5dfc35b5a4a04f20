//! Injection of fake uniformly-rating annotators into an existing table.

use rand::prelude::*;

use crate::dataset::{RatingEntry, RatingsTable};

/// Spam-injection settings.
///
/// `fake_per_instance` uniform ratings are added to every instance. The number
/// of fake annotators is chosen so that a fake annotator carries the same
/// average load as a real one: `round(M * fake_per_instance / (|L| / N))`.
#[derive(Debug, Clone, Copy)]
pub struct SpamConfig {
    pub fake_per_instance: usize,
    pub seed: u64,
}

impl SpamConfig {
    pub fn new(fake_per_instance: usize, seed: u64) -> Self {
        assert!(fake_per_instance <= 9, "sweep range is 0..=9");
        Self { fake_per_instance, seed }
    }

    /// Average number of ratings per real annotator, the load a fake
    /// annotator is sized to match.
    pub fn target_mean_load(&self, table: &RatingsTable) -> f64 {
        table.len() as f64 / table.num_annotators() as f64
    }

    /// Number of fake annotators implied by the load-matching rule.
    pub fn num_fake_annotators(&self, table: &RatingsTable) -> usize {
        if self.fake_per_instance == 0 {
            return 0;
        }
        let fake_ratings = (table.num_instances() * self.fake_per_instance) as f64;
        ((fake_ratings / self.target_mean_load(table)).round() as usize).max(1)
    }
}

/// Returns a new table with `M * fake_per_instance` uniform ratings appended.
///
/// All original ratings are preserved verbatim and keep their entry order. The
/// fake `(instance, rating)` pairs are shuffled, then dealt to the fake
/// annotators round-robin; a deal that would duplicate an existing
/// (annotator, instance) pair probes forward to the next free fake annotator.
pub fn inject_spam(table: &RatingsTable, cfg: &SpamConfig) -> RatingsTable {
    if cfg.fake_per_instance == 0 {
        return table.clone();
    }
    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let k = table.num_levels();
    let m_count = table.num_instances();
    let n_real = table.num_annotators();
    let mut n_fake = cfg.num_fake_annotators(table);
    // distinctness needs at least fake_per_instance fake annotators
    n_fake = n_fake.max(cfg.fake_per_instance);

    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(m_count * cfg.fake_per_instance);
    for m in 0..m_count {
        for _ in 0..cfg.fake_per_instance {
            pairs.push((m, rng.gen_range(1..=k)));
        }
    }
    pairs.shuffle(&mut rng);

    let mut used: std::collections::HashSet<(usize, usize)> = std::collections::HashSet::new();
    let mut entries = table.entries().to_vec();
    for (i, &(instance, level)) in pairs.iter().enumerate() {
        let mut fake = i % n_fake;
        let mut probes = 0;
        while used.contains(&(fake, instance)) {
            fake = (fake + 1) % n_fake;
            probes += 1;
            debug_assert!(probes <= n_fake, "more fake ratings than fake annotators");
        }
        used.insert((fake, instance));
        entries.push(RatingEntry {
            instance,
            annotator: n_real + fake,
            level,
        });
    }

    let mut annotator_ids = table.annotator_ids().to_vec();
    for j in 0..n_fake {
        let mut id = format!("fake{j}");
        while annotator_ids.contains(&id) {
            id.push('_');
        }
        annotator_ids.push(id);
    }
    RatingsTable::from_parts(
        table.instance_ids().to_vec(),
        annotator_ids,
        k,
        entries,
    )
    .expect("spam injection preserves table invariants")
}
