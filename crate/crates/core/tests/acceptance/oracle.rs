use std::time::Instant;

use vqstyle::guidance::LikelihoodTable;
use vqstyle::prior::{exact_sequence_distribution, train_markov_prior, ContextOffset};
use vqstyle::rng::{derive_seed, Stream};
use vqstyle::sampler::{batch_sample, SamplingConfig};
use vqstyle::{CategoricalDistribution, GridShape, Scene, TokenGrid};

use crate::Outcome;

const PRIORS: u64 = 5;
const SAMPLES: usize = 200_000;
const TOLERANCE: f64 = 0.02;
const BUDGET_SECS: f64 = 60.0;

pub fn run() -> Vec<Outcome> {
    let start = Instant::now();
    let shape = GridShape::new(2, 2).unwrap();
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    for p in 0..PRIORS {
        let mut s = Stream::new(derive_seed(0x0acc, p));
        let corpus: Vec<Scene> = (0..4 + s.next_below(8))
            .map(|_| {
                let t = (0..4).map(|_| s.next_below(3) as u32).collect();
                Scene::unlabeled(TokenGrid::new(2, 2, 3, t).unwrap())
            })
            .collect();
        let alpha = 0.1 + s.next_f64();
        let prior = train_markov_prior(&corpus, ContextOffset::default_template(), false, alpha).unwrap();
        let dist = |s: &mut Stream| {
            let w: Vec<f64> = (0..3).map(|_| 0.05 + s.next_f64()).collect();
            CategoricalDistribution::normalize(&w).unwrap()
        };
        let (style, data) = (dist(&mut s), dist(&mut s));
        for lambda in [None, Some(1.0), Some(2.0)] {
            let table = lambda.map(|l| LikelihoodTable::from_global(&style, &data, l).unwrap());
            let exact = exact_sequence_distribution(&prior, 2, 2, None, table.as_ref()).unwrap();
            let mut cfg = SamplingConfig::with_seed(s.next_u64());
            if let Some(t) = table {
                cfg = cfg.guided(t);
            }
            let grids = batch_sample(&prior, shape, None, &cfg, SAMPLES).unwrap();
            let mut counts = vec![0u64; exact.len()];
            for g in &grids {
                counts[exact.index_of(g.tokens()).unwrap()] += 1;
            }
            let tv = counts
                .iter()
                .zip(exact.probs())
                .map(|(&c, &q)| (c as f64 / SAMPLES as f64 - q).abs())
                .sum::<f64>()
                / 2.0;
            worst = worst.max(tv);
            runs += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    vec![Outcome::new(
        worst <= TOLERANCE && secs < BUDGET_SECS,
        format!(
            "criterion 2: sampler vs exact enumeration, {runs} runs x {SAMPLES} samples, worst TV {worst:.4} <= {TOLERANCE} ({secs:.1}s < {BUDGET_SECS}s)"
        ),
    )]
}
