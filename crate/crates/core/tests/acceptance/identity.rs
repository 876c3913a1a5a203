use std::time::Instant;

use vqstyle::distributions::RegionalDistributions;
use vqstyle::guidance::{
    regional_likelihoods, spatial_likelihoods, style_likelihood, LikelihoodTable,
};
use vqstyle::distributions::SpatialDistributions;
use vqstyle::prior::{train_markov_prior, ContextOffset};
use vqstyle::rng::Stream;
use vqstyle::sampler::{batch_sample, SamplingConfig};
use vqstyle::{CategoricalDistribution, GridShape, Scene, SemanticGrid, TokenGrid};

use crate::Outcome;

const CONFIGS: usize = 100;
const BATCH: usize = 5;
const BUDGET_SECS: f64 = 10.0;

fn random_dist(s: &mut Stream, z: usize) -> CategoricalDistribution {
    let w: Vec<f64> = (0..z).map(|_| 0.05 + s.next_f64()).collect();
    CategoricalDistribution::normalize(&w).unwrap()
}

fn random_semantics(s: &mut Stream, h: usize, w: usize, labels: usize) -> SemanticGrid {
    let l = (0..h * w).map(|_| s.next_below(labels as u64) as u32).collect();
    SemanticGrid::new(h, w, labels, l).unwrap()
}

/// A random guidance table that must act as the identity: either the style
/// statistics equal the dataset statistics, or the exponent is zero.
fn identity_table(s: &mut Stream, z: usize, shape: GridShape, labels: usize) -> LikelihoodTable {
    let zero_exponent = s.next_below(2) == 0;
    let lambda = if zero_exponent { 0.0 } else { [0.5, 1.0, 2.0, 7.0][s.next_below(4) as usize] };
    let pair = |s: &mut Stream| {
        let d = random_dist(s, z);
        let st = if zero_exponent { random_dist(s, z) } else { d.clone() };
        (st, d)
    };
    let (sg, dg) = pair(s);
    match s.next_below(3) {
        0 => LikelihoodTable::global(style_likelihood(&sg, &dg, lambda).unwrap(), lambda).unwrap(),
        1 => {
            let (sv, dv): (Vec<_>, Vec<_>) = (0..labels).map(|_| pair(s)).map(|(a, b)| (Some(a), Some(b))).unzip();
            let mass = vec![1.0; labels];
            let sr = RegionalDistributions::new(sv, mass.clone()).unwrap();
            let dr = RegionalDistributions::new(dv, mass).unwrap();
            regional_likelihoods(&sr, &dr, &sg, &dg, lambda).unwrap()
        }
        _ => {
            let rows = 1 + s.next_below(shape.height as u64) as usize;
            let cols = 1 + s.next_below(shape.width as u64) as usize;
            let mut sc = Vec::new();
            let mut dc = Vec::new();
            for _ in 0..rows {
                let (a, b): (Vec<_>, Vec<_>) = (0..cols).map(|_| pair(s)).unzip();
                sc.push(a);
                dc.push(b);
            }
            let ss = SpatialDistributions::new(rows, cols, sc).unwrap();
            let ds = SpatialDistributions::new(rows, cols, dc).unwrap();
            spatial_likelihoods(&ss, &ds, &sg, &dg, lambda).unwrap()
        }
    }
}

pub fn run() -> Vec<Outcome> {
    let start = Instant::now();
    let mut s = Stream::new(0x1d);
    let mut mismatches = 0;
    for _ in 0..CONFIGS {
        let z = 2 + s.next_below(5) as usize;
        let h = 1 + s.next_below(5) as usize;
        let w = 1 + s.next_below(5) as usize;
        let labels = 1 + s.next_below(3) as usize;
        let shape = GridShape::new(h, w).unwrap();
        let conditional = s.next_below(2) == 0;
        let corpus: Vec<Scene> = (0..3 + s.next_below(4))
            .map(|_| {
                let t = (0..h * w).map(|_| s.next_below(z as u64) as u32).collect();
                let sem = random_semantics(&mut s, h, w, labels);
                Scene::new(TokenGrid::new(h, w, z, t).unwrap(), Some(sem)).unwrap()
            })
            .collect();
        let templates = [
            vec![ContextOffset::LEFT],
            ContextOffset::default_template(),
            ContextOffset::ALLOWED.to_vec(),
        ];
        let template = templates[s.next_below(3) as usize].clone();
        let alpha = [0.0, 0.5, 1.0][s.next_below(3) as usize];
        let prior = train_markov_prior(&corpus, template, conditional, alpha).unwrap();
        let semantics = random_semantics(&mut s, h, w, labels);
        let table = identity_table(&mut s, z, shape, labels);
        let base = SamplingConfig {
            temperature: [1.0, 0.7, 1.5][s.next_below(3) as usize],
            top_k: (s.next_below(2) == 0).then(|| 1 + s.next_below(z as u64) as usize),
            seed: s.next_u64(),
            guidance: None,
        };
        let unguided = batch_sample(&prior, shape, Some(&semantics), &base, BATCH).unwrap();
        let guided = batch_sample(&prior, shape, Some(&semantics), &base.clone().guided(table), BATCH).unwrap();
        if guided != unguided {
            mismatches += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    vec![Outcome::new(
        mismatches == 0 && secs < BUDGET_SECS,
        format!(
            "criterion 1: identity guidance, {CONFIGS} configs x {BATCH} samples, {mismatches} differing (exact match required; {secs:.1}s < {BUDGET_SECS}s)"
        ),
    )]
}
