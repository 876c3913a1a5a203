use std::time::Instant;

use vqstyle::distributions::{
    monte_carlo_dataset_distribution, monte_carlo_regional_distribution, RegionalDistributions,
    DEFAULT_MONTE_CARLO_K, DEFAULT_SMOOTHING,
};
use vqstyle::guidance::{style_likelihood, LikelihoodTable, LikelihoodVector};
use vqstyle::metrics::{
    classify_style, pooled_kl, pooled_regional_kl, relative_reduction, total_variation, MatchMode,
    StyleReference,
};
use vqstyle::distributions::histogram_by_region_pooled;
use vqstyle::prior::{train_markov_prior, ContextOffset};
use vqstyle::rng::{derive_seed, Stream};
use vqstyle::sampler::{batch_sample, SamplingConfig};
use vqstyle::world::{build_benchmark, Benchmark, BenchmarkConfig};
use vqstyle::{Scene, TokenGrid};

use crate::{median, Outcome};

const REPS: u64 = 20;
const SAMPLES: usize = 50;
const SEED: u64 = 0x1a4d;
const BUDGET_SECS: f64 = 300.0;

fn references(bench: &Benchmark) -> Vec<StyleReference> {
    bench
        .styles
        .iter()
        .zip(&bench.exemplars)
        .map(|(style, ex)| {
            let scenes: Vec<Scene> = ex.iter().map(|e| e.scene.clone()).collect();
            StyleReference::from_scenes(style.name.clone(), &scenes, DEFAULT_SMOOTHING).unwrap()
        })
        .collect()
}

fn unlabeled(grids: Vec<TokenGrid>) -> Vec<Scene> {
    grids.into_iter().map(Scene::unlabeled).collect()
}

pub fn run() -> Vec<Outcome> {
    let start = Instant::now();
    let bench = build_benchmark(&BenchmarkConfig::landscape_2x4()).unwrap();
    let shape = bench.config.shape().unwrap();
    let corpus = bench.corpus();
    let refs = references(&bench);
    let mut out = global_guidance(&bench, &corpus, &refs);
    let secs = start.elapsed().as_secs_f64();
    out[0].passed &= secs < BUDGET_SECS;
    out[0].detail.push_str(&format!(" ({secs:.1}s < {BUDGET_SECS}s)"));
    out.extend(regional_guidance(&bench, shape, &corpus, &refs));
    out
}

/// Criteria 3 and 4: one global likelihood per target style.
fn global_guidance(bench: &Benchmark, corpus: &[Scene], refs: &[StyleReference]) -> Vec<Outcome> {
    let shape = bench.config.shape().unwrap();
    let prior = train_markov_prior(corpus, ContextOffset::default_template(), false, DEFAULT_SMOOTHING).unwrap();
    let dataset = monte_carlo_dataset_distribution(corpus, DEFAULT_MONTE_CARLO_K, DEFAULT_SMOOTHING, SEED).unwrap();
    let mixture_share = 1.0 / bench.styles.len() as f64;

    let mut wins = 0;
    let mut reductions = Vec::new();
    let (mut guided_hits, mut unguided_hits, mut total) = (0usize, 0usize, 0usize);
    for rep in 0..REPS {
        let target = rep as usize % refs.len();
        let table = LikelihoodTable::from_global(&refs[target].global, &dataset, 1.0).unwrap();
        let cfg = SamplingConfig::with_seed(derive_seed(SEED, rep));
        let unguided = batch_sample(&prior, shape, None, &cfg, SAMPLES).unwrap();
        let guided = batch_sample(&prior, shape, None, &cfg.clone().guided(table), SAMPLES).unwrap();
        let kl_g = pooled_kl(&guided, &refs[target].global).unwrap();
        let kl_u = pooled_kl(&unguided, &refs[target].global).unwrap();
        if kl_g < kl_u {
            wins += 1;
        }
        reductions.push(relative_reduction(kl_g, kl_u));
        for g in unlabeled(guided) {
            guided_hits += usize::from(classify_style(&g, refs, MatchMode::Global).unwrap() == target);
        }
        for u in unlabeled(unguided) {
            unguided_hits += usize::from(classify_style(&u, refs, MatchMode::Global).unwrap() == target);
        }
        total += SAMPLES;
    }
    let med = median(&reductions);
    let guided_rate = guided_hits as f64 / total as f64;
    let unguided_rate = unguided_hits as f64 / total as f64;
    vec![
        Outcome::new(
            wins >= 19 && med >= 0.5,
            format!(
                "criterion 3: guided pooled KL below unguided in {wins}/{REPS} reps (>= 19), median reduction {med:.3} (>= 0.5)"
            ),
        ),
        Outcome::new(
            guided_rate >= 0.9 && (unguided_rate - mixture_share).abs() <= 0.15,
            format!(
                "criterion 4: style match {guided_rate:.3} guided (>= 0.9), {unguided_rate:.3} unguided (within 0.15 of {mixture_share:.2})"
            ),
        ),
    ]
}

/// Criterion 5: label 0 styled after one style, label 1 after another.
fn regional_guidance(
    bench: &Benchmark,
    shape: vqstyle::GridShape,
    corpus: &[Scene],
    refs: &[StyleReference],
) -> Vec<Outcome> {
    let start = Instant::now();
    let prior = train_markov_prior(corpus, ContextOffset::default_template(), true, DEFAULT_SMOOTHING).unwrap();
    let dataset =
        monte_carlo_regional_distribution(corpus, DEFAULT_MONTE_CARLO_K, DEFAULT_SMOOTHING, SEED).unwrap();
    let label_ref = |style: usize, label: usize| refs[style].regional.as_ref().unwrap().get(label).unwrap().clone();
    let identity = LikelihoodVector::identity(bench.config.codebook_size).unwrap();
    let layout = &bench.config.layouts[0];

    let (mut red0, mut red1, mut leak) = (Vec::new(), Vec::new(), Vec::new());
    for rep in 0..REPS {
        let a = rep as usize % refs.len();
        let b = refs.len() - 1 - a;
        let (a0, b1) = (label_ref(a, 0), label_ref(b, 1));
        let lik0 = style_likelihood(&a0, dataset.get(0).unwrap(), 1.0).unwrap();
        let lik1 = style_likelihood(&b1, dataset.get(1).unwrap(), 1.0).unwrap();
        let both = LikelihoodTable::regional(identity.clone(), vec![Some(lik0.clone()), Some(lik1)], 1.0).unwrap();
        let sky_only = LikelihoodTable::regional(identity.clone(), vec![Some(lik0), None], 1.0).unwrap();

        let seed = derive_seed(SEED ^ 0x5e, rep);
        let sem = layout.generate(shape, 2, &mut Stream::new(seed)).unwrap();
        let cfg = SamplingConfig::with_seed(seed);
        let label = |grids: Vec<TokenGrid>| -> Vec<Scene> {
            grids.into_iter().map(|g| Scene::new(g, Some(sem.clone())).unwrap()).collect()
        };
        let unguided = label(batch_sample(&prior, shape, Some(&sem), &cfg, SAMPLES).unwrap());
        let guided = label(batch_sample(&prior, shape, Some(&sem), &cfg.clone().guided(both), SAMPLES).unwrap());
        let sky = label(batch_sample(&prior, shape, Some(&sem), &cfg.clone().guided(sky_only), SAMPLES).unwrap());

        let target = StyleReference {
            name: format!("{}+{}", refs[a].name, refs[b].name),
            global: refs[a].global.clone(),
            regional: Some(RegionalDistributions::new(vec![Some(a0), Some(b1)], vec![1.0, 1.0]).unwrap()),
        };
        let kg = pooled_regional_kl(&guided, &target).unwrap();
        let ku = pooled_regional_kl(&unguided, &target).unwrap();
        red0.push(relative_reduction(kg[0].unwrap(), ku[0].unwrap()));
        red1.push(relative_reduction(kg[1].unwrap(), ku[1].unwrap()));

        let ground = |scenes: &[Scene]| {
            let pairs = scenes.iter().map(|s| (&s.tokens, s.semantics.as_ref().unwrap()));
            histogram_by_region_pooled(pairs, 0.0).unwrap().get(1).unwrap().clone()
        };
        leak.push(total_variation(&ground(&sky), &ground(&unguided)).unwrap());
    }
    let (m0, m1) = (median(&red0), median(&red1));
    let worst_leak = leak.iter().copied().fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    vec![
        Outcome::new(
            m0 >= 0.5 && m1 >= 0.5,
            format!(
                "criterion 5a: regional guidance median per-label KL reduction {m0:.3} / {m1:.3} (each >= 0.5) over {REPS} reps ({secs:.1}s)"
            ),
        ),
        Outcome::new(
            worst_leak <= 0.1,
            format!(
                "criterion 5b: label-0-only guidance moves label-1 histogram by TV {worst_leak:.3} at worst over {REPS} reps (<= 0.1), median {:.3}",
                median(&leak)
            ),
        ),
    ]
}
