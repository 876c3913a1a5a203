use std::sync::atomic::{AtomicU32, Ordering};
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestError, TestRng, TestRunner};

use vqstyle::categorical::CategoricalDistribution;
use vqstyle::codec;
use vqstyle::distributions::{
    histogram_by_cell, histogram_by_region, histogram_from_grid, monte_carlo_dataset_distribution,
    monte_carlo_indices, average_distributions, Weighting,
};
use vqstyle::guidance::{rebalance_prior, style_likelihood, LikelihoodTable, LikelihoodVector};
use vqstyle::metrics::{classify_style, kl_divergence, total_variation, MatchMode, StyleReference};
use vqstyle::prior::{
    exact_sequence_distribution, train_markov_prior, ContextOffset, MarkovGridPrior, PriorModel,
};
use vqstyle::rng::derive_seed;
use vqstyle::sampler::{batch_sample, batch_seed, sample_grid, step_posterior, SamplingConfig};
use vqstyle::{GridShape, Scene, SemanticGrid, TokenGrid};

use crate::Outcome;

const CASES: u32 = 1000;
const BUDGET_SECS: f64 = 120.0;
const TOL: f64 = 1e-12;

fn check<S: Strategy>(
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> (String, Option<String>) {
    let config = Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    };
    let rng = TestRng::deterministic_rng(RngAlgorithm::ChaCha);
    let mut runner = TestRunner::new_with_rng(config, rng);
    let executed = AtomicU32::new(0);
    let counted = |v| {
        executed.fetch_add(1, Ordering::Relaxed);
        test(v)
    };
    let failure = match runner.run(&strategy, counted) {
        Ok(()) => None,
        Err(TestError::Fail(reason, value)) => Some(format!("{reason} for {value:?}")),
        Err(TestError::Abort(reason)) => Some(format!("aborted: {reason}")),
    };
    let executed = executed.into_inner();
    let failure = failure.or_else(|| {
        (executed < CASES).then(|| format!("only {executed} cases executed"))
    });
    (name.to_string(), failure)
}

fn dist(z: usize) -> impl Strategy<Value = CategoricalDistribution> {
    prop::collection::vec(0.01f64..1.0, z).prop_map(|w| CategoricalDistribution::normalize(&w).unwrap())
}

fn sized<T: std::fmt::Debug>(f: impl Fn(usize) -> BoxedStrategy<T>) -> impl Strategy<Value = T> {
    (2usize..9).prop_flat_map(f)
}

fn close(a: &[f64], b: &[f64], tol: f64) -> Result<(), TestCaseError> {
    prop_assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        prop_assert!((x - y).abs() <= tol, "{:?} vs {:?}", a, b);
    }
    Ok(())
}

fn grid(h: usize, w: usize, z: usize) -> impl Strategy<Value = TokenGrid> {
    prop::collection::vec(0..z as u32, h * w).prop_map(move |t| TokenGrid::new(h, w, z, t).unwrap())
}

fn scene(h: usize, w: usize, z: usize, labels: usize) -> impl Strategy<Value = Scene> {
    (grid(h, w, z), prop::collection::vec(0..labels as u32, h * w)).prop_map(move |(g, l)| {
        let sem = SemanticGrid::new(h, w, labels, l).unwrap();
        Scene::new(g, Some(sem)).unwrap()
    })
}

/// A small prior trained on random scenes, plus its shape parameters.
#[derive(Debug, Clone)]
struct Instance {
    prior: MarkovGridPrior,
    shape: GridShape,
    semantics: SemanticGrid,
    z: usize,
}

fn instance(max_states: u32) -> impl Strategy<Value = Instance> {
    (2usize..4, 1usize..3, 1usize..4, 1usize..3, any::<bool>(), 0usize..3)
        .prop_filter("state bound", move |&(z, h, w, _, _, _)| (z as u32).pow((h * w) as u32) <= max_states)
        .prop_flat_map(|(z, h, w, labels, conditional, tpl)| {
            (
                prop::collection::vec(scene(h, w, z, labels), 1..5),
                scene(h, w, z, labels),
                Just((z, h, w, conditional, tpl)),
                prop_oneof![Just(0.0), Just(0.5), 0.01f64..2.0],
            )
        })
        .prop_map(|(corpus, query, (z, h, w, conditional, tpl), alpha)| {
            let template = match tpl {
                0 => vec![ContextOffset::LEFT],
                1 => ContextOffset::default_template(),
                _ => ContextOffset::ALLOWED.to_vec(),
            };
            Instance {
                prior: train_markov_prior(&corpus, template, conditional, alpha).unwrap(),
                shape: GridShape::new(h, w).unwrap(),
                semantics: query.semantics.unwrap(),
                z,
            }
        })
}

pub fn run() -> Vec<Outcome> {
    let start = Instant::now();
    let mut results = vec![
        check("normalization", prop::collection::vec(0.0f64..10.0, 2..20), |w| {
            prop_assume!(w.iter().sum::<f64>() > 0.0);
            let d = CategoricalDistribution::normalize(&w).unwrap();
            prop_assert!((d.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!(d.probs().iter().all(|p| (0.0..=1.0).contains(p)));
            Ok(())
        }),
        check("likelihood canonical scale", sized(|z| (dist(z), dist(z), 0.0f64..4.0).boxed()), |(s, d, l)| {
            let v = style_likelihood(&s, &d, l).unwrap();
            let max = v.weights().iter().copied().fold(0.0, f64::max);
            prop_assert_eq!(max, 1.0);
            prop_assert!(v.weights().iter().all(|&w| w > 0.0 && w <= 1.0));
            Ok(())
        }),
        check(
            "rebalance scale invariance",
            sized(|z| (dist(z), prop::collection::vec(0.01f64..1.0, z), 1e-3f64..1e3).boxed()),
            |(prior, w, c)| {
                let a = rebalance_prior(&prior, &LikelihoodVector::new(w.clone()).unwrap()).unwrap();
                let scaled: Vec<f64> = w.iter().map(|x| x * c).collect();
                let b = rebalance_prior(&prior, &LikelihoodVector::new(scaled).unwrap()).unwrap();
                close(a.probs(), b.probs(), TOL)
            },
        ),
        check(
            "monotone influence",
            sized(|z| (dist(z), prop::collection::vec(0.01f64..1.0, z), 0..z, 1.0f64..10.0).boxed()),
            |(prior, w, t, factor)| {
                let before = rebalance_prior(&prior, &LikelihoodVector::new(w.clone()).unwrap()).unwrap();
                let mut up = w.clone();
                up[t] *= factor;
                let after = rebalance_prior(&prior, &LikelihoodVector::new(up).unwrap()).unwrap();
                prop_assert!(after.prob(t) >= before.prob(t) - TOL);
                if factor > 1.0 + 1e-6 && prior.prob(t) > 0.0 && prior.prob(t) < 1.0 {
                    prop_assert!(after.prob(t) > before.prob(t));
                }
                Ok(())
            },
        ),
        check(
            "exponent continuity",
            sized(|z| (dist(z), dist(z), dist(z)).boxed()),
            |(prior, s, d)| {
                for l in [0.0, 0.5, 1.0, 2.0] {
                    let post = rebalance_prior(&prior, &style_likelihood(&s, &d, l).unwrap()).unwrap();
                    let direct: Vec<f64> = (0..prior.codebook_size())
                        .map(|t| prior.prob(t) * (s.prob(t) / d.prob(t)).powf(l))
                        .collect();
                    let direct = CategoricalDistribution::normalize(&direct).unwrap();
                    close(post.probs(), direct.probs(), TOL)?;
                }
                Ok(())
            },
        ),
        check(
            "permutation equivariance",
            sized(|z| (dist(z), dist(z), dist(z), Just((0..z).collect::<Vec<_>>()).prop_shuffle()).boxed()),
            |(prior, s, d, perm)| {
                let post = rebalance_prior(&prior, &style_likelihood(&s, &d, 1.0).unwrap()).unwrap();
                let pp = rebalance_prior(
                    &prior.permuted(&perm).unwrap(),
                    &style_likelihood(&s.permuted(&perm).unwrap(), &d.permuted(&perm).unwrap(), 1.0).unwrap(),
                )
                .unwrap();
                close(pp.probs(), post.permuted(&perm).unwrap().probs(), TOL)
            },
        ),
        check(
            "support preservation",
            sized(|z| {
                (
                    prop::collection::vec(prop_oneof![Just(0.0), 0.01f64..1.0], z),
                    prop::collection::vec(1e-6f64..1.0, z),
                )
                    .boxed()
            }),
            |(raw, w)| {
                prop_assume!(raw.iter().sum::<f64>() > 0.0);
                let prior = CategoricalDistribution::normalize(&raw).unwrap();
                let post = rebalance_prior(&prior, &LikelihoodVector::new(w).unwrap()).unwrap();
                for t in 0..raw.len() {
                    prop_assert_eq!(post.prob(t) == 0.0, prior.prob(t) == 0.0);
                }
                Ok(())
            },
        ),
        check("identity guidance", sized(|z| (dist(z), dist(z), 0.0f64..5.0).boxed()), |(prior, d, l)| {
            let post = rebalance_prior(&prior, &style_likelihood(&d, &d, l).unwrap()).unwrap();
            close(post.probs(), prior.probs(), TOL)
        }),
        check(
            "region aggregation",
            (1usize..6, 1usize..6, 2usize..6, 1usize..4).prop_flat_map(|(h, w, z, l)| scene(h, w, z, l)),
            |s| {
                let regional = histogram_by_region(&s.tokens, s.semantics.as_ref().unwrap(), 0.0).unwrap();
                let global = histogram_from_grid(&s.tokens, 0.0).unwrap();
                close(regional.combined().unwrap().probs(), global.probs(), TOL)
            },
        ),
        check(
            "cell refinement",
            (1usize..4, 1usize..4, 1usize..3, 1usize..3, 2usize..5).prop_flat_map(|(r, c, mh, mw, z)| {
                let (h, w) = (2 * r * mh, 2 * c * mw);
                (prop::collection::vec(grid(h, w, z), 1..4), Just((r, c)))
            }),
            |(grids, (r, c))| {
                let coarse = histogram_by_cell(&grids, r, c, 0.0).unwrap();
                let fine = histogram_by_cell(&grids, 2 * r, 2 * c, 0.0).unwrap();
                let global = vqstyle::distributions::histogram_from_grids(&grids, 0.0).unwrap();
                close(coarse.combined().unwrap().probs(), global.probs(), TOL)?;
                close(fine.combined().unwrap().probs(), global.probs(), TOL)?;
                for cr in 0..r {
                    for cc in 0..c {
                        let parts: Vec<&CategoricalDistribution> = (0..2)
                            .flat_map(|i| (0..2).map(move |j| (2 * cr + i, 2 * cc + j)))
                            .map(|(i, j)| fine.cell(i, j))
                            .collect();
                        let mass: f64 = parts.iter().map(|d| d.source_mass()).sum();
                        let merged: Vec<f64> = (0..global.codebook_size())
                            .map(|t| parts.iter().map(|d| d.prob(t) * d.source_mass()).sum::<f64>() / mass)
                            .collect();
                        close(coarse.cell(cr, cc).probs(), &merged, TOL)?;
                    }
                }
                Ok(())
            },
        ),
        check(
            "Monte-Carlo estimate is the mean of drawn histograms",
            (1usize..6, 1usize..30, any::<u64>(), 2usize..5)
                .prop_flat_map(|(n, k, seed, z)| (prop::collection::vec(grid(2, 3, z), n), Just(k), Just(seed))),
            |(grids, k, seed)| {
                let est = monte_carlo_dataset_distribution(grids.as_slice(), k, 0.5, seed).unwrap();
                let drawn: Vec<CategoricalDistribution> = monte_carlo_indices(grids.len(), k, seed)
                    .unwrap()
                    .into_iter()
                    .map(|i| histogram_from_grid(&grids[i], 0.5).unwrap())
                    .collect();
                let mean = average_distributions(&drawn, Weighting::Uniform).unwrap();
                close(est.probs(), mean.probs(), TOL)
            },
        ),
        check("KL non-negativity and identity", sized(|z| (dist(z), dist(z)).boxed()), |(p, q)| {
            let kl = kl_divergence(&p, &q).unwrap();
            prop_assert!(kl >= 0.0);
            prop_assert!(kl_divergence(&p, &p).unwrap().abs() <= TOL);
            if total_variation(&p, &q).unwrap() > 1e-6 {
                prop_assert!(kl > 0.0);
            }
            Ok(())
        }),
        check("TV metric axioms", sized(|z| (dist(z), dist(z), dist(z)).boxed()), |(p, q, r)| {
            let pq = total_variation(&p, &q).unwrap();
            prop_assert!((0.0..=1.0).contains(&pq));
            prop_assert_eq!(pq, total_variation(&q, &p).unwrap());
            prop_assert_eq!(total_variation(&p, &p).unwrap(), 0.0);
            let pr = total_variation(&p, &r).unwrap();
            let rq = total_variation(&r, &q).unwrap();
            prop_assert!(pq <= pr + rq + TOL);
            Ok(())
        }),
        check("exact enumeration sums to one", (instance(729), 0.0f64..3.0, any::<u64>()), |(inst, l, seed)| {
            let mut s = vqstyle::rng::Stream::new(seed);
            let w: Vec<f64> = (0..inst.z).map(|_| 0.01 + s.next_f64()).collect();
            let table = LikelihoodTable::global(LikelihoodVector::new(w).unwrap(), l).unwrap();
            let exact = exact_sequence_distribution(
                &inst.prior,
                inst.shape.height,
                inst.shape.width,
                Some(&inst.semantics),
                Some(&table),
            )
            .unwrap();
            prop_assert!((exact.total() - 1.0).abs() <= 1e-9);
            Ok(())
        }),
        check("sampling determinism", (instance(u32::MAX), any::<u64>()), |(inst, seed)| {
            let cfg = SamplingConfig::with_seed(seed);
            let a = sample_grid(&inst.prior, inst.shape, Some(&inst.semantics), &cfg).unwrap();
            let b = sample_grid(&inst.prior, inst.shape, Some(&inst.semantics), &cfg).unwrap();
            prop_assert_eq!(a, b);
            Ok(())
        }),
        check("seed splitting", (instance(u32::MAX), any::<u64>(), 1usize..6), |(inst, seed, n)| {
            let cfg = SamplingConfig::with_seed(seed);
            let batch = batch_sample(&inst.prior, inst.shape, Some(&inst.semantics), &cfg, n).unwrap();
            for (i, g) in batch.iter().enumerate() {
                let one = SamplingConfig::with_seed(batch_seed(seed, i));
                prop_assert_eq!(&sample_grid(&inst.prior, inst.shape, Some(&inst.semantics), &one).unwrap(), g);
                for j in 0..i {
                    prop_assert_ne!(derive_seed(seed, i as u64), derive_seed(seed, j as u64));
                }
            }
            Ok(())
        }),
        check(
            "context locality",
            (instance(u32::MAX), any::<u64>(), any::<u64>()),
            |(inst, a, b)| {
                let shape = inst.shape;
                let i = (a % shape.len() as u64) as usize;
                let (row, col) = shape.position(i);
                let mut s = vqstyle::rng::Stream::new(b);
                let prefix: Vec<u32> = (0..i).map(|_| s.next_below(inst.z as u64) as u32).collect();
                let base = inst.prior.next_distribution(&prefix, shape, (row, col), Some(&inst.semantics)).unwrap();
                let reach: Vec<usize> = inst
                    .prior
                    .context()
                    .iter()
                    .filter_map(|o| {
                        let (r, c) = (row as i64 + o.dr as i64, col as i64 + o.dc as i64);
                        (r >= 0 && c >= 0 && (c as usize) < shape.width).then(|| shape.index(r as usize, c as usize))
                    })
                    .collect();
                let mut changed = prefix.clone();
                for (k, t) in changed.iter_mut().enumerate() {
                    if !reach.contains(&k) {
                        *t = s.next_below(inst.z as u64) as u32;
                    }
                }
                let other = inst.prior.next_distribution(&changed, shape, (row, col), Some(&inst.semantics)).unwrap();
                prop_assert_eq!(base, other);
                Ok(())
            },
        ),
        check(
            "step posterior without truncation is the rebalanced prior",
            sized(|z| (dist(z), prop::collection::vec(0.01f64..1.0, z)).boxed()),
            |(prior, w)| {
                let v = LikelihoodVector::new(w).unwrap();
                let table = LikelihoodTable::global(v.clone(), 1.0).unwrap();
                let cfg = SamplingConfig::default().guided(table);
                let shape = GridShape::new(1, 1).unwrap();
                let step = step_posterior(&prior, &cfg, shape, (0, 0), None).unwrap();
                close(step.probs(), rebalance_prior(&prior, &v).unwrap().probs(), TOL)
            },
        ),
        check(
            "style match permutation invariance",
            (2usize..7).prop_flat_map(|z| {
                (
                    prop::collection::vec(dist(z), 2..5),
                    grid(3, 3, z),
                    Just((0..z).collect::<Vec<_>>()).prop_shuffle(),
                )
            }),
            |(refs, g, perm)| {
                let refs: Vec<StyleReference> = refs
                    .into_iter()
                    .enumerate()
                    .map(|(i, d)| StyleReference {
                        name: format!("s{i}"),
                        global: d,
                        regional: None,
                    })
                    .collect();
                let permuted: Vec<StyleReference> = refs
                    .iter()
                    .map(|r| StyleReference {
                        global: r.global.permuted(&perm).unwrap(),
                        ..r.clone()
                    })
                    .collect();
                let s = Scene::unlabeled(g.clone());
                let ps = Scene::unlabeled(g.map_tokens(|t| perm[t as usize] as u32).unwrap());
                prop_assert_eq!(
                    classify_style(&s, &refs, MatchMode::Global).unwrap(),
                    classify_style(&ps, &permuted, MatchMode::Global).unwrap()
                );
                Ok(())
            },
        ),
        check("grid codec round trip", (1usize..8, 1usize..8, 2usize..300).prop_flat_map(|(h, w, z)| grid(h, w, z)), |g| {
            prop_assert_eq!(codec::decode_token_grid(&codec::encode_token_grid(&g)).unwrap(), g);
            Ok(())
        }),
        check("distribution JSON round trip", sized(|z| dist(z).boxed()), |d| {
            let json = serde_json::to_string(&d).unwrap();
            let back: CategoricalDistribution = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(back, d);
            Ok(())
        }),
    ];
    let secs = start.elapsed().as_secs_f64();
    let total = results.len();
    let failures: Vec<String> = results
        .iter_mut()
        .filter_map(|(name, f)| f.take().map(|f| format!("{name}: {f}")))
        .collect();
    let mut out = vec![Outcome::new(
        failures.is_empty() && secs < BUDGET_SECS,
        format!(
            "criterion 8: {} of {total} properties hold over {CASES} cases each ({secs:.1}s < {BUDGET_SECS}s)",
            total - failures.len()
        ),
    )];
    for f in failures {
        out.push(Outcome::new(false, format!("criterion 8 property {f}")));
    }
    out
}
