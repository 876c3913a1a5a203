use std::time::Instant;

use vqstyle::distributions::{
    average_distributions, histogram_from_grid, monte_carlo_dataset_distribution, Weighting,
    DEFAULT_SMOOTHING,
};
use vqstyle::metrics::total_variation;
use vqstyle::rng::derive_seed;
use vqstyle::{CategoricalDistribution, TokenGrid};

use crate::{median, Outcome};

const BUDGET_SECS: f64 = 30.0;

fn corpus() -> Vec<TokenGrid> {
    let rows: [[u32; 16]; 4] = [
        [0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3],
        [4, 4, 4, 4, 4, 4, 4, 4, 5, 5, 5, 5, 6, 6, 7, 7],
        [0, 1, 2, 3, 4, 5, 6, 7, 0, 1, 2, 3, 4, 5, 6, 7],
        [7, 7, 7, 7, 7, 7, 7, 7, 7, 7, 7, 7, 0, 0, 0, 2],
    ];
    rows.iter()
        .map(|r| TokenGrid::new(4, 4, 8, r.to_vec()).unwrap())
        .collect()
}

pub fn run() -> Vec<Outcome> {
    let start = Instant::now();
    let grids = corpus();
    let per_grid: Vec<CategoricalDistribution> = grids
        .iter()
        .map(|g| histogram_from_grid(g, DEFAULT_SMOOTHING).unwrap())
        .collect();
    let exact = average_distributions(&per_grid, Weighting::Uniform).unwrap();

    let mut medians = Vec::new();
    for (i, k) in [10usize, 100, 1000].into_iter().enumerate() {
        let tvs: Vec<f64> = (0..200)
            .map(|s| {
                let est = monte_carlo_dataset_distribution(grids.as_slice(), k, DEFAULT_SMOOTHING, derive_seed(i as u64, s))
                    .unwrap();
                total_variation(&est, &exact).unwrap()
            })
            .collect();
        medians.push(median(&tvs));
    }
    let monotone = medians.windows(2).all(|w| w[1] < w[0]);

    let mut mean = vec![0.0; exact.codebook_size()];
    let runs = 1000;
    for s in 0..runs {
        let est = monte_carlo_dataset_distribution(grids.as_slice(), 10, DEFAULT_SMOOTHING, derive_seed(99, s)).unwrap();
        for (m, p) in mean.iter_mut().zip(est.probs()) {
            *m += p / runs as f64;
        }
    }
    let mean_tv = total_variation(&CategoricalDistribution::normalize(&mean).unwrap(), &exact).unwrap();
    let secs = start.elapsed().as_secs_f64();
    vec![Outcome::new(
        monotone && medians[2] <= 0.02 && mean_tv <= 0.01 && secs < BUDGET_SECS,
        format!(
            "criterion 6: median TV at K=10/100/1000 = {:.4}/{:.4}/{:.4} (decreasing, last <= 0.02); mean of {runs} K=10 estimates TV {mean_tv:.4} (<= 0.01) ({secs:.1}s < {BUDGET_SECS}s)",
            medians[0], medians[1], medians[2]
        ),
    )]
}
