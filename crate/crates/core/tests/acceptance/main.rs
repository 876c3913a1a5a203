//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

mod estimator;
mod identity;
mod landscape;
mod oracle;
mod properties;


pub struct Outcome {
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    pub fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Criteria ids covered by one run function.
type Group = (&'static [u32], fn() -> Vec<Outcome>);

fn main() {
    let filter: Option<u32> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .find_map(|a| a.parse().ok());
    let groups: [Group; 6] = [
        (&[1], identity::run),
        (&[2], oracle::run),
        (&[3, 4, 5], landscape::run),
        (&[6], estimator::run),
        (&[7], ablation::run),
        (&[8], properties::run),
    ];
    let mut failed = 0;
    for (ids, run) in groups {
        if filter.is_some_and(|f| !ids.contains(&f)) {
            continue;
        }
        let outcomes = run();
        for o in outcomes {
            if !o.passed {
                failed += 1;
            }
            let tag = if o.passed { "PASS" } else { "FAIL" };
            println!("[{tag}] {}", o.detail);
        }
    }
    if failed > 0 {
        println!("{failed} acceptance checks failed");
        std::process::exit(1);
    }
}
