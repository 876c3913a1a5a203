//! One function per subcommand.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use vqstyle::codec::{read_json, read_semantic_grid, write_json, write_semantic_grid, write_token_grid};
use vqstyle::distributions::{
    average_distributions, average_regional, average_spatial, histogram_by_cell, histogram_by_region,
    histogram_by_region_pooled, histogram_from_grid, histogram_from_grids, monte_carlo_dataset_distribution,
    monte_carlo_regional_distribution, monte_carlo_spatial_distribution, TokenStatistics, Weighting,
};
use vqstyle::guidance::table_from_statistics;
use vqstyle::metrics::{guidance_report, MatchMode, ReportOptions, StyleReference};
use vqstyle::prior::{train_markov_prior, ContextOffset, MarkovGridPrior};
use vqstyle::sampler::{batch_sample, batch_seed, SamplingConfig};
use vqstyle::world::{build_benchmark, write_benchmark, BenchmarkConfig};
use vqstyle::{Error, GridShape, Result, Scene, SemanticGrid, TokenGrid};

use crate::inputs::{
    load_corpus, load_exemplars, load_samples, GuidanceSettings, SampleEntry, SampleManifest, SampleSettings,
    SAMPLES_FILE,
};
use crate::{Command, Granularity};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::GenWorld {
            config,
            preset,
            out,
            seed,
        } => gen_world(config.as_deref(), preset.as_deref(), &out, seed.seed),
        Command::TrainPrior {
            corpus,
            out,
            context,
            conditional,
            alpha,
        } => train_prior(&corpus, &out, &context, conditional, alpha),
        Command::DatasetStats {
            corpus,
            out,
            k,
            seed,
            alpha,
            granularity,
        } => dataset_stats(&corpus, &out, k, seed.seed.unwrap_or(0), alpha, granularity),
        Command::StyleStats {
            inputs,
            out,
            alpha,
            average,
            granularity,
        } => style_stats(&inputs, &out, alpha, average, granularity),
        Command::Sample {
            model,
            out,
            style,
            dataset,
            semantics,
            height,
            width,
            n,
            seed,
            temperature,
            top_k,
            lambda,
            no_guidance,
            mode,
        } => {
            let guidance = if no_guidance {
                None
            } else {
                let style = style.ok_or_else(|| Error::Invalid("--style is required".into()))?;
                let dataset = dataset.ok_or_else(|| Error::Invalid("--dataset is required".into()))?;
                Some((style, dataset, lambda, mode))
            };
            let shape = match (height, width) {
                (Some(h), Some(w)) => Some(GridShape::new(h, w)?),
                _ => None,
            };
            let settings = SampleArgs {
                model,
                semantics,
                shape,
                n,
                seed: seed.seed.unwrap_or(0),
                temperature,
                top_k,
                guidance,
            };
            sample(&settings, &out)
        }
        Command::Evaluate {
            guided,
            unguided,
            style,
            out,
            references,
        } => evaluate(&guided, &unguided, &style, &out, &references),
    }
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn gen_world(config: Option<&Path>, preset: Option<&str>, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut cfg = match (config, preset) {
        (Some(path), _) => read_json::<BenchmarkConfig>(path)
            .map_err(|e| if e.is_io() { e } else { Error::Invalid(format!("{}: {e}", display(path))) })?,
        (None, Some(name)) => BenchmarkConfig::preset(name)?,
        (None, None) => return Err(Error::Invalid("give --config or --preset".into())),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let bench = build_benchmark(&cfg)?;
    for w in &bench.warnings {
        eprintln!("warning: {w}");
    }
    let manifest = write_benchmark(&bench, out)?;
    let exemplars: usize = bench.exemplars.iter().map(Vec::len).sum();
    println!(
        "{}: {} scenes, {} exemplars, {} styles, {}x{} grids, codebook {} -> {}",
        cfg.name,
        bench.scenes.len(),
        exemplars,
        bench.styles.len(),
        cfg.height,
        cfg.width,
        cfg.codebook_size,
        display(&manifest)
    );
    Ok(())
}

fn train_prior(corpus: &Path, out: &Path, context: &str, conditional: bool, alpha: f64) -> Result<()> {
    let template = context
        .split(',')
        .map(|name| ContextOffset::from_name(name.trim()))
        .collect::<Result<Vec<_>>>()?;
    let scenes = load_corpus(corpus)?;
    if conditional {
        if let Some(i) = scenes.iter().position(|s| s.semantics.is_none()) {
            return Err(Error::Invalid(format!(
                "--conditional needs semantic maps, but grid {i} of {} has none",
                display(corpus)
            )));
        }
    }
    let model = train_markov_prior(&scenes, template, conditional, alpha)?;
    write_json(out, &model)?;
    println!(
        "trained on {} grids: {} context tables -> {}",
        scenes.len(),
        model.table_count(),
        display(out)
    );
    Ok(())
}

fn require_semantics(scenes: &[Scene], source: &str) -> Result<()> {
    match scenes.iter().position(|s| s.semantics.is_none()) {
        Some(i) => Err(Error::Invalid(format!(
            "--by-region needs semantic maps, but grid {i} of {source} has none"
        ))),
        None => Ok(()),
    }
}

fn dataset_stats(corpus: &Path, out: &Path, k: usize, seed: u64, alpha: f64, g: Granularity) -> Result<()> {
    let scenes = load_corpus(corpus)?;
    if k > scenes.len() {
        eprintln!(
            "warning: K = {k} exceeds the corpus size {}; grids are drawn with replacement",
            scenes.len()
        );
    }
    let stats = if g.by_region {
        require_semantics(&scenes, &display(corpus))?;
        TokenStatistics::Regional(monte_carlo_regional_distribution(scenes.as_slice(), k, alpha, seed)?)
    } else if let Some((rows, cols)) = g.by_cell {
        TokenStatistics::Spatial(monte_carlo_spatial_distribution(scenes.as_slice(), k, rows, cols, alpha, seed)?)
    } else {
        TokenStatistics::Global(monte_carlo_dataset_distribution(scenes.as_slice(), k, alpha, seed)?)
    };
    write_json(out, &stats)?;
    println!(
        "{} dataset statistics from K = {k} draws over {} grids -> {}",
        stats.kind(),
        scenes.len(),
        display(out)
    );
    Ok(())
}

fn style_stats(inputs: &[PathBuf], out: &Path, alpha: f64, average: bool, g: Granularity) -> Result<()> {
    let scenes = load_exemplars(inputs)?;
    let size = scenes[0].tokens.codebook_size();
    if let Some(s) = scenes.iter().find(|s| s.tokens.codebook_size() != size) {
        return Err(Error::CodebookMismatch {
            expected: size,
            found: s.tokens.codebook_size(),
        });
    }
    let grids: Vec<TokenGrid> = scenes.iter().map(|s| s.tokens.clone()).collect();
    let stats = if g.by_region {
        require_semantics(&scenes, "the style inputs")?;
        let pairs = scenes.iter().map(|s| (&s.tokens, sem(s)));
        TokenStatistics::Regional(if average {
            let each = pairs
                .map(|(t, m)| histogram_by_region(t, m, alpha))
                .collect::<Result<Vec<_>>>()?;
            average_regional(&each, Weighting::Uniform)?
        } else {
            histogram_by_region_pooled(pairs, alpha)?
        })
    } else if let Some((rows, cols)) = g.by_cell {
        TokenStatistics::Spatial(if average {
            let each = grids
                .chunks(1)
                .map(|one| histogram_by_cell(one, rows, cols, alpha))
                .collect::<Result<Vec<_>>>()?;
            average_spatial(&each, Weighting::Uniform)?
        } else {
            histogram_by_cell(&grids, rows, cols, alpha)?
        })
    } else {
        TokenStatistics::Global(if average {
            let each = grids
                .iter()
                .map(|t| histogram_from_grid(t, alpha))
                .collect::<Result<Vec<_>>>()?;
            average_distributions(&each, Weighting::Uniform)?
        } else {
            histogram_from_grids(&grids, alpha)?
        })
    };
    write_json(out, &stats)?;
    println!(
        "{} style statistics from {} grids ({}) -> {}",
        stats.kind(),
        scenes.len(),
        if average { "averaged" } else { "pooled" },
        display(out)
    );
    Ok(())
}

fn sem(scene: &Scene) -> &SemanticGrid {
    scene.semantics.as_ref().expect("checked by require_semantics")
}

struct SampleArgs {
    model: PathBuf,
    semantics: Option<PathBuf>,
    shape: Option<GridShape>,
    n: usize,
    seed: u64,
    temperature: f64,
    top_k: Option<usize>,
    guidance: Option<(PathBuf, PathBuf, f64, Option<vqstyle::guidance::GuidanceMode>)>,
}

const SEMANTICS_FILE: &str = "semantics.sgrd";

fn sample(args: &SampleArgs, out: &Path) -> Result<()> {
    let model: MarkovGridPrior = read_json(&args.model)?;
    let semantics = args.semantics.as_ref().map(read_semantic_grid).transpose()?;
    let shape = match (&semantics, args.shape) {
        (Some(s), None) => s.shape(),
        (Some(s), Some(shape)) => {
            s.ensure_covers(shape)?;
            shape
        }
        (None, Some(shape)) => shape,
        (None, None) => return Err(Error::Invalid("give --semantics or --height and --width".into())),
    };
    let (table, guidance) = match &args.guidance {
        None => (None, None),
        Some((style, dataset, lambda, mode)) => {
            let s: TokenStatistics = read_json(style)?;
            let d: TokenStatistics = read_json(dataset)?;
            let table = table_from_statistics(&s, &d, *lambda, *mode)?;
            let settings = GuidanceSettings {
                mode: table.mode(),
                lambda: *lambda,
            };
            (Some(Arc::new(table)), Some(settings))
        }
    };
    let cfg = SamplingConfig {
        temperature: args.temperature,
        top_k: args.top_k,
        seed: args.seed,
        guidance: table,
    };
    let grids = batch_sample(&model, shape, semantics.as_ref(), &cfg, args.n)?;

    fs::create_dir_all(out)?;
    if let Some(s) = &semantics {
        write_semantic_grid(out.join(SEMANTICS_FILE), s)?;
    }
    let samples = grids
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let tokens = format!("sample_{i:03}.tgrd");
            write_token_grid(out.join(&tokens), g)?;
            Ok(SampleEntry {
                tokens,
                semantics: semantics.as_ref().map(|_| SEMANTICS_FILE.to_string()),
                seed: batch_seed(args.seed, i),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mode = guidance.as_ref().map_or("none", |g| g.mode.name());
    let manifest = SampleManifest {
        config: SampleSettings {
            model: display(&args.model),
            style: args.guidance.as_ref().map(|g| display(&g.0)),
            dataset: args.guidance.as_ref().map(|g| display(&g.1)),
            semantics: args.semantics.as_deref().map(display),
            height: shape.height,
            width: shape.width,
            n: args.n,
            seed: args.seed,
            temperature: args.temperature,
            top_k: args.top_k,
            guidance,
        },
        samples,
    };
    write_json(out.join(SAMPLES_FILE), &manifest)?;
    println!(
        "{} samples of {}x{} (guidance: {mode}) -> {}",
        args.n,
        shape.height,
        shape.width,
        display(out)
    );
    Ok(())
}

fn reference(path: &Path) -> Result<StyleReference> {
    let stats: TokenStatistics = read_json(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| display(path));
    Ok(StyleReference {
        name,
        global: stats.global()?,
        regional: match stats {
            TokenStatistics::Regional(r) => Some(r),
            _ => None,
        },
    })
}

fn evaluate(guided: &Path, unguided: &Path, style: &Path, out: &Path, extra: &[PathBuf]) -> Result<()> {
    let (g, g_seeds) = load_samples(guided)?;
    let (u, u_seeds) = load_samples(unguided)?;
    let target = reference(style)?;
    let references = if extra.is_empty() {
        Vec::new()
    } else {
        std::iter::once(Ok(target.clone()))
            .chain(extra.iter().map(|p| reference(p)))
            .collect::<Result<Vec<_>>>()?
    };
    let regions = target.regional.is_some() && g.iter().chain(&u).all(|s| s.semantics.is_some());
    let report = guidance_report(
        &g,
        g_seeds.as_deref(),
        &u,
        u_seeds.as_deref(),
        &target,
        ReportOptions {
            regions,
            references: &references,
            match_mode: MatchMode::Global,
        },
    )?;
    write_json(out, &report)?;
    let csv_path = out.with_extension("csv");
    fs::write(&csv_path, report.to_csv()?)?;
    println!(
        "pooled KL guided {:.4}, unguided {:.4}, reduction {:.3} -> {}, {}",
        report.guided.pooled_kl,
        report.unguided.pooled_kl,
        report.kl_reduction,
        display(out),
        display(&csv_path)
    );
    Ok(())
}
