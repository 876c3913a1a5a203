//! Loading grids from corpus directories, exemplar paths and sample sets.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vqstyle::codec::{read_semantic_grid, read_token_grid};
use vqstyle::guidance::GuidanceMode;
use vqstyle::world::{Manifest, MANIFEST_FILE};
use vqstyle::{Error, Result, Scene};

pub const SAMPLES_FILE: &str = "samples.json";

/// Written by `sample` next to the generated grids.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleManifest {
    pub config: SampleSettings,
    pub samples: Vec<SampleEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSettings {
    pub model: String,
    pub style: Option<String>,
    pub dataset: Option<String>,
    pub semantics: Option<String>,
    pub height: usize,
    pub width: usize,
    pub n: usize,
    pub seed: u64,
    pub temperature: f64,
    pub top_k: Option<usize>,
    pub guidance: Option<GuidanceSettings>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuidanceSettings {
    pub mode: GuidanceMode,
    pub lambda: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleEntry {
    pub tokens: String,
    pub semantics: Option<String>,
    pub seed: u64,
}

/// Sorted `.tgrd` files directly inside `dir`.
fn token_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "tgrd") && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// A token grid plus its sibling `.sgrd` file when one exists.
fn load_with_sibling(path: &Path) -> Result<Scene> {
    let tokens = read_token_grid(path)?;
    let sem_path = path.with_extension("sgrd");
    let semantics = if sem_path.is_file() {
        Some(read_semantic_grid(sem_path)?)
    } else {
        None
    };
    Scene::new(tokens, semantics)
}

/// Corpus scenes from a benchmark manifest if present, otherwise from the
/// `.tgrd` files in `dir`.
pub fn load_corpus(dir: &Path) -> Result<Vec<Scene>> {
    let manifest = dir.join(MANIFEST_FILE);
    let scenes: Vec<Scene> = if manifest.is_file() {
        Manifest::read(&manifest)?
            .load_scenes(dir)?
            .into_iter()
            .map(|(s, _)| s)
            .collect()
    } else {
        if !dir.is_dir() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("corpus directory {} not found", dir.display()),
            )));
        }
        token_files(dir)?
            .iter()
            .map(|p| load_with_sibling(p))
            .collect::<Result<_>>()?
    };
    if scenes.is_empty() {
        return Err(Error::Invalid(format!("no token grids in {}", dir.display())));
    }
    Ok(scenes)
}

/// Exemplars from explicit files and directories, in argument order.
pub fn load_exemplars(inputs: &[PathBuf]) -> Result<Vec<Scene>> {
    let mut scenes = Vec::new();
    for input in inputs {
        if input.is_dir() {
            for p in token_files(input)? {
                scenes.push(load_with_sibling(&p)?);
            }
        } else {
            scenes.push(load_with_sibling(input)?);
        }
    }
    if scenes.is_empty() {
        return Err(Error::Invalid("no token grids among the inputs".into()));
    }
    Ok(scenes)
}

/// Samples and their seeds, from `samples.json` if present.
pub fn load_samples(dir: &Path) -> Result<(Vec<Scene>, Option<Vec<u64>>)> {
    let manifest_path = dir.join(SAMPLES_FILE);
    let (scenes, seeds): (Vec<Scene>, Option<Vec<u64>>) = if manifest_path.is_file() {
        let manifest: SampleManifest = vqstyle::codec::read_json(&manifest_path)?;
        let scenes = manifest
            .samples
            .iter()
            .map(|e| {
                let tokens = read_token_grid(dir.join(&e.tokens))?;
                let sem = e
                    .semantics
                    .as_ref()
                    .map(|s| read_semantic_grid(dir.join(s)))
                    .transpose()?;
                Scene::new(tokens, sem)
            })
            .collect::<Result<_>>()?;
        (scenes, Some(manifest.samples.iter().map(|e| e.seed).collect()))
    } else {
        let scenes = token_files(dir)?
            .iter()
            .map(|p| load_with_sibling(p))
            .collect::<Result<_>>()?;
        (scenes, None)
    };
    if scenes.is_empty() {
        return Err(Error::Invalid(format!("no samples in {}", dir.display())));
    }
    Ok((scenes, seeds))
}
