//! Configuration, experiment registry and reproducible run directories for
//! the stochhom laboratory.

pub mod config;
pub mod error;
pub mod experiments;
pub mod manifest;
pub mod setup;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub use config::{Config, ParseIssue};
pub use error::CliError;
pub use experiments::{Assertion, Outcome};
pub use manifest::{AssertionRecord, FileEntry, RunManifest};

use experiments::{find, REGISTRY};

/// Command-line overrides of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// First seed; the configured seed count is kept.
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub threads: Option<usize>,
}

/// `(name, description)` in lexicographic order.
pub fn list_experiments() -> Vec<(&'static str, &'static str)> {
    let mut v: Vec<_> = REGISTRY.iter().map(|e| (e.name, e.description)).collect();
    v.sort_by_key(|(n, _)| *n);
    v
}

/// Reads a configuration file. A run manifest is accepted too, in which
/// case its configuration echo is used.
pub fn load_config(path: &Path) -> Result<Config, CliError> {
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if let Ok(m) = serde_json::from_str::<RunManifest>(&text) {
            if m.schema == manifest::SCHEMA {
                return Config::parse_ini(&m.config);
            }
        }
    }
    Config::load(path)
}

/// Experiment defaults, then `user`, then the command-line overrides.
pub fn merged_config(name: &str, user: &Config, opts: &RunOptions) -> Result<Config, CliError> {
    let exp = find(name)?;
    let mut cfg = Config::parse_ini(exp.defaults).expect("built-in defaults parse");
    cfg.overlay(user);
    if let Some(s) = opts.seed {
        let count = experiments::seeds(&cfg)?.len() as u64;
        let list: Vec<String> = (s..s + count).map(|v| v.to_string()).collect();
        cfg.set("sweep", "seeds", list.join(", "))?;
    }
    if let Some(p) = opts.paths {
        cfg.set("sweep", "paths", p.to_string())?;
    }
    Ok(cfg)
}

/// Checks that a configuration builds a valid problem.
pub fn validate_config(cfg: &Config) -> Result<setup::Setup, CliError> {
    setup::build_setup(cfg)
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn write(path: PathBuf, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(&path, bytes).map_err(|source| CliError::Io { path, source })
}

fn csv_field(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Runs `name` and writes `<out_root>/<name>/`: `config.ini`, the
/// experiment's outputs, `assertions.csv` and `manifest.json`.
pub fn run_experiment(
    name: &str,
    user: &Config,
    opts: &RunOptions,
    out_root: &Path,
) -> Result<RunManifest, CliError> {
    let exp = find(name)?;
    let cfg = merged_config(name, user, opts)?;
    let threads = match opts.threads {
        Some(0) => return Err(CliError::Validation("--threads must be positive".into())),
        Some(k) => k,
        None => rayon::current_num_threads(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Threads(e.to_string()))?;

    let started_unix = unix_now();
    let clock = Instant::now();
    let outcome = pool.install(|| (exp.run)(&cfg))?;
    let wall_seconds = clock.elapsed().as_secs_f64();

    let dir = out_root.join(name);
    fs::create_dir_all(&dir).map_err(|source| CliError::Io {
        path: dir.clone(),
        source,
    })?;
    // files of an earlier run that this one does not produce would linger
    if let Ok(text) = fs::read_to_string(dir.join("manifest.json")) {
        if let Ok(old) = serde_json::from_str::<RunManifest>(&text) {
            for f in old.files {
                if !f.name.contains(['/', '\\']) {
                    let _ = fs::remove_file(dir.join(&f.name));
                }
            }
        }
    }

    let mut files = vec![("config.ini".to_string(), cfg.canonical().into_bytes())];
    files.extend(outcome.files);
    let mut assertions_csv = String::from("name,passed,value,threshold,detail\n");
    for a in &outcome.assertions {
        assertions_csv.push_str(&format!(
            "{},{},{:.17e},{:.17e},{}\n",
            csv_field(&a.name),
            a.passed,
            a.value,
            a.threshold,
            csv_field(&a.detail)
        ));
    }
    files.push(("assertions.csv".to_string(), assertions_csv.into_bytes()));

    let mut entries = Vec::new();
    for (fname, bytes) in &files {
        write(dir.join(fname), bytes)?;
        entries.push(FileEntry::of(fname, bytes));
    }
    let manifest = RunManifest {
        schema: manifest::SCHEMA.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: name.to_string(),
        config: cfg.canonical(),
        seeds: experiments::seeds(&cfg)?,
        threads,
        started_unix,
        finished_unix: unix_now(),
        wall_seconds,
        files: entries,
        passed: outcome.assertions.iter().all(|a| a.passed),
        assertions: outcome
            .assertions
            .iter()
            .map(|a| AssertionRecord {
                name: a.name.clone(),
                passed: a.passed,
                value: finite(a.value),
                threshold: finite(a.threshold),
                detail: a.detail.clone(),
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    write(dir.join("manifest.json"), json.as_bytes())?;
    Ok(manifest)
}
