//! Runs the experiments of a configuration, writes their files under one
//! directory per experiment, and records everything in `manifest.json`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::config::{self, Config, Experiment, OutputFormat, KINDS};
use crate::engines::{self, Context};
use crate::error::{LabError, Result};

pub const MANIFEST: &str = "manifest.json";
pub const SUMMARY: &str = "summary.json";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Overrides `[run] seed`.
    pub seed: Option<u64>,
    /// Overrides `[run] threads`.
    pub threads: Option<usize>,
    /// Overrides `[run] format`.
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentRecord {
    pub id: String,
    pub kind: &'static str,
    pub name: String,
    pub seed: u64,
    pub seconds: f64,
    pub status: &'static str,
    pub error: Option<String>,
    pub summary: Value,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub container_version: u32,
    pub config_sha256: String,
    pub seed: u64,
    pub threads: usize,
    pub format: OutputFormat,
    pub experiments: Vec<ExperimentRecord>,
    pub files: Vec<FileEntry>,
    pub seconds: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Seed of one experiment: its own `seed` key wins inside the engine; this
/// one depends only on the run seed and the experiment id.
pub fn experiment_seed(run_seed: u64, id: &str) -> u64 {
    let digest = Sha256::digest(format!("{run_seed}:{id}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| LabError::io(format!("writing {}", path.display()), e))
}

fn entry(path: String, bytes: &[u8]) -> FileEntry {
    FileEntry { path, bytes: bytes.len(), sha256: sha256_hex(bytes) }
}

/// Runs every experiment; the first failure in configuration order is
/// returned after the manifest has been written.
pub fn run(cfg: &Config, config_text: &str, opts: &RunOptions) -> Result<Manifest> {
    let start = Instant::now();
    let seed = opts.seed.or(cfg.run.seed).unwrap_or(0);
    let format = opts.format.or(cfg.run.format).unwrap_or_default();
    let threads = opts.threads.or(cfg.run.threads).unwrap_or_else(rayon::current_num_threads);
    if threads == 0 {
        return Err(LabError::config("threads must be at least 1"));
    }
    std::fs::create_dir_all(&opts.out_dir)
        .map_err(|e| LabError::io(format!("creating {}", opts.out_dir.display()), e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| LabError::config(format!("thread pool: {e}")))?;

    let outcomes: Vec<(ExperimentRecord, Option<LabError>)> = pool.install(|| {
        cfg.experiments.par_iter().map(|e| run_one(e, seed, format, &cfg.base_dir, &opts.out_dir)).collect()
    });

    let mut summary = Map::new();
    let mut experiments = Vec::with_capacity(outcomes.len());
    let mut first_error = None;
    for (record, err) in outcomes {
        summary.insert(record.id.clone(), record.summary.clone());
        if first_error.is_none() {
            first_error = err;
        }
        experiments.push(record);
    }
    // An empty configuration leaves the manifest alone.
    let mut files = Vec::new();
    if !experiments.is_empty() {
        let summary_bytes = serde_json::to_vec_pretty(&Value::Object(summary))?;
        write(&opts.out_dir.join(SUMMARY), &summary_bytes)?;
        files.push(entry(SUMMARY.into(), &summary_bytes));
    }
    let manifest = Manifest {
        tool: "kpi-lab",
        version: env!("CARGO_PKG_VERSION"),
        core_version: kpi_core::VERSION,
        container_version: kpi_core::io::FORMAT_VERSION,
        config_sha256: sha256_hex(config_text.as_bytes()),
        seed,
        threads,
        format,
        experiments,
        files,
        seconds: start.elapsed().as_secs_f64(),
    };
    write(&opts.out_dir.join(MANIFEST), &serde_json::to_vec_pretty(&manifest)?)?;
    match first_error {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

fn run_one(
    e: &Experiment,
    run_seed: u64,
    format: OutputFormat,
    base_dir: &Path,
    out_dir: &Path,
) -> (ExperimentRecord, Option<LabError>) {
    let id = e.id();
    let seed = experiment_seed(run_seed, &id);
    let start = Instant::now();
    let ctx = Context { seed, format, base_dir: base_dir.to_path_buf() };
    let mut record = ExperimentRecord {
        id: id.clone(),
        kind: e.spec.kind(),
        name: e.name.clone(),
        seed,
        seconds: 0.0,
        status: "ok",
        error: None,
        summary: Value::Null,
        files: Vec::new(),
    };
    let result = engines::run(&e.spec, &ctx).and_then(|out| {
        let dir = out_dir.join(&id);
        std::fs::create_dir_all(&dir).map_err(|err| LabError::io(format!("creating {}", dir.display()), err))?;
        let summary_bytes = serde_json::to_vec_pretty(&out.summary)?;
        for (name, bytes) in out.files.iter().chain(std::iter::once(&(SUMMARY.to_string(), summary_bytes))) {
            write(&dir.join(name), bytes)?;
            record.files.push(entry(format!("{id}/{name}"), bytes));
        }
        record.summary = out.summary;
        Ok(())
    });
    record.seconds = start.elapsed().as_secs_f64();
    match result {
        Ok(()) => (record, None),
        Err(err) => {
            record.status = "failed";
            record.error = Some(err.to_string());
            (record, Some(err))
        }
    }
}

/// A one-experiment configuration from `key=value` pairs; values are TOML
/// literals, bare words are taken as strings.
pub fn direct_config(kind: &str, assignments: &[String]) -> Result<(Config, String)> {
    if !KINDS.contains(&kind) {
        return Err(LabError::config(format!("unknown experiment kind {kind:?}")));
    }
    let mut src = format!("[{kind}.direct]\n");
    for a in assignments {
        let (key, value) =
            a.split_once('=').ok_or_else(|| LabError::config(format!("expected key=value, got {a:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(LabError::config(format!("invalid key {key:?}")));
        }
        let literal = if toml::from_str::<toml::Table>(&format!("v = {value}")).is_ok() {
            value.to_string()
        } else {
            toml::Value::String(value.to_string()).to_string()
        };
        src.push_str(&format!("{key} = {literal}\n"));
    }
    let cfg = config::parse(&src, "command line")?;
    Ok((cfg, src))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_depend_on_run_seed_and_id_only() {
        assert_eq!(experiment_seed(1, "evolve.a"), experiment_seed(1, "evolve.a"));
        assert_ne!(experiment_seed(1, "evolve.a"), experiment_seed(2, "evolve.a"));
        assert_ne!(experiment_seed(1, "evolve.a"), experiment_seed(1, "evolve.b"));
    }

    #[test]
    fn direct_assignments_become_a_section() {
        let (cfg, src) = direct_config("dichotomy", &["alpha=0.5".into(), "ns=[4,5]".into()]).unwrap();
        assert!(src.starts_with("[dichotomy.direct]"));
        assert_eq!(cfg.experiments.len(), 1);
        let (cfg, _) = direct_config("observe", &["control=horizontal".into()]).unwrap();
        assert_eq!(cfg.experiments[0].id(), "observe.direct");
        assert!(direct_config("observe", &["kmax".into()]).is_err());
        assert!(direct_config("nonsense", &[]).is_err());
        assert!(direct_config("observe", &["nope=1".into()]).is_err());
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
