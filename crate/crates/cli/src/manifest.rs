use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use mlspl::dataio::Dataset;
use mlspl::protocol::{GridSpec, Protocol};
use mlspl::TrainConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::args::{DataArgs, DataFormat};

pub const TOOL: &str = "mlspl";

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(FileDigest { path: path.display().to_string(), sha256: hex::encode(Sha256::digest(&bytes)) })
    }
}

#[derive(Debug, Serialize)]
pub struct DatasetIdentity {
    pub format: &'static str,
    pub files: Vec<FileDigest>,
    pub n_instances: usize,
    pub n_features: usize,
    pub n_labels: usize,
}

impl DatasetIdentity {
    pub fn new(args: &DataArgs, ds: &Dataset) -> Result<Self> {
        Ok(DatasetIdentity {
            format: match args.resolved_format()? {
                DataFormat::Arff => "arff",
                DataFormat::Csv => "csv",
            },
            files: args.source_files().iter().map(|p| FileDigest::of(p)).collect::<Result<_>>()?,
            n_instances: ds.n_instances(),
            n_features: ds.n_features(),
            n_labels: ds.n_labels(),
        })
    }
}

/// Everything needed to rerun a command: resolved settings, input digests
/// and seeds. Timings are the only field that varies between reruns.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub args: Vec<String>,
    pub config: Option<TrainConfig>,
    pub protocol: Option<Protocol>,
    pub grid: Option<GridSpec>,
    pub dataset: Option<DatasetIdentity>,
    pub checkpoint: Option<FileDigest>,
    pub seeds: Vec<u64>,
    pub threads: usize,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            tool: TOOL,
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            args: std::env::args().collect(),
            config: None,
            protocol: None,
            grid: None,
            dataset: None,
            checkpoint: None,
            seeds: Vec::new(),
            threads: rayon::current_num_threads(),
            timings: BTreeMap::new(),
        }
    }
}
