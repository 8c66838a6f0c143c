use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliResult;
use crate::io::{digest_tree, write_json, FileDigest};

pub const MANIFEST: &str = "manifest.json";

/// Record of one command invocation: enough to re-run it and to check that
/// the outputs were reproduced.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub arguments: Vec<String>,
    /// Fully resolved configuration after command-line overrides.
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub threads: usize,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// Wall-clock seconds by stage.
    pub timings: BTreeMap<String, f64>,
    /// Acceptance rates and other sampler diagnostics.
    pub diagnostics: serde_json::Value,
}

impl RunManifest {
    pub fn new(
        command: &str,
        arguments: &[String],
        config: serde_json::Value,
        seed: Option<u64>,
    ) -> Self {
        Self {
            tool: "hbest".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            arguments: arguments.to_vec(),
            config,
            seed,
            threads: rayon::current_num_threads(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings: BTreeMap::new(),
            diagnostics: serde_json::Value::Null,
        }
    }

    /// Digest everything under `out` and write the manifest there.
    pub fn finish(mut self, out: &Path) -> CliResult<()> {
        self.outputs = digest_tree(out, &[MANIFEST])?;
        write_json(&out.join(MANIFEST), &self)
    }
}
