use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use lfcodec::codec::CodecId;
use lfcodec::enhance::RvsPolicy;
use serde::{Deserialize, Serialize};

/// Settings shared by the subcommands. Command-line flags fill it first, then
/// any key present in the `--config` JSON file replaces the flag value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub manifest: Option<PathBuf>,
    pub qp: u8,
    pub lambda: f64,
    pub codec: CodecId,
    pub ext_cmd: Option<String>,
    pub synth_model: Option<PathBuf>,
    pub qe_model: Option<PathBuf>,
    pub rvs: String,
    pub no_enhance: bool,
    pub out: PathBuf,
    pub seed: u64,
    pub jobs: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            qp: 28,
            lambda: 0.1,
            codec: CodecId::Builtin,
            ext_cmd: None,
            synth_model: None,
            qe_model: None,
            rvs: "sharpness".into(),
            no_enhance: false,
            out: PathBuf::from("out"),
            seed: 0,
            jobs: None,
        }
    }
}

impl PipelineConfig {
    /// Replaces the fields named in the JSON file.
    pub fn overlay(self, path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let serde_json::Value::Object(keys) = file else {
            bail!("{} must hold a JSON object", path.display());
        };
        let mut merged = serde_json::to_value(&self)?;
        let obj = merged.as_object_mut().expect("struct serializes to an object");
        for (k, v) in keys {
            obj.insert(k, v);
        }
        Ok(serde_json::from_value(merged).with_context(|| format!("invalid config {}", path.display()))?)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.qp > lfcodec::codec::MAX_QP as u8 {
            bail!("qp {} out of range 0..={}", self.qp, lfcodec::codec::MAX_QP);
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            bail!("lambda {} must be finite and >= 0", self.lambda);
        }
        if self.codec == CodecId::External && self.ext_cmd.is_none() {
            bail!("--codec external needs --ext-cmd");
        }
        if self.jobs == Some(0) {
            bail!("--jobs must be positive");
        }
        RvsPolicy::parse(&self.rvs)?;
        for p in [&self.manifest, &self.synth_model, &self.qe_model].into_iter().flatten() {
            if !p.exists() {
                bail!("{} does not exist", p.display());
            }
        }
        Ok(())
    }

    pub fn rvs_policy(&self) -> anyhow::Result<RvsPolicy> {
        Ok(RvsPolicy::parse(&self.rvs)?)
    }

    pub fn manifest(&self) -> anyhow::Result<&Path> {
        self.manifest.as_deref().context("no manifest given (--manifest)")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_keys_override_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"qp": 34, "rvs": "nearest"}"#).unwrap();
        let base = PipelineConfig {
            lambda: 0.5,
            qp: 20,
            ..PipelineConfig::default()
        };
        let c = base.overlay(&path).unwrap();
        assert_eq!(c.qp, 34);
        assert_eq!(c.rvs, "nearest");
        assert_eq!(c.lambda, 0.5);
    }

    #[test]
    fn rejects_unknown_keys_and_ranges() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"qpp": 3}"#).unwrap();
        assert!(PipelineConfig::default().overlay(&path).is_err());
        let c = PipelineConfig {
            lambda: -1.0,
            ..PipelineConfig::default()
        };
        assert!(c.validate().is_err());
        let c = PipelineConfig {
            codec: CodecId::External,
            ..PipelineConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
