//! The JSON run configuration. Every key is optional; unknown keys are errors.

use std::path::{Path, PathBuf};

use aggrolab_core::corpus::{DocFormat, LabelSchema};
use aggrolab_core::embedding::OovPolicy;
use aggrolab_core::models::{
    ArchConfig, Architecture, DpcnnConfig, DrnnConfig, PooledBilstmConfig,
};
use aggrolab_core::trainer::{EmbeddingSource, TrainConfig};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub resources: ResourcesConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub output: OutputConfig,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSet {
    #[default]
    Trac,
    Kaggle,
}

impl LabelSet {
    pub fn schema(self) -> LabelSchema {
        match self {
            LabelSet::Trac => LabelSchema::trac(),
            LabelSet::Kaggle => LabelSchema::kaggle(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Labelled training pool.
    pub train: Option<PathBuf>,
    /// Validation documents; when unset, a share of `train` is held out.
    pub validation: Option<PathBuf>,
    pub format: DocFormat,
    pub labels: LabelSet,
    pub validation_fraction: f64,
    pub split_seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            train: None,
            validation: None,
            format: DocFormat::CanonicalCsv,
            labels: LabelSet::Trac,
            validation_fraction: 0.1,
            split_seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResourcesConfig {
    /// Lexicon directory; files it lacks fall back to the bundled copies.
    pub lexicons: Option<PathBuf>,
    /// 100-d word vectors.
    pub glove: Option<PathBuf>,
    /// 300-d word vectors.
    pub fasttext: Option<PathBuf>,
    pub oov: OovPolicy,
}

impl ResourcesConfig {
    /// Pretrained files when both are set, subword hash vectors otherwise.
    pub fn embedding_source(&self) -> anyhow::Result<EmbeddingSource> {
        match (&self.glove, &self.fasttext) {
            (Some(glove), Some(fasttext)) => Ok(EmbeddingSource::Files {
                glove: glove.clone(),
                fasttext: fasttext.clone(),
                oov: self.oov,
            }),
            (None, None) => {
                log::warn!("no embedding files configured; using subword hash vectors");
                Ok(EmbeddingSource::Hashed)
            }
            _ => Err(crate::Invalid::new(
                "resources.glove and resources.fasttext must be set together",
            )
            .into()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub dpcnn: DpcnnConfig,
    pub drnn: DrnnConfig,
    pub pooled_bilstm: PooledBilstmConfig,
}

impl ModelConfig {
    pub fn for_arch(&self, arch: Architecture) -> ArchConfig {
        match arch {
            Architecture::Dpcnn => ArchConfig::Dpcnn(self.dpcnn.clone()),
            Architecture::Drnn => ArchConfig::Drnn(self.drnn.clone()),
            Architecture::PooledBilstm => ArchConfig::PooledBilstm(self.pooled_bilstm.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("runs"),
        }
    }
}

impl RunConfig {
    /// Parses `path`; relative paths inside are taken relative to its directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(crate::existing(path)?)
            .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        let mut config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| crate::Invalid::new(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut config.data.train,
            &mut config.data.validation,
            &mut config.resources.lexicons,
            &mut config.resources.glove,
            &mut config.resources.fasttext,
        ]
        .into_iter()
        .flatten()
        {
            *p = base.join(&*p);
        }
        config.output.dir = base.join(&config.output.dir);
        Ok(config)
    }

    pub fn load_or_default(path: Option<&Path>) -> anyhow::Result<Self> {
        path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
    }
}
