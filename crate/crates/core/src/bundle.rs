//! A trained model together with everything needed to apply it to raw
//! documents, stored in the versioned weights format.

use std::path::Path;

use aggrolab_numerics::{decode_weights, encode_weights, ParamStore, Tensor};
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, LabelSchema};
use crate::embedding::{OovPolicy, Vocabulary};
use crate::error::{CoreError, Result};
use crate::models::{ArchConfig, Architecture, Model, ModelInput, EMBEDDING_PARAM};
use crate::pipeline::{model_inputs, process, FittedFeatures};
use crate::resources::Resources;

/// Version of the bundle metadata layout.
pub const BUNDLE_FORMAT: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleMeta {
    pub bundle_format: u32,
    pub config: ArchConfig,
    pub labels: Vec<String>,
    pub features: FittedFeatures,
    pub vocabulary: Vocabulary,
    pub max_len: usize,
    pub trainable_embedding: bool,
    pub oov_policy: OovPolicy,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle {
    pub meta: BundleMeta,
    pub model: Model<f32>,
}

impl ModelBundle {
    pub fn new(meta: BundleMeta, model: Model<f32>) -> Result<Self> {
        let b = ModelBundle { meta, model };
        b.check()?;
        Ok(b)
    }

    fn check(&self) -> Result<()> {
        let m = &self.meta;
        let mismatch = |what: String| Err(CoreError::invalid("bundle", what));
        if m.bundle_format != BUNDLE_FORMAT {
            return mismatch(format!(
                "bundle format {}, expected {BUNDLE_FORMAT}",
                m.bundle_format
            ));
        }
        if m.config != self.model.config {
            return mismatch("metadata and model configurations differ".into());
        }
        if m.labels.len() != self.model.classes {
            return mismatch(format!(
                "{} labels for a {}-class model",
                m.labels.len(),
                self.model.classes
            ));
        }
        if m.features.names.len() != self.model.features
            || m.features.scaler.dim() != self.model.features
        {
            return mismatch(format!(
                "{} feature names and a {}-wide scaler for a model with {} features",
                m.features.names.len(),
                m.features.scaler.dim(),
                self.model.features
            ));
        }
        let rows = self.model.params.value(EMBEDDING_PARAM)?.rows();
        if rows != m.vocabulary.rows() {
            return mismatch(format!(
                "{rows} embedding rows for {} vocabulary rows",
                m.vocabulary.rows()
            ));
        }
        Ok(())
    }

    pub fn architecture(&self) -> Architecture {
        self.model.architecture()
    }

    pub fn schema(&self) -> Result<LabelSchema> {
        LabelSchema::new(self.meta.labels.iter().cloned())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = serde_json::to_value(&self.meta)?;
        let tensors: Vec<(&str, &Tensor<f32>)> = self
            .model
            .params
            .iter()
            .map(|(_, p)| (p.name.as_str(), &p.value))
            .collect();
        Ok(encode_weights(&meta, &tensors)?)
    }

    /// Parses a bundle; `path` is only used in error messages.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let file = decode_weights(bytes, path)?;
        let meta: BundleMeta =
            serde_json::from_value(file.metadata).map_err(|e| CoreError::Invalid {
                what: "bundle",
                reason: format!("{}: metadata: {e}", path.display()),
            })?;
        let mut params = ParamStore::new();
        for (name, value) in file.tensors {
            let trainable = name != EMBEDDING_PARAM || meta.trainable_embedding;
            params.insert(name, value, trainable)?;
        }
        let model = Model::from_params(
            meta.config.clone(),
            meta.features.names.len(),
            meta.labels.len(),
            params,
        )?;
        Self::new(meta, model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        std::fs::write(path, bytes).map_err(|e| CoreError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| CoreError::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    /// Runs this bundle's preprocessing and feature pipeline over `docs`.
    pub fn inputs(&self, docs: &[Document], resources: &Resources) -> Result<Vec<ModelInput>> {
        let rules = resources.rules().with_max_len(self.meta.max_len);
        let processed = process(docs, &rules);
        let features = self.meta.features.transform(&processed, resources)?;
        Ok(model_inputs(&processed, features, &self.meta.vocabulary))
    }

    pub fn predict_inputs(&self, inputs: &[ModelInput]) -> Result<Vec<Vec<f64>>> {
        inputs.iter().map(|x| self.model.predict(x)).collect()
    }

    /// Class probabilities for each document.
    pub fn predict(&self, docs: &[Document], resources: &Resources) -> Result<Vec<Vec<f64>>> {
        self.predict_inputs(&self.inputs(docs, resources)?)
    }
}
