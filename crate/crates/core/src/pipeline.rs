//! Documents to model inputs: normalization, handcrafted features, scaling
//! and vocabulary lookup.

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::embedding::{Vocabulary, PAD_ROW};
use crate::error::{CoreError, Result};
use crate::features::emoticon::EmoticonTfidfModel;
use crate::features::{extract_features, FeatureProfile, FeatureScaler, TRAC_CLASSES};
use crate::models::ModelInput;
use crate::preprocess::{normalize, NormalizationRules, ProcessedDocument};
use crate::resources::Resources;

pub fn process(docs: &[Document], rules: &NormalizationRules) -> Vec<ProcessedDocument> {
    docs.iter()
        .map(|d| normalize(&d.id, &d.raw_text, rules))
        .collect()
}

/// Unscaled feature vectors.
pub fn raw_features(
    processed: &[ProcessedDocument],
    resources: &Resources,
    profile: FeatureProfile,
    emoticons: Option<&EmoticonTfidfModel>,
) -> Result<Vec<Vec<f64>>> {
    processed
        .iter()
        .map(|p| extract_features(p, resources, profile, emoticons))
        .collect()
}

/// Corpus-fitted parts of the feature extractor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedFeatures {
    pub profile: FeatureProfile,
    pub names: Vec<String>,
    pub emoticons: Option<EmoticonTfidfModel>,
    pub scaler: FeatureScaler,
}

impl FittedFeatures {
    /// Fits the emoticon model and the scaler on `train` only.
    pub fn fit(
        train: &[Document],
        processed: &[ProcessedDocument],
        resources: &Resources,
        profile: FeatureProfile,
        classes: usize,
    ) -> Result<Self> {
        let emoticons = if profile.uses_emoticons() {
            if classes != TRAC_CLASSES {
                return Err(CoreError::invalid(
                    "profile",
                    format!("{profile:?} profile needs a {TRAC_CLASSES}-class schema, got {classes} classes"),
                ));
            }
            let docs = train
                .iter()
                .zip(processed)
                .map(|(d, p)| (d.id.as_str(), d.label, p.snapshot_text.as_str()));
            Some(EmoticonTfidfModel::fit(
                docs,
                classes,
                &resources.emoticons,
            )?)
        } else {
            None
        };
        let raw = raw_features(processed, resources, profile, emoticons.as_ref())?;
        let scaler = FeatureScaler::fit(&raw)?;
        Ok(FittedFeatures {
            profile,
            names: profile.names(),
            emoticons,
            scaler,
        })
    }

    /// Scaled feature vectors.
    pub fn transform(
        &self,
        processed: &[ProcessedDocument],
        resources: &Resources,
    ) -> Result<Vec<Vec<f64>>> {
        raw_features(processed, resources, self.profile, self.emoticons.as_ref())?
            .iter()
            .map(|v| self.scaler.apply(v))
            .collect()
    }
}

/// Model inputs. A document left without tokens by normalization is given
/// a single unknown-word position, so it is classified from its features.
pub fn model_inputs(
    processed: &[ProcessedDocument],
    features: Vec<Vec<f64>>,
    vocab: &Vocabulary,
) -> Vec<ModelInput> {
    processed
        .iter()
        .zip(features)
        .map(|(p, f)| {
            let mut rows = vocab.encode(&p.tokens);
            if rows.is_empty() {
                log::debug!("`{}` has no tokens after normalization", p.id);
                rows.push(PAD_ROW);
            }
            ModelInput::new(p.id.clone(), rows, f)
        })
        .collect()
}
