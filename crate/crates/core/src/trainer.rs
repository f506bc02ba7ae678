//! Training protocol: per-architecture optimizer, loss chosen by the number
//! of classes, gradient clipping, and checkpointing on validation weighted F1.

use std::path::PathBuf;

use aggrolab_numerics::{
    rng_stream, Graph, Mode, Optimizer, OptimizerConfig, OptimizerKind, ParamGrads,
};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::bundle::{BundleMeta, ModelBundle, BUNDLE_FORMAT};
use crate::corpus::{gold_labels, DatasetSplit, Document, LabelSchema};
use crate::embedding::{load_dual_embeddings, DualEmbedding, OovPolicy, Vocabulary};
use crate::ensemble::{average_probabilities, predict_label, weighted_f1, EvaluationReport};
use crate::error::{CoreError, Result};
use crate::features::FeatureProfile;
use crate::models::{ArchConfig, Model, ModelInput};
use crate::pipeline::{model_inputs, process, FittedFeatures};
use crate::preprocess::DEFAULT_MAX_LEN;
use crate::resources::Resources;

const SHUFFLE_STREAM: u64 = 0x5A;
const DROPOUT_STREAM: u64 = 0xD0;
/// Floor on the gold-class probability when computing validation loss.
const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub lr: f64,
    /// Replaces the architecture's own optimizer when set.
    pub optimizer: Option<OptimizerKind>,
    /// Stop after this many epochs without a new checkpoint.
    pub patience: usize,
    /// Maximum global gradient norm per batch.
    pub clip_norm: f64,
    pub profile: FeatureProfile,
    pub max_len: usize,
    pub trainable_embedding: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            seed: 0,
            lr: 1e-3,
            optimizer: None,
            patience: 10,
            clip_norm: 5.0,
            profile: FeatureProfile::Trac,
            max_len: DEFAULT_MAX_LEN,
            trainable_embedding: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(CoreError::invalid("train config", reason));
        if self.epochs == 0 || self.batch_size == 0 || self.max_len == 0 {
            return bad("epochs, batch_size and max_len must be at least 1".into());
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("lr {} must be positive", self.lr));
        }
        if !(self.clip_norm.is_finite() && self.clip_norm > 0.0) {
            return bad(format!("clip_norm {} must be positive", self.clip_norm));
        }
        Ok(())
    }
}

/// Where the word vectors come from.
#[derive(Clone, Debug, PartialEq)]
pub enum EmbeddingSource {
    /// 100-d and 300-d word2vec-style text files.
    Files {
        glove: PathBuf,
        fasttext: PathBuf,
        oov: OovPolicy,
    },
    /// Subword hash vectors only; no pretrained files.
    Hashed,
}

/// Everything the architectures share: fitted features, vocabulary,
/// embedding table and encoded train/validation inputs.
pub struct PreparedData {
    pub schema: LabelSchema,
    pub features: FittedFeatures,
    pub embedding: DualEmbedding,
    pub max_len: usize,
    pub train: Vec<ModelInput>,
    pub train_labels: Vec<usize>,
    pub validation: Vec<ModelInput>,
    pub validation_labels: Vec<usize>,
}

/// Fits the feature pipeline on `split.train` and encodes train and
/// validation. The test documents are not read.
pub fn prepare(
    split: &DatasetSplit,
    schema: &LabelSchema,
    resources: &Resources,
    source: &EmbeddingSource,
    config: &TrainConfig,
) -> Result<PreparedData> {
    config.validate()?;
    if split.validation.is_empty() {
        return Err(CoreError::invalid("split", "validation set is empty"));
    }
    let train_labels = gold_labels(&split.train)?;
    let validation_labels = gold_labels(&split.validation)?;
    if let Some(&l) = train_labels
        .iter()
        .chain(&validation_labels)
        .find(|&&l| l >= schema.k())
    {
        return Err(CoreError::invalid(
            "label",
            format!("class {l} outside a {}-class schema", schema.k()),
        ));
    }
    let rules = resources.rules().with_max_len(config.max_len);
    let train_p = process(&split.train, &rules);
    let val_p = process(&split.validation, &rules);
    let features = FittedFeatures::fit(
        &split.train,
        &train_p,
        resources,
        config.profile,
        schema.k(),
    )?;
    let vocab = Vocabulary::build(train_p.iter().chain(&val_p).map(|p| p.tokens.as_slice()));
    let embedding = match source {
        EmbeddingSource::Files {
            glove,
            fasttext,
            oov,
        } => load_dual_embeddings(glove, fasttext, vocab, *oov, config.seed)?,
        EmbeddingSource::Hashed => DualEmbedding::hashed(vocab, config.seed),
    };
    let train = model_inputs(
        &train_p,
        features.transform(&train_p, resources)?,
        &embedding.vocab,
    );
    let validation = model_inputs(
        &val_p,
        features.transform(&val_p, resources)?,
        &embedding.vocab,
    );
    Ok(PreparedData {
        schema: schema.clone(),
        features,
        embedding,
        max_len: config.max_len,
        train,
        train_labels,
        validation,
        validation_labels,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean cross entropy over the epoch's training batches.
    pub train_loss: f64,
    /// Weighted F1 of the training-mode predictions made during the epoch.
    pub train_f1: f64,
    pub val_loss: f64,
    pub val_f1: f64,
    pub checkpoint: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub arch: String,
    pub epochs: Vec<EpochLog>,
    pub checkpoint_epoch: usize,
    pub stopped_early: bool,
}

impl TrainLog {
    /// One JSON object per epoch.
    pub fn to_json_lines(&self) -> String {
        self.epochs
            .iter()
            .map(|e| {
                let mut v = serde_json::to_value(e).expect("plain struct");
                v["arch"] = self.arch.clone().into();
                v.to_string() + "\n"
            })
            .collect()
    }

    pub fn best(&self) -> Option<&EpochLog> {
        self.epochs
            .iter()
            .find(|e| e.epoch == self.checkpoint_epoch)
    }
}

/// Weighted F1 and mean cross entropy of eval-mode predictions.
pub fn score(model: &Model<f32>, inputs: &[ModelInput], labels: &[usize]) -> Result<(f64, f64)> {
    let mut predicted = Vec::with_capacity(inputs.len());
    let mut loss = 0.0;
    for (x, &y) in inputs.iter().zip(labels) {
        let p = model.predict(x)?;
        loss -= p[y].max(PROB_FLOOR).ln();
        predicted.push(predict_label(&p));
    }
    Ok((
        weighted_f1(labels, &predicted, model.classes)?,
        loss / inputs.len() as f64,
    ))
}

/// Trains one architecture and returns the checkpoint with the best
/// validation weighted F1 (lower validation loss breaks ties).
pub fn train_prepared(
    arch: &ArchConfig,
    data: &PreparedData,
    config: &TrainConfig,
) -> Result<(ModelBundle, TrainLog)> {
    config.validate()?;
    if data.train.is_empty() {
        return Err(CoreError::invalid("split", "training set is empty"));
    }
    let kind = config.optimizer.unwrap_or(arch.architecture().optimizer());
    let arch_id = arch.architecture() as u64;
    let mut model: Model<f32> = Model::new(
        arch.clone(),
        data.embedding.matrix.clone(),
        config.trainable_embedding,
        data.features.names.len(),
        data.schema.k(),
        config.seed,
    )?;
    let mut optimizer = Optimizer::new(OptimizerConfig::for_kind(kind, config.lr), &model.params);
    let mut log = TrainLog {
        arch: arch.architecture().to_string(),
        epochs: Vec::new(),
        checkpoint_epoch: 0,
        stopped_early: false,
    };
    let mut best: Option<(f64, f64, Model<f32>)> = None;
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..data.train.len()).collect();

    for epoch in 1..=config.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng_stream(
            config.seed,
            &[SHUFFLE_STREAM, arch_id, epoch as u64],
        ));
        let mut loss_sum = 0.0;
        let mut predicted = vec![0; data.train.len()];
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let mut grads = ParamGrads::empty(model.params.len());
            let weight = 1.0 / batch.len() as f32;
            for &i in batch {
                let mut rng = rng_stream(
                    config.seed,
                    &[DROPOUT_STREAM, arch_id, epoch as u64, i as u64],
                );
                let mut g = Graph::new(&model.params);
                let loss = model.loss(
                    &mut g,
                    &data.train[i],
                    data.train_labels[i],
                    &mut Mode::Train(&mut rng),
                )?;
                let value = g.scalar(loss.data) as f64;
                if !value.is_finite() {
                    return Err(CoreError::Divergence {
                        epoch,
                        batch: b + 1,
                    });
                }
                loss_sum += value;
                predicted[i] = predict_label(&loss.probs);
                let total = match loss.penalty {
                    Some(p) => g.add(loss.data, p)?,
                    None => loss.data,
                };
                let scaled = g.scale(total, weight);
                grads.add_assign(&g.backward(scaled)?)?;
            }
            if !grads.all_finite() {
                return Err(CoreError::Divergence {
                    epoch,
                    batch: b + 1,
                });
            }
            grads.clip_global_norm(config.clip_norm as f32);
            optimizer.step(&mut model.params, &grads)?;
        }
        let train_f1 = weighted_f1(&data.train_labels, &predicted, data.schema.k())?;
        let (val_f1, val_loss) = score(&model, &data.validation, &data.validation_labels)?;
        let improved = match &best {
            None => true,
            Some((f1, loss, _)) => val_f1 > *f1 || (val_f1 == *f1 && val_loss < *loss),
        };
        if improved {
            best = Some((val_f1, val_loss, model.clone()));
            log.checkpoint_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
        }
        let entry = EpochLog {
            epoch,
            train_loss: loss_sum / data.train.len() as f64,
            train_f1,
            val_loss,
            val_f1,
            checkpoint: improved,
        };
        log::info!(
            "{} epoch {epoch}: train loss {:.4} f1 {:.4}, val loss {:.4} f1 {:.4}{}",
            log.arch,
            entry.train_loss,
            entry.train_f1,
            entry.val_loss,
            entry.val_f1,
            if improved { " *" } else { "" }
        );
        log.epochs.push(entry);
        if since_best >= config.patience && epoch < config.epochs {
            log.stopped_early = true;
            break;
        }
    }

    let (_, _, model) = best.expect("at least one epoch ran");
    let meta = BundleMeta {
        bundle_format: BUNDLE_FORMAT,
        config: arch.clone(),
        labels: data.schema.names().to_vec(),
        features: data.features.clone(),
        vocabulary: data.embedding.vocab.clone(),
        max_len: data.max_len,
        trainable_embedding: config.trainable_embedding,
        oov_policy: data.embedding.oov_policy,
    };
    Ok((ModelBundle::new(meta, model)?, log))
}

/// [`prepare`] followed by [`train_prepared`].
pub fn train_model(
    arch: &ArchConfig,
    split: &DatasetSplit,
    schema: &LabelSchema,
    resources: &Resources,
    source: &EmbeddingSource,
    config: &TrainConfig,
) -> Result<(ModelBundle, TrainLog)> {
    let data = prepare(split, schema, resources, source, config)?;
    train_prepared(arch, &data, config)
}

/// Averaged class probabilities of `bundles` for each document. Every
/// bundle applies its own preprocessing and feature pipeline.
pub fn ensemble_probabilities(
    bundles: &[ModelBundle],
    docs: &[Document],
    resources: &Resources,
) -> Result<Vec<Vec<f64>>> {
    let first = bundles
        .first()
        .ok_or_else(|| CoreError::invalid("evaluate", "no bundles"))?;
    if let Some(b) = bundles.iter().find(|b| b.meta.labels != first.meta.labels) {
        return Err(CoreError::SchemaMismatch(format!(
            "{:?} vs {:?}",
            first.meta.labels, b.meta.labels
        )));
    }
    let per_bundle = bundles
        .iter()
        .map(|b| b.predict(docs, resources))
        .collect::<Result<Vec<_>>>()?;
    (0..docs.len())
        .map(|i| {
            let members: Vec<&[f64]> = per_bundle.iter().map(|p| p[i].as_slice()).collect();
            average_probabilities(&members)
        })
        .collect()
}

pub fn evaluate(
    bundles: &[ModelBundle],
    docs: &[Document],
    resources: &Resources,
) -> Result<EvaluationReport> {
    if docs.is_empty() {
        return Err(CoreError::invalid("evaluate", "empty test set"));
    }
    let gold = gold_labels(docs)?;
    let probs = ensemble_probabilities(bundles, docs, resources)?;
    let predicted: Vec<usize> = probs.iter().map(|p| predict_label(p)).collect();
    EvaluationReport::new(&gold, &predicted, &bundles[0].meta.labels)
}
