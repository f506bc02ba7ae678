//! Finite-difference verification of the full architectures on toy
//! documents, alongside the per-layer suite of the tensor core.

use aggrolab_numerics::{
    grad_check, layer_suite, rng_stream, GradCheckOptions, GradCheckReport, Mode,
};
use rand::Rng as _;
use serde::Serialize;

use crate::embedding::{DualEmbedding, Vocabulary};
use crate::error::Result;
use crate::features::FeatureProfile;
use crate::models::{Architecture, Model, ModelInput};

/// Tokens in each toy document.
pub const TOY_DOC_LEN: usize = 12;
const TOY_VOCAB: usize = 30;

/// A randomly initialised `f64` model with a trainable embedding table, and
/// one toy document for it.
pub fn toy_case(
    arch: Architecture,
    seed: u64,
    classes: usize,
) -> Result<(Model<f64>, ModelInput, usize)> {
    let vocab: Vocabulary = (0..TOY_VOCAB)
        .map(|i| format!("w{i}"))
        .collect::<Vec<_>>()
        .into();
    let emb = DualEmbedding::hashed(vocab, seed);
    let features = FeatureProfile::Trac.dim();
    let model = Model::new(
        arch.default_config(),
        emb.matrix.cast(),
        true,
        features,
        classes,
        seed,
    )?;
    let mut rng = rng_stream(seed, &[0x70_7E]);
    let rows = (0..TOY_DOC_LEN)
        .map(|_| rng.random_range(0..=TOY_VOCAB))
        .collect();
    let f = (0..features).map(|_| rng.random_range(-2.0..2.0)).collect();
    let target = rng.random_range(0..classes);
    Ok((model, ModelInput::new("toy", rows, f), target))
}

/// Gradient check of one architecture's training loss (cross entropy plus
/// any weight penalty, dropout active under a fixed stream).
pub fn architecture_check(
    arch: Architecture,
    seed: u64,
    classes: usize,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let (model, input, target) = toy_case(arch, seed, classes)?;
    let mut params = model.params.clone();
    grad_check(&mut params, opts, |g| {
        let mut rng = rng_stream(seed, &[0xD0]);
        let loss = model.loss(g, &input, target, &mut Mode::Train(&mut rng))?;
        Ok(match loss.penalty {
            Some(p) => g.add(loss.data, p)?,
            None => loss.data,
        })
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteRow {
    pub case: String,
    pub seed: u64,
    pub max_rel_err: f64,
    pub passed: bool,
}

/// Options used by [`full_suite`]: every entry of the small layer cases,
/// a random sample of each architecture tensor.
pub fn suite_options(seed: u64, sample: usize) -> GradCheckOptions {
    GradCheckOptions {
        max_entries_per_tensor: Some(sample),
        seed,
        ..GradCheckOptions::default()
    }
}

/// Layer suite and all three architectures (three-class and binary heads)
/// for each seed.
pub fn full_suite(seeds: &[u64], sample: usize) -> Result<Vec<SuiteRow>> {
    let mut rows = Vec::new();
    for &seed in seeds {
        let layer_opts = GradCheckOptions {
            seed,
            ..GradCheckOptions::default()
        };
        for (name, report) in layer_suite(seed, &layer_opts)? {
            rows.push(SuiteRow {
                case: name.to_string(),
                seed,
                max_rel_err: report.max_rel_err(),
                passed: report.passed(),
            });
        }
        let opts = suite_options(seed, sample);
        for arch in Architecture::ALL {
            for classes in [3, 2] {
                let report = architecture_check(arch, seed, classes, &opts)?;
                rows.push(SuiteRow {
                    case: format!("{arch}_k{classes}"),
                    seed,
                    max_rel_err: report.max_rel_err(),
                    passed: report.passed(),
                });
            }
        }
    }
    Ok(rows)
}
