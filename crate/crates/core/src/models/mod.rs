//! The three classifiers. Each maps a token sequence and a scaled feature
//! vector to a probability vector over the label schema. Features join the
//! network only at the final affine layer.

pub mod dpcnn;
pub mod drnn;
pub mod pooled_bilstm;

use aggrolab_numerics::{
    glorot_uniform, rng_stream, sigmoid, softmax, Graph, Mode, OptimizerKind, ParamStore, Scalar,
    Tensor, Var,
};
use serde::{Deserialize, Serialize};

use crate::embedding::PAD_ROW;
use crate::error::{CoreError, Result};

pub use dpcnn::DpcnnConfig;
pub use drnn::DrnnConfig;
pub use pooled_bilstm::PooledBilstmConfig;

pub const EMBEDDING_PARAM: &str = "embedding";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Dpcnn,
    Drnn,
    PooledBilstm,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [
        Architecture::Dpcnn,
        Architecture::Drnn,
        Architecture::PooledBilstm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Dpcnn => "dpcnn",
            Architecture::Drnn => "drnn",
            Architecture::PooledBilstm => "pooled_bilstm",
        }
    }

    /// Adam for the convolutional model, RMSProp for the recurrent ones.
    pub fn optimizer(self) -> OptimizerKind {
        match self {
            Architecture::Dpcnn => OptimizerKind::Adam,
            Architecture::Drnn | Architecture::PooledBilstm => OptimizerKind::RmsProp,
        }
    }

    pub fn default_config(self) -> ArchConfig {
        match self {
            Architecture::Dpcnn => ArchConfig::Dpcnn(DpcnnConfig::default()),
            Architecture::Drnn => ArchConfig::Drnn(DrnnConfig::default()),
            Architecture::PooledBilstm => ArchConfig::PooledBilstm(PooledBilstmConfig::default()),
        }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Architecture {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| {
                CoreError::invalid(
                    "architecture",
                    format!("`{s}` (expected dpcnn, drnn or pooled_bilstm)"),
                )
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "snake_case")]
pub enum ArchConfig {
    Dpcnn(DpcnnConfig),
    Drnn(DrnnConfig),
    PooledBilstm(PooledBilstmConfig),
}

impl ArchConfig {
    pub fn architecture(&self) -> Architecture {
        match self {
            ArchConfig::Dpcnn(_) => Architecture::Dpcnn,
            ArchConfig::Drnn(_) => Architecture::Drnn,
            ArchConfig::PooledBilstm(_) => Architecture::PooledBilstm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ArchConfig::Dpcnn(c) => c.validate(),
            ArchConfig::Drnn(c) => c.validate(),
            ArchConfig::PooledBilstm(c) => c.validate(),
        }
    }

    /// Width of the sequence encoding before the features are appended.
    pub fn encoding_width(&self) -> usize {
        match self {
            ArchConfig::Dpcnn(c) => c.filters,
            ArchConfig::Drnn(c) => 2 * c.hidden,
            ArchConfig::PooledBilstm(c) => 6 * c.hidden,
        }
    }

    fn params(&self, embed_dim: usize) -> Vec<ParamSpec> {
        match self {
            ArchConfig::Dpcnn(c) => c.params(embed_dim),
            ArchConfig::Drnn(c) => c.params(embed_dim),
            ArchConfig::PooledBilstm(c) => c.params(embed_dim),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Init {
    Glorot {
        fan_in: usize,
        fan_out: usize,
    },
    Zeros,
    Constant(f64),
    /// Zeros except ones on the forget-gate block of a `[4L]` LSTM bias.
    LstmBias,
}

#[derive(Clone, Debug)]
pub(crate) struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, shape: &[usize], init: Init) -> Self {
        ParamSpec {
            name: name.into(),
            shape: shape.to_vec(),
            init,
        }
    }

    /// Weight and bias of one LSTM direction over `d`-wide inputs.
    pub fn lstm(prefix: &str, hidden: usize, d: usize) -> [ParamSpec; 2] {
        [
            ParamSpec::new(
                format!("{prefix}.weight"),
                &[hidden + d, 4 * hidden],
                Init::Glorot {
                    fan_in: hidden + d,
                    fan_out: 4 * hidden,
                },
            ),
            ParamSpec::new(format!("{prefix}.bias"), &[4 * hidden], Init::LstmBias),
        ]
    }

    fn materialize<T: Scalar>(&self, rng: &mut aggrolab_numerics::Rng) -> Tensor<T> {
        match self.init {
            Init::Glorot { fan_in, fan_out } => glorot_uniform(&self.shape, fan_in, fan_out, rng),
            Init::Zeros => Tensor::zeros(&self.shape),
            Init::Constant(v) => Tensor::full(&self.shape, T::of(v)),
            Init::LstmBias => {
                let l = self.shape[0] / 4;
                let mut t = Tensor::zeros(&self.shape);
                t.data_mut()[l..2 * l]
                    .iter_mut()
                    .for_each(|v| *v = T::one());
                t
            }
        }
    }
}

/// One document as the models see it: embedding-table rows, a padding
/// mask and the scaled feature vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelInput {
    pub id: String,
    pub rows: Vec<usize>,
    /// `pad[t]` marks position `t` as padding. Unknown words are not padding.
    pub pad: Vec<bool>,
    pub features: Vec<f64>,
}

impl ModelInput {
    pub fn new(id: impl Into<String>, rows: Vec<usize>, features: Vec<f64>) -> Self {
        let pad = vec![false; rows.len()];
        ModelInput {
            id: id.into(),
            rows,
            pad,
            features,
        }
    }

    /// Appends `n` padding positions.
    pub fn padded(mut self, n: usize) -> Self {
        self.rows.extend(std::iter::repeat_n(PAD_ROW, n));
        self.pad.extend(std::iter::repeat_n(true, n));
        self
    }

    /// One past the last real position.
    pub fn true_len(&self) -> usize {
        self.pad.iter().rposition(|&p| !p).map_or(0, |i| i + 1)
    }
}

/// Loss of one labelled document.
pub struct Loss {
    /// Cross entropy of the prediction.
    pub data: Var,
    /// Weight regularisation, for architectures that have one.
    pub penalty: Option<Var>,
    pub probs: Vec<f64>,
}

/// A classifier: configuration plus named parameters, generic over the
/// scalar type so the same code trains in `f32` and is checked in `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T: Scalar> {
    pub config: ArchConfig,
    pub features: usize,
    pub classes: usize,
    pub params: ParamStore<T>,
}

fn out_units(classes: usize) -> usize {
    if classes == 2 {
        1
    } else {
        classes
    }
}

impl<T: Scalar> Model<T> {
    /// Fresh parameters drawn from `seed`. `embedding` is the `[V + 1, d]` table.
    pub fn new(
        config: ArchConfig,
        embedding: Tensor<T>,
        trainable_embedding: bool,
        features: usize,
        classes: usize,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if !(2..=3).contains(&classes) {
            return Err(CoreError::invalid("model", format!("{classes} classes")));
        }
        if !embedding.is_matrix() || embedding.rows() == 0 {
            return Err(CoreError::invalid(
                "model",
                format!("embedding shape {:?}", embedding.shape()),
            ));
        }
        let mut params = ParamStore::new();
        params.insert(EMBEDDING_PARAM, embedding, trainable_embedding)?;
        let arch = config.architecture() as u64;
        for (i, spec) in Self::specs(
            &config,
            params.value(EMBEDDING_PARAM)?.cols(),
            features,
            classes,
        )
        .iter()
        .enumerate()
        {
            let mut rng = rng_stream(seed, &[arch, i as u64]);
            params.insert(spec.name.clone(), spec.materialize(&mut rng), true)?;
        }
        Ok(Model {
            config,
            features,
            classes,
            params,
        })
    }

    /// Wraps existing parameters after checking their names and shapes.
    pub fn from_params(
        config: ArchConfig,
        features: usize,
        classes: usize,
        params: ParamStore<T>,
    ) -> Result<Self> {
        config.validate()?;
        let emb = params.value(EMBEDDING_PARAM)?;
        if !emb.is_matrix() {
            return Err(CoreError::invalid(
                "model",
                format!("embedding shape {:?}", emb.shape()),
            ));
        }
        let specs = Self::specs(&config, emb.cols(), features, classes);
        if params.len() != specs.len() + 1 {
            return Err(CoreError::invalid(
                "model",
                format!("{} parameters, expected {}", params.len(), specs.len() + 1),
            ));
        }
        for spec in &specs {
            let got = params.value(&spec.name)?.shape();
            if got != spec.shape.as_slice() {
                return Err(CoreError::invalid(
                    "model",
                    format!(
                        "`{}` has shape {got:?}, expected {:?}",
                        spec.name, spec.shape
                    ),
                ));
            }
        }
        Ok(Model {
            config,
            features,
            classes,
            params,
        })
    }

    fn specs(
        config: &ArchConfig,
        embed_dim: usize,
        features: usize,
        classes: usize,
    ) -> Vec<ParamSpec> {
        let mut specs = config.params(embed_dim);
        let prefix = config.architecture().as_str();
        let z = config.encoding_width() + features;
        let units = out_units(classes);
        specs.push(ParamSpec::new(
            format!("{prefix}.out.weight"),
            &[z, units],
            Init::Glorot {
                fan_in: z,
                fan_out: units,
            },
        ));
        specs.push(ParamSpec::new(
            format!("{prefix}.out.bias"),
            &[units],
            Init::Zeros,
        ));
        specs
    }

    pub fn architecture(&self) -> Architecture {
        self.config.architecture()
    }

    /// Width of the classifier input: sequence encoding plus features.
    pub fn z_width(&self) -> usize {
        self.config.encoding_width() + self.features
    }

    pub fn embed_dim(&self) -> usize {
        self.params
            .value(EMBEDDING_PARAM)
            .map(|e| e.cols())
            .unwrap_or(0)
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            features: self.features,
            classes: self.classes,
            params: self.params.cast(),
        }
    }

    fn check_input(&self, input: &ModelInput, params: &ParamStore<T>) -> Result<()> {
        if input.rows.len() != input.pad.len() {
            return Err(CoreError::invalid(
                "input",
                format!("`{}`: rows and pad mask differ in length", input.id),
            ));
        }
        if input.true_len() == 0 {
            return Err(CoreError::EmptyDocument(input.id.clone()));
        }
        if input.features.len() != self.features {
            return Err(CoreError::invalid(
                "input",
                format!(
                    "`{}` has {} features, model expects {}",
                    input.id,
                    input.features.len(),
                    self.features
                ),
            ));
        }
        let vocab = params.value(EMBEDDING_PARAM)?.rows();
        if let Some(r) = input.rows.iter().find(|&&r| r >= vocab) {
            return Err(CoreError::invalid(
                "input",
                format!("`{}`: row {r} outside a {vocab}-row table", input.id),
            ));
        }
        Ok(())
    }

    /// The classifier input `z = h ⊕ f` as a `[1, z_width]` node.
    ///
    /// Graph methods read parameters from the store `g` was built over,
    /// which must have this model's names and shapes.
    pub fn encode(
        &self,
        g: &mut Graph<'_, T>,
        input: &ModelInput,
        mode: &mut Mode<'_>,
    ) -> Result<Var> {
        self.check_input(input, g.params())?;
        let table = g.param_by_name(EMBEDDING_PARAM)?;
        let h = match &self.config {
            ArchConfig::Dpcnn(c) => {
                let n = input.true_len();
                let x = g.gather_rows(table, &input.rows[..n], Some(PAD_ROW))?;
                c.encode(g, x, mode)?
            }
            ArchConfig::Drnn(c) => {
                let x = g.gather_rows(table, &input.rows, Some(PAD_ROW))?;
                c.encode(g, x, &input.pad, mode)?
            }
            ArchConfig::PooledBilstm(c) => {
                let n = input.true_len();
                let x = g.gather_rows(table, &input.rows[..n], Some(PAD_ROW))?;
                c.encode(g, x, mode)?
            }
        };
        let f = g.constant(Tensor::row(
            input.features.iter().map(|&v| T::of(v)).collect(),
        ));
        Ok(g.concat_cols(&[h, f])?)
    }

    /// Pre-softmax scores: `[1, K]`, or `[1, 1]` for a binary schema.
    pub fn logits(
        &self,
        g: &mut Graph<'_, T>,
        input: &ModelInput,
        mode: &mut Mode<'_>,
    ) -> Result<Var> {
        let z = self.encode(g, input, mode)?;
        let prefix = self.architecture().as_str();
        let w = g.param_by_name(&format!("{prefix}.out.weight"))?;
        let b = g.param_by_name(&format!("{prefix}.out.bias"))?;
        Ok(g.affine(z, w, b)?)
    }

    /// Class probabilities from logits; a single logit `s` yields `(1 - p, p)` with `p = sigmoid(s)`.
    pub fn probabilities(&self, logits: &[T]) -> Vec<f64> {
        if logits.len() == 1 {
            let p = sigmoid(logits[0]).as_f64();
            vec![1.0 - p, p]
        } else {
            softmax(logits).into_iter().map(Scalar::as_f64).collect()
        }
    }

    pub fn loss(
        &self,
        g: &mut Graph<'_, T>,
        input: &ModelInput,
        target: usize,
        mode: &mut Mode<'_>,
    ) -> Result<Loss> {
        if target >= self.classes {
            return Err(CoreError::invalid(
                "label",
                format!("`{}`: class {target} of {}", input.id, self.classes),
            ));
        }
        let logits = self.logits(g, input, mode)?;
        let (data, probs) = if self.classes == 2 {
            let (loss, _) = g.binary_cross_entropy(logits, target)?;
            (loss, self.probabilities(g.value(logits).data()))
        } else {
            let (loss, p) = g.softmax_cross_entropy(logits, target)?;
            (loss, p.into_iter().map(Scalar::as_f64).collect())
        };
        let penalty = match &self.config {
            ArchConfig::Dpcnn(c) => c.penalty(g)?,
            _ => None,
        };
        Ok(Loss {
            data,
            penalty,
            probs,
        })
    }

    /// Eval-mode probabilities.
    pub fn predict(&self, input: &ModelInput) -> Result<Vec<f64>> {
        let mut g = Graph::new(&self.params);
        let logits = self.logits(&mut g, input, &mut Mode::Eval)?;
        Ok(self.probabilities(g.value(logits).data()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn architecture_names_round_trip() {
        for a in Architecture::ALL {
            assert_eq!(a.as_str().parse::<Architecture>().unwrap(), a);
            assert_eq!(a.default_config().architecture(), a);
        }
        assert!("cnn".parse::<Architecture>().is_err());
    }

    #[test]
    fn config_json_is_tagged() {
        let json = serde_json::to_value(Architecture::Drnn.default_config()).unwrap();
        assert_eq!(json["arch"], "drnn");
        assert_eq!(json["window"], 8);
        let back: ArchConfig = serde_json::from_value(json).unwrap();
        assert_eq!(back, Architecture::Drnn.default_config());
    }

    #[test]
    fn true_len_ignores_trailing_padding() {
        let x = ModelInput::new("a", vec![3, 0, 2], vec![]).padded(4);
        assert_eq!(x.true_len(), 3);
        assert_eq!(ModelInput::new("b", vec![], vec![]).padded(2).true_len(), 0);
    }
}
