//! Pooled BiLSTM: the last hidden state concatenated with max- and
//! mean-pooled hidden states over the sequence.

use aggrolab_numerics::{bilstm, spatial_dropout, Graph, Mode, PoolMode, Scalar, Var};
use serde::{Deserialize, Serialize};

use super::ParamSpec;
use crate::error::{CoreError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PooledBilstmConfig {
    /// Hidden units per direction.
    pub hidden: usize,
    /// Spatial dropout on the embeddings during training.
    pub dropout: f64,
}

impl Default for PooledBilstmConfig {
    fn default() -> Self {
        PooledBilstmConfig {
            hidden: 256,
            dropout: 0.3,
        }
    }
}

impl PooledBilstmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || !(0.0..1.0).contains(&self.dropout) {
            return Err(CoreError::invalid(
                "pooled_bilstm config",
                format!(
                    "hidden {} dropout {}: need hidden >= 1, dropout in [0, 1)",
                    self.hidden, self.dropout
                ),
            ));
        }
        Ok(())
    }

    pub(crate) fn params(&self, embed_dim: usize) -> Vec<ParamSpec> {
        let mut specs = ParamSpec::lstm("pooled.fwd", self.hidden, embed_dim).to_vec();
        specs.extend(ParamSpec::lstm("pooled.bwd", self.hidden, embed_dim));
        specs
    }

    /// `x [n, d]` (no padding) to `h_n ⊕ max ⊕ mean`, width `6L`.
    pub fn encode<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        x: Var,
        mode: &mut Mode<'_>,
    ) -> Result<Var> {
        let x = spatial_dropout(g, x, self.dropout, mode)?;
        let fwd = (
            g.param_by_name("pooled.fwd.weight")?,
            g.param_by_name("pooled.fwd.bias")?,
        );
        let bwd = (
            g.param_by_name("pooled.bwd.weight")?,
            g.param_by_name("pooled.bwd.bias")?,
        );
        let h = bilstm(g, x, fwd, bwd)?;
        let n = g.shape(h)[0];
        let last = g.row(h, n - 1)?;
        let max = g.global_pool(h, n, PoolMode::Max)?;
        let mean = g.global_pool(h, n, PoolMode::Mean)?;
        Ok(g.concat_cols(&[last, max, mean])?)
    }
}
