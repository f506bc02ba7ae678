//! Disconnected RNN: at every position a BiLSTM reads only the window of the
//! last `k` words, and the window encodings are max-pooled over positions.

use aggrolab_numerics::{spatial_dropout, Graph, Mode, PoolMode, ProjectedLstm, Scalar, Var};
use serde::{Deserialize, Serialize};

use super::ParamSpec;
use crate::error::{CoreError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DrnnConfig {
    /// Window size `k`: position `t` sees words `t - k + 1 ..= t`.
    pub window: usize,
    /// Hidden units per direction.
    pub hidden: usize,
    /// Spatial dropout on the embeddings during training.
    pub dropout: f64,
}

impl Default for DrnnConfig {
    fn default() -> Self {
        DrnnConfig {
            window: 8,
            hidden: 128,
            dropout: 0.0,
        }
    }
}

impl DrnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.hidden == 0 || !(0.0..1.0).contains(&self.dropout) {
            return Err(CoreError::invalid(
                "drnn config",
                format!(
                    "window {} hidden {} dropout {}: need window >= 1, hidden >= 1, dropout in [0, 1)",
                    self.window, self.hidden, self.dropout
                ),
            ));
        }
        Ok(())
    }

    pub(crate) fn params(&self, embed_dim: usize) -> Vec<ParamSpec> {
        let mut specs = ParamSpec::lstm("drnn.fwd", self.hidden, embed_dim).to_vec();
        specs.extend(ParamSpec::lstm("drnn.bwd", self.hidden, embed_dim));
        specs
    }

    /// Real positions of the window ending at `t`, oldest first. Padding
    /// positions are skipped, so a window that reaches before the start of
    /// the text is read exactly as if it were left-padded with no-op steps.
    pub fn window_positions(&self, t: usize, pad: &[bool]) -> Vec<usize> {
        (t.saturating_sub(self.window - 1)..=t)
            .filter(|&s| !pad[s])
            .collect()
    }

    /// Window encodings `h_t` for every real position `t`, as `[m, 2L]` rows.
    pub fn window_states<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        x: Var,
        pad: &[bool],
        mode: &mut Mode<'_>,
    ) -> Result<Var> {
        let n = g.shape(x)[0];
        if pad.len() != n || pad.iter().all(|&p| p) {
            return Err(CoreError::invalid("drnn", "input has no real positions"));
        }
        let x = spatial_dropout(g, x, self.dropout, mode)?;
        let (wf, bf) = (
            g.param_by_name("drnn.fwd.weight")?,
            g.param_by_name("drnn.fwd.bias")?,
        );
        let (wb, bb) = (
            g.param_by_name("drnn.bwd.weight")?,
            g.param_by_name("drnn.bwd.bias")?,
        );
        let fwd = ProjectedLstm::new(g, x, wf, bf)?;
        let bwd = ProjectedLstm::new(g, x, wb, bb)?;
        let mut rows = Vec::new();
        for t in (0..n).filter(|&t| !pad[t]) {
            let window = self.window_positions(t, pad);
            let f = *fwd
                .run(g, window.iter().copied())?
                .last()
                .expect("window holds t");
            let b = *bwd
                .run(g, window.iter().rev().copied())?
                .last()
                .expect("window holds t");
            rows.push(g.concat_cols(&[f, b])?);
        }
        Ok(g.concat_rows(&rows)?)
    }

    /// `x [n, d]` with padding mask to the max-pooled `[1, 2L]` encoding.
    pub fn encode<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        x: Var,
        pad: &[bool],
        mode: &mut Mode<'_>,
    ) -> Result<Var> {
        let h = self.window_states(g, x, pad, mode)?;
        let m = g.shape(h)[0];
        Ok(g.global_pool(h, m, PoolMode::Max)?)
    }
}
