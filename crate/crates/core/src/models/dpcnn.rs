//! Deep pyramid CNN: a region convolution, a residual block of two
//! pre-activated convolutions, then repeated {stride-2 max pool, two
//! pre-activated convolutions, shortcut} blocks and a global max pool.

use aggrolab_numerics::{conv1d_preact, spatial_dropout, Graph, Mode, PoolMode, Scalar, Var};
use serde::{Deserialize, Serialize};

use super::{Init, ParamSpec};
use crate::error::{CoreError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpcnnConfig {
    /// Channels of the region embedding and of every convolution.
    pub filters: usize,
    pub kernel: usize,
    /// Pooled residual blocks after the first block.
    pub blocks: usize,
    /// Spatial dropout on the embeddings during training.
    pub dropout: f64,
    /// Coefficient of the squared-norm penalty on convolution kernels and biases.
    pub l2: f64,
}

impl Default for DpcnnConfig {
    fn default() -> Self {
        DpcnnConfig {
            filters: 128,
            kernel: 3,
            blocks: 6,
            dropout: 0.3,
            l2: 1e-5,
        }
    }
}

pub const PRELU_INIT: f64 = 0.25;

fn conv_names(block: usize, conv: usize) -> [String; 3] {
    ["slope", "weight", "bias"].map(|p| format!("dpcnn.block{block}.conv{conv}.{p}"))
}

impl DpcnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.filters == 0
            || self.kernel.is_multiple_of(2)
            || !(0.0..1.0).contains(&self.dropout)
            || self.l2 < 0.0
        {
            return Err(CoreError::invalid(
                "dpcnn config",
                format!(
                    "filters {} kernel {} dropout {} l2 {}: need filters >= 1, odd kernel, dropout in [0, 1), l2 >= 0",
                    self.filters, self.kernel, self.dropout, self.l2
                ),
            ));
        }
        Ok(())
    }

    /// Convolutional layers, region convolution included.
    pub fn conv_layers(&self) -> usize {
        1 + 2 * (self.blocks + 1)
    }

    /// Sequence length after each stride-2 pool for an `n`-token input.
    pub fn pooled_lengths(&self, n: usize) -> Vec<usize> {
        (0..self.blocks)
            .scan(n, |len, _| {
                *len = len.div_ceil(2);
                Some(*len)
            })
            .collect()
    }

    pub(crate) fn params(&self, embed_dim: usize) -> Vec<ParamSpec> {
        let (c, k) = (self.filters, self.kernel);
        let mut specs = vec![
            ParamSpec::new(
                "dpcnn.region.weight",
                &[k, embed_dim, c],
                Init::Glorot {
                    fan_in: k * embed_dim,
                    fan_out: k * c,
                },
            ),
            ParamSpec::new("dpcnn.region.bias", &[c], Init::Zeros),
        ];
        for block in 0..=self.blocks {
            for conv in 0..2 {
                let [slope, weight, bias] = conv_names(block, conv);
                specs.push(ParamSpec::new(slope, &[c], Init::Constant(PRELU_INIT)));
                specs.push(ParamSpec::new(
                    weight,
                    &[k, c, c],
                    Init::Glorot {
                        fan_in: k * c,
                        fan_out: k * c,
                    },
                ));
                specs.push(ParamSpec::new(bias, &[c], Init::Zeros));
            }
        }
        specs
    }

    fn block<T: Scalar>(&self, g: &mut Graph<'_, T>, z: Var, block: usize) -> Result<Var> {
        let mut h = z;
        for conv in 0..2 {
            let [slope, weight, bias] = conv_names(block, conv);
            let (s, w, b) = (
                g.param_by_name(&slope)?,
                g.param_by_name(&weight)?,
                g.param_by_name(&bias)?,
            );
            h = conv1d_preact(g, h, s, w, b)?;
        }
        Ok(g.add(z, h)?)
    }

    /// Outputs of the first block and of every pooled block, `[n_i, filters]` each.
    pub fn block_outputs<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        x: Var,
        mode: &mut Mode<'_>,
    ) -> Result<Vec<Var>> {
        let x = spatial_dropout(g, x, self.dropout, mode)?;
        let w = g.param_by_name("dpcnn.region.weight")?;
        let b = g.param_by_name("dpcnn.region.bias")?;
        let region = g.conv1d_bias(x, w, b)?;
        let mut outs = vec![self.block(g, region, 0)?];
        for block in 1..=self.blocks {
            let pooled = g.maxpool2(outs[block - 1])?;
            outs.push(self.block(g, pooled, block)?);
        }
        Ok(outs)
    }

    /// `x [n, d]` (no padding) to the `[1, filters]` encoding.
    pub fn encode<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        x: Var,
        mode: &mut Mode<'_>,
    ) -> Result<Var> {
        let last = *self
            .block_outputs(g, x, mode)?
            .last()
            .expect("first block always present");
        let n = g.shape(last)[0];
        Ok(g.global_pool(last, n, PoolMode::Max)?)
    }

    /// `l2 * Σ θ²` over every convolution kernel and bias.
    pub fn penalty<T: Scalar>(&self, g: &mut Graph<'_, T>) -> Result<Option<Var>> {
        if self.l2 == 0.0 {
            return Ok(None);
        }
        let mut names = vec![
            "dpcnn.region.weight".to_string(),
            "dpcnn.region.bias".to_string(),
        ];
        for block in 0..=self.blocks {
            for conv in 0..2 {
                let [_, weight, bias] = conv_names(block, conv);
                names.push(weight);
                names.push(bias);
            }
        }
        let mut terms = Vec::with_capacity(names.len());
        for name in &names {
            let p = g.param_by_name(name)?;
            terms.push(g.sum_squares(p));
        }
        let mut total = terms[0];
        for &t in &terms[1..] {
            total = g.add(total, t)?;
        }
        Ok(Some(g.scale(total, T::of(self.l2))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_has_fifteen_conv_layers() {
        assert_eq!(DpcnnConfig::default().conv_layers(), 15);
    }

    #[test]
    fn even_kernel_is_rejected() {
        let c = DpcnnConfig {
            kernel: 4,
            ..DpcnnConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
