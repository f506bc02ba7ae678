//! First-order optimizers.

use serde::{Deserialize, Serialize};

use crate::error::{NumericsError, Result};
use crate::params::{ParamGrads, ParamStore};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    #[serde(rename = "rmsprop")]
    RmsProp,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    /// Adam first-moment decay.
    pub beta1: f64,
    /// Adam second-moment decay.
    pub beta2: f64,
    /// RMSProp moving-average decay.
    pub rho: f64,
    pub epsilon: f64,
}

impl OptimizerConfig {
    pub fn adam(lr: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            rho: 0.9,
            epsilon: 1e-8,
        }
    }

    pub fn rmsprop(lr: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::RmsProp,
            ..OptimizerConfig::adam(lr)
        }
    }

    pub fn for_kind(kind: OptimizerKind, lr: f64) -> Self {
        match kind {
            OptimizerKind::Adam => Self::adam(lr),
            OptimizerKind::RmsProp => Self::rmsprop(lr),
        }
    }
}

/// Optimizer state: per-parameter moment buffers and the step counter.
#[derive(Clone, Debug)]
pub struct Optimizer<T> {
    config: OptimizerConfig,
    step: u64,
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(config: OptimizerConfig, params: &ParamStore<T>) -> Self {
        let zeros = || {
            params
                .iter()
                .map(|(_, p)| Tensor::zeros(p.value.shape()))
                .collect::<Vec<_>>()
        };
        Optimizer {
            config,
            step: 0,
            first: match config.kind {
                OptimizerKind::Adam => zeros(),
                OptimizerKind::RmsProp => Vec::new(),
            },
            second: zeros(),
        }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update to every trainable parameter.
    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &ParamGrads<T>) -> Result<()> {
        if grads.len() != params.len() || self.second.len() != params.len() {
            return Err(NumericsError::invalid(
                "optimizer",
                "gradient/parameter count mismatch",
            ));
        }
        let trainable: Vec<_> = params
            .iter()
            .filter(|(_, p)| p.trainable)
            .map(|(id, _)| id)
            .collect();
        for &id in &trainable {
            if grads.get(id).is_none() {
                return Err(NumericsError::MissingGrad(params.get(id).name.clone()));
            }
        }
        self.step += 1;
        let c = self.config;
        let lr = T::of(c.lr);
        let eps = T::of(c.epsilon);
        for id in trainable {
            let grad = grads.get(id).expect("checked above");
            let param = params.get_mut(id);
            if grad.shape() != param.value.shape() {
                return Err(NumericsError::shape(
                    "optimizer",
                    format!("{:?}", param.value.shape()),
                    grad.shape(),
                ));
            }
            let i = id.index();
            match c.kind {
                OptimizerKind::Adam => {
                    let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
                    let bc1 = T::one() - T::of(c.beta1.powi(self.step as i32));
                    let bc2 = T::one() - T::of(c.beta2.powi(self.step as i32));
                    let m = self.first[i].data_mut();
                    let v = self.second[i].data_mut();
                    for (((w, &gv), mk), vk) in param
                        .value
                        .data_mut()
                        .iter_mut()
                        .zip(grad.data())
                        .zip(m)
                        .zip(v)
                    {
                        *mk = b1 * *mk + (T::one() - b1) * gv;
                        *vk = b2 * *vk + (T::one() - b2) * gv * gv;
                        let m_hat = *mk / bc1;
                        let v_hat = *vk / bc2;
                        *w -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
                OptimizerKind::RmsProp => {
                    let rho = T::of(c.rho);
                    let v = self.second[i].data_mut();
                    for ((w, &gv), vk) in param.value.data_mut().iter_mut().zip(grad.data()).zip(v)
                    {
                        *vk = rho * *vk + (T::one() - rho) * gv * gv;
                        *w -= lr * gv / (vk.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}
