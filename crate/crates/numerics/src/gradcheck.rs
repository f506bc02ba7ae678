//! Finite-difference verification of analytic gradients.

use rand::seq::index::sample;

use crate::error::NumericsError;
use crate::graph::{Graph, Var};
use crate::params::ParamStore;
use crate::rng::rng_stream;

/// Denominator floor for relative errors, so entries whose true gradient is
/// essentially zero are judged on absolute error instead.
pub const REL_ERR_FLOOR: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    /// Central-difference half step.
    pub step: f64,
    pub tolerance: f64,
    /// Check at most this many randomly chosen entries per tensor.
    pub max_entries_per_tensor: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-6,
            tolerance: 1e-4,
            max_entries_per_tensor: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct TensorCheck {
    pub name: String,
    pub entries_checked: usize,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.tensors
            .iter()
            .map(|t| t.max_rel_err)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_err() < self.tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Compares the analytic gradient of `loss_fn` with central differences for
/// every trainable tensor in `params`.
///
/// `loss_fn` must be deterministic: it is re-run twice per checked entry.
/// Parameters are restored before returning.
pub fn grad_check<F, E>(
    params: &mut ParamStore<f64>,
    opts: &GradCheckOptions,
    loss_fn: F,
) -> Result<GradCheckReport, E>
where
    F: Fn(&mut Graph<'_, f64>) -> Result<Var, E>,
    E: From<NumericsError>,
{
    let analytic = {
        let mut g = Graph::new(&*params);
        let loss = loss_fn(&mut g)?;
        g.backward(loss)?
    };
    let eval = |params: &ParamStore<f64>| -> Result<f64, E> {
        let mut g = Graph::new(params);
        let loss = loss_fn(&mut g)?;
        Ok(g.scalar(loss))
    };

    let ids: Vec<_> = params
        .iter()
        .filter(|(_, p)| p.trainable)
        .map(|(id, _)| id)
        .collect();
    let mut tensors = Vec::with_capacity(ids.len());
    for id in ids {
        let len = params.get(id).value.len();
        let entries: Vec<usize> = match opts.max_entries_per_tensor {
            Some(cap) if cap < len => {
                let mut rng = rng_stream(opts.seed, &[id.index() as u64]);
                let mut picked = sample(&mut rng, len, cap).into_vec();
                picked.sort_unstable();
                picked
            }
            _ => (0..len).collect(),
        };
        let grad = analytic
            .get(id)
            .map(|t| t.data().to_vec())
            .unwrap_or_else(|| vec![0.0; len]);
        let mut check = TensorCheck {
            name: params.get(id).name.clone(),
            entries_checked: entries.len(),
            max_abs_err: 0.0,
            max_rel_err: 0.0,
        };
        for e in entries {
            let orig = params.get(id).value.data()[e];
            params.get_mut(id).value.data_mut()[e] = orig + opts.step;
            let plus = eval(params);
            params.get_mut(id).value.data_mut()[e] = orig - opts.step;
            let minus = eval(params);
            params.get_mut(id).value.data_mut()[e] = orig;
            let numeric = (plus? - minus?) / (2.0 * opts.step);
            let abs = (grad[e] - numeric).abs();
            check.max_abs_err = check.max_abs_err.max(abs);
            check.max_rel_err = check.max_rel_err.max(relative_error(grad[e], numeric));
        }
        tensors.push(check);
    }
    Ok(GradCheckReport {
        tensors,
        tolerance: opts.tolerance,
    })
}
