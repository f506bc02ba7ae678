//! Finite-difference checks for every differentiable layer, on small random
//! problems. Each case reduces its layer output to a scalar with a fixed
//! random weighting so that no gradient entry is trivially uniform.

use rand::Rng as _;

use crate::error::Result;
use crate::gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
use crate::graph::{Graph, PoolMode, Var};
use crate::layers::{bilstm, conv1d_preact, lstm_step, spatial_dropout, Mode};
use crate::params::ParamStore;
use crate::rng::{rng_stream, Rng};
use crate::tensor::Tensor;

fn random(shape: &[usize], rng: &mut Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .expect("shape")
}

/// Scalar `sum(y * r)` for a fixed random `r` drawn from `seed`.
fn project(g: &mut Graph<'_, f64>, y: Var, seed: u64) -> Result<Var> {
    let mut rng = rng_stream(seed, &[0xFEED]);
    let r = random(g.shape(y), &mut rng);
    let r = g.constant(r);
    let yr = g.mul(y, r)?;
    Ok(g.sum(yr))
}

type CaseFn = fn(&mut Graph<'_, f64>, u64) -> Result<Var>;

struct Case {
    name: &'static str,
    params: &'static [(&'static str, &'static [usize])],
    loss: CaseFn,
}

fn p(g: &mut Graph<'_, f64>, name: &str) -> Result<Var> {
    g.param_by_name(name)
}

const CASES: &[Case] = &[
    Case {
        name: "linear",
        params: &[("x", &[3, 4]), ("w", &[4, 5]), ("b", &[5])],
        loss: |g, s| {
            let (x, w, b) = (p(g, "x")?, p(g, "w")?, p(g, "b")?);
            let y = g.affine(x, w, b)?;
            project(g, y, s)
        },
    },
    Case {
        name: "elementwise",
        params: &[("a", &[2, 3]), ("b", &[2, 3])],
        loss: |g, s| {
            let (a, b) = (p(g, "a")?, p(g, "b")?);
            let sa = g.sigmoid(a);
            let tb = g.tanh(b);
            let m = g.mul(sa, tb)?;
            let sc = g.scale(m, 1.7);
            let y = g.add(sc, a)?;
            project(g, y, s)
        },
    },
    Case {
        name: "conv1d_preact",
        params: &[
            ("x", &[5, 3]),
            ("slope", &[3]),
            ("w", &[3, 3, 4]),
            ("b", &[4]),
        ],
        loss: |g, s| {
            let (x, a, w, b) = (p(g, "x")?, p(g, "slope")?, p(g, "w")?, p(g, "b")?);
            let y = conv1d_preact(g, x, a, w, b)?;
            project(g, y, s)
        },
    },
    Case {
        name: "conv1d_region",
        params: &[("x", &[4, 2]), ("w", &[3, 2, 3])],
        loss: |g, s| {
            let (x, w) = (p(g, "x")?, p(g, "w")?);
            let y = g.conv1d(x, w)?;
            project(g, y, s)
        },
    },
    Case {
        name: "maxpool2",
        params: &[("x", &[5, 3])],
        loss: |g, s| {
            let x = p(g, "x")?;
            let y = g.maxpool2(x)?;
            project(g, y, s)
        },
    },
    Case {
        name: "global_pool",
        params: &[("h", &[4, 3])],
        loss: |g, s| {
            let h = p(g, "h")?;
            let mx = g.global_pool(h, 3, PoolMode::Max)?;
            let mean = g.global_pool(h, 3, PoolMode::Mean)?;
            let y = g.concat_cols(&[mx, mean])?;
            project(g, y, s)
        },
    },
    Case {
        name: "concat_slice",
        params: &[("a", &[2, 3]), ("b", &[2, 2])],
        loss: |g, s| {
            let (a, b) = (p(g, "a")?, p(g, "b")?);
            let c = g.concat_cols(&[a, b])?;
            let r = g.concat_rows(&[c, c])?;
            let sr = g.slice_rows(r, 1, 3)?;
            let y = g.slice_cols(sr, 1, 4)?;
            project(g, y, s)
        },
    },
    Case {
        name: "spatial_dropout",
        params: &[("x", &[3, 6])],
        loss: |g, s| {
            let x = p(g, "x")?;
            let mut rng = rng_stream(s, &[0xD0]);
            let y = spatial_dropout(g, x, 0.3, &mut Mode::Train(&mut rng))?;
            project(g, y, s)
        },
    },
    Case {
        name: "gather_rows",
        params: &[("table", &[4, 3])],
        loss: |g, s| {
            let t = p(g, "table")?;
            let y = g.gather_rows(t, &[1, 3, 1, 2], Some(0))?;
            project(g, y, s)
        },
    },
    Case {
        name: "lstm_step",
        params: &[
            ("x", &[1, 3]),
            ("h", &[1, 2]),
            ("c", &[1, 2]),
            ("w", &[5, 8]),
            ("b", &[8]),
        ],
        loss: |g, s| {
            let (x, h, c, w, b) = (p(g, "x")?, p(g, "h")?, p(g, "c")?, p(g, "w")?, p(g, "b")?);
            let (h1, c1) = lstm_step(g, x, h, c, w, b)?;
            let y = g.concat_cols(&[h1, c1])?;
            project(g, y, s)
        },
    },
    Case {
        name: "bilstm",
        params: &[
            ("x", &[4, 3]),
            ("wf", &[5, 8]),
            ("bf", &[8]),
            ("wb", &[5, 8]),
            ("bb", &[8]),
        ],
        loss: |g, s| {
            let x = p(g, "x")?;
            let fwd = (p(g, "wf")?, p(g, "bf")?);
            let bwd = (p(g, "wb")?, p(g, "bb")?);
            let y = bilstm(g, x, fwd, bwd)?;
            project(g, y, s)
        },
    },
    Case {
        name: "softmax_cross_entropy",
        params: &[("z", &[1, 3])],
        loss: |g, s| {
            let z = p(g, "z")?;
            let (loss, _) = g.softmax_cross_entropy(z, (s % 3) as usize)?;
            Ok(loss)
        },
    },
    Case {
        name: "binary_cross_entropy",
        params: &[("z", &[1, 1])],
        loss: |g, s| {
            let z = p(g, "z")?;
            let (loss, _) = g.binary_cross_entropy(z, (s % 2) as usize)?;
            Ok(loss)
        },
    },
    Case {
        name: "l2_penalty",
        params: &[("w", &[3, 2])],
        loss: |g, _| {
            let w = p(g, "w")?;
            let sq = g.sum_squares(w);
            Ok(g.scale(sq, 1e-5))
        },
    },
];

pub fn layer_case_names() -> Vec<&'static str> {
    CASES.iter().map(|c| c.name).collect()
}

/// Runs every layer case for one seed, returning `(name, report)` pairs.
pub fn layer_suite(
    seed: u64,
    opts: &GradCheckOptions,
) -> Result<Vec<(&'static str, GradCheckReport)>> {
    CASES
        .iter()
        .enumerate()
        .map(|(i, case)| {
            let mut rng = rng_stream(seed, &[i as u64]);
            let mut store = ParamStore::new();
            for (name, shape) in case.params {
                store.insert(*name, random(shape, &mut rng), true)?;
            }
            let report = grad_check(&mut store, opts, |g| (case.loss)(g, seed))?;
            Ok((case.name, report))
        })
        .collect()
}
