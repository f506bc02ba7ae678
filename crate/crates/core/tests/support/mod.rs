//! Reference implementations and generators shared by the test targets.
#![allow(dead_code)]

use aggrolab_numerics::{rng_stream, Rng};
use rand::Rng as _;

/// Counts each (gold, predicted) cell by scanning the pairs once per cell.
pub fn brute_confusion(gold: &[usize], predicted: &[usize], k: usize) -> Vec<Vec<usize>> {
    (0..k)
        .map(|g| {
            (0..k)
                .map(|p| {
                    gold.iter()
                        .zip(predicted)
                        .filter(|&(&a, &b)| a == g && b == p)
                        .count()
                })
                .collect()
        })
        .collect()
}

/// `Σ_c n_c / n * 2tp / (2tp + fp + fn)`, counted directly from the pairs.
pub fn brute_weighted_f1(gold: &[usize], predicted: &[usize], k: usize) -> f64 {
    let n = gold.len() as f64;
    let mut total = 0.0;
    for c in 0..k {
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for (&g, &p) in gold.iter().zip(predicted) {
            match (g == c, p == c) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                _ => {}
            }
        }
        let support = (tp + fn_) as f64;
        let den = 2 * tp + fp + fn_;
        let f1 = if den == 0 {
            0.0
        } else {
            2.0 * tp as f64 / den as f64
        };
        total += support / n * f1;
    }
    total
}

/// A random labelling problem: `K` in 2..=5, 1..=60 documents.
pub fn random_case(rng: &mut Rng) -> (Vec<usize>, Vec<usize>, usize) {
    let k = rng.random_range(2..=5);
    let n = rng.random_range(1..=60);
    let skew = rng.random_range(0.0..1.0);
    let gold: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    let predicted = gold
        .iter()
        .map(|&g| {
            if rng.random_bool(skew) {
                g
            } else {
                rng.random_range(0..k)
            }
        })
        .collect();
    (gold, predicted, k)
}

pub fn random_simplex(rng: &mut Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k)
        .map(|_| -rng.random_range(1e-9f64..1.0).ln())
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

pub fn cases(seed: u64) -> Rng {
    rng_stream(seed, &[0xF1])
}

use aggrolab_core::embedding::PAD_ROW;
use aggrolab_core::models::{DrnnConfig, Model, ModelInput};
use aggrolab_numerics::{bilstm, Graph, Mode, Tensor};

/// Nested-loop same-padded convolution of `x [n, ci]` with `w [k, ci, co]`.
pub fn conv_oracle(x: &Tensor<f64>, w: &Tensor<f64>, b: &[f64]) -> Vec<f64> {
    let (n, ci) = (x.shape()[0], x.shape()[1]);
    let (k, co) = (w.shape()[0], w.shape()[2]);
    let pad = (k - 1) / 2;
    let mut out = vec![0.0; n * co];
    for t in 0..n {
        for o in 0..co {
            let mut acc = b[o];
            for j in 0..k {
                let s = t as isize + j as isize - pad as isize;
                if s < 0 || s >= n as isize {
                    continue;
                }
                for i in 0..ci {
                    acc += x.data()[s as usize * ci + i] * w.data()[(j * ci + i) * co + o];
                }
            }
            out[t * co + o] = acc;
        }
    }
    out
}

/// Stride-2 max over windows `{2r, 2r + 1}`, the last one possibly single.
pub fn maxpool_oracle(x: &Tensor<f64>) -> Vec<f64> {
    let (n, c) = (x.rows(), x.cols());
    let mut out = Vec::new();
    for r in 0..n.div_ceil(2) {
        for j in 0..c {
            let m = (2 * r..(2 * r + 2).min(n))
                .map(|t| x.at(t, j))
                .fold(f64::NEG_INFINITY, f64::max);
            out.push(m);
        }
    }
    out
}

pub fn random_tensor(shape: &[usize], rng: &mut Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

pub struct DrnnOracle {
    /// Window states from the model, `[m, 2L]`.
    pub states: Tensor<f64>,
    /// Row `t`: forward half of a BiLSTM over the real words `0..=t` at `t`,
    /// backward half of the same run at position 0.
    pub prefix: Vec<Vec<f64>>,
    /// A single BiLSTM over all real words.
    pub plain: Tensor<f64>,
    /// The model's max-pooled encoding.
    pub encoding: Vec<f64>,
}

pub fn drnn_oracle(c: &DrnnConfig, m: &Model<f64>, input: &ModelInput) -> DrnnOracle {
    let mut g = Graph::new(&m.params);
    let table = g.param_by_name("embedding").unwrap();
    let x = g.gather_rows(table, &input.rows, Some(PAD_ROW)).unwrap();
    let states = c
        .window_states(&mut g, x, &input.pad, &mut Mode::Eval)
        .unwrap();
    let encoding = c.encode(&mut g, x, &input.pad, &mut Mode::Eval).unwrap();
    let fwd = (
        g.param_by_name("drnn.fwd.weight").unwrap(),
        g.param_by_name("drnn.fwd.bias").unwrap(),
    );
    let bwd = (
        g.param_by_name("drnn.bwd.weight").unwrap(),
        g.param_by_name("drnn.bwd.bias").unwrap(),
    );
    let real: Vec<usize> = input
        .rows
        .iter()
        .zip(&input.pad)
        .filter(|(_, &p)| !p)
        .map(|(&r, _)| r)
        .collect();
    let l = c.hidden;
    let mut prefix = Vec::new();
    for t in 0..real.len() {
        let xp = g.gather_rows(table, &real[..=t], Some(PAD_ROW)).unwrap();
        let h = bilstm(&mut g, xp, fwd, bwd).unwrap();
        let h = g.value(h);
        let mut row = h.row_slice(t)[..l].to_vec();
        row.extend_from_slice(&h.row_slice(0)[l..]);
        prefix.push(row);
    }
    let xr = g.gather_rows(table, &real, Some(PAD_ROW)).unwrap();
    let plain = bilstm(&mut g, xr, fwd, bwd).unwrap();
    DrnnOracle {
        states: g.value(states).clone(),
        prefix,
        plain: g.value(plain).clone(),
        encoding: g.value(encoding).data().to_vec(),
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Largest deviation of the DRNN from its oracle: states against prefix
/// runs, forward halves against the plain BiLSTM, encoding against the
/// column-wise max of the prefix rows.
pub fn drnn_oracle_error(o: &DrnnOracle, hidden: usize) -> f64 {
    let mut err: f64 = 0.0;
    let mut pooled = vec![f64::NEG_INFINITY; 2 * hidden];
    for (t, row) in o.prefix.iter().enumerate() {
        err = err.max(max_abs_diff(o.states.row_slice(t), row));
        err = err.max(max_abs_diff(
            &o.states.row_slice(t)[..hidden],
            &o.plain.row_slice(t)[..hidden],
        ));
        for (p, v) in pooled.iter_mut().zip(row) {
            *p = p.max(*v);
        }
    }
    err.max(max_abs_diff(&o.encoding, &pooled))
}
