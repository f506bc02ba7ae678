//! Composite layers built from [`Graph`] primitives.

use rand::Rng as _;

use crate::error::{NumericsError, Result};
use crate::graph::{Graph, Var};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Forward-pass mode. Training mode carries the random stream used by dropout.
pub enum Mode<'r> {
    Train(&'r mut Rng),
    Eval,
}

impl Mode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train(_))
    }
}

/// Pre-activated convolution `W * prelu(x) + b`, same-padded over rows.
pub fn conv1d_preact<T: Scalar>(
    g: &mut Graph<'_, T>,
    x: Var,
    slope: Var,
    w: Var,
    b: Var,
) -> Result<Var> {
    let act = g.prelu(x, slope)?;
    g.conv1d_bias(act, w, b)
}

/// Drops whole embedding channels (columns of `x [n, d]`) with probability
/// `rate` and rescales the survivors by `1 / (1 - rate)`. Identity in eval mode.
pub fn spatial_dropout<T: Scalar>(
    g: &mut Graph<'_, T>,
    x: Var,
    rate: f64,
    mode: &mut Mode<'_>,
) -> Result<Var> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NumericsError::invalid(
            "spatial_dropout",
            format!("rate {rate} outside [0, 1)"),
        ));
    }
    let rng = match mode {
        Mode::Train(rng) if rate > 0.0 => rng,
        _ => return Ok(x),
    };
    let d = g
        .shape(x)
        .get(1)
        .copied()
        .ok_or_else(|| NumericsError::shape("spatial_dropout", "[n, d]", g.shape(x)))?;
    let keep = T::of(1.0 / (1.0 - rate));
    let scales = (0..d)
        .map(|_| {
            if rng.random::<f64>() < rate {
                T::zero()
            } else {
                keep
            }
        })
        .collect();
    g.scale_cols(x, scales)
}

fn lstm_gates<T: Scalar>(
    g: &mut Graph<'_, T>,
    gates: Var,
    c_prev: Option<Var>,
    hidden: usize,
) -> Result<(Var, Var)> {
    let l = hidden;
    let i_pre = g.slice_cols(gates, 0, l)?;
    let i = g.sigmoid(i_pre);
    let o_pre = g.slice_cols(gates, 2 * l, 3 * l)?;
    let o = g.sigmoid(o_pre);
    let cand_pre = g.slice_cols(gates, 3 * l, 4 * l)?;
    let cand = g.tanh(cand_pre);
    let write = g.mul(i, cand)?;
    let c = match c_prev {
        Some(c_prev) => {
            let f_pre = g.slice_cols(gates, l, 2 * l)?;
            let f = g.sigmoid(f_pre);
            let keep = g.mul(f, c_prev)?;
            g.add(keep, write)?
        }
        None => write,
    };
    let c_act = g.tanh(c);
    let h = g.mul(o, c_act)?;
    Ok((h, c))
}

/// One LSTM step on `[h_prev, x_t]`.
///
/// `w` is `[L + d, 4L]` with gate blocks ordered input, forget, output,
/// candidate along the columns; its first `L` rows act on `h_prev`.
pub fn lstm_step<T: Scalar>(
    g: &mut Graph<'_, T>,
    x_t: Var,
    h_prev: Var,
    c_prev: Var,
    w: Var,
    b: Var,
) -> Result<(Var, Var)> {
    let ws = g.shape(w).to_vec();
    let hs = g.shape(h_prev).to_vec();
    if ws.len() != 2
        || !ws[1].is_multiple_of(4)
        || hs != [1, ws[1] / 4]
        || g.shape(c_prev) != hs.as_slice()
    {
        return Err(NumericsError::shape(
            "lstm_step",
            "w [L + d, 4L] with h, c [1, L]",
            &ws,
        ));
    }
    let hx = g.concat_cols(&[h_prev, x_t])?;
    let gates = g.affine(hx, w, b)?;
    lstm_gates(g, gates, Some(c_prev), ws[1] / 4)
}

/// An LSTM direction whose input projection `x W_x + b` has been computed
/// once for the whole sequence, leaving only the recurrent product per step.
pub struct ProjectedLstm {
    rows: Vec<Var>,
    recurrent: Var,
    hidden: usize,
}

impl ProjectedLstm {
    pub fn new<T: Scalar>(g: &mut Graph<'_, T>, x: Var, w: Var, b: Var) -> Result<Self> {
        let ws = g.shape(w).to_vec();
        let xs = g.shape(x).to_vec();
        if ws.len() != 2 || !ws[1].is_multiple_of(4) || xs.len() != 2 || ws[0] != ws[1] / 4 + xs[1]
        {
            return Err(NumericsError::shape(
                "lstm",
                format!("w [L + {}, 4L]", xs.get(1).copied().unwrap_or(0)),
                &ws,
            ));
        }
        let hidden = ws[1] / 4;
        let recurrent = g.slice_rows(w, 0, hidden)?;
        let input = g.slice_rows(w, hidden, ws[0])?;
        let proj = g.affine(x, input, b)?;
        let rows = (0..xs[0])
            .map(|t| g.row(proj, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(ProjectedLstm {
            rows,
            recurrent,
            hidden,
        })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Runs from a zero state over `positions` in the given order, returning
    /// the hidden state after each step.
    pub fn run<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        positions: impl IntoIterator<Item = usize>,
    ) -> Result<Vec<Var>> {
        let mut state: Option<(Var, Var)> = None;
        let mut out = Vec::new();
        for t in positions {
            let xp = *self.rows.get(t).ok_or_else(|| {
                NumericsError::invalid("lstm", format!("position {t} out of {}", self.rows.len()))
            })?;
            let (h, c) = match state {
                // A zero state contributes nothing to the gates and the forget path.
                None => lstm_gates(g, xp, None, self.hidden)?,
                Some((h_prev, c_prev)) => {
                    let rec = g.matmul(h_prev, self.recurrent)?;
                    let gates = g.add(xp, rec)?;
                    lstm_gates(g, gates, Some(c_prev), self.hidden)?
                }
            };
            out.push(h);
            state = Some((h, c));
        }
        Ok(out)
    }
}

/// Bidirectional LSTM over `x [n, d]`; row `t` of the result is the forward
/// state after `x_1..x_t` concatenated with the backward state after `x_n..x_t`.
pub fn bilstm<T: Scalar>(
    g: &mut Graph<'_, T>,
    x: Var,
    forward: (Var, Var),
    backward: (Var, Var),
) -> Result<Var> {
    let n = g.shape(x).first().copied().unwrap_or(0);
    if n == 0 {
        return Err(NumericsError::invalid("bilstm", "empty sequence"));
    }
    let fwd = ProjectedLstm::new(g, x, forward.0, forward.1)?;
    let bwd = ProjectedLstm::new(g, x, backward.0, backward.1)?;
    let hf = fwd.run(g, 0..n)?;
    let mut hb = bwd.run(g, (0..n).rev())?;
    hb.reverse();
    let rows = hf
        .into_iter()
        .zip(hb)
        .map(|(f, b)| g.concat_cols(&[f, b]))
        .collect::<Result<Vec<_>>>()?;
    g.concat_rows(&rows)
}

/// Glorot/Xavier uniform initialisation.
pub fn glorot_uniform<T: Scalar>(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut Rng,
) -> Tensor<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| T::of(rng.random_range(-limit..limit)))
        .collect();
    Tensor::new(shape.to_vec(), data).expect("length matches shape")
}
