//! Single-layer LSTM over batches of sequences.
//!
//! Gate pre-activations are laid out as four blocks of `H` columns in the
//! order input `i`, forget `f`, cell `g`, output `o`:
//!
//! ```text
//! a_t = x_t·W + h_{t−1}·U + b
//! i, f, o = σ(a_i), σ(a_f), σ(a_o)      g = tanh(a_g)
//! c_t = f ⊙ c_{t−1} + i ⊙ g             h_t = o ⊙ tanh(c_t)
//! ```
//!
//! `W` is stored input-major (`[V, 4H]`) so that a one-hot input selects a
//! contiguous row.

use rand::Rng;

use super::loss::sigmoid;
use super::tensor::gemm;
use super::{NnError, Tensor};

pub const GATES: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `[V, 4H]`
    pub w_input: Tensor,
    /// `[H, 4H]`
    pub w_hidden: Tensor,
    /// `[4H]`
    pub bias: Tensor,
}

impl LstmParams {
    /// Uniform(±1/√fan_in) weights, zero biases except the forget gate at
    /// +1.
    pub fn init(input_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut bias = Tensor::zeros(&[GATES * hidden]);
        bias.data_mut()[hidden..2 * hidden].fill(1.0);
        LstmParams {
            w_input: Tensor::uniform_init(&[input_dim, GATES * hidden], input_dim, rng),
            w_hidden: Tensor::uniform_init(&[hidden, GATES * hidden], hidden, rng),
            bias,
        }
    }

    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        LstmParams {
            w_input: Tensor::zeros(&[input_dim, GATES * hidden]),
            w_hidden: Tensor::zeros(&[hidden, GATES * hidden]),
            bias: Tensor::zeros(&[GATES * hidden]),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hidden.shape()[0]
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.shape()[0]
    }

    fn validate(&self) -> Result<(), NnError> {
        let (v, h) = (self.input_dim(), self.hidden());
        self.w_input.expect_shape("lstm", &[v, GATES * h])?;
        self.w_hidden.expect_shape("lstm", &[h, GATES * h])?;
        self.bias.expect_shape("lstm", &[GATES * h])
    }
}

#[derive(Debug, Clone, Copy)]
pub enum LstmInput<'a> {
    /// `indices[b * steps + t]` is the active feature of sequence `b` at
    /// step `t`.
    OneHot { batch: usize, steps: usize, indices: &'a [usize] },
    /// `[T, B, V]`
    Dense(&'a Tensor),
}

impl LstmInput<'_> {
    fn dims(&self) -> (usize, usize) {
        match *self {
            LstmInput::OneHot { batch, steps, .. } => (steps, batch),
            LstmInput::Dense(t) => (t.shape().first().copied().unwrap_or(0), t.shape().get(1).copied().unwrap_or(0)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    /// `[B, H]`
    pub h: Tensor,
    /// `[B, H]`
    pub c: Tensor,
}

impl LstmState {
    pub fn zeros(batch: usize, hidden: usize) -> Self {
        LstmState { h: Tensor::zeros(&[batch, hidden]), c: Tensor::zeros(&[batch, hidden]) }
    }
}

/// Activations kept for backpropagation through time.
#[derive(Debug, Clone)]
pub struct LstmCache {
    steps: usize,
    batch: usize,
    h_prev: Vec<Vec<f64>>,
    c_prev: Vec<Vec<f64>>,
    /// Post-nonlinearity gate values per step, `[B, 4H]`.
    gates: Vec<Vec<f64>>,
    tanh_c: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct LstmForward {
    /// `[T, B, H]`
    pub outputs: Tensor,
    pub state: LstmState,
    pub cache: LstmCache,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmGrads {
    pub w_input: Tensor,
    pub w_hidden: Tensor,
    pub bias: Tensor,
    /// Gradient w.r.t. a dense input, `[T, B, V]`.
    pub d_input: Option<Tensor>,
}

/// `x_t·W + b` for every step, `[T][B·4H]`.
fn project_inputs(params: &LstmParams, input: &LstmInput<'_>) -> Result<Vec<Vec<f64>>, NnError> {
    let (steps, batch) = input.dims();
    let (v, g) = (params.input_dim(), GATES * params.hidden());
    let bias = params.bias.data();
    let mut out = vec![vec![0.0; batch * g]; steps];
    match *input {
        LstmInput::OneHot { indices, .. } => {
            if indices.len() != batch * steps {
                return Err(NnError::ShapeMismatch {
                    op: "lstm_forward",
                    expected: vec![batch, steps],
                    found: vec![indices.len()],
                });
            }
            let w = params.w_input.data();
            for (t, xw) in out.iter_mut().enumerate() {
                for b in 0..batch {
                    let idx = indices[b * steps + t];
                    if idx >= v {
                        return Err(NnError::IndexOutOfRange { index: idx, len: v });
                    }
                    let row = &w[idx * g..(idx + 1) * g];
                    for ((o, wi), bi) in xw[b * g..(b + 1) * g].iter_mut().zip(row).zip(bias) {
                        *o = wi + bi;
                    }
                }
            }
        }
        LstmInput::Dense(x) => {
            x.expect_shape("lstm_forward", &[steps, batch, v])?;
            for (t, xw) in out.iter_mut().enumerate() {
                for b in 0..batch {
                    xw[b * g..(b + 1) * g].copy_from_slice(bias);
                }
                gemm(batch, v, g, &x.data()[t * batch * v..(t + 1) * batch * v], false, params.w_input.data(), false, 1.0, xw);
            }
        }
    }
    Ok(out)
}

fn run(
    params: &LstmParams,
    input: &LstmInput<'_>,
    initial: Option<&LstmState>,
    keep: bool,
) -> Result<(Option<Tensor>, LstmState, Option<LstmCache>), NnError> {
    params.validate()?;
    let (steps, batch) = input.dims();
    let h_dim = params.hidden();
    let g = GATES * h_dim;
    let mut h = vec![0.0; batch * h_dim];
    let mut c = vec![0.0; batch * h_dim];
    if let Some(s) = initial {
        s.h.expect_shape("lstm_forward", &[batch, h_dim])?;
        s.c.expect_shape("lstm_forward", &[batch, h_dim])?;
        h.copy_from_slice(s.h.data());
        c.copy_from_slice(s.c.data());
    }
    let projected = project_inputs(params, input)?;
    let mut outputs = keep.then(|| Vec::with_capacity(steps * batch * h_dim));
    let mut cache = keep.then(|| LstmCache {
        steps,
        batch,
        h_prev: Vec::with_capacity(steps),
        c_prev: Vec::with_capacity(steps),
        gates: Vec::with_capacity(steps),
        tanh_c: Vec::with_capacity(steps),
    });
    let u = params.w_hidden.data();
    for mut a in projected {
        gemm(batch, h_dim, g, &h, false, u, false, 1.0, &mut a);
        let mut tanh_c = vec![0.0; batch * h_dim];
        let c_prev = c.clone();
        for b in 0..batch {
            let row = &mut a[b * g..(b + 1) * g];
            for j in 0..h_dim {
                let i = sigmoid(row[j]);
                let f = sigmoid(row[h_dim + j]);
                let gg = row[2 * h_dim + j].tanh();
                let o = sigmoid(row[3 * h_dim + j]);
                row[j] = i;
                row[h_dim + j] = f;
                row[2 * h_dim + j] = gg;
                row[3 * h_dim + j] = o;
                let k = b * h_dim + j;
                c[k] = f * c[k] + i * gg;
                tanh_c[k] = c[k].tanh();
            }
        }
        let h_prev = std::mem::replace(&mut h, vec![0.0; batch * h_dim]);
        for b in 0..batch {
            for j in 0..h_dim {
                let k = b * h_dim + j;
                h[k] = a[b * g + 3 * h_dim + j] * tanh_c[k];
            }
        }
        if !h.iter().all(|x| x.is_finite()) || !c.iter().all(|x| x.is_finite()) {
            return Err(NnError::NonFiniteValue { op: "lstm_forward" });
        }
        if let Some(out) = outputs.as_mut() {
            out.extend_from_slice(&h);
        }
        if let Some(cache) = cache.as_mut() {
            cache.h_prev.push(h_prev);
            cache.c_prev.push(c_prev);
            cache.gates.push(a);
            cache.tanh_c.push(tanh_c);
        }
    }
    let state = LstmState { h: Tensor::from_vec(&[batch, h_dim], h)?, c: Tensor::from_vec(&[batch, h_dim], c)? };
    let outputs = outputs.map(|o| Tensor::from_vec(&[steps, batch, h_dim], o)).transpose()?;
    Ok((outputs, state, cache))
}

/// Runs the whole sequence, keeping every hidden state and the cache for
/// [`lstm_backward`]. The state starts at zero unless `initial` is given.
pub fn lstm_forward(
    params: &LstmParams,
    input: &LstmInput<'_>,
    initial: Option<&LstmState>,
) -> Result<LstmForward, NnError> {
    let (outputs, state, cache) = run(params, input, initial, true)?;
    Ok(LstmForward { outputs: outputs.expect("kept"), state, cache: cache.expect("kept") })
}

/// Inference-only forward pass returning the final state.
pub fn lstm_final_state(params: &LstmParams, input: &LstmInput<'_>) -> Result<LstmState, NnError> {
    Ok(run(params, input, None, false)?.1)
}

/// Backpropagation through time. `d_outputs` is `[T, B, H]`, the loss
/// gradient w.r.t. every hidden output.
pub fn lstm_backward(
    params: &LstmParams,
    input: &LstmInput<'_>,
    cache: &LstmCache,
    d_outputs: &Tensor,
) -> Result<LstmGrads, NnError> {
    let (steps, batch) = (cache.steps, cache.batch);
    if input.dims() != (steps, batch) {
        return Err(NnError::ShapeMismatch {
            op: "lstm_backward",
            expected: vec![steps, batch],
            found: vec![input.dims().0, input.dims().1],
        });
    }
    let h_dim = params.hidden();
    let v = params.input_dim();
    let g = GATES * h_dim;
    d_outputs.expect_shape("lstm_backward", &[steps, batch, h_dim])?;

    let mut dw_in = Tensor::zeros(&[v, g]);
    let mut dw_h = Tensor::zeros(&[h_dim, g]);
    let mut db = Tensor::zeros(&[g]);
    let mut d_input = match input {
        LstmInput::Dense(_) => Some(Tensor::zeros(&[steps, batch, v])),
        LstmInput::OneHot { .. } => None,
    };
    let mut dh_next = vec![0.0; batch * h_dim];
    let mut dc_next = vec![0.0; batch * h_dim];
    // gate pre-activation gradients of every step, [T·B, 4H]; the weight
    // gradients are one product each after the loop
    let mut da_all = vec![0.0; steps * batch * g];
    let dout = d_outputs.data();

    for t in (0..steps).rev() {
        let gates = &cache.gates[t];
        let tanh_c = &cache.tanh_c[t];
        let c_prev = &cache.c_prev[t];
        let da = &mut da_all[t * batch * g..(t + 1) * batch * g];
        for b in 0..batch {
            for j in 0..h_dim {
                let k = b * h_dim + j;
                let base = b * g;
                let (i, f, gg, o) =
                    (gates[base + j], gates[base + h_dim + j], gates[base + 2 * h_dim + j], gates[base + 3 * h_dim + j]);
                let dh = dout[t * batch * h_dim + k] + dh_next[k];
                let tc = tanh_c[k];
                let dc = dc_next[k] + dh * o * (1.0 - tc * tc);
                da[base + j] = dc * gg * i * (1.0 - i);
                da[base + h_dim + j] = dc * c_prev[k] * f * (1.0 - f);
                da[base + 2 * h_dim + j] = dc * i * (1.0 - gg * gg);
                da[base + 3 * h_dim + j] = dh * tc * o * (1.0 - o);
                dc_next[k] = dc * f;
            }
        }
        gemm(batch, g, h_dim, da, false, params.w_hidden.data(), true, 0.0, &mut dh_next);
        if let (LstmInput::Dense(_), Some(dx)) = (input, d_input.as_mut()) {
            gemm(
                batch,
                g,
                v,
                da,
                false,
                params.w_input.data(),
                true,
                0.0,
                &mut dx.data_mut()[t * batch * v..(t + 1) * batch * v],
            );
        }
    }

    for row in da_all.chunks_exact(g) {
        for (acc, x) in db.data_mut().iter_mut().zip(row) {
            *acc += x;
        }
    }
    let h_prev_all: Vec<f64> = cache.h_prev.concat();
    gemm(h_dim, steps * batch, g, &h_prev_all, true, &da_all, false, 0.0, dw_h.data_mut());
    match *input {
        LstmInput::OneHot { indices, .. } => {
            let w = dw_in.data_mut();
            for t in 0..steps {
                for b in 0..batch {
                    let idx = indices[b * steps + t];
                    let da = &da_all[(t * batch + b) * g..(t * batch + b + 1) * g];
                    for (acc, x) in w[idx * g..(idx + 1) * g].iter_mut().zip(da) {
                        *acc += x;
                    }
                }
            }
        }
        LstmInput::Dense(x) => gemm(v, steps * batch, g, x.data(), true, &da_all, false, 0.0, dw_in.data_mut()),
    }
    Ok(LstmGrads { w_input: dw_in, w_hidden: dw_h, bias: db, d_input })
}
