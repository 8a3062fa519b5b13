use serde::{Deserialize, Serialize};

use super::{affine, affine_backward, check_len, matvec_add, Grads, NnError, ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Tanh,
}

impl Activation {
    fn apply(self, x: &mut [f64]) {
        if self == Activation::Tanh {
            x.iter_mut().for_each(|v| *v = v.tanh());
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Fully connected layer `activation(W x + b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTrace {
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

impl Dense {
    /// Register a layer with the given initial weights and zero bias.
    pub fn register(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        activation: Activation,
        weight: Vec<f64>,
    ) -> Self {
        let weight = store.add(format!("{name}.weight"), output, input, weight);
        let bias = store.add(format!("{name}.bias"), output, 1, vec![0.0; output]);
        Self {
            weight,
            bias,
            input,
            output,
            activation,
        }
    }

    pub fn forward(&self, store: &ParamStore, x: &[f64]) -> Result<Vec<f64>, NnError> {
        check_len("dense input", self.input, x.len())?;
        let mut out = vec![0.0; self.output];
        affine(store.get(self.weight), store.get(self.bias), x, &mut out);
        self.activation.apply(&mut out);
        Ok(out)
    }

    pub fn forward_traced(&self, store: &ParamStore, x: &[f64]) -> Result<DenseTrace, NnError> {
        let output = self.forward(store, x)?;
        Ok(DenseTrace {
            input: x.to_vec(),
            output,
        })
    }

    /// Accumulate parameter gradients and return the gradient w.r.t. the input.
    pub fn backward(
        &self,
        store: &ParamStore,
        trace: &DenseTrace,
        d_out: &[f64],
        grads: &mut Grads,
    ) -> Result<Vec<f64>, NnError> {
        check_len("dense output gradient", self.output, d_out.len())?;
        let d_pre: Vec<f64> = d_out
            .iter()
            .zip(&trace.output)
            .map(|(g, y)| g * self.activation.derivative_from_output(*y))
            .collect();
        let mut dx = vec![0.0; self.input];
        let mut db = std::mem::take(&mut grads.data[self.bias.0]);
        affine_backward(
            store.get(self.weight),
            &trace.input,
            &d_pre,
            grads.get_mut(self.weight),
            Some(&mut db),
            Some(&mut dx),
        );
        grads.data[self.bias.0] = db;
        Ok(dx)
    }
}

/// Hidden and cell vectors of an LSTM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrentState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl RecurrentState {
    pub fn zeros(size: usize) -> Self {
        Self {
            h: vec![0.0; size],
            c: vec![0.0; size],
        }
    }

    pub fn size(&self) -> usize {
        self.h.len()
    }

    pub fn is_finite(&self) -> bool {
        self.h.iter().chain(&self.c).all(|x| x.is_finite())
    }
}

/// Single-layer LSTM cell. Gate blocks are stacked input, forget, cell, output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lstm {
    pub w_input: ParamId,
    pub w_hidden: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmTrace {
    pub x: Vec<f64>,
    pub prev: RecurrentState,
    /// Gate activations, `4 * hidden` long in block order i, f, g, o.
    pub gates: Vec<f64>,
    pub next: RecurrentState,
    pub tanh_c: Vec<f64>,
}

impl Lstm {
    pub fn register(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        w_input: Vec<f64>,
        w_hidden: Vec<f64>,
    ) -> Self {
        let w_input = store.add(format!("{name}.w_input"), 4 * hidden, input, w_input);
        let w_hidden = store.add(format!("{name}.w_hidden"), 4 * hidden, hidden, w_hidden);
        let bias = store.add(format!("{name}.bias"), 4 * hidden, 1, vec![0.0; 4 * hidden]);
        Self {
            w_input,
            w_hidden,
            bias,
            input,
            hidden,
        }
    }

    fn check(&self, x: &[f64], state: &RecurrentState) -> Result<(), NnError> {
        check_len("lstm input", self.input, x.len())?;
        check_len("lstm hidden state", self.hidden, state.h.len())?;
        check_len("lstm cell state", self.hidden, state.c.len())
    }

    fn gates(&self, store: &ParamStore, x: &[f64], state: &RecurrentState) -> Vec<f64> {
        let n = self.hidden;
        let mut z = vec![0.0; 4 * n];
        affine(store.get(self.w_input), store.get(self.bias), x, &mut z);
        matvec_add(store.get(self.w_hidden), &state.h, &mut z);
        for (k, zk) in z.iter_mut().enumerate() {
            *zk = if (2 * n..3 * n).contains(&k) { zk.tanh() } else { sigmoid(*zk) };
        }
        z
    }

    pub fn step(&self, store: &ParamStore, x: &[f64], state: &RecurrentState) -> Result<RecurrentState, NnError> {
        Ok(self.step_traced(store, x, state)?.next)
    }

    pub fn step_traced(&self, store: &ParamStore, x: &[f64], state: &RecurrentState) -> Result<LstmTrace, NnError> {
        self.check(x, state)?;
        let n = self.hidden;
        let gates = self.gates(store, x, state);
        let (i, rest) = gates.split_at(n);
        let (f, rest) = rest.split_at(n);
        let (g, o) = rest.split_at(n);
        let mut next = RecurrentState::zeros(n);
        let mut tanh_c = vec![0.0; n];
        for k in 0..n {
            next.c[k] = f[k] * state.c[k] + i[k] * g[k];
            tanh_c[k] = next.c[k].tanh();
            next.h[k] = o[k] * tanh_c[k];
        }
        Ok(LstmTrace {
            x: x.to_vec(),
            prev: state.clone(),
            gates,
            next,
            tanh_c,
        })
    }

    /// Backpropagate `(dh, dc)` on the new state. Returns gradients w.r.t.
    /// the input and the previous state.
    pub fn backward(
        &self,
        store: &ParamStore,
        trace: &LstmTrace,
        dh: &[f64],
        dc: &[f64],
        grads: &mut Grads,
    ) -> Result<(Vec<f64>, RecurrentState), NnError> {
        let n = self.hidden;
        check_len("lstm hidden gradient", n, dh.len())?;
        check_len("lstm cell gradient", n, dc.len())?;
        let g8 = &trace.gates;
        let mut dz = vec![0.0; 4 * n];
        let mut d_prev = RecurrentState::zeros(n);
        for k in 0..n {
            let (i, f, g, o) = (g8[k], g8[n + k], g8[2 * n + k], g8[3 * n + k]);
            let tc = trace.tanh_c[k];
            let dc_total = dc[k] + dh[k] * o * (1.0 - tc * tc);
            let d_o = dh[k] * tc;
            let d_i = dc_total * g;
            let d_g = dc_total * i;
            let d_f = dc_total * trace.prev.c[k];
            d_prev.c[k] = dc_total * f;
            dz[k] = d_i * i * (1.0 - i);
            dz[n + k] = d_f * f * (1.0 - f);
            dz[2 * n + k] = d_g * (1.0 - g * g);
            dz[3 * n + k] = d_o * o * (1.0 - o);
        }
        let mut dx = vec![0.0; self.input];
        let mut db = std::mem::take(&mut grads.data[self.bias.0]);
        affine_backward(
            store.get(self.w_input),
            &trace.x,
            &dz,
            grads.get_mut(self.w_input),
            Some(&mut db),
            Some(&mut dx),
        );
        grads.data[self.bias.0] = db;
        affine_backward(
            store.get(self.w_hidden),
            &trace.prev.h,
            &dz,
            grads.get_mut(self.w_hidden),
            None,
            Some(&mut d_prev.h),
        );
        Ok((dx, d_prev))
    }
}
