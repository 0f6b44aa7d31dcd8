//! GRU cell and the GRU + dense + softmax classifier, with backpropagation
//! through time over fixed-length windows.
//!
//! Gate layout: the input kernel `w` is `D x 3H` and the recurrent kernel `u`
//! is `H x 3H`, columns ordered `[update z | reset r | candidate h~]`.
//!
//! ```text
//! z  = sigmoid(x Wz + h Uz + bz)
//! r  = sigmoid(x Wr + h Ur + br)
//! h~ = tanh(x Wh + (r * h) Uh + bh)
//! h' = (1 - z) * h + z * h~
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activation::{sigmoid, softmax_in_place};
use super::params::{GradientSet, Parameters};
use super::DenseParams;
use crate::{HgrError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `D x 3H`, row-major.
    pub w: Vec<f64>,
    /// `H x 3H`, row-major.
    pub u: Vec<f64>,
    /// `3H`.
    pub b: Vec<f64>,
}

impl GruParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        GruParams {
            input_dim,
            hidden_dim,
            w: vec![0.0; input_dim * 3 * hidden_dim],
            u: vec![0.0; hidden_dim * 3 * hidden_dim],
            b: vec![0.0; 3 * hidden_dim],
        }
    }

    pub fn glorot<R: Rng>(rng: &mut R, input_dim: usize, hidden_dim: usize) -> Self {
        GruParams {
            input_dim,
            hidden_dim,
            w: super::glorot_uniform(rng, input_dim, 3 * hidden_dim),
            u: super::glorot_uniform(rng, hidden_dim, 3 * hidden_dim),
            b: vec![0.0; 3 * hidden_dim],
        }
    }

    fn check(&self) -> Result<()> {
        let (d, h) = (self.input_dim, self.hidden_dim);
        if self.w.len() != d * 3 * h || self.u.len() != h * 3 * h || self.b.len() != 3 * h {
            return Err(HgrError::Shape("GRU parameter shapes".into()));
        }
        Ok(())
    }
}

/// One GRU step (reference implementation, unbatched).
pub fn gru_step(x: &[f64], h_prev: &[f64], p: &GruParams) -> Result<Vec<f64>> {
    p.check()?;
    let (d, h) = (p.input_dim, p.hidden_dim);
    if x.len() != d || h_prev.len() != h {
        return Err(HgrError::Shape(format!("gru_step x {} (want {d}), h {} (want {h})", x.len(), h_prev.len())));
    }
    super::ensure_finite(x, "gru_step input")?;
    super::ensure_finite(h_prev, "gru_step hidden state")?;
    let mut cache = StepCache::new(h);
    let mut out = vec![0.0; h];
    step_forward(p, x, h_prev, &mut out, &mut cache);
    super::ensure_finite(&out, "gru_step output")?;
    Ok(out)
}

/// Per-step intermediates kept for the backward pass.
#[derive(Debug, Clone)]
struct StepCache {
    z: Vec<f64>,
    r: Vec<f64>,
    hc: Vec<f64>,
}

impl StepCache {
    fn new(h: usize) -> Self {
        StepCache { z: vec![0.0; h], r: vec![0.0; h], hc: vec![0.0; h] }
    }
}

const MAX_GATES: usize = 3 * 64;

fn step_forward(p: &GruParams, x: &[f64], h_prev: &[f64], h_out: &mut [f64], c: &mut StepCache) {
    let h = p.hidden_dim;
    let h3 = 3 * h;
    let mut buf = [0.0f64; MAX_GATES];
    assert!(h3 <= MAX_GATES, "GRU hidden size above {} units is not supported", MAX_GATES / 3);
    let a = &mut buf[..h3];
    a.copy_from_slice(&p.b);
    for (i, xi) in x.iter().enumerate() {
        let row = &p.w[i * h3..(i + 1) * h3];
        for (aj, wj) in a.iter_mut().zip(row) {
            *aj += xi * wj;
        }
    }
    for (k, hk) in h_prev.iter().enumerate() {
        let row = &p.u[k * h3..k * h3 + 2 * h];
        for (aj, uj) in a[..2 * h].iter_mut().zip(row) {
            *aj += hk * uj;
        }
    }
    for j in 0..h {
        c.z[j] = sigmoid(a[j]);
        c.r[j] = sigmoid(a[h + j]);
    }
    for k in 0..h {
        let rh = c.r[k] * h_prev[k];
        let row = &p.u[k * h3 + 2 * h..(k + 1) * h3];
        for (aj, uj) in a[2 * h..].iter_mut().zip(row) {
            *aj += rh * uj;
        }
    }
    for j in 0..h {
        c.hc[j] = a[2 * h + j].tanh();
        h_out[j] = (1.0 - c.z[j]) * h_prev[j] + c.z[j] * c.hc[j];
    }
}

/// GRU layer followed by a dense softmax head, evaluated on the last step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruNet {
    pub gru: GruParams,
    pub dense: DenseParams,
}

/// Forward intermediates for one window.
#[derive(Debug, Clone)]
pub struct WindowTrace {
    /// `(len + 1) x H` hidden states, row 0 is the zero initial state.
    hs: Vec<f64>,
    steps: Vec<StepCache>,
    pub logits: Vec<f64>,
}

impl GruNet {
    pub fn zeros(input_dim: usize, hidden_dim: usize, classes: usize) -> Self {
        GruNet { gru: GruParams::zeros(input_dim, hidden_dim), dense: DenseParams::zeros(hidden_dim, classes) }
    }

    pub fn init<R: Rng>(rng: &mut R, input_dim: usize, hidden_dim: usize, classes: usize) -> Self {
        GruNet { gru: GruParams::glorot(rng, input_dim, hidden_dim), dense: DenseParams::glorot(rng, hidden_dim, classes) }
    }

    pub fn input_dim(&self) -> usize {
        self.gru.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.gru.hidden_dim
    }

    pub fn classes(&self) -> usize {
        self.dense.outputs()
    }

    /// Runs one `len x D` window (row-major) from a zero hidden state.
    pub fn trace(&self, window: &[f64]) -> WindowTrace {
        let (d, h) = (self.input_dim(), self.hidden_dim());
        let len = window.len() / d;
        let mut hs = vec![0.0; (len + 1) * h];
        let mut steps = Vec::with_capacity(len);
        for t in 0..len {
            let mut c = StepCache::new(h);
            let (prev, next) = hs.split_at_mut((t + 1) * h);
            step_forward(&self.gru, &window[t * d..(t + 1) * d], &prev[t * h..], &mut next[..h], &mut c);
            steps.push(c);
        }
        let last = &hs[len * h..];
        let c = self.classes();
        let mut logits = self.dense.bias.to_vec();
        for (k, hk) in last.iter().enumerate() {
            for j in 0..c {
                logits[j] += hk * self.dense.weights[[k, j]];
            }
        }
        WindowTrace { hs, steps, logits }
    }

    pub fn logits(&self, window: &[f64]) -> Vec<f64> {
        self.trace(window).logits
    }

    pub fn probs(&self, window: &[f64]) -> Vec<f64> {
        let mut l = self.logits(window);
        softmax_in_place(&mut l);
        l
    }

    /// Accumulates parameter gradients (and optionally the input gradient)
    /// of a scalar whose derivative w.r.t. the logits is `dlogits`.
    pub fn backward_window(
        &self,
        window: &[f64],
        tr: &WindowTrace,
        dlogits: &[f64],
        grads: Option<&mut GradientSet>,
        dx: Option<&mut [f64]>,
    ) {
        let (d, h) = (self.input_dim(), self.hidden_dim());
        let h3 = 3 * h;
        let c = self.classes();
        let len = tr.steps.len();
        let mut grads = grads;
        let mut dx = dx;

        let last = &tr.hs[len * h..];
        let mut dh = vec![0.0; h];
        for k in 0..h {
            let mut s = 0.0;
            for j in 0..c {
                s += dlogits[j] * self.dense.weights[[k, j]];
            }
            dh[k] = s;
        }
        if let Some(g) = grads.as_deref_mut() {
            let gdw = &mut g.tensors[3];
            for k in 0..h {
                for j in 0..c {
                    gdw[k * c + j] += last[k] * dlogits[j];
                }
            }
            for (b, dl) in g.tensors[4].iter_mut().zip(dlogits) {
                *b += dl;
            }
        }

        let mut da = vec![0.0; h3];
        let mut dh_prev = vec![0.0; h];
        for t in (0..len).rev() {
            let hp = &tr.hs[t * h..(t + 1) * h];
            let sc = &tr.steps[t];
            for j in 0..h {
                let z = sc.z[j];
                da[j] = dh[j] * (sc.hc[j] - hp[j]) * z * (1.0 - z);
                da[2 * h + j] = dh[j] * z * (1.0 - sc.hc[j] * sc.hc[j]);
                dh_prev[j] = dh[j] * (1.0 - z);
            }
            // candidate path through r * h
            for k in 0..h {
                let row = &self.gru.u[k * h3 + 2 * h..(k + 1) * h3];
                let mut drh = 0.0;
                for (dj, uj) in da[2 * h..].iter().zip(row) {
                    drh += dj * uj;
                }
                let r = sc.r[k];
                da[h + k] = drh * hp[k] * r * (1.0 - r);
                dh_prev[k] += drh * r;
            }
            for k in 0..h {
                let row = &self.gru.u[k * h3..k * h3 + 2 * h];
                let mut s = 0.0;
                for (dj, uj) in da[..2 * h].iter().zip(row) {
                    s += dj * uj;
                }
                dh_prev[k] += s;
            }
            let x = &window[t * d..(t + 1) * d];
            if let Some(g) = grads.as_deref_mut() {
                let (gw, rest) = g.tensors.split_at_mut(1);
                let (gu, rest) = rest.split_at_mut(1);
                let gb = &mut rest[0];
                for (i, xi) in x.iter().enumerate() {
                    for (gj, dj) in gw[0][i * h3..(i + 1) * h3].iter_mut().zip(&da) {
                        *gj += xi * dj;
                    }
                }
                for k in 0..h {
                    let hk = hp[k];
                    let rhk = sc.r[k] * hk;
                    let row = &mut gu[0][k * h3..(k + 1) * h3];
                    for j in 0..2 * h {
                        row[j] += hk * da[j];
                    }
                    for j in 2 * h..h3 {
                        row[j] += rhk * da[j];
                    }
                }
                for (gj, dj) in gb.iter_mut().zip(&da) {
                    *gj += dj;
                }
            }
            if let Some(dx) = dx.as_deref_mut() {
                for i in 0..d {
                    let row = &self.gru.w[i * h3..(i + 1) * h3];
                    let mut s = 0.0;
                    for (dj, wj) in da.iter().zip(row) {
                        s += dj * wj;
                    }
                    dx[t * d + i] += s;
                }
            }
            std::mem::swap(&mut dh, &mut dh_prev);
        }
    }

    /// Mean sparse cross-entropy over a batch of windows and its gradient.
    ///
    /// `windows` is `batch x len x D` row-major. When `input_grad` is set the
    /// returned [`GradientSet::input`] has the same layout as `windows`.
    pub fn loss_and_gradients(
        &self,
        windows: &[f64],
        labels: &[usize],
        len: usize,
        input_grad: bool,
    ) -> Result<(f64, GradientSet)> {
        let (loss, mut g) = self.loss_and_gradient_sum(windows, labels, len, input_grad)?;
        let n = labels.len() as f64;
        g.scale(1.0 / n);
        if let Some(inp) = g.input.as_mut() {
            inp.iter_mut().for_each(|x| *x /= n);
        }
        Ok((loss / n, g))
    }

    /// Summed (not averaged) cross-entropy and gradient; used to split a
    /// minibatch into independently computed chunks.
    pub fn loss_and_gradient_sum(
        &self,
        windows: &[f64],
        labels: &[usize],
        len: usize,
        input_grad: bool,
    ) -> Result<(f64, GradientSet)> {
        let d = self.input_dim();
        let c = self.classes();
        if len == 0 || windows.len() != labels.len() * len * d {
            return Err(HgrError::Shape(format!(
                "{} window values for {} windows of {len}x{d}",
                windows.len(),
                labels.len()
            )));
        }
        let mut g = GradientSet::zeros_like(self);
        let mut dx_all = if input_grad { Some(vec![0.0; windows.len()]) } else { None };
        let mut loss = 0.0;
        for (b, &label) in labels.iter().enumerate() {
            if label >= c {
                return Err(HgrError::Label { label, classes: c });
            }
            let w = &windows[b * len * d..(b + 1) * len * d];
            let tr = self.trace(w);
            let mut p = tr.logits.clone();
            softmax_in_place(&mut p);
            loss += super::loss::sparse_ce_loss(&p, label)?;
            let mut dl = p;
            dl[label] -= 1.0;
            let dx = dx_all.as_mut().map(|v| &mut v[b * len * d..(b + 1) * len * d]);
            self.backward_window(w, &tr, &dl, Some(&mut g), dx);
        }
        if !loss.is_finite() {
            return Err(HgrError::Numeric("cross-entropy loss".into()));
        }
        g.input = dx_all;
        if !g.is_finite() {
            return Err(HgrError::Numeric("GRU gradients".into()));
        }
        Ok((loss, g))
    }

    /// Logit of `class` and its gradient w.r.t. the input window.
    pub fn logit_input_gradient(&self, window: &[f64], class: usize) -> (f64, Vec<f64>) {
        let tr = self.trace(window);
        let mut dl = vec![0.0; self.classes()];
        dl[class] = 1.0;
        let mut dx = vec![0.0; window.len()];
        self.backward_window(window, &tr, &dl, None, Some(&mut dx));
        (tr.logits[class], dx)
    }
}

impl Parameters for GruNet {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![
            &self.gru.w,
            &self.gru.u,
            &self.gru.b,
            self.dense.weights.as_slice().expect("standard layout"),
            self.dense.bias.as_slice().expect("standard layout"),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            &mut self.gru.w,
            &mut self.gru.u,
            &mut self.gru.b,
            self.dense.weights.as_slice_mut().expect("standard layout"),
            self.dense.bias.as_slice_mut().expect("standard layout"),
        ]
    }

    fn tensor_names(&self) -> Vec<String> {
        ["gru.kernel", "gru.recurrent_kernel", "gru.bias", "dense.kernel", "dense.bias"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }
}
