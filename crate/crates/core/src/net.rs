//! Velocity network: a small fully-connected net with hand-rolled
//! reverse-mode gradients, sinusoidal positional embeddings for the time and
//! condition inputs, and an Adam optimizer.

use rand::Rng as RandRng;
use serde::{Deserialize, Serialize};

use crate::flow::PathSample;
use crate::linalg::{Mat, Vector};
use crate::{Error, Real};

/// Sinusoidal embedding: each input coordinate expands into
/// `(sin(f_k v), cos(f_k v))` pairs with `f_k = base^(k/F)`, `k = 0..F`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosEmbedding {
    /// Number of frequency pairs per input coordinate.
    pub freq_pairs: usize,
    /// Top of the geometric frequency ladder; `f_0 = 1`, `f_{F-1} < base`.
    pub base: f64,
}

impl Default for PosEmbedding {
    fn default() -> Self {
        PosEmbedding {
            freq_pairs: 8,
            base: 16.0,
        }
    }
}

impl PosEmbedding {
    pub fn output_dim(&self, input_dim: usize) -> usize {
        2 * self.freq_pairs * input_dim
    }

    pub fn embed<S: Real>(&self, v: &Vector<S>) -> Vector<S> {
        let mut out = Vec::with_capacity(self.output_dim(v.dim()));
        for &x in &v.0 {
            for k in 0..self.freq_pairs {
                let f = S::c(self.base.powf(k as f64 / self.freq_pairs as f64));
                out.push((f * x).sin());
                out.push((f * x).cos());
            }
        }
        Vector(out)
    }

    pub fn embed_scalar<S: Real>(&self, t: S) -> Vector<S> {
        self.embed(&Vector(vec![t]))
    }
}

/// Standalone positional embedding of a vector.
pub fn pos_embed<S: Real>(v: &Vector<S>, cfg: &PosEmbedding) -> Vector<S> {
    cfg.embed(v)
}

/// One dense layer, row-major weights of shape (out, in).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct Dense<S> {
    pub rows: usize,
    pub cols: usize,
    pub w: Vec<S>,
    pub b: Vec<S>,
}

impl<S: Real> Dense<S> {
    fn new<R: RandRng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        // He initialization for ReLU stacks
        let scale = S::c((2.0 / cols as f64).sqrt());
        let w = (0..rows * cols).map(|_| S::std_normal(rng) * scale).collect();
        Dense {
            rows,
            cols,
            w,
            b: vec![S::zero(); rows],
        }
    }

    fn affine(&self, x: &[S], out: &mut Vec<S>) {
        out.clear();
        for i in 0..self.rows {
            let row = &self.w[i * self.cols..(i + 1) * self.cols];
            let mut acc = self.b[i];
            for (wij, &xj) in row.iter().zip(x) {
                acc += *wij * xj;
            }
            out.push(acc);
        }
    }

    /// Weight matrix as a dense `Mat`, for spectral-norm diagnostics.
    pub fn weight_mat(&self) -> Mat<S> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.w.clone(),
        }
    }
}

/// Plain MLP with ReLU on hidden layers, identity on the output layer.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct Mlp<S> {
    pub layers: Vec<Dense<S>>,
}

/// Per-layer gradient (or moment) storage mirroring `Mlp` parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct Grads<S> {
    pub w: Vec<Vec<S>>,
    pub b: Vec<Vec<S>>,
}

impl<S: Real> Mlp<S> {
    /// Build an MLP with the given widths, e.g. `[in, h, h, out]`.
    pub fn new<R: RandRng + ?Sized>(widths: &[usize], rng: &mut R) -> Self {
        assert!(widths.len() >= 2, "need at least one layer");
        let layers = widths
            .windows(2)
            .map(|w| Dense::new(w[1], w[0], rng))
            .collect();
        Mlp { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().rows
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim()];
        w.extend(self.layers.iter().map(|l| l.rows));
        w
    }

    pub fn zero_grads(&self) -> Grads<S> {
        Grads {
            w: self.layers.iter().map(|l| vec![S::zero(); l.w.len()]).collect(),
            b: self.layers.iter().map(|l| vec![S::zero(); l.b.len()]).collect(),
        }
    }

    pub fn forward(&self, input: &[S]) -> Vec<S> {
        let mut cur = input.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            layer.affine(&cur, &mut next);
            if li != last {
                for v in next.iter_mut() {
                    if *v < S::zero() {
                        *v = S::zero();
                    }
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// Forward pass keeping post-activation values per layer for backprop.
    pub(crate) fn forward_cached(&self, input: &[S]) -> (Vec<S>, Vec<Vec<S>>) {
        let mut acts: Vec<Vec<S>> = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        let last = self.layers.len() - 1;
        let mut next = Vec::new();
        for (li, layer) in self.layers.iter().enumerate() {
            layer.affine(acts.last().unwrap(), &mut next);
            if li != last {
                for v in next.iter_mut() {
                    if *v < S::zero() {
                        *v = S::zero();
                    }
                }
            }
            acts.push(next.clone());
        }
        (acts.last().unwrap().clone(), acts)
    }

    /// Accumulate gradients of `0.5 * d/dout` style upstream signal through
    /// the net. `grad_out` is dL/d(output); activations come from
    /// `forward_cached`. Returns nothing; grads are summed into `grads`.
    pub(crate) fn backward(&self, acts: &[Vec<S>], grad_out: &[S], grads: &mut Grads<S>) {
        let mut delta = grad_out.to_vec();
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let input = &acts[li];
            let gw = &mut grads.w[li];
            let gb = &mut grads.b[li];
            for i in 0..layer.rows {
                let di = delta[i];
                gb[i] += di;
                let row = &mut gw[i * layer.cols..(i + 1) * layer.cols];
                for (g, &xj) in row.iter_mut().zip(input.iter()) {
                    *g += di * xj;
                }
            }
            if li == 0 {
                break;
            }
            // propagate through W^T then the ReLU of the previous layer
            let mut prev = vec![S::zero(); layer.cols];
            for i in 0..layer.rows {
                let di = delta[i];
                let row = &layer.w[i * layer.cols..(i + 1) * layer.cols];
                for (p, &wij) in prev.iter_mut().zip(row) {
                    *p += di * wij;
                }
            }
            // ReLU gate: acts[li] holds post-activation of layer li-1
            for (p, &a) in prev.iter_mut().zip(&acts[li]) {
                if a <= S::zero() {
                    *p = S::zero();
                }
            }
            delta = prev;
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }
}

impl<S: Real> Grads<S> {
    pub fn scale(&mut self, k: S) {
        for layer in self.w.iter_mut().chain(self.b.iter_mut()) {
            for g in layer {
                *g *= k;
            }
        }
    }

    pub fn max_abs(&self) -> S {
        self.w
            .iter()
            .chain(self.b.iter())
            .flat_map(|l| l.iter())
            .fold(S::zero(), |m, &g| m.max(g.abs()))
    }
}

/// Velocity field `v(t, x, cond)`: the MLP input is the concatenation of
/// `x`, the sinusoidal embedding of `t`, and the caller-supplied condition
/// embedding.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct VelocityNet<S> {
    pub mlp: Mlp<S>,
    pub data_dim: usize,
    pub time_embed: PosEmbedding,
    pub cond_dim: usize,
}

impl<S: Real> VelocityNet<S> {
    /// `hidden` is the per-layer width; `depth` counts weight layers
    /// (4 means input -> h -> h -> h -> output).
    pub fn new<R: RandRng + ?Sized>(
        data_dim: usize,
        cond_dim: usize,
        hidden: usize,
        depth: usize,
        rng: &mut R,
    ) -> Self {
        let time_embed = PosEmbedding::default();
        let in_dim = data_dim + time_embed.output_dim(1) + cond_dim;
        let mut widths = vec![in_dim];
        for _ in 0..depth.saturating_sub(1) {
            widths.push(hidden);
        }
        widths.push(data_dim);
        VelocityNet {
            mlp: Mlp::new(&widths, rng),
            data_dim,
            time_embed,
            cond_dim,
        }
    }

    fn assemble_input(&self, t: S, x: &Vector<S>, cond_embed: &Vector<S>) -> Result<Vec<S>, Error> {
        if x.dim() != self.data_dim || cond_embed.dim() != self.cond_dim {
            return Err(Error::DimMismatch(format!(
                "net expects x dim {} and cond dim {}, got {} and {}",
                self.data_dim,
                self.cond_dim,
                x.dim(),
                cond_embed.dim()
            )));
        }
        let te = self.time_embed.embed_scalar(t);
        let mut input = Vec::with_capacity(self.mlp.input_dim());
        input.extend_from_slice(&x.0);
        input.extend_from_slice(&te.0);
        input.extend_from_slice(&cond_embed.0);
        Ok(input)
    }

    pub fn forward(&self, t: S, x: &Vector<S>, cond_embed: &Vector<S>) -> Result<Vector<S>, Error> {
        let input = self.assemble_input(t, x, cond_embed)?;
        Ok(Vector(self.mlp.forward(&input)))
    }

    /// Mean squared error against the batch targets with exact reverse-mode
    /// gradients. Loss = mean over samples of ||v(t, x_t, cond) - u||^2.
    pub fn loss_and_grad(&self, batch: &[PathSample<S>]) -> Result<(S, Grads<S>), Error> {
        if batch.is_empty() {
            return Err(Error::Empty("loss_and_grad got an empty batch".into()));
        }
        let mut grads = self.mlp.zero_grads();
        let mut loss = S::zero();
        let inv_n = S::one() / S::c(batch.len() as f64);
        for sample in batch {
            let input = self.assemble_input(sample.t, &sample.x_t, &sample.cond_embed)?;
            let (out, acts) = self.mlp.forward_cached(&input);
            let mut grad_out = Vec::with_capacity(out.len());
            for (o, u) in out.iter().zip(&sample.u_target.0) {
                let r = *o - *u;
                loss += r * r * inv_n;
                // d/do of mean ||o - u||^2
                grad_out.push(S::c(2.0) * r * inv_n);
            }
            self.mlp.backward(&acts, &grad_out, &mut grads);
        }
        Ok((loss, grads))
    }
}

/// Adam with bias correction; moments mirror the parameter shapes.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct AdamState<S> {
    pub lr: S,
    pub beta1: S,
    pub beta2: S,
    pub eps: S,
    pub weight_decay: S,
    pub step: u64,
    m: Grads<S>,
    v: Grads<S>,
}

impl<S: Real> AdamState<S> {
    pub fn new(mlp: &Mlp<S>, lr: S) -> Self {
        AdamState {
            lr,
            beta1: S::c(0.9),
            beta2: S::c(0.999),
            eps: S::c(1e-8),
            weight_decay: S::zero(),
            step: 0,
            m: mlp.zero_grads(),
            v: mlp.zero_grads(),
        }
    }

    pub fn step(&mut self, mlp: &mut Mlp<S>, grads: &Grads<S>) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = S::one() - self.beta1.powi(t);
        let bc2 = S::one() - self.beta2.powi(t);
        for li in 0..mlp.layers.len() {
            let layer = &mut mlp.layers[li];
            update_slice(
                &mut layer.w,
                &grads.w[li],
                &mut self.m.w[li],
                &mut self.v.w[li],
                self.lr,
                self.beta1,
                self.beta2,
                self.eps,
                self.weight_decay,
                bc1,
                bc2,
            );
            update_slice(
                &mut layer.b,
                &grads.b[li],
                &mut self.m.b[li],
                &mut self.v.b[li],
                self.lr,
                self.beta1,
                self.beta2,
                self.eps,
                S::zero(),
                bc1,
                bc2,
            );
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn update_slice<S: Real>(
    params: &mut [S],
    grads: &[S],
    m: &mut [S],
    v: &mut [S],
    lr: S,
    b1: S,
    b2: S,
    eps: S,
    wd: S,
    bc1: S,
    bc2: S,
) {
    for i in 0..params.len() {
        let g = grads[i] + wd * params[i];
        m[i] = b1 * m[i] + (S::one() - b1) * g;
        v[i] = b2 * v[i] + (S::one() - b2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

const CHECKPOINT_VERSION: u32 = 1;

/// Versioned checkpoint: widths + parameters + embedding config + optional
/// optimizer state + a hash of the run config that produced it.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct Checkpoint<S> {
    pub version: u32,
    pub config_hash: String,
    pub strategy: String,
    pub net: VelocityNet<S>,
    pub adam: Option<AdamState<S>>,
}

impl<S: Real> Checkpoint<S> {
    pub fn new(net: VelocityNet<S>, strategy: &str, config_hash: &str, adam: Option<AdamState<S>>) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config_hash: config_hash.to_string(),
            strategy: strategy.to_string(),
            net,
            adam,
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), Error> {
        let text = serde_json::to_string(self)
            .map_err(|e| Error::Numerical(format!("checkpoint encode: {e}")))?;
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, Error> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let ckpt: Checkpoint<S> = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.display().to_string(),
            row: 0,
            detail: e.to_string(),
        })?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Format {
                path: path.display().to_string(),
                row: 0,
                detail: format!("unsupported checkpoint version {}", ckpt.version),
            });
        }
        Ok(ckpt)
    }
}
