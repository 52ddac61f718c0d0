//! Small feedforward networks with hand-rolled backprop, used for the
//! learner policies, ensemble members and safety classifiers.
//!
//! Rectifier hidden layers; the output head is either linear (regression,
//! squared-error loss) or logistic (classification, cross-entropy loss).
//! Everything is deterministic given the seeds.

use std::io::{self, BufRead, Write};

use ndarray::{Array2, ArrayView2, Axis, LinalgScalar};
use rand::prelude::*;
use thiserror::Error;

use crate::float::{lit, Real};
use crate::seeded::named_rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("input length {got} does not match input layer size {expected}")]
    InputSize { expected: usize, got: usize },
    #[error("target length {got} does not match output layer size {expected}")]
    TargetSize { expected: usize, got: usize },
    #[error("network needs at least an input and an output layer")]
    TooFewLayers,
    #[error("training data is empty")]
    EmptyData,
    #[error("loss became non-finite at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },
    #[error("ensemble needs at least two members")]
    TooFewMembers,
    #[error("ensemble members disagree on output shape")]
    MemberShapeMismatch,
    #[error("evaluation point sits on a rectifier kink (min |preactivation| = {min_abs})")]
    NearKink { min_abs: f64 },
    #[error("malformed parameter file: {0}")]
    BadParamFile(String),
    #[error("parameter io: {0}")]
    ParamIo(String),
}

/// Output-layer behavior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputHead {
    /// Identity outputs, squared-error loss (averaged over output dims).
    Linear,
    /// Sigmoid outputs, binary cross-entropy loss.
    Logistic,
}

/// Gradient-step rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    /// Plain minibatch gradient descent.
    Sgd,
    /// Adam with the usual moment estimates.
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 32,
            iterations: 200,
            seed: 0,
            optimizer: Optimizer::Sgd,
        }
    }
}

/// Losses observed at the start and end of a training call.
#[derive(Debug, Clone, Copy)]
pub struct TrainReport {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub iterations: usize,
}

/// Dense feedforward network. Weights are row-major `[out][in]` per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<F> {
    sizes: Vec<usize>,
    weights: Vec<Vec<F>>,
    biases: Vec<Vec<F>>,
    head: OutputHead,
}

/// Layer sizes of the simulated learner policy: twelve state inputs,
/// seven hidden layers, four action outputs.
pub fn policy_sizes() -> Vec<usize> {
    vec![12, 64, 128, 472, 512, 256, 64, 42, 4]
}

/// Layer sizes of the safety classifier: four hidden layers, one logit.
pub fn classifier_sizes() -> Vec<usize> {
    vec![12, 64, 128, 64, 42, 1]
}

struct Trace<F> {
    /// Activations per layer, index 0 is the input.
    acts: Vec<Vec<F>>,
    /// Preactivations per weight layer.
    preacts: Vec<Vec<F>>,
}

impl<F: Real> Mlp<F> {
    /// Uniform fan-in initialization, `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`
    /// for both weights and biases.
    pub fn new(sizes: &[usize], head: OutputHead, seed: u64) -> Result<Self, NnError> {
        if sizes.len() < 2 {
            return Err(NnError::TooFewLayers);
        }
        let mut rng = named_rng(seed, "mlp-init");
        let mut weights = Vec::with_capacity(sizes.len() - 1);
        let mut biases = Vec::with_capacity(sizes.len() - 1);
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| lit(rng.gen_range(-bound..=bound)))
                    .collect(),
            );
            biases.push((0..fan_out).map(|_| lit(rng.gen_range(-bound..=bound))).collect());
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            weights,
            biases,
            head,
        })
    }

    /// All parameters zero.
    pub fn zeros(sizes: &[usize], head: OutputHead) -> Result<Self, NnError> {
        if sizes.len() < 2 {
            return Err(NnError::TooFewLayers);
        }
        let weights = sizes.windows(2).map(|w| vec![F::zero(); w[0] * w[1]]).collect();
        let biases = sizes.windows(2).map(|w| vec![F::zero(); w[1]]).collect();
        Ok(Self {
            sizes: sizes.to_vec(),
            weights,
            biases,
            head,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn head(&self) -> OutputHead {
        self.head
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    fn check_input(&self, x: &[F]) -> Result<(), NnError> {
        if x.len() != self.input_size() {
            return Err(NnError::InputSize {
                expected: self.input_size(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn check_target(&self, t: &[F]) -> Result<(), NnError> {
        if t.len() != self.output_size() {
            return Err(NnError::TargetSize {
                expected: self.output_size(),
                got: t.len(),
            });
        }
        Ok(())
    }

    fn layer_forward(&self, layer: usize, input: &[F], out: &mut Vec<F>) {
        let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
        let w = &self.weights[layer];
        let b = &self.biases[layer];
        out.clear();
        for i in 0..n_out {
            let row = &w[i * n_in..(i + 1) * n_in];
            let mut acc = b[i];
            for (wv, xv) in row.iter().zip(input) {
                acc = acc + *wv * *xv;
            }
            out.push(acc);
        }
    }

    /// Deterministic feedforward evaluation.
    pub fn forward(&self, x: &[F]) -> Result<Vec<F>, NnError> {
        self.check_input(x)?;
        let layers = self.weights.len();
        let mut current = x.to_vec();
        let mut next = Vec::new();
        for layer in 0..layers {
            self.layer_forward(layer, &current, &mut next);
            if layer + 1 < layers {
                for v in next.iter_mut() {
                    *v = v.max(F::zero());
                }
            }
            std::mem::swap(&mut current, &mut next);
        }
        if self.head == OutputHead::Logistic {
            for v in current.iter_mut() {
                *v = sigmoid(*v);
            }
        }
        Ok(current)
    }

    fn forward_trace(&self, x: &[F]) -> Trace<F> {
        let layers = self.weights.len();
        let mut acts = Vec::with_capacity(layers + 1);
        let mut preacts = Vec::with_capacity(layers);
        acts.push(x.to_vec());
        for layer in 0..layers {
            let mut z = Vec::new();
            self.layer_forward(layer, acts.last().unwrap(), &mut z);
            let a = if layer + 1 < layers {
                z.iter().map(|&v| v.max(F::zero())).collect()
            } else {
                z.clone()
            };
            preacts.push(z);
            acts.push(a);
        }
        acts
            .last_mut()
            .map(|out| {
                if self.head == OutputHead::Logistic {
                    for v in out.iter_mut() {
                        *v = sigmoid(*v);
                    }
                }
            })
            .unwrap();
        Trace { acts, preacts }
    }

    /// Per-sample loss: mean squared error over output dims for the linear
    /// head, mean binary cross-entropy for the logistic head.
    pub fn loss(&self, x: &[F], target: &[F]) -> Result<F, NnError> {
        self.check_input(x)?;
        self.check_target(target)?;
        let trace = self.forward_trace(x);
        Ok(self.loss_from_trace(&trace, target))
    }

    fn loss_from_trace(&self, trace: &Trace<F>, target: &[F]) -> F {
        let d = lit::<F>(self.output_size() as f64);
        match self.head {
            OutputHead::Linear => {
                let out = trace.acts.last().unwrap();
                out.iter()
                    .zip(target)
                    .map(|(&y, &t)| (y - t) * (y - t))
                    .sum::<F>()
                    / d
            }
            OutputHead::Logistic => {
                // Stable cross-entropy straight from the logits.
                let logits = trace.preacts.last().unwrap();
                logits
                    .iter()
                    .zip(target)
                    .map(|(&z, &t)| {
                        let zmax = z.max(F::zero());
                        zmax - z * t + (F::one() + (-z.abs()).exp()).ln()
                    })
                    .sum::<F>()
                    / d
            }
        }
    }

    /// Mean loss over a dataset.
    pub fn mean_loss(&self, data: &[(Vec<F>, Vec<F>)]) -> Result<F, NnError> {
        if data.is_empty() {
            return Err(NnError::EmptyData);
        }
        let mut acc = F::zero();
        for (x, t) in data {
            acc = acc + self.loss(x, t)?;
        }
        Ok(acc / lit(data.len() as f64))
    }

    fn zero_grads(&self) -> (Vec<Vec<F>>, Vec<Vec<F>>) {
        (
            self.weights.iter().map(|w| vec![F::zero(); w.len()]).collect(),
            self.biases.iter().map(|b| vec![F::zero(); b.len()]).collect(),
        )
    }

    /// Accumulate one sample's gradients; returns the sample loss.
    fn backprop_into(
        &self,
        x: &[F],
        target: &[F],
        gw: &mut [Vec<F>],
        gb: &mut [Vec<F>],
    ) -> F {
        let layers = self.weights.len();
        let trace = self.forward_trace(x);
        let loss = self.loss_from_trace(&trace, target);
        let d = lit::<F>(self.output_size() as f64);

        // dL/dz for the output layer; both heads reduce to a residual scale.
        let mut delta: Vec<F> = match self.head {
            OutputHead::Linear => trace
                .acts
                .last()
                .unwrap()
                .iter()
                .zip(target)
                .map(|(&y, &t)| lit::<F>(2.0) * (y - t) / d)
                .collect(),
            OutputHead::Logistic => trace
                .acts
                .last()
                .unwrap()
                .iter()
                .zip(target)
                .map(|(&y, &t)| (y - t) / d)
                .collect(),
        };

        for layer in (0..layers).rev() {
            let n_in = self.sizes[layer];
            let input = &trace.acts[layer];
            let w = &self.weights[layer];
            let gw_l = &mut gw[layer];
            let gb_l = &mut gb[layer];
            for (i, &dv) in delta.iter().enumerate() {
                gb_l[i] = gb_l[i] + dv;
                let grow = &mut gw_l[i * n_in..(i + 1) * n_in];
                for (g, &a) in grow.iter_mut().zip(input) {
                    *g = *g + dv * a;
                }
            }
            if layer == 0 {
                break;
            }
            // delta_prev = W^T delta, masked by the rectifier derivative.
            let mut prev = vec![F::zero(); n_in];
            for (i, &dv) in delta.iter().enumerate() {
                let row = &w[i * n_in..(i + 1) * n_in];
                for (p, &wv) in prev.iter_mut().zip(row) {
                    *p = *p + dv * wv;
                }
            }
            for (p, &z) in prev.iter_mut().zip(&trace.preacts[layer - 1]) {
                if z <= F::zero() {
                    *p = F::zero();
                }
            }
            delta = prev;
        }
        loss
    }

    /// Full-dataset gradient of the mean loss. Used by the finite-difference
    /// checks and small fits.
    pub fn gradient(
        &self,
        data: &[(Vec<F>, Vec<F>)],
    ) -> Result<(Vec<Vec<F>>, Vec<Vec<F>>), NnError> {
        if data.is_empty() {
            return Err(NnError::EmptyData);
        }
        let (mut gw, mut gb) = self.zero_grads();
        for (x, t) in data {
            self.check_input(x)?;
            self.check_target(t)?;
            self.backprop_into(x, t, &mut gw, &mut gb);
        }
        let scale = F::one() / lit(data.len() as f64);
        for g in gw.iter_mut().chain(gb.iter_mut()) {
            for v in g.iter_mut() {
                *v = *v * scale;
            }
        }
        Ok((gw, gb))
    }

    fn flat_param(&self, idx: usize) -> (usize, usize, bool) {
        // Maps a flat index to (layer, offset, is_bias).
        let mut rest = idx;
        for (layer, w) in self.weights.iter().enumerate() {
            if rest < w.len() {
                return (layer, rest, false);
            }
            rest -= w.len();
        }
        for (layer, b) in self.biases.iter().enumerate() {
            if rest < b.len() {
                return (layer, rest, true);
            }
            rest -= b.len();
        }
        panic!("parameter index out of range");
    }

    fn param_mut(&mut self, idx: usize) -> &mut F {
        let (layer, offset, is_bias) = self.flat_param(idx);
        if is_bias {
            &mut self.biases[layer][offset]
        } else {
            &mut self.weights[layer][offset]
        }
    }

    fn grad_at(gw: &[Vec<F>], gb: &[Vec<F>], map: (usize, usize, bool)) -> F {
        let (layer, offset, is_bias) = map;
        if is_bias {
            gb[layer][offset]
        } else {
            gw[layer][offset]
        }
    }

    /// Smallest rectifier preactivation magnitude at `x`; a measure of how
    /// far the point is from a kink.
    pub fn kink_distance(&self, x: &[F]) -> Result<F, NnError> {
        self.check_input(x)?;
        let trace = self.forward_trace(x);
        let layers = self.weights.len();
        let mut min_abs = F::infinity();
        for z in trace.preacts.iter().take(layers.saturating_sub(1)) {
            for &v in z {
                min_abs = min_abs.min(v.abs());
            }
        }
        Ok(min_abs)
    }

    /// Compare analytic gradients to central finite differences at one
    /// point; returns the maximum relative deviation over the checked
    /// coordinates (all of them, or a seeded sample for large nets).
    ///
    /// Points closer than `kink_margin` to a rectifier kink are rejected,
    /// since the two-sided difference straddles the nondifferentiability.
    pub fn grad_check(
        &self,
        x: &[F],
        target: &[F],
        sample: Option<(usize, u64)>,
        kink_margin: f64,
    ) -> Result<F, NnError> {
        self.check_input(x)?;
        self.check_target(target)?;
        let kink = self.kink_distance(x)?;
        if kink.to_f64().unwrap_or(0.0) < kink_margin {
            return Err(NnError::NearKink {
                min_abs: kink.to_f64().unwrap_or(0.0),
            });
        }
        let data = vec![(x.to_vec(), target.to_vec())];
        let (gw, gb) = self.gradient(&data)?;
        let total = self.param_count();
        let indices: Vec<usize> = match sample {
            None => (0..total).collect(),
            Some((k, seed)) => {
                let mut rng = named_rng(seed, "grad-check-coords");
                (0..k.min(total)).map(|_| rng.gen_range(0..total)).collect()
            }
        };
        let h = lit::<F>(1e-5);
        let mut probe = self.clone();
        let mut worst = F::zero();
        for idx in indices {
            let map = self.flat_param(idx);
            let original = *probe.param_mut(idx);
            *probe.param_mut(idx) = original + h;
            let up = probe.loss(x, target)?;
            *probe.param_mut(idx) = original - h;
            let down = probe.loss(x, target)?;
            *probe.param_mut(idx) = original;
            let fd = (up - down) / (lit::<F>(2.0) * h);
            let analytic = Self::grad_at(&gw, &gb, map);
            let rel = (analytic - fd).abs() / (analytic.abs() + fd.abs() + lit(1e-8));
            worst = worst.max(rel);
        }
        Ok(worst)
    }

    /// Write parameters in the versioned text format (one layer per pair of
    /// `W`/`b` lines, values as hexadecimal IEEE-754 bit patterns).
    pub fn save_params<W: Write>(&self, mut w: W) -> Result<(), NnError> {
        let io_err = |e: io::Error| NnError::ParamIo(e.to_string());
        writeln!(w, "mlp-params v1").map_err(io_err)?;
        let head = match self.head {
            OutputHead::Linear => "linear",
            OutputHead::Logistic => "logistic",
        };
        writeln!(w, "head {head}").map_err(io_err)?;
        let sizes: Vec<String> = self.sizes.iter().map(|s| s.to_string()).collect();
        writeln!(w, "sizes {}", sizes.join(" ")).map_err(io_err)?;
        for (layer, (weights, biases)) in self.weights.iter().zip(&self.biases).enumerate() {
            let ws: Vec<String> = weights
                .iter()
                .map(|v| format!("{:016x}", v.to_f64().unwrap_or(f64::NAN).to_bits()))
                .collect();
            let bs: Vec<String> = biases
                .iter()
                .map(|v| format!("{:016x}", v.to_f64().unwrap_or(f64::NAN).to_bits()))
                .collect();
            writeln!(w, "W{layer} {}", ws.join(" ")).map_err(io_err)?;
            writeln!(w, "b{layer} {}", bs.join(" ")).map_err(io_err)?;
        }
        writeln!(w, "end").map_err(io_err)?;
        Ok(())
    }

    /// Load parameters written by `save_params`.
    pub fn load_params<R: BufRead>(r: R) -> Result<Self, NnError> {
        let bad = |msg: &str| NnError::BadParamFile(msg.to_string());
        let mut lines = r.lines();
        let mut next_line = || -> Result<String, NnError> {
            lines
                .next()
                .ok_or_else(|| bad("unexpected end of file"))?
                .map_err(|e| NnError::ParamIo(e.to_string()))
        };
        if next_line()?.trim() != "mlp-params v1" {
            return Err(bad("missing or unsupported version header"));
        }
        let head_line = next_line()?;
        let head = match head_line.trim() {
            "head linear" => OutputHead::Linear,
            "head logistic" => OutputHead::Logistic,
            _ => return Err(bad("bad head line")),
        };
        let sizes_line = next_line()?;
        let sizes: Vec<usize> = sizes_line
            .trim()
            .strip_prefix("sizes ")
            .ok_or_else(|| bad("bad sizes line"))?
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| bad("bad layer size")))
            .collect::<Result<_, _>>()?;
        let mut net = Self::zeros(&sizes, head)?;
        let parse_values = |line: &str, prefix: &str, expected: usize| -> Result<Vec<F>, NnError> {
            let rest = line
                .trim()
                .strip_prefix(prefix)
                .ok_or_else(|| bad(&format!("expected line starting with {prefix:?}")))?;
            let values: Vec<F> = rest
                .split_whitespace()
                .map(|tok| {
                    u64::from_str_radix(tok, 16)
                        .map(|bits| lit(f64::from_bits(bits)))
                        .map_err(|_| bad("bad hex value"))
                })
                .collect::<Result<_, _>>()?;
            if values.len() != expected {
                return Err(bad("layer size does not match value count"));
            }
            Ok(values)
        };
        for layer in 0..sizes.len() - 1 {
            let w_line = next_line()?;
            net.weights[layer] =
                parse_values(&w_line, &format!("W{layer} "), sizes[layer] * sizes[layer + 1])?;
            let b_line = next_line()?;
            net.biases[layer] = parse_values(&b_line, &format!("b{layer} "), sizes[layer + 1])?;
        }
        if next_line()?.trim() != "end" {
            return Err(bad("missing end marker"));
        }
        Ok(net)
    }
}

impl<F: Real + LinalgScalar> Mlp<F> {
    /// Batch-averaged gradients and loss over a stacked minibatch, computed
    /// with matrix products so the weight matrices stream through memory
    /// once per batch instead of once per sample. Agrees with the
    /// per-sample `gradient` path to rounding error.
    fn batch_gradient(
        &self,
        inputs: &Array2<F>,
        targets: &Array2<F>,
    ) -> (Vec<Vec<F>>, Vec<Vec<F>>, F) {
        let layers = self.weights.len();
        let batch = inputs.nrows();
        let d_out = lit::<F>(self.output_size() as f64);
        let scale = F::one() / (d_out * lit(batch as f64));

        // Forward, keeping the preactivations.
        let mut acts: Vec<Array2<F>> = Vec::with_capacity(layers + 1);
        let mut preacts: Vec<Array2<F>> = Vec::with_capacity(layers);
        acts.push(inputs.clone());
        for layer in 0..layers {
            let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
            let w = ArrayView2::from_shape((n_out, n_in), &self.weights[layer])
                .expect("weight shape");
            let mut z = acts[layer].dot(&w.t());
            let b = &self.biases[layer];
            for mut row in z.rows_mut() {
                for (v, &bv) in row.iter_mut().zip(b) {
                    *v = *v + bv;
                }
            }
            let a = if layer + 1 < layers {
                z.mapv(|v| v.max(F::zero()))
            } else {
                z.clone()
            };
            preacts.push(z);
            acts.push(a);
        }

        // Head loss and dL/dz of the output layer, already batch-averaged.
        let z_out = preacts.last().unwrap();
        let (loss, mut delta) = match self.head {
            OutputHead::Linear => {
                let diff = z_out - targets;
                let loss = diff.iter().map(|&v| v * v).sum::<F>() * scale;
                (loss, diff.mapv(|v| lit::<F>(2.0) * v * scale))
            }
            OutputHead::Logistic => {
                let mut loss = F::zero();
                for (&z, &t) in z_out.iter().zip(targets.iter()) {
                    let zmax = z.max(F::zero());
                    loss = loss + zmax - z * t + (F::one() + (-z.abs()).exp()).ln();
                }
                let probs = z_out.mapv(sigmoid);
                (loss * scale, (probs - targets).mapv(|v| v * scale))
            }
        };

        let mut gw: Vec<Vec<F>> = Vec::with_capacity(layers);
        let mut gb: Vec<Vec<F>> = Vec::with_capacity(layers);
        for _ in 0..layers {
            gw.push(Vec::new());
            gb.push(Vec::new());
        }
        for layer in (0..layers).rev() {
            let grads = delta.t().dot(&acts[layer]);
            gw[layer] = grads.into_raw_vec_and_offset().0;
            gb[layer] = delta.sum_axis(Axis(0)).to_vec();
            if layer == 0 {
                break;
            }
            let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
            let w = ArrayView2::from_shape((n_out, n_in), &self.weights[layer])
                .expect("weight shape");
            let mut prev = delta.dot(&w);
            prev.zip_mut_with(&preacts[layer - 1], |p, &z| {
                if z <= F::zero() {
                    *p = F::zero();
                }
            });
            delta = prev;
        }
        (gw, gb, loss)
    }

    /// Run `config.iterations` minibatch gradient steps with seeded
    /// shuffling. Aborts if the loss turns non-finite.
    pub fn train(
        &mut self,
        data: &[(Vec<F>, Vec<F>)],
        config: &TrainConfig,
    ) -> Result<TrainReport, NnError> {
        if data.is_empty() {
            return Err(NnError::EmptyData);
        }
        for (x, t) in data {
            self.check_input(x)?;
            self.check_target(t)?;
        }
        let initial_loss = self.mean_loss(data)?.to_f64().unwrap_or(f64::NAN);
        let batch = config.batch_size.max(1).min(data.len());
        let lr = lit::<F>(config.learning_rate);
        let mut rng = named_rng(config.seed, "train-shuffle");
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut cursor = order.len();
        let (n_in, n_out) = (self.input_size(), self.output_size());

        // Adam moment buffers are only materialized when needed.
        let mut adam: Option<(Vec<Vec<F>>, Vec<Vec<F>>, Vec<Vec<F>>, Vec<Vec<F>>)> =
            match config.optimizer {
                Optimizer::Sgd => None,
                Optimizer::Adam { .. } => {
                    let (mw, mb) = self.zero_grads();
                    let (vw, vb) = self.zero_grads();
                    Some((mw, mb, vw, vb))
                }
            };

        let mut inputs = Array2::<F>::zeros((batch, n_in));
        let mut targets = Array2::<F>::zeros((batch, n_out));
        for iteration in 0..config.iterations {
            for row in 0..batch {
                if cursor == order.len() {
                    order.shuffle(&mut rng);
                    cursor = 0;
                }
                let (x, t) = &data[order[cursor]];
                cursor += 1;
                for (j, &v) in x.iter().enumerate() {
                    inputs[(row, j)] = v;
                }
                for (j, &v) in t.iter().enumerate() {
                    targets[(row, j)] = v;
                }
            }
            let (gw, gb, batch_loss) = self.batch_gradient(&inputs, &targets);
            if !batch_loss.is_finite() {
                return Err(NnError::NonFiniteLoss { iteration });
            }
            match (&config.optimizer, &mut adam) {
                (Optimizer::Sgd, _) => {
                    for (param, grad) in self
                        .weights
                        .iter_mut()
                        .chain(self.biases.iter_mut())
                        .zip(gw.iter().chain(gb.iter()))
                    {
                        for (p, &g) in param.iter_mut().zip(grad) {
                            *p = *p - lr * g;
                        }
                    }
                }
                (
                    Optimizer::Adam {
                        beta1,
                        beta2,
                        epsilon,
                    },
                    Some((mw, mb, vw, vb)),
                ) => {
                    let b1 = lit::<F>(*beta1);
                    let b2 = lit::<F>(*beta2);
                    let eps = lit::<F>(*epsilon);
                    let t_step = (iteration + 1) as i32;
                    let corr1 = F::one() - b1.powi(t_step);
                    let corr2 = F::one() - b2.powi(t_step);
                    for ((param, grad), (m, v)) in self
                        .weights
                        .iter_mut()
                        .chain(self.biases.iter_mut())
                        .zip(gw.iter().chain(gb.iter()))
                        .zip(
                            mw.iter_mut()
                                .chain(mb.iter_mut())
                                .zip(vw.iter_mut().chain(vb.iter_mut())),
                        )
                    {
                        for i in 0..param.len() {
                            let g = grad[i];
                            m[i] = b1 * m[i] + (F::one() - b1) * g;
                            v[i] = b2 * v[i] + (F::one() - b2) * g * g;
                            let m_hat = m[i] / corr1;
                            let v_hat = v[i] / corr2;
                            param[i] = param[i] - lr * m_hat / (v_hat.sqrt() + eps);
                        }
                    }
                }
                _ => unreachable!("adam state exists iff optimizer is adam"),
            }
        }
        let final_loss = self.mean_loss(data)?.to_f64().unwrap_or(f64::NAN);
        if !final_loss.is_finite() {
            return Err(NnError::NonFiniteLoss {
                iteration: config.iterations,
            });
        }
        Ok(TrainReport {
            initial_loss,
            final_loss,
            iterations: config.iterations,
        })
    }
}

fn sigmoid<F: Real>(z: F) -> F {
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

/// Per-output-dimension population variance across ensemble members, plus
/// the mean-over-dims aggregate.
pub fn ensemble_variance<F: Real>(
    members: &[Mlp<F>],
    x: &[F],
) -> Result<(Vec<F>, F), NnError> {
    let (_, var) = ensemble_moments(members, x)?;
    let d = lit::<F>(var.len() as f64);
    let aggregate = var.iter().cloned().sum::<F>() / d;
    Ok((var, aggregate))
}

/// Mean and population variance of member outputs.
pub fn ensemble_moments<F: Real>(
    members: &[Mlp<F>],
    x: &[F],
) -> Result<(Vec<F>, Vec<F>), NnError> {
    if members.len() < 2 {
        return Err(NnError::TooFewMembers);
    }
    let outputs: Vec<Vec<F>> = members
        .iter()
        .map(|m| m.forward(x))
        .collect::<Result<_, _>>()?;
    let d = outputs[0].len();
    if outputs.iter().any(|o| o.len() != d) {
        return Err(NnError::MemberShapeMismatch);
    }
    let n = lit::<F>(members.len() as f64);
    let mut mean = vec![F::zero(); d];
    for out in &outputs {
        for (m, &v) in mean.iter_mut().zip(out) {
            *m = *m + v / n;
        }
    }
    let mut var = vec![F::zero(); d];
    for out in &outputs {
        for ((v, &m), &y) in var.iter_mut().zip(&mean).zip(out) {
            let diff = y - m;
            *v = *v + diff * diff / n;
        }
    }
    Ok((mean, var))
}
