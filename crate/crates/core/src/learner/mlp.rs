use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::LearnerError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Output {
    Identity,
    /// `bound * tanh(z)`
    ScaledTanh { bound: f64 },
}

/// Fully connected network with tanh hidden layers. Weights are stored
/// input-major (`w[l]` has shape `in × out`) so a batch is `x · w + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    w: Vec<Array2<f64>>,
    b: Vec<Array1<f64>>,
    output: Output,
}

/// Per-layer gradients, shaped like the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Grads {
    pub w: Vec<Array2<f64>>,
    pub b: Vec<Array1<f64>>,
}

impl Grads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Grads {
            w: net.w.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            b: net.b.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.w.iter().zip(&self.b) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }
}

/// Activations kept from a forward pass for backpropagation: the input of
/// every layer plus the network output.
pub struct Trace {
    inputs: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl Trace {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }
}

impl Mlp {
    /// Hidden and output weights uniform in ±1/√fan_in, except the last
    /// layer which starts in ±3e-3 so initial outputs are near zero.
    pub fn new(sizes: &[usize], output: Output, rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let mut w = Vec::new();
        let mut b = Vec::new();
        for l in 0..sizes.len() - 1 {
            let (i, o) = (sizes[l], sizes[l + 1]);
            let lim = if l + 2 == sizes.len() { 3e-3 } else { 1.0 / (i as f64).sqrt() };
            w.push(Array2::from_shape_simple_fn((i, o), || rng.gen_range(-lim..lim)));
            b.push(Array1::from_shape_simple_fn(o, || rng.gen_range(-lim..lim)));
        }
        Mlp { sizes: sizes.to_vec(), w, b, output }
    }

    pub fn zeros(sizes: &[usize], output: Output) -> Self {
        let w = sizes.windows(2).map(|p| Array2::zeros((p[0], p[1]))).collect();
        let b = sizes.windows(2).map(|p| Array1::zeros(p[1])).collect();
        Mlp { sizes: sizes.to_vec(), w, b, output }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn output_kind(&self) -> Output {
        self.output
    }

    pub fn num_params(&self) -> usize {
        self.w.iter().map(|w| w.len()).sum::<usize>() + self.b.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for (w, b) in self.w.iter().zip(&self.b) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn set_params_flat(&mut self, p: &[f64]) -> Result<(), LearnerError> {
        if p.len() != self.num_params() {
            return Err(LearnerError::Shape(format!("expected {} parameters, got {}", self.num_params(), p.len())));
        }
        let mut it = p.iter().copied();
        for (w, b) in self.w.iter_mut().zip(&mut self.b) {
            w.iter_mut().for_each(|x| *x = it.next().unwrap());
            b.iter_mut().for_each(|x| *x = it.next().unwrap());
        }
        Ok(())
    }

    pub fn from_flat(sizes: &[usize], output: Output, p: &[f64]) -> Result<Self, LearnerError> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(LearnerError::Shape(format!("invalid layer sizes {sizes:?}")));
        }
        let mut net = Mlp::zeros(sizes, output);
        net.set_params_flat(p)?;
        Ok(net)
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().all(|w| w.iter().all(|x| x.is_finite())) && self.b.iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let last = self.w.len() - 1;
        let mut a = x.to_owned();
        for l in 0..=last {
            let mut z = a.dot(&self.w[l]);
            z += &self.b[l];
            a = if l < last { z.mapv_into(f64::tanh) } else { self.finish(z) };
        }
        a
    }

    /// Forward pass of a single input vector.
    pub fn forward_one(&self, x: &[f64]) -> Vec<f64> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        self.forward(view).into_raw_vec_and_offset().0
    }

    pub fn forward_trace(&self, x: ArrayView2<f64>) -> Trace {
        let last = self.w.len() - 1;
        let mut inputs = Vec::with_capacity(self.w.len());
        let mut a = x.to_owned();
        for l in 0..=last {
            let mut z = a.dot(&self.w[l]);
            z += &self.b[l];
            inputs.push(a);
            a = if l < last { z.mapv_into(f64::tanh) } else { self.finish(z) };
        }
        Trace { inputs, output: a }
    }

    fn finish(&self, z: Array2<f64>) -> Array2<f64> {
        match self.output {
            Output::Identity => z,
            Output::ScaledTanh { bound } => z.mapv_into(|v| bound * v.tanh()),
        }
    }

    /// Gradients of `sum(grad_out ⊙ output)` with respect to the parameters
    /// and to the network input.
    pub fn backward(&self, trace: &Trace, grad_out: &Array2<f64>) -> (Grads, Array2<f64>) {
        let last = self.w.len() - 1;
        let mut dz = match self.output {
            Output::Identity => grad_out.clone(),
            Output::ScaledTanh { bound } => {
                let mut d = grad_out.clone();
                d.zip_mut_with(&trace.output, |g, &y| *g *= bound - y * y / bound);
                d
            }
        };
        let mut gw = vec![Array2::zeros((0, 0)); self.w.len()];
        let mut gb = vec![Array1::zeros(0); self.w.len()];
        for l in (0..=last).rev() {
            let a = &trace.inputs[l];
            gw[l] = a.t().dot(&dz);
            gb[l] = dz.sum_axis(Axis(0));
            let mut da = dz.dot(&self.w[l].t());
            if l > 0 {
                da.zip_mut_with(a, |g, &h| *g *= 1.0 - h * h);
            }
            dz = da;
        }
        (Grads { w: gw, b: gb }, dz)
    }

    /// `self ← τ·online + (1−τ)·self`
    pub fn soft_update_from(&mut self, online: &Mlp, tau: f64) -> Result<(), LearnerError> {
        if self.sizes != online.sizes {
            return Err(LearnerError::Shape(format!(
                "soft update between {:?} and {:?}",
                self.sizes, online.sizes
            )));
        }
        for (t, o) in self.w.iter_mut().zip(&online.w) {
            t.zip_mut_with(o, |t, &o| *t = tau * o + (1.0 - tau) * *t);
        }
        for (t, o) in self.b.iter_mut().zip(&online.b) {
            t.zip_mut_with(o, |t, &o| *t = tau * o + (1.0 - tau) * *t);
        }
        Ok(())
    }

    pub(crate) fn params_mut(&mut self) -> impl Iterator<Item = (&mut Array2<f64>, &mut Array1<f64>)> {
        self.w.iter_mut().zip(self.b.iter_mut())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Gradient-descent optimizer state for one network.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    m: Option<Grads>,
    v: Option<Grads>,
    t: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(kind: OptimizerKind, net: &Mlp) -> Self {
        let (m, v) = match kind {
            OptimizerKind::Sgd => (None, None),
            OptimizerKind::Adam => (Some(Grads::zeros_like(net)), Some(Grads::zeros_like(net))),
        };
        Optimizer { kind, m, v, t: 0 }
    }

    /// One descent step `θ ← θ − rate · direction(g)`.
    pub fn step(&mut self, net: &mut Mlp, g: &Grads, rate: f64) {
        match self.kind {
            OptimizerKind::Sgd => {
                for ((w, b), (gw, gb)) in net.params_mut().zip(g.w.iter().zip(&g.b)) {
                    w.scaled_add(-rate, gw);
                    b.scaled_add(-rate, gb);
                }
            }
            OptimizerKind::Adam => {
                self.t += 1;
                let c1 = 1.0 - BETA1.powi(self.t);
                let c2 = 1.0 - BETA2.powi(self.t);
                let (m, v) = (self.m.as_mut().unwrap(), self.v.as_mut().unwrap());
                let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                    *m = BETA1 * *m + (1.0 - BETA1) * g;
                    *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                    *p -= rate * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
                };
                for (l, (w, b)) in net.params_mut().enumerate() {
                    ndarray::Zip::from(w).and(&g.w[l]).and(&mut m.w[l]).and(&mut v.w[l]).for_each(|p, &g, m, v| update(p, g, m, v));
                    ndarray::Zip::from(b).and(&g.b[l]).and(&mut m.b[l]).and(&mut v.b[l]).for_each(|p, &g, m, v| update(p, g, m, v));
                }
            }
        }
    }
}
