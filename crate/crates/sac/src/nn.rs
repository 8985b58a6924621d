//! Small fully connected networks with hand-written backprop.

use ndarray::{Array1, Array2, Axis, Zip};
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Scalar, SacError};

/// Layer sizes of a rectifier MLP with a linear output layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dims,
            output_dim,
        }
    }

    pub fn validate(&self) -> Result<(), SacError> {
        if self.hidden_dims.is_empty() {
            return Err(SacError::Config("hidden_dims must be nonempty".into()));
        }
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(SacError::Config(format!("zero-width layer in {self:?}")));
        }
        Ok(())
    }

    /// Input, hidden and output widths in order.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        w.extend(&self.hidden_dims);
        w.push(self.output_dim);
        w
    }

    pub fn num_params(&self) -> usize {
        self.widths().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// Weights `w` (fan_in x fan_out) and bias `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub w: Array2<T>,
    pub b: Array1<T>,
}

impl<T: Scalar> Layer<T> {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            w: Array2::zeros((fan_in, fan_out)),
            b: Array1::zeros(fan_out),
        }
    }
}

/// Parameter-shaped container, used for gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub layers: Vec<Layer<T>>,
}

impl<T: Scalar> Params<T> {
    pub fn zeros(spec: &MlpSpec) -> Self {
        Self {
            layers: spec
                .widths()
                .windows(2)
                .map(|w| Layer::zeros(w[0], w[1]))
                .collect(),
        }
    }

    pub fn norm(&self) -> T {
        let mut s = T::zero();
        for l in &self.layers {
            s = s + l.w.iter().map(|&x| x * x).sum() + l.b.iter().map(|&x| x * x).sum();
        }
        s.sqrt()
    }

    pub fn scale(&mut self, k: T) {
        for l in &mut self.layers {
            l.w.mapv_inplace(|x| x * k);
            l.b.mapv_inplace(|x| x * k);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.layers.iter().flat_map(|l| l.w.iter().chain(l.b.iter()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.w.iter_mut().chain(l.b.iter_mut()))
    }
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct Cache<T> {
    /// Input to each layer.
    inputs: Vec<Array2<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub spec: MlpSpec,
    pub params: Params<T>,
}

impl<T: Scalar> Mlp<T> {
    /// Uniform ±1/√fan_in initialization.
    pub fn new<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Result<Self, SacError> {
        spec.validate()?;
        let mut params = Params::zeros(&spec);
        for l in &mut params.layers {
            let bound = 1.0 / (l.w.nrows() as f64).sqrt();
            for x in l.w.iter_mut().chain(l.b.iter_mut()) {
                *x = T::from(rng.random_range(-bound..bound)).unwrap();
            }
        }
        Ok(Self { spec, params })
    }

    pub fn num_params(&self) -> usize {
        self.spec.num_params()
    }

    pub fn forward(&self, x: &Array2<T>) -> Array2<T> {
        let last = self.params.layers.len() - 1;
        let mut h = x.clone();
        for (i, l) in self.params.layers.iter().enumerate() {
            h = h.dot(&l.w) + &l.b;
            if i < last {
                h.mapv_inplace(relu);
            }
        }
        h
    }

    pub fn forward_cached(&self, x: &Array2<T>) -> (Array2<T>, Cache<T>) {
        let last = self.params.layers.len() - 1;
        let mut inputs = Vec::with_capacity(last + 1);
        let mut h = x.clone();
        for (i, l) in self.params.layers.iter().enumerate() {
            let next = h.dot(&l.w) + &l.b;
            inputs.push(h);
            h = next;
            if i < last {
                h.mapv_inplace(relu);
            }
        }
        (h, Cache { inputs })
    }

    /// Parameter gradients and input gradient, given dL/d(output).
    pub fn backward(&self, cache: &Cache<T>, dout: &Array2<T>) -> (Params<T>, Array2<T>) {
        let mut grads = Vec::with_capacity(self.params.layers.len());
        let mut d = dout.clone();
        for (i, l) in self.params.layers.iter().enumerate().rev() {
            let input = &cache.inputs[i];
            let gw = input.t().dot(&d);
            let gb = d.sum_axis(Axis(0));
            let mut dx = d.dot(&l.w.t());
            if i > 0 {
                // The input of layer i is relu(pre), so its mask is input > 0.
                Zip::from(&mut dx).and(input).for_each(|g, &a| {
                    if a <= T::zero() {
                        *g = T::zero();
                    }
                });
            }
            grads.push(Layer { w: gw, b: gb });
            d = dx;
        }
        grads.reverse();
        (Params { layers: grads }, d)
    }

    /// θ̄ ← ςθ + (1−ς)θ̄.
    pub fn soft_update_from(&mut self, src: &Mlp<T>, tau: T) {
        let keep = T::one() - tau;
        for (t, s) in self.params.iter_mut().zip(src.params.iter()) {
            *t = tau * *s + keep * *t;
        }
    }

    pub fn copy_from(&mut self, src: &Mlp<T>) {
        self.params = src.params.clone();
    }
}

fn relu<T: Float>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

/// Adam with optional global gradient-norm clipping.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub clip_norm: Option<T>,
    step: i32,
    m: Params<T>,
    v: Params<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(spec: &MlpSpec, lr: T, clip_norm: Option<T>) -> Self {
        Self {
            lr,
            beta1: T::from(0.9).unwrap(),
            beta2: T::from(0.999).unwrap(),
            eps: T::from(1e-8).unwrap(),
            clip_norm,
            step: 0,
            m: Params::zeros(spec),
            v: Params::zeros(spec),
        }
    }

    pub fn steps(&self) -> i32 {
        self.step
    }

    /// Applies one update; `grads` may be rescaled by clipping.
    pub fn step(&mut self, net: &mut Mlp<T>, grads: &mut Params<T>) {
        if let Some(c) = self.clip_norm {
            let n = grads.norm();
            if n > c {
                grads.scale(c / n);
            }
        }
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = T::one() - b1.powi(self.step);
        let c2 = T::one() - b2.powi(self.step);
        let (lr, eps) = (self.lr, self.eps);
        let one = T::one();
        for (((p, g), m), v) in net
            .params
            .iter_mut()
            .zip(grads.iter())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = b1 * *m + (one - b1) * *g;
            *v = b2 * *v + (one - b2) * *g * *g;
            let mh = *m / c1;
            let vh = *v / c2;
            *p = *p - lr * mh / (vh.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net(seed: u64) -> Mlp<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mlp::new(MlpSpec::new(3, vec![5, 4], 2), &mut rng).unwrap()
    }

    fn loss(n: &Mlp<f64>, x: &Array2<f64>) -> f64 {
        // Weighted sum so every output matters differently.
        let y = n.forward(x);
        y.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * v * v / 2.0).sum()
    }

    #[test]
    fn spec_validation() {
        assert!(MlpSpec::new(3, vec![], 1).validate().is_err());
        assert!(MlpSpec::new(0, vec![4], 1).validate().is_err());
        assert_eq!(MlpSpec::new(3, vec![5, 4], 2).num_params(), 3 * 5 + 5 + 5 * 4 + 4 + 4 * 2 + 2);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let n = net(1);
        let x = array![[0.3, -0.7, 1.1], [0.9, 0.2, -0.4]];
        let (y, cache) = n.forward_cached(&x);
        let dout = Array2::from_shape_fn(y.raw_dim(), |(r, c)| (r * 2 + c + 1) as f64 * y[[r, c]]);
        let (g, dx) = n.backward(&cache, &dout);
        let h = 1e-6;
        let analytic: Vec<f64> = g.iter().copied().collect();
        for k in 0..analytic.len() {
            let mut p = n.clone();
            *p.params.iter_mut().nth(k).unwrap() += h;
            let mut m = n.clone();
            *m.params.iter_mut().nth(k).unwrap() -= h;
            let fd = (loss(&p, &x) - loss(&m, &x)) / (2.0 * h);
            assert!((fd - analytic[k]).abs() <= 1e-6 * (1.0 + fd.abs()), "param {k}: {fd} vs {}", analytic[k]);
        }
        for r in 0..2 {
            for c in 0..3 {
                let mut xp = x.clone();
                xp[[r, c]] += h;
                let mut xm = x.clone();
                xm[[r, c]] -= h;
                let fd = (loss(&n, &xp) - loss(&n, &xm)) / (2.0 * h);
                assert!((fd - dx[[r, c]]).abs() <= 1e-6 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn soft_update_formula() {
        let mut t = net(2);
        let mut s = net(3);
        t.params.iter_mut().for_each(|x| *x = 0.0);
        s.params.iter_mut().for_each(|x| *x = 1.0);
        t.soft_update_from(&s, 0.005);
        assert!(t.params.iter().all(|&x| (x - 0.005).abs() < 1e-15));
        t.soft_update_from(&s, 1.0);
        assert_eq!(t.params, s.params);
    }

    #[test]
    fn adam_reduces_quadratic_loss() {
        let mut n = net(4);
        let x = array![[0.5, 0.1, -0.3]];
        let mut opt = Adam::new(&n.spec, 1e-2, Some(10.0));
        let start = loss(&n, &x);
        for _ in 0..200 {
            let (y, cache) = n.forward_cached(&x);
            let dout = Array2::from_shape_fn(y.raw_dim(), |(r, c)| (r * 2 + c + 1) as f64 * y[[r, c]]);
            let (mut g, _) = n.backward(&cache, &dout);
            opt.step(&mut n, &mut g);
        }
        assert!(loss(&n, &x) < 0.1 * start);
        assert_eq!(opt.steps(), 200);
    }

    #[test]
    fn clipping_caps_the_norm() {
        let spec = MlpSpec::new(2, vec![2], 1);
        let mut g = Params::<f64>::zeros(&spec);
        g.iter_mut().for_each(|x| *x = 100.0);
        let mut n = Mlp::new(spec.clone(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mut opt = Adam::new(&spec, 1e-3, Some(10.0));
        opt.step(&mut n, &mut g);
        assert!((g.norm() - 10.0).abs() < 1e-9);
    }
}
