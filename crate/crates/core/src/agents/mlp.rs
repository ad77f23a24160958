use rand::Rng;

use crate::model::{FactoredState, FeatureSchema};
use crate::scalar::Scalar;

/// Fully connected Q-network: rectifier hidden layers, linear output.
///
/// Layer `l` maps `sizes[l]` inputs to `sizes[l + 1]` outputs; its weights are
/// stored row-major as `sizes[l + 1] × sizes[l]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    sizes: Vec<usize>,
    weights: Vec<Vec<T>>,
    biases: Vec<Vec<T>>,
}

/// Gradient with the same shape as an [`Mlp`].
#[derive(Clone, Debug, PartialEq)]
pub struct Grads<T> {
    pub weights: Vec<Vec<T>>,
    pub biases: Vec<Vec<T>>,
}

impl<T: Scalar> Grads<T> {
    fn zeros_like(net: &Mlp<T>) -> Self {
        Grads {
            weights: net.weights.iter().map(|w| vec![T::zero(); w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![T::zero(); b.len()]).collect(),
        }
    }
}

impl<T: Scalar> Mlp<T> {
    /// All-zero network.
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0), "invalid layer sizes {sizes:?}");
        let weights = sizes.windows(2).map(|w| vec![T::zero(); w[0] * w[1]]).collect();
        let biases = sizes[1..].iter().map(|&n| vec![T::zero(); n]).collect();
        Mlp { sizes: sizes.to_vec(), weights, biases }
    }

    /// He-uniform weights, zero biases.
    pub fn random<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        for (l, w) in net.weights.iter_mut().enumerate() {
            let limit = (6.0 / sizes[l] as f64).sqrt();
            for x in w.iter_mut() {
                *x = T::of(rng.random_range(-limit..limit));
            }
        }
        net
    }

    pub fn from_parts(sizes: Vec<usize>, weights: Vec<Vec<T>>, biases: Vec<Vec<T>>) -> Result<Self, String> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(format!("invalid layer sizes {sizes:?}"));
        }
        if weights.len() != sizes.len() - 1 || biases.len() != sizes.len() - 1 {
            return Err(format!("{} layers need {} weight and bias arrays", sizes.len(), sizes.len() - 1));
        }
        for l in 0..sizes.len() - 1 {
            if weights[l].len() != sizes[l] * sizes[l + 1] || biases[l].len() != sizes[l + 1] {
                return Err(format!("layer {l} arrays do not match sizes {} -> {}", sizes[l], sizes[l + 1]));
            }
        }
        Ok(Mlp { sizes, weights, biases })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn weights(&self) -> &[Vec<T>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<T>] {
        &self.biases
    }

    pub fn inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.sizes.last().expect("at least two layers")
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Flat parameter access in layer order, weights before biases.
    pub fn param(&self, k: usize) -> T {
        let (l, is_w, i) = self.locate(k);
        if is_w { self.weights[l][i] } else { self.biases[l][i] }
    }

    pub fn set_param(&mut self, k: usize, v: T) {
        let (l, is_w, i) = self.locate(k);
        if is_w {
            self.weights[l][i] = v;
        } else {
            self.biases[l][i] = v;
        }
    }

    fn locate(&self, mut k: usize) -> (usize, bool, usize) {
        for l in 0..self.weights.len() {
            if k < self.weights[l].len() {
                return (l, true, k);
            }
            k -= self.weights[l].len();
            if k < self.biases[l].len() {
                return (l, false, k);
            }
            k -= self.biases[l].len();
        }
        panic!("parameter index out of range");
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).all(|v| v.iter().all(|x| x.is_finite()))
    }

    fn layer(&self, l: usize, input: &[T], out: &mut Vec<T>) {
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        let w = &self.weights[l];
        out.clear();
        for o in 0..n_out {
            let row = &w[o * n_in..(o + 1) * n_in];
            let mut acc = self.biases[l][o] + dot(row, input);
            if l + 2 < self.sizes.len() && acc < T::zero() {
                acc = T::zero();
            }
            out.push(acc);
        }
    }

    pub fn forward(&self, input: &[T]) -> Vec<T> {
        assert_eq!(input.len(), self.inputs(), "input width");
        let mut cur = input.to_vec();
        let mut next = Vec::new();
        for l in 0..self.weights.len() {
            self.layer(l, &cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// Activations of every layer, input first, output last.
    fn forward_all(&self, input: &[T]) -> Vec<Vec<T>> {
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(input.to_vec());
        for l in 0..self.weights.len() {
            let mut out = Vec::with_capacity(self.sizes[l + 1]);
            self.layer(l, &acts[l], &mut out);
            acts.push(out);
        }
        acts
    }

    /// Mean squared error between `Q(x_i)[a_i]` and `y_i`, and its gradient.
    pub fn loss_and_grad(&self, inputs: &[Vec<T>], actions: &[usize], targets: &[T]) -> (T, Grads<T>) {
        let n = inputs.len();
        assert!(n > 0 && actions.len() == n && targets.len() == n, "batch shape");
        let scale = T::one() / T::of(n as f64);
        let mut grads = Grads::zeros_like(self);
        let mut loss = T::zero();
        let depth = self.weights.len();
        for ((x, &a), &y) in inputs.iter().zip(actions).zip(targets) {
            let acts = self.forward_all(x);
            let err = acts[depth][a] - y;
            loss += err * err * scale;
            let mut delta = vec![T::zero(); self.outputs()];
            delta[a] = T::of(2.0) * err * scale;
            for l in (0..depth).rev() {
                let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
                let input = &acts[l];
                let gw = &mut grads.weights[l];
                for o in 0..n_out {
                    let d = delta[o];
                    if d == T::zero() {
                        continue;
                    }
                    grads.biases[l][o] += d;
                    for (g, v) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(input) {
                        *g += d * *v;
                    }
                }
                if l == 0 {
                    break;
                }
                let w = &self.weights[l];
                let mut prev = vec![T::zero(); n_in];
                for o in 0..n_out {
                    let d = delta[o];
                    if d == T::zero() {
                        continue;
                    }
                    for (p, wv) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *p += d * *wv;
                    }
                }
                // rectifier derivative: the activation is positive iff its pre-activation is
                for (p, v) in prev.iter_mut().zip(input) {
                    if *v <= T::zero() {
                        *p = T::zero();
                    }
                }
                delta = prev;
            }
        }
        (loss, grads)
    }

    /// Loss only, for finite-difference checks.
    pub fn loss(&self, inputs: &[Vec<T>], actions: &[usize], targets: &[T]) -> T {
        let scale = T::one() / T::of(inputs.len() as f64);
        inputs
            .iter()
            .zip(actions)
            .zip(targets)
            .map(|((x, &a), &y)| {
                let e = self.forward(x)[a] - y;
                e * e * scale
            })
            .sum()
    }
}

/// Adam optimiser state.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Grads<T>,
    v: Grads<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(net: &Mlp<T>, lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: Grads::zeros_like(net), v: Grads::zeros_like(net) }
    }

    pub fn step(&mut self, net: &mut Mlp<T>, g: &Grads<T>) {
        self.t += 1;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let c1 = T::one() / (T::one() - b1.powi(self.t));
        let c2 = T::one() / (T::one() - b2.powi(self.t));
        let (lr, eps) = (T::of(self.lr), T::of(self.eps));
        let params = net.weights.iter_mut().zip(&g.weights).zip(self.m.weights.iter_mut().zip(self.v.weights.iter_mut()));
        let bparams = net.biases.iter_mut().zip(&g.biases).zip(self.m.biases.iter_mut().zip(self.v.biases.iter_mut()));
        for ((p, g), (m, v)) in params.chain(bparams) {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                let mh = m[i] * c1;
                let vh = v[i] * c2;
                p[i] -= lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

/// Min-max scaling of every feature to `[0, 1]` by its declared bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct MinMax<T> {
    lo: Vec<T>,
    inv_span: Vec<T>,
}

impl<T: Scalar> MinMax<T> {
    pub fn new(schema: &FeatureSchema) -> Self {
        let lo = schema.features().iter().map(|f| T::of(f64::from(f.lo))).collect();
        let inv_span = schema
            .features()
            .iter()
            .map(|f| if f.hi > f.lo { T::one() / T::of(f64::from(f.hi - f.lo)) } else { T::zero() })
            .collect();
        MinMax { lo, inv_span }
    }

    pub fn apply(&self, s: &FactoredState) -> Vec<T> {
        s.iter().zip(&self.lo).zip(&self.inv_span).map(|((&v, &lo), &k)| (T::of(f64::from(v)) - lo) * k).collect()
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax<T: PartialOrd>(q: &[T]) -> usize {
    let mut best = 0;
    for i in 1..q.len() {
        if q[i] > q[best] {
            best = i;
        }
    }
    best
}

/// Dot product with four independent accumulators, which lets the adds
/// pipeline instead of waiting on one serial chain.
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: T = ca.remainder().iter().zip(cb.remainder()).fold(T::zero(), |s, (x, y)| s + *x * *y);
    let mut acc = [T::zero(); 4];
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
