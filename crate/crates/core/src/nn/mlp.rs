use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use super::NnError;

/// Fully connected net with tanh hidden layers and a linear output.
///
/// Parameters live in one flat vector; layer `l` stores its weight matrix
/// (`out x in`, row-major) followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    pub params: Vec<f64>,
}

/// Activations kept from a forward pass: the input and every layer output.
#[derive(Debug, Clone)]
pub struct Cache {
    acts: Vec<Array2<f64>>,
}

impl Cache {
    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("cache holds at least the input")
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Result<Self, NnError> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(NnError::Layout(sizes.to_vec()));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
        })
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases; the
    /// output layer is further scaled by `output_gain`.
    pub fn init<R: Rng>(sizes: &[usize], output_gain: f64, rng: &mut R) -> Result<Self, NnError> {
        let mut net = Self::zeros(sizes)?;
        let n_layers = sizes.len() - 1;
        let mut off = 0;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let gain = if l + 1 == n_layers { output_gain } else { 1.0 };
            for p in &mut net.params[off..off + fan_in * fan_out + fan_out] {
                *p = gain * rng.gen_range(-bound..bound);
            }
            off += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    pub fn from_parts(sizes: Vec<usize>, params: Vec<f64>) -> Result<Self, NnError> {
        let mut net = Self::zeros(&sizes)?;
        if params.len() != net.params.len() {
            return Err(NnError::Shape {
                what: "parameter vector",
                expected: net.params.len(),
                got: params.len(),
            });
        }
        net.params = params;
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("validated layout")
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn layers(&self) -> impl Iterator<Item = (ArrayView2<'_, f64>, ArrayView1<'_, f64>)> + '_ {
        let mut off = 0;
        self.sizes.windows(2).map(move |w| {
            let (i, o) = (w[0], w[1]);
            let wv = ArrayView2::from_shape((o, i), &self.params[off..off + o * i])
                .expect("layout checked");
            let bv = ArrayView1::from(&self.params[off + o * i..off + o * i + o]);
            off += o * i + o;
            (wv, bv)
        })
    }

    /// Replaces every output `y` by `scale * y + shift`.
    pub fn affine_output(&mut self, scale: f64, shift: f64) {
        let (i, o) = (self.sizes[self.sizes.len() - 2], self.output_dim());
        let n = self.params.len();
        let (w, b) = self.params[n - o * i - o..].split_at_mut(o * i);
        w.iter_mut().for_each(|v| *v *= scale);
        b.iter_mut().for_each(|v| *v = scale * *v + shift);
    }

    /// Batched forward pass; rows of `x` are samples.
    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<Cache, NnError> {
        if x.ncols() != self.input_dim() {
            return Err(NnError::Shape {
                what: "input width",
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let n_layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(x.to_owned());
        for (l, (w, b)) in self.layers().enumerate() {
            let mut z = acts[l].dot(&w.t());
            z += &b;
            if l + 1 < n_layers {
                z.mapv_inplace(f64::tanh);
            }
            acts.push(z);
        }
        Ok(Cache { acts })
    }

    /// Single-sample convenience wrapper.
    pub fn forward_one(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        Ok(self.forward(view)?.output().row(0).to_vec())
    }

    /// Gradients of `sum(upstream * output)` with respect to the parameters
    /// and the input, for the forward pass recorded in `cache`.
    pub fn backward(
        &self,
        cache: &Cache,
        upstream: ArrayView2<'_, f64>,
    ) -> Result<(Vec<f64>, Array2<f64>), NnError> {
        let n_layers = self.sizes.len() - 1;
        let consistent = cache.acts.len() == n_layers + 1
            && cache
                .acts
                .iter()
                .zip(&self.sizes)
                .all(|(a, &s)| a.ncols() == s)
            && cache
                .acts
                .iter()
                .all(|a| a.nrows() == cache.acts[0].nrows());
        if !consistent {
            return Err(NnError::CacheMismatch);
        }
        let out = cache.output();
        if upstream.dim() != out.dim() {
            return Err(NnError::Shape {
                what: "upstream gradient",
                expected: out.len(),
                got: upstream.len(),
            });
        }
        let mut grads = vec![0.0; self.params.len()];
        let layers: Vec<_> = self.layers().collect();
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for w in self.sizes.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        let mut delta = upstream.to_owned();
        for l in (0..n_layers).rev() {
            let (w, _) = &layers[l];
            let input = &cache.acts[l];
            let (o, i) = (self.sizes[l + 1], self.sizes[l]);
            let dw = delta.t().dot(input);
            let db = delta.sum_axis(Axis(0));
            let off = offsets[l];
            for (g, v) in grads[off..off + o * i + o]
                .iter_mut()
                .zip(dw.iter().chain(db.iter()))
            {
                *g = *v;
            }
            let mut dx = delta.dot(w);
            if l > 0 {
                dx.zip_mut_with(input, |d, &h| *d *= 1.0 - h * h);
            }
            delta = dx;
        }
        Ok((grads, delta))
    }
}

/// Reference evaluator used by tests: plain loops, one sample at a time.
#[doc(hidden)]
pub fn naive_forward(sizes: &[usize], params: &[f64], x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    let mut off = 0;
    let n_layers = sizes.len() - 1;
    for l in 0..n_layers {
        let (i, o) = (sizes[l], sizes[l + 1]);
        let mut next = vec![0.0; o];
        for (r, v) in next.iter_mut().enumerate() {
            let mut acc = params[off + o * i + r];
            for c in 0..i {
                acc += params[off + r * i + c] * h[c];
            }
            *v = if l + 1 < n_layers { acc.tanh() } else { acc };
        }
        off += o * i + o;
        h = next;
    }
    h
}

pub(crate) fn rows(data: &[Vec<f64>]) -> Array2<f64> {
    let n = data.len();
    let d = data.first().map_or(0, Vec::len);
    let mut a = Array2::zeros((n, d));
    for (mut row, v) in a.outer_iter_mut().zip(data) {
        row.assign(&ArrayView1::from(v.as_slice()));
    }
    a
}

pub(crate) fn column(v: &Array2<f64>) -> Array1<f64> {
    v.slice(s![.., 0]).to_owned()
}
