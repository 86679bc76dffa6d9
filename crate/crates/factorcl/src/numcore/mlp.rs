use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::adam::AdamHyper;
use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Fully-connected net with rectified-linear hidden layers and an identity
/// output layer. Parameters, gradients and Adam moments are stored explicitly;
/// gradients accumulate across backward calls and are zeroed by `adam_step`,
/// so several loss terms can contribute to one optimizer step.
#[derive(Debug, Clone)]
pub struct MlpNet {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Matrix>, // (out x in) per layer
    pub biases: Vec<Matrix>,  // (1 x out) per layer
    pub grad_w: Vec<Matrix>,
    pub grad_b: Vec<Matrix>,
    pub adam_m_w: Vec<Matrix>,
    pub adam_v_w: Vec<Matrix>,
    pub adam_m_b: Vec<Matrix>,
    pub adam_v_b: Vec<Matrix>,
    pub step_count: u64,
}

/// Per-layer pre- and post-activation values from a forward pass.
/// `post.last()` is the network output.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub input: Matrix,
    pub pre: Vec<Matrix>,
    pub post: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.post.last().expect("forward cache has at least one layer")
    }
}

impl MlpNet {
    /// Weights uniform in (-a, a) with a = sqrt(6 / (fan_in + fan_out)), biases zero.
    pub fn new(layer_dims: &[usize], rng: &mut ChaCha8Rng) -> Self {
        assert!(layer_dims.len() >= 2, "need at least input and output dims");
        let mut net = Self::zeros(layer_dims);
        for l in 0..net.num_layers() {
            let fan_in = layer_dims[l] as f64;
            let fan_out = layer_dims[l + 1] as f64;
            let a = (6.0 / (fan_in + fan_out)).sqrt();
            for v in &mut net.weights[l].data {
                *v = rng.random_range(-a..a);
            }
        }
        net
    }

    /// All-zero parameters; useful for hand-set tests.
    pub fn zeros(layer_dims: &[usize]) -> Self {
        assert!(layer_dims.len() >= 2, "need at least input and output dims");
        let shapes: Vec<(usize, usize)> = layer_dims
            .windows(2)
            .map(|w| (w[1], w[0]))
            .collect();
        let mk_w = || -> Vec<Matrix> { shapes.iter().map(|&(o, i)| Matrix::zeros(o, i)).collect() };
        let mk_b = || -> Vec<Matrix> { shapes.iter().map(|&(o, _)| Matrix::zeros(1, o)).collect() };
        MlpNet {
            layer_dims: layer_dims.to_vec(),
            weights: mk_w(),
            biases: mk_b(),
            grad_w: mk_w(),
            grad_b: mk_b(),
            adam_m_w: mk_w(),
            adam_v_w: mk_b().iter().map(|_| Matrix::zeros(0, 0)).collect::<Vec<_>>(),
            adam_v_b: mk_b(),
            adam_m_b: mk_b(),
            step_count: 0,
        }
        .fix_moment_shapes()
    }

    fn fix_moment_shapes(mut self) -> Self {
        self.adam_m_w = self.weights.iter().map(|w| Matrix::zeros(w.rows, w.cols)).collect();
        self.adam_v_w = self.weights.iter().map(|w| Matrix::zeros(w.rows, w.cols)).collect();
        self.adam_m_b = self.biases.iter().map(|b| Matrix::zeros(b.rows, b.cols)).collect();
        self.adam_v_b = self.biases.iter().map(|b| Matrix::zeros(b.rows, b.cols)).collect();
        self
    }

    pub fn num_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    /// Forward pass; rectified-linear on hidden layers, identity on the output layer.
    pub fn forward(&self, batch: &Matrix) -> Result<ForwardCache> {
        if batch.cols != self.input_dim() {
            return Err(Error::shape(
                "MlpNet::forward",
                format!("{} input cols", self.input_dim()),
                format!("{}", batch.cols),
            ));
        }
        let layers = self.num_layers();
        let mut pre = Vec::with_capacity(layers);
        let mut post = Vec::with_capacity(layers);
        let mut cur = batch;
        for l in 0..layers {
            let mut z = cur.matmul_nt(&self.weights[l])?;
            let b = &self.biases[l];
            for r in 0..z.rows {
                for (v, bv) in z.row_mut(r).iter_mut().zip(&b.data) {
                    *v += bv;
                }
            }
            let a = if l + 1 < layers {
                let mut a = z.clone();
                for v in &mut a.data {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                a
            } else {
                z.clone()
            };
            pre.push(z);
            post.push(a);
            cur = post.last().unwrap();
        }
        debug_assert!(post.last().unwrap().all_finite(), "forward produced non-finite values");
        Ok(ForwardCache {
            input: batch.clone(),
            pre,
            post,
        })
    }

    /// Reverse-mode gradients of a scalar loss whose output-gradient is
    /// `grad_output`. Accumulates into this net's gradient buffers and returns
    /// the gradient with respect to the input batch.
    pub fn backward(&mut self, cache: &ForwardCache, grad_output: &Matrix) -> Result<Matrix> {
        let (gw, gb, gin) = self.backward_core(cache, grad_output)?;
        for (dst, src) in self.grad_w.iter_mut().zip(&gw) {
            dst.add_assign(src)?;
        }
        for (dst, src) in self.grad_b.iter_mut().zip(&gb) {
            dst.add_assign(src)?;
        }
        Ok(gin)
    }

    /// Same pass with the net treated as a constant: no parameter gradients
    /// are accumulated, only the input gradient is returned.
    pub fn backward_frozen(&self, cache: &ForwardCache, grad_output: &Matrix) -> Result<Matrix> {
        let (_, _, gin) = self.backward_core(cache, grad_output)?;
        Ok(gin)
    }

    fn backward_core(
        &self,
        cache: &ForwardCache,
        grad_output: &Matrix,
    ) -> Result<(Vec<Matrix>, Vec<Matrix>, Matrix)> {
        let layers = self.num_layers();
        let out = cache.output();
        if grad_output.rows != out.rows || grad_output.cols != out.cols {
            return Err(Error::shape(
                "MlpNet::backward",
                format!("{}x{}", out.rows, out.cols),
                format!("{}x{}", grad_output.rows, grad_output.cols),
            ));
        }
        let mut gw = Vec::with_capacity(layers);
        let mut gb = Vec::with_capacity(layers);
        let mut g = grad_output.clone();
        for l in (0..layers).rev() {
            // Gradient wrt pre-activation: identity on the output layer,
            // rectified-linear mask on hidden layers.
            if l + 1 < layers {
                let pre = &cache.pre[l];
                for (gv, pv) in g.data.iter_mut().zip(&pre.data) {
                    if *pv <= 0.0 {
                        *gv = 0.0;
                    }
                }
            }
            let layer_input = if l == 0 { &cache.input } else { &cache.post[l - 1] };
            gw.push(g.matmul_tn(layer_input)?);
            gb.push(g.col_sums());
            g = g.matmul(&self.weights[l])?;
        }
        gw.reverse();
        gb.reverse();
        debug_assert!(g.all_finite(), "backward produced non-finite values");
        Ok((gw, gb, g))
    }

    /// One Adam step with bias correction; gradients are zeroed afterwards.
    pub fn adam_step(&mut self, hyper: &AdamHyper) {
        self.step_count += 1;
        let t = self.step_count;
        for l in 0..self.num_layers() {
            hyper.update(&mut self.weights[l], &self.grad_w[l], &mut self.adam_m_w[l], &mut self.adam_v_w[l], t);
            hyper.update(&mut self.biases[l], &self.grad_b[l], &mut self.adam_m_b[l], &mut self.adam_v_b[l], t);
            self.grad_w[l].data.fill(0.0);
            self.grad_b[l].data.fill(0.0);
        }
    }

    pub fn zero_grads(&mut self) {
        for g in self.grad_w.iter_mut().chain(self.grad_b.iter_mut()) {
            g.data.fill(0.0);
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.grad_w
            .iter()
            .chain(self.grad_b.iter())
            .map(|g| g.data.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    // Flat parameter indexing (layout: w0, b0, w1, b1, ...) used by the
    // gradient checker, hashing, and serialization.

    pub fn param_count(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.data.len() + b.data.len())
            .sum()
    }

    fn locate(&self, idx: usize) -> (bool, usize, usize) {
        let mut i = idx;
        for l in 0..self.num_layers() {
            if i < self.weights[l].data.len() {
                return (true, l, i);
            }
            i -= self.weights[l].data.len();
            if i < self.biases[l].data.len() {
                return (false, l, i);
            }
            i -= self.biases[l].data.len();
        }
        panic!("parameter index {idx} out of range");
    }

    pub fn param_get(&self, idx: usize) -> f64 {
        let (is_w, l, i) = self.locate(idx);
        if is_w {
            self.weights[l].data[i]
        } else {
            self.biases[l].data[i]
        }
    }

    pub fn param_set(&mut self, idx: usize, v: f64) {
        let (is_w, l, i) = self.locate(idx);
        if is_w {
            self.weights[l].data[i] = v;
        } else {
            self.biases[l].data[i] = v;
        }
    }

    pub fn grad_get(&self, idx: usize) -> f64 {
        let (is_w, l, i) = self.locate(idx);
        if is_w {
            self.grad_w[l].data[i]
        } else {
            self.grad_b[l].data[i]
        }
    }

    /// Order-sensitive FNV-1a over the parameter bit patterns.
    pub fn param_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut mix = |v: f64| {
            for b in v.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        for l in 0..self.num_layers() {
            for v in &self.weights[l].data {
                mix(*v);
            }
            for v in &self.biases[l].data {
                mix(*v);
            }
        }
        h
    }

    /// Text snapshot: header with layer dims, then one value per line
    /// (weights row-major then bias, per layer). Values round-trip exactly.
    pub fn save_text(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str("mlp v1\ndims");
        for d in &self.layer_dims {
            out.push_str(&format!(" {d}"));
        }
        out.push('\n');
        for l in 0..self.num_layers() {
            for v in &self.weights[l].data {
                out.push_str(&format!("{v:?}\n"));
            }
            for v in &self.biases[l].data {
                out.push_str(&format!("{v:?}\n"));
            }
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn load_text(path: &Path) -> Result<MlpNet> {
        let f = std::fs::File::open(path)?;
        let mut lines = BufReader::new(f).lines().enumerate();
        let magic = lines
            .next()
            .ok_or_else(|| Error::Parse { line: 1, message: "empty snapshot".into() })?
            .1?;
        if magic.trim() != "mlp v1" {
            return Err(Error::Parse { line: 1, message: format!("bad magic {magic:?}") });
        }
        let dims_line = lines
            .next()
            .ok_or_else(|| Error::Parse { line: 2, message: "missing dims".into() })?
            .1?;
        let mut parts = dims_line.split_whitespace();
        if parts.next() != Some("dims") {
            return Err(Error::Parse { line: 2, message: "expected dims header".into() });
        }
        let dims: Vec<usize> = parts
            .map(|p| p.parse::<usize>().map_err(|e| Error::Parse { line: 2, message: e.to_string() }))
            .collect::<Result<_>>()?;
        if dims.len() < 2 {
            return Err(Error::Parse { line: 2, message: "need at least two dims".into() });
        }
        let mut net = MlpNet::zeros(&dims);
        let mut read_val = |lines: &mut dyn Iterator<Item = (usize, std::io::Result<String>)>| -> Result<f64> {
            let (i, line) = lines
                .next()
                .ok_or_else(|| Error::Parse { line: 0, message: "truncated snapshot".into() })?;
            let s = line?;
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })
        };
        for l in 0..net.num_layers() {
            for i in 0..net.weights[l].data.len() {
                net.weights[l].data[i] = read_val(&mut lines)?;
            }
            for i in 0..net.biases[l].data.len() {
                net.biases[l].data[i] = read_val(&mut lines)?;
            }
        }
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn identity_network_passes_input_through() {
        let mut net = MlpNet::zeros(&[3, 3]);
        for i in 0..3 {
            net.weights[0].set(i, i, 1.0);
        }
        let x = Matrix::from_fn(4, 3, |r, c| (r * 3 + c) as f64 * 0.25 - 0.8);
        let cache = net.forward(&x).unwrap();
        assert_eq!(cache.output(), &x);
    }

    #[test]
    fn hidden_relu_clamps_negative_preactivation() {
        // One hidden layer; bias drives the pre-activation to -1.
        let mut net = MlpNet::zeros(&[1, 1, 1]);
        net.biases[0].set(0, 0, -1.0);
        net.weights[1].set(0, 0, 1.0);
        let x = Matrix::from_vec(1, 1, vec![0.0]).unwrap();
        let cache = net.forward(&x).unwrap();
        assert_eq!(cache.pre[0].get(0, 0), -1.0);
        assert_eq!(cache.post[0].get(0, 0), 0.0);
        assert_eq!(cache.output().get(0, 0), 0.0);
    }

    #[test]
    fn two_layer_forward_matches_straight_line_recomputation() {
        let mut rng = stream(11, "test/forward");
        let net = MlpNet::new(&[5, 7, 3], &mut rng);
        let x = Matrix::from_fn(6, 5, |r, c| ((r * 5 + c) as f64).sin());
        let cache = net.forward(&x).unwrap();

        // Independent recomputation with plain loops.
        let mut expect = Matrix::zeros(6, 3);
        for s in 0..6 {
            let mut h = vec![0.0; 7];
            for j in 0..7 {
                let mut acc = net.biases[0].get(0, j);
                for i in 0..5 {
                    acc += x.get(s, i) * net.weights[0].get(j, i);
                }
                h[j] = acc.max(0.0);
            }
            for k in 0..3 {
                let mut acc = net.biases[1].get(0, k);
                for (j, hv) in h.iter().enumerate() {
                    acc += hv * net.weights[1].get(k, j);
                }
                expect.set(s, k, acc);
            }
        }
        for (a, b) in cache.output().data.iter().zip(&expect.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_grad_output_gives_zero_gradients() {
        let mut rng = stream(3, "test/zero-grad");
        let mut net = MlpNet::new(&[4, 6, 2], &mut rng);
        let x = Matrix::from_fn(5, 4, |r, c| (r + c) as f64 * 0.1);
        let cache = net.forward(&x).unwrap();
        let g0 = Matrix::zeros(5, 2);
        let gin = net.backward(&cache, &g0).unwrap();
        assert!(net.grad_w.iter().all(|g| g.data.iter().all(|v| *v == 0.0)));
        assert!(net.grad_b.iter().all(|g| g.data.iter().all(|v| *v == 0.0)));
        assert!(gin.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn identity_layer_sum_loss_weight_gradient_is_column_sums_of_input() {
        // Single linear layer, loss = sum of outputs:
        // dW[o][i] = sum over batch of x[b][i], for every output o.
        let mut net = MlpNet::zeros(&[3, 2]);
        for o in 0..2 {
            for i in 0..3 {
                net.weights[0].set(o, i, if o == i { 1.0 } else { 0.0 });
            }
        }
        let x = Matrix::from_fn(4, 3, |r, c| (r * 3 + c) as f64);
        let cache = net.forward(&x).unwrap();
        let ones = Matrix::from_fn(4, 2, |_, _| 1.0);
        net.backward(&cache, &ones).unwrap();
        for o in 0..2 {
            for i in 0..3 {
                let expect: f64 = (0..4).map(|b| x.get(b, i)).sum();
                assert!((net.grad_w[0].get(o, i) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn frozen_backward_leaves_grads_untouched_and_matches_input_grad() {
        let mut rng = stream(5, "test/frozen");
        let mut net = MlpNet::new(&[4, 8, 3], &mut rng);
        let x = Matrix::from_fn(6, 4, |r, c| ((r * 4 + c) as f64 * 0.37).cos());
        let cache = net.forward(&x).unwrap();
        let g = Matrix::from_fn(6, 3, |r, c| ((r + c) as f64 * 0.21).sin());
        let gin_frozen = net.backward_frozen(&cache, &g).unwrap();
        assert!(net.grad_w.iter().all(|gw| gw.data.iter().all(|v| *v == 0.0)));
        let gin = net.backward(&cache, &g).unwrap();
        assert_eq!(gin.data, gin_frozen.data);
        assert!(net.grad_w.iter().any(|gw| gw.data.iter().any(|v| *v != 0.0)));
    }

    #[test]
    fn snapshot_roundtrip_is_exact() {
        let mut rng = stream(17, "test/snapshot");
        let net = MlpNet::new(&[3, 5, 2], &mut rng);
        let dir = std::env::temp_dir().join("factorcl_mlp_snapshot_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("net.txt");
        net.save_text(&path).unwrap();
        let loaded = MlpNet::load_text(&path).unwrap();
        assert_eq!(net.layer_dims, loaded.layer_dims);
        for l in 0..net.num_layers() {
            assert_eq!(net.weights[l].data, loaded.weights[l].data);
            assert_eq!(net.biases[l].data, loaded.biases[l].data);
        }
    }
}
