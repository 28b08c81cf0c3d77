//! Per-layer forward and backward kernels.
//!
//! Convolutions and dense layers work on one example at a time; batch
//! normalization needs the whole batch in training mode.

use rand::Rng;

use super::{NetError, Real, Shape, Tensor3};

/// Valid cross-correlation, stride 1, optional ReLU.
/// Weights are laid out `(filter_h, filter_w, in_channels, out_channels)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<F> {
    pub fh: usize,
    pub fw: usize,
    pub cin: usize,
    pub cout: usize,
    pub weights: Vec<F>,
    pub bias: Vec<F>,
    pub relu: bool,
}

impl<F: Real> Conv2d<F> {
    pub fn zeros(fh: usize, fw: usize, cin: usize, cout: usize, relu: bool) -> Self {
        Conv2d {
            fh,
            fw,
            cin,
            cout,
            weights: vec![F::zero(); fh * fw * cin * cout],
            bias: vec![F::zero(); cout],
            relu,
        }
    }

    pub fn output_shape(&self, input: Shape) -> Result<Shape, NetError> {
        if input.c != self.cin || input.h < self.fh || input.w < self.fw {
            return Err(NetError::shape(
                "conv2d",
                format!("at least {} x {} x {}", self.fh, self.fw, self.cin),
                input,
            ));
        }
        Ok(Shape::new(input.h - self.fh + 1, input.w - self.fw + 1, self.cout))
    }

    pub fn forward(&self, x: &Tensor3<F>) -> Result<Tensor3<F>, NetError> {
        let out_shape = self.output_shape(x.shape())?;
        let (oh, ow, cout) = (out_shape.h, out_shape.w, self.cout);
        let w_in = x.shape().w;
        let span = self.fw * self.cin;
        let xd = x.data();
        let mut out = vec![F::zero(); out_shape.len()];
        for i in 0..oh {
            for j in 0..ow {
                let acc = &mut out[(i * ow + j) * cout..(i * ow + j + 1) * cout];
                acc.copy_from_slice(&self.bias);
                for a in 0..self.fh {
                    let start = ((i + a) * w_in + j) * self.cin;
                    let row = &xd[start..start + span];
                    let wrow = &self.weights[a * span * cout..(a + 1) * span * cout];
                    for (xv, wq) in row.iter().zip(wrow.chunks_exact(cout)) {
                        for (o, wv) in acc.iter_mut().zip(wq) {
                            *o = *o + *xv * *wv;
                        }
                    }
                }
                if self.relu {
                    for v in acc.iter_mut() {
                        if *v < F::zero() {
                            *v = F::zero();
                        }
                    }
                }
            }
        }
        Ok(Tensor3::from_vec(oh, ow, cout, out))
    }

    /// Gradients for one example. `out` is the forward output (post
    /// activation); `dout` the gradient with respect to it. The input
    /// gradient is computed only when `want_dx` is set.
    pub fn backward(
        &self,
        x: &Tensor3<F>,
        out: &Tensor3<F>,
        dout: &Tensor3<F>,
        want_dx: bool,
    ) -> (Option<Tensor3<F>>, Vec<F>, Vec<F>) {
        let s = out.shape();
        let (oh, ow, cout) = (s.h, s.w, self.cout);
        let w_in = x.shape().w;
        let span = self.fw * self.cin;
        let xd = x.data();
        let mut dw = vec![F::zero(); self.weights.len()];
        let mut db = vec![F::zero(); cout];
        let mut dx = want_dx.then(|| vec![F::zero(); x.shape().len()]);
        let mut g = vec![F::zero(); cout];
        for i in 0..oh {
            for j in 0..ow {
                let base = (i * ow + j) * cout;
                let mut any = false;
                for o in 0..cout {
                    let keep = !self.relu || out.data()[base + o] > F::zero();
                    g[o] = if keep { dout.data()[base + o] } else { F::zero() };
                    any |= g[o] != F::zero();
                }
                if !any {
                    continue;
                }
                for (b, gv) in db.iter_mut().zip(&g) {
                    *b = *b + *gv;
                }
                for a in 0..self.fh {
                    let start = ((i + a) * w_in + j) * self.cin;
                    let row = &xd[start..start + span];
                    let wslice = a * span * cout..(a + 1) * span * cout;
                    for (xv, dwq) in row.iter().zip(dw[wslice.clone()].chunks_exact_mut(cout)) {
                        for (d, gv) in dwq.iter_mut().zip(&g) {
                            *d = *d + *xv * *gv;
                        }
                    }
                    if let Some(dx) = dx.as_mut() {
                        let drow = &mut dx[start..start + span];
                        for (dv, wq) in drow.iter_mut().zip(self.weights[wslice.clone()].chunks_exact(cout)) {
                            let mut acc = F::zero();
                            for (wv, gv) in wq.iter().zip(&g) {
                                acc = acc + *wv * *gv;
                            }
                            *dv = *dv + acc;
                        }
                    }
                }
            }
        }
        let dx = dx.map(|d| Tensor3::from_vec(x.shape().h, x.shape().w, x.shape().c, d));
        (dx, dw, db)
    }
}

/// Non-overlapping max pooling; trailing rows/columns that do not fill a
/// window are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaxPool {
    pub ph: usize,
    pub pw: usize,
}

impl MaxPool {
    pub fn output_shape(&self, input: Shape) -> Result<Shape, NetError> {
        if input.h < self.ph || input.w < self.pw {
            return Err(NetError::shape("maxpool", format!("at least {} x {}", self.ph, self.pw), input));
        }
        Ok(Shape::new(input.h / self.ph, input.w / self.pw, input.c))
    }

    /// Returns the pooled tensor and, per output element, the flat input
    /// index of the winner (first maximum in row-major window order).
    pub fn forward<F: Real>(&self, x: &Tensor3<F>) -> Result<(Tensor3<F>, Vec<u32>), NetError> {
        let s = self.output_shape(x.shape())?;
        let mut out = Vec::with_capacity(s.len());
        let mut arg = Vec::with_capacity(s.len());
        for i in 0..s.h {
            for j in 0..s.w {
                for c in 0..s.c {
                    let mut best_idx = x.index(i * self.ph, j * self.pw, c);
                    let mut best = x.data()[best_idx];
                    for a in 0..self.ph {
                        for b in 0..self.pw {
                            let idx = x.index(i * self.ph + a, j * self.pw + b, c);
                            if x.data()[idx] > best {
                                best = x.data()[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    out.push(best);
                    arg.push(best_idx as u32);
                }
            }
        }
        Ok((Tensor3::from_vec(s.h, s.w, s.c, out), arg))
    }

    pub fn backward<F: Real>(input: Shape, argmax: &[u32], dout: &Tensor3<F>) -> Tensor3<F> {
        let mut dx = vec![F::zero(); input.len()];
        for (&idx, &g) in argmax.iter().zip(dout.data()) {
            dx[idx as usize] = dx[idx as usize] + g;
        }
        Tensor3::from_vec(input.h, input.w, input.c, dx)
    }
}

/// Per-channel batch normalization with moving statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<F> {
    pub gamma: Vec<F>,
    pub beta: Vec<F>,
    pub moving_mean: Vec<F>,
    pub moving_var: Vec<F>,
    pub epsilon: f64,
    pub momentum: f64,
}

/// Batch statistics and normalized activations kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormCache<F> {
    pub mean: Vec<F>,
    pub var: Vec<F>,
    pub xhat: Vec<Tensor3<F>>,
}

impl<F: Real> BatchNorm<F> {
    pub fn new(channels: usize, epsilon: f64, momentum: f64) -> Self {
        BatchNorm {
            gamma: vec![F::one(); channels],
            beta: vec![F::zero(); channels],
            moving_mean: vec![F::zero(); channels],
            moving_var: vec![F::one(); channels],
            epsilon,
            momentum,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn check(&self, s: Shape) -> Result<(), NetError> {
        if s.c != self.channels() {
            return Err(NetError::shape("batchnorm", format!("{} channels", self.channels()), s));
        }
        Ok(())
    }

    /// Inference: moving statistics, no state change.
    pub fn forward_infer(&self, x: &Tensor3<F>) -> Result<Tensor3<F>, NetError> {
        self.check(x.shape())?;
        let eps = F::of(self.epsilon);
        let scale: Vec<F> = (0..self.channels())
            .map(|c| self.gamma[c] / (self.moving_var[c] + eps).sqrt())
            .collect();
        let c = self.channels();
        let data = x
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let k = i % c;
                (v - self.moving_mean[k]) * scale[k] + self.beta[k]
            })
            .collect();
        let s = x.shape();
        Ok(Tensor3::from_vec(s.h, s.w, s.c, data))
    }

    /// Training: statistics over every batch·height·width position of each
    /// channel, biased variance. Moving statistics are not touched here;
    /// see [`BatchNorm::update_moving`].
    pub fn forward_train(&self, batch: &[Tensor3<F>]) -> Result<(Vec<Tensor3<F>>, BatchNormCache<F>), NetError> {
        if batch.is_empty() {
            return Err(NetError::EmptyBatch);
        }
        let c = self.channels();
        for x in batch {
            self.check(x.shape())?;
        }
        let count = (batch.len() * batch[0].shape().h * batch[0].shape().w) as f64;
        let mut sum = vec![0.0f64; c];
        for x in batch {
            for (i, v) in x.data().iter().enumerate() {
                sum[i % c] += v.f64();
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count).collect();
        let mut sq = vec![0.0f64; c];
        for x in batch {
            for (i, v) in x.data().iter().enumerate() {
                let d = v.f64() - mean[i % c];
                sq[i % c] += d * d;
            }
        }
        let var: Vec<f64> = sq.iter().map(|s| s / count).collect();
        let inv_std: Vec<F> = var.iter().map(|v| F::of(1.0 / (v + self.epsilon).sqrt())).collect();
        let mean_f: Vec<F> = mean.iter().map(|&m| F::of(m)).collect();

        let mut xhat = Vec::with_capacity(batch.len());
        let mut out = Vec::with_capacity(batch.len());
        for x in batch {
            let s = x.shape();
            let xh: Vec<F> = x
                .data()
                .iter()
                .enumerate()
                .map(|(i, &v)| (v - mean_f[i % c]) * inv_std[i % c])
                .collect();
            let y: Vec<F> = xh
                .iter()
                .enumerate()
                .map(|(i, &v)| self.gamma[i % c] * v + self.beta[i % c])
                .collect();
            xhat.push(Tensor3::from_vec(s.h, s.w, s.c, xh));
            out.push(Tensor3::from_vec(s.h, s.w, s.c, y));
        }
        let cache = BatchNormCache {
            mean: mean_f,
            var: var.iter().map(|&v| F::of(v)).collect(),
            xhat,
        };
        Ok((out, cache))
    }

    /// `m ← momentum·m + (1 − momentum)·batch_stat` for mean and variance.
    pub fn update_moving(&mut self, mean: &[F], var: &[F]) {
        let mom = F::of(self.momentum);
        let rest = F::one() - mom;
        for (m, b) in self.moving_mean.iter_mut().zip(mean) {
            *m = mom * *m + rest * *b;
        }
        for (m, b) in self.moving_var.iter_mut().zip(var) {
            *m = mom * *m + rest * *b;
        }
    }

    /// Returns (input gradients, dγ, dβ).
    pub fn backward(&self, dout: &[Tensor3<F>], cache: &BatchNormCache<F>) -> (Vec<Tensor3<F>>, Vec<F>, Vec<F>) {
        let c = self.channels();
        let mut dgamma = vec![0.0f64; c];
        let mut dbeta = vec![0.0f64; c];
        for (dy, xh) in dout.iter().zip(&cache.xhat) {
            for (i, (g, v)) in dy.data().iter().zip(xh.data()).enumerate() {
                dbeta[i % c] += g.f64();
                dgamma[i % c] += g.f64() * v.f64();
            }
        }
        let s = dout[0].shape();
        let n = (dout.len() * s.h * s.w) as f64;
        let coef: Vec<f64> = (0..c)
            .map(|k| self.gamma[k].f64() / (n * (cache.var[k].f64() + self.epsilon).sqrt()))
            .collect();
        let dx = dout
            .iter()
            .zip(&cache.xhat)
            .map(|(dy, xh)| {
                let d = dy
                    .data()
                    .iter()
                    .zip(xh.data())
                    .enumerate()
                    .map(|(i, (g, v))| {
                        let k = i % c;
                        F::of(coef[k] * (n * g.f64() - dbeta[k] - v.f64() * dgamma[k]))
                    })
                    .collect();
                Tensor3::from_vec(s.h, s.w, s.c, d)
            })
            .collect();
        (
            dx,
            dgamma.into_iter().map(F::of).collect(),
            dbeta.into_iter().map(F::of).collect(),
        )
    }
}

/// Fully connected layer, weights laid out `(in_dim, out_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<F> {
    pub input: usize,
    pub units: usize,
    pub weights: Vec<F>,
    pub bias: Vec<F>,
    pub relu: bool,
}

impl<F: Real> Dense<F> {
    pub fn zeros(input: usize, units: usize, relu: bool) -> Self {
        Dense {
            input,
            units,
            weights: vec![F::zero(); input * units],
            bias: vec![F::zero(); units],
            relu,
        }
    }

    /// `activation(Wᵀx + b)` with ReLU or identity; softmax is applied by
    /// the caller.
    pub fn forward(&self, x: &[F]) -> Result<Vec<F>, NetError> {
        if x.len() != self.input {
            return Err(NetError::shape("dense", self.input, x.len()));
        }
        let mut out = self.bias.clone();
        for (xv, wrow) in x.iter().zip(self.weights.chunks_exact(self.units)) {
            for (o, wv) in out.iter_mut().zip(wrow) {
                *o = *o + *xv * *wv;
            }
        }
        if self.relu {
            for v in out.iter_mut() {
                if *v < F::zero() {
                    *v = F::zero();
                }
            }
        }
        Ok(out)
    }

    /// Returns (dx, dW, db) for one example; `out` is post-activation.
    pub fn backward(&self, x: &[F], out: &[F], dout: &[F]) -> (Vec<F>, Vec<F>, Vec<F>) {
        let g: Vec<F> = dout
            .iter()
            .zip(out)
            .map(|(&d, &o)| if !self.relu || o > F::zero() { d } else { F::zero() })
            .collect();
        let mut dw = vec![F::zero(); self.weights.len()];
        let mut dx = vec![F::zero(); self.input];
        for ((xv, dxv), (wrow, dwrow)) in x
            .iter()
            .zip(dx.iter_mut())
            .zip(self.weights.chunks_exact(self.units).zip(dw.chunks_exact_mut(self.units)))
        {
            let mut acc = F::zero();
            for ((wv, dwv), gv) in wrow.iter().zip(dwrow.iter_mut()).zip(&g) {
                *dwv = *xv * *gv;
                acc = acc + *wv * *gv;
            }
            *dxv = acc;
        }
        (dx, dw, g)
    }
}

/// Inverted dropout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    pub rate: f64,
}

impl Dropout {
    /// Each element survives with probability `1 − rate` and is scaled by
    /// `1/(1 − rate)`. Returns the output and the per-element multiplier.
    pub fn forward_train<F: Real, R: Rng>(&self, x: &[F], rng: &mut R) -> (Vec<F>, Vec<F>) {
        if self.rate == 0.0 {
            return (x.to_vec(), vec![F::one(); x.len()]);
        }
        let keep = F::of(1.0 / (1.0 - self.rate));
        let mask: Vec<F> = x
            .iter()
            .map(|_| if rng.gen::<f64>() < self.rate { F::zero() } else { keep })
            .collect();
        (x.iter().zip(&mask).map(|(v, m)| *v * *m).collect(), mask)
    }

    pub fn backward<F: Real>(mask: &[F], dout: &[F]) -> Vec<F> {
        dout.iter().zip(mask).map(|(g, m)| *g * *m).collect()
    }
}

/// Numerically stable softmax (max-shifted).
pub fn softmax<F: Real>(logits: &[F]) -> Vec<F> {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: F = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_tensor(h: usize, w: usize, c: usize, seed: u64) -> Tensor3<f64> {
        let mut rng = rng_from(seed);
        Tensor3::from_vec(h, w, c, (0..h * w * c).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    /// Direct nested-loop reference, kept independent of the kernel's
    /// slicing.
    fn conv_oracle(x: &Tensor3<f64>, layer: &Conv2d<f64>) -> Vec<f64> {
        let s = x.shape();
        let (oh, ow) = (s.h - layer.fh + 1, s.w - layer.fw + 1);
        let mut out = Vec::new();
        for i in 0..oh {
            for j in 0..ow {
                for o in 0..layer.cout {
                    let mut v = layer.bias[o];
                    for a in 0..layer.fh {
                        for b in 0..layer.fw {
                            for c in 0..layer.cin {
                                let widx = ((a * layer.fw + b) * layer.cin + c) * layer.cout + o;
                                v += x.at(i + a, j + b, c) * layer.weights[widx];
                            }
                        }
                    }
                    out.push(v);
                }
            }
        }
        out
    }

    #[test]
    fn conv_sum_of_entries() {
        let mut layer = Conv2d::<f64>::zeros(2, 2, 1, 1, false);
        layer.weights.fill(1.0);
        let x = Tensor3::from_vec(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]);
        let y = layer.forward(&x).unwrap();
        assert_eq!(y.shape(), Shape::new(1, 1, 1));
        assert_eq!(y.data(), &[10.0]);
    }

    #[test]
    fn conv_matches_nested_loops() {
        let mut layer = Conv2d::<f64>::zeros(3, 3, 3, 4, false);
        let mut rng = rng_from(5);
        layer.weights.iter_mut().for_each(|w| *w = rng.gen_range(-1.0..1.0));
        layer.bias.iter_mut().for_each(|w| *w = rng.gen_range(-1.0..1.0));
        let x = random_tensor(9, 9, 3, 6);
        let y = layer.forward(&x).unwrap();
        assert_eq!(y.shape(), Shape::new(7, 7, 4));
        for (a, b) in y.data().iter().zip(conv_oracle(&x, &layer)) {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1e-12), "{a} vs {b}");
        }
    }

    #[test]
    fn conv_relu_clamps() {
        let mut layer = Conv2d::<f64>::zeros(1, 1, 1, 1, true);
        layer.weights[0] = 1.0;
        let y = layer.forward(&Tensor3::from_vec(1, 2, 1, vec![-2.0, 3.0])).unwrap();
        assert_eq!(y.data(), &[0.0, 3.0]);
    }

    #[test]
    fn conv_shape_mismatch() {
        let layer = Conv2d::<f64>::zeros(3, 3, 2, 1, false);
        assert!(layer.forward(&Tensor3::zeros(5, 5, 1)).is_err());
        assert!(layer.forward(&Tensor3::zeros(2, 5, 2)).is_err());
    }

    #[test]
    fn conv_backward_zeroes_negative_preactivation() {
        let mut layer = Conv2d::<f64>::zeros(1, 1, 1, 1, true);
        layer.weights[0] = 1.0;
        let x = Tensor3::from_vec(1, 2, 1, vec![-2.0, 3.0]);
        let y = layer.forward(&x).unwrap();
        let (dx, dw, db) = layer.backward(&x, &y, &Tensor3::from_vec(1, 2, 1, vec![5.0, 7.0]), true);
        assert_eq!(dx.unwrap().data(), &[0.0, 7.0]);
        assert_eq!(dw, vec![21.0]);
        assert_eq!(db, vec![7.0]);
    }

    #[test]
    fn pool_table_shapes() {
        let p = MaxPool { ph: 7, pw: 5 };
        let (y, _) = p.forward(&Tensor3::<f32>::zeros(120, 65, 8)).unwrap();
        assert_eq!(y.shape(), Shape::new(17, 13, 8));
        let p = MaxPool { ph: 5, pw: 3 };
        let (y, _) = p.forward(&Tensor3::<f32>::zeros(11, 9, 32)).unwrap();
        assert_eq!(y.shape(), Shape::new(2, 3, 32));
    }

    #[test]
    fn pool_drops_trailing_row() {
        // the maximum sits in row 10, which no window covers
        let mut x = Tensor3::<f64>::zeros(11, 3, 1);
        let idx = x.index(10, 0, 0);
        x.data_mut()[idx] = 100.0;
        let (y, arg) = MaxPool { ph: 5, pw: 3 }.forward(&x).unwrap();
        assert_eq!(y.data(), &[0.0, 0.0]);
        assert!(arg.iter().all(|&a| (a as usize) < idx));
    }

    #[test]
    fn pool_constant() {
        let x = Tensor3::from_vec(4, 4, 2, vec![3.5f64; 32]);
        let (y, _) = MaxPool { ph: 2, pw: 2 }.forward(&x).unwrap();
        assert!(y.data().iter().all(|&v| v == 3.5));
    }

    #[test]
    fn pool_too_small() {
        assert!(MaxPool { ph: 3, pw: 3 }.forward(&Tensor3::<f64>::zeros(2, 5, 1)).is_err());
    }

    #[test]
    fn batchnorm_param_count() {
        let bn = BatchNorm::<f32>::new(8, 1e-3, 0.99);
        let n = bn.gamma.len() + bn.beta.len() + bn.moving_mean.len() + bn.moving_var.len();
        assert_eq!(n, 32);
    }

    #[test]
    fn batchnorm_infer_unit_stats() {
        let bn = BatchNorm::<f64>::new(2, 1e-3, 0.99);
        let x = random_tensor(3, 3, 2, 1);
        let y = bn.forward_infer(&x).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b / (1.0f64 + 1e-3).sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn batchnorm_train_moments() {
        let mut bn = BatchNorm::<f64>::new(3, 1e-3, 0.99);
        let batch: Vec<_> = (0..4).map(|s| random_tensor(5, 4, 3, 10 + s)).collect();
        let (out, cache) = bn.forward_train(&batch).unwrap();
        for c in 0..3 {
            // direct moments of the input channel
            let xs: Vec<f64> = batch.iter().flat_map(|t| t.data().iter().skip(c).step_by(3).copied()).collect();
            let n = xs.len() as f64;
            let mu = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n;
            let ys: Vec<f64> = out.iter().flat_map(|t| t.data().iter().skip(c).step_by(3).copied()).collect();
            let ymu = ys.iter().sum::<f64>() / n;
            let yvar = ys.iter().map(|y| (y - ymu).powi(2)).sum::<f64>() / n;
            assert!(ymu.abs() < 1e-12);
            assert!((yvar - var / (var + 1e-3)).abs() < 1e-12);
            assert!((cache.mean[c] - mu).abs() < 1e-12);
        }
        bn.update_moving(&cache.mean, &cache.var);
        assert!((bn.moving_mean[0] - 0.01 * cache.mean[0]).abs() < 1e-15);
        assert!((bn.moving_var[0] - (0.99 + 0.01 * cache.var[0])).abs() < 1e-15);
    }

    #[test]
    fn batchnorm_empty_and_mismatch() {
        let bn = BatchNorm::<f64>::new(3, 1e-3, 0.99);
        assert_eq!(bn.forward_train(&[]).unwrap_err(), NetError::EmptyBatch);
        assert!(bn.forward_infer(&Tensor3::zeros(2, 2, 2)).is_err());
    }

    #[test]
    fn dense_identity() {
        let mut d = Dense::<f64>::zeros(3, 3, false);
        for i in 0..3 {
            d.weights[i * 3 + i] = 1.0;
        }
        assert_eq!(d.forward(&[1.5, -2.0, 7.0]).unwrap(), vec![1.5, -2.0, 7.0]);
    }

    #[test]
    fn dense_matches_dot_products() {
        let mut rng = rng_from(9);
        let mut d = Dense::<f64>::zeros(5, 3, false);
        d.weights.iter_mut().for_each(|w| *w = rng.gen_range(-1.0..1.0));
        d.bias.iter_mut().for_each(|w| *w = rng.gen_range(-1.0..1.0));
        let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = d.forward(&x).unwrap();
        for o in 0..3 {
            let expect: f64 = d.bias[o] + (0..5).map(|i| x[i] * d.weights[i * 3 + o]).sum::<f64>();
            assert!((y[o] - expect).abs() < 1e-6);
        }
        assert!(d.forward(&x[..4]).is_err());
    }

    #[test]
    fn dense_param_count() {
        let d = Dense::<f32>::zeros(192, 64, true);
        assert_eq!(d.weights.len() + d.bias.len(), 12352);
    }

    #[test]
    fn softmax_cases() {
        let p = softmax(&[0.3f64; 9]);
        assert!(p.iter().all(|&v| (v - 1.0 / 9.0).abs() < 1e-15));
        let p = softmax(&[0.0f64, 2f64.ln()]);
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-15 && (p[1] - 2.0 / 3.0).abs() < 1e-15);
        let mut z = [0.0f64; 9];
        z[0] = 1000.0;
        let p = softmax(&z);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dropout_modes() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let (y, mask) = Dropout { rate: 0.0 }.forward_train(&x, &mut rng_from(1));
        assert_eq!(y, x);
        assert!(mask.iter().all(|&m| m == 1.0));
    }

    #[test]
    fn dropout_zero_fraction() {
        let x = vec![1.0f32; 100_000];
        let (y, mask) = Dropout { rate: 0.5 }.forward_train(&x, &mut rng_from(77));
        let zeros = y.iter().filter(|&&v| v == 0.0).count() as f64 / 1e5;
        assert!((zeros - 0.5).abs() < 0.01, "zero fraction {zeros}");
        assert!(y.iter().all(|&v| v == 0.0 || v == 2.0));
        assert_eq!(Dropout::backward(&mask, &x), y);
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_is_shift_invariant(
            z in proptest::collection::vec(-50.0f64..50.0, 9),
            shift in -100.0f64..100.0,
        ) {
            let p = softmax(&z);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            let shifted: Vec<f64> = z.iter().map(|v| v + shift).collect();
            let q = softmax(&shifted);
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-6);
            }
        }

        #[test]
        fn maxpool_backward_conserves_mass(seed in any::<u64>()) {
            let x = random_tensor(10, 9, 2, seed);
            let pool = MaxPool { ph: 3, pw: 2 };
            let (y, arg) = pool.forward(&x).unwrap();
            let g = random_tensor(y.shape().h, y.shape().w, y.shape().c, seed ^ 1);
            let dx = MaxPool::backward(x.shape(), &arg, &g);
            let a: f64 = dx.data().iter().sum();
            let b: f64 = g.data().iter().sum();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
