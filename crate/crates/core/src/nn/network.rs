use rand::Rng;
use rayon::prelude::*;

use super::layers::BatchNormCache;
use super::spec::{Activation, LayerParams};
use super::{softmax, BatchNorm, Conv2d, Dense, Dropout, LayerSpec, MaxPool, NetError, NetworkSpec, Real, Shape, Tensor3};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<F> {
    Conv(Conv2d<F>),
    Pool(MaxPool),
    BatchNorm(BatchNorm<F>),
    Flatten,
    Dense(Dense<F>),
    Dropout(Dropout),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in batch normalization; dropout drawn from the seed,
    /// or disabled when the seed is `None`.
    Train { dropout_seed: Option<u64> },
    /// Moving statistics, no dropout, no state change.
    Infer,
}

#[derive(Debug, Clone, PartialEq)]
enum Cache<F> {
    None,
    Pool(Vec<Vec<u32>>),
    BatchNorm(BatchNormCache<F>),
    Dropout(Vec<Vec<F>>),
}

/// Everything a training-mode forward pass keeps for backpropagation.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace<F> {
    version: u64,
    /// First layer covered; zero for a full pass.
    start: usize,
    /// `activations[0]` is the input batch, `activations[l + 1]` the output
    /// of layer `l` (post activation; logits for the softmax layer).
    activations: Vec<Vec<Tensor3<F>>>,
    caches: Vec<Cache<F>>,
    probs: Vec<Vec<F>>,
}

impl<F: Real> ForwardTrace<F> {
    pub fn batch_size(&self) -> usize {
        self.probs.len()
    }

    pub fn probabilities(&self) -> &[Vec<F>] {
        &self.probs
    }

    /// Input batch of layer `layer`.
    pub fn layer_input(&self, layer: usize) -> &[Tensor3<F>] {
        &self.activations[layer - self.start]
    }

    /// Output batch of layer `layer`.
    pub fn layer_output(&self, layer: usize) -> &[Tensor3<F>] {
        &self.activations[layer + 1 - self.start]
    }

    /// Batch mean and variance recorded by a batch-normalization layer.
    pub fn batch_statistics(&self, layer: usize) -> Option<(&[F], &[F])> {
        match &self.caches[layer - self.start] {
            Cache::BatchNorm(c) => Some((&c.mean, &c.var)),
            _ => None,
        }
    }

    pub fn dropout_mask(&self, layer: usize) -> Option<&[Vec<F>]> {
        match &self.caches[layer - self.start] {
            Cache::Dropout(m) => Some(m),
            _ => None,
        }
    }

    /// Winning positions recorded by a max-pooling layer, per example.
    pub fn pool_argmax(&self, layer: usize) -> Option<&[Vec<u32>]> {
        match &self.caches[layer - self.start] {
            Cache::Pool(a) => Some(a),
            _ => None,
        }
    }
}

/// Gradients of the mean cross-entropy, one group per trainable tensor in
/// canonical order (see [`Network::trainable_names`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<F> {
    pub groups: Vec<Vec<F>>,
}

impl<F: Real> Gradients<F> {
    pub fn is_all_zero(&self) -> bool {
        self.groups.iter().flatten().all(|g| *g == F::zero())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamReport {
    pub trainable: usize,
    pub non_trainable: usize,
    /// Total (trainable + non-trainable) per layer.
    pub per_layer: Vec<usize>,
}

impl ParamReport {
    pub fn total(&self) -> usize {
        self.trainable + self.non_trainable
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<F> {
    spec: NetworkSpec,
    layers: Vec<Layer<F>>,
    shapes: Vec<Shape>,
    version: u64,
}

fn glorot<F: Real, R: Rng>(rng: &mut R, values: &mut [F], fan_in: usize, fan_out: usize) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in values {
        *v = F::of(rng.gen_range(-limit..limit));
    }
}

impl<F: Real> Network<F> {
    /// Zero weights and biases, γ = 1, β = 0, moving mean 0, moving var 1.
    pub fn zeros(spec: NetworkSpec) -> Result<Self, NetError> {
        spec.validate()?;
        let shapes = spec.output_shapes()?;
        let mut input = spec.input;
        let mut layers = Vec::with_capacity(spec.layers.len());
        for (ls, out) in spec.layers.iter().zip(&shapes) {
            layers.push(match *ls {
                LayerSpec::Conv2d { filters, kernel: [fh, fw], activation } => {
                    Layer::Conv(Conv2d::zeros(fh, fw, input.c, filters, activation == Activation::Relu))
                }
                LayerSpec::MaxPool2d { pool: [ph, pw] } => Layer::Pool(MaxPool { ph, pw }),
                LayerSpec::BatchNorm { epsilon, momentum } => Layer::BatchNorm(BatchNorm::new(input.c, epsilon, momentum)),
                LayerSpec::Flatten => Layer::Flatten,
                LayerSpec::Dense { units, activation } => {
                    Layer::Dense(Dense::zeros(input.c, units, activation == Activation::Relu))
                }
                LayerSpec::Dropout { rate } => Layer::Dropout(Dropout { rate }),
            });
            input = *out;
        }
        Ok(Network {
            spec,
            layers,
            shapes,
            version: 0,
        })
    }

    /// Glorot-uniform weights (fan-in/fan-out over the receptive field for
    /// convolutions), zero biases, unit/zero batch-norm state.
    pub fn new(spec: NetworkSpec, seed: u64) -> Result<Self, NetError> {
        let mut net = Network::zeros(spec)?;
        let mut rng = stream_rng(seed, Stream::Init, &[]);
        for layer in &mut net.layers {
            match layer {
                Layer::Conv(c) => {
                    let rf = c.fh * c.fw;
                    glorot(&mut rng, &mut c.weights, rf * c.cin, rf * c.cout);
                }
                Layer::Dense(d) => glorot(&mut rng, &mut d.weights, d.input, d.units),
                _ => {}
            }
        }
        Ok(net)
    }

    /// The architecture-table network with seeded initialization.
    pub fn reference(seed: u64) -> Self {
        Network::new(NetworkSpec::reference(), seed).expect("table network spec is valid")
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer<F>] {
        &self.layers
    }

    /// Direct layer access for tests and tooling. Bumps the version, so
    /// outstanding traces become stale.
    pub fn layers_mut(&mut self) -> &mut [Layer<F>] {
        self.version += 1;
        &mut self.layers
    }

    pub fn output_shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn num_classes(&self) -> usize {
        self.spec.class_names.len()
    }

    /// Mutation counter used to detect stale traces.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn cast<G: Real>(&self) -> Network<G> {
        let conv = |v: &[F]| v.iter().map(|x| G::of(x.f64())).collect::<Vec<G>>();
        let layers = self
            .layers
            .iter()
            .map(|l| match l {
                Layer::Conv(c) => Layer::Conv(Conv2d {
                    fh: c.fh,
                    fw: c.fw,
                    cin: c.cin,
                    cout: c.cout,
                    weights: conv(&c.weights),
                    bias: conv(&c.bias),
                    relu: c.relu,
                }),
                Layer::Pool(p) => Layer::Pool(*p),
                Layer::BatchNorm(b) => Layer::BatchNorm(BatchNorm {
                    gamma: conv(&b.gamma),
                    beta: conv(&b.beta),
                    moving_mean: conv(&b.moving_mean),
                    moving_var: conv(&b.moving_var),
                    epsilon: b.epsilon,
                    momentum: b.momentum,
                }),
                Layer::Flatten => Layer::Flatten,
                Layer::Dense(d) => Layer::Dense(Dense {
                    input: d.input,
                    units: d.units,
                    weights: conv(&d.weights),
                    bias: conv(&d.bias),
                    relu: d.relu,
                }),
                Layer::Dropout(d) => Layer::Dropout(*d),
            })
            .collect();
        Network {
            spec: self.spec.clone(),
            layers,
            shapes: self.shapes.clone(),
            version: self.version,
        }
    }

    pub fn count_params(&self) -> ParamReport {
        let per: Vec<LayerParams> = self
            .layers
            .iter()
            .map(|l| match l {
                Layer::Conv(c) => LayerParams {
                    trainable: c.weights.len() + c.bias.len(),
                    non_trainable: 0,
                },
                Layer::BatchNorm(b) => LayerParams {
                    trainable: b.gamma.len() + b.beta.len(),
                    non_trainable: b.moving_mean.len() + b.moving_var.len(),
                },
                Layer::Dense(d) => LayerParams {
                    trainable: d.weights.len() + d.bias.len(),
                    non_trainable: 0,
                },
                _ => LayerParams { trainable: 0, non_trainable: 0 },
            })
            .collect();
        ParamReport {
            trainable: per.iter().map(|p| p.trainable).sum(),
            non_trainable: per.iter().map(|p| p.non_trainable).sum(),
            per_layer: per.iter().map(|p| p.total()).collect(),
        }
    }

    /// Names of trainable tensors, e.g. `conv1.weights`, `bn2.gamma`.
    pub fn trainable_names(&self) -> Vec<String> {
        self.tensor_names(false)
    }

    fn tensor_names(&self, with_moving: bool) -> Vec<String> {
        let mut out = Vec::new();
        for (layer, name) in self.layers.iter().zip(self.spec.layer_names()) {
            let fields: &[&str] = match layer {
                Layer::Conv(_) | Layer::Dense(_) => &["weights", "biases"],
                Layer::BatchNorm(_) if with_moving => &["gamma", "beta", "moving_mean", "moving_var"],
                Layer::BatchNorm(_) => &["gamma", "beta"],
                _ => &[],
            };
            out.extend(fields.iter().map(|f| format!("{name}.{f}")));
        }
        out
    }

    /// Layer index owning each trainable group.
    pub fn trainable_layers(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            if matches!(layer, Layer::Conv(_) | Layer::Dense(_) | Layer::BatchNorm(_)) {
                out.extend([i, i]);
            }
        }
        out
    }

    pub fn trainable(&self) -> Vec<&[F]> {
        let mut out: Vec<&[F]> = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => out.extend([&c.weights[..], &c.bias[..]]),
                Layer::BatchNorm(b) => out.extend([&b.gamma[..], &b.beta[..]]),
                Layer::Dense(d) => out.extend([&d.weights[..], &d.bias[..]]),
                _ => {}
            }
        }
        out
    }

    /// Mutable trainable tensors in canonical order. Bumps the version.
    pub fn trainable_mut(&mut self) -> Vec<&mut [F]> {
        self.version += 1;
        let mut out: Vec<&mut [F]> = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(c) => out.extend([&mut c.weights[..], &mut c.bias[..]]),
                Layer::BatchNorm(b) => out.extend([&mut b.gamma[..], &mut b.beta[..]]),
                Layer::Dense(d) => out.extend([&mut d.weights[..], &mut d.bias[..]]),
                _ => {}
            }
        }
        out
    }

    /// Every stored tensor (trainable and moving statistics) in checkpoint
    /// order, with its name and shape.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[F])> {
        let names = self.tensor_names(true);
        let mut out: Vec<(Vec<usize>, &[F])> = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => {
                    out.push((vec![c.fh, c.fw, c.cin, c.cout], &c.weights));
                    out.push((vec![c.cout], &c.bias));
                }
                Layer::BatchNorm(b) => {
                    let n = b.channels();
                    for t in [&b.gamma, &b.beta, &b.moving_mean, &b.moving_var] {
                        out.push((vec![n], t));
                    }
                }
                Layer::Dense(d) => {
                    out.push((vec![d.input, d.units], &d.weights));
                    out.push((vec![d.units], &d.bias));
                }
                _ => {}
            }
        }
        names.into_iter().zip(out).map(|(n, (s, t))| (n, s, t)).collect()
    }

    /// Overwrites every stored tensor from a flat buffer in [`Network::tensors`]
    /// order. The buffer length must match exactly.
    pub fn load_tensors(&mut self, values: &[F]) -> Result<(), NetError> {
        let expected = self.count_params().total();
        if values.len() != expected {
            return Err(NetError::shape("parameters", expected, values.len()));
        }
        self.version += 1;
        let mut rest = values;
        let mut take = |dst: &mut [F]| {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        };
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(c) => {
                    take(&mut c.weights);
                    take(&mut c.bias);
                }
                Layer::BatchNorm(b) => {
                    take(&mut b.gamma);
                    take(&mut b.beta);
                    take(&mut b.moving_mean);
                    take(&mut b.moving_var);
                }
                Layer::Dense(d) => {
                    take(&mut d.weights);
                    take(&mut d.bias);
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn check_inputs(&self, inputs: &[Tensor3<F>]) -> Result<(), NetError> {
        for x in inputs {
            if x.shape() != self.spec.input {
                return Err(NetError::shape("input", self.spec.input, x.shape()));
            }
        }
        Ok(())
    }

    /// Inference on one example: class probabilities.
    pub fn infer_one(&self, x: &Tensor3<F>) -> Result<Vec<F>, NetError> {
        self.check_inputs(std::slice::from_ref(x))?;
        let mut cur = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            cur = match layer {
                Layer::Conv(c) => c.forward(&cur)?,
                Layer::Pool(p) => p.forward(&cur)?.0,
                Layer::BatchNorm(b) => b.forward_infer(&cur)?,
                Layer::Flatten => {
                    let n = cur.shape().len();
                    cur.reshape(Shape::flat(n))
                }
                Layer::Dense(d) => Tensor3::flat(d.forward(cur.data())?),
                Layer::Dropout(_) => cur,
            };
            debug_assert_eq!(cur.shape(), self.shapes[l]);
        }
        Ok(softmax(cur.data()))
    }

    /// Forward pass over a batch. Training mode also returns the trace.
    pub fn forward(&self, inputs: &[Tensor3<F>], mode: Mode) -> Result<(Vec<Vec<F>>, Option<ForwardTrace<F>>), NetError> {
        self.check_inputs(inputs)?;
        match mode {
            Mode::Infer => {
                let probs = inputs
                    .par_iter()
                    .map(|x| self.infer_one(x))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((probs, None))
            }
            Mode::Train { dropout_seed } => {
                let trace = self.run_train(0, inputs.to_vec(), dropout_seed, true)?;
                Ok((trace.probs.clone(), Some(trace)))
            }
        }
    }

    /// Training-mode forward starting at layer `start`, given that layer's
    /// input batch. Used by the finite-difference checker to avoid
    /// recomputing unchanged prefixes.
    pub fn forward_train_from(
        &self,
        start: usize,
        inputs: Vec<Tensor3<F>>,
        dropout_seed: Option<u64>,
    ) -> Result<Vec<Vec<F>>, NetError> {
        Ok(self.run_train(start, inputs, dropout_seed, false)?.probs)
    }

    /// Like [`Network::forward_train_from`] but keeps the partial trace
    /// (layers `start..`). Such a trace cannot be passed to `backward`
    /// unless `start` is zero.
    pub fn forward_trace_from(
        &self,
        start: usize,
        inputs: Vec<Tensor3<F>>,
        dropout_seed: Option<u64>,
    ) -> Result<ForwardTrace<F>, NetError> {
        self.run_train(start, inputs, dropout_seed, true)
    }

    fn run_train(
        &self,
        start: usize,
        inputs: Vec<Tensor3<F>>,
        dropout_seed: Option<u64>,
        keep: bool,
    ) -> Result<ForwardTrace<F>, NetError> {
        if inputs.is_empty() {
            return Err(NetError::EmptyBatch);
        }
        let mut activations = Vec::new();
        let mut caches = Vec::new();
        let mut cur = inputs;
        for (l, layer) in self.layers.iter().enumerate().skip(start) {
            let (next, cache) = match layer {
                Layer::Conv(c) => (cur.par_iter().map(|x| c.forward(x)).collect::<Result<Vec<_>, _>>()?, Cache::None),
                Layer::Pool(p) => {
                    let (outs, args): (Vec<_>, Vec<_>) = cur
                        .par_iter()
                        .map(|x| p.forward(x))
                        .collect::<Result<Vec<_>, _>>()?
                        .into_iter()
                        .unzip();
                    (outs, Cache::Pool(args))
                }
                Layer::BatchNorm(b) => {
                    let (outs, cache) = b.forward_train(&cur)?;
                    (outs, Cache::BatchNorm(cache))
                }
                Layer::Flatten => (
                    cur.iter()
                        .map(|x| {
                            let n = x.shape().len();
                            x.clone().reshape(Shape::flat(n))
                        })
                        .collect(),
                    Cache::None,
                ),
                Layer::Dense(d) => (
                    cur.par_iter()
                        .map(|x| d.forward(x.data()).map(Tensor3::flat))
                        .collect::<Result<Vec<_>, _>>()?,
                    Cache::None,
                ),
                Layer::Dropout(d) => match dropout_seed {
                    Some(seed) => {
                        let (outs, masks): (Vec<_>, Vec<_>) = cur
                            .iter()
                            .enumerate()
                            .map(|(e, x)| {
                                let mut rng = stream_rng(seed, Stream::Dropout, &[l as u64, e as u64]);
                                let (y, m) = d.forward_train(x.data(), &mut rng);
                                (Tensor3::flat(y), m)
                            })
                            .unzip();
                        (outs, Cache::Dropout(masks))
                    }
                    None => {
                        let masks = cur.iter().map(|x| vec![F::one(); x.shape().len()]).collect();
                        (cur.clone(), Cache::Dropout(masks))
                    }
                },
            };
            if keep {
                activations.push(std::mem::replace(&mut cur, next));
            } else {
                cur = next;
            }
            caches.push(cache);
        }
        let probs: Vec<Vec<F>> = cur.iter().map(|z| softmax(z.data())).collect();
        activations.push(cur);
        Ok(ForwardTrace {
            version: self.version,
            start,
            activations,
            caches,
            probs,
        })
    }

    /// Folds the batch statistics recorded in a training trace into the
    /// moving mean/variance of every batch-normalization layer.
    pub fn apply_batch_statistics(&mut self, trace: &ForwardTrace<F>) {
        self.version += 1;
        for (layer, cache) in self.layers.iter_mut().zip(&trace.caches) {
            if let (Layer::BatchNorm(b), Cache::BatchNorm(c)) = (layer, cache) {
                b.update_moving(&c.mean, &c.var);
            }
        }
    }

    /// Gradients of `−(1/B) Σ Σ_k y_k ln p_k` with respect to every
    /// trainable tensor. `targets` are per-example distributions (one-hot
    /// for ordinary labels).
    pub fn backward(&self, trace: &ForwardTrace<F>, targets: &[Vec<F>]) -> Result<Gradients<F>, NetError> {
        if trace.version != self.version {
            return Err(NetError::StaleTrace {
                trace: trace.version,
                network: self.version,
            });
        }
        if trace.start != 0 || trace.activations.len() != self.layers.len() + 1 {
            return Err(NetError::InvalidSpec("trace does not cover the whole network".into()));
        }
        let batch = trace.batch_size();
        if targets.len() != batch {
            return Err(NetError::shape("targets", batch, targets.len()));
        }
        let classes = self.num_classes();
        let scale = F::of(batch as f64);
        let mut grad: Vec<Tensor3<F>> = Vec::with_capacity(batch);
        for (p, y) in trace.probs.iter().zip(targets) {
            if y.len() != classes {
                return Err(NetError::shape("targets", classes, y.len()));
            }
            grad.push(Tensor3::flat(p.iter().zip(y).map(|(p, y)| (*p - *y) / scale).collect()));
        }

        let mut per_layer: Vec<Vec<Vec<F>>> = vec![Vec::new(); self.layers.len()];
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let xs = &trace.activations[l];
            let outs = &trace.activations[l + 1];
            match (layer, &trace.caches[l]) {
                (Layer::Conv(c), _) => {
                    let want_dx = l > 0;
                    let parts: Vec<_> = (0..batch)
                        .into_par_iter()
                        .map(|e| c.backward(&xs[e], &outs[e], &grad[e], want_dx))
                        .collect();
                    let (mut dw, mut db) = (vec![F::zero(); c.weights.len()], vec![F::zero(); c.cout]);
                    let mut dxs = Vec::with_capacity(batch);
                    for (dx, w, b) in parts {
                        add_into(&mut dw, &w);
                        add_into(&mut db, &b);
                        dxs.extend(dx);
                    }
                    per_layer[l] = vec![dw, db];
                    grad = dxs;
                }
                (Layer::Pool(_), Cache::Pool(args)) => {
                    grad = (0..batch)
                        .map(|e| MaxPool::backward(xs[e].shape(), &args[e], &grad[e]))
                        .collect();
                }
                (Layer::BatchNorm(b), Cache::BatchNorm(cache)) => {
                    let (dx, dg, dbeta) = b.backward(&grad, cache);
                    per_layer[l] = vec![dg, dbeta];
                    grad = dx;
                }
                (Layer::Flatten, _) => {
                    grad = grad
                        .into_iter()
                        .zip(xs)
                        .map(|(g, x)| g.reshape(x.shape()))
                        .collect();
                }
                (Layer::Dense(d), _) => {
                    let parts: Vec<_> = (0..batch)
                        .into_par_iter()
                        .map(|e| d.backward(xs[e].data(), outs[e].data(), grad[e].data()))
                        .collect();
                    let (mut dw, mut db) = (vec![F::zero(); d.weights.len()], vec![F::zero(); d.units]);
                    let mut dxs = Vec::with_capacity(batch);
                    for (dx, w, b) in parts {
                        add_into(&mut dw, &w);
                        add_into(&mut db, &b);
                        dxs.push(Tensor3::flat(dx));
                    }
                    per_layer[l] = vec![dw, db];
                    grad = dxs;
                }
                (Layer::Dropout(_), Cache::Dropout(masks)) => {
                    grad = grad
                        .iter()
                        .zip(masks)
                        .map(|(g, m)| Tensor3::flat(Dropout::backward(m, g.data())))
                        .collect();
                }
                _ => return Err(NetError::InvalidSpec(format!("trace cache does not match layer {l}"))),
            }
        }
        Ok(Gradients {
            groups: per_layer.into_iter().flatten().collect(),
        })
    }
}

fn add_into<F: Real>(acc: &mut [F], v: &[F]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a = *a + *b;
    }
}
