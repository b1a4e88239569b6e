//! Feed-forward GAN with manual backpropagation and Adam.
//!
//! Generator: prior -> ReLU hidden layers -> sigmoid outputs, one per bit.
//! Discriminator: bits -> leaky-ReLU hidden layers -> sigmoid score, with
//! inverted dropout on the input of its final layer during training.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitcore::{Bitstring, SampleMultiset};
use crate::error::{Error, Result};
use crate::tasks::TrainingSet;
use crate::util::standard_normal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Sigmoid,
    Identity,
}

impl Activation {
    fn apply(&self, z: f64) -> f64 {
        match *self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu(s) => {
                if z > 0.0 {
                    z
                } else {
                    s * z
                }
            }
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// Derivative given both pre-activation z and activation a.
    fn derivative(&self, z: f64, a: f64) -> f64 {
        match *self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(s) => {
                if z > 0.0 {
                    1.0
                } else {
                    s
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Layer {
    /// (out_dim x in_dim)
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
    pub act: Activation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Layer>,
    /// Inverted dropout on the input of the final layer; 0 disables.
    dropout_rate: f64,
}

struct ForwardCache {
    /// inputs[l] is the input fed to layer l, after dropout where it applies.
    inputs: Vec<DMatrix<f64>>,
    zs: Vec<DMatrix<f64>>,
    out: DMatrix<f64>,
}

impl Mlp {
    pub fn new(layers: Vec<Layer>, dropout_rate: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParam("MLP needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[1].w.ncols() != pair[0].w.nrows() {
                return Err(Error::InvalidParam(format!(
                    "layer dims disagree: {} -> {}",
                    pair[0].w.nrows(),
                    pair[1].w.ncols()
                )));
            }
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::InvalidParam(format!(
                "dropout rate {dropout_rate} out of [0, 1)"
            )));
        }
        Ok(Self {
            layers,
            dropout_rate,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().w.nrows()
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Inverted-dropout mask for the input of the final layer, shaped for a
    /// batch of `batch` columns. Entries are 0 or 1/(1-rate).
    fn dropout_mask(&self, batch: usize, rng: &mut ChaCha8Rng) -> Option<DMatrix<f64>> {
        if self.dropout_rate == 0.0 || self.layers.len() < 2 {
            return None;
        }
        let dim = self.layers[self.layers.len() - 1].w.ncols();
        let keep = 1.0 - self.dropout_rate;
        Some(DMatrix::from_fn(dim, batch, |_, _| {
            if rng.gen::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        }))
    }

    fn forward_cached(&self, x: &DMatrix<f64>, mask: Option<&DMatrix<f64>>) -> ForwardCache {
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut zs = Vec::with_capacity(n);
        let mut a = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            if l == n - 1 {
                if let Some(m) = mask {
                    a.component_mul_assign(m);
                }
            }
            let mut z = &layer.w * &a;
            for mut col in z.column_iter_mut() {
                col += &layer.b;
            }
            let out = z.map(|v| layer.act.apply(v));
            inputs.push(a);
            zs.push(z);
            a = out;
        }
        ForwardCache {
            inputs,
            zs,
            out: a,
        }
    }

    /// Inference forward pass (no dropout); columns are batch entries.
    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.forward_cached(x, None).out
    }

    /// Backpropagates dL/d(output) through the cached pass. Returns per-layer
    /// gradients and dL/d(input).
    fn backward(
        &self,
        cache: &ForwardCache,
        d_out: &DMatrix<f64>,
        mask: Option<&DMatrix<f64>>,
    ) -> (Vec<(DMatrix<f64>, DVector<f64>)>, DMatrix<f64>) {
        let n = self.layers.len();
        let mut grads = vec![(DMatrix::zeros(0, 0), DVector::zeros(0)); n];
        let mut d_act = d_out.clone();
        for l in (0..n).rev() {
            let layer = &self.layers[l];
            let a = if l == n - 1 {
                &cache.out
            } else {
                &cache.inputs[l + 1]
            };
            let z = &cache.zs[l];
            let delta =
                DMatrix::from_fn(z.nrows(), z.ncols(), |i, j| {
                    d_act[(i, j)] * layer.act.derivative(z[(i, j)], a[(i, j)])
                });
            let dw = &delta * cache.inputs[l].transpose();
            let db = DVector::from_fn(delta.nrows(), |i, _| delta.row(i).sum());
            grads[l] = (dw, db);
            d_act = layer.w.transpose() * &delta;
            if l == n - 1 {
                if let Some(m) = mask {
                    d_act.component_mul_assign(m);
                }
            }
        }
        (grads, d_act)
    }

    /// Parameters flattened per layer: weight rows, then bias.
    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            for i in 0..layer.w.nrows() {
                for j in 0..layer.w.ncols() {
                    out.push(layer.w[(i, j)]);
                }
            }
            out.extend(layer.b.iter());
        }
        out
    }

    pub fn assign_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::InvalidParam(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut it = flat.iter();
        for layer in &mut self.layers {
            for i in 0..layer.w.nrows() {
                for j in 0..layer.w.ncols() {
                    layer.w[(i, j)] = *it.next().unwrap();
                }
            }
            for i in 0..layer.b.nrows() {
                layer.b[i] = *it.next().unwrap();
            }
        }
        Ok(())
    }
}

fn flatten_grads(grads: &[(DMatrix<f64>, DVector<f64>)]) -> Vec<f64> {
    let mut out = Vec::new();
    for (w, b) in grads {
        for i in 0..w.nrows() {
            for j in 0..w.ncols() {
                out.push(w[(i, j)]);
            }
        }
        out.extend(b.iter());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GanPreset {
    Gan,
    GanMc,
    GanPlus,
}

impl std::fmt::Display for GanPreset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GanPreset::Gan => write!(f, "GAN"),
            GanPreset::GanMc => write!(f, "GAN-MC"),
            GanPreset::GanPlus => write!(f, "GAN+"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GanConfig {
    pub preset: GanPreset,
    pub prior_size: usize,
    pub gen_hidden_size: usize,
    pub gen_layers: usize,
    pub gen_lr: f64,
    pub disc_hidden_size: usize,
    pub disc_layers: usize,
    pub disc_lr: f64,
    pub negative_slope: f64,
    pub dropout: f64,
    pub batch_size: usize,
    pub n_epochs: usize,
    /// Use the original minimax generator loss instead of the non-saturating
    /// default.
    pub saturating_gen_loss: bool,
    pub seed: u64,
}

impl GanConfig {
    /// Reference hyperparameter presets.
    pub fn preset(preset: GanPreset, n_epochs: usize, seed: u64) -> Self {
        let base = Self {
            preset,
            n_epochs,
            seed,
            saturating_gen_loss: false,
            ..match preset {
                GanPreset::Gan => Self {
                    preset,
                    prior_size: 20,
                    gen_hidden_size: 20,
                    gen_layers: 1,
                    gen_lr: 0.02,
                    disc_hidden_size: 20,
                    disc_layers: 1,
                    disc_lr: 0.02,
                    negative_slope: 0.02,
                    dropout: 1e-5,
                    batch_size: 50,
                    n_epochs,
                    saturating_gen_loss: false,
                    seed,
                },
                GanPreset::GanMc => Self {
                    preset,
                    prior_size: 8,
                    gen_hidden_size: 6,
                    gen_layers: 4,
                    gen_lr: 0.051,
                    disc_hidden_size: 9,
                    disc_layers: 3,
                    disc_lr: 0.008,
                    negative_slope: 0.007,
                    dropout: 0.024,
                    batch_size: 71,
                    n_epochs,
                    saturating_gen_loss: false,
                    seed,
                },
                GanPreset::GanPlus => Self {
                    preset,
                    prior_size: 12,
                    gen_hidden_size: 6,
                    gen_layers: 1,
                    gen_lr: 0.001,
                    disc_hidden_size: 9,
                    disc_layers: 1,
                    disc_lr: 0.006,
                    negative_slope: 0.010,
                    dropout: 0.107,
                    batch_size: 56,
                    n_epochs,
                    saturating_gen_loss: false,
                    seed,
                },
            }
        };
        base
    }

    pub fn validate(&self) -> Result<()> {
        if self.prior_size == 0
            || self.gen_hidden_size == 0
            || self.gen_layers == 0
            || self.disc_hidden_size == 0
            || self.disc_layers == 0
            || self.batch_size == 0
        {
            return Err(Error::InvalidParam("GAN dims must be positive".into()));
        }
        if !(self.gen_lr > 0.0 && self.disc_lr > 0.0) {
            return Err(Error::InvalidParam("learning rates must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidParam("dropout out of [0, 1)".into()));
        }
        if self.negative_slope <= 0.0 {
            return Err(Error::InvalidParam("negative_slope must be > 0".into()));
        }
        Ok(())
    }
}

fn gaussian_layer(
    out_dim: usize,
    in_dim: usize,
    act: Activation,
    rng: &mut ChaCha8Rng,
) -> Layer {
    // He init for ReLU-family layers, Xavier-like for the sigmoid output
    let std = match act {
        Activation::Relu | Activation::LeakyRelu(_) => (2.0 / in_dim as f64).sqrt(),
        _ => (1.0 / in_dim as f64).sqrt(),
    };
    Layer {
        w: DMatrix::from_fn(out_dim, in_dim, |_, _| std * standard_normal(rng)),
        b: DVector::zeros(out_dim),
        act,
    }
}

/// Builds the generator and discriminator; deterministic in `seed`
/// (generator layers are drawn first, then discriminator layers).
pub fn init_gan(cfg: &GanConfig, n_bits: usize, seed: u64) -> Result<(Mlp, Mlp)> {
    cfg.validate()?;
    if n_bits == 0 {
        return Err(Error::InvalidParam("n_bits must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut gen_layers = Vec::new();
    let mut in_dim = cfg.prior_size;
    for _ in 0..cfg.gen_layers {
        gen_layers.push(gaussian_layer(cfg.gen_hidden_size, in_dim, Activation::Relu, &mut rng));
        in_dim = cfg.gen_hidden_size;
    }
    gen_layers.push(gaussian_layer(n_bits, in_dim, Activation::Sigmoid, &mut rng));
    let gen = Mlp::new(gen_layers, 0.0)?;

    let mut disc_layers = Vec::new();
    let mut in_dim = n_bits;
    for _ in 0..cfg.disc_layers {
        disc_layers.push(gaussian_layer(
            cfg.disc_hidden_size,
            in_dim,
            Activation::LeakyRelu(cfg.negative_slope),
            &mut rng,
        ));
        in_dim = cfg.disc_hidden_size;
    }
    disc_layers.push(gaussian_layer(1, in_dim, Activation::Sigmoid, &mut rng));
    let disc = Mlp::new(disc_layers, cfg.dropout)?;
    Ok((gen, disc))
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        Self {
            first_moment: vec![0.0; n_params],
            second_moment: vec![0.0; n_params],
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

/// One bias-corrected Adam step in place.
pub fn adam_update(
    state: &mut AdamState,
    params: &mut [f64],
    grads: &[f64],
    lr: f64,
) -> Result<()> {
    if params.len() != state.first_moment.len() || grads.len() != params.len() {
        return Err(Error::InvalidParam("Adam shape mismatch".into()));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::TrainingDiverged("non-finite gradient".into()));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - ADAM_BETA1.powi(t);
    let bc2 = 1.0 - ADAM_BETA2.powi(t);
    for i in 0..params.len() {
        let m = &mut state.first_moment[i];
        let v = &mut state.second_moment[i];
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * grads[i];
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * grads[i] * grads[i];
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
    Ok(())
}

/// Discriminator loss and flat gradient on one real + one fake batch:
/// BCE with real target 1 and fake target 0, each term batch-averaged.
/// Public for gradient diagnostics.
pub fn disc_loss_and_grad(
    disc: &Mlp,
    real: &DMatrix<f64>,
    fake: &DMatrix<f64>,
    mask_real: Option<&DMatrix<f64>>,
    mask_fake: Option<&DMatrix<f64>>,
) -> Result<(f64, Vec<f64>)> {
    let b_real = real.ncols() as f64;
    let b_fake = fake.ncols() as f64;

    let cache_r = disc.forward_cached(real, mask_real);
    let cache_f = disc.forward_cached(fake, mask_fake);
    let mut loss = 0.0;
    let mut d_out_r = DMatrix::zeros(1, real.ncols());
    for (j, &y) in cache_r.out.iter().enumerate() {
        loss -= y.ln() / b_real;
        d_out_r[(0, j)] = -1.0 / (y * b_real);
    }
    let mut d_out_f = DMatrix::zeros(1, fake.ncols());
    for (j, &y) in cache_f.out.iter().enumerate() {
        loss -= (1.0 - y).ln() / b_fake;
        d_out_f[(0, j)] = 1.0 / ((1.0 - y) * b_fake);
    }
    if !loss.is_finite() {
        return Err(Error::TrainingDiverged(format!(
            "discriminator loss = {loss}"
        )));
    }
    let (gr, _) = disc.backward(&cache_r, &d_out_r, mask_real);
    let (gf, _) = disc.backward(&cache_f, &d_out_f, mask_fake);
    let mut flat = flatten_grads(&gr);
    for (a, b) in flat.iter_mut().zip(flatten_grads(&gf)) {
        *a += b;
    }
    Ok((loss, flat))
}

/// Generator loss and flat gradient through a frozen discriminator.
/// Non-saturating by default: minimize -mean ln D(G(z)); the saturating
/// variant minimizes mean ln(1 - D(G(z))). Public for gradient diagnostics.
pub fn gen_loss_and_grad(
    gen: &Mlp,
    disc: &Mlp,
    z: &DMatrix<f64>,
    mask: Option<&DMatrix<f64>>,
    saturating: bool,
) -> Result<(f64, Vec<f64>)> {
    let b = z.ncols() as f64;
    let cache_g = gen.forward_cached(z, None);
    let cache_d = disc.forward_cached(&cache_g.out, mask);
    let mut loss = 0.0;
    let mut d_out = DMatrix::zeros(1, z.ncols());
    for (j, &y) in cache_d.out.iter().enumerate() {
        if saturating {
            loss += (1.0 - y).ln() / b;
            d_out[(0, j)] = -1.0 / ((1.0 - y) * b);
        } else {
            loss -= y.ln() / b;
            d_out[(0, j)] = -1.0 / (y * b);
        }
    }
    if !loss.is_finite() {
        return Err(Error::TrainingDiverged(format!("generator loss = {loss}")));
    }
    let (_, d_fake) = disc.backward(&cache_d, &d_out, mask);
    let (grads, _) = gen.backward(&cache_g, &d_fake, None);
    Ok((loss, flatten_grads(&grads)))
}

/// Per-epoch mean losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLosses {
    pub disc: f64,
    pub gen: f64,
}

/// Cumulative distribution over the training set for minibatch draws with
/// replacement; uniform over unique samples unless the set is reweighted.
struct TrainSampler {
    columns: Vec<DVector<f64>>,
    cdf: Vec<f64>,
}

impl TrainSampler {
    fn new(train: &TrainingSet) -> Self {
        let width = train.space().width();
        let mut columns = Vec::new();
        let mut cdf = Vec::new();
        let mut acc = 0.0;
        for (x, p) in train.distribution() {
            acc += p;
            cdf.push(acc);
            columns.push(DVector::from_fn(width, |i, _| x.bit(i) as f64));
        }
        TrainSampler { columns, cdf }
    }

    fn draw_batch(&self, batch: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let dim = self.columns[0].nrows();
        let mut out = DMatrix::zeros(dim, batch);
        for j in 0..batch {
            let u: f64 = rng.gen();
            let idx = self.cdf.partition_point(|&c| c < u).min(self.cdf.len() - 1);
            out.set_column(j, &self.columns[idx]);
        }
        out
    }
}

/// Standard-normal prior batch, one column per sample.
pub fn prior_batch(prior_size: usize, batch: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(prior_size, batch, |_, _| standard_normal(rng))
}

/// Alternating discriminator/generator training. Each epoch runs
/// ceil(T / batch_size) minibatches of one discriminator step followed by
/// one generator step; the history records epoch-mean losses.
pub fn gan_train(
    mut gen: Mlp,
    mut disc: Mlp,
    train: &TrainingSet,
    cfg: &GanConfig,
) -> Result<(Mlp, Mlp, Vec<EpochLosses>)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidParam("empty training set".into()));
    }
    if gen.out_dim() != train.space().width() || disc.in_dim() != train.space().width() {
        return Err(Error::WidthMismatch {
            expected: train.space().width(),
            got: gen.out_dim(),
        });
    }
    let sampler = TrainSampler::new(train);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let batches_per_epoch = (train.len() as usize).div_ceil(cfg.batch_size);
    let b = cfg.batch_size;

    let mut adam_d = AdamState::new(disc.param_count());
    let mut adam_g = AdamState::new(gen.param_count());
    let mut history = Vec::with_capacity(cfg.n_epochs);

    for _ in 0..cfg.n_epochs {
        let mut d_sum = 0.0;
        let mut g_sum = 0.0;
        for _ in 0..batches_per_epoch {
            // discriminator step
            let real = sampler.draw_batch(b, &mut rng);
            let mask_real = disc.dropout_mask(b, &mut rng);
            let z = prior_batch(gen.in_dim(), b, &mut rng);
            let fake = gen.forward(&z);
            let mask_fake = disc.dropout_mask(b, &mut rng);
            let (d_loss, d_grad) =
                disc_loss_and_grad(&disc, &real, &fake, mask_real.as_ref(), mask_fake.as_ref())?;
            let mut d_params = disc.flatten_params();
            adam_update(&mut adam_d, &mut d_params, &d_grad, cfg.disc_lr)?;
            disc.assign_params(&d_params)?;

            // generator step
            let z = prior_batch(gen.in_dim(), b, &mut rng);
            let mask = disc.dropout_mask(b, &mut rng);
            let (g_loss, g_grad) =
                gen_loss_and_grad(&gen, &disc, &z, mask.as_ref(), cfg.saturating_gen_loss)?;
            let mut g_params = gen.flatten_params();
            adam_update(&mut adam_g, &mut g_params, &g_grad, cfg.gen_lr)?;
            gen.assign_params(&g_params)?;

            d_sum += d_loss;
            g_sum += g_loss;
        }
        history.push(EpochLosses {
            disc: d_sum / batches_per_epoch as f64,
            gen: g_sum / batches_per_epoch as f64,
        });
    }
    Ok((gen, disc, history))
}

/// Draws Q samples: prior vectors through the generator, sigmoid outputs
/// thresholded at 0.5 with the tie (exactly 0.5) mapping to bit 1.
pub fn gan_sample(gen: &Mlp, q: u64, seed: u64) -> Result<SampleMultiset> {
    let n = gen.out_dim();
    if n > crate::bitcore::MAX_WIDTH {
        return Err(Error::InvalidParam(format!("generator width {n} too wide")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SampleMultiset::new(n);
    for _ in 0..q {
        let z = prior_batch(gen.in_dim(), 1, &mut rng);
        let y = gen.forward(&z);
        let mut bits = 0u32;
        for i in 0..n {
            if y[(i, 0)] >= 0.5 {
                bits |= 1 << i;
            }
        }
        out.insert(Bitstring::new(n, bits))?;
    }
    Ok(out)
}

/// Versioned checkpoint: config echo plus both networks' layers in order.
#[derive(Debug, Serialize, Deserialize)]
pub struct GanCheckpoint {
    pub format_version: u32,
    pub config: GanConfig,
    pub generator: Mlp,
    pub discriminator: Mlp,
}

pub const GAN_CHECKPOINT_VERSION: u32 = 1;

pub fn save_gan_checkpoint(
    path: &std::path::Path,
    cfg: &GanConfig,
    gen: &Mlp,
    disc: &Mlp,
) -> Result<()> {
    let ckpt = GanCheckpoint {
        format_version: GAN_CHECKPOINT_VERSION,
        config: *cfg,
        generator: gen.clone(),
        discriminator: disc.clone(),
    };
    std::fs::write(path, serde_json::to_string(&ckpt)?)?;
    Ok(())
}

pub fn load_gan_checkpoint(path: &std::path::Path) -> Result<GanCheckpoint> {
    let ckpt: GanCheckpoint = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if ckpt.format_version != GAN_CHECKPOINT_VERSION {
        return Err(Error::Parse(format!(
            "unsupported checkpoint version {}",
            ckpt.format_version
        )));
    }
    Ok(ckpt)
}
