//! The backward model: an MLP with one shared head layer and per-timestep
//! tails (two dense layers each) predicting per-pixel logits for `x_{t-1}`
//! given `x_t`. Includes Adam training on cross-entropy or posterior-KL
//! objectives and ancestral generation.
//!
//! The input is the concatenated per-pixel one-hot encoding of `x_t`
//! (`width·height·k` units); the output is grouped into `width·height`
//! softmax blocks of size `k`. Time conditioning is purely structural: step
//! `t` selects tail `t`.

use rand::Rng;

use crate::diffusion::{posterior, CategoricalImage, QSchedule, Trajectory};
use crate::metrics::{FeatureExtractor, FeatureMatrix};
use crate::rng::{derive_seed, sample_categorical, seeded, tag};
use crate::{Error, Result};

/// Hidden width of the head and tail layers.
pub const DEFAULT_HIDDEN: usize = 800;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

/// One per-timestep tail: `hidden → hidden` with ReLU, then a linear
/// `hidden → width·height·k` logit layer. Weights are row-major by output
/// unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Tail {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// All weights of the denoiser. The head (`width·height·k → hidden`,
/// row-major by *input* unit for one-hot gathers) is shared across steps;
/// tail `t-1` serves diffusion step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserParams {
    width: usize,
    height: usize,
    k: usize,
    t_steps: usize,
    hidden: usize,
    head_w: Vec<f64>,
    head_b: Vec<f64>,
    tails: Vec<Tail>,
}

impl DenoiserParams {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t_steps(&self) -> usize {
        self.t_steps
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// Width of the one-hot input layer (= logit output width).
    pub fn input_width(&self) -> usize {
        self.width * self.height * self.k
    }

    pub fn n_parameters(&self) -> usize {
        self.head_w.len()
            + self.head_b.len()
            + self
                .tails
                .iter()
                .map(|t| t.w1.len() + t.b1.len() + t.w2.len() + t.b2.len())
                .sum::<usize>()
    }

    pub fn tails(&self) -> &[Tail] {
        &self.tails
    }

    pub fn tails_mut(&mut self) -> &mut [Tail] {
        &mut self.tails
    }

    pub fn head_w(&self) -> &[f64] {
        &self.head_w
    }

    pub fn head_w_mut(&mut self) -> &mut [f64] {
        &mut self.head_w
    }

    pub fn head_b(&self) -> &[f64] {
        &self.head_b
    }

    pub fn head_b_mut(&mut self) -> &mut [f64] {
        &mut self.head_b
    }

    fn head_forward(&self, levels: &[u8], h_pre: &mut [f64]) {
        h_pre.copy_from_slice(&self.head_b);
        for (p, &lvl) in levels.iter().enumerate() {
            let row = p * self.k + lvl as usize;
            let w = &self.head_w[row * self.hidden..(row + 1) * self.hidden];
            add_assign(h_pre, w);
        }
    }
}

/// Uniform `±1/√fan_in` weights, zero biases, deterministic per seed.
pub fn init_params(
    width: usize,
    height: usize,
    k: usize,
    t_steps: usize,
    seed: u64,
) -> Result<DenoiserParams> {
    init_params_with(width, height, k, t_steps, DEFAULT_HIDDEN, seed)
}

/// As [`init_params`] with an explicit hidden width (smaller nets for tests
/// and quick runs).
pub fn init_params_with(
    width: usize,
    height: usize,
    k: usize,
    t_steps: usize,
    hidden: usize,
    seed: u64,
) -> Result<DenoiserParams> {
    if width == 0 || height == 0 || k == 0 || t_steps == 0 || hidden == 0 {
        return Err(Error::Parameter("all model dimensions must be positive".into()));
    }
    let n_in = width * height * k;
    let mut rng = seeded(derive_seed(seed, &[tag("init")]));
    let mut uniform = |fan_in: usize, len: usize| -> Vec<f64> {
        let bound = 1.0 / (fan_in as f64).sqrt();
        (0..len).map(|_| rng.gen_range(-bound..bound)).collect()
    };
    let head_w = uniform(n_in, n_in * hidden);
    let head_b = vec![0.0; hidden];
    let tails = (0..t_steps)
        .map(|_| Tail {
            w1: uniform(hidden, hidden * hidden),
            b1: vec![0.0; hidden],
            w2: uniform(hidden, n_in * hidden),
            b2: vec![0.0; n_in],
        })
        .collect();
    Ok(DenoiserParams {
        width,
        height,
        k,
        t_steps,
        hidden,
        head_w,
        head_b,
        tails,
    })
}

/// All-zero weights: every softmax block comes out uniform.
pub fn zero_params(
    width: usize,
    height: usize,
    k: usize,
    t_steps: usize,
    hidden: usize,
) -> Result<DenoiserParams> {
    let mut p = init_params_with(width, height, k, t_steps, hidden, 0)?;
    p.head_w.iter_mut().for_each(|w| *w = 0.0);
    for tail in &mut p.tails {
        tail.w1.iter_mut().for_each(|w| *w = 0.0);
        tail.w2.iter_mut().for_each(|w| *w = 0.0);
    }
    Ok(p)
}

/// Per-pixel logits for `x_{t-1}` given `x_t`, as `width·height` blocks of
/// `k` values.
pub fn forward_logits(p: &DenoiserParams, x_t: &CategoricalImage, t: usize) -> Result<Vec<f64>> {
    if x_t.width() != p.width || x_t.height() != p.height || x_t.k() != p.k {
        return Err(Error::Shape("image does not match model dimensions".into()));
    }
    if t < 1 || t > p.t_steps {
        return Err(Error::Parameter(format!("t={t} outside 1..={}", p.t_steps)));
    }
    let hidden = p.hidden;
    let n_in = p.input_width();
    let mut h = vec![0.0; hidden];
    p.head_forward(x_t.levels(), &mut h);
    relu_inplace(&mut h);

    let tail = &p.tails[t - 1];
    let mut h1 = vec![0.0; hidden];
    for (j, out) in h1.iter_mut().enumerate() {
        *out = tail.b1[j] + dot(&tail.w1[j * hidden..(j + 1) * hidden], &h);
    }
    relu_inplace(&mut h1);
    let mut logits = vec![0.0; n_in];
    for (j, out) in logits.iter_mut().enumerate() {
        *out = tail.b2[j] + dot(&tail.w2[j * hidden..(j + 1) * hidden], &h1);
    }
    Ok(logits)
}

/// One supervised pair for the cross-entropy objective.
#[derive(Debug, Clone, Copy)]
pub struct TrainingExample<'a> {
    pub x_t: &'a CategoricalImage,
    pub x_prev: &'a CategoricalImage,
    pub t: usize,
}

/// One pair for the posterior-KL objective.
#[derive(Debug, Clone, Copy)]
pub struct PosteriorExample<'a> {
    pub x_t: &'a CategoricalImage,
    pub x_0: &'a CategoricalImage,
    pub t: usize,
}

/// Gradients matching [`DenoiserParams`]; tails untouched by the batch are
/// `None`.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub head_w: Vec<f64>,
    pub head_b: Vec<f64>,
    pub tails: Vec<Option<Tail>>,
}

/// Mean cross-entropy over batch and pixels of `-ln softmax(logits)[target]`
/// plus reverse-mode gradients through the tails and shared head.
pub fn ce_loss_and_grads(
    p: &DenoiserParams,
    batch: &[TrainingExample],
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::Parameter("empty batch".into()));
    }
    loss_and_grads(p, batch.len(), |i| {
        let ex = &batch[i];
        (ex.x_t, ex.t, Target::Level(ex.x_prev.levels()))
    }, None)
}

/// Mean per-pixel KL between the closed-form posterior and the model's
/// softmax.
pub fn posterior_kl_loss(
    p: &DenoiserParams,
    batch: &[PosteriorExample],
    sched: &QSchedule,
) -> Result<f64> {
    let (loss, _) = posterior_kl_loss_and_grads(p, batch, sched)?;
    Ok(loss)
}

/// Posterior-KL loss with gradients (the training path for that objective).
pub fn posterior_kl_loss_and_grads(
    p: &DenoiserParams,
    batch: &[PosteriorExample],
    sched: &QSchedule,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::Parameter("empty batch".into()));
    }
    if sched.k() != p.k || sched.t_steps() < p.t_steps {
        return Err(Error::Shape("schedule does not match model".into()));
    }
    loss_and_grads(p, batch.len(), |i| {
        let ex = &batch[i];
        (ex.x_t, ex.t, Target::Posterior(ex.x_0.levels()))
    }, Some(sched))
}

enum Target<'a> {
    /// Hard labels: levels of `x_{t-1}`.
    Level(&'a [u8]),
    /// Soft labels: closed-form posterior given the levels of `x_0`.
    Posterior(&'a [u8]),
}

// Shared plain-path implementation: forward, per-pixel softmax loss, and
// materialized gradients. Used by the public loss operations and as the
// reference the fused trainer is checked against.
fn loss_and_grads<'a>(
    p: &DenoiserParams,
    batch_len: usize,
    item: impl Fn(usize) -> (&'a CategoricalImage, usize, Target<'a>),
    sched: Option<&QSchedule>,
) -> Result<(f64, Gradients)> {
    let hidden = p.hidden;
    let n_in = p.input_width();
    let n_pixels = p.width * p.height;
    let scale = 1.0 / (batch_len as f64 * n_pixels as f64);

    let mut grads = Gradients {
        head_w: vec![0.0; p.head_w.len()],
        head_b: vec![0.0; p.head_b.len()],
        tails: (0..p.t_steps).map(|_| None).collect(),
    };
    let mut total_loss = 0.0;

    for i in 0..batch_len {
        let (x_t, t, target) = item(i);
        if x_t.width() != p.width || x_t.height() != p.height || x_t.k() != p.k {
            return Err(Error::Shape("image does not match model dimensions".into()));
        }
        if t < 1 || t > p.t_steps {
            return Err(Error::Parameter(format!("t={t} outside 1..={}", p.t_steps)));
        }

        // Forward.
        let mut h_pre = vec![0.0; hidden];
        p.head_forward(x_t.levels(), &mut h_pre);
        let mut h = h_pre.clone();
        relu_inplace(&mut h);
        let tail = &p.tails[t - 1];
        let mut h1_pre = vec![0.0; hidden];
        for (j, out) in h1_pre.iter_mut().enumerate() {
            *out = tail.b1[j] + dot(&tail.w1[j * hidden..(j + 1) * hidden], &h);
        }
        let mut h1 = h1_pre.clone();
        relu_inplace(&mut h1);
        let mut logits = vec![0.0; n_in];
        for (j, out) in logits.iter_mut().enumerate() {
            *out = tail.b2[j] + dot(&tail.w2[j * hidden..(j + 1) * hidden], &h1);
        }

        // Per-pixel softmax and dlogits.
        let mut d_logits = vec![0.0; n_in];
        for px in 0..n_pixels {
            let block = &logits[px * p.k..(px + 1) * p.k];
            let (probs, lse) = softmax_block(block);
            match &target {
                Target::Level(levels) => {
                    let y = levels[px] as usize;
                    total_loss += scale * (lse - block[y]);
                    for v in 0..p.k {
                        d_logits[px * p.k + v] =
                            scale * (probs[v] - f64::from(v == y));
                    }
                }
                Target::Posterior(x0_levels) => {
                    let sched = sched.expect("posterior objective needs a schedule");
                    let q = posterior(x_t.levels()[px] as usize, x0_levels[px] as usize, t, sched)?;
                    for v in 0..p.k {
                        if q[v] > 0.0 {
                            total_loss += scale * q[v] * (q[v].ln() - (block[v] - lse));
                        }
                        d_logits[px * p.k + v] = scale * (probs[v] - q[v]);
                    }
                }
            }
        }

        // Backward through the tail.
        let tg = grads.tails[t - 1].get_or_insert_with(|| Tail {
            w1: vec![0.0; hidden * hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; n_in * hidden],
            b2: vec![0.0; n_in],
        });
        let mut d_h1 = vec![0.0; hidden];
        for j in 0..n_in {
            let d = d_logits[j];
            tg.b2[j] += d;
            axpy(&mut tg.w2[j * hidden..(j + 1) * hidden], d, &h1);
            axpy(&mut d_h1, d, &tail.w2[j * hidden..(j + 1) * hidden]);
        }
        relu_backward(&mut d_h1, &h1_pre);
        let mut d_h = vec![0.0; hidden];
        for j in 0..hidden {
            let d = d_h1[j];
            if d != 0.0 {
                tg.b1[j] += d;
                axpy(&mut tg.w1[j * hidden..(j + 1) * hidden], d, &h);
                axpy(&mut d_h, d, &tail.w1[j * hidden..(j + 1) * hidden]);
            }
        }

        // Backward through the shared head (one-hot scatter).
        relu_backward(&mut d_h, &h_pre);
        add_assign(&mut grads.head_b, &d_h);
        for (px, &lvl) in x_t.levels().iter().enumerate() {
            let row = px * p.k + lvl as usize;
            axpy(
                &mut grads.head_w[row * hidden..(row + 1) * hidden],
                1.0,
                &d_h,
            );
        }
    }
    Ok((total_loss, grads))
}

/// Adam state: first/second moments per tensor plus per-group step counters
/// (a tail's counter only advances when the tail receives gradient).
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub lr: f64,
    head_m_w: Vec<f64>,
    head_v_w: Vec<f64>,
    head_m_b: Vec<f64>,
    head_v_b: Vec<f64>,
    head_step: u64,
    tails: Vec<TailMoments>,
}

#[derive(Debug, Clone)]
struct TailMoments {
    m_w1: Vec<f64>,
    v_w1: Vec<f64>,
    m_b1: Vec<f64>,
    v_b1: Vec<f64>,
    m_w2: Vec<f64>,
    v_w2: Vec<f64>,
    m_b2: Vec<f64>,
    v_b2: Vec<f64>,
    step: u64,
}

impl OptimizerState {
    pub fn new(p: &DenoiserParams, lr: f64) -> Self {
        Self {
            lr,
            head_m_w: vec![0.0; p.head_w.len()],
            head_v_w: vec![0.0; p.head_w.len()],
            head_m_b: vec![0.0; p.head_b.len()],
            head_v_b: vec![0.0; p.head_b.len()],
            head_step: 0,
            tails: p
                .tails
                .iter()
                .map(|t| TailMoments {
                    m_w1: vec![0.0; t.w1.len()],
                    v_w1: vec![0.0; t.w1.len()],
                    m_b1: vec![0.0; t.b1.len()],
                    v_b1: vec![0.0; t.b1.len()],
                    m_w2: vec![0.0; t.w2.len()],
                    v_w2: vec![0.0; t.w2.len()],
                    m_b2: vec![0.0; t.b2.len()],
                    v_b2: vec![0.0; t.b2.len()],
                    step: 0,
                })
                .collect(),
        }
    }
}

// Standard bias-corrected Adam update of one tensor.
fn adam_tensor(p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], step: u64, lr: f64) {
    let inv_bc1 = 1.0 / (1.0 - BETA1.powi(step as i32));
    let inv_bc2 = 1.0 / (1.0 - BETA2.powi(step as i32));
    for (((pi, gi), mi), vi) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
        *mi = BETA1 * *mi + (1.0 - BETA1) * *gi;
        *vi = BETA2 * *vi + (1.0 - BETA2) * *gi * *gi;
        let m_hat = *mi * inv_bc1;
        let v_hat = *vi * inv_bc2;
        *pi -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
}

/// Apply one bias-corrected Adam step to every tensor present in `grads`.
pub fn adam_step(
    p: &mut DenoiserParams,
    grads: &Gradients,
    state: &mut OptimizerState,
) -> Result<()> {
    if grads.head_w.len() != p.head_w.len() || grads.tails.len() != p.tails.len() {
        return Err(Error::Shape("gradients do not match parameters".into()));
    }
    state.head_step += 1;
    adam_tensor(
        &mut p.head_w,
        &grads.head_w,
        &mut state.head_m_w,
        &mut state.head_v_w,
        state.head_step,
        state.lr,
    );
    adam_tensor(
        &mut p.head_b,
        &grads.head_b,
        &mut state.head_m_b,
        &mut state.head_v_b,
        state.head_step,
        state.lr,
    );
    for (idx, tg) in grads.tails.iter().enumerate() {
        let Some(tg) = tg else { continue };
        let tail = &mut p.tails[idx];
        if tg.w1.len() != tail.w1.len() || tg.w2.len() != tail.w2.len() {
            return Err(Error::Shape(format!("tail {idx} gradient shape mismatch")));
        }
        let mom = &mut state.tails[idx];
        mom.step += 1;
        adam_tensor(&mut tail.w1, &tg.w1, &mut mom.m_w1, &mut mom.v_w1, mom.step, state.lr);
        adam_tensor(&mut tail.b1, &tg.b1, &mut mom.m_b1, &mut mom.v_b1, mom.step, state.lr);
        adam_tensor(&mut tail.w2, &tg.w2, &mut mom.m_w2, &mut mom.v_w2, mom.step, state.lr);
        adam_tensor(&mut tail.b2, &tg.b2, &mut mom.m_b2, &mut mom.v_b2, mom.step, state.lr);
    }
    Ok(())
}

/// Training objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Objective {
    /// Cross-entropy on `(x_t → x_{t-1})` pairs.
    #[default]
    CrossEntropy,
    /// KL from the closed-form posterior to the model softmax.
    PosteriorKl,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub objective: Objective,
    pub hidden: usize,
    /// Redraw the forward trajectories from their `x_0` images every epoch
    /// instead of training on the precomputed set (needs the schedule).
    pub resample_each_epoch: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 16,
            lr: 1e-3,
            objective: Objective::CrossEntropy,
            hidden: DEFAULT_HIDDEN,
            resample_each_epoch: false,
            seed: 0,
        }
    }
}

/// Train on forward trajectories: each epoch draws one uniform `t ∈ 1..=T`
/// per trajectory, shuffles, and runs Adam over minibatches. Returns the
/// final parameters and the per-epoch mean loss.
///
/// `sched` is required for the posterior-KL objective and ignored otherwise.
pub fn train(
    trajectories: &[Trajectory],
    cfg: &TrainConfig,
    sched: Option<&QSchedule>,
) -> Result<(DenoiserParams, Vec<f64>)> {
    let first = trajectories
        .first()
        .ok_or_else(|| Error::Parameter("empty training set".into()))?;
    if cfg.epochs == 0 || cfg.batch_size == 0 || cfg.lr <= 0.0 || cfg.hidden == 0 {
        return Err(Error::Parameter("training config fields must be positive".into()));
    }
    if (cfg.objective == Objective::PosteriorKl || cfg.resample_each_epoch) && sched.is_none() {
        return Err(Error::Parameter(
            "posterior-kl objective and per-epoch resampling need the forward schedule".into(),
        ));
    }
    let x0 = first.step(0);
    let (w, h, k, t_steps) = (x0.width(), x0.height(), x0.k(), first.t_steps());
    if trajectories.iter().any(|tr| tr.t_steps() != t_steps) {
        return Err(Error::Shape("trajectories differ in step count".into()));
    }

    let mut params = init_params_with(w, h, k, t_steps, cfg.hidden, cfg.seed)?;
    let mut state = OptimizerState::new(&params, cfg.lr);
    let mut ws = TrainWorkspace::new(&params, cfg.batch_size);
    let mut rng = seeded(derive_seed(cfg.seed, &[tag("train")]));
    let n = trajectories.len();
    let mut curve = Vec::with_capacity(cfg.epochs);

    let x0s: Vec<CategoricalImage> = trajectories.iter().map(|tr| tr.step(0).clone()).collect();
    let mut resampled: Vec<Trajectory>;
    let mut pool: Vec<(usize, usize)> = Vec::with_capacity(n);
    for epoch in 0..cfg.epochs {
        let active: &[Trajectory] = if cfg.resample_each_epoch {
            let sched = sched.expect("checked above");
            let epoch_seed = derive_seed(cfg.seed, &[tag("resample"), epoch as u64]);
            resampled = crate::diffusion::forward_sample_dataset(&x0s, sched, epoch_seed)?;
            &resampled
        } else {
            trajectories
        };
        pool.clear();
        for i in 0..n {
            pool.push((i, rng.gen_range(1..=t_steps)));
        }
        // Fisher-Yates shuffle.
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            pool.swap(i, j);
        }
        let mut loss_sum = 0.0;
        for chunk in pool.chunks(cfg.batch_size) {
            let loss = train_step(&mut params, &mut state, &mut ws, active, chunk, cfg, sched)?;
            loss_sum += loss * chunk.len() as f64;
        }
        curve.push(loss_sum / n as f64);
    }
    Ok((params, curve))
}

// Reusable buffers for the fused training step.
struct TrainWorkspace {
    h_pre: Vec<f64>,   // B × hidden
    h: Vec<f64>,       // B × hidden
    h1_pre: Vec<f64>,  // B × hidden (per group, indexed by batch slot)
    h1: Vec<f64>,      // B × hidden
    d_logits: Vec<f64>, // B × n_in
    d_h1: Vec<f64>,    // B × hidden
    d_h: Vec<f64>,     // B × hidden
    grad_row: Vec<f64>, // max(hidden) scratch
    bias_grad: Vec<f64>, // n_in scratch
    head_gw: Vec<f64>,
    head_gb: Vec<f64>,
}

impl TrainWorkspace {
    fn new(p: &DenoiserParams, batch: usize) -> Self {
        let hidden = p.hidden;
        let n_in = p.input_width();
        Self {
            h_pre: vec![0.0; batch * hidden],
            h: vec![0.0; batch * hidden],
            h1_pre: vec![0.0; batch * hidden],
            h1: vec![0.0; batch * hidden],
            d_logits: vec![0.0; batch * n_in],
            d_h1: vec![0.0; batch * hidden],
            d_h: vec![0.0; batch * hidden],
            grad_row: vec![0.0; hidden],
            bias_grad: vec![0.0; n_in.max(hidden)],
            head_gw: vec![0.0; p.head_w.len()],
            head_gb: vec![0.0; p.head_b.len()],
        }
    }
}

// One fused minibatch step: forward, per-tail backward with in-place Adam
// row updates, then the shared-head update. Group processing order is
// ascending in t, so the result is deterministic.
#[allow(clippy::too_many_arguments)]
fn train_step(
    params: &mut DenoiserParams,
    state: &mut OptimizerState,
    ws: &mut TrainWorkspace,
    trajectories: &[Trajectory],
    chunk: &[(usize, usize)],
    cfg: &TrainConfig,
    sched: Option<&QSchedule>,
) -> Result<f64> {
    let hidden = params.hidden;
    let n_in = params.input_width();
    let n_pixels = params.width * params.height;
    let k = params.k;
    let b_len = chunk.len();
    let scale = 1.0 / (b_len as f64 * n_pixels as f64);
    let mut loss = 0.0;
    // Shared head forward for the whole batch.
    for (slot, &(img_idx, t)) in chunk.iter().enumerate() {
        let x_t = trajectories[img_idx].step(t);
        let h_pre = &mut ws.h_pre[slot * hidden..(slot + 1) * hidden];
        params.head_forward(x_t.levels(), h_pre);
        let h = &mut ws.h[slot * hidden..(slot + 1) * hidden];
        h.copy_from_slice(h_pre);
        relu_inplace(h);
    }
    ws.d_h[..b_len * hidden].iter_mut().for_each(|x| *x = 0.0);

    // Group batch slots by t, ascending.
    let mut slots_by_t: Vec<Vec<usize>> = vec![Vec::new(); params.t_steps + 1];
    for (slot, &(_, t)) in chunk.iter().enumerate() {
        slots_by_t[t].push(slot);
    }

    for t in 1..=params.t_steps {
        if slots_by_t[t].is_empty() {
            continue;
        }
        let slots = &slots_by_t[t];
        let tail = &mut params.tails[t - 1];
        let mom = &mut state.tails[t - 1];
        mom.step += 1;
        let inv_bc1 = 1.0 / (1.0 - BETA1.powi(mom.step as i32));
        let inv_bc2 = 1.0 / (1.0 - BETA2.powi(mom.step as i32));

        // Tail forward: h1 = relu(W1 h + b1), streamed by W1 row.
        for j in 0..hidden {
            let row = &tail.w1[j * hidden..(j + 1) * hidden];
            for &s in slots {
                let pre = tail.b1[j] + dot(row, &ws.h[s * hidden..(s + 1) * hidden]);
                ws.h1_pre[s * hidden + j] = pre;
                ws.h1[s * hidden + j] = pre.max(0.0);
            }
        }

        // Logits, loss, and dlogits per pixel.
        for &s in slots {
            let (img_idx, _) = chunk[s];
            let x_t = trajectories[img_idx].step(t);
            let h1 = &ws.h1[s * hidden..(s + 1) * hidden];
            let d_logits = &mut ws.d_logits[s * n_in..(s + 1) * n_in];
            for j in 0..n_in {
                d_logits[j] = tail.b2[j] + dot(&tail.w2[j * hidden..(j + 1) * hidden], h1);
            }
            // Per-pixel softmax turns logits into dlogits in place.
            for px in 0..n_pixels {
                let block = &mut d_logits[px * k..(px + 1) * k];
                let (probs, lse) = softmax_block(block);
                match cfg.objective {
                    Objective::CrossEntropy => {
                        let y = trajectories[img_idx].step(t - 1).levels()[px] as usize;
                        loss += scale * (lse - block[y]);
                        for v in 0..k {
                            block[v] = scale * (probs[v] - f64::from(v == y));
                        }
                    }
                    Objective::PosteriorKl => {
                        let sched = sched.expect("checked in train");
                        let x0 = trajectories[img_idx].step(0).levels()[px] as usize;
                        let xt = x_t.levels()[px] as usize;
                        let q = posterior(xt, x0, t, sched)?;
                        for v in 0..k {
                            if q[v] > 0.0 {
                                loss += scale * q[v] * (q[v].ln() - (block[v] - lse));
                            }
                            block[v] = scale * (probs[v] - q[v]);
                        }
                    }
                }
            }
        }

        // Fused W2 backward + Adam: one pass over the rows computes the
        // gradient row, accumulates d_h1, and updates the row in place
        // (the old row value is read before the update).
        for s in slots {
            ws.d_h1[s * hidden..(s + 1) * hidden]
                .iter_mut()
                .for_each(|x| *x = 0.0);
        }
        for j in 0..n_in {
            let row = &mut tail.w2[j * hidden..(j + 1) * hidden];
            ws.grad_row[..hidden].iter_mut().for_each(|x| *x = 0.0);
            let mut gb = 0.0;
            for &s in slots {
                let d = ws.d_logits[s * n_in + j];
                gb += d;
                axpy(&mut ws.grad_row[..hidden], d, &ws.h1[s * hidden..(s + 1) * hidden]);
                axpy(&mut ws.d_h1[s * hidden..(s + 1) * hidden], d, row);
            }
            ws.bias_grad[j] = gb;
            adam_row(
                row,
                &ws.grad_row[..hidden],
                &mut mom.m_w2[j * hidden..(j + 1) * hidden],
                &mut mom.v_w2[j * hidden..(j + 1) * hidden],
                inv_bc1,
                inv_bc2,
                cfg.lr,
            );
        }
        adam_row(
            &mut tail.b2,
            &ws.bias_grad[..n_in],
            &mut mom.m_b2,
            &mut mom.v_b2,
            inv_bc1,
            inv_bc2,
            cfg.lr,
        );

        // ReLU gate on d_h1, then the same fused pass for W1.
        for &s in slots {
            let d = &mut ws.d_h1[s * hidden..(s + 1) * hidden];
            let pre = &ws.h1_pre[s * hidden..(s + 1) * hidden];
            relu_backward(d, pre);
        }
        for j in 0..hidden {
            let row = &mut tail.w1[j * hidden..(j + 1) * hidden];
            ws.grad_row[..hidden].iter_mut().for_each(|x| *x = 0.0);
            let mut gb = 0.0;
            for &s in slots {
                let d = ws.d_h1[s * hidden + j];
                if d != 0.0 {
                    gb += d;
                    axpy(&mut ws.grad_row[..hidden], d, &ws.h[s * hidden..(s + 1) * hidden]);
                    axpy(&mut ws.d_h[s * hidden..(s + 1) * hidden], d, row);
                }
            }
            ws.bias_grad[j] = gb;
            adam_row(
                row,
                &ws.grad_row[..hidden],
                &mut mom.m_w1[j * hidden..(j + 1) * hidden],
                &mut mom.v_w1[j * hidden..(j + 1) * hidden],
                inv_bc1,
                inv_bc2,
                cfg.lr,
            );
        }
        adam_row(
            &mut tail.b1,
            &ws.bias_grad[..hidden],
            &mut mom.m_b1,
            &mut mom.v_b1,
            inv_bc1,
            inv_bc2,
            cfg.lr,
        );
    }

    // Shared-head gradients from every group, then one Adam step.
    ws.head_gw.iter_mut().for_each(|x| *x = 0.0);
    ws.head_gb.iter_mut().for_each(|x| *x = 0.0);
    for (slot, &(img_idx, t)) in chunk.iter().enumerate() {
        let d_h = &mut ws.d_h[slot * hidden..(slot + 1) * hidden];
        let h_pre = &ws.h_pre[slot * hidden..(slot + 1) * hidden];
        relu_backward(d_h, h_pre);
        add_assign(&mut ws.head_gb, d_h);
        let x_t = trajectories[img_idx].step(t);
        for (px, &lvl) in x_t.levels().iter().enumerate() {
            let row = px * k + lvl as usize;
            axpy(&mut ws.head_gw[row * hidden..(row + 1) * hidden], 1.0, d_h);
        }
    }
    state.head_step += 1;
    let inv_bc1 = 1.0 / (1.0 - BETA1.powi(state.head_step as i32));
    let inv_bc2 = 1.0 / (1.0 - BETA2.powi(state.head_step as i32));
    adam_row(
        &mut params.head_w,
        &ws.head_gw,
        &mut state.head_m_w,
        &mut state.head_v_w,
        inv_bc1,
        inv_bc2,
        cfg.lr,
    );
    adam_row(
        &mut params.head_b,
        &ws.head_gb,
        &mut state.head_m_b,
        &mut state.head_v_b,
        inv_bc1,
        inv_bc2,
        cfg.lr,
    );
    Ok(loss)
}

#[inline]
fn adam_row(
    p: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    inv_bc1: f64,
    inv_bc2: f64,
    lr: f64,
) {
    for (((pi, gi), mi), vi) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
        *mi = BETA1 * *mi + (1.0 - BETA1) * *gi;
        *vi = BETA2 * *vi + (1.0 - BETA2) * *gi * *gi;
        *pi -= lr * (*mi * inv_bc1) / ((*vi * inv_bc2).sqrt() + EPSILON);
    }
}

/// Ancestral sampling: start each pixel uniform over `0..k` at `t = T`, then
/// sample `x_{t-1}` from the model softmax down to `x_0`.
pub fn generate(p: &DenoiserParams, count: usize, seed: u64) -> Result<Vec<CategoricalImage>> {
    let n_pixels = p.width * p.height;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = seeded(derive_seed(seed, &[tag("generate"), i as u64]));
        let mut levels: Vec<u8> = (0..n_pixels)
            .map(|_| rng.gen_range(0..p.k) as u8)
            .collect();
        for t in (1..=p.t_steps).rev() {
            let img = CategoricalImage::new(p.width, p.height, p.k, levels.clone())?;
            let logits = forward_logits(p, &img, t)?;
            for px in 0..n_pixels {
                let block = &logits[px * p.k..(px + 1) * p.k];
                let (probs, _) = softmax_block(block);
                levels[px] = sample_categorical(&mut rng, &probs) as u8;
            }
        }
        out.push(CategoricalImage::new(p.width, p.height, p.k, levels)?);
    }
    Ok(out)
}

/// Feature hook for the Fréchet proxy: shared-head activations of `x_0`.
pub struct HeadFeatures<'a> {
    pub params: &'a DenoiserParams,
}

impl FeatureExtractor for HeadFeatures<'_> {
    fn features(&self, images: &[CategoricalImage]) -> Result<FeatureMatrix> {
        let p = self.params;
        let mut rows = Vec::with_capacity(images.len());
        for img in images {
            if img.width() != p.width || img.height() != p.height || img.k() != p.k {
                return Err(Error::Shape("image does not match model dimensions".into()));
            }
            let mut h = vec![0.0; p.hidden];
            p.head_forward(img.levels(), &mut h);
            relu_inplace(&mut h);
            rows.push(h);
        }
        FeatureMatrix::from_rows(rows)
    }
}

// ---------------------------------------------------------------------------
// Checkpoint format: magic "QDNP", version u32 = 1, then little-endian u32
// dims width, height, k, t_steps, hidden, then little-endian f64 tensors in
// order: head_w, head_b, then per tail (w1, b1, w2, b2).
// ---------------------------------------------------------------------------

const CHECKPOINT_MAGIC: &[u8; 4] = b"QDNP";
const CHECKPOINT_VERSION: u32 = 1;

pub fn checkpoint_to_bytes(p: &DenoiserParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(28 + p.n_parameters() * 8);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for v in [p.width, p.height, p.k, p.t_steps, p.hidden] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    let mut push = |xs: &[f64]| {
        for x in xs {
            out.extend_from_slice(&x.to_le_bytes());
        }
    };
    push(&p.head_w);
    push(&p.head_b);
    for tail in &p.tails {
        push(&tail.w1);
        push(&tail.b1);
        push(&tail.w2);
        push(&tail.b2);
    }
    out
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<DenoiserParams> {
    if bytes.len() < 28 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::Format("missing QDNP checkpoint header".into()));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    if u32_at(4) != CHECKPOINT_VERSION as usize {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {}",
            u32_at(4)
        )));
    }
    let (width, height, k, t_steps, hidden) =
        (u32_at(8), u32_at(12), u32_at(16), u32_at(20), u32_at(24));
    let n_in = width * height * k;
    let n_params = n_in * hidden
        + hidden
        + t_steps * (hidden * hidden + hidden + n_in * hidden + n_in);
    let expected = 28 + n_params * 8;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "checkpoint payload {} bytes, expected {expected}",
            bytes.len()
        )));
    }
    let mut offset = 28;
    let mut take = |len: usize| -> Vec<f64> {
        let mut v = Vec::with_capacity(len);
        for _ in 0..len {
            v.push(f64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap()));
            offset += 8;
        }
        v
    };
    let head_w = take(n_in * hidden);
    let head_b = take(hidden);
    let tails = (0..t_steps)
        .map(|_| Tail {
            w1: take(hidden * hidden),
            b1: take(hidden),
            w2: take(n_in * hidden),
            b2: take(n_in),
        })
        .collect();
    Ok(DenoiserParams {
        width,
        height,
        k,
        t_steps,
        hidden,
        head_w,
        head_b,
        tails,
    })
}

// --- small numeric kernels -------------------------------------------------

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * *xi;
    }
}

#[inline]
fn add_assign(y: &mut [f64], x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += *xi;
    }
}

#[inline]
fn relu_inplace(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

#[inline]
fn relu_backward(d: &mut [f64], pre: &[f64]) {
    for (di, pi) in d.iter_mut().zip(pre) {
        if *pi <= 0.0 {
            *di = 0.0;
        }
    }
}

// Stable per-block softmax; returns the probabilities and the log-sum-exp.
fn softmax_block(block: &[f64]) -> (Vec<f64>, f64) {
    let max = block.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = block.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= sum);
    (probs, sum.ln() + max)
}
