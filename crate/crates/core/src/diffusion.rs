//! Categorical forward diffusion over images: per-pixel independent walkers
//! driven by per-step transition kernels, cumulative-product algebra, and the
//! closed-form posterior used by the denoising loss.
//!
//! Orientation convention: kernels and schedule matrices are column
//! stochastic; column `j` of `Q_t` is the distribution of `x_t` given
//! `x_{t-1} = j`, and `Q̄_t = Q_t Q̄_{t-1}` gives `q(x_t | x_0)` as column
//! `x_0` of `Q̄_t`.

use ndarray::Array2;

use crate::lindblad::WalkKernel;
use crate::rng::{derive_seed, sample_categorical, seeded};
use crate::{Error, Result};

/// Image with integer pixel levels in `0..k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoricalImage {
    width: usize,
    height: usize,
    k: usize,
    levels: Vec<u8>,
}

impl CategoricalImage {
    pub fn new(width: usize, height: usize, k: usize, levels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || k == 0 || k > 256 {
            return Err(Error::Parameter(format!(
                "bad image shape {width}x{height} k={k}"
            )));
        }
        if levels.len() != width * height {
            return Err(Error::Shape(format!(
                "{} levels for a {width}x{height} image",
                levels.len()
            )));
        }
        if let Some(&bad) = levels.iter().find(|&&l| l as usize >= k) {
            return Err(Error::Parameter(format!("level {bad} out of range 0..{k}")));
        }
        Ok(Self {
            width,
            height,
            k,
            levels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn levels(&self) -> &[u8] {
        &self.levels
    }

    pub fn n_pixels(&self) -> usize {
        self.levels.len()
    }

    /// Histogram of pixel levels, normalized to a distribution.
    pub fn level_distribution(&self) -> Vec<f64> {
        let mut counts = vec![0.0f64; self.k];
        for &l in &self.levels {
            counts[l as usize] += 1.0;
        }
        let n = self.levels.len() as f64;
        counts.iter_mut().for_each(|c| *c /= n);
        counts
    }
}

/// Normalized pixel-level histogram over a set of images.
pub fn level_distribution(images: &[CategoricalImage]) -> Result<Vec<f64>> {
    let k = images
        .first()
        .ok_or_else(|| Error::Parameter("empty image set".into()))?
        .k();
    let mut counts = vec![0.0f64; k];
    let mut total = 0.0f64;
    for img in images {
        if img.k() != k {
            return Err(Error::Shape("mixed k in image set".into()));
        }
        for &l in img.levels() {
            counts[l as usize] += 1.0;
        }
        total += img.n_pixels() as f64;
    }
    counts.iter_mut().for_each(|c| *c /= total);
    Ok(counts)
}

/// Forward chain of one sample: images `x_0 ... x_T`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    steps: Vec<CategoricalImage>,
}

impl Trajectory {
    pub fn new(steps: Vec<CategoricalImage>) -> Result<Self> {
        let first = steps
            .first()
            .ok_or_else(|| Error::Parameter("empty trajectory".into()))?;
        let (w, h, k) = (first.width(), first.height(), first.k());
        if steps
            .iter()
            .any(|s| s.width() != w || s.height() != h || s.k() != k)
        {
            return Err(Error::Shape("trajectory images differ in shape or k".into()));
        }
        Ok(Self { steps })
    }

    /// Number of diffusion steps `T` (the trajectory holds `T + 1` images).
    pub fn t_steps(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn step(&self, t: usize) -> &CategoricalImage {
        &self.steps[t]
    }

    pub fn steps(&self) -> &[CategoricalImage] {
        &self.steps
    }
}

/// Per-step transition matrices `Q_t` and their cumulative products `Q̄_t`,
/// both column stochastic, for `t = 1..=T`.
#[derive(Debug, Clone)]
pub struct QSchedule {
    k: usize,
    q: Vec<Array2<f64>>,
    q_bar: Vec<Array2<f64>>,
}

/// Assemble the schedule from walk kernels, accumulating `Q̄_t` by matrix
/// product.
pub fn q_schedule_from_kernels(kernels: &[WalkKernel]) -> Result<QSchedule> {
    let first = kernels
        .first()
        .ok_or_else(|| Error::Parameter("empty kernel list".into()))?;
    let k = first.k();
    let mut q = Vec::with_capacity(kernels.len());
    let mut q_bar: Vec<Array2<f64>> = Vec::with_capacity(kernels.len());
    for kernel in kernels {
        if kernel.k() != k {
            return Err(Error::Shape(format!(
                "kernel with k={} in a schedule of k={k}",
                kernel.k()
            )));
        }
        let qt = kernel.entries().clone();
        let bar = match q_bar.last() {
            Some(prev) => qt.dot(prev),
            None => qt.clone(),
        };
        q.push(qt);
        q_bar.push(bar);
    }
    Ok(QSchedule { k, q, q_bar })
}

impl QSchedule {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t_steps(&self) -> usize {
        self.q.len()
    }

    /// `Q_t` for `t` in `1..=T`.
    pub fn q(&self, t: usize) -> &Array2<f64> {
        &self.q[t - 1]
    }

    /// `Q̄_t` for `t` in `1..=T`.
    pub fn q_bar(&self, t: usize) -> &Array2<f64> {
        &self.q_bar[t - 1]
    }

    /// `q(x_t = i | x_0 = j)`; `t = 0` is the identity.
    pub fn q_bar_entry(&self, t: usize, i: usize, j: usize) -> f64 {
        if t == 0 {
            f64::from(i == j)
        } else {
            self.q_bar[t - 1][[i, j]]
        }
    }
}

/// Cyclic rotation of a distribution measured from start node 0 onto the
/// actual start level.
pub fn shift_remap(dist: &[f64], start: usize) -> Vec<f64> {
    let k = dist.len();
    let mut out = vec![0.0; k];
    for (i, &p) in dist.iter().enumerate() {
        out[(i + start) % k] = p;
    }
    out
}

/// Sample a forward trajectory: per pixel and per step, draw `x_t` from
/// column `x_{t-1}` of `Q_t`, independently across pixels. Deterministic for
/// a fixed seed.
pub fn forward_sample(x0: &CategoricalImage, sched: &QSchedule, seed: u64) -> Result<Trajectory> {
    if x0.k() != sched.k() {
        return Err(Error::Shape(format!(
            "image k={} vs schedule k={}",
            x0.k(),
            sched.k()
        )));
    }
    let mut rng = seeded(seed);
    let mut steps = Vec::with_capacity(sched.t_steps() + 1);
    steps.push(x0.clone());
    let mut current = x0.levels().to_vec();
    for t in 1..=sched.t_steps() {
        let qt = sched.q(t);
        let mut next = vec![0u8; current.len()];
        for (p, &prev) in current.iter().enumerate() {
            let col: Vec<f64> = (0..sched.k()).map(|i| qt[[i, prev as usize]]).collect();
            next[p] = sample_categorical(&mut rng, &col) as u8;
        }
        steps.push(CategoricalImage::new(
            x0.width(),
            x0.height(),
            x0.k(),
            next.clone(),
        )?);
        current = next;
    }
    Trajectory::new(steps)
}

/// Forward-sample a whole dataset with per-image derived seeds, so results
/// do not depend on scheduling order.
pub fn forward_sample_dataset(
    images: &[CategoricalImage],
    sched: &QSchedule,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    images
        .iter()
        .enumerate()
        .map(|(idx, img)| forward_sample(img, sched, derive_seed(seed, &[idx as u64])))
        .collect()
}

/// Closed-form posterior `q(x_{t-1} | x_t, x_0)` as a length-K probability
/// vector over `x_{t-1}`:
///
/// ```text
/// q(x_{t-1} = m | x_t, x_0) = q(x_t | x_{t-1} = m) q(x_{t-1} = m | x_0) / q(x_t | x_0)
/// ```
pub fn posterior(x_t: usize, x_0: usize, t: usize, sched: &QSchedule) -> Result<Vec<f64>> {
    let k = sched.k();
    if t < 1 || t > sched.t_steps() {
        return Err(Error::Parameter(format!(
            "t={t} outside 1..={}",
            sched.t_steps()
        )));
    }
    if x_t >= k || x_0 >= k {
        return Err(Error::Parameter(format!("levels {x_t}, {x_0} out of 0..{k}")));
    }
    let denom = sched.q_bar_entry(t, x_t, x_0);
    if denom <= 0.0 {
        return Err(Error::DegeneratePosterior { x_t, x_0, t });
    }
    let qt = sched.q(t);
    let mut post = vec![0.0f64; k];
    for (m, out) in post.iter_mut().enumerate() {
        *out = qt[[x_t, m]] * sched.q_bar_entry(t - 1, m, x_0) / denom;
    }
    Ok(post)
}

// ---------------------------------------------------------------------------
// Flat binary trajectory format: header magic "QDT1" then little-endian u32
// fields k, t_steps, width, height, count, followed by per-image per-step
// byte arrays of levels (count × (t_steps + 1) × width·height bytes).
// ---------------------------------------------------------------------------

const TRAJECTORY_MAGIC: &[u8; 4] = b"QDT1";

pub fn trajectories_to_bytes(trajectories: &[Trajectory]) -> Result<Vec<u8>> {
    let first = trajectories
        .first()
        .ok_or_else(|| Error::Parameter("no trajectories to serialize".into()))?;
    let x0 = first.step(0);
    let (w, h, k, t) = (x0.width(), x0.height(), x0.k(), first.t_steps());
    let mut out = Vec::with_capacity(24 + trajectories.len() * (t + 1) * w * h);
    out.extend_from_slice(TRAJECTORY_MAGIC);
    for v in [k, t, w, h, trajectories.len()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for traj in trajectories {
        if traj.t_steps() != t || traj.step(0).width() != w || traj.step(0).height() != h {
            return Err(Error::Shape("trajectories differ in shape".into()));
        }
        for step in traj.steps() {
            out.extend_from_slice(step.levels());
        }
    }
    Ok(out)
}

pub fn trajectories_from_bytes(bytes: &[u8]) -> Result<Vec<Trajectory>> {
    if bytes.len() < 24 || &bytes[..4] != TRAJECTORY_MAGIC {
        return Err(Error::Format("missing QDT1 trajectory header".into()));
    }
    let field = |i: usize| {
        u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize
    };
    let (k, t, w, h, count) = (field(0), field(1), field(2), field(3), field(4));
    let per_image = w * h;
    let expected = 24 + count * (t + 1) * per_image;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "trajectory payload {} bytes, expected {expected}",
            bytes.len()
        )));
    }
    let mut offset = 24;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut steps = Vec::with_capacity(t + 1);
        for _ in 0..=t {
            let levels = bytes[offset..offset + per_image].to_vec();
            offset += per_image;
            steps.push(CategoricalImage::new(w, h, k, levels)?);
        }
        out.push(Trajectory::new(steps)?);
    }
    Ok(out)
}
