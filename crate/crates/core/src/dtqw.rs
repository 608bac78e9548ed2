//! Discrete-time quantum walk on a cycle with a coin qubit, simulated
//! noiselessly on state vectors and noisily on density matrices with
//! delay-scheduled per-qubit damping channels.
//!
//! The register factorization treats the `2n`-dimensional walker space as one
//! coin qubit tensored with `log2(n)` position qubits; damping acts
//! independently per qubit during the delay block of each step.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::graphs::ProbabilityVector;
use crate::linalg::{dagger, kron};
use crate::lindblad::WalkKernel;
use crate::rng::{derive_seed, multinomial_counts, seeded};
use crate::{Error, Result};

/// Coin basis index for "up" (shift +1) and "down" (shift -1).
const COIN_UP: usize = 0;
const COIN_DOWN: usize = 1;

/// Pure coined-walker state: amplitudes indexed by `(coin, node)` as
/// `coin * n + node`, unit L2 norm.
#[derive(Debug, Clone)]
pub struct CoinedState {
    n_nodes: usize,
    amplitudes: Array1<C64>,
}

impl CoinedState {
    pub fn new(n_nodes: usize, amplitudes: Array1<C64>) -> Result<Self> {
        if amplitudes.len() != 2 * n_nodes {
            return Err(Error::Shape(format!(
                "{} amplitudes for {} nodes",
                amplitudes.len(),
                n_nodes
            )));
        }
        let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter(format!("state norm² = {norm}, expected 1")));
        }
        Ok(Self { n_nodes, amplitudes })
    }

    /// Basis state `|coin⟩ ⊗ |node⟩`; coin 0 is "up".
    pub fn basis(n_nodes: usize, coin: usize, node: usize) -> Result<Self> {
        if coin > 1 || node >= n_nodes {
            return Err(Error::Parameter(format!(
                "basis (coin {coin}, node {node}) out of range"
            )));
        }
        let mut amplitudes = Array1::<C64>::zeros(2 * n_nodes);
        amplitudes[coin * n_nodes + node] = C64::new(1.0, 0.0);
        Ok(Self { n_nodes, amplitudes })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amplitudes
    }

    /// |amplitude|² summed over the coin.
    pub fn position_marginal(&self) -> ProbabilityVector {
        let n = self.n_nodes;
        let mut p = vec![0.0f64; n];
        for (i, z) in self.amplitudes.iter().enumerate() {
            p[i % n] += z.norm_sqr();
        }
        let sum: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= sum);
        ProbabilityVector::new(Array1::from_vec(p)).expect("normalized marginal")
    }
}

/// Unbiased coin `(1/√2) [[1, 1], [1, -1]]`.
pub fn hadamard_coin() -> Array2<C64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    ndarray::array![
        [C64::new(h, 0.0), C64::new(h, 0.0)],
        [C64::new(h, 0.0), C64::new(-h, 0.0)]
    ]
}

/// Conditional shift: `|↑, v⟩ → |↑, v+1 mod n⟩`, `|↓, v⟩ → |↓, v-1 mod n⟩`.
pub fn shift_operator(n: usize) -> Result<Array2<C64>> {
    if n < 3 {
        return Err(Error::Parameter(format!("cycle needs n ≥ 3, got {n}")));
    }
    let mut s = Array2::<C64>::zeros((2 * n, 2 * n));
    for v in 0..n {
        s[[COIN_UP * n + (v + 1) % n, COIN_UP * n + v]] = C64::new(1.0, 0.0);
        s[[COIN_DOWN * n + (v + n - 1) % n, COIN_DOWN * n + v]] = C64::new(1.0, 0.0);
    }
    Ok(s)
}

/// One walk step: `U = S · (C ⊗ I)` with the Hadamard coin.
pub fn step_unitary(n: usize) -> Result<Array2<C64>> {
    let coin = kron(&hadamard_coin(), &Array2::<C64>::eye(n));
    Ok(shift_operator(n)?.dot(&coin))
}

/// Position marginal after `t` noiseless steps.
pub fn evolve_pure(psi0: &CoinedState, t: usize) -> Result<ProbabilityVector> {
    let u = step_unitary(psi0.n_nodes())?;
    let mut amps = psi0.amplitudes().clone();
    for _ in 0..t {
        amps = u.dot(&amps);
    }
    CoinedState::new(psi0.n_nodes(), amps).map(|s| s.position_marginal())
}

/// RMS displacement from `origin` under the minimal signed cycle distance.
pub fn cycle_rms_distance(p: &ProbabilityVector, origin: usize) -> f64 {
    let n = p.len();
    let half = (n / 2) as i64;
    let mut acc = 0.0;
    for (v, &prob) in p.as_slice().iter().enumerate() {
        let d = ((v as i64 - origin as i64 + half).rem_euclid(n as i64)) - half;
        acc += prob * (d * d) as f64;
    }
    acc.sqrt()
}

/// Delay-noise schedule for the noisy walk.
#[derive(Debug, Clone)]
pub struct NoiseSchedule {
    /// Sample-count coefficient of the delay curve.
    pub c: f64,
    /// Duration of one hardware sample, seconds.
    pub dt_seconds: f64,
    /// Relaxation time, seconds.
    pub t1_seconds: f64,
    /// Total dephasing time, seconds; at most `2 t1`.
    pub t2_seconds: f64,
    /// Number of walk steps `T`.
    pub total_steps: usize,
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self {
            c: 5e4,
            dt_seconds: 5e-10,
            t1_seconds: 200e-6,
            t2_seconds: 150e-6,
            total_steps: 20,
        }
    }
}

impl NoiseSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.c < 0.0 {
            return Err(Error::Parameter(format!("c = {} must be ≥ 0", self.c)));
        }
        for (name, v) in [
            ("dt", self.dt_seconds),
            ("t1", self.t1_seconds),
            ("t2", self.t2_seconds),
        ] {
            if v <= 0.0 {
                return Err(Error::Parameter(format!("{name} = {v} must be positive")));
            }
        }
        if self.t2_seconds > 2.0 * self.t1_seconds {
            return Err(Error::Parameter(format!(
                "t2 = {} exceeds 2·t1 = {}",
                self.t2_seconds,
                2.0 * self.t1_seconds
            )));
        }
        if self.total_steps < 2 {
            return Err(Error::Parameter("schedule needs at least 2 steps".into()));
        }
        Ok(())
    }
}

/// Idle time inserted at step index `t ∈ [0, T-1]`, in seconds: the sin²
/// curve `c·sin²((π/2) t/(T-1))` in sample counts, floored to a multiple of
/// 8 samples, times the sample duration.
pub fn delay_schedule(t: usize, sched: &NoiseSchedule) -> Result<f64> {
    sched.validate()?;
    if t >= sched.total_steps {
        return Err(Error::Parameter(format!(
            "step index {t} outside 0..{}",
            sched.total_steps
        )));
    }
    let phase = std::f64::consts::FRAC_PI_2 * t as f64 / (sched.total_steps - 1) as f64;
    let raw = sched.c * phase.sin().powi(2);
    let samples = (raw / 8.0).floor() * 8.0;
    Ok(samples * sched.dt_seconds)
}

/// Single-qubit channel given by its Kraus operators.
#[derive(Debug, Clone)]
pub struct Channel {
    kraus_ops: Vec<Array2<C64>>,
}

impl Channel {
    pub fn new(kraus_ops: Vec<Array2<C64>>) -> Result<Self> {
        let ch = Self { kraus_ops };
        let residual = ch.completeness_residual();
        if residual > 1e-12 {
            return Err(Error::Numerical(format!(
                "Kraus completeness violated by {residual:.3e}"
            )));
        }
        Ok(ch)
    }

    pub fn identity() -> Self {
        Self {
            kraus_ops: vec![Array2::eye(2)],
        }
    }

    pub fn kraus_ops(&self) -> &[Array2<C64>] {
        &self.kraus_ops
    }

    /// Max-abs deviation of `Σ K†K` from the identity.
    pub fn completeness_residual(&self) -> f64 {
        let mut sum = Array2::<C64>::zeros((2, 2));
        for k in &self.kraus_ops {
            sum = sum + dagger(k).dot(k);
        }
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                worst = worst.max((sum[[i, j]] - want).norm());
            }
        }
        worst
    }

    /// Apply to a single-qubit density matrix.
    pub fn apply(&self, rho: &Array2<C64>) -> Array2<C64> {
        let mut out = Array2::<C64>::zeros((2, 2));
        for k in &self.kraus_ops {
            out = out + k.dot(rho).dot(&dagger(k));
        }
        out
    }
}

/// Amplitude damping (`γ = 1 - exp(-delay/T1)`) composed with pure dephasing
/// (`λ = 1 - exp(-2·delay·(1/T2 - 1/(2T1)))`), as Kraus operators per qubit.
pub fn damping_channel(delay: f64, sched: &NoiseSchedule) -> Result<Channel> {
    sched.validate()?;
    if delay < 0.0 {
        return Err(Error::Parameter(format!("delay {delay} must be ≥ 0")));
    }
    if delay == 0.0 {
        return Ok(Channel::identity());
    }
    let gamma = 1.0 - (-delay / sched.t1_seconds).exp();
    let dephasing_rate = 1.0 / sched.t2_seconds - 1.0 / (2.0 * sched.t1_seconds);
    let lambda = 1.0 - (-2.0 * delay * dephasing_rate).exp();

    let amp = [
        ndarray::array![
            [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            [C64::new(0.0, 0.0), C64::new((1.0 - gamma).sqrt(), 0.0)]
        ],
        ndarray::array![
            [C64::new(0.0, 0.0), C64::new(gamma.sqrt(), 0.0)],
            [C64::new(0.0, 0.0), C64::new(0.0, 0.0)]
        ],
    ];
    let phase = [
        ndarray::array![
            [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            [C64::new(0.0, 0.0), C64::new((1.0 - lambda).sqrt(), 0.0)]
        ],
        ndarray::array![
            [C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
            [C64::new(0.0, 0.0), C64::new(lambda.sqrt(), 0.0)]
        ],
    ];
    let mut ops = Vec::new();
    for p in &phase {
        for a in &amp {
            let composed = p.dot(a);
            if composed.iter().any(|z| z.norm() > 0.0) {
                ops.push(composed);
            }
        }
    }
    Channel::new(ops)
}

/// Options for the noisy kernel construction.
#[derive(Debug, Clone, Default)]
pub struct NoisyWalkOptions {
    /// Bitmask over qubits receiving the delay channel; bit 0 is the coin,
    /// higher bits are position qubits. `None` applies it to all qubits.
    pub qubit_mask: Option<u32>,
    /// When set, kernel columns are multinomially resampled with this many
    /// shots instead of using exact marginals.
    pub shots: Option<u64>,
    /// Seed for shot resampling.
    pub seed: u64,
}

/// Per-step kernels of the noisy coined walk with default options.
pub fn noisy_walk_kernels(n: usize, sched: &NoiseSchedule) -> Result<Vec<WalkKernel>> {
    noisy_walk_kernels_opts(n, sched, &NoisyWalkOptions::default())
}

/// Per-step kernels of the noisy coined walk.
///
/// The forward chain collapses every pixel to a basis state after sampling,
/// so the kernel for step `t` is the position marginal of ONE noisy step
/// from a fresh `|↑⟩ ⊗ |0⟩` state at the step-`t` noise level; the remaining
/// columns follow by the rotation invariance of the cycle.
pub fn noisy_walk_kernels_opts(
    n: usize,
    sched: &NoiseSchedule,
    opts: &NoisyWalkOptions,
) -> Result<Vec<WalkKernel>> {
    sched.validate()?;
    if n < 4 || !n.is_power_of_two() {
        return Err(Error::Parameter(format!(
            "qubit register needs a power-of-two node count ≥ 4, got {n}"
        )));
    }
    let n_qubits = 1 + n.trailing_zeros() as usize;
    let mask = opts.qubit_mask.unwrap_or((1 << n_qubits) - 1);
    let u = step_unitary(n)?;
    let u_dag = dagger(&u);

    let mut kernels = Vec::with_capacity(sched.total_steps);
    for t in 0..sched.total_steps {
        let delay = delay_schedule(t, sched)?;
        let channel = damping_channel(delay, sched)?;

        // One noisy step from |↑, 0⟩.
        let mut rho = Array2::<C64>::zeros((2 * n, 2 * n));
        rho[[0, 0]] = C64::new(1.0, 0.0);
        rho = u.dot(&rho).dot(&u_dag);
        for q in 0..n_qubits {
            if mask & (1 << q) != 0 {
                rho = apply_channel_on_qubit(&rho, &channel, q, n_qubits);
            }
        }
        let mut marginal = position_populations(&rho, n);

        if let Some(shots) = opts.shots {
            if shots == 0 {
                return Err(Error::Parameter("shots must be positive".into()));
            }
            let mut rng = seeded(derive_seed(opts.seed, &[t as u64]));
            let counts = multinomial_counts(&mut rng, &marginal, shots);
            marginal = counts.iter().map(|&c| c as f64 / shots as f64).collect();
        }

        let mut entries = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            let col = crate::diffusion::shift_remap(&marginal, j);
            for i in 0..n {
                entries[[i, j]] = col[i];
            }
        }
        kernels.push(WalkKernel::new(entries, t + 1)?);
    }
    Ok(kernels)
}

// Embed a single-qubit Kraus map on qubit `q` (0 = most significant = coin)
// of an `n_qubits` register and apply it.
fn apply_channel_on_qubit(
    rho: &Array2<C64>,
    channel: &Channel,
    q: usize,
    n_qubits: usize,
) -> Array2<C64> {
    let left = Array2::<C64>::eye(1 << q);
    let right = Array2::<C64>::eye(1 << (n_qubits - 1 - q));
    let dim = rho.nrows();
    let mut out = Array2::<C64>::zeros((dim, dim));
    for k in channel.kraus_ops() {
        let embedded = kron(&kron(&left, k), &right);
        out = out + embedded.dot(rho).dot(&dagger(&embedded));
    }
    out
}

// Diagonal of the density matrix traced over the coin, clamped at zero and
// renormalized.
fn position_populations(rho: &Array2<C64>, n: usize) -> Vec<f64> {
    let mut p = vec![0.0f64; n];
    for i in 0..2 * n {
        p[i % n] += rho[[i, i]].re.max(0.0);
    }
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= sum);
    p
}
