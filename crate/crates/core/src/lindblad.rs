//! Quantum stochastic walks on a graph: the GKSL generator interpolating
//! between coherent Hamiltonian evolution and incoherent hopping, integrated
//! with fourth-order Runge-Kutta.
//!
//! The generator acts as
//!
//! ```text
//! L[ρ] = -(1-ω) i [H, ρ] + ω Σ_j (L_j ρ L_j† - ½ {L_j†L_j, ρ})
//! ```
//!
//! with one jump operator per directed edge of the graph. ω = 0 is a purely
//! coherent walk, ω = 1 reproduces a classical master equation on the
//! populations.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::graphs::{transition_matrix, Graph, ProbabilityVector};
use crate::linalg::{anticommutator, commutator, dagger, eigvals_hermitian, hermiticity_residual};
use crate::metrics::kl_divergence;
use crate::{Error, Result};

/// Hermitian, positive-semidefinite, trace-one walker state.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    entries: Array2<C64>,
}

impl DensityMatrix {
    /// `|node⟩⟨node|`.
    pub fn pure_basis_state(dim: usize, node: usize) -> Self {
        let mut entries = Array2::<C64>::zeros((dim, dim));
        entries[[node, node]] = C64::new(1.0, 0.0);
        Self { entries }
    }

    /// Wrap a matrix, validating the density-matrix invariants.
    pub fn from_entries(entries: Array2<C64>) -> Result<Self> {
        let dm = Self { entries };
        dm.validate()?;
        Ok(dm)
    }

    /// Hermitian to 1e-10, trace 1 within 1e-10, minimum eigenvalue ≥ -1e-9.
    pub fn validate(&self) -> Result<()> {
        self.validate_with_eig_floor(-1e-9)
    }

    // RK4 truncation can push eigenvalues a few 1e-9 below zero while the
    // state is accurate to 1e-8, so propagation validates against the looser
    // CPTP tolerance.
    fn validate_with_eig_floor(&self, floor: f64) -> Result<()> {
        if self.entries.nrows() != self.entries.ncols() {
            return Err(Error::Shape("density matrix must be square".into()));
        }
        let herm = hermiticity_residual(&self.entries);
        if herm > 1e-10 {
            return Err(Error::Numerical(format!(
                "density matrix not Hermitian (residual {herm:.3e})"
            )));
        }
        let trace = self.trace();
        if (trace.re - 1.0).abs() > 1e-10 || trace.im.abs() > 1e-10 {
            return Err(Error::Numerical(format!(
                "density matrix trace {trace} should be 1"
            )));
        }
        let min_eig = eigvals_hermitian(&self.entries)?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_eig < floor {
            return Err(Error::Numerical(format!(
                "density matrix has negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn trace(&self) -> C64 {
        self.entries.diag().sum()
    }

    /// tr ρ².
    pub fn purity(&self) -> f64 {
        let sq = self.entries.dot(&self.entries);
        sq.diag().sum().re
    }

    /// Diagonal as a probability vector. Tiny negative populations (RK4
    /// roundoff) are clamped to zero and the mass renormalized; the matrix
    /// itself is left untouched.
    pub fn populations(&self) -> ProbabilityVector {
        let mut p: Vec<f64> = self.entries.diag().iter().map(|z| z.re.max(0.0)).collect();
        let sum: f64 = p.iter().sum();
        for x in p.iter_mut() {
            *x /= sum;
        }
        ProbabilityVector::new(ndarray::Array1::from_vec(p)).expect("clamped populations")
    }
}

/// How jump-operator amplitudes are read off the hop matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AmplitudeConvention {
    /// `L_ij = S_ij |i⟩⟨j|`: the hop probability enters as the amplitude, so
    /// the incoherent rates are `S_ij²`.
    #[default]
    Linear,
    /// `L_ij = √S_ij |i⟩⟨j|`: incoherent rates reproduce the classical hop
    /// probabilities `S_ij` exactly.
    Sqrt,
}

/// Which operator drives the coherent part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HamiltonianKind {
    /// The graph adjacency matrix (the usual transport convention).
    #[default]
    Adjacency,
    /// The graph Laplacian `D - A`.
    Laplacian,
}

/// ω-interpolated generator for a quantum stochastic walk on a graph.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    dim: usize,
    omega: f64,
    hamiltonian: Array2<C64>,
    lindblad_ops: Vec<Array2<C64>>,
    // Σ L†L, precomputed for the anticommutator term.
    dissipator_weight: Array2<C64>,
}

/// Build the generator with the adjacency Hamiltonian.
pub fn build_generator(
    g: &Graph,
    omega: f64,
    convention: AmplitudeConvention,
) -> Result<Liouvillian> {
    build_generator_with(g, omega, convention, HamiltonianKind::Adjacency)
}

/// Build the generator with an explicit Hamiltonian choice.
pub fn build_generator_with(
    g: &Graph,
    omega: f64,
    convention: AmplitudeConvention,
    hamiltonian: HamiltonianKind,
) -> Result<Liouvillian> {
    if !(0.0..=1.0).contains(&omega) {
        return Err(Error::Parameter(format!("omega {omega} outside [0, 1]")));
    }
    let s = transition_matrix(g)?;
    let n = g.n_nodes();

    let mut h = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            h[[i, j]] = C64::new(g.adjacency()[[i, j]] as f64, 0.0);
        }
        if hamiltonian == HamiltonianKind::Laplacian {
            for j in 0..n {
                h[[i, j]] = -h[[i, j]];
            }
            h[[i, i]] = C64::new(g.degrees()[i] as f64, 0.0);
        }
    }

    // One jump operator per directed edge j → i.
    let mut ops = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let sij = s.entries()[[i, j]];
            if sij > 0.0 {
                let amp = match convention {
                    AmplitudeConvention::Linear => sij,
                    AmplitudeConvention::Sqrt => sij.sqrt(),
                };
                let mut op = Array2::<C64>::zeros((n, n));
                op[[i, j]] = C64::new(amp, 0.0);
                ops.push(op);
            }
        }
    }

    let mut dissipator_weight = Array2::<C64>::zeros((n, n));
    for op in &ops {
        dissipator_weight = dissipator_weight + dagger(op).dot(op);
    }

    Ok(Liouvillian {
        dim: n,
        omega,
        hamiltonian: h,
        lindblad_ops: ops,
        dissipator_weight,
    })
}

impl Liouvillian {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn hamiltonian(&self) -> &Array2<C64> {
        &self.hamiltonian
    }

    pub fn lindblad_ops(&self) -> &[Array2<C64>] {
        &self.lindblad_ops
    }

    /// Generator action `L[ρ]`.
    pub fn apply(&self, rho: &Array2<C64>) -> Array2<C64> {
        let mut out = Array2::<C64>::zeros((self.dim, self.dim));
        if self.omega < 1.0 {
            let factor = C64::new(0.0, -(1.0 - self.omega));
            out = out + commutator(&self.hamiltonian, rho).mapv(|z| z * factor);
        }
        if self.omega > 0.0 {
            let mut diss = anticommutator(&self.dissipator_weight, rho).mapv(|z| z * -0.5);
            for op in &self.lindblad_ops {
                diss = diss + op.dot(rho).dot(&dagger(op));
            }
            out = out + diss.mapv(|z| z * self.omega);
        }
        out
    }
}

/// Integrate the master equation over `tau` seconds with classic RK4 and
/// `substeps` internal steps. The state is re-symmetrized and its trace
/// renormalized after every substep.
pub fn propagate(
    l: &Liouvillian,
    rho: &DensityMatrix,
    tau: f64,
    substeps: usize,
) -> Result<DensityMatrix> {
    if tau <= 0.0 {
        return Err(Error::Parameter(format!("tau {tau} must be positive")));
    }
    if substeps == 0 {
        return Err(Error::Parameter("substeps must be positive".into()));
    }
    if rho.dim() != l.dim() {
        return Err(Error::Shape(format!(
            "state dim {} vs generator dim {}",
            rho.dim(),
            l.dim()
        )));
    }
    rho.validate_with_eig_floor(-1e-8)?;

    let dt = tau / substeps as f64;
    let mut state = rho.entries().clone();
    for _ in 0..substeps {
        let k1 = l.apply(&state);
        let k2 = l.apply(&(&state + &k1.mapv(|z| z * (dt / 2.0))));
        let k3 = l.apply(&(&state + &k2.mapv(|z| z * (dt / 2.0))));
        let k4 = l.apply(&(&state + &k3.mapv(|z| z * dt)));
        state = &state
            + &(k1 + k2.mapv(|z| z * 2.0) + k3.mapv(|z| z * 2.0) + k4).mapv(|z| z * (dt / 6.0));
        // Re-symmetrize and renormalize the trace.
        let sym = (&state + &dagger(&state)).mapv(|z| z * 0.5);
        let trace = sym.diag().sum().re;
        state = sym.mapv(|z| z / trace);
    }

    let out = DensityMatrix { entries: state };
    out.validate_with_eig_floor(-1e-8).map_err(|e| {
        Error::Numerical(format!(
            "propagation left an invalid state ({e}); increase substeps"
        ))
    })?;
    Ok(out)
}

/// Per-step categorical transition kernel: column-stochastic, entries ≥ 0,
/// extracted from quantum dynamics.
#[derive(Debug, Clone)]
pub struct WalkKernel {
    entries: Array2<f64>,
    step_index: usize,
}

impl WalkKernel {
    /// Validate column sums (1e-9) and clamp entries in [-1e-12, 0) to zero.
    pub fn new(mut entries: Array2<f64>, step_index: usize) -> Result<Self> {
        let k = entries.nrows();
        if entries.ncols() != k {
            return Err(Error::Shape("kernel must be square".into()));
        }
        for j in 0..k {
            let mut sum = 0.0;
            for i in 0..k {
                let e = entries[[i, j]];
                if e < -1e-12 {
                    return Err(Error::Numerical(format!(
                        "kernel entry ({i}, {j}) = {e:.3e} below -1e-12"
                    )));
                }
                if e < 0.0 {
                    entries[[i, j]] = 0.0;
                }
                sum += entries[[i, j]];
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Numerical(format!(
                    "kernel column {j} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(Self {
            entries,
            step_index,
        })
    }

    pub fn k(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    /// Column `j`: the distribution of the next category given the current
    /// category is `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.entries.column(j).to_vec()
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn with_step(mut self, step_index: usize) -> Self {
        self.step_index = step_index;
        self
    }
}

/// One evolve-measure-collapse transition kernel: column `j` holds the
/// populations of `propagate(|j⟩⟨j|, tau)`.
pub fn step_kernel(l: &Liouvillian, tau: f64, substeps: usize) -> Result<WalkKernel> {
    let n = l.dim();
    let mut entries = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let rho = DensityMatrix::pure_basis_state(n, j);
        let evolved = propagate(l, &rho, tau, substeps)?;
        let pops = evolved.populations();
        for i in 0..n {
            entries[[i, j]] = pops.probs()[i];
        }
    }
    WalkKernel::new(entries, 0)
}

/// KL divergence of the walker populations from uniform after each of
/// `t_steps` continuous evolution steps of length `tau`, starting from
/// `|0⟩⟨0|` on a cycle graph. The state evolves without collapse: entry `t-1`
/// of the result is the divergence after `t` steps.
pub fn kl_trace(
    omega: f64,
    n_nodes: usize,
    t_steps: usize,
    tau: f64,
    substeps: usize,
) -> Result<Vec<f64>> {
    let g = crate::graphs::cycle_graph(n_nodes)?;
    let l = build_generator(&g, omega, AmplitudeConvention::Linear)?;
    let uniform = ProbabilityVector::uniform(n_nodes);
    let mut rho = DensityMatrix::pure_basis_state(n_nodes, 0);
    let mut series = Vec::with_capacity(t_steps);
    for _ in 0..t_steps {
        rho = propagate(&l, &rho, tau, substeps)?;
        let kl = kl_divergence(rho.populations().as_slice(), uniform.as_slice())?;
        series.push(kl.nats);
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::cycle_graph;
    use ndarray::Array2;
    use rand::Rng;

    fn random_density(dim: usize, rng: &mut impl Rng) -> DensityMatrix {
        let mut a = Array2::<C64>::zeros((dim, dim));
        for i in 0..dim {
            for j in 0..dim {
                a[[i, j]] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        let rho = a.dot(&dagger(&a));
        let trace = rho.diag().sum().re;
        DensityMatrix::from_entries(rho.mapv(|z| z / trace)).unwrap()
    }

    #[test]
    fn generator_rejects_bad_omega() {
        let g = cycle_graph(8).unwrap();
        assert!(build_generator(&g, 1.5, AmplitudeConvention::Linear).is_err());
        assert!(build_generator(&g, -0.1, AmplitudeConvention::Linear).is_err());
    }

    #[test]
    fn generator_action_is_traceless() {
        let g = cycle_graph(8).unwrap();
        let mut rng = crate::rng::seeded(3);
        for &omega in &[0.0, 0.3, 0.5, 1.0] {
            let l = build_generator(&g, omega, AmplitudeConvention::Linear).unwrap();
            let rho = random_density(8, &mut rng);
            let drho = l.apply(rho.entries());
            let trace = drho.diag().sum();
            assert!(trace.norm() < 1e-12, "omega {omega}: trace {trace}");
        }
    }

    #[test]
    fn coherent_flow_preserves_purity() {
        // d(tr ρ²)/dt = 2 tr(ρ L[ρ]) vanishes for unitary flow.
        let g = cycle_graph(8).unwrap();
        let l = build_generator(&g, 0.0, AmplitudeConvention::Linear).unwrap();
        let mut rng = crate::rng::seeded(4);
        let rho = random_density(8, &mut rng);
        let drho = l.apply(rho.entries());
        let purity_rate = 2.0 * rho.entries().dot(&drho).diag().sum().re;
        assert!(purity_rate.abs() < 1e-12, "purity rate {purity_rate}");
    }

    // For one-entry jump operators L = s|i⟩⟨j|, expanding LρL† - ½{L†L, ρ}
    // shows the populations obey dp/dt = R p with R_ij = s_ij² off-diagonal
    // and column sums zero.
    #[test]
    fn classical_limit_population_rates() {
        let g = cycle_graph(8).unwrap();
        let l = build_generator(&g, 1.0, AmplitudeConvention::Linear).unwrap();
        let mut rate = Array2::<f64>::zeros((8, 8));
        for i in 0..8 {
            for j in [(i + 1) % 8, (i + 7) % 8] {
                rate[[i, j]] = 0.25;
            }
        }
        for j in 0..8 {
            let col_sum: f64 = (0..8).filter(|&i| i != j).map(|i| rate[[i, j]]).sum();
            rate[[j, j]] = -col_sum;
        }
        let mut rng = crate::rng::seeded(5);
        let rho = random_density(8, &mut rng);
        let drho = l.apply(rho.entries());
        let p: Vec<f64> = rho.entries().diag().iter().map(|z| z.re).collect();
        for i in 0..8 {
            let want: f64 = (0..8).map(|j| rate[[i, j]] * p[j]).sum();
            let got = drho[[i, i]].re;
            assert!((got - want).abs() < 1e-12, "node {i}: {got} vs {want}");
            assert!(drho[[i, i]].im.abs() < 1e-12);
        }
    }

    #[test]
    fn generator_is_convex_combination() {
        let g = cycle_graph(8).unwrap();
        let coherent = build_generator(&g, 0.0, AmplitudeConvention::Linear).unwrap();
        let dissipative = build_generator(&g, 1.0, AmplitudeConvention::Linear).unwrap();
        let mixed = build_generator(&g, 0.5, AmplitudeConvention::Linear).unwrap();
        let mut rng = crate::rng::seeded(6);
        let rho = random_density(8, &mut rng);
        let want = (coherent.apply(rho.entries()) + dissipative.apply(rho.entries()))
            .mapv(|z| z * 0.5);
        let got = mixed.apply(rho.entries());
        let err = (&got - &want).iter().fold(0.0f64, |a, z| a.max(z.norm()));
        assert!(err < 1e-12, "linearity error {err}");
    }

    #[test]
    fn unitary_propagation_keeps_purity() {
        let g = cycle_graph(8).unwrap();
        let l = build_generator(&g, 0.0, AmplitudeConvention::Linear).unwrap();
        let rho = DensityMatrix::pure_basis_state(8, 0);
        let out = propagate(&l, &rho, 2.0, 512).unwrap();
        assert!((out.purity() - 1.0).abs() < 1e-8, "purity {}", out.purity());
    }

    #[test]
    fn classical_propagation_equilibrates_to_uniform() {
        let g = cycle_graph(8).unwrap();
        // Sqrt convention reproduces the classical hop rates (0.5 per edge),
        // relaxing within tau = 50; the linear convention halves every rate,
        // so it gets tau = 120.
        for (conv, tau, substeps) in [
            (AmplitudeConvention::Sqrt, 50.0, 4096),
            (AmplitudeConvention::Linear, 120.0, 8192),
        ] {
            let l = build_generator(&g, 1.0, conv).unwrap();
            let rho = DensityMatrix::pure_basis_state(8, 0);
            let out = propagate(&l, &rho, tau, substeps).unwrap();
            for i in 0..8 {
                assert!((out.populations().probs()[i] - 0.125).abs() < 1e-6);
            }
            for i in 0..8 {
                for j in 0..8 {
                    if i != j {
                        assert!(out.entries()[[i, j]].norm() < 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn propagation_preserves_cptp_invariants() {
        let g = cycle_graph(8).unwrap();
        let mut rng = crate::rng::seeded(7);
        for run in 0..50 {
            let omega = rng.gen_range(0.0..=1.0);
            let l = build_generator(&g, omega, AmplitudeConvention::Linear).unwrap();
            let rho = random_density(8, &mut rng);
            let out = propagate(&l, &rho, 0.6, 64).unwrap();
            let trace = out.trace();
            assert!((trace.re - 1.0).abs() < 1e-10 && trace.im.abs() < 1e-10);
            assert!(hermiticity_residual(out.entries()) < 1e-10);
            let min_eig = eigvals_hermitian(out.entries())
                .unwrap()
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            assert!(min_eig >= -1e-8, "run {run}: min eigenvalue {min_eig}");
        }
    }

    #[test]
    fn propagation_semigroup_property() {
        let g = cycle_graph(8).unwrap();
        let mut rng = crate::rng::seeded(8);
        for &omega in &[0.0, 0.5, 1.0] {
            let l = build_generator(&g, omega, AmplitudeConvention::Linear).unwrap();
            let rho = random_density(8, &mut rng);
            let two_hops = {
                let mid = propagate(&l, &rho, 0.7, 64).unwrap();
                propagate(&l, &mid, 0.5, 64).unwrap()
            };
            let one_hop = propagate(&l, &rho, 1.2, 100).unwrap();
            let err = (one_hop.entries() - two_hops.entries())
                .iter()
                .fold(0.0f64, |a, z| a.max(z.norm()));
            assert!(err < 1e-7, "omega {omega}: semigroup error {err}");
        }
    }

    #[test]
    fn kernel_is_circulant_on_cycle() {
        let g = cycle_graph(8).unwrap();
        for &omega in &[0.0, 0.4, 1.0] {
            let l = build_generator(&g, omega, AmplitudeConvention::Linear).unwrap();
            let k = step_kernel(&l, 0.6, 64).unwrap();
            for i in 0..8 {
                for j in 0..8 {
                    let a = k.entries()[[i, j]];
                    let b = k.entries()[[(i + 1) % 8, (j + 1) % 8]];
                    assert!((a - b).abs() < 1e-10, "omega {omega} at ({i}, {j})");
                }
            }
        }
    }

    #[test]
    fn kernel_columns_are_probability_vectors() {
        let g = cycle_graph(8).unwrap();
        let l = build_generator(&g, 0.3, AmplitudeConvention::Linear).unwrap();
        let k = step_kernel(&l, 0.6, 64).unwrap();
        for j in 0..8 {
            let col = k.column(j);
            let sum: f64 = col.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(col.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn kernel_long_time_columns_uniform() {
        let g = cycle_graph(8).unwrap();
        let l = build_generator(&g, 1.0, AmplitudeConvention::Linear).unwrap();
        let k = step_kernel(&l, 120.0, 8192).unwrap();
        for j in 0..8 {
            for i in 0..8 {
                assert!((k.entries()[[i, j]] - 0.125).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn kernel_short_time_near_identity() {
        let g = cycle_graph(8).unwrap();
        let l = build_generator(&g, 0.5, AmplitudeConvention::Linear).unwrap();
        let tau = 1e-4;
        let k = step_kernel(&l, tau, 4).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let want = if i == j { 1.0 } else { 0.0 };
                // Off-diagonal mass grows like O(tau).
                assert!((k.entries()[[i, j]] - want).abs() < 10.0 * tau);
            }
        }
    }

    #[test]
    fn kl_trace_classical_is_monotone() {
        let series = kl_trace(1.0, 8, 20, 0.6, 64).unwrap();
        assert_eq!(series.len(), 20);
        for w in series.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "rise {} -> {}", w[0], w[1]);
        }
        assert!(series[19] < series[0]);
    }

    #[test]
    fn kl_trace_coherent_oscillates() {
        // 128 substeps: twenty chained coherent steps accumulate eigenvalue
        // drift past the 1e-8 floor at 64.
        let series = kl_trace(0.0, 8, 20, 0.6, 128).unwrap();
        let max_rise = series
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(max_rise > 1e-3, "largest rise {max_rise}");
    }

    #[test]
    fn propagate_rejects_nonpositive_tau() {
        let g = cycle_graph(8).unwrap();
        let l = build_generator(&g, 0.5, AmplitudeConvention::Linear).unwrap();
        let rho = DensityMatrix::pure_basis_state(8, 0);
        assert!(propagate(&l, &rho, 0.0, 8).is_err());
        assert!(propagate(&l, &rho, -1.0, 8).is_err());
    }
}
