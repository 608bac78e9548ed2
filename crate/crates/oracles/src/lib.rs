//! Reference implementations used only by test suites. Everything here is
//! derived from scratch so it shares no evolution code with the library it
//! checks: the master-equation propagator is validated against the dense
//! matrix exponential of the vectorized generator, and classical population
//! dynamics against a plain rate-equation integrator.

use ndarray::Array2;
use num_complex::Complex64 as C64;

/// Jump-operator amplitude rule, mirroring the library's two conventions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Amplitude {
    /// Amplitude = hop probability.
    Linear,
    /// Amplitude = √(hop probability).
    Sqrt,
}

/// Cycle-graph walk generator data built from first principles: adjacency
/// Hamiltonian and one jump operator `s |i⟩⟨j|` per directed edge with
/// `s` from the 1/degree hop probability.
pub struct CycleGenerator {
    pub n: usize,
    pub omega: f64,
    pub hamiltonian: Array2<C64>,
    pub jump_ops: Vec<Array2<C64>>,
}

impl CycleGenerator {
    pub fn new(n: usize, omega: f64, amplitude: Amplitude) -> Self {
        let mut h = Array2::<C64>::zeros((n, n));
        for v in 0..n {
            h[[v, (v + 1) % n]] = C64::new(1.0, 0.0);
            h[[v, (v + n - 1) % n]] = C64::new(1.0, 0.0);
        }
        let hop = 0.5f64; // every node of a cycle has degree 2
        let amp = match amplitude {
            Amplitude::Linear => hop,
            Amplitude::Sqrt => hop.sqrt(),
        };
        let mut jump_ops = Vec::new();
        for j in 0..n {
            for i in [(j + 1) % n, (j + n - 1) % n] {
                let mut op = Array2::<C64>::zeros((n, n));
                op[[i, j]] = C64::new(amp, 0.0);
                jump_ops.push(op);
            }
        }
        Self {
            n,
            omega,
            hamiltonian: h,
            jump_ops,
        }
    }

    /// Dense superoperator on column-major vec(ρ):
    /// `-(1-ω) i [(I⊗H) - (Hᵀ⊗I)] + ω Σ [conj(L)⊗L - ½ I⊗(L†L) - ½ (L†L)ᵀ⊗I]`.
    pub fn superoperator(&self) -> Array2<C64> {
        let n = self.n;
        let eye = Array2::<C64>::eye(n);
        let ht = self.hamiltonian.t().to_owned();
        let mut sup = (kron(&eye, &self.hamiltonian) - kron(&ht, &eye))
            .mapv(|z| z * C64::new(0.0, -(1.0 - self.omega)));
        for l in &self.jump_ops {
            let l_conj = l.mapv(|z| z.conj());
            let ldl = dagger(l).dot(l);
            let ldl_t = ldl.t().to_owned();
            let term = kron(&l_conj, l)
                - kron(&eye, &ldl).mapv(|z| z * 0.5)
                - kron(&ldl_t, &eye).mapv(|z| z * 0.5);
            sup = sup + term.mapv(|z| z * self.omega);
        }
        sup
    }

    /// Evolve `rho0` for time `tau` through the superoperator exponential.
    pub fn evolve_expm(&self, rho0: &Array2<C64>, tau: f64) -> Array2<C64> {
        let sup = self.superoperator().mapv(|z| z * tau);
        let propagator = expm(&sup);
        let v = vectorize(rho0);
        let out = propagator.dot(&v);
        unvectorize(&out, self.n)
    }
}

/// Column-major vectorization: `vec(ρ)[i + j·n] = ρ[i, j]`.
pub fn vectorize(m: &Array2<C64>) -> ndarray::Array1<C64> {
    let n = m.nrows();
    let mut v = ndarray::Array1::<C64>::zeros(n * n);
    for j in 0..n {
        for i in 0..n {
            v[i + j * n] = m[[i, j]];
        }
    }
    v
}

pub fn unvectorize(v: &ndarray::Array1<C64>, n: usize) -> Array2<C64> {
    let mut m = Array2::<C64>::zeros((n, n));
    for j in 0..n {
        for i in 0..n {
            m[[i, j]] = v[i + j * n];
        }
    }
    m
}

pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::<C64>::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = a[[i, j]] * b[[k, l]];
                }
            }
        }
    }
    out
}

pub fn dagger(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

fn one_norm(m: &Array2<C64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Dense matrix exponential by Padé(13) with scaling and squaring.
pub fn expm(a: &Array2<C64>) -> Array2<C64> {
    let theta13 = 5.371_920_351_148_152;
    let norm = one_norm(a);
    let squarings = if norm > theta13 {
        (norm / theta13).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a.mapv(|z| z / C64::new(2f64.powi(squarings as i32), 0.0));
    let mut result = pade13(&scaled);
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

fn pade13(a: &Array2<C64>) -> Array2<C64> {
    let b: [f64; 14] = [
        64_764_752_532_480_000.0,
        32_382_376_266_240_000.0,
        7_771_770_303_897_600.0,
        1_187_353_796_428_800.0,
        129_060_195_264_000.0,
        10_559_470_521_600.0,
        670_442_572_800.0,
        33_522_128_640.0,
        1_323_241_920.0,
        40_840_800.0,
        960_960.0,
        16_380.0,
        182.0,
        1.0,
    ];
    let n = a.nrows();
    let eye = Array2::<C64>::eye(n);
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);
    let u_inner = a6.mapv(|z| z * b[13])
        + a4.mapv(|z| z * b[11])
        + a2.mapv(|z| z * b[9]);
    let u = a.dot(
        &(a6.dot(&u_inner)
            + a6.mapv(|z| z * b[7])
            + a4.mapv(|z| z * b[5])
            + a2.mapv(|z| z * b[3])
            + eye.mapv(|z| z * b[1])),
    );
    let v_inner = a6.mapv(|z| z * b[12])
        + a4.mapv(|z| z * b[10])
        + a2.mapv(|z| z * b[8]);
    let v = a6.dot(&v_inner)
        + a6.mapv(|z| z * b[6])
        + a4.mapv(|z| z * b[4])
        + a2.mapv(|z| z * b[2])
        + eye.mapv(|z| z * b[0]);
    // (V - U)^{-1} (V + U)
    let rhs = &v + &u;
    let lhs = &v - &u;
    solve(&lhs, &rhs)
}

// Gaussian elimination with partial pivoting for AX = B.
fn solve(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    let mut aug = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                aug[[i, col]]
                    .norm()
                    .partial_cmp(&aug[[j, col]].norm())
                    .unwrap()
            })
            .unwrap();
        if pivot != col {
            for j in 0..n {
                let tmp = aug[[col, j]];
                aug[[col, j]] = aug[[pivot, j]];
                aug[[pivot, j]] = tmp;
                let tmp = x[[col, j]];
                x[[col, j]] = x[[pivot, j]];
                x[[pivot, j]] = tmp;
            }
        }
        let diag = aug[[col, col]];
        for row in (col + 1)..n {
            let factor = aug[[row, col]] / diag;
            if factor.norm() == 0.0 {
                continue;
            }
            for j in col..n {
                let v = aug[[col, j]];
                aug[[row, j]] -= factor * v;
            }
            for j in 0..n {
                let v = x[[col, j]];
                x[[row, j]] -= factor * v;
            }
        }
    }
    for col in (0..n).rev() {
        let diag = aug[[col, col]];
        for j in 0..n {
            x[[col, j]] /= diag;
        }
        for row in 0..col {
            let factor = aug[[row, col]];
            for j in 0..n {
                let v = x[[col, j]];
                x[[row, j]] -= factor * v;
            }
        }
    }
    x
}

/// Classical hop-rate matrix of the cycle under the given amplitude rule:
/// off-diagonal rates are `amplitude²`, diagonals balance the columns.
pub fn cycle_rate_matrix(n: usize, amplitude: Amplitude) -> Array2<f64> {
    let rate = match amplitude {
        Amplitude::Linear => 0.25,
        Amplitude::Sqrt => 0.5,
    };
    let mut r = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        r[[(j + 1) % n, j]] += rate;
        r[[(j + n - 1) % n, j]] += rate;
        r[[j, j]] = -2.0 * rate;
    }
    r
}

/// RK4 on `dp/dt = R p`.
pub fn integrate_rate_equation(
    r: &Array2<f64>,
    p0: &[f64],
    tau: f64,
    substeps: usize,
) -> Vec<f64> {
    let n = p0.len();
    let dt = tau / substeps as f64;
    let apply = |p: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| (0..n).map(|j| r[[i, j]] * p[j]).sum())
            .collect()
    };
    let mut p = p0.to_vec();
    for _ in 0..substeps {
        let k1 = apply(&p);
        let mid1: Vec<f64> = (0..n).map(|i| p[i] + 0.5 * dt * k1[i]).collect();
        let k2 = apply(&mid1);
        let mid2: Vec<f64> = (0..n).map(|i| p[i] + 0.5 * dt * k2[i]).collect();
        let k3 = apply(&mid2);
        let end: Vec<f64> = (0..n).map(|i| p[i] + dt * k3[i]).collect();
        let k4 = apply(&end);
        for i in 0..n {
            p[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_zero_is_identity() {
        let z = Array2::<C64>::zeros((5, 5));
        let e = expm(&z);
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((e[[i, j]].re - want).abs() < 1e-14);
                assert!(e[[i, j]].im.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn expm_matches_scalar_exponential_on_diagonal() {
        let mut d = Array2::<C64>::zeros((3, 3));
        d[[0, 0]] = C64::new(1.0, 0.0);
        d[[1, 1]] = C64::new(-2.5, 0.0);
        d[[2, 2]] = C64::new(0.0, 3.0);
        let e = expm(&d);
        assert!((e[[0, 0]].re - 1f64.exp()).abs() < 1e-12);
        assert!((e[[1, 1]].re - (-2.5f64).exp()).abs() < 1e-12);
        let want = C64::new(0.0, 3.0).exp();
        assert!((e[[2, 2]] - want).norm() < 1e-12);
    }

    #[test]
    fn expm_nilpotent_closed_form() {
        // exp([[0,1],[0,0]]) = [[1,1],[0,1]]
        let mut n = Array2::<C64>::zeros((2, 2));
        n[[0, 1]] = C64::new(1.0, 0.0);
        let e = expm(&n);
        assert!((e[[0, 0]].re - 1.0).abs() < 1e-14);
        assert!((e[[0, 1]].re - 1.0).abs() < 1e-14);
        assert!(e[[1, 0]].norm() < 1e-14);
    }

    #[test]
    fn superoperator_exponential_preserves_trace() {
        let gen = CycleGenerator::new(4, 0.5, Amplitude::Linear);
        let mut rho = Array2::<C64>::zeros((4, 4));
        rho[[0, 0]] = C64::new(1.0, 0.0);
        let out = gen.evolve_expm(&rho, 2.0);
        let trace: C64 = out.diag().sum();
        assert!((trace.re - 1.0).abs() < 1e-12, "trace {trace}");
        assert!(trace.im.abs() < 1e-12);
    }

    #[test]
    fn rate_equation_equilibrates_to_uniform() {
        let r = cycle_rate_matrix(8, Amplitude::Sqrt);
        let mut p0 = vec![0.0; 8];
        p0[0] = 1.0;
        let p = integrate_rate_equation(&r, &p0, 60.0, 4096);
        for v in &p {
            assert!((v - 0.125).abs() < 1e-6);
        }
    }
}
