//! Acceptance suite: every release gate runs here at its stated tolerance
//! and prints one PASS line (visible with `--nocapture`). The desk-scale
//! generative run and the sweep are serialized behind a lock so memory use
//! stays bounded when tests run concurrently.

use std::sync::Mutex;
use std::time::Instant;

use ndarray::Array2;

use qwdm::data::{quantize, synthetic_dataset};
use qwdm::denoiser::{
    ce_loss_and_grads, generate, train, zero_params, DenoiserParams, Objective, TrainConfig,
    TrainingExample,
};
use qwdm::diffusion::{
    forward_sample_dataset, level_distribution, posterior, q_schedule_from_kernels,
    CategoricalImage,
};
use qwdm::dtqw::{
    cycle_rms_distance, delay_schedule, evolve_pure, noisy_walk_kernels, CoinedState,
    NoiseSchedule,
};
use qwdm::graphs::{crw_step, cycle_graph, transition_matrix, ProbabilityVector};
use qwdm::lindblad::{
    build_generator, kl_trace, propagate, step_kernel, AmplitudeConvention, DensityMatrix,
    WalkKernel,
};
use qwdm::metrics::{frechet_distance, kl_divergence, FeatureExtractor, PixelFeatures};
use qwdm::rng::seeded;
use qwdm_oracles::{Amplitude, CycleGenerator};

static HEAVY: Mutex<()> = Mutex::new(());

fn pass(criterion: &str, detail: String, started: Instant) {
    println!(
        "ACCEPTANCE {criterion}: PASS ({detail}; {:.1}s)",
        started.elapsed().as_secs_f64()
    );
}

// 1. QSW propagation matches the dense superoperator exponential to
//    max-abs ≤ 1e-8 for ω ∈ {0, 0.3, 0.5, 1}, τ ∈ {0.06, 0.6, 6}.
#[test]
fn acceptance_01_propagator_matches_expm_oracle() {
    let started = Instant::now();
    let g = cycle_graph(8).unwrap();
    let mut worst: f64 = 0.0;
    for &omega in &[0.0, 0.3, 0.5, 1.0] {
        let liouv = build_generator(&g, omega, AmplitudeConvention::Linear).unwrap();
        let oracle = CycleGenerator::new(8, omega, Amplitude::Linear);
        for &tau in &[0.06, 0.6, 6.0] {
            let substeps = if tau <= 0.6 { 64 } else { 2560 };
            let rho0 = DensityMatrix::pure_basis_state(8, 0);
            let rk4 = propagate(&liouv, &rho0, tau, substeps).unwrap();
            let reference = oracle.evolve_expm(rho0.entries(), tau);
            let err = rk4
                .entries()
                .iter()
                .zip(reference.iter())
                .fold(0.0f64, |acc, (a, b)| acc.max((a - b).norm()));
            assert!(err <= 1e-8, "omega={omega} tau={tau}: {err:.3e}");
            worst = worst.max(err);
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "runtime {elapsed:.1}s exceeds 10s");
    pass("1 propagator-oracle", format!("worst max-abs {worst:.2e}"), started);
}

// 2. KL traces: ω = 1 monotone non-increasing; ω = 0 rises somewhere by more
//    than 1e-3; ω ∈ {0.4, 0.6} end below the ω = 1 trace at step 20.
#[test]
fn acceptance_02_kl_trace_shapes() {
    let started = Instant::now();
    let substeps = 128;
    let classical = kl_trace(1.0, 8, 20, 0.6, substeps).unwrap();
    for w in classical.windows(2) {
        assert!(w[1] <= w[0] + 1e-9, "classical trace rose: {} -> {}", w[0], w[1]);
    }
    let coherent = kl_trace(0.0, 8, 20, 0.6, substeps).unwrap();
    let max_rise = coherent
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(max_rise > 1e-3, "coherent trace largest rise {max_rise:.2e}");
    let final_classical = classical[19];
    for &w in &[0.4, 0.6] {
        let hybrid = kl_trace(w, 8, 20, 0.6, substeps).unwrap();
        assert!(
            hybrid[19] < final_classical,
            "omega={w}: {} not below classical {final_classical}",
            hybrid[19]
        );
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "runtime {elapsed:.1}s exceeds 30s");
    pass(
        "2 kl-trace-shapes",
        format!("classical end {final_classical:.3e}, coherent max rise {max_rise:.2e}"),
        started,
    );
}

// 3. DTQW: hand-enumerated 1- and 2-step distributions, and ballistic vs
//    diffusive spread ratios on cycle(64).
#[test]
fn acceptance_03_dtqw_exactness_and_spread() {
    let started = Instant::now();
    let psi = CoinedState::basis(8, 0, 0).unwrap();
    let one = evolve_pure(&psi, 1).unwrap();
    let want1 = [0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5];
    for v in 0..8 {
        assert!((one.probs()[v] - want1[v]).abs() < 1e-14, "1-step node {v}");
    }
    let two = evolve_pure(&psi, 2).unwrap();
    let want2 = [0.5, 0.0, 0.25, 0.0, 0.0, 0.0, 0.25, 0.0];
    for v in 0..8 {
        assert!((two.probs()[v] - want2[v]).abs() < 1e-14, "2-step node {v}");
    }

    let center = 32;
    let psi = CoinedState::basis(64, 0, center).unwrap();
    let q10 = cycle_rms_distance(&evolve_pure(&psi, 10).unwrap(), center);
    let q20 = cycle_rms_distance(&evolve_pure(&psi, 20).unwrap(), center);
    let q_ratio = q20 / q10;
    assert!((1.7..=2.3).contains(&q_ratio), "quantum ratio {q_ratio}");

    let g = cycle_graph(64).unwrap();
    let s = transition_matrix(&g).unwrap();
    let mut p = ProbabilityVector::delta(64, center);
    let mut c10 = 0.0;
    for t in 1..=20 {
        p = crw_step(&p, &s).unwrap();
        if t == 10 {
            c10 = cycle_rms_distance(&p, center);
        }
    }
    let c_ratio = cycle_rms_distance(&p, center) / c10;
    assert!((1.25..=1.55).contains(&c_ratio), "classical ratio {c_ratio}");
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "runtime {elapsed:.1}s exceeds 10s");
    pass(
        "3 dtqw-exactness",
        format!("quantum σ-ratio {q_ratio:.3}, classical {c_ratio:.3}"),
        started,
    );
}

// 4. Delay schedule endpoints and hardware-granularity grid.
#[test]
fn acceptance_04_delay_schedule_endpoints() {
    let started = Instant::now();
    let sched = NoiseSchedule::default();
    assert_eq!(delay_schedule(0, &sched).unwrap(), 0.0);
    let last = delay_schedule(19, &sched).unwrap();
    assert!((last - 2.5e-5).abs() < 1e-18, "delay(19) = {last}");
    // sin²((π/2)·10/19) = 0.541290..., 5e4 of that floored to a multiple of
    // 8 is 27064 samples.
    let mid = delay_schedule(10, &sched).unwrap();
    assert!((mid - 1.3532e-5).abs() < 1e-18, "delay(10) = {mid}");
    for t in 0..20 {
        let samples = delay_schedule(t, &sched).unwrap() / sched.dt_seconds;
        let rem = samples % 8.0;
        assert!(rem.abs() < 1e-9 || (8.0 - rem).abs() < 1e-9, "t={t}: {samples}");
    }
    pass("4 delay-endpoints", format!("delay(19) = {last:.1e} s"), started);
}

// 5. Closed-form posterior equals brute-force enumeration over K = 8 on
//    1000 random (schedule, x_t, x_0, t) tuples to 1e-12.
#[test]
fn acceptance_05_posterior_enumeration_oracle() {
    use rand::Rng;
    let started = Instant::now();
    let mut rng = seeded(505);
    let random_kernel = |rng: &mut qwdm::rng::ChaCha12Rng, step: usize| {
        let mut entries = Array2::<f64>::zeros((8, 8));
        for j in 0..8 {
            let mut col: Vec<f64> = (0..8).map(|_| rng.gen_range(0.02..1.0)).collect();
            let sum: f64 = col.iter().sum();
            col.iter_mut().for_each(|c| *c /= sum);
            let partial: f64 = col[..7].iter().sum();
            col[7] = 1.0 - partial;
            for i in 0..8 {
                entries[[i, j]] = col[i];
            }
        }
        WalkKernel::new(entries, step).unwrap()
    };
    let mut checked = 0;
    for _ in 0..50 {
        let t_steps = rng.gen_range(2..=6);
        let kernels: Vec<WalkKernel> =
            (1..=t_steps).map(|t| random_kernel(&mut rng, t)).collect();
        let sched = q_schedule_from_kernels(&kernels).unwrap();
        for _ in 0..20 {
            let t = rng.gen_range(1..=t_steps);
            let x_t = rng.gen_range(0..8);
            let x_0 = rng.gen_range(0..8);
            let post = posterior(x_t, x_0, t, &sched).unwrap();
            // Enumeration oracle: normalize q(x_t | m) q(m | x_0) over m.
            let joint: Vec<f64> = (0..8)
                .map(|m| sched.q(t)[[x_t, m]] * sched.q_bar_entry(t - 1, m, x_0))
                .collect();
            let total: f64 = joint.iter().sum();
            for m in 0..8 {
                assert!(
                    (post[m] - joint[m] / total).abs() < 1e-12,
                    "t={t} x_t={x_t} x_0={x_0} m={m}"
                );
            }
            checked += 1;
        }
    }
    assert_eq!(checked, 1000);
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 5.0, "runtime {elapsed:.1}s exceeds 5s");
    pass("5 posterior-oracle", format!("{checked} tuples"), started);
}

// 6. ≥ 200 sampled parameters agree with central finite differences at
//    relative 1e-4.
#[test]
fn acceptance_06_gradient_finite_differences() {
    use rand::Rng;
    let started = Instant::now();
    let mut p = qwdm::denoiser::init_params_with(2, 2, 8, 3, 24, 606).unwrap();
    let imgs: Vec<CategoricalImage> = (0..4)
        .map(|i| {
            CategoricalImage::new(2, 2, 8, vec![i as u8, 7 - i as u8, (2 * i % 8) as u8, 5])
                .unwrap()
        })
        .collect();
    let batch = [
        TrainingExample { x_t: &imgs[0], x_prev: &imgs[1], t: 1 },
        TrainingExample { x_t: &imgs[2], x_prev: &imgs[3], t: 3 },
    ];
    let (_, grads) = ce_loss_and_grads(&p, &batch).unwrap();
    let mut rng = seeded(607);
    let eps = 1e-5;
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    while checked < 200 {
        let tensor = rng.gen_range(0..6);
        let (analytic, slot): (f64, (usize, usize, usize)) = match tensor {
            0 => {
                let i = rng.gen_range(0..p.input_width() * p.hidden());
                (grads.head_w[i], (0, 0, i))
            }
            1 => {
                let i = rng.gen_range(0..p.hidden());
                (grads.head_b[i], (1, 0, i))
            }
            _ => {
                let t_idx = if tensor < 4 { 0 } else { 2 };
                let Some(tg) = &grads.tails[t_idx] else { continue };
                let which = rng.gen_range(0..4);
                let (g, len) = match which {
                    0 => (&tg.w1, tg.w1.len()),
                    1 => (&tg.b1, tg.b1.len()),
                    2 => (&tg.w2, tg.w2.len()),
                    _ => (&tg.b2, tg.b2.len()),
                };
                let i = rng.gen_range(0..len);
                (g[i], (2 + which, t_idx, i))
            }
        };
        let bump = |p: &mut DenoiserParams, delta: f64| match slot {
            (0, _, i) => p.head_w_mut()[i] += delta,
            (1, _, i) => p.head_b_mut()[i] += delta,
            (2, t, i) => p.tails_mut()[t].w1[i] += delta,
            (3, t, i) => p.tails_mut()[t].b1[i] += delta,
            (4, t, i) => p.tails_mut()[t].w2[i] += delta,
            (5, t, i) => p.tails_mut()[t].b2[i] += delta,
            _ => unreachable!(),
        };
        bump(&mut p, eps);
        let (up, _) = ce_loss_and_grads(&p, &batch).unwrap();
        bump(&mut p, -2.0 * eps);
        let (down, _) = ce_loss_and_grads(&p, &batch).unwrap();
        bump(&mut p, eps);
        let numeric = (up - down) / (2.0 * eps);
        let denom = analytic.abs().max(numeric.abs()).max(1e-8);
        let rel = (analytic - numeric).abs() / denom;
        assert!(rel < 1e-4, "slot {slot:?}: rel {rel:.2e}");
        worst = worst.max(rel);
        checked += 1;
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "runtime {elapsed:.1}s exceeds 30s");
    pass(
        "6 gradient-check",
        format!("{checked} params, worst rel {worst:.2e}"),
        started,
    );
}

fn digit_zero_images(count: usize, seed: u64) -> Vec<CategoricalImage> {
    let ds = synthetic_dataset(0, count, seed).unwrap();
    quantize(&ds, 8).unwrap()
}

fn qsw_kernels(omega: f64, convention: AmplitudeConvention, t_steps: usize) -> Vec<WalkKernel> {
    let g = cycle_graph(8).unwrap();
    let liouv = build_generator(&g, omega, convention).unwrap();
    let kernel = step_kernel(&liouv, 0.6, 64).unwrap();
    (1..=t_steps).map(|t| kernel.clone().with_step(t)).collect()
}

// 7. Desk-scale generative run: 500 digit-0 images, K = 8, T = 20, ω = 1 QSW
//    kernels, 200 epochs, batch 16, lr 1e-3. Gates: trained Fréchet proxy
//    below half the untrained baseline, and generated-vs-train histogram KL
//    below uniform-vs-train. (Headline published FID values are out of
//    reach by design: Inception features and real-device noise are not part
//    of this artifact, so the gates are relative.)
#[test]
fn acceptance_07_desk_scale_generative_run() {
    let _guard = HEAVY.lock().unwrap();
    let started = Instant::now();
    let train_imgs = digit_zero_images(500, 707);
    let sched =
        q_schedule_from_kernels(&qsw_kernels(1.0, AmplitudeConvention::Linear, 20)).unwrap();
    let trajectories = forward_sample_dataset(&train_imgs, &sched, 708).unwrap();
    let cfg = TrainConfig {
        epochs: 200,
        batch_size: 16,
        lr: 1e-3,
        objective: Objective::CrossEntropy,
        hidden: 800,
        resample_each_epoch: false,
        seed: 709,
    };
    let (params, curve) = train(&trajectories, &cfg, None).unwrap();
    assert!(
        curve.last().unwrap() < &curve[0],
        "loss did not decrease: {} -> {}",
        curve[0],
        curve.last().unwrap()
    );
    let generated = generate(&params, 500, 710).unwrap();

    let features = PixelFeatures;
    let real = features.features(&train_imgs).unwrap();
    let fid_trained = frechet_distance(&real, &features.features(&generated).unwrap()).unwrap();
    let zero = zero_params(28, 28, 8, 20, 800).unwrap();
    let noise = generate(&zero, 500, 711).unwrap();
    let fid_baseline = frechet_distance(&real, &features.features(&noise).unwrap()).unwrap();
    assert!(
        fid_trained < 0.5 * fid_baseline,
        "fid {fid_trained:.1} not below half of baseline {fid_baseline:.1}"
    );

    let train_hist = level_distribution(&train_imgs).unwrap();
    let gen_hist = level_distribution(&generated).unwrap();
    let uniform = vec![0.125; 8];
    let kl_gen = kl_divergence(&gen_hist, &train_hist).unwrap().nats;
    let kl_unif = kl_divergence(&uniform, &train_hist).unwrap().nats;
    assert!(
        kl_gen < kl_unif,
        "KL(gen||train) {kl_gen:.4} not below KL(uniform||train) {kl_unif:.4}"
    );
    // Runtime target < 30 min on a desktop CPU; reported, not gated, since
    // it is hardware-dependent.
    pass(
        "7 desk-scale-run",
        format!(
            "fid {fid_trained:.1} vs baseline {fid_baseline:.1} (ratio {:.3}), \
             KL gen {kl_gen:.4} vs uniform {kl_unif:.4}, final loss {:.4}",
            fid_trained / fid_baseline,
            curve.last().unwrap()
        ),
        started,
    );
}

// 8. Forward convergence onto the uniform prior at t = T over 1000 images
//    for ω = 1 QSW and the default noisy DTQW schedule. The QSW arm uses the
//    sqrt amplitude rule, whose incoherent rates equal the classical hop
//    probabilities; the linear rule is a 2x time rescale and is reported.
#[test]
fn acceptance_08_forward_convergence() {
    let started = Instant::now();
    let images = digit_zero_images(1000, 808);
    let uniform = vec![0.125; 8];

    let sched = q_schedule_from_kernels(&qsw_kernels(1.0, AmplitudeConvention::Sqrt, 20)).unwrap();
    let trajectories = forward_sample_dataset(&images, &sched, 809).unwrap();
    let finals: Vec<CategoricalImage> =
        trajectories.iter().map(|tr| tr.step(20).clone()).collect();
    let kl_qsw = kl_divergence(&level_distribution(&finals).unwrap(), &uniform)
        .unwrap()
        .nats;
    assert!(kl_qsw < 0.01, "QSW KL at T = {kl_qsw:.4e}");

    // Reported: the linear-amplitude chain relaxes at a quarter of the
    // classical rate and does not reach the 0.01 gate within T = 20.
    let sched_lin =
        q_schedule_from_kernels(&qsw_kernels(1.0, AmplitudeConvention::Linear, 20)).unwrap();
    let lin_col: Vec<f64> = (0..8).map(|i| sched_lin.q_bar(20)[[i, 0]]).collect();
    let kl_lin = kl_divergence(&lin_col, &uniform).unwrap().nats;

    let kernels = noisy_walk_kernels(8, &NoiseSchedule::default()).unwrap();
    let sched = q_schedule_from_kernels(&kernels).unwrap();
    let trajectories = forward_sample_dataset(&images, &sched, 810).unwrap();
    let finals: Vec<CategoricalImage> =
        trajectories.iter().map(|tr| tr.step(20).clone()).collect();
    let kl_dtqw = kl_divergence(&level_distribution(&finals).unwrap(), &uniform)
        .unwrap()
        .nats;
    assert!(kl_dtqw < 0.01, "DTQW KL at T = {kl_dtqw:.4e}");
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 300.0, "runtime {elapsed:.1}s exceeds 5min");
    pass(
        "8 forward-convergence",
        format!(
            "QSW(sqrt) {kl_qsw:.2e}, DTQW {kl_dtqw:.2e} (linear-rule kernel column: {kl_lin:.2e})"
        ),
        started,
    );
}

// 9. Sweep machinery: ω ∈ {0, 0.3, 1} × 5 repetitions at reduced scale
//    produces a well-formed box-stats table. (The published ω = 0.3 beats
//    ω = 1 ordering is a 10-repetition statistical claim; medians are
//    reported, not gated. Box statistics need at least 5 samples, so the
//    suite runs 5 repetitions.)
#[test]
fn acceptance_09_sweep_machinery() {
    let _guard = HEAVY.lock().unwrap();
    let started = Instant::now();
    let out = std::env::temp_dir().join(format!("qwdm-acc9-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&out);
    std::fs::create_dir_all(&out).unwrap();
    let mut cfg = qwdm_cli::config::ExperimentConfig::from_str_keys(
        "omega_list = 0,0.3,1\nrepetitions = 5\nsynthetic_count = 48\ntrain_images = 40\n\
         epochs = 6\nhidden = 64\ngenerate_count = 40\nbatch_size = 16\n",
    )
    .unwrap();
    cfg.out = out.clone();
    cfg.serial = true;
    qwdm_cli::stages::cmd_sweep(&cfg).unwrap();

    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    let data_rows = rows
        .iter()
        .filter(|r| r.split(',').nth(1).unwrap().parse::<usize>().is_ok())
        .count();
    assert_eq!(data_rows, 15, "expected 15 data rows");
    let summary_rows = rows.len() - data_rows;
    assert_eq!(summary_rows, 3, "one summary row per omega");

    let stats: std::collections::BTreeMap<String, serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(out.join("sweep_stats.json")).unwrap())
            .unwrap();
    assert_eq!(stats.len(), 3);
    let mut medians = Vec::new();
    for (omega, s) in &stats {
        let q1 = s["q1"].as_f64().unwrap();
        let median = s["median"].as_f64().unwrap();
        let q3 = s["q3"].as_f64().unwrap();
        assert!(q1 <= median && median <= q3, "omega {omega}: {q1} {median} {q3}");
        assert!(s["sem"].as_f64().unwrap() >= 0.0);
        medians.push(format!("ω={omega}: median {median:.1}"));
    }
    pass("9 sweep-machinery", medians.join(", "), started);
}

// 10. Determinism: rerunning any stage with identical config and seed in
//     serial mode yields byte-identical outputs.
#[test]
fn acceptance_10_serial_determinism() {
    let started = Instant::now();
    let base = std::env::temp_dir().join(format!("qwdm-acc10-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&base);
    let make_cfg = |out: std::path::PathBuf| {
        let mut cfg = qwdm_cli::config::ExperimentConfig::from_str_keys(
            "mode = qsw\nomega = 0.3\nsynthetic_count = 30\ntrain_images = 24\nepochs = 3\n\
             hidden = 40\ngenerate_count = 16\nt_steps = 5\nomega_list = 0.3\n",
        )
        .unwrap();
        cfg.out = out;
        cfg.serial = true;
        cfg
    };
    let dir_a = base.join("a");
    let dir_b = base.join("b");
    std::fs::create_dir_all(&dir_a).unwrap();
    std::fs::create_dir_all(&dir_b).unwrap();
    qwdm_cli::stages::run_all(&make_cfg(dir_a.clone())).unwrap();
    qwdm_cli::stages::run_all(&make_cfg(dir_b.clone())).unwrap();

    let snapshot = |root: &std::path::Path| {
        let mut files = std::collections::BTreeMap::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for entry in std::fs::read_dir(&dir).unwrap() {
                let path = entry.unwrap().path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    let rel = path.strip_prefix(root).unwrap().to_path_buf();
                    files.insert(rel, std::fs::read(&path).unwrap());
                }
            }
        }
        files
    };

    // Two independent runs produce identical data artifacts (manifests embed
    // the differing output paths in their config snapshots, so they are
    // compared through the in-place rerun below instead).
    let snap_a = snapshot(&dir_a);
    let snap_b = snapshot(&dir_b);
    assert_eq!(snap_a.len(), snap_b.len());
    let mut compared = 0;
    for (rel, bytes) in &snap_a {
        if rel.to_string_lossy().starts_with("manifest_") {
            continue;
        }
        assert_eq!(
            bytes,
            snap_b.get(rel).unwrap_or_else(|| panic!("missing {}", rel.display())),
            "bytes differ for {}",
            rel.display()
        );
        compared += 1;
    }
    assert!(compared >= 10, "compared only {compared} files");

    // Re-running every stage in place must reproduce the whole tree,
    // manifests included.
    let cfg = make_cfg(dir_a.clone());
    for stage in [
        qwdm_cli::stages::cmd_kernels as fn(&_) -> _,
        qwdm_cli::stages::cmd_forward,
        qwdm_cli::stages::cmd_train,
        qwdm_cli::stages::cmd_generate,
        qwdm_cli::stages::cmd_evaluate,
    ] {
        stage(&cfg).unwrap();
    }
    let snap_rerun = snapshot(&dir_a);
    assert_eq!(snap_a.len(), snap_rerun.len());
    for (rel, bytes) in &snap_a {
        assert_eq!(
            bytes,
            &snap_rerun[rel],
            "stage rerun changed {}",
            rel.display()
        );
    }
    pass(
        "10 serial-determinism",
        format!("{} files stable across reruns", snap_a.len()),
        started,
    );
}
