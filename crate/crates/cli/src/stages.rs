//! Pipeline stages. Each stage reads its inputs from files in the output
//! directory, writes its products plus a manifest, and can be re-run
//! independently; `run_all` chains them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use qwdm::data::{filter_digit, parse_idx, parse_pgm, quantize, synthetic_dataset, write_pgm};
use qwdm::denoiser::{
    checkpoint_from_bytes, checkpoint_to_bytes, generate, train, HeadFeatures, TrainConfig,
};
use qwdm::diffusion::{
    forward_sample_dataset, level_distribution, q_schedule_from_kernels, trajectories_from_bytes,
    trajectories_to_bytes, CategoricalImage, Trajectory,
};
use qwdm::dtqw::{noisy_walk_kernels_opts, NoiseSchedule, NoisyWalkOptions};
use qwdm::graphs::cycle_graph;
use qwdm::lindblad::{build_generator_with, kl_trace, step_kernel, WalkKernel};
use qwdm::metrics::{
    boxplot_stats, frechet_distance, kl_divergence, BoxStats, FeatureExtractor, PixelFeatures,
};
use qwdm::rng::{derive_seed, seeded, tag};

use crate::config::{DatasetSource, EvalFeature, ExperimentConfig, Mode};
use crate::error::{CliError, Result};
use crate::manifest::ManifestBuilder;

fn ensure_out(cfg: &ExperimentConfig) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", cfg.out.display())))?;
    Ok(cfg.out.clone())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
}

fn read_file(path: &Path, stage_hint: &str) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| {
        CliError::Io(format!(
            "reading {}: {e}; run the {stage_hint} stage first",
            path.display()
        ))
    })
}

fn noise_schedule(cfg: &ExperimentConfig) -> NoiseSchedule {
    NoiseSchedule {
        c: cfg.noise_c,
        dt_seconds: cfg.noise_dt,
        t1_seconds: cfg.noise_t1,
        t2_seconds: cfg.noise_t2,
        total_steps: cfg.t_steps,
    }
}

/// Build the per-step kernels the configured dynamics produce.
pub fn build_kernels(cfg: &ExperimentConfig) -> Result<Vec<WalkKernel>> {
    match cfg.mode {
        Mode::Qsw | Mode::Classical => {
            let g = cycle_graph(cfg.n_nodes)?;
            let liouv = build_generator_with(
                &g,
                cfg.effective_omega(),
                cfg.amplitude_convention,
                cfg.hamiltonian,
            )?;
            // Time-independent generator: one kernel serves every step.
            let kernel = step_kernel(&liouv, cfg.tau, cfg.substeps)?;
            Ok((1..=cfg.t_steps)
                .map(|t| kernel.clone().with_step(t))
                .collect())
        }
        Mode::DtqwNoisy => {
            let opts = NoisyWalkOptions {
                qubit_mask: cfg.delay_qubit_mask,
                shots: (cfg.shots > 0).then_some(cfg.shots),
                seed: derive_seed(cfg.seed, &[tag("shots")]),
            };
            Ok(noisy_walk_kernels_opts(cfg.n_nodes, &noise_schedule(cfg), &opts)?)
        }
    }
}

fn kernels_csv(kernels: &[WalkKernel]) -> String {
    let mut s = String::from("step,row,col,prob\n");
    for kernel in kernels {
        let k = kernel.k();
        for row in 0..k {
            for col in 0..k {
                writeln!(
                    s,
                    "{},{row},{col},{}",
                    kernel.step_index(),
                    kernel.entries()[[row, col]]
                )
                .unwrap();
            }
        }
    }
    s
}

fn parse_kernels_csv(text: &str) -> Result<Vec<WalkKernel>> {
    let mut cells: BTreeMap<usize, Vec<(usize, usize, f64)>> = BTreeMap::new();
    let mut k = 0usize;
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != "step,row,col,prob" {
                return Err(CliError::Io("kernels.csv has an unexpected header".into()));
            }
            continue;
        }
        let mut fields = line.split(',');
        let mut next = |what: &str| -> Result<&str> {
            fields
                .next()
                .ok_or_else(|| CliError::Io(format!("kernels.csv line {}: missing {what}", i + 1)))
        };
        let step: usize = next("step")?.parse().map_err(|_| bad_csv(i))?;
        let row: usize = next("row")?.parse().map_err(|_| bad_csv(i))?;
        let col: usize = next("col")?.parse().map_err(|_| bad_csv(i))?;
        let prob: f64 = next("prob")?.parse().map_err(|_| bad_csv(i))?;
        k = k.max(row + 1).max(col + 1);
        cells.entry(step).or_default().push((row, col, prob));
    }
    let mut kernels = Vec::new();
    for (step, entries) in cells {
        let mut m = Array2::<f64>::zeros((k, k));
        for (row, col, prob) in entries {
            m[[row, col]] = prob;
        }
        kernels.push(WalkKernel::new(m, step)?);
    }
    if kernels.is_empty() {
        return Err(CliError::Io("kernels.csv holds no kernels".into()));
    }
    Ok(kernels)
}

fn bad_csv(line: usize) -> CliError {
    CliError::Io(format!("kernels.csv line {}: malformed field", line + 1))
}

fn trace_csv(series: &[f64]) -> String {
    let mut s = String::from("t,kl\n");
    for (i, kl) in series.iter().enumerate() {
        writeln!(s, "{},{kl}", i + 1).unwrap();
    }
    s
}

/// `kernels`: write per-step kernels and KL-vs-uniform traces.
pub fn cmd_kernels(cfg: &ExperimentConfig) -> Result<()> {
    cmd_kernels_inner(cfg, true)
}

fn cmd_kernels_inner(cfg: &ExperimentConfig, trace_family: bool) -> Result<()> {
    let out = ensure_out(cfg)?;
    let mut manifest = ManifestBuilder::new("kernels", cfg);
    let kernels = build_kernels(cfg)?;
    let kernels_path = out.join("kernels.csv");
    write_file(&kernels_path, kernels_csv(&kernels).as_bytes())?;
    manifest.artifact(&kernels_path);
    manifest.timing("kernels");

    match cfg.mode {
        Mode::Qsw | Mode::Classical => {
            let trace = kl_trace(
                cfg.effective_omega(),
                cfg.n_nodes,
                cfg.t_steps,
                cfg.tau,
                cfg.trace_substeps,
            )?;
            let path = out.join("kl_trace.csv");
            write_file(&path, trace_csv(&trace).as_bytes())?;
            manifest.metric("kl_final", *trace.last().unwrap());
            manifest.artifact(&path);
            if trace_family && cfg.mode == Mode::Qsw {
                for &w in &cfg.omega_list {
                    let series = kl_trace(w, cfg.n_nodes, cfg.t_steps, cfg.tau, cfg.trace_substeps)?;
                    let path = out.join(format!("kl_trace_omega{w}.csv"));
                    write_file(&path, trace_csv(&series).as_bytes())?;
                    manifest.artifact(&path);
                }
            }
        }
        Mode::DtqwNoisy => {
            // Per-step divergence of kernel column 0 from uniform.
            let uniform = vec![1.0 / cfg.n_nodes as f64; cfg.n_nodes];
            let series: Vec<f64> = kernels
                .iter()
                .map(|kernel| Ok(kl_divergence(&kernel.column(0), &uniform)?.nats))
                .collect::<Result<_>>()?;
            let path = out.join("kl_trace.csv");
            write_file(&path, trace_csv(&series).as_bytes())?;
            manifest.metric("kl_final", *series.last().unwrap());
            manifest.artifact(&path);
        }
    }
    manifest.timing("total");
    manifest.write(&out)?;
    Ok(())
}

/// Load, filter, and quantize the configured dataset, truncated to
/// `train_images`.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Vec<CategoricalImage>> {
    let raw = match cfg.dataset_source {
        DatasetSource::Synthetic => synthetic_dataset(
            cfg.digit,
            cfg.synthetic_count,
            derive_seed(cfg.seed, &[tag("synthetic-data")]),
        )?,
        DatasetSource::Idx => {
            let images = read_file(cfg.dataset_images.as_ref().unwrap(), "dataset setup")?;
            let labels = read_file(cfg.dataset_labels.as_ref().unwrap(), "dataset setup")?;
            let mut ds = parse_idx(&images, &labels)?;
            if cfg.combined_split {
                let (ti, tl) = match (&cfg.dataset_test_images, &cfg.dataset_test_labels) {
                    (Some(i), Some(l)) => (i, l),
                    _ => {
                        return Err(CliError::Config(
                            "combined_split needs dataset_test_images and dataset_test_labels"
                                .into(),
                        ))
                    }
                };
                let test = parse_idx(&read_file(ti, "dataset setup")?, &read_file(tl, "dataset setup")?)?;
                ds = ds.concat(test)?;
            }
            ds
        }
    };
    let filtered = filter_digit(&raw, cfg.digit)?;
    if filtered.is_empty() {
        return Err(CliError::Config(format!(
            "dataset holds no images of digit {}",
            cfg.digit
        )));
    }
    let mut images = quantize(&filtered, cfg.k)?;
    images.truncate(cfg.train_images);
    Ok(images)
}

fn histogram_csv(trajectories: &[Trajectory], k: usize) -> Result<(String, f64)> {
    let t_steps = trajectories[0].t_steps();
    let uniform = vec![1.0 / k as f64; k];
    let mut s = String::from("t");
    for lvl in 0..k {
        write!(s, ",level_{lvl}").unwrap();
    }
    s.push_str(",kl_uniform\n");
    let mut final_kl = 0.0;
    for t in 0..=t_steps {
        let at_t: Vec<CategoricalImage> =
            trajectories.iter().map(|tr| tr.step(t).clone()).collect();
        let hist = level_distribution(&at_t)?;
        let kl = kl_divergence(&hist, &uniform)?.nats;
        write!(s, "{t}").unwrap();
        for v in &hist {
            write!(s, ",{v}").unwrap();
        }
        writeln!(s, ",{kl}").unwrap();
        if t == t_steps {
            final_kl = kl;
        }
    }
    Ok((s, final_kl))
}

/// `forward`: sample trajectories for the training set and write the
/// per-step pixel-value histograms.
pub fn cmd_forward(cfg: &ExperimentConfig) -> Result<()> {
    let out = ensure_out(cfg)?;
    let mut manifest = ManifestBuilder::new("forward", cfg);
    let kernels = parse_kernels_csv(&String::from_utf8_lossy(&read_file(
        &out.join("kernels.csv"),
        "kernels",
    )?))?;
    let sched = q_schedule_from_kernels(&kernels)?;
    let images = load_dataset(cfg)?;
    let forward_seed = derive_seed(cfg.seed, &[tag("forward")]);
    manifest.seed("forward", forward_seed);
    let trajectories = forward_sample_dataset(&images, &sched, forward_seed)?;
    manifest.timing("sampling");

    let traj_path = out.join("trajectories.qdt");
    write_file(&traj_path, &trajectories_to_bytes(&trajectories)?)?;
    manifest.artifact(&traj_path);

    let (csv, final_kl) = histogram_csv(&trajectories, cfg.k)?;
    let hist_path = out.join("forward_hist.csv");
    write_file(&hist_path, csv.as_bytes())?;
    manifest.artifact(&hist_path);
    manifest.metric("kl_final_vs_uniform", final_kl);
    manifest.metric("n_trajectories", trajectories.len() as f64);
    manifest.timing("total");
    manifest.write(&out)?;
    Ok(())
}

/// `train`: fit the denoiser on the sampled trajectories.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<()> {
    let out = ensure_out(cfg)?;
    let mut manifest = ManifestBuilder::new("train", cfg);
    let trajectories =
        trajectories_from_bytes(&read_file(&out.join("trajectories.qdt"), "forward")?)?;
    let needs_schedule = cfg.objective == qwdm::denoiser::Objective::PosteriorKl
        || cfg.resample_each_epoch;
    let sched = if needs_schedule {
        let kernels = parse_kernels_csv(&String::from_utf8_lossy(&read_file(
            &out.join("kernels.csv"),
            "kernels",
        )?))?;
        Some(q_schedule_from_kernels(&kernels)?)
    } else {
        None
    };
    let train_cfg = TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        lr: cfg.lr,
        objective: cfg.objective,
        hidden: cfg.hidden,
        resample_each_epoch: cfg.resample_each_epoch,
        seed: cfg.seed,
    };
    manifest.seed("train", cfg.seed);
    let (params, curve) = train(&trajectories, &train_cfg, sched.as_ref())?;
    manifest.timing("training");

    let ckpt_path = out.join("checkpoint.qdnp");
    write_file(&ckpt_path, &checkpoint_to_bytes(&params))?;
    manifest.artifact(&ckpt_path);

    let mut csv = String::from("epoch,loss\n");
    for (epoch, loss) in curve.iter().enumerate() {
        writeln!(csv, "{},{loss}", epoch + 1).unwrap();
    }
    let loss_path = out.join("loss.csv");
    write_file(&loss_path, csv.as_bytes())?;
    manifest.artifact(&loss_path);
    manifest.metric("final_loss", *curve.last().unwrap());
    manifest.timing("total");
    manifest.write(&out)?;
    Ok(())
}

/// `generate`: ancestral-sample images from the trained checkpoint.
pub fn cmd_generate(cfg: &ExperimentConfig) -> Result<()> {
    let out = ensure_out(cfg)?;
    let mut manifest = ManifestBuilder::new("generate", cfg);
    let params = checkpoint_from_bytes(&read_file(&out.join("checkpoint.qdnp"), "train")?)?;
    let gen_seed = derive_seed(cfg.seed, &[tag("generate-stage")]);
    manifest.seed("generate", gen_seed);
    let images = generate(&params, cfg.generate_count, gen_seed)?;
    manifest.timing("sampling");

    let dir = out.join("generated");
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", dir.display())))?;
    for (i, img) in images.iter().enumerate() {
        let path = dir.join(format!("img_{i:05}.pgm"));
        write_file(&path, &write_pgm(img))?;
        manifest.artifact(&path);
    }

    let hist = level_distribution(&images)?;
    let mut csv = String::from("level,freq\n");
    for (lvl, freq) in hist.iter().enumerate() {
        writeln!(csv, "{lvl},{freq}").unwrap();
    }
    let hist_path = out.join("generated_hist.csv");
    write_file(&hist_path, csv.as_bytes())?;
    manifest.artifact(&hist_path);
    manifest.metric("n_generated", images.len() as f64);
    manifest.timing("total");
    manifest.write(&out)?;
    Ok(())
}

fn load_generated(out: &Path) -> Result<Vec<CategoricalImage>> {
    let dir = out.join("generated");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| {
            CliError::Io(format!(
                "reading {}: {e}; run the generate stage first",
                dir.display()
            ))
        })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "pgm"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Io(format!("no PGM images in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| Ok(parse_pgm(&read_file(p, "generate")?)?))
        .collect()
}

/// Evaluation numbers shared by `evaluate` and the sweep cells.
pub struct Evaluation {
    pub fid_proxy: f64,
    pub fid_noise_baseline: f64,
    pub kl_generated_vs_train: f64,
    pub kl_generated_smoothed: bool,
    pub kl_uniform_vs_train: f64,
}

pub fn evaluate_sets(
    cfg: &ExperimentConfig,
    train_set: &[CategoricalImage],
    generated: &[CategoricalImage],
    params: Option<&qwdm::denoiser::DenoiserParams>,
) -> Result<Evaluation> {
    let (real, fake, noise_feats) = {
        // Baseline: the same count of uniform-noise images.
        let mut rng = seeded(derive_seed(cfg.seed, &[tag("noise-baseline")]));
        let noise: Vec<CategoricalImage> = (0..generated.len())
            .map(|_| {
                let levels: Vec<u8> = (0..train_set[0].n_pixels())
                    .map(|_| rand::Rng::gen_range(&mut rng, 0..cfg.k) as u8)
                    .collect();
                CategoricalImage::new(train_set[0].width(), train_set[0].height(), cfg.k, levels)
            })
            .collect::<qwdm::Result<_>>()?;
        match cfg.eval_feature {
            EvalFeature::Pixels => {
                let fx = PixelFeatures;
                (
                    fx.features(train_set)?,
                    fx.features(generated)?,
                    fx.features(&noise)?,
                )
            }
            EvalFeature::Head => {
                let params = params.ok_or_else(|| {
                    CliError::Config("eval_feature = head needs a trained checkpoint".into())
                })?;
                let fx = HeadFeatures { params };
                (
                    fx.features(train_set)?,
                    fx.features(generated)?,
                    fx.features(&noise)?,
                )
            }
        }
    };
    let fid_proxy = frechet_distance(&real, &fake)?;
    let fid_noise_baseline = frechet_distance(&real, &noise_feats)?;

    let train_hist = level_distribution(train_set)?;
    let gen_hist = level_distribution(generated)?;
    let uniform = vec![1.0 / cfg.k as f64; cfg.k];
    let kl_gen = kl_divergence(&gen_hist, &train_hist)?;
    let kl_unif = kl_divergence(&uniform, &train_hist)?;
    Ok(Evaluation {
        fid_proxy,
        fid_noise_baseline,
        kl_generated_vs_train: kl_gen.nats,
        kl_generated_smoothed: kl_gen.smoothed,
        kl_uniform_vs_train: kl_unif.nats,
    })
}

/// `evaluate`: Fréchet proxy and histogram divergences between the training
/// set (step 0 of the stored trajectories) and the generated set.
pub fn cmd_evaluate(cfg: &ExperimentConfig) -> Result<()> {
    let out = ensure_out(cfg)?;
    let mut manifest = ManifestBuilder::new("evaluate", cfg);
    let trajectories =
        trajectories_from_bytes(&read_file(&out.join("trajectories.qdt"), "forward")?)?;
    let train_set: Vec<CategoricalImage> =
        trajectories.iter().map(|tr| tr.step(0).clone()).collect();
    let generated = load_generated(&out)?;
    let params = if cfg.eval_feature == EvalFeature::Head {
        Some(checkpoint_from_bytes(&read_file(
            &out.join("checkpoint.qdnp"),
            "train",
        )?)?)
    } else {
        None
    };
    let eval = evaluate_sets(cfg, &train_set, &generated, params.as_ref())?;
    manifest.timing("evaluation");

    let mut doc = BTreeMap::new();
    doc.insert("fid_proxy".to_string(), serde_json::json!(eval.fid_proxy));
    doc.insert(
        "fid_noise_baseline".to_string(),
        serde_json::json!(eval.fid_noise_baseline),
    );
    doc.insert(
        "kl_generated_vs_train".to_string(),
        serde_json::json!(eval.kl_generated_vs_train),
    );
    doc.insert(
        "kl_generated_smoothed".to_string(),
        serde_json::json!(eval.kl_generated_smoothed),
    );
    doc.insert(
        "kl_uniform_vs_train".to_string(),
        serde_json::json!(eval.kl_uniform_vs_train),
    );
    let json_path = out.join("evaluate.json");
    let json = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
    write_file(&json_path, (json + "\n").as_bytes())?;
    manifest.artifact(&json_path);
    manifest.metric("fid_proxy", eval.fid_proxy);
    manifest.metric("fid_noise_baseline", eval.fid_noise_baseline);
    manifest.metric("kl_generated_vs_train", eval.kl_generated_vs_train);
    manifest.metric("kl_uniform_vs_train", eval.kl_uniform_vs_train);
    manifest.timing("total");
    manifest.write(&out)?;
    Ok(())
}

/// `run-all`: kernels → forward → train → generate → evaluate.
pub fn run_all(cfg: &ExperimentConfig) -> Result<()> {
    cmd_kernels(cfg)?;
    cmd_forward(cfg)?;
    cmd_train(cfg)?;
    cmd_generate(cfg)?;
    cmd_evaluate(cfg)
}

// One sweep cell: the full pipeline in its own subdirectory with a derived
// seed; returns the Fréchet proxy.
fn sweep_cell(base: &ExperimentConfig, omega: f64, rep: usize) -> Result<f64> {
    let mut cell = base.clone();
    cell.mode = Mode::Qsw;
    cell.omega = omega;
    cell.seed = derive_seed(base.seed, &[tag("sweep"), omega.to_bits(), rep as u64]);
    cell.out = base.out.join("sweep").join(format!("omega{omega}_rep{rep}"));
    cmd_kernels_inner(&cell, false)?;
    cmd_forward(&cell)?;
    cmd_train(&cell)?;
    cmd_generate(&cell)?;
    cmd_evaluate(&cell)?;
    let json = read_file(&cell.out.join("evaluate.json"), "evaluate")?;
    let doc: serde_json::Value =
        serde_json::from_slice(&json).map_err(|e| CliError::Io(e.to_string()))?;
    doc.get("fid_proxy")
        .and_then(|v| v.as_f64())
        .ok_or_else(|| CliError::Io("evaluate.json lacks fid_proxy".into()))
}

/// `sweep`: run the pipeline per (omega, repetition) with derived seeds and
/// aggregate box statistics.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.repetitions < 5 {
        return Err(CliError::Config(format!(
            "box statistics need at least 5 repetitions, got {}",
            cfg.repetitions
        )));
    }
    if cfg.mode == Mode::DtqwNoisy {
        return Err(CliError::Config(
            "sweep varies omega and applies to qsw dynamics".into(),
        ));
    }
    let out = ensure_out(cfg)?;
    let mut manifest = ManifestBuilder::new("sweep", cfg);

    let cells: Vec<(f64, usize)> = cfg
        .omega_list
        .iter()
        .flat_map(|&w| (0..cfg.repetitions).map(move |r| (w, r)))
        .collect();
    let workers = if cfg.serial {
        1
    } else if cfg.workers > 0 {
        cfg.workers
    } else {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
            .min(2)
    };

    let mut results: Vec<(f64, usize, f64)> = Vec::with_capacity(cells.len());
    if workers <= 1 {
        for &(w, r) in &cells {
            results.push((w, r, sweep_cell(cfg, w, r)?));
        }
    } else {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let collected = std::sync::Mutex::new(Vec::new());
        let errors = std::sync::Mutex::new(Vec::new());
        std::thread::scope(|scope| {
            for _ in 0..workers.min(cells.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if i >= cells.len() {
                        break;
                    }
                    let (w, r) = cells[i];
                    match sweep_cell(cfg, w, r) {
                        Ok(fid) => collected.lock().unwrap().push((w, r, fid)),
                        Err(e) => errors.lock().unwrap().push(e),
                    }
                });
            }
        });
        if let Some(e) = errors.into_inner().unwrap().into_iter().next() {
            return Err(e);
        }
        results = collected.into_inner().unwrap();
    }
    results.sort_by(|a, b| a.partial_cmp(b).unwrap());
    manifest.timing("cells");

    // Data rows, then one mean summary row per omega; the full box
    // statistics go to sweep_stats.json.
    let mut csv = String::from("omega,repetition,fid\n");
    for (w, r, fid) in &results {
        writeln!(csv, "{w},{r},{fid}").unwrap();
    }
    let mut stats: BTreeMap<String, BoxStats> = BTreeMap::new();
    for &w in &cfg.omega_list {
        let fids: Vec<f64> = results
            .iter()
            .filter(|(rw, _, _)| rw == &w)
            .map(|(_, _, fid)| *fid)
            .collect();
        let s = boxplot_stats(&fids)?;
        writeln!(csv, "{w},mean,{}", s.mean).unwrap();
        stats.insert(w.to_string(), s);
    }
    let csv_path = out.join("sweep.csv");
    write_file(&csv_path, csv.as_bytes())?;
    manifest.artifact(&csv_path);

    let stats_path = out.join("sweep_stats.json");
    let json = serde_json::to_string_pretty(&stats).map_err(|e| CliError::Io(e.to_string()))?;
    write_file(&stats_path, (json + "\n").as_bytes())?;
    manifest.artifact(&stats_path);
    manifest.timing("total");
    manifest.write(&out)?;
    Ok(())
}
