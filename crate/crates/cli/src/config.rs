//! Experiment configuration: a flat `key = value` file with `#` comments.
//! Every key has a documented default; `config --explain` prints them all.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

/// Which dynamics produce the forward kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Continuous-time quantum stochastic walk at the configured ω.
    Qsw,
    /// Noisy discrete-time coined walk with delay-scheduled damping.
    DtqwNoisy,
    /// Purely incoherent walk: ω pinned to 1.
    Classical,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Qsw => "qsw",
            Mode::DtqwNoisy => "dtqw-noisy",
            Mode::Classical => "classical",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetSource {
    Synthetic,
    Idx,
}

/// All tunables of a run. Field defaults are the published experiment values
/// where one exists, desk-scale values otherwise.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub omega: f64,
    pub omega_list: Vec<f64>,
    pub n_nodes: usize,
    pub k: usize,
    pub t_steps: usize,
    pub tau: f64,
    pub substeps: usize,
    pub trace_substeps: usize,
    pub amplitude_convention: qwdm::lindblad::AmplitudeConvention,
    pub hamiltonian: qwdm::lindblad::HamiltonianKind,
    pub noise_c: f64,
    pub noise_dt: f64,
    pub noise_t1: f64,
    pub noise_t2: f64,
    pub shots: u64,
    pub delay_qubit_mask: Option<u32>,
    pub digit: u8,
    pub dataset_source: DatasetSource,
    pub dataset_images: Option<PathBuf>,
    pub dataset_labels: Option<PathBuf>,
    pub dataset_test_images: Option<PathBuf>,
    pub dataset_test_labels: Option<PathBuf>,
    pub combined_split: bool,
    pub synthetic_count: usize,
    pub train_images: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub objective: qwdm::denoiser::Objective,
    pub hidden: usize,
    pub resample_each_epoch: bool,
    pub generate_count: usize,
    pub eval_feature: EvalFeature,
    pub repetitions: usize,
    pub workers: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub serial: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalFeature {
    Pixels,
    Head,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Qsw,
            omega: 0.3,
            omega_list: (0..=10).map(|i| i as f64 / 10.0).collect(),
            n_nodes: 8,
            k: 8,
            t_steps: 20,
            tau: 0.6,
            substeps: 64,
            trace_substeps: 128,
            amplitude_convention: qwdm::lindblad::AmplitudeConvention::Linear,
            hamiltonian: qwdm::lindblad::HamiltonianKind::Adjacency,
            noise_c: 5e4,
            noise_dt: 5e-10,
            noise_t1: 200e-6,
            noise_t2: 150e-6,
            shots: 0,
            delay_qubit_mask: None,
            digit: 0,
            dataset_source: DatasetSource::Synthetic,
            dataset_images: None,
            dataset_labels: None,
            dataset_test_images: None,
            dataset_test_labels: None,
            combined_split: false,
            synthetic_count: 1000,
            train_images: 500,
            epochs: 200,
            batch_size: 16,
            lr: 1e-3,
            objective: qwdm::denoiser::Objective::CrossEntropy,
            hidden: 800,
            resample_each_epoch: false,
            generate_count: 500,
            eval_feature: EvalFeature::Pixels,
            repetitions: 10,
            workers: 0,
            seed: 42,
            out: PathBuf::from("out"),
            serial: false,
        }
    }
}

struct KeyDoc {
    key: &'static str,
    default: &'static str,
    doc: &'static str,
}

const KEY_DOCS: &[KeyDoc] = &[
    KeyDoc { key: "mode", default: "qsw", doc: "kernel source: qsw | dtqw-noisy | classical (classical pins omega = 1)" },
    KeyDoc { key: "omega", default: "0.3", doc: "coherent/incoherent mixing parameter in [0, 1] for qsw mode" },
    KeyDoc { key: "omega_list", default: "0,0.1,...,1", doc: "comma-separated omegas for the sweep command" },
    KeyDoc { key: "n_nodes", default: "8", doc: "cycle-graph size (one node per gray level)" },
    KeyDoc { key: "k", default: "8", doc: "pixel categories; must equal n_nodes" },
    KeyDoc { key: "t_steps", default: "20", doc: "diffusion steps T" },
    KeyDoc { key: "tau", default: "0.6", doc: "continuous evolution time per forward step" },
    KeyDoc { key: "substeps", default: "64", doc: "RK4 substeps per forward step" },
    KeyDoc { key: "trace_substeps", default: "128", doc: "RK4 substeps for the collapse-free KL trace (chained steps accumulate truncation)" },
    KeyDoc { key: "amplitude_convention", default: "linear", doc: "jump amplitudes: linear (= hop probability) | sqrt (rates reproduce the classical chain)" },
    KeyDoc { key: "hamiltonian", default: "adjacency", doc: "coherent generator: adjacency | laplacian" },
    KeyDoc { key: "noise_c", default: "5e4", doc: "delay-curve coefficient in samples" },
    KeyDoc { key: "noise_dt", default: "5e-10", doc: "seconds per delay sample" },
    KeyDoc { key: "noise_t1", default: "2e-4", doc: "relaxation time T1 in seconds (emulated hardware)" },
    KeyDoc { key: "noise_t2", default: "1.5e-4", doc: "dephasing time T2 in seconds; at most 2 T1" },
    KeyDoc { key: "shots", default: "0", doc: "multinomial shots per kernel column; 0 = exact marginals" },
    KeyDoc { key: "delay_qubit_mask", default: "all", doc: "bitmask of qubits receiving delay noise (bit 0 = coin), or 'all'" },
    KeyDoc { key: "digit", default: "0", doc: "digit class to train on" },
    KeyDoc { key: "dataset_source", default: "synthetic", doc: "synthetic | idx" },
    KeyDoc { key: "dataset_images", default: "(unset)", doc: "IDX image file path (train split)" },
    KeyDoc { key: "dataset_labels", default: "(unset)", doc: "IDX label file path (train split)" },
    KeyDoc { key: "dataset_test_images", default: "(unset)", doc: "IDX image file path (test split, used when combined_split)" },
    KeyDoc { key: "dataset_test_labels", default: "(unset)", doc: "IDX label file path (test split, used when combined_split)" },
    KeyDoc { key: "combined_split", default: "false", doc: "concatenate train and test splits before filtering" },
    KeyDoc { key: "synthetic_count", default: "1000", doc: "images rendered when dataset_source = synthetic" },
    KeyDoc { key: "train_images", default: "500", doc: "training-set size after digit filtering (desk default; the full split is also valid)" },
    KeyDoc { key: "epochs", default: "200", doc: "training epochs (desk default; 10000 at full scale)" },
    KeyDoc { key: "batch_size", default: "16", doc: "minibatch size" },
    KeyDoc { key: "lr", default: "0.001", doc: "Adam learning rate" },
    KeyDoc { key: "objective", default: "cross-entropy", doc: "training loss: cross-entropy | posterior-kl" },
    KeyDoc { key: "hidden", default: "800", doc: "width of the shared head and tail layers" },
    KeyDoc { key: "resample_each_epoch", default: "false", doc: "redraw forward trajectories every epoch instead of precomputing once" },
    KeyDoc { key: "generate_count", default: "500", doc: "images produced by the generate stage" },
    KeyDoc { key: "eval_feature", default: "pixels", doc: "Fréchet features: pixels | head (trained head activations)" },
    KeyDoc { key: "repetitions", default: "10", doc: "pipeline repetitions per omega in a sweep (at least 5)" },
    KeyDoc { key: "workers", default: "0", doc: "sweep worker threads; 0 = auto, serial mode forces 1" },
    KeyDoc { key: "seed", default: "42", doc: "master seed; stage seeds derive from it" },
    KeyDoc { key: "out", default: "out", doc: "output directory" },
];

/// Print every key with its default and meaning; with a config loaded, also
/// the current value.
pub fn explain(current: Option<&ExperimentConfig>) -> String {
    let mut s = String::from("configuration keys (key = value, '#' comments):\n");
    let current_map = current.map(|c| c.to_map());
    for kd in KEY_DOCS {
        s.push_str(&format!("  {:<22} default {:<12} {}\n", kd.key, kd.default, kd.doc));
        if let Some(map) = &current_map {
            if let Some(v) = map.get(kd.key) {
                s.push_str(&format!("  {:<22} current {v}\n", ""));
            }
        }
    }
    s
}

impl ExperimentConfig {
    /// Parse a config file and apply it over the defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
        Self::from_str_keys(&text)
    }

    pub fn from_str_keys(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| CliError::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn parse<T: std::str::FromStr>(v: &str, what: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("bad {what}: '{v}'"))
        }
        match key {
            "mode" => {
                self.mode = match value {
                    "qsw" => Mode::Qsw,
                    "dtqw-noisy" => Mode::DtqwNoisy,
                    "classical" => Mode::Classical,
                    other => return Err(format!("unknown mode '{other}'")),
                }
            }
            "omega" => self.omega = parse(value, "omega")?,
            "omega_list" => {
                self.omega_list = value
                    .split(',')
                    .map(|s| parse::<f64>(s.trim(), "omega_list entry"))
                    .collect::<std::result::Result<_, _>>()?;
            }
            "n_nodes" => self.n_nodes = parse(value, "n_nodes")?,
            "k" => self.k = parse(value, "k")?,
            "t_steps" => self.t_steps = parse(value, "t_steps")?,
            "tau" => self.tau = parse(value, "tau")?,
            "substeps" => self.substeps = parse(value, "substeps")?,
            "trace_substeps" => self.trace_substeps = parse(value, "trace_substeps")?,
            "amplitude_convention" => {
                self.amplitude_convention = match value {
                    "linear" => qwdm::lindblad::AmplitudeConvention::Linear,
                    "sqrt" => qwdm::lindblad::AmplitudeConvention::Sqrt,
                    other => return Err(format!("unknown amplitude convention '{other}'")),
                }
            }
            "hamiltonian" => {
                self.hamiltonian = match value {
                    "adjacency" => qwdm::lindblad::HamiltonianKind::Adjacency,
                    "laplacian" => qwdm::lindblad::HamiltonianKind::Laplacian,
                    other => return Err(format!("unknown hamiltonian '{other}'")),
                }
            }
            "noise_c" => self.noise_c = parse(value, "noise_c")?,
            "noise_dt" => self.noise_dt = parse(value, "noise_dt")?,
            "noise_t1" => self.noise_t1 = parse(value, "noise_t1")?,
            "noise_t2" => self.noise_t2 = parse(value, "noise_t2")?,
            "shots" => self.shots = parse(value, "shots")?,
            "delay_qubit_mask" => {
                self.delay_qubit_mask = if value == "all" {
                    None
                } else {
                    Some(parse(value, "delay_qubit_mask")?)
                }
            }
            "digit" => self.digit = parse(value, "digit")?,
            "dataset_source" => {
                self.dataset_source = match value {
                    "synthetic" => DatasetSource::Synthetic,
                    "idx" => DatasetSource::Idx,
                    other => return Err(format!("unknown dataset source '{other}'")),
                }
            }
            "dataset_images" => self.dataset_images = Some(PathBuf::from(value)),
            "dataset_labels" => self.dataset_labels = Some(PathBuf::from(value)),
            "dataset_test_images" => self.dataset_test_images = Some(PathBuf::from(value)),
            "dataset_test_labels" => self.dataset_test_labels = Some(PathBuf::from(value)),
            "combined_split" => self.combined_split = parse(value, "combined_split")?,
            "synthetic_count" => self.synthetic_count = parse(value, "synthetic_count")?,
            "train_images" => self.train_images = parse(value, "train_images")?,
            "epochs" => self.epochs = parse(value, "epochs")?,
            "batch_size" => self.batch_size = parse(value, "batch_size")?,
            "lr" => self.lr = parse(value, "lr")?,
            "objective" => {
                self.objective = match value {
                    "cross-entropy" => qwdm::denoiser::Objective::CrossEntropy,
                    "posterior-kl" => qwdm::denoiser::Objective::PosteriorKl,
                    other => return Err(format!("unknown objective '{other}'")),
                }
            }
            "hidden" => self.hidden = parse(value, "hidden")?,
            "resample_each_epoch" => self.resample_each_epoch = parse(value, "resample_each_epoch")?,
            "generate_count" => self.generate_count = parse(value, "generate_count")?,
            "eval_feature" => {
                self.eval_feature = match value {
                    "pixels" => EvalFeature::Pixels,
                    "head" => EvalFeature::Head,
                    other => return Err(format!("unknown eval feature '{other}'")),
                }
            }
            "repetitions" => self.repetitions = parse(value, "repetitions")?,
            "workers" => self.workers = parse(value, "workers")?,
            "seed" => self.seed = parse(value, "seed")?,
            "out" => self.out = PathBuf::from(value),
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.omega) {
            return Err(CliError::Config(format!("omega {} outside [0, 1]", self.omega)));
        }
        if self.k != self.n_nodes {
            return Err(CliError::Config(format!(
                "k = {} must equal n_nodes = {} (one cycle node per gray level)",
                self.k, self.n_nodes
            )));
        }
        if self.t_steps == 0 {
            return Err(CliError::Config("t_steps must be positive".into()));
        }
        if self.tau <= 0.0 || self.substeps == 0 || self.trace_substeps == 0 {
            return Err(CliError::Config("tau and substeps must be positive".into()));
        }
        if self.digit > 9 {
            return Err(CliError::Config(format!("digit {} outside 0..=9", self.digit)));
        }
        if self.dataset_source == DatasetSource::Idx
            && (self.dataset_images.is_none() || self.dataset_labels.is_none())
        {
            return Err(CliError::Config(
                "dataset_source = idx needs dataset_images and dataset_labels".into(),
            ));
        }
        if self.noise_t2 > 2.0 * self.noise_t1 {
            return Err(CliError::Config(format!(
                "noise_t2 = {} exceeds 2 * noise_t1 = {}",
                self.noise_t2,
                2.0 * self.noise_t1
            )));
        }
        Ok(())
    }

    /// The omega actually driving the kernels (classical pins 1).
    pub fn effective_omega(&self) -> f64 {
        match self.mode {
            Mode::Classical => 1.0,
            _ => self.omega,
        }
    }

    /// Flat string map (used by manifests and `config --explain`).
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("mode", self.mode.to_string());
        put("omega", self.omega.to_string());
        put(
            "omega_list",
            self.omega_list
                .iter()
                .map(|w| w.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        put("n_nodes", self.n_nodes.to_string());
        put("k", self.k.to_string());
        put("t_steps", self.t_steps.to_string());
        put("tau", self.tau.to_string());
        put("substeps", self.substeps.to_string());
        put("trace_substeps", self.trace_substeps.to_string());
        put(
            "amplitude_convention",
            match self.amplitude_convention {
                qwdm::lindblad::AmplitudeConvention::Linear => "linear".into(),
                qwdm::lindblad::AmplitudeConvention::Sqrt => "sqrt".into(),
            },
        );
        put(
            "hamiltonian",
            match self.hamiltonian {
                qwdm::lindblad::HamiltonianKind::Adjacency => "adjacency".into(),
                qwdm::lindblad::HamiltonianKind::Laplacian => "laplacian".into(),
            },
        );
        put("noise_c", self.noise_c.to_string());
        put("noise_dt", self.noise_dt.to_string());
        put("noise_t1", self.noise_t1.to_string());
        put("noise_t2", self.noise_t2.to_string());
        put("shots", self.shots.to_string());
        put(
            "delay_qubit_mask",
            self.delay_qubit_mask
                .map_or("all".to_string(), |m| m.to_string()),
        );
        put("digit", self.digit.to_string());
        put(
            "dataset_source",
            match self.dataset_source {
                DatasetSource::Synthetic => "synthetic".into(),
                DatasetSource::Idx => "idx".into(),
            },
        );
        for (k, v) in [
            ("dataset_images", &self.dataset_images),
            ("dataset_labels", &self.dataset_labels),
            ("dataset_test_images", &self.dataset_test_images),
            ("dataset_test_labels", &self.dataset_test_labels),
        ] {
            if let Some(p) = v {
                put(k, p.display().to_string());
            }
        }
        put("combined_split", self.combined_split.to_string());
        put("synthetic_count", self.synthetic_count.to_string());
        put("train_images", self.train_images.to_string());
        put("epochs", self.epochs.to_string());
        put("batch_size", self.batch_size.to_string());
        put("lr", self.lr.to_string());
        put(
            "objective",
            match self.objective {
                qwdm::denoiser::Objective::CrossEntropy => "cross-entropy".into(),
                qwdm::denoiser::Objective::PosteriorKl => "posterior-kl".into(),
            },
        );
        put("hidden", self.hidden.to_string());
        put("resample_each_epoch", self.resample_each_epoch.to_string());
        put("generate_count", self.generate_count.to_string());
        put(
            "eval_feature",
            match self.eval_feature {
                EvalFeature::Pixels => "pixels".into(),
                EvalFeature::Head => "head".into(),
            },
        );
        put("repetitions", self.repetitions.to_string());
        put("workers", self.workers.to_string());
        put("seed", self.seed.to_string());
        put("out", self.out.display().to_string());
        put("serial", self.serial.to_string());
        m
    }
}
