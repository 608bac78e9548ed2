//! End-to-end forward-chain behavior over a realistic image set: the pixel
//! distribution after T steps must sit on the uniform prior for both kernel
//! families.

use qwdm::data::{quantize, synthetic_dataset};
use qwdm::diffusion::{
    forward_sample_dataset, level_distribution, q_schedule_from_kernels, CategoricalImage,
};
use qwdm::dtqw::{noisy_walk_kernels, NoiseSchedule};
use qwdm::graphs::cycle_graph;
use qwdm::lindblad::{build_generator, step_kernel, AmplitudeConvention, WalkKernel};
use qwdm::metrics::kl_divergence;

fn digit_zero_images(count: usize) -> Vec<CategoricalImage> {
    let ds = synthetic_dataset(0, count, 7).unwrap();
    quantize(&ds, 8).unwrap()
}

fn qsw_kernels(t_steps: usize) -> Vec<WalkKernel> {
    // Sqrt amplitudes make the incoherent rates equal the classical hop
    // probabilities, which is what drives the chain onto the uniform prior
    // within T = 20 steps of τ = 0.6.
    let g = cycle_graph(8).unwrap();
    let l = build_generator(&g, 1.0, AmplitudeConvention::Sqrt).unwrap();
    let kernel = step_kernel(&l, 0.6, 64).unwrap();
    (1..=t_steps).map(|t| kernel.clone().with_step(t)).collect()
}

#[test]
fn qsw_forward_reaches_uniform_prior() {
    let images = digit_zero_images(1000);
    let sched = q_schedule_from_kernels(&qsw_kernels(20)).unwrap();
    let trajectories = forward_sample_dataset(&images, &sched, 404).unwrap();
    let finals: Vec<CategoricalImage> =
        trajectories.iter().map(|tr| tr.step(20).clone()).collect();
    let hist = level_distribution(&finals).unwrap();
    let kl = kl_divergence(&hist, &[0.125; 8]).unwrap();
    assert!(kl.nats < 0.01, "KL at T = {:.4e}", kl.nats);
}

#[test]
fn noisy_dtqw_forward_reaches_uniform_prior() {
    let images = digit_zero_images(1000);
    let kernels = noisy_walk_kernels(8, &NoiseSchedule::default()).unwrap();
    let sched = q_schedule_from_kernels(&kernels).unwrap();
    let trajectories = forward_sample_dataset(&images, &sched, 405).unwrap();
    let finals: Vec<CategoricalImage> =
        trajectories.iter().map(|tr| tr.step(20).clone()).collect();
    let hist = level_distribution(&finals).unwrap();
    let kl = kl_divergence(&hist, &[0.125; 8]).unwrap();
    assert!(kl.nats < 0.01, "KL at T = {:.4e}", kl.nats);
}
