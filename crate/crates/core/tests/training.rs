mod common;

use common::{gradient_check, random_input, random_net, tiny_net};
use edgespike::data::{DatasetManifest, Sample};
use edgespike::encoding::EncoderConfig;
use edgespike::hardware::{ChipModel, MapperConfig};
use edgespike::presets;
use edgespike::seed::derive;
use edgespike::snn::{run_network, LayerSpec, NetworkTopology, NeuronParams};
use edgespike::training::{
    backward, evaluate, forward_with_trace, init_weights, revive_stuck, train, TrainConfig, TrainOutcome,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn blobs(n: usize) -> DatasetManifest {
    presets::dataset("blobs2", n, 2, derive(3, "dataset")).unwrap()
}

fn fresh(mut net: NetworkTopology, data: &[Sample], enc: &EncoderConfig) -> NetworkTopology {
    init_weights(&mut net, 1.0, 11);
    revive_stuck(&mut net, &data[..data.len().min(64)], enc, 1.0, 12, 128).unwrap();
    net
}

fn fit(net: NetworkTopology, data: &[Sample], cfg: &TrainConfig) -> TrainOutcome {
    let enc = EncoderConfig::default();
    train(net, data, &[], &ChipModel::desk16(), &enc, &MapperConfig::default(), cfg).unwrap()
}

fn mlp(data: &DatasetManifest) -> NetworkTopology {
    let enc = EncoderConfig::default();
    let net = presets::desk_mlp(data.n_features, data.n_classes, enc.timesteps, NeuronParams::default()).unwrap();
    fresh(net, &data.samples, &enc)
}

#[test]
fn single_layer_separates_two_blobs() {
    let data = blobs(200);
    let enc = EncoderConfig::default();
    let net = NetworkTopology::new(
        vec![LayerSpec::dense(16, 2, vec![0.0; 32], NeuronParams::default()).unwrap()],
        enc.timesteps,
    )
    .unwrap();
    let out = fit(fresh(net, &data.samples, &enc), &data.samples, &TrainConfig::default());
    let acc = evaluate(&out.net, &data.samples, &enc).unwrap().accuracy;
    assert!(acc >= 0.95, "train accuracy {acc}");
}

#[test]
fn task_loss_falls() {
    let data = blobs(200);
    let cfg = TrainConfig { epochs: 8, ..Default::default() };
    let h = fit(mlp(&data), &data.samples, &cfg).history;
    let mut tail: Vec<f64> = h.epochs[5..].iter().map(|r| r.task_loss).collect();
    tail.sort_by(f64::total_cmp);
    assert!(tail[1] < h.epochs[0].task_loss, "{:?}", h.to_csv());
}

#[test]
fn repeatable_and_thread_independent() {
    let data = blobs(96);
    let cfg = TrainConfig { epochs: 3, ..Default::default() };
    let a = fit(mlp(&data), &data.samples, &cfg);
    let b = fit(mlp(&data), &data.samples, &cfg);
    let c = fit(mlp(&data), &data.samples, &TrainConfig { parallel: false, ..cfg });
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn hardware_weight_leaves_the_weights_alone() {
    let data = blobs(96);
    let base = TrainConfig { epochs: 3, ..Default::default() };
    let a = fit(mlp(&data), &data.samples, &base);
    let b = fit(mlp(&data), &data.samples, &TrainConfig { lambda_hw: 1000.0, ..base });
    assert_eq!(a.net, b.net);
    assert_eq!(a.mapping, b.mapping);
    for (x, y) in a.history.epochs.iter().zip(&b.history.epochs) {
        assert_eq!(x.task_loss, y.task_loss);
        assert!(y.hw_loss <= x.hw_loss);
        assert!((y.total_loss - (y.task_loss + 1000.0 * y.hw_loss)).abs() < 1e-9 * y.total_loss.max(1.0));
    }
}

#[test]
fn reported_accuracy_matches_simulator() {
    let data = blobs(64);
    let enc = EncoderConfig::default();
    let net = mlp(&data);
    let ev = evaluate(&net, &data.samples, &enc).unwrap();
    let cfg = TrainConfig::default();
    let mut hits = 0;
    for (k, s) in data.samples.iter().enumerate() {
        let e = EncoderConfig { seed: edgespike::seed::derive_indexed(enc.seed, &[k as u64]), ..enc };
        let input = edgespike::encoding::encode(&s.features, &e).unwrap();
        let tr = forward_with_trace(&net, &input, &cfg).unwrap();
        let (out, _) = run_network(&net, &input).unwrap();
        assert_eq!(tr.output_train(), out);
        hits += (edgespike::snn::classify(&out).class == s.label) as usize;
    }
    assert_eq!(ev.accuracy, hits as f64 / data.samples.len() as f64);
}

#[test]
fn one_step_gradient_matches_finite_differences() {
    let p = NeuronParams::new(0.9, 1.0).unwrap();
    let net = NetworkTopology::new(vec![LayerSpec::dense(2, 2, vec![0.8, 0.3, -0.2, 0.9], p).unwrap()], 1).unwrap();
    let mut input = edgespike::snn::SpikeTrain::new(2, 1);
    input.set(0, 0, true);
    input.set(0, 1, true);
    let (worst, checked) = gradient_check(&net, &input, 0, 1e-6);
    assert_eq!(checked, 4);
    assert!(worst <= 1e-4, "{worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn surrogate_gradient_matches_finite_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = tiny_net(&mut rng);
        let input = random_input(&mut rng, net.n_in(), net.n_timesteps());
        let target = rng.gen_range(0..net.n_out());
        let (worst, _) = gradient_check(&net, &input, target, 1e-6);
        prop_assert!(worst <= 1e-4, "relative error {}", worst);
    }

    #[test]
    fn hard_trace_is_the_simulator(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_net(&mut rng, 32, 10);
        let input = random_input(&mut rng, net.n_in(), net.n_timesteps());
        let tr = forward_with_trace(&net, &input, &TrainConfig::default()).unwrap();
        let (out, _) = run_network(&net, &input).unwrap();
        prop_assert_eq!(tr.output_train(), out);
    }

    #[test]
    fn silent_network_input_gives_zero_gradient(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = tiny_net(&mut rng);
        let input = edgespike::snn::SpikeTrain::new(net.n_in(), net.n_timesteps());
        let tr = forward_with_trace(&net, &input, &TrainConfig::default()).unwrap();
        let (_, g) = backward(&net, &tr, 0).unwrap();
        prop_assert_eq!(g.max_abs(), 0.0);
    }
}
