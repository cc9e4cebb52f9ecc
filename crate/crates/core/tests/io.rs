mod common;

use common::{random_input, random_net};
use edgespike::data::{DatasetManifest, Sample};
use edgespike::io::{
    dataset_to_binary, dataset_to_text, mapping_to_text, network_to_text, parse_dataset_binary, parse_dataset_text,
    parse_mapping, parse_network, parse_spikes, read_network, spikes_to_text, write_network,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

prop_compose! {
    fn dataset()(n_features in 1usize..6, n_classes in 1usize..5, n in 0usize..20)
        (rows in prop::collection::vec((prop::collection::vec(-1.0f64..=1.0, n_features), 0..n_classes), n),
         n_features in Just(n_features), n_classes in Just(n_classes)) -> DatasetManifest {
        DatasetManifest {
            n_features,
            n_classes,
            range: (-1.0, 1.0),
            samples: rows.into_iter().map(|(features, label)| Sample { features, label }).collect(),
        }
    }
}

#[test]
fn corrupt_weights_name_their_section() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let net = random_net(&mut rng, 16, 4);
    let text = network_to_text(&net).replacen("[weights 0]\n", "[weights 0]\nnot-a-number ", 1);
    let err = parse_network(&text, "net.txt").unwrap_err().to_string();
    assert!(err.contains("net.txt") && err.contains("[weights 0]"), "{err}");
    let missing = network_to_text(&net).replacen("[layer 0]", "[layer 9]", 1);
    let err = parse_network(&missing, "net.txt").unwrap_err().to_string();
    assert!(err.contains("[layer 0]"), "{err}");
}

#[test]
fn network_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("n.txt");
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let net = random_net(&mut rng, 32, 8);
    write_network(&path, &net).unwrap();
    assert_eq!(read_network(&path).unwrap(), net);
}

proptest! {
    #[test]
    fn networks_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_net(&mut rng, 32, 12);
        let text = network_to_text(&net);
        let back = parse_network(&text, "n").unwrap();
        prop_assert_eq!(network_to_text(&back), text);
        prop_assert_eq!(back, net);
    }

    #[test]
    fn datasets_round_trip(d in dataset()) {
        prop_assert_eq!(&parse_dataset_text(&dataset_to_text(&d), "d").unwrap(), &d);
        prop_assert_eq!(&parse_dataset_binary(&dataset_to_binary(&d), "d").unwrap(), &d);
    }

    #[test]
    fn spike_trains_round_trip(seed in any::<u64>(), n in 1usize..12, t in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_input(&mut rng, n, t);
        prop_assert_eq!(parse_spikes(&spikes_to_text(&s), "s").unwrap(), s);
    }

    #[test]
    fn mappings_round_trip(a in prop::collection::vec(0usize..64, 0..40)) {
        prop_assert_eq!(parse_mapping(&mapping_to_text(&a), "m").unwrap(), a);
    }

    #[test]
    fn truncated_binary_is_an_error(d in dataset(), cut in any::<prop::sample::Index>()) {
        let bytes = dataset_to_binary(&d);
        let keep = cut.index(bytes.len());
        prop_assert!(parse_dataset_binary(&bytes[..keep], "d").is_err());
    }
}
