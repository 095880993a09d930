use std::path::PathBuf;

use dabnet::core::metrics::LabelMap;
use dabnet::core::net::{init_random_weights, NetworkSpec, WeightStore};
use dabnet::core::{Shape, Tensor};
use dabnet::io::{self, dabw, netpbm, tns};
use dabnet::Error;
use proptest::prelude::*;
use sha2::{Digest, Sha256};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn fixture_checksums() {
    let sums = std::fs::read_to_string(fixture("SHA256SUMS")).unwrap();
    let mut checked = 0;
    for line in sums.lines() {
        let (sum, name) = line.split_once("  ").unwrap();
        let bytes = std::fs::read(fixture(name)).unwrap();
        assert_eq!(sha256_hex(&bytes), sum, "{name}");
        checked += 1;
    }
    assert_eq!(checked, 4);
}

#[test]
fn golden_weight_file() {
    let bytes = std::fs::read(fixture("small.dabw")).unwrap();
    let store = dabw::decode_weights(&bytes).unwrap();
    assert_eq!(store.len(), 4);
    let w = store.get("conv.weight").unwrap();
    assert_eq!(w.shape(), Shape::new(2, 1, 1, 3));
    assert_eq!(w.data(), &[0.5, -1.25, 2.0, 0.0, -0.0, 3.75]);
    assert!(w.data()[4].is_sign_negative());
    assert_eq!(store.get("conv.bias").unwrap().shape(), Shape::new(2, 1, 1, 1));
    assert_eq!(store.get("head.weight").unwrap().shape(), Shape::new(4, 2, 1, 1));
    assert_eq!(store.vector("bn.gamma", 3).unwrap(), &[1.0, 1.0, 0.25]);
    assert_eq!(dabw::encode_weights(&store).unwrap(), bytes);
}

#[test]
fn golden_label_and_image_files() {
    let bytes = std::fs::read(fixture("labels.pgm")).unwrap();
    let labels = io::load_labels_pgm(fixture("labels.pgm")).unwrap();
    assert_eq!(labels.dims(), (1, 3, 4));
    assert_eq!(labels.get(0, 0, 3), 255);
    assert_eq!(labels.get(0, 1, 0), 18);
    assert_eq!(netpbm::encode_labels_pgm(&labels).unwrap(), bytes);

    let image = io::load_image_ppm(fixture("commented.ppm")).unwrap();
    assert_eq!(image.shape(), Shape::new(1, 3, 2, 2));
    // pixel order: red, green, blue, (51, 102, 204)
    assert_eq!(image.plane(0, 0), &[1.0, 0.0, 0.0, 0.2]);
    assert_eq!(image.plane(0, 1), &[0.0, 1.0, 0.0, 0.4]);
    assert_eq!(image.plane(0, 2), &[0.0, 0.0, 1.0, 0.8]);

    let t = io::load_tensor(fixture("small.tns")).unwrap();
    assert_eq!(t.shape(), Shape::new(1, 2, 2, 2));
    assert_eq!(t.data(), &[-3.5, -2.5, -1.5, -0.5, 0.5, 1.5, 2.5, 3.5]);
    assert_eq!(tns::encode_tensor(&t).unwrap(), std::fs::read(fixture("small.tns")).unwrap());
}

#[test]
fn random_network_weights_round_trip() {
    let spec = NetworkSpec::default();
    let store = init_random_weights(&spec, 7).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.dabw");
    io::save_weights(&store, &path).unwrap();
    let back = io::load_weights(&path, Some(&spec)).unwrap();
    assert_eq!(back, store);
    let bits = |s: &WeightStore| -> Vec<u32> { s.iter().flat_map(|(_, t)| t.data().iter().map(|v| v.to_bits())).collect() };
    assert_eq!(bits(&back), bits(&store));
}

#[test]
fn load_checks_completeness_against_spec() {
    let spec = NetworkSpec::default();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("small.dabw");
    std::fs::copy(fixture("small.dabw"), &path).unwrap();
    assert!(io::load_weights(&path, None).is_ok());
    let err = io::load_weights(&path, Some(&spec)).unwrap_err();
    assert!(matches!(err, Error::Core(dabnet::core::Error::WeightStore(_))), "{err:?}");
}

#[test]
fn missing_file_names_the_path() {
    let err = io::load_weights("/no/such/dir/w.dabw", None).unwrap_err();
    assert!(err.to_string().contains("/no/such/dir/w.dabw"), "{err}");
}

#[test]
fn every_truncation_is_reported() {
    let bytes = std::fs::read(fixture("small.dabw")).unwrap();
    for cut in 0..bytes.len() {
        match dabw::decode_weights(&bytes[..cut]) {
            Err(Error::Truncated { offset, needed }) => assert!(offset <= cut && needed > 0),
            other => panic!("cut at {cut}: {other:?}"),
        }
    }
}

fn store_strategy() -> impl Strategy<Value = WeightStore> {
    let record = (
        "[a-z][a-z0-9_.]{0,12}",
        (1usize..4, 1usize..4, 1usize..3, 1usize..3),
        any::<u64>(),
    );
    prop::collection::vec(record, 0..8).prop_map(|records| {
        let mut store = WeightStore::new();
        for (name, (n, c, h, w), seed) in records {
            let shape = Shape::new(n, c, h, w);
            // arbitrary bit patterns, NaNs and infinities included
            let mut state = seed;
            let data = (0..shape.checked_len().unwrap())
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    f32::from_bits((state >> 32) as u32)
                })
                .collect();
            store.insert(name, Tensor::from_vec(shape, data).unwrap());
        }
        store
    })
}

proptest! {
    #[test]
    fn weight_store_round_trip_is_bit_exact(store in store_strategy()) {
        let bytes = dabw::encode_weights(&store).unwrap();
        let back = dabw::decode_weights(&bytes).unwrap();
        prop_assert_eq!(back.len(), store.len());
        for ((a, ta), (b, tb)) in back.iter().zip(store.iter()) {
            prop_assert_eq!(a, b);
            prop_assert_eq!(ta.shape(), tb.shape());
            let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(ta), bits(tb));
        }
        prop_assert_eq!(dabw::encode_weights(&back).unwrap(), bytes);
    }

    #[test]
    fn label_map_round_trip(h in 1usize..20, w in 1usize..20, seed in any::<u64>()) {
        let mut rng = dabnet::core::Rng::new(seed);
        let data: Vec<u8> = (0..h * w)
            .map(|_| match rng.below(20) { 19 => 255, v => v as u8 })
            .collect();
        let labels = LabelMap::from_vec(1, h, w, data).unwrap();
        let back = netpbm::decode_labels_pgm(&netpbm::encode_labels_pgm(&labels).unwrap()).unwrap();
        prop_assert_eq!(back, labels);
    }

    #[test]
    fn image_bytes_round_trip(h in 1usize..8, w in 1usize..8, raster in prop::collection::vec(any::<u8>(), 3 * 64)) {
        let mut bytes = format!("P6\n{w} {h}\n255\n").into_bytes();
        bytes.extend_from_slice(&raster[..3 * h * w]);
        let image = netpbm::decode_image_ppm(&bytes).unwrap();
        prop_assert_eq!(netpbm::encode_image_ppm(&image).unwrap(), bytes);
    }

    #[test]
    fn tensor_dump_round_trip(n in 1usize..3, c in 1usize..4, h in 1usize..5, w in 1usize..5, seed in any::<u64>()) {
        let t = Tensor::uniform(Shape::new(n, c, h, w), &mut dabnet::core::Rng::new(seed), -1e6, 1e6).unwrap();
        prop_assert_eq!(tns::decode_tensor(&tns::encode_tensor(&t).unwrap()).unwrap(), t);
    }
}
