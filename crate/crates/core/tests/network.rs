use dabnet_core::analysis::{self, LayerKind};
use dabnet_core::net::{
    dab_module_forward, dabnet_forward, dabnet_forward_traced, init_random_weights, predict_labels,
    required_weights, DabModuleSpec, NetworkSpec, WeightStore,
};
use dabnet_core::ops::ConvSpec;
use dabnet_core::{Rng, Shape, Tensor};

fn image(h: usize, w: usize, seed: u64) -> Tensor {
    Tensor::uniform(Shape::new(1, 3, h, w), &mut Rng::new(seed), 0.0, 1.0).unwrap()
}

fn shape_of<'a>(trace: &'a [(String, Shape)], name: &str) -> Shape {
    trace
        .iter()
        .find(|(n, _)| n == name)
        .unwrap_or_else(|| panic!("no layer {name}"))
        .1
}

fn last_module(trace: &[(String, Shape)], block: &str) -> Shape {
    trace
        .iter()
        .rev()
        .find(|(n, _)| n.starts_with(block) && n.ends_with(".residual"))
        .unwrap()
        .1
}

#[test]
fn stage_shapes_follow_the_structure_table() {
    let spec = NetworkSpec::default();
    let weights = init_random_weights(&spec, 0).unwrap();
    let (logits, trace) = dabnet_forward_traced(&image(512, 1024, 0), &spec, &weights).unwrap();
    assert_eq!(shape_of(&trace, "stage.2.prelu"), Shape::new(1, 32, 256, 512));
    assert_eq!(shape_of(&trace, "stage.4.prelu"), Shape::new(1, 64, 128, 256));
    assert_eq!(last_module(&trace, "block1"), Shape::new(1, 64, 128, 256));
    assert_eq!(shape_of(&trace, "stage.6.prelu"), Shape::new(1, 128, 64, 128));
    assert_eq!(last_module(&trace, "block2"), Shape::new(1, 128, 64, 128));
    assert_eq!(shape_of(&trace, "stage.8.conv"), Shape::new(1, 19, 64, 128));
    assert_eq!(logits.shape(), Shape::new(1, 19, 512, 1024));
}

#[test]
fn traced_shapes_agree_with_static_analysis() {
    let spec = NetworkSpec::default();
    let weights = init_random_weights(&spec, 3).unwrap();
    let (_, trace) = dabnet_forward_traced(&image(32, 64, 1), &spec, &weights).unwrap();
    let report = analysis::analyze(&spec, 32, 64).unwrap();
    let from_report: Vec<(String, Shape)> = report.layers.iter().map(|l| (l.name.clone(), l.output)).collect();
    assert_eq!(trace, from_report);
}

#[test]
fn zero_network_predicts_class_zero() {
    let spec = NetworkSpec::default();
    let mut weights = init_random_weights(&spec, 0).unwrap();
    let names: Vec<String> = weights.iter().map(|(n, _)| n.to_owned()).collect();
    for name in names {
        if name.ends_with(".weight") || name.ends_with(".bias") {
            let shape = weights.get(&name).unwrap().shape();
            weights.insert(name, Tensor::zeros(shape));
        }
    }
    let logits = dabnet_forward(&image(16, 32, 2), &spec, &weights).unwrap();
    assert!(logits.data().iter().all(|&v| v == 0.0));
    let labels = predict_labels(&logits).unwrap();
    assert!(labels.data().iter().all(|&l| l == 0));
}

#[test]
fn forward_is_deterministic() {
    let spec = NetworkSpec::default();
    let w = init_random_weights(&spec, 11).unwrap();
    let x = image(24, 40, 4);
    let a = dabnet_forward(&x, &spec, &w).unwrap();
    let b = dabnet_forward(&x, &spec, &init_random_weights(&spec, 11).unwrap()).unwrap();
    assert_eq!(a, b);
    let c = dabnet_forward(&x, &spec, &init_random_weights(&spec, 12).unwrap()).unwrap();
    assert_ne!(a, c);
}

#[test]
fn batch_items_are_independent() {
    let spec = NetworkSpec::default();
    let w = init_random_weights(&spec, 5).unwrap();
    let (x0, x1) = (image(16, 16, 7), image(16, 16, 8));
    let both = Tensor::concat_channels(&[&x0, &x1]).unwrap();
    // reinterpret (1, 6, h, w) as (2, 3, h, w)
    let batch = Tensor::from_vec(Shape::new(2, 3, 16, 16), both.into_vec()).unwrap();
    let y = dabnet_forward(&batch, &spec, &w).unwrap();
    let y0 = dabnet_forward(&x0, &spec, &w).unwrap();
    let y1 = dabnet_forward(&x1, &spec, &w).unwrap();
    let half = y0.len();
    assert_eq!(&y.data()[..half], y0.data());
    assert_eq!(&y.data()[half..], y1.data());
}

#[test]
fn input_validation() {
    let spec = NetworkSpec::default();
    let w = init_random_weights(&spec, 0).unwrap();
    for shape in [Shape::new(1, 3, 12, 16), Shape::new(1, 1, 16, 16), Shape::new(1, 3, 0, 8)] {
        let err = dabnet_forward(&Tensor::zeros(shape), &spec, &w).unwrap_err();
        assert!(matches!(err, dabnet_core::Error::InputShape { .. }), "{err:?}");
    }
    let mut incomplete = w.clone();
    let mut only = WeightStore::new();
    for (name, t) in w.iter().skip(1) {
        only.insert(name, t.clone());
    }
    assert!(matches!(
        dabnet_forward(&image(8, 8, 0), &spec, &only),
        Err(dabnet_core::Error::WeightStore(_))
    ));
    incomplete.insert("stage.0.conv.weight", Tensor::zeros(Shape::new(32, 3, 1, 1)));
    assert!(matches!(
        dabnet_forward(&image(8, 8, 0), &spec, &incomplete),
        Err(dabnet_core::Error::WeightStore(_))
    ));
}

#[test]
fn module_with_zero_convs_is_identity() {
    for (c, d) in [(64, 2), (128, 16), (8, 1)] {
        let m = DabModuleSpec::new(c, d).unwrap();
        let mut store = WeightStore::new();
        let mut rng = Rng::new(c as u64);
        let spec = NetworkSpec {
            block1_channels: c,
            block1: vec![d],
            ..NetworkSpec::default()
        };
        for (name, shape) in required_weights(&spec).unwrap() {
            if !name.starts_with("block1.mod0.") {
                continue;
            }
            let t = match name.rsplit('.').next().unwrap() {
                "weight" => Tensor::zeros(shape),
                "gamma" | "var" => Tensor::full(shape, 1.0).unwrap(),
                "slope" => Tensor::uniform(shape, &mut rng, 0.0, 1.0).unwrap(),
                _ => Tensor::zeros(shape),
            };
            store.insert(name, t);
        }
        let x = Tensor::uniform(Shape::new(1, c, 9, 13), &mut rng, -3.0, 3.0).unwrap();
        let y = dab_module_forward(&x, &m, &store, "block1.mod0").unwrap();
        assert_eq!(y.max_abs_diff(&x), 0.0);
    }
}

#[test]
fn parameter_total_in_published_band_and_matches_store() {
    let spec = NetworkSpec::default();
    let total = analysis::count_params(&spec).unwrap().total_params();
    assert!((730_000..=790_000).contains(&total), "{total}");
    let store = init_random_weights(&spec, 0).unwrap();
    assert_eq!(store.learnable_count(), total);
    // hand tally of the default configuration
    assert_eq!(total, 756_662);
}

#[test]
fn parameter_examples() {
    let report = analysis::count_params(&NetworkSpec::default()).unwrap();
    assert_eq!(report.layer("stage.0.conv").unwrap().params, 864);
    assert_eq!(report.layer("block1.mod0.local_v.conv").unwrap().params, 96);
    assert_eq!(ConvSpec::depthwise(32, (3, 1)).param_count(), 96);
    // BN counts gamma and beta, PReLU one slope per channel
    assert_eq!(report.layer("stage.0.bn").unwrap().params, 64);
    assert_eq!(report.layer("stage.0.prelu").unwrap().params, 32);
    assert_eq!(report.layer("stage.8.conv").unwrap().params, 259 * 19 + 19);
}

/// Per-layer MACs written out from the architecture by hand.
fn spreadsheet_macs(h: u64, w: u64) -> u64 {
    let (p0, p1, p2) = (h * w / 4, h * w / 16, h * w / 64);
    let init = p0 * 32 * 3 * 9 + 2 * p0 * 32 * 32 * 9;
    let down1 = p1 * 29 * 35 * 9;
    let module = |c: u64| c / 2 * c * 9 + 4 * (c / 2) * 3 + c * (c / 2);
    let block1 = 3 * p1 * module(64);
    let down2 = p2 * 128 * 131 * 9;
    let block2 = 6 * p2 * module(128);
    let head = p2 * 19 * 259;
    init + down1 + block1 + down2 + block2 + head
}

#[test]
fn mac_total_matches_independent_tally() {
    let spec = NetworkSpec::default();
    for (h, w) in [(512, 1024), (256, 512), (64, 64)] {
        let total = analysis::count_macs(&spec, h, w).unwrap().total_macs();
        assert_eq!(total, spreadsheet_macs(h as u64, w as u64), "{h}x{w}");
    }
    assert_eq!(analysis::count_macs(&spec, 512, 1024).unwrap().total_macs(), 10_220_380_160);
}

#[test]
fn macs_scale_quadratically_per_layer() {
    let spec = NetworkSpec::default();
    let small = analysis::count_macs(&spec, 256, 512).unwrap();
    let mid = analysis::count_macs(&spec, 512, 1024).unwrap();
    let large = analysis::count_macs(&spec, 1024, 2048).unwrap();
    assert_eq!(mid.total_macs(), 4 * small.total_macs());
    assert_eq!(large.total_macs(), 16 * small.total_macs());
    for (a, b) in small.layers.iter().zip(&mid.layers) {
        assert_eq!(b.macs, 4 * a.macs, "{}", a.name);
    }
}

#[test]
fn asymmetric_pair_costs_two_thirds() {
    for (c, h, w) in [(32, 128, 256), (64, 64, 128), (7, 5, 3)] {
        let full = ConvSpec::depthwise(c, (3, 3)).padding((1, 1)).macs(h, w);
        let pair = ConvSpec::depthwise(c, (3, 1)).padding((1, 0)).macs(h, w)
            + ConvSpec::depthwise(c, (1, 3)).padding((0, 1)).macs(h, w);
        assert_eq!(full, 9 * (c * h * w) as u64);
        assert_eq!(3 * pair, 2 * full);
    }
}

#[test]
fn receptive_field_examples() {
    let rf = analysis::receptive_field(&NetworkSpec::default()).unwrap();
    let at = |name: &str| rf.iter().find(|(n, _, _)| n == name).map(|&(_, r, j)| (r, j)).unwrap();
    assert_eq!(at("stage.0.conv"), (3, 2));
    assert_eq!(at("stage.1.conv"), (7, 2));
    assert_eq!(at("stage.2.conv"), (11, 2));
    // shortcuts branch off the raw image and rejoin at the concat
    assert_eq!(at("stage.3.shortcut"), (2, 2));
    assert_eq!(at("stage.7.shortcut"), (8, 8));
    // parallel branches (shortcuts, conv/pool, local/context) are not a
    // chain, so check the trunk: stage outputs, concats, module outputs
    let trunk = |n: &str| {
        n.ends_with(".residual") || n.ends_with(".concat") || n.ends_with(".prelu") && !n.contains(".mod")
            || n == "stage.8.conv" || n == "stage.9.upsample"
    };
    let chain: Vec<_> = rf.iter().filter(|(n, _, _)| trunk(n)).cloned().collect();
    assert_eq!(chain.len(), 9 + 6 + 8 + 2);
    for pair in chain.windows(2) {
        assert!(pair[1].1 >= pair[0].1, "{} -> {}", pair[0].0, pair[1].0);
        assert!(pair[1].2 >= pair[0].2);
    }
    let block_end = |b: &str| rf.iter().rev().find(|(n, _, _)| n.starts_with(b)).unwrap().1;
    assert!(block_end("block2") > block_end("block1"));
}

#[test]
fn dilated_context_grows_receptive_field_by_rate() {
    let report = analysis::count_params(&NetworkSpec::default()).unwrap();
    // the d = 16 module in block 2 works at jump 8
    let before = report.layer("block2.mod4.reduce.prelu").unwrap();
    let after = report.layer("block2.mod4.context_v.conv").unwrap();
    assert_eq!(before.jump, (8, 8));
    assert_eq!(after.rf.0, before.rf.0 + 2 * 16 * 8);
    assert_eq!(after.rf.1, before.rf.1);
}

#[test]
fn layer_kinds_cover_the_graph() {
    let report = analysis::count_params(&NetworkSpec::default()).unwrap();
    let count = |k: LayerKind| report.layers.iter().filter(|l| l.kind == k).count();
    assert_eq!(count(LayerKind::MaxPool), 1);
    assert_eq!(count(LayerKind::AvgPool), 3);
    assert_eq!(count(LayerKind::Upsample), 1);
    // 9 DAB modules, one branch sum and one residual each
    assert_eq!(count(LayerKind::Add), 18);
}

#[test]
fn configurable_dilations_and_classes() {
    let spec = NetworkSpec {
        num_classes: 5,
        block1: vec![1],
        block2: vec![2, 4],
        ..NetworkSpec::default()
    };
    let w = init_random_weights(&spec, 0).unwrap();
    let y = dabnet_forward(&image(16, 24, 0), &spec, &w).unwrap();
    assert_eq!(y.shape(), Shape::new(1, 5, 16, 24));
    assert_eq!(
        analysis::count_params(&spec).unwrap().total_params(),
        w.learnable_count()
    );
}

#[test]
fn multiples_of_eight_accepted() {
    let spec = NetworkSpec::default();
    assert!(spec.check_input(Shape::new(1, 3, 360, 480)).is_ok());
    assert!(spec.check_input(Shape::new(1, 3, 361, 480)).is_err());
}
