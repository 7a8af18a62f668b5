use super::*;
use crate::tensor::Graph;

// ---- preprocessing -------------------------------------------------------

#[test]
fn sar_log_minmax_endpoints() {
    let e = std::f64::consts::E;
    let raw = Tensor::new(vec![1, 1, 3], vec![1.0, e, e * e]).unwrap();
    let p = preprocess_sar(&raw).unwrap();
    assert!((p.data()[0] - 0.0).abs() < 1e-12);
    assert!((p.data()[1] - 0.5).abs() < 1e-12);
    assert!((p.data()[2] - 1.0).abs() < 1e-12);
}

#[test]
fn sar_constant_channel_maps_to_zeros() {
    let raw = Tensor::new(vec![2, 1, 2], vec![3.0, 3.0, 1.0, 2.0]).unwrap();
    let p = preprocess_sar(&raw).unwrap();
    assert_eq!(&p.data()[..2], &[0.0, 0.0]);
    assert!(p.data()[2] == 0.0 && p.data()[3] == 1.0);
}

#[test]
fn sar_zero_amplitude_is_clamped_to_floor() {
    let raw = Tensor::new(vec![1, 1, 2], vec![0.0, 1.0]).unwrap();
    let p = preprocess_sar(&raw).unwrap();
    // 0 is treated as 1e-6; after min-max the two points span [0, 1]
    assert_eq!(p.data(), &[0.0, 1.0]);
    let treated = preprocess_sar(&Tensor::new(vec![1, 1, 2], vec![1e-6, 1.0]).unwrap()).unwrap();
    assert_eq!(p, treated);
}

#[test]
fn optical_scaling_and_clamp() {
    let raw = Tensor::new(vec![1, 1, 4], vec![0.0, 10_000.0, 5_000.0, 12_000.0]).unwrap();
    let p = preprocess_optical(&raw).unwrap();
    assert_eq!(p.data(), &[0.0, 1.0, 0.5, 1.0]);
}

#[test]
fn preprocessed_values_stay_in_unit_range() {
    let gen = GenConfig::default();
    for (i, s) in make_dataset(&gen, 22, 3)
        .unwrap()
        .samples
        .iter()
        .enumerate()
    {
        for t in [&s.pair.sar, &s.pair.opt] {
            assert!(
                t.data().iter().all(|&v| (0.0..=1.0).contains(&v)),
                "sample {i} out of range"
            );
        }
    }
}

// ---- misalignment --------------------------------------------------------

fn matched_offset(scene: &Scene, gen: &GenConfig, pair: &PatchPair) -> Option<(isize, isize)> {
    let center = ((gen.canvas - gen.patch) / 2) as isize;
    let max = (gen.canvas - gen.patch) as isize;
    for dy in -center..=(max - center) {
        for dx in -center..=(max - center) {
            let c = Tensor::from_fn(vec![gen.sar_channels, gen.patch, gen.patch], |i| {
                let hw = gen.patch * gen.patch;
                let ch = i / hw;
                let y = (i / gen.patch) % gen.patch;
                let x = i % gen.patch;
                scene.sar.data()[ch * gen.canvas * gen.canvas
                    + ((center + dy) as usize + y) * gen.canvas
                    + (center + dx) as usize
                    + x]
            });
            if preprocess_sar(&c).unwrap().cast::<f32>() == pair.sar {
                return Some((dy, dx));
            }
        }
    }
    None
}

#[test]
fn misalign_offset_magnitudes() {
    let gen = GenConfig::default().zero_noise();
    let scene = synth_scene(&SceneSpec {
        class_id: 1,
        seed: 42,
        gen: &gen,
    })
    .unwrap();
    for (frac, expect) in [(0.0, 0isize), (0.3, 5), (0.5, 8)] {
        let mut r = crate::rng::stream(7, "crop", 0);
        let pair = misalign(&scene, &gen, frac, &mut r).unwrap();
        let (dy, dx) = matched_offset(&scene, &gen, &pair).expect("crop must come from canvas");
        let magnitude = dy.abs().max(dx.abs());
        assert_eq!(magnitude, expect, "frac {frac}");
        if frac == 0.0 {
            assert_eq!((dy, dx), (0, 0));
        }
        assert_eq!(pair.offset_frac, frac as f32);
    }
}

#[test]
fn misalign_zero_equals_stored_pipeline_exactly() {
    let gen = GenConfig::default();
    let ds = make_dataset(&gen, 5, 11).unwrap();
    for s in &ds.samples {
        let mut r = crate::rng::stream(999, "whatever", 1);
        let class = s.pair.label.unwrap();
        let re = render_pair(&gen, class, s.seed, 0.0, &mut r).unwrap();
        assert_eq!(re.sar, s.pair.sar);
        assert_eq!(re.opt, s.pair.opt);
    }
}

#[test]
fn misalign_rejects_out_of_range_fraction() {
    let gen = GenConfig::default();
    let scene = synth_scene(&SceneSpec {
        class_id: 0,
        seed: 1,
        gen: &gen,
    })
    .unwrap();
    let mut r = crate::rng::stream(0, "crop", 0);
    assert!(misalign(&scene, &gen, 0.6, &mut r).is_err());
    assert!(misalign(&scene, &gen, -0.1, &mut r).is_err());
}

// ---- few-shot splits -----------------------------------------------------

#[test]
fn few_shot_split_counts_and_determinism() {
    let gen = GenConfig::default();
    let ds = make_dataset(&gen, 11 * 25, 5).unwrap();
    let (labeled, rest) = few_shot_split(&ds, 20, 3).unwrap();
    assert_eq!(labeled.len(), 220);
    assert_eq!(labeled.len() + rest.len(), ds.len());
    for class in 0..11 {
        let n = labeled
            .samples
            .iter()
            .filter(|s| s.pair.label == Some(class))
            .count();
        assert_eq!(n, 20);
    }
    let (labeled2, _) = few_shot_split(&ds, 20, 3).unwrap();
    let ids: Vec<u64> = labeled.samples.iter().map(|s| s.id).collect();
    let ids2: Vec<u64> = labeled2.samples.iter().map(|s| s.id).collect();
    assert_eq!(ids, ids2);

    // k=5 is also a valid grid point
    let (l5, _) = few_shot_split(&ds, 5, 3).unwrap();
    assert_eq!(l5.len(), 55);
}

#[test]
fn few_shot_split_is_disjoint_and_complete() {
    let gen = GenConfig {
        classes: 3,
        ..GenConfig::default()
    };
    let ds = make_dataset(&gen, 12, 1).unwrap();
    let (labeled, rest) = few_shot_split(&ds, 2, 9).unwrap();
    let mut ids: Vec<u64> = labeled
        .samples
        .iter()
        .chain(rest.samples.iter())
        .map(|s| s.id)
        .collect();
    ids.sort_unstable();
    let expected: Vec<u64> = (0..12).collect();
    assert_eq!(ids, expected);
}

#[test]
fn few_shot_split_names_deficient_class() {
    let gen = GenConfig {
        classes: 3,
        ..GenConfig::default()
    };
    // class 2 appears twice in 8 round-robin samples
    let ds = make_dataset(&gen, 8, 1).unwrap();
    match few_shot_split(&ds, 3, 0) {
        Err(crate::error::Error::Data(msg)) => assert!(msg.contains("class 2"), "{msg}"),
        other => panic!("expected Data error, got {other:?}"),
    }
}

// ---- dataset files -------------------------------------------------------

#[test]
fn dataset_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let gen = GenConfig::default();
    let ds = make_dataset(&gen, 9, 21).unwrap();
    save_dataset(&ds, dir.path()).unwrap();
    let loaded = load_dataset(dir.path()).unwrap();
    assert_eq!(loaded.gen, ds.gen);
    assert_eq!(loaded.len(), ds.len());
    for (a, b) in ds.samples.iter().zip(&loaded.samples) {
        assert_eq!(a.id, b.id);
        assert_eq!(a.seed, b.seed);
        assert_eq!(a.pair, b.pair);
    }
    // saving the loaded dataset reproduces the files byte for byte
    let dir2 = tempfile::tempdir().unwrap();
    save_dataset(&loaded, dir2.path()).unwrap();
    for f in ["manifest.txt", "sar.bin", "opt.bin"] {
        assert_eq!(
            std::fs::read(dir.path().join(f)).unwrap(),
            std::fs::read(dir2.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn truncated_bin_reports_byte_position() {
    let dir = tempfile::tempdir().unwrap();
    let ds = make_dataset(&GenConfig::default(), 3, 2).unwrap();
    save_dataset(&ds, dir.path()).unwrap();
    let sar = dir.path().join("sar.bin");
    let bytes = std::fs::read(&sar).unwrap();
    std::fs::write(&sar, &bytes[..bytes.len() - 10]).unwrap();
    match load_dataset(dir.path()) {
        Err(crate::error::Error::Parse { pos, .. }) => assert!(pos.starts_with("byte ")),
        other => panic!("expected Parse error, got {other:?}"),
    }
}

#[test]
fn manifest_record_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let ds = make_dataset(&GenConfig::default(), 3, 2).unwrap();
    save_dataset(&ds, dir.path()).unwrap();
    // drop one manifest record; bins now hold one sample too many
    let mpath = dir.path().join("manifest.txt");
    let text = std::fs::read_to_string(&mpath).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.pop();
    std::fs::write(&mpath, lines.join("\n") + "\n").unwrap();
    assert!(matches!(
        load_dataset(dir.path()),
        Err(crate::error::Error::Parse { .. })
    ));
}

#[test]
fn empty_dataset_is_valid() {
    let dir = tempfile::tempdir().unwrap();
    let ds = make_dataset(&GenConfig::default(), 0, 0).unwrap();
    save_dataset(&ds, dir.path()).unwrap();
    let loaded = load_dataset(dir.path()).unwrap();
    assert!(loaded.is_empty());
}

#[test]
fn generation_is_deterministic_in_the_master_seed() {
    let gen = GenConfig::default();
    let a = make_dataset(&gen, 6, 77).unwrap();
    let b = make_dataset(&gen, 6, 77).unwrap();
    for (x, y) in a.samples.iter().zip(&b.samples) {
        assert_eq!(x.pair, y.pair);
    }
}

// ---- separability floor ----------------------------------------------------

/// Mean value of every channel of both patches: the 12 features used by the
/// separability probe.
fn band_means(pair: &PatchPair) -> Vec<f64> {
    let mut out = Vec::with_capacity(12);
    for t in [&pair.sar, &pair.opt] {
        let ch = t.shape()[0];
        let hw = t.shape()[1] * t.shape()[2];
        for c in 0..ch {
            let s: f64 = t.data()[c * hw..(c + 1) * hw]
                .iter()
                .map(|&v| v as f64)
                .sum();
            out.push(s / hw as f64);
        }
    }
    out
}

#[test]
fn zero_noise_band_means_separate_classes_linearly() {
    // multinomial logistic probe on per-channel means; > 90% accuracy is the
    // sanity floor that makes the training experiments meaningful
    let gen = GenConfig::default().zero_noise();
    let ds = make_dataset(&gen, 11 * 30, 123).unwrap();
    let n = ds.len();
    let feat_dim = 13; // 12 band means + bias column
    let mut feats = Tensor::<f64>::zeros(vec![n, feat_dim]);
    let mut labels = Vec::with_capacity(n);
    for (i, s) in ds.samples.iter().enumerate() {
        let f = band_means(&s.pair);
        for (j, &v) in f.iter().enumerate() {
            feats.data_mut()[i * feat_dim + j] = v;
        }
        feats.data_mut()[i * feat_dim + 12] = 1.0;
        labels.push(s.pair.label.unwrap());
    }

    // full-batch gradient descent on softmax regression
    let mut w = Tensor::<f64>::zeros(vec![feat_dim, 11]);
    for _ in 0..600 {
        let mut g = Graph::new();
        let x = g.input(feats.clone());
        let wv = g.param(w.clone());
        let logits = g.matmul(x, wv).unwrap();
        let loss = g.cross_entropy(logits, &labels).unwrap();
        g.backward(loss).unwrap();
        let grad = g.grad(wv).unwrap();
        for (p, &d) in w.data_mut().iter_mut().zip(grad.data()) {
            *p -= 4.0 * d;
        }
    }

    let mut g = Graph::new();
    let x = g.input(feats);
    let wv = g.input(w);
    let logits = g.matmul(x, wv).unwrap();
    let mut correct = 0usize;
    for i in 0..n {
        let row = g.value(logits).row(i);
        let pred = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        if pred == labels[i] {
            correct += 1;
        }
    }
    let acc = correct as f64 / n as f64;
    assert!(acc > 0.9, "probe accuracy {acc:.3} below the 0.9 floor");
}
