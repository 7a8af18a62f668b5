use super::*;
use crate::data::make_dataset;
use crate::testutil::{tiny_gen, tiny_model_config};

#[test]
fn zero_lr_leaves_parameters_bit_identical() {
    let data = make_dataset(&tiny_gen(), 6, 1).unwrap();
    let mut model = Model::init(tiny_model_config(), 2).unwrap();
    let before: Vec<Vec<u8>> = model
        .entries()
        .iter()
        .map(|p| p.tensor.le_bytes())
        .collect();
    let cfg = StageConfig::pretrain(3)
        .with_epochs(2)
        .with_batch(3)
        .with_lr(0.0);
    // zero lr also zeroes the decoupled decay term, so nothing moves
    pretrain(&mut model, &data, &cfg).unwrap();
    let after: Vec<Vec<u8>> = model
        .entries()
        .iter()
        .map(|p| p.tensor.le_bytes())
        .collect();
    assert_eq!(before, after);
}

#[test]
fn same_seed_runs_produce_identical_curves_and_weights() {
    let data = make_dataset(&tiny_gen(), 8, 5).unwrap();
    let run = || {
        let mut model = Model::init(tiny_model_config(), 7).unwrap();
        let cfg = StageConfig::pretrain(11).with_epochs(3).with_batch(4);
        let report = pretrain(&mut model, &data, &cfg).unwrap();
        (report.losses(), hash_params(&model, |_| true))
    };
    let (la, ha) = run();
    let (lb, hb) = run();
    assert_eq!(la, lb, "loss curves must match bit for bit");
    assert_eq!(ha, hb, "weights must match bit for bit");
}

#[test]
fn finetune_freezes_the_backbone() {
    let data = make_dataset(&tiny_gen(), 9, 3).unwrap();
    let mut model = Model::init(tiny_model_config(), 1).unwrap();
    let backbone_before = hash_params(&model, |g| g.is_backbone());
    let head_before = hash_params(&model, |g| !g.is_backbone());
    let cfg = StageConfig::finetune(4).with_epochs(3).with_batch(4);
    let report = finetune(&mut model, &data, &cfg).unwrap();
    let backbone_after = hash_params(&model, |g| g.is_backbone());
    assert_eq!(backbone_before, backbone_after);
    assert_eq!(
        report.frozen_hash_before.as_deref(),
        Some(backbone_before.as_str())
    );
    assert_eq!(
        report.frozen_hash_after.as_deref(),
        Some(backbone_after.as_str())
    );
    assert_ne!(head_before, hash_params(&model, |g| !g.is_backbone()));
    assert_eq!(model.stage, crate::model::Stage::Finetuned);
    assert!(report.epochs.iter().all(|e| e.accuracy.is_some()));
}

#[test]
fn finetune_rejects_empty_or_unlabeled_sets() {
    let mut model = Model::init(tiny_model_config(), 1).unwrap();
    let empty = make_dataset(&tiny_gen(), 0, 0).unwrap();
    let cfg = StageConfig::finetune(0);
    assert!(matches!(
        finetune(&mut model, &empty, &cfg),
        Err(Error::Data(_))
    ));

    let mut unlabeled = make_dataset(&tiny_gen(), 3, 0).unwrap();
    for s in unlabeled.samples.iter_mut() {
        s.pair.label = None;
    }
    assert!(matches!(
        finetune(&mut model, &unlabeled, &cfg),
        Err(Error::Data(_))
    ));
}

#[test]
fn stage_kind_mismatch_is_rejected() {
    let data = make_dataset(&tiny_gen(), 3, 0).unwrap();
    let mut model = Model::init(tiny_model_config(), 1).unwrap();
    assert!(pretrain(&mut model, &data, &StageConfig::finetune(0)).is_err());
    assert!(finetune(&mut model, &data, &StageConfig::pretrain(0)).is_err());
}

#[test]
fn pretraining_lowers_alignment_loss_on_a_small_run() {
    let data = make_dataset(&tiny_gen(), 24, 9).unwrap();
    let mut model = Model::init(tiny_model_config(), 3).unwrap();
    let cfg = StageConfig::pretrain(5)
        .with_epochs(8)
        .with_batch(8)
        .with_lr(3e-3);
    let report = pretrain(&mut model, &data, &cfg).unwrap();
    let losses = report.losses();
    assert!(
        losses.last().unwrap() < losses.first().unwrap(),
        "alignment loss should go down: {losses:?}"
    );
    assert_eq!(model.stage, crate::model::Stage::Pretrained);
}

#[test]
fn report_csv_has_header_and_rows() {
    let data = make_dataset(&tiny_gen(), 4, 2).unwrap();
    let mut model = Model::init(tiny_model_config(), 0).unwrap();
    let cfg = StageConfig::pretrain(1).with_epochs(2).with_batch(2);
    let report = pretrain(&mut model, &data, &cfg).unwrap();
    let csv = report.to_csv();
    assert!(csv.starts_with("# run {\"stage\":\"pretrain\""));
    assert!(csv.contains("epoch,loss,lr,wall_ms,clip_events,accuracy"));
    assert_eq!(csv.lines().count(), 2 + cfg.epochs);
}

#[test]
fn supervised_full_trains_every_group() {
    let data = make_dataset(&tiny_gen(), 9, 8).unwrap();
    let mut model = Model::init(tiny_model_config(), 2).unwrap();
    let backbone_before = hash_params(&model, |g| g.is_backbone());
    let cfg = StageConfig::finetune(3).with_epochs(2).with_batch(4);
    let report = supervised_full(&mut model, &data, &cfg).unwrap();
    assert_ne!(backbone_before, hash_params(&model, |g| g.is_backbone()));
    assert!(report.epochs[0].accuracy.is_some());
}
