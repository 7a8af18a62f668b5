use lmcat::data::{few_shot_split, make_dataset, GenConfig};
use lmcat::eval::{early_fusion_baseline, evaluate, robustness_sweep};
use lmcat::model::{Model, ModelConfig};
use lmcat::train::{finetune, pretrain, supervised_full, StageConfig};
use std::time::Instant;

#[test]
fn calibrate() {
    let seed = 1u64;
    let gen = GenConfig::default();
    let pretrain_data = make_dataset(&gen, 240, 1000 + seed).unwrap();
    let pool = make_dataset(&gen, 550, 2000 + seed).unwrap();
    let test = make_dataset(&gen, 330, 3000 + seed).unwrap();

    // stage 1
    let t0 = Instant::now();
    let mut model = Model::<f32>::init(ModelConfig::default(), seed).unwrap();
    let pcfg = StageConfig::pretrain(seed).with_epochs(8).with_batch(24).with_lr(1e-3);
    let report = pretrain(&mut model, &pretrain_data, &pcfg).unwrap();
    println!("pretrain losses: {:?}", report.losses());
    println!(
        "ratio last/first: {:.3}",
        report.losses().last().unwrap() / report.losses()[0]
    );
    println!("pretrain took {:?}", t0.elapsed());

    // stage 2 on pretrained vs random backbone
    let (labeled, _) = few_shot_split(&pool, 20, seed).unwrap();
    let fcfg = StageConfig::finetune(seed).with_epochs(12).with_batch(32);

    let t0 = Instant::now();
    let mut tuned = model.clone();
    let rep = finetune(&mut tuned, &labeled, &fcfg).unwrap();
    println!(
        "finetune(pretrained) train acc: {:?}",
        rep.epochs.last().unwrap().accuracy
    );
    let (_, m_pre) = evaluate(&tuned, &test).unwrap();
    println!("pretrained OA: {:.3}", m_pre.oa);

    let mut random = Model::<f32>::init(ModelConfig::default(), seed).unwrap();
    let rep = finetune(&mut random, &labeled, &fcfg).unwrap();
    println!(
        "finetune(random) train acc: {:?}",
        rep.epochs.last().unwrap().accuracy
    );
    let (_, m_rand) = evaluate(&random, &test).unwrap();
    println!("random-backbone OA: {:.3}", m_rand.oa);
    println!("gap: {:.3}", m_pre.oa - m_rand.oa);
    println!("finetunes+evals took {:?}", t0.elapsed());

    // early fusion end-to-end
    let t0 = Instant::now();
    let mut fusion = early_fusion_baseline(&ModelConfig::default(), seed).unwrap();
    let scfg = StageConfig::finetune(seed).with_epochs(10).with_batch(32);
    let rep = supervised_full(&mut fusion, &labeled, &scfg).unwrap();
    println!(
        "fusion train acc: {:?}",
        rep.epochs.last().unwrap().accuracy
    );
    let (_, m_fus) = evaluate(&fusion, &test).unwrap();
    println!("fusion OA: {:.3} ({:?})", m_fus.oa, t0.elapsed());

    // sweeps
    let t0 = Instant::now();
    let fracs = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
    let sw_full = robustness_sweep(&tuned, &test, &fracs, seed).unwrap();
    let sw_fus = robustness_sweep(&fusion, &test, &fracs, seed).unwrap();
    println!("full sweep:   {:?}", sw_full.points);
    println!("fusion sweep: {:?}", sw_fus.points);
    println!(
        "drops: full {:.3} fusion {:.3}; full@0.3 drop {:.3}",
        sw_full.drop(),
        sw_fus.drop(),
        sw_full.points[0].1 - sw_full.oa_at(0.3).unwrap()
    );
    println!("sweeps took {:?}", t0.elapsed());
}
