use lmcat::data::{few_shot_split, make_dataset, GenConfig};
use lmcat::model::{sample_inputs, Model, ModelConfig};
use lmcat::train::{finetune, pretrain, StageConfig};
use lmcat::tensor::Tensor;

fn feature_stats(model: &Model<f32>, data: &lmcat::data::Dataset, n: usize) -> (Vec<Tensor<f32>>, f64) {
    let feats: Vec<Tensor<f32>> = data.samples[..n]
        .iter()
        .map(|s| {
            let inp = sample_inputs::<f32>(model.config(), &s.pair).unwrap();
            model.features(&inp).unwrap()
        })
        .collect();
    let d = feats[0].numel();
    let mut mean = vec![0.0f64; d];
    for f in &feats {
        for (m, &v) in mean.iter_mut().zip(f.data()) {
            *m += v as f64 / n as f64;
        }
    }
    let mut var = 0.0f64;
    for f in &feats {
        for (j, &v) in f.data().iter().enumerate() {
            var += (v as f64 - mean[j]).powi(2);
        }
    }
    (feats, (var / (n * d) as f64).sqrt())
}

#[test]
fn debug_features() {
    let seed = 1u64;
    let gen = GenConfig::default();
    let pool = make_dataset(&gen, 110, 2000).unwrap();
    let (labeled, _) = few_shot_split(&pool, 10, seed).unwrap();

    let random = Model::<f32>::init(ModelConfig::default(), seed).unwrap();
    let (_, std_rand) = feature_stats(&random, &labeled, 60);
    println!("random backbone: across-sample feature std = {std_rand:.6}");

    // quick head-only training at several lrs on the random backbone
    for (lr, epochs) in [(1e-3, 12), (0.02, 40), (0.1, 60)] {
        let mut m = random.clone();
        let cfg = StageConfig::finetune(seed)
            .with_epochs(epochs)
            .with_batch(32)
            .with_lr(lr);
        let rep = finetune(&mut m, &labeled, &cfg).unwrap();
        println!(
            "random backbone head lr={lr} epochs={epochs}: train acc {:?} loss {:?}",
            rep.epochs.last().unwrap().accuracy,
            rep.epochs.last().unwrap().loss,
        );
    }

    // short pretraining, then the same probes
    let pretrain_data = make_dataset(&gen, 120, 1000).unwrap();
    for (lr, epochs) in [(3e-4, 3), (1e-3, 6)] {
        let mut model = Model::<f32>::init(ModelConfig::default(), seed).unwrap();
        let pcfg = StageConfig::pretrain(seed)
            .with_epochs(epochs)
            .with_batch(24)
            .with_lr(lr);
        let rep = pretrain(&mut model, &pretrain_data, &pcfg).unwrap();
        let (_, std_pre) = feature_stats(&model, &labeled, 60);
        println!(
            "pretrained lr={lr} epochs={epochs}: losses {:?} feature std {std_pre:.6}",
            rep.losses()
        );
        let mut m = model.clone();
        let cfg = StageConfig::finetune(seed).with_epochs(40).with_batch(32).with_lr(0.02);
        let rep = finetune(&mut m, &labeled, &cfg).unwrap();
        println!(
            "   head lr=0.02 epochs=40: train acc {:?}",
            rep.epochs.last().unwrap().accuracy
        );
    }
}
