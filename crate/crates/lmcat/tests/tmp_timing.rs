use lmcat::data::{make_dataset, GenConfig};
use lmcat::model::{sample_inputs, Model, ModelConfig};
use std::time::Instant;

#[test]
fn timing_probe() {
    let gen = GenConfig::default();
    let t0 = Instant::now();
    let ds = make_dataset(&gen, 64, 1).unwrap();
    println!("synth 64 samples: {:?}", t0.elapsed());

    let model = Model::<f32>::init(ModelConfig::default(), 0).unwrap();
    let inputs = sample_inputs::<f32>(model.config(), &ds.samples[0].pair).unwrap();

    let t0 = Instant::now();
    for _ in 0..8 {
        let _ = model.forward(&inputs).unwrap();
    }
    println!("fwd (need_logits): {:?}/sample", t0.elapsed() / 8);

    let t0 = Instant::now();
    for _ in 0..8 {
        let mut bm = model.bind();
        let out = bm.forward(&inputs, false).unwrap();
        bm.graph.backward(out.align_loss).unwrap();
        let g: Vec<_> = bm
            .param_vars
            .iter()
            .map(|&v| bm.graph.grad_or_zeros(v))
            .collect();
        std::hint::black_box(g);
    }
    println!("fwd+bwd align: {:?}/sample", t0.elapsed() / 8);
}
