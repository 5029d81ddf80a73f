// Scratch probe: per-epoch losses for a passing and a failing seed.
use soar_data::{make_one_shot_split, synth_dataset, SynthConfig};
use soar_eval::{one_shot_eval, MatchMetric};
use soar_model::{Model, ModelConfig};
use soar_train::{train, TrainConfig};

#[test]
#[ignore]
fn loss_curves() {
    let ds = synth_dataset(&SynthConfig {
        classes: 8,
        samples_per_class: 20,
        cameras: 1,
        frames: 30,
        joints: 17,
        seed: 0,
    })
    .unwrap()
    .dataset;
    let base: Vec<u32> = (0..6).collect();
    let novel: Vec<u32> = vec![6, 7];

    for seed in [1u64, 3] {
        let split = make_one_shot_split(&ds, &base, &novel, seed).unwrap();
        let mut model = Model::<f32>::init(ModelConfig::micro(6), seed).unwrap();
        let cfg = TrainConfig {
            lr: 0.03,
            epochs: 30,
            batch_size: 32,
            warmup_epochs: 5,
            decenter_epochs: 5,
            w_tpl: 2.0,
            seed,
            ..TrainConfig::default()
        };
        let out = train(&mut model, &ds, &split, &cfg, None).unwrap();
        for e in out.log.epochs.iter().step_by(3) {
            eprintln!(
                "seed {seed} epoch {:2} tpl {:.4} cls {:.4} lsc {:.4}",
                e.epoch, e.l_tpl, e.l_cls, e.l_lsc
            );
        }
        let acc = one_shot_eval(&model, &ds, &split, MatchMetric::Cosine).unwrap();
        eprintln!("seed {seed} final acc {:.3}", acc.metrics.accuracy);
    }
}
