use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sacnet::data::{synth_dataset, Sample, SynthConfig};
use sacnet::net::{total_loss, NetConfig, SaliencyNet};
use sacnet::train::{train_loop, Optimizer, OptimizerConfig, Preset, TrainConfig, TrainObserver, UpdateRecord};
use sacnet::{Error, ParamStore, Result};

fn micro_data(count: usize) -> Vec<Sample> {
    synth_dataset(&SynthConfig {
        size: 12,
        count,
        seed: 3,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn config(preset: Preset, iterations: usize, flip: bool) -> TrainConfig {
    let mut optimizer = preset.config();
    optimizer.set_max_iterations(iterations);
    TrainConfig {
        optimizer,
        flip,
        checkpoint_every: 0,
        ..TrainConfig::default()
    }
}

#[derive(Default)]
struct Recorder {
    updates: Vec<UpdateRecord>,
    checkpoints: Vec<usize>,
}

impl TrainObserver for Recorder {
    fn on_update(&mut self, record: &UpdateRecord, _: &ParamStore<f32>) -> Result<()> {
        self.updates.push(record.clone());
        Ok(())
    }

    fn on_checkpoint(&mut self, update: usize, _: &ParamStore<f32>) -> Result<()> {
        self.checkpoints.push(update);
        Ok(())
    }
}

#[test]
fn ten_iterations_make_one_update() {
    let (net, mut params) = SaliencyNet::init::<f32>(&NetConfig::micro(), 0).unwrap();
    let out = train_loop(&net, &mut params, &micro_data(4), &config(Preset::Adam, 10, true), 1, &mut ()).unwrap();
    assert_eq!(out.trace.len(), 1);
    assert_eq!(out.optimizer.steps(), 1);
    assert_eq!(out.iterations, 10);
}

#[test]
fn partial_window_still_updates() {
    let (net, mut params) = SaliencyNet::init::<f32>(&NetConfig::micro(), 0).unwrap();
    let out = train_loop(&net, &mut params, &micro_data(4), &config(Preset::Sgd, 25, true), 1, &mut ()).unwrap();
    assert_eq!(out.trace.iter().map(|r| r.update).collect::<Vec<_>>(), [1, 2, 3]);
}

#[test]
fn zero_learning_rate_keeps_weights() {
    for preset in [Preset::Sgd, Preset::Adam] {
        let (net, mut params) = SaliencyNet::init::<f32>(&NetConfig::micro(), 2).unwrap();
        let before = params.flatten();
        let mut cfg = config(preset, 30, true);
        cfg.optimizer.set_lr(0.0);
        train_loop(&net, &mut params, &micro_data(5), &cfg, 0, &mut ()).unwrap();
        assert_eq!(params.flatten(), before);
    }
}

#[test]
fn accumulated_update_equals_summed_gradient_update() {
    let data = micro_data(10);
    let seed = 11;
    let cfg = config(Preset::Sgd, 10, false);
    let (net, initial) = SaliencyNet::init::<f32>(&NetConfig::micro(), 4).unwrap();

    let mut trained = initial.clone();
    train_loop(&net, &mut trained, &data, &cfg, seed, &mut ()).unwrap();

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    order.shuffle(&mut rng);
    let mut sum = initial.zeros_like();
    for i in order {
        let (pred, vjp) = net.forward(&initial, &data[i].image).unwrap();
        let (_, lv) = total_loss(&pred.logits, &data[i].mask).unwrap();
        let mut g = initial.zeros_like();
        net.backward(&vjp, &lv.backward(), &mut g);
        sum.accumulate(&g).unwrap();
    }
    let mut manual = initial.clone();
    let mut opt = Optimizer::new(cfg.optimizer.clone(), &initial).unwrap();
    opt.step(&mut manual, &sum, cfg.optimizer.lr_at(0)).unwrap();
    assert_eq!(manual.flatten(), trained.flatten());
}

#[test]
fn runs_are_bitwise_reproducible() {
    let data = micro_data(6);
    let cfg = config(Preset::Adam, 40, true);
    let run = |seed| {
        let (net, mut params) = SaliencyNet::init::<f32>(&NetConfig::micro(), 8).unwrap();
        let out = train_loop(&net, &mut params, &data, &cfg, seed, &mut ()).unwrap();
        let trace: Vec<(usize, u64, u64)> =
            out.trace.iter().map(|r| (r.update, r.loss.to_bits(), r.lr.to_bits())).collect();
        (trace, params.flatten())
    };
    let (a, b, c) = (run(5), run(5), run(6));
    assert_eq!(a, b);
    assert_ne!(a.0, c.0);
}

#[test]
fn observer_sees_updates_and_checkpoints() {
    let (net, mut params) = SaliencyNet::init::<f32>(&NetConfig::micro(), 0).unwrap();
    let mut cfg = config(Preset::Sgd, 50, true);
    cfg.checkpoint_every = 2;
    let mut rec = Recorder::default();
    let out = train_loop(&net, &mut params, &micro_data(3), &cfg, 0, &mut rec).unwrap();
    assert_eq!(rec.updates, out.trace);
    assert_eq!(rec.checkpoints, [2, 4]);
    assert!(rec.updates.iter().all(|r| r.loss > 0.0 && r.lr == 1e-3));
}

#[test]
fn non_finite_input_aborts_with_iteration() {
    let (net, mut params) = SaliencyNet::init::<f32>(&NetConfig::micro(), 0).unwrap();
    let mut data = micro_data(1);
    data[0].image.data_mut()[0] = f32::NAN;
    let err = train_loop(&net, &mut params, &data, &config(Preset::Adam, 10, false), 0, &mut ()).unwrap_err();
    assert!(matches!(err, Error::NonFiniteLoss(1)), "{err}");
}

#[test]
fn empty_dataset_and_bad_config_are_rejected() {
    let (net, mut params) = SaliencyNet::init::<f32>(&NetConfig::micro(), 0).unwrap();
    assert!(train_loop(&net, &mut params, &[], &config(Preset::Adam, 10, false), 0, &mut ()).is_err());
    let mut cfg = config(Preset::Adam, 10, false);
    cfg.accumulate = 0;
    assert!(train_loop(&net, &mut params, &micro_data(1), &cfg, 0, &mut ()).is_err());
}

#[test]
fn optimizer_config_is_tagged() {
    let cfg: OptimizerConfig = serde_json::from_str(
        r#"{"kind":"sgd","lr":0.01,"momentum":0.9,"weight_decay":0.0,"lr_drop_at":null,"max_iterations":5}"#,
    )
    .unwrap();
    assert_eq!(cfg.max_iterations(), 5);
    assert!(serde_json::from_str::<TrainConfig>(r#"{"bogus": 1}"#).is_err());
}
