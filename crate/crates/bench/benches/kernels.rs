use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sacnet::net::{total_loss, NetConfig, SaliencyNet};
use sacnet::ops::{conv2d, ConvGeom};
use sacnet::sac::{attenuated_scan, Direction, SacConfig, SacModule};
use sacnet::{Initializer, ParamStore, Shape, Tensor};

fn random(shape: impl Into<Shape>, seed: u64) -> Tensor<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

fn scan(c: &mut Criterion) {
    let x = random((1, 16, 16, 16), 0);
    let beta = vec![0.1f32; 16];
    let mut g = c.benchmark_group("scan");
    for d in Direction::ALL {
        g.bench_function(d.name(), |b| b.iter(|| attenuated_scan(black_box(&x), d, 0.5, &beta).unwrap()));
    }
    let (y, vjp) = attenuated_scan(&x, Direction::Up, 0.5, &beta).unwrap();
    g.bench_function("backward", |b| b.iter(|| vjp.backward(black_box(&y))));
    g.finish();
}

fn conv(c: &mut Criterion) {
    let x = random((1, 16, 32, 32), 1);
    let k = random((16, 16, 3, 3), 2);
    let bias = Tensor::zeros((1, 16, 1, 1));
    let mut g = c.benchmark_group("conv3x3_16x32x32");
    g.bench_function("forward", |b| b.iter(|| conv2d(black_box(&x), &k, &bias, ConvGeom::same(3)).unwrap()));
    let (y, vjp) = conv2d(&x, &k, &bias, ConvGeom::same(3)).unwrap();
    g.bench_function("backward", |b| b.iter(|| vjp.backward(black_box(&y))));
    g.finish();
}

fn sac(c: &mut Criterion) {
    let cfg = SacConfig {
        width: 16,
        attention_hidden: Some(8),
        ..SacConfig::default()
    };
    let mut store = ParamStore::new();
    let m = SacModule::new(&mut store, &Initializer::new(0), "sac", &cfg).unwrap();
    let x = random((1, 16, 16, 16), 3);
    let mut g = c.benchmark_group("sac_16x16x16");
    g.bench_function("forward", |b| b.iter(|| m.forward(&store, black_box(&x)).unwrap()));
    let (y, vjp) = m.forward(&store, &x).unwrap();
    g.bench_function("backward", |b| {
        b.iter(|| {
            let mut grads = store.zeros_like();
            m.backward(&vjp, black_box(&y), &mut grads)
        })
    });
    g.finish();
}

fn net_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("train_sample_64x64");
    g.sample_size(20);
    for (name, cfg) in [("sac", NetConfig::toy()), ("fpn", NetConfig::toy().without_sac())] {
        let (net, store) = SaliencyNet::init::<f32>(&cfg, 0).unwrap();
        let x = random(net.expected_input(1), 4).map(|v| v.abs());
        let mask = random((1, 1, 64, 64), 5).map(|v| if v > 0.3 { 1.0 } else { 0.0 });
        let mut grads = store.zeros_like();
        g.bench_function(name, |b| {
            b.iter(|| {
                let (pred, vjp) = net.forward(&store, &x).unwrap();
                let (_, lv) = total_loss(&pred.logits, &mask).unwrap();
                net.backward(&vjp, &lv.backward(), &mut grads)
            })
        });
    }
    g.finish();
}

criterion_group!(benches, scan, conv, sac, net_step);
criterion_main!(benches);
