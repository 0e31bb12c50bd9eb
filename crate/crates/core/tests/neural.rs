use sparse_radar::neural::refcnn::covariance_tensor;
use sparse_radar::neural::*;
use sparse_radar::features::reference_cnn_input;
use sparse_radar::Cplx;

fn tiny_input(c: usize, h: usize, w: usize, seed: f64) -> Tensor<f64> {
    let data = (0..c * h * w).map(|i| ((i as f64 + seed) * 0.61).sin() + 0.3 * ((i as f64) * 0.13).cos()).collect();
    Tensor::from_vec(data, c, h, w).unwrap()
}

fn sparse_target(n: usize, every: usize) -> Vec<f64> {
    (0..n).map(|i| if i % every == 0 { 1.0 } else { 0.0 }).collect()
}

fn unet(output: OutputActivation, seed: u64) -> UNet<f64> {
    let cfg = NetworkConfig {
        depth: 2,
        base_channels: 8,
        input_channels: 5,
        input_height: 16,
        input_width: 16,
        use_attention: true,
        output,
    };
    UNet::new(cfg, seed).unwrap()
}

#[test]
fn unet_regression_gradients() {
    let mut net = unet(OutputActivation::None, 1);
    let x = tiny_input(5, 16, 16, 0.0);
    let y: Vec<f64> = sparse_target(256, 7).iter().map(|v| 10.0 * v).collect();
    for alpha in [0.0, 0.1] {
        let r = grad_check(&mut net, &x, &y, &LossConfig::regression(alpha), &GradCheckConfig::default()).unwrap();
        for l in &r.layers {
            println!("{l:?}");
            assert!(l.checked >= 200.min(l.total - l.skipped), "{l:?}");
        }
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }
}

#[test]
fn unet_bce_gradients() {
    let mut net = unet(OutputActivation::Sigmoid, 2);
    let x = tiny_input(5, 16, 16, 3.0);
    let y = sparse_target(256, 5);
    let r = grad_check(&mut net, &x, &y, &LossConfig::classification(), &GradCheckConfig::default()).unwrap();
    for l in &r.layers {
        println!("{l:?}");
    }
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}

#[test]
fn refcnn_gradients() {
    let cfg = RefCnnConfig { n_elements: 6, channels: 3, n_out: 12, output: OutputActivation::Sigmoid };
    let mut net = RefCnn::<f64>::new(cfg, 4).unwrap();
    let snap: Vec<Cplx<f64>> = (0..6).map(|i| Cplx::from_polar(1.0 + 0.1 * i as f64, 0.7 * i as f64)).collect();
    let x = covariance_tensor(&reference_cnn_input(&snap));
    let y = sparse_target(12, 4);
    let r = grad_check(&mut net, &x, &y, &LossConfig::classification(), &GradCheckConfig::default()).unwrap();
    for l in &r.layers {
        println!("{l:?}");
    }
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}

fn toy_samples(n: usize) -> Vec<Sample<Tensor<f32>, f32>> {
    (0..n)
        .map(|i| {
            let input: Tensor<f32> = tiny_input(5, 16, 16, 7.0 * i as f64).cast();
            let target = input.plane(0).iter().map(|v| if *v > 0.9 { 1.0 } else { 0.0 }).collect();
            Sample { input, target }
        })
        .collect()
}

fn small_unet_f32(seed: u64) -> UNet<f32> {
    let cfg = NetworkConfig {
        depth: 2,
        base_channels: 4,
        input_channels: 5,
        input_height: 16,
        input_width: 16,
        use_attention: true,
        output: OutputActivation::Sigmoid,
    };
    UNet::new(cfg, seed).unwrap()
}

#[test]
fn training_is_deterministic() {
    let data = toy_samples(6);
    let cfg = TrainConfig { epochs: 3, batch_size: 4, seed: 11, ..TrainConfig::default() };
    let run = || {
        let mut net = small_unet_f32(5);
        let report = train(&mut net, &data, &data[..2], &cfg).unwrap();
        (net.weights.flat(), report)
    };
    let (wa, ra) = run();
    let (wb, rb) = run();
    assert_eq!(wa, wb);
    assert_eq!(ra, rb);
}

#[test]
fn single_sample_is_memorised() {
    let data = toy_samples(1);
    let cfg = TrainConfig { epochs: 300, batch_size: 1, optimizer: OptimizerSpec::adam(3e-3), ..TrainConfig::default() };
    let mut net = small_unet_f32(2);
    let report = train(&mut net, &data, &[], &cfg).unwrap();
    let first = report.curve[0].train;
    let last = report.curve.last().unwrap().train;
    assert!(last < 0.1 * first, "loss {first} -> {last}");
    let out = net.predict(&data[0].input).unwrap();
    for (p, t) in out.iter().zip(&data[0].target) {
        assert!((p - t).abs() < 0.5, "{p} vs {t}");
    }
}


