use onedconv_core::nn::*;
use onedconv_core::onedconv::*;
use onedconv_core::tensor::Tensor;
use std::time::Instant;

fn timeit<F: FnMut()>(name: &str, iters: usize, mut f: F) {
    // warmup
    f();
    let t0 = Instant::now();
    for _ in 0..iters {
        f();
    }
    println!("{:<18} {:>9.3} ms/iter", name, t0.elapsed().as_secs_f64() * 1e3 / iters as f64);
}

fn main() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);

    // tiny-cnn conv2 shape: 32x(16->32)@16x16
    let spec = ConvSpec::new(16, 32, 3).with_bias(false);
    let x = Tensor::from_vec(
        [32, 16, 16, 16],
        (0..32 * 16 * 256).map(|_| rng.gen_range(0.0..1.0)).collect(),
    )
    .unwrap();
    let wts = ConvWeights::init(&spec, &mut rng);
    let mut sw = ShapeConvWeights::zeros(&spec);
    for v in sw.kernel.data_mut() {
        *v = rng.gen_range(-0.02..0.02);
    }
    for v in &mut sw.bias {
        *v = 0.3;
    }

    let y = conv2d_forward(&x, &spec, &wts).unwrap();
    let gy = Tensor::filled(y.shape(), 0.3);

    timeit("conv2 fwd", 20, || {
        conv2d_forward(&x, &spec, &wts).unwrap();
    });
    timeit("conv2 bwd", 20, || {
        conv2d_backward(&x, &spec, &wts, &gy).unwrap();
    });
    let (_, cache) = onedconv_forward(&x, &spec, &wts, &sw).unwrap();
    timeit("oned2 fwd", 20, || {
        onedconv_forward(&x, &spec, &wts, &sw).unwrap();
    });
    timeit("oned2 bwd", 20, || {
        onedconv_backward(&cache, &wts, &sw, &gy).unwrap();
    });

    // conv1 shape: 32x(1->16)@32x32
    let spec1 = ConvSpec::new(1, 16, 3).with_bias(false);
    let x1 = Tensor::from_vec(
        [32, 1, 32, 32],
        (0..32 * 1024).map(|_| rng.gen_range(0.0..1.0)).collect(),
    )
    .unwrap();
    let w1 = ConvWeights::init(&spec1, &mut rng);
    let mut sw1 = ShapeConvWeights::zeros(&spec1);
    sw1.bias = vec![0.3, 0.3];
    let y1 = conv2d_forward(&x1, &spec1, &w1).unwrap();
    let gy1 = Tensor::filled(y1.shape(), 0.3);
    timeit("conv1 fwd", 20, || {
        conv2d_forward(&x1, &spec1, &w1).unwrap();
    });
    timeit("conv1 bwd", 20, || {
        conv2d_backward(&x1, &spec1, &w1, &gy1).unwrap();
    });
    let (_, cache1) = onedconv_forward(&x1, &spec1, &w1, &sw1).unwrap();
    timeit("oned1 fwd", 20, || {
        onedconv_forward(&x1, &spec1, &w1, &sw1).unwrap();
    });
    timeit("oned1 bwd", 20, || {
        onedconv_backward(&cache1, &w1, &sw1, &gy1).unwrap();
    });

    // bn on conv1 output
    let mut bn = BatchNormParams::new(16);
    let xb = Tensor::filled([32, 16, 32, 32], 0.5);
    timeit("bn fwd", 20, || {
        batchnorm_forward(&xb, &mut bn, true).unwrap();
    });
    let (_, bc) = batchnorm_forward(&xb, &mut bn, true).unwrap();
    let gb = Tensor::filled([32, 16, 32, 32], 0.1);
    timeit("bn bwd", 20, || {
        batchnorm_backward(&bc, &gb).unwrap();
    });
    timeit("relu+clone", 20, || {
        let _ = xb.relu();
        let _ = xb.clone();
    });
    let mut fcw = FcWeights::init(2048, 10, &mut rng);
    fcw.bias.fill(0.0);
    let xf = Tensor::filled([32, 32, 8, 8], 0.5);
    timeit("fc fwd", 20, || {
        fc_forward(&xf, &fcw).unwrap();
    });
    timeit("maxpool", 20, || {
        maxpool_forward(&xb, 2, 2).unwrap();
    });
}
