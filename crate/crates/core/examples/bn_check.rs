use mdforge::nn::{gradient_check, LayerSpec, ModelSpec, Tensor};

fn main() {
    // Smooth path: no ReLU/MaxPool kinks, so finite differences are clean.
    let smooth = ModelSpec {
        input_size: 6,
        layers: vec![
            LayerSpec::Conv { filters: 3, kernel: 3, stride: 1, padding: 1 },
            LayerSpec::BatchNorm,
            LayerSpec::Flatten,
            LayerSpec::Dense { units: 3 },
            LayerSpec::Softmax,
        ],
    };
    let data: Vec<f64> = (0..4 * 36).map(|i| ((i * 37 % 101) as f64) / 101.0).collect();
    let batch = Tensor::from_vec(vec![4, 1, 6, 6], data).unwrap();
    for seed in [1u64, 5, 9] {
        let err = gradient_check(&smooth, &batch, &[0, 1, 2, 0], seed).unwrap();
        println!("smooth conv+bn+dense seed {seed}: max rel error {err:.3e}");
    }

    let kinky = ModelSpec {
        input_size: 8,
        layers: vec![
            LayerSpec::Conv { filters: 4, kernel: 3, stride: 1, padding: 1 },
            LayerSpec::BatchNorm,
            LayerSpec::ReLU,
            LayerSpec::MaxPool { window: 2, stride: 2 },
            LayerSpec::Flatten,
            LayerSpec::Dense { units: 3 },
            LayerSpec::Softmax,
        ],
    };
    let data: Vec<f64> = (0..3 * 64).map(|i| ((i * 37 % 101) as f64) / 101.0).collect();
    let batch = Tensor::from_vec(vec![3, 1, 8, 8], data).unwrap();
    for seed in [1u64, 5, 9] {
        let err = gradient_check(&kinky, &batch, &[0, 1, 2], seed).unwrap();
        println!("conv+bn+relu+pool seed {seed}: max rel error {err:.3e}");
    }
}
