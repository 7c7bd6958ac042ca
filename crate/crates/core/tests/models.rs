use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vocalsep::autodiff::{Tape, Tensor};
use vocalsep::models::{DiscriminatorConfig, MaskNetwork, MaskNetworkConfig, MultiScaleDiscriminator};

fn tiny() -> MaskNetworkConfig {
    MaskNetworkConfig { base_width: 2, residual_blocks: 1, grid: 8, upsample_widths: [4, 8] }
}

fn random_input(rng: &mut ChaCha8Rng, n: usize, grid: usize, scale: f64) -> Tensor<f64> {
    Tensor::from_fn(&[n, 1, grid, grid], |_| rng.random::<f64>() * scale)
}

/// Parameters of a conv (with optional bias) and of an instance norm, for the counts below.
fn conv(cout: usize, cin: usize, k: usize) -> usize {
    cout * cin * k * k
}

fn expected_generator_params(cfg: &MaskNetworkConfig) -> usize {
    let w = cfg.base_width;
    let norm = |c: usize| 2 * c;
    let mut total = conv(w, 1, 7) + norm(w);
    total += conv(2 * w, w, 4) + norm(2 * w);
    total += conv(4 * w, 2 * w, 4) + norm(4 * w);
    total += 4 * cfg.residual_blocks * (conv(4 * w, 4 * w, 3) + norm(4 * w));
    let [u0, u1] = cfg.upsample_widths;
    total += conv(u0, 4 * w, 5) + norm(u0);
    total += conv(u1, u0, 5) + norm(u1);
    total + conv(1, u1, 7) + 1
}

#[test]
fn parameter_counts_are_stable() {
    let full = MaskNetwork::<f32>::new(MaskNetworkConfig::default(), 0).unwrap();
    assert_eq!(full.params.scalar_count(), 11_756_481);
    assert_eq!(full.params.scalar_count(), expected_generator_params(&MaskNetworkConfig::default()));
    let toy = MaskNetwork::<f32>::new(MaskNetworkConfig::toy(), 0).unwrap();
    assert_eq!(toy.params.scalar_count(), 112_249);
    assert_eq!(toy.params.scalar_count(), expected_generator_params(&MaskNetworkConfig::toy()));
    let d = MultiScaleDiscriminator::<f32>::new(DiscriminatorConfig::toy(), 32, 0).unwrap();
    assert_eq!(d.params.scalar_count(), 21_874);
}

#[test]
fn output_shape_matches_input() {
    let net = MaskNetwork::<f64>::new(MaskNetworkConfig::toy(), 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random_input(&mut rng, 2, 32, 1.0);
    assert_eq!(net.mask_forward(&a).unwrap().shape(), &[2, 1, 32, 32]);
    assert_eq!(net.g_apply(&a).unwrap().shape(), &[2, 1, 32, 32]);
}

#[test]
fn wrong_input_shape_is_rejected() {
    let net = MaskNetwork::<f64>::new(tiny(), 0).unwrap();
    assert!(net.mask_forward(&Tensor::zeros(&[1, 1, 8, 16])).is_err());
    assert!(net.mask_forward(&Tensor::zeros(&[1, 2, 8, 8])).is_err());
    assert!(MaskNetwork::<f64>::new(MaskNetworkConfig { grid: 10, ..tiny() }, 0).is_err());
}

#[test]
fn forward_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a = random_input(&mut rng, 1, 32, 2.0);
    let n1 = MaskNetwork::<f32>::new(MaskNetworkConfig::toy(), 5).unwrap();
    let n2 = MaskNetwork::<f32>::new(MaskNetworkConfig::toy(), 5).unwrap();
    assert_eq!(n1, n2);
    let a = a.cast::<f32>();
    assert_eq!(n1.mask_forward(&a).unwrap(), n2.mask_forward(&a).unwrap());
    let n3 = MaskNetwork::<f32>::new(MaskNetworkConfig::toy(), 6).unwrap();
    assert_ne!(n1.params.fingerprint(), n3.params.fingerprint());
}

#[test]
fn zero_head_gives_half_mask() {
    let mut net = MaskNetwork::<f64>::new(tiny(), 2).unwrap();
    net.zero_head();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = random_input(&mut rng, 1, 8, 3.0);
    assert!(net.mask_forward(&a).unwrap().data().iter().all(|&m| m == 0.5));
}

#[test]
fn zero_input_gives_zero_output() {
    let net = MaskNetwork::<f64>::new(tiny(), 2).unwrap();
    let g = net.g_apply(&Tensor::zeros(&[1, 1, 8, 8])).unwrap();
    assert!(g.data().iter().all(|&v| v == 0.0));
}

#[test]
fn g_is_input_times_mask() {
    let net = MaskNetwork::<f64>::new(tiny(), 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = random_input(&mut rng, 1, 8, 5.0);
    let m = net.mask_forward(&a).unwrap();
    let g = net.g_apply(&a).unwrap();
    for ((&x, &mv), &gv) in a.data().iter().zip(m.data()).zip(g.data()) {
        assert_eq!(gv, x * mv);
        assert!(gv >= 0.0 && gv <= x);
    }
}

#[test]
fn saturated_mask_reproduces_input() {
    let mut net = MaskNetwork::<f64>::new(tiny(), 4).unwrap();
    net.zero_head();
    net.params.get_mut("dec.head.bias").unwrap().data_mut()[0] = 1e3;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = random_input(&mut rng, 1, 8, 5.0);
    let g = net.g_apply(&a).unwrap();
    for (&x, &gv) in a.data().iter().zip(g.data()) {
        assert!((gv - x).abs() <= 4.0 * f64::EPSILON * x);
    }
}

#[test]
fn discriminator_score_grids_shrink_with_scale() {
    let d = MultiScaleDiscriminator::<f64>::new(DiscriminatorConfig::toy(), 32, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let scores = d.forward(&random_input(&mut rng, 2, 32, 1.0)).unwrap();
    let sides: Vec<usize> = scores.iter().map(|s| s.shape()[2]).collect();
    assert_eq!(sides, DiscriminatorConfig::toy().score_sides(32).unwrap());
    assert_eq!(sides, vec![3, 1]);
    for s in &scores {
        assert_eq!(s.shape()[..2], [2, 1]);
    }
    assert_eq!(DiscriminatorConfig::default().score_sides(256).unwrap(), vec![15, 7]);
    assert!(DiscriminatorConfig { layers: 6, ..DiscriminatorConfig::toy() }.score_sides(32).is_err());
}

#[test]
fn zeroed_discriminator_heads_score_zero() {
    let mut d = MultiScaleDiscriminator::<f64>::new(DiscriminatorConfig::toy(), 32, 1).unwrap();
    d.zero_heads();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for s in d.forward(&random_input(&mut rng, 1, 32, 1.0)).unwrap() {
        assert!(s.data().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn discriminator_passes_gradient_to_its_input() {
    let d = MultiScaleDiscriminator::<f64>::new(DiscriminatorConfig::toy(), 32, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut tape = Tape::new();
    let params = d.params.bind(&mut tape, false);
    let x = tape.param(random_input(&mut rng, 1, 32, 1.0));
    let scores = d.scores(&mut tape, &params, x).unwrap();
    let terms: Vec<_> = scores.iter().map(|&s| (tape.sum(s).unwrap(), 1.0)).collect();
    let total = tape.combine(&terms).unwrap();
    let grad = tape.backward(total).unwrap().wrt(x);
    let norm: f64 = grad.data().iter().map(|g| g * g).sum::<f64>().sqrt();
    assert!(norm > 0.0 && norm.is_finite());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn masks_stay_inside_the_unit_interval(seed in any::<u64>(), log_scale in -6.0f64..6.0) {
        let net = MaskNetwork::<f64>::new(tiny(), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let a = random_input(&mut rng, 1, 8, 10f64.powf(log_scale));
        let m = net.mask_forward(&a).unwrap();
        prop_assert!(m.data().iter().all(|&v| v > 0.0 && v < 1.0));
        let g = net.g_apply(&a).unwrap();
        prop_assert!(a.data().iter().zip(g.data()).all(|(&x, &gv)| x - gv >= 0.0));
    }
}
