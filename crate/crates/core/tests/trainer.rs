mod common;

use common::{data_1d, se};
use factorgp::trainer::finite_diff_grad;
use factorgp::{exact_nlml, exact_nlml_grad, minimize_nlml, ExactPosterior, HyperParams, KernelSpec, OptimizeConfig};
use proptest::prelude::*;

fn at(theta: &[f64]) -> KernelSpec {
    KernelSpec::squared_exponential(HyperParams::from_vec(theta).unwrap())
}

#[test]
fn analytic_and_numeric_gradients_point_the_same_way() {
    let mut rng = common::rng(21);
    for _ in 0..20 {
        let data = data_1d(&mut rng, 30, -4.0, 4.0);
        let theta = common::uniform(&mut rng, 3, -1.5, 1.0);
        let g = exact_nlml_grad(&data, &at(&theta)).unwrap();
        let fd = finite_diff_grad(|t| exact_nlml(&data, &at(t)).unwrap(), &theta, 1e-5);
        let dot: f64 = g.iter().zip(&fd).map(|(a, b)| a * b).sum();
        let cos = dot / (g.norm() * fd.iter().map(|v| v * v).sum::<f64>().sqrt());
        assert!(cos >= 0.999, "{cos}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn trace_is_monotone(seed in 0u64..10_000, l0 in 0.3..3.0f64, n0 in 0.05..1.0f64) {
        let mut rng = common::rng(seed);
        let data = data_1d(&mut rng, 40, -5.0, 5.0);
        let init = se(&[l0], 1.0, n0);
        let objective = |h: &HyperParams| ExactPosterior::fit(&data, &init.with_hyper(h.clone())).map(|p| p.nlml());
        let gradient = |h: &HyperParams| ExactPosterior::fit(&data, &init.with_hyper(h.clone()))?.nlml_grad();
        let cfg = OptimizeConfig { max_iters: 60, ..OptimizeConfig::default() };
        let opt = minimize_nlml(objective, Some(gradient), init.hyper(), &cfg).unwrap();
        prop_assert!(opt.trace.windows(2).all(|w| w[1].objective <= w[0].objective));
        prop_assert!(opt.value <= exact_nlml(&data, &init).unwrap());
    }
}

#[test]
fn learns_noise_level_on_plenty_of_data() {
    let mut rng = common::rng(30);
    let x = common::uniform(&mut rng, 300, -10.0, 10.0);
    let noise: Vec<f64> = common::normal(&mut rng, 300);
    let y: Vec<f64> = x.iter().zip(&noise).map(|(x, e)| x.sin() + 0.3 * e).collect();
    let data = factorgp::Dataset::from_1d(&x, &y).unwrap();
    let init = se(&[2.0], 1.0, 0.5);
    let objective = |h: &HyperParams| ExactPosterior::fit(&data, &init.with_hyper(h.clone())).map(|p| p.nlml());
    let gradient = |h: &HyperParams| ExactPosterior::fit(&data, &init.with_hyper(h.clone()))?.nlml_grad();
    let opt = minimize_nlml(objective, Some(gradient), init.hyper(), &OptimizeConfig::default()).unwrap();
    let learned = opt.hyper.noise_variance();
    assert!((learned - 0.09).abs() < 0.03, "{learned}");
}
