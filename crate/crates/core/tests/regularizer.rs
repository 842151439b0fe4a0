use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symog::nn::{build_test_mlp, Layer, Network};
use symog::quant::{QuantPlan, QuantSpec};
use symog::train::{reg_grad, reg_value};

const STEP: f64 = 1e-6;
const TOL: f64 = 1e-5;
const MARGIN: f64 = 1e-3;

fn near_boundary(w: f64, spec: &QuantSpec) -> bool {
    let delta = spec.step();
    let cmax = spec.code_max();
    (-cmax..cmax).any(|k| (w - (k as f64 + 0.5) * delta).abs() < MARGIN)
}

#[test]
fn regularizer_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0usize;
    for case in 0..20 {
        let mut net = build_test_mlp(&[rng.gen_range(2..7), rng.gen_range(2..6), 3], case).unwrap();
        let bits = [2u8, 3, 4][case as usize % 3];
        let exps: Vec<i32> = (0..2).map(|_| rng.gen_range(-2..=1)).collect();
        let mut specs = Vec::new();
        let mut e = exps.iter();
        for l in net.layers() {
            specs.push(if l.kind().is_quantizable() {
                Some(QuantSpec::new(bits, *e.next().unwrap()).unwrap())
            } else {
                None
            });
        }
        let plan = QuantPlan::new(specs.clone());
        for l in net.layers_mut() {
            for w in l.weights.data_mut() {
                *w = rng.gen_range(-3.0..3.0);
            }
        }
        let grads = reg_grad(&net, &plan).unwrap();
        for li in 0..net.layers().len() {
            let Some(spec) = specs[li] else { continue };
            let g = grads[li].as_ref().unwrap();
            for i in 0..net.layers()[li].weights.len() {
                let orig = net.layers()[li].weights.data()[i];
                if near_boundary(orig, &spec) {
                    continue;
                }
                net.layers_mut()[li].weights.data_mut()[i] = orig + STEP;
                let rp = reg_value(&net, &plan).unwrap();
                net.layers_mut()[li].weights.data_mut()[i] = orig - STEP;
                let rm = reg_value(&net, &plan).unwrap();
                net.layers_mut()[li].weights.data_mut()[i] = orig;
                let fd = (rp - rm) / (2.0 * STEP);
                let a = g.data()[i];
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
                assert!(rel <= TOL, "case {case} layer {li} weight {i}: {a} vs {fd}");
                checked += 1;
            }
        }
    }
    assert!(checked > 400, "only {checked} weights checked");
}

#[test]
fn regularizer_closed_form_values() {
    let mut layer = Layer::dense("d", 2, 1);
    layer.weights.data_mut().copy_from_slice(&[0.3, -0.8]);
    let net = Network::new(vec![layer]);
    let plan = QuantPlan::new(vec![Some(QuantSpec::new(2, 0).unwrap())]);
    // (0.3 - 0)^2 + (-0.8 + 1)^2 = 0.13, averaged over two weights.
    assert!((reg_value(&net, &plan).unwrap() - 0.065).abs() < 1e-15);
    let g = reg_grad(&net, &plan).unwrap()[0].clone().unwrap();
    assert!((g.data()[0] - 0.3).abs() < 1e-15);
    assert!((g.data()[1] - 0.2).abs() < 1e-15);
}
