//! Central finite differences against the analytic backward passes.

use pscdn::channel::{generate_dataset, to_batch};
use pscdn::model::{forward, init_parameters, Mode, NetworkSpec, ParameterStore, Pass, Variant};
use pscdn::ops::{
    batch_norm, batch_norm_backward, concat_channels, concat_channels_backward, conv1d, conv1d_backward, relu,
    relu_backward, reshape, reshape_backward, residual_sub, residual_sub_backward, sigmoid, sigmoid_backward, Kernel,
};
use pscdn::train::{mse_loss, mse_loss_grad};
use pscdn::{Batch, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Step for the primitives, whose outputs are O(1) and smooth.
pub const H: f64 = 1e-6;
/// Larger step for the full network, combined with Richardson
/// extrapolation so truncation error stays negligible.
pub const H_NETWORK: f64 = 1e-4;

/// Relative error, with the denominator floored at `floor` so that entries
/// whose true gradient is exactly zero are judged against roundoff.
pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(floor)
}

pub fn random(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Numeric gradient of `f` at `x`.
pub fn numeric(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    numeric_step(x, H, f)
}

pub fn numeric_step(x: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Fourth-order central difference: `(4 D(h/2) - D(h)) / 3`.
pub fn richardson(x: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let coarse = numeric_step(x, h, &f);
    let fine = numeric_step(x, h / 2.0, &f);
    fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect()
}

pub fn assert_close(analytic: &[f64], numeric: &[f64], tol: f64, what: &str) {
    assert_eq!(analytic.len(), numeric.len(), "{what}");
    let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = (1e-6 * scale).max(1e-8);
    for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        assert!(rel_err(*a, *n, floor) <= tol, "{what}[{i}]: analytic {a} numeric {n}");
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn check_conv() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (cin, cout, len, ks) in [(2, 3, 5, 3), (1, 2, 4, 1), (3, 1, 1, 3), (2, 2, 6, 5)] {
        let x = Tensor::new(cin, len, random(&mut rng, cin * len)).unwrap();
        let w = random(&mut rng, cout * cin * ks);
        let bias = random(&mut rng, cout);
        let up = Tensor::new(cout, len, random(&mut rng, cout * len)).unwrap();
        let kernel = Kernel::new(cout, cin, ks, w.clone()).unwrap();
        let g = conv1d_backward(&x, &kernel, &up).unwrap();

        let by_x = numeric(x.data(), |v| {
            dot(conv1d(&Tensor::new(cin, len, v.to_vec()).unwrap(), &kernel, &bias).unwrap().data(), up.data())
        });
        assert_close(g.input_grad.data(), &by_x, 1e-5, "conv dx");
        let by_w = numeric(&w, |v| {
            let k = Kernel::new(cout, cin, ks, v.to_vec()).unwrap();
            dot(conv1d(&x, &k, &bias).unwrap().data(), up.data())
        });
        assert_close(g.param_grads[0].data(), &by_w, 1e-5, "conv dw");
        let by_b = numeric(&bias, |v| dot(conv1d(&x, &kernel, v).unwrap().data(), up.data()));
        assert_close(g.param_grads[1].data(), &by_b, 1e-5, "conv db");
    }
}

pub fn check_activations() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    // Keep ReLU inputs away from the kink.
    let x: Vec<f64> = random(&mut rng, 12).into_iter().map(|v| if v.abs() < 0.05 { v + 0.1 } else { v }).collect();
    let x = Tensor::new(3, 4, x).unwrap();
    let up = Tensor::new(3, 4, random(&mut rng, 12)).unwrap();
    let by_x = numeric(x.data(), |v| dot(relu(&Tensor::new(3, 4, v.to_vec()).unwrap()).data(), up.data()));
    assert_close(relu_backward(&x, &up).unwrap().data(), &by_x, 1e-5, "relu");
    let by_x = numeric(x.data(), |v| dot(sigmoid(&Tensor::new(3, 4, v.to_vec()).unwrap()).data(), up.data()));
    assert_close(sigmoid_backward(&x, &up).unwrap().data(), &by_x, 1e-5, "sigmoid");
}

pub fn check_batch_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (n, c, l) = (4, 2, 3);
    let xs = random(&mut rng, n * c * l);
    let up = random(&mut rng, n * c * l);
    let split = |v: &[f64]| v.chunks(c * l).map(|s| Tensor::new(c, l, s.to_vec()).unwrap()).collect::<Vec<_>>();
    let analytic: Vec<f64> =
        batch_norm_backward(&split(&xs), 1e-5, &split(&up)).unwrap().iter().flat_map(|t| t.data().to_vec()).collect();
    let by_x = numeric(&xs, |v| {
        let y: Vec<f64> = batch_norm(&split(v), 1e-5).unwrap().iter().flat_map(|t| t.data().to_vec()).collect();
        dot(&y, &up)
    });
    assert_close(&analytic, &by_x, 1e-5, "batch norm");
}

pub fn check_structural() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = Tensor::new(2, 3, random(&mut rng, 6)).unwrap();
    let b = Tensor::new(1, 3, random(&mut rng, 3)).unwrap();
    let up = Tensor::new(3, 3, random(&mut rng, 9)).unwrap();
    let (da, db) = concat_channels_backward(2, &up).unwrap();
    let by_a = numeric(a.data(), |v| dot(concat_channels(&Tensor::new(2, 3, v.to_vec()).unwrap(), &b).unwrap().data(), up.data()));
    let by_b = numeric(b.data(), |v| dot(concat_channels(&a, &Tensor::new(1, 3, v.to_vec()).unwrap()).unwrap().data(), up.data()));
    assert_close(da.data(), &by_a, 1e-5, "concat a");
    assert_close(db.data(), &by_b, 1e-5, "concat b");

    let c = Tensor::new(2, 3, random(&mut rng, 6)).unwrap();
    let up2 = Tensor::new(2, 3, random(&mut rng, 6)).unwrap();
    let (dx, de) = residual_sub_backward(&up2);
    let by_x = numeric(a.data(), |v| dot(residual_sub(&Tensor::new(2, 3, v.to_vec()).unwrap(), &c).unwrap().data(), up2.data()));
    let by_e = numeric(c.data(), |v| dot(residual_sub(&a, &Tensor::new(2, 3, v.to_vec()).unwrap()).unwrap().data(), up2.data()));
    assert_close(dx.data(), &by_x, 1e-5, "residual input");
    assert_close(de.data(), &by_e, 1e-5, "residual estimate");

    let up3 = Tensor::new(6, 1, random(&mut rng, 6)).unwrap();
    let by_r = numeric(a.data(), |v| dot(reshape(&Tensor::new(2, 3, v.to_vec()).unwrap(), 6, 1).unwrap().data(), up3.data()));
    assert_close(reshape_backward(&up3, (2, 3)).unwrap().data(), &by_r, 1e-5, "reshape");
}

fn set_flat(params: &mut ParameterStore<f64>, flat: &[f64]) {
    let mut off = 0;
    for s in params.slices_mut() {
        s.copy_from_slice(&flat[off..off + s.len()]);
        off += s.len();
    }
}

/// Loss of the full network with the channel noise held fixed.
fn network_loss(spec: &NetworkSpec, params: &ParameterStore<f64>, input: &Batch<f64>, noise: &[f64], gain: f64) -> f64 {
    let (_, out) = forward(spec, params, input, Mode::Train, |code| {
        let data = code.data().iter().zip(noise).map(|(c, n)| gain * c + n).collect();
        Batch::new(code.len(), code.channels(), code.length(), data).unwrap()
    })
    .unwrap();
    mse_loss(&out, input).unwrap()
}

pub fn check_network(variant: Variant) {
    let spec = NetworkSpec::build(variant, 4, 4, 2).unwrap();
    let mut params: ParameterStore<f64> = init_parameters(&spec, 21);
    // Nonzero biases exercise the bias paths and move ReLU inputs off zero.
    // Weights are scaled up so the signal survives 15 narrow layers and
    // gradients stay well above finite-difference roundoff.
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for layer in params.layers_mut() {
        for w in layer.kernel.data_mut() {
            *w *= 1.5;
        }
        for b in &mut layer.bias {
            *b = rng.random_range(-0.2..0.2);
        }
    }
    let input: Batch<f64> = to_batch(&generate_dataset(5, 4, 23).unwrap()).unwrap();
    let noise = random(&mut rng, 5 * 2).iter().map(|v| 0.3 * v).collect::<Vec<_>>();
    let gain = 0.8;

    let mut pass = Pass::encode(&spec, &params, &input, Mode::Train).unwrap();
    let received = {
        let c = pass.code();
        let d = c.data().iter().zip(&noise).map(|(c, n)| gain * c + n).collect();
        Batch::new(c.len(), c.channels(), c.length(), d).unwrap()
    };
    let out = pass.decode(&spec, &params, &received).unwrap().clone();
    let d_out = mse_loss_grad(&out, &input).unwrap();
    let (grads, d_input) = pass.backward(&spec, &params, &d_out, gain).unwrap();

    let flat = params.flatten();
    let by_p = richardson(&flat, H_NETWORK, |v| {
        let mut p = params.clone();
        set_flat(&mut p, v);
        network_loss(&spec, &p, &input, &noise, gain)
    });
    assert_close(&grads.flatten(), &by_p, 1e-4, &format!("{variant} parameters"));

    let by_x = richardson(input.data(), H_NETWORK, |v| {
        let x = Batch::new(5, 1, 4, v.to_vec()).unwrap();
        let (_, out) = forward(&spec, &params, &x, Mode::Train, |code| {
            let d = code.data().iter().zip(&noise).map(|(c, n)| gain * c + n).collect();
            Batch::new(code.len(), code.channels(), code.length(), d).unwrap()
        })
        .unwrap();
        // Target held at the original input so only the forward path varies.
        dot(out.data(), d_out.data())
    });
    assert_close(d_input.data(), &by_x, 1e-4, &format!("{variant} input"));
}
