//! Analytic-vs-finite-difference comparisons. Each function builds a small
//! randomized instance from `seed` and returns the worst relative error
//! over every parameter and input entry.

use rand::Rng;
use vcsel_rul::model::{ModelSpec, Network, Variant};
use vcsel_rul::tensor::{concat, split_grad, Activation, Conv1d, Dense, LstmLayer, LstmStack, MaxPool1d, Tensor};

use super::{flat, flat_grad, max_rel_err, numeric_grad, probe_loss, random_tensor, rng, set_flat, uniform_vec};

const ACTIVATIONS: [Activation; 3] = [Activation::Tanh, Activation::Relu, Activation::Identity];

pub fn dense(seed: u64) -> f64 {
    let mut r = rng(seed);
    let n_in = r.random_range(1..6);
    let n_out = r.random_range(1..6);
    let act = ACTIVATIONS[seed as usize % 3];
    let mut layer = Dense::init(n_in, n_out, act, &mut r);
    set_flat(layer.params_mut(), &uniform_vec(&mut r, (n_in + 1) * n_out, -1.0, 1.0));
    let x = random_tensor(&mut r, &[n_in]);
    let w = uniform_vec(&mut r, n_out, -1.0, 1.0);

    let (out, cache) = layer.forward(&x).unwrap();
    let gx = layer.backward(&cache, &Tensor::vector(w.clone())).unwrap();
    let base = layer.clone();
    let num_p = numeric_grad(&flat(base.params()), |v| {
        let mut l = base.clone();
        set_flat(l.params_mut(), v);
        probe_loss(&l.forward(&x).unwrap().0, &w)
    });
    let num_x = numeric_grad(x.data(), |v| probe_loss(&base.forward(&Tensor::vector(v.to_vec())).unwrap().0, &w));
    assert_eq!(out.len(), n_out);
    max_rel_err(&flat_grad(layer.params()), &num_p).max(max_rel_err(gx.data(), &num_x))
}

pub fn conv1d(seed: u64) -> f64 {
    let mut r = rng(seed);
    let len = r.random_range(1..8);
    let ch_in = r.random_range(1..4);
    let ch_out = r.random_range(1..4);
    let kernel = [1, 3, 5][r.random_range(0..3)];
    let act = ACTIVATIONS[seed as usize % 3];
    let mut layer = Conv1d::init(ch_in, ch_out, kernel, act, &mut r).unwrap();
    let n_params = ch_out * ch_in * kernel + ch_out;
    set_flat(layer.params_mut(), &uniform_vec(&mut r, n_params, -1.0, 1.0));
    let shape = [len, ch_in];
    let x = random_tensor(&mut r, &shape);
    let w = uniform_vec(&mut r, len * ch_out, -1.0, 1.0);

    let (_, cache) = layer.forward(&x).unwrap();
    let gx = layer.backward(&cache, &Tensor::new(vec![len, ch_out], w.clone()).unwrap()).unwrap();
    let base = layer.clone();
    let num_p = numeric_grad(&flat(base.params()), |v| {
        let mut l = base.clone();
        set_flat(l.params_mut(), v);
        probe_loss(&l.forward(&x).unwrap().0, &w)
    });
    let num_x = numeric_grad(x.data(), |v| {
        probe_loss(&base.forward(&Tensor::new(shape.to_vec(), v.to_vec()).unwrap()).unwrap().0, &w)
    });
    max_rel_err(&flat_grad(layer.params()), &num_p).max(max_rel_err(gx.data(), &num_x))
}

pub fn maxpool1d(seed: u64) -> f64 {
    let mut r = rng(seed);
    let pool = r.random_range(1..4);
    let len = r.random_range(pool..10);
    let ch = r.random_range(1..4);
    let layer = MaxPool1d::new(pool).unwrap();
    let shape = [len, ch];
    let x = random_tensor(&mut r, &shape);
    let out_len = len / pool;
    let w = uniform_vec(&mut r, out_len * ch, -1.0, 1.0);

    let (_, cache) = layer.forward(&x).unwrap();
    let gx = layer
        .backward(&cache, &Tensor::new(vec![out_len, ch], w.clone()).unwrap())
        .unwrap();
    let num_x = numeric_grad(x.data(), |v| {
        probe_loss(&layer.forward(&Tensor::new(shape.to_vec(), v.to_vec()).unwrap()).unwrap().0, &w)
    });
    max_rel_err(gx.data(), &num_x)
}

/// A single LSTM layer over a short sequence; every emitted hidden state
/// carries loss weight.
pub fn lstm_cell(seed: u64) -> f64 {
    let mut r = rng(seed);
    let n_in = r.random_range(1..4);
    let cells = r.random_range(1..5);
    let steps = r.random_range(1..5);
    let mut layer = LstmLayer::init(n_in, cells, &mut r);
    let n_params = 4 * cells * (n_in + cells) + 4 * cells;
    set_flat(layer.params_mut(), &uniform_vec(&mut r, n_params, -1.0, 1.0));
    let shape = [steps, n_in];
    let x = random_tensor(&mut r, &shape);
    let w = uniform_vec(&mut r, steps * cells, -1.0, 1.0);

    let (_, cache) = layer.forward_sequence(&x).unwrap();
    let gx = layer
        .backward_sequence(&cache, &Tensor::new(vec![steps, cells], w.clone()).unwrap())
        .unwrap();
    let base = layer.clone();
    let num_p = numeric_grad(&flat(base.params()), |v| {
        let mut l = base.clone();
        set_flat(l.params_mut(), v);
        probe_loss(&l.forward_sequence(&x).unwrap().0, &w)
    });
    let num_x = numeric_grad(x.data(), |v| {
        probe_loss(
            &base.forward_sequence(&Tensor::new(shape.to_vec(), v.to_vec()).unwrap()).unwrap().0,
            &w,
        )
    });
    max_rel_err(&flat_grad(layer.params()), &num_p).max(max_rel_err(gx.data(), &num_x))
}

/// A stack of LSTM layers read out at the last step.
pub fn lstm_stack(seed: u64) -> f64 {
    let mut r = rng(seed);
    let n_in = r.random_range(1..3);
    let cells: Vec<usize> = (0..r.random_range(1..4)).map(|_| r.random_range(1..4)).collect();
    let steps = r.random_range(1..5);
    let mut stack = LstmStack::init(n_in, &cells, &mut r).unwrap();
    let shape = [steps, n_in];
    let x = random_tensor(&mut r, &shape);
    let w = uniform_vec(&mut r, *cells.last().unwrap(), -1.0, 1.0);

    let (_, cache) = stack.forward(&x).unwrap();
    let gx = stack.backward(&cache, &Tensor::vector(w.clone())).unwrap();
    let analytic: Vec<f64> = stack.layers().iter().flat_map(|l| flat_grad(l.params())).collect();
    let values: Vec<f64> = stack.layers().iter().flat_map(|l| flat(l.params())).collect();
    let base = stack.clone();
    let num_p = numeric_grad(&values, |v| {
        let mut s = base.clone();
        let mut offset = 0;
        for l in s.layers_mut() {
            let n = l.params().param_count();
            set_flat(l.params_mut(), &v[offset..offset + n]);
            offset += n;
        }
        probe_loss(&s.forward(&x).unwrap().0, &w)
    });
    let num_x = numeric_grad(x.data(), |v| {
        probe_loss(&base.forward(&Tensor::new(shape.to_vec(), v.to_vec()).unwrap()).unwrap().0, &w)
    });
    max_rel_err(&analytic, &num_p).max(max_rel_err(gx.data(), &num_x))
}

/// Concatenation followed by a dense layer, so the check covers both the
/// split of the incoming gradient and its routing to each operand.
pub fn concat_graph(seed: u64) -> f64 {
    let mut r = rng(seed);
    let na = r.random_range(1..5);
    let nb = r.random_range(1..5);
    let a = random_tensor(&mut r, &[na]);
    let b = random_tensor(&mut r, &[nb]);
    let mut dense = Dense::init(na + nb, 3, Activation::Tanh, &mut r);
    let w = uniform_vec(&mut r, 3, -1.0, 1.0);
    let forward = |d: &Dense, a: &Tensor, b: &Tensor| probe_loss(&d.forward(&concat(a, b).unwrap()).unwrap().0, &w);

    let (_, cache) = dense.forward(&concat(&a, &b).unwrap()).unwrap();
    let g = dense.backward(&cache, &Tensor::vector(w.clone())).unwrap();
    let (ga, gb) = split_grad(&g, na).unwrap();
    let num_a = numeric_grad(a.data(), |v| forward(&dense, &Tensor::vector(v.to_vec()), &b));
    let num_b = numeric_grad(b.data(), |v| forward(&dense, &a, &Tensor::vector(v.to_vec())));
    max_rel_err(ga.data(), &num_a).max(max_rel_err(gb.data(), &num_b))
}

pub fn small_spec(variant: Variant, seed: u64) -> ModelSpec {
    ModelSpec {
        variant,
        conv_filters: vec![2, 2, 2],
        lstm_cells: vec![3, 2, 2],
        head_width: 4,
        seed,
        ..ModelSpec::default()
    }
}

/// Whole network with jittered parameters, loss `0.5·(y − t)²`, gradients
/// for every parameter and both input groups.
pub fn network(variant: Variant, seed: u64) -> f64 {
    let mut r = rng(seed ^ 0x5eed);
    let mut net = Network::build(&small_spec(variant, seed)).unwrap();
    // Freshly built biases are exactly 0, which can park a ReLU on its kink
    // when an upstream branch is dead.
    let jittered: Vec<f64> = net.flat_params().iter().map(|v| v + r.random_range(-0.1..0.1)).collect();
    net.load_flat(&jittered).unwrap();
    let window = uniform_vec(&mut r, 3, 0.0, 1.0);
    let conditions = uniform_vec(&mut r, 6, 0.0, 1.0);
    let target: f64 = r.random_range(0.0..1.0);

    let y = net.forward_train(&window, &conditions).unwrap();
    let g = net.backward(y - target).unwrap();
    let analytic = net.flat_grads();
    let base = net.clone();
    let loss = |n: &Network, w: &[f64], c: &[f64]| 0.5 * (n.predict_one(w, c).unwrap() - target).powi(2);
    let num_p = numeric_grad(&base.flat_params(), |v| {
        let mut n = base.clone();
        n.load_flat(v).unwrap();
        loss(&n, &window, &conditions)
    });
    let num_w = numeric_grad(&window, |v| loss(&base, v, &conditions));
    let num_c = numeric_grad(&conditions, |v| loss(&base, &window, v));
    max_rel_err(&analytic, &num_p)
        .max(max_rel_err(&g.window, &num_w))
        .max(max_rel_err(&g.conditions, &num_c))
}
