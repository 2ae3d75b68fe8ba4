//! Central finite-difference checks of every backward pass.
//!
//! Each check contracts the layer output with a random weight tensor `w` so
//! the scalar loss is `Σ w·y`, compares the analytic gradients of the inputs
//! and parameters against `(L(θ+h) − L(θ−h)) / 2h`, and reports the relative
//! error `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖)`.

use std::fmt;

use gpstate_core::grid::Grid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::layers::{integral_mse_loss, residual_add, BatchNorm, Conv, Dense, LeakyRelu, Sigmoid};
use crate::model::{GroundStateNet, NetConfig};
use crate::tensor::{Param, Tensor};

pub const STEP: f64 = 1e-6;

/// Most entries of one parameter tensor that are probed.
const MAX_PROBES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub name: String,
    pub rel_error: f64,
    pub tolerance: f64,
    /// Number of probed entries.
    pub probes: usize,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.rel_error < self.tolerance
    }
}

impl fmt::Display for GradCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<28} rel err {:.3e} (tol {:.0e}, {} probes) {}",
            self.name,
            self.rel_error,
            self.tolerance,
            self.probes,
            if self.passed() { "ok" } else { "FAILED" }
        )
    }
}

pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, n)| a - n).collect();
    let scale = norm(analytic).max(norm(numeric));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// A layer (or small composition) whose gradients can be probed.
trait Probe {
    fn run(&mut self, x: &Tensor) -> Result<Tensor>;
    fn back(&mut self, grad: &Tensor) -> Result<Tensor>;
    fn params(&mut self) -> Vec<&mut Param>;
}

impl Probe for Dense {
    fn run(&mut self, x: &Tensor) -> Result<Tensor> {
        self.forward(x)
    }
    fn back(&mut self, grad: &Tensor) -> Result<Tensor> {
        self.backward(grad)
    }
    fn params(&mut self) -> Vec<&mut Param> {
        self.params_mut().into()
    }
}

impl Probe for Conv {
    fn run(&mut self, x: &Tensor) -> Result<Tensor> {
        self.forward(x)
    }
    fn back(&mut self, grad: &Tensor) -> Result<Tensor> {
        self.backward(grad)
    }
    fn params(&mut self) -> Vec<&mut Param> {
        self.params_mut().into()
    }
}

impl Probe for BatchNorm {
    fn run(&mut self, x: &Tensor) -> Result<Tensor> {
        self.forward(x)
    }
    fn back(&mut self, grad: &Tensor) -> Result<Tensor> {
        self.backward(grad)
    }
    fn params(&mut self) -> Vec<&mut Param> {
        self.params_mut().into()
    }
}

impl Probe for LeakyRelu {
    fn run(&mut self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward(x))
    }
    fn back(&mut self, grad: &Tensor) -> Result<Tensor> {
        self.backward(grad)
    }
    fn params(&mut self) -> Vec<&mut Param> {
        Vec::new()
    }
}

impl Probe for Sigmoid {
    fn run(&mut self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward(x))
    }
    fn back(&mut self, grad: &Tensor) -> Result<Tensor> {
        self.backward(grad)
    }
    fn params(&mut self) -> Vec<&mut Param> {
        Vec::new()
    }
}

/// Two residual blocks `x + act(conv(x))`.
struct ResidualChain {
    blocks: Vec<(Conv, LeakyRelu)>,
}

impl Probe for ResidualChain {
    fn run(&mut self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for (conv, act) in &mut self.blocks {
            let y = act.forward(&conv.forward(&h)?);
            h = residual_add(&h, &y)?;
        }
        Ok(h)
    }
    fn back(&mut self, grad: &Tensor) -> Result<Tensor> {
        let mut g = grad.clone();
        for (conv, act) in self.blocks.iter_mut().rev() {
            let inner = conv.backward(&act.backward(&g)?)?;
            g.add_assign(&inner);
        }
        Ok(g)
    }
    fn params(&mut self) -> Vec<&mut Param> {
        self.blocks.iter_mut().flat_map(|(c, _)| c.params_mut()).collect()
    }
}

fn random_tensor(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("shape")
}

/// Indices probed in a tensor of `len` entries: all of them, or an evenly
/// spread subset.
fn probe_indices(len: usize) -> Vec<usize> {
    if len <= MAX_PROBES {
        (0..len).collect()
    } else {
        (0..MAX_PROBES).map(|i| i * len / MAX_PROBES).collect()
    }
}

fn contract(y: &Tensor, w: &Tensor) -> f64 {
    y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
}

fn check_probe(name: &str, layer: &mut dyn Probe, x: &Tensor, tolerance: f64, rng: &mut ChaCha8Rng) -> Result<GradCheck> {
    let y = layer.run(x)?;
    let w = random_tensor(y.shape().to_vec(), rng);
    for p in layer.params() {
        p.zero_grad();
    }
    let dx = layer.back(&w)?;
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();

    for i in probe_indices(x.len()) {
        let mut up = x.clone();
        up.data_mut()[i] += STEP;
        let mut down = x.clone();
        down.data_mut()[i] -= STEP;
        let fd = (contract(&layer.run(&up)?, &w) - contract(&layer.run(&down)?, &w)) / (2.0 * STEP);
        analytic.push(dx.data()[i]);
        numeric.push(fd);
    }

    let grads: Vec<Vec<f64>> = layer.params().iter().map(|p| p.grad.clone()).collect();
    for (k, grad) in grads.iter().enumerate() {
        for i in probe_indices(grad.len()) {
            let original = layer.params()[k].value[i];
            layer.params()[k].value[i] = original + STEP;
            let lp = contract(&layer.run(x)?, &w);
            layer.params()[k].value[i] = original - STEP;
            let lm = contract(&layer.run(x)?, &w);
            layer.params()[k].value[i] = original;
            analytic.push(grad[i]);
            numeric.push((lp - lm) / (2.0 * STEP));
        }
    }
    Ok(GradCheck {
        name: name.to_string(),
        rel_error: relative_error(&analytic, &numeric),
        tolerance,
        probes: analytic.len(),
    })
}

/// Values in `[-1, -0.1] ∪ [0.1, 1]`, kept away from the leaky ReLU kink.
fn off_kink(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> Tensor {
    let mut t = random_tensor(shape, rng);
    t.data_mut().iter_mut().for_each(|v| *v = v.signum() * (0.1 + 0.9 * v.abs()));
    t
}

/// Gradient check of the integral MSE loss itself.
pub fn check_loss(rng: &mut ChaCha8Rng) -> Result<GradCheck> {
    let pred = random_tensor(vec![3, 2, 10], rng);
    let target = random_tensor(vec![3, 2, 10], rng);
    let dv = 0.15;
    let (_, grad) = integral_mse_loss(&pred, &target, dv)?;
    let mut numeric = Vec::with_capacity(pred.len());
    for i in 0..pred.len() {
        let mut up = pred.clone();
        up.data_mut()[i] += STEP;
        let mut down = pred.clone();
        down.data_mut()[i] -= STEP;
        numeric.push((integral_mse_loss(&up, &target, dv)?.0 - integral_mse_loss(&down, &target, dv)?.0) / (2.0 * STEP));
    }
    Ok(GradCheck {
        name: "integral mse loss".into(),
        rel_error: relative_error(grad.data(), &numeric),
        tolerance: 1e-8,
        probes: numeric.len(),
    })
}

/// Gradient check of a whole training-mode network, including the
/// derivative with respect to the input coefficients.
pub fn check_network(name: &str, config: NetConfig, coefficients: &[f64], tolerance: f64, rng: &mut ChaCha8Rng) -> Result<GradCheck> {
    let mut net = GroundStateNet::new(config)?;
    let dv = 0.1;
    let out = net.forward(coefficients)?;
    let target = {
        let mut t = random_tensor(out.shape().to_vec(), rng);
        t.data_mut().iter_mut().for_each(|v| *v = 0.5 + 0.5 * *v);
        t
    };
    let loss = |net: &mut GroundStateNet, c: &[f64]| -> Result<f64> {
        let y = net.forward(c)?;
        Ok(integral_mse_loss(&y, &target, dv)?.0)
    };
    let (_, grad) = integral_mse_loss(&out, &target, dv)?;
    net.zero_grad();
    let dc = net.backward(&grad)?;

    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for i in 0..coefficients.len() {
        let mut up = coefficients.to_vec();
        up[i] += STEP;
        let mut down = coefficients.to_vec();
        down[i] -= STEP;
        analytic.push(dc[i]);
        numeric.push((loss(&mut net, &up)? - loss(&mut net, &down)?) / (2.0 * STEP));
    }
    let grads: Vec<Vec<f64>> = net.params().iter().map(|p| p.grad.clone()).collect();
    for (k, g) in grads.iter().enumerate() {
        for i in probe_indices(g.len()) {
            let original = net.params()[k].value[i];
            net.params_mut()[k].value[i] = original + STEP;
            let lp = loss(&mut net, coefficients)?;
            net.params_mut()[k].value[i] = original - STEP;
            let lm = loss(&mut net, coefficients)?;
            net.params_mut()[k].value[i] = original;
            analytic.push(g[i]);
            numeric.push((lp - lm) / (2.0 * STEP));
        }
    }
    Ok(GradCheck {
        name: name.to_string(),
        rel_error: relative_error(&analytic, &numeric),
        tolerance,
        probes: analytic.len(),
    })
}

/// Runs every check: each layer type, a residual chain, the loss, and
/// small 1D and 2D networks.
pub fn run_suite(seed: u64) -> Result<Vec<GradCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let mut dense = Dense::new(2, 5, &mut rng);
    let x = random_tensor(vec![3, 2], &mut rng);
    out.push(check_probe("dense", &mut dense, &x, 1e-6, &mut rng)?);

    let mut conv = Conv::new(3, 3, 3, 4, 1, &mut rng)?;
    let x = random_tensor(vec![2, 3, 16], &mut rng);
    out.push(check_probe("conv 1d (dilation 4)", &mut conv, &x, 1e-5, &mut rng)?);

    let mut conv = Conv::new(2, 3, 3, 2, 2, &mut rng)?;
    let x = random_tensor(vec![2, 2, 8, 8], &mut rng);
    out.push(check_probe("conv 2d (dilation 2)", &mut conv, &x, 1e-5, &mut rng)?);

    let mut bn = BatchNorm::new(3, 1e-5, 0.1)?;
    for p in bn.params_mut() {
        p.value.iter_mut().for_each(|v| *v += rng.gen_range(-0.5..0.5));
    }
    let x = random_tensor(vec![4, 3, 6], &mut rng);
    out.push(check_probe("batchnorm", &mut bn, &x, 1e-5, &mut rng)?);

    let x = off_kink(vec![2, 3, 7], &mut rng);
    out.push(check_probe("leaky relu", &mut LeakyRelu::new(0.01)?, &x, 1e-8, &mut rng)?);
    let x = random_tensor(vec![2, 3, 7], &mut rng);
    out.push(check_probe("sigmoid", &mut Sigmoid::new(), &x, 1e-8, &mut rng)?);

    let mut chain = ResidualChain {
        blocks: vec![
            (Conv::new(2, 2, 3, 1, 1, &mut rng)?, LeakyRelu::new(0.01)?),
            (Conv::new(2, 2, 3, 2, 1, &mut rng)?, LeakyRelu::new(0.01)?),
        ],
    };
    let x = random_tensor(vec![2, 2, 12], &mut rng);
    out.push(check_probe("residual chain", &mut chain, &x, 1e-6, &mut rng)?);

    out.push(check_loss(&mut rng)?);

    let line = Grid::line(-4.0, 4.0, 32)?;
    let mut cfg = NetConfig::for_grid(&line, 2, (0.0, 10.0));
    cfg.channels = 4;
    cfg.seed = seed;
    out.push(check_network("network 1d", cfg, &[1.0, 4.5, 8.0], 1e-4, &mut rng)?);

    let plane = Grid::plane((-3.0, 3.0, 10), (-2.0, 2.0, 8))?;
    let mut cfg = NetConfig::for_grid(&plane, 1, (0.0, 10.0));
    cfg.channels = 3;
    cfg.seed = seed;
    out.push(check_network("network 2d", cfg, &[2.0, 7.0], 1e-4, &mut rng)?);
    Ok(out)
}
