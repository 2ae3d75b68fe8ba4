//! The surrogate network: a dense lift from the scalar coefficient to a
//! `C × spatial` map, residual blocks of dilated convolution, batch
//! normalization and leaky ReLU, and a sigmoid-activated output convolution.

use std::fmt;

use gpstate_core::grid::{Axis, Grid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::layers::{batchnorm, residual_add, BatchNorm, Conv, Dense, LeakyRelu, Sigmoid};
use crate::tensor::{Param, Tensor};

pub const DEFAULT_DILATIONS: [usize; 6] = [1, 2, 4, 8, 16, 1];

#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    /// Spatial grid of the predicted arrays.
    pub axes: Vec<Axis>,
    pub channels: usize,
    pub kernel: usize,
    pub dilations: Vec<usize>,
    pub output_channels: usize,
    pub leaky_slope: f64,
    pub seed: u64,
    /// Coefficient interval mapped onto `[-1, 1]` before the dense lift.
    pub input_range: (f64, f64),
    pub bn_eps: f64,
    pub bn_momentum: f64,
}

impl NetConfig {
    /// Defaults for a grid: 32 channels in 1D, 16 in 2D, kernel 3.
    pub fn for_grid(grid: &Grid, output_channels: usize, input_range: (f64, f64)) -> Self {
        Self {
            axes: grid.axes().to_vec(),
            channels: if grid.dims() == 1 { 32 } else { 16 },
            kernel: 3,
            dilations: DEFAULT_DILATIONS.to_vec(),
            output_channels,
            leaky_slope: crate::layers::activation::DEFAULT_LEAKY_SLOPE,
            seed: 0,
            input_range,
            bn_eps: batchnorm::DEFAULT_EPS,
            bn_momentum: batchnorm::DEFAULT_MOMENTUM,
        }
    }

    pub fn spatial_dims(&self) -> usize {
        self.axes.len()
    }

    pub fn spatial_shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.points).collect()
    }

    pub fn spatial_len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn grid(&self) -> Result<Grid> {
        Ok(Grid::new(self.axes.clone())?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(1..=2).contains(&self.axes.len()) {
            return bad(format!("{} spatial dimensions; expected 1 or 2", self.axes.len()));
        }
        if self.channels == 0 {
            return bad("channel count must be positive".into());
        }
        if self.kernel % 2 == 0 {
            return bad(format!("kernel size {} is even", self.kernel));
        }
        if self.dilations.is_empty() || self.dilations[0] != 1 || *self.dilations.last().unwrap() != 1 {
            return bad(format!(
                "dilation schedule {:?} must start and end with 1",
                self.dilations
            ));
        }
        if self.dilations.contains(&0) {
            return bad("dilations must be positive".into());
        }
        if !(1..=2).contains(&self.output_channels) {
            return bad(format!("{} output channels; expected 1 or 2", self.output_channels));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return bad(format!("leaky slope {} outside (0, 1)", self.leaky_slope));
        }
        let (lo, hi) = self.input_range;
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return bad(format!("input range ({lo}, {hi}) is empty or not finite"));
        }
        if !(self.bn_eps > 0.0) || !(0.0..=1.0).contains(&self.bn_momentum) {
            return bad("batch normalization needs eps > 0 and momentum in [0, 1]".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Dense,
    Conv,
    BatchNorm,
}

impl LayerKind {
    pub fn code(self) -> u8 {
        match self {
            LayerKind::Dense => 0,
            LayerKind::Conv => 1,
            LayerKind::BatchNorm => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(LayerKind::Dense),
            1 => Some(LayerKind::Conv),
            2 => Some(LayerKind::BatchNorm),
            _ => None,
        }
    }
}

/// One parameterized layer: its weight shape, dilation (convolutions only)
/// and trainable parameter count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub shape: Vec<usize>,
    pub dilation: usize,
    pub params: usize,
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            LayerKind::Dense => "dense",
            LayerKind::Conv => "conv",
            LayerKind::BatchNorm => "batchnorm",
        };
        write!(f, "{name:<10} shape {:?}", self.shape)?;
        if self.kind == LayerKind::Conv {
            write!(f, " dilation {}", self.dilation)?;
        }
        write!(f, " params {}", self.params)
    }
}

#[derive(Debug, Clone)]
struct Block {
    conv: Conv,
    bn: BatchNorm,
    act: LeakyRelu,
}

#[derive(Debug, Clone)]
pub struct GroundStateNet {
    config: NetConfig,
    lift: Dense,
    blocks: Vec<Block>,
    head: Conv,
    out: Sigmoid,
}

impl GroundStateNet {
    pub fn new(config: NetConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (c, k, dims) = (config.channels, config.kernel, config.spatial_dims());
        let lift = Dense::new(1, c * config.spatial_len(), &mut rng);
        let mut blocks = Vec::with_capacity(config.dilations.len());
        for &d in &config.dilations {
            blocks.push(Block {
                conv: Conv::new(c, c, k, d, dims, &mut rng)?,
                bn: BatchNorm::new(c, config.bn_eps, config.bn_momentum)?,
                act: LeakyRelu::new(config.leaky_slope)?,
            });
        }
        let head = Conv::new(c, config.output_channels, k, 1, dims, &mut rng)?;
        Ok(Self {
            config,
            lift,
            blocks,
            head,
            out: Sigmoid::new(),
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn manifest(&self) -> Vec<LayerSpec> {
        let c = self.config.channels;
        let k = self.config.kernel;
        let taps: Vec<usize> = vec![k; self.config.spatial_dims()];
        let conv = |out: usize, d: usize| {
            let mut shape = vec![out, c];
            shape.extend(&taps);
            let params = shape.iter().product::<usize>() + out;
            LayerSpec {
                kind: LayerKind::Conv,
                shape,
                dilation: d,
                params,
            }
        };
        let lift_out = c * self.config.spatial_len();
        let mut specs = vec![LayerSpec {
            kind: LayerKind::Dense,
            shape: vec![lift_out, 1],
            dilation: 1,
            params: 2 * lift_out,
        }];
        for &d in &self.config.dilations {
            specs.push(conv(c, d));
            specs.push(LayerSpec {
                kind: LayerKind::BatchNorm,
                shape: vec![c],
                dilation: 1,
                params: 2 * c,
            });
        }
        specs.push(conv(self.config.output_channels, 1));
        specs
    }

    /// Trainable parameter count.
    pub fn count_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Maps raw coefficients onto the normalized network input.
    fn encode(&self, coefficients: &[f64]) -> Result<Tensor> {
        if coefficients.is_empty() {
            return Err(Error::Empty("coefficient batch"));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("input coefficients".into()));
        }
        let (lo, hi) = self.config.input_range;
        let z: Vec<f64> = coefficients.iter().map(|c| 2.0 * (c - lo) / (hi - lo) - 1.0).collect();
        Ok(Tensor::column(&z))
    }

    fn map_shape(&self, batch: usize, channels: usize) -> Vec<usize> {
        let mut shape = vec![batch, channels];
        shape.extend(self.config.spatial_shape());
        shape
    }

    /// Training-mode forward pass: batch statistics, cached activations.
    /// Returns `[batch, output channels, spatial...]`.
    pub fn forward(&mut self, coefficients: &[f64]) -> Result<Tensor> {
        let x = self.encode(coefficients)?;
        let b = x.batch();
        let shape = self.map_shape(b, self.config.channels);
        let mut h = self.lift.forward(&x)?.reshape(shape)?;
        for block in &mut self.blocks {
            let y = block.conv.forward(&h)?;
            let y = block.bn.forward(&y)?;
            let y = block.act.forward(&y);
            h = residual_add(&h, &y)?;
        }
        let y = self.head.forward(&h)?;
        let y = self.out.forward(&y);
        y.check_finite("network output")?;
        Ok(y)
    }

    /// Backpropagates `grad` (shaped like the forward output), accumulating
    /// parameter gradients. Returns the gradient with respect to the raw
    /// coefficients.
    pub fn backward(&mut self, grad: &Tensor) -> Result<Vec<f64>> {
        let g = self.out.backward(grad)?;
        let mut g = self.head.backward(&g)?;
        for block in self.blocks.iter_mut().rev() {
            let inner = block.act.backward(&g)?;
            let inner = block.bn.backward(&inner)?;
            let inner = block.conv.backward(&inner)?;
            g.add_assign(&inner);
        }
        let b = g.batch();
        let flat = g.reshape(vec![b, self.config.channels * self.config.spatial_len()])?;
        let dz = self.lift.backward(&flat)?;
        let (lo, hi) = self.config.input_range;
        let scale = 2.0 / (hi - lo);
        let dx: Vec<f64> = dz.data().iter().map(|v| v * scale).collect();
        if dx.iter().any(|v| !v.is_finite()) || self.params().iter().any(|p| p.grad.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("gradients".into()));
        }
        Ok(dx)
    }

    /// Eval-mode prediction using running statistics. Each batch item is
    /// computed independently, so results do not depend on batch composition.
    pub fn predict(&self, coefficients: &[f64]) -> Result<Tensor> {
        let x = self.encode(coefficients)?;
        let shape = self.map_shape(x.batch(), self.config.channels);
        let mut h = self.lift.infer(&x)?.reshape(shape)?;
        for block in &self.blocks {
            let y = block.conv.infer(&h)?;
            let y = block.bn.infer(&y)?;
            let y = block.act.infer(&y);
            h.add_assign(&y);
        }
        let y = self.out.infer(&self.head.infer(&h)?);
        y.check_finite("network output")?;
        Ok(y)
    }

    /// True once every batch normalization layer has seen a training batch.
    pub fn is_initialized(&self) -> bool {
        self.blocks.iter().all(|b| b.bn.initialized)
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut out = vec![&self.lift.weight, &self.lift.bias];
        for b in &self.blocks {
            out.extend([&b.conv.weight, &b.conv.bias, &b.bn.gamma, &b.bn.beta]);
        }
        out.extend([&self.head.weight, &self.head.bias]);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out: Vec<&mut Param> = self.lift.params_mut().into();
        for b in &mut self.blocks {
            out.extend(b.conv.params_mut());
            out.extend(b.bn.params_mut());
        }
        out.extend(self.head.params_mut());
        out
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Param::zero_grad);
    }

    /// Number of values in [`state`](Self::state).
    pub fn state_len(&self) -> usize {
        self.count_params() + 2 * self.config.channels * self.blocks.len()
    }

    /// Trainable values followed by every running mean and variance.
    pub fn state(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.params().iter().flat_map(|p| p.value.iter().copied()).collect();
        for b in &self.blocks {
            out.extend(&b.bn.running_mean);
            out.extend(&b.bn.running_var);
        }
        out
    }

    /// Inverse of [`state`](Self::state). `initialized` sets the running
    /// statistics flag of every batch normalization layer.
    pub fn load_state(&mut self, values: &[f64], initialized: bool) -> Result<()> {
        if values.len() != self.state_len() {
            return Err(Error::Shape(format!(
                "state holds {} values, network expects {}",
                values.len(),
                self.state_len()
            )));
        }
        let mut rest = values;
        for p in self.params_mut() {
            let (head, tail) = rest.split_at(p.len());
            p.value.copy_from_slice(head);
            rest = tail;
        }
        let c = self.config.channels;
        for b in &mut self.blocks {
            b.bn.running_mean.copy_from_slice(&rest[..c]);
            b.bn.running_var.copy_from_slice(&rest[c..2 * c]);
            b.bn.initialized = initialized;
            rest = &rest[2 * c..];
        }
        Ok(())
    }
}
