use crate::error::{Error, Result};
use crate::tensor::{Param, Tensor};

pub const DEFAULT_EPS: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.1;

/// Per-channel batch normalization over batch and spatial positions.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub channels: usize,
    pub eps: f64,
    pub momentum: f64,
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    /// Set by the first training-mode pass.
    pub initialized: bool,
    cache: Option<Cache>,
}

#[derive(Debug, Clone)]
struct Cache {
    shape: Vec<usize>,
    x_hat: Vec<f64>,
    inv_std: Vec<f64>,
}

impl BatchNorm {
    pub fn new(channels: usize, eps: f64, momentum: f64) -> Result<Self> {
        if !(eps > 0.0) || !(0.0..=1.0).contains(&momentum) {
            return Err(Error::Config(format!(
                "batch normalization needs eps > 0 and momentum in [0, 1], got {eps} and {momentum}"
            )));
        }
        Ok(Self {
            channels,
            eps,
            momentum,
            gamma: Param::new(vec![1.0; channels]),
            beta: Param::new(vec![0.0; channels]),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            initialized: false,
            cache: None,
        })
    }

    fn check(&self, x: &Tensor) -> Result<usize> {
        if x.shape().len() < 3 || x.channels() != self.channels {
            return Err(Error::Shape(format!(
                "batch normalization expects [batch, {}, spatial...], got {:?}",
                self.channels,
                x.shape()
            )));
        }
        Ok(x.spatial_len())
    }

    /// Training mode: normalizes with batch statistics and updates the
    /// running estimates.
    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let s = self.check(x)?;
        let (batch, c) = (x.batch(), self.channels);
        let m = (batch * s) as f64;
        let data = x.data();
        let mut x_hat = vec![0.0; x.len()];
        let mut inv_std = vec![0.0; c];
        let mut out = vec![0.0; x.len()];
        for ch in 0..c {
            let rows = (0..batch).map(|b| (b * c + ch) * s);
            let mean = rows.clone().map(|r| data[r..r + s].iter().sum::<f64>()).sum::<f64>() / m;
            let var = rows
                .clone()
                .map(|r| data[r..r + s].iter().map(|v| (v - mean) * (v - mean)).sum::<f64>())
                .sum::<f64>()
                / m;
            let is = 1.0 / (var + self.eps).sqrt();
            inv_std[ch] = is;
            let (g, bt) = (self.gamma.value[ch], self.beta.value[ch]);
            for r in rows {
                for j in r..r + s {
                    let h = (data[j] - mean) * is;
                    x_hat[j] = h;
                    out[j] = g * h + bt;
                }
            }
            let unbiased = if m > 1.0 { var * m / (m - 1.0) } else { var };
            if self.initialized {
                self.running_mean[ch] = (1.0 - self.momentum) * self.running_mean[ch] + self.momentum * mean;
                self.running_var[ch] = (1.0 - self.momentum) * self.running_var[ch] + self.momentum * unbiased;
            } else {
                self.running_mean[ch] = mean;
                self.running_var[ch] = unbiased;
            }
        }
        self.initialized = true;
        self.cache = Some(Cache {
            shape: x.shape().to_vec(),
            x_hat,
            inv_std,
        });
        Tensor::new(x.shape().to_vec(), out)
    }

    /// Eval mode: normalizes with the running statistics.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let s = self.check(x)?;
        if !self.initialized {
            return Err(Error::Uninitialized);
        }
        let c = self.channels;
        let mut out = x.clone();
        for (idx, row) in out.data_mut().chunks_exact_mut(s).enumerate() {
            let ch = idx % c;
            let scale = self.gamma.value[ch] / (self.running_var[ch] + self.eps).sqrt();
            let shift = self.beta.value[ch] - self.running_mean[ch] * scale;
            row.iter_mut().for_each(|v| *v = *v * scale + shift);
        }
        Ok(out)
    }

    pub fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::Shape("batch normalization backward without forward".into()))?;
        if grad.shape() != cache.shape.as_slice() {
            return Err(Error::Shape(format!(
                "batch normalization upstream gradient {:?}",
                grad.shape()
            )));
        }
        let (batch, c) = (cache.shape[0], self.channels);
        let s = grad.spatial_len();
        let m = (batch * s) as f64;
        let g = grad.data();
        let mut dx = vec![0.0; grad.len()];
        for ch in 0..c {
            let rows: Vec<usize> = (0..batch).map(|b| (b * c + ch) * s).collect();
            let (mut sum_dy, mut sum_dy_xhat) = (0.0, 0.0);
            for &r in &rows {
                for j in r..r + s {
                    sum_dy += g[j];
                    sum_dy_xhat += g[j] * cache.x_hat[j];
                }
            }
            self.beta.grad[ch] += sum_dy;
            self.gamma.grad[ch] += sum_dy_xhat;
            let k = self.gamma.value[ch] * cache.inv_std[ch] / m;
            for &r in &rows {
                for j in r..r + s {
                    dx[j] = k * (m * g[j] - sum_dy - cache.x_hat[j] * sum_dy_xhat);
                }
            }
        }
        Tensor::new(cache.shape.clone(), dx)
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.gamma, &mut self.beta]
    }
}
