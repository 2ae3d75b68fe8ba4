use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

#[inline]
pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone)]
pub struct LeakyRelu {
    pub slope: f64,
    cache: Option<Tensor>,
}

impl LeakyRelu {
    pub fn new(slope: f64) -> Result<Self> {
        if !(slope > 0.0 && slope < 1.0) {
            return Err(Error::Config(format!("leaky slope must lie in (0, 1), got {slope}")));
        }
        Ok(Self { slope, cache: None })
    }

    pub fn infer(&self, x: &Tensor) -> Tensor {
        let mut y = x.clone();
        y.data_mut().iter_mut().for_each(|v| *v = leaky_relu(*v, self.slope));
        y
    }

    pub fn forward(&mut self, x: &Tensor) -> Tensor {
        self.cache = Some(x.clone());
        self.infer(x)
    }

    pub fn backward(&self, grad: &Tensor) -> Result<Tensor> {
        let x = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::Shape("leaky ReLU backward without forward".into()))?;
        x.same_shape(grad, "leaky ReLU gradient")?;
        let mut dx = grad.clone();
        for (d, &v) in dx.data_mut().iter_mut().zip(x.data()) {
            if v <= 0.0 {
                *d *= self.slope;
            }
        }
        Ok(dx)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Sigmoid {
    cache: Option<Tensor>,
}

impl Sigmoid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn infer(&self, x: &Tensor) -> Tensor {
        let mut y = x.clone();
        y.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v));
        y
    }

    pub fn forward(&mut self, x: &Tensor) -> Tensor {
        let y = self.infer(x);
        self.cache = Some(y.clone());
        y
    }

    pub fn backward(&self, grad: &Tensor) -> Result<Tensor> {
        let y = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::Shape("sigmoid backward without forward".into()))?;
        y.same_shape(grad, "sigmoid gradient")?;
        let mut dx = grad.clone();
        for (d, &s) in dx.data_mut().iter_mut().zip(y.data()) {
            *d *= s * (1.0 - s);
        }
        Ok(dx)
    }
}

/// Elementwise sum `a + b`. Its backward hands the upstream gradient to both
/// inputs unchanged.
pub fn residual_add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    a.same_shape(b, "residual sum")?;
    let mut out = a.clone();
    out.add_assign(b);
    Ok(out)
}
