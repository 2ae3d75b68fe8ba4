use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Param, Tensor};

/// Fully connected layer `y = W x + b` on `[batch, in]` inputs.
#[derive(Debug, Clone)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `[outputs, inputs]`
    pub weight: Param,
    pub bias: Param,
    cache: Option<Tensor>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let weight = (0..inputs * outputs).map(|_| rng.gen_range(-bound..bound)).collect();
        let bias = (0..outputs).map(|_| rng.gen_range(-bound..bound)).collect();
        Self::from_params(inputs, outputs, weight, bias)
    }

    pub fn from_params(inputs: usize, outputs: usize, weight: Vec<f64>, bias: Vec<f64>) -> Self {
        assert_eq!(weight.len(), inputs * outputs);
        assert_eq!(bias.len(), outputs);
        Self {
            inputs,
            outputs,
            weight: Param::new(weight),
            bias: Param::new(bias),
            cache: None,
        }
    }

    fn check(&self, x: &Tensor) -> Result<()> {
        if x.shape().len() != 2 || x.shape()[1] != self.inputs {
            return Err(Error::Shape(format!(
                "dense expects [batch, {}], got {:?}",
                self.inputs,
                x.shape()
            )));
        }
        Ok(())
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        self.check(x)?;
        let batch = x.batch();
        let mut out = Vec::with_capacity(batch * self.outputs);
        for b in 0..batch {
            let xb = x.item(b);
            for j in 0..self.outputs {
                let row = &self.weight.value[j * self.inputs..(j + 1) * self.inputs];
                let dot: f64 = row.iter().zip(xb).map(|(w, v)| w * v).sum();
                out.push(dot + self.bias.value[j]);
            }
        }
        Tensor::new(vec![batch, self.outputs], out)
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = self.infer(x)?;
        self.cache = Some(x.clone());
        Ok(y)
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let x = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::Shape("dense backward without forward".into()))?;
        if grad.shape() != [x.batch(), self.outputs] {
            return Err(Error::Shape(format!("dense upstream gradient {:?}", grad.shape())));
        }
        let mut dx = vec![0.0; x.len()];
        for b in 0..x.batch() {
            let (xb, gb) = (x.item(b), grad.item(b));
            let dxb = &mut dx[b * self.inputs..(b + 1) * self.inputs];
            for (j, &g) in gb.iter().enumerate() {
                self.bias.grad[j] += g;
                let wrow = &self.weight.value[j * self.inputs..(j + 1) * self.inputs];
                let grow = &mut self.weight.grad[j * self.inputs..(j + 1) * self.inputs];
                for i in 0..self.inputs {
                    grow[i] += g * xb[i];
                    dxb[i] += g * wrow[i];
                }
            }
        }
        Tensor::new(x.shape().to_vec(), dx)
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.weight, &mut self.bias]
    }
}
