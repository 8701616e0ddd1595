use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::gemm::gemm;
use crate::nn::init::he_normal;
use crate::nn::params::Params;
use crate::nn::tensor::Tensor;

/// Fully connected layer `y = x W^T + b` on `[batch, inputs]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub inputs: usize,
    pub outputs: usize,
    /// `[outputs][inputs]`
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(inputs: usize, outputs: usize) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(Error::Shape("linear layer dimensions must be positive".into()));
        }
        Ok(Self {
            inputs,
            outputs,
            weight: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        })
    }

    pub fn init<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Result<Self> {
        let mut l = Self::zeros(inputs, outputs)?;
        l.weight = he_normal(rng, inputs, l.weight.len());
        Ok(l)
    }

    /// `x` is read as `rows x inputs`, whatever its declared shape.
    pub fn forward_rows(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() % self.inputs != 0 {
            return Err(Error::Shape(format!(
                "linear layer expects rows of {} inputs, got {} values",
                self.inputs,
                x.len()
            )));
        }
        let rows = x.len() / self.inputs;
        let mut out = Vec::with_capacity(rows * self.outputs);
        for _ in 0..rows {
            out.extend_from_slice(&self.bias);
        }
        gemm(rows, self.inputs, self.outputs, 1.0, x, false, &self.weight, true, 1.0, &mut out);
        Ok(out)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let rows = x.len() / self.inputs;
        let y = self.forward_rows(x.data())?;
        Ok(Tensor::from_parts(vec![rows, self.outputs], y))
    }

    /// Accumulates into `grad`; returns the input gradient when `need_input` is set.
    pub fn backward_rows(&self, x: &[f64], dy: &[f64], grad: &mut Linear, need_input: bool) -> Option<Vec<f64>> {
        let rows = x.len() / self.inputs;
        assert_eq!(dy.len(), rows * self.outputs, "linear backward: gradient shape");
        gemm(self.outputs, rows, self.inputs, 1.0, dy, true, x, false, 1.0, &mut grad.weight);
        for r in 0..rows {
            for (gb, d) in grad.bias.iter_mut().zip(&dy[r * self.outputs..(r + 1) * self.outputs]) {
                *gb += d;
            }
        }
        need_input.then(|| {
            let mut dx = vec![0.0; rows * self.inputs];
            gemm(rows, self.outputs, self.inputs, 1.0, dy, false, &self.weight, false, 0.0, &mut dx);
            dx
        })
    }
}

impl Params for Linear {
    fn visit(&self, f: &mut dyn FnMut(&str, &[f64])) {
        f("weight", &self.weight);
        f("bias", &self.bias);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        f("weight", &mut self.weight);
        f("bias", &mut self.bias);
    }
}

/// Scalar regression head: a [`Linear`] with one output.
pub type LinearHead = Linear;

pub fn linear_head(inputs: usize, weights: Vec<f64>, bias: f64) -> Result<LinearHead> {
    if weights.len() != inputs {
        return Err(Error::Shape(format!("head expects {inputs} weights, got {}", weights.len())));
    }
    Ok(Linear {
        inputs,
        outputs: 1,
        weight: weights,
        bias: vec![bias],
    })
}

/// `U . x + c` for a flattened feature vector.
pub fn linear_forward(input: &[f64], head: &LinearHead) -> Result<f64> {
    if head.outputs != 1 || input.len() != head.inputs {
        return Err(Error::Shape(format!(
            "head of {} inputs got a vector of {}",
            head.inputs,
            input.len()
        )));
    }
    Ok(head.forward_rows(input)?[0])
}
