use super::matrix::Matrix;
use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Per-entry squared-gradient accumulators for a fixed list of tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaGradState {
    accumulators: Vec<Matrix>,
    learning_rate: f64,
    epsilon: f64,
}

impl AdaGradState {
    pub fn new(shapes: &[(usize, usize)], learning_rate: f64, epsilon: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::Invalid(format!("learning rate must be positive, got {learning_rate}")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(AdaGradState {
            accumulators: shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect(),
            learning_rate,
            epsilon,
        })
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn accumulators(&self) -> &[Matrix] {
        &self.accumulators
    }

    /// Step size the next update would apply to a unit gradient, per entry.
    pub fn effective_step(&self, tensor: usize, entry: usize) -> f64 {
        let acc = self.accumulators[tensor].as_slice()[entry];
        self.learning_rate / (acc.sqrt() + self.epsilon)
    }

    /// `acc += g²; θ -= lr·g / (√acc + ε)` for every entry of every tensor.
    pub fn step(&mut self, params: &mut [&mut Matrix], grads: &[Matrix]) -> Result<()> {
        if params.len() != self.accumulators.len() || grads.len() != self.accumulators.len() {
            return Err(Error::Invalid(format!(
                "adagrad expects {} tensors, got {} params and {} grads",
                self.accumulators.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), acc) in params.iter().zip(grads).zip(&self.accumulators) {
            p.check_same_shape(g, "adagrad_step")?;
            p.check_same_shape(acc, "adagrad_step")?;
        }
        for ((p, g), acc) in params.iter_mut().zip(grads).zip(&mut self.accumulators) {
            let entries = p.as_mut_slice().iter_mut().zip(g.as_slice()).zip(acc.as_mut_slice());
            for ((theta, &gv), a) in entries {
                if gv == 0.0 {
                    continue;
                }
                *a += gv * gv;
                *theta -= self.learning_rate * gv / (a.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}
