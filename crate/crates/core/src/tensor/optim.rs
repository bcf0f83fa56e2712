use serde::{Deserialize, Serialize};

use super::{Tensor, TensorError};

/// RMSProp with the accumulator inside the square root:
/// `acc = decay * acc + (1 - decay) * g^2`, `p -= lr * g / sqrt(acc + eps)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
    accumulators: Vec<Tensor>,
}

impl RmsProp {
    /// One zero accumulator per parameter, shaped like it.
    pub fn new(learning_rate: f64, decay: f64, epsilon: f64, params: &[Tensor]) -> Self {
        RmsProp {
            learning_rate,
            decay,
            epsilon,
            accumulators: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }

    pub fn accumulators(&self) -> &[Tensor] {
        &self.accumulators
    }

    /// Updates parameter `index` in place. A missing gradient counts as zero,
    /// which still decays the accumulator.
    pub fn step(
        &mut self,
        index: usize,
        param: &mut Tensor,
        grad: Option<&Tensor>,
    ) -> Result<(), TensorError> {
        let acc = &mut self.accumulators[index];
        if acc.shape() != param.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "rmsprop",
                left: acc.shape().to_vec(),
                right: param.shape().to_vec(),
            });
        }
        let Some(grad) = grad else {
            acc.data_mut().iter_mut().for_each(|a| *a *= self.decay);
            return Ok(());
        };
        if grad.shape() != param.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "rmsprop",
                left: grad.shape().to_vec(),
                right: param.shape().to_vec(),
            });
        }
        for ((p, a), g) in param
            .data_mut()
            .iter_mut()
            .zip(acc.data_mut())
            .zip(grad.data())
        {
            *a = self.decay * *a + (1.0 - self.decay) * g * g;
            *p -= self.learning_rate * g / (*a + self.epsilon).sqrt();
        }
        Ok(())
    }

    pub fn shapes_match(&self, params: &[Tensor]) -> bool {
        self.accumulators.len() == params.len()
            && self
                .accumulators
                .iter()
                .zip(params)
                .all(|(a, p)| a.shape() == p.shape())
    }
}
