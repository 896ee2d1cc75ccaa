use serde::{Deserialize, Serialize};

use super::matrix::{Matrix, Scalar};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Fully connected layer `Y = X W^T + b` with `W` stored `out x in`.
#[derive(Clone, Debug)]
pub struct Dense<T: Scalar = f32> {
    pub weight: Matrix<T>,
    pub bias: Matrix<T>,
    pub grad_weight: Matrix<T>,
    pub grad_bias: Matrix<T>,
    input: Option<Matrix<T>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseShape {
    pub input: usize,
    pub output: usize,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self::from_params(Matrix::zeros(output, input), Matrix::zeros(1, output))
            .expect("consistent shapes")
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    /// Draws `out * in` uniforms from `rng` in row-major order.
    pub fn glorot(input: usize, output: usize, rng: &mut Rng) -> Self {
        let limit = (6.0 / (input + output) as f64).sqrt();
        let weight = Matrix::from_fn(output, input, |_, _| {
            T::of_f64(rng.uniform_range(-limit, limit))
        });
        Self::from_params(weight, Matrix::zeros(1, output)).expect("consistent shapes")
    }

    pub fn from_params(weight: Matrix<T>, bias: Matrix<T>) -> Result<Self> {
        if bias.rows() != 1 || bias.cols() != weight.rows() {
            return Err(Error::shape(
                "Dense::from_params",
                format!("weight {:?}, bias {:?}", weight.shape(), bias.shape()),
            ));
        }
        Ok(Self {
            grad_weight: Matrix::zeros(weight.rows(), weight.cols()),
            grad_bias: Matrix::zeros(1, weight.rows()),
            weight,
            bias,
            input: None,
        })
    }

    pub fn shape(&self) -> DenseShape {
        DenseShape {
            input: self.weight.cols(),
            output: self.weight.rows(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    /// Forward pass without caching (inference).
    pub fn apply(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape(
                "affine_forward",
                format!("input {:?} into layer {}->{}", x.shape(), self.input_dim(), self.output_dim()),
            ));
        }
        let mut y = x.matmul_nt(&self.weight)?;
        y.add_row(&self.bias)?;
        Ok(y)
    }

    /// Forward pass caching `x` for the next `backward`.
    pub fn forward(&mut self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let y = self.apply(x)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    /// Stores `dL/dW` and `dL/db` (overwriting) and returns `dL/dX` when
    /// `want_input_grad` is set.
    pub fn backward(&mut self, grad_out: &Matrix<T>, want_input_grad: bool) -> Result<Option<Matrix<T>>> {
        let input = self
            .input
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("backward before forward".into()))?;
        if grad_out.cols() != self.output_dim() || grad_out.rows() != input.rows() {
            return Err(Error::shape(
                "affine_backward",
                format!("grad {:?} for output ({}, {})", grad_out.shape(), input.rows(), self.output_dim()),
            ));
        }
        self.grad_weight = grad_out.matmul_tn(input)?;
        self.grad_bias = grad_out.sum_rows();
        if want_input_grad {
            Ok(Some(grad_out.matmul(&self.weight)?))
        } else {
            Ok(None)
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad_weight.fill(T::zero());
        self.grad_bias.fill(T::zero());
    }

    pub fn cast<U: Scalar>(&self) -> Dense<U> {
        Dense::from_params(self.weight.cast(), self.bias.cast()).expect("consistent shapes")
    }

    pub fn visit(&mut self, f: &mut dyn FnMut(&mut Matrix<T>, &Matrix<T>)) {
        f(&mut self.weight, &self.grad_weight);
        f(&mut self.bias, &self.grad_bias);
    }

    pub fn params(&self) -> [&Matrix<T>; 2] {
        [&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut Matrix<T>; 2] {
        [&mut self.weight, &mut self.bias]
    }

    pub fn grads(&self) -> [&Matrix<T>; 2] {
        [&self.grad_weight, &self.grad_bias]
    }
}

pub fn relu_forward<T: Scalar>(x: &Matrix<T>) -> Matrix<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Masks `grad_out` by `input > 0`; the subgradient at exactly zero is zero.
pub fn relu_backward<T: Scalar>(input: &Matrix<T>, grad_out: &Matrix<T>) -> Result<Matrix<T>> {
    if input.shape() != grad_out.shape() {
        return Err(Error::shape(
            "relu_backward",
            format!("{:?} vs {:?}", input.shape(), grad_out.shape()),
        ));
    }
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Matrix::new(input.rows(), input.cols(), data)
}

/// Hash of the sign pattern `x > 0`, used to detect when a perturbation
/// crosses a ReLU kink.
pub fn relu_pattern_hash<T: Scalar>(x: &Matrix<T>, state: &mut u64) {
    for chunk in x.data().chunks(64) {
        let mut bits = 0u64;
        for (i, v) in chunk.iter().enumerate() {
            if *v > T::zero() {
                bits |= 1 << i;
            }
        }
        *state = crate::rng::splitmix64(*state ^ bits);
    }
}
