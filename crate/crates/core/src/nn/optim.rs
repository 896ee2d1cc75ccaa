use super::matrix::{Matrix, Scalar};
use crate::error::{Error, Result};

/// Plain SGD update `p <- p - lr * g`; no momentum, no weight decay.
pub fn sgd_step<T: Scalar>(param: &mut Matrix<T>, grad: &Matrix<T>, lr: f64) -> Result<()> {
    if param.shape() != grad.shape() {
        return Err(Error::shape(
            "sgd_step",
            format!("param {:?}, grad {:?}", param.shape(), grad.shape()),
        ));
    }
    let lr = T::of_f64(lr);
    for (p, g) in param.data_mut().iter_mut().zip(grad.data()) {
        *p = *p - lr * *g;
    }
    Ok(())
}

/// A differentiable scalar objective over owned parameters and data.
///
/// `visit` yields `(parameter, gradient)` pairs in a fixed order; gradients
/// are those written by the most recent `loss_and_grad`.
pub trait Objective<T: Scalar> {
    fn loss_and_grad(&mut self) -> Result<f64>;

    /// Forward-only evaluation.
    fn loss(&mut self) -> Result<f64>;

    fn visit(&mut self, f: &mut dyn FnMut(&mut Matrix<T>, &Matrix<T>));

    /// Hash of every ReLU activation pattern seen by the last forward pass.
    fn activation_signature(&self) -> u64 {
        0
    }

    fn sgd(&mut self, lr: f64) -> Result<()> {
        let mut err = None;
        self.visit(&mut |p, g| {
            if err.is_none() {
                err = sgd_step(p, g, lr).err();
            }
        });
        err.map_or(Ok(()), Err)
    }

    fn all_finite(&mut self) -> bool {
        let mut ok = true;
        self.visit(&mut |p, g| ok &= p.all_finite() && g.all_finite());
        ok
    }
}

/// An `f32` objective with an `f64` twin evaluating the same function.
pub trait Shadowed: Objective<f32> {
    type Shadow: Objective<f64>;
    fn shadow(&self) -> Self::Shadow;
}
