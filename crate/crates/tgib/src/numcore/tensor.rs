//! Dense row-major `f64` matrices. Parameters live in `Tensor`s between
//! training steps; tape nodes copy values in and gradients back out.

use rand::Rng;

use super::NumError;

/// A dense matrix with an optional accumulated gradient.
///
/// Scalars are `[1, 1]`, row vectors `[1, n]`. The gradient is `None` until
/// a backward pass has been harvested into it.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: [usize; 2],
    pub data: Vec<f64>,
    pub requires_grad: bool,
    pub grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            shape: [rows, cols],
            data: vec![0.0; rows * cols],
            requires_grad: true,
            grad: None,
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumError> {
        if data.len() != rows * cols {
            return Err(NumError::LengthMismatch {
                op: "from_vec",
                len: data.len(),
                shape: [rows, cols],
            });
        }
        Ok(Tensor {
            shape: [rows, cols],
            data,
            requires_grad: true,
            grad: None,
        })
    }

    /// Xavier-uniform init: entries from `U(-a, a)` with `a = sqrt(6/(rows+cols))`.
    pub fn xavier_uniform(rows: usize, cols: usize, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Tensor {
            shape: [rows, cols],
            data,
            requires_grad: true,
            grad: None,
        }
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Adds `g` into the stored gradient, allocating zeros on first use.
    pub fn accumulate_grad(&mut self, g: &[f64]) -> Result<(), NumError> {
        if g.len() != self.data.len() {
            return Err(NumError::LengthMismatch {
                op: "accumulate_grad",
                len: g.len(),
                shape: self.shape,
            });
        }
        let grad = self.grad.get_or_insert_with(|| vec![0.0; self.data.len()]);
        for (acc, gi) in grad.iter_mut().zip(g) {
            *acc += gi;
        }
        Ok(())
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }
}
