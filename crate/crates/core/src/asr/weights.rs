use crate::linalg::Matrix;

/// Offset between consecutive tensors' phase seeds.
const TENSOR_STRIDE: f64 = 1009.0;

/// Closed-form weight source: tensor `k` gets
/// `W[i][j] = 0.1 * sin(seed_tag + 1009 k + 13 i + 7 j)`.
///
/// Tensors are numbered in construction order, so the same config always
/// yields the same parameters without any PRNG.
#[derive(Debug, Clone)]
pub struct WeightGen {
    seed_tag: i64,
    next_tensor: u32,
}

impl WeightGen {
    pub fn new(seed_tag: i64) -> Self {
        Self {
            seed_tag,
            next_tensor: 0,
        }
    }

    pub fn matrix(&mut self, rows: usize, cols: usize) -> Matrix {
        let phase = self.seed_tag as f64 + TENSOR_STRIDE * f64::from(self.next_tensor);
        self.next_tensor += 1;
        Matrix::from_fn(rows, cols, |i, j| 0.1 * (phase + 13.0 * i as f64 + 7.0 * j as f64).sin())
    }

    pub fn vector(&mut self, len: usize) -> Vec<f64> {
        self.matrix(1, len).into_vec()
    }

    pub fn tensors_issued(&self) -> u32 {
        self.next_tensor
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_tensor_follows_formula() {
        let mut g = WeightGen::new(3);
        let w = g.matrix(2, 3);
        assert_eq!(w[(1, 2)], 0.1 * (3.0f64 + 13.0 + 14.0).sin());
        assert_eq!(w[(0, 0)], 0.1 * 3f64.sin());
    }

    #[test]
    fn consecutive_tensors_differ() {
        let mut g = WeightGen::new(0);
        let a = g.matrix(3, 3);
        let b = g.matrix(3, 3);
        assert_ne!(a, b);
        assert_eq!(g.tensors_issued(), 2);
    }
}
