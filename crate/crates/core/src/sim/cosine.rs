use crate::error::{Error, Result};
use crate::store::RepSequence;

/// Vectors with an L2 norm below this are treated as silent.
pub const ZERO_NORM_EPS: f64 = 1e-12;

fn norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc + x * x).sqrt()
}

/// Cosine from precomputed norms; zero-norm vectors score 0.
pub(crate) fn cos_with_norms(a: &[f64], b: &[f64], na: f64, nb: f64) -> f64 {
    if na < ZERO_NORM_EPS || nb < ZERO_NORM_EPS {
        return 0.0;
    }
    let dot = a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y);
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Cosine similarity and whether either side had (near) zero norm.
pub fn cosine_counted(a: &[f64], b: &[f64]) -> Result<(f64, bool)> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("cosine of {}- and {}-vectors", a.len(), b.len())));
    }
    if !a.iter().chain(b).all(|x| x.is_finite()) {
        return Err(Error::NonFinite("cosine input"));
    }
    let (na, nb) = (norm(a), norm(b));
    let zero = na < ZERO_NORM_EPS || nb < ZERO_NORM_EPS;
    Ok((cos_with_norms(a, b, na, nb), zero))
}

/// `a·b / (‖a‖‖b‖)`, defined as 0 when either norm is below
/// [`ZERO_NORM_EPS`].
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    cosine_counted(a, b).map(|(c, _)| c)
}

/// Frames widened to `f64` with their norms cached.
#[derive(Debug, Clone, PartialEq)]
pub struct Frames {
    dim: usize,
    data: Vec<f64>,
    norms: Vec<f64>,
}

impl Frames {
    pub fn from_rows(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) || data.is_empty() {
            return Err(Error::Shape(format!("{} values do not form {dim}-wide frames", data.len())));
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("frames"));
        }
        let norms = data.chunks_exact(dim).map(norm).collect();
        Ok(Self { dim, data, norms })
    }

    pub fn from_rep(rep: &RepSequence) -> Self {
        let data: Vec<f64> = rep.data().iter().map(|&v| f64::from(v)).collect();
        let norms = data.chunks_exact(rep.dim()).map(norm).collect();
        Self {
            dim: rep.dim(),
            data,
            norms,
        }
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn cos(&self, i: usize, other: &Frames, j: usize) -> f64 {
        cos_with_norms(self.frame(i), other.frame(j), self.norms[i], other.norms[j])
    }

    /// Number of frames among the first `n` whose norm is below
    /// [`ZERO_NORM_EPS`].
    pub fn zero_norm_count(&self, n: usize) -> usize {
        self.norms[..n.min(self.len())].iter().filter(|&&v| v < ZERO_NORM_EPS).count()
    }

    /// Halves the time resolution by averaging adjacent frame pairs; an odd
    /// last frame is kept as is.
    pub fn coarsen(&self) -> Frames {
        let mut data = Vec::with_capacity(self.len().div_ceil(2) * self.dim);
        for i in (0..self.len()).step_by(2) {
            if i + 1 < self.len() {
                let (a, b) = (self.frame(i), self.frame(i + 1));
                data.extend(a.iter().zip(b).map(|(x, y)| (x + y) * 0.5));
            } else {
                data.extend_from_slice(self.frame(i));
            }
        }
        let norms = data.chunks_exact(self.dim).map(norm).collect();
        Frames {
            dim: self.dim,
            data,
            norms,
        }
    }
}
