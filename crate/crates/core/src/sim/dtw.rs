//! Dynamic time warping with `1 - cosine` as the local distance.
//!
//! Steps are `(1,0)`, `(0,1)` and `(1,1)` with no slope constraint. The fast
//! variant coarsens both sequences by averaging adjacent frames, solves the
//! coarse problem recursively, projects the coarse path back up, widens it
//! by `radius` cells, and solves the fine problem inside that corridor.

use crate::error::{Error, Result};

use super::cosine::Frames;

/// Sequences at or below this length are aligned exactly.
pub const MIN_COARSE_FRAMES: usize = 16;

/// A monotone alignment between two sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpPath {
    pairs: Vec<(usize, usize)>,
    cost: f64,
}

impl WarpPath {
    /// Checks the boundary and step rules against sequence lengths.
    pub fn new(pairs: Vec<(usize, usize)>, len_a: usize, len_b: usize, cost: f64) -> Result<Self> {
        let path = Self { pairs, cost };
        path.validate(len_a, len_b)?;
        Ok(path)
    }

    pub fn validate(&self, len_a: usize, len_b: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidPath(m));
        match (self.pairs.first(), self.pairs.last()) {
            (Some(&(0, 0)), Some(&end)) if end == (len_a.wrapping_sub(1), len_b.wrapping_sub(1)) => {}
            (first, last) => {
                return bad(format!(
                    "path runs {first:?} -> {last:?}, expected (0, 0) -> ({}, {})",
                    len_a as isize - 1,
                    len_b as isize - 1
                ))
            }
        }
        for w in self.pairs.windows(2) {
            let (di, dj) = (w[1].0.wrapping_sub(w[0].0), w[1].1.wrapping_sub(w[0].1));
            if !matches!((di, dj), (1, 0) | (0, 1) | (1, 1)) {
                return bad(format!("illegal step {:?} -> {:?}", w[0], w[1]));
            }
        }
        Ok(())
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Number of aligned pairs.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Accumulated `1 - cosine` along the path.
    pub fn cost(&self) -> f64 {
        self.cost
    }
}

/// Inclusive column range allowed in each row.
type Window = Vec<(usize, usize)>;

fn full_window(len_a: usize, len_b: usize) -> Window {
    vec![(0, len_b - 1); len_a]
}

fn dtw_in_window(a: &Frames, b: &Frames, window: &Window) -> WarpPath {
    let (n, m) = (a.len(), b.len());
    debug_assert_eq!(window.len(), n);
    let mut acc: Vec<Vec<f64>> = window.iter().map(|&(lo, hi)| vec![f64::INFINITY; hi - lo + 1]).collect();
    let get = |acc: &Vec<Vec<f64>>, i: usize, j: usize| -> f64 {
        let (lo, hi) = window[i];
        if j < lo || j > hi {
            f64::INFINITY
        } else {
            acc[i][j - lo]
        }
    };
    for i in 0..n {
        let (lo, hi) = window[i];
        for j in lo..=hi {
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 { get(&acc, i - 1, j - 1) } else { f64::INFINITY };
                let up = if i > 0 { get(&acc, i - 1, j) } else { f64::INFINITY };
                let left = if j > 0 { get(&acc, i, j - 1) } else { f64::INFINITY };
                diag.min(up).min(left)
            };
            acc[i][j - lo] = (1.0 - a.cos(i, b, j)) + best;
        }
    }
    let cost = get(&acc, n - 1, m - 1);
    debug_assert!(cost.is_finite(), "window must admit a path");

    let mut pairs = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while (i, j) != (0, 0) {
        let diag = if i > 0 && j > 0 { get(&acc, i - 1, j - 1) } else { f64::INFINITY };
        let up = if i > 0 { get(&acc, i - 1, j) } else { f64::INFINITY };
        let left = if j > 0 { get(&acc, i, j - 1) } else { f64::INFINITY };
        // ties: diagonal, then the step that advanced i
        (i, j) = if diag <= up && diag <= left {
            (i - 1, j - 1)
        } else if up <= left {
            (i - 1, j)
        } else {
            (i, j - 1)
        };
        pairs.push((i, j));
    }
    pairs.reverse();
    WarpPath { pairs, cost }
}

/// Full `O(T1·T2)` dynamic program.
pub fn dtw_path_exact(a: &Frames, b: &Frames) -> WarpPath {
    dtw_in_window(a, b, &full_window(a.len(), b.len()))
}

fn project_window(coarse: &WarpPath, len_a: usize, len_b: usize, radius: usize) -> Window {
    let mut window = vec![(usize::MAX, 0usize); len_a];
    for &(ci, cj) in coarse.pairs() {
        let rows = (2 * ci).saturating_sub(radius)..=(2 * ci + 1 + radius).min(len_a - 1);
        let lo = (2 * cj).saturating_sub(radius);
        let hi = (2 * cj + 1 + radius).min(len_b - 1);
        for r in rows {
            let w = &mut window[r];
            w.0 = w.0.min(lo);
            w.1 = w.1.max(hi);
        }
    }
    window
}

/// Multilevel approximate DTW. Never cheaper than [`dtw_path_exact`]; equal
/// to it whenever `radius` covers the whole cost matrix.
pub fn dtw_path_fast(a: &Frames, b: &Frames, radius: usize) -> WarpPath {
    let min_size = MIN_COARSE_FRAMES.max(radius + 2);
    if a.len() <= min_size || b.len() <= min_size {
        return dtw_path_exact(a, b);
    }
    let coarse = dtw_path_fast(&a.coarsen(), &b.coarsen(), radius);
    let window = project_window(&coarse, a.len(), b.len(), radius);
    dtw_in_window(a, b, &window)
}

/// Accumulated `1 - cosine` over the pairs of `path`.
pub fn path_cost(a: &Frames, b: &Frames, path: &WarpPath) -> Result<f64> {
    path.validate(a.len(), b.len())?;
    Ok(path.pairs().iter().fold(0.0, |acc, &(i, j)| (1.0 - a.cos(i, b, j)) + acc))
}

/// Mean cosine over the aligned pairs.
pub fn warped_sim(a: &Frames, b: &Frames, path: &WarpPath) -> Result<f64> {
    path.validate(a.len(), b.len())?;
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("frame widths differ: {} vs {}", a.dim(), b.dim())));
    }
    let total = path.pairs().iter().fold(0.0, |acc, &(i, j)| acc + a.cos(i, b, j));
    Ok((total / path.len() as f64).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn frames(rows: &[&[f64]]) -> Frames {
        let dim = rows[0].len();
        Frames::from_rows(dim, rows.concat()).unwrap()
    }

    fn random_frames(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Frames {
        Frames::from_rows(dim, (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Minimum cost over every monotone path, by exhaustive recursion.
    fn brute_force_cost(a: &Frames, b: &Frames) -> f64 {
        fn go(a: &Frames, b: &Frames, i: usize, j: usize) -> f64 {
            let here = 1.0 - a.cos(i, b, j);
            if i + 1 == a.len() && j + 1 == b.len() {
                return here;
            }
            let mut best = f64::INFINITY;
            if i + 1 < a.len() {
                best = best.min(go(a, b, i + 1, j));
            }
            if j + 1 < b.len() {
                best = best.min(go(a, b, i, j + 1));
            }
            if i + 1 < a.len() && j + 1 < b.len() {
                best = best.min(go(a, b, i + 1, j + 1));
            }
            here + best
        }
        go(a, b, 0, 0)
    }

    #[test]
    fn exact_matches_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..60 {
            let n = rng.random_range(1..6);
            let m = rng.random_range(1..6);
            let a = random_frames(&mut rng, n, 3);
            let b = random_frames(&mut rng, m, 3);
            let p = dtw_path_exact(&a, &b);
            assert_abs_diff_eq!(p.cost(), brute_force_cost(&a, &b), epsilon = 1e-12);
            assert_abs_diff_eq!(path_cost(&a, &b, &p).unwrap(), p.cost(), epsilon = 1e-12);
        }
    }

    #[test]
    fn identical_sequences_take_the_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_frames(&mut rng, 9, 4);
        let p = dtw_path_exact(&a, &a);
        assert_eq!(p.pairs(), (0..9).map(|i| (i, i)).collect::<Vec<_>>());
        assert_abs_diff_eq!(p.cost(), 0.0, epsilon = 1e-12);
        for radius in [0, 1, 5] {
            let big = random_frames(&mut rng, 70, 4);
            assert_abs_diff_eq!(dtw_path_fast(&big, &big, radius).cost(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_frame_is_forced() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_frames(&mut rng, 1, 3);
        let b = random_frames(&mut rng, 6, 3);
        let p = dtw_path_exact(&a, &b);
        assert_eq!(p.pairs(), (0..6).map(|j| (0, j)).collect::<Vec<_>>());
    }

    #[test]
    fn optimum_beats_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = random_frames(&mut rng, 5, 3);
            let b = random_frames(&mut rng, 5, 3);
            let diag = WarpPath::new((0..5).map(|i| (i, i)).collect(), 5, 5, 0.0).unwrap();
            assert!(dtw_path_exact(&a, &b).cost() <= path_cost(&a, &b, &diag).unwrap() + 1e-12);
        }
    }

    #[test]
    fn fast_never_beats_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..30 {
            let n = rng.random_range(17..60);
            let m = rng.random_range(17..60);
            let a = random_frames(&mut rng, n, 2);
            let b = random_frames(&mut rng, m, 2);
            let exact = dtw_path_exact(&a, &b);
            for radius in [0, 1, 3] {
                let fast = dtw_path_fast(&a, &b, radius);
                fast.validate(n, m).unwrap();
                assert!(fast.cost() >= exact.cost() - 1e-12);
            }
            assert_abs_diff_eq!(dtw_path_fast(&a, &b, n.max(m)).cost(), exact.cost(), epsilon = 1e-9);
        }
    }

    #[test]
    fn stretching_is_free() {
        let u = [1.0, 0.0];
        let v = [0.0, 1.0];
        let a = frames(&[&u, &v]);
        let b = frames(&[&u, &u, &v]);
        let p = dtw_path_exact(&a, &b);
        assert_eq!(warped_sim(&a, &b, &p).unwrap(), 1.0);
        assert_eq!(p.pairs(), &[(0, 0), (0, 1), (1, 2)]);
    }

    #[test]
    fn orthogonal_pairs_score_zero() {
        let a = frames(&[&[1.0, 0.0], &[1.0, 0.0]]);
        let b = frames(&[&[0.0, 1.0], &[0.0, 2.0]]);
        let p = WarpPath::new(vec![(0, 0), (1, 1)], 2, 2, 0.0).unwrap();
        assert_eq!(warped_sim(&a, &b, &p).unwrap(), 0.0);
    }

    #[test]
    fn invalid_paths_rejected() {
        assert!(WarpPath::new(vec![(0, 0), (2, 1)], 3, 2, 0.0).is_err());
        assert!(WarpPath::new(vec![(0, 1), (1, 1)], 2, 2, 0.0).is_err());
        assert!(WarpPath::new(vec![(0, 0), (1, 0)], 2, 2, 0.0).is_err());
        assert!(WarpPath::new(vec![], 1, 1, 0.0).is_err());
        assert!(WarpPath::new(vec![(0, 0), (1, 1), (1, 0), (1, 1)], 2, 2, 0.0).is_err());
        let a = frames(&[&[1.0], &[2.0]]);
        let bad = WarpPath {
            pairs: vec![(0, 0)],
            cost: 0.0,
        };
        assert!(warped_sim(&a, &a, &bad).is_err());
    }
}
