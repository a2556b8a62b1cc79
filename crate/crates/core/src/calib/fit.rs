use serde::{Deserialize, Serialize};

use super::logistic::{logistic, LogisticParams};
use crate::error::{Error, Result};

/// Slope range searched by the coarse grid, in standardized score units.
pub const FIT_A_RANGE: (f64, f64) = (-100.0, 0.0);
const A_GRID_POINTS: usize = 201;
const B_SCAN_POINTS: usize = 241;
const GOLDEN_TOL: f64 = 1e-12;
const NM_MAX_ITER: usize = 2000;
const NM_RESTARTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: LogisticParams,
    /// RMSE of the fitted mapping on the fitting pairs.
    pub fit_rmse: f64,
    pub n: usize,
}

/// Mean squared error of `logistic(raw; params)` against the targets.
pub fn fit_mse(params: LogisticParams, pairs: &[(f64, f64)]) -> f64 {
    let sum: f64 = pairs
        .iter()
        .map(|&(x, y)| {
            let e = logistic(x, params) - y;
            e * e
        })
        .sum();
    sum / pairs.len() as f64
}

struct Objective<'a> {
    z: &'a [f64],
    y: &'a [f64],
}

impl Objective<'_> {
    fn eval(&self, a: f64, b: f64) -> f64 {
        let p = LogisticParams::new(a, b);
        let mut sum = 0.0;
        for (&z, &y) in self.z.iter().zip(self.y) {
            let e = logistic(z, p) - y;
            sum += e * e;
        }
        let mse = sum / self.z.len() as f64;
        if mse.is_finite() {
            mse
        } else {
            f64::INFINITY
        }
    }

    /// Best intercept for a fixed slope: scan, then golden section around the
    /// best scan point.
    fn best_b(&self, a: f64, zmax: f64) -> (f64, f64) {
        let span = a.abs() * (zmax + 1.0) + 30.0;
        let step = 2.0 * span / (B_SCAN_POINTS - 1) as f64;
        let mut best = (f64::INFINITY, 0usize);
        for i in 0..B_SCAN_POINTS {
            let f = self.eval(a, -span + step * i as f64);
            if f < best.0 {
                best = (f, i);
            }
        }
        let centre = -span + step * best.1 as f64;
        let (b, f) = golden(|b| self.eval(a, b), centre - step, centre + step);
        if f < best.0 {
            (b, f)
        } else {
            (centre, best.0)
        }
    }
}

fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > GOLDEN_TOL * (1.0 + lo.abs().max(hi.abs())) {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Nelder-Mead on two parameters from a fixed initial simplex.
fn nelder_mead(f: &impl Fn([f64; 2]) -> f64, start: [f64; 2]) -> ([f64; 2], f64) {
    let step = |v: f64| (0.1 * v.abs()).max(0.05);
    let mut simplex = [
        start,
        [start[0] + step(start[0]), start[1]],
        [start[0], start[1] + step(start[1])],
    ];
    let mut vals = simplex.map(f);
    for _ in 0..NM_MAX_ITER {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        simplex = order.map(|i| simplex[i]);
        vals = order.map(|i| vals[i]);

        let size = (1..3)
            .map(|k| (simplex[k][0] - simplex[0][0]).abs().max((simplex[k][1] - simplex[0][1]).abs()))
            .fold(0.0, f64::max);
        if (vals[2] - vals[0]).abs() <= 1e-18 && size <= 1e-10 {
            break;
        }

        let centroid = [(simplex[0][0] + simplex[1][0]) / 2.0, (simplex[0][1] + simplex[1][1]) / 2.0];
        let along = |t: f64| {
            [
                centroid[0] + t * (simplex[2][0] - centroid[0]),
                centroid[1] + t * (simplex[2][1] - centroid[1]),
            ]
        };
        let refl = along(-1.0);
        let fr = f(refl);
        if fr < vals[0] {
            let exp = along(-2.0);
            let fe = f(exp);
            if fe < fr {
                simplex[2] = exp;
                vals[2] = fe;
            } else {
                simplex[2] = refl;
                vals[2] = fr;
            }
        } else if fr < vals[1] {
            simplex[2] = refl;
            vals[2] = fr;
        } else {
            let (cont, fc) = if fr < vals[2] {
                let p = along(-0.5);
                (p, f(p))
            } else {
                let p = along(0.5);
                (p, f(p))
            };
            if fc < vals[2].min(fr) {
                simplex[2] = cont;
                vals[2] = fc;
            } else {
                for k in 1..3 {
                    simplex[k] = [
                        simplex[0][0] + 0.5 * (simplex[k][0] - simplex[0][0]),
                        simplex[0][1] + 0.5 * (simplex[k][1] - simplex[0][1]),
                    ];
                    vals[k] = f(simplex[k]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap_or(0);
    (simplex[best], vals[best])
}

/// Least-squares fit of `logistic(raw; a, b)` to the targets.
///
/// Scores are standardized first, so the search is unaffected by affine
/// rescaling of the raw scores; parameters are mapped back at the end.
pub fn fit_logistic(pairs: &[(f64, f64)]) -> Result<FitResult> {
    if pairs.len() < 3 {
        return Err(Error::Degenerate(format!("need at least 3 pairs, got {}", pairs.len())));
    }
    if !pairs.iter().all(|(x, y)| x.is_finite() && y.is_finite()) {
        return Err(Error::NonFinite("fit pair"));
    }
    let n = pairs.len() as f64;
    let mean = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let var = pairs.iter().map(|p| (p.0 - mean) * (p.0 - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd.is_nan() || sd <= 0.0 || pairs.iter().all(|p| p.0 == pairs[0].0) {
        return Err(Error::Degenerate("all raw scores are identical".into()));
    }
    let z: Vec<f64> = pairs.iter().map(|p| (p.0 - mean) / sd).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let zmax = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let obj = Objective { z: &z, y: &y };

    let (lo, hi) = FIT_A_RANGE;
    let mut best = ([0.0, 0.0], f64::INFINITY);
    for i in 0..A_GRID_POINTS {
        let a = lo + (hi - lo) * i as f64 / (A_GRID_POINTS - 1) as f64;
        let (b, f) = obj.best_b(a, zmax);
        if f < best.1 {
            best = ([a, b], f);
        }
    }

    let target = |p: [f64; 2]| obj.eval(p[0], p[1]);
    for _ in 0..NM_RESTARTS {
        let (p, f) = nelder_mead(&target, best.0);
        if f < best.1 {
            best = (p, f);
        } else {
            break;
        }
    }

    let [az, bz] = best.0;
    let params = LogisticParams::new(az / sd, bz - az * mean / sd);
    if !(params.a.is_finite() && params.b.is_finite()) {
        return Err(Error::NonFinite("fitted parameters"));
    }
    Ok(FitResult {
        params,
        fit_rmse: fit_mse(params, pairs).sqrt(),
        n: pairs.len(),
    })
}
