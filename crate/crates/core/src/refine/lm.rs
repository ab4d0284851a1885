//! Damped Gauss-Newton for small dense problems.

use nalgebra::{DMatrix, DVector};

/// A least-squares problem over a parameter type with a local chart.
///
/// Residuals come in blocks of `block_size()` entries (one block per
/// correspondence). The Jacobian is taken with respect to the local
/// coordinates that `retract` consumes.
pub trait Problem {
    type Params: Clone;

    fn dof(&self) -> usize;
    fn block_size(&self) -> usize;
    fn residuals(&self, p: &Self::Params) -> DVector<f64>;
    fn jacobian(&self, p: &Self::Params) -> DMatrix<f64>;
    fn retract(&self, p: &Self::Params, delta: &DVector<f64>) -> Self::Params;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmConfig {
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub relative_tolerance: f64,
    pub initial_damping: f64,
    /// Truncated-quadratic loss: a block contributes `min(|r|², c²)`.
    pub truncation: Option<f64>,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            relative_tolerance: 1e-10,
            initial_damping: 1e-3,
            truncation: None,
        }
    }
}

impl LmConfig {
    pub fn truncated(threshold: f64) -> Self {
        Self {
            truncation: Some(threshold),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmReport {
    pub initial_cost: f64,
    pub cost: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit; the parameters are still the
    /// best seen.
    pub converged: bool,
}

const MAX_DAMPING: f64 = 1e16;

/// `Σ ρ(|r_b|²)` with `ρ` quadratic or truncated.
pub fn robust_cost(r: &DVector<f64>, block: usize, truncation: Option<f64>) -> f64 {
    let cap = truncation.map(|c| c * c);
    r.as_slice()
        .chunks(block)
        .map(|b| {
            let s: f64 = b.iter().map(|x| x * x).sum();
            match cap {
                Some(c) => s.min(c),
                None => s,
            }
        })
        .sum()
}

/// Blocks beyond the truncation radius are flat and drop out of the normal
/// equations.
fn active_rows(r: &DVector<f64>, block: usize, truncation: Option<f64>) -> Vec<bool> {
    let cap = truncation.map(|c| c * c);
    r.as_slice()
        .chunks(block)
        .flat_map(|b| {
            let s: f64 = b.iter().map(|x| x * x).sum();
            let on = cap.is_none_or(|c| s <= c) && s.is_finite();
            std::iter::repeat_n(on, b.len())
        })
        .collect()
}

pub fn minimize<P: Problem>(problem: &P, init: P::Params, cfg: &LmConfig) -> (P::Params, LmReport) {
    let block = problem.block_size().max(1);
    let mut x = init;
    let mut r = problem.residuals(&x);
    let mut cost = robust_cost(&r, block, cfg.truncation);
    let initial_cost = cost;
    let n = problem.dof();
    let mut report = LmReport {
        initial_cost,
        cost,
        iterations: 0,
        converged: true,
    };
    if n == 0 || cost == 0.0 || !cost.is_finite() {
        return (x, report);
    }
    let mut lambda = cfg.initial_damping;
    let mut fresh = true;
    let (mut jtj, mut jtr) = (DMatrix::zeros(n, n), DVector::zeros(n));
    report.converged = false;
    for it in 0..cfg.max_iterations {
        report.iterations = it + 1;
        if fresh {
            let j = problem.jacobian(&x);
            let active = active_rows(&r, block, cfg.truncation);
            jtj.fill(0.0);
            jtr.fill(0.0);
            for (i, on) in active.iter().enumerate() {
                if !on {
                    continue;
                }
                let row = j.row(i);
                jtj.ger(1.0, &row.transpose(), &row.transpose(), 1.0);
                jtr.axpy(r[i], &row.transpose(), 1.0);
            }
            fresh = false;
        }
        let dmax = jtj.diagonal().max();
        if dmax <= 0.0 || jtr.amax() == 0.0 {
            report.converged = true;
            break;
        }
        let mut a = jtj.clone();
        for k in 0..n {
            a[(k, k)] += lambda * jtj[(k, k)].max(1e-12 * dmax);
        }
        let step = a.cholesky().map(|c| c.solve(&(-&jtr)));
        let Some(step) = step else {
            lambda *= 10.0;
            if lambda > MAX_DAMPING {
                report.converged = true;
                break;
            }
            continue;
        };
        let cand = problem.retract(&x, &step);
        let rc = problem.residuals(&cand);
        let cc = robust_cost(&rc, block, cfg.truncation);
        if cc < cost {
            let decrease = cost - cc;
            x = cand;
            r = rc;
            cost = cc;
            lambda = (lambda / 10.0).max(1e-15);
            fresh = true;
            if decrease <= cfg.relative_tolerance * (cost + decrease) || cost == 0.0 {
                report.converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > MAX_DAMPING {
                report.converged = true;
                break;
            }
        }
    }
    report.cost = cost;
    (x, report)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Rosenbrock as two residuals.
    struct Rosen;

    impl Problem for Rosen {
        type Params = DVector<f64>;
        fn dof(&self) -> usize {
            2
        }
        fn block_size(&self) -> usize {
            1
        }
        fn residuals(&self, p: &DVector<f64>) -> DVector<f64> {
            DVector::from_vec(vec![10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0]])
        }
        fn jacobian(&self, p: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_row_slice(2, 2, &[-20.0 * p[0], 10.0, -1.0, 0.0])
        }
        fn retract(&self, p: &DVector<f64>, d: &DVector<f64>) -> DVector<f64> {
            p + d
        }
    }

    #[test]
    fn solves_rosenbrock() {
        let (x, rep) = minimize(&Rosen, DVector::from_vec(vec![-1.2, 1.0]), &LmConfig::default());
        assert!((x[0] - 1.0).abs() < 1e-8 && (x[1] - 1.0).abs() < 1e-8, "{x}");
        assert!(rep.converged && rep.cost <= rep.initial_cost);
    }

    struct Line {
        pts: Vec<(f64, f64)>,
    }

    impl Problem for Line {
        type Params = DVector<f64>;
        fn dof(&self) -> usize {
            2
        }
        fn block_size(&self) -> usize {
            1
        }
        fn residuals(&self, p: &DVector<f64>) -> DVector<f64> {
            DVector::from_iterator(self.pts.len(), self.pts.iter().map(|(x, y)| p[0] * x + p[1] - y))
        }
        fn jacobian(&self, _: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_fn(self.pts.len(), 2, |i, k| if k == 0 { self.pts[i].0 } else { 1.0 })
        }
        fn retract(&self, p: &DVector<f64>, d: &DVector<f64>) -> DVector<f64> {
            p + d
        }
    }

    #[test]
    fn truncation_ignores_gross_outliers() {
        let mut pts: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        pts.push((5.0, 100.0));
        pts.push((7.0, -80.0));
        let p = Line { pts };
        let init = DVector::from_vec(vec![1.9, 1.2]);
        let (x, _) = minimize(&p, init.clone(), &LmConfig::truncated(1.0));
        assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 1.0).abs() < 1e-8);
        let (y, _) = minimize(&p, init, &LmConfig::default());
        assert!((y[1] - 1.0).abs() > 1e-3);
    }

    #[test]
    fn zero_cost_start_is_kept() {
        let p = Line { pts: vec![(0.0, 1.0), (1.0, 3.0)] };
        let init = DVector::from_vec(vec![2.0, 1.0]);
        let (x, rep) = minimize(&p, init.clone(), &LmConfig::default());
        assert_eq!(x, init);
        assert_eq!(rep.iterations, 0);
        assert!(rep.converged);
    }
}
