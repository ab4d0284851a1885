//! Hidden-variable elimination and action-matrix root extraction.
//!
//! A matrix `M(ω)` whose entries are affine in `ω ∈ ℝ³` loses rank exactly
//! where all its maximal minors vanish. For an `n x k` matrix these minors are
//! forms of degree `k` in `ω`, and for the two shapes used here (`5 x 3` and
//! `6 x 4`) their count equals the number of degree-`k` monomials. The system
//! is then solved with the monomials of degree `< k` as a quotient-ring basis:
//! every degree-`k` monomial is rewritten through the inverted leading block,
//! multiplication by a fixed linear form becomes a square matrix, and the
//! roots are read off its eigenvectors.
//!
//! | shape | equations | elimination block | action matrix |
//! |-------|-----------|-------------------|---------------|
//! | 5x3   | 10 cubics   | 10x10 | 10x10 |
//! | 6x4   | 15 quartics | 15x15 | 20x20 |

use nalgebra::{DMatrix, Vector3};

use super::e3q3::{newton_polish, relative_residual};
use super::poly::{count_below, count_of_degree, monomial_index, monomial_values, Poly3, EXPONENTS};
use crate::error::{Error, Result};

/// Condition number beyond which the leading block counts as singular.
pub const CONDITION_LIMIT: f64 = 1e12;
/// `|im| <= IMAG_TOL (1 + |re|)` counts as real.
pub const IMAG_TOL: f64 = 1e-8;
/// Relative residual accepted for a returned root.
pub const ROOT_TOL: f64 = 1e-6;

/// Coefficients of the action form. Any generic choice works; fixed for
/// reproducibility.
const ACTION_FORM: [f64; 3] = [0.5377, -0.3183, 0.7769];

/// Equations over the documented graded monomial basis in `(x, y, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolySystem {
    pub equations: Vec<Poly3>,
    pub degree: usize,
}

impl PolySystem {
    pub fn unknowns(&self) -> usize {
        3
    }

    /// Coefficient rows over all monomials of degree `<= degree`.
    pub fn coefficient_matrix(&self) -> DMatrix<f64> {
        let cols = count_below(self.degree + 1);
        DMatrix::from_fn(self.equations.len(), cols, |r, c| self.equations[r].coeffs[c])
    }

    pub fn max_relative_residual(&self, x: &Vector3<f64>) -> f64 {
        self.equations
            .iter()
            .map(|p| relative_residual(p, x))
            .fold(0.0, f64::max)
    }
}

fn det_poly(m: &[Vec<Poly3>], rows: &[usize], cols: &[usize]) -> Poly3 {
    if rows.len() == 1 {
        return m[rows[0]][cols[0]];
    }
    let mut acc = Poly3::zero();
    let r0 = rows[0];
    for (j, &c) in cols.iter().enumerate() {
        let entry = m[r0][c];
        if entry.max_abs_coeff() == 0.0 {
            continue;
        }
        let sub_cols: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
        let minor = det_poly(m, &rows[1..], &sub_cols);
        let term = entry * minor;
        if j % 2 == 0 {
            acc += term;
        } else {
            acc = acc - term;
        }
    }
    acc
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// All maximal minors of a tall matrix with entries affine in the unknowns.
/// Row subsets are enumerated in lexicographic order.
pub fn maximal_minors(m: &[Vec<Poly3>]) -> Result<PolySystem> {
    let n = m.len();
    let k = m.first().map_or(0, |r| r.len());
    if k == 0 || n < k || m.iter().any(|r| r.len() != k) {
        return Err(Error::ShapeMismatch(format!("expected a tall rectangular matrix, got {n} rows")));
    }
    if m.iter().flatten().any(|p| p.degree().map_or(false, |d| d > 1)) {
        return Err(Error::ShapeMismatch("matrix entries must be affine in the unknowns".into()));
    }
    let cols: Vec<usize> = (0..k).collect();
    let equations = combinations(n, k)
        .iter()
        .map(|rows| det_poly(m, rows, &cols))
        .collect();
    Ok(PolySystem { equations, degree: k })
}

/// The 10 cubic `3x3` minors of a `5x3` matrix affine in `ω`.
pub fn hidden_variable_eliminate(m: &[Vec<Poly3>]) -> Result<PolySystem> {
    if m.len() != 5 || m.iter().any(|r| r.len() != 3) {
        return Err(Error::ShapeMismatch(format!(
            "hidden-variable elimination expects a 5x3 matrix, got {}x{}",
            m.len(),
            m.first().map_or(0, |r| r.len())
        )));
    }
    maximal_minors(m)
}

/// Action-matrix solve for a square-leading system: as many equations of
/// degree `d` as there are degree-`d` monomials.
fn solve_action(system: &PolySystem) -> Result<Vec<Vector3<f64>>> {
    let d = system.degree;
    let n_basis = count_below(d);
    let n_lead = count_of_degree(d);
    if system.equations.len() != n_lead {
        return Err(Error::ShapeMismatch(format!(
            "need {n_lead} equations of degree {d}, got {}",
            system.equations.len()
        )));
    }
    if system.equations.iter().flat_map(|p| p.coeffs.iter()).any(|c| !c.is_finite()) {
        return Err(Error::NumericalFailure("non-finite coefficient".into()));
    }
    let eqs: Vec<Poly3> = system
        .equations
        .iter()
        .map(|p| {
            let s = p.max_abs_coeff();
            if s > 0.0 {
                p.scale(1.0 / s)
            } else {
                *p
            }
        })
        .collect();

    let lead = DMatrix::from_fn(n_lead, n_lead, |r, c| eqs[r].coeffs[n_basis + c]);
    let rest = DMatrix::from_fn(n_lead, n_basis, |r, c| eqs[r].coeffs[c]);
    let svd = lead.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 0.0) || smax / smin > CONDITION_LIMIT {
        return Err(Error::DegenerateSystem(format!(
            "elimination block condition {:e}",
            if smin > 0.0 { smax / smin } else { f64::INFINITY }
        )));
    }
    // leading monomial r = -sum_s g[r, s] * basis_s
    let g = svd
        .solve(&rest, 0.0)
        .map_err(|e| Error::NumericalFailure(e.to_string()))?;

    let mut action = DMatrix::<f64>::zeros(n_basis, n_basis);
    for j in 0..n_basis {
        let e = EXPONENTS[j];
        for (k, &w) in ACTION_FORM.iter().enumerate() {
            let mut p = [e[0] as usize, e[1] as usize, e[2] as usize];
            p[k] += 1;
            let q = monomial_index(p[0], p[1], p[2]);
            if q < n_basis {
                action[(j, q)] += w;
            } else {
                let r = q - n_basis;
                for s in 0..n_basis {
                    action[(j, s)] -= w * g[(r, s)];
                }
            }
        }
    }

    let eigenvalues = action.complex_eigenvalues();
    let mut lambdas: Vec<f64> = eigenvalues
        .iter()
        .filter(|z| z.im.abs() <= IMAG_TOL * (1.0 + z.re.abs()))
        .map(|z| z.re)
        .collect();
    if eigenvalues.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NumericalFailure("eigen decomposition did not converge".into()));
    }
    lambdas.sort_by(|a, b| a.total_cmp(b));

    let mut roots: Vec<Vector3<f64>> = Vec::new();
    for lambda in lambdas {
        let mut shifted = action.clone();
        for i in 0..n_basis {
            shifted[(i, i)] -= lambda;
        }
        let svd = shifted.svd(false, true);
        let Some(vt) = svd.v_t else { continue };
        let imin = svd.singular_values.imin();
        let beta = vt.row(imin);
        if beta[0].abs() < 1e-12 * beta.norm() {
            continue;
        }
        let root = Vector3::new(beta[1] / beta[0], beta[2] / beta[0], beta[3] / beta[0]);
        if !root.iter().all(|v| v.is_finite()) {
            continue;
        }
        let root = newton_polish(&eqs, &root, 4);
        let res = eqs.iter().map(|p| relative_residual(p, &root)).fold(0.0, f64::max);
        if res > ROOT_TOL {
            continue;
        }
        if roots.iter().any(|o| (o - root).norm() <= 1e-9 * (1.0 + root.norm())) {
            continue;
        }
        roots.push(root);
    }
    Ok(roots)
}

/// Real roots of 10 cubics in 3 unknowns (at most 10).
pub fn solve_cubic_system(system: &PolySystem) -> Result<Vec<Vector3<f64>>> {
    if system.degree != 3 || system.equations.len() != 10 {
        return Err(Error::ShapeMismatch("expected 10 cubics".into()));
    }
    solve_action(system)
}

/// Real `ω` at which the `6x4` matrix `M(ω)` drops rank (at most 20).
/// The caller recovers the remaining unknowns from the null vector.
pub fn solve_baseline_system(m: &[Vec<Poly3>]) -> Result<Vec<Vector3<f64>>> {
    if m.len() != 6 || m.iter().any(|r| r.len() != 4) {
        return Err(Error::ShapeMismatch("baseline system expects a 6x4 matrix".into()));
    }
    let system = maximal_minors(m)?;
    solve_action(&system)
}

/// Evaluates every monomial of degree `<= d` at `x`; convenience for tests.
pub fn basis_values(x: &Vector3<f64>, d: usize) -> Vec<f64> {
    monomial_values(x, d)
}
