//! Three quadratics in three unknowns.
//!
//! One unknown is hidden in the coefficient field. The constant block of the
//! remaining pure quadratic monomials `{y², yz, z²}` is inverted so that each
//! of them becomes a linear form in `(y, z, 1)` over `ℝ[x]`. Two syzygies and
//! one lifted syzygy then give a 3x3 matrix `M(x)` with `M(x) [y z 1]ᵀ = 0`;
//! its determinant is a univariate polynomial whose real roots are the
//! candidate `x`, and `(y, z)` come from the null vector of `M(x)`.

use nalgebra::{Matrix3, Vector3};

use super::poly::{monomial_index, Poly3};
use super::univariate::{det3, Poly1};
use crate::error::{Error, Result};

const IMAG_TOL: f64 = 1e-8;
/// Roots must satisfy every input with this relative residual.
pub const ROOT_TOL: f64 = 1e-8;
const COND_LIMIT: f64 = 1e10;

/// A linear form in `(y, z, 1)` with coefficients in `ℝ[x]`.
type Form = [Poly1; 3];

fn form_add(a: &Form, b: &Form) -> Form {
    [a[0].add(&b[0]), a[1].add(&b[1]), a[2].add(&b[2])]
}

fn form_scale(a: &Form, s: &Poly1) -> Form {
    [a[0].mul(s), a[1].mul(s), a[2].mul(s)]
}

fn form_neg(a: &Form) -> Form {
    [a[0].scale(-1.0), a[1].scale(-1.0), a[2].scale(-1.0)]
}

/// Relative residual of `p` at `x`.
pub fn relative_residual(p: &Poly3, x: &Vector3<f64>) -> f64 {
    let scale = p.eval_abs(x);
    if scale == 0.0 {
        return 0.0;
    }
    p.eval(x).abs() / scale
}

fn max_relative_residual(eqs: &[Poly3], x: &Vector3<f64>) -> f64 {
    eqs.iter().map(|p| relative_residual(p, x)).fold(0.0, f64::max)
}

/// Permutes unknowns so that `hidden` becomes unknown 0.
fn permutation(hidden: usize) -> Matrix3<f64> {
    let order = match hidden {
        0 => [0, 1, 2],
        1 => [1, 0, 2],
        _ => [2, 0, 1],
    };
    // new var k is old var order[k]: old = P new
    let mut p = Matrix3::zeros();
    for (k, &o) in order.iter().enumerate() {
        p[(o, k)] = 1.0;
    }
    p
}

fn quadratic_block(eqs: &[Poly3; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|r, c| {
        let idx = [monomial_index(0, 2, 0), monomial_index(0, 1, 1), monomial_index(0, 0, 2)][c];
        eqs[r].coeffs[idx]
    })
}

fn condition(m: &Matrix3<f64>) -> f64 {
    let s = m.singular_values();
    let (mx, mn) = (s.max(), s.min());
    if mn <= 0.0 {
        f64::INFINITY
    } else {
        mx / mn
    }
}

/// Solves with unknown 0 hidden. Returns `None` if the construction is
/// ill-conditioned or root recovery is ambiguous.
fn solve_hidden_first(eqs: &[Poly3; 3]) -> Option<Vec<Vector3<f64>>> {
    let q = quadratic_block(eqs);
    if condition(&q) > COND_LIMIT {
        return None;
    }
    let qinv = q.try_inverse()?;
    // remaining part of each equation as a form in (y, z, 1) over R[x]
    let rest: Vec<Form> = eqs
        .iter()
        .map(|p| {
            [
                Poly1::linear(p.coeff(0, 1, 0), p.coeff(1, 1, 0)),
                Poly1::linear(p.coeff(0, 0, 1), p.coeff(1, 0, 1)),
                Poly1(vec![p.coeff(0, 0, 0), p.coeff(1, 0, 0), p.coeff(2, 0, 0)]),
            ]
        })
        .collect();
    // y² = -p[0], yz = -p[1], z² = -p[2]
    let p: Vec<Form> = (0..3)
        .map(|r| {
            let mut f: Form = [Poly1::zero(), Poly1::zero(), Poly1::zero()];
            for k in 0..3 {
                f = form_add(&f, &form_scale(&rest[k], &Poly1::constant(qinv[(r, k)])));
            }
            f
        })
        .collect();
    let ey: Form = [Poly1::constant(1.0), Poly1::zero(), Poly1::zero()];
    let ez: Form = [Poly1::zero(), Poly1::constant(1.0), Poly1::zero()];

    // z·p0 - y·p1 reduced to (y, z, 1)
    let f1 = {
        let (a0, b0, c0) = (&p[0][0], &p[0][1], &p[0][2]);
        let (a1, b1, c1) = (&p[1][0], &p[1][1], &p[1][2]);
        // z p0 = a0 yz + b0 z² + c0 z ; y p1 = a1 y² + b1 yz + c1 y
        let mut g = form_neg(&form_scale(&p[1], a0));
        g = form_add(&g, &form_neg(&form_scale(&p[2], b0)));
        g = form_add(&g, &form_scale(&ez, c0));
        g = form_add(&g, &form_scale(&p[0], a1));
        g = form_add(&g, &form_scale(&p[1], b1));
        g = form_add(&g, &form_neg(&form_scale(&ey, c1)));
        g
    };
    // z·p1 - y·p2
    let f2 = {
        let (a1, b1, c1) = (&p[1][0], &p[1][1], &p[1][2]);
        let (a2, b2, c2) = (&p[2][0], &p[2][1], &p[2][2]);
        let mut g = form_neg(&form_scale(&p[1], a1));
        g = form_add(&g, &form_neg(&form_scale(&p[2], b1)));
        g = form_add(&g, &form_scale(&ez, c1));
        g = form_add(&g, &form_scale(&p[0], a2));
        g = form_add(&g, &form_scale(&p[1], b2));
        g = form_add(&g, &form_neg(&form_scale(&ey, c2)));
        g
    };
    // y·F reduced: F_y y² + F_z yz + F_1 y
    let lift_y = |f: &Form| -> Form {
        let mut g = form_neg(&form_scale(&p[0], &f[0]));
        g = form_add(&g, &form_neg(&form_scale(&p[1], &f[1])));
        form_add(&g, &form_scale(&ey, &f[2]))
    };
    let lift_z = |f: &Form| -> Form {
        let mut g = form_neg(&form_scale(&p[1], &f[0]));
        g = form_add(&g, &form_neg(&form_scale(&p[2], &f[1])));
        form_add(&g, &form_scale(&ez, &f[2]))
    };

    let candidates = [lift_y(&f1), lift_z(&f1), lift_y(&f2), lift_z(&f2)];
    let row_scale = |f: &Form| f.iter().map(|q| q.max_abs_coeff()).fold(0.0, f64::max);
    let base = row_scale(&f1) * row_scale(&f2);
    let mut best: Option<(f64, Form)> = None;
    for third in candidates {
        let d = det3(&[f1.clone(), f2.clone(), third.clone()]);
        let rel = d.max_abs_coeff() / (base * row_scale(&third)).max(f64::MIN_POSITIVE);
        if best.as_ref().map_or(true, |(r, _)| rel > *r) {
            best = Some((rel, third));
        }
    }
    let (rel, third) = best?;
    if !(rel > 1e-10) {
        return None;
    }
    let rows = [f1, f2, third];
    let det = det3(&rows);
    let xs = det.real_roots(IMAG_TOL);

    let mut out = Vec::new();
    for x in xs {
        let (m, cols) = equilibrate(&Matrix3::from_fn(|r, c| rows[r][c].eval(x)));
        let svd = m.svd(false, true);
        let vt = svd.v_t?;
        let s = svd.singular_values;
        let (imin, imid) = sorted_min_two(&s);
        if s[imid] <= 1e-7 * s.max() {
            // several solutions share this x; let the caller change variables
            return None;
        }
        let n = cols.component_mul(&vt.row(imin).transpose());
        if n[2].abs() < 1e-12 * n.norm() {
            continue;
        }
        out.push(Vector3::new(x, n[0] / n[2], n[1] / n[2]));
    }
    Some(out)
}

/// Alternating row and column scaling towards unit max-norm. Returns the
/// scaled matrix and the column factors needed to map a null vector back.
fn equilibrate(m: &Matrix3<f64>) -> (Matrix3<f64>, Vector3<f64>) {
    let mut a = *m;
    let mut cols = Vector3::repeat(1.0);
    for _ in 0..4 {
        for r in 0..3 {
            let s = a.row(r).amax();
            if s > 0.0 {
                a.row_mut(r).scale_mut(1.0 / s);
            }
        }
        for c in 0..3 {
            let s = a.column(c).amax();
            if s > 0.0 {
                a.column_mut(c).scale_mut(1.0 / s);
                cols[c] /= s;
            }
        }
    }
    (a, cols)
}

fn sorted_min_two(s: &Vector3<f64>) -> (usize, usize) {
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|a, b| s[*a].total_cmp(&s[*b]));
    (idx[0], idx[1])
}

/// Gauss-Newton polish on the square system.
pub fn newton_polish(eqs: &[Poly3], x0: &Vector3<f64>, iterations: usize) -> Vector3<f64> {
    let grads: Vec<[Poly3; 3]> = eqs
        .iter()
        .map(|p| [p.derivative(0), p.derivative(1), p.derivative(2)])
        .collect();
    let mut x = *x0;
    let mut err = eqs.iter().map(|p| p.eval(&x).powi(2)).sum::<f64>();
    for _ in 0..iterations {
        if err == 0.0 {
            break;
        }
        let n = eqs.len();
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for k in 0..n {
            let g = Vector3::new(grads[k][0].eval(&x), grads[k][1].eval(&x), grads[k][2].eval(&x));
            let r = eqs[k].eval(&x);
            jtj += g * g.transpose();
            jtr += g * r;
        }
        let Some(step) = jtj.lu().solve(&jtr) else { break };
        let cand = x - step;
        let cerr = eqs.iter().map(|p| p.eval(&cand).powi(2)).sum::<f64>();
        if !(cerr < err) {
            break;
        }
        x = cand;
        err = cerr;
    }
    x
}

fn generic_rotation() -> Matrix3<f64> {
    crate::geometry::rotation_from_axis_angle(&Vector3::new(0.48, -0.61, 0.63).normalize(), 0.83)
}

fn attempt(eqs: &[Poly3; 3], change: &Matrix3<f64>) -> Option<Vec<Vector3<f64>>> {
    // try hidden unknowns in order of conditioning
    let mut options: Vec<(f64, Matrix3<f64>)> = (0..3)
        .map(|h| {
            let a = change * permutation(h);
            let sub = [
                eqs[0].linear_substitute(&a),
                eqs[1].linear_substitute(&a),
                eqs[2].linear_substitute(&a),
            ];
            (condition(&quadratic_block(&sub)), a)
        })
        .collect();
    options.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (cond, a) in options {
        if cond > COND_LIMIT {
            break;
        }
        let sub = [
            eqs[0].linear_substitute(&a),
            eqs[1].linear_substitute(&a),
            eqs[2].linear_substitute(&a),
        ];
        if let Some(sols) = solve_hidden_first(&sub) {
            return Some(sols.into_iter().map(|s| a * s).collect());
        }
    }
    None
}

/// All real solutions of three quadratic equations (at most 8).
pub fn solve_3q3(eqs: &[Poly3; 3]) -> Result<Vec<Vector3<f64>>> {
    for p in eqs {
        if p.degree().map_or(false, |d| d > 2) {
            return Err(Error::ShapeMismatch("solve_3q3 expects quadratics".into()));
        }
        if p.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NumericalFailure("non-finite coefficient".into()));
        }
    }
    let normalized: [Poly3; 3] = eqs.map(|p| {
        let s = p.max_abs_coeff();
        if s > 0.0 {
            p.scale(1.0 / s)
        } else {
            p
        }
    });
    let raw = attempt(&normalized, &Matrix3::identity())
        .or_else(|| attempt(&normalized, &generic_rotation()))
        .ok_or_else(|| Error::DegenerateSystem("no well-conditioned elimination".into()))?;

    let mut sols: Vec<Vector3<f64>> = Vec::new();
    for s in raw {
        let s = newton_polish(&normalized, &s, 6);
        if max_relative_residual(&normalized, &s) > ROOT_TOL {
            continue;
        }
        if sols.iter().any(|o| (o - s).norm() <= 1e-9 * (1.0 + s.norm())) {
            continue;
        }
        sols.push(s);
    }
    Ok(sols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn contains(sols: &[Vector3<f64>], p: &Vector3<f64>, tol: f64) -> bool {
        sols.iter().any(|s| (s - p).norm() < tol)
    }

    #[test]
    fn separable_system_has_eight_roots() {
        let eqs = [
            Poly3::term(1.0, 2, 0, 0) - Poly3::constant(1.0),
            Poly3::term(1.0, 0, 2, 0) - Poly3::constant(1.0),
            Poly3::term(1.0, 0, 0, 2) - Poly3::constant(1.0),
        ];
        let sols = solve_3q3(&eqs).unwrap();
        assert_eq!(sols.len(), 8);
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    assert!(contains(&sols, &Vector3::new(sx, sy, sz), 1e-10));
                }
            }
        }
    }

    #[test]
    fn coupled_factorable_system() {
        // x² = 1, y = x or y = -2, z = x or z = -3
        let x = Poly3::var(0);
        let y = Poly3::var(1);
        let z = Poly3::var(2);
        let eqs = [
            x * x - Poly3::constant(1.0),
            (y - x) * (y + Poly3::constant(2.0)),
            (z - x) * (z + Poly3::constant(3.0)),
        ];
        let sols = solve_3q3(&eqs).unwrap();
        assert_eq!(sols.len(), 8);
        assert!(contains(&sols, &Vector3::new(1.0, 1.0, 1.0), 1e-10));
        assert!(contains(&sols, &Vector3::new(-1.0, -1.0, -1.0), 1e-10));
        assert!(contains(&sols, &Vector3::new(-1.0, -2.0, -3.0), 1e-10));
    }

    /// Three quadratics vanishing on four planted points.
    fn planted_system(rng: &mut ChaCha8Rng) -> ([Poly3; 3], Vec<Vector3<f64>>) {
        let pts: Vec<Vector3<f64>> = (0..4)
            .map(|_| Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        // rows: monomial values at each point; quadratics = null space combos
        // padded to square so the SVD exposes the full null space
        let a = nalgebra::DMatrix::from_fn(10, 10, |r, c| {
            if r < 4 {
                super::super::poly::monomial_values(&pts[r], 2)[c]
            } else {
                0.0
            }
        });
        let svd = a.svd(false, true);
        let vt = svd.v_t.unwrap();
        let mut order: Vec<usize> = (0..10).collect();
        order.sort_by(|x, y| svd.singular_values[*y].total_cmp(&svd.singular_values[*x]));
        let mut eqs = [Poly3::zero(); 3];
        for e in eqs.iter_mut() {
            let w: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            for (k, wk) in w.iter().enumerate() {
                for c in 0..10 {
                    e.coeffs[c] += wk * vt[(order[4 + k], c)];
                }
            }
        }
        (eqs, pts)
    }

    #[test]
    fn recovers_planted_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let (eqs, pts) = planted_system(&mut rng);
            let sols = solve_3q3(&eqs).unwrap();
            assert!(sols.len() <= 8);
            for p in &pts {
                assert!(contains(&sols, p, 1e-7), "missing planted root {p:?} in {sols:?}");
            }
            for s in &sols {
                assert!(eqs.iter().all(|e| relative_residual(e, s) <= ROOT_TOL));
            }
        }
    }

    #[test]
    fn scaling_the_equations_changes_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (eqs, _) = planted_system(&mut rng);
        let a = solve_3q3(&eqs).unwrap();
        let scaled = [eqs[0].scale(1e4), eqs[1].scale(-3e-3), eqs[2].scale(7.0)];
        let b = solve_3q3(&scaled).unwrap();
        assert_eq!(a.len(), b.len());
        for s in &a {
            assert!(contains(&b, s, 1e-10));
        }
    }
}
