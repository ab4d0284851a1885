//! Univariate polynomials with ascending coefficients `c[0] + c[1] x + ...`.

use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Poly1(pub Vec<f64>);

impl Poly1 {
    pub fn constant(c: f64) -> Self {
        Poly1(vec![c])
    }

    /// `c0 + c1 x`.
    pub fn linear(c0: f64, c1: f64) -> Self {
        Poly1(vec![c0, c1])
    }

    pub fn zero() -> Self {
        Poly1(vec![0.0])
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly1 {
        if self.0.len() <= 1 {
            return Poly1::zero();
        }
        Poly1(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * k as f64)
                .collect(),
        )
    }

    pub fn add(&self, rhs: &Poly1) -> Poly1 {
        let n = self.0.len().max(rhs.0.len());
        Poly1(
            (0..n)
                .map(|k| self.0.get(k).unwrap_or(&0.0) + rhs.0.get(k).unwrap_or(&0.0))
                .collect(),
        )
    }

    pub fn sub(&self, rhs: &Poly1) -> Poly1 {
        self.add(&rhs.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Poly1 {
        Poly1(self.0.iter().map(|c| c * s).collect())
    }

    pub fn mul(&self, rhs: &Poly1) -> Poly1 {
        let mut out = vec![0.0; self.0.len() + rhs.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in rhs.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly1(out)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.0.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Drops leading coefficients that are negligible relative to the largest.
    pub fn trimmed(&self, rel_tol: f64) -> Poly1 {
        let scale = self.max_abs_coeff();
        let mut c = self.0.clone();
        while c.len() > 1 && c.last().map_or(false, |l| l.abs() <= rel_tol * scale) {
            c.pop();
        }
        Poly1(c)
    }

    /// Real roots via eigenvalues of the companion matrix, Newton polished.
    ///
    /// `imag_tol` accepts eigenvalues with `|im| <= imag_tol * (1 + |re|)`.
    pub fn real_roots(&self, imag_tol: f64) -> Vec<f64> {
        let p = self.trimmed(1e-14);
        let n = p.0.len() - 1;
        if n == 0 {
            return Vec::new();
        }
        let lead = p.0[n];
        let mut comp = DMatrix::<f64>::zeros(n, n);
        for k in 0..n {
            comp[(0, k)] = -p.0[n - 1 - k] / lead;
        }
        for k in 1..n {
            comp[(k, k - 1)] = 1.0;
        }
        let eig = comp.complex_eigenvalues();
        let dp = p.derivative();
        let mut roots: Vec<f64> = eig
            .iter()
            .filter(|z| z.im.abs() <= imag_tol * (1.0 + z.re.abs()))
            .map(|z| {
                let mut x = z.re;
                for _ in 0..4 {
                    let d = dp.eval(x);
                    if d == 0.0 {
                        break;
                    }
                    let step = p.eval(x) / d;
                    let next = x - step;
                    if !next.is_finite() || p.eval(next).abs() > p.eval(x).abs() {
                        break;
                    }
                    x = next;
                }
                x
            })
            .collect();
        roots.sort_by(|a, b| a.total_cmp(b));
        roots
    }
}

/// Determinant of a 3x3 matrix of univariate polynomials.
pub fn det3(m: &[[Poly1; 3]; 3]) -> Poly1 {
    let minor = |a: &Poly1, b: &Poly1, c: &Poly1, d: &Poly1| a.mul(d).sub(&b.mul(c));
    let t0 = m[0][0].mul(&minor(&m[1][1], &m[1][2], &m[2][1], &m[2][2]));
    let t1 = m[0][1].mul(&minor(&m[1][0], &m[1][2], &m[2][0], &m[2][2]));
    let t2 = m[0][2].mul(&minor(&m[1][0], &m[1][1], &m[2][0], &m[2][1]));
    t0.sub(&t1).add(&t2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roots_of_planted_quartic() {
        let planted = [-2.0, -0.5, 0.25, 3.0];
        let p = planted
            .iter()
            .fold(Poly1::constant(1.0), |acc, r| acc.mul(&Poly1::linear(-r, 1.0)));
        let roots = p.real_roots(1e-8);
        assert_eq!(roots.len(), 4);
        for (a, b) in roots.iter().zip(planted.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn complex_pair_is_rejected() {
        // (x^2 + 1)(x - 2)
        let p = Poly1(vec![1.0, 0.0, 1.0]).mul(&Poly1::linear(-2.0, 1.0));
        let roots = p.real_roots(1e-8);
        assert_eq!(roots.len(), 1);
        assert!((roots[0] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn determinant_matches_pointwise() {
        let m = [
            [Poly1::linear(1.0, 2.0), Poly1::constant(3.0), Poly1::linear(0.0, 1.0)],
            [Poly1::linear(-1.0, 0.5), Poly1::linear(2.0, 2.0), Poly1::constant(1.0)],
            [Poly1::constant(0.3), Poly1::linear(1.0, -1.0), Poly1::linear(4.0, 0.1)],
        ];
        let d = det3(&m);
        let x = 0.37;
        let e = nalgebra::Matrix3::from_fn(|r, c| m[r][c].eval(x));
        assert!((d.eval(x) - e.determinant()).abs() < 1e-13);
    }
}
