//! Dense polynomials in three unknowns of total degree at most four.
//!
//! Monomial ordering: graded ascending by total degree; within a degree,
//! lexicographically descending in the exponents of `(x, y, z)`:
//!
//! `1 | x y z | x² xy xz y² yz z² | x³ x²y x²z xy² xyz xz² y³ y²z yz² z³ | x⁴ ...`
//!
//! With this ordering the monomials of degree `< d` occupy exactly the first
//! `C(d + 2, 3)` slots, which the action-matrix solver relies on.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::Vector3;

pub const MAX_DEGREE: usize = 4;
pub const NUM_MONOMIALS: usize = 35;

/// Number of monomials of degree strictly less than `d`.
pub const fn count_below(d: usize) -> usize {
    d * (d + 1) * (d + 2) / 6
}

/// Number of monomials of degree exactly `d`.
pub const fn count_of_degree(d: usize) -> usize {
    (d + 1) * (d + 2) / 2
}

/// Slot of `x^a y^b z^c`.
pub const fn monomial_index(a: usize, b: usize, c: usize) -> usize {
    let d = a + b + c;
    count_below(d) + (d - a) * (d - a + 1) / 2 + (d - a - b)
}

const fn build_exponents() -> [[u8; 3]; NUM_MONOMIALS] {
    let mut out = [[0u8; 3]; NUM_MONOMIALS];
    let mut d = 0;
    while d <= MAX_DEGREE {
        let mut a = d as isize;
        while a >= 0 {
            let mut b = (d as isize) - a;
            while b >= 0 {
                let c = d as isize - a - b;
                let idx = monomial_index(a as usize, b as usize, c as usize);
                out[idx] = [a as u8, b as u8, c as u8];
                b -= 1;
            }
            a -= 1;
        }
        d += 1;
    }
    out
}

/// Exponent triple of each slot.
pub const EXPONENTS: [[u8; 3]; NUM_MONOMIALS] = build_exponents();

pub fn degree_of(idx: usize) -> usize {
    let e = EXPONENTS[idx];
    (e[0] + e[1] + e[2]) as usize
}

/// Evaluates every monomial of degree `<= max_degree` at `p`.
pub fn monomial_values(p: &Vector3<f64>, max_degree: usize) -> Vec<f64> {
    let n = count_below(max_degree + 1);
    let mut pow = [[1.0f64; MAX_DEGREE + 1]; 3];
    for k in 0..3 {
        for e in 1..=MAX_DEGREE {
            pow[k][e] = pow[k][e - 1] * p[k];
        }
    }
    (0..n)
        .map(|i| {
            let e = EXPONENTS[i];
            pow[0][e[0] as usize] * pow[1][e[1] as usize] * pow[2][e[2] as usize]
        })
        .collect()
}

/// A polynomial in `(x, y, z)` of degree at most [`MAX_DEGREE`].
#[derive(Clone, Copy, PartialEq)]
pub struct Poly3 {
    pub coeffs: [f64; NUM_MONOMIALS],
}

impl std::fmt::Debug for Poly3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, c)| {
                let e = EXPONENTS[i];
                format!("{c:+e}*x^{}y^{}z^{}", e[0], e[1], e[2])
            })
            .collect();
        write!(f, "Poly3({})", terms.join(" "))
    }
}

impl Default for Poly3 {
    fn default() -> Self {
        Self::zero()
    }
}

impl Poly3 {
    pub const fn zero() -> Self {
        Self {
            coeffs: [0.0; NUM_MONOMIALS],
        }
    }

    pub fn constant(c: f64) -> Self {
        let mut p = Self::zero();
        p.coeffs[0] = c;
        p
    }

    /// `c0 + cx x + cy y + cz z`.
    pub fn affine(c0: f64, cx: f64, cy: f64, cz: f64) -> Self {
        let mut p = Self::zero();
        p.coeffs[0] = c0;
        p.coeffs[1] = cx;
        p.coeffs[2] = cy;
        p.coeffs[3] = cz;
        p
    }

    /// The `k`-th unknown.
    pub fn var(k: usize) -> Self {
        let mut p = Self::zero();
        p.coeffs[1 + k] = 1.0;
        p
    }

    pub fn term(c: f64, a: usize, b: usize, cexp: usize) -> Self {
        let mut p = Self::zero();
        p.coeffs[monomial_index(a, b, cexp)] = c;
        p
    }

    pub fn coeff(&self, a: usize, b: usize, c: usize) -> f64 {
        self.coeffs[monomial_index(a, b, c)]
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs
            .iter()
            .rposition(|c| *c != 0.0)
            .map(degree_of)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn eval(&self, p: &Vector3<f64>) -> f64 {
        let vals = monomial_values(p, MAX_DEGREE);
        self.coeffs.iter().zip(&vals).map(|(c, m)| c * m).sum()
    }

    /// `sum |c_k m_k(p)|`, the natural scale for a relative residual.
    pub fn eval_abs(&self, p: &Vector3<f64>) -> f64 {
        let vals = monomial_values(p, MAX_DEGREE);
        self.coeffs
            .iter()
            .zip(&vals)
            .map(|(c, m)| (c * m).abs())
            .sum()
    }

    /// Partial derivative with respect to unknown `k`.
    pub fn derivative(&self, k: usize) -> Self {
        let mut out = Self::zero();
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let mut e = EXPONENTS[i];
            if e[k] == 0 {
                continue;
            }
            let f = e[k] as f64;
            e[k] -= 1;
            out.coeffs[monomial_index(e[0] as usize, e[1] as usize, e[2] as usize)] += c * f;
        }
        out
    }

    pub fn gradient(&self, p: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(
            self.derivative(0).eval(p),
            self.derivative(1).eval(p),
            self.derivative(2).eval(p),
        )
    }

    /// Substitutes `(x, y, z) = A (x', y', z')`.
    pub fn linear_substitute(&self, a: &nalgebra::Matrix3<f64>) -> Self {
        let vars = [
            Poly3::affine(0.0, a[(0, 0)], a[(0, 1)], a[(0, 2)]),
            Poly3::affine(0.0, a[(1, 0)], a[(1, 1)], a[(1, 2)]),
            Poly3::affine(0.0, a[(2, 0)], a[(2, 1)], a[(2, 2)]),
        ];
        let mut out = Self::zero();
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let e = EXPONENTS[i];
            let mut term = Poly3::constant(c);
            for k in 0..3 {
                for _ in 0..e[k] {
                    term = term * vars[k];
                }
            }
            out += term;
        }
        out
    }
}

impl Add for Poly3 {
    type Output = Poly3;
    fn add(mut self, rhs: Poly3) -> Poly3 {
        self += rhs;
        self
    }
}

impl AddAssign for Poly3 {
    fn add_assign(&mut self, rhs: Poly3) {
        for (a, b) in self.coeffs.iter_mut().zip(rhs.coeffs.iter()) {
            *a += b;
        }
    }
}

impl Sub for Poly3 {
    type Output = Poly3;
    fn sub(mut self, rhs: Poly3) -> Poly3 {
        for (a, b) in self.coeffs.iter_mut().zip(rhs.coeffs.iter()) {
            *a -= b;
        }
        self
    }
}

impl Neg for Poly3 {
    type Output = Poly3;
    fn neg(self) -> Poly3 {
        self.scale(-1.0)
    }
}

impl Mul<f64> for Poly3 {
    type Output = Poly3;
    fn mul(self, rhs: f64) -> Poly3 {
        self.scale(rhs)
    }
}

impl Mul for Poly3 {
    type Output = Poly3;

    /// Panics if the product exceeds [`MAX_DEGREE`].
    fn mul(self, rhs: Poly3) -> Poly3 {
        let mut out = Poly3::zero();
        let lhs_n = self.coeffs.iter().rposition(|c| *c != 0.0);
        let rhs_n = rhs.coeffs.iter().rposition(|c| *c != 0.0);
        let (Some(ln), Some(rn)) = (lhs_n, rhs_n) else {
            return out;
        };
        for i in 0..=ln {
            let a = self.coeffs[i];
            if a == 0.0 {
                continue;
            }
            let ei = EXPONENTS[i];
            for j in 0..=rn {
                let b = rhs.coeffs[j];
                if b == 0.0 {
                    continue;
                }
                let ej = EXPONENTS[j];
                let (x, y, z) = (
                    (ei[0] + ej[0]) as usize,
                    (ei[1] + ej[1]) as usize,
                    (ei[2] + ej[2]) as usize,
                );
                assert!(x + y + z <= MAX_DEGREE, "polynomial degree overflow");
                out.coeffs[monomial_index(x, y, z)] += a * b;
            }
        }
        out
    }
}

/// A 3-vector of polynomials, for building constraints symbolically.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PolyVec3(pub [Poly3; 3]);

impl PolyVec3 {
    pub fn constant(v: &Vector3<f64>) -> Self {
        Self([Poly3::constant(v.x), Poly3::constant(v.y), Poly3::constant(v.z)])
    }

    /// The unknown vector `(x, y, z)` itself.
    pub fn unknowns() -> Self {
        Self([Poly3::var(0), Poly3::var(1), Poly3::var(2)])
    }

    pub fn cross(&self, rhs: &PolyVec3) -> PolyVec3 {
        let [a0, a1, a2] = self.0;
        let [b0, b1, b2] = rhs.0;
        PolyVec3([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0])
    }

    pub fn dot(&self, rhs: &PolyVec3) -> Poly3 {
        self.0[0] * rhs.0[0] + self.0[1] * rhs.0[1] + self.0[2] * rhs.0[2]
    }

    pub fn dot_const(&self, rhs: &Vector3<f64>) -> Poly3 {
        self.0[0] * rhs.x + self.0[1] * rhs.y + self.0[2] * rhs.z
    }

    pub fn scale(&self, s: f64) -> PolyVec3 {
        PolyVec3(self.0.map(|p| p * s))
    }

    /// `M * self` for a constant matrix.
    pub fn transform(&self, m: &nalgebra::Matrix3<f64>) -> PolyVec3 {
        let mut out = PolyVec3::default();
        for r in 0..3 {
            out.0[r] = self.0[0] * m[(r, 0)] + self.0[1] * m[(r, 1)] + self.0[2] * m[(r, 2)];
        }
        out
    }

    pub fn eval(&self, p: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(self.0[0].eval(p), self.0[1].eval(p), self.0[2].eval(p))
    }
}

impl Add for PolyVec3 {
    type Output = PolyVec3;
    fn add(self, rhs: PolyVec3) -> PolyVec3 {
        PolyVec3([self.0[0] + rhs.0[0], self.0[1] + rhs.0[1], self.0[2] + rhs.0[2]])
    }
}

impl Sub for PolyVec3 {
    type Output = PolyVec3;
    fn sub(self, rhs: PolyVec3) -> PolyVec3 {
        PolyVec3([self.0[0] - rhs.0[0], self.0[1] - rhs.0[1], self.0[2] - rhs.0[2]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_is_graded() {
        assert_eq!(EXPONENTS[0], [0, 0, 0]);
        assert_eq!(EXPONENTS[1], [1, 0, 0]);
        assert_eq!(EXPONENTS[3], [0, 0, 1]);
        assert_eq!(EXPONENTS[4], [2, 0, 0]);
        assert_eq!(EXPONENTS[9], [0, 0, 2]);
        assert_eq!(EXPONENTS[10], [3, 0, 0]);
        assert_eq!(EXPONENTS[19], [0, 0, 3]);
        assert_eq!(EXPONENTS[34], [0, 0, 4]);
        for i in 1..NUM_MONOMIALS {
            assert!(degree_of(i) >= degree_of(i - 1));
            let e = EXPONENTS[i];
            assert_eq!(monomial_index(e[0] as usize, e[1] as usize, e[2] as usize), i);
        }
        assert_eq!(count_below(4), 20);
        assert_eq!(count_of_degree(4), 15);
    }

    #[test]
    fn product_and_evaluation_agree() {
        let p = Poly3::affine(1.0, 2.0, -1.0, 0.5);
        let q = Poly3::affine(-0.3, 0.0, 1.5, 2.0) * Poly3::var(0);
        let x = Vector3::new(0.7, -1.1, 0.4);
        assert!(((p * q).eval(&x) - p.eval(&x) * q.eval(&x)).abs() < 1e-14);
        assert_eq!((p * q).degree(), Some(3));
    }

    #[test]
    fn derivative_of_cubic() {
        let p = Poly3::term(2.0, 2, 1, 0) + Poly3::term(-1.0, 0, 0, 3);
        let x = Vector3::new(1.5, -0.5, 2.0);
        let g = p.gradient(&x);
        assert!((g.x - 4.0 * 1.5 * -0.5).abs() < 1e-14);
        assert!((g.y - 2.0 * 1.5 * 1.5).abs() < 1e-14);
        assert!((g.z + 3.0 * 4.0).abs() < 1e-14);
    }

    #[test]
    fn substitution_matches_evaluation() {
        let p = Poly3::term(1.0, 2, 0, 0) + Poly3::term(-2.0, 0, 1, 1) + Poly3::affine(0.5, 1.0, 0.0, -1.0);
        let a = nalgebra::Matrix3::new(0.3, 0.2, -0.1, 0.0, 1.0, 0.4, 0.5, -0.2, 0.9);
        let q = p.linear_substitute(&a);
        let xp = Vector3::new(0.2, -0.7, 1.3);
        assert!((q.eval(&xp) - p.eval(&(a * xp))).abs() < 1e-13);
    }
}
