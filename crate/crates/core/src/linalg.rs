//! 2×2 complex matrices.
//!
//! Every propagator, diagonalizer and symbol in the crate is a 2×2 complex
//! multiplier, so this small fixed-size type is the common currency between
//! modules.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;

pub type C64 = Complex64;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Row-major 2×2 complex matrix.
#[derive(Clone, Copy, PartialEq, Default)]
pub struct Mat2 {
    pub a11: C64,
    pub a12: C64,
    pub a21: C64,
    pub a22: C64,
}

/// Serialized row-major as four `[re, im]` pairs.
impl serde::Serialize for Mat2 {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let a = self.to_array().map(|c| [c.re, c.im]);
        a.serialize(ser)
    }
}

impl Mat2 {
    pub const fn new(a11: C64, a12: C64, a21: C64, a22: C64) -> Self {
        Self { a11, a12, a21, a22 }
    }

    pub fn from_real(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Self::new(a11.into(), a12.into(), a21.into(), a22.into())
    }

    pub fn identity() -> Self {
        Self::from_real(1.0, 0.0, 0.0, 1.0)
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn diag(d1: C64, d2: C64) -> Self {
        Self::new(d1, C64::new(0.0, 0.0), C64::new(0.0, 0.0), d2)
    }

    pub fn scalar(c: C64) -> Self {
        Self::diag(c, c)
    }

    /// Matrix of eigenvectors of the principal part `[[0, 1], [1, 0]]`.
    pub fn eigenbasis() -> Self {
        Self::from_real(1.0, -1.0, 1.0, 1.0)
    }

    pub fn eigenbasis_inv() -> Self {
        Self::from_real(0.5, 0.5, -0.5, 0.5)
    }

    pub fn to_array(self) -> [C64; 4] {
        [self.a11, self.a12, self.a21, self.a22]
    }

    pub fn from_array(a: [C64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn trace(&self) -> C64 {
        self.a11 + self.a22
    }

    pub fn det(&self) -> C64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.a11, self.a21, self.a12, self.a22)
    }

    pub fn adjoint(&self) -> Self {
        Self::new(self.a11.conj(), self.a21.conj(), self.a12.conj(), self.a22.conj())
    }

    pub fn diagonal_part(&self) -> Self {
        Self::diag(self.a11, self.a22)
    }

    pub fn off_diagonal_part(&self) -> Self {
        let z = C64::new(0.0, 0.0);
        Self::new(z, self.a12, self.a21, z)
    }

    /// Exact inverse; `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d.norm() == 0.0 || !d.is_finite() {
            return None;
        }
        let r = d.inv();
        Some(Self::new(self.a22 * r, -self.a12 * r, -self.a21 * r, self.a11 * r))
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::new(self.a11 * c, self.a12 * c, self.a21 * c, self.a22 * c)
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.a11.norm_sqr() + self.a12.norm_sqr() + self.a21.norm_sqr() + self.a22.norm_sqr()
    }

    /// Spectral norm (largest singular value).
    pub fn norm(&self) -> f64 {
        let f = self.frobenius_sq();
        let d = self.det().norm();
        let disc = (f * f - 4.0 * d * d).max(0.0).sqrt();
        (0.5 * (f + disc)).sqrt()
    }

    /// Smallest singular value.
    pub fn min_singular(&self) -> f64 {
        let s = self.norm();
        if s == 0.0 {
            0.0
        } else {
            self.det().norm() / s
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|z| z.is_finite())
    }

    /// Relative distance `‖self − other‖ / ‖other‖`, falling back to the
    /// absolute distance when `other` vanishes.
    pub fn rel_dist(&self, other: &Self) -> f64 {
        let n = other.norm();
        let d = (*self - *other).norm();
        if n > 0.0 {
            d / n
        } else {
            d
        }
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        [self.a11 * v[0] + self.a12 * v[1], self.a21 * v[0] + self.a22 * v[1]]
    }

    /// Commutator `[self, other] = self·other − other·self`.
    pub fn commutator(&self, other: &Self) -> Self {
        *self * *other - *other * *self
    }
}

impl fmt::Debug for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[[{}, {}], [{}, {}]]",
            self.a11, self.a12, self.a21, self.a22
        )
    }
}

impl Add for Mat2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.a11 + o.a11, self.a12 + o.a12, self.a21 + o.a21, self.a22 + o.a22)
    }
}

impl AddAssign for Mat2 {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for Mat2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.a11 - o.a11, self.a12 - o.a12, self.a21 - o.a21, self.a22 - o.a22)
    }
}

impl Neg for Mat2 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.a11, -self.a12, -self.a21, -self.a22)
    }
}

impl Mul for Mat2 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.a11 * o.a11 + self.a12 * o.a21,
            self.a11 * o.a12 + self.a12 * o.a22,
            self.a21 * o.a11 + self.a22 * o.a21,
            self.a21 * o.a12 + self.a22 * o.a22,
        )
    }
}

impl Mul<f64> for Mat2 {
    type Output = Self;
    fn mul(self, c: f64) -> Self {
        Self::new(self.a11 * c, self.a12 * c, self.a21 * c, self.a22 * c)
    }
}

impl Mul<C64> for Mat2 {
    type Output = Self;
    fn mul(self, c: C64) -> Self {
        self.scale(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample() -> Mat2 {
        Mat2::new(
            C64::new(1.0, 2.0),
            C64::new(-0.5, 0.25),
            C64::new(3.0, -1.0),
            C64::new(0.0, 0.7),
        )
    }

    #[test]
    fn inverse_round_trip() {
        let a = sample();
        let p = a * a.inverse().unwrap();
        assert!((p - Mat2::identity()).norm() < 1e-14);
        assert!(Mat2::zero().inverse().is_none());
    }

    #[test]
    fn eigenbasis_is_inverse_pair() {
        let p = Mat2::eigenbasis() * Mat2::eigenbasis_inv();
        assert_eq!(p, Mat2::identity());
    }

    #[test]
    fn spectral_norm_matches_power_iteration() {
        let a = sample();
        let h = a.adjoint() * a;
        let mut v = [C64::new(1.0, 0.0), C64::new(0.3, -0.2)];
        for _ in 0..200 {
            let w = h.apply(v);
            let n = (w[0].norm_sqr() + w[1].norm_sqr()).sqrt();
            v = [w[0] / n, w[1] / n];
        }
        let w = a.apply(v);
        let sigma = (w[0].norm_sqr() + w[1].norm_sqr()).sqrt();
        assert_relative_eq!(a.norm(), sigma, max_relative = 1e-12);
        assert_relative_eq!(a.norm() * a.min_singular(), a.det().norm(), max_relative = 1e-12);
    }

    #[test]
    fn rotation_is_an_isometry() {
        let th: f64 = 0.37;
        let r = Mat2::new(
            th.cos().into(),
            I * th.sin(),
            I * th.sin(),
            th.cos().into(),
        );
        assert_relative_eq!(r.norm(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(r.det().re, 1.0, epsilon = 1e-15);
    }
}
