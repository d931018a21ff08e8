//! Truncated Taylor arithmetic.
//!
//! A [`Jet`] carries the normalized Taylor coefficients `f^(k)(t)/k!` of a
//! function at a point. Propagating jets through the closed-form expression
//! of a coefficient family yields its derivatives exactly up to rounding, with
//! none of the cancellation that finite differences suffer at high order.

use std::ops::{Add, Mul, Neg, Sub};

/// Highest derivative order a jet can carry.
pub const MAX_ORDER: usize = 24;

#[derive(Clone, Copy, Debug)]
pub struct Jet {
    c: [f64; MAX_ORDER + 1],
    order: usize,
}

impl Jet {
    pub fn constant(v: f64, order: usize) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let mut c = [0.0; MAX_ORDER + 1];
        c[0] = v;
        Self { c, order }
    }

    /// The independent variable `t ↦ t0 + t` expanded at `t0`.
    pub fn variable(t0: f64, order: usize) -> Self {
        let mut j = Self::constant(t0, order);
        if order >= 1 {
            j.c[1] = 1.0;
        }
        j
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Normalized coefficient `f^(k)/k!`.
    pub fn coeff(&self, k: usize) -> f64 {
        self.c[k]
    }

    /// The `k`-th derivative.
    pub fn derivative(&self, k: usize) -> f64 {
        let mut fact = 1.0;
        for i in 2..=k {
            fact *= i as f64;
        }
        self.c[k] * fact
    }

    /// All derivatives `f, f', …, f^(order)`.
    pub fn derivatives(&self) -> Vec<f64> {
        (0..=self.order).map(|k| self.derivative(k)).collect()
    }

    pub fn scale(mut self, s: f64) -> Self {
        for v in &mut self.c[..=self.order] {
            *v *= s;
        }
        self
    }

    pub fn offset(mut self, s: f64) -> Self {
        self.c[0] += s;
        self
    }

    pub fn recip(&self) -> Self {
        let n = self.order;
        let a = &self.c;
        let mut r = Self::constant(0.0, n);
        let inv = 1.0 / a[0];
        r.c[0] = inv;
        for k in 1..=n {
            let mut s = 0.0;
            for j in 1..=k {
                s += a[j] * r.c[k - j];
            }
            r.c[k] = -inv * s;
        }
        r
    }

    pub fn ln(&self) -> Self {
        let n = self.order;
        let a = &self.c;
        let mut l = Self::constant(a[0].ln(), n);
        for k in 1..=n {
            let mut s = 0.0;
            for j in 1..k {
                s += j as f64 * l.c[j] * a[k - j];
            }
            l.c[k] = (a[k] - s / k as f64) / a[0];
        }
        l
    }

    pub fn exp(&self) -> Self {
        let n = self.order;
        let a = &self.c;
        let mut e = Self::constant(a[0].exp(), n);
        for k in 1..=n {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * a[j] * e.c[k - j];
            }
            e.c[k] = s / k as f64;
        }
        e
    }

    /// `(sin f, cos f)`.
    pub fn sin_cos(&self) -> (Self, Self) {
        let n = self.order;
        let a = &self.c;
        let mut s = Self::constant(a[0].sin(), n);
        let mut c = Self::constant(a[0].cos(), n);
        for k in 1..=n {
            let mut ss = 0.0;
            let mut cc = 0.0;
            for j in 1..=k {
                ss += j as f64 * a[j] * c.c[k - j];
                cc += j as f64 * a[j] * s.c[k - j];
            }
            s.c[k] = ss / k as f64;
            c.c[k] = -cc / k as f64;
        }
        (s, c)
    }
}

impl Add for Jet {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        for k in 0..=self.order {
            self.c[k] += o.c[k];
        }
        self
    }
}

impl Sub for Jet {
    type Output = Self;
    fn sub(mut self, o: Self) -> Self {
        for k in 0..=self.order {
            self.c[k] -= o.c[k];
        }
        self
    }
}

impl Neg for Jet {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let n = self.order;
        let mut r = Self::constant(0.0, n);
        for k in 0..=n {
            let mut s = 0.0;
            for j in 0..=k {
                s += self.c[j] * o.c[k - j];
            }
            r.c[k] = s;
        }
        r
    }
}
