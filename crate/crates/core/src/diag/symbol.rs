//! Polynomial symbols in the generators `g_m = b^(m)(t)` and `u = |ξ|⁻¹`.
//!
//! Every stage of the diagonalization hierarchy is a polynomial of this
//! shape with small dyadic coefficients times powers of `i`, so the algebra
//! below is exact in floating point and the commutator cancellations of the
//! recursion happen identically rather than up to rounding.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::linalg::{Mat2, C64, I};

/// Exponents of one monomial `u^p · Π g_m^{e_m}`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    /// `e_m` for `m = 0, 1, …`, without trailing zeros
    pub g: Vec<u8>,
    pub u: i32,
}

impl Monomial {
    fn one() -> Self {
        Self { g: Vec::new(), u: 0 }
    }

    fn trim(mut self) -> Self {
        while self.g.last() == Some(&0) {
            self.g.pop();
        }
        self
    }

    fn mul(&self, o: &Self) -> Self {
        let n = self.g.len().max(o.g.len());
        let g = (0..n)
            .map(|i| self.g.get(i).copied().unwrap_or(0) + o.g.get(i).copied().unwrap_or(0))
            .collect();
        Self { g, u: self.u + o.u }.trim()
    }

    /// Highest derivative index present.
    pub fn max_g(&self) -> Option<usize> {
        self.g.iter().rposition(|&e| e > 0)
    }

    /// Total degree in the generators `g_m`.
    pub fn degree(&self) -> u32 {
        self.g.iter().map(|&e| e as u32).sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SymbolExpr {
    terms: BTreeMap<Monomial, C64>,
}

impl SymbolExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: C64) -> Self {
        Self::monomial(c, Monomial::one())
    }

    /// `b^(m)(t)`.
    pub fn g(m: usize) -> Self {
        let mut g = vec![0u8; m + 1];
        g[m] = 1;
        Self::monomial(C64::new(1.0, 0.0), Monomial { g, u: 0 })
    }

    /// `|ξ|^{-p}`.
    pub fn u_pow(p: i32) -> Self {
        Self::monomial(C64::new(1.0, 0.0), Monomial { g: Vec::new(), u: p })
    }

    fn monomial(c: C64, m: Monomial) -> Self {
        let mut terms = BTreeMap::new();
        if c != C64::new(0.0, 0.0) {
            terms.insert(m, c);
        }
        Self { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &C64)> {
        self.terms.iter()
    }

    fn insert_add(&mut self, m: Monomial, c: C64) {
        use std::collections::btree_map::Entry;
        let zero = C64::new(0.0, 0.0);
        match self.terms.entry(m) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == zero {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                if c != zero {
                    v.insert(c);
                }
            }
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = Self::zero();
        for (m, v) in &self.terms {
            out.insert_add(m.clone(), *v * c);
        }
        out
    }

    /// `∂_t`, acting on generators as `g_m ↦ g_{m+1}`.
    pub fn dt(&self) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            for (idx, &e) in m.g.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let mut g = m.g.clone();
                g[idx] -= 1;
                if g.len() <= idx + 1 {
                    g.resize(idx + 2, 0);
                }
                g[idx + 1] += 1;
                let mono = Monomial { g, u: m.u }.trim();
                out.insert_add(mono, *c * e as f64);
            }
        }
        out
    }

    /// `D_t = −i∂_t`.
    pub fn d_t(&self) -> Self {
        self.dt().scale(-I)
    }

    /// Radial derivative `∂_{|ξ|}`; `∂_r u^p = −p u^{p+1}`.
    pub fn dr(&self) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            if m.u != 0 {
                let mono = Monomial { g: m.g.clone(), u: m.u + 1 };
                out.insert_add(mono, *c * (-(m.u as f64)));
            }
        }
        out
    }

    /// Highest derivative order of `b` required for evaluation.
    pub fn max_derivative(&self) -> Option<usize> {
        self.terms.keys().filter_map(Monomial::max_g).max()
    }

    /// Range of powers of `u = |ξ|⁻¹` present.
    pub fn u_range(&self) -> Option<(i32, i32)> {
        let lo = self.terms.keys().map(|m| m.u).min()?;
        let hi = self.terms.keys().map(|m| m.u).max()?;
        Some((lo, hi))
    }

    /// Evaluates at `g = [b, b', …]` and `u = 1/|ξ|`.
    pub fn eval(&self, g: &[f64], u: f64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (m, c) in &self.terms {
            let mut v = u.powi(m.u);
            for (idx, &e) in m.g.iter().enumerate() {
                if e > 0 {
                    v *= g[idx].powi(e as i32);
                }
            }
            acc += *c * v;
        }
        acc
    }

    /// Flattened form for repeated evaluation.
    pub fn compile(&self) -> CompiledExpr {
        CompiledExpr {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| CompiledTerm { coef: *c, g: m.g.clone(), u: m.u })
                .collect(),
        }
    }
}

impl fmt::Display for SymbolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({}{:+}i)", c.re, c.im)?;
            for (idx, &e) in m.g.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "·b{}", "'".repeat(idx))?,
                    _ => write!(f, "·b{}^{e}", "'".repeat(idx))?,
                }
            }
            if m.u != 0 {
                write!(f, "·|xi|^{}", -m.u)?;
            }
        }
        Ok(())
    }
}

impl Add for &SymbolExpr {
    type Output = SymbolExpr;
    fn add(self, o: &SymbolExpr) -> SymbolExpr {
        let mut out = self.clone();
        for (m, c) in &o.terms {
            out.insert_add(m.clone(), *c);
        }
        out
    }
}

impl Sub for &SymbolExpr {
    type Output = SymbolExpr;
    fn sub(self, o: &SymbolExpr) -> SymbolExpr {
        let mut out = self.clone();
        for (m, c) in &o.terms {
            out.insert_add(m.clone(), -*c);
        }
        out
    }
}

impl Neg for &SymbolExpr {
    type Output = SymbolExpr;
    fn neg(self) -> SymbolExpr {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Mul for &SymbolExpr {
    type Output = SymbolExpr;
    fn mul(self, o: &SymbolExpr) -> SymbolExpr {
        let mut out = SymbolExpr::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &o.terms {
                out.insert_add(ma.mul(mb), *ca * *cb);
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
struct CompiledTerm {
    coef: C64,
    g: Vec<u8>,
    u: i32,
}

/// A symbol flattened into a term list.
#[derive(Clone, Debug, Default)]
pub struct CompiledExpr {
    terms: Vec<CompiledTerm>,
}

impl CompiledExpr {
    pub fn eval(&self, g: &[f64], u: f64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for t in &self.terms {
            let mut v = u.powi(t.u);
            for (idx, &e) in t.g.iter().enumerate() {
                if e > 0 {
                    v *= g[idx].powi(e as i32);
                }
            }
            acc += t.coef * v;
        }
        acc
    }
}

/// 2×2 matrix of symbols, row-major.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SymMat {
    pub e: [SymbolExpr; 4],
}

impl SymMat {
    pub fn new(a11: SymbolExpr, a12: SymbolExpr, a21: SymbolExpr, a22: SymbolExpr) -> Self {
        Self { e: [a11, a12, a21, a22] }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        let one = SymbolExpr::constant(C64::new(1.0, 0.0));
        Self::new(one.clone(), SymbolExpr::zero(), SymbolExpr::zero(), one)
    }

    pub fn diagonal_part(&self) -> Self {
        Self::new(self.e[0].clone(), SymbolExpr::zero(), SymbolExpr::zero(), self.e[3].clone())
    }

    pub fn is_diagonal(&self) -> bool {
        self.e[1].is_zero() && self.e[2].is_zero()
    }

    pub fn is_zero(&self) -> bool {
        self.e.iter().all(SymbolExpr::is_zero)
    }

    pub fn map(&self, f: impl Fn(&SymbolExpr) -> SymbolExpr) -> Self {
        Self { e: [f(&self.e[0]), f(&self.e[1]), f(&self.e[2]), f(&self.e[3])] }
    }

    pub fn d_t(&self) -> Self {
        self.map(SymbolExpr::d_t)
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map(|x| x.scale(c))
    }

    pub fn max_derivative(&self) -> Option<usize> {
        self.e.iter().filter_map(SymbolExpr::max_derivative).max()
    }

    pub fn eval(&self, g: &[f64], u: f64) -> Mat2 {
        Mat2::new(self.e[0].eval(g, u), self.e[1].eval(g, u), self.e[2].eval(g, u), self.e[3].eval(g, u))
    }

    pub fn compile(&self) -> CompiledMat {
        CompiledMat { e: [self.e[0].compile(), self.e[1].compile(), self.e[2].compile(), self.e[3].compile()] }
    }
}

impl Add for &SymMat {
    type Output = SymMat;
    fn add(self, o: &SymMat) -> SymMat {
        SymMat { e: [&self.e[0] + &o.e[0], &self.e[1] + &o.e[1], &self.e[2] + &o.e[2], &self.e[3] + &o.e[3]] }
    }
}

impl Sub for &SymMat {
    type Output = SymMat;
    fn sub(self, o: &SymMat) -> SymMat {
        SymMat { e: [&self.e[0] - &o.e[0], &self.e[1] - &o.e[1], &self.e[2] - &o.e[2], &self.e[3] - &o.e[3]] }
    }
}

impl Mul for &SymMat {
    type Output = SymMat;
    fn mul(self, o: &SymMat) -> SymMat {
        let a = &self.e;
        let b = &o.e;
        SymMat {
            e: [
                &(&a[0] * &b[0]) + &(&a[1] * &b[2]),
                &(&a[0] * &b[1]) + &(&a[1] * &b[3]),
                &(&a[2] * &b[0]) + &(&a[3] * &b[2]),
                &(&a[2] * &b[1]) + &(&a[3] * &b[3]),
            ],
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct CompiledMat {
    e: [CompiledExpr; 4],
}

impl CompiledMat {
    pub fn eval(&self, g: &[f64], u: f64) -> Mat2 {
        Mat2::new(self.e[0].eval(g, u), self.e[1].eval(g, u), self.e[2].eval(g, u), self.e[3].eval(g, u))
    }
}
