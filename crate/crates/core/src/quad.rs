//! Numerical quadrature: adaptive Gauss–Kronrod (7/15) and Gauss–Legendre
//! rules.

use std::collections::BinaryHeap;
use std::ops::{Add, Sub};

use crate::linalg::{Mat2, C64};
use crate::{Error, Result};

/// Values that can be integrated: a normed vector space over the reals.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> {
    fn zero() -> Self;
    fn scale(self, s: f64) -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

impl QuadValue for Mat2 {
    fn zero() -> Self {
        Mat2::zero()
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn magnitude(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One Gauss–Kronrod 15-point panel: (Kronrod value, |Kronrod − Gauss|).
pub fn gk15<T: QuadValue>(f: &mut impl FnMut(f64) -> T, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc.scale(WGK[7]);
    let mut g = fc.scale(WG[3]);
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k = k + s.scale(WGK[j]);
        if j % 2 == 1 {
            g = g + s.scale(WG[j / 2]);
        }
    }
    let k = k.scale(h);
    let g = g.scale(h);
    let err = (k - g).magnitude();
    (k, err)
}

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-12, max_panels: 4000 }
    }
}

impl QuadOptions {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self { abs_tol, rel_tol, ..Self::default() }
    }
}

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    err: f64,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Globally adaptive integration over `[a, b]`, bisecting the panel with
/// the largest error estimate. `breaks` are optional interior points where
/// the integrand has kinks.
pub fn integrate_with_breaks<T: QuadValue>(
    mut f: impl FnMut(f64) -> T,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<T> {
    if a == b {
        return Ok(T::zero());
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut pts = vec![lo];
    pts.extend(breaks.iter().copied().filter(|&x| x > lo && x < hi));
    pts.push(hi);
    pts.sort_by(f64::total_cmp);

    let mut heap = BinaryHeap::new();
    let mut total = T::zero();
    let mut err_total = 0.0;
    for w in pts.windows(2) {
        let (v, e) = gk15(&mut f, w[0], w[1]);
        total = total + v;
        err_total += e;
        heap.push(Panel { a: w[0], b: w[1], value: v, err: e });
    }
    let mut panels = heap.len();
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total.magnitude());
        if err_total <= tol {
            return Ok(total.scale(sign));
        }
        if panels >= opts.max_panels {
            return Err(Error::QuadratureNonConvergence { a, b, estimate: err_total });
        }
        let worst = heap.pop().expect("heap is never empty");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            return Err(Error::QuadratureNonConvergence { a, b, estimate: err_total });
        }
        let (v1, e1) = gk15(&mut f, worst.a, m);
        let (v2, e2) = gk15(&mut f, m, worst.b);
        total = total - worst.value + v1 + v2;
        err_total += e1 + e2 - worst.err;
        heap.push(Panel { a: worst.a, b: m, value: v1, err: e1 });
        heap.push(Panel { a: m, b: worst.b, value: v2, err: e2 });
        panels += 1;
    }
}

pub fn integrate<T: QuadValue>(f: impl FnMut(f64) -> T, a: f64, b: f64, opts: QuadOptions) -> Result<T> {
    integrate_with_breaks(f, a, b, &[], opts)
}

/// `∫_a^∞ f` through the map `x = a + (1 − u)/u`.
pub fn integrate_to_infinity<T: QuadValue>(
    mut f: impl FnMut(f64) -> T,
    a: f64,
    opts: QuadOptions,
) -> Result<T> {
    integrate(
        |u: f64| {
            let x = a + (1.0 - u) / u;
            f(x).scale(1.0 / (u * u))
        },
        0.0,
        1.0,
        opts,
    )
}

/// `∫_a^b f` over a range spanning many decades, integrated in the variable
/// `v = ln(1 + x)`.
pub fn integrate_log<T: QuadValue>(
    mut f: impl FnMut(f64) -> T,
    a: f64,
    b: f64,
    opts: QuadOptions,
) -> Result<T> {
    integrate(
        |v: f64| {
            let ev = v.exp();
            f(ev - 1.0).scale(ev)
        },
        a.ln_1p(),
        b.ln_1p(),
        opts,
    )
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// `(P_n(z), P_n'(z))` by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// `n`-point Gauss rule mapped to `[a, b]`.
pub fn gauss_on(a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (z, w) = gauss_legendre(n);
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    (z.iter().map(|z| c + h * z).collect(), w.iter().map(|w| h * w).collect())
}

/// Composite Gauss rule with `panels` equal panels of `n` nodes.
pub fn composite_gauss(a: f64, b: f64, panels: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut x = Vec::with_capacity(panels * n);
    let mut w = Vec::with_capacity(panels * n);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let hi = if p + 1 == panels { b } else { lo + h };
        let (xp, wp) = gauss_on(lo, hi, n);
        x.extend(xp);
        w.extend(wp);
    }
    (x, w)
}

/// Barycentric Lagrange interpolation on fixed nodes.
#[derive(Clone, Debug)]
pub struct Barycentric {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Barycentric {
    pub fn new(nodes: Vec<f64>) -> Self {
        let n = nodes.len();
        let scale = 4.0 / (nodes[n - 1] - nodes[0]).abs().max(f64::MIN_POSITIVE);
        let weights = (0..n)
            .map(|j| {
                let p: f64 = (0..n).filter(|&k| k != j).map(|k| scale * (nodes[j] - nodes[k])).product();
                1.0 / p
            })
            .collect();
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn eval<T: QuadValue>(&self, values: &[T], x: f64) -> T {
        let mut num = T::zero();
        let mut den = 0.0;
        for ((&xj, &wj), &fj) in self.nodes.iter().zip(&self.weights).zip(values) {
            let d = x - xj;
            if d == 0.0 {
                return fj;
            }
            let c = wj / d;
            num = num + fj.scale(c);
            den += c;
        }
        num.scale(1.0 / den)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kronrod_panel_is_exact_for_degree_22() {
        // a 15-point Kronrod rule integrates polynomials of degree 3·7+1 = 22
        let mut f = |x: f64| x.powi(22) + 3.0 * x.powi(7) - x;
        let (v, _) = gk15(&mut f, -1.0, 1.0);
        assert_relative_eq!(v, 2.0 / 23.0, max_relative = 1e-14);
        let mut g = |x: f64| x.powi(13);
        let (v, err) = gk15(&mut g, 0.0, 1.0);
        assert_relative_eq!(v, 1.0 / 14.0, max_relative = 1e-14);
        // the embedded 7-point Gauss rule is exact to degree 13
        assert!(err < 1e-15);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let v = integrate(|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, QuadOptions::default()).unwrap();
        let expect = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert_relative_eq!(v, expect, max_relative = 1e-11);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let v = integrate(f64::sin, 1.0, 0.0, QuadOptions::default()).unwrap();
        assert_relative_eq!(v, -(1.0 - 1f64.cos()), max_relative = 1e-13);
    }

    #[test]
    fn infinite_interval() {
        let v = integrate_to_infinity(|x: f64| 1.0 / ((1.0 + x) * (1.0 + x)), 3.0, QuadOptions::default())
            .unwrap();
        assert_relative_eq!(v, 0.25, max_relative = 1e-12);
    }

    #[test]
    fn log_variable_spans_decades() {
        let v = integrate_log(|x: f64| (1.0 + x).powf(-0.5), 0.0, 1e12, QuadOptions::default()).unwrap();
        assert_relative_eq!(v, 2.0 * ((1e12f64 + 1.0).sqrt() - 1.0), max_relative = 1e-11);
    }

    #[test]
    fn gauss_legendre_exactness() {
        for n in [1usize, 2, 5, 12, 20] {
            let (x, w) = gauss_legendre(n);
            assert_relative_eq!(w.iter().sum::<f64>(), 2.0, max_relative = 1e-14);
            let d = 2 * n - 1;
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(d as i32 - 1)).sum();
            let expect = if (d - 1) % 2 == 0 { 2.0 / d as f64 } else { 0.0 };
            assert!((s - expect).abs() < 1e-14, "n = {n}");
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn barycentric_reproduces_smooth_function() {
        let (x, _) = gauss_on(0.5, 2.0, 40);
        let f: Vec<f64> = x.iter().map(|x| (3.0 * x).sin()).collect();
        let b = Barycentric::new(x);
        for y in [0.5, 0.77, 1.3, 2.0] {
            assert!((b.eval(&f, y) - (3.0 * y).sin()).abs() < 1e-13);
        }
        let (x, w) = composite_gauss(0.0, 3.0, 7, 5);
        assert_eq!(x.len(), 35);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(9)).sum();
        assert_relative_eq!(s, 3f64.powi(10) / 10.0, max_relative = 1e-13);
    }

    #[test]
    fn complex_and_matrix_values() {
        let v: C64 = integrate(|x: f64| C64::new(0.0, x).exp(), 0.0, std::f64::consts::PI, QuadOptions::default())
            .unwrap();
        assert!((v - C64::new(0.0, 2.0)).norm() < 1e-13);
        let m: Mat2 = integrate(|x: f64| Mat2::identity() * x, 0.0, 2.0, QuadOptions::default()).unwrap();
        assert!((m - Mat2::identity() * 2.0).norm() < 1e-14);
    }
}
