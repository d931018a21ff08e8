//! Explicit Runge–Kutta integrator of order 8 with embedded 5th and 3rd order
//! error estimators (the Dormand–Prince 8(5,3) pair in Hairer's form).
//!
//! The state is a fixed-size array of complex numbers; real and imaginary
//! parts are weighted as independent components. The stepper is stateful so a
//! long trajectory can be sampled at many output times: each call to
//! [`Dop853::advance_to`] lands exactly on the requested time and the step
//! size proposed before the truncated final step is carried over.

use crate::linalg::C64;
use crate::{Error, Result};

const C2: f64 = 0.526_001_519_587_677_318_785_587_544_488e-1;
const C3: f64 = 0.789_002_279_381_515_978_178_381_316_732e-1;
const C4: f64 = 0.118_350_341_907_227_396_726_757_197_510;
const C5: f64 = 0.281_649_658_092_772_603_273_242_802_490;
const C6: f64 = 0.333_333_333_333_333_333_333_333_333_333;
const C7: f64 = 0.25;
const C8: f64 = 0.307_692_307_692_307_692_307_692_307_692;
const C9: f64 = 0.651_282_051_282_051_282_051_282_051_282;
const C10: f64 = 0.6;
const C11: f64 = 0.857_142_857_142_857_142_857_142_857_142;

const A21: f64 = 5.260_015_195_876_773_187_855_875_444_88e-2;
const A31: f64 = 1.972_505_698_453_789_945_445_953_291_83e-2;
const A32: f64 = 5.917_517_095_361_369_836_337_859_875_49e-2;
const A41: f64 = 2.958_758_547_680_684_918_168_929_937_75e-2;
const A43: f64 = 8.876_275_643_042_054_754_506_789_813_24e-2;
const A51: f64 = 2.413_651_341_592_666_855_023_697_986_65e-1;
const A53: f64 = -8.845_494_793_282_860_853_448_649_627_17e-1;
const A54: f64 = 9.248_340_032_617_920_031_157_379_665_43e-1;
const A61: f64 = 3.703_703_703_703_703_703_703_703_703_7e-2;
const A64: f64 = 1.708_286_087_294_738_712_796_044_821_73e-1;
const A65: f64 = 1.254_676_875_668_224_250_166_918_141_23e-1;
const A71: f64 = 3.710_937_5e-2;
const A74: f64 = 1.702_522_110_195_440_393_149_780_602_72e-1;
const A75: f64 = 6.021_653_898_045_596_068_502_193_972_83e-2;
const A76: f64 = -1.757_812_5e-2;
const A81: f64 = 3.709_200_011_850_479_271_087_793_198_36e-2;
const A84: f64 = 1.703_839_257_122_399_938_102_140_547_05e-1;
const A85: f64 = 1.072_620_304_463_732_846_518_091_991_68e-1;
const A86: f64 = -1.531_943_774_862_440_175_279_361_582_36e-2;
const A87: f64 = 8.273_789_163_814_022_887_584_737_660_02e-3;
const A91: f64 = 6.241_109_587_160_757_171_144_295_778_12e-1;
const A94: f64 = -3.360_892_629_446_941_294_068_571_098_25;
const A95: f64 = -8.682_193_468_417_260_068_181_898_914_53e-1;
const A96: f64 = 2.759_209_969_944_670_830_494_156_007_97e1;
const A97: f64 = 2.015_406_755_047_789_340_861_867_889_79e1;
const A98: f64 = -4.348_988_418_106_995_884_773_662_551_44e1;
const A101: f64 = 4.776_625_364_382_643_658_904_339_085_27e-1;
const A104: f64 = -2.488_114_619_971_667_641_926_425_864_68;
const A105: f64 = -5.902_908_268_368_429_963_714_464_757_43e-1;
const A106: f64 = 2.123_005_144_818_119_423_472_889_498_97e1;
const A107: f64 = 1.527_923_363_288_242_358_325_969_229_38e1;
const A108: f64 = -3.328_821_096_898_486_291_944_532_655_87e1;
const A109: f64 = -2.033_120_170_850_862_613_582_229_285_93e-2;
const A111: f64 = -9.371_424_300_859_873_257_170_402_165_8e-1;
const A114: f64 = 5.186_372_428_844_063_708_300_238_532_09;
const A115: f64 = 1.091_437_348_996_729_578_185_002_546_54;
const A116: f64 = -8.149_787_010_746_926_125_139_972_673_57;
const A117: f64 = -1.852_006_565_999_695_986_415_661_807_01e1;
const A118: f64 = 2.273_948_709_935_050_428_189_700_567_34e1;
const A119: f64 = 2.493_605_552_679_652_389_870_893_967_62;
const A1110: f64 = -3.046_764_471_898_219_500_382_366_902_2;
const A121: f64 = 2.273_310_147_516_538_207_923_597_684_49;
const A124: f64 = -1.053_449_546_673_725_019_840_666_898_79e1;
const A125: f64 = -2.000_872_058_224_862_499_096_757_184_44;
const A126: f64 = -1.795_893_186_311_879_891_727_659_505_34e1;
const A127: f64 = 2.794_888_452_941_996_005_084_998_088_37e1;
const A128: f64 = -2.858_998_277_135_023_694_740_655_086_74;
const A129: f64 = -8.872_856_933_530_629_544_335_492_892_58;
const A1210: f64 = 1.236_056_717_579_430_306_472_662_015_28e1;
const A1211: f64 = 6.433_927_460_157_635_303_559_704_840_46e-1;

const B1: f64 = 5.429_373_411_656_876_223_805_357_663_63e-2;
const B6: f64 = 4.450_312_892_752_408_881_441_139_505_66;
const B7: f64 = 1.891_517_899_314_500_383_042_815_990_44;
const B8: f64 = -5.801_203_960_010_584_781_467_211_422_7;
const B9: f64 = 3.111_643_669_578_198_944_089_160_623_7e-1;
const B10: f64 = -1.521_609_496_625_160_785_561_788_068_05e-1;
const B11: f64 = 2.013_654_008_040_303_483_747_765_375_01e-1;
const B12: f64 = 4.471_061_572_777_259_051_768_855_690_43e-2;

const BHH1: f64 = 0.244_094_488_188_976_377_952_755_905_512;
const BHH2: f64 = 0.733_846_688_281_611_857_341_361_741_547;
const BHH3: f64 = 0.220_588_235_294_117_647_058_823_529_412e-1;

const ER1: f64 = 0.131_200_449_941_948_807_325_010_299_6e-1;
const ER6: f64 = -0.122_515_644_637_620_444_072_056_975_3e1;
const ER7: f64 = -0.495_758_949_657_250_191_521_407_995_2;
const ER8: f64 = 0.166_437_718_245_498_653_696_153_041_5e1;
const ER9: f64 = -0.350_328_848_749_973_681_688_648_729_0;
const ER10: f64 = 0.334_179_118_713_017_479_029_731_884_1;
const ER11: f64 = 0.819_232_064_851_157_124_657_074_261_3e-1;
const ER12: f64 = -0.223_553_078_638_862_952_588_442_784_5e-1;

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, ..Self::default() }
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-10, h_max: f64::INFINITY, max_steps: 10_000_000 }
    }
}

type State<const N: usize> = [C64; N];

#[inline]
fn axpy<const N: usize>(y: &State<N>, h: f64, terms: &[(f64, &State<N>)]) -> State<N> {
    let mut out = *y;
    for i in 0..N {
        let mut acc = C64::new(0.0, 0.0);
        for (c, k) in terms {
            acc += k[i] * *c;
        }
        out[i] += acc * h;
    }
    out
}

/// Stateful integrator for `y' = f(t, y)`.
pub struct Dop853<const N: usize, F>
where
    F: FnMut(f64, &State<N>) -> State<N>,
{
    f: F,
    t: f64,
    y: State<N>,
    k1: State<N>,
    h: f64,
    opts: OdeOptions,
    steps: usize,
    evals: usize,
}

impl<const N: usize, F> Dop853<N, F>
where
    F: FnMut(f64, &State<N>) -> State<N>,
{
    pub fn new(mut f: F, t0: f64, y0: State<N>, opts: OdeOptions) -> Self {
        let k1 = f(t0, &y0);
        Self { f, t: t0, y: y0, k1, h: 0.0, opts, steps: 0, evals: 1 }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &State<N> {
        &self.y
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn evals(&self) -> usize {
        self.evals
    }

    fn weight(&self, a: f64, b: f64) -> f64 {
        self.opts.atol + self.opts.rtol * a.abs().max(b.abs())
    }

    fn initial_step(&mut self, dir: f64) -> f64 {
        let mut dnf = 0.0;
        let mut dny = 0.0;
        for i in 0..N {
            let sr = self.weight(self.y[i].re, 0.0);
            let si = self.weight(self.y[i].im, 0.0);
            dnf += (self.k1[i].re / sr).powi(2) + (self.k1[i].im / si).powi(2);
            dny += (self.y[i].re / sr).powi(2) + (self.y[i].im / si).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { (dny / dnf).sqrt() * 0.01 };
        h = h.min(self.opts.h_max);
        let y1 = axpy(&self.y, h * dir, &[(1.0, &self.k1)]);
        let f1 = (self.f)(self.t + h * dir, &y1);
        self.evals += 1;
        let mut der2 = 0.0;
        for i in 0..N {
            let sr = self.weight(self.y[i].re, 0.0);
            let si = self.weight(self.y[i].im, 0.0);
            let d = f1[i] - self.k1[i];
            der2 += (d.re / sr).powi(2) + (d.im / si).powi(2);
        }
        let der2 = der2.sqrt() / h;
        let der12 = der2.abs().max(dnf.sqrt());
        let h1 = if der12 <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / der12).powf(1.0 / 8.0) };
        (100.0 * h).min(h1).min(self.opts.h_max)
    }

    /// Integrates forward (or backward) until `t_end`, landing on it exactly.
    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        if t_end == self.t {
            return Ok(());
        }
        let dir = (t_end - self.t).signum();
        if self.h == 0.0 || self.h.signum() != dir {
            self.h = self.initial_step(dir) * dir;
        }
        let mut h = self.h;
        loop {
            if self.steps >= self.opts.max_steps {
                return Err(Error::MaxSteps(self.t));
            }
            if 0.1 * h.abs() <= f64::EPSILON * self.t.abs() {
                return Err(Error::StepUnderflow(self.t));
            }
            let remaining = t_end - self.t;
            let last = (h - remaining) * dir >= 0.0 || (remaining - h).abs() <= 1e-14 * self.t.abs().max(1.0);
            let hh = if last { remaining } else { h };

            let (y_new, k_end, err) = self.trial(hh);
            self.steps += 1;
            let fac11 = err.powf(0.125);
            if err <= 1.0 {
                let fac = (fac11 / 0.9).clamp(1.0 / 6.0, 1.0 / 0.333);
                let h_next = hh / fac;
                self.t = if last { t_end } else { self.t + hh };
                self.y = y_new;
                self.k1 = k_end;
                if last {
                    // keep the unconstrained proposal for the next interval
                    let proposed = if (hh / h).abs() < 1.0 { h } else { h_next };
                    self.h = proposed.abs().min(self.opts.h_max) * dir;
                    return Ok(());
                }
                h = h_next.abs().min(self.opts.h_max) * dir;
            } else {
                h = hh / (fac11 / 0.9).min(1.0 / 0.333);
            }
        }
    }

    fn trial(&mut self, h: f64) -> (State<N>, State<N>, f64) {
        let t = self.t;
        let y = &self.y;
        let k1 = self.k1;
        let f = &mut self.f;
        let k2 = f(t + C2 * h, &axpy(y, h, &[(A21, &k1)]));
        let k3 = f(t + C3 * h, &axpy(y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * h, &axpy(y, h, &[(A41, &k1), (A43, &k3)]));
        let k5 = f(t + C5 * h, &axpy(y, h, &[(A51, &k1), (A53, &k3), (A54, &k4)]));
        let k6 = f(t + C6 * h, &axpy(y, h, &[(A61, &k1), (A64, &k4), (A65, &k5)]));
        let k7 = f(t + C7 * h, &axpy(y, h, &[(A71, &k1), (A74, &k4), (A75, &k5), (A76, &k6)]));
        let k8 = f(
            t + C8 * h,
            &axpy(y, h, &[(A81, &k1), (A84, &k4), (A85, &k5), (A86, &k6), (A87, &k7)]),
        );
        let k9 = f(
            t + C9 * h,
            &axpy(y, h, &[(A91, &k1), (A94, &k4), (A95, &k5), (A96, &k6), (A97, &k7), (A98, &k8)]),
        );
        let k10 = f(
            t + C10 * h,
            &axpy(
                y,
                h,
                &[(A101, &k1), (A104, &k4), (A105, &k5), (A106, &k6), (A107, &k7), (A108, &k8), (A109, &k9)],
            ),
        );
        let k11 = f(
            t + C11 * h,
            &axpy(
                y,
                h,
                &[
                    (A111, &k1),
                    (A114, &k4),
                    (A115, &k5),
                    (A116, &k6),
                    (A117, &k7),
                    (A118, &k8),
                    (A119, &k9),
                    (A1110, &k10),
                ],
            ),
        );
        let k12 = f(
            t + h,
            &axpy(
                y,
                h,
                &[
                    (A121, &k1),
                    (A124, &k4),
                    (A125, &k5),
                    (A126, &k6),
                    (A127, &k7),
                    (A128, &k8),
                    (A129, &k9),
                    (A1210, &k10),
                    (A1211, &k11),
                ],
            ),
        );
        let y_new = axpy(
            y,
            h,
            &[(B1, &k1), (B6, &k6), (B7, &k7), (B8, &k8), (B9, &k9), (B10, &k10), (B11, &k11), (B12, &k12)],
        );
        let k_end = f(t + h, &y_new);
        self.evals += 12;

        let mut err = 0.0;
        let mut err2 = 0.0;
        for i in 0..N {
            let bsum = k1[i] * B1
                + k6[i] * B6
                + k7[i] * B7
                + k8[i] * B8
                + k9[i] * B9
                + k10[i] * B10
                + k11[i] * B11
                + k12[i] * B12;
            let e2 = bsum - k1[i] * BHH1 - k9[i] * BHH2 - k12[i] * BHH3;
            let e5 = k1[i] * ER1
                + k6[i] * ER6
                + k7[i] * ER7
                + k8[i] * ER8
                + k9[i] * ER9
                + k10[i] * ER10
                + k11[i] * ER11
                + k12[i] * ER12;
            let sr = self.opts.atol + self.opts.rtol * y[i].re.abs().max(y_new[i].re.abs());
            let si = self.opts.atol + self.opts.rtol * y[i].im.abs().max(y_new[i].im.abs());
            err2 += (e2.re / sr).powi(2) + (e2.im / si).powi(2);
            err += (e5.re / sr).powi(2) + (e5.im / si).powi(2);
        }
        let mut deno = err + 0.01 * err2;
        if deno <= 0.0 {
            deno = 1.0;
        }
        let err = h.abs() * err * (1.0 / (deno * (2 * N) as f64)).sqrt();
        (y_new, k_end, err)
    }
}

/// Integrates `y' = f(t, y)` from `t0` to `t1`.
pub fn solve<const N: usize>(
    f: impl FnMut(f64, &State<N>) -> State<N>,
    t0: f64,
    y0: State<N>,
    t1: f64,
    opts: OdeOptions,
) -> Result<State<N>> {
    let mut s = Dop853::new(f, t0, y0, opts);
    s.advance_to(t1)?;
    Ok(*s.y())
}
