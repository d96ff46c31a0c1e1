//! Adaptive Gauss–Kronrod quadrature.
//!
//! [`integrate`] is a globally adaptive 21-point Gauss–Kronrod scheme on a
//! finite interval. [`integrate_from_zero`] covers `(0, upper]` by dyadic
//! pieces `[upper/2^(k+1), upper/2^k]`, which keeps each piece smooth for
//! integrands with algebraic behaviour `w^a` (a > -1) at the origin, and
//! extrapolates the geometric remainder once the pieces decay.

#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_982_564,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Gauss weights for the odd-indexed Kronrod nodes `XGK[1], XGK[3], ...`.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    /// Maximum number of subintervals kept by one adaptive call.
    pub max_intervals: usize,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            max_intervals: 4000,
        }
    }

    /// Default for one-dimensional moments and cut-off integrals.
    pub const fn fine() -> Self {
        Self::new(1e-300, 1e-10)
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::fine()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn non_finite(x: f64) -> Error {
    Error::Divergent(format!("integrand is not finite at {x:e}"))
}

/// Single 21-point Gauss–Kronrod rule with the QUADPACK error heuristic.
fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Segment> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    if !fc.is_finite() {
        return Err(non_finite(center));
    }
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    let mut abs_sum = kronrod.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        if !f1.is_finite() {
            return Err(non_finite(center - dx));
        }
        if !f2.is_finite() {
            return Err(non_finite(center + dx));
        }
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = kronrod * half;
    let res_abs = abs_sum * half.abs();
    let res_asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Segment { a, b, value, error })
}

/// Globally adaptive integration of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Integral> {
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let first = gk21(&f, a, b)?;
    let mut evaluations = 21;
    let mut segments = vec![first];
    let mut value = first.value;
    let mut error = first.error;
    while error > tol.target(value) {
        if segments.len() >= tol.max_intervals {
            return Err(Error::Quadrature { value, error });
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("non-empty");
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a.min(seg.b) || mid >= seg.a.max(seg.b) {
            // interval exhausted at machine precision
            return Err(Error::Quadrature { value, error });
        }
        let left = gk21(&f, seg.a, mid)?;
        let right = gk21(&f, mid, seg.b)?;
        evaluations += 42;
        segments.push(left);
        segments.push(right);
        // re-sum rather than update incrementally to avoid drift
        value = segments.iter().map(|s| s.value).sum();
        error = segments.iter().map(|s| s.error).sum();
    }
    Ok(Integral {
        value,
        error,
        evaluations,
    })
}

const MAX_DYADIC_PIECES: usize = 1000;
const DIVERGENCE_RUN: usize = 40;

/// Integrate `f` over `(0, upper]` for integrands that may be singular (but
/// integrable) at the origin.
///
/// Reports [`Error::Divergent`] when the dyadic pieces stop shrinking
/// towards the origin.
pub fn integrate_from_zero<F: Fn(f64) -> f64>(f: F, upper: f64, tol: Tolerance) -> Result<Integral> {
    if !(upper > 0.0) {
        return Err(Error::InvalidParameter {
            name: "upper",
            value: upper,
            reason: "integration bound must be positive",
        });
    }
    let mut total: f64 = 0.0;
    let mut error = 0.0;
    let mut evaluations = 0;
    let mut prev: Option<f64> = None;
    let mut non_shrinking = 0usize;
    let mut hi = upper;
    for k in 0..MAX_DYADIC_PIECES {
        let lo = 0.5 * hi;
        let piece_tol = Tolerance {
            abs: tol.abs.max(0.05 * tol.rel * total.abs()),
            ..tol
        };
        // A piece that cannot meet its own tolerance is kept; the accumulated
        // error is checked against the final total below.
        let piece = match integrate(&f, lo, hi, piece_tol) {
            Ok(p) => p,
            Err(Error::Quadrature { value, error }) => Integral {
                value,
                error,
                evaluations: 21 * tol.max_intervals,
            },
            Err(e) => return Err(e),
        };
        evaluations += piece.evaluations;
        total += piece.value;
        error += piece.error;
        hi = lo;

        let mag = piece.value.abs();
        if let Some(p) = prev {
            if p > 0.0 && mag >= 0.999 * p {
                non_shrinking += 1;
            } else {
                non_shrinking = 0;
            }
            if k > 64 && non_shrinking >= DIVERGENCE_RUN {
                return Err(Error::Divergent(format!(
                    "integral over (0, {upper:e}] does not converge at the origin"
                )));
            }
            if total != 0.0 {
                if mag == 0.0 {
                    break;
                }
                let ratio = mag / p;
                if ratio < 1.0 {
                    let tail = mag * ratio / (1.0 - ratio);
                    if tail <= 0.1 * tol.target(total) || hi <= f64::MIN_POSITIVE {
                        total += piece.value.signum() * tail;
                        error += tail.min(mag);
                        if error > tol.target(total) {
                            return Err(Error::Quadrature { value: total, error });
                        }
                        return Ok(Integral {
                            value: total,
                            error,
                            evaluations,
                        });
                    }
                }
            }
        }
        prev = Some(mag);
    }
    if error > tol.target(total) {
        return Err(Error::Quadrature {
            value: total,
            error,
        });
    }
    Ok(Integral {
        value: total,
        error,
        evaluations,
    })
}
