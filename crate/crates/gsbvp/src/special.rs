//! Scalar special functions used by the boundary-layer integrals: the error
//! function family `erf`, `erfc`, and the scaled complement
//! `erfcx(x) = exp(x^2)*erfc(x)`, plus the gamma function at integer and
//! half-integer arguments.
//!
//! The error functions follow W. J. Cody's rational minimax approximations
//! (the classic SPECFUN scheme): three argument ranges, with the scaled form
//! computed without the `exp(-x^2)` factor so that `erfcx` stays accurate for
//! large arguments where `erfc` underflows.

/// Threshold between the small-argument `erf` rational and the middle range.
const THRESH: f64 = 0.46875;
/// 1/sqrt(pi).
const SQRPI: f64 = 5.641_895_835_477_562_9e-1;
/// Most negative argument for which `erfcx` does not overflow.
const XNEG: f64 = -26.628;
/// Above this argument `erfc` underflows to zero.
const XBIG: f64 = 26.543;
/// Above this argument `erfcx(x) = 1/(x*sqrt(pi))` to machine precision.
const XHUGE: f64 = 6.71e7;

/// Rational coefficients for `erf` on |x| <= 0.46875.
const A: [f64; 5] = [
    3.161_123_743_870_565_6e0,
    1.138_641_541_510_501_56e2,
    3.774_852_376_853_020_2e2,
    3.209_377_589_138_469_47e3,
    1.857_777_061_846_031_53e-1,
];
const B: [f64; 4] = [
    2.360_129_095_234_412_09e1,
    2.440_246_379_344_441_73e2,
    1.282_616_526_077_372_28e3,
    2.844_236_833_439_170_62e3,
];

/// Rational coefficients for scaled `erfc` on 0.46875 < |x| <= 4.
const C: [f64; 9] = [
    5.641_884_969_886_700_9e-1,
    8.883_149_794_388_375_94e0,
    6.611_919_063_714_162_95e1,
    2.986_351_381_974_001_31e2,
    8.819_522_212_417_690_9e2,
    1.712_047_612_634_070_58e3,
    2.051_078_377_826_071_47e3,
    1.230_339_354_797_997_25e3,
    2.153_115_354_744_038_46e-8,
];
const D: [f64; 8] = [
    1.574_492_611_070_983_47e1,
    1.176_939_508_913_124_99e2,
    5.371_811_018_620_098_58e2,
    1.621_389_574_566_690_19e3,
    3.290_799_235_733_459_63e3,
    4.362_619_090_143_247_16e3,
    3.439_367_674_143_721_64e3,
    1.230_339_354_803_749_42e3,
];

/// Rational coefficients for scaled `erfc` on |x| > 4.
const P: [f64; 6] = [
    3.053_266_349_612_323_44e-1,
    3.603_448_999_498_044_39e-1,
    1.257_817_261_112_292_46e-1,
    1.608_378_514_874_227_66e-2,
    6.587_491_615_298_378_03e-4,
    1.631_538_713_730_209_78e-2,
];
const Q: [f64; 5] = [
    2.568_520_192_289_822_42e0,
    1.872_952_849_923_460_47e0,
    5.279_051_029_514_284_12e-1,
    6.051_834_131_244_131_91e-2,
    2.335_204_976_268_691_85e-3,
];

/// `erf(x)` rational approximation for |x| <= 0.46875.
fn erf_small(x: f64) -> f64 {
    let ysq = if x.abs() > 1.11e-16 { x * x } else { 0.0 };
    let mut num = A[4] * ysq;
    let mut den = ysq;
    for i in 0..3 {
        num = (num + A[i]) * ysq;
        den = (den + B[i]) * ysq;
    }
    x * (num + A[3]) / (den + B[3])
}

/// Scaled complement `exp(x^2)*erfc(x)` for x in (0.46875, 4].
fn erfcx_mid(y: f64) -> f64 {
    let mut num = C[8] * y;
    let mut den = y;
    for i in 0..7 {
        num = (num + C[i]) * y;
        den = (den + D[i]) * y;
    }
    (num + C[7]) / (den + D[7])
}

/// Scaled complement `exp(x^2)*erfc(x)` for x > 4.
fn erfcx_large(y: f64) -> f64 {
    if y >= XHUGE {
        return SQRPI / y;
    }
    let ysq = 1.0 / (y * y);
    let mut num = P[5] * ysq;
    let mut den = ysq;
    for i in 0..4 {
        num = (num + P[i]) * ysq;
        den = (den + Q[i]) * ysq;
    }
    let r = ysq * (num + P[4]) / (den + Q[4]);
    (SQRPI - r) / y
}

/// `exp(-x^2)` evaluated with the split-argument trick that keeps the
/// combination `exp(-x^2)*erfcx(x)` fully accurate (the square of a
/// 1/16-truncated argument is exact in double precision).
fn exp_nx2(y: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp()
}

/// Error function.
pub fn erf(x: f64) -> f64 {
    let y = x.abs();
    if y <= THRESH {
        return erf_small(x);
    }
    let scaled = if y <= 4.0 { erfcx_mid(y) } else { erfcx_large(y) };
    let r = (0.5 - if y >= XBIG { 0.0 } else { exp_nx2(y) * scaled }) + 0.5;
    if x < 0.0 {
        -r
    } else {
        r
    }
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    let y = x.abs();
    let r = if y <= THRESH {
        1.0 - erf_small(x.abs())
    } else if y >= XBIG {
        0.0
    } else if y <= 4.0 {
        exp_nx2(y) * erfcx_mid(y)
    } else {
        exp_nx2(y) * erfcx_large(y)
    };
    if x < 0.0 {
        2.0 - r
    } else {
        r
    }
}

/// Scaled complementary error function `exp(x^2)*erfc(x)`.
///
/// Decays like `1/(x*sqrt(pi))` for large positive arguments instead of
/// underflowing; for arguments below about -26.6 the result overflows and
/// +infinity is returned.
pub fn erfcx(x: f64) -> f64 {
    let y = x.abs();
    let r = if y <= THRESH {
        (y * y).exp() * (1.0 - erf_small(y))
    } else if y <= 4.0 {
        erfcx_mid(y)
    } else {
        erfcx_large(y)
    };
    if x < 0.0 {
        if x < XNEG {
            return f64::INFINITY;
        }
        // erfcx(-x) = 2*exp(x^2) - erfcx(x), with the same split-argument
        // exponential for accuracy.
        let ysq = (x * 16.0).trunc() / 16.0;
        let del = (x - ysq) * (x + ysq);
        let e = (ysq * ysq).exp() * del.exp();
        (e + e) - r
    } else {
        r
    }
}

/// Gamma function at `n/2` for positive integer `n`, evaluated exactly:
/// `gamma(k) = (k-1)!` and `gamma(k + 1/2) = (2k)! sqrt(pi) / (4^k k!)`.
pub fn gamma_half(n: usize) -> f64 {
    assert!(n >= 1, "gamma_half requires a positive argument");
    if n % 2 == 0 {
        // gamma(n/2) with n/2 integer
        let k = n / 2;
        (1..k).map(|j| j as f64).product()
    } else {
        // gamma(k + 1/2) with k = (n-1)/2: sqrt(pi) * (2k-1)!! / 2^k
        let k = (n - 1) / 2;
        let mut v = std::f64::consts::PI.sqrt();
        for j in 1..=k {
            v *= (2 * j - 1) as f64 / 2.0;
        }
        v
    }
}
