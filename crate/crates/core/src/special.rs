//! Log-scale special functions: normal CDF, log-sum-exp helpers, log-gamma.

use crate::num::Real;

// Cody (1993) rational approximations, as used by R's `pnorm_both`.
const A: [f64; 5] = [
    2.235_252_035_460_683_928_7,
    161.028_231_068_555_878_81,
    1_067.689_485_460_370_958_2,
    18_154.981_253_343_561_249,
    0.065_682_337_918_207_449_113,
];
const B: [f64; 4] = [
    47.202_581_904_688_241_87,
    976.098_551_737_776_693_22,
    10_260.932_208_618_978_205,
    45_507.789_335_026_729_956,
];
const C: [f64; 9] = [
    0.398_941_512_088_134_667_64,
    8.883_149_794_388_375_941_2,
    93.506_656_132_177_855_979,
    597.270_276_394_800_262_26,
    2_494.537_585_290_372_671_1,
    6_848.190_450_536_282_332_6,
    11_602.651_437_647_350_124,
    9_842.714_838_383_978_021_8,
    1.076_557_677_372_019_231_7e-8,
];
const D: [f64; 8] = [
    22.266_688_044_328_115_691,
    235.387_901_782_624_998_61,
    1_519.377_599_407_554_805,
    6_485.558_298_266_760_755,
    18_615.571_640_885_098_091,
    34_900.952_721_145_977_266,
    38_912.003_286_093_271_411,
    19_685.429_676_859_990_727,
];
const P: [f64; 6] = [
    0.215_898_534_057_956_99,
    0.127_401_161_160_247_363_9,
    0.022_235_277_870_649_807,
    0.001_421_619_193_227_893_466,
    2.911_287_495_116_879_2e-5,
    0.023_073_441_764_940_173_03,
];
const Q: [f64; 5] = [
    1.284_260_096_144_911_21,
    0.468_238_212_480_865_118,
    0.065_988_137_868_928_551_5,
    0.003_782_396_332_027_582_44,
    7.297_515_550_839_662_05e-5,
];

/// Returns `(ln Φ(x), ln(1 − Φ(x)))` without cancellation in either tail.
///
/// For |x| beyond √32 the asymptotic expansion of the Mills ratio is used, so
/// both values stay finite until `x²/2` itself overflows.
pub fn log_ndtr_both<T: Real>(x: T) -> (T, T) {
    if x.is_nan() {
        return (x, x);
    }
    let y = x.abs();
    let half = T::lit(0.5);
    if y <= T::lit(0.674_489_75) {
        let (mut xnum, mut xden) = (T::zero(), T::zero());
        if y > T::epsilon() * half {
            let xsq = x * x;
            xnum = T::lit(A[4]) * xsq;
            xden = xsq;
            for i in 0..3 {
                xnum = (xnum + T::lit(A[i])) * xsq;
                xden = (xden + T::lit(B[i])) * xsq;
            }
        }
        let temp = x * (xnum + T::lit(A[3])) / (xden + T::lit(B[3]));
        return ((half + temp).ln(), (half - temp).ln());
    }
    let temp = if y <= T::lit(32f64.sqrt()) {
        let mut xnum = T::lit(C[8]) * y;
        let mut xden = y;
        for i in 0..7 {
            xnum = (xnum + T::lit(C[i])) * y;
            xden = (xden + T::lit(D[i])) * y;
        }
        (xnum + T::lit(C[7])) / (xden + T::lit(D[7]))
    } else {
        let xsq = (x * x).recip();
        let mut xnum = T::lit(P[5]) * xsq;
        let mut xden = xsq;
        for i in 0..4 {
            xnum = (xnum + T::lit(P[i])) * xsq;
            xden = (xden + T::lit(Q[i])) * xsq;
        }
        let t = xsq * (xnum + T::lit(P[4])) / (xden + T::lit(Q[4]));
        (T::lit(1.0 / (2.0 * std::f64::consts::PI).sqrt()) - t) / y
    };
    // exp(-y²/2) split as exp(-xsq²/2)·exp(-del/2) to keep precision.
    let sixteen = T::lit(16.0);
    let xsq = (y * sixteen).trunc() / sixteen;
    let del = (y - xsq) * (y + xsq);
    let log_small = -xsq * xsq * half - del * half + temp.ln();
    let log_big = log1mexp(log_small);
    if x > T::zero() {
        (log_big, log_small)
    } else {
        (log_small, log_big)
    }
}

/// ln Φ(x).
#[inline]
pub fn log_ndtr<T: Real>(x: T) -> T {
    log_ndtr_both(x).0
}

/// Φ(x).
#[inline]
pub fn ndtr<T: Real>(x: T) -> T {
    log_ndtr(x).exp()
}

/// ln(1 − eˣ) for x ≤ 0.
#[inline]
pub fn log1mexp<T: Real>(x: T) -> T {
    if x > -T::LN_2() {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// ln(eᵃ + eᵇ).
#[inline]
pub fn log_add_exp<T: Real>(a: T, b: T) -> T {
    if a == T::neg_infinity() {
        return b;
    }
    if b == T::neg_infinity() {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// ln(eᵃ − eᵇ) for a ≥ b.
#[inline]
pub fn log_sub_exp<T: Real>(a: T, b: T) -> T {
    if b == T::neg_infinity() {
        return a;
    }
    a + log1mexp(b - a)
}

/// ln Σ exp(xᵢ); `-inf` for an empty slice.
pub fn log_sum_exp<T: Real>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return max;
    }
    let sum = xs.iter().fold(T::zero(), |acc, &x| acc + (x - max).exp());
    max + sum.ln()
}

/// ln(Φ(hi) − Φ(lo)) for lo ≤ hi, picking the tail that avoids cancellation.
pub fn log_ndtr_diff<T: Real>(hi: T, lo: T) -> T {
    log_ndtr_diff_cached(hi, lo, log_ndtr_both(lo))
}

/// [`log_ndtr_diff`] with `log_ndtr_both(lo)` supplied by the caller.
pub fn log_ndtr_diff_cached<T: Real>(hi: T, lo: T, (l_lo, su_lo): (T, T)) -> T {
    if hi <= lo {
        return T::neg_infinity();
    }
    let (l_hi, su_hi) = log_ndtr_both(hi);
    if lo >= T::zero() {
        // Both in the upper half: use survival functions.
        log_sub_exp(su_lo, su_hi)
    } else if hi <= T::zero() {
        log_sub_exp(l_hi, l_lo)
    } else {
        (T::one() - su_hi.exp() - l_lo.exp()).ln()
    }
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(x) for x > 0 (reflection used below 0.5).
pub fn ln_gamma<T: Real>(x: T) -> T {
    let half = T::lit(0.5);
    if x < half {
        let pi = T::PI();
        return (pi / (pi * x).sin()).abs().ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut a = T::lit(LANCZOS[0]);
    let t = x + T::lit(LANCZOS_G) + half;
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a = a + T::lit(c) / (x + T::from_usize_lossy(i));
    }
    T::lit(0.5 * (2.0 * std::f64::consts::PI).ln()) + (x + half) * t.ln() - t + a.ln()
}

/// ln B(a, b).
#[inline]
pub fn ln_beta<T: Real>(a: T, b: T) -> T {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}
