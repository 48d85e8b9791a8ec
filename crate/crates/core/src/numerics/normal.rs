//! Standard normal distribution functions.
//!
//! The CDF uses Marsaglia's Taylor series `Φ(x) = ½ + φ(x)(x + x³/3 + x⁵/15 + …)`
//! for |x| < 3 and a Lentz-evaluated continued fraction for the Mills ratio
//! beyond that, which keeps relative accuracy deep into both tails. The
//! quantile starts from Acklam's rational approximation and is polished with
//! Halley steps against the CDF above.

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const SERIES_LIMIT: f64 = 3.0;

pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Φ(x). Rejects NaN and infinities.
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!("normal cdf of non-finite value {x}")));
    }
    Ok(cdf(x))
}

/// Unchecked Φ(x) for internal hot paths; NaN in, NaN out.
pub(crate) fn cdf(x: f64) -> f64 {
    if x.abs() < SERIES_LIMIT {
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        let mut k = 1.0;
        loop {
            k += 2.0;
            term *= x2 / k;
            let next = sum + term;
            if next == sum {
                break;
            }
            sum = next;
        }
        0.5 + std_normal_pdf(x) * sum
    } else if x > 0.0 {
        1.0 - upper_tail(x)
    } else {
        upper_tail(-x)
    }
}

/// Q(x) = 1 − Φ(x) for x ≥ 3 via the continued fraction
/// φ(x) / (x + 1/(x + 2/(x + 3/(x + …)))).
fn upper_tail(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..5000 {
        let a = k as f64;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    std_normal_pdf(x) / f
}

/// Φ⁻¹(p) for p strictly inside (0, 1).
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("normal quantile needs p in (0,1), got {p}")));
    }
    Ok(quantile(p))
}

pub(crate) fn quantile(p: f64) -> f64 {
    if p > 0.5 {
        // 1 − p is exact for p ≥ ½
        return -lower_quantile(1.0 - p);
    }
    lower_quantile(p)
}

fn lower_quantile(p: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    let mut x = acklam(p);
    for _ in 0..3 {
        let density = std_normal_pdf(x);
        if density < 1e-300 {
            break;
        }
        let u = (cdf(x) - p) / density;
        let step = u / (1.0 + 0.5 * x * u);
        x -= step;
        if step.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}
