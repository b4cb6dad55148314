//! Standard normal CDF/quantile and truncated-normal moments.
//!
//! Lower-tail probabilities go through `erfc` so that intervals deep in either
//! tail keep full relative precision; upper-tail intervals are mirrored.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Φ(x).
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

// Rational approximations for the normal quantile (central region and tails),
// relative error about 1e-9 before refinement.
#[allow(clippy::excessive_precision)]
const QA: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
#[allow(clippy::excessive_precision)]
const QB: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
#[allow(clippy::excessive_precision)]
const QC: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
#[allow(clippy::excessive_precision)]
const QD: [f64; 4] = [7.784_695_709_041_462e-3, 3.224_671_290_700_398e-1, 2.445_134_137_142_996, 3.754_408_661_907_416];
const P_LOW: f64 = 0.024_25;

fn quantile_seed(p: f64) -> f64 {
    let tail = |q: f64| {
        let r = (-2.0 * q.ln()).sqrt();
        (((((QC[0] * r + QC[1]) * r + QC[2]) * r + QC[3]) * r + QC[4]) * r + QC[5])
            / ((((QD[0] * r + QD[1]) * r + QD[2]) * r + QD[3]) * r + 1.0)
    };
    if p < P_LOW {
        tail(p)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((QA[0] * r + QA[1]) * r + QA[2]) * r + QA[3]) * r + QA[4]) * r + QA[5]) * q
            / (((((QB[0] * r + QB[1]) * r + QB[2]) * r + QB[3]) * r + QB[4]) * r + 1.0)
    } else {
        -tail(1.0 - p)
    }
}

/// Φ^{-1}(p) for p in (0, 1): rational seed plus two Halley steps against
/// the erfc-based CDF.
pub fn quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let mut z = quantile_seed(p);
    for _ in 0..2 {
        // refine on the side where Φ is small to keep relative precision
        let e = if z <= 0.0 { cdf(z) - p } else { (1.0 - p) - cdf(-z) };
        if e == 0.0 {
            break;
        }
        let u = e * (2.0 * PI).sqrt() * (0.5 * z * z).exp();
        if !u.is_finite() {
            break;
        }
        z -= u / (1.0 + 0.5 * z * u);
    }
    z
}

pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Mass Φ(b) − Φ(a) of the standard normal on `[a, b]`, computed on whichever
/// side of zero keeps it well conditioned.
pub fn interval_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        cdf(-a) - cdf(-b)
    } else {
        cdf(b) - cdf(a)
    }
}

/// Maps `u ∈ [0, 1)` to the standard normal truncated to `[a, b]`.
pub fn truncated_quantile(u: f64, a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        return -truncated_quantile(1.0 - u, -b, -a);
    }
    let pa = cdf(a);
    let pb = cdf(b);
    let p = pa + u * (pb - pa);
    let z = if p <= 0.0 { a } else { quantile(p) };
    z.clamp(a, b)
}

/// Mean of the standard normal truncated to `[a, b]`: (φ(a) − φ(b)) / Z.
pub fn truncated_mean(a: f64, b: f64) -> f64 {
    (pdf(a) - pdf(b)) / interval_mass(a, b)
}

/// Variance of the standard normal truncated to `[a, b]`.
pub fn truncated_variance(a: f64, b: f64) -> f64 {
    let z = interval_mass(a, b);
    let m = (pdf(a) - pdf(b)) / z;
    1.0 + (a * pdf(a) - b * pdf(b)) / z - m * m
}
