//! Numerical integration: globally adaptive Gauss–Kronrod (7/15) for 1-D
//! integrals and nested Clenshaw–Curtis rules for tensor grids.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const MAX_SUBINTERVALS: usize = 1_000_000;

// Kronrod abscissae on [0, 1]; odd indices are the 7-point Gauss nodes.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_64, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Segment {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);

    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment { lo, hi, value: kronrod * half, error: ((kronrod - gauss) * half).abs() }
}

/// Adaptive integral of `f` over `[lo, hi]` to absolute tolerance `tol`.
///
/// The interval with the largest local error estimate (Kronrod minus Gauss)
/// is bisected until the summed estimate drops below `tol`.
pub fn quadrature_1d<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::domain(format!("quadrature tolerance must be positive, got {tol}")));
    }
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::domain("quadrature interval must be finite"));
    }
    if lo == hi {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if lo < hi { (lo, hi, 1.0) } else { (hi, lo, -1.0) };

    let first = gauss_kronrod(&f, lo, hi);
    if !first.value.is_finite() {
        return Err(Error::NonConvergence(format!("non-finite integrand on [{lo}, {hi}]")));
    }
    let mut total_error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);

    while total_error > tol {
        if heap.len() >= MAX_SUBINTERVALS {
            return Err(Error::NonConvergence(format!(
                "{MAX_SUBINTERVALS} subintervals exhausted with error estimate {total_error:e} > {tol:e}"
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            return Err(Error::NonConvergence(format!(
                "interval around {mid} cannot be bisected further (error estimate {total_error:e})"
            )));
        }
        let left = gauss_kronrod(&f, worst.lo, mid);
        let right = gauss_kronrod(&f, mid, worst.hi);
        if !left.value.is_finite() || !right.value.is_finite() {
            return Err(Error::NonConvergence(format!("non-finite integrand near {mid}")));
        }
        total_error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);

        // Refresh the running sum now and then so cancellation cannot drift.
        if heap.len() % 1024 == 0 {
            total_error = heap.iter().map(|s| s.error).sum();
        }
    }
    let value: f64 = heap.iter().map(|s| s.value).sum();
    Ok(sign * value)
}

/// Clenshaw–Curtis rule with `2^m + 1` nodes on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct ClenshawCurtis {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl ClenshawCurtis {
    /// Rule with `points` nodes; `points - 1` must be even and at least 2.
    pub fn new(points: usize) -> Self {
        assert!(points >= 3 && (points - 1).is_multiple_of(2), "Clenshaw-Curtis needs an odd node count >= 3");
        let n = points - 1;
        let nf = n as f64;
        let half = n / 2;
        let mut nodes = Vec::with_capacity(points);
        let mut weights = Vec::with_capacity(points);
        for j in 0..=n {
            let theta = j as f64 * PI / nf;
            nodes.push(theta.cos());
            let mut s = 0.0;
            for k in 1..=half {
                let b = if k == half { 1.0 } else { 2.0 };
                let kk = k as f64;
                s += b / (4.0 * kk * kk - 1.0) * (2.0 * kk * theta).cos();
            }
            let c = if j == 0 || j == n { 1.0 } else { 2.0 };
            weights.push(c / nf * (1.0 - s));
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto `[lo, hi]`.
    pub fn mapped(&self, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
        let c = 0.5 * (lo + hi);
        let h = 0.5 * (hi - lo);
        let xs = self.nodes.iter().map(|&t| c + h * t).collect();
        let ws = self.weights.iter().map(|&w| h * w).collect();
        (xs, ws)
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, lo: f64, hi: f64) -> f64 {
        let (xs, ws) = self.mapped(lo, hi);
        xs.iter().zip(&ws).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Integral of `f` over the box `[lo_i, hi_i]` on the tensor-product grid.
    ///
    /// `f` may fail; the first error aborts the sum.
    pub fn integrate_box<F>(&self, f: F, lo: &[f64], hi: &[f64]) -> Result<f64>
    where
        F: Fn(&[f64]) -> Result<f64>,
    {
        let d = lo.len();
        let axes: Vec<(Vec<f64>, Vec<f64>)> = lo.iter().zip(hi).map(|(&a, &b)| self.mapped(a, b)).collect();
        let m = self.len();
        let mut index = vec![0usize; d];
        let mut point = vec![0.0; d];
        let mut total = 0.0;
        loop {
            let mut w = 1.0;
            for axis in 0..d {
                point[axis] = axes[axis].0[index[axis]];
                w *= axes[axis].1[index[axis]];
            }
            total += w * f(&point)?;

            // odometer increment
            let mut axis = 0;
            loop {
                if axis == d {
                    return Ok(total);
                }
                index[axis] += 1;
                if index[axis] < m {
                    break;
                }
                index[axis] = 0;
                axis += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi(x: f64) -> f64 {
        0.5 * (1.0 + libm::erf(x / 2f64.sqrt()))
    }

    #[test]
    fn constant_and_polynomial() {
        let one = quadrature_1d(|_| 1.0, 0.0, 2.0, 1e-12).unwrap();
        assert!((one - 2.0).abs() < 1e-10);
        let sq = quadrature_1d(|x| x * x, 0.0, 1.0, 1e-12).unwrap();
        assert!((sq - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn normal_pdf_matches_erf() {
        let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        let v = quadrature_1d(pdf, 0.1, 2.0, DEFAULT_TOL).unwrap();
        assert!((v - (phi(2.0) - phi(0.1))).abs() < 1e-10);
    }

    #[test]
    fn reversed_interval_flips_sign() {
        let v = quadrature_1d(|x| x, 1.0, 0.0, 1e-12).unwrap();
        assert!((v + 0.5).abs() < 1e-12);
    }

    #[test]
    fn kink_is_resolved_by_bisection() {
        let v = quadrature_1d(|x: f64| (x - 0.3).abs(), 0.0, 1.0, 1e-10).unwrap();
        assert!((v - (0.045 + 0.245)).abs() < 1e-10);
    }

    #[test]
    fn non_finite_integrand_fails() {
        let err = quadrature_1d(|x: f64| 1.0 / x, 0.0, 1.0, 1e-10).unwrap_err();
        assert!(matches!(err, Error::NonConvergence(_)));
    }

    #[test]
    fn bad_tolerance_rejected() {
        assert!(quadrature_1d(|x| x, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn clenshaw_curtis_weights_sum_to_two_and_integrate_smooth_functions() {
        let cc = ClenshawCurtis::new(257);
        let s: f64 = cc.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-13);
        assert!(cc.weights.iter().all(|&w| w > 0.0));
        let v = cc.integrate(|x: f64| x.exp(), 0.0, 1.0);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn tensor_grid_separable_integral() {
        let cc = ClenshawCurtis::new(33);
        let v = cc.integrate_box(|x| Ok(x[0] * x[1].exp()), &[0.0, -1.0], &[1.0, 0.0]).unwrap();
        let exact = 0.5 * (1.0 - (-1f64).exp());
        assert!((v - exact).abs() < 1e-13);
    }
}
