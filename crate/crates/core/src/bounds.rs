//! Estimation-error constants of the bounded network class, the Barron
//! constant κ_d, and width schedules k(n).
//!
//! The tail bound involves an unspecified universal constant `C`; it defaults
//! to 1 and every reported tail probability is "up to C".

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::distributions::quadrature_1d;
use crate::divergences::DivergenceKind;
use crate::error::{Error, Result};
use crate::network::ParamBounds;

/// Closed-form upper bound on `sup γ′(g(x))` over the class:
/// `e^{k a2 + a3}` (KL), `0.5 (k a2 + a3) + 1` (χ²), `1/t²` (squared Hellinger).
pub fn gamma_prime_sup(kind: DivergenceKind, k: usize, bounds: &ParamBounds) -> Result<f64> {
    let reach = bounds.output_bound(k);
    match kind {
        DivergenceKind::Kl => Ok(reach.exp()),
        DivergenceKind::ChiSq => Ok(0.5 * reach + 1.0),
        DivergenceKind::SqHellinger => {
            let t = bounds.trunc.ok_or(Error::MissingTruncation)?;
            Ok(1.0 / (t * t))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub kind: DivergenceKind,
    pub k: usize,
    pub bounds: ParamBounds,
    pub n: usize,
    /// Universal constant of the chaining tail inequality.
    pub universal_c: f64,
}

impl BoundInputs {
    pub fn new(kind: DivergenceKind, k: usize, bounds: ParamBounds, n: usize) -> Self {
        Self { kind, k, bounds, n, universal_c: 1.0 }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 {
            return Err(Error::config(format!("need n >= 1 and k >= 1 (got n={}, k={})", self.n, self.k)));
        }
        if !(self.universal_c.is_finite() && self.universal_c > 0.0) {
            return Err(Error::config(format!("universal constant C must be positive, got {}", self.universal_c)));
        }
        if self.kind == DivergenceKind::SqHellinger && self.bounds.trunc.is_none() {
            return Err(Error::MissingTruncation);
        }
        Ok(())
    }
}

/// `γ̄′`, `R`, `V`, `E` for one `(kind, k, a, n, C)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub gamma_prime_sup: f64,
    /// `R = 2 (γ̄′ + 1) √k`
    pub r: f64,
    /// `V = 4 C a2² k R²`
    pub v: f64,
    /// `E = 2√2 n^{-1/2} k a2 R`
    pub e: f64,
    pub n: usize,
    pub universal_c: f64,
}

impl BoundReport {
    /// `P(|Ĥ − H| ≥ δ + C·E) ≤ 2C exp(−n δ² / V)`; `2C` when `V = 0`.
    pub fn tail(&self, delta: f64) -> f64 {
        let two_c = 2.0 * self.universal_c;
        if self.v == 0.0 {
            return two_c;
        }
        two_c * (-(self.n as f64) * delta * delta / self.v).exp()
    }

    /// Deviation `δ + C·E` such that the tail probability equals `prob`.
    pub fn deviation_at(&self, prob: f64) -> f64 {
        let two_c = 2.0 * self.universal_c;
        let delta = if prob >= two_c { 0.0 } else { (self.v * (two_c / prob).ln() / self.n as f64).sqrt() };
        delta + self.universal_c * self.e
    }
}

pub fn estimation_constants(inputs: &BoundInputs) -> Result<BoundReport> {
    inputs.validate()?;
    let gbar = gamma_prime_sup(inputs.kind, inputs.k, &inputs.bounds)?;
    let k = inputs.k as f64;
    let n = inputs.n as f64;
    let a2 = inputs.bounds.a2;
    let r = 2.0 * (gbar + 1.0) * k.sqrt();
    let v = 4.0 * inputs.universal_c * a2 * a2 * k * r * r;
    let e = 2.0 * 2f64.sqrt() * k * a2 * r / n.sqrt();
    Ok(BoundReport { gamma_prime_sup: gbar, r, v, e, n: inputs.n, universal_c: inputs.universal_c })
}

/// Covering-number bound `(1 + √k a2 R / (√n ε))^k` for the output-weight box.
pub fn covering_bound(k: usize, a2: f64, r: f64, n: usize, eps: f64) -> Result<f64> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::domain(format!("covering radius must be positive, got {eps}")));
    }
    let kf = k as f64;
    let s = kf.sqrt() * a2 * r / ((n as f64).sqrt() * eps);
    Ok((1.0 + s).powf(kf))
}

/// Smoothness order `⌊d/2⌋ + 2` used by κ_d.
pub fn smoothness_order(d: usize) -> usize {
    d / 2 + 2
}

/// κ_d with `κ_d² = (d + d^s) ∫_{R^d} (1 + |ω|^{2(s−1)})^{-1} dω`.
///
/// The integrand is radial; the shell integral over `[1, ∞)` is folded onto
/// `(0, 1]` by `r ↦ 1/r`.
pub fn kappa_d(d: usize) -> Result<f64> {
    if !(1..=10).contains(&d) {
        return Err(Error::domain(format!("kappa_d is provided for 1 <= d <= 10, got {d}")));
    }
    let s = smoothness_order(d);
    let m = 2 * (s - 1);
    let df = d as f64;
    let (di, mi) = (d as i32, m as i32);
    let inner = quadrature_1d(|r| r.powi(di - 1) / (1.0 + r.powi(mi)), 0.0, 1.0, 1e-13)?;
    let outer = quadrature_1d(|v| v.powi(mi - di - 1) / (v.powi(mi) + 1.0), 0.0, 1.0, 1e-13)?;
    let sphere = 2.0 * PI.powf(df / 2.0) / libm::tgamma(df / 2.0);
    let weight = df + df.powi(s as i32);
    Ok((weight * sphere * (inner + outer)).sqrt())
}

/// Barron-norm bound `b κ_d √d` for functions with smoothness budget `b`.
pub fn barron_bound(b: f64, d: usize) -> Result<f64> {
    if b.is_nan() || b < 0.0 {
        return Err(Error::domain(format!("b must be nonnegative, got {b}")));
    }
    Ok(b * kappa_d(d)? * (d as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    /// Largest k satisfying the rate theorems' growth constraints.
    Theorem,
    /// `k = √n`, optimal when the witness norm bound is known.
    OracleM,
    /// `k = n^{1/5}`, as in the empirical convergence study.
    Experiment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub k: usize,
    /// Class scale `m_k = 0.5 ln k`.
    pub m: f64,
    /// Output truncation `t_k = 1/ln k` (squared Hellinger only).
    pub t: Option<f64>,
}

/// Slack exponent η in the theorem-mode widths `n^{1/3 − η}`, `n^{1/2 − η}`.
pub const THEOREM_ETA: f64 = 0.01;

/// `t_k = 1 / ln k`.
pub fn hellinger_truncation(k: f64) -> f64 {
    1.0 / k.ln()
}

pub fn schedule(kind: DivergenceKind, n: usize, mode: ScheduleMode) -> Result<Schedule> {
    if n < 16 {
        return Err(Error::config(format!("schedules need n >= 16, got {n}")));
    }
    let nf = n as f64;
    let mut k = match mode {
        ScheduleMode::Experiment => nf.powf(0.2).round() as usize,
        ScheduleMode::OracleM => nf.sqrt().round() as usize,
        ScheduleMode::Theorem => theorem_width(kind, nf),
    };
    if k < 2 {
        return Err(Error::config(format!("n = {n} is too small for k >= 2 in {mode:?} mode")));
    }
    let t = if kind == DivergenceKind::SqHellinger {
        k = k.max(3);
        Some(hellinger_truncation(k as f64))
    } else {
        None
    };
    Ok(Schedule { k, m: 0.5 * (k as f64).ln(), t })
}

fn theorem_width(kind: DivergenceKind, n: f64) -> usize {
    let budget = n.powf((1.0 - THEOREM_ETA) / 2.0);
    match kind {
        // k³ = O(n^{1−α})
        DivergenceKind::Kl => n.powf(1.0 / 3.0 - THEOREM_ETA).round() as usize,
        // √k ln²k = O(n^{(1−α)/2})
        DivergenceKind::ChiSq => {
            shrink_until(n.powf(0.5 - THEOREM_ETA).round() as usize, |k| k.sqrt() * k.ln().powi(2) <= budget)
        }
        // √k ln³k = O(n^{(1−α)/2})
        DivergenceKind::SqHellinger => {
            shrink_until(n.powf(0.5 - THEOREM_ETA).round() as usize, |k| k.sqrt() * k.ln().powi(3) <= budget)
        }
    }
}

fn shrink_until(mut k: usize, ok: impl Fn(f64) -> bool) -> usize {
    while k > 2 && !ok(k as f64) {
        k -= 1;
    }
    k
}

/// Which effective-error shape to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateRegime {
    /// Class scale grows as `m_k = 0.5 ln k` (and `t_k = 1/ln k`).
    GrowingScale,
    /// Class scale fixed at the known witness bound M.
    KnownBound,
}

/// Effective error shape with every hidden constant set to 1.
///
/// Growing scale: `k^{-1/2} + k^{3/2} n^{-1/2}` (KL),
/// `k^{-1/2} + √k ln²k n^{-1/2}` (χ²), `ln k k^{-1/2} + ln³k √k n^{-1/2}` (H²).
/// Known bound: `k^{-1/2} + √k n^{-1/2}` (KL, χ²),
/// `ln k k^{-1/2} + √k ln²k n^{-1/2}` (H²).
/// These are shapes for comparing scalings, not certified bounds.
pub fn effective_rate(kind: DivergenceKind, k: f64, n: f64, regime: RateRegime) -> f64 {
    let l = k.ln();
    let approx = k.powf(-0.5);
    let est = n.powf(-0.5);
    match (regime, kind) {
        (RateRegime::GrowingScale, DivergenceKind::Kl) => approx + k.powf(1.5) * est,
        (RateRegime::GrowingScale, DivergenceKind::ChiSq) => approx + k.sqrt() * l * l * est,
        (RateRegime::GrowingScale, DivergenceKind::SqHellinger) => l * approx + l.powi(3) * k.sqrt() * est,
        (RateRegime::KnownBound, DivergenceKind::Kl | DivergenceKind::ChiSq) => approx + k.sqrt() * est,
        (RateRegime::KnownBound, DivergenceKind::SqHellinger) => l * approx + k.sqrt() * l * l * est,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;
    use DivergenceKind::*;

    fn b(a2: f64, a3: f64, t: Option<f64>) -> ParamBounds {
        ParamBounds::new(1.0, a2, a3, t).unwrap()
    }

    #[test]
    fn gamma_prime_sup_values() {
        assert!((gamma_prime_sup(Kl, 1, &b(1.0, 1.0, None)).unwrap() - E * E).abs() < 1e-12);
        assert_eq!(gamma_prime_sup(ChiSq, 2, &b(0.5, 1.0, None)).unwrap(), 2.0);
        assert_eq!(gamma_prime_sup(SqHellinger, 9, &b(1.0, 1.0, Some(0.5))).unwrap(), 4.0);
        assert!(matches!(gamma_prime_sup(SqHellinger, 9, &b(1.0, 1.0, None)), Err(Error::MissingTruncation)));
    }

    #[test]
    fn estimation_constants_by_hand() {
        let inputs = BoundInputs::new(Kl, 1, b(1.0, 1.0, None), 2);
        let rep = estimation_constants(&inputs).unwrap();
        assert!((rep.e - 4.0 * (E * E + 1.0)).abs() < 1e-9);
        assert!((rep.r - 2.0 * (E * E + 1.0)).abs() < 1e-12);
        assert!((rep.v - 4.0 * rep.r * rep.r).abs() < 1e-9);
        assert_eq!(rep.tail(0.0), 2.0);

        let quad = estimation_constants(&BoundInputs { n: 8, ..inputs }).unwrap();
        assert_eq!(quad.e, rep.e / 2.0);
    }

    #[test]
    fn deviation_inverts_tail() {
        let rep = estimation_constants(&BoundInputs::new(ChiSq, 4, b(0.5, 1.0, None), 10_000)).unwrap();
        let dev = rep.deviation_at(0.05);
        let delta = dev - rep.universal_c * rep.e;
        assert!((rep.tail(delta) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn covering_values() {
        assert_eq!(covering_bound(1, 1.0, 1.0, 1, 1.0).unwrap(), 2.0);
        assert!((covering_bound(1, 1.0, 1.0, 1, 2.0).unwrap() - 1.5).abs() < 1e-15);
        assert!((covering_bound(3, 1.0, 5.0, 10, 1e12).unwrap() - 1.0).abs() < 1e-9);
        assert!(covering_bound(1, 1.0, 1.0, 1, 0.0).is_err());
    }

    #[test]
    fn kappa_closed_forms() {
        assert!((kappa_d(1).unwrap() - (2.0 * PI).sqrt()).abs() < 1e-8);
        assert!((kappa_d(2).unwrap() - (5.0 * PI * PI).sqrt()).abs() < 1e-8);
        assert!(kappa_d(0).is_err());
        assert!(kappa_d(11).is_err());
    }

    #[test]
    fn kappa_matches_beta_function_closed_form() {
        // ∫_0^∞ r^{d−1}/(1 + r^m) dr = (π/m) / sin(πd/m)
        for d in 1..=10 {
            let s = smoothness_order(d);
            let m = (2 * (s - 1)) as f64;
            let df = d as f64;
            let radial = (PI / m) / (PI * df / m).sin();
            let sphere = 2.0 * PI.powf(df / 2.0) / libm::tgamma(df / 2.0);
            let expected = ((df + df.powi(s as i32)) * sphere * radial).sqrt();
            let got = kappa_d(d).unwrap();
            assert!(((got - expected) / expected).abs() < 1e-10, "d={d}: {got} vs {expected}");
        }
    }

    #[test]
    fn barron_values() {
        assert_eq!(barron_bound(0.0, 3).unwrap(), 0.0);
        assert!((barron_bound(1.0, 1).unwrap() - 2.506_628_274_631).abs() < 1e-9);
        let one = barron_bound(1.3, 4).unwrap();
        assert!((barron_bound(2.6, 4).unwrap() - 2.0 * one).abs() < 1e-12);
        assert!(barron_bound(-1.0, 1).is_err());
    }

    #[test]
    fn schedule_values() {
        assert_eq!(schedule(Kl, 100_000, ScheduleMode::Experiment).unwrap().k, 10);
        assert_eq!(schedule(Kl, 10_000, ScheduleMode::OracleM).unwrap().k, 100);
        let h = schedule(SqHellinger, 100_000, ScheduleMode::Experiment).unwrap();
        assert!((h.t.unwrap() - 1.0 / 10f64.ln()).abs() < 1e-15);
        assert!((hellinger_truncation(E * E) - 0.5).abs() < 1e-15);
        assert!((schedule(Kl, 1000, ScheduleMode::Experiment).unwrap().m - 0.5 * 4f64.ln()).abs() < 1e-15);
        assert_eq!(schedule(SqHellinger, 16, ScheduleMode::Experiment).unwrap().k, 3);
        assert!(schedule(Kl, 15, ScheduleMode::Experiment).is_err());

        let kl = schedule(Kl, 1_000_000, ScheduleMode::Theorem).unwrap().k;
        assert_eq!(kl, 1e6f64.powf(1.0 / 3.0 - THEOREM_ETA).round() as usize);
        for kind in [ChiSq, SqHellinger] {
            let k = schedule(kind, 1_000_000, ScheduleMode::Theorem).unwrap().k as f64;
            let pow = if kind == ChiSq { 2 } else { 3 };
            assert!(k.sqrt() * k.ln().powi(pow) <= 1e6f64.powf(0.495));
        }
    }

    #[test]
    fn effective_rate_shapes() {
        let n: f64 = 1e8;
        let k = n.sqrt();
        let known = effective_rate(Kl, k, n, RateRegime::KnownBound);
        assert!((known - 2.0 * n.powf(-0.25)).abs() < 1e-15);
        let grow = effective_rate(Kl, k, n, RateRegime::GrowingScale);
        assert!((grow - (n.powf(-0.25) + n.powf(0.25))).abs() < 1e-9);
        for kind in DivergenceKind::ALL {
            for regime in [RateRegime::GrowingScale, RateRegime::KnownBound] {
                assert!(effective_rate(kind, 10.0, 4000.0, regime) < effective_rate(kind, 10.0, 1000.0, regime));
            }
        }
        assert!(effective_rate(Kl, 1e6, 1e4, RateRegime::GrowingScale) > 1e4);
    }
}
