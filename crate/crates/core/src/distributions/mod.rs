//! Product-form distributions on axis-aligned boxes.
//!
//! Each coordinate is an independent truncated Gaussian or uniform marginal
//! on its own interval, so d-dimensional expectations of separable integrands
//! reduce to 1-D quadratures.

pub mod normal;
pub mod quadrature;

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use quadrature::{quadrature_1d, ClenshawCurtis, DEFAULT_TOL};

/// Axis-aligned box `Π [lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSupport {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxSupport {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::config(format!(
                "box bounds must be non-empty and of equal length (got {} and {})",
                lo.len(),
                hi.len()
            )));
        }
        for (i, (&a, &b)) in lo.iter().zip(&hi).enumerate() {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::config(format!("axis {i}: need finite lo < hi, got [{a}, {b}]")));
            }
        }
        let support = Self { lo, hi };
        let vol = support.volume();
        if !(vol.is_finite() && vol > 0.0) {
            return Err(Error::config(format!("box volume {vol} is not positive and finite")));
        }
        Ok(support)
    }

    pub fn dims(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dims() && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&v, (&a, &b))| a <= v && v <= b)
    }
}

/// Serialized form of a marginal, as it appears in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarginalSpec {
    TruncGauss { mu: f64, sigma: f64, lo: f64, hi: f64 },
    Uniform { lo: f64, hi: f64 },
}

/// One coordinate of a product distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MarginalSpec", into = "MarginalSpec")]
pub struct Marginal1D {
    spec: MarginalSpec,
    lo: f64,
    hi: f64,
    // log of the normalizer: density = exp(-0.5 z^2 - log_norm) or exp(-log_norm)
    log_norm: f64,
}

impl From<Marginal1D> for MarginalSpec {
    fn from(m: Marginal1D) -> Self {
        m.spec
    }
}

impl TryFrom<MarginalSpec> for Marginal1D {
    type Error = Error;

    fn try_from(spec: MarginalSpec) -> Result<Self> {
        match spec {
            MarginalSpec::TruncGauss { mu, sigma, lo, hi } => Marginal1D::trunc_gauss(mu, sigma, lo, hi),
            MarginalSpec::Uniform { lo, hi } => Marginal1D::uniform(lo, hi),
        }
    }
}

fn check_interval(lo: f64, hi: f64) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && lo < hi {
        Ok(())
    } else {
        Err(Error::config(format!("marginal interval must satisfy finite lo < hi, got [{lo}, {hi}]")))
    }
}

impl Marginal1D {
    /// N(mu, sigma²) restricted to `[lo, hi]` and renormalized.
    pub fn trunc_gauss(mu: f64, sigma: f64, lo: f64, hi: f64) -> Result<Self> {
        check_interval(lo, hi)?;
        if !(mu.is_finite() && sigma.is_finite() && sigma > 0.0) {
            return Err(Error::config(format!(
                "truncated Gaussian needs finite mu and sigma > 0, got ({mu}, {sigma})"
            )));
        }
        let z = normal::interval_mass((lo - mu) / sigma, (hi - mu) / sigma);
        if z.is_nan() || z <= 0.0 {
            return Err(Error::config(format!("N({mu}, {sigma}²) has no representable mass on [{lo}, {hi}]")));
        }
        Ok(Self {
            spec: MarginalSpec::TruncGauss { mu, sigma, lo, hi },
            lo,
            hi,
            log_norm: sigma.ln() + 0.5 * (2.0 * PI).ln() + z.ln(),
        })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        check_interval(lo, hi)?;
        Ok(Self { spec: MarginalSpec::Uniform { lo, hi }, lo, hi, log_norm: (hi - lo).ln() })
    }

    pub fn spec(&self) -> &MarginalSpec {
        &self.spec
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Normalization constant Z of a truncated Gaussian (1 for uniform).
    pub fn normalizer(&self) -> f64 {
        match self.spec {
            MarginalSpec::TruncGauss { mu, sigma, lo, hi } => {
                normal::interval_mass((lo - mu) / sigma, (hi - mu) / sigma)
            }
            MarginalSpec::Uniform { .. } => 1.0,
        }
    }

    pub fn log_density(&self, x: f64) -> f64 {
        if !(self.lo <= x && x <= self.hi) {
            return f64::NEG_INFINITY;
        }
        match self.spec {
            MarginalSpec::TruncGauss { mu, sigma, .. } => {
                let z = (x - mu) / sigma;
                -0.5 * z * z - self.log_norm
            }
            MarginalSpec::Uniform { .. } => -self.log_norm,
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    /// Analytic mean.
    pub fn mean(&self) -> f64 {
        match self.spec {
            MarginalSpec::TruncGauss { mu, sigma, lo, hi } => {
                mu + sigma * normal::truncated_mean((lo - mu) / sigma, (hi - mu) / sigma)
            }
            MarginalSpec::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    /// Analytic variance.
    pub fn variance(&self) -> f64 {
        match self.spec {
            MarginalSpec::TruncGauss { mu, sigma, lo, hi } => {
                sigma * sigma * normal::truncated_variance((lo - mu) / sigma, (hi - mu) / sigma)
            }
            MarginalSpec::Uniform { lo, hi } => (hi - lo) * (hi - lo) / 12.0,
        }
    }

    /// Inverse-CDF map from `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match self.spec {
            MarginalSpec::TruncGauss { mu, sigma, lo, hi } => {
                let z = normal::truncated_quantile(u, (lo - mu) / sigma, (hi - mu) / sigma);
                (mu + sigma * z).clamp(lo, hi)
            }
            MarginalSpec::Uniform { lo, hi } => (lo + u * (hi - lo)).clamp(lo, hi),
        }
    }

    /// `E[f(X)]` under this marginal by adaptive quadrature.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F, tol: f64) -> Result<f64> {
        quadrature_1d(|x| self.density(x) * f(x), self.lo, self.hi, tol)
    }
}

/// `n` points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dims: usize,
    data: Vec<f64>,
}

impl PointSet {
    pub fn new(dims: usize, data: Vec<f64>) -> Result<Self> {
        if dims == 0 || !data.len().is_multiple_of(dims) {
            return Err(Error::config(format!("{} values do not form rows of width {dims}", data.len())));
        }
        Ok(Self { dims, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dims = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dims) {
            return Err(Error::config("ragged point rows"));
        }
        Self::new(dims, rows.concat())
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dims)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// A separable integrand `Π_i f(i, x_i)` or `Σ_i f(i, x_i)`.
pub enum Separable<F> {
    Product(F),
    Sum(F),
}

/// Product of independent marginals; the support is the box they span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Marginal1D>", into = "Vec<Marginal1D>")]
pub struct ProductDistribution {
    marginals: Vec<Marginal1D>,
    support: BoxSupport,
}

impl TryFrom<Vec<Marginal1D>> for ProductDistribution {
    type Error = Error;

    fn try_from(marginals: Vec<Marginal1D>) -> Result<Self> {
        Self::new(marginals)
    }
}

impl From<ProductDistribution> for Vec<Marginal1D> {
    fn from(d: ProductDistribution) -> Self {
        d.marginals
    }
}

impl ProductDistribution {
    pub fn new(marginals: Vec<Marginal1D>) -> Result<Self> {
        let lo = marginals.iter().map(Marginal1D::lo).collect();
        let hi = marginals.iter().map(Marginal1D::hi).collect();
        let support = BoxSupport::new(lo, hi)?;
        Ok(Self { marginals, support })
    }

    /// Uniform distribution on `support`.
    pub fn uniform_on(support: &BoxSupport) -> Result<Self> {
        let marginals =
            support.lo().iter().zip(support.hi()).map(|(&a, &b)| Marginal1D::uniform(a, b)).collect::<Result<_>>()?;
        Self::new(marginals)
    }

    /// N(mu, sigma² I) truncated to `support`.
    pub fn isotropic_gauss_on(support: &BoxSupport, mu: f64, sigma: f64) -> Result<Self> {
        let marginals = support
            .lo()
            .iter()
            .zip(support.hi())
            .map(|(&a, &b)| Marginal1D::trunc_gauss(mu, sigma, a, b))
            .collect::<Result<_>>()?;
        Self::new(marginals)
    }

    pub fn dims(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[Marginal1D] {
        &self.marginals
    }

    pub fn support(&self) -> &BoxSupport {
        &self.support
    }

    /// `n` i.i.d. points, coordinates drawn by inverse CDF in row-major order.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> PointSet {
        let d = self.dims();
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            for m in &self.marginals {
                let u: f64 = rng.random();
                data.push(m.quantile(u));
            }
        }
        PointSet { dims: d, data }
    }

    /// `Σ_i log p_i(x_i)`, or −∞ outside the support.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dims());
        self.marginals.iter().zip(x).map(|(m, &v)| m.log_density(v)).sum()
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }

    /// Expectation of a separable integrand; each coordinate integral is
    /// computed to `tol`.
    pub fn expect_product<F>(&self, integrand: Separable<F>, tol: f64) -> Result<f64>
    where
        F: Fn(usize, f64) -> f64,
    {
        match integrand {
            Separable::Product(f) => {
                let mut acc = 1.0;
                for (i, m) in self.marginals.iter().enumerate() {
                    acc *= m.expect(|x| f(i, x), tol)?;
                }
                Ok(acc)
            }
            Separable::Sum(f) => {
                let mut acc = 0.0;
                for (i, m) in self.marginals.iter().enumerate() {
                    acc += m.expect(|x| f(i, x), tol)?;
                }
                Ok(acc)
            }
        }
    }
}

/// The pair (P, Q); both live on the same box, so P ≪ Q.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionPair {
    p: ProductDistribution,
    q: ProductDistribution,
}

impl DistributionPair {
    pub fn new(p: ProductDistribution, q: ProductDistribution) -> Result<Self> {
        if p.support() != q.support() {
            return Err(Error::config("P and Q must share the same support box"));
        }
        Ok(Self { p, q })
    }

    pub fn p(&self) -> &ProductDistribution {
        &self.p
    }

    pub fn q(&self) -> &ProductDistribution {
        &self.q
    }

    pub fn support(&self) -> &BoxSupport {
        self.p.support()
    }

    pub fn dims(&self) -> usize {
        self.p.dims()
    }

    /// `log dP/dQ (x)`; −∞/NaN handling is left to callers that check the support.
    pub fn log_ratio(&self, x: &[f64]) -> f64 {
        self.p.log_density(x) - self.q.log_density(x)
    }

    /// Truncated N(0, I₂) on [0.1, 2] × [−1, 0] against the uniform law on the same box.
    pub fn gauss_vs_uniform_2d() -> Self {
        let support = BoxSupport::new(vec![0.1, -1.0], vec![2.0, 0.0]).expect("valid box");
        Self::gauss_vs_uniform(&support)
    }

    /// Truncated N(0, I_d) on `support` against the uniform law on it.
    pub fn gauss_vs_uniform(support: &BoxSupport) -> Self {
        let p = ProductDistribution::isotropic_gauss_on(support, 0.0, 1.0).expect("box has Gaussian mass");
        let q = ProductDistribution::uniform_on(support).expect("valid box");
        Self { p, q }
    }
}
