//! JSON experiment configuration.

use serde::{Deserialize, Serialize};

use crate::bounds::{self, ScheduleMode};
use crate::distributions::{DistributionPair, Marginal1D, MarginalSpec, ProductDistribution};
use crate::divergences::DivergenceKind;
use crate::error::{Error, Result};
use crate::network::NetworkClassSpec;
use crate::training::{default_batch_size, TrainConfig};

/// P and Q as per-coordinate marginal lists on a shared box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub dims: usize,
    pub p: Vec<MarginalSpec>,
    pub q: Vec<MarginalSpec>,
}

impl PairSpec {
    pub fn build(&self) -> Result<DistributionPair> {
        if self.p.len() != self.dims || self.q.len() != self.dims {
            return Err(Error::config(format!(
                "pair declares dims = {} but lists {} marginals for p and {} for q",
                self.dims,
                self.p.len(),
                self.q.len()
            )));
        }
        let side = |specs: &[MarginalSpec]| -> Result<ProductDistribution> {
            let marginals = specs.iter().cloned().map(Marginal1D::try_from).collect::<Result<Vec<_>>>()?;
            ProductDistribution::new(marginals)
        };
        DistributionPair::new(side(&self.p)?, side(&self.q)?)
    }

    /// Truncated N(0, I_d) against uniform on the box `Π [lo_i, hi_i]`.
    pub fn gauss_vs_uniform(lo: &[f64], hi: &[f64]) -> Self {
        let p = lo.iter().zip(hi).map(|(&lo, &hi)| MarginalSpec::TruncGauss { mu: 0.0, sigma: 1.0, lo, hi }).collect();
        let q = lo.iter().zip(hi).map(|(&lo, &hi)| MarginalSpec::Uniform { lo, hi }).collect();
        Self { dims: lo.len(), p, q }
    }
}

/// What varies across sweep points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Sweep {
    /// Sample sizes; k follows the schedule.
    Ns(Vec<usize>),
    /// Network widths at a fixed sample size.
    Ks { n: usize, values: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleSpec {
    Theorem,
    OracleM,
    Experiment,
    /// One k per entry of an `ns` sweep.
    Explicit(Vec<usize>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(default)]
    pub batch_size: Option<usize>,
    /// Batch size as a fraction of n (rounded, at least 1).
    #[serde(default)]
    pub batch_fraction: Option<f64>,
    #[serde(default)]
    pub lr_initial: Option<f64>,
    #[serde(default)]
    pub lr_late: Option<f64>,
    #[serde(default)]
    pub lr_switch_epoch: Option<usize>,
    /// Replaces the default `0.5 ln k` class.
    #[serde(default)]
    pub class: Option<NetworkClassSpec>,
}

fn default_replicas() -> usize {
    10
}

fn default_schedule() -> ScheduleSpec {
    ScheduleSpec::Experiment
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub kind: DivergenceKind,
    pub pair: PairSpec,
    pub sweep: Sweep,
    #[serde(default = "default_schedule")]
    pub schedule_mode: ScheduleSpec,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub train: TrainOverrides,
    /// When false, `wall_time_s` is written as 0 so output files are
    /// byte-for-byte reproducible.
    #[serde(default = "yes")]
    pub record_timing: bool,
}

/// One (n, k, class) cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub n: usize,
    pub k: usize,
    pub class_spec: NetworkClassSpec,
}

/// Default class at width k: `Star(0.5 ln k)`, truncated at `1/ln k` for squared Hellinger.
pub fn default_class(kind: DivergenceKind, k: usize) -> Result<NetworkClassSpec> {
    match kind {
        DivergenceKind::SqHellinger if k < 3 => {
            Err(Error::config(format!("squared Hellinger needs k >= 3 so that t_k = 1/ln k < 1 (got {k})")))
        }
        DivergenceKind::SqHellinger => Ok(NetworkClassSpec::half_log_truncated_star(k)),
        _ if k < 2 => Err(Error::config(format!("the 0.5 ln k class needs k >= 2 (got {k})"))),
        _ => Ok(NetworkClassSpec::half_log_star(k)),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::config("replicas must be at least 1"));
        }
        let empty = match &self.sweep {
            Sweep::Ns(ns) => ns.is_empty(),
            Sweep::Ks { values, .. } => values.is_empty(),
        };
        if empty {
            return Err(Error::config("sweep must list at least one point"));
        }
        self.pair.build()?;
        for point in self.points()? {
            self.train_config(&point, 0)?.validate()?;
        }
        Ok(())
    }

    /// Resolves the sweep into concrete (n, k, class) points.
    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        let mut out = Vec::new();
        match &self.sweep {
            Sweep::Ns(ns) => {
                if let ScheduleSpec::Explicit(ks) = &self.schedule_mode {
                    if ks.len() != ns.len() {
                        return Err(Error::config(format!(
                            "explicit schedule lists {} widths for {} sample sizes",
                            ks.len(),
                            ns.len()
                        )));
                    }
                }
                for (index, &n) in ns.iter().enumerate() {
                    let (k, scheduled) = match &self.schedule_mode {
                        ScheduleSpec::Explicit(ks) => (ks[index], None),
                        ScheduleSpec::Theorem => self.scheduled(n, ScheduleMode::Theorem)?,
                        ScheduleSpec::OracleM => self.scheduled(n, ScheduleMode::OracleM)?,
                        ScheduleSpec::Experiment => self.scheduled(n, ScheduleMode::Experiment)?,
                    };
                    let class_spec = match (self.train.class, scheduled) {
                        (Some(c), _) => c,
                        (None, Some(c)) => c,
                        (None, None) => default_class(self.kind, k)?,
                    };
                    out.push(SweepPoint { index, n, k, class_spec });
                }
            }
            Sweep::Ks { n, values } => {
                for (index, &k) in values.iter().enumerate() {
                    let class_spec = match self.train.class {
                        Some(c) => c,
                        None => default_class(self.kind, k)?,
                    };
                    out.push(SweepPoint { index, n: *n, k, class_spec });
                }
            }
        }
        Ok(out)
    }

    fn scheduled(&self, n: usize, mode: ScheduleMode) -> Result<(usize, Option<NetworkClassSpec>)> {
        let s = bounds::schedule(self.kind, n, mode)?;
        let class = match s.t {
            Some(t) => NetworkClassSpec::TruncatedStar { m: s.m, t },
            None => NetworkClassSpec::Star { c: s.m },
        };
        Ok((s.k, Some(class)))
    }

    /// Training configuration for one sweep point and seed.
    pub fn train_config(&self, point: &SweepPoint, seed: u64) -> Result<TrainConfig> {
        let mut c = TrainConfig::new(self.kind, point.class_spec, point.k, point.n, seed);
        let t = &self.train;
        if let Some(e) = t.epochs {
            c.epochs = e;
        }
        match (t.batch_size, t.batch_fraction) {
            (Some(_), Some(_)) => return Err(Error::config("set at most one of batch_size and batch_fraction")),
            (Some(b), None) => c.batch_size = Some(b),
            (None, Some(f)) => {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(Error::config(format!("batch_fraction must lie in (0, 1], got {f}")));
                }
                c.batch_size = Some(((point.n as f64 * f).round() as usize).max(1));
            }
            (None, None) => c.batch_size = Some(default_batch_size(point.n)),
        }
        if let Some(lr) = t.lr_initial {
            c.lr_initial = lr;
        }
        if let Some(lr) = t.lr_late {
            c.lr_late = lr;
        }
        if let Some(e) = t.lr_switch_epoch {
            c.lr_switch_epoch = e;
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GAUSS_UNIFORM: &str = r#"{
        "name": "gauss-uniform",
        "kind": "kl",
        "pair": {
            "dims": 2,
            "p": [{"type": "trunc_gauss", "mu": 0, "sigma": 1, "lo": 0.1, "hi": 2},
                  {"type": "trunc_gauss", "mu": 0, "sigma": 1, "lo": -1, "hi": 0}],
            "q": [{"type": "uniform", "lo": 0.1, "hi": 2}, {"type": "uniform", "lo": -1, "hi": 0}]
        },
        "sweep": {"ns": [1000, 100000]},
        "replicas": 3,
        "master_seed": 42
    }"#;

    #[test]
    fn parses_sweep_config() {
        let c = ExperimentConfig::from_json(GAUSS_UNIFORM).unwrap();
        assert_eq!(c.schedule_mode, ScheduleSpec::Experiment);
        assert!(c.record_timing);
        let pts = c.points().unwrap();
        assert_eq!(pts.iter().map(|p| p.k).collect::<Vec<_>>(), vec![4, 10]);
        assert_eq!(pts[1].class_spec, NetworkClassSpec::Star { c: 0.5 * 10f64.ln() });
        let tc = c.train_config(&pts[1], 5).unwrap();
        assert_eq!(tc.batch_size(), 100);
        assert_eq!(tc.epochs, 200);
        assert_eq!(c.pair.build().unwrap(), DistributionPair::gauss_vs_uniform_2d());
    }

    #[test]
    fn rejects_unknown_fields_and_bad_values() {
        let extra = GAUSS_UNIFORM.replacen("\"replicas\": 3", "\"replicas\": 3, \"color\": 1", 1);
        assert!(ExperimentConfig::from_json(&extra).is_err());
        let zero = GAUSS_UNIFORM.replacen("\"replicas\": 3", "\"replicas\": 0", 1);
        assert!(matches!(ExperimentConfig::from_json(&zero), Err(Error::Config(_))));
        let dims = GAUSS_UNIFORM.replacen("\"dims\": 2", "\"dims\": 3", 1);
        assert!(ExperimentConfig::from_json(&dims).is_err());
        let empty = GAUSS_UNIFORM.replacen("[1000, 100000]", "[]", 1);
        assert!(ExperimentConfig::from_json(&empty).is_err());
    }

    #[test]
    fn explicit_and_k_sweeps() {
        let mut c = ExperimentConfig::from_json(GAUSS_UNIFORM).unwrap();
        c.schedule_mode = ScheduleSpec::Explicit(vec![3, 7]);
        assert_eq!(c.points().unwrap()[1].k, 7);
        c.schedule_mode = ScheduleSpec::Explicit(vec![3]);
        assert!(c.points().is_err());

        c.schedule_mode = ScheduleSpec::Experiment;
        c.sweep = Sweep::Ks { n: 10_000, values: vec![5, 10, 20] };
        let pts = c.points().unwrap();
        assert!(pts.iter().all(|p| p.n == 10_000));
        assert_eq!(pts.len(), 3);

        c.kind = DivergenceKind::SqHellinger;
        let pts = c.points().unwrap();
        assert!(pts.iter().all(|p| p.class_spec.is_truncated()));
        c.sweep = Sweep::Ks { n: 10_000, values: vec![2] };
        assert!(c.points().is_err());
    }

    #[test]
    fn train_overrides() {
        let mut c = ExperimentConfig::from_json(GAUSS_UNIFORM).unwrap();
        c.train.batch_fraction = Some(0.01);
        c.train.epochs = Some(3);
        c.train.class = Some(NetworkClassSpec::Ones);
        let p = &c.points().unwrap()[0];
        assert_eq!(p.class_spec, NetworkClassSpec::Ones);
        let tc = c.train_config(p, 0).unwrap();
        assert_eq!(tc.batch_size(), 10);
        assert_eq!(tc.epochs, 3);
        c.train.batch_size = Some(4);
        assert!(c.train_config(p, 0).is_err());
    }
}
