//! Multi-seed sweeps over sample size or network width, aggregation, rate
//! fits and CSV output.
//!
//! Every replica `r` trains with seed `replica_seed(master_seed, r)`, and all
//! randomness inside a run is derived from that seed, so results do not depend
//! on the number of worker threads or on scheduling order.

mod config;
mod output;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{default_class, ExperimentConfig, PairSpec, ScheduleSpec, Sweep, SweepPoint, TrainOverrides};
pub use output::{
    plot_script, read_records_csv, read_summaries_csv, write_records_csv, write_summaries_csv, write_summary_with_plot,
};

use crate::divergences::{ground_truth, DivergenceKind};
use crate::error::{Error, Result};
use crate::network::ParamBounds;
use crate::rng;
use crate::training::{train_observed, NoObserver, TrainConfig, TrainObserver};

/// Outcome of one training run. Failed runs keep their row with `estimate`
/// and `abs_error` empty and the error text in `error_msg`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub name: String,
    pub kind: DivergenceKind,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub estimate: Option<f64>,
    pub ground_truth: f64,
    pub abs_error: Option<f64>,
    pub wall_time_s: f64,
    pub error_msg: Option<String>,
}

impl RunRecord {
    pub fn is_ok(&self) -> bool {
        self.error_msg.is_none() && self.estimate.is_some()
    }
}

/// Per-(n, k) statistics over the successful replicas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub name: String,
    pub kind: DivergenceKind,
    pub n: usize,
    pub k: usize,
    pub replicas: usize,
    pub failed: usize,
    pub ground_truth: f64,
    pub mean_estimate: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for a single replica.
    pub std_estimate: f64,
    pub mean_abs_error: f64,
}

/// Least-squares fit of `ln(mean abs error)` against `ln n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
}

struct Job {
    point: SweepPoint,
    seed: u64,
}

fn jobs(config: &ExperimentConfig) -> Result<Vec<Job>> {
    let points = config.points()?;
    let mut out = Vec::with_capacity(points.len() * config.replicas);
    for point in points {
        for replica in 0..config.replicas {
            out.push(Job { point: point.clone(), seed: rng::replica_seed(config.master_seed, replica as u64) });
        }
    }
    Ok(out)
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::config("thread count must be at least 1"));
        }
        builder = builder.num_threads(t);
    }
    builder.build().map_err(|e| Error::config(format!("cannot start thread pool: {e}")))
}

/// Runs every (sweep point, replica) pair. Records come back ordered by sweep
/// point, then replica.
pub fn run_experiment(config: &ExperimentConfig, threads: Option<usize>) -> Result<Vec<RunRecord>> {
    let out = run_experiment_observed(config, threads, &[], |_, _| NoObserver)?;
    Ok(out.into_iter().map(|(r, _)| r).collect())
}

/// Like [`run_experiment`], but reuses successful rows of `previous` that
/// match a job's (n, k, seed); everything else, including failed rows, is
/// run again.
pub fn resume_experiment(
    config: &ExperimentConfig,
    threads: Option<usize>,
    previous: &[RunRecord],
) -> Result<Vec<RunRecord>> {
    let out = run_experiment_observed(config, threads, previous, |_, _| NoObserver)?;
    Ok(out.into_iter().map(|(r, _)| r).collect())
}

/// General form: `make_observer` builds one observer per executed run, and the
/// observer is returned with its record (`None` for reused rows).
pub fn run_experiment_observed<O, F>(
    config: &ExperimentConfig,
    threads: Option<usize>,
    previous: &[RunRecord],
    make_observer: F,
) -> Result<Vec<(RunRecord, Option<O>)>>
where
    O: TrainObserver + Send,
    F: Fn(&TrainConfig, &ParamBounds) -> O + Sync,
{
    config.validate()?;
    let pair = config.pair.build()?;
    let truth = ground_truth(config.kind, &pair)?.value;
    let jobs = jobs(config)?;
    let done: HashMap<(usize, usize, u64), &RunRecord> = previous
        .iter()
        .filter(|r| r.is_ok() && r.name == config.name && r.kind == config.kind)
        .map(|r| ((r.n, r.k, r.seed), r))
        .collect();

    let run = |job: &Job| -> (RunRecord, Option<O>) {
        if let Some(r) = done.get(&(job.point.n, job.point.k, job.seed)) {
            return ((*r).clone(), None);
        }
        let mut record = RunRecord {
            name: config.name.clone(),
            kind: config.kind,
            n: job.point.n,
            k: job.point.k,
            seed: job.seed,
            estimate: None,
            ground_truth: truth,
            abs_error: None,
            wall_time_s: 0.0,
            error_msg: None,
        };
        let prepared =
            config.train_config(&job.point, job.seed).and_then(|tc| tc.class_spec.expand(tc.k).map(|b| (tc, b)));
        let (tc, bounds) = match prepared {
            Ok(v) => v,
            Err(e) => {
                record.error_msg = Some(e.to_string());
                return (record, None);
            }
        };
        let mut observer = make_observer(&tc, &bounds);
        match train_observed(&tc, &pair, &mut observer) {
            Ok(result) => {
                record.estimate = Some(result.estimate);
                record.abs_error = Some((result.estimate - truth).abs());
                if config.record_timing {
                    record.wall_time_s = result.wall_time_s;
                }
            }
            Err(e) => record.error_msg = Some(e.to_string()),
        }
        (record, Some(observer))
    };

    let pool = pool(threads)?;
    Ok(pool.install(|| jobs.par_iter().map(run).collect()))
}

/// Groups records by (n, k) in order of first appearance.
pub fn aggregate(records: &[RunRecord]) -> Vec<SweepSummary> {
    let mut order: Vec<(usize, usize)> = Vec::new();
    let mut groups: HashMap<(usize, usize), Vec<&RunRecord>> = HashMap::new();
    for r in records {
        let key = (r.n, r.k);
        groups
            .entry(key)
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let group = &groups[&key];
            let ok: Vec<&RunRecord> = group.iter().copied().filter(|r| r.is_ok()).collect();
            let est: Vec<f64> = ok.iter().filter_map(|r| r.estimate).collect();
            let err: Vec<f64> = ok.iter().filter_map(|r| r.abs_error).collect();
            let first = group[0];
            SweepSummary {
                name: first.name.clone(),
                kind: first.kind,
                n: key.0,
                k: key.1,
                replicas: ok.len(),
                failed: group.len() - ok.len(),
                ground_truth: first.ground_truth,
                mean_estimate: mean(&est),
                std_estimate: sample_std(&est),
                mean_abs_error: mean(&err),
            }
        })
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => f64::NAN,
        1 => 0.0,
        len => {
            let m = mean(xs);
            (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (len - 1) as f64).sqrt()
        }
    }
}

/// Fits `ln(mean_abs_error) = slope · ln n + intercept` over the summaries.
pub fn fit_rate(summaries: &[SweepSummary]) -> Result<RateFit> {
    let points: Vec<(f64, f64)> = summaries.iter().map(|s| (s.n as f64, s.mean_abs_error)).collect();
    fit_log_log(&points)
}

/// Least squares on `(ln x, ln y)`. Needs at least two distinct x and every y > 0.
pub fn fit_log_log(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 2 {
        return Err(Error::DegenerateFit(format!("need at least 2 points, got {}", points.len())));
    }
    if let Some(&(x, y)) = points.iter().find(|&&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::DegenerateFit(format!("cannot take logs of point ({x}, {y})")));
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (mean(&lx), mean(&ly));
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all points share the same n".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - (slope * x + intercept)).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) };
    Ok(RateFit { slope, intercept, r_squared, points_used: points.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkClassSpec;
    use crate::training::ConstraintAudit;

    fn record(n: usize, seed: u64, est: Option<f64>) -> RunRecord {
        RunRecord {
            name: "t".into(),
            kind: DivergenceKind::Kl,
            n,
            k: 3,
            seed,
            estimate: est,
            ground_truth: 1.0,
            abs_error: est.map(|e| (e - 1.0).abs()),
            wall_time_s: 0.0,
            error_msg: if est.is_none() { Some("boom".into()) } else { None },
        }
    }

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            name: "small".into(),
            kind: DivergenceKind::Kl,
            pair: PairSpec::gauss_vs_uniform(&[0.0], &[1.0]),
            sweep: Sweep::Ns(vec![64, 128]),
            schedule_mode: ScheduleSpec::Explicit(vec![3, 3]),
            replicas: 3,
            master_seed: 7,
            train: TrainOverrides { epochs: Some(3), ..Default::default() },
            record_timing: false,
        }
    }

    #[test]
    fn aggregate_statistics() {
        let recs =
            vec![record(10, 1, Some(1.5)), record(10, 2, Some(0.5)), record(10, 3, None), record(20, 1, Some(1.1))];
        let s = aggregate(&recs);
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].n, s[0].replicas, s[0].failed), (10, 2, 1));
        assert!((s[0].mean_estimate - 1.0).abs() < 1e-15);
        assert!((s[0].std_estimate - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((s[0].mean_abs_error - 0.5).abs() < 1e-15);
        assert_eq!(s[1].std_estimate, 0.0);
    }

    #[test]
    fn exact_power_law_fit() {
        let pts: Vec<(f64, f64)> = [1e2f64, 1e3, 1e4, 1e5].iter().map(|&n| (n, 3.0 * n.powf(-0.5))).collect();
        let fit = fit_log_log(&pts).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_fits() {
        assert!(matches!(fit_log_log(&[(10.0, 1.0)]), Err(Error::DegenerateFit(_))));
        assert!(matches!(fit_log_log(&[(10.0, 1.0), (20.0, 0.0)]), Err(Error::DegenerateFit(_))));
        assert!(matches!(fit_log_log(&[(10.0, 1.0), (10.0, 2.0)]), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn runs_are_ordered_and_seeded() {
        let cfg = small_config();
        let recs = run_experiment(&cfg, Some(2)).unwrap();
        assert_eq!(recs.len(), 6);
        assert_eq!(recs.iter().map(|r| r.n).collect::<Vec<_>>(), vec![64, 64, 64, 128, 128, 128]);
        for (i, r) in recs.iter().enumerate() {
            assert!(r.is_ok(), "{r:?}");
            assert_eq!(r.seed, rng::replica_seed(7, (i % 3) as u64));
            assert_eq!(r.wall_time_s, 0.0);
        }
        assert_eq!(recs, run_experiment(&cfg, Some(1)).unwrap());
    }

    #[test]
    fn resume_reuses_successful_rows_only() {
        let cfg = small_config();
        let full = run_experiment(&cfg, Some(1)).unwrap();
        let mut partial = full[..4].to_vec();
        partial[1].estimate = Some(123.0);
        partial[2].error_msg = Some("interrupted".into());
        partial[2].estimate = None;
        let resumed = resume_experiment(&cfg, Some(1), &partial).unwrap();
        assert_eq!(resumed[1].estimate, Some(123.0));
        assert_eq!(resumed[2], full[2]);
        assert_eq!(resumed[5], full[5]);
    }

    #[test]
    fn observers_see_every_run() {
        let mut cfg = small_config();
        cfg.kind = DivergenceKind::SqHellinger;
        cfg.train.class = Some(NetworkClassSpec::half_log_truncated_star(3));
        let out = run_experiment_observed(&cfg, Some(1), &[], |_, b| ConstraintAudit::new(b)).unwrap();
        for (rec, audit) in &out {
            assert!(rec.is_ok());
            let audit = audit.as_ref().unwrap();
            assert!(audit.steps > 0 && audit.cap.is_some());
            assert_eq!(audit.violations(), 0);
        }
    }
}
