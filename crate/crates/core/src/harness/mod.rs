//! Experiment driver behind the `rionc` binary: configuration, seeded runs,
//! N-sweeps and plot data.
//!
//! Random streams for a run with seed `s`: the optimizer uses stream 0, the
//! initial point stream 1, the gradient-bound warm-up stream 2 and the
//! Lipschitz warm-up stream 3. Every mode of a config starts from the same
//! `x0` and sees the same optimizer stream.

pub mod config;
pub mod plot;
pub mod record;

use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::ZoConfig;
use crate::geometry::{AnyManifold, Manifold, Point};
use crate::metrics::rate_slope;
use crate::optimizer::{
    estimate_grad_bound, estimate_lipschitz, plan_schedule, reduced_delta, run, GradientSource, RunOptions, RunResult,
    Schedule, TransportMode,
};
use crate::oracles::SparsePca;
use crate::rng::CounterRng;

pub use config::{parse_config, parse_config_str, Budget, GradBound, GradSourceSpec, MatrixSource, RunConfig};
pub use plot::cmd_plotdata;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "RIONC_THREADS";

pub const STREAM_X0: u64 = 1;
pub const STREAM_WARMUP: u64 = 2;
pub const STREAM_LIPSCHITZ: u64 = 3;

/// A pool sized by `RIONC_THREADS` when set, otherwise by rayon's default.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Error::Resource(e.to_string()))
}

/// Everything needed to execute a configured run for one seed.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: RunConfig,
    pub seed: u64,
    pub manifold: AnyManifold,
    pub problem: SparsePca,
    pub x0: Point,
    pub source: GradientSource,
    pub schedule: Schedule,
}

impl Experiment {
    /// Builds the problem, draws `x0`, resolves `G` and the schedule. `rounds`
    /// overrides the configured budget `N` (sweeps).
    pub fn prepare(config: &RunConfig, seed: u64, rounds: Option<usize>) -> Result<Self> {
        let manifold = AnyManifold::from_descriptor(config.manifold)?;
        let (n, _) = config.manifold.shape();
        let mu = config.problem.mu;
        let problem = match &config.problem.source {
            MatrixSource::File(path) => SparsePca::from_file(path, mu)?,
            MatrixSource::Generated { spectrum, seed } => SparsePca::generate(n, spectrum, *seed, mu)?,
        };
        if problem.dim() != n {
            return Err(Error::config(format!(
                "covariance is {0}x{0} but the manifold has n = {n}",
                problem.dim()
            )));
        }
        let x0 = manifold.random_point(&mut CounterRng::with_stream(seed, STREAM_X0));
        let alg = &config.algorithm;
        let source = match alg.source {
            GradSourceSpec::FirstOrder => GradientSource::FirstOrder,
            GradSourceSpec::ZerothOrder { delta } => GradientSource::ZerothOrder(ZoConfig::new(delta, config.manifold)?),
        };
        let grad_bound = match alg.grad_bound {
            GradBound::Fixed(g) => g,
            GradBound::Warmup => estimate_grad_bound(
                &problem,
                &manifold,
                &x0,
                &source,
                alg.warmup_draws,
                &mut CounterRng::with_stream(seed, STREAM_WARMUP),
            )?,
        };
        let schedule = match alg.budget {
            Budget::Rounds { rounds: n_cfg, delta } => {
                let mut delta = delta;
                if let Some(eps) = alg.target_epsilon {
                    let l = match alg.lipschitz {
                        Some(l) => l,
                        None => estimate_lipschitz(
                            &problem,
                            alg.warmup_draws,
                            &mut CounterRng::with_stream(seed, STREAM_LIPSCHITZ),
                        )
                        .ok_or_else(|| Error::config("target_epsilon needs `lipschitz`"))?,
                    };
                    delta = reduced_delta(delta, eps, l, alg.curvature_bound);
                }
                plan_schedule(rounds.unwrap_or(n_cfg), delta, grad_bound)?
            }
            Budget::Explicit {
                epochs,
                iterations,
                clip_radius,
                step_size,
            } => {
                if rounds.is_some() {
                    return Err(Error::config("a budget override needs a `rounds`/`delta` schedule"));
                }
                Schedule::explicit(epochs, iterations, clip_radius, step_size, grad_bound)?
            }
        };
        Ok(Experiment {
            config: config.clone(),
            seed,
            manifold,
            problem,
            x0,
            source,
            schedule,
        })
    }

    pub fn options(&self, mode: TransportMode) -> RunOptions {
        RunOptions {
            mode,
            source: self.source,
            schedule: self.schedule,
            trace: self.config.trace_policy,
        }
    }

    pub fn run(&self, mode: TransportMode) -> Result<RunResult> {
        run(
            &self.problem,
            &self.manifold,
            self.x0.clone(),
            &self.options(mode),
            &mut CounterRng::new(self.seed),
        )
    }

    /// File stem for outputs of `mode`: `<label>.<mode>[.zo].seed<seed>`.
    pub fn stem(&self, mode: TransportMode) -> String {
        let zo = if matches!(self.source, GradientSource::ZerothOrder(_)) { ".zo" } else { "" };
        format!("{}.{}{zo}.seed{}", self.config.label, mode.label(), self.seed)
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub mode: TransportMode,
    pub csv: PathBuf,
    pub meta: PathBuf,
    pub trace: Option<PathBuf>,
    pub result: RunResult,
}

/// Runs every configured mode (in parallel) and writes
/// `<stem>.csv`, `<stem>.meta.json` and, for full traces, `<stem>.trace.csv`
/// into the output directory.
pub fn cmd_run(config: &RunConfig, seed: Option<u64>) -> Result<Vec<RunOutput>> {
    let exp = Experiment::prepare(config, seed.unwrap_or(config.seed), None)?;
    let results: Vec<Result<RunResult>> = config.algorithm.modes.par_iter().map(|&m| exp.run(m)).collect();
    let mut outputs = Vec::with_capacity(results.len());
    for (&mode, result) in config.algorithm.modes.iter().zip(results) {
        let result = result?;
        let stem = exp.stem(mode);
        let dir = &config.output_dir;
        let csv = dir.join(format!("{stem}.csv"));
        record::write_atomic(&csv, record::run_csv(&result, config.record_wallclock).as_bytes())?;
        let meta = dir.join(format!("{stem}.meta.json"));
        let m = record::RunMeta {
            config_hash: config.hash.clone(),
            label: config.label.clone(),
            seed: exp.seed,
            mode: mode.label().to_string(),
            grad_source: exp.source.label().to_string(),
            manifold: config.manifold,
            schedule: result.schedule,
            stats: result.stats,
            w_out_epoch: result.w_out_epoch,
            w_out: result.w_out.coords().iter().copied().collect(),
        };
        let json = serde_json::to_string_pretty(&m).map_err(|e| Error::Numerical(e.to_string()))?;
        record::write_atomic(&meta, json.as_bytes())?;
        let trace = match &result.trace {
            Some(tr) => {
                let p = dir.join(format!("{stem}.trace.csv"));
                record::write_atomic(&p, record::trace_text(tr).as_bytes())?;
                Some(p)
            }
            None => None,
        };
        outputs.push(RunOutput {
            mode,
            csv,
            meta,
            trace,
            result,
        });
    }
    Ok(outputs)
}

/// Mean of the last `ceil(K/4)` finite proxies.
pub fn final_quartile_mean(proxies: &[f64]) -> f64 {
    let finite: Vec<f64> = proxies.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return f64::NAN;
    }
    let q = finite.len().div_ceil(4);
    finite[finite.len() - q..].iter().sum::<f64>() / q as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub mode: TransportMode,
    pub rounds: usize,
    pub seed: u64,
    pub final_quartile_proxy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub mode: TransportMode,
    /// `(N, mean over seeds)`.
    pub points: Vec<(usize, f64)>,
    pub slope: f64,
}

/// Evaluates `per_run(mode, N, seed) -> per-epoch proxies` for every
/// combination (in parallel), then fits the log-log slope of the seed means
/// against `N` per mode.
pub fn sweep_with<F>(
    modes: &[TransportMode],
    rounds: &[usize],
    seeds: &[u64],
    per_run: F,
) -> Result<(Vec<SweepRow>, Vec<SweepSummary>)>
where
    F: Fn(TransportMode, usize, u64) -> Result<Vec<f64>> + Sync,
{
    let mut sorted = rounds.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() < 3 {
        return Err(Error::config(format!("a sweep needs at least 3 distinct N values, got {}", sorted.len())));
    }
    if seeds.is_empty() {
        return Err(Error::config("a sweep needs at least one seed"));
    }
    let jobs: Vec<(TransportMode, usize, u64)> = modes
        .iter()
        .flat_map(|&m| rounds.iter().flat_map(move |&n| seeds.iter().map(move |&s| (m, n, s))))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(mode, n, seed)| {
            Ok(SweepRow {
                mode,
                rounds: n,
                seed,
                final_quartile_proxy: final_quartile_mean(&per_run(mode, n, seed)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut summaries = Vec::new();
    for &mode in modes {
        let points: Vec<(usize, f64)> = rounds
            .iter()
            .map(|&n| {
                let vals: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.mode == mode && r.rounds == n)
                    .map(|r| r.final_quartile_proxy)
                    .collect();
                (n, vals.iter().sum::<f64>() / vals.len() as f64)
            })
            .collect();
        let pts: Vec<(f64, f64)> = points.iter().map(|&(n, v)| (n as f64, v)).collect();
        summaries.push(SweepSummary {
            mode,
            slope: rate_slope(&pts)?,
            points,
        });
    }
    Ok((rows, summaries))
}

#[derive(Debug)]
pub struct SweepOutput {
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub rows: Vec<SweepRow>,
    pub summaries: Vec<SweepSummary>,
}

/// Sweeps the budget `N` over `rounds` with seeds `seed, seed+1, ...`; writes
/// `<label>.sweep.csv` (one row per run) and `<label>.sweep.json` (means and
/// slope per mode).
pub fn cmd_sweep(config: &RunConfig, rounds: &[usize], seeds: usize) -> Result<SweepOutput> {
    if !matches!(config.algorithm.budget, Budget::Rounds { .. }) {
        return Err(Error::config("sweep needs a `rounds`/`delta` schedule"));
    }
    let seed_list: Vec<u64> = (0..seeds as u64).map(|i| config.seed + i).collect();
    let (rows, summaries) = sweep_with(&config.algorithm.modes, rounds, &seed_list, |mode, n, seed| {
        let exp = Experiment::prepare(config, seed, Some(n))?;
        Ok(exp.run(mode)?.proxies())
    })?;
    let mut csv_text = String::from("mode,rounds,seed,final_quartile_proxy\n");
    for r in &rows {
        csv_text.push_str(&format!(
            "{},{},{},{}\n",
            r.mode.label(),
            r.rounds,
            r.seed,
            record::format_float(r.final_quartile_proxy)
        ));
    }
    let csv = config.output_dir.join(format!("{}.sweep.csv", config.label));
    record::write_atomic(&csv, csv_text.as_bytes())?;
    let summary = config.output_dir.join(format!("{}.sweep.json", config.label));
    let json = serde_json::to_string_pretty(&summaries).map_err(|e| Error::Numerical(e.to_string()))?;
    record::write_atomic(&summary, json.as_bytes())?;
    Ok(SweepOutput {
        csv,
        summary,
        rows,
        summaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartile_mean() {
        assert_eq!(final_quartile_mean(&[4.0, 3.0, 2.0, 1.0]), 1.0);
        assert_eq!(final_quartile_mean(&[9.0, 9.0, 9.0, 9.0, 2.0, 4.0]), 3.0);
        assert_eq!(final_quartile_mean(&[f64::NAN, 5.0]), 5.0);
        assert!(final_quartile_mean(&[]).is_nan());
    }

    #[test]
    fn sweep_of_flat_proxies_has_zero_slope() {
        let (rows, s) = sweep_with(&[TransportMode::Projection], &[1000, 10_000, 100_000], &[0, 1, 2], |_, _, _| {
            Ok(vec![0.5; 12])
        })
        .unwrap();
        assert_eq!(rows.len(), 9);
        assert!(s[0].slope.abs() < 1e-12);
    }

    #[test]
    fn sweep_needs_three_budgets() {
        let err = sweep_with(&[TransportMode::Projection], &[1000], &[0], |_, _, _| Ok(vec![1.0])).unwrap_err();
        assert!(err.to_string().contains("3 distinct"));
        assert!(sweep_with(&[TransportMode::Projection], &[1000, 1000, 1000], &[0], |_, _, _| Ok(vec![1.0])).is_err());
    }
}
