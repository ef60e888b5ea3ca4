use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::config::{ExperimentConfig, Sweep};
use super::output::AggregateRow;
use super::seeds::trial_seeds;
use crate::baselines::{run_scheme, upper_bound_prepared, BaselineKind};
use crate::channel::{sample_scenario, ChannelScenario, PreparedScenario};
use crate::error::{Error, Result};
use crate::orchestrator::{RunResult, SolverConfig};
use crate::units::dbm_to_watts;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialStatus {
    Ok,
    Failed,
}

/// Outcome of one scheme on one trial at one sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub scheme: BaselineKind,
    pub sweep_value: f64,
    pub trial: u64,
    pub scenario_seed: u64,
    /// Hash of the sampled scenario at the nominal geometry; equal across
    /// schemes and sweep points of a trial.
    pub scenario_hash: String,
    pub status: TrialStatus,
    pub sum_rate: f64,
    pub iterations: usize,
    pub seconds: f64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub aggregate: Vec<AggregateRow>,
    pub trials: Vec<TrialRow>,
    pub failed: usize,
}

struct PointRunner<'a> {
    config: &'a ExperimentConfig,
    scenario: PreparedScenario,
    solver: SolverConfig,
    ma: Option<Result<RunResult, String>>,
}

impl PointRunner<'_> {
    fn ma_sub(&mut self) -> Result<RunResult, String> {
        if self.ma.is_none() {
            let r = run_scheme(BaselineKind::MaSub, &self.scenario, &self.solver, &self.config.grid);
            self.ma = Some(r.map_err(|e| e.to_string()));
        }
        self.ma.clone().expect("just set")
    }

    fn run(&mut self, kind: BaselineKind) -> Result<RunResult, String> {
        match kind {
            BaselineKind::MaSub => self.ma_sub(),
            BaselineKind::UpperBound => {
                let ma = self.ma_sub()?;
                upper_bound_prepared(&self.scenario, &self.config.grid, &self.solver, Some(&ma))
                    .map(|u| u.result)
                    .map_err(|e| e.to_string())
            }
            _ => run_scheme(kind, &self.scenario, &self.solver, &self.config.grid)
                .map_err(|e| e.to_string()),
        }
    }
}

/// Every scheme at every sweep point for one trial. Never fails: errors are
/// recorded in the rows.
pub fn run_trial(config: &ExperimentConfig, trial: u64) -> Vec<TrialRow> {
    let seeds = trial_seeds(config.master_seed, trial);
    let schemes = config.scheme_list();
    let values = config.sweep_values();
    let row = |scheme, sweep_value, hash: &str, res: Result<RunResult, String>| match res {
        Ok(r) => TrialRow {
            scheme,
            sweep_value,
            trial,
            scenario_seed: seeds.scenario,
            scenario_hash: hash.to_string(),
            status: TrialStatus::Ok,
            sum_rate: r.final_sum_rate,
            iterations: r.iterations,
            seconds: if config.timing { r.seconds } else { 0.0 },
            error: String::new(),
        },
        Err(e) => TrialRow {
            scheme,
            sweep_value,
            trial,
            scenario_seed: seeds.scenario,
            scenario_hash: hash.to_string(),
            status: TrialStatus::Failed,
            sum_rate: 0.0,
            iterations: 0,
            seconds: 0.0,
            error: e,
        },
    };

    let base = match sample_scenario(&config.scenario, seeds.scenario) {
        Ok(s) => s,
        Err(e) => {
            let msg = e.to_string();
            return values
                .iter()
                .flat_map(|&v| schemes.iter().map(move |&s| (s, v)))
                .map(|(s, v)| row(s, v, "", Err(msg.clone())))
                .collect();
        }
    };
    let hash = base.content_hash();
    let solver_at = |dbm: f64| SolverConfig {
        max_power: dbm_to_watts(dbm),
        seed: seeds.solver,
        ..config.solver.clone()
    };
    let runner = |sc: &ChannelScenario, dbm: f64| -> Result<PointRunner<'_>, String> {
        Ok(PointRunner {
            config,
            scenario: sc.prepare().map_err(|e| e.to_string())?,
            solver: solver_at(dbm),
            ma: None,
        })
    };

    // Fixed arrays stay at the nominal frame size in a region sweep, so they
    // are solved once per trial.
    let mut fixed: BTreeMap<BaselineKind, Result<RunResult, String>> = BTreeMap::new();
    if matches!(config.sweep, Sweep::Region(_)) {
        let nominal = runner(&base, config.power_dbm);
        for &s in schemes.iter().filter(|s| s.is_fixed_array()) {
            let r = match &nominal {
                Ok(_) => runner(&base, config.power_dbm).and_then(|mut p| p.run(s)),
                Err(e) => Err(e.clone()),
            };
            fixed.insert(s, r);
        }
    }

    let mut rows = Vec::with_capacity(values.len() * schemes.len());
    for &v in &values {
        let (scenario, dbm) = match &config.sweep {
            Sweep::Region(_) => {
                let g = base.geometry.with_frame_size(v * base.geometry.wavelength);
                match g {
                    Ok(g) => (Ok(base.with_geometry(g)), config.power_dbm),
                    Err(e) => (Err(e.to_string()), config.power_dbm),
                }
            }
            Sweep::Power(_) => (Ok(base.clone()), v),
            Sweep::None => (Ok(base.clone()), config.power_dbm),
        };
        let mut point = scenario.and_then(|sc| runner(&sc, dbm));
        for &s in &schemes {
            let res = match (fixed.get(&s), &mut point) {
                (Some(r), _) => r.clone(),
                (None, Ok(p)) => p.run(s),
                (None, Err(e)) => Err(e.clone()),
            };
            rows.push(row(s, v, &hash, res));
        }
    }
    rows
}

/// Means and standard errors per (scheme, sweep value) over successful rows,
/// ordered by scheme then ascending sweep value.
pub fn aggregate(rows: &[TrialRow], config: &ExperimentConfig) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(BaselineKind, u64), Vec<&TrialRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.status == TrialStatus::Ok) {
        // Map to bits preserving numeric order for the finite values used here.
        let key = r.sweep_value.to_bits() ^ if r.sweep_value < 0.0 { u64::MAX } else { 1 << 63 };
        groups.entry((r.scheme, key)).or_default().push(r);
    }
    groups
        .into_values()
        .map(|mut g| {
            g.sort_by_key(|r| r.trial);
            let n = g.len() as f64;
            let mean = g.iter().map(|r| r.sum_rate).sum::<f64>() / n;
            let stderr = if g.len() > 1 {
                let var = g.iter().map(|r| (r.sum_rate - mean).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            } else {
                0.0
            };
            AggregateRow {
                scheme: g[0].scheme,
                sweep_value: g[0].sweep_value,
                mean_rate_bps_hz: mean,
                stderr,
                trials: g.len(),
                mean_iters: g.iter().map(|r| r.iterations as f64).sum::<f64>() / n,
                mean_seconds: g.iter().map(|r| r.seconds).sum::<f64>() / n,
                grid: (g[0].scheme == BaselineKind::UpperBound).then(|| config.grid.clone()),
            }
        })
        .collect()
}

/// More than 10% failed rows aborts the experiment.
fn check_failures(failed: usize, total: usize) -> Result<()> {
    if failed * 10 > total {
        return Err(Error::TrialFailures { failed, total });
    }
    Ok(())
}

/// Runs all trials on a pool of `config.workers` threads. Output does not
/// depend on the worker count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::config(format!("worker pool: {e}")))?;
    let mut trials: Vec<TrialRow> = pool.install(|| {
        (0..config.trials as u64)
            .into_par_iter()
            .flat_map_iter(|t| run_trial(config, t))
            .collect()
    });
    trials.sort_by(|a, b| {
        (a.scheme, a.trial)
            .cmp(&(b.scheme, b.trial))
            .then(a.sweep_value.total_cmp(&b.sweep_value))
    });
    let failed = trials.iter().filter(|r| r.status == TrialStatus::Failed).count();
    check_failures(failed, trials.len())?;
    Ok(ExperimentResult {
        aggregate: aggregate(&trials, config),
        trials,
        failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::GainVariance;

    fn small(trials: usize) -> ExperimentConfig {
        let mut c = ExperimentConfig {
            trials,
            schemes: vec![BaselineKind::FpaSub],
            workers: 1,
            ..Default::default()
        };
        c.scenario.gain_variance = GainVariance::PowerGain;
        c.solver.max_iterations = 20;
        c
    }

    #[test]
    fn single_trial_single_row() {
        let res = run_experiment(&small(1)).unwrap();
        assert_eq!(res.aggregate.len(), 1);
        assert_eq!(res.aggregate[0].stderr, 0.0);
        assert_eq!(res.aggregate[0].trials, 1);
        assert_eq!(res.aggregate[0].sweep_value, 10.0);
    }

    #[test]
    fn schemes_share_the_scenario() {
        let mut c = small(2);
        c.schemes = vec![BaselineKind::MaSub, BaselineKind::FpaSub, BaselineKind::FpaFull];
        c.sweep = Sweep::Power(vec![0.0, 10.0]);
        let rows = run_trial(&c, 1);
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|r| r.scenario_hash == rows[0].scenario_hash));
        assert!(rows.iter().all(|r| r.status == TrialStatus::Ok));
    }

    #[test]
    fn aggregate_matches_raw_rows() {
        let mut c = small(4);
        c.sweep = Sweep::Power(vec![5.0, -3.0]);
        let res = run_experiment(&c).unwrap();
        assert_eq!(res.aggregate.len(), 2);
        assert_eq!(res.aggregate[0].sweep_value, -3.0);
        for a in &res.aggregate {
            let xs: Vec<f64> = res
                .trials
                .iter()
                .filter(|r| r.sweep_value == a.sweep_value)
                .map(|r| r.sum_rate)
                .collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let sd = (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!((a.mean_rate_bps_hz - mean).abs() <= 1e-12);
            assert!((a.stderr - sd / n.sqrt()).abs() <= 1e-12);
        }
    }

    #[test]
    fn failure_threshold() {
        assert!(check_failures(0, 10).is_ok());
        assert!(check_failures(1, 10).is_ok());
        assert!(matches!(check_failures(2, 10), Err(Error::TrialFailures { failed: 2, total: 10 })));
    }

    #[test]
    fn failed_rows_are_excluded() {
        let c = small(1);
        let mut rows = run_trial(&c, 0);
        rows.extend(run_trial(&c, 1));
        rows[0].status = TrialStatus::Failed;
        let agg = aggregate(&rows, &c);
        assert_eq!(agg[0].trials, 1);
        assert_eq!(agg[0].mean_rate_bps_hz, rows[1].sum_rate);
    }
}
