//! Asynchronous successive halving for hyperparameter search.
//!
//! Trials are trained to geometrically growing budgets (rungs). Whenever a
//! worker is free, the scheduler first promotes the best completed trial of
//! the highest rung that has capacity (top `1/reduction` of its finishers,
//! asynchronous rule), otherwise it starts a fresh configuration. Training is
//! deterministic per (configuration, budget, trial seed) and reruns from
//! scratch for each rung, so a trial is never trained beyond the budget of
//! its highest reached rung.

use std::collections::HashSet;
use std::sync::Mutex;

use rand::rngs::StdRng;
use rand::SeedableRng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct AshaConfig {
    pub trials: usize,
    /// Budget of the first rung (epochs).
    pub grace: usize,
    /// Successive-halving reduction factor.
    pub reduction: usize,
    /// Budget cap; rungs are `grace · reduction^k ≤ max_budget`.
    pub max_budget: usize,
    pub workers: usize,
    pub seed: u64,
}

impl AshaConfig {
    /// Desk-scale default: 12 trials, grace 30, reduction 2.
    pub fn desk_default(max_budget: usize) -> Self {
        Self {
            trials: 12,
            grace: 30,
            reduction: 2,
            max_budget,
            workers: 4,
            seed: 0,
        }
    }

    pub fn rung_budgets(&self) -> Vec<usize> {
        let mut budgets = Vec::new();
        let mut b = self.grace;
        while b <= self.max_budget {
            budgets.push(b);
            match b.checked_mul(self.reduction) {
                Some(next) => b = next,
                None => break,
            }
        }
        if budgets.is_empty() {
            budgets.push(self.max_budget);
        }
        budgets
    }
}

#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub id: usize,
    pub config: Vec<f64>,
    /// (budget, validation loss) per completed rung, in rung order.
    pub rungs: Vec<(usize, f64)>,
    pub failed: bool,
}

struct Scheduler {
    budgets: Vec<usize>,
    reduction: usize,
    /// (loss, trial) completions per rung.
    completed: Vec<Vec<(f64, usize)>>,
    /// Trials whose job at a given rung has been handed out.
    dispatched: Vec<HashSet<usize>>,
    next_trial: usize,
    trials: usize,
    active: usize,
}

impl Scheduler {
    fn get_job(&mut self) -> Option<(usize, usize)> {
        // promotions first, highest rung first; the cumulative quota keeps
        // each rung's population at most 1/reduction of the one below it
        for r in (0..self.budgets.len().saturating_sub(1)).rev() {
            let done = &self.completed[r];
            let quota = done.len() / self.reduction;
            if self.dispatched[r + 1].len() >= quota {
                continue;
            }
            let mut ranked: Vec<(f64, usize)> = done.clone();
            ranked.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for &(_, trial) in &ranked {
                if self.dispatched[r + 1].insert(trial) {
                    return Some((trial, r + 1));
                }
            }
        }
        if self.next_trial < self.trials {
            let trial = self.next_trial;
            self.next_trial += 1;
            self.dispatched[0].insert(trial);
            return Some((trial, 0));
        }
        None
    }
}

/// Run the search. `sample` draws one configuration vector; `evaluate`
/// trains it to the given epoch budget with the given seed and returns the
/// validation loss. Failed evaluations mark the trial failed without
/// aborting the search.
pub fn asha_optimize<S, E>(
    sample: S,
    evaluate: E,
    config: &AshaConfig,
) -> Result<(Vec<f64>, Vec<TrialRecord>)>
where
    S: Fn(&mut StdRng) -> Vec<f64>,
    E: Fn(&[f64], usize, u64) -> Result<f64> + Sync,
{
    if config.trials == 0 {
        return Err(Error::Config("search needs at least one trial".into()));
    }
    if config.reduction < 2 {
        return Err(Error::Config("reduction factor must be at least 2".into()));
    }
    let budgets = config.rung_budgets();
    let mut rng = StdRng::seed_from_u64(config.seed);
    let configs: Vec<Vec<f64>> = (0..config.trials).map(|_| sample(&mut rng)).collect();

    let records: Vec<Mutex<TrialRecord>> = configs
        .iter()
        .enumerate()
        .map(|(id, c)| {
            Mutex::new(TrialRecord {
                id,
                config: c.clone(),
                rungs: Vec::new(),
                failed: false,
            })
        })
        .collect();
    let scheduler = Mutex::new(Scheduler {
        budgets: budgets.clone(),
        reduction: config.reduction,
        completed: vec![Vec::new(); budgets.len()],
        dispatched: vec![HashSet::new(); budgets.len()],
        next_trial: 0,
        trials: config.trials,
        active: 0,
    });

    std::thread::scope(|scope| {
        for _ in 0..config.workers.max(1) {
            scope.spawn(|| loop {
                let job = {
                    let mut sched = scheduler.lock().unwrap();
                    match sched.get_job() {
                        Some(j) => {
                            sched.active += 1;
                            Some(j)
                        }
                        None if sched.active > 0 => None,
                        None => break,
                    }
                };
                match job {
                    Some((trial, rung)) => {
                        let budget = budgets[rung];
                        let seed = config.seed.wrapping_add(1 + trial as u64);
                        let outcome = evaluate(&configs[trial], budget, seed);
                        let mut sched = scheduler.lock().unwrap();
                        sched.active -= 1;
                        match outcome {
                            Ok(loss) if loss.is_finite() => {
                                sched.completed[rung].push((loss, trial));
                                records[trial].lock().unwrap().rungs.push((budget, loss));
                            }
                            _ => {
                                records[trial].lock().unwrap().failed = true;
                            }
                        }
                    }
                    None => std::thread::sleep(std::time::Duration::from_micros(200)),
                }
            });
        }
    });

    let table: Vec<TrialRecord> = records
        .into_iter()
        .map(|m| m.into_inner().unwrap())
        .collect();
    let mut best: Option<(f64, usize)> = None;
    for rec in &table {
        for &(_, loss) in &rec.rungs {
            if best.map_or(true, |(b, _)| loss < b) {
                best = Some((loss, rec.id));
            }
        }
    }
    let (_, best_id) = best.ok_or_else(|| Error::Config("every trial failed".into()))?;
    Ok((configs[best_id].clone(), table))
}

/// Post-hoc invariants of a finished run, used by tests and the acceptance
/// suite: rung budgets geometric, per-trial budgets strictly increasing, and
/// rung populations shrinking by at least the reduction factor.
pub fn check_rung_invariants(table: &[TrialRecord], config: &AshaConfig) -> Result<()> {
    let budgets = config.rung_budgets();
    let mut counts = vec![0usize; budgets.len()];
    for rec in table {
        let mut last = 0;
        for &(budget, _) in &rec.rungs {
            let rung = budgets
                .iter()
                .position(|&b| b == budget)
                .ok_or_else(|| Error::Config(format!("off-schedule budget {budget}")))?;
            if budget <= last {
                return Err(Error::Config(format!(
                    "trial {} budgets not increasing",
                    rec.id
                )));
            }
            last = budget;
            counts[rung] += 1;
        }
    }
    for r in 0..counts.len().saturating_sub(1) {
        if counts[r + 1] > counts[r] / config.reduction {
            return Err(Error::Config(format!(
                "rung {} holds {} trials, at most {} allowed",
                r + 1,
                counts[r + 1],
                counts[r] / config.reduction
            )));
        }
    }
    Ok(())
}
