//! Seeded batch runs of the global search with hit-count aggregation.

use std::fmt;
use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Duration;

use crate::check::check_layout;
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::search::{global_search, SearchConfig};

/// Geometric tolerance used to certify claimed successes.
pub const CERTIFY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchCell {
    pub n: usize,
    pub radius: f64,
    pub s0: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchPlan {
    pub cells: Vec<BenchCell>,
    pub seeds: Vec<u64>,
    pub time_limit: Duration,
    pub jobs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRecord {
    pub n: usize,
    pub radius: f64,
    pub s0: usize,
    pub seed: u64,
    pub feasible: bool,
    /// The independent checker agrees with the feasibility claim.
    pub certified: bool,
    pub energy: f64,
    pub seconds: f64,
    pub sidm_calls: usize,
    pub hops: usize,
    pub failure: Option<String>,
}

impl BenchRecord {
    pub fn is_hit(&self) -> bool {
        self.feasible && self.certified && self.failure.is_none()
    }

    /// `n R seed feasible energy seconds`, tab separated.
    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{:e}\t{:.3}",
            self.n,
            self.radius,
            self.seed,
            u8::from(self.feasible),
            self.energy,
            self.seconds
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchSummary {
    pub n: usize,
    pub radius: f64,
    pub s0: usize,
    pub runs: usize,
    pub hits: usize,
    /// Mean wall time of the hits.
    pub mean_seconds: Option<f64>,
    pub failures: usize,
    /// Feasibility claims the checker rejected.
    pub uncertified: usize,
}

impl fmt::Display for BenchSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "# summary\tn={}\tR={}\ts0={}\thits={}/{}\tmean_seconds=",
            self.n, self.radius, self.s0, self.hits, self.runs
        )?;
        match self.mean_seconds {
            Some(t) => write!(f, "{t:.3}")?,
            None => write!(f, "-")?,
        }
        if self.failures > 0 || self.uncertified > 0 {
            write!(f, "\tfailures={}\tuncertified={}", self.failures, self.uncertified)?;
        }
        Ok(())
    }
}

/// Parses `a:b:step` into `a, a + step, ...` up to and including `b`.
pub fn parse_sweep(spec: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Domain(format!("group-size sweep {spec:?} is not a:b:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<usize> = parts
        .iter()
        .map(|p| p.trim().parse::<usize>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (from, to, step) = (nums[0], nums[1], nums[2]);
    if from == 0 || step == 0 || to < from {
        return Err(bad());
    }
    Ok((from..=to).step_by(step).collect())
}

fn run_one(cell: BenchCell, seed: u64, base: &SearchConfig, time_limit: Duration) -> BenchRecord {
    let mut record = BenchRecord {
        n: cell.n,
        radius: cell.radius,
        s0: cell.s0,
        seed,
        feasible: false,
        certified: false,
        energy: f64::NAN,
        seconds: 0.0,
        sidm_calls: 0,
        hops: 0,
        failure: None,
    };
    let config = SearchConfig {
        seed,
        s0: cell.s0,
        time_limit,
        ..*base
    };
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| {
        let instance = Instance::new(cell.n, cell.radius)?;
        global_search(&instance, &config)
    }));
    match outcome {
        Ok(Ok(out)) => {
            let certificate = check_layout(&out.layout, cell.radius);
            record.feasible = out.feasible;
            record.certified = certificate.passes(CERTIFY_TOLERANCE) == out.feasible;
            record.energy = out.energy;
            record.seconds = out.elapsed.as_secs_f64();
            record.sidm_calls = out.sidm_calls;
            record.hops = out.hops_executed;
        }
        Ok(Err(e)) => record.failure = Some(e.to_string()),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            record.failure = Some(msg);
        }
    }
    record
}

/// Runs every (cell, seed) combination, at most `plan.jobs` at a time, and
/// hands each record to `sink` as it completes. Returns one summary per cell.
pub fn run_bench(plan: &BenchPlan, base: &SearchConfig, mut sink: impl FnMut(&BenchRecord)) -> Vec<BenchSummary> {
    let tasks: Vec<(usize, u64)> = (0..plan.cells.len())
        .flat_map(|c| plan.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let mut records: Vec<Vec<BenchRecord>> = vec![Vec::new(); plan.cells.len()];
    let workers = plan.jobs.clamp(1, tasks.len().max(1));
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, BenchRecord)>();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, tasks) = (&next, &tasks);
            scope.spawn(move || loop {
                let t = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(cell, seed)) = tasks.get(t) else { break };
                let record = run_one(plan.cells[cell], seed, base, plan.time_limit);
                if tx.send((cell, record)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (cell, record) in rx {
            sink(&record);
            records[cell].push(record);
        }
    });

    plan.cells
        .iter()
        .zip(records)
        .map(|(cell, recs)| {
            let hits: Vec<&BenchRecord> = recs.iter().filter(|r| r.is_hit()).collect();
            BenchSummary {
                n: cell.n,
                radius: cell.radius,
                s0: cell.s0,
                runs: recs.len(),
                hits: hits.len(),
                mean_seconds: (!hits.is_empty())
                    .then(|| hits.iter().map(|r| r.seconds).sum::<f64>() / hits.len() as f64),
                failures: recs.iter().filter(|r| r.failure.is_some()).count(),
                uncertified: recs.iter().filter(|r| r.failure.is_none() && !r.certified).count(),
            }
        })
        .collect()
}
