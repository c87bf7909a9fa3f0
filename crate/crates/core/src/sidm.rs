//! Stochastic item descent: the circles are shuffled into groups, each group
//! is descended with BFGS while the others stay put, and the group size
//! doubles from round to round until one group holds every circle.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::bfgs::{descend_group, scatter, LocalBfgsOptions, StopReason};
use crate::energy::{total_energy, EnergyReport, GroupEnergy};
use crate::error::{Error, Result};
use crate::instance::{GroupSelection, Instance, Layout};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Round {
    pub group_size: usize,
    pub repetitions: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundSchedule {
    rounds: Vec<Round>,
}

impl RoundSchedule {
    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    pub fn as_pairs(&self) -> Vec<(usize, usize)> {
        self.rounds.iter().map(|r| (r.group_size, r.repetitions)).collect()
    }
}

/// Group sizes start at `min(s0, n)` and double (capped at `n`) while the
/// repetition count halves (floored at 1). The schedule ends with the first
/// round that forms a single group.
pub fn make_schedule(n: usize, s0: usize, k0: usize) -> Result<RoundSchedule> {
    if n == 0 || s0 == 0 || k0 == 0 {
        return Err(Error::Domain(format!(
            "schedule needs n, s0, k0 >= 1 (got {n}, {s0}, {k0})"
        )));
    }
    let mut s = s0.min(n);
    let mut k = k0;
    let mut rounds = vec![Round {
        group_size: s,
        repetitions: k,
    }];
    while n / s > 1 {
        s = (2 * s).min(n);
        k = (k / 2).max(1);
        rounds.push(Round {
            group_size: s,
            repetitions: k,
        });
    }
    Ok(RoundSchedule { rounds })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    groups: Vec<GroupSelection>,
}

impl Partition {
    pub fn groups(&self) -> &[GroupSelection] {
        &self.groups
    }
}

/// Shuffles `0..n` and cuts it into `n / s` groups of `s`; the remainder
/// joins the last group.
pub fn random_partition<R: Rng + ?Sized>(n: usize, s: usize, rng: &mut R) -> Result<Partition> {
    if s == 0 || s > n {
        return Err(Error::Domain(format!("group size {s} outside 1..={n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let count = n / s;
    let groups = (0..count)
        .map(|g| {
            let end = if g + 1 == count { n } else { (g + 1) * s };
            GroupSelection::from_unsorted(order[g * s..end].to_vec(), n)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Partition { groups })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SidmConfig {
    pub s0: usize,
    pub k0: usize,
    pub bfgs: LocalBfgsOptions,
}

impl Default for SidmConfig {
    fn default() -> Self {
        SidmConfig {
            s0: 100,
            k0: 10,
            bfgs: LocalBfgsOptions::default(),
        }
    }
}

/// One local BFGS call made during a descent.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupCall {
    pub round: usize,
    pub repetition: usize,
    pub group_size: usize,
    pub full_system: bool,
    pub entry_energy: f64,
    pub final_energy: f64,
    pub final_gradient_norm: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
    /// Subset energy after each BFGS step, entry value first.
    pub energy_trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SidmOutcome {
    pub layout: Layout,
    pub report: EnergyReport,
    pub passes: usize,
    pub bfgs_calls: usize,
    pub perturbations: usize,
}

pub fn sidm_descent<R: Rng + ?Sized>(
    layout: &Layout,
    instance: &Instance,
    config: &SidmConfig,
    rng: &mut R,
) -> Result<SidmOutcome> {
    sidm_descent_observed(layout, instance, config, rng, |_| {})
}

/// [`sidm_descent`] reporting every group call to `observe`.
pub fn sidm_descent_observed<R: Rng + ?Sized>(
    layout: &Layout,
    instance: &Instance,
    config: &SidmConfig,
    rng: &mut R,
    mut observe: impl FnMut(&GroupCall),
) -> Result<SidmOutcome> {
    instance.check_layout(layout)?;
    let n = instance.n();
    let threshold = config.bfgs.energy_threshold;
    let schedule = make_schedule(n, config.s0, config.k0)?;
    let mut current = layout.clone();
    let (mut passes, mut bfgs_calls, mut perturbations) = (0, 0, 0);

    let done = |current: &Layout, passes, bfgs_calls, perturbations| -> Result<SidmOutcome> {
        Ok(SidmOutcome {
            report: total_energy(current, instance)?,
            layout: current.clone(),
            passes,
            bfgs_calls,
            perturbations,
        })
    };

    if full_energy(&current, instance) <= threshold {
        return done(&current, passes, bfgs_calls, perturbations);
    }
    let last = schedule.rounds().len() - 1;
    for (r, round) in schedule.rounds().iter().enumerate() {
        for rep in 0..round.repetitions {
            let partition = random_partition(n, round.group_size, rng)?;
            for group in partition.groups() {
                let run = descend_group(&current, group.indices(), instance.radius(), &config.bfgs)?;
                scatter(&mut current, group.indices(), &run.x);
                bfgs_calls += 1;
                perturbations += run.perturbations;
                observe(&GroupCall {
                    round: r,
                    repetition: rep,
                    group_size: group.len(),
                    full_system: r == last,
                    entry_energy: run.entry_energy,
                    final_energy: run.final_energy,
                    final_gradient_norm: run.final_gradient_norm,
                    iterations: run.iterations_used,
                    stop_reason: run.stop_reason,
                    energy_trace: run.energy_trace,
                });
            }
            passes += 1;
            if full_energy(&current, instance) <= threshold {
                return done(&current, passes, bfgs_calls, perturbations);
            }
        }
    }
    done(&current, passes, bfgs_calls, perturbations)
}

fn full_energy(layout: &Layout, instance: &Instance) -> f64 {
    let all: Vec<usize> = (0..instance.n()).collect();
    let mut eval = GroupEnergy::new(layout.centers(), &all, instance.radius());
    let x = eval.gather();
    eval.precise_energy(&x)
}
