//! Global search: descend a random layout, then repeatedly squeeze the best
//! layout into a smaller container, relax it back and keep improvements.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bfgs::{LineSearchSpec, LocalBfgsOptions, DEFAULT_MAX_ITER, ENERGY_THRESHOLD, GRADIENT_THRESHOLD};
use crate::error::{Error, Result};
use crate::instance::{Instance, Layout, Point};
use crate::sidm::{sidm_descent, SidmConfig};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchConfig {
    /// Initial shrinking scale of the container radius.
    pub alpha: f64,
    /// Growth of the shrinking scale per hop.
    pub beta: f64,
    /// Candidate layouts generated per hop.
    pub m: usize,
    pub s0: usize,
    pub k0: usize,
    pub seed: u64,
    pub time_limit: Duration,
    pub max_iter: usize,
    pub energy_threshold: f64,
    pub line_search: LineSearchSpec,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            alpha: 0.4,
            beta: 0.03,
            m: 10,
            s0: 100,
            k0: 10,
            seed: 0,
            time_limit: Duration::from_secs(900),
            max_iter: DEFAULT_MAX_ITER,
            energy_threshold: ENERGY_THRESHOLD,
            line_search: LineSearchSpec::default(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::Domain(format!("beta must be positive, got {}", self.beta)));
        }
        if self.m == 0 || self.s0 == 0 || self.k0 == 0 || self.max_iter == 0 {
            return Err(Error::Domain("m, s0, k0 and max_iter must be at least 1".into()));
        }
        let modulus = hop_modulus(self.alpha, self.beta);
        if modulus == 0 {
            return Err(Error::Domain(format!(
                "beta {} leaves no hop below a full-size container",
                self.beta
            )));
        }
        if self.alpha + self.beta * (modulus as f64 - 1.0) >= 1.0 {
            return Err(Error::Domain("shrink factor would reach 1".into()));
        }
        if !(self.energy_threshold >= 0.0) {
            return Err(Error::Domain("energy threshold must be non-negative".into()));
        }
        Ok(())
    }

    pub fn sidm(&self) -> SidmConfig {
        SidmConfig {
            s0: self.s0,
            k0: self.k0,
            bfgs: LocalBfgsOptions {
                max_iter: self.max_iter,
                energy_threshold: self.energy_threshold,
                gradient_threshold: GRADIENT_THRESHOLD,
                line_search: self.line_search,
            },
        }
    }
}

/// Number of distinct hop values: `floor((1 - alpha) / beta)`.
pub fn hop_modulus(alpha: f64, beta: f64) -> usize {
    // The epsilon absorbs quotients like 0.7 / 0.1 landing a hair under 7.
    ((1.0 - alpha) / beta + 1e-9).floor().max(0.0) as usize
}

/// Container scale for candidate `k` of hop `hops`.
pub fn shrink_factor(alpha: f64, beta: f64, hops: usize, m: usize, k: usize) -> Result<f64> {
    if m == 0 || k >= m {
        return Err(Error::Domain(format!("candidate index {k} outside 0..{m}")));
    }
    let modulus = hop_modulus(alpha, beta);
    if hops >= modulus {
        return Err(Error::Domain(format!("hop {hops} outside 0..{modulus}")));
    }
    let hops = hops as f64;
    Ok(alpha + beta * hops + ((1.0 - alpha - beta * hops) / m as f64) * k as f64)
}

/// Centers uniform over the disk of radius `R - 1`, so no circle starts
/// outside the container.
pub fn random_initial_layout<R: Rng + ?Sized>(instance: &Instance, rng: &mut R) -> Layout {
    let reach = (instance.radius() - 1.0).max(0.0);
    let centers = (0..instance.n())
        .map(|_| {
            let r = reach * rng.random::<f64>().sqrt();
            let theta = std::f64::consts::TAU * rng.random::<f64>();
            Point::new(r * theta.cos(), r * theta.sin())
        })
        .collect();
    Layout::new(centers).expect("sampled centers are finite")
}

#[derive(Clone, Debug, PartialEq)]
pub struct HopRecord {
    pub hop_value: usize,
    pub gammas: Vec<f64>,
    pub candidate_energies: Vec<f64>,
    pub best_energy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub layout: Layout,
    pub energy: f64,
    pub feasible: bool,
    pub hops_executed: usize,
    pub sidm_calls: usize,
    pub elapsed: Duration,
    pub history: Vec<HopRecord>,
}

pub fn global_search(instance: &Instance, config: &SearchConfig) -> Result<SearchOutcome> {
    config.validate()?;
    let start = Instant::now();
    let out_of_time = || start.elapsed() >= config.time_limit;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sidm = config.sidm();
    let modulus = hop_modulus(config.alpha, config.beta);

    let initial = random_initial_layout(instance, &mut rng);
    let first = sidm_descent(&initial, instance, &sidm, &mut rng)?;
    let mut sidm_calls = 1;
    let mut best = first.layout;
    let mut best_energy = first.report.total_energy;
    let mut hops = 0;
    let mut hops_executed = 0;
    let mut history = Vec::new();

    while best_energy > config.energy_threshold && !out_of_time() {
        hops_executed += 1;
        let mut record = HopRecord {
            hop_value: hops,
            gammas: Vec::with_capacity(config.m),
            candidate_energies: Vec::with_capacity(config.m),
            best_energy,
        };
        let mut leader: Option<(f64, Layout)> = None;
        for k in 0..config.m {
            if out_of_time() {
                break;
            }
            let gamma = shrink_factor(config.alpha, config.beta, hops, config.m, k)?;
            assert!(gamma > 0.0 && gamma < 1.0, "shrink factor {gamma} out of range");
            let squeezed = sidm_descent(&best, &instance.shrunk(gamma), &sidm, &mut rng)?;
            sidm_calls += 1;
            if out_of_time() {
                break;
            }
            let relaxed = sidm_descent(&squeezed.layout, instance, &sidm, &mut rng)?;
            sidm_calls += 1;
            let energy = relaxed.report.total_energy;
            record.gammas.push(gamma);
            record.candidate_energies.push(energy);
            if leader.as_ref().map_or(true, |(e, _)| energy < *e) {
                leader = Some((energy, relaxed.layout));
            }
        }
        if let Some((energy, layout)) = leader {
            if energy < best_energy {
                best_energy = energy;
                best = layout;
            }
        }
        record.best_energy = best_energy;
        history.push(record);
        hops = (hops + 1) % modulus;
    }

    Ok(SearchOutcome {
        feasible: best_energy <= config.energy_threshold,
        energy: best_energy,
        layout: best,
        hops_executed,
        sidm_calls,
        elapsed: start.elapsed(),
        history,
    })
}
