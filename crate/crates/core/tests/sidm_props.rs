use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ecpp_core::{
    local_bfgs, random_initial_layout, random_partition, sidm_descent, sidm_descent_observed, total_energy,
    GroupSelection, Instance, Layout, SidmConfig,
};

proptest! {
    #[test]
    fn partitions_cover_every_index_once(n in 1usize..300, s_frac in 0.0..1.0f64, seed in any::<u64>()) {
        let s = 1 + ((n - 1) as f64 * s_frac) as usize;
        let p = random_partition(n, s, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(p.groups().len(), n / s);
        let mut seen = vec![0u8; n];
        for g in p.groups() {
            prop_assert!(g.len() >= s && g.len() < 2 * s);
            for &i in g.indices() {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }
}

#[test]
fn every_group_call_descends() {
    for seed in 0..4 {
        let inst = Instance::new(150, 12.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = random_initial_layout(&inst, &mut rng);
        let mut calls = 0;
        sidm_descent_observed(&start, &inst, &SidmConfig::default(), &mut rng, |call| {
            calls += 1;
            assert!(call.final_energy <= call.entry_energy);
            assert!(call.energy_trace.windows(2).all(|w| w[1] <= w[0]));
        })
        .unwrap();
        assert!(calls > 0);
    }
}

#[test]
fn identical_inputs_give_identical_layouts() {
    let inst = Instance::new(120, 11.0).unwrap();
    let start = random_initial_layout(&inst, &mut ChaCha8Rng::seed_from_u64(77));
    let run = || sidm_descent(&start, &inst, &SidmConfig::default(), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    assert_eq!(run().layout, run().layout);
}

#[test]
fn full_system_round_matches_repeated_whole_descent() {
    for seed in 0..3 {
        let inst = Instance::new(40, 6.5).unwrap();
        let start = random_initial_layout(&inst, &mut ChaCha8Rng::seed_from_u64(seed));
        let config = SidmConfig::default();
        let out = sidm_descent(&start, &inst, &config, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();

        let mut layout = start.clone();
        for _ in 0..config.k0 {
            let run = local_bfgs(&layout, &GroupSelection::full(40), &inst, &config.bfgs).unwrap();
            layout = run.layout;
            if total_energy(&layout, &inst).unwrap().total_energy <= config.bfgs.energy_threshold {
                break;
            }
        }
        assert_eq!(out.layout, layout, "seed {seed}");
    }
}

#[test]
fn small_instance_ends_at_a_stationary_or_feasible_layout() {
    let inst = Instance::new(7, 3.0).unwrap();
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = random_initial_layout(&inst, &mut rng);
        let mut last = None;
        let out = sidm_descent_observed(&start, &inst, &SidmConfig::default(), &mut rng, |call| {
            assert!(call.full_system);
            last = Some((call.final_energy, call.final_gradient_norm));
        })
        .unwrap();
        let (energy, gradient) = last.unwrap();
        assert!(energy <= 1e-20 || gradient <= 1e-10, "seed {seed}: {energy:e} {gradient:e}");
        assert!(out.report.total_energy <= 1e-20 || out.report.gradient_norm <= 1e-10);
    }
}

#[test]
fn ring_energy_drops_with_every_full_call() {
    let n = 12;
    let ring = 0.97 / (std::f64::consts::PI / n as f64).sin();
    let coords: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / n as f64;
            (ring * t.cos(), ring * t.sin())
        })
        .collect();
    let layout = Layout::from_coords(&coords).unwrap();
    let inst = Instance::new(n, 8.0).unwrap();
    let mut energies = vec![total_energy(&layout, &inst).unwrap().total_energy];
    assert!(energies[0] > 0.0);
    let out = sidm_descent_observed(&layout, &inst, &SidmConfig::default(), &mut ChaCha8Rng::seed_from_u64(1), |call| {
        assert!(call.full_system);
        assert_eq!(call.entry_energy, *energies.last().unwrap());
        energies.push(call.final_energy);
    })
    .unwrap();
    assert!(energies.len() >= 2);
    assert!(energies.windows(2).all(|w| w[1] < w[0]), "{energies:?}");
    assert!(out.report.total_energy <= 1e-20);
}
