mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scenesmc::inference::{
    log_sum_exp, normalized_weights, run_smc, Cell, NoiseGrid, Schedule, ScheduleStage, SmcConfig, Span, Target,
};
use scenesmc::likelihood::Prefactor;
use scenesmc::scene::Axis;
use scenesmc::synth;

fn two_stage(n: [usize; 3]) -> Schedule {
    Schedule::new(vec![
        ScheduleStage { subdivisions: n, enumerate_discrete: true },
        ScheduleStage { subdivisions: n, enumerate_discrete: false },
    ])
    .unwrap()
}

fn blocks() -> Vec<Arc<scenesmc::ObjectModel<f64>>> {
    vec![
        Arc::new(synth::block(0, "cube", [4, 4, 4], 0.02).unwrap()),
        Arc::new(synth::block(1, "slab", [6, 3, 2], 0.02).unwrap()),
    ]
}

/// Leaf centers and the leaf measure of a regular `m`-way split per axis.
fn leaves(axes: &[Axis; 3], m: [usize; 3]) -> (Vec<[f64; 3]>, f64) {
    let coords = |a: usize| -> Vec<f64> {
        match axes[a] {
            Axis::Interval { lo, hi } => (0..m[a]).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / m[a] as f64).collect(),
            Axis::Lattice { count, .. } => (0..count).map(|i| axes[a].lattice_value(i)).collect(),
        }
    };
    let measure: f64 = (0..3)
        .map(|a| match axes[a] {
            Axis::Interval { lo, hi } => (hi - lo) / m[a] as f64,
            Axis::Lattice { .. } => 1.0,
        })
        .product();
    let (xs, ys, ts) = (coords(0), coords(1), coords(2));
    let mut out = Vec::new();
    for &x in &xs {
        for &y in &ys {
            for &t in &ts {
                out.push([x, y, t]);
            }
        }
    }
    (out, measure)
}

#[test]
fn proposal_integrates_to_branch_probabilities() {
    let problem = common::fixtures::continuous_problem(blocks());
    let grid = NoiseGrid::product(&[0.1], &[0.01, 0.02]);
    let target = Target::new(&problem, &grid).unwrap();
    let schedule = two_stage([2, 2, 2]);
    let discrete = target.discrete_probabilities(&[], &schedule).unwrap();
    let mut total = 0.0;
    for (b, branch) in target.branches().iter().enumerate() {
        let (pts, measure) = leaves(&branch.axes, [4, 4, 4]);
        for n in 0..grid.len() {
            let mass: f64 = pts
                .iter()
                .map(|&x| target.proposal_log_density(&[], &schedule, &target.child(b, x), n).unwrap().exp() * measure)
                .sum();
            assert!((mass - discrete[b][n]).abs() < 1e-6, "branch {b} noise {n}: {mass} vs {}", discrete[b][n]);
            total += mass;
        }
    }
    assert!((total - 1.0).abs() < 1e-6, "{total}");
}

#[test]
fn lattice_proposal_is_a_probability_mass_function() {
    let (problem, grid) = common::fixtures::spin_problem(4, 12);
    let target = Target::new(&problem, &grid).unwrap();
    let schedule = two_stage([1, 1, 6]);
    let axes = target.branches()[0].axes;
    let (pts, measure) = leaves(&axes, [1, 1, 1]);
    assert_eq!(pts.len(), 36);
    let total: f64 = (0..grid.len())
        .flat_map(|n| pts.iter().map(move |&x| (n, x)))
        .map(|(n, x)| target.proposal_log_density(&[], &schedule, &target.child(0, x), n).unwrap().exp() * measure)
        .sum();
    assert!((total - 1.0).abs() < 1e-9, "{total}");
}

#[test]
fn sampled_proposals_report_their_density_and_target() {
    let problem = common::fixtures::continuous_problem(blocks());
    let grid = NoiseGrid::product(&[0.1, 0.4], &[0.01]);
    let target = Target::new(&problem, &grid).unwrap();
    for schedule in [two_stage([3, 2, 4]), Schedule::new(vec![ScheduleStage { subdivisions: [2, 2, 2], enumerate_discrete: false }]).unwrap()] {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let p = target.propose(&[], &schedule, &mut rng).unwrap();
            let dens = target.proposal_log_density(&[], &schedule, &p.child, p.noise).unwrap();
            assert!((dens - p.log_q).abs() < 1e-9, "{dens} vs {}", p.log_q);
            let lt = target.log_target(std::slice::from_ref(&p.child), p.noise).unwrap();
            assert!((lt - p.log_target).abs() < 1e-9 * lt.abs().max(1.0));
            let all = target.log_targets(std::slice::from_ref(&p.child)).unwrap();
            assert_eq!(all[p.noise].to_bits(), lt.to_bits());
        }
    }
}

/// Posterior over (spin, noise) by enumeration.
fn exact_posterior(target: &Target<f64>) -> (Vec<f64>, f64) {
    let axes = target.branches()[0].axes;
    let Axis::Lattice { count, .. } = axes[2] else { panic!("spin lattice expected") };
    let mut logs = Vec::new();
    for n in 0..target.noise_grid().len() {
        for i in 0..count {
            let x = [axes[0].lattice_value(0), axes[1].lattice_value(0), axes[2].lattice_value(i)];
            logs.push(target.log_target(&[target.child(0, x)], n).unwrap());
        }
    }
    let z = log_sum_exp(logs.iter().copied());
    (logs.iter().map(|l| (l - z).exp()).collect(), z)
}

fn spin_histogram(res: &scenesmc::inference::SmcResult<f64>, count: usize, noises: usize) -> Vec<f64> {
    let w = normalized_weights(&res.particles).unwrap();
    let mut h = vec![0.0; count * noises];
    for (p, w) in res.particles.iter().zip(w) {
        let step = std::f64::consts::TAU / count as f64;
        let i = (p.children[0].contact.dtheta / step).round() as usize % count;
        h[p.noise_index * count + i] += w;
    }
    h
}

#[test]
fn smc_recovers_enumerated_posterior() {
    let (problem, grid) = common::fixtures::spin_problem(1, 12);
    let target = Target::new(&problem, &grid).unwrap();
    let (exact, log_z) = exact_posterior(&target);
    let cfg = SmcConfig { schedule: two_stage([1, 1, 6]), particles: 1000, resample_threshold: 0.5 };
    let mut tv_sum = 0.0;
    let mut estimates = Vec::new();
    for seed in 0..4 {
        let res = run_smc(&target, 1, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let h = spin_histogram(&res, 36, grid.len());
        tv_sum += 0.5 * h.iter().zip(&exact).map(|(a, b)| (a - b).abs()).sum::<f64>();
        estimates.push(res.log_evidence);
    }
    assert!(tv_sum / 4.0 < 0.05, "mean TV {}", tv_sum / 4.0);
    let mean = estimates.iter().sum::<f64>() / estimates.len() as f64;
    assert!((mean - log_z).abs() < 0.05, "{mean} vs {log_z}");
}

#[test]
fn constant_target_shift_leaves_weights_unchanged() {
    // With a single noise value the two prefactors differ by a constant.
    let (mut problem, _) = common::fixtures::spin_problem(2, 12);
    let grid = NoiseGrid::single(0.1, 0.01);
    let cfg = SmcConfig { schedule: two_stage([1, 1, 6]), particles: 64, resample_threshold: 0.5 };
    let a = run_smc(&Target::new(&problem, &grid).unwrap(), 1, &cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    problem.prefactor = Prefactor::UniformPrior;
    let b = run_smc(&Target::new(&problem, &grid).unwrap(), 1, &cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let (wa, wb) = (normalized_weights(&a.particles).unwrap(), normalized_weights(&b.particles).unwrap());
    for ((pa, pb), (x, y)) in a.particles.iter().zip(&b.particles).zip(wa.iter().zip(&wb)) {
        assert_eq!(pa.children[0].contact, pb.children[0].contact);
        assert!((x - y).abs() < 1e-9);
    }
    let shift = 0.01f64.ln();
    assert!((a.log_evidence - b.log_evidence - shift).abs() < 1e-6);
}

#[test]
fn runs_are_reproducible_across_thread_counts() {
    let problem = common::fixtures::continuous_problem(blocks());
    let grid = NoiseGrid::product(&[0.1, 0.4], &[0.01, 0.02]);
    let target = Target::new(&problem, &grid).unwrap();
    let cfg = SmcConfig { schedule: two_stage([3, 3, 4]), particles: 40, resample_threshold: 0.9 };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_smc(&target, 2, &cfg, &mut ChaCha8Rng::seed_from_u64(77)).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.log_evidence.to_bits(), b.log_evidence.to_bits());
    for (p, q) in a.particles.iter().zip(&b.particles) {
        assert_eq!(p.log_weight.to_bits(), q.log_weight.to_bits());
        for (c, d) in p.children.iter().zip(&q.children) {
            assert_eq!(c.contact, d.contact);
            assert_eq!(c.object.id, d.object.id);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn subdivision_tiles_the_parent(
        lo in -1.0f64..1.0,
        len in 0.01f64..3.0,
        count in 1usize..40,
        n in prop::array::uniform3(1usize..9),
    ) {
        let cell = Cell {
            branch: 0,
            noise: 0,
            spans: [Span::Interval { lo, hi: lo + len }, Span::Indices { start: 0, end: count }, Span::Interval { lo: 0.0, hi: 6.0 }],
        };
        let kids = cell.subdivide(n);
        let total: f64 = kids.iter().map(Cell::measure).sum();
        prop_assert!((total - cell.measure()).abs() < 1e-12 * cell.measure().max(1.0));
        for kid in &kids {
            let sum: f64 = kid.subdivide(n).iter().map(Cell::measure).sum();
            prop_assert!((sum - kid.measure()).abs() < 1e-12 * kid.measure().max(1.0));
        }
    }
}
