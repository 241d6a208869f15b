mod common;

use smd_core::constrained::{solve_constrained, ConstrainedSolveOptions};
use smd_core::experiment::median;
use smd_core::game::{solve_game, GameInstance, GameSolveOptions, GameXEstimator, GameYEstimator};
use smd_core::mdp::{evaluate_policy, optimal_oracle, GeneratorParams, InstanceKind, MdpInstance};
use smd_core::mdp_smd::{solve_mdp, MdpMode, MdpSolveOptions};
use smd_core::numeric::SimplexDomain;
use smd_core::saddle::{run_smd, schedule_for, Averaging, BoundedEstimator, CheckpointPlan, Estimators, SmdOptions};
use smd_core::sampling::SamplerKind;

fn small_mixing(seed: u64) -> MdpInstance {
    let params = GeneratorParams {
        states: 3,
        actions: 2,
        alpha: 0.5,
        ..Default::default()
    };
    common::instance(InstanceKind::RandomMixing, &params, seed)
}

#[test]
fn matching_pennies_converges() {
    let g = common::pennies();
    let (mut finals, mut quarters) = (Vec::new(), Vec::new());
    for seed in 0..30 {
        let mut opts = GameSolveOptions::new(0.1, seed);
        opts.checkpoints = CheckpointPlan::Geometric(3);
        let sol = solve_game(&g, &opts).unwrap();
        let cps = &sol.report.checkpoints;
        assert_eq!(cps.len(), 3);
        quarters.push(cps[0].gap);
        finals.push(sol.report.gap);
        assert_eq!(cps[2].gap, sol.report.gap);
    }
    let m = median(&finals).unwrap();
    assert!(m <= 0.1, "median gap {m}");
    assert!(m <= median(&quarters).unwrap());
}

#[test]
fn zero_game_gap_is_zero() {
    let m = smd_core::Matrix::from_rows(&[vec![0.0]]).unwrap();
    let g = GameInstance::new(m, vec![0.0].into(), vec![0.0].into(), 1.0).unwrap();
    for cap in [1, 10, 1000] {
        let mut opts = GameSolveOptions::new(0.2, 1);
        opts.iteration_cap = Some(cap);
        assert_eq!(solve_game(&g, &opts).unwrap().report.gap, 0.0);
    }
}

// Σ⟨η g_t, x_t − u⟩ <= ½‖x_1 − u‖² + ½ Σ‖η g_t‖² on the box and
// Σ⟨η g_t, y_t − u⟩ <= KL(u‖y_1) + Σ η² ‖g_t‖²_{y_t} on the simplex
#[test]
fn regret_surrogates_hold_on_recorded_runs() {
    let mut rng = common::rng(31);
    let (m, n, radius) = (5, 3, 1.0);
    let mat = common::random_matrix(m, n, &mut rng);
    let g = GameInstance::new(
        mat,
        common::random_box(n, 0.5, &mut rng).into(),
        common::random_box(m, 0.5, &mut rng).into(),
        radius,
    )
    .unwrap();
    let (xe, ye) = (
        GameXEstimator::new(&g, false).unwrap(),
        GameYEstimator::new(&g).unwrap(),
    );
    let sched = schedule_for(0.2, n, radius, m, xe.bounds().v, ye.bounds().v)
        .unwrap()
        .with_iterations(10_000);
    let opts = SmdOptions {
        record_trace: true,
        ..Default::default()
    };
    let est = Estimators {
        x: &xe,
        s: None,
        y: &ye,
    };
    let run = run_smd(g.problem(), &est, &sched, 5, &opts, &mut |_| None).unwrap();
    assert_eq!(run.trace.len(), 10_000);

    let simplex = SimplexDomain::new(m);
    for step in &run.trace {
        assert!(step.x.iter().all(|v| v.abs() <= radius));
        assert!(simplex.contains(step.y.as_slice()));
    }

    let mut comparators_x = vec![run.last_x.to_vec(), run.averages.x.to_vec()];
    comparators_x.extend(common::box_vertices(n, radius));
    for u in &comparators_x {
        let (mut lhs, mut sq) = (0.0, 0.0);
        for step in &run.trace {
            let gd = step.gx.to_dense(n);
            for j in 0..n {
                let eg = sched.eta_x * gd[j];
                lhs += eg * (step.x[j] - u[j]);
                sq += eg * eg;
            }
        }
        let start: f64 = u.iter().map(|v| v * v).sum();
        assert!(
            lhs <= 0.5 * start + 0.5 * sq + 1e-9,
            "box regret {lhs} vs {}",
            0.5 * start + 0.5 * sq
        );
    }

    let mut comparators_y = vec![
        run.last_y.to_vec(),
        run.averages.y.to_vec(),
        common::random_simplex(m, &mut rng),
    ];
    for i in 0..m {
        let mut e = vec![0.0; m];
        e[i] = 1.0;
        comparators_y.push(e);
    }
    for u in &comparators_y {
        let (mut lhs, mut local) = (0.0, 0.0);
        for step in &run.trace {
            let gd = step.gy.to_dense(m);
            for i in 0..m {
                let eg = sched.eta_y * gd[i];
                lhs += eg * (step.y[i] - u[i]);
                local += step.y[i] * eg * eg;
            }
        }
        let kl: f64 = u.iter().filter(|v| **v > 0.0).map(|v| v * (v * m as f64).ln()).sum();
        assert!(lhs <= kl + local + 1e-9, "simplex regret {lhs} vs {}", kl + local);
    }
}

#[test]
fn lazy_and_dense_averages_agree() {
    let g = common::pennies();
    let mut a = GameSolveOptions::new(0.1, 9);
    let mut b = a.clone();
    a.smd.averaging = Averaging::Lazy;
    b.smd.averaging = Averaging::Dense;
    let (ra, rb) = (solve_game(&g, &a).unwrap().run, solve_game(&g, &b).unwrap().run);
    assert!(ra.averages.x.dist_inf(rb.averages.x.as_slice()) <= 1e-9);
    assert!(ra.averages.y.dist_inf(rb.averages.y.as_slice()) <= 1e-9);

    let mdp = small_mixing(4).with_mixing_time(1);
    let mut a = MdpSolveOptions::new(MdpMode::Mixing, 0.3, 2);
    a.iteration_cap = Some(300_000);
    let mut b = a.clone();
    b.smd.averaging = Averaging::Dense;
    let (ra, rb) = (solve_mdp(&mdp, &a).unwrap().run, solve_mdp(&mdp, &b).unwrap().run);
    assert!(ra.averages.x.dist_inf(rb.averages.x.as_slice()) <= 1e-9);
    assert!(ra.averages.y.dist_inf(rb.averages.y.as_slice()) <= 1e-9);
}

#[test]
fn samplers_share_a_distribution() {
    let w = [0.5, 2.0, 0.0, 1.25, 3.0, 0.01, 1.0];
    for (name, p) in common::sampler_p_values(&w, 1_000_000, 3) {
        assert!(p > 0.001, "{name}: p = {p}");
    }
}

#[test]
fn sumtree_and_linear_scan_runs_match() {
    let mdp = small_mixing(5).with_mixing_time(1);
    let mut a = MdpSolveOptions::new(MdpMode::Mixing, 0.3, 8);
    a.iteration_cap = Some(50_000);
    let mut b = a.clone();
    b.smd.sampler = SamplerKind::LinearScan;
    let (ra, rb) = (solve_mdp(&mdp, &a).unwrap(), solve_mdp(&mdp, &b).unwrap());
    // both walk the same cumulative order, so identical uniforms give identical draws
    // unless a boundary lands within rounding of a partial sum
    assert!(ra.run.averages.y.dist_inf(rb.run.averages.y.as_slice()) <= 1e-6);
}

#[test]
fn seeded_reports_are_byte_identical() {
    let mdp = small_mixing(6).with_mixing_time(1);
    let mut opts = MdpSolveOptions::new(MdpMode::Mixing, 0.3, 12);
    opts.iteration_cap = Some(100_000);
    opts.checkpoints = CheckpointPlan::Geometric(4);
    let a = solve_mdp(&mdp, &opts)
        .unwrap()
        .report
        .without_timing()
        .to_json()
        .unwrap();
    let b = solve_mdp(&mdp, &opts)
        .unwrap()
        .report
        .without_timing()
        .to_json()
        .unwrap();
    assert_eq!(a, b);
    opts.seed = 13;
    let c = solve_mdp(&mdp, &opts)
        .unwrap()
        .report
        .without_timing()
        .to_json()
        .unwrap();
    assert_ne!(a, c);

    let params = GeneratorParams {
        states: 3,
        actions: 2,
        constraints: 2,
        ..Default::default()
    };
    let cmdp = common::instance(InstanceKind::Constrained, &params, 3);
    let mut copts = ConstrainedSolveOptions::new(0.3, 4);
    copts.iteration_cap = Some(50_000);
    let a = solve_constrained(&cmdp, &copts)
        .unwrap()
        .report
        .without_timing()
        .to_json()
        .unwrap();
    let b = solve_constrained(&cmdp, &copts)
        .unwrap()
        .report
        .without_timing()
        .to_json()
        .unwrap();
    assert_eq!(a, b);
}

#[test]
fn checkpoints_do_not_perturb_the_run() {
    let mdp = small_mixing(7).with_mixing_time(1);
    let mut opts = MdpSolveOptions::new(MdpMode::Mixing, 0.3, 3);
    opts.iteration_cap = Some(40_000);
    let plain = solve_mdp(&mdp, &opts).unwrap();
    opts.checkpoints = CheckpointPlan::Every(5_000);
    let tracked = solve_mdp(&mdp, &opts).unwrap();
    assert_eq!(plain.run.averages.y, tracked.run.averages.y);
    assert_eq!(tracked.report.checkpoints.len(), 8);
    assert_eq!(tracked.report.samples, 2 * tracked.report.iterations);
}

// μ^εᵀ[(Î − P)v* − r] + v̄* <= gap at the averaged pair
#[test]
fn gap_mixing_surrogate() {
    for seed in 0..5 {
        let mdp = small_mixing(10 + seed);
        let opt = optimal_oracle(&mdp).unwrap();
        let mut opts = MdpSolveOptions::new(MdpMode::Mixing, 0.3, seed);
        opts.iteration_cap = Some(200_000);
        let sol = solve_mdp(&mdp, &opts).unwrap();
        let mu = &sol.run.averages.y;
        let mut lhs = opt.v_bar;
        for k in 0..mdp.num_pairs() {
            let pv: f64 = mdp
                .transition_row(k)
                .iter()
                .zip(opt.values.iter())
                .map(|(p, v)| p * v)
                .sum();
            lhs += mu[k] * (opt.values[mdp.state_of(k)] - pv - mdp.rewards()[k]);
        }
        assert!(lhs <= sol.report.gap + 1e-9, "{lhs} > {}", sol.report.gap);
        // and the rounded policy's loss is within three gaps
        let loss = opt.v_bar - evaluate_policy(&mdp, &sol.policy).unwrap().v_bar;
        assert!(loss <= 3.0 * sol.report.gap + 1e-9);
    }
}

#[test]
fn single_policy_discounted_is_exact() {
    let mdp = MdpInstance::new(vec![1, 1], vec![vec![0.2, 0.8], vec![0.6, 0.4]], vec![1.0, 0.0])
        .unwrap()
        .with_discount(0.8, Some(vec![0.5, 0.5]))
        .unwrap();
    let mut opts = MdpSolveOptions::new(MdpMode::Discounted, 0.3, 1);
    opts.iteration_cap = Some(1000);
    let sol = solve_mdp(&mdp, &opts).unwrap();
    assert_eq!(sol.report.subopt, Some(0.0));
    assert_eq!(sol.report.samples, 2000);
}
