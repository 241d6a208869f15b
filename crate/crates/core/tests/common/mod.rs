#![allow(dead_code)]

use smd_core::mdp::{generate_instance, GeneratorParams, InstanceKind, MdpInstance};
use smd_core::sampling::{RngState, Stream};
use smd_core::Matrix;

pub fn rng(seed: u64) -> RngState {
    RngState::for_role(seed, Stream::Test)
}

pub fn random_box(n: usize, radius: f64, rng: &mut RngState) -> Vec<f64> {
    (0..n).map(|_| (2.0 * rng.uniform() - 1.0) * radius).collect()
}

/// Dirichlet(1) point, bounded away from the boundary so sampling never sees a zero weight.
pub fn random_simplex(n: usize, rng: &mut RngState) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.uniform()).ln() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

pub fn random_capped(k: usize, cap: f64, rng: &mut RngState) -> Vec<f64> {
    let p = random_simplex(k, rng);
    let mass = cap * rng.uniform();
    p.into_iter().map(|v| v * mass).collect()
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut RngState) -> Matrix {
    let data = (0..rows * cols).map(|_| 2.0 * rng.uniform() - 1.0).collect();
    Matrix::new(rows, cols, data).unwrap()
}

pub fn instance(kind: InstanceKind, params: &GeneratorParams, seed: u64) -> MdpInstance {
    let mut rng = RngState::for_role(seed, Stream::Generator);
    generate_instance(kind, params, &mut rng).unwrap()
}

/// Every vertex of `[-r, r]^n`.
pub fn box_vertices(n: usize, r: f64) -> Vec<Vec<f64>> {
    (0..1usize << n)
        .map(|mask| (0..n).map(|j| if mask >> j & 1 == 1 { r } else { -r }).collect())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn matvec(m: &Matrix, x: &[f64]) -> Vec<f64> {
    (0..m.rows()).map(|i| dot(m.row(i), x)).collect()
}

/// `yᵀMx + bᵀx − cᵀy`, written out without the library.
pub fn bilinear(m: &Matrix, b: &[f64], c: &[f64], x: &[f64], y: &[f64]) -> f64 {
    dot(y, &matvec(m, x)) + dot(b, x) - dot(c, y)
}

/// Gap by enumerating the simplex vertices `e_i` and the box vertices.
pub fn brute_bilinear_gap(m: &Matrix, b: &[f64], c: &[f64], r: f64, x: &[f64], y: &[f64]) -> f64 {
    let best_dual = (0..m.rows())
        .map(|i| {
            let mut e = vec![0.0; m.rows()];
            e[i] = 1.0;
            bilinear(m, b, c, x, &e)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let best_primal = box_vertices(m.cols(), r)
        .iter()
        .map(|v| bilinear(m, b, c, v, y))
        .fold(f64::INFINITY, f64::min);
    best_dual - best_primal
}

/// `μᵀ[(Î − P)v + Ds] − 1ᵀs` from the instance tables.
pub fn constrained_objective(mdp: &MdpInstance, v: &[f64], s: &[f64], mu: &[f64]) -> f64 {
    let d = mdp.costs().unwrap();
    let mut total = -s.iter().sum::<f64>();
    for (k, w) in mu.iter().enumerate() {
        let flow = v[mdp.state_of(k)] - dot(mdp.transition_row(k), v);
        total += w * (flow + dot(d.row(k), s));
    }
    total
}

/// Gap over the simplex vertices, the box vertices and the capped-orthant vertices `{0, cap e_k}`.
pub fn brute_constrained_gap(mdp: &MdpInstance, r: f64, cap: f64, v: &[f64], s: &[f64], mu: &[f64]) -> f64 {
    let pairs = mdp.num_pairs();
    let k = s.len();
    let best_dual = (0..pairs)
        .map(|p| {
            let mut e = vec![0.0; pairs];
            e[p] = 1.0;
            constrained_objective(mdp, v, s, &e)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let mut slack_vertices = vec![vec![0.0; k]];
    for j in 0..k {
        let mut e = vec![0.0; k];
        e[j] = cap;
        slack_vertices.push(e);
    }
    let mut best_primal = f64::INFINITY;
    for bv in box_vertices(mdp.num_states(), r) {
        for sv in &slack_vertices {
            best_primal = best_primal.min(constrained_objective(mdp, &bv, sv, mu));
        }
    }
    best_dual - best_primal
}

/// Mixing or discounted MDP objective from the instance tables.
pub fn mdp_objective(mdp: &MdpInstance, gamma: Option<f64>, v: &[f64], mu: &[f64]) -> f64 {
    let g = gamma.unwrap_or(1.0);
    let mut total = match gamma {
        Some(g) => (1.0 - g) * dot(mdp.q().unwrap(), v),
        None => 0.0,
    };
    for (k, w) in mu.iter().enumerate() {
        let inner = g * dot(mdp.transition_row(k), v) - v[mdp.state_of(k)] + mdp.rewards()[k];
        total += w * inner;
    }
    total
}

pub fn brute_mdp_gap(mdp: &MdpInstance, gamma: Option<f64>, r: f64, v: &[f64], mu: &[f64]) -> f64 {
    let pairs = mdp.num_pairs();
    let best_dual = (0..pairs)
        .map(|p| {
            let mut e = vec![0.0; pairs];
            e[p] = 1.0;
            mdp_objective(mdp, gamma, v, &e)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let best_primal = box_vertices(mdp.num_states(), r)
        .iter()
        .map(|bv| mdp_objective(mdp, gamma, bv, mu))
        .fold(f64::INFINITY, f64::min);
    best_dual - best_primal
}

/// Largest discrepancy between each closed-form gap and its brute-force counterpart over
/// `count` random instances and points, as `(game, mdp, constrained)`.
pub fn gap_discrepancies(count: usize, seed: u64) -> (f64, f64, f64) {
    use smd_core::constrained::{exact_constrained_gap, ConstrainedConfig, SLACK_CAP};
    use smd_core::mdp_smd::{exact_mdp_gap, MdpMode, MdpSaddleConfig};
    use smd_core::saddle::{exact_gap, BilinearProblem, ScheduleConstants};

    let mut rng = rng(seed);
    let (mut game, mut mdp_worst, mut con) = (0.0f64, 0.0f64, 0.0f64);
    for idx in 0..count {
        let (m, n) = (2 + idx % 11, 1 + idx % 3);
        let mat = random_matrix(m, n, &mut rng);
        let b = random_box(n, 1.0, &mut rng);
        let c = random_box(m, 1.0, &mut rng);
        let r = 0.5 + 2.0 * rng.uniform();
        let p = BilinearProblem::new(mat.clone(), b.clone().into(), c.clone().into(), r).unwrap();
        let (x, y) = (random_box(n, r, &mut rng), random_simplex(m, &mut rng));
        let closed = exact_gap(&p, &x, &y).unwrap();
        game = game.max((closed - brute_bilinear_gap(&mat, &b, &c, r, &x, &y)).abs());

        let states = 2 + idx % 2;
        let params = GeneratorParams {
            states,
            actions: 2,
            ..Default::default()
        };
        let kind = if idx % 2 == 0 {
            InstanceKind::RandomMixing
        } else {
            InstanceKind::RandomDmdp
        };
        let inst = instance(kind, &params, seed.wrapping_add(idx as u64));
        let (mode, gamma) = match kind {
            InstanceKind::RandomMixing => (MdpMode::Mixing, None),
            _ => (MdpMode::Discounted, inst.gamma()),
        };
        let cfg = MdpSaddleConfig::new(&inst, mode, 0.1, Some(2), &ScheduleConstants::default()).unwrap();
        let v = random_box(states, cfg.radius, &mut rng);
        let mu = random_simplex(inst.num_pairs(), &mut rng);
        let closed = exact_mdp_gap(&cfg, &inst, &v, &mu).unwrap();
        mdp_worst = mdp_worst.max((closed - brute_mdp_gap(&inst, gamma, cfg.radius, &v, &mu)).abs());

        let cparams = GeneratorParams {
            states,
            actions: 2,
            constraints: 1 + idx % 2,
            ..Default::default()
        };
        let cinst = instance(InstanceKind::Constrained, &cparams, seed.wrapping_add(idx as u64));
        let ccfg = ConstrainedConfig::new(&cinst, 0.1, Some(2), &ScheduleConstants::three_block()).unwrap();
        let v = random_box(states, ccfg.radius, &mut rng);
        let s = random_capped(ccfg.k, SLACK_CAP, &mut rng);
        let mu = random_simplex(cinst.num_pairs(), &mut rng);
        let closed = exact_constrained_gap(&ccfg, &cinst, &v, &s, &mu).unwrap();
        let brute = brute_constrained_gap(&cinst, ccfg.radius, SLACK_CAP, &v, &s, &mu);
        con = con.max((closed - brute).abs());
    }
    (game, mdp_worst, con)
}

/// Worst-case summary of one estimator over several frozen iterates.
#[derive(Debug, Clone)]
pub struct EstimatorRow {
    pub name: &'static str,
    pub passed: bool,
    /// Largest `mean_error / band`.
    pub mean_ratio: f64,
    /// Largest `second_moment / reference bound`.
    pub moment_ratio: f64,
    pub violations: u64,
    /// Draws above the reference max-entry bound, which the declared bound may exceed.
    pub reference_exceedances: u64,
}

impl EstimatorRow {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            passed: true,
            mean_ratio: 0.0,
            moment_ratio: 0.0,
            violations: 0,
            reference_exceedances: 0,
        }
    }

    fn absorb(&mut self, c: &smd_core::experiment::EstimatorCheck) {
        self.passed &= c.passed();
        self.mean_ratio = self.mean_ratio.max(c.mean_error / c.band);
        self.moment_ratio = self.moment_ratio.max(c.second_moment / c.moment_bound);
        self.violations += c.entry_violations;
        self.reference_exceedances += c.reference_exceedances;
    }
}

/// Checks all eight estimators at `iterates` frozen points each with `draws` draws per point.
pub fn estimator_suite(iterates: usize, draws: u64, seed: u64) -> Vec<EstimatorRow> {
    use smd_core::constrained::{
        lemma_mu_bounds as con_lemma, slack_bounds, ConstrainedConfig, ConstrainedMuEstimator, SlackEstimator,
        SLACK_CAP,
    };
    use smd_core::experiment::check_estimator;
    use smd_core::game::{GameInstance, GameXEstimator, GameYEstimator};
    use smd_core::mdp::GenerativeModel;
    use smd_core::mdp_smd::{lemma_mu_bounds, MdpMode, MdpSaddleConfig, MuEstimator, VEstimator};
    use smd_core::saddle::{BoundedEstimator, DualWeights, EstimatorBounds, IterateView, NormKind, ScheduleConstants};
    use smd_core::sampling::SamplerKind;

    let mut rng = rng(seed);
    let weights = |y: &[f64]| DualWeights::new(SamplerKind::SumTree, y).unwrap();
    let mut rows = Vec::new();
    let check = |row: &mut EstimatorRow,
                 est: &dyn BoundedEstimator<f64>,
                 it: &IterateView<'_, f64>,
                 exact: &[f64],
                 reference: EstimatorBounds<f64>,
                 probe: Option<&[f64]>,
                 s: u64| {
        row.absorb(&check_estimator(est, it, exact, reference, probe, draws, s).unwrap());
    };

    // game
    let (m, n, radius) = (4, 3, 1.5);
    let mat = random_matrix(m, n, &mut rng);
    let b = random_box(n, 1.0, &mut rng);
    let c = random_box(m, 1.0, &mut rng);
    let g = GameInstance::new(mat.clone(), b.clone().into(), c.clone().into(), radius).unwrap();
    let (gx, gy) = (
        GameXEstimator::new(&g, false).unwrap(),
        GameYEstimator::new(&g).unwrap(),
    );
    let (mut rx, mut ry) = (EstimatorRow::new("game x"), EstimatorRow::new("game y"));
    for t in 0..iterates {
        let x = random_box(n, radius, &mut rng);
        let y = random_simplex(m, &mut rng);
        let probe = random_simplex(m, &mut rng);
        let w = weights(&y);
        let it = IterateView { x: &x, s: &[], y: &w };
        let ex: Vec<f64> = (0..n)
            .map(|j| (0..m).map(|i| y[i] * mat[(i, j)]).sum::<f64>() + b[j])
            .collect();
        let ey: Vec<f64> = (0..m).map(|i| c[i] - dot(mat.row(i), &x)).collect();
        check(&mut rx, &gx, &it, &ex, gx.bounds(), None, seed + t as u64);
        check(
            &mut ry,
            &gy,
            &it,
            &ey,
            gy.bounds(),
            Some(&probe),
            seed + 1000 + t as u64,
        );
    }
    rows.push(rx);
    rows.push(ry);

    // mixing and discounted
    let v_lemma = EstimatorBounds {
        c: 1.0,
        v: 2.0,
        norm: NormKind::Euclidean,
    };
    for (kind, mode, names) in [
        (InstanceKind::RandomMixing, MdpMode::Mixing, ["mixing v", "mixing mu"]),
        (
            InstanceKind::RandomDmdp,
            MdpMode::Discounted,
            ["discounted v", "discounted mu"],
        ),
    ] {
        let params = GeneratorParams {
            states: 3,
            actions: 2,
            alpha: 0.5,
            ..Default::default()
        };
        let mdp = instance(kind, &params, seed);
        let cfg = MdpSaddleConfig::new(&mdp, mode, 0.1, Some(2), &ScheduleConstants::default()).unwrap();
        let model = GenerativeModel::new(&mdp).unwrap();
        let ve = match mode {
            MdpMode::Mixing => VEstimator::mixing(&mdp, &model),
            MdpMode::Discounted => VEstimator::discounted(&mdp, &model).unwrap(),
        };
        let me = MuEstimator::new(&mdp, &model, &cfg);
        let gamma = mdp.gamma().filter(|_| mode == MdpMode::Discounted);
        let gm = gamma.unwrap_or(1.0);
        let (s, pairs) = (mdp.num_states(), mdp.num_pairs());
        let (mut rv, mut rm) = (EstimatorRow::new(names[0]), EstimatorRow::new(names[1]));
        for t in 0..iterates {
            let v = random_box(s, cfg.radius, &mut rng);
            let mu = random_simplex(pairs, &mut rng);
            let probe = random_simplex(pairs, &mut rng);
            let w = weights(&mu);
            let it = IterateView { x: &v, s: &[], y: &w };
            let mut ev = match gamma {
                Some(g) => mdp.q().unwrap().iter().map(|q| (1.0 - g) * q).collect(),
                None => vec![0.0; s],
            };
            for k in 0..pairs {
                ev[mdp.state_of(k)] -= mu[k];
                for (j, p) in mdp.transition_row(k).iter().enumerate() {
                    ev[j] += gm * mu[k] * p;
                }
            }
            let em: Vec<f64> = (0..pairs)
                .map(|k| v[mdp.state_of(k)] - gm * dot(mdp.transition_row(k), &v) - mdp.rewards()[k])
                .collect();
            check(&mut rv, &ve, &it, &ev, v_lemma, None, seed + 2000 + t as u64);
            check(
                &mut rm,
                &me,
                &it,
                &em,
                lemma_mu_bounds(cfg.m, pairs),
                Some(&probe),
                seed + 3000 + t as u64,
            );
        }
        rows.push(rv);
        rows.push(rm);
    }

    // constrained
    let params = GeneratorParams {
        states: 3,
        actions: 2,
        constraints: 2,
        ..Default::default()
    };
    let mdp = instance(InstanceKind::Constrained, &params, seed);
    let cfg = ConstrainedConfig::new(&mdp, 0.1, Some(2), &ScheduleConstants::three_block()).unwrap();
    let model = GenerativeModel::new(&mdp).unwrap();
    let se = SlackEstimator::new(&mdp).unwrap();
    let me = ConstrainedMuEstimator::new(&mdp, &model, &cfg).unwrap();
    let d = mdp.costs().unwrap().clone();
    let (s_n, pairs, k) = (mdp.num_states(), mdp.num_pairs(), cfg.k);
    let (mut rs, mut rm) = (EstimatorRow::new("constrained s"), EstimatorRow::new("constrained mu"));
    for t in 0..iterates {
        let v = random_box(s_n, cfg.radius, &mut rng);
        let sl = random_capped(k, SLACK_CAP, &mut rng);
        let mu = random_simplex(pairs, &mut rng);
        let s_probe = random_capped(k, SLACK_CAP, &mut rng);
        let probe = random_simplex(pairs, &mut rng);
        let w = weights(&mu);
        let it = IterateView { x: &v, s: &sl, y: &w };
        let es: Vec<f64> = (0..k)
            .map(|j| (0..pairs).map(|p| d[(p, j)] * mu[p]).sum::<f64>() - 1.0)
            .collect();
        let em: Vec<f64> = (0..pairs)
            .map(|p| -(v[mdp.state_of(p)] - dot(mdp.transition_row(p), &v) + dot(d.row(p), &sl)))
            .collect();
        check(
            &mut rs,
            &se,
            &it,
            &es,
            slack_bounds(k, cfg.d_max),
            Some(&s_probe),
            seed + 4000 + t as u64,
        );
        check(
            &mut rm,
            &me,
            &it,
            &em,
            con_lemma(cfg.m, cfg.d_max, pairs),
            Some(&probe),
            seed + 5000 + t as u64,
        );
    }
    rows.push(rs);
    rows.push(rm);
    rows
}

/// χ² p-values for the sum tree, the linear scan and the alias table on static `weights`:
/// goodness of fit of each against the exact distribution, then tree-vs-scan homogeneity.
/// Each sampler draws `draws` times from its own stream.
pub fn sampler_p_values(weights: &[f64], draws: usize, seed: u64) -> Vec<(&'static str, f64)> {
    use smd_core::sampling::{AliasTable, SamplerKind, WeightSampler};
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    let n = weights.len();
    let total: f64 = weights.iter().sum();
    let count = |f: &mut dyn FnMut(&mut RngState) -> usize, s: u64| {
        let mut r = RngState::new(seed, s);
        let mut c = vec![0u64; n];
        for _ in 0..draws {
            c[f(&mut r)] += 1;
        }
        c
    };
    let tree = WeightSampler::new(SamplerKind::SumTree, weights).unwrap();
    let scan = WeightSampler::new(SamplerKind::LinearScan, weights).unwrap();
    let alias = AliasTable::build(weights).unwrap();
    let ct = count(&mut |r| tree.sample(r).unwrap(), 100);
    let cs = count(&mut |r| scan.sample(r).unwrap(), 101);
    let ca = count(&mut |r| alias.sample(r), 102);

    let fit = |c: &[u64]| {
        let mut stat = 0.0;
        let mut cells = 0;
        for (obs, w) in c.iter().zip(weights) {
            let expected = draws as f64 * w / total;
            if expected > 0.0 {
                stat += (*obs as f64 - expected).powi(2) / expected;
                cells += 1;
            } else {
                assert_eq!(*obs, 0, "zero-weight cell drawn");
            }
        }
        1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat)
    };
    let homogeneity = {
        let mut stat = 0.0;
        let mut cells = 0;
        for (a, b) in ct.iter().zip(&cs) {
            if a + b > 0 {
                stat += (*a as f64 - *b as f64).powi(2) / (a + b) as f64;
                cells += 1;
            }
        }
        1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat)
    };
    vec![
        ("sum tree fit", fit(&ct)),
        ("linear scan fit", fit(&cs)),
        ("alias fit", fit(&ca)),
        ("tree vs scan", homogeneity),
    ]
}

/// Matching pennies on `[-1, 1]²`.
pub fn pennies() -> smd_core::game::GameInstance {
    let m = Matrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
    smd_core::game::GameInstance::new(m, vec![0.0, 0.0].into(), vec![0.0, 0.0].into(), 1.0).unwrap()
}
