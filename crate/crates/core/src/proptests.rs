//! Property and simulation checks that span several modules.

use proptest::prelude::*;
use crate::bonferroni::{bonferroni_test, bonferroni_test_with_alpha1, AbarGrid, Alpha1Table, Decision};
use crate::estimate::rho_ols;
use crate::experiments::{mc_se, run_size, ResultTable, SizeConfig, Tables, TestKind};
use crate::limitdist::{
    build_cv_table, draw_functionals, limit_stat, quantile_sorted, CriticalValueTable, LimitParams, PathConfig,
};
use crate::rng::par_replicate;
use crate::simulate::{gen_innovations, gen_innovations_with, simulate_rca, InnovationSpec, RcaParams, Series};
use crate::teststats::{StatContext, StatKind};

fn path(t: usize, a: f64, seed: u64) -> Series {
    let inn = gen_innovations(&InnovationSpec::normal(), t, seed).unwrap();
    simulate_rca(&RcaParams::new(t).a(a), &inn.eps, &inn.v).unwrap()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    quantile_sorted(&xs, 0.5)
}

fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn statistics_are_scale_invariant(
        v in prop::collection::vec(-5f64..5.0, 12..80),
        k in prop::sample::select(vec![1e-3, -1.0, 1e3]),
        rho in 0.8f64..1.05,
    ) {
        let y = Series::new(v).unwrap();
        let ky = y.scaled(k).unwrap();
        let (c1, c2) = (StatContext::new(&y), StatContext::new(&ky));
        for kind in StatKind::ALL {
            let (Ok(s1), Ok(s2)) = (c1.stat(rho, kind), c2.stat(rho, kind)) else { continue };
            prop_assert!(
                (s1.value - s2.value).abs() <= 1e-8 * s1.value.abs().max(1.0),
                "{kind}: {} vs {}", s1.value, s2.value
            );
            if kind.is_wald() {
                prop_assert!(s1.value >= 0.0);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn smaller_alpha1_never_turns_into_a_rejection(
        seed in any::<u64>(),
        a in -30f64..5.0,
        c2 in prop::sample::select(vec![0.0, 20.0, 60.0]),
        lo in 0.02f64..0.3,
        gap in 0.01f64..0.3,
    ) {
        let t = 150;
        let inn = gen_innovations(&InnovationSpec::normal(), t, seed).unwrap();
        let y = simulate_rca(&RcaParams::new(t).a(a).c2(c2), &inn.eps, &inn.v).unwrap();
        let cv = CriticalValueTable::shipped();
        let grid = AbarGrid::new(-150.0, 20.0, 1.0).unwrap();
        let run = |a1| bonferroni_test_with_alpha1(&y, a1, 0.05, &cv, &grid, StatKind::WaldStar);
        let (Ok(small), Ok(large)) = (run(lo), run(lo + gap)) else { return Ok(()) };
        if !small.grid_extended && !large.grid_extended {
            prop_assert!(small.ci.abar_values.len() >= large.ci.abar_values.len());
            prop_assert!(large.ci.abar_values.iter().all(|v| small.ci.abar_values.contains(v)));
        }
        if large.decision == Decision::FailToReject && !large.grid_extended {
            prop_assert_eq!(small.decision, Decision::FailToReject);
        }
        for r in [&small, &large] {
            prop_assert_eq!(r.decision, r.implied_decision());
            let reject = !r.ci.abar_values.is_empty() && r.statistic_min.is_some_and(|m| m > r.cv_alpha2);
            prop_assert_eq!(r.decision == Decision::Reject, reject);
        }
    }
}

#[test]
fn reports_are_coherent_on_null_paths() {
    let cv = CriticalValueTable::shipped();
    let a1 = Alpha1Table::published();
    let grid = AbarGrid::default();
    for seed in 0..60 {
        let y = path(200, [-20.0, -5.0, 0.0, 3.0][seed as usize % 4], seed);
        let r = bonferroni_test(&y, 0.05, &cv, &a1, &grid, StatKind::WaldStar).unwrap();
        assert_eq!(r.decision, r.implied_decision(), "seed {seed}");
        assert!(r.ci.abar_values.iter().all(|v| *v >= r.ci.grid.lo && *v <= r.ci.grid.hi));
        assert_eq!(r.alpha1, a1.lookup(r.psi_hat.abs()).unwrap());
    }
}

#[test]
fn halving_the_grid_step_rarely_changes_the_decision() {
    let cv = CriticalValueTable::shipped();
    let a1 = Alpha1Table::published();
    let coarse = AbarGrid::default();
    let fine = coarse.refined();
    let changed: usize = par_replicate(1000, 77, |rng, _| {
        let inn = gen_innovations_with(&InnovationSpec::normal(), 500, rng).unwrap();
        let y = simulate_rca(&RcaParams::new(500).a(-5.0), &inn.eps, &inn.v).unwrap();
        let d1 = bonferroni_test(&y, 0.05, &cv, &a1, &coarse, StatKind::WaldStar).unwrap().decision;
        let d2 = bonferroni_test(&y, 0.05, &cv, &a1, &fine, StatKind::WaldStar).unwrap().decision;
        usize::from(d1 != d2)
    })
    .into_iter()
    .sum();
    assert!(changed < 10, "{changed} of 1000 decisions changed");
}

#[test]
fn simulation_is_identical_across_thread_counts() {
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            par_replicate(64, 5, |rng, _| {
                let inn = gen_innovations_with(&InnovationSpec::std_chisq(2), 100, rng).unwrap();
                simulate_rca(&RcaParams::new(100).a(-3.0).c2(10.0), &inn.eps, &inn.v).unwrap().into_values()
            })
        })
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(1));
}

#[test]
fn cv_tables_are_bit_reproducible() {
    let cfg = PathConfig::new(150, 3000, 41);
    let levels = [0.025, 0.05, 0.5, 0.95, 0.975];
    let a = build_cv_table(&[-40.0, -5.0, 0.0, 10.0], &levels, &cfg).unwrap();
    let b = build_cv_table(&[-40.0, -5.0, 0.0, 10.0], &levels, &cfg).unwrap();
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    a.write_csv(&mut ca).unwrap();
    b.write_csv(&mut cb).unwrap();
    assert_eq!(ca, cb);
    let c = build_cv_table(&[-40.0, -5.0, 0.0, 10.0], &levels, &PathConfig::new(150, 3000, 42)).unwrap();
    let mut cc = Vec::new();
    c.write_csv(&mut cc).unwrap();
    assert_ne!(ca, cc);
}

#[test]
fn doubling_steps_barely_moves_the_five_percent_value() {
    // both runs see the same Brownian paths, so only the discretization differs
    let q = |steps, substeps| {
        let draws = draw_functionals(&PathConfig::new(steps, 100_000, 2024).with_substeps(substeps)).unwrap();
        let mut t: Vec<f64> = draws.iter().map(|d| d.t_ratio()).collect();
        t.sort_by(|a, b| a.total_cmp(b));
        quantile_sorted(&t, 0.05)
    };
    let (q1, q2) = (q(2000, 2), q(4000, 1));
    assert!((q1 - q2).abs() < 0.01, "{q1} vs {q2}");
}

#[test]
fn ln_and_ln_star_limits_agree_at_zero_psi() {
    let reps = 100_000;
    let draw = |seed| draw_functionals(&PathConfig::new(200, reps, seed)).unwrap();
    let null = LimitParams::null();
    let ln: Vec<f64> = draw(1).iter().map(|d| limit_stat(d, StatKind::Ln, &null).unwrap()).collect();
    let lns: Vec<f64> = draw(2).iter().map(|d| limit_stat(d, StatKind::LnStar, &null).unwrap()).collect();
    let d = ks_two_sample(&ln, &lns);
    assert!(d < 0.01, "KS {d}");
}

#[test]
fn coefficient_bias_median_matches_the_limit() {
    let reps = 20_000;
    let t = 1000;
    let finite: Vec<f64> = par_replicate(reps, 314, |rng, _| {
        let inn = gen_innovations_with(&InnovationSpec::normal(), t, rng).unwrap();
        let y = simulate_rca(&RcaParams::new(t).rho(1.0), &inn.eps, &inn.v).unwrap();
        t as f64 * (rho_ols(&y).unwrap().rho_hat - 1.0)
    });
    let limit: Vec<f64> = draw_functionals(&PathConfig::new(2000, reps, 315))
        .unwrap()
        .iter()
        .map(|d| d.j_dweps / d.sjj)
        .collect();
    let (m1, m2) = (median(finite), median(limit));
    assert!((m1 - m2).abs() < 0.1, "finite {m1} vs limit {m2}");
}

fn small_size(seed: u64) -> ResultTable {
    let cv = CriticalValueTable::shipped();
    let a1 = Alpha1Table::published();
    let mut cfg = SizeConfig::new(vec![200], vec![0.95, 1.0], 2000, seed);
    cfg.tests = vec![TestKind::InfeasibleWaldStar];
    run_size(&cfg, Tables { cv: &cv, alpha1: &a1 }).unwrap()
}

#[test]
fn size_rows_reproduce_statistically_and_sit_near_the_level() {
    let a = small_size(1);
    let b = small_size(2);
    for (r1, r2) in a.rows.iter().zip(&b.rows) {
        assert!((r1.rate - r2.rate).abs() <= 4.0 * r1.se.max(r2.se), "{} vs {}", r1.rate, r2.rate);
        assert!((r1.rate - 0.05).abs() <= 3.0 * mc_se(0.05, r1.reps), "rho {:?}: {}", r1.rho, r1.rate);
    }
}

#[test]
fn result_meta_reruns_bit_identically() {
    let a = small_size(3);
    let cfg: SizeConfig = serde_json::from_value(a.meta["config"].clone()).unwrap();
    let cv = CriticalValueTable::shipped();
    let a1 = Alpha1Table::published();
    let b = run_size(&cfg, Tables { cv: &cv, alpha1: &a1 }).unwrap();
    assert_eq!(a.rows, b.rows);
}
