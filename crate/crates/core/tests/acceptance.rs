//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any fails.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rca_core::bonferroni::{calibrate_alpha1, Alpha1Table, CalibrationConfig};
use rca_core::estimate::{nuisance_estimates, residuals, rho_ols};
use rca_core::experiments::{run_power, run_size, PowerConfig, SizeConfig, Tables, TestKind};
use rca_core::limitdist::{
    default_a_grid, draw_functionals, power_curve_from_draws, CriticalValueTable, PathConfig,
};
use rca_core::rng::par_replicate;
use rca_core::simulate::{gen_innovations, gen_innovations_with, simulate_rca, InnovationSpec, RcaParams, Series};
use rca_core::teststats::{StatContext, StatKind};
use statrs::distribution::{ContinuousCDF, Normal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rate(xs: &[f64], cv: f64) -> f64 {
    xs.iter().filter(|&&x| x > cv).count() as f64 / xs.len() as f64
}

fn ks_normal(xs: &[f64]) -> f64 {
    let n = Normal::standard();
    let mut s = xs.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let m = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = n.cdf(x);
            (f - i as f64 / m).abs().max((f - (i + 1) as f64 / m).abs())
        })
        .fold(0.0, f64::max)
}

fn null_stats(spec: InnovationSpec, t: usize, reps: usize, seed: u64, kinds: &[StatKind]) -> Vec<Vec<f64>> {
    par_replicate(reps, seed, |rng, _| {
        let inn = gen_innovations_with(&spec, t, rng).unwrap();
        let y = simulate_rca(&RcaParams::new(t).rho(1.0), &inn.eps, &inn.v).unwrap();
        let ctx = StatContext::new(&y);
        kinds.iter().map(|&k| ctx.stat(1.0, k).unwrap().value).collect()
    })
}

fn criterion_1() -> Outcome {
    let out = null_stats(InnovationSpec::normal(), 1000, 20_000, 101, &[StatKind::WaldStar, StatKind::AugTStar]);
    let w: Vec<f64> = out.iter().map(|v| v[0]).collect();
    let t: Vec<f64> = out.iter().map(|v| v[1]).collect();
    let rw = rate(&w, 5.991);
    let rt = t.iter().filter(|x| x.abs() > 1.96).count() as f64 / t.len() as f64;
    let ks = ks_normal(&t);
    let ok = (0.04..=0.06).contains(&rw) && (0.04..=0.06).contains(&rt) && ks < 0.02;
    check(ok, format!("W* rate {rw:.4}, t* two-sided rate {rt:.4}, KS(t*) {ks:.4}"))
}

fn criterion_2() -> Outcome {
    let out = null_stats(InnovationSpec::std_chisq(1), 5000, 10_000, 202, &[StatKind::WaldStar]);
    let w: Vec<f64> = out.iter().map(|v| v[0]).collect();
    let r = rate(&w, 5.991);
    check((0.035..=0.07).contains(&r), format!("chi2(1) W* rate {r:.4}"))
}

fn criterion_3() -> Outcome {
    let t = 100_000;
    let mut lines = Vec::new();
    let mut ok = true;
    for (spec, psi, seed) in [
        (InnovationSpec::normal(), 0.0, 301),
        (InnovationSpec::std_chisq(1), 0.756, 302),
        (InnovationSpec::std_chisq(10), 0.5, 303),
    ] {
        let inn = gen_innovations(&spec, t, seed).unwrap();
        let y = simulate_rca(&RcaParams::new(t).rho(1.0), &inn.eps, &inn.v).unwrap();
        let n = nuisance_estimates(&residuals(&y, rho_ols(&y).unwrap().rho_hat)).unwrap();
        let p = n.psi().unwrap();
        ok &= (n.sigma_eps2 - 1.0).abs() < 0.02;
        if spec.kind == InnovationSpec::normal().kind {
            ok &= (n.sigma_eta2 - 2.0).abs() < 0.06;
        } else {
            ok &= (p - psi).abs() < 0.02;
        }
        lines.push(format!("{}: s2e {:.4} s2h {:.4} psi {:.4}", spec.kind.label(), n.sigma_eps2, n.sigma_eta2, p));
    }
    check(ok, lines.join("; "))
}

/// Least squares of `w` on `[1, x, x²]` by modified Gram-Schmidt QR.
/// Returns (t-ratio on x², Wald statistic for both slopes).
fn qr_oracle(x: &[f64], w: &[f64]) -> (f64, f64) {
    let n = x.len();
    let mut cols = [vec![1.0; n], x.to_vec(), x.iter().map(|v| v * v).collect::<Vec<_>>()];
    let mut r = [[0.0f64; 3]; 3];
    for j in 0..3 {
        for i in 0..j {
            let d: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
            r[i][j] = d;
            let qi = cols[i].clone();
            cols[j].iter_mut().zip(&qi).for_each(|(b, a)| *b -= d * a);
        }
        let norm = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        r[j][j] = norm;
        cols[j].iter_mut().for_each(|v| *v /= norm);
    }
    let qtw: Vec<f64> = cols.iter().map(|q| q.iter().zip(w).map(|(a, b)| a * b).sum()).collect();
    let mut beta = [0.0; 3];
    for i in (0..3).rev() {
        beta[i] = (qtw[i] - (i + 1..3).map(|k| r[i][k] * beta[k]).sum::<f64>()) / r[i][i];
    }
    let rss: f64 = (0..n)
        .map(|t| {
            let e = w[t] - beta[0] - beta[1] * x[t] - beta[2] * x[t] * x[t];
            e * e
        })
        .sum();
    let s2 = rss / n as f64;
    // (X'X)^{-1}_{33} = ||third row of R^{-1}||² = 1 / r33²
    let t = beta[2] / (s2.sqrt() / r[2][2]);
    // explained sum of squares about the mean
    let wald = (qtw[1] * qtw[1] + qtw[2] * qtw[2]) / s2;
    (t, wald)
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(404);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let t = rng.random_range(10..=200);
        let mut y = vec![0.0];
        for _ in 0..t {
            let e: f64 = rng.sample(StandardNormal);
            y.push(y.last().unwrap() + e);
        }
        let rho_bar = rng.random_range(0.9..1.1);
        let y = Series::new(y).unwrap();
        let ctx = StatContext::new(&y);
        // independent residuals, nuisance estimates and modification
        let z: Vec<f64> = y.current().iter().zip(y.lagged()).map(|(a, b)| a - rho_bar * b).collect();
        let z2: Vec<f64> = z.iter().map(|v| v * v).collect();
        let n = t as f64;
        let se2 = z2.iter().sum::<f64>() / n;
        let sh2 = z2.iter().map(|v| (v - se2).powi(2)).sum::<f64>() / n;
        let psi = z.iter().zip(&z2).map(|(a, b)| a * (b - se2)).sum::<f64>() / n / (se2.sqrt() * sh2.sqrt());
        let zs: Vec<f64> =
            z.iter().zip(&z2).map(|(a, b)| (b - sh2.sqrt() * psi * a / se2.sqrt()) / (1.0 - psi * psi).sqrt()).collect();
        for (w, tk, wk) in [(&z2, StatKind::AugT, StatKind::Wald), (&zs, StatKind::AugTStar, StatKind::WaldStar)] {
            let (ot, ow) = qr_oracle(y.lagged(), w);
            let lt = ctx.stat(rho_bar, tk).unwrap().value;
            let lw = ctx.stat(rho_bar, wk).unwrap().value;
            worst = worst.max((lt - ot).abs() / ot.abs()).max((lw - ow).abs() / ow.abs());
        }
    }
    let ln = StatContext::new(&Series::new(vec![1.0, 2.0, 4.0]).unwrap()).stat(1.0, StatKind::Ln).unwrap().value;
    let ok = worst < 1e-10 && ln == 2f64.sqrt();
    check(ok, format!("max relative deviation {worst:.2e}; LN on [1,2,4] = {ln}"))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(505);
    let mut worst: f64 = 0.0;
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
    for _ in 0..200 {
        let t = rng.random_range(20..=300);
        let rho: f64 = rng.random_range(0.8..1.02);
        let spec = if rng.random_bool(0.5) { InnovationSpec::normal() } else { InnovationSpec::std_chisq(3) };
        let inn = gen_innovations(&spec, t, rng.random()).unwrap();
        let y = simulate_rca(&RcaParams::new(t).rho(rho), &inn.eps, &inn.v).unwrap();
        let rho_bar = rng.random_range(0.9..1.05);
        let base = rho_ols(&y).unwrap();
        let base_stats = StatContext::new(&y).all(rho_bar).unwrap();
        for k in [1e-3, 1.0, 1e3] {
            let ky = y.scaled(k).unwrap();
            let est = rho_ols(&ky).unwrap();
            worst = worst.max(rel(est.rho_hat, base.rho_hat));
            worst = worst.max(rel(est.t_ratio(rho_bar).unwrap(), base.t_ratio(rho_bar).unwrap()));
            for (a, b) in StatContext::new(&ky).all(rho_bar).unwrap().iter().zip(&base_stats) {
                worst = worst.max(rel(a.value, b.value));
                worst = worst.max(rel(a.psi_hat.unwrap(), b.psi_hat.unwrap()));
            }
        }
    }
    check(worst < 1e-8, format!("max relative change {worst:.2e}"))
}

fn criterion_6() -> Outcome {
    let draws = draw_functionals(&PathConfig::new(2000, 50_000, 606)).unwrap();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let p = |kind, q: f64| power_curve_from_draws(&draws, kind, 0.0, q, r, &[30.0], 0.05).unwrap()[0];
    let (ln0, ln3, lnm3) = (p(StatKind::Ln, 0.0), p(StatKind::Ln, 3.0), p(StatKind::Ln, -3.0));
    let (w3, wm3) = (p(StatKind::Wald, 3.0), p(StatKind::Wald, -3.0));
    let ok = ln0 - ln3 >= 0.1 && w3 > ln3 && (ln3 - lnm3).abs() <= 0.015 && (w3 - wm3).abs() <= 0.015;
    check(ok, format!("LN(q=0) {ln0:.4}, LN(q=3) {ln3:.4}, LN(q=-3) {lnm3:.4}, Wald(q=3) {w3:.4}, Wald(q=-3) {wm3:.4}"))
}

fn criterion_7(tab: Tables) -> Outcome {
    let reps = 2000;
    let cfg = SizeConfig::new(vec![500], vec![0.7, 0.9, 1.0, 1.01], reps, 707);
    let res = run_size(&cfg, tab).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for row in &res.rows {
        let bound = tab.alpha1.lookup(0.0).unwrap() + 0.05 + 3.0 * row.se;
        ok &= (0.02..=0.07).contains(&row.rate) && row.rate <= bound;
        parts.push(format!("rho {} rate {:.4}", row.rho.unwrap(), row.rate));
    }
    // skewed innovations: alpha1 follows the published row for psi = 0.756
    let mut skew = SizeConfig::new(vec![500], vec![1.0], reps, 708);
    skew.innovation = InnovationSpec::std_chisq(1);
    let row = &run_size(&skew, tab).unwrap().rows[0];
    let bound = tab.alpha1.lookup(0.756).unwrap() + 0.05 + 3.0 * row.se;
    ok &= row.rate <= bound;
    parts.push(format!("chi2(1) rho 1 rate {:.4} (bound {bound:.3})", row.rate));
    check(ok, parts.join(", "))
}

fn criterion_8(tab: Tables) -> Outcome {
    let mut cfg = PowerConfig::new(200, vec![1.0], vec![0.75, 0.0], vec![0.01], 5000, 808);
    cfg.tests = vec![TestKind::BonfWald, TestKind::LnStarKnownRho];
    let res = run_power(&cfg, tab).unwrap();
    let get = |corr: f64, k: TestKind| res.find(|r| r.corr == Some(corr) && r.kind == k.name()).unwrap().rate;
    let (bw75, ln75) = (get(0.75, TestKind::BonfWald), get(0.75, TestKind::LnStarKnownRho));
    let (bw0, ln0) = (get(0.0, TestKind::BonfWald), get(0.0, TestKind::LnStarKnownRho));
    let ok = bw75 - ln75 >= 0.05 && ln0 >= bw0 - 0.03;
    check(ok, format!("corr .75: BonfWald {bw75:.4} LN* {ln75:.4}; corr 0: BonfWald {bw0:.4} LN* {ln0:.4}"))
}

const PUBLISHED_TABLE: &str = "psi_lo,psi_hi,openness,alpha1
0,0.05,[),0.09
0.05,0.1,[),0.17
0.1,0.15,[),0.23
0.15,0.2,[),0.31
0.2,0.25,[),0.38
0.25,0.3,[),0.45
0.3,0.4,[],0.5
0.4,0.45,(],0.48
0.45,0.5,(],0.46
0.5,0.55,(],0.44
0.55,0.6,(],0.42
0.6,0.65,(],0.38
0.65,0.7,(],0.35
0.7,0.75,(],0.31
0.75,0.8,(],0.26
0.8,0.85,(],0.22
0.85,0.9,(],0.17
0.9,0.95,(],0.11
0.95,1,(),0.05
";

fn criterion_9(cv: &CriticalValueTable) -> Outcome {
    let cfg = CalibrationConfig {
        psi_grid: vec![0.0],
        a_grid: vec![-50.0, -10.0, 0.0, 10.0],
        t: 500,
        reps: 500,
        seed: 909,
        ..CalibrationConfig::full_scale(909)
    };
    let rep = calibrate_alpha1(&cfg, cv).unwrap();
    let a1 = rep.selected[0];
    let mut buf = Vec::new();
    Alpha1Table::published().write_csv(&mut buf).unwrap();
    let export_ok = String::from_utf8(buf).unwrap() == PUBLISHED_TABLE;
    let ok = a1.is_some_and(|a| (a - 0.09).abs() <= 0.06 + 1e-12) && export_ok;
    check(ok, format!("calibrated alpha1 {a1:?}; published export matches: {export_ok}"))
}

/// Lower 5% quantile of the no-constant Dickey-Fuller t-ratio from plain
/// random walks.
fn df_oracle(t: usize, reps: usize) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(1010);
    let mut ts: Vec<f64> = (0..reps)
        .map(|_| {
            let (mut y, mut sxy, mut sxx, mut syy) = (0.0f64, 0.0, 0.0, 0.0);
            for _ in 0..t {
                let e: f64 = rng.sample(StandardNormal);
                let yn = y + e;
                sxy += y * yn;
                sxx += y * y;
                syy += yn * yn;
                y = yn;
            }
            let b = sxy / sxx;
            let s2 = (syy - 2.0 * b * sxy + b * b * sxx) / t as f64;
            (b - 1.0) / (s2 / sxx).sqrt()
        })
        .collect();
    ts.sort_by(|a, b| a.total_cmp(b));
    ts[(0.05 * reps as f64) as usize]
}

fn criterion_10(cv: &CriticalValueTable) -> Outcome {
    let oracle = df_oracle(500, 40_000);
    let q = cv.quantile(0.0, 0.05).unwrap();
    let mono = default_a_grid().iter().all(|&a| {
        let qs: Vec<f64> = cv.levels().iter().map(|&l| cv.quantile(a, l).unwrap()).collect();
        qs.windows(2).all(|w| w[0] <= w[1])
    });
    let ok = (q + 1.95).abs() <= 0.03 && (q - oracle).abs() <= 0.03 && (oracle + 1.95).abs() <= 0.03 && mono;
    check(ok, format!("cv(0)_0.05 {q:.4}, simulation oracle {oracle:.4}, monotone {mono}"))
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() {
    let cv = CriticalValueTable::shipped();
    let a1 = Alpha1Table::published();
    let tab = Tables { cv: &cv, alpha1: &a1 };
    let criteria: Vec<Criterion> = vec![
        ("pivotal nulls", Box::new(criterion_1)),
        ("psi robustness", Box::new(criterion_2)),
        ("estimator consistency", Box::new(criterion_3)),
        ("OLS oracle equivalence", Box::new(criterion_4)),
        ("scale invariance", Box::new(criterion_5)),
        ("asymptotic power anchors", Box::new(criterion_6)),
        ("Bonferroni size", Box::new(move || criterion_7(tab))),
        ("power ordering", Box::new(move || criterion_8(tab))),
        ("alpha1 calibration", Box::new(|| criterion_9(&cv))),
        ("critical value table", Box::new(|| criterion_10(&cv))),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} [{status}] {name}: {} ({:.1}s)", i + 1, o.detail, start.elapsed().as_secs_f64());
        failed += (!o.pass) as usize;
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
