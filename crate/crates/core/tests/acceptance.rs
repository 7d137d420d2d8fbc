//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use fbm_ergo::coupling::{gaussian_coupling_1d, coupling_radius, step1, HittingMap, OutcomeKind, RunRecord};
use fbm_ergo::fracops::{apply_dh, apply_dh_inverse, bump, future_kernel_g2, AlphaExponent, DriftSignal};
use fbm_ergo::harness::{run_experiment, run_rng, tv_bound, ExperimentConfig, ExperimentResult, Setting};
use fbm_ergo::noise::{fbm_covariance, wiener_increments, ExactSampler, Hurst, PastPath, TimeGrid};
use fbm_ergo::sde::{ou_variance_bound, solve_path, DiffusionMatrix, DriftSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{ks_normal_pvalue, mean_and_se};

type Verdict = Result<String, String>;

fn h(v: f64) -> Hurst {
    Hurst::new(v).unwrap()
}

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fbm_law() -> Verdict {
    let start = Instant::now();
    let grid = TimeGrid::forward(1.0 / 64.0, 4.0).unwrap();
    let n_paths = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let pairs: Vec<(usize, usize)> = (0..10)
        .map(|_| (rng.random_range(1..=256), rng.random_range(1..=256)))
        .collect();
    let mut worst = 0.0f64;
    for hv in [0.3, 0.7] {
        let sampler = ExactSampler::new(grid, h(hv)).unwrap();
        let paths: Vec<_> = (0..n_paths).map(|_| sampler.sample(&mut rng, 1).unwrap()).collect();
        for &(i, j) in &pairs {
            let prods: Vec<f64> = paths.iter().map(|p| p.point(i)[0] * p.point(j)[0]).collect();
            let (m, se) = mean_and_se(&prods);
            let exact = fbm_covariance(h(hv), grid.time(i), grid.time(j));
            worst = worst.max((m - exact).abs() / se);
        }
    }
    let took = start.elapsed();
    check(
        worst <= 3.0 && took < Duration::from_secs(60),
        format!("max |empirical - exact| = {worst:.2} s.e. over 20 pairs, {took:.1?}"),
    )
}

fn operator_inversion() -> Verdict {
    let start = Instant::now();
    let dt = 1.0 / 256.0;
    let grid = TimeGrid::backward(dt, 8.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let paths: Vec<PastPath> = (0..20)
        .map(|_| {
            let width = rng.random_range(0.5..2.0);
            let centre = rng.random_range(-8.0 + width..-width);
            let amp = rng.random_range(0.5..2.0);
            let v = grid.times().map(|t| amp * bump((t - centre) / width)).collect();
            PastPath::new(grid, 1, v).unwrap()
        })
        .collect();
    let sup = |p: &PastPath| p.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut worst = 0.0f64;
    for hv in [0.1, 0.3, 0.7, 0.9] {
        for w in &paths {
            let back = apply_dh_inverse(&apply_dh(w, h(hv)), h(hv));
            worst = worst.max(sup(&back.combine(1.0, w, -1.0).unwrap()) / sup(w));
        }
    }
    let brownian_exact = paths
        .iter()
        .all(|w| apply_dh_inverse(&apply_dh(w, h(0.5)), h(0.5)) == *w);
    let took = start.elapsed();
    check(
        worst <= 1e-2 && brownian_exact && took < Duration::from_secs(60),
        format!("max relative sup error {worst:.2e}; H = 1/2 exact: {brownian_exact}; {took:.1?}"),
    )
}

fn past_future_exponent() -> Verdict {
    let dt = 1.0 / 16.0;
    let grid = TimeGrid::forward(dt, 1.0).unwrap();
    let g1 = DriftSignal::from_fn(grid, 1, |t| vec![bump(2.0 * t - 1.0)]);
    let mut lines = Vec::new();
    let mut ok = true;
    for (hv, a) in [(0.3, 0.25), (0.7, 0.4)] {
        let alpha = AlphaExponent::new(a, h(hv)).unwrap();
        let pts: Vec<(f64, f64)> = [4.0f64, 16.0, 64.0, 256.0]
            .iter()
            .map(|&r| {
                let g2 = future_kernel_g2(&g1, 1.0, r, h(hv), None).unwrap();
                (r.ln(), g2.alpha_norm(alpha).ln())
            })
            .collect();
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        let limit = a - 0.5 + 0.05;
        ok &= slope <= limit;
        lines.push(format!("H={hv}, alpha={a}: slope {slope:.3} (limit {limit:.2})"));
    }
    check(ok, lines.join("; "))
}

fn gaussian_coupling() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut lines = Vec::new();
    let mut ok = true;
    for (a, b) in [(0.2, 0.5), (0.5, 0.5), (1.0, 1.0)] {
        let n = 100_000;
        let m = coupling_radius(b);
        let (mut xs, mut ys, mut bound, mut within) = (Vec::with_capacity(n), Vec::with_capacity(n), 0usize, true);
        for _ in 0..n {
            let g = gaussian_coupling_1d(a, b, &mut rng).unwrap();
            xs.push(g.x);
            ys.push(g.y);
            bound += g.bound as usize;
            within &= (g.y - g.x).abs() <= m;
        }
        let (px, py) = (ks_normal_pvalue(&xs, 0.0, 1.0), ks_normal_pvalue(&ys, 0.0, 1.0));
        let rate = bound as f64 / n as f64;
        ok &= px > 0.01 && py > 0.01 && rate >= 1.0 - b && within;
        lines.push(format!(
            "(a,b)=({a},{b}): KS p {px:.3}/{py:.3}, bound rate {rate:.4} (need {:.2}), |y-x|<=M {within}",
            1.0 - b
        ));
    }
    check(ok, lines.join("; "))
}

fn hitting_guarantee() -> Verdict {
    let mut ok = true;
    let mut lines = Vec::new();
    for hv in [0.3, 0.7] {
        let s = Setting::double_well(h(hv)).unwrap();
        let (mut successes, mut worst_hit, mut worst_half) = (0usize, 0.0f64, 0.0f64);
        for i in 0..200 {
            let mut rng = run_rng(505, i);
            let z = s.entry_state(&mut rng).unwrap();
            let map = HittingMap::new(&z, &s.params, &s.drift, &s.sigma).unwrap();
            let probe = wiener_increments(&mut rng, 32, 1, s.params.dt);
            worst_half = worst_half.max(map.run(&probe, true).unwrap().gap_at_half());
            match step1(&z, &s.params, &s.drift, &s.sigma, &mut rng) {
                Ok(out) if out.kind == OutcomeKind::Succeeded => {
                    successes += 1;
                    worst_hit = worst_hit.max(out.next.distance());
                }
                Ok(_) => {}
                Err(e) => {
                    ok = false;
                    lines.push(format!("H={hv}: state {i}: {e}"));
                }
            }
        }
        ok &= worst_hit <= 1e-6 && worst_half <= 1e-8;
        lines.push(format!(
            "H={hv}: {successes}/200 successes, max |x1-y1| {worst_hit:.1e}, max |rho(1/2)| {worst_half:.1e}"
        ));
    }
    check(ok, lines.join("; "))
}

fn hitting_mass() -> Verdict {
    let s = Setting::double_well(h(0.3)).unwrap();
    let rates: Vec<f64> = (0..5)
        .map(|b| s.hitting_success_rate(6000 + b, 2000).unwrap())
        .collect();
    let mean = rates.iter().sum::<f64>() / 5.0;
    let spread = rates.iter().map(|r| (r / mean - 1.0).abs()).fold(0.0, f64::max);
    let lower = rates.iter().copied().fold(f64::INFINITY, f64::min);
    check(
        lower > 0.0 && spread <= 0.2,
        format!(
            "H=0.3, 5 x 2000 attempts: rates {:?}, mean {mean:.3}, max relative deviation {spread:.3}",
            rates.iter().map(|r| (r * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        ),
    )
}

fn coupling_failure_decay() -> Verdict {
    let s = Setting::double_well(h(0.3)).unwrap();
    let alpha = s.params.alpha;
    let counts = s.coupling_failure_counts(707, 4000, 6).unwrap();
    let rates: Vec<f64> = counts.iter().map(|&(a, f)| f as f64 / a.max(1) as f64).collect();
    let k = rates
        .iter()
        .enumerate()
        .map(|(n, r)| r * 2f64.powf(alpha * n as f64))
        .fold(0.0, f64::max);
    let decreasing = rates.windows(2).all(|w| w[1] <= w[0]);
    let bounded = rates
        .iter()
        .enumerate()
        .all(|(n, r)| *r <= k * 2f64.powf(-alpha * n as f64) + 1e-15);
    check(
        decreasing && bounded && k.is_finite(),
        format!(
            "H=0.3, 4000 chains: failure rates N=0..6 {:?}, K = {k:.4}",
            rates.iter().map(|r| (r * 1e4).round() / 1e4).collect::<Vec<_>>()
        ),
    )
}

fn cost_ledger(results: &[(f64, ExperimentResult)]) -> Verdict {
    let mut ok = true;
    let mut lines = Vec::new();
    for (hv, res) in results {
        let runs: &[RunRecord] = &res.runs[..200];
        let costs: Vec<f64> = runs.iter().flat_map(|r| r.entry_costs()).map(|c| c.value()).collect();
        let worst = costs.iter().copied().fold(0.0, f64::max);
        ok &= worst <= 1.0;
        lines.push(format!("H={hv}: {} hitting entries, max cost {worst:.3}", costs.len()));
    }
    check(ok, lines.join("; "))
}

fn lyapunov_bound() -> Verdict {
    let hv = 0.7;
    let grid = TimeGrid::forward(1.0 / 64.0, 10.0).unwrap();
    let sampler = ExactSampler::new(grid, h(hv)).unwrap();
    let drift = DriftSpec::linear(1, 1.0).unwrap();
    let sigma = DiffusionMatrix::identity(1);
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let marks = [1.0, 5.0, 10.0];
    let idx: Vec<usize> = marks.iter().map(|t| (t * 64.0) as usize).collect();
    let mut sq = vec![Vec::with_capacity(10_000); 3];
    for _ in 0..10_000 {
        let b = sampler.sample(&mut rng, 1).unwrap();
        let y = solve_path(&[0.0], &b, &drift, &sigma, None).unwrap();
        for (k, &i) in idx.iter().enumerate() {
            sq[k].push(y.point(i)[0].powi(2));
        }
    }
    let mut ok = true;
    let mut lines = Vec::new();
    for (k, &t) in marks.iter().enumerate() {
        let (m, se) = mean_and_se(&sq[k]);
        let exact = ou_variance_bound(h(hv), &sigma, t);
        let z = (m - exact.variance).abs() / se;
        ok &= z <= 3.0 && m <= exact.bound;
        lines.push(format!(
            "t={t}: {m:.4} vs {:.4} ({z:.2} s.e.), bound {:.4}",
            exact.variance, exact.bound
        ));
    }
    check(ok, lines.join("; "))
}

fn ergodicity(results: &[(f64, ExperimentResult)], took: Duration) -> Verdict {
    let mut ok = took < Duration::from_secs(30 * 60);
    let mut lines = Vec::new();
    for (hv, res) in results {
        let tail = &res.tail;
        let n = tail.sample_count;
        let coupled = (n - tail.censored_count) as f64 / n as f64;
        let tv = tv_bound(tail);
        let monotone = tv.windows(2).all(|w| w[1].1 <= w[0].1);
        let last = tv.last().unwrap().1;
        let (gamma, ci) = (tail.fitted_gamma, tail.gamma_ci);
        let gamma_ok = matches!((gamma, ci), (Some(g), Some((lo, _))) if g > 0.0 && lo > 0.0);
        ok &= coupled >= 0.95 && monotone && last <= 0.2 && gamma_ok;
        lines.push(format!(
            "H={hv}: coupled {:.1}%, tv bound at t_max {last:.3} (non-increasing: {monotone}), gamma {} CI {}",
            100.0 * coupled,
            gamma.map_or("undefined".into(), |g| format!("{g:.3}")),
            ci.map_or("undefined".into(), |(a, b)| format!("[{a:.3}, {b:.3}]")),
        ));
    }
    lines.push(format!("{took:.1?}"));
    check(ok, lines.join("; "))
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(0.3, 40, 256.0, 1111);
    let mut bytes = Vec::new();
    for (i, workers) in [None, Some(1), Some(2)].into_iter().enumerate() {
        cfg.workers = workers;
        let res = run_experiment(&cfg).unwrap();
        let out = dir.path().join(format!("run{i}"));
        res.write_outputs(&out).unwrap();
        bytes.push(std::fs::read(out.join("runs.jsonl")).unwrap());
    }
    let same = bytes.windows(2).all(|w| w[0] == w[1]);
    check(
        same && !bytes[0].is_empty(),
        format!("3 repetitions of a 40-run experiment, {} bytes each, identical: {same}", bytes[0].len()),
    )
}

fn guarded(f: impl FnOnce() -> Verdict) -> Verdict {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    })
}

#[test]
fn acceptance() {
    let start = Instant::now();
    let mut experiments = Vec::new();
    let exp_verdict = guarded(|| {
        for hv in [0.3, 0.7] {
            let cfg = ExperimentConfig::new(hv, 500, 1024.0, 2024);
            experiments.push((hv, run_experiment(&cfg).map_err(|e| e.to_string())?));
        }
        Ok(String::new())
    });
    let exp_time = start.elapsed();
    let with_runs = |f: &dyn Fn(&[(f64, ExperimentResult)]) -> Verdict| match &exp_verdict {
        Ok(_) => guarded(|| f(&experiments)),
        Err(e) => Err(format!("experiment failed: {e}")),
    };

    let verdicts: Vec<(&str, Verdict)> = vec![
        ("fBm law", guarded(fbm_law)),
        ("operator inversion", guarded(operator_inversion)),
        ("past-future exponent", guarded(past_future_exponent)),
        ("Gaussian coupling", guarded(gaussian_coupling)),
        ("hitting guarantee", guarded(hitting_guarantee)),
        ("hitting success mass", guarded(hitting_mass)),
        ("coupling failure decay", guarded(coupling_failure_decay)),
        ("cost ledger", with_runs(&cost_ledger)),
        ("Lyapunov bound", guarded(lyapunov_bound)),
        ("end-to-end coupling", with_runs(&|r| ergodicity(r, exp_time))),
        ("determinism", guarded(determinism)),
    ];
    let mut failed = Vec::new();
    for (i, (name, v)) in verdicts.iter().enumerate() {
        match v {
            Ok(d) => println!("criterion {:>2} {name}: PASS ({d})", i + 1),
            Err(d) => {
                println!("criterion {:>2} {name}: FAIL ({d})", i + 1);
                failed.push(i + 1);
            }
        }
    }
    println!("acceptance total time {:.1?}", start.elapsed());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
