//! The acceptance suite: Monte Carlo against exact laws, analytic
//! reproductions, property sweeps and determinism.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use rand::Rng;
use serde_json::json;

use crate::commands::{analytic, arithmetic_curve, counterexample_c0, figb_curves, simulate};
use crate::config::{FigbConfig, Manifest, LimitsConfig, RunConfig, ScheduleConfig, SchedulePreset};
use crate::error::{HcpError, Result};
use crate::hcp::{replicate, EpochSchedule, EpochSummary, Thresholds, WindowPolicy};
use crate::limits::{first_point_limit_transform, LimitLaw, LimitLawParams, Moment, EULER_GAMMA};
use crate::measure::{
    c0_estimate, deconvolve_m, epoch_pushforward, iterate_hcp_measures, law_to_measure, log_grid,
    reassemble_from_m, u1_from_m, un_transport, AtomicMeasure, C0Options, IterateOptions, LaplaceTransform,
    ParetoTransform,
};
use crate::ocp::{run_epoch, RateFamily, RateProfile};
use crate::rng::stream;
use crate::spp::{IntervalLaw, PointLaw, RenewalSpec};
use crate::stats::{
    binomial_std_err, discrete_ks_bootstrap, empirical_laplace, exchangeable_identity_check, ks_critical,
    ks_test, ks_two_sample, IdentityVariant, SampleSet, TestRecord,
};

/// Trailing-window amplitude floors for the non-convergent curves, at half
/// the amplitude of the reference computation (0.040 and 0.099).
pub const FIGB_FLOOR_Q05: f64 = 0.02;
pub const FIGB_FLOOR_Q08: f64 = 0.05;
pub const FIGB_WINDOW: usize = 8;
/// Finite-n allowance on the KS distance at epoch 10.
pub const UNIVERSALITY_ALLOWANCE: f64 = 0.02;
/// `E[Z^2]` of the `c0 = 1` limit law, from `LimitLaw::limit_moment(2)`.
pub const FROZEN_SECOND_MOMENT: f64 = 3.562_144_9;

/// Sample-size multiplier; 1 reproduces the stated sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scale(pub f64);

impl Scale {
    pub const FULL: Scale = Scale(1.0);
    pub const QUICK: Scale = Scale(0.05);

    fn size(self, full: usize, min: usize) -> usize {
        ((full as f64 * self.0).round() as usize).max(min)
    }

    fn is_full(self) -> bool {
        self.0 >= 1.0
    }

    /// Reduced runs use `max(stated, 3 se)`.
    fn tolerance(self, stated: f64, se: f64) -> f64 {
        if self.is_full() {
            stated
        } else {
            stated.max(3.0 * se)
        }
    }
}

#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub records: Vec<TestRecord>,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} {:<28} {} ({:.1}s) {}",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.seconds,
            self.detail
        )
    }
}

pub const NAMES: [&str; 10] = [
    "one-epoch exactness",
    "rate universality",
    "universality limit",
    "survival probability",
    "first-point law",
    "moment convergence",
    "exp-geometric reproduction",
    "c0 classification",
    "property suites",
    "determinism",
];

struct Outcome {
    passed: bool,
    detail: String,
    records: Vec<TestRecord>,
}

fn record(name: &str, statistic: f64, p_value: Option<f64>, n: f64, passed: bool, parameters: serde_json::Value) -> TestRecord {
    TestRecord { name: name.into(), statistic, p_value, n, passed, parameters }
}

pub fn run_criterion(id: u8, scale: Scale) -> CriterionReport {
    let start = Instant::now();
    let out = match id {
        1 => one_epoch_exactness(scale),
        2 => rate_universality(scale),
        3 => universality_limit(scale),
        4 => survival(scale),
        5 => first_point(scale),
        6 => moments(scale),
        7 => figb(),
        8 => c0_classification(),
        9 => property_suites(scale),
        10 => determinism(),
        _ => Err(HcpError::InvalidArgument(format!("no criterion {id}"))),
    };
    let out = out.unwrap_or_else(|e| Outcome { passed: false, detail: format!("error: {e}"), records: Vec::new() });
    CriterionReport {
        id,
        name: NAMES.get(id as usize - 1).copied().unwrap_or("unknown"),
        passed: out.passed,
        detail: out.detail,
        seconds: start.elapsed().as_secs_f64(),
        records: out.records,
    }
}

pub fn run_all(scale: Scale) -> Vec<CriterionReport> {
    (1..=10).map(|id| run_criterion(id, scale)).collect()
}

fn delta1() -> IntervalLaw {
    IntervalLaw::Dirac { value: 1.0 }
}

fn left_bounded(law: IntervalLaw) -> RenewalSpec {
    RenewalSpec::LeftBounded { first_point: PointLaw::default(), law }
}

fn final_lengths(spec: &RenewalSpec, intervals: usize, rates: &RateFamily, seed: u64) -> Result<Vec<f64>> {
    let mut rng = stream(seed, 0);
    let cfg = spec.sample_periodic(intervals, &mut rng)?;
    Ok(run_epoch(&cfg, rates, &mut rng)?.final_config.lengths)
}

fn one_epoch_exactness(scale: Scale) -> Result<Outcome> {
    let m = scale.size(100_000, 2_000);
    let rates = RateFamily::constant(1.0, 2.0, 0.3, 1.0);
    let lengths = final_lengths(&left_bounded(delta1()), m, &rates, 101)?;
    let oracle = epoch_pushforward(&AtomicMeasure::dirac(1.0, 40.0)?, 1.0, 2.0)?;
    let pmf: Vec<(f64, f64)> = oracle.atoms().to_vec();
    let n = lengths.len() as f64;
    let ks = discrete_ks_bootstrap(&SampleSet::new(lengths.clone()), &pmf, 999, 102)?;
    let mut ok = ks.p_value > 0.01;
    let mut records = vec![record("discrete_ks", ks.statistic, Some(ks.p_value), n, ks.p_value > 0.01, json!({"bootstrap": 999}))];
    let mut worst: f64 = 0.0;
    for k in 2..=5 {
        let p = oracle.mass_at(k as f64);
        let f = lengths.iter().filter(|&&x| x == k as f64).count() as f64 / n;
        let se = binomial_std_err(p, n);
        let pass = (f - p).abs() < 3.0 * se;
        worst = worst.max((f - p).abs() / se);
        ok &= pass;
        records.push(record("atom", f - p, None, n, pass, json!({"k": k, "exact": p, "se": se})));
    }
    Ok(Outcome {
        passed: ok,
        detail: format!("n={} KS p={:.3}, worst atom error {:.2} se", n, ks.p_value, worst),
        records,
    })
}

fn rate_universality(scale: Scale) -> Result<Outcome> {
    let m = scale.size(190_000, 4_000);
    let law = IntervalLaw::Exponential { rate: 1.0, shift: 1.0 };
    let spec = left_bounded(law.clone());
    let constant = RateFamily::new(1.0, 2.0, RateProfile::Constant { left: 1.0, right: 1.0 });
    let linear = RateFamily::new(1.0, 2.0, RateProfile::Linear { left: 1.0, right: 1.0 });
    let a = final_lengths(&spec, m, &constant, 201)?;
    let b = final_lengths(&spec, m, &linear, 202)?;
    let ks = ks_two_sample(&SampleSet::new(a.clone()), &SampleSet::new(b.clone()))?;
    let mu = law_to_measure(&law, Some(1.0 / 64.0), 48.0)?;
    let sched = |rates: RateProfile| EpochSchedule {
        thresholds: Thresholds::Explicit { values: vec![1.0, 2.0, 4.0] },
        rates,
        gamma: None,
    };
    let opts = IterateOptions::default();
    let ra = iterate_hcp_measures(&mu, &sched(constant.profile.clone()), 2, opts)?;
    let rb = iterate_hcp_measures(&mu, &sched(linear.profile.clone()), 2, opts)?;
    let identical = ra.measures == rb.measures;
    let passed = ks.p_value > 0.01 && identical;
    Ok(Outcome {
        passed,
        detail: format!("n={}/{} two-sample KS p={:.3}, analytic identical={identical}", a.len(), b.len(), ks.p_value),
        records: vec![
            record("two_sample_ks", ks.statistic, Some(ks.p_value), ks.n, ks.p_value > 0.01, json!({"families": ["constant", "linear"]})),
            record("analytic_identical", 0.0, None, 1.0, identical, json!({})),
        ],
    })
}

/// East schedule, geometric(0.1), pooled core samples at epoch 10.
fn universality_run(scale: Scale) -> Result<Arc<EpochSummary>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<EpochSummary>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|p| p.into_inner());
    if let Some(s) = guard.get(&scale.0.to_bits()) {
        return Ok(s.clone());
    }
    let policy = WindowPolicy {
        intervals: scale.size(1_000_000, 20_000),
        periodic: true,
        record_from: 10,
        ..WindowPolicy::default()
    };
    let spec = left_bounded(IntervalLaw::Geometric { q: 0.1 });
    let mut runs = replicate(&spec, &EpochSchedule::east(), 10, &policy, 20, 301, 0)?;
    let last = Arc::new(runs.pop().ok_or_else(|| HcpError::Numerical("no epochs recorded".into()))?);
    guard.insert(scale.0.to_bits(), last.clone());
    Ok(last)
}

fn limit1() -> Result<LimitLaw> {
    LimitLaw::new(LimitLawParams::new(1.0))
}

fn universality_limit(scale: Scale) -> Result<Outcome> {
    let run = universality_run(scale)?;
    let law = limit1()?;
    let n = run.z.len();
    let ks = ks_test(&SampleSet::new(run.z.clone()), |x| law.z_cdf(x))?;
    let crit = ks_critical(n as f64, 0.01)?;
    let bound = crit + UNIVERSALITY_ALLOWANCE;
    let enough = !scale.is_full() || n >= 20_000;
    let passed = enough && ks.statistic <= bound;
    Ok(Outcome {
        passed,
        detail: format!("n={n} D={:.4} bound={:.4} (critical {:.4} + {UNIVERSALITY_ALLOWANCE})", ks.statistic, bound, crit),
        records: vec![record("ks_limit", ks.statistic, Some(ks.p_value), n as f64, passed, json!({"epoch": 10, "bound": bound}))],
    })
}

fn moments(scale: Scale) -> Result<Outcome> {
    let run = universality_run(scale)?;
    let z = &run.z;
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let second = z.iter().map(|x| x * x).sum::<f64>() / n;
    let var1 = z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let var2 = z.iter().map(|x| (x * x - second).powi(2)).sum::<f64>() / (n - 1.0);
    let target1 = EULER_GAMMA.exp();
    let tol1 = scale.tolerance(0.05, (var1 / n).sqrt());
    let tol2 = scale.tolerance(0.10, (var2 / n).sqrt() / FROZEN_SECOND_MOMENT);
    let computed = match limit1()?.limit_moment(2)? {
        Moment::Finite { value, .. } => value,
        Moment::Infinite => f64::INFINITY,
    };
    let ok1 = (mean - target1).abs() <= tol1;
    let ok2 = (second / FROZEN_SECOND_MOMENT - 1.0).abs() <= tol2;
    let frozen_ok = (computed - FROZEN_SECOND_MOMENT).abs() < 1e-6;
    Ok(Outcome {
        passed: ok1 && ok2 && frozen_ok,
        detail: format!(
            "n={} mean={mean:.4} (target {target1:.5} +- {tol1:.3}), second={second:.4} (target {FROZEN_SECOND_MOMENT} +- {:.0}%)",
            z.len(),
            tol2 * 100.0
        ),
        records: vec![
            record("mean", mean, None, n, ok1, json!({"target": target1, "tolerance": tol1})),
            record("second_moment", second, None, n, ok2, json!({"target": FROZEN_SECOND_MOMENT, "relative_tolerance": tol2, "recomputed": computed})),
        ],
    })
}

/// Exact active masses of the `delta_1` East chain for epochs `1..=n`.
pub fn delta_east_active_masses(n: usize) -> Result<Vec<f64>> {
    let l_max = 2f64.powi(n as i32);
    let mu = AtomicMeasure::from_grid(1.0, &[0.0, 1.0], l_max, 0.0);
    Ok(iterate_hcp_measures(&mu, &EpochSchedule::east(), n, IterateOptions::default())?.active_mass)
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn survival(scale: Scale) -> Result<Outcome> {
    let replicas = scale.size(100_000, 2_000);
    let policy = WindowPolicy { intervals: 512, buffer_factor: 0.0, record_from: usize::MAX, ..WindowPolicy::default() };
    let runs = replicate(&left_bounded(delta1()), &EpochSchedule::east(), 4, &policy, replicas, 401, 0)?;
    let h = delta_east_active_masses(15)?;
    let mut ok = true;
    let mut records = Vec::new();
    let mut parts = Vec::new();
    for n in 2..=4 {
        let exact = (-h[..n - 1].iter().sum::<f64>()).exp();
        let freq = runs[n - 1].first_point_survival_frequency();
        let se = binomial_std_err(exact, replicas as f64);
        let pass = (freq - exact).abs() < 3.0 * se;
        ok &= pass;
        parts.push(format!("n={n}: {freq:.4} vs {exact:.4}"));
        records.push(record("survival", freq, None, replicas as f64, pass, json!({"epoch": n, "exact": exact, "se": se})));
    }
    let ns: Vec<usize> = (5..=16).collect();
    let x: Vec<f64> = ns.iter().map(|&n| (n as f64 - 1.0) * 2f64.ln()).collect();
    let y: Vec<f64> = ns.iter().map(|&n| -h[..n - 1].iter().sum::<f64>()).collect();
    let b = slope(&x, &y);
    let slope_ok = (b + 1.0).abs() <= 0.1;
    records.push(record("slope", b, None, ns.len() as f64, slope_ok, json!({"epochs": [5, 16], "target": -1.0})));
    Ok(Outcome {
        passed: ok && slope_ok,
        detail: format!("{}; exact slope over n=5..16 = {b:.4}", parts.join(", ")),
        records,
    })
}

/// Exact `E[exp(-s Y^(n))]` for `delta_1` under East at threshold `d`.
pub fn first_point_exact_delta_east(d: usize, s: f64) -> f64 {
    let mut acc = 0.0;
    for k in 0..d.saturating_sub(1) {
        acc += (-s * (k + 1) as f64 / d as f64).exp_m1() / (k + 1) as f64;
    }
    acc.exp()
}

fn first_point(scale: Scale) -> Result<Outcome> {
    let replicas = scale.size(5_000, 500);
    let policy = WindowPolicy { intervals: 16_384, buffer_factor: 0.0, record_from: 10, ..WindowPolicy::default() };
    let runs = replicate(&left_bounded(delta1()), &EpochSchedule::east(), 10, &policy, replicas, 501, 0)?;
    let y = runs[9].y_samples();
    let pts = empirical_laplace(&SampleSet::new(y.clone()), &[0.5, 1.0, 2.0])?;
    let mut ok = true;
    let mut records = Vec::new();
    let mut parts = Vec::new();
    for p in pts {
        let limit = first_point_limit_transform(1.0, 0.0, p.s)?;
        let exact = first_point_exact_delta_east(512, p.s);
        let tol = 3.0 * p.std_err + 0.01;
        let pass = (p.value - limit).abs() <= tol;
        ok &= pass;
        parts.push(format!("s={}: {:.4} vs {:.4}", p.s, p.value, limit));
        records.push(record("first_point_transform", p.value, None, y.len() as f64, pass, json!({"s": p.s, "limit": limit, "exact_epoch": exact, "tolerance": tol})));
    }
    Ok(Outcome { passed: ok, detail: format!("n={} {}", y.len(), parts.join(", ")), records })
}

fn figb() -> Result<Outcome> {
    let curves = figb_curves(&[0.1, 0.5, 0.8], 20, 10.0, 1.0)?;
    let mut records = Vec::new();
    let conv = &curves[0].1;
    let entry = (0..conv.len()).find(|&i| conv[i..].iter().all(|v| (0.98..=1.02).contains(v)));
    let mut ok = entry.is_some();
    records.push(record("q=0.1 band", conv[conv.len() - 1], None, conv.len() as f64, ok, json!({"enters_at": entry.map(|i| i + 1)})));
    let mut parts = vec![format!("q=0.1 in band from n={}", entry.map_or(0, |i| i + 1))];
    for ((q, vals), floor) in curves[1..].iter().zip([FIGB_FLOOR_Q05, FIGB_FLOOR_Q08]) {
        let tail = &vals[vals.len() - FIGB_WINDOW..];
        let amp = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - tail.iter().cloned().fold(f64::INFINITY, f64::min);
        let pass = amp > floor;
        ok &= pass;
        parts.push(format!("q={q} amplitude {amp:.4} > {floor}"));
        records.push(record("oscillation", amp, None, FIGB_WINDOW as f64, pass, json!({"q": q, "floor": floor})));
    }
    let arith = arithmetic_curve(0.5, &[1, 2, 4, 8, 16], 10.0, 1.0)?;
    let remap = arith.iter().zip(&curves[1].1[..5]).all(|(a, b)| (a - b).abs() < 1e-12);
    ok &= remap;
    records.push(record("log2 remap", 0.0, None, 5.0, remap, json!({})));
    Ok(Outcome { passed: ok, detail: parts.join(", "), records })
}

fn c0_classification() -> Result<Outcome> {
    let grid = log_grid(1.0, 1e-6, 20);
    let opts = C0Options::default();
    let checks: Vec<(&str, Box<dyn LaplaceTransform>, f64, f64)> = vec![
        ("delta_1", Box::new(AtomicMeasure::dirac(1.0, 10.0)?), 1.0, 0.001),
        ("geometric_0.1", Box::new(law_to_measure(&IntervalLaw::Geometric { q: 0.1 }, None, 400.0)?), 1.0, 0.001),
        ("geometric_0.5", Box::new(law_to_measure(&IntervalLaw::Geometric { q: 0.5 }, None, 400.0)?), 1.0, 0.001),
        ("pareto_0.5", Box::new(ParetoTransform { alpha: 0.5 }), 0.5, 0.02),
    ];
    let mut ok = true;
    let mut records = Vec::new();
    let mut parts = Vec::new();
    for (name, g, target, tol) in checks {
        let e = c0_estimate(g.as_ref(), &grid, opts)?;
        let pass = e.converged && (e.estimate - target).abs() <= tol;
        ok &= pass;
        parts.push(format!("{name} {:.4}", e.estimate));
        records.push(record(name, e.estimate, None, grid.len() as f64, pass, json!({"target": target, "tolerance": tol, "oscillation": e.oscillation})));
    }
    let b = counterexample_c0(0.5)?;
    let pass = !b.converged;
    ok &= pass;
    parts.push(format!("exp-geometric lambda=0.5 converged={} (oscillation {:.1e})", b.converged, b.oscillation));
    records.push(record("exp_geometric_0.5", b.estimate, None, grid.len() as f64, pass, json!({"oscillation": b.oscillation})));
    Ok(Outcome { passed: ok, detail: parts.join(", "), records })
}

/// Random lattice law on `[d_min, d_min + width)` with unit spacing.
pub fn random_lattice_measure<R: Rng>(rng: &mut R, d_min: usize, width: usize, l_max: f64) -> AtomicMeasure {
    let mut masses = vec![0.0; d_min + width];
    for m in masses.iter_mut().skip(d_min) {
        if rng.random::<f64>() < 0.7 {
            *m = rng.random::<f64>();
        }
    }
    masses[d_min] += 0.05;
    let total: f64 = masses.iter().sum();
    masses.iter_mut().for_each(|m| *m /= total);
    AtomicMeasure::from_grid(1.0, &masses, l_max, 0.0)
}

fn transform(m: &AtomicMeasure, s: f64) -> f64 {
    m.atoms().iter().map(|&(x, w)| w * (-s * x).exp()).sum()
}

fn property_suites(scale: Scale) -> Result<Outcome> {
    let mut rng = stream(901, 0);
    let cases = scale.size(100, 20);
    let mut worst = [0.0f64; 5];
    for _ in 0..cases {
        let d_min = rng.random_range(1..=4usize);
        let d_max = d_min + rng.random_range(1..=d_min);
        let width = rng.random_range(1..=3 * d_min);
        let l_max = 60.0 * d_min as f64;
        let mu = random_lattice_measure(&mut rng, d_min, width, l_max);
        let out = epoch_pushforward(&mu, d_min as f64, d_max as f64)?;
        worst[0] = worst[0].max((out.total() - 1.0).abs());
        if out.atoms().first().is_some_and(|a| a.0 < d_max as f64) {
            worst[0] = f64::INFINITY;
        }
        // scaling the lengths scales the pushforward
        let c = 3.0;
        let scaled = epoch_pushforward(&mu.scale_positions(c), c * d_min as f64, c * d_max as f64)?;
        let back = out.scale_positions(c);
        for (a, b) in scaled.atoms().iter().zip(back.atoms()) {
            worst[0] = worst[0].max((a.0 - b.0).abs() + (a.1 - b.1).abs());
        }
        let h = mu.restrict(d_min as f64, d_max as f64);
        for s in [0.5, 1.0, 2.0] {
            let s = s / d_min as f64;
            let lhs = 1.0 - transform(&out, s);
            let rhs = (1.0 - transform(&mu, s)) * transform(&h, s).exp();
            worst[1] = worst[1].max(((lhs - rhs) / rhs).abs());
        }
        // the rescaled output is a valid law of Z on [1, inf)
        let p = out.scale_positions(1.0 / d_max as f64);
        let j_max = 8.0;
        let m = deconvolve_m(&p, j_max)?;
        let re = reassemble_from_m(&m, j_max);
        for &(x, w) in p.atoms().iter().filter(|a| a.0 < j_max * (1.0 - 1e-12)) {
            worst[2] = worst[2].max((re.mass_at(x) - w).abs());
        }
        let mg = deconvolve_m(&p.without_grid(), j_max)?;
        let (u_dense, u_gen) = (u1_from_m(&m), u1_from_m(&mg));
        for dn in [1.0, 1.5, 2.0, 3.0] {
            for x in [0.0, 0.5, 1.0, 1.3] {
                if dn * (1.0 + x) + 1.0 < j_max {
                    let a = un_transport(&u_dense, dn, x)?;
                    let b = un_transport(&u_gen, dn, x)?;
                    worst[3] = worst[3].max((a - b).abs());
                }
            }
        }
    }
    for k in 1..=7 {
        let g: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
        worst[4] = worst[4].max(exchangeable_identity_check(&g, IdentityVariant::Chain)?.deviation);
        if k >= 2 {
            worst[4] = worst[4].max(exchangeable_identity_check(&g, IdentityVariant::Full)?.deviation);
        }
    }
    let immobile_runs = scale.size(1000, 100);
    let mut moved = 0;
    let rates = RateFamily::constant(1.0, 2.0, 1.0, 0.0);
    let spec = left_bounded(IntervalLaw::Exponential { rate: 1.0, shift: 1.0 });
    for r in 0..immobile_runs {
        let mut rr = stream(902, r as u64);
        let cfg = spec.sample(200, &mut rr)?;
        let out = run_epoch(&cfg, &rates, &mut rr)?;
        if !out.point_alive[0] || out.final_config.first_point != cfg.first_point {
            moved += 1;
        }
    }
    let limits = [1e-12, 1e-10, 1e-10, 1e-8, 1e-10];
    let names = ["pushforward invariants", "transform identity", "deconvolution round trip", "two-route U", "exchangeable identity"];
    let mut records = Vec::new();
    let mut ok = moved == 0;
    for i in 0..5 {
        let pass = worst[i] <= limits[i];
        ok &= pass;
        records.push(record(names[i], worst[i], None, cases as f64, pass, json!({"limit": limits[i]})));
    }
    records.push(record("immobility", moved as f64, None, immobile_runs as f64, moved == 0, json!({})));
    Ok(Outcome {
        passed: ok,
        detail: format!(
            "worst: mass {:.1e}, identity {:.1e}, round trip {:.1e}, U {:.1e}, exchangeable {:.1e}; first point moved in {moved}/{immobile_runs}",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
        records,
    })
}

/// Small configuration used by the determinism check.
pub fn determinism_config() -> RunConfig {
    RunConfig {
        initial: left_bounded(IntervalLaw::Geometric { q: 0.3 }),
        schedule: ScheduleConfig { preset: Some(SchedulePreset::East), ..ScheduleConfig::default() },
        epochs: 4,
        replicas: 3,
        first_replica: 0,
        seed: 1001,
        window: WindowPolicy { intervals: 2_000, buffer_factor: 2.0, ..WindowPolicy::default() },
        analytic: Default::default(),
        limits: LimitsConfig::default(),
        figb: FigbConfig::default(),
        out: None,
    }
}

fn determinism() -> Result<Outcome> {
    let cfg = determinism_config();
    let a = simulate(&cfg)?;
    let b = simulate(&manifest_round_trip(&a.manifest)?)?;
    let sims = a.files == b.files;
    let c = analytic(&cfg)?;
    let d = analytic(&manifest_round_trip(&c.manifest)?)?;
    let anal = c.files == d.files;
    // replicas run together equal replicas run one at a time
    let schedule = EpochSchedule::east();
    let together = replicate(&cfg.initial, &schedule, cfg.epochs, &cfg.window, 4, cfg.seed, 0)?;
    let mut pooled: Vec<f64> = Vec::new();
    for r in 0..4 {
        let one = replicate(&cfg.initial, &schedule, cfg.epochs, &cfg.window, 1, cfg.seed, r)?;
        pooled.extend(&one[cfg.epochs - 1].z);
    }
    let split = together[cfg.epochs - 1].z == pooled;
    Ok(Outcome {
        passed: sims && anal && split,
        detail: format!("simulate identical={sims}, analytic identical={anal}, split replicas identical={split}"),
        records: vec![record("byte_identical", 0.0, None, 2.0, sims && anal && split, json!({}))],
    })
}

fn manifest_round_trip(m: &Manifest) -> Result<RunConfig> {
    Ok(Manifest::from_json(&m.to_json()?)?.config)
}
