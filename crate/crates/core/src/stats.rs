//! Goodness-of-fit, independence and transform estimators used to check
//! simulated processes against exact laws.

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{HcpError, Result};
use crate::rng::stream;

#[derive(Debug, Clone, Default, Serialize)]
pub struct SampleSet {
    pub values: Vec<f64>,
    pub weights: Option<Vec<f64>>,
    pub replica: Option<u64>,
    pub epoch: Option<usize>,
}

impl SampleSet {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, ..Self::default() }
    }

    pub fn with_weights(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let s = Self { values, weights: Some(weights), ..Self::default() };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(HcpError::InvalidArgument("empty sample".into()));
        }
        if self.values.iter().any(|v| v.is_nan()) {
            return Err(HcpError::InvalidArgument("sample contains NaN".into()));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.values.len() {
                return Err(HcpError::InvalidArgument("weights and values differ in length".into()));
            }
            if w.iter().any(|&x| !(x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
                return Err(HcpError::InvalidArgument("weights must be nonnegative, not all zero".into()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Effective sample size `(sum w)^2 / sum w^2`.
    pub fn effective_size(&self) -> f64 {
        match &self.weights {
            None => self.values.len() as f64,
            Some(w) => {
                let s: f64 = w.iter().sum();
                s * s / w.iter().map(|x| x * x).sum::<f64>()
            }
        }
    }

    /// Sorted `(value, normalized weight)` pairs with ties merged.
    fn sorted_steps(&self) -> Vec<(f64, f64)> {
        let n = self.values.len();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]));
        let total = self.weights.as_ref().map_or(n as f64, |w| w.iter().sum());
        let mut out: Vec<(f64, f64)> = Vec::new();
        for i in idx {
            let w = self.weights.as_ref().map_or(1.0, |w| w[i]) / total;
            match out.last_mut() {
                Some(last) if last.0 == self.values[i] => last.1 += w,
                _ => out.push((self.values[i], w)),
            }
        }
        out
    }

    pub fn mean(&self) -> f64 {
        weighted_mean(&self.values, self.weights.as_deref())
    }
}

fn weighted_mean(v: &[f64], w: Option<&[f64]>) -> f64 {
    match w {
        None => v.iter().sum::<f64>() / v.len() as f64,
        Some(w) => v.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / w.iter().sum::<f64>(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: f64,
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        // Jacobi-transformed series, accurate for small arguments
        let c = (2.0 * std::f64::consts::PI).sqrt() / lambda;
        let a = std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda);
        let mut cdf = 0.0;
        for k in 1..50 {
            let m = (2 * k - 1) as f64;
            cdf += (-m * m * a).exp();
        }
        return (1.0 - c * cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn stephens(n: f64) -> f64 {
    n.sqrt() + 0.12 + 0.11 / n.sqrt()
}

fn ks_p_value(d: f64, n: f64) -> f64 {
    kolmogorov_sf(stephens(n) * d)
}

/// Critical value of `D` at level `alpha` for `n` samples.
pub fn ks_critical(n: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) || !(n > 0.0) {
        return Err(HcpError::InvalidArgument(format!("bad KS level {alpha} or size {n}")));
    }
    let (mut lo, mut hi) = (0.0, 5.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_sf(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi) / stephens(n))
}

/// One-sample test of `samples` against a continuous `cdf`.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &SampleSet, cdf: F) -> Result<KsResult> {
    samples.validate()?;
    let mut before = 0.0;
    let mut d: f64 = 0.0;
    for (x, w) in samples.sorted_steps() {
        let f = cdf(x);
        let after = before + w;
        d = d.max((f - before).abs()).max((after - f).abs());
        before = after;
    }
    let n = samples.effective_size();
    Ok(KsResult { statistic: d.min(1.0), p_value: ks_p_value(d, n), n })
}

/// Two-sample test with the effective size `n m / (n + m)`.
pub fn ks_two_sample(a: &SampleSet, b: &SampleSet) -> Result<KsResult> {
    a.validate()?;
    b.validate()?;
    let (sa, sb) = (a.sorted_steps(), b.sorted_steps());
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0, 0.0);
    let mut d: f64 = 0.0;
    while i < sa.len() || j < sb.len() {
        let xa = sa.get(i).map_or(f64::INFINITY, |p| p.0);
        let xb = sb.get(j).map_or(f64::INFINITY, |p| p.0);
        let x = xa.min(xb);
        if xa == x {
            fa += sa[i].1;
            i += 1;
        }
        if xb == x {
            fb += sb[j].1;
            j += 1;
        }
        d = d.max((fa - fb).abs());
    }
    let (n, m) = (a.effective_size(), b.effective_size());
    let ne = n * m / (n + m);
    Ok(KsResult { statistic: d.min(1.0), p_value: ks_p_value(d, ne), n: ne })
}

/// Discrete law given as sorted `(atom, probability)` pairs; missing mass
/// sits beyond the last atom.
fn discrete_distance(counts: &[f64], n: f64, pmf: &[(f64, f64)]) -> f64 {
    let (mut fe, mut ft, mut d) = (0.0, 0.0, 0.0f64);
    for (c, &(_, p)) in counts.iter().zip(pmf) {
        fe += c / n;
        ft += p;
        d = d.max((fe - ft).abs());
    }
    d
}

/// Sup-over-atoms KS distance with a parametric-bootstrap p-value. Bootstrap
/// replicate `b` draws from stream `b` of `seed`.
pub fn discrete_ks_bootstrap(
    samples: &SampleSet,
    pmf: &[(f64, f64)],
    n_boot: usize,
    seed: u64,
) -> Result<KsResult> {
    samples.validate()?;
    if samples.weights.is_some() {
        return Err(HcpError::InvalidArgument("discrete KS takes unweighted samples".into()));
    }
    if pmf.is_empty() || pmf.windows(2).any(|w| w[0].0 >= w[1].0) || pmf.iter().any(|a| !(a.1 >= 0.0)) {
        return Err(HcpError::InvalidArgument("pmf atoms must be strictly increasing with nonnegative mass".into()));
    }
    let total: f64 = pmf.iter().map(|a| a.1).sum();
    if total > 1.0 + 1e-9 {
        return Err(HcpError::InvalidArgument(format!("pmf total {total} exceeds 1")));
    }
    let n = samples.len();
    let mut sorted = samples.values.clone();
    sorted.sort_by(f64::total_cmp);
    let mut counts = vec![0.0; pmf.len()];
    let mut k = 0;
    for (count, &(x, _)) in counts.iter_mut().zip(pmf) {
        let tol = 1e-9 * x.abs().max(1.0);
        let before = k;
        while k < sorted.len() && sorted[k] <= x + tol {
            k += 1;
        }
        *count = (k - before) as f64;
    }
    let d = discrete_distance(&counts, n as f64, pmf);
    let probs: Vec<f64> = pmf.iter().map(|a| a.1).collect();
    let exceed = (0..n_boot)
        .into_par_iter()
        .filter(|&b| {
            let mut rng = stream(seed, b as u64);
            let mut left = n as u64;
            let mut rest = 1.0;
            let mut c = vec![0.0; probs.len()];
            for (ci, &p) in c.iter_mut().zip(&probs) {
                if left == 0 || rest <= 0.0 {
                    break;
                }
                let q = (p / rest).clamp(0.0, 1.0);
                let draw = Binomial::new(left, q).map(|bin| bin.sample(&mut rng)).unwrap_or(0);
                *ci = draw as f64;
                left -= draw;
                rest -= p;
            }
            discrete_distance(&c, n as f64, pmf) >= d - 1e-12
        })
        .count();
    Ok(KsResult { statistic: d, p_value: (1 + exceed) as f64 / (n_boot + 1) as f64, n: n as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplacePoint {
    pub s: f64,
    pub value: f64,
    pub std_err: f64,
}

/// Mean of `e^{-s x}` with its leave-one-out jackknife standard error.
pub fn empirical_laplace(samples: &SampleSet, s_grid: &[f64]) -> Result<Vec<LaplacePoint>> {
    samples.validate()?;
    if samples.weights.is_some() {
        return Err(HcpError::InvalidArgument("jackknife needs unweighted samples".into()));
    }
    let n = samples.len() as f64;
    s_grid
        .iter()
        .map(|&s| {
            if !(s >= 0.0) {
                return Err(HcpError::InvalidArgument(format!("transform needs s >= 0, got {s}")));
            }
            if s == 0.0 {
                return Ok(LaplacePoint { s, value: 1.0, std_err: 0.0 });
            }
            let v: Vec<f64> = samples.values.iter().map(|x| (-s * x).exp()).collect();
            let total: f64 = v.iter().sum();
            let value = total / n;
            if n < 2.0 {
                return Ok(LaplacePoint { s, value, std_err: f64::INFINITY });
            }
            let loo_mean = value;
            let ss: f64 = v.iter().map(|x| ((total - x) / (n - 1.0) - loo_mean).powi(2)).sum();
            Ok(LaplacePoint { s, value, std_err: ((n - 1.0) / n * ss).sqrt() })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub n: f64,
    pub shape: (usize, usize),
}

fn merge_lines(table: &mut Vec<Vec<f64>>, i: usize, j: usize) {
    let (lo, hi) = (i.min(j), i.max(j));
    let row = table.remove(hi);
    for (a, b) in table[lo].iter_mut().zip(row) {
        *a += b;
    }
}

fn transpose(t: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..t[0].len()).map(|j| t.iter().map(|r| r[j]).collect()).collect()
}

/// Pearson test of independence on a contingency table. Adjacent rows or
/// columns are merged until every expected count is at least 5.
pub fn chi_square_contingency(table: &[Vec<f64>]) -> Result<ChiSquareResult> {
    if table.is_empty() || table[0].is_empty() || table.iter().any(|r| r.len() != table[0].len()) {
        return Err(HcpError::InvalidArgument("contingency table must be rectangular and nonempty".into()));
    }
    let mut t: Vec<Vec<f64>> = table.to_vec();
    let n: f64 = t.iter().flatten().sum();
    if !(n > 0.0) {
        return Err(HcpError::InvalidArgument("empty contingency table".into()));
    }
    t.retain(|r| r.iter().sum::<f64>() > 0.0);
    let mut tt = transpose(&t);
    tt.retain(|c| c.iter().sum::<f64>() > 0.0);
    t = transpose(&tt);
    loop {
        if t.len() < 2 || t[0].len() < 2 {
            return Err(HcpError::InvalidArgument("degenerate margins: fewer than two classes".into()));
        }
        let rows: Vec<f64> = t.iter().map(|r| r.iter().sum()).collect();
        let cols: Vec<f64> = (0..t[0].len()).map(|j| t.iter().map(|r| r[j]).sum()).collect();
        let rmin = (0..rows.len()).min_by(|&a, &b| rows[a].total_cmp(&rows[b])).unwrap();
        let cmin = (0..cols.len()).min_by(|&a, &b| cols[a].total_cmp(&cols[b])).unwrap();
        if rows[rmin] * cols[cmin] / n >= 5.0 {
            let mut stat = 0.0;
            for (i, r) in t.iter().enumerate() {
                for (j, &o) in r.iter().enumerate() {
                    let e = rows[i] * cols[j] / n;
                    stat += (o - e) * (o - e) / e;
                }
            }
            let df = (rows.len() - 1) * (cols.len() - 1);
            let p_value = ChiSquared::new(df as f64)
                .map_err(|e| HcpError::Numerical(e.to_string()))?
                .sf(stat);
            return Ok(ChiSquareResult { statistic: stat, df, p_value, n, shape: (rows.len(), cols.len()) });
        }
        // merge the thinner margin line into its lighter neighbour
        let pick = |m: &[f64], k: usize| -> usize {
            if k == 0 {
                1
            } else if k + 1 == m.len() || m[k - 1] <= m[k + 1] {
                k - 1
            } else {
                k + 1
            }
        };
        if rows[rmin] / n <= cols[cmin] / n && rows.len() > 2 || cols.len() <= 2 {
            let other = pick(&rows, rmin);
            merge_lines(&mut t, rmin, other);
        } else {
            let mut tt = transpose(&t);
            let other = pick(&cols, cmin);
            merge_lines(&mut tt, cmin, other);
            t = transpose(&tt);
        }
    }
}

/// Equal-probability bin edges from a margin; ties may give fewer bins.
fn quantile_edges(values: &[f64], bins: usize) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut edges: Vec<f64> = (1..bins).map(|k| v[(k * v.len() / bins).min(v.len() - 1)]).collect();
    edges.dedup();
    edges
}

fn bin_of(edges: &[f64], x: f64) -> usize {
    edges.partition_point(|&e| e <= x)
}

/// Chi-square test that the two coordinates of `pairs` are independent.
pub fn independence_test(pairs: &[(f64, f64)], bins: usize) -> Result<ChiSquareResult> {
    if pairs.is_empty() || bins < 2 {
        return Err(HcpError::InvalidArgument("need pairs and at least two bins".into()));
    }
    let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (ea, eb) = (quantile_edges(&a, bins), quantile_edges(&b, bins));
    let mut table = vec![vec![0.0; eb.len() + 1]; ea.len() + 1];
    for &(x, y) in pairs {
        table[bin_of(&ea, x)][bin_of(&eb, y)] += 1.0;
    }
    chi_square_contingency(&table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityVariant {
    /// Expected value `k - 1`.
    Full,
    /// Expected value 1.
    Chain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub sum: f64,
    pub expected: f64,
    pub deviation: f64,
}

fn for_each_permutation<F: FnMut(&[usize])>(k: usize, mut f: F) {
    let mut p: Vec<usize> = (0..k).collect();
    let mut c = vec![0usize; k];
    f(&p);
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            f(&p);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Brute-force sum over all permutations of the positive weights `g`.
///
/// Chain: `sum_sigma prod_i g_{sigma(i)} / sum_{j >= i} g_{sigma(j)}`.
/// Full: `sum_sigma [g_{sigma(1)} / sum_all] prod_{i=2}^{k-1} g_{sigma(i)} / sum_{j=i}^{k-1} g_{sigma(j)}`.
pub fn exchangeable_identity_check(g: &[f64], variant: IdentityVariant) -> Result<IdentityCheck> {
    let k = g.len();
    if !(1..=8).contains(&k) {
        return Err(HcpError::InvalidArgument(format!("need 1 <= k <= 8 values, got {k}")));
    }
    if g.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(HcpError::InvalidArgument("identity needs positive finite values".into()));
    }
    if variant == IdentityVariant::Full && k < 2 {
        return Err(HcpError::InvalidArgument("full identity needs k >= 2".into()));
    }
    let total: f64 = g.iter().sum();
    let mut sum = 0.0;
    for_each_permutation(k, |p| {
        let term = match variant {
            IdentityVariant::Chain => {
                let mut tail = total;
                let mut prod = 1.0;
                for &i in p {
                    prod *= g[i] / tail;
                    tail -= g[i];
                }
                prod
            }
            IdentityVariant::Full => {
                let mut prod = g[p[0]] / total;
                let mut tail: f64 = p[1..k - 1].iter().map(|&i| g[i]).sum();
                for &i in &p[1..k - 1] {
                    prod *= g[i] / tail;
                    tail -= g[i];
                }
                prod
            }
        };
        sum += term;
    });
    let expected = match variant {
        IdentityVariant::Chain => 1.0,
        IdentityVariant::Full => (k - 1) as f64,
    };
    Ok(IdentityCheck { sum, expected, deviation: (sum - expected).abs() })
}

pub fn binomial_std_err(p: f64, n: f64) -> f64 {
    (p * (1.0 - p) / n).sqrt()
}

/// One line of a machine-readable test report.
#[derive(Debug, Clone, Serialize)]
pub struct TestRecord {
    pub name: String,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub n: f64,
    pub passed: bool,
    pub parameters: serde_json::Value,
}

impl TestRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::Exp;

    fn exp_cdf(x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            1.0 - (-x).exp()
        }
    }

    #[test]
    fn kolmogorov_branches_agree() {
        for l in [0.9, 0.95, 1.0, 1.05] {
            let mut sum = 0.0;
            for k in 1..100 {
                let t = (-2.0 * (k * k) as f64 * l * l).exp();
                sum += if k % 2 == 1 { t } else { -t };
            }
            assert!((kolmogorov_sf(l) - 2.0 * sum).abs() < 1e-12);
        }
        assert!((ks_critical(1.0, 0.01).unwrap() * stephens(1.0) - 1.6276).abs() < 1e-3);
        assert!((ks_critical(1.0, 0.05).unwrap() * stephens(1.0) - 1.3581).abs() < 1e-3);
    }

    #[test]
    fn ks_calibration() {
        let reps = 200;
        let mut small = 0;
        for r in 0..reps {
            let mut rng = stream(42, r);
            let v: Vec<f64> = (0..10_000).map(|_| Exp::new(1.0).unwrap().sample(&mut rng)).collect();
            let res = ks_test(&SampleSet::new(v), exp_cdf).unwrap();
            assert!((0.0..=1.0).contains(&res.statistic) && (0.0..=1.0).contains(&res.p_value));
            if res.p_value < 0.05 {
                small += 1;
            }
        }
        let f = small as f64 / reps as f64;
        assert!((f - 0.05).abs() <= 0.03, "{f}");
    }

    #[test]
    fn ks_trivial_and_power() {
        let half = std::f64::consts::LN_2;
        let r = ks_test(&SampleSet::new(vec![half; 10]), exp_cdf).unwrap();
        assert!((r.statistic - 0.5).abs() < 1e-12);
        let r = ks_test(&SampleSet::new(vec![3.0; 10]), exp_cdf).unwrap();
        assert!(r.statistic >= 0.5);
        let mut rng = stream(7, 0);
        let v: Vec<f64> = (0..10_000).map(|_| Exp::new(1.0).unwrap().sample(&mut rng) + 0.1).collect();
        assert!(ks_test(&SampleSet::new(v), exp_cdf).unwrap().p_value < 1e-6);
        assert!(ks_test(&SampleSet::new(vec![]), exp_cdf).is_err());
    }

    #[test]
    fn two_sample_behaviour() {
        let mut rng = stream(9, 0);
        let a: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        let c: Vec<f64> = (0..5000).map(|_| rng.random::<f64>() + 0.1).collect();
        let same = ks_two_sample(&SampleSet::new(a.clone()), &SampleSet::new(b)).unwrap();
        assert!(same.p_value > 0.001);
        let diff = ks_two_sample(&SampleSet::new(a.clone()), &SampleSet::new(c)).unwrap();
        assert!(diff.p_value < 1e-6);
        let ident = ks_two_sample(&SampleSet::new(a.clone()), &SampleSet::new(a)).unwrap();
        assert_eq!(ident.statistic, 0.0);
    }

    #[test]
    fn weighted_ks_matches_repetition() {
        let rep = SampleSet::new(vec![0.5, 0.5, 1.0, 2.0, 2.0, 2.0]);
        let w = SampleSet::with_weights(vec![0.5, 1.0, 2.0], vec![2.0, 1.0, 3.0]).unwrap();
        let a = ks_test(&rep, exp_cdf).unwrap();
        let b = ks_test(&w, exp_cdf).unwrap();
        assert!((a.statistic - b.statistic).abs() < 1e-15);
        assert!(SampleSet::with_weights(vec![1.0], vec![-1.0]).is_err());
    }

    #[test]
    fn discrete_ks_accepts_truth_rejects_shift() {
        let pmf: Vec<(f64, f64)> = (1..=12).map(|k| (k as f64, 0.5f64.powi(k))).collect();
        let mut rng = stream(11, 0);
        let draw = |rng: &mut crate::rng::Stream, shift: f64| {
            let u: f64 = rng.random();
            let mut c = 0.0;
            for &(x, p) in &pmf {
                c += p * (1.0 - shift);
                if u < c {
                    return x;
                }
            }
            13.0
        };
        let v: Vec<f64> = (0..5000).map(|_| draw(&mut rng, 0.0)).collect();
        let r = discrete_ks_bootstrap(&SampleSet::new(v), &pmf, 499, 1).unwrap();
        assert!(r.p_value > 0.001, "{r:?}");
        let v: Vec<f64> = (0..5000).map(|_| draw(&mut rng, 0.1)).collect();
        let r = discrete_ks_bootstrap(&SampleSet::new(v), &pmf, 499, 1).unwrap();
        assert!(r.p_value < 0.01, "{r:?}");
        let again = discrete_ks_bootstrap(&SampleSet::new(vec![1.0, 2.0]), &pmf, 99, 5).unwrap();
        let twice = discrete_ks_bootstrap(&SampleSet::new(vec![1.0, 2.0]), &pmf, 99, 5).unwrap();
        assert_eq!(again, twice);
    }

    #[test]
    fn laplace_examples() {
        let ones = SampleSet::new(vec![1.0; 50]);
        let r = empirical_laplace(&ones, &[0.0, 1.0]).unwrap();
        assert_eq!(r[0].value, 1.0);
        assert!((r[1].value - (-1.0f64).exp()).abs() < 1e-15 && r[1].std_err < 1e-15);
        let mut rng = stream(3, 0);
        let v: Vec<f64> = (0..20_000).map(|_| Exp::new(1.0).unwrap().sample(&mut rng)).collect();
        let set = SampleSet::new(v.clone());
        let r = empirical_laplace(&set, &[1.0]).unwrap()[0];
        assert!((r.value - 0.5).abs() < 3.0 * r.std_err, "{r:?}");
        // jackknife of a mean reduces to the usual standard error
        let t: Vec<f64> = v.iter().map(|x| (-x).exp()).collect();
        let m = t.iter().sum::<f64>() / t.len() as f64;
        let sd = (t.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (t.len() - 1) as f64).sqrt();
        assert!((r.std_err - sd / (t.len() as f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn contingency_examples() {
        let r = chi_square_contingency(&[vec![25.0, 25.0], vec![25.0, 25.0]]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        assert!(chi_square_contingency(&[vec![10.0, 10.0]]).is_err());
        let mut rng = stream(5, 0);
        let corr: Vec<(f64, f64)> = (0..10_000).map(|_| {
            let x: f64 = rng.random();
            (x, x)
        }).collect();
        assert!(independence_test(&corr, 10).unwrap().p_value < 1e-10);
        let mut small = 0;
        for r in 0..200 {
            let mut rng = stream(17, r);
            let pairs: Vec<(f64, f64)> = (0..2000).map(|_| (rng.random(), rng.random())).collect();
            if independence_test(&pairs, 5).unwrap().p_value < 0.05 {
                small += 1;
            }
        }
        assert!((small as f64 / 200.0 - 0.05).abs() <= 0.03, "{small}");
    }

    #[test]
    fn sparse_cells_get_merged() {
        let t = vec![vec![100.0, 100.0, 1.0], vec![100.0, 100.0, 1.0], vec![1.0, 1.0, 0.0]];
        let r = chi_square_contingency(&t).unwrap();
        assert_eq!(r.shape, (2, 2));
    }

    #[test]
    fn identity_examples() {
        let r = exchangeable_identity_check(&[0.3, 2.0], IdentityVariant::Chain).unwrap();
        assert!(r.deviation < 1e-15);
        let mut rng = stream(1, 0);
        let g: Vec<f64> = (0..5).map(|_| rng.random::<f64>() + 0.01).collect();
        assert!(exchangeable_identity_check(&g, IdentityVariant::Chain).unwrap().deviation < 1e-10);
        let g: Vec<f64> = (0..4).map(|_| rng.random::<f64>() + 0.01).collect();
        let r = exchangeable_identity_check(&g, IdentityVariant::Full).unwrap();
        assert!((r.sum - 3.0).abs() < 1e-10);
        assert!(exchangeable_identity_check(&[1.0, 0.0], IdentityVariant::Chain).is_err());
        assert!(exchangeable_identity_check(&[1.0; 9], IdentityVariant::Chain).is_err());
    }

    #[test]
    fn record_serializes() {
        let r = TestRecord {
            name: "ks".into(),
            statistic: 0.1,
            p_value: Some(0.5),
            n: 10.0,
            passed: true,
            parameters: serde_json::json!({"s": 1}),
        };
        assert!(r.to_json().contains("\"name\":\"ks\""));
    }
}
