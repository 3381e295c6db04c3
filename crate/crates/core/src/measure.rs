//! Truncated atomic measures and the exact epoch recursion on interval laws.
//!
//! A measure keeps its atoms at or below `l_max`; everything known to lie
//! beyond is booked in `deficit`. Measures built on a grid of step `h`
//! (positions `i * h`) use dense O(N * support) recurrences; all other
//! measures go through pairwise convolution with coalescing.

use std::io::{BufRead, Write};

use crate::error::{HcpError, Result};
use crate::hcp::EpochSchedule;
use crate::spp::IntervalLaw;

/// Relative tolerance for merging atom positions.
pub const EPS_POS: f64 = 1e-12;
/// Absolute tolerance for clamping slightly negative masses.
pub const EPS_MASS: f64 = 1e-12;
const FLUSH: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    atoms: Vec<(f64, f64)>,
    l_max: f64,
    deficit: f64,
    grid: Option<f64>,
}

fn same_position(a: f64, b: f64) -> bool {
    (a - b).abs() <= EPS_POS * a.abs().max(b.abs()).max(1.0)
}

fn grid_len(l_max: f64, step: f64) -> usize {
    (l_max / step * (1.0 + 1e-12)).floor() as usize
}

/// Smallest grid index whose position is `>= x` (up to rounding).
fn grid_ceil(x: f64, step: f64) -> usize {
    (x / step * (1.0 - 1e-12)).ceil().max(0.0) as usize
}

impl AtomicMeasure {
    /// Sorts and coalesces `atoms`; atoms beyond `l_max` move to the deficit.
    pub fn new(mut atoms: Vec<(f64, f64)>, l_max: f64, deficit: f64) -> Result<Self> {
        if !(l_max > 0.0) || deficit < 0.0 {
            return Err(HcpError::InvalidArgument(format!(
                "need l_max > 0 and deficit >= 0, got {l_max}, {deficit}"
            )));
        }
        if atoms.iter().any(|a| !a.0.is_finite() || !(a.1 >= 0.0)) {
            return Err(HcpError::InvalidArgument("atoms need finite positions and nonnegative masses".into()));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        let mut deficit = deficit;
        for (x, w) in atoms {
            if x > l_max * (1.0 + EPS_POS) {
                deficit += w;
                continue;
            }
            match out.last_mut() {
                Some(last) if same_position(last.0, x) => last.1 += w,
                _ => out.push((x, w)),
            }
        }
        out.retain(|a| a.1 > 0.0);
        Ok(Self { atoms: out, l_max, deficit, grid: None })
    }

    /// Measure with mass `masses[i]` at position `i * step`.
    pub fn from_grid(step: f64, masses: &[f64], l_max: f64, deficit: f64) -> Self {
        let n = grid_len(l_max, step);
        let mut deficit = deficit;
        let mut atoms = Vec::new();
        for (i, &w) in masses.iter().enumerate() {
            if i > n {
                deficit += w;
            } else if w > 0.0 {
                atoms.push((i as f64 * step, w));
            }
        }
        Self { atoms, l_max, deficit, grid: Some(step) }
    }

    pub fn dirac(x: f64, l_max: f64) -> Result<Self> {
        Self::new(vec![(x, 1.0)], l_max, 0.0)
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn l_max(&self) -> f64 {
        self.l_max
    }

    pub fn deficit(&self) -> f64 {
        self.deficit
    }

    pub fn grid_step(&self) -> Option<f64> {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn total(&self) -> f64 {
        self.mass() + self.deficit
    }

    /// Mass of `[lo, hi)`.
    pub fn mass_in(&self, lo: f64, hi: f64) -> f64 {
        self.atoms.iter().filter(|a| a.0 >= lo && a.0 < hi).map(|a| a.1).sum()
    }

    pub fn mass_at(&self, x: f64) -> f64 {
        self.atoms.iter().find(|a| same_position(a.0, x)).map_or(0.0, |a| a.1)
    }

    /// Restriction to `[lo, hi)`, with no deficit.
    pub fn restrict(&self, lo: f64, hi: f64) -> Self {
        Self {
            atoms: self.atoms.iter().copied().filter(|a| a.0 >= lo && a.0 < hi).collect(),
            l_max: self.l_max,
            deficit: 0.0,
            grid: self.grid,
        }
    }

    /// Image under `x -> factor * x`.
    pub fn scale_positions(&self, factor: f64) -> Self {
        match self.grid {
            Some(step) => {
                let new_step = step * factor;
                let atoms = self
                    .atoms
                    .iter()
                    .map(|&(x, w)| ((x / step).round() * new_step, w))
                    .collect();
                Self { atoms, l_max: self.l_max * factor, deficit: self.deficit, grid: Some(new_step) }
            }
            None => Self {
                atoms: self.atoms.iter().map(|&(x, w)| (x * factor, w)).collect(),
                l_max: self.l_max * factor,
                deficit: self.deficit,
                grid: None,
            },
        }
    }

    /// Same atoms, forced onto the generic (non-grid) code paths.
    pub fn without_grid(&self) -> Self {
        Self { grid: None, ..self.clone() }
    }

    /// Move every atom to the nearest multiple of `step`.
    pub fn snap_to_grid(&self, step: f64) -> Self {
        let n = grid_len(self.l_max, step);
        let mut dense = vec![0.0; n + 1];
        let mut deficit = self.deficit;
        for &(x, w) in &self.atoms {
            let i = (x / step).round() as usize;
            if i <= n {
                dense[i] += w;
            } else {
                deficit += w;
            }
        }
        Self::from_grid(step, &dense, self.l_max, deficit)
    }

    /// Dense masses indexed by grid position, up to the truncation index.
    pub fn to_dense(&self) -> Option<(f64, Vec<f64>)> {
        let step = self.grid?;
        let mut dense = vec![0.0; grid_len(self.l_max, step) + 1];
        for &(x, w) in &self.atoms {
            dense[(x / step).round() as usize] += w;
        }
        Some((step, dense))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.atoms.iter().take_while(|a| a.0 <= x).map(|a| a.1).sum()
    }

    pub fn moment(&self, k: i32) -> f64 {
        self.atoms.iter().map(|a| a.0.powi(k) * a.1).sum()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "# l_max={},deficit={}", self.l_max, self.deficit)?;
        if let Some(step) = self.grid {
            write!(w, ",grid={step}")?;
        }
        writeln!(w)?;
        writeln!(w, "position,mass")?;
        for &(x, m) in &self.atoms {
            writeln!(w, "{x},{m}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(mut r: R) -> Result<Self> {
        let mut first = String::new();
        r.read_line(&mut first)?;
        let meta = first
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| HcpError::InvalidArgument("missing measure header".into()))?;
        let (mut l_max, mut deficit, mut grid) = (None, 0.0, None);
        for kv in meta.trim().split(',') {
            let Some((k, v)) = kv.split_once('=') else { continue };
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| HcpError::InvalidArgument(format!("bad header value {kv:?}")))?;
            match k.trim() {
                "l_max" => l_max = Some(v),
                "deficit" => deficit = v,
                "grid" => grid = Some(v),
                _ => {}
            }
        }
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let mut atoms = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| HcpError::InvalidArgument("bad measure row".into()))
            };
            atoms.push((parse(0)?, parse(1)?));
        }
        let l_max = l_max.ok_or_else(|| HcpError::InvalidArgument("missing l_max".into()))?;
        let mut m = Self::new(atoms, l_max, deficit)?;
        if let Some(step) = grid {
            m = m.snap_to_grid(step);
        }
        Ok(m)
    }
}

fn compatible_grid(a: &AtomicMeasure, b: &AtomicMeasure) -> Option<f64> {
    match (a.grid, b.grid) {
        (Some(x), Some(y)) if same_position(x, y) => Some(x),
        _ => None,
    }
}

fn flush(v: &mut [f64]) {
    for x in v {
        if x.abs() < FLUSH {
            *x = 0.0;
        }
    }
}

/// Truncated product convolution of two dense arrays, result length `n + 1`.
fn dense_convolve(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    let b_last = b.iter().rposition(|&x| x != 0.0).map_or(0, |i| i + 1);
    for (i, &wa) in a.iter().enumerate() {
        if wa == 0.0 || i > n {
            continue;
        }
        let upto = (n - i + 1).min(b_last);
        let dst = &mut out[i..i + upto];
        for (o, &wb) in dst.iter_mut().zip(&b[..upto]) {
            *o += wa * wb;
        }
    }
    flush(&mut out);
    out
}

fn generic_convolve(a: &[(f64, f64)], b: &[(f64, f64)], l_max: f64) -> Vec<(f64, f64)> {
    let mut pairs = Vec::with_capacity(a.len() * b.len());
    for &(x, w) in a {
        for &(y, v) in b {
            let p = x + y;
            if p > l_max * (1.0 + EPS_POS) {
                break;
            }
            let m = w * v;
            if m >= FLUSH {
                pairs.push((p, m));
            }
        }
    }
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
    for (x, w) in pairs {
        match out.last_mut() {
            Some(last) if same_position(last.0, x) => last.1 += w,
            _ => out.push((x, w)),
        }
    }
    out
}

/// Product measure pushed through addition, truncated at the smaller `l_max`.
pub fn convolve(m1: &AtomicMeasure, m2: &AtomicMeasure) -> AtomicMeasure {
    let l_max = m1.l_max.min(m2.l_max);
    let total = m1.total() * m2.total();
    let mut out = match compatible_grid(m1, m2) {
        Some(step) => {
            let (_, a) = m1.to_dense().expect("grid");
            let (_, b) = m2.to_dense().expect("grid");
            let dense = dense_convolve(&a, &b, grid_len(l_max, step));
            AtomicMeasure::from_grid(step, &dense, l_max, 0.0)
        }
        None => AtomicMeasure {
            atoms: generic_convolve(&m1.atoms, &m2.atoms, l_max),
            l_max,
            deficit: 0.0,
            grid: None,
        },
    };
    out.deficit = (total - out.mass()).max(0.0);
    out
}

/// `exp*(h) = sum_k h^{*k} / k!` on a grid, via `n E_n = sum_k k h_k E_{n-k}`.
fn dense_exp(h: &[f64], lo: usize, n: usize) -> Vec<f64> {
    let hi = h.len();
    let mut e = vec![0.0; n + 1];
    e[0] = 1.0;
    let kh: Vec<f64> = (0..hi).map(|k| k as f64 * h[k]).collect();
    let mut zero_run = 0usize;
    for i in 1..=n {
        let mut acc = 0.0;
        let top = hi.min(i + 1);
        for k in lo..top {
            acc += kh[k] * e[i - k];
        }
        let v = acc / i as f64;
        e[i] = if v.abs() < FLUSH { 0.0 } else { v };
        if e[i] == 0.0 {
            zero_run += 1;
            if zero_run >= hi && i >= hi {
                break;
            }
        } else {
            zero_run = 0;
        }
    }
    e
}

fn generic_exp(h: &[(f64, f64)], l_max: f64) -> Vec<(f64, f64)> {
    let mut total: Vec<(f64, f64)> = vec![(0.0, 1.0)];
    let mut term: Vec<(f64, f64)> = vec![(0.0, 1.0)];
    let mut k = 1.0;
    while !term.is_empty() && !h.is_empty() {
        term = generic_convolve(&term, h, l_max);
        for a in &mut term {
            a.1 /= k;
        }
        term.retain(|a| a.1 >= FLUSH);
        total.extend_from_slice(&term);
        k += 1.0;
    }
    coalesce(total)
}

fn coalesce(mut atoms: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    for (x, w) in atoms {
        match out.last_mut() {
            Some(last) if same_position(last.0, x) => last.1 += w,
            _ => out.push((x, w)),
        }
    }
    out
}

fn clamp_mass(x: f64, w: f64) -> Result<f64> {
    if w < -EPS_MASS {
        Err(HcpError::Numerical(format!(
            "pushforward produced mass {w:e} at position {x}: cancellation failure"
        )))
    } else {
        Ok(w.max(0.0))
    }
}

/// Law of a final interval after one epoch with active range `[d_min, d_max)`:
/// `mu * exp*(h) - (exp*(h) - delta_0)` with `h` the restriction of `mu` to
/// the active range. The rates do not enter.
pub fn epoch_pushforward(mu: &AtomicMeasure, d_min: f64, d_max: f64) -> Result<AtomicMeasure> {
    if !(d_min > 0.0 && d_max > d_min) {
        return Err(HcpError::InvalidArgument(format!("bad active range [{d_min}, {d_max})")));
    }
    if 2.0 * d_min < d_max {
        return Err(HcpError::InvalidArgument(format!(
            "active range [{d_min}, {d_max}) violates 2*d_min >= d_max"
        )));
    }
    if let Some(&(x, _)) = mu.atoms.first() {
        if x < d_min * (1.0 - EPS_POS) {
            return Err(HcpError::InvalidArgument(format!(
                "measure has an atom at {x} below d_min = {d_min}"
            )));
        }
    }
    let total = mu.total();
    let mut out = match mu.grid {
        Some(step) => {
            let (_, dense) = mu.to_dense().expect("grid");
            let n = dense.len() - 1;
            let lo = grid_ceil(d_min, step).max(1);
            let hi = grid_ceil(d_max, step).min(n + 1);
            let mut h = vec![0.0; hi.max(lo)];
            h[lo..hi].copy_from_slice(&dense[lo..hi]);
            let e = if lo < hi { dense_exp(&h, lo, n) } else {
                let mut e = vec![0.0; n + 1];
                e[0] = 1.0;
                e
            };
            let conv = dense_convolve(&dense, &e, n);
            let keep_from = grid_ceil(d_max, step);
            let mut res = vec![0.0; n + 1];
            for i in 1..=n {
                let w = conv[i] - e[i];
                if i < keep_from {
                    if w.abs() > EPS_MASS {
                        return Err(HcpError::Numerical(format!(
                            "pushforward left mass {w:e} at active position {}",
                            i as f64 * step
                        )));
                    }
                    continue;
                }
                res[i] = clamp_mass(i as f64 * step, w)?;
            }
            flush(&mut res);
            AtomicMeasure::from_grid(step, &res, mu.l_max, 0.0)
        }
        None => {
            let h: Vec<(f64, f64)> =
                mu.atoms.iter().copied().filter(|a| a.0 >= d_min && a.0 < d_max).collect();
            let e = generic_exp(&h, mu.l_max);
            let conv = generic_convolve(&mu.atoms, &e, mu.l_max);
            let mut signed: Vec<(f64, f64)> = conv;
            signed.extend(e.iter().filter(|a| a.0 > 0.0).map(|&(x, w)| (x, -w)));
            let merged = coalesce(signed);
            let mut atoms = Vec::with_capacity(merged.len());
            for (x, w) in merged {
                if x < d_max * (1.0 - EPS_POS) {
                    if w.abs() > EPS_MASS {
                        return Err(HcpError::Numerical(format!(
                            "pushforward left mass {w:e} at active position {x}"
                        )));
                    }
                    continue;
                }
                let w = clamp_mass(x, w)?;
                if w >= FLUSH {
                    atoms.push((x, w));
                }
            }
            AtomicMeasure { atoms, l_max: mu.l_max, deficit: 0.0, grid: None }
        }
    };
    out.deficit = (total - out.mass()).max(0.0);
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct IterateOptions {
    /// Deficit above which a warning (or, when strict, an error) is raised.
    pub deficit_tolerance: f64,
    pub strict: bool,
}

impl Default for IterateOptions {
    fn default() -> Self {
        Self { deficit_tolerance: 1e-6, strict: false }
    }
}

#[derive(Debug, Clone)]
pub struct HcpMeasures {
    /// `measures[n-1]` is the law of an epoch-`n` starting interval.
    pub measures: Vec<AtomicMeasure>,
    /// `active_mass[n-1] = mu^(n)([d^(n), d^(n+1)))`.
    pub active_mass: Vec<f64>,
    pub warnings: Vec<String>,
}

pub fn iterate_hcp_measures(
    mu1: &AtomicMeasure,
    schedule: &EpochSchedule,
    n_epochs: usize,
    opts: IterateOptions,
) -> Result<HcpMeasures> {
    if n_epochs == 0 {
        return Err(HcpError::InvalidArgument("n_epochs must be at least 1".into()));
    }
    schedule.validate_thresholds(n_epochs)?;
    let mut measures = Vec::with_capacity(n_epochs);
    let mut active_mass = Vec::with_capacity(n_epochs);
    let mut warnings = Vec::new();
    let mut mu = mu1.clone();
    for n in 1..=n_epochs {
        let (lo, hi) = (schedule.threshold(n)?, schedule.threshold(n + 1)?);
        if mu.deficit > opts.deficit_tolerance {
            let msg = format!(
                "epoch {n}: truncation deficit {:e} exceeds {:e}; raise l_max",
                mu.deficit, opts.deficit_tolerance
            );
            if opts.strict {
                return Err(HcpError::Truncation(msg));
            }
            warnings.push(msg);
        }
        active_mass.push(mu.mass_in(lo, hi));
        let next = if n < n_epochs { Some(epoch_pushforward(&mu, lo, hi)?) } else { None };
        measures.push(mu);
        match next {
            Some(m) => mu = m,
            None => break,
        }
    }
    Ok(HcpMeasures { measures, active_mass, warnings })
}

/// `P(X_0^(n+1) = X_0^(1)) = exp(-(h_1 + ... + h_n) / (1 + gamma))`.
pub fn survival_probability_exact(h_masses: &[f64], n: usize, gamma: f64) -> Result<f64> {
    if n > h_masses.len() {
        return Err(HcpError::InvalidArgument(format!(
            "need {n} active masses, only {} available",
            h_masses.len()
        )));
    }
    if !(gamma >= 0.0) {
        return Err(HcpError::InvalidArgument(format!("gamma = {gamma} must be >= 0")));
    }
    let s: f64 = h_masses[..n].iter().sum();
    if gamma.is_infinite() {
        return Ok(1.0);
    }
    Ok((-s / (1.0 + gamma)).exp())
}

/// Recover `m` on `[1, j_max)` from `p = sum_k (-1)^{k+1} m^{*k} / k!`.
pub fn deconvolve_m(p: &AtomicMeasure, j_max: f64) -> Result<AtomicMeasure> {
    if let Some(&(x, _)) = p.atoms.first() {
        if x < 1.0 - EPS_POS {
            return Err(HcpError::InvalidArgument(format!(
                "law has an atom at {x} below 1"
            )));
        }
    }
    if j_max > p.l_max * (1.0 + EPS_POS) + p.grid.unwrap_or(0.0) {
        return Err(HcpError::Truncation(format!(
            "j_max = {j_max} exceeds the measure's truncation {}",
            p.l_max
        )));
    }
    match p.grid {
        Some(step) => deconvolve_dense(p, step, j_max),
        None => deconvolve_generic(p, j_max),
    }
}

fn check_m(x: f64, w: f64) -> Result<f64> {
    if w < -EPS_MASS {
        Err(HcpError::Numerical(format!(
            "recovered m has negative mass {w:e} at {x}: not a valid law for this decomposition"
        )))
    } else {
        Ok(w.max(0.0))
    }
}

/// Power-series logarithm: `M = -log(1 - P)`, i.e.
/// `n M_n = n p_n + sum_j p_j (n - j) M_{n-j}`.
fn deconvolve_dense(p: &AtomicMeasure, step: f64, j_max: f64) -> Result<AtomicMeasure> {
    let (_, dense) = p.to_dense().expect("grid");
    let n_top = grid_ceil(j_max, step).saturating_sub(1).min(dense.len() - 1);
    let support: Vec<(usize, f64)> = dense
        .iter()
        .enumerate()
        .take(n_top + 1)
        .filter(|(_, &w)| w > 0.0)
        .map(|(i, &w)| (i, w))
        .collect();
    let mut m = vec![0.0; n_top + 1];
    for n in 1..=n_top {
        let mut acc = n as f64 * dense[n];
        for &(j, pj) in &support {
            if j >= n {
                break;
            }
            acc += pj * (n - j) as f64 * m[n - j];
        }
        let v = acc / n as f64;
        m[n] = if v < FLUSH { 0.0 } else { v };
    }
    for (i, &w) in m.iter().enumerate() {
        check_m(i as f64 * step, w)?;
    }
    Ok(AtomicMeasure::from_grid(step, &m, j_max, 0.0))
}

fn truncate_below(atoms: &[(f64, f64)], limit: f64) -> Vec<(f64, f64)> {
    atoms.iter().copied().filter(|a| a.0 < limit * (1.0 - EPS_POS)).collect()
}

fn deconvolve_generic(p: &AtomicMeasure, j_max: f64) -> Result<AtomicMeasure> {
    let mut m: Vec<(f64, f64)> = Vec::new();
    let mut j = 1.0f64;
    while j < j_max {
        let upper = (j + 1.0).min(j_max);
        let mut cell: Vec<(f64, f64)> = p
            .atoms
            .iter()
            .copied()
            .filter(|a| a.0 >= j * (1.0 - EPS_POS) && a.0 < upper * (1.0 - EPS_POS))
            .collect();
        // m^{*k} on [j, j+1) only involves atoms of m already recovered.
        let mut power = m.clone();
        let mut fact = 1.0;
        let mut k = 2;
        while (k as f64) < upper {
            power = truncate_below(&generic_convolve(&power, &m, upper), upper);
            fact *= k as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            cell.extend(
                power
                    .iter()
                    .filter(|a| a.0 >= j * (1.0 - EPS_POS))
                    .map(|&(x, w)| (x, sign * w / fact)),
            );
            k += 1;
        }
        for (x, w) in coalesce(cell) {
            let w = check_m(x, w)?;
            if w >= FLUSH {
                m.push((x, w));
            }
        }
        j += 1.0;
    }
    Ok(AtomicMeasure { atoms: m, l_max: j_max, deficit: 0.0, grid: None })
}

/// `sum_k (-1)^{k+1} m^{*k} / k!` on `[1, j_max)`.
pub fn reassemble_from_m(m: &AtomicMeasure, j_max: f64) -> AtomicMeasure {
    match m.grid {
        Some(step) => {
            // 1 - exp(-M) through the same exponential recurrence.
            let (_, dense) = m.to_dense().expect("grid");
            let n = grid_ceil(j_max, step).saturating_sub(1).min(dense.len() - 1);
            let neg: Vec<f64> = dense[..=n].iter().map(|w| -w).collect();
            let lo = neg.iter().position(|&w| w != 0.0).unwrap_or(n + 1);
            let mut e = vec![0.0; n + 1];
            e[0] = 1.0;
            for i in 1..=n {
                let mut acc = 0.0;
                for k in lo..=i {
                    acc += k as f64 * neg[k] * e[i - k];
                }
                e[i] = acc / i as f64;
            }
            let p: Vec<f64> = e.iter().enumerate().map(|(i, &w)| if i == 0 { 0.0 } else { -w }).collect();
            AtomicMeasure::from_grid(step, &p, j_max, 0.0)
        }
        None => {
            let mut total: Vec<(f64, f64)> = Vec::new();
            let mut power = truncate_below(&m.atoms, j_max);
            let mut fact = 1.0;
            let mut k = 1;
            while !power.is_empty() {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                total.extend(power.iter().map(|&(x, w)| (x, sign * w / fact)));
                k += 1;
                fact *= k as f64;
                power = truncate_below(&generic_convolve(&power, &m.atoms, j_max), j_max);
            }
            let atoms = coalesce(total).into_iter().filter(|a| a.1.abs() > 0.0).collect();
            AtomicMeasure { atoms, l_max: j_max, deficit: 0.0, grid: None }
        }
    }
}

/// Right-continuous nondecreasing step function `U(x) = sum_{y <= 1 + x} y m({y})`,
/// known for `x < x_limit`.
#[derive(Debug, Clone)]
pub struct StepFunction {
    /// `(y, cumulative weight through y)` for atoms `y` of `m`.
    jumps: Vec<(f64, f64)>,
    /// `m` is known on `[1, j_max)`.
    j_max: f64,
}

pub fn u1_from_m(m: &AtomicMeasure) -> StepFunction {
    let mut acc = 0.0;
    let jumps = m
        .atoms
        .iter()
        .map(|&(y, w)| {
            acc += y * w;
            (y, acc)
        })
        .collect();
    StepFunction { jumps, j_max: m.l_max }
}

impl StepFunction {
    pub fn j_max(&self) -> f64 {
        self.j_max
    }

    fn check(&self, x: f64) -> Result<()> {
        if 1.0 + x >= self.j_max * (1.0 - EPS_POS) {
            Err(HcpError::Truncation(format!(
                "evaluating U at {x} needs m on [1, {}); recompute with j_max > {}",
                1.0 + x,
                (1.0 + x).floor() + 1.0
            )))
        } else {
            Ok(())
        }
    }

    /// `U(x)`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Ok(0.0);
        }
        self.check(x)?;
        let t = (1.0 + x) * (1.0 + EPS_POS);
        let i = self.jumps.partition_point(|j| j.0 <= t);
        Ok(if i == 0 { 0.0 } else { self.jumps[i - 1].1 })
    }

    /// `U(x-)`.
    pub fn eval_left(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        self.check(x)?;
        let t = (1.0 + x) * (1.0 - EPS_POS);
        let i = self.jumps.partition_point(|j| j.0 < t);
        Ok(if i == 0 { 0.0 } else { self.jumps[i - 1].1 })
    }
}

/// `U^(n)(x) = [U(d (1 + x) - 1) - U((d - 1)-)] / d`.
pub fn un_transport(u1: &StepFunction, d_n: f64, x: f64) -> Result<f64> {
    if !(d_n >= 1.0) || !(x >= 0.0) {
        return Err(HcpError::InvalidArgument(format!("need d_n >= 1 and x >= 0, got {d_n}, {x}")));
    }
    let hi = u1.eval(d_n * (1.0 + x) - 1.0)?;
    let lo = u1.eval_left(d_n - 1.0)?;
    Ok(((hi - lo) / d_n).max(0.0))
}

/// Smallest `j_max` for which `un_transport` can reach `x` at every `d`.
pub fn required_j_max(d: &[f64], x: f64) -> f64 {
    let top = d.iter().fold(0.0f64, |a, &dn| a.max(dn * (1.0 + x)));
    top.floor() + 1.0
}

/// `U^(n)(x)` for every threshold in `d`, from the law `p` of `Z^(1)`.
pub fn un_sequence(p: &AtomicMeasure, d: &[f64], x: f64) -> Result<Vec<f64>> {
    let j_max = required_j_max(d, x);
    if p.l_max < j_max {
        return Err(HcpError::Truncation(format!(
            "law known up to {} but the requested thresholds need j_max = {j_max}",
            p.l_max
        )));
    }
    let m = deconvolve_m(p, j_max)?;
    let u1 = u1_from_m(&m);
    d.iter().map(|&dn| un_transport(&u1, dn, x)).collect()
}

/// Exponential-geometric law truncated at `l_max` and rounded to multiples
/// of `step`.
pub fn exp_geometric_on_grid(q: f64, step: f64, l_max: f64) -> Result<AtomicMeasure> {
    if !(step > 0.0 && l_max > std::f64::consts::E) {
        return Err(HcpError::InvalidArgument(format!("need step > 0 and l_max > e, got {step}, {l_max}")));
    }
    let k = l_max.ln().floor() as usize + 1;
    let law = exp_geometric_law(q, k)?;
    let cut = AtomicMeasure::new(law.atoms.clone(), l_max, law.deficit)?;
    Ok(cut.snap_to_grid(step))
}

pub trait LaplaceTransform {
    /// `E[exp(-s Z)]`.
    fn g(&self, s: f64) -> f64;
    /// `1 - g(s)`, evaluated without cancellation.
    fn one_minus_g(&self, s: f64) -> f64;
    /// `-s g'(s) = s E[Z exp(-s Z)]`.
    fn minus_s_dg(&self, s: f64) -> f64;
}

impl LaplaceTransform for AtomicMeasure {
    fn g(&self, s: f64) -> f64 {
        self.atoms.iter().map(|&(x, w)| w * (-s * x).exp()).sum()
    }

    fn one_minus_g(&self, s: f64) -> f64 {
        self.atoms.iter().map(|&(x, w)| -w * (-s * x).exp_m1()).sum::<f64>() + self.deficit
    }

    fn minus_s_dg(&self, s: f64) -> f64 {
        s * self.atoms.iter().map(|&(x, w)| x * w * (-s * x).exp()).sum::<f64>()
    }
}

/// Pareto law with tail `x^(-alpha)` on `[1, inf)`, `0 < alpha < 1`.
#[derive(Debug, Clone, Copy)]
pub struct ParetoTransform {
    pub alpha: f64,
}

impl ParetoTransform {
    /// `s^alpha * Gamma(1 - alpha, s)`.
    fn tail_term(&self, s: f64) -> f64 {
        let a = 1.0 - self.alpha;
        let upper = if (self.alpha - 0.5).abs() < 1e-15 {
            std::f64::consts::PI.sqrt() * statrs::function::erf::erfc(s.sqrt())
        } else {
            statrs::function::gamma::gamma_ur(a, s) * statrs::function::gamma::gamma(a)
        };
        s.powf(self.alpha) * upper
    }
}

impl LaplaceTransform for ParetoTransform {
    fn g(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 1.0;
        }
        (-s).exp() - self.tail_term(s)
    }

    fn one_minus_g(&self, s: f64) -> f64 {
        -(-s).exp_m1() + self.tail_term(s)
    }

    fn minus_s_dg(&self, s: f64) -> f64 {
        self.alpha * self.tail_term(s)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct C0Options {
    /// Number of decades at the small-`s` end used to judge convergence.
    pub tail_decades: f64,
    /// Largest tolerated non-monotone variation of the ratio over the tail.
    pub tolerance: f64,
}

impl Default for C0Options {
    fn default() -> Self {
        Self { tail_decades: 3.0, tolerance: 1e-5 }
    }
}

#[derive(Debug, Clone)]
pub struct C0Estimate {
    pub estimate: f64,
    pub converged: bool,
    /// Variation of the ratio over the tail beyond its net drift.
    pub oscillation: f64,
    pub trace: Vec<(f64, f64)>,
}

/// `n` points per decade from `s_max` down to `s_min`.
pub fn log_grid(s_max: f64, s_min: f64, per_decade: usize) -> Vec<f64> {
    let decades = (s_max / s_min).log10();
    let n = (decades * per_decade as f64).round() as usize;
    (0..=n).map(|i| s_max * 10f64.powf(-(i as f64) / per_decade as f64)).collect()
}

/// Track `r(s) = -s g'(s) / (1 - g(s))` as `s` decreases.
pub fn c0_estimate<T: LaplaceTransform + ?Sized>(g: &T, s_grid: &[f64], opts: C0Options) -> Result<C0Estimate> {
    if s_grid.is_empty() {
        return Err(HcpError::InvalidArgument("empty s grid".into()));
    }
    if let Some(s) = s_grid.iter().find(|&&s| !(s > 0.0)) {
        return Err(HcpError::InvalidArgument(format!(
            "s = {s} in grid: the ratio is only defined for s > 0"
        )));
    }
    let mut grid = s_grid.to_vec();
    grid.sort_by(|a, b| b.total_cmp(a));
    let trace: Vec<(f64, f64)> = grid
        .iter()
        .map(|&s| (s, (g.minus_s_dg(s) / g.one_minus_g(s)).clamp(0.0, 1.0)))
        .collect();
    let s_min = grid[grid.len() - 1];
    let tail: Vec<f64> = trace
        .iter()
        .filter(|t| t.0 <= s_min * 10f64.powf(opts.tail_decades))
        .map(|t| t.1)
        .collect();
    let tv: f64 = tail.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let net = (tail[tail.len() - 1] - tail[0]).abs();
    let oscillation = tv - net;
    Ok(C0Estimate {
        estimate: tail[tail.len() - 1],
        converged: oscillation <= opts.tolerance,
        oscillation,
        trace,
    })
}

/// `X = e^G`, `P(G = k) = (1 - q) q^(k-1)`, truncated after `k_atoms` atoms.
pub fn exp_geometric_law(q: f64, k_atoms: usize) -> Result<AtomicMeasure> {
    if !(q > 0.0 && q < 1.0) || k_atoms == 0 {
        return Err(HcpError::InvalidArgument(format!(
            "need 0 < q < 1 and k >= 1, got q = {q}, k = {k_atoms}"
        )));
    }
    let p = 1.0 - q;
    let atoms: Vec<(f64, f64)> = (1..=k_atoms)
        .map(|k| ((k as f64).exp(), p * q.powi(k as i32 - 1)))
        .collect();
    let l_max = (k_atoms as f64).exp();
    AtomicMeasure::new(atoms, l_max, q.powi(k_atoms as i32))
}

/// Infinite-mean member of the exponential-geometric family, parameterized
/// by `p` with `lambda = -ln(1 - p) < 1`.
pub fn appendix_b_law(p: f64, k_atoms: usize) -> Result<AtomicMeasure> {
    if !(p > 0.0 && p < 1.0) {
        return Err(HcpError::InvalidArgument(format!("p = {p} outside (0,1)")));
    }
    let lambda = -(1.0 - p).ln();
    if lambda >= 1.0 {
        return Err(HcpError::InvalidArgument(format!(
            "lambda = {lambda} >= 1 gives a finite mean; the non-convergent regime needs lambda < 1"
        )));
    }
    exp_geometric_law(1.0 - p, k_atoms)
}

/// Atomic version of an interval law. Continuous laws need `step`: the mass
/// of `[i h, (i+1) h)` is placed at `i h`.
pub fn law_to_measure(law: &IntervalLaw, step: Option<f64>, l_max: f64) -> Result<AtomicMeasure> {
    law.validate()?;
    let m = match (law, step) {
        (IntervalLaw::Dirac { value }, _) => AtomicMeasure::new(vec![(*value, 1.0)], l_max, 0.0)?,
        (IntervalLaw::Discrete { atoms }, _) => AtomicMeasure::new(atoms.clone(), l_max, 0.0)?,
        (IntervalLaw::Geometric { q }, _) => {
            let n = l_max.floor() as usize;
            let mut dense = vec![0.0; n + 1];
            let mut w = 1.0 - q;
            let mut k = 1;
            while k <= n && w >= FLUSH {
                dense[k] = w;
                w *= q;
                k += 1;
            }
            let deficit = if k > n { q.powi(n as i32) } else { 0.0 };
            AtomicMeasure::from_grid(1.0, &dense, l_max, deficit)
        }
        (IntervalLaw::ExpGeometric { q }, _) => {
            let k = (l_max.ln().floor() as usize).max(1);
            let m = exp_geometric_law(*q, k)?;
            AtomicMeasure { l_max, ..m }
        }
        (_, Some(h)) => {
            let n = grid_len(l_max, h);
            let mut dense = vec![0.0; n + 1];
            let start = (law.support_min() / h * (1.0 + 1e-12)).floor() as usize;
            for (i, slot) in dense.iter_mut().enumerate().skip(start) {
                let a = i as f64 * h;
                *slot = (law.cdf(a + h) - law.cdf(a)).max(0.0);
            }
            let deficit = 1.0 - law.cdf((n + 1) as f64 * h);
            AtomicMeasure::from_grid(h, &dense, l_max, deficit.max(0.0))
        }
        (_, None) => {
            return Err(HcpError::InvalidArgument(
                "continuous interval laws need a grid step for analytics".into(),
            ))
        }
    };
    Ok(match (step, m.grid) {
        (Some(h), None) => m.snap_to_grid(h),
        (Some(h), Some(g)) if !same_position(h, g) => m.snap_to_grid(h),
        _ => m,
    })
}
