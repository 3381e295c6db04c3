//! One coalescence epoch run to its final state by discrete-event simulation.
//!
//! Orientation: a ringing domain of length `d` incorporates its left
//! neighbour with probability `lambda_right(d) / lambda(d)` and its right
//! neighbour with probability `lambda_left(d) / lambda(d)`. Incorporating the
//! left neighbour erases the domain's left endpoint. So `lambda_right == 0`
//! leaves the first point of a left-bounded configuration in place forever.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{HcpError, Result};
use crate::spp::{Boundary, IntervalConfiguration};

/// Rate profile as a function of the length `d`. `Constant` and `Linear` are
/// zero outside the active range by construction; `Table` is taken literally
/// and may therefore violate the activity assumption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum RateProfile {
    Constant { left: f64, right: f64 },
    /// `lambda_side(d) = side * d / d_min`.
    Linear { left: f64, right: f64 },
    /// Piecewise-linear in `u = d / d_min` through `(u, left, right)` rows,
    /// zero outside the first and last `u`.
    Table { rows: Vec<(f64, f64, f64)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFamily {
    pub d_min: f64,
    pub d_max: f64,
    pub profile: RateProfile,
}

impl RateFamily {
    pub fn new(d_min: f64, d_max: f64, profile: RateProfile) -> Self {
        Self { d_min, d_max, profile }
    }

    pub fn constant(d_min: f64, d_max: f64, left: f64, right: f64) -> Self {
        Self::new(d_min, d_max, RateProfile::Constant { left, right })
    }

    fn active(&self, d: f64) -> bool {
        d >= self.d_min && d < self.d_max
    }

    /// `(lambda_left(d), lambda_right(d))`.
    pub fn rates(&self, d: f64) -> (f64, f64) {
        match &self.profile {
            RateProfile::Constant { left, right } => {
                if self.active(d) {
                    (*left, *right)
                } else {
                    (0.0, 0.0)
                }
            }
            RateProfile::Linear { left, right } => {
                if self.active(d) {
                    let u = d / self.d_min;
                    (left * u, right * u)
                } else {
                    (0.0, 0.0)
                }
            }
            RateProfile::Table { rows } => table_rates(rows, d / self.d_min),
        }
    }

    pub fn lambda_left(&self, d: f64) -> f64 {
        self.rates(d).0
    }

    pub fn lambda_right(&self, d: f64) -> f64 {
        self.rates(d).1
    }

    pub fn lambda(&self, d: f64) -> f64 {
        let (l, r) = self.rates(d);
        l + r
    }

    /// Upper bound on either rate.
    pub fn rate_bound(&self) -> f64 {
        match &self.profile {
            RateProfile::Constant { left, right } => left.max(*right),
            RateProfile::Linear { left, right } => left.max(*right) * self.d_max / self.d_min,
            RateProfile::Table { rows } => rows.iter().map(|r| r.1.max(r.2)).fold(0.0, f64::max),
        }
    }

    /// Lengths straddling both ends of the active range plus an interior sweep.
    pub fn default_probe_grid(&self) -> Vec<f64> {
        let (a, b) = (self.d_min, self.d_max);
        let mut g = vec![
            a * (1.0 - 1e-9),
            a,
            a * (1.0 + 1e-9),
            b * (1.0 - 1e-9),
            b,
            b * (1.0 + 1e-9),
            2.0 * b,
        ];
        g.extend((1..64).map(|i| a + (b - a) * i as f64 / 64.0));
        g.sort_by(f64::total_cmp);
        g
    }
}

fn table_rates(rows: &[(f64, f64, f64)], u: f64) -> (f64, f64) {
    let (Some(first), Some(last)) = (rows.first(), rows.last()) else {
        return (0.0, 0.0);
    };
    if u < first.0 || u > last.0 {
        return (0.0, 0.0);
    }
    let i = rows.partition_point(|r| r.0 <= u);
    if i == 0 {
        return (first.1, first.2);
    }
    if i == rows.len() {
        return (last.1, last.2);
    }
    let (a, b) = (rows[i - 1], rows[i]);
    let t = (u - a.0) / (b.0 - a.0);
    (a.1 + t * (b.1 - a.1), a.2 + t * (b.2 - a.2))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "assumption", rename_all = "snake_case")]
pub enum Violation {
    /// Total rate vanishes at an active length.
    InactiveInRange { length: f64 },
    /// Total rate positive at an inactive length.
    ActiveOutOfRange { length: f64, rate: f64 },
    /// `2 d_min < d_max`.
    RangeTooWide { d_min: f64, d_max: f64 },
    NegativeRate { length: f64 },
    AboveBound { length: f64, rate: f64, bound: f64 },
    /// `lambda_left != gamma * lambda_right`.
    GammaMismatch { length: f64, gamma: f64, left: f64, right: f64 },
    BadRange { d_min: f64, d_max: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::InactiveInRange { length } => {
                write!(f, "(A1) total rate is zero at active length {length}")
            }
            Violation::ActiveOutOfRange { length, rate } => {
                write!(f, "(A1) total rate {rate} > 0 at inactive length {length}")
            }
            Violation::RangeTooWide { d_min, d_max } => {
                write!(f, "(A2) 2*d_min = {} < d_max = {d_max}", 2.0 * d_min)
            }
            Violation::NegativeRate { length } => write!(f, "negative rate at length {length}"),
            Violation::AboveBound { length, rate, bound } => {
                write!(f, "rate {rate} exceeds bound {bound} at length {length}")
            }
            Violation::GammaMismatch { length, gamma, left, right } => write!(
                f,
                "lambda_left = {left} != gamma*lambda_right = {} at length {length}",
                gamma * right
            ),
            Violation::BadRange { d_min, d_max } => {
                write!(f, "need 0 < d_min < d_max, got [{d_min}, {d_max})")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RateReport {
    pub violations: Vec<Violation>,
}

impl RateReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
            Err(HcpError::Rates(msgs.join("; ")))
        }
    }
}

pub fn validate_rates(rates: &RateFamily, probe_grid: &[f64]) -> RateReport {
    validate_rates_with_gamma(rates, probe_grid, None)
}

pub fn validate_rates_with_gamma(rates: &RateFamily, probe_grid: &[f64], gamma: Option<f64>) -> RateReport {
    let mut violations = Vec::new();
    if !(rates.d_min > 0.0 && rates.d_max > rates.d_min) {
        violations.push(Violation::BadRange { d_min: rates.d_min, d_max: rates.d_max });
        return RateReport { violations };
    }
    if 2.0 * rates.d_min < rates.d_max {
        violations.push(Violation::RangeTooWide { d_min: rates.d_min, d_max: rates.d_max });
    }
    let bound = rates.rate_bound();
    let mut grid = probe_grid.to_vec();
    grid.extend([rates.d_min, rates.d_max]);
    for &d in &grid {
        let (l, r) = rates.rates(d);
        if l < 0.0 || r < 0.0 || !l.is_finite() || !r.is_finite() {
            violations.push(Violation::NegativeRate { length: d });
            continue;
        }
        let total = l + r;
        if rates.active(d) && !(total > 0.0) {
            violations.push(Violation::InactiveInRange { length: d });
        }
        if !rates.active(d) && total > 0.0 {
            violations.push(Violation::ActiveOutOfRange { length: d, rate: total });
        }
        if l.max(r) > bound {
            violations.push(Violation::AboveBound { length: d, rate: l.max(r), bound });
        }
        if let Some(g) = gamma {
            if (l - g * r).abs() > 1e-12 * (1.0 + l.abs()) {
                violations.push(Violation::GammaMismatch { length: d, gamma: g, left: l, right: r });
            }
        }
    }
    RateReport { violations }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// The ringing domain absorbed its left neighbour.
    Left,
    /// The ringing domain absorbed its right neighbour.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MergeEvent {
    pub time: f64,
    /// Index of the erased point in the initial configuration.
    pub point: usize,
    pub position: f64,
    pub direction: Direction,
}

pub fn write_merge_log<W: Write>(log: &[MergeEvent], mut w: W) -> Result<()> {
    writeln!(w, "time,position,direction")?;
    for e in log {
        let dir = match e.direction {
            Direction::Left => "left",
            Direction::Right => "right",
        };
        writeln!(w, "{},{},{}", e.time, e.position, dir)?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct EpochOutcome {
    pub final_config: IntervalConfiguration,
    /// `point_alive[i]` for every point of the initial configuration.
    pub point_alive: Vec<bool>,
    pub merges: usize,
    /// Time of the last merge, 0 when nothing merged.
    pub clock: f64,
    pub log: Option<Vec<MergeEvent>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Ring {
    time: f64,
    slot: u32,
}

impl Eq for Ring {}

impl Ord for Ring {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then(self.slot.cmp(&other.slot))
    }
}

impl PartialOrd for Ring {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const NONE: u32 = u32::MAX;

pub fn run_epoch<R: Rng + ?Sized>(
    config: &IntervalConfiguration,
    rates: &RateFamily,
    rng: &mut R,
) -> Result<EpochOutcome> {
    run_epoch_inner(config, rates, rng, false)
}

pub fn run_epoch_logged<R: Rng + ?Sized>(
    config: &IntervalConfiguration,
    rates: &RateFamily,
    rng: &mut R,
) -> Result<EpochOutcome> {
    run_epoch_inner(config, rates, rng, true)
}

fn run_epoch_inner<R: Rng + ?Sized>(
    config: &IntervalConfiguration,
    rates: &RateFamily,
    rng: &mut R,
    keep_log: bool,
) -> Result<EpochOutcome> {
    let m = config.lengths.len();
    if m as u64 + 2 >= NONE as u64 {
        return Err(HcpError::InvalidArgument("too many intervals for one epoch".into()));
    }
    if let Some((index, &length)) = config
        .lengths
        .iter()
        .enumerate()
        .find(|(_, &d)| d < rates.d_min)
    {
        return Err(HcpError::StateSpace { index, length, d_min: rates.d_min });
    }
    if !(rates.d_max <= 2.0 * rates.d_min) {
        return Err(HcpError::InvalidArgument(format!(
            "(A2) d_max = {} exceeds 2 d_min = {}",
            rates.d_max,
            2.0 * rates.d_min
        )));
    }
    let periodic = config.boundary == Boundary::Periodic;
    let n_points = config.n_points();

    // Slots 1..=m hold the real domains; slot 0 and m+1 are infinite sentinels.
    let ns = m + 2;
    let mut len = vec![0.0f64; ns];
    let mut prev = vec![NONE; ns];
    let mut next = vec![NONE; ns];
    let mut left_pt = vec![NONE; ns];
    let mut intact = vec![true; ns];
    len[0] = f64::INFINITY;
    len[m + 1] = f64::INFINITY;
    for k in 0..m {
        let s = k + 1;
        len[s] = config.lengths[k];
        left_pt[s] = k as u32;
        prev[s] = (s - 1) as u32;
        next[s] = (s + 1) as u32;
    }
    if periodic {
        if m < 2 {
            return Err(HcpError::InvalidArgument("a periodic ring needs at least 2 intervals".into()));
        }
        prev[1] = m as u32;
        next[m] = 1;
    } else {
        next[0] = 1;
        prev[m + 1] = m as u32;
        left_pt[m + 1] = m as u32;
    }
    let is_sentinel = |s: usize| !periodic && (s == 0 || s == m + 1);

    let mut heap: BinaryHeap<Reverse<Ring>> = BinaryHeap::with_capacity(m);
    #[allow(clippy::needless_range_loop)]
    for s in 1..=m {
        let lam = rates.lambda(len[s]);
        if lam > 0.0 {
            let e: f64 = Exp1.sample(rng);
            heap.push(Reverse(Ring { time: e / lam, slot: s as u32 }));
        }
    }

    let positions = keep_log.then(|| config.points());
    let mut log = keep_log.then(Vec::new);
    let mut point_alive = vec![true; n_points];
    let mut merges = 0usize;
    let mut clock = 0.0;

    while let Some(Reverse(Ring { time, slot })) = heap.pop() {
        let a = slot as usize;
        if !intact[a] {
            continue;
        }
        let (l, r) = rates.rates(len[a]);
        let go_left = rng.random::<f64>() * (l + r) < r;
        // (keep, absorbed): the merged domain lives in `keep`.
        let (lo, hi) = if go_left {
            (prev[a] as usize, a)
        } else {
            (a, next[a] as usize)
        };
        let erased = left_pt[hi];
        let (keep, gone) = if is_sentinel(hi) { (hi, lo) } else { (lo, hi) };
        len[keep] += len[gone];
        if keep == hi {
            left_pt[hi] = left_pt[lo];
            prev[hi] = prev[lo];
            if prev[lo] != NONE {
                next[prev[lo] as usize] = hi as u32;
            }
        } else {
            next[lo] = next[hi];
            if next[hi] != NONE {
                prev[next[hi] as usize] = lo as u32;
            }
        }
        intact[lo] = false;
        intact[hi] = false;
        prev[gone] = NONE;
        next[gone] = NONE;
        point_alive[erased as usize] = false;
        merges += 1;
        clock = time;
        if let (Some(log), Some(pos)) = (log.as_mut(), positions.as_ref()) {
            log.push(MergeEvent {
                time,
                point: erased as usize,
                position: pos[erased as usize],
                direction: if go_left { Direction::Left } else { Direction::Right },
            });
        }
    }

    let final_config = collect_final(config, &len, &next, &left_pt, &point_alive, periodic)?;
    if let Some((i, &d)) = final_config
        .lengths
        .iter()
        .enumerate()
        .find(|(_, &d)| d < rates.d_max)
    {
        return Err(HcpError::Numerical(format!(
            "final interval {i} has length {d} below d_max = {}",
            rates.d_max
        )));
    }
    Ok(EpochOutcome { final_config, point_alive, merges, clock, log })
}

fn collect_final(
    config: &IntervalConfiguration,
    len: &[f64],
    next: &[u32],
    left_pt: &[u32],
    point_alive: &[bool],
    periodic: bool,
) -> Result<IntervalConfiguration> {
    let m = config.lengths.len();
    let mut remap = vec![NONE; point_alive.len()];
    let mut lengths = Vec::new();
    let first_pt;
    if periodic {
        let Some(start) = (0..m).find(|&i| point_alive[i]) else {
            return Err(HcpError::Numerical("periodic ring lost every point".into()));
        };
        first_pt = start;
        let start_slot = start + 1;
        let mut s = start_slot;
        loop {
            remap[left_pt[s] as usize] = lengths.len() as u32;
            lengths.push(len[s]);
            s = next[s] as usize;
            if s == start_slot {
                break;
            }
        }
    } else {
        let mut s = next[0] as usize;
        match left_pt.get(s) {
            Some(&p) if p != NONE => first_pt = p as usize,
            _ => {
                return Err(HcpError::Numerical("window lost every point".into()));
            }
        }
        while s != m + 1 {
            remap[left_pt[s] as usize] = lengths.len() as u32;
            lengths.push(len[s]);
            s = next[s] as usize;
        }
        remap[left_pt[m + 1] as usize] = lengths.len() as u32;
    }
    let first_point = config.first_point + config.lengths[..first_pt].iter().sum::<f64>();
    let marker = config
        .marker
        .and_then(|mk| (remap[mk] != NONE).then_some(remap[mk] as usize));
    if lengths.is_empty() && !periodic {
        return Ok(IntervalConfiguration { first_point, lengths, boundary: config.boundary, marker });
    }
    let mut out = IntervalConfiguration::new(first_point, lengths, config.boundary)?;
    out.marker = marker;
    Ok(out)
}

/// Observables of one epoch. Core lengths are final intervals lying entirely
/// inside the initial span shrunk by `buffer` at every open edge: both ends
/// for `Window`, the right end for `LeftBounded`, none for `Periodic`.
#[derive(Debug, Clone)]
pub struct EpochObservables {
    pub marker_survives: bool,
    pub first_point_displacement: f64,
    pub core_lengths: Vec<f64>,
}

pub fn epoch_observables(
    initial: &IntervalConfiguration,
    outcome: &EpochOutcome,
    buffer: f64,
) -> Result<EpochObservables> {
    let fin = &outcome.final_config;
    let marker_survives = initial
        .marker
        .is_some_and(|mk| outcome.point_alive.get(mk).copied().unwrap_or(false));
    let first_point_displacement = fin.first_point - initial.first_point;
    let core_lengths = core_lengths(fin, initial.first_point, initial.last_point(), buffer)?;
    Ok(EpochObservables { marker_survives, first_point_displacement, core_lengths })
}

/// Intervals of `cfg` inside `[lo + buffer_lo, hi - buffer]`, the low buffer
/// applying to two-sided windows only.
pub fn core_lengths(cfg: &IntervalConfiguration, lo: f64, hi: f64, buffer: f64) -> Result<Vec<f64>> {
    let (a, b) = match cfg.boundary {
        Boundary::Periodic => return Ok(cfg.lengths.clone()),
        Boundary::LeftBounded => (f64::NEG_INFINITY, hi - buffer),
        Boundary::Window => (lo + buffer, hi - buffer),
    };
    let mut out = Vec::new();
    let mut x = cfg.first_point;
    for &d in &cfg.lengths {
        if x >= a && x + d <= b {
            out.push(d);
        }
        x += d;
    }
    if out.is_empty() {
        return Err(HcpError::WindowExhausted {
            epoch: 0,
            reason: format!("core region is empty after a buffer of {buffer}; use a larger window"),
        });
    }
    Ok(out)
}
