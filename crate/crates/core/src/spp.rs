//! Finite realizations of simple point processes on the line and samplers
//! for renewal initial conditions.

use std::io::{BufRead, Write};

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{HcpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Semi-infinite inactive domain to the left of `first_point`, open window to the right.
    LeftBounded,
    /// Circle of circumference `sum(lengths)`; `first_point` is a reference marker.
    Periodic,
    /// Two-sided window with inactive sentinel domains outside.
    Window,
}

impl Boundary {
    fn tag(self) -> &'static str {
        match self {
            Boundary::LeftBounded => "left_bounded",
            Boundary::Periodic => "periodic",
            Boundary::Window => "window",
        }
    }

    fn from_tag(s: &str) -> Option<Self> {
        match s {
            "left_bounded" => Some(Boundary::LeftBounded),
            "periodic" => Some(Boundary::Periodic),
            "window" => Some(Boundary::Window),
            _ => None,
        }
    }
}

/// Points are `x_0 = first_point` and `x_k = x_{k-1} + lengths[k-1]`.
///
/// `marker` optionally names one point (by index) whose identity is tracked
/// through coalescence, e.g. the point sitting at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalConfiguration {
    pub first_point: f64,
    pub lengths: Vec<f64>,
    pub boundary: Boundary,
    pub marker: Option<usize>,
}

impl IntervalConfiguration {
    pub fn new(first_point: f64, lengths: Vec<f64>, boundary: Boundary) -> Result<Self> {
        if !first_point.is_finite() {
            return Err(HcpError::InvalidArgument("first_point must be finite".into()));
        }
        if let Some((i, &d)) = lengths
            .iter()
            .enumerate()
            .find(|(_, d)| !(d.is_finite() && **d > 0.0))
        {
            return Err(HcpError::InvalidArgument(format!(
                "interval {i} has non-positive or non-finite length {d}"
            )));
        }
        Ok(Self { first_point, lengths, boundary, marker: None })
    }

    pub fn with_marker(mut self, marker: usize) -> Self {
        self.marker = Some(marker);
        self
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    /// Number of distinct points represented.
    pub fn n_points(&self) -> usize {
        match self.boundary {
            Boundary::Periodic => self.lengths.len(),
            _ => self.lengths.len() + 1,
        }
    }

    pub fn total_length(&self) -> f64 {
        self.lengths.iter().sum()
    }

    pub fn points(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.lengths.len() + 1);
        let mut x = self.first_point;
        out.push(x);
        for &d in &self.lengths {
            x += d;
            out.push(x);
        }
        if self.boundary == Boundary::Periodic {
            out.pop();
        }
        out
    }

    pub fn last_point(&self) -> f64 {
        self.first_point + self.total_length()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "# boundary={},first_point={}", self.boundary.tag(), self.first_point)?;
        if let Some(m) = self.marker {
            write!(w, ",marker={m}")?;
        }
        writeln!(w)?;
        writeln!(w, "index,left,length")?;
        let mut x = self.first_point;
        for (i, &d) in self.lengths.iter().enumerate() {
            writeln!(w, "{i},{x},{d}")?;
            x += d;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(mut r: R) -> Result<Self> {
        let mut first = String::new();
        r.read_line(&mut first)?;
        let meta = first
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| HcpError::InvalidArgument("missing boundary line".into()))?;
        let mut boundary = None;
        let mut first_point = None;
        let mut marker = None;
        for kv in meta.trim().split(',') {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| HcpError::InvalidArgument(format!("bad field {kv:?}")))?;
            let bad = || HcpError::InvalidArgument(format!("bad value for {k}: {v:?}"));
            match k.trim() {
                "boundary" => boundary = Some(Boundary::from_tag(v.trim()).ok_or_else(bad)?),
                "first_point" => first_point = Some(v.trim().parse::<f64>().map_err(|_| bad())?),
                "marker" => marker = Some(v.trim().parse::<usize>().map_err(|_| bad())?),
                _ => {}
            }
        }
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let mut lengths = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let d: f64 = rec
                .get(2)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| HcpError::InvalidArgument("bad length column".into()))?;
            lengths.push(d);
        }
        let mut cfg = Self::new(
            first_point.ok_or_else(|| HcpError::InvalidArgument("missing first_point".into()))?,
            lengths,
            boundary.ok_or_else(|| HcpError::InvalidArgument("missing boundary".into()))?,
        )?;
        cfg.marker = marker;
        Ok(cfg)
    }
}

/// Law of a single interval length.
///
/// `Geometric { q }` has pmf `(1-q) q^(k-1)` on `{1, 2, ...}`, mean `1/(1-q)`.
/// `ExpGeometric { q }` is `e^G` with `G ~ Geometric { q }`.
/// `Pareto { x_min, alpha }` has tail `(x/x_min)^(-alpha)` on `[x_min, inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum IntervalLaw {
    Dirac { value: f64 },
    Geometric { q: f64 },
    Exponential {
        rate: f64,
        #[serde(default)]
        shift: f64,
    },
    Uniform { low: f64, high: f64 },
    Pareto { x_min: f64, alpha: f64 },
    ExpGeometric { q: f64 },
    Discrete { atoms: Vec<(f64, f64)> },
}

impl IntervalLaw {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HcpError::InvalidArgument(msg));
        match self {
            IntervalLaw::Dirac { value } if !(*value > 0.0 && value.is_finite()) => {
                bad(format!("dirac value {value} must be positive"))
            }
            IntervalLaw::Geometric { q } | IntervalLaw::ExpGeometric { q }
                if !(0.0..1.0).contains(q) =>
            {
                bad(format!("geometric q = {q} outside [0,1)"))
            }
            IntervalLaw::Exponential { rate, shift } if !(*rate > 0.0 && *shift >= 0.0) => {
                bad(format!("exponential needs rate > 0 and shift >= 0, got {rate}, {shift}"))
            }
            IntervalLaw::Uniform { low, high } if !(*low > 0.0 && high > low) => {
                bad(format!("uniform needs 0 < low < high, got [{low}, {high}]"))
            }
            IntervalLaw::Pareto { x_min, alpha } if !(*x_min > 0.0 && *alpha > 0.0) => {
                bad(format!("pareto needs x_min > 0 and alpha > 0, got {x_min}, {alpha}"))
            }
            IntervalLaw::Discrete { atoms } => {
                if atoms.is_empty() {
                    return bad("discrete law has no atoms".into());
                }
                if atoms.iter().any(|&(x, w)| !(x > 0.0) || w < 0.0) {
                    return bad("discrete atoms need positive positions and nonnegative weights".into());
                }
                let total: f64 = atoms.iter().map(|a| a.1).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return bad(format!("discrete weights sum to {total}, not 1"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `None` when the mean is infinite.
    pub fn mean(&self) -> Option<f64> {
        match *self {
            IntervalLaw::Dirac { value } => Some(value),
            IntervalLaw::Geometric { q } => Some(1.0 / (1.0 - q)),
            IntervalLaw::Exponential { rate, shift } => Some(shift + 1.0 / rate),
            IntervalLaw::Uniform { low, high } => Some(0.5 * (low + high)),
            IntervalLaw::Pareto { x_min, alpha } => {
                (alpha > 1.0).then(|| alpha * x_min / (alpha - 1.0))
            }
            IntervalLaw::ExpGeometric { q } => {
                let e = std::f64::consts::E;
                (q * e < 1.0).then(|| (1.0 - q) * e / (1.0 - q * e))
            }
            IntervalLaw::Discrete { ref atoms } => Some(atoms.iter().map(|&(x, w)| x * w).sum()),
        }
    }

    /// Smallest point of the support.
    pub fn support_min(&self) -> f64 {
        match *self {
            IntervalLaw::Dirac { value } => value,
            IntervalLaw::Geometric { .. } => 1.0,
            IntervalLaw::Exponential { shift, .. } => shift,
            IntervalLaw::Uniform { low, .. } => low,
            IntervalLaw::Pareto { x_min, .. } => x_min,
            IntervalLaw::ExpGeometric { .. } => std::f64::consts::E,
            IntervalLaw::Discrete { ref atoms } => atoms
                .iter()
                .filter(|a| a.1 > 0.0)
                .map(|a| a.0)
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(
            self,
            IntervalLaw::Dirac { .. }
                | IntervalLaw::Geometric { .. }
                | IntervalLaw::ExpGeometric { .. }
                | IntervalLaw::Discrete { .. }
        )
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            IntervalLaw::Dirac { value } => (x >= value) as u8 as f64,
            IntervalLaw::Geometric { q } => {
                if x < 1.0 {
                    0.0
                } else {
                    1.0 - q.powf(x.floor())
                }
            }
            IntervalLaw::Exponential { rate, shift } => {
                if x <= shift {
                    0.0
                } else {
                    -(-rate * (x - shift)).exp_m1()
                }
            }
            IntervalLaw::Uniform { low, high } => ((x - low) / (high - low)).clamp(0.0, 1.0),
            IntervalLaw::Pareto { x_min, alpha } => {
                if x <= x_min {
                    0.0
                } else {
                    1.0 - (x / x_min).powf(-alpha)
                }
            }
            IntervalLaw::ExpGeometric { q } => {
                if x < std::f64::consts::E {
                    0.0
                } else {
                    let k = (x.ln() + 1e-12).floor();
                    1.0 - q.powf(k)
                }
            }
            IntervalLaw::Discrete { ref atoms } => {
                atoms.iter().filter(|a| a.0 <= x).map(|a| a.1).sum::<f64>().min(1.0)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            IntervalLaw::Dirac { value } => value,
            IntervalLaw::Geometric { q } => geometric(q, rng) as f64,
            IntervalLaw::Exponential { rate, shift } => {
                let e: f64 = Exp1.sample(rng);
                shift + e / rate
            }
            IntervalLaw::Uniform { low, high } => rng.random_range(low..high),
            IntervalLaw::Pareto { x_min, alpha } => {
                let u: f64 = 1.0 - rng.random::<f64>();
                x_min * u.powf(-1.0 / alpha)
            }
            IntervalLaw::ExpGeometric { q } => (geometric(q, rng) as f64).exp(),
            IntervalLaw::Discrete { ref atoms } => {
                let idx = WeightedIndex::new(atoms.iter().map(|a| a.1))
                    .expect("validated weights")
                    .sample(rng);
                atoms[idx].0
            }
        }
    }

    /// Sample from the length-biased law `t mu(dt) / mean`.
    pub fn sample_size_biased<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let mean = self.mean().ok_or_else(|| {
            HcpError::InvalidArgument(
                "stationary renewal with infinite mean interval law cannot exist".into(),
            )
        })?;
        Ok(match *self {
            IntervalLaw::Dirac { value } => value,
            IntervalLaw::Geometric { q } => (geometric(q, rng) + geometric(q, rng) - 1) as f64,
            IntervalLaw::Exponential { rate, shift } => {
                let p_plain = shift / mean;
                if rng.random::<f64>() < p_plain {
                    let e: f64 = Exp1.sample(rng);
                    shift + e / rate
                } else {
                    let g: f64 = Gamma::new(2.0, 1.0 / rate).expect("positive rate").sample(rng);
                    shift + g
                }
            }
            IntervalLaw::Uniform { low, high } => {
                let u: f64 = rng.random();
                (low * low + u * (high * high - low * low)).sqrt()
            }
            IntervalLaw::Pareto { x_min, alpha } => {
                let u: f64 = 1.0 - rng.random::<f64>();
                x_min * u.powf(-1.0 / (alpha - 1.0))
            }
            IntervalLaw::ExpGeometric { q } => {
                (geometric(q * std::f64::consts::E, rng) as f64).exp()
            }
            IntervalLaw::Discrete { ref atoms } => {
                let idx = WeightedIndex::new(atoms.iter().map(|a| a.0 * a.1))
                    .expect("validated weights")
                    .sample(rng);
                atoms[idx].0
            }
        })
    }
}

/// Geometric on `{1, 2, ...}` with continuation probability `q`.
fn geometric<R: Rng + ?Sized>(q: f64, rng: &mut R) -> u64 {
    if q <= 0.0 {
        return 1;
    }
    let u: f64 = 1.0 - rng.random::<f64>();
    1 + (u.ln() / q.ln()).floor() as u64
}

/// Law of the first point of a left-bounded configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PointLaw {
    Dirac { value: f64 },
    Uniform { low: f64, high: f64 },
}

impl Default for PointLaw {
    fn default() -> Self {
        PointLaw::Dirac { value: 0.0 }
    }
}

impl PointLaw {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            PointLaw::Dirac { value } => value,
            PointLaw::Uniform { low, high } => rng.random_range(low..high),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub law: IntervalLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RenewalSpec {
    LeftBounded {
        #[serde(default)]
        first_point: PointLaw,
        law: IntervalLaw,
    },
    ContainsOrigin { law: IntervalLaw },
    Stationary { law: IntervalLaw },
    LatticeStationary { law: IntervalLaw },
    ExchangeableMixture { components: Vec<MixtureComponent> },
}

impl RenewalSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            RenewalSpec::LeftBounded { law, .. } | RenewalSpec::ContainsOrigin { law } => {
                law.validate()
            }
            RenewalSpec::Stationary { law } => {
                law.validate()?;
                law.mean().map(|_| ()).ok_or_else(|| {
                    HcpError::InvalidArgument(
                        "stationary renewal with infinite mean interval law cannot exist".into(),
                    )
                })
            }
            RenewalSpec::LatticeStationary { law } => {
                law.validate()?;
                check_lattice(law)?;
                law.mean().map(|_| ()).ok_or_else(|| {
                    HcpError::InvalidArgument(
                        "stationary renewal with infinite mean interval law cannot exist".into(),
                    )
                })
            }
            RenewalSpec::ExchangeableMixture { components } => validate_mixture(components),
        }
    }

    /// Smallest possible interval length.
    pub fn support_min(&self) -> f64 {
        match self {
            RenewalSpec::LeftBounded { law, .. }
            | RenewalSpec::ContainsOrigin { law }
            | RenewalSpec::Stationary { law }
            | RenewalSpec::LatticeStationary { law } => law.support_min(),
            RenewalSpec::ExchangeableMixture { components } => components
                .iter()
                .filter(|c| c.weight > 0.0)
                .map(|c| c.law.support_min())
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Realize with roughly `n_intervals` intervals.
    pub fn sample<R: Rng + ?Sized>(&self, n_intervals: usize, rng: &mut R) -> Result<IntervalConfiguration> {
        match self {
            RenewalSpec::LeftBounded { first_point, law } => {
                sample_left_bounded(first_point, law, n_intervals, rng)
            }
            RenewalSpec::ContainsOrigin { law } => sample_contains_origin(law, n_intervals, rng),
            RenewalSpec::Stationary { law } => {
                sample_stationary(law, Extent::Intervals(n_intervals), rng)
            }
            RenewalSpec::LatticeStationary { law } => {
                let mean = law.mean().unwrap_or(1.0);
                sample_lattice_stationary(law, (n_intervals as f64 * mean).ceil() as u64, rng)
            }
            RenewalSpec::ExchangeableMixture { components } => {
                sample_exchangeable(components, n_intervals, rng)
            }
        }
    }

    /// Same lengths on a circle, for boundary-free runs.
    pub fn sample_periodic<R: Rng + ?Sized>(&self, n_intervals: usize, rng: &mut R) -> Result<IntervalConfiguration> {
        match self {
            RenewalSpec::LeftBounded { law, .. }
            | RenewalSpec::ContainsOrigin { law }
            | RenewalSpec::Stationary { law }
            | RenewalSpec::LatticeStationary { law } => sample_periodic(law, n_intervals, rng),
            RenewalSpec::ExchangeableMixture { components } => {
                let mut cfg = sample_exchangeable(components, n_intervals, rng)?;
                cfg.boundary = Boundary::Periodic;
                cfg.marker = Some(0);
                Ok(cfg)
            }
        }
    }
}

fn check_lattice(law: &IntervalLaw) -> Result<()> {
    let ok = match law {
        IntervalLaw::Dirac { value } => value.fract() == 0.0,
        IntervalLaw::Geometric { .. } => true,
        IntervalLaw::Discrete { atoms } => atoms.iter().all(|a| a.0.fract() == 0.0),
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(HcpError::InvalidArgument("lattice sampling needs an integer-valued law".into()))
    }
}

fn validate_mixture(components: &[MixtureComponent]) -> Result<()> {
    if components.is_empty() {
        return Err(HcpError::InvalidArgument("empty mixture".into()));
    }
    if components.iter().any(|c| !(c.weight >= 0.0)) {
        return Err(HcpError::InvalidArgument("negative mixture weight".into()));
    }
    let total: f64 = components.iter().map(|c| c.weight).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(HcpError::InvalidArgument(format!("mixture weights sum to {total}, not 1")));
    }
    components.iter().try_for_each(|c| c.law.validate())
}

fn draw_lengths<R: Rng + ?Sized>(law: &IntervalLaw, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let d = law.sample(rng);
        if !(d > 0.0 && d.is_finite()) {
            return Err(HcpError::Sampling(format!("sampled length {d} is not positive")));
        }
        out.push(d);
    }
    Ok(out)
}

pub fn sample_left_bounded<R: Rng + ?Sized>(
    nu: &PointLaw,
    mu: &IntervalLaw,
    n_intervals: usize,
    rng: &mut R,
) -> Result<IntervalConfiguration> {
    if n_intervals == 0 {
        return Err(HcpError::InvalidArgument("n_intervals must be at least 1".into()));
    }
    let x0 = nu.sample(rng);
    let lengths = draw_lengths(mu, n_intervals, rng)?;
    Ok(IntervalConfiguration::new(x0, lengths, Boundary::LeftBounded)?.with_marker(0))
}

/// Window configuration with a point at the origin and i.i.d. lengths on both sides.
pub fn sample_contains_origin<R: Rng + ?Sized>(
    mu: &IntervalLaw,
    n_intervals: usize,
    rng: &mut R,
) -> Result<IntervalConfiguration> {
    if n_intervals < 2 {
        return Err(HcpError::InvalidArgument("need at least 2 intervals".into()));
    }
    let n_left = n_intervals / 2;
    let mut lengths = draw_lengths(mu, n_intervals, rng)?;
    lengths[..n_left].reverse();
    let first_point = -lengths[..n_left].iter().sum::<f64>();
    Ok(IntervalConfiguration::new(first_point, lengths, Boundary::Window)?.with_marker(n_left))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extent {
    /// Cover at least `[-span/2, span/2]`.
    Span(f64),
    /// Exactly this many intervals, the straddling one roughly central.
    Intervals(usize),
}

/// Assemble a window from the straddling interval `[x0, x0 + straddle]` and
/// the lengths to its left (nearest first) and right.
fn assemble(x0: f64, straddle: f64, mut left: Vec<f64>, right: Vec<f64>) -> Result<IntervalConfiguration> {
    let n_left = left.len();
    let first_point = x0 - left.iter().sum::<f64>();
    left.reverse();
    left.push(straddle);
    left.extend(right);
    Ok(IntervalConfiguration::new(first_point, left, Boundary::Window)?.with_marker(n_left))
}

/// Stationary renewal window: size-biased interval straddling the origin,
/// origin uniform inside it, i.i.d. lengths elsewhere. The marker is the
/// largest point `<= 0`.
pub fn sample_stationary<R: Rng + ?Sized>(
    mu: &IntervalLaw,
    extent: Extent,
    rng: &mut R,
) -> Result<IntervalConfiguration> {
    mu.validate()?;
    let straddle = mu.sample_size_biased(rng)?;
    let u: f64 = 1.0 - rng.random::<f64>();
    let x0 = -u * straddle;
    let x1 = x0 + straddle;
    let (left, right) = match extent {
        Extent::Intervals(n) => {
            if n == 0 {
                return Err(HcpError::InvalidArgument("n_intervals must be at least 1".into()));
            }
            let n_left = (n - 1) / 2;
            (draw_lengths(mu, n_left, rng)?, draw_lengths(mu, n - 1 - n_left, rng)?)
        }
        Extent::Span(span) => {
            let half = 0.5 * span;
            let mut left = Vec::new();
            let mut x = x0;
            while x > -half {
                let d = draw_lengths(mu, 1, rng)?[0];
                x -= d;
                left.push(d);
            }
            let mut right = Vec::new();
            let mut x = x1;
            while x < half {
                let d = draw_lengths(mu, 1, rng)?[0];
                x += d;
                right.push(d);
            }
            (left, right)
        }
    };
    assemble(x0, straddle, left, right)
}

/// Integer-lattice stationary renewal covering at least `span` sites centred
/// on the origin. The origin is a point with probability `1/mean`.
pub fn sample_lattice_stationary<R: Rng + ?Sized>(
    mu: &IntervalLaw,
    span: u64,
    rng: &mut R,
) -> Result<IntervalConfiguration> {
    mu.validate()?;
    check_lattice(mu)?;
    let straddle = mu.sample_size_biased(rng)?.round();
    let offset = rng.random_range(0..straddle as u64) as f64;
    let x0 = -offset;
    let half = (span / 2) as f64;
    let mut left = Vec::new();
    let mut x = x0;
    while x > -half {
        let d = mu.sample(rng);
        x -= d;
        left.push(d);
    }
    let mut right = Vec::new();
    let mut x = x0 + straddle;
    while x < half + (span % 2) as f64 {
        let d = mu.sample(rng);
        x += d;
        right.push(d);
    }
    assemble(x0, straddle, left, right)
}

/// I.i.d. lengths on a circle with the origin placed uniformly.
pub fn sample_periodic<R: Rng + ?Sized>(
    mu: &IntervalLaw,
    n_intervals: usize,
    rng: &mut R,
) -> Result<IntervalConfiguration> {
    if n_intervals < 2 {
        return Err(HcpError::InvalidArgument("a periodic ring needs at least 2 intervals".into()));
    }
    let lengths = draw_lengths(mu, n_intervals, rng)?;
    let c: f64 = lengths.iter().sum();
    let first_point = -rng.random::<f64>() * c;
    Ok(IntervalConfiguration::new(first_point, lengths, Boundary::Periodic)?.with_marker(0))
}

/// Left-bounded exchangeable configuration: a component drawn by weight,
/// then i.i.d. lengths from it; first point at 0.
pub fn sample_exchangeable<R: Rng + ?Sized>(
    mixture: &[MixtureComponent],
    n_intervals: usize,
    rng: &mut R,
) -> Result<IntervalConfiguration> {
    validate_mixture(mixture)?;
    if n_intervals == 0 {
        return Err(HcpError::InvalidArgument("n_intervals must be at least 1".into()));
    }
    let idx = WeightedIndex::new(mixture.iter().map(|c| c.weight))
        .map_err(|e| HcpError::InvalidArgument(format!("mixture weights: {e}")))?
        .sample(rng);
    let lengths = draw_lengths(&mixture[idx].law, n_intervals, rng)?;
    Ok(IntervalConfiguration::new(0.0, lengths, Boundary::LeftBounded)?.with_marker(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn deterministic_left_bounded() {
        let mut rng = stream(1, 0);
        let cfg = sample_left_bounded(&PointLaw::default(), &IntervalLaw::Dirac { value: 1.0 }, 3, &mut rng)
            .unwrap();
        assert_eq!(cfg.first_point, 0.0);
        assert_eq!(cfg.lengths, vec![1.0, 1.0, 1.0]);
        assert_eq!(cfg.boundary, Boundary::LeftBounded);
        let one = sample_left_bounded(&PointLaw::Uniform { low: -3.0, high: 2.0 }, &IntervalLaw::Geometric { q: 0.3 }, 1, &mut rng)
            .unwrap();
        assert_eq!(one.len(), 1);
    }

    #[test]
    fn zero_length_rejected() {
        let mut rng = stream(1, 0);
        let err = sample_left_bounded(&PointLaw::default(), &IntervalLaw::Discrete { atoms: vec![(0.0, 1.0)] }, 2, &mut rng);
        assert!(err.is_err());
        assert!(IntervalConfiguration::new(0.0, vec![1.0, 0.0], Boundary::Window).is_err());
    }

    #[test]
    fn geometric_mean() {
        let mut rng = stream(2, 0);
        let n = 100_000;
        let cfg = sample_left_bounded(&PointLaw::default(), &IntervalLaw::Geometric { q: 0.5 }, n, &mut rng)
            .unwrap();
        let mean = cfg.total_length() / n as f64;
        // variance of the geometric is q/(1-q)^2 = 2
        let se = (2.0 / n as f64).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * se, "mean {mean}");
        assert!(cfg.lengths.iter().all(|d| d.fract() == 0.0 && *d >= 1.0));
    }

    #[test]
    fn dirac_straddle_uniform_origin() {
        let mut rng = stream(3, 0);
        let c = 2.5;
        let n = 20_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let cfg = sample_stationary(&IntervalLaw::Dirac { value: c }, Extent::Intervals(5), &mut rng).unwrap();
            let m = cfg.marker.unwrap();
            let x0 = cfg.points()[m];
            assert!(x0 <= 0.0 && x0 > -c);
            assert_eq!(cfg.lengths[m], c);
            sum += -x0;
        }
        let mean = sum / n as f64;
        let se = c / (12.0f64.sqrt() * (n as f64).sqrt());
        assert!((mean - c / 2.0).abs() < 4.0 * se);
    }

    #[test]
    fn exponential_straddle_mean_two() {
        let mut rng = stream(4, 0);
        let n = 40_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let cfg = sample_stationary(&IntervalLaw::Exponential { rate: 1.0, shift: 0.0 }, Extent::Intervals(1), &mut rng)
                .unwrap();
            sum += cfg.lengths[0];
        }
        // Gamma(2,1): mean 2, variance 2
        let se = (2.0 / n as f64).sqrt();
        assert!((sum / n as f64 - 2.0).abs() < 4.0 * se);
    }

    #[test]
    fn two_point_straddle_weights() {
        let mut rng = stream(5, 0);
        let law = IntervalLaw::Discrete { atoms: vec![(1.0, 0.5), (2.0, 0.5)] };
        let n = 30_000;
        let twos = (0..n)
            .filter(|_| sample_stationary(&law, Extent::Intervals(1), &mut rng).unwrap().lengths[0] == 2.0)
            .count();
        let p = twos as f64 / n as f64;
        let se = (2.0 / 9.0 / n as f64).sqrt();
        assert!((p - 2.0 / 3.0).abs() < 4.0 * se, "p {p}");
    }

    #[test]
    fn infinite_mean_rejected() {
        let mut rng = stream(5, 0);
        let law = IntervalLaw::Pareto { x_min: 1.0, alpha: 0.5 };
        assert!(sample_stationary(&law, Extent::Intervals(3), &mut rng).is_err());
        assert!(RenewalSpec::Stationary { law }.validate().is_err());
    }

    #[test]
    fn span_is_covered() {
        let mut rng = stream(6, 0);
        let cfg = sample_stationary(&IntervalLaw::Exponential { rate: 1.0, shift: 1.0 }, Extent::Span(100.0), &mut rng).unwrap();
        assert!(cfg.first_point <= -50.0 && cfg.last_point() >= 50.0);
    }

    #[test]
    fn lattice_unit_law_fills_integers() {
        let mut rng = stream(7, 0);
        let cfg = sample_lattice_stationary(&IntervalLaw::Dirac { value: 1.0 }, 20, &mut rng).unwrap();
        let pts = cfg.points();
        assert!(pts.iter().all(|x| x.fract() == 0.0));
        assert!(pts.windows(2).all(|w| w[1] - w[0] == 1.0));
        assert!(pts.contains(&0.0));
    }

    fn density_in(cfg: &IntervalConfiguration, lo: i64, w: i64) -> f64 {
        let count = cfg
            .points()
            .iter()
            .filter(|&&x| x >= lo as f64 && x < (lo + w) as f64)
            .count();
        count as f64 / w as f64
    }

    #[test]
    fn lattice_geometric_is_bernoulli() {
        let mut rng = stream(8, 0);
        let p = 0.3;
        let w = 100_000i64;
        let cfg = sample_lattice_stationary(&IntervalLaw::Geometric { q: 1.0 - p }, w as u64, &mut rng).unwrap();
        let dens = density_in(&cfg, -w / 2, w);
        assert!((dens - p).abs() < 3.0 * (p * (1.0 - p) / w as f64).sqrt(), "density {dens}");
    }

    #[test]
    fn lattice_two_has_random_parity() {
        let mut rng = stream(9, 0);
        let n = 4000;
        let mut origin = 0;
        for _ in 0..n {
            let cfg = sample_lattice_stationary(&IntervalLaw::Dirac { value: 2.0 }, 10, &mut rng).unwrap();
            assert_eq!(density_in(&cfg, -4, 8), 0.5);
            origin += cfg.points().contains(&0.0) as usize;
        }
        let f = origin as f64 / n as f64;
        assert!((f - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn mixture_constant_within_realization() {
        let mut rng = stream(10, 0);
        let mix = vec![
            MixtureComponent { weight: 0.5, law: IntervalLaw::Dirac { value: 1.0 } },
            MixtureComponent { weight: 0.5, law: IntervalLaw::Dirac { value: 2.0 } },
        ];
        let n = 10_000;
        let mut ones = 0;
        for _ in 0..n {
            let cfg = sample_exchangeable(&mix, 6, &mut rng).unwrap();
            assert!(cfg.lengths.iter().all(|&d| d == cfg.lengths[0]));
            ones += (cfg.lengths[0] == 1.0) as usize;
        }
        assert!((ones as f64 / n as f64 - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt());
        let degenerate = vec![
            MixtureComponent { weight: 1.0, law: IntervalLaw::Dirac { value: 3.0 } },
            MixtureComponent { weight: 0.0, law: IntervalLaw::Dirac { value: 2.0 } },
        ];
        for _ in 0..100 {
            assert_eq!(sample_exchangeable(&degenerate, 2, &mut rng).unwrap().lengths[0], 3.0);
        }
        assert!(sample_exchangeable(&[], 2, &mut rng).is_err());
    }

    #[test]
    fn single_component_matches_left_bounded() {
        let law = IntervalLaw::Geometric { q: 0.4 };
        let mix = vec![MixtureComponent { weight: 1.0, law: law.clone() }];
        let a = sample_exchangeable(&mix, 50, &mut stream(11, 0)).unwrap();
        let b = sample_left_bounded(&PointLaw::default(), &law, 50, &mut stream(11, 0)).unwrap();
        // the mixture draw consumes randomness only through the weighted index
        assert_eq!(a.len(), b.len());
        assert_eq!(a.first_point, 0.0);
        assert_eq!(b.first_point, 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let cfg = IntervalConfiguration::new(-1.5, vec![1.0, 2.25, 3.0], Boundary::Window).unwrap().with_marker(1);
        let mut buf = Vec::new();
        cfg.write_csv(&mut buf).unwrap();
        let back = IntervalConfiguration::read_csv(&buf[..]).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn cdf_matches_samples_roughly() {
        let mut rng = stream(12, 0);
        for law in [
            IntervalLaw::Geometric { q: 0.6 },
            IntervalLaw::Pareto { x_min: 1.0, alpha: 1.5 },
            IntervalLaw::ExpGeometric { q: 0.5 },
            IntervalLaw::Uniform { low: 1.0, high: 3.0 },
        ] {
            let n = 20_000;
            let xs: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
            for probe in [1.5, 2.0, 3.0, 10.0] {
                let emp = xs.iter().filter(|&&x| x <= probe).count() as f64 / n as f64;
                assert!((emp - law.cdf(probe)).abs() < 0.015, "{law:?} at {probe}");
            }
        }
    }
}
