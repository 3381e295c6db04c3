//! Chains of coalescence epochs with growing activity thresholds.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HcpError, Result};
use crate::ocp::{core_lengths, run_epoch, validate_rates_with_gamma, RateFamily, RateProfile};
use crate::rng::{replica_stream, stream, PILOT_STREAM};
use crate::spp::{Boundary, IntervalConfiguration, RenewalSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum Thresholds {
    /// `d^(n) = a^(n-1)`.
    Geometric { a: f64 },
    /// `d^(n) = n`.
    Arithmetic,
    Explicit { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSchedule {
    pub thresholds: Thresholds,
    pub rates: RateProfile,
    /// Required ratio `lambda_left / lambda_right`, if any.
    #[serde(default)]
    pub gamma: Option<f64>,
}

impl EpochSchedule {
    /// `d^(n) = 2^(n-1)`; every ringing domain absorbs its left neighbour.
    pub fn east() -> Self {
        Self {
            thresholds: Thresholds::Geometric { a: 2.0 },
            rates: RateProfile::Constant { left: 0.0, right: 1.0 },
            gamma: Some(0.0),
        }
    }

    /// `d^(n) = n`; left and right neighbours absorbed at rate one each.
    pub fn paste_all() -> Self {
        Self {
            thresholds: Thresholds::Arithmetic,
            rates: RateProfile::Constant { left: 1.0, right: 1.0 },
            gamma: Some(1.0),
        }
    }

    pub fn threshold(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(HcpError::InvalidArgument("epochs are numbered from 1".into()));
        }
        match &self.thresholds {
            Thresholds::Geometric { a } => Ok(a.powi(n as i32 - 1)),
            Thresholds::Arithmetic => Ok(n as f64),
            Thresholds::Explicit { values } => values.get(n - 1).copied().ok_or_else(|| {
                HcpError::Schedule {
                    epoch: n,
                    reason: format!("explicit schedule has only {} thresholds", values.len()),
                }
            }),
        }
    }

    pub fn rate_family(&self, n: usize) -> Result<RateFamily> {
        Ok(RateFamily::new(self.threshold(n)?, self.threshold(n + 1)?, self.rates.clone()))
    }

    /// Thresholds `d^(1..=n_epochs+1)` strictly increasing, with `2 d^(n) >= d^(n+1)`.
    pub fn validate_thresholds(&self, n_epochs: usize) -> Result<()> {
        if let Thresholds::Geometric { a } = self.thresholds {
            if !(a > 1.0 && a <= 2.0) {
                return Err(HcpError::Schedule {
                    epoch: 1,
                    reason: format!("geometric ratio a = {a} must lie in (1, 2]"),
                });
            }
        }
        let mut prev = self.threshold(1)?;
        if !(prev > 0.0) {
            return Err(HcpError::Schedule { epoch: 1, reason: format!("d^(1) = {prev} must be positive") });
        }
        for n in 1..=n_epochs {
            let next = self.threshold(n + 1)?;
            if !(next > prev) {
                return Err(HcpError::Schedule {
                    epoch: n,
                    reason: format!("thresholds not increasing: d^({n}) = {prev}, d^({}) = {next}", n + 1),
                });
            }
            if 2.0 * prev < next {
                return Err(HcpError::Schedule {
                    epoch: n,
                    reason: format!(
                        "(A2) violated: d^({}) = {next} > 2 d^({n}) = {}",
                        n + 1,
                        2.0 * prev
                    ),
                });
            }
            prev = next;
        }
        Ok(())
    }

    /// Thresholds plus rate assumptions for every epoch up to `n_epochs`.
    pub fn validate(&self, n_epochs: usize) -> Result<()> {
        self.validate_thresholds(n_epochs)?;
        if let Some(g) = self.gamma {
            if !(g >= 0.0) {
                return Err(HcpError::Schedule { epoch: 1, reason: format!("gamma = {g} must be >= 0") });
            }
        }
        for n in 1..=n_epochs {
            let rates = self.rate_family(n)?;
            let report = validate_rates_with_gamma(&rates, &rates.default_probe_grid(), self.gamma);
            if !report.is_ok() {
                let msgs: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
                return Err(HcpError::Schedule { epoch: n, reason: msgs.join("; ") });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowPolicy {
    /// Initial interval count per replica.
    pub intervals: usize,
    /// If set, choose `intervals` so that the pooled core at the last epoch
    /// holds about this many samples, using a pilot run.
    pub target_survivors: Option<usize>,
    pub pilot_intervals: usize,
    /// Buffer at open edges, in units of `d^(n)`.
    pub buffer_factor: f64,
    /// Run on a circle instead of a window.
    pub periodic: bool,
    /// Z samples are kept only for epochs `>= record_from`.
    pub record_from: usize,
}

impl Default for WindowPolicy {
    fn default() -> Self {
        Self {
            intervals: 10_000,
            target_survivors: None,
            pilot_intervals: 100_000,
            buffer_factor: 8.0,
            periodic: false,
            record_from: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicaEpoch {
    pub replica: u64,
    pub first_point: f64,
    /// `first_point / d^(n)`.
    pub y: f64,
    pub first_point_survived: bool,
    pub origin_survived: bool,
    /// Merges during the epoch started here; 0 for the last recorded epoch.
    pub merges: usize,
    pub intervals: usize,
    pub core: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub threshold: f64,
    /// Core epoch-start lengths divided by `d^(n)`.
    pub z: Vec<f64>,
    pub z_replica: Vec<u64>,
    pub replicas: Vec<ReplicaEpoch>,
}

impl EpochSummary {
    pub fn first_point_survival_frequency(&self) -> f64 {
        let k = self.replicas.iter().filter(|r| r.first_point_survived).count();
        k as f64 / self.replicas.len() as f64
    }

    pub fn origin_survival_frequency(&self) -> f64 {
        let k = self.replicas.iter().filter(|r| r.origin_survived).count();
        k as f64 / self.replicas.len() as f64
    }

    pub fn y_samples(&self) -> Vec<f64> {
        self.replicas.iter().map(|r| r.y).collect()
    }

    /// One row per Z sample: replica, epoch, z, y, survival flags.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "replica,epoch,z,y,first_point_survived,origin_survived")?;
        let mut j = 0;
        for (z, &rep) in self.z.iter().zip(&self.z_replica) {
            while self.replicas[j].replica != rep {
                j += 1;
            }
            let r = &self.replicas[j];
            writeln!(
                w,
                "{},{},{},{},{},{}",
                rep, self.epoch, z, r.y, r.first_point_survived as u8, r.origin_survived as u8
            )?;
        }
        Ok(())
    }

    /// One row per replica.
    pub fn write_replica_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "replica,epoch,first_point,y,first_point_survived,origin_survived,merges,intervals,core")?;
        for r in &self.replicas {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.replica,
                self.epoch,
                r.first_point,
                r.y,
                r.first_point_survived as u8,
                r.origin_survived as u8,
                r.merges,
                r.intervals,
                r.core
            )?;
        }
        Ok(())
    }
}

fn initial_config<R: Rng + ?Sized>(
    spec: &RenewalSpec,
    policy: &WindowPolicy,
    intervals: usize,
    rng: &mut R,
) -> Result<IntervalConfiguration> {
    if policy.periodic {
        spec.sample_periodic(intervals, rng)
    } else {
        spec.sample(intervals, rng)
    }
}

/// One replica of the hierarchical process. Summaries describe the state at
/// the start of epochs `1..=n_epochs`, so `n_epochs - 1` epochs are run.
pub fn run_hcp<R: Rng + ?Sized>(
    spec: &RenewalSpec,
    schedule: &EpochSchedule,
    n_epochs: usize,
    policy: &WindowPolicy,
    replica: u64,
    rng: &mut R,
) -> Result<Vec<EpochSummary>> {
    if n_epochs == 0 {
        return Err(HcpError::InvalidArgument("n_epochs must be at least 1".into()));
    }
    spec.validate()?;
    schedule.validate(n_epochs - 1)?;
    let mut config = initial_config(spec, policy, policy.intervals, rng)?;
    let d1 = schedule.threshold(1)?;
    if let Some((index, &length)) = config.lengths.iter().enumerate().find(|(_, &d)| d < d1) {
        return Err(HcpError::StateSpace { index, length, d_min: d1 });
    }
    let (lo, hi) = (config.first_point, config.last_point());
    let x0 = config.first_point;
    let mut first_alive = true;
    let mut out = Vec::with_capacity(n_epochs);
    for n in 1..=n_epochs {
        let d = schedule.threshold(n)?;
        debug_assert!(config.lengths.iter().all(|&l| l >= d));
        let buffer = policy.buffer_factor * d;
        let core = core_lengths(&config, lo, hi, buffer).map_err(|_| HcpError::WindowExhausted {
            epoch: n,
            reason: format!(
                "no interval left inside the core after a buffer of {buffer}; increase the window"
            ),
        })?;
        let rows = if n >= policy.record_from { core.iter().map(|&l| l / d).collect() } else { Vec::new() };
        let mut rec = ReplicaEpoch {
            replica,
            first_point: config.first_point,
            y: config.first_point / d,
            first_point_survived: first_alive && config.first_point == x0,
            origin_survived: config.marker.is_some(),
            merges: 0,
            intervals: config.len(),
            core: core.len(),
        };
        if n < n_epochs {
            let outcome = run_epoch(&config, &schedule.rate_family(n)?, rng)?;
            rec.merges = outcome.merges;
            first_alive &= outcome.point_alive[0];
            config = outcome.final_config;
            if config.is_empty() && config.boundary != Boundary::Periodic {
                return Err(HcpError::WindowExhausted {
                    epoch: n + 1,
                    reason: "every interval of the window was absorbed by a sentinel".into(),
                });
            }
        }
        out.push(EpochSummary {
            epoch: n,
            threshold: d,
            z_replica: vec![replica; rows.len()],
            z: rows,
            replicas: vec![rec],
        });
    }
    Ok(out)
}

/// Concatenate per-replica summaries epoch by epoch, in the given order.
pub fn pool(runs: Vec<Vec<EpochSummary>>) -> Vec<EpochSummary> {
    let mut iter = runs.into_iter();
    let Some(mut acc) = iter.next() else { return Vec::new() };
    for run in iter {
        for (a, b) in acc.iter_mut().zip(run) {
            a.z.extend(b.z);
            a.z_replica.extend(b.z_replica);
            a.replicas.extend(b.replicas);
        }
    }
    acc
}

/// Replicas `first_replica..first_replica + n_replicas`, replica `r` on
/// stream `r` of `base_seed`. The result does not depend on thread count.
pub fn replicate(
    spec: &RenewalSpec,
    schedule: &EpochSchedule,
    n_epochs: usize,
    policy: &WindowPolicy,
    n_replicas: usize,
    base_seed: u64,
    first_replica: u64,
) -> Result<Vec<EpochSummary>> {
    if n_replicas == 0 {
        return Err(HcpError::InvalidArgument("n_replicas must be at least 1".into()));
    }
    let runs: Result<Vec<Vec<EpochSummary>>> = (0..n_replicas as u64)
        .into_par_iter()
        .map(|i| {
            let r = first_replica + i;
            run_hcp(spec, schedule, n_epochs, policy, r, &mut replica_stream(base_seed, r))
        })
        .collect();
    Ok(pool(runs?))
}

/// Initial count per replica that yields about `target` pooled core samples
/// at the last epoch, from a pilot replica on the reserved stream.
pub fn resolve_window(
    spec: &RenewalSpec,
    schedule: &EpochSchedule,
    n_epochs: usize,
    policy: &WindowPolicy,
    n_replicas: usize,
    base_seed: u64,
) -> Result<usize> {
    let Some(target) = policy.target_survivors else { return Ok(policy.intervals) };
    let pilot = WindowPolicy {
        intervals: policy.pilot_intervals,
        record_from: usize::MAX,
        ..policy.clone()
    };
    let run = run_hcp(spec, schedule, n_epochs, &pilot, PILOT_STREAM, &mut stream(base_seed, PILOT_STREAM))?;
    let kept = run.last().map_or(0, |s| s.replicas[0].core);
    if kept == 0 {
        return Err(HcpError::WindowExhausted { epoch: n_epochs, reason: "pilot run kept no samples".into() });
    }
    let ratio = kept as f64 / policy.pilot_intervals as f64;
    let per_replica = target as f64 / n_replicas as f64;
    Ok(((per_replica / ratio) * 1.1).ceil().max(2.0) as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spp::{IntervalLaw, PointLaw};

    fn unit_left_bounded() -> RenewalSpec {
        RenewalSpec::LeftBounded { first_point: PointLaw::default(), law: IntervalLaw::Dirac { value: 1.0 } }
    }

    #[test]
    fn presets_validate() {
        assert!(EpochSchedule::east().validate(20).is_ok());
        assert!(EpochSchedule::paste_all().validate(20).is_ok());
        assert_eq!(EpochSchedule::east().threshold(4).unwrap(), 8.0);
        assert_eq!(EpochSchedule::paste_all().threshold(4).unwrap(), 4.0);
    }

    #[test]
    fn wide_step_names_epoch() {
        let s = EpochSchedule {
            thresholds: Thresholds::Explicit { values: vec![1.0, 2.0, 5.0, 6.0] },
            rates: RateProfile::Constant { left: 1.0, right: 1.0 },
            gamma: None,
        };
        match s.validate(3).unwrap_err() {
            HcpError::Schedule { epoch, reason } => {
                assert_eq!(epoch, 2);
                assert!(reason.contains("(A2)"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn single_epoch_is_initial_law() {
        let policy = WindowPolicy { intervals: 50, buffer_factor: 0.0, ..Default::default() };
        let spec = RenewalSpec::LeftBounded { first_point: PointLaw::default(), law: IntervalLaw::Geometric { q: 0.5 } };
        let out = run_hcp(&spec, &EpochSchedule::east(), 1, &policy, 0, &mut stream(1, 0)).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].z.len(), 50);
        assert!(out[0].z.iter().all(|&z| z >= 1.0 && z.fract() == 0.0));
    }

    #[test]
    fn east_first_point_immobile_without_right_rates() {
        let sched = EpochSchedule {
            rates: RateProfile::Constant { left: 1.0, right: 0.0 },
            gamma: None,
            ..EpochSchedule::east()
        };
        let policy = WindowPolicy { intervals: 200, ..Default::default() };
        for seed in 0..30 {
            let out = run_hcp(&unit_left_bounded(), &sched, 5, &policy, 0, &mut stream(seed, 0)).unwrap();
            assert!(out.iter().all(|s| s.replicas[0].first_point == 0.0 && s.replicas[0].first_point_survived));
        }
    }

    #[test]
    fn replicate_matches_single_runs() {
        let policy = WindowPolicy { intervals: 300, ..Default::default() };
        let sched = EpochSchedule::east();
        let pooled = replicate(&unit_left_bounded(), &sched, 3, &policy, 4, 9, 0).unwrap();
        let mut singles = Vec::new();
        for r in 0..4 {
            singles.push(replicate(&unit_left_bounded(), &sched, 3, &policy, 1, 9, r).unwrap());
        }
        assert_eq!(pool(singles), pooled);
        assert_eq!(replicate(&unit_left_bounded(), &sched, 3, &policy, 4, 9, 0).unwrap(), pooled);
    }

    #[test]
    fn exhausted_window_reports_epoch() {
        let policy = WindowPolicy { intervals: 20, buffer_factor: 2.0, ..Default::default() };
        let err = run_hcp(&unit_left_bounded(), &EpochSchedule::east(), 6, &policy, 0, &mut stream(0, 0)).unwrap_err();
        assert!(matches!(err, HcpError::WindowExhausted { .. }), "{err}");
    }

    #[test]
    fn pilot_sizing_hits_target() {
        let spec = RenewalSpec::LeftBounded { first_point: PointLaw::default(), law: IntervalLaw::Geometric { q: 0.2 } };
        let policy = WindowPolicy {
            target_survivors: Some(2000),
            pilot_intervals: 20_000,
            periodic: true,
            ..Default::default()
        };
        let n = resolve_window(&spec, &EpochSchedule::east(), 4, &policy, 2, 5).unwrap();
        let run = replicate(&spec, &EpochSchedule::east(), 4, &WindowPolicy { intervals: n, ..policy }, 2, 5, 0).unwrap();
        let got = run.last().unwrap().z.len();
        assert!(got >= 1900, "{got}");
    }
}
