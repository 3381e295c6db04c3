use hcp_core::limits::{LimitLaw, LimitLawParams};
use hcp_core::measure::{epoch_pushforward, AtomicMeasure};

fn discretize(law: &LimitLaw, step: f64, l_max: f64) -> AtomicMeasure {
    let n = (l_max / step).round() as usize;
    let first = (1.0 / step).round() as usize;
    let mut masses = vec![0.0; n + 1];
    for (i, m) in masses.iter_mut().enumerate().skip(first) {
        let lo = if i == first { 1.0 } else { (i as f64 - 0.5) * step };
        *m = law.z_cdf((i as f64 + 0.5) * step) - law.z_cdf(lo);
    }
    let deficit = 1.0 - law.z_cdf((n as f64 + 0.5) * step);
    AtomicMeasure::from_grid(step, &masses, l_max, deficit)
}

#[test]
fn limit_law_is_a_fixed_point_of_the_rescaled_epoch_map() {
    let step = 1.0 / 128.0;
    for c0 in [1.0, 0.5] {
        let law = LimitLaw::new(LimitLawParams::new(c0)).unwrap();
        let z = discretize(&law, step, 64.0);
        let next = epoch_pushforward(&z, 1.0, 2.0).unwrap().scale_positions(0.5);
        let mut worst: f64 = 0.0;
        for i in 0..=80 {
            let x = 1.0 + i as f64 * 0.1 + step / 4.0;
            worst = worst.max((next.cdf(x) - law.z_cdf(x)).abs());
        }
        let other = LimitLaw::new(LimitLawParams::new(1.5 - c0)).unwrap();
        let apart = (0..=80).map(|i| (next.cdf(1.0 + i as f64 * 0.1) - other.z_cdf(1.0 + i as f64 * 0.1)).abs()).fold(0.0, f64::max);
        assert!(apart > 0.1, "c0={c0}: map does not separate laws ({apart})");
        assert!(worst < 0.01, "c0={c0}: sup cdf error {worst}");
    }
}
