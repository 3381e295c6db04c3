//! Universal limit laws: exponential integrals, the limit transform and
//! density of the rescaled interval length, and the first-point transform.

use serde::Serialize;

use crate::error::{HcpError, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `E1(s) = int_s^inf e^{-t}/t dt`.
pub fn exp_integral(s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(HcpError::Domain(format!("exponential integral needs s > 0, got {s}")));
    }
    Ok(if s < 1.0 { e1_series(s) } else { e1_continued_fraction(s) })
}

fn e1_series(s: f64) -> f64 {
    -EULER_GAMMA - s.ln() + ein_series(s)
}

/// Modified Lentz evaluation of the continued fraction for `e^s E1(s)`.
fn e1_continued_fraction(s: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = s + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-s).exp()
}

fn ein_series(s: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..200 {
        term *= -s / k as f64;
        let contrib = -term / k as f64;
        sum += contrib;
        if contrib.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// `Ein(s) = int_0^s (1 - e^{-t})/t dt`, entire.
pub fn ein(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s <= 2.0 {
        ein_series(s)
    } else {
        EULER_GAMMA + s.ln() + e1_continued_fraction(s)
    }
}

/// `1 - exp(-c0 E1(s))`; equals 1 at `s = 0`. For `c0 = 0` all mass escapes
/// and the transform vanishes for every `s > 0`.
pub fn g_infinity(c0: f64, s: f64) -> Result<f64> {
    check_c0(c0)?;
    if s < 0.0 {
        return Err(HcpError::Domain(format!("transform needs s >= 0, got {s}")));
    }
    if s == 0.0 {
        return Ok(1.0);
    }
    Ok(-(-c0 * exp_integral(s)?).exp_m1())
}

/// `exp(-(c0/(1+gamma)) Ein(s))`.
pub fn first_point_limit_transform(c0: f64, gamma: f64, s: f64) -> Result<f64> {
    check_c0(c0)?;
    if !(gamma >= 0.0) || s < 0.0 {
        return Err(HcpError::Domain(format!("need gamma >= 0 and s >= 0, got {gamma}, {s}")));
    }
    if gamma.is_infinite() {
        return Ok(1.0);
    }
    Ok((-c0 / (1.0 + gamma) * ein(s)).exp())
}

fn check_c0(c0: f64) -> Result<()> {
    if (0.0..=1.0).contains(&c0) {
        Ok(())
    } else {
        Err(HcpError::Domain(format!("c0 = {c0} outside [0,1]")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitLawParams {
    pub c0: f64,
    pub gamma: f64,
    /// Upper end of the region evaluated by the alternating series.
    pub x_series: f64,
    /// Upper end of the tabulated region.
    pub x_max: f64,
    /// Nodes per unit length.
    pub nodes_per_unit: usize,
}

impl LimitLawParams {
    pub fn new(c0: f64) -> Self {
        Self { c0, gamma: 0.0, x_series: 10.0, x_max: 64.0, nodes_per_unit: 256 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Moment {
    Finite { value: f64, tail_error: f64 },
    Infinite,
}

/// Tabulated density `z_{c0}` of the limit law on `[1, x_max]`.
///
/// On `[1, x_series]` the density is the alternating series
/// `sum_k (-1)^{k+1} c0^k rho_k / k!` with `rho_1 = 1/x` and
/// `rho_{k+1}(x) = int_k^{x-1} rho_k(y)/(x-y) dy`. Further out it is continued
/// through `x z(x) = c0 (1 - F(x - 1))`, which the series satisfies.
#[derive(Debug, Clone)]
pub struct LimitLaw {
    params: LimitLawParams,
    h: f64,
    density: Vec<f64>,
    cdf: Vec<f64>,
}

/// Integral of `f` between consecutive nodes inside one unit cell, fourth
/// order, using only nodes of that cell.
fn cell_increments(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len() - 1;
    let mut out = vec![0.0; n];
    if n < 3 {
        for i in 0..n {
            out[i] = 0.5 * h * (f[i] + f[i + 1]);
        }
        return out;
    }
    for (i, o) in out.iter_mut().enumerate() {
        *o = if i == 0 {
            h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3])
        } else if i == n - 1 {
            h / 24.0 * (f[n - 3] - 5.0 * f[n - 2] + 19.0 * f[n - 1] + 9.0 * f[n])
        } else {
            h / 24.0 * (-f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2])
        };
    }
    out
}

/// Simpson's rule over `f[a..=b]`, with a 3/8 panel when the count is odd.
fn simpson(f: &[f64], h: f64) -> f64 {
    let n = f.len().saturating_sub(1);
    match n {
        0 => 0.0,
        1 => 0.5 * h * (f[0] + f[1]),
        2 => h / 3.0 * (f[0] + 4.0 * f[1] + f[2]),
        _ => {
            let (simp, tail) = if n.is_multiple_of(2) { (n, 0) } else { (n - 3, 3) };
            let mut s = f[0] + f[simp];
            for (i, v) in f.iter().enumerate().take(simp).skip(1) {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * v;
            }
            let mut total = s * h / 3.0;
            if tail == 3 {
                let g = &f[simp..];
                total += 3.0 * h / 8.0 * (g[0] + 3.0 * g[1] + 3.0 * g[2] + g[3]);
            }
            total
        }
    }
}

impl LimitLaw {
    pub fn new(params: LimitLawParams) -> Result<Self> {
        check_c0(params.c0)?;
        if params.nodes_per_unit < 4 || !(params.x_series >= 2.0) || !(params.x_max >= params.x_series) {
            return Err(HcpError::InvalidArgument(format!("bad limit-law table parameters {params:?}")));
        }
        let m = params.nodes_per_unit;
        let h = 1.0 / m as f64;
        let x_series = params.x_series.floor() as usize;
        let x_max = params.x_max.ceil() as usize;
        let n_series = (x_series - 1) * m;
        let n_total = (x_max - 1) * m;
        let x = |i: usize| 1.0 + i as f64 * h;
        let c0 = params.c0;

        let mut density = vec![0.0; n_total + 1];
        // rho_1 and rho_2 in closed form, then iterated convolution.
        let mut rho: Vec<f64> = (0..=n_series).map(|i| 1.0 / x(i)).collect();
        let mut coef = c0;
        for (i, d) in density.iter_mut().enumerate().take(n_series + 1) {
            *d = coef * rho[i];
        }
        for k in 1..x_series {
            // rho_{k+1} from rho_k; support starts at node k*m.
            let mut next = vec![0.0; n_series + 1];
            if k == 1 {
                for (i, r) in next.iter_mut().enumerate().skip(m) {
                    *r = 2.0 / x(i) * (x(i) - 1.0).ln();
                }
            } else {
                let a = (k - 1) * m;
                let mut f = Vec::with_capacity(n_series + 1);
                for (i, r) in next.iter_mut().enumerate().skip(k * m) {
                    let b = i - m;
                    f.clear();
                    f.extend((a..=b).map(|j| rho[j] / (x(i) - x(j))));
                    *r = simpson(&f, h);
                }
            }
            rho = next;
            coef *= -c0 / (k + 1) as f64;
            for (i, d) in density.iter_mut().enumerate().take(n_series + 1).skip(k * m) {
                *d += coef * rho[i];
            }
        }
        for d in density.iter_mut().take(n_series + 1) {
            *d = d.max(0.0);
        }

        let mut cdf = vec![0.0; n_total + 1];
        let fill_cdf = |cdf: &mut [f64], density: &[f64], cell: usize| {
            let lo = cell * m;
            let inc = cell_increments(&density[lo..=lo + m], h);
            for (j, v) in inc.iter().enumerate() {
                cdf[lo + j + 1] = cdf[lo + j] + v;
            }
        };
        for cell in 0..(x_series - 1) {
            fill_cdf(&mut cdf, &density, cell);
        }
        for cell in (x_series - 1)..(x_max - 1) {
            let lo = cell * m;
            for i in lo + 1..=lo + m {
                density[i] = c0 * (1.0 - cdf[i - m]).max(0.0) / x(i);
            }
            fill_cdf(&mut cdf, &density, cell);
        }
        Ok(Self { params, h, density, cdf })
    }

    pub fn params(&self) -> &LimitLawParams {
        &self.params
    }

    fn x_end(&self) -> f64 {
        1.0 + (self.density.len() - 1) as f64 * self.h
    }

    fn tail_survival(&self, x: f64) -> f64 {
        let end = self.x_end();
        let s_end = (1.0 - self.cdf[self.cdf.len() - 1]).max(0.0);
        s_end * (end / x).powf(self.params.c0)
    }

    /// Cubic interpolation through four nodes of the unit cell containing `x`.
    fn interpolate(&self, x: f64) -> f64 {
        let m = self.params.nodes_per_unit;
        let t = (x - 1.0) / self.h;
        let cell = ((x.floor() as usize).saturating_sub(1)).min((self.density.len() - 1) / m - 1);
        let lo = cell * m;
        let i = (t.floor() as usize).clamp(lo, lo + m - 1);
        let start = i.saturating_sub(1).clamp(lo, lo + m - 3);
        let u = t - start as f64;
        let f = &self.density[start..start + 4];
        let l0 = -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0;
        let l1 = u * (u - 2.0) * (u - 3.0) / 2.0;
        let l2 = -u * (u - 1.0) * (u - 3.0) / 2.0;
        let l3 = u * (u - 1.0) * (u - 2.0) / 6.0;
        f[0] * l0 + f[1] * l1 + f[2] * l2 + f[3] * l3
    }

    /// Density at `x`; zero below 1.
    pub fn z_density(&self, x: f64) -> f64 {
        if x < 1.0 {
            return 0.0;
        }
        if x >= self.x_end() {
            return self.params.c0 * self.tail_survival((x - 1.0).max(self.x_end())) / x;
        }
        self.interpolate(x).max(0.0)
    }

    pub fn z_cdf(&self, x: f64) -> f64 {
        if x <= 1.0 {
            return 0.0;
        }
        if x >= self.x_end() {
            return 1.0 - self.tail_survival(x);
        }
        let i = (((x - 1.0) / self.h).floor() as usize).min(self.cdf.len() - 2);
        let a = 1.0 + i as f64 * self.h;
        // three-point Gauss on [a, x]
        let half = 0.5 * (x - a);
        let mid = a + half;
        let r = (0.6f64).sqrt() * half;
        let fa = self.interpolate((mid - r).max(a));
        let fm = self.interpolate(mid);
        let fb = self.interpolate(mid + r);
        (self.cdf[i] + half * (5.0 * fa + 8.0 * fm + 5.0 * fb) / 9.0).clamp(0.0, 1.0)
    }

    /// `int phi(x) z(x) dx` over the table by cell-wise quadrature.
    pub fn integrate<F: Fn(f64) -> f64>(&self, phi: F) -> f64 {
        let m = self.params.nodes_per_unit;
        let cells = (self.density.len() - 1) / m;
        let mut total = 0.0;
        for cell in 0..cells {
            let lo = cell * m;
            let f: Vec<f64> = (lo..=lo + m)
                .map(|i| phi(1.0 + i as f64 * self.h) * self.density[i])
                .collect();
            total += simpson(&f, self.h);
        }
        total
    }

    /// Survival beyond the table.
    pub fn tail_mass(&self) -> f64 {
        self.tail_survival(self.x_end())
    }

    /// `E[Z^k]`; infinite unless `c0 = 1`.
    pub fn limit_moment(&self, k: u32) -> Result<Moment> {
        if k == 0 {
            return Err(HcpError::InvalidArgument("moment order must be >= 1".into()));
        }
        if self.params.c0 < 1.0 {
            return Ok(Moment::Infinite);
        }
        let value = self.integrate(|x| x.powi(k as i32));
        let tail_error = self.tail_mass() * self.x_end().powi(k as i32);
        Ok(Moment::Finite { value, tail_error })
    }

    /// Pair `(x, F(x))` on a grid, for plotting.
    pub fn tabulate_cdf(&self, x_hi: f64, step: f64) -> Vec<(f64, f64, f64)> {
        let n = ((x_hi - 1.0) / step).floor() as usize;
        (0..=n)
            .map(|i| {
                let x = 1.0 + i as f64 * step;
                (x, self.z_density(x), self.z_cdf(x))
            })
            .collect()
    }
}

/// `int_0^inf e^{-sx} z(x) dx` from the table, for consistency checks.
pub fn density_transform(law: &LimitLaw, s: f64) -> f64 {
    law.integrate(|x| (-s * x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Adaptive Simpson on `[a, b]`.
    fn adaptive<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64) -> f64 {
        #[allow(clippy::too_many_arguments)]
        fn rec<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
    }

    #[test]
    fn e1_reference_values() {
        assert!((exp_integral(1.0).unwrap() - 0.219_383_934_395_520_27).abs() < 1e-14);
        assert!((exp_integral(10.0).unwrap() - 4.156_968_929_685_324e-6).abs() < 1e-18);
        assert!(exp_integral(0.0).is_err());
        assert!(exp_integral(-1.0).is_err());
    }

    #[test]
    fn e1_matches_quadrature() {
        for s in [0.05, 0.3, 1.0, 2.5, 7.0] {
            // substitute t = s + u/(1-u) to map to a finite range
            let f = move |u: f64| {
                if u >= 1.0 {
                    return 0.0;
                }
                let t = s + u / (1.0 - u);
                (-t).exp() / t / ((1.0 - u) * (1.0 - u))
            };
            let q = adaptive(f, 0.0, 1.0, 1e-13);
            assert!((exp_integral(s).unwrap() - q).abs() < 1e-10, "s={s}");
        }
    }

    #[test]
    fn series_and_fraction_overlap() {
        for s in [0.8, 0.9, 1.0, 1.1, 1.3] {
            assert!((e1_series(s) - e1_continued_fraction(s)).abs() < 1e-12, "s={s}");
        }
    }

    #[test]
    fn e1_properties() {
        let mut prev = f64::INFINITY;
        for i in 1..200 {
            let s = i as f64 * 0.05;
            let v = exp_integral(s).unwrap();
            assert!(v > 0.0 && v < prev && v < (-s).exp() / s);
            prev = v;
        }
        let s = 1e-9;
        assert!((exp_integral(s).unwrap() + s.ln() + EULER_GAMMA).abs() < 1e-8);
    }

    #[test]
    fn ein_matches_quadrature_and_identity() {
        for s in [0.1, 1.0, 1.9, 2.1, 5.0, 20.0] {
            let q = adaptive(|t: f64| if t == 0.0 { 1.0 } else { -(-t).exp_m1() / t }, 0.0, s, 1e-13);
            assert!((ein(s) - q).abs() < 1e-10, "s={s}");
        }
        assert!((ein(1.0) - (EULER_GAMMA + exp_integral(1.0).unwrap())).abs() < 1e-14);
    }

    #[test]
    fn transform_examples() {
        assert!((g_infinity(1.0, 1.0).unwrap() - 0.196_986_6).abs() < 1e-6);
        assert!((g_infinity(0.5, 1.0).unwrap() - 0.103_889_9).abs() < 1e-6);
        assert_eq!(g_infinity(0.7, 0.0).unwrap(), 1.0);
        assert!(g_infinity(1.0, 1e-12).unwrap() > 0.99);
        assert_eq!(g_infinity(0.0, 2.0).unwrap(), 0.0);
        assert_eq!(first_point_limit_transform(1.0, 0.0, 0.0).unwrap(), 1.0);
        assert!((first_point_limit_transform(1.0, 0.0, 1.0).unwrap() - 0.450_859_5).abs() < 1e-6);
        assert!(first_point_limit_transform(1.0, 1e9, 3.0).unwrap() > 1.0 - 1e-8);
    }

    #[test]
    fn complete_monotonicity_probe() {
        for c0 in [0.3, 0.7, 1.0] {
            let mut s = 0.01;
            while s < 20.0 {
                let h = 0.1 * s;
                let g: Vec<f64> = (0..5).map(|i| g_infinity(c0, s + i as f64 * h).unwrap()).collect();
                let mut diffs = g.clone();
                for order in 1..=4 {
                    diffs = diffs.windows(2).map(|w| w[1] - w[0]).collect();
                    let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
                    assert!(diffs.iter().all(|d| sign * d >= -1e-15), "c0={c0} s={s} order={order}");
                }
                s *= 1.5;
            }
        }
    }

    #[test]
    fn density_examples() {
        let law = LimitLaw::new(LimitLawParams::new(1.0)).unwrap();
        assert!((law.z_density(1.5) - 1.0 / 1.5).abs() < 1e-12);
        let want = 1.0 / 2.5 - 0.5 * (2.0 / 2.5) * 1.5f64.ln();
        assert!((law.z_density(2.5) - want).abs() < 1e-10);
        assert!((law.z_density(2.5) - 0.237_813_7).abs() < 1e-5);
        assert_eq!(law.z_density(0.5), 0.0);
        assert_eq!(law.z_cdf(1.0), 0.0);
        assert!((law.z_cdf(2.0) - 2f64.ln()).abs() < 1e-9);
        assert!((law.z_cdf(1.3) - 1.3f64.ln()).abs() < 1e-9);
        assert!((law.integrate(|_| 1.0) - 1.0).abs() < 1e-8);
        assert!((law.z_cdf(60.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn series_satisfies_delay_equation() {
        for c0 in [0.3, 0.7, 1.0] {
            let law = LimitLaw::new(LimitLawParams::new(c0)).unwrap();
            for i in 0..60 {
                let x = 2.0 + 0.13 * i as f64;
                let lhs = x * law.z_density(x);
                let rhs = c0 * (1.0 - law.z_cdf(x - 1.0));
                assert!((lhs - rhs).abs() < 1e-7, "c0={c0} x={x}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn density_transform_matches_limit_transform() {
        for c0 in [0.3, 0.7, 1.0] {
            let law = LimitLaw::new(LimitLawParams::new(c0)).unwrap();
            for s in [0.5, 1.0, 2.0] {
                let a = density_transform(&law, s);
                let b = g_infinity(c0, s).unwrap();
                assert!((a - b).abs() < 1e-4, "c0={c0} s={s}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn moments() {
        let law = LimitLaw::new(LimitLawParams::new(1.0)).unwrap();
        let eg = EULER_GAMMA.exp();
        let Moment::Finite { value, .. } = law.limit_moment(1).unwrap() else { panic!() };
        assert!((value - 1.781_072_4).abs() < 1e-4);
        let Moment::Finite { value, .. } = law.limit_moment(2).unwrap() else { panic!() };
        // series expansion of 1 - g(s) = e^gamma s exp(-Ein(s))
        assert!((value - 2.0 * eg).abs() < 1e-6, "{value}");
        let Moment::Finite { value, .. } = law.limit_moment(3).unwrap() else { panic!() };
        assert!((value - 4.5 * eg).abs() < 1e-5, "{value}");
        let half = LimitLaw::new(LimitLawParams::new(0.5)).unwrap();
        assert_eq!(half.limit_moment(1).unwrap(), Moment::Infinite);
    }

    #[test]
    fn mean_from_transform_limit() {
        // E[Z] = lim (1 - g(s))/s = lim e^{-E1(s)} / s
        let s: f64 = 1e-7;
        let approx = (-exp_integral(s).unwrap()).exp() / s;
        assert!((approx - EULER_GAMMA.exp()).abs() < 1e-5);
    }
}
