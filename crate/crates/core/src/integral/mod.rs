//! The singular integral
//!
//! ```text
//! J = (1/d) * int_{[0,1]^{2d}, s < 1} s^{1/d - 1},   s = f_d(a_1) + f_d(a_2)
//! ```
//!
//! and its oscillatory counterpart `J(mu) = int_{|g| < mu} int e(g f)`.
//!
//! Three estimators are provided. `j_region` is a radial Monte Carlo: with
//! `a = r w`, `|w|_inf = 1`, the radial integral is done in closed form and
//! only the direction `w` is sampled, which removes the `s^{1/d-1}`
//! singularity. `j_cdf` builds the distribution of `f_d` on a grid from the
//! exact law of `x^2 + y^2` and reduces `J` to a one-dimensional integral.
//! `j_truncated` integrates the oscillatory integral over `|g| < mu`.
//!
//! Monte Carlo work is split into 64 fixed shards, each with its own ChaCha8
//! stream, and reduced in shard order; results depend only on the seed.

pub mod quad;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::exec::{map_indexed, shard_ranges, Execution};
use crate::expsums::{e, ComplexValue};
use crate::forms::FormSpec;

pub use quad::{fresnel, quadratic_phase};

pub const DEFAULT_SAMPLES: u64 = 10_000_000;
pub const DEFAULT_GRID: usize = 4096;
const SHARDS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegralMethod {
    RegionMc,
    CdfReduction,
    OscillatoryTruncated,
    ClosedForm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Monte Carlo samples, or the grid resolution for the CDF reduction.
    pub samples: u64,
    pub method: IntegralMethod,
    pub seed: u64,
}

/// Estimate of the oscillatory integral over the unit cube.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillatoryEstimate {
    pub value: ComplexValue,
    pub std_error: f64,
}

/// How `J` is obtained when assembling a prediction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JMethod {
    /// Closed form where one exists (`d <= 2`), region Monte Carlo otherwise.
    Auto,
    Region,
    Cdf,
}

impl FromStr for JMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(JMethod::Auto),
            "region" => Ok(JMethod::Region),
            "cdf" => Ok(JMethod::Cdf),
            _ => Err(Error::input(format!(
                "unknown integral method `{s}` (auto, region, cdf)"
            ))),
        }
    }
}

/// `f_d` at a point of `[0,1]^d`.
pub fn fd_f64(spec: FormSpec, x: &[f64]) -> f64 {
    let (linear, pairs) = spec.factor_layout();
    let mut v = linear.map_or(1.0, |i| x[i]);
    for (a, b) in pairs {
        v *= x[a] * x[a] + x[b] * x[b];
    }
    v
}

/// `J` in closed form: `1/2` for `d = 1` and `pi^2/48` for `d = 2` (where the
/// region is a quarter of the unit 4-ball's positive orthant).
pub fn closed_form(spec: FormSpec) -> Option<f64> {
    match spec.d() {
        1 => Some(0.5),
        2 => Some(PI * PI / 48.0),
        _ => None,
    }
}

fn check_positive(est: IntegralEstimate) -> Result<IntegralEstimate> {
    if est.value > 0.0 && est.value.is_finite() {
        Ok(est)
    } else {
        Err(Error::Anomaly(format!(
            "singular integral estimate {} is not positive",
            est.value
        )))
    }
}

/// Uniform on `(0, 1]`.
fn unit(rng: &mut ChaCha8Rng) -> f64 {
    1.0 - rng.random::<f64>()
}

fn shard_rng(seed: u64, shard: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard as u64);
    rng
}

/// Sample mean and standard error of `f` over `samples` draws.
fn monte_carlo<F>(samples: u64, seed: u64, exec: Execution, f: F) -> (f64, f64)
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync + Send,
{
    let ranges = shard_ranges(samples as usize, SHARDS);
    let parts = map_indexed(ranges.len(), exec, |i| {
        let mut rng = shard_rng(seed, i);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in ranges[i].clone() {
            let v = f(&mut rng);
            s += v;
            s2 += v * v;
        }
        (s, s2)
    });
    let n = samples as f64;
    let (s, s2) = parts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let mean = s / n;
    let var = ((s2 / n - mean * mean) * n / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

/// Radial Monte Carlo estimate of `J`.
pub fn j_region(spec: FormSpec, samples: u64, seed: u64, exec: Execution) -> Result<IntegralEstimate> {
    if samples < 10_000 {
        return Err(Error::input("region Monte Carlo needs at least 10^4 samples"));
    }
    let d = spec.d() as usize;
    let df = d as f64;
    let scale = 2.0 / (df + 1.0);
    let (mean, se) = monte_carlo(samples, seed, exec, |rng| {
        let mut xi = [0f64; 128];
        let xi = &mut xi[..2 * d];
        let mut m = 0f64;
        for v in xi.iter_mut() {
            *v = unit(rng);
            m = m.max(*v);
        }
        for v in xi.iter_mut() {
            *v /= m;
        }
        let s = fd_f64(spec, &xi[..d]) + fd_f64(spec, &xi[d..]);
        if s >= 1.0 {
            scale / (s * s)
        } else {
            scale * s.powf(1.0 / df - 1.0)
        }
    });
    check_positive(IntegralEstimate {
        value: mean,
        std_error: se,
        samples,
        method: IntegralMethod::RegionMc,
        seed,
    })
}

/// CDF of `x^2 + y^2` for `(x, y)` uniform on the unit square.
pub fn pair_cdf(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t <= 1.0 {
        PI * t / 4.0
    } else if t < 2.0 {
        let u = 1.0 / t.sqrt();
        (t - 1.0).sqrt() + 0.5 * t * (u.asin() - u.acos())
    } else {
        1.0
    }
}

/// A CDF tabulated on `n + 1` equally spaced nodes of `[0, max]`.
struct GridCdf {
    max: f64,
    values: Vec<f64>,
}

impl GridCdf {
    fn from_fn(max: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        GridCdf {
            max,
            values: (0..=n).map(|i| f(max * i as f64 / n as f64)).collect(),
        }
    }

    fn eval(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= self.max {
            return 1.0;
        }
        let n = self.values.len() - 1;
        let x = s / self.max * n as f64;
        let i = (x as usize).min(n - 1);
        let t = x - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    /// Cell masses and midpoints on `n` equal cells of `[0, upto]`.
    fn cells(cdf: impl Fn(f64) -> f64, upto: f64, n: usize) -> Vec<(f64, f64)> {
        let h = upto / n as f64;
        (0..n)
            .map(|i| {
                let a = i as f64 * h;
                (cdf(a + h) - cdf(a), a + 0.5 * h)
            })
            .filter(|&(m, _)| m > 0.0)
            .collect()
    }
}

fn j_cdf_at(spec: FormSpec, n: usize, exec: Execution) -> f64 {
    let d = spec.d();
    let (mut cdf, steps) = if spec.is_odd() {
        (GridCdf::from_fn(1.0, n, |s| s.min(1.0)), spec.k())
    } else {
        (GridCdf::from_fn(2.0, n, pair_cdf), spec.k() - 1)
    };
    let pair_cells = GridCdf::cells(pair_cdf, 2.0, n);
    for _ in 0..steps {
        let max = cdf.max * 2.0;
        let prev = &cdf;
        let values = map_indexed(n + 1, exec, |j| {
            let s = max * j as f64 / n as f64;
            pair_cells.iter().map(|&(m, y)| m * prev.eval(s / y)).sum::<f64>()
        });
        cdf = GridCdf { max, values };
    }
    let cells = GridCdf::cells(|s| cdf.eval(s), 1.0, n);
    let sum_cdf = |s: f64| -> f64 {
        cells
            .iter()
            .take_while(|c| c.1 < s)
            .map(|&(m, x)| m * cdf.eval(s - x))
            .sum()
    };
    let df = f64::from(d);
    let mut j = sum_cdf(1.0);
    if d > 1 {
        // (1 - 1/d) int_0^1 s^{1/d-2} G(s) ds with s = t^d
        let rule = quad::gauss_legendre(10);
        let panels = 64;
        let nodes: Vec<f64> = (0..panels)
            .flat_map(|p| {
                rule.iter()
                    .map(move |&(x, _)| (p as f64 + 0.5 + 0.5 * x) / panels as f64)
            })
            .collect();
        let vals = map_indexed(nodes.len(), exec, |i| {
            let t = nodes[i];
            df * sum_cdf(t.powi(d as i32)) / t.powi(d as i32)
        });
        let integral: f64 = vals
            .iter()
            .enumerate()
            .map(|(i, v)| v * rule[i % rule.len()].1 * 0.5 / panels as f64)
            .sum();
        j += (1.0 - 1.0 / df) * integral;
    }
    j / df
}

/// Grid estimate of `J` from the distribution of `f_d`. The declared error is
/// the change from halving the grid.
pub fn j_cdf(spec: FormSpec, grid_resolution: usize, exec: Execution) -> Result<IntegralEstimate> {
    if grid_resolution < 256 {
        return Err(Error::input("grid resolution must be at least 256"));
    }
    let fine = j_cdf_at(spec, grid_resolution, exec);
    let coarse = j_cdf_at(spec, grid_resolution / 2, exec);
    check_positive(IntegralEstimate {
        value: fine,
        std_error: (fine - coarse).abs(),
        samples: grid_resolution as u64,
        method: IntegralMethod::CdfReduction,
        seed: 0,
    })
}

/// `int_0^1 e(g x) dx`.
fn linear_phase(g: f64) -> Complex64 {
    if g == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    (e(g) - 1.0) / Complex64::new(0.0, 2.0 * PI * g)
}

/// `int_0^1 e(-g z^d) dz`.
fn power_phase(d: u32, g: f64) -> Complex64 {
    match d {
        1 => linear_phase(-g),
        2 => quadratic_phase(-g),
        _ => {
            let rule = quad::gauss_legendre(20);
            let panels = 8 + (f64::from(d) * g.abs()).ceil() as usize;
            quad::composite(&rule, 0.0, 1.0, panels, |z| e(-g * z.powi(d as i32)))
        }
    }
}

/// Oscillatory integral over the unit cube, factored as `I_1(g)^2 I_2(g)`:
/// `I_1` integrates `e(g f_d)` over `[0,1]^d` and `I_2 = int e(-g z^d)`.
///
/// The last quadratic factor of `f_d` is integrated exactly (a product of
/// Fresnel integrals), so for `d >= 3` only `d - 2` coordinates are sampled.
/// The sampled points are fixed by the seed (common random numbers across `g`).
struct Oscillatory {
    d: u32,
    /// `f_{d-2}` at the sampled points (`d >= 3` only).
    inner: Vec<f64>,
}

impl Oscillatory {
    fn new(spec: FormSpec, samples: u64, seed: u64, exec: Execution) -> Self {
        let d = spec.d();
        if d <= 2 {
            return Oscillatory { d, inner: Vec::new() };
        }
        let sub = FormSpec::new(d - 2).expect("d - 2 >= 1");
        let dim = (d - 2) as usize;
        let ranges = shard_ranges(samples as usize, SHARDS);
        let parts = map_indexed(ranges.len(), exec, |i| {
            let mut rng = shard_rng(seed, i);
            let mut x = vec![0f64; dim];
            ranges[i]
                .clone()
                .map(|_| {
                    x.iter_mut().for_each(|v| *v = rng.random::<f64>());
                    fd_f64(sub, &x)
                })
                .collect::<Vec<_>>()
        });
        Oscillatory {
            d,
            inner: parts.concat(),
        }
    }

    /// `(I_1, standard error of I_1)`.
    fn first(&self, g: f64) -> (Complex64, f64) {
        match self.d {
            1 => (linear_phase(g), 0.0),
            2 => (quadratic_phase(g).powi(2), 0.0),
            _ => {
                let n = self.inner.len() as f64;
                let (mut s, mut s2) = (Complex64::new(0.0, 0.0), 0.0);
                for &c in &self.inner {
                    let v = quadratic_phase(g * c).powi(2);
                    s += v;
                    s2 += v.norm_sqr();
                }
                let mean = s / n;
                let var = ((s2 / n - mean.norm_sqr()) * n / (n - 1.0)).max(0.0);
                (mean, (var / n).sqrt())
            }
        }
    }

    fn eval(&self, g: f64) -> (Complex64, f64) {
        if g == 0.0 {
            return (Complex64::new(1.0, 0.0), 0.0);
        }
        let (i1, se) = self.first(g);
        let i2 = power_phase(self.d, g);
        (i1 * i1 * i2, 2.0 * i1.norm() * i2.norm() * se)
    }
}

pub fn inner_integral(
    spec: FormSpec,
    gamma: f64,
    samples: u64,
    seed: u64,
    exec: Execution,
) -> Result<OscillatoryEstimate> {
    if samples < 1000 {
        return Err(Error::input("oscillatory integral needs at least 10^3 samples"));
    }
    if !gamma.is_finite() {
        return Err(Error::input("gamma must be finite"));
    }
    let (v, se) = Oscillatory::new(spec, samples, seed, exec).eval(gamma);
    Ok(OscillatoryEstimate {
        value: v.into(),
        std_error: se,
    })
}

const GAMMA_REL_TOL: f64 = 1e-4;
const GAMMA_ABS_TOL: f64 = 1e-10;

fn truncated_parts(osc: &Oscillatory, lo: f64, hi: f64) -> (Complex64, f64) {
    let mut total = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    let mut a = lo;
    while a < hi {
        let b = (a + 1.0).min(hi);
        let (v, qe) = quad::adaptive(&mut |g| osc.eval(g).0, a, b, GAMMA_REL_TOL, GAMMA_ABS_TOL);
        // Monte Carlo error of the integrand, integrated crudely over the piece
        let mc = (osc.eval(a).1 + osc.eval(0.5 * (a + b)).1 + osc.eval(b).1) / 3.0 * (b - a);
        total += v;
        err += qe + mc;
        a = b;
    }
    (total, err)
}

fn check_mu(mu: f64) -> Result<()> {
    if mu.is_nan() || mu < 1.0 || !mu.is_finite() {
        return Err(Error::input("mu must be at least 1"));
    }
    Ok(())
}

/// `J(mu) = 2 Re int_0^mu Phi(g) dg`, using `Phi(-g) = conj Phi(g)`.
pub fn j_truncated(spec: FormSpec, mu: f64, samples: u64, seed: u64, exec: Execution) -> Result<IntegralEstimate> {
    check_mu(mu)?;
    if samples < 1000 {
        return Err(Error::input("oscillatory integral needs at least 10^3 samples"));
    }
    let osc = Oscillatory::new(spec, samples, seed, exec);
    let (v, err) = truncated_parts(&osc, 0.0, mu);
    Ok(IntegralEstimate {
        value: 2.0 * v.re,
        std_error: 2.0 * err,
        samples,
        method: IntegralMethod::OscillatoryTruncated,
        seed,
    })
}

/// `int_{-mu}^{mu} Phi(g) dg` without the symmetry reduction.
pub fn j_truncated_two_sided(
    spec: FormSpec,
    mu: f64,
    samples: u64,
    seed: u64,
    exec: Execution,
) -> Result<OscillatoryEstimate> {
    check_mu(mu)?;
    let osc = Oscillatory::new(spec, samples, seed, exec);
    let (left, e1) = truncated_parts(&osc, -mu, 0.0);
    let (right, e2) = truncated_parts(&osc, 0.0, mu);
    Ok(OscillatoryEstimate {
        value: (left + right).into(),
        std_error: e1 + e2,
    })
}

/// `J` by the requested method.
pub fn estimate_j(
    spec: FormSpec,
    method: JMethod,
    samples: u64,
    grid: usize,
    seed: u64,
    exec: Execution,
) -> Result<IntegralEstimate> {
    match (method, closed_form(spec)) {
        (JMethod::Auto, Some(v)) => Ok(IntegralEstimate {
            value: v,
            std_error: 0.0,
            samples: 0,
            method: IntegralMethod::ClosedForm,
            seed,
        }),
        (JMethod::Auto | JMethod::Region, _) => j_region(spec, samples, seed, exec),
        (JMethod::Cdf, _) => j_cdf(spec, grid, exec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(d: u32) -> FormSpec {
        FormSpec::new(d).unwrap()
    }

    #[test]
    fn pair_cdf_is_a_cdf() {
        assert_eq!(pair_cdf(0.0), 0.0);
        assert!((pair_cdf(2.0) - 1.0).abs() < 1e-15);
        assert!((pair_cdf(1.0) - PI / 4.0).abs() < 1e-15);
        let mut prev = 0.0;
        for i in 1..=200 {
            let v = pair_cdf(i as f64 / 100.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn region_linear_and_quadratic() {
        let est = j_region(spec(1), 200_000, 7, Execution::default()).unwrap();
        assert!((est.value - 0.5).abs() < 3.0 * est.std_error + 1e-12);
        let est = j_region(spec(2), 200_000, 7, Execution::default()).unwrap();
        assert!((est.value - PI * PI / 48.0).abs() < 4.0 * est.std_error);
    }

    #[test]
    fn region_is_reproducible() {
        let a = j_region(spec(3), 20_000, 11, Execution::Sequential).unwrap();
        let b = j_region(spec(3), 20_000, 11, Execution::default()).unwrap();
        assert_eq!(a, b);
        assert!(j_region(spec(3), 100, 1, Execution::Sequential).is_err());
    }

    #[test]
    fn cdf_closed_forms() {
        let est = j_cdf(spec(1), 512, Execution::Sequential).unwrap();
        assert!((est.value - 0.5).abs() < 1e-3);
        let est = j_cdf(spec(2), 1024, Execution::Sequential).unwrap();
        assert!((est.value - PI * PI / 48.0).abs() < 1e-3, "{est:?}");
        assert!(j_cdf(spec(2), 100, Execution::Sequential).is_err());
    }

    #[test]
    fn cdf_refinement_within_declared_error() {
        for d in [3u32, 4] {
            let coarse = j_cdf(spec(d), 1024, Execution::default()).unwrap();
            let fine = j_cdf(spec(d), 2048, Execution::default()).unwrap();
            assert!((fine.value - coarse.value).abs() < coarse.std_error, "d={d}");
        }
    }

    #[test]
    fn region_positive_and_seed_stable() {
        for d in 1..=6 {
            assert!(j_region(spec(d), 20_000, 1, Execution::default()).unwrap().value > 0.0);
        }
        let a = j_region(spec(2), 100_000, 1, Execution::default()).unwrap();
        let b = j_region(spec(2), 100_000, 2, Execution::default()).unwrap();
        assert_ne!(a.value, b.value);
        assert!((a.value - b.value).abs() < 3.0 * (a.std_error + b.std_error));
    }

    #[test]
    fn inner_integral_basics() {
        for d in 1..=4 {
            let v = inner_integral(spec(d), 0.0, 1000, 1, Execution::Sequential).unwrap();
            assert_eq!(v.value, ComplexValue { re: 1.0, im: 0.0 });
            let v = inner_integral(spec(d), 3.7, 2000, 1, Execution::Sequential).unwrap();
            assert!(Complex64::from(v.value).norm() <= 1.0 + 3.0 * v.std_error);
        }
        assert!(inner_integral(spec(2), 1.0, 10, 1, Execution::Sequential).is_err());
    }

    #[test]
    fn inner_integral_matches_direct_quadrature_d3() {
        // d = 3: Phi = (int e(g x1 (x2^2 + x3^2)))^2 int e(-g z^3), the first
        // factor by nested Gauss-Legendre in x1
        let g = 2.3;
        let rule = quad::gauss_legendre(30);
        let i1 = quad::composite(&rule, 0.0, 1.0, 8, |x| quadratic_phase(g * x).powi(2));
        let exact = i1 * i1 * power_phase(3, g);
        let est = inner_integral(spec(3), g, 200_000, 3, Execution::default()).unwrap();
        assert!((Complex64::from(est.value) - exact).norm() < 4.0 * est.std_error + 1e-12);
    }

    #[test]
    fn truncated_linear() {
        let est = j_truncated(spec(1), 32.0, 1000, 1, Execution::Sequential).unwrap();
        assert!((est.value - 0.5).abs() < 0.02, "{est:?}");
    }

    #[test]
    fn truncated_symmetry() {
        for d in [2u32, 3] {
            let one = j_truncated(spec(d), 4.0, 2000, 5, Execution::Sequential).unwrap();
            let two = j_truncated_two_sided(spec(d), 4.0, 2000, 5, Execution::Sequential).unwrap();
            assert!((one.value - two.value.re).abs() < 1e-8);
            assert!(two.value.im.abs() < 1e-8);
        }
    }

    #[test]
    fn truncated_convergence_rate_d2() {
        let j = PI * PI / 48.0;
        let errs: Vec<f64> = [8.0, 16.0, 32.0, 64.0]
            .iter()
            .map(|&mu| (j_truncated(spec(2), mu, 1000, 1, Execution::Sequential).unwrap().value - j).abs())
            .collect();
        let target = 2f64.powf(-1.5);
        for w in errs.windows(2) {
            let r = w[1] / w[0];
            assert!(r > target / 2.0 && r < target * 2.0, "{errs:?}");
        }
    }

    #[test]
    fn method_parsing() {
        assert_eq!("auto".parse::<JMethod>().unwrap(), JMethod::Auto);
        assert!("x".parse::<JMethod>().is_err());
        let est = estimate_j(spec(2), JMethod::Auto, 0, 0, 3, Execution::Sequential).unwrap();
        assert_eq!(est.method, IntegralMethod::ClosedForm);
    }
}
