//! Assembly of the prediction `P^{d+1} S J` against the exact zero count.

use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::counting::{count_zeros_exact, CountMethod, ExactCount};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::expsums::default_delta;
use crate::forms::FormSpec;
use crate::integral::{estimate_j, IntegralEstimate, IntegralMethod, JMethod, DEFAULT_GRID, DEFAULT_SAMPLES};
use crate::local::{singular_series, SeriesEstimate};
use crate::Budgets;

pub const DEFAULT_SEED: u64 = 20_240_101;
pub const DEFAULT_PRIME_BOUND: u64 = 1000;
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub budgets: Budgets,
    pub count_method: CountMethod,
    pub prime_bound: u64,
    pub tol: f64,
    pub j_method: JMethod,
    pub samples: u64,
    pub grid: usize,
    pub seed: u64,
    pub exec: Execution,
    /// Record wall-clock timings in the report.
    pub timing: bool,
    /// Final `|rel_error|` allowed by `verify_trend`; `None` uses the default.
    pub threshold: Option<f64>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            budgets: Budgets::default(),
            count_method: CountMethod::Convolution,
            prime_bound: DEFAULT_PRIME_BOUND,
            tol: DEFAULT_TOL,
            j_method: JMethod::Auto,
            samples: DEFAULT_SAMPLES,
            grid: DEFAULT_GRID,
            seed: DEFAULT_SEED,
            exec: Execution::default(),
            timing: true,
            threshold: None,
        }
    }
}

/// Default final `|rel_error|` threshold for trend checks.
pub fn default_threshold(spec: FormSpec) -> f64 {
    if spec.d() <= 3 {
        0.15
    } else {
        0.25
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub count_s: f64,
    pub series_s: f64,
    pub integral_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub samples: u64,
    pub j_method: IntegralMethod,
    pub count_method: CountMethod,
    pub prime_bound: u64,
    pub tol: f64,
    pub budgets: Budgets,
    /// Major-arc exponent and the asymptotic error exponent, as metadata.
    pub delta: f64,
    pub error_exponent: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timings: Option<Timings>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub d: u32,
    #[serde(rename = "P")]
    pub p: u64,
    pub exact: ExactCount,
    #[serde(rename = "S_value")]
    pub s_value: f64,
    #[serde(rename = "S_tail")]
    pub s_tail: f64,
    #[serde(rename = "J_value")]
    pub j_value: f64,
    #[serde(rename = "J_err")]
    pub j_err: f64,
    pub predicted: f64,
    pub rel_error: f64,
    /// Relative half-width of the prediction from the series tail and three
    /// standard errors of `J`.
    pub tolerance: f64,
    pub provenance: Provenance,
}

/// The analytic inputs shared by every box size.
struct MainTerm {
    series: SeriesEstimate,
    integral: IntegralEstimate,
    series_s: f64,
    integral_s: f64,
}

fn main_term(spec: FormSpec, config: &Config) -> Result<MainTerm> {
    let t = Instant::now();
    let series = singular_series(spec, config.prime_bound, config.tol, &config.budgets, config.exec)?;
    let series_s = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let integral = estimate_j(
        spec,
        config.j_method,
        config.samples,
        config.grid,
        config.seed,
        config.exec,
    )?;
    let integral_s = t.elapsed().as_secs_f64();
    Ok(MainTerm {
        series,
        integral,
        series_s,
        integral_s,
    })
}

fn assemble(spec: FormSpec, p: u64, main: &MainTerm, config: &Config) -> Result<PredictionReport> {
    let t = Instant::now();
    let exact = count_zeros_exact(spec, p, config.count_method, &config.budgets, config.exec)?;
    let count_s = t.elapsed().as_secs_f64();
    let (s, j) = (&main.series, &main.integral);
    let predicted = (p as f64).powi(spec.d() as i32 + 1) * s.value * j.value;
    if predicted.is_nan() || predicted <= 0.0 || !predicted.is_finite() {
        return Err(Error::Anomaly(format!(
            "predicted main term {predicted} is not positive"
        )));
    }
    let d = spec.d();
    Ok(PredictionReport {
        d,
        p,
        rel_error: exact.to_f64() / predicted - 1.0,
        exact,
        s_value: s.value,
        s_tail: s.tail_bound,
        j_value: j.value,
        j_err: j.std_error,
        predicted,
        tolerance: s.tail_bound / s.value + 3.0 * j.std_error / j.value,
        provenance: Provenance {
            seed: config.seed,
            samples: j.samples,
            j_method: j.method,
            count_method: config.count_method,
            prime_bound: config.prime_bound,
            tol: config.tol,
            budgets: config.budgets,
            delta: default_delta(d),
            error_exponent: 1.0 / (1.0 + 5.0 * 2f64.powi(d as i32 - 1)),
            timings: config.timing.then_some(Timings {
                count_s,
                series_s: main.series_s,
                integral_s: main.integral_s,
            }),
        },
    })
}

pub fn predict(spec: FormSpec, p: u64, config: &Config) -> Result<PredictionReport> {
    if p == 0 {
        return Err(Error::input("box side P must be positive"));
    }
    let main = main_term(spec, config)?;
    assemble(spec, p, &main, config)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    #[serde(rename = "P")]
    pub p: u64,
    pub exact: ExactCount,
    pub predicted: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub d: u32,
    pub rows: Vec<TrendRow>,
    #[serde(rename = "S_value")]
    pub s_value: f64,
    #[serde(rename = "J_value")]
    pub j_value: f64,
    pub threshold: f64,
    pub inversions: usize,
    pub passed: bool,
    pub reports: Vec<PredictionReport>,
}

impl TrendReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).map_err(|e| Error::input(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::input(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::input(e.to_string()))
    }
}

/// Number of steps where `|rel_error|` grows.
pub fn count_inversions(rel: &[f64]) -> usize {
    rel.windows(2).filter(|w| w[1].abs() > w[0].abs()).count()
}

/// Evaluates the prediction at every `P` and checks that `|rel_error|` is
/// non-increasing up to one inversion with a final value below the threshold.
pub fn verify_trend(spec: FormSpec, ps: &[u64], config: &Config) -> Result<TrendReport> {
    if ps.len() < 3 {
        return Err(Error::input("trend check needs at least three box sizes"));
    }
    if ps.windows(2).any(|w| w[0] >= w[1]) || ps[0] == 0 {
        return Err(Error::input("box sizes must be positive and strictly ascending"));
    }
    let main = main_term(spec, config)?;
    let reports: Vec<PredictionReport> = ps
        .iter()
        .map(|&p| assemble(spec, p, &main, config))
        .collect::<Result<_>>()?;
    let rel: Vec<f64> = reports.iter().map(|r| r.rel_error).collect();
    let inversions = count_inversions(&rel);
    let threshold = config.threshold.unwrap_or_else(|| default_threshold(spec));
    let passed = inversions <= 1 && rel.last().is_some_and(|r| r.abs() <= threshold);
    Ok(TrendReport {
        d: spec.d(),
        rows: reports
            .iter()
            .map(|r| TrendRow {
                p: r.p,
                exact: r.exact.clone(),
                predicted: r.predicted,
                rel_error: r.rel_error,
            })
            .collect(),
        s_value: main.series.value,
        j_value: main.integral.value,
        threshold,
        inversions,
        passed,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> Config {
        Config {
            timing: false,
            samples: 20_000,
            ..Config::default()
        }
    }

    #[test]
    fn linear_form_prediction() {
        let r = predict(FormSpec::new(1).unwrap(), 1000, &quick()).unwrap();
        assert_eq!(r.exact.to_string(), "499500");
        assert_eq!(r.predicted, 500_000.0);
        assert!((r.rel_error + 1e-3).abs() < 1e-12);
        let back: PredictionReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn linear_trend_is_one_over_p() {
        let t = verify_trend(FormSpec::new(1).unwrap(), &[10, 100, 1000], &quick()).unwrap();
        for row in &t.rows {
            assert!((row.rel_error + 1.0 / row.p as f64).abs() < 1e-12);
        }
        assert!(t.passed);
        assert_eq!(t.inversions, 0);
        let csv = t.to_csv().unwrap();
        assert!(csv.starts_with("P,exact,predicted,rel_error\n10,45,"));
    }

    #[test]
    fn trend_input_checks() {
        let s = FormSpec::new(2).unwrap();
        assert!(verify_trend(s, &[4, 8], &quick()).is_err());
        assert!(verify_trend(s, &[8, 4, 16], &quick()).is_err());
        assert!(predict(s, 0, &quick()).is_err());
    }

    #[test]
    fn inversion_counting() {
        assert_eq!(count_inversions(&[-0.4, -0.2, 0.1]), 0);
        assert_eq!(count_inversions(&[-0.4, -0.2, 0.3, 0.1]), 1);
    }

    #[test]
    fn timings_are_optional() {
        let mut c = quick();
        let r = predict(FormSpec::new(2).unwrap(), 8, &c).unwrap();
        assert!(r.provenance.timings.is_none());
        c.timing = true;
        let r = predict(FormSpec::new(2).unwrap(), 8, &c).unwrap();
        assert!(r.provenance.timings.is_some());
    }
}
