//! Generating functions over the box, complete exponential sums modulo `q`,
//! the Gauss-sum product table and the arc machinery.

mod arcs;
mod gauss;
mod residue;

pub use arcs::{classify_arc, default_delta, dirichlet_approx, weyl_envelope, Arc, RationalApprox};
pub use gauss::{gauss_product, gauss_product_exact, quadratic_gauss_sum, GaussianInt};
pub use residue::{normalized_s, residue_counts, s, s1, s1_all_units, s2, t_sum, ResidueCache};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::counting::CountTable;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::forms::FormSpec;
use crate::Budgets;

/// `e(x) = exp(2 pi i x)`, with the argument reduced to `[0, 1)` first.
pub fn e(x: f64) -> Complex64 {
    let t = x - x.floor();
    Complex64::cis(std::f64::consts::TAU * t)
}

/// `e(r / q)` for `r = 0..q`, each phase reduced exactly before conversion.
pub fn unit_roots(q: u64) -> Vec<Complex64> {
    (0..q)
        .map(|r| Complex64::cis(std::f64::consts::TAU * (r as f64 / q as f64)))
        .collect()
}

/// Serializable complex number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexValue {
    fn from(z: Complex64) -> Self {
        ComplexValue { re: z.re, im: z.im }
    }
}

impl From<ComplexValue> for Complex64 {
    fn from(z: ComplexValue) -> Self {
        Complex64::new(z.re, z.im)
    }
}

/// `F_1`, `F_2` and `F = F_1^2 F_2` for a fixed box, with `F_1` summed over the
/// representation counts rather than over the `P^d` points.
pub struct GeneratingFunctions {
    spec: FormSpec,
    p: u64,
    weights: Vec<(u64, f64)>,
}

impl GeneratingFunctions {
    pub fn new(table: &CountTable) -> Self {
        GeneratingFunctions {
            spec: table.spec(),
            p: table.box_side(),
            weights: table.weights(),
        }
    }

    pub fn f1(&self, alpha: f64) -> Complex64 {
        self.weights.iter().map(|&(n, c)| e(alpha * n as f64) * c).sum()
    }

    pub fn f2(&self, alpha: f64) -> Complex64 {
        f2(self.spec, self.p, alpha)
    }

    pub fn f(&self, alpha: f64) -> Complex64 {
        let f1 = self.f1(alpha);
        f1 * f1 * self.f2(alpha)
    }
}

/// `F_2(alpha) = sum_{x=1}^{P} e(-alpha x^d)`.
pub fn f2(spec: FormSpec, p: u64, alpha: f64) -> Complex64 {
    (1..=p).map(|x| e(-alpha * (x as f64).powi(spec.d() as i32))).sum()
}

/// `F(alpha)` by direct summation over all `P^{2d+1}` points.
pub fn f_direct(spec: FormSpec, p: u64, alpha: f64, budgets: &Budgets, exec: Execution) -> Result<Complex64> {
    let n = spec.n_vars();
    let pts = (0..n).try_fold(1u128, |acc, _| acc.checked_mul(u128::from(p)));
    if p == 0 {
        return Err(Error::input("box side P must be positive"));
    }
    if pts.is_none_or(|v| v > budgets.bruteforce_points) {
        return Err(Error::capacity(
            "direct generating-function terms",
            format!("P^{n}, P = {p}"),
            budgets.bruteforce_points,
        ));
    }
    let parts = map_indexed(p as usize, exec, |i| {
        let mut x = vec![1i64; n];
        x[0] = i as i64 + 1;
        let mut acc = Complex64::new(0.0, 0.0);
        loop {
            acc += e(alpha * spec.eval_f_i128(&x) as f64);
            let mut pos = n - 1;
            loop {
                if pos == 0 {
                    return acc;
                }
                if x[pos] < p as i64 {
                    x[pos] += 1;
                    break;
                }
                x[pos] = 1;
                pos -= 1;
            }
        }
    });
    Ok(parts.into_iter().sum())
}
