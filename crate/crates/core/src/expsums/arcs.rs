use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::FormSpec;

/// `a/q` in lowest terms with `err = |alpha - a/q|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalApprox {
    pub a: u64,
    pub q: u64,
    pub err: f64,
}

/// Last continued-fraction convergent of `alpha` with denominator `<= q_max`.
///
/// The result satisfies `|alpha - a/q| <= 1/(q q_max)`. The expansion runs in
/// exact rational arithmetic on the binary value of `alpha`. When
/// `alpha < 1/q_max` the answer is `0/1`.
pub fn dirichlet_approx(alpha: f64, q_max: u64) -> Result<RationalApprox> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::input(format!("alpha = {alpha} must lie in (0, 1]")));
    }
    if q_max == 0 {
        return Err(Error::input("Q must be positive"));
    }
    let target = BigRational::from_float(alpha).expect("finite alpha");
    let limit = BigInt::from(q_max);
    // convergents h/k with (h_{-1}, k_{-1}) = (1, 0), (h_{-2}, k_{-2}) = (0, 1)
    let (mut h0, mut k0) = (BigInt::zero(), BigInt::from(1));
    let (mut h1, mut k1) = (BigInt::from(1), BigInt::zero());
    let mut x = target.clone();
    loop {
        let a = x.floor().to_integer();
        let h2 = &a * &h1 + &h0;
        let k2 = &a * &k1 + &k0;
        if k2 > limit {
            break;
        }
        (h0, k0, h1, k1) = (h1, k1, h2, k2);
        let frac = &x - BigRational::from_integer(a);
        if frac.is_zero() {
            break;
        }
        x = frac.recip();
    }
    let approx = BigRational::new(h1.clone(), k1.clone());
    let err = (&target - approx).abs().to_f64().unwrap_or(f64::INFINITY);
    Ok(RationalApprox {
        a: h1.to_u64().expect("numerator in range"),
        q: k1.to_u64().expect("denominator in range"),
        err,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Arc {
    /// `|alpha - a/q| <= P^{delta-d}` with `q <= P^delta`; `beta = alpha - a/q`.
    Major {
        q: u64,
        a: u64,
        beta: f64,
    },
    Minor,
}

/// The exponent `delta = 2^{d-1} / (1 + 5 * 2^{d-1})` that balances the major-
/// and minor-arc error terms.
pub fn default_delta(d: u32) -> f64 {
    let t = 2f64.powi(d as i32 - 1);
    t / (1.0 + 5.0 * t)
}

/// Classifies `alpha` in the unit window `(P^{delta-d}, 1 + P^{delta-d}]`.
pub fn classify_arc(spec: FormSpec, alpha: f64, p: u64, delta: f64) -> Result<Arc> {
    let d = f64::from(spec.d());
    if !(delta > 0.0 && delta < d) {
        return Err(Error::input(format!("delta = {delta} must lie in (0, d)")));
    }
    if p == 0 {
        return Err(Error::input("box side P must be positive"));
    }
    let pf = p as f64;
    let width = pf.powf(delta - d);
    if !(alpha > width && alpha <= 1.0 + width) {
        return Err(Error::input(format!(
            "alpha = {alpha} outside the unit window ({width}, {}]",
            1.0 + width
        )));
    }
    let q_max = (pf.powf(delta) * (1.0 + 1e-12)).floor() as u64;
    for q in 1..=q_max.max(1) {
        let centre = (alpha * q as f64).round() as i64;
        for a in [centre - 1, centre, centre + 1] {
            if a < 1 || a as u64 > q || (a as u64).gcd(&q) != 1 {
                continue;
            }
            let beta = alpha - a as f64 / q as f64;
            if beta.abs() <= width {
                return Ok(Arc::Major { q, a: a as u64, beta });
            }
        }
    }
    Ok(Arc::Minor)
}

/// Reference size `P^{1 - delta/2^{d-1}}` of `F_2` on the minor arcs, with the
/// implicit constant and the `P^eps` factor set to one. Diagnostic only.
pub fn weyl_envelope(p: f64, d: u32, delta: f64) -> f64 {
    p.powf(1.0 - delta / 2f64.powi(d as i32 - 1))
}
