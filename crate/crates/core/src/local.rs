//! Local factors of the singular series.
//!
//! For an odd prime power `p^l` the sum `S_1(p^l, a)` does not depend on `a`
//! and is assembled exactly from counts of `(d-2)`-tuples by the `p`-adic
//! valuation of `f_{d-2}`, paired with squared quadratic Gauss sums. The
//! normalized term is then
//!
//! ```text
//! S(p^l) = p^{-(2d+1)l} * S_1(p^l)^2 * T(p^l)
//! ```
//!
//! with `T` the unit sum of `S_2`. At `p = 2` the Gauss sums do depend on `a`,
//! so the term is summed over `a` directly from residue counts.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{factorize, is_prime, primes_up_to};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::expsums::{gauss_product_exact, normalized_s, GaussianInt};
use crate::forms::FormSpec;
use crate::Budgets;

fn check_prime_level(p: u64, l: u32) -> Result<()> {
    if !is_prime(p) {
        return Err(Error::input(format!("{p} is not prime")));
    }
    if l == 0 {
        return Err(Error::input("level l must be at least 1"));
    }
    Ok(())
}

fn big(p: u64) -> BigUint {
    BigUint::from(p)
}

/// `#{(w,x) mod p^l : p^j | w^2 + x^2}` for `0 <= j <= l`.
pub fn m2(p: u64, l: u32, j: u32) -> Result<BigUint> {
    check_prime_level(p, l)?;
    if j > l {
        return Err(Error::input(format!("need j <= l, got j = {j}, l = {l}")));
    }
    let pb = big(p);
    if j == 0 {
        return Ok(pb.pow(2 * l));
    }
    let h = j.div_ceil(2);
    Ok(match p % 4 {
        1 => pb.pow(2 * l - 2 * h) + BigUint::from(2 * h) * pb.pow(2 * l - j - 1) * (p - 1),
        3 => pb.pow(2 * l - 2 * h),
        _ => pb.pow(2 * l - j),
    })
}

/// `#{(w,x) mod p^l : p^j || w^2 + x^2}` for `0 <= j <= l - 1`.
pub fn m2_star(p: u64, l: u32, j: u32) -> Result<BigUint> {
    check_prime_level(p, l)?;
    if j >= l {
        return Err(Error::input(format!("need j <= l - 1, got j = {j}, l = {l}")));
    }
    let pb = big(p);
    Ok(match p % 4 {
        1 => BigUint::from(j + 1) * pb.pow(2 * l - j - 2) * (p - 1) * (p - 1),
        3 if j.is_multiple_of(2) => pb.pow(2 * l - j - 2) * (p * p - 1),
        3 => BigUint::zero(),
        _ => pb.pow(2 * l - j - 1),
    })
}

/// Counts of `(d-2)`-tuples modulo `p^l` by the valuation of `f_{d-2}`:
/// `star[j]` for exact valuation `j < l`, `top` for valuation `>= l`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MStarTable {
    pub p: u64,
    pub l: u32,
    pub star: Vec<BigUint>,
    pub top: BigUint,
}

impl MStarTable {
    pub fn mass(&self) -> BigUint {
        self.star.iter().sum::<BigUint>() + &self.top
    }
}

/// Truncated product of valuation polynomials: degrees `>= l` are dropped.
fn truncated_product(a: &[BigUint], b: &[BigUint], l: usize) -> Vec<BigUint> {
    let mut out = vec![BigUint::zero(); l];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(l - i) {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn mstar_chain(spec: FormSpec, p: u64, l: u32) -> Result<MStarTable> {
    check_prime_level(p, l)?;
    let len = l as usize;
    // f_{-1} = 0: nothing to count
    let Some(reduced) = spec.reduced() else {
        return Ok(MStarTable {
            p,
            l,
            star: vec![BigUint::zero(); len],
            top: BigUint::zero(),
        });
    };
    let pb = big(p);
    let mut poly = vec![BigUint::zero(); len];
    if spec.is_odd() {
        // x_1 with p^j || x_1: p^{l-j}(1 - 1/p) residues
        for (j, c) in poly.iter_mut().enumerate() {
            *c = pb.pow(l - j as u32 - 1) * (p - 1);
        }
    } else {
        poly[0] = BigUint::one();
    }
    let pair: Vec<BigUint> = (0..l).map(|j| m2_star(p, l, j)).collect::<Result<_>>()?;
    for _ in 0..spec.k().saturating_sub(1) {
        poly = truncated_product(&poly, &pair, len);
    }
    let total = pb.pow(reduced.degree * l);
    let top = total - poly.iter().sum::<BigUint>();
    Ok(MStarTable { p, l, star: poly, top })
}

fn s1_from_table(table: &MStarTable) -> Result<GaussianInt> {
    let (p, l) = (table.p, table.l);
    let mut re = BigInt::from(big(p).pow(2 * l)) * BigInt::from(table.top.clone());
    let mut im = BigInt::zero();
    for (j, c) in table.star.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let g = gauss_product_exact(p, l, j as u32)?;
        let c = BigInt::from(c.clone());
        re += &c * g.re;
        im += c * g.im;
    }
    Ok(GaussianInt { re, im })
}

/// `S_1(p^l, a)` for odd `p`, exact and independent of `a`.
pub fn s1_prime_power(spec: FormSpec, p: u64, l: u32) -> Result<BigInt> {
    if p == 2 {
        return Err(Error::input("S_1 at p = 2 depends on a; use the direct unit sum"));
    }
    let v = s1_from_table(&mstar_chain(spec, p, l)?)?;
    debug_assert!(v.im.is_zero());
    Ok(v.re)
}

/// The same assembly with the tabulated `p = 2` Gauss products (which ignore
/// the dependence on `a mod 4`). Diagnostic only.
pub fn s1_prime_power_tabulated(spec: FormSpec, p: u64, l: u32) -> Result<GaussianInt> {
    s1_from_table(&mstar_chain(spec, p, l)?)
}

/// `T(p^l) = sum_x c_{p^l}(x^d)` in closed form: the Ramanujan sum is
/// `phi(p^l)` on `p^l | x^d`, `-p^{l-1}` on `p^{l-1} || x^d`, zero otherwise.
pub fn t_prime_power(spec: FormSpec, p: u64, l: u32) -> BigInt {
    let d = spec.d();
    let pb = BigInt::from(p);
    let vanish = pb.pow(l - l.div_ceil(d));
    let exact_lower = if (l - 1).is_multiple_of(d) {
        let m = (l - 1) / d;
        pb.pow(l - m) - pb.pow(l - m - 1)
    } else {
        BigInt::zero()
    };
    (pb.pow(l) - pb.pow(l - 1)) * vanish - pb.pow(l - 1) * exact_lower
}

/// One normalized term `S(p^l)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalTerm {
    pub p: u64,
    pub l: u32,
    pub value: f64,
    /// Exact rational value (odd primes); serialized as a decimal fraction string.
    #[serde(with = "opt_rational")]
    pub exact: Option<BigRational>,
}

mod opt_rational {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<BigRational>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(r) => s.serialize_some(&r.to_string()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BigRational>, D::Error> {
        let s: Option<String> = Option::deserialize(d)?;
        s.map(|s| s.parse().map_err(serde::de::Error::custom)).transpose()
    }
}

fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// `S(p^l) = p^{-(2d+1)l} sum_{(a,p)=1} S_1(p^l,a)^2 S_2(p^l,a)`.
pub fn s_local(spec: FormSpec, p: u64, l: u32, budgets: &Budgets, exec: Execution) -> Result<LocalTerm> {
    check_prime_level(p, l)?;
    if p == 2 {
        let q = 1u64
            .checked_shl(l)
            .filter(|&q| q <= budgets.residue_modulus)
            .ok_or_else(|| Error::capacity("2-adic modulus", format!("2^{l}"), budgets.residue_modulus))?;
        let v = normalized_s(spec, q, budgets, exec)?;
        if v.im.abs() > 1e-9 {
            return Err(Error::Anomaly(format!("S(2^{l}) has imaginary part {}", v.im)));
        }
        return Ok(LocalTerm {
            p,
            l,
            value: v.re,
            exact: None,
        });
    }
    let s1 = s1_prime_power(spec, p, l)?;
    let num = &s1 * &s1 * t_prime_power(spec, p, l);
    let den = BigInt::from(p).pow((2 * spec.d() + 1) * l);
    let exact = BigRational::new(num, den);
    Ok(LocalTerm {
        p,
        l,
        value: rational_to_f64(&exact),
        exact: Some(exact),
    })
}

/// `sigma_p = 1 + sum_{l=1}^{L} S(p^l)` with its truncation data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalFactor {
    pub p: u64,
    pub levels: u32,
    pub terms: Vec<f64>,
    pub sigma: f64,
    /// `max_l |S(p^l)| p^{(1+1/d) l}` over the computed levels.
    pub fit_constant: f64,
    /// Geometric bound on the omitted levels from the fitted constant.
    pub truncation_tail: f64,
}

fn decay_exponent(spec: FormSpec) -> f64 {
    1.0 + 1.0 / f64::from(spec.d())
}

const MAX_LEVELS: u32 = 64;

/// Local factor with the level count chosen so the fitted geometric tail is
/// below `tol` (at least two levels). At `p = 2` the level count is also
/// capped by the residue budget; the remaining tail is then reported.
pub fn local_factor(spec: FormSpec, p: u64, tol: f64, budgets: &Budgets, exec: Execution) -> Result<LocalFactor> {
    let s = decay_exponent(spec);
    let pf = p as f64;
    let ratio = pf.powf(-s);
    let mut terms = Vec::new();
    let mut fit = 0f64;
    let mut tail = f64::INFINITY;
    for l in 1..=MAX_LEVELS {
        if p == 2 && (1u64 << l) > budgets.residue_modulus {
            break;
        }
        let term = s_local(spec, p, l, budgets, exec)?;
        fit = fit.max(term.value.abs() * pf.powf(s * f64::from(l)));
        terms.push(term.value);
        tail = fit * pf.powf(-s * f64::from(l + 1)) / (1.0 - ratio);
        if l >= 2 && tail < tol {
            break;
        }
    }
    if terms.is_empty() {
        return Err(Error::capacity("2-adic modulus", 2, budgets.residue_modulus));
    }
    let sigma = 1.0 + terms.iter().sum::<f64>();
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(Error::Anomaly(format!(
            "local factor sigma_{p} = {sigma} is not positive"
        )));
    }
    Ok(LocalFactor {
        p,
        levels: terms.len() as u32,
        terms,
        sigma,
        fit_constant: fit,
        truncation_tail: tail,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesMode {
    Euler,
    PartialSum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesEstimate {
    pub value: f64,
    pub prime_bound: u64,
    pub tail_bound: f64,
    pub mode: SeriesMode,
    /// Fitted constant `C` in `|S(p^l)| <= C p^{-(1+1/d) l}`.
    pub fit_constant: f64,
    pub factors: Vec<LocalFactor>,
}

/// `sum_{n > b} n^{-e}` bounded by `b^{1-e}/(e-1)`.
fn power_tail(b: f64, e: f64) -> f64 {
    b.powf(1.0 - e) / (e - 1.0)
}

/// Euler product `prod_{p <= prime_bound} sigma_p`.
///
/// `tail_bound` combines the per-prime truncation tails with a bound on
/// `sum_{p > prime_bound} |sigma_p - 1|` built from per-level fitted constants
/// over the odd primes. For odd `p`, `S(p) = 0` exactly because `T(p) = 0`.
pub fn singular_series(
    spec: FormSpec,
    prime_bound: u64,
    tol: f64,
    budgets: &Budgets,
    exec: Execution,
) -> Result<SeriesEstimate> {
    if prime_bound < 2 {
        return Err(Error::input("prime bound must be at least 2"));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::input("tolerance must be positive"));
    }
    if spec.d() == 1 {
        // S_1(q, a) = 0 for every q > 1
        return Ok(SeriesEstimate {
            value: 1.0,
            prime_bound,
            tail_bound: 0.0,
            mode: SeriesMode::Euler,
            fit_constant: 0.0,
            factors: Vec::new(),
        });
    }
    let primes = primes_up_to(prime_bound);
    let factors: Vec<LocalFactor> = map_indexed(primes.len(), exec, |i| {
        local_factor(spec, primes[i], tol, budgets, Execution::Sequential)
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let value: f64 = factors.iter().map(|f| f.sigma).product();
    let s = decay_exponent(spec);
    let mut per_level: Vec<f64> = Vec::new();
    let mut fit = 0f64;
    for f in factors.iter().filter(|f| f.p != 2) {
        for (i, t) in f.terms.iter().enumerate() {
            let c = t.abs() * (f.p as f64).powf(s * (i + 1) as f64);
            if per_level.len() <= i {
                per_level.resize(i + 1, 0.0);
            }
            per_level[i] = per_level[i].max(c);
            fit = fit.max(c);
        }
    }
    let b = prime_bound as f64;
    let mut prime_tail = 0.0;
    for l in 1..=MAX_LEVELS as usize {
        let c = per_level.get(l - 1).copied().unwrap_or(fit);
        let contrib = c * power_tail(b, s * l as f64);
        prime_tail += contrib;
        if l > per_level.len() && contrib < 1e-300 {
            break;
        }
    }
    let truncation: f64 = factors.iter().map(|f| f.truncation_tail / f.sigma).sum();
    let rel = truncation + prime_tail;
    Ok(SeriesEstimate {
        value,
        prime_bound,
        tail_bound: value * rel.exp_m1(),
        mode: SeriesMode::Euler,
        fit_constant: fit,
        factors,
    })
}

/// Memo of `S(p^l)` values for building `S(q)` multiplicatively.
pub struct LocalTermCache<'a> {
    spec: FormSpec,
    budgets: &'a Budgets,
    exec: Execution,
    memo: HashMap<(u64, u32), f64>,
}

impl<'a> LocalTermCache<'a> {
    pub fn new(spec: FormSpec, budgets: &'a Budgets, exec: Execution) -> Self {
        LocalTermCache {
            spec,
            budgets,
            exec,
            memo: HashMap::new(),
        }
    }

    /// `S(q)` as the product of its prime-power terms.
    pub fn s_of(&mut self, q: u64) -> Result<f64> {
        let mut v = 1.0;
        for (p, l) in factorize(q) {
            let t = match self.memo.get(&(p, l)) {
                Some(&t) => t,
                None => {
                    let t = s_local(self.spec, p, l, self.budgets, self.exec)?.value;
                    self.memo.insert((p, l), t);
                    t
                }
            };
            v *= t;
        }
        Ok(v)
    }
}

/// Partial sum `sum_{q <= Q} S(q)`; the tail uses the fitted constant of
/// `|S(q)| q^{1+1/d}` over the computed range.
pub fn partial_singular_series(
    spec: FormSpec,
    q_max: u64,
    budgets: &Budgets,
    exec: Execution,
) -> Result<SeriesEstimate> {
    if q_max == 0 {
        return Err(Error::input("Q must be positive"));
    }
    let s = decay_exponent(spec);
    let mut cache = LocalTermCache::new(spec, budgets, exec);
    let mut value = 0.0;
    let mut fit = 0f64;
    for q in 1..=q_max {
        let t = cache.s_of(q)?;
        value += t;
        if q > 1 {
            fit = fit.max(t.abs() * (q as f64).powf(s));
        }
    }
    Ok(SeriesEstimate {
        value,
        prime_bound: q_max,
        tail_bound: fit * power_tail(q_max as f64, s),
        mode: SeriesMode::PartialSum,
        fit_constant: fit,
        factors: Vec::new(),
    })
}

/// `M_f(p^L) / p^{2dL}` where `M_f(q) = #{x mod q : f(x) = 0 mod q}`, from
/// residue counts of `f_d` and of `d`-th powers.
pub fn local_density_oracle(spec: FormSpec, p: u64, levels: u32, budgets: &Budgets) -> Result<BigRational> {
    check_prime_level(p, levels)?;
    let q = p
        .checked_pow(levels)
        .filter(|&q| q <= budgets.residue_modulus)
        .ok_or_else(|| {
            Error::capacity(
                "local density modulus",
                format!("{p}^{levels}"),
                budgets.residue_modulus,
            )
        })?;
    let d = spec.d();
    if (0..2 * d)
        .try_fold(1u128, |acc, _| acc.checked_mul(u128::from(q)))
        .is_none()
    {
        return Err(Error::capacity(
            "local density count width",
            format!("q^{} with q = {q}", 2 * d),
            "2^128",
        ));
    }
    let counts = crate::expsums::residue_counts(spec, q, budgets)?;
    let qu = q as usize;
    let support: Vec<(usize, u128)> = (0..qu).filter(|&u| counts[u] > 0).map(|u| (u, counts[u])).collect();
    let mut sums = vec![0u128; qu];
    for &(u, cu) in &support {
        for &(v, cv) in &support {
            sums[(u + v) % qu] += cu * cv;
        }
    }
    let mut powers = vec![0u64; qu];
    for x in 0..q {
        powers[crate::arith::pow_mod(x, d, q) as usize] += 1;
    }
    let solutions: BigUint = sums
        .iter()
        .zip(&powers)
        .filter(|(_, &c)| c > 0)
        .map(|(&s, &c)| BigUint::from(s) * c)
        .sum();
    let den = BigInt::from(q).pow(2 * d);
    Ok(BigRational::new(BigInt::from(solutions), den))
}

/// `(l+1)^{2k-2} p^{2kl-3l}` (even `d`) or `(l+1)^{2k-1} p^{2kl-2l}` (odd `d`):
/// the size bound for `M_{d-2}(p, l, l)`.
pub fn top_bound(spec: FormSpec, p: u64, l: u32) -> BigRational {
    let k = i64::from(spec.k());
    let l64 = i64::from(l);
    let (e_l, e_p) = if spec.is_odd() {
        (2 * k - 1, 2 * k * l64 - 2 * l64)
    } else {
        (2 * k - 2, 2 * k * l64 - 3 * l64)
    };
    signed_pow(BigInt::from(l + 1), e_l) * signed_pow(BigInt::from(p), e_p)
}

fn signed_pow(base: BigInt, e: i64) -> BigRational {
    let v = BigRational::from_integer(base.pow(e.unsigned_abs() as u32));
    if e >= 0 {
        v
    } else {
        v.recip()
    }
}

/// `(p^l)^{d-1} (l+1)^{d-1}`, the divisor-function bound for `|S_1(p^l, a)|`.
pub fn s1_bound(spec: FormSpec, p: u64, l: u32) -> BigUint {
    let e = spec.d() - 1;
    big(p).pow(l * e) * BigUint::from(l + 1).pow(e)
}

/// `|x|` of an exact rational, as `f64`.
pub fn abs_f64(r: &BigRational) -> f64 {
    rational_to_f64(&r.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expsums::{s1_all_units, t_sum};

    fn spec(d: u32) -> FormSpec {
        FormSpec::new(d).unwrap()
    }

    fn b() -> Budgets {
        Budgets::default()
    }

    fn brute_m2(p: u64, l: u32, j: u32, exact: bool) -> u64 {
        let q = p.pow(l);
        let pj = p.pow(j);
        let mut n = 0;
        for w in 1..=q {
            for x in 1..=q {
                let v = (w * w + x * x) % q;
                let divisible = v.is_multiple_of(pj);
                let exactly = divisible && (j == l || !v.is_multiple_of(pj * p));
                if (exact && exactly) || (!exact && divisible) {
                    n += 1;
                }
            }
        }
        n
    }

    #[test]
    fn m2_examples() {
        assert_eq!(m2(5, 1, 1).unwrap(), BigUint::from(9u32));
        assert_eq!(m2(3, 1, 1).unwrap(), BigUint::from(1u32));
        assert_eq!(m2(2, 1, 1).unwrap(), BigUint::from(2u32));
        assert!(m2(4, 1, 1).is_err());
        assert!(m2(5, 1, 2).is_err());
        assert!(m2_star(5, 2, 2).is_err());
    }

    #[test]
    fn m2_matches_enumeration() {
        for p in [2u64, 3, 5, 7, 13] {
            for l in 1..=3 {
                if p.pow(l) > 400 {
                    continue;
                }
                for j in 0..=l {
                    assert_eq!(
                        m2(p, l, j).unwrap(),
                        BigUint::from(brute_m2(p, l, j, false)),
                        "p={p} l={l} j={j}"
                    );
                }
                for j in 0..l {
                    assert_eq!(m2_star(p, l, j).unwrap(), BigUint::from(brute_m2(p, l, j, true)));
                }
            }
        }
    }

    #[test]
    fn telescoping() {
        for p in primes_up_to(50) {
            for l in 1..=4 {
                for j in 0..l {
                    assert_eq!(
                        m2_star(p, l, j).unwrap(),
                        m2(p, l, j).unwrap() - m2(p, l, j + 1).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn chain_base_cases() {
        for p in [2u64, 3, 5] {
            for l in 1..=3 {
                let t = mstar_chain(spec(2), p, l).unwrap();
                assert_eq!(t.star[0], BigUint::one());
                assert!(t.star[1..].iter().all(Zero::is_zero));
                assert!(t.top.is_zero());
                let t = mstar_chain(spec(3), p, l).unwrap();
                for j in 0..l {
                    assert_eq!(t.star[j as usize], big(p).pow(l - j - 1) * (p - 1));
                }
                assert_eq!(t.top, BigUint::one());
                let t = mstar_chain(spec(1), p, l).unwrap();
                assert!(t.top.is_zero() && t.star.iter().all(Zero::is_zero));
            }
        }
        let t = mstar_chain(spec(4), 5, 1).unwrap();
        assert_eq!(
            (t.star[0].clone(), t.top.clone()),
            (BigUint::from(16u32), BigUint::from(9u32))
        );
    }

    #[test]
    fn chain_mass() {
        for d in 2..=7 {
            for p in [2u64, 3, 5, 13] {
                for l in 1..=4 {
                    let t = mstar_chain(spec(d), p, l).unwrap();
                    assert_eq!(t.mass(), big(p).pow((d - 2) * l));
                }
            }
        }
    }

    #[test]
    fn s1_examples() {
        for p in [3u64, 5, 7] {
            for l in 1..=3 {
                assert!(s1_prime_power(spec(1), p, l).unwrap().is_zero());
                let g = gauss_product_exact(p, l, 0).unwrap().re;
                assert_eq!(s1_prime_power(spec(2), p, l).unwrap(), g);
            }
        }
        assert_eq!(s1_prime_power(spec(4), 3, 1).unwrap(), BigInt::from(-15));
        assert!(s1_prime_power(spec(4), 2, 1).is_err());
    }

    #[test]
    fn s1_matches_residue_route() {
        for d in 2..=6 {
            for (p, l) in [(3u64, 1u32), (3, 2), (5, 1), (5, 2), (7, 2), (13, 1)] {
                let exact = s1_prime_power(spec(d), p, l).unwrap().to_f64().unwrap();
                let vals = s1_all_units(spec(d), p.pow(l), &b(), Execution::Sequential).unwrap();
                for (_, v) in vals {
                    assert!((v.re - exact).abs() <= 1e-9 * exact.abs().max(1.0), "d={d} p={p} l={l}");
                    assert!(v.im.abs() <= 1e-9 * exact.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn t_closed_form() {
        for d in 1..=6 {
            for p in [2u64, 3, 5, 7] {
                for l in 1..=4 {
                    let q = p.pow(l);
                    if q > 3000 {
                        continue;
                    }
                    assert_eq!(
                        t_prime_power(spec(d), p, l),
                        BigInt::from(t_sum(spec(d), q).unwrap()),
                        "d={d} q={q}"
                    );
                }
            }
        }
    }

    #[test]
    fn linear_form_series_is_one() {
        let e = singular_series(spec(1), 1000, 1e-6, &b(), Execution::Sequential).unwrap();
        assert_eq!((e.value, e.tail_bound), (1.0, 0.0));
        // the generic path agrees
        for p in [2u64, 3, 5] {
            let f = local_factor(spec(1), p, 1e-6, &b(), Execution::Sequential).unwrap();
            assert!((f.sigma - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn d2_terms_respect_bound() {
        let budgets = b();
        let mut cache = LocalTermCache::new(spec(2), &budgets, Execution::Sequential);
        for q in 2..=300u64 {
            let v = cache.s_of(q).unwrap();
            assert!(v.abs() <= 4.0 * 2f64.sqrt() * (q as f64).powf(-1.5) + 1e-15, "q={q}");
        }
    }

    #[test]
    fn odd_prime_first_level_vanishes() {
        for d in 2..=5 {
            for p in [3u64, 5, 7, 11] {
                assert_eq!(s_local(spec(d), p, 1, &b(), Execution::Sequential).unwrap().value, 0.0);
            }
        }
    }

    #[test]
    fn density_oracle_trivial_form() {
        for p in [2u64, 3, 5] {
            for l in 1..=3 {
                assert_eq!(local_density_oracle(spec(1), p, l, &b()).unwrap(), BigRational::one());
            }
        }
    }

    #[test]
    fn density_oracle_matches_enumeration() {
        // d = 2, p = 3, L = 1: all 3^5 points
        let s = spec(2);
        let mut zeros = 0u64;
        for idx in 0..3u64.pow(5) {
            let x: Vec<i64> = (0..5).map(|i| ((idx / 3u64.pow(i)) % 3) as i64).collect();
            if s.eval_f_i128(&x).rem_euclid(3) == 0 {
                zeros += 1;
            }
        }
        let oracle = local_density_oracle(s, 3, 1, &b()).unwrap();
        assert_eq!(oracle, BigRational::new(BigInt::from(zeros), BigInt::from(81)));
        let partial = 1.0 + s_local(s, 3, 1, &b(), Execution::Sequential).unwrap().value;
        assert!((oracle.to_f64().unwrap() - partial).abs() < 1e-12);
    }

    #[test]
    fn partial_sum_identity_small() {
        for d in [2u32, 3] {
            for p in [2u64, 3] {
                let mut acc = 1.0;
                for l in 1..=2 {
                    acc += s_local(spec(d), p, l, &b(), Execution::Sequential).unwrap().value;
                    let oracle = local_density_oracle(spec(d), p, l, &b()).unwrap().to_f64().unwrap();
                    assert!((acc - oracle).abs() < 1e-9, "d={d} p={p} l={l}");
                }
            }
        }
    }

    #[test]
    fn bounds_hold_on_small_tables() {
        for d in 1..=6 {
            for p in [2u64, 3, 5, 7] {
                for l in 1..=3 {
                    let t = mstar_chain(spec(d), p, l).unwrap();
                    let top = BigRational::from_integer(BigInt::from(t.top.clone()));
                    assert!(top < top_bound(spec(d), p, l), "d={d} p={p} l={l}");
                    if p != 2 {
                        let v = s1_prime_power(spec(d), p, l).unwrap();
                        assert!(v.magnitude() <= &s1_bound(spec(d), p, l));
                    }
                }
            }
        }
    }

    #[test]
    fn nonpositive_budget_edge_cases() {
        assert!(singular_series(spec(2), 1, 1e-6, &b(), Execution::Sequential).is_err());
        assert!(singular_series(spec(2), 10, 0.0, &b(), Execution::Sequential).is_err());
        let tiny = Budgets {
            residue_modulus: 4,
            ..Budgets::default()
        };
        assert!(matches!(
            s_local(spec(3), 2, 3, &tiny, Execution::Sequential),
            Err(Error::Capacity { .. })
        ));
        assert!(matches!(
            local_density_oracle(spec(3), 3, 2, &tiny),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn cubic_s1_bound() {
        // |S_1(p^l, a)| < (l+1) p^{2l} for d = 3, including p = 2 by direct sums
        for p in [2u64, 3, 5, 7, 11] {
            for l in 1..=4 {
                let q = p.pow(l);
                if q > 2048 {
                    continue;
                }
                let bound = (l + 1) as f64 * (q * q) as f64;
                for (_, v) in s1_all_units(spec(3), q, &b(), Execution::Sequential).unwrap() {
                    assert!(v.norm() < bound, "p={p} l={l}");
                }
            }
        }
    }

    #[test]
    fn tabulated_two_adic_variant_differs() {
        // the a-independent p = 2 table is exact for d = 2 but not beyond
        let t = |d: u32, l: u32| {
            let g = s1_prime_power_tabulated(spec(d), 2, l).unwrap().to_complex();
            let tv = t_prime_power(spec(d), 2, l).to_f64().unwrap();
            (g * g * tv).re / 2f64.powi(((2 * d + 1) * l) as i32)
        };
        for l in 1..=5 {
            let direct = s_local(spec(2), 2, l, &b(), Execution::Sequential).unwrap().value;
            assert!((direct - t(2, l)).abs() < 1e-12);
        }
        let direct = s_local(spec(3), 2, 2, &b(), Execution::Sequential).unwrap().value;
        assert!((direct - 0.0625).abs() < 1e-12 && t(3, 2) == 0.0);
        let oracle = local_density_oracle(spec(3), 2, 2, &b()).unwrap().to_f64().unwrap();
        let partial = 1.0 + direct + s_local(spec(3), 2, 1, &b(), Execution::Sequential).unwrap().value;
        assert!((oracle - partial).abs() < 1e-12);
    }

    #[test]
    fn series_is_positive() {
        for d in 2..=5 {
            let e = singular_series(spec(d), 100, 1e-6, &b(), Execution::default()).unwrap();
            assert!(e.value > 0.0 && e.tail_bound >= 0.0, "d={d}");
            assert!(e.factors.iter().all(|f| f.sigma > 0.0 && f.levels >= 2));
        }
    }
}
