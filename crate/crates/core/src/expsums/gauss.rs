use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};

use crate::arith::is_prime;
use crate::error::{Error, Result};

/// Exact Gaussian integer `re + i im`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GaussianInt {
    pub re: BigInt,
    pub im: BigInt,
}

impl GaussianInt {
    pub fn real(re: BigInt) -> Self {
        GaussianInt { re, im: BigInt::zero() }
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::new(
            self.re.to_f64().unwrap_or(f64::NAN),
            self.im.to_f64().unwrap_or(f64::NAN),
        )
    }
}

/// `(sum_{y mod p^l} e(a u y^2 / p^l))^2` for `p^j || u`, from the case table
/// of squared quadratic Gauss sums.
///
/// For odd `p` the value does not depend on `a` or on the unit part of `u`.
/// For `p = 2` and `j <= l - 2` the true value is `+-2i 2^{l+j}` with the sign
/// set by `a u / 2^j mod 4`; the table records the `+` branch.
pub fn gauss_product_exact(p: u64, l: u32, j: u32) -> Result<GaussianInt> {
    if !is_prime(p) {
        return Err(Error::input(format!("{p} is not prime")));
    }
    if l == 0 || j > l {
        return Err(Error::input(format!(
            "need 0 <= j <= l and l >= 1, got l = {l}, j = {j}"
        )));
    }
    let pb = BigInt::from(p);
    if j == l {
        return Ok(GaussianInt::real(pb.pow(2 * l)));
    }
    let v = pb.pow(l + j);
    Ok(match p % 4 {
        1 => GaussianInt::real(v),
        3 => GaussianInt::real(if (l + j).is_multiple_of(2) { v } else { -v }),
        _ if j + 1 == l => GaussianInt::real(BigInt::zero()),
        _ => GaussianInt {
            re: BigInt::zero(),
            im: v * 2,
        },
    })
}

pub fn gauss_product(p: u64, l: u32, j: u32) -> Result<Complex64> {
    Ok(gauss_product_exact(p, l, j)?.to_complex())
}

/// `sum_{y=1}^{q} e(b y^2 / q)` by direct summation.
pub fn quadratic_gauss_sum(q: u64, b: u64) -> Complex64 {
    let roots = super::unit_roots(q);
    let q128 = u128::from(q);
    (1..=q)
        .map(|y| {
            let r = u128::from(b % q) * (u128::from(y) * u128::from(y) % q128) % q128;
            roots[r as usize]
        })
        .sum()
}
