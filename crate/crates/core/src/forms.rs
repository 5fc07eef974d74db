//! The forms `f_d` (a product of binary sums of squares, times a linear
//! variable when `d` is odd) and `f = f_d(x) + f_d(y) - z^d`.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

/// Degree `d` and the derived shape of the form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct FormSpec {
    d: u32,
}

impl TryFrom<u32> for FormSpec {
    type Error = Error;
    fn try_from(d: u32) -> Result<Self> {
        FormSpec::new(d)
    }
}

impl From<FormSpec> for u32 {
    fn from(s: FormSpec) -> u32 {
        s.d
    }
}

impl FormSpec {
    pub fn new(d: u32) -> Result<Self> {
        if d == 0 {
            return Err(Error::input("degree d must be at least 1"));
        }
        if d > 64 {
            return Err(Error::input(format!("degree d = {d} is unreasonably large")));
        }
        Ok(FormSpec { d })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    /// Number of binary sum-of-squares factors, `floor(d/2)`.
    pub fn k(&self) -> u32 {
        self.d / 2
    }

    pub fn parity(&self) -> Parity {
        if self.d.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn is_odd(&self) -> bool {
        self.d % 2 == 1
    }

    pub fn n_vars(&self) -> usize {
        2 * self.d as usize + 1
    }

    /// The form of degree `d - 2` (the cofactor of the last pair), if any.
    /// `None` stands for the empty form `f_{-1} = 0` when `d = 1`.
    pub fn reduced(&self) -> Option<ReducedForm> {
        if self.d < 2 {
            None
        } else {
            Some(ReducedForm { degree: self.d - 2 })
        }
    }

    /// Index of the linear variable (odd `d` only) and the index pairs of the
    /// quadratic factors, 0-based within a block of `d` coordinates.
    pub fn factor_layout(&self) -> (Option<usize>, Vec<(usize, usize)>) {
        layout(self.d)
    }

    fn check_arity(&self, got: usize, want: usize) -> Result<()> {
        if got != want {
            return Err(Error::input(format!(
                "expected {want} coordinates for d = {}, got {got}",
                self.d
            )));
        }
        Ok(())
    }

    pub fn eval_fd(&self, x: &[BigInt]) -> Result<BigInt> {
        self.check_arity(x.len(), self.d as usize)?;
        Ok(eval_block(self.d, x))
    }

    pub fn eval_f(&self, x: &[BigInt]) -> Result<BigInt> {
        self.check_arity(x.len(), self.n_vars())?;
        let d = self.d as usize;
        let z = &x[2 * d];
        Ok(eval_block(self.d, &x[..d]) + eval_block(self.d, &x[d..2 * d]) - z.pow(self.d))
    }

    /// Exact gradient of `f`, by the product rule on the factored form.
    pub fn gradient_f(&self, x: &[BigInt]) -> Result<Vec<BigInt>> {
        self.check_arity(x.len(), self.n_vars())?;
        let d = self.d as usize;
        let mut grad = Vec::with_capacity(self.n_vars());
        grad.extend(block_gradient(self.d, &x[..d]));
        grad.extend(block_gradient(self.d, &x[d..2 * d]));
        grad.push(-BigInt::from(self.d) * x[2 * d].pow(self.d - 1));
        Ok(grad)
    }

    /// A zero of `f` with nonvanishing gradient: ones at the odd-numbered
    /// variables of the first block and at the last variable.
    pub fn nonsingular_witness(&self) -> Vec<BigInt> {
        let d = self.d as usize;
        let mut x = vec![BigInt::zero(); self.n_vars()];
        let last_odd = 2 * ((d - 1) / 2) + 1;
        for i in (1..=last_odd).step_by(2) {
            x[i - 1] = BigInt::one();
        }
        x[2 * d] = BigInt::one();
        x
    }

    /// Fast evaluation of `f_d` on machine integers. Callers guarantee the
    /// result fits in `i128`.
    pub fn eval_fd_i128(&self, x: &[i64]) -> i128 {
        debug_assert_eq!(x.len(), self.d as usize);
        eval_block_i128(self.d, x)
    }

    pub fn eval_f_i128(&self, x: &[i64]) -> i128 {
        let d = self.d as usize;
        debug_assert_eq!(x.len(), 2 * d + 1);
        eval_block_i128(self.d, &x[..d]) + eval_block_i128(self.d, &x[d..2 * d]) - i128::from(x[2 * d]).pow(self.d)
    }
}

/// `f_m` for `m = d - 2 >= 0`, where `f_0 = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReducedForm {
    pub degree: u32,
}

impl ReducedForm {
    pub fn n_vars(&self) -> usize {
        self.degree as usize
    }

    pub fn eval_u64_mod(&self, x: &[u64], modulus: u64) -> u64 {
        let (lin, pairs) = layout(self.degree);
        let m = u128::from(modulus);
        let mut acc = 1u128 % m;
        if let Some(i) = lin {
            acc = acc * u128::from(x[i]) % m;
        }
        for (a, b) in pairs {
            let s = (u128::from(x[a]) * u128::from(x[a]) + u128::from(x[b]) * u128::from(x[b])) % m;
            acc = acc * s % m;
        }
        acc as u64
    }
}

fn layout(d: u32) -> (Option<usize>, Vec<(usize, usize)>) {
    let d = d as usize;
    if d % 2 == 1 {
        (Some(0), (0..d / 2).map(|i| (2 * i + 1, 2 * i + 2)).collect())
    } else {
        (None, (0..d / 2).map(|i| (2 * i, 2 * i + 1)).collect())
    }
}

fn eval_block(d: u32, x: &[BigInt]) -> BigInt {
    let (lin, pairs) = layout(d);
    let mut acc = lin.map_or_else(BigInt::one, |i| x[i].clone());
    for (a, b) in pairs {
        acc *= &x[a] * &x[a] + &x[b] * &x[b];
    }
    acc
}

fn eval_block_i128(d: u32, x: &[i64]) -> i128 {
    let (lin, pairs) = layout(d);
    let mut acc = lin.map_or(1i128, |i| i128::from(x[i]));
    for (a, b) in pairs {
        let (u, v) = (i128::from(x[a]), i128::from(x[b]));
        acc *= u * u + v * v;
    }
    acc
}

fn block_gradient(d: u32, x: &[BigInt]) -> Vec<BigInt> {
    let (lin, pairs) = layout(d);
    let factors: Vec<BigInt> = lin
        .iter()
        .map(|&i| x[i].clone())
        .chain(pairs.iter().map(|&(a, b)| &x[a] * &x[a] + &x[b] * &x[b]))
        .collect();
    // product of all factors except the one at position `skip`
    let others = |skip: usize| -> BigInt {
        factors
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != skip)
            .fold(BigInt::one(), |acc, (_, f)| acc * f)
    };
    let mut grad = vec![BigInt::zero(); d as usize];
    let offset = usize::from(lin.is_some());
    if let Some(i) = lin {
        grad[i] = others(0);
    }
    for (j, &(a, b)) in pairs.iter().enumerate() {
        let rest = others(j + offset);
        grad[a] = BigInt::from(2) * &x[a] * &rest;
        grad[b] = BigInt::from(2) * &x[b] * &rest;
    }
    grad
}

/// Convenience conversion for tests and the CLI.
pub fn point(coords: &[i64]) -> Vec<BigInt> {
    coords.iter().map(|&c| BigInt::from(c)).collect()
}
