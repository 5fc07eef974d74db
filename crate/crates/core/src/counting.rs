//! Exact representation counts `a(n)` of `f_d` over the box `[1, P]^d` and the
//! zero count `R(0; P)` of `f` over `[1, P]^{2d+1}`.
//!
//! `a(n)` is built by repeated Dirichlet convolution of the two-squares
//! counts, so only values that actually occur are stored. The zero count is
//! the additive convolution `sum_t sum_n a(n) a(t^d - n)`, evaluated only at
//! the `P` targets `t^d`.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use num_bigint::BigUint;
use num_traits::{CheckedAdd, CheckedMul, One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, shard_ranges, Execution};
use crate::forms::FormSpec;
use crate::Budgets;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountMethod {
    Bruteforce,
    Convolution,
}

impl std::str::FromStr for CountMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bruteforce" => Ok(CountMethod::Bruteforce),
            "convolution" => Ok(CountMethod::Convolution),
            other => Err(Error::input(format!("unknown count method `{other}`"))),
        }
    }
}

/// Storage for the counts: 64-bit words, promoted to big integers only when a
/// checked operation overflows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Counts {
    Word(Vec<u64>),
    Big(Vec<BigUint>),
}

/// Sparse table of `a(n) = #{x in [1,P]^d : f_d(x) = n}`; absent keys are zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountTable {
    spec: FormSpec,
    p: u64,
    nmax: u64,
    keys: Vec<u64>,
    counts: Counts,
}

impl CountTable {
    pub fn spec(&self) -> FormSpec {
        self.spec
    }

    pub fn box_side(&self) -> u64 {
        self.p
    }

    /// Upper end `2^k P^d` of the value range.
    pub fn nmax(&self) -> u64 {
        self.nmax
    }

    /// Sorted list of values `n` with `a(n) > 0`.
    pub fn keys(&self) -> &[u64] {
        &self.keys
    }

    pub fn counts(&self) -> &Counts {
        &self.counts
    }

    pub fn nonzero_len(&self) -> usize {
        self.keys.len()
    }

    pub fn get(&self, n: u64) -> BigUint {
        match self.keys.binary_search(&n) {
            Ok(i) => self.count_at(i),
            Err(_) => BigUint::zero(),
        }
    }

    fn count_at(&self, i: usize) -> BigUint {
        match &self.counts {
            Counts::Word(c) => BigUint::from(c[i]),
            Counts::Big(c) => c[i].clone(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, BigUint)> + '_ {
        (0..self.keys.len()).map(move |i| (self.keys[i], self.count_at(i)))
    }

    /// Counts as floating-point weights, for generating-function sums.
    pub fn weights(&self) -> Vec<(u64, f64)> {
        match &self.counts {
            Counts::Word(c) => self.keys.iter().zip(c).map(|(&n, &c)| (n, c as f64)).collect(),
            Counts::Big(c) => self
                .keys
                .iter()
                .zip(c)
                .map(|(&n, c)| (n, c.to_f64().unwrap_or(f64::INFINITY)))
                .collect(),
        }
    }

    /// `sum_n a(n)`, which must equal `P^d`.
    pub fn total(&self) -> BigUint {
        match &self.counts {
            Counts::Word(c) => c.iter().map(|&x| BigUint::from(x)).sum(),
            Counts::Big(c) => c.iter().sum(),
        }
    }

    /// `sum_n a(n)^2`, equal to the integral of `|F_1|^2` over a period.
    pub fn second_moment(&self) -> BigUint {
        match &self.counts {
            Counts::Word(c) => c.iter().map(|&x| BigUint::from(x).pow(2)).sum(),
            Counts::Big(c) => c.iter().map(|x| x * x).sum(),
        }
    }

    pub fn max_count(&self) -> BigUint {
        self.iter().map(|(_, c)| c).max().unwrap_or_default()
    }
}

/// `#{(s,t) in [1,P]^2 : s^2 + t^2 = m}` for every attained `m`.
pub fn r2_box(p: u64) -> Result<BTreeMap<u64, u64>> {
    if p == 0 {
        return Err(Error::input("box side P must be positive"));
    }
    if p > 3_000_000_000 {
        return Err(Error::capacity("two-squares range", format!("P = {p}"), "P <= 3e9"));
    }
    let top = 2 * p * p;
    if top <= DENSE_R2_LIMIT {
        let mut dense = vec![0u64; top as usize + 1];
        for s in 1..=p {
            for t in 1..=p {
                dense[(s * s + t * t) as usize] += 1;
            }
        }
        return Ok(dense
            .into_iter()
            .enumerate()
            .filter(|&(_, c)| c > 0)
            .map(|(m, c)| (m as u64, c))
            .collect());
    }
    Ok(r2_merge(p))
}

/// k-way merge of the rows `s^2 + t^2`, each increasing in `t`; memory `O(P)`.
fn r2_merge(p: u64) -> BTreeMap<u64, u64> {
    let mut heap: BinaryHeap<Reverse<(u64, u64)>> = (1..=p).map(|s| Reverse((s * s + 1, s))).collect();
    let mut next_t = vec![2u64; p as usize + 1];
    let mut out: Vec<(u64, u64)> = Vec::new();
    while let Some(Reverse((m, s))) = heap.pop() {
        match out.last_mut() {
            Some((last, c)) if *last == m => *c += 1,
            _ => out.push((m, 1)),
        }
        let t = next_t[s as usize];
        if t <= p {
            heap.push(Reverse((s * s + t * t, s)));
            next_t[s as usize] = t + 1;
        }
    }
    out.into_iter().collect()
}

const DENSE_R2_LIMIT: u64 = 1 << 26;

fn nmax_for(spec: FormSpec, p: u64) -> Result<u64> {
    let k = spec.k();
    (0..spec.d())
        .try_fold(1u64 << k.min(63), |acc, _| acc.checked_mul(p))
        .filter(|_| k < 63)
        .ok_or_else(|| Error::capacity("value range 2^k P^d", format!("d = {}, P = {p}", spec.d()), "2^64"))
}

trait Tally: Clone + Send + Sync + Zero + CheckedAdd + CheckedMul + From<u64> {}
impl<T: Clone + Send + Sync + Zero + CheckedAdd + CheckedMul + From<u64>> Tally for T {}

/// One Dirichlet convolution step `(cur * factor)(n) = sum_{mn' = n} cur(m) factor(n')`
/// over sparse sorted inputs. Returns `None` on overflow of `T`.
fn dirichlet_step<T: Tally>(cur: &[(u64, T)], factor: &[(u64, T)], exec: Execution) -> Option<Vec<(u64, T)>> {
    let shards = shard_ranges(cur.len(), 32);
    let parts: Vec<Option<Vec<(u64, T)>>> = map_indexed(shards.len(), exec, |s| {
        let mut out = Vec::with_capacity(shards[s].len() * factor.len());
        for (m, cm) in &cur[shards[s].clone()] {
            for (n, cn) in factor {
                out.push((m * n, cm.checked_mul(cn)?));
            }
        }
        merge_sorted(out)
    });
    let mut all = Vec::new();
    for part in parts {
        all.extend(part?);
    }
    merge_sorted(all)
}

fn merge_sorted<T: Tally>(mut v: Vec<(u64, T)>) -> Option<Vec<(u64, T)>> {
    v.sort_unstable_by_key(|e| e.0);
    let mut out: Vec<(u64, T)> = Vec::with_capacity(v.len());
    for (k, c) in v {
        match out.last_mut() {
            Some(last) if last.0 == k => last.1 = last.1.checked_add(&c)?,
            _ => out.push((k, c)),
        }
    }
    Some(out)
}

fn build_table<T: Tally>(
    spec: FormSpec,
    p: u64,
    r2: &BTreeMap<u64, u64>,
    budgets: &Budgets,
    exec: Execution,
) -> Result<Option<Vec<(u64, T)>>> {
    let factor: Vec<(u64, T)> = r2.iter().map(|(&m, &c)| (m, T::from(c))).collect();
    let mut cur: Vec<(u64, T)> = if spec.is_odd() {
        (1..=p).map(|x| (x, T::from(1))).collect()
    } else {
        vec![(1, T::from(1))]
    };
    for _ in 0..spec.k() {
        let work = (cur.len() as u64).saturating_mul(factor.len() as u64);
        if work > budgets.table_entries {
            return Err(Error::capacity(
                "representation table entries",
                work,
                budgets.table_entries,
            ));
        }
        match dirichlet_step(&cur, &factor, exec) {
            Some(next) => cur = next,
            None => return Ok(None),
        }
    }
    Ok(Some(cur))
}

/// The representation counts `a(n)` of `f_d` on `[1, P]^d`.
pub fn rep_counts(spec: FormSpec, p: u64, budgets: &Budgets, exec: Execution) -> Result<CountTable> {
    if p == 0 {
        return Err(Error::input("box side P must be positive"));
    }
    let nmax = nmax_for(spec, p)?;
    let r2 = if spec.k() > 0 { r2_box(p)? } else { BTreeMap::new() };
    let (keys, counts) = match build_table::<u64>(spec, p, &r2, budgets, exec)? {
        Some(v) => {
            let (k, c) = v.into_iter().unzip();
            (k, Counts::Word(c))
        }
        None => {
            let v = build_table::<BigUint>(spec, p, &r2, budgets, exec)?.expect("big integer counts cannot overflow");
            let (k, c) = v.into_iter().unzip();
            (k, Counts::Big(c))
        }
    };
    Ok(CountTable {
        spec,
        p,
        nmax,
        keys,
        counts,
    })
}

/// Arbitrary-precision count with a decimal-string JSON form.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ExactCount(pub BigUint);

impl ExactCount {
    pub fn value(&self) -> &BigUint {
        &self.0
    }
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::INFINITY)
    }
}

impl std::fmt::Display for ExactCount {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u64> for ExactCount {
    fn from(v: u64) -> Self {
        ExactCount(BigUint::from(v))
    }
}

impl Serialize for ExactCount {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for ExactCount {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse::<BigUint>().map(ExactCount).map_err(serde::de::Error::custom)
    }
}

/// `R(0; P) = #{x in [1,P]^{2d+1} : f(x) = 0}`.
pub fn count_zeros_exact(
    spec: FormSpec,
    p: u64,
    method: CountMethod,
    budgets: &Budgets,
    exec: Execution,
) -> Result<ExactCount> {
    if p == 0 {
        return Err(Error::input("box side P must be positive"));
    }
    match method {
        CountMethod::Bruteforce => count_bruteforce(spec, p, budgets, exec),
        CountMethod::Convolution => {
            let table = rep_counts(spec, p, budgets, exec)?;
            Ok(zeros_from_table(&table, exec))
        }
    }
}

fn count_bruteforce(spec: FormSpec, p: u64, budgets: &Budgets, exec: Execution) -> Result<ExactCount> {
    let n = spec.n_vars();
    let points = (0..n).try_fold(1u128, |acc, _| acc.checked_mul(u128::from(p)));
    match points {
        Some(pts) if pts <= budgets.bruteforce_points => {}
        _ => {
            return Err(Error::capacity(
                "brute-force point evaluations",
                format!("P^{n} with P = {p}"),
                budgets.bruteforce_points,
            ))
        }
    }
    let p = p as i64;
    let per_first: Vec<u64> = map_indexed(p as usize, exec, |i| {
        let mut x = vec![1i64; n];
        x[0] = i as i64 + 1;
        let mut zeros = 0u64;
        loop {
            if spec.eval_f_i128(&x) == 0 {
                zeros += 1;
            }
            // odometer over coordinates 1..n
            let mut pos = n - 1;
            loop {
                if pos == 0 {
                    return zeros;
                }
                if x[pos] < p {
                    x[pos] += 1;
                    break;
                }
                x[pos] = 1;
                pos -= 1;
            }
        }
    });
    Ok(ExactCount(per_first.into_iter().map(BigUint::from).sum()))
}

/// `sum_{t=1}^{P} sum_n a(n) a(t^d - n)`, by a two-pointer sweep over the
/// sorted keys for each target.
pub fn zeros_from_table(table: &CountTable, exec: Execution) -> ExactCount {
    let d = table.spec().d();
    let p = table.box_side();
    let keys = table.keys();
    let per_t: Vec<BigUint> = map_indexed(p as usize, exec, |i| {
        let target = (i as u64 + 1).pow(d);
        match table.counts() {
            Counts::Word(c) => pair_sum_word(keys, c, target)
                .map(BigUint::from)
                .unwrap_or_else(|| pair_sum_big(keys, &|j| BigUint::from(c[j]), target)),
            Counts::Big(c) => pair_sum_big(keys, &|j| c[j].clone(), target),
        }
    });
    ExactCount(per_t.into_iter().sum())
}

fn two_sum_pairs(keys: &[u64], target: u64, mut visit: impl FnMut(usize, usize)) {
    if keys.is_empty() {
        return;
    }
    let (mut i, mut j) = (0usize, keys.len() - 1);
    while i <= j {
        let s = keys[i] + keys[j];
        if s == target {
            visit(i, j);
            i += 1;
            if j == 0 {
                break;
            }
            j -= 1;
        } else if s < target {
            i += 1;
        } else {
            if j == 0 {
                break;
            }
            j -= 1;
        }
    }
}

fn pair_sum_word(keys: &[u64], c: &[u64], target: u64) -> Option<u128> {
    let mut acc = 0u128;
    let mut ok = true;
    two_sum_pairs(keys, target, |i, j| {
        let prod = u128::from(c[i]) * u128::from(c[j]);
        let term = if i == j { Some(prod) } else { prod.checked_mul(2) };
        match term.and_then(|t| acc.checked_add(t)) {
            Some(v) => acc = v,
            None => ok = false,
        }
    });
    ok.then_some(acc)
}

fn pair_sum_big(keys: &[u64], count: &dyn Fn(usize) -> BigUint, target: u64) -> BigUint {
    let mut acc = BigUint::zero();
    two_sum_pairs(keys, target, |i, j| {
        let prod = count(i) * count(j);
        acc += if i == j { prod } else { prod * 2u32 };
    });
    acc
}

/// `sum_n a(n)^2`.
pub fn second_moment_f1(spec: FormSpec, p: u64, budgets: &Budgets, exec: Execution) -> Result<ExactCount> {
    Ok(ExactCount(rep_counts(spec, p, budgets, exec)?.second_moment()))
}

/// `#{y in [-P,P]^d : f_d(y) = 0}` by inclusion-exclusion: `f_d` vanishes iff
/// one of its factors does, and the factors live on disjoint variables.
pub fn vanishing_count_fd(spec: FormSpec, p: u64) -> BigUint {
    let n = BigUint::from(2 * p + 1);
    let all = n.pow(spec.d());
    let pair_nonzero = &n * &n - BigUint::one();
    let mut nonvanishing = pair_nonzero.pow(spec.k());
    if spec.is_odd() {
        nonvanishing *= &n - BigUint::one();
    }
    all - nonvanishing
}

/// Number of points of `[-P,P]^{2d+1}` in the degenerate set
/// `f_d(x) = f_d(y) = z = 0`.
pub fn count_degenerate_zeros(spec: FormSpec, p: u64) -> ExactCount {
    ExactCount(vanishing_count_fd(spec, p).pow(2))
}
