//! Small integer helpers: sieving, factorization, divisor functions and
//! Ramanujan sums.

use num_integer::Integer;

/// All primes `<= n`, by the sieve of Eratosthenes.
pub fn primes_up_to(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if composite[i] {
            continue;
        }
        out.push(i as u64);
        let mut j = i * i;
        while j <= n {
            composite[j] = true;
            j += i;
        }
    }
    out
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut i = 2;
    while i * i <= n {
        if n.is_multiple_of(i) {
            return false;
        }
        i += 1;
    }
    true
}

/// Prime factorization by trial division, primes in increasing order.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            let mut e = 0;
            while n.is_multiple_of(p) {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Number of positive divisors.
pub fn divisor_count(n: u64) -> u64 {
    factorize(n).iter().map(|&(_, e)| u64::from(e) + 1).product()
}

/// Number of ordered factorizations of `n` into `m` positive factors.
pub fn ordered_factorizations(n: u64, m: u32) -> u128 {
    if m == 0 {
        return u128::from(n == 1);
    }
    factorize(n)
        .iter()
        .map(|&(_, e)| binomial(u128::from(e) + u128::from(m) - 1, u128::from(m) - 1))
        .product()
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// p-adic valuation of a nonzero integer.
pub fn valuation(mut n: u64, p: u64) -> u32 {
    debug_assert!(n != 0);
    let mut v = 0;
    while n.is_multiple_of(p) {
        n /= p;
        v += 1;
    }
    v
}

pub fn pow_mod(base: u64, exp: u32, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let m128 = u128::from(m);
    let mut result = 1u128;
    let mut b = u128::from(base) % m128;
    let mut e = exp;
    while e > 0 {
        if e & 1 == 1 {
            result = result * b % m128;
        }
        b = b * b % m128;
        e >>= 1;
    }
    result as u64
}

/// Ramanujan sum `c_q(n) = sum over a mod q, (a,q)=1 of e(an/q)`.
///
/// Uses multiplicativity in `q` and the prime-power values
/// `c_{p^l}(n) = phi(p^l)` if `p^l | n`, `-p^(l-1)` if `p^(l-1) || n`, else 0.
pub fn ramanujan_sum(q: u64, n: u64) -> i128 {
    factorize(q)
        .into_iter()
        .map(|(p, l)| {
            let pl = p.pow(l);
            let pl1 = p.pow(l - 1);
            let r = n % pl;
            if r == 0 {
                i128::from(pl - pl1)
            } else if r.is_multiple_of(pl1) {
                -i128::from(pl1)
            } else {
                0
            }
        })
        .product()
}

pub fn euler_phi(q: u64) -> u64 {
    factorize(q).iter().map(|&(p, e)| (p - 1) * p.pow(e - 1)).product()
}

pub fn coprime(a: u64, b: u64) -> bool {
    a.gcd(&b) == 1
}
