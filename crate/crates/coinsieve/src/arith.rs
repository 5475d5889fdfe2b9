//! Elementary number-theoretic machinery: smallest-prime-factor sieves,
//! squarefree flags, multiplicative orders, and prime-factor counting
//! for 64-bit integers (trial division + Miller-Rabin + Pollard-Brent).

use crate::error::{Error, Result};

/// Smallest-prime-factor table for 0..limit. Entry `spf[n]` is the least
/// prime dividing n (spf[0] = spf[1] = 0). u32 entries keep 2^26-sized
/// tables within desk memory.
pub struct SpfSieve {
    spf: Vec<u32>,
}

impl SpfSieve {
    pub fn new(limit: usize) -> Self {
        let mut spf = vec![0u32; limit.max(2)];
        for i in 2..limit {
            if spf[i] == 0 {
                let mut j = i;
                while j < limit {
                    if spf[j] == 0 {
                        spf[j] = i as u32;
                    }
                    j += i;
                }
            }
        }
        SpfSieve { spf }
    }

    pub fn limit(&self) -> usize {
        self.spf.len()
    }

    pub fn smallest_prime_factor(&self, n: usize) -> u32 {
        self.spf[n]
    }

    pub fn is_prime(&self, n: usize) -> bool {
        n >= 2 && self.spf[n] == n as u32
    }

    /// Number of prime factors counted with multiplicity.
    pub fn omega_with_multiplicity(&self, mut n: usize) -> u32 {
        let mut count = 0;
        while n > 1 {
            let p = self.spf[n] as usize;
            n /= p;
            count += 1;
        }
        count
    }

    pub fn is_squarefree(&self, mut n: usize) -> bool {
        while n > 1 {
            let p = self.spf[n] as usize;
            n /= p;
            if n % p == 0 {
                return false;
            }
        }
        true
    }

    pub fn primes(&self) -> Vec<u64> {
        (2..self.limit())
            .filter(|&n| self.is_prime(n))
            .map(|n| n as u64)
            .collect()
    }
}

/// Squarefree flags for 0..limit without the full SPF table: one bit per
/// integer, marking multiples of p^2.
pub fn squarefree_flags(limit: usize) -> Vec<bool> {
    let mut free = vec![true; limit.max(2)];
    if limit > 0 {
        free[0] = false;
    }
    let mut p = 2usize;
    while p * p < limit {
        // marking by every integer square also covers prime squares
        let sq = p * p;
        let mut j = sq;
        while j < limit {
            free[j] = false;
            j += sq;
        }
        p += 1;
    }
    free
}

/// Odd squarefree moduli in [lo, hi], ascending.
pub fn odd_squarefree_in(lo: u64, hi: u64) -> Vec<u64> {
    if hi < lo {
        return Vec::new();
    }
    let flags = squarefree_flags(hi as usize + 1);
    (lo..=hi)
        .filter(|&q| q % 2 == 1 && q >= 3 && flags[q as usize])
        .collect()
}

pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Multiplicative order of 2 modulo odd q >= 3: the least d with
/// 2^d = 1 (mod q). Found by direct doubling; fine for desk-scale q.
pub fn order_of_two(q: u64) -> Result<u64> {
    if q < 3 || q % 2 == 0 {
        return Err(Error::domain(format!("order of 2 needs odd q >= 3, got {q}")));
    }
    let mut x = 2u64 % q;
    let mut d = 1u64;
    while x != 1 {
        x = (x * 2) % q;
        d += 1;
        if d > q {
            return Err(Error::domain(format!("order of 2 mod {q} did not close")));
        }
    }
    Ok(d)
}

/// Deterministic Miller-Rabin for u64 (fixed witness set covers all n < 2^64).
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..s - 1 {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Pollard-Brent rho: one nontrivial factor of composite odd n.
fn pollard_brent(n: u64, seed: u64) -> u64 {
    let f = |x: u64, c: u64| (mul_mod(x, x, n) + c) % n;
    let mut c = seed % (n - 3) + 1;
    loop {
        let mut x = 2u64;
        let mut y = 2u64;
        let mut d = 1u64;
        let mut count = 0u64;
        while d == 1 {
            x = f(x, c);
            y = f(f(y, c), c);
            d = gcd(x.abs_diff(y), n);
            count += 1;
            if count > 1 << 24 {
                break;
            }
        }
        if d != n && d != 1 {
            return d;
        }
        c = c % (n - 3) + 1;
    }
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Number of prime factors of n counted with multiplicity, for any u64.
/// Small-prime stripping, then Miller-Rabin / Pollard-Brent splitting.
pub fn omega_u64(mut n: u64) -> u32 {
    if n < 2 {
        return 0;
    }
    let mut count = 0;
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47] {
        while n % p == 0 {
            n /= p;
            count += 1;
        }
    }
    if n == 1 {
        return count;
    }
    let mut stack = vec![n];
    while let Some(v) = stack.pop() {
        if v == 1 {
            continue;
        }
        if is_prime_u64(v) {
            count += 1;
            continue;
        }
        let d = pollard_brent(v, 1);
        stack.push(d);
        stack.push(v / d);
    }
    count
}
