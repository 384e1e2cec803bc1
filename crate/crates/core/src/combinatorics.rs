//! Exact integer combinatorics with deferred conversion to `f64`.
//!
//! Binomial coefficients and Stirling numbers are accumulated as big
//! integers; only the final ratio is rounded to floating point.

use std::sync::{Arc, Mutex};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

/// Largest truncation supported by the floating-point binomial table.
///
/// `C(1020, 510)` is about `1e306`, so rows beyond this overflow `f64`.
pub const MAX_N_MAX: usize = 1000;

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// `m (m-1) ... (m-n+1)`; zero when `n > m`.
pub fn falling_factorial(m: u64, n: u64) -> BigUint {
    if n > m {
        return BigUint::zero();
    }
    (0..n).fold(BigUint::one(), |acc, j| acc * (m - j))
}

pub fn stirling2(k: usize, n: usize) -> BigUint {
    stirling2_column(n, k).pop().unwrap_or_default()
}

/// `S2(k, n)` for `k = 0..=k_max` at fixed `n`, via the rolling recurrence
/// `S2(k+1, j) = j S2(k, j) + S2(k, j-1)`.
pub fn stirling2_column(n: usize, k_max: usize) -> Vec<BigUint> {
    let mut row = vec![BigUint::zero(); n + 1];
    row[0] = BigUint::one();
    let mut column = Vec::with_capacity(k_max + 1);
    column.push(row[n].clone());
    for _ in 1..=k_max {
        for j in (1..=n).rev() {
            let carried = std::mem::take(&mut row[j]) * j;
            row[j] = carried + &row[j - 1];
        }
        row[0] = BigUint::zero();
        column.push(row[n].clone());
    }
    column
}

/// Multiply by `2^exp` without overflowing intermediate powers.
pub(crate) fn scale_pow2(mut x: f64, mut exp: i64) -> f64 {
    const STEP: i64 = 1000;
    let big = 2f64.powi(STEP as i32);
    let small = 2f64.powi(-STEP as i32);
    while exp > STEP {
        x *= big;
        exp -= STEP;
        if x.is_infinite() {
            return x;
        }
    }
    while exp < -STEP {
        x *= small;
        exp += STEP;
        if x == 0.0 {
            return x;
        }
    }
    x * 2f64.powi(exp as i32)
}

/// `num / den` rounded to `f64` with a relative error of about one ulp,
/// even when both operands are far outside the `f64` range.
pub fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    assert!(!den.is_zero(), "ratio_to_f64: zero denominator");
    if num.is_zero() {
        return 0.0;
    }
    let shift = 66 - (num.bits() as i64 - den.bits() as i64);
    let quotient = if shift >= 0 {
        (num << shift as u64) / den
    } else {
        num / (den << (-shift) as u64)
    };
    let q = quotient.to_u128().expect("quotient bounded by 2^68") as f64;
    scale_pow2(q, -shift)
}

/// Rows `0..=n_max` of Pascal's triangle, computed exactly and rounded once.
#[derive(Debug)]
pub struct BinomialTable {
    rows: Vec<Vec<f64>>,
}

impl BinomialTable {
    fn build(n_max: usize) -> Self {
        let mut rows = Vec::with_capacity(n_max + 1);
        let mut exact = vec![BigUint::one()];
        for n in 0..=n_max {
            rows.push(
                exact
                    .iter()
                    .map(|c| c.to_f64().unwrap_or(f64::INFINITY))
                    .collect(),
            );
            if n == n_max {
                break;
            }
            let mut next = Vec::with_capacity(exact.len() + 1);
            next.push(BigUint::one());
            for w in exact.windows(2) {
                next.push(&w[0] + &w[1]);
            }
            next.push(BigUint::one());
            exact = next;
        }
        BinomialTable { rows }
    }

    pub fn n_max(&self) -> usize {
        self.rows.len() - 1
    }

    /// Row `n`: `C(n, 0), ..., C(n, n)`.
    #[inline]
    pub fn row(&self, n: usize) -> &[f64] {
        &self.rows[n]
    }

    #[inline]
    pub fn get(&self, n: usize, k: usize) -> f64 {
        if k > n {
            0.0
        } else {
            self.rows[n][k]
        }
    }
}

static TABLE: Mutex<Option<Arc<BinomialTable>>> = Mutex::new(None);

/// Shared binomial table covering at least `n_max` rows.
///
/// # Panics
/// If `n_max > MAX_N_MAX`; callers validate truncations before getting here.
pub fn binomial_table(n_max: usize) -> Arc<BinomialTable> {
    assert!(
        n_max <= MAX_N_MAX,
        "binomial table limited to n_max <= {MAX_N_MAX}"
    );
    let mut guard = TABLE.lock().expect("binomial table poisoned");
    if let Some(table) = guard.as_ref() {
        if table.n_max() >= n_max {
            return Arc::clone(table);
        }
    }
    let size = n_max.max(128).next_power_of_two().min(MAX_N_MAX);
    let table = Arc::new(BinomialTable::build(size));
    *guard = Some(Arc::clone(&table));
    table
}
