//! Correctly rounded floating-point summation and moment helpers.
//!
//! The reflection-closure identities checked by the diagnostics hold
//! *exactly* only if sums are a function of the value multiset, not of
//! the iteration order. [`exact_sum`] returns the correctly rounded sum
//! of its inputs (Shewchuk partials, same algorithm as Python's
//! `math.fsum`), which is order-independent and commutes with negation.

/// Correctly rounded sum of a sequence of finite `f64` values.
pub fn exact_sum<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64>,
{
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }

    // Round the non-overlapping partials to the nearest double, applying
    // the half-way correction against the next-lower partial.
    let mut n = partials.len();
    if n == 0 {
        return 0.0;
    }
    n -= 1;
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = partials[n];
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        if y == x - hi {
            hi = x;
        }
    }
    hi
}

/// Correctly rounded mean.
pub fn exact_mean(xs: &[f64]) -> f64 {
    exact_sum(xs.iter().copied()) / xs.len() as f64
}

/// Plug-in (1/n) variance around the correctly rounded mean.
pub fn plugin_variance(xs: &[f64], mean: f64) -> f64 {
    exact_sum(xs.iter().map(|x| (x - mean) * (x - mean))) / xs.len() as f64
}
