//! Modified Bessel functions of the first kind, restricted to what the von
//! Mises family needs: the exponentially scaled `I_0` and the ratios
//! `I_m(x) / I_0(x)`.

/// Crossover between the power series and the large-argument expansion.
const SERIES_LIMIT: f64 = 20.0;

/// `e^{-x} I_0(x)` for `x >= 0`.
pub fn i0_scaled(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x <= SERIES_LIMIT {
        // sum_k (x^2/4)^k / (k!)^2, all terms positive
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0_f64;
        loop {
            term *= q / (k * k);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        // e^{-x} I_0(x) ~ (2 pi x)^{-1/2} sum_k ((2k-1)!!)^2 / (k! (8x)^k)
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0_f64;
        loop {
            let next = term * (2.0 * k - 1.0).powi(2) / (8.0 * k * x);
            if next < 1e-17 * sum || next > term {
                break;
            }
            term = next;
            sum += term;
            k += 1.0;
        }
        sum / (std::f64::consts::TAU * x).sqrt()
    }
}

/// `ln I_0(x)` for `x >= 0`, finite for every finite argument.
pub fn ln_i0(x: f64) -> f64 {
    i0_scaled(x).ln() + x
}

/// `I_m(x) / I_0(x)` for `x >= 0`, via downward recurrence of the
/// successive ratios `I_v / I_{v-1}`. Never overflows.
pub fn ratio(m: u32, x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if m == 0 {
        return 1.0;
    }
    if x == 0.0 {
        return 0.0;
    }
    let top = m as usize + 40 + (2.0 * x).ceil() as usize;
    // r_v = I_v / I_{v-1} = 1 / (2v/x + r_{v+1})
    let mut r = 0.0;
    let mut prod = 1.0;
    for v in (1..=top).rev() {
        r = 1.0 / (2.0 * v as f64 / x + r);
        if v <= m as usize {
            prod *= r;
        }
    }
    prod
}

/// `A(x) = I_1(x) / I_0(x)`, the mean resultant length of a von Mises
/// density with concentration `x`.
pub fn a1(x: f64) -> f64 {
    ratio(1, x)
}

/// Inverse of [`a1`]: the concentration whose mean resultant length is `r`.
pub fn a1_inverse(r: f64) -> f64 {
    debug_assert!((0.0..1.0).contains(&r));
    if r <= 0.0 {
        return 0.0;
    }
    // bisection on log x; A is strictly increasing
    let (mut lo, mut hi) = (-20.0_f64, 20.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if a1(mid.exp()) < r {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    (0.5 * (lo + hi)).exp()
}
