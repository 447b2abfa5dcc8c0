//! Gamma-function ratios evaluated without overflow or catastrophic
//! cancellation.

/// Bernoulli-number coefficients `B_{2k} / (2k (2k - 1))` of the Stirling
/// series for `ln Gamma`.
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
];

/// Below this argument the ratio is shifted up by the recurrence first.
const ASYMPTOTIC_MIN: f64 = 20.0;

fn stirling_tail(z: f64) -> f64 {
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let mut pow = inv;
    let mut sum = 0.0;
    for c in STIRLING {
        sum += c * pow;
        pow *= inv2;
    }
    sum
}

/// `ln Gamma(x + b) - ln Gamma(x)` for `x > 0` and `x + b > 0`.
///
/// Uses `ln Gamma(x + b) - ln Gamma(x) = b ln x + (x + b - 1/2) ln(1 + b/x) - b + ...`
/// for large `x` and the recurrence `Gamma(z + 1) = z Gamma(z)` to get there,
/// so the result keeps full relative precision even when both log-gammas are
/// of order `10^7`.
pub fn ln_gamma_ratio(x: f64, b: f64) -> f64 {
    debug_assert!(x > 0.0, "ln_gamma_ratio requires x > 0, got {x}");
    if b == 0.0 {
        return 0.0;
    }
    if x + b <= 0.0 {
        return f64::NAN;
    }
    let mut shift = 0.0;
    let mut x = x;
    while x < ASYMPTOTIC_MIN || x + b < ASYMPTOTIC_MIN {
        // ln Gamma(x + b) - ln Gamma(x) = [same at x + 1] - ln((x + b) / x)
        shift -= (b / x).ln_1p();
        x += 1.0;
    }
    let main = b * x.ln() + (x + b - 0.5) * (b / x).ln_1p() - b;
    shift + main + (stirling_tail(x + b) - stirling_tail(x))
}

/// `Gamma(x) / Gamma(x + b)`.
pub fn gamma_ratio(x: f64, b: f64) -> f64 {
    (-ln_gamma_ratio(x, b)).exp()
}

/// `ln Gamma(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}
