//! Polynomial smooth cutoff used for the conductivity bump and the dyadic
//! frequency multipliers.

/// Degree-7 smoothstep on [0, 1]: 35x⁴ − 84x⁵ + 70x⁶ − 20x⁷, clamped outside.
/// Three derivatives vanish at both ends.
pub fn smoothstep(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let x4 = x * x * x * x;
        x4 * (35.0 + x * (-84.0 + x * (70.0 - 20.0 * x)))
    }
}

pub fn smoothstep_derivative(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        // 140x³(1 − x)³
        let y = x * (1.0 - x);
        140.0 * y * y * y
    }
}

/// χ(t): 1 on [0, 1], 0 on [2, ∞), monotone in between.
pub fn chi(t: f64) -> f64 {
    1.0 - smoothstep(t - 1.0)
}

pub fn chi_derivative(t: f64) -> f64 {
    -smoothstep_derivative(t - 1.0)
}
