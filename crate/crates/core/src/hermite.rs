//! Hermite polynomials and Hermite functions.

/// Physicists' Hermite polynomial `H_n(x)` by the three-term recurrence.
pub fn hermite(n: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 2.0 * x;
    for k in 1..n {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Binomial coefficient as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Normalized oscillator eigenfunctions
/// `⟨q|k⟩ = π^{−1/4} (2^k k!)^{−1/2} H_k(q) e^{−q²/2}` for `k = 0..len`.
///
/// Uses the normalized recurrence
/// `ψ_{k+1} = √(2/(k+1)) q ψ_k − √(k/(k+1)) ψ_{k−1}`, which never forms
/// `H_k` or `k!` and so stays finite for any `k`.
pub fn hermite_functions(len: usize, q: f64, out: &mut [f64]) {
    debug_assert!(out.len() >= len);
    if len == 0 {
        return;
    }
    out[0] = std::f64::consts::PI.powf(-0.25) * (-0.5 * q * q).exp();
    if len == 1 {
        return;
    }
    out[1] = std::f64::consts::SQRT_2 * q * out[0];
    for k in 1..len - 1 {
        let kf = k as f64;
        out[k + 1] = (2.0 / (kf + 1.0)).sqrt() * q * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
    }
}
