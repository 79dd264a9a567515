//! Independent closed forms used as oracles.
#![allow(dead_code)]

use std::f64::consts::PI;

/// `s(k) = (k² − 1)^q sin^q k`.
pub fn s_factor(k: f64, q: i32) -> f64 {
    ((k * k - 1.0) * k.sin()).powi(q)
}

/// Numerator of the q = 2 band function; `Θ*(k) = n2(k) / s(k)`.
pub fn n2(k: f64) -> f64 {
    let k2 = k * k;
    -4.0 * k2 + (k2 - 1.0).powi(2) * (2.0 * k).cos() - (k2 + 1.0).powi(2) * (4.0 * k).cos()
}

pub fn theta_star_q2(k: f64) -> f64 {
    n2(k) / s_factor(k, 2)
}

/// `g(k)` of the q = 3 spectral condition, `Θ*(k) = −g(k) / s(k)`.
pub fn g3(k: f64, p: u32) -> f64 {
    let k2 = k * k;
    let a = PI * p as f64 / 3.0;
    let (sa, ca) = a.sin_cos();
    6.0 * (k2 - 1.0).powi(2) * (k2 + 1.0) * k.sin() * k.cos().powi(3)
        - (k2 + 1.0).powi(3) * (6.0 * k).sin()
        - 8.0 * k * ((k2 * k2 + 6.0 * k2 + 1.0) * (2.0 * k).cos() - (k2 - 1.0).powi(2)) * sa.powi(3) * ca
        - 3.0
            * (k2 + 1.0)
            * ((k2 - 1.0).powi(2) * (2.0 * k).cos() - (k2 + 1.0).powi(2))
            * (2.0 * k).sin()
            * (2.0 * a).cos()
}

pub fn theta_star_q3(k: f64, p: u32) -> f64 {
    -g3(k, p) / s_factor(k, 3)
}

/// Plain bisection of a continuous function with a sign change.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let flo = f(lo);
    assert!(flo * f(hi) < 0.0, "no sign change in [{lo}, {hi}]");
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if (f(mid) < 0.0) == (flo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// All sign changes of `f` on a uniform grid of `[a, b]`, refined by bisection.
pub fn roots(f: impl Fn(f64) -> f64 + Copy, a: f64, b: f64, samples: usize, tol: f64) -> Vec<f64> {
    let h = (b - a) / samples as f64;
    let mut out = Vec::new();
    let mut x0 = a;
    let mut f0 = f(a);
    for i in 1..=samples {
        let x1 = a + i as f64 * h;
        let f1 = f(x1);
        if f0 * f1 < 0.0 {
            out.push(bisect(f, x0, x1, tol));
        }
        x0 = x1;
        f0 = f1;
    }
    out
}

/// Distance from `k` to the nearest zero of `s` (`k = 1` or `k = nπ`).
pub fn distance_to_singular(k: f64) -> f64 {
    let n = (k / PI).round().max(1.0);
    (k - 1.0).abs().min((k - n * PI).abs())
}

/// `−6 cos k − 4 cos 3k ∈ [−1, 1]`, the large-n band predicate for q = 3.
pub fn q3_asymptotic_member(k: f64) -> bool {
    let w = -6.0 * k.cos() - 4.0 * (3.0 * k).cos();
    (-1.0..=1.0).contains(&w)
}
