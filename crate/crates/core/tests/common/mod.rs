#![allow(dead_code)]

use anisoldp::spectral::{Complex64, RawField};
use anisoldp::GridSpec;

/// `u·∇v` by direct summation over all wavevector pairs, truncated to the
/// retained band; no transforms involved.
pub fn dense_convective(u: &RawField, v: &RawField) -> RawField {
    let g = *u.grid();
    let modes: Vec<(i64, i64)> = (0..g.len()).map(|i| g.wavenumber(i)).filter(|&(a, b)| g.is_retained(a, b)).collect();
    let mut out = RawField::zeros(g);
    for &(p1, p2) in &modes {
        let up = u.get(p1, p2);
        for &(q1, q2) in &modes {
            let (k1, k2) = (p1 + q1, p2 + q2);
            if !g.is_retained(k1, k2) {
                continue;
            }
            let vq = v.get(q1, q2);
            let i = Complex64::new(0.0, 1.0);
            let grad = up[0] * i * q1 as f64 + up[1] * i * q2 as f64;
            let mut cur = out.get(k1, k2);
            cur[0] += grad * vq[0];
            cur[1] += grad * vq[1];
            out.set(k1, k2, cur);
        }
    }
    out
}

/// Textbook projection `ŵ − k(k·ŵ)/|k|²`.
pub fn textbook_leray(w: &RawField) -> RawField {
    let g = *w.grid();
    let mut out = w.clone();
    for idx in 0..g.len() {
        let (k1, k2) = g.wavenumber(idx);
        let c = w.get(k1, k2);
        if (k1, k2) == (0, 0) || !g.is_retained(k1, k2) {
            out.set(k1, k2, [Complex64::new(0.0, 0.0); 2]);
            continue;
        }
        let (a, b) = (k1 as f64, k2 as f64);
        let kw = (c[0] * a + c[1] * b) / (a * a + b * b);
        out.set(k1, k2, [c[0] - kw * a, c[1] - kw * b]);
    }
    out
}

pub fn max_diff(a: &RawField, b: &RawField) -> f64 {
    a.coeffs()
        .iter()
        .zip(b.coeffs())
        .map(|(x, y)| (x[0] - y[0]).norm().max((x[1] - y[1]).norm()))
        .fold(0.0, f64::max)
}

pub fn grid(n: usize) -> GridSpec {
    GridSpec::square(n)
}

/// Minimal energy `½dt_c Σφ_j²` of the discretized scalar problem
/// `z_{j+1} = A z_j + B φ_j`, `A = e^{−λdt_c}`, `B = c(1 − A)/λ`, steering `a`
/// to `b` in `T/dt_c` steps. Backward recursion of the quadratic value
/// function under a stiff terminal penalty, then a forward pass with the
/// optimal feedback.
pub fn lq_dp_oracle(lambda: f64, c: f64, a: f64, b: f64, horizon: f64, dt_c: f64) -> f64 {
    let steps = (horizon / dt_c).round() as usize;
    let big_a = (-lambda * dt_c).exp();
    let big_b = c * (1.0 - big_a) / lambda;
    let penalty = 1e12;
    // V_j(z) = p z² + q z + const
    let (mut p, mut q) = (penalty, -2.0 * penalty * b);
    let mut gains = vec![(0.0, 0.0); steps];
    for j in (0..steps).rev() {
        let s = dt_c + 2.0 * p * big_b * big_b;
        // φ = −(2pB·Az + qB)/s
        gains[j] = (-2.0 * p * big_b * big_a / s, -q * big_b / s);
        let (np, nq) = (big_a * big_a * (p - 2.0 * p * p * big_b * big_b / s), big_a * (q - 2.0 * p * q * big_b * big_b / s));
        p = np;
        q = nq;
    }
    let (mut z, mut energy) = (a, 0.0);
    for (k, m) in gains {
        let phi = k * z + m;
        energy += 0.5 * dt_c * phi * phi;
        z = big_a * z + big_b * phi;
    }
    assert!((z - b).abs() < 1e-6, "oracle missed the target: {z} vs {b}");
    energy
}
