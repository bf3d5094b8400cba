//! Gamma-function family used by the Gamma exponential family.

use crate::Real;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos approximation, reflection below 0.5).
pub fn ln_gamma<T: Real>(x: T) -> T {
    let xf = x.as_f64();
    T::lit(ln_gamma_f64(xf))
}

fn ln_gamma_f64(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).abs().ln() - ln_gamma_f64(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Digamma ψ(x) for `x > 0`.
pub fn digamma<T: Real>(x: T) -> T {
    let mut x = x.as_f64();
    let mut acc = 0.0;
    while x < 12.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series =
        inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))));
    T::lit(acc + x.ln() - 0.5 * inv - series)
}

/// Trigamma ψ'(x) for `x > 0`.
pub fn trigamma<T: Real>(x: T) -> T {
    let mut x = x.as_f64();
    let mut acc = 0.0;
    while x < 12.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv + 0.5 * inv2 + inv * inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 / 30.0)));
    T::lit(acc + series)
}

/// Solves `ln a − ψ(a) = s` for the Gamma shape, `s > 0`.
pub(crate) fn gamma_shape_from_log_gap<T: Real>(s: T) -> T {
    let s = s.as_f64();
    let mut a = (3.0 - s + ((s - 3.0).powi(2) + 24.0 * s).sqrt()) / (12.0 * s);
    for _ in 0..100 {
        let f = a.ln() - digamma(a) - s;
        let df = 1.0 / a - trigamma(a);
        let next = a - f / df;
        let next = if next <= 0.0 { a / 2.0 } else { next };
        if ((next - a) / a).abs() < 1e-15 {
            a = next;
            break;
        }
        a = next;
    }
    T::lit(a)
}
