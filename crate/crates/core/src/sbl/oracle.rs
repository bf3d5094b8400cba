use num_complex::Complex;

use super::CMatrix;
use crate::{abs2, Error, Real, Result};

/// In-place lower Cholesky factor of a Hermitian matrix (row-major, k×k).
fn cholesky<T: Real>(h: &mut [Complex<T>], k: usize) -> Result<()> {
    for j in 0..k {
        let mut d = h[j * k + j].re;
        for p in 0..j {
            d -= abs2(h[j * k + p]);
        }
        if !(d > T::zero()) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let d = d.sqrt();
        h[j * k + j] = Complex::new(d, T::zero());
        for i in j + 1..k {
            let mut v = h[i * k + j];
            for p in 0..j {
                v -= h[i * k + p] * h[j * k + p].conj();
            }
            h[i * k + j] = v / d;
        }
        for i in 0..j {
            h[i * k + j] = Complex::new(T::zero(), T::zero());
        }
    }
    Ok(())
}

fn forward<T: Real>(l: &[Complex<T>], k: usize, b: &mut [Complex<T>]) {
    for i in 0..k {
        let mut v = b[i];
        for p in 0..i {
            v -= l[i * k + p] * b[p];
        }
        b[i] = v / l[i * k + i].re;
    }
}

fn backward_adjoint<T: Real>(l: &[Complex<T>], k: usize, b: &mut [Complex<T>]) {
    for i in (0..k).rev() {
        let mut v = b[i];
        for p in i + 1..k {
            v -= l[p * k + i].conj() * b[p];
        }
        b[i] = v / l[i * k + i].re;
    }
}

/// Exact posterior of `y = Ax + w` with `x ~ Π CN(0, α_m)` and
/// `w ~ CN(0, λ⁻¹I)`: mean and marginal variances of
/// `CN((λAᴴA + diag α⁻¹)⁻¹ λAᴴy, (λAᴴA + diag α⁻¹)⁻¹)`.
pub fn exact_mmse_gaussian<T: Real>(
    a: &CMatrix<T>,
    y: &[Complex<T>],
    lambda: T,
    alpha: &[T],
) -> Result<(Vec<Complex<T>>, Vec<T>)> {
    let (n, m) = (a.rows(), a.cols());
    if y.len() != n || alpha.len() != m {
        return Err(Error::Dimension(format!(
            "A is {n}×{m}, y has {} entries, α has {}",
            y.len(),
            alpha.len()
        )));
    }
    if let Some(v) = alpha.iter().find(|v| !(**v > T::zero())) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            reason: format!("{v} is not positive"),
        });
    }
    let mut h = vec![Complex::new(T::zero(), T::zero()); m * m];
    for r in 0..n {
        let row = a.row(r);
        for i in 0..m {
            let ci = row[i].conj() * lambda;
            for j in 0..=i {
                h[i * m + j] += ci * row[j];
            }
        }
    }
    for i in 0..m {
        h[i * m + i] += Complex::new(alpha[i].recip(), T::zero());
        for j in 0..i {
            h[j * m + i] = h[i * m + j].conj();
        }
    }
    cholesky(&mut h, m)?;

    let mut mean: Vec<Complex<T>> = a.adjoint_mul_vec(y).into_iter().map(|v| v * lambda).collect();
    forward(&h, m, &mut mean);
    backward_adjoint(&h, m, &mut mean);

    // diag(H⁻¹)_j = ‖L⁻¹ e_j‖²
    let mut var = vec![T::zero(); m];
    let mut col = vec![Complex::new(T::zero(), T::zero()); m];
    for (j, vj) in var.iter_mut().enumerate() {
        col.iter_mut().for_each(|c| *c = Complex::new(T::zero(), T::zero()));
        col[j] = Complex::new(T::one(), T::zero());
        forward(&h, m, &mut col);
        *vj = col[j..].iter().map(|c| abs2(*c)).sum();
    }
    Ok((mean, var))
}

/// LMMSE with the true support known: the Gaussian posterior mean on the
/// columns in `support` with prior variance `v0`, zero elsewhere.
pub fn genie_lmmse<T: Real>(
    a: &CMatrix<T>,
    y: &[Complex<T>],
    lambda: T,
    v0: T,
    support: &[usize],
) -> Result<Vec<Complex<T>>> {
    let mut x = vec![Complex::new(T::zero(), T::zero()); a.cols()];
    if let Some(j) = support.iter().find(|j| **j >= a.cols()) {
        return Err(Error::Dimension(format!("support index {j} for {} columns", a.cols())));
    }
    if support.is_empty() {
        return Ok(x);
    }
    let sub = a.select_columns(support);
    let (mean, _) = exact_mmse_gaussian(&sub, y, lambda, &vec![v0; support.len()])?;
    for (j, v) in support.iter().zip(mean) {
        x[*j] = v;
    }
    Ok(x)
}

/// Moments of `[(1 − ρ) δ(x) + ρ CN(x; 0, v₀)] · CN(x; μ, τ)` by a tensor
/// trapezoid rule over the complex plane.
///
/// The grid sits on the peak of the slab integrand with step σ/4 over ±12σ,
/// σ² being half the curvature variance; the rule is spectrally accurate
/// for such Gaussian bumps. Returns `(mean, variance, E|x|²)`.
pub fn denoise_bg_quadrature<T: Real>(rho: T, v0: T, mu: Complex<T>, tau: T) -> Result<(Complex<T>, T, T)> {
    if !(tau > T::zero() && v0 > T::zero()) || !(T::zero()..=T::one()).contains(&rho) {
        return Err(Error::InvalidParameter {
            name: "denoiser",
            reason: format!("needs τ > 0, v₀ > 0 and ρ ∈ [0, 1], got τ = {tau}, v₀ = {v0}, ρ = {rho}"),
        });
    }
    let pi = T::PI();
    let log_slab = |x: Complex<T>| -abs2(x) / v0 - abs2(x - mu) / tau - (pi * v0).ln() - (pi * tau).ln();
    let log_spike = -abs2(mu) / tau - (pi * tau).ln();
    let center = mu * (v0 / (v0 + tau));
    let sigma = (v0 * tau / (v0 + tau) / T::lit(2.0)).sqrt();
    let h = sigma / T::lit(4.0);
    let reference = log_slab(center).max(log_spike);
    let (mut z, mut first, mut second) = (T::zero(), Complex::new(T::zero(), T::zero()), T::zero());
    let half = 48i32;
    for i in -half..=half {
        for k in -half..=half {
            let x = center + Complex::new(T::from_i32(i).unwrap(), T::from_i32(k).unwrap()) * h;
            let w = (log_slab(x) - reference).exp() * h * h;
            z += w;
            first += x * w;
            second += abs2(x) * w;
        }
    }
    let (z, first, second) = (z * rho, first * rho, second * rho);
    let z = z + (T::one() - rho) * (log_spike - reference).exp();
    let mean = first / z;
    let second = second / z;
    Ok((mean, (second - abs2(mean)).max(T::zero()), second))
}
