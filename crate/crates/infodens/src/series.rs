//! Reference evaluation of the information-density distribution.
//!
//! The PDF and CDF are multi-index series over Bessel (and Bessel*Struve)
//! kernels. This module evaluates the literal box-truncated sums with
//! per-dimension caps and the uniform truncation-error bounds, exactly as the
//! general representation prescribes — no reordering tricks. It is the slow,
//! trusted reference that the recurrence-based fast path is checked against.
//!
//! Closed forms for equal canonical correlations, the characteristic
//! function, central moments, and a same-variance Gaussian reference law are
//! also here.

use crate::cca::CanonicalSpectrum;
use crate::specialfn::{self, Order, SpecialFnError};
use thiserror::Error;

pub(crate) const SQRT_PI: f64 = 1.772_453_850_905_516;

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("spectrum has rank 0: the information density is degenerate")]
    RankZero,
    #[error("PDF has a logarithmic pole at x = I when r = 1")]
    PoleAtCenter,
    #[error("expected {expected} per-dimension caps, got {got}")]
    CapsLengthMismatch { expected: usize, got: usize },
    #[error("moment order must satisfy 1 <= m (m = 0 is trivially 1 and rejected)")]
    InvalidMomentOrder,
    #[error("correlation {0} outside the open interval (0, 1)")]
    InvalidCorrelation(f64),
    #[error("rank must be >= 1, got {0}")]
    InvalidRank(usize),
    #[error("cap search exceeded {max_terms} summands (best bound {best_bound:.3e})")]
    CapSearchFailed { max_terms: u64, best_bound: f64 },
    #[error(transparent)]
    SpecialFn(#[from] SpecialFnError),
}

/// Which distribution function a truncation bound refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Pdf,
    Cdf,
}

/// A numeric result with the number of series terms summed and a rigorous
/// uniform bound on the truncation error. Closed-form paths report
/// `n_terms = 1` and `error_bound = 0`. `underflow` marks a value that is
/// exactly 0 in double precision only because the final exponential scaling
/// underflowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxValue {
    pub value: f64,
    pub n_terms: u64,
    pub error_bound: f64,
    pub underflow: bool,
}

impl ApproxValue {
    pub fn exact(value: f64) -> Self {
        ApproxValue {
            value,
            n_terms: 1,
            error_bound: 0.0,
            underflow: false,
        }
    }
}

/// U-kernel by direct definition: K_{(r-1)/2+k}(z) (z/2)^{(r-1)/2+k} /
/// Gamma(r/2+k), assembled in log space so high orders stay representable.
/// At z = 0 the kernel limit Gamma((r-1)/2+k) / (2 Gamma(r/2+k)) is used.
pub(crate) fn u_kernel_direct(r: usize, k: u64, z: f64) -> Result<f64, SeriesError> {
    let twice_alpha = (r as i64 - 1) + 2 * k as i64;
    let alpha = twice_alpha as f64 / 2.0;
    let half_r_k = r as f64 / 2.0 + k as f64;
    if z == 0.0 {
        if twice_alpha == 0 {
            return Err(SeriesError::PoleAtCenter);
        }
        let ln = specialfn::lgamma(alpha)? - specialfn::lgamma(half_r_k)?;
        return Ok(0.5 * ln.exp());
    }
    let order = Order::from_twice(twice_alpha)?;
    let ln = specialfn::log_bessel_k_scaled(order, z)? - z + alpha * (z / 2.0).ln()
        - specialfn::lgamma(half_r_k)?;
    Ok(if ln < -745.0 { 0.0 } else { ln.exp() })
}

/// D-kernel by direct definition with y = z/rho_r:
/// (y/2) [K_{a}(y) L_{a-1}(y) + K_{a-1}(y) L_a(y)], a = (r-1)/2 + k.
/// The e^y / e^-y scalings cancel inside each product.
pub(crate) fn d_kernel_direct(r: usize, k: u64, y: f64) -> Result<f64, SeriesError> {
    if y == 0.0 {
        return Ok(0.0);
    }
    let ta = (r as i64 - 1) + 2 * k as i64;
    let a = Order::from_twice(ta)?;
    let am1 = Order::from_twice(ta - 2)?;
    let ln_k_a = specialfn::log_bessel_k_scaled(a, y)?;
    let ln_k_am1 = specialfn::log_bessel_k_scaled(am1, y)?;
    let ln_l_a = specialfn::log_struve_l_scaled(a, y)?;
    let ln_l_am1 = specialfn::log_struve_l_scaled(am1, y)?;
    let p1 = exp_or_zero(ln_k_a + ln_l_am1);
    let p2 = exp_or_zero(ln_k_am1 + ln_l_a);
    Ok((y / 2.0) * (p1 + p2))
}

fn exp_or_zero(ln: f64) -> f64 {
    if ln < -745.0 {
        0.0
    } else {
        ln.exp()
    }
}

/// Per-dimension weight column: w[k] = (2k)!/((k!)^2 4^k) q^k with
/// q = 1 - rho_r^2/rho_i^2, generated by the stable ratio recurrence.
/// w[0] = 1 covers the equal-correlation case through 0^0 = 1.
fn weight_column(q: f64, cap: u32) -> Vec<f64> {
    let mut w = Vec::with_capacity(cap as usize + 1);
    w.push(1.0);
    for k in 1..=cap as u64 {
        let prev = w[k as usize - 1];
        w.push(prev * ((2 * k - 1) as f64 / (2 * k) as f64) * q);
    }
    w
}

struct BoxAccumulator {
    /// prefactor-weighted per-dimension columns: omega_i[k] = (rho_r/rho_i) w_i[k]
    columns: Vec<Vec<f64>>,
    caps: Vec<u32>,
}

impl BoxAccumulator {
    fn new(spectrum: &CanonicalSpectrum, caps: &[u32]) -> Result<Self, SeriesError> {
        let r = spectrum.rank();
        if r == 0 {
            return Err(SeriesError::RankZero);
        }
        if caps.len() != r - 1 {
            return Err(SeriesError::CapsLengthMismatch {
                expected: r - 1,
                got: caps.len(),
            });
        }
        let rho = spectrum.correlations();
        let rho_r = spectrum.rho_min();
        let columns = (0..r - 1)
            .map(|i| {
                let q = 1.0 - (rho_r * rho_r) / (rho[i] * rho[i]);
                let mut col = weight_column(q, caps[i]);
                for v in col.iter_mut() {
                    *v *= rho_r / rho[i];
                }
                col
            })
            .collect();
        Ok(BoxAccumulator {
            columns,
            caps: caps.to_vec(),
        })
    }

    fn total_cap(&self) -> u64 {
        self.caps.iter().map(|&c| c as u64).sum()
    }

    fn n_terms(&self) -> u64 {
        self.caps.iter().map(|&c| c as u64 + 1).product()
    }

    /// Literal odometer walk over the index box; for each multi-index the
    /// weight product and the kernel at the total order are combined.
    /// Returns (sum of weight * kernel, S-hat = sum of weights).
    fn accumulate(&self, kernels: &[f64]) -> (f64, f64) {
        let dims = self.columns.len();
        if dims == 0 {
            return (kernels[0], 1.0);
        }
        let mut idx = vec![0usize; dims];
        let mut sum = 0.0;
        let mut s_hat = 0.0;
        loop {
            let mut weight = 1.0;
            let mut k_tot = 0usize;
            for (d, &k) in idx.iter().enumerate() {
                weight *= self.columns[d][k];
                k_tot += k;
            }
            sum += weight * kernels[k_tot];
            s_hat += weight;
            // odometer increment
            let mut d = 0;
            loop {
                idx[d] += 1;
                if idx[d] <= self.caps[d] as usize {
                    break;
                }
                idx[d] = 0;
                d += 1;
                if d == dims {
                    return (sum, s_hat);
                }
            }
        }
    }
}

/// Uniform error bound of the box-truncated PDF: the Gamma ratio at the
/// total cap times (1 - S-hat) / (2 rho_r sqrt(pi)).
fn pdf_box_bound(r: usize, rho_r: f64, total_cap: u64, s_hat: f64) -> f64 {
    let tot = total_cap as f64;
    let g = (libm::lgamma((r as f64 - 1.0) / 2.0 + tot) - libm::lgamma(r as f64 / 2.0 + tot))
        .exp();
    g / (2.0 * rho_r * SQRT_PI) * (1.0 - s_hat).max(0.0)
}

/// PDF of the information density at x by the box-truncated multi-index sum
/// with per-dimension caps (length r-1).
///
/// With r >= 2 the value at x = I uses the z -> 0 kernel limits; r = 1 at
/// x = I is the logarithmic pole and is rejected.
pub fn pdf_direct(
    spectrum: &CanonicalSpectrum,
    x: f64,
    caps: &[u32],
) -> Result<ApproxValue, SeriesError> {
    let acc = BoxAccumulator::new(spectrum, caps)?;
    let r = spectrum.rank();
    let rho_r = spectrum.rho_min();
    let z = (x - spectrum.mutual_information()).abs() / rho_r;
    if r == 1 && z == 0.0 {
        return Err(SeriesError::PoleAtCenter);
    }
    let kernels: Vec<f64> = (0..=acc.total_cap())
        .map(|k| u_kernel_direct(r, k, z))
        .collect::<Result<_, _>>()?;
    let (sum, s_hat) = acc.accumulate(&kernels);
    let value = sum / (rho_r * SQRT_PI);
    let error_bound = if r == 1 {
        0.0
    } else {
        pdf_box_bound(r, rho_r, acc.total_cap(), s_hat)
    };
    Ok(ApproxValue {
        value,
        n_terms: acc.n_terms(),
        error_bound,
        underflow: false,
    })
}

/// CDF of the information density at x by the box-truncated sum:
/// F(x) = 1/2 - V(I-x) for x <= I, 1/2 + V(x-I) for x > I, error bound
/// (1 - S-hat)/2.
pub fn cdf_direct(
    spectrum: &CanonicalSpectrum,
    x: f64,
    caps: &[u32],
) -> Result<ApproxValue, SeriesError> {
    let acc = BoxAccumulator::new(spectrum, caps)?;
    let r = spectrum.rank();
    let rho_r = spectrum.rho_min();
    let centered = x - spectrum.mutual_information();
    let y = centered.abs() / rho_r;
    let kernels: Vec<f64> = (0..=acc.total_cap())
        .map(|k| d_kernel_direct(r, k, y))
        .collect::<Result<_, _>>()?;
    let (v_hat, s_hat) = acc.accumulate(&kernels);
    let value = if centered > 0.0 { 0.5 + v_hat } else { 0.5 - v_hat };
    let error_bound = if r == 1 { 0.0 } else { 0.5 * (1.0 - s_hat).max(0.0) };
    Ok(ApproxValue {
        value,
        n_terms: acc.n_terms(),
        error_bound,
        underflow: false,
    })
}

/// Uniform caps making the box-sum bound <= target, grown greedily on the
/// dimension with the largest remaining tail.
pub fn caps_for_target(
    spectrum: &CanonicalSpectrum,
    target: f64,
    kind: BoundKind,
    max_terms: u64,
) -> Result<Vec<u32>, SeriesError> {
    let r = spectrum.rank();
    if r == 0 {
        return Err(SeriesError::RankZero);
    }
    if r == 1 {
        return Ok(Vec::new());
    }
    let rho = spectrum.correlations();
    let rho_r = spectrum.rho_min();
    let dims = r - 1;
    let mut caps = vec![0u32; dims];
    // running per-dimension scaled partial sums (rho_r/rho_i) sum_k w_i[k]
    let mut sums = vec![0.0f64; dims];
    let mut last_w = vec![0.0f64; dims];
    let q: Vec<f64> = (0..dims)
        .map(|i| 1.0 - (rho_r * rho_r) / (rho[i] * rho[i]))
        .collect();
    for i in 0..dims {
        last_w[i] = 1.0;
        sums[i] = rho_r / rho[i];
    }
    let bound = |caps: &[u32], sums: &[f64]| -> f64 {
        let s_hat: f64 = sums.iter().product();
        match kind {
            BoundKind::Pdf => {
                pdf_box_bound(r, rho_r, caps.iter().map(|&c| c as u64).sum(), s_hat)
            }
            BoundKind::Cdf => 0.5 * (1.0 - s_hat).max(0.0),
        }
    };
    loop {
        let b = bound(&caps, &sums);
        if b <= target {
            return Ok(caps);
        }
        let n_terms: u64 = caps.iter().map(|&c| c as u64 + 1).product();
        if n_terms > max_terms {
            return Err(SeriesError::CapSearchFailed {
                max_terms,
                best_bound: b,
            });
        }
        // grow the dimension whose truncated factor is furthest from its
        // limit 1 (each factor converges monotonically to 1)
        let worst = (0..dims)
            .min_by(|&a, &b| sums[a].partial_cmp(&sums[b]).unwrap())
            .unwrap();
        for _ in 0..8 {
            let k = caps[worst] as u64 + 1;
            last_w[worst] *= ((2 * k - 1) as f64 / (2 * k) as f64) * q[worst];
            sums[worst] += (rho_r / rho[worst]) * last_w[worst];
            caps[worst] += 1;
        }
    }
}

/// Center of the distribution: the mutual information of r equal
/// correlations rho, -(r/2) log(1 - rho^2).
fn equal_center(r: usize, rho: f64) -> f64 {
    -(r as f64 / 2.0) * (-rho * rho).ln_1p()
}

fn check_equal_args(r: usize, rho: f64) -> Result<(), SeriesError> {
    if r == 0 {
        return Err(SeriesError::InvalidRank(r));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(SeriesError::InvalidCorrelation(rho));
    }
    Ok(())
}

/// PDF for r equal canonical correlations (single-summand series).
///
/// Even r uses the terminating exponential-polynomial closed form obtained
/// from the half-integer Bessel reduction; odd r evaluates the Bessel kernel
/// directly. Exact up to rounding, so no error bound is involved.
pub fn pdf_equal(r: usize, rho: f64, x: f64) -> Result<f64, SeriesError> {
    check_equal_args(r, rho)?;
    let y = (x - equal_center(r, rho)).abs() / rho;
    if r == 1 && y == 0.0 {
        return Err(SeriesError::PoleAtCenter);
    }
    if r % 2 == 0 {
        let h = r / 2; // K_{(r-1)/2} has half-integer order, sum terminates
        let ln_denom = rho.ln() + (r as f64 - 1.0) * std::f64::consts::LN_2
            + specialfn::lgamma(h as f64)?;
        let mut sum = 0.0;
        for i in 0..h {
            let ln_ci = specialfn::lgamma((2 * h - 1 - i) as f64)?
                - specialfn::lgamma((h - i) as f64)?
                - specialfn::lgamma(i as f64 + 1.0)?
                + i as f64 * std::f64::consts::LN_2;
            let ln_term = if i == 0 {
                ln_ci
            } else if y == 0.0 {
                continue;
            } else {
                ln_ci + i as f64 * y.ln()
            };
            sum += exp_or_zero(ln_term - y - ln_denom);
        }
        Ok(sum)
    } else {
        Ok(u_kernel_direct(r, 0, y)? / (rho * SQRT_PI))
    }
}

/// CDF for r equal canonical correlations; V(0) = 0 and V -> 1/2.
pub fn cdf_equal(r: usize, rho: f64, x: f64) -> Result<f64, SeriesError> {
    check_equal_args(r, rho)?;
    let centered = x - equal_center(r, rho);
    let y = centered.abs() / rho;
    let v = if r % 2 == 0 {
        equal_v_even(r, y)?
    } else {
        d_kernel_direct(r, 0, y)?
    };
    Ok(if centered > 0.0 { 0.5 + v } else { 0.5 - v })
}

/// V(z) closed form for even r: 1/2 - e^-y / (2^{r-1} (r/2-1)!) *
/// sum_i [(2(r/2-1)-i)! 2^i / (r/2-1-i)!] * sum_{l<=i} y^l / l!.
fn equal_v_even(r: usize, y: f64) -> Result<f64, SeriesError> {
    let h = r / 2;
    let ln_denom =
        (r as f64 - 1.0) * std::f64::consts::LN_2 + specialfn::lgamma(h as f64)?;
    let mut total = 0.0;
    for i in 0..h {
        let ln_ci = specialfn::lgamma((2 * h - 1 - i) as f64)?
            - specialfn::lgamma((h - i) as f64)?
            + i as f64 * std::f64::consts::LN_2;
        // truncated exponential sum_{l<=i} y^l / l!
        let mut e = 1.0;
        let mut t = 1.0;
        for l in 1..=i {
            t *= y / l as f64;
            e += t;
        }
        total += exp_or_zero(ln_ci - y - ln_denom) * e;
    }
    Ok(0.5 - total)
}

/// m-th central moment of the information density.
///
/// Odd m vanish exactly. Even m are computed by per-correlation polynomial
/// convolution in rho^2 (O(r (m/2)^2)) rather than enumerating the index
/// set, with the equal-correlation product formula as a fast path. Double
/// precision is adequate for the documented practical range m <= 64.
pub fn central_moment(spectrum: &CanonicalSpectrum, m: u32) -> Result<f64, SeriesError> {
    if m == 0 {
        return Err(SeriesError::InvalidMomentOrder);
    }
    if m % 2 == 1 {
        return Ok(0.0);
    }
    let r = spectrum.rank();
    if r == 0 {
        return Err(SeriesError::RankZero);
    }
    let half = (m / 2) as usize;
    if spectrum.is_equal_correlation() {
        // m!/( (m/2)! ) * prod_{j=1..m/2} (r/2 + j - 1) * rho^m
        let rho = spectrum.rho_min();
        let mut ln = specialfn::lgamma(m as f64 + 1.0)? - specialfn::lgamma(half as f64 + 1.0)?
            + m as f64 * rho.ln();
        for j in 1..=half {
            ln += (r as f64 / 2.0 + j as f64 - 1.0).ln();
        }
        return Ok(ln.exp());
    }
    // coefficient array of one correlation: a_j = (2j)!/(4^j (j!)^2) rho^{2j}
    let mut conv = vec![0.0f64; half + 1];
    conv[0] = 1.0;
    let mut scratch = vec![0.0f64; half + 1];
    for &rho in spectrum.correlations() {
        let rho2 = rho * rho;
        let mut a = Vec::with_capacity(half + 1);
        a.push(1.0);
        for j in 1..=half as u64 {
            let prev = a[j as usize - 1];
            a.push(prev * ((2 * j - 1) as f64 / (2 * j) as f64) * rho2);
        }
        scratch.iter_mut().for_each(|v| *v = 0.0);
        for d in 0..=half {
            if conv[d] == 0.0 {
                continue;
            }
            for (j, &aj) in a.iter().enumerate().take(half + 1 - d) {
                scratch[d + j] += conv[d] * aj;
            }
        }
        std::mem::swap(&mut conv, &mut scratch);
    }
    Ok(specialfn::lgamma(m as f64 + 1.0)?.exp() * conv[half])
}

/// Characteristic function of the centered information density:
/// prod_i (1 + rho_i^2 t^2)^{-1/2}. Real, even, and <= 1.
pub fn characteristic_function(spectrum: &CanonicalSpectrum, t: f64) -> f64 {
    spectrum
        .correlations()
        .iter()
        .map(|&rho| 1.0 / (1.0 + rho * rho * t * t).sqrt())
        .product()
}

/// Gaussian with the same mean I and variance sum rho_i^2 as the information
/// density; returns (pdf, cdf) at x. Comparison-only reference law.
pub fn gaussian_reference(spectrum: &CanonicalSpectrum, x: f64) -> Result<(f64, f64), SeriesError> {
    if spectrum.rank() == 0 {
        return Err(SeriesError::RankZero);
    }
    let var: f64 = spectrum.correlations().iter().map(|&r| r * r).sum();
    let centered = x - spectrum.mutual_information();
    let pdf = (-centered * centered / (2.0 * var)).exp()
        / (2.0 * std::f64::consts::PI * var).sqrt();
    let cdf = 0.5 * (1.0 + libm::erf(centered / (2.0 * var).sqrt()));
    Ok((pdf, cdf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn spec(rho: &[f64]) -> CanonicalSpectrum {
        CanonicalSpectrum::from_correlations(rho.iter().copied()).unwrap()
    }

    #[test]
    fn pdf_equal_spec_examples() {
        // r=2, rho=0.5 at the center: 1/(2 rho)
        let i2 = equal_center(2, 0.5);
        assert_relative_eq!(pdf_equal(2, 0.5, i2).unwrap(), 1.0, max_relative = 1e-14);
        // r=4, rho=0.3 at the center: 1/(4 rho)
        let i4 = equal_center(4, 0.3);
        assert_relative_eq!(
            pdf_equal(4, 0.3, i4).unwrap(),
            1.0 / 1.2,
            max_relative = 1e-13
        );
        // r=2, rho=0.5 at x = I+1: e^{-2}/(2 rho) = e^{-2}
        assert_relative_eq!(
            pdf_equal(2, 0.5, i2 + 1.0).unwrap(),
            (-2.0_f64).exp(),
            max_relative = 1e-13
        );
        // r=1, rho=0.8: (1/(rho pi)) K_0(a/rho)
        let i1 = equal_center(1, 0.8);
        let a = 0.64;
        let k0 = specialfn::bessel_k_scaled(Order::new(0.0).unwrap(), a / 0.8).unwrap()
            * (-a / 0.8_f64).exp();
        assert_relative_eq!(
            pdf_equal(1, 0.8, i1 + a).unwrap(),
            k0 / (0.8 * std::f64::consts::PI),
            max_relative = 1e-12
        );
        assert!(matches!(
            pdf_equal(1, 0.8, i1),
            Err(SeriesError::PoleAtCenter)
        ));
    }

    #[test]
    fn cdf_equal_spec_examples() {
        // r=2, rho=0.5, z=0.5: V = (1 - e^{-1})/2
        let i2 = equal_center(2, 0.5);
        let want = 0.5 + 0.5 * (1.0 - (-1.0_f64).exp());
        assert_relative_eq!(cdf_equal(2, 0.5, i2 + 0.5).unwrap(), want, max_relative = 1e-13);
        assert_relative_eq!(
            cdf_equal(2, 0.5, i2 - 0.5).unwrap(),
            1.0 - want,
            max_relative = 1e-13
        );
        // V(0) = 0: F(I) = 1/2 exactly
        assert_eq!(cdf_equal(2, 0.5, i2).unwrap(), 0.5);
        assert_eq!(cdf_equal(5, 0.77, equal_center(5, 0.77)).unwrap(), 0.5);
        // r=4, rho=0.3, large z: F -> 1 within 1e-10 at z = 30
        let i4 = equal_center(4, 0.3);
        assert!((cdf_equal(4, 0.3, i4 + 30.0).unwrap() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn equal_closed_forms_match_kernel_path() {
        // even-r exponential-polynomial forms vs the Bessel/Struve kernels
        for &(r, rho) in &[(2usize, 0.5f64), (4, 0.3), (6, 0.72), (2, 0.05)] {
            let center = equal_center(r, rho);
            for &dz in &[0.0, 0.13, 0.9, 3.7, -2.2] {
                let x = center + dz;
                let y = dz.abs() / rho;
                let f_kernel = u_kernel_direct(r, 0, y).unwrap() / (rho * SQRT_PI);
                assert_relative_eq!(
                    pdf_equal(r, rho, x).unwrap(),
                    f_kernel,
                    max_relative = 1e-12
                );
                let v_kernel = d_kernel_direct(r, 0, y).unwrap();
                let f_cdf = if dz > 0.0 { 0.5 + v_kernel } else { 0.5 - v_kernel };
                assert_relative_eq!(cdf_equal(r, rho, x).unwrap(), f_cdf, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn pdf_direct_examples() {
        // r=2 equal rho=0.5 with zero caps is the single-summand formula
        let s = spec(&[0.5, 0.5]);
        let at_center = pdf_direct(&s, s.mutual_information(), &[0]).unwrap();
        assert_eq!(at_center.value, pdf_equal(2, 0.5, equal_center(2, 0.5)).unwrap());
        assert_eq!(at_center.error_bound, 0.0);
        assert_eq!(at_center.n_terms, 1);

        // symmetry: depends on |x - I| only
        let s2 = spec(&[0.9, 0.3]);
        let i = s2.mutual_information();
        let a = 0.37;
        let up = pdf_direct(&s2, i + a, &[60]).unwrap();
        let dn = pdf_direct(&s2, i - a, &[60]).unwrap();
        assert_eq!(up.value, dn.value);

        // center value against the CF-inversion reference (40-digit arithmetic)
        let caps = caps_for_target(&s2, 1e-13, BoundKind::Pdf, 1_000_000).unwrap();
        let v = pdf_direct(&s2, i, &caps).unwrap();
        assert!((v.value - 0.894_318_339_291_136_979).abs() <= v.error_bound + 1e-13);
    }

    #[test]
    fn pdf_direct_input_errors() {
        let s = spec(&[0.9, 0.3]);
        assert!(matches!(
            pdf_direct(&s, 0.0, &[3, 3]),
            Err(SeriesError::CapsLengthMismatch { .. })
        ));
        let s1 = spec(&[0.7]);
        assert!(matches!(
            pdf_direct(&s1, s1.mutual_information(), &[]),
            Err(SeriesError::PoleAtCenter)
        ));
        // r = 1 off-center is exact
        let v = pdf_direct(&s1, s1.mutual_information() + 0.5, &[]).unwrap();
        assert_eq!(v.error_bound, 0.0);
        assert_relative_eq!(
            v.value,
            pdf_equal(1, 0.7, s1.mutual_information() + 0.5).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn cdf_direct_center_and_bounds() {
        let s = spec(&[0.9, 0.3]);
        let i = s.mutual_information();
        let at_center = cdf_direct(&s, i, &[40]).unwrap();
        assert_eq!(at_center.value, 0.5); // every D-kernel vanishes at z = 0
        // symmetry F(I-z) + F(I+z) = 1 within twice the bound
        for &z in &[0.0, 0.1, 1.0, 5.0] {
            let lo = cdf_direct(&s, i - z, &[80]).unwrap();
            let hi = cdf_direct(&s, i + z, &[80]).unwrap();
            assert!(
                (lo.value + hi.value - 1.0).abs() <= 2.0 * lo.error_bound + 1e-14,
                "symmetry violated at z={z}"
            );
        }
    }

    #[test]
    fn normalization_and_cf_consistency() {
        // integral of pdf_direct over I +- 40 rho_1 is 1 within 1e-6, and its
        // cosine transform reproduces the characteristic function
        let s = spec(&[0.9, 0.3]);
        let i = s.mutual_information();
        let caps = caps_for_target(&s, 1e-9, BoundKind::Pdf, 1_000_000).unwrap();
        let half_width = 40.0 * 0.9;
        let n = 4000usize; // Simpson per side, kink at x = I respected
        let mut for_t = [0.0f64; 4]; // cosine transforms at t = 0, 0.5, 1, 2
        let ts = [0.0, 0.5, 1.0, 2.0];
        let mut total = 0.0;
        for side in [-1.0f64, 1.0] {
            let h = half_width / n as f64;
            for j in 0..=n {
                let dz = j as f64 * h;
                let x = i + side * dz;
                let f = pdf_direct(&s, x, &caps).unwrap().value;
                let w = if j == 0 || j == n {
                    1.0
                } else if j % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                total += w * f * h / 3.0;
                for (ti, &t) in ts.iter().enumerate() {
                    for_t[ti] += w * f * (t * dz).cos() * h / 3.0;
                }
            }
        }
        assert!((total - 1.0).abs() <= 1e-6, "normalization {total}");
        for (ti, &t) in ts.iter().enumerate() {
            assert!(
                (for_t[ti] - characteristic_function(&s, t)).abs() <= 1e-6,
                "CF mismatch at t={t}"
            );
        }
    }

    #[test]
    fn characteristic_function_examples() {
        let s = spec(&[0.5]);
        assert_eq!(characteristic_function(&s, 0.0), 1.0);
        assert_relative_eq!(
            characteristic_function(&s, 2.0),
            std::f64::consts::FRAC_1_SQRT_2,
            max_relative = 1e-15
        );
        let s2 = spec(&[0.9, 0.3]);
        assert_eq!(
            characteristic_function(&s2, 5.0),
            characteristic_function(&s2, -5.0)
        );
        assert!(characteristic_function(&s2, 3.21) <= 1.0);
    }

    #[test]
    fn moments_examples() {
        let s = spec(&[0.6, 0.8]);
        assert_eq!(central_moment(&s, 3).unwrap(), 0.0);
        assert_relative_eq!(central_moment(&s, 2).unwrap(), 1.0, max_relative = 1e-14);
        let s1 = spec(&[0.5]);
        assert_relative_eq!(
            central_moment(&s1, 4).unwrap(),
            9.0 * 0.5_f64.powi(4),
            max_relative = 1e-13
        );
        assert!(matches!(
            central_moment(&s1, 0),
            Err(SeriesError::InvalidMomentOrder)
        ));
    }

    #[test]
    fn moments_match_enumeration() {
        // brute-force enumeration over the even-index set as oracle
        fn enumerate(rho: &[f64], m: u32) -> f64 {
            fn rec(rho: &[f64], i: usize, remaining: usize, acc: f64, out: &mut f64) {
                if i == rho.len() {
                    if remaining == 0 {
                        *out += acc;
                    }
                    return;
                }
                let mut w = 1.0; // (2j)!/(4^j (j!)^2) rho^{2j}
                for j in 0..=remaining {
                    if j > 0 {
                        w *= (2.0 * j as f64 - 1.0) / (2.0 * j as f64) * rho[i] * rho[i];
                    }
                    rec(rho, i + 1, remaining - j, acc * w, out);
                }
            }
            let mut out = 0.0;
            rec(rho, 0, (m / 2) as usize, 1.0, &mut out);
            let mfact: f64 = (1..=m as u64).map(|v| v as f64).product();
            mfact * out
        }
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..6 {
            let r = rng.gen_range(1..=4);
            let rho: Vec<f64> = (0..r).map(|_| rng.gen_range(0.05..0.95)).collect();
            let s = spec(&rho);
            for m in [2u32, 4, 6, 8] {
                let conv = central_moment(&s, m).unwrap();
                let brute = enumerate(s.correlations(), m);
                assert_relative_eq!(conv, brute, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn fourth_moment_two_sum_formula() {
        // 9 sum rho^4 + 6 sum_{i<j} rho_i^2 rho_j^2
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..10 {
            let r = rng.gen_range(1..=5);
            let rho: Vec<f64> = (0..r).map(|_| rng.gen_range(0.05..0.95)).collect();
            let s = spec(&rho);
            let m4 = central_moment(&s, 4).unwrap();
            let sum4: f64 = rho.iter().map(|v| v.powi(4)).sum();
            let mut cross = 0.0;
            for i in 1..rho.len() {
                for j in 0..i {
                    cross += rho[i] * rho[i] * rho[j] * rho[j];
                }
            }
            assert_relative_eq!(m4, 9.0 * sum4 + 6.0 * cross, max_relative = 1e-12);
        }
    }

    #[test]
    fn equal_moment_formula_examples() {
        // single correlation: (m!/(m/2)!)^2 (rho/2)^m
        let s = spec(&[0.5]);
        for m in [2u32, 4, 6] {
            let mf: f64 = (1..=m as u64).map(|v| v as f64).product();
            let hf: f64 = (1..=(m / 2) as u64).map(|v| v as f64).product();
            let want = (mf / hf).powi(2) * (0.25_f64).powi(m as i32);
            assert_relative_eq!(central_moment(&s, m).unwrap(), want, max_relative = 1e-12);
        }
        // r=4 equal 0.2: variance r rho^2
        let s4 = spec(&[0.2, 0.2, 0.2, 0.2]);
        assert_relative_eq!(
            central_moment(&s4, 2).unwrap(),
            4.0 * 0.04,
            max_relative = 1e-13
        );
    }

    #[test]
    fn gaussian_reference_values() {
        let s = spec(&[0.6, 0.8]);
        let i = s.mutual_information();
        let (pdf, cdf) = gaussian_reference(&s, i).unwrap();
        assert_relative_eq!(
            pdf,
            1.0 / (2.0 * std::f64::consts::PI).sqrt(),
            max_relative = 1e-14
        ); // variance is 1 here
        assert_relative_eq!(cdf, 0.5, max_relative = 1e-14);
        // cdf monotone on a grid
        let mut prev = 0.0;
        for j in 0..40 {
            let x = i - 4.0 + 0.2 * j as f64;
            let (_, c) = gaussian_reference(&s, x).unwrap();
            assert!(c >= prev);
            prev = c;
        }
        let s40 = CanonicalSpectrum::equal(0.2, 40).unwrap();
        let (pdf40, _) = gaussian_reference(&s40, s40.mutual_information()).unwrap();
        assert_relative_eq!(
            pdf40,
            1.0 / (2.0 * std::f64::consts::PI * 1.6).sqrt(),
            max_relative = 1e-14
        );
    }
}
