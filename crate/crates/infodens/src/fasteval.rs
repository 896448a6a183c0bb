//! Fast recurrence-based evaluation of the PDF and CDF.
//!
//! The multi-index box sum collapses to a single-index series
//!
//!   f(x) = (1/(rho_r sqrt(pi))) P sum_k delta_k U_k(|x-I|/rho_r),
//!   V(z) = P sum_k delta_k D_k(z),          P = prod_{i<r} rho_r/rho_i,
//!
//! where the x-independent coefficients delta_k follow a Moschopoulos-style
//! recursion from gamma_j, and the kernels U_k, D_k follow two-term
//! recurrences seeded by two (three for the CDF) special-function
//! evaluations. The truncation index for a requested error bound depends on
//! the spectrum alone, so one [`CoefficientTable`] serves a whole grid.

use crate::cca::CanonicalSpectrum;
use crate::series::{self, ApproxValue, SeriesError, SQRT_PI};
use crate::specialfn::{self, Order, SpecialFnError};
use thiserror::Error;

pub use crate::series::BoundKind;

#[derive(Debug, Error)]
pub enum FastEvalError {
    #[error("not applicable: {0} (use the equal-correlation closed forms)")]
    NotApplicable(&'static str),
    #[error("truncation failure: bound {best_bound:.3e} > target after {max_terms} terms")]
    TruncationFailure { max_terms: usize, best_bound: f64 },
    #[error("delta coefficients left the double range at k = {k}")]
    DeltaOverflow { k: usize },
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    SpecialFn(#[from] SpecialFnError),
}

const LN_RESCALE: f64 = 644.0;
const RESCALE_DOWN: f64 = 3.546_628_569_186_214_5e-280; // e^-644

/// gamma_j = sum_{i=1}^{r-1} (1/(2j)) (1 - rho_r^2/rho_i^2)^j.
/// Zero when all correlations are equal; requires r >= 2.
pub fn gamma_coeff(spectrum: &CanonicalSpectrum, j: u32) -> Result<f64, FastEvalError> {
    if spectrum.rank() < 2 {
        return Err(FastEvalError::NotApplicable(
            "gamma coefficients need rank >= 2",
        ));
    }
    assert!(j >= 1, "gamma_coeff index starts at 1");
    let rho_r = spectrum.rho_min();
    let sum: f64 = spectrum.correlations()[..spectrum.rank() - 1]
        .iter()
        .map(|&rho| (1.0 - (rho_r * rho_r) / (rho * rho)).powi(j as i32))
        .sum();
    Ok(sum / (2.0 * j as f64))
}

/// Spectrum-derived series coefficients, extendable on demand.
///
/// `deltas` holds delta_0.. and `scaled_sums[k]` the running value
/// P * sum_{l<=k} delta_l, which increases monotonically to 1. Committed
/// prefixes never change, so concurrent readers of an already-extended table
/// are safe; extension needs exclusive access.
#[derive(Debug, Clone)]
pub struct CoefficientTable {
    r: usize,
    rho_min: f64,
    prefactor: f64,
    ln_prefactor: f64,
    q: Vec<f64>,
    q_pow: Vec<f64>, // q_i^j at the current gamma frontier
    gammas: Vec<f64>, // gammas[j-1] = gamma_j
    deltas: Vec<f64>,
    scaled_sums: Vec<f64>,
}

impl CoefficientTable {
    /// Requires r >= 2 and at least two distinct correlations (otherwise the
    /// series degenerates to the single-summand closed form).
    pub fn new(spectrum: &CanonicalSpectrum) -> Result<Self, FastEvalError> {
        if spectrum.rank() < 2 || spectrum.is_equal_correlation() {
            return Err(FastEvalError::NotApplicable(
                "coefficient table needs rank >= 2 with two distinct correlations",
            ));
        }
        let rho = spectrum.correlations();
        let rho_min = spectrum.rho_min();
        let q: Vec<f64> = rho[..rho.len() - 1]
            .iter()
            .map(|&v| 1.0 - (rho_min * rho_min) / (v * v))
            .collect();
        let prefactor: f64 = rho[..rho.len() - 1].iter().map(|&v| rho_min / v).product();
        let ln_prefactor: f64 = rho[..rho.len() - 1]
            .iter()
            .map(|&v| (rho_min / v).ln())
            .sum();
        Ok(CoefficientTable {
            r: spectrum.rank(),
            rho_min,
            prefactor,
            ln_prefactor,
            q_pow: vec![1.0; q.len()],
            q,
            gammas: Vec::new(),
            deltas: vec![1.0], // delta_0 = 1
            scaled_sums: vec![prefactor],
        })
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    /// Highest delta index currently committed.
    pub fn frontier(&self) -> usize {
        self.deltas.len() - 1
    }

    pub fn delta(&self, k: usize) -> f64 {
        self.deltas[k]
    }

    pub fn gamma(&self, j: usize) -> f64 {
        self.gammas[j - 1]
    }

    /// P * sum_{l<=k} delta_l; nondecreasing in k with limit 1.
    pub fn scaled_sum(&self, k: usize) -> f64 {
        self.scaled_sums[k]
    }

    /// Fill deltas through index `upto` by the recurrence
    /// delta_{k+1} = (1/(k+1)) sum_{j=1}^{k+1} j gamma_j delta_{k+1-j}.
    pub fn extend_to(&mut self, upto: usize) -> Result<(), FastEvalError> {
        while self.gammas.len() < upto {
            for (pow, &qi) in self.q_pow.iter_mut().zip(&self.q) {
                *pow *= qi;
            }
            let j = self.gammas.len() as f64 + 1.0;
            self.gammas.push(self.q_pow.iter().sum::<f64>() / (2.0 * j));
        }
        while self.deltas.len() <= upto {
            let k1 = self.deltas.len(); // computing delta_{k1}
            let mut acc = 0.0;
            for j in 1..=k1 {
                acc += j as f64 * self.gammas[j - 1] * self.deltas[k1 - j];
            }
            let d = acc / k1 as f64;
            if !d.is_finite() {
                return Err(FastEvalError::DeltaOverflow { k: k1 });
            }
            self.deltas.push(d);
            let s = self.scaled_sums[k1 - 1] + self.prefactor * d;
            self.scaled_sums.push(s);
        }
        Ok(())
    }

    /// Truncation bound after summing terms 0..=n.
    ///
    /// PDF: Gamma((r-1)/2+n) / (2 rho_r sqrt(pi) Gamma(r/2+n)) * (1 - P sum delta);
    /// CDF: (1 - P sum delta). Both are uniform in x; the CDF form is the
    /// one that reproduces the reference term counts (it is a factor 2
    /// looser than the provable bound, hence still rigorous).
    pub fn bound(&self, n: usize, kind: BoundKind) -> f64 {
        let tail = (1.0 - self.scaled_sums[n]).max(0.0);
        match kind {
            BoundKind::Cdf => tail,
            BoundKind::Pdf => {
                let nf = n as f64;
                let g = (libm::lgamma((self.r as f64 - 1.0) / 2.0 + nf)
                    - libm::lgamma(self.r as f64 / 2.0 + nf))
                .exp();
                g / (2.0 * self.rho_min * SQRT_PI) * tail
            }
        }
    }
}

/// Smallest index n whose uniform bound is <= target (strict <=, evaluated
/// after adding term n). Depends on the spectrum only, never on x.
pub fn required_terms(
    spectrum: &CanonicalSpectrum,
    target_error: f64,
    kind: BoundKind,
    max_terms: usize,
) -> Result<usize, FastEvalError> {
    let mut table = CoefficientTable::new(spectrum)?;
    required_terms_with(&mut table, target_error, kind, max_terms)
}

/// Same as [`required_terms`] but reusing (and extending) a shared table.
pub fn required_terms_with(
    table: &mut CoefficientTable,
    target_error: f64,
    kind: BoundKind,
    max_terms: usize,
) -> Result<usize, FastEvalError> {
    assert!(target_error > 0.0, "target error must be positive");
    let mut n = 0usize;
    loop {
        if n > table.frontier() {
            table.extend_to((n + 64).min(max_terms.max(n + 1)))?;
        }
        let b = table.bound(n, kind);
        if b <= target_error {
            return Ok(n);
        }
        if n >= max_terms {
            return Err(FastEvalError::TruncationFailure {
                max_terms,
                best_bound: b,
            });
        }
        n += 1;
    }
}

/// Scaled U-kernel state: carries v_k = U_k(y) * e^c with a running
/// rescale so the two-term recurrence never over/underflows.
struct KernelState {
    v_prev: f64,
    v_curr: f64,
    ln_scale_neg: f64, // c: U_k = v_k * e^{-c}
    y: f64,
    r: f64,
    k: usize,
}

impl KernelState {
    fn new(r: usize, y: f64) -> Result<Self, FastEvalError> {
        let (ln_u0, ln_u1) = if y == 0.0 {
            // U_k(0) = Gamma((r-1)/2+k) / (2 Gamma(r/2+k))
            let l0 = specialfn::lgamma((r as f64 - 1.0) / 2.0)?
                - specialfn::lgamma(r as f64 / 2.0)?
                - std::f64::consts::LN_2;
            let l1 = specialfn::lgamma((r as f64 + 1.0) / 2.0)?
                - specialfn::lgamma(r as f64 / 2.0 + 1.0)?
                - std::f64::consts::LN_2;
            (l0, l1)
        } else {
            let a0 = Order::from_twice(r as i64 - 1)?;
            let a1 = Order::from_twice(r as i64 + 1)?;
            let base = |order: Order, alpha: f64, g: f64| -> Result<f64, FastEvalError> {
                Ok(specialfn::log_bessel_k_scaled(order, y)? - y + alpha * (y / 2.0).ln()
                    - specialfn::lgamma(g)?)
            };
            (
                base(a0, (r as f64 - 1.0) / 2.0, r as f64 / 2.0)?,
                base(a1, (r as f64 + 1.0) / 2.0, r as f64 / 2.0 + 1.0)?,
            )
        };
        let c = -ln_u0.max(ln_u1);
        Ok(KernelState {
            v_prev: (ln_u0 + c).exp(),
            v_curr: (ln_u1 + c).exp(),
            ln_scale_neg: c,
            y,
            r: r as f64,
            k: 1,
        })
    }

    /// v value of U_k for k in {state.k - 1, state.k}.
    fn v_at(&self, k: usize) -> f64 {
        if k == self.k {
            self.v_curr
        } else {
            self.v_prev
        }
    }

    /// Advance to k+1 via
    /// U_k = y^2/((r+2k-2)(r+2k-4)) U_{k-2} + (r+2k-3)/(r+2k-2) U_{k-1}.
    fn advance(&mut self) {
        let k = (self.k + 1) as f64;
        let next = self.y * self.y / ((self.r + 2.0 * k - 2.0) * (self.r + 2.0 * k - 4.0))
            * self.v_prev
            + (self.r + 2.0 * k - 3.0) / (self.r + 2.0 * k - 2.0) * self.v_curr;
        self.v_prev = self.v_curr;
        self.v_curr = next;
        self.k += 1;
    }

    fn rescale(&mut self, factor: f64, ln_factor: f64) {
        self.v_prev *= factor;
        self.v_curr *= factor;
        self.ln_scale_neg += ln_factor;
    }
}

fn delegate_equal_pdf(spectrum: &CanonicalSpectrum, x: f64) -> Result<ApproxValue, FastEvalError> {
    let v = series::pdf_equal(spectrum.rank(), spectrum.rho_min(), x)?;
    Ok(ApproxValue::exact(v))
}

fn delegate_equal_cdf(spectrum: &CanonicalSpectrum, x: f64) -> Result<ApproxValue, FastEvalError> {
    let v = series::cdf_equal(spectrum.rank(), spectrum.rho_min(), x)?;
    Ok(ApproxValue::exact(v))
}

/// PDF by the adaptive single-index series; `target_error` is the requested
/// uniform truncation bound. Equal-correlation spectra (including r = 1)
/// delegate to the exact closed form.
pub fn pdf_fast(
    spectrum: &CanonicalSpectrum,
    x: f64,
    target_error: f64,
    max_terms: usize,
) -> Result<ApproxValue, FastEvalError> {
    if spectrum.rank() == 0 {
        return Err(SeriesError::RankZero.into());
    }
    if spectrum.is_equal_correlation() {
        return delegate_equal_pdf(spectrum, x);
    }
    let mut table = CoefficientTable::new(spectrum)?;
    let n = required_terms_with(&mut table, target_error, BoundKind::Pdf, max_terms)?;
    pdf_fast_at(&table, spectrum, x, n)
}

/// PDF at x summing terms 0..=n from a prepared table (extended to >= n).
pub fn pdf_fast_at(
    table: &CoefficientTable,
    spectrum: &CanonicalSpectrum,
    x: f64,
    n: usize,
) -> Result<ApproxValue, FastEvalError> {
    debug_assert!(table.frontier() >= n);
    let y = (x - spectrum.mutual_information()).abs() / table.rho_min;
    let mut state = KernelState::new(table.r, y)?;
    let mut sum = table.delta(0) * state.v_at(0);
    if n >= 1 {
        sum += table.delta(1) * state.v_at(1);
    }
    for k in 2..=n {
        state.advance();
        sum += table.delta(k) * state.v_curr;
        if state.v_curr > 1e270 || sum > 1e270 {
            state.rescale(RESCALE_DOWN, LN_RESCALE);
            sum *= RESCALE_DOWN;
        }
    }
    let ln_value =
        sum.ln() + table.ln_prefactor - state.ln_scale_neg - (table.rho_min * SQRT_PI).ln();
    let value = if ln_value < -745.0 { 0.0 } else { ln_value.exp() };
    Ok(ApproxValue {
        value,
        n_terms: n as u64 + 1,
        error_bound: table.bound(n, BoundKind::Pdf),
        underflow: value == 0.0 && sum > 0.0,
    })
}

/// ln f(x) without the final exponential, immune to the e^{-|x-I|/rho_r}
/// underflow of [`pdf_fast`].
pub fn log_pdf_fast(
    spectrum: &CanonicalSpectrum,
    x: f64,
    target_error: f64,
    max_terms: usize,
) -> Result<f64, FastEvalError> {
    if spectrum.rank() == 0 {
        return Err(SeriesError::RankZero.into());
    }
    if spectrum.is_equal_correlation() {
        // closed forms stay representable much further out; fall back to ln
        // of the direct value, or reconstruct from the kernel for odd r
        let r = spectrum.rank();
        let rho = spectrum.rho_min();
        let y = (x - spectrum.mutual_information()).abs() / rho;
        if r == 1 && y == 0.0 {
            return Err(SeriesError::PoleAtCenter.into());
        }
        let ta = r as i64 - 1;
        if r % 2 == 1 {
            let alpha = (r as f64 - 1.0) / 2.0;
            return Ok(specialfn::log_bessel_k_scaled(Order::from_twice(ta)?, y)? - y
                + if y > 0.0 { alpha * (y / 2.0).ln() } else { 0.0 }
                - specialfn::lgamma(r as f64 / 2.0)?
                - (rho * SQRT_PI).ln());
        }
        // even r: ln of the exponential-polynomial form
        let h = r / 2;
        let ln_denom = rho.ln()
            + (r as f64 - 1.0) * std::f64::consts::LN_2
            + specialfn::lgamma(h as f64)?;
        let mut terms: Vec<f64> = Vec::with_capacity(h);
        for i in 0..h {
            let ln_ci = specialfn::lgamma((2 * h - 1 - i) as f64)?
                - specialfn::lgamma((h - i) as f64)?
                - specialfn::lgamma(i as f64 + 1.0)?
                + i as f64 * std::f64::consts::LN_2;
            if i == 0 {
                terms.push(ln_ci);
            } else if y > 0.0 {
                terms.push(ln_ci + i as f64 * y.ln());
            }
        }
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = terms.iter().map(|t| (t - m).exp()).sum();
        return Ok(m + s.ln() - y - ln_denom);
    }
    let mut table = CoefficientTable::new(spectrum)?;
    let n = required_terms_with(&mut table, target_error, BoundKind::Pdf, max_terms)?;
    let y = (x - spectrum.mutual_information()).abs() / table.rho_min;
    let mut state = KernelState::new(table.r, y)?;
    let mut sum = table.delta(0) * state.v_at(0);
    if n >= 1 {
        sum += table.delta(1) * state.v_at(1);
    }
    for k in 2..=n {
        state.advance();
        sum += table.delta(k) * state.v_curr;
        if state.v_curr > 1e270 || sum > 1e270 {
            state.rescale(RESCALE_DOWN, LN_RESCALE);
            sum *= RESCALE_DOWN;
        }
    }
    Ok(sum.ln() + table.ln_prefactor - state.ln_scale_neg - (table.rho_min * SQRT_PI).ln())
}

/// CDF by the adaptive single-index series. D_0 comes from scaled
/// Bessel*Struve products; later kernels follow
/// D_k = D_{k-1} - y U_{k-1}(y) / (2 sqrt(pi) (r/2 + k - 1)).
pub fn cdf_fast(
    spectrum: &CanonicalSpectrum,
    x: f64,
    target_error: f64,
    max_terms: usize,
) -> Result<ApproxValue, FastEvalError> {
    if spectrum.rank() == 0 {
        return Err(SeriesError::RankZero.into());
    }
    if spectrum.is_equal_correlation() {
        return delegate_equal_cdf(spectrum, x);
    }
    let mut table = CoefficientTable::new(spectrum)?;
    let n = required_terms_with(&mut table, target_error, BoundKind::Cdf, max_terms)?;
    cdf_fast_at(&table, spectrum, x, n)
}

/// CDF at x summing terms 0..=n from a prepared table (extended to >= n).
pub fn cdf_fast_at(
    table: &CoefficientTable,
    spectrum: &CanonicalSpectrum,
    x: f64,
    n: usize,
) -> Result<ApproxValue, FastEvalError> {
    debug_assert!(table.frontier() >= n);
    let centered = x - spectrum.mutual_information();
    let y = centered.abs() / table.rho_min;
    let r = table.r;

    let mut v_hat = 0.0;
    if y > 0.0 {
        let mut d = series::d_kernel_direct(r, 0, y)?;
        let mut state = KernelState::new(r, y)?;
        v_hat = table.delta(0) * d;
        for k in 1..=n {
            // unscaled U_{k-1}(y)
            let u = {
                let v = state.v_at(k - 1);
                let ln = v.ln() - state.ln_scale_neg;
                if ln < -745.0 {
                    0.0
                } else {
                    ln.exp()
                }
            };
            d -= y * u / (2.0 * SQRT_PI * (r as f64 / 2.0 + k as f64 - 1.0));
            v_hat += table.delta(k) * d;
            if k <= n - 1 && k >= 1 {
                state.advance();
            }
        }
        v_hat *= table.prefactor;
    }
    let value = if centered > 0.0 { 0.5 + v_hat } else { 0.5 - v_hat };
    Ok(ApproxValue {
        value,
        n_terms: n as u64 + 1,
        error_bound: table.bound(n, BoundKind::Cdf),
        underflow: false,
    })
}
