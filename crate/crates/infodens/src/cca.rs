//! Canonical correlation analysis of a joint Gaussian covariance model.
//!
//! The canonical correlations are the singular values of
//! M = R_X^{-1/2} R_XY R_Y^{-1/2}; together with the rank of the
//! cross-covariance they determine the full law of the information density.
//! Matrix square roots go through the symmetric eigendecomposition so that
//! R^{1/2} is the unique positive semidefinite root.

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CcaError {
    #[error("matrix dimensions are inconsistent: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not symmetric (asymmetry {asymmetry:.3e} exceeds 1e-8 relative)")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is not positive (semi)definite: eigenvalue {eigenvalue:.6e}")]
    NotPositiveDefinite { eigenvalue: f64 },
    #[error("degenerate model: canonical correlation {0} is numerically >= 1")]
    DegenerateModel(f64),
    #[error("correlation {0} outside the open interval (0, 1)")]
    CorrelationOutOfRange(f64),
}

/// Joint Gaussian specification: covariance blocks R_X (p x p), R_Y (q x q)
/// and cross-covariance R_XY (p x q).
///
/// Means are irrelevant to the law of the information density and are not
/// part of the model; inputs with nonzero means are simply interpreted by
/// their covariances.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    p: usize,
    q: usize,
    r_x: DMatrix<f64>,
    r_y: DMatrix<f64>,
    r_xy: DMatrix<f64>,
}

impl CovarianceModel {
    /// Validates symmetry and positive definiteness of R_X, R_Y and of the
    /// full (p+q) x (p+q) block matrix (the latter is what keeps every
    /// canonical correlation strictly below 1).
    pub fn new(
        r_x: DMatrix<f64>,
        r_y: DMatrix<f64>,
        r_xy: DMatrix<f64>,
    ) -> Result<Self, CcaError> {
        let (p, q) = (r_x.nrows(), r_y.nrows());
        if r_x.ncols() != p || r_y.ncols() != q {
            return Err(CcaError::DimensionMismatch(format!(
                "R_X is {}x{}, R_Y is {}x{}",
                r_x.nrows(),
                r_x.ncols(),
                r_y.nrows(),
                r_y.ncols()
            )));
        }
        if r_xy.nrows() != p || r_xy.ncols() != q {
            return Err(CcaError::DimensionMismatch(format!(
                "R_XY is {}x{}, expected {}x{}",
                r_xy.nrows(),
                r_xy.ncols(),
                p,
                q
            )));
        }
        let r_x = symmetrized(&r_x)?;
        let r_y = symmetrized(&r_y)?;
        require_positive_definite(&r_x)?;
        require_positive_definite(&r_y)?;

        let mut full = DMatrix::zeros(p + q, p + q);
        full.view_mut((0, 0), (p, p)).copy_from(&r_x);
        full.view_mut((0, p), (p, q)).copy_from(&r_xy);
        full.view_mut((p, 0), (q, p)).copy_from(&r_xy.transpose());
        full.view_mut((p, p), (q, q)).copy_from(&r_y);
        require_positive_definite(&full)?;

        Ok(CovarianceModel { p, q, r_x, r_y, r_xy })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn r_x(&self) -> &DMatrix<f64> {
        &self.r_x
    }

    pub fn r_y(&self) -> &DMatrix<f64> {
        &self.r_y
    }

    pub fn r_xy(&self) -> &DMatrix<f64> {
        &self.r_xy
    }

    /// Kac-Murdock-Szego joint covariance (rho^|i-j|) over p+q variables;
    /// its cross block has rank 1 with single canonical correlation |rho|.
    pub fn kac_murdock_szego(rho: f64, p: usize, q: usize) -> Result<Self, CcaError> {
        if !(rho.abs() > 0.0 && rho.abs() < 1.0) {
            return Err(CcaError::CorrelationOutOfRange(rho));
        }
        let n = p + q;
        let full = DMatrix::from_fn(n, n, |i, j| rho.powi((i as i32 - j as i32).abs()));
        let r_x = full.view((0, 0), (p, p)).into_owned();
        let r_y = full.view((p, p), (q, q)).into_owned();
        let r_xy = full.view((0, p), (p, q)).into_owned();
        CovarianceModel::new(r_x, r_y, r_xy)
    }
}

/// Canonical correlations sorted non-increasing, all in (0, 1), with the
/// mutual information (nats) they induce.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalSpectrum {
    correlations: Vec<f64>,
    mutual_information: f64,
    rank_tolerance: f64,
}

impl CanonicalSpectrum {
    /// Builds a spectrum from raw correlations (any order); values are
    /// sorted descending and validated to lie strictly inside (0, 1).
    /// An empty list is the rank-0 spectrum.
    pub fn from_correlations<I: IntoIterator<Item = f64>>(corr: I) -> Result<Self, CcaError> {
        let mut c: Vec<f64> = corr.into_iter().collect();
        for &v in &c {
            if !(v > 0.0 && v < 1.0) {
                return Err(CcaError::CorrelationOutOfRange(v));
            }
        }
        c.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mi = mutual_information(&c);
        Ok(CanonicalSpectrum {
            correlations: c,
            mutual_information: mi,
            rank_tolerance: 0.0,
        })
    }

    /// r equal canonical correlations rho.
    pub fn equal(rho: f64, r: usize) -> Result<Self, CcaError> {
        Self::from_correlations(std::iter::repeat(rho).take(r))
    }

    /// Spectrum of the continuous-time AWGN channel on [0, T] with Brownian
    /// input: rho_i(T) = T / sqrt(T^2 + (pi (i - 1/2))^2).
    pub fn awgn_brownian(t: f64, r: usize) -> Result<Self, CcaError> {
        if !(t > 0.0) {
            return Err(CcaError::CorrelationOutOfRange(t));
        }
        Self::from_correlations((1..=r).map(|i| {
            let w = std::f64::consts::PI * (i as f64 - 0.5);
            t / (t * t + w * w).sqrt()
        }))
    }

    pub fn rank(&self) -> usize {
        self.correlations.len()
    }

    pub fn correlations(&self) -> &[f64] {
        &self.correlations
    }

    /// Smallest canonical correlation; the series are organized around it.
    pub fn rho_min(&self) -> f64 {
        *self.correlations.last().expect("rank >= 1")
    }

    pub fn mutual_information(&self) -> f64 {
        self.mutual_information
    }

    pub fn rank_tolerance(&self) -> f64 {
        self.rank_tolerance
    }

    /// True when every correlation equals the smallest one exactly.
    pub fn is_equal_correlation(&self) -> bool {
        self.correlations
            .iter()
            .all(|&c| c == self.correlations[self.correlations.len() - 1])
    }
}

/// Whitening maps A = U^T R_X^{-1/2}, B = V^T R_Y^{-1/2}: A R_X A^T = I,
/// B R_Y B^T = I, and A R_XY B^T is diagonal with the canonical correlations.
#[derive(Debug, Clone)]
pub struct WhiteningPair {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

/// Mutual information (1/2) sum_i log(1/(1 - rho_i^2)) in nats.
pub fn mutual_information(correlations: &[f64]) -> f64 {
    correlations
        .iter()
        .map(|&r| -0.5 * (-r * r).ln_1p())
        .sum()
}

/// Unique positive semidefinite S with S S = M, via symmetric
/// eigendecomposition; eigenvalues within tolerance of zero are clamped.
pub fn symmetric_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>, CcaError> {
    let m = symmetrized(m)?;
    let eig = SymmetricEigen::new(m);
    let max_ev = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b));
    let tol = eig.eigenvalues.len() as f64 * f64::EPSILON * max_ev.max(1.0);
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < -tol {
            return Err(CcaError::NotPositiveDefinite { eigenvalue: *v });
        }
        *v = v.max(0.0).sqrt();
    }
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&vals) * q.transpose())
}

/// Inverse square root R^{-1/2} through the same eigendecomposition.
fn symmetric_inv_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>, CcaError> {
    let eig = SymmetricEigen::new(m.clone());
    let max_ev = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b));
    let min_ev = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if min_ev <= m.nrows() as f64 * f64::EPSILON * max_ev {
        return Err(CcaError::NotPositiveDefinite { eigenvalue: min_ev });
    }
    let vals = eig.eigenvalues.map(|v| 1.0 / v.sqrt());
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&vals) * q.transpose())
}

/// Canonical spectrum and whitening pair of a covariance model.
///
/// Singular values of M = R_X^{-1/2} R_XY R_Y^{-1/2} are sorted descending;
/// values at or below `rank_tolerance` (default max(p,q) * sigma_max * eps)
/// are dropped. A kept value numerically >= 1 means the joint law is
/// degenerate and is rejected.
pub fn canonical_spectrum(
    model: &CovarianceModel,
    rank_tolerance: Option<f64>,
) -> Result<(CanonicalSpectrum, WhiteningPair), CcaError> {
    let rx_inv_sqrt = symmetric_inv_sqrt(model.r_x())?;
    let ry_inv_sqrt = symmetric_inv_sqrt(model.r_y())?;
    let m = &rx_inv_sqrt * model.r_xy() * &ry_inv_sqrt;

    let svd = m.svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");

    // sort singular values descending, permuting U and V^T consistently
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
    let sigma_max = svd.singular_values[idx[0]].max(0.0);
    let tol = rank_tolerance.unwrap_or_else(|| {
        model.p().max(model.q()) as f64 * sigma_max * f64::EPSILON
    });

    let mut correlations = Vec::new();
    for &i in &idx {
        let s = svd.singular_values[i];
        if s <= tol {
            break;
        }
        if s >= 1.0 - 1e-12 {
            return Err(CcaError::DegenerateModel(s));
        }
        correlations.push(s);
    }

    let u_sorted = DMatrix::from_fn(u.nrows(), u.ncols(), |r, c| u[(r, idx[c])]);
    let vt_sorted = DMatrix::from_fn(v_t.nrows(), v_t.ncols(), |r, c| v_t[(idx[r], c)]);
    let a = u_sorted.transpose() * &rx_inv_sqrt;
    let b = vt_sorted * &ry_inv_sqrt;

    let mi = mutual_information(&correlations);
    Ok((
        CanonicalSpectrum {
            correlations,
            mutual_information: mi,
            rank_tolerance: tol,
        },
        WhiteningPair { a, b },
    ))
}

/// Symmetry check (1e-8 relative in max norm) followed by (M + M^T)/2.
fn symmetrized(m: &DMatrix<f64>) -> Result<DMatrix<f64>, CcaError> {
    let scale = m.iter().fold(0.0_f64, |a, &b| a.max(b.abs())).max(f64::MIN_POSITIVE);
    let mut asym = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if asym > 1e-8 * scale {
        return Err(CcaError::NotSymmetric { asymmetry: asym / scale });
    }
    Ok((m + m.transpose()) * 0.5)
}

fn require_positive_definite(m: &DMatrix<f64>) -> Result<(), CcaError> {
    let eig = SymmetricEigen::new(m.clone());
    let max_ev = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b));
    let min_ev = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if min_ev <= m.nrows() as f64 * f64::EPSILON * max_ev {
        return Err(CcaError::NotPositiveDefinite { eigenvalue: min_ev });
    }
    Ok(())
}
