//! Geometric Harmonics regression and its latent-space variant.
//!
//! A Gaussian affinity matrix W over the training inputs (no Markov
//! normalization here, unlike the diffusion map) has orthonormal eigenvectors
//! psi_alpha with eigenvalues sigma_alpha. A target function sampled on the
//! training points is projected onto the modes with sigma_alpha >= delta *
//! sigma_1, and each retained mode extends off the training set through its
//! own Nystrom formula. The sum of the extended modes, weighted by the
//! projection coefficients, evaluates the regression anywhere.
//!
//! Fitting against the selected diffusion coordinates instead of ambient
//! inputs gives the latent-input variant: the model then consumes Nystrom
//! outputs, which is how the latent-to-ambient inverse map is built.

use nalgebra::{DMatrix, DVector};

use crate::dmaps::DMapModel;
use crate::error::{Error, Result};
use crate::kernel;
use crate::linalg;
use crate::persist;
use crate::scalar::{real, Real};

/// Eigenvalues at or below this are discarded outright before the relative
/// delta threshold is applied; the affinity matrix is positive semidefinite
/// in exact arithmetic, so anything smaller is roundoff.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// Default truncation parameter.
pub fn default_delta<T: Real>() -> T {
    real::<T>(1e-6)
}

/// Which space the model's inputs live in; recorded for persistence and
/// sanity checks, the math is identical.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputSpace {
    Ambient,
    Latent,
}

/// A fitted Geometric Harmonics regression from q-dimensional inputs to
/// r-dimensional outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct GHModel<T: Real> {
    pub input_space: InputSpace,
    /// Training inputs, one per row (M x q).
    pub input_points: DMatrix<T>,
    pub bandwidth: T,
    pub delta: T,
    /// Retained eigenvalues, descending (length A).
    pub sigma: DVector<T>,
    /// Retained orthonormal eigenvectors, one per column (M x A).
    pub psi: DMatrix<T>,
    /// Projection coefficients, one column per output dimension (A x r).
    pub coefficients: DMatrix<T>,
    /// True when truncation left only a single mode; the fit then cannot
    /// represent anything beyond one shape and is almost surely underfitting.
    pub underfit: bool,
    /// Hash of `input_points`, for cross-model consistency checks.
    pub input_hash: String,
}

/// An extension result: the regressed values plus the raw kernel mass of the
/// query against the training inputs. The mass decays toward zero away from
/// the data; a tiny value flags an extrapolation whose output is damped
/// toward zero rather than trustworthy.
#[derive(Debug, Clone, PartialEq)]
pub struct GHExtension<T: Real> {
    pub values: DVector<T>,
    pub support_mass: T,
}

/// Batch extension over many query points, one row per point.
#[derive(Debug, Clone, PartialEq)]
pub struct GHExtensionBatch<T: Real> {
    pub values: DMatrix<T>,
    pub support_mass: DVector<T>,
}

/// Fits a Geometric Harmonics model of `targets` as a function of `inputs`.
pub fn gh_fit<T: Real>(
    inputs: &DMatrix<T>,
    targets: &DMatrix<T>,
    bandwidth: T,
    delta: T,
) -> Result<GHModel<T>> {
    gh_fit_in(InputSpace::Ambient, inputs, targets, bandwidth, delta)
}

/// `gh_fit` with an explicit input-space tag.
pub fn gh_fit_in<T: Real>(
    input_space: InputSpace,
    inputs: &DMatrix<T>,
    targets: &DMatrix<T>,
    bandwidth: T,
    delta: T,
) -> Result<GHModel<T>> {
    let m = inputs.nrows();
    if m < 2 {
        return Err(Error::invalid_data("fit needs at least 2 input points"));
    }
    if targets.nrows() != m {
        return Err(Error::invalid_argument(format!(
            "targets have {} rows but inputs have {m}",
            targets.nrows()
        )));
    }
    if targets.ncols() == 0 {
        return Err(Error::invalid_argument("targets must have at least one column"));
    }
    if !(delta > T::zero() && delta.finite()) {
        return Err(Error::invalid_argument(format!(
            "delta must be positive, got {delta}"
        )));
    }
    for v in inputs.iter().chain(targets.iter()) {
        if !v.finite() {
            return Err(Error::invalid_data("inputs and targets must be finite"));
        }
    }

    let w = kernel::pairwise_affinity(inputs, bandwidth)?;
    let (values, mut vectors) = linalg::symmetric_eigen_desc(w)?;
    linalg::fix_column_signs(&mut vectors);

    let floor = real::<T>(SIGMA_FLOOR);
    let sigma1 = values[0];
    if !(sigma1 > floor) {
        return Err(Error::numeric(
            "leading affinity eigenvalue is not positive; inputs degenerate",
        ));
    }
    let cut = delta * sigma1;
    let mut retained = 0;
    for &s in values.iter() {
        if s > floor && s >= cut {
            retained += 1;
        } else {
            break;
        }
    }
    if retained == 0 {
        retained = 1;
    }

    let sigma = DVector::from_fn(retained, |i, _| values[i]);
    let psi = vectors.columns(0, retained).clone_owned();
    let coefficients = psi.transpose() * targets;

    Ok(GHModel {
        input_space,
        input_points: inputs.clone(),
        bandwidth,
        delta,
        sigma,
        psi,
        coefficients,
        underfit: retained == 1,
        input_hash: persist::matrix_hash(inputs),
    })
}

/// Fits the latent-input variant: inputs are the selected diffusion
/// coordinates of the training set. Pass `None` to take the bandwidth from
/// the median pairwise distance in latent space.
pub fn double_dmaps_fit<T: Real>(
    dmap: &DMapModel<T>,
    targets: &DMatrix<T>,
    bandwidth: Option<T>,
    delta: T,
) -> Result<GHModel<T>> {
    let latent = dmap.latent_training()?;
    let bw = match bandwidth {
        Some(b) => b,
        None => kernel::median_bandwidth(&latent, T::one())?,
    };
    gh_fit_in(InputSpace::Latent, &latent, targets, bw, delta)
}

impl<T: Real> GHModel<T> {
    pub fn len(&self) -> usize {
        self.input_points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.input_points.nrows() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.input_points.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.coefficients.ncols()
    }

    pub fn retained(&self) -> usize {
        self.sigma.len()
    }

    /// Evaluates the regression at one query point.
    pub fn extend(&self, x: &[T]) -> Result<GHExtension<T>> {
        if x.len() != self.input_dim() {
            return Err(Error::invalid_argument(format!(
                "query has dimension {}, model inputs have {}",
                x.len(),
                self.input_dim()
            )));
        }
        for &v in x {
            if !v.finite() {
                return Err(Error::invalid_data("query point must be finite"));
            }
        }
        let m = self.len();
        let mut w = DVector::zeros(m);
        let mut mass = T::zero();
        let mut row = Vec::with_capacity(self.input_dim());
        for i in 0..m {
            row.clear();
            for j in 0..self.input_dim() {
                row.push(self.input_points[(i, j)]);
            }
            let v = kernel::affinity(x, &row, self.bandwidth);
            w[i] = v;
            mass += v;
        }
        // Extended mode values Psi_alpha(x) = sigma_alpha^-1 <w, psi_alpha>.
        let mut modes = self.psi.transpose() * &w;
        for (a, v) in modes.iter_mut().enumerate() {
            *v /= self.sigma[a];
        }
        let values = self.coefficients.transpose() * modes;
        Ok(GHExtension {
            values,
            support_mass: mass,
        })
    }

    /// Evaluates the regression at each row of `xs`.
    pub fn extend_matrix(&self, xs: &DMatrix<T>) -> Result<GHExtensionBatch<T>> {
        let mut values = DMatrix::zeros(xs.nrows(), self.output_dim());
        let mut support_mass = DVector::zeros(xs.nrows());
        let mut buf = Vec::with_capacity(xs.ncols());
        for r in 0..xs.nrows() {
            buf.clear();
            for c in 0..xs.ncols() {
                buf.push(xs[(r, c)]);
            }
            let ext = self.extend(&buf)?;
            values.row_mut(r).copy_from(&ext.values.transpose());
            support_mass[r] = ext.support_mass;
        }
        Ok(GHExtensionBatch {
            values,
            support_mass,
        })
    }

    /// Reassembles a model from stored parts, revalidating shapes.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        input_space: InputSpace,
        input_points: DMatrix<T>,
        bandwidth: T,
        delta: T,
        sigma: DVector<T>,
        psi: DMatrix<T>,
        coefficients: DMatrix<T>,
        input_hash: String,
    ) -> Result<Self> {
        let m = input_points.nrows();
        let a = sigma.len();
        if psi.nrows() != m || psi.ncols() != a {
            return Err(Error::invalid_data(format!(
                "eigenvector block is {}x{}, expected {}x{}",
                psi.nrows(),
                psi.ncols(),
                m,
                a
            )));
        }
        if coefficients.nrows() != a {
            return Err(Error::invalid_data("coefficient rows must match retained modes"));
        }
        if a == 0 {
            return Err(Error::invalid_data("model must retain at least one mode"));
        }
        Ok(GHModel {
            input_space,
            input_points,
            bandwidth,
            delta,
            sigma,
            psi,
            coefficients,
            underfit: a == 1,
            input_hash,
        })
    }
}
