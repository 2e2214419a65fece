//! Diffusion maps: spectral embedding of a snapshot set and Nystrom
//! out-of-sample extension.
//!
//! The Markov matrix `K = D^-1 W~` shares its spectrum with the symmetric
//! `A = D^-1/2 W~ D^-1/2`, so the fit eigendecomposes `A` (numerically
//! symmetric by construction) and maps eigenvectors back through `D^-1/2`.
//! Since the Gaussian affinity is positive definite, the spectrum lies in
//! [0, 1] with the trivial pair `lambda_1 = 1`, `phi_1` constant.
//!
//! A new point enters the embedding through the Nystrom formula
//! `phi_j(x) = lambda_j^-1 sum_i k~(x, x_i) phi_j(x_i)`, where `k~(x, .)` is
//! the kernel row of `x` against the training set with the same density and
//! row normalizations the fit used.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::{self, KernelConfig};
use crate::linalg;
use crate::persist;
use crate::scalar::{real, Real};

/// Eigenvalues with magnitude below this make a coordinate non-extendable.
pub const EXTENSION_LAMBDA_CUTOFF: f64 = 1e-12;

/// Kernel mass below this means the query point is outside the data support.
pub const SUPPORT_CUTOFF: f64 = 1e-300;

/// Default number of retained eigenpairs for a training set of size `n`.
pub fn default_n_pairs(n: usize) -> usize {
    n.min(20)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DMapModel<T: Real> {
    pub kernel_config: KernelConfig<T>,
    /// Training snapshots, one per row; the extension kernel is evaluated
    /// against these.
    pub training: DMatrix<T>,
    /// Retained eigenvalues, descending; the first is 1 up to roundoff.
    pub eigenvalues: DVector<T>,
    /// Unit-norm right eigenvectors of K, one per column, sign-fixed so each
    /// column's largest-magnitude entry is positive.
    pub eigenvectors: DMatrix<T>,
    /// Row masses P_ii of the raw affinity (ones when density normalization
    /// is off); the extension reuses them.
    pub row_density: DVector<T>,
    /// 1-based indices of the parsimoniously selected coordinates (the
    /// trivial constant coordinate is index 1 and never selected). Empty
    /// until a selection is applied.
    pub selected: Vec<usize>,
    /// Hash of the training matrix, for cross-model consistency checks.
    pub training_hash: String,
}

/// Fits the diffusion map of `training`, retaining the top `n_pairs`
/// eigenpairs.
pub fn fit<T: Real>(
    training: &DMatrix<T>,
    kernel_config: &KernelConfig<T>,
    n_pairs: usize,
) -> Result<DMapModel<T>> {
    let n = training.nrows();
    if n < 2 {
        return Err(Error::invalid_data("diffusion map needs at least 2 snapshots"));
    }
    if n_pairs < 2 || n_pairs > n {
        return Err(Error::invalid_argument(format!(
            "n_pairs must lie in [2, {n}], got {n_pairs}"
        )));
    }

    let w = kernel::pairwise_affinity(training, kernel_config.epsilon)?;
    let (wt, p) = if kernel_config.density_normalize {
        kernel::density_normalize(&w)?
    } else {
        (w.clone(), DVector::from_element(n, T::one()))
    };
    let (_, d) = kernel::markov_normalize(&wt)?;

    // A = D^-1/2 W~ D^-1/2, assembled entrywise from the bitwise-symmetric
    // W~ so A is bitwise symmetric too.
    let s: Vec<T> = d.iter().map(|&v| v.sqrt()).collect();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = wt[(i, j)] / (s[i] * s[j]);
        }
    }
    let (values, q) = linalg::symmetric_eigen_desc(a)?;

    let mut eigenvalues = DVector::zeros(n_pairs);
    let mut eigenvectors = DMatrix::zeros(n, n_pairs);
    for k in 0..n_pairs {
        eigenvalues[k] = values[k];
        let mut col = eigenvectors.column_mut(k);
        for i in 0..n {
            col[i] = q[(i, k)] / s[i];
        }
        let norm = col.norm();
        if !(norm > T::zero()) {
            return Err(Error::numeric(format!("eigenvector {} has zero norm", k + 1)));
        }
        col /= norm;
    }
    linalg::fix_column_signs(&mut eigenvectors);

    Ok(DMapModel {
        kernel_config: *kernel_config,
        training: training.clone(),
        eigenvalues,
        eigenvectors,
        row_density: p,
        selected: Vec::new(),
        training_hash: persist::matrix_hash(training),
    })
}

impl<T: Real> DMapModel<T> {
    /// Reassembles a model from stored parts, revalidating shapes.
    pub fn from_parts(
        kernel_config: KernelConfig<T>,
        training: DMatrix<T>,
        eigenvalues: DVector<T>,
        eigenvectors: DMatrix<T>,
        row_density: DVector<T>,
        selected: Vec<usize>,
        training_hash: String,
    ) -> Result<Self> {
        let n = training.nrows();
        let k = eigenvalues.len();
        if eigenvectors.nrows() != n || eigenvectors.ncols() != k {
            return Err(Error::invalid_data(format!(
                "eigenvector block is {}x{}, expected {}x{}",
                eigenvectors.nrows(),
                eigenvectors.ncols(),
                n,
                k
            )));
        }
        if row_density.len() != n {
            return Err(Error::invalid_data("row density length mismatch"));
        }
        let model = DMapModel {
            kernel_config,
            training,
            eigenvalues,
            eigenvectors,
            row_density,
            selected: Vec::new(),
            training_hash,
        };
        let mut model = model;
        if !selected.is_empty() {
            model.set_selected(selected)?;
        }
        Ok(model)
    }

    pub fn len(&self) -> usize {
        self.training.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.training.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.training.ncols()
    }

    pub fn n_pairs(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Applies a coordinate selection (1-based indices into the eigenpairs;
    /// the trivial coordinate 1 is not selectable).
    pub fn set_selected(&mut self, mut selected: Vec<usize>) -> Result<()> {
        selected.sort_unstable();
        selected.dedup();
        for &k in &selected {
            if k < 2 || k > self.n_pairs() {
                return Err(Error::invalid_argument(format!(
                    "selected coordinate {k} outside [2, {}]",
                    self.n_pairs()
                )));
            }
        }
        if selected.is_empty() {
            return Err(Error::invalid_argument("selection must not be empty"));
        }
        self.selected = selected;
        Ok(())
    }

    /// Latent coordinates of the training points: the selected eigenvector
    /// columns, in index order.
    pub fn latent_training(&self) -> Result<DMatrix<T>> {
        if self.selected.is_empty() {
            return Err(Error::invalid_argument(
                "no coordinates selected; run a selection first",
            ));
        }
        let mut out = DMatrix::zeros(self.len(), self.selected.len());
        for (c, &k) in self.selected.iter().enumerate() {
            out.column_mut(c).copy_from(&self.eigenvectors.column(k - 1));
        }
        Ok(out)
    }

    /// Normalized extension kernel row of `x` against the training set.
    fn extension_row(&self, x: &[T]) -> Result<DVector<T>> {
        let n = self.len();
        if x.len() != self.dim() {
            return Err(Error::invalid_argument(format!(
                "query point has dimension {}, training data has {}",
                x.len(),
                self.dim()
            )));
        }
        let eps = self.kernel_config.epsilon;
        let mut w = DVector::zeros(n);
        let mut p_new = T::zero();
        let mut row = Vec::with_capacity(self.dim());
        for i in 0..n {
            row.clear();
            for j in 0..self.dim() {
                row.push(self.training[(i, j)]);
            }
            let v = kernel::affinity(x, &row, eps);
            w[i] = v;
            p_new += v;
        }
        if p_new < real::<T>(SUPPORT_CUTOFF) {
            return Err(Error::OutOfSupport(format!(
                "query point carries kernel mass {p_new:e} against the training set"
            )));
        }
        let mut sum = T::zero();
        if self.kernel_config.density_normalize {
            for i in 0..n {
                w[i] /= p_new * self.row_density[i];
                sum += w[i];
            }
        } else {
            sum = p_new;
        }
        if !(sum > T::zero()) {
            return Err(Error::OutOfSupport(
                "normalized kernel row has zero mass".into(),
            ));
        }
        w /= sum;
        Ok(w)
    }

    /// Nystrom extension of all retained coordinates at `x`.
    pub fn nystrom_extend(&self, x: &[T]) -> Result<DVector<T>> {
        let coords: Vec<usize> = (1..=self.n_pairs()).collect();
        self.nystrom_extend_coords(x, &coords)
    }

    /// Nystrom extension of specific coordinates (1-based) at `x`.
    pub fn nystrom_extend_coords(&self, x: &[T], coords: &[usize]) -> Result<DVector<T>> {
        let cutoff = real::<T>(EXTENSION_LAMBDA_CUTOFF);
        for &k in coords {
            if k < 1 || k > self.n_pairs() {
                return Err(Error::invalid_argument(format!(
                    "coordinate {k} outside [1, {}]",
                    self.n_pairs()
                )));
            }
            let lam = self.eigenvalues[k - 1];
            if lam.abs() < cutoff {
                return Err(Error::IllPosedExtension {
                    index: k,
                    magnitude: lam.abs().to_f64().unwrap_or(0.0),
                });
            }
        }
        let row = self.extension_row(x)?;
        let mut out = DVector::zeros(coords.len());
        for (c, &k) in coords.iter().enumerate() {
            let lam = self.eigenvalues[k - 1];
            out[c] = row.dot(&self.eigenvectors.column(k - 1)) / lam;
        }
        Ok(out)
    }

    /// Nystrom extension of the selected coordinates at `x`.
    pub fn latent_coordinates(&self, x: &[T]) -> Result<DVector<T>> {
        if self.selected.is_empty() {
            return Err(Error::invalid_argument(
                "no coordinates selected; run a selection first",
            ));
        }
        self.nystrom_extend_coords(x, &self.selected.clone())
    }

    /// Row-by-row extension of a matrix of query points.
    pub fn nystrom_extend_matrix(&self, xs: &DMatrix<T>, coords: &[usize]) -> Result<DMatrix<T>> {
        let mut out = DMatrix::zeros(xs.nrows(), coords.len());
        let mut buf = Vec::with_capacity(xs.ncols());
        for r in 0..xs.nrows() {
            buf.clear();
            for c in 0..xs.ncols() {
                buf.push(xs[(r, c)]);
            }
            let v = self.nystrom_extend_coords(&buf, coords)?;
            out.row_mut(r).copy_from(&v.transpose());
        }
        Ok(out)
    }

    /// Largest eigen-residual `||K phi - lambda phi||_2` over retained pairs,
    /// rebuilding the Markov matrix from the stored training data.
    pub fn eigen_residual_max(&self) -> Result<T> {
        let op = kernel::markov_operator(&self.training, &self.kernel_config)?;
        let mut worst = T::zero();
        for k in 0..self.n_pairs() {
            let phi = self.eigenvectors.column(k);
            let r = &op.kernel * phi - phi * self.eigenvalues[k];
            let norm = r.norm();
            if norm > worst {
                worst = norm;
            }
        }
        Ok(worst)
    }
}
