//! POD basis construction and gappy (masked) reconstruction.
//!
//! Snapshots enter as rows; the SVD runs on their transpose, so basis
//! vectors live in state space (one mode per column). A partially observed
//! vector is completed by least-squares fitting the basis to its known
//! entries and evaluating the fitted combination everywhere.
//!
//! The normal-equations matrix `A = (m (*) U)^T (m (*) U)` of the masked
//! basis governs how well a mask determines the coefficients; its condition
//! number is reported with every reconstruction, but the solve itself runs
//! on the masked basis directly (singular values of A are the squares, so
//! squaring the system would needlessly lose precision).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::{real, Real};

/// Relative singular-value cutoff for the masked least-squares solve,
/// applied to the masked basis. Equivalent to 1e-12 on the spectrum of the
/// normal-equations matrix.
pub const MASKED_SOLVE_SV_CUTOFF: f64 = 1e-6;

/// Singular values below `sigma_1` times this count as zero when deciding
/// the achievable basis rank.
pub const RANK_FLOOR: f64 = 1e-14;

/// How to choose the number of retained POD modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation<T> {
    /// Smallest rank whose cumulative energy reaches the given percentage.
    EnergyPercent(T),
    /// Exactly this many modes.
    Rank(usize),
    /// Smallest rank whose relative Frobenius reconstruction error of the
    /// training matrix falls to or below the given percentage.
    ReconstructionErrorPercent(T),
}

/// Options for the basis fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PodOptions {
    /// Subtract the mean snapshot before the SVD; the mean is stored and
    /// restored on reconstruction.
    pub center: bool,
    /// Scale each state entry to unit standard deviation before the SVD;
    /// undone on reconstruction. For states mixing disparate units.
    pub standardize: bool,
    /// Measure energy with squared singular values instead of raw ones.
    /// Affects the energy truncation rule and the reported capture.
    pub squared_energy: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PODBasis<T: Real> {
    /// Truncated basis, one orthonormal mode per column (d x rank).
    pub u: DMatrix<T>,
    /// The full singular-value spectrum, not just the retained part.
    pub singular_values: DVector<T>,
    pub rank: usize,
    /// Cumulative energy percentage of the retained modes, under the energy
    /// convention the fit used.
    pub energy_captured: T,
    pub centered: bool,
    /// Mean snapshot, present exactly when `centered`.
    pub mean: Option<DVector<T>>,
    /// Per-entry scale, present exactly when standardization was on.
    pub scale: Option<DVector<T>>,
    pub squared_energy: bool,
}

/// A set of observed state indices (0-based, sorted, unique).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationMask {
    indices: Vec<usize>,
    dim: usize,
}

impl ObservationMask {
    pub fn new(mut indices: Vec<usize>, dim: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid_argument("mask must contain at least one index"));
        }
        indices.sort_unstable();
        let before = indices.len();
        indices.dedup();
        if indices.len() != before {
            return Err(Error::invalid_argument("mask indices must be unique"));
        }
        if *indices.last().unwrap() >= dim {
            return Err(Error::invalid_argument(format!(
                "mask index {} out of range for dimension {dim}",
                indices.last().unwrap()
            )));
        }
        Ok(ObservationMask { indices, dim })
    }

    /// Builds a mask from 1-based indices, the convention used in files and
    /// on the command line.
    pub fn from_one_based(indices: &[usize], dim: usize) -> Result<Self> {
        let mut shifted = Vec::with_capacity(indices.len());
        for &i in indices {
            if i == 0 {
                return Err(Error::invalid_argument(
                    "mask indices are 1-based; 0 is not a valid entry",
                ));
            }
            shifted.push(i - 1);
        }
        ObservationMask::new(shifted, dim)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.indices.iter().map(|&i| i + 1).collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// The 0/1 masking vector.
    pub fn masking_vector<T: Real>(&self) -> DVector<T> {
        let mut m = DVector::zeros(self.dim);
        for &i in &self.indices {
            m[i] = T::one();
        }
        m
    }
}

/// Reconstruction of a partially observed vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GappyResult<T: Real> {
    pub x_rec: DVector<T>,
    pub coefficients: DVector<T>,
    /// cond of the normal-equations matrix of the masked basis; infinite
    /// when the mask cannot determine all coefficients.
    pub condition_number: T,
    /// Euclidean norm of (x_rec - x_partial) over the known entries.
    pub residual_on_known: T,
    /// True when fewer knowns than basis modes forced a minimum-norm
    /// solution; the reconstruction is then one of many consistent answers.
    pub underdetermined: bool,
}

/// Cumulative energy percentage of the first `i` (1-based) singular values.
pub fn energy_fraction<T: Real>(singular_values: &DVector<T>, i: usize) -> Result<T> {
    energy_fraction_impl(singular_values, i, false)
}

/// `energy_fraction` with squared singular values.
pub fn energy_fraction_squared<T: Real>(singular_values: &DVector<T>, i: usize) -> Result<T> {
    energy_fraction_impl(singular_values, i, true)
}

fn energy_fraction_impl<T: Real>(sv: &DVector<T>, i: usize, squared: bool) -> Result<T> {
    let m = sv.len();
    if m == 0 {
        return Err(Error::invalid_argument("empty singular value spectrum"));
    }
    if i < 1 || i > m {
        return Err(Error::invalid_argument(format!(
            "index {i} outside [1, {m}]"
        )));
    }
    let term = |s: T| if squared { s * s } else { s };
    let mut head = T::zero();
    let mut total = T::zero();
    for (j, &s) in sv.iter().enumerate() {
        let t = term(s);
        total += t;
        if j < i {
            head += t;
        }
    }
    if !(total > T::zero()) {
        return Err(Error::degenerate("all singular values are zero"));
    }
    Ok(head / total * real::<T>(100.0))
}

/// Fits a POD basis to the snapshots (one per row) with default options.
pub fn pod_fit<T: Real>(snapshots: &DMatrix<T>, truncation: Truncation<T>) -> Result<PODBasis<T>> {
    pod_fit_with(snapshots, truncation, &PodOptions::default())
}

/// Fits a POD basis with explicit options.
pub fn pod_fit_with<T: Real>(
    snapshots: &DMatrix<T>,
    truncation: Truncation<T>,
    options: &PodOptions,
) -> Result<PODBasis<T>> {
    let n = snapshots.nrows();
    let d = snapshots.ncols();
    if n < 1 || d < 1 {
        return Err(Error::invalid_data("snapshot matrix must be non-empty"));
    }
    for v in snapshots.iter() {
        if !v.finite() {
            return Err(Error::invalid_data("snapshots must be finite"));
        }
    }

    // Work on the transpose: states down the columns.
    let mut xbar = snapshots.transpose();
    let mean = if options.center {
        let mut mean = DVector::zeros(d);
        for j in 0..n {
            mean += xbar.column(j);
        }
        mean /= real::<T>(n as f64);
        for j in 0..n {
            let mut col = xbar.column_mut(j);
            col -= &mean;
        }
        Some(mean)
    } else {
        None
    };
    let scale = if options.standardize {
        let mut scale = DVector::zeros(d);
        for i in 0..d {
            let row_mean = xbar.row(i).mean();
            let mut var = T::zero();
            for j in 0..n {
                let dv = xbar[(i, j)] - row_mean;
                var += dv * dv;
            }
            var /= real::<T>(n as f64);
            let sd = var.sqrt();
            if !(sd > T::zero()) {
                return Err(Error::degenerate(format!(
                    "state entry {} is constant; cannot standardize",
                    i + 1
                )));
            }
            scale[i] = sd;
        }
        for i in 0..d {
            for j in 0..n {
                xbar[(i, j)] /= scale[i];
            }
        }
        Some(scale)
    } else {
        None
    };

    let svd = xbar.clone().svd(true, false);
    let u_full = svd.u.expect("svd requested u");
    let mut sv: Vec<T> = svd.singular_values.iter().copied().collect();
    // nalgebra returns the spectrum unordered in rare ties; enforce the
    // non-increasing invariant and keep U columns aligned.
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap_or(std::cmp::Ordering::Equal));
    let sv_sorted: Vec<T> = order.iter().map(|&i| sv[i]).collect();
    sv = sv_sorted;
    let singular_values = DVector::from_vec(sv);

    let max_rank = {
        let floor = singular_values[0] * real::<T>(RANK_FLOOR);
        singular_values.iter().filter(|&&s| s > floor).count()
    };
    if max_rank == 0 {
        return Err(Error::degenerate("snapshot matrix is numerically zero"));
    }

    let rank = match truncation {
        Truncation::Rank(r) => {
            if r < 1 || r > singular_values.len() {
                return Err(Error::invalid_argument(format!(
                    "rank must lie in [1, {}], got {r}",
                    singular_values.len()
                )));
            }
            if r > max_rank {
                return Err(Error::degenerate(format!(
                    "requested rank {r} exceeds the data's numerical rank; achievable maximum is {max_rank}"
                )));
            }
            r
        }
        Truncation::EnergyPercent(target) => {
            if !(target > T::zero() && target <= real::<T>(100.0)) {
                return Err(Error::invalid_argument(format!(
                    "energy target must lie in (0, 100], got {target}"
                )));
            }
            let mut rank = singular_values.len();
            for i in 1..=singular_values.len() {
                let e = energy_fraction_impl(&singular_values, i, options.squared_energy)?;
                if e >= target {
                    rank = i;
                    break;
                }
            }
            if rank > max_rank {
                return Err(Error::degenerate(format!(
                    "energy target {target} needs rank {rank} but the data's numerical rank is {max_rank}"
                )));
            }
            rank
        }
        Truncation::ReconstructionErrorPercent(target) => {
            if !(target > T::zero()) {
                return Err(Error::invalid_argument(format!(
                    "reconstruction error target must be positive, got {target}"
                )));
            }
            // Relative Frobenius error at rank r is the norm of the dropped
            // tail over the norm of the full spectrum.
            let total_sq: T = singular_values.iter().map(|&s| s * s).fold(T::zero(), |a, b| a + b);
            let mut rank = singular_values.len();
            let mut tail = total_sq;
            for r in 1..=singular_values.len() {
                tail -= singular_values[r - 1] * singular_values[r - 1];
                let err = (tail.max(T::zero()) / total_sq).sqrt() * real::<T>(100.0);
                if err <= target {
                    rank = r;
                    break;
                }
            }
            rank.min(max_rank)
        }
    };

    // Re-apply the sorted order to the retained columns.
    let mut u_sorted = DMatrix::zeros(u_full.nrows(), rank);
    for (c, &src) in order.iter().take(rank).enumerate() {
        u_sorted.column_mut(c).copy_from(&u_full.column(src));
    }
    let energy_captured = energy_fraction_impl(&singular_values, rank, options.squared_energy)?;

    Ok(PODBasis {
        u: u_sorted,
        singular_values,
        rank,
        energy_captured,
        centered: options.center,
        mean,
        scale,
        squared_energy: options.squared_energy,
    })
}

impl<T: Real> PODBasis<T> {
    pub fn state_dim(&self) -> usize {
        self.u.nrows()
    }

    /// Reassembles a basis from stored parts, revalidating shapes.
    pub fn from_parts(
        u: DMatrix<T>,
        singular_values: DVector<T>,
        energy_captured: T,
        mean: Option<DVector<T>>,
        scale: Option<DVector<T>>,
        squared_energy: bool,
    ) -> Result<Self> {
        let rank = u.ncols();
        if rank == 0 {
            return Err(Error::invalid_data("basis must retain at least one mode"));
        }
        if singular_values.len() < rank {
            return Err(Error::invalid_data(
                "spectrum shorter than the retained rank",
            ));
        }
        if let Some(m) = &mean {
            if m.len() != u.nrows() {
                return Err(Error::invalid_data("mean length mismatch"));
            }
        }
        if let Some(s) = &scale {
            if s.len() != u.nrows() {
                return Err(Error::invalid_data("scale length mismatch"));
            }
        }
        Ok(PODBasis {
            u,
            singular_values,
            rank,
            energy_captured,
            centered: mean.is_some(),
            mean,
            scale,
            squared_energy,
        })
    }

    /// Projects a full vector onto the basis and back: the best rank-limited
    /// representation of `x`.
    pub fn project(&self, x: &DVector<T>) -> Result<DVector<T>> {
        if x.len() != self.state_dim() {
            return Err(Error::invalid_argument("vector length mismatch"));
        }
        let z = self.to_basis_space(x);
        let c = self.u.transpose() * &z;
        let rec = &self.u * c;
        Ok(self.from_basis_space(&rec))
    }

    fn to_basis_space(&self, x: &DVector<T>) -> DVector<T> {
        let mut z = x.clone();
        if let Some(mean) = &self.mean {
            z -= mean;
        }
        if let Some(scale) = &self.scale {
            for i in 0..z.len() {
                z[i] /= scale[i];
            }
        }
        z
    }

    fn from_basis_space(&self, z: &DVector<T>) -> DVector<T> {
        let mut x = z.clone();
        if let Some(scale) = &self.scale {
            for i in 0..x.len() {
                x[i] *= scale[i];
            }
        }
        if let Some(mean) = &self.mean {
            x += mean;
        }
        x
    }
}

/// Condition number of the normal-equations matrix for this mask, without
/// solving anything.
pub fn mask_diagnostics<T: Real>(basis: &PODBasis<T>, mask: &ObservationMask) -> Result<T> {
    let m = masked_rows(basis, mask)?;
    let svd = m.svd(false, false);
    let sv = &svd.singular_values;
    let sigma_max = sv.iter().fold(T::zero(), |a, &s| if s > a { s } else { a });
    if !(sigma_max > T::zero()) {
        return Err(Error::IllPosed(
            "every basis mode vanishes on the masked entries".into(),
        ));
    }
    let mut sigma_min = sigma_max;
    for &s in sv.iter() {
        if s < sigma_min {
            sigma_min = s;
        }
    }
    if mask.len() < basis.rank || !(sigma_min > T::zero()) {
        return Ok(T::from_f64(f64::INFINITY).expect("infinity representable"));
    }
    let ratio = sigma_max / sigma_min;
    Ok(ratio * ratio)
}

fn masked_rows<T: Real>(basis: &PODBasis<T>, mask: &ObservationMask) -> Result<DMatrix<T>> {
    if mask.dim() != basis.state_dim() {
        return Err(Error::invalid_argument(format!(
            "mask is over dimension {}, basis over {}",
            mask.dim(),
            basis.state_dim()
        )));
    }
    let mut m = DMatrix::zeros(mask.len(), basis.rank);
    for (r, &i) in mask.indices().iter().enumerate() {
        m.row_mut(r).copy_from(&basis.u.row(i));
    }
    Ok(m)
}

/// Completes a partially observed vector. Entries of `x_partial` outside the
/// mask are ignored entirely.
pub fn gappy_reconstruct<T: Real>(
    basis: &PODBasis<T>,
    mask: &ObservationMask,
    x_partial: &DVector<T>,
) -> Result<GappyResult<T>> {
    if x_partial.len() != basis.state_dim() {
        return Err(Error::invalid_argument(format!(
            "observation vector has length {}, state dimension is {}",
            x_partial.len(),
            basis.state_dim()
        )));
    }
    for &i in mask.indices() {
        if !x_partial[i].finite() {
            return Err(Error::invalid_data(format!(
                "known entry {} is not finite",
                i + 1
            )));
        }
    }
    let m = masked_rows(basis, mask)?;
    let z_partial = basis.to_basis_space(x_partial);
    let b = DVector::from_fn(mask.len(), |r, _| z_partial[mask.indices()[r]]);

    let (c, sigma_max, sigma_min) =
        linalg::svd_least_squares(&m, &b, real::<T>(MASKED_SOLVE_SV_CUTOFF))?;
    if !(sigma_max > T::zero()) {
        return Err(Error::IllPosed(
            "every basis mode vanishes on the masked entries".into(),
        ));
    }
    let cutoff = sigma_max * real::<T>(MASKED_SOLVE_SV_CUTOFF);
    let deficient = mask.len() < basis.rank || !(sigma_min > cutoff);
    let condition_number = if mask.len() < basis.rank || !(sigma_min > T::zero()) {
        T::from_f64(f64::INFINITY).expect("infinity representable")
    } else {
        let ratio = sigma_max / sigma_min;
        ratio * ratio
    };

    let z_rec = &basis.u * &c;
    let x_rec = basis.from_basis_space(&z_rec);
    let mut resid = T::zero();
    for &i in mask.indices() {
        let d = x_rec[i] - x_partial[i];
        resid += d * d;
    }

    Ok(GappyResult {
        x_rec,
        coefficients: c,
        condition_number,
        residual_on_known: resid.sqrt(),
        underdetermined: deficient,
    })
}
