//! Parsimonious coordinate selection.
//!
//! Later diffusion-map eigenvectors often re-parametrize directions already
//! captured by earlier ones (higher harmonics). The residual r_k measures how
//! well phi_k is predicted from the preceding non-trivial coordinates by
//! leave-one-out local linear regression: harmonics fit well (small r_k),
//! genuinely new directions do not (large r_k). Selecting the large-r_k
//! coordinates yields a minimal set, one per intrinsic direction.

use nalgebra::{DMatrix, DVector};

use crate::dmaps::DMapModel;
use crate::error::{Error, Result};
use crate::kernel;
use crate::linalg;
use crate::scalar::{real, Real};

/// Relative singular-value cutoff for the local weighted least-squares fits;
/// collinear neighborhoods fall back to the minimum-norm solution instead of
/// aborting the scan.
pub const LOCAL_FIT_SV_CUTOFF: f64 = 1e-10;

/// Default bandwidth factor for the regression kernel: epsilon_reg is this
/// fraction of the median pairwise distance among the regressor coordinates.
pub fn default_bandwidth_factor<T: Real>() -> T {
    real::<T>(1.0 / 3.0)
}

/// Residuals r_k for k = 2..=k_max and the selection applied to them.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport<T: Real> {
    /// 1-based coordinate indices, 2..=k_max.
    pub k: Vec<usize>,
    /// r_k aligned with `k`; r_2 is 1 by definition.
    pub r: Vec<T>,
    /// Selected coordinate indices in ascending order; empty until a rule is
    /// applied.
    pub selected: Vec<usize>,
    /// Effective threshold of the applied rule: the rule's own threshold, or
    /// the smallest selected residual for the count-based rules.
    pub threshold_used: Option<T>,
}

impl<T: Real> ResidualReport<T> {
    /// Residual of coordinate `k` (1-based, k >= 2).
    pub fn residual(&self, k: usize) -> Option<T> {
        self.k.iter().position(|&x| x == k).map(|i| self.r[i])
    }
}

/// How to turn a residual table into a coordinate selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionRule<T> {
    /// The m coordinates with the largest residuals.
    TopM(usize),
    /// All coordinates with residual >= the given value.
    Threshold(T),
    /// TopM with m set by the largest gap in the descending sorted residuals,
    /// measured relative to the dominant residual.
    LargestGap,
}

/// Residuals for the coordinate columns of a matrix whose column `j` holds
/// the 1-based coordinate `j + 1` (so column 0 is the trivial constant
/// coordinate, never regressed).
pub fn residuals_of_coordinates<T: Real>(
    coordinates: &DMatrix<T>,
    k_max: usize,
    bandwidth_factor: T,
) -> Result<ResidualReport<T>> {
    let n = coordinates.nrows();
    if k_max < 3 {
        return Err(Error::invalid_argument(
            "k_max must be at least 3: the first non-trivial residual is defined as 1 \
             and needs at least one successor to compare against",
        ));
    }
    if k_max > coordinates.ncols() {
        return Err(Error::invalid_argument(format!(
            "k_max {} exceeds the {} computed coordinates",
            k_max,
            coordinates.ncols()
        )));
    }
    if n < 3 {
        return Err(Error::invalid_data(
            "leave-one-out regression needs at least 3 points",
        ));
    }

    let mut ks = Vec::with_capacity(k_max - 1);
    let mut rs = Vec::with_capacity(k_max - 1);
    ks.push(2);
    rs.push(T::one());

    for k in 3..=k_max {
        // Regressors: phi_2 .. phi_{k-1}, i.e. 0-based columns 1..k-1.
        let m = k - 2;
        let mut phi_prev = DMatrix::zeros(n, m);
        for c in 0..m {
            phi_prev.column_mut(c).copy_from(&coordinates.column(c + 1));
        }
        let y = coordinates.column(k - 1).clone_owned();
        let eps_reg = kernel::median_bandwidth(&phi_prev, bandwidth_factor)?;
        let r = loo_residual(&phi_prev, &y, eps_reg)?;
        ks.push(k);
        rs.push(r);
    }

    Ok(ResidualReport {
        k: ks,
        r: rs,
        selected: Vec::new(),
        threshold_used: None,
    })
}

/// Residuals for a fitted diffusion map, regressing each retained coordinate
/// on its predecessors.
pub fn residuals<T: Real>(
    model: &DMapModel<T>,
    k_max: usize,
    bandwidth_factor: T,
) -> Result<ResidualReport<T>> {
    if k_max > model.n_pairs() {
        return Err(Error::invalid_argument(format!(
            "k_max {} exceeds the {} retained eigenpairs",
            k_max,
            model.n_pairs()
        )));
    }
    residuals_of_coordinates(&model.eigenvectors, k_max, bandwidth_factor)
}

/// Leave-one-out local linear regression residual of `y` on the rows of `x`.
fn loo_residual<T: Real>(x: &DMatrix<T>, y: &DVector<T>, eps_reg: T) -> Result<T> {
    let n = x.nrows();
    let m = x.ncols();
    let inv_eps_sq = T::one() / (eps_reg * eps_reg);
    let mut num = T::zero();
    let mut den = T::zero();
    let mut a = DMatrix::zeros(n - 1, m + 1);
    let mut b = DVector::zeros(n - 1);
    for i in 0..n {
        let mut row = 0;
        for j in 0..n {
            if j == i {
                continue;
            }
            let mut sq = T::zero();
            for c in 0..m {
                let d = x[(i, c)] - x[(j, c)];
                sq += d * d;
            }
            let w = (-(sq * inv_eps_sq)).exp();
            let sw = w.sqrt();
            a[(row, 0)] = sw;
            for c in 0..m {
                a[(row, c + 1)] = sw * (x[(j, c)] - x[(i, c)]);
            }
            b[row] = sw * y[j];
            row += 1;
        }
        let (coef, _, _) =
            linalg::svd_least_squares(&a, &b, real::<T>(LOCAL_FIT_SV_CUTOFF))?;
        // The design is centered at point i, so the intercept is the
        // prediction there.
        let resid = y[i] - coef[0];
        num += resid * resid;
        den += y[i] * y[i];
    }
    if !(den > T::zero()) {
        return Err(Error::degenerate(
            "regression target is identically zero; residual undefined",
        ));
    }
    Ok((num / den).sqrt())
}

/// Applies a selection rule to a residual table, returning the chosen
/// coordinate indices in ascending order.
pub fn select_coordinates<T: Real>(
    report: &ResidualReport<T>,
    rule: &SelectionRule<T>,
) -> Result<Vec<usize>> {
    let count = report.r.len();
    match *rule {
        SelectionRule::TopM(m) => {
            if m == 0 || m > count {
                return Err(Error::invalid_argument(format!(
                    "top_m must lie in [1, {count}], got {m}"
                )));
            }
            // Order descending by residual, ties toward the earlier index.
            let mut order: Vec<usize> = (0..count).collect();
            order.sort_by(|&a, &b| {
                report.r[b]
                    .partial_cmp(&report.r[a])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(report.k[a].cmp(&report.k[b]))
            });
            let mut chosen: Vec<usize> = order[..m].iter().map(|&i| report.k[i]).collect();
            chosen.sort_unstable();
            Ok(chosen)
        }
        SelectionRule::Threshold(t) => Ok(report
            .k
            .iter()
            .zip(report.r.iter())
            .filter(|(_, &r)| r >= t)
            .map(|(&k, _)| k)
            .collect()),
        SelectionRule::LargestGap => {
            if count < 2 {
                return Err(Error::invalid_argument(
                    "gap rule needs at least 2 residuals",
                ));
            }
            let mut sorted: Vec<T> = report.r.clone();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
            // Score each break by the drop across it, measured against the
            // dominant residual. A ratio would let two noise-level residuals
            // near zero fake an enormous gap at the bottom of the table.
            let scale = sorted[0];
            if scale <= T::zero() {
                return select_coordinates(report, &SelectionRule::TopM(1));
            }
            let mut best_m = 1;
            let mut best_drop = T::zero();
            for i in 0..count - 1 {
                let drop = (sorted[i] - sorted[i + 1]) / scale;
                if drop > best_drop {
                    best_drop = drop;
                    best_m = i + 1;
                }
            }
            select_coordinates(report, &SelectionRule::TopM(best_m))
        }
    }
}

/// Applies a rule and stamps the report with the resulting selection and its
/// effective threshold.
pub fn apply_selection<T: Real>(
    report: &mut ResidualReport<T>,
    rule: &SelectionRule<T>,
) -> Result<Vec<usize>> {
    let chosen = select_coordinates(report, rule)?;
    report.threshold_used = Some(match *rule {
        SelectionRule::Threshold(t) => t,
        _ => chosen
            .iter()
            .filter_map(|&k| report.residual(k))
            .fold(T::max_value().unwrap_or_else(T::one), |acc, r| acc.min(r)),
    });
    report.selected = chosen.clone();
    Ok(chosen)
}
