//! End-to-end prediction pipelines and their error metrics.
//!
//! A fitted pipeline bundles the diffusion map with the Geometric Harmonics
//! regressions between the three spaces in play: parameters, latent
//! (selected diffusion coordinates), and ambient state. Four prediction
//! routes compose them:
//!
//! * parameters -> latent -> ambient state
//! * ambient state -> latent (Nystrom) -> parameters
//! * partial observations -> latent -> parameters
//! * partial observations -> latent -> ambient -> another set of entries
//!
//! Every route reports its latent intermediate so predictions can be
//! audited against a direct Nystrom embedding of the true state.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dmaps::{self, DMapModel};
use crate::error::{Error, Result};
use crate::gappy_pod::{gappy_reconstruct, mask_diagnostics, ObservationMask, PODBasis};
use crate::harmonics::{self, GHModel, InputSpace};
use crate::kernel::{self, KernelConfig};
use crate::parsimony::{self, ResidualReport, SelectionRule};
use crate::persist;
use crate::scalar::{real, Real};

/// Denominators smaller than this make a relative error undefined.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-300;

/// Minimum observation count that provably suffices to embed an n-dimensional
/// manifold: 2n + 1.
pub fn whitney_min_observations(n_latent: usize) -> usize {
    2 * n_latent + 1
}

/// Which value sits in the denominator of a percent relative error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorConvention {
    /// (predicted - actual) / predicted * 100.
    #[default]
    PredictedDenominator,
    /// (predicted - actual) / actual * 100.
    ActualDenominator,
}

/// Elementwise percent errors; entries whose denominator vanishes are
/// undefined and excluded from the mean.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeError<T: Real> {
    pub percent: Vec<Option<T>>,
    /// Mean of |percent| over the defined entries; None when none are.
    pub mean_abs: Option<T>,
    pub defined: usize,
}

/// Percent relative error with the predicted value in the denominator.
pub fn relative_error<T: Real>(predicted: &DVector<T>, actual: &DVector<T>) -> Result<RelativeError<T>> {
    relative_error_with(predicted, actual, ErrorConvention::PredictedDenominator)
}

/// Percent relative error under an explicit denominator convention.
pub fn relative_error_with<T: Real>(
    predicted: &DVector<T>,
    actual: &DVector<T>,
    convention: ErrorConvention,
) -> Result<RelativeError<T>> {
    if predicted.len() != actual.len() {
        return Err(Error::invalid_argument(format!(
            "length mismatch: predicted {}, actual {}",
            predicted.len(),
            actual.len()
        )));
    }
    let floor = real::<T>(RELATIVE_ERROR_FLOOR);
    let hundred = real::<T>(100.0);
    let mut percent = Vec::with_capacity(predicted.len());
    let mut sum = T::zero();
    let mut defined = 0;
    for i in 0..predicted.len() {
        let denom = match convention {
            ErrorConvention::PredictedDenominator => predicted[i],
            ErrorConvention::ActualDenominator => actual[i],
        };
        if denom.abs() < floor {
            percent.push(None);
        } else {
            let e = (predicted[i] - actual[i]) / denom * hundred;
            sum += e.abs();
            defined += 1;
            percent.push(Some(e));
        }
    }
    let mean_abs = if defined > 0 {
        Some(sum / real::<T>(defined as f64))
    } else {
        None
    };
    Ok(RelativeError {
        percent,
        mean_abs,
        defined,
    })
}

/// Relative Euclidean error ||predicted - actual|| / ||actual||.
pub fn relative_l2<T: Real>(predicted: &DVector<T>, actual: &DVector<T>) -> Result<T> {
    if predicted.len() != actual.len() {
        return Err(Error::invalid_argument("length mismatch"));
    }
    let denom = actual.norm();
    if !(denom > T::zero()) {
        return Err(Error::degenerate("actual vector has zero norm"));
    }
    Ok((predicted - actual).norm() / denom)
}

/// Mean of `relative_l2` over paired rows.
pub fn mean_relative_l2<T: Real>(predicted: &DMatrix<T>, actual: &DMatrix<T>) -> Result<T> {
    if predicted.nrows() != actual.nrows() || predicted.ncols() != actual.ncols() {
        return Err(Error::invalid_argument("shape mismatch"));
    }
    if predicted.nrows() == 0 {
        return Err(Error::invalid_argument("no rows to average"));
    }
    let mut sum = T::zero();
    for i in 0..predicted.nrows() {
        let p = predicted.row(i).transpose();
        let a = actual.row(i).transpose();
        sum += relative_l2(&p, &a)?;
    }
    Ok(sum / real::<T>(predicted.nrows() as f64))
}

/// Deterministic train/test split: a seeded uniform sample of about
/// `fraction` of the rows (at least one) becomes the test set. Both index
/// lists come back sorted.
pub fn holdout_split(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::invalid_argument("need at least 2 samples to split"));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid_argument(format!(
            "holdout fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let n_test = ((n as f64 * fraction) as usize).clamp(1, n - 1);
    let mut test: Vec<usize> = idx[..n_test].to_vec();
    let mut train: Vec<usize> = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

/// Greedy k-center choice of `size` state entries, treating each state entry
/// as its column of training values. The first pick is the largest-norm
/// column; each next pick maximizes the distance to the closest already
/// chosen column. Deterministic, ties to the smaller index.
pub fn k_center_mask<T: Real>(snapshots: &DMatrix<T>, size: usize) -> Result<ObservationMask> {
    let d = snapshots.ncols();
    if size < 1 || size > d {
        return Err(Error::invalid_argument(format!(
            "mask size must lie in [1, {d}], got {size}"
        )));
    }
    let mut chosen = Vec::with_capacity(size);
    let mut best = 0;
    let mut best_norm = T::zero();
    for j in 0..d {
        let nj = snapshots.column(j).norm();
        if nj > best_norm {
            best_norm = nj;
            best = j;
        }
    }
    chosen.push(best);
    let mut min_dist: Vec<T> = (0..d)
        .map(|j| (snapshots.column(j) - snapshots.column(best)).norm())
        .collect();
    while chosen.len() < size {
        let mut pick = usize::MAX;
        let mut pick_dist = real::<T>(-1.0);
        for (j, &dist) in min_dist.iter().enumerate() {
            if chosen.contains(&j) {
                continue;
            }
            if dist > pick_dist {
                pick_dist = dist;
                pick = j;
            }
        }
        chosen.push(pick);
        for j in 0..d {
            let dj = (snapshots.column(j) - snapshots.column(pick)).norm();
            if dj < min_dist[j] {
                min_dist[j] = dj;
            }
        }
    }
    ObservationMask::new(chosen, d)
}

/// A seeded uniform choice of `size` distinct state entries.
pub fn seeded_mask(dim: usize, size: usize, seed: u64) -> Result<ObservationMask> {
    if size < 1 || size > dim {
        return Err(Error::invalid_argument(format!(
            "mask size must lie in [1, {dim}], got {size}"
        )));
    }
    let mut idx: Vec<usize> = (0..dim).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    ObservationMask::new(idx[..size].to_vec(), dim)
}

/// One pipeline prediction with its audit trail.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T: Real> {
    /// The requested output: ambient state, parameters, or values at the
    /// target mask, depending on the operation.
    pub values: DVector<T>,
    /// Latent coordinates the prediction passed through.
    pub latent: DVector<T>,
    /// Kernel mass of the query against the relevant training inputs; tiny
    /// values mean the query sits outside the sampled region.
    pub support_mass: T,
    /// False when a partial-observation route ran with fewer knowns than the
    /// embedding-dimension rule recommends.
    pub whitney_ok: bool,
    /// Full ambient reconstruction, when the route produced one on the way.
    pub ambient: Option<DVector<T>>,
}

/// Per-column affine rescaling of a parameter table to zero mean and unit
/// variance. Parameters carry arbitrary physical units, so their raw columns
/// can differ in span by many orders of magnitude; a single isotropic kernel
/// bandwidth would then only resolve the widest column. The params-to-latent
/// regression is always fitted and queried through this rescaling.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamScaling<T: Real> {
    /// Column means of the training table.
    pub shift: DVector<T>,
    /// Column standard deviations; a constant column keeps spread 1 so it
    /// maps to zero rather than dividing by zero.
    pub spread: DVector<T>,
}

impl<T: Real> ParamScaling<T> {
    pub fn fit(params: &DMatrix<T>) -> Result<Self> {
        let n = params.nrows();
        if n == 0 || params.ncols() == 0 {
            return Err(Error::invalid_data("parameter table is empty"));
        }
        let nf = real::<T>(n as f64);
        let mut shift = DVector::zeros(params.ncols());
        let mut spread = DVector::from_element(params.ncols(), T::one());
        for c in 0..params.ncols() {
            let mean = params.column(c).iter().fold(T::zero(), |a, &v| a + v) / nf;
            let var = params
                .column(c)
                .iter()
                .fold(T::zero(), |a, &v| a + (v - mean) * (v - mean))
                / nf;
            shift[c] = mean;
            if var > T::zero() {
                spread[c] = var.sqrt();
            }
        }
        Ok(ParamScaling { shift, spread })
    }

    pub fn apply(&self, params: &DMatrix<T>) -> Result<DMatrix<T>> {
        if params.ncols() != self.shift.len() {
            return Err(Error::invalid_argument(format!(
                "parameter table has {} columns, scaling expects {}",
                params.ncols(),
                self.shift.len()
            )));
        }
        Ok(DMatrix::from_fn(params.nrows(), params.ncols(), |i, j| {
            (params[(i, j)] - self.shift[j]) / self.spread[j]
        }))
    }

    pub fn apply_row(&self, row: &[T]) -> Result<Vec<T>> {
        if row.len() != self.shift.len() {
            return Err(Error::invalid_argument(format!(
                "parameter row has {} entries, scaling expects {}",
                row.len(),
                self.shift.len()
            )));
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(j, &v)| (v - self.shift[j]) / self.spread[j])
            .collect())
    }
}

/// The fitted models behind the four prediction routes.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline<T: Real> {
    pub dmap: DMapModel<T>,
    /// params -> latent; absent for datasets with no parameter table.
    pub forward_gh: Option<GHModel<T>>,
    /// latent -> ambient state.
    pub inverse_gh: GHModel<T>,
    /// latent -> params; absent alongside `forward_gh`.
    pub params_gh: Option<GHModel<T>>,
    /// values at `partial_mask` -> latent.
    pub partial_gh: Option<GHModel<T>>,
    pub partial_mask: Option<ObservationMask>,
    /// Rescaling applied to parameter inputs before `forward_gh`.
    pub param_scaling: Option<ParamScaling<T>>,
    /// Hash of the training snapshot matrix all parts descend from.
    pub snapshot_hash: String,
    /// Hash of the parameter table, when one was used.
    pub params_hash: Option<String>,
}

/// Tunables for `fit_pipeline`. `Default` gives the standard settings.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions<T: Real> {
    /// Ambient kernel bandwidth: median pairwise distance times this.
    pub bandwidth_multiplier: T,
    pub density_normalize: bool,
    /// Retained eigenpairs; default min(N, 20).
    pub n_pairs: Option<usize>,
    /// Coordinates scanned by the residual analysis; default min(n_pairs, 11).
    pub k_max: Option<usize>,
    pub regression_bandwidth_factor: T,
    pub selection: SelectionRule<T>,
    /// Truncation parameter for every Geometric Harmonics fit.
    pub delta: T,
    /// Latent-space bandwidth: median pairwise latent distance times this.
    pub latent_bandwidth_multiplier: T,
    /// Parameter-space bandwidth multiplier for the params -> latent map.
    pub params_bandwidth_multiplier: T,
    /// Observed-subspace bandwidth multiplier for the partial -> latent map.
    pub partial_bandwidth_multiplier: T,
    /// Explicit partial-observation mask; otherwise k-center picks one.
    pub partial_mask: Option<ObservationMask>,
    /// Size of the auto-picked mask; default 2 * selected + 1.
    pub partial_mask_size: Option<usize>,
}

impl<T: Real> Default for PipelineOptions<T> {
    fn default() -> Self {
        PipelineOptions {
            bandwidth_multiplier: T::one(),
            density_normalize: true,
            n_pairs: None,
            k_max: None,
            regression_bandwidth_factor: parsimony::default_bandwidth_factor(),
            selection: SelectionRule::LargestGap,
            delta: harmonics::default_delta(),
            latent_bandwidth_multiplier: T::one(),
            params_bandwidth_multiplier: T::one(),
            partial_bandwidth_multiplier: T::one(),
            partial_mask: None,
            partial_mask_size: None,
        }
    }
}

/// Restricts snapshot rows to the masked entries, giving the training inputs
/// of the partial-observation regression.
pub fn masked_columns<T: Real>(snapshots: &DMatrix<T>, mask: &ObservationMask) -> DMatrix<T> {
    let mut out = DMatrix::zeros(snapshots.nrows(), mask.len());
    for (c, &j) in mask.indices().iter().enumerate() {
        out.column_mut(c).copy_from(&snapshots.column(j));
    }
    out
}

/// Fits every stage of the pipeline from training snapshots (one per row)
/// and an optional row-aligned parameter table. Returns the pipeline and the
/// residual table behind its coordinate selection.
pub fn fit_pipeline<T: Real>(
    snapshots: &DMatrix<T>,
    params: Option<&DMatrix<T>>,
    options: &PipelineOptions<T>,
) -> Result<(Pipeline<T>, ResidualReport<T>)> {
    let n = snapshots.nrows();
    if let Some(p) = params {
        if p.nrows() != n {
            return Err(Error::invalid_argument(format!(
                "parameter table has {} rows but snapshots have {n}",
                p.nrows()
            )));
        }
    }

    let eps = kernel::median_bandwidth(snapshots, options.bandwidth_multiplier)?;
    let cfg = if options.density_normalize {
        KernelConfig::new(eps)?
    } else {
        KernelConfig::new(eps)?.without_density_normalization()
    };
    let n_pairs = options.n_pairs.unwrap_or_else(|| dmaps::default_n_pairs(n));
    let mut dmap = dmaps::fit(snapshots, &cfg, n_pairs)?;

    let k_max = options.k_max.unwrap_or_else(|| n_pairs.min(11));
    let mut report = parsimony::residuals(&dmap, k_max, options.regression_bandwidth_factor)?;
    let selected = parsimony::apply_selection(&mut report, &options.selection)?;
    dmap.set_selected(selected)?;

    let latent = dmap.latent_training()?;
    let latent_bw = kernel::median_bandwidth(&latent, options.latent_bandwidth_multiplier)?;
    let inverse_gh =
        harmonics::gh_fit_in(InputSpace::Latent, &latent, snapshots, latent_bw, options.delta)?;

    let (forward_gh, params_gh, param_scaling, params_hash) = match params {
        Some(p) => {
            let scaling = ParamScaling::fit(p)?;
            let scaled = scaling.apply(p)?;
            let params_bw =
                kernel::median_bandwidth(&scaled, options.params_bandwidth_multiplier)?;
            let forward = harmonics::gh_fit_in(
                InputSpace::Ambient,
                &scaled,
                &latent,
                params_bw,
                options.delta,
            )?;
            let back =
                harmonics::gh_fit_in(InputSpace::Latent, &latent, p, latent_bw, options.delta)?;
            (
                Some(forward),
                Some(back),
                Some(scaling),
                Some(persist::matrix_hash(p)),
            )
        }
        None => (None, None, None, None),
    };

    let mask = match &options.partial_mask {
        Some(m) => {
            if m.dim() != snapshots.ncols() {
                return Err(Error::invalid_argument(format!(
                    "partial mask is over dimension {}, snapshots have {}",
                    m.dim(),
                    snapshots.ncols()
                )));
            }
            m.clone()
        }
        None => {
            let size = options
                .partial_mask_size
                .unwrap_or_else(|| whitney_min_observations(dmap.selected.len()))
                .min(snapshots.ncols());
            k_center_mask(snapshots, size)?
        }
    };
    let partial_inputs = masked_columns(snapshots, &mask);
    let partial_bw =
        kernel::median_bandwidth(&partial_inputs, options.partial_bandwidth_multiplier)?;
    let partial_gh = harmonics::gh_fit_in(
        InputSpace::Ambient,
        &partial_inputs,
        &latent,
        partial_bw,
        options.delta,
    )?;

    let pipeline = Pipeline {
        snapshot_hash: dmap.training_hash.clone(),
        dmap,
        forward_gh,
        inverse_gh,
        params_gh,
        partial_gh: Some(partial_gh),
        partial_mask: Some(mask),
        param_scaling,
        params_hash,
    };
    Ok((pipeline, report))
}

impl<T: Real> Pipeline<T> {
    /// Reassembles a pipeline from independently persisted parts, verifying
    /// that every stage descends from the same training data.
    pub fn assemble(
        dmap: DMapModel<T>,
        forward_gh: Option<GHModel<T>>,
        inverse_gh: GHModel<T>,
        params_gh: Option<GHModel<T>>,
        partial_gh: Option<GHModel<T>>,
        partial_mask: Option<ObservationMask>,
        param_scaling: Option<ParamScaling<T>>,
        params: Option<&DMatrix<T>>,
    ) -> Result<Self> {
        let latent = dmap.latent_training()?;
        let latent_hash = persist::matrix_hash(&latent);
        if inverse_gh.input_hash != latent_hash {
            return Err(Error::invalid_data(
                "latent-to-ambient model was fitted on different latent coordinates \
                 than this diffusion map produces",
            ));
        }
        if let Some(gh) = &params_gh {
            if gh.input_hash != latent_hash {
                return Err(Error::invalid_data(
                    "latent-to-params model was fitted on different latent coordinates",
                ));
            }
        }
        let params_hash = match (&forward_gh, params) {
            (Some(gh), Some(p)) => {
                // The forward model's inputs are the table after rescaling.
                let fitted = match &param_scaling {
                    Some(s) => persist::matrix_hash(&s.apply(p)?),
                    None => persist::matrix_hash(p),
                };
                if gh.input_hash != fitted {
                    return Err(Error::invalid_data(
                        "params-to-latent model was fitted on a different parameter table",
                    ));
                }
                Some(persist::matrix_hash(p))
            }
            (Some(gh), None) => {
                if param_scaling.is_some() {
                    // Without the raw table the original hash cannot be
                    // recomputed through the rescaling; the caller supplies it.
                    None
                } else {
                    Some(gh.input_hash.clone())
                }
            }
            (None, _) => None,
        };
        match (&partial_gh, &partial_mask) {
            (Some(gh), Some(mask)) => {
                let inputs = masked_columns(&dmap.training, mask);
                if gh.input_hash != persist::matrix_hash(&inputs) {
                    return Err(Error::invalid_data(
                        "partial-observation model does not match this mask over the \
                         training snapshots",
                    ));
                }
            }
            (Some(_), None) => {
                return Err(Error::invalid_argument(
                    "partial-observation model present but its mask is missing",
                ));
            }
            _ => {}
        }
        Ok(Pipeline {
            snapshot_hash: dmap.training_hash.clone(),
            dmap,
            forward_gh,
            inverse_gh,
            params_gh,
            partial_gh,
            partial_mask,
            param_scaling,
            params_hash,
        })
    }

    pub fn n_latent(&self) -> usize {
        self.dmap.selected.len()
    }

    fn forward(&self) -> Result<&GHModel<T>> {
        self.forward_gh.as_ref().ok_or_else(|| {
            Error::invalid_argument("pipeline has no parameter table; params routes unavailable")
        })
    }

    fn params_back(&self) -> Result<&GHModel<T>> {
        self.params_gh.as_ref().ok_or_else(|| {
            Error::invalid_argument("pipeline has no parameter table; params routes unavailable")
        })
    }

    fn partial(&self) -> Result<(&GHModel<T>, &ObservationMask)> {
        match (&self.partial_gh, &self.partial_mask) {
            (Some(gh), Some(mask)) => Ok((gh, mask)),
            _ => Err(Error::invalid_argument(
                "pipeline has no partial-observation model",
            )),
        }
    }

    /// parameters -> latent -> full ambient state.
    pub fn predict_observation_from_params(&self, params: &[T]) -> Result<Prediction<T>> {
        let forward = self.forward()?;
        let query = match &self.param_scaling {
            Some(s) => s.apply_row(params)?,
            None => params.to_vec(),
        };
        let lat = forward.extend(&query)?;
        let latent: Vec<T> = lat.values.iter().copied().collect();
        let amb = self.inverse_gh.extend(&latent)?;
        Ok(Prediction {
            values: amb.values,
            latent: lat.values,
            support_mass: lat.support_mass,
            whitney_ok: true,
            ambient: None,
        })
    }

    /// ambient state -> latent (Nystrom) -> parameters.
    pub fn predict_params_from_observation(&self, x: &[T]) -> Result<Prediction<T>> {
        let back = self.params_back()?;
        let latent = self.dmap.latent_coordinates(x)?;
        let lat_slice: Vec<T> = latent.iter().copied().collect();
        let out = back.extend(&lat_slice)?;
        Ok(Prediction {
            values: out.values,
            latent,
            support_mass: out.support_mass,
            whitney_ok: true,
            ambient: None,
        })
    }

    /// values at the partial mask -> latent -> parameters.
    pub fn predict_params_from_partial(&self, values: &[T]) -> Result<Prediction<T>> {
        let back = self.params_back()?;
        let (latent, mass, whitney_ok) = self.partial_to_latent(values)?;
        let lat_slice: Vec<T> = latent.iter().copied().collect();
        let out = back.extend(&lat_slice)?;
        Ok(Prediction {
            values: out.values,
            latent,
            support_mass: mass,
            whitney_ok,
            ambient: None,
        })
    }

    /// values at the partial mask -> latent -> ambient, restricted to the
    /// target mask; the full reconstruction rides along.
    pub fn predict_partial_from_partial(
        &self,
        values: &[T],
        target: &ObservationMask,
    ) -> Result<Prediction<T>> {
        if target.dim() != self.dmap.dim() {
            return Err(Error::invalid_argument(format!(
                "target mask is over dimension {}, state dimension is {}",
                target.dim(),
                self.dmap.dim()
            )));
        }
        let (latent, mass, whitney_ok) = self.partial_to_latent(values)?;
        let lat_slice: Vec<T> = latent.iter().copied().collect();
        let amb = self.inverse_gh.extend(&lat_slice)?;
        let restricted = DVector::from_fn(target.len(), |r, _| amb.values[target.indices()[r]]);
        Ok(Prediction {
            values: restricted,
            latent,
            support_mass: mass,
            whitney_ok,
            ambient: Some(amb.values),
        })
    }

    fn partial_to_latent(&self, values: &[T]) -> Result<(DVector<T>, T, bool)> {
        let (gh, mask) = self.partial()?;
        if values.len() != mask.len() {
            return Err(Error::invalid_argument(format!(
                "got {} observed values but the mask has {} entries",
                values.len(),
                mask.len()
            )));
        }
        let ext = gh.extend(values)?;
        let whitney_ok = mask.len() >= whitney_min_observations(self.n_latent());
        Ok((ext.values, ext.support_mass, whitney_ok))
    }
}

/// One test vector's scores in a gappy comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow<T: Real> {
    pub pod_error: T,
    pub dmap_error: T,
}

/// Equal-information comparison of gappy POD against the partial-observation
/// diffusion-map route, over a test set.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport<T: Real> {
    pub condition_number: T,
    pub rows: Vec<ComparisonRow<T>>,
    pub mean_pod_error: T,
    pub mean_dmap_error: T,
}

/// Reconstructs every test row (one snapshot per row) from its masked
/// entries with both methods and scores each against the full row by
/// relative Euclidean error.
pub fn compare_gappy<T: Real>(
    pipeline: &Pipeline<T>,
    basis: &PODBasis<T>,
    mask: &ObservationMask,
    test_set: &DMatrix<T>,
) -> Result<ComparisonReport<T>> {
    let (_, pipe_mask) = pipeline.partial()?;
    if pipe_mask != mask {
        return Err(Error::invalid_argument(
            "comparison mask differs from the pipeline's partial-observation mask",
        ));
    }
    if test_set.ncols() != pipeline.dmap.dim() {
        return Err(Error::invalid_argument("test set dimension mismatch"));
    }
    if test_set.nrows() == 0 {
        return Err(Error::invalid_argument("empty test set"));
    }
    let condition_number = mask_diagnostics(basis, mask)?;
    let full = ObservationMask::new((0..test_set.ncols()).collect(), test_set.ncols())?;
    let mut rows = Vec::with_capacity(test_set.nrows());
    let mut sum_pod = T::zero();
    let mut sum_dmap = T::zero();
    for i in 0..test_set.nrows() {
        let actual = test_set.row(i).transpose();
        let pod = gappy_reconstruct(basis, mask, &actual)?;
        let pod_error = relative_l2(&pod.x_rec, &actual)?;
        let observed: Vec<T> = mask.indices().iter().map(|&j| actual[j]).collect();
        let pred = pipeline.predict_partial_from_partial(&observed, &full)?;
        let dmap_error = relative_l2(&pred.values, &actual)?;
        sum_pod += pod_error;
        sum_dmap += dmap_error;
        rows.push(ComparisonRow {
            pod_error,
            dmap_error,
        });
    }
    let n = real::<T>(rows.len() as f64);
    Ok(ComparisonReport {
        condition_number,
        mean_pod_error: sum_pod / n,
        mean_dmap_error: sum_dmap / n,
        rows,
    })
}

/// One mask's scores in a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow<T: Real> {
    pub mask: ObservationMask,
    pub condition_number: T,
    /// Mean relative reconstruction error against the full test rows.
    pub mean_error: T,
    /// Mean Euclidean norm of the residual at the known entries; nonzero
    /// whenever the mask overdetermines the basis coefficients.
    pub mean_known_residual: T,
}

/// Scores each mask by the mean relative reconstruction error of the test
/// rows under gappy POD, alongside its condition number. Masks whose solve
/// is ill-posed are skipped (reported nowhere in the output).
pub fn mask_sweep<T: Real>(
    basis: &PODBasis<T>,
    masks: &[ObservationMask],
    test_set: &DMatrix<T>,
) -> Result<Vec<SweepRow<T>>> {
    let mut out = Vec::with_capacity(masks.len());
    for mask in masks {
        let condition_number = match mask_diagnostics(basis, mask) {
            Ok(c) => c,
            Err(Error::IllPosed(_)) => continue,
            Err(e) => return Err(e),
        };
        let mut sum = T::zero();
        let mut residual_sum = T::zero();
        let mut ok = true;
        for i in 0..test_set.nrows() {
            let actual = test_set.row(i).transpose();
            match gappy_reconstruct(basis, mask, &actual) {
                Ok(res) => {
                    sum += relative_l2(&res.x_rec, &actual)?;
                    residual_sum += res.residual_on_known;
                }
                Err(Error::IllPosed(_)) => {
                    ok = false;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if !ok || test_set.nrows() == 0 {
            continue;
        }
        let n = real::<T>(test_set.nrows() as f64);
        out.push(SweepRow {
            mask: mask.clone(),
            condition_number,
            mean_error: sum / n,
            mean_known_residual: residual_sum / n,
        });
    }
    Ok(out)
}
