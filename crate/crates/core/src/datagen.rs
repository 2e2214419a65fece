//! Synthetic snapshot datasets and their container types.
//!
//! Two generators cover the regimes the rest of the crate is exercised on:
//!
//! * [`generate_slow_manifold`]: a two-dimensional singularly perturbed ODE
//!   whose trajectories collapse onto a one-dimensional attracting curve. The
//!   returned points sample one seeded trajectory approximately uniformly in
//!   arclength, covering both the fast approach and the slow drift toward the
//!   fixed point at (1, 1), so the set is a smooth curved 1-D manifold.
//! * [`generate_surrogate_cvd`]: a process-simulator stand-in mapping a
//!   3-parameter operating grid (temperature, inlet mass flow, pressure)
//!   through a fixed library of smooth nonlinear features into a
//!   high-dimensional ambient state. Each output column is rescaled to unit
//!   variance around a fixed positive offset; every snapshot row is an exact
//!   function of its parameter row.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{self, MatrixFormat};
use crate::scalar::{real, Real};

/// Per-column affine scaling record: stored value = (raw - shift) / scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnScale<T> {
    pub shift: T,
    pub scale: T,
}

/// N x d snapshot set, one observation per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix<T: Real> {
    data: DMatrix<T>,
    feature_names: Option<Vec<String>>,
    scaling: Option<Vec<ColumnScale<T>>>,
}

impl<T: Real> SnapshotMatrix<T> {
    pub fn new(data: DMatrix<T>) -> Result<Self> {
        if data.nrows() < 2 {
            return Err(Error::invalid_data(format!(
                "snapshot matrix needs at least 2 rows, got {}",
                data.nrows()
            )));
        }
        if data.ncols() < 1 {
            return Err(Error::invalid_data("snapshot matrix needs at least 1 column"));
        }
        for j in 0..data.ncols() {
            for i in 0..data.nrows() {
                if !data[(i, j)].finite() {
                    return Err(Error::invalid_data(format!(
                        "non-finite snapshot entry at row {i}, column {j}"
                    )));
                }
            }
        }
        Ok(SnapshotMatrix {
            data,
            feature_names: None,
            scaling: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.dim() {
            return Err(Error::invalid_argument(format!(
                "{} feature names for {} columns",
                names.len(),
                self.dim()
            )));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn data(&self) -> &DMatrix<T> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<T> {
        self.data
    }

    /// Number of snapshots.
    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn scaling(&self) -> Option<&[ColumnScale<T>]> {
        self.scaling.as_deref()
    }

    /// Shifts each column to zero mean and unit (population) standard
    /// deviation, recording the transform so it can be undone.
    pub fn standardize(&mut self) -> Result<()> {
        if self.scaling.is_some() {
            return Err(Error::invalid_argument("matrix is already standardized"));
        }
        let n = real::<T>(self.len() as f64);
        let mut scales = Vec::with_capacity(self.dim());
        for j in 0..self.dim() {
            let col = self.data.column(j);
            let mean = col.sum() / n;
            let var = col.iter().map(|&v| (v - mean) * (v - mean)).fold(T::zero(), |a, b| a + b) / n;
            let sd = var.sqrt();
            if sd <= T::zero() {
                return Err(Error::degenerate(format!(
                    "column {j} has zero variance, cannot standardize"
                )));
            }
            scales.push(ColumnScale { shift: mean, scale: sd });
        }
        for (j, s) in scales.iter().enumerate() {
            for i in 0..self.len() {
                self.data[(i, j)] = (self.data[(i, j)] - s.shift) / s.scale;
            }
        }
        self.scaling = Some(scales);
        Ok(())
    }

    /// Undoes [`standardize`](Self::standardize).
    pub fn unstandardize(&mut self) -> Result<()> {
        let scales = self
            .scaling
            .take()
            .ok_or_else(|| Error::invalid_argument("matrix carries no scaling metadata"))?;
        for (j, s) in scales.iter().enumerate() {
            for i in 0..self.len() {
                self.data[(i, j)] = self.data[(i, j)] * s.scale + s.shift;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path, format: MatrixFormat) -> Result<()> {
        io::save_matrix(path, &self.data, format)
    }

    pub fn load(path: &Path, format: MatrixFormat) -> Result<Self> {
        SnapshotMatrix::new(io::load_matrix(path, format)?)
    }
}

/// N x p table of operating parameters, row-aligned with a snapshot matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterTable<T: Real> {
    data: DMatrix<T>,
    names: Vec<String>,
}

impl<T: Real> ParameterTable<T> {
    pub fn new(data: DMatrix<T>, names: Vec<String>) -> Result<Self> {
        if data.nrows() < 1 || data.ncols() < 1 {
            return Err(Error::invalid_data("parameter table must be nonempty"));
        }
        if names.len() != data.ncols() {
            return Err(Error::invalid_argument(format!(
                "{} parameter names for {} columns",
                names.len(),
                data.ncols()
            )));
        }
        for j in 0..data.ncols() {
            for i in 0..data.nrows() {
                if !data[(i, j)].finite() {
                    return Err(Error::invalid_data(format!(
                        "non-finite parameter at row {i}, column {j}"
                    )));
                }
            }
        }
        Ok(ParameterTable { data, names })
    }

    pub fn data(&self) -> &DMatrix<T> {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn n_params(&self) -> usize {
        self.data.ncols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn save(&self, path: &Path, format: MatrixFormat) -> Result<()> {
        io::save_matrix(path, &self.data, format)
    }

    pub fn load(path: &Path, format: MatrixFormat, names: Vec<String>) -> Result<Self> {
        ParameterTable::new(io::load_matrix(path, format)?, names)
    }
}

/// Right-hand side of the singularly perturbed caricature system
/// x' = 2 - x - y, y' = (x - y) / eps. The fixed point is (1, 1).
pub fn slow_manifold_vector_field<T: Real>(eps: T, state: [T; 2]) -> [T; 2] {
    let [x, y] = state;
    let two = real::<T>(2.0);
    [two - x - y, (x - y) / eps]
}

fn rk4_step<T: Real>(eps: T, state: [T; 2], h: T) -> [T; 2] {
    let half = h / real::<T>(2.0);
    let k1 = slow_manifold_vector_field(eps, state);
    let k2 = slow_manifold_vector_field(eps, [state[0] + half * k1[0], state[1] + half * k1[1]]);
    let k3 = slow_manifold_vector_field(eps, [state[0] + half * k2[0], state[1] + half * k2[1]]);
    let k4 = slow_manifold_vector_field(eps, [state[0] + h * k3[0], state[1] + h * k3[1]]);
    let sixth = h / real::<T>(6.0);
    let two = real::<T>(2.0);
    [
        state[0] + sixth * (k1[0] + two * k2[0] + two * k3[0] + k4[0]),
        state[1] + sixth * (k1[1] + two * k2[1] + two * k3[1] + k4[1]),
    ]
}

/// Slow-manifold sample with per-point transient bookkeeping.
pub struct SlowManifoldSample<T: Real> {
    pub matrix: SnapshotMatrix<T>,
    /// `true` where the sample's position along the trajectory lies past the
    /// fast transient, i.e. on the attracting curve proper.
    pub post_transient: Vec<bool>,
}

/// Samples `n_samples` points along one seeded trajectory of the singularly
/// perturbed system, approximately uniformly in arclength.
///
/// The trajectory starts off-manifold, drops onto the attracting curve within
/// a few multiples of `eps`, and then drifts toward the fixed point (1, 1).
/// Points past the transient satisfy |x - y| < 5 eps.
pub fn generate_slow_manifold<T: Real>(
    eps: T,
    n_samples: usize,
    seed: u64,
) -> Result<SnapshotMatrix<T>> {
    Ok(generate_slow_manifold_detailed(eps, n_samples, seed)?.matrix)
}

pub fn generate_slow_manifold_detailed<T: Real>(
    eps: T,
    n_samples: usize,
    seed: u64,
) -> Result<SlowManifoldSample<T>> {
    let eps_f = eps.to_f64().unwrap_or(0.0);
    if !(eps_f > 0.0 && eps_f <= 0.1) {
        return Err(Error::invalid_argument(format!(
            "eps_singular must lie in (0, 0.1], got {eps_f}"
        )));
    }
    if n_samples < 2 {
        return Err(Error::invalid_argument("n_samples must be at least 2"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = 2.0 + 0.6 * rng.gen::<f64>();
    let y0 = -1.6 + 0.6 * rng.gen::<f64>();

    // Step small enough to resolve the fast scale; horizon covers the decay of
    // the fast component below 0.1*eps plus a fixed stretch of slow drift.
    let h = eps_f / 50.0;
    let t_transient = eps_f * ((x0 - y0).abs() / (0.1 * eps_f)).ln();
    let t_total = t_transient + 1.5;
    let steps = (t_total / h).ceil() as usize;

    let mut states = Vec::with_capacity(steps + 1);
    let mut arc = Vec::with_capacity(steps + 1);
    let mut state = [real::<T>(x0), real::<T>(y0)];
    states.push(state);
    arc.push(0.0f64);
    let h_t = real::<T>(h);
    let eps_t = eps;
    for _ in 0..steps {
        let next = rk4_step(eps_t, state, h_t);
        let dx = (next[0] - state[0]).to_f64().unwrap_or(0.0);
        let dy = (next[1] - state[1]).to_f64().unwrap_or(0.0);
        arc.push(arc.last().unwrap() + (dx * dx + dy * dy).sqrt());
        states.push(next);
        state = next;
    }
    let total_len = *arc.last().unwrap();
    if !(total_len > 0.0) {
        return Err(Error::degenerate("trajectory has zero arclength"));
    }
    let transient_steps = (t_transient / h).ceil() as usize;
    let transient_arc = arc[transient_steps.min(arc.len() - 1)];

    let mut rows = Vec::with_capacity(n_samples * 2);
    let mut post_transient = Vec::with_capacity(n_samples);
    let mut cursor = 0usize;
    for i in 0..n_samples {
        // Jittered stratified arclength positions, strictly increasing in i.
        let u: f64 = rng.gen();
        let target = (i as f64 + 0.1 + 0.8 * u) / n_samples as f64 * total_len;
        while cursor + 1 < arc.len() && arc[cursor + 1] < target {
            cursor += 1;
        }
        let seg = (arc[cursor + 1] - arc[cursor]).max(f64::MIN_POSITIVE);
        let frac = real::<T>(((target - arc[cursor]) / seg).clamp(0.0, 1.0));
        let a = states[cursor];
        let b = states[cursor + 1];
        rows.push(a[0] + frac * (b[0] - a[0]));
        rows.push(a[1] + frac * (b[1] - a[1]));
        post_transient.push(target >= transient_arc);
    }
    let matrix = SnapshotMatrix::new(DMatrix::from_row_slice(n_samples, 2, &rows))?;
    Ok(SlowManifoldSample {
        matrix,
        post_transient,
    })
}

pub const CVD_PARAM_NAMES: [&str; 3] = ["temperature", "mass_flow", "pressure"];

/// Default 3-parameter operating grid: 10 temperatures in [487, 501] K x
/// 9 inlet mass flows in [7.97e-6, 8.87e-6] kg/s x 8 pressures in
/// [1383, 1463] Pa, 720 points, inner index fastest on pressure.
pub fn cvd_parameter_grid<T: Real>() -> ParameterTable<T> {
    parameter_grid(
        [(487.0, 501.0), (7.97e-6, 8.87e-6), (1383.0, 1463.0)],
        [10, 9, 8],
    )
    .expect("default grid parameters are valid")
}

/// Uniform 3-parameter product grid with inclusive endpoints.
pub fn parameter_grid<T: Real>(
    ranges: [(f64, f64); 3],
    counts: [usize; 3],
) -> Result<ParameterTable<T>> {
    for (lo, hi) in ranges {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid_argument(format!(
                "parameter range [{lo}, {hi}] is not a proper interval"
            )));
        }
    }
    for c in counts {
        if c < 2 {
            return Err(Error::invalid_argument(
                "each grid axis needs at least 2 points",
            ));
        }
    }
    let n = counts[0] * counts[1] * counts[2];
    let axis = |k: usize, i: usize| -> f64 {
        let (lo, hi) = ranges[k];
        lo + (hi - lo) * i as f64 / (counts[k] - 1) as f64
    };
    let mut rows = Vec::with_capacity(n * 3);
    for it in 0..counts[0] {
        for im in 0..counts[1] {
            for ip in 0..counts[2] {
                rows.push(real::<T>(axis(0, it)));
                rows.push(real::<T>(axis(1, im)));
                rows.push(real::<T>(axis(2, ip)));
            }
        }
    }
    ParameterTable::new(
        DMatrix::from_row_slice(n, 3, &rows),
        CVD_PARAM_NAMES.iter().map(|s| s.to_string()).collect(),
    )
}

/// Anisotropic rescaling of the three parameters to boxes of distinct side
/// lengths. Distinct lengths keep the induced harmonic frequencies
/// non-degenerate, so each leading map coordinate follows one parameter; the
/// lengths are close enough that every direction's first mode still comes
/// before any cross-harmonic of the longer sides.
const PARAM_BOX_SCALES: [f64; 3] = [1.0, 0.85, 0.7];

/// Fixed smooth feature library evaluated on the scaled parameters. Every
/// term depends on a single parameter, so the embedded manifold is a metric
/// product of three curves and the leading map coordinates separate cleanly,
/// one per parameter.
fn surrogate_features(u: [f64; 3]) -> [f64; 12] {
    let [a, b, c] = u;
    let pi = std::f64::consts::PI;
    [
        a,
        b,
        c,
        a * a,
        b * b,
        c * c,
        (pi * a).sin(),
        (pi * b).sin(),
        (pi * c).sin(),
        (3.0 * (a - 0.5)).tanh(),
        (3.0 * (b - 0.5)).tanh(),
        (3.0 * (c - 0.5)).tanh(),
    ]
}

const SURROGATE_COLUMN_OFFSET: f64 = 5.0;

/// Deterministic surrogate "process simulator": maps each parameter row
/// through the fixed feature library and a seeded Gaussian mixing matrix into
/// `ambient_dim` state variables, then rescales every state column to unit
/// variance around a fixed positive offset.
///
/// Identical parameter rows produce bitwise-identical snapshot rows. The
/// ambient dimension must be at least 7 (= 2 * 3 + 1) so the 3-parameter
/// manifold can embed without self-intersection.
pub fn generate_surrogate_cvd<T: Real>(
    grid: &ParameterTable<T>,
    ambient_dim: usize,
    seed: u64,
) -> Result<SnapshotMatrix<T>> {
    if grid.n_params() != 3 {
        return Err(Error::invalid_argument(format!(
            "surrogate expects exactly 3 parameters, grid has {}",
            grid.n_params()
        )));
    }
    if ambient_dim < 7 {
        return Err(Error::invalid_argument(format!(
            "ambient_dim must be at least 7 (2 * 3 + 1), got {ambient_dim}"
        )));
    }
    let n = grid.len();
    if n < 2 {
        return Err(Error::invalid_data("surrogate grid needs at least 2 rows"));
    }

    // Column ranges for scaling; a parameter held constant across the grid
    // cannot span a box direction.
    let mut lo = [0.0f64; 3];
    let mut hi = [0.0f64; 3];
    for k in 0..3 {
        let col = grid.data().column(k);
        lo[k] = col.iter().map(|v| v.to_f64().unwrap()).fold(f64::INFINITY, f64::min);
        hi[k] = col.iter().map(|v| v.to_f64().unwrap()).fold(f64::NEG_INFINITY, f64::max);
        if !(hi[k] - lo[k] > 0.0) {
            return Err(Error::degenerate(format!(
                "parameter column {k} is constant over the grid"
            )));
        }
    }

    let n_features = 12;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Mixing weights drawn row-major: ambient row outer, feature inner.
    let mut mixing = vec![0.0f64; ambient_dim * n_features];
    for w in mixing.iter_mut() {
        *w = standard_normal(&mut rng);
    }

    let mut raw = vec![0.0f64; n * ambient_dim];
    for i in 0..n {
        let mut u = [0.0f64; 3];
        for k in 0..3 {
            let v = grid.data()[(i, k)].to_f64().unwrap();
            u[k] = PARAM_BOX_SCALES[k] * (v - lo[k]) / (hi[k] - lo[k]);
        }
        let g = surrogate_features(u);
        for j in 0..ambient_dim {
            let mut acc = 0.0f64;
            for (l, gl) in g.iter().enumerate() {
                acc += mixing[j * n_features + l] * gl;
            }
            raw[i * ambient_dim + j] = acc;
        }
    }

    // Unit variance + fixed offset per column.
    for j in 0..ambient_dim {
        let mut mean = 0.0f64;
        for i in 0..n {
            mean += raw[i * ambient_dim + j];
        }
        mean /= n as f64;
        let mut var = 0.0f64;
        for i in 0..n {
            let d = raw[i * ambient_dim + j] - mean;
            var += d * d;
        }
        var /= n as f64;
        let sd = var.sqrt();
        if !(sd > 0.0) {
            return Err(Error::degenerate(format!(
                "ambient column {j} is constant over the grid"
            )));
        }
        for i in 0..n {
            let v = (raw[i * ambient_dim + j] - mean) / sd + SURROGATE_COLUMN_OFFSET;
            raw[i * ambient_dim + j] = v;
        }
    }

    let data = DMatrix::from_fn(n, ambient_dim, |i, j| real::<T>(raw[i * ambient_dim + j]));
    let names = (0..ambient_dim).map(|j| format!("state_{j:03}")).collect();
    SnapshotMatrix::new(data)?.with_feature_names(names)
}

/// Standard normal draw via Box-Muller on the raw uniform stream. Kept local
/// so the byte stream consumed per draw is pinned by this crate, not by a
/// distribution crate's internals.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        if u1 > 0.0 {
            return (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        }
    }
}
