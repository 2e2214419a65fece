//! Gaussian affinity kernel and its normalizations.
//!
//! The affinity between two snapshots is `w(i, j) = exp(-(||x_i - x_j|| /
//! eps)^2)`: the bandwidth divides the distance and the quotient is then
//! squared. Density normalization divides each entry by both row masses
//! (`W~ = P^-1 W P^-1` with `P_ii = sum_j W_ij`), removing the first-order
//! effect of nonuniform sampling; row normalization of the result yields the
//! Markov transition matrix whose spectrum drives the diffusion-map
//! embedding.
//!
//! Every matrix entry and every row sum is accumulated in a fixed order, so
//! identical inputs give bitwise-identical operators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{real, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig<T> {
    /// Gaussian bandwidth; strictly positive.
    pub epsilon: T,
    /// Apply the sampling-density correction before row normalization.
    pub density_normalize: bool,
}

impl<T: Real> KernelConfig<T> {
    pub fn new(epsilon: T) -> Result<Self> {
        if !(epsilon > T::zero() && epsilon.finite()) {
            return Err(Error::invalid_argument(format!(
                "kernel bandwidth must be positive and finite, got {epsilon}"
            )));
        }
        Ok(KernelConfig {
            epsilon,
            density_normalize: true,
        })
    }

    pub fn without_density_normalization(mut self) -> Self {
        self.density_normalize = false;
        self
    }
}

/// Gaussian affinity of a single snapshot pair.
#[inline]
pub fn affinity<T: Real>(xi: &[T], xj: &[T], epsilon: T) -> T {
    let mut sq = T::zero();
    for (a, b) in xi.iter().zip(xj.iter()) {
        let d = *a - *b;
        sq += d * d;
    }
    let scaled = sq.sqrt() / epsilon;
    (-(scaled * scaled)).exp()
}

fn row_slice<T: Real>(x: &DMatrix<T>, i: usize, buf: &mut Vec<T>) {
    buf.clear();
    for j in 0..x.ncols() {
        buf.push(x[(i, j)]);
    }
}

/// Full symmetric affinity matrix with unit diagonal.
pub fn pairwise_affinity<T: Real>(x: &DMatrix<T>, epsilon: T) -> Result<DMatrix<T>> {
    if !(epsilon > T::zero() && epsilon.finite()) {
        return Err(Error::invalid_argument(format!(
            "kernel bandwidth must be positive and finite, got {epsilon}"
        )));
    }
    let n = x.nrows();
    if n == 0 {
        return Err(Error::invalid_data("affinity needs at least one snapshot"));
    }
    let mut w = DMatrix::zeros(n, n);
    let mut ri = Vec::with_capacity(x.ncols());
    let mut rj = Vec::with_capacity(x.ncols());
    for i in 0..n {
        w[(i, i)] = T::one();
        row_slice(x, i, &mut ri);
        for j in (i + 1)..n {
            row_slice(x, j, &mut rj);
            let v = affinity(&ri, &rj, epsilon);
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    Ok(w)
}

/// Median of all pairwise distances, times `multiplier`.
///
/// Errors with `DegenerateData` when the median distance is zero (at least
/// half of all pairs coincide), since no meaningful bandwidth exists then.
pub fn median_bandwidth<T: Real>(x: &DMatrix<T>, multiplier: T) -> Result<T> {
    if !(multiplier > T::zero() && multiplier.finite()) {
        return Err(Error::invalid_argument(format!(
            "bandwidth multiplier must be positive, got {multiplier}"
        )));
    }
    let n = x.nrows();
    if n < 2 {
        return Err(Error::invalid_data(
            "median bandwidth needs at least two snapshots",
        ));
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut sq = T::zero();
            for c in 0..x.ncols() {
                let d = x[(i, c)] - x[(j, c)];
                sq += d * d;
            }
            dists.push(sq.sqrt());
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let m = dists.len();
    let median = if m % 2 == 1 {
        dists[m / 2]
    } else {
        (dists[m / 2 - 1] + dists[m / 2]) / real::<T>(2.0)
    };
    if !(median > T::zero()) {
        return Err(Error::degenerate(
            "median pairwise distance is zero; data has no usable spread",
        ));
    }
    Ok(multiplier * median)
}

/// Density normalization `W~ = P^-1 W P^-1`; returns the normalized matrix
/// and the row-mass vector `P_ii`.
pub fn density_normalize<T: Real>(w: &DMatrix<T>) -> Result<(DMatrix<T>, DVector<T>)> {
    let n = w.nrows();
    if n == 0 || w.ncols() != n {
        return Err(Error::invalid_argument("affinity matrix must be square"));
    }
    let mut p = DVector::zeros(n);
    for i in 0..n {
        let mut acc = T::zero();
        for j in 0..n {
            acc += w[(i, j)];
        }
        if !(acc > T::zero()) {
            return Err(Error::degenerate(format!("row {i} of affinity sums to zero")));
        }
        p[i] = acc;
    }
    let mut wt = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            wt[(i, j)] = w[(i, j)] / (p[i] * p[j]);
        }
    }
    Ok((wt, p))
}

/// Row normalization to a Markov transition matrix; returns the matrix and
/// the row-sum vector it was scaled by.
pub fn markov_normalize<T: Real>(wt: &DMatrix<T>) -> Result<(DMatrix<T>, DVector<T>)> {
    let n = wt.nrows();
    if n == 0 || wt.ncols() != n {
        return Err(Error::invalid_argument("matrix must be square"));
    }
    let mut d = DVector::zeros(n);
    for i in 0..n {
        let mut acc = T::zero();
        for j in 0..n {
            acc += wt[(i, j)];
        }
        if !(acc > T::zero()) {
            return Err(Error::degenerate(format!("row {i} sums to zero")));
        }
        d[i] = acc;
    }
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            k[(i, j)] = wt[(i, j)] / d[i];
        }
    }
    Ok((k, d))
}

/// The assembled Markov operator of a snapshot set.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovOperator<T: Real> {
    pub config: KernelConfig<T>,
    /// Raw symmetric affinity W.
    pub affinity: DMatrix<T>,
    /// Row masses P_ii of W (all ones when density normalization is off).
    pub row_density: DVector<T>,
    /// Row sums D_ii of the density-normalized affinity.
    pub row_sums: DVector<T>,
    /// Markov transition matrix K.
    pub kernel: DMatrix<T>,
}

/// Builds the Markov operator: affinity, optional density normalization, row
/// normalization.
pub fn markov_operator<T: Real>(x: &DMatrix<T>, config: &KernelConfig<T>) -> Result<MarkovOperator<T>> {
    let w = pairwise_affinity(x, config.epsilon)?;
    let (wt, p) = if config.density_normalize {
        density_normalize(&w)?
    } else {
        (w.clone(), DVector::from_element(w.nrows(), T::one()))
    };
    let (k, d) = markov_normalize(&wt)?;
    Ok(MarkovOperator {
        config: *config,
        affinity: w,
        row_density: p,
        row_sums: d,
        kernel: k,
    })
}

impl<T: Real> MarkovOperator<T> {
    pub fn len(&self) -> usize {
        self.kernel.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.kernel.nrows() == 0
    }

    /// Largest absolute deviation of a row sum from one.
    pub fn max_row_sum_deviation(&self) -> T {
        let n = self.len();
        let mut worst = T::zero();
        for i in 0..n {
            let mut acc = T::zero();
            for j in 0..n {
                acc += self.kernel[(i, j)];
            }
            let dev = (acc - T::one()).abs();
            if dev > worst {
                worst = dev;
            }
        }
        worst
    }
}
