//! End-to-end acceptance checks. Each test covers one numbered criterion and
//! prints a single `ACCEPTANCE n: PASS` line with the measured figures; run
//! with `--nocapture` to see them. Tolerances are pinned as constants below.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use gappy_dmap::datagen::{cvd_parameter_grid, generate_slow_manifold, generate_surrogate_cvd, parameter_grid};
use gappy_dmap::gappy_pod::{
    gappy_reconstruct, pod_fit, pod_fit_with, ObservationMask, PodOptions, Truncation,
};
use gappy_dmap::harmonics::{gh_fit, gh_fit_in, InputSpace};
use gappy_dmap::kernel::{self, KernelConfig};
use gappy_dmap::parsimony::{self, SelectionRule};
use gappy_dmap::persist;
use gappy_dmap::workflows::{
    compare_gappy, fit_pipeline, holdout_split, mask_sweep, masked_columns, relative_l2,
    seeded_mask, Pipeline, PipelineOptions,
};
use gappy_dmap::{dmaps, Result};

// Numeric tolerances, one per criterion clause.
const ROW_SUM_TOL: f64 = 1e-12;
const LEADING_EIGENVALUE_TOL: f64 = 1e-10;
const EIGEN_RESIDUAL_TOL: f64 = 1e-8;
const ORTHONORMALITY_TOL: f64 = 1e-8;
const ORACLE_TOL: f64 = 1e-10;
const ONE_PERCENT: f64 = 0.01;
const PEARSON_MIN: f64 = 0.95;
const CONDITION_SPREAD_MIN: f64 = 1e3;
const SPEARMAN_MIN: f64 = 0.5;
const WHITNEY_ERROR_FACTOR: f64 = 5.0;
const SLOW_MANIFOLD_POD_FACTOR: f64 = 5.0;

// Wall-clock budgets.
const BUDGET_1: Duration = Duration::from_secs(30);
const BUDGET_2: Duration = Duration::from_secs(1);
const BUDGET_3: Duration = Duration::from_secs(60);
const BUDGET_4: Duration = Duration::from_secs(60);
const BUDGET_5: Duration = Duration::from_secs(120);
const BUDGET_6: Duration = Duration::from_secs(60);
const BUDGET_7: Duration = Duration::from_secs(60);
const BUDGET_8: Duration = Duration::from_secs(30);

fn check_budget(n: usize, start: Instant, budget: Duration) {
    let elapsed = start.elapsed();
    assert!(
        elapsed <= budget,
        "ACCEPTANCE {n}: FAIL (runtime {elapsed:.1?} exceeds the {budget:?} budget)"
    );
}

// Shared fixtures. Tests run in one process, so the expensive fits happen
// once; whichever test arrives first pays for construction inside its own
// (generous) time budget.

fn surrogate_data() -> &'static (DMatrix<f64>, DMatrix<f64>) {
    static DATA: OnceLock<(DMatrix<f64>, DMatrix<f64>)> = OnceLock::new();
    DATA.get_or_init(|| {
        let grid = cvd_parameter_grid::<f64>();
        let snaps = generate_surrogate_cvd(&grid, 200, 1).expect("surrogate generation");
        let params = grid.data().clone();
        (snaps.into_data(), params)
    })
}

struct SurrogateFit {
    pipeline: Pipeline<f64>,
    train: Vec<usize>,
    test: Vec<usize>,
}

fn take_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |r, c| m[(rows[r], c)])
}

fn surrogate_fit() -> &'static SurrogateFit {
    static FIT: OnceLock<SurrogateFit> = OnceLock::new();
    FIT.get_or_init(|| {
        let (snaps, params) = surrogate_data();
        let (train, test) = holdout_split(snaps.nrows(), 0.1, 7).expect("split");
        let train_snaps = take_rows(snaps, &train);
        let train_params = take_rows(params, &train);
        let options = PipelineOptions {
            // half the median pairwise distance resolves the three box
            // directions without mixing in their harmonics; the same factor
            // on the regression stages keeps the fits local
            bandwidth_multiplier: 0.5,
            latent_bandwidth_multiplier: 0.5,
            params_bandwidth_multiplier: 0.5,
            partial_bandwidth_multiplier: 0.5,
            partial_mask_size: Some(7),
            ..PipelineOptions::default()
        };
        let (pipeline, _) =
            fit_pipeline(&train_snaps, Some(&train_params), &options).expect("surrogate fit");
        SurrogateFit { pipeline, train, test }
    })
}

fn slow_manifold_data() -> &'static DMatrix<f64> {
    static DATA: OnceLock<DMatrix<f64>> = OnceLock::new();
    DATA.get_or_init(|| {
        generate_slow_manifold(0.01, 1000, 0)
            .expect("slow-manifold generation")
            .into_data()
    })
}

struct SlowFit {
    pipeline: Pipeline<f64>,
    train: Vec<usize>,
    test: Vec<usize>,
}

fn slow_manifold_fit() -> &'static SlowFit {
    static FIT: OnceLock<SlowFit> = OnceLock::new();
    FIT.get_or_init(|| {
        let snaps = slow_manifold_data();
        let (train, test) = holdout_split(snaps.nrows(), 0.1, 7).expect("split");
        let train_snaps = take_rows(snaps, &train);
        let options = PipelineOptions {
            // the kernel must resolve the sharp hook where the fast approach
            // meets the slow manifold, and the one-dimensional inverse
            // regression needs a bandwidth far below the latent spread to
            // reproduce the state on both sides of it
            bandwidth_multiplier: 0.4,
            latent_bandwidth_multiplier: 0.05,
            partial_bandwidth_multiplier: 0.1,
            regression_bandwidth_factor: 0.15,
            delta: 1e-10,
            // observe the full two-dimensional state: the comparison against
            // POD is then purely about the representation, not the mask
            partial_mask: Some(ObservationMask::new(vec![0, 1], 2).expect("mask")),
            ..PipelineOptions::default()
        };
        let (pipeline, _) = fit_pipeline(&train_snaps, None, &options).expect("slow-manifold fit");
        SlowFit { pipeline, train, test }
    })
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    cov / (va.sqrt() * vb.sqrt())
}

/// Midrank transform followed by Pearson on the ranks.
fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].partial_cmp(&v[j]).unwrap());
        let mut out = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let rank = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                out[k] = rank;
            }
            i = j + 1;
        }
        out
    }
    pearson(&ranks(a), &ranks(b))
}

/// Relative Frobenius error of reconstructing every row of `x` through the
/// basis at its full retained rank.
fn pod_frobenius_error(basis: &gappy_dmap::gappy_pod::PODBasis<f64>, x: &DMatrix<f64>) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..x.nrows() {
        let row = x.row(i).transpose();
        let rec = basis.project(&row).expect("projection");
        num += (&rec - &row).norm_squared();
        den += row.norm_squared();
    }
    (num / den).sqrt()
}

#[test]
fn criterion_1_operator_invariants() {
    let start = Instant::now();

    // two different generators, both at N <= 1000
    let slow = slow_manifold_data().clone();
    let grid = parameter_grid::<f64>([(487.0, 501.0), (7.97e-6, 8.87e-6), (1383.0, 1463.0)], [6, 5, 4])
        .expect("grid");
    let surr = generate_surrogate_cvd(&grid, 40, 1).expect("surrogate").into_data();

    for (name, data) in [("slow-manifold", &slow), ("surrogate", &surr)] {
        let eps = kernel::median_bandwidth(data, 1.0).expect("bandwidth");
        let config = KernelConfig::new(eps).expect("config");
        let op = kernel::markov_operator(data, &config).expect("operator");

        // row-stochasticity, summed directly off the matrix
        let mut worst_sum = 0.0f64;
        for i in 0..op.kernel.nrows() {
            let s: f64 = op.kernel.row(i).iter().sum();
            worst_sum = worst_sum.max((s - 1.0).abs());
        }
        assert!(
            worst_sum <= ROW_SUM_TOL,
            "ACCEPTANCE 1: FAIL ({name}: max row-sum deviation {worst_sum:.3e} > {ROW_SUM_TOL:.0e})"
        );

        let model = dmaps::fit(data, &config, dmaps::default_n_pairs(data.nrows())).expect("fit");
        let lam1 = model.eigenvalues[0];
        assert!(
            (lam1 - 1.0).abs() <= LEADING_EIGENVALUE_TOL,
            "ACCEPTANCE 1: FAIL ({name}: leading eigenvalue {lam1} differs from 1 by {:.3e})",
            (lam1 - 1.0).abs()
        );

        // residuals of every retained eigenpair against the explicit matrix
        let mut worst_resid = 0.0f64;
        for k in 0..model.n_pairs() {
            let phi = model.eigenvectors.column(k);
            let r = &op.kernel * phi - phi * model.eigenvalues[k];
            worst_resid = worst_resid.max(r.norm());
        }
        assert!(
            worst_resid <= EIGEN_RESIDUAL_TOL,
            "ACCEPTANCE 1: FAIL ({name}: max eigen-residual {worst_resid:.3e} > {EIGEN_RESIDUAL_TOL:.0e})"
        );

        // harmonics keep an orthonormal mode basis
        let gh = gh_fit(data, data, eps, gappy_dmap::harmonics::default_delta()).expect("gh fit");
        let gram = gh.psi.transpose() * &gh.psi;
        let mut worst_gram = 0.0f64;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let want = if i == j { 1.0 } else { 0.0 };
                worst_gram = worst_gram.max((gram[(i, j)] - want).abs());
            }
        }
        assert!(
            worst_gram <= ORTHONORMALITY_TOL,
            "ACCEPTANCE 1: FAIL ({name}: mode-basis orthonormality defect {worst_gram:.3e} > {ORTHONORMALITY_TOL:.0e})"
        );
    }

    check_budget(1, start, BUDGET_1);
    println!(
        "ACCEPTANCE 1: PASS — row sums, leading eigenvalue, eigen-residuals, and mode orthonormality hold on both generators ({:.1?})",
        start.elapsed()
    );
}

#[test]
fn criterion_2_small_instance_oracles() -> Result<()> {
    let start = Instant::now();

    // four points in the plane, spread enough that nothing degenerates
    let x: DMatrix<f64> = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 1.0, 0.2, 0.4, 1.1, 1.3, 0.9]);
    let eps = 2.0f64;

    // kernel matrix against a direct double loop
    let w = kernel::pairwise_affinity(&x, eps)?;
    let mut w_ref: DMatrix<f64> = DMatrix::zeros(4, 4);
    for i in 0..4 {
        for j in 0..4 {
            let dx = x[(i, 0)] - x[(j, 0)];
            let dy = x[(i, 1)] - x[(j, 1)];
            w_ref[(i, j)] = (-((dx * dx + dy * dy) / (eps * eps))).exp();
        }
    }
    let kernel_diff = (&w - &w_ref).abs().max();
    assert!(
        kernel_diff <= ORACLE_TOL,
        "ACCEPTANCE 2: FAIL (kernel matrix differs from brute force by {kernel_diff:.3e})"
    );

    // density then Markov normalization, written out longhand
    let config = KernelConfig::new(eps)?;
    let op = kernel::markov_operator(&x, &config)?;
    let p: Vec<f64> = (0..4).map(|i| w_ref.row(i).iter().sum()).collect();
    let mut k_ref: DMatrix<f64> = DMatrix::zeros(4, 4);
    for i in 0..4 {
        for j in 0..4 {
            k_ref[(i, j)] = w_ref[(i, j)] / (p[i] * p[j]);
        }
    }
    for i in 0..4 {
        let d: f64 = k_ref.row(i).iter().sum();
        for j in 0..4 {
            k_ref[(i, j)] /= d;
        }
    }
    let markov_diff = (&op.kernel - &k_ref).abs().max();
    assert!(
        markov_diff <= ORACLE_TOL,
        "ACCEPTANCE 2: FAIL (Markov matrix differs from brute force by {markov_diff:.3e})"
    );

    // Nystrom extension of a new point, same arithmetic spelled out
    let model = dmaps::fit(&x, &config, 3)?;
    let q = [0.7f64, 0.5f64];
    let got = model.nystrom_extend(&q)?;
    let wq: Vec<f64> = (0..4)
        .map(|i| {
            let dx = q[0] - x[(i, 0)];
            let dy = q[1] - x[(i, 1)];
            (-((dx * dx + dy * dy) / (eps * eps))).exp()
        })
        .collect();
    let p_new: f64 = wq.iter().sum();
    let mut row: Vec<f64> = (0..4).map(|i| wq[i] / (p_new * p[i])).collect();
    let row_sum: f64 = row.iter().sum();
    for v in &mut row {
        *v /= row_sum;
    }
    for k in 0..3 {
        let mut val = 0.0;
        for i in 0..4 {
            val += row[i] * model.eigenvectors[(i, k)];
        }
        val /= model.eigenvalues[k];
        assert!(
            (val - got[k]).abs() <= ORACLE_TOL,
            "ACCEPTANCE 2: FAIL (Nystrom coordinate {k} differs from brute force by {:.3e})",
            (val - got[k]).abs()
        );
    }

    // harmonics with every mode retained reduce to kernel interpolation,
    // so a direct linear solve is an independent oracle
    let targets: DMatrix<f64> = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.5, 1.0, -0.2, 0.3, 0.8, -1.0]);
    let gh = gh_fit(&x, &targets, eps, 1e-12)?;
    assert_eq!(gh.retained(), 4, "tiny well-conditioned fit keeps all modes");
    let ext = gh.extend(&q)?;
    let coeffs = w_ref
        .clone()
        .lu()
        .solve(&targets)
        .expect("4x4 affinity matrix is invertible");
    for c in 0..2 {
        let mut val = 0.0;
        for i in 0..4 {
            val += wq[i] * coeffs[(i, c)];
        }
        assert!(
            (val - ext.values[c]).abs() <= ORACLE_TOL,
            "ACCEPTANCE 2: FAIL (harmonic extension column {c} differs from the interpolation oracle by {:.3e})",
            (val - ext.values[c]).abs()
        );
    }

    // gappy solve at rank 2 with two known entries: Cramer's rule by hand
    let snaps: DMatrix<f64> =
        DMatrix::from_row_slice(4, 3, &[1.0, 0.1, 0.0, 0.2, 1.1, 0.3, -0.4, 0.5, 1.2, 0.9, -0.3, 0.4]);
    let basis = pod_fit(&snaps, Truncation::Rank(2))?;
    let mask = ObservationMask::new(vec![0, 2], 3)?;
    let full: DVector<f64> = DVector::from_vec(vec![0.6, -0.2, 0.9]);
    let got = gappy_reconstruct(&basis, &mask, &full)?;
    let a11 = basis.u[(0, 0)];
    let a12 = basis.u[(0, 1)];
    let a21 = basis.u[(2, 0)];
    let a22 = basis.u[(2, 1)];
    let det = a11 * a22 - a12 * a21;
    let c1 = (full[0] * a22 - a12 * full[2]) / det;
    let c2 = (a11 * full[2] - full[0] * a21) / det;
    for (i, want) in [(0usize, c1), (1usize, c2)] {
        assert!(
            (got.coefficients[i] - want).abs() <= ORACLE_TOL,
            "ACCEPTANCE 2: FAIL (gappy coefficient {i} differs from Cramer by {:.3e})",
            (got.coefficients[i] - want).abs()
        );
    }
    for i in 0..3 {
        let want = basis.u[(i, 0)] * c1 + basis.u[(i, 1)] * c2;
        assert!(
            (got.x_rec[i] - want).abs() <= ORACLE_TOL,
            "ACCEPTANCE 2: FAIL (gappy reconstruction entry {i} differs from Cramer by {:.3e})",
            (got.x_rec[i] - want).abs()
        );
    }

    check_budget(2, start, BUDGET_2);
    println!(
        "ACCEPTANCE 2: PASS — kernel, Markov, Nystrom, harmonic extension, and gappy solves match hand arithmetic to 1e-10 ({:.1?})",
        start.elapsed()
    );
    Ok(())
}

#[test]
fn criterion_3_slow_manifold_needs_one_coordinate() {
    let start = Instant::now();
    let snaps = slow_manifold_data();
    let fit = slow_manifold_fit();

    let n_selected = fit.pipeline.dmap.selected.len();
    assert_eq!(
        n_selected, 1,
        "ACCEPTANCE 3: FAIL (parsimonious selection kept {n_selected} coordinates, expected exactly 1)"
    );

    // the linear basis needs two modes for the same data
    let rank1 = pod_fit(snaps, Truncation::Rank(1)).expect("rank-1 fit");
    let rank2 = pod_fit(snaps, Truncation::Rank(2)).expect("rank-2 fit");
    let err1 = pod_frobenius_error(&rank1, snaps);
    let err2 = pod_frobenius_error(&rank2, snaps);
    assert!(
        err1 >= ONE_PERCENT,
        "ACCEPTANCE 3: FAIL (rank-1 linear reconstruction already at {:.3}%, expected >= 1%)",
        err1 * 100.0
    );
    assert!(
        err2 < ONE_PERCENT,
        "ACCEPTANCE 3: FAIL (rank-2 linear reconstruction at {:.3}%, expected < 1%)",
        err2 * 100.0
    );

    // restriction + lifting roundtrip on the held-out 10%
    let mut err_sum = 0.0;
    for &i in &fit.test {
        let row: Vec<f64> = (0..snaps.ncols()).map(|c| snaps[(i, c)]).collect();
        let latent = fit.pipeline.dmap.latent_coordinates(&row).expect("restriction");
        let lat: Vec<f64> = latent.iter().copied().collect();
        let back = fit.pipeline.inverse_gh.extend(&lat).expect("lift");
        let actual = DVector::from_vec(row);
        err_sum += relative_l2(&back.values, &actual).expect("error");
    }
    let roundtrip = err_sum / fit.test.len() as f64;
    assert!(
        roundtrip < ONE_PERCENT,
        "ACCEPTANCE 3: FAIL (holdout roundtrip error {:.3}%, expected < 1%)",
        roundtrip * 100.0
    );

    check_budget(3, start, BUDGET_3);
    println!(
        "ACCEPTANCE 3: PASS — one coordinate suffices (POD rank-1 {:.2}%, rank-2 {:.3}%, roundtrip {:.3}%) ({:.1?})",
        err1 * 100.0,
        err2 * 100.0,
        roundtrip * 100.0,
        start.elapsed()
    );
}

#[test]
fn criterion_4_surrogate_selection_matches_parameters() {
    let start = Instant::now();
    let (snaps, params) = surrogate_data();

    let eps = kernel::median_bandwidth(snaps, 0.5).expect("bandwidth");
    let config = KernelConfig::new(eps).expect("config");
    let model = dmaps::fit(snaps, &config, dmaps::default_n_pairs(snaps.nrows())).expect("fit");
    let mut report =
        parsimony::residuals(&model, 11, parsimony::default_bandwidth_factor()).expect("residuals");
    let selected =
        parsimony::apply_selection(&mut report, &SelectionRule::LargestGap).expect("selection");

    assert_eq!(
        selected.len(),
        3,
        "ACCEPTANCE 4: FAIL (gap rule selected {:?}, expected exactly 3 coordinates)",
        selected
    );

    // each selected coordinate should track exactly one physical parameter
    let mut matched_params = Vec::new();
    for &k in &selected {
        let coord: Vec<f64> = model.eigenvectors.column(k - 1).iter().copied().collect();
        let mut hits = Vec::new();
        for p in 0..params.ncols() {
            let col: Vec<f64> = params.column(p).iter().copied().collect();
            let r = pearson(&coord, &col);
            if r.abs() > PEARSON_MIN {
                hits.push((p, r));
            }
        }
        assert_eq!(
            hits.len(),
            1,
            "ACCEPTANCE 4: FAIL (coordinate {k} correlates above {PEARSON_MIN} with {} parameters: {hits:?})",
            hits.len()
        );
        matched_params.push(hits[0].0);
    }
    let mut unique = matched_params.clone();
    unique.sort_unstable();
    unique.dedup();
    assert_eq!(
        unique.len(),
        3,
        "ACCEPTANCE 4: FAIL (coordinates map onto parameters {matched_params:?}, not one-to-one)"
    );

    check_budget(4, start, BUDGET_4);
    println!(
        "ACCEPTANCE 4: PASS — gap rule selects {selected:?}, one-to-one with the three parameters ({:.1?})",
        start.elapsed()
    );
}

#[test]
fn criterion_5_pipeline_accuracy_on_holdout() {
    let start = Instant::now();
    let (snaps, params) = surrogate_data();
    let fit = surrogate_fit();
    let pipe = &fit.pipeline;
    let mask = pipe.partial_mask.as_ref().expect("partial mask");
    assert_eq!(mask.len(), 7, "fixture fits a 7-entry partial map");

    let n_test = fit.test.len() as f64;
    let mut forward_sum = 0.0;
    let mut inverse_per_param = vec![0.0; params.ncols()];
    let mut partial_sum = 0.0;
    let mut partial_partial_sum = 0.0;
    let full_mask = ObservationMask::new((0..snaps.ncols()).collect(), snaps.ncols()).expect("mask");

    for &i in &fit.test {
        let obs_row = DVector::from_fn(snaps.ncols(), |c, _| snaps[(i, c)]);
        let param_row: Vec<f64> = (0..params.ncols()).map(|c| params[(i, c)]).collect();

        let forward = pipe
            .predict_observation_from_params(&param_row)
            .expect("params to observation");
        forward_sum += relative_l2(&forward.values, &obs_row).expect("error");

        let obs_slice: Vec<f64> = obs_row.iter().copied().collect();
        let inverse = pipe
            .predict_params_from_observation(&obs_slice)
            .expect("observation to params");
        for c in 0..params.ncols() {
            inverse_per_param[c] += (inverse.values[c] - param_row[c]).abs() / param_row[c].abs();
        }

        let observed: Vec<f64> = mask.indices().iter().map(|&j| obs_row[j]).collect();
        let from_partial = pipe
            .predict_params_from_partial(&observed)
            .expect("partial to params");
        let actual_params = DVector::from_vec(param_row.clone());
        partial_sum += relative_l2(&from_partial.values, &actual_params).expect("error");
        assert!(from_partial.whitney_ok, "7 observations cover 2*3+1");

        let recon = pipe
            .predict_partial_from_partial(&observed, &full_mask)
            .expect("partial to partial");
        partial_partial_sum += relative_l2(&recon.values, &obs_row).expect("error");
    }

    let forward_err = forward_sum / n_test;
    assert!(
        forward_err < ONE_PERCENT,
        "ACCEPTANCE 5: FAIL (params-to-observation error {:.3}%, expected < 1%)",
        forward_err * 100.0
    );
    for (c, sum) in inverse_per_param.iter().enumerate() {
        let err = sum / n_test;
        assert!(
            err < ONE_PERCENT,
            "ACCEPTANCE 5: FAIL (parameter {} recovered at {:.3}% error, expected < 1%)",
            c + 1,
            err * 100.0
        );
    }
    let partial_err = partial_sum / n_test;
    assert!(
        partial_err < ONE_PERCENT,
        "ACCEPTANCE 5: FAIL (7-entry partial-to-params error {:.3}%, expected < 1%)",
        partial_err * 100.0
    );
    let pp_err = partial_partial_sum / n_test;
    assert!(
        pp_err < ONE_PERCENT,
        "ACCEPTANCE 5: FAIL (partial-to-partial error {:.3}%, expected < 1%)",
        pp_err * 100.0
    );

    // two observed entries sit below the embedding threshold for a
    // three-dimensional latent space and must degrade the inversion hard
    let train_snaps = take_rows(snaps, &fit.train);
    let latent = pipe.dmap.latent_training().expect("latent training");
    let mask2 = seeded_mask(snaps.ncols(), 2, 0).expect("mask");
    let inputs2 = masked_columns(&train_snaps, &mask2);
    // same bandwidth factor as the fixture's 7-entry partial stage
    let bw2 = kernel::median_bandwidth(&inputs2, 0.5).expect("bandwidth");
    let partial2 = gh_fit_in(
        InputSpace::Ambient,
        &inputs2,
        &latent,
        bw2,
        gappy_dmap::harmonics::default_delta(),
    )
    .expect("2-entry fit");
    let params_back = pipe.params_gh.as_ref().expect("params map");
    let mut sum2 = 0.0;
    for &i in &fit.test {
        let observed: Vec<f64> = mask2.indices().iter().map(|&j| snaps[(i, j)]).collect();
        let lat = partial2.extend(&observed).expect("extension");
        let lat_slice: Vec<f64> = lat.values.iter().copied().collect();
        let rec = params_back.extend(&lat_slice).expect("params");
        let actual = DVector::from_fn(params.ncols(), |c, _| params[(i, c)]);
        sum2 += relative_l2(&rec.values, &actual).expect("error");
    }
    let err2 = sum2 / n_test;
    assert!(
        err2 >= WHITNEY_ERROR_FACTOR * partial_err,
        "ACCEPTANCE 5: FAIL (2-entry error {:.3}% is not >= {WHITNEY_ERROR_FACTOR}x the 7-entry error {:.3}%)",
        err2 * 100.0,
        partial_err * 100.0
    );

    check_budget(5, start, BUDGET_5);
    println!(
        "ACCEPTANCE 5: PASS — forward {:.3}%, per-parameter <= {:.3}%, 7-entry partial {:.3}%, partial-to-partial {:.3}%, 2-entry {:.2}% ({:.1?})",
        forward_err * 100.0,
        inverse_per_param
            .iter()
            .map(|s| s / n_test)
            .fold(0.0f64, f64::max)
            * 100.0,
        partial_err * 100.0,
        pp_err * 100.0,
        err2 * 100.0,
        start.elapsed()
    );
}

#[test]
fn criterion_6_masked_conditioning_drives_error() {
    let start = Instant::now();
    let (snaps, _) = surrogate_data();
    let fit = surrogate_fit();

    let train_snaps = take_rows(snaps, &fit.train);
    let test_snaps = take_rows(snaps, &fit.test);
    let basis = pod_fit(&train_snaps, Truncation::Rank(3)).expect("rank-3 fit");

    let masks: Vec<ObservationMask> = (0..200)
        .map(|id| seeded_mask(snaps.ncols(), 3, 1000 + id).expect("mask"))
        .collect();
    let rows = mask_sweep(&basis, &masks, &test_snaps).expect("sweep");
    assert!(rows.len() >= 100, "most masks stay well posed, got {}", rows.len());

    let conds: Vec<f64> = rows.iter().map(|r| r.condition_number).collect();
    let errs: Vec<f64> = rows.iter().map(|r| r.mean_error).collect();
    let cond_min = conds.iter().cloned().fold(f64::INFINITY, f64::min);
    let cond_max = conds.iter().cloned().fold(0.0f64, f64::max);
    let spread = cond_max / cond_min;
    assert!(
        spread >= CONDITION_SPREAD_MIN,
        "ACCEPTANCE 6: FAIL (condition-number spread {spread:.1e} < {CONDITION_SPREAD_MIN:.0e})"
    );

    let rho = spearman(&conds, &errs);
    assert!(
        rho > SPEARMAN_MIN,
        "ACCEPTANCE 6: FAIL (Spearman rho between conditioning and error is {rho:.3}, expected > {SPEARMAN_MIN})"
    );

    check_budget(6, start, BUDGET_6);
    println!(
        "ACCEPTANCE 6: PASS — cond(A) spans {spread:.1e} across {} masks, Spearman rho {rho:.2} ({:.1?})",
        rows.len(),
        start.elapsed()
    );
}

#[test]
fn criterion_7_equal_information_comparison() {
    let start = Instant::now();

    // surrogate: 3 latent coordinates against a rank-3 linear basis through
    // the same 7 observed entries
    let (snaps, _) = surrogate_data();
    let surr = surrogate_fit();
    let train_snaps = take_rows(snaps, &surr.train);
    let test_snaps = take_rows(snaps, &surr.test);
    assert_eq!(surr.pipeline.n_latent(), 3, "surrogate keeps 3 coordinates");
    let basis3 = pod_fit(&train_snaps, Truncation::Rank(3)).expect("rank-3 fit");
    let mask7 = surr.pipeline.partial_mask.as_ref().expect("mask");
    let report = compare_gappy(&surr.pipeline, &basis3, mask7, &test_snaps).expect("comparison");
    assert!(
        report.mean_dmap_error <= report.mean_pod_error,
        "ACCEPTANCE 7: FAIL (surrogate: manifold {:.3}% vs linear {:.3}%, expected <=)",
        report.mean_dmap_error * 100.0,
        report.mean_pod_error * 100.0
    );

    // slow manifold: one coordinate against one mode, full state observed
    let slow_snaps = slow_manifold_data();
    let slow = slow_manifold_fit();
    let slow_train = take_rows(slow_snaps, &slow.train);
    let slow_test = take_rows(slow_snaps, &slow.test);
    assert_eq!(slow.pipeline.n_latent(), 1, "slow manifold keeps 1 coordinate");
    let basis1 = pod_fit(&slow_train, Truncation::Rank(1)).expect("rank-1 fit");
    let mask_full = slow.pipeline.partial_mask.as_ref().expect("mask");
    let slow_report =
        compare_gappy(&slow.pipeline, &basis1, mask_full, &slow_test).expect("comparison");
    assert!(
        slow_report.mean_pod_error >= SLOW_MANIFOLD_POD_FACTOR * slow_report.mean_dmap_error,
        "ACCEPTANCE 7: FAIL (slow manifold: linear {:.3}% is not >= {SLOW_MANIFOLD_POD_FACTOR}x manifold {:.3}%)",
        slow_report.mean_pod_error * 100.0,
        slow_report.mean_dmap_error * 100.0
    );

    check_budget(7, start, BUDGET_7);
    println!(
        "ACCEPTANCE 7: PASS — surrogate {:.3}% vs {:.3}%, slow manifold {:.3}% vs {:.3}% ({:.1?})",
        report.mean_dmap_error * 100.0,
        report.mean_pod_error * 100.0,
        slow_report.mean_dmap_error * 100.0,
        slow_report.mean_pod_error * 100.0,
        start.elapsed()
    );
}

#[test]
fn criterion_8_determinism_and_persistence() {
    let start = Instant::now();

    let grid = parameter_grid::<f64>([(487.0, 501.0), (7.97e-6, 8.87e-6), (1383.0, 1463.0)], [4, 4, 5])
        .expect("grid");
    let gen = || {
        generate_surrogate_cvd::<f64>(&grid, 30, 42)
            .expect("generation")
            .into_data()
    };
    let snaps_a = gen();
    let snaps_b = gen();
    assert_eq!(
        persist::matrix_hash(&snaps_a),
        persist::matrix_hash(&snaps_b),
        "ACCEPTANCE 8: FAIL (same seed produced different data)"
    );

    let params = grid.data().clone();
    let options = PipelineOptions {
        partial_mask_size: Some(7),
        ..PipelineOptions::default()
    };
    let (pipe_a, _) = fit_pipeline(&snaps_a, Some(&params), &options).expect("fit");
    let (pipe_b, _) = fit_pipeline(&snaps_b, Some(&params), &options).expect("fit");

    let dir = tempfile::tempdir().expect("tempdir");
    let path_a = dir.path().join("a.model");
    let path_b = dir.path().join("b.model");
    persist::save_pipeline(&path_a, &pipe_a).expect("save");
    persist::save_pipeline(&path_b, &pipe_b).expect("save");
    let bytes_a = std::fs::read(&path_a).expect("read");
    let bytes_b = std::fs::read(&path_b).expect("read");
    assert_eq!(
        bytes_a, bytes_b,
        "ACCEPTANCE 8: FAIL (identical fits serialized to different bytes)"
    );

    // a POD basis saved twice must agree as well
    let basis = pod_fit_with(&snaps_a, Truncation::Rank(3), &PodOptions::default()).expect("fit");
    let pod_a = dir.path().join("pa.model");
    let pod_b = dir.path().join("pb.model");
    persist::save_pod_basis(&pod_a, &basis).expect("save");
    persist::save_pod_basis(&pod_b, &basis).expect("save");
    assert_eq!(
        std::fs::read(&pod_a).expect("read"),
        std::fs::read(&pod_b).expect("read"),
        "ACCEPTANCE 8: FAIL (basis serialization is not deterministic)"
    );

    // loading back preserves every prediction bit for bit
    let loaded = persist::load_pipeline(&path_a).expect("load");
    let mut checked = 0usize;
    for i in (0..snaps_a.nrows()).step_by(7) {
        let row: Vec<f64> = (0..snaps_a.ncols()).map(|c| snaps_a[(i, c)]).collect();
        let before = pipe_a.predict_params_from_observation(&row).expect("predict");
        let after = loaded.predict_params_from_observation(&row).expect("predict");
        for c in 0..before.values.len() {
            assert_eq!(
                before.values[c].to_bits(),
                after.values[c].to_bits(),
                "ACCEPTANCE 8: FAIL (prediction differs after reload at row {i}, component {c})"
            );
        }
        let p_row: Vec<f64> = (0..params.ncols()).map(|c| params[(i, c)]).collect();
        let fwd_before = pipe_a.predict_observation_from_params(&p_row).expect("predict");
        let fwd_after = loaded.predict_observation_from_params(&p_row).expect("predict");
        for c in 0..fwd_before.values.len() {
            assert_eq!(
                fwd_before.values[c].to_bits(),
                fwd_after.values[c].to_bits(),
                "ACCEPTANCE 8: FAIL (forward prediction differs after reload at row {i})"
            );
        }
        checked += 1;
    }
    assert!(checked > 5);

    check_budget(8, start, BUDGET_8);
    println!(
        "ACCEPTANCE 8: PASS — refits and resaves are byte-identical, reloads predict bit-for-bit ({:.1?})",
        start.elapsed()
    );
}
