//! `gdmap fit`: fit and persist models.
//!
//! `--what pipeline` (default) fits the full prediction pipeline: diffusion
//! map, residual-based coordinate selection, and the harmonics maps in and
//! out of the latent space, plus an optional POD basis when a truncation
//! flag is given. `--what dmap` stops after the diffusion map and selection.
//! `--what gh` fits one harmonics model between two matrix files. `--what
//! pod` fits a POD basis alone.

use std::path::{Path, PathBuf};

use gappy_dmap::gappy_pod::{pod_fit_with, PodOptions};
use gappy_dmap::io::load_matrix_auto;
use gappy_dmap::parsimony::{self, apply_selection};
use gappy_dmap::persist::{
    matrix_hash, save_dmap_model_tagged, save_gh_model_tagged, save_pipeline_tagged,
    save_pod_basis_tagged,
};
use gappy_dmap::workflows::{fit_pipeline, holdout_split, Pipeline, PipelineOptions};
use gappy_dmap::{dmaps, harmonics, kernel, Error, Result};
use nalgebra::DMatrix;

use crate::cmd_generate::require_dir;
use crate::config::{
    resolve, resolve_bool, resolve_opt, resolve_opt_string, resolve_string, ConfigFile, Resolved,
};
use crate::report::{cell_f64, Report};
use crate::{parse, FitArgs};

fn required_path(
    flag: Option<PathBuf>,
    cfg: &ConfigFile,
    key: &str,
) -> Result<PathBuf> {
    flag.or_else(|| cfg.get_string(key).map(PathBuf::from))
        .ok_or_else(|| Error::invalid_argument(format!("--{key} is required")))
}

fn take_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

fn write_residuals(
    path: &Path,
    report: &parsimony::ResidualReport<f64>,
    config_hash: &str,
) -> Result<()> {
    let mut csv = Report::new(config_hash);
    if let Some(t) = report.threshold_used {
        csv.comment("threshold_used", cell_f64(t));
    }
    csv.header(&["k", "r_k", "selected"]);
    for (i, &k) in report.k.iter().enumerate() {
        let flag = if report.selected.contains(&k) { "1" } else { "0" };
        csv.row(&[k.to_string(), cell_f64(report.r[i]), flag.to_string()]);
    }
    csv.write(path)
}

fn warn_underfit(pipe: &Pipeline<f64>) {
    let parts: [(&str, Option<&gappy_dmap::harmonics::GHModel<f64>>); 4] = [
        ("params-to-latent", pipe.forward_gh.as_ref()),
        ("latent-to-observation", Some(&pipe.inverse_gh)),
        ("latent-to-params", pipe.params_gh.as_ref()),
        ("partial-to-latent", pipe.partial_gh.as_ref()),
    ];
    for (name, gh) in parts {
        if let Some(gh) = gh {
            if gh.underfit {
                eprintln!(
                    "warning: {name} harmonics retained only one mode; the fit is underfitting"
                );
            }
        }
    }
}

pub fn run(args: FitArgs) -> Result<()> {
    let cfg = ConfigFile::load(args.config.as_deref())?;
    let what = resolve_string(args.what.clone(), &cfg, "what", "pipeline")?;
    let out = required_path(args.out.clone(), &cfg, "out")?;
    require_dir(&out)?;
    match what.as_str() {
        "pipeline" => fit_pipeline_cmd(args, &cfg, &out),
        "dmap" => fit_dmap_cmd(args, &cfg, &out),
        "gh" => fit_gh_cmd(args, &cfg, &out),
        "pod" => fit_pod_cmd(args, &cfg, &out),
        other => Err(Error::invalid_argument(format!(
            "--what must be pipeline, dmap, gh, or pod, got '{other}'"
        ))),
    }
}

fn fit_pipeline_cmd(args: FitArgs, cfg: &ConfigFile, out: &Path) -> Result<()> {
    let snap_path = required_path(args.snapshots, cfg, "snapshots")?;
    let params_path = args
        .params
        .or_else(|| cfg.get_string("params").map(PathBuf::from));
    let snaps: DMatrix<f64> = load_matrix_auto(&snap_path)?;
    let params: Option<DMatrix<f64>> = match &params_path {
        Some(p) => Some(load_matrix_auto(p)?),
        None => None,
    };
    if let Some(p) = &params {
        if p.nrows() != snaps.nrows() {
            return Err(Error::invalid_argument(format!(
                "parameter table has {} rows, snapshots have {}",
                p.nrows(),
                snaps.nrows()
            )));
        }
    }

    let bandwidth_multiplier = resolve(args.bandwidth_multiplier, cfg, "bandwidth-multiplier", 1.0)?;
    let density_normalize = resolve_bool(args.density_normalize, cfg, "density-normalize", true)?;
    let n_pairs = resolve_opt(args.n_pairs, cfg, "n-pairs")?;
    let k_max = resolve_opt(args.k_max, cfg, "k-max")?;
    let selection_raw = resolve_string(args.selection, cfg, "selection", "gap")?;
    let selection = parse::selection_rule(&selection_raw)?;
    let regression_factor = resolve(
        args.regression_factor,
        cfg,
        "regression-factor",
        parsimony::default_bandwidth_factor::<f64>(),
    )?;
    let delta = resolve(args.delta, cfg, "delta", harmonics::default_delta::<f64>())?;
    let latent_multiplier = resolve(args.latent_multiplier, cfg, "latent-multiplier", 1.0)?;
    let params_multiplier = resolve(args.params_multiplier, cfg, "params-multiplier", 1.0)?;
    let partial_multiplier = resolve(args.partial_multiplier, cfg, "partial-multiplier", 1.0)?;
    let partial_mask_raw = resolve_opt_string(args.partial_mask, cfg, "partial-mask")?;
    let partial_mask_size = resolve_opt(args.partial_mask_size, cfg, "partial-mask-size")?;
    let holdout_fraction = resolve_opt(args.holdout_fraction, cfg, "holdout-fraction")?;
    let seed = resolve(args.seed, cfg, "seed", 0)?;

    let mut resolved = Resolved::new("fit");
    resolved.put("what", "pipeline");
    resolved.put("bandwidth-multiplier", bandwidth_multiplier);
    resolved.put("density-normalize", density_normalize);
    resolved.put_opt("n-pairs", &n_pairs);
    resolved.put_opt("k-max", &k_max);
    resolved.put("selection", &selection_raw);
    resolved.put("regression-factor", regression_factor);
    resolved.put("delta", delta);
    resolved.put("latent-multiplier", latent_multiplier);
    resolved.put("params-multiplier", params_multiplier);
    resolved.put("partial-multiplier", partial_multiplier);
    resolved.put_opt("partial-mask", &partial_mask_raw);
    resolved.put_opt("partial-mask-size", &partial_mask_size);
    resolved.put_opt("holdout-fraction", &holdout_fraction);
    resolved.put("seed", seed);

    let partial_mask = match &partial_mask_raw {
        Some(raw) => Some(parse::mask_from_flag(raw, snaps.ncols())?),
        None => None,
    };
    let options = PipelineOptions::<f64> {
        bandwidth_multiplier,
        density_normalize,
        n_pairs,
        k_max,
        regression_bandwidth_factor: regression_factor,
        selection,
        delta,
        latent_bandwidth_multiplier: latent_multiplier,
        params_bandwidth_multiplier: params_multiplier,
        partial_bandwidth_multiplier: partial_multiplier,
        partial_mask,
        partial_mask_size,
    };

    // Optional POD companion fitted on the very same training rows.
    let pod_truncation = match (args.pod_rank, args.pod_energy, args.pod_error) {
        (None, None, None) => None,
        (r, e, err) => Some(parse::truncation(r, e, err)?),
    };
    let pod_options = PodOptions {
        center: resolve_bool(args.center, cfg, "center", false)?,
        standardize: resolve_bool(args.standardize, cfg, "standardize", false)?,
        squared_energy: resolve_bool(args.squared_energy, cfg, "squared-energy", false)?,
    };
    if let Some(t) = &pod_truncation {
        resolved.put("pod-truncation", format!("{t:?}"));
        resolved.put("center", pod_options.center);
        resolved.put("standardize", pod_options.standardize);
        resolved.put("squared-energy", pod_options.squared_energy);
    }

    let config_hash = resolved.hash();

    let (train_snaps, train_params, holdout) = match holdout_fraction {
        Some(fraction) => {
            let (train, test) = holdout_split(snaps.nrows(), fraction, seed)?;
            let train_snaps = take_rows(&snaps, &train);
            let train_params = params.as_ref().map(|p| take_rows(p, &train));
            (train_snaps, train_params, Some((train, test)))
        }
        None => (snaps.clone(), params.clone(), None),
    };

    let (pipe, report) = fit_pipeline(&train_snaps, train_params.as_ref(), &options)?;
    warn_underfit(&pipe);

    let model_path = out.join("pipeline.model");
    save_pipeline_tagged(&model_path, &pipe, Some(&config_hash))?;
    write_residuals(&out.join("residuals.csv"), &report, &config_hash)?;

    if let Some(truncation) = pod_truncation {
        let basis = pod_fit_with(&train_snaps, truncation, &pod_options)?;
        save_pod_basis_tagged(&out.join("pod.model"), &basis, Some(&config_hash))?;
        println!(
            "wrote {} (rank {}, energy {:.4}%)",
            out.join("pod.model").display(),
            basis.rank,
            basis.energy_captured
        );
    }

    if let Some((train, test)) = &holdout {
        let mut csv = Report::new(&config_hash);
        csv.comment("source", "row indices are one-based into the input files");
        csv.header(&["set", "row"]);
        for &i in train {
            csv.row(&["train".into(), (i + 1).to_string()]);
        }
        for &i in test {
            csv.row(&["test".into(), (i + 1).to_string()]);
        }
        csv.write(&out.join("holdout.csv"))?;

        let ext = snap_path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("bin")
            .to_string();
        for (name, rows) in [("train_snapshots", train), ("test_snapshots", test)] {
            let path = out.join(format!("{name}.{ext}"));
            gappy_dmap::io::save_matrix_auto(&path, &take_rows(&snaps, rows))?;
            println!("wrote {}", path.display());
        }
        if let (Some(p), Some(ppath)) = (&params, &params_path) {
            let pext = ppath
                .extension()
                .and_then(|e| e.to_str())
                .unwrap_or("csv")
                .to_string();
            let test_params = take_rows(p, test);
            let test_params_path = out.join(format!("test_params.{pext}"));
            gappy_dmap::io::save_matrix_auto(&test_params_path, &test_params)?;
            println!("wrote {}", test_params_path.display());
        }
    }

    resolved.note("dataset-hash", matrix_hash(&snaps));
    resolved.write(&out.join("fit.config"))?;

    println!(
        "wrote {} (selected coordinates: {:?}, training rows: {})",
        model_path.display(),
        pipe.dmap.selected,
        pipe.dmap.len()
    );
    Ok(())
}

fn fit_dmap_cmd(args: FitArgs, cfg: &ConfigFile, out: &Path) -> Result<()> {
    let snap_path = required_path(args.snapshots, cfg, "snapshots")?;
    let snaps: DMatrix<f64> = load_matrix_auto(&snap_path)?;

    let bandwidth_multiplier = resolve(args.bandwidth_multiplier, cfg, "bandwidth-multiplier", 1.0)?;
    let density_normalize = resolve_bool(args.density_normalize, cfg, "density-normalize", true)?;
    let n_pairs = resolve(
        args.n_pairs,
        cfg,
        "n-pairs",
        dmaps::default_n_pairs(snaps.nrows()),
    )?;
    let k_max = resolve(args.k_max, cfg, "k-max", n_pairs.min(11))?;
    let selection_raw = resolve_string(args.selection, cfg, "selection", "gap")?;
    let selection = parse::selection_rule(&selection_raw)?;
    let regression_factor = resolve(
        args.regression_factor,
        cfg,
        "regression-factor",
        parsimony::default_bandwidth_factor::<f64>(),
    )?;

    let mut resolved = Resolved::new("fit");
    resolved.put("what", "dmap");
    resolved.put("bandwidth-multiplier", bandwidth_multiplier);
    resolved.put("density-normalize", density_normalize);
    resolved.put("n-pairs", n_pairs);
    resolved.put("k-max", k_max);
    resolved.put("selection", &selection_raw);
    resolved.put("regression-factor", regression_factor);
    let config_hash = resolved.hash();

    let epsilon = kernel::median_bandwidth(&snaps, bandwidth_multiplier)?;
    let mut config = kernel::KernelConfig::new(epsilon)?;
    if !density_normalize {
        config = config.without_density_normalization();
    }
    let mut model = dmaps::fit(&snaps, &config, n_pairs)?;
    let mut report = parsimony::residuals(&model, k_max, regression_factor)?;
    let chosen = apply_selection(&mut report, &selection)?;
    model.set_selected(chosen)?;

    let model_path = out.join("dmap.model");
    save_dmap_model_tagged(&model_path, &model, Some(&config_hash))?;
    write_residuals(&out.join("residuals.csv"), &report, &config_hash)?;
    resolved.note("dataset-hash", matrix_hash(&snaps));
    resolved.write(&out.join("fit.config"))?;

    println!(
        "wrote {} (selected coordinates: {:?})",
        model_path.display(),
        model.selected
    );
    Ok(())
}

fn fit_gh_cmd(args: FitArgs, cfg: &ConfigFile, out: &Path) -> Result<()> {
    let inputs_path = required_path(args.gh_inputs, cfg, "gh-inputs")?;
    let targets_path = required_path(args.gh_targets, cfg, "gh-targets")?;
    let inputs: DMatrix<f64> = load_matrix_auto(&inputs_path)?;
    let targets: DMatrix<f64> = load_matrix_auto(&targets_path)?;

    let delta = resolve(args.delta, cfg, "delta", harmonics::default_delta::<f64>())?;
    let explicit_bandwidth = resolve_opt(args.gh_bandwidth, cfg, "gh-bandwidth")?;
    let bandwidth_multiplier =
        resolve(args.gh_bandwidth_multiplier, cfg, "gh-bandwidth-multiplier", 1.0)?;
    let bandwidth = match explicit_bandwidth {
        Some(b) => b,
        None => kernel::median_bandwidth(&inputs, bandwidth_multiplier)?,
    };

    let mut resolved = Resolved::new("fit");
    resolved.put("what", "gh");
    resolved.put("delta", delta);
    resolved.put("gh-bandwidth", bandwidth);
    let config_hash = resolved.hash();

    let model = harmonics::gh_fit(&inputs, &targets, bandwidth, delta)?;
    if model.underfit {
        eprintln!("warning: harmonics retained only one mode; the fit is underfitting");
    }
    let model_path = out.join("gh.model");
    save_gh_model_tagged(&model_path, &model, Some(&config_hash))?;
    resolved.note("input-hash", matrix_hash(&inputs));
    resolved.write(&out.join("fit.config"))?;

    println!(
        "wrote {} ({} retained modes)",
        model_path.display(),
        model.retained()
    );
    Ok(())
}

fn fit_pod_cmd(args: FitArgs, cfg: &ConfigFile, out: &Path) -> Result<()> {
    let snap_path = required_path(args.snapshots, cfg, "snapshots")?;
    let snaps: DMatrix<f64> = load_matrix_auto(&snap_path)?;

    let truncation = parse::truncation(args.pod_rank, args.pod_energy, args.pod_error)?;
    let options = PodOptions {
        center: resolve_bool(args.center, cfg, "center", false)?,
        standardize: resolve_bool(args.standardize, cfg, "standardize", false)?,
        squared_energy: resolve_bool(args.squared_energy, cfg, "squared-energy", false)?,
    };

    let mut resolved = Resolved::new("fit");
    resolved.put("what", "pod");
    resolved.put("pod-truncation", format!("{truncation:?}"));
    resolved.put("center", options.center);
    resolved.put("standardize", options.standardize);
    resolved.put("squared-energy", options.squared_energy);
    let config_hash = resolved.hash();

    let basis = pod_fit_with(&snaps, truncation, &options)?;
    let model_path = out.join("pod.model");
    save_pod_basis_tagged(&model_path, &basis, Some(&config_hash))?;
    resolved.note("dataset-hash", matrix_hash(&snaps));
    resolved.write(&out.join("fit.config"))?;

    println!(
        "wrote {} (rank {}, energy {:.4}%)",
        model_path.display(),
        basis.rank,
        basis.energy_captured
    );
    Ok(())
}
