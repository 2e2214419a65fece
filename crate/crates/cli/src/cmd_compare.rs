//! `gdmap compare`: reconstruction comparisons and sweeps.
//!
//! * `equal` scores gappy POD against the partial-observation diffusion-map
//!   route on the same mask, row by row.
//! * `mask-sweep` scores seeded random masks by condition number, residual
//!   at the known entries, and full-vector reconstruction error.
//! * `rank-sweep` reports the captured-energy percentage per retained rank,
//!   and reconstruction error when a mask and test rows are given.

use std::path::PathBuf;

use gappy_dmap::gappy_pod::{
    energy_fraction, energy_fraction_squared, gappy_reconstruct, pod_fit_with, PodOptions,
    Truncation, RANK_FLOOR,
};
use gappy_dmap::io::load_matrix_auto;
use gappy_dmap::persist::{inspect, load_pipeline, load_pod_basis};
use gappy_dmap::workflows::{compare_gappy, mask_sweep, relative_l2, seeded_mask, Pipeline};
use gappy_dmap::{Error, Result};
use nalgebra::DMatrix;

use crate::config::{resolve, resolve_bool, resolve_opt, resolve_string, ConfigFile, Resolved};
use crate::report::{cell_f64, cell_mask, Report};
use crate::{parse, CompareArgs};

fn required_path(flag: Option<PathBuf>, cfg: &ConfigFile, key: &str) -> Result<PathBuf> {
    flag.or_else(|| cfg.get_string(key).map(PathBuf::from))
        .ok_or_else(|| Error::invalid_argument(format!("--{key} is required")))
}

fn expect_kind(path: &PathBuf, want: &str) -> Result<()> {
    let info = inspect(path)?;
    if info.kind != want {
        return Err(Error::invalid_argument(format!(
            "{} is a {} container, expected {want}",
            path.display(),
            info.kind
        )));
    }
    Ok(())
}

pub fn run(args: CompareArgs) -> Result<()> {
    let cfg = ConfigFile::load(args.config.as_deref())?;
    let mode = resolve_string(args.mode.clone(), &cfg, "mode", "equal")?;
    match mode.as_str() {
        "equal" => equal_cmd(args, &cfg),
        "mask-sweep" => mask_sweep_cmd(args, &cfg),
        "rank-sweep" => rank_sweep_cmd(args, &cfg),
        other => Err(Error::invalid_argument(format!(
            "--mode must be equal, mask-sweep, or rank-sweep, got '{other}'"
        ))),
    }
}

fn equal_cmd(args: CompareArgs, cfg: &ConfigFile) -> Result<()> {
    let pipeline_path = required_path(args.pipeline, cfg, "pipeline")?;
    let pod_path = required_path(args.pod, cfg, "pod")?;
    let input_path = required_path(args.input, cfg, "input")?;
    let out_path = required_path(args.out, cfg, "out")?;
    expect_kind(&pipeline_path, "pipeline")?;
    expect_kind(&pod_path, "pod")?;

    let pipe: Pipeline<f64> = load_pipeline(&pipeline_path)?;
    let basis = load_pod_basis::<f64>(&pod_path)?;
    let test: DMatrix<f64> = load_matrix_auto(&input_path)?;
    let mask = pipe.partial_mask.clone().ok_or_else(|| {
        Error::invalid_argument("the pipeline was fitted without a partial-observation map")
    })?;

    let mut resolved = Resolved::new("compare");
    resolved.put("mode", "equal");
    let config_hash = resolved.hash();

    let report = compare_gappy(&pipe, &basis, &mask, &test)?;

    let mut csv = Report::new(&config_hash);
    csv.comment("mask", cell_mask(&mask.one_based()));
    csv.comment("condition_number", cell_f64(report.condition_number));
    csv.comment("mean_pod_error", cell_f64(report.mean_pod_error));
    csv.comment("mean_dmap_error", cell_f64(report.mean_dmap_error));
    csv.header(&["row", "pod_rel_l2", "dmap_rel_l2"]);
    for (i, row) in report.rows.iter().enumerate() {
        csv.row(&[
            (i + 1).to_string(),
            cell_f64(row.pod_error),
            cell_f64(row.dmap_error),
        ]);
    }
    csv.write(&out_path)?;
    println!(
        "wrote {} (mean pod {}, mean dmap {})",
        out_path.display(),
        report.mean_pod_error,
        report.mean_dmap_error
    );
    Ok(())
}

fn mask_sweep_cmd(args: CompareArgs, cfg: &ConfigFile) -> Result<()> {
    let pod_path = required_path(args.pod, cfg, "pod")?;
    let input_path = required_path(args.input, cfg, "input")?;
    let out_path = required_path(args.out, cfg, "out")?;
    expect_kind(&pod_path, "pod")?;

    let basis = load_pod_basis::<f64>(&pod_path)?;
    let test: DMatrix<f64> = load_matrix_auto(&input_path)?;
    let mask_size = resolve(args.mask_size, cfg, "mask-size", 3)?;
    let n_masks = resolve(args.n_masks, cfg, "n-masks", 50)?;
    let seed = resolve(args.seed, cfg, "seed", 0)?;
    if n_masks == 0 {
        return Err(Error::invalid_argument("n-masks must be at least 1"));
    }

    let mut resolved = Resolved::new("compare");
    resolved.put("mode", "mask-sweep");
    resolved.put("mask-size", mask_size);
    resolved.put("n-masks", n_masks);
    resolved.put("seed", seed);
    let config_hash = resolved.hash();

    let dim = basis.state_dim();
    let mut csv = Report::new(&config_hash);
    csv.comment("pod", pod_path.display());
    csv.comment("rank", basis.rank);
    csv.header(&[
        "mask_id",
        "indices",
        "cond",
        "known_residual",
        "mean_rel_l2",
    ]);
    let mut written = 0usize;
    for id in 0..n_masks {
        let mask = seeded_mask(dim, mask_size, seed.wrapping_add(id as u64))?;
        // One mask per call keeps the id attached; ill-posed masks come back
        // as an empty row set and are skipped, like the library sweep does.
        let rows = mask_sweep(&basis, std::slice::from_ref(&mask), &test)?;
        let Some(row) = rows.first() else { continue };
        csv.row(&[
            (id + 1).to_string(),
            cell_mask(&row.mask.one_based()),
            cell_f64(row.condition_number),
            cell_f64(row.mean_known_residual),
            cell_f64(row.mean_error),
        ]);
        written += 1;
    }
    csv.comment("masks_scored", written);
    csv.comment("masks_skipped_ill_posed", n_masks - written);
    csv.write(&out_path)?;
    println!(
        "wrote {} ({} of {} masks scored)",
        out_path.display(),
        written,
        n_masks
    );
    Ok(())
}

fn rank_sweep_cmd(args: CompareArgs, cfg: &ConfigFile) -> Result<()> {
    let input_path = required_path(args.input, cfg, "input")?;
    let out_path = required_path(args.out, cfg, "out")?;
    let snaps: DMatrix<f64> = load_matrix_auto(&input_path)?;

    let options = PodOptions {
        center: resolve_bool(args.center, cfg, "center", false)?,
        standardize: resolve_bool(args.standardize, cfg, "standardize", false)?,
        squared_energy: resolve_bool(args.squared_energy, cfg, "squared-energy", false)?,
    };
    let mask_raw = args.mask.or_else(|| cfg.get_string("mask"));
    let test_path = args.test.or_else(|| cfg.get_string("test").map(PathBuf::from));
    let max_rank_flag = resolve_opt(args.max_rank, cfg, "max-rank")?;

    // The full spectrum of any fit bounds the achievable rank.
    let probe = pod_fit_with(&snaps, Truncation::Rank(1), &options)?;
    let sv = &probe.singular_values;
    let achievable = (0..sv.len())
        .take_while(|&i| sv[i] > sv[0] * RANK_FLOOR)
        .count();
    let max_rank = max_rank_flag.unwrap_or_else(|| achievable.min(10));
    if max_rank == 0 || max_rank > achievable {
        return Err(Error::invalid_argument(format!(
            "max-rank must lie in [1, {achievable}] for these snapshots, got {max_rank}"
        )));
    }

    let mut resolved = Resolved::new("compare");
    resolved.put("mode", "rank-sweep");
    resolved.put("max-rank", max_rank);
    resolved.put("center", options.center);
    resolved.put("standardize", options.standardize);
    resolved.put("squared-energy", options.squared_energy);
    resolved.put_opt("mask", &mask_raw);
    let config_hash = resolved.hash();

    let scored: Option<(gappy_dmap::gappy_pod::ObservationMask, DMatrix<f64>)> =
        match (&mask_raw, &test_path) {
            (Some(raw), Some(tp)) => {
                let mask = parse::mask_from_flag(raw, snaps.ncols())?;
                let test: DMatrix<f64> = load_matrix_auto(tp)?;
                if test.ncols() != snaps.ncols() {
                    return Err(Error::invalid_argument(format!(
                        "test rows have {} columns, snapshots have {}",
                        test.ncols(),
                        snaps.ncols()
                    )));
                }
                Some((mask, test))
            }
            (None, None) => None,
            _ => {
                return Err(Error::invalid_argument(
                    "rank-sweep scoring needs both --mask and --test",
                ))
            }
        };

    let mut csv = Report::new(&config_hash);
    csv.comment("achievable_rank", achievable);
    if scored.is_some() {
        csv.header(&["rank", "energy_percent", "mean_rel_l2"]);
    } else {
        csv.header(&["rank", "energy_percent"]);
    }
    for rank in 1..=max_rank {
        let energy = if options.squared_energy {
            energy_fraction_squared(sv, rank)?
        } else {
            energy_fraction(sv, rank)?
        };
        let mut cells = vec![rank.to_string(), cell_f64(energy)];
        if let Some((mask, test)) = &scored {
            let basis = pod_fit_with(&snaps, Truncation::Rank(rank), &options)?;
            let mut sum = 0.0;
            let mut ok = true;
            for i in 0..test.nrows() {
                let actual = test.row(i).transpose();
                match gappy_reconstruct(&basis, mask, &actual) {
                    Ok(res) => sum += relative_l2(&res.x_rec, &actual)?,
                    Err(Error::IllPosed(_)) => {
                        ok = false;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            cells.push(if ok && test.nrows() > 0 {
                cell_f64(sum / test.nrows() as f64)
            } else {
                String::new()
            });
        }
        csv.row(&cells);
    }
    csv.write(&out_path)?;
    println!("wrote {} (ranks 1..={max_rank})", out_path.display());
    Ok(())
}
