//! `gdmap predict`: run one prediction route of a saved pipeline.
//!
//! Routes and their input row shapes:
//!
//! * `params-to-obs`: parameter vectors; predicts full snapshots.
//! * `obs-to-params`: full snapshots; predicts parameter vectors.
//! * `partial-to-params`: either full snapshots (the pipeline's mask picks
//!   the observed entries) or rows with exactly one value per mask entry.
//! * `partial-to-partial`: same input convention; predicts the entries named
//!   by `--target-mask` (default `all`, the whole snapshot).
//!
//! With `--actual`, each row gains a relative Euclidean error against the
//! matching ground-truth row and the report ends with the mean. With
//! `--training`, the run is refused unless the file's hash matches the
//! snapshots the pipeline was fitted on.

use std::path::PathBuf;

use gappy_dmap::io::load_matrix_auto;
use gappy_dmap::persist::{inspect, load_pipeline, matrix_hash};
use gappy_dmap::workflows::{relative_l2, Pipeline, Prediction};
use gappy_dmap::{Error, Result};
use nalgebra::{DMatrix, DVector};

use crate::config::{resolve_string, ConfigFile, Resolved};
use crate::report::{cell_bool, cell_f64, err_at_row, Report};
use crate::{parse, PredictArgs};

fn required_path(flag: Option<PathBuf>, cfg: &ConfigFile, key: &str) -> Result<PathBuf> {
    flag.or_else(|| cfg.get_string(key).map(PathBuf::from))
        .ok_or_else(|| Error::invalid_argument(format!("--{key} is required")))
}

fn row_slice(m: &DMatrix<f64>, i: usize) -> Vec<f64> {
    (0..m.ncols()).map(|j| m[(i, j)]).collect()
}

/// Turns an input row into the observed-value vector of the pipeline mask:
/// full-width rows are masked down, mask-width rows pass through.
fn observed_values(
    row: &[f64],
    mask_indices: &[usize],
    state_dim: usize,
) -> Result<Vec<f64>> {
    if row.len() == state_dim {
        return Ok(mask_indices.iter().map(|&j| row[j]).collect());
    }
    if row.len() == mask_indices.len() {
        return Ok(row.to_vec());
    }
    Err(Error::invalid_argument(format!(
        "input rows must have {} columns (full snapshots) or {} (one per mask entry), got {}",
        state_dim,
        mask_indices.len(),
        row.len()
    )))
}

pub fn run(args: PredictArgs) -> Result<()> {
    let cfg = ConfigFile::load(args.config.as_deref())?;
    let pipeline_path = required_path(args.pipeline, &cfg, "pipeline")?;
    let input_path = required_path(args.input, &cfg, "input")?;
    let out_path = required_path(args.out, &cfg, "out")?;
    let route = resolve_string(args.route, &cfg, "route", "")?;
    if route.is_empty() {
        return Err(Error::invalid_argument("--route is required"));
    }
    let target_mask_raw = resolve_string(args.target_mask, &cfg, "target-mask", "all")?;
    let actual_path = args
        .actual
        .or_else(|| cfg.get_string("actual").map(PathBuf::from));
    let training_path = args
        .training
        .or_else(|| cfg.get_string("training").map(PathBuf::from));

    let model_info = inspect(&pipeline_path)?;
    if model_info.kind != "pipeline" {
        return Err(Error::invalid_argument(format!(
            "predict needs a pipeline bundle, {} is a {} container",
            pipeline_path.display(),
            model_info.kind
        )));
    }
    let pipe: Pipeline<f64> = load_pipeline(&pipeline_path)?;

    if let Some(tp) = &training_path {
        let training: DMatrix<f64> = load_matrix_auto(tp)?;
        let file_hash = matrix_hash(&training);
        if file_hash != pipe.snapshot_hash {
            return Err(Error::invalid_argument(format!(
                "training data mismatch:\n  model was fitted on snapshots with hash {}\n  {} hashes to {}",
                pipe.snapshot_hash,
                tp.display(),
                file_hash
            )));
        }
    }

    let input: DMatrix<f64> = load_matrix_auto(&input_path)?;
    if input.nrows() == 0 {
        return Err(Error::invalid_data("input has no rows"));
    }
    let actual: Option<DMatrix<f64>> = match &actual_path {
        Some(p) => Some(load_matrix_auto(p)?),
        None => None,
    };
    if let Some(a) = &actual {
        if a.nrows() != input.nrows() {
            return Err(Error::invalid_argument(format!(
                "--actual has {} rows, input has {}",
                a.nrows(),
                input.nrows()
            )));
        }
    }

    let mut resolved = Resolved::new("predict");
    resolved.put("route", &route);
    if route == "partial-to-partial" {
        resolved.put("target-mask", &target_mask_raw);
    }
    let config_hash = resolved.hash();

    let state_dim = pipe.dmap.dim();
    let predict_row: Box<dyn Fn(&[f64]) -> Result<Prediction<f64>> + '_> = match route.as_str() {
        "params-to-obs" => Box::new(|row| pipe.predict_observation_from_params(row)),
        "obs-to-params" => Box::new(|row| pipe.predict_params_from_observation(row)),
        "partial-to-params" => {
            let mask = pipe.partial_mask.as_ref().ok_or_else(|| {
                Error::invalid_argument("the pipeline was fitted without a partial-observation map")
            })?;
            let indices = mask.indices().to_vec();
            let p = &pipe;
            Box::new(move |row| {
                let observed = observed_values(row, &indices, state_dim)?;
                p.predict_params_from_partial(&observed)
            })
        }
        "partial-to-partial" => {
            let mask = pipe.partial_mask.as_ref().ok_or_else(|| {
                Error::invalid_argument("the pipeline was fitted without a partial-observation map")
            })?;
            let indices = mask.indices().to_vec();
            let target = if target_mask_raw.eq_ignore_ascii_case("all") {
                gappy_dmap::gappy_pod::ObservationMask::new(
                    (0..state_dim).collect(),
                    state_dim,
                )?
            } else {
                parse::mask_from_flag(&target_mask_raw, state_dim)?
            };
            let p = &pipe;
            Box::new(move |row| {
                let observed = observed_values(row, &indices, state_dim)?;
                p.predict_partial_from_partial(&observed, &target)
            })
        }
        other => {
            return Err(Error::invalid_argument(format!(
                "route must be params-to-obs, obs-to-params, partial-to-params, \
                 or partial-to-partial, got '{other}'"
            )))
        }
    };

    let mut csv = Report::new(&config_hash);
    csv.comment("route", &route);
    csv.comment("pipeline", pipeline_path.display());
    if let Some(h) = &model_info.config_hash {
        csv.comment("model_config_hash", h);
    }

    let mut header: Vec<String> = vec!["row".into()];
    let mut predictions: Vec<Prediction<f64>> = Vec::with_capacity(input.nrows());
    for i in 0..input.nrows() {
        let row = row_slice(&input, i);
        let pred = predict_row(&row).map_err(|e| err_at_row(e, i + 1))?;
        predictions.push(pred);
    }
    let out_dim = predictions[0].values.len();
    match route.as_str() {
        "params-to-obs" | "partial-to-partial" => {
            header.extend((1..=out_dim).map(|j| format!("x{j}")))
        }
        _ => header.extend((1..=out_dim).map(|j| format!("p{j}"))),
    }
    header.push("support_mass".into());
    header.push("whitney_ok".into());
    let with_error = actual.is_some();
    if with_error {
        header.push("rel_l2_error".into());
    }
    csv.header(&header.iter().map(String::as_str).collect::<Vec<_>>());

    let mut error_sum = 0.0;
    let mut error_count = 0usize;
    for (i, pred) in predictions.iter().enumerate() {
        let mut cells = vec![(i + 1).to_string()];
        cells.extend(pred.values.iter().map(|&v| cell_f64(v)));
        cells.push(cell_f64(pred.support_mass));
        cells.push(cell_bool(pred.whitney_ok));
        if let Some(a) = &actual {
            if a.ncols() != pred.values.len() {
                return Err(Error::invalid_argument(format!(
                    "--actual has {} columns, predictions have {}",
                    a.ncols(),
                    pred.values.len()
                )));
            }
            let truth = DVector::from_iterator(a.ncols(), (0..a.ncols()).map(|j| a[(i, j)]));
            let err = relative_l2(&pred.values, &truth)?;
            error_sum += err;
            error_count += 1;
            cells.push(cell_f64(err));
        }
        csv.row(&cells);
    }
    if error_count > 0 {
        csv.comment("mean_relative_l2", cell_f64(error_sum / error_count as f64));
        csv.comment("scored_rows", error_count);
    }

    csv.write(&out_path)?;
    println!("wrote {} ({} rows)", out_path.display(), input.nrows());
    if error_count > 0 {
        println!("mean relative l2 error: {}", error_sum / error_count as f64);
    }
    Ok(())
}
