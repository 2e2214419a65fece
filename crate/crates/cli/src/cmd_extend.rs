//! `gdmap extend`: map new points through a saved model.
//!
//! A diffusion-map container (or the one inside a pipeline bundle) extends
//! ambient points to the selected latent coordinates. A harmonics container
//! evaluates its learned map at new inputs and reports the kernel support
//! mass per row, small values flagging extrapolation.

use std::path::PathBuf;

use gappy_dmap::io::load_matrix_auto;
use gappy_dmap::persist::{self, load_dmap_model, load_gh_model, load_pipeline};
use gappy_dmap::workflows::Pipeline;
use gappy_dmap::{Error, Result};
use nalgebra::DMatrix;

use crate::config::{ConfigFile, Resolved};
use crate::report::{cell_f64, err_at_row, Report};
use crate::ExtendArgs;

fn required_path(flag: Option<PathBuf>, cfg: &ConfigFile, key: &str) -> Result<PathBuf> {
    flag.or_else(|| cfg.get_string(key).map(PathBuf::from))
        .ok_or_else(|| Error::invalid_argument(format!("--{key} is required")))
}

pub fn run(args: ExtendArgs) -> Result<()> {
    let cfg = ConfigFile::load(args.config.as_deref())?;
    let model_path = required_path(args.model, &cfg, "model")?;
    let input_path = required_path(args.input, &cfg, "input")?;
    let out_path = required_path(args.out, &cfg, "out")?;

    let info = persist::inspect(&model_path)?;
    let input: DMatrix<f64> = load_matrix_auto(&input_path)?;

    let mut resolved = Resolved::new("extend");
    resolved.put("model-kind", &info.kind);
    let config_hash = resolved.hash();

    let mut csv = Report::new(&config_hash);
    if let Some(h) = &info.config_hash {
        csv.comment("model_config_hash", h);
    }
    csv.comment("model", model_path.display());

    match info.kind.as_str() {
        "dmap" | "pipeline" => {
            let model = if info.kind == "dmap" {
                load_dmap_model::<f64>(&model_path)?
            } else {
                let pipe: Pipeline<f64> = load_pipeline(&model_path)?;
                pipe.dmap
            };
            if input.ncols() != model.dim() {
                return Err(Error::invalid_argument(format!(
                    "input has {} columns, the model expects {}",
                    input.ncols(),
                    model.dim()
                )));
            }
            let mut header: Vec<String> = vec!["row".into()];
            header.extend(model.selected.iter().map(|k| format!("phi_{k}")));
            csv.header(&header.iter().map(String::as_str).collect::<Vec<_>>());
            for i in 0..input.nrows() {
                let point: Vec<f64> = (0..input.ncols()).map(|j| input[(i, j)]).collect();
                let coords = model
                    .latent_coordinates(&point)
                    .map_err(|e| err_at_row(e, i + 1))?;
                let mut cells = vec![(i + 1).to_string()];
                cells.extend(coords.iter().map(|&v| cell_f64(v)));
                csv.row(&cells);
            }
        }
        "gh" => {
            let model = load_gh_model::<f64>(&model_path)?;
            if input.ncols() != model.input_dim() {
                return Err(Error::invalid_argument(format!(
                    "input has {} columns, the model expects {}",
                    input.ncols(),
                    model.input_dim()
                )));
            }
            let mut header: Vec<String> = vec!["row".into()];
            header.extend((1..=model.output_dim()).map(|j| format!("y{j}")));
            header.push("support_mass".into());
            csv.header(&header.iter().map(String::as_str).collect::<Vec<_>>());
            for i in 0..input.nrows() {
                let point: Vec<f64> = (0..input.ncols()).map(|j| input[(i, j)]).collect();
                let ext = model.extend(&point).map_err(|e| err_at_row(e, i + 1))?;
                let mut cells = vec![(i + 1).to_string()];
                cells.extend(ext.values.iter().map(|&v| cell_f64(v)));
                cells.push(cell_f64(ext.support_mass));
                csv.row(&cells);
            }
        }
        "pod" => {
            return Err(Error::invalid_argument(
                "a POD basis has no out-of-sample extension; use predict or compare",
            ))
        }
        other => {
            return Err(Error::format(
                model_path.display().to_string(),
                format!("unknown model kind '{other}'"),
            ))
        }
    }

    csv.write(&out_path)?;
    println!("wrote {} ({} rows)", out_path.display(), input.nrows());
    Ok(())
}
