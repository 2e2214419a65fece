//! `gdmap generate`: synthetic snapshot datasets.

use std::path::{Path, PathBuf};

use gappy_dmap::datagen;
use gappy_dmap::io::MatrixFormat;
use gappy_dmap::persist::matrix_hash;
use gappy_dmap::{Error, Result};

use crate::config::{resolve, resolve_string, ConfigFile, Resolved};
use crate::{parse, GenerateArgs};

pub fn require_dir(dir: &Path) -> Result<()> {
    if !dir.is_dir() {
        return Err(Error::io(
            dir.display().to_string(),
            std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "output directory does not exist",
            ),
        ));
    }
    Ok(())
}

pub fn snapshot_format(name: &str) -> Result<(MatrixFormat, &'static str)> {
    match name {
        "binary" => Ok((MatrixFormat::Binary, "bin")),
        "csv" => Ok((MatrixFormat::Csv, "csv")),
        other => Err(Error::invalid_argument(format!(
            "format must be binary or csv, got '{other}'"
        ))),
    }
}

pub fn run(args: GenerateArgs) -> Result<()> {
    let cfg = ConfigFile::load(args.config.as_deref())?;
    let out = args
        .out
        .or_else(|| cfg.get_string("out").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    require_dir(&out)?;
    let format_name = resolve_string(args.format, &cfg, "format", "binary")?;
    let (format, ext) = snapshot_format(&format_name)?;

    match args.kind.as_str() {
        "slow-manifold" => {
            let eps = resolve(args.eps, &cfg, "eps", 0.01)?;
            let n = resolve(args.n, &cfg, "n", 1000)?;
            let seed = resolve(args.seed, &cfg, "seed", 0)?;

            let mut resolved = Resolved::new("generate");
            resolved.put("kind", "slow-manifold");
            resolved.put("eps", eps);
            resolved.put("n", n);
            resolved.put("seed", seed);
            resolved.put("format", &format_name);

            let snaps = datagen::generate_slow_manifold::<f64>(eps, n, seed)?;
            let snap_path = out.join(format!("snapshots.{ext}"));
            gappy_dmap::io::save_matrix(&snap_path, snaps.data(), format)?;
            resolved.write(&out.join("generate.config"))?;
            println!(
                "wrote {} ({} x {}, hash {})",
                snap_path.display(),
                snaps.data().nrows(),
                snaps.data().ncols(),
                matrix_hash(snaps.data())
            );
            Ok(())
        }
        "surrogate" => {
            let grid_raw = resolve_string(args.grid, &cfg, "grid", "10x9x8")?;
            let counts = parse::grid_counts(&grid_raw)?;
            let dim = resolve(args.dim, &cfg, "dim", 200)?;
            let seed = resolve(args.seed, &cfg, "seed", 1)?;

            let mut resolved = Resolved::new("generate");
            resolved.put("kind", "surrogate");
            resolved.put("grid", format!("{}x{}x{}", counts[0], counts[1], counts[2]));
            resolved.put("dim", dim);
            resolved.put("seed", seed);
            resolved.put("format", &format_name);

            let table = datagen::parameter_grid::<f64>(
                [(487.0, 501.0), (7.97e-6, 8.87e-6), (1383.0, 1463.0)],
                counts,
            )?;
            let snaps = datagen::generate_surrogate_cvd(&table, dim, seed)?;
            let snap_path = out.join(format!("snapshots.{ext}"));
            gappy_dmap::io::save_matrix(&snap_path, snaps.data(), format)?;
            let params_path = out.join("params.csv");
            table.save(&params_path, MatrixFormat::Csv)?;
            resolved.write(&out.join("generate.config"))?;
            println!(
                "wrote {} ({} x {}, hash {})",
                snap_path.display(),
                snaps.data().nrows(),
                snaps.data().ncols(),
                matrix_hash(snaps.data())
            );
            println!(
                "wrote {} ({} x {})",
                params_path.display(),
                table.len(),
                table.n_params()
            );
            Ok(())
        }
        other => Err(Error::invalid_argument(format!(
            "dataset kind must be slow-manifold or surrogate, got '{other}'"
        ))),
    }
}
