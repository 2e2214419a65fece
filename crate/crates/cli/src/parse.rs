//! Parsers for the structured flag values: index lists, selection rules,
//! grid shapes, and truncation choices.

use gappy_dmap::gappy_pod::{ObservationMask, Truncation};
use gappy_dmap::parsimony::SelectionRule;
use gappy_dmap::{Error, Result};

/// Comma-separated one-based indices, e.g. `1,4,7`.
pub fn one_based_indices(raw: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in raw.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let idx: usize = part
            .parse()
            .map_err(|_| Error::invalid_argument(format!("'{part}' is not an index")))?;
        out.push(idx);
    }
    if out.is_empty() {
        return Err(Error::invalid_argument(format!(
            "no indices found in '{raw}'"
        )));
    }
    Ok(out)
}

/// A mask given as one-based indices against a known dimension.
pub fn mask_from_flag(raw: &str, dim: usize) -> Result<ObservationMask> {
    ObservationMask::from_one_based(&one_based_indices(raw)?, dim)
}

/// `gap`, `top:M`, or `threshold:X`.
pub fn selection_rule(raw: &str) -> Result<SelectionRule<f64>> {
    let raw = raw.trim();
    if raw.eq_ignore_ascii_case("gap") {
        return Ok(SelectionRule::LargestGap);
    }
    if let Some(rest) = raw.strip_prefix("top:") {
        let m: usize = rest
            .parse()
            .map_err(|_| Error::invalid_argument(format!("top:{rest} needs a count")))?;
        return Ok(SelectionRule::TopM(m));
    }
    if let Some(rest) = raw.strip_prefix("threshold:") {
        let t: f64 = rest
            .parse()
            .map_err(|_| Error::invalid_argument(format!("threshold:{rest} needs a number")))?;
        return Ok(SelectionRule::Threshold(t));
    }
    Err(Error::invalid_argument(format!(
        "selection must be gap, top:M, or threshold:X, got '{raw}'"
    )))
}

/// `AxBxC` axis counts, or the bare total `720` for the default 10x9x8 grid.
pub fn grid_counts(raw: &str) -> Result<[usize; 3]> {
    let raw = raw.trim();
    let parts: Vec<&str> = raw.split(['x', 'X']).collect();
    if parts.len() == 3 {
        let mut counts = [0usize; 3];
        for (i, p) in parts.iter().enumerate() {
            counts[i] = p.trim().parse().map_err(|_| {
                Error::invalid_argument(format!("grid axis '{p}' is not a count"))
            })?;
        }
        return Ok(counts);
    }
    if parts.len() == 1 {
        let total: usize = raw
            .parse()
            .map_err(|_| Error::invalid_argument(format!("grid '{raw}' is not a count")))?;
        if total == 720 {
            return Ok([10, 9, 8]);
        }
        return Err(Error::invalid_argument(format!(
            "grid must be AxBxC axis counts (e.g. 10x9x8); only the default \
             720-point grid may be named by its total"
        )));
    }
    Err(Error::invalid_argument(format!(
        "grid must be AxBxC axis counts, got '{raw}'"
    )))
}

/// Exactly one of rank / energy% / error% truncation.
pub fn truncation(
    rank: Option<usize>,
    energy: Option<f64>,
    error: Option<f64>,
) -> Result<Truncation<f64>> {
    match (rank, energy, error) {
        (Some(r), None, None) => Ok(Truncation::Rank(r)),
        (None, Some(e), None) => Ok(Truncation::EnergyPercent(e)),
        (None, None, Some(e)) => Ok(Truncation::ReconstructionErrorPercent(e)),
        (None, None, None) => Err(Error::invalid_argument(
            "a basis needs a truncation: pod-rank, pod-energy, or pod-error",
        )),
        _ => Err(Error::invalid_argument(
            "pod-rank, pod-energy, and pod-error are mutually exclusive",
        )),
    }
}
