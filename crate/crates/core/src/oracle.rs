//! Exact star discrepancy for small instances by enumerating the critical
//! grid, plus an independent closed-form oracle for dimension one.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{AnchoredBox, GeometryError, PointSet};

/// Default cap on the number of grid evaluations.
pub const DEFAULT_BUDGET: u64 = 100_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("critical grid needs {required} evaluations, over the budget of {budget}")]
    BudgetExceeded { required: u128, budget: u64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Which one-sided deviation attained the supremum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscrepancySide {
    /// `count/N - vol` (too many points).
    Overfilled,
    /// `vol - count/N` (too few points, approached from below).
    Underfilled,
}

/// The exact star discrepancy together with a grid box realizing it.
///
/// The supremum may only be approached by closed boxes; `arg_box` is the grid
/// point whose one-sided evaluation equals the supremum value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyResult {
    pub d_star: f64,
    pub arg_box: AnchoredBox,
    pub side: DiscrepancySide,
    pub grid_size: u64,
    pub evaluations: u64,
}

/// Exact `D*(P)` by evaluating both one-sided discrepancy parts on the
/// critical grid (per-axis point coordinates plus 1).
///
/// The overfilled side uses closed counts, the underfilled side open counts,
/// which captures suprema approached from below without epsilon nudges. Ties
/// resolve to the lexicographically smallest grid box.
pub fn exact_star_discrepancy(
    points: &PointSet,
    budget: u64,
) -> Result<DiscrepancyResult, OracleError> {
    let s = points.dim();
    let n = points.n_points() as f64;

    let grids: Vec<Vec<f64>> = (0..s)
        .map(|axis| {
            let mut values: Vec<f64> = points.points().map(|p| p[axis]).collect();
            values.push(1.0);
            values.sort_by(f64::total_cmp);
            values.dedup();
            values
        })
        .collect();

    let grid_size: u128 = grids.iter().map(|g| g.len() as u128).product();
    if grid_size > budget as u128 {
        return Err(OracleError::BudgetExceeded {
            required: grid_size,
            budget,
        });
    }

    let mut index = vec![0usize; s];
    // prefix[j] = product of the chosen upper bounds for axes 0..=j
    let mut prefix = vec![0.0f64; s];
    refresh_prefix(&grids, &index, &mut prefix, 0);

    let mut best = f64::NEG_INFINITY;
    let mut best_box: Option<(Vec<f64>, DiscrepancySide)> = None;
    let mut evaluations = 0u64;

    loop {
        let upper: Vec<f64> = index.iter().zip(&grids).map(|(&i, g)| g[i]).collect();
        let bx = AnchoredBox::new(upper.clone())?;
        let vol = prefix[s - 1];
        let over = points.count_closed(&bx)? as f64 / n - vol;
        let under = vol - points.count_open(&bx)? as f64 / n;
        evaluations += 1;
        if over > best {
            best = over;
            best_box = Some((upper.clone(), DiscrepancySide::Overfilled));
        }
        if under > best {
            best = under;
            best_box = Some((upper, DiscrepancySide::Underfilled));
        }

        // odometer: last axis fastest, giving lexicographic visit order
        let mut axis = s;
        loop {
            if axis == 0 {
                let (upper, side) = best_box.expect("grid is never empty");
                return Ok(DiscrepancyResult {
                    d_star: best,
                    arg_box: AnchoredBox::new(upper)?,
                    side,
                    grid_size: grid_size as u64,
                    evaluations,
                });
            }
            axis -= 1;
            index[axis] += 1;
            if index[axis] < grids[axis].len() {
                refresh_prefix(&grids, &index, &mut prefix, axis);
                break;
            }
            index[axis] = 0;
        }
    }
}

fn refresh_prefix(grids: &[Vec<f64>], index: &[usize], prefix: &mut [f64], from: usize) {
    for j in from..index.len() {
        let v = grids[j][index[j]];
        prefix[j] = if j == 0 { v } else { prefix[j - 1] * v };
    }
}

/// Closed-form 1-D star discrepancy: with sorted points `x_(1) <= ... <= x_(N)`,
/// `D* = 1/(2N) + max_i |x_(i) - (2i-1)/(2N)|`.
pub fn one_dim_star_discrepancy(points: &PointSet) -> Result<f64, OracleError> {
    if points.dim() != 1 {
        return Err(OracleError::InvalidArgument(format!(
            "one-dimensional oracle called on dimension {}",
            points.dim()
        )));
    }
    let n = points.n_points();
    let mut sorted: Vec<f64> = points.points().map(|p| p[0]).collect();
    sorted.sort_by(f64::total_cmp);
    let max_dev = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - (2 * i + 1) as f64 / (2 * n) as f64).abs())
        .fold(0.0f64, f64::max);
    Ok(1.0 / (2 * n) as f64 + max_dev)
}
