use serde::{Deserialize, Serialize};

use crate::collective::classify_fixed_points;
use crate::error::{Error, Result};
use crate::model::{cubic_coefficients, ModelParams, RootLabel};

/// Coarse scan spacing in `p`; crossings are then bisected to `BISECT_TOL`.
pub const SCAN_STEP: f64 = 1e-3;
const BISECT_TOL: f64 = 1e-6;

/// Range of `p` with three fixed points, where the upper branch can be lost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BistableInterval {
    pub p_cmin: f64,
    pub p_cmax: f64,
    /// The discriminant is still negative at `p = 1`.
    pub clamped_upper: bool,
    /// Where the lower root n̄₂ exists and is linearly stable, located the
    /// same way. Normally identical to `[p_cmin, p_cmax]`.
    pub stability_window: Option<(f64, f64)>,
    /// n̄₂ was stable at every scan point strictly inside the interval.
    pub lower_branch_stable: bool,
}

fn three_roots(params: &ModelParams, p: f64) -> bool {
    cubic_coefficients(params, p)
        .discriminant()
        .is_some_and(|d| d < 0.0)
}

fn lower_branch_stable(params: &ModelParams, p: f64) -> bool {
    classify_fixed_points(params, p)
        .ok()
        .and_then(|set| set.get(RootLabel::N2).and_then(|fp| fp.stability))
        .is_some_and(|s| s.stable)
}

/// Bisects a change of `pred` between `lo` (value `at_lo`) and `hi`.
fn bisect(pred: &dyn Fn(f64) -> bool, mut lo: f64, mut hi: f64, at_lo: bool) -> f64 {
    while hi - lo > BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        if pred(mid) == at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// First entry into and last exit from the set where `pred` holds, on
/// `[0, 1]`. The flag is set when `pred` still holds at `p = 1`.
fn window(pred: &dyn Fn(f64) -> bool) -> Option<(f64, f64, bool)> {
    let steps = (1.0 / SCAN_STEP).round() as usize;
    let grid: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
    let values: Vec<bool> = grid.iter().map(|&p| pred(p)).collect();
    let first = values.iter().position(|&v| v)?;
    let last = values.iter().rposition(|&v| v)?;
    let lo = if first == 0 {
        0.0
    } else {
        bisect(pred, grid[first - 1], grid[first], false)
    };
    let (hi, clamped) = if last == steps {
        (1.0, true)
    } else {
        (bisect(pred, grid[last], grid[last + 1], true), false)
    };
    Some((lo, hi, clamped))
}

/// Locates `[p_cmin, p_cmax]` from the sign of the discriminant and checks
/// the lower branch's stability inside it.
pub fn bistable_interval(params: &ModelParams) -> Result<BistableInterval> {
    params.validate()?;
    let disc = |p: f64| three_roots(params, p);
    let (p_cmin, p_cmax, clamped_upper) = window(&disc).ok_or(Error::NoBistability)?;
    let stable = |p: f64| lower_branch_stable(params, p);
    let stability_window = window(&stable).map(|(lo, hi, _)| (lo, hi));

    let steps = (1.0 / SCAN_STEP).round() as usize;
    let lower_branch_stable = (0..=steps)
        .map(|i| i as f64 / steps as f64)
        .filter(|&p| p > p_cmin && p < p_cmax && disc(p))
        .all(stable);

    Ok(BistableInterval {
        p_cmin,
        p_cmax,
        clamped_upper,
        stability_window,
        lower_branch_stable,
    })
}
