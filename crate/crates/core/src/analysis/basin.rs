use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SweepOptions;
use crate::collective::{self, CollectiveState};
use crate::error::{Error, Result};
use crate::model::{check_ratio, solve_fixed_points, FixedPoint, ModelParams, RootLabel};

/// A final state within this distance of a fixed point (in both `q` and
/// `a`) is attributed to it.
pub const BASIN_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasinLabel {
    ToN1,
    ToN2,
    Undetermined,
}

impl std::fmt::Display for BasinLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BasinLabel::ToN1 => "toN1",
            BasinLabel::ToN2 => "toN2",
            BasinLabel::Undetermined => "undetermined",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinGrid {
    pub p: f64,
    pub q0_axis: Vec<f64>,
    pub a0_axis: Vec<f64>,
    /// `labels[i][j]` for `(q0_axis[i], a0_axis[j])`.
    pub labels: Vec<Vec<BasinLabel>>,
}

impl BasinGrid {
    pub fn count(&self, label: BasinLabel) -> usize {
        self.labels
            .iter()
            .flatten()
            .filter(|&&l| l == label)
            .count()
    }

    /// Fraction of the grid attracted to `label`.
    pub fn area(&self, label: BasinLabel) -> f64 {
        self.count(label) as f64 / (self.q0_axis.len() * self.a0_axis.len()) as f64
    }
}

fn near(state: &CollectiveState, fp: &FixedPoint) -> bool {
    (state.q - fp.nbar).abs() < BASIN_TOL && (state.a - fp.coherence).norm() < BASIN_TOL
}

/// Integrates the collective equations from every `(q0, a0)` (with a real
/// initial coherence) and records which stable fixed point is reached.
pub fn basin_map(
    params: &ModelParams,
    p: f64,
    q0_grid: &[f64],
    a0_grid: &[f64],
    options: &SweepOptions,
) -> Result<BasinGrid> {
    params.validate()?;
    check_ratio(p)?;
    options.validate()?;
    if q0_grid.is_empty() || a0_grid.is_empty() {
        return Err(Error::InvalidGrid("basin axes must be non-empty".into()));
    }
    let fixed = solve_fixed_points(params, p)?;
    let targets: Vec<(BasinLabel, &FixedPoint)> = [
        (BasinLabel::ToN1, RootLabel::N1),
        (BasinLabel::ToN2, RootLabel::N2),
    ]
    .into_iter()
    .filter_map(|(b, r)| fixed.get(r).map(|fp| (b, fp)))
    .collect();

    let cells: Vec<(f64, f64)> = q0_grid
        .iter()
        .flat_map(|&q| a0_grid.iter().map(move |&a| (q, a)))
        .collect();
    let labels = options.execution.try_map(&cells, |&(q0, a0)| {
        let init = CollectiveState::new(q0, Complex64::new(a0, 0.0));
        let (end, _) = collective::steady_state(params, p, &init, &options.controls)?;
        Ok(targets
            .iter()
            .find(|(_, fp)| near(&end, fp))
            .map_or(BasinLabel::Undetermined, |(label, _)| *label))
    })?;
    Ok(BasinGrid {
        p,
        q0_axis: q0_grid.to_vec(),
        a0_axis: a0_grid.to_vec(),
        labels: labels
            .chunks(a0_grid.len())
            .map(|row| row.to_vec())
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::grid;

    #[test]
    fn lower_fixed_point_is_in_its_own_basin() {
        let params = ModelParams::default();
        let p = 0.8;
        let fp = solve_fixed_points(&params, p)
            .unwrap()
            .get(RootLabel::N2)
            .unwrap()
            .clone();
        let init = CollectiveState::new(fp.nbar, fp.coherence);
        let (end, _) = collective::steady_state(&params, p, &init, &Default::default()).unwrap();
        assert!(near(&end, &fp));
        // Map axes carry a real a0, so the one-cell map starts from Re z₂.
        let map = basin_map(
            &params,
            p,
            &[fp.nbar],
            &[fp.coherence.re],
            &SweepOptions::default(),
        )
        .unwrap();
        assert_eq!(map.labels[0][0], BasinLabel::ToN2);
    }

    #[test]
    fn monostable_map_is_all_upper_branch() {
        let params = ModelParams::default();
        let axis = grid(0.0, 1.0, 0.25).unwrap();
        let map = basin_map(&params, 0.3, &axis, &axis, &SweepOptions::default()).unwrap();
        assert_eq!(map.count(BasinLabel::ToN1), 25);
    }

    #[test]
    fn shape_follows_axes() {
        let params = ModelParams::default();
        let map = basin_map(
            &params,
            0.8,
            &[0.1, 0.5, 0.9],
            &[0.0, 0.5],
            &SweepOptions::default(),
        )
        .unwrap();
        assert_eq!(map.labels.len(), 3);
        assert!(map.labels.iter().all(|r| r.len() == 2));
        assert_eq!(
            map.count(BasinLabel::ToN1)
                + map.count(BasinLabel::ToN2)
                + map.count(BasinLabel::Undetermined),
            6
        );
    }
}
