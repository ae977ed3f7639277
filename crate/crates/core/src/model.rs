//! Physical parameters and the analytic steady-state machinery of the
//! collective-motion equations.
//!
//! Eliminating the coherence from the steady-state conditions gives a cubic
//! `a·n³ + b·n² + c·n + d = 0` in the mean excited-state population. Its real
//! roots are the fixed points; the sign of the depressed-cubic discriminant
//! `(m/2)² + (n/3)³` decides between one and three of them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::collective::StabilityReport;
use crate::error::{Error, Result};

/// Tolerance on the imaginary part of a Cardano root for it to count as real.
pub const REAL_ROOT_TOL: f64 = 1e-9;
/// Roots closer than this are merged into one point with multiplicity.
pub const MERGE_TOL: f64 = 1e-9;
/// Smallest steady-coherence denominator magnitude accepted.
pub const DENOMINATOR_TOL: f64 = 1e-12;

/// Physical constants of the driven, coupled qubit network. All rates and
/// energies are expressed in units of `kappa` (which defaults to 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Total number of qubits N.
    pub n_qubits: usize,
    /// Detuning Δ between qubit transition and drive.
    pub detuning: f64,
    /// Drive (Rabi) strength Ω.
    pub drive: f64,
    /// Coherent σzσz coupling g.
    pub coherent_coupling: f64,
    /// Dissipative coupling V.
    pub dissipative_coupling: f64,
    /// Single-qubit pump/decay rate κ.
    pub kappa: f64,
    /// Ratio p of inactive qubits.
    pub inactive_ratio: f64,
}

impl Default for ModelParams {
    /// The reference network: N = 100, Δ = 3κ, Ω = 3.2κ, g = 0.04κ, V = 0.2κ,
    /// with no inactive qubits.
    fn default() -> Self {
        Self {
            n_qubits: 100,
            detuning: 3.0,
            drive: 3.2,
            coherent_coupling: 0.04,
            dissipative_coupling: 0.2,
            kappa: 1.0,
            inactive_ratio: 0.0,
        }
    }
}

/// Integer partition of the network into active and inactive qubits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitSplit {
    pub n_active: usize,
    pub n_inactive: usize,
    /// `|N·p − N_i|`, the amount by which N·p missed an integer.
    pub rounding_error: f64,
}

impl ModelParams {
    pub fn with_n_qubits(mut self, n: usize) -> Self {
        self.n_qubits = n;
        self
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.detuning = detuning;
        self
    }

    pub fn with_drive(mut self, drive: f64) -> Self {
        self.drive = drive;
        self
    }

    pub fn with_coherent_coupling(mut self, g: f64) -> Self {
        self.coherent_coupling = g;
        self
    }

    pub fn with_dissipative_coupling(mut self, v: f64) -> Self {
        self.dissipative_coupling = v;
        self
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_inactive_ratio(mut self, p: f64) -> Self {
        self.inactive_ratio = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        fn bad(name: &'static str, reason: impl Into<String>) -> Error {
            Error::InvalidParameter {
                name,
                reason: reason.into(),
            }
        }
        if self.n_qubits == 0 {
            return Err(bad("n_qubits", "must be at least 1"));
        }
        let finite = [
            ("detuning", self.detuning),
            ("drive", self.drive),
            ("coherent_coupling", self.coherent_coupling),
            ("dissipative_coupling", self.dissipative_coupling),
            ("kappa", self.kappa),
            ("inactive_ratio", self.inactive_ratio),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return Err(bad(name, format!("must be finite, got {value}")));
            }
        }
        if self.kappa <= 0.0 {
            return Err(bad("kappa", format!("must be > 0, got {}", self.kappa)));
        }
        if self.drive < 0.0 {
            return Err(bad("drive", format!("must be >= 0, got {}", self.drive)));
        }
        if self.dissipative_coupling < 0.0 {
            return Err(bad(
                "dissipative_coupling",
                format!("must be >= 0, got {}", self.dissipative_coupling),
            ));
        }
        check_ratio(self.inactive_ratio)
    }

    /// `2κ + 4V(N−1)/N`, the total population loss rate.
    pub fn loss_rate(&self) -> f64 {
        let n = self.n_qubits as f64;
        2.0 * self.kappa + 4.0 * self.dissipative_coupling * (n - 1.0) / n
    }

    /// `Δ − 4g(N−1)`, the detuning shifted by the mean σzσz field.
    pub fn shifted_detuning(&self) -> f64 {
        self.detuning - 4.0 * self.coherent_coupling * (self.n_qubits as f64 - 1.0)
    }

    /// Rounds `N·p` to the nearest integer number of inactive qubits.
    pub fn split(&self) -> QubitSplit {
        let exact = self.n_qubits as f64 * self.inactive_ratio;
        let n_inactive = (exact.round() as usize).min(self.n_qubits);
        QubitSplit {
            n_active: self.n_qubits - n_inactive,
            n_inactive,
            rounding_error: (exact - n_inactive as f64).abs(),
        }
    }

    /// Like [`split`](Self::split) but rejects a non-integer `N·p`.
    pub fn integer_split(&self) -> Result<QubitSplit> {
        let split = self.split();
        if split.rounding_error > 1e-9 {
            return Err(Error::NonIntegerSplit {
                n_qubits: self.n_qubits,
                p: self.inactive_ratio,
                product: self.n_qubits as f64 * self.inactive_ratio,
            });
        }
        Ok(split)
    }

    /// Nearest `p` giving an integer split, `round(N·p)/N`.
    pub fn rounded_ratio(n_qubits: usize, p: f64) -> f64 {
        (n_qubits as f64 * p).round() / n_qubits as f64
    }
}

pub(crate) fn check_ratio(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter {
            name: "inactive_ratio",
            reason: format!("must lie in [0, 1], got {p}"),
        });
    }
    Ok(())
}

/// Parameters of the depressed cubic `t³ + n·t + m = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Depressed {
    pub m: f64,
    pub n: f64,
    /// `(m/2)² + (n/3)³`.
    pub discriminant: f64,
}

/// Coefficients of the steady-state cubic for ⟨Q⟩.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// `None` when the leading coefficient vanishes (zero-coupling limit).
    pub depressed: Option<Depressed>,
}

impl CubicCoeffs {
    pub fn is_degenerate(&self) -> bool {
        self.depressed.is_none()
    }

    pub fn discriminant(&self) -> Option<f64> {
        self.depressed.map(|dep| dep.discriminant)
    }

    pub fn eval(&self, x: f64) -> f64 {
        ((self.a * x + self.b) * x + self.c) * x + self.d
    }

    fn eval_derivative(&self, x: f64) -> f64 {
        (3.0 * self.a * x + 2.0 * self.b) * x + self.c
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.a
            .abs()
            .max(self.b.abs())
            .max(self.c.abs())
            .max(self.d.abs())
    }
}

/// Evaluates the cubic coefficients for inactive ratio `p`.
pub fn cubic_coefficients(params: &ModelParams, p: f64) -> CubicCoeffs {
    let kappa = params.kappa;
    let n = params.n_qubits as f64;
    let g = params.coherent_coupling;
    let v = params.dissipative_coupling;
    let omega2 = params.drive * params.drive;
    let gamma = params.loss_rate();
    let shifted = params.shifted_detuning();
    let active = 1.0 - p;

    let quad = 64.0 * g * g * n * n + 16.0 * v * v;
    let lin = 16.0 * g * n * shifted + 8.0 * kappa * v;
    let lorentz = shifted * shifted + kappa * kappa;

    let a = gamma * quad;
    let b = gamma * lin - 2.0 * kappa * quad * active;
    let c = gamma * lorentz - 2.0 * kappa * lin * active + omega2 * (kappa + 2.0 * v);
    let d = -0.5 * omega2 * (kappa + 2.0 * v) - 2.0 * kappa * lorentz * active;

    let scale = b.abs().max(c.abs()).max(d.abs());
    let depressed = if a == 0.0 || a.abs() <= 1e-14 * scale {
        None
    } else {
        let ba = b / a;
        let m = d / a - b * c / (3.0 * a * a) + 2.0 / 27.0 * ba * ba * ba;
        let nn = c / a - ba * ba / 3.0;
        let discriminant = (m / 2.0).powi(2) + (nn / 3.0).powi(3);
        Some(Depressed {
            m,
            n: nn,
            discriminant,
        })
    };
    CubicCoeffs {
        a,
        b,
        c,
        d,
        depressed,
    }
}

/// Steady value of ⟨A⟩ for a given ⟨Q⟩ = `nbar`.
pub fn steady_coherence(params: &ModelParams, nbar: f64) -> Result<Complex64> {
    let i = Complex64::i();
    let n = params.n_qubits as f64;
    let g = params.coherent_coupling;
    let v = params.dissipative_coupling;
    let den = 2.0 * i * params.shifted_detuning() - 2.0 * params.kappa
        + (16.0 * i * g * n - 8.0 * v) * nbar;
    let magnitude = den.norm();
    if magnitude <= DENOMINATOR_TOL {
        return Err(Error::DegenerateDenominator { nbar, magnitude });
    }
    Ok(i * params.drive * (2.0 * nbar - 1.0) / den)
}

/// Fixed-point regime of the cubic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    /// One real root, on the upper branch (before the bistable window).
    I,
    /// Three real roots: bistable.
    II,
    /// One real root, on the lower branch (past the bistable window).
    III,
}

/// Which Cardano expression produced a root.
///
/// With three real roots `N1` is the largest, `N3` the middle (unstable)
/// one and `N2` the smallest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RootLabel {
    N1,
    N2,
    N3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub label: RootLabel,
    pub nbar: f64,
    /// Matching steady ⟨A⟩.
    pub coherence: Complex64,
    /// 2 when two roots were merged as numerically coincident.
    pub multiplicity: u8,
    /// False when `nbar` lies outside [0, 1].
    pub physical: bool,
    pub stability: Option<StabilityReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSet {
    pub region: Region,
    /// Sorted by descending `nbar`.
    pub points: Vec<FixedPoint>,
}

impl FixedPointSet {
    pub fn get(&self, label: RootLabel) -> Option<&FixedPoint> {
        self.points.iter().find(|fp| fp.label == label)
    }

    pub fn is_bistable(&self) -> bool {
        self.region == Region::II
    }
}

/// Real roots of the steady-state cubic with their coherences, classified by
/// discriminant sign.
pub fn solve_fixed_points(params: &ModelParams, p: f64) -> Result<FixedPointSet> {
    let coeffs = cubic_coefficients(params, p);
    let (region, roots) = real_roots(&coeffs)?;

    let mut points = Vec::with_capacity(roots.len());
    for (nbar, label, multiplicity) in roots {
        points.push(FixedPoint {
            label,
            nbar,
            coherence: steady_coherence(params, nbar)?,
            multiplicity,
            physical: (0.0..=1.0).contains(&nbar),
            stability: None,
        });
    }
    Ok(FixedPointSet { region, points })
}

type LabelledRoot = (f64, RootLabel, u8);

/// Real roots sorted descending, merged when coincident.
pub(crate) fn real_roots(coeffs: &CubicCoeffs) -> Result<(Region, Vec<LabelledRoot>)> {
    let Some(dep) = coeffs.depressed else {
        let roots = low_degree_roots(coeffs)?;
        return Ok((Region::I, merge(roots)));
    };

    let shift = -coeffs.b / (3.0 * coeffs.a);
    let omega = Complex64::new(-0.5, 3f64.sqrt() / 2.0);
    let half_m = dep.m / 2.0;

    let candidates: Vec<(Complex64, RootLabel)> = if dep.discriminant > 0.0 {
        // Real cube roots keep α + β the real root.
        let s = dep.discriminant.sqrt();
        let (alpha, beta) = cube_root_pair(-half_m + s, -half_m - s, dep.n);
        let (alpha, beta) = (Complex64::from(alpha), Complex64::from(beta));
        vec![
            (alpha + beta, RootLabel::N1),
            (omega * alpha + omega * omega * beta, RootLabel::N2),
            (omega * omega * alpha + omega * beta, RootLabel::N3),
        ]
    } else {
        let radicand = Complex64::new(-half_m, (-dep.discriminant).sqrt());
        let alpha = radicand.cbrt();
        let beta = if alpha.norm() > 0.0 {
            -dep.n / (3.0 * alpha)
        } else {
            Complex64::new(0.0, 0.0)
        };
        vec![
            (alpha + beta, RootLabel::N1),
            (omega * alpha + omega * omega * beta, RootLabel::N2),
            (omega * omega * alpha + omega * beta, RootLabel::N3),
        ]
    };

    let mut roots = Vec::with_capacity(3);
    for (z, label) in candidates {
        if dep.discriminant > 0.0 && label != RootLabel::N1 {
            continue;
        }
        if z.im.abs() < REAL_ROOT_TOL {
            roots.push((polish(coeffs, z.re + shift), label, 1));
        }
    }

    let region = if dep.discriminant < 0.0 {
        Region::II
    } else if roots.first().is_some_and(|r| r.0 < shift) {
        Region::III
    } else {
        Region::I
    };
    Ok((region, merge(roots)))
}

/// Real cube roots `(∛u, ∛v)` of a Cardano pair whose product must be `−n/3`;
/// the smaller one is recovered from the larger to avoid cancellation.
fn cube_root_pair(u: f64, v: f64, n: f64) -> (f64, f64) {
    if u.abs() >= v.abs() {
        let alpha = u.cbrt();
        let beta = if alpha != 0.0 {
            -n / (3.0 * alpha)
        } else {
            0.0
        };
        (alpha, beta)
    } else {
        let beta = v.cbrt();
        let alpha = if beta != 0.0 { -n / (3.0 * beta) } else { 0.0 };
        (alpha, beta)
    }
}

fn polish(coeffs: &CubicCoeffs, mut x: f64) -> f64 {
    for _ in 0..3 {
        let fx = coeffs.eval(x);
        let dfx = coeffs.eval_derivative(x);
        if fx == 0.0 || dfx == 0.0 {
            break;
        }
        let next = x - fx / dfx;
        if !next.is_finite() || coeffs.eval(next).abs() >= fx.abs() {
            break;
        }
        x = next;
    }
    x
}

fn low_degree_roots(coeffs: &CubicCoeffs) -> Result<Vec<LabelledRoot>> {
    let CubicCoeffs { b, c, d, .. } = *coeffs;
    let scale = coeffs.max_abs_coeff();
    if scale == 0.0 {
        return Err(Error::NoFixedPoint);
    }
    if b.abs() > 1e-14 * scale {
        let disc = c * c - 4.0 * b * d;
        if disc < 0.0 {
            return Err(Error::NoFixedPoint);
        }
        let q = -0.5 * (c + c.signum() * disc.sqrt());
        let (r1, r2) = if q != 0.0 { (q / b, d / q) } else { (0.0, 0.0) };
        let (hi, lo) = if r1 >= r2 { (r1, r2) } else { (r2, r1) };
        return Ok(vec![(hi, RootLabel::N1, 1), (lo, RootLabel::N2, 1)]);
    }
    if c.abs() > 1e-14 * scale {
        return Ok(vec![(-d / c, RootLabel::N1, 1)]);
    }
    Err(Error::NoFixedPoint)
}

fn merge(mut roots: Vec<LabelledRoot>) -> Vec<LabelledRoot> {
    roots.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut merged: Vec<LabelledRoot> = Vec::with_capacity(roots.len());
    for root in roots {
        match merged.last_mut() {
            Some(last) if (last.0 - root.0).abs() < MERGE_TOL => last.2 += root.2,
            _ => merged.push(root),
        }
    }
    merged
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> ModelParams {
        ModelParams::default()
    }

    fn uncoupled(drive: f64) -> ModelParams {
        ModelParams::default()
            .with_coherent_coupling(0.0)
            .with_dissipative_coupling(0.0)
            .with_detuning(0.0)
            .with_drive(drive)
    }

    #[test]
    fn zero_coupling_collapses_to_linear() {
        for &(omega, p) in &[(3.2, 0.5), (1.0, 0.0), (0.0, 1.0)] {
            let c = cubic_coefficients(&uncoupled(omega), p);
            assert_eq!(c.a, 0.0);
            assert_eq!(c.b, 0.0);
            assert!((c.c - (2.0 + omega * omega)).abs() < 1e-12);
            assert!((c.d - (-omega * omega / 2.0 - 2.0 * (1.0 - p))).abs() < 1e-12);
            assert!(c.is_degenerate());
        }
    }

    #[test]
    fn zero_coupling_single_root() {
        let set = solve_fixed_points(&uncoupled(3.2), 0.5).unwrap();
        assert_eq!(set.region, Region::I);
        assert_eq!(set.points.len(), 1);
        assert!((set.points[0].nbar - 0.5).abs() < 1e-12);
        assert!(set.points[0].coherence.norm() < 1e-12);
    }

    #[test]
    fn reference_regions() {
        let params = reference();
        assert!(cubic_coefficients(&params, 0.8).discriminant().unwrap() < 0.0);
        assert!(cubic_coefficients(&params, 0.3).discriminant().unwrap() > 0.0);

        let bistable = solve_fixed_points(&params, 0.8).unwrap();
        assert_eq!(bistable.region, Region::II);
        assert_eq!(bistable.points.len(), 3);
        let labels: Vec<_> = bistable.points.iter().map(|fp| fp.label).collect();
        assert_eq!(labels, vec![RootLabel::N1, RootLabel::N3, RootLabel::N2]);

        assert_eq!(solve_fixed_points(&params, 0.3).unwrap().region, Region::I);
        assert_eq!(
            solve_fixed_points(&params, 0.95).unwrap().region,
            Region::III
        );
    }

    #[test]
    fn three_roots_exactly_inside_window() {
        let params = reference();
        for k in 0..=1000 {
            let p = k as f64 / 1000.0;
            let set = solve_fixed_points(&params, p).unwrap();
            let three = set.points.len() == 3;
            if !(0.69..=0.90).contains(&p) {
                assert!(!three, "p = {p}");
            }
            if (0.73..=0.86).contains(&p) {
                assert!(three, "p = {p}");
            }
            assert_eq!(three, set.region == Region::II);
        }
    }

    #[test]
    fn steady_coherence_vanishes_at_half_or_zero_drive() {
        let params = reference();
        assert!(steady_coherence(&params, 0.5).unwrap().norm() < 1e-15);
        let undriven = params.with_drive(0.0);
        for nbar in [0.0, 0.3, 0.9] {
            assert_eq!(steady_coherence(&undriven, nbar).unwrap().norm(), 0.0);
        }
    }

    #[test]
    fn degenerate_denominator_is_reported() {
        // Real part −2κ − 8V·n vanishes at n = −κ/(4V); pick Δ' to cancel the rest.
        let params = ModelParams {
            n_qubits: 1,
            detuning: 0.0,
            drive: 1.0,
            coherent_coupling: 0.0,
            dissipative_coupling: 0.25,
            kappa: 1.0,
            inactive_ratio: 0.0,
        };
        assert!(matches!(
            steady_coherence(&params, -1.0),
            Err(Error::DegenerateDenominator { .. })
        ));
    }

    #[test]
    fn unphysical_roots_are_flagged_not_dropped() {
        let params = reference().with_coherent_coupling(0.2).with_drive(8.0);
        for k in 0..=20 {
            let set = solve_fixed_points(&params, k as f64 / 20.0).unwrap();
            for fp in &set.points {
                assert_eq!(fp.physical, (0.0..=1.0).contains(&fp.nbar));
            }
        }
    }

    #[test]
    fn identically_zero_polynomial_has_no_fixed_point() {
        let coeffs = CubicCoeffs {
            a: 0.0,
            b: 0.0,
            c: 0.0,
            d: 0.0,
            depressed: None,
        };
        assert_eq!(real_roots(&coeffs), Err(Error::NoFixedPoint));
    }

    #[test]
    fn coincident_roots_merge() {
        // (x − 1)²(x + 2) = x³ − 3x + 2
        let a = 1.0;
        let (b, c, d) = (0.0, -3.0, 2.0);
        let coeffs = CubicCoeffs {
            a,
            b,
            c,
            d,
            depressed: Some(Depressed {
                m: 2.0,
                n: -3.0,
                discriminant: 0.0,
            }),
        };
        let (_, roots) = real_roots(&coeffs).unwrap();
        assert_eq!(roots.len(), 2);
        assert!((roots[0].0 - 1.0).abs() < 1e-6);
        assert_eq!(roots[0].2, 2);
        assert!((roots[1].0 + 2.0).abs() < 1e-9);
    }

    #[test]
    fn split_rounding() {
        let params = reference().with_n_qubits(6).with_inactive_ratio(0.5);
        let split = params.integer_split().unwrap();
        assert_eq!((split.n_active, split.n_inactive), (3, 3));
        let off = params.with_inactive_ratio(0.45);
        assert!(matches!(
            off.integer_split(),
            Err(Error::NonIntegerSplit { .. })
        ));
        assert_eq!(off.split().n_inactive, 3);
        assert!((off.split().rounding_error - 0.3).abs() < 1e-12);
    }

    #[test]
    fn validation_rejects_bad_params() {
        assert!(reference().validate().is_ok());
        assert!(reference().with_n_qubits(0).validate().is_err());
        assert!(reference().with_kappa(0.0).validate().is_err());
        assert!(reference()
            .with_dissipative_coupling(-0.1)
            .validate()
            .is_err());
        assert!(reference().with_inactive_ratio(1.5).validate().is_err());
        assert!(reference().with_drive(f64::NAN).validate().is_err());
    }
}
