//! Exchange overlap of the two-photon amplitude and the resulting
//! polarization Hong-Ou-Mandel visibility.
//!
//! In the HWP + PBS scheme the orthogonally polarized pair passes a
//! half-wave plate at angle θ and is split by a polarizing beamsplitter.
//! With c = cos 2θ and s = sin 2θ, the coincidence amplitude for an H photon
//! at ω1 and a V photon at ω2 is c²·F(ω2, ω1) − s²·F(ω1, ω2), so the
//! coincidence probability is
//!
//! ```text
//! P(θ) = c⁴ + s⁴ − 2·O·c²s² = 1 − (1 + O)/2 · sin²(4θ)
//! ```
//!
//! for a normalized F. P peaks at 1 (θ = 0) and bottoms at (1 − O)/2
//! (θ = 22.5°), giving V = (1 + O)/(3 − O).

use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::dispersion::CrystalSpec;
use crate::error::{Error, Result};
use crate::filters::{apply_filter_to_tpsa, FilterSpec};
use crate::tpsa::{evaluate_tpsa_grid, normalize_grid, GridSpec, PumpSpec, TpsaGrid};

/// Slack allowed on |O| ≤ 1 for rounding.
pub const OVERLAP_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapResult {
    pub overlap: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub samples: usize,
    pub min_nm: f64,
    pub max_nm: f64,
}

/// O = ∬F(λs,λi)F(λi,λs) / ∬F(λs,λi)², trapezoid rule on a common window.
pub fn overlap(grid: &TpsaGrid) -> Result<OverlapResult> {
    if grid.signal != grid.idler {
        return Err(Error::Geometry(format!(
            "overlap needs identical signal and idler axes; got signal [{}, {}] nm × {} and idler [{}, {}] nm × {}. Evaluate on a common square window",
            grid.signal.min_nm,
            grid.signal.max_nm,
            grid.signal.samples,
            grid.idler.min_nm,
            grid.idler.max_nm,
            grid.idler.samples
        )));
    }
    let axis = grid.signal;
    let n = axis.samples;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        let wi = axis.trapezoid_weight(i);
        let row = grid.row(i);
        let mut rn = 0.0;
        let mut rd = 0.0;
        for (j, &f) in row.iter().enumerate() {
            let w = axis.trapezoid_weight(j);
            rn += w * f * grid.get(j, i);
            rd += w * f * f;
        }
        num += wi * rn;
        den += wi * rd;
    }
    let cell = axis.step() * axis.step();
    let (num, den) = (num * cell, den * cell);
    if !(den > 0.0 && den.is_finite()) {
        return Err(Error::Degenerate(format!(
            "grid over [{}, {}] nm has zero power; overlap undefined",
            axis.min_nm, axis.max_nm
        )));
    }
    Ok(OverlapResult {
        overlap: num / den,
        numerator: num,
        denominator: den,
        samples: n,
        min_nm: axis.min_nm,
        max_nm: axis.max_nm,
    })
}

fn check_overlap(o: f64) -> Result<()> {
    if !(o.abs() <= 1.0 + OVERLAP_SLACK) {
        return Err(Error::Domain(format!("overlap {o} lies outside [-1, 1]")));
    }
    Ok(())
}

/// V = (1 + O)/(3 − O).
pub fn visibility_from_overlap(o: f64) -> Result<f64> {
    check_overlap(o)?;
    Ok((1.0 + o) / (3.0 - o))
}

/// Inverse of [`visibility_from_overlap`]: O = (3V − 1)/(1 + V).
pub fn overlap_from_visibility(v: f64) -> f64 {
    (3.0 * v - 1.0) / (1.0 + v)
}

/// Noiseless coincidence probability at HWP angle `theta_deg`.
pub fn coincidence_probability(theta_deg: f64, o: f64) -> f64 {
    let two_theta = 2.0 * theta_deg.to_radians();
    let c2 = two_theta.cos().powi(2);
    let s2 = two_theta.sin().powi(2);
    c2 * c2 + s2 * s2 - 2.0 * o * c2 * s2
}

/// Coincidence rate versus HWP orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HwpCurve {
    pub angles_deg: Vec<f64>,
    pub rates: Vec<f64>,
    pub accidental_rate: f64,
    /// Visibility of the accidental-subtracted least-squares fit, when the
    /// curve is fittable.
    pub visibility_fitted: Option<f64>,
}

impl HwpCurve {
    /// CSV with columns `angle_deg,rate,accidental_rate,rate_minus_accidentals`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("angle_deg,rate,accidental_rate,rate_minus_accidentals\n");
        for (a, r) in self.angles_deg.iter().zip(&self.rates) {
            let _ = writeln!(out, "{a},{r},{},{}", self.accidental_rate, r - self.accidental_rate);
        }
        out
    }
}

/// rate(θ) = pair_rate·P(θ) + accidental_rate.
pub fn hwp_coincidence_curve(o: f64, angles_deg: &[f64], pair_rate: f64, accidental: f64) -> Result<HwpCurve> {
    check_overlap(o)?;
    if !(pair_rate >= 0.0 && accidental >= 0.0) {
        return Err(Error::Domain(format!(
            "rates must be >= 0, got pair {pair_rate}, accidental {accidental}"
        )));
    }
    let rates = angles_deg
        .iter()
        .map(|&t| pair_rate * coincidence_probability(t, o) + accidental)
        .collect();
    let mut curve = HwpCurve {
        angles_deg: angles_deg.to_vec(),
        rates,
        accidental_rate: accidental,
        visibility_fitted: None,
    };
    curve.visibility_fitted = visibility_from_curve(&curve, true).ok().map(|f| f.visibility);
    Ok(curve)
}

/// Accidental coincidence rate R1·R2/R_rep for pulse-gated detection.
pub fn accidental_rate(r1: f64, r2: f64, repetition_hz: f64) -> Result<f64> {
    if !(repetition_hz > 0.0) {
        return Err(Error::Domain(format!(
            "repetition rate must be > 0, got {repetition_hz} Hz"
        )));
    }
    if !(r1 >= 0.0 && r2 >= 0.0) {
        return Err(Error::Domain(format!("singles rates must be >= 0, got {r1}, {r2}")));
    }
    Ok(r1 * r2 / repetition_hz)
}

/// Least-squares fit of `A·[1 − (1+O)/2·sin²(4(θ − θ0))]` to a curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HwpFit {
    pub amplitude: f64,
    pub overlap: f64,
    pub offset_deg: f64,
    pub visibility: f64,
    pub rms_residual: f64,
}

/// Fit the HWP model and return (max − min)/(max + min) of the fit.
///
/// The model is linear in (α, β, γ) after writing it as
/// α + β·cos 8θ + γ·sin 8θ, so the fit is a 3×3 normal-equation solve.
pub fn visibility_from_curve(curve: &HwpCurve, subtract_accidentals: bool) -> Result<HwpFit> {
    let n = curve.angles_deg.len();
    if n < 16 || curve.rates.len() != n {
        return Err(Error::Numerical(format!(
            "HWP fit needs at least 16 (angle, rate) points, got {n}"
        )));
    }
    let lo = curve.angles_deg.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = curve.angles_deg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 45.0 - 1e-9 {
        return Err(Error::Numerical(format!(
            "HWP curve spans {:.3}°, a full 45° period is required",
            hi - lo
        )));
    }
    let offset = if subtract_accidentals {
        curve.accidental_rate
    } else {
        0.0
    };
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for (&t, &r) in curve.angles_deg.iter().zip(&curve.rates) {
        let x = 8.0 * t.to_radians();
        let row = Vector3::new(1.0, x.cos(), x.sin());
        ata += row * row.transpose();
        atb += row * (r - offset);
    }
    let coef = ata
        .try_inverse()
        .map(|inv| inv * atb)
        .ok_or_else(|| Error::Numerical("HWP fit normal equations are singular".into()))?;
    let (alpha, beta, gamma) = (coef[0], coef[1], coef[2]);
    let rms = (curve
        .angles_deg
        .iter()
        .zip(&curve.rates)
        .map(|(&t, &r)| {
            let x = 8.0 * t.to_radians();
            (r - offset - alpha - beta * x.cos() - gamma * x.sin()).powi(2)
        })
        .sum::<f64>()
        / n as f64)
        .sqrt();
    let modulation = beta.hypot(gamma);
    if !(alpha > 0.0) || modulation <= 1e-12 * alpha.abs() {
        return Err(Error::Numerical(format!(
            "HWP fit is degenerate (mean {alpha:e}, modulation {modulation:e}, rms residual {rms:e})"
        )));
    }
    let amplitude = alpha + modulation;
    Ok(HwpFit {
        amplitude,
        overlap: 4.0 * modulation / amplitude - 1.0,
        offset_deg: gamma.atan2(beta).to_degrees() / 8.0,
        visibility: modulation / alpha,
        rms_residual: rms,
    })
}

/// Filter shape swept against bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterFamily {
    Lorentzian,
    SuperGaussian,
}

impl FilterFamily {
    pub fn filter(self, center_nm: f64, fwhm_nm: f64, order: u32) -> FilterSpec {
        match self {
            FilterFamily::Lorentzian => FilterSpec::Lorentzian { center_nm, fwhm_nm },
            FilterFamily::SuperGaussian => FilterSpec::SuperGaussian {
                center_nm,
                fwhm_nm,
                order,
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FilterFamily::Lorentzian => "lorentzian",
            FilterFamily::SuperGaussian => "super-gaussian",
        }
    }
}

/// Window sizing and filter shape for a visibility sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// Total window width as a multiple of the bandwidth.
    pub window_factor: f64,
    pub min_half_width_nm: f64,
    pub max_half_width_nm: f64,
    pub target_spacing_nm: f64,
    pub min_samples: usize,
    pub max_samples: usize,
    pub super_gaussian_order: u32,
    /// Common window for the unfiltered reference point; `None` skips it.
    pub unfiltered_window: Option<GridSpec>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            window_factor: 8.0,
            min_half_width_nm: 2.0,
            max_half_width_nm: 100.0,
            target_spacing_nm: 0.02,
            min_samples: 401,
            max_samples: 3001,
            super_gaussian_order: 3,
            unfiltered_window: None,
        }
    }
}

impl SweepOptions {
    /// Half width and (odd) sample count of the window used for `bandwidth_nm`.
    pub fn window(&self, bandwidth_nm: f64) -> (f64, usize) {
        let half = (0.5 * self.window_factor * bandwidth_nm)
            .max(self.min_half_width_nm)
            .min(self.max_half_width_nm);
        let wanted = (2.0 * half / self.target_spacing_nm).ceil() as usize + 1;
        let mut n = wanted.clamp(self.min_samples.max(3), self.max_samples.max(3));
        if n.is_multiple_of(2) {
            n -= 1;
        }
        (half, n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityPoint {
    /// `None` for the unfiltered reference.
    pub family: Option<FilterFamily>,
    /// Infinite for the unfiltered reference.
    pub bandwidth_nm: f64,
    pub length_scale: f64,
    pub overlap: Option<f64>,
    pub visibility: Option<f64>,
    pub window_min_nm: f64,
    pub window_max_nm: f64,
    pub samples: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityCurve {
    pub points: Vec<VisibilityPoint>,
}

impl VisibilityCurve {
    pub fn csv_header() -> &'static str {
        "length_scale,family,bandwidth_nm,overlap,visibility,window_min_nm,window_max_nm,samples,error\n"
    }

    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for p in &self.points {
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                p.length_scale,
                p.family.map_or("none", FilterFamily::name),
                p.bandwidth_nm,
                opt(p.overlap),
                opt(p.visibility),
                p.window_min_nm,
                p.window_max_nm,
                p.samples,
                p.error.as_deref().unwrap_or("").replace([',', '\n'], ";")
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        format!("{}{}", Self::csv_header(), self.csv_rows())
    }

    /// Point for a given bandwidth, matched to within 1e-9 nm.
    pub fn at(&self, bandwidth_nm: f64) -> Option<&VisibilityPoint> {
        self.points
            .iter()
            .find(|p| (p.bandwidth_nm - bandwidth_nm).abs() < 1e-9)
    }

    pub fn unfiltered(&self) -> Option<&VisibilityPoint> {
        self.points.iter().find(|p| p.family.is_none())
    }
}

/// Overlap and visibility of the state on `window` after `filter` (if any).
pub fn filtered_visibility(
    crystal: &CrystalSpec,
    pump: &PumpSpec,
    window: &GridSpec,
    filter: Option<&FilterSpec>,
    length_scale: f64,
) -> Result<(OverlapResult, f64)> {
    let grid = evaluate_tpsa_grid(window, crystal, pump, length_scale)?;
    let grid = match filter {
        Some(f) => apply_filter_to_tpsa(&grid, f)?,
        None => grid,
    };
    let grid = normalize_grid(&grid)?;
    let o = overlap(&grid)?;
    let v = visibility_from_overlap(o.overlap)?;
    Ok((o, v))
}

/// Visibility versus filter bandwidth, filter centered at degeneracy and
/// applied to both photons. Bandwidths must be positive and descending.
/// Failures are recorded per point; the sweep fails only if every point does.
pub fn visibility_vs_bandwidth_sweep(
    crystal: &CrystalSpec,
    pump: &PumpSpec,
    family: FilterFamily,
    bandwidths_nm: &[f64],
    length_scale: f64,
    options: &SweepOptions,
) -> Result<VisibilityCurve> {
    if bandwidths_nm.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
        return Err(Error::Domain("sweep bandwidths must be positive and finite".into()));
    }
    if bandwidths_nm.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain(
            "sweep bandwidths must be sorted strictly descending".into(),
        ));
    }
    let center = pump.degenerate_nm();
    let mut points = Vec::with_capacity(bandwidths_nm.len() + 1);

    let record = |family: Option<FilterFamily>, bandwidth: f64, window: GridSpec, res: Result<(OverlapResult, f64)>| {
        let (overlap, visibility, error) = match res {
            Ok((o, v)) => (Some(o.overlap), Some(v), None),
            Err(e) => (None, None, Some(e.to_string())),
        };
        VisibilityPoint {
            family,
            bandwidth_nm: bandwidth,
            length_scale,
            overlap,
            visibility,
            window_min_nm: window.signal.min_nm,
            window_max_nm: window.signal.max_nm,
            samples: window.signal.samples,
            error,
        }
    };

    if let Some(window) = options.unfiltered_window {
        let res = filtered_visibility(crystal, pump, &window, None, length_scale);
        points.push(record(None, f64::INFINITY, window, res));
    }
    for &bw in bandwidths_nm {
        let (half, samples) = options.window(bw);
        let window = GridSpec::square(center, half, samples)?;
        let filter = family.filter(center, bw, options.super_gaussian_order);
        let res = filtered_visibility(crystal, pump, &window, Some(&filter), length_scale);
        points.push(record(Some(family), bw, window, res));
    }
    if points.iter().all(|p| p.error.is_some()) {
        let first = points.first().and_then(|p| p.error.clone()).unwrap_or_default();
        return Err(Error::Numerical(format!(
            "every sweep point failed; first error: {first}"
        )));
    }
    Ok(VisibilityCurve { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tpsa::WavelengthAxis;

    fn square(n: usize) -> WavelengthAxis {
        WavelengthAxis::new(790.0, 800.0, n).unwrap()
    }

    #[test]
    fn symmetric_and_antisymmetric_grids() {
        let a = square(41);
        let sym = TpsaGrid::from_fn(a, a, |s, i| {
            (-(s - 795.0).powi(2) - (i - 795.0).powi(2)).exp() * (1.0 + (s - i).powi(2))
        })
        .unwrap();
        assert_eq!(overlap(&sym).unwrap().overlap, 1.0);
        let anti = TpsaGrid::from_fn(a, a, |s, i| {
            (s - i) * (-(s - 795.0).powi(2) - (i - 795.0).powi(2)).exp()
        })
        .unwrap();
        assert_eq!(overlap(&anti).unwrap().overlap, -1.0);
    }

    #[test]
    fn non_square_is_rejected() {
        let g = TpsaGrid::from_fn(square(10), square(11), |_, _| 1.0).unwrap();
        assert!(matches!(overlap(&g), Err(Error::Geometry(_))));
        let z = TpsaGrid::from_fn(square(10), square(10), |_, _| 0.0).unwrap();
        assert!(matches!(overlap(&z), Err(Error::Degenerate(_))));
    }

    #[test]
    fn visibility_endpoints_and_inverse() {
        assert_eq!(visibility_from_overlap(0.0).unwrap(), 1.0 / 3.0);
        assert_eq!(visibility_from_overlap(1.0).unwrap(), 1.0);
        let o = overlap_from_visibility(0.79);
        assert!((o - 0.765_363).abs() < 1e-6);
        assert!((visibility_from_overlap(o).unwrap() - 0.79).abs() < 1e-12);
        assert!((overlap_from_visibility(0.38) - 0.101_449).abs() < 1e-6);
        assert!(visibility_from_overlap(1.1).is_err());
    }

    #[test]
    fn hwp_model_extremes() {
        for o in [0.0, 0.3, 0.765, 1.0] {
            assert!((coincidence_probability(0.0, o) - 1.0).abs() < 1e-15);
            assert!((coincidence_probability(22.5, o) - (1.0 - o) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hwp_fit_recovers_visibility_and_offset() {
        let o = overlap_from_visibility(0.79);
        let angles: Vec<f64> = (0..=90).map(|k| k as f64).collect();
        let shifted: Vec<f64> = angles.iter().map(|t| t - 3.0).collect();
        let rates: Vec<f64> = shifted
            .iter()
            .map(|&t| 1000.0 * coincidence_probability(t, o))
            .collect();
        let curve = HwpCurve {
            angles_deg: angles,
            rates,
            accidental_rate: 0.0,
            visibility_fitted: None,
        };
        let fit = visibility_from_curve(&curve, false).unwrap();
        assert!((fit.visibility - 0.79).abs() < 1e-6);
        assert!((fit.overlap - o).abs() < 1e-9);
        assert!((fit.offset_deg - 3.0).abs() < 1e-9);
        assert!((fit.amplitude - 1000.0).abs() < 1e-6);
    }

    #[test]
    fn accidental_subtraction_round_trips() {
        let o = 0.5;
        let angles: Vec<f64> = (0..32).map(|k| k as f64 * 1.5).collect();
        let acc = accidental_rate(2e6, 2e6, 80e6).unwrap();
        assert_eq!(acc, 5e4);
        let noiseless = hwp_coincidence_curve(o, &angles, 1e5, 0.0).unwrap();
        let noisy = hwp_coincidence_curve(o, &angles, 1e5, acc).unwrap();
        let v0 = visibility_from_curve(&noiseless, true).unwrap().visibility;
        let v1 = visibility_from_curve(&noisy, true).unwrap().visibility;
        let raw = visibility_from_curve(&noisy, false).unwrap().visibility;
        assert!((v0 - v1).abs() < 1e-6);
        assert!(raw < v1);
        assert!((noisy.visibility_fitted.unwrap() - noiseless.visibility_fitted.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn flat_or_short_curves_fail_to_fit() {
        let angles: Vec<f64> = (0..32).map(|k| k as f64 * 1.5).collect();
        let flat = hwp_coincidence_curve(0.5, &angles, 0.0, 10.0).unwrap();
        assert!(flat.visibility_fitted.is_none());
        assert!(matches!(visibility_from_curve(&flat, true), Err(Error::Numerical(_))));
        let short: Vec<f64> = (0..10).map(|k| k as f64 * 5.0).collect();
        let c = hwp_coincidence_curve(0.5, &short, 1.0, 0.0).unwrap();
        assert!(visibility_from_curve(&c, false).is_err());
        let narrow: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let c = hwp_coincidence_curve(0.5, &narrow, 1.0, 0.0).unwrap();
        assert!(visibility_from_curve(&c, false).is_err());
    }

    #[test]
    fn accidental_rate_domain() {
        assert_eq!(accidental_rate(0.0, 0.0, 80e6).unwrap(), 0.0);
        assert!(accidental_rate(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn sweep_window_sizing() {
        let o = SweepOptions::default();
        let (half, n) = o.window(0.15);
        assert_eq!(half, 2.0);
        assert_eq!(n % 2, 1);
        let (half, n) = o.window(10.0);
        assert_eq!(half, 40.0);
        assert_eq!(n, 3001);
        let (half, _) = o.window(1000.0);
        assert_eq!(half, 100.0);
    }
}
