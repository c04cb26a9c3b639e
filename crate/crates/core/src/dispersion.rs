//! Material dispersion and the quasi-phasematched wavevector mismatch.
//!
//! Wavelengths cross the API in nanometres; wavevectors are in rad/m.
//! Dispersion coefficients are data: they are read from a small text file
//! (see [`SellmeierSet::parse`] for the grammar) rather than compiled in.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Default central-difference step for group quantities, nm.
pub const DEFAULT_FD_STEP_NM: f64 = 0.01;

/// Wavelength of the pump photon fixed by energy conservation,
/// 1/λp = 1/λs + 1/λi.
#[inline]
pub fn pump_wavelength(lambda_s_nm: f64, lambda_i_nm: f64) -> f64 {
    1.0 / (1.0 / lambda_s_nm + 1.0 / lambda_i_nm)
}

/// Angular frequency (rad/s) of a vacuum wavelength given in nm.
#[inline]
pub fn angular_frequency(lambda_nm: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / (lambda_nm * 1e-9)
}

/// Principal dielectric axis of the crystal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(format!("unknown axis `{other}` (expected x, y or z)")),
        }
    }
}

/// Functional form of a dispersion record. λ is in micrometres.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DispersionFormula {
    /// n² = A + Σ B_k / (λ² − C_k); coefficients `[A, B1, C1, B2, C2, ...]`.
    Pole,
    /// n² = A − D·λ² + Σ B_k·λ² / (λ² − C_k); coefficients `[A, D, B1, C1, ...]`.
    Sellmeier,
}

impl DispersionFormula {
    fn id(self) -> &'static str {
        match self {
            DispersionFormula::Pole => "pole",
            DispersionFormula::Sellmeier => "sellmeier",
        }
    }

    fn check_arity(self, n: usize) -> std::result::Result<(), String> {
        let ok = match self {
            DispersionFormula::Pole => n >= 1 && n % 2 == 1,
            DispersionFormula::Sellmeier => n >= 2 && n.is_multiple_of(2),
        };
        if ok {
            Ok(())
        } else {
            Err(match self {
                DispersionFormula::Pole => {
                    format!("`pole` takes A followed by (B, C) pairs; got {n} coefficient(s)")
                }
                DispersionFormula::Sellmeier => {
                    format!("`sellmeier` takes A, D followed by (B, C) pairs; got {n} coefficient(s)")
                }
            })
        }
    }
}

impl FromStr for DispersionFormula {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pole" => Ok(DispersionFormula::Pole),
            "sellmeier" => Ok(DispersionFormula::Sellmeier),
            other => Err(format!(
                "unknown dispersion formula `{other}` (expected pole or sellmeier)"
            )),
        }
    }
}

/// Dispersion of one polarization axis over its validity interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisDispersion {
    pub formula: DispersionFormula,
    pub coefficients: Vec<f64>,
    pub min_nm: f64,
    pub max_nm: f64,
}

impl AxisDispersion {
    pub fn new(formula: DispersionFormula, coefficients: Vec<f64>, min_nm: f64, max_nm: f64) -> Result<Self> {
        formula.check_arity(coefficients.len()).map_err(Error::Config)?;
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("dispersion coefficients must be finite".into()));
        }
        if !(min_nm.is_finite() && max_nm.is_finite() && min_nm > 0.0 && min_nm < max_nm) {
            return Err(Error::Config(format!("invalid validity range [{min_nm}, {max_nm}] nm")));
        }
        Ok(Self {
            formula,
            coefficients,
            min_nm,
            max_nm,
        })
    }

    /// n² at λ in nm. No range check.
    #[inline]
    pub fn n_squared(&self, lambda_nm: f64) -> f64 {
        let l = lambda_nm * 1e-3;
        let l2 = l * l;
        let c = &self.coefficients;
        match self.formula {
            DispersionFormula::Pole => {
                let mut acc = c[0];
                for pair in c[1..].chunks_exact(2) {
                    acc += pair[0] / (l2 - pair[1]);
                }
                acc
            }
            DispersionFormula::Sellmeier => {
                let mut acc = c[0] - c[1] * l2;
                for pair in c[2..].chunks_exact(2) {
                    acc += pair[0] * l2 / (l2 - pair[1]);
                }
                acc
            }
        }
    }

    #[inline]
    pub fn contains(&self, lambda_nm: f64) -> bool {
        lambda_nm >= self.min_nm && lambda_nm <= self.max_nm
    }
}

/// Dispersion records for the crystal's principal axes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SellmeierSet {
    axes: [Option<AxisDispersion>; 3],
}

impl SellmeierSet {
    pub fn with_axis(mut self, axis: Axis, record: AxisDispersion) -> Self {
        self.axes[axis.index()] = Some(record);
        self
    }

    pub fn axis(&self, axis: Axis) -> Result<&AxisDispersion> {
        self.axes[axis.index()]
            .as_ref()
            .ok_or_else(|| Error::Config(format!("no dispersion record for axis {axis}")))
    }

    /// Validity interval (nm) of one axis.
    pub fn validity(&self, axis: Axis) -> Result<(f64, f64)> {
        self.axis(axis).map(|r| (r.min_nm, r.max_nm))
    }

    /// Parse the dispersion-data text format.
    ///
    /// ```text
    /// # comment
    /// <axis> <formula> <min_nm> <max_nm> : <c0> <c1> ...
    /// ```
    ///
    /// `axis` is `x`, `y` or `z`; `formula` is `pole` or `sellmeier`
    /// (see [`DispersionFormula`]). Tokens are whitespace separated, `#`
    /// starts a comment, and each axis may appear at most once.
    pub fn parse(text: &str) -> Result<Self> {
        let mut set = SellmeierSet::default();
        let mut any = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("");
            if line.trim().is_empty() {
                continue;
            }
            let fail = |col: usize, message: String| Error::Parse {
                line: lineno + 1,
                column: col + 1,
                message,
            };
            let tokens = tokenize(line);
            let colon = tokens
                .iter()
                .position(|(_, t)| *t == ":")
                .ok_or_else(|| fail(line.len(), "missing `:` before coefficient list".into()))?;
            let head = &tokens[..colon];
            let coeff_tokens = &tokens[colon + 1..];
            if head.len() != 4 {
                let col = head.get(4).map_or(line.len(), |(c, _)| *c);
                return Err(fail(
                    col,
                    format!(
                        "expected `<axis> <formula> <min_nm> <max_nm>` before `:`, found {} field(s)",
                        head.len()
                    ),
                ));
            }
            let axis: Axis = head[0].1.parse().map_err(|e| fail(head[0].0, e))?;
            let formula: DispersionFormula = head[1].1.parse().map_err(|e| fail(head[1].0, e))?;
            let min_nm = parse_number(head[2]).map_err(|(c, m)| fail(c, m))?;
            let max_nm = parse_number(head[3]).map_err(|(c, m)| fail(c, m))?;
            if !(min_nm > 0.0 && min_nm < max_nm) {
                return Err(fail(
                    head[2].0,
                    format!("validity range must satisfy 0 < min < max, got [{min_nm}, {max_nm}]"),
                ));
            }
            let coefficients = coeff_tokens
                .iter()
                .map(|t| parse_number(*t))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|(c, m)| fail(c, m))?;
            formula
                .check_arity(coefficients.len())
                .map_err(|m| fail(tokens[colon].0, m))?;
            if set.axes[axis.index()].is_some() {
                return Err(fail(head[0].0, format!("duplicate record for axis {axis}")));
            }
            set.axes[axis.index()] = Some(AxisDispersion {
                formula,
                coefficients,
                min_nm,
                max_nm,
            });
            any = true;
        }
        if !any {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: "no dispersion records found".into(),
            });
        }
        Ok(set)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Write the set back out in the text format accepted by [`parse`](Self::parse).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            if let Some(r) = &self.axes[axis.index()] {
                out.push_str(&format!("{axis} {} {} {} :", r.formula.id(), r.min_nm, r.max_nm));
                for c in &r.coefficients {
                    out.push_str(&format!(" {c}"));
                }
                out.push('\n');
            }
        }
        out
    }

    /// Refractive index along `axis` at `lambda_nm`.
    pub fn refractive_index(&self, axis: Axis, lambda_nm: f64) -> Result<f64> {
        let rec = self.axis(axis)?;
        if !rec.contains(lambda_nm) {
            return Err(Error::range(
                format!("wavelength (nm) on axis {axis}"),
                lambda_nm,
                rec.min_nm,
                rec.max_nm,
            ));
        }
        let n2 = rec.n_squared(lambda_nm);
        if !(n2.is_finite() && n2 > 1.0) {
            return Err(Error::Numerical(format!(
                "n^2 = {n2} on axis {axis} at {lambda_nm} nm; dispersion record is unphysical here"
            )));
        }
        Ok(n2.sqrt())
    }
}

fn tokenize(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() || ch == ':' {
            if let Some(s) = start.take() {
                out.push((s, &line[s..i]));
            }
            if ch == ':' {
                out.push((i, ":"));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s, &line[s..]));
    }
    out
}

fn parse_number((col, tok): (usize, &str)) -> std::result::Result<f64, (usize, String)> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err((col, format!("expected a finite number, found `{tok}`"))),
    }
}

/// Periodically poled crystal waveguide.
///
/// Pump and idler are polarized along `y`, the signal along `z` by default
/// (type-II). `calibration_offset` is added to every phase mismatch and
/// stands in for the waveguide-mode index correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrystalSpec {
    pub sellmeier: SellmeierSet,
    pub length_m: f64,
    pub poling_period_m: f64,
    pub qpm_order: u32,
    pub calibration_offset: f64,
    pub pump_axis: Axis,
    pub signal_axis: Axis,
    pub idler_axis: Axis,
    pub fd_step_nm: f64,
}

impl CrystalSpec {
    pub fn new(sellmeier: SellmeierSet, length_m: f64, poling_period_m: f64, qpm_order: u32) -> Result<Self> {
        if !(length_m.is_finite() && length_m > 0.0) {
            return Err(Error::Config(format!("crystal length must be > 0, got {length_m} m")));
        }
        if !(poling_period_m.is_finite() && poling_period_m > 0.0) {
            return Err(Error::Config(format!(
                "poling period must be > 0, got {poling_period_m} m"
            )));
        }
        if qpm_order == 0 {
            return Err(Error::Config("QPM order must be >= 1".into()));
        }
        Ok(Self {
            sellmeier,
            length_m,
            poling_period_m,
            qpm_order,
            calibration_offset: 0.0,
            pump_axis: Axis::Y,
            signal_axis: Axis::Z,
            idler_axis: Axis::Y,
            fd_step_nm: DEFAULT_FD_STEP_NM,
        })
    }

    /// K = 2π/Λ, rad/m.
    pub fn grating_vector(&self) -> f64 {
        2.0 * PI / self.poling_period_m
    }

    pub fn refractive_index(&self, axis: Axis, lambda_nm: f64) -> Result<f64> {
        self.sellmeier.refractive_index(axis, lambda_nm)
    }

    /// k = 2π·n(λ)/λ in rad/m.
    pub fn wavevector(&self, axis: Axis, lambda_nm: f64) -> Result<f64> {
        let n = self.refractive_index(axis, lambda_nm)?;
        Ok(2.0 * PI * n / (lambda_nm * 1e-9))
    }

    fn bulk_mismatch(&self, lambda_s_nm: f64, lambda_i_nm: f64) -> Result<f64> {
        let lambda_p = pump_wavelength(lambda_s_nm, lambda_i_nm);
        let kp = self.wavevector(self.pump_axis, lambda_p)?;
        let ks = self.wavevector(self.signal_axis, lambda_s_nm)?;
        let ki = self.wavevector(self.idler_axis, lambda_i_nm)?;
        Ok(kp - ks - ki - self.qpm_order as f64 * self.grating_vector())
    }

    /// Δk = k_p(λp) − k_s(λs) − k_i(λi) − m·K + C, rad/m, with λp from
    /// energy conservation.
    pub fn phase_mismatch(&self, lambda_s_nm: f64, lambda_i_nm: f64) -> Result<f64> {
        Ok(self.bulk_mismatch(lambda_s_nm, lambda_i_nm)? + self.calibration_offset)
    }

    /// Offset C that zeroes the mismatch at the degenerate point. Ignores
    /// any offset already stored, so repeated calls agree.
    pub fn calibrate_degeneracy(&self, lambda_pump_nm: f64, lambda_degenerate_nm: f64) -> Result<f64> {
        let expected = 2.0 * lambda_pump_nm;
        if !((lambda_degenerate_nm - expected).abs() <= 1e-9 * expected) {
            return Err(Error::Domain(format!(
                "degenerate wavelength {lambda_degenerate_nm} nm is not twice the pump wavelength {lambda_pump_nm} nm"
            )));
        }
        Ok(-self.bulk_mismatch(lambda_degenerate_nm, lambda_degenerate_nm)?)
    }

    /// Returns a copy with the calibration offset pinned to the degenerate point.
    pub fn calibrated(mut self, lambda_pump_nm: f64) -> Result<Self> {
        self.calibration_offset = self.calibrate_degeneracy(lambda_pump_nm, 2.0 * lambda_pump_nm)?;
        Ok(self)
    }

    /// n − λ·dn/dλ by central difference with step `fd_step_nm`.
    pub fn group_index(&self, axis: Axis, lambda_nm: f64) -> Result<f64> {
        let h = self.fd_step_nm;
        let n = self.refractive_index(axis, lambda_nm)?;
        let plus = self.refractive_index(axis, lambda_nm + h)?;
        let minus = self.refractive_index(axis, lambda_nm - h)?;
        Ok(n - lambda_nm * (plus - minus) / (2.0 * h))
    }

    /// Group velocity c/n_g in m/s.
    pub fn group_velocity(&self, axis: Axis, lambda_nm: f64) -> Result<f64> {
        Ok(SPEED_OF_LIGHT / self.group_index(axis, lambda_nm)?)
    }

    /// Interval of pump wavelengths reached by a signal/idler window.
    pub(crate) fn check_window(&self, signal: (f64, f64), idler: (f64, f64)) -> Result<()> {
        let check = |axis: Axis, (lo, hi): (f64, f64), role: &str| -> Result<()> {
            let (min, max) = self.sellmeier.validity(axis)?;
            for v in [lo, hi] {
                if !(v >= min && v <= max) {
                    return Err(Error::range(
                        format!("{role} window edge (nm, axis {axis})"),
                        v,
                        min,
                        max,
                    ));
                }
            }
            Ok(())
        };
        check(self.signal_axis, signal, "signal")?;
        check(self.idler_axis, idler, "idler")?;
        let pump = (pump_wavelength(signal.0, idler.0), pump_wavelength(signal.1, idler.1));
        check(self.pump_axis, pump, "derived pump")
    }

    /// Δk without range checks; caller has validated the window.
    #[inline]
    pub(crate) fn phase_mismatch_unchecked(&self, k_signal: f64, k_idler: f64, lambda_p_nm: f64) -> f64 {
        let rec = self.sellmeier.axes[self.pump_axis.index()]
            .as_ref()
            .expect("pump axis validated");
        let kp = 2.0 * PI * rec.n_squared(lambda_p_nm).sqrt() / (lambda_p_nm * 1e-9);
        kp - k_signal - k_idler - self.qpm_order as f64 * self.grating_vector() + self.calibration_offset
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const KATO: &str = include_str!("../data/ktp_kato2002.disp");

    fn ktp() -> CrystalSpec {
        CrystalSpec::new(SellmeierSet::parse(KATO).unwrap(), 12e-3, 8.52e-6, 1).unwrap()
    }

    fn constant(n2: f64) -> SellmeierSet {
        let rec = AxisDispersion::new(DispersionFormula::Pole, vec![n2], 100.0, 5000.0).unwrap();
        SellmeierSet::default()
            .with_axis(Axis::Y, rec.clone())
            .with_axis(Axis::Z, rec)
    }

    #[test]
    fn degenerate_formula_is_sqrt_of_constant() {
        let s = constant(2.25);
        assert_eq!(s.refractive_index(Axis::Z, 795.0).unwrap(), 1.5);
    }

    #[test]
    fn ktp_indices_near_795() {
        // Values from an independent hand evaluation of the Kato 2002 formula.
        let c = ktp();
        let nz = c.refractive_index(Axis::Z, 795.0).unwrap();
        let ny = c.refractive_index(Axis::Y, 795.0).unwrap();
        assert!((nz - 1.845_070_160_185_497).abs() < 1e-12, "{nz}");
        assert!((ny - 1.756_837_315_599_053).abs() < 1e-12, "{ny}");
    }

    #[test]
    fn out_of_range_names_axis_and_interval() {
        let err = ktp().refractive_index(Axis::Z, 200.0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("axis z"), "{msg}");
        assert!(msg.contains("[350, 1100]"), "{msg}");
    }

    #[test]
    fn wavevector_arithmetic() {
        let c = CrystalSpec::new(constant(2.25), 1e-3, 1e-5, 1).unwrap();
        let k = c.wavevector(Axis::Z, 750.0).unwrap();
        assert!((k - 2.0 * PI * 1.5 / 750e-9).abs() < 1e-6);
        assert!((k - 1.2566e7).abs() / 1.2566e7 < 1e-4);
        let k2 = c.wavevector(Axis::Z, 1500.0).unwrap();
        assert!((k2 - k / 2.0).abs() < 1e-6);
    }

    #[test]
    fn calibrated_mismatch_vanishes_at_degeneracy() {
        let c = ktp().calibrated(397.65).unwrap();
        let dk = c.phase_mismatch(795.3, 795.3).unwrap();
        assert!(dk.abs() < 1e-3, "{dk}");
    }

    #[test]
    fn calibration_constant_regression() {
        // Residual bulk mismatch computed once with the Python oracle (numpy,
        // same Kato coefficients).
        let c = ktp();
        let offset = c.calibrate_degeneracy(397.65, 795.3).unwrap();
        assert!((offset - 38_090.39).abs() < 0.1, "{offset}");
        let again = c.clone().calibrated(397.65).unwrap();
        assert_eq!(again.calibrate_degeneracy(397.65, 795.3).unwrap(), offset);
    }

    #[test]
    fn calibration_is_zero_when_bulk_already_phasematched() {
        let mut c = ktp();
        let residual = c.phase_mismatch(795.3, 795.3).unwrap();
        // Choose Λ so that m·K absorbs the residual exactly.
        c.poling_period_m = 2.0 * PI / (c.grating_vector() + residual);
        let offset = c.calibrate_degeneracy(397.65, 795.3).unwrap();
        assert!(offset.abs() < 1e-3, "{offset}");
    }

    #[test]
    fn calibration_rejects_non_degenerate_point() {
        assert!(matches!(
            ktp().calibrate_degeneracy(397.65, 800.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn type_ii_mismatch_is_asymmetric() {
        let c = ktp().calibrated(397.65).unwrap();
        let a = c.phase_mismatch(794.0, 796.6).unwrap();
        let b = c.phase_mismatch(796.6, 794.0).unwrap();
        assert!((a - b).abs() > 1.0, "{a} {b}");
    }

    #[test]
    fn offset_is_additive() {
        let mut c = ktp();
        let before = c.phase_mismatch(780.0, 812.0).unwrap();
        c.calibration_offset += 123.5;
        let after = c.phase_mismatch(780.0, 812.0).unwrap();
        assert_eq!(after - before, 123.5);
    }

    #[test]
    fn derived_pump_out_of_range() {
        let c = ktp();
        // 1/(1/600 + 1/600) = 300 nm, below the pump validity.
        let err = c.phase_mismatch(600.0, 600.0).unwrap_err();
        assert!(err.to_string().contains("axis y"));
    }

    #[test]
    fn group_velocity_of_constant_medium() {
        let c = CrystalSpec::new(constant(2.25), 1e-3, 1e-5, 1).unwrap();
        let v = c.group_velocity(Axis::Z, 795.0).unwrap();
        assert!((v - SPEED_OF_LIGHT / 1.5).abs() < 1e-3);
    }

    #[test]
    fn group_velocities_differ_between_axes() {
        // Oracle: central difference on the numpy Sellmeier implementation.
        let c = ktp();
        let ngz = c.group_index(Axis::Z, 795.3).unwrap();
        let ngy = c.group_index(Axis::Y, 795.3).unwrap();
        let ngp = c.group_index(Axis::Y, 397.65).unwrap();
        assert!((ngz - 1.912_436).abs() < 1e-5, "{ngz}");
        assert!((ngy - 1.806_310).abs() < 1e-5, "{ngy}");
        assert!((ngp - 2.141_876).abs() < 1e-5, "{ngp}");
        let vz = c.group_velocity(Axis::Z, 795.0).unwrap();
        let vy = c.group_velocity(Axis::Y, 795.0).unwrap();
        assert!(vy > vz);
    }

    #[test]
    fn index_is_decreasing_and_bounded() {
        let c = ktp();
        for axis in [Axis::Y, Axis::Z] {
            let mut prev = f64::INFINITY;
            for i in 0..=650 {
                let l = 350.0 + i as f64;
                let n = c.refractive_index(axis, l).unwrap();
                assert!(n > 1.0 && n < 3.0);
                assert!(n < prev);
                prev = n;
            }
        }
    }

    #[test]
    fn derivative_is_smooth() {
        let mut c = ktp();
        for l in [400.0, 600.0, 795.3, 950.0] {
            c.fd_step_nm = 0.01;
            let coarse = c.group_index(Axis::Z, l).unwrap();
            c.fd_step_nm = 0.001;
            let fine = c.group_index(Axis::Z, l).unwrap();
            let n = c.refractive_index(Axis::Z, l).unwrap();
            let (dc, df) = (n - coarse, n - fine);
            assert!((dc - df).abs() / df.abs() < 1e-4, "{l}: {dc} {df}");
        }
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = SellmeierSet::parse("y pole 350 1100 : 1.0\nz polo 350 1100 : 2.0\n").unwrap_err();
        match err {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (2, 3)),
            other => panic!("{other:?}"),
        }
        assert!(SellmeierSet::parse("y pole 350 1100 : 1.0 2.0\n").is_err());
        assert!(SellmeierSet::parse("y pole 1100 350 : 1.0\n").is_err());
        assert!(SellmeierSet::parse("y pole 350 1100 : 1\ny pole 350 1100 : 1\n").is_err());
        assert!(SellmeierSet::parse("# nothing\n").is_err());
        assert!(SellmeierSet::parse("y pole 350 1100 1.0\n").is_err());
    }

    #[test]
    fn text_form_round_trips() {
        let s = SellmeierSet::parse(KATO).unwrap();
        assert_eq!(SellmeierSet::parse(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn sellmeier_form_matches_equivalent_pole_form() {
        // B/(1 − C/λ²) = B + B·C/(λ² − C)
        let (a, b, cc, d) = (2.19229, 0.83547, 0.04970, 0.01621);
        let s = AxisDispersion::new(DispersionFormula::Sellmeier, vec![a, d, b, cc], 300.0, 2000.0).unwrap();
        for l in [400.0, 795.0, 1500.0] {
            let lu: f64 = l * 1e-3;
            let expected = a + b / (1.0 - cc / (lu * lu)) - d * lu * lu;
            assert!((s.n_squared(l) - expected).abs() < 1e-12);
        }
    }
}
