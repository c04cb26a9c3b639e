//! Two-photon spectral amplitude on rectangular wavelength grids.
//!
//! F(λs, λi) = E_p(ωs + ωi − ωp) · sinc(s·L·Δk/2), with a Gaussian pump
//! envelope and the sinc phasematching function. `s` is a length scale
//! applied to L, used to generate broader or narrower variants of the same
//! state. Values are stored row-major, `values[signal_index][idler_index]`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::{angular_frequency, pump_wavelength, CrystalSpec, SPEED_OF_LIGHT};
use crate::error::{Error, Result};

/// Uniformly sampled wavelength axis, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavelengthAxis {
    pub min_nm: f64,
    pub max_nm: f64,
    pub samples: usize,
}

impl WavelengthAxis {
    pub fn new(min_nm: f64, max_nm: f64, samples: usize) -> Result<Self> {
        if !(min_nm.is_finite() && max_nm.is_finite() && min_nm < max_nm) {
            return Err(Error::Geometry(format!(
                "axis requires min < max, got [{min_nm}, {max_nm}] nm"
            )));
        }
        if samples < 2 {
            return Err(Error::Geometry(format!(
                "axis requires at least 2 samples, got {samples}"
            )));
        }
        Ok(Self {
            min_nm,
            max_nm,
            samples,
        })
    }

    /// Axis of `samples` points spanning `center ± half_width`.
    pub fn centered(center_nm: f64, half_width_nm: f64, samples: usize) -> Result<Self> {
        Self::new(center_nm - half_width_nm, center_nm + half_width_nm, samples)
    }

    #[inline]
    pub fn step(&self) -> f64 {
        (self.max_nm - self.min_nm) / (self.samples - 1) as f64
    }

    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.samples {
            self.max_nm
        } else {
            self.min_nm + i as f64 * self.step()
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.samples).map(|i| self.value(i)).collect()
    }

    /// Trapezoid-rule weight (in units of the step) of sample `i`.
    #[inline]
    pub fn trapezoid_weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.samples {
            0.5
        } else {
            1.0
        }
    }

    /// Index of the sample closest to `lambda_nm`, or `None` outside the axis.
    pub fn nearest_index(&self, lambda_nm: f64) -> Option<usize> {
        if !(lambda_nm >= self.min_nm && lambda_nm <= self.max_nm) {
            return None;
        }
        let idx = ((lambda_nm - self.min_nm) / self.step()).round() as usize;
        Some(idx.min(self.samples - 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub signal: WavelengthAxis,
    pub idler: WavelengthAxis,
}

impl GridSpec {
    /// Square grid with identical signal and idler axes.
    pub fn square(center_nm: f64, half_width_nm: f64, samples: usize) -> Result<Self> {
        let axis = WavelengthAxis::centered(center_nm, half_width_nm, samples)?;
        Ok(Self {
            signal: axis,
            idler: axis,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeShape {
    #[default]
    Gaussian,
}

/// Pump pulse spectrum. `fwhm_nm` is the intensity FWHM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpSpec {
    pub center_nm: f64,
    pub fwhm_nm: f64,
    #[serde(default)]
    pub envelope: EnvelopeShape,
}

impl PumpSpec {
    pub fn new(center_nm: f64, fwhm_nm: f64) -> Result<Self> {
        if !(center_nm.is_finite() && center_nm > 0.0) {
            return Err(Error::Config(format!("pump center must be > 0, got {center_nm} nm")));
        }
        if !(fwhm_nm.is_finite() && fwhm_nm > 0.0) {
            return Err(Error::Config(format!("pump FWHM must be > 0, got {fwhm_nm} nm")));
        }
        Ok(Self {
            center_nm,
            fwhm_nm,
            envelope: EnvelopeShape::Gaussian,
        })
    }

    pub fn degenerate_nm(&self) -> f64 {
        2.0 * self.center_nm
    }

    fn envelope(&self) -> PumpEnvelope {
        let omega_p = angular_frequency(self.center_nm);
        // Intensity FWHM converted to angular frequency at the pump center.
        let lambda = self.center_nm * 1e-9;
        let fwhm_omega = 2.0 * PI * SPEED_OF_LIGHT * self.fwhm_nm * 1e-9 / (lambda * lambda);
        // |E|² = exp(−ν²/σ²) has FWHM 2σ√ln2.
        let sigma = fwhm_omega / (2.0 * std::f64::consts::LN_2.sqrt());
        PumpEnvelope {
            omega_p,
            inv_two_sigma_sq: 1.0 / (2.0 * sigma * sigma),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct PumpEnvelope {
    omega_p: f64,
    inv_two_sigma_sq: f64,
}

impl PumpEnvelope {
    #[inline]
    fn amplitude(&self, omega_s: f64, omega_i: f64) -> f64 {
        let nu = omega_s + omega_i - self.omega_p;
        (-nu * nu * self.inv_two_sigma_sq).exp()
    }
}

/// sin(x)/x with sinc(0) = 1.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Pump spectral amplitude E_p at the detuning ωs + ωi − ωp.
pub fn pump_amplitude(lambda_s_nm: f64, lambda_i_nm: f64, pump: &PumpSpec) -> f64 {
    pump.envelope()
        .amplitude(angular_frequency(lambda_s_nm), angular_frequency(lambda_i_nm))
}

/// sinc(length_scale·L·Δk/2).
pub fn phasematching_amplitude(
    lambda_s_nm: f64,
    lambda_i_nm: f64,
    crystal: &CrystalSpec,
    length_scale: f64,
) -> Result<f64> {
    let dk = crystal.phase_mismatch(lambda_s_nm, lambda_i_nm)?;
    Ok(sinc(length_scale * crystal.length_m * dk / 2.0))
}

/// Sampled two-photon amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct TpsaGrid {
    pub signal: WavelengthAxis,
    pub idler: WavelengthAxis,
    values: Vec<f64>,
    pub normalized: bool,
    pub length_scale: f64,
    pub provenance: BTreeMap<String, String>,
}

impl TpsaGrid {
    /// Wrap a row-major value buffer.
    pub fn from_values(signal: WavelengthAxis, idler: WavelengthAxis, values: Vec<f64>) -> Result<Self> {
        if values.len() != signal.samples * idler.samples {
            return Err(Error::Geometry(format!(
                "value buffer has {} entries, axes need {}×{}",
                values.len(),
                signal.samples,
                idler.samples
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite amplitude at sample ({}, {})",
                bad / idler.samples,
                bad % idler.samples
            )));
        }
        Ok(Self {
            signal,
            idler,
            values,
            normalized: false,
            length_scale: 1.0,
            provenance: BTreeMap::new(),
        })
    }

    /// Build a grid by evaluating `f(λs, λi)` at every sample.
    pub fn from_fn(signal: WavelengthAxis, idler: WavelengthAxis, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(signal.samples * idler.samples);
        for i in 0..signal.samples {
            let ls = signal.value(i);
            for j in 0..idler.samples {
                values.push(f(ls, idler.value(j)));
            }
        }
        Self::from_values(signal, idler, values)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.idler.samples + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.idler.samples;
        &self.values[i * n..(i + 1) * n]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.signal.samples, self.idler.samples)
    }

    /// Trapezoid-rule ∬|F|² dλs dλi.
    pub fn power(&self) -> f64 {
        let cell = self.signal.step() * self.idler.step();
        let total: f64 = (0..self.signal.samples)
            .map(|i| {
                let wi = self.signal.trapezoid_weight(i);
                self.row(i)
                    .iter()
                    .enumerate()
                    .map(|(j, v)| self.idler.trapezoid_weight(j) * v * v)
                    .sum::<f64>()
                    * wi
            })
            .sum();
        total * cell
    }

    /// Swap the roles of the two axes.
    pub fn transposed(&self) -> Self {
        let (ns, ni) = self.shape();
        let mut values = vec![0.0; ns * ni];
        for i in 0..ns {
            for j in 0..ni {
                values[j * ns + i] = self.values[i * ni + j];
            }
        }
        Self {
            signal: self.idler,
            idler: self.signal,
            values,
            normalized: self.normalized,
            length_scale: self.length_scale,
            provenance: self.provenance.clone(),
        }
    }

    /// Multiply every sample by `factor`; the result is not marked normalized.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out.normalized = false;
        out
    }

    /// Multiply sample (i, j) by `row[i]·col[j]`.
    pub(crate) fn weighted(&self, row: &[f64], col: &[f64]) -> Self {
        let mut out = self.clone();
        let n = self.idler.samples;
        out.values
            .par_chunks_mut(n)
            .zip(row.par_iter())
            .for_each(|(r, &a)| r.iter_mut().zip(col).for_each(|(v, &b)| *v *= a * b));
        out.normalized = false;
        out
    }

    /// Header + matrix text form: `#`-prefixed `key=value` header lines,
    /// then one comma-separated line of idler samples per signal sample.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 24 + 512);
        out.push_str("# biphoton tpsa grid v1\n");
        let _ = writeln!(out, "# signal_min_nm={}", self.signal.min_nm);
        let _ = writeln!(out, "# signal_max_nm={}", self.signal.max_nm);
        let _ = writeln!(out, "# signal_samples={}", self.signal.samples);
        let _ = writeln!(out, "# idler_min_nm={}", self.idler.min_nm);
        let _ = writeln!(out, "# idler_max_nm={}", self.idler.max_nm);
        let _ = writeln!(out, "# idler_samples={}", self.idler.samples);
        let _ = writeln!(out, "# normalized={}", self.normalized);
        let _ = writeln!(out, "# length_scale={}", self.length_scale);
        for (k, v) in &self.provenance {
            let _ = writeln!(out, "# provenance.{k}={v}");
        }
        for i in 0..self.signal.samples {
            let mut first = true;
            for v in self.row(i) {
                if !first {
                    out.push(',');
                }
                first = false;
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Parse the text form written by [`to_csv`](Self::to_csv).
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut header: BTreeMap<String, String> = BTreeMap::new();
        let mut provenance = BTreeMap::new();
        let mut values = Vec::new();
        let mut rows = 0usize;
        let mut width: Option<usize> = None;
        let parse_err = |line: usize, column: usize, message: String| Error::Parse { line, column, message };
        for (n, line) in text.lines().enumerate() {
            let lineno = n + 1;
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some((k, v)) = rest.split_once('=') {
                    let (k, v) = (k.trim(), v.trim());
                    if let Some(p) = k.strip_prefix("provenance.") {
                        provenance.insert(p.to_string(), v.to_string());
                    } else {
                        header.insert(k.to_string(), v.to_string());
                    }
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut count = 0usize;
            let mut col = 1usize;
            for field in line.split(',') {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(lineno, col, format!("expected a number, found `{}`", field.trim())))?;
                values.push(v);
                count += 1;
                col += field.len() + 1;
            }
            match width {
                None => width = Some(count),
                Some(w) if w != count => {
                    return Err(parse_err(
                        lineno,
                        1,
                        format!("row has {count} values, previous rows have {w}"),
                    ))
                }
                _ => {}
            }
            rows += 1;
        }
        let get = |key: &str| -> Result<&String> {
            header
                .get(key)
                .ok_or_else(|| parse_err(1, 1, format!("missing header key `{key}`")))
        };
        let num = |key: &str| -> Result<f64> {
            get(key)?
                .parse::<f64>()
                .map_err(|_| parse_err(1, 1, format!("header key `{key}` is not a number")))
        };
        let count = |key: &str| -> Result<usize> {
            get(key)?
                .parse::<usize>()
                .map_err(|_| parse_err(1, 1, format!("header key `{key}` is not a count")))
        };
        let signal = WavelengthAxis::new(num("signal_min_nm")?, num("signal_max_nm")?, count("signal_samples")?)?;
        let idler = WavelengthAxis::new(num("idler_min_nm")?, num("idler_max_nm")?, count("idler_samples")?)?;
        if rows != signal.samples || width.unwrap_or(0) != idler.samples {
            return Err(Error::Geometry(format!(
                "matrix is {rows}×{}, header declares {}×{}",
                width.unwrap_or(0),
                signal.samples,
                idler.samples
            )));
        }
        let normalized = match get("normalized")?.as_str() {
            "true" => true,
            "false" => false,
            other => {
                return Err(parse_err(
                    1,
                    1,
                    format!("`normalized` must be true/false, found `{other}`"),
                ))
            }
        };
        let length_scale = num("length_scale")?;
        let mut grid = Self::from_values(signal, idler, values)?;
        grid.normalized = normalized;
        grid.length_scale = length_scale;
        grid.provenance = provenance;
        Ok(grid)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

/// Evaluate F on every sample of `grid`. Rows are computed in parallel;
/// each sample depends only on its own coordinates.
pub fn evaluate_tpsa_grid(
    grid: &GridSpec,
    crystal: &CrystalSpec,
    pump: &PumpSpec,
    length_scale: f64,
) -> Result<TpsaGrid> {
    if !(length_scale.is_finite() && length_scale > 0.0) {
        return Err(Error::Domain(format!("length scale must be > 0, got {length_scale}")));
    }
    crystal.check_window(
        (grid.signal.min_nm, grid.signal.max_nm),
        (grid.idler.min_nm, grid.idler.max_nm),
    )?;

    let signal_nm = grid.signal.values();
    let idler_nm = grid.idler.values();
    let k_signal = signal_nm
        .iter()
        .map(|&l| crystal.wavevector(crystal.signal_axis, l))
        .collect::<Result<Vec<_>>>()?;
    let k_idler = idler_nm
        .iter()
        .map(|&l| crystal.wavevector(crystal.idler_axis, l))
        .collect::<Result<Vec<_>>>()?;
    let omega_signal: Vec<f64> = signal_nm.iter().map(|&l| angular_frequency(l)).collect();
    let omega_idler: Vec<f64> = idler_nm.iter().map(|&l| angular_frequency(l)).collect();
    let envelope = pump.envelope();
    let half_length = length_scale * crystal.length_m / 2.0;

    let n = grid.idler.samples;
    let mut values = vec![0.0; grid.signal.samples * n];
    values.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let ls = signal_nm[i];
        for (j, out) in row.iter_mut().enumerate() {
            let lp = pump_wavelength(ls, idler_nm[j]);
            let dk = crystal.phase_mismatch_unchecked(k_signal[i], k_idler[j], lp);
            *out = envelope.amplitude(omega_signal[i], omega_idler[j]) * sinc(half_length * dk);
        }
    });

    let mut out = TpsaGrid::from_values(grid.signal, grid.idler, values)?;
    out.length_scale = length_scale;
    let p = &mut out.provenance;
    p.insert("crystal.length_mm".into(), format!("{}", crystal.length_m * 1e3));
    p.insert(
        "crystal.poling_period_um".into(),
        format!("{}", crystal.poling_period_m * 1e6),
    );
    p.insert("crystal.qpm_order".into(), format!("{}", crystal.qpm_order));
    p.insert(
        "crystal.calibration_offset_rad_per_m".into(),
        format!("{}", crystal.calibration_offset),
    );
    p.insert("pump.center_nm".into(), format!("{}", pump.center_nm));
    p.insert("pump.fwhm_nm".into(), format!("{}", pump.fwhm_nm));
    Ok(out)
}

/// Scale so the trapezoid-rule ∬|F|² equals 1.
pub fn normalize_grid(grid: &TpsaGrid) -> Result<TpsaGrid> {
    let power = grid.power();
    if !(power.is_finite() && power > 0.0) {
        return Err(Error::Degenerate(format!(
            "grid over signal [{}, {}] nm × idler [{}, {}] nm has no power to normalize",
            grid.signal.min_nm, grid.signal.max_nm, grid.idler.min_nm, grid.idler.max_nm
        )));
    }
    let mut out = grid.scaled(1.0 / power.sqrt());
    out.normalized = true;
    Ok(out)
}
