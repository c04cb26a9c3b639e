//! Scalar descriptors of a sampled two-photon amplitude: marginal and
//! conditional spectra, FWHM, the marginal-to-conditional width ratio R,
//! the Schmidt number, and spectrometer-resolution convolution.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tpsa::{TpsaGrid, WavelengthAxis};

/// Which photon a spectrum belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Photon {
    Signal,
    Idler,
}

/// Intensity spectrum on a uniform wavelength axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum1D {
    pub axis: WavelengthAxis,
    pub values: Vec<f64>,
    /// Grid index of the partner wavelength for a conditional slice.
    pub slice_index: Option<usize>,
}

impl Spectrum1D {
    pub fn new(axis: WavelengthAxis, values: Vec<f64>) -> Result<Self> {
        if values.len() != axis.samples {
            return Err(Error::Geometry(format!(
                "spectrum has {} values for {} axis samples",
                values.len(),
                axis.samples
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Numerical("spectrum values must be finite and >= 0".into()));
        }
        Ok(Self {
            axis,
            values,
            slice_index: None,
        })
    }

    pub fn from_fn(axis: WavelengthAxis, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..axis.samples).map(|k| f(axis.value(k))).collect();
        Self::new(axis, values)
    }

    /// Trapezoid-rule integral over the axis.
    pub fn integral(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(k, v)| self.axis.trapezoid_weight(k) * v)
            .sum::<f64>()
            * self.axis.step()
    }

    /// Two-column CSV: `wavelength_nm,intensity`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("wavelength_nm,intensity\n");
        for (k, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{},{}", self.axis.value(k), v);
        }
        out
    }
}

/// Single-photon spectrum: |F|² integrated over the partner wavelength.
pub fn marginal_spectrum(grid: &TpsaGrid, which: Photon) -> Spectrum1D {
    let (ns, ni) = grid.shape();
    let values = match which {
        Photon::Signal => {
            let d = grid.idler.step();
            (0..ns)
                .map(|i| {
                    grid.row(i)
                        .iter()
                        .enumerate()
                        .map(|(j, v)| grid.idler.trapezoid_weight(j) * v * v)
                        .sum::<f64>()
                        * d
                })
                .collect()
        }
        Photon::Idler => {
            let d = grid.signal.step();
            let mut acc = vec![0.0; ni];
            for i in 0..ns {
                let w = grid.signal.trapezoid_weight(i) * d;
                for (a, v) in acc.iter_mut().zip(grid.row(i)) {
                    *a += w * v * v;
                }
            }
            acc
        }
    };
    let axis = match which {
        Photon::Signal => grid.signal,
        Photon::Idler => grid.idler,
    };
    Spectrum1D {
        axis,
        values,
        slice_index: None,
    }
}

/// Coincidence spectrum of `which` with the partner fixed at the grid line
/// nearest `fixed_nm`.
pub fn conditional_spectrum(grid: &TpsaGrid, which: Photon, fixed_nm: f64) -> Result<Spectrum1D> {
    let (ns, _) = grid.shape();
    let partner = match which {
        Photon::Signal => grid.idler,
        Photon::Idler => grid.signal,
    };
    let idx = partner.nearest_index(fixed_nm).ok_or_else(|| {
        Error::range(
            "conditional partner wavelength (nm)",
            fixed_nm,
            partner.min_nm,
            partner.max_nm,
        )
    })?;
    let (axis, values) = match which {
        Photon::Signal => (grid.signal, (0..ns).map(|i| grid.get(i, idx).powi(2)).collect()),
        Photon::Idler => (grid.idler, grid.row(idx).iter().map(|v| v * v).collect()),
    };
    Ok(Spectrum1D {
        axis,
        values,
        slice_index: Some(idx),
    })
}

/// Full width at half maximum, by linear interpolation between the samples
/// bracketing each half-maximum crossing.
pub fn fwhm(spectrum: &Spectrum1D) -> Result<f64> {
    let v = &spectrum.values;
    let axis = &spectrum.axis;
    let peak = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::Degenerate("spectrum has no positive maximum".into()));
    }
    let half = peak / 2.0;
    let last = v.len() - 1;
    if v[0] >= half || v[last] >= half {
        return Err(Error::WindowTooSmall(format!(
            "spectrum is above half maximum at a window edge ([{}, {}] nm); widen the window",
            axis.min_nm, axis.max_nm
        )));
    }
    let mut crossings = Vec::new();
    for k in 0..last {
        let (a, b) = (v[k], v[k + 1]);
        if (a >= half) != (b >= half) {
            let t = (half - a) / (b - a);
            crossings.push(axis.value(k) + t * axis.step());
        }
    }
    if crossings.len() != 2 {
        return Err(Error::AmbiguousWidth { crossings });
    }
    Ok(crossings[1] - crossings[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FedorovRatio {
    pub marginal_fwhm_signal: f64,
    pub marginal_fwhm_idler: f64,
    pub conditional_fwhm_signal: f64,
    pub conditional_fwhm_idler: f64,
    pub r_signal: f64,
    pub r_idler: f64,
}

/// Marginal FWHM over conditional FWHM for each photon. Marginals come from
/// `marginal_grid`, conditionals from `conditional_grid` sliced at `at_nm`;
/// pass the same grid twice for a single-window evaluation.
pub fn fedorov_ratio(marginal_grid: &TpsaGrid, conditional_grid: &TpsaGrid, at_nm: f64) -> Result<FedorovRatio> {
    let ms = fwhm(&marginal_spectrum(marginal_grid, Photon::Signal))?;
    let mi = fwhm(&marginal_spectrum(marginal_grid, Photon::Idler))?;
    let cs = fwhm(&conditional_spectrum(conditional_grid, Photon::Signal, at_nm)?)?;
    let ci = fwhm(&conditional_spectrum(conditional_grid, Photon::Idler, at_nm)?)?;
    Ok(FedorovRatio {
        marginal_fwhm_signal: ms,
        marginal_fwhm_idler: mi,
        conditional_fwhm_signal: cs,
        conditional_fwhm_idler: ci,
        r_signal: ms / cs,
        r_idler: mi / ci,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchmidtDecomposition {
    /// Schmidt weights λ_k = s_k²/Σs², descending.
    pub weights: Vec<f64>,
    pub schmidt_number: f64,
    /// Grid shape actually decomposed, after any downsampling.
    pub shape: (usize, usize),
}

fn stride_for(samples: usize, max: usize) -> usize {
    if samples <= max {
        1
    } else {
        (samples - 1).div_ceil(max - 1)
    }
}

fn downsampled_axis(axis: &WavelengthAxis, stride: usize) -> (WavelengthAxis, Vec<usize>) {
    let idx: Vec<usize> = (0..axis.samples).step_by(stride).collect();
    let last = *idx.last().expect("axis has samples");
    let a = WavelengthAxis {
        min_nm: axis.min_nm,
        max_nm: axis.value(last),
        samples: idx.len(),
    };
    (a, idx)
}

/// SVD of the amplitude matrix with quadrature weights folded in, so the
/// singular values approximate the continuous Schmidt coefficients.
/// Grids larger than `max_size` on an axis are decimated by a uniform stride.
pub fn schmidt_decomposition(grid: &TpsaGrid, max_size: usize) -> Result<SchmidtDecomposition> {
    let max_size = max_size.max(2);
    let (sa, si) = downsampled_axis(&grid.signal, stride_for(grid.signal.samples, max_size));
    let (ia, ii) = downsampled_axis(&grid.idler, stride_for(grid.idler.samples, max_size));
    let cell = (sa.step() * ia.step()).sqrt();
    let m = DMatrix::from_fn(si.len(), ii.len(), |r, c| {
        let w = (sa.trapezoid_weight(r) * ia.trapezoid_weight(c)).sqrt() * cell;
        grid.get(si[r], ii[c]) * w
    });
    let sv = m
        .try_svd(false, false, f64::EPSILON, 10_000)
        .ok_or_else(|| {
            Error::Numerical(format!(
                "SVD did not converge on {}×{} grid over signal [{}, {}] nm × idler [{}, {}] nm",
                si.len(),
                ii.len(),
                sa.min_nm,
                sa.max_nm,
                ia.min_nm,
                ia.max_nm
            ))
        })?
        .singular_values;
    let mut weights: Vec<f64> = sv.iter().map(|s| s * s).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Degenerate("Schmidt decomposition of an empty grid".into()));
    }
    weights.iter_mut().for_each(|w| *w /= total);
    weights.sort_by(|a, b| b.total_cmp(a));
    let purity: f64 = weights.iter().map(|w| w * w).sum();
    Ok(SchmidtDecomposition {
        weights,
        schmidt_number: 1.0 / purity,
        shape: (si.len(), ii.len()),
    })
}

/// Convolve with a unit-area Gaussian instrument response of the given FWHM.
/// The discrete kernel is normalized to unit sum; outside the window the
/// spectrum is taken as zero.
pub fn convolve_resolution(spectrum: &Spectrum1D, resolution_fwhm_nm: f64) -> Result<Spectrum1D> {
    if !(resolution_fwhm_nm > 0.0 && resolution_fwhm_nm.is_finite()) {
        return Err(Error::Domain(format!(
            "resolution FWHM must be > 0, got {resolution_fwhm_nm} nm"
        )));
    }
    let axis = spectrum.axis;
    let span = axis.max_nm - axis.min_nm;
    if span < 6.0 * resolution_fwhm_nm {
        return Err(Error::WindowTooSmall(format!(
            "window [{}, {}] nm is narrower than 6× the {resolution_fwhm_nm} nm resolution",
            axis.min_nm, axis.max_nm
        )));
    }
    let dx = axis.step();
    let sigma = resolution_fwhm_nm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
    let reach = ((6.0 * sigma) / dx).ceil() as usize;
    let mut kernel: Vec<f64> = (0..=2 * reach)
        .map(|k| {
            let x = (k as f64 - reach as f64) * dx;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let norm: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= norm);

    let n = spectrum.values.len();
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let lo = i.saturating_sub(reach);
        let hi = (i + reach).min(n - 1);
        *o = (lo..=hi).map(|j| spectrum.values[j] * kernel[j + reach - i]).sum();
    }
    Ok(Spectrum1D {
        axis,
        values: out,
        slice_index: spectrum.slice_index,
    })
}

/// Widths, R ratios and Schmidt number of one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntanglementReport {
    pub marginal_fwhm_signal_nm: f64,
    pub marginal_fwhm_idler_nm: f64,
    pub conditional_fwhm_signal_nm: f64,
    pub conditional_fwhm_idler_nm: f64,
    pub fedorov_r_signal: f64,
    pub fedorov_r_idler: f64,
    pub schmidt_number: f64,
}

impl EntanglementReport {
    pub fn new(ratio: &FedorovRatio, schmidt_number: f64) -> Self {
        Self {
            marginal_fwhm_signal_nm: ratio.marginal_fwhm_signal,
            marginal_fwhm_idler_nm: ratio.marginal_fwhm_idler,
            conditional_fwhm_signal_nm: ratio.conditional_fwhm_signal,
            conditional_fwhm_idler_nm: ratio.conditional_fwhm_idler,
            fedorov_r_signal: ratio.r_signal,
            fedorov_r_idler: ratio.r_idler,
            schmidt_number,
        }
    }

    /// Flat `key = value` text.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "marginal_fwhm_signal_nm = {}", self.marginal_fwhm_signal_nm);
        let _ = writeln!(out, "marginal_fwhm_idler_nm = {}", self.marginal_fwhm_idler_nm);
        let _ = writeln!(out, "conditional_fwhm_signal_nm = {}", self.conditional_fwhm_signal_nm);
        let _ = writeln!(out, "conditional_fwhm_idler_nm = {}", self.conditional_fwhm_idler_nm);
        let _ = writeln!(out, "fedorov_r_signal = {}", self.fedorov_r_signal);
        let _ = writeln!(out, "fedorov_r_idler = {}", self.fedorov_r_idler);
        let _ = writeln!(out, "schmidt_number = {}", self.schmidt_number);
        out
    }
}
