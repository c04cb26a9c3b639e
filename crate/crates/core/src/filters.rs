//! Spectral filter transmission models.
//!
//! All transmissions are intensity transmissions with unit peak. A filter
//! placed in the common beam acts on both photons, so the amplitude factor
//! applied to F(λs, λi) is √T(λs)·√T(λi).

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tpsa::TpsaGrid;

/// Total grid power below which a filtered state is treated as empty.
pub const MIN_FILTERED_POWER: f64 = 1e-30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FilterSpec {
    SuperGaussian {
        center_nm: f64,
        fwhm_nm: f64,
        order: u32,
    },
    Lorentzian {
        center_nm: f64,
        fwhm_nm: f64,
    },
    FabryPerotAiry {
        base_um: f64,
        finesse: f64,
        #[serde(default = "unit_index")]
        index: f64,
        center_nm: f64,
    },
    Composite {
        members: Vec<FilterSpec>,
    },
}

fn unit_index() -> f64 {
    1.0
}

/// exp(−ln2·(2(λ−λ0)/w)^(2·order)).
#[inline]
pub fn supergaussian_transmission(lambda_nm: f64, center_nm: f64, fwhm_nm: f64, order: u32) -> f64 {
    let x = 2.0 * (lambda_nm - center_nm) / fwhm_nm;
    (-LN_2 * (x * x).powi(order as i32)).exp()
}

/// 1/(1 + (2(λ−λ0)/w)²).
#[inline]
pub fn lorentzian_transmission(lambda_nm: f64, center_nm: f64, fwhm_nm: f64) -> f64 {
    let x = 2.0 * (lambda_nm - center_nm) / fwhm_nm;
    1.0 / (1.0 + x * x)
}

/// Airy function of a lossless etalon with one peak pinned at `center_nm`.
#[inline]
pub fn fp_airy_transmission(lambda_nm: f64, base_um: f64, finesse: f64, index: f64, center_nm: f64) -> f64 {
    let optical_path_nm = index * base_um * 1e3;
    let phase = 2.0 * PI * optical_path_nm * (1.0 / lambda_nm - 1.0 / center_nm);
    let coeff = (2.0 * finesse / PI).powi(2);
    let s = phase.sin();
    1.0 / (1.0 + coeff * s * s)
}

/// Free spectral range λ²/(2nd) at `lambda_nm`, in nm.
pub fn free_spectral_range_nm(lambda_nm: f64, base_um: f64, index: f64) -> f64 {
    lambda_nm * lambda_nm / (2.0 * index * base_um * 1e3)
}

impl FilterSpec {
    /// Unit transmission everywhere (an infinitely wide Lorentzian).
    pub fn all_pass() -> Self {
        FilterSpec::Lorentzian {
            center_nm: 1.0,
            fwhm_nm: f64::INFINITY,
        }
    }

    /// Check parameter preconditions; `field` prefixes every message.
    pub fn validate(&self, field: &str) -> std::result::Result<(), Vec<(String, String)>> {
        let mut out = Vec::new();
        self.collect_violations(field, &mut out);
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    fn collect_violations(&self, field: &str, out: &mut Vec<(String, String)>) {
        let positive = |name: &str, v: f64, out: &mut Vec<(String, String)>| {
            if !(v > 0.0) || v.is_nan() {
                out.push((format!("{field}.{name}"), format!("must be > 0, got {v}")));
            }
        };
        let finite_center = |v: f64, out: &mut Vec<(String, String)>| {
            if !(v.is_finite() && v > 0.0) {
                out.push((
                    format!("{field}.center_nm"),
                    format!("must be a positive wavelength, got {v}"),
                ));
            }
        };
        match self {
            FilterSpec::SuperGaussian {
                center_nm,
                fwhm_nm,
                order,
            } => {
                finite_center(*center_nm, out);
                positive("fwhm_nm", *fwhm_nm, out);
                if *order == 0 {
                    out.push((format!("{field}.order"), "must be >= 1".into()));
                }
            }
            FilterSpec::Lorentzian { center_nm, fwhm_nm } => {
                finite_center(*center_nm, out);
                positive("fwhm_nm", *fwhm_nm, out);
            }
            FilterSpec::FabryPerotAiry {
                base_um,
                finesse,
                index,
                center_nm,
            } => {
                positive("base_um", *base_um, out);
                positive("finesse", *finesse, out);
                positive("index", *index, out);
                finite_center(*center_nm, out);
            }
            FilterSpec::Composite { members } => {
                if members.is_empty() {
                    out.push((
                        format!("{field}.members"),
                        "composite filter needs at least one member".into(),
                    ));
                }
                for (k, m) in members.iter().enumerate() {
                    m.collect_violations(&format!("{field}.members[{k}]"), out);
                }
            }
        }
    }

    /// Intensity transmission at `lambda_nm`.
    pub fn transmission(&self, lambda_nm: f64) -> Result<f64> {
        Ok(match self {
            FilterSpec::SuperGaussian {
                center_nm,
                fwhm_nm,
                order,
            } => supergaussian_transmission(lambda_nm, *center_nm, *fwhm_nm, *order),
            FilterSpec::Lorentzian { center_nm, fwhm_nm } => lorentzian_transmission(lambda_nm, *center_nm, *fwhm_nm),
            FilterSpec::FabryPerotAiry {
                base_um,
                finesse,
                index,
                center_nm,
            } => fp_airy_transmission(lambda_nm, *base_um, *finesse, *index, *center_nm),
            FilterSpec::Composite { members } => composite_transmission(lambda_nm, members)?,
        })
    }

    /// Nominal intensity FWHM, when the filter has one.
    pub fn nominal_fwhm_nm(&self) -> Option<f64> {
        match self {
            FilterSpec::SuperGaussian { fwhm_nm, .. } | FilterSpec::Lorentzian { fwhm_nm, .. } => Some(*fwhm_nm),
            FilterSpec::FabryPerotAiry {
                base_um,
                finesse,
                index,
                center_nm,
            } => Some(free_spectral_range_nm(*center_nm, *base_um, *index) / finesse),
            FilterSpec::Composite { .. } => None,
        }
    }
}

/// Product of member transmissions.
pub fn composite_transmission(lambda_nm: f64, members: &[FilterSpec]) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::Degenerate("composite filter has no members".into()));
    }
    members
        .iter()
        .try_fold(1.0, |acc, m| Ok(acc * m.transmission(lambda_nm)?))
}

/// Apply the same filter to both photons: F·√T(λs)·√T(λi). The result is
/// not normalized.
pub fn apply_filter_to_tpsa(grid: &TpsaGrid, filter: &FilterSpec) -> Result<TpsaGrid> {
    let amp = |axis: &crate::tpsa::WavelengthAxis| -> Result<Vec<f64>> {
        (0..axis.samples)
            .map(|k| filter.transmission(axis.value(k)).map(f64::sqrt))
            .collect()
    };
    let row = amp(&grid.signal)?;
    let col = amp(&grid.idler)?;
    let out = grid.weighted(&row, &col);
    let power = out.power();
    if !(power >= MIN_FILTERED_POWER) {
        return Err(Error::Degenerate(format!(
            "filter removes all power from the window signal [{}, {}] nm × idler [{}, {}] nm (∬|F|² = {power:e}); use a zoom window centered on the filter passband",
            grid.signal.min_nm, grid.signal.max_nm, grid.idler.min_nm, grid.idler.max_nm
        )));
    }
    Ok(out)
}
