//! Scenario configuration and the named pipelines behind the CLI.
//!
//! The config is TOML; see `configs/default.toml` for the full grammar with
//! comments. Validation collects every violation before reporting, and a
//! pipeline writes nothing until all of its outputs have been computed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::analysis::{
    conditional_spectrum, convolve_resolution, fedorov_ratio, fwhm, marginal_spectrum, schmidt_decomposition,
    EntanglementReport, Photon, Spectrum1D,
};
use crate::dispersion::{CrystalSpec, SellmeierSet, DEFAULT_FD_STEP_NM};
use crate::error::{Error, Result, Violation};
use crate::filters::{apply_filter_to_tpsa, FilterSpec};
use crate::interference::{
    accidental_rate, hwp_coincidence_curve, overlap, visibility_from_curve, visibility_from_overlap,
    visibility_vs_bandwidth_sweep, FilterFamily, SweepOptions, VisibilityCurve,
};
use crate::tpsa::{evaluate_tpsa_grid, normalize_grid, EnvelopeShape, GridSpec, PumpSpec, TpsaGrid, WavelengthAxis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Tpsa,
    Marginals,
    Conditionals,
    Report,
    Fig4,
    HwpCurve,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Tpsa => "tpsa",
            Command::Marginals => "marginals",
            Command::Conditionals => "conditionals",
            Command::Report => "report",
            Command::Fig4 => "fig4",
            Command::HwpCurve => "hwp-curve",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Structured,
    #[default]
    Both,
}

impl OutputFormat {
    fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    fn structured(self) -> bool {
        matches!(self, OutputFormat::Structured | OutputFormat::Both)
    }
}

// Raw records, as written in the file.

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    crystal: RawCrystal,
    #[serde(default)]
    pump: RawPump,
    #[serde(default)]
    grids: RawGrids,
    #[serde(default)]
    filters: BTreeMap<String, FilterSpec>,
    #[serde(default)]
    analysis: RawAnalysis,
    #[serde(default)]
    fig4: RawFig4,
    #[serde(default)]
    hwp: RawHwp,
    #[serde(default)]
    sweep: RawSweep,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCrystal {
    dispersion_file: PathBuf,
    #[serde(default = "d_length_mm")]
    length_mm: f64,
    #[serde(default = "d_period_um")]
    poling_period_um: f64,
    #[serde(default = "d_one")]
    qpm_order: i64,
    #[serde(default = "d_fd_step")]
    fd_step_nm: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPump {
    center_nm: f64,
    fwhm_nm: f64,
    #[serde(default)]
    envelope: EnvelopeShape,
}

impl Default for RawPump {
    fn default() -> Self {
        Self {
            center_nm: 397.65,
            fwhm_nm: 4.5,
            envelope: EnvelopeShape::Gaussian,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAxis {
    min_nm: f64,
    max_nm: f64,
    samples: i64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWindow {
    signal: RawAxis,
    idler: RawAxis,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSquare {
    half_width_nm: f64,
    samples: i64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrids {
    large: RawWindow,
    zoom: RawSquare,
    schmidt: RawWindow,
}

impl Default for RawGrids {
    fn default() -> Self {
        let axis = |min_nm, max_nm, samples| RawAxis {
            min_nm,
            max_nm,
            samples,
        };
        Self {
            large: RawWindow {
                signal: axis(700.0, 900.0, 3000),
                idler: axis(700.0, 900.0, 3000),
            },
            zoom: RawSquare {
                half_width_nm: 2.0,
                samples: 2001,
            },
            schmidt: RawWindow {
                signal: axis(735.3, 855.3, 2048),
                idler: axis(755.3, 835.3, 1400),
            },
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalysis {
    spectrometer_resolution_nm: f64,
    schmidt_max_size: i64,
}

impl Default for RawAnalysis {
    fn default() -> Self {
        Self {
            spectrometer_resolution_nm: 0.5,
            schmidt_max_size: 2048,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFig4 {
    filter: String,
    min_nm: f64,
    max_nm: f64,
    samples: i64,
}

impl Default for RawFig4 {
    fn default() -> Self {
        Self {
            filter: "fp_with_ifs".into(),
            min_nm: 792.3,
            max_nm: 798.3,
            samples: 6001,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHwp {
    filters: Vec<String>,
    angle_start_deg: f64,
    angle_stop_deg: f64,
    angle_step_deg: f64,
    window_half_width_nm: f64,
    window_samples: i64,
    source_pair_rate: f64,
    source_singles_rate_1: f64,
    source_singles_rate_2: f64,
    insertion_loss_db: f64,
    repetition_rate_hz: f64,
}

impl Default for RawHwp {
    fn default() -> Self {
        Self {
            filters: vec!["if3".into(), "fp".into()],
            angle_start_deg: 0.0,
            angle_stop_deg: 90.0,
            angle_step_deg: 2.5,
            window_half_width_nm: 12.0,
            window_samples: 2401,
            source_pair_rate: 1.0e7,
            source_singles_rate_1: 5.65e6,
            source_singles_rate_2: 5.65e6,
            insertion_loss_db: 15.0,
            repetition_rate_hz: 80.0e6,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    family: FilterFamily,
    bandwidths_nm: Vec<f64>,
    length_scales: Vec<f64>,
    super_gaussian_order: i64,
    window_factor: f64,
    min_half_width_nm: f64,
    max_half_width_nm: f64,
    target_spacing_nm: f64,
    min_samples: i64,
    max_samples: i64,
    include_unfiltered: bool,
}

impl Default for RawSweep {
    fn default() -> Self {
        let o = SweepOptions::default();
        Self {
            family: FilterFamily::Lorentzian,
            bandwidths_nm: vec![10.0, 5.0, 3.0, 2.0, 1.0, 0.5, 0.3, 0.15, 0.08],
            length_scales: vec![0.5, 1.0, 2.0],
            super_gaussian_order: o.super_gaussian_order as i64,
            window_factor: o.window_factor,
            min_half_width_nm: o.min_half_width_nm,
            max_half_width_nm: o.max_half_width_nm,
            target_spacing_nm: o.target_spacing_nm,
            min_samples: o.min_samples as i64,
            max_samples: o.max_samples as i64,
            include_unfiltered: true,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: PathBuf,
    format: OutputFormat,
}

impl Default for RawOutput {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            format: OutputFormat::Both,
        }
    }
}

fn d_length_mm() -> f64 {
    12.0
}
fn d_period_um() -> f64 {
    8.52
}
fn d_one() -> i64 {
    1
}
fn d_fd_step() -> f64 {
    DEFAULT_FD_STEP_NM
}

// Validated configuration.

#[derive(Debug, Clone)]
pub struct HwpSettings {
    pub filters: Vec<String>,
    pub angles_deg: Vec<f64>,
    pub window: GridSpec,
    pub source_pair_rate: f64,
    pub source_singles_rate_1: f64,
    pub source_singles_rate_2: f64,
    pub insertion_loss_db: f64,
    pub repetition_rate_hz: f64,
}

impl HwpSettings {
    /// Single-photon power transmission of the filter train.
    pub fn transmission(&self) -> f64 {
        10f64.powf(-self.insertion_loss_db / 10.0)
    }

    /// Detected (pair rate, singles 1, singles 2) after insertion loss.
    pub fn detected_rates(&self) -> (f64, f64, f64) {
        let t = self.transmission();
        (
            self.source_pair_rate * t * t,
            self.source_singles_rate_1 * t,
            self.source_singles_rate_2 * t,
        )
    }
}

#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub family: FilterFamily,
    pub bandwidths_nm: Vec<f64>,
    pub length_scales: Vec<f64>,
    pub options: SweepOptions,
}

#[derive(Debug, Clone)]
pub struct Fig4Settings {
    pub filter: String,
    pub axis: WavelengthAxis,
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub crystal: CrystalSpec,
    pub pump: PumpSpec,
    pub large: GridSpec,
    pub zoom: GridSpec,
    pub schmidt: GridSpec,
    pub filters: BTreeMap<String, FilterSpec>,
    pub spectrometer_resolution_nm: f64,
    pub schmidt_max_size: usize,
    pub fig4: Fig4Settings,
    pub hwp: HwpSettings,
    pub sweep: SweepSettings,
    pub output_dir: PathBuf,
    pub format: OutputFormat,
}

impl ScenarioConfig {
    pub fn degenerate_nm(&self) -> f64 {
        self.pump.degenerate_nm()
    }
}

struct Checker {
    violations: Vec<Violation>,
}

impl Checker {
    fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            field: field.into(),
            message: message.into(),
        });
    }

    fn positive(&mut self, field: &str, v: f64) -> bool {
        let ok = v.is_finite() && v > 0.0;
        if !ok {
            self.push(field, format!("must be a finite number > 0, got {v}"));
        }
        ok
    }

    fn non_negative(&mut self, field: &str, v: f64) -> bool {
        let ok = v.is_finite() && v >= 0.0;
        if !ok {
            self.push(field, format!("must be a finite number >= 0, got {v}"));
        }
        ok
    }

    fn count(&mut self, field: &str, v: i64, min: i64) -> Option<usize> {
        if v < min {
            self.push(field, format!("must be an integer >= {min}, got {v}"));
            None
        } else {
            Some(v as usize)
        }
    }

    fn axis(&mut self, field: &str, a: &RawAxis) -> Option<WavelengthAxis> {
        let n = self.count(&format!("{field}.samples"), a.samples, 2);
        let ok = a.min_nm.is_finite() && a.max_nm.is_finite() && a.min_nm > 0.0 && a.min_nm < a.max_nm;
        if !ok {
            self.push(
                field,
                format!("requires 0 < min_nm < max_nm, got [{}, {}]", a.min_nm, a.max_nm),
            );
        }
        match (ok, n) {
            (true, Some(n)) => Some(WavelengthAxis {
                min_nm: a.min_nm,
                max_nm: a.max_nm,
                samples: n,
            }),
            _ => None,
        }
    }

    fn window(&mut self, field: &str, w: &RawWindow) -> Option<GridSpec> {
        let s = self.axis(&format!("{field}.signal"), &w.signal);
        let i = self.axis(&format!("{field}.idler"), &w.idler);
        Some(GridSpec { signal: s?, idler: i? })
    }
}

fn span_to_line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text.as_bytes()[..offset];
    let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
    let col = before.iter().rev().take_while(|&&b| b != b'\n').count() + 1;
    (line, col)
}

/// Parse and validate a config from text; relative paths resolve against
/// `base_dir`. Reports every violation at once.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<ScenarioConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| span_to_line_col(text, s.start));
        Error::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    let mut ck = Checker { violations: Vec::new() };

    // crystal
    let c = &raw.crystal;
    ck.positive("crystal.length_mm", c.length_mm);
    ck.positive("crystal.poling_period_um", c.poling_period_um);
    let order = ck.count("crystal.qpm_order", c.qpm_order, 1);
    if order.is_some_and(|o| o > u32::MAX as usize) {
        ck.push("crystal.qpm_order", "is too large");
    }
    ck.positive("crystal.fd_step_nm", c.fd_step_nm);
    let disp_path = base_dir.join(&c.dispersion_file);
    let sellmeier = if disp_path.is_file() {
        match SellmeierSet::from_file(&disp_path) {
            Ok(s) => Some(s),
            Err(e) => {
                ck.push("crystal.dispersion_file", format!("{}: {e}", disp_path.display()));
                None
            }
        }
    } else {
        ck.push(
            "crystal.dispersion_file",
            format!("file not found: {}", disp_path.display()),
        );
        None
    };

    // pump
    let pump_ok = ck.positive("pump.center_nm", raw.pump.center_nm) & ck.positive("pump.fwhm_nm", raw.pump.fwhm_nm);
    let degenerate = 2.0 * raw.pump.center_nm;

    // grids
    let large = ck.window("grids.large", &raw.grids.large);
    let zoom_samples = ck.count("grids.zoom.samples", raw.grids.zoom.samples, 2);
    let zoom_half_ok = ck.positive("grids.zoom.half_width_nm", raw.grids.zoom.half_width_nm);
    let zoom = match (pump_ok && zoom_half_ok, zoom_samples) {
        (true, Some(n)) => GridSpec::square(degenerate, raw.grids.zoom.half_width_nm, n).ok(),
        _ => None,
    };
    let schmidt = ck.window("grids.schmidt", &raw.grids.schmidt);

    // filters
    for (name, f) in &raw.filters {
        if let Err(list) = f.validate(&format!("filters.{name}")) {
            for (field, msg) in list {
                ck.push(field, msg);
            }
        }
    }
    let known_filter = |ck: &mut Checker, field: &str, name: &str| {
        if !raw.filters.contains_key(name) {
            ck.push(field, format!("refers to undefined filter `{name}`"));
        }
    };

    // analysis
    ck.positive(
        "analysis.spectrometer_resolution_nm",
        raw.analysis.spectrometer_resolution_nm,
    );
    let schmidt_max = ck.count("analysis.schmidt_max_size", raw.analysis.schmidt_max_size, 2);

    // fig4
    known_filter(&mut ck, "fig4.filter", &raw.fig4.filter);
    let fig4_axis = ck.axis(
        "fig4",
        &RawAxis {
            min_nm: raw.fig4.min_nm,
            max_nm: raw.fig4.max_nm,
            samples: raw.fig4.samples,
        },
    );

    // hwp
    let h = &raw.hwp;
    for (k, name) in h.filters.iter().enumerate() {
        known_filter(&mut ck, &format!("hwp.filters[{k}]"), name);
    }
    let mut angles = Vec::new();
    if ck.positive("hwp.angle_step_deg", h.angle_step_deg)
        && h.angle_start_deg.is_finite()
        && h.angle_stop_deg.is_finite()
    {
        let n = ((h.angle_stop_deg - h.angle_start_deg) / h.angle_step_deg + 1e-9).floor();
        if (0.0..1e6).contains(&n) {
            angles = (0..=n as usize)
                .map(|k| h.angle_start_deg + k as f64 * h.angle_step_deg)
                .collect();
        }
        let span = h.angle_stop_deg - h.angle_start_deg;
        if angles.len() < 16 || span < 45.0 {
            ck.push(
                "hwp.angle_stop_deg",
                format!(
                    "angles must span >= 45° with >= 16 points, got {span}° and {} points",
                    angles.len()
                ),
            );
        }
    }
    let hwp_n = ck.count("hwp.window_samples", h.window_samples, 3);
    let hwp_half_ok = ck.positive("hwp.window_half_width_nm", h.window_half_width_nm);
    let hwp_window = match (pump_ok && hwp_half_ok, hwp_n) {
        (true, Some(n)) => GridSpec::square(degenerate, h.window_half_width_nm, n).ok(),
        _ => None,
    };
    ck.non_negative("hwp.source_pair_rate", h.source_pair_rate);
    ck.non_negative("hwp.source_singles_rate_1", h.source_singles_rate_1);
    ck.non_negative("hwp.source_singles_rate_2", h.source_singles_rate_2);
    ck.non_negative("hwp.insertion_loss_db", h.insertion_loss_db);
    ck.positive("hwp.repetition_rate_hz", h.repetition_rate_hz);

    // sweep
    let s = &raw.sweep;
    if s.bandwidths_nm.is_empty() {
        ck.push("sweep.bandwidths_nm", "must list at least one bandwidth");
    }
    for (k, b) in s.bandwidths_nm.iter().enumerate() {
        ck.positive(&format!("sweep.bandwidths_nm[{k}]"), *b);
    }
    if s.bandwidths_nm.windows(2).any(|w| w[1] >= w[0]) {
        ck.push("sweep.bandwidths_nm", "must be sorted strictly descending");
    }
    if s.length_scales.is_empty() {
        ck.push("sweep.length_scales", "must list at least one length scale");
    }
    for (k, l) in s.length_scales.iter().enumerate() {
        ck.positive(&format!("sweep.length_scales[{k}]"), *l);
    }
    let sg_order = ck.count("sweep.super_gaussian_order", s.super_gaussian_order, 1);
    ck.positive("sweep.window_factor", s.window_factor);
    ck.positive("sweep.min_half_width_nm", s.min_half_width_nm);
    ck.positive("sweep.max_half_width_nm", s.max_half_width_nm);
    if s.min_half_width_nm > s.max_half_width_nm {
        ck.push("sweep.max_half_width_nm", "must be >= sweep.min_half_width_nm");
    }
    ck.positive("sweep.target_spacing_nm", s.target_spacing_nm);
    let min_samples = ck.count("sweep.min_samples", s.min_samples, 3);
    let max_samples = ck.count("sweep.max_samples", s.max_samples, 3);
    if let (Some(a), Some(b)) = (min_samples, max_samples) {
        if a > b {
            ck.push("sweep.max_samples", "must be >= sweep.min_samples");
        }
    }

    // Cross-check every window against the dispersion validity ranges.
    let mut crystal = None;
    if let (Some(set), Some(order)) = (&sellmeier, order) {
        if let Ok(cr) = CrystalSpec::new(set.clone(), c.length_mm * 1e-3, c.poling_period_um * 1e-6, order as u32) {
            let mut cr = cr;
            cr.fd_step_nm = c.fd_step_nm;
            let mut windows: Vec<(String, GridSpec)> = Vec::new();
            if let Some(w) = large {
                windows.push(("grids.large".into(), w));
            }
            if let Some(w) = zoom {
                windows.push(("grids.zoom".into(), w));
            }
            if let Some(w) = schmidt {
                windows.push(("grids.schmidt".into(), w));
            }
            if let Some(w) = hwp_window {
                windows.push(("hwp.window".into(), w));
            }
            if pump_ok && s.max_half_width_nm.is_finite() && s.max_half_width_nm > 0.0 {
                let widest = s
                    .bandwidths_nm
                    .iter()
                    .map(|b| {
                        (0.5 * s.window_factor * b)
                            .max(s.min_half_width_nm)
                            .min(s.max_half_width_nm)
                    })
                    .fold(s.min_half_width_nm.min(s.max_half_width_nm), f64::max);
                if let Ok(w) = GridSpec::square(degenerate, widest, 3) {
                    windows.push(("sweep (widest window)".into(), w));
                }
            }
            for (field, w) in windows {
                if let Err(e) = cr.check_window((w.signal.min_nm, w.signal.max_nm), (w.idler.min_nm, w.idler.max_nm)) {
                    ck.push(
                        field,
                        format!(
                            "window signal [{}, {}] nm × idler [{}, {}] nm leaves the dispersion validity range: {e}",
                            w.signal.min_nm, w.signal.max_nm, w.idler.min_nm, w.idler.max_nm
                        ),
                    );
                }
            }
            if pump_ok {
                match cr.clone().calibrated(raw.pump.center_nm) {
                    Ok(cal) => crystal = Some(cal),
                    Err(e) => ck.push("pump.center_nm", format!("cannot calibrate degeneracy: {e}")),
                }
            }
        }
    }

    if !ck.violations.is_empty() {
        return Err(Error::Invalid(ck.violations));
    }

    // Every Option below is Some when no violation was recorded.
    let missing = || Error::Config("internal: validated field missing".into());
    let pump = PumpSpec {
        center_nm: raw.pump.center_nm,
        fwhm_nm: raw.pump.fwhm_nm,
        envelope: raw.pump.envelope,
    };
    let options = SweepOptions {
        window_factor: s.window_factor,
        min_half_width_nm: s.min_half_width_nm,
        max_half_width_nm: s.max_half_width_nm,
        target_spacing_nm: s.target_spacing_nm,
        min_samples: min_samples.ok_or_else(missing)?,
        max_samples: max_samples.ok_or_else(missing)?,
        super_gaussian_order: sg_order.ok_or_else(missing)? as u32,
        unfiltered_window: if s.include_unfiltered { large } else { None },
    };
    Ok(ScenarioConfig {
        crystal: crystal.ok_or_else(missing)?,
        pump,
        large: large.ok_or_else(missing)?,
        zoom: zoom.ok_or_else(missing)?,
        schmidt: schmidt.ok_or_else(missing)?,
        filters: raw.filters.clone(),
        spectrometer_resolution_nm: raw.analysis.spectrometer_resolution_nm,
        schmidt_max_size: schmidt_max.ok_or_else(missing)?,
        fig4: Fig4Settings {
            filter: raw.fig4.filter.clone(),
            axis: fig4_axis.ok_or_else(missing)?,
        },
        hwp: HwpSettings {
            filters: h.filters.clone(),
            angles_deg: angles,
            window: hwp_window.ok_or_else(missing)?,
            source_pair_rate: h.source_pair_rate,
            source_singles_rate_1: h.source_singles_rate_1,
            source_singles_rate_2: h.source_singles_rate_2,
            insertion_loss_db: h.insertion_loss_db,
            repetition_rate_hz: h.repetition_rate_hz,
        },
        sweep: SweepSettings {
            family: s.family,
            bandwidths_nm: s.bandwidths_nm.clone(),
            length_scales: s.length_scales.clone(),
            options,
        },
        output_dir: base_dir.join(&raw.output.dir),
        format: raw.output.format,
    })
}

/// Read, parse and validate a config file. Never runs a pipeline.
pub fn validate_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&text, base)
}

/// In-memory outputs of one pipeline run, committed all at once.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, String)>,
}

impl Outputs {
    fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) {
        let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
        text.push('\n');
        self.add(name, text);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    /// Write every file under a temporary name, then rename into place.
    pub fn commit(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut staged = Vec::new();
        for (name, contents) in &self.files {
            let tmp = dir.join(format!(".{name}.partial"));
            if let Err(e) = fs::write(&tmp, contents) {
                for (t, _) in &staged {
                    let _ = fs::remove_file(t);
                }
                return Err(Error::io(&tmp, e));
            }
            staged.push((tmp, dir.join(name)));
        }
        let mut written = Vec::new();
        for (tmp, dest) in staged {
            fs::rename(&tmp, &dest).map_err(|e| Error::io(&dest, e))?;
            written.push(dest);
        }
        Ok(written)
    }
}

fn spectrum_json(s: &Spectrum1D) -> serde_json::Value {
    json!({
        "min_nm": s.axis.min_nm,
        "max_nm": s.axis.max_nm,
        "samples": s.axis.samples,
        "slice_index": s.slice_index,
        "values": s.values,
    })
}

fn provenance(cfg: &ScenarioConfig) -> serde_json::Value {
    json!({
        "crystal": {
            "length_mm": cfg.crystal.length_m * 1e3,
            "poling_period_um": cfg.crystal.poling_period_m * 1e6,
            "qpm_order": cfg.crystal.qpm_order,
            "calibration_offset_rad_per_m": cfg.crystal.calibration_offset,
            "fd_step_nm": cfg.crystal.fd_step_nm,
        },
        "pump": { "center_nm": cfg.pump.center_nm, "fwhm_nm": cfg.pump.fwhm_nm, "envelope": cfg.pump.envelope },
        "degenerate_nm": cfg.degenerate_nm(),
    })
}

fn filter<'a>(cfg: &'a ScenarioConfig, name: &str) -> Result<&'a FilterSpec> {
    cfg.filters
        .get(name)
        .ok_or_else(|| Error::Config(format!("undefined filter `{name}`")))
}

fn unfiltered(cfg: &ScenarioConfig, window: &GridSpec) -> Result<TpsaGrid> {
    normalize_grid(&evaluate_tpsa_grid(window, &cfg.crystal, &cfg.pump, 1.0)?)
}

/// Compute the outputs of `command` without touching the filesystem.
/// Errors name the config field or window they came from.
pub fn compute(cfg: &ScenarioConfig, command: Command) -> Result<Outputs> {
    compute_command(cfg, command).map_err(|e| match e {
        Error::Context { .. } => e,
        other => other.context(match command {
            Command::Tpsa | Command::Conditionals => "grids.zoom",
            Command::Marginals => "grids.large",
            Command::Report => "report",
            Command::Fig4 => "fig4",
            Command::HwpCurve => "hwp.window",
            Command::Sweep => "sweep",
        }),
    })
}

fn compute_command(cfg: &ScenarioConfig, command: Command) -> Result<Outputs> {
    let mut out = Outputs::default();
    let fmt = cfg.format;
    let deg = cfg.degenerate_nm();
    match command {
        Command::Tpsa => {
            let grid = unfiltered(cfg, &cfg.zoom)?;
            if fmt.csv() {
                out.add("tpsa_zoom.csv", grid.to_csv());
            }
            if fmt.structured() {
                let rows: Vec<&[f64]> = (0..grid.signal.samples).map(|i| grid.row(i)).collect();
                out.json(
                    "tpsa_zoom.json",
                    &json!({
                        "signal": grid.signal, "idler": grid.idler,
                        "normalized": grid.normalized, "length_scale": grid.length_scale,
                        "provenance": provenance(cfg), "values": rows,
                    }),
                );
            }
        }
        Command::Marginals => {
            let grid = unfiltered(cfg, &cfg.large)?;
            let mut summary = serde_json::Map::new();
            for (photon, tag) in [(Photon::Signal, "signal"), (Photon::Idler, "idler")] {
                let m = marginal_spectrum(&grid, photon);
                let measured = convolve_resolution(&m, cfg.spectrometer_resolution_nm)?;
                if fmt.csv() {
                    out.add(format!("marginal_{tag}.csv"), m.to_csv());
                    out.add(format!("marginal_{tag}_measured.csv"), measured.to_csv());
                }
                summary.insert(
                    tag.into(),
                    json!({
                        "fwhm_nm": fwhm(&m)?,
                        "measured_fwhm_nm": fwhm(&measured)?,
                        "spectrum": spectrum_json(&m),
                        "measured": spectrum_json(&measured),
                    }),
                );
            }
            if fmt.structured() {
                summary.insert(
                    "spectrometer_resolution_nm".into(),
                    json!(cfg.spectrometer_resolution_nm),
                );
                summary.insert("provenance".into(), provenance(cfg));
                out.json("marginals.json", &serde_json::Value::Object(summary));
            }
        }
        Command::Conditionals => {
            let grid = unfiltered(cfg, &cfg.zoom)?;
            let mut summary = serde_json::Map::new();
            for (photon, tag) in [(Photon::Signal, "signal"), (Photon::Idler, "idler")] {
                let c = conditional_spectrum(&grid, photon, deg)?;
                if fmt.csv() {
                    out.add(format!("conditional_{tag}.csv"), c.to_csv());
                }
                summary.insert(
                    tag.into(),
                    json!({ "fwhm_nm": fwhm(&c)?, "spectrum": spectrum_json(&c) }),
                );
            }
            if fmt.structured() {
                summary.insert("fixed_partner_nm".into(), json!(deg));
                summary.insert("provenance".into(), provenance(cfg));
                out.json("conditionals.json", &serde_json::Value::Object(summary));
            }
        }
        Command::Report => {
            let report = entanglement_report(cfg)?;
            if fmt.csv() {
                out.add("report.txt", report.to_key_values());
            }
            if fmt.structured() {
                out.json(
                    "report.json",
                    &json!({ "report": report, "provenance": provenance(cfg) }),
                );
            }
        }
        Command::Fig4 => {
            let f = filter(cfg, &cfg.fig4.filter)?;
            let members: Vec<&FilterSpec> = match f {
                FilterSpec::Composite { members } => members.iter().collect(),
                other => vec![other],
            };
            let axis = cfg.fig4.axis;
            let mut csv = String::from("wavelength_nm,transmission");
            for k in 0..members.len() {
                let _ = write!(csv, ",member_{k}");
            }
            csv.push('\n');
            let mut total = Vec::with_capacity(axis.samples);
            for k in 0..axis.samples {
                let l = axis.value(k);
                let t = f.transmission(l)?;
                total.push(t);
                let _ = write!(csv, "{l},{t}");
                for m in &members {
                    let _ = write!(csv, ",{}", m.transmission(l)?);
                }
                csv.push('\n');
            }
            if fmt.csv() {
                out.add("fig4_transmission.csv", csv);
            }
            if fmt.structured() {
                out.json(
                    "fig4_transmission.json",
                    &json!({ "filter": f, "axis": axis, "transmission": total }),
                );
            }
        }
        Command::HwpCurve => {
            let (pair, r1, r2) = cfg.hwp.detected_rates();
            let acc = accidental_rate(r1, r2, cfg.hwp.repetition_rate_hz)?;
            let base = evaluate_tpsa_grid(&cfg.hwp.window, &cfg.crystal, &cfg.pump, 1.0)?;
            let mut cases = Vec::new();
            for name in &cfg.hwp.filters {
                let f = filter(cfg, name)?;
                let ctx = |e: Error| e.context(format!("hwp.filters `{name}` on hwp.window"));
                let grid = apply_filter_to_tpsa(&base, f)
                    .and_then(|g| normalize_grid(&g))
                    .map_err(ctx)?;
                let o = overlap(&grid).map_err(ctx)?;
                let curve = hwp_coincidence_curve(o.overlap, &cfg.hwp.angles_deg, pair, acc).map_err(ctx)?;
                let raw_fit = visibility_from_curve(&curve, false).map_err(ctx)?;
                let sub_fit = visibility_from_curve(&curve, true).map_err(ctx)?;
                let mean_rate = curve.rates.iter().sum::<f64>() / curve.rates.len() as f64;
                if fmt.csv() {
                    out.add(format!("hwp_{name}.csv"), curve.to_csv());
                }
                cases.push(json!({
                    "filter": name,
                    "overlap": o.overlap,
                    "visibility_model": visibility_from_overlap(o.overlap)?,
                    "fit_raw": raw_fit,
                    "fit_accidentals_subtracted": sub_fit,
                    "accidental_fraction": acc / mean_rate,
                    "curve": curve,
                }));
            }
            if fmt.structured() {
                out.json(
                    "hwp.json",
                    &json!({
                        "detected_pair_rate": pair, "singles_rate_1": r1, "singles_rate_2": r2,
                        "accidental_rate": acc, "repetition_rate_hz": cfg.hwp.repetition_rate_hz,
                        "insertion_loss_db": cfg.hwp.insertion_loss_db,
                        "cases": cases, "provenance": provenance(cfg),
                    }),
                );
            }
        }
        Command::Sweep => {
            let curves = run_sweeps(cfg)?;
            if fmt.csv() {
                let mut csv = String::from(VisibilityCurve::csv_header());
                for c in &curves {
                    csv.push_str(&c.csv_rows());
                }
                out.add("sweep.csv", csv);
            }
            if fmt.structured() {
                out.json(
                    "sweep.json",
                    &json!({
                        "family": cfg.sweep.family,
                        "options": cfg.sweep.options,
                        "curves": curves,
                        "provenance": provenance(cfg),
                    }),
                );
            }
        }
    }
    Ok(out)
}

/// Widths, R and Schmidt number of the unfiltered state.
pub fn entanglement_report(cfg: &ScenarioConfig) -> Result<EntanglementReport> {
    let large = unfiltered(cfg, &cfg.large).map_err(|e| e.context("grids.large"))?;
    let zoom = unfiltered(cfg, &cfg.zoom).map_err(|e| e.context("grids.zoom"))?;
    let ratio = fedorov_ratio(&large, &zoom, cfg.degenerate_nm())
        .map_err(|e| e.context("widths on grids.large and grids.zoom"))?;
    drop(large);
    drop(zoom);
    let k = unfiltered(cfg, &cfg.schmidt)
        .and_then(|g| schmidt_decomposition(&g, cfg.schmidt_max_size))
        .map_err(|e| e.context("grids.schmidt"))?
        .schmidt_number;
    Ok(EntanglementReport::new(&ratio, k))
}

/// One visibility curve per configured length scale.
pub fn run_sweeps(cfg: &ScenarioConfig) -> Result<Vec<VisibilityCurve>> {
    cfg.sweep
        .length_scales
        .iter()
        .map(|&ls| {
            visibility_vs_bandwidth_sweep(
                &cfg.crystal,
                &cfg.pump,
                cfg.sweep.family,
                &cfg.sweep.bandwidths_nm,
                ls,
                &cfg.sweep.options,
            )
            .map_err(|e| e.context(format!("sweep at length_scale {ls}")))
        })
        .collect()
}

/// Run one pipeline and write its outputs under `out_dir` (or the
/// configured output directory). Run metadata with a timestamp goes to a
/// separate `run_metadata.json`.
pub fn run_scenario(cfg: &ScenarioConfig, command: Command, out_dir: Option<&Path>) -> Result<Vec<PathBuf>> {
    let mut outputs = compute(cfg, command)?;
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let names: Vec<String> = outputs.names().map(str::to_string).collect();
    outputs.json(
        "run_metadata.json",
        &json!({
            "command": command.name(),
            "unix_time": stamp,
            "files": names,
            "version": env!("CARGO_PKG_VERSION"),
        }),
    );
    let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir.clone());
    outputs.commit(&dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_dir() -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs")
    }

    #[test]
    fn line_col_from_offset() {
        assert_eq!(span_to_line_col("ab\ncd\nef", 4), (2, 2));
        assert_eq!(span_to_line_col("", 10), (1, 1));
    }

    #[test]
    fn parse_error_has_position() {
        let err = parse_config("[crystal]\nlength_mm = = 3\n", &base_dir()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn minimal_config_fills_in_defaults() {
        let text = r#"
            [crystal]
            dispersion_file = "../data/ktp_kato2002.disp"
            [filters.if3]
            type = "super-gaussian"
            center_nm = 795.3
            fwhm_nm = 3.0
            order = 3
            [filters.fp]
            type = "lorentzian"
            center_nm = 795.3
            fwhm_nm = 0.15
            [filters.fp_with_ifs]
            type = "composite"
            members = [{ type = "lorentzian", center_nm = 795.3, fwhm_nm = 0.15 }]
        "#;
        let cfg = parse_config(text, &base_dir()).unwrap();
        assert_eq!(cfg.crystal.length_m, 12e-3);
        assert_eq!(cfg.pump.center_nm, 397.65);
        assert_eq!(cfg.zoom.signal.samples, 2001);
        assert_eq!(cfg.hwp.angles_deg.len(), 37);
    }
}
