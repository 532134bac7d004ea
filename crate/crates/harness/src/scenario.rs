//! Scenario files and built-in experiment definitions.
//!
//! A scenario is a TOML document: top-level `key = value` pairs, an `[array]`
//! table and one `[[targets]]` table per target. Lengths are meters,
//! frequencies hertz, angles degrees. See the README for the full schema.

use serde::Deserialize;

use elaa_doa::{ArrayConfig64, AssociationRule, FusionMode, SteeringModel, Target64};

use crate::error::{HarnessError, Location, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    SsMusicElaa,
    SsMusicUla1,
    SsMusicUla2,
    SsEsprit,
    NfLocalize,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::SsMusicElaa,
        Algorithm::SsMusicUla1,
        Algorithm::SsMusicUla2,
        Algorithm::SsEsprit,
        Algorithm::NfLocalize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::SsMusicElaa => "ss_music_elaa",
            Algorithm::SsMusicUla1 => "ss_music_ula1",
            Algorithm::SsMusicUla2 => "ss_music_ula2",
            Algorithm::SsEsprit => "ss_esprit",
            Algorithm::NfLocalize => "nf_localize",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name.trim())
    }

    pub fn unit(self) -> MetricUnit {
        match self {
            Algorithm::NfLocalize => MetricUnit::Meters,
            _ => MetricUnit::Degrees,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricUnit {
    Degrees,
    Meters,
}

impl MetricUnit {
    pub fn label(self) -> &'static str {
        match self {
            MetricUnit::Degrees => "deg",
            MetricUnit::Meters => "m",
        }
    }
}

/// Steering model used to synthesize snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSetting {
    /// Chosen per target from its range.
    #[default]
    Auto,
    Exact,
    FarField,
    LocalPlanar,
    SharedDoa,
}

impl ModelSetting {
    pub fn fixed(self) -> Option<SteeringModel> {
        match self {
            ModelSetting::Auto => None,
            ModelSetting::Exact => Some(SteeringModel::Exact),
            ModelSetting::FarField => Some(SteeringModel::FarField),
            ModelSetting::LocalPlanar => Some(SteeringModel::NearFieldLocalPlanar),
            ModelSetting::SharedDoa => Some(SteeringModel::NearFieldSharedDoa),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawFusion {
    Product,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawAssociation {
    MatchingPursuit,
    Exhaustive,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    n_trials: Option<i64>,
    base_seed: Option<u64>,
    snr_db: Option<Vec<f64>>,
    algorithms: Option<Vec<Algorithm>>,
    fusion: Option<RawFusion>,
    grid_step_deg: Option<f64>,
    pencil: Option<i64>,
    hit_tolerance_deg: Option<f64>,
    hit_tolerance_m: Option<f64>,
    model: Option<ModelSetting>,
    association: Option<RawAssociation>,
    rmse_include_failures: Option<bool>,
    #[serde(default)]
    array: RawArray,
    #[serde(default)]
    targets: Vec<RawTarget>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArray {
    elements_per_ula: Option<i64>,
    carrier_hz: Option<f64>,
    spacing_m: Option<f64>,
    spacing_wavelengths: Option<f64>,
    gap_m: Option<f64>,
    gap_wavelengths: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTarget {
    range_m: Option<f64>,
    angle_deg: Option<f64>,
    x_m: Option<f64>,
    y_m: Option<f64>,
    amplitude: Option<f64>,
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub array: ArrayConfig64,
    pub targets: Vec<Target64>,
    pub snr_grid_db: Vec<f64>,
    pub n_trials: usize,
    pub algorithms: Vec<Algorithm>,
    pub fusion: FusionMode,
    pub grid_step_deg: f64,
    /// `None` selects `⌊M/2⌋`.
    pub pencil: Option<usize>,
    pub hit_tolerance_deg: f64,
    pub hit_tolerance_m: f64,
    pub base_seed: u64,
    pub model: ModelSetting,
    pub association: AssociationRule,
    /// Count failed trials in RMSE with a fixed penalty error.
    pub rmse_include_failures: bool,
}

pub const DEFAULT_TRIALS: usize = 500;
pub const FULL_TRIALS: usize = 5000;

pub fn default_snr_grid() -> Vec<f64> {
    (0..=8).map(|i| 5.0 * i as f64).collect()
}

impl ScenarioSpec {
    /// Parses and validates a TOML scenario; `source_name` labels diagnostics.
    pub fn from_toml(text: &str, source_name: &str) -> Result<Self> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map(|s| line_col(text, s.start)).unzip();
            HarnessError::Config {
                source_name: source_name.to_string(),
                location: Location { line, column, field: None },
                message: e.message().trim().to_string(),
            }
        })?;
        let fail = |field: &str, message: String| HarnessError::Config {
            source_name: source_name.to_string(),
            location: Location { line: locate(text, field), column: None, field: Some(field.to_string()) },
            message,
        };
        let array = build_array(&raw.array).map_err(|(f, m)| fail(&f, m))?;
        let mut targets = Vec::with_capacity(raw.targets.len());
        for (i, t) in raw.targets.iter().enumerate() {
            targets.push(build_target(t).map_err(|(f, m)| fail(&format!("targets[{i}].{f}"), m))?);
        }
        let spec = ScenarioSpec {
            name: raw.name.unwrap_or_else(|| source_name.to_string()),
            array,
            targets,
            snr_grid_db: raw.snr_db.unwrap_or_else(default_snr_grid),
            n_trials: match raw.n_trials {
                None => DEFAULT_TRIALS,
                Some(n) if n >= 1 => n as usize,
                Some(n) => return Err(fail("n_trials", format!("must be at least 1, got {n}"))),
            },
            algorithms: raw.algorithms.unwrap_or_else(|| vec![Algorithm::SsMusicElaa, Algorithm::SsEsprit]),
            fusion: match raw.fusion {
                None | Some(RawFusion::Product) => FusionMode::Product,
                Some(RawFusion::Max) => FusionMode::Max,
            },
            grid_step_deg: raw.grid_step_deg.unwrap_or(0.01),
            pencil: match raw.pencil {
                None => None,
                Some(l) if l >= 1 => Some(l as usize),
                Some(l) => return Err(fail("pencil", format!("must be at least 1, got {l}"))),
            },
            hit_tolerance_deg: raw.hit_tolerance_deg.unwrap_or(0.5),
            hit_tolerance_m: raw.hit_tolerance_m.unwrap_or(0.1),
            base_seed: raw.base_seed.unwrap_or(0),
            model: raw.model.unwrap_or_default(),
            association: match raw.association {
                None | Some(RawAssociation::MatchingPursuit) => AssociationRule::MatchingPursuit,
                Some(RawAssociation::Exhaustive) => AssociationRule::Exhaustive,
            },
            rmse_include_failures: raw.rmse_include_failures.unwrap_or(false),
        };
        spec.validate().map_err(|(f, m)| fail(&f, m))?;
        Ok(spec)
    }

    /// Checks the cross-field invariants. Returns the offending field.
    pub fn validate(&self) -> std::result::Result<(), (String, String)> {
        let err = |f: &str, m: &str| Err((f.to_string(), m.to_string()));
        if self.n_trials < 1 {
            return err("n_trials", "must be at least 1");
        }
        if self.snr_grid_db.is_empty() {
            return err("snr_db", "must list at least one SNR");
        }
        if self.snr_grid_db.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return err("snr_db", "entries must be finite or +inf");
        }
        if self.algorithms.is_empty() {
            return err("algorithms", "must list at least one algorithm");
        }
        if self.targets.is_empty() {
            return err("targets", "at least one [[targets]] table is required");
        }
        let m = self.array.elements_per_ula();
        let pencil = self.pencil.unwrap_or(m / 2);
        if pencil >= m {
            return err("pencil", "must be below the number of elements per ULA");
        }
        let max_order = pencil.min(m - pencil).saturating_sub(1);
        if self.targets.len() > max_order {
            return err("targets", &format!("{} targets exceed the identifiable maximum {max_order}", self.targets.len()));
        }
        if !(self.grid_step_deg > 0.0 && self.grid_step_deg <= 10.0) {
            return err("grid_step_deg", "must be in (0, 10]");
        }
        if !(self.hit_tolerance_deg > 0.0) || !self.hit_tolerance_deg.is_finite() {
            return err("hit_tolerance_deg", "must be positive");
        }
        if !(self.hit_tolerance_m > 0.0) || !self.hit_tolerance_m.is_finite() {
            return err("hit_tolerance_m", "must be positive");
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.targets.len()
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

/// Best-effort line of a dotted field path such as `targets[1].angle_deg`.
fn locate(text: &str, path: &str) -> Option<usize> {
    let (section, index, key) = if let Some(rest) = path.strip_prefix("targets[") {
        let (idx, key) = rest.split_once("].")?;
        ("[[targets]]", idx.parse::<usize>().ok()?, key)
    } else if let Some(key) = path.strip_prefix("array.") {
        ("[array]", 0, key)
    } else {
        ("", 0, path)
    };
    let mut seen = 0usize;
    let mut inside = section.is_empty();
    for (n, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            if !section.is_empty() && t == section {
                inside = seen == index;
                seen += 1;
            } else {
                inside = false;
            }
            continue;
        }
        if inside && t.split('=').next().map(str::trim) == Some(key) {
            return Some(n + 1);
        }
    }
    None
}

fn build_array(raw: &RawArray) -> std::result::Result<ArrayConfig64, (String, String)> {
    let bad = |f: &str, m: String| (format!("array.{f}"), m);
    let elements = raw.elements_per_ula.unwrap_or(16);
    if elements < 2 {
        return Err(bad("elements_per_ula", format!("must be at least 2, got {elements}")));
    }
    let carrier = raw.carrier_hz.unwrap_or(76e9);
    if !(carrier > 0.0) || !carrier.is_finite() {
        return Err(bad("carrier_hz", "must be positive".into()));
    }
    let lambda = elaa_doa::SPEED_OF_LIGHT / carrier;
    let pick = |m: Option<f64>, w: Option<f64>, name: &str, default_w: f64| match (m, w) {
        (Some(_), Some(_)) => Err(bad(&format!("{name}_m"), format!("give either {name}_m or {name}_wavelengths, not both"))),
        (Some(v), None) => Ok(v),
        (None, Some(v)) => Ok(v * lambda),
        (None, None) => Ok(default_w * lambda),
    };
    let spacing = pick(raw.spacing_m, raw.spacing_wavelengths, "spacing", 0.5)?;
    let gap = pick(raw.gap_m, raw.gap_wavelengths, "gap", 150.0)?;
    ArrayConfig64::new(elements as usize, spacing, gap, lambda).map_err(|e| ("array".to_string(), e.to_string()))
}

fn build_target(raw: &RawTarget) -> std::result::Result<Target64, (String, String)> {
    let target = match (raw.range_m, raw.angle_deg, raw.x_m, raw.y_m) {
        (Some(r), Some(a), None, None) => {
            Target64::from_degrees(r, a).map_err(|e| ("angle_deg".to_string(), e.to_string()))?
        }
        (None, None, Some(x), Some(y)) => Target64::from_position(x, y).map_err(|e| ("y_m".to_string(), e.to_string()))?,
        _ => return Err(("range_m".into(), "give either range_m and angle_deg, or x_m and y_m".into())),
    };
    let amplitude = raw.amplitude.unwrap_or(1.0);
    if !(amplitude > 0.0) || !amplitude.is_finite() {
        return Err(("amplitude".into(), "must be positive".into()));
    }
    Ok(target.with_amplitude(num_complex_real(amplitude)))
}

fn num_complex_real(a: f64) -> elaa_doa::num::Cplx<f64> {
    elaa_doa::num::Cplx::new(a, 0.0)
}

fn far_pair(name: &str, half_sep_deg: f64) -> ScenarioSpec {
    let targets = [-half_sep_deg, half_sep_deg]
        .iter()
        .map(|a| Target64::from_degrees(250.0, *a).expect("valid builtin target"))
        .collect();
    base(name, targets, default_snr_grid(), vec![Algorithm::SsMusicElaa, Algorithm::SsEsprit])
}

fn near(name: &str, points: &[[f64; 2]]) -> ScenarioSpec {
    let targets = points
        .iter()
        .map(|p| Target64::from_position(p[0], p[1]).expect("valid builtin target"))
        .collect();
    base(name, targets, vec![30.0], vec![Algorithm::NfLocalize])
}

fn base(name: &str, targets: Vec<Target64>, snr: Vec<f64>, algorithms: Vec<Algorithm>) -> ScenarioSpec {
    ScenarioSpec {
        name: name.to_string(),
        array: ArrayConfig64::automotive_76ghz(),
        targets,
        snr_grid_db: snr,
        n_trials: DEFAULT_TRIALS,
        algorithms,
        fusion: FusionMode::Product,
        grid_step_deg: 0.01,
        pencil: None,
        hit_tolerance_deg: 0.5,
        hit_tolerance_m: 0.1,
        base_seed: 0,
        model: ModelSetting::Auto,
        association: AssociationRule::MatchingPursuit,
        rmse_include_failures: false,
    }
}

pub const BUILTIN_NAMES: [&str; 4] = ["fig3_small_sep", "fig3_large_sep", "fig4_near_a", "fig4_near_b"];

/// The four reference experiments: two far-field pairs at 250 m (±0.2°, ±5°)
/// and two near-field pairs (5 m at ±10°; on the y-axis at 4 m and 6 m).
pub fn builtin_scenarios() -> Vec<ScenarioSpec> {
    let at5 = |deg: f64| [5.0 * deg.to_radians().sin(), 5.0 * deg.to_radians().cos()];
    vec![
        far_pair("fig3_small_sep", 0.2),
        far_pair("fig3_large_sep", 5.0),
        near("fig4_near_a", &[at5(-10.0), at5(10.0)]),
        near("fig4_near_b", &[[0.0, 4.0], [0.0, 6.0]]),
    ]
}

pub fn builtin(name: &str) -> Option<ScenarioSpec> {
    builtin_scenarios().into_iter().find(|s| s.name == name)
}

/// A built-in name or a path to a TOML file.
pub fn load(name_or_path: &str) -> Result<ScenarioSpec> {
    if let Some(spec) = builtin(name_or_path) {
        return Ok(spec);
    }
    let text = std::fs::read_to_string(name_or_path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            HarnessError::Usage(format!(
                "scenario `{name_or_path}` is neither a file nor a built-in ({})",
                BUILTIN_NAMES.join(", ")
            ))
        } else {
            HarnessError::Io { path: name_or_path.to_string(), source: e }
        }
    })?;
    ScenarioSpec::from_toml(&text, name_or_path)
}

/// Parses `a:b:step` (inclusive of `b` up to rounding), a single value, or
/// `inf`.
pub fn parse_snr_range(text: &str) -> Result<Vec<f64>> {
    let bad = || HarnessError::Usage(format!("invalid --snr `{text}`: expected a:b:step, a single value or inf"));
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    match parts.as_slice() {
        [single] => {
            let v = num(single)?;
            if v.is_nan() || v == f64::NEG_INFINITY {
                return Err(bad());
            }
            Ok(vec![v])
        }
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if !(step > 0.0) || !a.is_finite() || !b.is_finite() || b < a {
                return Err(bad());
            }
            let count = ((b - a) / step + 1e-9).floor() as usize + 1;
            Ok((0..count).map(|i| a + i as f64 * step).collect())
        }
        _ => Err(bad()),
    }
}
