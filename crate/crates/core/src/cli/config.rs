//! Run settings: built-in defaults, overridden by a TOML file, overridden by
//! command-line flags.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::alignment::TransitionForm;
use crate::features::{FeatureConfig, TimeBase, WordCountPolicy};
use crate::geometry::{compute_radii, DisplayGeometry, RadiiForm, RegionRadii};
use crate::pipeline::AnalysisConfig;
use crate::sequences::SequenceConfig;
use crate::stats::{Alternative, EqualMeanPolicy};
use crate::synth::SynthConfig;

/// Parses a lowercase/kebab-case enum value through its serde names.
pub fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    T::deserialize(serde::de::value::StrDeserializer::<serde::de::value::Error>::new(s)).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryFile {
    pub diagonal_inches: Option<f64>,
    pub width_px: Option<u32>,
    pub height_px: Option<u32>,
    pub viewing_distance_cm: Option<f64>,
    pub foveal_diameter_deg: Option<f64>,
    pub parafoveal_diameter_deg: Option<f64>,
}

impl GeometryFile {
    fn apply(&self, g: &mut DisplayGeometry) {
        if let Some(v) = self.diagonal_inches {
            g.diagonal_inches = v;
        }
        if let Some(v) = self.width_px {
            g.resolution_px.0 = v;
        }
        if let Some(v) = self.height_px {
            g.resolution_px.1 = v;
        }
        if let Some(v) = self.viewing_distance_cm {
            g.viewing_distance_cm = v;
        }
        if let Some(v) = self.foveal_diameter_deg {
            g.foveal_diameter_deg = v;
        }
        if let Some(v) = self.parafoveal_diameter_deg {
            g.parafoveal_diameter_deg = v;
        }
    }

    /// Parses `key=value,key=value` with keys `diagonal`, `width`, `height`,
    /// `distance`, `foveal`, `parafoveal`.
    pub fn parse_flag(s: &str) -> Result<Self, String> {
        let mut out = GeometryFile::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got `{part}`"))?;
            let real = || value.trim().parse::<f64>().map_err(|_| format!("`{value}` is not a number"));
            let int = || value.trim().parse::<u32>().map_err(|_| format!("`{value}` is not an integer"));
            match key.trim() {
                "diagonal" => out.diagonal_inches = Some(real()?),
                "width" => out.width_px = Some(int()?),
                "height" => out.height_px = Some(int()?),
                "distance" => out.viewing_distance_cm = Some(real()?),
                "foveal" => out.foveal_diameter_deg = Some(real()?),
                "parafoveal" => out.parafoveal_diameter_deg = Some(real()?),
                other => return Err(format!("unknown geometry key `{other}`")),
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyFile {
    pub spacing_form: Option<TransitionForm>,
    pub radii_form: Option<RadiiForm>,
    pub nwords: Option<WordCountPolicy>,
    pub time_base: Option<TimeBase>,
    pub min_seq_len: Option<usize>,
    pub min_seq_words: Option<usize>,
    pub equal_mean: Option<EqualMeanPolicy>,
    pub alternative: Option<Alternative>,
    pub threads: Option<usize>,
}

/// Contents of a `--config` TOML file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub geometry: GeometryFile,
    #[serde(default)]
    pub policy: PolicyFile,
    pub synth: Option<SynthConfig>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Fully resolved settings of one run; echoed into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub geometry: DisplayGeometry,
    pub radii_form: RadiiForm,
    pub radii: RegionRadii,
    pub spacing_form: TransitionForm,
    pub sequences: SequenceConfig,
    pub features: FeatureConfig,
    pub equal_mean: EqualMeanPolicy,
    pub alternative: Alternative,
    pub threads: usize,
}

impl Settings {
    pub fn analysis(&self) -> AnalysisConfig {
        AnalysisConfig {
            radii: self.radii,
            transition: self.spacing_form,
            sequences: self.sequences,
            features: self.features,
        }
    }
}

/// Policy values given on the command line.
#[derive(Debug, Clone, Default)]
pub struct FlagOverrides {
    pub geometry: Option<GeometryFile>,
    pub policy: PolicyFile,
}

fn pick<T: Copy>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

pub fn resolve(file: &ConfigFile, flags: &FlagOverrides) -> Result<Settings, CliError> {
    let mut geometry = DisplayGeometry::default();
    file.geometry.apply(&mut geometry);
    if let Some(g) = &flags.geometry {
        g.apply(&mut geometry);
    }
    let (fp, cp) = (&flags.policy, &file.policy);
    let radii_form = pick(fp.radii_form, cp.radii_form, RadiiForm::default());
    let radii = compute_radii(&geometry, radii_form).map_err(|e| CliError::Config(e.to_string()))?;
    let defaults = SequenceConfig::default();
    let sequences = SequenceConfig {
        min_fixations: pick(fp.min_seq_len, cp.min_seq_len, defaults.min_fixations),
        min_distinct_words: pick(fp.min_seq_words, cp.min_seq_words, defaults.min_distinct_words),
    };
    if sequences.min_fixations == 0 {
        return Err(CliError::Config("minimum sequence length must be positive".into()));
    }
    Ok(Settings {
        geometry,
        radii_form,
        radii,
        spacing_form: pick(fp.spacing_form, cp.spacing_form, TransitionForm::default()),
        sequences,
        features: FeatureConfig {
            word_count: pick(fp.nwords, cp.nwords, WordCountPolicy::default()),
            time_base: pick(fp.time_base, cp.time_base, TimeBase::default()),
        },
        equal_mean: pick(fp.equal_mean, cp.equal_mean, EqualMeanPolicy::default()),
        alternative: pick(fp.alternative, cp.alternative, Alternative::default()),
        threads: pick(fp.threads, cp.threads, 0),
    })
}
