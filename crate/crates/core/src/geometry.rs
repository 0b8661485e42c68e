//! Display geometry and the pixel radii of the foveal and parafoveal regions.
//!
//! Visual angles are converted to on-screen distances with the viewing
//! distance and the pixel density of the monitor. All radii stay as `f64`;
//! rounding only happens when values are printed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

const CM_PER_INCH: f64 = 2.54;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("{field} must be finite and strictly positive, got {value}")]
    NotPositive { field: &'static str, value: f64 },
    #[error("{field} must be below 180 degrees, got {value}")]
    AngleTooWide { field: &'static str, value: f64 },
    #[error("parafoveal diameter ({parafoveal}°) must exceed foveal diameter ({foveal}°)")]
    RegionOrder { foveal: f64, parafoveal: f64 },
}

/// Physical screen and viewer parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplayGeometry {
    pub diagonal_inches: f64,
    pub resolution_px: (u32, u32),
    pub viewing_distance_cm: f64,
    pub foveal_diameter_deg: f64,
    pub parafoveal_diameter_deg: f64,
}

impl Default for DisplayGeometry {
    /// 24" 1920×1080 monitor viewed from 65 cm, 2° fovea, 7° parafovea.
    fn default() -> Self {
        Self {
            diagonal_inches: 24.0,
            resolution_px: (1920, 1080),
            viewing_distance_cm: 65.0,
            foveal_diameter_deg: 2.0,
            parafoveal_diameter_deg: 7.0,
        }
    }
}

fn positive(field: &'static str, value: f64) -> Result<(), GeometryError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(GeometryError::NotPositive { field, value })
    }
}

impl DisplayGeometry {
    pub fn validate(&self) -> Result<(), GeometryError> {
        positive("diagonal_inches", self.diagonal_inches)?;
        positive("resolution width", f64::from(self.resolution_px.0))?;
        positive("resolution height", f64::from(self.resolution_px.1))?;
        positive("viewing_distance_cm", self.viewing_distance_cm)?;
        positive("foveal_diameter_deg", self.foveal_diameter_deg)?;
        positive("parafoveal_diameter_deg", self.parafoveal_diameter_deg)?;
        for (field, value) in [
            ("foveal_diameter_deg", self.foveal_diameter_deg),
            ("parafoveal_diameter_deg", self.parafoveal_diameter_deg),
        ] {
            if value >= 180.0 {
                return Err(GeometryError::AngleTooWide { field, value });
            }
        }
        if self.parafoveal_diameter_deg <= self.foveal_diameter_deg {
            return Err(GeometryError::RegionOrder {
                foveal: self.foveal_diameter_deg,
                parafoveal: self.parafoveal_diameter_deg,
            });
        }
        Ok(())
    }
}

/// How the parafoveal radius is derived from the parafoveal angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadiiForm {
    /// Parafoveal extent is measured from the edge of the foveal region:
    /// `r_parafoveal = r_foveal + d·tan(θ_para/2)·ppcm`. Yields ≈185 px for
    /// the default display.
    #[default]
    Additive,
    /// Plain half-angle projection `d·tan(θ_para/2)·ppcm` (≈144 px).
    Direct,
}

impl std::fmt::Display for RadiiForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RadiiForm::Additive => "additive",
            RadiiForm::Direct => "direct",
        })
    }
}

/// Pixel radii used by the region and candidate tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionRadii {
    pub r_foveal_px: f64,
    pub r_parafoveal_px: f64,
    /// Search radius for candidate words, always `2 · r_foveal_px`.
    pub candidate_radius_px: f64,
}

impl RegionRadii {
    /// Builds radii directly from pixel values; used by tests and tools that
    /// already know their radii.
    pub fn from_pixels(r_foveal_px: f64, r_parafoveal_px: f64) -> Self {
        Self {
            r_foveal_px,
            r_parafoveal_px,
            candidate_radius_px: 2.0 * r_foveal_px,
        }
    }
}

pub fn pixels_per_cm(geom: &DisplayGeometry) -> Result<f64, GeometryError> {
    positive("diagonal_inches", geom.diagonal_inches)?;
    let (w, h) = geom.resolution_px;
    positive("resolution width", f64::from(w))?;
    positive("resolution height", f64::from(h))?;
    let diagonal_px = f64::from(w).hypot(f64::from(h));
    Ok(diagonal_px / (geom.diagonal_inches * CM_PER_INCH))
}

/// On-screen half-width (px) of a region spanning `diameter_deg` of visual angle.
fn half_extent_px(diameter_deg: f64, distance_cm: f64, ppcm: f64) -> f64 {
    distance_cm * (diameter_deg / 2.0).to_radians().tan() * ppcm
}

pub fn compute_radii(geom: &DisplayGeometry, form: RadiiForm) -> Result<RegionRadii, GeometryError> {
    geom.validate()?;
    let ppcm = pixels_per_cm(geom)?;
    let d = geom.viewing_distance_cm;
    let r_foveal_px = half_extent_px(geom.foveal_diameter_deg, d, ppcm);
    let para = half_extent_px(geom.parafoveal_diameter_deg, d, ppcm);
    let r_parafoveal_px = match form {
        RadiiForm::Additive => r_foveal_px + para,
        RadiiForm::Direct => para,
    };
    Ok(RegionRadii::from_pixels(r_foveal_px, r_parafoveal_px))
}
