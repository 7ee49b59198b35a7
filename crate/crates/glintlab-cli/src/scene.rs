//! Scene schema (versioned JSON) and its validated runtime form.
//!
//! The shaded surface is the z = 0 plane with UV equal to world (x, y), so
//! the material density is per unit world area.

use crate::camera::Camera;
use glintlab::glint::{GlintSurface, LightSpec};
use glintlab::math::{Rgb, Vec3};
use glintlab::microfacet::{FresnelF0, MicrofacetKind, MicrofacetModel};
use glintlab::UnitVec3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> SceneError {
    SceneError::Invalid { path: path.into(), message: message.into() }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneFile {
    pub version: u32,
    pub surface: SurfaceSpec,
    pub camera: CameraSpec,
    pub lights: Vec<LightSpecFile>,
    pub render: RenderSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub model: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perceptual_roughness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub f0: [f64; 3],
    pub density: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CameraSpec {
    pub position: [f64; 3],
    pub look_at: [f64; 3],
    pub up: [f64; 3],
    pub fov_y_degrees: f64,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LightSpecFile {
    Quad { vertices: [[f64; 3]; 4], radiance: [f64; 3] },
    Directional { direction: [f64; 3], half_angle_degrees: f64, radiance: [f64; 3] },
    Point { position: [f64; 3], radius: f64, intensity: [f64; 3] },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RenderSpec {
    pub mode: String,
    #[serde(default = "default_spp")]
    pub spp: u32,
    #[serde(default = "default_exposure")]
    pub exposure: f64,
    #[serde(default)]
    pub tonemap: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_r: Option<f64>,
    #[serde(default)]
    pub use_ndf_lobe: bool,
}

fn default_spp() -> u32 {
    64
}

fn default_exposure() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RenderMode {
    SmoothLtc,
    SmoothMc,
    Glint,
    GlintBaseline(f64),
    Oracle,
}

#[derive(Debug, Clone)]
pub struct RenderSettings {
    pub mode: RenderMode,
    pub spp: u32,
    pub exposure: f64,
    pub tonemap: bool,
    pub use_ndf_lobe: bool,
}

/// Fully validated scene, ready to render.
#[derive(Debug, Clone)]
pub struct Scene {
    pub surface: GlintSurface,
    pub camera: Camera,
    pub lights: Vec<LightSpec>,
    pub settings: RenderSettings,
}

fn vec3(v: [f64; 3]) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

fn rgb(v: [f64; 3]) -> Rgb {
    Rgb::new(v[0], v[1], v[2])
}

impl Scene {
    pub fn from_json(text: &str) -> Result<Scene, SceneError> {
        let file: SceneFile = serde_json::from_str(text)?;
        Scene::from_file(&file)
    }

    pub fn from_file(file: &SceneFile) -> Result<Scene, SceneError> {
        if file.version != 1 {
            return Err(invalid("version", format!("unsupported version {}", file.version)));
        }

        let kind = match file.surface.model.as_str() {
            "ggx" => MicrofacetKind::Ggx,
            "beckmann" => MicrofacetKind::Beckmann,
            other => {
                return Err(invalid(
                    "surface.model",
                    format!("unknown model {other:?} (expected ggx or beckmann)"),
                ))
            }
        };
        let model = match (file.surface.perceptual_roughness, file.surface.alpha) {
            (Some(r), None) => MicrofacetModel::from_perceptual_roughness(kind, r)
                .map_err(|e| invalid("surface.perceptual_roughness", e.to_string()))?,
            (None, Some(a)) => MicrofacetModel::new(kind, a)
                .map_err(|e| invalid("surface.alpha", e.to_string()))?,
            _ => {
                return Err(invalid(
                    "surface",
                    "specify exactly one of perceptual_roughness or alpha",
                ))
            }
        };
        let f0 = FresnelF0::new(file.surface.f0[0], file.surface.f0[1], file.surface.f0[2])
            .map_err(|e| invalid("surface.f0", e.to_string()))?;
        let surface = GlintSurface::new(model, f0, file.surface.density, file.surface.seed)
            .map_err(|e| invalid("surface.density", e.to_string()))?;

        if file.camera.width < 1 || file.camera.height < 1 {
            return Err(invalid("camera.width", "dimensions must be at least 1"));
        }
        let camera = Camera::new(
            vec3(file.camera.position),
            vec3(file.camera.look_at),
            vec3(file.camera.up),
            file.camera.fov_y_degrees,
            file.camera.width,
            file.camera.height,
        )
        .map_err(|m| invalid("camera", m))?;

        if file.lights.is_empty() {
            return Err(invalid("lights", "at least one light is required"));
        }
        let mut lights = Vec::with_capacity(file.lights.len());
        for (i, l) in file.lights.iter().enumerate() {
            let light = match l {
                LightSpecFile::Quad { vertices, radiance } => LightSpec::Quad {
                    vertices: [
                        vec3(vertices[0]),
                        vec3(vertices[1]),
                        vec3(vertices[2]),
                        vec3(vertices[3]),
                    ],
                    radiance: rgb(*radiance),
                },
                LightSpecFile::Directional { direction, half_angle_degrees, radiance } => {
                    let dir = UnitVec3::normalize(vec3(*direction)).map_err(|e| {
                        invalid(format!("lights[{i}].direction"), e.to_string())
                    })?;
                    LightSpec::DirectionalCap {
                        direction: dir,
                        half_angle: half_angle_degrees.to_radians(),
                        radiance: rgb(*radiance),
                    }
                }
                LightSpecFile::Point { position, radius, intensity } => LightSpec::PointBall {
                    position: vec3(*position),
                    radius: *radius,
                    intensity: rgb(*intensity),
                },
            };
            light
                .validate()
                .map_err(|e| invalid(format!("lights[{i}]"), e.to_string()))?;
            lights.push(light);
        }

        let mode = match file.render.mode.as_str() {
            "smooth_ltc" => RenderMode::SmoothLtc,
            "smooth_mc" => RenderMode::SmoothMc,
            "glint" => RenderMode::Glint,
            "glint_baseline" => {
                let r = file.render.baseline_r.ok_or_else(|| {
                    invalid("render.baseline_r", "required for mode glint_baseline")
                })?;
                if !(0.0..=1.0).contains(&r) {
                    return Err(invalid("render.baseline_r", "must lie in [0, 1]"));
                }
                RenderMode::GlintBaseline(r)
            }
            "oracle" => RenderMode::Oracle,
            other => {
                return Err(invalid(
                    "render.mode",
                    format!(
                        "unknown mode {other:?} (expected smooth_ltc, smooth_mc, glint, \
                         glint_baseline or oracle)"
                    ),
                ))
            }
        };
        if file.render.spp == 0 {
            return Err(invalid("render.spp", "must be at least 1"));
        }
        if !(file.render.exposure > 0.0) {
            return Err(invalid("render.exposure", "must be positive"));
        }

        Ok(Scene {
            surface,
            camera,
            lights,
            settings: RenderSettings {
                mode,
                spp: file.render.spp,
                exposure: file.render.exposure,
                tonemap: file.render.tonemap,
                use_ndf_lobe: file.render.use_ndf_lobe,
            },
        })
    }

    pub fn with_mode(mut self, mode: RenderMode) -> Scene {
        self.settings.mode = mode;
        self
    }

    pub fn with_density(mut self, density: f64) -> Scene {
        self.surface.density = density;
        self
    }
}

/// Quad-light preset mirroring the evaluation scenes: a camera above the
/// plane at ~35 degrees elevation and a square emitter at z = 1.
pub fn figure_scene_file(
    light_side: f64,
    sqrt_alpha: f64,
    density: f64,
    mode: &str,
    resolution: u32,
) -> SceneFile {
    let h = light_side / 2.0;
    SceneFile {
        version: 1,
        surface: SurfaceSpec {
            model: "ggx".into(),
            perceptual_roughness: Some(sqrt_alpha),
            alpha: None,
            f0: [1.0, 1.0, 1.0],
            density,
            seed: 1,
        },
        camera: CameraSpec {
            position: [0.0, -3.0, 2.0],
            look_at: [0.0, -0.2, 0.0],
            up: [0.0, 0.0, 1.0],
            fov_y_degrees: 45.0,
            width: resolution,
            height: resolution,
        },
        lights: vec![LightSpecFile::Quad {
            vertices: [
                [-h, -h, 1.0],
                [h, -h, 1.0],
                [h, h, 1.0],
                [-h, h, 1.0],
            ],
            radiance: [1.0, 1.0, 1.0],
        }],
        render: RenderSpec {
            mode: mode.into(),
            spp: 64,
            exposure: 1.0,
            tonemap: false,
            baseline_r: None,
            use_ndf_lobe: false,
        },
    }
}

/// Directional-light preset with the given cap half-angle.
pub fn directional_scene_file(
    half_angle_degrees: f64,
    sqrt_alpha: f64,
    density: f64,
    mode: &str,
    resolution: u32,
) -> SceneFile {
    // direction chosen so the mirror highlight of the preset camera lands
    // near the look-at point
    let mut file = figure_scene_file(5.0, sqrt_alpha, density, mode, resolution);
    file.lights = vec![LightSpecFile::Directional {
        direction: [0.0, 1.25, 1.0],
        half_angle_degrees,
        radiance: [120.0, 120.0, 120.0],
    }];
    file
}
