//! Deterministic renderer: pinhole rays against the glinty plane, with the
//! smooth LTC path, Monte-Carlo references, the discrete-glint path, and the
//! prior-work baseline.

use crate::camera::PlaneHit;
use crate::image::Image;
use crate::scene::{RenderMode, Scene};
use glintlab::geom::{halfway, Frame, UnitVec3};
use glintlab::glint::{
    baseline_probability, count_reflecting_microfacets, footprint_count, glint_radiance,
    probability_cap_raw, quad_spherical_polygon, LightSpec,
};
use glintlab::ltc::{integrate_ltc_polygon, smooth_radiance_area, LtcError, LtcTable};
use glintlab::math::{Rgb, Vec3};
use glintlab::microfacet::{
    brdf_eval, fresnel_schlick, total_microfacet_area, total_microfacet_area_exact,
};
use glintlab::reference::{discrete_oracle_count, mc_integrated_ndf, mc_radiance_area};
use glintlab::rng::HashStream;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("mode {0:?} requires a baked LTC table")]
    MissingTable(String),
    #[error("oracle mode supports quad lights only")]
    OracleNeedsQuad,
    #[error("table lookup failed at pixel ({x}, {y}): {source}")]
    Lookup { x: u32, y: u32, source: LtcError },
}

/// Aggregate diagnostics; clipped probabilities make the "p > 1" regime of
/// small caps observable.
#[derive(Debug, Clone, Copy, Default)]
pub struct RenderStats {
    pub shaded_pixels: u64,
    pub clipped_probability_pixels: u64,
    pub oracle_saturated_pixels: u64,
    pub skipped_lights: u64,
}

impl RenderStats {
    fn merge(mut self, other: RenderStats) -> RenderStats {
        self.shaded_pixels += other.shaded_pixels;
        self.clipped_probability_pixels += other.clipped_probability_pixels;
        self.oracle_saturated_pixels += other.oracle_saturated_pixels;
        self.skipped_lights += other.skipped_lights;
        self
    }
}

// cap for the brute-force oracle's explicit sampling; pixels above it are
// rendered with this many draws and flagged
const ORACLE_MAX_DRAWS: u64 = 2_000_000;

const SALT_MC_PIXEL: u64 = 0x3C;

/// A cap light resolved at one shading point.
struct ResolvedCap {
    wi: UnitVec3,
    half_angle: f64,
    radiance: Rgb,
}

fn resolve_cap(light: &LightSpec, point: Vec3) -> Option<ResolvedCap> {
    match light {
        LightSpec::DirectionalCap { direction, half_angle, radiance } => {
            if direction.z <= 0.0 {
                return None;
            }
            Some(ResolvedCap { wi: *direction, half_angle: *half_angle, radiance: *radiance })
        }
        LightSpec::PointBall { position, radius, intensity } => {
            let delta = *position - point;
            let dist = delta.length();
            if dist <= *radius {
                return None; // shading point inside the emitter
            }
            let wi = UnitVec3::normalize(delta).ok()?;
            if wi.z <= 0.0 {
                return None;
            }
            let half_angle = (radius / dist).clamp(0.0, 1.0).asin();
            let solid = glintlab::geom::cap_solid_angle(half_angle).ok()?;
            if solid <= 0.0 {
                return None;
            }
            // inverse-square irradiance spread over the cap
            let radiance = *intensity * (1.0 / (dist * dist * solid));
            Some(ResolvedCap { wi, half_angle, radiance })
        }
        LightSpec::Quad { .. } => None,
    }
}

/// Smooth (continuous BRDF) radiance of a cap light: radiance times cap
/// solid angle times the BRDF cosine product at the cap center.
fn smooth_cap_radiance(scene: &Scene, cap: &ResolvedCap, wo: UnitVec3) -> Rgb {
    let solid = glintlab::geom::cap_solid_angle(cap.half_angle).unwrap_or(0.0);
    let f = brdf_eval(&scene.surface.model, &scene.surface.f0, cap.wi, wo, UnitVec3::Z);
    cap.radiance * f * (solid * cap.wi.z)
}

struct PixelOutput {
    color: Rgb,
    clipped: bool,
    saturated: bool,
    skipped: u64,
}

fn shade_pixel(
    scene: &Scene,
    table: Option<&LtcTable>,
    seed: u64,
    px: u32,
    py: u32,
    hit: &PlaneHit,
) -> Result<PixelOutput, RenderError> {
    let wo = hit.view;
    let cos_nv = wo.z;
    let frame = Frame::from_normal_view(UnitVec3::Z, wo);
    let model = &scene.surface.model;
    let f0 = &scene.surface.f0;
    let alpha = model.alpha();

    let mut color = Rgb::BLACK;
    let mut clipped = false;
    let mut saturated = false;
    let mut skipped = 0u64;

    for (light_id, light) in scene.lights.iter().enumerate() {
        let light_id = light_id as u32;
        match light {
            LightSpec::Quad { vertices, radiance } => {
                let Ok(poly) = quad_spherical_polygon(vertices, hit.point, &frame) else {
                    skipped += 1;
                    continue;
                };
                if poly.vertices().iter().all(|v| v.z <= 0.0) {
                    continue;
                }
                let lookup_err = |source: LtcError| RenderError::Lookup { x: px, y: py, source };

                match scene.settings.mode {
                    RenderMode::SmoothLtc => {
                        let table = table.expect("checked at start");
                        color += smooth_radiance_area(table, f0, *radiance, &poly, cos_nv, alpha)
                            .map_err(lookup_err)?;
                    }
                    RenderMode::Glint | RenderMode::GlintBaseline(_) => {
                        let table = table.expect("checked at start");
                        // single lookup; the BRDF-lobe polygon integral is
                        // shared between the smooth radiance and the
                        // reflection probability
                        let sample = table.lookup(alpha, cos_nv).map_err(lookup_err)?;
                        let frac = integrate_ltc_polygon(&sample.brdf_lobe, &poly);
                        let smooth = if frac > 0.0 {
                            let f_eff = match halfway(poly.mean_direction(), wo) {
                                Ok(h) => fresnel_schlick(f0, h.dot(wo.as_vec())),
                                Err(_) => fresnel_schlick(f0, 1.0),
                            };
                            *radiance * f_eff * (sample.fgd * frac)
                        } else {
                            Rgb::BLACK
                        };
                        let p_raw = match scene.settings.mode {
                            RenderMode::GlintBaseline(r) => match halfway(poly.mean_direction(), wo)
                            {
                                Ok(h) => baseline_probability(r, model, h, UnitVec3::Z),
                                Err(_) => 0.0,
                            },
                            _ if scene.settings.use_ndf_lobe => {
                                sample.d_pr * integrate_ltc_polygon(&sample.ndf_lobe, &poly)
                                    / total_microfacet_area(model)
                            }
                            _ => sample.d_pr * frac / total_microfacet_area(model),
                        };
                        if p_raw > 1.0 {
                            clipped = true;
                        }
                        let p = p_raw.clamp(0.0, 1.0);
                        let n_p = footprint_count(&scene.surface, &hit.footprint);
                        let k = count_reflecting_microfacets(&hit.footprint, n_p, p, light_id, seed);
                        color += glint_radiance(smooth, n_p, p, k);
                    }
                    RenderMode::SmoothMc | RenderMode::Oracle => {
                        // light geometry in the shading frame, relative to
                        // the hit point
                        let local: [Vec3; 4] = [
                            frame.to_local(vertices[0] - hit.point),
                            frame.to_local(vertices[1] - hit.point),
                            frame.to_local(vertices[2] - hit.point),
                            frame.to_local(vertices[3] - hit.point),
                        ];
                        let wo_local = frame.to_local_unit(wo);
                        let spp = scene.settings.spp as u64;
                        let mut rng = HashStream::from_parts(
                            seed,
                            &[px as u64, py as u64, light_id as u64, SALT_MC_PIXEL],
                        );
                        let smooth = mc_radiance_area(
                            model, f0, &local, *radiance, wo_local, spp, &mut rng,
                        );
                        if scene.settings.mode == RenderMode::SmoothMc {
                            color += smooth.mean;
                        } else {
                            let n_p = footprint_count(&scene.surface, &hit.footprint);
                            let draws = n_p.min(ORACLE_MAX_DRAWS);
                            if draws < n_p {
                                saturated = true;
                            }
                            let est =
                                mc_integrated_ndf(model, &local, wo_local, spp, &mut rng);
                            let p = est.mean / total_microfacet_area_exact(model);
                            if p > 0.0 {
                                let k = discrete_oracle_count(
                                    model, draws, &poly, wo_local, &mut rng,
                                );
                                color += smooth.mean * (k as f64 / (draws as f64 * p));
                            }
                        }
                    }
                }
            }
            LightSpec::DirectionalCap { .. } | LightSpec::PointBall { .. } => {
                let Some(cap) = resolve_cap(light, hit.point) else {
                    continue;
                };
                if scene.settings.mode == RenderMode::Oracle {
                    return Err(RenderError::OracleNeedsQuad);
                }
                let smooth = smooth_cap_radiance(scene, &cap, wo);
                match scene.settings.mode {
                    RenderMode::SmoothLtc | RenderMode::SmoothMc => color += smooth,
                    RenderMode::Glint => {
                        let p_raw = probability_cap_raw(model, wo, cap.wi, cap.half_angle)
                            .unwrap_or(0.0);
                        if p_raw > 1.0 {
                            clipped = true;
                        }
                        let p = p_raw.clamp(0.0, 1.0);
                        let n_p = footprint_count(&scene.surface, &hit.footprint);
                        let k = count_reflecting_microfacets(&hit.footprint, n_p, p, light_id, seed);
                        color += glint_radiance(smooth, n_p, p, k);
                    }
                    RenderMode::GlintBaseline(r) => {
                        let p = match halfway(cap.wi, wo) {
                            Ok(h) => baseline_probability(r, model, h, UnitVec3::Z),
                            Err(_) => 0.0,
                        };
                        let n_p = footprint_count(&scene.surface, &hit.footprint);
                        let k = count_reflecting_microfacets(&hit.footprint, n_p, p, light_id, seed);
                        color += glint_radiance(smooth, n_p, p, k);
                    }
                    RenderMode::Oracle => unreachable!(),
                }
            }
        }
    }

    Ok(PixelOutput { color, clipped, saturated, skipped })
}

/// Renders the scene. Pure in (scene, table bytes, seed): pixel rows run in
/// parallel but every pixel derives from hash streams alone, so output is
/// bit-identical across runs and thread counts.
pub fn render(
    scene: &Scene,
    table: Option<&LtcTable>,
    seed: u64,
) -> Result<(Image, RenderStats), RenderError> {
    let needs_table = matches!(
        scene.settings.mode,
        RenderMode::SmoothLtc | RenderMode::Glint | RenderMode::GlintBaseline(_)
    ) && scene
        .lights
        .iter()
        .any(|l| matches!(l, LightSpec::Quad { .. }));
    if needs_table && table.is_none() {
        return Err(RenderError::MissingTable(format!("{:?}", scene.settings.mode)));
    }
    if scene.settings.mode == RenderMode::Oracle
        && scene
            .lights
            .iter()
            .any(|l| !matches!(l, LightSpec::Quad { .. }))
    {
        return Err(RenderError::OracleNeedsQuad);
    }

    let width = scene.camera.width();
    let height = scene.camera.height();
    let mut img = Image::new(width, height);

    let row_stats: Result<Vec<RenderStats>, RenderError> = img
        .pixels_mut()
        .par_chunks_mut(width as usize)
        .enumerate()
        .map(|(y, row)| {
            let mut stats = RenderStats::default();
            for (x, out_px) in row.iter_mut().enumerate() {
                let (px, py) = (x as u32, y as u32);
                if let Some(hit) = scene.camera.hit_plane(px, py) {
                    let shaded = shade_pixel(scene, table, seed, px, py, &hit)?;
                    *out_px = [
                        shaded.color.r.max(0.0) as f32,
                        shaded.color.g.max(0.0) as f32,
                        shaded.color.b.max(0.0) as f32,
                    ];
                    stats.shaded_pixels += 1;
                    stats.clipped_probability_pixels += shaded.clipped as u64;
                    stats.oracle_saturated_pixels += shaded.saturated as u64;
                    stats.skipped_lights += shaded.skipped;
                }
            }
            Ok(stats)
        })
        .collect();

    let stats = row_stats?
        .into_iter()
        .fold(RenderStats::default(), RenderStats::merge);
    Ok((img, stats))
}
