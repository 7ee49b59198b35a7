//! Experiment runners: convergence strips, light-source subdivision,
//! baseline R matching, and the MC/LTC approximation ablation.

use crate::image::Image;
use crate::render::{render, RenderError};
use crate::scene::{RenderMode, Scene};
use glintlab::geom::{Frame, UnitVec3};
use glintlab::glint::{
    count_reflecting_microfacets, footprint_count, glint_radiance, match_r,
    probability_area_raw, quad_spherical_polygon, split_count_multinomial, CountKey, LightSpec,
};
use glintlab::ltc::{smooth_radiance_area, LtcTable};
use glintlab::math::{Rgb, Vec3};
use glintlab::microfacet::{total_microfacet_area_exact, MicrofacetModel};
use glintlab::reference::{mc_integrated_ndf, mc_radiance_area};
use glintlab::rng::HashStream;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("convergence needs at least 2 levels, got {0}")]
    TooFewLevels(u32),
    #[error("subdivision patch count {0} is not a perfect square")]
    NonSquareSplit(u32),
    #[error("scene has no quad light to subdivide")]
    NoQuadLight,
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Glint(#[from] glintlab::glint::GlintError),
}

// ---------------------------------------------------------------------------
// convergence

#[derive(Debug, Clone)]
pub struct ConvergenceLevel {
    pub level: u32,
    pub density_scale: f64,
    pub rms_vs_smooth: f64,
}

#[derive(Debug)]
pub struct ConvergenceReport {
    pub levels: Vec<ConvergenceLevel>,
    pub strip: Image,
    pub smooth: Image,
}

/// Renders the glint scene repeatedly with the footprint count quadrupling
/// per level and reports the relative RMS against the smooth LTC render.
/// The strip image splices one vertical band from each level.
pub fn experiment_convergence(
    scene: &Scene,
    table: &LtcTable,
    levels: u32,
    seed: u64,
) -> Result<ConvergenceReport, ExperimentError> {
    if levels < 2 {
        return Err(ExperimentError::TooFewLevels(levels));
    }
    let smooth_scene = scene.clone().with_mode(RenderMode::SmoothLtc);
    let (smooth, _) = render(&smooth_scene, Some(table), seed)?;

    let width = scene.camera.width();
    let height = scene.camera.height();
    let mut strip = Image::new(width, height);
    let mut out_levels = Vec::with_capacity(levels as usize);

    for level in 0..levels {
        let scale = 4f64.powi(level as i32);
        let glint_scene = scene
            .clone()
            .with_mode(RenderMode::Glint)
            .with_density(scene.surface.density * scale);
        let (img, _) = render(&glint_scene, Some(table), seed)?;
        let rms = img.relative_rms(&smooth, 0.01);
        out_levels.push(ConvergenceLevel { level, density_scale: scale, rms_vs_smooth: rms });

        let x0 = width * level / levels;
        let x1 = width * (level + 1) / levels;
        for y in 0..height {
            for x in x0..x1 {
                strip.set_pixel(x, y, img.pixel(x, y));
            }
        }
    }

    Ok(ConvergenceReport { levels: out_levels, strip, smooth })
}

pub fn convergence_csv(report: &ConvergenceReport) -> String {
    let mut csv = String::from("level,density_scale,rms_vs_smooth\n");
    for l in &report.levels {
        csv.push_str(&format!("{},{},{}\n", l.level, l.density_scale, l.rms_vs_smooth));
    }
    csv
}

// ---------------------------------------------------------------------------
// subdivision

/// How per-patch probabilities and smooth radiance are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubdivisionProbs {
    /// The shared-LTC-lobe path; invariant under subdivision.
    Ltc,
    /// Monte-Carlo integration of the exact per-patch terms; exposes the
    /// mean-reflectance assumption.
    McIntegrand { spp: u32 },
}

#[derive(Debug)]
pub struct SubdivisionReport {
    pub unsubdivided: Image,
    pub subdivided: Image,
    /// Per-seed mean signed luminance difference (subdivided minus whole).
    pub per_seed_mean_diff: Vec<f64>,
    /// RMS of the seed-averaged per-pixel difference, relative to the mean
    /// lit luminance.
    pub rms_of_mean_diff: f64,
    pub mean_luminance: f64,
}

struct PatchData {
    smooth: Rgb,
    p: f64,
}

struct PixelData {
    px: u32,
    py: u32,
    n_p: u64,
    whole: PatchData,
    patches: Vec<PatchData>,
    footprint: glintlab::glint::FootprintSample,
}

fn subdivide_quad(vertices: &[Vec3; 4], s: u32) -> Vec<[Vec3; 4]> {
    let lerp = |a: Vec3, b: Vec3, t: f64| a + (b - a) * t;
    let corner = |u: f64, v: f64| {
        let bottom = lerp(vertices[0], vertices[1], u);
        let top = lerp(vertices[3], vertices[2], u);
        lerp(bottom, top, v)
    };
    let mut out = Vec::with_capacity((s * s) as usize);
    for j in 0..s {
        for i in 0..s {
            let (u0, u1) = (i as f64 / s as f64, (i + 1) as f64 / s as f64);
            let (v0, v1) = (j as f64 / s as f64, (j + 1) as f64 / s as f64);
            out.push([
                corner(u0, v0),
                corner(u1, v0),
                corner(u1, v1),
                corner(u0, v1),
            ]);
        }
    }
    out
}

const SALT_PATCH_SPLIT: u64 = 0x9A;
const SALT_SUBDIV_MC: u64 = 0x77;

/// Renders the scene's quad light with and without subdivision into
/// sqrt(patches)^2 pieces, sharing the microfacet count between both via a
/// multinomial split, over a list of seeds.
pub fn experiment_subdivision(
    scene: &Scene,
    table: &LtcTable,
    patches: u32,
    seeds: &[u64],
    probs: SubdivisionProbs,
) -> Result<SubdivisionReport, ExperimentError> {
    let s = (patches as f64).sqrt().round() as u32;
    if s * s != patches || patches == 0 {
        return Err(ExperimentError::NonSquareSplit(patches));
    }
    let (vertices, radiance) = scene
        .lights
        .iter()
        .find_map(|l| match l {
            LightSpec::Quad { vertices, radiance } => Some((*vertices, *radiance)),
            _ => None,
        })
        .ok_or(ExperimentError::NoQuadLight)?;

    let sub_quads = subdivide_quad(&vertices, s);
    let model = scene.surface.model;
    let f0 = scene.surface.f0;
    let alpha = model.alpha();
    let dh_exact = total_microfacet_area_exact(&model);

    let width = scene.camera.width();
    let height = scene.camera.height();

    // per-pixel geometry and probabilities are seed-independent; compute once
    let pixel_data: Vec<PixelData> = (0..height)
        .into_par_iter()
        .flat_map_iter(|py| {
            let sub_quads = &sub_quads;
            (0..width).filter_map(move |px| {
                let hit = scene.camera.hit_plane(px, py)?;
                let wo = hit.view;
                let frame = Frame::from_normal_view(UnitVec3::Z, wo);
                let eval = |quad: &[Vec3; 4], salt: u64| -> PatchData {
                    let Ok(poly) = quad_spherical_polygon(quad, hit.point, &frame) else {
                        return PatchData { smooth: Rgb::BLACK, p: 0.0 };
                    };
                    match probs {
                        SubdivisionProbs::Ltc => {
                            let smooth = smooth_radiance_area(
                                table, &f0, radiance, &poly, wo.z, alpha,
                            )
                            .unwrap_or(Rgb::BLACK);
                            let p = probability_area_raw(table, &model, wo.z, &poly, false)
                                .unwrap_or(0.0)
                                .max(0.0);
                            PatchData { smooth, p }
                        }
                        SubdivisionProbs::McIntegrand { spp } => {
                            let local = [
                                frame.to_local(quad[0] - hit.point),
                                frame.to_local(quad[1] - hit.point),
                                frame.to_local(quad[2] - hit.point),
                                frame.to_local(quad[3] - hit.point),
                            ];
                            let wo_local =
                                frame.to_local_unit(wo);
                            let mut rng = HashStream::from_parts(
                                scene.surface.seed,
                                &[px as u64, py as u64, salt, SALT_SUBDIV_MC],
                            );
                            let smooth = mc_radiance_area(
                                &model, &f0, &local, radiance, wo_local, spp as u64, &mut rng,
                            );
                            let est = mc_integrated_ndf(
                                &model, &local, wo_local, spp as u64, &mut rng,
                            );
                            PatchData {
                                smooth: smooth.mean,
                                p: (est.mean / dh_exact).max(0.0),
                            }
                        }
                    }
                };

                let whole = eval(&vertices, u64::MAX);
                let patch_data: Vec<PatchData> = sub_quads
                    .iter()
                    .enumerate()
                    .map(|(idx, q)| eval(q, idx as u64))
                    .collect();
                Some(PixelData {
                    px,
                    py,
                    n_p: footprint_count(&scene.surface, &hit.footprint),
                    whole,
                    patches: patch_data,
                    footprint: hit.footprint,
                })
            })
        })
        .collect();

    let lum = |c: Rgb| c.luminance();
    let mut per_seed_mean_diff = Vec::with_capacity(seeds.len());
    let mut mean_diff = vec![0.0f64; (width * height) as usize];
    let mut first_images: Option<(Image, Image)> = None;

    for (si, &seed) in seeds.iter().enumerate() {
        let mut unsub = Image::new(width, height);
        let mut sub = Image::new(width, height);
        let mut diff_sum = 0.0;

        for data in &pixel_data {
            // the whole-light count, drawn with the patch-sum probability so
            // both evaluations share it
            let parent_p: f64 = data.patches.iter().map(|p| p.p).sum();
            let parent_p_clamped = parent_p.min(1.0);
            let k = count_reflecting_microfacets(
                &data.footprint,
                data.n_p,
                parent_p_clamped,
                0,
                seed,
            );

            let unsub_color = glint_radiance(data.whole.smooth, data.n_p, parent_p_clamped, k);

            let key = CountKey {
                cell_x: data.px as i64,
                cell_y: data.py as i64,
                lod: 0,
                light_id: 0,
            };
            let sub_probs: Vec<f64> = if parent_p > 1.0 {
                // renormalize so the split matches the clamped parent draw
                data.patches.iter().map(|p| p.p * parent_p_clamped / parent_p).collect()
            } else {
                data.patches.iter().map(|p| p.p).collect()
            };
            let shares = split_count_multinomial(
                k,
                parent_p_clamped,
                &sub_probs,
                &key,
                seed ^ SALT_PATCH_SPLIT,
            )?;
            let mut sub_color = Rgb::BLACK;
            for (patch, (share, raw)) in data
                .patches
                .iter()
                .zip(shares.iter().zip(&sub_probs))
            {
                sub_color += glint_radiance(patch.smooth, data.n_p, *raw, *share);
            }

            unsub.set_pixel(data.px, data.py, [
                unsub_color.r as f32,
                unsub_color.g as f32,
                unsub_color.b as f32,
            ]);
            sub.set_pixel(data.px, data.py, [
                sub_color.r as f32,
                sub_color.g as f32,
                sub_color.b as f32,
            ]);
            let d = lum(sub_color) - lum(unsub_color);
            diff_sum += d;
            mean_diff[(data.py * width + data.px) as usize] += d / seeds.len() as f64;
        }

        per_seed_mean_diff.push(diff_sum / pixel_data.len().max(1) as f64);
        if si == 0 {
            first_images = Some((unsub, sub));
        }
    }

    let (unsubdivided, subdivided) = first_images.expect("at least one seed");
    let mean_lum: f64 = pixel_data
        .iter()
        .map(|d| lum(d.whole.smooth))
        .sum::<f64>()
        / pixel_data.len().max(1) as f64;
    let rms_of_mean_diff = (mean_diff.iter().map(|d| d * d).sum::<f64>()
        / (width * height) as f64)
        .sqrt();

    Ok(SubdivisionReport {
        unsubdivided,
        subdivided,
        per_seed_mean_diff,
        rms_of_mean_diff,
        mean_luminance: mean_lum,
    })
}

// ---------------------------------------------------------------------------
// R matching

#[derive(Debug, Clone)]
pub struct MatchRRow {
    pub gamma_degrees: f64,
    pub sqrt_alpha: f64,
    pub r: f64,
}

/// Tabulates the baseline R that matches the cap probability at normal
/// incidence over a grid of opening angles and perceptual roughness values.
pub fn experiment_match_r(
    gammas_degrees: &[f64],
    sqrt_alphas: &[f64],
    kind: glintlab::microfacet::MicrofacetKind,
) -> Vec<MatchRRow> {
    let mut rows = Vec::new();
    for &g in gammas_degrees {
        for &sa in sqrt_alphas {
            let model = MicrofacetModel::from_perceptual_roughness(kind, sa)
                .expect("sqrt_alpha in range");
            let r = match_r(g.to_radians(), &model).unwrap_or(f64::NAN);
            rows.push(MatchRRow { gamma_degrees: g, sqrt_alpha: sa, r });
        }
    }
    rows
}

pub fn match_r_csv(rows: &[MatchRRow]) -> String {
    let mut csv = String::from("gamma_degrees,sqrt_alpha,r\n");
    for row in rows {
        csv.push_str(&format!("{},{},{}\n", row.gamma_degrees, row.sqrt_alpha, row.r));
    }
    csv
}

// ---------------------------------------------------------------------------
// ablation

#[derive(Debug)]
pub struct AblationReport {
    /// Rows: smooth radiance via {MC, LTC}; columns: probability via
    /// {MC, LTC}.
    pub lo_mc_p_mc: Image,
    pub lo_mc_p_ltc: Image,
    pub lo_ltc_p_mc: Image,
    pub lo_ltc_p_ltc: Image,
    /// The all-LTC path with the separately fitted NDF lobe.
    pub lo_ltc_p_ndf_ltc: Image,
    pub grid: Image,
}

const SALT_ABLATION_MC: u64 = 0xAB;

/// Renders every combination of Monte-Carlo and LTC evaluation for the
/// smooth radiance and the reflection probability, with shared count keys so
/// the glint pattern is comparable across variants.
pub fn experiment_ablation(
    scene: &Scene,
    table: &LtcTable,
    spp: u32,
) -> Result<AblationReport, ExperimentError> {
    let (vertices, radiance) = scene
        .lights
        .iter()
        .find_map(|l| match l {
            LightSpec::Quad { vertices, radiance } => Some((*vertices, *radiance)),
            _ => None,
        })
        .ok_or(ExperimentError::NoQuadLight)?;

    let model = scene.surface.model;
    let f0 = scene.surface.f0;
    let alpha = model.alpha();
    let dh_exact = total_microfacet_area_exact(&model);
    let seed = scene.surface.seed;

    let width = scene.camera.width();
    let height = scene.camera.height();
    let mut images: Vec<Image> = (0..5).map(|_| Image::new(width, height)).collect();

    let rows: Vec<(u32, Vec<[Rgb; 5]>)> = (0..height)
        .into_par_iter()
        .map(|py| {
            let mut row = Vec::with_capacity(width as usize);
            for px in 0..width {
                let mut out = [Rgb::BLACK; 5];
                if let Some(hit) = scene.camera.hit_plane(px, py) {
                    let wo = hit.view;
                    let frame = Frame::from_normal_view(UnitVec3::Z, wo);
                    if let Ok(poly) = quad_spherical_polygon(&vertices, hit.point, &frame) {
                        let local = [
                            frame.to_local(vertices[0] - hit.point),
                            frame.to_local(vertices[1] - hit.point),
                            frame.to_local(vertices[2] - hit.point),
                            frame.to_local(vertices[3] - hit.point),
                        ];
                        let wo_local = frame.to_local_unit(wo);
                        let mut rng = HashStream::from_parts(
                            seed,
                            &[px as u64, py as u64, SALT_ABLATION_MC],
                        );
                        let smooth_mc = mc_radiance_area(
                            &model, &f0, &local, radiance, wo_local, spp as u64, &mut rng,
                        )
                        .mean;
                        let p_mc = (mc_integrated_ndf(
                            &model, &local, wo_local, spp as u64, &mut rng,
                        )
                        .mean
                            / dh_exact)
                            .clamp(0.0, 1.0);
                        let smooth_ltc = smooth_radiance_area(
                            table, &f0, radiance, &poly, wo.z, alpha,
                        )
                        .unwrap_or(Rgb::BLACK);
                        let p_ltc = probability_area_raw(table, &model, wo.z, &poly, false)
                            .unwrap_or(0.0)
                            .clamp(0.0, 1.0);
                        let p_ndf = probability_area_raw(table, &model, wo.z, &poly, true)
                            .unwrap_or(0.0)
                            .clamp(0.0, 1.0);

                        let n_p = footprint_count(&scene.surface, &hit.footprint);
                        let count =
                            |p: f64| count_reflecting_microfacets(&hit.footprint, n_p, p, 0, seed);
                        out = [
                            glint_radiance(smooth_mc, n_p, p_mc, count(p_mc)),
                            glint_radiance(smooth_mc, n_p, p_ltc, count(p_ltc)),
                            glint_radiance(smooth_ltc, n_p, p_mc, count(p_mc)),
                            glint_radiance(smooth_ltc, n_p, p_ltc, count(p_ltc)),
                            glint_radiance(smooth_ltc, n_p, p_ndf, count(p_ndf)),
                        ];
                    }
                }
                row.push(out);
            }
            (py, row)
        })
        .collect();

    for (py, row) in rows {
        for (px, colors) in row.into_iter().enumerate() {
            for (img, c) in images.iter_mut().zip(colors) {
                img.set_pixel(px as u32, py, [c.r as f32, c.g as f32, c.b as f32]);
            }
        }
    }

    // 2x2 montage: rows = L_o via {MC, LTC}, columns = p via {MC, LTC}
    let mut grid = Image::new(width * 2, height * 2);
    let order = [(0usize, 0u32, 0u32), (1, 1, 0), (2, 0, 1), (3, 1, 1)];
    for (idx, gx, gy) in order {
        for y in 0..height {
            for x in 0..width {
                grid.set_pixel(gx * width + x, gy * height + y, images[idx].pixel(x, y));
            }
        }
    }

    let mut it = images.into_iter();
    Ok(AblationReport {
        lo_mc_p_mc: it.next().unwrap(),
        lo_mc_p_ltc: it.next().unwrap(),
        lo_ltc_p_mc: it.next().unwrap(),
        lo_ltc_p_ltc: it.next().unwrap(),
        lo_ltc_p_ndf_ltc: it.next().unwrap(),
        grid,
    })
}
