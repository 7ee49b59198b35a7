//! Ground-truth oracles: Monte-Carlo integration of the smooth radiance and
//! the integrated NDF over quad lights, explicit discrete-microfacet
//! counting, and the expected-discrete-NDF estimator.
//!
//! Every oracle reports a standard error so downstream checks are z-tests
//! rather than fixed epsilons on noisy values. Chunked accumulation with
//! pairwise reduction keeps reported means independent of the thread count.

use crate::geom::{reflect, SphericalCap, SphericalPolygon, UnitVec3};
use crate::math::{Rgb, Vec3};
use crate::microfacet::{
    brdf_eval, ndf_eval, sample_ndf, total_microfacet_area_exact, FresnelF0, MicrofacetModel,
};
use crate::rng::HashStream;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

/// A Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub sample_count: u64,
}

/// Per-channel Monte-Carlo estimate.
#[derive(Debug, Clone, Copy)]
pub struct McEstimateRgb {
    pub mean: Rgb,
    pub std_error: Rgb,
    pub sample_count: u64,
}

/// Sums values pairwise (tournament order) for reproducible reductions.
fn pairwise_sum(values: &mut Vec<f64>) -> f64 {
    while values.len() > 1 {
        let mut next = Vec::with_capacity(values.len().div_ceil(2));
        for pair in values.chunks(2) {
            next.push(pair.iter().sum());
        }
        *values = next;
    }
    values.first().copied().unwrap_or(0.0)
}

const CHUNK: u64 = 4096;

/// Chunked mean/variance accumulation of a scalar sampling function, using
/// substream seeds drawn from the caller's rng.
fn mc_scalar(
    n_samples: u64,
    rng: &mut impl Rng,
    sampler: impl Fn(&mut HashStream) -> f64 + Sync,
) -> McEstimate {
    if n_samples == 0 {
        return McEstimate { mean: 0.0, std_error: 0.0, sample_count: 0 };
    }
    let chunks = n_samples.div_ceil(CHUNK);
    let seeds: Vec<u64> = (0..chunks).map(|_| rng.gen()).collect();

    let partials: Vec<(f64, f64)> = seeds
        .par_iter()
        .enumerate()
        .map(|(c, &seed)| {
            let mut stream = HashStream::seed_from_u64(seed);
            let count = CHUNK.min(n_samples - c as u64 * CHUNK);
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for _ in 0..count {
                let v = sampler(&mut stream);
                sum += v;
                sumsq += v * v;
            }
            (sum, sumsq)
        })
        .collect();

    let mut sums: Vec<f64> = partials.iter().map(|p| p.0).collect();
    let mut sumsqs: Vec<f64> = partials.iter().map(|p| p.1).collect();
    let total = pairwise_sum(&mut sums);
    let total_sq = pairwise_sum(&mut sumsqs);

    let n = n_samples as f64;
    let mean = total / n;
    let var = ((total_sq / n - mean * mean) / (n - 1.0).max(1.0)).max(0.0);
    McEstimate { mean, std_error: var.sqrt(), sample_count: n_samples }
}

/// Area-uniform sample of a planar convex quad via its two triangles.
/// Returns (point, area-weighted pdf reciprocal is handled by the caller via
/// `quad_area`).
fn sample_quad(vertices: &[Vec3; 4], u1: f64, u2: f64, u3: f64) -> Vec3 {
    let a0 = 0.5 * (vertices[1] - vertices[0]).cross(vertices[2] - vertices[0]).length();
    let a1 = 0.5 * (vertices[2] - vertices[0]).cross(vertices[3] - vertices[0]).length();
    let (v0, v1, v2) = if u1 * (a0 + a1) < a0 {
        (vertices[0], vertices[1], vertices[2])
    } else {
        (vertices[0], vertices[2], vertices[3])
    };
    // uniform point in a triangle
    let su = u2.sqrt();
    let b0 = 1.0 - su;
    let b1 = u3 * su;
    v0 * b0 + v1 * b1 + v2 * (1.0 - b0 - b1)
}

fn quad_area(vertices: &[Vec3; 4]) -> f64 {
    0.5 * (vertices[1] - vertices[0]).cross(vertices[2] - vertices[0]).length()
        + 0.5 * (vertices[2] - vertices[0]).cross(vertices[3] - vertices[0]).length()
}

fn quad_normal(vertices: &[Vec3; 4]) -> Option<Vec3> {
    (vertices[1] - vertices[0])
        .cross(vertices[2] - vertices[0])
        .normalized()
}

/// Unbiased estimate of L * integral of f_r (n.wi) over the solid angle of a
/// quad light, by area-uniform light sampling with the geometry-to-solid-
/// angle factor cos(theta_light) / distance^2.
///
/// Quad vertices are relative to the shading point, in the shading frame
/// (n = +z).
pub fn mc_radiance_area(
    model: &MicrofacetModel,
    f0: &FresnelF0,
    quad: &[Vec3; 4],
    radiance: Rgb,
    wo: UnitVec3,
    n_samples: u64,
    rng: &mut impl Rng,
) -> McEstimateRgb {
    let area = quad_area(quad);
    let Some(light_n) = quad_normal(quad) else {
        return McEstimateRgb {
            mean: Rgb::BLACK,
            std_error: Rgb::BLACK,
            sample_count: n_samples,
        };
    };
    if area < 1e-14 {
        return McEstimateRgb {
            mean: Rgb::BLACK,
            std_error: Rgb::BLACK,
            sample_count: n_samples,
        };
    }

    // one scalar pass per channel keeps the accumulator simple; the green
    // channel drives luminance checks, all three share the sample index
    let channel = |pick: fn(Rgb) -> f64, rng: &mut HashStream| -> f64 {
        let x = sample_quad(quad, rng.next_unit(), rng.next_unit(), rng.next_unit());
        let d2 = x.length_squared();
        if d2 < 1e-16 {
            return 0.0;
        }
        let dist = d2.sqrt();
        let wi_v = x / dist;
        if wi_v.z <= 0.0 {
            return 0.0;
        }
        let wi = UnitVec3::new_unchecked(wi_v);
        let cos_light = light_n.dot(wi_v).abs();
        let f = brdf_eval(model, f0, wi, wo, UnitVec3::Z);
        let jac = area * cos_light / d2;
        pick(radiance * f * (wi_v.z * jac))
    };

    let mut rgb_rng = HashStream::seed_from_u64(rng.gen());
    let r = mc_scalar(n_samples, &mut rgb_rng, |s| channel(|c| c.r, s));
    let mut rgb_rng_g = HashStream::seed_from_u64(rng.gen());
    let g = mc_scalar(n_samples, &mut rgb_rng_g, |s| channel(|c| c.g, s));
    let mut rgb_rng_b = HashStream::seed_from_u64(rng.gen());
    let b = mc_scalar(n_samples, &mut rgb_rng_b, |s| channel(|c| c.b, s));

    McEstimateRgb {
        mean: Rgb::new(r.mean, g.mean, b.mean),
        std_error: Rgb::new(r.std_error, g.std_error, b.std_error),
        sample_count: n_samples,
    }
}

/// Unbiased estimate of the integrated NDF over the quad's solid angle:
/// integral of D(h) / (4 (h.wi)), the change of variables from halfway
/// vectors to light directions.
pub fn mc_integrated_ndf(
    model: &MicrofacetModel,
    quad: &[Vec3; 4],
    wo: UnitVec3,
    n_samples: u64,
    rng: &mut impl Rng,
) -> McEstimate {
    let area = quad_area(quad);
    let Some(light_n) = quad_normal(quad) else {
        return McEstimate { mean: 0.0, std_error: 0.0, sample_count: n_samples };
    };
    if area < 1e-14 {
        return McEstimate { mean: 0.0, std_error: 0.0, sample_count: n_samples };
    }

    mc_scalar(n_samples, rng, |stream| {
        let x = sample_quad(quad, stream.next_unit(), stream.next_unit(), stream.next_unit());
        let d2 = x.length_squared();
        if d2 < 1e-16 {
            return 0.0;
        }
        let dist = d2.sqrt();
        let wi_v = x / dist;
        if wi_v.z <= 0.0 {
            return 0.0;
        }
        let Some(h) = (wi_v + wo.as_vec()).normalized() else {
            return 0.0;
        };
        let cos_hi = h.dot(wi_v);
        if cos_hi <= 1e-12 {
            return 0.0;
        }
        let cos_light = light_n.dot(wi_v).abs();
        ndf_eval(model, h.z) / (4.0 * cos_hi) * (area * cos_light / d2)
    })
}

/// Brute-force discrete simulation: draws `n` microfacet orientations from
/// the NDF and counts those whose mirror direction of the view lands inside
/// the polygon and above the horizon.
pub fn discrete_oracle_count(
    model: &MicrofacetModel,
    n: u64,
    poly: &SphericalPolygon,
    wo: UnitVec3,
    rng: &mut impl Rng,
) -> u64 {
    let mut count = 0;
    for _ in 0..n {
        let m = sample_ndf(model, rng);
        let wi = reflect(wo, m);
        if wi.z >= 0.0 && poly.contains(wi) {
            count += 1;
        }
    }
    count
}

/// Expectation of the discrete NDF integrated over a cap: averages
/// (D_H / n) * (samples inside the cap) over trials; converges to the
/// continuous integral of D over the cap.
pub fn expected_discrete_ndf_cap(
    model: &MicrofacetModel,
    n: u64,
    cap: &SphericalCap,
    trials: u64,
    rng: &mut impl Rng,
) -> McEstimate {
    let dh = total_microfacet_area_exact(model);
    let model = *model;
    let cap = *cap;
    mc_scalar(trials, rng, move |stream| {
        let mut inside = 0u64;
        for _ in 0..n {
            let m = sample_ndf(&model, stream);
            if cap.contains(m) {
                inside += 1;
            }
        }
        dh * inside as f64 / n.max(1) as f64
    })
}
