//! Continuous microfacet model: GGX and Beckmann normal distributions,
//! height-correlated Smith shadowing-masking, Schlick Fresnel, the smooth
//! specular BRDF, the total microfacet area over the hemisphere, and the
//! directional-albedo / potentially-reflecting-area quadratures backing the
//! baked lookup table.

use crate::geom::{halfway, UnitVec3};
use crate::math::{Rgb, Vec3};
use crate::quadrature::{adaptive_breaks, trapezoid_periodic};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MicrofacetError {
    #[error("roughness alpha must lie in (0, 1], got {0}")]
    AlphaRange(f64),
    #[error("Fresnel F0 components must lie in [0, 1]")]
    F0Range,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MicrofacetKind {
    Ggx,
    Beckmann,
}

/// An isotropic microfacet distribution with roughness `alpha` in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicrofacetModel {
    pub kind: MicrofacetKind,
    alpha: f64,
}

impl MicrofacetModel {
    pub fn new(kind: MicrofacetKind, alpha: f64) -> Result<Self, MicrofacetError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(MicrofacetError::AlphaRange(alpha));
        }
        Ok(MicrofacetModel { kind, alpha })
    }

    /// Perceptually linear roughness input: alpha = roughness^2.
    pub fn from_perceptual_roughness(
        kind: MicrofacetKind,
        roughness: f64,
    ) -> Result<Self, MicrofacetError> {
        MicrofacetModel::new(kind, roughness * roughness)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Fresnel reflectance at normal incidence, per channel in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FresnelF0 {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl FresnelF0 {
    pub fn new(r: f64, g: f64, b: f64) -> Result<Self, MicrofacetError> {
        for v in [r, g, b] {
            if !(0.0..=1.0).contains(&v) {
                return Err(MicrofacetError::F0Range);
            }
        }
        Ok(FresnelF0 { r, g, b })
    }

    pub fn splat(v: f64) -> Result<Self, MicrofacetError> {
        FresnelF0::new(v, v, v)
    }

    pub fn as_rgb(&self) -> Rgb {
        Rgb::new(self.r, self.g, self.b)
    }
}

/// Normal distribution function D(h) as a density per steradian of the
/// microfacet orientation; zero below the horizon.
pub fn ndf_eval(model: &MicrofacetModel, cos_nh: f64) -> f64 {
    if cos_nh <= 0.0 {
        return 0.0;
    }
    let c = cos_nh.min(1.0);
    let a2 = model.alpha * model.alpha;
    match model.kind {
        MicrofacetKind::Ggx => {
            let d = c * c * (a2 - 1.0) + 1.0;
            a2 / (std::f64::consts::PI * d * d)
        }
        MicrofacetKind::Beckmann => {
            let c2 = c * c;
            let e = ((c2 - 1.0) / (a2 * c2)).exp();
            e / (std::f64::consts::PI * a2 * c2 * c2)
        }
    }
}

fn smith_lambda(model: &MicrofacetModel, cos_theta: f64) -> f64 {
    let c = cos_theta.clamp(1e-12, 1.0);
    let tan2 = (1.0 - c * c).max(0.0) / (c * c);
    if tan2 == 0.0 {
        return 0.0;
    }
    let alpha = model.alpha;
    match model.kind {
        MicrofacetKind::Ggx => 0.5 * ((1.0 + alpha * alpha * tan2).sqrt() - 1.0),
        MicrofacetKind::Beckmann => {
            // exact form; a = 1/(alpha tan theta)
            let a = 1.0 / (alpha * tan2.sqrt());
            0.5 * (statrs::function::erf::erf(a) - 1.0)
                + (-a * a).exp() / (2.0 * a * std::f64::consts::PI.sqrt())
        }
    }
}

/// Height-correlated Smith shadowing-masking for the chosen distribution.
pub fn smith_g(model: &MicrofacetModel, cos_nv: f64, cos_nl: f64) -> f64 {
    if cos_nv <= 0.0 || cos_nl <= 0.0 {
        return 0.0;
    }
    1.0 / (1.0 + smith_lambda(model, cos_nv) + smith_lambda(model, cos_nl))
}

/// Schlick Fresnel: f0 + (1 - f0)(1 - cos)^5, componentwise.
pub fn fresnel_schlick(f0: &FresnelF0, cos_theta: f64) -> Rgb {
    let c = cos_theta.clamp(0.0, 1.0);
    let w = (1.0 - c).powi(5);
    f0.as_rgb() + (Rgb::WHITE - f0.as_rgb()) * w
}

/// Smooth microfacet BRDF: F G D / (4 (n.wo)(n.wi)). Zero below horizon.
pub fn brdf_eval(
    model: &MicrofacetModel,
    f0: &FresnelF0,
    wi: UnitVec3,
    wo: UnitVec3,
    n: UnitVec3,
) -> Rgb {
    let cos_nl = n.dot(wi.as_vec());
    let cos_nv = n.dot(wo.as_vec());
    if cos_nl <= 0.0 || cos_nv <= 0.0 {
        return Rgb::BLACK;
    }
    let Ok(h) = halfway(wi, wo) else {
        return Rgb::BLACK;
    };
    let d = ndf_eval(model, n.dot(h.as_vec()));
    let g = smith_g(model, cos_nv, cos_nl);
    // symmetric in the argument swap down to the last bit
    let cos_hv = 0.5 * (h.dot(wi.as_vec()) + h.dot(wo.as_vec()));
    let f = fresnel_schlick(f0, cos_hv);
    f * (d * g / (4.0 * cos_nv * cos_nl))
}

/// Scaled complementary error function exp(x^2) erfc(x) without overflow.
fn erfcx(x: f64) -> f64 {
    if x < 6.0 {
        (x * x).exp() * statrs::function::erf::erfc(x)
    } else {
        // asymptotic series, truncated where terms are ~1e-9 at x = 6
        let inv2x2 = 1.0 / (2.0 * x * x);
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..=8u32 {
            term *= -((2 * k - 1) as f64) * inv2x2;
            sum += term;
        }
        sum / (x * std::f64::consts::PI.sqrt())
    }
}

/// Total microfacet area D_H: the NDF integrated over the hemisphere.
///
/// GGX uses the closed form 1 + a^2 atanh(sqrt(1-a^2)) / sqrt(1-a^2) with a
/// series fallback near a = 1. Beckmann uses the quadratic fit of the erfc
/// expression in the squared roughness, 1 + 0.466 a^2 - 0.091 a^4.
pub fn total_microfacet_area(model: &MicrofacetModel) -> f64 {
    let a = model.alpha;
    match model.kind {
        MicrofacetKind::Ggx => ggx_total_area(a),
        MicrofacetKind::Beckmann => {
            let b = a * a;
            1.0 + 0.466 * b - 0.091 * b * b
        }
    }
}

/// D_H without fitted approximations: same closed form for GGX, the exact
/// erfc expression for Beckmann. This is the oracle-side normalizer.
pub fn total_microfacet_area_exact(model: &MicrofacetModel) -> f64 {
    let a = model.alpha;
    match model.kind {
        MicrofacetKind::Ggx => ggx_total_area(a),
        MicrofacetKind::Beckmann => {
            1.0 + 0.5 * std::f64::consts::PI.sqrt() * a * erfcx(1.0 / a)
        }
    }
}

fn ggx_total_area(alpha: f64) -> f64 {
    let e2 = (1.0 - alpha * alpha).max(0.0);
    let e = e2.sqrt();
    if e < 1e-4 {
        // 1 + (1 - e^2) atanh(e)/e expanded around e = 0
        return 1.0 + (1.0 - e2) * (1.0 + e2 / 3.0 + e2 * e2 / 5.0);
    }
    1.0 + alpha * alpha * e.atanh() / e
}

fn clamp_mu(cos_nv: f64) -> f64 {
    cos_nv.clamp(1e-9, 1.0)
}

/// Azimuthal half-width of the half-vector region whose mirror direction of
/// the view lies above the horizon, at elevation `cos_th`. Returns 0 when the
/// ring is fully outside, pi when fully inside.
fn reflected_arc_half_width(cos_th: f64, sin_th: f64, mu: f64, sin_v: f64) -> f64 {
    // condition: 2 (wo . h) cos_th >= mu with wo . h = A cos(phi) + B
    if cos_th <= 1e-12 {
        return 0.0;
    }
    let a = sin_v * sin_th;
    let b = mu * cos_th;
    let rhs = mu / (2.0 * cos_th) - b;
    if a <= 1e-15 {
        return if rhs <= 0.0 { std::f64::consts::PI } else { 0.0 };
    }
    let t = rhs / a;
    if t <= -1.0 {
        std::f64::consts::PI
    } else if t >= 1.0 {
        0.0
    } else {
        t.acos()
    }
}

fn elevation_breaks(alpha: f64) -> Vec<f64> {
    let cap = std::f64::consts::FRAC_PI_2 * 0.999;
    vec![(2.0 * alpha).min(cap), (8.0 * alpha).min(cap), (32.0 * alpha).min(cap)]
}

/// Elevations where the reflected-above-horizon ring switches between
/// full / partial / empty; the ring integrand has steps or kinks there, so
/// they seed quadrature segment boundaries.
fn region_transition_breaks(mu: f64, sin_v: f64) -> Vec<f64> {
    // full ring while rhs <= -A, empty once rhs >= A, with
    // rhs = mu/(2 cos) - mu cos and A = sin_v sin
    let root = |f: &dyn Fn(f64) -> f64| -> Option<f64> {
        let (mut lo, mut hi) = (1e-9, std::f64::consts::FRAC_PI_2 - 1e-9);
        let (flo, fhi) = (f(lo), f(hi));
        if flo.signum() == fhi.signum() {
            return None;
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if f(mid).signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    };
    let rhs = move |th: f64| mu / (2.0 * th.cos()) - mu * th.cos();
    let mut out = Vec::new();
    if let Some(t) = root(&|th| rhs(th) + sin_v * th.sin()) {
        out.push(t);
    }
    if let Some(t) = root(&|th| rhs(th) - sin_v * th.sin()) {
        out.push(t);
    }
    out
}

/// Directional albedo FGD of the BRDF with F = 1: the hemispherical integral
/// of f_r (n.wi) for the given view cosine.
///
/// Integrated in the half-vector domain, where the substitution
/// d(wi) = 4 (h.wo) d(h) turns the integrand into G D (h.wo) / (n.wo) over
/// the region of orientations reflecting above the horizon.
pub fn fgd(model: &MicrofacetModel, cos_nv: f64) -> f64 {
    let mu = clamp_mu(cos_nv);
    let sin_v = (1.0 - mu * mu).max(0.0).sqrt();
    let wo = Vec3::new(sin_v, 0.0, mu);

    let ring = |theta: f64| {
        let (sin_th, cos_th) = theta.sin_cos();
        let half = reflected_arc_half_width(cos_th, sin_th, mu, sin_v);
        if half <= 0.0 {
            return 0.0;
        }
        let d = ndf_eval(model, cos_th);
        if d == 0.0 {
            return 0.0;
        }
        let f = |phi: f64| {
            let h = Vec3::new(sin_th * phi.cos(), sin_th * phi.sin(), cos_th);
            let cos_hv = h.dot(wo);
            if cos_hv <= 0.0 {
                return 0.0;
            }
            let wi = 2.0 * cos_hv * h - wo;
            if wi.z <= 0.0 {
                return 0.0;
            }
            smith_g(model, mu, wi.z) * cos_hv
        };
        // full rings are periodic-smooth; partial arcs are analytic on the
        // closed interval, where Gauss-Legendre converges much faster
        let arc = if half >= std::f64::consts::PI {
            trapezoid_periodic(&f, -half, half, crate::quadrature::AZIMUTH_SAMPLES)
        } else {
            crate::quadrature::gauss_legendre_64(&f, -half, half)
        };
        sin_th * d * arc / mu
    };

    let mut breaks = elevation_breaks(model.alpha);
    breaks.extend(region_transition_breaks(mu, sin_v));
    adaptive_breaks(ring, 0.0, std::f64::consts::FRAC_PI_2, &breaks, 1e-9, 1e-13).value
}

/// Potentially reflecting microfacet area D_PR: the NDF weighted by the
/// change of variables over incoming directions, integrated over the
/// hemisphere of wi. In the half-vector domain the weight cancels, leaving
/// D(h) over the reflected-above-horizon region.
pub fn d_pr(model: &MicrofacetModel, cos_nv: f64) -> f64 {
    let mu = clamp_mu(cos_nv);
    let sin_v = (1.0 - mu * mu).max(0.0).sqrt();

    let ring = |theta: f64| {
        let (sin_th, cos_th) = theta.sin_cos();
        let half = reflected_arc_half_width(cos_th, sin_th, mu, sin_v);
        if half <= 0.0 {
            return 0.0;
        }
        sin_th * ndf_eval(model, cos_th) * 2.0 * half
    };

    let mut breaks = elevation_breaks(model.alpha);
    breaks.extend(region_transition_breaks(mu, sin_v));
    adaptive_breaks(ring, 0.0, std::f64::consts::FRAC_PI_2, &breaks, 1e-9, 1e-13).value
}


/// Draws a microfacet orientation with density D(h)/D_H over solid angle
/// (no cosine weighting). Oracle-side sampler: exact inverse-CDF in
/// elevation for GGX, exact rejection sampling for Beckmann.
pub fn sample_ndf<R: Rng + ?Sized>(model: &MicrofacetModel, rng: &mut R) -> UnitVec3 {
    let phi = std::f64::consts::TAU * rng.gen::<f64>();
    let cos_theta = match model.kind {
        MicrofacetKind::Ggx => ggx_sample_cos_theta(model.alpha, rng.gen::<f64>()),
        MicrofacetKind::Beckmann => beckmann_sample_cos_theta(model.alpha, rng),
    };
    UnitVec3::from_spherical(cos_theta, phi)
}

// Antiderivative of 1/(1 - a t^2)^2 up to constants:
// t / (2 (1 - a t^2)) + atanh(sqrt(a) t) / (2 sqrt(a)).
fn ggx_elevation_antiderivative(a: f64, t: f64) -> f64 {
    if a < 1e-12 {
        // series: t/2 + (t + a t^3 / 3 + a^2 t^5 / 5) / 2
        return 0.5 * t / (1.0 - a * t * t)
            + 0.5 * (t + a * t * t * t / 3.0 + a * a * t.powi(5) / 5.0);
    }
    let ra = a.sqrt();
    0.5 * t / (1.0 - a * t * t) + (ra * t).atanh() / (2.0 * ra)
}

fn ggx_sample_cos_theta(alpha: f64, u: f64) -> f64 {
    let a = 1.0 - alpha * alpha;
    let dh = ggx_total_area(alpha);
    if a < 1e-12 {
        return 1.0 - u;
    }
    // solve G(t) = G(1) - u D_H / (2 alpha^2) for t = cos(theta);
    // G' = 1/(1 - a t^2)^2 so Newton steps are cheap, with a bisection
    // bracket for robustness
    let g1 = ggx_elevation_antiderivative(a, 1.0);
    let target = g1 - u * dh / (2.0 * alpha * alpha);
    // init from the cosine-weighted GGX inversion, a good approximation
    let mut t = ((1.0 - u) / (1.0 + u * (alpha * alpha - 1.0))).max(0.0).sqrt();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..40 {
        let g = ggx_elevation_antiderivative(a, t);
        let denom = 1.0 - a * t * t;
        let step = (g - target) * denom * denom;
        // convergence must be decided before touching the bracket: a step
        // below one ulp would otherwise bounce t to the bracket midpoint
        if step.abs() < 1e-14 || t - step == t {
            break;
        }
        if g < target {
            lo = t;
        } else {
            hi = t;
        }
        let next = t - step;
        t = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
    }
    t
}

fn beckmann_sample_cos_theta<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    // v = tan^2(theta) has density proportional to sqrt(1+v) exp(-v/a^2).
    // Envelope (1 + sqrt(v)) exp(-v/a^2) splits into an exponential and a
    // Gamma(3/2) component; acceptance ratio sqrt(1+v)/(1+sqrt(v)) >= 0.70.
    let a2 = alpha * alpha;
    let w_exp = a2;
    let w_gamma = 0.5 * std::f64::consts::PI.sqrt() * a2 * alpha;
    let p_exp = w_exp / (w_exp + w_gamma);
    loop {
        let v = if rng.gen::<f64>() < p_exp {
            -a2 * (1.0 - rng.gen::<f64>()).ln()
        } else {
            let e: f64 = -(1.0 - rng.gen::<f64>()).ln();
            // Box-Muller normal for the Gamma(1/2) part
            let r = (-2.0 * (1.0 - rng.gen::<f64>()).ln()).sqrt();
            let z = r * (std::f64::consts::TAU * rng.gen::<f64>()).cos();
            a2 * (e + 0.5 * z * z)
        };
        let accept = (1.0 + v).sqrt() / (1.0 + v.sqrt());
        if rng.gen::<f64>() < accept {
            return 1.0 / (1.0 + v).sqrt();
        }
    }
}

/// Elevation CDF of the `sample_ndf` density: P(theta_h <= theta).
/// Analytic for GGX, quadrature for Beckmann.
pub fn ndf_elevation_cdf(model: &MicrofacetModel, theta: f64) -> f64 {
    let t = theta.cos().clamp(0.0, 1.0);
    match model.kind {
        MicrofacetKind::Ggx => {
            let a = 1.0 - model.alpha * model.alpha;
            if a < 1e-12 {
                return 1.0 - t;
            }
            let dh = ggx_total_area(model.alpha);
            let scale = 2.0 * model.alpha * model.alpha / dh;
            scale * (ggx_elevation_antiderivative(a, 1.0) - ggx_elevation_antiderivative(a, t))
        }
        MicrofacetKind::Beckmann => {
            let dh = total_microfacet_area_exact(model);
            let num = adaptive_breaks(
                |th| std::f64::consts::TAU * th.sin() * ndf_eval(model, th.cos()),
                0.0,
                theta.min(std::f64::consts::FRAC_PI_2),
                &elevation_breaks(model.alpha),
                1e-10,
                1e-14,
            );
            (num.value / dh).clamp(0.0, 1.0)
        }
    }
}
