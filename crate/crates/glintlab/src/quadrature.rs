//! Adaptive Gauss-Kronrod quadrature plus azimuthal trapezoid rules.
//!
//! The 7-15 point rule pair gives an error estimate per segment; segments
//! split greedily on the largest estimated error until the requested
//! tolerance is met. Segment processing order is deterministic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

// QUADPACK 7-15 Gauss-Kronrod pair, positive abscissae.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_7,
    0.949_107_912_342_758_524_526_189_7,
    0.864_864_423_359_769_072_789_712_8,
    0.741_531_185_599_394_439_863_864_8,
    0.586_087_235_467_691_130_294_144_8,
    0.405_845_151_377_397_166_906_606_4,
    0.207_784_955_007_898_467_600_689_4,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_0,
    0.063_092_092_629_978_553_290_700_7,
    0.104_790_010_322_250_183_839_876_3,
    0.140_653_259_715_525_918_745_189_6,
    0.169_004_726_639_267_902_826_583_4,
    0.190_350_578_064_785_409_913_256_4,
    0.204_432_940_075_298_892_414_162_0,
    0.209_482_141_084_727_828_012_999_2,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_4,
    0.279_705_391_489_276_667_901_467_8,
    0.381_830_050_505_118_944_950_369_8,
    0.417_959_183_673_469_387_755_102_0,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
}

/// One Gauss-Kronrod 7-15 evaluation over [a, b]: (estimate, error estimate).
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = half * XGK[i];
        let fsum = f(center - dx) + f(center + dx);
        kronrod += WGK[i] * fsum;
        if i % 2 == 1 {
            gauss += WG[i / 2] * fsum;
        }
    }
    let value = kronrod * half;
    // QUADPACK-style error scaling is overkill here; the plain difference is
    // conservative enough for the smooth integrands we feed it.
    let error = ((kronrod - gauss) * half).abs();
    (value, error)
}

struct Segment {
    value: f64,
    error: f64,
    a: f64,
    b: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error && self.a == other.a
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap by error; tie-break on the left endpoint for determinism
        self.error
            .total_cmp(&other.error)
            .then_with(|| self.a.total_cmp(&other.a))
    }
}

/// Adaptive integration of `f` over [a, b] with optional interior breakpoints
/// seeding the initial segments (useful when a needle-like feature has a
/// known location).
pub fn adaptive_breaks(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    breaks: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> QuadResult {
    const MAX_SEGMENTS: usize = 4000;

    let mut edges: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
    edges.push(a);
    for &x in breaks {
        if x > a && x < b {
            edges.push(x);
        }
    }
    edges.push(b);
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in edges.windows(2) {
        let (v, e) = gk15(&f, w[0], w[1]);
        total += v;
        total_err += e;
        heap.push(Segment { value: v, error: e, a: w[0], b: w[1] });
    }

    let mut count = heap.len();
    while count < MAX_SEGMENTS {
        if total_err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine precision
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment { value: v1, error: e1, a: worst.a, b: mid });
        heap.push(Segment { value: v2, error: e2, a: mid, b: worst.b });
        count += 1;
    }

    // re-sum from segments in positional order for a stable result
    let mut segs: Vec<Segment> = heap.into_vec();
    segs.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = segs.iter().map(|s| s.value).sum();
    let abs_error = segs.iter().map(|s| s.error).sum();
    QuadResult { value, abs_error }
}

pub fn adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> QuadResult {
    adaptive_breaks(f, a, b, &[], rel_tol, abs_tol)
}

/// Equally spaced rule over one full period; spectrally accurate for smooth
/// periodic integrands.
pub fn trapezoid_periodic(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut sum = 0.0;
    for i in 0..n {
        sum += f(a + (i as f64 + 0.5) * h);
    }
    sum * h
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// Legendre recurrence.
fn legendre_rule(n: usize) -> Vec<(f64, f64)> {
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        // Tricomi initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        rule.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    rule
}

/// Fixed 64-point Gauss-Legendre rule over [a, b]; exponentially accurate
/// for integrands analytic on the closed interval.
pub fn gauss_legendre_64(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    use std::sync::OnceLock;
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    let rule = RULE.get_or_init(|| legendre_rule(64));
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut sum = 0.0;
    for &(x, w) in rule {
        sum += w * f(center + half * x);
    }
    sum * half
}

/// Default azimuthal sample count for spherical integrals.
pub const AZIMUTH_SAMPLES: usize = 128;

/// Integral of `f(theta, phi) sin(theta)` over the upper hemisphere:
/// adaptive Gauss-Kronrod in elevation, fixed trapezoid in azimuth.
pub fn hemisphere_integral(
    f: impl Fn(f64, f64) -> f64,
    theta_breaks: &[f64],
    rel_tol: f64,
) -> QuadResult {
    let ring = |theta: f64| {
        let s = theta.sin();
        if s <= 0.0 && theta > 0.0 {
            return 0.0;
        }
        s * trapezoid_periodic(
            |phi| f(theta, phi),
            0.0,
            std::f64::consts::TAU,
            AZIMUTH_SAMPLES,
        )
    };
    adaptive_breaks(ring, 0.0, std::f64::consts::FRAC_PI_2, theta_breaks, rel_tol, 1e-14)
}

/// Same elevation/azimuth scheme over the full sphere.
pub fn sphere_integral(f: impl Fn(f64, f64) -> f64, rel_tol: f64) -> QuadResult {
    let ring = |theta: f64| {
        theta.sin()
            * trapezoid_periodic(
                |phi| f(theta, phi),
                0.0,
                std::f64::consts::TAU,
                AZIMUTH_SAMPLES,
            )
    };
    adaptive_breaks(
        ring,
        0.0,
        std::f64::consts::PI,
        &[std::f64::consts::FRAC_PI_2],
        rel_tol,
        1e-14,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn integrates_polynomial_exactly() {
        let r = adaptive(|x| 3.0 * x * x, 0.0, 2.0, 1e-12, 0.0);
        assert!((r.value - 8.0).abs() < 1e-12);
    }

    #[test]
    fn finds_narrow_peak_with_breakpoint() {
        // gaussian of width 1e-3 centered at 0.3; mass ~ sqrt(2 pi) * 1e-3
        let w = 1e-3;
        let f = |x: f64| (-((x - 0.3) / w).powi(2) / 2.0).exp();
        let r = adaptive_breaks(f, 0.0, 1.0, &[0.3], 1e-10, 0.0);
        let expect = (2.0 * PI).sqrt() * w;
        assert!((r.value - expect).abs() / expect < 1e-9);
    }

    #[test]
    fn hemisphere_solid_angle() {
        let r = hemisphere_integral(|_, _| 1.0, &[], 1e-12);
        assert!((r.value - 2.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn trapezoid_exact_for_periodic() {
        let v = trapezoid_periodic(|x| 1.5 + x.sin().powi(2), 0.0, 2.0 * PI, 64);
        assert!((v - (1.5 * 2.0 * PI + PI)).abs() < 1e-12);
    }
}
