//! Linearly transformed cosines: lobe evaluation, derivative-free fitting to
//! the BRDF or NDF shape, analytic polygon integration with horizon
//! clipping, and the baked (sqrt(alpha), sqrt(n.v)) table that combines the
//! lobe parameters with the FGD and D_PR scalars.

use crate::fit::nelder_mead;
use crate::geom::{halfway, SphericalPolygon, UnitVec3};
use crate::math::{Rgb, Vec3};
use crate::microfacet::{
    brdf_eval, d_pr, fgd, fresnel_schlick, ndf_eval, FresnelF0, MicrofacetKind, MicrofacetModel,
};
use crate::rng::HashStream;
use rayon::prelude::*;
use std::io::{Read, Write};
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LtcError {
    #[error("transform matrix is singular or badly conditioned")]
    SingularMatrix,
    #[error("table resolution must be at least 2, got {0}")]
    ResolutionRange(u32),
    #[error("bad table magic bytes")]
    BadMagic,
    #[error("unsupported table format version {0}")]
    BadVersion(u32),
    #[error("unknown model id {0}")]
    BadModelId(u8),
    #[error("table contains non-finite values")]
    NonFinite,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which distribution shape a lobe is fitted against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LobeTarget {
    Brdf,
    Ndf,
}

/// A clamped cosine warped by the 3x3 matrix [[a,0,b],[0,c,0],[d,0,1]],
/// expressed in the shading frame (n = +z, view in the xz-plane with
/// positive x).
#[derive(Debug, Clone, Copy)]
pub struct LtcLobe {
    params: [f64; 4],
    inv: [[f64; 3]; 3],
    inv_det_abs: f64,
}

impl LtcLobe {
    pub fn identity() -> Self {
        LtcLobe::from_params([1.0, 0.0, 1.0, 0.0]).unwrap()
    }

    /// Builds a lobe from (a, b, c, d); the matrix must be invertible.
    pub fn from_params(p: [f64; 4]) -> Result<Self, LtcError> {
        let [a, b, c, d] = p;
        let det = c * (a - b * d);
        if !det.is_finite() || det.abs() < 1e-12 {
            return Err(LtcError::SingularMatrix);
        }
        // adjugate of the sparse matrix over its determinant
        let inv = [
            [c / det, 0.0, -b * c / det],
            [0.0, (a - b * d) / det, 0.0],
            [-c * d / det, 0.0, a * c / det],
        ];
        let inv_det_abs = (1.0 / det).abs();
        Ok(LtcLobe { params: p, inv, inv_det_abs })
    }

    pub fn params(&self) -> [f64; 4] {
        self.params
    }

    fn apply_inv(&self, v: Vec3) -> Vec3 {
        Vec3::new(
            self.inv[0][0] * v.x + self.inv[0][1] * v.y + self.inv[0][2] * v.z,
            self.inv[1][0] * v.x + self.inv[1][1] * v.y + self.inv[1][2] * v.z,
            self.inv[2][0] * v.x + self.inv[2][1] * v.y + self.inv[2][2] * v.z,
        )
    }

    /// Density per steradian at `w`; integrates to 1 over the sphere.
    pub fn eval(&self, w: UnitVec3) -> f64 {
        let lo = self.apply_inv(w.as_vec());
        let l2 = lo.length_squared();
        if l2 <= 0.0 {
            return 0.0;
        }
        // (1/pi) max(z', 0) |det M^-1| / |M^-1 w|^3 with z' = lo.z / |lo|
        lo.z.max(0.0) * self.inv_det_abs / (std::f64::consts::PI * l2 * l2)
    }
}

const FIT_GRID_SEED: u64 = 0x174C_F001;
const FIT_GRID_DIM: usize = 32;

/// Stratified direction set shared by every fit: 32x32 equal-area strata
/// over the full sphere with hash-seeded jitter.
fn fit_directions() -> &'static [Vec3] {
    static DIRS: OnceLock<Vec<Vec3>> = OnceLock::new();
    DIRS.get_or_init(|| {
        let mut dirs = Vec::with_capacity(FIT_GRID_DIM * FIT_GRID_DIM);
        for i in 0..FIT_GRID_DIM {
            for j in 0..FIT_GRID_DIM {
                let mut s = HashStream::from_parts(FIT_GRID_SEED, &[i as u64, j as u64]);
                let z = -1.0 + 2.0 * ((i as f64 + s.next_unit()) / FIT_GRID_DIM as f64);
                let phi =
                    std::f64::consts::TAU * ((j as f64 + s.next_unit()) / FIT_GRID_DIM as f64);
                let st = (1.0 - z * z).max(0.0).sqrt();
                dirs.push(Vec3::new(st * phi.cos(), st * phi.sin(), z));
            }
        }
        dirs
    })
}

#[derive(Debug, Clone, Copy)]
pub struct FitReport {
    pub residual: f64,
    pub initial_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn view_vector(cos_nv: f64) -> Vec3 {
    let mu = cos_nv.clamp(1e-6, 1.0);
    Vec3::new((1.0 - mu * mu).max(0.0).sqrt(), 0.0, mu)
}

/// Normalized target density over incoming directions: BRDF cosine / FGD
/// with F = 1, or the NDF transformed to light directions over D_PR.
fn target_density(
    model: &MicrofacetModel,
    target: LobeTarget,
    wo: Vec3,
    wi: Vec3,
    norm: f64,
) -> f64 {
    if wi.z <= 0.0 || norm <= 0.0 {
        return 0.0;
    }
    let Some(h) = (wi + wo).normalized() else {
        return 0.0;
    };
    let value = match target {
        LobeTarget::Brdf => {
            let f0 = FresnelF0::splat(1.0).unwrap();
            let wiu = UnitVec3::new_unchecked(wi);
            let wou = UnitVec3::new_unchecked(wo);
            brdf_eval(model, &f0, wiu, wou, UnitVec3::Z).r * wi.z
        }
        LobeTarget::Ndf => {
            let cos_hi = h.dot(wi);
            if cos_hi <= 1e-9 {
                return 0.0;
            }
            ndf_eval(model, h.z) / (4.0 * cos_hi)
        }
    };
    value / norm
}

// squared error relative to the target magnitude; the floor keeps
// tail-leakage penalized where the target vanishes
fn fit_objective(targets: &[f64], target_peak: f64, dirs: &[Vec3], p: &[f64; 4]) -> f64 {
    let [a, b, c, d] = *p;
    if a <= 1e-5 || c <= 1e-5 || a - b * d <= 1e-5 {
        return 1e30;
    }
    let Ok(lobe) = LtcLobe::from_params(*p) else {
        return 1e30;
    };
    let floor = 0.02 * target_peak;
    let mut err = 0.0;
    for (w, t) in dirs.iter().zip(targets) {
        let e = lobe.eval(UnitVec3::new_unchecked(*w)) - t;
        err += e * e / (t + floor);
    }
    err
}

/// Fits a lobe against the chosen target with an explicit initial guess;
/// deterministic for the fixed direction grid.
pub fn fit_ltc_seeded(
    model: &MicrofacetModel,
    cos_nv: f64,
    target: LobeTarget,
    init: [f64; 4],
) -> (LtcLobe, FitReport) {
    let dirs = fit_directions();
    let wo = view_vector(cos_nv);
    let norm = match target {
        LobeTarget::Brdf => fgd(model, cos_nv),
        LobeTarget::Ndf => d_pr(model, cos_nv),
    };
    let targets: Vec<f64> = dirs
        .iter()
        .map(|w| target_density(model, target, wo, *w, norm))
        .collect();
    let target_peak = targets.iter().cloned().fold(0.0, f64::max).max(1e-12);

    let objective = |p: &[f64; 4]| fit_objective(&targets, target_peak, dirs, p);
    let initial_residual = objective(&init);
    let steps = [
        0.1 * (init[0].abs() + 0.05),
        0.05 * (init[1].abs() + 0.2),
        0.1 * (init[2].abs() + 0.05),
        0.05 * (init[3].abs() + 0.2),
    ];
    let nm = nelder_mead(objective, init, steps, 200);
    let lobe = LtcLobe::from_params(nm.x)
        .or_else(|_| LtcLobe::from_params(init))
        .unwrap_or_else(|_| LtcLobe::identity());
    (
        lobe,
        FitReport {
            residual: nm.value,
            initial_residual,
            iterations: nm.iterations,
            converged: nm.converged,
        },
    )
}

/// Fits a lobe from the default roughness-scaled initialization.
pub fn fit_ltc(model: &MicrofacetModel, cos_nv: f64, target: LobeTarget) -> (LtcLobe, FitReport) {
    let s = model.alpha().max(0.01);
    fit_ltc_seeded(model, cos_nv, target, [s, 0.0, s, 0.0])
}

/// Clips a polygon (arbitrary 3D vertices, not necessarily unit) against
/// z >= 0; emits one extra vertex per crossing edge.
fn clip_to_upper(verts: &[Vec3]) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(verts.len() + 1);
    let n = verts.len();
    for i in 0..n {
        let a = verts[i];
        let b = verts[(i + 1) % n];
        if a.z >= 0.0 {
            out.push(a);
        }
        if (a.z >= 0.0) != (b.z >= 0.0) {
            let t = a.z / (a.z - b.z);
            out.push(a + (b - a) * t);
        }
    }
    out
}

/// Fraction of the lobe's mass inside the spherical polygon, in [0, 1].
///
/// Vertices are transformed by the inverse matrix, clipped against the
/// horizon, renormalized, and fed to the analytic clamped-cosine edge
/// integral sum(theta_e * z(normalize(v_i x v_j))) / (2 pi).
pub fn integrate_ltc_polygon(lobe: &LtcLobe, poly: &SphericalPolygon) -> f64 {
    if poly.is_degenerate() {
        return 0.0;
    }
    let transformed: Vec<Vec3> = poly
        .vertices()
        .iter()
        .map(|v| lobe.apply_inv(v.as_vec()))
        .collect();
    let clipped = clip_to_upper(&transformed);
    if clipped.len() < 3 {
        return 0.0;
    }
    let unit: Vec<Vec3> = clipped.iter().filter_map(|v| v.normalized()).collect();
    let m = unit.len();
    if m < 3 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..m {
        let a = unit[i];
        let b = unit[(i + 1) % m];
        let cross = a.cross(b);
        let len = cross.length();
        if len < 1e-15 {
            continue;
        }
        sum += a.dot(b).clamp(-1.0, 1.0).acos() * (cross.z / len);
    }
    (sum.abs() / std::f64::consts::TAU).clamp(0.0, 1.0)
}

const TABLE_MAGIC: [u8; 4] = *b"GLTB";
const TABLE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default)]
struct TableCell {
    brdf: [f32; 4],
    ndf: [f32; 4],
    fgd: f32,
    d_pr: f32,
}

/// Interpolated table sample: both lobes plus the two scalars.
#[derive(Debug, Clone)]
pub struct CellSample {
    pub brdf_lobe: LtcLobe,
    pub ndf_lobe: LtcLobe,
    pub fgd: f64,
    pub d_pr: f64,
}

/// Baked 2D grid over x = sqrt(alpha), y = sqrt(n.v), row-major with x
/// fastest; bilinear lookup, clamped at the edges.
#[derive(Debug, Clone)]
pub struct LtcTable {
    kind: MicrofacetKind,
    resolution: u32,
    cells: Vec<TableCell>,
}

/// Bake diagnostics: cells whose fit did not converge within the iteration
/// budget (filled from their warm-start neighbor) and the post-bake
/// smoothness scan.
#[derive(Debug, Clone, Default)]
pub struct BakeLog {
    pub flagged: Vec<(u32, u32, LobeTarget)>,
    pub max_neighbor_jump: f64,
}

// the degenerate grid edges alpha = 0 and n.v = 0 are baked at these floors
const ALPHA_FLOOR: f64 = 1e-4;
const MU_FLOOR: f64 = 0.01;

impl LtcTable {
    pub fn kind(&self) -> MicrofacetKind {
        self.kind
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    /// Roughness of grid column `i` (x = sqrt(alpha) axis).
    pub fn grid_alpha(&self, i: u32) -> f64 {
        let x = i as f64 / (self.resolution - 1) as f64;
        (x * x).max(ALPHA_FLOOR)
    }

    /// View cosine of grid row `j` (y = sqrt(n.v) axis).
    pub fn grid_mu(&self, j: u32) -> f64 {
        let y = j as f64 / (self.resolution - 1) as f64;
        (y * y).max(MU_FLOOR)
    }

    fn cell(&self, i: u32, j: u32) -> &TableCell {
        &self.cells[(j * self.resolution + i) as usize]
    }

    /// Lobe parameters stored at a grid cell, for diagnostics.
    pub fn cell_params(&self, i: u32, j: u32) -> ([f64; 4], [f64; 4], f64, f64) {
        let c = self.cell(i, j);
        (
            [c.brdf[0] as f64, c.brdf[1] as f64, c.brdf[2] as f64, c.brdf[3] as f64],
            [c.ndf[0] as f64, c.ndf[1] as f64, c.ndf[2] as f64, c.ndf[3] as f64],
            c.fgd as f64,
            c.d_pr as f64,
        )
    }

    /// Bilinear sample at (alpha, cos_nv); out-of-range inputs clamp to the
    /// table edge.
    pub fn lookup(&self, alpha: f64, cos_nv: f64) -> Result<CellSample, LtcError> {
        let n = self.resolution as usize;
        let x = alpha.max(0.0).sqrt().clamp(0.0, 1.0) * (n - 1) as f64;
        let y = cos_nv.max(0.0).sqrt().clamp(0.0, 1.0) * (n - 1) as f64;
        let i0 = (x.floor() as usize).min(n - 2);
        let j0 = (y.floor() as usize).min(n - 2);
        let fx = (x - i0 as f64).clamp(0.0, 1.0);
        let fy = (y - j0 as f64).clamp(0.0, 1.0);

        let mut acc = [0.0f64; 10];
        for (di, dj, w) in [
            (0, 0, (1.0 - fx) * (1.0 - fy)),
            (1, 0, fx * (1.0 - fy)),
            (0, 1, (1.0 - fx) * fy),
            (1, 1, fx * fy),
        ] {
            let c = self.cell((i0 + di) as u32, (j0 + dj) as u32);
            for k in 0..4 {
                acc[k] += w * c.brdf[k] as f64;
                acc[4 + k] += w * c.ndf[k] as f64;
            }
            acc[8] += w * c.fgd as f64;
            acc[9] += w * c.d_pr as f64;
        }

        Ok(CellSample {
            brdf_lobe: LtcLobe::from_params([acc[0], acc[1], acc[2], acc[3]])?,
            ndf_lobe: LtcLobe::from_params([acc[4], acc[5], acc[6], acc[7]])?,
            fgd: acc[8],
            d_pr: acc[9],
        })
    }

    /// Serializes as little-endian binary: magic "GLTB", version u32, model
    /// id u8 (0 = GGX, 1 = Beckmann), resolution u32, then resolution^2
    /// records of 10 f32 values (brdf a,b,c,d; ndf a,b,c,d; FGD; D_PR).
    pub fn write_to(&self, w: &mut impl Write) -> Result<(), LtcError> {
        w.write_all(&TABLE_MAGIC)?;
        w.write_all(&TABLE_VERSION.to_le_bytes())?;
        let id: u8 = match self.kind {
            MicrofacetKind::Ggx => 0,
            MicrofacetKind::Beckmann => 1,
        };
        w.write_all(&[id])?;
        w.write_all(&self.resolution.to_le_bytes())?;
        for c in &self.cells {
            for v in c.brdf.iter().chain(&c.ndf).chain([&c.fgd, &c.d_pr]) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, LtcError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != TABLE_MAGIC {
            return Err(LtcError::BadMagic);
        }
        let mut u32buf = [0u8; 4];
        r.read_exact(&mut u32buf)?;
        let version = u32::from_le_bytes(u32buf);
        if version != TABLE_VERSION {
            return Err(LtcError::BadVersion(version));
        }
        let mut idbuf = [0u8; 1];
        r.read_exact(&mut idbuf)?;
        let kind = match idbuf[0] {
            0 => MicrofacetKind::Ggx,
            1 => MicrofacetKind::Beckmann,
            other => return Err(LtcError::BadModelId(other)),
        };
        r.read_exact(&mut u32buf)?;
        let resolution = u32::from_le_bytes(u32buf);
        if !(2..=4096).contains(&resolution) {
            return Err(LtcError::ResolutionRange(resolution));
        }
        let count = (resolution * resolution) as usize;
        let mut cells = Vec::with_capacity(count);
        let mut f32buf = [0u8; 4];
        for _ in 0..count {
            let mut vals = [0f32; 10];
            for v in &mut vals {
                r.read_exact(&mut f32buf)?;
                *v = f32::from_le_bytes(f32buf);
                if !v.is_finite() {
                    return Err(LtcError::NonFinite);
                }
            }
            cells.push(TableCell {
                brdf: [vals[0], vals[1], vals[2], vals[3]],
                ndf: [vals[4], vals[5], vals[6], vals[7]],
                fgd: vals[8],
                d_pr: vals[9],
            });
        }
        Ok(LtcTable { kind, resolution, cells })
    }
}

fn f32x4(p: [f64; 4]) -> [f32; 4] {
    [p[0] as f32, p[1] as f32, p[2] as f32, p[3] as f32]
}

// below this roughness the lobe covers too little solid angle for the
// 32x32 fit grid to see it (expected in-lobe samples < ~8); such cells are
// flagged and filled by roughness-rescaled extrapolation from the march
const RESOLVABLE_ALPHA: f64 = 0.09;

struct CellFit {
    cell: TableCell,
    brdf_params: [f64; 4],
    ndf_params: [f64; 4],
    flagged_brdf: bool,
    flagged_ndf: bool,
}

fn fit_cell(
    kind: MicrofacetKind,
    alpha: f64,
    mu: f64,
    init_brdf: [f64; 4],
    init_ndf: [f64; 4],
) -> CellFit {
    let model = MicrofacetModel::new(kind, alpha).expect("grid alpha in range");
    let (brdf_params, ndf_params, flagged_brdf, flagged_ndf) = if alpha < RESOLVABLE_ALPHA {
        (init_brdf, init_ndf, true, true)
    } else {
        let (brdf_lobe, brdf_rep) = fit_ltc_seeded(&model, mu, LobeTarget::Brdf, init_brdf);
        let (ndf_lobe, ndf_rep) = fit_ltc_seeded(&model, mu, LobeTarget::Ndf, init_ndf);
        // non-converged cells keep the warm-start neighbor's parameters
        let bp = if brdf_rep.converged { brdf_lobe.params() } else { init_brdf };
        let np = if ndf_rep.converged { ndf_lobe.params() } else { init_ndf };
        (bp, np, !brdf_rep.converged, !ndf_rep.converged)
    };
    let cell = TableCell {
        brdf: f32x4(brdf_params),
        ndf: f32x4(ndf_params),
        fgd: fgd(&model, mu) as f32,
        d_pr: d_pr(&model, mu) as f32,
    };
    CellFit { cell, brdf_params, ndf_params, flagged_brdf, flagged_ndf }
}

/// Warm start for the next roughness column. A narrow lobe tilted by tau is
/// the warp [[w,0,tan tau],[0,w/cos tau,0],[-w tan tau,0,1]]: the width-like
/// parameters a, c, d scale with alpha while the tilt term b does not.
fn rescale_init(params: [f64; 4], alpha_ratio: f64) -> [f64; 4] {
    [
        params[0] * alpha_ratio,
        params[1],
        params[2] * alpha_ratio,
        params[3] * alpha_ratio,
    ]
}

/// Bakes the full table: per cell, two lobe fits plus the FGD and D_PR
/// quadratures. The alpha = 1 column is fitted top-down first; each row then
/// marches from high to low roughness, warm-starting every fit from its
/// neighbor. Rows are independent and run in parallel; the result does not
/// depend on the thread count.
pub fn bake_table(kind: MicrofacetKind, resolution: u32) -> Result<(LtcTable, BakeLog), LtcError> {
    if resolution < 2 {
        return Err(LtcError::ResolutionRange(resolution));
    }
    let n = resolution;
    let mut table = LtcTable {
        kind,
        resolution,
        cells: vec![TableCell::default(); (n * n) as usize],
    };

    // seed column at alpha = 1, marched from normal view downward
    let column: Vec<([f64; 4], [f64; 4])> = {
        let alpha = table.grid_alpha(n - 1);
        let mut init_brdf = [alpha, 0.0, alpha, 0.0];
        let mut init_ndf = init_brdf;
        let mut col_rev = Vec::with_capacity(n as usize);
        for j in (0..n).rev() {
            let f = fit_cell(kind, alpha, table.grid_mu(j), init_brdf, init_ndf);
            init_brdf = f.brdf_params;
            init_ndf = f.ndf_params;
            col_rev.push((f.brdf_params, f.ndf_params));
        }
        col_rev.reverse();
        col_rev
    };

    let rows: Vec<(u32, Vec<CellFit>)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mu = table.grid_mu(j);
            let (mut init_brdf, mut init_ndf) = column[j as usize];
            let mut prev_alpha = table.grid_alpha(n - 1);
            let mut fits = Vec::with_capacity(n as usize);
            for i in (0..n).rev() {
                let alpha = table.grid_alpha(i);
                let ratio = alpha / prev_alpha;
                let f = fit_cell(
                    kind,
                    alpha,
                    mu,
                    rescale_init(init_brdf, ratio),
                    rescale_init(init_ndf, ratio),
                );
                init_brdf = f.brdf_params;
                init_ndf = f.ndf_params;
                prev_alpha = alpha;
                fits.push(f);
            }
            fits.reverse();
            (j, fits)
        })
        .collect();

    let mut log = BakeLog::default();
    for (j, fits) in rows {
        for (i, f) in fits.into_iter().enumerate() {
            if f.flagged_brdf {
                log.flagged.push((i as u32, j, LobeTarget::Brdf));
            }
            if f.flagged_ndf {
                log.flagged.push((i as u32, j, LobeTarget::Ndf));
            }
            table.cells[(j * n + i as u32) as usize] = f.cell;
        }
    }

    log.max_neighbor_jump = neighbor_jump_scan(&table, &log.flagged);
    Ok((table, log))
}

/// Largest relative jump of the BRDF-lobe matrix between adjacent cells,
/// skipping flagged ones: Frobenius distance over the larger matrix norm
/// (the fixed m33 = 1 entry included).
fn neighbor_jump_scan(table: &LtcTable, flagged: &[(u32, u32, LobeTarget)]) -> f64 {
    let n = table.resolution;
    let is_flagged = |i: u32, j: u32| flagged.iter().any(|&(fi, fj, _)| fi == i && fj == j);
    let frob = |p: &[f32; 4]| -> f64 {
        (p.iter().map(|v| (*v as f64) * (*v as f64)).sum::<f64>() + 1.0).sqrt()
    };
    let mut max_jump = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            if is_flagged(i, j) {
                continue;
            }
            let here = table.cell(i, j);
            for (ni, nj) in [(i + 1, j), (i, j + 1)] {
                if ni >= n || nj >= n || is_flagged(ni, nj) {
                    continue;
                }
                let there = table.cell(ni, nj);
                let mut dist = 0.0;
                for k in 0..4 {
                    let d = here.brdf[k] as f64 - there.brdf[k] as f64;
                    dist += d * d;
                }
                max_jump = max_jump.max(dist.sqrt() / frob(&here.brdf).max(frob(&there.brdf)));
            }
        }
    }
    max_jump
}

/// Smooth (continuous-BRDF) radiance from a constant-radiance polygonal
/// light: L * F * FGD * (lobe mass inside the polygon). Fresnel is a single
/// Schlick evaluation at the halfway vector of the view and the polygon's
/// mean direction.
pub fn smooth_radiance_area(
    table: &LtcTable,
    f0: &FresnelF0,
    radiance: Rgb,
    poly: &SphericalPolygon,
    cos_nv: f64,
    alpha: f64,
) -> Result<Rgb, LtcError> {
    if poly.is_degenerate() {
        return Ok(Rgb::BLACK);
    }
    let sample = table.lookup(alpha, cos_nv)?;
    let frac = integrate_ltc_polygon(&sample.brdf_lobe, poly);
    if frac <= 0.0 {
        return Ok(Rgb::BLACK);
    }
    let wo = UnitVec3::new_unchecked(view_vector(cos_nv));
    let f_eff = match halfway(poly.mean_direction(), wo) {
        Ok(h) => fresnel_schlick(f0, h.dot(wo.as_vec())),
        Err(_) => fresnel_schlick(f0, 1.0),
    };
    Ok(radiance * f_eff * (sample.fgd * frac))
}

/// NDF integrated over the polygon's halfway-vector domain, approximated by
/// scaling the chosen lobe's polygon mass with D_PR. `use_ndf_lobe` selects
/// the separately fitted NDF lobe instead of reusing the BRDF lobe.
pub fn integrated_ndf_area(
    table: &LtcTable,
    poly: &SphericalPolygon,
    cos_nv: f64,
    alpha: f64,
    use_ndf_lobe: bool,
) -> Result<f64, LtcError> {
    if poly.is_degenerate() {
        return Ok(0.0);
    }
    let sample = table.lookup(alpha, cos_nv)?;
    let lobe = if use_ndf_lobe { &sample.ndf_lobe } else { &sample.brdf_lobe };
    Ok(sample.d_pr * integrate_ltc_polygon(lobe, poly))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::sphere_integral;

    fn unit(x: f64, y: f64, z: f64) -> UnitVec3 {
        UnitVec3::normalize(Vec3::new(x, y, z)).unwrap()
    }

    #[test]
    fn identity_is_clamped_cosine() {
        let lobe = LtcLobe::identity();
        let up = lobe.eval(UnitVec3::Z);
        assert!((up - 1.0 / std::f64::consts::PI).abs() < 1e-12);
        let tilted = lobe.eval(unit(1.0, 0.0, 1.0));
        assert!((tilted - 0.5f64.sqrt() / std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(lobe.eval(unit(0.2, 0.1, -0.5)), 0.0);
    }

    #[test]
    fn projective_invariance_of_the_density() {
        // evaluating with s*M must reproduce eval(): the s^-3 determinant and
        // the norm factors cancel
        let p = [0.4, 0.1, 0.5, -0.2];
        let lobe = LtcLobe::from_params(p).unwrap();
        for s in [0.5, 2.0, 17.0] {
            for w in [unit(0.3, -0.4, 0.85), unit(-0.7, 0.2, 0.4), UnitVec3::Z] {
                let lo = lobe.apply_inv(w.as_vec()) / s;
                let l2 = lo.length_squared();
                let scaled_density =
                    lo.z.max(0.0) * (lobe.inv_det_abs / s.powi(3))
                        / (std::f64::consts::PI * l2 * l2);
                let direct = lobe.eval(w);
                assert!(
                    (scaled_density - direct).abs() <= 1e-12 * direct.max(1e-12),
                    "s={} w={:?}",
                    s,
                    w
                );
            }
        }
    }

    #[test]
    fn singular_matrix_rejected() {
        assert!(LtcLobe::from_params([1.0, 0.0, 0.0, 0.0]).is_err());
        assert!(LtcLobe::from_params([1.0, 1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn densities_integrate_to_one() {
        for p in [
            [1.0, 0.0, 1.0, 0.0],
            [0.25, 0.0, 0.25, 0.0],
            [0.5, 0.3, 0.7, -0.2],
            [0.08, 0.02, 0.08, 0.6],
        ] {
            let lobe = LtcLobe::from_params(p).unwrap();
            let q = sphere_integral(
                |th, ph| lobe.eval(UnitVec3::from_spherical(th.cos(), ph)),
                1e-8,
            );
            assert!((q.value - 1.0).abs() < 1e-3, "{:?} integrates to {}", p, q.value);
        }
    }

    #[test]
    fn polygon_integral_identity_octant() {
        let lobe = LtcLobe::identity();
        let poly =
            SphericalPolygon::new(vec![UnitVec3::X, UnitVec3::Y, UnitVec3::Z]).unwrap();
        // exact clamped-cosine integral over the octant is 1/4
        assert!((integrate_ltc_polygon(&lobe, &poly) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn polygon_integral_hemisphere_limit_and_below() {
        let lobe = LtcLobe::identity();
        let wide = SphericalPolygon::new(vec![
            unit(-500.0, -500.0, 1.0),
            unit(500.0, -500.0, 1.0),
            unit(500.0, 500.0, 1.0),
            unit(-500.0, 500.0, 1.0),
        ])
        .unwrap();
        assert!((integrate_ltc_polygon(&lobe, &wide) - 1.0).abs() < 1e-3);

        let below = SphericalPolygon::new(vec![
            unit(-1.0, -1.0, -0.5),
            unit(1.0, -1.0, -0.5),
            unit(1.0, 1.0, -0.5),
            unit(-1.0, 1.0, -0.5),
        ])
        .unwrap();
        assert_eq!(integrate_ltc_polygon(&lobe, &below), 0.0);
    }

    #[test]
    fn polygon_integral_additive_under_subdivision() {
        let lobe = LtcLobe::from_params([0.4, 0.1, 0.5, -0.3]).unwrap();
        let full = SphericalPolygon::new(vec![
            unit(-0.8, -0.6, 1.0),
            unit(1.2, -0.6, 1.0),
            unit(1.2, 1.0, 1.0),
            unit(-0.8, 1.0, 1.0),
        ])
        .unwrap();
        let whole = integrate_ltc_polygon(&lobe, &full);

        let mut sum = 0.0;
        for sx in 0..2 {
            for sy in 0..2 {
                let x0 = -0.8 + sx as f64 * 1.0;
                let y0 = -0.6 + sy as f64 * 0.8;
                let piece = SphericalPolygon::new(vec![
                    unit(x0, y0, 1.0),
                    unit(x0 + 1.0, y0, 1.0),
                    unit(x0 + 1.0, y0 + 0.8, 1.0),
                    unit(x0, y0 + 0.8, 1.0),
                ])
                .unwrap();
                sum += integrate_ltc_polygon(&lobe, &piece);
            }
        }
        assert!((whole - sum).abs() < 1e-6, "whole {} vs sum {}", whole, sum);
    }

    #[test]
    fn horizon_clip_straddling_polygon() {
        let lobe = LtcLobe::identity();
        let poly = SphericalPolygon::new(vec![
            unit(1.0, -1.0, 0.8),
            unit(1.0, 1.0, 0.8),
            unit(1.0, 1.0, -0.8),
            unit(1.0, -1.0, -0.8),
        ])
        .unwrap();
        let v = integrate_ltc_polygon(&lobe, &poly);
        assert!(v > 0.0 && v < 0.5);
    }

    #[test]
    fn fit_no_worse_than_identity_at_rough_normal() {
        let model = MicrofacetModel::new(MicrofacetKind::Ggx, 1.0).unwrap();
        let (lobe, report) =
            fit_ltc_seeded(&model, 1.0, LobeTarget::Brdf, [1.0, 0.0, 1.0, 0.0]);
        assert!(report.residual <= report.initial_residual);
        let q = sphere_integral(
            |th, ph| lobe.eval(UnitVec3::from_spherical(th.cos(), ph)),
            1e-8,
        );
        assert!((q.value - 1.0).abs() < 1e-3);
    }

    #[test]
    fn bake_tiny_table_and_roundtrip() {
        let (table, _log) = bake_table(MicrofacetKind::Ggx, 4).unwrap();
        assert_eq!(table.resolution(), 4);

        for j in 0..4u32 {
            for i in 0..4u32 {
                let alpha = table.grid_alpha(i);
                let model = MicrofacetModel::new(MicrofacetKind::Ggx, alpha).unwrap();
                let dh = crate::microfacet::total_microfacet_area_exact(&model);
                let (_, _, cell_fgd, cell_dpr) = table.cell_params(i, j);
                assert!(cell_dpr <= dh + 1e-6);
                assert!(cell_fgd > 0.0 && cell_fgd <= 1.0 + 1e-6);
            }
        }

        let mut buf = Vec::new();
        table.write_to(&mut buf).unwrap();
        let back = LtcTable::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back.resolution(), table.resolution());
        let mut buf2 = Vec::new();
        back.write_to(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn table_io_rejects_bad_headers() {
        let (table, _) = bake_table(MicrofacetKind::Ggx, 2).unwrap();
        let mut buf = Vec::new();
        table.write_to(&mut buf).unwrap();

        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            LtcTable::read_from(&mut bad_magic.as_slice()),
            Err(LtcError::BadMagic)
        ));

        let mut bad_version = buf.clone();
        bad_version[4] = 9;
        assert!(matches!(
            LtcTable::read_from(&mut bad_version.as_slice()),
            Err(LtcError::BadVersion(9))
        ));

        let mut bad_model = buf;
        bad_model[8] = 7;
        assert!(matches!(
            LtcTable::read_from(&mut bad_model.as_slice()),
            Err(LtcError::BadModelId(7))
        ));
    }

    #[test]
    fn lookup_clamps_to_edges() {
        let (table, _) = bake_table(MicrofacetKind::Ggx, 4).unwrap();
        let inside = table.lookup(0.25, 0.5).unwrap();
        assert!(inside.fgd > 0.0);
        let clamped_hi = table.lookup(5.0, 2.0).unwrap();
        let edge = table.lookup(1.0, 1.0).unwrap();
        assert!((clamped_hi.fgd - edge.fgd).abs() < 1e-12);
        let clamped_lo = table.lookup(-1.0, -0.5).unwrap();
        let corner = table.lookup(0.0, 0.0).unwrap();
        assert!((clamped_lo.d_pr - corner.d_pr).abs() < 1e-12);
    }
}
