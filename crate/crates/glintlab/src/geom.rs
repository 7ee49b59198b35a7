//! Spherical geometry: unit directions, orthonormal frames, spherical caps
//! and convex spherical polygons with their solid angles.

use crate::math::Vec3;
use std::ops::Deref;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeomError {
    #[error("vector is not unit length (|v| = {0})")]
    NotUnit(f64),
    #[error("cannot normalize a zero-length vector")]
    ZeroVector,
    #[error("directions are antipodal")]
    Antipodal,
    #[error("half-angle {0} outside [0, pi/2]")]
    HalfAngleRange(f64),
    #[error("spherical polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("consecutive polygon vertices are antipodal")]
    AntipodalEdge,
    #[error("polygon is not convex")]
    NotConvex,
}

/// A direction on the unit sphere; the constructor enforces unit length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVec3(Vec3);

impl UnitVec3 {
    pub const Z: UnitVec3 = UnitVec3(Vec3::Z);
    pub const X: UnitVec3 = UnitVec3(Vec3::X);
    pub const Y: UnitVec3 = UnitVec3(Vec3::Y);

    /// Wraps a vector that must already be unit length within 1e-9.
    pub fn from_normalized(v: Vec3) -> Result<Self, GeomError> {
        let len = v.length();
        if (len - 1.0).abs() > 1e-9 {
            return Err(GeomError::NotUnit(len));
        }
        Ok(UnitVec3(v))
    }

    /// Normalizes an arbitrary non-zero vector.
    pub fn normalize(v: Vec3) -> Result<Self, GeomError> {
        v.normalized().map(UnitVec3).ok_or(GeomError::ZeroVector)
    }

    /// For results of length-preserving operations.
    pub(crate) fn new_unchecked(v: Vec3) -> Self {
        debug_assert!((v.length() - 1.0).abs() < 1e-6);
        UnitVec3(v)
    }

    pub fn as_vec(&self) -> Vec3 {
        self.0
    }

    /// Spherical coordinates around +z: (cos theta, phi).
    pub fn from_spherical(cos_theta: f64, phi: f64) -> Self {
        let ct = cos_theta.clamp(-1.0, 1.0);
        let st = (1.0 - ct * ct).max(0.0).sqrt();
        UnitVec3(Vec3::new(st * phi.cos(), st * phi.sin(), ct))
    }
}

impl Deref for UnitVec3 {
    type Target = Vec3;
    fn deref(&self) -> &Vec3 {
        &self.0
    }
}

impl From<UnitVec3> for Vec3 {
    fn from(u: UnitVec3) -> Vec3 {
        u.0
    }
}

/// Halfway vector of two directions: normalize(a + b).
pub fn halfway(wi: UnitVec3, wo: UnitVec3) -> Result<UnitVec3, GeomError> {
    (wi.as_vec() + wo.as_vec())
        .normalized()
        .map(UnitVec3)
        .ok_or(GeomError::Antipodal)
}

/// Mirror reflection of `w` about the (microfacet) normal `m`.
pub fn reflect(w: UnitVec3, m: UnitVec3) -> UnitVec3 {
    let v = 2.0 * w.dot(m.as_vec()) * m.as_vec() - w.as_vec();
    UnitVec3::new_unchecked(v)
}

/// Solid angle of a spherical cap with the given half-angle, in steradians:
/// 2 pi (1 - cos gamma), computed as 4 pi sin^2(gamma/2) to avoid the
/// cancellation near zero.
pub fn cap_solid_angle(half_angle: f64) -> Result<f64, GeomError> {
    if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&half_angle) {
        return Err(GeomError::HalfAngleRange(half_angle));
    }
    let s = (0.5 * half_angle).sin();
    Ok(2.0 * std::f64::consts::TAU * s * s)
}

/// A spherical cap of directions around an axis.
#[derive(Debug, Clone, Copy)]
pub struct SphericalCap {
    pub axis: UnitVec3,
    pub half_angle: f64,
}

impl SphericalCap {
    pub fn new(axis: UnitVec3, half_angle: f64) -> Result<Self, GeomError> {
        if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&half_angle) {
            return Err(GeomError::HalfAngleRange(half_angle));
        }
        Ok(SphericalCap { axis, half_angle })
    }

    pub fn solid_angle(&self) -> f64 {
        let s = (0.5 * self.half_angle).sin();
        2.0 * std::f64::consts::TAU * s * s
    }

    pub fn contains(&self, d: UnitVec3) -> bool {
        self.axis.dot(d.as_vec()) >= self.half_angle.cos() - 1e-12
    }
}

const DEDUP_TOL: f64 = 1e-12;
const EDGE_TOL: f64 = 1e-12;

/// A convex spherical polygon, stored counter-clockwise as seen from the
/// sphere center looking along its mean direction.
///
/// Construction dedupes repeated consecutive vertices; if fewer than three
/// distinct vertices remain the polygon is degenerate (zero solid angle,
/// contains nothing).
#[derive(Debug, Clone)]
pub struct SphericalPolygon {
    vertices: Vec<UnitVec3>,
    degenerate: bool,
}

impl SphericalPolygon {
    pub fn new(vertices: Vec<UnitVec3>) -> Result<Self, GeomError> {
        if vertices.len() < 3 {
            return Err(GeomError::TooFewVertices(vertices.len()));
        }

        let mut verts: Vec<UnitVec3> = Vec::with_capacity(vertices.len());
        for v in &vertices {
            if verts
                .last()
                .map_or(true, |p| p.dot(v.as_vec()) < 1.0 - DEDUP_TOL)
            {
                verts.push(*v);
            }
        }
        while verts.len() > 1
            && verts[0].dot(verts.last().unwrap().as_vec()) >= 1.0 - DEDUP_TOL
        {
            verts.pop();
        }

        if verts.len() < 3 {
            return Ok(SphericalPolygon { vertices: verts, degenerate: true });
        }

        let n = verts.len();
        for i in 0..n {
            if verts[i].dot(verts[(i + 1) % n].as_vec()) <= -1.0 + DEDUP_TOL {
                return Err(GeomError::AntipodalEdge);
            }
        }

        let centroid = verts
            .iter()
            .fold(Vec3::ZERO, |acc, v| acc + v.as_vec())
            .normalized()
            .ok_or(GeomError::NotConvex)?;
        if verts[0].cross(verts[1].as_vec()).dot(centroid) < 0.0 {
            verts.reverse();
        }

        // every vertex must lie on the inner side of every edge plane
        for i in 0..n {
            let edge_normal = verts[i].cross(verts[(i + 1) % n].as_vec());
            for (k, v) in verts.iter().enumerate() {
                if k == i || k == (i + 1) % n {
                    continue;
                }
                if edge_normal.dot(v.as_vec()) < -1e-9 {
                    return Err(GeomError::NotConvex);
                }
            }
        }

        Ok(SphericalPolygon { vertices: verts, degenerate: false })
    }

    pub fn vertices(&self) -> &[UnitVec3] {
        &self.vertices
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Normalized sum of the vertices.
    pub fn mean_direction(&self) -> UnitVec3 {
        let sum = self
            .vertices
            .iter()
            .fold(Vec3::ZERO, |acc, v| acc + v.as_vec());
        UnitVec3::normalize(sum).unwrap_or(UnitVec3::Z)
    }

    /// Girard spherical excess: sum of interior angles minus (n-2)*pi.
    /// Degenerate polygons have zero solid angle.
    pub fn solid_angle(&self) -> f64 {
        if self.degenerate {
            return 0.0;
        }
        let n = self.vertices.len();
        let mut angle_sum = 0.0;
        for i in 0..n {
            let prev = self.vertices[(i + n - 1) % n].as_vec();
            let here = self.vertices[i].as_vec();
            let next = self.vertices[(i + 1) % n].as_vec();
            let ta = (prev - here * here.dot(prev)).normalized();
            let tb = (next - here * here.dot(next)).normalized();
            match (ta, tb) {
                (Some(a), Some(b)) => angle_sum += a.dot(b).clamp(-1.0, 1.0).acos(),
                _ => return 0.0,
            }
        }
        (angle_sum - (n as f64 - 2.0) * std::f64::consts::PI).max(0.0)
    }

    /// Boundary-inclusive membership test.
    pub fn contains(&self, d: UnitVec3) -> bool {
        if self.degenerate {
            return false;
        }
        let n = self.vertices.len();
        for i in 0..n {
            let edge_normal = self.vertices[i].cross(self.vertices[(i + 1) % n].as_vec());
            if edge_normal.dot(d.as_vec()) < -EDGE_TOL {
                return false;
            }
        }
        true
    }
}

/// Right-handed orthonormal frame with `n` as the local +z axis.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub t1: UnitVec3,
    pub t2: UnitVec3,
    pub n: UnitVec3,
}

impl Frame {
    /// Frame with `view` lying in the local xz-plane with non-negative x.
    /// Falls back to an arbitrary tangent when `view` is parallel to `n`.
    pub fn from_normal_view(n: UnitVec3, view: UnitVec3) -> Frame {
        let tangent = view.as_vec() - n.as_vec() * n.dot(view.as_vec());
        let t1 = tangent
            .normalized()
            .map(UnitVec3)
            .unwrap_or_else(|| Frame::any_tangent(n));
        let t2 = UnitVec3::new_unchecked(n.cross(t1.as_vec()));
        Frame { t1, t2, n }
    }

    fn any_tangent(n: UnitVec3) -> UnitVec3 {
        let candidate = if n.x.abs() < 0.9 { Vec3::X } else { Vec3::Y };
        UnitVec3::normalize(candidate - n.as_vec() * n.dot(candidate)).unwrap()
    }

    /// World direction -> frame-local coordinates.
    pub fn to_local(&self, v: Vec3) -> Vec3 {
        Vec3::new(self.t1.dot(v), self.t2.dot(v), self.n.dot(v))
    }

    /// Rotation preserves length, so unit vectors stay unit.
    pub fn to_local_unit(&self, v: UnitVec3) -> UnitVec3 {
        UnitVec3::new_unchecked(self.to_local(v.as_vec()))
    }

    /// Frame-local coordinates -> world direction.
    pub fn to_world(&self, v: Vec3) -> Vec3 {
        self.t1.as_vec() * v.x + self.t2.as_vec() * v.y + self.n.as_vec() * v.z
    }
}
