//! Pinhole camera with analytic ray differentials against the z = 0 plane.

use glintlab::glint::FootprintSample;
use glintlab::math::Vec3;
use glintlab::UnitVec3;

#[derive(Debug, Clone)]
pub struct Camera {
    position: Vec3,
    right: Vec3,
    up: Vec3,
    forward: Vec3,
    tan_half_fov: f64,
    aspect: f64,
    width: u32,
    height: u32,
}

/// One primary ray's intersection with the surface plane.
#[derive(Debug, Clone, Copy)]
pub struct PlaneHit {
    pub point: Vec3,
    pub view: UnitVec3,
    pub footprint: FootprintSample,
}

impl Camera {
    pub fn new(
        position: Vec3,
        look_at: Vec3,
        up_hint: Vec3,
        fov_y_degrees: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, String> {
        if !(fov_y_degrees > 0.0 && fov_y_degrees < 180.0) {
            return Err(format!("fov_y_degrees must lie in (0, 180), got {fov_y_degrees}"));
        }
        let forward = (look_at - position)
            .normalized()
            .ok_or("camera position and look_at coincide")?;
        let right = forward
            .cross(up_hint)
            .normalized()
            .ok_or("up vector is parallel to the view direction")?;
        let up = right.cross(forward);
        Ok(Camera {
            position,
            right,
            up,
            forward,
            tan_half_fov: (fov_y_degrees.to_radians() / 2.0).tan(),
            aspect: width as f64 / height as f64,
            width,
            height,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn position(&self) -> Vec3 {
        self.position
    }

    /// Unnormalized ray direction through pixel center (px, py) plus its
    /// derivatives per pixel step.
    fn ray_direction(&self, px: u32, py: u32) -> (Vec3, Vec3, Vec3) {
        let kx = 2.0 * self.aspect * self.tan_half_fov / self.width as f64;
        let ky = 2.0 * self.tan_half_fov / self.height as f64;
        let sx = (px as f64 + 0.5) * kx - self.aspect * self.tan_half_fov;
        let sy = self.tan_half_fov - (py as f64 + 0.5) * ky;
        let dir = self.forward + self.right * sx + self.up * sy;
        (dir, self.right * kx, self.up * (-ky))
    }

    /// Intersects the pixel's ray with the z = 0 plane; the UV footprint
    /// derivatives come from differentiating the intersection analytically.
    /// Returns None for rays that miss the plane or graze it from below.
    pub fn hit_plane(&self, px: u32, py: u32) -> Option<PlaneHit> {
        let (dir, ddir_dx, ddir_dy) = self.ray_direction(px, py);
        if dir.z.abs() < 1e-12 {
            return None;
        }
        let t = -self.position.z / dir.z;
        if t <= 0.0 {
            return None;
        }
        let point = self.position + dir * t;

        // p = o - (o_z / d_z) d, so dp = (o_z dd_z / d_z^2) d - (o_z / d_z) dd
        let oz = self.position.z;
        let dz2 = dir.z * dir.z;
        let dp_dx = dir * (oz * ddir_dx.z / dz2) + ddir_dx * t;
        let dp_dy = dir * (oz * ddir_dy.z / dz2) + ddir_dy * t;

        let view = UnitVec3::normalize(self.position - point).ok()?;
        if view.z <= 0.0 {
            return None;
        }
        Some(PlaneHit {
            point,
            view,
            footprint: FootprintSample {
                uv: [point.x, point.y],
                duv_dx: [dp_dx.x, dp_dx.y],
                duv_dy: [dp_dy.x, dp_dy.y],
            },
        })
    }
}
