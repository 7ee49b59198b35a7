//! Glint shading under area-light illumination.
//!
//! The library models a surface covered by a finite number of discrete
//! microfacets and computes, per pixel footprint, how many of them are
//! oriented to reflect an area light toward the viewer. The reflecting count
//! follows a binomial distribution whose success probability is the
//! continuous NDF integrated over the light's halfway-vector domain and
//! normalized by the total microfacet area; the smooth shading result is then
//! modulated by the counting ratio. Area-light integrals are evaluated with
//! linearly transformed cosines (LTC) from a baked 2D table; spherical-cap
//! lights use a locally constant NDF approximation instead.
//!
//! Monte-Carlo and brute-force oracles for every approximation live in
//! [`reference`].

pub mod fit;
pub mod geom;
pub mod glint;
pub mod ltc;
pub mod math;
pub mod microfacet;
pub mod quadrature;
pub mod reference;
pub mod rng;

pub use geom::{SphericalCap, SphericalPolygon, UnitVec3};
pub use math::{Rgb, Vec3};
pub use microfacet::{FresnelF0, MicrofacetKind, MicrofacetModel};
