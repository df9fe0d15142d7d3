//! Distance-driven blending of the mesh hand over the image-based portrait.
//!
//! All arithmetic is in linear color. Pixels where the mesh alpha is exactly 0
//! are copied from the base layer unchanged, so a far hand yields a frame that
//! is bit-identical to the pure image-based one.

use crate::error::{Error, Result};
use crate::raster::{LayerImage, Mask, RgbImage};
use crate::skeleton_rig::HandSkeleton;
use crate::spatial_calib::ScreenGeometry;

pub const DEFAULT_D_MIN: f64 = 0.2;
pub const DEFAULT_D_MAX: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionParams {
    pub d_min: f64,
    pub d_max: f64,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            d_min: DEFAULT_D_MIN,
            d_max: DEFAULT_D_MAX,
        }
    }
}

impl FusionParams {
    pub fn new(d_min: f64, d_max: f64) -> Result<Self> {
        let p = Self { d_min, d_max };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_min > 0.0 && self.d_min < self.d_max && self.d_max.is_finite()) {
            return Err(Error::Validation(format!(
                "need 0 < d_min < d_max, got {} and {}",
                self.d_min, self.d_max
            )));
        }
        Ok(())
    }

    pub fn clip(&self, d: f64) -> f64 {
        d.clamp(self.d_min, self.d_max)
    }

    /// `(d_max - d_hat) / (d_max - d_min)`.
    pub fn alpha(&self, d: f64) -> f64 {
        (self.d_max - self.clip(d)) / (self.d_max - self.d_min)
    }
}

/// Hand-to-screen distance and its clipped value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandDistance {
    pub d: f64,
    pub d_hat: f64,
}

impl HandDistance {
    pub fn new(d: f64, params: &FusionParams) -> Self {
        let d = d.max(0.0);
        Self {
            d,
            d_hat: params.clip(d),
        }
    }

    pub fn alpha(&self, params: &FusionParams) -> f64 {
        params.alpha(self.d_hat)
    }
}

/// Distance from the mean joint position to the screen plane, floored at 0.
pub fn hand_distance(skeleton: &HandSkeleton, screen: &ScreenGeometry, params: &FusionParams) -> HandDistance {
    HandDistance::new(screen.plane().signed_distance(&skeleton.mean_joint()), params)
}

/// `α_g` on hand pixels, 0 elsewhere.
pub fn hand_alpha(d: &HandDistance, params: &FusionParams, hand_mask: &Mask) -> Vec<f32> {
    let a = d.alpha(params) as f32;
    hand_mask.bits.iter().map(|&m| if m { a } else { 0.0 }).collect()
}

/// Sets the mesh layer's alpha to `α_g` (its coverage is the hand mask).
pub fn with_hand_alpha(mesh_layer: &LayerImage, d: &HandDistance, params: &FusionParams) -> LayerImage {
    let alpha = hand_alpha(d, params, &mesh_layer.alpha_mask(0.0));
    let mut out = mesh_layer.clone();
    for (px, a) in out.rgba.iter_mut().zip(alpha) {
        px[3] = a;
    }
    out
}

/// One channel of the overlay: returns `(c_f, α_f)`.
pub fn overlay_pixel(c_g: f64, alpha_g: f64, c_i: f64, alpha_i: f64) -> (f64, f64) {
    let alpha_f = alpha_g + alpha_i * (1.0 - alpha_g);
    if alpha_f == 0.0 {
        return (0.0, 0.0);
    }
    ((c_g * alpha_g + c_i * alpha_i * (1.0 - alpha_g)) / alpha_f, alpha_f)
}

/// Blends `mesh` (alpha = `α_g`) over the image-based `base`.
pub fn overlay_blend(base: &LayerImage, mesh: &LayerImage) -> Result<LayerImage> {
    if base.width != mesh.width || base.height != mesh.height {
        return Err(Error::Structural(format!(
            "overlay layers differ: {}x{} vs {}x{}",
            base.width, base.height, mesh.width, mesh.height
        )));
    }
    let mut out = base.clone();
    for (k, (o, g)) in out.rgba.iter_mut().zip(&mesh.rgba).enumerate() {
        let ag = g[3];
        if ag == 0.0 {
            continue;
        }
        if ag == 1.0 {
            *o = *g;
        } else {
            let ai = o[3] as f64;
            let mut a_f = 0.0;
            for c in 0..3 {
                let (cf, af) = overlay_pixel(g[c] as f64, ag as f64, o[c] as f64, ai);
                o[c] = cf as f32;
                a_f = af;
            }
            o[3] = a_f as f32;
        }
        out.depth[k] = out.depth[k].min(mesh.depth[k]);
    }
    Ok(out)
}

/// `c_f α_f + bg (1 - α_f)`.
pub fn compose_background(layer: &LayerImage, background: &RgbImage) -> Result<RgbImage> {
    if layer.width != background.width || layer.height != background.height {
        return Err(Error::Structural("background size differs from layer".into()));
    }
    Ok(RgbImage {
        width: layer.width,
        height: layer.height,
        data: layer
            .rgba
            .iter()
            .zip(&background.data)
            .map(|(p, bg)| {
                let a = p[3] as f64;
                std::array::from_fn(|c| (p[c] as f64 * a + bg[c] as f64 * (1.0 - a)) as f32)
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Camera, Intrinsics, Rigid};
    use crate::skeleton_rig::template_rest_joints;
    use nalgebra::{Point3, Vector3};
    use proptest::prelude::*;

    fn skeleton_at(z: impl Fn(usize) -> f64) -> HandSkeleton {
        let joints = template_rest_joints()
            .iter()
            .enumerate()
            .map(|(j, p)| Point3::new(p.x, p.y, z(j)))
            .collect();
        HandSkeleton::at_rest(joints, 0).unwrap()
    }

    fn cam() -> Camera {
        Camera::new(Intrinsics::centered(50.0, 6, 4), Rigid::identity())
    }

    #[test]
    fn distance_of_flat_hand() {
        let p = FusionParams::default();
        let d = hand_distance(&skeleton_at(|_| 0.3), &ScreenGeometry::default(), &p);
        assert!((d.d - 0.3).abs() < 1e-15);
    }

    #[test]
    fn distance_of_symmetric_spread() {
        let p = FusionParams::default();
        // Joint j at 0.25 + 0.1 j / 20: symmetric about 0.3.
        let d = hand_distance(&skeleton_at(|j| 0.25 + 0.1 * j as f64 / 20.0), &ScreenGeometry::default(), &p);
        assert!((d.d - 0.3).abs() < 1e-12);
    }

    #[test]
    fn distance_matches_scalar_mean() {
        let p = FusionParams::default();
        let z = |j: usize| 0.1 + 0.013 * j as f64 + 0.002 * (j % 3) as f64;
        let expect = (0..21).map(z).sum::<f64>() / 21.0;
        let d = hand_distance(&skeleton_at(z), &ScreenGeometry::default(), &p);
        assert!((d.d - expect).abs() < 1e-9);
    }

    #[test]
    fn distance_is_floored_at_zero() {
        let p = FusionParams::default();
        let d = hand_distance(&skeleton_at(|_| -0.05), &ScreenGeometry::default(), &p);
        assert_eq!(d.d, 0.0);
        assert_eq!(d.d_hat, 0.2);
    }

    #[test]
    fn alpha_examples() {
        let p = FusionParams::default();
        let mut mask = Mask::new(3, 1);
        mask.bits[1] = true;
        assert_eq!(hand_alpha(&HandDistance::new(0.5, &p), &p, &mask), vec![0.0, 0.0, 0.0]);
        assert_eq!(hand_alpha(&HandDistance::new(0.1, &p), &p, &mask), vec![0.0, 1.0, 0.0]);
        assert_eq!(hand_alpha(&HandDistance::new(0.3, &p), &p, &mask)[1], 0.5);
    }

    #[test]
    fn invalid_params_are_rejected() {
        assert!(FusionParams::new(0.4, 0.2).is_err());
        assert!(FusionParams::new(0.0, 0.2).is_err());
    }

    #[test]
    fn scalar_overlay_example() {
        let (c, a) = overlay_pixel(1.0, 0.5, 0.0, 0.8);
        assert!((a - 0.9).abs() < 1e-12);
        assert!((c - 0.5 / 0.9).abs() < 1e-12);
        assert_eq!(overlay_pixel(0.3, 0.0, 0.7, 0.0), (0.0, 0.0));
    }

    #[test]
    fn zero_alpha_keeps_base_and_full_alpha_selects_mesh() {
        let mut base = LayerImage::empty(cam());
        for (k, px) in base.rgba.iter_mut().enumerate() {
            *px = [0.1 * k as f32 / 3.0, 0.2, 0.3, 0.7];
        }
        let mut mesh = LayerImage::empty(cam());
        for px in mesh.rgba.iter_mut() {
            *px = [0.9, 0.8, 0.7, 0.0];
        }
        assert_eq!(overlay_blend(&base, &mesh).unwrap(), base);
        for px in mesh.rgba.iter_mut() {
            px[3] = 1.0;
        }
        let out = overlay_blend(&base, &mesh).unwrap();
        assert!(out.rgba.iter().all(|p| *p == [0.9, 0.8, 0.7, 1.0]));
    }

    #[test]
    fn compose_examples() {
        let mut l = LayerImage::empty(cam());
        let bg = RgbImage::new(6, 4, [0.0; 3]);
        for px in l.rgba.iter_mut() {
            *px = [1.0, 1.0, 1.0, 0.25];
        }
        assert!(compose_background(&l, &bg).unwrap().data.iter().all(|p| *p == [0.25; 3]));
        let bg2 = RgbImage::new(6, 4, [0.3, 0.6, 0.9]);
        for px in l.rgba.iter_mut() {
            px[3] = 0.0;
        }
        assert_eq!(compose_background(&l, &bg2).unwrap(), bg2);
        for px in l.rgba.iter_mut() {
            *px = [0.4, 0.5, 0.6, 1.0];
        }
        assert!(compose_background(&l, &bg2).unwrap().data.iter().all(|p| *p == [0.4, 0.5, 0.6]));
    }

    proptest! {
        #[test]
        fn alpha_is_monotone_in_distance(d1 in 0.0f64..1.0, dd in 0.0f64..0.5) {
            let p = FusionParams::default();
            prop_assert!(p.alpha(d1 + dd) <= p.alpha(d1));
        }

        #[test]
        fn overlay_alpha_bounds(ag in 0.0f64..=1.0, ai in 0.0f64..=1.0, cg in 0.0f64..=1.0, ci in 0.0f64..=1.0) {
            let (c, a) = overlay_pixel(cg, ag, ci, ai);
            prop_assert!((0.0..=1.0 + 1e-15).contains(&a));
            prop_assert!(a >= ag - 1e-15 && a >= ai * (1.0 - ag) - 1e-15);
            prop_assert!(c.is_finite());
        }

        #[test]
        fn composed_output_is_linear_in_alpha_g(ag in 0.0f64..=1.0, ai in 0.0f64..=1.0, cg in 0.0f64..=1.0, ci in 0.0f64..=1.0, bg in 0.0f64..=1.0) {
            let (c, a) = overlay_pixel(cg, ag, ci, ai);
            let out = c * a + bg * (1.0 - a);
            let expect = cg * ag + ci * ai * (1.0 - ag) + bg * (1.0 - ag - ai * (1.0 - ag));
            prop_assert!((out - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn plane_normal_is_used() {
        let screen = ScreenGeometry::new(
            1.0,
            1.0,
            Rigid::from_parts(nalgebra::Translation3::new(0.0, 0.0, 0.1), crate::geometry::rotation(Vector3::y(), 0.0)),
        )
        .unwrap();
        let p = FusionParams::default();
        let d = hand_distance(&skeleton_at(|_| 0.4), &screen, &p);
        assert!((d.d - 0.3).abs() < 1e-12);
    }
}
