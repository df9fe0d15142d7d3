//! Hand-region extraction and Lαβ color transfer from the image-based layer to
//! the mesh texture.
//!
//! The RGB to LMS matrix is the classic color-transfer one with each row scaled
//! to sum to one, so neutral grays map to `α = β = 0` exactly. The inverse is
//! computed numerically from it.

use std::sync::OnceLock;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::raster::{depth_valid, LayerImage, Mask, RgbImage};

/// Added to LMS before taking logarithms.
pub const LOG_EPSILON: f64 = 1e-6;
pub const DEFAULT_DEPTH_TOLERANCE: f64 = 0.05;
/// Minimum mask population for fitting statistics.
pub const MIN_FIT_PIXELS: usize = 64;
/// Mask population that triggers the one-time session fit, at [`TRIGGER_REFERENCE_PIXELS`].
pub const ADAPT_TRIGGER_PIXELS: usize = 2000;
/// Frame area (1280 x 720) at which [`ADAPT_TRIGGER_PIXELS`] applies unscaled.
pub const TRIGGER_REFERENCE_PIXELS: usize = 1280 * 720;
pub const MIN_SIGMA: f64 = 1e-6;
pub const GAIN_RANGE: (f64, f64) = (0.2, 5.0);
/// Upper bound on log10 LMS when converting back, keeps wild transforms finite.
const MAX_LOG_LMS: f64 = 1.0;

const RGB_TO_LMS_PUBLISHED: [[f64; 3]; 3] = [
    [0.3811, 0.5783, 0.0402],
    [0.1967, 0.7244, 0.0782],
    [0.0241, 0.1288, 0.8444],
];

struct Matrices {
    rgb_to_lms: Matrix3<f64>,
    lms_to_rgb: Matrix3<f64>,
    log_to_lab: Matrix3<f64>,
    lab_to_log: Matrix3<f64>,
}

fn matrices() -> &'static Matrices {
    static M: OnceLock<Matrices> = OnceLock::new();
    M.get_or_init(|| {
        let mut rgb_to_lms = Matrix3::from_fn(|r, c| RGB_TO_LMS_PUBLISHED[r][c]);
        for mut row in rgb_to_lms.row_iter_mut() {
            let s = row.sum();
            row /= s;
        }
        let mix = Matrix3::new(1.0, 1.0, 1.0, 1.0, 1.0, -2.0, 1.0, -1.0, 0.0);
        let scale = Matrix3::from_diagonal(&Vector3::new(
            1.0 / 3f64.sqrt(),
            1.0 / 6f64.sqrt(),
            1.0 / 2f64.sqrt(),
        ));
        let log_to_lab = scale * mix;
        Matrices {
            lms_to_rgb: rgb_to_lms.try_inverse().expect("invertible"),
            rgb_to_lms,
            lab_to_log: log_to_lab.try_inverse().expect("invertible"),
            log_to_lab,
        }
    })
}

/// Linear RGB to `(L, α, β)`.
pub fn rgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let m = matrices();
    let lms = m.rgb_to_lms * Vector3::from(rgb);
    let log = lms.map(|v| (v.max(0.0) + LOG_EPSILON).log10());
    (m.log_to_lab * log).into()
}

/// `(L, α, β)` back to linear RGB, clamped to `[0, 1]`.
pub fn lab_to_rgb(lab: [f64; 3]) -> [f64; 3] {
    let m = matrices();
    let log = m.lab_to_log * Vector3::from(lab);
    let lms = log.map(|v| 10f64.powf(v.min(MAX_LOG_LMS)) - LOG_EPSILON);
    let rgb = m.lms_to_rgb * lms;
    rgb.map(|v| if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 }).into()
}

/// Pixels where both depths are valid and agree within `tol` meters.
pub fn hand_region_mask(image_layer: &LayerImage, mesh_layer: &LayerImage, tol: f64) -> Result<Mask> {
    if image_layer.width != mesh_layer.width
        || image_layer.height != mesh_layer.height
        || image_layer.depth.len() != mesh_layer.depth.len()
    {
        return Err(Error::Structural(format!(
            "depth rasters differ: {}x{} vs {}x{}",
            image_layer.width, image_layer.height, mesh_layer.width, mesh_layer.height
        )));
    }
    Ok(Mask {
        width: image_layer.width,
        height: image_layer.height,
        bits: image_layer
            .depth
            .iter()
            .zip(&mesh_layer.depth)
            .map(|(&a, &b)| depth_valid(a) && depth_valid(b) && ((a as f64) - (b as f64)).abs() < tol)
            .collect(),
    })
}

/// Per-channel mean and population standard deviation in Lαβ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl LabStats {
    pub fn of(samples: &[[f64; 3]]) -> Self {
        let n = samples.len().max(1) as f64;
        let mut mean = [0.0; 3];
        for s in samples {
            for c in 0..3 {
                mean[c] += s[c];
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = [0.0; 3];
        for s in samples {
            for c in 0..3 {
                var[c] += (s[c] - mean[c]).powi(2);
            }
        }
        Self {
            mean,
            std: var.map(|v| (v / n).sqrt()),
        }
    }
}

/// `c' = gain (c - mean_g) + mean_i` per Lαβ channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorTransform {
    pub gain: [f64; 3],
    pub mean_g: [f64; 3],
    pub mean_i: [f64; 3],
}

impl ColorTransform {
    pub fn identity() -> Self {
        Self {
            gain: [1.0; 3],
            mean_g: [0.0; 3],
            mean_i: [0.0; 3],
        }
    }

    /// Builds the transform mapping `g` statistics onto `i` statistics.
    pub fn from_stats(i: &LabStats, g: &LabStats) -> Result<Self> {
        let mut gain = [1.0; 3];
        for c in 0..3 {
            let (si, sg) = (i.std[c], g.std[c]);
            gain[c] = if sg < MIN_SIGMA && si < MIN_SIGMA {
                1.0
            } else if sg < MIN_SIGMA {
                return Err(Error::DegenerateStatistics { channel: c, sigma: sg });
            } else {
                (si / sg).clamp(GAIN_RANGE.0, GAIN_RANGE.1)
            };
        }
        Ok(Self {
            gain,
            mean_g: g.mean,
            mean_i: i.mean,
        })
    }

    pub fn apply_lab(&self, lab: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|c| self.gain[c] * (lab[c] - self.mean_g[c]) + self.mean_i[c])
    }

    pub fn apply_rgb(&self, rgb: [f64; 3]) -> [f64; 3] {
        lab_to_rgb(self.apply_lab(rgb_to_lab(rgb)))
    }
}

fn masked_lab(layer: &LayerImage, mask: &Mask) -> Vec<[f64; 3]> {
    layer
        .rgba
        .iter()
        .zip(&mask.bits)
        .filter(|(_, m)| **m)
        .map(|(p, _)| rgb_to_lab([p[0] as f64, p[1] as f64, p[2] as f64]))
        .collect()
}

/// Lαβ statistics of the masked pixels of a layer.
pub fn masked_stats(layer: &LayerImage, mask: &Mask) -> LabStats {
    LabStats::of(&masked_lab(layer, mask))
}

/// Fits the transform carrying the mesh layer's hand colors onto the image layer's.
pub fn fit_color_transform(image_layer: &LayerImage, mesh_layer: &LayerImage, mask: &Mask) -> Result<ColorTransform> {
    let n = image_layer.len();
    if mesh_layer.len() != n || mask.bits.len() != n {
        return Err(Error::Structural("layers and mask differ in size".into()));
    }
    let found = mask.count();
    if found < MIN_FIT_PIXELS {
        return Err(Error::InsufficientOverlap {
            found,
            required: MIN_FIT_PIXELS,
        });
    }
    ColorTransform::from_stats(&masked_stats(image_layer, mask), &masked_stats(mesh_layer, mask))
}

/// Maps every texel through the transform, clamped to `[0, 1]`.
pub fn apply_to_texture(texture: &RgbImage, t: &ColorTransform) -> RgbImage {
    RgbImage {
        width: texture.width,
        height: texture.height,
        data: texture
            .data
            .iter()
            .map(|p| t.apply_rgb([p[0] as f64, p[1] as f64, p[2] as f64]).map(|v| v as f32))
            .collect(),
    }
}

/// Fit trigger for a `width x height` frame: the reference count scaled by area,
/// never below [`MIN_FIT_PIXELS`].
pub fn adapt_trigger_pixels(width: usize, height: usize) -> usize {
    let scaled = (ADAPT_TRIGGER_PIXELS as f64 * (width * height) as f64 / TRIGGER_REFERENCE_PIXELS as f64).round();
    (scaled as usize).max(MIN_FIT_PIXELS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trigger_scales_with_frame_area() {
        assert_eq!(adapt_trigger_pixels(1280, 720), 2000);
        assert_eq!(adapt_trigger_pixels(2560, 1440), 8000);
        assert_eq!(adapt_trigger_pixels(320, 240), 167);
        assert_eq!(adapt_trigger_pixels(16, 16), MIN_FIT_PIXELS);
    }
    use crate::geometry::{Camera, Intrinsics, Rigid};
    use proptest::prelude::*;

    fn layer(w: usize, h: usize, f: impl Fn(usize, usize) -> ([f32; 3], f32)) -> LayerImage {
        let mut l = LayerImage::empty(Camera::new(Intrinsics::centered(100.0, w as u32, h as u32), Rigid::identity()));
        for y in 0..h {
            for x in 0..w {
                let (c, d) = f(x, y);
                let i = l.index(x, y);
                l.rgba[i] = [c[0], c[1], c[2], 1.0];
                l.depth[i] = d;
            }
        }
        l
    }

    #[test]
    fn gray_has_zero_chroma() {
        let lab = rgb_to_lab([0.5, 0.5, 0.5]);
        assert!(lab[1].abs() < 1e-6 && lab[2].abs() < 1e-6, "{lab:?}");
    }

    #[test]
    fn black_hits_the_log_floor() {
        let lab = rgb_to_lab([0.0, 0.0, 0.0]);
        // log10(1e-6) = -6 in every LMS channel, so L = 3 * -6 / sqrt(3).
        assert!((lab[0] - (-6.0 * 3f64.sqrt())).abs() < 1e-12);
        assert!(lab[1].abs() < 1e-12 && lab[2].abs() < 1e-12);
    }

    #[test]
    fn normalized_rows_stay_close_to_published_values() {
        let m = matrices();
        for r in 0..3 {
            for c in 0..3 {
                assert!((m.rgb_to_lms[(r, c)] - RGB_TO_LMS_PUBLISHED[r][c]).abs() < 3e-3);
            }
            assert!((m.rgb_to_lms.row(r).sum() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn masks_follow_the_threshold() {
        let same = layer(8, 4, |_, _| ([0.5; 3], 0.6));
        assert_eq!(hand_region_mask(&same, &same, 0.05).unwrap().count(), 32);
        let far = layer(8, 4, |_, _| ([0.5; 3], 0.7));
        assert_eq!(hand_region_mask(&same, &far, 0.05).unwrap().count(), 0);
        let split = layer(8, 4, |x, _| ([0.5; 3], if x < 4 { 0.61 } else { 0.68 }));
        let m = hand_region_mask(&same, &split, 0.05).unwrap();
        for y in 0..4 {
            for x in 0..8 {
                assert_eq!(m.bits[y * 8 + x], x < 4);
            }
        }
    }

    #[test]
    fn mismatched_dimensions_are_structural() {
        let a = layer(8, 4, |_, _| ([0.5; 3], 0.6));
        let b = layer(4, 8, |_, _| ([0.5; 3], 0.6));
        assert!(matches!(hand_region_mask(&a, &b, 0.05), Err(Error::Structural(_))));
    }

    #[test]
    fn identical_regions_give_identity_transform() {
        let a = layer(16, 16, |x, y| ([0.3 + 0.02 * x as f32, 0.4, 0.2 + 0.01 * y as f32], 0.5));
        let mask = hand_region_mask(&a, &a, 0.05).unwrap();
        let t = fit_color_transform(&a, &a, &mask).unwrap();
        for c in 0..3 {
            assert!((t.gain[c] - 1.0).abs() < 1e-6);
            assert!((t.mean_i[c] - t.mean_g[c]).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_regions_give_pure_offset() {
        let skin = [0.8f32, 0.55, 0.45];
        let i = layer(10, 10, |_, _| (skin, 0.5));
        let g = layer(10, 10, |_, _| ([0.5; 3], 0.5));
        let mask = hand_region_mask(&i, &g, 0.05).unwrap();
        let t = fit_color_transform(&i, &g, &mask).unwrap();
        assert_eq!(t.gain, [1.0; 3]);
        let mapped = t.apply_lab(rgb_to_lab([0.5; 3]));
        let target = rgb_to_lab(skin.map(|v| v as f64));
        for c in 0..3 {
            assert!((mapped[c] - target[c]).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_mesh_region_against_textured_image_is_degenerate() {
        let i = layer(10, 10, |x, _| ([0.3 + 0.04 * x as f32, 0.4, 0.4], 0.5));
        let g = layer(10, 10, |_, _| ([0.5; 3], 0.5));
        let mask = hand_region_mask(&i, &g, 0.05).unwrap();
        assert!(matches!(
            fit_color_transform(&i, &g, &mask),
            Err(Error::DegenerateStatistics { .. })
        ));
    }

    #[test]
    fn small_mask_is_insufficient() {
        let a = layer(7, 9, |_, _| ([0.5; 3], 0.5));
        let mask = hand_region_mask(&a, &a, 0.05).unwrap();
        assert!(matches!(
            fit_color_transform(&a, &a, &mask),
            Err(Error::InsufficientOverlap { found: 63, required: 64 })
        ));
    }

    #[test]
    fn recovers_known_gain_and_offset() {
        // Build g, then i = 2 (g - mean_g) + mean_g + 0.1 per Lαβ channel.
        let g = layer(16, 16, |x, y| {
            ([0.35 + 0.01 * x as f32, 0.3 + 0.008 * y as f32, 0.25 + 0.005 * (x + y) as f32], 0.5)
        });
        let mask = hand_region_mask(&g, &g, 0.05).unwrap();
        let sg = masked_stats(&g, &mask);
        let lab_i: Vec<[f64; 3]> = masked_lab(&g, &mask)
            .iter()
            .map(|c| std::array::from_fn(|k| 2.0 * (c[k] - sg.mean[k]) + sg.mean[k] + 0.1))
            .collect();
        let si = LabStats::of(&lab_i);
        let t = ColorTransform::from_stats(&si, &sg).unwrap();
        for c in 0..3 {
            assert!((t.gain[c] - 2.0).abs() < 1e-4);
            assert!((t.mean_i[c] - t.mean_g[c] - 0.1).abs() < 1e-4);
        }
    }

    #[test]
    fn identity_transform_keeps_texture() {
        let tex = RgbImage::from_fn(8, 8, |x, y| [0.1 * x as f32, 0.05 * y as f32 + 0.2, 0.6]);
        let out = apply_to_texture(&tex, &ColorTransform::identity());
        for (a, b) in out.data.iter().zip(&tex.data) {
            for c in 0..3 {
                assert!((a[c] - b[c]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn bright_transform_is_clamped() {
        let tex = RgbImage::from_fn(8, 8, |x, _| [0.9, 0.1 * x as f32, 0.0]);
        let t = ColorTransform {
            gain: [5.0; 3],
            mean_g: [0.0; 3],
            mean_i: [40.0, 30.0, -30.0],
        };
        let out = apply_to_texture(&tex, &t);
        assert!(out.data.iter().flatten().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]

        #[test]
        fn color_round_trip(r in 0.0f64..=1.0, g in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let back = lab_to_rgb(rgb_to_lab([r, g, b]));
            for (x, y) in back.iter().zip([r, g, b]) {
                prop_assert!((x - y).abs() < 1e-5);
            }
        }

        #[test]
        fn masks_are_monotone_in_tolerance(t1 in 0.0f64..0.2, dt in 0.0f64..0.2, seed in 0u32..1000) {
            let a = layer(8, 8, |x, y| ([0.5; 3], 0.5 + 0.003 * ((x * 7 + y * 13 + seed as usize) % 50) as f32));
            let b = layer(8, 8, |x, y| ([0.5; 3], 0.5 + 0.004 * ((x * 5 + y * 3 + seed as usize) % 40) as f32));
            let m1 = hand_region_mask(&a, &b, t1).unwrap();
            let m2 = hand_region_mask(&a, &b, t1 + dt).unwrap();
            prop_assert!(m1.bits.iter().zip(&m2.bits).all(|(x, y)| !*x || *y));
        }
    }
}
