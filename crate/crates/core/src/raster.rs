//! RGBα + depth rasters, binary dumps, and frame hashing.
//!
//! Colors are linear RGB in `[0, 1]`. Empty depth is [`NO_DEPTH`].

use std::io::{Read, Write};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::Camera;

/// Depth sentinel for pixels with no surface.
pub const NO_DEPTH: f32 = f32::INFINITY;

#[inline]
pub fn depth_valid(d: f32) -> bool {
    d.is_finite() && d > 0.0
}

/// Linear RGB raster (textures, backgrounds, final frames).
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f32; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, fill: [f32; 3]) -> Self {
        Self {
            width,
            height,
            data: vec![fill; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        self.data[y * self.width + x]
    }

    /// Nearest-texel lookup with `(u, v)` in `[0, 1]^2`, `v = 0` at the top row.
    #[inline]
    pub fn sample_nearest(&self, u: f32, v: f32) -> [f32; 3] {
        let x = ((u * self.width as f32) as isize).clamp(0, self.width as isize - 1) as usize;
        let y = ((v * self.height as f32) as isize).clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    /// SHA-256 over the little-endian channel data, first 8 bytes as hex.
    pub fn hash_hex(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.width as u32).to_le_bytes());
        h.update((self.height as u32).to_le_bytes());
        for px in &self.data {
            for c in px {
                h.update(c.to_le_bytes());
            }
        }
        hex16(&h.finalize())
    }

    /// 8-bit sRGB PNG of the frame. Gamma is applied only here.
    pub fn to_png(&self) -> Result<Vec<u8>> {
        let mut bytes = Vec::with_capacity(self.data.len() * 3);
        for px in &self.data {
            for c in px {
                bytes.push(linear_to_srgb8(*c));
            }
        }
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc
                .write_header()
                .map_err(|e| Error::Codec(format!("png header: {e}")))?;
            w.write_image_data(&bytes)
                .map_err(|e| Error::Codec(format!("png data: {e}")))?;
        }
        Ok(out)
    }

    /// Box-filtered downsample by an integer factor.
    pub fn downsample(&self, factor: usize) -> RgbImage {
        let factor = factor.max(1);
        let w = self.width / factor;
        let h = self.height / factor;
        let n = (factor * factor) as f32;
        RgbImage::from_fn(w, h, |x, y| {
            let mut acc = [0.0f32; 3];
            for dy in 0..factor {
                for dx in 0..factor {
                    let p = self.get(x * factor + dx, y * factor + dy);
                    for c in 0..3 {
                        acc[c] += p[c];
                    }
                }
            }
            [acc[0] / n, acc[1] / n, acc[2] / n]
        })
    }
}

pub(crate) fn hex16(digest: &[u8]) -> String {
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn linear_to_srgb8(c: f32) -> u8 {
    let c = c.clamp(0.0, 1.0);
    let s = if c <= 0.003_130_8 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    };
    (s * 255.0 + 0.5) as u8
}

/// Binary per-pixel mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn and(&self, other: &Mask) -> Result<Mask> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::Structural("mask dimensions differ".into()));
        }
        Ok(Mask {
            width: self.width,
            height: self.height,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(a, b)| *a && *b)
                .collect(),
        })
    }

    /// Intersection-over-union of two masks of equal size.
    pub fn iou(&self, other: &Mask) -> f64 {
        let mut inter = 0usize;
        let mut union = 0usize;
        for (a, b) in self.bits.iter().zip(&other.bits) {
            inter += (*a && *b) as usize;
            union += (*a || *b) as usize;
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }
}

/// An RGBα + depth raster seen through `camera`.
///
/// Color is straight (not premultiplied) alpha. Depth is camera-frame z in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerImage {
    pub width: usize,
    pub height: usize,
    pub rgba: Vec<[f32; 4]>,
    pub depth: Vec<f32>,
    pub camera: Camera,
}

impl LayerImage {
    /// Fully transparent layer with empty depth, sized to the camera raster.
    pub fn empty(camera: Camera) -> Self {
        let (w, h) = (camera.width(), camera.height());
        Self {
            width: w,
            height: h,
            rgba: vec![[0.0; 4]; w * h],
            depth: vec![NO_DEPTH; w * h],
            camera,
        }
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn alpha_mask(&self, threshold: f32) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            bits: self.rgba.iter().map(|p| p[3] > threshold).collect(),
        }
    }

    /// Checks alpha range, finite colors, depth validity and raster sizes.
    pub fn validate(&self) -> Result<()> {
        let n = self.width * self.height;
        if self.rgba.len() != n || self.depth.len() != n {
            return Err(Error::Structural(format!(
                "layer {}x{} has {} color and {} depth samples",
                self.width,
                self.height,
                self.rgba.len(),
                self.depth.len()
            )));
        }
        for (i, px) in self.rgba.iter().enumerate() {
            if px.iter().any(|c| !c.is_finite()) || !(0.0..=1.0).contains(&px[3]) {
                return Err(Error::Validation(format!("pixel {i} has invalid rgba {px:?}")));
            }
        }
        if let Some(i) = self.depth.iter().position(|d| *d != NO_DEPTH && !depth_valid(*d)) {
            return Err(Error::Validation(format!("pixel {i} has invalid depth")));
        }
        Ok(())
    }

    /// Color planes without alpha.
    pub fn rgb(&self) -> RgbImage {
        RgbImage {
            width: self.width,
            height: self.height,
            data: self.rgba.iter().map(|p| [p[0], p[1], p[2]]).collect(),
        }
    }

    pub fn hash_hex(&self) -> String {
        let mut h = Sha256::new();
        for px in &self.rgba {
            for c in px {
                h.update(c.to_le_bytes());
            }
        }
        for d in &self.depth {
            h.update(d.to_le_bytes());
        }
        hex16(&h.finalize())
    }
}

const RASTER_MAGIC: &[u8; 8] = b"TLRASTER";
const RASTER_VERSION: u32 = 1;

/// Named single-precision channel planes of equal size.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterDump {
    pub width: usize,
    pub height: usize,
    pub channels: Vec<(String, Vec<f32>)>,
}

impl RasterDump {
    pub fn from_layer(layer: &LayerImage) -> Self {
        let plane = |c: usize| layer.rgba.iter().map(|p| p[c]).collect::<Vec<_>>();
        Self {
            width: layer.width,
            height: layer.height,
            channels: vec![
                ("r".into(), plane(0)),
                ("g".into(), plane(1)),
                ("b".into(), plane(2)),
                ("a".into(), plane(3)),
                ("depth".into(), layer.depth.clone()),
            ],
        }
    }

    pub fn from_rgb(img: &RgbImage) -> Self {
        let plane = |c: usize| img.data.iter().map(|p| p[c]).collect::<Vec<_>>();
        Self {
            width: img.width,
            height: img.height,
            channels: vec![
                ("r".into(), plane(0)),
                ("g".into(), plane(1)),
                ("b".into(), plane(2)),
            ],
        }
    }

    pub fn channel(&self, name: &str) -> Option<&[f32]> {
        self.channels
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    /// Layout: magic `TLRASTER`, then little-endian `u32` version, width, height,
    /// channel count; per channel a `u8` name length and UTF-8 name; then each
    /// plane as `width * height` row-major `f32` values.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(RASTER_MAGIC)?;
        for v in [
            RASTER_VERSION,
            self.width as u32,
            self.height as u32,
            self.channels.len() as u32,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        for (name, _) in &self.channels {
            let b = name.as_bytes();
            if b.len() > u8::MAX as usize {
                return Err(Error::Codec("channel name too long".into()));
            }
            w.write_all(&[b.len() as u8])?;
            w.write_all(b)?;
        }
        for (name, plane) in &self.channels {
            if plane.len() != self.width * self.height {
                return Err(Error::Structural(format!("channel {name} has wrong size")));
            }
            for v in plane {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != RASTER_MAGIC {
            return Err(Error::Codec("not a raster dump".into()));
        }
        let mut u32s = [0u32; 4];
        for v in &mut u32s {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            *v = u32::from_le_bytes(b);
        }
        let [version, width, height, count] = u32s;
        if version != RASTER_VERSION {
            return Err(Error::Codec(format!("unsupported raster version {version}")));
        }
        let (width, height) = (width as usize, height as usize);
        let mut names = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let mut len = [0u8; 1];
            r.read_exact(&mut len)?;
            let mut name = vec![0u8; len[0] as usize];
            r.read_exact(&mut name)?;
            names.push(String::from_utf8(name).map_err(|e| Error::Codec(e.to_string()))?);
        }
        let mut channels = Vec::with_capacity(names.len());
        let mut buf = vec![0u8; width * height * 4];
        for name in names {
            r.read_exact(&mut buf)?;
            let plane = buf
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            channels.push((name, plane));
        }
        Ok(Self {
            width,
            height,
            channels,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Intrinsics, Rigid};

    #[test]
    fn dump_round_trip() {
        let cam = Camera::new(Intrinsics::centered(10.0, 4, 3), Rigid::identity());
        let mut layer = LayerImage::empty(cam);
        layer.rgba[5] = [0.25, 0.5, 0.75, 1.0];
        layer.depth[5] = 0.7;
        let dump = RasterDump::from_layer(&layer);
        let mut bytes = Vec::new();
        dump.write_to(&mut bytes).unwrap();
        let back = RasterDump::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back, dump);
        assert_eq!(back.channel("depth").unwrap()[5], 0.7);
        assert_eq!(back.channel("depth").unwrap()[0], NO_DEPTH);
    }

    #[test]
    fn dump_rejects_garbage() {
        assert!(RasterDump::read_from(&b"NOTARASTER000000"[..]).is_err());
    }

    #[test]
    fn validate_catches_bad_alpha() {
        let cam = Camera::new(Intrinsics::centered(10.0, 2, 2), Rigid::identity());
        let mut layer = LayerImage::empty(cam);
        layer.rgba[0][3] = 1.5;
        assert!(matches!(layer.validate(), Err(Error::Validation(_))));
        layer.rgba[0][3] = 1.0;
        layer.depth[1] = -1.0;
        assert!(layer.validate().is_err());
    }

    #[test]
    fn png_encodes() {
        let img = RgbImage::new(8, 4, [0.5, 0.2, 0.1]);
        let png = img.to_png().unwrap();
        assert_eq!(&png[1..4], b"PNG");
    }
}
