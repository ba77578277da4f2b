use std::path::Path;

use image::{DynamicImage, GrayImage, RgbImage};

use super::{BBox, RasterError};

/// Row-major 8-bit image with 1 (gray) or 3 (RGB) interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32, channels: u8) -> Result<Self, RasterError> {
        Self::from_raw(width, height, channels, vec![0; width as usize * height as usize * channels as usize])
    }

    pub fn from_raw(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self, RasterError> {
        if channels != 1 && channels != 3 {
            return Err(RasterError::UnsupportedChannels(channels));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(RasterError::BufferLength { expected, actual: data.len() });
        }
        Ok(Self { width, height, channels, data })
    }

    /// Builds an image by evaluating `f(x, y, channel)` for every sample.
    pub fn from_fn(width: u32, height: u32, channels: u8, mut f: impl FnMut(u32, u32, u8) -> u8) -> Result<Self, RasterError> {
        let mut data = Vec::with_capacity(width as usize * height as usize * channels as usize);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::from_raw(width, height, channels, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    pub fn same_shape(&self, other: &ImageBuffer) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    #[inline]
    fn offset(&self, x: u32, y: u32, c: u8) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels as usize + c as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, c: u8) -> u8 {
        self.data[self.offset(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, c: u8, value: u8) {
        let i = self.offset(x, y, c);
        self.data[i] = value;
    }

    /// Sample as a float in [0, 1].
    #[inline]
    pub fn unit(&self, x: u32, y: u32, c: u8) -> f64 {
        self.get(x, y, c) as f64 / 255.0
    }

    /// Whole buffer as floats in [0, 1], same layout as [`data`](Self::data).
    pub fn to_unit_vec(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64 / 255.0).collect()
    }

    /// Copies the inclusive rectangle `rect` into a new buffer.
    pub fn crop(&self, rect: BBox) -> ImageBuffer {
        let w = rect.width();
        let h = rect.height();
        let ch = self.channels as usize;
        let mut data = Vec::with_capacity(w as usize * h as usize * ch);
        for y in rect.y0..=rect.y1 {
            let start = self.offset(rect.x0, y, 0);
            data.extend_from_slice(&self.data[start..start + w as usize * ch]);
        }
        ImageBuffer { width: w, height: h, channels: self.channels, data }
    }

    /// Writes `patch` with its top-left corner at `(x0, y0)`.
    pub fn paste(&mut self, patch: &ImageBuffer, x0: u32, y0: u32) {
        assert_eq!(patch.channels, self.channels);
        assert!(x0 + patch.width <= self.width && y0 + patch.height <= self.height);
        let row = patch.width as usize * patch.channels as usize;
        for y in 0..patch.height {
            let dst = self.offset(x0, y0 + y, 0);
            let src = y as usize * row;
            self.data[dst..dst + row].copy_from_slice(&patch.data[src..src + row]);
        }
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self, RasterError> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|e| RasterError::Image { path: path.display().to_string(), source: e })?;
        Ok(match img {
            DynamicImage::ImageLuma8(g) => {
                let (w, h) = g.dimensions();
                Self { width: w, height: h, channels: 1, data: g.into_raw() }
            }
            other => {
                let rgb = other.into_rgb8();
                let (w, h) = rgb.dimensions();
                Self { width: w, height: h, channels: 3, data: rgb.into_raw() }
            }
        })
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), RasterError> {
        let path = path.as_ref();
        let res = match self.channels {
            1 => GrayImage::from_raw(self.width, self.height, self.data.clone())
                .expect("length checked at construction")
                .save_with_format(path, image::ImageFormat::Png),
            _ => RgbImage::from_raw(self.width, self.height, self.data.clone())
                .expect("length checked at construction")
                .save_with_format(path, image::ImageFormat::Png),
        };
        res.map_err(|e| RasterError::Image { path: path.display().to_string(), source: e })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(ImageBuffer::new(2, 2, 2), Err(RasterError::UnsupportedChannels(2))));
        assert!(matches!(
            ImageBuffer::from_raw(2, 2, 3, vec![0; 11]),
            Err(RasterError::BufferLength { expected: 12, actual: 11 })
        ));
    }

    #[test]
    fn png_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let rgb = ImageBuffer::from_fn(7, 5, 3, |x, y, c| (x * 37 + y * 11 + c as u32 * 101) as u8).unwrap();
        let gray = ImageBuffer::from_fn(7, 5, 1, |x, y, _| (x * y) as u8).unwrap();
        rgb.save_png(dir.path().join("a.png")).unwrap();
        gray.save_png(dir.path().join("b.png")).unwrap();
        assert_eq!(ImageBuffer::load_png(dir.path().join("a.png")).unwrap(), rgb);
        assert_eq!(ImageBuffer::load_png(dir.path().join("b.png")).unwrap(), gray);
    }

    #[test]
    fn crop_then_paste_restores() {
        let img = ImageBuffer::from_fn(9, 6, 3, |x, y, c| (x + 10 * y + 100 * c as u32) as u8).unwrap();
        let rect = BBox { x0: 2, y0: 1, x1: 5, y1: 4 };
        let patch = img.crop(rect);
        assert_eq!((patch.width(), patch.height()), (4, 4));
        assert_eq!(patch.get(0, 0, 1), img.get(2, 1, 1));
        let mut blank = ImageBuffer::new(9, 6, 3).unwrap();
        blank.paste(&patch, 2, 1);
        assert_eq!(blank.get(5, 4, 2), img.get(5, 4, 2));
        assert_eq!(blank.get(6, 4, 2), 0);
    }

    #[test]
    fn unit_view_in_range() {
        let img = ImageBuffer::from_raw(1, 1, 3, vec![0, 128, 255]).unwrap();
        assert_eq!(img.to_unit_vec(), vec![0.0, 128.0 / 255.0, 1.0]);
        assert_eq!(img.unit(0, 0, 2), 1.0);
    }
}
