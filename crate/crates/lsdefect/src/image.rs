//! 8-bit single-channel raster, the unit of inspection.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};

/// An 8-bit grayscale image stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl GrayImage {
    /// Create an image filled with a constant gray level.
    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        GrayImage {
            width,
            height,
            data: vec![value; width as usize * height as usize],
        }
    }

    /// Wrap an existing row-major buffer.
    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::ImageFormat(format!(
                "buffer length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: u8) {
        self.data[y as usize * self.width as usize + x as usize] = value;
    }

    /// Raw row-major pixel buffer.
    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    /// One row of pixels.
    pub fn row(&self, y: u32) -> &[u8] {
        let w = self.width as usize;
        let off = y as usize * w;
        &self.data[off..off + w]
    }

    /// Mean gray level of each column.
    pub fn column_means(&self) -> Vec<f64> {
        let w = self.width as usize;
        let h = self.height as usize;
        let mut sums = vec![0u64; w];
        for y in 0..h {
            let row = &self.data[y * w..(y + 1) * w];
            for (s, &v) in sums.iter_mut().zip(row) {
                *s += v as u64;
            }
        }
        sums.iter().map(|&s| s as f64 / h as f64).collect()
    }

    /// 256-bin gray level histogram.
    pub fn histogram(&self) -> [u64; 256] {
        let mut hist = [0u64; 256];
        for &v in &self.data {
            hist[v as usize] += 1;
        }
        hist
    }

    /// Write as an 8-bit grayscale PNG.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut encoder = png::Encoder::new(BufWriter::new(file), self.width, self.height);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::ImageFormat(format!("{}: {e}", path.display())))?;
        writer
            .write_image_data(&self.data)
            .map_err(|e| Error::ImageFormat(format!("{}: {e}", path.display())))?;
        Ok(())
    }

    /// Read an 8-bit grayscale PNG.
    pub fn load_png(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let decoder = png::Decoder::new(BufReader::new(file));
        let mut reader = decoder
            .read_info()
            .map_err(|e| Error::ImageFormat(format!("{}: {e}", path.display())))?;
        let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(0)];
        let info = reader
            .next_frame(&mut buf)
            .map_err(|e| Error::ImageFormat(format!("{}: {e}", path.display())))?;
        if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
            return Err(Error::ImageFormat(format!(
                "{}: expected 8-bit grayscale, got {:?}/{:?}",
                path.display(),
                info.color_type,
                info.bit_depth
            )));
        }
        buf.truncate(info.buffer_size());
        GrayImage::from_raw(info.width, info.height, buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filled_and_accessors() {
        let mut img = GrayImage::filled(4, 3, 7);
        assert_eq!(img.width(), 4);
        assert_eq!(img.height(), 3);
        assert_eq!(img.get(3, 2), 7);
        img.set(1, 1, 200);
        assert_eq!(img.get(1, 1), 200);
        assert_eq!(img.row(1), &[7, 200, 7, 7]);
    }

    #[test]
    fn from_raw_rejects_bad_length() {
        assert!(GrayImage::from_raw(4, 4, vec![0; 15]).is_err());
    }

    #[test]
    fn column_means_of_stripes() {
        let mut img = GrayImage::filled(2, 4, 0);
        for y in 0..4 {
            img.set(1, y, 100);
        }
        assert_eq!(img.column_means(), vec![0.0, 100.0]);
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.png");
        let mut img = GrayImage::filled(5, 7, 30);
        img.set(2, 3, 250);
        img.save_png(&path).unwrap();
        let back = GrayImage::load_png(&path).unwrap();
        assert_eq!(back, img);
    }
}
