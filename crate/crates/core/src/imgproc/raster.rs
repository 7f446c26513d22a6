use serde::{Deserialize, Serialize};

use super::ImageError;

/// Row-major 8-bit raster with one (gray) or three (RGB) interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RasterImage {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidInput(format!(
                "zero-dimension image ({width}x{height})"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::InvalidInput(format!(
                "unsupported channel count {channels}"
            )));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(ImageError::InvalidInput(format!(
                "buffer holds {} bytes, expected {expected}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// A single-channel image filled with `value`.
    pub fn filled(width: u32, height: u32, value: u8) -> Result<Self, ImageError> {
        Self::new(width, height, 1, vec![value; width as usize * height as usize])
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

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Channel values of the pixel at `(x, y)`.
    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let c = self.channels as usize;
        let i = (y as usize * self.width as usize + x as usize) * c;
        &self.data[i..i + c]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, value: &[u8]) {
        let c = self.channels as usize;
        debug_assert_eq!(value.len(), c);
        let i = (y as usize * self.width as usize + x as usize) * c;
        self.data[i..i + c].copy_from_slice(value);
    }

    /// Extracts one channel as a single-channel image.
    pub fn channel(&self, index: usize) -> Result<RasterImage, ImageError> {
        let c = self.channels as usize;
        if index >= c {
            return Err(ImageError::InvalidInput(format!(
                "channel {index} out of range for {c}-channel image"
            )));
        }
        let data = self.data.iter().skip(index).step_by(c).copied().collect();
        RasterImage::new(self.width, self.height, 1, data)
    }

    /// Interleaves three equally sized single-channel planes.
    pub fn from_planes(planes: [&RasterImage; 3]) -> Result<RasterImage, ImageError> {
        let (w, h) = (planes[0].width, planes[0].height);
        for p in &planes {
            if p.channels != 1 || p.width != w || p.height != h {
                return Err(ImageError::InvalidInput(
                    "planes must be single-channel and share dimensions".into(),
                ));
            }
        }
        let mut data = Vec::with_capacity(planes[0].data.len() * 3);
        for i in 0..planes[0].data.len() {
            data.extend_from_slice(&[planes[0].data[i], planes[1].data[i], planes[2].data[i]]);
        }
        RasterImage::new(w, h, 3, data)
    }

    /// Replicates a gray image into three channels; RGB input is cloned.
    pub fn to_rgb(&self) -> RasterImage {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        RasterImage {
            width: self.width,
            height: self.height,
            channels: 3,
            data,
        }
    }
}

/// Per-pixel foreground mask. Serializes as 0 (background) / 255 (foreground).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: u32, height: u32, data: Vec<bool>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidInput(format!(
                "zero-dimension image ({width}x{height})"
            )));
        }
        if data.len() != width as usize * height as usize {
            return Err(ImageError::InvalidInput(format!(
                "mask holds {} pixels, expected {}",
                data.len(),
                width as usize * height as usize
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn empty(width: u32, height: u32) -> Result<Self, ImageError> {
        Self::new(width, height, vec![false; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.data[y as usize * self.width as usize + x as usize] = value;
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    /// True when every foreground pixel of `self` is also foreground in `other`.
    pub fn is_subset_of(&self, other: &BinaryImage) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    pub fn to_raster(&self) -> RasterImage {
        let data = self.data.iter().map(|&v| if v { 255 } else { 0 }).collect();
        RasterImage::new(self.width, self.height, 1, data).expect("dimensions already validated")
    }

    /// Reads a 0/255 plane back; any nonzero value counts as foreground.
    pub fn from_raster(img: &RasterImage) -> Result<Self, ImageError> {
        if img.channels() != 1 {
            return Err(ImageError::InvalidInput(
                "binary planes must be single-channel".into(),
            ));
        }
        Self::new(
            img.width(),
            img.height(),
            img.data().iter().map(|&v| v != 0).collect(),
        )
    }
}
