//! 8-bit raster buffers shared by the poisoning, metrics, and feature pipelines.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised when constructing an [`ImageBuffer`].
#[derive(Debug, Error)]
pub enum BufferError {
    #[error("unsupported channel count {0}; expected 1, 3, or 4")]
    BadChannelCount(u8),
    #[error("data length {got} does not match {width}x{height}x{channels}")]
    BadDataLength {
        got: usize,
        width: u32,
        height: u32,
        channels: u8,
    },
}

/// Row-major 8-bit image with 1 (gray), 3 (RGB), or 4 (RGBA) channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl ImageBuffer {
    /// Zero-filled buffer.
    pub fn new(width: u32, height: u32, channels: u8) -> Result<Self, BufferError> {
        check_channels(channels)?;
        Ok(Self {
            width,
            height,
            channels,
            data: vec![0; width as usize * height as usize * channels as usize],
        })
    }

    /// Wraps existing sample data; length must equal `width * height * channels`.
    pub fn from_vec(
        width: u32,
        height: u32,
        channels: u8,
        data: Vec<u8>,
    ) -> Result<Self, BufferError> {
        check_channels(channels)?;
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(BufferError::BadDataLength {
                got: data.len(),
                width,
                height,
                channels,
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
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

    /// Channels carrying color: 3 for RGBA (the alpha plane is not color), else all.
    pub fn color_channels(&self) -> u8 {
        if self.channels == 4 {
            3
        } else {
            self.channels
        }
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

    pub fn same_shape(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    #[inline]
    pub fn sample(&self, x: u32, y: u32, c: u8) -> u8 {
        self.data[self.index(x, y, c)]
    }

    #[inline]
    pub fn set_sample(&mut self, x: u32, y: u32, c: u8, value: u8) {
        let idx = self.index(x, y, c);
        self.data[idx] = value;
    }

    #[inline]
    fn index(&self, x: u32, y: u32, c: u8) -> usize {
        debug_assert!(x < self.width && y < self.height && c < self.channels);
        (y as usize * self.width as usize + x as usize) * self.channels as usize + c as usize
    }
}

fn check_channels(channels: u8) -> Result<(), BufferError> {
    match channels {
        1 | 3 | 4 => Ok(()),
        other => Err(BufferError::BadChannelCount(other)),
    }
}

/// Axis-aligned pixel rectangle, used for patch placement regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl Region {
    pub fn area(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    /// Fraction of a `w`x`h` image this region covers.
    pub fn area_fraction(&self, w: u32, h: u32) -> f64 {
        if w == 0 || h == 0 {
            return 0.0;
        }
        self.area() as f64 / (w as u64 * h as u64) as f64
    }

    /// Containment test for sub-pixel coordinates.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x as f64
            && x < (self.x + self.width) as f64
            && y >= self.y as f64
            && y < (self.y + self.height) as f64
    }

    pub fn fits_in(&self, w: u32, h: u32) -> bool {
        self.x.checked_add(self.width).is_some_and(|r| r <= w)
            && self.y.checked_add(self.height).is_some_and(|b| b <= h)
    }
}
