//! Per-pixel image gradient estimation with the 3x3 Sobel operator.

use crate::raster::GrayImage;
use crate::vec2::Vec2;

/// Dense field of per-pixel intensity gradients.
///
/// Interior pixels hold the unnormalized Sobel response oriented toward
/// increasing intensity (`gy` positive where intensity increases downward).
/// Border pixels always carry (0, 0): the stencil is undefined there and no
/// padding is invented.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    width: u32,
    height: u32,
    vectors: Vec<Vec2>,
}

impl GradientField {
    pub(crate) fn from_vectors(width: u32, height: u32, vectors: Vec<Vec2>) -> Self {
        assert_eq!(vectors.len(), width as usize * height as usize);
        Self {
            width,
            height,
            vectors,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Vec2 {
        assert!(x < self.width && y < self.height);
        self.vectors[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn magnitude(&self, x: u32, y: u32) -> f64 {
        self.get(x, y).norm()
    }

    /// Largest gradient magnitude over all pixels (0 for a constant image).
    pub fn max_magnitude(&self) -> f64 {
        self.vectors.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Magnitude map rescaled so the maximum maps to 255; the debug dump
    /// format exposed by the command line.
    pub fn magnitude_image(&self) -> GrayImage {
        let max = self.max_magnitude();
        let mut pixels = Vec::with_capacity(self.vectors.len());
        for v in &self.vectors {
            let value = if max > 0.0 {
                (v.norm() / max * 255.0).round() as u8
            } else {
                0
            };
            pixels.push(value);
        }
        GrayImage::from_pixels(self.width, self.height, pixels)
            .expect("field dimensions match a valid image")
    }
}

/// Estimates the gradient of `image` with the classic unnormalized Sobel
/// kernels, correlation orientation:
///
/// ```text
/// gx: [-1 0 1]    gy: [-1 -2 -1]
///     [-2 0 2]        [ 0  0  0]
///     [-1 0 1]        [ 1  2  1]
/// ```
pub fn sobel(image: &GrayImage) -> GradientField {
    let w = image.width();
    let h = image.height();
    let mut vectors = vec![Vec2::ZERO; w as usize * h as usize];
    let px = |x: u32, y: u32| -> i32 { i32::from(image.get(x, y)) };
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let gx = (px(x + 1, y - 1) - px(x - 1, y - 1))
                + 2 * (px(x + 1, y) - px(x - 1, y))
                + (px(x + 1, y + 1) - px(x - 1, y + 1));
            let gy = (px(x - 1, y + 1) - px(x - 1, y - 1))
                + 2 * (px(x, y + 1) - px(x, y - 1))
                + (px(x + 1, y + 1) - px(x + 1, y - 1));
            vectors[y as usize * w as usize + x as usize] =
                Vec2::new(f64::from(gx), f64::from(gy));
        }
    }
    GradientField::from_vectors(w, h, vectors)
}
