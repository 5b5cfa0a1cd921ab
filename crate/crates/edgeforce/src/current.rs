//! Significant-edge extraction and virtual current construction.
//!
//! Edge points survive a percent-of-max magnitude threshold followed by a
//! four-pair non-maximum suppression; their gradient vectors, rotated a
//! quarter turn, become the discrete current elements flowing along the
//! edge lines.

use thiserror::Error;

use crate::gradient::GradientField;
use crate::vec2::Vec2;

#[derive(Debug, Error)]
pub enum CurrentError {
    #[error("threshold percent {0} is outside [0, 100]")]
    PercentOutOfRange(f64),
    #[error("mask is {mask_width}x{mask_height} but the field is {width}x{height}")]
    DimensionMismatch {
        mask_width: u32,
        mask_height: u32,
        width: u32,
        height: u32,
    },
}

/// Plain boolean raster; output of the threshold stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl PixelMask {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        assert!(x < self.width && y < self.height);
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Significant edge points of one image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMap {
    width: u32,
    height: u32,
    flags: Vec<bool>,
}

impl EdgeMap {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        assert!(x < self.width && y < self.height);
        self.flags[y as usize * self.width as usize + x as usize]
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    /// Positions of flagged pixels in row-major (y, x) order.
    pub fn positions(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width;
        self.flags
            .iter()
            .enumerate()
            .filter(|(_, &f)| f)
            .map(move |(i, _)| ((i as u32) % w, (i as u32) / w))
    }

    /// Black/white image of the edge map (255 at edge points).
    pub fn to_image(&self) -> crate::raster::GrayImage {
        let pixels = self.flags.iter().map(|&f| if f { 255 } else { 0 }).collect();
        crate::raster::GrayImage::from_pixels(self.width, self.height, pixels)
            .expect("edge map dimensions match a valid image")
    }
}

/// One discrete virtual current element: the gradient at a significant edge
/// point rotated a quarter turn, anchored at that pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurrentElement {
    pub x: u32,
    pub y: u32,
    pub vector: Vec2,
}

/// The full set of current elements of one image, sorted by (y, x).
///
/// The sorted order is canonical; force accumulation downstream always
/// walks it in this order so results do not depend on execution strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentField {
    width: u32,
    height: u32,
    elements: Vec<CurrentElement>,
}

impl CurrentField {
    /// Assembles a field from already-sorted elements. Callers must supply
    /// canonical (y, x) order with at most one element per pixel.
    pub(crate) fn from_elements(
        width: u32,
        height: u32,
        elements: Vec<CurrentElement>,
    ) -> CurrentField {
        debug_assert!(elements
            .windows(2)
            .all(|w| (w[0].y, w[0].x) < (w[1].y, w[1].x)));
        CurrentField {
            width,
            height,
            elements,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn elements(&self) -> &[CurrentElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Copy with every element vector sign-flipped (the opposite rotation
    /// handedness).
    pub fn negated(&self) -> CurrentField {
        CurrentField {
            width: self.width,
            height: self.height,
            elements: self
                .elements
                .iter()
                .map(|e| CurrentElement {
                    x: e.x,
                    y: e.y,
                    vector: e.vector.negated(),
                })
                .collect(),
        }
    }
}

/// Marks pixels whose gradient magnitude strictly exceeds
/// `percent`% of the field's maximum magnitude.
///
/// An all-zero field produces an empty mask, as does `percent = 100`
/// (nothing exceeds the maximum strictly).
pub fn threshold_mask(field: &GradientField, percent: f64) -> Result<PixelMask, CurrentError> {
    if !(0.0..=100.0).contains(&percent) {
        return Err(CurrentError::PercentOutOfRange(percent));
    }
    let threshold = percent / 100.0 * field.max_magnitude();
    let w = field.width();
    let h = field.height();
    let mut bits = Vec::with_capacity(w as usize * h as usize);
    for y in 0..h {
        for x in 0..w {
            bits.push(field.magnitude(x, y) > threshold);
        }
    }
    Ok(PixelMask {
        width: w,
        height: h,
        bits,
    })
}

/// The four opposed neighbor pairs: {W,E}, {N,S}, {NW,SE}, {NE,SW}.
const NEIGHBOR_PAIRS: [[(i64, i64); 2]; 4] = [
    [(-1, 0), (1, 0)],
    [(0, -1), (0, 1)],
    [(-1, -1), (1, 1)],
    [(1, -1), (-1, 1)],
];

/// Thins the masked pixels to significant edge points.
///
/// A masked pixel is retained when it beats both neighbors in at least two
/// of the four direction pairs. Beating a neighbor means a strictly greater
/// gradient magnitude; an exactly equal magnitude is resolved toward the
/// pixel on the side the gradient points to, so the two-pixel ridge a sharp
/// intensity step produces keeps exactly its brighter flank. Out-of-bounds
/// neighbors count as magnitude zero.
pub fn nonmax_suppress(field: &GradientField, mask: &PixelMask) -> Result<EdgeMap, CurrentError> {
    let w = field.width();
    let h = field.height();
    if mask.width != w || mask.height != h {
        return Err(CurrentError::DimensionMismatch {
            mask_width: mask.width,
            mask_height: mask.height,
            width: w,
            height: h,
        });
    }
    let magnitude_at = |x: i64, y: i64| -> f64 {
        if x < 0 || y < 0 || x >= i64::from(w) || y >= i64::from(h) {
            0.0
        } else {
            field.magnitude(x as u32, y as u32)
        }
    };
    let mut flags = vec![false; w as usize * h as usize];
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let mag = field.magnitude(x, y);
            let grad = field.get(x, y);
            let beats = |dx: i64, dy: i64| -> bool {
                let nm = magnitude_at(i64::from(x) + dx, i64::from(y) + dy);
                if mag > nm {
                    return true;
                }
                // Tie: the displacement from the neighbor back to this pixel
                // is (-dx, -dy); the pixel downstream of the gradient wins.
                mag == nm && grad.x * (-dx as f64) + grad.y * (-dy as f64) > 0.0
            };
            let satisfied = NEIGHBOR_PAIRS
                .iter()
                .filter(|pair| beats(pair[0].0, pair[0].1) && beats(pair[1].0, pair[1].1))
                .count();
            if satisfied >= 2 {
                flags[y as usize * w as usize + x as usize] = true;
            }
        }
    }
    Ok(EdgeMap {
        width: w,
        height: h,
        flags,
    })
}

/// Rotates the gradient at every significant edge point a quarter turn into
/// a current element. Elements come out sorted by (y, x).
pub fn extract_currents(field: &GradientField, edges: &EdgeMap) -> CurrentField {
    debug_assert_eq!((field.width(), field.height()), (edges.width, edges.height));
    let mut elements = Vec::with_capacity(edges.count());
    for (x, y) in edges.positions() {
        let vector = field.get(x, y).rot90();
        debug_assert!(!vector.is_zero(), "edge point with zero gradient");
        elements.push(CurrentElement { x, y, vector });
    }
    CurrentField {
        width: edges.width,
        height: edges.height,
        elements,
    }
}

/// The eight compass directions used for display, in quantization order.
///
/// With y growing downward, `South` points visually down the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    East,
    Southeast,
    South,
    Southwest,
    West,
    Northwest,
    North,
    Northeast,
}

impl Direction {
    pub const ALL: [Direction; 8] = [
        Direction::East,
        Direction::Southeast,
        Direction::South,
        Direction::Southwest,
        Direction::West,
        Direction::Northwest,
        Direction::North,
        Direction::Northeast,
    ];

    pub fn index(self) -> usize {
        Direction::ALL.iter().position(|&d| d == self).unwrap()
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            Direction::East => "E",
            Direction::Southeast => "SE",
            Direction::South => "S",
            Direction::Southwest => "SW",
            Direction::West => "W",
            Direction::Northwest => "NW",
            Direction::North => "N",
            Direction::Northeast => "NE",
        }
    }

    /// Unit vector of the direction in image coordinates (y down).
    pub fn unit(self) -> Vec2 {
        const D: f64 = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Direction::East => Vec2::new(1.0, 0.0),
            Direction::Southeast => Vec2::new(D, D),
            Direction::South => Vec2::new(0.0, 1.0),
            Direction::Southwest => Vec2::new(-D, D),
            Direction::West => Vec2::new(-1.0, 0.0),
            Direction::Northwest => Vec2::new(-D, -D),
            Direction::North => Vec2::new(0.0, -1.0),
            Direction::Northeast => Vec2::new(D, -D),
        }
    }

    pub fn opposite(self) -> Direction {
        Direction::ALL[(self.index() + 4) % 8]
    }
}

/// Maps a nonzero vector into one of eight 45-degree sectors; sector
/// boundaries (odd multiples of 22.5 degrees) are assigned upward.
/// Returns `None` for the zero vector, whose direction is undefined.
pub fn quantize_direction(vector: Vec2) -> Option<Direction> {
    if vector.is_zero() {
        return None;
    }
    let mut theta = vector.y.atan2(vector.x).to_degrees();
    if theta < 0.0 {
        theta += 360.0;
    }
    let k = (((theta + 22.5) / 45.0).floor() as usize) % 8;
    Some(Direction::ALL[k])
}

/// Text grid of quantized element directions, one token per pixel;
/// `·` marks pixels without a current element.
pub fn direction_grid(field: &CurrentField) -> String {
    let mut cells =
        vec!["·"; field.width as usize * field.height as usize];
    for e in &field.elements {
        let dir = quantize_direction(e.vector).expect("current elements are nonzero");
        cells[e.y as usize * field.width as usize + e.x as usize] = dir.mnemonic();
    }
    let mut out = String::new();
    for y in 0..field.height as usize {
        let row = &cells[y * field.width as usize..(y + 1) * field.width as usize];
        let line: Vec<String> = row.iter().map(|c| format!("{c:<2}")).collect();
        out.push_str(line.join(" ").trim_end());
        out.push('\n');
    }
    out
}
