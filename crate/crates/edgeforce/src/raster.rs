//! Grayscale raster storage, PNM (PGM/PPM) encoding, region masks and
//! synthetic shape generation.
//!
//! Coordinate convention used throughout the crate: `x` is the column index
//! increasing rightward, `y` is the row index increasing downward, origin at
//! the top-left pixel. Pixels are stored row-major.

use thiserror::Error;

/// Smallest image edge the analysis accepts; the 3x3 gradient stencil needs
/// a full neighborhood around at least one pixel.
pub const MIN_DIMENSION: u32 = 3;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image is {width}x{height}; both dimensions must be at least {MIN_DIMENSION}")]
    TooSmall { width: u32, height: u32 },
    #[error("pixel buffer holds {got} values, expected {expected} for {width}x{height}")]
    LengthMismatch {
        width: u32,
        height: u32,
        expected: usize,
        got: usize,
    },
}

/// 8-bit single-channel raster, the analysis input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl GrayImage {
    /// Creates a `width` x `height` image filled with `fill`.
    pub fn new(width: u32, height: u32, fill: u8) -> Result<Self, ImageError> {
        if width < MIN_DIMENSION || height < MIN_DIMENSION {
            return Err(ImageError::TooSmall { width, height });
        }
        Ok(Self {
            width,
            height,
            pixels: vec![fill; width as usize * height as usize],
        })
    }

    /// Wraps an existing row-major pixel buffer.
    pub fn from_pixels(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if width < MIN_DIMENSION || height < MIN_DIMENSION {
            return Err(ImageError::TooSmall { width, height });
        }
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(ImageError::LengthMismatch {
                width,
                height,
                expected,
                got: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        assert!(x < self.width && y < self.height);
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: u8) {
        assert!(x < self.width && y < self.height);
        self.pixels[y as usize * self.width as usize + x as usize] = value;
    }

    /// Transposed copy (rows become columns). Used by gradient covariance tests.
    pub fn transposed(&self) -> GrayImage {
        let mut out = vec![0u8; self.pixels.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                out[x as usize * self.height as usize + y as usize] = self.get(x, y);
            }
        }
        GrayImage {
            width: self.height,
            height: self.width,
            pixels: out,
        }
    }
}

/// Interleaved 8-bit RGB raster produced by the arrow renderer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32, fill: [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity(width as usize * height as usize * 3);
        for _ in 0..width as usize * height as usize {
            pixels.extend_from_slice(&fill);
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        if x < self.width && y < self.height {
            let i = (y as usize * self.width as usize + x as usize) * 3;
            self.pixels[i..i + 3].copy_from_slice(&rgb);
        }
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        assert!(x < self.width && y < self.height);
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }
}

/// PNM decoding failure; `offset` is the byte position the problem was
/// detected at.
#[derive(Debug, Error)]
pub enum PnmError {
    #[error("bad magic at byte {offset}: expected \"P2\" or \"P5\"")]
    BadMagic { offset: usize },
    #[error("malformed header at byte {offset}: {what}")]
    Header { offset: usize, what: String },
    #[error("maxval {maxval} at byte {offset} exceeds 255")]
    MaxvalTooLarge { offset: usize, maxval: u32 },
    #[error("dimensions {width}x{height} at byte {offset} are below the {MIN_DIMENSION}x{MIN_DIMENSION} minimum")]
    TooSmall {
        offset: usize,
        width: u32,
        height: u32,
    },
    #[error("truncated pixel data at byte {offset}")]
    Truncated { offset: usize },
    #[error("pixel value {value} at byte {offset} exceeds maxval {maxval}")]
    ValueRange {
        offset: usize,
        value: u32,
        maxval: u32,
    },
}

struct Tokenizer<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokenizer<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    /// Skips whitespace and `#` comments (comments run to end of line).
    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    /// Reads one unsigned decimal token.
    fn read_number(&mut self, what: &str) -> Result<(u32, usize), PnmError> {
        self.skip_separators();
        let start = self.pos;
        let mut value: u64 = 0;
        let mut digits = 0;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            value = value * 10 + u64::from(self.bytes[self.pos] - b'0');
            if value > u64::from(u32::MAX) {
                return Err(PnmError::Header {
                    offset: start,
                    what: format!("{what} out of range"),
                });
            }
            self.pos += 1;
            digits += 1;
        }
        if digits == 0 {
            return Err(PnmError::Header {
                offset: self.pos,
                what: format!("expected {what}"),
            });
        }
        Ok((value as u32, start))
    }
}

/// Decodes a PGM image (ASCII `P2` or binary `P5`, maxval up to 255).
///
/// Intensities are loaded bit-exactly as stored; no maxval rescaling is
/// applied. The two encodings of one raster decode to identical images.
pub fn load_pgm(bytes: &[u8]) -> Result<GrayImage, PnmError> {
    let mut tok = Tokenizer::new(bytes);
    if bytes.len() < 2 {
        return Err(PnmError::BadMagic { offset: 0 });
    }
    let binary = match &bytes[0..2] {
        b"P2" => false,
        b"P5" => true,
        _ => return Err(PnmError::BadMagic { offset: 0 }),
    };
    tok.pos = 2;

    let (width, woff) = tok.read_number("width")?;
    let (height, _) = tok.read_number("height")?;
    if width < MIN_DIMENSION || height < MIN_DIMENSION {
        return Err(PnmError::TooSmall {
            offset: woff,
            width,
            height,
        });
    }
    let (maxval, moff) = tok.read_number("maxval")?;
    if maxval > 255 {
        return Err(PnmError::MaxvalTooLarge {
            offset: moff,
            maxval,
        });
    }
    if maxval == 0 {
        return Err(PnmError::Header {
            offset: moff,
            what: "maxval must be positive".into(),
        });
    }

    let count = width as usize * height as usize;
    let mut pixels = Vec::with_capacity(count);
    if binary {
        // Exactly one whitespace byte separates the header from raw data.
        if tok.pos >= bytes.len() || !bytes[tok.pos].is_ascii_whitespace() {
            return Err(PnmError::Header {
                offset: tok.pos,
                what: "expected single whitespace before binary data".into(),
            });
        }
        tok.pos += 1;
        if bytes.len() - tok.pos < count {
            return Err(PnmError::Truncated { offset: bytes.len() });
        }
        for i in 0..count {
            let v = bytes[tok.pos + i];
            if u32::from(v) > maxval {
                return Err(PnmError::ValueRange {
                    offset: tok.pos + i,
                    value: u32::from(v),
                    maxval,
                });
            }
            pixels.push(v);
        }
    } else {
        for _ in 0..count {
            tok.skip_separators();
            if tok.pos >= bytes.len() {
                return Err(PnmError::Truncated { offset: tok.pos });
            }
            let (v, voff) = tok.read_number("pixel value")?;
            if v > maxval {
                return Err(PnmError::ValueRange {
                    offset: voff,
                    value: v,
                    maxval,
                });
            }
            pixels.push(v as u8);
        }
    }
    Ok(GrayImage {
        width,
        height,
        pixels,
    })
}

/// Encodes a grayscale image as binary PGM (`P5`, maxval 255).
///
/// `load_pgm(save_pgm(g))` reproduces `g` bit-exactly.
pub fn save_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.pixels);
    out
}

/// Encodes an RGB raster as binary PPM (`P6`, maxval 255).
pub fn save_ppm(image: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.pixels);
    out
}

#[derive(Debug, Error)]
pub enum MaskError {
    #[error("rectangle ({x0},{y0})-({x1},{y1}) is not ordered or lies outside {width}x{height}")]
    RectOutOfBounds {
        x0: u32,
        y0: u32,
        x1: u32,
        y1: u32,
        width: u32,
        height: u32,
    },
    #[error("mask is {mask_width}x{mask_height} but the image is {width}x{height}")]
    DimensionMismatch {
        mask_width: u32,
        mask_height: u32,
        width: u32,
        height: u32,
    },
}

/// Restriction of which target elements a force computation reports.
///
/// Either an inclusive pixel rectangle or a bitmap the size of the target
/// image where nonzero marks included pixels.
#[derive(Debug, Clone)]
pub enum RegionMask {
    Rect { x0: u32, y0: u32, x1: u32, y1: u32 },
    Bitmap {
        width: u32,
        height: u32,
        included: Vec<bool>,
    },
}

impl RegionMask {
    pub fn rect(x0: u32, y0: u32, x1: u32, y1: u32) -> Self {
        RegionMask::Rect { x0, y0, x1, y1 }
    }

    /// Builds a bitmap mask from a grayscale image; nonzero means included.
    pub fn from_bitmap(image: &GrayImage) -> Self {
        RegionMask::Bitmap {
            width: image.width,
            height: image.height,
            included: image.pixels.iter().map(|&p| p != 0).collect(),
        }
    }

    /// Checks the mask against the dimensions of the image it restricts.
    pub fn validate(&self, width: u32, height: u32) -> Result<(), MaskError> {
        match *self {
            RegionMask::Rect { x0, y0, x1, y1 } => {
                if x0 > x1 || y0 > y1 || x1 >= width || y1 >= height {
                    Err(MaskError::RectOutOfBounds {
                        x0,
                        y0,
                        x1,
                        y1,
                        width,
                        height,
                    })
                } else {
                    Ok(())
                }
            }
            RegionMask::Bitmap {
                width: mw,
                height: mh,
                ..
            } => {
                if mw != width || mh != height {
                    Err(MaskError::DimensionMismatch {
                        mask_width: mw,
                        mask_height: mh,
                        width,
                        height,
                    })
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        match *self {
            RegionMask::Rect { x0, y0, x1, y1 } => x >= x0 && x <= x1 && y >= y0 && y <= y1,
            RegionMask::Bitmap {
                width,
                height,
                ref included,
            } => x < width && y < height && included[y as usize * width as usize + x as usize],
        }
    }
}

#[derive(Debug, Error)]
pub enum ShapeError {
    #[error("shape exceeds the {width}x{height} canvas: {what}")]
    OutOfBounds {
        width: u32,
        height: u32,
        what: String,
    },
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Geometry of a synthetic test shape.
///
/// Filled shapes paint their interior with the foreground intensity; the
/// ellipse interior test is `((x-cx)/rx)^2 + ((y-cy)/ry)^2 <= 1` evaluated
/// at pixel centers.
#[derive(Debug, Clone)]
pub enum ShapeSpec {
    /// Filled axis-aligned rectangle with inclusive pixel bounds.
    Rectangle { x0: u32, y0: u32, x1: u32, y1: u32 },
    /// Filled ellipse; `rx`/`ry` are the semi-axes in pixels.
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64 },
    /// Filled circle; equivalent to an ellipse with `rx = ry = r`.
    Circle { cx: f64, cy: f64, r: f64 },
    /// One-pixel-wide straight line segment.
    Line { x0: u32, y0: u32, x1: u32, y1: u32 },
    /// Filled simple polygon (even-odd rule at pixel centers).
    Polygon { vertices: Vec<(f64, f64)> },
}

/// Renders a shape onto a fresh canvas. Deterministic in its inputs.
pub fn make_shape(
    shape: &ShapeSpec,
    width: u32,
    height: u32,
    foreground: u8,
    background: u8,
) -> Result<GrayImage, ShapeError> {
    check_bounds(shape, width, height)?;
    let mut img = GrayImage::new(width, height, background)?;
    match shape {
        ShapeSpec::Rectangle { x0, y0, x1, y1 } => {
            for y in *y0..=*y1 {
                for x in *x0..=*x1 {
                    img.set(x, y, foreground);
                }
            }
        }
        ShapeSpec::Ellipse { cx, cy, rx, ry } => {
            fill_ellipse(&mut img, *cx, *cy, *rx, *ry, foreground);
        }
        ShapeSpec::Circle { cx, cy, r } => {
            fill_ellipse(&mut img, *cx, *cy, *r, *r, foreground);
        }
        ShapeSpec::Line { x0, y0, x1, y1 } => {
            draw_line_u8(&mut img, *x0, *y0, *x1, *y1, foreground);
        }
        ShapeSpec::Polygon { vertices } => {
            for y in 0..height {
                for x in 0..width {
                    if point_in_polygon(x as f64, y as f64, vertices) {
                        img.set(x, y, foreground);
                    }
                }
            }
        }
    }
    Ok(img)
}

fn check_bounds(shape: &ShapeSpec, width: u32, height: u32) -> Result<(), ShapeError> {
    let oob = |what: String| ShapeError::OutOfBounds {
        width,
        height,
        what,
    };
    let max_x = (width - 1) as f64;
    let max_y = (height - 1) as f64;
    match shape {
        ShapeSpec::Rectangle { x0, y0, x1, y1 } | ShapeSpec::Line { x0, y0, x1, y1 } => {
            if x0 > x1 || y0 > y1 || *x1 >= width || *y1 >= height {
                return Err(oob(format!("bounds ({x0},{y0})-({x1},{y1})")));
            }
        }
        ShapeSpec::Ellipse { cx, cy, rx, ry } => {
            if *rx < 0.0
                || *ry < 0.0
                || cx - rx < 0.0
                || cx + rx > max_x
                || cy - ry < 0.0
                || cy + ry > max_y
            {
                return Err(oob(format!("ellipse center ({cx},{cy}) radii ({rx},{ry})")));
            }
        }
        ShapeSpec::Circle { cx, cy, r } => {
            if *r < 0.0 || cx - r < 0.0 || cx + r > max_x || cy - r < 0.0 || cy + r > max_y {
                return Err(oob(format!("circle center ({cx},{cy}) radius {r}")));
            }
        }
        ShapeSpec::Polygon { vertices } => {
            if vertices.len() < 3 {
                return Err(oob("polygon needs at least 3 vertices".into()));
            }
            for &(vx, vy) in vertices {
                if vx < 0.0 || vx > max_x || vy < 0.0 || vy > max_y {
                    return Err(oob(format!("vertex ({vx},{vy})")));
                }
            }
        }
    }
    Ok(())
}

fn fill_ellipse(img: &mut GrayImage, cx: f64, cy: f64, rx: f64, ry: f64, fg: u8) {
    for y in 0..img.height() {
        for x in 0..img.width() {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            // Degenerate axes collapse to an exact coordinate match.
            let tx = if rx == 0.0 {
                if dx == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (dx / rx) * (dx / rx)
            };
            let ty = if ry == 0.0 {
                if dy == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (dy / ry) * (dy / ry)
            };
            if tx + ty <= 1.0 {
                img.set(x, y, fg);
            }
        }
    }
}

fn draw_line_u8(img: &mut GrayImage, x0: u32, y0: u32, x1: u32, y1: u32, fg: u8) {
    // Bresenham over inclusive integer endpoints.
    let (mut x, mut y) = (x0 as i64, y0 as i64);
    let (x1, y1) = (x1 as i64, y1 as i64);
    let dx = (x1 - x).abs();
    let dy = -(y1 - y).abs();
    let sx = if x < x1 { 1 } else { -1 };
    let sy = if y < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        img.set(x as u32, y as u32, fg);
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

fn point_in_polygon(px: f64, py: f64, vertices: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let n = vertices.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = vertices[i];
        let (xj, yj) = vertices[j];
        if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}
