//! Linear HDR image buffer with PFM and PPM output.

use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("pixel ({x}, {y}) holds a non-finite or negative channel")]
    InvalidPixel { x: u32, y: u32 },
    #[error("malformed PFM: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Row-major RGB float image, top-left origin, linear values.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: u32,
    height: u32,
    pixels: Vec<[f32; 3]>,
}

impl Image {
    pub fn new(width: u32, height: u32) -> Self {
        Image { width, height, pixels: vec![[0.0; 3]; (width * height) as usize] }
    }

    pub fn from_rows(width: u32, height: u32, pixels: Vec<[f32; 3]>) -> Self {
        assert_eq!(pixels.len(), (width * height) as usize);
        Image { width, height, pixels }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixel(&self, x: u32, y: u32) -> [f32; 3] {
        self.pixels[(y * self.width + x) as usize]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, value: [f32; 3]) {
        self.pixels[(y * self.width + x) as usize] = value;
    }

    pub fn pixels(&self) -> &[[f32; 3]] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [[f32; 3]] {
        &mut self.pixels
    }

    fn validate(&self) -> Result<(), ImageError> {
        for (i, px) in self.pixels.iter().enumerate() {
            if px.iter().any(|c| !c.is_finite() || *c < 0.0) {
                return Err(ImageError::InvalidPixel {
                    x: i as u32 % self.width,
                    y: i as u32 / self.width,
                });
            }
        }
        Ok(())
    }

    /// PFM: header "PF\n<w> <h>\n-1.0\n", little-endian float32 RGB
    /// scanlines bottom-up.
    pub fn write_pfm(&self, out: &mut impl Write) -> Result<(), ImageError> {
        self.validate()?;
        write!(out, "PF\n{} {}\n-1.0\n", self.width, self.height)?;
        for y in (0..self.height).rev() {
            for x in 0..self.width {
                for c in self.pixel(x, y) {
                    out.write_all(&c.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_pfm(input: &mut impl BufRead) -> Result<Self, ImageError> {
        let mut header = String::new();
        for _ in 0..3 {
            let mut line = String::new();
            if input.read_line(&mut line)? == 0 {
                return Err(ImageError::Malformed("truncated header".into()));
            }
            header.push_str(&line);
        }
        let mut tokens = header.split_whitespace();
        match tokens.next() {
            Some("PF") => {}
            other => {
                return Err(ImageError::Malformed(format!(
                    "expected magic PF, found {other:?}"
                )))
            }
        }
        let parse = |t: Option<&str>, what: &str| -> Result<f64, ImageError> {
            t.ok_or_else(|| ImageError::Malformed(format!("missing {what}")))?
                .parse::<f64>()
                .map_err(|_| ImageError::Malformed(format!("bad {what}")))
        };
        let width = parse(tokens.next(), "width")? as u32;
        let height = parse(tokens.next(), "height")? as u32;
        let scale = parse(tokens.next(), "scale")?;
        if width == 0 || height == 0 {
            return Err(ImageError::Malformed("zero image dimension".into()));
        }
        if scale >= 0.0 {
            return Err(ImageError::Malformed(
                "big-endian PFM data is not supported".into(),
            ));
        }

        let mut img = Image::new(width, height);
        let mut buf = [0u8; 4];
        for y in (0..height).rev() {
            for x in 0..width {
                let mut px = [0f32; 3];
                for c in &mut px {
                    input.read_exact(&mut buf)?;
                    *c = f32::from_le_bytes(buf);
                }
                img.set_pixel(x, y, px);
            }
        }
        Ok(img)
    }

    /// PPM (P6, 8-bit): exposure multiply, optional Reinhard x/(1+x),
    /// gamma 1/2.2.
    pub fn write_ppm(
        &self,
        out: &mut impl Write,
        exposure: f64,
        tonemap: bool,
    ) -> Result<(), ImageError> {
        self.validate()?;
        write!(out, "P6\n{} {}\n255\n", self.width, self.height)?;
        for px in &self.pixels {
            for c in px {
                let mut v = *c as f64 * exposure;
                if tonemap {
                    v = v / (1.0 + v);
                }
                let byte = (v.clamp(0.0, 1.0).powf(1.0 / 2.2) * 255.0).round() as u8;
                out.write_all(&[byte])?;
            }
        }
        Ok(())
    }

    /// Relative RMS difference against `other` over pixels whose reference
    /// luminance exceeds `floor` times the maximum.
    pub fn relative_rms(&self, reference: &Image, floor: f64) -> f64 {
        assert_eq!(self.width, reference.width);
        assert_eq!(self.height, reference.height);
        let lum = |p: [f32; 3]| 0.2126 * p[0] as f64 + 0.7152 * p[1] as f64 + 0.0722 * p[2] as f64;
        let max_l = reference.pixels.iter().map(|p| lum(*p)).fold(0.0, f64::max);
        let cutoff = floor * max_l;
        let mut sum = 0.0;
        let mut count = 0u64;
        for (a, b) in self.pixels.iter().zip(&reference.pixels) {
            let lb = lum(*b);
            if lb <= cutoff {
                continue;
            }
            let rel = (lum(*a) - lb) / lb;
            sum += rel * rel;
            count += 1;
        }
        if count == 0 {
            0.0
        } else {
            (sum / count as f64).sqrt()
        }
    }
}
