//! Binary netpbm codecs: PGM (`P5`), PPM (`P6`) and PBM (`P4`).
//!
//! Only maxval 255 is supported. Writers emit the canonical header
//! `P5\n<width> <height>\n255\n` (PBM omits the maxval line), so any file in
//! that form survives a load/save round trip byte for byte.
//!
//! PBM bit 1 marks a known pixel.

use crate::error::{Error, Result};
use crate::image::{Image, Mask, SoftMask};

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        HeaderReader { bytes, pos: 0 }
    }

    fn magic(&mut self) -> Result<[u8; 2]> {
        if self.bytes.len() < 2 {
            return Err(Error::parse(self.bytes.len(), "missing magic number"));
        }
        self.pos = 2;
        Ok([self.bytes[0], self.bytes[1]])
    }

    /// Skips whitespace and `#` comments, then reads one decimal field.
    fn number(&mut self, what: &str) -> Result<usize> {
        let mut saw_space = false;
        loop {
            match self.bytes.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => {
                    saw_space = true;
                    self.pos += 1;
                }
                Some(b'#') => {
                    while let Some(&b) = self.bytes.get(self.pos) {
                        self.pos += 1;
                        if b == b'\n' || b == b'\r' {
                            break;
                        }
                    }
                    saw_space = true;
                }
                Some(_) => break,
                None => {
                    return Err(Error::parse(
                        self.pos,
                        format!("truncated header, expected {what}"),
                    ))
                }
            }
        }
        if !saw_space {
            return Err(Error::parse(
                self.pos,
                format!("expected whitespace before {what}"),
            ));
        }
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::parse(start, format!("expected decimal {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(start, format!("{what} does not fit in usize")))
    }

    /// Consumes the single whitespace byte that separates header and payload.
    fn payload(mut self, len: usize) -> Result<&'a [u8]> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => self.pos += 1,
            Some(_) => return Err(Error::parse(self.pos, "expected whitespace after header")),
            None => return Err(Error::parse(self.pos, "truncated header")),
        }
        let available = self.bytes.len() - self.pos;
        if available < len {
            return Err(Error::parse(
                self.bytes.len(),
                format!("truncated payload: expected {len} bytes, found {available}"),
            ));
        }
        Ok(&self.bytes[self.pos..self.pos + len])
    }
}

fn dimensions(reader: &mut HeaderReader) -> Result<(usize, usize)> {
    let offset = reader.pos;
    let width = reader.number("width")?;
    let height = reader.number("height")?;
    if width == 0 || height == 0 {
        return Err(Error::parse(
            offset,
            format!("degenerate size {width}x{height}"),
        ));
    }
    Ok((width, height))
}

/// Decodes a binary PGM or PPM with maxval 255.
pub fn load_pnm(bytes: &[u8]) -> Result<Image> {
    let mut reader = HeaderReader::new(bytes);
    let channels = match &reader.magic()? {
        b"P5" => 1,
        b"P6" => 3,
        other => {
            return Err(Error::parse(
                0,
                format!("unsupported magic {:?}", String::from_utf8_lossy(other)),
            ))
        }
    };
    let (width, height) = dimensions(&mut reader)?;
    let maxval_offset = reader.pos;
    let maxval = reader.number("maxval")?;
    if maxval != 255 {
        return Err(Error::parse(
            maxval_offset,
            format!("unsupported maxval {maxval}, only 255 is accepted"),
        ));
    }
    let n = width * height;
    let payload = reader.payload(n * channels)?;

    // interleaved samples to planar channels
    let mut data = vec![0.0; n * channels];
    for (i, px) in payload.chunks_exact(channels).enumerate() {
        for (c, &v) in px.iter().enumerate() {
            data[c * n + i] = f64::from(v) / 255.0;
        }
    }
    Image::new(width, height, channels, data)
}

/// Quantises one intensity to 8 bits, rounding half up.
pub fn quantise(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Encodes an image as binary PGM (1 channel) or PPM (3 channels).
pub fn save_pnm(img: &Image) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    let n = img.pixel_count();
    out.reserve(n * img.channels());
    for i in 0..n {
        for c in 0..img.channels() {
            out.push(quantise(img.data()[c * n + i]));
        }
    }
    out
}

/// Decodes a binary PBM into a mask.
pub fn load_pbm(bytes: &[u8]) -> Result<Mask> {
    let mut reader = HeaderReader::new(bytes);
    if &reader.magic()? != b"P4" {
        return Err(Error::parse(0, "expected PBM magic P4"));
    }
    let (width, height) = dimensions(&mut reader)?;
    let stride = width.div_ceil(8);
    let payload = reader.payload(stride * height)?;
    let mut bits = Vec::with_capacity(width * height);
    for row in payload.chunks_exact(stride) {
        for x in 0..width {
            bits.push(row[x / 8] & (0x80 >> (x % 8)) != 0);
        }
    }
    Mask::new(width, height, bits)
}

/// Decodes a PBM and checks it against the image it belongs to.
pub fn load_pbm_for(bytes: &[u8], img: &Image) -> Result<Mask> {
    let mask = load_pbm(bytes)?;
    img.ensure_mask(&mask)?;
    Ok(mask)
}

/// Encodes a mask as binary PBM, padding each row to whole bytes.
pub fn save_pbm(mask: &Mask) -> Vec<u8> {
    let (width, height) = (mask.width(), mask.height());
    let mut out = format!("P4\n{width} {height}\n").into_bytes();
    let stride = width.div_ceil(8);
    for y in 0..height {
        let mut row = vec![0u8; stride];
        for x in 0..width {
            if mask.get(x, y) {
                row[x / 8] |= 0x80 >> (x % 8);
            }
        }
        out.extend_from_slice(&row);
    }
    out
}

/// Dumps a soft mask as PGM for inspection.
pub fn save_soft_mask_pgm(mask: &SoftMask) -> Vec<u8> {
    save_pnm(&mask.to_image())
}
