//! Raster file formats: portable graymaps (P2/P5) and raw float rasters.
//!
//! Float rasters are little-endian `f32` samples in row-major order. The
//! dimensions live in a companion text file holding the single line
//! `width height`.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Decoded graymap with its original sample depth.
#[derive(Debug, Clone, PartialEq)]
pub struct Graymap {
    pub maxval: u16,
    pub samples: Grid<u16>,
}

impl Graymap {
    /// Samples divided by `maxval`, in `[0, 1]`.
    pub fn normalized(&self) -> Grid<f64> {
        let m = f64::from(self.maxval);
        self.samples.map(|&v| f64::from(v) / m)
    }
}

struct HeaderReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.data.len() {
            match self.data[self.pos] {
                b'#' => {
                    while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn next_uint(&mut self) -> Result<u32> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.data.len() && self.data[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Format(format!("expected integer at byte {start}")));
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("integer out of range at byte {start}")))
    }
}

/// Parses a P2 (ASCII) or P5 (binary) graymap. 16-bit P5 samples are big-endian.
pub fn decode_pgm(data: &[u8]) -> Result<Graymap> {
    if data.len() < 2 {
        return Err(Error::Format("file too short".into()));
    }
    let binary = match &data[..2] {
        b"P2" => false,
        b"P5" => true,
        other => {
            return Err(Error::Format(format!(
                "unsupported magic {:?}",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let mut rd = HeaderReader { data, pos: 2 };
    let width = rd.next_uint()? as usize;
    let height = rd.next_uint()? as usize;
    let maxval = rd.next_uint()?;
    if width == 0 || height == 0 {
        return Err(Error::Format("zero dimension".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("maxval {maxval} out of range")));
    }
    let maxval = maxval as u16;
    let count = width * height;
    let mut samples = Vec::with_capacity(count);

    if binary {
        // exactly one whitespace byte separates the header from the raster
        if rd.pos >= data.len() || !data[rd.pos].is_ascii_whitespace() {
            return Err(Error::Format("missing header terminator".into()));
        }
        let body = &data[rd.pos + 1..];
        let bytes_per = if maxval > 255 { 2 } else { 1 };
        if body.len() < count * bytes_per {
            return Err(Error::Format(format!(
                "raster truncated: need {} bytes, have {}",
                count * bytes_per,
                body.len()
            )));
        }
        if bytes_per == 1 {
            samples.extend(body[..count].iter().map(|&b| u16::from(b)));
        } else {
            samples.extend(
                body[..2 * count]
                    .chunks_exact(2)
                    .map(|c| u16::from_be_bytes([c[0], c[1]])),
            );
        }
    } else {
        for _ in 0..count {
            samples.push(rd.next_uint()?.min(u32::from(u16::MAX)) as u16);
        }
    }
    if let Some(&bad) = samples.iter().find(|&&v| v > maxval) {
        return Err(Error::Format(format!("sample {bad} exceeds maxval {maxval}")));
    }
    Ok(Graymap {
        maxval,
        samples: Grid::from_vec(width, height, samples)?,
    })
}

/// Encodes a binary P5 graymap; samples above 255 require `maxval > 255`.
pub fn encode_pgm(samples: &Grid<u16>, maxval: u16) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", samples.width(), samples.height(), maxval).into_bytes();
    if maxval > 255 {
        for &v in samples.data() {
            out.extend_from_slice(&v.min(maxval).to_be_bytes());
        }
    } else {
        out.extend(samples.data().iter().map(|&v| v.min(maxval) as u8));
    }
    out
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Graymap> {
    decode_pgm(&fs::read(path)?)
}

pub fn write_pgm(path: impl AsRef<Path>, samples: &Grid<u16>, maxval: u16) -> Result<()> {
    fs::write(path, encode_pgm(samples, maxval))?;
    Ok(())
}

/// Reads an edge raster and rescales it to `[0, 1]`.
pub fn read_edge_raster(path: impl AsRef<Path>) -> Result<Grid<f64>> {
    Ok(read_pgm(path)?.normalized())
}

/// Path of the companion header for a raw float raster.
pub fn header_path(raw: &Path) -> PathBuf {
    let mut s = raw.as_os_str().to_owned();
    s.push(".hdr");
    PathBuf::from(s)
}

/// Writes `<path>` (little-endian f32) and `<path>.hdr` (`width height`).
pub fn write_f32_raster(path: impl AsRef<Path>, grid: &Grid<f64>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(grid.len() * 4);
    for &v in grid.data() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, bytes)?;
    fs::write(header_path(path), format!("{} {}\n", grid.width(), grid.height()))?;
    Ok(())
}

pub fn read_f32_raster(path: impl AsRef<Path>) -> Result<Grid<f64>> {
    let path = path.as_ref();
    let header = fs::read_to_string(header_path(path))?;
    let mut it = header.split_whitespace().map(str::parse::<usize>);
    let (Some(Ok(w)), Some(Ok(h)), None) = (it.next(), it.next(), it.next()) else {
        return Err(Error::Format(format!("bad float raster header {header:?}")));
    };
    let bytes = fs::read(path)?;
    if bytes.len() != w * h * 4 {
        return Err(Error::Format(format!(
            "float raster has {} bytes, header implies {}",
            bytes.len(),
            w * h * 4
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    Grid::from_vec(w, h, data)
}

/// 8-bit preview of a potential: `[-2π, 2π]` maps affinely onto `[0, 255]`,
/// so 0 lands on 127.5 (rounded to 128); values outside saturate.
pub fn potential_preview(v: &Grid<f64>) -> Grid<u16> {
    v.map(|&x| {
        let t = (x + 2.0 * PI) / (4.0 * PI);
        (t.clamp(0.0, 1.0) * 255.0).round() as u16
    })
}

/// 16-bit encoding of a probability: `round(p * 65535)`, with `p` clamped to `[0, 1]`.
pub fn probability_to_u16(p: &Grid<f64>) -> Grid<u16> {
    p.map(|&x| (x.clamp(0.0, 1.0) * 65535.0).round() as u16)
}

/// Reads an orientation override stored as radians × 1000 in a 16-bit graymap.
pub fn read_orientation_override(path: impl AsRef<Path>) -> Result<Grid<f64>> {
    let g = read_pgm(path)?;
    Ok(g.samples.map(|&v| f64::from(v) / 1000.0))
}
