//! Field and table exports: CSV grids, 16-bit PNG previews and the VHF1
//! binary container.
//!
//! VHF1 layout (little-endian): bytes 0–3 `"VHF1"`, 4–7 domain tag
//! (0 position, 1 wavevector), 8–11 `n_x`, 12–15 `n_y`, then `f64` pitch x,
//! pitch y, wavelength, center x, center y, 8 reserved zero bytes, followed
//! by `n_x·n_y` interleaved `(re, im)` `f64` pairs in row-major order.

use crate::grid::{ComplexField2D, Domain, GridError, GridSpec, RealField2D};
use crate::herald::BoundaryPoint;
use image::{ImageBuffer, Luma};
use ndarray::Array2;
use num_complex::Complex64;
use std::fmt::Write as _;
use std::fs;
use std::io::Cursor;
use std::path::Path;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExportError {
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed VHF1 data: {0}")]
    Format(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

pub const VHF1_HEADER_LEN: usize = 64;

/// Write `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ExportError> {
    let io = |e: std::io::Error| ExportError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(io)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

/// `x,y,value` rows, x fastest.
pub fn real_csv(f: &RealField2D) -> String {
    let g = f.grid();
    let (xs, ys) = (g.xs(), g.ys());
    let mut s = String::with_capacity(g.len() * 40);
    s.push_str("x,y,value\n");
    for ((j, i), v) in f.data().indexed_iter() {
        let _ = writeln!(s, "{},{},{}", xs[i], ys[j], v);
    }
    s
}

/// `x,y,re,im` rows, x fastest.
pub fn complex_csv(f: &ComplexField2D) -> String {
    let g = f.grid();
    let (xs, ys) = (g.xs(), g.ys());
    let mut s = String::with_capacity(g.len() * 60);
    s.push_str("x,y,re,im\n");
    for ((j, i), v) in f.data().indexed_iter() {
        let _ = writeln!(s, "{},{},{},{}", xs[i], ys[j], v.re, v.im);
    }
    s
}

/// `k_t,L_star,status` rows; `L_star` is empty when the boundary is not
/// bracketed at that `k_t`.
pub fn regime_csv(points: &[BoundaryPoint]) -> String {
    let mut s = String::from("k_t,L_star,status\n");
    for p in points {
        let l = p.l_star.map(|v| v.to_string()).unwrap_or_default();
        let status = serde_json::to_value(p.status)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        let _ = writeln!(s, "{},{},{}", p.k_t, l, status);
    }
    s
}

fn png_bytes(nx: usize, ny: usize, data: &Array2<f64>, to_u16: impl Fn(f64) -> u16) -> Vec<u8> {
    // image rows run top to bottom, so flip y to keep +y up
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_fn(nx as u32, ny as u32, |x, y| {
            Luma([to_u16(data[[ny - 1 - y as usize, x as usize]])])
        });
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)
        .expect("in-memory PNG encoding");
    out.into_inner()
}

/// 16-bit grayscale PNG of a non-negative field scaled to its maximum.
pub fn intensity_png(f: &RealField2D) -> Vec<u8> {
    let g = f.grid();
    let m = f.max();
    let scale = if m > 0.0 { 65535.0 / m } else { 0.0 };
    png_bytes(g.nx(), g.ny(), f.data(), |v| (v.max(0.0) * scale).round() as u16)
}

/// 16-bit grayscale PNG of `arg f`, mapping (−π, π] onto [0, 65535].
pub fn phase_png(f: &ComplexField2D) -> Vec<u8> {
    let g = f.grid();
    let args = f.data().mapv(|v| v.arg());
    png_bytes(g.nx(), g.ny(), &args, |a| {
        ((a + PI) / (2.0 * PI) * 65535.0).round().clamp(0.0, 65535.0) as u16
    })
}

pub fn vhf1_bytes(f: &ComplexField2D) -> Vec<u8> {
    let g = f.grid();
    let mut b = Vec::with_capacity(VHF1_HEADER_LEN + g.len() * 16);
    b.extend_from_slice(b"VHF1");
    let tag: u32 = match f.domain() {
        Domain::Position => 0,
        Domain::Wavevector => 1,
    };
    for v in [tag, g.nx() as u32, g.ny() as u32] {
        b.extend_from_slice(&v.to_le_bytes());
    }
    for v in [g.pitch()[0], g.pitch()[1], f.wavelength(), g.center()[0], g.center()[1]] {
        b.extend_from_slice(&v.to_le_bytes());
    }
    b.extend_from_slice(&[0u8; 8]);
    for v in f.data().iter() {
        b.extend_from_slice(&v.re.to_le_bytes());
        b.extend_from_slice(&v.im.to_le_bytes());
    }
    b
}

pub fn read_vhf1(bytes: &[u8]) -> Result<ComplexField2D, ExportError> {
    let bad = |m: &str| ExportError::Format(m.to_string());
    if bytes.len() < VHF1_HEADER_LEN || &bytes[0..4] != b"VHF1" {
        return Err(bad("missing VHF1 header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let domain = match u32_at(4) {
        0 => Domain::Position,
        1 => Domain::Wavevector,
        t => return Err(ExportError::Format(format!("unknown domain tag {t}"))),
    };
    let (nx, ny) = (u32_at(8) as usize, u32_at(12) as usize);
    if bytes.len() != VHF1_HEADER_LEN + nx * ny * 16 {
        return Err(bad("payload length does not match header"));
    }
    let grid = GridSpec::with_pitch(nx, ny, [f64_at(16), f64_at(24)])?.centered_at([f64_at(40), f64_at(48)]);
    let wavelength = f64_at(32);
    let data = Array2::from_shape_fn((ny, nx), |(j, i)| {
        let o = VHF1_HEADER_LEN + (j * nx + i) * 16;
        Complex64::new(f64_at(o), f64_at(o + 8))
    });
    Ok(ComplexField2D::new(grid, domain, wavelength, data)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field() -> ComplexField2D {
        let g = GridSpec::new(8, 10, 0.5).unwrap().centered_at([1.0, -2.0]);
        ComplexField2D::from_fn(g, Domain::Wavevector, 0.812, |x, y| Complex64::new(x, y * y)).unwrap()
    }

    #[test]
    fn vhf1_round_trip() {
        let f = field();
        let b = vhf1_bytes(&f);
        assert_eq!(b.len(), 64 + 80 * 16);
        assert_eq!(&b[56..64], &[0u8; 8]);
        let back = read_vhf1(&b).unwrap();
        assert_eq!(back.data(), f.data());
        assert_eq!(back.grid().center(), f.grid().center());
        assert_eq!(back.domain(), Domain::Wavevector);
        assert!(read_vhf1(&b[..100]).is_err());
    }

    #[test]
    fn csv_shape() {
        let f = field();
        let c = complex_csv(&f);
        assert_eq!(c.lines().count(), 81);
        assert_eq!(c.lines().next(), Some("x,y,re,im"));
        let r = real_csv(&f.intensity());
        assert!(r.lines().nth(1).unwrap().starts_with("-1,-4.5,"));
    }

    #[test]
    fn png_decodes_to_16_bit() {
        let f = field();
        let png = intensity_png(&f.intensity());
        let img = image::load_from_memory(&png).unwrap();
        assert_eq!(img.color(), image::ColorType::L16);
        assert_eq!((img.width(), img.height()), (8, 10));
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("a.csv");
        write_atomic(&p, b"x").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"x");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
