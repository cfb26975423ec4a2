//! Binary PGM (P5) and PPM (P6) with 8-bit samples.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

/// Decoded raster: `channels` is 1 for P5 and 3 for P6, samples interleaved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pnm {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> std::result::Result<usize, String> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("malformed header: expected {what}"))
    }
}

pub fn decode_pnm(bytes: &[u8], path: &Path) -> Result<Pnm> {
    let bad = |msg: String| Error::format(path, msg);
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(bad("not a binary PGM/PPM (expected P5 or P6)".into())),
    };
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width").map_err(bad)?;
    let height = h.number("height").map_err(bad)?;
    let maxval = h.number("maxval").map_err(bad)?;
    if width == 0 || height == 0 {
        return Err(bad(format!("empty raster {width}x{height}")));
    }
    if maxval != 255 {
        return Err(bad(format!("unsupported maxval {maxval} (only 255)")));
    }
    match bytes.get(h.pos) {
        Some(b) if b.is_ascii_whitespace() => h.pos += 1,
        _ => return Err(bad("malformed header: missing separator before payload".into())),
    }
    let need = width * height * channels;
    let payload = &bytes[h.pos..];
    if payload.len() < need {
        return Err(bad(format!("truncated payload: {} of {need} bytes", payload.len())));
    }
    Ok(Pnm {
        width,
        height,
        channels,
        data: payload[..need].to_vec(),
    })
}

pub fn encode_pnm(img: &Pnm) -> Vec<u8> {
    let magic = if img.channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

pub fn read_pnm(path: &Path) -> Result<Pnm> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pnm(&bytes, path)
}

fn expect_channels(img: &Pnm, channels: usize, path: &Path) -> Result<()> {
    if img.channels != channels {
        let want = if channels == 1 { "P5" } else { "P6" };
        return Err(Error::format(path, format!("expected a {want} file")));
    }
    Ok(())
}

/// Planar `(1, c, h, w)` tensor from interleaved bytes.
fn to_tensor(img: &Pnm, f: impl Fn(u8) -> f32) -> Tensor<f32> {
    let c = img.channels;
    Tensor::from_fn(Shape::new(1, c, img.height, img.width), |[_, ch, y, x]| {
        f(img.data[(y * img.width + x) * c + ch])
    })
}

/// Colour image as `(1, 3, h, w)` in `[0, 1]`.
pub fn load_image(path: &Path) -> Result<Tensor<f32>> {
    let img = read_pnm(path)?;
    expect_channels(&img, 3, path)?;
    Ok(to_tensor(&img, |v| f32::from(v) / 255.0))
}

/// Binary mask as `(1, 1, h, w)`; bytes ≥ 128 map to 1.
pub fn load_mask(path: &Path) -> Result<Tensor<f32>> {
    let img = read_pnm(path)?;
    expect_channels(&img, 1, path)?;
    Ok(to_tensor(&img, |v| if v >= 128 { 1.0 } else { 0.0 }))
}

/// Grey map as `(1, 1, h, w)` in `[0, 1]`, without binarization.
pub fn load_gray(path: &Path) -> Result<Tensor<f32>> {
    let img = read_pnm(path)?;
    expect_channels(&img, 1, path)?;
    Ok(to_tensor(&img, |v| f32::from(v) / 255.0))
}

/// `round(255 v)` clamped to the byte range.
pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Interleaved bytes of sample 0 of a 1- or 3-channel tensor.
pub fn to_pnm(t: &Tensor<f32>) -> Result<Pnm> {
    let s = t.shape();
    if s.b != 1 || (s.c != 1 && s.c != 3) {
        return Err(Error::invalid("to_pnm", format!("cannot encode {s} as PGM/PPM")));
    }
    let mut data = Vec::with_capacity(s.numel());
    for y in 0..s.h {
        for x in 0..s.w {
            for c in 0..s.c {
                data.push(quantize(t.at(0, c, y, x)));
            }
        }
    }
    Ok(Pnm {
        width: s.w,
        height: s.h,
        channels: s.c,
        data,
    })
}

pub fn write_pnm(path: &Path, img: &Pnm) -> Result<()> {
    fs::write(path, encode_pnm(img)).map_err(|e| Error::io(path, e))
}

/// Writes a 1-channel map as P5 or a 3-channel image as P6.
pub fn save_tensor(path: &Path, t: &Tensor<f32>) -> Result<()> {
    write_pnm(path, &to_pnm(t)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> &'static Path {
        Path::new("mem")
    }

    #[test]
    fn p5_mask_binarizes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        fs::write(&path, b"P5\n2 2\n255\n\x00\xff\xff\x00").unwrap();
        assert_eq!(load_mask(&path).unwrap().data(), &[0.0, 1.0, 1.0, 0.0]);
        fs::write(&path, b"P5 2 2 255\n\x7f\x80\x01\xfe").unwrap();
        assert_eq!(load_mask(&path).unwrap().data(), &[0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn p6_pixel_scales() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.ppm");
        fs::write(&path, b"P6\n# red\n1 1\n255\n\xff\x00\x00").unwrap();
        assert_eq!(load_image(&path).unwrap().data(), &[1.0, 0.0, 0.0]);
        assert!(load_mask(&path).is_err());
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        let cases: [&[u8]; 6] = [
            b"P3\n1 1\n255\n\x00",
            b"P5\n2 2\n255\n\x00\x01\x02",
            b"P5\n2 2\n65535\n\x00\x01\x02\x03",
            b"P5\nx 2\n255\n\x00\x01",
            b"P5\n0 2\n255\n",
            b"P5\n1 1\n255",
        ];
        for bytes in cases {
            assert!(decode_pnm(bytes, p()).is_err(), "{:?}", String::from_utf8_lossy(bytes));
        }
        let err = decode_pnm(b"P5\n2 2\n255\n\x00", p()).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_image(Path::new("/nonexistent/x.ppm")), Err(Error::Io { .. })));
    }

    proptest! {
        #[test]
        fn roundtrip_is_exact(w in 1usize..6, h in 1usize..6, color in any::<bool>(), seed in any::<u64>()) {
            let c = if color { 3 } else { 1 };
            let data: Vec<u8> = (0..w * h * c).map(|i| (seed.wrapping_mul(i as u64 + 1) >> 7) as u8).collect();
            let img = Pnm { width: w, height: h, channels: c, data };
            prop_assert_eq!(&decode_pnm(&encode_pnm(&img), p()).unwrap(), &img);
            let t = to_tensor(&img, |v| f32::from(v) / 255.0);
            prop_assert_eq!(&to_pnm(&t).unwrap(), &img);
        }
    }
}
