//! Portable float map I/O (RGB, little-endian, rows stored bottom to top).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::FloatImage;

pub fn encode_pfm(img: &FloatImage) -> Vec<u8> {
    let (w, h) = img.dims();
    let mut out = format!("PF\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 12);
    for y in (0..h).rev() {
        for &v in &img.data()[y * w * 3..(y + 1) * w * 3] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Pfm("truncated header".into()));
    }
    std::str::from_utf8(&bytes[start..*pos]).map_err(|_| Error::Pfm("header is not ASCII".into()))
}

pub fn decode_pfm(bytes: &[u8]) -> Result<FloatImage> {
    let mut pos = 0;
    let magic = next_token(bytes, &mut pos)?;
    if magic != "PF" {
        return Err(Error::Pfm(format!("unsupported magic {magic:?}; expected PF")));
    }
    let parse_dim = |s: &str| {
        s.parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| Error::Pfm(format!("bad dimension {s:?}")))
    };
    let w = parse_dim(next_token(bytes, &mut pos)?)?;
    let h = parse_dim(next_token(bytes, &mut pos)?)?;
    let scale_tok = next_token(bytes, &mut pos)?;
    let scale: f64 = scale_tok
        .parse()
        .map_err(|_| Error::Pfm(format!("bad scale {scale_tok:?}")))?;
    if scale > 0.0 {
        return Err(Error::PfmBigEndian);
    }
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Pfm(format!("bad scale {scale_tok:?}")));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Pfm("truncated header".into()));
    }
    pos += 1;
    let need = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(12))
        .ok_or_else(|| Error::Pfm("dimensions overflow".into()))?;
    let body = &bytes[pos..];
    if body.len() != need {
        return Err(Error::Pfm(format!(
            "expected {need} bytes of raster data, found {}",
            body.len()
        )));
    }
    let mut data = vec![0.0; w * h * 3];
    for (i, chunk) in body.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as f64;
        let (row, rest) = (i / (w * 3), i % (w * 3));
        data[(h - 1 - row) * w * 3 + rest] = v;
    }
    FloatImage::from_vec(w, h, data)
}

pub fn write_pfm(path: &Path, img: &FloatImage) -> Result<()> {
    fs::write(path, encode_pfm(img))?;
    Ok(())
}

pub fn read_pfm(path: &Path) -> Result<FloatImage> {
    let bytes = fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::Io(e)
        }
    })?;
    decode_pfm(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FloatImage {
        let data = (0..2 * 3 * 3).map(|i| i as f64 * 0.25 + 0.125).collect();
        FloatImage::from_vec(2, 3, data).unwrap()
    }

    #[test]
    fn layout_is_bottom_up_little_endian() {
        let img = sample();
        let b = encode_pfm(&img);
        let header = b"PF\n2 3\n-1.0\n";
        assert_eq!(&b[..header.len()], header);
        let first = f32::from_le_bytes(b[header.len()..header.len() + 4].try_into().unwrap());
        // first stored value is the bottom-left pixel's red channel
        assert_eq!(first as f64, img.get(0, 2, 0));
    }

    #[test]
    fn roundtrip_exact_for_f32_values() {
        let img = sample();
        assert_eq!(decode_pfm(&encode_pfm(&img)).unwrap(), img);
    }

    #[test]
    fn rejects_big_endian_and_malformed() {
        let mut b = encode_pfm(&sample());
        b[7] = b' ';
        let be = String::from_utf8_lossy(&b[..12]).replace("-1.0", " 1.0");
        let mut be_bytes = be.into_bytes();
        be_bytes.extend_from_slice(&b[12..]);
        assert!(matches!(decode_pfm(&be_bytes), Err(Error::PfmBigEndian)));
        assert!(matches!(decode_pfm(b"Pf\n1 1\n-1.0\n0000"), Err(Error::Pfm(_))));
        assert!(matches!(decode_pfm(b"PF\n1 1\n-1.0\n000"), Err(Error::Pfm(_))));
        assert!(matches!(decode_pfm(b"PF\n0 1\n-1.0\n"), Err(Error::Pfm(_))));
        assert!(matches!(decode_pfm(b"PF\n1"), Err(Error::Pfm(_))));
    }

    #[test]
    fn missing_file() {
        let r = read_pfm(Path::new("/nonexistent/x.pfm"));
        assert!(matches!(r, Err(Error::MissingFile(_))));
    }
}
