//! File formats: binary PGM (P5, 8-bit), row-major decimal CSV matrices and
//! atomic writes.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Writes through a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::format(path, "not a file path"))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// An 8-bit grayscale image as read from / written to P5 PGM.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Self {
        assert_eq!(pixels.len(), height * width);
        GrayImage {
            height,
            width,
            pixels,
        }
    }

    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.pixels[r * self.width + c]
    }
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|e| e.to_string())?.to_string());
    }
    if tokens[0] != "P5" {
        return Err(format!("expected P5 magic, got {:?}", tokens[0]));
    }
    let parse = |s: &str, what: &str| s.parse::<usize>().map_err(|_| format!("bad {what} {s:?}"));
    let width = parse(&tokens[1], "width")?;
    let height = parse(&tokens[2], "height")?;
    let maxval = parse(&tokens[3], "maxval")?;
    if maxval != 255 {
        return Err(format!("only 8-bit PGM supported (maxval {maxval})"));
    }
    if width == 0 || height == 0 {
        return Err("empty image".into());
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let need = width * height;
    if bytes.len() < pos + need {
        return Err(format!("raster truncated: need {need} bytes, have {}", bytes.len().saturating_sub(pos)));
    }
    Ok(GrayImage::new(height, width, bytes[pos..pos + need].to_vec()))
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes).map_err(|m| Error::format(path, m))
}

pub fn write_pgm(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    write_atomic(path.as_ref(), &encode_pgm(img))
}

/// Row-major CSV with shortest round-trip decimal formatting.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut s = String::with_capacity(m.nrows() * m.ncols() * 12);
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if c > 0 {
                s.push(',');
            }
            s.push_str(&format!("{:?}", m[(r, c)]));
        }
        s.push('\n');
    }
    s
}

pub fn matrix_from_csv(text: &str) -> std::result::Result<DMatrix<f64>, String> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| format!("line {}: bad number {t:?}", i + 1)))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(format!("line {}: expected {} columns, got {}", i + 1, first.len(), row.len()));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err("empty matrix".into());
    }
    let (nr, nc) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(nr, nc, |r, c| rows[r][c]))
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    matrix_from_csv(&text).map_err(|m| Error::format(path, m))
}

pub fn write_matrix_csv(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    write_atomic(path.as_ref(), matrix_to_csv(m).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pgm_with_comment() {
        let bytes = b"P5\n# made by hand\n2 1\n255\n\x01\xff";
        let img = decode_pgm(bytes).unwrap();
        assert_eq!((img.height, img.width), (1, 2));
        assert_eq!(img.pixels, vec![1, 255]);
    }

    #[test]
    fn pgm_rejects_ascii_and_16bit() {
        assert!(decode_pgm(b"P2\n1 1\n255\n0").is_err());
        assert!(decode_pgm(b"P5\n1 1\n65535\n\0\0").is_err());
        assert!(decode_pgm(b"P5\n2 2\n255\n\0").is_err());
    }

    #[test]
    fn csv_ragged_rows_rejected() {
        assert!(matrix_from_csv("1,2\n3\n").is_err());
        assert!(matrix_from_csv("").is_err());
    }

    proptest! {
        #[test]
        fn pgm_roundtrip(h in 1usize..9, w in 1usize..9, seed in any::<u64>()) {
            let pixels = (0..h * w).map(|i| (seed.wrapping_mul(i as u64 + 7) >> 13) as u8).collect();
            let img = GrayImage::new(h, w, pixels);
            prop_assert_eq!(decode_pgm(&encode_pgm(&img)).unwrap(), img);
        }

        #[test]
        fn csv_roundtrip_exact(vals in prop::collection::vec(-1e6f64..1e6, 6)) {
            let m = DMatrix::from_row_slice(2, 3, &vals);
            prop_assert_eq!(matrix_from_csv(&matrix_to_csv(&m)).unwrap(), m);
        }
    }
}
