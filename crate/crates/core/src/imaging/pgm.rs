//! Binary PGM (P5) reader and writer.
//!
//! The writer emits the exact header `P5\n<width> <height>\n255\n` followed
//! by row-major raw bytes, so identical images produce identical files. The
//! reader accepts any standard P5 header with whitespace-separated tokens
//! and `#` comments, as long as the maxval is 255.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::GrayImage;

pub fn pgm_to_bytes(img: &GrayImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", img.width(), img.height());
    let mut bytes = Vec::with_capacity(header.len() + img.pixels().len());
    bytes.extend_from_slice(header.as_bytes());
    bytes.extend_from_slice(img.pixels());
    bytes
}

pub fn pgm_from_bytes(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 0usize;

    let mut next_token = |bytes: &[u8]| -> Result<String> {
        // Skip whitespace and comment lines.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format("truncated PGM header".to_string()));
        }
        String::from_utf8(bytes[start..pos].to_vec())
            .map_err(|_| Error::format("PGM header is not ASCII".to_string()))
    };

    if next_token(bytes)? != "P5" {
        return Err(Error::format("not a binary PGM (P5) file".to_string()));
    }
    let parse = |token: String| -> Result<usize> {
        token
            .parse::<usize>()
            .map_err(|_| Error::format(format!("bad PGM header token '{token}'")))
    };
    let width = parse(next_token(bytes)?)?;
    let height = parse(next_token(bytes)?)?;
    let maxval = parse(next_token(bytes)?)?;
    if maxval != 255 {
        return Err(Error::format(format!("unsupported PGM maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::format("missing separator before PGM raster".to_string()));
    }
    pos += 1;
    let data = &bytes[pos..];
    if data.len() != width * height {
        return Err(Error::format(format!(
            "PGM raster holds {} bytes, expected {}",
            data.len(),
            width * height
        )));
    }
    GrayImage::new(width, height, data.to_vec())
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(&pgm_to_bytes(img))?;
    Ok(())
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    pgm_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_is_bit_exact() {
        let img = GrayImage::new(3, 2, vec![0, 128, 255, 1, 2, 3]).unwrap();
        let bytes = pgm_to_bytes(&img);
        assert_eq!(&bytes[..12], b"P5\n3 2\n255\n\x00");
        assert_eq!(bytes.len(), 11 + 6);
    }

    proptest! {
        #[test]
        fn roundtrip(pixels in proptest::collection::vec(0u8..=255, 30)) {
            let img = GrayImage::new(6, 5, pixels).unwrap();
            let decoded = pgm_from_bytes(&pgm_to_bytes(&img)).unwrap();
            prop_assert_eq!(decoded, img);
        }
    }

    #[test]
    fn rejects_malformed_files() {
        assert!(pgm_from_bytes(b"P6\n1 1\n255\nx").is_err());
        assert!(pgm_from_bytes(b"P5\n2 2\n255\nab").is_err());
        assert!(pgm_from_bytes(b"P5\n1 1\n65535\nxx").is_err());
        assert!(pgm_from_bytes(b"P5\n1").is_err());
    }

    #[test]
    fn accepts_comments_in_header() {
        let bytes = b"P5\n# made elsewhere\n2 1\n255\nab";
        let img = pgm_from_bytes(bytes).unwrap();
        assert_eq!((img.width(), img.height()), (2, 1));
        assert_eq!(img.pixels(), b"ab");
    }
}
