//! Binary PPM (`P6`, maxval 255) reading and writing.

use std::fs;
use std::path::Path;

use seedpure_core::Image;

use crate::error::{Error, FormatError, Result};

pub fn encode(img: &Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}

/// Parses a header token, skipping whitespace and `#` comments.
fn token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8], FormatError> {
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                    *pos += 1;
                }
            }
            Some(_) => break,
            None => return Err(FormatError::MalformedHeader("unexpected end of header".into())),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| !b.is_ascii_whitespace()) {
        *pos += 1;
    }
    Ok(&bytes[start..*pos])
}

fn number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize, FormatError> {
    let tok = token(bytes, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| FormatError::MalformedHeader(format!("invalid {what}")))
}

pub fn decode(bytes: &[u8]) -> Result<Image, FormatError> {
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(FormatError::UnsupportedImageFormat);
    }
    let mut pos = 2;
    let width = number(bytes, &mut pos, "width")?;
    let height = number(bytes, &mut pos, "height")?;
    let maxval = number(bytes, &mut pos, "maxval")?;
    if width == 0 || height == 0 {
        return Err(FormatError::MalformedHeader("zero image dimension".into()));
    }
    if maxval != 255 {
        return Err(FormatError::UnsupportedImageFormat);
    }
    // Exactly one whitespace byte separates the header from the raster.
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(FormatError::MalformedHeader("missing separator after maxval".into()));
    }
    pos += 1;
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| FormatError::MalformedHeader("image too large".into()))?;
    let raster = &bytes[pos..];
    if raster.len() < expected {
        return Err(FormatError::TruncatedPixelData { expected, actual: raster.len() });
    }
    Image::new(height, width, raster[..expected].to_vec()).map_err(|e| FormatError::Malformed(e.to_string()))
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| Error::format(path, e))
}

pub fn write_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(img)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_red_pixel() {
        let img = decode(b"P6\n1 1\n255\n\xff\x00\x00").unwrap();
        assert_eq!(img, Image::new(1, 1, vec![255, 0, 0]).unwrap());
    }

    #[test]
    fn comments_in_header() {
        let img = decode(b"P6 # made by hand\n2 1 # w h\n255\n\x01\x02\x03\x04\x05\x06").unwrap();
        assert_eq!(img.width(), 2);
        assert_eq!(img.pixel(0, 1), [4, 5, 6]);
    }

    #[test]
    fn truncated_pixels() {
        let mut bytes = b"P6\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[7; 9]);
        assert_eq!(decode(&bytes), Err(FormatError::TruncatedPixelData { expected: 12, actual: 9 }));
    }

    #[test]
    fn other_formats_are_rejected() {
        assert_eq!(decode(b"P3\n1 1\n255\n0 0 0\n"), Err(FormatError::UnsupportedImageFormat));
        assert_eq!(decode(b"P6\n1 1\n65535\n\0\0\0\0\0\0"), Err(FormatError::UnsupportedImageFormat));
        assert!(matches!(decode(b"P6\n1 x\n255\n"), Err(FormatError::MalformedHeader(_))));
    }

    #[test]
    fn encode_decode_round_trip() {
        let img = Image::new(2, 3, (0..18).collect()).unwrap();
        let bytes = encode(&img);
        assert_eq!(decode(&bytes).unwrap(), img);
        assert_eq!(encode(&decode(&bytes).unwrap()), bytes);
    }
}
