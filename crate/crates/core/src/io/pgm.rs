use std::io::Write;

use crate::error::{Error, Result};
use crate::tensor::LabelMask;

/// Writes `P5\n{W} {H}\n255\n` followed by one byte per pixel.
pub fn write_pgm<W: Write>(out: &mut W, mask: &LabelMask) -> Result<()> {
    if mask.max_label() > 255 {
        return Err(Error::InvalidValue(format!(
            "label {} does not fit an 8-bit PGM",
            mask.max_label()
        )));
    }
    write!(out, "P5\n{} {}\n255\n", mask.width(), mask.height())?;
    let bytes: Vec<u8> = mask.labels().iter().map(|&l| l as u8).collect();
    out.write_all(&bytes)?;
    Ok(())
}

/// Reads the binary PGM subset written by [`write_pgm`].
pub fn read_pgm(bytes: &[u8]) -> Result<LabelMask> {
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).unwrap_or(""));
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(Error::Format("only P5 PGM with maxval 255 is supported".into()));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad PGM dimension {s:?}")));
    let (w, h) = (parse(fields[1])?, parse(fields[2])?);
    let raw = bytes.get(pos..pos + w * h).ok_or_else(|| Error::Format("truncated PGM raster".into()))?;
    LabelMask::new(h, w, raw.iter().map(|&b| u32::from(b)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_bytes_are_labels_verbatim() {
        let m = LabelMask::new(2, 3, vec![0, 1, 1, 0, 0, 1]).unwrap();
        let mut buf = Vec::new();
        write_pgm(&mut buf, &m).unwrap();
        assert_eq!(&buf[..11], b"P5\n3 2\n255\n");
        assert_eq!(&buf[11..], &[0, 1, 1, 0, 0, 1]);
        assert_eq!(read_pgm(&buf).unwrap(), m);
    }
}
