//! Binary 8-bit PGM (`P5`) reading and writing.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAX_SIDE: usize = 1 << 15;

/// Round-half-up quantisation of a [0, 1] intensity.
pub fn quantize8(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn encode_pgm(image: &Tensor) -> Result<Vec<u8>> {
    let (h, w, c) = image.hwc()?;
    if c != 1 {
        return Err(Error::Pgm(format!("expected one channel, got {c}")));
    }
    if image.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Pgm("pixel values must lie in [0, 1]".into()));
    }
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(image.data().iter().map(|&v| quantize8(v)));
    Ok(out)
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Pgm(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| Error::Pgm(format!("{what} overflows")))
    }
}

/// Decode to an H×W×1 tensor scaled by 1/255.
pub fn decode_pgm(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::Pgm("bad magic, expected P5".into()));
    }
    let mut hd = Header { bytes, pos: 2 };
    let w = hd.number("width")?;
    let h = hd.number("height")?;
    let maxval = hd.number("maxval")?;
    if w == 0 || h == 0 || w > MAX_SIDE || h > MAX_SIDE {
        return Err(Error::Pgm(format!("dimension {w}×{h} out of range")));
    }
    if maxval != 255 {
        return Err(Error::Pgm(format!("only maxval 255 is supported, got {maxval}")));
    }
    if hd.pos >= bytes.len() || !bytes[hd.pos].is_ascii_whitespace() {
        return Err(Error::Pgm("truncated header".into()));
    }
    let payload = &bytes[hd.pos + 1..];
    let n = w * h;
    if payload.len() < n {
        return Err(Error::Pgm(format!(
            "truncated payload: need {n} bytes, have {}",
            payload.len()
        )));
    }
    Tensor::new(&[h, w, 1], payload[..n].iter().map(|&b| b as f64 / 255.0).collect())
}

pub fn write_pgm(path: impl AsRef<Path>, image: &Tensor) -> Result<()> {
    std::fs::write(path, encode_pgm(image)?)?;
    Ok(())
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Tensor> {
    decode_pgm(&std::fs::read(path)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub class_id: usize,
    pub index: usize,
    pub path: PathBuf,
    pub image: Tensor,
}

/// Load every `<class>_<index>.pgm` in `dir`, sorted by (class, index).
/// Other files are ignored.
pub fn load_dataset_dir(dir: impl AsRef<Path>) -> Result<Vec<LabeledImage>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("pgm") {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let Some((c, i)) = stem.split_once('_') else { continue };
        let (Ok(class_id), Ok(index)) = (c.parse(), i.parse()) else {
            continue;
        };
        let image = read_pgm(&path)?;
        out.push(LabeledImage {
            class_id,
            index,
            path,
            image,
        });
    }
    out.sort_by_key(|l| (l.class_id, l.index));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantisation_boundaries() {
        assert_eq!(quantize8(0.0), 0);
        assert_eq!(quantize8(1.0), 255);
        assert_eq!(quantize8(0.5), 128);
    }

    #[test]
    fn zero_and_one_round_trip() {
        let z = Tensor::zeros(&[3, 5, 1]).unwrap();
        assert_eq!(decode_pgm(&encode_pgm(&z).unwrap()).unwrap(), z);
        let img = Tensor::new(&[1, 2, 1], vec![1.0, 0.5]).unwrap();
        let back = decode_pgm(&encode_pgm(&img).unwrap()).unwrap();
        assert_eq!(back.data(), &[1.0, 128.0 / 255.0]);
    }

    #[test]
    fn header_with_comment() {
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend([0u8, 255]);
        let t = decode_pgm(&bytes).unwrap();
        assert_eq!(t.shape(), &[1, 2, 1]);
        assert_eq!(t.data(), &[0.0, 1.0]);
    }

    #[test]
    fn malformed_inputs() {
        assert!(decode_pgm(b"P2\n1 1\n255\n\x00").is_err());
        assert!(decode_pgm(b"P5\n99999999999999999999999 1\n255\n").is_err());
        assert!(decode_pgm(b"P5\n40000 1\n255\n").is_err());
        assert!(decode_pgm(b"P5\n4 4\n255\n\x00\x01").is_err());
        assert!(decode_pgm(b"").is_err());
    }

    #[test]
    fn dataset_directory_layout() {
        let dir = tempfile::tempdir().unwrap();
        let img = Tensor::full(&[2, 2, 1], 0.2).unwrap();
        for name in ["3_1.pgm", "0_7.pgm", "3_0.pgm", "notes.txt", "x_1.pgm"] {
            write_pgm(dir.path().join(name), &img).unwrap();
        }
        let got: Vec<(usize, usize)> = load_dataset_dir(dir.path())
            .unwrap()
            .iter()
            .map(|l| (l.class_id, l.index))
            .collect();
        assert_eq!(got, vec![(0, 7), (3, 0), (3, 1)]);
    }
}
