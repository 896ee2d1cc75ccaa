//! Little-endian binary dataset and split files plus a JSON sidecar.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{GenConfig, SplitSpec, SyntheticDataset, Variant};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::nn::Matrix;

const DATA_MAGIC: &[u8; 4] = b"MMLZ";
const SPLIT_MAGIC: &[u8; 4] = b"MMSP";
const VERSION: u32 = 1;

pub fn split_path(path: &Path) -> PathBuf {
    path.with_extension("split")
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    generator_version: String,
    variant: Variant,
    seed: u64,
    n: usize,
    d1: usize,
    d2: usize,
    n_classes: usize,
    class_counts: Vec<usize>,
    config: Option<GenConfig>,
    n_train: usize,
    n_test: usize,
    train_fraction: f64,
}

/// Writes the dataset to `path`, its split next to it and a sidecar JSON.
pub fn save(ds: &SyntheticDataset, split: &SplitSpec, path: &Path) -> Result<()> {
    ds.validate()?;
    split.validate()?;
    if split.n != ds.len() {
        return Err(Error::Invariant(format!(
            "split covers {} rows, dataset has {}",
            split.n,
            ds.len()
        )));
    }
    fsutil::write(path, &encode_dataset(ds))?;
    fsutil::write(&split_path(path), &encode_split(split))?;
    let sidecar = Sidecar {
        generator_version: ds.generator_version.clone(),
        variant: ds.variant,
        seed: ds.seed,
        n: ds.len(),
        d1: ds.d1(),
        d2: ds.d2(),
        n_classes: ds.n_classes,
        class_counts: ds.class_counts(),
        config: ds.config.clone(),
        n_train: split.n_train(),
        n_test: split.n_test(),
        train_fraction: split.train_fraction,
    };
    fsutil::write_json(&sidecar_path(path), &sidecar)
}

pub fn load(path: &Path) -> Result<(SyntheticDataset, SplitSpec)> {
    let ds = load_dataset(path)?;
    let split = load_split(&split_path(path))?;
    if split.n != ds.len() {
        return Err(Error::Invariant(format!(
            "split covers {} rows, dataset has {}",
            split.n,
            ds.len()
        )));
    }
    Ok((ds, split))
}

pub fn load_dataset(path: &Path) -> Result<SyntheticDataset> {
    let bytes = fsutil::read(path)?;
    let mut ds = decode_dataset(&bytes, path)?;
    // The sidecar is advisory; a missing or mismatched one only loses the
    // latent dimension and generator string.
    if let Ok(sc) = fsutil::read_json::<Sidecar>(&sidecar_path(path))
        && sc.seed == ds.seed
        && sc.variant == ds.variant
        && sc.n == ds.len()
    {
        ds.config = sc.config;
        ds.generator_version = sc.generator_version;
    }
    Ok(ds)
}

pub fn load_split(path: &Path) -> Result<SplitSpec> {
    let bytes = fsutil::read(path)?;
    decode_split(&bytes, path)
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

pub(crate) fn encode_dataset(ds: &SyntheticDataset) -> Vec<u8> {
    let n = ds.len();
    let mut out = Vec::with_capacity(33 + 4 * n * (ds.d1() + ds.d2() + 1));
    out.extend_from_slice(DATA_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(ds.variant.code());
    put_u32(&mut out, ds.n_classes);
    put_u32(&mut out, n);
    put_u32(&mut out, ds.d1());
    put_u32(&mut out, ds.d2());
    out.extend_from_slice(&ds.seed.to_le_bytes());
    out.extend_from_slice(&ds.x1.to_le_bytes());
    out.extend_from_slice(&ds.x2.to_le_bytes());
    for &y in &ds.labels {
        put_u32(&mut out, y);
    }
    out
}

fn encode_split(s: &SplitSpec) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * s.n_test());
    out.extend_from_slice(SPLIT_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_u32(&mut out, s.n);
    put_u32(&mut out, s.n_test());
    for &i in &s.test_indices {
        put_u32(&mut out, i);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Truncated {
                path: self.path.to_path_buf(),
                detail: format!(
                    "{what}: need {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ),
            }),
        }
    }

    fn magic(&mut self, expected: &'static [u8; 4]) -> Result<()> {
        let got = self.take(4, "magic")?;
        if got != expected {
            return Err(Error::BadMagic {
                path: self.path.to_path_buf(),
                expected: std::str::from_utf8(expected).unwrap_or("?"),
            });
        }
        Ok(())
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn f32s(&mut self, count: usize, what: &str) -> Result<Vec<f32>> {
        let len = count
            .checked_mul(4)
            .ok_or_else(|| Error::Invariant(format!("{what}: size overflow")))?;
        let b = self.take(len, what)?;
        Ok(b.chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Invariant(format!(
                "{}: {} trailing bytes",
                self.path.display(),
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn version(r: &mut Reader) -> Result<()> {
    match r.u32("version")? {
        VERSION => Ok(()),
        v => Err(Error::UnsupportedVersion(v)),
    }
}

pub(crate) fn decode_dataset(bytes: &[u8], path: &Path) -> Result<SyntheticDataset> {
    let mut r = Reader { bytes, pos: 0, path };
    r.magic(DATA_MAGIC)?;
    version(&mut r)?;
    let code = r.u8("variant")?;
    let variant = Variant::from_code(code)
        .ok_or_else(|| Error::Invariant(format!("unknown variant code {code}")))?;
    let n_classes = r.u32("n_classes")? as usize;
    let n = r.u32("N")? as usize;
    let d1 = r.u32("d1")? as usize;
    let d2 = r.u32("d2")? as usize;
    let seed = r.u64("seed")?;
    if d1 == 0 || d2 == 0 {
        return Err(Error::Invariant(format!("zero feature dimension ({d1}, {d2})")));
    }
    let x1 = Matrix::new(n, d1, r.f32s(n * d1, "X1")?)?;
    let x2 = Matrix::new(n, d2, r.f32s(n * d2, "X2")?)?;
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        labels.push(r.u32("labels")? as usize);
    }
    r.finish()?;
    let ds = SyntheticDataset {
        x1,
        x2,
        labels,
        variant,
        n_classes,
        seed,
        config: None,
        generator_version: super::GENERATOR_VERSION.to_string(),
    };
    ds.validate()?;
    Ok(ds)
}

fn decode_split(bytes: &[u8], path: &Path) -> Result<SplitSpec> {
    let mut r = Reader { bytes, pos: 0, path };
    r.magic(SPLIT_MAGIC)?;
    version(&mut r)?;
    let n = r.u32("N")? as usize;
    let n_test = r.u32("n_test")? as usize;
    if n_test > n {
        return Err(Error::Invariant(format!("{n_test} test rows of {n}")));
    }
    let mut test = Vec::with_capacity(n_test);
    for _ in 0..n_test {
        test.push(r.u32("test indices")? as usize);
    }
    r.finish()?;
    let fraction = if n == 0 { 0.0 } else { (n - n_test) as f64 / n as f64 };
    let s = SplitSpec {
        n,
        test_indices: test,
        train_fraction: fraction,
    };
    s.validate()?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{GammaPhase2, generate, split};

    fn tiny() -> SyntheticDataset {
        let cfg = GenConfig {
            d1: 5,
            d2: 3,
            d: 4,
            n: 40,
            seed: 11,
            variant: Variant::Beta,
            gamma_phase2: GammaPhase2::Quota,
        };
        generate(&cfg).unwrap().0
    }

    #[test]
    fn roundtrip_is_exact() {
        let ds = tiny();
        let sp = split(ds.len(), 0.8, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.mmlz");
        save(&ds, &sp, &path).unwrap();
        let (back, sp2) = load(&path).unwrap();
        assert_eq!(back, ds);
        assert_eq!(sp2.test_indices, sp.test_indices);
        assert_eq!(encode_dataset(&back), std::fs::read(&path).unwrap());
    }

    #[test]
    fn bad_magic_detected() {
        let mut bytes = encode_dataset(&tiny());
        bytes[0] = b'X';
        let err = decode_dataset(&bytes, Path::new("x")).unwrap_err();
        assert!(matches!(err, Error::BadMagic { .. }), "{err}");
    }

    #[test]
    fn truncated_labels_detected() {
        let bytes = encode_dataset(&tiny());
        let err = decode_dataset(&bytes[..bytes.len() - 2], Path::new("x")).unwrap_err();
        assert!(matches!(err, Error::Truncated { .. }), "{err}");
    }

    #[test]
    fn wrong_version_rejected() {
        let mut bytes = encode_dataset(&tiny());
        bytes[4] = 9;
        assert!(matches!(
            decode_dataset(&bytes, Path::new("x")),
            Err(Error::UnsupportedVersion(9))
        ));
    }

    #[test]
    fn label_out_of_range_rejected() {
        let mut bytes = encode_dataset(&tiny());
        let n = bytes.len();
        bytes[n - 4] = 5;
        assert!(matches!(decode_dataset(&bytes, Path::new("x")), Err(Error::Invariant(_))));
    }
}
