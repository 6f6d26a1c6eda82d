//! Weight file: a UTF-8 text manifest followed by raw little-endian f32
//! blobs.
//!
//! ```text
//! gmob-weights 1
//! <entry count>
//! <name> f32 <d0>x<d1>x... <byte offset>
//! ...
//! ---
//! <blob bytes>
//! ```
//!
//! Offsets are relative to the first byte after the `---\n` line and entries
//! are laid out contiguously in manifest order.

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::network::Network;

const MAGIC: &str = "gmob-weights 1";
const SEPARATOR: &str = "---";

#[derive(Debug, Clone, PartialEq)]
pub struct WeightEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightStore {
    entries: Vec<WeightEntry>,
    index: HashMap<String, usize>,
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, shape: Vec<usize>, values: Vec<f32>) -> Result<()> {
        let name = name.into();
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::invalid(
                "name",
                format!("`{name}` must be non-empty without whitespace"),
            ));
        }
        if shape.iter().product::<usize>() != values.len() {
            return Err(Error::dim(format!(
                "`{name}`: shape {shape:?} does not hold {} values",
                values.len()
            )));
        }
        let entry = WeightEntry {
            name: name.clone(),
            shape,
            values,
        };
        match self.index.get(&name) {
            Some(&i) => self.entries[i] = entry,
            None => {
                self.index.insert(name, self.entries.len());
                self.entries.push(entry);
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> &[WeightEntry] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> Option<&WeightEntry> {
        self.index.get(name).map(|&i| &self.entries[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut WeightEntry> {
        self.index.get(name).map(|&i| &mut self.entries[i])
    }

    /// Promote an entry to a 64-bit tensor.
    pub fn tensor(&self, name: &str) -> Result<Tensor> {
        let e = self.get(name).ok_or_else(|| Error::MissingWeight(name.to_string()))?;
        Tensor::from_f32(&e.shape, &e.values)
    }

    /// Seeded random initialisation for every parameter of `net`.
    ///
    /// Convolution and dense weights use He-normal scaling; batch-norm
    /// statistics are drawn near identity so activations stay well scaled.
    pub fn random(net: &Network, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = WeightStore::new();
        for spec in net.param_specs() {
            let n = spec.numel();
            let leaf = spec.name.rsplit('.').next().unwrap_or("");
            let values: Vec<f32> = match leaf {
                "gamma" => (0..n).map(|_| rng.random_range(0.8..1.2) as f32).collect(),
                "beta" | "mean" => (0..n).map(|_| rng.random_range(-0.1..0.1) as f32).collect(),
                "var" => (0..n).map(|_| rng.random_range(0.5..1.5) as f32).collect(),
                "bias" => (0..n).map(|_| rng.random_range(-0.05..0.05) as f32).collect(),
                _ => {
                    let fan_in: usize = spec.shape[..spec.shape.len() - 1].iter().product::<usize>().max(1);
                    let fan_in = if spec.name.ends_with(".dw.weight") {
                        spec.shape[0] * spec.shape[1]
                    } else {
                        fan_in
                    };
                    let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("finite std");
                    (0..n).map(|_| normal.sample(&mut rng) as f32).collect()
                }
            };
            store
                .insert(spec.name, spec.shape, values)
                .expect("param spec shapes are consistent");
        }
        store
    }

    /// Check that the store holds exactly the parameters of `net`.
    pub fn validate_for(&self, net: &Network) -> Result<()> {
        let specs = net.param_specs();
        for spec in &specs {
            let e = self
                .get(&spec.name)
                .ok_or_else(|| Error::MissingWeight(spec.name.clone()))?;
            if e.shape != spec.shape {
                return Err(Error::WeightShape {
                    name: spec.name.clone(),
                    expected: spec.shape.clone(),
                    found: e.shape.clone(),
                });
            }
        }
        if let Some(extra) = self.entries.iter().find(|e| !specs.iter().any(|s| s.name == e.name)) {
            return Err(Error::invalid(
                extra.name.clone(),
                "entry is not a parameter of this network",
            ));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut head = format!("{MAGIC}\n{}\n", self.entries.len());
        let mut offset = 0usize;
        for e in &self.entries {
            let dims: Vec<String> = e.shape.iter().map(usize::to_string).collect();
            head.push_str(&format!("{} f32 {} {}\n", e.name, dims.join("x"), offset));
            offset += e.values.len() * 4;
        }
        head.push_str(SEPARATOR);
        head.push('\n');
        let mut out = head.into_bytes();
        out.reserve(offset);
        for e in &self.entries {
            for v in &e.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |line: usize, reason: &str| Error::CorruptManifest {
            line,
            reason: reason.to_string(),
        };
        let mut pos = 0usize;
        let mut line_no = 0usize;
        let mut next_line = || -> Result<&str> {
            line_no += 1;
            let rest = &bytes[pos.min(bytes.len())..];
            let end = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| corrupt(line_no, "unexpected end of manifest"))?;
            let line = std::str::from_utf8(&rest[..end]).map_err(|_| corrupt(line_no, "manifest is not UTF-8"))?;
            pos += end + 1;
            Ok(line)
        };
        if next_line()? != MAGIC {
            return Err(corrupt(1, "bad magic line"));
        }
        let count: usize = next_line()?
            .trim()
            .parse()
            .map_err(|_| corrupt(2, "entry count is not an integer"))?;
        let mut manifest = Vec::with_capacity(count.min(1 << 16));
        for i in 0..count {
            let line_idx = i + 3;
            let line = next_line()?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [name, dtype, dims, offset] = fields[..] else {
                return Err(corrupt(line_idx, "expected `<name> f32 <shape> <offset>`"));
            };
            if dtype != "f32" {
                return Err(corrupt(line_idx, &format!("unsupported dtype `{dtype}`")));
            }
            let shape = dims
                .split('x')
                .map(|d| d.parse::<usize>().ok().filter(|&n| n > 0))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| corrupt(line_idx, &format!("bad shape `{dims}`")))?;
            let offset: usize = offset
                .parse()
                .map_err(|_| corrupt(line_idx, "offset is not an integer"))?;
            manifest.push((name.to_string(), shape, offset));
        }
        if next_line()? != SEPARATOR {
            return Err(corrupt(count + 3, "missing `---` separator"));
        }
        let blob = &bytes[pos..];
        let mut store = WeightStore::new();
        for (name, shape, offset) in manifest {
            let n: usize = shape.iter().product();
            let needed = offset.saturating_add(n * 4);
            if needed > blob.len() {
                return Err(Error::TruncatedBlob {
                    name,
                    needed,
                    available: blob.len(),
                });
            }
            let values = blob[offset..needed]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if store.get(&name).is_some() {
                return Err(Error::CorruptManifest {
                    line: 0,
                    reason: format!("duplicate entry `{name}`"),
                });
            }
            store.insert(name, shape, values)?;
        }
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Load and check against a built network.
    pub fn load_for(path: impl AsRef<Path>, net: &Network) -> Result<Self> {
        let store = Self::load(path)?;
        store.validate_for(net)?;
        Ok(store)
    }
}
