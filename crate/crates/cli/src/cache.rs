//! Content-addressed store for exact resonance spectra under the output
//! directory. The eigendecomposition dominates every pipeline, so it is
//! computed once per parameter set and reused across commands; entries are
//! keyed by a hash of (N, R, boundary phase, n_c) and round-trip bit-exactly.

use anyhow::{Context, Result};
use faer::Mat;
use pobaker::io;
use pobaker::quantum::{exact_resonances, open_propagator, MapSpec, ResonanceSet, C};
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::r_tag;

/// Boundary phase of the quantization; fixed by the library, recorded in the
/// cache key so a future change cannot resurrect stale entries.
const CHI: f64 = 0.5;

pub fn fnv64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub struct SpectrumCache {
    dir: PathBuf,
}

impl SpectrumCache {
    pub fn new(out: &Path) -> Self {
        SpectrumCache {
            dir: out.join("cache"),
        }
    }

    fn entry_dir(&self, n: usize, r: f64, nc: usize) -> PathBuf {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&(n as u64).to_le_bytes());
        bytes.extend_from_slice(&r.to_bits().to_le_bytes());
        bytes.extend_from_slice(&CHI.to_bits().to_le_bytes());
        bytes.extend_from_slice(&(nc as u64).to_le_bytes());
        let key = fnv64(&bytes);
        self.dir
            .join(format!("spectrum-n{n}-r{}-nc{nc}-{key:016x}", r_tag(r)))
    }

    fn try_load(dir: &Path) -> Result<ResonanceSet> {
        let meta = fs::read_to_string(dir.join("meta.txt"))?;
        let mut cutoff = None;
        let mut n_longlived = None;
        let mut defective = Vec::new();
        for line in meta.lines() {
            if let Some(v) = line.strip_prefix("cutoff_bits=") {
                cutoff = Some(f64::from_bits(u64::from_str_radix(v, 16)?));
            } else if let Some(v) = line.strip_prefix("n_longlived=") {
                n_longlived = Some(v.parse()?);
            } else if let Some(v) = line.strip_prefix("defective=") {
                for part in v.split(',').filter(|s| !s.is_empty()) {
                    defective.push(part.parse()?);
                }
            }
        }
        let cutoff_nu_c = cutoff.context("cache meta lacks cutoff")?;
        let n_longlived = n_longlived.context("cache meta lacks long-lived count")?;
        let eigenvalues =
            io::read_complex_vector(&mut fs::File::open(dir.join("eigenvalues.bin"))?)?;
        let right = io::read_complex_matrix(&mut fs::File::open(dir.join("right.bin"))?)?;
        let left = io::read_complex_matrix(&mut fs::File::open(dir.join("left.bin"))?)?;
        let n = eigenvalues.len();
        anyhow::ensure!(right.nrows() == n && left.nrows() == n, "cache shape mismatch");
        let col = |m: &Mat<C>, j: usize| -> Vec<C> { (0..n).map(|i| m[(i, j)]).collect() };
        Ok(ResonanceSet {
            eigenvalues,
            right_vectors: (0..n).map(|j| col(&right, j)).collect(),
            left_vectors: (0..n).map(|j| col(&left, j)).collect(),
            cutoff_nu_c,
            n_longlived,
            defective,
        })
    }

    fn store(dir: &Path, rs: &ResonanceSet) -> Result<()> {
        let n = rs.eigenvalues.len();
        let tmp = dir.with_extension(format!("tmp{}", std::process::id()));
        fs::create_dir_all(&tmp)?;
        let mut f = fs::File::create(tmp.join("eigenvalues.bin"))?;
        io::write_complex_vector(&mut f, &rs.eigenvalues)?;
        let as_mat = |cols: &[Vec<C>]| Mat::from_fn(n, n, |i, j| cols[j][i]);
        let mut f = fs::File::create(tmp.join("right.bin"))?;
        io::write_complex_matrix(&mut f, &as_mat(&rs.right_vectors))?;
        let mut f = fs::File::create(tmp.join("left.bin"))?;
        io::write_complex_matrix(&mut f, &as_mat(&rs.left_vectors))?;
        let defective: Vec<String> = rs.defective.iter().map(|i| i.to_string()).collect();
        fs::write(
            tmp.join("meta.txt"),
            format!(
                "cutoff_bits={:016x}\nn_longlived={}\ndefective={}\n",
                rs.cutoff_nu_c.to_bits(),
                rs.n_longlived,
                defective.join(",")
            ),
        )?;
        match fs::rename(&tmp, dir) {
            Ok(()) => Ok(()),
            Err(_) if dir.is_dir() => {
                // another invocation won the race with identical bytes
                fs::remove_dir_all(&tmp).ok();
                Ok(())
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Return the exact resonances for the partially open map, reading the
    /// store when possible and filling it otherwise.
    pub fn load_or_compute(&self, n: usize, r: f64, nc: usize) -> Result<ResonanceSet> {
        let dir = self.entry_dir(n, r, nc);
        if dir.is_dir() {
            if let Ok(rs) = Self::try_load(&dir) {
                return Ok(rs);
            }
        }
        let spec = MapSpec::new(n, r)?;
        let rs = exact_resonances(&open_propagator(&spec)?, nc)?;
        fs::create_dir_all(&self.dir)?;
        Self::store(&dir, &rs).with_context(|| format!("writing cache entry {}", dir.display()))?;
        Ok(rs)
    }
}
