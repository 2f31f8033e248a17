//! Deterministic serialization: CSV tables (RFC-4180, UTF-8, LF), binary
//! PGM images, and a raw little-endian format for complex vectors and
//! square matrices. All writers are byte-stable for identical inputs, so
//! reruns with the same seed produce identical files.

use crate::classical::MeasureGrid;
use crate::husimi::PhaseSpaceImage;
use crate::orbits::PeriodicOrbit;
use crate::quantum::C;
use crate::scars::ScarFunction;
use crate::{Error, Result};
use faer::Mat;
use std::io::{Read, Write};
use std::path::Path;

/// Magic prefixes of the raw binary formats (8 bytes each; the header is the
/// magic followed by the dimension as a little-endian u64).
pub const VECTOR_MAGIC: &[u8; 8] = b"POBKCV01";
pub const MATRIX_MAGIC: &[u8; 8] = b"POBKCM01";

/// Grid cells with their weights: `q_cell,p_cell,weight`.
pub fn write_measure_csv(w: &mut impl Write, grid: &MeasureGrid) -> Result<()> {
    writeln!(w, "q_cell,p_cell,weight")?;
    for a in 0..grid.side {
        for b in 0..grid.side {
            writeln!(w, "{a},{b},{}", grid.at(a, b))?;
        }
    }
    Ok(())
}

/// Phase-space image cells: same layout as the measure table.
pub fn write_image_csv(w: &mut impl Write, img: &PhaseSpaceImage) -> Result<()> {
    writeln!(w, "q_cell,p_cell,value")?;
    for a in 0..img.grid_side {
        for b in 0..img.grid_side {
            writeln!(w, "{a},{b},{}", img.value(a, b))?;
        }
    }
    Ok(())
}

fn symbol_word(symbols: &[u8]) -> String {
    symbols.iter().map(|s| (b'0' + s) as char).collect()
}

/// Orbit table: `period,symbols,q0,p0,total_action,n_1,weight,inside_flag`.
pub fn write_orbits_csv(w: &mut impl Write, orbits: &[PeriodicOrbit], r: f64) -> Result<()> {
    writeln!(w, "period,symbols,q0,p0,total_action,n_1,weight,inside_flag")?;
    for orb in orbits {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            orb.period(),
            symbol_word(&orb.symbols),
            orb.points[0].q,
            orb.points[0].p,
            orb.total_action,
            orb.n_ones(),
            orb.weight(r),
            u8::from(orb.inside_repeller),
        )?;
    }
    Ok(())
}

/// Spectrum table: `index,re,im,abs` in the given order.
pub fn write_spectrum_csv(w: &mut impl Write, eigenvalues: &[C]) -> Result<()> {
    writeln!(w, "index,re,im,abs")?;
    for (i, z) in eigenvalues.iter().enumerate() {
        writeln!(w, "{i},{},{},{}", z.re, z.im, z.norm())?;
    }
    Ok(())
}

/// Scar metadata table: `symbols,m,bohr_phase,right_norm,left_norm`.
pub fn write_scars_csv(w: &mut impl Write, basis: &[ScarFunction]) -> Result<()> {
    writeln!(w, "symbols,m,bohr_phase,right_norm,left_norm")?;
    for sf in basis {
        writeln!(
            w,
            "{},{},{},{},{}",
            symbol_word(&sf.orbit_symbols),
            sf.m,
            sf.bohr_phase,
            crate::quantum::vnorm(&sf.right_state),
            crate::quantum::vnorm(&sf.left_state),
        )?;
    }
    Ok(())
}

/// Performance-trace table: `r,policy,n_sf,rank_used,p`.
pub fn write_trace_csv(
    w: &mut impl Write,
    rows: &[(f64, String, usize, usize, f64)],
) -> Result<()> {
    writeln!(w, "r,policy,n_sf,rank_used,p")?;
    for (r, policy, n_sf, rank, p) in rows {
        writeln!(w, "{r},{policy},{n_sf},{rank},{p}")?;
    }
    Ok(())
}

/// Overlap summary rows: `r,policy,overlap`.
pub fn write_overlaps_csv(w: &mut impl Write, rows: &[(f64, String, f64)]) -> Result<()> {
    writeln!(w, "r,policy,overlap")?;
    for (r, policy, o) in rows {
        writeln!(w, "{r},{policy},{o}")?;
    }
    Ok(())
}

/// One row of the reduced-basis summary table.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub r: f64,
    pub policy: String,
    /// `N_SF / N` at the performance crossing; negative when the target was
    /// never reached (saturation).
    pub n_sf_over_n: f64,
}

/// Write the summary table `r,policy,n_sf_over_n` sorted by `(r, policy)`.
pub fn write_summary_csv(w: &mut impl Write, rows: &[SummaryRow]) -> Result<()> {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| {
        a.r.partial_cmp(&b.r)
            .unwrap()
            .then_with(|| a.policy.cmp(&b.policy))
    });
    writeln!(w, "r,policy,n_sf_over_n")?;
    for row in &sorted {
        writeln!(w, "{},{},{}", row.r, row.policy, row.n_sf_over_n)?;
    }
    Ok(())
}

/// Parse a summary table previously written by [`write_summary_csv`].
pub fn read_summary_csv(r: &mut impl Read) -> Result<Vec<SummaryRow>> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, ',');
        let (Some(r), Some(policy), Some(v)) = (parts.next(), parts.next(), parts.next()) else {
            continue;
        };
        let (Ok(r), Ok(v)) = (r.parse(), v.parse()) else {
            continue;
        };
        rows.push(SummaryRow {
            r,
            policy: policy.to_owned(),
            n_sf_over_n: v,
        });
    }
    Ok(rows)
}

/// Merge new rows into a summary file, replacing rows with the same
/// `(r, policy)` key, and rewrite it sorted — repeated single-configuration
/// runs keep the file canonical.
pub fn upsert_summary(path: &Path, new_rows: &[SummaryRow]) -> Result<Vec<SummaryRow>> {
    let mut rows = if path.exists() {
        read_summary_csv(&mut std::fs::File::open(path)?)?
    } else {
        Vec::new()
    };
    for nr in new_rows {
        match rows
            .iter_mut()
            .find(|row| row.r == nr.r && row.policy == nr.policy)
        {
            Some(row) => *row = nr.clone(),
            None => rows.push(nr.clone()),
        }
    }
    let mut out = Vec::new();
    write_summary_csv(&mut out, &rows)?;
    std::fs::write(path, out)?;
    read_summary_csv(&mut std::fs::File::open(path)?)
}

/// Intensity mapping used when quantizing grid values to PGM gray levels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgmScale {
    /// `v / v_max`.
    Linear,
    /// `1 + log10(v / v_max)/6`, clamped — six decades of dynamic range.
    Log,
}

/// Bit depth of the PGM output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgmDepth {
    Eight,
    Sixteen,
}

/// Binary (P5) portable graymap of a `side × side` grid. Values are scaled
/// by the maximum; rows run over `p` from high to low so the origin sits at
/// the lower-left corner of the rendered image, matching phase-space plots.
pub fn write_pgm(
    w: &mut impl Write,
    side: usize,
    values: &[f64],
    depth: PgmDepth,
    scale: PgmScale,
) -> Result<()> {
    if values.len() != side * side {
        return Err(Error::GridMismatch(side, values.len()));
    }
    let vmax = values.iter().cloned().fold(0.0f64, f64::max);
    if !(vmax > 0.0) || values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::ZeroNormImage);
    }
    let maxval: u32 = match depth {
        PgmDepth::Eight => 255,
        PgmDepth::Sixteen => 65535,
    };
    writeln!(w, "P5\n{side} {side}\n{maxval}")?;
    let quantize = |v: f64| -> u32 {
        let t = match scale {
            PgmScale::Linear => v / vmax,
            PgmScale::Log => {
                if v <= 0.0 {
                    0.0
                } else {
                    (1.0 + (v / vmax).log10() / 6.0).clamp(0.0, 1.0)
                }
            }
        };
        (t * maxval as f64).round() as u32
    };
    for row in 0..side {
        let b = side - 1 - row; // p decreasing downward
        for a in 0..side {
            let g = quantize(values[a * side + b]);
            match depth {
                PgmDepth::Eight => w.write_all(&[g as u8])?,
                PgmDepth::Sixteen => w.write_all(&(g as u16).to_be_bytes())?,
            }
        }
    }
    Ok(())
}

/// Raw complex vector: 8-byte magic, u64 LE length, then interleaved
/// re/im f64 LE.
pub fn write_complex_vector(w: &mut impl Write, v: &[C]) -> Result<()> {
    w.write_all(VECTOR_MAGIC)?;
    w.write_all(&(v.len() as u64).to_le_bytes())?;
    for z in v {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

fn read_header(r: &mut impl Read, magic: &[u8; 8]) -> Result<usize> {
    let mut head = [0u8; 16];
    r.read_exact(&mut head)?;
    if &head[..8] != magic {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            "unrecognized raw-format magic",
        )));
    }
    Ok(u64::from_le_bytes(head[8..].try_into().unwrap()) as usize)
}

fn read_complexes(r: &mut impl Read, count: usize) -> Result<Vec<C>> {
    let mut buf = vec![0u8; count * 16];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(16)
        .map(|ch| {
            C::new(
                f64::from_le_bytes(ch[..8].try_into().unwrap()),
                f64::from_le_bytes(ch[8..].try_into().unwrap()),
            )
        })
        .collect())
}

pub fn read_complex_vector(r: &mut impl Read) -> Result<Vec<C>> {
    let len = read_header(r, VECTOR_MAGIC)?;
    read_complexes(r, len)
}

/// Raw square complex matrix: 8-byte magic, u64 LE side, then the entries
/// column-major as interleaved re/im f64 LE.
pub fn write_complex_matrix(w: &mut impl Write, m: &Mat<C>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(m.nrows(), m.ncols()));
    }
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            w.write_all(&m[(i, j)].re.to_le_bytes())?;
            w.write_all(&m[(i, j)].im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_complex_matrix(r: &mut impl Read) -> Result<Mat<C>> {
    let n = read_header(r, MATRIX_MAGIC)?;
    let flat = read_complexes(r, n * n)?;
    Ok(Mat::from_fn(n, n, |i, j| flat[j * n + i]))
}
