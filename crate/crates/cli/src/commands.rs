//! One function per subcommand. Every command is a pure function of its
//! resolved configuration: file contents depend only on (config, seed), so
//! re-runs are byte-identical.

use anyhow::{bail, Context, Result};
use faer::Mat;
use pobaker::classical::{
    partial_repeller, partial_repeller_lattice, trapped_measure, Flow, MeasureGrid,
};
use pobaker::husimi::{overlap, CoherentGrid, PhaseSpaceImage};
use pobaker::io::{self, PgmDepth, PgmScale, SummaryRow};
use pobaker::orbits::{enumerate_orbits, select_orbits, CoverWeights, OrbitSelection};
use pobaker::quantum::{open_propagator, MapSpec, ResonanceSet, C};
use pobaker::scars::{ehrenfest_time, scar_basis, ScarFunction};
use pobaker::semiclassical::{
    assemble_matrices, find_min_basis, reconstruct_states, solve_generalized, MinBasisSearch,
    DEFAULT_SVD_TOL,
};
use rayon::prelude::*;
use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::cache::{fnv64, SpectrumCache};
use crate::config::{r_tag, Resolved};

/// Grid side and lattice size of the covering measure used for orbit
/// ordering (classical resolution, independent of the quantum dimension).
const COVER_GRID: usize = 27;
const COVER_LATTICE: usize = 1_000_000;

fn policy_label(n_max_out: usize) -> String {
    if n_max_out == 0 {
        "repeller-only".to_string()
    } else {
        format!("out{n_max_out}")
    }
}

fn writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| {
        format!("creating {}", path.display())
    })?))
}

/// Write a measure grid as CSV plus linear- and log-scale images.
fn emit_measure(out: &Path, stem: &str, grid: &MeasureGrid) -> Result<()> {
    io::write_measure_csv(&mut writer(&out.join(format!("{stem}.csv")))?, grid)?;
    io::write_pgm(
        &mut writer(&out.join(format!("{stem}.pgm")))?,
        grid.side,
        &grid.values,
        PgmDepth::Sixteen,
        PgmScale::Linear,
    )?;
    io::write_pgm(
        &mut writer(&out.join(format!("{stem}_log.pgm")))?,
        grid.side,
        &grid.values,
        PgmDepth::Sixteen,
        PgmScale::Log,
    )?;
    Ok(())
}

/// Write a phase-space image as CSV plus linear- and log-scale renderings.
fn emit_image(out: &Path, stem: &str, img: &PhaseSpaceImage) -> Result<()> {
    io::write_image_csv(&mut writer(&out.join(format!("{stem}.csv")))?, img)?;
    io::write_pgm(
        &mut writer(&out.join(format!("{stem}.pgm")))?,
        img.grid_side,
        &img.values,
        PgmDepth::Sixteen,
        PgmScale::Linear,
    )?;
    io::write_pgm(
        &mut writer(&out.join(format!("{stem}_log.pgm")))?,
        img.grid_side,
        &img.values,
        PgmDepth::Sixteen,
        PgmScale::Log,
    )?;
    Ok(())
}

/// Enumerate orbits and build the windowed scar-function basis for one
/// (reflectivity, admission) policy.
fn scar_selection(
    cfg: &Resolved,
    r: f64,
    n_max_out: usize,
    u: &Mat<C>,
) -> Result<(Vec<ScarFunction>, OrbitSelection)> {
    let all = enumerate_orbits(cfg.lmax)?;
    let mu = partial_repeller_lattice(r, COVER_GRID, cfg.depth, COVER_LATTICE)?;
    let sel = select_orbits(
        &all,
        all.len(),
        n_max_out,
        r,
        COVER_GRID,
        CoverWeights::Measure(&mu),
    )?;
    let basis = scar_basis(&sel.ordered_orbits, u, ehrenfest_time(cfg.n))?;
    Ok((basis, sel))
}

pub fn cmd_orbits(cfg: &Resolved) -> Result<()> {
    fs::create_dir_all(&cfg.out)?;
    let orbits = enumerate_orbits(cfg.lmax)?;
    let r = cfg.r_list.first().copied().unwrap_or(0.07);
    let path = cfg.out.join(format!("orbits_l{}_r{}.csv", cfg.lmax, r_tag(r)));
    io::write_orbits_csv(&mut writer(&path)?, &orbits, r)?;
    let inside = orbits.iter().filter(|o| o.inside_repeller).count();
    println!(
        "{} orbits up to period {} ({} on the repeller) -> {}",
        orbits.len(),
        cfg.lmax,
        inside,
        path.display()
    );
    for l in 1..=cfg.lmax {
        let total = orbits.iter().filter(|o| o.period() == l).count();
        let ins = orbits
            .iter()
            .filter(|o| o.period() == l && o.inside_repeller)
            .count();
        println!("  period {l}: {total} orbits, {ins} inside");
    }
    Ok(())
}

pub fn cmd_measure(cfg: &Resolved) -> Result<()> {
    fs::create_dir_all(&cfg.out)?;
    for &r in &cfg.r_list {
        // per-measure seeds derived from the base seed and parameters
        let derive = |flow_byte: u8| -> u64 {
            let mut bytes = r.to_bits().to_le_bytes().to_vec();
            bytes.push(flow_byte);
            cfg.seed ^ fnv64(&bytes)
        };
        let mu_b = trapped_measure(Flow::Forward, r, cfg.grid, cfg.depth, cfg.samples, derive(0))?;
        let mu_f = trapped_measure(Flow::Backward, r, cfg.grid, cfg.depth, cfg.samples, derive(1))?;
        let mu = partial_repeller(&mu_b, &mu_f)?;
        let tag = r_tag(r);
        emit_measure(&cfg.out, &format!("measure_r{tag}_b"), &mu_b)?;
        emit_measure(&cfg.out, &format!("measure_r{tag}_f"), &mu_f)?;
        emit_measure(&cfg.out, &format!("measure_r{tag}_joint"), &mu)?;
        println!(
            "R={r}: horizon-{} measures on a {}x{} grid -> {}/measure_r{tag}_*.{{csv,pgm}}",
            cfg.depth,
            cfg.grid,
            cfg.grid,
            cfg.out.display()
        );
    }
    Ok(())
}

pub fn cmd_spectrum(cfg: &Resolved) -> Result<()> {
    fs::create_dir_all(&cfg.out)?;
    let cache = SpectrumCache::new(&cfg.out);
    for &r in &cfg.r_list {
        let rs = cache.load_or_compute(cfg.n, r, cfg.nc)?;
        let path = cfg.out.join(format!("spectrum_n{}_r{}.csv", cfg.n, r_tag(r)));
        io::write_spectrum_csv(&mut writer(&path)?, &rs.eigenvalues)?;
        println!(
            "N={} R={r}: |z_1|={:.4}, |z_{}|={:.4}, long-lived cutoff {:.4} -> {}",
            cfg.n,
            rs.eigenvalues[0].norm(),
            cfg.nc,
            rs.eigenvalues[cfg.nc.min(rs.eigenvalues.len()) - 1].norm(),
            rs.cutoff_nu_c,
            path.display()
        );
    }
    Ok(())
}

struct SweepJob {
    r: f64,
    n_max_out: usize,
    spectrum_idx: usize,
}

fn summary_has(rows: &[SummaryRow], r: f64, policy: &str) -> bool {
    rows.iter().any(|row| row.r == r && row.policy == policy)
}

/// Run one minimal-basis search and return (row, trace rows).
fn sweep_one(
    cfg: &Resolved,
    r: f64,
    n_max_out: usize,
    exact: &ResonanceSet,
) -> Result<(SummaryRow, MinBasisSearch)> {
    let u = open_propagator(&MapSpec::new(cfg.n, r)?)?;
    let (basis, _) = scar_selection(cfg, r, n_max_out, &u)?;
    let search = find_min_basis(&basis, &u, exact, cfg.target_p, cfg.eps, DEFAULT_SVD_TOL)?;
    let n_sf_over_n = match search.n_sf {
        Some(k) => k as f64 / cfg.n as f64,
        // saturation: no prefix reached the target; record the best
        // performance, negated, so the row stays machine-readable
        None => -search.report.performance,
    };
    Ok((
        SummaryRow {
            r,
            policy: policy_label(n_max_out),
            n_sf_over_n,
        },
        search,
    ))
}

pub fn cmd_sweep(cfg: &Resolved) -> Result<()> {
    fs::create_dir_all(&cfg.out)?;
    let summary_path = cfg.out.join(format!("summary_n{}.csv", cfg.n));
    let existing = if summary_path.exists() {
        io::read_summary_csv(&mut File::open(&summary_path)?)?
    } else {
        Vec::new()
    };
    let policies: Vec<usize> = match cfg.nmax_out {
        Some(k) => vec![k],
        None => vec![0, 5, 50],
    };

    // spectra are shared across policies; fill the cache once per R
    let cache = SpectrumCache::new(&cfg.out);
    let spectra: Vec<(f64, ResonanceSet)> = cfg
        .r_list
        .iter()
        .map(|&r| Ok((r, cache.load_or_compute(cfg.n, r, cfg.nc)?)))
        .collect::<Result<_>>()?;

    let jobs: Vec<SweepJob> = cfg
        .r_list
        .iter()
        .enumerate()
        .flat_map(|(i, &r)| {
            policies
                .iter()
                .filter(|&&k| !summary_has(&existing, r, &policy_label(k)))
                .map(move |&k| SweepJob {
                    r,
                    n_max_out: k,
                    spectrum_idx: i,
                })
                .collect::<Vec<_>>()
        })
        .collect();
    if jobs.is_empty() {
        println!(
            "summary already covers all {} requested (R, policy) points: {}",
            cfg.r_list.len() * policies.len(),
            summary_path.display()
        );
        return Ok(());
    }

    let results: Vec<(SummaryRow, MinBasisSearch)> = jobs
        .par_iter()
        .map(|job| sweep_one(cfg, job.r, job.n_max_out, &spectra[job.spectrum_idx].1))
        .collect::<Result<_>>()?;

    for ((row, search), job) in results.iter().zip(&jobs) {
        let label = policy_label(job.n_max_out);
        let trace_path = cfg
            .out
            .join(format!("trace_n{}_r{}_{label}.csv", cfg.n, r_tag(job.r)));
        let rows: Vec<(f64, String, usize, usize, f64)> = search
            .trace
            .iter()
            .map(|&(k, rank, p)| (job.r, label.clone(), k, rank, p))
            .collect();
        io::write_trace_csv(&mut writer(&trace_path)?, &rows)?;
        match search.n_sf {
            Some(k) => println!(
                "R={} {label}: N_SF={k} (N_SF/N={:.4}, P={:.3})",
                job.r, row.n_sf_over_n, search.report.performance
            ),
            None => println!(
                "R={} {label}: target P={} not reached (best P={:.3} with the full basis)",
                job.r, cfg.target_p, search.report.performance
            ),
        }
    }

    let new_rows: Vec<SummaryRow> = results.into_iter().map(|(row, _)| row).collect();
    io::upsert_summary(&summary_path, &new_rows)?;
    println!("summary -> {}", summary_path.display());
    Ok(())
}

fn read_overlap_rows(path: &Path) -> Result<Vec<(f64, String, f64)>> {
    let mut rows = Vec::new();
    if !path.exists() {
        return Ok(rows);
    }
    let text = fs::read_to_string(path)?;
    for line in text.lines().skip(1) {
        let mut parts = line.splitn(3, ',');
        let (Some(r), Some(policy), Some(o)) = (parts.next(), parts.next(), parts.next()) else {
            bail!("malformed overlap row: {line}");
        };
        rows.push((r.parse()?, policy.to_string(), o.parse()?));
    }
    Ok(rows)
}

fn upsert_overlaps(path: &Path, new_rows: &[(f64, String, f64)]) -> Result<()> {
    let mut rows = read_overlap_rows(path)?;
    for new in new_rows {
        rows.retain(|(r, policy, _)| !(*r == new.0 && *policy == new.1));
        rows.push(new.clone());
    }
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then_with(|| a.1.cmp(&b.1)));
    io::write_overlaps_csv(&mut writer(path)?, &rows)?;
    Ok(())
}

pub fn cmd_repeller(cfg: &Resolved) -> Result<()> {
    fs::create_dir_all(&cfg.out)?;
    let cache = SpectrumCache::new(&cfg.out);
    let mut overlap_rows = Vec::new();
    let mut mass_rows: Vec<(f64, &str, f64)> = Vec::new();

    for &r in &cfg.r_list {
        // default policy pairing of the reference experiment: repeller-only
        // at small R, five outside orbits once the opening reflects enough
        let n_max_out = cfg.nmax_out.unwrap_or(if r < 0.1 { 0 } else { 5 });
        let label = policy_label(n_max_out);
        let tag = r_tag(r);
        let u = open_propagator(&MapSpec::new(cfg.n, r)?)?;
        let exact = cache.load_or_compute(cfg.n, r, cfg.nc)?;
        let (basis, sel) = scar_selection(cfg, r, n_max_out, &u)?;

        let search = find_min_basis(&basis, &u, &exact, cfg.target_p, cfg.eps, DEFAULT_SVD_TOL)?;
        let Some(n_sf) = search.n_sf else {
            bail!(
                "R={r} {label}: target P={} unreachable (best P={:.3}); no semiclassical image",
                cfg.target_p,
                search.report.performance
            );
        };
        let (a, s) = assemble_matrices(&basis[..n_sf], &u)?;
        let gs = solve_generalized(&a, &s, DEFAULT_SVD_TOL)?;
        let (rights, lefts) = reconstruct_states(&basis[..n_sf], &gs);
        let j_max = cfg.nc.min(rights.len());
        let sc_pairs: Vec<_> = rights.into_iter().zip(lefts).take(j_max).collect();
        let exact_pairs: Vec<_> = exact
            .right_vectors
            .iter()
            .cloned()
            .zip(exact.left_vectors.iter().cloned())
            .take(cfg.nc)
            .collect();

        let grid = CoherentGrid::new(cfg.n, cfg.grid);
        let (q_exact, sk) = grid.accumulate(&exact_pairs, exact_pairs.len(), "exact")?;
        anyhow::ensure!(sk.is_empty(), "degenerate exact pairs at R={r}: {sk:?}");
        let (q_sc, sk) = grid.accumulate(&sc_pairs, sc_pairs.len(), "semiclassical")?;
        anyhow::ensure!(sk.is_empty(), "degenerate semiclassical pairs at R={r}: {sk:?}");
        emit_image(&cfg.out, &format!("husimi_exact_n{}_r{tag}", cfg.n), &q_exact)?;
        emit_image(&cfg.out, &format!("husimi_sc_n{}_r{tag}", cfg.n), &q_sc)?;
        let o = overlap(&q_exact, &q_sc)?;
        println!("R={r} {label}: N_SF={n_sf}, overlap O={o:.6}");
        overlap_rows.push((r, label, o));

        // scar-function sums split by orbit location, from a selection that
        // always carries outside orbits so both panels are populated
        let (basis5, sel5) = if n_max_out >= 5 {
            (basis, sel)
        } else {
            scar_selection(cfg, r, 5, &u)?
        };
        let inside_words: HashSet<&[u8]> = sel5
            .ordered_orbits
            .iter()
            .filter(|o| o.inside_repeller)
            .map(|o| o.symbols.as_slice())
            .collect();
        let split = |want_inside: bool| -> Vec<(Vec<C>, Vec<C>)> {
            basis5
                .iter()
                .filter(|sf| inside_words.contains(sf.orbit_symbols.as_slice()) == want_inside)
                .map(|sf| (sf.right_state.clone(), sf.left_state.clone()))
                .collect()
        };
        for (set, pairs) in [("inside", split(true)), ("outside", split(false))] {
            let (img, _) = grid.accumulate(&pairs, pairs.len(), set)?;
            emit_image(&cfg.out, &format!("scarsum_{set}_n{}_r{tag}", cfg.n), &img)?;
            // comparable across grid sizes: mean cell value times dimension
            let mass = img.values.iter().sum::<f64>() * cfg.n as f64
                / (cfg.grid * cfg.grid) as f64;
            mass_rows.push((r, set, mass));
            println!("R={r}: {set}-orbit scar-function mass {mass:.4}");
        }
    }

    upsert_overlaps(&cfg.out.join(format!("overlaps_n{}.csv", cfg.n)), &overlap_rows)?;
    let mut w = writer(&cfg.out.join(format!("scar_mass_n{}.csv", cfg.n)))?;
    writeln!(w, "r,set,mass")?;
    for (r, set, mass) in &mass_rows {
        writeln!(w, "{r},{set},{mass}")?;
    }
    Ok(())
}

/// Chain measures, sweep, and repeller images at the reference defaults;
/// `--large` appends the N=729 spot checks to their own summary file.
pub fn cmd_reproduce(measure: &Resolved, sweep: &Resolved, repeller: &Resolved) -> Result<()> {
    println!("== classical measures ==");
    cmd_measure(measure)?;
    println!("== minimal-basis sweep ==");
    cmd_sweep(sweep)?;
    println!("== quantum repeller images ==");
    cmd_repeller(repeller)?;

    if sweep.large {
        println!("== N=729 spot checks (this takes a while) ==");
        let mut big = sweep.clone();
        big.n = 729;
        big.lmax = 9;
        // long-lived count kept at the reference fraction n_c/N = 60/243
        big.nc = 180;
        let cache = SpectrumCache::new(&big.out);
        let summary_path = big.out.join("summary_n729.csv");
        let existing = if summary_path.exists() {
            io::read_summary_csv(&mut File::open(&summary_path)?)?
        } else {
            Vec::new()
        };
        let mut rows = Vec::new();
        for (r, n_max_out) in [(0.01, 0), (0.1, 50)] {
            if summary_has(&existing, r, &policy_label(n_max_out)) {
                println!("R={r} {}: already in summary", policy_label(n_max_out));
                continue;
            }
            let exact = cache.load_or_compute(big.n, r, big.nc)?;
            let (row, search) = sweep_one(&big, r, n_max_out, &exact)?;
            match search.n_sf {
                Some(k) => println!(
                    "R={r} {}: N_SF={k} (N_SF/N={:.4})",
                    row.policy, row.n_sf_over_n
                ),
                None => println!(
                    "R={r} {}: target not reached (best P={:.3})",
                    row.policy, search.report.performance
                ),
            }
            rows.push(row);
        }
        if !rows.is_empty() {
            io::upsert_summary(&summary_path, &rows)?;
            println!("summary -> {}", summary_path.display());
        }
    }
    Ok(())
}
