//! Acceptance gate: every headline result the crate must reproduce, one
//! test per criterion. Heavy configurations share the N=243 defaults of the
//! reference experiment: orbits up to period 7, 60 long-lived resonances,
//! matching radius 1e-3, target performance 0.8, Ehrenfest window 5,
//! measure-weighted covering order.

use faer::Mat;
use pobaker::classical::{
    evolve, in_opening, partial_repeller_lattice, trapped_measure, Flow, PhasePoint,
};
use pobaker::husimi::{overlap, CoherentGrid};
use pobaker::io;
use pobaker::orbits::{enumerate_orbits, select_orbits, CoverWeights, PeriodicOrbit};
use pobaker::quantum::{
    baker_propagator, exact_resonances, open_propagator, C, MapSpec,
};
use pobaker::scars::{ehrenfest_time, scar_basis};
use pobaker::semiclassical::{
    assemble_matrices, find_min_basis, match_eigenvalues, reconstruct_states, solve_generalized,
};

const N: usize = 243;
const N_C: usize = 60;
const EPS: f64 = 1e-3;
const TARGET_P: f64 = 0.8;
const SVD_TOL: f64 = 1e-8;
const COVER_GRID: usize = 27;
const MEASURE_DEPTH: usize = 10;
const MEASURE_LATTICE: usize = 1_000_000;

/// Frozen minimal-basis sizes (repeller-only policy) from the production
/// pipeline; the qualitative regime constraints are asserted independently
/// of these point values.
const FROZEN_REP: [(f64, usize); 4] = [(0.001, 155), (0.01, 181), (0.03, 183), (0.07, 203)];
const FROZEN_TOL: usize = 2;

fn propagator(n: usize, r: f64) -> Mat<C> {
    open_propagator(&MapSpec::new(n, r).unwrap()).unwrap()
}

fn selection_basis_lmax(
    n: usize,
    r: f64,
    l_max: usize,
    n_max_out: usize,
    u: &Mat<C>,
) -> Vec<pobaker::scars::ScarFunction> {
    let all = enumerate_orbits(l_max).unwrap();
    let mu = partial_repeller_lattice(r, COVER_GRID, MEASURE_DEPTH, MEASURE_LATTICE).unwrap();
    let sel = select_orbits(
        &all,
        all.len(),
        n_max_out,
        r,
        COVER_GRID,
        CoverWeights::Measure(&mu),
    )
    .unwrap();
    scar_basis(&sel.ordered_orbits, u, ehrenfest_time(n)).unwrap()
}

fn selection_basis(n: usize, r: f64, n_max_out: usize, u: &Mat<C>) -> Vec<pobaker::scars::ScarFunction> {
    selection_basis_lmax(n, r, 7, n_max_out, u)
}

/// Minimal basis size for target performance, plus the library's best report
/// when the target was never reached.
fn crossing(r: f64, n_max_out: usize) -> (Option<usize>, f64, usize) {
    let u = propagator(N, r);
    let basis = selection_basis(N, r, n_max_out, &u);
    let exact = exact_resonances(&u, N_C).unwrap();
    let search = find_min_basis(&basis, &u, &exact, TARGET_P, EPS, SVD_TOL).unwrap();
    (search.n_sf, search.report.performance, basis.len())
}

fn mobius(n: usize) -> i64 {
    let (mut m, mut n) = (1i64, n);
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return 0;
            }
            m = -m;
        }
        p += 1;
    }
    if n > 1 {
        m = -m;
    }
    m
}

/// Aperiodic necklaces of length `l` over `k` symbols.
fn necklace_count(l: usize, k: u64) -> u64 {
    let mut total = 0i64;
    for d in 1..=l {
        if l % d == 0 {
            total += mobius(l / d) * (k.pow(d as u32) as i64);
        }
    }
    (total / l as i64) as u64
}

#[test]
fn criterion_orbit_census() {
    let orbits = enumerate_orbits(7).unwrap();
    let per_period = |pred: &dyn Fn(&PeriodicOrbit) -> bool| -> Vec<usize> {
        (1..=7)
            .map(|l| orbits.iter().filter(|o| o.period() == l && pred(o)).count())
            .collect()
    };
    let all = per_period(&|_| true);
    let inside = per_period(&|o| o.inside_repeller);

    // independent combinatorial oracle
    let oracle_all: Vec<u64> = (1..=7).map(|l| necklace_count(l, 3)).collect();
    let oracle_inside: Vec<u64> = (1..=7).map(|l| necklace_count(l, 2)).collect();
    assert_eq!(all, oracle_all.iter().map(|&x| x as usize).collect::<Vec<_>>());
    assert_eq!(
        inside,
        oracle_inside.iter().map(|&x| x as usize).collect::<Vec<_>>()
    );

    assert_eq!(all, vec![3, 3, 8, 18, 48, 116, 312]);
    assert_eq!(inside, vec![2, 1, 2, 3, 6, 9, 18]);
    assert_eq!(orbits.len(), 508);
    assert_eq!(orbits.iter().filter(|o| o.inside_repeller).count(), 41);
    // 5 outside orbits are about 1% of the 467 available ones
    assert_eq!(orbits.len() - 41, 467);
}

#[test]
fn criterion_quantization_sanity() {
    for n in [3usize, 27, 243] {
        let u = baker_propagator(&MapSpec::new(n, 0.5).unwrap()).unwrap();
        // unitarity
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let mut acc = C::new(0.0, 0.0);
                for k in 0..n {
                    acc += u[(k, i)].conj() * u[(k, j)];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((acc - C::new(expect, 0.0)).norm());
            }
        }
        assert!(worst < 1e-10, "N={n}: U†U deviates {worst:.2e}");

        // closed map: unimodular spectrum
        let rs = exact_resonances(&propagator(n, 1.0), 1).unwrap();
        for z in &rs.eigenvalues {
            assert!((z.norm() - 1.0).abs() < 1e-9, "N={n}: |z|={}", z.norm());
        }

        // fully open map: the middle third of rows and columns vanishes and
        // the rest is untouched
        let open = propagator(n, 0.0);
        for i in 0..n {
            for j in 0..n {
                let gap = |k: usize| k >= n / 3 && k < 2 * n / 3;
                if gap(i) || gap(j) {
                    assert!(open[(i, j)].norm() < 1e-300);
                } else {
                    assert_eq!(open[(i, j)], u[(i, j)]);
                }
            }
        }
    }
}

#[test]
fn criterion_paper_overlap_values() {
    // semiclassical partial quantum repeller vs the exact one
    let run = |r: f64, n_max_out: usize| -> f64 {
        let u = propagator(N, r);
        let basis = selection_basis(N, r, n_max_out, &u);
        let exact = exact_resonances(&u, N_C).unwrap();
        let search = find_min_basis(&basis, &u, &exact, TARGET_P, EPS, SVD_TOL).unwrap();
        let n_sf = search.n_sf.expect("performance target reachable");
        let (a, s) = assemble_matrices(&basis[..n_sf], &u).unwrap();
        let gs = solve_generalized(&a, &s, SVD_TOL).unwrap();
        assert!(gs.rank_used >= N_C);
        let (rights, lefts) = reconstruct_states(&basis[..n_sf], &gs);
        let sc_pairs: Vec<_> = rights.into_iter().zip(lefts).take(N_C).collect();
        let exact_pairs: Vec<_> = exact
            .right_vectors
            .into_iter()
            .zip(exact.left_vectors)
            .take(N_C)
            .collect();

        let grid = CoherentGrid::new(N, 128);
        let (q_exact, skipped) = grid.accumulate(&exact_pairs, N_C, "exact").unwrap();
        assert!(skipped.is_empty());
        let (q_sc, skipped) = grid.accumulate(&sc_pairs, N_C, "semiclassical").unwrap();
        assert!(skipped.is_empty());
        overlap(&q_exact, &q_sc).unwrap()
    };

    let o_rep = run(0.07, 0);
    assert!(
        (o_rep - 0.994).abs() <= 0.01,
        "R=0.07 repeller-only overlap {o_rep}"
    );
    let o_out = run(0.2, 5);
    assert!(1.0 - o_out < 0.01, "R=0.2 with-outside overlap {o_out}");
}

#[test]
fn criterion_regime_structure() {
    let mut failures: Vec<String> = Vec::new();

    // repeller-only crossings, non-decreasing in R, near frozen values
    let mut rep = Vec::new();
    for &(r, frozen) in &FROZEN_REP {
        let (n_sf, best_p, _) = crossing(r, 0);
        println!("repeller-only R={r}: N_SF={n_sf:?} (frozen {frozen}, best P {best_p:.3})");
        match n_sf {
            Some(k) => {
                if k.abs_diff(frozen) > FROZEN_TOL {
                    failures.push(format!("R={r}: N_SF={k} drifted from frozen {frozen}"));
                }
                rep.push(k);
            }
            None => failures.push(format!("R={r}: repeller-only target never reached")),
        }
    }
    if rep.windows(2).any(|w| w[0] > w[1]) {
        failures.push(format!("repeller-only N_SF not non-decreasing: {rep:?}"));
    }

    // small R: adding 5 outside orbits must not lower N_SF
    for (i, &(r, _)) in FROZEN_REP.iter().take(2).enumerate() {
        let (n_sf, _, _) = crossing(r, 5);
        println!("with-outside R={r}: N_SF={n_sf:?}");
        match n_sf {
            Some(k) if k < rep[i] => {
                failures.push(format!("R={r}: outside orbits lowered N_SF {k} < {}", rep[i]))
            }
            Some(_) => {}
            None => failures.push(format!("R={r}: with-outside target never reached")),
        }
    }

    // R=0.07: the two policies coincide within a small band
    {
        let (n_sf, _, _) = crossing(0.07, 5);
        println!("with-outside R=0.07: N_SF={n_sf:?}");
        match n_sf {
            Some(k) if k.abs_diff(rep[3]) > 6 => failures.push(format!(
                "R=0.07: with-outside N_SF={k} far from repeller-only {}",
                rep[3]
            )),
            Some(_) => {}
            None => failures.push("R=0.07: with-outside target never reached".into()),
        }
    }

    // R=0.35: repeller-only saturates below target; outside orbits reach it
    // only with essentially the full dimension
    {
        let (n_sf, best_p, basis_len) = crossing(0.35, 0);
        println!("repeller-only R=0.35: N_SF={n_sf:?} best P={best_p:.3} of {basis_len}");
        if n_sf.is_some() {
            failures.push(format!("R=0.35: repeller-only unexpectedly crossed at {n_sf:?}"));
        }
        if best_p >= TARGET_P {
            failures.push(format!("R=0.35: repeller-only best P {best_p} above target"));
        }
        let (n_sf, _, _) = crossing(0.35, 5);
        println!("with-outside R=0.35: N_SF={n_sf:?}");
        match n_sf {
            Some(k) => {
                if (k as f64) < 0.95 * N as f64 {
                    failures.push(format!(
                        "R=0.35: with-outside crossed at {k}, below the saturation regime"
                    ));
                }
            }
            None => failures.push("R=0.35: with-outside target never reached".into()),
        }
    }

    assert!(failures.is_empty(), "regime failures:\n{}", failures.join("\n"));
}

#[test]
#[ignore = "large-N spot check (an hour or more); run with --ignored"]
fn criterion_large_n_spot_check() {
    let n = 729;
    // long-lived count scaled from the reference run at fixed fraction:
    // n_c/N = 60/243 -> 180
    let n_c = 180;
    assert_eq!(ehrenfest_time(n), 6);
    // the target fraction 0.69 means ~503 scar functions, so the repeller
    // pool must extend to period 9 (periods ≤ 7 carry only 232 functions);
    // the second point admits 50 outside orbits — the standard wide policy
    // from the sweep command — so the orbit pool (50 outside vs 41 inside)
    // is mainly outside the repeller
    let run = |r: f64, n_max_out: usize| -> f64 {
        let u = propagator(n, r);
        let basis = selection_basis_lmax(n, r, 9, n_max_out, &u);
        let exact = exact_resonances(&u, n_c).unwrap();
        let search = find_min_basis(&basis, &u, &exact, TARGET_P, EPS, SVD_TOL).unwrap();
        match search.n_sf {
            Some(k) => k as f64 / n as f64,
            None => f64::INFINITY,
        }
    };
    let frac_rep = run(0.01, 0);
    println!("N=729 R=0.01 repeller-only: N_SF/N = {frac_rep:.3}");
    assert!(
        (frac_rep - 0.69).abs() <= 0.05,
        "N_SF/N = {frac_rep} vs 0.69 ± 0.05"
    );
    let frac_out = run(0.1, 50);
    println!("N=729 R=0.1 with-outside: N_SF/N = {frac_out:.3}");
    assert!(
        (frac_out - 0.96).abs() <= 0.03,
        "N_SF/N = {frac_out} vs 0.96 ± 0.03"
    );
}

#[test]
fn property_measure_normalization_and_intensity_bookkeeping() {
    for r in [0.0, 0.07] {
        let mu = partial_repeller_lattice(r, COVER_GRID, MEASURE_DEPTH, MEASURE_LATTICE).unwrap();
        assert!((mu.total() - 1.0).abs() < 1e-12);
        assert!(mu.values.iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    // quadrature agrees with an independently seeded Monte Carlo estimate
    let lat = partial_repeller_lattice(0.07, COVER_GRID, MEASURE_DEPTH, MEASURE_LATTICE).unwrap();
    let mc_b = trapped_measure(Flow::Forward, 0.07, COVER_GRID, MEASURE_DEPTH, 2_000_000, 41).unwrap();
    let mc_f = trapped_measure(Flow::Backward, 0.07, COVER_GRID, MEASURE_DEPTH, 2_000_000, 42).unwrap();
    let mc = pobaker::classical::partial_repeller(&mc_b, &mc_f).unwrap();
    let l1 = lat.l1_distance(&mc).unwrap();
    assert!(l1 < 0.12, "lattice vs Monte Carlo L1 = {l1}");

    // a trajectory's intensity is exactly R^(opening visits)
    let mut x = PhasePoint::new(0.25, 0.75); // the period-2 orbit "01" is at (1/4, 1/2)... start anywhere
    let r = 0.37;
    let mut expected = 1.0;
    for _ in 0..12 {
        if in_opening(x.q) {
            expected *= r;
        }
        let e = evolve(x, Flow::Forward, 1, r);
        x = e.point;
    }
    let direct = evolve(PhasePoint::new(0.25, 0.75), Flow::Forward, 12, r);
    assert_eq!(direct.intensity, expected);
    assert_eq!(direct.opening_visits, 0); // (1/4, 3/4) never meets the strip
}

#[test]
fn property_biorthonormal_resonances() {
    let u = propagator(N, 0.07);
    let rs = exact_resonances(&u, N_C).unwrap();
    assert!(rs.defective.is_empty());
    let mut worst_pair = 0.0f64;
    let mut worst_norm = 0.0f64;
    for j in 0..N {
        for k in 0..N {
            let d = pobaker::quantum::dot(&rs.left_vectors[j], &rs.right_vectors[k]);
            let expect = if j == k { 1.0 } else { 0.0 };
            worst_pair = worst_pair.max((d - C::new(expect, 0.0)).norm());
        }
        let nr = pobaker::quantum::vnorm(&rs.right_vectors[j]);
        let nl = pobaker::quantum::vnorm(&rs.left_vectors[j]);
        worst_norm = worst_norm.max((nr - nl).abs());
    }
    assert!(worst_pair < 1e-8, "biorthonormality deviation {worst_pair:.2e}");
    assert!(worst_norm < 1e-8, "norm convention deviation {worst_norm:.2e}");
}

#[test]
fn property_scar_pairs_unit_overlap() {
    let u = propagator(N, 0.07);
    let basis = selection_basis(N, 0.07, 0, &u);
    assert_eq!(basis.len(), 232); // 41 repeller orbits, one function per point
    for sf in &basis {
        let c = pobaker::quantum::dot(&sf.left_state, &sf.right_state);
        assert!((c - C::new(1.0, 0.0)).norm() < 1e-10);
        let nr = pobaker::quantum::vnorm(&sf.right_state);
        let nl = pobaker::quantum::vnorm(&sf.left_state);
        assert!((nr - nl).abs() < 1e-10);
    }
}

#[test]
fn property_complete_basis_exactness() {
    // enough scar functions to span the whole space: the generalized
    // spectrum reproduces every long-lived exact eigenvalue to 1e-6
    let orbits = enumerate_orbits(5).unwrap();
    for r in [0.07, 0.2] {
        let u = propagator(N, r);
        let basis = scar_basis(&orbits, &u, ehrenfest_time(N)).unwrap();
        let (a, s) = assemble_matrices(&basis, &u).unwrap();
        let gs = solve_generalized(&a, &s, SVD_TOL).unwrap();
        assert_eq!(gs.rank_used, N, "R={r}: rank {}", gs.rank_used);
        let exact = exact_resonances(&u, N_C).unwrap();
        let report = match_eigenvalues(&exact, &gs, 1e-6);
        assert_eq!(
            report.matched, N_C,
            "R={r}: only {}/{} long-lived eigenvalues reproduced",
            report.matched, N_C
        );
    }
}

#[test]
fn property_quantum_repeller_flatness_and_traces() {
    let u = propagator(N, 0.07);
    let rs = exact_resonances(&u, N_C).unwrap();
    let pairs: Vec<_> = rs.right_vectors.into_iter().zip(rs.left_vectors).collect();
    let grid = CoherentGrid::new(N, 128);

    let (q_full, skipped) = grid.accumulate(&pairs, N, "full").unwrap();
    assert!(skipped.is_empty());
    for &v in &q_full.values {
        assert!((v - 1.0).abs() < 1e-6, "Q_N flatness violated: {v}");
    }

    for j in [1usize, 10, 60] {
        let tr = grid.trace_estimate(&pairs, j).unwrap();
        assert!(
            (tr - C::new(j as f64, 0.0)).norm() < 0.02 * j as f64,
            "trace of Q_{j} = {tr}"
        );
    }
}

#[test]
fn property_determinism_byte_identity() {
    // quadrature and Monte Carlo measures are bit-stable run to run
    let a = partial_repeller_lattice(0.07, COVER_GRID, MEASURE_DEPTH, 100_000 - 2).unwrap();
    let b = partial_repeller_lattice(0.07, COVER_GRID, MEASURE_DEPTH, 100_000 - 2).unwrap();
    assert_eq!(a.values, b.values);
    let ma = trapped_measure(Flow::Forward, 0.3, 27, 8, 500_000, 7).unwrap();
    let mb = trapped_measure(Flow::Forward, 0.3, 27, 8, 500_000, 7).unwrap();
    assert_eq!(ma.values, mb.values);

    // orbit selection order is deterministic
    let all = enumerate_orbits(6).unwrap();
    let mu = partial_repeller_lattice(0.05, COVER_GRID, MEASURE_DEPTH, 100_000 - 2).unwrap();
    let s1 = select_orbits(&all, all.len(), 5, 0.05, COVER_GRID, CoverWeights::Measure(&mu))
        .unwrap();
    let s2 = select_orbits(&all, all.len(), 5, 0.05, COVER_GRID, CoverWeights::Measure(&mu))
        .unwrap();
    let words = |sel: &pobaker::orbits::OrbitSelection| -> Vec<Vec<u8>> {
        sel.ordered_orbits.iter().map(|o| o.symbols.clone()).collect()
    };
    assert_eq!(words(&s1), words(&s2));

    // serialization is byte-identical for identical inputs
    let mut csv1 = Vec::new();
    let mut csv2 = Vec::new();
    io::write_measure_csv(&mut csv1, &a).unwrap();
    io::write_measure_csv(&mut csv2, &b).unwrap();
    assert_eq!(csv1, csv2);
    let mut pgm1 = Vec::new();
    let mut pgm2 = Vec::new();
    io::write_pgm(&mut pgm1, a.side, &a.values, io::PgmDepth::Sixteen, io::PgmScale::Log).unwrap();
    io::write_pgm(&mut pgm2, b.side, &b.values, io::PgmDepth::Sixteen, io::PgmScale::Log).unwrap();
    assert_eq!(pgm1, pgm2);
}

/// The exact spectra behind the overlap criteria, frozen as regressions.
#[test]
fn frozen_exact_spectral_landmarks() {
    let u = propagator(N, 0.07);
    let rs = exact_resonances(&u, N_C).unwrap();
    let z1 = rs.eigenvalues[0].norm();
    let z60 = rs.eigenvalues[N_C - 1].norm();
    let z61 = rs.eigenvalues[N_C].norm();
    assert!((z1 - 0.9397).abs() < 2e-3, "|z1| = {z1}");
    assert!((z60 - 0.6009).abs() < 2e-3, "|z60| = {z60}");
    assert!((z61 - 0.5854).abs() < 2e-3, "|z61| = {z61}");
    assert!(rs.cutoff_nu_c > z61 && rs.cutoff_nu_c < z60);

    let u = propagator(N, 0.2);
    let rs = exact_resonances(&u, N_C).unwrap();
    assert!((rs.eigenvalues[0].norm() - 0.9508).abs() < 2e-3);
    assert!((rs.eigenvalues[N_C - 1].norm() - 0.6906).abs() < 2e-3);
    assert!((rs.eigenvalues[N_C].norm() - 0.6905).abs() < 2e-3);
}
