//! Scar-basis generalized eigenproblem and the performance metric.
//!
//! The scar functions are strongly non-orthogonal, so the propagator matrix
//! `A_nm = ⟨ψL_n|Ũ|ψR_m⟩` comes with an overlap matrix `S_nm = ⟨ψL_n|ψR_m⟩`
//! and the eigenvalue problem `A c = z S c` is solved after projecting out
//! singular directions of `S`. Performance `P` counts how many long-lived
//! exact resonances the reduced basis reproduces within a distance `ε`, and
//! the minimal-basis search appends scar functions one at a time until a
//! target `P` is first reached.

use crate::quantum::{self, dot, matvec, vnorm, C, ResonanceSet};
use crate::scars::ScarFunction;
use crate::{Error, Result};
use faer::Mat;

/// Relative singular-value cut used for the overlap matrix throughout the
/// crate unless a caller overrides it.
pub const DEFAULT_SVD_TOL: f64 = 1e-8;

/// Propagator and overlap matrices over a scar basis: `A_nm = ⟨ψL_n|Ũ|ψR_m⟩`
/// and `S_nm = ⟨ψL_n|ψR_m⟩`.
pub fn assemble_matrices(basis: &[ScarFunction], u_tilde: &Mat<C>) -> Result<(Mat<C>, Mat<C>)> {
    let n = u_tilde.nrows();
    if let Some(bad) = basis.iter().find(|sf| sf.right_state.len() != n) {
        return Err(Error::DimensionMismatch(bad.right_state.len(), n));
    }
    let k = basis.len();
    let propagated: Vec<Vec<C>> = basis
        .iter()
        .map(|sf| matvec(u_tilde, &sf.right_state))
        .collect();
    let a = Mat::from_fn(k, k, |i, j| dot(&basis[i].left_state, &propagated[j]));
    let s = Mat::from_fn(k, k, |i, j| dot(&basis[i].left_state, &basis[j].right_state));
    Ok((a, s))
}

/// Solution of the scar-basis eigenproblem, reduced to the non-singular
/// subspace of the overlap matrix.
#[derive(Clone, Debug)]
pub struct GeneralizedSpectrum {
    /// Semiclassical eigenvalues, sorted by decreasing modulus.
    pub eigenvalues: Vec<C>,
    /// Right-eigenvector coefficients over the scar basis, one per eigenvalue.
    pub right_coefficients: Vec<Vec<C>>,
    /// Left-eigenvector coefficients over the scar basis.
    pub left_coefficients: Vec<Vec<C>>,
    /// Dimension of the retained subspace (singular directions discarded).
    pub rank_used: usize,
}

/// Solve `A c = z S c` by singular-value decomposition of `S`: directions
/// with `σ < svd_tol·σ_max` are discarded, the problem becomes a standard
/// eigenproblem on the reduced subspace, and the eigenpairs are mapped back
/// to basis coefficients. Left/right coefficient pairs are rescaled so that
/// the reconstructed states satisfy `⟨L|R⟩ = 1`.
pub fn solve_generalized(a: &Mat<C>, s: &Mat<C>, svd_tol: f64) -> Result<GeneralizedSpectrum> {
    let k = a.nrows();
    if s.nrows() != k || a.ncols() != k || s.ncols() != k {
        return Err(Error::DimensionMismatch(k, s.nrows()));
    }
    debug_assert!(svd_tol > 0.0 && svd_tol < 1.0);
    let svd = s.svd().map_err(|_| Error::EmptySpectrum)?;
    let sigma: Vec<f64> = (0..k).map(|i| svd.S().column_vector()[i].re).collect();
    let smax = sigma.first().copied().unwrap_or(0.0);
    let rank = sigma.iter().take_while(|&&x| x >= svd_tol * smax).count();
    if rank == 0 || smax <= 0.0 {
        return Err(Error::EmptySpectrum);
    }
    let w = svd.U().subcols(0, rank);
    let v = svd.V().subcols(0, rank);
    let isq: Vec<f64> = sigma[..rank].iter().map(|x| 1.0 / x.sqrt()).collect();

    // reduced matrix Σ^{-1/2} W† A V Σ^{-1/2}, built as A·V then W†·(AV)
    let mut av = Mat::<C>::zeros(k, rank);
    for p in 0..k {
        for j in 0..rank {
            let mut acc = C::new(0.0, 0.0);
            for q in 0..k {
                acc += a[(p, q)] * v[(q, j)];
            }
            av[(p, j)] = acc;
        }
    }
    let mut reduced = Mat::<C>::zeros(rank, rank);
    for i in 0..rank {
        for j in 0..rank {
            let mut acc = C::new(0.0, 0.0);
            for p in 0..k {
                acc += w[(p, i)].conj() * av[(p, j)];
            }
            reduced[(i, j)] = acc * isq[i] * isq[j];
        }
    }

    let (z, rights, lefts, _defective) = quantum::paired_eigensystem(&reduced)?;

    // map back: right c = V Σ^{-1/2} y, left d = W Σ^{-1/2} u
    let expand = |cols: &Mat<C>, y: &[C]| -> Vec<C> {
        (0..k)
            .map(|p| (0..rank).map(|i| cols[(p, i)] * isq[i] * y[i]).sum())
            .collect()
    };
    let mut right_coefficients = Vec::with_capacity(rank);
    let mut left_coefficients = Vec::with_capacity(rank);
    for (y, u) in rights.iter().zip(&lefts) {
        let mut c = expand(&v.to_owned(), y);
        let mut d = expand(&w.to_owned(), u);
        // ⟨L|R⟩ over the original space is d†S c, which equals u†y in the
        // reduced coordinates; rescale it to 1 when non-degenerate
        let ov = dot(u, y);
        if ov.norm() >= 1e-12 {
            let (nr, nl) = (vnorm(y), vnorm(u));
            let alpha = C::from_polar(((nl / nr) / ov.norm()).sqrt(), 0.0);
            let beta = C::from_polar(((nr / nl) / ov.norm()).sqrt(), ov.arg());
            for x in &mut c {
                *x *= alpha;
            }
            for x in &mut d {
                *x *= beta;
            }
        }
        right_coefficients.push(c);
        left_coefficients.push(d);
    }
    Ok(GeneralizedSpectrum {
        eigenvalues: z,
        right_coefficients,
        left_coefficients,
        rank_used: rank,
    })
}

/// Expand the coefficient vectors of a solved spectrum into Hilbert-space
/// states: `|R_j⟩ = Σ_m c_jm |ψR_m⟩` and `|L_j⟩ = Σ_n d_jn |ψL_n⟩`.
pub fn reconstruct_states(
    basis: &[ScarFunction],
    spectrum: &GeneralizedSpectrum,
) -> (Vec<Vec<C>>, Vec<Vec<C>>) {
    let n = basis.first().map_or(0, |sf| sf.right_state.len());
    let combine = |coeffs: &[Vec<C>], pick: fn(&ScarFunction) -> &Vec<C>| -> Vec<Vec<C>> {
        coeffs
            .iter()
            .map(|cv| {
                let mut acc = vec![C::new(0.0, 0.0); n];
                for (c, sf) in cv.iter().zip(basis) {
                    for (x, y) in acc.iter_mut().zip(pick(sf)) {
                        *x += c * y;
                    }
                }
                acc
            })
            .collect()
    };
    (
        combine(&spectrum.right_coefficients, |sf| &sf.right_state),
        combine(&spectrum.left_coefficients, |sf| &sf.left_state),
    )
}

/// Outcome of matching semiclassical eigenvalues against the long-lived
/// exact ones.
#[derive(Clone, Debug)]
pub struct PerformanceReport {
    pub matched: usize,
    pub total_longlived: usize,
    /// `matched / total_longlived`.
    pub performance: f64,
    pub eps: f64,
    /// One row per exact long-lived eigenvalue that claimed a semiclassical
    /// partner: `(exact, claimed, distance)`.
    pub pairs: Vec<(C, C, f64)>,
}

/// Greedy one-to-one matching: exact long-lived eigenvalues, in decreasing
/// modulus order, each claim the nearest unclaimed semiclassical eigenvalue;
/// claims within `eps` count as matched and `P = matched / n_c`.
pub fn match_eigenvalues(
    exact: &ResonanceSet,
    sc: &GeneralizedSpectrum,
    eps: f64,
) -> PerformanceReport {
    let n_c = exact.n_longlived;
    let mut claimed = vec![false; sc.eigenvalues.len()];
    let mut pairs = Vec::with_capacity(n_c);
    let mut matched = 0;
    for ze in exact.eigenvalues.iter().take(n_c) {
        let mut best = None;
        let mut best_d = f64::MAX;
        for (i, zs) in sc.eigenvalues.iter().enumerate() {
            if !claimed[i] {
                let d = (ze - zs).norm();
                if d < best_d {
                    best_d = d;
                    best = Some(i);
                }
            }
        }
        if let Some(i) = best {
            claimed[i] = true;
            if best_d <= eps {
                matched += 1;
            }
            pairs.push((*ze, sc.eigenvalues[i], best_d));
        }
    }
    PerformanceReport {
        matched,
        total_longlived: n_c,
        performance: matched as f64 / n_c as f64,
        eps,
        pairs,
    }
}

/// Result of the minimal-basis search.
#[derive(Clone, Debug)]
pub struct MinBasisSearch {
    /// Smallest basis-prefix size whose performance first reached the
    /// target, if any prefix did.
    pub n_sf: Option<usize>,
    /// Report at the crossing, or the best-performing prefix when the
    /// target was never reached.
    pub report: PerformanceReport,
    /// `(prefix size, rank_used, P)` per scanned size, in scan order.
    pub trace: Vec<(usize, usize, f64)>,
}

/// Scan basis prefixes of size 1, 2, … (scar functions appended in basis
/// order), solving the generalized problem after every append, and return
/// the first prefix whose performance reaches `target_p`. The scan stops at
/// the crossing; when the whole basis is exhausted below target, the report
/// of the best-performing prefix is returned instead.
pub fn find_min_basis(
    basis: &[ScarFunction],
    u_tilde: &Mat<C>,
    exact: &ResonanceSet,
    target_p: f64,
    eps: f64,
    svd_tol: f64,
) -> Result<MinBasisSearch> {
    debug_assert!((0.0..=1.0).contains(&target_p));
    if basis.is_empty() {
        return Err(Error::BadSelection(0));
    }
    let (a_full, s_full) = assemble_matrices(basis, u_tilde)?;
    let mut trace = Vec::with_capacity(basis.len());
    let mut best: Option<PerformanceReport> = None;
    for k in 1..=basis.len() {
        let a = a_full.submatrix(0, 0, k, k).to_owned();
        let s = s_full.submatrix(0, 0, k, k).to_owned();
        let sc = solve_generalized(&a, &s, svd_tol)?;
        let report = match_eigenvalues(exact, &sc, eps);
        trace.push((k, sc.rank_used, report.performance));
        let crossed = report.performance >= target_p;
        let better = best
            .as_ref()
            .is_none_or(|b| report.performance > b.performance);
        if better {
            best = Some(report.clone());
        }
        if crossed {
            return Ok(MinBasisSearch {
                n_sf: Some(k),
                report,
                trace,
            });
        }
    }
    Ok(MinBasisSearch {
        n_sf: None,
        report: best.expect("non-empty basis scanned"),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbits::{enumerate_orbits, orbit_from_symbols};
    use crate::quantum::{exact_resonances, open_propagator, vnorm, MapSpec};
    use crate::scars::{ehrenfest_time, scar_basis};

    fn setup(n: usize, r: f64, words: &[&[u8]]) -> (Mat<C>, Vec<ScarFunction>) {
        let u = open_propagator(&MapSpec::new(n, r).unwrap()).unwrap();
        let orbits: Vec<_> = words
            .iter()
            .map(|w| orbit_from_symbols(w).unwrap())
            .collect();
        let basis = scar_basis(&orbits, &u, ehrenfest_time(n)).unwrap();
        (u, basis)
    }

    #[test]
    fn overlap_matrix_has_unit_diagonal() {
        let (u, basis) = setup(27, 0.2, &[&[0], &[0, 2], &[0, 0, 1]]);
        let (a, s) = assemble_matrices(&basis, &u).unwrap();
        assert_eq!(s.nrows(), 6);
        for i in 0..s.nrows() {
            assert!((s[(i, i)] - C::new(1.0, 0.0)).norm() < 1e-10);
        }
        // subunitary propagator: every matrix element bounded by the norms
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                let bound = vnorm(&basis[i].left_state) * vnorm(&basis[j].right_state);
                assert!(a[(i, j)].norm() <= bound + 1e-12);
            }
        }

        let (_, short) = setup(9, 0.2, &[&[0]]);
        assert!(matches!(
            assemble_matrices(&short, &u),
            Err(Error::DimensionMismatch(9, 27))
        ));
    }

    #[test]
    fn identity_overlap_reduces_to_plain_eigenproblem() {
        // fixed 4x4 matrix with a known characteristic structure
        let vals = [
            [0.3, -0.1, 0.0, 0.2],
            [0.5, 0.1, -0.4, 0.0],
            [0.0, 0.2, 0.6, -0.3],
            [-0.2, 0.0, 0.1, 0.4],
        ];
        let a = Mat::from_fn(4, 4, |i, j| C::new(vals[i][j], 0.1 * (i as f64 - j as f64)));
        let s = Mat::from_fn(4, 4, |i, j| {
            C::new(if i == j { 1.0 } else { 0.0 }, 0.0)
        });
        let gs = solve_generalized(&a, &s, 1e-8).unwrap();
        assert_eq!(gs.rank_used, 4);
        let (z, _, _, _) = quantum::paired_eigensystem(&a).unwrap();
        for (x, y) in gs.eigenvalues.iter().zip(&z) {
            assert!((x - y).norm() < 1e-10, "{x} vs {y}");
        }
    }

    #[test]
    fn duplicated_scar_function_drops_rank_not_spectrum() {
        let (u, basis) = setup(27, 0.3, &[&[0, 2]]);
        let single = vec![basis[0].clone()];
        let doubled = vec![basis[0].clone(), basis[0].clone()];
        let (a1, s1) = assemble_matrices(&single, &u).unwrap();
        let (a2, s2) = assemble_matrices(&doubled, &u).unwrap();
        let g1 = solve_generalized(&a1, &s1, 1e-8).unwrap();
        let g2 = solve_generalized(&a2, &s2, 1e-8).unwrap();
        assert_eq!(g1.rank_used, 1);
        assert_eq!(g2.rank_used, 1);
        assert!((g1.eigenvalues[0] - g2.eigenvalues[0]).norm() < 1e-8);

        let zero = Mat::<C>::zeros(2, 2);
        assert!(matches!(
            solve_generalized(&zero, &zero, 1e-8),
            Err(Error::EmptySpectrum)
        ));
    }

    #[test]
    fn complete_basis_reproduces_long_lived_spectrum() {
        // enough orbits to span the full space: rank saturates at N and the
        // generalized eigenvalues above the cut coincide with exact ones
        let n = 81;
        let r = 0.2;
        let u = open_propagator(&MapSpec::new(n, r).unwrap()).unwrap();
        let orbits = enumerate_orbits(5).unwrap();
        let basis = scar_basis(&orbits, &u, ehrenfest_time(n)).unwrap();
        let (a, s) = assemble_matrices(&basis, &u).unwrap();
        let gs = solve_generalized(&a, &s, 1e-8).unwrap();
        assert_eq!(gs.rank_used, n, "rank should saturate at N");
        let exact = exact_resonances(&u, 20).unwrap();
        let report = match_eigenvalues(&exact, &gs, 1e-6);
        assert_eq!(report.matched, 20, "distances: {:?}", report.pairs);
    }

    #[test]
    fn matching_is_a_greedy_one_to_one_claim() {
        let ring = |n: usize| -> Vec<C> {
            (0..n)
                .map(|k| C::from_polar(0.9 - 0.002 * k as f64, 0.37 * k as f64))
                .collect()
        };
        let exact = ResonanceSet {
            eigenvalues: ring(60),
            right_vectors: Vec::new(),
            left_vectors: Vec::new(),
            cutoff_nu_c: 0.0,
            n_longlived: 60,
            defective: Vec::new(),
        };
        let spectrum = |z: Vec<C>| GeneralizedSpectrum {
            rank_used: z.len(),
            eigenvalues: z,
            right_coefficients: Vec::new(),
            left_coefficients: Vec::new(),
        };

        let verbatim = spectrum(ring(60));
        assert!((match_eigenvalues(&exact, &verbatim, 1e-3).performance - 1.0).abs() < 1e-15);

        let shifted = spectrum(ring(60).iter().map(|z| z + C::new(0.002, 0.0)).collect());
        assert_eq!(match_eigenvalues(&exact, &shifted, 1e-3).matched, 0);

        let missing = spectrum(ring(60)[..59].to_vec());
        let report = match_eigenvalues(&exact, &missing, 1e-3);
        assert_eq!(report.matched, 59);
        assert!((report.performance - 59.0 / 60.0).abs() < 1e-15);

        // order independence of the claims
        let mut permuted = ring(60);
        permuted.reverse();
        let p1 = match_eigenvalues(&exact, &spectrum(permuted), 1e-3).performance;
        assert!((p1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn minimal_basis_search_reports_first_crossing() {
        let n = 27;
        let (u, basis) = setup(n, 0.07, &[&[0], &[2], &[0, 2], &[0, 0, 1], &[0, 0, 2]]);
        let exact = exact_resonances(&u, 10).unwrap();

        let trivial = find_min_basis(&basis, &u, &exact, 0.0, 1e-3, 1e-8).unwrap();
        assert_eq!(trivial.n_sf, Some(1));
        assert_eq!(trivial.trace.len(), 1);

        let search = find_min_basis(&basis, &u, &exact, 0.4, 1e-2, 1e-8).unwrap();
        match search.n_sf {
            Some(k) => {
                assert_eq!(search.trace.len(), k);
                assert!(search.report.performance >= 0.4);
                // every earlier prefix stayed below target
                for &(_, _, p) in &search.trace[..k - 1] {
                    assert!(p < 0.4);
                }
            }
            None => {
                assert_eq!(search.trace.len(), basis.len());
                assert!(search.report.performance < 0.4);
            }
        }

        assert!(matches!(
            find_min_basis(&[], &u, &exact, 0.5, 1e-3, 1e-8),
            Err(Error::BadSelection(0))
        ));
    }

    #[test]
    fn svd_tolerance_halving_keeps_performance_stable() {
        let n = 27;
        let (u, basis) = setup(n, 0.07, &[&[0], &[0, 2], &[0, 0, 1], &[0, 1, 2]]);
        let exact = exact_resonances(&u, 10).unwrap();
        let (a, s) = assemble_matrices(&basis, &u).unwrap();
        let p8 = match_eigenvalues(&exact, &solve_generalized(&a, &s, 1e-8).unwrap(), 1e-3)
            .performance;
        let p9 = match_eigenvalues(&exact, &solve_generalized(&a, &s, 5e-9).unwrap(), 1e-3)
            .performance;
        assert!((p8 - p9).abs() < 0.1, "P {p8} vs {p9}");
    }

    #[test]
    fn reconstructed_states_are_biorthonormal_eigenpairs() {
        let n = 27;
        let (u, basis) = setup(n, 0.2, &[&[0], &[0, 2], &[0, 0, 1], &[0, 1], &[1, 2]]);
        let (a, s) = assemble_matrices(&basis, &u).unwrap();
        let gs = solve_generalized(&a, &s, 1e-8).unwrap();
        let (rights, lefts) = reconstruct_states(&basis, &gs);
        for j in 0..gs.rank_used {
            let c = dot(&lefts[j], &rights[j]);
            assert!((c - C::new(1.0, 0.0)).norm() < 1e-8, "pair {j}: {c}");
        }
        // the dominant reconstructed pair approximates an eigenpair of Ũ in
        // the weak sense ⟨L|Ũ|R⟩ = z ⟨L|R⟩
        let ur = matvec(&u, &rights[0]);
        let lhs = dot(&lefts[0], &ur);
        assert!((lhs - gs.eigenvalues[0]).norm() < 1e-8);
    }
}
