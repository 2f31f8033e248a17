//! Quantization of the partially open tribaker map.
//!
//! On an N-dimensional torus Hilbert space (N divisible by 3, antiperiodic
//! boundary phases χ_q = χ_p = 1/2) the closed map is the standard
//! shift-and-refold construction
//!
//! ```text
//! U = G_N⁻¹ · diag(G_{N/3}, G_{N/3}, G_{N/3})
//! ```
//!
//! with `G_n` the χ-shifted discrete Fourier transform. The opening keeps the
//! amplitude fraction `√R` on the middle third of the position basis, giving
//! the subunitary propagator `Ũ = P U P`. Its right and left eigenvectors
//! come in biorthogonal pairs; the long-lived resonances are the `n_c`
//! leading eigenvalue moduli.

use faer::Mat;
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::{Error, Result};

pub type C = Complex64;

/// Problem definition shared by the quantum-side modules.
#[derive(Clone, Copy, Debug)]
pub struct MapSpec {
    /// Hilbert-space dimension N (positive multiple of 3).
    pub n_dim: usize,
    /// Opening reflectivity R in [0, 1].
    pub reflectivity: f64,
    /// Opening interval in q.
    pub opening: (f64, f64),
    /// Boundary phase in position; 1/2 = antiperiodic.
    pub chi_q: f64,
    /// Boundary phase in momentum; 1/2 = antiperiodic.
    pub chi_p: f64,
    /// Per-step stretching exponent of the map, ln 3.
    pub lyapunov: f64,
}

impl MapSpec {
    pub fn new(n_dim: usize, reflectivity: f64) -> Result<Self> {
        if n_dim == 0 || n_dim % 3 != 0 {
            return Err(Error::BadDimension(n_dim));
        }
        if !(0.0..=1.0).contains(&reflectivity) {
            return Err(Error::BadReflectivity(reflectivity));
        }
        Ok(Self {
            n_dim,
            reflectivity,
            opening: crate::classical::OPENING,
            chi_q: 0.5,
            chi_p: 0.5,
            lyapunov: 3f64.ln(),
        })
    }

    /// Number of map steps over which a coherent state stays localized,
    /// `round(ln N / λ)`: 5 at N = 243, 6 at N = 729. Used as the scar
    /// propagation window.
    pub fn ehrenfest_steps(&self) -> usize {
        ((self.n_dim as f64).ln() / self.lyapunov).round() as usize
    }
}

/// χ-shifted discrete Fourier transform: entry (k, j) is
/// `(1/√n)·exp(−2πi (j + χ_q)(k + χ_p) / n)` (row = momentum index).
pub fn dft_matrix(n: usize, chi_q: f64, chi_p: f64) -> Result<Mat<C>> {
    if n == 0 {
        return Err(Error::BadDimension(0));
    }
    let norm = 1.0 / (n as f64).sqrt();
    Ok(Mat::from_fn(n, n, |k, j| {
        let ph = -2.0 * PI * (j as f64 + chi_q) * (k as f64 + chi_p) / n as f64;
        C::from_polar(norm, ph)
    }))
}

/// The closed (unitary) propagator `U = G_N⁻¹ · blockdiag(G_{N/3} × 3)`.
pub fn baker_propagator(spec: &MapSpec) -> Result<Mat<C>> {
    let n = spec.n_dim;
    let g_n = dft_matrix(n, spec.chi_q, spec.chi_p)?;
    let g_n3 = dft_matrix(n / 3, spec.chi_q, spec.chi_p)?;
    let mut block = Mat::<C>::zeros(n, n);
    for b in 0..3 {
        for i in 0..n / 3 {
            for j in 0..n / 3 {
                block[(b * n / 3 + i, b * n / 3 + j)] = g_n3[(i, j)];
            }
        }
    }
    Ok(g_n.adjoint() * &block)
}

/// Diagonal opening operator: identity outside the middle third of the
/// position basis, `√R` on it.
pub fn partial_projector(spec: &MapSpec) -> Mat<C> {
    let n = spec.n_dim;
    let s = spec.reflectivity.sqrt();
    let mut p = Mat::<C>::zeros(n, n);
    for i in 0..n {
        let v = if i >= n / 3 && i < 2 * n / 3 { s } else { 1.0 };
        p[(i, i)] = C::new(v, 0.0);
    }
    p
}

/// The partially open propagator `Ũ = P U P` (diagonal scaling applied to
/// rows and columns of `U`).
pub fn open_propagator(spec: &MapSpec) -> Result<Mat<C>> {
    let n = spec.n_dim;
    let u = baker_propagator(spec)?;
    let s = spec.reflectivity.sqrt();
    let d = |i: usize| if i >= n / 3 && i < 2 * n / 3 { s } else { 1.0 };
    Ok(Mat::from_fn(n, n, |i, j| u[(i, j)] * d(i) * d(j)))
}

/// Full biorthogonal spectrum of a subunitary propagator.
#[derive(Clone, Debug)]
pub struct ResonanceSet {
    /// Eigenvalues sorted by decreasing modulus.
    pub eigenvalues: Vec<C>,
    /// Right eigenvectors, index-matched to `eigenvalues`.
    pub right_vectors: Vec<Vec<C>>,
    /// Left eigenvectors: `⟨L_j|R_k⟩ = δ_jk` and `‖L_j‖ = ‖R_j‖` except for
    /// indices listed in `defective`.
    pub left_vectors: Vec<Vec<C>>,
    /// Modulus cut separating the `n_longlived` leading resonances: the
    /// midpoint of `|z_{n_c}|` and `|z_{n_c+1}|`.
    pub cutoff_nu_c: f64,
    pub n_longlived: usize,
    /// Indices whose raw left/right overlap fell below 1e-12; their vectors
    /// keep unit norm instead of the biorthonormal scaling.
    pub defective: Vec<usize>,
}

fn mat_hash(m: &Mat<C>) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            for bits in [m[(i, j)].re.to_bits(), m[(i, j)].im.to_bits()] {
                h ^= bits;
                h = h.wrapping_mul(0x1000_0000_01b3);
            }
        }
    }
    h
}

fn eigen_sorted(m: &Mat<C>) -> Result<(Vec<C>, Mat<C>)> {
    let n = m.nrows();
    let ev = m.eigen().map_err(|_| Error::Eigensolver {
        n,
        hash: mat_hash(m),
    })?;
    let z: Vec<C> = (0..n).map(|k| ev.S().column_vector()[k]).collect();
    Ok((z, ev.U().to_owned()))
}

/// Hermitian inner product `⟨a|b⟩` (conjugate-linear in the first argument).
pub fn dot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Euclidean norm of a complex vector.
pub fn vnorm(a: &[C]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn matvec(m: &Mat<C>, v: &[C]) -> Vec<C> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

/// Rescale a right/left vector pair in place to `⟨l|r⟩ = 1` with equal norms.
/// Returns the raw |⟨l|r⟩|; below 1e-12 the pair is left untouched (the
/// caller treats it as defective).
pub(crate) fn pair_normalize(rvec: &mut [C], lvec: &mut [C]) -> f64 {
    let c = dot(lvec, rvec);
    if c.norm() < 1e-12 {
        return c.norm();
    }
    let (nr, nl) = (vnorm(rvec), vnorm(lvec));
    // conj(beta)·alpha·c = 1 with alpha‖r‖ = beta‖l‖
    let alpha = C::from_polar(((nl / nr) / c.norm()).sqrt(), 0.0);
    let beta = C::from_polar(((nr / nl) / c.norm()).sqrt(), c.arg());
    for x in rvec.iter_mut() {
        *x *= alpha;
    }
    for x in lvec.iter_mut() {
        *x *= beta;
    }
    c.norm()
}

/// Eigenvalues (decreasing modulus) with conjugate-paired right/left
/// eigenvectors rescaled to `⟨L_j|R_j⟩ = 1` and equal norms; the last entry
/// lists indices whose raw pairing degenerated.
pub(crate) type PairedEigen = (Vec<C>, Vec<Vec<C>>, Vec<Vec<C>>, Vec<usize>);

/// Diagonalize a matrix together with its adjoint and pair every right
/// eigenvector with the left one whose adjoint eigenvalue is nearest to the
/// complex conjugate (greedy one-to-one claims in decreasing-|z| order;
/// within a degenerate cluster of radius 1e-10 the claim goes to the maximal
/// |⟨L|R⟩|).
pub(crate) fn paired_eigensystem(m: &Mat<C>) -> Result<PairedEigen> {
    let n = m.nrows();
    let (zr, vr) = eigen_sorted(m)?;
    let (zl, vl) = eigen_sorted(&m.adjoint().to_owned())?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        zr[b].norm()
            .partial_cmp(&zr[a].norm())
            .unwrap()
            .then(a.cmp(&b))
    });

    let mut claimed = vec![false; n];
    let mut eigenvalues = Vec::with_capacity(n);
    let mut right_vectors = Vec::with_capacity(n);
    let mut left_vectors = Vec::with_capacity(n);
    let mut defective = Vec::new();
    for (rank, &k) in order.iter().enumerate() {
        let target = zr[k].conj();
        let mut best = usize::MAX;
        let mut best_d = f64::MAX;
        for (i, &c) in claimed.iter().enumerate() {
            if !c {
                let d = (zl[i] - target).norm();
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
        }
        let rvec: Vec<C> = (0..n).map(|i| vr[(i, k)]).collect();
        // degenerate cluster around the nearest candidate: break the tie by
        // the actual biorthogonal overlap
        let cluster: Vec<usize> = (0..n)
            .filter(|&i| !claimed[i] && (zl[i] - zl[best]).norm() <= 1e-10)
            .collect();
        if cluster.len() > 1 {
            best = cluster
                .into_iter()
                .max_by(|&a, &b| {
                    let oa = dot(&(0..n).map(|i| vl[(i, a)]).collect::<Vec<_>>(), &rvec).norm();
                    let ob = dot(&(0..n).map(|i| vl[(i, b)]).collect::<Vec<_>>(), &rvec).norm();
                    oa.partial_cmp(&ob).unwrap()
                })
                .unwrap();
        }
        claimed[best] = true;
        let lvec: Vec<C> = (0..n).map(|i| vl[(i, best)]).collect();

        let mut rvec = rvec;
        let mut lvec = lvec;
        if pair_normalize(&mut rvec, &mut lvec) < 1e-12 {
            defective.push(rank);
        }
        eigenvalues.push(zr[k]);
        right_vectors.push(rvec);
        left_vectors.push(lvec);
    }
    Ok((eigenvalues, right_vectors, left_vectors, defective))
}

/// Biorthogonal spectrum of the open propagator, with the long-lived cut
/// `ν_c` placed at the midpoint of `|z_{n_c}|` and `|z_{n_c+1}|`.
pub fn exact_resonances(u_tilde: &Mat<C>, n_c: usize) -> Result<ResonanceSet> {
    let n = u_tilde.nrows();
    if n_c == 0 || n_c > n {
        return Err(Error::BadSelection(n_c));
    }
    let (eigenvalues, right_vectors, left_vectors, defective) = paired_eigensystem(u_tilde)?;
    let cutoff_nu_c = if n_c < n {
        0.5 * (eigenvalues[n_c - 1].norm() + eigenvalues[n_c].norm())
    } else {
        0.0
    };
    Ok(ResonanceSet {
        eigenvalues,
        right_vectors,
        left_vectors,
        cutoff_nu_c,
        n_longlived: n_c,
        defective,
    })
}
