//! Torus coherent states and scar functions attached to periodic orbits.
//!
//! A scar pair is built in three stages: Gaussian coherent states at the
//! orbit points, a phase-coherent superposition `φ` with a Bohr-quantized
//! eigenphase `A`, and a cosine-windowed propagation of `φ` under the open
//! propagator (forward for the right function, adjoint for the left one) up
//! to the Ehrenfest time. The resulting left/right pair is rescaled to
//! `⟨ψL|ψR⟩ = 1` with equal norms, mirroring the exact-resonance convention.

use crate::classical::PhasePoint;
use crate::orbits::PeriodicOrbit;
use crate::quantum::{self, C};
use crate::{Error, Result};
use faer::Mat;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Antiperiodic boundary phases of the quantized map; coherent states and
/// scar functions live in the same Hilbert space.
const CHI: f64 = 0.5;

/// Gaussian coherent state on the `n`-dimensional torus Hilbert space.
#[derive(Debug, Clone)]
pub struct CoherentState {
    /// Phase-space center `(q0, p0)`.
    pub center: PhasePoint,
    /// Unit-normalized position-representation amplitudes.
    pub vector: Vec<C>,
}

/// Minimum-uncertainty state centered at `center`, periodized over the three
/// nearest torus images (`ν ∈ {-1, 0, 1}`); wider periodization changes the
/// amplitudes below double precision for every usable `n`.
pub fn coherent_state(center: PhasePoint, n: usize, chi_q: f64, chi_p: f64) -> CoherentState {
    debug_assert!(n > 0);
    let nf = n as f64;
    let mut vector: Vec<C> = (0..n)
        .map(|j| {
            let qj = (j as f64 + chi_q) / nf;
            let mut amp = C::new(0.0, 0.0);
            for nu in [-1.0f64, 0.0, 1.0] {
                let d = qj - center.q + nu;
                let gauss = (-PI * nf * d * d).exp();
                let phase = 2.0 * PI * (nf * center.p * d - chi_p * nu);
                amp += C::from_polar(gauss, phase);
            }
            amp
        })
        .collect();
    let norm = quantum::vnorm(&vector);
    for x in &mut vector {
        *x /= norm;
    }
    CoherentState { center, vector }
}

/// Number of map steps over which a coherent state stays localized:
/// `round(ln n / λ)` with `λ = ln 3`.
pub fn ehrenfest_time(n: usize) -> usize {
    debug_assert!(n >= 3);
    ((n as f64).ln() / 3.0f64.ln()).round() as usize
}

fn phi_with_phase(orbit: &PeriodicOrbit, a: f64, n: usize) -> Vec<C> {
    let l = orbit.period();
    let nf = n as f64;
    let mut phi = vec![C::new(0.0, 0.0); n];
    let mut theta = 0.0; // actions of the steps already taken; theta_0 = 0
    for (j, point) in orbit.points.iter().enumerate() {
        let cs = coherent_state(*point, n, CHI, CHI);
        let w = C::from_polar(
            1.0 / (l as f64).sqrt(),
            -2.0 * PI * (j as f64 * a - nf * theta),
        );
        for (acc, x) in phi.iter_mut().zip(&cs.vector) {
            *acc += w * x;
        }
        theta += orbit.bohr_actions[j];
    }
    let norm = quantum::vnorm(&phi);
    for x in &mut phi {
        *x /= norm;
    }
    phi
}

/// Linear combination of the orbit's coherent states carrying the Bohr
/// eigenphase `A = (n·S_γ + m)/L`, unit-normalized.
///
/// The accumulated phase at the `j`-th point sums the actions of the steps
/// already taken (an arrival-indexed cumulative sum differs from this by a
/// global phase only). `m` counts the excitation along the orbit and must be
/// below the period.
pub fn build_phi(orbit: &PeriodicOrbit, m: usize, n: usize) -> Result<Vec<C>> {
    if n == 0 {
        return Err(Error::BadDimension(n));
    }
    let l = orbit.period();
    if m >= l {
        return Err(Error::BadExcitation(m, l));
    }
    let a = (n as f64 * orbit.bohr_total + m as f64) / l as f64;
    Ok(phi_with_phase(orbit, a, n))
}

/// Left/right scar pair attached to one periodic orbit and excitation.
#[derive(Debug, Clone)]
pub struct ScarFunction {
    /// Canonical symbol word of the supporting orbit.
    pub orbit_symbols: Vec<u8>,
    /// Excitation number along the orbit, `0 ≤ m < L`.
    pub m: usize,
    /// Bohr eigenphase `A` used in the construction.
    pub bohr_phase: f64,
    /// Right scar function (propagated forward).
    pub right_state: Vec<C>,
    /// Left scar function (propagated by the adjoint).
    pub left_state: Vec<C>,
    /// Propagation window (number of steps).
    pub window: usize,
}

fn windowed_pair(
    orbit: &PeriodicOrbit,
    m: usize,
    u_tilde: &Mat<C>,
    u_adj: &Mat<C>,
    tau: usize,
) -> Result<ScarFunction> {
    if tau == 0 {
        return Err(Error::BadWindow(tau));
    }
    let n = u_tilde.nrows();
    debug_assert_eq!(n, u_tilde.ncols());
    let phi = build_phi(orbit, m, n)?;
    let a = (n as f64 * orbit.bohr_total + m as f64) / orbit.period() as f64;

    let mut right = vec![C::new(0.0, 0.0); n];
    let mut left = vec![C::new(0.0, 0.0); n];
    let mut fwd = phi.clone();
    let mut bwd = phi;
    for t in 0..=tau {
        let w = (PI * t as f64 / (2.0 * tau as f64)).cos();
        let ph = 2.0 * PI * a * t as f64;
        let wr = C::from_polar(w, -ph);
        let wl = C::from_polar(w, ph);
        for i in 0..n {
            right[i] += wr * fwd[i];
            left[i] += wl * bwd[i];
        }
        if t < tau {
            fwd = quantum::matvec(u_tilde, &fwd);
            bwd = quantum::matvec(u_adj, &bwd);
        }
    }

    let overlap = quantum::pair_normalize(&mut right, &mut left);
    if overlap < 1e-12 {
        return Err(Error::DegenerateProjector(overlap));
    }
    Ok(ScarFunction {
        orbit_symbols: orbit.symbols.clone(),
        m,
        bohr_phase: a,
        right_state: right,
        left_state: left,
        window: tau,
    })
}

fn adjoint(m: &Mat<C>) -> Mat<C> {
    Mat::from_fn(m.ncols(), m.nrows(), |i, j| m[(j, i)].conj())
}

/// Right and left scar functions for one `(orbit, m)` pair: cosine-windowed
/// sums of `Ũ^t φ` (resp. `(Ũ†)^t φ`) with phases `e^{∓2πiAt}`, `t = 0..τ`,
/// rescaled to `⟨ψL|ψR⟩ = 1` with equal norms. Fails with a degenerate
/// projector error when the raw pair is orthogonal below 1e-12.
pub fn scar_pair(
    orbit: &PeriodicOrbit,
    m: usize,
    u_tilde: &Mat<C>,
    tau: usize,
) -> Result<ScarFunction> {
    windowed_pair(orbit, m, u_tilde, &adjoint(u_tilde), tau)
}

/// All scar pairs of an ordered orbit selection, orbit-major with `m`
/// ascending; `(orbit, m)` pairs whose left/right functions degenerate are
/// dropped. Construction is parallel but the order is deterministic.
pub fn scar_basis(
    selection: &[PeriodicOrbit],
    u_tilde: &Mat<C>,
    tau: usize,
) -> Result<Vec<ScarFunction>> {
    if tau == 0 {
        return Err(Error::BadWindow(tau));
    }
    let u_adj = adjoint(u_tilde);
    let jobs: Vec<(usize, usize)> = selection
        .iter()
        .enumerate()
        .flat_map(|(i, orb)| (0..orb.period()).map(move |m| (i, m)))
        .collect();
    let built: Vec<Result<ScarFunction>> = jobs
        .par_iter()
        .map(|&(i, m)| windowed_pair(&selection[i], m, u_tilde, &u_adj, tau))
        .collect();
    let mut basis = Vec::with_capacity(built.len());
    for item in built {
        match item {
            Ok(sf) => basis.push(sf),
            Err(Error::DegenerateProjector(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(basis)
}
