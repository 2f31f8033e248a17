//! Classical tribaker map with a partially reflecting opening.
//!
//! The map is the three-branch baker transformation of the unit torus:
//! stretch by 3 in `q`, contract by 3 in `p`, cut into three vertical strips
//! and restack. The middle strip `1/3 < q < 2/3` is the opening: a trajectory
//! standing there when a step is taken keeps only a fraction `R` of its
//! intensity. `R = 0` is the fully open map, `R = 1` the closed one.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::{Error, Result};

/// Opening strip bounds (exclusive): intensity is reduced for `1/3 < q < 2/3`.
pub const OPENING: (f64, f64) = (1.0 / 3.0, 2.0 / 3.0);

/// Strict-interior opening test; the strip boundaries do not absorb.
#[inline]
pub fn in_opening(q: f64) -> bool {
    q > OPENING.0 && q < OPENING.1
}

/// A point of the unit torus, coordinates in `[0, 1)` (callers may pass the
/// seam value 1.0; the map folds it back).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePoint {
    pub q: f64,
    pub p: f64,
}

impl PhasePoint {
    pub fn new(q: f64, p: f64) -> Self {
        Self { q, p }
    }
}

/// One forward step. Returns the image point and the branch symbol
/// `ε = floor(3q) ∈ {0,1,2}`: `q' = 3q − ε`, `p' = (p + ε)/3`.
#[inline]
pub fn forward(x: PhasePoint) -> (PhasePoint, u8) {
    let e = (3.0 * x.q).floor().clamp(0.0, 2.0);
    let q = 3.0 * x.q - e;
    let p = (x.p + e) / 3.0;
    (PhasePoint::new(q, p), e as u8)
}

/// One backward step (inverse of [`forward`]). The branch is read from the
/// momentum: `ε = floor(3p)`, `q' = (q + ε)/3`, `p' = 3p − ε`.
#[inline]
pub fn backward(x: PhasePoint) -> (PhasePoint, u8) {
    let e = (3.0 * x.p).floor().clamp(0.0, 2.0);
    let q = (x.q + e) / 3.0;
    let p = 3.0 * x.p - e;
    (PhasePoint::new(q, p), e as u8)
}

/// Direction of trajectory evolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flow {
    Forward,
    Backward,
}

/// Endpoint of an intensity-carrying trajectory.
#[derive(Clone, Copy, Debug)]
pub struct Evolved {
    pub point: PhasePoint,
    /// Product of per-visit factors: exactly `R^opening_visits`.
    pub intensity: f64,
    pub opening_visits: u32,
}

/// Evolve `steps` map iterations carrying intensity.
///
/// Absorption always charges the *forward-departure* point of each transit:
/// the forward flow tests the pre-step point (standing in the opening when
/// the step is taken multiplies the intensity by `R`, then the map advances),
/// while the backward flow steps first and tests the arrival point — a
/// backward step from y to x retraces the forward transit that departs from
/// x. With this pairing the endpoint of a backward trajectory has itself been
/// tested, so at `R = 0` the surviving backward endpoints are exactly the
/// points whose next `steps` forward departures avoid the opening.
pub fn evolve(mut x: PhasePoint, flow: Flow, steps: usize, r: f64) -> Evolved {
    let mut visits = 0u32;
    for _ in 0..steps {
        match flow {
            Flow::Forward => {
                if in_opening(x.q) {
                    visits += 1;
                }
                x = forward(x).0;
            }
            Flow::Backward => {
                x = backward(x).0;
                if in_opening(x.q) {
                    visits += 1;
                }
            }
        }
    }
    Evolved {
        point: x,
        intensity: r.powi(visits as i32),
        opening_visits: visits,
    }
}

/// Normalized intensity distribution on a `side × side` phase-space grid.
/// Cell `(a, b)` covers `q ∈ [a/side, (a+1)/side)`, `p ∈ [b/side, (b+1)/side)`;
/// storage is row-major in `a`.
#[derive(Clone, Debug)]
pub struct MeasureGrid {
    pub side: usize,
    pub values: Vec<f64>,
}

impl MeasureGrid {
    pub fn zeros(side: usize) -> Self {
        Self {
            side,
            values: vec![0.0; side * side],
        }
    }

    #[inline]
    pub fn cell_index(&self, q: f64, p: f64) -> usize {
        let s = self.side as f64;
        let a = ((q.rem_euclid(1.0) * s) as usize).min(self.side - 1);
        let b = ((p.rem_euclid(1.0) * s) as usize).min(self.side - 1);
        a * self.side + b
    }

    #[inline]
    pub fn at(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.side + b]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Rescale so the cell weights sum to 1 (no-op on an all-zero grid).
    pub fn normalize(&mut self) {
        let t = self.total();
        if t > 0.0 {
            for v in &mut self.values {
                *v /= t;
            }
        }
    }

    pub fn l1_distance(&self, other: &MeasureGrid) -> Result<f64> {
        if self.side != other.side {
            return Err(Error::GridMismatch(self.side, other.side));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum())
    }
}

const CHUNK: u64 = 1 << 13;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Finite-time trapped-set measure: spray `samples` uniform initial points,
/// evolve each `t` steps in the given flow direction carrying intensity, and
/// deposit the surviving intensity in the endpoint's grid cell. Forward flow
/// yields the backward-trapped analogue (μ for past survival), backward flow
/// the forward-trapped one.
///
/// Bit-reproducible for fixed `(seed, samples, side, t, r)` regardless of
/// thread count: samples are partitioned into fixed-size chunks with derived
/// per-chunk seeds, and deposits accumulate as exact integer counts per
/// (cell, opening-visit-count) before the single final weighting by `R^k`.
pub fn trapped_measure(
    flow: Flow,
    r: f64,
    side: usize,
    t: usize,
    samples: u64,
    seed: u64,
) -> Result<MeasureGrid> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::BadReflectivity(r));
    }
    let kmax = t + 1;
    let nchunks = samples.div_ceil(CHUNK);
    let counts = (0..nchunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ ci.wrapping_mul(0xA5A5_A5A5_A5A5_A5A5)));
            let n = CHUNK.min(samples - ci * CHUNK);
            let mut local = vec![0u64; side * side * kmax];
            let s = side as f64;
            for _ in 0..n {
                let x = PhasePoint::new(rng.random::<f64>(), rng.random::<f64>());
                let e = evolve(x, flow, t, r);
                let a = ((e.point.q.rem_euclid(1.0) * s) as usize).min(side - 1);
                let b = ((e.point.p.rem_euclid(1.0) * s) as usize).min(side - 1);
                local[(a * side + b) * kmax + (e.opening_visits as usize).min(t)] += 1;
            }
            local
        })
        .reduce(
            || vec![0u64; side * side * kmax],
            |mut acc, loc| {
                for (a, l) in acc.iter_mut().zip(&loc) {
                    *a += l;
                }
                acc
            },
        );
    let mut grid = MeasureGrid::zeros(side);
    for c in 0..side * side {
        let mut w = 0.0;
        for k in 0..kmax {
            let n = counts[c * kmax + k];
            if n > 0 {
                w += n as f64 * r.powi(k as i32);
            }
        }
        grid.values[c] = w;
    }
    grid.normalize();
    Ok(grid)
}

/// Cellwise product of the two trapped-set measures, renormalized: the
/// finite-time partial repeller. At `R = 0` its support is the intersection
/// of the two trapped sets.
pub fn partial_repeller(mu_b: &MeasureGrid, mu_f: &MeasureGrid) -> Result<MeasureGrid> {
    if mu_b.side != mu_f.side {
        return Err(Error::GridMismatch(mu_b.side, mu_f.side));
    }
    let mut out = MeasureGrid::zeros(mu_b.side);
    for (o, (a, b)) in out
        .values
        .iter_mut()
        .zip(mu_b.values.iter().zip(&mu_f.values))
    {
        *o = a * b;
    }
    out.normalize();
    Ok(out)
}

/// Deterministic lattice quadrature of the partial repeller: seed-free
/// alternative to [`trapped_measure`] used for orbit-selection weighting.
///
/// The position dynamics is autonomous under the forward map (a pure ternary
/// digit shift) and the momentum dynamics under the backward map, so the
/// endpoint measure of each flow is fully determined by a one-dimensional
/// marginal: `lat` midpoint initial conditions along the autonomous axis,
/// the other coordinate fixed at 1/2. (A two-dimensional product lattice is
/// degenerate here: a whole column of constant `q` shares one itinerary and
/// collapses into a single endpoint cell.)
///
/// `lat` must be even and coprime to 3: midpoints `(2i+1)/(2·lat)` with an
/// odd or 3-divisible `lat` can land exactly on the ternary fixed point
/// `q = 1/2` (or the strip boundaries) after a few digit shifts, which pins
/// every trajectory to the opening. For even `lat` with `3 ∤ lat`, the parity
/// of `(2i+1)·3^k` makes both coincidences impossible at every step, and
/// `3^t` is invertible mod `2·lat`, so the pushed-forward marginal stays
/// exactly equidistributed.
pub fn partial_repeller_lattice(r: f64, side: usize, t: usize, lat: usize) -> Result<MeasureGrid> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::BadReflectivity(r));
    }
    if lat == 0 || lat % 2 == 1 || lat % 3 == 0 {
        return Err(Error::BadLattice(lat));
    }
    let kmax = t + 1;
    let marginal = |flow: Flow| -> MeasureGrid {
        let nchunks = (lat as u64).div_ceil(CHUNK);
        let counts = (0..nchunks)
            .into_par_iter()
            .map(|ci| {
                let mut local = vec![0u64; side * side * kmax];
                let s = side as f64;
                let lo = ci * CHUNK;
                let hi = (lo + CHUNK).min(lat as u64);
                for i in lo..hi {
                    let u = (i as f64 + 0.5) / lat as f64;
                    let x = match flow {
                        Flow::Forward => PhasePoint::new(u, 0.5),
                        Flow::Backward => PhasePoint::new(0.5, u),
                    };
                    let e = evolve(x, flow, t, r);
                    let a = ((e.point.q.rem_euclid(1.0) * s) as usize).min(side - 1);
                    let b = ((e.point.p.rem_euclid(1.0) * s) as usize).min(side - 1);
                    local[(a * side + b) * kmax + (e.opening_visits as usize).min(t)] += 1;
                }
                local
            })
            .reduce(
                || vec![0u64; side * side * kmax],
                |mut acc, loc| {
                    for (a, l) in acc.iter_mut().zip(&loc) {
                        *a += l;
                    }
                    acc
                },
            );
        let mut grid = MeasureGrid::zeros(side);
        for c in 0..side * side {
            let mut w = 0.0;
            for k in 0..kmax {
                let n = counts[c * kmax + k];
                if n > 0 {
                    w += n as f64 * r.powi(k as i32);
                }
            }
            grid.values[c] = w;
        }
        grid.normalize();
        grid
    };
    let mu_b = marginal(Flow::Forward);
    let mu_f = marginal(Flow::Backward);
    partial_repeller(&mu_b, &mu_f)
}
