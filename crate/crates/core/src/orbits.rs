//! Periodic orbits of the tribaker map via ternary symbolic dynamics.
//!
//! Every periodic orbit of period `L` corresponds to exactly one aperiodic
//! ternary necklace (a length-`L` symbol word up to rotation, not a repetition
//! of a shorter word). The symbol at step `l` is the strip index
//! `ε_l = floor(3 q_l)`, and the orbit point is recovered from the word by
//! reading the forward itinerary as a base-3 fraction:
//!
//! ```text
//! q_l = 0.ε_l ε_{l+1} ε_{l+2} …          (periodic continuation)
//! p_l = 0.ε_{l-1} ε_{l-2} ε_{l-3} …
//! ```
//!
//! both rational with denominator `3^L − 1`. Orbits that never visit the
//! middle strip survive the opening at `R = 0` and live on the classical
//! repeller; the rest decay at the per-step rate `R^(n_1/L)` where `n_1`
//! counts opening visits per period.

use crate::classical::{MeasureGrid, PhasePoint};
use crate::{Error, Result};

/// Maximum supported fundamental period (combinatorial guard: the necklace
/// count grows as `3^L / L`).
pub const MAX_PERIOD: usize = 12;

/// Weight decay applied to a grid cell each time the covering greedy selects
/// an orbit occupying it. A covered cell keeps diminishing — rather than zero
/// — priority, so the reorder keeps spreading later picks over the measure
/// instead of degenerating into tie-breaking once every cell is hit once.
pub const COVER_DECAY: f64 = 0.5;

/// A periodic orbit, fully populated from its canonical symbol word.
#[derive(Clone, Debug)]
pub struct PeriodicOrbit {
    /// Canonical aperiodic necklace representative (lexicographically minimal
    /// rotation), symbols in {0, 1, 2}.
    pub symbols: Vec<u8>,
    /// The L orbit points; `forward(points[l]) = points[(l+1) % L]`.
    pub points: Vec<PhasePoint>,
    /// Per-step generating-function actions `W_l = 3 q_l p_{l+1} − ε_l (q_l + p_{l+1})`.
    pub step_actions: Vec<f64>,
    /// Per-step Bohr-quantization actions `ε_l · q_l` (the gauge in which the
    /// scar-function construction accumulates its phases).
    pub bohr_actions: Vec<f64>,
    /// Sum of `step_actions`.
    pub total_action: f64,
    /// Sum of `bohr_actions`.
    pub bohr_total: f64,
    /// True iff no symbol equals 1, i.e. the orbit never enters the opening.
    pub inside_repeller: bool,
}

impl PeriodicOrbit {
    pub fn period(&self) -> usize {
        self.symbols.len()
    }

    /// Number of opening visits per period.
    pub fn n_ones(&self) -> usize {
        self.symbols.iter().filter(|&&s| s == 1).count()
    }

    /// Per-step geometric-mean intensity decay `R^(n_1/L)`; 1 for orbits on
    /// the repeller, 0 when `R = 0` and the orbit crosses the opening.
    pub fn weight(&self, r: f64) -> f64 {
        let n1 = self.n_ones();
        if n1 == 0 {
            1.0
        } else {
            r.powf(n1 as f64 / self.period() as f64)
        }
    }
}

/// Generating-function action of one map step: the branch of the dynamics
/// selected by `symbol` has mixed generating function
/// `W(q, p′) = 3 q p′ − ε (q + p′)`, with `p′` the post-step momentum.
///
/// Fails when `symbol` does not match the strip containing `x.q` (the seam
/// point `q = 1` counts as strip 2).
pub fn step_action(x: PhasePoint, symbol: u8, next_p: f64) -> Result<f64> {
    let strip = ((3.0 * x.q).floor() as i64).clamp(0, 2) as u8;
    if strip != symbol {
        return Err(Error::SymbolMismatch { symbol, q: x.q });
    }
    let eps = f64::from(symbol);
    Ok(3.0 * x.q * next_p - eps * (x.q + next_p))
}

fn is_canonical(symbols: &[u8]) -> bool {
    let l = symbols.len();
    if l == 0 || symbols.iter().any(|&s| s > 2) {
        return false;
    }
    for r in 1..l {
        let rotated = |j: usize| symbols[(j + r) % l];
        // lexicographic comparison of the r-rotation against the word itself
        let mut cmp = std::cmp::Ordering::Equal;
        for j in 0..l {
            cmp = rotated(j).cmp(&symbols[j]);
            if cmp != std::cmp::Ordering::Equal {
                break;
            }
        }
        match cmp {
            std::cmp::Ordering::Less => return false,    // smaller rotation exists
            std::cmp::Ordering::Equal => return false,   // periodic word
            std::cmp::Ordering::Greater => {}
        }
    }
    true
}

/// Build the orbit for a canonical aperiodic symbol word.
///
/// Points are computed exactly in integer arithmetic: with
/// `D_l = Σ_j ε_{(l+j) mod L} 3^(L−1−j)` the forward itinerary read as a
/// base-3 integer, `q_l = D_l / (3^L − 1)` and `p_l` uses the reversed
/// (backward) itinerary. The all-2 word sits on the torus seam and keeps its
/// raw coordinates `(1, 1)`; the quotient map identifies it with `(0, 0)`.
pub fn orbit_from_symbols(symbols: &[u8]) -> Result<PeriodicOrbit> {
    let l = symbols.len();
    if l == 0 || l > MAX_PERIOD {
        return Err(Error::BadPeriod(l, MAX_PERIOD));
    }
    if !is_canonical(symbols) {
        return Err(Error::NonCanonicalSymbols(symbols.to_vec()));
    }

    let denom = 3u64.pow(l as u32) - 1;
    let mut points = Vec::with_capacity(l);
    for start in 0..l {
        let mut d_fwd = 0u64; // digits ε_start, ε_{start+1}, …
        let mut d_bwd = 0u64; // digits ε_{start-1}, ε_{start-2}, …
        for j in 0..l {
            d_fwd = 3 * d_fwd + u64::from(symbols[(start + j) % l]);
            d_bwd = 3 * d_bwd + u64::from(symbols[(start + l - 1 - j) % l]);
        }
        // exact strip check: ε = floor(3 q) = (3 D) div (3^L − 1), clamped at
        // the seam where D = 3^L − 1
        let strip = (3 * d_fwd / denom).min(2);
        debug_assert_eq!(strip as u8, symbols[start]);
        points.push(PhasePoint::new(
            d_fwd as f64 / denom as f64,
            d_bwd as f64 / denom as f64,
        ));
    }

    let mut step_actions = Vec::with_capacity(l);
    let mut bohr_actions = Vec::with_capacity(l);
    for j in 0..l {
        let x = points[j];
        let eps = symbols[j];
        // post-step momentum; for the closed orbit this is p_{j+1}
        let next_p = (x.p + f64::from(eps)) / 3.0;
        step_actions.push(step_action(x, eps, next_p)?);
        bohr_actions.push(f64::from(eps) * x.q);
    }
    let total_action = step_actions.iter().sum();
    let bohr_total = bohr_actions.iter().sum();
    let inside_repeller = !symbols.contains(&1);

    Ok(PeriodicOrbit {
        symbols: symbols.to_vec(),
        points,
        step_actions,
        bohr_actions,
        total_action,
        bohr_total,
        inside_repeller,
    })
}

/// All periodic orbits with fundamental period `≤ l_max`, one canonical
/// representative per necklace, ordered by period then lexicographically.
pub fn enumerate_orbits(l_max: usize) -> Result<Vec<PeriodicOrbit>> {
    if l_max == 0 || l_max > MAX_PERIOD {
        return Err(Error::BadPeriod(l_max, MAX_PERIOD));
    }
    let mut orbits = Vec::new();
    let mut word = Vec::new();
    for l in 1..=l_max {
        let n_words = 3u64.pow(l as u32);
        for code in 0..n_words {
            word.clear();
            for j in 0..l {
                word.push(((code / 3u64.pow((l - 1 - j) as u32)) % 3) as u8);
            }
            if is_canonical(&word) {
                orbits.push(orbit_from_symbols(&word)?);
            }
        }
    }
    Ok(orbits)
}

/// Cell weights steering the covering reorder in [`select_orbits`].
pub enum CoverWeights<'a> {
    /// Every cell counts the same: the reorder maximizes freshly covered area.
    Uniform,
    /// Cells weighted by a phase-space measure (normally the finite-time
    /// partial repeller at the run's reflectivity), so the reorder covers the
    /// invariant structure rather than the empty torus.
    Measure(&'a MeasureGrid),
}

/// An ordered orbit basis produced by [`select_orbits`].
#[derive(Clone, Debug)]
pub struct OrbitSelection {
    pub ordered_orbits: Vec<PeriodicOrbit>,
    pub n_pos: usize,
    pub n_max_out: usize,
    pub l_max: usize,
}

/// Greedy coverage ordering: repeatedly pick the orbit whose points carry the
/// largest remaining cell weight, then multiply the weights of the cells it
/// occupies by `decay`. `decay = 0` reproduces the classic set-cover greedy
/// (a cell stops counting once covered); `0 < decay < 1` keeps rewarding
/// under-covered regions, which is what makes the resulting order an
/// approximately *uniform* covering. Ties prefer the shorter period, then the
/// lexicographically smaller word. Returns indices into `orbits`.
pub fn covering_order(
    orbits: &[PeriodicOrbit],
    grid_side: usize,
    cell_weights: &[f64],
    decay: f64,
) -> Vec<usize> {
    let probe = MeasureGrid::zeros(grid_side);
    let cells: Vec<Vec<usize>> = orbits
        .iter()
        .map(|o| {
            let mut c: Vec<usize> = o
                .points
                .iter()
                .map(|x| probe.cell_index(x.q, x.p))
                .collect();
            c.sort_unstable();
            c.dedup();
            c
        })
        .collect();

    let mut w = cell_weights.to_vec();
    let mut pool: Vec<usize> = (0..orbits.len()).collect();
    let mut order = Vec::with_capacity(orbits.len());
    while !pool.is_empty() {
        let mut best = 0usize;
        let mut best_gain = f64::NEG_INFINITY;
        for (pi, &oi) in pool.iter().enumerate() {
            let gain: f64 = cells[oi].iter().map(|&c| w[c]).sum();
            let better = gain > best_gain + 1e-15
                || ((gain - best_gain).abs() <= 1e-15 && {
                    let (a, b) = (&orbits[oi], &orbits[pool[best]]);
                    (a.period(), &a.symbols) < (b.period(), &b.symbols)
                });
            if better {
                best = pi;
                best_gain = gain;
            }
        }
        let oi = pool.remove(best);
        for &c in &cells[oi] {
            w[c] *= decay;
        }
        order.push(oi);
    }
    order
}

/// Assemble the orbit basis used by the semiclassical construction:
///
/// 1. admit every repeller orbit, by increasing period;
/// 2. admit the `n_max_out` strongest outside orbits — weight `R^(n_1/L)`
///    decreasing, i.e. opening-visit fraction `n_1/L` increasing (an
///    `R`-independent order; ties favor shorter period, then smaller word);
/// 3. reorder the combined list by the greedy covering rule on a
///    `grid_side × grid_side` grid with the given cell weights;
/// 4. truncate to `n_pos` orbits.
pub fn select_orbits(
    all: &[PeriodicOrbit],
    n_pos: usize,
    n_max_out: usize,
    r: f64,
    grid_side: usize,
    cover: CoverWeights,
) -> Result<OrbitSelection> {
    if n_pos == 0 {
        return Err(Error::BadSelection(n_pos));
    }
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::BadReflectivity(r));
    }
    let cell_weights: Vec<f64> = match cover {
        CoverWeights::Uniform => vec![1.0; grid_side * grid_side],
        CoverWeights::Measure(m) => {
            if m.side != grid_side {
                return Err(Error::GridMismatch(m.side, grid_side));
            }
            m.values.clone()
        }
    };

    let mut inside: Vec<&PeriodicOrbit> = all.iter().filter(|o| o.inside_repeller).collect();
    inside.sort_by(|a, b| (a.period(), &a.symbols).cmp(&(b.period(), &b.symbols)));

    let mut outside: Vec<&PeriodicOrbit> = all.iter().filter(|o| !o.inside_repeller).collect();
    // decreasing weight R^(n1/L) == increasing n1/L, compared exactly by
    // cross-multiplication so the order cannot depend on R or rounding
    outside.sort_by(|a, b| {
        let fa = a.n_ones() * b.period();
        let fb = b.n_ones() * a.period();
        fa.cmp(&fb)
            .then(a.period().cmp(&b.period()))
            .then(a.symbols.cmp(&b.symbols))
    });

    let combined: Vec<PeriodicOrbit> = inside
        .into_iter()
        .chain(outside.into_iter().take(n_max_out))
        .cloned()
        .collect();
    let order = covering_order(&combined, grid_side, &cell_weights, COVER_DECAY);
    let ordered_orbits: Vec<PeriodicOrbit> = order
        .into_iter()
        .take(n_pos)
        .map(|i| combined[i].clone())
        .collect();

    let l_max = all.iter().map(|o| o.period()).max().unwrap_or(0);
    Ok(OrbitSelection {
        ordered_orbits,
        n_pos,
        n_max_out,
        l_max,
    })
}
