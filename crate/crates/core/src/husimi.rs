//! Coherent-state phase-space images of spectral projectors.
//!
//! For a biorthogonal pair the projector is `ĥ = |R⟩⟨L| / ⟨L|R⟩`; its
//! phase-space footprint at a grid of coherent-state centers is the complex
//! field `⟨qp|R⟩⟨L|qp⟩ / ⟨L|R⟩`. Accumulated sums over the leading
//! resonances build the partial quantum repeller, displayed as the modulus
//! of the accumulated field. Traces are estimated from the complex field
//! (the modulus would overcount wherever the field oscillates in phase).

use crate::classical::PhasePoint;
use crate::quantum::{dot, C};
use crate::scars::coherent_state;
use crate::{Error, Result};
use rayon::prelude::*;

/// Non-negative phase-space density sampled at coherent-state centers.
#[derive(Clone, Debug)]
pub struct PhaseSpaceImage {
    pub grid_side: usize,
    /// Row-major over the q index `a`, then the p index `b`:
    /// `values[a*grid_side + b]` at center `((a+1/2)/G, (b+1/2)/G)`.
    pub values: Vec<f64>,
    pub label: String,
}

impl PhaseSpaceImage {
    pub fn value(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.grid_side + b]
    }
}

/// Reusable grid of coherent states at centers `((a+1/2)/G, (b+1/2)/G)`.
pub struct CoherentGrid {
    pub side: usize,
    pub n: usize,
    states: Vec<Vec<C>>,
}

impl CoherentGrid {
    pub fn new(n: usize, side: usize) -> Self {
        let cells: Vec<usize> = (0..side * side).collect();
        let states = cells
            .par_iter()
            .map(|&cell| {
                let (a, b) = (cell / side, cell % side);
                let center = PhasePoint {
                    q: (a as f64 + 0.5) / side as f64,
                    p: (b as f64 + 0.5) / side as f64,
                };
                coherent_state(center, n, 0.5, 0.5).vector
            })
            .collect();
        CoherentGrid { side, n, states }
    }

    /// Complex projector field `⟨qp|R⟩⟨L|qp⟩ / ⟨L|R⟩` over the grid.
    pub fn footprint(&self, right: &[C], left: &[C]) -> Result<Vec<C>> {
        if right.len() != self.n || left.len() != self.n {
            return Err(Error::DimensionMismatch(right.len(), self.n));
        }
        let ov = dot(left, right);
        if ov.norm() < 1e-12 {
            return Err(Error::DegenerateProjector(ov.norm()));
        }
        Ok(self
            .states
            .par_iter()
            .map(|cs| dot(cs, right) * dot(left, cs) / ov)
            .collect())
    }

    /// Modulus image of one projector.
    pub fn projector_image(&self, right: &[C], left: &[C], label: &str) -> Result<PhaseSpaceImage> {
        let fp = self.footprint(right, left)?;
        Ok(PhaseSpaceImage {
            grid_side: self.side,
            values: fp.iter().map(|x| x.norm()).collect(),
            label: label.to_owned(),
        })
    }

    /// Accumulate the complex fields of the top `j_max` projector pairs and
    /// return the modulus image plus the indices of pairs skipped as
    /// degenerate.
    pub fn accumulate(
        &self,
        pairs: &[(Vec<C>, Vec<C>)],
        j_max: usize,
        label: &str,
    ) -> Result<(PhaseSpaceImage, Vec<usize>)> {
        if j_max > pairs.len() {
            return Err(Error::BadSelection(j_max));
        }
        let mut field = vec![C::new(0.0, 0.0); self.side * self.side];
        let mut skipped = Vec::new();
        for (j, (r, l)) in pairs.iter().take(j_max).enumerate() {
            match self.footprint(r, l) {
                Ok(fp) => {
                    for (acc, x) in field.iter_mut().zip(&fp) {
                        *acc += x;
                    }
                }
                Err(Error::DegenerateProjector(_)) => skipped.push(j),
                Err(e) => return Err(e),
            }
        }
        Ok((
            PhaseSpaceImage {
                grid_side: self.side,
                values: field.iter().map(|x| x.norm()).collect(),
                label: label.to_owned(),
            },
            skipped,
        ))
    }

    /// Riemann-sum trace estimate `N/G² · Σ_cells ⟨qp|Q_j|qp⟩` of the
    /// accumulated projector, from the complex field.
    pub fn trace_estimate(&self, pairs: &[(Vec<C>, Vec<C>)], j_max: usize) -> Result<C> {
        if j_max > pairs.len() {
            return Err(Error::BadSelection(j_max));
        }
        let mut total = C::new(0.0, 0.0);
        for (r, l) in pairs.iter().take(j_max) {
            let fp = self.footprint(r, l)?;
            total += fp.iter().sum::<C>();
        }
        Ok(total * self.n as f64 / (self.side * self.side) as f64)
    }
}

/// Modulus image of the projector `|right⟩⟨left| / ⟨left|right⟩` on a fresh
/// coherent-state grid.
pub fn projector_image(right: &[C], left: &[C], grid_side: usize) -> Result<PhaseSpaceImage> {
    CoherentGrid::new(right.len(), grid_side).projector_image(right, left, "projector")
}

/// Modulus image of `Q_j = Σ_{j'≤j} ĥ_{j'}` over the top `j_max` pairs
/// (ordered as given, canonically by decreasing eigenvalue modulus), plus
/// the indices of degenerate pairs that were skipped.
pub fn accumulate_q(
    pairs: &[(Vec<C>, Vec<C>)],
    j_max: usize,
    grid_side: usize,
) -> Result<(PhaseSpaceImage, Vec<usize>)> {
    let n = pairs.first().map_or(0, |(r, _)| r.len());
    CoherentGrid::new(n, grid_side).accumulate(pairs, j_max, "accumulated")
}

/// Overlap of two distributions: `O = Σ qa·qb / (‖qa‖₂ ‖qb‖₂)`.
pub fn overlap(qa: &PhaseSpaceImage, qb: &PhaseSpaceImage) -> Result<f64> {
    if qa.grid_side != qb.grid_side {
        return Err(Error::GridMismatch(qa.grid_side, qb.grid_side));
    }
    let na: f64 = qa.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = qb.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNormImage);
    }
    Ok(qa
        .values
        .iter()
        .zip(&qb.values)
        .map(|(x, y)| x * y)
        .sum::<f64>()
        / (na * nb))
}
