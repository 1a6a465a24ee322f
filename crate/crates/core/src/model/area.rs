use num_complex::Complex64;

use super::CONSTANTS;
use crate::error::{Error, Result};

/// A transverse mode profile F(x, y) sampled on a uniform rectangular grid,
/// stored row-major with `y` as the slow index.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeProfileGrid {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl ModeProfileGrid {
    pub fn from_fn(x: Vec<f64>, y: Vec<f64>, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let values = y
            .iter()
            .flat_map(|&yy| x.iter().map(move |&xx| (xx, yy)))
            .map(|(a, b)| f(a, b))
            .collect();
        Self { x, y, values }
    }

    fn cell_area(&self) -> f64 {
        let dx = if self.x.len() > 1 {
            self.x[1] - self.x[0]
        } else {
            1.0
        };
        let dy = if self.y.len() > 1 {
            self.y[1] - self.y[0]
        } else {
            1.0
        };
        dx * dy
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.x == other.x && self.y == other.y && self.values.len() == other.values.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearOverlap {
    /// Nonlinear effective area A_ijkl (m^2); infinite for a vanishing overlap.
    pub area: f64,
    /// gamma_ijkl = omega n2 / (c A_ijkl) in 1/(m W).
    pub gamma: f64,
}

/// Effective area of the four-field overlap F_i F_j F_k* F_l* and the
/// corresponding nonlinear parameter.
///
/// Each |F_q|^2 is normalised to unit integral over the whole grid, so the
/// numerator is one; the overlap in the denominator is restricted to
/// `core_mask` (the nonlinear material).
pub fn effective_area_and_gamma(
    profiles: [&ModeProfileGrid; 4],
    core_mask: &[bool],
    n2: f64,
    omega: f64,
) -> Result<NonlinearOverlap> {
    let first = profiles[0];
    if profiles.iter().any(|p| !p.same_grid(first)) {
        return Err(Error::GridMismatch(
            "mode profiles are sampled on different grids".into(),
        ));
    }
    if core_mask.len() != first.values.len() {
        return Err(Error::GridMismatch(format!(
            "core mask has {} cells, profiles have {}",
            core_mask.len(),
            first.values.len()
        )));
    }
    let da = first.cell_area();
    let norms: Vec<f64> = profiles
        .iter()
        .map(|p| (p.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * da).sqrt())
        .collect();
    if norms.contains(&0.0) {
        return Err(Error::ZeroField("effective area"));
    }
    let [fi, fj, fk, fl] = profiles;
    let overlap: Complex64 = (0..first.values.len())
        .filter(|&n| core_mask[n])
        .map(|n| fi.values[n] * fj.values[n] * fk.values[n].conj() * fl.values[n].conj())
        .sum::<Complex64>()
        * da
        / (norms[0] * norms[1] * norms[2] * norms[3]);

    // Overlap magnitudes below this are treated as exact cancellation.
    let scale: f64 = (0..first.values.len())
        .filter(|&n| core_mask[n])
        .map(|n| (fi.values[n] * fj.values[n] * fk.values[n] * fl.values[n]).norm())
        .sum::<f64>()
        * da
        / (norms[0] * norms[1] * norms[2] * norms[3]);
    if overlap.norm() <= 1e-12 * scale || overlap.norm() == 0.0 {
        return Ok(NonlinearOverlap {
            area: f64::INFINITY,
            gamma: 0.0,
        });
    }
    // The overlap of physical TM modes is real; keep its magnitude.
    let area = 1.0 / overlap.norm();
    Ok(NonlinearOverlap {
        area,
        gamma: omega * n2 / (CONSTANTS.c * area),
    })
}
