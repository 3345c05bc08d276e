//! One-site conditional laws `X_i | x_{i-1}, x_{i+1}`.

use crate::model::LatticeModel;
use crate::quadrature::grid::QuadratureGrid;
use crate::scalar::{pairwise_sum, Real};

/// Mean, variance and third centred moment of `X_i` given its neighbours.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct ConditionalSite<T> {
    pub site: usize,
    pub m_i2: T,
    pub s_i2_sq: T,
    pub t_i2: T,
}

/// Conditional law of site `i` (0-based) with density
/// `exp(-psi(x) + (sigma - s_i + J (left + right)) x)`.
///
/// Site 0 ignores `left`, the last site ignores `right` (`x_{K+1} = 0`).
/// The linear term is removed by integrating around its Gaussian centre,
/// so the Gaussian part is exact on the Hermite nodes for any neighbours.
pub fn conditional_site<T: Real>(
    model: &LatticeModel<T>,
    grid: &QuadratureGrid<T>,
    sigma: T,
    i: usize,
    left: T,
    right: T,
) -> ConditionalSite<T> {
    let k = model.size();
    assert!(i < k, "site {i} out of range for K = {k}");
    let left = if i == 0 { T::zero() } else { left };
    let right = if i + 1 == k { T::zero() } else { right };
    let centre = sigma - model.field()[i] + model.coupling() * (left + right);
    let pot = model.potential();

    let logs: Vec<T> = grid
        .nodes()
        .iter()
        .zip(grid.log_weights())
        .map(|(&z, &lw)| lw - pot.perturbation(centre + z))
        .collect();
    let top = logs.iter().copied().fold(T::neg_infinity(), T::max);
    let w: Vec<T> = logs.iter().map(|&l| (l - top).exp()).collect();
    let mass = pairwise_sum(&w);
    let z = grid.nodes();
    let moment = |f: &dyn Fn(T) -> T| -> T {
        let terms: Vec<T> = w.iter().zip(z).map(|(&wk, &zk)| wk * f(zk)).collect();
        pairwise_sum(&terms) / mass
    };
    let shift = moment(&|x| x);
    let var = moment(&|x| (x - shift).powi(2));
    let third = moment(&|x| (x - shift).powi(3));
    ConditionalSite {
        site: i,
        m_i2: centre + shift,
        s_i2_sq: var,
        t_i2: third,
    }
}
