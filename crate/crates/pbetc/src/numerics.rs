//! Uniform spatial grids, sampled profiles, and the small linear-algebra
//! toolbox the rest of the crate builds on: trapezoid quadrature, L2 norms,
//! tridiagonal (Thomas) solves, and one-dimensional finite differences.

use crate::error::{Error, Result};

/// Threshold below which a tridiagonal pivot counts as singular.
pub const PIVOT_TOL: f64 = 1e-14;

/// Uniform grid on [0, 1] with `n_nodes` nodes and spacing `dx = 1/(n_nodes-1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n_nodes: usize,
    dx: f64,
}

impl Grid {
    /// Build a grid; requires at least 3 nodes.
    pub fn new(n_nodes: usize) -> Result<Self> {
        if n_nodes < 3 {
            return Err(Error::ValidationError(format!(
                "grid needs at least 3 nodes, got {n_nodes}"
            )));
        }
        Ok(Self { n_nodes, dx: 1.0 / (n_nodes - 1) as f64 })
    }

    /// Number of nodes.
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Node spacing.
    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Coordinate of node `i`; exact 0 and 1 at the ends.
    pub fn x(&self, i: usize) -> f64 {
        debug_assert!(i < self.n_nodes);
        i as f64 / (self.n_nodes - 1) as f64
    }

    /// Grid with every interval split into `factor` subintervals.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::ValidationError("refinement factor must be >= 1".into()));
        }
        Grid::new((self.n_nodes - 1) * factor + 1)
    }

    /// Ratio of intervals if `self` refines `coarse` exactly, else an error.
    pub fn refinement_of(&self, coarse: &Grid) -> Result<usize> {
        let fine_iv = self.n_nodes - 1;
        let coarse_iv = coarse.n_nodes - 1;
        if fine_iv % coarse_iv != 0 {
            return Err(Error::GridMismatch { left: self.n_nodes, right: coarse.n_nodes });
        }
        Ok(fine_iv / coarse_iv)
    }
}

/// Function values sampled on a [`Grid`]; all entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialProfile {
    grid: Grid,
    values: Vec<f64>,
}

impl SpatialProfile {
    /// Wrap sampled values; length must match the grid and entries be finite.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::ValidationError(format!(
                "profile has {} values for a {}-node grid",
                values.len(),
                grid.n_nodes()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::ValidationError("profile contains a non-finite value".into()));
        }
        Ok(Self { grid, values })
    }

    /// Sample a closure at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..grid.n_nodes()).map(|i| f(grid.x(i))).collect();
        Self::new(grid, values)
    }

    /// Constant profile.
    pub fn constant(grid: Grid, v: f64) -> Result<Self> {
        Self::new(grid, vec![v; grid.n_nodes()])
    }

    /// The grid this profile lives on.
    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Sampled values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at node `i`.
    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Value at the right boundary x = 1.
    pub fn boundary_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Largest sampled value.
    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Error unless `self` and `other` share a grid.
    pub fn check_same_grid(&self, other: &SpatialProfile) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch {
                left: self.grid.n_nodes(),
                right: other.grid.n_nodes(),
            });
        }
        Ok(())
    }
}

/// Trapezoid-rule integral of `values` on a uniform grid with spacing `dx`.
pub(crate) fn trapz(values: &[f64], dx: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mut acc = 0.5 * (values[0] + values[n - 1]);
    for v in &values[1..n - 1] {
        acc += v;
    }
    acc * dx
}

/// Trapezoid quadrature weights for an `n`-node uniform grid.
pub(crate) fn trapezoid_weights(n: usize, dx: f64) -> Vec<f64> {
    let mut w = vec![dx; n];
    w[0] = 0.5 * dx;
    w[n - 1] = 0.5 * dx;
    w
}

/// Integral of a profile over [0, 1] by the trapezoid rule.
pub fn trapezoid_integral(p: &SpatialProfile) -> f64 {
    trapz(p.values(), p.grid().dx())
}

/// Squared L2 norm of raw values on a uniform grid.
pub(crate) fn l2_norm_sq_slice(values: &[f64], dx: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mut acc = 0.5 * (values[0] * values[0] + values[n - 1] * values[n - 1]);
    for v in &values[1..n - 1] {
        acc += v * v;
    }
    acc * dx
}

/// L2 norm of a profile over [0, 1] by the trapezoid rule.
pub fn l2_norm(p: &SpatialProfile) -> f64 {
    l2_norm_sq_slice(p.values(), p.grid().dx()).sqrt()
}

/// Dot product of two equal-length slices.
#[cfg(test)]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve a tridiagonal system by the Thomas algorithm.
///
/// `lower` and `upper` hold the sub- and super-diagonal (length n-1), `diag`
/// and `rhs` have length n. Fails with [`Error::ZeroPivot`] when elimination
/// meets a pivot with magnitude below [`PIVOT_TOL`].
pub fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let factor = TridiagFactor::new(lower, diag, upper)?;
    Ok(factor.solve(rhs))
}

/// Prefactored tridiagonal matrix for repeated solves with fixed coefficients.
#[derive(Debug, Clone)]
pub struct TridiagFactor {
    lower: Vec<f64>,
    inv_piv: Vec<f64>,
    cp: Vec<f64>,
}

impl TridiagFactor {
    /// Eliminate once; fails on a near-zero pivot.
    pub fn new(lower: &[f64], diag: &[f64], upper: &[f64]) -> Result<Self> {
        let n = diag.len();
        assert!(n >= 1, "empty system");
        assert_eq!(lower.len(), n - 1, "lower diagonal length");
        assert_eq!(upper.len(), n - 1, "upper diagonal length");
        let mut inv_piv = vec![0.0; n];
        let mut cp = vec![0.0; n.saturating_sub(1)];
        let mut piv = diag[0];
        if piv.abs() < PIVOT_TOL {
            return Err(Error::ZeroPivot { index: 0, pivot: piv });
        }
        inv_piv[0] = 1.0 / piv;
        for i in 1..n {
            cp[i - 1] = upper[i - 1] * inv_piv[i - 1];
            piv = diag[i] - lower[i - 1] * cp[i - 1];
            if piv.abs() < PIVOT_TOL {
                return Err(Error::ZeroPivot { index: i, pivot: piv });
            }
            inv_piv[i] = 1.0 / piv;
        }
        Ok(Self { lower: lower.to_vec(), inv_piv, cp })
    }

    /// Solve for one right-hand side.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solve writing the result over `rhs`.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.inv_piv.len();
        assert_eq!(rhs.len(), n, "rhs length");
        rhs[0] *= self.inv_piv[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lower[i - 1] * rhs[i - 1]) * self.inv_piv[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.cp[i] * rhs[i + 1];
        }
    }
}

/// First or second derivative of a profile: centered differences inside,
/// second-order one-sided stencils at both ends. Needs at least 5 nodes.
pub fn central_derivative(p: &SpatialProfile, order: u8) -> SpatialProfile {
    let n = p.grid().n_nodes();
    assert!(n >= 5, "derivative needs at least 5 nodes, got {n}");
    let h = p.grid().dx();
    let v = p.values();
    let mut out = vec![0.0; n];
    match order {
        1 => {
            out[0] = (-1.5 * v[0] + 2.0 * v[1] - 0.5 * v[2]) / h;
            for i in 1..n - 1 {
                out[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
            }
            out[n - 1] = (1.5 * v[n - 1] - 2.0 * v[n - 2] + 0.5 * v[n - 3]) / h;
        }
        2 => {
            let h2 = h * h;
            out[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h2;
            for i in 1..n - 1 {
                out[i] = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / h2;
            }
            out[n - 1] = (2.0 * v[n - 1] - 5.0 * v[n - 2] + 4.0 * v[n - 3] - v[n - 4]) / h2;
        }
        other => panic!("derivative order must be 1 or 2, got {other}"),
    }
    SpatialProfile::new(p.grid(), out).expect("derivative of finite profile is finite")
}
