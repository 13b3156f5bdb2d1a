//! Backstepping kernels and transforms.
//!
//! The gain kernel K(x, y) and inverse kernel L(x, y) live on the triangle
//! 0 <= y <= x <= 1 and satisfy hyperbolic Goursat problems
//!
//! ```text
//! K_xx - K_yy = +(lambda(y)/eps) K        L_xx - L_yy = -(lambda(y)/eps) L
//! theta1 K_y(x, 0) = -theta2 K(x, 0)      (same boundary row for L)
//! K(x, x) = -(1/(2 eps)) * integral_0^x lambda
//! ```
//!
//! Both are solved by successive approximation of the equivalent integral
//! equation in characteristic coordinates xi = x + y, eta = x - y on a
//! square lattice, which converges geometrically for bounded lambda. The
//! module also provides the Volterra transforms w = u - int K u and
//! u = w + int L w, their dense matrix forms, and the boundary feedback gain
//! k(y) = wp K(1, y) + K_x(1, y).

use crate::error::{Error, Result};
use crate::numerics::{
    central_derivative, trapezoid_integral, trapezoid_weights, Grid, SpatialProfile,
};

/// Convergence threshold for the kernel fixed-point iteration.
pub const KERNEL_SWEEP_TOL: f64 = 1e-12;
/// Hard cap on fixed-point sweeps.
pub const KERNEL_MAX_SWEEPS: usize = 200;

/// Reaction-diffusion plant description.
///
/// ```text
/// u_t = eps u_xx + lambda(x) u
/// theta1 u_x(0, t) = -theta2 u(0, t)
/// u_x(1, t) = -q u(1, t) + U(t)
/// ```
///
/// Exactly one of `theta1`, `theta2` is 1 (Neumann or Dirichlet base
/// boundary). Well-posedness of the design requires
/// `q > max(lambda)/(2 eps) + theta1/2`, which the constructor enforces.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantConfig {
    epsilon: f64,
    lambda: SpatialProfile,
    q: f64,
    theta1: u8,
    theta2: u8,
    u0: SpatialProfile,
}

impl PlantConfig {
    /// Validate and build a plant description.
    pub fn new(
        epsilon: f64,
        lambda: SpatialProfile,
        q: f64,
        theta1: u8,
        theta2: u8,
        u0: SpatialProfile,
    ) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::ValidationError(format!("epsilon must be > 0, got {epsilon}")));
        }
        if !(q.is_finite() && q > 0.0) {
            return Err(Error::ValidationError(format!("q must be > 0, got {q}")));
        }
        if theta1 > 1 || theta2 > 1 || theta1 + theta2 != 1 {
            return Err(Error::ValidationError(format!(
                "theta1/theta2 must be complementary bits, got ({theta1}, {theta2})"
            )));
        }
        if lambda.values().iter().any(|&v| v < 0.0) {
            return Err(Error::ValidationError("lambda must be nonnegative".into()));
        }
        lambda.check_same_grid(&u0)?;
        let plant = Self { epsilon, lambda, q, theta1, theta2, u0 };
        plant.check_assumption()?;
        Ok(plant)
    }

    fn check_assumption(&self) -> Result<()> {
        let bound = self.lambda_max() / (2.0 * self.epsilon) + f64::from(self.theta1) / 2.0;
        if self.q <= bound {
            return Err(Error::AssumptionViolated(format!(
                "q = {} must exceed max(lambda)/(2 eps) + theta1/2 = {}",
                self.q, bound
            )));
        }
        Ok(())
    }

    /// Diffusion coefficient.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Reaction coefficient profile.
    pub fn lambda(&self) -> &SpatialProfile {
        &self.lambda
    }

    /// Robin boundary coefficient.
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Neumann selector bit.
    pub fn theta1(&self) -> u8 {
        self.theta1
    }

    /// Dirichlet selector bit.
    pub fn theta2(&self) -> u8 {
        self.theta2
    }

    /// Initial condition.
    pub fn u0(&self) -> &SpatialProfile {
        &self.u0
    }

    /// Simulation grid shared by lambda and u0.
    pub fn grid(&self) -> Grid {
        self.lambda.grid()
    }

    /// Largest reaction coefficient.
    pub fn lambda_max(&self) -> f64 {
        self.lambda.max_value()
    }

    /// True when the uncontrolled boundary is Neumann (theta1 = 1).
    pub fn is_neumann(&self) -> bool {
        self.theta1 == 1
    }

    /// lambda linearly interpolated at an arbitrary point of [0, 1].
    pub(crate) fn lambda_at(&self, s: f64) -> f64 {
        interp_linear(&self.lambda, s)
    }
}

/// Linear interpolation of a profile at s in [0, 1].
fn interp_linear(p: &SpatialProfile, s: f64) -> f64 {
    let g = p.grid();
    let n = g.n_nodes();
    let pos = (s / g.dx()).clamp(0.0, (n - 1) as f64);
    let i = (pos.floor() as usize).min(n - 2);
    let frac = pos - i as f64;
    p.value(i) * (1.0 - frac) + p.value(i + 1) * frac
}

/// A kernel sampled on the lower triangle of a square grid.
///
/// Values are stored densely row-major with zeros above the diagonal.
#[derive(Debug, Clone)]
pub struct KernelField {
    grid: Grid,
    values: Vec<f64>,
}

impl KernelField {
    /// Sample a closure on the lower triangle.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let n = grid.n_nodes();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = f(grid.x(i), grid.x(j));
                if !v.is_finite() {
                    return Err(Error::ValidationError(format!(
                        "kernel value not finite at ({i}, {j})"
                    )));
                }
                values[i * n + j] = v;
            }
        }
        Ok(Self { grid, values })
    }

    fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_nodes() * grid.n_nodes());
        Self { grid, values }
    }

    /// Grid of the triangle.
    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Kernel value at node (i, j); zero above the diagonal.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n_nodes() + j]
    }

    /// Row i as a slice of length n (entries beyond the diagonal are zero).
    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.grid.n_nodes();
        &self.values[i * n..(i + 1) * n]
    }

    /// Largest magnitude over the triangle.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Subsample onto a coarser grid that this grid refines exactly.
    pub fn restrict(&self, coarse: Grid) -> Result<KernelField> {
        let r = self.grid.refinement_of(&coarse)?;
        let nc = coarse.n_nodes();
        let nf = self.grid.n_nodes();
        let mut values = vec![0.0; nc * nc];
        for i in 0..nc {
            for j in 0..=i {
                values[i * nc + j] = self.values[(i * r) * nf + j * r];
            }
        }
        Ok(KernelField::from_raw(coarse, values))
    }
}

/// Target-system boundary coefficient wp = q - (1/(2 eps)) integral lambda.
///
/// Re-validates the plant well-posedness assumption, which guarantees wp
/// large enough for the target system to be exponentially stable.
pub fn gain_offset(plant: &PlantConfig) -> Result<f64> {
    plant.check_assumption()?;
    Ok(plant.q() - trapezoid_integral(plant.lambda()) / (2.0 * plant.epsilon()))
}

/// Solve for the gain kernel K on `grid` (may refine the plant grid).
pub fn solve_kernel_forward(plant: &PlantConfig, grid: Grid) -> Result<KernelField> {
    solve_goursat(plant, grid, 1.0)
}

/// Solve for the inverse kernel L on `grid`.
pub fn solve_kernel_inverse(plant: &PlantConfig, grid: Grid) -> Result<KernelField> {
    solve_goursat(plant, grid, -1.0)
}

/// Successive-approximation Goursat solver in characteristic coordinates.
///
/// With xi = x + y and eta = x - y the kernel G(xi, eta) = K(x, y) satisfies
/// G_xi_eta = phi G where phi(sigma, s) = sign * lambda((sigma - s)/2)/(4 eps),
/// together with G(xi, xi) = 0-side data from the diagonal condition. The
/// equivalent integral equation is iterated on the lattice
/// a = 0..2M (xi), b = 0..M (eta), masked to b <= min(a, 2M - a):
///
/// ```text
/// Dirichlet: G = f(xi) - f(eta) + Rect
/// Neumann:   G = f(xi) + f(eta) + 2 Tri(eta) + Rect
/// f(xi) = -(1/(2 eps)) integral_0^{xi/2} lambda
/// Rect(xi, eta) = int_eta^xi int_0^eta  phi G ds dsigma
/// Tri(eta)      = int_0^eta int_0^sigma phi G ds dsigma
/// ```
///
/// All quadratures are trapezoid rules with step hk, so the scheme is
/// second-order in the grid spacing.
fn solve_goursat(plant: &PlantConfig, grid: Grid, sign: f64) -> Result<KernelField> {
    let nk = grid.n_nodes();
    let m = nk - 1;
    let hk = grid.dx();
    let rows = 2 * m + 1;
    let cols = m + 1;
    let eps = plant.epsilon();
    let neumann = plant.is_neumann();

    // lambda on the half-step lattice: lam_half[r] = lambda(r * hk / 2).
    let lam_half: Vec<f64> = (0..rows).map(|r| plant.lambda_at(r as f64 * hk / 2.0)).collect();
    // f on the xi grid (cumulative trapezoid of lambda over [0, xi/2]).
    let mut f = vec![0.0; rows];
    for a in 1..rows {
        f[a] = f[a - 1] + 0.25 * hk * (lam_half[a - 1] + lam_half[a]);
    }
    for v in &mut f {
        *v = -*v / (2.0 * eps);
    }

    let idx = |a: usize, b: usize| a * cols + b;
    let mask_top = |a: usize| (a.min(2 * m - a)).min(m); // largest valid b in column a
    let phi = |a: usize, b: usize| sign * lam_half[a - b] / (4.0 * eps);

    let mut g = vec![0.0; rows * cols];
    for a in 0..rows {
        for b in 0..=mask_top(a) {
            g[idx(a, b)] = if neumann { f[a] + f[b] } else { f[a] - f[b] };
        }
    }

    let mut work = vec![0.0; rows * cols];
    let mut g_next = vec![0.0; rows * cols];
    let mut inner_diag = vec![0.0; cols];
    let mut tri = vec![0.0; cols];
    let mut p_diag = vec![0.0; cols];
    let mut diffs: Vec<f64> = Vec::with_capacity(KERNEL_MAX_SWEEPS);

    for sweep in 0..KERNEL_MAX_SWEEPS {
        // inner(a, b) = int_0^{eta_b} phi G ds along the row, zero off-mask.
        for a in 0..rows {
            let top = mask_top(a);
            let mut acc = 0.0;
            work[idx(a, 0)] = 0.0;
            let mut prev = if top >= 1 { phi(a, 0) * g[idx(a, 0)] } else { 0.0 };
            for b in 1..cols {
                let cur = if b <= top { phi(a, b) * g[idx(a, b)] } else { 0.0 };
                acc += 0.5 * hk * (prev + cur);
                work[idx(a, b)] = acc;
                prev = cur;
            }
        }
        for b in 0..cols {
            inner_diag[b] = work[idx(b, b)];
        }
        // P(a, b) = int_0^{xi_a} inner dsigma, in place along columns.
        for b in 0..cols {
            let mut acc = 0.0;
            let mut prev = work[idx(0, b)];
            work[idx(0, b)] = 0.0;
            for a in 1..rows {
                let cur = work[idx(a, b)];
                acc += 0.5 * hk * (prev + cur);
                work[idx(a, b)] = acc;
                prev = cur;
            }
            p_diag[b] = work[idx(b, b)];
        }
        if neumann {
            tri[0] = 0.0;
            for b in 1..cols {
                tri[b] = tri[b - 1] + 0.5 * hk * (inner_diag[b - 1] + inner_diag[b]);
            }
        }

        let mut diff = 0.0f64;
        for a in 0..rows {
            let top = mask_top(a);
            for b in 0..cols {
                let v = if b <= top {
                    let base = if neumann { f[a] + f[b] + 2.0 * tri[b] } else { f[a] - f[b] };
                    base + work[idx(a, b)] - p_diag[b]
                } else {
                    0.0
                };
                diff = diff.max((v - g[idx(a, b)]).abs());
                g_next[idx(a, b)] = v;
            }
        }
        std::mem::swap(&mut g, &mut g_next);
        if diff <= KERNEL_SWEEP_TOL {
            let mut values = vec![0.0; nk * nk];
            for i in 0..nk {
                for j in 0..=i {
                    values[i * nk + j] = g[idx(i + j, i - j)];
                }
            }
            return Ok(KernelField::from_raw(grid, values));
        }
        diffs.push(diff);
        if !diff.is_finite() {
            return Err(Error::NoConvergence(format!(
                "iteration diverged to a non-finite update at sweep {sweep}"
            )));
        }
        if sweep >= 50 && diffs[sweep] > diffs[sweep - 50] / 10.0 {
            return Err(Error::NoConvergence(format!(
                "update norm fell less than 10x over 50 sweeps ({:.3e} -> {:.3e})",
                diffs[sweep - 50],
                diffs[sweep]
            )));
        }
    }
    Err(Error::NoConvergence(format!(
        "update norm still {:.3e} after {KERNEL_MAX_SWEEPS} sweeps",
        diffs.last().copied().unwrap_or(f64::NAN)
    )))
}

/// Finite-difference defect of a solved kernel against its Goursat system.
#[derive(Debug, Clone, Copy)]
pub struct KernelResiduals {
    /// Max interior defect of K_xx - K_yy - sign (lambda(y)/eps) K, centered stencils.
    pub pde_interior: f64,
    /// Max defect of the y = 0 boundary row (one-sided K_y for Neumann).
    pub boundary: f64,
    /// Max defect of the diagonal condition K(x,x) = -(1/(2 eps)) int lambda.
    pub diagonal: f64,
}

/// Evaluate [`KernelResiduals`] for a field solved with the given sign
/// (+1 for the gain kernel K, -1 for the inverse kernel L).
pub fn kernel_residuals(field: &KernelField, plant: &PlantConfig, sign: f64) -> KernelResiduals {
    let g = field.grid();
    let n = g.n_nodes();
    let h = g.dx();
    let lam: Vec<f64> = (0..n).map(|j| plant.lambda_at(g.x(j))).collect();

    let mut pde = 0.0f64;
    for i in 2..n - 1 {
        for j in 1..i.saturating_sub(1) {
            let kxx = (field.value(i + 1, j) - 2.0 * field.value(i, j) + field.value(i - 1, j))
                / (h * h);
            let kyy = (field.value(i, j + 1) - 2.0 * field.value(i, j) + field.value(i, j - 1))
                / (h * h);
            let defect = kxx - kyy - sign * lam[j] / plant.epsilon() * field.value(i, j);
            pde = pde.max(defect.abs());
        }
    }

    let mut boundary = 0.0f64;
    if plant.is_neumann() {
        for i in 2..n {
            let ky = (-1.5 * field.value(i, 0) + 2.0 * field.value(i, 1)
                - 0.5 * field.value(i, 2))
                / h;
            boundary = boundary.max(ky.abs());
        }
    } else {
        for i in 0..n {
            boundary = boundary.max(field.value(i, 0).abs());
        }
    }

    // Diagonal target integrated on the same half-step lattice as the solver.
    let mut diagonal = 0.0f64;
    let mut acc = 0.0;
    let mut prev = plant.lambda_at(0.0);
    for i in 0..n {
        if i > 0 {
            let mid = plant.lambda_at(g.x(i) - h / 2.0);
            let cur = plant.lambda_at(g.x(i));
            acc += 0.25 * h * (prev + 2.0 * mid + cur);
            prev = cur;
        }
        diagonal = diagonal.max((field.value(i, i) + acc / (2.0 * plant.epsilon())).abs());
    }
    KernelResiduals { pde_interior: pde, boundary, diagonal }
}

/// Boundary feedback gain profile k(y) with cached boundary derivatives.
#[derive(Debug, Clone)]
pub struct GainProfile {
    k: SpatialProfile,
    k_at_1: f64,
    kprime_at_1: f64,
    kpp: SpatialProfile,
}

impl GainProfile {
    /// Assemble a gain from precomputed samples and boundary derivatives.
    pub fn from_parts(k: SpatialProfile, k_at_1: f64, kprime_at_1: f64, kpp: SpatialProfile) -> Self {
        GainProfile { k, k_at_1, kprime_at_1, kpp }
    }

    /// Gain samples on the simulation grid.
    pub fn k(&self) -> &SpatialProfile {
        &self.k
    }

    /// k(1).
    pub fn k_at_1(&self) -> f64 {
        self.k_at_1
    }

    /// k'(1) by the one-sided second-order stencil.
    pub fn kprime_at_1(&self) -> f64 {
        self.kprime_at_1
    }

    /// Second derivative of k on the simulation grid.
    pub fn kpp(&self) -> &SpatialProfile {
        &self.kpp
    }
}

/// Build the feedback gain k(y) = wp K(1, y) + K_x(1, y) on `sim_grid`.
///
/// K_x at x = 1 uses one-sided three-point stencils on the kernel grid; at
/// the corner y = 1 it comes from the diagonal identity
/// K_x(1,1) + K_y(1,1) = -lambda(1)/(2 eps) with K_y one-sided along the top
/// row. The kernel grid must refine `sim_grid` exactly.
pub fn gain_profile(
    kernel: &KernelField,
    plant: &PlantConfig,
    sim_grid: Grid,
) -> Result<GainProfile> {
    let ratio = kernel.grid().refinement_of(&sim_grid)?;
    let wp = gain_offset(plant)?;
    let nf = kernel.grid().n_nodes();
    let hk = kernel.grid().dx();
    let top = kernel.row(nf - 1);
    let mid = kernel.row(nf - 2);
    let low = kernel.row(nf - 3);

    let kx_at = |j: usize| -> f64 {
        if j <= nf - 3 {
            (1.5 * top[j] - 2.0 * mid[j] + 0.5 * low[j]) / hk
        } else if j == nf - 2 {
            (top[j] - mid[j]) / hk
        } else {
            let ky = (1.5 * top[nf - 1] - 2.0 * top[nf - 2] + 0.5 * top[nf - 3]) / hk;
            -plant.lambda_at(1.0) / (2.0 * plant.epsilon()) - ky
        }
    };

    let ns = sim_grid.n_nodes();
    let mut k = vec![0.0; ns];
    for (i, ki) in k.iter_mut().enumerate() {
        let j = i * ratio;
        *ki = wp * top[j] + kx_at(j);
    }
    let k = SpatialProfile::new(sim_grid, k)?;
    let kprime = central_derivative(&k, 1);
    let kpp = central_derivative(&k, 2);
    Ok(GainProfile {
        k_at_1: k.boundary_value(),
        kprime_at_1: kprime.boundary_value(),
        k,
        kpp,
    })
}

/// Forward Volterra transform w(x) = u(x) - int_0^x K(x, y) u(y) dy.
pub fn forward_transform(u: &SpatialProfile, kernel: &KernelField) -> Result<SpatialProfile> {
    volterra_apply(u, kernel, -1.0)
}

/// Inverse Volterra transform u(x) = w(x) + int_0^x L(x, y) w(y) dy.
pub fn inverse_transform(w: &SpatialProfile, kernel: &KernelField) -> Result<SpatialProfile> {
    volterra_apply(w, kernel, 1.0)
}

fn volterra_apply(p: &SpatialProfile, kernel: &KernelField, sign: f64) -> Result<SpatialProfile> {
    if p.grid() != kernel.grid() {
        return Err(Error::GridMismatch {
            left: p.grid().n_nodes(),
            right: kernel.grid().n_nodes(),
        });
    }
    let n = p.grid().n_nodes();
    let dx = p.grid().dx();
    let v = p.values();
    let mut out = vec![0.0; n];
    out[0] = v[0];
    for i in 1..n {
        let row = kernel.row(i);
        let mut acc = 0.5 * (row[0] * v[0] + row[i] * v[i]);
        for j in 1..i {
            acc += row[j] * v[j];
        }
        out[i] = v[i] + sign * acc * dx;
    }
    SpatialProfile::new(p.grid(), out)
}

/// Dense matrix of `I + sign * T` where T is the triangular Volterra operator
/// of `kernel` under trapezoid quadrature. Row-major n x n. With sign = -1
/// this is the forward transform matrix, with +1 the inverse one.
pub fn transform_matrix(kernel: &KernelField, sign: f64) -> Vec<f64> {
    let n = kernel.grid().n_nodes();
    let dx = kernel.grid().dx();
    let mut mat = vec![0.0; n * n];
    for i in 0..n {
        let row = kernel.row(i);
        let out = &mut mat[i * n..(i + 1) * n];
        if i > 0 {
            let w = trapezoid_weights(i + 1, dx);
            for j in 0..=i {
                out[j] = sign * w[j] * row[j];
            }
        }
        out[i] += 1.0;
    }
    mat
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::l2_norm;

    /// Series for I1(z)/z as a function of z^2 (modified Bessel, order 1).
    fn i1_over_z(z2: f64) -> f64 {
        let mut term = 0.5;
        let mut sum = term;
        for m in 1..60 {
            term *= (z2 / 4.0) / (m as f64 * (m as f64 + 1.0));
            sum += term;
        }
        sum
    }

    /// Series for J1(z)/z as a function of z^2 (Bessel, order 1).
    fn j1_over_z(z2: f64) -> f64 {
        let mut term = 0.5;
        let mut sum = term;
        for m in 1..80 {
            term *= (-z2 / 4.0) / (m as f64 * (m as f64 + 1.0));
            sum += term;
        }
        sum
    }

    /// Series for I2(z)/z^2 as a function of z^2 (modified Bessel, order 2).
    fn i2_over_z2(z2: f64) -> f64 {
        let mut term = 0.125;
        let mut sum = term;
        for m in 1..60 {
            term *= (z2 / 4.0) / (m as f64 * (m as f64 + 2.0));
            sum += term;
        }
        sum
    }

    fn benchmark_plant(n: usize) -> PlantConfig {
        let g = Grid::new(n).unwrap();
        let lambda = SpatialProfile::constant(g, 0.25).unwrap();
        let u0 = SpatialProfile::from_fn(g, |x| 10.0 * x * x * (x - 1.0) * (x - 1.0)).unwrap();
        PlantConfig::new(0.1, lambda, 2.0, 1, 0, u0).unwrap()
    }

    fn dirichlet_plant(n: usize) -> PlantConfig {
        let g = Grid::new(n).unwrap();
        let lambda = SpatialProfile::constant(g, 0.25).unwrap();
        let u0 = SpatialProfile::from_fn(g, |x| x * (1.0 - x)).unwrap();
        PlantConfig::new(0.1, lambda, 2.0, 0, 1, u0).unwrap()
    }

    /// Closed-form kernels for constant lambda:
    /// K = -lb p(x,y) I1(z)/z, L = -lb p J1(z)/z with lb = lambda/eps,
    /// z = sqrt(lb (x^2 - y^2)), p = x (Neumann) or y (Dirichlet).
    fn exact_kernels(plant: &PlantConfig, grid: Grid) -> (KernelField, KernelField) {
        let lb = plant.lambda().value(0) / plant.epsilon();
        let pref = move |x: f64, y: f64| if plant.is_neumann() { x } else { y };
        let p = plant.clone();
        let k = KernelField::from_fn(grid, |x, y| {
            -lb * pref(x, y) * i1_over_z(lb * (x * x - y * y))
        })
        .unwrap();
        let pref2 = move |x: f64, y: f64| if p.is_neumann() { x } else { y };
        let l = KernelField::from_fn(grid, |x, y| {
            -lb * pref2(x, y) * j1_over_z(lb * (x * x - y * y))
        })
        .unwrap();
        (k, l)
    }

    fn max_triangle_diff(a: &KernelField, b: &KernelField) -> f64 {
        let n = a.grid().n_nodes();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..=i {
                worst = worst.max((a.value(i, j) - b.value(i, j)).abs());
            }
        }
        worst
    }

    #[test]
    fn plant_config_validation() {
        let g = Grid::new(11).unwrap();
        let lam = SpatialProfile::constant(g, 0.25).unwrap();
        let u0 = SpatialProfile::constant(g, 0.0).unwrap();
        // Assumption bound: q must exceed 0.25/0.2 + 0.5 = 1.75.
        let err = PlantConfig::new(0.1, lam.clone(), 1.7, 1, 0, u0.clone()).unwrap_err();
        assert!(matches!(err, Error::AssumptionViolated(_)));
        assert!(PlantConfig::new(0.1, lam.clone(), 2.0, 1, 1, u0.clone()).is_err());
        let neg = SpatialProfile::constant(g, -0.1).unwrap();
        assert!(PlantConfig::new(0.1, neg, 2.0, 1, 0, u0.clone()).is_err());
        assert!(PlantConfig::new(0.1, lam, 2.0, 1, 0, u0).is_ok());
    }

    #[test]
    fn gain_offset_benchmark_value() {
        let plant = benchmark_plant(201);
        // wp = q - lambda/(2 eps) = 2 - 0.25/0.2 = 0.75.
        assert!((gain_offset(&plant).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn zero_lambda_gives_zero_kernels() {
        let g = Grid::new(41).unwrap();
        let lam = SpatialProfile::constant(g, 0.0).unwrap();
        let u0 = SpatialProfile::constant(g, 1.0).unwrap();
        let plant = PlantConfig::new(0.1, lam, 1.0, 1, 0, u0).unwrap();
        let k = solve_kernel_forward(&plant, g).unwrap();
        let l = solve_kernel_inverse(&plant, g).unwrap();
        assert_eq!(k.max_abs(), 0.0);
        assert_eq!(l.max_abs(), 0.0);
    }

    #[test]
    fn neumann_kernels_match_bessel_series() {
        let plant = benchmark_plant(201);
        let fine = plant.grid().refine(4).unwrap();
        let k = solve_kernel_forward(&plant, fine).unwrap();
        let l = solve_kernel_inverse(&plant, fine).unwrap();
        let (k_ex, l_ex) = exact_kernels(&plant, fine);
        assert!(max_triangle_diff(&k, &k_ex) < 1e-6, "K err {}", max_triangle_diff(&k, &k_ex));
        assert!(max_triangle_diff(&l, &l_ex) < 1e-6, "L err {}", max_triangle_diff(&l, &l_ex));
    }

    #[test]
    fn dirichlet_kernels_match_bessel_series() {
        let plant = dirichlet_plant(201);
        let fine = plant.grid().refine(2).unwrap();
        let k = solve_kernel_forward(&plant, fine).unwrap();
        let l = solve_kernel_inverse(&plant, fine).unwrap();
        let (k_ex, l_ex) = exact_kernels(&plant, fine);
        assert!(max_triangle_diff(&k, &k_ex) < 1e-6, "K err {}", max_triangle_diff(&k, &k_ex));
        assert!(max_triangle_diff(&l, &l_ex) < 1e-6, "L err {}", max_triangle_diff(&l, &l_ex));
    }

    #[test]
    fn residuals_small_for_constant_and_affine_lambda() {
        // The centered-difference defect of the converged kernel scales with
        // the square of the kernel grid spacing; the affine case needs the
        // finer grid to sit inside the bound.
        let g = Grid::new(201).unwrap();
        let u0 = SpatialProfile::constant(g, 0.0).unwrap();
        let affine = PlantConfig::new(
            0.1,
            SpatialProfile::from_fn(g, |x| 0.25 * (1.0 + x)).unwrap(),
            4.0,
            1,
            0,
            u0,
        )
        .unwrap();
        for (plant, refine) in [(benchmark_plant(201), 4usize), (dirichlet_plant(201), 4), (affine, 8)]
        {
            let fine = g.refine(refine).unwrap();
            for (field, sign) in [
                (solve_kernel_forward(&plant, fine).unwrap(), 1.0),
                (solve_kernel_inverse(&plant, fine).unwrap(), -1.0),
            ] {
                let r = kernel_residuals(&field, &plant, sign);
                let bound = 1e-6 * (1.0 + field.max_abs());
                assert!(r.pde_interior <= bound, "pde {} vs {}", r.pde_interior, bound);
                assert!(r.boundary <= bound, "boundary {}", r.boundary);
                assert!(r.diagonal <= 1e-8, "diagonal {}", r.diagonal);
            }
        }
    }

    #[test]
    fn gain_profile_benchmark_values() {
        let plant = benchmark_plant(201);
        let fine = plant.grid().refine(4).unwrap();
        let k_field = solve_kernel_forward(&plant, fine).unwrap();
        let gain = gain_profile(&k_field, &plant, plant.grid()).unwrap();
        // Analytic values for eps = 0.1, lambda = 0.25, q = 2 (Neumann):
        // k(1) = wp K(1,1) + K_x(1,1) with K(1,1) = -1.25, K_x(1,1) = -2.03125.
        assert!((gain.k_at_1() + 2.96875).abs() < 1e-4, "k(1) = {}", gain.k_at_1());
        assert!((gain.kprime_at_1() - 1.6927).abs() < 2e-3, "k'(1) = {}", gain.kprime_at_1());
        // Exact k from the Bessel closed form.
        let lb = 2.5;
        let g = plant.grid();
        let mut worst = 0.0f64;
        for i in 0..g.n_nodes() {
            let y = g.x(i);
            let z2 = lb * (1.0 - y * y);
            let exact = 0.75 * (-lb * i1_over_z(z2)) + (-lb * i1_over_z(z2) - lb * lb * i2_over_z2(z2));
            worst = worst.max((gain.k().value(i) - exact).abs());
        }
        assert!(worst < 1e-4, "max gain error {worst}");
    }

    #[test]
    fn gain_norm_shrinks_monotonically_with_lambda() {
        let g = Grid::new(101).unwrap();
        let u0 = SpatialProfile::constant(g, 0.0).unwrap();
        let mut norms = Vec::new();
        for lam_v in [0.25, 0.125, 0.0625, 0.0] {
            let lam = SpatialProfile::constant(g, lam_v).unwrap();
            let plant = PlantConfig::new(0.1, lam, 2.0, 1, 0, u0.clone()).unwrap();
            let fine = g.refine(2).unwrap();
            let k_field = solve_kernel_forward(&plant, fine).unwrap();
            let gain = gain_profile(&k_field, &plant, g).unwrap();
            norms.push(l2_norm(gain.k()));
        }
        for w in norms.windows(2) {
            assert!(w[1] < w[0], "gain norms not decreasing: {norms:?}");
        }
        assert!(norms.last().unwrap().abs() < 1e-12, "zero lambda must zero the gain");
    }

    #[test]
    fn transforms_match_dense_matrix_oracle() {
        let plant = benchmark_plant(201);
        let g = plant.grid();
        let (k_ex, l_ex) = exact_kernels(&plant, g);
        let u = plant.u0().clone();
        let w = forward_transform(&u, &k_ex).unwrap();
        let mat = transform_matrix(&k_ex, -1.0);
        let n = g.n_nodes();
        let mut w_mat = vec![0.0; n];
        for i in 0..n {
            w_mat[i] = crate::numerics::dot(&mat[i * n..(i + 1) * n], u.values());
        }
        for i in 0..n {
            assert!((w.value(i) - w_mat[i]).abs() < 1e-6 * (1.0 + w_mat[i].abs()));
        }
        let back = inverse_transform(&w, &l_ex).unwrap();
        let mut err = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..n {
            err += (back.value(i) - u.value(i)).powi(2);
            scale += u.value(i).powi(2);
        }
        assert!((err / scale).sqrt() < 1e-5, "round trip rel err {}", (err / scale).sqrt());
    }

    #[test]
    fn round_trip_identity_on_band_limited_profiles() {
        // Quadrature composition error scales with the square of the grid
        // spacing, so the 1e-6 identity is asserted at the kernel grid.
        let plant = benchmark_plant(201);
        let fine = plant.grid().refine(8).unwrap();
        let k = solve_kernel_forward(&plant, fine).unwrap();
        let l = solve_kernel_inverse(&plant, fine).unwrap();
        // Deterministic pseudo-random cosine-series profiles, 5 modes.
        let mut state = 0x2545f4914f6cdd1du64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for case in 0..20 {
            let coef: Vec<f64> = (0..6).map(|_| next()).collect();
            let u = SpatialProfile::from_fn(fine, |x| {
                coef.iter()
                    .enumerate()
                    .map(|(m, c)| c * (m as f64 * std::f64::consts::PI * x).cos())
                    .sum()
            })
            .unwrap();
            let norm = l2_norm(&u);
            if norm < 1e-2 {
                continue;
            }
            let there = forward_transform(&u, &k).unwrap();
            let back = inverse_transform(&there, &l).unwrap();
            let mut num = 0.0f64;
            for i in 0..fine.n_nodes() {
                num += (back.value(i) - u.value(i)).powi(2);
            }
            let rel = (num * fine.dx()).sqrt() / norm;
            assert!(rel < 1e-6, "case {case}: round trip rel err {rel}");
            // And the reverse composition.
            let w = SpatialProfile::from_fn(fine, |x| {
                coef.iter()
                    .enumerate()
                    .map(|(m, c)| c * (m as f64 * std::f64::consts::PI * x).cos())
                    .sum()
            })
            .unwrap();
            let off = inverse_transform(&w, &l).unwrap();
            let forth = forward_transform(&off, &k).unwrap();
            let mut num2 = 0.0f64;
            for i in 0..fine.n_nodes() {
                num2 += (forth.value(i) - w.value(i)).powi(2);
            }
            let rel2 = (num2 * fine.dx()).sqrt() / l2_norm(&w);
            assert!(rel2 < 1e-6, "case {case}: reverse round trip rel err {rel2}");
        }
    }

    #[test]
    fn transform_rejects_grid_mismatch() {
        let plant = benchmark_plant(201);
        let (k_ex, _) = exact_kernels(&plant, plant.grid());
        let other = Grid::new(101).unwrap();
        let u = SpatialProfile::constant(other, 1.0).unwrap();
        assert!(matches!(
            forward_transform(&u, &k_ex).unwrap_err(),
            Error::GridMismatch { .. }
        ));
    }

    #[test]
    fn restrict_subsamples_shared_nodes() {
        let plant = benchmark_plant(51);
        let fine = plant.grid().refine(4).unwrap();
        let k = solve_kernel_forward(&plant, fine).unwrap();
        let coarse = k.restrict(plant.grid()).unwrap();
        for i in 0..51 {
            for j in 0..=i {
                assert_eq!(coarse.value(i, j), k.value(4 * i, 4 * j));
            }
        }
        let bad = Grid::new(50).unwrap();
        assert!(k.restrict(bad).is_err());
    }
}
