//! Implicit-Euler time stepping of the reaction-diffusion plant with
//! zero-order-hold boundary input.
//!
//! The operator eps d_xx + lambda(x) is discretized with second-order central
//! differences; the x = 0 condition (Neumann or Dirichlet) and the Robin
//! condition u_x(1) = -q u(1) + U enter the tridiagonal rows by second-order
//! ghost-node elimination. Each step solves (I - dt A) u+ = u + dt g where g
//! carries the boundary input.

use crate::error::Result;
use crate::kernels::{GainProfile, PlantConfig};
use crate::numerics::{trapz, SpatialProfile, TridiagFactor};

/// Hybrid-loop plant state: current profile plus the held input and the
/// snapshot taken at the last control update.
#[derive(Debug, Clone)]
pub struct PlantState {
    /// Current time, s.
    pub t: f64,
    /// Current spatial profile u(., t).
    pub u: SpatialProfile,
    /// Control value held since the last event.
    pub u_hold: f64,
    /// Time of the last control update.
    pub t_last_event: f64,
    /// Profile snapshot at the last control update.
    pub u_at_event: SpatialProfile,
}

impl PlantState {
    /// Start at t = 0 from the plant's initial profile with zero held input.
    pub fn initial(plant: &PlantConfig) -> Self {
        PlantState {
            t: 0.0,
            u: plant.u0().clone(),
            u_hold: 0.0,
            t_last_event: 0.0,
            u_at_event: plant.u0().clone(),
        }
    }
}

/// Prefactored implicit-Euler stepper for one (plant, dt) pair.
#[derive(Debug, Clone)]
pub struct Stepper {
    dt: f64,
    factor: TridiagFactor,
    /// rhs contribution of the boundary input: dt * 2 eps / dx.
    input_coeff: f64,
    dirichlet: bool,
}

impl Stepper {
    /// Assemble and factor I - dt A for the given plant.
    pub fn new(plant: &PlantConfig, dt: f64) -> Result<Self> {
        assert!(dt > 0.0, "step size must be positive");
        let g = plant.grid();
        let n = g.n_nodes();
        let dx = g.dx();
        let eps = plant.epsilon();
        let q = plant.q();
        let lam = plant.lambda().values();
        let r = eps / (dx * dx);

        let mut lower = vec![-dt * r; n - 1];
        let mut diag = vec![0.0; n];
        let mut upper = vec![-dt * r; n - 1];
        for i in 1..n - 1 {
            diag[i] = 1.0 + dt * (2.0 * r - lam[i]);
        }
        if plant.is_neumann() {
            // Ghost elimination of u_x(0) = 0: u_{-1} = u_1.
            diag[0] = 1.0 + dt * (2.0 * r - lam[0]);
            upper[0] = -2.0 * dt * r;
        } else {
            // Pinned row u(0) = 0.
            diag[0] = 1.0;
            upper[0] = 0.0;
        }
        // Ghost elimination of u_x(1) = -q u(1) + U.
        lower[n - 2] = -2.0 * dt * r;
        diag[n - 1] = 1.0 + dt * (2.0 * r * (1.0 + q * dx) - lam[n - 1]);

        Ok(Stepper {
            dt,
            factor: TridiagFactor::new(&lower, &diag, &upper)?,
            input_coeff: dt * 2.0 * eps / dx,
            dirichlet: !plant.is_neumann(),
        })
    }

    /// Step size this stepper was factored for.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advance `u` in place by one step under boundary input `input`
    /// (held control plus any additive boundary disturbance).
    pub fn step_values(&self, u: &mut [f64], input: f64) -> Result<()> {
        let n = u.len();
        u[n - 1] += self.input_coeff * input;
        if self.dirichlet {
            u[0] = 0.0;
        }
        self.factor.solve_in_place(u);
        Ok(())
    }
}

/// Advance a plant state by one implicit-Euler step under its held input.
pub fn step(state: &PlantState, plant: &PlantConfig, dt: f64) -> Result<PlantState> {
    let stepper = Stepper::new(plant, dt)?;
    let mut u = state.u.values().to_vec();
    stepper.step_values(&mut u, state.u_hold)?;
    Ok(PlantState {
        t: state.t + dt,
        u: SpatialProfile::new(plant.grid(), u)?,
        u_hold: state.u_hold,
        t_last_event: state.t_last_event,
        u_at_event: state.u_at_event.clone(),
    })
}

/// Sampled control U = int_0^1 k(y) u(y) dy by trapezoid quadrature.
pub fn sample_control(gain: &GainProfile, u: &SpatialProfile) -> Result<f64> {
    gain.k().check_same_grid(u)?;
    let prod: Vec<f64> = gain
        .k()
        .values()
        .iter()
        .zip(u.values())
        .map(|(k, v)| k * v)
        .collect();
    Ok(trapz(&prod, u.grid().dx()))
}

/// Input-holding error d = int k (u_at_event - u_now) dy, the deviation of the
/// held control from the continuously recomputed law.
pub fn input_holding_error(
    gain: &GainProfile,
    u_now: &SpatialProfile,
    u_at_event: &SpatialProfile,
) -> Result<f64> {
    Ok(sample_control(gain, u_at_event)? - sample_control(gain, u_now)?)
}
