//! Simulation library for event-triggered backstepping boundary control of
//! one-dimensional reaction-diffusion PDEs.
//!
//! The plant is
//!
//! ```text
//! u_t = eps u_xx + lambda(x) u            on (0, 1)
//! theta1 u_x(0) = -theta2 u(0)            (Neumann or Dirichlet base)
//! u_x(1) = -q u(1) + U(t)                 (actuated Robin boundary)
//! ```
//!
//! A backstepping transform with a Volterra kernel maps the plant to a stable
//! target system and yields a boundary feedback law U = integral of k(y) u(y).
//! The control value is updated only at discrete event times chosen by one of
//! three trigger families, each in a regular (c = 0) and a performance-barrier
//! (c > 0) variant:
//!
//! * CETC: the triggering function is supervised at every simulation step;
//! * PETC: it is checked only every h seconds through a strengthened test;
//! * STC: the next update time is computed from the current state alone.
//!
//! The performance-barrier variants inject the slack between an exponential
//! envelope and the Lyapunov function into the trigger, trading tracking of
//! the envelope for longer inter-event times.
//!
//! Module map: [`numerics`] (grids, quadrature, tridiagonal solves),
//! [`kernels`] (Goursat kernel solver, transforms, feedback gain),
//! [`trigger_params`] (derived constants and feasibility checks), [`plant`]
//! (implicit-Euler PDE stepping), [`triggers`] (the six policies),
//! [`simulator`] (closed-loop runs and invariant checking), [`analysis`]
//! (dwell statistics and the c-sweep), [`config`] and [`cli`] (file format
//! and command-line entry points).

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod kernels;
pub mod numerics;
pub mod plant;
pub mod simulator;
pub mod trigger_params;
pub mod triggers;

pub use error::{Error, Result};
