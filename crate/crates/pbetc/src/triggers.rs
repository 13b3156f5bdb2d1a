//! The six trigger policies: continuous-supervision, periodically-checked,
//! and self-triggered event detection, each in regular (c = 0) and
//! performance-barrier (c > 0) form.
//!
//! All six share the dynamic variable m, the performance residual
//! W = e^{-b* t} V0 - V, and the Lyapunov function V = (B/2) ||w||^2 + m. The
//! policies differ only in when the trigger function is evaluated and how the
//! next event is determined.

use crate::error::{Error, Result};
use crate::kernels::GainProfile;
use crate::trigger_params::{gain_norm_sq, DerivedParams};

/// Relative tolerance when matching a time against a scheduled instant.
const SCHEDULE_RTOL: f64 = 1e-9;

/// The three event-detection mechanisms; c = 0 in the derived parameters
/// recovers the regular variant of each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriggerKind {
    /// Continuous supervision emulated at every plant step.
    Cetc,
    /// Trigger evaluated only at multiples of the sampling period h.
    Petc,
    /// Next event time computed at each event from current data.
    Stc,
}

impl TriggerKind {
    /// Lower-case policy name used in logs and CSV output.
    pub fn as_str(&self) -> &'static str {
        match self {
            TriggerKind::Cetc => "cetc",
            TriggerKind::Petc => "petc",
            TriggerKind::Stc => "stc",
        }
    }
}

impl std::str::FromStr for TriggerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cetc" => Ok(TriggerKind::Cetc),
            "petc" => Ok(TriggerKind::Petc),
            "stc" => Ok(TriggerKind::Stc),
            other => Err(Error::ValidationError(format!(
                "unknown trigger kind '{other}' (expected cetc, petc, or stc)"
            ))),
        }
    }
}

/// Mutable supervision state carried alongside the plant.
#[derive(Debug, Clone, PartialEq)]
pub struct TriggerState {
    /// Dynamic variable m > 0.
    pub m: f64,
    /// Initial Lyapunov value.
    pub v0: f64,
    /// Current Lyapunov value.
    pub v: f64,
    /// Current performance residual.
    pub w: f64,
    /// Current input-holding error.
    pub d: f64,
    /// Most recently evaluated trigger function value.
    pub gamma: f64,
    /// Next scheduled check (periodic) or event (self-triggered) time.
    pub t_next_check: f64,
}

/// V = (B/2) ||w||^2 + m.
pub fn lyapunov_v(w_norm_sq: f64, m: f64, big_b: f64) -> f64 {
    0.5 * big_b * w_norm_sq + m
}

/// W = e^{-b* t} V0 - V, clamped at zero when `robust` is set.
pub fn residual_w(t: f64, v: f64, v0: f64, b_star: f64, robust: bool) -> f64 {
    let w = (-b_star * t).exp() * v0 - v;
    if robust {
        w.max(0.0)
    } else {
        w
    }
}

/// The residual as it enters the trigger and m-dynamics.
fn effective_w(w: f64, params: &DerivedParams) -> f64 {
    if params.user.robust_residual {
        w.max(0.0)
    } else {
        w
    }
}

/// Explicit-Euler update of dm/dt = -eta m - rho d^2 + beta1 ||u||^2
/// + beta2 u(1)^2 + c W.
///
/// m is continuous across events, so no jump logic exists; positivity is a
/// guaranteed property of the closed loop and its loss signals a
/// discretization or parameter inconsistency.
pub fn step_m(
    m: f64,
    d: f64,
    u_norm_sq: f64,
    u1_sq: f64,
    w: f64,
    params: &DerivedParams,
    dt: f64,
) -> Result<f64> {
    let rhs = m_rhs(m, d, u_norm_sq, u1_sq, w, params);
    let next = m + dt * rhs;
    if next <= 0.0 {
        return Err(Error::NonPositiveM { m: next });
    }
    Ok(next)
}

/// Integrating-factor update of the m-dynamics with the forcing frozen over
/// the step: m+ = m e^{-eta dt} + F (1 - e^{-eta dt})/eta. Verification
/// alternate to [`step_m`]; agrees with it to O(dt^2).
pub fn step_m_exact(
    m: f64,
    d: f64,
    u_norm_sq: f64,
    u1_sq: f64,
    w: f64,
    params: &DerivedParams,
    dt: f64,
) -> Result<f64> {
    let eta = params.user.eta;
    let forcing = m_rhs(0.0, d, u_norm_sq, u1_sq, w, params);
    let decay = (-eta * dt).exp();
    let next = if eta > 0.0 {
        m * decay + forcing * (1.0 - decay) / eta
    } else {
        m + dt * forcing
    };
    if next <= 0.0 {
        return Err(Error::NonPositiveM { m: next });
    }
    Ok(next)
}

fn m_rhs(m: f64, d: f64, u_norm_sq: f64, u1_sq: f64, w: f64, params: &DerivedParams) -> f64 {
    -params.user.eta * m - params.rho * d * d
        + params.beta1 * u_norm_sq
        + params.beta2 * u1_sq
        + params.user.c * effective_w(w, params)
}

/// Continuous-supervision trigger: Gamma = d^2 - gamma m - (c/rho) W,
/// fire when Gamma > 0.
pub fn cetc_check(d: f64, m: f64, w: f64, params: &DerivedParams) -> (f64, bool) {
    let gamma = d * d
        - params.user.gamma * m
        - (params.user.c / params.rho) * effective_w(w, params);
    (gamma, gamma > 0.0)
}

/// Periodic trigger evaluated at t = n h only:
/// Gamma~ = (a + gamma rho) e^{a h} d^2 - gamma rho d^2 - gamma a m
/// - (a c / rho) e^{-c h} W.
pub fn petc_check(t: f64, d: f64, m: f64, w: f64, params: &DerivedParams) -> Result<(f64, bool)> {
    let h = params.user.h;
    let ratio = t / h;
    if (ratio - ratio.round()).abs() > 1e-6 {
        return Err(Error::OffGridCall { t, h });
    }
    let a = params.a;
    let gamma = params.user.gamma;
    let rho = params.rho;
    let c = params.user.c;
    let gamma_tilde = (a + gamma * rho) * (a * h).exp() * d * d
        - gamma * rho * d * d
        - gamma * a * m
        - (a * c / rho) * (-c * h).exp() * effective_w(w, params);
    Ok((gamma_tilde, gamma_tilde > 0.0))
}

/// Self-trigger state bound H = 2 ||k||^2 (2 + eps^2 ||k||^2 / lambda_max^2)
/// ||u||^2, with ||k||^2 the integral of k^2 over [0, 1].
pub fn stc_h(u_norm_sq: f64, gain: &GainProfile, params: &DerivedParams) -> Result<f64> {
    if params.lambda_max <= 0.0 {
        return Err(Error::LambdaZero);
    }
    let k_sq = gain_norm_sq(gain);
    let eps = params.epsilon;
    Ok(2.0 * k_sq * (2.0 + eps * eps * k_sq / (params.lambda_max * params.lambda_max)) * u_norm_sq)
}

/// Next self-triggered dwell G = max(tau, tau_check) with
/// tau_check = ln[(gamma m + gamma rho H / (2 lambda_max + eta) + (c/rho) W)
/// / (H + gamma rho H / (2 lambda_max + eta))] / (2 lambda_max + eta + c).
///
/// H is frozen at the event. Only when H falls below 1e-300 (the state has
/// numerically vanished and the logarithm diverges) is the dwell replaced by
/// T_cap = stc_cap_factor * tau, keeping the event sequence alive; otherwise
/// the dwell is exactly the formula value, however large. A non-positive
/// numerator (possible with c > 0 and a strongly negative unclamped residual)
/// collapses the dwell to tau.
pub fn stc_next_dwell(m: f64, w: f64, h_bound: f64, params: &DerivedParams) -> f64 {
    let tau = params.tau;
    let gamma = params.user.gamma;
    let rho = params.rho;
    let c = params.user.c;
    let eta = params.user.eta;
    let g2 = 2.0 * params.lambda_max + eta;
    if h_bound < 1e-300 {
        return params.user.stc_cap_factor * tau;
    }
    let num = gamma * m + gamma * rho * h_bound / g2 + (c / rho) * effective_w(w, params);
    let den = h_bound + gamma * rho * h_bound / g2;
    let tau_check = if num <= 0.0 {
        f64::NEG_INFINITY
    } else {
        (num / den).ln() / (g2 + c)
    };
    tau.max(tau_check)
}

/// Initial supervision state: m = m0, V = V0, zero residual and holding
/// error, first periodic check scheduled at h.
pub fn make_trigger(kind: TriggerKind, params: &DerivedParams, v0: f64) -> TriggerState {
    let m0 = params.user.m0;
    TriggerState {
        m: m0,
        v0,
        v: v0,
        w: 0.0,
        d: 0.0,
        gamma: -params.user.gamma * m0,
        t_next_check: match kind {
            TriggerKind::Petc => params.user.h,
            _ => 0.0,
        },
    }
}

/// Self-triggered scheduling data frozen at an event, kept for exact replay
/// by the invariant checker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StcEventInfo {
    /// Dynamic variable at the event.
    pub m: f64,
    /// Performance residual at the event.
    pub w: f64,
    /// State bound H frozen at the event.
    pub h_bound: f64,
    /// Dwell computed from (m, W, H), i.e. the next inter-event gap.
    pub scheduled_dwell: f64,
}

/// Policy executor bundling a kind with its derived parameters.
#[derive(Debug, Clone, Copy)]
pub struct TriggerPolicy<'p> {
    kind: TriggerKind,
    params: &'p DerivedParams,
}

impl<'p> TriggerPolicy<'p> {
    /// Bind a policy to its derived parameters.
    pub fn new(kind: TriggerKind, params: &'p DerivedParams) -> Self {
        TriggerPolicy { kind, params }
    }

    /// Policy kind.
    pub fn kind(&self) -> TriggerKind {
        self.kind
    }

    /// Consult the policy at time `t` with the state's current (d, m, W).
    ///
    /// Continuous supervision evaluates every call; the periodic policy
    /// evaluates only when `t` reaches the next scheduled check (advancing
    /// the schedule); the self-triggered policy fires exactly when `t`
    /// reaches the precomputed event time.
    pub fn should_fire(&self, state: &mut TriggerState, t: f64) -> Result<bool> {
        match self.kind {
            TriggerKind::Cetc => {
                let (gamma, fire) = cetc_check(state.d, state.m, state.w, self.params);
                state.gamma = gamma;
                Ok(fire)
            }
            TriggerKind::Petc => {
                let h = self.params.user.h;
                if t < state.t_next_check - SCHEDULE_RTOL * h {
                    return Ok(false);
                }
                let (gamma, fire) = petc_check(t, state.d, state.m, state.w, self.params)?;
                state.gamma = gamma;
                // Re-anchor to an exact multiple of h: a running `+= h` sum
                // accumulates rounding over thousands of checks and slips off
                // the sampling grid on long horizons.
                state.t_next_check = ((t / h).round() + 1.0) * h;
                Ok(fire)
            }
            TriggerKind::Stc => {
                // The continuous-supervision value is kept as a diagnostic.
                let (gamma, _) = cetc_check(state.d, state.m, state.w, self.params);
                state.gamma = gamma;
                Ok(t >= state.t_next_check - SCHEDULE_RTOL * self.params.tau)
            }
        }
    }

    /// Apply an event at time `t`: the holding error resets to zero, the
    /// trigger value is refreshed, and the self-triggered policy schedules
    /// its next event from (m, W, H) frozen now (returning that data for
    /// later replay).
    pub fn on_event(
        &self,
        state: &mut TriggerState,
        t: f64,
        u_norm_sq: f64,
        gain: &GainProfile,
    ) -> Result<Option<StcEventInfo>> {
        state.d = 0.0;
        match self.kind {
            TriggerKind::Cetc => {
                state.gamma = cetc_check(0.0, state.m, state.w, self.params).0;
                Ok(None)
            }
            TriggerKind::Petc => {
                state.gamma = petc_check(t, 0.0, state.m, state.w, self.params)?.0;
                Ok(None)
            }
            TriggerKind::Stc => {
                state.gamma = cetc_check(0.0, state.m, state.w, self.params).0;
                let h_bound = stc_h(u_norm_sq, gain, self.params)?;
                let scheduled_dwell = stc_next_dwell(state.m, state.w, h_bound, self.params);
                state.t_next_check = t + scheduled_dwell;
                Ok(Some(StcEventInfo {
                    m: state.m,
                    w: state.w,
                    h_bound,
                    scheduled_dwell,
                }))
            }
        }
    }
}
