//! Round schedule and the relativistic timing constraints.
//!
//! Round `i` starts at `τ¹_i = T1 + (i-1)Δ_T` for `V1` and
//! `τ²_i = τ¹_i + T_shift` for `V2`. The round is timely iff
//! `θ¹ < τ² + D/c` and `θ² < τ¹ + D/c`.

use super::{ProtocolConfig, TransportError};

/// Vacuum speed of light, km/s.
pub const SPEED_OF_LIGHT_KM_PER_S: f64 = 299_792.458;

/// `D / c` in nanoseconds.
pub fn light_time_ns(d_km: f64) -> f64 {
    d_km / SPEED_OF_LIGHT_KM_PER_S * 1e9
}

/// `(τ¹_i, τ²_i)` for `1 ≤ i ≤ R`.
pub fn schedule_round(i: u32, config: &ProtocolConfig, t1_ns: i64) -> Result<(i64, i64), TransportError> {
    if i == 0 || i > config.rounds {
        return Err(TransportError::RoundOutOfRange {
            round: i,
            rounds: config.rounds,
        });
    }
    let tau1 = t1_ns + (i as i64 - 1) * config.delta_t_ns;
    Ok((tau1, tau1 + config.t_shift_ns))
}

/// `θ¹ < τ² + D/c` and `θ² < τ¹ + D/c`.
pub fn check_timing(theta1: i64, tau2: i64, theta2: i64, tau1: i64, d_km: f64) -> bool {
    let dc = light_time_ns(d_km);
    (theta1 as f64) < tau2 as f64 + dc && (theta2 as f64) < tau1 as f64 + dc
}
