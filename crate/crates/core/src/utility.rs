//! Latency utilities.
//!
//! PU packets carry a firm deadline, so their utility is a step: 1 strictly
//! before `l_d`, 0 from `l_d` on. ED packets have a decreasing sigmoid
//!
//! ```text
//! U_ed(l) = 1 - c * (1 / (1 + e^{-a(l-b)}) - d),   c = (1+e^{ab})/e^{ab},  d = 1/(1+e^{ab})
//! ```
//!
//! normalized so that `U_ed(0) = 1` and `U_ed(∞) = 0`. Substituting `c` and
//! `d` collapses it to `(1 + e^{-ab}) / (1 + e^{a(l-b)})`, which is the form
//! evaluated here: it never forms `e^{ab}` and gives exactly 1 at `l = 0`.
//!
//! A policy is scored by `V = Ū_pu^β_pu · Ū_ed^β_ed`, the weighted product of
//! the per-class mean utilities.

use serde::{Deserialize, Serialize};

use crate::model::{PacketClass, UtilityParams};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum UtilityError {
    #[error("NEGATIVE_LATENCY: latency {0} ms is negative")]
    NegativeLatency(f64),
}

/// Class means, their counts and the resulting system utility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityOutcome {
    pub mean_pu: f64,
    pub mean_ed: f64,
    pub system_v: f64,
    pub n_pu: usize,
    pub n_ed: usize,
}

fn check_latency(latency: f64) -> Result<(), UtilityError> {
    if latency < 0.0 || latency.is_nan() {
        Err(UtilityError::NegativeLatency(latency))
    } else {
        Ok(())
    }
}

/// PU step utility.
pub fn u_pu(latency_ms: f64, params: &UtilityParams) -> Result<f64, UtilityError> {
    check_latency(latency_ms)?;
    Ok(if latency_ms < params.l_d { 1.0 } else { 0.0 })
}

/// ED sigmoid utility.
pub fn u_ed(latency_ms: f64, params: &UtilityParams) -> Result<f64, UtilityError> {
    check_latency(latency_ms)?;
    Ok(u_ed_unchecked(latency_ms, params))
}

#[inline]
fn u_ed_unchecked(l: f64, p: &UtilityParams) -> f64 {
    let num = 1.0 + (-p.a * p.b).exp();
    num / (1.0 + (p.a * (l - p.b)).exp())
}

/// Per-packet utility for either class.
pub fn packet_utility(class: PacketClass, latency_ms: f64, params: &UtilityParams) -> Result<f64, UtilityError> {
    match class {
        PacketClass::Pu => u_pu(latency_ms, params),
        PacketClass::Ed => u_ed(latency_ms, params),
    }
}

/// Arithmetic mean of the class utility over `latencies`.
///
/// Dropped PU packets belong in `latencies` (with their recorded latency
/// past the deadline) and contribute 0. An empty class averages to 1 so
/// that it is neutral in the product.
pub fn mean_class_utility(latencies_ms: &[f64], class: PacketClass, params: &UtilityParams) -> Result<f64, UtilityError> {
    if latencies_ms.is_empty() {
        return Ok(1.0);
    }
    let mut sum = 0.0;
    for &l in latencies_ms {
        sum += packet_utility(class, l, params)?;
    }
    Ok(sum / latencies_ms.len() as f64)
}

/// `mean_pu^β_pu · mean_ed^β_ed`, with `0^0 = 1`.
pub fn system_utility(mean_pu: f64, mean_ed: f64, params: &UtilityParams) -> f64 {
    mean_pu.powf(params.beta_pu) * mean_ed.powf(params.beta_ed)
}

/// Builds the full outcome from per-class latency sequences.
pub fn outcome(pu_latencies_ms: &[f64], ed_latencies_ms: &[f64], params: &UtilityParams) -> Result<UtilityOutcome, UtilityError> {
    let mean_pu = mean_class_utility(pu_latencies_ms, PacketClass::Pu, params)?;
    let mean_ed = mean_class_utility(ed_latencies_ms, PacketClass::Ed, params)?;
    Ok(UtilityOutcome {
        mean_pu,
        mean_ed,
        system_v: system_utility(mean_pu, mean_ed, params),
        n_pu: pu_latencies_ms.len(),
        n_ed: ed_latencies_ms.len(),
    })
}
