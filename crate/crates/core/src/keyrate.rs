//! Decoy-state BB84 key-rate engine.
//!
//! Gains and error rates follow the standard weak-coherent-pulse channel
//! model. The single-photon yield and error are bounded with the
//! vacuum+weak decoy estimator, and the secret fraction uses the GLLP form
//! with a constant error-correction inefficiency. Finite-key effects are not
//! modeled.

use crate::error::{Error, Result};
use crate::optim::{golden_section_min, linspace};

pub const MU_SCAN_MIN: f64 = 0.05;
pub const MU_SCAN_MAX: f64 = 1.5;
const MU_GRID_POINTS: usize = 21;
const MU_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorMode {
    /// The background yield is known exactly (the simulator knows it).
    ExactY0,
    /// The background yield is bounded from the signal and decoy statistics alone.
    OneDecoyBound,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoyParams {
    pub mu: f64,
    pub nu: f64,
    pub estimator_mode: EstimatorMode,
}

impl DecoyParams {
    pub fn new(mu: f64, nu: f64, estimator_mode: EstimatorMode) -> Result<Self> {
        let p = Self { mu, nu, estimator_mode };
        p.validate()?;
        Ok(p)
    }

    /// Signal `mu` with the decoy at a quarter of it.
    pub fn with_mu(mu: f64) -> Self {
        Self { mu, nu: mu / 4.0, estimator_mode: EstimatorMode::ExactY0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu <= MU_SCAN_MAX) {
            return Err(Error::Domain { what: "signal mean photon number", value: self.mu });
        }
        if !(self.nu > 0.0 && self.nu < self.mu) {
            return Err(Error::Domain { what: "decoy mean photon number", value: self.nu });
        }
        Ok(())
    }
}

impl Default for DecoyParams {
    fn default() -> Self {
        Self::with_mu(0.79)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRateParams {
    pub sifting_factor: f64,
    pub ec_efficiency: f64,
    /// Error rate of background counts.
    pub background_error: f64,
}

impl Default for KeyRateParams {
    fn default() -> Self {
        Self { sifting_factor: 0.5, ec_efficiency: 1.05, background_error: 0.5 }
    }
}

impl KeyRateParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sifting_factor > 0.0 && self.sifting_factor <= 1.0) {
            return Err(Error::Domain { what: "sifting factor", value: self.sifting_factor });
        }
        if !(self.ec_efficiency >= 1.0) {
            return Err(Error::Domain { what: "error correction efficiency", value: self.ec_efficiency });
        }
        Ok(())
    }
}

/// Gain and QBER observed for one intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observed {
    pub gain: f64,
    pub qber: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YieldGain {
    pub q_mu: f64,
    pub e_mu: f64,
    pub y1_low: f64,
    pub e1_up: f64,
    pub q1_low: f64,
}

impl YieldGain {
    /// Signal statistics with no provable single-photon contribution.
    pub fn collapsed(q_mu: f64, e_mu: f64) -> Self {
        Self { q_mu, e_mu, y1_low: 0.0, e1_up: 0.5, q1_low: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistillationRates {
    pub raw_bps: f64,
    pub sifted_bps: f64,
    pub ec_corrected_bps: f64,
    pub secret_bps: f64,
}

/// Binary Shannon entropy in bits.
pub fn h2(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain { what: "binary entropy argument", value: x });
    }
    Ok(entropy(x))
}

fn entropy(x: f64) -> f64 {
    let term = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.log2() };
    term(x) + term(1.0 - x)
}

pub fn gain(y0: f64, eta: f64, mu: f64) -> f64 {
    y0 - (-eta * mu).exp_m1()
}

pub fn qber(y0: f64, eta: f64, mu: f64, e_det: f64, e0: f64) -> Result<f64> {
    let q = gain(y0, eta, mu);
    if q <= 0.0 {
        return Err(Error::DegenerateChannel);
    }
    Ok((e0 * y0 - e_det * (-eta * mu).exp_m1()) / q)
}

/// Observed gain and QBER for a given intensity on a channel of total
/// transmittance `eta` (detector included).
pub fn observe(y0: f64, eta: f64, intensity: f64, e_det: f64, e0: f64) -> Result<Observed> {
    Ok(Observed { gain: gain(y0, eta, intensity), qber: qber(y0, eta, intensity, e_det, e0)? })
}

/// Lower-bounds the single-photon yield and upper-bounds its error rate from
/// signal and decoy statistics.
///
/// In [`EstimatorMode::ExactY0`] `true_y0` is used directly. In
/// [`EstimatorMode::OneDecoyBound`] it is ignored and replaced by the upper
/// bound `E·Q·e^I / e0` for the yield estimate and by the lower bound
/// `(μ·Qν·e^ν − ν·Qμ·e^μ)/(μ − ν)` for the error estimate, which keeps both
/// bounds on the safe side.
pub fn decoy_estimate(signal: Observed, decoy: Observed, params: &DecoyParams, true_y0: f64, e0: f64) -> Result<YieldGain> {
    params.validate()?;
    let DecoyParams { mu, nu, estimator_mode } = *params;
    let (q_mu, e_mu) = (signal.gain, signal.qber);
    let (q_nu, e_nu) = (decoy.gain, decoy.qber);

    let (y0_for_yield, y0_for_error) = match estimator_mode {
        EstimatorMode::ExactY0 => (true_y0, true_y0),
        EstimatorMode::OneDecoyBound => {
            let upper = (e_nu * q_nu * nu.exp()).min(e_mu * q_mu * mu.exp()) / e0;
            let lower = ((mu * q_nu * nu.exp() - nu * q_mu * mu.exp()) / (mu - nu)).max(0.0);
            (upper, lower)
        }
    };

    let y1 = mu / (mu * nu - nu * nu)
        * (q_nu * nu.exp() - q_mu * mu.exp() * nu * nu / (mu * mu) - (mu * mu - nu * nu) / (mu * mu) * y0_for_yield);
    let y1_low = y1.clamp(0.0, 1.0);
    if !(y1_low > 0.0) {
        return Err(Error::BoundCollapse);
    }
    let e1_up = ((e_nu * q_nu * nu.exp() - e0 * y0_for_error) / (y1_low * nu)).clamp(0.0, 0.5);
    let q1_low = (y1_low * mu * (-mu).exp()).min(q_mu);
    Ok(YieldGain { q_mu, e_mu, y1_low, e1_up, q1_low })
}

/// Simulates signal and decoy statistics on a channel and bounds them.
pub fn estimate_channel(y0: f64, eta: f64, e_det: f64, decoy: &DecoyParams, p: &KeyRateParams) -> Result<YieldGain> {
    let e0 = p.background_error;
    let signal = observe(y0, eta, decoy.mu, e_det, e0)?;
    let weak = observe(y0, eta, decoy.nu, e_det, e0)?;
    decoy_estimate(signal, weak, decoy, y0, e0)
}

/// Secret bits per signal pulse, clamped at zero.
pub fn secret_fraction(p: &KeyRateParams, yg: &YieldGain) -> f64 {
    let leak = yg.q_mu * p.ec_efficiency * entropy(yg.e_mu.clamp(0.0, 1.0));
    let single = yg.q1_low * (1.0 - entropy(yg.e1_up.clamp(0.0, 0.5)));
    (p.sifting_factor * (single - leak)).max(0.0)
}

/// QBER above which no key survives when signal and single-photon errors
/// coincide: the root of `(1 + f)·h2(x) = 1` on `(0, 0.5)`.
pub fn qber_threshold(ec_efficiency: f64) -> f64 {
    let target = 1.0 / (1.0 + ec_efficiency);
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if entropy(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Non-paralyzable deadtime saturation.
pub fn apply_deadtime(rate_per_s: f64, deadtime_s: f64) -> f64 {
    if rate_per_s.is_infinite() {
        return if deadtime_s > 0.0 { 1.0 / deadtime_s } else { rate_per_s };
    }
    rate_per_s / (1.0 + rate_per_s * deadtime_s)
}

/// Throughput at each post-processing stage. Deadtime saturation is applied
/// to the detection rate and carried through to the secret rate.
pub fn distillation_rates(pulse_rate_hz: f64, deadtime_s: f64, p: &KeyRateParams, yg: &YieldGain) -> DistillationRates {
    let detections = pulse_rate_hz * yg.q_mu;
    let raw_bps = apply_deadtime(detections, deadtime_s);
    let saturation = if detections > 0.0 { raw_bps / detections } else { 1.0 };
    let sifted_bps = p.sifting_factor * raw_bps;
    let ec_corrected_bps = (sifted_bps * (1.0 - p.ec_efficiency * entropy(yg.e_mu.clamp(0.0, 1.0)))).max(0.0);
    let secret_bps = (pulse_rate_hz * secret_fraction(p, yg) * saturation).min(ec_corrected_bps);
    DistillationRates { raw_bps, sifted_bps, ec_corrected_bps, secret_bps }
}

/// Finds the signal intensity maximizing `secret_rate` over
/// `[MU_SCAN_MIN, MU_SCAN_MAX]`: a 21-point scan brackets the peak, then
/// golden-section search refines it to 1e-4.
pub fn optimize_mu<F>(secret_rate: F) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let grid = linspace(MU_SCAN_MIN, MU_SCAN_MAX, MU_GRID_POINTS);
    let rates: Vec<f64> = grid.iter().map(|&mu| secret_rate(mu)).collect();
    let (best, &best_rate) = rates
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("non-empty grid");
    if !(best_rate > 0.0) {
        return Err(Error::NoPositiveRate);
    }
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (mu, rate) = golden_section_min(|mu| -secret_rate(mu), lo, hi, MU_TOLERANCE);
    Ok(if -rate >= best_rate { mu } else { grid[best] })
}
