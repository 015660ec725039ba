//! Noise reaching the quantum receiver and the resulting background yield.
//!
//! Sources are spontaneous Raman scattering of the classical launches along
//! every fiber segment (forward for co-propagating pumps, backward for
//! counter-propagating ones) and crosstalk of classical power leaking through
//! the finite isolation of the receiving node. Connectors attenuate but do not
//! scatter.

use crate::channel_plan::ChannelPlan;
use crate::error::{Error, Result};
use crate::optical_path::{transmittance, Direction, LightPath, OpticalElement};

pub const PLANCK_J_S: f64 = 6.626_070_15e-34;
pub const SPEED_OF_LIGHT_M_S: f64 = 2.997_924_58e8;

/// Converts an attenuation in dB/km to the natural-log coefficient in 1/km.
pub fn db_per_km_to_linear(alpha_db_per_km: f64) -> f64 {
    alpha_db_per_km * std::f64::consts::LN_10 / 10.0
}

/// Co-propagating Raman noise at the fiber output, in W.
pub fn raman_forward(p_launch_w: f64, rho: f64, bandwidth_nm: f64, length_km: f64, alpha_db_per_km: f64) -> f64 {
    let alpha = db_per_km_to_linear(alpha_db_per_km);
    p_launch_w * rho * bandwidth_nm * length_km * (-alpha * length_km).exp()
}

/// Counter-propagating Raman noise emerging at the pump's input end, in W.
pub fn raman_backward(p_launch_w: f64, rho: f64, bandwidth_nm: f64, length_km: f64, alpha_db_per_km: f64) -> f64 {
    let alpha = db_per_km_to_linear(alpha_db_per_km);
    let x = 2.0 * alpha * length_km;
    // (1 - e^-x) / (2 alpha) = L * (1 - e^-x) / x, with the ratio -> 1 as x -> 0.
    let shape = if x < 1e-8 { 1.0 - x / 2.0 } else { -(-x).exp_m1() / x };
    p_launch_w * rho * bandwidth_nm * length_km * shape
}

pub fn crosstalk_leak(p_launch_w: f64, isolation_db: f64) -> f64 {
    p_launch_w * 10f64.powf(-isolation_db / 10.0)
}

pub fn power_to_photon_rate(p_w: f64, wavelength_nm: f64) -> f64 {
    p_w * wavelength_nm * 1e-9 / (PLANCK_J_S * SPEED_OF_LIGHT_M_S)
}

/// Single-photon detector of the quantum receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    pub efficiency: f64,
    pub gate_width_s: f64,
    /// Dark count probability per gate.
    pub dark_count_prob: f64,
    pub deadtime_s: f64,
    pub misalignment_error: f64,
    pub pulse_rate_hz: f64,
}

impl Default for DetectorModel {
    /// Fitted to the published operating points; the vendor figures are not public.
    fn default() -> Self {
        Self {
            efficiency: 0.10,
            gate_width_s: 2.5e-9,
            dark_count_prob: 1e-6,
            deadtime_s: 10e-6,
            misalignment_error: 1e-4,
            pulse_rate_hz: 1.05e6,
        }
    }
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::Domain { what: "detector efficiency", value: self.efficiency });
        }
        if !(0.0..0.5).contains(&self.misalignment_error) {
            return Err(Error::Domain { what: "misalignment error", value: self.misalignment_error });
        }
        if !(self.gate_width_s >= 0.0) {
            return Err(Error::Domain { what: "gate width (s)", value: self.gate_width_s });
        }
        if !(self.deadtime_s >= 0.0) {
            return Err(Error::Domain { what: "deadtime (s)", value: self.deadtime_s });
        }
        if !(0.0..=1.0).contains(&self.dark_count_prob) {
            return Err(Error::Domain { what: "dark count probability", value: self.dark_count_prob });
        }
        if !(self.pulse_rate_hz > 0.0) {
            return Err(Error::Domain { what: "pulse rate (Hz)", value: self.pulse_rate_hz });
        }
        Ok(())
    }

    /// Detection probability per gate caused by a steady photon flux.
    pub fn photon_yield(&self, photons_per_s: f64) -> f64 {
        photons_per_s * self.gate_width_s * self.efficiency
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseBudget {
    pub forward_raman_w: f64,
    pub backward_raman_w: f64,
    pub crosstalk_w: f64,
    pub dark_yield: f64,
    pub total_y0: f64,
}

impl NoiseBudget {
    pub fn raman_w(&self) -> f64 {
        self.forward_raman_w + self.backward_raman_w
    }
}

/// Background yield per gate at the end of `path`.
///
/// Raman photons are collected over `filter_width_nm` around the quantum
/// channel; every fiber segment is treated separately and its noise is
/// attenuated by all elements between it and the receiver.
pub fn background_yield(path: &LightPath, plan: &ChannelPlan, det: &DetectorModel, filter_width_nm: f64) -> Result<NoiseBudget> {
    let quantum_nm = plan.quantum_channel()?.center_nm;
    let n = path.elements.len();
    let stage = path.receiver_stage_start();

    let mut forward_raman_w = 0.0;
    let mut backward_raman_w = 0.0;
    let mut crosstalk_w = 0.0;
    let mut photons_per_s = 0.0;

    for launch in &path.launches {
        let p = launch.position;
        let lc = launch.wavelength_nm;
        let pump_w = launch.power_w();

        for (i, fiber) in path.elements.iter().enumerate().filter_map(|(i, e)| e.as_fiber().map(|f| (i, f))) {
            let to_receiver = transmittance(path.segment_loss(i + 1..n, quantum_nm));
            let alpha = fiber.attenuation.at(quantum_nm);
            match launch.direction {
                Direction::Co if p <= i => {
                    let pump = pump_w * transmittance(path.segment_loss(p..i, lc));
                    forward_raman_w +=
                        raman_forward(pump, fiber.raman_coeff, filter_width_nm, fiber.length_km, alpha) * to_receiver;
                }
                Direction::Counter if p > i => {
                    let pump = pump_w * transmittance(path.segment_loss(i + 1..p, lc));
                    backward_raman_w +=
                        raman_backward(pump, fiber.raman_coeff, filter_width_nm, fiber.length_km, alpha) * to_receiver;
                }
                _ => {}
            }
        }

        let arriving_w = match launch.direction {
            Direction::Co if p <= stage => Some(pump_w * transmittance(path.segment_loss(p..stage, lc))),
            Direction::Counter if p >= stage => Some(pump_w),
            _ => None,
        };
        if let Some(arriving_w) = arriving_w {
            let isolation: f64 = path.elements[stage..].iter().map(|e: &OpticalElement| e.isolation_db(lc)).sum();
            let leak = crosstalk_leak(arriving_w, isolation);
            crosstalk_w += leak;
            photons_per_s += power_to_photon_rate(leak, lc);
        }
    }
    photons_per_s += power_to_photon_rate(forward_raman_w + backward_raman_w, quantum_nm);

    let dark_yield = det.dark_count_prob;
    Ok(NoiseBudget {
        forward_raman_w,
        backward_raman_w,
        crosstalk_w,
        dark_yield,
        total_y0: dark_yield + det.photon_yield(photons_per_s),
    })
}
