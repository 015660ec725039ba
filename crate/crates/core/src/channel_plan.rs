//! Wavelength grids and quantum/classical channel assignment.
//!
//! Plans are plain values: a grid kind plus an ordered list of channels with
//! a passband and a role. CWDM channels use the nominal 13 nm passband of the
//! 20 nm grid. DWDM filtering is carried as a filter width on the quantum
//! receiver rather than as a separate plan.

use crate::error::{Error, Result};

pub const CWDM_FIRST_NM: f64 = 1270.0;
pub const CWDM_SPACING_NM: f64 = 20.0;
pub const CWDM_CHANNELS: usize = 18;
pub const CWDM_PASSBAND_NM: f64 = 13.0;

/// DWDM filter widths for the 100 GHz and 50 GHz grids, in nm.
pub const DWDM_100GHZ_WIDTH_NM: f64 = 0.8;
pub const DWDM_50GHZ_WIDTH_NM: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelRole {
    Quantum,
    ClassicalDownstream,
    ClassicalUpstream,
    Video,
    Unused,
}

impl ChannelRole {
    pub fn is_classical(self) -> bool {
        matches!(self, ChannelRole::ClassicalDownstream | ChannelRole::ClassicalUpstream)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavelengthChannel {
    pub center_nm: f64,
    pub width_nm: f64,
    pub role: ChannelRole,
}

impl WavelengthChannel {
    pub fn new(center_nm: f64, width_nm: f64, role: ChannelRole) -> Result<Self> {
        if !(1200.0..=1700.0).contains(&center_nm) {
            return Err(Error::Domain { what: "channel center (nm)", value: center_nm });
        }
        if !(width_nm > 0.0) {
            return Err(Error::Domain { what: "channel width (nm)", value: width_nm });
        }
        Ok(Self { center_nm, width_nm, role })
    }

    pub fn lower_nm(&self) -> f64 {
        self.center_nm - self.width_nm / 2.0
    }

    pub fn upper_nm(&self) -> f64 {
        self.center_nm + self.width_nm / 2.0
    }

    pub fn contains(&self, wavelength_nm: f64) -> bool {
        wavelength_nm >= self.lower_nm() && wavelength_nm <= self.upper_nm()
    }

    pub fn overlaps(&self, other: &WavelengthChannel) -> bool {
        self.lower_nm() <= other.upper_nm() && other.lower_nm() <= self.upper_nm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Cwdm,
    Dwdm100Ghz,
    Dwdm50Ghz,
    Gpon,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPlan {
    pub grid_kind: GridKind,
    pub channels: Vec<WavelengthChannel>,
}

/// A reason a plan cannot carry a quantum channel as assigned.
#[derive(Debug, Clone, PartialEq)]
pub enum AssignmentConflict {
    NoQuantumChannel,
    MultipleQuantumChannels(usize),
    SharedPassband { quantum_nm: f64, classical_nm: f64 },
}

/// The 18-channel CWDM grid, all channels unused.
pub fn cwdm_grid() -> ChannelPlan {
    let channels = (0..CWDM_CHANNELS)
        .map(|k| WavelengthChannel {
            center_nm: CWDM_FIRST_NM + CWDM_SPACING_NM * k as f64,
            width_nm: CWDM_PASSBAND_NM,
            role: ChannelRole::Unused,
        })
        .collect();
    ChannelPlan { grid_kind: GridKind::Cwdm, channels }
}

/// GPON wavelength plan with the video overlay band reused for the quantum channel.
pub fn gpon_plan() -> ChannelPlan {
    ChannelPlan {
        grid_kind: GridKind::Gpon,
        channels: vec![
            WavelengthChannel { center_nm: 1310.0, width_nm: 100.0, role: ChannelRole::ClassicalUpstream },
            WavelengthChannel { center_nm: 1490.0, width_nm: 20.0, role: ChannelRole::ClassicalDownstream },
            WavelengthChannel { center_nm: 1550.0, width_nm: 10.0, role: ChannelRole::Quantum },
        ],
    }
}

/// CWDM grid as used on the backbone ring: 1510 nm and 1470 nm carry data,
/// 1550 nm carries the quantum channel.
pub fn backbone_plan() -> ChannelPlan {
    let mut plan = cwdm_grid();
    for ch in &mut plan.channels {
        ch.role = match ch.center_nm as u32 {
            1510 => ChannelRole::ClassicalDownstream,
            1470 => ChannelRole::ClassicalUpstream,
            1550 => ChannelRole::Quantum,
            _ => ChannelRole::Unused,
        };
    }
    plan
}

impl ChannelPlan {
    pub fn new(grid_kind: GridKind, channels: Vec<WavelengthChannel>) -> Result<Self> {
        for ch in &channels {
            WavelengthChannel::new(ch.center_nm, ch.width_nm, ch.role)?;
        }
        Ok(Self { grid_kind, channels })
    }

    pub fn channel_for_wavelength(&self, wavelength_nm: f64) -> Result<WavelengthChannel> {
        self.channels
            .iter()
            .find(|ch| ch.contains(wavelength_nm))
            .copied()
            .ok_or(Error::NoChannel(wavelength_nm))
    }

    pub fn role_of(&self, wavelength_nm: f64) -> Option<ChannelRole> {
        self.channel_for_wavelength(wavelength_nm).ok().map(|c| c.role)
    }

    pub fn quantum_channels(&self) -> impl Iterator<Item = &WavelengthChannel> {
        self.channels.iter().filter(|c| c.role == ChannelRole::Quantum)
    }

    /// The single quantum channel of a valid plan.
    pub fn quantum_channel(&self) -> Result<WavelengthChannel> {
        let mut it = self.quantum_channels();
        match (it.next(), it.next()) {
            (Some(q), None) => Ok(*q),
            _ => Err(Error::NoQuantumChannel),
        }
    }

    /// Assigns `role` to the channel containing `wavelength_nm`.
    pub fn assign(&mut self, wavelength_nm: f64, role: ChannelRole) -> Result<()> {
        let ch = self
            .channels
            .iter_mut()
            .find(|ch| ch.contains(wavelength_nm))
            .ok_or(Error::NoChannel(wavelength_nm))?;
        ch.role = role;
        Ok(())
    }

    /// Returns every conflict with the one-quantum-channel rule. Empty means valid.
    pub fn validate_assignment(&self) -> Vec<AssignmentConflict> {
        let quantum: Vec<&WavelengthChannel> = self.quantum_channels().collect();
        let mut conflicts = Vec::new();
        match quantum.len() {
            0 => conflicts.push(AssignmentConflict::NoQuantumChannel),
            1 => {}
            n => conflicts.push(AssignmentConflict::MultipleQuantumChannels(n)),
        }
        for q in &quantum {
            for c in self.channels.iter().filter(|c| c.role.is_classical()) {
                if q.overlaps(c) {
                    conflicts.push(AssignmentConflict::SharedPassband {
                        quantum_nm: q.center_nm,
                        classical_nm: c.center_nm,
                    });
                }
            }
        }
        conflicts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cwdm_grid_layout() {
        let plan = cwdm_grid();
        assert_eq!(plan.channels.len(), 18);
        assert_eq!(plan.channels[0].center_nm, 1270.0);
        assert_eq!(plan.channels[17].center_nm, 1610.0);
        for w in plan.channels.windows(2) {
            assert_eq!(w[1].center_nm - w[0].center_nm, 20.0);
        }
        assert!(plan.channels.iter().all(|c| c.role == ChannelRole::Unused));
    }

    #[test]
    fn cwdm_passbands_disjoint() {
        let plan = cwdm_grid();
        for (i, a) in plan.channels.iter().enumerate() {
            for b in &plan.channels[i + 1..] {
                assert!(!a.overlaps(b));
            }
        }
    }

    #[test]
    fn gpon_roles() {
        let plan = gpon_plan();
        assert_eq!(plan.channels.len(), 3);
        assert_eq!(plan.role_of(1310.0), Some(ChannelRole::ClassicalUpstream));
        assert_eq!(plan.role_of(1490.0), Some(ChannelRole::ClassicalDownstream));
        assert_eq!(plan.role_of(1550.0), Some(ChannelRole::Quantum));
    }

    #[test]
    fn lookup() {
        let plan = cwdm_grid();
        assert_eq!(plan.channel_for_wavelength(1550.0).unwrap().center_nm, 1550.0);
        assert_eq!(plan.channel_for_wavelength(1556.0).unwrap().center_nm, 1550.0);
        assert_eq!(plan.channel_for_wavelength(1261.0), Err(Error::NoChannel(1261.0)));
        assert_eq!(plan.channel_for_wavelength(1560.0), Err(Error::NoChannel(1560.0)));
        let gpon = gpon_plan();
        assert_eq!(gpon.channel_for_wavelength(1490.0).unwrap().role, ChannelRole::ClassicalDownstream);
    }

    #[test]
    fn builtin_plans_valid() {
        assert!(backbone_plan().validate_assignment().is_empty());
        assert!(gpon_plan().validate_assignment().is_empty());
        assert_eq!(cwdm_grid().validate_assignment(), vec![AssignmentConflict::NoQuantumChannel]);
    }

    #[test]
    fn backbone_assignment() {
        let plan = backbone_plan();
        assert_eq!(plan.role_of(1510.0), Some(ChannelRole::ClassicalDownstream));
        assert_eq!(plan.role_of(1470.0), Some(ChannelRole::ClassicalUpstream));
        assert_eq!(plan.quantum_channel().unwrap().center_nm, 1550.0);
    }

    #[test]
    fn two_quantum_channels_conflict() {
        let mut plan = backbone_plan();
        plan.assign(1590.0, ChannelRole::Quantum).unwrap();
        assert_eq!(plan.validate_assignment(), vec![AssignmentConflict::MultipleQuantumChannels(2)]);
        assert_eq!(plan.quantum_channel(), Err(Error::NoQuantumChannel));
    }

    #[test]
    fn shared_passband_conflict() {
        let plan = ChannelPlan::new(
            GridKind::Cwdm,
            vec![
                WavelengthChannel::new(1550.0, 13.0, ChannelRole::Quantum).unwrap(),
                WavelengthChannel::new(1550.0, 13.0, ChannelRole::ClassicalDownstream).unwrap(),
            ],
        )
        .unwrap();
        let conflicts = plan.validate_assignment();
        assert_eq!(conflicts.len(), 1);
        assert!(matches!(conflicts[0], AssignmentConflict::SharedPassband { .. }));
    }

    #[test]
    fn channel_invariants() {
        assert!(WavelengthChannel::new(1100.0, 13.0, ChannelRole::Unused).is_err());
        assert!(WavelengthChannel::new(1550.0, 0.0, ChannelRole::Unused).is_err());
    }
}
