//! Optical elements, light paths and dB loss budgets.
//!
//! A [`LightPath`] is ordered from the quantum transmitter (index 0) to the
//! quantum receiver (last element). Classical transmitters are attached as
//! [`Launch`] points: a launch at position `p` enters the line just before
//! element `p`. Co-propagating light then crosses elements `p..`, while
//! counter-propagating light crosses elements `..p` in reverse.

use crate::error::{Error, Result};

/// Attenuation in dB/km against wavelength, linearly interpolated and held
/// flat outside the tabulated range.
#[derive(Debug, Clone, PartialEq)]
pub struct AttenuationTable {
    points: Vec<(f64, f64)>,
}

impl AttenuationTable {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("attenuation table is empty".into()));
        }
        if let Some(&(_, a)) = points.iter().find(|(_, a)| !(*a > 0.0)) {
            return Err(Error::Domain { what: "attenuation (dB/km)", value: a });
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { points })
    }

    /// Standard single-mode fiber: 0.35 dB/km at 1310 nm, 0.24 at 1490, 0.21 at 1550.
    pub fn standard_smf() -> Self {
        Self { points: vec![(1310.0, 0.35), (1490.0, 0.24), (1550.0, 0.21)] }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn at(&self, wavelength_nm: f64) -> f64 {
        let pts = &self.points;
        if wavelength_nm <= pts[0].0 {
            return pts[0].1;
        }
        let last = pts[pts.len() - 1];
        if wavelength_nm >= last.0 {
            return last.1;
        }
        let i = pts.partition_point(|p| p.0 <= wavelength_nm);
        let (x0, y0) = pts[i - 1];
        let (x1, y1) = pts[i];
        y0 + (y1 - y0) * (wavelength_nm - x0) / (x1 - x0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiberSpan {
    pub length_km: f64,
    pub attenuation: AttenuationTable,
    /// Spontaneous Raman coefficient: scattered W per W of pump, per km, per nm
    /// of receiver bandwidth.
    pub raman_coeff: f64,
    pub label: String,
}

impl FiberSpan {
    pub fn new(length_km: f64, attenuation: AttenuationTable, raman_coeff: f64, label: impl Into<String>) -> Result<Self> {
        if !(length_km >= 0.0) {
            return Err(Error::Domain { what: "fiber length (km)", value: length_km });
        }
        if !(raman_coeff >= 0.0) {
            return Err(Error::Domain { what: "Raman coefficient", value: raman_coeff });
        }
        Ok(Self { length_km, attenuation, raman_coeff, label: label.into() })
    }

    pub fn standard(length_km: f64, raman_coeff: f64) -> Self {
        Self { length_km, attenuation: AttenuationTable::standard_smf(), raman_coeff, label: "ssmf".into() }
    }

    pub fn loss_db(&self, wavelength_nm: f64) -> f64 {
        self.length_km * self.attenuation.at(wavelength_nm)
    }
}

/// How a light path traverses a ROADM node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoadmMode {
    AddDrop,
    Express,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OpticalElement {
    Fiber(FiberSpan),
    Connector { loss_db: f64 },
    Roadm { express_loss_db: f64, add_drop_loss_db: f64, isolation_db: f64, mode: RoadmMode },
    Splitter { ratio: u32, excess_loss_db: f64 },
    Filter { center_nm: f64, width_nm: f64, insertion_loss_db: f64, rejection_db: f64 },
    MuxDemux { insertion_loss_db: f64, adjacent_isolation_db: f64 },
}

impl OpticalElement {
    /// Checks the element's own invariants.
    pub fn validate(&self) -> Result<()> {
        let nonneg = |what: &'static str, v: f64| {
            if v >= 0.0 { Ok(()) } else { Err(Error::Domain { what, value: v }) }
        };
        match self {
            OpticalElement::Fiber(f) => {
                nonneg("fiber length (km)", f.length_km)?;
                nonneg("Raman coefficient", f.raman_coeff)
            }
            OpticalElement::Connector { loss_db } => nonneg("connector loss (dB)", *loss_db),
            OpticalElement::Roadm { express_loss_db, add_drop_loss_db, isolation_db, .. } => {
                nonneg("ROADM express loss (dB)", *express_loss_db)?;
                nonneg("ROADM add/drop loss (dB)", *add_drop_loss_db)?;
                nonneg("ROADM isolation (dB)", *isolation_db)
            }
            OpticalElement::Splitter { ratio, excess_loss_db } => {
                if *ratio < 2 {
                    return Err(Error::Domain { what: "splitter ratio", value: *ratio as f64 });
                }
                nonneg("splitter excess loss (dB)", *excess_loss_db)
            }
            OpticalElement::Filter { width_nm, insertion_loss_db, rejection_db, .. } => {
                if !(*width_nm > 0.0) {
                    return Err(Error::Domain { what: "filter width (nm)", value: *width_nm });
                }
                nonneg("filter insertion loss (dB)", *insertion_loss_db)?;
                nonneg("filter rejection (dB)", *rejection_db)
            }
            OpticalElement::MuxDemux { insertion_loss_db, adjacent_isolation_db } => {
                nonneg("mux insertion loss (dB)", *insertion_loss_db)?;
                nonneg("mux isolation (dB)", *adjacent_isolation_db)
            }
        }
    }

    pub fn as_fiber(&self) -> Option<&FiberSpan> {
        match self {
            OpticalElement::Fiber(f) => Some(f),
            _ => None,
        }
    }

    /// Isolation this element adds against a foreign wavelength leaking into
    /// the quantum drop port.
    pub fn isolation_db(&self, wavelength_nm: f64) -> f64 {
        match self {
            OpticalElement::Roadm { isolation_db, mode: RoadmMode::AddDrop, .. } => *isolation_db,
            OpticalElement::MuxDemux { adjacent_isolation_db, .. } => *adjacent_isolation_db,
            OpticalElement::Filter { center_nm, width_nm, rejection_db, .. } => {
                if (wavelength_nm - center_nm).abs() <= width_nm / 2.0 { 0.0 } else { *rejection_db }
            }
            _ => 0.0,
        }
    }
}

pub fn element_loss(e: &OpticalElement, wavelength_nm: f64) -> f64 {
    match e {
        OpticalElement::Fiber(f) => f.loss_db(wavelength_nm),
        OpticalElement::Connector { loss_db } => *loss_db,
        OpticalElement::Roadm { express_loss_db, add_drop_loss_db, mode, .. } => match mode {
            RoadmMode::Express => *express_loss_db,
            RoadmMode::AddDrop => *add_drop_loss_db,
        },
        OpticalElement::Splitter { ratio, excess_loss_db } => 10.0 * (*ratio as f64).log10() + excess_loss_db,
        OpticalElement::Filter { center_nm, width_nm, insertion_loss_db, rejection_db } => {
            if (wavelength_nm - center_nm).abs() <= width_nm / 2.0 {
                *insertion_loss_db
            } else {
                insertion_loss_db + rejection_db
            }
        }
        OpticalElement::MuxDemux { insertion_loss_db, .. } => *insertion_loss_db,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Co,
    Counter,
}

/// A classical transmitter attached to the path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Launch {
    pub position: usize,
    pub wavelength_nm: f64,
    pub power_dbm: f64,
    pub direction: Direction,
}

impl Launch {
    pub fn power_w(&self) -> f64 {
        dbm_to_w(self.power_dbm)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LightPath {
    pub elements: Vec<OpticalElement>,
    pub launches: Vec<Launch>,
}

impl LightPath {
    pub fn new(elements: Vec<OpticalElement>, launches: Vec<Launch>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidInput("light path needs at least one element".into()));
        }
        for e in &elements {
            e.validate()?;
        }
        if let Some(l) = launches.iter().find(|l| l.position > elements.len()) {
            return Err(Error::InvalidInput(format!(
                "launch position {} beyond path of {} elements",
                l.position,
                elements.len()
            )));
        }
        Ok(Self { elements, launches })
    }

    /// Loss over `elements[range]` at one wavelength.
    pub fn segment_loss(&self, range: std::ops::Range<usize>, wavelength_nm: f64) -> f64 {
        self.elements[range].iter().map(|e| element_loss(e, wavelength_nm)).sum()
    }

    /// Index of the first element of the receiver stage: the trailing run of
    /// non-fiber elements at the receiving node.
    pub fn receiver_stage_start(&self) -> usize {
        self.elements
            .iter()
            .rposition(|e| matches!(e, OpticalElement::Fiber(_)))
            .map_or(0, |i| i + 1)
    }
}

pub fn path_loss(path: &LightPath, wavelength_nm: f64) -> f64 {
    path.segment_loss(0..path.elements.len(), wavelength_nm)
}

pub fn transmittance(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

pub fn dbm_to_w(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn w_to_dbm(w: f64) -> f64 {
    10.0 * (w / 1e-3).log10()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Feasibility {
    Feasible { margin_db: f64 },
    Infeasible { margin_db: f64 },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible { .. })
    }

    /// Budget minus loss; negative when infeasible.
    pub fn margin_db(&self) -> f64 {
        match *self {
            Feasibility::Feasible { margin_db } | Feasibility::Infeasible { margin_db } => margin_db,
        }
    }
}

pub fn feasibility(path: &LightPath, budget_db: f64, wavelength_nm: f64) -> Result<Feasibility> {
    if !(budget_db > 0.0) {
        return Err(Error::Domain { what: "loss budget (dB)", value: budget_db });
    }
    let margin_db = budget_db - path_loss(path, wavelength_nm);
    Ok(if margin_db >= 0.0 {
        Feasibility::Feasible { margin_db }
    } else {
        Feasibility::Infeasible { margin_db }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn connector(loss_db: f64) -> OpticalElement {
        OpticalElement::Connector { loss_db }
    }

    #[test]
    fn splitter_loss() {
        let s = OpticalElement::Splitter { ratio: 4, excess_loss_db: 0.8 };
        assert_relative_eq!(element_loss(&s, 1550.0), 6.8206, epsilon = 1e-4);
        assert_relative_eq!(element_loss(&s, 1310.0), element_loss(&s, 1550.0));
    }

    #[test]
    fn fiber_loss() {
        let f = OpticalElement::Fiber(FiberSpan::standard(10.0, 0.0));
        assert_relative_eq!(element_loss(&f, 1550.0), 2.1, epsilon = 1e-12);
        // 1510 nm sits two thirds of the way from 1490 to 1550.
        assert_relative_eq!(element_loss(&f, 1510.0), 2.3, epsilon = 1e-12);
        assert_relative_eq!(element_loss(&f, 1700.0), 2.1, epsilon = 1e-12);
    }

    #[test]
    fn filter_loss() {
        let f = OpticalElement::Filter { center_nm: 1550.0, width_nm: 0.8, insertion_loss_db: 1.5, rejection_db: 80.0 };
        assert_eq!(element_loss(&f, 1550.0), 1.5);
        assert_eq!(element_loss(&f, 1550.3), 1.5);
        assert_eq!(element_loss(&f, 1552.0), 81.5);
        assert_eq!(f.isolation_db(1310.0), 80.0);
        assert_eq!(f.isolation_db(1550.0), 0.0);
    }

    #[test]
    fn single_connector_path() {
        let p = LightPath::new(vec![connector(0.5)], vec![]).unwrap();
        assert_eq!(path_loss(&p, 1550.0), 0.5);
    }

    #[test]
    fn transmittance_values() {
        assert_relative_eq!(transmittance(10.0), 0.1, epsilon = 1e-15);
        assert_eq!(transmittance(0.0), 1.0);
        assert_relative_eq!(transmittance(3.0), 0.501187, epsilon = 1e-6);
    }

    #[test]
    fn feasibility_margins() {
        let base = vec![connector(8.0)];
        let p = LightPath::new(base.clone(), vec![]).unwrap();
        let f = feasibility(&p, 15.0, 1550.0).unwrap();
        assert!(f.is_feasible());
        assert_relative_eq!(f.margin_db(), 7.0);

        let mut long = base;
        long.push(OpticalElement::Fiber(FiberSpan::standard(40.0, 0.0)));
        let p = LightPath::new(long, vec![]).unwrap();
        let f = feasibility(&p, 15.0, 1550.0).unwrap();
        assert!(!f.is_feasible());
        assert_relative_eq!(f.margin_db(), -1.4, epsilon = 1e-12);
        assert!(feasibility(&p, 30.0, 1550.0).unwrap().is_feasible());
        assert!(feasibility(&p, 0.0, 1550.0).is_err());
    }

    #[test]
    fn invariants_rejected() {
        assert!(LightPath::new(vec![], vec![]).is_err());
        assert!(LightPath::new(vec![OpticalElement::Splitter { ratio: 1, excess_loss_db: 0.0 }], vec![]).is_err());
        assert!(LightPath::new(vec![connector(-1.0)], vec![]).is_err());
        let launch = Launch { position: 3, wavelength_nm: 1490.0, power_dbm: 0.0, direction: Direction::Co };
        assert!(LightPath::new(vec![connector(1.0)], vec![launch]).is_err());
        assert!(AttenuationTable::new(vec![(1550.0, 0.0)]).is_err());
        assert!(FiberSpan::new(-1.0, AttenuationTable::standard_smf(), 0.0, "x").is_err());
    }

    #[test]
    fn receiver_stage() {
        let p = LightPath::new(
            vec![connector(1.0), OpticalElement::Fiber(FiberSpan::standard(1.0, 0.0)), connector(1.0), connector(1.0)],
            vec![],
        )
        .unwrap();
        assert_eq!(p.receiver_stage_start(), 2);
    }

    fn arb_element() -> impl Strategy<Value = OpticalElement> {
        prop_oneof![
            (0.0..50.0f64).prop_map(|l| OpticalElement::Fiber(FiberSpan::standard(l, 1e-9))),
            (0.0..3.0f64).prop_map(|loss_db| OpticalElement::Connector { loss_db }),
            (2u32..64, 0.0..2.0f64).prop_map(|(ratio, excess_loss_db)| OpticalElement::Splitter { ratio, excess_loss_db }),
            (0.1..2.0f64, 0.0..3.0f64, 0.0..90.0f64).prop_map(|(w, il, rej)| OpticalElement::Filter {
                center_nm: 1550.0,
                width_nm: w,
                insertion_loss_db: il,
                rejection_db: rej
            }),
            (0.0..3.0f64, 0.0..3.0f64, any::<bool>()).prop_map(|(e, a, x)| OpticalElement::Roadm {
                express_loss_db: e,
                add_drop_loss_db: a,
                isolation_db: 40.0,
                mode: if x { RoadmMode::Express } else { RoadmMode::AddDrop },
            }),
        ]
    }

    proptest! {
        #[test]
        fn db_additivity_matches_linear_product(elements in prop::collection::vec(arb_element(), 1..12), wl in 1300.0..1600.0f64) {
            let p = LightPath::new(elements, vec![]).unwrap();
            let product: f64 = p.elements.iter().map(|e| transmittance(element_loss(e, wl))).product();
            let total = transmittance(path_loss(&p, wl));
            prop_assert!(((total - product) / product).abs() <= 1e-12 || (total == 0.0 && product < 1e-300));
        }

        #[test]
        fn path_loss_permutation_invariant(elements in prop::collection::vec(arb_element(), 1..12), wl in 1300.0..1600.0f64) {
            let fwd = LightPath::new(elements.clone(), vec![]).unwrap();
            let mut rev = elements;
            rev.reverse();
            let rev = LightPath::new(rev, vec![]).unwrap();
            prop_assert!((path_loss(&fwd, wl) - path_loss(&rev, wl)).abs() < 1e-9);
        }

        #[test]
        fn path_loss_monotone_in_fiber_length(elements in prop::collection::vec(arb_element(), 1..12), extra in 0.0..20.0f64) {
            let before = LightPath::new(elements.clone(), vec![]).unwrap();
            let mut longer = elements;
            for e in &mut longer {
                if let OpticalElement::Fiber(f) = e { f.length_km += extra; }
                if let OpticalElement::Connector { loss_db } = e { *loss_db += extra / 10.0; }
            }
            let after = LightPath::new(longer, vec![]).unwrap();
            prop_assert!(path_loss(&after, 1550.0) >= path_loss(&before, 1550.0));
        }
    }
}
