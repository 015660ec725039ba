//! Testbed topologies, transparent paths and end-to-end link evaluation.
//!
//! Two built-in scenarios mirror the metro testbeds: a three-node CWDM ROADM
//! ring with the middle node in pass-through, and a GPON tree with the
//! quantum channel on the video overlay wavelength. Both expose one variable
//! fiber edge that distance sweeps stretch.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;
use std::str::FromStr;

use crate::channel_plan::{backbone_plan, gpon_plan, ChannelPlan, DWDM_100GHZ_WIDTH_NM};
use crate::error::{Error, Result};
use crate::keyrate::{self, DecoyParams, DistillationRates, KeyRateParams, YieldGain};
use crate::noise::{background_yield, DetectorModel, NoiseBudget};
use crate::optical_path::{
    element_loss, path_loss, transmittance, AttenuationTable, Direction, FiberSpan, Launch, LightPath, OpticalElement,
    RoadmMode,
};

pub const BACKBONE_NO_FIBER_LOSS_DB: f64 = 8.0;
pub const GPON_NO_FIBER_LOSS_DB: f64 = 9.0;
pub const MAX_SPLIT_RATIO: u32 = 4;

pub const DEFAULT_ROADM_EXPRESS_DB: f64 = 2.5;
pub const DEFAULT_ROADM_ADD_DROP_DB: f64 = 2.0;
pub const DEFAULT_ROADM_ISOLATION_DB: f64 = 40.0;
pub const DEFAULT_FILTER_INSERTION_DB: f64 = 1.5;
pub const DEFAULT_FILTER_REJECTION_DB: f64 = 80.0;
pub const DEFAULT_CONNECTOR_DB: f64 = 0.5;
pub const DEFAULT_MUX_INSERTION_DB: f64 = 1.0;
pub const DEFAULT_MUX_ISOLATION_DB: f64 = 30.0;
pub const DEFAULT_CONNECTOR_EVERY_KM: f64 = 2.5;
pub const DEFAULT_FIXED_KM: f64 = 0.1;

/// Splitter excess loss that closes the GPON budget at 9 dB with a 1:4 split.
pub fn default_splitter_excess_db() -> f64 {
    GPON_NO_FIBER_LOSS_DB - DEFAULT_MUX_INSERTION_DB - DEFAULT_FILTER_INSERTION_DB - 10.0 * 4f64.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Roadm,
    Olt,
    Splitter,
    Ont,
    QkdEndpoint,
}

/// Optical hardware a light path crosses inside a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeHardware {
    Roadm { express_loss_db: f64, add_drop_loss_db: f64, isolation_db: f64 },
    Mux { insertion_loss_db: f64, adjacent_isolation_db: f64 },
    Splitter { ratio: u32, excess_loss_db: f64 },
    Passive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Traversal {
    Add,
    Express,
    Drop,
}

impl NodeHardware {
    fn elements(&self, how: Traversal) -> Vec<OpticalElement> {
        match *self {
            NodeHardware::Roadm { express_loss_db, add_drop_loss_db, isolation_db } => vec![OpticalElement::Roadm {
                express_loss_db,
                add_drop_loss_db,
                isolation_db,
                mode: if how == Traversal::Express { RoadmMode::Express } else { RoadmMode::AddDrop },
            }],
            NodeHardware::Mux { insertion_loss_db, adjacent_isolation_db } => {
                vec![OpticalElement::MuxDemux { insertion_loss_db, adjacent_isolation_db }]
            }
            NodeHardware::Splitter { ratio, excess_loss_db } => vec![OpticalElement::Splitter { ratio, excess_loss_db }],
            NodeHardware::Passive => vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    pub hardware: NodeHardware,
    pub qkd_endpoint: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    /// Consecutive fiber spans making up the edge.
    pub spans: Vec<FiberSpan>,
    pub connectors: u32,
    pub connector_loss_db: f64,
    /// A directed edge carries the quantum channel from `a` to `b` only.
    pub directed: bool,
}

impl Edge {
    pub fn length_km(&self) -> f64 {
        self.spans.iter().map(|s| s.length_km).sum()
    }

    fn elements(&self) -> impl Iterator<Item = OpticalElement> + '_ {
        self.spans
            .iter()
            .cloned()
            .map(OpticalElement::Fiber)
            .chain((0..self.connectors).map(|_| OpticalElement::Connector { loss_db: self.connector_loss_db }))
    }

    fn loss_db(&self, wavelength_nm: f64) -> f64 {
        self.elements().map(|e| element_loss(&e, wavelength_nm)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Topology {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

/// A transparent path plus where each traversed node's elements sit in it.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub path: LightPath,
    pub nodes: Vec<usize>,
    /// Element index range occupied by each entry of `nodes`.
    pub node_ranges: Vec<std::ops::Range<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cost {
    hops: usize,
    loss_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct QueueEntry {
    cost: Cost,
    node: usize,
}

impl Eq for QueueEntry {}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed for a min-heap on (hops, loss).
        other
            .cost
            .hops
            .cmp(&self.cost.hops)
            .then_with(|| other.cost.loss_db.total_cmp(&self.cost.loss_db))
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Topology {
    pub fn node_index(&self, id: &str) -> Result<usize> {
        self.nodes
            .iter()
            .position(|n| n.id == id)
            .ok_or_else(|| Error::InvalidInput(format!("unknown node `{id}`")))
    }

    fn neighbors(&self, node: usize) -> impl Iterator<Item = (usize, &Edge)> + '_ {
        self.edges.iter().filter_map(move |e| {
            if e.a == node {
                Some((e.b, e))
            } else if e.b == node && !e.directed {
                Some((e.a, e))
            } else {
                None
            }
        })
    }

    /// Shortest all-optical route from `a` to `b`: fewest hops, ties broken
    /// by the loss at `wavelength_nm`. The source node adds, intermediate
    /// nodes express and the destination drops the channel.
    pub fn transparent_path(&self, a: &str, b: &str, wavelength_nm: f64) -> Result<Route> {
        let src = self.node_index(a)?;
        let dst = self.node_index(b)?;
        if src == dst {
            return Err(Error::InvalidInput(format!("transparent path endpoints coincide: `{a}`")));
        }
        for &n in &[src, dst] {
            if !self.nodes[n].qkd_endpoint {
                return Err(Error::InvalidInput(format!("node `{}` is not a QKD endpoint", self.nodes[n].id)));
            }
        }

        let express_loss = |n: usize| -> f64 {
            self.nodes[n].hardware.elements(Traversal::Express).iter().map(|e| element_loss(e, wavelength_nm)).sum()
        };
        let mut best: Vec<Option<Cost>> = vec![None; self.nodes.len()];
        let mut via: Vec<Option<(usize, usize)>> = vec![None; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        best[src] = Some(Cost { hops: 0, loss_db: 0.0 });
        heap.push(QueueEntry { cost: Cost { hops: 0, loss_db: 0.0 }, node: src });

        while let Some(QueueEntry { cost, node }) = heap.pop() {
            if node == dst {
                break;
            }
            if best[node].is_some_and(|b| (b.hops, b.loss_db) < (cost.hops, cost.loss_db)) {
                continue;
            }
            for (next, edge) in self.neighbors(node) {
                let edge_idx = self.edges.iter().position(|e| std::ptr::eq(e, edge)).expect("edge belongs to topology");
                let candidate = Cost { hops: cost.hops + 1, loss_db: cost.loss_db + edge.loss_db(wavelength_nm) + express_loss(next) };
                let better = match best[next] {
                    None => true,
                    Some(b) => (candidate.hops, candidate.loss_db) < (b.hops, b.loss_db),
                };
                if better {
                    best[next] = Some(candidate);
                    via[next] = Some((node, edge_idx));
                    heap.push(QueueEntry { cost: candidate, node: next });
                }
            }
        }
        if best[dst].is_none() {
            return Err(Error::NoPath(a.to_string(), b.to_string()));
        }

        let mut hops = Vec::new();
        let mut cur = dst;
        while let Some((prev, edge)) = via[cur] {
            hops.push((prev, edge, cur));
            cur = prev;
        }
        hops.reverse();

        let mut elements = Vec::new();
        let mut nodes = vec![src];
        let mut node_ranges = Vec::new();
        let start = elements.len();
        elements.extend(self.nodes[src].hardware.elements(Traversal::Add));
        node_ranges.push(start..elements.len());
        for (_, edge, to) in hops {
            elements.extend(self.edges[edge].elements());
            let how = if to == dst { Traversal::Drop } else { Traversal::Express };
            let start = elements.len();
            elements.extend(self.nodes[to].hardware.elements(how));
            nodes.push(to);
            node_ranges.push(start..elements.len());
        }
        for e in &elements {
            e.validate()?;
        }
        Ok(Route { path: LightPath { elements, launches: vec![] }, nodes, node_ranges })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioKind {
    Backbone,
    Gpon,
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioKind::Backbone => "backbone",
            ScenarioKind::Gpon => "gpon",
        })
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "backbone" => Ok(ScenarioKind::Backbone),
            "gpon" => Ok(ScenarioKind::Gpon),
            other => Err(format!("unknown scenario kind `{other}` (expected backbone or gpon)")),
        }
    }
}

/// Where the swept length goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// All of it on the variable edge, the worst case for Raman noise.
    WorstCase,
    /// Half on the variable edge, half spread over the other edges of the route.
    EvenSplit,
}

/// A classical transmitter. Co-propagating launches sit at the quantum
/// transmitter's node, counter-propagating ones at the receiver's node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalLaunch {
    pub wavelength_nm: f64,
    pub power_dbm: f64,
    pub direction: Direction,
    pub attenuation_db: f64,
    pub attenuable: bool,
}

impl ClassicalLaunch {
    pub fn effective_dbm(&self) -> f64 {
        self.power_dbm - self.attenuation_db
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub width_nm: f64,
    pub insertion_loss_db: f64,
    pub rejection_db: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            width_nm: DWDM_100GHZ_WIDTH_NM,
            insertion_loss_db: DEFAULT_FILTER_INSERTION_DB,
            rejection_db: DEFAULT_FILTER_REJECTION_DB,
        }
    }
}

/// Fiber used on the variable edge, optionally switching to a second fiber
/// type past `split_km`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberSpec {
    pub attenuation: AttenuationTable,
    pub label: String,
    pub second: Option<(f64, String)>,
}

impl Default for FiberSpec {
    fn default() -> Self {
        Self { attenuation: AttenuationTable::standard_smf(), label: "ssmf".into(), second: None }
    }
}

/// Every tunable of a built-in scenario, pre-filled with its defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSettings {
    pub kind: ScenarioKind,
    pub detector: DetectorModel,
    pub decoy: DecoyParams,
    pub keyrate: KeyRateParams,
    pub filter: FilterSpec,
    pub fiber: FiberSpec,
    /// Raman coefficient per fiber label.
    pub raman: BTreeMap<String, f64>,
    pub launches: Vec<ClassicalLaunch>,
    pub duty_cycle: f64,
    pub placement: Placement,
    pub fixed_km: f64,
    pub connector_every_km: Option<f64>,
    pub connector_loss_db: f64,
    pub roadm_express_loss_db: f64,
    pub roadm_add_drop_loss_db: f64,
    pub roadm_isolation_db: f64,
    pub mux_insertion_loss_db: f64,
    pub mux_isolation_db: f64,
    pub splitter_ratio: u32,
    pub splitter_excess_db: f64,
    pub allow_large_split: bool,
}

impl ScenarioSettings {
    pub fn defaults(kind: ScenarioKind) -> Self {
        let (launches, connector_every_km, rho) = match kind {
            ScenarioKind::Backbone => (
                vec![
                    ClassicalLaunch { wavelength_nm: 1510.0, power_dbm: -4.0, direction: Direction::Co, attenuation_db: 0.0, attenuable: true },
                    ClassicalLaunch { wavelength_nm: 1470.0, power_dbm: -4.0, direction: Direction::Counter, attenuation_db: 0.0, attenuable: true },
                ],
                Some(DEFAULT_CONNECTOR_EVERY_KM),
                1e-9,
            ),
            ScenarioKind::Gpon => (
                vec![
                    ClassicalLaunch { wavelength_nm: 1490.0, power_dbm: -11.0, direction: Direction::Co, attenuation_db: 0.0, attenuable: true },
                    ClassicalLaunch { wavelength_nm: 1310.0, power_dbm: -15.0, direction: Direction::Counter, attenuation_db: 0.0, attenuable: false },
                ],
                None,
                1e-9,
            ),
        };
        Self {
            kind,
            detector: DetectorModel::default(),
            decoy: DecoyParams::default(),
            keyrate: KeyRateParams::default(),
            filter: FilterSpec::default(),
            fiber: FiberSpec::default(),
            raman: BTreeMap::from([("ssmf".to_string(), rho)]),
            launches,
            duty_cycle: 1.0,
            placement: Placement::WorstCase,
            fixed_km: DEFAULT_FIXED_KM,
            connector_every_km,
            connector_loss_db: DEFAULT_CONNECTOR_DB,
            roadm_express_loss_db: DEFAULT_ROADM_EXPRESS_DB,
            roadm_add_drop_loss_db: DEFAULT_ROADM_ADD_DROP_DB,
            roadm_isolation_db: DEFAULT_ROADM_ISOLATION_DB,
            mux_insertion_loss_db: DEFAULT_MUX_INSERTION_DB,
            mux_isolation_db: DEFAULT_MUX_ISOLATION_DB,
            splitter_ratio: MAX_SPLIT_RATIO,
            splitter_excess_db: default_splitter_excess_db(),
            allow_large_split: false,
        }
    }

    pub fn raman_coeff(&self, label: &str) -> Result<f64> {
        self.raman
            .get(label)
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("no Raman coefficient for fiber `{label}`")))
    }

    pub fn build(&self) -> Result<Scenario> {
        match self.kind {
            ScenarioKind::Backbone => build_backbone_scenario(self),
            ScenarioKind::Gpon => build_gpon_scenario(self),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub settings: ScenarioSettings,
    pub topology: Topology,
    pub plan: ChannelPlan,
    pub tx: String,
    pub rx: String,
    pub variable_edge: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QkdPerformance {
    pub length_km: f64,
    pub loss_db: f64,
    pub eta: f64,
    pub noise: NoiseBudget,
    pub yield_gain: YieldGain,
    pub rates: DistillationRates,
    /// The decoy bound collapsed and the secret rate was recorded as zero.
    pub collapsed: bool,
}

/// Link state that does not depend on the source intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkState {
    pub length_km: f64,
    pub path: LightPath,
    pub loss_db: f64,
    pub eta: f64,
    pub noise: NoiseBudget,
}

fn standard_span(settings: &ScenarioSettings, length_km: f64, label: &str) -> Result<FiberSpan> {
    FiberSpan::new(length_km, settings.fiber.attenuation.clone(), settings.raman_coeff(label)?, label)
}

fn validate_common(s: &ScenarioSettings) -> Result<()> {
    s.detector.validate()?;
    s.decoy.validate()?;
    s.keyrate.validate()?;
    if !(0.0..=1.0).contains(&s.duty_cycle) {
        return Err(Error::Domain { what: "duty cycle", value: s.duty_cycle });
    }
    if !(s.filter.width_nm > 0.0) {
        return Err(Error::Domain { what: "filter width (nm)", value: s.filter.width_nm });
    }
    if !(s.fixed_km >= 0.0) {
        return Err(Error::Domain { what: "fixed fiber length (km)", value: s.fixed_km });
    }
    if let Some(every) = s.connector_every_km {
        if !(every > 0.0) {
            return Err(Error::Domain { what: "connector spacing (km)", value: every });
        }
    }
    for (label, &rho) in &s.raman {
        if !(rho >= 0.0) {
            return Err(Error::InvalidInput(format!("negative Raman coefficient for `{label}`")));
        }
    }
    s.raman_coeff(&s.fiber.label)?;
    if let Some((split, label)) = &s.fiber.second {
        if !(*split >= 0.0) {
            return Err(Error::Domain { what: "fiber split point (km)", value: *split });
        }
        s.raman_coeff(label)?;
    }
    Ok(())
}

fn finish(settings: &ScenarioSettings, topology: Topology, plan: ChannelPlan, tx: &str, rx: &str) -> Result<Scenario> {
    let conflicts = plan.validate_assignment();
    if !conflicts.is_empty() {
        return Err(Error::InvalidInput(format!("channel plan conflicts: {conflicts:?}")));
    }
    let scenario = Scenario { settings: settings.clone(), topology, plan, tx: tx.into(), rx: rx.into(), variable_edge: 0 };
    // The endpoints must be optically connected.
    scenario.route(0.0)?;
    Ok(scenario)
}

/// Three-node CWDM ROADM ring. The quantum channel goes from node 1 to
/// node 3 through node 2 in pass-through; the ring is directed in the sense
/// of the quantum channel.
pub fn build_backbone_scenario(settings: &ScenarioSettings) -> Result<Scenario> {
    validate_common(settings)?;
    let roadm = NodeHardware::Roadm {
        express_loss_db: settings.roadm_express_loss_db,
        add_drop_loss_db: settings.roadm_add_drop_loss_db,
        isolation_db: settings.roadm_isolation_db,
    };
    let nodes = (1..=3)
        .map(|i| Node { id: format!("roadm{i}"), kind: NodeKind::Roadm, hardware: roadm, qkd_endpoint: i != 2 })
        .collect();
    let edge = |a, b, km| -> Result<Edge> {
        Ok(Edge {
            a,
            b,
            spans: vec![standard_span(settings, km, &settings.fiber.label)?],
            connectors: 0,
            connector_loss_db: settings.connector_loss_db,
            directed: true,
        })
    };
    let topology = Topology { nodes, edges: vec![edge(0, 1, 0.0)?, edge(1, 2, settings.fixed_km)?, edge(2, 0, settings.fixed_km)?] };
    finish(settings, topology, backbone_plan(), "roadm1", "roadm3")
}

/// OLT, one feeder fiber, a 1:N splitter, a short drop fiber and the ONT.
pub fn build_gpon_scenario(settings: &ScenarioSettings) -> Result<Scenario> {
    if settings.splitter_ratio > MAX_SPLIT_RATIO && !settings.allow_large_split {
        return Err(Error::SplitTooLarge(settings.splitter_ratio));
    }
    validate_common(settings)?;
    let nodes = vec![
        Node {
            id: "olt".into(),
            kind: NodeKind::Olt,
            hardware: NodeHardware::Mux {
                insertion_loss_db: settings.mux_insertion_loss_db,
                adjacent_isolation_db: settings.mux_isolation_db,
            },
            qkd_endpoint: true,
        },
        Node {
            id: "splitter".into(),
            kind: NodeKind::Splitter,
            hardware: NodeHardware::Splitter { ratio: settings.splitter_ratio, excess_loss_db: settings.splitter_excess_db },
            qkd_endpoint: false,
        },
        Node { id: "ont".into(), kind: NodeKind::Ont, hardware: NodeHardware::Passive, qkd_endpoint: true },
    ];
    let edge = |a, b, km| -> Result<Edge> {
        Ok(Edge {
            a,
            b,
            spans: vec![standard_span(settings, km, &settings.fiber.label)?],
            connectors: 0,
            connector_loss_db: settings.connector_loss_db,
            directed: false,
        })
    };
    let topology = Topology { nodes, edges: vec![edge(0, 1, 0.0)?, edge(1, 2, settings.fixed_km)?] };
    finish(settings, topology, gpon_plan(), "olt", "ont")
}

pub fn relay_rate(hop_rates: &[f64]) -> Result<f64> {
    if hop_rates.is_empty() {
        return Err(Error::InvalidInput("relay needs at least one hop".into()));
    }
    if let Some(&r) = hop_rates.iter().find(|r| !(**r >= 0.0)) {
        return Err(Error::Domain { what: "hop rate (bps)", value: r });
    }
    Ok(hop_rates.iter().copied().fold(f64::INFINITY, f64::min))
}

impl Scenario {
    pub fn kind(&self) -> ScenarioKind {
        self.settings.kind
    }

    pub fn quantum_nm(&self) -> f64 {
        self.plan.quantum_channel().map(|c| c.center_nm).unwrap_or(1550.0)
    }

    fn variable_spans(&self, length_km: f64) -> Result<Vec<FiberSpan>> {
        let fiber = &self.settings.fiber;
        match &fiber.second {
            Some((split, second)) if length_km > *split => Ok(vec![
                standard_span(&self.settings, *split, &fiber.label)?,
                standard_span(&self.settings, length_km - split, second)?,
            ]),
            _ => Ok(vec![standard_span(&self.settings, length_km, &fiber.label)?]),
        }
    }

    /// Topology with the swept length applied.
    pub fn stretched_topology(&self, length_km: f64) -> Result<Topology> {
        if !(length_km >= 0.0) {
            return Err(Error::Domain { what: "fiber length (km)", value: length_km });
        }
        let mut topology = self.topology.clone();
        let on_variable = match self.settings.placement {
            Placement::WorstCase => length_km,
            Placement::EvenSplit => length_km / 2.0,
        };
        let edge = &mut topology.edges[self.variable_edge];
        edge.spans = self.variable_spans(on_variable)?;
        edge.connectors = match self.settings.connector_every_km {
            Some(every) => (length_km / every).ceil() as u32,
            None => 0,
        };
        if self.settings.placement == Placement::EvenSplit {
            let route = self.topology.transparent_path(&self.tx, &self.rx, self.quantum_nm())?;
            let others: Vec<usize> = route_edges(&self.topology, &route.nodes)
                .into_iter()
                .filter(|&e| e != self.variable_edge)
                .collect();
            if others.is_empty() {
                return Err(Error::InvalidInput("even split needs a second edge on the route".into()));
            }
            let share = (length_km - on_variable) / others.len() as f64;
            for e in others {
                for span in topology.edges[e].spans.iter_mut().take(1) {
                    span.length_km += share;
                }
            }
        }
        Ok(topology)
    }

    /// Light path at a given swept length, with the receiver filter and the
    /// classical launches attached.
    pub fn route(&self, length_km: f64) -> Result<Route> {
        let topology = self.stretched_topology(length_km)?;
        let mut route = topology.transparent_path(&self.tx, &self.rx, self.quantum_nm())?;
        let f = self.settings.filter;
        route.path.elements.push(OpticalElement::Filter {
            center_nm: self.quantum_nm(),
            width_nm: f.width_nm,
            insertion_loss_db: f.insertion_loss_db,
            rejection_db: f.rejection_db,
        });
        if let Some(last) = route.node_ranges.last_mut() {
            last.end = route.path.elements.len();
        }
        let tx_end = route.node_ranges[0].end;
        let rx_start = route.node_ranges.last().map_or(0, |r| r.start);
        let d = self.settings.duty_cycle;
        if d > 0.0 {
            route.path.launches = self
                .settings
                .launches
                .iter()
                .map(|l| Launch {
                    position: if l.direction == Direction::Co { tx_end } else { rx_start },
                    wavelength_nm: l.wavelength_nm,
                    power_dbm: l.effective_dbm() + 10.0 * d.log10(),
                    direction: l.direction,
                })
                .collect();
        }
        Ok(route)
    }

    /// Loss at the quantum wavelength with every fiber span at zero length.
    pub fn no_fiber_loss_db(&self) -> Result<f64> {
        let mut route = self.route(0.0)?;
        for e in &mut route.path.elements {
            if let OpticalElement::Fiber(f) = e {
                f.length_km = 0.0;
            }
        }
        Ok(path_loss(&route.path, self.quantum_nm()))
    }

    pub fn link_state(&self, length_km: f64) -> Result<LinkState> {
        let route = self.route(length_km)?;
        let loss_db = path_loss(&route.path, self.quantum_nm());
        let det = &self.settings.detector;
        let eta = transmittance(loss_db) * det.efficiency;
        let noise = background_yield(&route.path, &self.plan, det, self.settings.filter.width_nm)?;
        Ok(LinkState { length_km, path: route.path, loss_db, eta, noise })
    }

    /// Key-rate figures for a link state at the given source intensities.
    pub fn performance(&self, state: &LinkState, decoy: &DecoyParams, lenient: bool) -> Result<QkdPerformance> {
        let det = &self.settings.detector;
        let kp = &self.settings.keyrate;
        let y0 = state.noise.total_y0;
        let (yield_gain, collapsed) = match keyrate::estimate_channel(y0, state.eta, det.misalignment_error, decoy, kp) {
            Ok(yg) => (yg, false),
            Err(Error::BoundCollapse) if lenient => {
                let signal = keyrate::observe(y0, state.eta, decoy.mu, det.misalignment_error, kp.background_error)?;
                (YieldGain::collapsed(signal.gain, signal.qber), true)
            }
            Err(e) => return Err(e),
        };
        let rates = keyrate::distillation_rates(det.pulse_rate_hz, det.deadtime_s, kp, &yield_gain);
        Ok(QkdPerformance {
            length_km: state.length_km,
            loss_db: state.loss_db,
            eta: state.eta,
            noise: state.noise,
            yield_gain,
            rates,
            collapsed,
        })
    }

    /// End-to-end performance with the variable edge stretched to `length_km`.
    pub fn evaluate_link(&self, length_km: f64) -> Result<QkdPerformance> {
        self.performance(&self.link_state(length_km)?, &self.settings.decoy, false)
    }

    /// Like [`Scenario::evaluate_link`] but records a collapsed decoy bound as
    /// zero secret rate instead of failing.
    pub fn evaluate_link_lenient(&self, length_km: f64) -> Result<QkdPerformance> {
        self.performance(&self.link_state(length_km)?, &self.settings.decoy, true)
    }

    /// Signal intensity maximizing the secret rate at `length_km`, with the
    /// decoy intensity held at its configured value.
    pub fn optimize_mu(&self, length_km: f64) -> Result<f64> {
        let state = self.link_state(length_km)?;
        let base = self.settings.decoy;
        keyrate::optimize_mu(|mu| {
            if mu <= base.nu {
                return 0.0;
            }
            let decoy = DecoyParams { mu, ..base };
            self.performance(&state, &decoy, true).map_or(0.0, |p| p.rates.secret_bps)
        })
    }
}

fn route_edges(t: &Topology, nodes: &[usize]) -> Vec<usize> {
    nodes
        .windows(2)
        .filter_map(|w| {
            t.edges
                .iter()
                .position(|e| (e.a == w[0] && e.b == w[1]) || (!e.directed && e.a == w[1] && e.b == w[0]))
        })
        .collect()
}
