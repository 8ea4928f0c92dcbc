//! Scenario description: topology, connections, switch and source
//! parameters, background load and run options. Every tunable has a named
//! field with a default, so a scenario file only lists what it changes.
//!
//! Rates are in cells per second and times in seconds.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use super::background::{BackgroundGenerator, BackgroundKind};
use super::topology::{build_chain, Layout, Network, NodeDef, NodeKind, TopologyError};
use super::topology::{AbrVc, BackgroundVc};
use crate::erica::EricaConfig;
use crate::gcra::PoliceMode;
use crate::model::{AbrParams, BufferConfig, Rate, Time, VcId};
use crate::switch::FeedbackScheme;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("{field}: unknown node `{name}`")]
    UnknownNode { field: String, name: String },
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

fn invalid(field: impl Into<String>, reason: impl ToString) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        reason: reason.to_string(),
    }
}

/// Offered load of an ABR source.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields))]
pub enum Demand {
    /// Always backlogged.
    #[default]
    Greedy,
    /// The application hands over cells at a fixed rate.
    Rate { rate: Rate },
    /// A fixed number of cells queued at start.
    Cells { count: u64 },
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields))]
pub enum TopologySpec {
    /// `n` sources share one bottleneck between two switches.
    NSource {
        #[cfg_attr(feature = "serde", serde(default = "default_n"))]
        n: u32,
        #[cfg_attr(feature = "serde", serde(default = "default_link_rate"))]
        bottleneck_rate: Rate,
        /// Defaults to the bottleneck rate.
        #[cfg_attr(feature = "serde", serde(default))]
        access_rate: Option<Rate>,
        #[cfg_attr(feature = "serde", serde(default = "default_prop_delay"))]
        prop_delay: Time,
    },
    /// `n` sources cross a line of `switches` switches.
    Chain {
        #[cfg_attr(feature = "serde", serde(default = "default_n"))]
        n: u32,
        #[cfg_attr(feature = "serde", serde(default = "default_switches"))]
        switches: u32,
        #[cfg_attr(feature = "serde", serde(default = "default_link_rate"))]
        link_rate: Rate,
        #[cfg_attr(feature = "serde", serde(default))]
        access_rate: Option<Rate>,
        #[cfg_attr(feature = "serde", serde(default = "default_prop_delay"))]
        prop_delay: Time,
    },
    Custom {
        nodes: Vec<CustomNode>,
        links: Vec<CustomLink>,
        vcs: Vec<CustomVc>,
    },
}

fn default_n() -> u32 {
    5
}
fn default_switches() -> u32 {
    3
}
fn default_link_rate() -> Rate {
    1000.0
}
fn default_prop_delay() -> Time {
    0.001
}

impl Default for TopologySpec {
    fn default() -> Self {
        TopologySpec::NSource {
            n: default_n(),
            bottleneck_rate: default_link_rate(),
            access_rate: None,
            prop_delay: default_prop_delay(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NodeRole {
    EndSystem,
    Switch,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct CustomNode {
    pub name: String,
    pub role: NodeRole,
    /// Replaces the scenario-wide switch settings for this node.
    #[cfg_attr(feature = "serde", serde(default))]
    pub switch: Option<SwitchSettings>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct CustomLink {
    pub a: String,
    pub b: String,
    pub rate: Rate,
    #[cfg_attr(feature = "serde", serde(default = "default_prop_delay"))]
    pub prop_delay: Time,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct CustomVc {
    /// Node names from source to destination.
    pub path: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct BufferSpec {
    pub qos_level: u8,
    pub capacity: u32,
    pub min_bw: Rate,
    /// Defaults to the link rate.
    pub max_bw: Option<Rate>,
}

impl Default for BufferSpec {
    fn default() -> Self {
        BufferSpec {
            qos_level: 0,
            capacity: 1024,
            min_bw: 0.0,
            max_bw: None,
        }
    }
}

impl BufferSpec {
    pub fn resolve(&self, link_rate: Rate) -> BufferConfig {
        BufferConfig {
            qos_level: self.qos_level,
            capacity: self.capacity,
            min_bw: self.min_bw,
            max_bw: self.max_bw.unwrap_or(link_rate),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SwitchSettings {
    pub feedback: FeedbackScheme,
    pub vsvd: bool,
    /// Defaults to 4 cell times of the switch's fastest port.
    pub fabric_delay: Option<Time>,
    /// Delay from begin-simulation to neighbour notification complete.
    pub notify_delay: Time,
    pub abr_level: u8,
    pub buffers: Vec<BufferSpec>,
    /// Queue length (cells) above which departing ABR cells get EFCI.
    /// Defaults to half the ABR buffer.
    pub efci_threshold: Option<u32>,
    /// Defaults to 0.8 of the ABR buffer.
    pub ci_threshold: Option<u32>,
    /// Defaults to 0.4 of the ABR buffer.
    pub ni_threshold: Option<u32>,
    pub erica: EricaConfig,
    /// Usage parameter control on links from end systems; off when absent.
    pub policing: Option<PoliceMode>,
}

impl Default for SwitchSettings {
    fn default() -> Self {
        SwitchSettings {
            feedback: FeedbackScheme::ExplicitRate,
            vsvd: false,
            fabric_delay: None,
            notify_delay: 0.0,
            abr_level: 1,
            buffers: (0..3)
                .map(|qos_level| BufferSpec {
                    qos_level,
                    ..BufferSpec::default()
                })
                .collect(),
            efci_threshold: None,
            ci_threshold: None,
            ni_threshold: None,
            erica: EricaConfig::default(),
            policing: None,
        }
    }
}

impl SwitchSettings {
    fn abr_capacity(&self) -> u32 {
        self.buffers
            .iter()
            .find(|b| b.qos_level == self.abr_level)
            .map_or(0, |b| b.capacity)
    }

    pub fn efci_threshold(&self) -> u32 {
        self.efci_threshold.unwrap_or(self.abr_capacity() / 2)
    }

    pub fn ci_threshold(&self) -> u32 {
        self.ci_threshold
            .unwrap_or((0.8 * self.abr_capacity() as f64) as u32)
    }

    pub fn ni_threshold(&self) -> u32 {
        self.ni_threshold
            .unwrap_or((0.4 * self.abr_capacity() as f64) as u32)
    }

    fn validate(&self, field: &str) -> Result<(), ScenarioError> {
        if self.buffers.is_empty() {
            return Err(invalid(format!("{field}.buffers"), "at least one buffer is required"));
        }
        let mut levels: Vec<u8> = self.buffers.iter().map(|b| b.qos_level).collect();
        levels.sort_unstable();
        if levels.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid(format!("{field}.buffers"), "duplicate qos_level"));
        }
        if !levels.contains(&self.abr_level) {
            return Err(invalid(format!("{field}.abr_level"), "no buffer has this qos_level"));
        }
        if let Some(d) = self.fabric_delay {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(invalid(format!("{field}.fabric_delay"), "must be non-negative"));
            }
        }
        if !(self.notify_delay >= 0.0 && self.notify_delay.is_finite()) {
            return Err(invalid(format!("{field}.notify_delay"), "must be non-negative"));
        }
        if self.feedback == FeedbackScheme::RelativeRate && self.ci_threshold() <= self.ni_threshold() {
            return Err(invalid(format!("{field}.ci_threshold"), "must exceed ni_threshold"));
        }
        let e = &self.erica;
        if !(e.target_fraction > 0.0 && e.target_fraction <= 1.0) {
            return Err(invalid(format!("{field}.erica.target_fraction"), "must lie in (0, 1]"));
        }
        if !(e.delta >= 0.0) {
            return Err(invalid(format!("{field}.erica.delta"), "must be non-negative"));
        }
        if e.averaging_cells == 0 {
            return Err(invalid(format!("{field}.erica.averaging_cells"), "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SourceSettings {
    /// Defaults to the rate of the source's access link.
    pub pcr: Option<Rate>,
    pub mcr: Rate,
    /// Defaults to pcr / 10.
    pub icr: Option<Rate>,
    pub nrm: u32,
    pub rif: f64,
    pub rdf: f64,
    pub adtf: Time,
    /// Tolerance used when the first switch polices the connection.
    pub cdvt: Time,
    pub demand: Demand,
    pub start: Time,
}

impl Default for SourceSettings {
    fn default() -> Self {
        let p = AbrParams::with_pcr(1.0);
        SourceSettings {
            pcr: None,
            mcr: p.mcr,
            icr: None,
            nrm: p.nrm,
            rif: p.rif,
            rdf: p.rdf,
            adtf: p.adtf,
            cdvt: 0.0,
            demand: Demand::Greedy,
            start: 0.0,
        }
    }
}

/// Per-source overrides, `source` counting from 1 in topology order.
#[derive(Clone, Debug, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct VcOverride {
    pub source: u32,
    pub pcr: Option<Rate>,
    pub mcr: Option<Rate>,
    pub icr: Option<Rate>,
    pub demand: Option<Demand>,
    pub start: Option<Time>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct BackgroundSpec {
    pub kind: BackgroundKind,
    pub enabled: bool,
    pub pcr: Rate,
    /// VBR only; defaults to pcr / 2.
    pub scr: Option<Rate>,
    /// VBR only.
    pub mbs: u32,
    pub off_jitter: f64,
    /// Defaults to level 0 for CBR and VBR, the lowest priority level for UBR.
    pub qos_level: Option<u8>,
    pub start: Time,
    /// Node names; generated topologies add a dedicated end-system pair
    /// across the whole switch line when absent.
    pub path: Option<Vec<String>>,
}

impl Default for BackgroundSpec {
    fn default() -> Self {
        BackgroundSpec {
            kind: BackgroundKind::Cbr,
            enabled: true,
            pcr: 100.0,
            scr: None,
            mbs: 10,
            off_jitter: 0.0,
            qos_level: None,
            start: 0.0,
            path: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DestinationSettings {
    pub efci_to_ci: bool,
    /// ACR available to in-rate BRMs on the reverse path; unconstrained when absent.
    pub reverse_acr: Option<Rate>,
}

impl Default for DestinationSettings {
    fn default() -> Self {
        DestinationSettings {
            efci_to_ci: true,
            reverse_acr: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct MetricsSettings {
    /// Final fraction of the run used for steady-state summaries.
    pub steady_state_fraction: f64,
}

impl Default for MetricsSettings {
    fn default() -> Self {
        MetricsSettings {
            steady_state_fraction: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Scenario {
    pub name: String,
    pub duration: Time,
    pub seed: u64,
    pub topology: TopologySpec,
    pub switch: SwitchSettings,
    pub source: SourceSettings,
    pub vc: Vec<VcOverride>,
    pub background: Vec<BackgroundSpec>,
    pub destination: DestinationSettings,
    pub metrics: MetricsSettings,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            name: "scenario".into(),
            duration: 20.0,
            seed: 1,
            topology: TopologySpec::default(),
            switch: SwitchSettings::default(),
            source: SourceSettings::default(),
            vc: Vec::new(),
            background: Vec::new(),
            destination: DestinationSettings::default(),
            metrics: MetricsSettings::default(),
        }
    }
}

/// Names of the shipped scenario templates.
pub const TEMPLATES: [&str; 4] = ["n_source", "n_source_vbr_background", "vsvd_chain", "binary_efci"];

/// Id of the `j`-th background generator (0-based).
pub fn background_vc(j: usize) -> VcId {
    VcId(10_000 + j as u32)
}

impl Scenario {
    /// `n` greedy sources through the two-switch bottleneck.
    pub fn n_source(n: u32) -> Scenario {
        Scenario {
            name: "n_source".into(),
            topology: TopologySpec::NSource {
                n,
                bottleneck_rate: default_link_rate(),
                access_rate: None,
                prop_delay: default_prop_delay(),
            },
            ..Scenario::default()
        }
    }

    pub fn template(name: &str) -> Option<Scenario> {
        let s = match name {
            "n_source" => Scenario::n_source(5),
            "n_source_vbr_background" => Scenario {
                name: name.into(),
                background: vec![BackgroundSpec {
                    kind: BackgroundKind::Vbr,
                    pcr: 400.0,
                    scr: Some(200.0),
                    mbs: 20,
                    off_jitter: 0.5,
                    ..BackgroundSpec::default()
                }],
                ..Scenario::n_source(3)
            },
            "vsvd_chain" => Scenario {
                name: name.into(),
                topology: TopologySpec::Chain {
                    n: 3,
                    switches: default_switches(),
                    link_rate: default_link_rate(),
                    access_rate: None,
                    prop_delay: default_prop_delay(),
                },
                switch: SwitchSettings {
                    vsvd: true,
                    ..SwitchSettings::default()
                },
                ..Scenario::default()
            },
            "binary_efci" => Scenario {
                name: name.into(),
                switch: SwitchSettings {
                    feedback: FeedbackScheme::EfciBinary,
                    ..SwitchSettings::default()
                },
                ..Scenario::n_source(5)
            },
            _ => return None,
        };
        Some(s)
    }

    pub fn steady_start(&self) -> Time {
        self.duration * (1.0 - self.metrics.steady_state_fraction)
    }

    fn layout(&self) -> Result<(Layout, Vec<Option<SwitchSettings>>), ScenarioError> {
        match &self.topology {
            TopologySpec::NSource {
                n,
                bottleneck_rate,
                access_rate,
                prop_delay,
            } => {
                let l = build_chain(
                    *n,
                    2,
                    *bottleneck_rate,
                    access_rate.unwrap_or(*bottleneck_rate),
                    *prop_delay,
                )
                .map_err(|e| named(e, "topology"))?;
                let k = l.nodes.len();
                Ok((l, vec![None; k]))
            }
            TopologySpec::Chain {
                n,
                switches,
                link_rate,
                access_rate,
                prop_delay,
            } => {
                let l = build_chain(*n, *switches, *link_rate, access_rate.unwrap_or(*link_rate), *prop_delay)
                    .map_err(|e| named(e, "topology"))?;
                let k = l.nodes.len();
                Ok((l, vec![None; k]))
            }
            TopologySpec::Custom { nodes, links, vcs } => {
                let mut layout = Layout::default();
                let mut overrides = Vec::new();
                for (i, n) in nodes.iter().enumerate() {
                    if layout.index(&n.name).is_some() {
                        return Err(invalid(format!("topology.nodes[{i}].name"), "duplicate node name"));
                    }
                    layout.nodes.push(NodeDef {
                        name: n.name.clone(),
                        kind: match n.role {
                            NodeRole::EndSystem => NodeKind::EndSystem,
                            NodeRole::Switch => NodeKind::Switch,
                        },
                    });
                    overrides.push(n.switch.clone());
                }
                for (i, l) in links.iter().enumerate() {
                    let a = lookup(&layout, &l.a, &format!("topology.links[{i}].a"))?;
                    let b = lookup(&layout, &l.b, &format!("topology.links[{i}].b"))?;
                    layout
                        .add_link(a, b, l.rate, l.prop_delay)
                        .map_err(|e| named(e, &format!("topology.links[{i}]")))?;
                }
                for (i, vc) in vcs.iter().enumerate() {
                    let path = vc
                        .path
                        .iter()
                        .map(|name| lookup(&layout, name, &format!("topology.vcs[{i}].path")))
                        .collect::<Result<Vec<_>, _>>()?;
                    layout.vc_paths.push(path);
                }
                Ok((layout, overrides))
            }
        }
    }

    fn abr_params(&self, index: usize, access_rate: Rate) -> Result<(AbrParams, Demand, Time), ScenarioError> {
        let s = &self.source;
        let o = self.vc.iter().find(|o| o.source as usize == index + 1);
        let pcr = o.and_then(|o| o.pcr).or(s.pcr).unwrap_or(access_rate);
        let params = AbrParams {
            pcr,
            mcr: o.and_then(|o| o.mcr).unwrap_or(s.mcr),
            icr: o.and_then(|o| o.icr).or(s.icr).unwrap_or(pcr / 10.0),
            nrm: s.nrm,
            rif: s.rif,
            rdf: s.rdf,
            adtf: s.adtf,
        };
        let field = match o {
            Some(_) => format!("vc[source = {}]", index + 1),
            None => "source".into(),
        };
        params.validate().map_err(|e| invalid(field.clone(), e))?;
        let demand = o.and_then(|o| o.demand).unwrap_or(s.demand);
        match demand {
            Demand::Rate { rate } if !(rate > 0.0 && rate.is_finite()) => {
                return Err(invalid(format!("{field}.demand.rate"), "must be positive"));
            }
            _ => {}
        }
        let start = o.and_then(|o| o.start).unwrap_or(s.start);
        if !(start >= 0.0 && start.is_finite()) {
            return Err(invalid(format!("{field}.start"), "must be non-negative"));
        }
        Ok((params, demand, start))
    }

    /// Validates the scenario and resolves it into a concrete network.
    pub fn build(&self) -> Result<Network, ScenarioError> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(invalid("duration", "must be positive"));
        }
        let f = self.metrics.steady_state_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(invalid("metrics.steady_state_fraction", "must lie in (0, 1]"));
        }
        if let Some(r) = self.destination.reverse_acr {
            if !(r >= 0.0) {
                return Err(invalid("destination.reverse_acr", "must be non-negative"));
            }
        }
        self.switch.validate("switch")?;
        let (mut layout, overrides) = self.layout()?;
        let mut switch_settings: Vec<Option<SwitchSettings>> = Vec::with_capacity(layout.nodes.len());
        for (i, (node, o)) in layout.nodes.iter().zip(overrides).enumerate() {
            switch_settings.push(match node.kind {
                NodeKind::Switch => {
                    let s = o.unwrap_or_else(|| self.switch.clone());
                    s.validate(&format!("topology.nodes[{i}].switch"))?;
                    Some(s)
                }
                NodeKind::EndSystem => None,
            });
        }
        for (i, o) in self.vc.iter().enumerate() {
            if o.source == 0 || o.source as usize > layout.vc_paths.len() {
                return Err(invalid(
                    format!("vc[{i}].source"),
                    format!("no source {} (sources count from 1 to {})", o.source, layout.vc_paths.len()),
                ));
            }
        }

        let mut abr = Vec::new();
        for (i, path) in layout.vc_paths.iter().enumerate() {
            let access = layout
                .link_between(path[0], path[1])
                .map(|l| layout.links[l].cell_rate())
                .unwrap_or(default_link_rate());
            let (params, demand, start) = self.abr_params(i, access)?;
            abr.push(AbrVc {
                vc: VcId(i as u32 + 1),
                path: path.clone(),
                params,
                cdvt: self.source.cdvt,
                demand,
                start,
            });
        }

        let mut background = Vec::new();
        for (j, b) in self.background.iter().enumerate() {
            if !b.enabled {
                continue;
            }
            let field = format!("background[{j}]");
            let lowest = self.switch.buffers.iter().map(|b| b.qos_level).max().unwrap_or(0);
            let qos_level = b.qos_level.unwrap_or(match b.kind {
                BackgroundKind::Ubr => lowest,
                _ => 0,
            });
            let generator = BackgroundGenerator {
                kind: b.kind,
                vc: background_vc(j),
                pcr: b.pcr,
                scr: b.scr.unwrap_or(b.pcr / 2.0),
                mbs: b.mbs,
                off_jitter: b.off_jitter,
                qos_level,
                start: b.start,
            };
            generator.validate().map_err(|e| invalid(field.clone(), e))?;
            if !(b.start >= 0.0) {
                return Err(invalid(format!("{field}.start"), "must be non-negative"));
            }
            let path = match &b.path {
                Some(names) => names
                    .iter()
                    .map(|n| lookup(&layout, n, &format!("{field}.path")))
                    .collect::<Result<Vec<_>, _>>()?,
                None => layout
                    .attach_background(j, b.pcr)
                    .map_err(|e| named(e, &format!("{field}.path")))?,
            };
            background.push(BackgroundVc { path, generator });
        }

        let network = Network {
            name: self.name.clone(),
            duration: self.duration,
            seed: self.seed,
            steady_start: self.steady_start(),
            nodes: layout.nodes,
            links: layout.links,
            switch_settings,
            abr,
            background,
            destination: self.destination.clone(),
        };
        network.validate()?;
        Ok(network)
    }
}

fn named(e: TopologyError, field: &str) -> ScenarioError {
    invalid(field, e)
}

fn lookup(layout: &Layout, name: &str, field: &str) -> Result<usize, ScenarioError> {
    layout.index(name).ok_or_else(|| ScenarioError::UnknownNode {
        field: field.into(),
        name: name.into(),
    })
}
