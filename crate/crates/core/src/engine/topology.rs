//! Nodes, links and static routes of a resolved network.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use super::background::BackgroundGenerator;
use super::scenario::{Demand, DestinationSettings, SwitchSettings};
use crate::model::{cells_to_bits, AbrParams, Rate, Time, VcId, CELL_BITS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("need at least one source")]
    NoSources,
    #[error("need at least two switches, got {0}")]
    TooFewSwitches(u32),
    #[error("link rate must be positive, got {0}")]
    BadRate(Rate),
    #[error("propagation delay must be non-negative, got {0}")]
    BadDelay(Time),
    #[error("link joins node {0} to itself")]
    SelfLoop(usize),
    #[error("no link between `{0}` and `{1}`")]
    NotAdjacent(String, String),
    #[error("path of vc {0} must have at least two nodes")]
    ShortPath(VcId),
    #[error("vc {vc} must start and end at end systems, `{node}` is a switch")]
    EndpointNotEndSystem { vc: VcId, node: String },
    #[error("vc {vc} passes end system `{node}` in the middle of its path")]
    TransitEndSystem { vc: VcId, node: String },
    #[error("vc {vc} visits `{node}` twice")]
    Loop { vc: VcId, node: String },
    #[error("topology has no switch line to attach background traffic to")]
    NoSwitchLine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    EndSystem,
    Switch,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeDef {
    pub name: String,
    pub kind: NodeKind,
}

/// Full-duplex point-to-point link.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Link {
    pub a: usize,
    pub b: usize,
    /// Bits per second.
    pub rate: f64,
    pub propagation_delay: Time,
}

impl Link {
    pub fn cell_rate(&self) -> Rate {
        self.rate / CELL_BITS as f64
    }

    /// Time a cell occupies the link.
    pub fn cell_time(&self) -> Time {
        CELL_BITS as f64 / self.rate
    }

    pub fn other(&self, node: usize) -> usize {
        if node == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// Nodes and links under construction, plus one path per ABR source.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Layout {
    pub nodes: Vec<NodeDef>,
    pub links: Vec<Link>,
    pub vc_paths: Vec<Vec<usize>>,
    /// Switches in line order for generated topologies.
    pub switch_line: Vec<usize>,
    access_rate: Rate,
    prop_delay: Time,
}

impl Layout {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    fn add_node(&mut self, name: String, kind: NodeKind) -> usize {
        self.nodes.push(NodeDef { name, kind });
        self.nodes.len() - 1
    }

    /// Adds a link; `rate` is in cells per second.
    pub fn add_link(&mut self, a: usize, b: usize, rate: Rate, prop_delay: Time) -> Result<usize, TopologyError> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(TopologyError::BadRate(rate));
        }
        if !(prop_delay >= 0.0 && prop_delay.is_finite()) {
            return Err(TopologyError::BadDelay(prop_delay));
        }
        if a == b {
            return Err(TopologyError::SelfLoop(a));
        }
        self.links.push(Link {
            a,
            b,
            rate: cells_to_bits(rate),
            propagation_delay: prop_delay,
        });
        Ok(self.links.len() - 1)
    }

    pub fn link_between(&self, a: usize, b: usize) -> Option<usize> {
        self.links
            .iter()
            .position(|l| (l.a == a && l.b == b) || (l.a == b && l.b == a))
    }

    /// Adds an end-system pair across the whole switch line for background
    /// generator `j` and returns its path.
    pub fn attach_background(&mut self, j: usize, pcr: Rate) -> Result<Vec<usize>, TopologyError> {
        let (&first, &last) = match (self.switch_line.first(), self.switch_line.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(TopologyError::NoSwitchLine),
        };
        let rate = self.access_rate.max(pcr);
        let src = self.add_node(format!("bg{}_src", j + 1), NodeKind::EndSystem);
        let dst = self.add_node(format!("bg{}_dst", j + 1), NodeKind::EndSystem);
        self.add_link(src, first, rate, self.prop_delay)?;
        self.add_link(last, dst, rate, self.prop_delay)?;
        let mut path = alloc::vec![src];
        path.extend(&self.switch_line);
        path.push(dst);
        Ok(path)
    }
}

/// `n` sources, a line of `switches` switches joined by `link_rate` links,
/// and `n` destinations. Node names are `src<i>`, `sw<k>` and `dst<i>`.
pub fn build_chain(
    n: u32,
    switches: u32,
    link_rate: Rate,
    access_rate: Rate,
    prop_delay: Time,
) -> Result<Layout, TopologyError> {
    if n == 0 {
        return Err(TopologyError::NoSources);
    }
    if switches < 2 {
        return Err(TopologyError::TooFewSwitches(switches));
    }
    let mut l = Layout {
        access_rate,
        prop_delay,
        ..Layout::default()
    };
    let srcs: Vec<usize> = (1..=n)
        .map(|i| l.add_node(format!("src{i}"), NodeKind::EndSystem))
        .collect();
    l.switch_line = (1..=switches)
        .map(|k| l.add_node(format!("sw{k}"), NodeKind::Switch))
        .collect();
    let dsts: Vec<usize> = (1..=n)
        .map(|i| l.add_node(format!("dst{i}"), NodeKind::EndSystem))
        .collect();
    let line = l.switch_line.clone();
    for &s in &srcs {
        l.add_link(s, line[0], access_rate, prop_delay)?;
    }
    for w in line.windows(2) {
        l.add_link(w[0], w[1], link_rate, prop_delay)?;
    }
    for &d in &dsts {
        l.add_link(*line.last().unwrap(), d, access_rate, prop_delay)?;
    }
    for (&s, &d) in srcs.iter().zip(&dsts) {
        let mut path = alloc::vec![s];
        path.extend(&line);
        path.push(d);
        l.vc_paths.push(path);
    }
    Ok(l)
}

/// The two-switch reference configuration: `n` sources, switch `sw1`,
/// the bottleneck link, switch `sw2`, `n` destinations.
pub fn build_n_source(n: u32, bottleneck_rate: Rate, access_rate: Rate, prop_delay: Time) -> Result<Layout, TopologyError> {
    build_chain(n, 2, bottleneck_rate, access_rate, prop_delay)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AbrVc {
    pub vc: VcId,
    pub path: Vec<usize>,
    pub params: AbrParams,
    pub cdvt: Time,
    pub demand: Demand,
    pub start: Time,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundVc {
    pub path: Vec<usize>,
    pub generator: BackgroundGenerator,
}

/// A validated network ready to simulate.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub name: String,
    pub duration: Time,
    pub seed: u64,
    pub steady_start: Time,
    pub nodes: Vec<NodeDef>,
    pub links: Vec<Link>,
    /// Present for switch nodes.
    pub switch_settings: Vec<Option<SwitchSettings>>,
    pub abr: Vec<AbrVc>,
    pub background: Vec<BackgroundVc>,
    pub destination: DestinationSettings,
}

impl Network {
    pub fn link_between(&self, a: usize, b: usize) -> Option<usize> {
        self.links
            .iter()
            .position(|l| (l.a == a && l.b == b) || (l.a == b && l.b == a))
    }

    /// Connections as `(vc, path)`.
    pub fn paths(&self) -> impl Iterator<Item = (VcId, &[usize])> {
        self.abr
            .iter()
            .map(|v| (v.vc, v.path.as_slice()))
            .chain(self.background.iter().map(|b| (b.generator.vc, b.path.as_slice())))
    }

    pub fn validate(&self) -> Result<(), TopologyError> {
        let name = |i: usize| self.nodes[i].name.clone();
        for (vc, path) in self.paths() {
            if path.len() < 2 {
                return Err(TopologyError::ShortPath(vc));
            }
            for &end in [path[0], path[path.len() - 1]].iter() {
                if self.nodes[end].kind != NodeKind::EndSystem {
                    return Err(TopologyError::EndpointNotEndSystem { vc, node: name(end) });
                }
            }
            for &mid in &path[1..path.len() - 1] {
                if self.nodes[mid].kind == NodeKind::EndSystem {
                    return Err(TopologyError::TransitEndSystem { vc, node: name(mid) });
                }
            }
            for (i, &n) in path.iter().enumerate() {
                if path[..i].contains(&n) {
                    return Err(TopologyError::Loop { vc, node: name(n) });
                }
            }
            for w in path.windows(2) {
                if self.link_between(w[0], w[1]).is_none() {
                    return Err(TopologyError::NotAdjacent(name(w[0]), name(w[1])));
                }
            }
        }
        Ok(())
    }
}
