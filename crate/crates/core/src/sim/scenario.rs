//! Declarative run description and its validation/build step.
//!
//! A scenario names a topology shape, the radio field, one MAC stack with
//! its knobs, the traffic workload and the run timing. [`Scenario::build`]
//! validates the combination and lowers it into per-node configurations
//! plus resolved symbol-time bounds, ready for the simulator. The structs
//! derive `Deserialize` so front ends can read them from TOML or JSON;
//! the library itself stays format-agnostic.

use super::radio::DEFAULT_INTERFERENCE_FACTOR;
use super::routing::NextHopRule;
use super::topology::{self, Pos};
use super::traffic::{TrafficPattern, TrafficSource};
use crate::mac::{CsmaConfig, DsmeConfig};
use crate::schedule::{
    seconds_to_symbols, ChannelPage, ConfigError, MacTimingParams, ParamError, SabError,
    SuperframeConfig,
};
use crate::NodeId;
use serde::Deserialize;
use thiserror::Error;

/// Largest `BO - SO` gap; beacon-slot bookkeeping uses 64-bit bitmaps.
pub const MAX_BI_SUPERFRAMES_LOG2: u8 = 6;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ScenarioError {
    #[error("unsupported scenario version {0} (expected 1)")]
    Version(u32),
    #[error(transparent)]
    Orders(#[from] ConfigError),
    #[error(transparent)]
    Timing(#[from] ParamError),
    #[error(transparent)]
    Channels(#[from] SabError),
    #[error("{0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

/// Top-level run description.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub topology: Topology,
    pub radio: Radio,
    pub mac: Mac,
    pub traffic: Traffic,
    #[serde(default)]
    pub routing: Routing,
    pub timing: Timing,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    /// Chain of nodes at fixed spacing; node 0 is one end.
    Line,
    /// Concentric rings around the sink.
    Circles,
    /// Explicit parent pointers, laid out by depth.
    Tree,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    pub shape: Shape,
    /// Node count (line shape).
    #[serde(default)]
    pub nodes: Option<u32>,
    /// Nodes per ring, inner to outer (circles shape).
    #[serde(default)]
    pub rings: Option<Vec<u32>>,
    /// `parents[k]` is the parent of node `k + 1`; node 0 is the root
    /// (tree shape). Parents must precede their children.
    #[serde(default)]
    pub parents: Option<Vec<u32>>,
    pub spacing: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Radio {
    pub comm_range: f64,
    /// Interference radius; defaults to twice the communication range.
    #[serde(default)]
    pub interference_range: Option<f64>,
    #[serde(default = "default_channels")]
    pub channels: Vec<u8>,
    /// Beacon / contention channel; defaults to the first listed channel.
    #[serde(default)]
    pub common_channel: Option<u8>,
}

fn default_channels() -> Vec<u8> {
    vec![11, 12, 13, 14]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stack {
    Dsme,
    Csma,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mac {
    #[serde(default = "default_stack")]
    pub stack: Stack,
    pub so: u8,
    pub mo: u8,
    pub bo: u8,
    #[serde(default)]
    pub cap_reduction: bool,
    #[serde(default)]
    pub min_be: Option<u8>,
    #[serde(default)]
    pub max_be: Option<u8>,
    #[serde(default)]
    pub max_backoffs: Option<u8>,
    #[serde(default)]
    pub max_retries: Option<u8>,
    #[serde(default)]
    pub expiration_threshold: Option<u32>,
    #[serde(default)]
    pub response_wait: Option<u32>,
    #[serde(default)]
    pub queue_capacity: Option<usize>,
    /// Smoothing weight of the per-link rate estimator.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_true")]
    pub hysteresis: bool,
    /// Idle multi-superframes before a link estimate is written off;
    /// defaults to the slot expiration threshold.
    #[serde(default)]
    pub depreciation_threshold: Option<u32>,
    #[serde(default = "default_election")]
    pub election_probability: f64,
    #[serde(default = "default_lease")]
    pub lease_msf: u32,
    /// Clock skew magnitude; non-anchor nodes get alternating signed
    /// fractions of it, the anchor stays exact.
    #[serde(default)]
    pub drift_ppm: f64,
}

fn default_stack() -> Stack {
    Stack::Dsme
}

fn default_alpha() -> f64 {
    0.5
}

fn default_true() -> bool {
    true
}

fn default_election() -> f64 {
    0.33
}

fn default_lease() -> u32 {
    200
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternKind {
    Poisson,
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum SourceSel {
    /// `"all"` (every non-sink node) or `"leaves"` (nodes without
    /// children in the parent graph).
    Named(String),
    /// Explicit node ids.
    List(Vec<NodeId>),
}

impl Default for SourceSel {
    fn default() -> Self {
        SourceSel::Named("all".into())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Traffic {
    #[serde(default = "default_pattern")]
    pub pattern: PatternKind,
    pub rate_hz: f64,
    #[serde(default = "default_payload")]
    pub payload: u16,
    #[serde(default)]
    pub sources: SourceSel,
    /// Measured packets per source; warm-up packets are extra.
    pub packets_per_source: u32,
    #[serde(default)]
    pub sink: NodeId,
}

fn default_pattern() -> PatternKind {
    PatternKind::Poisson
}

fn default_payload() -> u16 {
    75
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoutingMode {
    /// Greedy forwarding toward the sink over learned neighbor positions.
    Geographic,
    /// Fixed next hop along the topology's parent pointers.
    Parent,
    /// Fixed next hops precomputed greedily from full topology knowledge.
    StaticGreedy,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Routing {
    /// Defaults to geographic for the beacon-synchronized stack and
    /// precomputed greedy chains for the contention-only stack.
    #[serde(default)]
    pub mode: Option<RoutingMode>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timing {
    /// Formation window before measurement starts, seconds.
    pub setup_s: f64,
    /// Hard wall-clock cap of the run, seconds.
    pub max_s: f64,
    /// Quiet period after the last activity before the run ends, seconds.
    #[serde(default = "default_cooldown")]
    pub cooldown_s: f64,
}

fn default_cooldown() -> f64 {
    5.0
}

/// Per-node MAC configuration, resolved.
#[derive(Debug, Clone)]
pub enum NodeSetup {
    Dsme(DsmeConfig),
    Csma(CsmaConfig),
}

/// A validated scenario lowered to simulator inputs.
#[derive(Debug)]
pub struct Built {
    pub seed: u64,
    pub positions: Vec<Pos>,
    pub comm_range: f64,
    pub interference_range: f64,
    pub nodes: Vec<NodeSetup>,
    pub sources: Vec<TrafficSource>,
    pub t_setup: u64,
    pub t_max: u64,
    pub cooldown: u64,
    /// Canonical grid for schedule audits; present only when the stack is
    /// beacon-synchronized and every clock is exact.
    pub audit_grid: Option<SuperframeConfig>,
}

impl Scenario {
    /// Validate and lower into simulator inputs.
    pub fn build(&self) -> Result<Built, ScenarioError> {
        if self.version != 1 {
            return Err(ScenarioError::Version(self.version));
        }

        let (positions, parents) = self.resolve_topology()?;
        let n = positions.len();
        if n < 2 {
            return Err(invalid("topology needs at least two nodes"));
        }
        if usize::from(self.traffic.sink) != 0 {
            return Err(invalid("the sink must be node 0 (the network anchor)"));
        }

        // Radio field.
        if !(self.radio.comm_range > 0.0) {
            return Err(invalid("comm_range must be positive"));
        }
        let interference = self
            .radio
            .interference_range
            .unwrap_or(self.radio.comm_range * DEFAULT_INTERFERENCE_FACTOR);
        if interference < self.radio.comm_range {
            return Err(invalid(
                "interference_range must be at least comm_range",
            ));
        }
        let page = ChannelPage::new(self.radio.channels.clone())?;
        let common = self
            .radio
            .common_channel
            .unwrap_or_else(|| page.channels()[0]);
        if page.index_of(common).is_none() {
            return Err(invalid(format!(
                "common_channel {common} is not in the channel list"
            )));
        }

        // Superframe structure and timing attributes.
        let superframe =
            SuperframeConfig::new(self.mac.so, self.mac.mo, self.mac.bo, self.mac.cap_reduction)?;
        if self.mac.bo - self.mac.so > MAX_BI_SUPERFRAMES_LOG2 {
            return Err(invalid(format!(
                "bo - so must not exceed {MAX_BI_SUPERFRAMES_LOG2}"
            )));
        }
        let base = match self.mac.stack {
            Stack::Dsme => MacTimingParams::default(),
            Stack::Csma => MacTimingParams::csma_baseline(),
        };
        let params = MacTimingParams {
            min_be: self.mac.min_be.unwrap_or(base.min_be),
            max_be: self.mac.max_be.unwrap_or(base.max_be),
            max_backoffs: self.mac.max_backoffs.unwrap_or(base.max_backoffs),
            max_retries: self.mac.max_retries.unwrap_or(base.max_retries),
            expiration_threshold: self
                .mac
                .expiration_threshold
                .unwrap_or(base.expiration_threshold),
            response_wait: self.mac.response_wait.or(base.response_wait),
            queue_capacity: self.mac.queue_capacity.unwrap_or(base.queue_capacity),
        };
        params.validate()?;
        if !(self.mac.alpha > 0.0 && self.mac.alpha <= 1.0) {
            return Err(invalid("alpha must be in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.mac.election_probability) {
            return Err(invalid("election_probability must be in [0, 1]"));
        }
        let depreciation = self
            .mac
            .depreciation_threshold
            .unwrap_or(params.expiration_threshold);

        // Routing.
        let mode = self.routing.mode.unwrap_or(match self.mac.stack {
            Stack::Dsme => RoutingMode::Geographic,
            Stack::Csma => RoutingMode::StaticGreedy,
        });
        if self.mac.stack == Stack::Csma && mode == RoutingMode::Geographic {
            return Err(invalid(
                "the contention-only stack has no neighborhood discovery; use parent or static-greedy routing",
            ));
        }
        let static_hops = match mode {
            RoutingMode::Parent => {
                let Some(parents) = &parents else {
                    return Err(invalid(
                        "parent routing needs a shape with parent pointers",
                    ));
                };
                parents.clone()
            }
            RoutingMode::StaticGreedy => greedy_hops(&positions, self.radio.comm_range)?,
            RoutingMode::Geographic => Vec::new(),
        };

        // Traffic.
        if !(self.traffic.rate_hz > 0.0 && self.traffic.rate_hz.is_finite()) {
            return Err(invalid("rate_hz must be positive"));
        }
        if self.traffic.payload == 0 || self.traffic.payload > 127 {
            return Err(invalid("payload must be 1..=127 octets"));
        }
        if self.traffic.packets_per_source == 0 {
            return Err(invalid("packets_per_source must be positive"));
        }
        let origins = self.resolve_sources(n, parents.as_deref())?;

        // Timing.
        let t_setup = seconds_to_symbols(self.timing.setup_s);
        let t_max = seconds_to_symbols(self.timing.max_s);
        let cooldown = seconds_to_symbols(self.timing.cooldown_s);
        if t_setup >= t_max {
            return Err(invalid("setup_s must be smaller than max_s"));
        }

        // Per-node configurations.
        let drift = |i: usize| -> f64 {
            if i == 0 || self.mac.drift_ppm == 0.0 {
                0.0
            } else {
                const PATTERN: [f64; 4] = [1.0, -1.0, 0.5, -0.5];
                self.mac.drift_ppm * PATTERN[(i - 1) % 4]
            }
        };
        let nodes: Vec<NodeSetup> = (0..n)
            .map(|i| match self.mac.stack {
                Stack::Dsme => {
                    let next_hop = match mode {
                        RoutingMode::Geographic => NextHopRule::Geographic {
                            sink: self.traffic.sink,
                            sink_pos: positions[usize::from(self.traffic.sink)],
                        },
                        _ => NextHopRule::Fixed(static_hops[i]),
                    };
                    NodeSetup::Dsme(DsmeConfig {
                        superframe,
                        params,
                        page: page.clone(),
                        common_channel: common,
                        scan_channels: vec![common],
                        alpha: self.mac.alpha,
                        hysteresis: self.mac.hysteresis,
                        depreciation_threshold: depreciation,
                        election_probability: self.mac.election_probability,
                        lease_msf: self.mac.lease_msf,
                        drift_ppm: drift(i),
                        pan_coordinator: i == 0,
                        position: positions[i],
                        next_hop,
                    })
                }
                Stack::Csma => NodeSetup::Csma(CsmaConfig {
                    params,
                    channel: common,
                    position: positions[i],
                    next_hop: static_hops[i],
                }),
            })
            .collect();

        let pattern = match self.traffic.pattern {
            PatternKind::Poisson => TrafficPattern::Poisson {
                rate_hz: self.traffic.rate_hz,
            },
            PatternKind::Periodic => TrafficPattern::Periodic {
                rate_hz: self.traffic.rate_hz,
            },
        };
        let sources: Vec<TrafficSource> = origins
            .iter()
            .map(|&node| {
                TrafficSource::new(
                    node,
                    self.traffic.sink,
                    pattern,
                    self.traffic.payload,
                    positions[usize::from(node)],
                    t_setup,
                    self.traffic.packets_per_source,
                )
            })
            .collect();

        let all_exact = (0..n).all(|i| drift(i) == 0.0);
        let audit_grid = (self.mac.stack == Stack::Dsme && all_exact).then_some(superframe);

        Ok(Built {
            seed: self.seed,
            positions,
            comm_range: self.radio.comm_range,
            interference_range: interference,
            nodes,
            sources,
            t_setup,
            t_max,
            cooldown,
            audit_grid,
        })
    }

    fn resolve_topology(&self) -> Result<(Vec<Pos>, Option<Vec<Option<NodeId>>>), ScenarioError> {
        if !(self.topology.spacing > 0.0) {
            return Err(invalid("spacing must be positive"));
        }
        match self.topology.shape {
            Shape::Line => {
                let Some(count) = self.topology.nodes else {
                    return Err(invalid("line topology needs `nodes`"));
                };
                let n = count as usize;
                let positions = topology::line(n, self.topology.spacing);
                let parents = (0..n)
                    .map(|i| if i == 0 { None } else { Some((i - 1) as NodeId) })
                    .collect();
                Ok((positions, Some(parents)))
            }
            Shape::Circles => {
                let Some(rings) = &self.topology.rings else {
                    return Err(invalid("circles topology needs `rings`"));
                };
                if rings.is_empty() || rings.iter().any(|&c| c == 0) {
                    return Err(invalid("every ring needs at least one node"));
                }
                Ok((topology::circles(rings, self.topology.spacing), None))
            }
            Shape::Tree => {
                let Some(parents) = &self.topology.parents else {
                    return Err(invalid("tree topology needs `parents`"));
                };
                let n = parents.len() + 1;
                let mut layout: Vec<Option<usize>> = vec![None];
                for (k, &p) in parents.iter().enumerate() {
                    let child = k + 1;
                    if p as usize >= child {
                        return Err(invalid(format!(
                            "parent of node {child} must be an earlier node"
                        )));
                    }
                    layout.push(Some(p as usize));
                }
                let positions = topology::tree_layout(&layout, self.topology.spacing);
                let parent_ids = (0..n)
                    .map(|i| layout[i].map(|p| p as NodeId))
                    .collect();
                Ok((positions, Some(parent_ids)))
            }
        }
    }

    fn resolve_sources(
        &self,
        n: usize,
        parents: Option<&[Option<NodeId>]>,
    ) -> Result<Vec<NodeId>, ScenarioError> {
        let sink = self.traffic.sink;
        match &self.traffic.sources {
            SourceSel::Named(name) if name == "all" => Ok((0..n as u16)
                .filter(|&i| i != sink)
                .collect()),
            SourceSel::Named(name) if name == "leaves" => {
                let Some(parents) = parents else {
                    return Err(invalid(
                        "`leaves` sources need a shape with parent pointers",
                    ));
                };
                let mut has_child = vec![false; n];
                for p in parents.iter().flatten() {
                    has_child[usize::from(*p)] = true;
                }
                Ok((0..n as u16)
                    .filter(|&i| i != sink && !has_child[usize::from(i)])
                    .collect())
            }
            SourceSel::Named(name) => Err(invalid(format!(
                "unknown source selector {name:?} (expected \"all\", \"leaves\" or a node list)"
            ))),
            SourceSel::List(list) => {
                for &node in list {
                    if usize::from(node) >= n {
                        return Err(invalid(format!("source node {node} does not exist")));
                    }
                    if node == sink {
                        return Err(invalid("the sink cannot be a traffic source"));
                    }
                }
                Ok(list.clone())
            }
        }
    }
}

/// Greedy fixed next hops toward node 0 using full topology knowledge:
/// each node forwards to its closest-to-sink neighbor in range.
fn greedy_hops(positions: &[Pos], comm_range: f64) -> Result<Vec<Option<NodeId>>, ScenarioError> {
    let sink_pos = positions[0];
    let mut hops = Vec::with_capacity(positions.len());
    for (i, &pos) in positions.iter().enumerate() {
        if i == 0 {
            hops.push(None);
            continue;
        }
        let d_self = topology::dist(pos, sink_pos);
        let mut best: Option<(f64, NodeId)> = None;
        for (j, &other) in positions.iter().enumerate() {
            if j == i || topology::dist(pos, other) > comm_range {
                continue;
            }
            let d = topology::dist(other, sink_pos);
            if d < d_self - 1e-9 {
                let better = match best {
                    Some((bd, bj)) => (d, j as NodeId) < (bd, bj),
                    None => true,
                };
                if better {
                    best = Some((d, j as NodeId));
                }
            }
        }
        match best {
            Some((_, j)) => hops.push(Some(j)),
            None => {
                return Err(invalid(format!(
                    "node {i} has no neighbor closer to the sink; the topology is disconnected"
                )))
            }
        }
    }
    Ok(hops)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Scenario {
        Scenario {
            version: 1,
            seed: 7,
            topology: Topology {
                shape: Shape::Line,
                nodes: Some(4),
                rings: None,
                parents: None,
                spacing: 50.0,
            },
            radio: Radio {
                comm_range: 85.0,
                interference_range: None,
                channels: vec![11, 12, 13, 14],
                common_channel: None,
            },
            mac: Mac {
                stack: Stack::Dsme,
                so: 3,
                mo: 4,
                bo: 6,
                cap_reduction: false,
                min_be: None,
                max_be: None,
                max_backoffs: None,
                max_retries: None,
                expiration_threshold: None,
                response_wait: None,
                queue_capacity: None,
                alpha: 0.5,
                hysteresis: true,
                depreciation_threshold: None,
                election_probability: 0.33,
                lease_msf: 200,
                drift_ppm: 0.0,
            },
            traffic: Traffic {
                pattern: PatternKind::Poisson,
                rate_hz: 1.0,
                payload: 75,
                sources: SourceSel::default(),
                packets_per_source: 10,
                sink: 0,
            },
            routing: Routing { mode: None },
            timing: Timing {
                setup_s: 30.0,
                max_s: 300.0,
                cooldown_s: 5.0,
            },
        }
    }

    #[test]
    fn builds_line_scenario() {
        let built = base().build().unwrap();
        assert_eq!(built.positions.len(), 4);
        assert_eq!(built.sources.len(), 3);
        assert!(built.audit_grid.is_some());
        assert_eq!(built.interference_range, 170.0);
        assert!(matches!(built.nodes[0], NodeSetup::Dsme(_)));
    }

    #[test]
    fn drift_disables_audit_grid() {
        let mut s = base();
        s.mac.drift_ppm = 40.0;
        let built = s.build().unwrap();
        assert!(built.audit_grid.is_none());
    }

    #[test]
    fn rejects_bad_version_and_orders() {
        let mut s = base();
        s.version = 2;
        assert_eq!(s.build().unwrap_err(), ScenarioError::Version(2));

        let mut s = base();
        s.mac.so = 5;
        s.mac.mo = 4;
        assert!(matches!(s.build(), Err(ScenarioError::Orders(_))));

        let mut s = base();
        s.mac.bo = 12;
        s.mac.mo = 12;
        assert!(matches!(s.build(), Err(ScenarioError::Invalid(_))));
    }

    #[test]
    fn csma_uses_greedy_chains() {
        let mut s = base();
        s.mac.stack = Stack::Csma;
        let built = s.build().unwrap();
        match &built.nodes[3] {
            NodeSetup::Csma(c) => assert_eq!(c.next_hop, Some(2)),
            _ => panic!("expected contention-only node"),
        }
        assert!(built.audit_grid.is_none());
    }

    #[test]
    fn tree_leaves_selected() {
        let mut s = base();
        s.topology = Topology {
            shape: Shape::Tree,
            nodes: None,
            rings: None,
            parents: Some(vec![0, 0, 1, 1]),
            spacing: 40.0,
        };
        s.traffic.sources = SourceSel::Named("leaves".into());
        let built = s.build().unwrap();
        let origins: Vec<u16> = built.sources.iter().map(|s| s.node).collect();
        assert_eq!(origins, vec![2, 3, 4]);
    }

    #[test]
    fn disconnected_greedy_rejected() {
        let mut s = base();
        s.mac.stack = Stack::Csma;
        s.radio.comm_range = 30.0;
        assert!(matches!(s.build(), Err(ScenarioError::Invalid(_))));
    }
}
