//! Interaction graphs: systems as nodes, typed interaction edges, the
//! DS/IS partition, promotion of potential destruction, and DOT export.
//!
//! "Parts" of a system at several locations are location tags on a single
//! node. Potential destruction is a self-edge across those tags, and
//! promoting it leaves one surviving tag. Timestamps are logical scenario
//! times and must never decrease.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    Generator,
    NonGenerator,
    Initiator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemNode {
    pub id: String,
    pub kind: NodeKind,
    /// Set for generators and always for initiators.
    pub generator: bool,
    pub locations: BTreeSet<String>,
    /// The node has acquired a determinate value at some point.
    pub determinate: bool,
}

impl SystemNode {
    pub fn new(id: impl Into<String>, kind: NodeKind) -> Self {
        Self {
            id: id.into(),
            kind,
            generator: kind != NodeKind::NonGenerator,
            locations: BTreeSet::new(),
            determinate: false,
        }
    }

    pub fn generator(id: impl Into<String>) -> Self {
        Self::new(id, NodeKind::Generator)
    }

    pub fn non_generator(id: impl Into<String>) -> Self {
        Self::new(id, NodeKind::NonGenerator)
    }

    pub fn initiator(id: impl Into<String>) -> Self {
        Self::new(id, NodeKind::Initiator)
    }

    pub fn at<I, S>(mut self, locations: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.locations.extend(locations.into_iter().map(Into::into));
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeKind {
    Sdi,
    Udi,
    PotentialDestruction,
    Destruction,
}

impl EdgeKind {
    /// SDI and Destruction mark determination structures.
    pub fn is_ds_class(self) -> bool {
        matches!(self, EdgeKind::Sdi | EdgeKind::Destruction)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub kind: EdgeKind,
    pub directed: bool,
    pub created_at: f64,
    /// Location tags for self-edges: `(surviving, destroyed)` for
    /// destruction, the two lowest tags for potential destruction.
    pub parts: Option<(String, String)>,
    /// No longer active; kept for the record and drawn grey.
    pub retired: bool,
}

impl Edge {
    pub fn touches(&self, id: &str) -> bool {
        self.from == id || self.to == id
    }

    fn other(&self, id: &str) -> &str {
        if self.from == id {
            &self.to
        } else {
            &self.from
        }
    }
}

/// What happens to the UDIs of a node once it joins a DS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum UdiPolicy {
    /// Undirected and outgoing UDIs become SDIs, recursively (collapse and
    /// quasi-local branching).
    #[default]
    Propagate,
    /// The UDIs are retired without differentiating the partner.
    Detach,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Membership {
    Ds(usize),
    Is(usize),
}

impl Membership {
    pub fn is_ds(self) -> bool {
        matches!(self, Membership::Ds(_))
    }
}

pub type Partition = BTreeMap<String, Membership>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureGraph {
    nodes: BTreeMap<String, SystemNode>,
    edges: Vec<Edge>,
    policy: UdiPolicy,
    clock: Option<f64>,
    #[serde(skip)]
    cache: OnceLock<Result<Partition>>,
}

impl PartialEq for StructureGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges && self.policy == other.policy
    }
}

impl Default for StructureGraph {
    fn default() -> Self {
        Self::new(UdiPolicy::default())
    }
}

impl StructureGraph {
    pub fn new(policy: UdiPolicy) -> Self {
        Self {
            nodes: BTreeMap::new(),
            edges: Vec::new(),
            policy,
            clock: None,
            cache: OnceLock::new(),
        }
    }

    pub fn policy(&self) -> UdiPolicy {
        self.policy
    }

    pub fn set_policy(&mut self, policy: UdiPolicy) {
        self.policy = policy;
    }

    pub fn add_node(&mut self, node: SystemNode) -> Result<()> {
        if self.nodes.contains_key(&node.id) {
            return Err(Error::invalid(format!("node '{}' already exists", node.id)));
        }
        self.nodes.insert(node.id.clone(), node);
        self.touch();
        Ok(())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn node(&self, id: &str) -> Option<&SystemNode> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &SystemNode> {
        self.nodes.values()
    }

    /// All edges in creation order, retired ones included.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn active_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| !e.retired)
    }

    pub fn location_count(&self) -> usize {
        self.nodes.values().map(|n| n.locations.len()).sum()
    }

    pub fn has_potential_destruction(&self, id: &str) -> bool {
        self.active_edges()
            .any(|e| e.kind == EdgeKind::PotentialDestruction && e.touches(id))
    }

    /// The node has a determinate value or a DS-class edge.
    pub fn is_ds_node(&self, id: &str) -> bool {
        self.nodes.get(id).is_some_and(|n| n.determinate)
            || self.active_edges().any(|e| e.kind.is_ds_class() && e.touches(id))
    }

    /// True if an active edge of `kind` runs from `from` to `to` (either way
    /// when undirected).
    pub fn has_edge(&self, from: &str, to: &str, kind: EdgeKind) -> bool {
        self.active_edges().any(|e| {
            e.kind == kind && ((e.from == from && e.to == to) || (!e.directed && e.from == to && e.to == from))
        })
    }

    fn touch(&mut self) {
        self.cache = OnceLock::new();
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::invalid("edge timestamp must be finite"));
        }
        if let Some(last) = self.clock.filter(|&last| t < last) {
            return Err(Error::invalid(format!(
                "timestamp {t} precedes the latest event at {last}"
            )));
        }
        Ok(())
    }

    fn require(&self, id: &str) -> Result<&SystemNode> {
        self.nodes
            .get(id)
            .ok_or_else(|| Error::invalid(format!("unknown node '{id}'")))
    }

    /// Adds an interaction edge. Destruction edges only arise from
    /// [`Self::promote_destruction`].
    ///
    /// Adding an SDI makes both ends DS members and resolves their UDIs
    /// according to the graph's [`UdiPolicy`].
    pub fn add_interaction(&mut self, from: &str, to: &str, kind: EdgeKind, directed: bool, t: f64) -> Result<()> {
        self.check_time(t)?;
        let from_node = self.require(from)?;
        self.require(to)?;
        let mut parts = None;
        match kind {
            EdgeKind::Sdi if !directed => return Err(Error::invalid("an SDI must be directed")),
            EdgeKind::Destruction => {
                return Err(Error::invalid(
                    "destruction edges arise only by promoting a potential destruction",
                ))
            }
            EdgeKind::PotentialDestruction => {
                if directed {
                    return Err(Error::invalid("potential destruction is undirected"));
                }
                if from != to {
                    return Err(Error::invalid("potential destruction relates parts of a single system"));
                }
                if from_node.locations.len() < 2 {
                    return Err(Error::invalid(format!("'{from}' needs at least two location tags")));
                }
                if self.has_potential_destruction(from) {
                    return Err(Error::invalid(format!("'{from}' already has a potential destruction")));
                }
                let mut tags = from_node.locations.iter();
                parts = Some((tags.next().unwrap().clone(), tags.next().unwrap().clone()));
            }
            _ if from == to => return Err(Error::invalid(format!("self-interaction on '{from}' is not allowed"))),
            _ => {}
        }
        if !kind.is_ds_class() {
            for id in [from, to] {
                if self.is_ds_node(id) {
                    return Err(Error::invalid(format!(
                        "'{id}' is in a DS and cannot take an {kind:?} edge"
                    )));
                }
            }
        } else {
            for id in [from, to] {
                if self.has_potential_destruction(id) {
                    return Err(Error::invalid(format!(
                        "'{id}' has an unpromoted potential destruction"
                    )));
                }
            }
        }
        self.edges.push(Edge {
            from: from.to_string(),
            to: to.to_string(),
            kind,
            directed,
            created_at: t,
            parts,
            retired: false,
        });
        self.clock = Some(t);
        if kind == EdgeKind::Sdi {
            self.resolve_udis(from, t);
            self.resolve_udis(to, t);
        }
        self.touch();
        Ok(())
    }

    /// Raises the generator flag on `id`.
    pub fn set_generator(&mut self, id: &str) -> Result<()> {
        self.nodes
            .get_mut(id)
            .ok_or_else(|| Error::invalid(format!("unknown node '{id}'")))?
            .generator = true;
        Ok(())
    }

    /// Flags `id` as having a determinate value, which makes it a DS member.
    pub fn mark_determinate(&mut self, id: &str, t: f64) -> Result<()> {
        self.check_time(t)?;
        self.require(id)?;
        if self.has_potential_destruction(id) {
            return Err(Error::invalid(format!(
                "'{id}' has an unpromoted potential destruction"
            )));
        }
        self.nodes.get_mut(id).expect("checked above").determinate = true;
        self.clock = Some(t);
        self.resolve_udis(id, t);
        self.touch();
        Ok(())
    }

    fn resolve_udis(&mut self, id: &str, t: f64) {
        let mut queue = vec![id.to_string()];
        while let Some(cur) = queue.pop() {
            let pending: Vec<usize> = (0..self.edges.len())
                .filter(|&i| {
                    let e = &self.edges[i];
                    !e.retired && e.kind == EdgeKind::Udi && e.touches(&cur)
                })
                .collect();
            for i in pending {
                self.edges[i].retired = true;
                let e = &self.edges[i];
                let incoming = e.directed && e.to == cur;
                let other = e.other(&cur).to_string();
                if incoming || self.policy == UdiPolicy::Detach || self.has_potential_destruction(&other) {
                    continue;
                }
                self.edges.push(Edge {
                    from: cur.clone(),
                    to: other.clone(),
                    kind: EdgeKind::Sdi,
                    directed: true,
                    created_at: t,
                    parts: None,
                    retired: false,
                });
                queue.push(other);
            }
        }
    }

    /// Turns the potential destruction on `id` into destruction edges from
    /// `surviving` to every other location tag and drops those tags.
    pub fn promote_destruction(&mut self, id: &str, surviving: &str, t: f64) -> Result<()> {
        self.check_time(t)?;
        let node = self.require(id)?;
        if node.locations.len() < 2 {
            return Err(Error::invalid(format!("'{id}' has fewer than two location tags")));
        }
        if !node.locations.contains(surviving) {
            return Err(Error::invalid(format!("'{id}' has no location '{surviving}'")));
        }
        let destroyed: Vec<String> = node.locations.iter().filter(|l| *l != surviving).cloned().collect();
        let pd = self
            .edges
            .iter()
            .position(|e| !e.retired && e.kind == EdgeKind::PotentialDestruction && e.touches(id))
            .ok_or_else(|| Error::invalid(format!("'{id}' has no potential destruction to promote")))?;
        self.edges.remove(pd);
        for tag in &destroyed {
            self.edges.push(Edge {
                from: id.to_string(),
                to: id.to_string(),
                kind: EdgeKind::Destruction,
                directed: true,
                created_at: t,
                parts: Some((surviving.to_string(), tag.clone())),
                retired: false,
            });
        }
        let node = self.nodes.get_mut(id).expect("checked above");
        node.locations.retain(|l| l == surviving);
        self.clock = Some(t);
        self.resolve_udis(id, t);
        self.touch();
        Ok(())
    }

    /// Connected components per edge class. Isolated nodes without a
    /// determinate value are IS singletons. Component ids are numbered in
    /// lexicographic order of each component's smallest member.
    pub fn partition(&self) -> Result<Partition> {
        self.cache.get_or_init(|| self.compute_partition()).clone()
    }

    fn compute_partition(&self) -> Result<Partition> {
        let ids: Vec<&str> = self.nodes.keys().map(String::as_str).collect();
        let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let mut ds = vec![false; ids.len()];
        let mut is = vec![false; ids.len()];
        for (i, id) in ids.iter().enumerate() {
            ds[i] = self.nodes[*id].determinate;
        }
        for e in self.active_edges() {
            for end in [&e.from, &e.to] {
                let i = *index
                    .get(end.as_str())
                    .ok_or_else(|| Error::integrity(format!("edge references missing node '{end}'")))?;
                if e.kind.is_ds_class() {
                    ds[i] = true;
                } else {
                    is[i] = true;
                }
            }
        }
        if let Some(i) = (0..ids.len()).find(|&i| ds[i] && is[i]) {
            return Err(Error::integrity(format!(
                "node '{}' carries both determination and indetermination edges",
                ids[i]
            )));
        }

        let mut parent: Vec<usize> = (0..ids.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in self.active_edges() {
            let (a, b) = (
                find(&mut parent, index[e.from.as_str()]),
                find(&mut parent, index[e.to.as_str()]),
            );
            // the smaller index becomes root, so roots are each component's minimum
            let (lo, hi) = (a.min(b), a.max(b));
            parent[hi] = lo;
        }
        let mut numbering: BTreeMap<(bool, usize), usize> = BTreeMap::new();
        let (mut next_ds, mut next_is) = (0, 0);
        let mut out = Partition::new();
        for (i, id) in ids.iter().enumerate() {
            let root = find(&mut parent, i);
            let key = (ds[i], root);
            let n = *numbering.entry(key).or_insert_with(|| {
                let counter = if ds[i] { &mut next_ds } else { &mut next_is };
                *counter += 1;
                *counter - 1
            });
            out.insert(
                id.to_string(),
                if ds[i] { Membership::Ds(n) } else { Membership::Is(n) },
            );
        }
        Ok(out)
    }

    /// Members of every component, keyed by membership.
    pub fn components(&self) -> Result<BTreeMap<Membership, Vec<String>>> {
        let mut out: BTreeMap<Membership, Vec<String>> = BTreeMap::new();
        for (id, m) in self.partition()? {
            out.entry(m).or_default().push(id);
        }
        Ok(out)
    }

    /// DOT digraph. Nodes and edges appear in lexicographic order. DS nodes
    /// are drawn black and IS nodes grey.
    pub fn export_dot(&self) -> String {
        let partition = self.partition().ok();
        let mut out = String::from("digraph structure {\n");
        for id in self.nodes.keys() {
            let ds = partition.as_ref().and_then(|p| p.get(id)).is_some_and(|m| m.is_ds());
            let color = if ds { "black" } else { "grey" };
            let node = &self.nodes[id];
            let mut label = escape(id);
            if !node.locations.is_empty() {
                let tags: Vec<String> = node.locations.iter().map(|l| escape(l)).collect();
                let _ = write!(label, " @ {}", tags.join(","));
            }
            let _ = writeln!(
                out,
                "  \"{}\" [label=\"{label}\", color={color}, fontcolor={color}];",
                escape(id)
            );
        }
        let mut order: Vec<&Edge> = self.edges.iter().collect();
        order.sort_by(|a, b| (&a.from, &a.to).cmp(&(&b.from, &b.to)));
        for e in order {
            let mut attrs = vec![match e.kind {
                EdgeKind::Sdi => "style=solid".to_string(),
                EdgeKind::Udi => "style=dashed".to_string(),
                EdgeKind::PotentialDestruction => "style=dotted".to_string(),
                EdgeKind::Destruction => "style=\"bold,dashed\"".to_string(),
            }];
            if !e.directed {
                attrs.push("dir=none".into());
            }
            if let Some((a, b)) = &e.parts {
                let sep = if e.kind == EdgeKind::Destruction { "->" } else { "|" };
                attrs.push(format!("label=\"{}{sep}{}\"", escape(a), escape(b)));
            }
            if e.retired {
                attrs.push("color=grey".into());
            }
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [{}];",
                escape(&e.from),
                escape(&e.to),
                attrs.join(", ")
            );
        }
        out.push_str("}\n");
        out
    }

    /// JSON snapshot of nodes, edges and policy.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serializes")
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(ids: &[&str]) -> StructureGraph {
        let mut g = StructureGraph::default();
        for id in ids {
            g.add_node(SystemNode::generator(*id)).unwrap();
        }
        g
    }

    /// Singlet pair, environment and detector whose pointer sits at two places.
    fn collapse_scenario() -> StructureGraph {
        let mut g = graph(&["A", "B", "E_B"]);
        g.add_node(SystemNode::generator("L_B").at(["up''", "down''"])).unwrap();
        g.add_interaction("A", "B", EdgeKind::Udi, false, 0.0).unwrap();
        g.add_interaction("L_B", "L_B", EdgeKind::PotentialDestruction, false, 1.0)
            .unwrap();
        g
    }

    #[test]
    fn singlet_udi_forms_one_is() {
        let mut g = graph(&["A", "B", "L"]);
        g.add_interaction("A", "B", EdgeKind::Udi, false, 0.0).unwrap();
        let p = g.partition().unwrap();
        assert_eq!(p["A"], p["B"]);
        assert!(!p["A"].is_ds());
        assert!(!p["L"].is_ds());
        assert_ne!(p["A"], p["L"]);
        assert_eq!(g.components().unwrap().len(), 2);
    }

    #[test]
    fn fresh_nodes_are_is_singletons() {
        let g = graph(&["x", "y", "z"]);
        let p = g.partition().unwrap();
        assert_eq!(
            p.values().copied().collect::<Vec<_>>(),
            vec![Membership::Is(0), Membership::Is(1), Membership::Is(2)]
        );
    }

    #[test]
    fn collapse_forms_a_single_ds() {
        let mut g = collapse_scenario();
        g.promote_destruction("L_B", "up''", 2.0).unwrap();
        g.add_interaction("L_B", "E_B", EdgeKind::Sdi, true, 2.0).unwrap();
        g.add_interaction("E_B", "B", EdgeKind::Sdi, true, 2.0).unwrap();
        let comps = g.components().unwrap();
        assert_eq!(comps.len(), 1);
        let (m, members) = comps.iter().next().unwrap();
        assert!(m.is_ds());
        assert_eq!(members, &vec!["A", "B", "E_B", "L_B"]);
        // the singlet UDI propagated from B outward
        assert!(g.has_edge("B", "A", EdgeKind::Sdi));
        let dot = g.export_dot();
        assert_eq!(dot.matches("style=\"bold,dashed\"").count(), 1);
        assert!(dot.contains("style=solid"));
        assert!(!dot.contains("color=grey, fontcolor=grey"));
    }

    #[test]
    fn undirected_sdi_and_direct_destruction_are_rejected() {
        let mut g = graph(&["A", "B"]);
        assert!(g.add_interaction("A", "B", EdgeKind::Sdi, false, 0.0).is_err());
        assert!(g.add_interaction("A", "B", EdgeKind::Destruction, true, 0.0).is_err());
        assert!(g.add_interaction("A", "C", EdgeKind::Udi, false, 0.0).is_err());
        assert!(g.add_interaction("A", "A", EdgeKind::Udi, false, 0.0).is_err());
        assert!(g
            .add_interaction("A", "B", EdgeKind::PotentialDestruction, false, 0.0)
            .is_err());
    }

    #[test]
    fn potential_destruction_self_edge_needs_two_tags() {
        let mut g = graph(&["S"]);
        assert!(g
            .add_interaction("S", "S", EdgeKind::PotentialDestruction, false, 0.0)
            .is_err());
        let mut g = StructureGraph::default();
        g.add_node(SystemNode::non_generator("S'").at(["up", "down"])).unwrap();
        g.add_interaction("S'", "S'", EdgeKind::PotentialDestruction, false, 0.0)
            .unwrap();
        assert!(g.has_potential_destruction("S'"));
        assert!(!g.partition().unwrap()["S'"].is_ds());
    }

    #[test]
    fn promotion_cases() {
        let mut g = StructureGraph::default();
        g.add_node(SystemNode::non_generator("S'").at(["up", "down"])).unwrap();
        g.add_node(SystemNode::non_generator("one").at(["here"])).unwrap();
        assert!(g.promote_destruction("one", "here", 0.0).is_err());
        assert!(g.promote_destruction("S'", "up", 0.0).is_err());
        g.add_interaction("S'", "S'", EdgeKind::PotentialDestruction, false, 0.0)
            .unwrap();
        let before = g.location_count();
        g.promote_destruction("S'", "up", 1.0).unwrap();
        assert!(g.location_count() < before);
        let n = g.node("S'").unwrap();
        assert_eq!(n.locations.iter().collect::<Vec<_>>(), vec!["up"]);
        let d: Vec<&Edge> = g.edges().iter().filter(|e| e.kind == EdgeKind::Destruction).collect();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].parts, Some(("up".into(), "down".into())));
        assert!(g.promote_destruction("S'", "up", 2.0).is_err());
    }

    #[test]
    fn timestamps_may_not_decrease() {
        let mut g = graph(&["A", "B", "C"]);
        g.add_interaction("A", "B", EdgeKind::Udi, false, 2.0).unwrap();
        assert!(g.add_interaction("B", "C", EdgeKind::Udi, false, 1.0).is_err());
        g.add_interaction("B", "C", EdgeKind::Udi, false, 2.0).unwrap();
    }

    #[test]
    fn detach_policy_retires_udis() {
        let mut g = graph(&["A", "B", "L"]);
        g.set_policy(UdiPolicy::Detach);
        g.add_interaction("A", "B", EdgeKind::Udi, false, 0.0).unwrap();
        g.add_interaction("L", "B", EdgeKind::Sdi, true, 1.0).unwrap();
        let p = g.partition().unwrap();
        assert!(p["B"].is_ds() && p["L"].is_ds());
        assert!(!p["A"].is_ds());
        assert!(g.edges().iter().any(|e| e.kind == EdgeKind::Udi && e.retired));
        assert!(g.export_dot().contains("color=grey]"));
    }

    #[test]
    fn incoming_directed_udi_is_retired_not_propagated() {
        let mut g = graph(&["X", "Y", "Z", "L"]);
        g.add_interaction("X", "Y", EdgeKind::Udi, true, 0.0).unwrap();
        g.add_interaction("Y", "Z", EdgeKind::Udi, true, 0.0).unwrap();
        g.add_interaction("L", "Y", EdgeKind::Sdi, true, 1.0).unwrap();
        let p = g.partition().unwrap();
        assert!(!p["X"].is_ds());
        assert!(p["Z"].is_ds());
        assert!(g.has_edge("Y", "Z", EdgeKind::Sdi));
    }

    #[test]
    fn is_edges_rejected_on_ds_nodes() {
        let mut g = graph(&["A", "B", "C"]);
        g.add_interaction("A", "B", EdgeKind::Sdi, true, 0.0).unwrap();
        assert!(g.add_interaction("B", "C", EdgeKind::Udi, false, 1.0).is_err());
        g.mark_determinate("C", 1.0).unwrap();
        assert!(g.partition().unwrap()["C"].is_ds());
    }

    #[test]
    fn sdi_onto_unpromoted_destruction_is_rejected() {
        let mut g = collapse_scenario();
        assert!(g.add_interaction("L_B", "E_B", EdgeKind::Sdi, true, 2.0).is_err());
        assert!(g.mark_determinate("L_B", 2.0).is_err());
    }

    #[test]
    fn empty_graph_dot_is_header_only() {
        assert_eq!(StructureGraph::default().export_dot(), "digraph structure {\n}\n");
    }

    #[test]
    fn json_snapshot_round_trips() {
        let g = collapse_scenario();
        let back: StructureGraph = serde_json::from_str(&g.to_json()).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.partition().unwrap(), g.partition().unwrap());
    }

    #[test]
    fn fresh_graph_json_round_trips() {
        let g = graph(&["a"]);
        let back: StructureGraph = serde_json::from_str(&g.to_json()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn initiators_are_generators() {
        let n = SystemNode::initiator("I");
        assert!(n.generator);
        assert!(!SystemNode::non_generator("N").generator);
    }
}
