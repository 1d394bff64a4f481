//! The whole method in one call: liveness, decomposition, then a pattern
//! check for every essential subnetwork that is not a single component.

use std::fmt::Write;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::decomposition::{decompose_unchecked, DecompError, DecompositionResult, Verdict};
use crate::network::{check_live, CommGraph, LivenessReport, Network, NetworkError};
use crate::oracle::{explore_global, OracleError, OracleReport, SnapshotGraph};
use crate::par::par_map;
use crate::patterns::{check_pattern, PatternDescriptor, PatternError, PatternVerdict, Scope};

/// Bumped whenever the JSON layout changes incompatibly.
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum DpaError {
    #[error("liveness: {0}")]
    Liveness(NetworkError),
    #[error("decomposition: {0}")]
    Decomposition(DecompError),
    #[error("pattern for {{{subnetwork}}}: {source}")]
    Pattern { subnetwork: String, source: Box<PatternError> },
    #[error("descriptors {first} and {second} both describe {{{subnetwork}}}")]
    AmbiguousDescriptor { subnetwork: String, first: usize, second: usize },
    #[error("oracle: {0}")]
    Oracle(OracleError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DpaOptions {
    /// Also explore the global state space.
    pub oracle: bool,
    pub oracle_limit: usize,
}

impl Default for DpaOptions {
    fn default() -> Self {
        DpaOptions { oracle: false, oracle_limit: 2_000_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Overall {
    Proven,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubnetworkReport {
    pub members: Vec<usize>,
    pub names: Vec<String>,
    /// Index into the descriptor list, when one applied.
    pub descriptor: Option<usize>,
    pub pattern: Option<String>,
    pub verdict: Option<PatternVerdict>,
}

impl SubnetworkReport {
    pub fn is_singular(&self) -> bool {
        self.members.len() == 1
    }

    pub fn discharged(&self) -> bool {
        self.is_singular() || self.verdict.as_ref().is_some_and(|v| v.adherent)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timings {
    #[serde(with = "crate::duration_ms")]
    pub liveness: Duration,
    #[serde(with = "crate::duration_ms")]
    pub bridges: Duration,
    #[serde(with = "crate::duration_ms")]
    pub conflicts: Duration,
    /// Wall clock of the whole pattern phase.
    #[serde(with = "crate::duration_ms")]
    pub patterns: Duration,
    /// Summed over subnetworks, so these may exceed `patterns` when run in parallel.
    #[serde(with = "crate::duration_ms")]
    pub structural: Duration,
    #[serde(with = "crate::duration_ms")]
    pub behavioural: Duration,
    #[serde(with = "crate::duration_ms")]
    pub oracle: Duration,
    #[serde(with = "crate::duration_ms")]
    pub total: Duration,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DpaReport {
    pub version: u32,
    pub components: Vec<String>,
    pub liveness: LivenessReport,
    /// Absent when the network is not live.
    pub decomposition: Option<DecompositionResult>,
    pub subnetworks: Vec<SubnetworkReport>,
    pub overall: Overall,
    pub reasons: Vec<String>,
    pub warnings: Vec<String>,
    pub timings: Timings,
    pub oracle: Option<OracleReport>,
}

impl DpaReport {
    pub fn is_proven(&self) -> bool {
        self.overall == Overall::Proven
    }
}

fn member_names(net: &Network, members: &[usize]) -> Vec<String> {
    members.iter().map(|&m| net.name(m).to_string()).collect()
}

/// Pair each essential subnetwork with the descriptor naming exactly its
/// components. Descriptors matching nothing are reported as warnings.
fn bind(
    net: &Network,
    subnets: &[Vec<usize>],
    descriptors: &[PatternDescriptor],
    warnings: &mut Vec<String>,
) -> Result<Vec<Option<usize>>, DpaError> {
    let mut bound = vec![None; subnets.len()];
    for (k, d) in descriptors.iter().enumerate() {
        let comps = d.components();
        match subnets.iter().position(|s| *s == comps) {
            Some(i) => {
                if let Some(first) = bound[i] {
                    return Err(DpaError::AmbiguousDescriptor { subnetwork: member_names(net, &subnets[i]).join(", "), first, second: k });
                }
                bound[i] = Some(k);
            }
            None => warnings.push(format!(
                "descriptor {k} ({}) over {{{}}} matches no essential subnetwork",
                d.name(),
                member_names(net, &comps).join(", ")
            )),
        }
    }
    Ok(bound)
}

pub fn run_dpa(net: &Network, descriptors: &[PatternDescriptor], opts: &DpaOptions) -> Result<DpaReport, DpaError> {
    let start = Instant::now();
    let mut timings = Timings::default();
    let mut reasons = Vec::new();
    let mut warnings = Vec::new();

    let t = Instant::now();
    let liveness = check_live(net).map_err(DpaError::Liveness)?;
    timings.liveness = t.elapsed();

    let mut decomposition = None;
    let mut subnetworks = Vec::new();
    if liveness.is_live() {
        let d = decompose_unchecked(net).map_err(DpaError::Decomposition)?;
        timings.bridges = d.bridges_time;
        timings.conflicts = d.conflicts_time;
        warnings.extend(d.warnings.iter().cloned());
        let bound = bind(net, &d.essential_subnetworks, descriptors, &mut warnings)?;

        let t = Instant::now();
        let jobs: Vec<(usize, Option<usize>)> = bound.iter().copied().enumerate().collect();
        let subnets = &d.essential_subnetworks;
        let verdicts: Vec<Result<Option<PatternVerdict>, DpaError>> = par_map(&jobs, |&(i, k)| {
            let members = &subnets[i];
            let Some(k) = k.filter(|_| members.len() > 1) else { return Ok(None) };
            let err = |source| DpaError::Pattern { subnetwork: member_names(net, members).join(", "), source: Box::new(source) };
            let scope = Scope::new(net, members).map_err(err)?;
            check_pattern(&descriptors[k], &scope).map(Some).map_err(err)
        });
        timings.patterns = t.elapsed();

        for ((members, k), v) in subnets.iter().zip(bound).zip(verdicts) {
            let verdict = v?;
            if let Some(v) = &verdict {
                timings.structural += v.structural_time;
                timings.behavioural += v.behavioural_time;
            }
            let sub = SubnetworkReport {
                names: member_names(net, members),
                members: members.clone(),
                descriptor: k.filter(|_| members.len() > 1),
                pattern: verdict.as_ref().map(|v| v.pattern.clone()),
                verdict,
            };
            if !sub.discharged() {
                let what = format!("{{{}}}", sub.names.join(", "));
                match &sub.verdict {
                    None => reasons.push(format!("no pattern descriptor for essential subnetwork {what}")),
                    Some(v) => {
                        let fs = v.failures();
                        if fs.is_empty() {
                            reasons.push(format!("{} in {what}: not adherent", v.pattern));
                        }
                        for f in fs {
                            reasons.push(format!("{} in {what}: {f}", v.pattern));
                        }
                    }
                }
            }
            subnetworks.push(sub);
        }
        decomposition = Some(d);
    } else {
        reasons.extend(liveness.reasons().into_iter().map(|r| format!("not live: {r}")));
    }

    let oracle = if opts.oracle {
        let t = Instant::now();
        let r = explore_global(net, opts.oracle_limit).map_err(DpaError::Oracle)?;
        timings.oracle = t.elapsed();
        Some(r)
    } else {
        None
    };
    timings.total = start.elapsed();
    let overall = if reasons.is_empty() { Overall::Proven } else { Overall::Inconclusive };
    Ok(DpaReport {
        version: REPORT_VERSION,
        components: member_names(net, &(0..net.len()).collect::<Vec<_>>()),
        liveness,
        decomposition,
        subnetworks,
        overall,
        reasons,
        warnings,
        timings,
        oracle,
    })
}

pub fn emit_report(r: &DpaReport) -> String {
    serde_json::to_string_pretty(r).expect("reports serialise")
}

pub fn parse_report(s: &str) -> serde_json::Result<DpaReport> {
    serde_json::from_str(s)
}

fn ms(d: Duration) -> String {
    format!("{:.1} ms", d.as_secs_f64() * 1000.0)
}

/// Plain-text summary for a terminal.
pub fn summarise(net: &Network, r: &DpaReport) -> String {
    let mut out = String::new();
    let name = |i: usize| r.components.get(i).map(String::as_str).unwrap_or("?");
    writeln!(out, "components: {}", r.components.len()).unwrap();
    writeln!(out, "live: {}", if r.liveness.is_live() { "yes" } else { "no" }).unwrap();
    if let Some(d) = &r.decomposition {
        let edges = |es: &[(usize, usize)]| es.iter().map(|&(a, b)| format!("({}, {})", name(a), name(b))).collect::<Vec<_>>().join(" ");
        writeln!(out, "bridges: {}", d.bridges.len()).unwrap();
        for c in &d.checks {
            let v = match &c.verdict {
                Verdict::ConflictFree => "conflict-free".to_string(),
                Verdict::PossibleConflict(cex) => {
                    format!("possible conflict: {} after <{}>", net.describe_violation(cex), net.render_trace(&cex.trace).join(", "))
                }
            };
            writeln!(out, "  ({}, {}): {v}", name(c.edge.0), name(c.edge.1)).unwrap();
        }
        writeln!(out, "removed edges: {}", edges(&d.removed_edges)).unwrap();
        writeln!(out, "essential subnetworks: {}", d.essential_subnetworks.len()).unwrap();
    }
    for s in r.subnetworks.iter().filter(|s| !s.is_singular()) {
        let status = match &s.verdict {
            None => "no descriptor".to_string(),
            Some(v) if v.adherent => format!("{} adherent", v.pattern),
            Some(v) => format!("{} not adherent", v.pattern),
        };
        writeln!(out, "  {{{}}}: {status}", s.names.join(", ")).unwrap();
    }
    for w in &r.warnings {
        writeln!(out, "warning: {w}").unwrap();
    }
    match r.overall {
        Overall::Proven => writeln!(out, "result: deadlock free (proven)").unwrap(),
        Overall::Inconclusive => {
            writeln!(out, "result: inconclusive").unwrap();
            for reason in &r.reasons {
                writeln!(out, "  - {reason}").unwrap();
            }
        }
    }
    if let Some(o) = &r.oracle {
        let v = match &o.verdict {
            crate::oracle::OracleVerdict::DeadlockFree => "deadlock free".to_string(),
            crate::oracle::OracleVerdict::Deadlock(w) => format!(
                "deadlock after <{}>; ungranted cycle {}",
                w.trace.join(", "),
                w.cycle.iter().map(|&i| name(i)).collect::<Vec<_>>().join(" -> ")
            ),
            crate::oracle::OracleVerdict::LimitReached { frontier } => format!("state limit reached with {frontier} states pending"),
        };
        writeln!(out, "oracle: {v} ({} states, {})", o.states, ms(o.elapsed)).unwrap();
    }
    let t = &r.timings;
    writeln!(
        out,
        "time: liveness {}, bridges {}, conflicts {}, patterns {} (structural {}, behavioural {}), total {}",
        ms(t.liveness),
        ms(t.bridges),
        ms(t.conflicts),
        ms(t.patterns),
        ms(t.structural),
        ms(t.behavioural),
        ms(t.total)
    )
    .unwrap();
    out
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Undirected DOT for the communication graph. Edges in `removed` are drawn
/// dashed, so one call renders the graph before and after decomposition.
pub fn comm_graph_dot(net: &Network, g: &CommGraph, removed: &[(usize, usize)]) -> String {
    let mut out = String::from("graph comm {\n");
    for i in 0..g.nodes {
        writeln!(out, "  n{i} [label={}];", quote(net.name(i))).unwrap();
    }
    for e in &g.edges {
        let style = if removed.contains(&(e.a, e.b)) { " [style=dashed]" } else { "" };
        writeln!(out, "  n{} -- n{}{style};", e.a, e.b).unwrap();
    }
    out.push_str("}\n");
    out
}

/// Directed DOT for a snapshot graph; arcs on `cycle` are drawn bold.
pub fn snapshot_dot(net: &Network, g: &SnapshotGraph, cycle: &[usize]) -> String {
    let on_cycle = |a: usize, b: usize| {
        let n = cycle.len();
        (0..n).any(|k| cycle[k] == a && cycle[(k + 1) % n] == b)
    };
    let mut out = String::from("digraph snapshot {\n");
    let mut nodes: Vec<usize> = g.arcs.iter().flat_map(|a| [a.from, a.to]).collect();
    nodes.sort_unstable();
    nodes.dedup();
    for i in nodes {
        writeln!(out, "  n{i} [label={}];", quote(net.name(i))).unwrap();
    }
    for a in &g.arcs {
        let label = quote(&net.fmt_events(&a.requested));
        let bold = if on_cycle(a.from, a.to) { ", style=bold" } else { "" };
        writeln!(out, "  n{} -> n{} [label={label}{bold}];", a.from, a.to).unwrap();
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{load_network, parse_descriptor};

    const APHILS: &str = include_str!("../../../models/aphils.net");
    const APHILS_PATTERN: &str = include_str!("../../../models/aphils.pattern.json");
    const PHILS: &str = include_str!("../../../models/phils.net");
    const PHILS_PATTERN: &str = include_str!("../../../models/phils.pattern.json");
    const RINGBUFFER: &str = include_str!("../../../models/ringbuffer.net");

    fn run(src: &str, pattern: Option<&str>, oracle: bool) -> (Network, DpaReport) {
        let net = load_network(src).unwrap().network;
        let descs: Vec<PatternDescriptor> = pattern.map(|p| parse_descriptor(p, &net).unwrap()).into_iter().collect();
        let r = run_dpa(&net, &descs, &DpaOptions { oracle, ..Default::default() }).unwrap();
        (net, r)
    }

    #[test]
    fn ringbuffer_needs_no_descriptor() {
        let (_, r) = run(RINGBUFFER, None, false);
        assert!(r.is_proven(), "{:?}", r.reasons);
        assert!(r.decomposition.unwrap().all_singular);
    }

    #[test]
    fn asymmetric_philosophers_are_proven() {
        let (_, r) = run(APHILS, Some(APHILS_PATTERN), true);
        assert!(r.is_proven(), "{:?}", r.reasons);
        assert!(r.oracle.unwrap().is_deadlock_free());
    }

    #[test]
    fn missing_descriptor_is_inconclusive() {
        let (_, r) = run(APHILS, None, false);
        assert_eq!(r.overall, Overall::Inconclusive);
        assert!(r.reasons[0].starts_with("no pattern descriptor"), "{:?}", r.reasons);
    }

    #[test]
    fn symmetric_philosophers_name_the_wrap_around() {
        let (net, r) = run(PHILS, Some(PHILS_PATTERN), true);
        assert_eq!(r.overall, Overall::Inconclusive);
        assert!(r.reasons.iter().any(|s| s.contains("Phil.2") && s.contains("respects_order")), "{:?}", r.reasons);
        let w = r.oracle.as_ref().unwrap().witness().unwrap().clone();
        let dot = snapshot_dot(&net, &w.snapshot, &w.cycle);
        assert_eq!(dot.matches("->").count(), 6);
        assert_eq!(dot.matches("style=bold").count(), 6);
    }

    #[test]
    fn json_round_trips() {
        let (_, r) = run(PHILS, Some(PHILS_PATTERN), true);
        let text = emit_report(&r);
        let back = parse_report(&text).unwrap();
        assert_eq!(back.overall, r.overall);
        assert_eq!(back.reasons, r.reasons);
        assert_eq!(back.subnetworks, r.subnetworks);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["overall"], "inconclusive");
        for phase in ["liveness", "bridges", "conflicts", "patterns"] {
            assert!(v["timings"][phase].is_number(), "{phase}");
        }
    }

    #[test]
    fn comm_graph_dot_for_ringbuffer() {
        let net = load_network(RINGBUFFER).unwrap().network;
        let dot = comm_graph_dot(&net, &net.comm_graph(), &[]);
        assert!(dot.starts_with("graph comm {"));
        assert_eq!(dot.matches("[label=").count(), 4);
        assert_eq!(dot.matches(" -- ").count(), 3);
    }

    #[test]
    fn empty_snapshot_is_header_only() {
        let net = load_network(RINGBUFFER).unwrap().network;
        assert_eq!(snapshot_dot(&net, &SnapshotGraph { nodes: 4, arcs: vec![] }, &[]), "digraph snapshot {\n}\n");
    }

    #[test]
    fn duplicate_descriptors_are_ambiguous() {
        let net = load_network(APHILS).unwrap().network;
        let d = parse_descriptor(APHILS_PATTERN, &net).unwrap();
        let err = run_dpa(&net, &[d.clone(), d], &DpaOptions::default()).unwrap_err();
        assert!(matches!(err, DpaError::AmbiguousDescriptor { first: 0, second: 1, .. }));
    }
}
