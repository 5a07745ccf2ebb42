//! Typed, time-windowed multimodal simplicial complexes.
//!
//! A complex is built from one observation window of an [`EventStream`]:
//! Phase 1 forms the 1-skeleton from modality-specific thresholds, Phase 2
//! closes a triangle iff its three edges exist and the triad spans at least
//! two distinct node kinds. The complex is immutable once built; incidence
//! matrices are exact integer objects.

pub mod dtw;
pub mod events;
mod rank;
pub mod sweep;
mod union_find;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{GvfError, Result};
pub use events::{
    DwellRecord, EventStream, LinkRecord, LinkTargetKind, PhysRecord, ProxRecord,
};
pub use sweep::{sweep_thresholds, SweepPoint, SweepReport};

/// Physiological channel used for the synchrony pathway.
pub const SYNC_CHANNEL: &str = "hrv";

/// Role a vertex plays in the interaction complex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Agent,
    SpatialCell,
    EnvSensor,
    External,
}

impl NodeKind {
    fn order(self) -> u8 {
        match self {
            NodeKind::Agent => 0,
            NodeKind::SpatialCell => 1,
            NodeKind::EnvSensor => 2,
            NodeKind::External => 3,
        }
    }
}

/// A typed vertex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: String,
    pub kind: NodeKind,
}

/// Signed incidence matrix with entries in {-1, 0, +1}, stored per column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    nrows: usize,
    cols: Vec<Vec<(usize, i8)>>,
}

impl IncidenceMatrix {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    /// Entries `(row, sign)` of one column, sorted by row.
    pub fn column(&self, j: usize) -> &[(usize, i8)] {
        &self.cols[j]
    }

    /// All nonzero entries as `(row, col, value)` triplets.
    pub fn triplets(&self) -> Vec<(usize, usize, i64)> {
        let mut out = Vec::new();
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, s) in col {
                out.push((i, j, s as i64));
            }
        }
        out
    }

    /// Integer matrix product `self * rhs`, exact.
    pub fn multiply(&self, rhs: &IncidenceMatrix) -> Vec<(usize, usize, i64)> {
        assert_eq!(self.ncols(), rhs.nrows());
        let mut out = Vec::new();
        let mut acc: BTreeMap<usize, i64> = BTreeMap::new();
        for j in 0..rhs.ncols() {
            acc.clear();
            for &(k, sk) in rhs.column(j) {
                for &(i, si) in self.column(k) {
                    *acc.entry(i).or_insert(0) += (si as i64) * (sk as i64);
                }
            }
            for (&i, &v) in &acc {
                if v != 0 {
                    out.push((i, j, v));
                }
            }
        }
        out
    }
}

/// The complex for one window: typed vertices, oriented edges and triangles
/// in canonical order, and the signed incidence matrices B1, B2.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplicialComplex {
    vertices: Vec<Vertex>,
    edges: Vec<(usize, usize)>,
    triangles: Vec<(usize, usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    b1: IncidenceMatrix,
    b2: IncidenceMatrix,
}

impl SimplicialComplex {
    pub fn empty() -> Self {
        SimplicialComplex {
            vertices: Vec::new(),
            edges: Vec::new(),
            triangles: Vec::new(),
            neighbors: Vec::new(),
            b1: IncidenceMatrix {
                nrows: 0,
                cols: Vec::new(),
            },
            b2: IncidenceMatrix {
                nrows: 0,
                cols: Vec::new(),
            },
        }
    }

    /// Builds a complex from explicit simplices.
    ///
    /// Vertex order is taken as given (and becomes the canonical order);
    /// edges and triangles are normalised to ascending vertex ids, sorted,
    /// and deduplicated. Fails on dangling indices, missing bounding edges,
    /// or a triangle whose triad carries fewer than two distinct node kinds.
    pub fn from_parts(
        vertices: Vec<Vertex>,
        edges: Vec<(usize, usize)>,
        triangles: Vec<(usize, usize, usize)>,
    ) -> Result<Self> {
        let n = vertices.len();
        let mut seen = BTreeSet::new();
        for v in &vertices {
            if !seen.insert(v.id.as_str()) {
                return Err(GvfError::InvalidInput(format!(
                    "duplicate vertex id `{}`",
                    v.id
                )));
            }
        }

        let mut edge_set = BTreeSet::new();
        for &(a, b) in &edges {
            if a == b {
                return Err(GvfError::InvalidInput(format!("degenerate edge ({a},{a})")));
            }
            if a >= n || b >= n {
                return Err(GvfError::InvalidInput(format!(
                    "edge ({a},{b}) references missing vertex"
                )));
            }
            edge_set.insert((a.min(b), a.max(b)));
        }
        let edges: Vec<(usize, usize)> = edge_set.iter().copied().collect();

        let mut tri_set = BTreeSet::new();
        for &(a, b, c) in &triangles {
            let mut t = [a, b, c];
            t.sort_unstable();
            let [i, j, k] = t;
            if i == j || j == k {
                return Err(GvfError::InvalidInput(format!(
                    "degenerate triangle ({a},{b},{c})"
                )));
            }
            if k >= n {
                return Err(GvfError::InvalidInput(format!(
                    "triangle ({a},{b},{c}) references missing vertex"
                )));
            }
            for e in [(i, j), (i, k), (j, k)] {
                if !edge_set.contains(&e) {
                    return Err(GvfError::InvalidInput(format!(
                        "triangle ({i},{j},{k}) missing bounding edge ({},{})",
                        e.0, e.1
                    )));
                }
            }
            let kinds: BTreeSet<NodeKind> =
                [i, j, k].iter().map(|&v| vertices[v].kind).collect();
            if kinds.len() < 2 {
                return Err(GvfError::InvalidInput(format!(
                    "triangle ({i},{j},{k}) spans a single node kind"
                )));
            }
            tri_set.insert((i, j, k));
        }
        let triangles: Vec<(usize, usize, usize)> = tri_set.into_iter().collect();

        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in &edges {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }

        let edge_index: BTreeMap<(usize, usize), usize> = edges
            .iter()
            .enumerate()
            .map(|(idx, &e)| (e, idx))
            .collect();

        // B1: boundary of edge (i,j) is j - i.
        let b1 = IncidenceMatrix {
            nrows: n,
            cols: edges.iter().map(|&(i, j)| vec![(i, -1), (j, 1)]).collect(),
        };
        // B2: boundary of triangle (i,j,k) is (j,k) - (i,k) + (i,j).
        let b2 = IncidenceMatrix {
            nrows: edges.len(),
            cols: triangles
                .iter()
                .map(|&(i, j, k)| {
                    let mut col = vec![
                        (edge_index[&(j, k)], 1i8),
                        (edge_index[&(i, k)], -1),
                        (edge_index[&(i, j)], 1),
                    ];
                    col.sort_unstable_by_key(|&(row, _)| row);
                    col
                })
                .collect(),
        };

        Ok(SimplicialComplex {
            vertices,
            edges,
            triangles,
            neighbors,
            b1,
            b2,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn triangles(&self) -> &[(usize, usize, usize)] {
        &self.triangles
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v.id == id)
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        let key = (a.min(b), a.max(b));
        self.edges.binary_search(&key).ok()
    }

    pub fn b1(&self) -> &IncidenceMatrix {
        &self.b1
    }

    pub fn b2(&self) -> &IncidenceMatrix {
        &self.b2
    }

    /// Number of triangles incident to each edge.
    pub fn triangles_per_edge(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.edges.len()];
        for col in &self.b2.cols {
            for &(e, _) in col {
                counts[e] += 1;
            }
        }
        counts
    }

    /// Indices of triangles containing each vertex.
    pub fn triangles_per_vertex(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for (t, &(i, j, k)) in self.triangles.iter().enumerate() {
            out[i].push(t);
            out[j].push(t);
            out[k].push(t);
        }
        out
    }

    /// Connected components of the 1-skeleton: `(count, label per vertex)`.
    pub fn connected_components(&self) -> (usize, Vec<usize>) {
        let mut uf = union_find::UnionFind::new(self.vertices.len());
        for &(i, j) in &self.edges {
            uf.union(i, j);
        }
        (uf.component_count(), uf.labels())
    }
}

/// Modality-specific adjacency thresholds and the window length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdConfig {
    /// Signal-quality threshold in dB (higher = closer); edge when the
    /// window median is at least this.
    pub tau_prox: f64,
    /// DTW distance threshold; edge when at most this.
    pub tau_sync: f64,
    /// Minimum total dwell per (agent, sensor) in minutes.
    pub tau_dwell: f64,
    /// Window length in seconds.
    pub window: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            tau_prox: 40.0,
            tau_sync: 5.0,
            tau_dwell: 5.0,
            window: 300.0,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tau_prox", self.tau_prox),
            ("tau_sync", self.tau_sync),
            ("tau_dwell", self.tau_dwell),
            ("window", self.window),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(GvfError::InvalidConfig(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Betti numbers and the triangle-per-edge maximum of one complex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologySummary {
    pub beta0: usize,
    pub beta1: usize,
    pub d_max: usize,
}

fn median(values: &mut Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite rssi"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

struct KindClaims {
    map: BTreeMap<String, NodeKind>,
}

impl KindClaims {
    fn new() -> Self {
        KindClaims {
            map: BTreeMap::new(),
        }
    }

    fn claim(
        &mut self,
        id: &str,
        kind: NodeKind,
        class: &'static str,
        index: usize,
    ) -> Result<()> {
        match self.map.get(id) {
            Some(&existing) if existing != kind => Err(GvfError::UnresolvableId {
                class,
                index,
                id: id.to_string(),
                reason: format!("already typed as {existing:?}, now claimed as {kind:?}"),
            }),
            Some(_) => Ok(()),
            None => {
                self.map.insert(id.to_string(), kind);
                Ok(())
            }
        }
    }
}

/// Builds the complex for the window `[t0, t0 + cfg.window)`.
///
/// Phase 1 edges: agent-agent when the median proximity over the window
/// reaches `tau_prox` or the DTW distance of their resampled sync-channel
/// series is within `tau_sync`; agent-sensor when total dwell reaches
/// `tau_dwell`; agent-external/spatial from static links. Phase 2 closes
/// triangles over existing edges when at least two node kinds are present.
/// An empty window yields the empty complex.
pub fn build_complex(
    events: &EventStream,
    t0: f64,
    cfg: &ThresholdConfig,
) -> Result<SimplicialComplex> {
    cfg.validate()?;
    events.validate()?;
    let t1 = t0 + cfg.window;
    let in_window = |t: f64| t >= t0 && t < t1;

    let prox: Vec<&ProxRecord> = events.proximity.iter().filter(|r| in_window(r.t)).collect();
    let phys: Vec<&PhysRecord> = events.physio.iter().filter(|r| in_window(r.t)).collect();
    let dwell: Vec<&DwellRecord> = events.dwell.iter().filter(|r| in_window(r.t)).collect();

    if prox.is_empty() && phys.is_empty() && dwell.is_empty() {
        return Ok(SimplicialComplex::empty());
    }

    let mut claims = KindClaims::new();
    for (idx, r) in prox.iter().enumerate() {
        claims.claim(&r.agent_i, NodeKind::Agent, "prox", idx)?;
        claims.claim(&r.agent_j, NodeKind::Agent, "prox", idx)?;
    }
    for (idx, r) in phys.iter().enumerate() {
        claims.claim(&r.agent, NodeKind::Agent, "phys", idx)?;
    }
    for (idx, r) in dwell.iter().enumerate() {
        claims.claim(&r.agent, NodeKind::Agent, "dwell", idx)?;
        claims.claim(&r.sensor, NodeKind::EnvSensor, "dwell", idx)?;
    }
    // Static links attach to agents observed in this window; others are
    // carried by the stream but produce nothing here.
    let mut active_links: Vec<&LinkRecord> = Vec::new();
    for (idx, r) in events.links.iter().enumerate() {
        match claims.map.get(r.agent.as_str()) {
            Some(NodeKind::Agent) => {
                let kind = match r.node_kind {
                    LinkTargetKind::External => NodeKind::External,
                    LinkTargetKind::Spatial => NodeKind::SpatialCell,
                };
                claims.claim(&r.node, kind, "link", idx)?;
                active_links.push(r);
            }
            Some(_) => {
                return Err(GvfError::UnresolvableId {
                    class: "link",
                    index: idx,
                    id: r.agent.clone(),
                    reason: "link agent is not typed as an agent".to_string(),
                })
            }
            None => {}
        }
    }

    // Canonical vertex order: by kind, then id.
    let mut vertices: Vec<Vertex> = claims
        .map
        .iter()
        .map(|(id, &kind)| Vertex {
            id: id.clone(),
            kind,
        })
        .collect();
    vertices.sort_by(|a, b| (a.kind.order(), &a.id).cmp(&(b.kind.order(), &b.id)));
    let index: BTreeMap<&str, usize> = vertices
        .iter()
        .enumerate()
        .map(|(i, v)| (v.id.as_str(), i))
        .collect();

    let mut edge_set: BTreeSet<(usize, usize)> = BTreeSet::new();
    let add_edge = |a: usize, b: usize, set: &mut BTreeSet<(usize, usize)>| {
        if a != b {
            set.insert((a.min(b), a.max(b)));
        }
    };

    // Proximity: median signal quality per unordered agent pair.
    let mut rssi: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for r in &prox {
        let (a, b) = (index[r.agent_i.as_str()], index[r.agent_j.as_str()]);
        if a == b {
            continue;
        }
        rssi.entry((a.min(b), a.max(b))).or_default().push(r.rssi);
    }
    for ((a, b), mut samples) in rssi {
        if median(&mut samples) >= cfg.tau_prox {
            add_edge(a, b, &mut edge_set);
        }
    }

    // Synchrony: DTW over per-window resampled sync-channel series.
    let mut series: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in &phys {
        if r.channel == SYNC_CHANNEL {
            let entry = series.entry(index[r.agent.as_str()]).or_default();
            entry.0.push(r.t);
            entry.1.push(r.value);
        }
    }
    let resampled: Vec<(usize, Vec<f64>)> = series
        .into_iter()
        .filter(|(_, (ts, _))| ts.len() >= 2)
        .map(|(v, (ts, vs))| (v, dtw::resample_linear(&ts, &vs, t0, t1, dtw::RESAMPLE_LEN)))
        .collect();
    for i in 0..resampled.len() {
        for j in (i + 1)..resampled.len() {
            if dtw::dtw(&resampled[i].1, &resampled[j].1) <= cfg.tau_sync {
                add_edge(resampled[i].0, resampled[j].0, &mut edge_set);
            }
        }
    }

    // Exposure: total dwell per (agent, sensor).
    let mut dwell_sum: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for r in &dwell {
        let (a, s) = (index[r.agent.as_str()], index[r.sensor.as_str()]);
        *dwell_sum.entry((a, s)).or_insert(0.0) += r.duration;
    }
    for ((a, s), total) in dwell_sum {
        if total >= cfg.tau_dwell {
            add_edge(a, s, &mut edge_set);
        }
    }

    for r in &active_links {
        add_edge(
            index[r.agent.as_str()],
            index[r.node.as_str()],
            &mut edge_set,
        );
    }

    // Phase 2: close triads over existing edges only.
    let mut nbrs: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); vertices.len()];
    for &(a, b) in &edge_set {
        nbrs[a].insert(b);
        nbrs[b].insert(a);
    }
    let mut triangles = Vec::new();
    for &(i, j) in &edge_set {
        let (small, large) = if nbrs[i].len() <= nbrs[j].len() {
            (&nbrs[i], &nbrs[j])
        } else {
            (&nbrs[j], &nbrs[i])
        };
        for &k in small.range((j + 1)..) {
            if large.contains(&k) {
                let kinds: BTreeSet<NodeKind> =
                    [i, j, k].iter().map(|&v| vertices[v].kind).collect();
                if kinds.len() >= 2 {
                    triangles.push((i, j, k));
                }
            }
        }
    }

    SimplicialComplex::from_parts(vertices, edge_set.into_iter().collect(), triangles)
}

/// Betti numbers via union-find (beta0) and the exact integer rank formula
/// `beta1 = |K1| - rank(B1) - rank(B2)`.
pub fn betti_numbers(complex: &SimplicialComplex) -> Result<TopologySummary> {
    if complex.is_empty() {
        return Ok(TopologySummary {
            beta0: 0,
            beta1: 0,
            d_max: 0,
        });
    }
    let (beta0, _) = complex.connected_components();
    let rank_b1 = rank::integer_rank(
        complex.b1.nrows(),
        complex.b1.ncols(),
        &complex.b1.triplets(),
    )?;
    let rank_b2 = rank::integer_rank(
        complex.b2.nrows(),
        complex.b2.ncols(),
        &complex.b2.triplets(),
    )?;
    let beta1 = complex
        .edge_count()
        .checked_sub(rank_b1 + rank_b2)
        .expect("im(B2) lies inside ker(B1)");
    let d_max = complex.triangles_per_edge().into_iter().max().unwrap_or(0);
    Ok(TopologySummary {
        beta0,
        beta1,
        d_max,
    })
}

#[derive(Serialize, Deserialize)]
struct ComplexFile {
    vertices: Vec<Vertex>,
    edges: Vec<[usize; 2]>,
    triangles: Vec<[usize; 3]>,
}

impl Serialize for SimplicialComplex {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ComplexFile {
            vertices: self.vertices.clone(),
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
            triangles: self
                .triangles
                .iter()
                .map(|&(a, b, c)| [a, b, c])
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SimplicialComplex {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let file = ComplexFile::deserialize(deserializer)?;
        SimplicialComplex::from_parts(
            file.vertices,
            file.edges.iter().map(|e| (e[0], e[1])).collect(),
            file.triangles.iter().map(|t| (t[0], t[1], t[2])).collect(),
        )
        .map_err(serde::de::Error::custom)
    }
}
