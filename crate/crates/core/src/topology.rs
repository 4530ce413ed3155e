//! Station network: service areas connected by undirected highway links.
//!
//! File format is a plain edge list, one `name1,name2` pair per line. A line
//! holding a single name declares a station without adding a link, which is
//! the only way to describe isolated stations. Blank lines and lines starting
//! with `#` are ignored. Station ids follow first-appearance order.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense index of a station within one [`Topology`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StationId(pub u32);

impl StationId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for StationId {
    fn from(i: usize) -> Self {
        StationId(i as u32)
    }
}

impl fmt::Display for StationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Immutable station graph. Adjacency is symmetric and never contains
/// self-loops; staying in place is handled by the scheduler.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    names: Vec<String>,
    adjacency: Vec<Vec<StationId>>,
    edges: Vec<(StationId, StationId)>,
}

impl Topology {
    /// Builds a topology from station names and undirected links given by
    /// index. Duplicate links (in either orientation) are merged.
    pub fn new(names: Vec<String>, links: &[(usize, usize)]) -> Result<Self> {
        let n = names.len();
        let mut seen = HashMap::with_capacity(n);
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::Topology(format!("station {i} has an empty name")));
            }
            if seen.insert(name.as_str(), i).is_some() {
                return Err(Error::Topology(format!("duplicate station name {name:?}")));
            }
        }
        let mut adj: Vec<BTreeSet<StationId>> = vec![BTreeSet::new(); n];
        let mut edges = Vec::new();
        for &(a, b) in links {
            for id in [a, b] {
                if id >= n {
                    return Err(Error::StationOutOfRange { id, count: n });
                }
            }
            if a == b {
                return Err(Error::Topology(format!(
                    "explicit self-loop on station {:?}",
                    names[a]
                )));
            }
            if adj[a].insert(StationId::from(b)) {
                adj[b].insert(StationId::from(a));
                edges.push((StationId::from(a.min(b)), StationId::from(a.max(b))));
            }
        }
        let topo = Topology {
            names,
            adjacency: adj.into_iter().map(|s| s.into_iter().collect()).collect(),
            edges,
        };
        let components = topo.component_count();
        if components > 1 {
            log::warn!("topology is disconnected ({components} components)");
        }
        Ok(topo)
    }

    /// Path graph `S0 - S1 - ... - S{n-1}`.
    pub fn path(n: usize) -> Self {
        let links: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::new(default_names(n), &links).expect("path graph is valid")
    }

    /// Cycle on `n >= 3` stations.
    pub fn ring(n: usize) -> Self {
        assert!(n >= 3, "ring needs at least 3 stations");
        let links: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::new(default_names(n), &links).expect("ring graph is valid")
    }

    /// Rectangular grid, row-major station order.
    pub fn grid(rows: usize, cols: usize) -> Self {
        let mut links = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                if c + 1 < cols {
                    links.push((i, i + 1));
                }
                if r + 1 < rows {
                    links.push((i, i + cols));
                }
            }
        }
        Self::new(default_names(rows * cols), &links).expect("grid graph is valid")
    }

    pub fn station_count(&self) -> usize {
        self.names.len()
    }

    pub fn stations(&self) -> impl ExactSizeIterator<Item = StationId> {
        (0..self.names.len()).map(StationId::from)
    }

    pub fn name(&self, i: StationId) -> &str {
        &self.names[i.index()]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn station_by_name(&self, name: &str) -> Option<StationId> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(StationId::from)
    }

    /// Undirected links in insertion order, each stored as `(low, high)`.
    /// Edge-level traffic series are indexed by this order.
    pub fn edges(&self) -> &[(StationId, StationId)] {
        &self.edges
    }

    /// N(i), sorted ascending, never containing `i`.
    pub fn neighbors(&self, i: StationId) -> Result<&[StationId]> {
        self.adjacency
            .get(i.index())
            .map(Vec::as_slice)
            .ok_or(Error::StationOutOfRange {
                id: i.index(),
                count: self.station_count(),
            })
    }

    pub(crate) fn neighbors_unchecked(&self, i: usize) -> &[StationId] {
        &self.adjacency[i]
    }

    pub fn are_adjacent(&self, i: StationId, j: StationId) -> bool {
        self.adjacency
            .get(i.index())
            .is_some_and(|n| n.binary_search(&j).is_ok())
    }

    pub fn component_count(&self) -> usize {
        let n = self.station_count();
        let mut seen = vec![false; n];
        let mut count = 0;
        for s in 0..n {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                for v in &self.adjacency[u] {
                    if !seen[v.index()] {
                        seen[v.index()] = true;
                        stack.push(v.index());
                    }
                }
            }
        }
        count
    }

    /// Serializes to the edge-list format. Every station is declared first so
    /// that ids survive a reload even for isolated stations.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::from("# stations\n");
        for name in &self.names {
            out.push_str(name);
            out.push('\n');
        }
        out.push_str("# links\n");
        for (a, b) in &self.edges {
            out.push_str(&format!("{},{}\n", self.name(*a), self.name(*b)));
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_edge_list()).map_err(|e| Error::io(path, e))
    }
}

fn default_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("S{i}")).collect()
}

/// Reads and validates a topology file.
pub fn load_topology(path: impl AsRef<Path>) -> Result<Topology> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_topology(&text, path)
}

pub fn parse_topology(text: &str, origin: &Path) -> Result<Topology> {
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut names = Vec::new();
    let mut links = Vec::new();
    let mut intern = |name: &str, names: &mut Vec<String>| -> usize {
        *ids.entry(name.to_string()).or_insert_with(|| {
            names.push(name.to_string());
            names.len() - 1
        })
    };
    let mut declared = BTreeSet::new();

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match fields.as_slice() {
            [name] => {
                if name.is_empty() {
                    return Err(Error::parse(origin, lineno, "empty station name"));
                }
                if !declared.insert(name.to_string()) {
                    return Err(Error::parse(
                        origin,
                        lineno,
                        format!("duplicate station declaration {name:?}"),
                    ));
                }
                intern(name, &mut names);
            }
            [a, b] => {
                if a.is_empty() || b.is_empty() {
                    return Err(Error::parse(origin, lineno, "empty station name"));
                }
                if a == b {
                    return Err(Error::parse(
                        origin,
                        lineno,
                        format!("explicit self-loop on station {a:?}"),
                    ));
                }
                let ia = intern(a, &mut names);
                let ib = intern(b, &mut names);
                links.push((ia, ib));
            }
            _ => {
                return Err(Error::parse(
                    origin,
                    lineno,
                    format!("expected `name1,name2`, got {line:?}"),
                ))
            }
        }
    }
    if names.is_empty() {
        return Err(Error::parse(origin, 0, "topology has no stations"));
    }
    Topology::new(names, &links)
}
