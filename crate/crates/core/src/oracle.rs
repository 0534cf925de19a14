//! Brute force ground truth: BFS balls in the Cayley graph, formula
//! verification, dead ends, and truncated cone types.
//!
//! Lengths of elements outside a stored ball always come from the formula.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{DlError, Result};
use crate::group::{ElemJson, Group, GroupElem, Word};
use crate::ring::{Residue, RingParams};

/// Default cap on the number of states a search may hold.
pub const DEFAULT_STATE_BUDGET: usize = 10_000_000;

/// Rough per-state memory used to turn a byte budget into a state budget.
pub const BYTES_PER_STATE: usize = 256;

pub const CACHE_FORMAT_VERSION: u64 = 1;

const CHUNK: usize = 4096;

/// Exact distances from the identity for every element of a ball.
#[derive(Debug, Clone)]
pub struct BallTable {
    params: RingParams,
    radius: u32,
    entries: HashMap<GroupElem, u32>,
}

impl BallTable {
    pub fn params(&self) -> &RingParams {
        &self.params
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn distance(&self, g: &GroupElem) -> Option<u32> {
        self.entries.get(g).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GroupElem, u32)> {
        self.entries.iter().map(|(g, &r)| (g, r))
    }

    /// Entries in canonical element order.
    pub fn sorted(&self) -> Vec<(&GroupElem, u32)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_unstable();
        v
    }

    /// Number of elements at each distance `0..=radius`.
    pub fn sphere_sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.radius as usize + 1];
        for &r in self.entries.values() {
            out[r as usize] += 1;
        }
        out
    }

    /// Elements at distance exactly `r`, in canonical order.
    pub fn sphere(&self, r: u32) -> Vec<&GroupElem> {
        let mut v: Vec<_> = self
            .iter()
            .filter(|&(_, x)| x == r)
            .map(|(g, _)| g)
            .collect();
        v.sort_unstable();
        v
    }

    /// The sub-ball of radius `radius`.
    pub fn restricted(&self, radius: u32) -> BallTable {
        BallTable {
            params: self.params.clone(),
            radius: radius.min(self.radius),
            entries: self
                .iter()
                .filter(|&(_, r)| r <= radius)
                .map(|(g, r)| (g.clone(), r))
                .collect(),
        }
    }

    /// Growth series rows `(radius, sphere, ball)`.
    pub fn growth(&self) -> Vec<(u32, usize, usize)> {
        let mut total = 0;
        self.sphere_sizes()
            .into_iter()
            .enumerate()
            .map(|(r, s)| {
                total += s;
                (r as u32, s, total)
            })
            .collect()
    }
}

/// Breadth-first search from the identity to distance `radius`.
pub fn bfs_ball(group: &Group, radius: u32, budget: usize) -> Result<BallTable> {
    let mut entries = HashMap::new();
    entries.insert(group.identity(), 0u32);
    let mut frontier = vec![group.identity()];
    for r in 1..=radius {
        let mut next = Vec::new();
        for chunk in frontier.chunks(CHUNK) {
            let fresh: Vec<Vec<GroupElem>> = chunk
                .par_iter()
                .map(|g| {
                    (0..group.generators().len())
                        .map(|idx| group.step(g, idx))
                        .filter(|y| !entries.contains_key(y))
                        .collect()
                })
                .collect();
            for y in fresh.into_iter().flatten() {
                if let std::collections::hash_map::Entry::Vacant(e) = entries.entry(y) {
                    next.push(e.key().clone());
                    e.insert(r);
                }
            }
            if entries.len() > budget {
                return Err(DlError::Resource {
                    frontier: next.len(),
                    radius: r,
                    budget,
                });
            }
        }
        frontier = next;
    }
    Ok(BallTable {
        params: group.params().clone(),
        radius,
        entries,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub elem: GroupElem,
    pub bfs: u32,
    pub formula: u64,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub checked: usize,
    pub mismatches: Vec<Mismatch>,
    pub elapsed: Duration,
}

/// Compares the formula against the BFS distance of every ball entry.
pub fn verify_formula(group: &Group, ball: &BallTable) -> VerifyReport {
    let start = Instant::now();
    let entries: Vec<_> = ball.iter().collect();
    let mut mismatches: Vec<Mismatch> = entries
        .par_iter()
        .filter_map(|&(g, r)| {
            let f = group.length(g);
            (f != r as u64).then(|| Mismatch {
                elem: g.clone(),
                bfs: r,
                formula: f,
            })
        })
        .collect();
    mismatches.sort_by(|a, b| a.elem.cmp(&b.elem));
    VerifyReport {
        checked: entries.len(),
        mismatches,
        elapsed: start.elapsed(),
    }
}

/// No generator lengthens `g` (by the formula).
pub fn is_dead_end(group: &Group, g: &GroupElem) -> bool {
    let f = group.length(g);
    (0..group.generators().len()).all(|idx| group.length(&group.step(g, idx)) <= f)
}

/// Depth of a dead end: the fewest steps from `g` that reach an element
/// longer than `g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Depth {
    Exact(u32),
    /// No escape within this many steps.
    ExceedsHorizon(u32),
}

impl Depth {
    /// True when the depth is known to be at least `n`.
    pub fn at_least(&self, n: u32) -> bool {
        match *self {
            Depth::Exact(k) => k >= n,
            Depth::ExceedsHorizon(h) => h + 1 >= n,
        }
    }
}

impl Serialize for Depth {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Depth::Exact(k) => s.serialize_u32(k),
            Depth::ExceedsHorizon(_) => s.serialize_str("exceeds-horizon"),
        }
    }
}

/// Searches outward from the dead end `g` through generator products,
/// measuring lengths by the formula.
pub fn dead_end_depth(group: &Group, g: &GroupElem, horizon: u32, budget: usize) -> Result<Depth> {
    if !is_dead_end(group, g) {
        return Err(DlError::Precondition(format!(
            "{} is not a dead end",
            group.format_elem(g)
        )));
    }
    let n = group.length(g);
    let mut seen: HashSet<GroupElem> = HashSet::new();
    seen.insert(g.clone());
    let mut frontier = vec![g.clone()];
    for r in 1..=horizon {
        let mut next = Vec::new();
        for chunk in frontier.chunks(CHUNK) {
            let fresh: Vec<Vec<(GroupElem, bool)>> = chunk
                .par_iter()
                .map(|x| {
                    (0..group.generators().len())
                        .map(|idx| group.step(x, idx))
                        .filter(|y| !seen.contains(y))
                        .map(|y| {
                            let escapes = group.length(&y) > n;
                            (y, escapes)
                        })
                        .collect()
                })
                .collect();
            for (y, escapes) in fresh.into_iter().flatten() {
                if escapes {
                    return Ok(Depth::Exact(r));
                }
                if seen.insert(y.clone()) {
                    next.push(y);
                }
            }
            if seen.len() > budget {
                return Err(DlError::Resource {
                    frontier: next.len(),
                    radius: r,
                    budget,
                });
            }
        }
        frontier = next;
    }
    Ok(Depth::ExceedsHorizon(horizon))
}

#[derive(Debug, Clone, Serialize)]
pub struct DeadEndReport {
    #[serde(serialize_with = "serialize_elem")]
    pub element: GroupElem,
    pub length: u64,
    pub is_dead_end: bool,
    pub depth: Depth,
}

fn serialize_elem<S: Serializer>(g: &GroupElem, s: S) -> std::result::Result<S::Ok, S::Error> {
    ElemJson::from(g).serialize(s)
}

/// All dead ends of length at most `radius - 1`, found with ball distances
/// only, in canonical order. Depths are searched up to `depth_horizon`.
pub fn dead_end_scan(
    group: &Group,
    ball: &BallTable,
    depth_horizon: u32,
) -> Result<Vec<DeadEndReport>> {
    let limit = ball.radius().saturating_sub(1);
    let mut found: Vec<(&GroupElem, u32)> = ball
        .iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .filter(|&(g, r)| {
            r >= 1
                && r <= limit
                && (0..group.generators().len()).all(|idx| {
                    let y = group.step(g, idx);
                    ball.distance(&y)
                        .expect("neighbors of interior entries are in the ball")
                        <= r
                })
        })
        .collect();
    found.sort_unstable();
    found
        .into_iter()
        .map(|(g, r)| {
            Ok(DeadEndReport {
                element: g.clone(),
                length: r as u64,
                is_dead_end: true,
                depth: dead_end_depth(group, g, depth_horizon, DEFAULT_STATE_BUDGET)?,
            })
        })
        .collect()
}

/// The outbound words of length `1..=k` from an element, as generator
/// indices, in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConeKey {
    pub k: u32,
    pub words: Vec<Vec<u16>>,
}

impl ConeKey {
    /// Outbound words of length `j < k` that admit no outbound extension.
    pub fn maximal_words(&self) -> Vec<&[u16]> {
        let mut out = Vec::new();
        for (n, w) in self.words.iter().enumerate() {
            if w.len() < self.k as usize {
                let extended = self
                    .words
                    .get(n + 1)
                    .is_some_and(|next| next.len() > w.len() && next.starts_with(w));
                if !extended {
                    out.push(w.as_slice());
                }
            }
        }
        out
    }

    pub fn to_words(&self, group: &Group) -> Vec<Word> {
        self.words
            .iter()
            .map(|w| Word(w.iter().map(|&i| group.generators()[i as usize]).collect()))
            .collect()
    }
}

/// Enumerates words of length at most `k` along which the formula length
/// strictly increases at every letter.
pub fn cone_key(group: &Group, g: &GroupElem, k: u32) -> ConeKey {
    fn extend(
        group: &Group,
        x: &GroupElem,
        fx: u64,
        depth: u32,
        prefix: &mut Vec<u16>,
        out: &mut Vec<Vec<u16>>,
    ) {
        if depth == 0 {
            return;
        }
        for idx in 0..group.generators().len() {
            let y = group.step(x, idx);
            let fy = group.length(&y);
            if fy > fx {
                prefix.push(idx as u16);
                out.push(prefix.clone());
                extend(group, &y, fy, depth - 1, prefix, out);
                prefix.pop();
            }
        }
    }
    let mut words = Vec::new();
    extend(group, g, group.length(g), k, &mut Vec::new(), &mut words);
    ConeKey { k, words }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CensusRow {
    pub radius: u32,
    /// Distinct keys among elements of length at most `radius`.
    pub distinct: usize,
}

/// Counts distinct depth-`k` cone keys among the elements of each ball
/// radius, cumulatively.
pub fn cone_census(group: &Group, ball: &BallTable, k: u32) -> Vec<CensusRow> {
    let mut seen: HashSet<ConeKey> = HashSet::new();
    let mut rows = Vec::new();
    for r in 0..=ball.radius() {
        let sphere = ball.sphere(r);
        for chunk in sphere.chunks(CHUNK) {
            let keys: Vec<ConeKey> = chunk.par_iter().map(|g| cone_key(group, g, k)).collect();
            seen.extend(keys);
        }
        rows.push(CensusRow {
            radius: r,
            distinct: seen.len(),
        });
    }
    rows
}

// --- persistence -----------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CacheHeader {
    format_version: u64,
    d: usize,
    q: u32,
    residues: Vec<Residue>,
    radius: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CacheLine {
    elem: ElemJson,
    dist: u32,
}

pub fn save_ball(ball: &BallTable, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    let header = CacheHeader {
        format_version: CACHE_FORMAT_VERSION,
        d: ball.params.d(),
        q: ball.params.q(),
        residues: ball.params.residues().to_vec(),
        radius: ball.radius,
    };
    writeln!(
        out,
        "{}",
        serde_json::to_string(&header).expect("header serializes")
    )?;
    for (g, dist) in ball.sorted() {
        let line = CacheLine {
            elem: ElemJson::from(g),
            dist,
        };
        writeln!(
            out,
            "{}",
            serde_json::to_string(&line).expect("line serializes")
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Loads a ball cache written by [`save_ball`], checking it against the
/// parameters of `group`.
pub fn load_ball(group: &Group, path: &Path) -> Result<BallTable> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut lines = reader.lines();
    let corrupt = |line: usize, msg: String| DlError::CorruptLine { line, msg };
    let first = lines
        .next()
        .ok_or_else(|| corrupt(1, "missing header".into()))??;
    let header: CacheHeader =
        serde_json::from_str(&first).map_err(|e| corrupt(1, e.to_string()))?;
    if header.format_version != CACHE_FORMAT_VERSION {
        return Err(DlError::CacheVersion {
            found: header.format_version,
            expected: CACHE_FORMAT_VERSION,
        });
    }
    let p = group.params();
    if header.d != p.d() || header.q != p.q() || header.residues != p.residues() {
        return Err(DlError::CacheParams {
            found: format!(
                "d={} q={} residues={:?}",
                header.d, header.q, header.residues
            ),
            expected: format!("d={} q={} residues={:?}", p.d(), p.q(), p.residues()),
        });
    }
    let mut entries = HashMap::new();
    for (n, line) in lines.enumerate() {
        let lineno = n + 2;
        let line = line?;
        let parsed: CacheLine =
            serde_json::from_str(&line).map_err(|e| corrupt(lineno, e.to_string()))?;
        if parsed.dist > header.radius {
            return Err(corrupt(
                lineno,
                format!("distance {} beyond radius {}", parsed.dist, header.radius),
            ));
        }
        let raw = serde_json::to_string(&parsed.elem).expect("element serializes");
        let g = group
            .parse_elem(&raw)
            .map_err(|e| corrupt(lineno, e.to_string()))?;
        if entries.insert(g, parsed.dist).is_some() {
            return Err(corrupt(lineno, "duplicate element".into()));
        }
    }
    if entries.get(&group.identity()) != Some(&0) {
        return Err(corrupt(1, "identity missing or not at distance 0".into()));
    }
    Ok(BallTable {
        params: p.clone(),
        radius: header.radius,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group(d: usize, q: u32) -> Group {
        Group::new(RingParams::new(d, q, None).unwrap())
    }

    #[test]
    fn small_balls() {
        let g = group(3, 2);
        let b0 = bfs_ball(&g, 0, DEFAULT_STATE_BUDGET).unwrap();
        assert_eq!(b0.len(), 1);
        assert_eq!(b0.distance(&g.identity()), Some(0));
        let b1 = bfs_ball(&g, 1, DEFAULT_STATE_BUDGET).unwrap();
        assert_eq!(b1.len(), 13);

        let g2 = group(2, 2);
        let b2 = bfs_ball(&g2, 2, DEFAULT_STATE_BUDGET).unwrap();
        assert_eq!(b2.sphere_sizes()[..2], [1, 4]);
        assert!(verify_formula(&g2, &b2).mismatches.is_empty());
    }

    #[test]
    fn ball_layer_property() {
        let g = group(3, 2);
        let ball = bfs_ball(&g, 4, DEFAULT_STATE_BUDGET).unwrap();
        for (x, r) in ball.iter() {
            let ds: Vec<u32> = (0..g.generators().len())
                .filter_map(|i| ball.distance(&g.step(x, i)))
                .collect();
            if r < ball.radius() {
                assert_eq!(ds.len(), g.generators().len());
            }
            if r > 0 {
                assert!(ds.contains(&(r - 1)));
                assert!(ds.iter().all(|&d| d + 1 >= r));
            }
        }
    }

    #[test]
    fn budget_exceeded_is_a_resource_error() {
        let g = group(3, 2);
        match bfs_ball(&g, 3, 50) {
            Err(DlError::Resource { budget, .. }) => assert_eq!(budget, 50),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn identity_is_not_a_dead_end() {
        let g = group(3, 2);
        assert!(!is_dead_end(&g, &g.identity()));
        assert!(matches!(
            dead_end_depth(&g, &g.identity(), 3, 1000),
            Err(DlError::Precondition(_))
        ));
    }

    #[test]
    fn cone_key_examples() {
        let g = group(3, 2);
        let k = cone_key(&g, &g.identity(), 1);
        assert_eq!(k.words.len(), 12);
        assert!(k.words.iter().all(|w| w.len() == 1));
        let k2 = cone_key(&g, &g.identity(), 2);
        assert!(k2.words.windows(2).all(|w| w[0] < w[1]));
        assert!(k2.maximal_words().is_empty());
    }

    #[test]
    fn scan_radius_one_is_empty() {
        let g = group(3, 2);
        let ball = bfs_ball(&g, 1, DEFAULT_STATE_BUDGET).unwrap();
        assert!(dead_end_scan(&g, &ball, 2).unwrap().is_empty());
    }

    #[test]
    fn census_small() {
        let g = group(2, 2);
        let ball = bfs_ball(&g, 4, DEFAULT_STATE_BUDGET).unwrap();
        let rows = cone_census(&g, &ball, 2);
        assert_eq!(
            rows[0],
            CensusRow {
                radius: 0,
                distinct: 1
            }
        );
        assert!(rows.windows(2).all(|w| w[0].distinct <= w[1].distinct));
    }

    #[test]
    fn cache_round_trip_and_errors() {
        let g = group(3, 2);
        let ball = bfs_ball(&g, 3, DEFAULT_STATE_BUDGET).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ball.jsonl");
        save_ball(&ball, &path).unwrap();
        let back = load_ball(&g, &path).unwrap();
        assert_eq!(back.radius(), 3);
        assert_eq!(back.sorted(), ball.sorted());

        let g2 = group(2, 2);
        assert!(matches!(
            load_ball(&g2, &path),
            Err(DlError::CacheParams { .. })
        ));

        let text = std::fs::read_to_string(&path).unwrap();
        let cut = &text[..text.len() - 10];
        let trunc = dir.path().join("trunc.jsonl");
        std::fs::write(&trunc, cut).unwrap();
        let lines = cut.lines().count();
        match load_ball(&g, &trunc) {
            Err(DlError::CorruptLine { line, .. }) => assert_eq!(line, lines),
            other => panic!("unexpected {other:?}"),
        }

        let v2 = dir.path().join("v2.jsonl");
        std::fs::write(
            &v2,
            text.replacen("\"format_version\":1", "\"format_version\":2", 1),
        )
        .unwrap();
        assert!(matches!(
            load_ball(&g, &v2),
            Err(DlError::CacheVersion { found: 2, .. })
        ));
    }

    #[test]
    fn generators_at_distance_one() {
        let g = group(4, 5);
        let ball = bfs_ball(&g, 1, DEFAULT_STATE_BUDGET).unwrap();
        for &s in g.generators() {
            assert_eq!(ball.distance(&g.generator_elem(s)), Some(1));
        }
    }
}
