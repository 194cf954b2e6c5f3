use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Segment, SegmentId};
use crate::error::{Error, Result};

pub const DEFAULT_PATH_CAP: usize = 5_000_000;

/// Order-independent identity of a path: its sorted segment ids.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CanonicalKey(pub Vec<SegmentId>);

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for CanonicalKey {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut ids = s
            .split('-')
            .map(str::parse)
            .collect::<Result<Vec<SegmentId>, _>>()?;
        ids.sort_unstable();
        Ok(CanonicalKey(ids))
    }
}

/// A walk along consecutive segments that never reuses a segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentPath {
    pub segments: Vec<SegmentId>,
    /// `true` where the walk traverses a segment against its digitised direction.
    pub reversed: Vec<bool>,
    pub length_m: f64,
    pub key: CanonicalKey,
}

impl SegmentPath {
    fn new(segments: Vec<SegmentId>, reversed: Vec<bool>, length_m: f64) -> Self {
        let mut ids = segments.clone();
        ids.sort_unstable();
        Self {
            segments,
            reversed,
            length_m,
            key: CanonicalKey(ids),
        }
    }

    /// The same walk traversed the other way round.
    pub fn reversed_walk(&self) -> SegmentPath {
        SegmentPath {
            segments: self.segments.iter().rev().copied().collect(),
            reversed: self.reversed.iter().rev().map(|r| !r).collect(),
            length_m: self.length_m,
            key: self.key.clone(),
        }
    }

    pub fn contains(&self, seg: SegmentId) -> bool {
        self.key.0.binary_search(&seg).is_ok()
    }
}

type Point = (i64, i64);

struct Topology<'a> {
    segments: &'a [Segment],
    ends: Vec<(Point, Point)>,
    touching: HashMap<Point, Vec<SegmentId>>,
}

impl<'a> Topology<'a> {
    fn new(segments: &'a [Segment]) -> Self {
        let ends: Vec<_> = segments
            .iter()
            .map(|s| (s.start_key(), s.end_key()))
            .collect();
        let mut touching: HashMap<Point, Vec<SegmentId>> = HashMap::new();
        for (i, &(a, b)) in ends.iter().enumerate() {
            touching.entry(a).or_default().push(i as SegmentId);
            if b != a {
                touching.entry(b).or_default().push(i as SegmentId);
            }
        }
        Self {
            segments,
            ends,
            touching,
        }
    }

    /// Walks leaving point `p`: (segment, traversed against geometry, exit point).
    fn leaving(&self, p: Point) -> impl Iterator<Item = (SegmentId, bool, Point)> + '_ {
        self.touching.get(&p).into_iter().flatten().map(move |&s| {
            let (a, b) = self.ends[s as usize];
            if a == p {
                (s, false, b)
            } else {
                (s, true, a)
            }
        })
    }
}

struct Walker<'t, 'a> {
    topo: &'t Topology<'a>,
    l_min: f64,
    l_max: f64,
    cap: usize,
    used: Vec<bool>,
    order: Vec<SegmentId>,
    reversed: Vec<bool>,
    found: BTreeMap<CanonicalKey, SegmentPath>,
}

impl Walker<'_, '_> {
    fn extend(&mut self, exit: Point, length: f64) -> Result<()> {
        if length >= self.l_min {
            let path = SegmentPath::new(self.order.clone(), self.reversed.clone(), length);
            match self.found.get_mut(&path.key) {
                Some(existing) => {
                    if (&path.segments, &path.reversed) < (&existing.segments, &existing.reversed) {
                        *existing = path;
                    }
                }
                None => {
                    self.found.insert(path.key.clone(), path);
                    if self.found.len() > self.cap {
                        return Err(Error::PathCap {
                            count: self.found.len(),
                            cap: self.cap,
                        });
                    }
                }
            }
        }
        let next: Vec<_> = self
            .topo
            .leaving(exit)
            .filter(|(s, _, _)| !self.used[*s as usize])
            .collect();
        for (s, against, out) in next {
            let l = length + self.topo.segments[s as usize].length_m;
            if l > self.l_max {
                continue;
            }
            self.push(s, against);
            let r = self.extend(out, l);
            self.pop(s);
            r?;
        }
        Ok(())
    }

    fn push(&mut self, s: SegmentId, against: bool) {
        self.used[s as usize] = true;
        self.order.push(s);
        self.reversed.push(against);
    }

    fn pop(&mut self, s: SegmentId) {
        self.used[s as usize] = false;
        self.order.pop();
        self.reversed.pop();
    }
}

/// Every simple segment walk with total length in `[l_min, l_max]`, one per
/// canonical key, sorted by key.
///
/// A walk enters each segment through one endpoint and leaves through the
/// other; vertices may be revisited but segments may not. When several walks
/// share a key the lexicographically smallest `(segments, reversed)` is kept.
pub fn enumerate_paths(
    segments: &[Segment],
    l_min: f64,
    l_max: f64,
    cap: usize,
) -> Result<Vec<SegmentPath>> {
    if !(l_min >= 0.0 && l_min < l_max) {
        return Err(Error::InvalidInput(format!(
            "path length bounds must satisfy 0 <= l_min < l_max, got [{l_min}, {l_max}]"
        )));
    }
    let topo = Topology::new(segments);
    let eps = 1e-9 * l_max.max(1.0);
    let (lo, hi) = (l_min - eps, l_max + eps);

    let per_root: Vec<BTreeMap<CanonicalKey, SegmentPath>> = (0..segments.len())
        .into_par_iter()
        .map(|root| {
            let mut w = Walker {
                topo: &topo,
                l_min: lo,
                l_max: hi,
                cap,
                used: vec![false; segments.len()],
                order: Vec::new(),
                reversed: Vec::new(),
                found: BTreeMap::new(),
            };
            let len = segments[root].length_m;
            if len > hi {
                return Ok(w.found);
            }
            let (a, b) = topo.ends[root];
            for (against, exit) in [(false, b), (true, a)] {
                w.push(root as SegmentId, against);
                w.extend(exit, len)?;
                w.pop(root as SegmentId);
            }
            Ok(w.found)
        })
        .collect::<Result<_>>()?;

    let mut merged: BTreeMap<CanonicalKey, SegmentPath> = BTreeMap::new();
    for found in per_root {
        for (key, path) in found {
            match merged.get_mut(&key) {
                Some(existing) => {
                    if (&path.segments, &path.reversed) < (&existing.segments, &existing.reversed) {
                        *existing = path;
                    }
                }
                None => {
                    merged.insert(key, path);
                }
            }
        }
        if merged.len() > cap {
            return Err(Error::PathCap {
                count: merged.len(),
                cap,
            });
        }
    }
    Ok(merged.into_values().collect())
}
