//! Exact DBSCAN over a uniform grid.
//!
//! Cells have side `eps / sqrt(3)` (shrunk by a relative 1e-9), so any two
//! points sharing a cell are within `eps` of each other. That gives two
//! shortcuts without changing the result: a cell holding at least `min_pts`
//! points is all core, and all core points of one cell belong to the same
//! cluster. Cluster connectivity is then a union-find over cells.
//!
//! Border points join the cluster of the lowest-index core point within
//! `eps`, and clusters are numbered by their smallest member index, so the
//! output does not depend on traversal order.

use nalgebra::Point3;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DbscanParams {
    pub eps: f64,
    pub min_pts: usize,
}

impl Default for DbscanParams {
    fn default() -> Self {
        Self {
            eps: 0.02,
            min_pts: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Assignment {
    Noise,
    Cluster(usize),
}

impl Assignment {
    pub fn cluster(self) -> Option<usize> {
        match self {
            Assignment::Cluster(k) => Some(k),
            Assignment::Noise => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    assignments: Vec<Assignment>,
    cluster_count: usize,
    #[serde(skip)]
    core: Vec<bool>,
}

impl Clustering {
    pub fn assignments(&self) -> &[Assignment] {
        &self.assignments
    }

    pub fn cluster_count(&self) -> usize {
        self.cluster_count
    }

    pub fn is_core(&self, i: usize) -> bool {
        self.core[i]
    }

    pub fn noise_count(&self) -> usize {
        self.assignments
            .iter()
            .filter(|a| **a == Assignment::Noise)
            .count()
    }

    /// Member indices per cluster, each ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.cluster_count];
        for (i, a) in self.assignments.iter().enumerate() {
            if let Assignment::Cluster(k) = a {
                out[*k].push(i);
            }
        }
        out
    }
}

struct Dsu(Vec<u32>);

impl Dsu {
    fn find(&mut self, mut x: u32) -> u32 {
        while self.0[x as usize] != x {
            let parent = self.0[x as usize];
            self.0[x as usize] = self.0[parent as usize];
            x = parent;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            self.0[hi as usize] = lo;
        }
    }
}

fn neighbor_offsets() -> Vec<[i64; 3]> {
    let mut v = Vec::with_capacity(125);
    for a in -2..=2 {
        for b in -2..=2 {
            for c in -2..=2 {
                v.push([a, b, c]);
            }
        }
    }
    v.sort_by_key(|o| (o[0] * o[0] + o[1] * o[1] + o[2] * o[2], *o));
    v
}

/// Standard DBSCAN with a closed `eps` ball that counts the point itself.
///
/// # Panics
/// If `eps` is not positive or `min_pts` is zero.
pub fn dbscan(points: &[Point3<f64>], eps: f64, min_pts: usize) -> Clustering {
    assert!(eps > 0.0 && eps.is_finite(), "eps must be positive");
    assert!(min_pts >= 1, "min_pts must be at least 1");
    let n = points.len();
    let eps2 = eps * eps;
    let side = eps / 3f64.sqrt() * (1.0 - 1e-9);
    let key = |p: &Point3<f64>| {
        [
            (p.x / side).floor() as i64,
            (p.y / side).floor() as i64,
            (p.z / side).floor() as i64,
        ]
    };

    let mut index: FxHashMap<[i64; 3], u32> = FxHashMap::default();
    let mut cell_keys: Vec<[i64; 3]> = Vec::new();
    let mut cell_points: Vec<Vec<u32>> = Vec::new();
    let mut cell_of = Vec::with_capacity(n);
    for (i, p) in points.iter().enumerate() {
        let k = key(p);
        let c = *index.entry(k).or_insert_with(|| {
            cell_keys.push(k);
            cell_points.push(Vec::new());
            (cell_keys.len() - 1) as u32
        });
        cell_points[c as usize].push(i as u32);
        cell_of.push(c);
    }

    let offsets = neighbor_offsets();
    let neighbors: Vec<Vec<u32>> = cell_keys
        .iter()
        .map(|k| {
            offsets
                .iter()
                .filter_map(|o| index.get(&[k[0] + o[0], k[1] + o[1], k[2] + o[2]]).copied())
                .collect()
        })
        .collect();
    let close = |a: u32, b: u32| (points[a as usize] - points[b as usize]).norm_squared() <= eps2;

    let mut core = vec![false; n];
    for (c, members) in cell_points.iter().enumerate() {
        if members.len() >= min_pts {
            for &i in members {
                core[i as usize] = true;
            }
            continue;
        }
        for &i in members {
            let mut count = 0;
            'scan: for &nc in &neighbors[c] {
                for &j in &cell_points[nc as usize] {
                    if close(i, j) {
                        count += 1;
                        if count >= min_pts {
                            break 'scan;
                        }
                    }
                }
            }
            core[i as usize] = count >= min_pts;
        }
    }

    let core_members: Vec<Vec<u32>> = cell_points
        .iter()
        .map(|m| m.iter().copied().filter(|&i| core[i as usize]).collect())
        .collect();
    // Candidate cell pairs, nearest offsets first: adjacent cells join the
    // component early, so most distant pairs are skipped as already linked.
    let mut pairs: Vec<(u8, u32, u32)> = Vec::new();
    for (c, k) in cell_keys.iter().enumerate() {
        if core_members[c].is_empty() {
            continue;
        }
        for (rank, o) in offsets.iter().enumerate().skip(1) {
            if let Some(&nc) = index.get(&[k[0] + o[0], k[1] + o[1], k[2] + o[2]]) {
                if nc as usize > c && !core_members[nc as usize].is_empty() {
                    pairs.push((rank as u8, c as u32, nc));
                }
            }
        }
    }
    pairs.sort_unstable();
    let mut dsu = Dsu((0..cell_keys.len() as u32).collect());
    for &(_, a, b) in &pairs {
        if dsu.find(a) == dsu.find(b) {
            continue;
        }
        let (ma, mb) = (&core_members[a as usize], &core_members[b as usize]);
        if ma.iter().any(|&p| mb.iter().any(|&q| close(p, q))) {
            dsu.union(a, b);
        }
    }

    // root cell per point, None for noise
    let mut root: Vec<Option<u32>> = vec![None; n];
    for i in 0..n {
        let c = cell_of[i];
        if core[i] {
            root[i] = Some(dsu.find(c));
            continue;
        }
        let mut best: Option<u32> = None;
        for &nc in &neighbors[c as usize] {
            if let Some(&q) = core_members[nc as usize]
                .iter()
                .find(|&&q| close(i as u32, q))
            {
                if best.is_none_or(|b| q < b) {
                    best = Some(q);
                }
            }
        }
        root[i] = best.map(|q| dsu.find(cell_of[q as usize]));
    }

    let mut label_of_root: FxHashMap<u32, usize> = FxHashMap::default();
    let mut assignments = Vec::with_capacity(n);
    for r in &root {
        assignments.push(match r {
            None => Assignment::Noise,
            Some(r) => {
                let next = label_of_root.len();
                Assignment::Cluster(*label_of_root.entry(*r).or_insert(next))
            }
        });
    }
    Clustering {
        assignments,
        cluster_count: label_of_root.len(),
        core,
    }
}
