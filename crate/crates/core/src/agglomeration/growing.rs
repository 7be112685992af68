//! Greedy region growing that keeps every agglomerate a topological ball.
//!
//! A cell joins a region only if its contact with the region closure is a
//! single disk made of shared facets (a "simple" attachment). Regions are
//! seeded next to already grown ones so that leftovers stay compact; small
//! leftovers are merged into a neighbor when the union is again a ball.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::la::CsrMatrix;
use crate::topology::{euler_characteristic, Topology};

struct CellClosures {
    /// Per cell: vertices, edges, facets in its closure.
    cells: Vec<[Vec<usize>; 3]>,
}

impl CellClosures {
    fn new(t: &Topology) -> Self {
        let cells = (0..t.n(3))
            .map(|c| {
                let cl = t.closure(3, &[c]);
                [cl[0].clone(), cl[1].clone(), cl[2].clone()]
            })
            .collect();
        Self { cells }
    }
}

/// Whether the facet set `s` is a disk: Euler characteristic 1 and a
/// boundary that is one cycle through vertices of degree two.
pub(crate) fn is_disk(s: &[usize], b2: &CsrMatrix, b1: &CsrMatrix) -> bool {
    if s.is_empty() {
        return false;
    }
    let mut edge_count: BTreeMap<usize, usize> = BTreeMap::new();
    for &f in s {
        for &e in b2.row_cols(f) {
            *edge_count.entry(e).or_default() += 1;
        }
    }
    if edge_count.values().any(|&c| c > 2) {
        return false;
    }
    let mut verts: Vec<usize> = edge_count
        .keys()
        .flat_map(|&e| b1.row_cols(e).iter().copied())
        .collect();
    verts.sort_unstable();
    verts.dedup();
    if euler_characteristic(&[verts.len(), edge_count.len(), s.len()]) != 1 {
        return false;
    }
    let boundary: Vec<usize> = edge_count
        .iter()
        .filter(|(_, &c)| c == 1)
        .map(|(&e, _)| e)
        .collect();
    let mut degree: BTreeMap<usize, usize> = BTreeMap::new();
    for &e in &boundary {
        for &v in b1.row_cols(e) {
            *degree.entry(v).or_default() += 1;
        }
    }
    degree.values().all(|&d| d == 2)
        && degree.len() == boundary.len()
        && super::is_connected_cycle_set(&boundary, b1)
}

/// Whether the sub-entities shared between a body and a region closure form
/// a disk made of shared facets, with no extra contact points or edges.
fn simple_contact(
    body: &[Vec<usize>; 3],
    marks: &[Vec<u32>; 3],
    b2: &CsrMatrix,
    b1: &CsrMatrix,
) -> bool {
    let shared: Vec<usize> = body[2]
        .iter()
        .copied()
        .filter(|&f| marks[2][f] > 0)
        .collect();
    if !is_disk(&shared, b2, b1) {
        return false;
    }
    let mut se: Vec<usize> = shared
        .iter()
        .flat_map(|&f| b2.row_cols(f).iter().copied())
        .collect();
    se.sort_unstable();
    se.dedup();
    let mut sv: Vec<usize> = se
        .iter()
        .flat_map(|&e| b1.row_cols(e).iter().copied())
        .collect();
    sv.sort_unstable();
    sv.dedup();
    let touched_e = body[1].iter().filter(|&&e| marks[1][e] > 0).count();
    let touched_v = body[0].iter().filter(|&&v| marks[0][v] > 0).count();
    touched_e == se.len() && touched_v == sv.len()
}

fn mark(marks: &mut [Vec<u32>; 3], body: &[Vec<usize>; 3], delta: i64) {
    for d in 0..3 {
        for &i in &body[d] {
            marks[d][i] = (marks[d][i] as i64 + delta) as u32;
        }
    }
}

/// Agglomerates of roughly `target` cells each, every one a ball.
pub fn grow_agglomerates(t: &Topology, target: usize, seed: u64) -> Vec<usize> {
    let n = t.n(3);
    let adj = t.dual_graph();
    let closures = CellClosures::new(t);
    let b1 = t.incidence(1);
    let b2 = t.incidence(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut label = vec![usize::MAX; n];
    let mut marks: [Vec<u32>; 3] = [vec![0; t.n(0)], vec![0; t.n(1)], vec![0; t.n(2)]];

    // Next-seed queue: unassigned cells by number of assigned neighbors.
    let mut seed_heap: BinaryHeap<(usize, Reverse<usize>)> = BinaryHeap::new();
    let mut assigned_nbrs = vec![0usize; n];
    let mut next_label = 0;
    let mut remaining = n;
    let mut scan = 0;
    while remaining > 0 {
        let start = loop {
            match seed_heap.pop() {
                Some((k, Reverse(c))) if label[c] == usize::MAX && assigned_nbrs[c] == k => {
                    break Some(c)
                }
                Some(_) => continue,
                None => break None,
            }
        };
        let start = start.unwrap_or_else(|| {
            while label[scan] != usize::MAX {
                scan += 1;
            }
            // Pseudo-peripheral cell of a fresh component.
            let r = if next_label == 0 {
                rng.gen_range(0..n)
            } else {
                scan
            };
            let free: Vec<bool> = label.iter().map(|&l| l == usize::MAX).collect();
            let mut s = if label[r] == usize::MAX { r } else { scan };
            for _ in 0..2 {
                s = super::bfs_last(&adj, s, &free);
            }
            s
        });

        let id = next_label;
        next_label += 1;
        let mut region = vec![start];
        label[start] = id;
        mark(&mut marks, &closures.cells[start], 1);
        let mut gain: BTreeMap<usize, usize> = BTreeMap::new();
        let mut heap: BinaryHeap<(usize, Reverse<usize>)> = BinaryHeap::new();
        let push_nbrs = |c: usize,
                         gain: &mut BTreeMap<usize, usize>,
                         heap: &mut BinaryHeap<(usize, Reverse<usize>)>,
                         label: &[usize]| {
            for &w in &adj[c] {
                if label[w] == usize::MAX {
                    let g = gain.entry(w).or_insert(0);
                    *g += 1;
                    heap.push((*g, Reverse(w)));
                }
            }
        };
        push_nbrs(start, &mut gain, &mut heap, &label);
        while region.len() < target {
            let Some((g, Reverse(c))) = heap.pop() else {
                break;
            };
            if label[c] != usize::MAX || gain.get(&c) != Some(&g) {
                continue;
            }
            if !simple_contact(&closures.cells[c], &marks, b2, b1) {
                continue;
            }
            label[c] = id;
            region.push(c);
            mark(&mut marks, &closures.cells[c], 1);
            push_nbrs(c, &mut gain, &mut heap, &label);
        }
        for &c in &region {
            mark(&mut marks, &closures.cells[c], -1);
            for &w in &adj[c] {
                assigned_nbrs[w] += 1;
                if label[w] == usize::MAX {
                    seed_heap.push((assigned_nbrs[w], Reverse(w)));
                }
            }
        }
        remaining -= region.len();
    }

    merge_small(t, &adj, &closures, &mut label, target);
    super::canonical_labels(&label)
}

/// Merges regions smaller than half the target into the neighbor with the
/// largest shared interface when their union remains a ball.
fn merge_small(
    t: &Topology,
    adj: &[Vec<usize>],
    closures: &CellClosures,
    label: &mut [usize],
    target: usize,
) {
    let b1 = t.incidence(1);
    let b2 = t.incidence(2);
    let n_regions = label.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_regions];
    for (c, &l) in label.iter().enumerate() {
        members[l].push(c);
    }
    let mut marks: [Vec<u32>; 3] = [vec![0; t.n(0)], vec![0; t.n(1)], vec![0; t.n(2)]];
    let mut order: Vec<usize> = (0..n_regions).collect();
    order.sort_by_key(|&r| (members[r].len(), r));
    for r in order {
        if members[r].is_empty() || 2 * members[r].len() >= target {
            continue;
        }
        let mut shared: BTreeMap<usize, usize> = BTreeMap::new();
        for &c in &members[r] {
            for &w in &adj[c] {
                if label[w] != r {
                    *shared.entry(label[w]).or_default() += 1;
                }
            }
        }
        let mut candidates: Vec<(usize, usize)> = shared.into_iter().collect();
        candidates.sort_by_key(|&(q, k)| (Reverse(k), members[q].len(), q));
        let body = region_closure(t, &members[r]);
        for (q, _) in candidates {
            for &c in &members[q] {
                mark(&mut marks, &closures.cells[c], 1);
            }
            let ok = simple_contact(&body, &marks, b2, b1);
            for &c in &members[q] {
                mark(&mut marks, &closures.cells[c], -1);
            }
            if ok {
                let moved = std::mem::take(&mut members[r]);
                for &c in &moved {
                    label[c] = q;
                }
                members[q].extend(moved);
                break;
            }
        }
    }
}

fn region_closure(t: &Topology, cells: &[usize]) -> [Vec<usize>; 3] {
    let cl = t.closure(3, cells);
    [cl[0].clone(), cl[1].clone(), cl[2].clone()]
}
