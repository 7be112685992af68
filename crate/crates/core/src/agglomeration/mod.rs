//! Element agglomeration and the coarse topology it induces.
//!
//! Agglomerates (coarse elements) come from a seeded recursive bisection of the
//! dual graph. Coarse facets are connected groups of fine facets shared by the
//! same pair of agglomerates (or one agglomerate and one boundary attribute);
//! coarse edges are connected chains of fine edges shared by the same set of
//! coarse facets, cut at coarse vertices.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet, VecDeque};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod growing;

pub use growing::grow_agglomerates;

use crate::error::{Error, Result};
use crate::la::CsrMatrix;
use crate::topology::{euler_characteristic, Topology};

/// One coarsening step: the coarse topology and its relation to the fine one.
#[derive(Debug, Clone)]
pub struct AgglomeratedTopology {
    pub coarse: Topology,
    /// `entities[d][x]`: fine dimension-`d` entities forming coarse entity `x`,
    /// with the sign relating the fine orientation to the coarse one.
    pub entities: [Vec<Vec<(usize, i8)>>; 4],
    /// `owner[d][i]`: `(dimension, id)` of the lowest-dimensional coarse entity
    /// whose closure contains fine dimension-`d` entity `i`.
    pub owner: [Vec<(usize, usize)>; 4],
}

impl AgglomeratedTopology {
    /// Fine element -> agglomerate map.
    pub fn parts(&self) -> Vec<usize> {
        let n: usize = self.entities[3].iter().map(|v| v.len()).sum();
        let mut p = vec![0; n];
        for (a, els) in self.entities[3].iter().enumerate() {
            for &(e, _) in els {
                p[e] = a;
            }
        }
        p
    }
}

/// Element adjacency graph through shared interior facets.
pub fn dual_graph(t: &Topology) -> Vec<Vec<usize>> {
    t.dual_graph()
}

/// Seeded recursive bisection into `n_parts` parts followed by a split of
/// every part into connected components. Labels are numbered by first
/// appearance in node order.
pub fn partition(adj: &[Vec<usize>], n_parts: usize, seed: u64) -> Vec<usize> {
    assert!(n_parts >= 1, "need at least one part");
    let n = adj.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = vec![usize::MAX; n];
    let mut next = 0;
    let mut in_set = vec![false; n];
    bisect_recursive(
        adj,
        (0..n).collect(),
        n_parts,
        &mut rng,
        &mut labels,
        &mut next,
        &mut in_set,
    );
    let mut labels = split_components(adj, &labels);
    let min_size = n / n_parts / 4;
    if min_size > 1 {
        merge_fragments(adj, &mut labels, min_size);
    }
    canonical_labels(&labels)
}

fn bisect_recursive(
    adj: &[Vec<usize>],
    nodes: Vec<usize>,
    k: usize,
    rng: &mut ChaCha8Rng,
    labels: &mut [usize],
    next: &mut usize,
    in_set: &mut [bool],
) {
    if nodes.is_empty() {
        return;
    }
    if k <= 1 {
        for &v in &nodes {
            labels[v] = *next;
        }
        *next += 1;
        return;
    }
    if nodes.len() <= k {
        for &v in &nodes {
            labels[v] = *next;
            *next += 1;
        }
        return;
    }
    let k1 = k / 2;
    let target = ((nodes.len() * k1) as f64 / k as f64).round() as usize;
    let target = target.clamp(1, nodes.len() - 1);
    let (a, b) = bisect(adj, &nodes, target, rng, in_set);
    bisect_recursive(adj, a, k1, rng, labels, next, in_set);
    bisect_recursive(adj, b, k - k1, rng, labels, next, in_set);
}

/// Splits `nodes` into a greedily grown part of `target` nodes and the rest.
/// Growth starts at a pseudo-peripheral node and always absorbs the frontier
/// node with the most neighbors already inside (ties by discovery order).
fn bisect(
    adj: &[Vec<usize>],
    nodes: &[usize],
    target: usize,
    rng: &mut ChaCha8Rng,
    in_set: &mut [bool],
) -> (Vec<usize>, Vec<usize>) {
    for &v in nodes {
        in_set[v] = true;
    }
    let mut start = nodes[rng.gen_range(0..nodes.len())];
    for _ in 0..2 {
        start = bfs_last(adj, start, in_set);
    }
    let mut taken: Vec<usize> = Vec::with_capacity(target);
    let mut gain: HashMap<usize, usize> = HashMap::new();
    let mut order: HashMap<usize, usize> = HashMap::new();
    let mut inside = HashSet::new();
    let mut heap = BinaryHeap::new();
    let mut sorted: Vec<usize> = nodes.to_vec();
    sorted.sort_unstable();
    let mut fallback = sorted.iter();
    order.insert(start, 0);
    heap.push((0usize, Reverse(0usize), start));
    while taken.len() < target {
        let v = loop {
            match heap.pop() {
                Some((g, _, v)) => {
                    if !inside.contains(&v) && gain.get(&v).copied().unwrap_or(0) == g {
                        break v;
                    }
                }
                None => {
                    let v = *fallback
                        .find(|v| !inside.contains(*v))
                        .expect("enough nodes");
                    break v;
                }
            }
        };
        inside.insert(v);
        taken.push(v);
        for &w in &adj[v] {
            if in_set[w] && !inside.contains(&w) {
                let n = order.len();
                let o = *order.entry(w).or_insert(n);
                let g = gain.entry(w).or_insert(0);
                *g += 1;
                heap.push((*g, Reverse(o), w));
            }
        }
    }
    let rest: Vec<usize> = nodes
        .iter()
        .copied()
        .filter(|v| !inside.contains(v))
        .collect();
    for &v in nodes {
        in_set[v] = false;
    }
    taken.sort_unstable();
    (taken, rest)
}

/// Merges connected parts much smaller than `min_size` into the neighboring
/// part they share the most dual-graph edges with.
fn merge_fragments(adj: &[Vec<usize>], labels: &mut [usize], min_size: usize) {
    let n_parts = labels.iter().max().map_or(0, |m| m + 1);
    let mut size = vec![0usize; n_parts];
    for &l in labels.iter() {
        size[l] += 1;
    }
    for p in 0..n_parts {
        if size[p] == 0 || size[p] >= min_size {
            continue;
        }
        let mut shared: BTreeMap<usize, usize> = BTreeMap::new();
        for v in 0..adj.len() {
            if labels[v] == p {
                for &w in &adj[v] {
                    if labels[w] != p {
                        *shared.entry(labels[w]).or_default() += 1;
                    }
                }
            }
        }
        if let Some((&q, _)) = shared.iter().max_by_key(|(&q, &c)| (c, Reverse(q))) {
            for l in labels.iter_mut() {
                if *l == p {
                    *l = q;
                }
            }
            size[q] += size[p];
            size[p] = 0;
        }
    }
}

fn bfs_last(adj: &[Vec<usize>], start: usize, in_set: &[bool]) -> usize {
    let mut seen = HashSet::from([start]);
    let mut queue = VecDeque::from([start]);
    let mut last = start;
    while let Some(v) = queue.pop_front() {
        last = v;
        for &w in &adj[v] {
            if in_set[w] && seen.insert(w) {
                queue.push_back(w);
            }
        }
    }
    last
}

/// Relabels so every label class is connected in `adj`.
pub fn split_components(adj: &[Vec<usize>], labels: &[usize]) -> Vec<usize> {
    let n = adj.len();
    let mut out = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if out[s] != usize::MAX {
            continue;
        }
        out[s] = next;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if out[w] == usize::MAX && labels[w] == labels[s] {
                    out[w] = next;
                    stack.push(w);
                }
            }
        }
        next += 1;
    }
    out
}

fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let n = map.len();
            *map.entry(l).or_insert(n)
        })
        .collect()
}

pub fn trivial_partition(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// Groups the children of each element of the parent mesh: element `e` of a
/// uniformly refined mesh goes to part `e / 8`.
pub fn refinement_partition(n: usize) -> Vec<usize> {
    assert!(
        n % 8 == 0,
        "element count of a refined mesh is a multiple of 8"
    );
    (0..n).map(|e| e / 8).collect()
}

/// Coarsens by reverting `levels` uniform refinements, one per level.
pub fn coarsen_by_refinement(fine: &Topology, levels: usize) -> Result<Vec<AgglomeratedTopology>> {
    let mut out: Vec<AgglomeratedTopology> = Vec::with_capacity(levels);
    for _ in 0..levels {
        let current = out.last().map_or(fine, |a| &a.coarse);
        out.push(coarsen_topology(
            current,
            &refinement_partition(current.n(3)),
        )?);
    }
    Ok(out)
}

struct FacetGroup {
    /// `(a, b)` agglomerates with `a < b`, or `(a, usize::MAX)` on the boundary.
    sides: (usize, usize),
    boundary_attr: u32,
    patch: u32,
    fine: Vec<(usize, i8)>,
}

/// Groups fine facets into coarse facets, each connected through fine edges.
fn coarse_facets(fine: &Topology, parts: &[usize]) -> Result<Vec<FacetGroup>> {
    let mut groups: BTreeMap<(usize, usize, u32, u32), Vec<(usize, i8)>> = BTreeMap::new();
    for f in 0..fine.n(2) {
        match *fine.facet_elements(f) {
            [(t, s)] => {
                let key = (
                    parts[t],
                    usize::MAX,
                    fine.facet_boundary_attrs()[f],
                    fine.facet_patches()[f],
                );
                groups.entry(key).or_default().push((f, s))
            }
            [(t0, s0), (t1, s1)] => {
                let (a, b) = (parts[t0], parts[t1]);
                if a == b {
                    continue;
                }
                let phi = if a < b { s0 } else { s1 };
                groups
                    .entry((a.min(b), a.max(b), 0, 0))
                    .or_default()
                    .push((f, phi));
            }
            _ => return Err(Error::Topology(format!("facet {f} without elements"))),
        }
    }
    let b2 = fine.incidence(2);
    let mut out = Vec::new();
    for ((a, b, attr, patch), facets) in groups {
        // Connected components through shared fine edges.
        let mut edge_owner: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &(f, _)) in facets.iter().enumerate() {
            for &e in b2.row_cols(f) {
                edge_owner.entry(e).or_default().push(i);
            }
        }
        let mut comp = vec![usize::MAX; facets.len()];
        let mut ncomp = 0;
        for s in 0..facets.len() {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = ncomp;
            let mut stack = vec![s];
            while let Some(i) = stack.pop() {
                for &e in b2.row_cols(facets[i].0) {
                    for &j in &edge_owner[&e] {
                        if comp[j] == usize::MAX {
                            comp[j] = ncomp;
                            stack.push(j);
                        }
                    }
                }
            }
            ncomp += 1;
        }
        for c in 0..ncomp {
            let mut fine_facets: Vec<(usize, i8)> = facets
                .iter()
                .zip(&comp)
                .filter(|(_, &k)| k == c)
                .map(|(&x, _)| x)
                .collect();
            // Orient the coarse facet like its first fine facet.
            if fine_facets[0].1 < 0 {
                for x in &mut fine_facets {
                    x.1 = -x.1;
                }
            }
            out.push(FacetGroup {
                sides: (a, b),
                boundary_attr: attr,
                patch,
                fine: fine_facets,
            });
        }
    }
    Ok(out)
}

/// Agglomerates violating the topological requirements for coarse spaces:
/// closure must be a ball (Euler characteristic 1, boundary 2), every coarse
/// facet a disk whose boundary is a single cycle, with no other coarse facet
/// touching its interior.
pub fn find_defective_agglomerates(fine: &Topology, parts: &[usize]) -> Result<Vec<usize>> {
    let n_agg = parts.iter().max().map_or(0, |m| m + 1);
    let groups = coarse_facets(fine, parts)?;
    let mut bad = vec![false; n_agg];

    let mut members = vec![Vec::new(); n_agg];
    for (t, &p) in parts.iter().enumerate() {
        members[p].push(t);
    }
    let mut surface = vec![Vec::new(); n_agg];
    for g in &groups {
        for &(f, _) in &g.fine {
            surface[g.sides.0].push(f);
            if g.sides.1 != usize::MAX {
                surface[g.sides.1].push(f);
            }
        }
    }
    for a in 0..n_agg {
        let cl = fine.closure(3, &members[a]);
        let counts: Vec<usize> = cl.iter().map(|c| c.len()).collect();
        let sc = fine.closure(2, &surface[a]);
        let scounts: Vec<usize> = sc[..3].iter().map(|c| c.len()).collect();
        if euler_characteristic(&counts) != 1 || euler_characteristic(&scounts) != 2 {
            bad[a] = true;
        }
    }

    // How many coarse facets touch each fine edge and vertex.
    let mut edge_touch = vec![0usize; fine.n(1)];
    let mut vertex_touch = vec![0usize; fine.n(0)];
    let closures: Vec<[Vec<usize>; 4]> = groups
        .iter()
        .map(|g| fine.closure(2, &g.fine.iter().map(|x| x.0).collect::<Vec<_>>()))
        .collect();
    for cl in &closures {
        for &e in &cl[1] {
            edge_touch[e] += 1;
        }
        for &v in &cl[0] {
            vertex_touch[v] += 1;
        }
    }
    let b1 = fine.incidence(1);
    let b2 = fine.incidence(2);
    for (g, cl) in groups.iter().zip(&closures) {
        let mut count: BTreeMap<usize, usize> = BTreeMap::new();
        for &(f, _) in &g.fine {
            for &e in b2.row_cols(f) {
                *count.entry(e).or_default() += 1;
            }
        }
        let mut ok = count.values().all(|&c| c <= 2);
        let boundary_edges: Vec<usize> = count
            .iter()
            .filter(|(_, &c)| c == 1)
            .map(|(&e, _)| e)
            .collect();
        let mut degree: BTreeMap<usize, usize> = BTreeMap::new();
        for &e in &boundary_edges {
            for &v in b1.row_cols(e) {
                *degree.entry(v).or_default() += 1;
            }
        }
        let counts = [cl[0].len(), cl[1].len(), cl[2].len()];
        ok &= euler_characteristic(&counts) == 1;
        ok &= degree.len() == boundary_edges.len() && degree.values().all(|&d| d == 2);
        ok &= is_connected_cycle_set(&boundary_edges, b1);
        // Interior entities must belong to this coarse facet only.
        for (&e, &c) in &count {
            if c == 2 && edge_touch[e] > 1 {
                ok = false;
            }
        }
        for &v in &cl[0] {
            if !degree.contains_key(&v) && vertex_touch[v] > 1 {
                ok = false;
            }
        }
        if !ok {
            bad[g.sides.0] = true;
            if g.sides.1 != usize::MAX {
                bad[g.sides.1] = true;
            }
        }
    }
    Ok((0..n_agg).filter(|&a| bad[a]).collect())
}

fn is_connected_cycle_set(edges: &[usize], b1: &CsrMatrix) -> bool {
    if edges.is_empty() {
        return true;
    }
    let mut at: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &e) in edges.iter().enumerate() {
        for &v in b1.row_cols(e) {
            at.entry(v).or_default().push(i);
        }
    }
    let mut seen = vec![false; edges.len()];
    seen[0] = true;
    let mut stack = vec![0];
    let mut n = 1;
    while let Some(i) = stack.pop() {
        for &v in b1.row_cols(edges[i]) {
            for &j in &at[&v] {
                if !seen[j] {
                    seen[j] = true;
                    n += 1;
                    stack.push(j);
                }
            }
        }
    }
    n == edges.len()
}

/// Splits defective agglomerates until every check passes.
pub fn repair_partition(fine: &Topology, parts: &[usize], seed: u64) -> Result<Vec<usize>> {
    let adj = fine.dual_graph();
    let mut parts = canonical_labels(&split_components(&adj, parts));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut in_set = vec![false; adj.len()];
    for _ in 0..=fine.n(3) {
        let bad = find_defective_agglomerates(fine, &parts)?;
        if bad.is_empty() {
            return Ok(parts);
        }
        let mut next = parts.iter().max().map_or(0, |m| m + 1);
        let mut progressed = false;
        for a in bad {
            let nodes: Vec<usize> = (0..parts.len()).filter(|&t| parts[t] == a).collect();
            if nodes.len() < 2 {
                continue;
            }
            let (_, b) = bisect(&adj, &nodes, nodes.len() / 2, &mut rng, &mut in_set);
            for v in b {
                parts[v] = next;
            }
            next += 1;
            progressed = true;
        }
        if !progressed {
            break;
        }
        parts = canonical_labels(&split_components(&adj, &parts));
    }
    Err(Error::RepairFailed(fine.n(3)))
}

/// Builds the coarse topology induced by a (repaired) partition.
pub fn coarsen_topology(fine: &Topology, parts: &[usize]) -> Result<AgglomeratedTopology> {
    if parts.len() != fine.n(3) {
        return Err(Error::DimensionMismatch("partition length".into()));
    }
    let n_agg = parts.iter().max().map_or(0, |m| m + 1);
    let groups = coarse_facets(fine, parts)?;
    let b1 = fine.incidence(1);
    let b2 = fine.incidence(2);

    // Coarse facets.
    let mut facet_of = vec![None; fine.n(2)];
    for (c, g) in groups.iter().enumerate() {
        for &(f, phi) in &g.fine {
            facet_of[f] = Some((c, phi));
        }
    }

    // Fine edges shared by two or more coarse facets, grouped by that set.
    let mut edge_sets: Vec<Vec<usize>> = vec![Vec::new(); fine.n(1)];
    for (c, g) in groups.iter().enumerate() {
        for &(f, _) in &g.fine {
            for &e in b2.row_cols(f) {
                if edge_sets[e].last() != Some(&c) {
                    edge_sets[e].push(c);
                }
            }
        }
    }
    let mut by_set: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for (e, s) in edge_sets.iter().enumerate() {
        if s.len() >= 2 {
            by_set.entry(s.clone()).or_default().push(e);
        }
    }
    let edge_groups: Vec<(Vec<usize>, Vec<usize>)> = by_set.into_iter().collect();

    let ends = |e: usize| -> (usize, usize) {
        let mut a = 0;
        let mut b = 0;
        for (v, s) in b1.row(e) {
            if s < 0.0 {
                a = v;
            } else {
                b = v;
            }
        }
        (a, b)
    };

    // Coarse vertices: fine vertices in several edge groups or not of degree
    // two inside their group.
    let mut vgroups: Vec<Vec<usize>> = vec![Vec::new(); fine.n(0)];
    let mut vdeg: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); fine.n(0)];
    for (gi, (_, edges)) in edge_groups.iter().enumerate() {
        for &e in edges {
            let (a, b) = ends(e);
            for v in [a, b] {
                if vgroups[v].last() != Some(&gi) {
                    vgroups[v].push(gi);
                }
                *vdeg[v].entry(gi).or_default() += 1;
            }
        }
    }
    let mut is_cvertex: Vec<bool> = (0..fine.n(0))
        .map(|v| vgroups[v].len() >= 2 || vdeg[v].values().any(|&d| d != 2))
        .collect();

    // Walk every group into chains between coarse vertices; close loops by
    // promoting vertices until each chain has two distinct ends.
    struct Chain {
        group: usize,
        edges: Vec<(usize, i8)>,
        start: usize,
        end: usize,
    }
    let chains: Vec<Chain> = loop {
        let mut chains = Vec::new();
        let mut promote = Vec::new();
        for (gi, (_, edges)) in edge_groups.iter().enumerate() {
            let mut at: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for &e in edges {
                let (a, b) = ends(e);
                at.entry(a).or_default().push(e);
                at.entry(b).or_default().push(e);
            }
            let mut used: BTreeMap<usize, bool> = edges.iter().map(|&e| (e, false)).collect();
            let walk = |v0: usize,
                        e0: usize,
                        used: &mut BTreeMap<usize, bool>|
             -> (Vec<(usize, i8)>, Vec<usize>) {
                let mut list = Vec::new();
                let mut verts = vec![v0];
                let (mut v, mut e) = (v0, e0);
                loop {
                    used.insert(e, true);
                    let (a, b) = ends(e);
                    let (w, s) = if a == v { (b, 1) } else { (a, -1) };
                    list.push((e, s));
                    verts.push(w);
                    if is_cvertex[w] || w == v0 {
                        break;
                    }
                    match at[&w].iter().find(|&&x| !used[&x]) {
                        Some(&x) => {
                            v = w;
                            e = x;
                        }
                        None => break,
                    }
                }
                (list, verts)
            };
            let starts: Vec<usize> = at.keys().copied().filter(|&v| is_cvertex[v]).collect();
            for v in starts {
                for &e in &at[&v].clone() {
                    if used[&e] {
                        continue;
                    }
                    let (list, verts) = walk(v, e, &mut used);
                    let end = *verts.last().unwrap();
                    if end == v {
                        promote.push(verts[verts.len() / 2]);
                    }
                    chains.push(Chain {
                        group: gi,
                        edges: list,
                        start: v,
                        end,
                    });
                }
            }
            // Loops without any coarse vertex.
            let remaining: Vec<usize> = used.iter().filter(|(_, &u)| !u).map(|(&e, _)| e).collect();
            for e in remaining {
                if used[&e] {
                    continue;
                }
                let (a, _) = ends(e);
                let (_, verts) = walk(a, e, &mut used);
                let vmin = *verts.iter().min().unwrap();
                promote.push(vmin);
            }
        }
        if promote.is_empty() {
            break chains;
        }
        for v in promote {
            is_cvertex[v] = true;
        }
    };

    let cvertices: Vec<usize> = (0..fine.n(0)).filter(|&v| is_cvertex[v]).collect();
    let mut cvertex_id = vec![usize::MAX; fine.n(0)];
    for (i, &v) in cvertices.iter().enumerate() {
        cvertex_id[v] = i;
    }

    // Orient each coarse edge like its first fine edge.
    let mut cedges: Vec<Vec<(usize, i8)>> = Vec::with_capacity(chains.len());
    let mut cedge_ends = Vec::with_capacity(chains.len());
    let mut cedge_group = Vec::with_capacity(chains.len());
    for ch in &chains {
        let (mut s, mut t) = (ch.start, ch.end);
        let mut list = ch.edges.clone();
        list.sort_unstable();
        if list[0].1 < 0 {
            std::mem::swap(&mut s, &mut t);
            for x in &mut list {
                x.1 = -x.1;
            }
        }
        cedges.push(list);
        cedge_ends.push((cvertex_id[s], cvertex_id[t]));
        cedge_group.push(ch.group);
    }

    // Coarse incidence matrices.
    let nf = groups.len();
    let mut t3 = Vec::new();
    for (c, g) in groups.iter().enumerate() {
        // Relative to the lower agglomerate, every fine facet of `g` has
        // sign * phi equal to the same value.
        let (f, phi) = g.fine[0];
        let (t, s) = fine
            .facet_elements(f)
            .iter()
            .copied()
            .find(|&(t, _)| parts[t] == g.sides.0)
            .unwrap();
        debug_assert_eq!(parts[t], g.sides.0);
        let sigma = (s * phi) as f64;
        t3.push((g.sides.0, c, sigma));
        if g.sides.1 != usize::MAX {
            t3.push((g.sides.1, c, -sigma));
        }
    }
    let mut t2 = Vec::new();
    let b2t = b2.transpose();
    for (ce, list) in cedges.iter().enumerate() {
        let (e, phi_e) = list[0];
        for &cf in &edge_groups[cedge_group[ce]].0 {
            let mut sum = 0.0;
            for (f, s) in b2t.row(e) {
                if let Some((c, phi_f)) = facet_of[f] {
                    if c == cf {
                        sum += s * phi_f as f64 * phi_e as f64;
                    }
                }
            }
            if sum.abs() != 1.0 {
                return Err(Error::Topology(format!(
                    "coarse edge {ce} meets coarse facet {cf} inconsistently"
                )));
            }
            t2.push((cf, ce, sum));
        }
    }
    let mut t1 = Vec::new();
    for (ce, &(s, t)) in cedge_ends.iter().enumerate() {
        t1.push((ce, s, -1.0));
        t1.push((ce, t, 1.0));
    }
    let ne = cedges.len();
    let nv = cvertices.len();
    let inc = [
        CsrMatrix::from_triplets(ne, nv, &t1),
        CsrMatrix::from_triplets(nf, ne, &t2),
        CsrMatrix::from_triplets(n_agg, nf, &t3),
    ];
    for d in 1..3 {
        if inc[d].matmul(&inc[d - 1])?.max_abs() != 0.0 {
            return Err(Error::Topology(
                "coarse incidence does not form a complex".into(),
            ));
        }
    }

    let mut members = vec![Vec::new(); n_agg];
    for (t, &p) in parts.iter().enumerate() {
        members[p].push((t, 1i8));
    }
    let element_attrs = members
        .iter()
        .map(|els| {
            let mut count: BTreeMap<u32, usize> = BTreeMap::new();
            for &(t, _) in els {
                *count.entry(fine.element_attrs()[t]).or_default() += 1;
            }
            let max = count.values().copied().max().unwrap_or(0);
            count
                .into_iter()
                .find(|&(_, c)| c == max)
                .map_or(1, |(a, _)| a)
        })
        .collect();
    let facet_attrs = groups.iter().map(|g| g.boundary_attr).collect();
    let facet_patches = groups.iter().map(|g| g.patch).collect();
    let coarse = Topology::new(
        [nv, ne, nf, n_agg],
        inc,
        element_attrs,
        facet_attrs,
        facet_patches,
    )?;

    let entities = [
        cvertices.iter().map(|&v| vec![(v, 1i8)]).collect(),
        cedges,
        groups.into_iter().map(|g| g.fine).collect(),
        members,
    ];
    let owner = compute_owners(fine, &entities)?;
    Ok(AgglomeratedTopology {
        coarse,
        entities,
        owner,
    })
}

fn compute_owners(
    fine: &Topology,
    entities: &[Vec<Vec<(usize, i8)>>; 4],
) -> Result<[Vec<(usize, usize)>; 4]> {
    let mut owner: [Vec<(usize, usize)>; 4] =
        std::array::from_fn(|d| vec![(usize::MAX, usize::MAX); fine.n(d)]);
    let mut ambiguous: [Vec<bool>; 4] = std::array::from_fn(|d| vec![false; fine.n(d)]);
    for dim in (0..4).rev() {
        for (x, list) in entities[dim].iter().enumerate() {
            let ids: Vec<usize> = list.iter().map(|e| e.0).collect();
            let cl = fine.closure(dim, &ids);
            for (d, set) in cl.iter().enumerate().take(dim + 1) {
                for &i in set {
                    let cur = owner[d][i];
                    ambiguous[d][i] = cur.0 == dim && cur.1 != x;
                    owner[d][i] = (dim, x);
                }
            }
        }
    }
    for d in 0..4 {
        if let Some(i) = ambiguous[d].iter().position(|&a| a) {
            return Err(Error::Topology(format!(
                "fine entity {i} of dimension {d} has no unique lowest-dimensional coarse owner"
            )));
        }
    }
    Ok(owner)
}

/// Agglomerates, repairs and coarsens repeatedly, one level per factor.
/// Each level uses [`grow_agglomerates`] with the factor as target size.
pub fn coarsen_recursive(
    fine: &Topology,
    factors: &[usize],
    seed: u64,
) -> Result<Vec<AgglomeratedTopology>> {
    let mut out: Vec<AgglomeratedTopology> = Vec::with_capacity(factors.len());
    for (l, &factor) in factors.iter().enumerate() {
        assert!(factor >= 2, "coarsening factor must be at least 2");
        let current = out.last().map_or(fine, |a| &a.coarse);
        let level_seed = seed.wrapping_add(l as u64);
        let parts = grow_agglomerates(current, factor, level_seed);
        let parts = repair_partition(current, &parts, level_seed)?;
        out.push(coarsen_topology(current, &parts)?);
    }
    Ok(out)
}

/// Writes a plain-text listing of every coarse level (numbered from 2, the
/// finest level being 1): entity counts followed by one line per coarse
/// entity with its signed constituents on the next finer level.
pub fn write_topology_dump<W: Write>(levels: &[AgglomeratedTopology], mut out: W) -> Result<()> {
    const NAMES: [&str; 4] = ["vertex", "edge", "facet", "element"];
    for (l, a) in levels.iter().enumerate() {
        let c = a.coarse.counts();
        writeln!(
            out,
            "level {} vertices {} edges {} facets {} elements {}",
            l + 2,
            c[0],
            c[1],
            c[2],
            c[3]
        )?;
        for d in 0..4 {
            for (x, list) in a.entities[d].iter().enumerate() {
                write!(out, "{} {}:", NAMES[d], x)?;
                for &(i, s) in list {
                    write!(out, " {}{}", if s < 0 { "-" } else { "+" }, i)?;
                }
                writeln!(out)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;

    fn path(n: usize) -> Vec<Vec<usize>> {
        (0..n)
            .map(|i| {
                let mut v = Vec::new();
                if i > 0 {
                    v.push(i - 1);
                }
                if i + 1 < n {
                    v.push(i + 1);
                }
                v
            })
            .collect()
    }

    #[test]
    fn partition_examples() {
        let g = path(4);
        assert_eq!(partition(&g, 1, 0), vec![0; 4]);
        assert_eq!(partition(&g, 4, 0), vec![0, 1, 2, 3]);
        for seed in 0..5 {
            assert_eq!(partition(&g, 2, seed), vec![0, 0, 1, 1]);
        }
    }

    #[test]
    fn trivial_partition_reproduces_fine_counts() {
        let t = Topology::from_mesh(&Mesh::cube(1));
        let a = coarsen_topology(&t, &trivial_partition(t.n(3))).unwrap();
        assert_eq!(a.coarse.counts(), t.counts());
        for d in 0..4 {
            assert!(a.entities[d].iter().all(|l| l.len() == 1 && l[0].1 == 1));
        }
    }

    #[test]
    fn single_agglomerate_cube() {
        let t = Topology::from_mesh(&Mesh::cube(2));
        let parts = vec![0; t.n(3)];
        assert!(find_defective_agglomerates(&t, &parts).unwrap().is_empty());
        let a = coarsen_topology(&t, &parts).unwrap();
        // One coarse facet per planar boundary patch: the coarse cube.
        assert_eq!(a.coarse.counts(), [8, 12, 6, 1]);
        assert!((0..6).all(|f| a.coarse.is_boundary_facet(f)));
    }

    #[test]
    fn hollow_shell_is_defective() {
        let m = Mesh::cube(3);
        let t = Topology::from_mesh(&m);
        let bf = t.boundary_flags();
        let parts: Vec<usize> = (0..t.n(3))
            .map(|e| {
                let touches = m.elements()[e].iter().any(|&v| bf[0][v]);
                if touches {
                    0
                } else {
                    1
                }
            })
            .collect();
        let parts = canonical_labels(&parts);
        let bad = find_defective_agglomerates(&t, &parts).unwrap();
        assert!(bad.contains(&parts[0]));
        let repaired = repair_partition(&t, &parts, 1).unwrap();
        assert!(find_defective_agglomerates(&t, &repaired)
            .unwrap()
            .is_empty());
    }
}
