//! Renormalization-group cluster decoder.
//!
//! Defects are grouped into clusters whose members are chained by hops of torus
//! Chebyshev distance at most `2^level`. Each cluster is neutralised, if possible, by a
//! Pauli frame supported on the qubits of its bounding box; clusters that cannot be
//! neutralised wait for the next level. The decoder consumes no noise parameters.
//!
//! In the rotated frame where white qubits carry `(u, v) = (x, x xor z)` and black
//! qubits `(u, v) = (z, x)`, the `A` defects are `H u` and the `B` defects `H v` for one
//! shared incidence matrix `H`. A box solve is a single elimination with two
//! right-hand sides.

use crate::codegrid::{LatticeDims, PauliFrame, QubitCoord, StabilizerKind, Sublattice, Syndrome};
use crate::error::{Error, Result};
use crate::gf2kit::{row_reduce, BitRow};

/// A cyclic interval `start, start+1, .., start+len-1` on a ring of size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Arc {
    pub start: usize,
    pub len: usize,
}

impl Arc {
    /// Shortest arc covering every coordinate in `coords`; the whole ring if the
    /// coordinates leave no gap.
    pub fn covering(coords: &[usize], n: usize) -> Arc {
        let mut c: Vec<usize> = coords.to_vec();
        c.sort_unstable();
        c.dedup();
        if c.is_empty() {
            return Arc { start: 0, len: 0 };
        }
        // Largest cyclic gap between consecutive occupied coordinates.
        let mut best_gap = 0;
        let mut best_after = 0;
        for k in 0..c.len() {
            let next = if k + 1 < c.len() { c[k + 1] } else { c[0] + n };
            let gap = next - c[k] - 1;
            if gap > best_gap {
                best_gap = gap;
                best_after = k;
            }
        }
        if best_gap == 0 {
            return Arc { start: 0, len: n };
        }
        let start = if best_after + 1 < c.len() { c[best_after + 1] } else { c[0] };
        Arc { start, len: n - best_gap }
    }

    pub fn full(n: usize) -> Arc {
        Arc { start: 0, len: n }
    }

    pub fn is_full(&self, n: usize) -> bool {
        self.len >= n
    }

    /// Offset of `x` from the arc start, if it lies on the arc.
    pub fn offset(&self, x: usize, n: usize) -> Option<usize> {
        let d = (x + n - self.start % n) % n;
        (d < self.len).then_some(d)
    }
}

/// Rectangle of plaquettes on the torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TorusBox {
    pub cols: Arc,
    pub rows: Arc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    /// Defects in raster order `(j, i)`, `A` before `B` at the same plaquette.
    pub defects: Vec<(StabilizerKind, usize, usize)>,
    pub bbox: TorusBox,
    pub level: u32,
}

#[inline]
fn ring_distance(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(n - d)
}

fn sorted_defects(s: &Syndrome) -> Vec<(StabilizerKind, usize, usize)> {
    let mut out: Vec<_> = s
        .a_defects()
        .iter_ones()
        .map(|(i, j)| (StabilizerKind::A, i, j))
        .chain(s.b_defects().iter_ones().map(|(i, j)| (StabilizerKind::B, i, j)))
        .collect();
    out.sort_by_key(|&(k, i, j)| (j, i, k));
    out
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn group(
    defects: Vec<(StabilizerKind, usize, usize)>,
    dims: &LatticeDims,
    level: u32,
) -> Vec<Cluster> {
    let radius = 1usize.checked_shl(level).unwrap_or(usize::MAX);
    let n = defects.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for a in 0..n {
        for b in a + 1..n {
            let (_, ia, ja) = defects[a];
            let (_, ib, jb) = defects[b];
            if ring_distance(ia, ib, dims.l()) <= radius && ring_distance(ja, jb, dims.h()) <= radius {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut members: Vec<Vec<(StabilizerKind, usize, usize)>> = vec![Vec::new(); n];
    for (k, d) in defects.into_iter().enumerate() {
        let r = find(&mut parent, k);
        members[r].push(d);
    }
    members
        .into_iter()
        .filter(|m| !m.is_empty())
        .map(|defects| {
            let cols: Vec<usize> = defects.iter().map(|d| d.1).collect();
            let rows: Vec<usize> = defects.iter().map(|d| d.2).collect();
            let bbox = TorusBox { cols: Arc::covering(&cols, dims.l()), rows: Arc::covering(&rows, dims.h()) };
            Cluster { defects, bbox, level }
        })
        .collect()
}

/// Connected components of the defects under hops of Chebyshev distance `<= 2^level`,
/// ordered by their first defect in raster order.
pub fn cluster_defects(s: &Syndrome, level: u32) -> Vec<Cluster> {
    group(sorted_defects(s), s.dims(), level)
}

/// Solves for a frame on the qubits of `bbox` whose syndrome is exactly `defects`.
fn solve_box(
    dims: &LatticeDims,
    bbox: &TorusBox,
    defects: &[(StabilizerKind, usize, usize)],
) -> Option<PauliFrame> {
    let (l, h) = (dims.l(), dims.h());
    let full_cols = bbox.cols.is_full(l);
    let full_rows = bbox.rows.is_full(h);
    // Qubits: sites of every plaquette in the box.
    let qcols = if full_cols { Arc::full(l) } else { Arc { start: (bbox.cols.start + l - 1) % l, len: (bbox.cols.len + 2).min(l) } };
    let qrows = if full_rows { Arc::full(h) } else { Arc { start: bbox.rows.start, len: (bbox.rows.len + 1).min(h) } };
    let mut qubit_index = vec![usize::MAX; dims.n()];
    let mut qubits: Vec<QubitCoord> = Vec::new();
    for b in 0..bbox.rows.len {
        let j = (bbox.rows.start + b) % h;
        for a in 0..bbox.cols.len {
            let i = (bbox.cols.start + a) % l;
            for q in dims.black_sites(i, j).into_iter().chain(dims.white_sites(i, j)) {
                let k = dims.qubit_index(q);
                if qubit_index[k] == usize::MAX {
                    qubit_index[k] = 0;
                    qubits.push(q);
                }
            }
        }
    }
    // Raster order relative to the box corner keeps the system banded.
    let rel = |q: &QubitCoord| {
        let di = qcols.offset(q.i, l).unwrap_or(0);
        let dj = qrows.offset(q.j, h).unwrap_or(0);
        (dj, di, q.s)
    };
    qubits.sort_by_key(rel);
    for (k, q) in qubits.iter().enumerate() {
        qubit_index[dims.qubit_index(*q)] = k;
    }
    let nq = qubits.len();

    // Equations: every plaquette touched by a box qubit.
    let mut eq_index = vec![usize::MAX; dims.sites()];
    let mut eqs: Vec<(usize, usize)> = Vec::new();
    for q in &qubits {
        for (i, j) in dims.plaquettes_of(*q) {
            let k = j * l + i;
            if eq_index[k] == usize::MAX {
                eq_index[k] = eqs.len();
                eqs.push((i, j));
            }
        }
    }
    let mut rows: Vec<BitRow> = vec![BitRow::zeros(nq + 2); eqs.len()];
    for (k, q) in qubits.iter().enumerate() {
        for (i, j) in dims.plaquettes_of(*q) {
            rows[eq_index[j * l + i]].set(k, true);
        }
    }
    for &(kind, i, j) in defects {
        let e = eq_index[j * l + i];
        if e == usize::MAX {
            return None;
        }
        let c = match kind {
            StabilizerKind::A => nq,
            StabilizerKind::B => nq + 1,
        };
        rows[e].flip(c);
    }
    // Sort equations in the same banded order.
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by_key(|&e| {
        let (i, j) = eqs[e];
        (qrows.offset(j, h).unwrap_or(h), qcols.offset(i, l).unwrap_or(l))
    });
    let mut rows: Vec<BitRow> = order.into_iter().map(|e| std::mem::replace(&mut rows[e], BitRow::zeros(0))).collect();

    let pivots = row_reduce(&mut rows, nq);
    if rows[pivots.len()..].iter().any(|r| r.get(nq) || r.get(nq + 1)) {
        return None;
    }
    let mut frame = PauliFrame::identity(*dims);
    for (k, &c) in pivots.iter().enumerate() {
        let (u, v) = (rows[k].get(nq), rows[k].get(nq + 1));
        if !u && !v {
            continue;
        }
        let q = qubits[c];
        let (x, z) = match q.s {
            Sublattice::Black => (v, u),
            Sublattice::White => (u, u ^ v),
        };
        if x {
            frame.x_plane_mut(q.s).flip(q.i, q.j);
        }
        if z {
            frame.z_plane_mut(q.s).flip(q.i, q.j);
        }
    }
    Some(frame)
}

/// A frame on the qubits of the cluster's bounding box reproducing exactly its defects.
pub fn neutralize_cluster(cluster: &Cluster, dims: &LatticeDims) -> Result<PauliFrame> {
    solve_box(dims, &cluster.bbox, &cluster.defects).ok_or(Error::NotNeutral)
}

/// Highest clustering level, `ceil(log2(max(L, H)))`.
pub fn max_level(dims: &LatticeDims) -> u32 {
    dims.l().max(dims.h()).next_power_of_two().trailing_zeros()
}

/// Decodes any syndrome. At the top level the surviving defects are solved on the
/// whole torus; if that is inconsistent the failure is heralded.
pub fn rg_decode(s: &Syndrome, dims: &LatticeDims) -> Result<PauliFrame> {
    assert_eq!(s.dims(), dims);
    let top = max_level(dims);
    let mut correction = PauliFrame::identity(*dims);
    let mut remaining = sorted_defects(s);
    let mut failed_last: Vec<Vec<(StabilizerKind, usize, usize)>> = Vec::new();
    for level in 0..=top {
        if remaining.is_empty() {
            break;
        }
        let clusters = group(std::mem::take(&mut remaining), dims, level);
        let mut failed_now = Vec::new();
        for mut c in clusters {
            if level == top {
                c.bbox = TorusBox { cols: Arc::full(dims.l()), rows: Arc::full(dims.h()) };
            } else if failed_last.contains(&c.defects) {
                failed_now.push(c.defects.clone());
                remaining.extend(c.defects);
                continue;
            }
            match neutralize_cluster(&c, dims) {
                Ok(f) => correction.compose_assign(&f),
                Err(_) => {
                    failed_now.push(c.defects.clone());
                    remaining.extend(c.defects);
                }
            }
        }
        remaining.sort_by_key(|&(k, i, j)| (j, i, k));
        failed_last = failed_now;
    }
    if remaining.is_empty() {
        Ok(correction)
    } else {
        Err(Error::DecoderFailure(remaining.len()))
    }
}
