//! Exact decoder for pure dephasing.
//!
//! Under pure `Z` noise the `A` defects come only from black qubits and the `B`
//! defects only from white ones, so each sublattice is decoded on its own:
//!
//! 1. sweep defects down to a single row with local `Z` flips,
//! 2. solve `(I + F^H) x = r` for the first row `x` and fill the others with rule 108,
//! 3. multiply by each biased logical and keep the lightest representative.
//!
//! The white sublattice is handled by the black pipeline after the point reflection
//! `(i, j) -> (-i, -j)` on sites and `(i, j) -> (-i, -j - 1)` on plaquettes.

use serde::{Deserialize, Serialize};

use crate::codegrid::{syndrome, BitGrid, LatticeDims, PauliFrame, Sublattice, Syndrome};
use crate::error::{Error, Result};
use crate::gf2kit::{mat_pow, row_reduce, rule108_matrix, rule108_step, BitRow, Gf2Matrix};
use crate::logicals::{tile_grid, LogicalLabel, LogicalSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    pub correction: PauliFrame,
    /// Weights of the four class representatives, in [`LogicalLabel::ALL`] order, for
    /// black then white.
    pub class_weights: [[usize; 4]; 2],
    pub chosen_class: [LogicalLabel; 2],
}

/// Defect plane that a sublattice's `Z` errors produce, mapped into the black frame.
fn black_role_defects(s: &Syndrome, sub: Sublattice) -> BitGrid {
    match sub {
        Sublattice::Black => s.a_defects().clone(),
        Sublattice::White => s.b_defects().reflected(0, 1),
    }
}

/// Clears rows `H-1 .. 1` of a black-frame defect plane. Returns the `Z` support and
/// the leftover row 0.
fn sweep_black(defects: &BitGrid) -> (BitGrid, BitRow) {
    let h = defects.height();
    let mut work = defects.clone();
    let mut flips = BitGrid::zeros(defects.width(), h);
    for j in (1..h).rev() {
        let row = work.row(j).clone();
        if row.is_zero() {
            continue;
        }
        work.row_mut(j - 1).xor_assign(&rule108_step(&row));
        *flips.row_mut(j) = row;
    }
    (flips, work.row(0).clone())
}

fn from_black_role(grid: BitGrid, sub: Sublattice) -> BitGrid {
    match sub {
        Sublattice::Black => grid,
        Sublattice::White => grid.reflected(0, 0),
    }
}

/// Sweeps the sublattice's defects onto one plaquette row.
///
/// `C1` is returned as a pure-Z frame on `sub`. For black the leftover row is plaquette
/// row 0; for white it is plaquette row `H-1`, read in the reflected frame (entry `i`
/// is plaquette `(-i, H-1)`).
pub fn sweep_to_row0(s: &Syndrome, sub: Sublattice) -> (PauliFrame, BitRow) {
    let (flips, residual) = sweep_black(&black_role_defects(s, sub));
    (PauliFrame::pure_z(*s.dims(), sub, from_black_role(flips, sub)), residual)
}

/// Precomputed elimination for `(I + F^H) x = r` on rows of length `L`.
#[derive(Debug, Clone)]
pub struct Row0Solver {
    len: usize,
    height: usize,
    /// `E` with `E (I + F^H)` in reduced echelon form.
    transform: Vec<BitRow>,
    pivots: Vec<usize>,
}

impl Row0Solver {
    pub fn new(len: usize, height: usize) -> Self {
        let m = mat_pow(&rule108_matrix(len), height as u64).add(&Gf2Matrix::identity(len));
        let mut aug: Vec<BitRow> = m
            .rows()
            .iter()
            .enumerate()
            .map(|(k, r)| BitRow::from_bits((0..2 * len).map(|c| if c < len { r.get(c) } else { c - len == k })))
            .collect();
        let pivots = row_reduce(&mut aug, len);
        let transform = aug.iter().map(|r| BitRow::from_bits((len..2 * len).map(|c| r.get(c)))).collect();
        Row0Solver { len, height, transform, pivots }
    }

    /// One solution `x` of `(I + F^H) x = r`, or `None` if the system is inconsistent.
    pub fn solve(&self, r: &BitRow) -> Option<BitRow> {
        assert_eq!(r.len(), self.len);
        if self.transform[self.pivots.len()..].iter().any(|e| e.and_parity(r)) {
            return None;
        }
        let mut x = BitRow::zeros(self.len);
        for (k, &c) in self.pivots.iter().enumerate() {
            if self.transform[k].and_parity(r) {
                x.set(c, true);
            }
        }
        Some(x)
    }

    /// The black-frame `Z` grid whose only defects are `r` on row 0.
    pub fn solve_grid(&self, r: &BitRow) -> Option<BitGrid> {
        let x0 = self.solve(r)?;
        let mut rows = vec![BitRow::zeros(self.len); self.height];
        let mut cur = x0.clone();
        rows[0] = x0;
        for j in (1..self.height).rev() {
            cur = rule108_step(&cur);
            rows[j] = cur.clone();
        }
        Some(BitGrid::from_rows(self.len, rows))
    }
}

/// Pure-Z black frame whose syndrome is `residual` on plaquette row 0 and zero elsewhere.
pub fn solve_row0(residual: &BitRow, dims: &LatticeDims) -> Result<PauliFrame> {
    let grid = Row0Solver::new(dims.l(), dims.h())
        .solve_grid(residual)
        .ok_or(Error::Invalid(Sublattice::Black))?;
    Ok(PauliFrame::pure_z(*dims, Sublattice::Black, grid))
}

fn xor_grid(a: &BitGrid, b: &BitGrid) -> BitGrid {
    let mut out = a.clone();
    out.xor_assign(b);
    out
}

/// Lightest of the four class representatives of a pure-Z grid on one sublattice.
/// Ties go to the smallest label.
fn minimize_grid(grid: &BitGrid, tiles: &[BitGrid; 3]) -> (BitGrid, [usize; 4], LogicalLabel) {
    let candidates: Vec<(LogicalLabel, BitGrid)> = LogicalLabel::ALL
        .iter()
        .map(|&label| {
            let g = match label {
                LogicalLabel::I => grid.clone(),
                LogicalLabel::L => xor_grid(grid, &tiles[0]),
                LogicalLabel::M => xor_grid(grid, &tiles[1]),
                LogicalLabel::LM => xor_grid(grid, &tiles[2]),
            };
            (label, g)
        })
        .collect();
    let weights = [0, 1, 2, 3].map(|k| candidates[k].1.weight());
    let best = (0..4).min_by_key(|&k| (weights[k], candidates[k].0)).expect("four candidates");
    let (label, g) = candidates.into_iter().nth(best).expect("index in range");
    (g, weights, label)
}

fn tiles_for(dims: &LatticeDims) -> [BitGrid; 3] {
    [tile_grid(dims, 0), tile_grid(dims, 1), tile_grid(dims, 2)]
}

/// Replaces each sublattice's `Z` part of `c` by its lightest class representative.
/// `c` is expected to be pure `Z`; any `X` part is left untouched.
pub fn minimize_over_logicals(c: &PauliFrame, logicals: &LogicalSet) -> DecodeResult {
    let dims = *logicals.dims();
    let tiles = tiles_for(&dims);
    let mut out = c.clone();
    let mut class_weights = [[0; 4]; 2];
    let mut chosen_class = [LogicalLabel::I; 2];
    for s in Sublattice::BOTH {
        let (g, w, label) = minimize_grid(c.z_plane(s), &tiles);
        *out.z_plane_mut(s) = g;
        class_weights[s.index()] = w;
        chosen_class[s.index()] = label;
    }
    DecodeResult { correction: out, class_weights, chosen_class }
}

/// Reusable decoder for one lattice size.
#[derive(Debug, Clone)]
pub struct ExactDecoder {
    dims: LatticeDims,
    solver: Row0Solver,
    tiles: [BitGrid; 3],
}

impl ExactDecoder {
    pub fn new(dims: LatticeDims) -> Self {
        ExactDecoder { dims, solver: Row0Solver::new(dims.l(), dims.h()), tiles: tiles_for(&dims) }
    }

    pub fn dims(&self) -> &LatticeDims {
        &self.dims
    }

    /// Decodes one sublattice, returning the chosen `Z` grid, class weights and label.
    pub fn decode_sublattice(
        &self,
        s: &Syndrome,
        sub: Sublattice,
    ) -> Result<(BitGrid, [usize; 4], LogicalLabel)> {
        let (mut flips, residual) = sweep_black(&black_role_defects(s, sub));
        let c2 = self.solver.solve_grid(&residual).ok_or(Error::Invalid(sub))?;
        flips.xor_assign(&c2);
        Ok(minimize_grid(&from_black_role(flips, sub), &self.tiles))
    }

    pub fn decode(&self, s: &Syndrome) -> Result<DecodeResult> {
        assert_eq!(s.dims(), &self.dims);
        let (gb, wb, lb) = self.decode_sublattice(s, Sublattice::Black)?;
        let (gw, ww, lw) = self.decode_sublattice(s, Sublattice::White)?;
        let mut correction = PauliFrame::pure_z(self.dims, Sublattice::Black, gb);
        *correction.z_plane_mut(Sublattice::White) = gw;
        Ok(DecodeResult { correction, class_weights: [wb, ww], chosen_class: [lb, lw] })
    }
}

/// Sweep, solve and minimise on both sublattices.
pub fn decode_infinite_bias(s: &Syndrome, dims: &LatticeDims) -> Result<DecodeResult> {
    ExactDecoder::new(*dims).decode(s)
}

/// True if applying `c` to undo `e` leaves a nontrivial logical.
pub fn is_failure(e: &PauliFrame, c: &PauliFrame, logicals: &LogicalSet) -> Result<bool> {
    let residual = e.compose(c);
    if !syndrome(&residual).is_zero() {
        return Err(Error::NotInNormalizer);
    }
    Ok(!logicals.classify_unchecked(&residual).is_trivial())
}

/// Hoeffding bound `3 exp(-(4n/3)(p - 1/2)^2)` on the chance that i.i.d. flips with
/// probability `p` make a majority-weight logical coset the lighter one.
pub fn hoeffding_failure_bound(n_support: usize, p: f64) -> f64 {
    let d = p - 0.5;
    3.0 * (-(4.0 * n_support as f64 / 3.0) * d * d).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codegrid::{PauliLetter, QubitCoord};
    use crate::logicals::LogicalClass;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn dims(l: usize, h: usize) -> LatticeDims {
        LatticeDims::new(l, h).unwrap()
    }

    fn random_z(d: LatticeDims, p: f64, rng: &mut impl Rng) -> PauliFrame {
        let mut f = PauliFrame::identity(d);
        for k in 0..d.n() {
            if rng.random::<f64>() < p {
                f.apply(d.qubit_at(k), PauliLetter::Z);
            }
        }
        f
    }

    fn grid_from_mask(l: usize, h: usize, mask: u32) -> BitGrid {
        let mut g = BitGrid::zeros(l, h);
        for k in 0..l * h {
            g.set(k % l, k / l, mask >> k & 1 == 1);
        }
        g
    }

    #[test]
    fn sweep_examples() {
        let d = dims(6, 9);
        let (c1, r) = sweep_to_row0(&Syndrome::zero(d), Sublattice::Black);
        assert!(c1.is_identity() && r.is_zero());

        // Row-0-only defects pass straight through.
        let e = PauliFrame::single(d, QubitCoord::black(3, 1), PauliLetter::Z);
        let mut s = syndrome(&e);
        *s.defects_mut(crate::codegrid::StabilizerKind::A).row_mut(1) = BitRow::zeros(6);
        let (c1, r) = sweep_to_row0(&s, Sublattice::Black);
        assert!(c1.is_identity());
        assert_eq!(&r, s.a_defects().row(0));
    }

    #[test]
    fn sweep_confines_defects() {
        let d = dims(6, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for sub in Sublattice::BOTH {
            let top = if sub == Sublattice::Black { 0 } else { 8 };
            for _ in 0..100 {
                let e = random_z(d, 0.1, &mut rng);
                let s = syndrome(&e);
                let (c1, r) = sweep_to_row0(&s, sub);
                assert!(c1.is_pure_z() && c1.weight_on(sub) == c1.weight());
                let left = syndrome(&c1.compose(&e));
                let plane = if sub == Sublattice::Black { left.a_defects() } else { left.b_defects() };
                for (i, j) in plane.iter_ones() {
                    assert_eq!(j, top);
                    let ri = if sub == Sublattice::Black { i } else { (6 - i) % 6 };
                    assert!(r.get(ri));
                }
                assert_eq!(plane.weight(), r.weight());
            }
        }
        let e = PauliFrame::single(d, QubitCoord::black(2, 3), PauliLetter::Z);
        let (c1, _) = sweep_to_row0(&syndrome(&e), Sublattice::Black);
        let left = syndrome(&c1.compose(&e));
        assert!((1..9).all(|j| left.a_defects().row(j).is_zero()));
    }

    #[test]
    fn row0_solve_satisfies_postcondition() {
        let d = dims(6, 9);
        assert!(solve_row0(&BitRow::zeros(6), &d).unwrap().is_identity());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let e = random_z(d, 0.2, &mut rng);
            let (_, r) = sweep_to_row0(&syndrome(&e), Sublattice::Black);
            let c2 = solve_row0(&r, &d).unwrap();
            let s = syndrome(&c2);
            assert_eq!(s.a_defects().row(0), &r);
            assert_eq!(s.a_defects().weight(), r.weight());
            assert!(s.b_defects().is_zero());
        }
        // Odd-weight rows are never reachable.
        assert_eq!(solve_row0(&BitRow::unit(6, 0), &d), Err(Error::Invalid(Sublattice::Black)));
    }

    #[test]
    fn single_y_always_fails() {
        // The syndrome stays solvable but the correction lands in the wrong class.
        for (l, h) in [(3, 3), (6, 9), (9, 12)] {
            let d = dims(l, h);
            let dec = ExactDecoder::new(d);
            let set = LogicalSet::new(d);
            for k in 0..d.n() {
                let e = PauliFrame::single(d, d.qubit_at(k), PauliLetter::Y);
                let r = dec.decode(&syndrome(&e)).unwrap();
                assert!(is_failure(&e, &r.correction, &set).unwrap(), "{l}x{h} q={k}");
            }
        }
    }

    #[test]
    fn unreachable_syndrome_is_invalid() {
        let d = dims(6, 9);
        let mut a = BitGrid::zeros(6, 9);
        a.set(2, 5, true);
        let s = Syndrome::from_grids(d, a, BitGrid::zeros(6, 9));
        assert_eq!(decode_infinite_bias(&s, &d), Err(Error::Invalid(Sublattice::Black)));
        let mut b = BitGrid::zeros(6, 9);
        b.set(0, 0, true);
        let s = Syndrome::from_grids(d, BitGrid::zeros(6, 9), b);
        assert_eq!(decode_infinite_bias(&s, &d), Err(Error::Invalid(Sublattice::White)));
    }

    #[test]
    fn single_z_is_its_own_correction() {
        let d = dims(6, 9);
        for k in 0..d.n() {
            let e = PauliFrame::single(d, d.qubit_at(k), PauliLetter::Z);
            let r = decode_infinite_bias(&syndrome(&e), &d).unwrap();
            assert_eq!(r.correction, e);
        }
        let r = decode_infinite_bias(&Syndrome::zero(d), &d).unwrap();
        assert!(r.correction.is_identity());
        assert_eq!(r.chosen_class, [LogicalLabel::I; 2]);
    }

    #[test]
    fn minimize_examples() {
        let d = dims(6, 9);
        let set = LogicalSet::new(d);
        let m = set.representative(Sublattice::Black, LogicalLabel::M);
        assert!(minimize_over_logicals(&m, &set).correction.is_identity());
        let one = PauliFrame::single(d, QubitCoord::black(0, 0), PauliLetter::Z);
        assert_eq!(minimize_over_logicals(&one, &set).correction, one);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let mut e = PauliFrame::identity(d);
            while e.weight() < 3 {
                e.apply(QubitCoord::white(rng.random_range(0..6), rng.random_range(0..9)), PauliLetter::Z);
            }
            let c = e.compose(&set.representative(Sublattice::White, LogicalLabel::M));
            let r = minimize_over_logicals(&c, &set);
            assert_eq!(r.correction, e);
            assert_eq!(r.chosen_class[1], LogicalLabel::M);
        }
    }

    #[test]
    fn ties_pick_smallest_label() {
        let tiles = tiles_for(&dims(3, 3));
        // L and M split evenly: weight of grid and grid^L coincide at 3.
        let mut g = BitGrid::zeros(3, 3);
        for (i, j) in [(0, 0), (1, 0), (0, 1)] {
            g.set(i, j, true);
        }
        let (_, w, label) = minimize_grid(&g, &tiles);
        let min = *w.iter().min().unwrap();
        let first = LogicalLabel::ALL.iter().zip(w).filter(|(_, x)| *x == min).map(|(l, _)| *l).min().unwrap();
        assert_eq!(label, first);
    }

    #[test]
    fn exhaustive_three_by_three() {
        let d = dims(3, 3);
        let dec = ExactDecoder::new(d);
        let set = LogicalSet::new(d);
        for sub in Sublattice::BOTH {
            let mut best: HashMap<Syndrome, (usize, usize)> = HashMap::new();
            for mask in 0u32..512 {
                let e = PauliFrame::pure_z(d, sub, grid_from_mask(3, 3, mask));
                let entry = best.entry(syndrome(&e)).or_insert((usize::MAX, 0));
                let w = e.weight();
                if w < entry.0 {
                    *entry = (w, 1);
                } else if w == entry.0 {
                    entry.1 += 1;
                }
            }
            for mask in 0u32..512 {
                let e = PauliFrame::pure_z(d, sub, grid_from_mask(3, 3, mask));
                let s = syndrome(&e);
                let r = dec.decode(&s).unwrap();
                assert_eq!(syndrome(&r.correction), s);
                let (min_w, count) = best[&s];
                assert_eq!(r.correction.weight(), min_w, "{sub} mask={mask:09b}");
                if count == 1 && e.weight() == min_w {
                    assert!(!is_failure(&e, &r.correction, &set).unwrap());
                }
            }
        }
    }

    #[test]
    fn failure_examples() {
        let d = dims(6, 9);
        let set = LogicalSet::new(d);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let e = random_z(d, 0.1, &mut rng);
        assert!(!is_failure(&e, &e, &set).unwrap());
        let m = set.representative(Sublattice::Black, LogicalLabel::M);
        assert!(is_failure(&e, &e.compose(&m), &set).unwrap());
        let one = PauliFrame::single(d, QubitCoord::black(0, 0), PauliLetter::Z);
        assert_eq!(is_failure(&e, &e.compose(&one), &set), Err(Error::NotInNormalizer));
        let mut stab = e.clone();
        for (q, p) in crate::codegrid::stabilizer_support(&d, crate::codegrid::StabilizerKind::B, 2, 2) {
            stab.apply(q, p);
        }
        assert!(!is_failure(&e, &stab, &set).unwrap());
        let r = set.classify_unchecked(&e.compose(&e.compose(&m)));
        assert_eq!(r, LogicalClass::Biased { black: LogicalLabel::M, white: LogicalLabel::I });
    }

    #[test]
    fn hoeffding_examples() {
        assert_eq!(hoeffding_failure_bound(108, 0.5), 3.0);
        assert!((hoeffding_failure_bound(108, 0.3) - 3.0 * (-5.76f64).exp()).abs() < 1e-15);
        assert!((hoeffding_failure_bound(108, 0.3) - 9.45e-3).abs() < 1e-5);
        assert!(hoeffding_failure_bound(1_000_000, 0.3) < 1e-300);
        let mut last = f64::INFINITY;
        for n in [1, 10, 100, 1000] {
            let b = hoeffding_failure_bound(n, 0.4);
            assert!(b <= last);
            last = b;
        }
    }

    #[test]
    fn round_trip_many_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for (l, h) in [(3, 6), (6, 9), (9, 12), (12, 15)] {
            let d = dims(l, h);
            let dec = ExactDecoder::new(d);
            for _ in 0..2500 {
                let p = rng.random::<f64>() * 0.5;
                let e = random_z(d, p, &mut rng);
                let s = syndrome(&e);
                let r = dec.decode(&s).unwrap();
                assert_eq!(syndrome(&r.correction), s);
                let w = r.correction.weight_on(Sublattice::Black);
                assert_eq!(w, *r.class_weights[0].iter().min().unwrap());
            }
        }
    }

    proptest! {
        #[test]
        fn decode_matches_syndrome(seed in any::<u64>(), p in 0.0f64..0.5) {
            let d = dims(12, 15);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = random_z(d, p, &mut rng);
            let s = syndrome(&e);
            let r = decode_infinite_bias(&s, &d).unwrap();
            prop_assert_eq!(syndrome(&r.correction), s);
            prop_assert!(r.correction.weight() <= e.weight());
        }
    }
}
