//! The periodic XYZ color-code lattice.
//!
//! Qubits sit on the two sublattices of a honeycomb drawn on an `L x H` grid with a
//! two-qubit unit cell: `(i, j, black)` and `(i, j, white)` for column `i` and row `j`.
//! Plaquette `(i, j)` carries two stabilizers. `A(i,j)` acts as `X` on its black sites
//! and `Z` on its white sites; `B(i,j)` acts as `Z` on black and `Y` on white.
//!
//! Plaquette `(i, j)` touches black sites `(i,j), (i,j+1), (i+1,j+1)` and white sites
//! `(i-1,j), (i,j), (i,j+1)`. With this placement a `Z` on `(i,j,black)` excites
//! `A(i,j)`, `A(i,j-1)`, `A(i-1,j-1)`, and the pure-`Z` zero-syndrome rows obey rule 108
//! on the black sublattice and its point reflection on the white one.
//!
//! Frames are stored as four `L x H` bit grids (X and Z parts per sublattice), each
//! row-major with one packed [`BitRow`] per grid row.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2kit::BitRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sublattice {
    Black,
    White,
}

impl Sublattice {
    pub const BOTH: [Sublattice; 2] = [Sublattice::Black, Sublattice::White];

    pub fn index(self) -> usize {
        match self {
            Sublattice::Black => 0,
            Sublattice::White => 1,
        }
    }
}

impl fmt::Display for Sublattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sublattice::Black => "black",
            Sublattice::White => "white",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliLetter {
    X,
    Y,
    Z,
}

impl PauliLetter {
    /// Symplectic `(x, z)` bits of the letter.
    #[inline]
    pub fn bits(self) -> (bool, bool) {
        match self {
            PauliLetter::X => (true, false),
            PauliLetter::Y => (true, true),
            PauliLetter::Z => (false, true),
        }
    }

    pub fn from_bits(x: bool, z: bool) -> Option<PauliLetter> {
        match (x, z) {
            (false, false) => None,
            (true, false) => Some(PauliLetter::X),
            (true, true) => Some(PauliLetter::Y),
            (false, true) => Some(PauliLetter::Z),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StabilizerKind {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeDims {
    l: usize,
    h: usize,
}

/// Validates an `L x H` periodic lattice; both sides must be positive multiples of 3.
pub fn build_lattice(l: usize, h: usize) -> Result<LatticeDims> {
    LatticeDims::new(l, h)
}

impl LatticeDims {
    pub fn new(l: usize, h: usize) -> Result<Self> {
        if l < 3 || h < 3 {
            return Err(Error::Dimension { l, h, reason: "both sides must be at least 3" });
        }
        if l % 3 != 0 || h % 3 != 0 {
            return Err(Error::Dimension { l, h, reason: "both sides must be multiples of 3" });
        }
        Ok(LatticeDims { l, h })
    }

    /// Number of columns.
    #[inline]
    pub fn l(&self) -> usize {
        self.l
    }

    /// Number of rows.
    #[inline]
    pub fn h(&self) -> usize {
        self.h
    }

    /// Qubits on one sublattice (also the number of plaquettes).
    #[inline]
    pub fn sites(&self) -> usize {
        self.l * self.h
    }

    /// Total qubit count `N = 2 L H`.
    #[inline]
    pub fn n(&self) -> usize {
        2 * self.l * self.h
    }

    #[inline]
    pub fn wrap_i(&self, i: isize) -> usize {
        i.rem_euclid(self.l as isize) as usize
    }

    #[inline]
    pub fn wrap_j(&self, j: isize) -> usize {
        j.rem_euclid(self.h as isize) as usize
    }

    /// Linear qubit index `s * L H + j * L + i`.
    #[inline]
    pub fn qubit_index(&self, q: QubitCoord) -> usize {
        q.s.index() * self.sites() + q.j * self.l + q.i
    }

    #[inline]
    pub fn qubit_at(&self, index: usize) -> QubitCoord {
        let s = if index < self.sites() { Sublattice::Black } else { Sublattice::White };
        let k = index % self.sites();
        QubitCoord { i: k % self.l, j: k / self.l, s }
    }

    pub fn qubit(&self, i: isize, j: isize, s: Sublattice) -> QubitCoord {
        QubitCoord { i: self.wrap_i(i), j: self.wrap_j(j), s }
    }

    /// The three plaquettes whose stabilizers touch qubit `q`.
    #[inline]
    pub fn plaquettes_of(&self, q: QubitCoord) -> [(usize, usize); 3] {
        let (i, j) = (q.i as isize, q.j as isize);
        let p = |di: isize, dj: isize| (self.wrap_i(i + di), self.wrap_j(j + dj));
        match q.s {
            Sublattice::Black => [p(0, 0), p(0, -1), p(-1, -1)],
            Sublattice::White => [p(1, 0), p(0, 0), p(0, -1)],
        }
    }

    /// Black sites of plaquette `(i, j)`.
    #[inline]
    pub fn black_sites(&self, i: usize, j: usize) -> [QubitCoord; 3] {
        let (i, j) = (i as isize, j as isize);
        let b = Sublattice::Black;
        [self.qubit(i, j, b), self.qubit(i, j + 1, b), self.qubit(i + 1, j + 1, b)]
    }

    /// White sites of plaquette `(i, j)`.
    #[inline]
    pub fn white_sites(&self, i: usize, j: usize) -> [QubitCoord; 3] {
        let (i, j) = (i as isize, j as isize);
        let w = Sublattice::White;
        [self.qubit(i - 1, j, w), self.qubit(i, j, w), self.qubit(i, j + 1, w)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QubitCoord {
    pub i: usize,
    pub j: usize,
    pub s: Sublattice,
}

impl QubitCoord {
    pub fn black(i: usize, j: usize) -> Self {
        QubitCoord { i, j, s: Sublattice::Black }
    }

    pub fn white(i: usize, j: usize) -> Self {
        QubitCoord { i, j, s: Sublattice::White }
    }
}

/// Which stabilizer types a single-qubit Pauli anticommutes with, as `(A, B)`.
#[inline]
pub fn flip_mask(s: Sublattice, letter: PauliLetter) -> (bool, bool) {
    match (s, letter) {
        (Sublattice::Black, PauliLetter::X) => (false, true),
        (Sublattice::Black, PauliLetter::Y) => (true, true),
        (Sublattice::Black, PauliLetter::Z) => (true, false),
        (Sublattice::White, PauliLetter::X) => (true, true),
        (Sublattice::White, PauliLetter::Y) => (true, false),
        (Sublattice::White, PauliLetter::Z) => (false, true),
    }
}

/// The six `(qubit, letter)` pairs of stabilizer `kind` on plaquette `(i, j)`.
pub fn stabilizer_support(
    dims: &LatticeDims,
    kind: StabilizerKind,
    i: usize,
    j: usize,
) -> Vec<(QubitCoord, PauliLetter)> {
    let (i, j) = (i % dims.l(), j % dims.h());
    let (on_black, on_white) = match kind {
        StabilizerKind::A => (PauliLetter::X, PauliLetter::Z),
        StabilizerKind::B => (PauliLetter::Z, PauliLetter::Y),
    };
    dims.black_sites(i, j)
        .into_iter()
        .map(|q| (q, on_black))
        .chain(dims.white_sites(i, j).into_iter().map(|q| (q, on_white)))
        .collect()
}

/// Plaquette energy term: each excited `A`, `B` and `A xor B` costs one unit.
#[inline]
pub fn plaquette_energy(a: bool, b: bool) -> i32 {
    a as i32 + b as i32 + (a ^ b) as i32
}

/// An `L x H` grid of bits, one packed row per grid row.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitGrid {
    width: usize,
    rows: Vec<BitRow>,
}

impl BitGrid {
    pub fn zeros(width: usize, height: usize) -> Self {
        BitGrid { width, rows: vec![BitRow::zeros(width); height] }
    }

    pub fn from_rows(width: usize, rows: Vec<BitRow>) -> Self {
        assert!(rows.iter().all(|r| r.len() == width));
        BitGrid { width, rows }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[j].get(i)
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.rows[j].set(i, v)
    }

    #[inline]
    pub fn flip(&mut self, i: usize, j: usize) {
        self.rows[j].flip(i)
    }

    #[inline]
    pub fn row(&self, j: usize) -> &BitRow {
        &self.rows[j]
    }

    pub fn row_mut(&mut self, j: usize) -> &mut BitRow {
        &mut self.rows[j]
    }

    pub fn rows(&self) -> &[BitRow] {
        &self.rows
    }

    pub fn weight(&self) -> usize {
        self.rows.iter().map(BitRow::weight).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(BitRow::is_zero)
    }

    pub fn xor_assign(&mut self, other: &BitGrid) {
        for (a, b) in self.rows.iter_mut().zip(&other.rows) {
            a.xor_assign(b);
        }
    }

    pub fn or_weight(&self, other: &BitGrid) -> usize {
        self.rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| {
                a.words().iter().zip(b.words()).map(|(x, y)| (x | y).count_ones() as usize).sum::<usize>()
            })
            .sum()
    }

    /// Set positions as `(i, j)` in row-major order.
    pub fn iter_ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows.iter().enumerate().flat_map(|(j, r)| r.iter_ones().map(move |i| (i, j)))
    }

    /// Point reflection `(i, j) -> (-i - di, -j - dj)` on the torus.
    pub fn reflected(&self, di: isize, dj: isize) -> BitGrid {
        let (w, h) = (self.width as isize, self.height() as isize);
        let mut out = BitGrid::zeros(self.width, self.height());
        for (i, j) in self.iter_ones() {
            out.set((-(i as isize) - di).rem_euclid(w) as usize, (-(j as isize) - dj).rem_euclid(h) as usize, true);
        }
        out
    }

    /// Packs the grid row-major, bit `j * width + i`, LSB first within each byte.
    fn pack_into(&self, bytes: &mut [u8], offset: usize) {
        for (i, j) in self.iter_ones() {
            let k = offset + j * self.width + i;
            bytes[k / 8] |= 1 << (k % 8);
        }
    }

    fn unpack_from(bytes: &[u8], offset: usize, width: usize, height: usize) -> BitGrid {
        let mut g = BitGrid::zeros(width, height);
        for j in 0..height {
            for i in 0..width {
                let k = offset + j * width + i;
                if bytes[k / 8] >> (k % 8) & 1 == 1 {
                    g.set(i, j, true);
                }
            }
        }
        g
    }
}

impl fmt::Debug for BitGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitGrid {}x{}", self.width, self.height())?;
        for r in &self.rows {
            writeln!(f, "  {r}")?;
        }
        Ok(())
    }
}

/// A Pauli operator on all `2 L H` qubits, up to phase.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "FrameJson", into = "FrameJson")]
pub struct PauliFrame {
    dims: LatticeDims,
    x: [BitGrid; 2],
    z: [BitGrid; 2],
}

impl fmt::Debug for PauliFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliFrame {}x{} [", self.dims.l(), self.dims.h())?;
        let mut first = true;
        for (q, p) in self.iter_support() {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            let s = if q.s == Sublattice::Black { 'b' } else { 'w' };
            write!(f, "{p:?}({},{},{s})", q.i, q.j)?;
        }
        f.write_str("]")
    }
}

impl PauliFrame {
    pub fn identity(dims: LatticeDims) -> Self {
        let g = BitGrid::zeros(dims.l(), dims.h());
        PauliFrame { dims, x: [g.clone(), g.clone()], z: [g.clone(), g] }
    }

    pub fn single(dims: LatticeDims, q: QubitCoord, letter: PauliLetter) -> Self {
        let mut f = Self::identity(dims);
        f.apply(q, letter);
        f
    }

    /// Pure-`Z` frame with support `grid` on sublattice `s`.
    pub fn pure_z(dims: LatticeDims, s: Sublattice, grid: BitGrid) -> Self {
        let mut f = Self::identity(dims);
        f.z[s.index()] = grid;
        f
    }

    pub fn from_planes(dims: LatticeDims, x: [BitGrid; 2], z: [BitGrid; 2]) -> Self {
        for g in x.iter().chain(z.iter()) {
            assert_eq!((g.width(), g.height()), (dims.l(), dims.h()));
        }
        PauliFrame { dims, x, z }
    }

    #[inline]
    pub fn dims(&self) -> &LatticeDims {
        &self.dims
    }

    /// X-part grid of one sublattice.
    #[inline]
    pub fn x_plane(&self, s: Sublattice) -> &BitGrid {
        &self.x[s.index()]
    }

    /// Z-part grid of one sublattice.
    #[inline]
    pub fn z_plane(&self, s: Sublattice) -> &BitGrid {
        &self.z[s.index()]
    }

    pub fn z_plane_mut(&mut self, s: Sublattice) -> &mut BitGrid {
        &mut self.z[s.index()]
    }

    pub fn x_plane_mut(&mut self, s: Sublattice) -> &mut BitGrid {
        &mut self.x[s.index()]
    }

    #[inline]
    pub fn get(&self, q: QubitCoord) -> Option<PauliLetter> {
        let k = q.s.index();
        PauliLetter::from_bits(self.x[k].get(q.i, q.j), self.z[k].get(q.i, q.j))
    }

    /// Multiplies the letter into qubit `q` in place.
    #[inline]
    pub fn apply(&mut self, q: QubitCoord, letter: PauliLetter) {
        let k = q.s.index();
        let (x, z) = letter.bits();
        if x {
            self.x[k].flip(q.i, q.j);
        }
        if z {
            self.z[k].flip(q.i, q.j);
        }
    }

    /// Composes frames; phases are dropped so this is XOR of both planes.
    pub fn compose_assign(&mut self, other: &PauliFrame) {
        assert_eq!(self.dims, other.dims);
        for k in 0..2 {
            self.x[k].xor_assign(&other.x[k]);
            self.z[k].xor_assign(&other.z[k]);
        }
    }

    pub fn compose(&self, other: &PauliFrame) -> PauliFrame {
        let mut out = self.clone();
        out.compose_assign(other);
        out
    }

    /// Number of qubits acted on non-trivially.
    pub fn weight(&self) -> usize {
        (0..2).map(|k| self.x[k].or_weight(&self.z[k])).sum()
    }

    /// Non-identity weight restricted to one sublattice.
    pub fn weight_on(&self, s: Sublattice) -> usize {
        self.x[s.index()].or_weight(&self.z[s.index()])
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().chain(self.z.iter()).all(BitGrid::is_zero)
    }

    pub fn is_pure_z(&self) -> bool {
        self.x.iter().all(BitGrid::is_zero)
    }

    pub fn iter_support(&self) -> impl Iterator<Item = (QubitCoord, PauliLetter)> + '_ {
        Sublattice::BOTH.into_iter().flat_map(move |s| {
            (0..self.dims.h()).flat_map(move |j| {
                (0..self.dims.l()).filter_map(move |i| {
                    let q = QubitCoord { i, j, s };
                    self.get(q).map(|p| (q, p))
                })
            })
        })
    }

    /// Syndrome bits `(a, b)` of plaquette `(i, j)`, computed from the six sites.
    pub fn plaquette_bits(&self, i: usize, j: usize) -> (bool, bool) {
        let mut a = false;
        let mut b = false;
        for q in self.dims.black_sites(i, j) {
            a ^= self.z[0].get(q.i, q.j);
            b ^= self.x[0].get(q.i, q.j);
        }
        for q in self.dims.white_sites(i, j) {
            let (x, z) = (self.x[1].get(q.i, q.j), self.z[1].get(q.i, q.j));
            a ^= x;
            b ^= x ^ z;
        }
        (a, b)
    }

    pub fn to_json(&self) -> FrameJson {
        let n = self.dims.n();
        let mut xb = vec![0u8; n.div_ceil(8)];
        let mut zb = vec![0u8; n.div_ceil(8)];
        let sites = self.dims.sites();
        for s in Sublattice::BOTH {
            self.x[s.index()].pack_into(&mut xb, s.index() * sites);
            self.z[s.index()].pack_into(&mut zb, s.index() * sites);
        }
        FrameJson { l: self.dims.l(), h: self.dims.h(), x_plane: hex::encode(xb), z_plane: hex::encode(zb) }
    }

    pub fn from_json(json: &FrameJson) -> Result<Self> {
        let dims = LatticeDims::new(json.l, json.h)?;
        let nbytes = dims.n().div_ceil(8);
        let decode = |s: &str| -> Result<Vec<u8>> {
            let bytes = hex::decode(s).map_err(|e| Error::Format(e.to_string()))?;
            if bytes.len() != nbytes {
                return Err(Error::Format(format!("expected {nbytes} plane bytes, got {}", bytes.len())));
            }
            Ok(bytes)
        };
        let (xb, zb) = (decode(&json.x_plane)?, decode(&json.z_plane)?);
        let sites = dims.sites();
        let grid = |bytes: &[u8], s: Sublattice| BitGrid::unpack_from(bytes, s.index() * sites, dims.l(), dims.h());
        Ok(PauliFrame {
            dims,
            x: [grid(&xb, Sublattice::Black), grid(&xb, Sublattice::White)],
            z: [grid(&zb, Sublattice::Black), grid(&zb, Sublattice::White)],
        })
    }
}

impl TryFrom<FrameJson> for PauliFrame {
    type Error = Error;

    fn try_from(json: FrameJson) -> Result<Self> {
        PauliFrame::from_json(&json)
    }
}

impl From<PauliFrame> for FrameJson {
    fn from(frame: PauliFrame) -> Self {
        frame.to_json()
    }
}

impl TryFrom<SyndromeJson> for Syndrome {
    type Error = Error;

    fn try_from(json: SyndromeJson) -> Result<Self> {
        Syndrome::from_json(&json)
    }
}

impl From<Syndrome> for SyndromeJson {
    fn from(s: Syndrome) -> Self {
        s.to_json()
    }
}

/// Returns `frame` with `letter` multiplied in at `q`.
pub fn apply_pauli(frame: &PauliFrame, q: QubitCoord, letter: PauliLetter) -> PauliFrame {
    let mut out = frame.clone();
    out.apply(q, letter);
    out
}

/// Wire form of a frame. Each plane is a hex string of `ceil(2LH/8)` bytes; qubit
/// `(i, j, s)` is bit `s*LH + j*L + i` with black `s = 0` first, least significant
/// bit of each byte first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameJson {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "H")]
    pub h: usize,
    pub x_plane: String,
    pub z_plane: String,
}

/// Defect configuration: one bit per plaquette and stabilizer type.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SyndromeJson", into = "SyndromeJson")]
pub struct Syndrome {
    dims: LatticeDims,
    a: BitGrid,
    b: BitGrid,
}

impl fmt::Debug for Syndrome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Syndrome A{:?} B{:?}", self.a.iter_ones().collect::<Vec<_>>(), self.b.iter_ones().collect::<Vec<_>>())
    }
}

impl Syndrome {
    pub fn zero(dims: LatticeDims) -> Self {
        Syndrome { dims, a: BitGrid::zeros(dims.l(), dims.h()), b: BitGrid::zeros(dims.l(), dims.h()) }
    }

    pub fn from_grids(dims: LatticeDims, a: BitGrid, b: BitGrid) -> Self {
        assert_eq!((a.width(), a.height()), (dims.l(), dims.h()));
        assert_eq!((b.width(), b.height()), (dims.l(), dims.h()));
        Syndrome { dims, a, b }
    }

    pub fn dims(&self) -> &LatticeDims {
        &self.dims
    }

    pub fn a_defects(&self) -> &BitGrid {
        &self.a
    }

    pub fn b_defects(&self) -> &BitGrid {
        &self.b
    }

    pub fn defects_mut(&mut self, kind: StabilizerKind) -> &mut BitGrid {
        match kind {
            StabilizerKind::A => &mut self.a,
            StabilizerKind::B => &mut self.b,
        }
    }

    pub fn defects(&self, kind: StabilizerKind) -> &BitGrid {
        match kind {
            StabilizerKind::A => &self.a,
            StabilizerKind::B => &self.b,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn defect_count(&self) -> usize {
        self.a.weight() + self.b.weight()
    }

    pub fn xor(&self, other: &Syndrome) -> Syndrome {
        let mut out = self.clone();
        out.a.xor_assign(&other.a);
        out.b.xor_assign(&other.b);
        out
    }

    /// Energy of the symmetric plaquette Hamiltonian, `sum_p a + b + (a xor b)`.
    pub fn energy(&self) -> i64 {
        let mut e = 0i64;
        for (ra, rb) in self.a.rows().iter().zip(self.b.rows()) {
            for (wa, wb) in ra.words().iter().zip(rb.words()) {
                e += (wa.count_ones() + wb.count_ones() + (wa ^ wb).count_ones()) as i64;
            }
        }
        e
    }

    pub fn to_json(&self) -> SyndromeJson {
        let nbytes = self.dims.sites().div_ceil(8);
        let mut a = vec![0u8; nbytes];
        let mut b = vec![0u8; nbytes];
        self.a.pack_into(&mut a, 0);
        self.b.pack_into(&mut b, 0);
        SyndromeJson { l: self.dims.l(), h: self.dims.h(), a_defects: hex::encode(a), b_defects: hex::encode(b) }
    }

    pub fn from_json(json: &SyndromeJson) -> Result<Self> {
        let dims = LatticeDims::new(json.l, json.h)?;
        let nbytes = dims.sites().div_ceil(8);
        let decode = |s: &str| -> Result<BitGrid> {
            let bytes = hex::decode(s).map_err(|e| Error::Format(e.to_string()))?;
            if bytes.len() != nbytes {
                return Err(Error::Format(format!("expected {nbytes} defect bytes, got {}", bytes.len())));
            }
            Ok(BitGrid::unpack_from(&bytes, 0, dims.l(), dims.h()))
        };
        Ok(Syndrome { dims, a: decode(&json.a_defects)?, b: decode(&json.b_defects)? })
    }
}

/// Wire form of a syndrome; plaquette `(i, j)` is bit `j*L + i`, LSB first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyndromeJson {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "H")]
    pub h: usize,
    pub a_defects: String,
    pub b_defects: String,
}

/// Syndrome of `frame`, evaluated a whole row at a time.
///
/// `A` detects the `Z` part on black sites and the `X` part on white sites; `B` detects
/// the `X` part on black sites and `X xor Z` on white sites.
pub fn syndrome(frame: &PauliFrame) -> Syndrome {
    let dims = *frame.dims();
    let h = dims.h();
    let mut a = BitGrid::zeros(dims.l(), h);
    let mut b = BitGrid::zeros(dims.l(), h);
    let [xb, xw] = &frame.x;
    let [zb, zw] = &frame.z;
    for j in 0..h {
        let jn = (j + 1) % h;
        let mut row = triangle_black(zb.row(j), zb.row(jn));
        row.xor_assign(&triangle_white(xw.row(j), xw.row(jn)));
        *a.row_mut(j) = row;

        let yw_j = xw.row(j).xor(zw.row(j));
        let yw_n = xw.row(jn).xor(zw.row(jn));
        let mut row = triangle_black(xb.row(j), xb.row(jn));
        row.xor_assign(&triangle_white(&yw_j, &yw_n));
        *b.row_mut(j) = row;
    }
    Syndrome { dims, a, b }
}

/// `out_i = cur_i + next_i + next_{i+1}`: black sites of the plaquettes in one row.
#[inline]
fn triangle_black(cur: &BitRow, next: &BitRow) -> BitRow {
    let mut out = next.rotate_next();
    out.xor_assign(next);
    out.xor_assign(cur);
    out
}

/// `out_i = cur_{i-1} + cur_i + next_i`: white sites of the plaquettes in one row.
#[inline]
fn triangle_white(cur: &BitRow, next: &BitRow) -> BitRow {
    let mut out = cur.rotate_prev();
    out.xor_assign(cur);
    out.xor_assign(next);
    out
}

/// Energy change of the symmetric plaquette Hamiltonian when `letter` is applied at
/// `q`. Only the three plaquettes around `q` contribute, so the result is an even
/// integer in `[-6, 6]`.
pub fn local_energy_change(frame: &PauliFrame, q: QubitCoord, letter: PauliLetter) -> i32 {
    let (fa, fb) = flip_mask(q.s, letter);
    frame
        .dims()
        .plaquettes_of(q)
        .into_iter()
        .map(|(i, j)| {
            let (a, b) = frame.plaquette_bits(i, j);
            plaquette_energy(a ^ fa, b ^ fb) - plaquette_energy(a, b)
        })
        .sum()
}

/// Independent Pauli rates and per-interval probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub gamma_x: f64,
    pub gamma_y: f64,
    pub gamma_z: f64,
    pub p_x: f64,
    pub p_y: f64,
    pub p_z: f64,
}

impl NoiseParams {
    /// Y/Z Poisson rates with total `gamma_tot` and bias `zeta = gamma_z / gamma_y`.
    /// `zeta = f64::INFINITY` gives pure dephasing.
    pub fn from_rates(gamma_tot: f64, zeta: f64) -> Result<Self> {
        if !(gamma_tot >= 0.0) || !gamma_tot.is_finite() {
            return Err(Error::Config(format!("total rate must be finite and >= 0, got {gamma_tot}")));
        }
        if !(zeta > 0.0) {
            return Err(Error::Config(format!("bias must be positive, got {zeta}")));
        }
        let (gamma_z, gamma_y) = split_by_bias(gamma_tot, zeta);
        Ok(NoiseParams { gamma_x: 0.0, gamma_y, gamma_z, p_x: 0.0, p_y: 0.0, p_z: 0.0 })
    }

    /// Per-qubit Y/Z probabilities with total `p_tot` and bias `zeta_p = p_z / p_y`.
    pub fn from_probabilities(p_tot: f64, zeta_p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_tot) {
            return Err(Error::Probability(format!("p_tot={p_tot} outside [0, 1]")));
        }
        if !(zeta_p > 0.0) {
            return Err(Error::Probability(format!("bias must be positive, got {zeta_p}")));
        }
        let (p_z, p_y) = split_by_bias(p_tot, zeta_p);
        Ok(NoiseParams { gamma_x: 0.0, gamma_y: 0.0, gamma_z: 0.0, p_x: 0.0, p_y, p_z })
    }

    pub fn gamma_tot(&self) -> f64 {
        self.gamma_x + self.gamma_y + self.gamma_z
    }

    pub fn p_tot(&self) -> f64 {
        self.p_x + self.p_y + self.p_z
    }

    /// `gamma_z / gamma_y`, infinite when there is no Y noise.
    pub fn zeta(&self) -> f64 {
        if self.gamma_y == 0.0 {
            f64::INFINITY
        } else {
            self.gamma_z / self.gamma_y
        }
    }

    pub fn zeta_p(&self) -> f64 {
        if self.p_y == 0.0 {
            f64::INFINITY
        } else {
            self.p_z / self.p_y
        }
    }

    /// Probability that a single-letter Poisson channel of rate `gamma` has flipped an
    /// odd number of times after `t`: `(1 - exp(-2 gamma t)) / 2`, always in `[0, 1/2)`.
    pub fn odd_flip_probability(gamma: f64, t: f64) -> f64 {
        0.5 * (1.0 - (-2.0 * gamma * t).exp())
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [self.gamma_x, self.gamma_y, self.gamma_z];
        if rates.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return Err(Error::Config(format!("rates must be finite and >= 0: {rates:?}")));
        }
        let probs = [self.p_x, self.p_y, self.p_z];
        if probs.iter().any(|p| !(0.0..=0.5).contains(p)) {
            return Err(Error::Probability(format!("probabilities must lie in [0, 1/2]: {probs:?}")));
        }
        Ok(())
    }
}

fn split_by_bias(total: f64, zeta: f64) -> (f64, f64) {
    if zeta.is_infinite() {
        (total, 0.0)
    } else {
        (total * zeta / (zeta + 1.0), total / (zeta + 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dims(l: usize, h: usize) -> LatticeDims {
        LatticeDims::new(l, h).unwrap()
    }

    /// Direct symplectic evaluation of every stabilizer, independent of the row kernel.
    fn brute_syndrome(f: &PauliFrame) -> Syndrome {
        let d = *f.dims();
        let mut s = Syndrome::zero(d);
        for kind in [StabilizerKind::A, StabilizerKind::B] {
            for j in 0..d.h() {
                for i in 0..d.l() {
                    let mut odd = false;
                    for (q, p) in stabilizer_support(&d, kind, i, j) {
                        if let Some(e) = f.get(q) {
                            odd ^= e != p;
                        }
                    }
                    if odd {
                        s.defects_mut(kind).set(i, j, true);
                    }
                }
            }
        }
        s
    }

    fn random_frame(d: LatticeDims, rng: &mut impl Rng, density: f64) -> PauliFrame {
        let mut f = PauliFrame::identity(d);
        for k in 0..d.n() {
            if rng.random::<f64>() < density {
                let letter = [PauliLetter::X, PauliLetter::Y, PauliLetter::Z][rng.random_range(0..3)];
                f.apply(d.qubit_at(k), letter);
            }
        }
        f
    }

    #[test]
    fn lattice_sizes() {
        assert_eq!(build_lattice(6, 9).unwrap().n(), 108);
        assert_eq!(build_lattice(3, 3).unwrap().n(), 18);
        assert!(matches!(build_lattice(4, 6), Err(Error::Dimension { .. })));
        assert!(matches!(build_lattice(0, 3), Err(Error::Dimension { .. })));
    }

    #[test]
    fn stabilizer_letters() {
        let d = dims(6, 9);
        let a = stabilizer_support(&d, StabilizerKind::A, 0, 0);
        assert_eq!(a.len(), 6);
        for (q, p) in &a {
            let want = if q.s == Sublattice::Black { PauliLetter::X } else { PauliLetter::Z };
            assert_eq!(*p, want);
            assert!(q.i < 6 && q.j < 9);
        }
        assert_eq!(a.iter().filter(|(q, _)| q.s == Sublattice::Black).count(), 3);
        let b = stabilizer_support(&d, StabilizerKind::B, 0, 0);
        for (q, p) in &b {
            let want = if q.s == Sublattice::Black { PauliLetter::Z } else { PauliLetter::Y };
            assert_eq!(*p, want);
        }
        for (i, j) in [(5, 8), (17, 40), (0, 8)] {
            for kind in [StabilizerKind::A, StabilizerKind::B] {
                assert!(stabilizer_support(&d, kind, i, j).iter().all(|(q, _)| q.i < 6 && q.j < 9));
            }
        }
    }

    #[test]
    fn stabilizers_commute_and_have_zero_syndrome() {
        let d = dims(6, 9);
        for kind in [StabilizerKind::A, StabilizerKind::B] {
            for (i, j) in [(0, 0), (3, 4), (5, 8)] {
                let mut f = PauliFrame::identity(d);
                for (q, p) in stabilizer_support(&d, kind, i, j) {
                    f.apply(q, p);
                }
                assert!(syndrome(&f).is_zero(), "{kind:?}({i},{j})");
            }
        }
    }

    #[test]
    fn z_on_black_excites_three_a_plaquettes() {
        let d = dims(6, 9);
        for (i, j) in [(0usize, 0usize), (2, 3), (5, 8)] {
            let f = PauliFrame::single(d, QubitCoord::black(i, j), PauliLetter::Z);
            let s = syndrome(&f);
            assert!(s.b_defects().is_zero());
            let mut got: Vec<_> = s.a_defects().iter_ones().collect();
            got.sort();
            let (ii, jj) = (i as isize, j as isize);
            let mut want = vec![
                (d.wrap_i(ii), d.wrap_j(jj)),
                (d.wrap_i(ii), d.wrap_j(jj - 1)),
                (d.wrap_i(ii - 1), d.wrap_j(jj - 1)),
            ];
            want.sort();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn y_on_black_excites_both_types() {
        let d = dims(6, 9);
        let f = PauliFrame::single(d, QubitCoord::black(2, 4), PauliLetter::Y);
        let s = syndrome(&f);
        assert_eq!(s.a_defects().weight(), 3);
        assert_eq!(s.b_defects().weight(), 3);
        assert_eq!(s, brute_syndrome(&f));
    }

    #[test]
    fn row_kernel_matches_brute_force() {
        let d = dims(9, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let f = random_frame(d, &mut rng, 0.2);
            assert_eq!(syndrome(&f), brute_syndrome(&f));
        }
        for k in 0..d.n() {
            for p in [PauliLetter::X, PauliLetter::Y, PauliLetter::Z] {
                let f = PauliFrame::single(d, d.qubit_at(k), p);
                let s = syndrome(&f);
                assert_eq!(s, brute_syndrome(&f));
                let (fa, fb) = flip_mask(d.qubit_at(k).s, p);
                assert_eq!(s.a_defects().weight(), if fa { 3 } else { 0 });
                assert_eq!(s.b_defects().weight(), if fb { 3 } else { 0 });
            }
        }
    }

    #[test]
    fn identity_has_zero_syndrome() {
        assert!(syndrome(&PauliFrame::identity(dims(12, 15))).is_zero());
    }

    #[test]
    fn apply_pauli_examples() {
        let d = dims(3, 3);
        let q = QubitCoord::white(1, 2);
        let z = apply_pauli(&PauliFrame::identity(d), q, PauliLetter::Z);
        assert!(z.z_plane(Sublattice::White).get(1, 2));
        assert_eq!(z.weight(), 1);
        assert!(z.x_plane(Sublattice::White).is_zero());
        assert!(apply_pauli(&z, q, PauliLetter::Z).is_identity());
        let y = apply_pauli(&PauliFrame::identity(d), q, PauliLetter::Y);
        assert!(y.x_plane(Sublattice::White).get(1, 2) && y.z_plane(Sublattice::White).get(1, 2));
        assert_eq!(y.get(q), Some(PauliLetter::Y));
    }

    #[test]
    fn energy_change_examples() {
        let d = dims(6, 9);
        let q = QubitCoord::black(2, 3);
        let vac = PauliFrame::identity(d);
        assert_eq!(local_energy_change(&vac, q, PauliLetter::Z), 6);
        let one = PauliFrame::single(d, q, PauliLetter::Z);
        assert_eq!(local_energy_change(&one, q, PauliLetter::Z), -6);
        // X on the same black qubit sets all three adjacent B defects.
        let xq = PauliFrame::single(d, q, PauliLetter::X);
        assert_eq!(syndrome(&xq).b_defects().weight(), 3);
        assert_eq!(local_energy_change(&xq, q, PauliLetter::Z), 0);
    }

    #[test]
    fn plaquette_energy_table() {
        // A-flips leave the energy unchanged exactly when b is set.
        for a in [false, true] {
            for b in [false, true] {
                let d = plaquette_energy(!a, b) - plaquette_energy(a, b);
                if b {
                    assert_eq!(d, 0);
                } else {
                    assert_eq!(d, if a { -2 } else { 2 });
                }
            }
        }
    }

    #[test]
    fn energy_change_is_local_and_consistent() {
        let d = dims(6, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let f = random_frame(d, &mut rng, 0.15);
            let q = d.qubit_at(rng.random_range(0..d.n()));
            let p = [PauliLetter::X, PauliLetter::Y, PauliLetter::Z][rng.random_range(0..3)];
            let before = syndrome(&f).energy();
            let after = syndrome(&apply_pauli(&f, q, p)).energy();
            let w = local_energy_change(&f, q, p);
            assert_eq!(w as i64, after - before);
            assert!(w % 2 == 0 && (-6..=6).contains(&w));
        }
    }

    #[test]
    fn sublattices_decouple_for_pure_z() {
        let d = dims(6, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let mut g = BitGrid::zeros(6, 9);
            for j in 0..9 {
                for i in 0..6 {
                    g.set(i, j, rng.random::<bool>());
                }
            }
            let sb = syndrome(&PauliFrame::pure_z(d, Sublattice::Black, g.clone()));
            assert!(sb.b_defects().is_zero());
            let sw = syndrome(&PauliFrame::pure_z(d, Sublattice::White, g));
            assert!(sw.a_defects().is_zero());
        }
    }

    #[test]
    fn zero_syndrome_iff_rule108_rows() {
        use crate::gf2kit::rule108_step;
        let d = dims(3, 3);
        for mask in 0u32..512 {
            let mut g = BitGrid::zeros(3, 3);
            for k in 0..9 {
                g.set(k % 3, k / 3, mask >> k & 1 == 1);
            }
            let clean = syndrome(&PauliFrame::pure_z(d, Sublattice::Black, g.clone())).is_zero();
            let rows_ok = (0..3).all(|j| *g.row(j) == rule108_step(g.row((j + 1) % 3)));
            assert_eq!(clean, rows_ok, "mask={mask:09b}");
        }
    }

    #[test]
    fn frame_json_bit_order() {
        let d = dims(3, 3);
        let f = PauliFrame::single(d, QubitCoord::black(1, 0), PauliLetter::Z);
        let j = f.to_json();
        assert_eq!(j.z_plane, "020000");
        assert_eq!(j.x_plane, "000000");
        let w = PauliFrame::single(d, QubitCoord::white(0, 0), PauliLetter::X);
        // bit 9 = byte 1, bit 1
        assert_eq!(w.to_json().x_plane, "000200");
        let text = serde_json::to_string(&j).unwrap();
        assert!(text.contains("\"L\":3"));
        let back: FrameJson = serde_json::from_str(&text).unwrap();
        assert_eq!(PauliFrame::from_json(&back).unwrap(), f);
    }

    #[test]
    fn noise_params_split() {
        let n = NoiseParams::from_rates(1e-5, 100.0).unwrap();
        assert!((n.gamma_y - 1e-5 / 101.0).abs() < 1e-20);
        assert!((n.gamma_tot() - 1e-5).abs() < 1e-18);
        assert!((n.zeta() - 100.0).abs() < 1e-9);
        let inf = NoiseParams::from_rates(0.1, f64::INFINITY).unwrap();
        assert_eq!(inf.gamma_y, 0.0);
        assert!(inf.zeta().is_infinite());
        assert!(NoiseParams::from_rates(-1.0, 10.0).is_err());
        assert!(NoiseParams::odd_flip_probability(1e3, 1e3) <= 0.5);
        let p = NoiseParams::from_probabilities(0.1, 10.0).unwrap();
        assert!((p.zeta_p() - 10.0).abs() < 1e-9);
        p.validate().unwrap();
    }

    fn arb_frame(d: LatticeDims) -> impl Strategy<Value = PauliFrame> {
        proptest::collection::vec(0u8..4, d.n()).prop_map(move |letters| {
            let mut f = PauliFrame::identity(d);
            for (k, c) in letters.into_iter().enumerate() {
                match c {
                    1 => f.apply(d.qubit_at(k), PauliLetter::X),
                    2 => f.apply(d.qubit_at(k), PauliLetter::Y),
                    3 => f.apply(d.qubit_at(k), PauliLetter::Z),
                    _ => {}
                }
            }
            f
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn syndrome_is_linear((e1, e2) in (arb_frame(dims(6, 9)), arb_frame(dims(6, 9)))) {
            prop_assert_eq!(syndrome(&e1.compose(&e2)), syndrome(&e1).xor(&syndrome(&e2)));
        }
    }

    proptest! {
        #[test]
        fn frame_json_roundtrip(f in arb_frame(dims(6, 9))) {
            prop_assert_eq!(PauliFrame::from_json(&f.to_json()).unwrap(), f.clone());
            let s = syndrome(&f);
            prop_assert_eq!(Syndrome::from_json(&s.to_json()).unwrap(), s);
        }
    }
}
