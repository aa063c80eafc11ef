//! Logical operators: the rule-108 tilings that survive infinite bias, the eight
//! string logicals inherited from the CSS color code, and size certification.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::codegrid::{BitGrid, LatticeDims, PauliFrame, PauliLetter, QubitCoord, Sublattice};
use crate::error::{Error, Result};
use crate::gf2kit::{cycle_length_from_single_one, mat_pow, rule108_matrix, BitRow, Gf2Matrix};

/// Rows of the period-3 tiling block, indexed by `j mod 3`, columns by `i mod 3`.
const L_BLOCK: [[bool; 3]; 3] = [[true, true, false], [true, false, true], [false, true, true]];

/// Label of a biased logical class on one sublattice. The declaration order is the
/// lexicographic order of the names and is used for tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LogicalLabel {
    I,
    L,
    LM,
    M,
}

impl LogicalLabel {
    pub const ALL: [LogicalLabel; 4] = [LogicalLabel::I, LogicalLabel::L, LogicalLabel::LM, LogicalLabel::M];

    /// `(has L, has M)` components.
    pub fn parts(self) -> (bool, bool) {
        match self {
            LogicalLabel::I => (false, false),
            LogicalLabel::L => (true, false),
            LogicalLabel::M => (false, true),
            LogicalLabel::LM => (true, true),
        }
    }

    pub fn from_parts(l: bool, m: bool) -> Self {
        match (l, m) {
            (false, false) => LogicalLabel::I,
            (true, false) => LogicalLabel::L,
            (false, true) => LogicalLabel::M,
            (true, true) => LogicalLabel::LM,
        }
    }

    pub fn compose(self, other: LogicalLabel) -> LogicalLabel {
        let (a, b) = self.parts();
        let (c, d) = other.parts();
        LogicalLabel::from_parts(a ^ c, b ^ d)
    }

    /// Row shift of the tiling block that realises this class (`None` for identity).
    fn block_shift(self) -> Option<usize> {
        match self {
            LogicalLabel::I => None,
            LogicalLabel::L => Some(0),
            LogicalLabel::M => Some(1),
            LogicalLabel::LM => Some(2),
        }
    }
}

impl fmt::Display for LogicalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Tiling of the period-3 block with its rows cycled by `shift`; `shift` 0, 1, 2 give
/// the L, M and L+M patterns. Both sublattices use the same pattern.
pub fn tile_grid(dims: &LatticeDims, shift: usize) -> BitGrid {
    let rows = (0..dims.h())
        .map(|j| BitRow::from_bits((0..dims.l()).map(|i| L_BLOCK[(j + shift) % 3][i % 3])))
        .collect();
    BitGrid::from_rows(dims.l(), rows)
}

/// Single-letter tiling of one sublattice for a class label.
pub fn tile_frame(dims: LatticeDims, s: Sublattice, letter: PauliLetter, label: LogicalLabel) -> PauliFrame {
    let mut f = PauliFrame::identity(dims);
    if let Some(shift) = label.block_shift() {
        let g = tile_grid(&dims, shift);
        let (x, z) = letter.bits();
        if x {
            *f.x_plane_mut(s) = g.clone();
        }
        if z {
            *f.z_plane_mut(s) = g;
        }
    }
    f
}

/// The pure-Z biased logicals `[L, M]` of each sublattice.
#[derive(Debug, Clone, PartialEq)]
pub struct TileLogicals {
    pub black: [PauliFrame; 2],
    pub white: [PauliFrame; 2],
}

impl TileLogicals {
    pub fn on(&self, s: Sublattice) -> &[PauliFrame; 2] {
        match s {
            Sublattice::Black => &self.black,
            Sublattice::White => &self.white,
        }
    }
}

pub fn tile_logicals(l: usize, h: usize) -> Result<TileLogicals> {
    let dims = LatticeDims::new(l, h)?;
    let pair = |s| {
        [
            tile_frame(dims, s, PauliLetter::Z, LogicalLabel::L),
            tile_frame(dims, s, PauliLetter::Z, LogicalLabel::M),
        ]
    };
    Ok(TileLogicals { black: pair(Sublattice::Black), white: pair(Sublattice::White) })
}

/// Names of the string logicals in signature order.
pub const STRING_NAMES: [&str; 8] = ["Zx,R", "Zy,R", "Zx,B", "Zy,B", "Xx,R", "Xy,R", "Xx,B", "Xy,B"];

/// The eight string logicals, ordered as in [`STRING_NAMES`].
///
/// The red horizontal string lives on row 2: `Z` on black columns `i = 1, 2 mod 3`
/// and the other letter on white columns `i = 0, 2 mod 3`. The red vertical string
/// lives on black column 1 (rows `1, 2 mod 3`) and white column 0 (rows `0, 2 mod 3`).
/// Blue strings are the red ones moved two columns left, and the X-type strings
/// replace `Z -> X`, `Y -> Z`.
pub fn string_logicals(l: usize, h: usize) -> Result<[PauliFrame; 8]> {
    let dims = LatticeDims::new(l, h)?;
    let horizontal: Vec<QubitCoord> = (0..l)
        .filter(|i| i % 3 != 0)
        .map(|i| QubitCoord::black(i, 2 % h))
        .chain((0..l).filter(|i| i % 3 != 1).map(|i| QubitCoord::white(i, 2 % h)))
        .collect();
    let vertical: Vec<QubitCoord> = (0..h)
        .filter(|j| j % 3 != 0)
        .map(|j| QubitCoord::black(1, j))
        .chain((0..h).filter(|j| j % 3 != 1).map(|j| QubitCoord::white(0, j)))
        .collect();
    let build = |sites: &[QubitCoord], shift: usize, z_type: bool| {
        let mut f = PauliFrame::identity(dims);
        for q in sites {
            let letter = match (q.s, z_type) {
                (Sublattice::Black, true) => PauliLetter::Z,
                (Sublattice::White, true) => PauliLetter::Y,
                (Sublattice::Black, false) => PauliLetter::X,
                (Sublattice::White, false) => PauliLetter::Z,
            };
            f.apply(QubitCoord { i: (q.i + l - shift) % l, ..*q }, letter);
        }
        f
    };
    Ok([
        build(&horizontal, 0, true),
        build(&vertical, 0, true),
        build(&horizontal, 2, true),
        build(&vertical, 2, true),
        build(&horizontal, 0, false),
        build(&vertical, 0, false),
        build(&horizontal, 2, false),
        build(&vertical, 2, false),
    ])
}

/// `+1` if the two frames commute, `-1` if they anticommute.
pub fn pauli_commutes(a: &PauliFrame, b: &PauliFrame) -> i8 {
    if symplectic_product(a, b) {
        -1
    } else {
        1
    }
}

fn symplectic_product(a: &PauliFrame, b: &PauliFrame) -> bool {
    assert_eq!(a.dims(), b.dims());
    let mut odd = false;
    for s in Sublattice::BOTH {
        let (ax, az, bx, bz) = (a.x_plane(s), a.z_plane(s), b.x_plane(s), b.z_plane(s));
        for j in 0..a.dims().h() {
            odd ^= ax.row(j).and_parity(bz.row(j)) ^ az.row(j).and_parity(bx.row(j));
        }
    }
    odd
}

/// Dimension of the space of periodic rule-108 histories: `dim ker(F^H + I)` on rows
/// of length `L`.
pub fn count_biased_logicals(l: usize, h: usize) -> usize {
    let f = rule108_matrix(l);
    let m = mat_pow(&f, h as u64).add(&Gf2Matrix::identity(l));
    l - m.rank()
}

/// True when each sublattice carries exactly two independent biased logicals and
/// the lattice is not even by even.
pub fn certify_size(l: usize, h: usize) -> bool {
    l % 3 == 0 && h % 3 == 0 && l > 0 && h > 0 && !(l % 2 == 0 && h % 2 == 0) && count_biased_logicals(l, h) == 2
}

/// Certified sizes `(3 * 2^n, 3 * (2^n + 1))` for `n = 0..=n_max`.
pub fn propose_sizes(n_max: u32) -> Vec<(usize, usize)> {
    (0..=n_max)
        .map(|n| (3usize << n, 3 * ((1usize << n) + 1)))
        .filter(|&(l, h)| certify_size(l, h))
        .collect()
}

/// Heights `3p` for the first `count` primes `p > 3` that do not divide the rule-108
/// cycle length of width `l`, keeping only those that certify.
pub fn prime_height_sizes(l: usize, count: usize) -> Vec<(usize, usize)> {
    let period = cycle_length_from_single_one(l);
    (5..)
        .filter(|&p| is_prime(p) && period % p != 0)
        .map(|p| (l, 3 * p))
        .filter(|&(l, h)| certify_size(l, h))
        .take(count)
        .collect()
}

fn is_prime(n: usize) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
}

/// Logical class of a zero-syndrome frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LogicalClass {
    /// In the span of the pure-Z tilings: one label per sublattice.
    Biased { black: LogicalLabel, white: LogicalLabel },
    /// Any other nontrivial class, identified by its string-pairing signature.
    General(u8),
}

impl LogicalClass {
    pub fn is_trivial(&self) -> bool {
        matches!(self, LogicalClass::Biased { black: LogicalLabel::I, white: LogicalLabel::I })
    }
}

/// Tilings and strings for one lattice, with the signature lookup used to classify
/// frames.
#[derive(Debug, Clone)]
pub struct LogicalSet {
    dims: LatticeDims,
    pub black_basis: Vec<PauliFrame>,
    pub white_basis: Vec<PauliFrame>,
    pub string_basis: Vec<PauliFrame>,
    by_signature: HashMap<u8, (LogicalLabel, LogicalLabel)>,
}

impl LogicalSet {
    pub fn new(dims: LatticeDims) -> Self {
        let tiles = tile_logicals(dims.l(), dims.h()).expect("validated dims");
        let strings = string_logicals(dims.l(), dims.h()).expect("validated dims");
        let mut set = LogicalSet {
            dims,
            black_basis: tiles.black.to_vec(),
            white_basis: tiles.white.to_vec(),
            string_basis: strings.to_vec(),
            by_signature: HashMap::new(),
        };
        for b in LogicalLabel::ALL {
            for w in LogicalLabel::ALL {
                let mut f = tile_frame(dims, Sublattice::Black, PauliLetter::Z, b);
                f.compose_assign(&tile_frame(dims, Sublattice::White, PauliLetter::Z, w));
                let sig = set.signature(&f);
                set.by_signature.entry(sig).or_insert((b, w));
            }
        }
        set
    }

    pub fn dims(&self) -> &LatticeDims {
        &self.dims
    }

    /// Bit `k` set iff `frame` anticommutes with string logical `k`.
    pub fn signature(&self, frame: &PauliFrame) -> u8 {
        self.string_basis
            .iter()
            .enumerate()
            .fold(0u8, |acc, (k, s)| acc | (symplectic_product(frame, s) as u8) << k)
    }

    /// Pure-Z representative of a class on one sublattice.
    pub fn representative(&self, s: Sublattice, label: LogicalLabel) -> PauliFrame {
        tile_frame(self.dims, s, PauliLetter::Z, label)
    }

    /// Classifies `frame` without checking its syndrome.
    pub fn classify_unchecked(&self, frame: &PauliFrame) -> LogicalClass {
        let sig = self.signature(frame);
        match self.by_signature.get(&sig) {
            Some(&(black, white)) => LogicalClass::Biased { black, white },
            None => LogicalClass::General(sig),
        }
    }
}

/// Logical class of a frame that commutes with every stabilizer.
pub fn logical_class(frame: &PauliFrame, basis: &LogicalSet) -> Result<LogicalClass> {
    if !crate::codegrid::syndrome(frame).is_zero() {
        return Err(Error::NotInNormalizer);
    }
    Ok(basis.classify_unchecked(frame))
}
