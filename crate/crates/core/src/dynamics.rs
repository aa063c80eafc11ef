//! Continuous-time noise plus cellular-automaton dynamics, simulated with the
//! rejection-free n-fold way.
//!
//! A `Z` flip that changes the plaquette energy by `dE` fires at the total rate
//! `G(-dE)`, where `G(w) = w / (1 - exp(-beta w))` satisfies `G(w) = exp(beta w) G(-w)`.
//! This makes `exp(-beta E)` stationary: flips out of the vacuum (`dE = +6`) happen at
//! the bare noise rate `gamma_z`, while a flip that annihilates a defect triangle
//! (`dE = -6`) happens at `6 + gamma_z`. The automaton part of each rate is
//! `G - gamma_z >= 0`. `Y` flips are state independent at `gamma_z / zeta` per qubit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codegrid::{
    flip_mask, plaquette_energy, syndrome, BitGrid, LatticeDims, NoiseParams, PauliFrame, PauliLetter,
    QubitCoord, Sublattice,
};
use crate::error::{Error, Result};

/// Inverse temperature at which the automaton rate for `w = -6` vanishes.
pub fn beta_from_rate(gamma_z: f64) -> Result<f64> {
    if !(gamma_z > 0.0) || !gamma_z.is_finite() {
        return Err(Error::Domain(format!("gamma_z must be positive and finite, got {gamma_z}")));
    }
    Ok((6.0 / gamma_z).ln_1p() / 6.0)
}

/// `G(w) = w / (1 - exp(-beta w))`, with the limit `1 / beta` at `w = 0`.
pub fn total_rate(omega: i32, beta: f64) -> f64 {
    if omega == 0 {
        return 1.0 / beta;
    }
    let w = omega as f64;
    w / -(-beta * w).exp_m1()
}

/// Automaton part `G(w) - gamma_z` of the flip rate.
pub fn ca_rate(omega: i32, beta: f64, gamma_z: f64) -> Result<f64> {
    let g = total_rate(omega, beta);
    let r = g - gamma_z;
    // Rounding at w = -6 with the optimal beta.
    let tol = 1e-12 * g.max(gamma_z);
    if r < -tol {
        return Err(Error::NegativeRate { omega, rate: r });
    }
    Ok(if r <= tol { 0.0 } else { r })
}

/// Per-qubit `Y` rate `gamma_z / zeta`; zero at infinite bias.
pub fn y_rate(gamma_z: f64, zeta: f64) -> f64 {
    if zeta.is_infinite() {
        0.0
    } else {
        gamma_z / zeta
    }
}

/// Number of energy classes: `dE` in `{-6, -4, .., 6}`.
pub const CLASSES: usize = 7;

#[inline]
fn class_of_delta(delta: i32) -> usize {
    ((delta + 6) / 2) as usize
}

#[inline]
pub fn delta_of_class(k: usize) -> i32 {
    2 * k as i32 - 6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub beta: f64,
    pub gamma_z: f64,
    pub zeta: f64,
    pub ca_enabled: bool,
    /// Flip rate of a `Z` whose energy change is `2k - 6`.
    pub z_rates: [f64; CLASSES],
    pub y_rate: f64,
}

impl RateTable {
    pub fn new(gamma_z: f64, zeta: f64, ca_enabled: bool) -> Result<Self> {
        let beta = beta_from_rate(gamma_z)?;
        if !(zeta > 0.0) {
            return Err(Error::Config(format!("bias must be positive, got {zeta}")));
        }
        let mut z_rates = [gamma_z; CLASSES];
        if ca_enabled {
            for (k, r) in z_rates.iter_mut().enumerate() {
                let omega = -delta_of_class(k);
                *r = gamma_z + ca_rate(omega, beta, gamma_z)?;
            }
        }
        Ok(RateTable { beta, gamma_z, zeta, ca_enabled, z_rates, y_rate: y_rate(gamma_z, zeta) })
    }

    /// Rate of a `Z` flip with energy change `delta`.
    pub fn z_rate(&self, delta: i32) -> f64 {
        self.z_rates[class_of_delta(delta)]
    }
}

/// Which qubits the engine acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scope {
    Both,
    Only(Sublattice),
}

impl Scope {
    fn contains(self, s: Sublattice) -> bool {
        match self {
            Scope::Both => true,
            Scope::Only(t) => t == s,
        }
    }
}

/// A Markov chain over Pauli frames, advanced one event at a time.
#[derive(Debug, Clone)]
pub struct EngineState {
    dims: LatticeDims,
    rates: RateTable,
    scope: Scope,
    frame: PauliFrame,
    a: BitGrid,
    b: BitGrid,
    clock: f64,
    event_count: u64,
    seed: u64,
    rng: ChaCha8Rng,
    /// Qubit indices (see [`LatticeDims::qubit_index`]) in scope.
    active: Vec<u32>,
    members: [Vec<u32>; CLASSES],
    /// Position of each qubit inside its class, and the class itself.
    pos: Vec<u32>,
    class: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub qubit: QubitCoord,
    pub letter: PauliLetter,
    pub dt: f64,
}

/// Fresh engine in the vacuum acting on both sublattices.
pub fn init_engine(dims: LatticeDims, noise: &NoiseParams, ca_enabled: bool, seed: u64) -> Result<EngineState> {
    EngineState::new(dims, noise, ca_enabled, seed, Scope::Both)
}

impl EngineState {
    pub fn new(dims: LatticeDims, noise: &NoiseParams, ca_enabled: bool, seed: u64, scope: Scope) -> Result<Self> {
        noise.validate()?;
        if noise.gamma_x != 0.0 {
            return Err(Error::Config("X noise is not simulated; use Y and Z rates".into()));
        }
        let rates = RateTable::new(noise.gamma_z, noise.zeta(), ca_enabled)?;
        let n = dims.n();
        let active: Vec<u32> =
            (0..n).filter(|&k| scope.contains(dims.qubit_at(k).s)).map(|k| k as u32).collect();
        let mut e = EngineState {
            dims,
            rates,
            scope,
            frame: PauliFrame::identity(dims),
            a: BitGrid::zeros(dims.l(), dims.h()),
            b: BitGrid::zeros(dims.l(), dims.h()),
            clock: 0.0,
            event_count: 0,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            active,
            members: Default::default(),
            pos: vec![u32::MAX; n],
            class: vec![u8::MAX; n],
        };
        for k in e.active.clone() {
            let c = e.z_class(k as usize);
            e.insert(k, c);
        }
        Ok(e)
    }

    /// Engine started from an arbitrary frame, with a fresh clock.
    pub fn with_frame(mut self, frame: PauliFrame) -> Self {
        assert_eq!(frame.dims(), &self.dims);
        let s = syndrome(&frame);
        self.a = s.a_defects().clone();
        self.b = s.b_defects().clone();
        self.frame = frame;
        for k in self.active.clone() {
            self.reclassify(k as usize);
        }
        self
    }

    pub fn dims(&self) -> &LatticeDims {
        &self.dims
    }

    pub fn rates(&self) -> &RateTable {
        &self.rates
    }

    pub fn frame(&self) -> &PauliFrame {
        &self.frame
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn event_count(&self) -> u64 {
        self.event_count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Current plaquette energy.
    pub fn energy(&self) -> i64 {
        crate::codegrid::Syndrome::from_grids(self.dims, self.a.clone(), self.b.clone()).energy()
    }

    /// Number of in-scope qubits whose `Z` flip would change the energy by `delta`.
    pub fn class_count(&self, delta: i32) -> usize {
        self.members[class_of_delta(delta)].len()
    }

    /// Sum of all event rates.
    pub fn total_rate(&self) -> f64 {
        let z: f64 = self.members.iter().zip(&self.rates.z_rates).map(|(m, r)| m.len() as f64 * r).sum();
        z + self.active.len() as f64 * self.rates.y_rate
    }

    /// Total rate recomputed from the frame, ignoring the maintained classes.
    pub fn total_rate_from_scratch(&self) -> f64 {
        let z: f64 = self
            .active
            .iter()
            .map(|&k| {
                let q = self.dims.qubit_at(k as usize);
                self.rates.z_rate(crate::codegrid::local_energy_change(&self.frame, q, PauliLetter::Z))
            })
            .sum();
        z + self.active.len() as f64 * self.rates.y_rate
    }

    fn z_class(&self, k: usize) -> usize {
        let q = self.dims.qubit_at(k);
        let (fa, fb) = flip_mask(q.s, PauliLetter::Z);
        let delta: i32 = self
            .dims
            .plaquettes_of(q)
            .into_iter()
            .map(|(i, j)| {
                let (a, b) = (self.a.get(i, j), self.b.get(i, j));
                plaquette_energy(a ^ fa, b ^ fb) - plaquette_energy(a, b)
            })
            .sum();
        class_of_delta(delta)
    }

    fn insert(&mut self, k: u32, c: usize) {
        self.pos[k as usize] = self.members[c].len() as u32;
        self.class[k as usize] = c as u8;
        self.members[c].push(k);
    }

    fn remove(&mut self, k: u32) {
        let c = self.class[k as usize] as usize;
        let p = self.pos[k as usize] as usize;
        let last = self.members[c].pop().expect("member present");
        if last != k {
            self.members[c][p] = last;
            self.pos[last as usize] = p as u32;
        }
    }

    fn reclassify(&mut self, k: usize) {
        let c = self.z_class(k);
        if self.class[k] as usize != c {
            self.remove(k as u32);
            self.insert(k as u32, c);
        }
    }

    /// Multiplies `letter` into qubit `q` and updates defects and classes.
    pub fn apply(&mut self, q: QubitCoord, letter: PauliLetter) {
        self.frame.apply(q, letter);
        let (fa, fb) = flip_mask(q.s, letter);
        let plaquettes = self.dims.plaquettes_of(q);
        for &(i, j) in &plaquettes {
            if fa {
                self.a.flip(i, j);
            }
            if fb {
                self.b.flip(i, j);
            }
        }
        for (i, j) in plaquettes {
            let sites = self.dims.black_sites(i, j).into_iter().chain(self.dims.white_sites(i, j));
            for r in sites {
                if self.scope.contains(r.s) {
                    self.reclassify(self.dims.qubit_index(r));
                }
            }
        }
    }

    /// Draws the waiting time and the next event without applying it.
    fn draw(&mut self) -> Option<(f64, QubitCoord, PauliLetter)> {
        let total = self.total_rate();
        if !(total > 0.0) {
            return None;
        }
        let u: f64 = self.rng.random();
        let dt = -(-u).ln_1p() / total;
        let mut x = self.rng.random::<f64>() * total;
        for c in 0..CLASSES {
            let w = self.members[c].len() as f64 * self.rates.z_rates[c];
            if x < w {
                let m = &self.members[c];
                let k = m[self.rng.random_range(0..m.len())];
                return Some((dt, self.dims.qubit_at(k as usize), PauliLetter::Z));
            }
            x -= w;
        }
        let k = self.active[self.rng.random_range(0..self.active.len())];
        Some((dt, self.dims.qubit_at(k as usize), PauliLetter::Y))
    }
}

/// One n-fold-way event: advance the clock, flip, update the affected classes.
/// Returns `None` when every rate is zero.
pub fn bkl_step(engine: &mut EngineState) -> Option<Event> {
    let (dt, q, letter) = engine.draw()?;
    engine.clock += dt;
    engine.event_count += 1;
    engine.apply(q, letter);
    Some(Event { qubit: q, letter, dt })
}

/// Steps until the next event would land after `t_stop`, then parks the clock at
/// `t_stop`. By memorylessness the discarded draw does not bias the process.
pub fn run_until(engine: &mut EngineState, t_stop: f64) {
    while engine.clock < t_stop {
        let Some((dt, q, letter)) = engine.draw() else {
            engine.clock = t_stop;
            return;
        };
        if engine.clock + dt > t_stop {
            engine.clock = t_stop;
            return;
        }
        engine.clock += dt;
        engine.event_count += 1;
        engine.apply(q, letter);
    }
}

/// Steps until `stop` returns true for an event (that event is applied) or the rates
/// vanish. Returns the stopping event.
pub fn run_while(engine: &mut EngineState, mut stop: impl FnMut(&EngineState, &Event) -> bool) -> Option<Event> {
    loop {
        let ev = bkl_step(engine)?;
        if stop(engine, &ev) {
            return Some(ev);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineSnapshot {
    pub clock: f64,
    pub event_count: u64,
    pub seed: u64,
    pub frame: PauliFrame,
}

impl EngineState {
    pub fn snapshot(&self) -> EngineSnapshot {
        EngineSnapshot { clock: self.clock, event_count: self.event_count, seed: self.seed, frame: self.frame.clone() }
    }
}
