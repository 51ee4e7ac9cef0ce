//! Equilibrium dynamics.
//!
//! The common waiting region is a moving polyhedron-like domain
//! `W = { |x~^i| < f^{-1}(sum_j a_ij y^j) for all i }` with `2N` faces (one
//! per player and side). The equilibrium process is a Brownian motion in the
//! positions, reflected obliquely at the faces: a push on player `i`'s face
//! moves her position toward the center and burns fuel from her accessible
//! pools proportionally to their levels, which in turn moves the face. An
//! exterior start first collapses to the domain through a cascade of
//! rank-ordered jumps.
//!
//! Discretization follows the delta-push construction: after each Euler
//! increment, violated faces are identified and the state is pushed along the
//! average of their reflection vectors in increments of
//! `min(overshoot, delta)` until it re-enters the domain within
//! `boundary_tol`. Fuel levels are frozen between boundary contacts. A player
//! whose accessible fuel is exhausted can no longer act: her faces are
//! dropped and her centered position diffuses freely.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::boundary::BoundarySolution;
use crate::error::{Error, Result};
use crate::model::{
    allocation_weights, excesses_shifted, label_from_excesses, masked_excesses,
    relative_positions, total_accessible, GameSpec, JointState, RegionLabel, Side, Variant,
};
use crate::value::{apply_jump_shifted, JumpEvent};

/// A player with less accessible fuel than this is treated as exhausted.
const EXHAUST_EPS: f64 = 1e-12;

/// Maximum pushes per Euler step before the scheme reports failure.
const MAX_PUSHES: usize = 10_000;

/// Violations closer than this are treated as an exact tie when choosing the
/// pushing player, absorbing roundoff in the relative-position computation.
const TIE_EPS: f64 = 1e-12;

/// Cascade iteration cap and terminal distance tolerance.
const MAX_CASCADE: usize = 1000;
const CASCADE_TOL: f64 = 1e-8;

/// Time-stepping parameters of the reflection scheme.
#[derive(Clone, Copy, Debug)]
pub struct SchemeParams {
    /// Euler time step.
    pub dt: f64,
    /// Push size delta; `sqrt(dt)` by default.
    pub delta: f64,
    /// Boundary detection tolerance.
    pub boundary_tol: f64,
    /// Simulation horizon `T`.
    pub horizon: f64,
    /// Base RNG seed; per-path streams are derived from it.
    pub seed: u64,
}

impl SchemeParams {
    /// Defaults for a given discount rate: `dt = 1e-3`, `delta = sqrt(dt)`,
    /// and a horizon with `e^{-alpha T} < 1e-4`.
    pub fn for_discount(discount: f64) -> Self {
        let dt = 1e-3;
        Self {
            dt,
            delta: dt.sqrt(),
            boundary_tol: 1e-9,
            horizon: (1e4f64).ln() / discount,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.delta > 0.0 && self.boundary_tol > 0.0 && self.horizon > 0.0) {
            return Err(Error::Model(
                "scheme parameters must all be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).ceil() as usize
    }
}

/// Geometry of the moving waiting region: thresholds, inward normals, and
/// reflection directions per face. Face `k < N` is player `k`'s plus face
/// (`x~^k = +threshold`), face `N + k` the minus face.
#[derive(Clone, Debug)]
pub struct GeometryModel<'a> {
    spec: &'a GameSpec,
    boundary: &'a BoundarySolution,
    /// Per-player threshold offsets (deviation strategies); zero at
    /// equilibrium.
    shifts: Vec<f64>,
}

/// Builds the equilibrium geometry for a spec/boundary pair.
pub fn build_geometry<'a>(
    spec: &'a GameSpec,
    boundary: &'a BoundarySolution,
) -> GeometryModel<'a> {
    GeometryModel::new(spec, boundary)
}

impl<'a> GeometryModel<'a> {
    pub fn new(spec: &'a GameSpec, boundary: &'a BoundarySolution) -> Self {
        Self {
            spec,
            boundary,
            shifts: vec![0.0; spec.n_players()],
        }
    }

    /// Geometry where `player` reflects at `f^{-1}(.) + shift` instead of the
    /// equilibrium threshold (floored at zero).
    pub fn with_shift(spec: &'a GameSpec, boundary: &'a BoundarySolution, player: usize, shift: f64) -> Self {
        let mut shifts = vec![0.0; spec.n_players()];
        shifts[player] = shift;
        Self {
            spec,
            boundary,
            shifts,
        }
    }

    pub fn spec(&self) -> &GameSpec {
        self.spec
    }

    pub fn boundary(&self) -> &BoundarySolution {
        self.boundary
    }

    pub fn shifts(&self) -> &[f64] {
        &self.shifts
    }

    pub fn n_faces(&self) -> usize {
        2 * self.spec.n_players()
    }

    pub fn face_player(&self, face: usize) -> usize {
        face % self.spec.n_players()
    }

    pub fn face_side(&self, face: usize) -> Side {
        if face < self.spec.n_players() {
            Side::Plus
        } else {
            Side::Minus
        }
    }

    /// Threshold of `player` at resource vector `y`.
    pub fn threshold(&self, player: usize, y: &[f64]) -> Result<f64> {
        let acc = total_accessible(self.spec, y, player);
        Ok((self.boundary.f_inverse(acc)? + self.shifts[player]).max(0.0))
    }

    /// Signed violation of `face` (positive outside the domain).
    pub fn face_violation(&self, face: usize, xt: &[f64], y: &[f64]) -> Result<f64> {
        let i = self.face_player(face);
        let thr = self.threshold(i, y)?;
        Ok(match self.face_side(face) {
            Side::Plus => xt[i] - thr,
            Side::Minus => -xt[i] - thr,
        })
    }

    /// Membership of the closed waiting region within `tol`, ignoring the
    /// faces of exhausted players.
    pub fn contains(&self, state: &JointState, tol: f64) -> Result<bool> {
        let xt = relative_positions(&state.positions)?;
        for i in 0..self.spec.n_players() {
            if total_accessible(self.spec, &state.resources, i) <= EXHAUST_EPS
                && self.shifts[i] <= 0.0
            {
                continue;
            }
            if xt[i].abs() > self.threshold(i, &state.resources)? + tol {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Inward unit normal of `face` as an `(N + M)`-vector `(x-part; y-part)`.
    /// On the plus face the x-part is `-1` at the owner's slot and
    /// `+1/(N-1)` elsewhere (mirrored on the minus face); the y-part is
    /// `(f^{-1})'(acc) * a_ij`.
    pub fn normal(&self, face: usize, y: &[f64]) -> Result<Vec<f64>> {
        let n = self.spec.n_players();
        let m = self.spec.n_resources();
        let i = self.face_player(face);
        let sgn = self.face_side(face).sign();
        let acc = total_accessible(self.spec, y, i);
        let x_inv = self.boundary.f_inverse(acc)?;
        let thr_floored = (x_inv + self.shifts[i]).max(0.0) == 0.0 && self.shifts[i] < 0.0;
        let g_prime = if thr_floored {
            0.0
        } else {
            1.0 / self.boundary.f_prime_at(x_inv)
        };
        let mut v = vec![0.0; n + m];
        for j in 0..n {
            v[j] = if j == i { -sgn } else { sgn / (n as f64 - 1.0) };
        }
        for j in 0..m {
            v[n + j] = g_prime * f64::from(self.spec.adjacency()[i][j]);
        }
        normalize(&mut v);
        Ok(v)
    }

    /// Unit reflection direction of `face`: x-part `-sign` at the owner's
    /// slot, y-part `-w_j` with `w` the allocation weights (zero vector when
    /// exhausted).
    pub fn reflection(&self, face: usize, y: &[f64]) -> Vec<f64> {
        let n = self.spec.n_players();
        let m = self.spec.n_resources();
        let i = self.face_player(face);
        let sgn = self.face_side(face).sign();
        let w = allocation_weights(self.spec, y, i);
        let mut v = vec![0.0; n + m];
        v[i] = -sgn;
        for j in 0..m {
            v[n + j] = -w[j];
        }
        normalize(&mut v);
        v
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm > 0.0 {
        for a in v.iter_mut() {
            *a /= norm;
        }
    }
}

/// Minimum inner product between averaged normals and individual reflection
/// directions (and the transpose) over sampled resource vectors and feasible
/// active-face configurations in the box. A positive return certifies the
/// reflection-compatibility condition numerically; non-positive is a
/// geometry error.
///
/// Configurations of two or more faces are filtered by a zero-sum
/// feasibility check: centered positions sum to zero, so the active
/// thresholds (with their sides) must be balanceable by the inactive
/// players' slack. Same-signed clusters that cannot balance are geometric
/// phantoms and are excluded; mixed-sign corners are kept.
pub fn check_reflection_compatibility(
    geom: &GeometryModel<'_>,
    y_box: &[(f64, f64)],
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let m = geom.spec().n_resources();
    let n = geom.spec().n_players();
    if y_box.len() != m {
        return Err(Error::Dimension(format!(
            "resource box has {} intervals but the game has {m} pools",
            y_box.len()
        )));
    }
    for &(lo, hi) in y_box {
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::Geometry(
                "resource box must be bounded away from zero (degenerate faces excluded)".into(),
            ));
        }
    }

    let mut points: Vec<Vec<f64>> = Vec::new();
    if m <= 12 {
        for mask in 0..(1usize << m) {
            points.push(
                (0..m)
                    .map(|j| if mask >> j & 1 == 1 { y_box[j].1 } else { y_box[j].0 })
                    .collect(),
            );
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        points.push(
            (0..m)
                .map(|j| rng.gen_range(y_box[j].0..=y_box[j].1))
                .collect(),
        );
    }

    let mut overall = f64::INFINITY;
    for y in &points {
        let thr: Vec<f64> = (0..n)
            .map(|i| geom.threshold(i, y))
            .collect::<Result<_>>()?;
        // Sign configurations: 0 inactive, +-1 a side of that player's face.
        let mut config = vec![0i8; n];
        loop {
            // Advance ternary counter; evaluate the current config first.
            let active: Vec<usize> = (0..n).filter(|&i| config[i] != 0).collect();
            if !active.is_empty() && feasible(&config, &thr) {
                let faces: Vec<usize> = active
                    .iter()
                    .map(|&i| if config[i] > 0 { i } else { n + i })
                    .collect();
                let normals: Vec<Vec<f64>> = faces
                    .iter()
                    .map(|&f| geom.normal(f, y))
                    .collect::<Result<_>>()?;
                let refls: Vec<Vec<f64>> = faces.iter().map(|&f| geom.reflection(f, y)).collect();
                let mean_n = mean_vec(&normals);
                let mean_r = mean_vec(&refls);
                for k in 0..faces.len() {
                    overall = overall.min(dot(&mean_n, &refls[k]));
                    overall = overall.min(dot(&mean_r, &normals[k]));
                }
            }
            // Increment.
            let mut pos = 0;
            loop {
                if pos == n {
                    break;
                }
                config[pos] += 1;
                if config[pos] <= 1 {
                    break;
                }
                config[pos] = -1;
                pos += 1;
            }
            if pos == n {
                break;
            }
        }
    }

    if overall <= 0.0 {
        return Err(Error::Geometry(format!(
            "reflection compatibility violated: minimum inner product {overall}"
        )));
    }
    Ok(overall)
}

/// Zero-sum feasibility of an active-face sign pattern: single faces are
/// always feasible; multi-face patterns need mixed signs or enough inactive
/// slack to balance the centered positions (with 5% slack for near-corners).
fn feasible(config: &[i8], thr: &[f64]) -> bool {
    let active: Vec<usize> = (0..config.len()).filter(|&i| config[i] != 0).collect();
    if active.len() <= 1 {
        return true;
    }
    let has_plus = active.iter().any(|&i| config[i] > 0);
    let has_minus = active.iter().any(|&i| config[i] < 0);
    if has_plus && has_minus {
        return true;
    }
    let sum_active: f64 = active.iter().map(|&i| thr[i]).sum();
    let sum_inactive: f64 = (0..config.len())
        .filter(|i| config[*i] == 0)
        .map(|i| thr[i])
        .sum();
    sum_active <= sum_inactive + 0.05 * sum_active
}

fn mean_vec(vs: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; vs[0].len()];
    for v in vs {
        for (o, a) in out.iter_mut().zip(v) {
            *o += a / vs.len() as f64;
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Bookkeeping of one Euler step's boundary interaction.
#[derive(Clone, Debug)]
pub struct StepPushes {
    /// Per-face local-time increments.
    pub eta: Vec<f64>,
    /// Per-player control increments by direction.
    pub xi_plus: Vec<f64>,
    pub xi_minus: Vec<f64>,
    /// Per-pool fuel consumed this step.
    pub consumed: Vec<f64>,
    pub push_count: usize,
}

impl StepPushes {
    fn zero(n: usize, m: usize) -> Self {
        Self {
            eta: vec![0.0; 2 * n],
            xi_plus: vec![0.0; n],
            xi_minus: vec![0.0; n],
            consumed: vec![0.0; m],
            push_count: 0,
        }
    }
}

/// Advances the state by one Brownian increment and resolves any boundary
/// violation with repeated pushes of size `min(overshoot, delta)` along the
/// average reflection direction of the active faces.
pub fn reflect_step(
    geom: &GeometryModel<'_>,
    state: &JointState,
    dw: &[f64],
    params: &SchemeParams,
) -> Result<(JointState, StepPushes)> {
    let mut next = state.clone();
    if dw.len() != next.positions.len() {
        return Err(Error::Dimension(format!(
            "expected {} Brownian increments, got {}",
            next.positions.len(),
            dw.len()
        )));
    }
    for (x, d) in next.positions.iter_mut().zip(dw) {
        *x += d;
    }
    let pushes = resolve_pushes(geom, &mut next, params)?;
    Ok((next, pushes))
}

/// Push loop shared by the free function and the path simulator.
fn resolve_pushes(
    geom: &GeometryModel<'_>,
    state: &mut JointState,
    params: &SchemeParams,
) -> Result<StepPushes> {
    let spec = geom.spec();
    let n = spec.n_players();
    let m = spec.n_resources();
    let mut out = StepPushes::zero(n, m);

    loop {
        let xt = relative_positions(&state.positions)?;
        // Candidate face per fueled player: the more-violated side. A single
        // push goes to the most-violated player, ties to the largest index,
        // matching the rank discipline of the jump cascade (coinciding faces
        // alternate, so corner local time still splits correctly in the
        // limit, while exact ties route all control to one player).
        let mut best: Option<(usize, usize, f64)> = None; // (face, player, violation)
        for i in 0..n {
            let acc = total_accessible(spec, &state.resources, i);
            if acc <= EXHAUST_EPS {
                continue;
            }
            let thr = geom.threshold(i, &state.resources)?;
            let v_plus = xt[i] - thr;
            let v_minus = -xt[i] - thr;
            let (face, v) = if v_plus >= v_minus {
                (i, v_plus)
            } else {
                (n + i, v_minus)
            };
            // Coinciding faces (shared pools) produce violations equal up to
            // roundoff in the excess computation; treat them as exact ties so
            // the largest index always acts, matching the cascade rule.
            if best.is_none_or(|(_, _, bv)| v >= bv - TIE_EPS) {
                best = Some((face, i, v));
            }
        }
        let Some((face, i, worst)) = best else { break };
        if worst <= params.boundary_tol {
            break;
        }
        out.push_count += 1;
        if out.push_count > MAX_PUSHES {
            return Err(Error::Scheme(format!(
                "more than {MAX_PUSHES} pushes in one step; delta {} too large for dt {}",
                params.delta, params.dt
            )));
        }

        // Cap so no pool is overdrawn: the x-scale of the face's unit
        // reflection is c = 1/sqrt(1 + sum w^2), and a push of lambda along
        // it draws lambda*c*w_j from pool j.
        let mut lambda = worst.min(params.delta);
        let w = allocation_weights(spec, &state.resources, i);
        let c = 1.0 / (1.0 + w.iter().map(|a| a * a).sum::<f64>()).sqrt();
        for j in 0..m {
            let rate = c * w[j];
            if rate > 0.0 {
                lambda = lambda.min(state.resources[j] / rate);
            }
        }
        let amount = lambda * c;
        let sgn = geom.face_side(face).sign();
        state.positions[i] -= sgn * amount;
        if sgn > 0.0 {
            out.xi_minus[i] += amount;
        } else {
            out.xi_plus[i] += amount;
        }
        out.eta[face] += lambda;
        for j in 0..m {
            let dy = amount * w[j];
            out.consumed[j] += dy;
            state.resources[j] = (state.resources[j] - dy).max(0.0);
        }
    }
    Ok(out)
}

/// Sequential rank-ordered jumps from an exterior state into the closed
/// waiting region. Returns the landed state and the jump list; resources
/// weakly decrease and exactly one player acts per iteration.
pub fn jump_cascade(
    spec: &GameSpec,
    boundary: &BoundarySolution,
    state: &JointState,
) -> Result<(JointState, Vec<JumpEvent>)> {
    jump_cascade_shifted(spec, boundary, state, None)
}

pub(crate) fn jump_cascade_shifted(
    spec: &GameSpec,
    boundary: &BoundarySolution,
    state: &JointState,
    shifts: Option<&[f64]>,
) -> Result<(JointState, Vec<JumpEvent>)> {
    let mut s = state.clone();
    let mut events = Vec::new();
    for _ in 0..MAX_CASCADE {
        let exc = masked_excesses(spec, boundary, &s, shifts)?;
        let xt = relative_positions(&s.positions)?;
        match label_from_excesses(&exc, &xt, -1e-12) {
            RegionLabel::Waiting => return Ok((s, events)),
            RegionLabel::Action { player, side } => {
                let shift = shifts.map_or(0.0, |sh| sh[player]);
                let ev = apply_jump_shifted(spec, boundary, &mut s, player, side, shift)?;
                events.push(ev);
            }
        }
    }
    let exc = masked_excesses(spec, boundary, &s, shifts)?;
    let residual = exc.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if residual > CASCADE_TOL {
        return Err(Error::Numeric(format!(
            "jump cascade did not converge within {MAX_CASCADE} iterations \
             (residual distance {residual}, {} jumps recorded)",
            events.len()
        )));
    }
    Ok((s, events))
}

/// Distance of a state to the closed waiting region, measured as the largest
/// positive excess past any fueled player's threshold (zero inside).
pub fn distance_to_waiting(
    spec: &GameSpec,
    boundary: &BoundarySolution,
    state: &JointState,
) -> Result<f64> {
    let exc = excesses_shifted(spec, boundary, state, None)?;
    let mut worst: f64 = 0.0;
    for (i, e) in exc.iter().enumerate() {
        if total_accessible(spec, &state.resources, i) > EXHAUST_EPS {
            worst = worst.max(*e);
        }
    }
    Ok(worst)
}

/// Per-player rank functionals: `|x~^i|` for pooling, otherwise
/// `|x~^i| - f^{-1}(acc_i)`. Returns the ranks and the argmax (ties to the
/// largest index), which is the player the cascade lets act.
pub fn rank_diagnostic(
    spec: &GameSpec,
    boundary: &BoundarySolution,
    state: &JointState,
) -> Result<(Vec<f64>, usize)> {
    state.validate(spec)?;
    let xt = relative_positions(&state.positions)?;
    let mut ranks = Vec::with_capacity(spec.n_players());
    for i in 0..spec.n_players() {
        let acc = total_accessible(spec, &state.resources, i);
        // Exhausted players cannot act and are excluded from the ranking.
        let r = if acc <= EXHAUST_EPS {
            f64::NEG_INFINITY
        } else {
            match spec.variant() {
                Variant::Pooling => xt[i].abs(),
                _ => xt[i].abs() - boundary.f_inverse(acc)?,
            }
        };
        ranks.push(r);
    }
    let mut best = 0;
    for k in 1..ranks.len() {
        if ranks[k] >= ranks[best] {
            best = k;
        }
    }
    Ok((ranks, best))
}

/// Pre-generated Brownian increments: `steps x N` Gaussians scaled by
/// `sqrt(dt)`, from a counter-based stream keyed by `(seed, path_index)` so
/// paths are reproducible and order-independent under parallelism.
#[derive(Clone, Debug)]
pub struct NoisePath {
    pub dt: f64,
    pub n_players: usize,
    increments: Vec<f64>,
}

impl NoisePath {
    pub fn generate(seed: u64, path_index: u64, n_players: usize, steps: usize, dt: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path_index);
        let scale = dt.sqrt();
        let increments = (0..steps * n_players)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                z * scale
            })
            .collect();
        Self {
            dt,
            n_players,
            increments,
        }
    }

    pub fn zeros(n_players: usize, steps: usize, dt: f64) -> Self {
        Self {
            dt,
            n_players,
            increments: vec![0.0; steps * n_players],
        }
    }

    pub fn steps(&self) -> usize {
        self.increments.len() / self.n_players
    }

    pub fn step_slice(&self, step: usize) -> &[f64] {
        &self.increments[step * self.n_players..(step + 1) * self.n_players]
    }

    /// Aggregates blocks of `factor` increments, yielding the same Brownian
    /// path on a grid coarsened by `factor`.
    pub fn coarsen(&self, factor: usize) -> Self {
        let steps = self.steps() / factor;
        let mut increments = vec![0.0; steps * self.n_players];
        for s in 0..steps {
            for f in 0..factor {
                let src = (s * factor + f) * self.n_players;
                for j in 0..self.n_players {
                    increments[s * self.n_players + j] += self.increments[src + j];
                }
            }
        }
        Self {
            dt: self.dt * factor as f64,
            n_players: self.n_players,
            increments,
        }
    }
}

/// Discretized trajectory with control and local-time bookkeeping.
#[derive(Clone, Debug)]
pub struct PathRecord {
    pub times: Vec<f64>,
    pub states: Vec<JointState>,
    /// Cumulative per-player controls at each time, split by direction.
    pub xi_plus: Vec<Vec<f64>>,
    pub xi_minus: Vec<Vec<f64>>,
    /// Cumulative per-face local times (empty per step for the explicit
    /// two-player map, which does not decompose pushes by face).
    pub local_times: Vec<Vec<f64>>,
    pub jumps: Vec<JumpEvent>,
}

/// Streaming path engine shared by the simulator and the Monte Carlo
/// estimators. Thresholds are cached and refreshed only when fuel burns.
pub struct Simulator<'a> {
    geom: GeometryModel<'a>,
    pub state: JointState,
    thresholds: Vec<f64>,
    exhausted: Vec<bool>,
    pub xi_plus: Vec<f64>,
    pub xi_minus: Vec<f64>,
    pub eta: Vec<f64>,
    params: SchemeParams,
    pub t: f64,
}

impl<'a> Simulator<'a> {
    /// Builds the engine and performs the initial jump cascade when the start
    /// is exterior. Returned events are stamped at `t = 0`.
    pub fn new(
        geom: GeometryModel<'a>,
        start: &JointState,
        params: SchemeParams,
    ) -> Result<(Self, Vec<JumpEvent>)> {
        params.validate()?;
        start.validate(geom.spec())?;
        let (state, events) =
            jump_cascade_shifted(geom.spec(), geom.boundary(), start, Some(geom.shifts()))?;
        let n = geom.spec().n_players();
        let mut xi_plus = vec![0.0; n];
        let mut xi_minus = vec![0.0; n];
        for ev in &events {
            match ev.side {
                Side::Plus => xi_minus[ev.player] += ev.magnitude,
                Side::Minus => xi_plus[ev.player] += ev.magnitude,
            }
        }
        let mut sim = Self {
            eta: vec![0.0; 2 * n],
            xi_plus,
            xi_minus,
            thresholds: vec![0.0; n],
            exhausted: vec![false; n],
            state,
            geom,
            params,
            t: 0.0,
        };
        sim.refresh_thresholds()?;
        Ok((sim, events))
    }

    pub fn geometry(&self) -> &GeometryModel<'a> {
        &self.geom
    }

    fn refresh_thresholds(&mut self) -> Result<()> {
        let spec = self.geom.spec();
        for i in 0..spec.n_players() {
            let acc = total_accessible(spec, &self.state.resources, i);
            self.exhausted[i] = acc <= EXHAUST_EPS;
            self.thresholds[i] = if self.exhausted[i] {
                f64::INFINITY
            } else {
                self.geom.threshold(i, &self.state.resources)?
            };
        }
        Ok(())
    }

    /// An immediate round-trip control of total size `size` by `player`:
    /// half a push out and back, net zero displacement, burning `size` fuel.
    /// Used as a deliberately wasteful admissible deviation.
    pub fn apply_round_trip(&mut self, player: usize, size: f64) -> Result<()> {
        let spec = self.geom.spec();
        let acc = total_accessible(spec, &self.state.resources, player);
        if size > acc {
            return Err(Error::Inadmissible(format!(
                "round-trip of size {size} exceeds accessible fuel {acc}"
            )));
        }
        let w = allocation_weights(spec, &self.state.resources, player);
        for j in 0..self.state.resources.len() {
            self.state.resources[j] = (self.state.resources[j] - size * w[j]).max(0.0);
        }
        self.xi_plus[player] += size / 2.0;
        self.xi_minus[player] += size / 2.0;
        self.refresh_thresholds()
    }

    /// One Euler step under increments `dw` (length N, already scaled by
    /// `sqrt(dt)`). The interior fast path allocates nothing and checks the
    /// cached thresholds only.
    pub fn step(&mut self, dw: &[f64]) -> Result<StepPushes> {
        for (x, d) in self.state.positions.iter_mut().zip(dw) {
            *x += d;
        }
        self.t += self.params.dt;
        let n = self.geom.spec().n_players();
        let m = self.geom.spec().n_resources();
        // x~^i = (N x^i - sum) / (N - 1), computed in place.
        let sum: f64 = self.state.positions.iter().sum();
        let scale = 1.0 / (n as f64 - 1.0);
        let mut violated = false;
        for i in 0..n {
            if self.exhausted[i] {
                continue;
            }
            let xt = (n as f64 * self.state.positions[i] - sum) * scale;
            if xt.abs() > self.thresholds[i] + self.params.boundary_tol {
                violated = true;
                break;
            }
        }
        if !violated {
            return Ok(StepPushes::zero(n, m));
        }
        let pushes = resolve_pushes(&self.geom, &mut self.state, &self.params)?;
        for i in 0..n {
            self.xi_plus[i] += pushes.xi_plus[i];
            self.xi_minus[i] += pushes.xi_minus[i];
        }
        for f in 0..2 * n {
            self.eta[f] += pushes.eta[f];
        }
        self.refresh_thresholds()?;
        Ok(pushes)
    }

    /// Fast interior step for bulk estimation: identical dynamics to
    /// [`Simulator::step`] but skips per-step bookkeeping output. Returns
    /// `true` when pushes occurred.
    pub fn step_quiet(&mut self, dw: &[f64]) -> Result<bool> {
        for (x, d) in self.state.positions.iter_mut().zip(dw) {
            *x += d;
        }
        self.t += self.params.dt;
        let n = self.geom.spec().n_players();
        let sum: f64 = self.state.positions.iter().sum();
        let scale = 1.0 / (n as f64 - 1.0);
        let mut violated = false;
        for i in 0..n {
            if self.exhausted[i] {
                continue;
            }
            let xt = (n as f64 * self.state.positions[i] - sum) * scale;
            if xt.abs() > self.thresholds[i] + self.params.boundary_tol {
                violated = true;
                break;
            }
        }
        if !violated {
            return Ok(false);
        }
        let pushes = resolve_pushes(&self.geom, &mut self.state, &self.params)?;
        for i in 0..n {
            self.xi_plus[i] += pushes.xi_plus[i];
            self.xi_minus[i] += pushes.xi_minus[i];
        }
        for f in 0..2 * n {
            self.eta[f] += pushes.eta[f];
        }
        self.refresh_thresholds()?;
        Ok(true)
    }

    /// Centered position of one player without allocation.
    pub fn centered(&self, player: usize) -> f64 {
        let n = self.geom.spec().n_players();
        let sum: f64 = self.state.positions.iter().sum();
        (n as f64 * self.state.positions[player] - sum) / (n as f64 - 1.0)
    }
}

/// Simulates the equilibrium path from `start` under the given noise:
/// initial cascade, then reflected Euler steps to the horizon.
pub fn simulate_path(
    geom: &GeometryModel<'_>,
    start: &JointState,
    params: &SchemeParams,
    noise: &NoisePath,
) -> Result<PathRecord> {
    if noise.n_players != geom.spec().n_players() {
        return Err(Error::Dimension(
            "noise path and spec disagree on player count".into(),
        ));
    }
    let (mut sim, jumps) = Simulator::new(geom.clone(), start, *params)?;
    let steps = noise.steps().min(params.steps());
    let mut rec = PathRecord {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        xi_plus: Vec::with_capacity(steps + 1),
        xi_minus: Vec::with_capacity(steps + 1),
        local_times: Vec::with_capacity(steps + 1),
        jumps,
    };
    let push = |sim: &Simulator<'_>, rec: &mut PathRecord| {
        rec.times.push(sim.t);
        rec.states.push(sim.state.clone());
        rec.xi_plus.push(sim.xi_plus.clone());
        rec.xi_minus.push(sim.xi_minus.clone());
        rec.local_times.push(sim.eta.clone());
    };
    push(&sim, &mut rec);
    for s in 0..steps {
        sim.step(noise.step_slice(s))?;
        push(&sim, &mut rec);
    }
    Ok(rec)
}

/// Explicit two-player pooling path: player 1 never controls; player 2's
/// controls solve the coupled running-maximum recursion against the moving
/// barrier `f^{-1}(remaining fuel)`, resolved per step by at most two
/// passes of the jump-root fixed point.
pub fn two_player_explicit(
    start: &JointState,
    noise: &NoisePath,
    boundary: &BoundarySolution,
) -> Result<PathRecord> {
    if start.positions.len() != 2 || start.resources.len() != 1 || noise.n_players != 2 {
        return Err(Error::Dimension(
            "explicit map needs two players and one common pool".into(),
        ));
    }
    let y0 = start.resources[0];
    let mut b1 = 0.0f64; // accumulated noise of player 1
    let mut b2 = 0.0f64;
    let mut up = 0.0f64; // xi^{2+}
    let mut um = 0.0f64; // xi^{2-}

    let mut rec = PathRecord {
        times: Vec::with_capacity(noise.steps() + 1),
        states: Vec::with_capacity(noise.steps() + 1),
        xi_plus: Vec::with_capacity(noise.steps() + 1),
        xi_minus: Vec::with_capacity(noise.steps() + 1),
        local_times: Vec::with_capacity(noise.steps() + 1),
        jumps: Vec::new(),
    };

    let resolve = |d: f64, up: &mut f64, um: &mut f64| -> Result<()> {
        for _ in 0..2 {
            let y_rem = (y0 - *up - *um).max(0.0);
            if y_rem <= EXHAUST_EPS {
                break;
            }
            let u_diff = d - *up + *um;
            let thr = boundary.f_inverse(y_rem)?;
            if u_diff > thr {
                let z = crate::value::jump_root_plus(boundary, u_diff - y_rem)?;
                *up += u_diff - z;
            } else if u_diff < -thr {
                let z = crate::value::jump_root_minus(boundary, u_diff + y_rem)?;
                *um += z - u_diff;
            } else {
                break;
            }
        }
        Ok(())
    };

    let d0 = start.positions[0] - start.positions[1];
    resolve(d0, &mut up, &mut um)?;
    if up + um > 0.0 {
        rec.jumps.push(JumpEvent {
            time: 0.0,
            player: 1,
            side: if up > 0.0 { Side::Minus } else { Side::Plus },
            magnitude: up + um,
            consumed: vec![up + um],
        });
    }

    let record = |t: f64, b1: f64, b2: f64, up: f64, um: f64, rec: &mut PathRecord| {
        let y_rem = (y0 - up - um).max(0.0);
        rec.times.push(t);
        rec.states.push(JointState::new(
            vec![start.positions[0] + b1, start.positions[1] + b2 + up - um],
            vec![y_rem],
        ));
        rec.xi_plus.push(vec![0.0, up]);
        rec.xi_minus.push(vec![0.0, um]);
        rec.local_times.push(Vec::new());
    };
    record(0.0, b1, b2, up, um, &mut rec);

    for s in 0..noise.steps() {
        let dw = noise.step_slice(s);
        b1 += dw[0];
        b2 += dw[1];
        let d = d0 + b1 - b2;
        resolve(d, &mut up, &mut um)?;
        record((s + 1) as f64 * noise.dt, b1, b2, up, um, &mut rec);
    }
    Ok(rec)
}
