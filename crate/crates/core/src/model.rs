//! Game specification and joint-state bookkeeping.
//!
//! An `N`-player game shares `M` resource pools through a binary adjacency
//! matrix `a`: player `i` can draw on pool `j` iff `a[i][j] = 1`. When player
//! `i` exerts a control increment, the consumed fuel is split across her
//! accessible pools proportionally to their current levels. The classifier
//! compares each player's centered position against the moving threshold
//! `f^{-1}(sum_j a_ij y^j)` and, among players past their threshold, lets the
//! one with the largest excess act (ties to the largest index).

use crate::boundary::BoundarySolution;
use crate::cost::CostFunction;
use crate::error::{Error, Result};

/// Which of the canonical resource-network layouts a spec uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// One common pool, all-ones adjacency column (M = 1).
    Pooling,
    /// Private pools, identity adjacency (M = N).
    Dividing,
    /// M = N with unit diagonal and arbitrary extra access.
    Sharing,
    /// Arbitrary binary adjacency.
    General,
}

/// Immutable parameters of one game instance.
#[derive(Clone, Debug)]
pub struct GameSpec {
    n_players: usize,
    n_resources: usize,
    adjacency: Vec<Vec<u8>>,
    discount: f64,
    cost: CostFunction,
    variant: Variant,
}

impl GameSpec {
    /// General constructor; validates the adjacency shape, the row/column
    /// access conditions, and the discount rate.
    pub fn new(
        adjacency: Vec<Vec<u8>>,
        discount: f64,
        cost: CostFunction,
        variant: Variant,
    ) -> Result<Self> {
        let n_players = adjacency.len();
        if n_players < 2 {
            return Err(Error::Dimension(format!(
                "need at least 2 players, got {n_players}"
            )));
        }
        let n_resources = adjacency[0].len();
        if n_resources == 0 {
            return Err(Error::Dimension("need at least one resource pool".into()));
        }
        for (i, row) in adjacency.iter().enumerate() {
            if row.len() != n_resources {
                return Err(Error::Dimension(format!(
                    "adjacency row {i} has length {} but expected {n_resources}",
                    row.len()
                )));
            }
            if row.iter().any(|&a| a > 1) {
                return Err(Error::Model(format!(
                    "adjacency entries must be 0 or 1 (row {i})"
                )));
            }
            if row.iter().all(|&a| a == 0) {
                return Err(Error::Model(format!(
                    "player {i} has no accessible resource (zero adjacency row)"
                )));
            }
        }
        for j in 0..n_resources {
            if adjacency.iter().all(|row| row[j] == 0) {
                return Err(Error::Model(format!(
                    "resource {j} is accessible to no player (zero adjacency column)"
                )));
            }
        }
        if !(discount > 0.0) {
            return Err(Error::Model(format!("discount must be positive, got {discount}")));
        }
        match variant {
            Variant::Pooling => {
                if n_resources != 1 || adjacency.iter().any(|r| r[0] != 1) {
                    return Err(Error::Model(
                        "pooling requires a single all-ones adjacency column".into(),
                    ));
                }
            }
            Variant::Dividing => {
                let ok = n_resources == n_players
                    && adjacency
                        .iter()
                        .enumerate()
                        .all(|(i, r)| r.iter().enumerate().all(|(j, &a)| a == u8::from(i == j)));
                if !ok {
                    return Err(Error::Model("dividing requires the identity adjacency".into()));
                }
            }
            Variant::Sharing => {
                let ok = n_resources == n_players
                    && adjacency.iter().enumerate().all(|(i, r)| r[i] == 1);
                if !ok {
                    return Err(Error::Model(
                        "sharing requires M = N with a unit diagonal".into(),
                    ));
                }
            }
            Variant::General => {}
        }
        cost.validate()?;
        Ok(Self {
            n_players,
            n_resources,
            adjacency,
            discount,
            cost,
            variant,
        })
    }

    /// Pooling game: one common pool shared by all players.
    pub fn pooling(n_players: usize, discount: f64, cost: CostFunction) -> Result<Self> {
        GameSpec::new(vec![vec![1]; n_players], discount, cost, Variant::Pooling)
    }

    /// Dividing game: each player owns a private pool.
    pub fn dividing(n_players: usize, discount: f64, cost: CostFunction) -> Result<Self> {
        let adjacency = (0..n_players)
            .map(|i| (0..n_players).map(|j| u8::from(i == j)).collect())
            .collect();
        GameSpec::new(adjacency, discount, cost, Variant::Dividing)
    }

    /// Sharing game: M = N pools, unit diagonal, arbitrary off-diagonal access.
    pub fn sharing(adjacency: Vec<Vec<u8>>, discount: f64, cost: CostFunction) -> Result<Self> {
        GameSpec::new(adjacency, discount, cost, Variant::Sharing)
    }

    pub fn n_players(&self) -> usize {
        self.n_players
    }

    pub fn n_resources(&self) -> usize {
        self.n_resources
    }

    pub fn adjacency(&self) -> &[Vec<u8>] {
        &self.adjacency
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn cost(&self) -> &CostFunction {
        &self.cost
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// `beta = 2(N-1)alpha/N`, the squared scale of the cosh argument.
    pub fn beta(&self) -> f64 {
        let n = self.n_players as f64;
        2.0 * (n - 1.0) * self.discount / n
    }
}

/// Joint positions and resource levels.
#[derive(Clone, Debug, PartialEq)]
pub struct JointState {
    pub positions: Vec<f64>,
    pub resources: Vec<f64>,
}

impl JointState {
    pub fn new(positions: Vec<f64>, resources: Vec<f64>) -> Self {
        Self {
            positions,
            resources,
        }
    }

    /// Checks dimensions against a spec and non-negativity of resources.
    pub fn validate(&self, spec: &GameSpec) -> Result<()> {
        if self.positions.len() != spec.n_players() {
            return Err(Error::Dimension(format!(
                "expected {} positions, got {}",
                spec.n_players(),
                self.positions.len()
            )));
        }
        if self.resources.len() != spec.n_resources() {
            return Err(Error::Dimension(format!(
                "expected {} resource levels, got {}",
                spec.n_resources(),
                self.resources.len()
            )));
        }
        if let Some(y) = self.resources.iter().find(|&&y| y < 0.0) {
            return Err(Error::Domain(format!("negative resource level {y}")));
        }
        Ok(())
    }
}

/// Outcome of the waiting/action classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegionLabel {
    Waiting,
    Action { player: usize, side: Side },
}

/// Centered positions: `x~^i = x^i - (sum_{j != i} x^j)/(N-1)`. Sums to zero
/// and is invariant under common translation.
pub fn relative_positions(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 2 {
        return Err(Error::Dimension(format!(
            "relative positions need at least 2 players, got {n}"
        )));
    }
    let total: f64 = x.iter().sum();
    let nm1 = (n - 1) as f64;
    Ok(x.iter().map(|&xi| xi - (total - xi) / nm1).collect())
}

/// Proportional split of player `i`'s consumption across her accessible
/// pools; the zero vector when everything accessible is exhausted (0/0 = 0).
pub fn allocation_weights(spec: &GameSpec, y: &[f64], player: usize) -> Vec<f64> {
    let row = &spec.adjacency()[player];
    let total: f64 = row
        .iter()
        .zip(y)
        .map(|(&a, &yj)| f64::from(a) * yj)
        .sum();
    if total <= 0.0 {
        return vec![0.0; y.len()];
    }
    row.iter()
        .zip(y)
        .map(|(&a, &yj)| f64::from(a) * yj / total)
        .collect()
}

/// `sum_j a_ij y^j`, the fuel player `i` can reach.
pub fn total_accessible(spec: &GameSpec, y: &[f64], player: usize) -> f64 {
    spec.adjacency()[player]
        .iter()
        .zip(y)
        .map(|(&a, &yj)| f64::from(a) * yj)
        .sum()
}

/// Per-player excesses `|x~^i| - f^{-1}(sum_j a_ij y^j)`, the signed distance
/// past each player's threshold (positive = inside her action region).
pub fn excesses(spec: &GameSpec, boundary: &BoundarySolution, state: &JointState) -> Result<Vec<f64>> {
    excesses_shifted(spec, boundary, state, None)
}

/// Excesses with optional per-player threshold offsets (used by deviation
/// strategies that reflect at `f^{-1}(.) + shift`). Offsets shrink/grow the
/// waiting band; the effective threshold is floored at zero.
pub fn excesses_shifted(
    spec: &GameSpec,
    boundary: &BoundarySolution,
    state: &JointState,
    shifts: Option<&[f64]>,
) -> Result<Vec<f64>> {
    state.validate(spec)?;
    let xt = relative_positions(&state.positions)?;
    let mut out = Vec::with_capacity(spec.n_players());
    for i in 0..spec.n_players() {
        let acc = total_accessible(spec, &state.resources, i);
        let mut thr = boundary.f_inverse(acc)?;
        if let Some(s) = shifts {
            thr = (thr + s[i]).max(0.0);
        }
        out.push(xt[i].abs() - thr);
    }
    Ok(out)
}

/// Excesses with exhausted players masked to `-inf`: a player without
/// accessible fuel cannot act, so replay and cascade logic must never select
/// her even if she sits outside the region.
pub(crate) fn masked_excesses(
    spec: &GameSpec,
    boundary: &BoundarySolution,
    state: &JointState,
    shifts: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let mut exc = excesses_shifted(spec, boundary, state, shifts)?;
    for (i, e) in exc.iter_mut().enumerate() {
        if total_accessible(spec, &state.resources, i) <= 1e-12 {
            *e = f64::NEG_INFINITY;
        }
    }
    Ok(exc)
}

/// Picks the acting player: the largest excess wins if it is `>= 0`, ties
/// resolved to the largest index; otherwise `Waiting`. Action regions are
/// closed, so an exact boundary point classifies as `Action`.
pub fn classify_region(
    spec: &GameSpec,
    boundary: &BoundarySolution,
    state: &JointState,
) -> Result<RegionLabel> {
    let exc = excesses(spec, boundary, state)?;
    Ok(label_from_excesses(&exc, &relative_positions(&state.positions)?, 0.0))
}

/// Shared tie-break rule: index of the maximal excess with ties going to the
/// largest index, labelled `Action` when the maximum is `>= -tol`.
pub(crate) fn label_from_excesses(exc: &[f64], xt: &[f64], tol: f64) -> RegionLabel {
    let mut best = 0usize;
    for k in 1..exc.len() {
        if exc[k] >= exc[best] {
            best = k;
        }
    }
    if exc[best] >= -tol {
        let side = if xt[best] >= 0.0 { Side::Plus } else { Side::Minus };
        RegionLabel::Action { player: best, side }
    } else {
        RegionLabel::Waiting
    }
}
