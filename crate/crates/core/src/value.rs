//! Equilibrium value functions.
//!
//! Inside the common waiting region the value of player `i` is
//!
//! ```text
//! v^i(x, y) = p(x~^i) + A(sum_j a_ij y^j) cosh(x~^i sqrt(beta))
//! ```
//!
//! Outside, the acting player jumps to the moving boundary: the landing point
//! `z` solves `z - f(z) = x~ - acc` (plus side; mirrored on the minus side),
//! consuming `acc - f(z)` units of fuel spread over the accessible pools by
//! the proportional allocation rule. Values in action regions are obtained by
//! replaying those jumps until the state enters the closed waiting region and
//! applying the closed form there; a jump by another player feeds back into
//! `v^i` only through the displaced center and any shared fuel it consumed.

use crate::boundary::BoundarySolution;
use crate::error::{Error, Result};
use crate::model::{
    allocation_weights, excesses, label_from_excesses, masked_excesses, relative_positions,
    total_accessible,
    GameSpec, JointState, RegionLabel, Side, Variant,
};

/// Excess below this threshold counts as "on the boundary" when replaying
/// jumps; the value is continuous there so either branch agrees.
const ACT_EPS: f64 = 1e-11;

/// Maximum replayed jumps per value evaluation; cascades converge, so running
/// out is an internal numeric failure.
const MAX_JUMPS: usize = 1000;

/// One value-function query.
#[derive(Clone, Debug)]
pub struct ValueQuery<'a> {
    pub spec: &'a GameSpec,
    pub boundary: &'a BoundarySolution,
    pub state: JointState,
    pub player: usize,
}

/// Residual report of the quasi-variational system at one state.
#[derive(Clone, Debug)]
pub struct QviReport {
    /// `|-alpha v + h + 1/2 sum_j v_{x^j x^j}|`.
    pub pde_residual: f64,
    /// `-Gamma_i v + v_{x^i}`.
    pub grad_plus: f64,
    /// `-Gamma_i v - v_{x^i}`.
    pub grad_minus: f64,
    pub region: RegionLabel,
    /// Per-player `(-Gamma_j v^i + v^i_{x^j}, -Gamma_j v^i - v^i_{x^j})`.
    pub cross_terms: Vec<(f64, f64)>,
}

impl QviReport {
    /// Names of constraints active at tolerance `tol` (default audit uses
    /// 1e-6).
    pub fn active_constraints(&self, tol: f64) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.pde_residual < tol {
            out.push("pde");
        }
        if self.grad_plus.abs() < tol {
            out.push("grad_plus");
        }
        if self.grad_minus.abs() < tol {
            out.push("grad_minus");
        }
        out
    }
}

/// Unique `z > 0` with `z - f(z) = target`, using the exhaustion extension
/// `f == 0` for `z >= x0`. `z - f(z)` is strictly increasing, so bisection on
/// `[x_min, x0]` suffices when the root is below the intercept.
pub fn jump_root_plus(boundary: &BoundarySolution, target: f64) -> Result<f64> {
    let x0 = boundary.x0();
    if target >= x0 {
        return Ok(target);
    }
    let mut lo = boundary.x_min();
    let mut hi = x0;
    if lo - boundary.f_at(lo)? > target {
        // The landing point would need more fuel than the table covers.
        return Err(Error::Coverage {
            requested: boundary.coverage() + (lo - boundary.f_at(lo)? - target),
            available: boundary.coverage(),
        });
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid - boundary.f_at(mid)? > target {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-15 * hi.max(1e-3) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Mirror root: unique `z < 0` with `z + f(z) = target`, via
/// `z = -jump_root_plus(-target)` and the even symmetry of `f`.
pub fn jump_root_minus(boundary: &BoundarySolution, target: f64) -> Result<f64> {
    Ok(-jump_root_plus(boundary, -target)?)
}

/// Record of one boundary jump.
#[derive(Clone, Debug)]
pub struct JumpEvent {
    pub time: f64,
    pub player: usize,
    pub side: Side,
    pub magnitude: f64,
    /// Fuel drawn from each resource pool.
    pub consumed: Vec<f64>,
}

/// Applies the jump of `player` on `side` in place, landing on the (possibly
/// `shift`-displaced) boundary or exhausting the accessible fuel. Returns the
/// recorded event with `time = 0` (callers stamp it).
pub(crate) fn apply_jump_shifted(
    spec: &GameSpec,
    boundary: &BoundarySolution,
    state: &mut JointState,
    player: usize,
    side: Side,
    shift: f64,
) -> Result<JumpEvent> {
    let xt = relative_positions(&state.positions)?[player];
    let acc = total_accessible(spec, &state.resources, player);
    let sgn = side.sign();
    // Work on the positive half line: u solves u - f(u) = |x~| - shift - acc,
    // and the landing point is sgn * (u + shift).
    let u = jump_root_plus(boundary, sgn * xt - shift - acc)?;
    let magnitude = (sgn * xt - u - shift).clamp(0.0, acc);
    let weights = allocation_weights(spec, &state.resources, player);
    let mut consumed = vec![0.0; state.resources.len()];
    for (j, w) in weights.iter().enumerate() {
        let d = magnitude * w;
        consumed[j] = d;
        state.resources[j] = (state.resources[j] - d).max(0.0);
    }
    state.positions[player] -= sgn * magnitude;
    Ok(JumpEvent {
        time: 0.0,
        player,
        side,
        magnitude,
        consumed,
    })
}

/// Waiting-region closed form for `player` (valid when the state is in the
/// closed waiting region of everyone).
pub(crate) fn waiting_value(
    spec: &GameSpec,
    boundary: &BoundarySolution,
    state: &JointState,
    player: usize,
) -> Result<f64> {
    let xt = relative_positions(&state.positions)?[player];
    let acc = total_accessible(spec, &state.resources, player);
    let a = boundary.a_coefficient(acc)?;
    Ok(boundary.p(xt, 0) + a * (xt * boundary.beta().sqrt()).cosh())
}

/// Nash-equilibrium value of `query.player`: replays the deterministic jump
/// cascade from the queried state into the closed waiting region, then
/// evaluates the closed form there.
pub fn value_game(query: &ValueQuery<'_>) -> Result<f64> {
    let spec = query.spec;
    let boundary = query.boundary;
    query.state.validate(spec)?;
    let mut state = query.state.clone();
    for _ in 0..MAX_JUMPS {
        let exc = masked_excesses(spec, boundary, &state, None)?;
        let xt = relative_positions(&state.positions)?;
        match label_from_excesses(&exc, &xt, -ACT_EPS) {
            RegionLabel::Waiting => {
                return waiting_value(spec, boundary, &state, query.player);
            }
            RegionLabel::Action { player, side } => {
                apply_jump_shifted(spec, boundary, &mut state, player, side, 0.0)?;
            }
        }
    }
    let exc = masked_excesses(spec, boundary, &state, None)?;
    let worst = exc.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if worst > 1e-8 {
        return Err(Error::Numeric(format!(
            "jump replay did not reach the waiting region ({MAX_JUMPS} jumps, residual {worst})"
        )));
    }
    waiting_value(spec, boundary, &state, query.player)
}

/// Central second difference with one Richardson extrapolation step.
fn second_derivative(v: &dyn Fn(f64) -> Result<f64>, h: f64) -> Result<f64> {
    let d = |h: f64| -> Result<f64> { Ok((v(h)? - 2.0 * v(0.0)? + v(-h)?) / (h * h)) };
    let coarse = d(h)?;
    let fine = d(h / 2.0)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

fn first_derivative(v: &dyn Fn(f64) -> Result<f64>, h: f64) -> Result<f64> {
    Ok((v(h)? - v(-h)?) / (2.0 * h))
}

/// `Gamma_j v = sum_k (a_jk y^k / acc_j) v_{y^k}` by central differences on
/// the resource coordinates (steps shrink near `y^k = 0`).
fn gamma_operator(
    query: &ValueQuery<'_>,
    actor: usize,
    fd: f64,
) -> Result<f64> {
    let weights = allocation_weights(query.spec, &query.state.resources, actor);
    let mut total = 0.0;
    for (k, w) in weights.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let yk = query.state.resources[k];
        let step = fd.min(yk / 2.0);
        if step < 1e-12 {
            continue;
        }
        let dv = first_derivative(
            &|e: f64| {
                let mut s = query.state.clone();
                s.resources[k] = yk + e;
                value_game(&ValueQuery {
                    spec: query.spec,
                    boundary: query.boundary,
                    state: s,
                    player: query.player,
                })
            },
            step,
        )?;
        total += w * dv;
    }
    Ok(total)
}

fn dx_value(query: &ValueQuery<'_>, coord: usize, fd: f64) -> Result<f64> {
    first_derivative(
        &|e: f64| {
            let mut s = query.state.clone();
            s.positions[coord] += e;
            value_game(&ValueQuery {
                spec: query.spec,
                boundary: query.boundary,
                state: s,
                player: query.player,
            })
        },
        fd,
    )
}

/// Default finite-difference step for the audits.
pub fn default_fd_step(xt: f64) -> f64 {
    1e-4 * xt.abs().max(1.0)
}

/// Evaluates the quasi-variational residuals of `v^{player}` at the queried
/// state, which must lie in the closed waiting region of every other player.
pub fn qvi_residuals(query: &ValueQuery<'_>, fd_step: f64) -> Result<QviReport> {
    let spec = query.spec;
    let boundary = query.boundary;
    query.state.validate(spec)?;
    let exc = excesses(spec, boundary, &query.state)?;
    for (j, &e) in exc.iter().enumerate() {
        if j != query.player && e > 1e-9 {
            return Err(Error::Domain(format!(
                "state lies in player {j}'s action region (excess {e}); \
                 residuals are defined on the closure of the others' waiting set"
            )));
        }
    }
    let xt = relative_positions(&query.state.positions)?;
    let region = label_from_excesses(&exc, &xt, 0.0);

    let v0 = value_game(query)?;
    let mut sum_xx = 0.0;
    for j in 0..spec.n_players() {
        sum_xx += second_derivative(
            &|e: f64| {
                let mut s = query.state.clone();
                s.positions[j] += e;
                value_game(&ValueQuery {
                    spec,
                    boundary,
                    state: s,
                    player: query.player,
                })
            },
            fd_step,
        )?;
    }
    let nn = spec.n_players() as f64;
    let c1 = (nn - 1.0) / nn;
    let alpha = spec.discount();
    let pde_residual =
        (-alpha * v0 + spec.cost().eval(c1 * xt[query.player], 0) + 0.5 * sum_xx).abs();

    let mut cross_terms = Vec::with_capacity(spec.n_players());
    let mut grad_plus = 0.0;
    let mut grad_minus = 0.0;
    for j in 0..spec.n_players() {
        let gamma = gamma_operator(query, j, fd_step)?;
        let vx = dx_value(query, j, fd_step)?;
        let pair = (-gamma + vx, -gamma - vx);
        if j == query.player {
            grad_plus = pair.0;
            grad_minus = pair.1;
        }
        cross_terms.push(pair);
    }

    Ok(QviReport {
        pde_residual,
        grad_plus,
        grad_minus,
        region,
        cross_terms,
    })
}

/// Result of the pooling/sharing/dividing comparison at one state.
#[derive(Clone, Copy, Debug)]
pub struct ComparisonRow {
    pub v_pooling: f64,
    pub v_sharing: f64,
    pub v_dividing: f64,
    /// `v_Cp <= v_Cs <= v_Cd` within `tol`.
    pub ordered: bool,
}

/// Compares the sharing game's value against the pooling game with
/// `y_pool = sum_j y^j` and the dividing game with the same per-player
/// levels, for one player. The state must lie in the waiting region of all
/// three games (the pooling one is the binding requirement).
pub fn compare_games(
    sharing: &GameSpec,
    boundary: &BoundarySolution,
    state: &JointState,
    player: usize,
    tol: f64,
) -> Result<ComparisonRow> {
    if sharing.variant() != Variant::Sharing && sharing.variant() != Variant::Dividing {
        return Err(Error::Model(
            "comparison needs an M = N spec with unit diagonal".into(),
        ));
    }
    state.validate(sharing)?;
    let xt = relative_positions(&state.positions)?;
    let y_pool: f64 = state.resources.iter().sum();
    let sb = boundary.beta().sqrt();

    // Hypothesis: waiting everywhere. The pooling threshold f^{-1}(y_pool) is
    // the smallest, so checking all players against it covers all variants.
    let thr_pool = boundary.f_inverse(y_pool)?;
    for (i, &x) in xt.iter().enumerate() {
        if x.abs() > thr_pool {
            return Err(Error::Hypothesis(format!(
                "player {i} is outside the pooling waiting region (|x~|={} > {thr_pool})",
                x.abs()
            )));
        }
    }

    let acc_share = total_accessible(sharing, &state.resources, player);
    let acc_div = state.resources[player];
    let base = boundary.p(xt[player], 0);
    let ch = (xt[player] * sb).cosh();
    let v_pooling = base + boundary.a_coefficient(y_pool)? * ch;
    let v_sharing = base + boundary.a_coefficient(acc_share)? * ch;
    let v_dividing = base + boundary.a_coefficient(acc_div)? * ch;
    let ordered = v_pooling <= v_sharing + tol && v_sharing <= v_dividing + tol;
    Ok(ComparisonRow {
        v_pooling,
        v_sharing,
        v_dividing,
        ordered,
    })
}
