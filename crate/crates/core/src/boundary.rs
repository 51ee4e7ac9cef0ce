//! Free-boundary solver.
//!
//! For an `N`-player game with discount `alpha` and cost `h`, define
//!
//! ```text
//! p(x) = E int_0^inf e^{-alpha t} h( (N-1)/N * x + sqrt((N-1)/N) B_t ) dt
//! ```
//!
//! The waiting/action threshold is a strictly decreasing curve `f(x)` on
//! `(0, x0]` with `f(x0) = 0`, obtained by integrating a first-order ODE
//! backward from the intercept `x0`, which is itself the unique positive root
//! of `sqrt(beta) tanh(x sqrt(beta)) = p''(x)/p'(x)` with
//! `beta = 2(N-1)alpha/N`. The cosh-term coefficient `A(y)` of the waiting
//! region value follows from smooth fit along the boundary.
//!
//! `f` blows up as `x -> 0`, so the table is built up to a requested resource
//! coverage `y_max` (plus 5% head room) and queries beyond coverage are
//! errors, never extrapolations. For arguments past `x0` the boundary uses
//! the exhaustion extension `f == 0`, and `f(-x) = f(x)` by symmetry.

use crate::cost::CostFunction;
use crate::error::{Error, Result};
use crate::quadrature::{gauss_hermite, gauss_laguerre};

const P_BASE_NODES: usize = 32;
const P_MAX_NODES: usize = 1024;
const P_REL_TOL: f64 = 1e-9;

/// Evaluator for `p` and its first three derivatives via Gauss-Laguerre
/// (discounted time, `u = alpha t`) times Gauss-Hermite (Gaussian) tensor
/// quadrature. Node count is doubled at construction until the probe values
/// are stable to `1e-9` relative.
#[derive(Clone, Debug)]
pub struct PEvaluator {
    cost: CostFunction,
    n_players: usize,
    discount: f64,
    /// Flattened `(sigma_i, w_i)` pairs: standard deviation of the Gaussian
    /// at each Laguerre node, with the Laguerre weight.
    time_nodes: Vec<(f64, f64)>,
    /// `(s_j, w_j/sqrt(pi))` Hermite pairs.
    gauss_nodes: Vec<(f64, f64)>,
}

impl PEvaluator {
    pub fn new(cost: &CostFunction, n_players: usize, discount: f64) -> Result<Self> {
        if n_players < 2 {
            return Err(Error::Dimension(format!(
                "p is defined for N >= 2 players, got {n_players}"
            )));
        }
        if !(discount > 0.0) {
            return Err(Error::Model(format!(
                "discount must be positive, got {discount}"
            )));
        }
        let mut nodes = P_BASE_NODES;
        let mut current = Self::with_nodes(cost, n_players, discount, nodes);
        loop {
            let doubled = Self::with_nodes(cost, n_players, discount, nodes * 2);
            let scale = 1.0 / discount.sqrt();
            let probes = [0.0, 0.5 * scale, 1.5 * scale, 3.0 * scale];
            let mut worst: f64 = 0.0;
            // Changes are measured per derivative order against the largest
            // probe magnitude of that order, so symmetric zeros at x = 0 do
            // not register round-off as disagreement.
            for order in 0..=3u8 {
                let values: Vec<(f64, f64)> = probes
                    .iter()
                    .map(|&x| (current.eval(x, order), doubled.eval(x, order)))
                    .collect();
                let denom = values
                    .iter()
                    .map(|&(_, b)| b.abs())
                    .fold(0.0f64, f64::max)
                    .max(1e-12);
                for &(a, b) in &values {
                    worst = worst.max((a - b).abs() / denom);
                }
            }
            if worst < P_REL_TOL {
                // The coarser rule already agrees with its refinement to
                // P_REL_TOL; keep it, since eval cost is quadratic in nodes.
                return Ok(current);
            }
            nodes *= 2;
            if nodes * 2 > P_MAX_NODES {
                return Err(Error::Numeric(format!(
                    "discounted-moment quadrature did not stabilize to {P_REL_TOL:e} \
                     within {P_MAX_NODES} nodes (relative change {worst:e})"
                )));
            }
            current = doubled;
        }
    }

    fn with_nodes(cost: &CostFunction, n_players: usize, discount: f64, nodes: usize) -> Self {
        let nn = n_players as f64;
        let var_scale = (nn - 1.0) / nn; // variance multiplier of the Brownian part
        let (lu, lw) = gauss_laguerre(nodes);
        let (hs, hw) = gauss_hermite(nodes);
        let inv_sqrt_pi = std::f64::consts::PI.sqrt().recip();
        let time_nodes = lu
            .iter()
            .zip(&lw)
            .map(|(&u, &w)| ((2.0 * var_scale * u / discount).sqrt(), w))
            .collect();
        let gauss_nodes = hs
            .iter()
            .zip(&hw)
            .map(|(&s, &w)| (s, w * inv_sqrt_pi))
            .collect();
        Self {
            cost: cost.clone(),
            n_players,
            discount,
            time_nodes,
            gauss_nodes,
        }
    }

    /// `d^order/dx^order p(x)`, `order` in `0..=3`.
    pub fn eval(&self, x: f64, order: u8) -> f64 {
        let nn = self.n_players as f64;
        let c1 = (nn - 1.0) / nn;
        let center = c1 * x;
        let mut acc = 0.0;
        for &(sigma, wt) in &self.time_nodes {
            let mut inner = 0.0;
            for &(s, wg) in &self.gauss_nodes {
                inner += wg * self.cost.eval(center + sigma * s, order);
            }
            acc += wt * inner;
        }
        acc * c1.powi(order as i32) / self.discount
    }

    pub fn n_players(&self) -> usize {
        self.n_players
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }
}

/// Standalone entry point mirroring the evaluator: builds the quadrature and
/// evaluates one derivative of `p`.
pub fn p_eval(cost: &CostFunction, n_players: usize, discount: f64, x: f64, order: u8) -> Result<f64> {
    Ok(PEvaluator::new(cost, n_players, discount)?.eval(x, order))
}

/// Unique positive root of
/// `sqrt(beta) tanh(z sqrt(beta)) p'(z) - p''(z) = 0`
/// by doubling-bracket search on `[1e-8, 1e3]` and bisection to `1e-12`.
pub fn find_x0(p: &PEvaluator) -> Result<f64> {
    let beta = beta_of(p.n_players(), p.discount());
    let sb = beta.sqrt();
    let g = |z: f64| sb * (z * sb).tanh() * p.eval(z, 1) - p.eval(z, 2);

    let mut lo = 1e-8;
    if g(lo) >= 0.0 {
        return Err(Error::Model(
            "intercept bracketing failed near zero: p''(0+) should dominate".into(),
        ));
    }
    let mut hi = lo;
    loop {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::Model(
                "no intercept root in [1e-8, 1e3]; cost hypotheses likely violated".into(),
            ));
        }
        if g(hi) > 0.0 {
            break;
        }
        lo = hi;
    }
    // Bisection; width easily below 1e-12 absolute after 80 halvings of a
    // bracket no wider than 1e3.
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-14 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn beta_of(n_players: usize, discount: f64) -> f64 {
    let nn = n_players as f64;
    2.0 * (nn - 1.0) * discount / nn
}

/// Tabulated free boundary plus the evaluators derived from it.
///
/// The table stores `(x, f(x), f'(x))` at strictly increasing `x` from
/// `x_min` (where `f` reaches the coverage target) up to `x0` (where `f = 0`),
/// interpolated by cubic Hermite pieces using the exact ODE slopes.
#[derive(Clone, Debug)]
pub struct BoundarySolution {
    p: PEvaluator,
    beta: f64,
    x0: f64,
    xs: Vec<f64>,
    fs: Vec<f64>,
    fps: Vec<f64>,
    coverage: f64,
}

impl BoundarySolution {
    /// Builds the boundary for a game with `n_players`, discount rate
    /// `discount`, and running cost `cost`, covering resource levels up to
    /// `y_max` (the table extends 5% further).
    pub fn solve(cost: &CostFunction, n_players: usize, discount: f64, y_max: f64) -> Result<Self> {
        if !(y_max > 0.0) {
            return Err(Error::Model(format!("y_max must be positive, got {y_max}")));
        }
        let p = PEvaluator::new(cost, n_players, discount)?;
        check_p_shape(&p, cost)?;
        let x0 = find_x0(&p)?;
        let beta = beta_of(n_players, discount);
        let (xs, fs, fps) = solve_f_table(&p, x0, y_max)?;
        let coverage = fs[0];
        Ok(Self {
            p,
            beta,
            x0,
            xs,
            fs,
            fps,
            coverage,
        })
    }

    pub fn n_players(&self) -> usize {
        self.p.n_players()
    }

    pub fn discount(&self) -> f64 {
        self.p.discount()
    }

    /// `beta = 2(N-1)alpha/N`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Boundary intercept: `f(x0) = 0`.
    pub fn x0(&self) -> f64 {
        self.x0
    }

    /// Largest resource level the table can answer for.
    pub fn coverage(&self) -> f64 {
        self.coverage
    }

    /// Smallest tabulated `x` (where `f` hits the coverage target).
    pub fn x_min(&self) -> f64 {
        self.xs[0]
    }

    /// Table view `(x, f, f')`, ascending in `x`.
    pub fn table(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.xs
            .iter()
            .zip(&self.fs)
            .zip(&self.fps)
            .map(|((&x, &f), &fp)| (x, f, fp))
    }

    /// `d^order/dx^order p(x)`.
    pub fn p(&self, x: f64, order: u8) -> f64 {
        self.p.eval(x, order)
    }

    pub fn p_evaluator(&self) -> &PEvaluator {
        &self.p
    }

    /// `f(x)` with the even-symmetry and exhaustion extensions: `f(|x|)`,
    /// zero for `|x| >= x0`. Errors if `|x|` falls below the tabulated range.
    pub fn f_at(&self, x: f64) -> Result<f64> {
        let x = x.abs();
        if x >= self.x0 {
            return Ok(0.0);
        }
        if x < self.xs[0] {
            return Err(Error::Coverage {
                requested: self.coverage * (self.xs[0] / x),
                available: self.coverage,
            });
        }
        let k = self.cell_of_x(x);
        Ok(self.hermite(k, x))
    }

    /// Exact boundary slope from the ODE right-hand side; zero past `x0`.
    pub fn f_prime_at(&self, x: f64) -> f64 {
        let ax = x.abs();
        if ax >= self.x0 {
            return 0.0;
        }
        f_slope(&self.p, self.beta, ax)
    }

    /// Inverse threshold: the unique `x` in `[x_min, x0]` with `f(x) = y`.
    /// `f_inverse(0) = x0` exactly; strictly decreasing in `y`.
    pub fn f_inverse(&self, y: f64) -> Result<f64> {
        if y < 0.0 {
            return Err(Error::Domain(format!("negative resource level {y}")));
        }
        if y == 0.0 {
            return Ok(self.x0);
        }
        if y > self.coverage {
            return Err(Error::Coverage {
                requested: y,
                available: self.coverage,
            });
        }
        // Locate the cell: fs is strictly decreasing in x.
        let mut lo_i = 0usize;
        let mut hi_i = self.xs.len() - 1;
        while hi_i - lo_i > 1 {
            let mid = (lo_i + hi_i) / 2;
            if self.fs[mid] >= y {
                lo_i = mid;
            } else {
                hi_i = mid;
            }
        }
        let mut lo = self.xs[lo_i];
        let mut hi = self.xs[hi_i];
        // Bisection on the interpolant inside the cell.
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.hermite(lo_i, mid) >= y {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 * hi.max(1e-3) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// `A(y)`: the cosh-term coefficient fixed by smooth fit, evaluated at
    /// the boundary point `x = f_inverse(y)`. `A(0) = 0`, `A` decreasing.
    pub fn a_coefficient(&self, y: f64) -> Result<f64> {
        if y == 0.0 {
            return Ok(0.0);
        }
        Ok(self.a_at_x(self.f_inverse(y)?))
    }

    /// The smooth-fit coefficient expressed at a boundary position `x`:
    /// `A = p'(x) sinh(x sqrt(beta))/sqrt(beta) - p''(x) cosh(x sqrt(beta))/beta`.
    pub fn a_at_x(&self, x: f64) -> f64 {
        let sb = self.beta.sqrt();
        let w = x * sb;
        self.p.eval(x, 1) * w.sinh() / sb - self.p.eval(x, 2) * w.cosh() / self.beta
    }

    /// `dA/dy` at `y`: equals `p'' sinh(w)/sqrt(beta) - p' cosh(w)` at
    /// `x = f_inverse(y)` (chain rule through the boundary ODE); negative for
    /// `y > 0`.
    pub fn a_prime(&self, y: f64) -> Result<f64> {
        let x = self.f_inverse(y)?;
        let sb = self.beta.sqrt();
        let w = x * sb;
        Ok(self.p.eval(x, 2) * w.sinh() / sb - self.p.eval(x, 1) * w.cosh())
    }

    fn cell_of_x(&self, x: f64) -> usize {
        let mut lo = 0usize;
        let mut hi = self.xs.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.xs[mid] <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Cubic Hermite interpolation on cell `k` using the exact ODE slopes.
    fn hermite(&self, k: usize, x: f64) -> f64 {
        let (x0, x1) = (self.xs[k], self.xs[k + 1]);
        let (f0, f1) = (self.fs[k], self.fs[k + 1]);
        let (d0, d1) = (self.fps[k], self.fps[k + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * f0 + h10 * h * d0 + h01 * f1 + h11 * h * d1
    }
}

/// ODE right-hand side:
/// `f'(x) = (p' - p'''/beta) / (p'' tanh(x sqrt(beta))/sqrt(beta) - p')`.
/// The denominator is negative on `(0, x0)`; a sign flip is a numeric error
/// caught by the caller.
fn f_slope(p: &PEvaluator, beta: f64, x: f64) -> f64 {
    let sb = beta.sqrt();
    let num = p.eval(x, 1) - p.eval(x, 3) / beta;
    let den = p.eval(x, 2) * (x * sb).tanh() / sb - p.eval(x, 1);
    num / den
}

fn check_slope_denominator(p: &PEvaluator, beta: f64, x: f64) -> Result<()> {
    let sb = beta.sqrt();
    let den = p.eval(x, 2) * (x * sb).tanh() / sb - p.eval(x, 1);
    if den >= 0.0 {
        return Err(Error::Numeric(format!(
            "boundary ODE denominator changed sign at x={x} (value {den}); \
             expected negative on (0, x0)"
        )));
    }
    Ok(())
}

/// Integrates the boundary ODE backward from `(x0, 0)` until the boundary
/// value reaches `1.05 * y_max`, with classic 4th-order steps and
/// step-doubling error control (steps shrink automatically near `x -> 0`
/// where the slope blows up). Returns `(xs, fs, f's)` ascending in `x`.
#[allow(clippy::type_complexity)]
pub fn solve_f_table(p: &PEvaluator, x0: f64, y_max: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let beta = beta_of(p.n_players(), p.discount());
    let target = 1.05 * y_max;
    let dx_base = x0 / 1024.0;
    let df_cap = target / 2048.0;

    // Collected descending in x; reversed at the end.
    let mut xs = vec![x0];
    let mut fs = vec![0.0];
    let mut fps = vec![f_slope(p, beta, x0)];

    let mut x = x0;
    let mut f = 0.0;
    while f < target {
        let slope = f_slope(p, beta, x);
        let mut dx = dx_base.min(df_cap / slope.abs().max(1e-12)).min(x * 0.25);
        if dx < x0 * 1e-12 {
            return Err(Error::Numeric(
                "boundary ODE step underflow before reaching the coverage target".into(),
            ));
        }
        // Step-doubling: one full backward step vs two halves, Richardson
        // combined. Retry with a halved step when the estimates disagree.
        let (mut xn, mut fn_, mut accepted) = (0.0, 0.0, false);
        for _ in 0..40 {
            let coarse = rk4_back(p, beta, x, f, dx)?;
            let mid = rk4_back(p, beta, x, f, dx / 2.0)?;
            let fine = rk4_back(p, beta, x - dx / 2.0, mid, dx / 2.0)?;
            let err = (fine - coarse).abs();
            if err <= 1e-9 * (1.0 + fine.abs()) {
                xn = x - dx;
                fn_ = fine + (fine - coarse) / 15.0;
                accepted = true;
                break;
            }
            dx /= 2.0;
        }
        if !accepted {
            return Err(Error::Numeric(
                "boundary ODE step control failed to converge".into(),
            ));
        }
        check_slope_denominator(p, beta, xn)?;
        x = xn;
        f = fn_;
        xs.push(x);
        fs.push(f);
        fps.push(f_slope(p, beta, x));
    }

    xs.reverse();
    fs.reverse();
    fps.reverse();
    Ok((xs, fs, fps))
}

/// One backward RK4 step of `df/dx = slope(x)` from `(x, f)` to `x - dx`.
/// The right-hand side depends on `x` only, so the midpoint stages coincide.
fn rk4_back(p: &PEvaluator, beta: f64, x: f64, f: f64, dx: f64) -> Result<f64> {
    let k1 = f_slope(p, beta, x);
    let k2 = f_slope(p, beta, x - dx / 2.0);
    let k4 = f_slope(p, beta, x - dx);
    Ok(f - dx * (k1 + 4.0 * k2 + k4) / 6.0)
}

/// Construction-time audit of `p`: curvature bounds
/// `((N-1)/N)^2 k/alpha <= p'' <= ((N-1)/N)^2 K/alpha` and evenness
/// (`p'(0) ~ 0`).
fn check_p_shape(p: &PEvaluator, cost: &CostFunction) -> Result<()> {
    let nn = p.n_players() as f64;
    let c1 = (nn - 1.0) / nn;
    let (k, big_k) = cost.curvature_bounds();
    let lo = c1 * c1 * k / p.discount();
    let hi = c1 * c1 * big_k / p.discount();
    let scale = 1.0 / p.discount().sqrt();
    for i in 0..=20 {
        let x = scale * (i as f64) / 4.0;
        let p2 = p.eval(x, 2);
        if p2 < lo * (1.0 - 1e-7) || p2 > hi * (1.0 + 1e-7) {
            return Err(Error::Hypothesis(format!(
                "p''({x}) = {p2} outside curvature envelope [{lo}, {hi}]"
            )));
        }
    }
    let p1_0 = p.eval(0.0, 1);
    if p1_0.abs() > 1e-8 {
        return Err(Error::Hypothesis(format!(
            "p'(0) = {p1_0} but symmetry requires ~0; cost is not even"
        )));
    }
    Ok(())
}
