//! Monte Carlo verification of equilibrium values.
//!
//! Along simulated paths the only cost is the discounted running cost of the
//! centered position, `int_0^T e^{-alpha t} h(c1 x~^i_t) dt`, accumulated by
//! the trapezoid rule. Control itself is costless; wasteful control hurts
//! only by shrinking the fuel that keeps the position near the center later.
//! Estimates are compared to the analytic value by z-score, and equilibrium
//! behavior is stress-tested with paired deviations under common random
//! numbers so discretization bias cancels in the difference.

use rayon::prelude::*;

use crate::boundary::BoundarySolution;
use crate::dynamics::{GeometryModel, NoisePath, SchemeParams, Simulator};
use crate::error::Result;
use crate::model::{GameSpec, JointState};

/// Mergeable running mean and variance (Welford update, pairwise merge).
#[derive(Clone, Copy, Debug, Default)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&self, other: &Self) -> Self {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let count = self.count + other.count;
        let d = other.mean - self.mean;
        let mean = self.mean + d * other.count as f64 / count as f64;
        let m2 = self.m2
            + other.m2
            + d * d * self.count as f64 * other.count as f64 / count as f64;
        Self { count, mean, m2 }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        self.m2 / (self.count as f64 - 1.0)
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

/// Folds a slice into summary statistics.
pub fn summary_stats(values: &[f64]) -> RunningStats {
    let mut s = RunningStats::new();
    for &v in values {
        s.push(v);
    }
    s
}

/// Result of a Monte Carlo value estimate.
#[derive(Clone, Copy, Debug)]
pub struct EstimateReport {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    /// Deterministic bound on the truncation error from the finite horizon:
    /// `sup |h| visited * e^{-alpha T} / alpha`.
    pub horizon_bias_bound: f64,
    /// Analytic value the estimate is checked against, when available.
    pub analytic: Option<f64>,
    pub z_score: Option<f64>,
}

/// Discounted running cost of `player` along one simulated path, plus the
/// largest `|h|` visited (for the horizon-bias bound).
fn path_cost(
    geom: &GeometryModel<'_>,
    start: &JointState,
    params: &SchemeParams,
    noise: &NoisePath,
    player: usize,
    round_trip: Option<f64>,
) -> Result<(f64, f64)> {
    let (mut sim, _) = Simulator::new(geom.clone(), start, *params)?;
    if let Some(size) = round_trip {
        sim.apply_round_trip(player, size)?;
    }
    let spec = geom.spec();
    let n = spec.n_players() as f64;
    let c1 = (n - 1.0) / n;
    let alpha = spec.discount();
    let cost = spec.cost();
    let dt = params.dt;
    let steps = noise.steps().min(params.steps());

    let mut h_prev = cost.eval(c1 * sim.centered(player), 0);
    let mut sup_h = h_prev.abs();
    let mut total = 0.0;
    let decay = (-alpha * dt).exp();
    let mut disc_prev = 1.0;
    for s in 0..steps {
        sim.step_quiet(noise.step_slice(s))?;
        let h_now = cost.eval(c1 * sim.centered(player), 0);
        sup_h = sup_h.max(h_now.abs());
        let disc_now = disc_prev * decay;
        total += 0.5 * dt * (disc_prev * h_prev + disc_now * h_now);
        h_prev = h_now;
        disc_prev = disc_now;
    }
    Ok((total, sup_h))
}

/// Estimates `player`'s discounted cost from `start` over `n_paths`
/// independent paths (parallel simulation, deterministic sequential
/// aggregation). Pass the analytic value to get a z-score.
pub fn estimate_value(
    geom: &GeometryModel<'_>,
    start: &JointState,
    player: usize,
    n_paths: usize,
    params: &SchemeParams,
    analytic: Option<f64>,
) -> Result<EstimateReport> {
    params.validate()?;
    start.validate(geom.spec())?;
    let steps = params.steps();
    let n = geom.spec().n_players();
    let results: Vec<Result<(f64, f64)>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let noise = NoisePath::generate(params.seed, p as u64, n, steps, params.dt);
            path_cost(geom, start, params, &noise, player, None)
        })
        .collect();
    let mut stats = RunningStats::new();
    let mut sup_h: f64 = 0.0;
    for r in results {
        let (c, s) = r?;
        stats.push(c);
        sup_h = sup_h.max(s);
    }
    let alpha = geom.spec().discount();
    let horizon = steps as f64 * params.dt;
    let bias = sup_h * (-alpha * horizon).exp() / alpha;
    let z = analytic.map(|a| (stats.mean() - a) / stats.std_error().max(f64::MIN_POSITIVE));
    Ok(EstimateReport {
        mean: stats.mean(),
        std_error: stats.std_error(),
        n_paths,
        horizon_bias_bound: bias,
        analytic,
        z_score: z,
    })
}

/// A unilateral strategy perturbation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Perturbation {
    /// The player reflects at `f^{-1}(acc) + eps` instead of the equilibrium
    /// threshold (floored at zero).
    ThresholdShift { player: usize, eps: f64 },
    /// An immediate wasteful round trip burning `size` fuel for zero net
    /// displacement.
    RoundTrip { player: usize, size: f64 },
}

impl Perturbation {
    pub fn player(&self) -> usize {
        match *self {
            Perturbation::ThresholdShift { player, .. } => player,
            Perturbation::RoundTrip { player, .. } => player,
        }
    }
}

/// One paired comparison of a deviation against equilibrium play.
#[derive(Clone, Copy, Debug)]
pub struct DeviationRow {
    pub perturbation: Perturbation,
    /// Mean cost of the deviating player under equilibrium play.
    pub baseline_mean: f64,
    /// Mean cost under the deviation (same noise).
    pub deviated_mean: f64,
    /// Mean of the per-path paired differences `deviated - baseline`.
    pub diff_mean: f64,
    pub diff_std_error: f64,
    /// Equilibrium property: the deviation is not significantly cheaper,
    /// `diff_mean >= -3 * diff_std_error`.
    pub satisfied: bool,
}

/// Runs each perturbation against equilibrium play with common random
/// numbers and reports paired statistics. An overdrawing round trip is an
/// inadmissibility error.
pub fn deviation_test(
    spec: &GameSpec,
    boundary: &BoundarySolution,
    start: &JointState,
    perturbations: &[Perturbation],
    n_paths: usize,
    params: &SchemeParams,
) -> Result<Vec<DeviationRow>> {
    params.validate()?;
    start.validate(spec)?;
    let steps = params.steps();
    let eq_geom = GeometryModel::new(spec, boundary);
    let mut rows = Vec::with_capacity(perturbations.len());
    for &pert in perturbations {
        let player = pert.player();
        let (dev_geom, round_trip) = match pert {
            Perturbation::ThresholdShift { eps, .. } => {
                (GeometryModel::with_shift(spec, boundary, player, eps), None)
            }
            Perturbation::RoundTrip { size, .. } => (eq_geom.clone(), Some(size)),
        };
        let pairs: Vec<Result<(f64, f64)>> = (0..n_paths)
            .into_par_iter()
            .map(|p| {
                let noise = NoisePath::generate(
                    params.seed,
                    p as u64,
                    spec.n_players(),
                    steps,
                    params.dt,
                );
                let (base, _) = path_cost(&eq_geom, start, params, &noise, player, None)?;
                let (dev, _) = path_cost(&dev_geom, start, params, &noise, player, round_trip)?;
                Ok((base, dev))
            })
            .collect();
        let mut base_stats = RunningStats::new();
        let mut dev_stats = RunningStats::new();
        let mut diff_stats = RunningStats::new();
        for pr in pairs {
            let (b, d) = pr?;
            base_stats.push(b);
            dev_stats.push(d);
            diff_stats.push(d - b);
        }
        let se = diff_stats.std_error();
        rows.push(DeviationRow {
            perturbation: pert,
            baseline_mean: base_stats.mean(),
            deviated_mean: dev_stats.mean(),
            diff_mean: diff_stats.mean(),
            diff_std_error: se,
            satisfied: diff_stats.mean() >= -3.0 * se,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostFunction;
    use crate::dynamics::build_geometry;
    use crate::error::Error;
    use crate::value::{value_game, ValueQuery};

    fn setup(alpha: f64) -> (GameSpec, BoundarySolution) {
        let cost = CostFunction::quadratic();
        let spec = GameSpec::pooling(2, alpha, cost.clone()).unwrap();
        let boundary = BoundarySolution::solve(&cost, 2, alpha, 3.0).unwrap();
        (spec, boundary)
    }

    #[test]
    fn running_stats_known_values() {
        let s = summary_stats(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.count(), 4);
        assert!((s.mean() - 2.5).abs() < 1e-15);
        assert!((s.variance() - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn merge_agrees_with_sequential() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let values: Vec<f64> = (0..1000).map(|_| rng.gen_range(-2.0..7.0)).collect();
        let full = summary_stats(&values);
        let a = summary_stats(&values[..137]);
        let b = summary_stats(&values[137..612]);
        let c = summary_stats(&values[612..]);
        let merged = a.merge(&b).merge(&c);
        assert_eq!(merged.count(), full.count());
        assert!((merged.mean() - full.mean()).abs() < 1e-12);
        assert!((merged.variance() - full.variance()).abs() < 1e-12);
        // Identity merges.
        let id = RunningStats::new().merge(&full);
        assert!((id.variance() - full.variance()).abs() < 1e-15);
    }

    #[test]
    fn pure_brownian_estimate_matches_analytic() {
        // With no fuel the positions diffuse freely and the value is p(x~).
        let (spec, b) = setup(1.0);
        let geom = build_geometry(&spec, &b);
        let start = JointState::new(vec![0.0, 0.0], vec![0.0]);
        let analytic = value_game(&ValueQuery {
            spec: &spec,
            boundary: &b,
            state: start.clone(),
            player: 0,
        })
        .unwrap();
        assert!((analytic - 0.5).abs() < 1e-12);
        let params = SchemeParams {
            seed: 9,
            ..SchemeParams::for_discount(1.0)
        };
        let rep = estimate_value(&geom, &start, 0, 400, &params, Some(analytic)).unwrap();
        assert!(
            rep.z_score.unwrap().abs() < 3.0,
            "mean {} se {} vs {analytic}",
            rep.mean,
            rep.std_error
        );
        assert!(rep.horizon_bias_bound < 50.0 * rep.std_error);
    }

    #[test]
    fn estimate_is_seed_deterministic() {
        let (spec, b) = setup(2.0);
        let geom = build_geometry(&spec, &b);
        let start = JointState::new(vec![0.3, -0.3], vec![0.4]);
        let params = SchemeParams {
            seed: 17,
            horizon: 1.0,
            ..SchemeParams::for_discount(2.0)
        };
        let a = estimate_value(&geom, &start, 0, 64, &params, None).unwrap();
        let b2 = estimate_value(&geom, &start, 0, 64, &params, None).unwrap();
        assert_eq!(a.mean, b2.mean);
        assert_eq!(a.std_error, b2.std_error);
    }

    #[test]
    fn zero_shift_deviation_is_exactly_neutral() {
        let (spec, b) = setup(2.0);
        let start = JointState::new(vec![0.3, -0.3], vec![0.4]);
        let params = SchemeParams {
            seed: 3,
            horizon: 1.0,
            ..SchemeParams::for_discount(2.0)
        };
        let rows = deviation_test(
            &spec,
            &b,
            &start,
            &[Perturbation::ThresholdShift { player: 0, eps: 0.0 }],
            32,
            &params,
        )
        .unwrap();
        assert_eq!(rows[0].diff_mean, 0.0);
        assert_eq!(rows[0].diff_std_error, 0.0);
        assert!(rows[0].satisfied);
    }

    #[test]
    fn round_trip_is_costlier() {
        let (spec, b) = setup(2.0);
        let start = JointState::new(vec![0.4, -0.4], vec![0.5]);
        let params = SchemeParams {
            seed: 21,
            ..SchemeParams::for_discount(2.0)
        };
        let rows = deviation_test(
            &spec,
            &b,
            &start,
            &[Perturbation::RoundTrip { player: 0, size: 0.3 }],
            200,
            &params,
        )
        .unwrap();
        assert!(
            rows[0].diff_mean > 0.0,
            "wasteful round trip should cost: diff {} +- {}",
            rows[0].diff_mean,
            rows[0].diff_std_error
        );
        assert!(rows[0].satisfied);
    }

    #[test]
    fn overdrawn_round_trip_is_inadmissible() {
        let (spec, b) = setup(2.0);
        let start = JointState::new(vec![0.1, -0.1], vec![0.2]);
        let params = SchemeParams {
            horizon: 0.1,
            ..SchemeParams::for_discount(2.0)
        };
        let err = deviation_test(
            &spec,
            &b,
            &start,
            &[Perturbation::RoundTrip { player: 0, size: 0.5 }],
            4,
            &params,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Inadmissible(_)));
    }
}
