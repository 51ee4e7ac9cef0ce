//! Running cost functions.
//!
//! The game charges each player the discounted integral of `h` applied to a
//! centered version of her position. All analytic machinery (the discounted
//! moment function, the free boundary ODE, the smooth-fit coefficient) needs
//! `h` together with its first three derivatives, so a cost is supplied as a
//! bundle of callables plus curvature bounds `0 < k <= h'' <= K`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A symmetric, strictly convex running cost with analytic derivatives.
#[derive(Clone)]
pub struct CostFunction {
    name: String,
    h: ScalarFn,
    d1: ScalarFn,
    d2: ScalarFn,
    d3: ScalarFn,
    curvature: (f64, f64),
}

impl fmt::Debug for CostFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CostFunction")
            .field("name", &self.name)
            .field("curvature", &self.curvature)
            .finish()
    }
}

impl CostFunction {
    /// Builds a cost from explicit callables. No validation is performed here;
    /// call [`CostFunction::validate`] to audit the symmetry and curvature
    /// hypotheses on a sample grid.
    pub fn custom(
        name: impl Into<String>,
        h: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d3: impl Fn(f64) -> f64 + Send + Sync + 'static,
        curvature: (f64, f64),
    ) -> Self {
        Self {
            name: name.into(),
            h: Arc::new(h),
            d1: Arc::new(d1),
            d2: Arc::new(d2),
            d3: Arc::new(d3),
            curvature,
        }
    }

    /// The quadratic cost `h(x) = x^2`, for which every boundary quantity has
    /// a closed form.
    pub fn quadratic() -> Self {
        Self::custom(
            "quadratic",
            |x| x * x,
            |x| 2.0 * x,
            |_| 2.0,
            |_| 0.0,
            (2.0, 2.0),
        )
    }

    /// `h(x) = x^2 + w*log cosh x`, a smooth strictly convex perturbation of
    /// the quadratic with `h'' = 2 + w/cosh^2 x` decreasing in `|x|`.
    pub fn quadratic_log_cosh(w: f64) -> Self {
        assert!(w >= 0.0, "log-cosh weight must be non-negative");
        Self::custom(
            format!("quad-logcosh {w}"),
            move |x| x * x + w * log_cosh(x),
            move |x| 2.0 * x + w * x.tanh(),
            move |x| {
                let s = x.cosh().recip();
                2.0 + w * s * s
            },
            move |x| {
                let s = x.cosh().recip();
                -2.0 * w * s * s * x.tanh()
            },
            (2.0, 2.0 + w),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Evaluates `h` or one of its first three derivatives.
    pub fn eval(&self, x: f64, order: u8) -> f64 {
        match order {
            0 => (self.h)(x),
            1 => (self.d1)(x),
            2 => (self.d2)(x),
            3 => (self.d3)(x),
            _ => panic!("derivative order {order} not supported"),
        }
    }

    /// Declared curvature bounds `(k, K)`.
    pub fn curvature_bounds(&self) -> (f64, f64) {
        self.curvature
    }

    /// Audits the cost hypotheses by sampling on `[-10, 10]` (positions are
    /// measured on the Brownian scale, so 10 standard units is far into the
    /// tail): symmetry, `h(0) >= 0`, `k <= h'' <= K`, and `h''' <= 0` for
    /// `x >= 0`.
    pub fn validate(&self) -> Result<()> {
        let (k, big_k) = self.curvature;
        if !(k > 0.0 && k <= big_k) {
            return Err(Error::Hypothesis(format!(
                "curvature bounds must satisfy 0 < k <= K, got ({k}, {big_k})"
            )));
        }
        if self.eval(0.0, 0) < 0.0 {
            return Err(Error::Hypothesis("h(0) must be non-negative".into()));
        }
        let n = 10_000;
        let slack = 1e-9;
        for i in 0..=n {
            let x = -10.0 + 20.0 * (i as f64) / (n as f64);
            let sym = (self.eval(x, 0) - self.eval(-x, 0)).abs();
            if sym > slack * (1.0 + self.eval(x, 0).abs()) {
                return Err(Error::Hypothesis(format!(
                    "h is not symmetric at x={x}: |h(x)-h(-x)|={sym}"
                )));
            }
            let h2 = self.eval(x, 2);
            if h2 < k - slack || h2 > big_k + slack {
                return Err(Error::Hypothesis(format!(
                    "h''({x})={h2} outside declared bounds [{k}, {big_k}]"
                )));
            }
            if x >= 0.0 && self.eval(x, 3) > slack {
                return Err(Error::Hypothesis(format!(
                    "h''' must be <= 0 for x >= 0, got {} at x={x}",
                    self.eval(x, 3)
                )));
            }
        }
        Ok(())
    }
}

fn log_cosh(x: f64) -> f64 {
    // Numerically stable: log cosh x = |x| + log(1 + e^{-2|x|}) - log 2.
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}
