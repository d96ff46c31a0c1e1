//! Baranchik-type shrinkage estimators `(1 − b s(‖x‖²)/‖x‖²) x`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::losses::{central_first, central_second, first_increase, CertGrid, Certificate, Checker, ViolationReport, SIGN_TOL};
use crate::params::{keyed, no_params, parse_err, split_head};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The multiplier `s(w)` of a Baranchik estimator, as a function of `w = ‖x‖²`.
#[derive(Clone)]
pub enum SMultiplier {
    /// `s(w) = w / (w + c)`
    Ratio { c: f64 },
    /// `s ≡ 1` (James–Stein)
    ConstantOne,
    Custom { name: String, f: ScalarFn },
}

impl fmt::Debug for SMultiplier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SMultiplier::Ratio { c } => write!(f, "Ratio {{ c: {c} }}"),
            SMultiplier::ConstantOne => write!(f, "ConstantOne"),
            SMultiplier::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl PartialEq for SMultiplier {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (SMultiplier::Ratio { c: a }, SMultiplier::Ratio { c: b }) => a == b,
            (SMultiplier::ConstantOne, SMultiplier::ConstantOne) => true,
            (SMultiplier::Custom { f: a, .. }, SMultiplier::Custom { f: b, .. }) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl SMultiplier {
    pub fn ratio(c: f64) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "c",
                value: c,
                reason: "must be non-negative",
            });
        }
        Ok(SMultiplier::Ratio { c })
    }

    pub fn custom(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        SMultiplier::Custom {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn value(&self, w: f64) -> f64 {
        match self {
            SMultiplier::Ratio { c } => {
                if *c == 0.0 {
                    1.0
                } else {
                    w / (w + c)
                }
            }
            SMultiplier::ConstantOne => 1.0,
            SMultiplier::Custom { f, .. } => f(w),
        }
    }

    pub fn deriv(&self, w: f64) -> f64 {
        match self {
            SMultiplier::Ratio { c } => c / (w + c).powi(2),
            SMultiplier::ConstantOne => 0.0,
            SMultiplier::Custom { f, .. } => central_first(f.as_ref(), w),
        }
    }

    pub fn deriv2(&self, w: f64) -> f64 {
        match self {
            SMultiplier::Ratio { c } => -2.0 * c / (w + c).powi(3),
            SMultiplier::ConstantOne => 0.0,
            SMultiplier::Custom { f, .. } => central_second(f.as_ref(), w),
        }
    }

    /// `s(w)/w`, or its limit at `w = 0` when finite.
    pub fn over_w(&self, w: f64) -> f64 {
        match self {
            SMultiplier::Ratio { c } if *c > 0.0 => 1.0 / (w + c),
            _ => self.value(w) / w,
        }
    }

    fn singular_at_zero(&self) -> bool {
        !matches!(self, SMultiplier::Ratio { c } if *c > 0.0)
    }
}

impl fmt::Display for SMultiplier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SMultiplier::Ratio { c } => write!(f, "ratio(c={c})"),
            SMultiplier::ConstantOne => write!(f, "constant_one"),
            SMultiplier::Custom { name, .. } => write!(f, "{name}"),
        }
    }
}

/// Checks `0 ≤ s ≤ 1`, `s` non-decreasing, `s` concave and `s ≢ 0` on the grid.
pub fn certify_multiplier(sm: &SMultiplier, grid: &CertGrid) -> std::result::Result<Certificate, ViolationReport> {
    let pts = grid.points();
    let vals: Vec<f64> = pts.iter().map(|&w| sm.value(w)).collect();
    let mut check = Checker::new();
    check.clause(
        "bounds",
        vals.iter()
            .position(|&v| !(-SIGN_TOL..=1.0 + SIGN_TOL).contains(&v))
            .map(|i| (pts[i], format!("s = {:e} outside [0, 1]", vals[i]))),
    );
    let negated: Vec<f64> = vals.iter().map(|v| -v).collect();
    check.clause(
        "monotone",
        first_increase(&negated).map(|i| (pts[i], format!("s decreases from {:e} to {:e}", vals[i - 1], vals[i]))),
    );
    let slopes: Vec<f64> = pts
        .windows(2)
        .zip(vals.windows(2))
        .map(|(w, v)| (v[1] - v[0]) / (w[1] - w[0]))
        .collect();
    check.clause(
        "concavity",
        first_increase(&slopes).map(|i| (pts[i], format!("slope increases from {:e} to {:e}", slopes[i - 1], slopes[i]))),
    );
    check.clause(
        "not_identically_zero",
        vals.iter().all(|&v| v.abs() <= SIGN_TOL).then(|| (pts[pts.len() - 1], "s vanishes on the grid".to_string())),
    );
    check.finish(sm.to_string(), "baranchik", pts.len())
}

/// `δ(x) = (1 − b s(‖x‖²)/‖x‖²) x`, with `b = a(1−ω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaranchikEstimator {
    shrink_b: f64,
    multiplier: SMultiplier,
}

impl BaranchikEstimator {
    pub fn new(shrink_b: f64, multiplier: SMultiplier) -> Result<Self> {
        if !(shrink_b >= 0.0 && shrink_b.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "b",
                value: shrink_b,
                reason: "shrinkage must be non-negative",
            });
        }
        Ok(Self { shrink_b, multiplier })
    }

    /// `δ₀(X) = X`.
    pub fn identity() -> Self {
        Self {
            shrink_b: 0.0,
            multiplier: SMultiplier::ConstantOne,
        }
    }

    pub fn ratio(b: f64, c: f64) -> Result<Self> {
        Self::new(b, SMultiplier::ratio(c)?)
    }

    pub fn james_stein(b: f64) -> Result<Self> {
        Self::new(b, SMultiplier::ConstantOne)
    }

    pub fn shrink_b(&self) -> f64 {
        self.shrink_b
    }

    pub fn multiplier(&self) -> &SMultiplier {
        &self.multiplier
    }

    /// The same multiplier with a different shrinkage amount.
    pub fn with_b(&self, b: f64) -> Result<Self> {
        Self::new(b, self.multiplier.clone())
    }

    /// `h(w) = 1 − b s(w)/w`, so that `δ(x) = h(‖x‖²) x`.
    #[inline]
    pub fn shrink_factor(&self, w: f64) -> f64 {
        if self.shrink_b == 0.0 {
            1.0
        } else {
            1.0 - self.shrink_b * self.multiplier.over_w(w)
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        let w: f64 = x.iter().map(|v| v * v).sum();
        if w == 0.0 && self.shrink_b > 0.0 && self.multiplier.singular_at_zero() {
            return Err(Error::Singular(format!("{self} is undefined at x = 0")));
        }
        let h = self.shrink_factor(w);
        Ok(x.iter().map(|v| h * v).collect())
    }
}

impl fmt::Display for BaranchikEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.shrink_b == 0.0 {
            return write!(f, "x");
        }
        match &self.multiplier {
            SMultiplier::Ratio { c } => write!(f, "baranchik:b={},c={c}", self.shrink_b),
            SMultiplier::ConstantOne => write!(f, "js:b={}", self.shrink_b),
            SMultiplier::Custom { name, .. } => write!(f, "custom:b={},s={name}", self.shrink_b),
        }
    }
}

impl FromStr for BaranchikEstimator {
    type Err = Error;

    fn from_str(input: &str) -> Result<Self> {
        let (head, body) = split_head(input);
        match head {
            "x" => no_params(input, body).map(|_| Self::identity()),
            "baranchik" => {
                let v = keyed(input, body, &["b", "c"])?;
                Self::ratio(v[0], v[1])
            }
            "js" => Self::james_stein(keyed(input, body, &["b"])?[0]),
            other => Err(parse_err(
                input,
                format!("unknown estimator `{other}`; expected baranchik:b=..,c=.., js:b=.. or x"),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn evaluate_examples() {
        let x = [0.3, -1.2, 2.0, 0.7];
        assert_eq!(BaranchikEstimator::identity().evaluate(&x).unwrap(), x.to_vec());
        let e = BaranchikEstimator::ratio(0.5, 1.0).unwrap();
        let unit = [0.6, 0.8, 0.0, 0.0];
        let out = e.evaluate(&unit).unwrap();
        for i in 0..4 {
            assert!((out[i] - 0.75 * unit[i]).abs() < 1e-15);
        }
        let js = BaranchikEstimator::james_stein(2.0).unwrap();
        let x = [1.0, 1.0, 0.0, 0.0];
        assert!(js.evaluate(&x).unwrap().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn singular_evaluation_is_flagged() {
        let js = BaranchikEstimator::james_stein(0.5).unwrap();
        assert!(matches!(js.evaluate(&[0.0; 4]), Err(Error::Singular(_))));
        let r = BaranchikEstimator::ratio(0.5, 2.0).unwrap();
        assert_eq!(r.evaluate(&[0.0; 4]).unwrap(), vec![0.0; 4]);
        assert!((r.shrink_factor(0.0) - 0.75).abs() < 1e-15);
        assert!(BaranchikEstimator::identity().evaluate(&[0.0; 4]).is_ok());
    }

    #[test]
    fn certification() {
        let grid = CertGrid::multiplier();
        assert!(certify_multiplier(&SMultiplier::ratio(1.0).unwrap(), &grid).is_ok());
        assert!(certify_multiplier(&SMultiplier::ConstantOne, &grid).is_ok());
        let bump = SMultiplier::custom("w/(1+w^2)", |w| w / (1.0 + w * w));
        let report = certify_multiplier(&bump, &grid).unwrap_err();
        let v = report.violations.iter().find(|v| v.clause == "monotone").unwrap();
        assert!((v.witness - 1.0).abs() < 0.05, "{}", v.witness);
        let zero = SMultiplier::custom("zero", |_| 0.0);
        assert!(certify_multiplier(&zero, &grid).unwrap_err().has_clause("not_identically_zero"));
        let convex = SMultiplier::custom("w^2/(1+w^2)", |w| w * w / (1.0 + w * w));
        assert!(certify_multiplier(&convex, &grid).unwrap_err().has_clause("concavity"));
        let big = SMultiplier::custom("2", |_| 2.0);
        assert!(certify_multiplier(&big, &grid).unwrap_err().has_clause("bounds"));
    }

    #[test]
    fn ratio_derivatives_match_differences() {
        let s = SMultiplier::ratio(1.5).unwrap();
        for w in [0.01f64, 0.5, 3.0, 40.0] {
            let h = 1e-5 * w.max(1.0);
            let fd = (s.value(w + h) - s.value(w - h)) / (2.0 * h);
            assert!((fd - s.deriv(w)).abs() < 1e-8);
            let fd2 = (s.deriv(w + h) - s.deriv(w - h)) / (2.0 * h);
            assert!((fd2 - s.deriv2(w)).abs() < 1e-7);
        }
    }

    #[test]
    fn spec_strings_round_trip() {
        for s in ["x", "baranchik:b=0.5,c=1", "js:b=0.5"] {
            let e: BaranchikEstimator = s.parse().unwrap();
            assert_eq!(e.to_string(), s);
        }
        assert!("baranchik:b=-1,c=1".parse::<BaranchikEstimator>().is_err());
        assert!("js".parse::<BaranchikEstimator>().is_err());
        assert!("ridge:b=1".parse::<BaranchikEstimator>().is_err());
    }

    /// Householder reflection `I − 2vvᵀ/‖v‖²` applied to `x`.
    fn reflect(v: &[f64], x: &[f64]) -> Vec<f64> {
        let vv: f64 = v.iter().map(|a| a * a).sum();
        let vx: f64 = v.iter().zip(x).map(|(a, b)| a * b).sum();
        x.iter().zip(v).map(|(xi, vi)| xi - 2.0 * vx / vv * vi).collect()
    }

    proptest! {
        #[test]
        fn orthogonally_equivariant(
            x in proptest::collection::vec(-5.0f64..5.0, 6),
            v in proptest::collection::vec(-1.0f64..1.0, 6),
            b in 0.0f64..4.0,
            c in 0.0f64..3.0,
        ) {
            prop_assume!(x.iter().map(|a| a * a).sum::<f64>() > 1e-6);
            prop_assume!(v.iter().map(|a| a * a).sum::<f64>() > 1e-3);
            for est in [BaranchikEstimator::ratio(b, c).unwrap(), BaranchikEstimator::james_stein(b).unwrap()] {
                let lhs = est.evaluate(&reflect(&v, &x)).unwrap();
                let rhs = reflect(&v, &est.evaluate(&x).unwrap());
                for (l, r) in lhs.iter().zip(&rhs) {
                    prop_assert!((l - r).abs() < 1e-10 * (1.0 + r.abs()) * (1.0 + b));
                }
            }
        }

        #[test]
        fn ratio_lies_below_tangent_through_origin(w in 1e-6f64..1e6, c in 0.0f64..10.0) {
            let s = SMultiplier::ratio(c).unwrap();
            prop_assert!(w * s.deriv(w) <= s.value(w) * (1.0 + 1e-12));
        }
    }
}
