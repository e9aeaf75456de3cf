//! Solver configuration: relaxation bounds, the relaxation sequence and the
//! radius `sigma` that scales the perturbation budget.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// A radius in `(0, inf]`.
///
/// `Infinite` switches every perturbation budget to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sigma {
    Finite(f64),
    Infinite,
}

impl Sigma {
    pub fn finite(self) -> Option<f64> {
        match self {
            Sigma::Finite(s) => Some(s),
            Sigma::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Sigma::Infinite)
    }

    pub fn validate(self) -> Result<()> {
        match self {
            Sigma::Finite(s) if !(s > 0.0) || !s.is_finite() => Err(Error::NonpositiveSigma(s)),
            _ => Ok(()),
        }
    }
}

impl Serialize for Sigma {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Sigma::Finite(s) => serializer.serialize_f64(*s),
            Sigma::Infinite => serializer.serialize_str("infinity"),
        }
    }
}

impl<'de> Deserialize<'de> for Sigma {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct SigmaVisitor;

        impl Visitor<'_> for SigmaVisitor {
            type Value = Sigma;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive number or the string \"infinity\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Sigma, E> {
                Ok(Sigma::Finite(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Sigma, E> {
                Ok(Sigma::Finite(v as f64))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Sigma, E> {
                Ok(Sigma::Finite(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Sigma, E> {
                match v {
                    "infinity" | "inf" => Ok(Sigma::Infinite),
                    other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
        }

        deserializer.deserialize_any(SigmaVisitor)
    }
}

/// The relaxation sequence `k -> lambda_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Relaxation {
    Constant(f64),
    /// A tabulated sequence, repeated cyclically.
    Cycled { list: Vec<f64> },
}

impl Relaxation {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            Relaxation::Constant(l) => *l,
            Relaxation::Cycled { list } => list[k % list.len()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tau1: f64,
    pub tau2: f64,
    pub lambda: Relaxation,
    pub sigma: Sigma,
    pub max_iterations: usize,
    pub residual_tolerance: f64,
    pub seed: u64,
    /// Keep every iterate in the run result (needed for point-based audits).
    #[serde(default)]
    pub keep_iterates: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tau1: 0.05,
            tau2: 0.05,
            lambda: Relaxation::Constant(1.0),
            sigma: Sigma::Infinite,
            max_iterations: 100_000,
            residual_tolerance: 1e-8,
            seed: 0,
            keep_iterates: false,
        }
    }
}

impl SolverConfig {
    pub fn lambda_at(&self, k: usize) -> f64 {
        self.lambda.at(k)
    }
}

/// Checks the relaxation bounds, the relaxation sequence and `sigma`.
///
/// Tabulated sequences are sampled at `k = 0..max_iterations-1`, which covers
/// every entry that the run can reach.
pub fn validate_config(cfg: &SolverConfig) -> Result<()> {
    let (tau1, tau2) = (cfg.tau1, cfg.tau2);
    if !(tau1 > 0.0 && tau2 > 0.0 && tau1 + tau2 <= 2.0) {
        return Err(Error::InvalidRelaxationBounds { tau1, tau2 });
    }
    if cfg.max_iterations == 0 {
        return Err(Error::InvalidConfig("max_iterations must be positive".into()));
    }
    if !(cfg.residual_tolerance >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "residual_tolerance must be nonnegative, got {}",
            cfg.residual_tolerance
        )));
    }
    let (lo, hi) = (tau1, 2.0 - tau2);
    let check = |k: usize, lambda: f64| {
        if lambda >= lo && lambda <= hi {
            Ok(())
        } else {
            Err(Error::LambdaOutOfRange { k, lambda, lo, hi })
        }
    };
    match &cfg.lambda {
        Relaxation::Constant(l) => check(0, *l)?,
        Relaxation::Cycled { list } => {
            if list.is_empty() {
                return Err(Error::InvalidConfig("lambda list is empty".into()));
            }
            for k in 0..cfg.max_iterations.min(list.len()) {
                check(k, list[k])?;
            }
        }
    }
    cfg.sigma.validate()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(tau1: f64, tau2: f64, lambda: f64) -> SolverConfig {
        SolverConfig {
            tau1,
            tau2,
            lambda: Relaxation::Constant(lambda),
            ..SolverConfig::default()
        }
    }

    #[test]
    fn accepts_midpoint() {
        assert!(validate_config(&cfg(0.5, 0.5, 1.0)).is_ok());
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(matches!(
            validate_config(&cfg(1.5, 1.0, 1.0)),
            Err(Error::InvalidRelaxationBounds { .. })
        ));
        assert!(matches!(
            validate_config(&cfg(0.0, 1.0, 1.0)),
            Err(Error::InvalidRelaxationBounds { .. })
        ));
        assert!(matches!(
            validate_config(&cfg(-0.1, 0.5, 1.0)),
            Err(Error::InvalidRelaxationBounds { .. })
        ));
    }

    #[test]
    fn rejects_lambda_outside_interval() {
        assert!(matches!(
            validate_config(&cfg(0.1, 0.1, 1.95)),
            Err(Error::LambdaOutOfRange { k: 0, .. })
        ));
        let mut c = cfg(0.1, 0.1, 1.0);
        c.lambda = Relaxation::Cycled {
            list: vec![1.0, 1.5, 0.05],
        };
        assert!(matches!(
            validate_config(&c),
            Err(Error::LambdaOutOfRange { k: 2, .. })
        ));
        // entries past the iteration cap are never used
        c.max_iterations = 2;
        assert!(validate_config(&c).is_ok());
    }

    #[test]
    fn rejects_nonpositive_sigma() {
        let mut c = cfg(0.5, 0.5, 1.0);
        c.sigma = Sigma::Finite(0.0);
        assert_eq!(validate_config(&c), Err(Error::NonpositiveSigma(0.0)));
        c.sigma = Sigma::Finite(-3.0);
        assert!(validate_config(&c).is_err());
        c.sigma = Sigma::Infinite;
        assert!(validate_config(&c).is_ok());
    }

    #[test]
    fn sigma_json_forms() {
        assert_eq!(serde_json::from_str::<Sigma>("2.5").unwrap(), Sigma::Finite(2.5));
        assert_eq!(serde_json::from_str::<Sigma>("3").unwrap(), Sigma::Finite(3.0));
        assert_eq!(
            serde_json::from_str::<Sigma>("\"infinity\"").unwrap(),
            Sigma::Infinite
        );
        assert!(serde_json::from_str::<Sigma>("\"big\"").is_err());
        assert_eq!(serde_json::to_string(&Sigma::Infinite).unwrap(), "\"infinity\"");
    }

    #[test]
    fn relaxation_json_forms() {
        let c: Relaxation = serde_json::from_str("1.2").unwrap();
        assert_eq!(c.at(7), 1.2);
        let l: Relaxation = serde_json::from_str(r#"{"list":[1.0,1.5]}"#).unwrap();
        assert_eq!(l.at(0), 1.0);
        assert_eq!(l.at(3), 1.5);
    }
}
