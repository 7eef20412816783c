//! Scalar special functions and pointwise nonlinearities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Error function, accurate to double precision (rational minimax
/// approximation via libm's musl port).
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Exact GELU: 0.5 x (1 + erf(x / sqrt(2))).
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + erf(x * std::f64::consts::FRAC_1_SQRT_2))
}

/// Analytic GELU derivative: Phi(x) + x phi(x).
pub fn gelu_prime(x: f64) -> f64 {
    let phi = FRAC_1_SQRT_2PI * (-0.5 * x * x).exp();
    0.5 * (1.0 + erf(x * std::f64::consts::FRAC_1_SQRT_2)) + x * phi
}

/// Pointwise nonlinearities shared by the model layers and the
/// spectral bandwidth probe. `Square` is only valid in the probe;
/// model configs reject it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Gelu,
    Relu,
    Tanh,
    Square,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => gelu(x),
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Square => x * x,
            Activation::Identity => x,
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => gelu_prime(x),
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Square => 2.0 * x,
            Activation::Identity => 1.0,
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "gelu" => Ok(Activation::Gelu),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "square" => Ok(Activation::Square),
            "identity" | "id" => Ok(Activation::Identity),
            other => Err(Error::InvalidArg(format!("unknown activation '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erf_reference_values() {
        // Abramowitz & Stegun table values.
        assert!((erf(0.0)).abs() < 1e-15);
        assert!((erf(1.0) - 0.842_700_792_949_714_9).abs() < 1e-14);
        assert!((erf(2.0) - 0.995_322_265_018_952_7).abs() < 1e-14);
        assert!((erf(-1.0) + erf(1.0)).abs() < 1e-15);
    }

    #[test]
    fn gelu_matches_finite_difference() {
        let h = 1e-6;
        for &x in &[-2.5, -0.3, 0.0, 0.7, 1.9] {
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!(
                (gelu_prime(x) - fd).abs() < 1e-8,
                "gelu'({x}) analytic {} vs fd {}",
                gelu_prime(x),
                fd
            );
        }
    }

    #[test]
    fn activation_derivatives_match_finite_difference() {
        let h = 1e-6;
        for act in [Activation::Tanh, Activation::Square, Activation::Identity] {
            for &x in &[-1.2, 0.4, 2.0] {
                let fd = (act.apply(x + h) - act.apply(x - h)) / (2.0 * h);
                assert!((act.derivative(x) - fd).abs() < 1e-8);
            }
        }
    }
}
