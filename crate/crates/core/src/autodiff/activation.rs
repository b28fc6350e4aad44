use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Elementwise nonlinearity with a known derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Activation {
    LeakyRelu(f64),
    Elu,
    Tanh,
    Sigmoid,
    Relu,
    Identity,
}

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

impl Default for Activation {
    fn default() -> Self {
        Activation::LeakyRelu(DEFAULT_LEAKY_SLOPE)
    }
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu(s) => {
                if x > 0.0 {
                    x
                } else {
                    s * x
                }
            }
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative at input `x`, given the already computed output `y`.
    #[inline]
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::LeakyRelu(s) => {
                if x > 0.0 {
                    1.0
                } else {
                    s
                }
            }
            Activation::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    y + 1.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::LeakyRelu(s) if *s == DEFAULT_LEAKY_SLOPE => write!(f, "leaky_relu"),
            Activation::LeakyRelu(s) => write!(f, "leaky_relu:{s}"),
            Activation::Elu => write!(f, "elu"),
            Activation::Tanh => write!(f, "tanh"),
            Activation::Sigmoid => write!(f, "sigmoid"),
            Activation::Relu => write!(f, "relu"),
            Activation::Identity => write!(f, "identity"),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    /// Accepts `leaky_relu`, `leaky_relu:<slope>`, `elu`, `tanh`, `sigmoid`,
    /// `relu` and `identity`, case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        let unknown = || Error::Unknown {
            kind: "activation",
            name: s.to_string(),
        };
        let (name, arg) = match lower.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (lower.as_str(), None),
        };
        let act = match name {
            "leaky_relu" | "leakyrelu" => {
                let slope = match arg {
                    Some(a) => a.parse().map_err(|_| unknown())?,
                    None => DEFAULT_LEAKY_SLOPE,
                };
                return Ok(Activation::LeakyRelu(slope));
            }
            "elu" => Activation::Elu,
            "tanh" => Activation::Tanh,
            "sigmoid" => Activation::Sigmoid,
            "relu" => Activation::Relu,
            "identity" | "none" | "linear" => Activation::Identity,
            _ => return Err(unknown()),
        };
        if arg.is_some() {
            return Err(unknown());
        }
        Ok(act)
    }
}

impl TryFrom<String> for Activation {
    type Error = Error;
    fn try_from(s: String) -> Result<Self, Error> {
        s.parse()
    }
}

impl From<Activation> for String {
    fn from(a: Activation) -> String {
        a.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn definitional_values() {
        assert_eq!(Activation::LeakyRelu(0.2).apply(-1.0), -0.2);
        assert_eq!(Activation::Tanh.apply(0.0), 0.0);
        assert_eq!(Activation::Sigmoid.apply(0.0), 0.5);
        assert_eq!(Activation::Elu.apply(2.0), 2.0);
    }

    #[test]
    fn derivatives_match_central_differences() {
        let kinds = [
            Activation::LeakyRelu(0.2),
            Activation::Elu,
            Activation::Tanh,
            Activation::Sigmoid,
            Activation::Identity,
        ];
        let eps = 1e-6;
        for k in kinds {
            for &x in &[-2.3, -0.7, -0.05, 0.04, 0.9, 3.1] {
                let num = (k.apply(x + eps) - k.apply(x - eps)) / (2.0 * eps);
                let ana = k.derivative(x, k.apply(x));
                let rel = (num - ana).abs() / (num.abs() + ana.abs()).max(1e-12);
                assert!(rel < 1e-6, "{k} at {x}: {num} vs {ana}");
            }
        }
    }

    #[test]
    fn parse_round_trip_and_unknown() {
        for s in ["leaky_relu", "leaky_relu:0.1", "elu", "tanh", "sigmoid", "identity"] {
            let a: Activation = s.parse().unwrap();
            assert_eq!(a.to_string(), s);
        }
        assert!(matches!("swish".parse::<Activation>(), Err(Error::Unknown { .. })));
    }
}
