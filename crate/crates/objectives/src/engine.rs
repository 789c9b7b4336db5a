use std::fmt;
use std::str::FromStr;

/// A route to derivatives. `Manual`, `Forward` and `Reverse` are exact;
/// `Fd` is the central-difference baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DerivEngine {
    Manual,
    Forward,
    Reverse,
    Fd,
}

impl DerivEngine {
    pub const ALL: [DerivEngine; 4] = [
        DerivEngine::Manual,
        DerivEngine::Forward,
        DerivEngine::Reverse,
        DerivEngine::Fd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DerivEngine::Manual => "manual",
            DerivEngine::Forward => "forward",
            DerivEngine::Reverse => "reverse",
            DerivEngine::Fd => "fd",
        }
    }

    /// True for the routes that compute exact derivatives.
    pub fn is_exact(self) -> bool {
        !matches!(self, DerivEngine::Fd)
    }
}

impl fmt::Display for DerivEngine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DerivEngine {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "manual" => Ok(DerivEngine::Manual),
            "forward" => Ok(DerivEngine::Forward),
            "reverse" => Ok(DerivEngine::Reverse),
            "fd" => Ok(DerivEngine::Fd),
            other => Err(format!(
                "unknown engine '{other}' (expected manual, forward, reverse or fd)"
            )),
        }
    }
}
