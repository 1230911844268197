//! Fixed-point simulation time and the operation latency model.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Ticks per CX-gate duration. One tick is the single-qubit gate latency.
pub const TICKS_PER_CX: u64 = 10;

/// Simulation time in tenths of a CX duration. Serialized as CX units.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ticks(pub u64);

impl Ticks {
    pub const ZERO: Ticks = Ticks(0);

    /// Rounds a CX-unit duration to the nearest tick.
    pub fn from_cx(cx: f64) -> Ticks {
        Ticks((cx * TICKS_PER_CX as f64).round().max(0.0) as u64)
    }

    pub fn as_cx(self) -> f64 {
        self.0 as f64 / TICKS_PER_CX as f64
    }
}

impl Add for Ticks {
    type Output = Ticks;
    fn add(self, rhs: Ticks) -> Ticks {
        Ticks(self.0 + rhs.0)
    }
}

impl AddAssign for Ticks {
    fn add_assign(&mut self, rhs: Ticks) {
        self.0 += rhs.0;
    }
}

impl Sub for Ticks {
    type Output = Ticks;
    fn sub(self, rhs: Ticks) -> Ticks {
        Ticks(self.0 - rhs.0)
    }
}

impl Mul<u64> for Ticks {
    type Output = Ticks;
    fn mul(self, rhs: u64) -> Ticks {
        Ticks(self.0 * rhs)
    }
}

impl fmt::Display for Ticks {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.0 / TICKS_PER_CX, self.0 % TICKS_PER_CX)
    }
}

impl Serialize for Ticks {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_cx())
    }
}

impl<'de> Deserialize<'de> for Ticks {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let cx = f64::deserialize(d)?;
        if !(cx.is_finite() && cx >= 0.0) {
            return Err(serde::de::Error::custom(format!("invalid duration {cx}")));
        }
        Ok(Ticks::from_cx(cx))
    }
}

/// Operation latencies in CX units: single-qubit 0.1, two-qubit 1,
/// measurement 5, one EPR preparation attempt 10.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyModel {
    pub t_1q: Ticks,
    pub t_2q: Ticks,
    pub t_ms: Ticks,
    pub t_iep: Ticks,
}

impl Default for LatencyModel {
    fn default() -> Self {
        LatencyModel {
            t_1q: Ticks(1),
            t_2q: Ticks(10),
            t_ms: Ticks(50),
            t_iep: Ticks(100),
        }
    }
}

impl LatencyModel {
    /// Time from a successful EPR round to completion of the remote gate.
    pub fn remote_post_epr(&self) -> Ticks {
        self.t_2q + self.t_ms
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, t) in [("t_1q", self.t_1q), ("t_2q", self.t_2q), ("t_ms", self.t_ms), ("t_iep", self.t_iep)] {
            if t == Ticks::ZERO {
                return Err(format!("{name} must be positive"));
            }
        }
        Ok(())
    }
}
