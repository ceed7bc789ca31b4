use crate::error::{Error, Result};

/// Tall-cache model constant `ε` and the structural exponent `d` derived from it.
///
/// `d` controls the fan-out of partitioners and mergers (`k ≈ N^{1/d}`) and
/// the base-case threshold of multiple selection. It is fixed before an
/// algorithm starts; nothing here depends on the simulated cache geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Config {
    epsilon: f64,
    d: u32,
    #[cfg(feature = "fault-injection")]
    pub(crate) fault: Option<Fault>,
}

/// Deliberately broken behaviour for mutation testing of the harness.
#[cfg(feature = "fault-injection")]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// The partitioner node with this index (in build order) sends
    /// smaller elements right and the rest left.
    InvertedNode(usize),
}

impl Config {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        let d = (1.0 + 2.0 / epsilon).ceil().max(2.0);
        if d > 64.0 {
            return Err(Error::Config(format!("epsilon {epsilon} is too small")));
        }
        Ok(Self {
            epsilon,
            d: d as u32,
            #[cfg(feature = "fault-injection")]
            fault: None,
        })
    }

    /// Overrides the derived exponent.
    pub fn with_d(mut self, d: u32) -> Result<Self> {
        if !(2..=64).contains(&d) {
            return Err(Error::Config(format!("d must be in 2..=64, got {d}")));
        }
        self.d = d;
        Ok(self)
    }

    #[cfg(feature = "fault-injection")]
    pub fn with_fault(mut self, fault: Fault) -> Self {
        self.fault = Some(fault);
        self
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn d(&self) -> u32 {
        self.d
    }
}

impl Default for Config {
    fn default() -> Self {
        Self::new(1.0).expect("epsilon = 1 is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derives_d_from_epsilon() {
        assert_eq!(Config::default().d(), 3);
        assert_eq!(Config::new(2.0).unwrap().d(), 2);
        assert_eq!(Config::new(10.0).unwrap().d(), 2);
        assert_eq!(Config::new(0.5).unwrap().d(), 5);
        assert_eq!(Config::new(0.3).unwrap().d(), 8);
        assert!(Config::new(0.0).is_err());
        assert!(Config::new(f64::NAN).is_err());
        assert_eq!(Config::default().with_d(4).unwrap().d(), 4);
        assert!(Config::default().with_d(1).is_err());
    }
}
