use serde::{Deserialize, Serialize};

/// A control command: heading change and speed through water.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    /// Degrees, positive to starboard.
    pub delta_heading: f64,
    /// Knots.
    pub stw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActionBounds {
    /// Largest heading change per step, degrees.
    pub max_turn: f64,
    pub min_speed: f64,
    pub max_speed: f64,
}

impl Default for ActionBounds {
    fn default() -> Self {
        ActionBounds {
            max_turn: 30.0,
            min_speed: 4.0,
            max_speed: 20.0,
        }
    }
}

impl ActionBounds {
    pub fn clamp(&self, a: Action) -> Action {
        Action {
            delta_heading: a.delta_heading.clamp(-self.max_turn, self.max_turn),
            stw: a.stw.clamp(self.min_speed, self.max_speed),
        }
    }

    pub fn contains(&self, a: &Action) -> bool {
        a.delta_heading.abs() <= self.max_turn && (self.min_speed..=self.max_speed).contains(&a.stw)
    }

    /// `(low, high)` for each action dimension.
    pub fn ranges(&self) -> [(f64, f64); 2] {
        [(-self.max_turn, self.max_turn), (self.min_speed, self.max_speed)]
    }

    pub fn validate(&self) -> crate::Result<()> {
        if !(self.max_turn > 0.0 && self.min_speed >= 0.0 && self.max_speed > self.min_speed) {
            return Err(crate::Error::InvalidArgument(format!("bad action bounds {self:?}")));
        }
        Ok(())
    }
}
