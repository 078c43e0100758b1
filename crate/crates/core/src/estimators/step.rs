use crate::error::{Error, Result};

/// Which side of a jump the function takes its value from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Continuity {
    /// `f(t)` is the value after the last jump at or before `t`.
    Right,
    /// `f(t)` is the value after the last jump strictly before `t`.
    Left,
}

/// Piecewise-constant function with finitely many jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    jump_times: Vec<f64>,
    values: Vec<f64>,
    value_before_first: f64,
    continuity: Continuity,
}

impl StepFunction {
    pub fn new(
        jump_times: Vec<f64>,
        values: Vec<f64>,
        value_before_first: f64,
        continuity: Continuity,
    ) -> Result<Self> {
        if jump_times.len() != values.len() {
            return Err(Error::Configuration(format!(
                "{} jump times but {} values",
                jump_times.len(),
                values.len()
            )));
        }
        if !jump_times.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Configuration(
                "jump times must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            jump_times,
            values,
            value_before_first,
            continuity,
        })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            jump_times: Vec::new(),
            values: Vec::new(),
            value_before_first: value,
            continuity: Continuity::Right,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self.continuity {
            Continuity::Right => self.right_limit(t),
            Continuity::Left => self.left_limit(t),
        }
    }

    /// `f(t⁻)`.
    pub fn left_limit(&self, t: f64) -> f64 {
        self.value_at_index(self.jump_times.partition_point(|&x| x < t))
    }

    /// `f(t⁺)`.
    pub fn right_limit(&self, t: f64) -> f64 {
        self.value_at_index(self.jump_times.partition_point(|&x| x <= t))
    }

    fn value_at_index(&self, idx: usize) -> f64 {
        if idx == 0 {
            self.value_before_first
        } else {
            self.values[idx - 1]
        }
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_before_first(&self) -> f64 {
        self.value_before_first
    }

    pub fn continuity(&self) -> Continuity {
        self.continuity
    }

    /// `(time, size)` of every jump.
    pub fn jumps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let previous = std::iter::once(self.value_before_first).chain(self.values.iter().copied());
        self.jump_times
            .iter()
            .zip(self.values.iter().zip(previous))
            .map(|(&t, (&v, p))| (t, v - p))
    }
}
