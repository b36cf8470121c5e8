//! Untargeted L-infinity projected gradient descent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ToyNet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PgdConfig {
    /// L-infinity radius, in input units.
    pub epsilon: f64,
    pub step_size: f64,
    pub iterations: usize,
    /// Valid input range per component.
    pub input_box: (f64, f64),
    /// Start from a uniform point in the ball instead of the clean input.
    pub random_start: Option<u64>,
}

impl Default for PgdConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            step_size: 0.01,
            iterations: 40,
            input_box: (0.0, 1.0),
            random_start: None,
        }
    }
}

impl PgdConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.input_box;
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!("epsilon {}", self.epsilon)));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "step size {}",
                self.step_size
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be >= 1".into()));
        }
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::InvalidConfig(format!("input box ({lo}, {hi})")));
        }
        Ok(())
    }
}

/// Per-component bounds `[lo, hi]` around `center` such that the computed
/// `|x - center|` is at most `epsilon` for every `x` in the interval.
fn ball_bounds(center: f64, epsilon: f64) -> (f64, f64) {
    let mut lo = center - epsilon;
    while center - lo > epsilon {
        lo = lo.next_up();
    }
    let mut hi = center + epsilon;
    while hi - center > epsilon {
        hi = hi.next_down();
    }
    (lo, hi)
}

/// Iterates `x <- clip_box(clip_ball(x + step * sign(grad)))` maximizing the
/// cross-entropy of `true_label`. Components with zero gradient do not move.
pub fn pgd_attack(
    net: &ToyNet,
    input: &[f64],
    true_label: usize,
    cfg: &PgdConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if input.len() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            found: input.len(),
        });
    }
    let (box_lo, box_hi) = cfg.input_box;
    if let Some(index) = input
        .iter()
        .position(|x| !(x.is_finite() && *x >= box_lo && *x <= box_hi))
    {
        return Err(Error::InvalidConfig(format!(
            "input component {index} lies outside the input box"
        )));
    }
    let bounds: Vec<(f64, f64)> = input.iter().map(|&c| ball_bounds(c, cfg.epsilon)).collect();
    let project = |x: &mut [f64]| {
        for (xi, (lo, hi)) in x.iter_mut().zip(&bounds) {
            *xi = xi.clamp(*lo, *hi).clamp(box_lo, box_hi);
        }
    };

    let mut x = input.to_vec();
    if cfg.epsilon == 0.0 {
        return Ok(x);
    }
    if let Some(seed) = cfg.random_start {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for xi in &mut x {
            *xi += rng.random_range(-cfg.epsilon..=cfg.epsilon);
        }
        project(&mut x);
    }
    for _ in 0..cfg.iterations {
        let (_, grads) = net.loss_and_gradients(&x, true_label)?;
        for (xi, g) in x.iter_mut().zip(&grads.input) {
            if *g > 0.0 {
                *xi += cfg.step_size;
            } else if *g < 0.0 {
                *xi -= cfg.step_size;
            }
        }
        project(&mut x);
    }
    Ok(x)
}
