//! Declarative model descriptions and the per-scheme coefficient tables.

use crate::error::{Result, StackError};
use serde::{Deserialize, Serialize};

/// Which integrator-derived rule connects blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Euler,
    Ie,
    Rk2,
    Rk3,
    Rk4,
    Tm,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 6] = [
        SchemeKind::Euler,
        SchemeKind::Ie,
        SchemeKind::Rk2,
        SchemeKind::Rk3,
        SchemeKind::Rk4,
        SchemeKind::Tm,
    ];

    pub fn token(self) -> &'static str {
        match self {
            SchemeKind::Euler => "euler",
            SchemeKind::Ie => "ie",
            SchemeKind::Rk2 => "rk2",
            SchemeKind::Rk3 => "rk3",
            SchemeKind::Rk4 => "rk4",
            SchemeKind::Tm => "tm",
        }
    }

    pub fn coefficients(self) -> &'static SchemeCoefficients {
        match self {
            SchemeKind::Euler => &EULER,
            SchemeKind::Ie => &IE,
            SchemeKind::Rk2 => &RK2,
            SchemeKind::Rk3 => &RK3,
            SchemeKind::Rk4 => &RK4,
            SchemeKind::Tm => &TM,
        }
    }
}

/// Fixed scalar coefficients of one stacking scheme. Runge-Kutta style
/// schemes evaluate a shared residual function once per stage row:
/// stage i sees `x + τ·Σ_j a[i][j]·k_j` and the block output is
/// `Σ state_weights·(history) + τ·Σ stage_weights·k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeCoefficients {
    /// Lower-triangular stage increments; row 0 is empty.
    pub stage_matrix: &'static [&'static [f64]],
    /// Output weights over the stage derivatives.
    pub stage_weights: &'static [f64],
    /// Weights over the state history, newest first. Single-step schemes
    /// use `[1.0]`; the Taylor multistep uses `[3/2, −1, 1/2]`.
    pub state_weights: &'static [f64],
}

impl SchemeCoefficients {
    pub fn stages(&self) -> usize {
        self.stage_weights.len()
    }

    pub fn history_len(&self) -> usize {
        self.state_weights.len()
    }
}

pub static EULER: SchemeCoefficients = SchemeCoefficients {
    stage_matrix: &[&[]],
    stage_weights: &[1.0],
    state_weights: &[1.0],
};

pub static IE: SchemeCoefficients = SchemeCoefficients {
    stage_matrix: &[&[], &[1.0]],
    stage_weights: &[0.5, 0.5],
    state_weights: &[1.0],
};

pub static RK2: SchemeCoefficients = SchemeCoefficients {
    stage_matrix: &[&[], &[2.0 / 3.0]],
    stage_weights: &[0.25, 0.75],
    state_weights: &[1.0],
};

pub static RK3: SchemeCoefficients = SchemeCoefficients {
    stage_matrix: &[&[], &[0.5], &[-1.0, 2.0]],
    stage_weights: &[1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0],
    state_weights: &[1.0],
};

pub static RK4: SchemeCoefficients = SchemeCoefficients {
    stage_matrix: &[&[], &[0.5], &[0.0, 0.5], &[0.0, 0.0, 1.0]],
    stage_weights: &[1.0 / 6.0, 2.0 / 6.0, 2.0 / 6.0, 1.0 / 6.0],
    state_weights: &[1.0],
};

pub static TM: SchemeCoefficients = SchemeCoefficients {
    stage_matrix: &[&[]],
    stage_weights: &[1.0],
    state_weights: &[1.5, -1.0, 0.5],
};

/// One residual stage: `blocks` residual functions at `channels` width,
/// entered with `stride`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub channels: usize,
    pub blocks: usize,
    pub stride: usize,
}

/// Full declarative description of a model; building is deterministic in
/// `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub scheme: SchemeKind,
    pub in_channels: usize,
    pub stem_channels: usize,
    pub stages: Vec<StageConfig>,
    pub classes: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tau")]
    pub tau: f64,
}

fn default_tau() -> f64 {
    1.0
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(StackError::config("classes", "need at least 2 classes"));
        }
        if self.in_channels == 0 {
            return Err(StackError::config("in_channels", "must be positive"));
        }
        if self.stem_channels == 0 {
            return Err(StackError::config("stem_channels", "must be positive"));
        }
        if self.stages.is_empty() {
            return Err(StackError::config("stages", "need at least one stage"));
        }
        let mut prev = 0;
        for (i, st) in self.stages.iter().enumerate() {
            let field = format!("stages[{i}]");
            if st.blocks == 0 {
                return Err(StackError::config(field, "need at least one block"));
            }
            if st.channels == 0 {
                return Err(StackError::config(field, "channels must be positive"));
            }
            if st.channels < prev {
                return Err(StackError::config(
                    field,
                    "stage channels must be non-decreasing",
                ));
            }
            if st.stride != 1 && st.stride != 2 {
                return Err(StackError::config(field, "stride must be 1 or 2"));
            }
            prev = st.channels;
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(StackError::config("tau", "must be positive and finite"));
        }
        Ok(())
    }

    /// Conventional depth: main-path weighted layers only (stem conv, two
    /// convs per block, classifier); projection convs are not counted.
    pub fn nominal_depth(&self) -> usize {
        2 + 2 * self.stages.iter().map(|s| s.blocks).sum::<usize>()
    }

    /// True for stages that run the Taylor-multistep wiring: the model's
    /// scheme is `tm` and the stage is deep enough to boot (≥ 4 blocks).
    /// Shallower stages of a tm model fall back to Euler stacking.
    pub fn stage_uses_tm(&self, stage_index: usize) -> bool {
        self.scheme == SchemeKind::Tm && self.stages[stage_index].blocks >= 4
    }
}
