//! Frame/slot traffic generation: active user sets and the placement of r
//! packet replicas into randomly chosen slots.

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrafficError {
    #[error("invalid frame config: {0}")]
    Config(String),
}

/// Active-set policy per frame.
#[derive(Clone, Copy, Debug)]
pub enum Activation {
    /// Fixed |A| per frame (the paper-style experiments).
    FixedCount(usize),
    /// Each of the `population` users is independently active.
    Probability(f64),
}

#[derive(Clone, Copy, Debug)]
pub struct FrameConfig {
    /// Slots per frame.
    pub t_f: usize,
    /// Symbols per slot; preamble + payload.
    pub t_s: usize,
    /// Preamble symbols (numerology constant only; never synthesized).
    pub t_p: usize,
    /// Payload symbols per packet.
    pub n: usize,
    /// Replicas per active user.
    pub r: usize,
    /// Size of the user population [L].
    pub population: usize,
    pub activation: Activation,
}

impl FrameConfig {
    pub fn new(t_f: usize, r: usize, activation: Activation) -> Result<Self, TrafficError> {
        let cfg = Self {
            t_f,
            t_s: 168,
            t_p: 40,
            n: 128,
            r,
            population: 60,
            activation,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), TrafficError> {
        if self.t_p + self.n != self.t_s {
            return Err(TrafficError::Config(format!(
                "T_p + n = {} != T_s = {}",
                self.t_p + self.n,
                self.t_s
            )));
        }
        if self.r == 0 || self.r > self.t_f {
            return Err(TrafficError::Config(format!(
                "r = {} outside [1, T_f = {}]",
                self.r, self.t_f
            )));
        }
        match self.activation {
            Activation::FixedCount(c) if c > self.population => Err(TrafficError::Config(
                format!("active count {c} exceeds population {}", self.population),
            )),
            Activation::Probability(p) if !(0.0..=1.0).contains(&p) => Err(TrafficError::Config(
                format!("activation probability {p} outside [0, 1]"),
            )),
            _ => Ok(()),
        }
    }
}

/// One frame's realized traffic: the ordered active set and each active
/// user's replica slots.
#[derive(Clone, Debug)]
pub struct FrameSchedule {
    /// Ordered active user ids; position i is the frame-level index A(i+1).
    pub active: Vec<usize>,
    /// Per active position, the r distinct slot indices, sorted.
    pub placement: Vec<Vec<usize>>,
    pub t_f: usize,
}

/// Draw a frame's active set and replica placement.
pub fn draw_frame(cfg: &FrameConfig, rng: &mut impl Rng) -> Result<FrameSchedule, TrafficError> {
    cfg.validate()?;
    let mut active: Vec<usize> = match cfg.activation {
        Activation::FixedCount(count) => {
            let mut ids: Vec<usize> = (0..cfg.population).collect();
            ids.shuffle(rng);
            ids.truncate(count);
            ids
        }
        Activation::Probability(p) => (0..cfg.population)
            .filter(|_| rng.gen_bool(p))
            .collect(),
    };
    active.sort_unstable();
    let placement = active
        .iter()
        .map(|_| {
            let mut slots: Vec<usize> = (0..cfg.t_f).collect();
            slots.shuffle(rng);
            slots.truncate(cfg.r);
            slots.sort_unstable();
            slots
        })
        .collect();
    Ok(FrameSchedule {
        active,
        placement,
        t_f: cfg.t_f,
    })
}

/// Active positions (indices into `schedule.active`) transmitting in `slot`,
/// in increasing order.
pub fn slot_transmitters(schedule: &FrameSchedule, slot: usize) -> Vec<usize> {
    assert!(slot < schedule.t_f, "slot index out of range");
    schedule
        .placement
        .iter()
        .enumerate()
        .filter(|(_, slots)| slots.contains(&slot))
        .map(|(pos, _)| pos)
        .collect()
}
