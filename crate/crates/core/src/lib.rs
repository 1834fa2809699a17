//! Desk-scale, fully software replica of a real-time DRL flow-control loop:
//! a wake-oscillator surrogate of a vibrating cylinder in cross-flow, a
//! lagged rotary actuator on a 100 ms command grid, a from-scratch PPO agent
//! with optional action-history state augmentation, and the open-loop
//! sinusoidal lock-on baseline.

pub mod actuator;
pub mod analysis;
pub mod cli;
pub mod config;
pub mod control;
pub mod error;
pub mod lockon;
pub mod ppo;
pub mod plant;
pub mod record;
pub mod rl;

pub use error::{Result, VivError};

// Book chapters double as doc-tests: every fenced Rust snippet in the guide
// must keep compiling and passing.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/plant.md")]
    mod plant {}
    #[doc = include_str!("../../../book/src/actuator.md")]
    mod actuator {}
    #[doc = include_str!("../../../book/src/learning.md")]
    mod learning {}
    #[doc = include_str!("../../../book/src/ppo.md")]
    mod ppo {}
    #[doc = include_str!("../../../book/src/control-loop.md")]
    mod control_loop {}
    #[doc = include_str!("../../../book/src/lockon.md")]
    mod lockon {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
