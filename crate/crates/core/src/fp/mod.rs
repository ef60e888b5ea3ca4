//! Fractional-programming machinery: slack variables, surrogate objective,
//! and the digital and analog beamformer updates.

mod analog;
mod beamformer;
mod digital;
mod slack;

pub use analog::{solve_analog, AnalogProblem, AnalogSolution, PenaltySchedule, PenaltyState};
pub use beamformer::{AnalogBeamformer, BeamformerSnapshot, HybridBeamformer};
pub use digital::{
    solve_digital, BisectionConfig, DigitalProblem, DigitalSolution, PowerMetric,
};
pub use slack::{
    surrogate_from_gains, surrogate_value, update_slack, update_slack_from_gains, SlackState,
};
