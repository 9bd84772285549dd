//! Built-in parameterized test systems and file-based pencil sequences.

mod companion;
mod manifest;
mod multimachine;
mod systems;

pub use companion::{make_companion_fold, CompanionFoldModel};
pub use manifest::{load_pencil_sequence, write_pencil_sequence, PencilSequence};
pub use multimachine::{
    make_multimachine, phase_spread, sweep_parameter, GovernorSpec, LineSpec, LoadSpec, MachineSpec,
    MultiMachineModel, MultiMachineSpec, SweepTarget, FR_ALIGNMENT_DEG,
};
pub use systems::{six_machine, synthetic, two_machine};
