//! Reinforcement-learned distribution of work down a `(d+1)`-dimensional lattice.
//!
//! A workload `Q` enters at the centre of the top hyper-plane. Every site that
//! holds more than it keeps hands the rest, one unit packet at a time, to one of
//! its `2d+1` neighbours on the plane below, picked with logit probabilities
//! `∝ exp(β·J)`. Each packet strengthens the link it used by one; after the
//! iteration every link forgets a fraction `γ`. Over many iterations the
//! preferences organise the flow into a single-file "snake" on top and a
//! disordered "blob" below.
//!
//! * [`lattice`]: geometry, helical indexing and state storage.
//! * [`engine`]: site visits, iterations and seeded runs.
//! * [`measures`]: flow, depth, widths, workforce and interface observables.
//! * [`runner`]: configuration files, sweeps, figure presets and CSV output.

pub mod engine;
pub mod lattice;
pub mod measures;
pub mod runner;

pub use engine::{run, IterationOutcome, SimConfig, Simulation, UpdateMode, Variant};
pub use lattice::{LatticeGeometry, LatticeState};
pub use measures::RunSummary;
