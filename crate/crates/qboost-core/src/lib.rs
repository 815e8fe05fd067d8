//! Desk-scale modeling laboratory for a quadratic-boost multiport DC-DC
//! converter: exact switched simulation, averaged small-signal analysis,
//! design and stress formulas, loss accounting, closed-loop control, and a
//! machine-checked ledger of the published source material's internal
//! conflicts.
//!
//! The crate keeps two state models side by side: `AsPrinted`, which
//! reproduces the published per-phase equations exactly as printed, and
//! `Reconciled`, the unique passive completion that the rest of the stack
//! simulates. Every cell where the two differ is enumerated by
//! [`discrepancy::discrepancy_report`].

pub mod control;
pub mod discrepancy;
pub mod exec;
pub mod formulas;
pub mod linalg;
pub mod losses;
pub mod model;
pub mod params;
pub mod sim;
pub mod smallsignal;

pub use model::ModelVariant;
pub use params::{ConverterParams, Parasitics, SourceInputs, SwitchPhase};
