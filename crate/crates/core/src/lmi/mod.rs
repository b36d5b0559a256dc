//! Affine matrix expressions and LMI assembly.

pub mod assemble;
pub mod block;
pub mod expr;
pub mod index;
pub mod lfr;
pub mod multiplier;

pub use assemble::{EnergyForm, Form, Performance, RobustForm, Sharing};
pub use block::{BlockTag, LmiBlock, LmiProblem, Sense};
pub use expr::{AffineExpr, VarId, VariableSet};
pub use index::IndexExpr;
pub use lfr::{LfrFamily, LfrSystem, OpenLoopFamily, OpenLoopSystem, UncertaintyStructure};
pub use multiplier::{MultiplierClass, MultiplierKind};
