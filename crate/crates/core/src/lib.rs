pub mod choice;
pub mod cost;
pub mod error;
pub mod flow;
pub mod genrand;
pub mod grid;
pub mod io;
pub mod lattice;
pub mod market;
pub mod model;
pub mod oracle;
pub mod poset;
pub mod rotation;
pub mod stability;

pub use choice::{ChoiceEvaluator, ChoiceKind, ChoiceRule, Comparison, Tableau};
pub use cost::{CostVector, Decimal};
pub use error::{Error, Result, ValidationError};
pub use market::Market;
pub use model::{Assignment, EdgeInfo, FirmChoice, Instance, LocalVector, Vertex};
