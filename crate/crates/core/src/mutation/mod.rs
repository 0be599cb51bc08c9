//! Mutated-input generator.

pub mod campaign;
pub mod dictionary;
pub mod ops;
pub mod rng;

pub use campaign::{base_templates, generate_campaign, risk_cap, CampaignError, MutantRequest};
pub use dictionary::{Dictionaries, TplinkPair};
pub use ops::{mutate_field, Alphabet, Edit, EditKind, FieldContext, MutationError, MutationOp};
