//! Unified mobile and web action spaces.
//!
//! A [`HighLevelAction`] is what the planner emits (element description, verb,
//! payload). [`ground`] turns it into a [`GroundedAction`] once a coordinate is
//! known. Grounded actions have one canonical text form, e.g.
//! `click [[0.12] [0.07]]`, produced by [`serialize_grounded`] and read back by
//! [`parse_grounded`].

mod grounded;
mod high_level;
mod kind;
mod parse;
pub mod value;

use thiserror::Error;

pub use grounded::{format_coord_component, serialize_grounded, Coordinate, GroundedAction, COORD_TEXT_TOLERANCE};
pub use high_level::{ground, HighLevelAction, MAX_ELEMENT_DESCRIPTION_CHARS};
pub use kind::{legal_kinds, ActionKind, Platform, TargetRule};
pub use parse::parse_grounded;
pub use value::StopStatus;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ActionError {
    #[error("parse error at byte {offset}: expected {expected}")]
    Parse { offset: usize, expected: String },
    #[error("`{kind}` is not a {platform} action")]
    IllegalKindForPlatform { kind: ActionKind, platform: Platform },
    #[error("`{0}` requires a coordinate")]
    MissingCoordinate(ActionKind),
    #[error("malformed value {value:?} for `{kind}`: expected {expected}")]
    MalformedValue {
        kind: ActionKind,
        value: String,
        expected: String,
    },
    #[error("invalid action: {0}")]
    InvalidAction(String),
}
