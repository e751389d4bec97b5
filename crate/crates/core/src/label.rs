use std::fmt;

use crate::error::{Error, Result};

/// Class label. The numeric encoding (0 = male, 1 = female) is part of the
/// manifest format and of every class-indexed tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Male,
    Female,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Male, Label::Female];

    pub fn index(self) -> usize {
        match self {
            Label::Male => 0,
            Label::Female => 1,
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(Label::Male),
            1 => Ok(Label::Female),
            other => Err(Error::InvalidArgument(format!("label {other} is not 0 or 1"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Male => "Male",
            Label::Female => "Female",
        }
    }

    /// 1.0 for the positive class of the sigmoid head (female), else 0.0.
    pub fn target(self) -> f32 {
        self.index() as f32
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
