//! Incremental Algorithm for referring expressions over (shape, color, area) symbols.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{Area, Color, PieceSymbol, Shape};
use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Property {
    Position,
    Color,
    Shape,
}

/// Order in which the algorithm tries the properties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PreferenceOrder {
    PCS,
    PSC,
    SPC,
    CPS,
    SCP,
    CSP,
}

impl PreferenceOrder {
    pub const ALL: [PreferenceOrder; 6] = [
        PreferenceOrder::PCS,
        PreferenceOrder::PSC,
        PreferenceOrder::SPC,
        PreferenceOrder::CPS,
        PreferenceOrder::SCP,
        PreferenceOrder::CSP,
    ];

    pub fn properties(self) -> [Property; 3] {
        use Property::*;
        match self {
            PreferenceOrder::PCS => [Position, Color, Shape],
            PreferenceOrder::PSC => [Position, Shape, Color],
            PreferenceOrder::SPC => [Shape, Position, Color],
            PreferenceOrder::CPS => [Color, Position, Shape],
            PreferenceOrder::SCP => [Shape, Color, Position],
            PreferenceOrder::CSP => [Color, Shape, Position],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PreferenceOrder::PCS => "PCS",
            PreferenceOrder::PSC => "PSC",
            PreferenceOrder::SPC => "SPC",
            PreferenceOrder::CPS => "CPS",
            PreferenceOrder::SCP => "SCP",
            PreferenceOrder::CSP => "CSP",
        }
    }
}

impl fmt::Display for PreferenceOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PreferenceOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        PreferenceOrder::ALL
            .into_iter()
            .find(|o| o.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown preference order '{s}'")))
    }
}

/// Property values selected for a referring expression. Doubles as the follower's target
/// descriptor, where every field is optional.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PropertySet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<Color>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Shape>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<Area>,
}

impl PropertySet {
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn len(&self) -> usize {
        self.color.is_some() as usize + self.shape.is_some() as usize + self.area.is_some() as usize
    }

    /// Whether `symbol` has every value set here. The empty set matches everything.
    pub fn matches(&self, symbol: &PieceSymbol) -> bool {
        self.color.is_none_or(|c| c == symbol.color)
            && self.shape.is_none_or(|s| s == symbol.shape)
            && self.area.is_none_or(|a| a == symbol.area)
    }

    /// Takes the referent's value for `property`.
    pub fn insert(&mut self, property: Property, referent: &PieceSymbol) {
        match property {
            Property::Position => self.area = Some(referent.area),
            Property::Color => self.color = Some(referent.color),
            Property::Shape => self.shape = Some(referent.shape),
        }
    }

    /// Overwrites the fields that `newer` sets and keeps the rest.
    pub fn merge(&mut self, newer: &PropertySet) {
        self.color = newer.color.or(self.color);
        self.shape = newer.shape.or(self.shape);
        self.area = newer.area.or(self.area);
    }

    pub fn only_position(&self) -> bool {
        self.area.is_some() && self.color.is_none() && self.shape.is_none()
    }

    pub fn of(symbol: &PieceSymbol) -> PropertySet {
        PropertySet { color: Some(symbol.color), shape: Some(symbol.shape), area: Some(symbol.area) }
    }
}

fn shares(property: Property, a: &PieceSymbol, b: &PieceSymbol) -> bool {
    match property {
        Property::Position => a.area == b.area,
        Property::Color => a.color == b.color,
        Property::Shape => a.shape == b.shape,
    }
}

/// Greedy distractor exclusion in preference order.
///
/// Each property of the referent is tried in turn; if it rules out at least one remaining
/// distractor its value is kept and those distractors are dropped. Every property is tried even
/// after all distractors are gone. Without distractors the first preferred property is returned
/// so the expression always has content.
pub fn incremental_algorithm(
    referent: &PieceSymbol,
    distractors: &[PieceSymbol],
    order: PreferenceOrder,
) -> PropertySet {
    let mut selected = PropertySet::default();
    if distractors.is_empty() {
        selected.insert(order.properties()[0], referent);
        return selected;
    }
    let mut remaining: Vec<&PieceSymbol> = distractors.iter().collect();
    for property in order.properties() {
        let before = remaining.len();
        remaining.retain(|m| shares(property, referent, m));
        if remaining.len() < before {
            selected.insert(property, referent);
        }
    }
    selected
}

/// True iff no distractor matches every property in `propset`.
pub fn is_unique(propset: &PropertySet, _referent: &PieceSymbol, distractors: &[PieceSymbol]) -> bool {
    !distractors.iter().any(|d| propset.matches(d))
}
