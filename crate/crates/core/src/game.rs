use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Color, Outcome};

/// Opaque player identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PlayerId(String);

impl PlayerId {
    pub fn new(id: impl Into<String>) -> Self {
        PlayerId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PlayerId {
    fn from(s: &str) -> Self {
        PlayerId(s.to_owned())
    }
}

/// One game. `result` is from white's perspective.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GameRecord {
    pub period: u32,
    pub white: PlayerId,
    pub black: PlayerId,
    pub result: Outcome,
}

impl GameRecord {
    pub fn new(period: u32, white: impl Into<String>, black: impl Into<String>, result: Outcome) -> Self {
        GameRecord {
            period,
            white: PlayerId::new(white),
            black: PlayerId::new(black),
            result,
        }
    }

    /// The game as seen by `player`: (opponent, color, outcome). `None` if
    /// `player` did not take part.
    pub fn view_from(&self, player: &PlayerId) -> Option<(&PlayerId, Color, Outcome)> {
        if *player == self.white {
            Some((&self.black, Color::White, self.result))
        } else if *player == self.black {
            Some((&self.white, Color::Black, self.result.reversed()))
        } else {
            None
        }
    }
}
