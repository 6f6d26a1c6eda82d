use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{GestureClass, MAX_CLASSES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Takeoff,
    Land,
    Up,
    Down,
    Left,
    Right,
    Forward,
    Backward,
    YawLeft,
    YawRight,
}

impl CommandKind {
    pub const ALL: [CommandKind; 10] = [
        CommandKind::Takeoff,
        CommandKind::Land,
        CommandKind::Up,
        CommandKind::Down,
        CommandKind::Left,
        CommandKind::Right,
        CommandKind::Forward,
        CommandKind::Backward,
        CommandKind::YawLeft,
        CommandKind::YawRight,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CommandKind::Takeoff => "takeoff",
            CommandKind::Land => "land",
            CommandKind::Up => "up",
            CommandKind::Down => "down",
            CommandKind::Left => "left",
            CommandKind::Right => "right",
            CommandKind::Forward => "forward",
            CommandKind::Backward => "backward",
            CommandKind::YawLeft => "yaw_left",
            CommandKind::YawRight => "yaw_right",
        }
    }

    pub fn is_yaw(self) -> bool {
        matches!(self, CommandKind::YawLeft | CommandKind::YawRight)
    }
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CommandKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CommandKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid("command", format!("unknown command `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GestureCommand {
    pub kind: CommandKind,
    pub source_class: GestureClass,
}

/// Class id → command table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GestureMapping {
    table: BTreeMap<usize, CommandKind>,
}

impl Default for GestureMapping {
    fn default() -> Self {
        use CommandKind::*;
        let order = [
            Land, Takeoff, Forward, Backward, Left, Right, Up, Down, YawLeft, YawRight,
        ];
        GestureMapping {
            table: order.into_iter().enumerate().collect(),
        }
    }
}

impl GestureMapping {
    pub fn new(table: BTreeMap<usize, CommandKind>) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::invalid("mapping", "no entries"));
        }
        if let Some(&id) = table.keys().find(|&&id| id >= MAX_CLASSES) {
            return Err(Error::invalid(
                format!("mapping.{id}"),
                format!("class ids must be below {MAX_CLASSES}"),
            ));
        }
        Ok(GestureMapping { table })
    }

    pub fn get(&self, class_id: usize) -> Option<CommandKind> {
        self.table.get(&class_id).copied()
    }

    /// Lowest class id bound to `kind`.
    pub fn class_for(&self, kind: CommandKind) -> Option<usize> {
        self.table.iter().find(|(_, &k)| k == kind).map(|(&id, _)| id)
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, CommandKind)> + '_ {
        self.table.iter().map(|(&id, &k)| (id, k))
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

pub fn map_gesture_to_command(class_id: usize, mapping: &GestureMapping) -> Result<GestureCommand> {
    let kind = mapping.get(class_id).ok_or(Error::UnmappedClass(class_id))?;
    Ok(GestureCommand {
        kind,
        source_class: GestureClass::new(class_id)?,
    })
}
