use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Lumbar level tag, ordered superior (L1) to inferior (L5).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    L1,
    L2,
    L3,
    L4,
    L5,
}

impl Level {
    pub const ALL: [Level; 5] = [Level::L1, Level::L2, Level::L3, Level::L4, Level::L5];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Level> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        ["L1", "L2", "L3", "L4", "L5"][self.index()]
    }

    /// Finds an `L1`…`L5` tag in a file name, e.g. `patient07_L3_vb.stl`.
    /// The tag must not be followed by another digit.
    pub fn infer_from_name(name: &str) -> Option<Level> {
        let bytes = name.as_bytes();
        (0..bytes.len().saturating_sub(1)).find_map(|i| {
            let is_l = bytes[i] == b'L' || bytes[i] == b'l';
            let digit = bytes[i + 1];
            let next_is_digit = bytes.get(i + 2).is_some_and(u8::is_ascii_digit);
            (is_l && (b'1'..=b'5').contains(&digit) && !next_is_digit).then(|| Level::ALL[(digit - b'1') as usize])
        })
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "L1" => Ok(Level::L1),
            "L2" => Ok(Level::L2),
            "L3" => Ok(Level::L3),
            "L4" => Ok(Level::L4),
            "L5" => Ok(Level::L5),
            other => Err(format!("unknown lumbar level '{other}'")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infers_level_from_file_names() {
        assert_eq!(Level::infer_from_name("L3.ply"), Some(Level::L3));
        assert_eq!(Level::infer_from_name("case_07_l5_vb.stl"), Some(Level::L5));
        assert_eq!(Level::infer_from_name("L12.stl"), None);
        assert_eq!(Level::infer_from_name("vertebra.stl"), None);
    }

    #[test]
    fn parses_and_displays() {
        assert_eq!("l4".parse::<Level>().unwrap(), Level::L4);
        assert!("T12".parse::<Level>().is_err());
        assert_eq!(Level::L2.to_string(), "L2");
    }
}
