use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LabelKind {
    Room,
    Restroom,
    Stair,
}

/// Validated placard label in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalLabel {
    pub kind: LabelKind,
    pub text: String,
}

impl fmt::Display for CanonicalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

static ROOM: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^([0-9])\.?([0-9]{3})$").unwrap());
static RESTROOM: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(MEN|WOMEN|GENDER INCLUSIVE)$").unwrap());
static STAIR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^STAIR([0-9])?$").unwrap());

/// Checks a transcription against the placard grammar: a floor digit, an
/// optional decimal point and a three-digit room number; one of the restroom
/// names; or `STAIR` with an optional single digit. Surrounding whitespace
/// is ignored. Room numbers are canonicalized with the decimal point.
pub fn validate_label(s: &str) -> Option<CanonicalLabel> {
    let s = s.trim();
    if let Some(c) = ROOM.captures(s) {
        return Some(CanonicalLabel {
            kind: LabelKind::Room,
            text: format!("{}.{}", &c[1], &c[2]),
        });
    }
    if RESTROOM.is_match(s) {
        return Some(CanonicalLabel {
            kind: LabelKind::Restroom,
            text: s.to_string(),
        });
    }
    if STAIR.is_match(s) {
        return Some(CanonicalLabel {
            kind: LabelKind::Stair,
            text: s.to_string(),
        });
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn room_without_point_is_canonicalized() {
        let l = validate_label("3112").unwrap();
        assert_eq!(l.kind, LabelKind::Room);
        assert_eq!(l.text, "3.112");
        assert_eq!(validate_label(" 3.112\n").unwrap().text, "3.112");
    }

    #[test]
    fn restrooms_and_stairs() {
        let l = validate_label("GENDER INCLUSIVE").unwrap();
        assert_eq!(
            (l.kind, l.text.as_str()),
            (LabelKind::Restroom, "GENDER INCLUSIVE")
        );
        assert_eq!(validate_label("MEN").unwrap().kind, LabelKind::Restroom);
        assert_eq!(validate_label("WOMEN").unwrap().kind, LabelKind::Restroom);
        assert_eq!(validate_label("STAIR").unwrap().text, "STAIR");
        assert_eq!(validate_label("STAIR2").unwrap().text, "STAIR2");
    }

    #[test]
    fn rejects_near_misses() {
        for s in [
            "31.12",
            "4.12",
            "STAIR12",
            "",
            "3.1124",
            "A.112",
            "GENDER",
            "STAIR 1",
            "GENDER  INCLUSIVE",
            "3,112",
            "٣.112",
        ] {
            assert!(validate_label(s).is_none(), "{s:?} accepted");
        }
        assert!(validate_label("MEN ").is_some());
    }

    #[test]
    fn canonical_text_is_a_fixed_point() {
        for s in [
            "3112",
            "3.112",
            "MEN",
            "STAIR",
            "STAIR7",
            "GENDER INCLUSIVE",
        ] {
            let once = validate_label(s).unwrap();
            let twice = validate_label(&once.text).unwrap();
            assert_eq!(once, twice);
        }
    }
}
