//! Language codes, writing systems and the character classes shared by every
//! stage.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory};

/// The twelve supported languages plus `und` for undetermined text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lang {
    As,
    Bn,
    En,
    Gu,
    Hi,
    Kn,
    Ml,
    Mr,
    Or,
    Pa,
    Ta,
    Te,
    Und,
}

impl Lang {
    /// Every determinable language, in code order.
    pub const KNOWN: [Lang; 12] = [
        Lang::As,
        Lang::Bn,
        Lang::En,
        Lang::Gu,
        Lang::Hi,
        Lang::Kn,
        Lang::Ml,
        Lang::Mr,
        Lang::Or,
        Lang::Pa,
        Lang::Ta,
        Lang::Te,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Lang::As => "as",
            Lang::Bn => "bn",
            Lang::En => "en",
            Lang::Gu => "gu",
            Lang::Hi => "hi",
            Lang::Kn => "kn",
            Lang::Ml => "ml",
            Lang::Mr => "mr",
            Lang::Or => "or",
            Lang::Pa => "pa",
            Lang::Ta => "ta",
            Lang::Te => "te",
            Lang::Und => "und",
        }
    }

    /// The script a language is written in. `und` maps to [`Script::Other`].
    pub fn script(self) -> Script {
        match self {
            Lang::As | Lang::Bn => Script::Bengali,
            Lang::En => Script::Latin,
            Lang::Gu => Script::Gujarati,
            Lang::Hi | Lang::Mr => Script::Devanagari,
            Lang::Kn => Script::Kannada,
            Lang::Ml => Script::Malayalam,
            Lang::Or => Script::Oriya,
            Lang::Pa => Script::Gurmukhi,
            Lang::Ta => Script::Tamil,
            Lang::Te => Script::Telugu,
            Lang::Und => Script::Other,
        }
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownLang(pub String);

impl fmt::Display for UnknownLang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown language code `{}`", self.0)
    }
}

impl std::error::Error for UnknownLang {}

impl FromStr for Lang {
    type Err = UnknownLang;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "as" => Lang::As,
            "bn" => Lang::Bn,
            "en" => Lang::En,
            "gu" => Lang::Gu,
            "hi" => Lang::Hi,
            "kn" => Lang::Kn,
            "ml" => Lang::Ml,
            "mr" => Lang::Mr,
            // `od` and `pn` are the spellings used in published comparison tables.
            "or" | "od" => Lang::Or,
            "pa" | "pn" => Lang::Pa,
            "ta" => Lang::Ta,
            "te" => Lang::Te,
            "und" => Lang::Und,
            _ => return Err(UnknownLang(s.to_string())),
        })
    }
}

/// Writing systems distinguished by script detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Script {
    Latin,
    Devanagari,
    Bengali,
    Gurmukhi,
    Gujarati,
    Oriya,
    Tamil,
    Telugu,
    Kannada,
    Malayalam,
    Other,
}

impl Script {
    pub const INDIC: [Script; 9] = [
        Script::Devanagari,
        Script::Bengali,
        Script::Gurmukhi,
        Script::Gujarati,
        Script::Oriya,
        Script::Tamil,
        Script::Telugu,
        Script::Kannada,
        Script::Malayalam,
    ];

    /// Script of a single code point, by Unicode block. Non-letters still map
    /// to their block; callers filter with [`is_letter`].
    pub fn of(c: char) -> Script {
        match c as u32 {
            0x0041..=0x005A
            | 0x0061..=0x007A
            | 0x00C0..=0x024F
            | 0x0250..=0x02AF
            | 0x0300..=0x036F
            | 0x1E00..=0x1EFF
            | 0x2C60..=0x2C7F
            | 0xA720..=0xA7FF
            | 0xAB30..=0xAB6F
            | 0xFF21..=0xFF3A
            | 0xFF41..=0xFF5A => Script::Latin,
            0x0900..=0x097F | 0xA8E0..=0xA8FF | 0x1CD0..=0x1CFF => Script::Devanagari,
            0x0980..=0x09FF => Script::Bengali,
            0x0A00..=0x0A7F => Script::Gurmukhi,
            0x0A80..=0x0AFF => Script::Gujarati,
            0x0B00..=0x0B7F => Script::Oriya,
            0x0B80..=0x0BFF => Script::Tamil,
            0x0C00..=0x0C7F => Script::Telugu,
            0x0C80..=0x0CFF => Script::Kannada,
            0x0D00..=0x0D7F => Script::Malayalam,
            _ => Script::Other,
        }
    }

    /// Languages written in this script.
    pub fn languages(self) -> Vec<Lang> {
        Lang::KNOWN
            .iter()
            .copied()
            .filter(|l| l.script() == self)
            .collect()
    }
}

/// Letters and combining marks. Indic vowel signs and viramas are marks, and
/// they belong to the word they attach to.
pub fn is_letter(c: char) -> bool {
    use GeneralCategory::*;
    matches!(
        get_general_category(c),
        UppercaseLetter
            | LowercaseLetter
            | TitlecaseLetter
            | ModifierLetter
            | OtherLetter
            | NonspacingMark
            | SpacingMark
            | EnclosingMark
    )
}

/// Any Unicode number (decimal digits of every script, numerals, fractions).
pub fn is_number(c: char) -> bool {
    use GeneralCategory::*;
    matches!(
        get_general_category(c),
        DecimalNumber | LetterNumber | OtherNumber
    )
}

pub fn is_decimal_digit(c: char) -> bool {
    get_general_category(c) == GeneralCategory::DecimalNumber
}

/// Sentence and clause punctuation shared by the supported scripts.
pub fn is_sentence_punctuation(c: char) -> bool {
    matches!(
        c,
        '.' | ',' | '!' | '?' | ';' | ':' | '\'' | '"' | '\u{0964}' | '\u{0965}' | '\u{2019}'
            | '\u{2018}' | '\u{201C}' | '\u{201D}' | '(' | ')'
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_round_trip() {
        for l in Lang::KNOWN.iter().chain(std::iter::once(&Lang::Und)) {
            assert_eq!(l.code().parse::<Lang>().unwrap(), *l);
        }
        assert_eq!("od".parse::<Lang>().unwrap(), Lang::Or);
        assert!("zh".parse::<Lang>().is_err());
    }

    #[test]
    fn shared_scripts() {
        assert_eq!(Script::Devanagari.languages(), vec![Lang::Hi, Lang::Mr]);
        assert_eq!(Script::Bengali.languages(), vec![Lang::As, Lang::Bn]);
        assert!(Script::Other.languages().is_empty());
    }

    #[test]
    fn virama_is_a_letter() {
        assert!(is_letter('\u{094D}'));
        assert!(is_letter('\u{0947}'));
        assert!(!is_letter('\u{0964}'));
        assert!(!is_letter('7'));
        assert!(is_number('\u{0967}'));
    }
}
