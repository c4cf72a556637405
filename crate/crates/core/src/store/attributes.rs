//! Attribute word lists used to build debiasing data.
//!
//! On disk a list is a UTF-8 text file with one entry per line. Counterfactual
//! pairings live in an optional sidecar with one `i<TAB>j` index pair per line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::types::{BiasType, LanguageId};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttributeList {
    pub language: LanguageId,
    pub bias_type: BiasType,
    pub entries: Vec<String>,
    /// Counterfactual swaps such as he↔she, as indices into `entries`.
    pub pairing: Option<Vec<(usize, usize)>>,
}

impl AttributeList {
    pub fn new(
        language: LanguageId,
        bias_type: BiasType,
        entries: Vec<String>,
        pairing: Option<Vec<(usize, usize)>>,
    ) -> Result<Self> {
        let list = AttributeList { language, bias_type, entries, pairing };
        list.validate()?;
        Ok(list)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Data(format!("{} {} attribute list is empty", self.language, self.bias_type)));
        }
        if let Some(p) = &self.pairing {
            let n = self.entries.len();
            if let Some((i, j)) = p.iter().find(|(i, j)| *i >= n || *j >= n) {
                return Err(Error::Data(format!("pairing ({i}, {j}) out of range for {n} entries")));
            }
        }
        Ok(())
    }

    pub fn is_paired(&self) -> bool {
        self.pairing.as_ref().is_some_and(|p| !p.is_empty())
    }

    /// Distinct entries in first-occurrence order.
    pub fn distinct_terms(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.as_str()) {
                out.push(e);
            }
        }
        out
    }

    /// Paired terms as strings.
    pub fn pairs(&self) -> Vec<(&str, &str)> {
        self.pairing.iter().flatten().map(|&(i, j)| (self.entries[i].as_str(), self.entries[j].as_str())).collect()
    }
}

pub fn parse_entries(text: &str) -> Vec<String> {
    text.lines().map(|l| l.trim()).filter(|l| !l.is_empty()).map(str::to_string).collect()
}

pub fn parse_pairing(text: &str) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split('\t');
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            return Err(Error::Parse { line: i + 1, msg: "expected two tab-separated indices".into() });
        };
        let parse = |s: &str| {
            s.trim().parse::<usize>().map_err(|e| Error::Parse { line: i + 1, msg: format!("bad index '{s}': {e}") })
        };
        out.push((parse(a)?, parse(b)?));
    }
    Ok(out)
}

pub fn format_pairing(pairing: &[(usize, usize)]) -> String {
    let mut s = String::new();
    for (a, b) in pairing {
        let _ = writeln!(s, "{a}\t{b}");
    }
    s
}

/// Reads `list_path` and, when given and present, its pairing sidecar.
pub fn read_attribute_list(
    language: LanguageId,
    bias_type: BiasType,
    list_path: impl AsRef<Path>,
    pairing_path: Option<&Path>,
) -> Result<AttributeList> {
    let entries = parse_entries(&fs::read_to_string(list_path)?);
    let pairing = match pairing_path {
        Some(p) if p.exists() => Some(parse_pairing(&fs::read_to_string(p)?)?),
        _ => None,
    };
    AttributeList::new(language, bias_type, entries, pairing)
}

pub fn write_attribute_list(
    list: &AttributeList,
    list_path: impl AsRef<Path>,
    pairing_path: Option<&Path>,
) -> Result<()> {
    list.validate()?;
    let mut text = list.entries.join("\n");
    text.push('\n');
    fs::write(list_path, text)?;
    if let (Some(path), Some(p)) = (pairing_path, &list.pairing) {
        fs::write(path, format_pairing(p))?;
    }
    Ok(())
}

macro_rules! bundled {
    ($($lang:literal),+) => {
        fn bundled_text(lang: &str, bias: BiasType) -> Option<(&'static str, Option<&'static str>)> {
            match (lang, bias) {
                $(
                    ($lang, BiasType::Gender) => Some((
                        include_str!(concat!("../../data/attributes/", $lang, "_gender.txt")),
                        Some(include_str!(concat!("../../data/attributes/", $lang, "_gender.pairs"))),
                    )),
                    ($lang, BiasType::Race) => Some((
                        include_str!(concat!("../../data/attributes/", $lang, "_race.txt")),
                        None,
                    )),
                    ($lang, BiasType::Religion) => Some((
                        include_str!(concat!("../../data/attributes/", $lang, "_religion.txt")),
                        None,
                    )),
                )+
                _ => None,
            }
        }

        /// Languages with bundled attribute lists.
        pub const BUNDLED_LANGUAGES: &[&str] = &[$($lang),+];
    };
}

bundled!("en", "fr", "de", "nl");

/// The attribute list shipped with the crate for `language` and `bias_type`.
pub fn bundled_attribute_list(language: &LanguageId, bias_type: BiasType) -> Result<AttributeList> {
    let (list, pairs) = bundled_text(language.as_str(), bias_type)
        .ok_or_else(|| Error::Data(format!("no bundled {bias_type} attribute list for '{language}'")))?;
    let pairing = pairs.map(parse_pairing).transpose()?;
    AttributeList::new(language.clone(), bias_type, parse_entries(list), pairing)
}
