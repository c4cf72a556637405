//! Parallel sentence pairs across every language combination.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::embeddings::EmbeddingSet;
use super::types::LanguageId;

/// Aligned sentence ids for one language pair; `lang_a < lang_b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParallelPairSet {
    pub lang_a: LanguageId,
    pub lang_b: LanguageId,
    pub pairs: Vec<(String, String)>,
}

impl ParallelPairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Same pairs with the languages swapped.
    pub fn swapped(&self) -> ParallelPairSet {
        ParallelPairSet {
            lang_a: self.lang_b.clone(),
            lang_b: self.lang_a.clone(),
            pairs: self.pairs.iter().map(|(a, b)| (b.clone(), a.clone())).collect(),
        }
    }
}

/// Ids that could not be paired, per (source language, other language).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PairingReport {
    pub excluded: BTreeMap<(LanguageId, LanguageId), usize>,
}

impl PairingReport {
    pub fn total_excluded(&self) -> usize {
        self.excluded.values().sum()
    }

    pub fn warnings(&self) -> Vec<String> {
        self.excluded
            .iter()
            .filter(|(_, &n)| n > 0)
            .map(|((a, b), n)| format!("{n} '{a}' ids have no '{b}' counterpart and were excluded"))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct PairDataset {
    pub sets: Vec<ParallelPairSet>,
    pub report: PairingReport,
}

impl PairDataset {
    pub fn total_pairs(&self) -> usize {
        self.sets.iter().map(|s| s.len()).sum()
    }

    pub fn get(&self, a: &LanguageId, b: &LanguageId) -> Option<ParallelPairSet> {
        self.sets.iter().find_map(|s| {
            if &s.lang_a == a && &s.lang_b == b {
                Some(s.clone())
            } else if &s.lang_a == b && &s.lang_b == a {
                Some(s.swapped())
            } else {
                None
            }
        })
    }
}

/// How sentences in different languages are matched.
#[derive(Clone, Debug)]
pub enum Alignment {
    /// Identical ids denote translations of each other.
    IdEquality,
    /// Explicit pairs, e.g. read from a pair manifest.
    Manifest(Vec<ParallelPairSet>),
}

/// Builds one pair set per unordered language combination.
///
/// `sets` lists each language with its sentence ids. Ids without a partner
/// are skipped and counted in the report rather than failing the build.
pub fn build_pair_dataset(sets: &[(LanguageId, &[String])], alignment: &Alignment) -> Result<PairDataset> {
    let mut langs: Vec<&LanguageId> = sets.iter().map(|(l, _)| l).collect();
    langs.sort();
    langs.dedup();
    if langs.len() != sets.len() {
        return Err(Error::Data("a language appears more than once".into()));
    }
    if sets.len() < 2 {
        return Err(Error::Data(format!("need at least 2 languages to pair, got {}", sets.len())));
    }
    let mut by_lang: BTreeMap<&LanguageId, &[String]> = BTreeMap::new();
    for (l, ids) in sets {
        by_lang.insert(l, ids);
    }

    let mut out = Vec::new();
    let mut report = PairingReport::default();
    let ordered: Vec<(&LanguageId, &[String])> = by_lang.iter().map(|(l, ids)| (*l, *ids)).collect();
    for i in 0..ordered.len() {
        for j in (i + 1)..ordered.len() {
            let (la, ids_a) = ordered[i];
            let (lb, ids_b) = ordered[j];
            let set_a: HashSet<&str> = ids_a.iter().map(String::as_str).collect();
            let set_b: HashSet<&str> = ids_b.iter().map(String::as_str).collect();
            let pairs = match alignment {
                Alignment::IdEquality => {
                    let pairs: Vec<(String, String)> = ids_a
                        .iter()
                        .filter(|id| set_b.contains(id.as_str()))
                        .map(|id| (id.clone(), id.clone()))
                        .collect();
                    report.excluded.insert((la.clone(), lb.clone()), ids_a.len() - pairs.len());
                    let b_unmatched = ids_b.iter().filter(|id| !set_a.contains(id.as_str())).count();
                    report.excluded.insert((lb.clone(), la.clone()), b_unmatched);
                    pairs
                }
                Alignment::Manifest(manifest) => {
                    let mut seen = HashSet::new();
                    let mut pairs = Vec::new();
                    let mut missing = 0usize;
                    for p in manifest {
                        let oriented = if &p.lang_a == la && &p.lang_b == lb {
                            p.clone()
                        } else if &p.lang_a == lb && &p.lang_b == la {
                            p.swapped()
                        } else {
                            continue;
                        };
                        for (a, b) in oriented.pairs {
                            if !set_a.contains(a.as_str()) || !set_b.contains(b.as_str()) {
                                missing += 1;
                                continue;
                            }
                            if seen.insert((a.clone(), b.clone())) {
                                pairs.push((a, b));
                            }
                        }
                    }
                    report.excluded.insert((la.clone(), lb.clone()), missing);
                    pairs
                }
            };
            out.push(ParallelPairSet { lang_a: la.clone(), lang_b: lb.clone(), pairs });
        }
    }
    Ok(PairDataset { sets: out, report })
}

/// Convenience wrapper over embedding sets of one split.
pub fn build_pairs_for_sets(sets: &[&EmbeddingSet], alignment: &Alignment) -> Result<PairDataset> {
    let view: Vec<(LanguageId, &[String])> = sets.iter().map(|s| (s.language.clone(), s.ids.as_slice())).collect();
    build_pair_dataset(&view, alignment)
}

const PAIR_HEADER: &str = "lang_a\tlang_b\tid_a\tid_b";

pub fn format_pairs(sets: &[ParallelPairSet]) -> String {
    let mut s = String::from(PAIR_HEADER);
    s.push('\n');
    for set in sets {
        for (a, b) in &set.pairs {
            let _ = writeln!(s, "{}\t{}\t{a}\t{b}", set.lang_a, set.lang_b);
        }
    }
    s
}

pub fn parse_pairs(text: &str) -> Result<Vec<ParallelPairSet>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == PAIR_HEADER => {}
        _ => return Err(Error::Parse { line: 1, msg: format!("expected header '{PAIR_HEADER}'") }),
    }
    let mut grouped: BTreeMap<(LanguageId, LanguageId), Vec<(String, String)>> = BTreeMap::new();
    for (i, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::Parse { line: i + 1, msg: format!("expected 4 columns, found {}", cols.len()) });
        }
        let la = LanguageId::new(cols[0]).map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
        let lb = LanguageId::new(cols[1]).map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
        if la == lb {
            return Err(Error::Parse { line: i + 1, msg: "lang_a and lang_b must differ".into() });
        }
        grouped.entry((la, lb)).or_default().push((cols[2].to_string(), cols[3].to_string()));
    }
    Ok(grouped.into_iter().map(|((lang_a, lang_b), pairs)| ParallelPairSet { lang_a, lang_b, pairs }).collect())
}

pub fn write_pairs(sets: &[ParallelPairSet], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_pairs(sets))?;
    Ok(())
}

pub fn read_pairs(path: impl AsRef<Path>) -> Result<Vec<ParallelPairSet>> {
    parse_pairs(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lang(c: &str) -> LanguageId {
        LanguageId::new(c).unwrap()
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("t{i}")).collect()
    }

    #[test]
    fn two_languages_one_sentence() {
        let a = ids(1);
        let ds = build_pair_dataset(&[(lang("en"), &a), (lang("de"), &a)], &Alignment::IdEquality).unwrap();
        assert_eq!(ds.sets.len(), 1);
        assert_eq!(ds.total_pairs(), 1);
        assert_eq!(ds.sets[0].lang_a.as_str(), "de");
    }

    #[test]
    fn three_languages_ten_sentences() {
        let a = ids(10);
        let sets = [(lang("en"), a.as_slice()), (lang("fr"), &a), (lang("nl"), &a)];
        let ds = build_pair_dataset(&sets, &Alignment::IdEquality).unwrap();
        // C(3,2) * 10, counted by enumeration
        let mut expected = 0;
        for i in 0..3 {
            for _j in (i + 1)..3 {
                expected += a.len();
            }
        }
        assert_eq!(ds.total_pairs(), expected);
        assert_eq!(ds.total_pairs(), 30);
    }

    #[test]
    fn ragged_ids_are_skipped_and_reported() {
        let a = ids(5);
        let b: Vec<String> = ids(3);
        let ds = build_pair_dataset(&[(lang("en"), &a), (lang("fr"), &b)], &Alignment::IdEquality).unwrap();
        assert_eq!(ds.total_pairs(), 3);
        assert_eq!(ds.report.total_excluded(), 2);
        assert_eq!(ds.report.warnings().len(), 1);
    }

    #[test]
    fn fewer_than_two_languages() {
        let a = ids(2);
        assert!(build_pair_dataset(&[(lang("en"), &a)], &Alignment::IdEquality).is_err());
    }

    #[test]
    fn symmetric_under_input_order() {
        let a = ids(4);
        let b = ids(6);
        let x = build_pair_dataset(&[(lang("en"), &a), (lang("fr"), &b)], &Alignment::IdEquality).unwrap();
        let y = build_pair_dataset(&[(lang("fr"), &b), (lang("en"), &a)], &Alignment::IdEquality).unwrap();
        assert_eq!(x.sets, y.sets);
    }

    #[test]
    fn manifest_alignment_dedups_and_skips() {
        let en = vec!["e1".to_string(), "e2".to_string()];
        let fr = vec!["f1".to_string(), "f2".to_string()];
        let manifest = vec![ParallelPairSet {
            lang_a: lang("fr"),
            lang_b: lang("en"),
            pairs: vec![
                ("f1".into(), "e1".into()),
                ("f1".into(), "e1".into()),
                ("f2".into(), "e2".into()),
                ("f9".into(), "e2".into()),
            ],
        }];
        let ds = build_pair_dataset(&[(lang("en"), &en), (lang("fr"), &fr)], &Alignment::Manifest(manifest)).unwrap();
        let set = &ds.sets[0];
        assert_eq!(set.lang_a.as_str(), "en");
        assert_eq!(set.pairs, vec![("e1".to_string(), "f1".to_string()), ("e2".into(), "f2".into())]);
        assert_eq!(ds.report.total_excluded(), 1);
    }

    #[test]
    fn pair_file_round_trip() {
        let a = ids(3);
        let ds = build_pair_dataset(&[(lang("en"), &a), (lang("fr"), &a), (lang("de"), &a)], &Alignment::IdEquality)
            .unwrap();
        let text = format_pairs(&ds.sets);
        assert_eq!(parse_pairs(&text).unwrap(), ds.sets);
        assert!(matches!(parse_pairs("bad\n"), Err(Error::Parse { line: 1, .. })));
        let bad = format!("{PAIR_HEADER}\nen\ten\tx\ty\n");
        assert!(matches!(parse_pairs(&bad), Err(Error::Parse { line: 2, .. })));
    }
}
