//! Counterfactual data augmentation over raw sentences.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::numcore::Matrix;
use crate::store::AttributeList;

use super::GroupKind;

/// Turns sentences into embeddings; implemented by whatever model is at hand.
pub trait SentenceEmbedder {
    fn embed(&mut self, sentences: &[String]) -> Result<Matrix>;
}

impl<F> SentenceEmbedder for F
where
    F: FnMut(&[String]) -> Result<Matrix>,
{
    fn embed(&mut self, sentences: &[String]) -> Result<Matrix> {
        self(sentences)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CdaSets {
    pub kind: GroupKind,
    /// Sentences of each group, aligned with `groups`.
    pub texts: Vec<Vec<String>>,
    pub groups: Vec<Matrix>,
    /// Ids of sentences without any attribute term.
    pub excluded: Vec<String>,
}

impl CdaSets {
    pub fn warnings(&self) -> Vec<String> {
        if self.excluded.is_empty() {
            Vec::new()
        } else {
            vec![format!("{} sentences contain no attribute term and were excluded", self.excluded.len())]
        }
    }
}

/// A token split into `(prefix, core, suffix)` around its alphanumeric part.
fn split_token(tok: &str) -> (&str, &str, &str) {
    let start = tok.find(|c: char| c.is_alphanumeric()).unwrap_or(tok.len());
    let end = tok
        .rfind(|c: char| c.is_alphanumeric())
        .map_or(start, |i| i + tok[i..].chars().next().map_or(1, char::len_utf8));
    (&tok[..start], &tok[start..end], &tok[end..])
}

/// Attribute term matched by `tok`, trying the bare word and the word with
/// its trailing period (for abbreviations such as `mr.`).
fn match_term<'a>(tok: &'a str, known: &dyn Fn(&str) -> bool) -> Option<(String, &'a str, &'a str)> {
    let (pre, core, suf) = split_token(tok);
    if core.is_empty() {
        return None;
    }
    let lower = core.to_lowercase();
    if let Some(rest) = suf.strip_prefix('.') {
        let dotted = format!("{lower}.");
        if known(&dotted) {
            return Some((dotted, pre, rest));
        }
    }
    known(&lower).then_some((lower, pre, suf))
}

fn match_case(template: &str, word: &str) -> String {
    let letters: Vec<char> = template.chars().filter(|c| c.is_alphabetic()).collect();
    if letters.len() > 1 && letters.iter().all(|c| c.is_uppercase()) {
        return word.to_uppercase();
    }
    if letters.first().is_some_and(|c| c.is_uppercase()) {
        let mut cs = word.chars();
        return cs.next().map_or_else(String::new, |f| f.to_uppercase().chain(cs).collect());
    }
    word.to_string()
}

/// Two-way swap table; the first rule mentioning a term wins.
fn swap_table(attrs: &AttributeList) -> HashMap<String, String> {
    let mut map = HashMap::new();
    for (a, b) in attrs.pairs() {
        let (a, b) = (a.to_lowercase(), b.to_lowercase());
        map.entry(a.clone()).or_insert_with(|| b.clone());
        map.entry(b).or_insert(a);
    }
    map
}

/// The sentence with every paired attribute term swapped at once, or `None`
/// when it contains no paired term.
pub fn counterfactual(sentence: &str, attrs: &AttributeList) -> Option<String> {
    swap_with(sentence, &swap_table(attrs))
}

fn swap_with(sentence: &str, table: &HashMap<String, String>) -> Option<String> {
    let known = |t: &str| table.contains_key(t);
    let mut changed = false;
    let mut out = String::with_capacity(sentence.len());
    let mut rest = sentence;
    while !rest.is_empty() {
        let ws = rest.find(|c: char| !c.is_whitespace()).unwrap_or(rest.len());
        out.push_str(&rest[..ws]);
        rest = &rest[ws..];
        let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
        let tok = &rest[..end];
        rest = &rest[end..];
        match match_term(tok, &known) {
            Some((term, pre, suf)) => {
                let core_end = tok.len() - suf.len();
                let repl = &table[&term];
                out.push_str(pre);
                out.push_str(&match_case(&tok[pre.len()..core_end], repl));
                out.push_str(suf);
                changed = true;
            }
            None => out.push_str(tok),
        }
    }
    changed.then_some(out)
}

/// Attribute terms occurring in `sentence`, in order of first occurrence.
pub fn terms_in(sentence: &str, attrs: &AttributeList) -> Vec<String> {
    let set: std::collections::HashSet<String> = attrs.entries.iter().map(|e| e.to_lowercase()).collect();
    let known = |t: &str| set.contains(t);
    let mut out: Vec<String> = Vec::new();
    for tok in sentence.split_whitespace() {
        if let Some((t, _, _)) = match_term(tok, &known) {
            if !out.contains(&t) {
                out.push(t);
            }
        }
    }
    out
}

/// Builds embedding groups for fitting a bias subspace.
///
/// Paired lists give one group per sentence holding it and its swapped
/// variant. Unpaired lists give one group per attribute term holding every
/// sentence that mentions it. Sentences mentioning no term are excluded.
pub fn build_cda_sets(
    sentences: &[(String, String)],
    attrs: &AttributeList,
    embedder: &mut dyn SentenceEmbedder,
) -> Result<CdaSets> {
    let kind = if attrs.is_paired() { GroupKind::Counterfactual } else { GroupKind::PerTerm };
    let mut excluded = Vec::new();
    let mut texts: Vec<Vec<String>> = Vec::new();

    match kind {
        GroupKind::Counterfactual => {
            let table = swap_table(attrs);
            for (id, s) in sentences {
                match swap_with(s, &table) {
                    Some(v) => texts.push(vec![s.clone(), v]),
                    None => excluded.push(id.clone()),
                }
            }
        }
        GroupKind::PerTerm => {
            let order: Vec<String> = attrs.distinct_terms().iter().map(|t| t.to_lowercase()).collect();
            let mut by_term: Vec<Vec<String>> = vec![Vec::new(); order.len()];
            for (id, s) in sentences {
                let found = terms_in(s, attrs);
                if found.is_empty() {
                    excluded.push(id.clone());
                }
                for t in found {
                    if let Some(i) = order.iter().position(|o| *o == t) {
                        by_term[i].push(s.clone());
                    }
                }
            }
            texts = by_term.into_iter().filter(|g| !g.is_empty()).collect();
        }
    }

    let flat: Vec<String> = texts.iter().flatten().cloned().collect();
    let mut groups = Vec::with_capacity(texts.len());
    if !flat.is_empty() {
        let all = embedder.embed(&flat)?;
        if all.rows() != flat.len() {
            return Err(Error::shape(
                "build_cda_sets",
                format!("embedder returned {} rows for {} sentences", all.rows(), flat.len()),
            ));
        }
        let mut at = 0;
        for g in &texts {
            let idx: Vec<usize> = (at..at + g.len()).collect();
            groups.push(all.select_rows(&idx));
            at += g.len();
        }
    }
    Ok(CdaSets { kind, texts, groups, excluded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{bundled_attribute_list, BiasType, LanguageId};

    fn en(b: BiasType) -> AttributeList {
        bundled_attribute_list(&LanguageId::new("en").unwrap(), b).unwrap()
    }

    /// Embeds a sentence as its length and count of 'e's.
    fn toy(s: &[String]) -> Result<Matrix> {
        let rows: Vec<[f32; 2]> = s.iter().map(|t| [t.len() as f32, t.matches('e').count() as f32]).collect();
        Matrix::from_rows(&rows)
    }

    #[test]
    fn single_swap_gives_pair_group() {
        let out = build_cda_sets(&[("1".into(), "he is a doctor".into())], &en(BiasType::Gender), &mut toy).unwrap();
        assert_eq!(out.kind, GroupKind::Counterfactual);
        assert_eq!(out.texts, vec![vec!["he is a doctor".to_string(), "she is a doctor".to_string()]]);
        assert_eq!(out.groups[0].shape(), (2, 2));
    }

    #[test]
    fn five_sentence_fixture_swaps_simultaneously() {
        let attrs = en(BiasType::Gender);
        // expected variants written out by applying the rules by hand
        let cases = [
            ("He told his sister.", Some("She told her brother.")),
            ("the king and the queen", Some("the queen and the king")),
            ("Mr. Smith met a bride", Some("Mrs. Smith met a groom")),
            ("BOYS will be boys", Some("GIRLS will be girls")),
            ("nobody here", None),
        ];
        for (s, want) in cases {
            assert_eq!(counterfactual(s, &attrs).as_deref(), want, "{s}");
        }
        let sentences: Vec<(String, String)> =
            cases.iter().enumerate().map(|(i, (s, _))| (i.to_string(), s.to_string())).collect();
        let out = build_cda_sets(&sentences, &attrs, &mut toy).unwrap();
        assert_eq!(out.groups.len(), 4);
        assert_eq!(out.excluded, vec!["4".to_string()]);
        assert_eq!(out.warnings().len(), 1);
    }

    #[test]
    fn unpaired_lists_group_by_term() {
        let attrs = en(BiasType::Religion);
        let first = attrs.entries[0].clone();
        let second = attrs.entries[1].clone();
        let sentences = vec![
            ("a".to_string(), format!("a {first} walked in")),
            ("b".to_string(), format!("the {second} spoke")),
            ("c".to_string(), format!("{first} and {second}")),
            ("d".to_string(), "unrelated".to_string()),
        ];
        let out = build_cda_sets(&sentences, &attrs, &mut toy).unwrap();
        assert_eq!(out.kind, GroupKind::PerTerm);
        assert_eq!(out.texts.len(), 2);
        assert_eq!(out.texts[0].len(), 2);
        assert_eq!(out.texts[1].len(), 2);
        assert_eq!(out.excluded, vec!["d".to_string()]);
    }

    #[test]
    fn empty_corpus() {
        let out = build_cda_sets(&[], &en(BiasType::Gender), &mut toy).unwrap();
        assert!(out.groups.is_empty() && out.excluded.is_empty());
    }

    #[test]
    fn token_splitting() {
        assert_eq!(split_token("(he),"), ("(", "he", "),"));
        assert_eq!(split_token("..."), ("...", "", ""));
        assert_eq!(split_token("königin!"), ("", "königin", "!"));
    }
}
