//! Per-sentence labels and counterfactual groups for fitting debias transforms.
//!
//! TSV with header `id<TAB>label<TAB>group`; `-` marks an absent value.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::embeddings::EmbeddingSet;

pub const ANNOTATION_HEADER: &str = "id\tlabel\tgroup";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Annotation {
    pub id: String,
    /// Protected-attribute class, e.g. `male` / `female`.
    pub label: Option<String>,
    /// Counterfactual group: variants of one source sentence share it.
    pub group: Option<String>,
}

pub fn parse_annotations(text: &str) -> Result<Vec<Annotation>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == ANNOTATION_HEADER => {}
        _ => return Err(Error::Parse { line: 1, msg: format!("expected header '{ANNOTATION_HEADER}'") }),
    }
    let opt = |s: &str| (s != "-" && !s.is_empty()).then(|| s.to_string());
    let mut out = Vec::new();
    for (i, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::Parse { line: i + 1, msg: format!("expected 3 columns, found {}", cols.len()) });
        }
        out.push(Annotation { id: cols[0].to_string(), label: opt(cols[1]), group: opt(cols[2]) });
    }
    Ok(out)
}

pub fn format_annotations(rows: &[Annotation]) -> String {
    let mut s = String::from(ANNOTATION_HEADER);
    s.push('\n');
    for a in rows {
        let _ = writeln!(s, "{}\t{}\t{}", a.id, a.label.as_deref().unwrap_or("-"), a.group.as_deref().unwrap_or("-"));
    }
    s
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<Annotation>> {
    parse_annotations(&fs::read_to_string(path)?)
}

pub fn write_annotations(rows: &[Annotation], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_annotations(rows))?;
    Ok(())
}

/// Row indices of `set` grouped by annotation group, in first-seen order.
pub fn groups_for(set: &EmbeddingSet, rows: &[Annotation]) -> Result<Vec<Vec<usize>>> {
    let index = set.index();
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for a in rows {
        let Some(g) = &a.group else { continue };
        let &row = index
            .get(a.id.as_str())
            .ok_or_else(|| Error::Data(format!("annotated id '{}' not in embedding set", a.id)))?;
        if !groups.contains_key(g) {
            order.push(g.clone());
        }
        groups.entry(g.clone()).or_default().push(row);
    }
    Ok(order.into_iter().map(|g| groups.remove(&g).unwrap_or_default()).collect())
}

/// Row indices and integer class labels (classes sorted by name).
pub fn labels_for(set: &EmbeddingSet, rows: &[Annotation]) -> Result<(Vec<usize>, Vec<usize>, Vec<String>)> {
    let index = set.index();
    let mut classes: Vec<String> = rows.iter().filter_map(|a| a.label.clone()).collect();
    classes.sort();
    classes.dedup();
    let mut idx = Vec::new();
    let mut labels = Vec::new();
    for a in rows {
        let Some(l) = &a.label else { continue };
        let &row = index
            .get(a.id.as_str())
            .ok_or_else(|| Error::Data(format!("annotated id '{}' not in embedding set", a.id)))?;
        idx.push(row);
        labels.push(classes.binary_search(l).expect("class collected above"));
    }
    Ok((idx, labels, classes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Matrix;
    use crate::store::types::{LanguageId, Split};

    #[test]
    fn round_trip_and_grouping() {
        let rows = vec![
            Annotation { id: "a".into(), label: Some("male".into()), group: Some("g1".into()) },
            Annotation { id: "b".into(), label: Some("female".into()), group: Some("g1".into()) },
            Annotation { id: "c".into(), label: None, group: Some("g0".into()) },
            Annotation { id: "d".into(), label: Some("male".into()), group: None },
        ];
        let text = format_annotations(&rows);
        assert_eq!(parse_annotations(&text).unwrap(), rows);

        let set = EmbeddingSet::new(
            LanguageId::new("en").unwrap(),
            Split::Train,
            Matrix::zeros(4, 2),
            vec!["a".into(), "b".into(), "c".into(), "d".into()],
        )
        .unwrap();
        assert_eq!(groups_for(&set, &rows).unwrap(), vec![vec![0, 1], vec![2]]);
        let (idx, labels, classes) = labels_for(&set, &rows).unwrap();
        assert_eq!(idx, vec![0, 1, 3]);
        assert_eq!(classes, vec!["female".to_string(), "male".to_string()]);
        assert_eq!(labels, vec![1, 0, 1]);
    }

    #[test]
    fn unknown_id_is_error() {
        let set =
            EmbeddingSet::new(LanguageId::new("en").unwrap(), Split::Train, Matrix::zeros(1, 1), vec!["a".into()])
                .unwrap();
        let rows = vec![Annotation { id: "zz".into(), label: Some("x".into()), group: None }];
        assert!(labels_for(&set, &rows).is_err());
    }
}
