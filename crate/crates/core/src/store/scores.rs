//! Score records and evaluation pairs exchanged with the LLM-side scorer.
//!
//! Both are UTF-8 TSV with a fixed header row. Parse errors carry the
//! 1-based line number of the offending row.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::types::{BiasType, LanguageId};

pub const SCORE_HEADER: [&str; 7] = ["pair_id", "lang", "bias_type", "sample", "logp_stereo", "logp_anti", "condition"];

pub const EVAL_PAIR_HEADER: [&str; 6] = ["pair_id", "lang", "bias_type", "sample", "sent_stereo", "sent_anti"];

/// Number of CrowS-Pairs style samples per language.
pub const SAMPLES_PER_LANGUAGE: u8 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    pub pair_id: String,
    pub language: LanguageId,
    pub bias_type: BiasType,
    pub sample_index: u8,
    /// Natural-log probability of the stereotypical sentence.
    pub logp_stereo: f64,
    pub logp_anti: f64,
    pub condition: String,
}

impl PreferenceRecord {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("logp_stereo", self.logp_stereo), ("logp_anti", self.logp_anti)] {
            if !v.is_finite() {
                return Err(Error::Data(format!("{name} must be finite")));
            }
            if v > 0.0 {
                return Err(Error::Data("log-probability must be ≤ 0".into()));
            }
        }
        if self.sample_index >= SAMPLES_PER_LANGUAGE {
            return Err(Error::Data(format!(
                "sample index {} out of range 0..{SAMPLES_PER_LANGUAGE}",
                self.sample_index
            )));
        }
        if self.condition.is_empty() || self.condition.contains(['\t', '\n']) {
            return Err(Error::Data("condition label must be non-empty and tab-free".into()));
        }
        Ok(())
    }
}

/// One stereotypical / anti-stereotypical sentence pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalPair {
    pub pair_id: String,
    pub language: LanguageId,
    pub bias_type: BiasType,
    pub sample_index: u8,
    pub sent_stereo: String,
    pub sent_anti: String,
}

impl EvalPair {
    pub fn validate(&self) -> Result<()> {
        if self.sent_stereo == self.sent_anti {
            return Err(Error::Data(format!("pair {}: sentences are identical", self.pair_id)));
        }
        if self.sample_index >= SAMPLES_PER_LANGUAGE {
            return Err(Error::Data(format!("pair {}: sample index out of range", self.pair_id)));
        }
        Ok(())
    }
}

fn rows<'a>(text: &'a str, header: &[&str]) -> Result<impl Iterator<Item = (usize, Vec<&'a str>)>> {
    let mut lines = text.lines().enumerate();
    let first = lines.next().map(|(_, l)| l.trim_end_matches('\r'));
    let got: Vec<&str> = first.unwrap_or("").split('\t').collect();
    if got != header {
        let missing: Vec<&str> = header.iter().filter(|h| !got.contains(h)).copied().collect();
        return Err(Error::Parse {
            line: 1,
            msg: if missing.is_empty() {
                format!("header must be '{}'", header.join("\\t"))
            } else {
                format!("missing column(s): {}", missing.join(", "))
            },
        });
    }
    Ok(lines
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.is_empty())
        .map(|(n, l)| (n, l.split('\t').collect())))
}

fn field<T: std::str::FromStr>(line: usize, name: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| Error::Parse { line, msg: format!("bad {name} '{v}': {e}") })
}

fn check_width(line: usize, cols: &[&str], header: &[&str]) -> Result<()> {
    if cols.len() != header.len() {
        let msg = if cols.len() < header.len() {
            format!("missing column '{}'", header[cols.len()])
        } else {
            format!("expected {} columns, found {}", header.len(), cols.len())
        };
        return Err(Error::Parse { line, msg });
    }
    Ok(())
}

pub fn parse_scores(text: &str) -> Result<Vec<PreferenceRecord>> {
    let mut out = Vec::new();
    for (line, cols) in rows(text, &SCORE_HEADER)? {
        check_width(line, &cols, &SCORE_HEADER)?;
        let rec = PreferenceRecord {
            pair_id: cols[0].to_string(),
            language: field(line, "lang", cols[1])?,
            bias_type: field(line, "bias_type", cols[2])?,
            sample_index: field(line, "sample", cols[3])?,
            logp_stereo: field(line, "logp_stereo", cols[4])?,
            logp_anti: field(line, "logp_anti", cols[5])?,
            condition: cols[6].to_string(),
        };
        rec.validate().map_err(|e| Error::Parse {
            line,
            msg: match e {
                Error::Data(m) => m,
                other => other.to_string(),
            },
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn format_scores(records: &[PreferenceRecord]) -> Result<String> {
    let mut s = SCORE_HEADER.join("\t");
    s.push('\n');
    for r in records {
        r.validate()?;
        // `{}` on f64 is the shortest representation that round-trips.
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.pair_id, r.language, r.bias_type, r.sample_index, r.logp_stereo, r.logp_anti, r.condition
        );
    }
    Ok(s)
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<PreferenceRecord>> {
    parse_scores(&fs::read_to_string(path)?)
}

pub fn write_scores(records: &[PreferenceRecord], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_scores(records)?)?;
    Ok(())
}

pub fn parse_eval_pairs(text: &str) -> Result<Vec<EvalPair>> {
    let mut out = Vec::new();
    for (line, cols) in rows(text, &EVAL_PAIR_HEADER)? {
        check_width(line, &cols, &EVAL_PAIR_HEADER)?;
        let p = EvalPair {
            pair_id: cols[0].to_string(),
            language: field(line, "lang", cols[1])?,
            bias_type: field(line, "bias_type", cols[2])?,
            sample_index: field(line, "sample", cols[3])?,
            sent_stereo: cols[4].to_string(),
            sent_anti: cols[5].to_string(),
        };
        p.validate().map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        out.push(p);
    }
    Ok(out)
}

pub fn format_eval_pairs(pairs: &[EvalPair]) -> Result<String> {
    let mut s = EVAL_PAIR_HEADER.join("\t");
    s.push('\n');
    for p in pairs {
        p.validate()?;
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}",
            p.pair_id, p.language, p.bias_type, p.sample_index, p.sent_stereo, p.sent_anti
        );
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> String {
        SCORE_HEADER.join("\t")
    }

    #[test]
    fn parses_single_row() {
        let text = format!("{}\np1\ten\tgender\t0\t-12.5\t-13.1\tbase\n", header());
        let recs = parse_scores(&text).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].logp_stereo, -12.5);
        assert_eq!(recs[0].bias_type, BiasType::Gender);
        assert_eq!(recs[0].condition, "base");
    }

    #[test]
    fn positive_logp_rejected_with_line() {
        let text = format!("{}\np1\ten\tgender\t0\t-1\t-2\tbase\np2\ten\tgender\t0\t3.2\t-2\tbase\n", header());
        match parse_scores(&text) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 3);
                assert_eq!(msg, "log-probability must be ≤ 0");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_bias_type_and_missing_column() {
        let text = format!("{}\np1\ten\tage\t0\t-1\t-2\tbase\n", header());
        assert!(matches!(parse_scores(&text), Err(Error::Parse { line: 2, .. })));
        let text = format!("{}\np1\ten\tgender\t0\t-1\t-2\n", header());
        match parse_scores(&text) {
            Err(Error::Parse { line: 2, msg }) => assert!(msg.contains("condition")),
            other => panic!("{other:?}"),
        }
        let text = "pair_id\tlang\tbias_type\tsample\tlogp_stereo\tlogp_anti\n";
        match parse_scores(text) {
            Err(Error::Parse { line: 1, msg }) => assert!(msg.contains("condition")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sample_index_bounds() {
        let text = format!("{}\np1\ten\tgender\t3\t-1\t-2\tbase\n", header());
        assert!(parse_scores(&text).is_err());
    }

    #[test]
    fn round_trip_preserves_values() {
        let recs = vec![PreferenceRecord {
            pair_id: "x".into(),
            language: LanguageId::new("nl").unwrap(),
            bias_type: BiasType::Religion,
            sample_index: 2,
            logp_stereo: -0.1 - 0.2,
            logp_anti: -1e-300,
            condition: "inlp-latent-en".into(),
        }];
        let text = format_scores(&recs).unwrap();
        assert_eq!(parse_scores(&text).unwrap(), recs);
    }

    #[test]
    fn eval_pairs_round_trip_and_identical_rejected() {
        let pairs = vec![EvalPair {
            pair_id: "e1".into(),
            language: LanguageId::new("de").unwrap(),
            bias_type: BiasType::Gender,
            sample_index: 0,
            sent_stereo: "Gregor war ein erfolgreicher Entrepreneur.".into(),
            sent_anti: "Magdalena war ein erfolgreicher Entrepreneur.".into(),
        }];
        let text = format_eval_pairs(&pairs).unwrap();
        assert_eq!(parse_eval_pairs(&text).unwrap(), pairs);
        let bad = format!("{}\ne\ten\tgender\t0\tsame\tsame\n", EVAL_PAIR_HEADER.join("\t"));
        assert!(parse_eval_pairs(&bad).is_err());
    }
}
