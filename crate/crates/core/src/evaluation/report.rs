use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{BiasType, LanguageId, PreferenceRecord, SpaceTag, Technique};

use super::score::{score, threshold, BiasScore};

pub const REPORT_VERSION: u32 = 1;
/// Examples per sample in the evaluation set; sets the reference line.
pub const REFERENCE_SAMPLE_SIZE: usize = 40;

/// What a record's `condition` label says about how it was produced.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Condition {
    Base,
    Debiased { technique: Technique, space: SpaceTag, language: LanguageId },
    Other(String),
}

impl Condition {
    pub fn parse(label: &str) -> Condition {
        if label == "base" {
            return Condition::Base;
        }
        let parts: Vec<&str> = label.split('-').collect();
        if let [t, s, l] = parts[..] {
            if let (Ok(technique), Ok(space), Ok(language)) =
                (Technique::from_str(t), SpaceTag::from_str(s), LanguageId::new(l))
            {
                if technique != Technique::Base {
                    return Condition::Debiased { technique, space, language };
                }
            }
        }
        Condition::Other(label.to_string())
    }

    pub fn label(&self) -> String {
        match self {
            Condition::Base => "base".into(),
            Condition::Debiased { technique, space, language } => format!("{technique}-{space}-{language}"),
            Condition::Other(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    pub eval_language: LanguageId,
    pub condition: String,
    pub bias_type: BiasType,
    pub sample_index: u8,
    pub score: BiasScore,
}

/// Mean over samples for one bias type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeAverage {
    pub eval_language: LanguageId,
    pub condition: String,
    pub bias_type: BiasType,
    /// `None` when a sample is missing.
    pub deviation: Option<f64>,
    pub percent_stereo: Option<f64>,
    pub samples: usize,
}

/// Mean over bias types of the per-type averages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionAverage {
    pub eval_language: LanguageId,
    pub condition: String,
    pub deviation: Option<f64>,
    pub significant: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub version: u32,
    pub alpha: f64,
    /// Deviation above which a score is significant at the reference sample size.
    pub reference_deviation: f64,
    pub cells: Vec<CellScore>,
    pub type_averages: Vec<TypeAverage>,
    pub condition_averages: Vec<ConditionAverage>,
    /// Grid cells with no records, as `lang/condition/type/sample`.
    pub missing: Vec<String>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

type CellKey = (LanguageId, String, BiasType, u8);

/// Scores every (language, condition, bias type, sample) group and averages.
///
/// The expected grid is the product of every value seen on each axis; a hole
/// in it is reported as missing and any average depending on it is left
/// empty rather than taken over fewer cells.
pub fn aggregate(records: &[PreferenceRecord], alpha: f64) -> Result<BiasReport> {
    if records.is_empty() {
        return Err(Error::Data("no score records to aggregate".into()));
    }
    let mut groups: BTreeMap<CellKey, Vec<PreferenceRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.language.clone(), r.condition.clone(), r.bias_type, r.sample_index))
            .or_default()
            .push(r.clone());
    }
    // rows keep the order languages first appear in the input
    let mut langs: Vec<LanguageId> = Vec::new();
    for r in records {
        if !langs.contains(&r.language) {
            langs.push(r.language.clone());
        }
    }
    let conds: BTreeSet<String> = groups.keys().map(|k| k.1.clone()).collect();
    let types: BTreeSet<BiasType> = groups.keys().map(|k| k.2).collect();
    let samples: BTreeSet<u8> = groups.keys().map(|k| k.3).collect();

    let mut cells = Vec::new();
    let mut by_key: BTreeMap<CellKey, BiasScore> = BTreeMap::new();
    for (k, rs) in &groups {
        let s = score(rs, alpha)?;
        by_key.insert(k.clone(), s);
        cells.push(CellScore {
            eval_language: k.0.clone(),
            condition: k.1.clone(),
            bias_type: k.2,
            sample_index: k.3,
            score: s,
        });
    }

    let reference = threshold(REFERENCE_SAMPLE_SIZE, alpha)?.threshold_deviation;
    let mut missing = Vec::new();
    let mut type_averages = Vec::new();
    let mut condition_averages = Vec::new();
    for l in &langs {
        for c in &conds {
            let mut per_type = Vec::new();
            let mut complete = true;
            for &t in &types {
                let mut devs = Vec::new();
                let mut pcts = Vec::new();
                for &s in &samples {
                    match by_key.get(&(l.clone(), c.clone(), t, s)) {
                        Some(sc) => {
                            devs.push(sc.deviation);
                            pcts.push(sc.percent_stereo);
                        }
                        None => missing.push(format!("{l}/{c}/{t}/{s}")),
                    }
                }
                let full = devs.len() == samples.len();
                complete &= full;
                let deviation = full.then(|| mean(&devs));
                if let Some(d) = deviation {
                    per_type.push(d);
                }
                type_averages.push(TypeAverage {
                    eval_language: l.clone(),
                    condition: c.clone(),
                    bias_type: t,
                    deviation,
                    percent_stereo: full.then(|| mean(&pcts)),
                    samples: devs.len(),
                });
            }
            let deviation = complete.then(|| mean(&per_type));
            condition_averages.push(ConditionAverage {
                eval_language: l.clone(),
                condition: c.clone(),
                deviation,
                significant: deviation.map(|d| d > reference),
            });
        }
    }
    Ok(BiasReport {
        version: REPORT_VERSION,
        alpha,
        reference_deviation: reference,
        cells,
        type_averages,
        condition_averages,
        missing,
    })
}

/// Two decimals with trailing zeros trimmed: `14.17`, `7.5`, `10`.
pub fn format_score(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

impl BiasReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<BiasReport> {
        let r: BiasReport = serde_json::from_str(text)?;
        if r.version != REPORT_VERSION {
            return Err(Error::Data(format!("unsupported report version {}", r.version)));
        }
        Ok(r)
    }

    /// Evaluation languages in input order.
    pub fn eval_languages(&self) -> Vec<LanguageId> {
        let mut out: Vec<LanguageId> = Vec::new();
        for c in &self.condition_averages {
            if !out.contains(&c.eval_language) {
                out.push(c.eval_language.clone());
            }
        }
        out
    }

    pub fn average(&self, eval: &LanguageId, condition: &str) -> Option<f64> {
        self.condition_averages
            .iter()
            .find(|c| &c.eval_language == eval && c.condition == condition)
            .and_then(|c| c.deviation)
    }

    /// Aligned text table: one row per eval language, columns Base and both
    /// techniques in both spaces, all debiased with `debias_language`.
    pub fn render_table(&self, debias_language: &LanguageId) -> String {
        let columns: Vec<(String, String)> = std::iter::once(("Base".to_string(), "base".to_string()))
            .chain([(Technique::Inlp, "INLP"), (Technique::SentDebias, "SentDebias")].into_iter().flat_map(
                |(t, name)| {
                    [(SpaceTag::Original, "Original"), (SpaceTag::Latent, "Latent")]
                        .into_iter()
                        .map(move |(s, sname)| (format!("{name} {sname}"), format!("{t}-{s}-{debias_language}")))
                },
            ))
            .collect();
        let mut rows: Vec<Vec<String>> =
            vec![std::iter::once("Eval Lang".to_string()).chain(columns.iter().map(|c| c.0.clone())).collect()];
        for l in self.eval_languages() {
            let mut row = vec![l.to_string()];
            for (_, cond) in &columns {
                row.push(self.average(&l, cond).map_or_else(|| "n/a".into(), format_score));
            }
            rows.push(row);
        }
        let widths: Vec<usize> =
            (0..rows[0].len()).map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for (i, r) in rows.iter().enumerate() {
            let line: Vec<String> = r.iter().zip(&widths).map(|(v, &w)| format!("{v:<w$}")).collect();
            let _ = writeln!(out, "{}", line.join(" | ").trim_end());
            if i == 0 {
                let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
                let _ = writeln!(out, "{}", rule.join("-+-"));
            }
        }
        if !self.missing.is_empty() {
            let _ = writeln!(out, "missing cells: {}", self.missing.join(", "));
        }
        out
    }

    /// Long-format CSV of bias-type averages for bar charts.
    pub fn export_plot_data(&self) -> String {
        let mut out = String::from("eval_lang,debias_lang,technique,space,deviation,significant,reference\n");
        for c in &self.condition_averages {
            let (t, s, l) = match Condition::parse(&c.condition) {
                Condition::Base => ("base".to_string(), "-".to_string(), "-".to_string()),
                Condition::Debiased { technique, space, language } => {
                    (technique.to_string(), space.to_string(), language.to_string())
                }
                Condition::Other(o) => (o, "-".into(), "-".into()),
            };
            let dev = c.deviation.map_or_else(String::new, format_score);
            let sig = c.significant.map_or_else(String::new, |b| b.to_string());
            let _ =
                writeln!(out, "{},{l},{t},{s},{dev},{sig},{}", c.eval_language, format_score(self.reference_deviation));
        }
        out
    }
}
