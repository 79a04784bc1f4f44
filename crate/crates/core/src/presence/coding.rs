use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CodedUnit, Indicator, PresenceError, Salience};
use crate::agent::{run_bounded, ClientError, CompletionClient, CompletionRequest, MAX_ATTEMPTS};
use crate::forum::ActionRecord;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeEntry {
    pub indicator: Indicator,
    pub category: String,
    pub name: String,
    pub description: String,
}

/// Indicator descriptions fed to the coding prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodingScheme {
    pub entries: Vec<SchemeEntry>,
    pub prompt_template: String,
}

const SCHEME_TSV: &str = include_str!("../../fixtures/coding_scheme.tsv");
const CODING_PROMPT: &str = include_str!("../../fixtures/prompts/coding_prompt.txt");

impl Default for CodingScheme {
    fn default() -> Self {
        Self {
            entries: Self::parse_tsv(SCHEME_TSV).expect("bundled coding scheme is well-formed"),
            prompt_template: CODING_PROMPT.to_string(),
        }
    }
}

impl CodingScheme {
    /// Parses `code, category, name, description` rows after a header line.
    /// Every indicator must appear exactly once.
    pub fn parse_tsv(tsv: &str) -> Result<Vec<SchemeEntry>, PresenceError> {
        let mut entries = Vec::new();
        for (i, line) in tsv.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(PresenceError::Line { line: i + 1, reason: "expected 4 columns".into() });
            }
            let indicator = cols[0]
                .parse()
                .map_err(|e: PresenceError| PresenceError::Line { line: i + 1, reason: e.to_string() })?;
            entries.push(SchemeEntry {
                indicator,
                category: cols[1].to_string(),
                name: cols[2].to_string(),
                description: cols[3].to_string(),
            });
        }
        for ind in Indicator::ALL {
            let n = entries.iter().filter(|e| e.indicator == ind).count();
            if n != 1 {
                return Err(PresenceError::Validation(format!("indicator {ind} appears {n} times in scheme")));
            }
        }
        Ok(entries)
    }

    /// Loads `coding_scheme.tsv` and `coding_prompt.txt` from `dir` when present.
    pub fn load_dir(dir: &Path) -> Result<Self, PresenceError> {
        let mut scheme = Self::default();
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| PresenceError::Io(e.to_string()));
        let tsv = dir.join("coding_scheme.tsv");
        if tsv.exists() {
            scheme.entries = Self::parse_tsv(&read(&tsv)?)?;
        }
        let prompt = dir.join("coding_prompt.txt");
        if prompt.exists() {
            scheme.prompt_template = read(&prompt)?;
        }
        Ok(scheme)
    }

    pub fn render(&self) -> String {
        self.entries
            .iter()
            .map(|e| format!("{} ({}, {}): {}", e.indicator, e.category, e.name, e.description))
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn prompt_for(&self, text: &str) -> String {
        self.prompt_template.replace("{scheme}", &self.render()).replace("{text}", text).trim_end().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodingParams {
    pub model_name: String,
    pub temperature: f64,
    pub parallelism: usize,
}

impl Default for CodingParams {
    fn default() -> Self {
        Self { model_name: "gpt-5.2".into(), temperature: 0.7, parallelism: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodingRejection {
    pub record_id: String,
    pub reason: String,
    pub raw_output: String,
    /// True when the failure was in transport and the record can be retried.
    pub retryable: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CodingOutcome {
    /// Records coded successfully, including those with no units.
    pub coded_records: Vec<String>,
    pub units: Vec<CodedUnit>,
    pub rejections: Vec<CodingRejection>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CodingParseError {
    /// Output does not follow the line format; worth a retry.
    Malformed(String),
    /// A well-formed line names a code outside the vocabulary.
    UnknownCode(String),
}

fn looks_like_code(token: &str) -> bool {
    let t: Vec<char> = token.chars().filter(|c| *c != '-').collect();
    t.len() == 3 && t[0].is_ascii_alphabetic() && t[1].is_ascii_alphabetic() && t[2].is_ascii_digit()
}

/// Parses `CODE salience` lines, or `NONE`.
pub fn parse_coding_output(raw: &str) -> Result<Vec<(Indicator, Salience)>, CodingParseError> {
    let trimmed = raw.trim();
    if trimmed.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    if trimmed.is_empty() {
        return Err(CodingParseError::Malformed("empty output".into()));
    }
    let mut out = Vec::new();
    for line in trimmed.lines().map(|l| l.trim().trim_start_matches(['-', '*']).trim()) {
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(CodingParseError::Malformed(format!("unexpected line: {line}")));
        }
        let indicator = match tokens[0].parse::<Indicator>() {
            Ok(i) => i,
            Err(_) if looks_like_code(tokens[0]) => return Err(CodingParseError::UnknownCode(tokens[0].to_string())),
            Err(_) => return Err(CodingParseError::Malformed(format!("unexpected line: {line}"))),
        };
        let salience =
            tokens[1].parse::<Salience>().map_err(|_| CodingParseError::Malformed(format!("bad salience: {line}")))?;
        out.push((indicator, salience));
    }
    Ok(out)
}

enum RecordResult {
    Coded(Vec<CodedUnit>),
    Rejected(CodingRejection),
}

const FORMAT_REMINDER: &str =
    "Answer only with lines of the form `CODE salience` (for example `OC2 primary`), or NONE.";

fn code_one(
    record: &ActionRecord,
    client: &dyn CompletionClient,
    scheme: &CodingScheme,
    params: &CodingParams,
) -> RecordResult {
    let text = record.text.as_deref().unwrap_or_default().trim();
    if text.is_empty() {
        return RecordResult::Coded(Vec::new());
    }
    let mut request = CompletionRequest {
        system_prompt: String::new(),
        user_messages: vec![scheme.prompt_for(text)],
        model_name: params.model_name.clone(),
        temperature: params.temperature,
    };
    let reject = |reason: String, raw_output: String, retryable: bool| {
        RecordResult::Rejected(CodingRejection { record_id: record.record_id.clone(), reason, raw_output, retryable })
    };
    let mut last = String::new();
    let mut last_reason = String::new();
    for attempt in 1..=MAX_ATTEMPTS {
        let raw = match client.complete(&request) {
            Ok(raw) => raw,
            Err(ClientError::Transport(e)) | Err(ClientError::Decode(e)) => return reject(e, last, true),
            Err(e @ ClientError::Status { .. }) => return reject(e.to_string(), last, true),
        };
        match parse_coding_output(&raw) {
            Ok(pairs) => {
                return RecordResult::Coded(
                    pairs
                        .into_iter()
                        .map(|(indicator, salience)| CodedUnit {
                            record_id: record.record_id.clone(),
                            indicator,
                            salience,
                        })
                        .collect(),
                )
            }
            Err(CodingParseError::UnknownCode(code)) => {
                return reject(format!("unknown indicator code: {code}"), raw, false)
            }
            Err(CodingParseError::Malformed(reason)) => {
                last = raw;
                last_reason = reason;
                if attempt == 1 {
                    request.user_messages.push(FORMAT_REMINDER.to_string());
                }
            }
        }
    }
    reject(format!("unparseable after {MAX_ATTEMPTS} attempts: {last_reason}"), last, false)
}

/// Codes text-bearing records with the model client. Invalid output is
/// rejected per record with the raw output kept; other records proceed.
pub fn llm_code_records(
    records: &[ActionRecord],
    client: &dyn CompletionClient,
    scheme: &CodingScheme,
    params: &CodingParams,
) -> CodingOutcome {
    let eligible: Vec<&ActionRecord> = records.iter().filter(|r| r.action_type.has_text()).collect();
    let results = run_bounded(&eligible, params.parallelism, |r| code_one(r, client, scheme, params));
    let mut outcome = CodingOutcome::default();
    for (record, result) in eligible.iter().zip(results) {
        match result {
            RecordResult::Coded(units) => {
                outcome.coded_records.push(record.record_id.clone());
                outcome.units.extend(units);
            }
            RecordResult::Rejected(r) => outcome.rejections.push(r),
        }
    }
    outcome
}
