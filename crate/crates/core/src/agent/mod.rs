//! Role-conditioned reply generation: prompt assembly, the completion client
//! contract, structured-output parsing with bounded retries.

mod client;
mod prompt;
mod roles;
pub mod stub;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timefmt;

pub use client::{ClientError, CompletionClient, CompletionRequest, HttpCompletionClient};
pub use prompt::{assemble_prompt, GenerationParams, PromptBundle, PromptTemplates};
pub use roles::{FrameworkProfile, Role, RoleFramework, RoleSpec};

/// Total attempts per candidate: the first call plus two format-reminder retries.
pub const MAX_ATTEMPTS: usize = 3;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AgentError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("generation failed (retryable): {0}")]
    Generation(#[from] ClientError),
    #[error("unparseable output after {attempts} attempts")]
    UnparseableOutput { attempts: usize, raw_output: String },
    #[error("role {role} is not enabled in the active framework")]
    RoleViolation { role: String, raw_output: String },
}

impl AgentError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, AgentError::Generation(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateStatus {
    Pending,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResponse {
    pub candidate_id: String,
    pub target_id: String,
    pub role: Role,
    pub text: String,
    #[serde(with = "timefmt")]
    pub generated_at: DateTime<Utc>,
    /// Model output of the successful attempt, byte for byte.
    pub raw_output: String,
    pub status: CandidateStatus,
}

/// Extracts `(reply_role, reply_text)` from a `<reply>` block. Returns `None`
/// when the block or either field is missing or the text is empty.
pub fn parse_reply_block(raw: &str) -> Option<(String, String)> {
    let start = raw.find("<reply>")? + "<reply>".len();
    let end = start + raw[start..].find("</reply>")?;
    let block = &raw[start..end];

    let mut role = None;
    let mut text: Option<String> = None;
    for line in block.lines() {
        let trimmed = line.trim_start();
        if let Some(rest) = trimmed.strip_prefix("reply_role:") {
            if text.is_none() {
                role = Some(rest.trim().to_string());
                continue;
            }
        }
        if let Some(rest) = trimmed.strip_prefix("reply_text:") {
            if text.is_none() {
                text = Some(rest.trim_start().to_string());
                continue;
            }
        }
        if let Some(t) = text.as_mut() {
            t.push('\n');
            t.push_str(line);
        }
    }
    let role = role.filter(|r| !r.is_empty())?;
    let text = text.map(|t| t.trim().to_string()).filter(|t| !t.is_empty())?;
    Some((role, text))
}

/// Calls the client and parses the structured reply, retrying with a format
/// reminder on unparseable output.
pub fn generate_candidate(
    bundle: &PromptBundle,
    client: &dyn CompletionClient,
    framework: &RoleFramework,
    reminder: &str,
    candidate_id: &str,
    target_id: &str,
    generated_at: DateTime<Utc>,
) -> Result<CandidateResponse, AgentError> {
    let mut request = CompletionRequest {
        system_prompt: bundle.system_prompt.clone(),
        user_messages: vec![bundle.role_guidance.clone(), bundle.user_prompt.clone()],
        model_name: bundle.generation_params.model_name.clone(),
        temperature: bundle.generation_params.temperature,
    };
    let mut last_raw = String::new();
    for attempt in 1..=MAX_ATTEMPTS {
        let raw = client.complete(&request)?;
        match parse_reply_block(&raw) {
            Some((role_name, text)) => {
                let role = match role_name.parse::<Role>() {
                    Ok(role) if framework.is_enabled(role) => role,
                    _ => return Err(AgentError::RoleViolation { role: role_name, raw_output: raw }),
                };
                return Ok(CandidateResponse {
                    candidate_id: candidate_id.to_string(),
                    target_id: target_id.to_string(),
                    role,
                    text,
                    generated_at,
                    raw_output: raw,
                    status: CandidateStatus::Pending,
                });
            }
            None => {
                tracing::warn!(candidate_id, attempt, "unparseable completion");
                last_raw = raw;
                if attempt == 1 {
                    request.user_messages.push(reminder.trim_end().to_string());
                }
            }
        }
    }
    Err(AgentError::UnparseableOutput { attempts: MAX_ATTEMPTS, raw_output: last_raw })
}

/// Runs `work` over `items` with at most `parallelism` worker threads.
/// Output order matches input order regardless of scheduling.
pub fn run_bounded<T, R, F>(items: &[T], parallelism: usize, work: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    let workers = parallelism.max(1).min(items.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let result = work(&items[i]);
                *slots[i].lock().expect("result slot poisoned") = Some(result);
            });
        }
    });
    slots.into_iter().map(|s| s.into_inner().expect("result slot poisoned").expect("every item processed")).collect()
}

#[cfg(test)]
mod tests {
    use chrono::TimeZone;

    use super::stub::ScriptedClient;
    use super::*;

    fn bundle() -> PromptBundle {
        PromptBundle {
            system_prompt: "persona".into(),
            role_guidance: "guidance".into(),
            user_prompt: "Title: x".into(),
            generation_params: GenerationParams::default(),
        }
    }

    fn now() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2025, 12, 1, 0, 0, 0).unwrap()
    }

    fn gen(client: &ScriptedClient) -> Result<CandidateResponse, AgentError> {
        let fw = RoleFramework::profile(FrameworkProfile::GuideAmplifier);
        generate_candidate(&bundle(), client, &fw, "use the block", "cand-1", "p1", now())
    }

    #[test]
    fn guide_reply_becomes_pending_candidate() {
        let raw = "<reply>\nreply_role: Guide\nreply_text: What made you pick that task?\n</reply>";
        let c = gen(&ScriptedClient::new([raw])).unwrap();
        assert_eq!(c.role, Role::Guide);
        assert_eq!(c.status, CandidateStatus::Pending);
        assert_eq!(c.text, "What made you pick that task?");
        assert_eq!(c.raw_output, raw);
    }

    #[test]
    fn unknown_role_is_violation_not_remapped() {
        let client = ScriptedClient::new(["<reply>\nreply_role: Mentor\nreply_text: hi\n</reply>"]);
        assert!(matches!(gen(&client), Err(AgentError::RoleViolation { role, .. }) if role == "Mentor"));
        assert_eq!(client.calls(), 1);
    }

    #[test]
    fn disabled_role_is_violation() {
        let client = ScriptedClient::new(["<reply>\nreply_role: Empathizer\nreply_text: hi\n</reply>"]);
        assert!(matches!(gen(&client), Err(AgentError::RoleViolation { .. })));
    }

    #[test]
    fn prose_three_times_is_unparseable() {
        let client = ScriptedClient::new(["just prose", "more prose", "still prose"]);
        match gen(&client) {
            Err(AgentError::UnparseableOutput { attempts, raw_output }) => {
                assert_eq!(attempts, 3);
                assert_eq!(raw_output, "still prose");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(client.calls(), 3);
        let requests = client.requests();
        assert_eq!(requests[0].user_messages.len(), 2);
        assert_eq!(requests[1].user_messages.last().unwrap(), "use the block");
        assert_eq!(requests[2].user_messages.len(), 3);
    }

    #[test]
    fn recovers_on_second_attempt() {
        let client =
            ScriptedClient::new(["oops", "<reply>reply_role: Amplifier\nreply_text: Nice lesson flow\n</reply>"]);
        assert_eq!(gen(&client).unwrap().role, Role::Amplifier);
    }

    #[test]
    fn transport_failure_is_retryable_error() {
        let client = ScriptedClient::new(Vec::<String>::new());
        let err = gen(&client).unwrap_err();
        assert!(err.is_retryable());
    }

    #[test]
    fn multiline_reply_text_is_kept() {
        let (role, text) =
            parse_reply_block("noise <reply>\nreply_role: Guide\nreply_text: line one\nline two\n</reply> tail")
                .unwrap();
        assert_eq!(role, "Guide");
        assert_eq!(text, "line one\nline two");
        assert!(parse_reply_block("<reply>reply_role: Guide\nreply_text:   \n</reply>").is_none());
    }

    #[test]
    fn bounded_runner_preserves_order() {
        let items: Vec<usize> = (0..50).collect();
        let out = run_bounded(&items, 4, |i| i * 2);
        assert_eq!(out, items.iter().map(|i| i * 2).collect::<Vec<_>>());
    }
}
