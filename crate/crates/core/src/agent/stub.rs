//! Deterministic clients for tests, demos and reproducible pipeline runs.

use std::collections::VecDeque;
use std::sync::Mutex;

use super::{ClientError, CompletionClient, CompletionRequest};

/// Replays a fixed list of outputs in order and records every request.
/// Runs out with a transport error.
#[derive(Debug, Default)]
pub struct ScriptedClient {
    outputs: Mutex<VecDeque<String>>,
    requests: Mutex<Vec<CompletionRequest>>,
}

impl ScriptedClient {
    pub fn new<I, S>(outputs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self { outputs: Mutex::new(outputs.into_iter().map(Into::into).collect()), requests: Mutex::default() }
    }

    pub fn calls(&self) -> usize {
        self.requests.lock().expect("request log poisoned").len()
    }

    pub fn requests(&self) -> Vec<CompletionRequest> {
        self.requests.lock().expect("request log poisoned").clone()
    }
}

impl CompletionClient for ScriptedClient {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError> {
        self.requests.lock().expect("request log poisoned").push(request.clone());
        self.outputs
            .lock()
            .expect("output script poisoned")
            .pop_front()
            .ok_or_else(|| ClientError::Transport("scripted client exhausted".into()))
    }
}

/// 64-bit FNV-1a, used to derive stable pseudo-choices from prompt text.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn request_hash(request: &CompletionRequest) -> u64 {
    let mut joined = request.system_prompt.clone();
    for m in &request.user_messages {
        joined.push('\u{1f}');
        joined.push_str(m);
    }
    fnv1a(joined.as_bytes())
}

/// Answers reply-generation prompts with a well-formed block whose role and
/// wording depend only on the request content.
#[derive(Debug, Clone)]
pub struct StubReplyClient {
    roles: Vec<String>,
}

impl StubReplyClient {
    /// `roles` is the set the stub chooses from, normally the enabled roles.
    pub fn new<I, S>(roles: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let roles: Vec<String> = roles.into_iter().map(Into::into).collect();
        assert!(!roles.is_empty(), "stub needs at least one role");
        Self { roles }
    }
}

const OPENERS: [&str; 4] = [
    "Thanks for sharing this.",
    "This is a useful angle.",
    "I like how concrete this is.",
    "Good point to raise here.",
];

const PROMPTS: [&str; 4] = [
    "What would you try first in your own class?",
    "Could you say more about how students reacted?",
    "How might others here adapt this to a different subject?",
    "Which part felt hardest to put into practice?",
];

impl CompletionClient for StubReplyClient {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError> {
        let h = request_hash(request);
        let role = &self.roles[(h % self.roles.len() as u64) as usize];
        let opener = OPENERS[((h >> 16) % 4) as usize];
        let prompt = PROMPTS[((h >> 32) % 4) as usize];
        Ok(format!("<reply>\nreply_role: {role}\nreply_text: {opener} {prompt}\n</reply>"))
    }
}

/// Answers presence-coding prompts with `CODE salience` lines chosen from
/// the text being coded (everything after the final `Record:` marker).
#[derive(Debug, Clone, Default)]
pub struct StubCoderClient;

const CODES: [&str; 14] =
    ["AF1", "AF2", "OC1", "OC2", "NC1", "NC2", "PT1", "PT2", "EX1", "EX2", "IN1", "IN2", "RC1", "RC2"];

impl CompletionClient for StubCoderClient {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError> {
        let body = request.user_messages.last().map(String::as_str).unwrap_or_default();
        let text = body.rsplit_once("Record:").map(|(_, t)| t.trim()).unwrap_or(body.trim());
        if text.is_empty() {
            return Ok("NONE".into());
        }
        let h = fnv1a(text.as_bytes());
        let n = (h % 3) as usize;
        if n == 0 {
            return Ok("NONE".into());
        }
        let mut lines = Vec::new();
        for i in 0..n {
            let code = CODES[((h >> (8 + 8 * i)) % 14) as usize];
            let salience = if (h >> (40 + i)) & 1 == 0 { "primary" } else { "secondary" };
            lines.push(format!("{code} {salience}"));
        }
        Ok(lines.join("\n"))
    }
}
