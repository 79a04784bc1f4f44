use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::timefmt;

/// Behavioral log action vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionType {
    Posted,
    Commented,
    Replied,
    LikedComment,
    LikedReply,
}

impl ActionType {
    pub fn as_str(self) -> &'static str {
        match self {
            ActionType::Posted => "posted",
            ActionType::Commented => "commented",
            ActionType::Replied => "replied",
            ActionType::LikedComment => "liked_comment",
            ActionType::LikedReply => "liked_reply",
        }
    }

    pub fn parse(raw: &str) -> Option<Self> {
        Some(match raw {
            "posted" => ActionType::Posted,
            "commented" => ActionType::Commented,
            "replied" => ActionType::Replied,
            "liked_comment" => ActionType::LikedComment,
            "liked_reply" => ActionType::LikedReply,
            _ => return None,
        })
    }

    /// Actions that reference a top-level comment.
    pub fn has_comment(self) -> bool {
        !matches!(self, ActionType::Posted)
    }

    pub fn has_reply(self) -> bool {
        matches!(self, ActionType::Replied | ActionType::LikedReply)
    }

    /// Actions that create an artifact with a body.
    pub fn has_text(self) -> bool {
        matches!(self, ActionType::Posted | ActionType::Commented | ActionType::Replied)
    }

    pub fn is_like(self) -> bool {
        matches!(self, ActionType::LikedComment | ActionType::LikedReply)
    }
}

impl fmt::Display for ActionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One validated behavioral log event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub record_id: String,
    #[serde(with = "timefmt")]
    pub timestamp: DateTime<Utc>,
    pub actor_id: String,
    pub action_type: ActionType,
    pub post_id: String,
    pub post_author_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment_author_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply_author_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_reply_id: Option<String>,
    /// Post headline; only meaningful on `posted` records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
}

impl ActionRecord {
    /// Id of the artifact this record creates, if it creates one.
    pub fn created_artifact(&self) -> Option<(ArtifactKind, &str)> {
        match self.action_type {
            ActionType::Posted => Some((ArtifactKind::Post, self.post_id.as_str())),
            ActionType::Commented => self.comment_id.as_deref().map(|c| (ArtifactKind::Comment, c)),
            ActionType::Replied => self.reply_id.as_deref().map(|r| (ArtifactKind::Reply, r)),
            _ => None,
        }
    }

    /// Checks the per-action field presence rules. Returns the rejection reason.
    pub fn check_shape(&self) -> Result<(), String> {
        let a = self.action_type;
        let comment_fields = [self.comment_id.is_some(), self.comment_author_id.is_some()];
        if a.has_comment() && comment_fields.contains(&false) {
            return Err("missing comment fields".into());
        }
        if !a.has_comment() && comment_fields.contains(&true) {
            return Err("unexpected comment fields".into());
        }
        let reply_fields = [self.reply_id.is_some(), self.reply_author_id.is_some()];
        if a.has_reply() && reply_fields.contains(&false) {
            return Err("missing reply fields".into());
        }
        if !a.has_reply() && reply_fields.contains(&true) {
            return Err("unexpected reply fields".into());
        }
        if a.has_text() && self.text.is_none() {
            return Err("missing text".into());
        }
        if !a.has_text() && self.text.is_some() {
            return Err("unexpected text on like".into());
        }
        if self.parent_reply_id.is_some() && a != ActionType::Replied {
            return Err("parent_reply_id only allowed on replied records".into());
        }
        if self.title.is_some() && a != ActionType::Posted {
            return Err("title only allowed on posted records".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Post,
    Comment,
    Reply,
}

/// Wire shape of a log line before validation. Every field is optional so
/// that violations become per-line rejections instead of parse failures.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RawRecord {
    pub record_id: Option<String>,
    pub timestamp: Option<String>,
    pub actor_id: Option<String>,
    pub action_type: Option<String>,
    pub post_id: Option<String>,
    pub post_author_id: Option<String>,
    pub comment_id: Option<String>,
    pub comment_author_id: Option<String>,
    pub reply_id: Option<String>,
    pub reply_author_id: Option<String>,
    pub text: Option<String>,
    pub parent_reply_id: Option<String>,
    pub title: Option<String>,
}

fn non_empty(v: Option<String>) -> Option<String> {
    v.filter(|s| !s.trim().is_empty())
}

impl RawRecord {
    pub fn into_record(self) -> Result<ActionRecord, String> {
        let required = |v: Option<String>, name: &str| non_empty(v).ok_or_else(|| format!("missing field: {name}"));
        let record_id = required(self.record_id, "record_id")?;
        let raw_ts = required(self.timestamp, "timestamp")?;
        let timestamp = timefmt::parse_utc(&raw_ts).ok_or_else(|| "unparsable timestamp".to_string())?;
        let actor_id = required(self.actor_id, "actor_id")?;
        let raw_action = required(self.action_type, "action_type")?;
        let action_type = ActionType::parse(&raw_action).ok_or_else(|| format!("unknown action_type: {raw_action}"))?;
        let record = ActionRecord {
            record_id,
            timestamp,
            actor_id,
            action_type,
            post_id: required(self.post_id, "post_id")?,
            post_author_id: required(self.post_author_id, "post_author_id")?,
            comment_id: non_empty(self.comment_id),
            comment_author_id: non_empty(self.comment_author_id),
            reply_id: non_empty(self.reply_id),
            reply_author_id: non_empty(self.reply_author_id),
            // Text may legitimately be whitespace; only absence matters.
            text: self.text,
            parent_reply_id: non_empty(self.parent_reply_id),
            title: non_empty(self.title),
        };
        record.check_shape()?;
        Ok(record)
    }
}
