use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{ArtifactKind, ForumError, ForumStore};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostSummary {
    pub post_id: String,
    pub title: String,
    pub content: String,
    pub author_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainEntry {
    pub id: String,
    pub author_id: String,
    pub text: String,
}

/// A target artifact together with its post and ancestor chain
/// (top-level comment first, target last).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreadContext {
    pub post: PostSummary,
    pub comment_chain: Vec<ChainEntry>,
    pub target_kind: ArtifactKind,
}

impl ThreadContext {
    pub fn target_id(&self) -> &str {
        self.comment_chain.last().map(|e| e.id.as_str()).unwrap_or(&self.post.post_id)
    }

    /// Depth in the reply tree; the post itself is depth 0.
    pub fn depth(&self) -> usize {
        self.comment_chain.len()
    }

    /// Chain entries above the target.
    pub fn upstream(&self) -> &[ChainEntry] {
        match self.comment_chain.split_last() {
            Some((_, rest)) => rest,
            None => &[],
        }
    }
}

impl ForumStore {
    /// Resolves a post, comment or reply into its thread context.
    pub fn resolve_thread(&self, target_id: &str) -> Result<ThreadContext, ForumError> {
        let (kind, record) = self.artifact(target_id).ok_or_else(|| ForumError::NotFound(target_id.to_string()))?;
        let integrity =
            |missing: &str| ForumError::Integrity { target: target_id.to_string(), missing: missing.to_string() };

        let mut chain = Vec::new();
        if kind != ArtifactKind::Post {
            chain.push(entry(target_id, record));
        }
        if kind == ArtifactKind::Reply {
            let mut seen = HashSet::from([target_id.to_string()]);
            let mut current = record;
            while let Some(parent) = current.parent_reply_id.as_deref() {
                if !seen.insert(parent.to_string()) {
                    return Err(integrity(parent));
                }
                match self.artifact(parent) {
                    Some((ArtifactKind::Reply, parent_record)) => {
                        chain.push(entry(parent, parent_record));
                        current = parent_record;
                    }
                    _ => return Err(integrity(parent)),
                }
            }
            let comment_id = record.comment_id.as_deref().unwrap_or_default();
            match self.artifact(comment_id) {
                Some((ArtifactKind::Comment, comment)) => chain.push(entry(comment_id, comment)),
                _ => return Err(integrity(comment_id)),
            }
        }
        chain.reverse();

        let post_record = match self.artifact(&record.post_id) {
            Some((ArtifactKind::Post, r)) => r,
            _ => return Err(integrity(&record.post_id)),
        };
        let content = post_record.text.clone().unwrap_or_default();
        let title =
            post_record.title.clone().unwrap_or_else(|| content.lines().next().unwrap_or_default().trim().to_string());
        Ok(ThreadContext {
            post: PostSummary {
                post_id: record.post_id.clone(),
                title,
                content,
                author_id: post_record.actor_id.clone(),
            },
            comment_chain: chain,
            target_kind: kind,
        })
    }
}

fn entry(id: &str, record: &super::ActionRecord) -> ChainEntry {
    ChainEntry { id: id.to_string(), author_id: record.actor_id.clone(), text: record.text.clone().unwrap_or_default() }
}
