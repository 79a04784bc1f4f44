use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::forum::ForumStore;
use crate::review::PublicationEvent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Direct,
    CoPresence,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Direct => "direct",
            Mode::CoPresence => "co_presence",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionMode {
    pub learner_id: String,
    pub mode: Mode,
    /// Exchange records with the agent for `direct`; the learner's activity
    /// in agent-involved threads for `co_presence`.
    pub evidence: Vec<String>,
}

/// Posts whose threads contain at least one published agent contribution.
pub fn pca_thread_ids<'a>(
    store: &ForumStore,
    publications: impl IntoIterator<Item = &'a PublicationEvent>,
) -> BTreeSet<String> {
    publications.into_iter().filter_map(|p| store.get(&p.record_id)).map(|r| r.post_id.clone()).collect()
}

/// Labels every learner active in an agent-involved thread as `direct`
/// (a comment/reply exchange with the agent in such a thread) or
/// `co_presence`. Learners never seen in those threads are left out.
pub fn classify_interaction_modes<'a>(
    store: &ForumStore,
    publications: impl IntoIterator<Item = &'a PublicationEvent>,
    agent_id: &str,
) -> Vec<InteractionMode> {
    let threads = pca_thread_ids(store, publications);
    let mut activity: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    let mut ties: BTreeMap<&str, Vec<String>> = BTreeMap::new();

    for record in store.records().iter().filter(|r| threads.contains(&r.post_id)) {
        let addressee = if record.action_type.has_text() { store.addressee(record) } else { None };
        if record.actor_id == agent_id {
            if let Some(learner) = addressee.filter(|a| *a != agent_id) {
                ties.entry(learner).or_default().push(record.record_id.clone());
            }
            continue;
        }
        activity.entry(&record.actor_id).or_default().push(record.record_id.clone());
        if addressee == Some(agent_id) {
            ties.entry(&record.actor_id).or_default().push(record.record_id.clone());
        }
    }

    activity
        .into_iter()
        .map(|(learner, acts)| match ties.remove(learner) {
            Some(evidence) => InteractionMode { learner_id: learner.to_string(), mode: Mode::Direct, evidence },
            None => InteractionMode { learner_id: learner.to_string(), mode: Mode::CoPresence, evidence: acts },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use chrono::{TimeZone, Utc};

    use super::*;
    use crate::forum::{ActionRecord, ActionType};

    fn rec(id: &str, actor: &str, kind: ActionType, post: (&str, &str)) -> ActionRecord {
        ActionRecord {
            record_id: id.into(),
            timestamp: Utc.with_ymd_and_hms(2025, 11, 3, 8, 0, 0).unwrap(),
            actor_id: actor.into(),
            action_type: kind,
            post_id: post.0.into(),
            post_author_id: post.1.into(),
            comment_id: None,
            comment_author_id: None,
            reply_id: None,
            reply_author_id: None,
            text: Some("text".into()),
            parent_reply_id: None,
            title: None,
        }
    }

    fn comment(id: &str, actor: &str, post: (&str, &str), cid: &str) -> ActionRecord {
        let mut r = rec(id, actor, ActionType::Commented, post);
        r.comment_id = Some(cid.into());
        r.comment_author_id = Some(actor.into());
        r
    }

    fn reply(id: &str, actor: &str, post: (&str, &str), c: (&str, &str), rid: &str) -> ActionRecord {
        let mut r = rec(id, actor, ActionType::Replied, post);
        r.comment_id = Some(c.0.into());
        r.comment_author_id = Some(c.1.into());
        r.reply_id = Some(rid.into());
        r.reply_author_id = Some(actor.into());
        r
    }

    fn fixture() -> (ForumStore, Vec<PublicationEvent>) {
        let p1 = ("p1", "u1");
        let p2 = ("p2", "u9");
        let store = ForumStore::from_records([
            rec("e1", "u1", ActionType::Posted, p1),
            comment("e2", "u2", p1, "c1"),
            comment("e3", "pca", p1, "c2"),
            reply("e4", "u3", p1, ("c2", "pca"), "r1"),
            rec("e5", "u9", ActionType::Posted, p2),
            comment("e6", "u8", p2, "c3"),
        ])
        .unwrap();
        let publication = PublicationEvent {
            candidate_id: "k1".into(),
            target_id: "p1".into(),
            published_at: Utc.with_ymd_and_hms(2025, 11, 3, 8, 0, 0).unwrap(),
            record_id: "e3".into(),
        };
        (store, vec![publication])
    }

    #[test]
    fn classifies_direct_co_presence_and_excluded() {
        let (store, pubs) = fixture();
        let modes = classify_interaction_modes(&store, &pubs, "pca");
        let by: BTreeMap<_, _> = modes.iter().map(|m| (m.learner_id.as_str(), m)).collect();
        // u1 authored the post the agent commented on.
        assert_eq!(by["u1"].mode, Mode::Direct);
        assert_eq!(by["u3"].mode, Mode::Direct);
        assert_eq!(by["u3"].evidence, ["e4"]);
        assert_eq!(by["u2"].mode, Mode::CoPresence);
        assert!(!by.contains_key("u8"));
        assert!(!by.contains_key("pca"));
    }
}
