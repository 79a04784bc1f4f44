//! Seeded synthetic forum logs for demos, benchmarks and end-to-end tests.

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::forum::{ActionRecord, ActionType};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub n_learners: usize,
    pub n_records: usize,
    #[serde(with = "crate::timefmt")]
    pub start: DateTime<Utc>,
    pub days: i64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            n_learners: 40,
            n_records: 500,
            start: Utc.with_ymd_and_hms(2025, 11, 3, 0, 0, 0).unwrap(),
            days: 14,
            seed: 7,
        }
    }
}

const TOPICS: [&str; 8] = [
    "flipped classroom",
    "peer assessment",
    "project-based learning",
    "formative feedback",
    "inquiry tasks",
    "digital portfolios",
    "group discussion norms",
    "lesson study",
];

const FRAGMENTS: [&str; 10] = [
    "I tried this with my students last week",
    "our school has a similar policy",
    "I am not sure the evidence supports it",
    "maybe we could combine both approaches",
    "thank you all for the thoughtful replies",
    "the hardest part is keeping everyone engaged",
    "here is a rubric I built for it",
    "what would you change for younger learners",
    "this connects to what we read earlier",
    "I agree, and I would add a reflection step",
];

struct Comment {
    id: String,
    author: String,
    post: usize,
    replies: Vec<(String, String)>,
}

/// Generates a valid, timestamp-ordered log. The same parameters always
/// give the same records.
pub fn synthetic_log(p: &SynthParams) -> Vec<ActionRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let learners: Vec<String> = (1..=p.n_learners.max(1)).map(|i| format!("u{i:03}")).collect();
    let span_minutes = (p.days.max(1) * 24 * 60) as f64;
    let step = span_minutes / p.n_records.max(1) as f64;

    let mut posts: Vec<(String, String)> = Vec::new();
    let mut comments: Vec<Comment> = Vec::new();
    let mut out = Vec::with_capacity(p.n_records);
    let mut clock = 0.0_f64;

    for n in 0..p.n_records {
        clock += step * rng.random_range(0.5..1.5);
        let ts = p.start + Duration::seconds((clock.min(span_minutes - 1.0) * 60.0) as i64);
        let actor = learners[rng.random_range(0..learners.len())].clone();
        let text = format!(
            "On {}: {}.",
            TOPICS[rng.random_range(0..TOPICS.len())],
            FRAGMENTS[rng.random_range(0..FRAGMENTS.len())]
        );
        let roll: f64 = rng.random();
        let action = if posts.is_empty() || roll < 0.15 {
            ActionType::Posted
        } else if comments.is_empty() || roll < 0.50 {
            ActionType::Commented
        } else if roll < 0.78 {
            ActionType::Replied
        } else if roll < 0.92 {
            ActionType::LikedComment
        } else {
            ActionType::LikedReply
        };
        let has_replies = comments.iter().any(|c| !c.replies.is_empty());
        let action = if action == ActionType::LikedReply && !has_replies { ActionType::LikedComment } else { action };

        let mut rec = ActionRecord {
            record_id: format!("r{:05}", n + 1),
            timestamp: ts,
            actor_id: actor.clone(),
            action_type: action,
            post_id: String::new(),
            post_author_id: String::new(),
            comment_id: None,
            comment_author_id: None,
            reply_id: None,
            reply_author_id: None,
            text: None,
            parent_reply_id: None,
            title: None,
        };
        match action {
            ActionType::Posted => {
                let id = format!("p{:04}", posts.len() + 1);
                rec.post_id = id.clone();
                rec.post_author_id = actor.clone();
                rec.title = Some(format!("Thoughts on {}", TOPICS[posts.len() % TOPICS.len()]));
                rec.text = Some(text);
                posts.push((id, actor));
            }
            ActionType::Commented => {
                // Recent posts draw most of the attention.
                let lo = posts.len().saturating_sub(12);
                let pi = rng.random_range(lo..posts.len());
                let (post_id, post_author) = posts[pi].clone();
                let id = format!("c{:04}", comments.len() + 1);
                rec.post_id = post_id;
                rec.post_author_id = post_author;
                rec.comment_id = Some(id.clone());
                rec.comment_author_id = Some(actor.clone());
                rec.text = Some(text);
                comments.push(Comment { id, author: actor, post: pi, replies: Vec::new() });
            }
            ActionType::Replied => {
                let lo = comments.len().saturating_sub(20);
                let ci = rng.random_range(lo..comments.len());
                let n_replies: usize = comments.iter().map(|c| c.replies.len()).sum();
                let c = &mut comments[ci];
                let (post_id, post_author) = posts[c.post].clone();
                let id = format!("y{:04}", n_replies + 1);
                rec.post_id = post_id;
                rec.post_author_id = post_author;
                rec.comment_id = Some(c.id.clone());
                rec.comment_author_id = Some(c.author.clone());
                rec.reply_id = Some(id.clone());
                rec.reply_author_id = Some(actor.clone());
                rec.text = Some(text);
                if !c.replies.is_empty() && rng.random_bool(0.5) {
                    let parent = &c.replies[rng.random_range(0..c.replies.len())];
                    rec.parent_reply_id = Some(parent.0.clone());
                }
                c.replies.push((id, actor));
            }
            ActionType::LikedComment => {
                let c = &comments[rng.random_range(0..comments.len())];
                let (post_id, post_author) = posts[c.post].clone();
                rec.post_id = post_id;
                rec.post_author_id = post_author;
                rec.comment_id = Some(c.id.clone());
                rec.comment_author_id = Some(c.author.clone());
            }
            ActionType::LikedReply => {
                let with: Vec<&Comment> = comments.iter().filter(|c| !c.replies.is_empty()).collect();
                let c = with[rng.random_range(0..with.len())];
                let (reply_id, reply_author) = c.replies[rng.random_range(0..c.replies.len())].clone();
                let (post_id, post_author) = posts[c.post].clone();
                rec.post_id = post_id;
                rec.post_author_id = post_author;
                rec.comment_id = Some(c.id.clone());
                rec.comment_author_id = Some(c.author.clone());
                rec.reply_id = Some(reply_id);
                rec.reply_author_id = Some(reply_author);
            }
        }
        out.push(rec);
    }
    out
}

/// One JSON object per line.
pub fn to_ndjson(records: &[ActionRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("records serialize"));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forum::ForumStore;

    #[test]
    fn log_is_valid_and_reproducible() {
        let p = SynthParams::default();
        let a = synthetic_log(&p);
        assert_eq!(a.len(), 500);
        assert_eq!(a, synthetic_log(&p));
        let mut store = ForumStore::new();
        let ndjson = to_ndjson(&a);
        let (report, _) = store.ingest_lines(ndjson.lines());
        assert_eq!(report.accepted, 500, "{:?}", report.rejected.first());
        assert!(a.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
    }

    #[test]
    fn covers_every_action_type() {
        let a = synthetic_log(&SynthParams::default());
        for t in [
            ActionType::Posted,
            ActionType::Commented,
            ActionType::Replied,
            ActionType::LikedComment,
            ActionType::LikedReply,
        ] {
            assert!(a.iter().any(|r| r.action_type == t), "{t}");
        }
    }
}
