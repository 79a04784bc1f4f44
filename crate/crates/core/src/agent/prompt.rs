use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AgentError, RoleFramework};
use crate::forum::{ArtifactKind, ThreadContext};
use crate::targeting::InterventionTarget;

/// Editable prompt text. Placeholders: `{title}`, `{content}`, `{comment}`,
/// `{thread}`, `{framework}`, `{roles}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplates {
    pub persona: String,
    pub role_guidance: String,
    pub post_template: String,
    pub comment_template: String,
    pub format_contract: String,
    pub format_reminder: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            persona: include_str!("../../fixtures/prompts/persona.txt").to_string(),
            role_guidance: include_str!("../../fixtures/prompts/role_guidance.txt").to_string(),
            post_template: include_str!("../../fixtures/prompts/post_template.txt").to_string(),
            comment_template: include_str!("../../fixtures/prompts/comment_template.txt").to_string(),
            format_contract: include_str!("../../fixtures/prompts/format_contract.txt").to_string(),
            format_reminder: include_str!("../../fixtures/prompts/format_reminder.txt").to_string(),
        }
    }
}

impl PromptTemplates {
    /// Loads templates from a directory; files that are absent keep their
    /// bundled defaults.
    pub fn load_dir(dir: &Path) -> std::io::Result<Self> {
        let mut t = Self::default();
        let slots: [(&str, &mut String); 6] = [
            ("persona.txt", &mut t.persona),
            ("role_guidance.txt", &mut t.role_guidance),
            ("post_template.txt", &mut t.post_template),
            ("comment_template.txt", &mut t.comment_template),
            ("format_contract.txt", &mut t.format_contract),
            ("format_reminder.txt", &mut t.format_reminder),
        ];
        for (name, slot) in slots {
            let path = dir.join(name);
            if path.exists() {
                *slot = std::fs::read_to_string(path)?;
            }
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub model_name: String,
    pub temperature: f64,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self { model_name: "kimi-k2-turbo-preview".into(), temperature: 0.6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_prompt: String,
    pub role_guidance: String,
    pub user_prompt: String,
    pub generation_params: GenerationParams,
}

fn fill(template: &str, pairs: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (key, value) in pairs {
        out = out.replace(&format!("{{{key}}}"), value);
    }
    out.trim_end().to_string()
}

/// Builds the persona, role-guidance and context prompts for one target.
pub fn assemble_prompt(
    target: &InterventionTarget,
    ctx: &ThreadContext,
    framework: &RoleFramework,
    templates: &PromptTemplates,
    params: &GenerationParams,
) -> Result<PromptBundle, AgentError> {
    if ctx.target_id() != target.target_id {
        return Err(AgentError::Argument(format!(
            "thread context resolves {} but target is {}",
            ctx.target_id(),
            target.target_id
        )));
    }
    if ctx.post.post_id != target.root_post_id {
        return Err(AgentError::Argument(format!(
            "thread context root {} does not match target root {}",
            ctx.post.post_id, target.root_post_id
        )));
    }

    let user_prompt = match ctx.target_kind {
        ArtifactKind::Post => {
            fill(&templates.post_template, &[("title", &ctx.post.title), ("content", &ctx.post.content)])
        }
        ArtifactKind::Comment | ArtifactKind::Reply => {
            let comment = ctx.comment_chain.last().map(|e| e.text.as_str()).unwrap_or_default();
            let upstream = ctx.upstream();
            let template: String = if upstream.is_empty() {
                templates.comment_template.lines().filter(|l| !l.contains("{thread}")).collect::<Vec<_>>().join("\n")
            } else {
                templates.comment_template.clone()
            };
            let thread =
                upstream.iter().map(|e| format!("[{}] {}", e.author_id, e.text)).collect::<Vec<_>>().join("\n");
            fill(
                &template,
                &[
                    ("title", &ctx.post.title),
                    ("content", &ctx.post.content),
                    ("comment", comment),
                    ("thread", &thread),
                ],
            )
        }
    };

    let roles = framework.enabled_specs().map(|s| s.name.as_str()).collect::<Vec<_>>().join(", ");
    let guidance = fill(&templates.role_guidance, &[("framework", framework.render_table().trim_end())]);
    let contract = fill(&templates.format_contract, &[("roles", &roles)]);
    Ok(PromptBundle {
        system_prompt: templates.persona.trim_end().to_string(),
        role_guidance: format!("{guidance}\n\n{contract}"),
        user_prompt,
        generation_params: params.clone(),
    })
}
