use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AgentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Guide,
    Amplifier,
    Empathizer,
    #[serde(rename = "Critical_Inquirer")]
    CriticalInquirer,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Guide, Role::Amplifier, Role::Empathizer, Role::CriticalInquirer];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Guide => "Guide",
            Role::Amplifier => "Amplifier",
            Role::Empathizer => "Empathizer",
            Role::CriticalInquirer => "Critical_Inquirer",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s.trim().chars().map(|c| if c == ' ' || c == '-' { '_' } else { c }).collect();
        Role::ALL.into_iter().find(|r| r.as_str().eq_ignore_ascii_case(&norm)).ok_or_else(|| s.trim().to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleSpec {
    pub name: Role,
    pub trigger_characteristics: String,
    pub response_objectives: String,
    pub language_style: String,
}

/// The role table plus the subset the agent may currently choose from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleFramework {
    pub roles: Vec<RoleSpec>,
    pub enabled: BTreeSet<Role>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameworkProfile {
    /// All four roles.
    FourRole,
    /// Guide and Amplifier only.
    #[default]
    GuideAmplifier,
}

const ROLE_TABLE: &str = include_str!("../../fixtures/prompts/roles.tsv");

impl RoleFramework {
    /// Parses a tab-separated role table with a header row.
    pub fn parse_table(tsv: &str) -> Result<Vec<RoleSpec>, AgentError> {
        let mut specs = Vec::new();
        for (i, line) in tsv.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(AgentError::Argument(format!("role table line {}: expected 4 columns", i + 1)));
            }
            let name = cols[0]
                .parse::<Role>()
                .map_err(|r| AgentError::Argument(format!("role table line {}: unknown role {r}", i + 1)))?;
            specs.push(RoleSpec {
                name,
                trigger_characteristics: cols[1].to_string(),
                response_objectives: cols[2].to_string(),
                language_style: cols[3].to_string(),
            });
        }
        Ok(specs)
    }

    pub fn new(roles: Vec<RoleSpec>, enabled: impl IntoIterator<Item = Role>) -> Result<Self, AgentError> {
        let enabled: BTreeSet<Role> = enabled.into_iter().collect();
        if let Some(missing) = enabled.iter().find(|r| !roles.iter().any(|s| s.name == **r)) {
            return Err(AgentError::Argument(format!("enabled role {missing} is not declared")));
        }
        if enabled.is_empty() {
            return Err(AgentError::Argument("at least one role must be enabled".into()));
        }
        Ok(Self { roles, enabled })
    }

    pub fn profile(profile: FrameworkProfile) -> Self {
        let roles = Self::parse_table(ROLE_TABLE).expect("bundled role table is well-formed");
        let enabled: Vec<Role> = match profile {
            FrameworkProfile::FourRole => Role::ALL.to_vec(),
            FrameworkProfile::GuideAmplifier => vec![Role::Guide, Role::Amplifier],
        };
        Self::new(roles, enabled).expect("bundled profile is consistent")
    }

    pub fn is_enabled(&self, role: Role) -> bool {
        self.enabled.contains(&role)
    }

    /// Enabled rows in table order.
    pub fn enabled_specs(&self) -> impl Iterator<Item = &RoleSpec> {
        self.roles.iter().filter(|s| self.enabled.contains(&s.name))
    }

    /// Pipe table of the enabled roles, embedded in the role guidance prompt.
    pub fn render_table(&self) -> String {
        let mut out =
            String::from("| Role | Characteristics of the Target Comment | Response Objectives | Language Style |\n");
        out.push_str("|---|---|---|---|\n");
        for spec in self.enabled_specs() {
            out.push_str(&format!(
                "| {} | {} | {} | {} |\n",
                spec.name, spec.trigger_characteristics, spec.response_objectives, spec.language_style
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_iteration_profile_enables_guide_and_amplifier() {
        let fw = RoleFramework::profile(FrameworkProfile::GuideAmplifier);
        assert_eq!(fw.roles.len(), 4);
        assert_eq!(fw.enabled, BTreeSet::from([Role::Guide, Role::Amplifier]));
    }

    #[test]
    fn role_names_parse_loosely() {
        assert_eq!("Critical Inquirer".parse::<Role>(), Ok(Role::CriticalInquirer));
        assert_eq!("guide".parse::<Role>(), Ok(Role::Guide));
        assert_eq!("Mentor".parse::<Role>(), Err("Mentor".to_string()));
    }

    #[test]
    fn enabling_undeclared_role_fails() {
        let roles = RoleFramework::parse_table(ROLE_TABLE).unwrap();
        let only_guide: Vec<_> = roles.into_iter().filter(|r| r.name == Role::Guide).collect();
        assert!(RoleFramework::new(only_guide, [Role::Amplifier]).is_err());
    }

    #[test]
    fn table_renders_only_enabled_rows() {
        let fw = RoleFramework::new(RoleFramework::parse_table(ROLE_TABLE).unwrap(), [Role::Guide]).unwrap();
        let table = fw.render_table();
        assert!(table.contains("| Guide |"));
        assert!(!table.contains("Amplifier"));
    }
}
