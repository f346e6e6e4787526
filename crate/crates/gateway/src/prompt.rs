use serde::{Deserialize, Serialize};

use abscon_core::Domain;

use crate::GatewayError;

const SYSTEM: &str = include_str!("../templates/system.txt");

fn template(domain: Domain) -> &'static str {
    match domain {
        Domain::Flowchart => include_str!("../templates/flowchart.txt"),
        Domain::Taxonomy => include_str!("../templates/taxonomy.txt"),
        Domain::Clevr => include_str!("../templates/clevr.txt"),
    }
}

fn metamodel(domain: Domain) -> &'static str {
    match domain {
        Domain::Flowchart => include_str!("../templates/metamodel_flowchart.txt"),
        Domain::Taxonomy => include_str!("../templates/metamodel_taxonomy.txt"),
        Domain::Clevr => include_str!("../templates/metamodel_clevr.txt"),
    }
}

fn constraints(domain: Domain) -> &'static str {
    match domain {
        Domain::Flowchart => include_str!("../templates/constraints_flowchart.txt"),
        Domain::Taxonomy => include_str!("../templates/constraints_taxonomy.txt"),
        Domain::Clevr => include_str!("../templates/constraints_clevr.txt"),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: &str, content: impl Into<String>) -> Self {
        ChatMessage {
            role: role.to_string(),
            content: content.into(),
        }
    }
}

/// Everything sent to the model: a system text, few-shot examples and the
/// task specification.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system: String,
    #[serde(default)]
    pub examples: Vec<String>,
    pub specification: String,
}

impl PromptBundle {
    /// Fills the shipped template for `domain` with its metamodel,
    /// constraints, the given examples and the model description.
    pub fn for_domain(domain: Domain, description: &str, examples: &[String]) -> Self {
        let shots = if examples.is_empty() {
            "(none)".to_string()
        } else {
            examples.join("\n\n")
        };
        let specification = template(domain)
            .replace("{metamodel}", metamodel(domain).trim_end())
            .replace("{constraints}", constraints(domain).trim_end())
            .replace("{examples}", &shots)
            .replace("{description}", description.trim());
        PromptBundle {
            system: SYSTEM.trim_end().to_string(),
            examples: examples.to_vec(),
            specification,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.specification.trim().is_empty() {
            return Err(GatewayError::InvalidConfig("empty prompt specification".into()));
        }
        Ok(())
    }

    pub fn messages(&self) -> Vec<ChatMessage> {
        vec![
            ChatMessage::new("system", self.system.clone()),
            ChatMessage::new("user", self.specification.clone()),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placeholders_are_filled() {
        for d in Domain::ALL {
            let b = PromptBundle::for_domain(d, "order handling", &["ex".into()]);
            assert!(b.specification.contains("order handling"));
            assert!(!b.specification.contains("{description}"));
            assert!(!b.specification.contains("{metamodel}"));
            assert!(b.validate().is_ok());
            assert_eq!(b.messages().len(), 2);
        }
    }

    #[test]
    fn empty_specification_is_rejected() {
        let mut b = PromptBundle::for_domain(Domain::Taxonomy, "x", &[]);
        b.specification = " ".into();
        assert!(b.validate().is_err());
    }
}
