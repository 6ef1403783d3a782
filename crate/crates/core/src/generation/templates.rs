use super::GenerationError;
use crate::harvest::validate_keyword;

/// Placeholder that each template carries exactly once.
pub const PLACEHOLDER: &str = "{prompt}";

/// The five prompt templates, in fixed order.
pub const TEMPLATES: [&str; 5] = [
    "Create a sentence using the word {prompt} that showcases its usage in a common context.",
    "Write a sentence that uses the word {prompt} in everyday language.",
    "Formulate a sentence with the word {prompt} to demonstrate its typical usage.",
    "Construct a sentence that includes the word {prompt} in a familiar context.",
    "Compose a sentence that features the word {prompt} in a general setting.",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplate {
    pub index: usize,
    pub template: &'static str,
}

impl PromptTemplate {
    pub fn all() -> impl Iterator<Item = PromptTemplate> {
        TEMPLATES.iter().enumerate().map(|(index, template)| PromptTemplate { index, template })
    }

    pub fn instantiate(&self, keyword: &str) -> String {
        self.template.replacen(PLACEHOLDER, keyword, 1)
    }

    /// If `prompt` is this template filled with some keyword, returns the keyword.
    pub fn keyword_in<'a>(&self, prompt: &'a str) -> Option<&'a str> {
        let (head, tail) = self.template.split_once(PLACEHOLDER)?;
        let keyword = prompt.strip_prefix(head)?.strip_suffix(tail)?;
        validate_keyword(keyword).ok().map(|_| keyword)
    }
}

/// Fills all five templates with `keyword`.
pub fn instantiate_prompts(keyword: &str) -> Result<[String; 5], GenerationError> {
    validate_keyword(keyword).map_err(GenerationError::InvalidKeyword)?;
    Ok(TEMPLATES.map(|t| t.replacen(PLACEHOLDER, keyword, 1)))
}

/// Recovers `(template index, keyword)` from an instantiated prompt.
pub fn parse_prompt(prompt: &str) -> Option<(usize, &str)> {
    PromptTemplate::all().find_map(|t| t.keyword_in(prompt).map(|k| (t.index, k)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_prompt_for_cat() {
        let p = instantiate_prompts("cat").unwrap();
        assert_eq!(p[0], "Create a sentence using the word cat that showcases its usage in a common context.");
    }

    #[test]
    fn keyword_sits_at_placeholder() {
        for (t, p) in TEMPLATES.iter().zip(instantiate_prompts("run").unwrap()) {
            let at = t.find(PLACEHOLDER).unwrap();
            assert_eq!(&p[at..at + 3], "run");
            assert_eq!(p.len(), t.len() - PLACEHOLDER.len() + 3);
        }
    }

    #[test]
    fn every_template_has_one_placeholder() {
        for t in TEMPLATES {
            assert_eq!(t.matches(PLACEHOLDER).count(), 1);
        }
    }

    #[test]
    fn rejects_bad_keywords() {
        assert!(matches!(instantiate_prompts(""), Err(GenerationError::InvalidKeyword(_))));
        assert!(matches!(instantiate_prompts("a b"), Err(GenerationError::InvalidKeyword(_))));
    }

    #[test]
    fn parse_round_trips() {
        for (i, p) in instantiate_prompts("{prompt}x").unwrap().iter().enumerate() {
            assert_eq!(parse_prompt(p), Some((i, "{prompt}x")));
        }
        assert_eq!(parse_prompt("Tell me a story."), None);
    }
}
