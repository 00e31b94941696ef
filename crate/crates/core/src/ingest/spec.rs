use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default query. `{membership}`, `{class}`, `{vars}` and `{optionals}` are
/// filled by [`super::build_query`]; `{limit}` and `{offset}` are left for
/// paging.
pub const DEFAULT_SPARQL_TEMPLATE: &str = "SELECT ?x{vars} WHERE {
  ?x {membership} wd:{class} .
{optionals}}
ORDER BY ?x
LIMIT {limit}
OFFSET {offset}
";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub name: String,
    pub class_qid: String,
    #[serde(default = "default_template")]
    pub sparql_template: String,
    /// Triple pattern predicate linking members to the class. Direct `wdt:P31`
    /// by default; `wdt:P31/wdt:P279*` pulls in subclasses.
    #[serde(default = "default_membership")]
    pub membership: String,
    pub languages: Vec<String>,
    #[serde(default)]
    pub attribute_props: Vec<String>,
    #[serde(default)]
    pub location_props: Vec<String>,
    /// When set, locations are read from the entities this property points to
    /// (cars: P176 manufacturer, then the manufacturer's country).
    #[serde(default)]
    pub location_via: Option<String>,
}

fn default_template() -> String {
    DEFAULT_SPARQL_TEMPLATE.to_string()
}

fn default_membership() -> String {
    "wdt:P31".to_string()
}

fn is_pid(s: &str) -> bool {
    s.len() > 1 && s.starts_with('P') && s[1..].bytes().all(|b| b.is_ascii_digit())
}

impl ClassSpec {
    pub fn new(name: &str, class_qid: &str, languages: &[&str]) -> Self {
        ClassSpec {
            name: name.to_string(),
            class_qid: class_qid.to_string(),
            sparql_template: default_template(),
            membership: default_membership(),
            languages: languages.iter().map(|s| s.to_string()).collect(),
            attribute_props: Vec::new(),
            location_props: vec!["P17".to_string()],
            location_via: None,
        }
    }

    /// Rivers (Q4022) with their length (P2043).
    pub fn rivers() -> Self {
        let mut s = Self::new("rivers", "Q4022", &["en", "zh"]);
        s.attribute_props = vec!["P2043".into()];
        s
    }

    /// Natural disasters (Q8065).
    pub fn disasters() -> Self {
        Self::new("disasters", "Q8065", &["en", "zh"])
    }

    /// Automobile models (Q3231690), located through their manufacturer.
    pub fn cars() -> Self {
        let mut s = Self::new("cars", "Q3231690", &["en", "zh"]);
        s.attribute_props = vec!["P176".into()];
        s.location_via = Some("P176".into());
        s.location_props = vec!["P17".into(), "P495".into()];
        s
    }

    pub fn validate(&self) -> Result<()> {
        let digits = self.class_qid.strip_prefix('Q').unwrap_or("");
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::validation(format!(
                "class {}: malformed class QID {:?} (expected Q followed by digits)",
                self.name, self.class_qid
            )));
        }
        if self.languages.is_empty() {
            return Err(Error::validation(format!("class {}: no languages", self.name)));
        }
        for lang in &self.languages {
            if lang.is_empty() || !lang.bytes().all(|b| b.is_ascii_lowercase() || b == b'-') {
                return Err(Error::validation(format!("class {}: bad language code {lang:?}", self.name)));
            }
        }
        for p in self.attribute_props.iter().chain(&self.location_props).chain(self.location_via.iter()) {
            if !is_pid(p) {
                return Err(Error::validation(format!("class {}: bad property id {p:?}", self.name)));
            }
        }
        Ok(())
    }

    pub fn pivot_language(&self) -> &str {
        &self.languages[0]
    }
}
