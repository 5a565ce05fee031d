//! Line-oriented `key = value` documents with `[kind name]` sections and
//! `#` comments. Shared by scene metadata and classifier signatures.

use super::FormatError;

#[derive(Debug, Clone)]
pub(crate) struct KvEntry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct KvSection {
    /// Empty for the implicit leading section.
    pub kind: String,
    pub name: String,
    pub line: usize,
    pub entries: Vec<KvEntry>,
}

impl KvSection {
    pub fn get(&self, key: &str) -> Option<&KvEntry> {
        self.entries.iter().rev().find(|e| e.key == key)
    }

    pub fn number(&self, key: &str) -> Result<Option<f64>, FormatError> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => parse_number(&e.value, e.line, key).map(Some),
        }
    }
}

pub(crate) fn parse_number(value: &str, line: usize, key: &str) -> Result<f64, FormatError> {
    value.trim().parse::<f64>().map_err(|_| FormatError::InvalidNumber {
        line,
        key: key.to_string(),
        value: value.trim().to_string(),
    })
}

pub(crate) fn parse(text: &str) -> Result<Vec<KvSection>, FormatError> {
    let mut sections = vec![KvSection {
        kind: String::new(),
        name: String::new(),
        line: 0,
        entries: Vec::new(),
    }];
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if content.is_empty() {
            continue;
        }
        if let Some(inner) = content.strip_prefix('[') {
            let inner = inner.strip_suffix(']').ok_or_else(|| FormatError::Syntax {
                line,
                message: "unterminated section header".into(),
            })?;
            let inner = inner.trim();
            let (kind, name) = match inner.split_once(char::is_whitespace) {
                Some((k, n)) => (k, n.trim()),
                None => (inner, ""),
            };
            if kind.is_empty() {
                return Err(FormatError::Syntax {
                    line,
                    message: "empty section header".into(),
                });
            }
            sections.push(KvSection {
                kind: kind.to_ascii_lowercase(),
                name: name.to_string(),
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| FormatError::Syntax {
            line,
            message: format!("expected 'key = value', found '{content}'"),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(FormatError::Syntax {
                line,
                message: "empty key".into(),
            });
        }
        sections
            .last_mut()
            .expect("root section")
            .entries
            .push(KvEntry {
                key: key.to_ascii_lowercase(),
                value: value.trim().to_string(),
                line,
            });
    }
    Ok(sections)
}
