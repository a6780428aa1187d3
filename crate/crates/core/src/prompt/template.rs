//! Prompt templates with `{{name}}` placeholders and `{{#name}}...{{/name}}`
//! sections that render only when the named component is present.

use std::fmt;
use std::path::Path;

use super::PromptError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Placeholder {
    Background,
    Interview,
    Demographics,
    SurveyItems,
    FormatInstruction,
}

impl Placeholder {
    pub const ALL: [Placeholder; 5] = [
        Placeholder::Background,
        Placeholder::Interview,
        Placeholder::Demographics,
        Placeholder::SurveyItems,
        Placeholder::FormatInstruction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Placeholder::Background => "background",
            Placeholder::Interview => "interview",
            Placeholder::Demographics => "demographics",
            Placeholder::SurveyItems => "survey_items",
            Placeholder::FormatInstruction => "format_instruction",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    fn optional(self) -> bool {
        matches!(self, Placeholder::Interview | Placeholder::Demographics)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Text(String),
    Slot(Placeholder),
    Section(Placeholder, Vec<Segment>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateViolation {
    Missing(&'static str),
    Duplicate(&'static str),
    Unknown { name: String, line: usize },
    OutOfOrder { name: &'static str, after: &'static str },
    UnclosedSection { name: String, line: usize },
    UnexpectedClose { name: String, line: usize },
    SectionNotOptional { name: &'static str, line: usize },
    Unterminated { line: usize },
}

impl fmt::Display for TemplateViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemplateViolation::Missing(n) => write!(f, "missing placeholder {{{{{n}}}}}"),
            TemplateViolation::Duplicate(n) => write!(f, "placeholder {{{{{n}}}}} appears more than once"),
            TemplateViolation::Unknown { name, line } => write!(f, "line {line}: unknown placeholder {{{{{name}}}}}"),
            TemplateViolation::OutOfOrder { name, after } => {
                write!(f, "placeholder {{{{{name}}}}} must come after {{{{{after}}}}}")
            }
            TemplateViolation::UnclosedSection { name, line } => write!(f, "line {line}: section {name} is never closed"),
            TemplateViolation::UnexpectedClose { name, line } => write!(f, "line {line}: unexpected close of section {name}"),
            TemplateViolation::SectionNotOptional { name, line } => {
                write!(f, "line {line}: only interview and demographics may be conditional sections, not {name}")
            }
            TemplateViolation::Unterminated { line } => write!(f, "line {line}: unterminated '{{{{'"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    source: String,
    segments: Vec<Segment>,
}

/// Values substituted into a template; `None` marks an absent component.
#[derive(Debug, Clone, Copy, Default)]
pub struct TemplateValues<'a> {
    pub background: &'a str,
    pub interview: Option<&'a str>,
    pub demographics: Option<&'a str>,
    pub survey_items: &'a str,
    pub format_instruction: &'a str,
}

impl TemplateValues<'_> {
    fn get(&self, p: Placeholder) -> Option<&str> {
        match p {
            Placeholder::Background => Some(self.background),
            Placeholder::Interview => self.interview,
            Placeholder::Demographics => self.demographics,
            Placeholder::SurveyItems => Some(self.survey_items),
            Placeholder::FormatInstruction => Some(self.format_instruction),
        }
    }
}

impl PromptTemplate {
    /// Parses and validates a template.
    pub fn parse(source: &str) -> Result<Self, PromptError> {
        let (segments, violations) = parse_segments(source);
        if !violations.is_empty() {
            return Err(PromptError::Template(violations));
        }
        Ok(Self { source: source.to_string(), segments })
    }

    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PromptError::Io { path: path.display().to_string(), source: e })?;
        Self::parse(&text)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn render(&self, values: &TemplateValues<'_>) -> String {
        let mut out = String::with_capacity(self.source.len() + values.survey_items.len() + 4096);
        render_into(&self.segments, values, &mut out);
        out
    }
}

/// Lists every problem with a template without stopping at the first.
pub fn check_template(source: &str) -> Vec<TemplateViolation> {
    parse_segments(source).1
}

fn render_into(segments: &[Segment], values: &TemplateValues<'_>, out: &mut String) {
    for seg in segments {
        match seg {
            Segment::Text(t) => out.push_str(t),
            Segment::Slot(p) => out.push_str(values.get(*p).unwrap_or("")),
            Segment::Section(p, inner) => {
                if values.get(*p).is_some() {
                    render_into(inner, values, out);
                }
            }
        }
    }
}

fn parse_segments(source: &str) -> (Vec<Segment>, Vec<TemplateViolation>) {
    let mut violations = Vec::new();
    // stack of open sections: (placeholder name, line, segments collected so far)
    let mut stack: Vec<(Option<Placeholder>, String, usize, Vec<Segment>)> = vec![(None, String::new(), 0, Vec::new())];
    let mut slots: Vec<Placeholder> = Vec::new();
    let mut rest = source;
    let mut consumed = 0usize;
    let line_at = |offset: usize| source[..offset].matches('\n').count() + 1;

    while let Some(open) = rest.find("{{") {
        if open > 0 {
            stack.last_mut().unwrap().3.push(Segment::Text(rest[..open].to_string()));
        }
        let tag_offset = consumed + open;
        let after = &rest[open + 2..];
        let Some(close) = after.find("}}") else {
            violations.push(TemplateViolation::Unterminated { line: line_at(tag_offset) });
            rest = "";
            break;
        };
        let tag = after[..close].trim();
        let line = line_at(tag_offset);
        if let Some(name) = tag.strip_prefix('#') {
            let p = Placeholder::from_name(name.trim());
            match p {
                None => violations.push(TemplateViolation::Unknown { name: name.trim().into(), line }),
                Some(p) if !p.optional() => {
                    violations.push(TemplateViolation::SectionNotOptional { name: p.name(), line })
                }
                _ => {}
            }
            stack.push((p, name.trim().to_string(), line, Vec::new()));
        } else if let Some(name) = tag.strip_prefix('/') {
            let name = name.trim();
            if stack.len() > 1 && stack.last().unwrap().1 == name {
                let (p, _, _, inner) = stack.pop().unwrap();
                if let Some(p) = p {
                    stack.last_mut().unwrap().3.push(Segment::Section(p, inner));
                }
            } else {
                violations.push(TemplateViolation::UnexpectedClose { name: name.into(), line });
            }
        } else {
            match Placeholder::from_name(tag) {
                Some(p) => {
                    slots.push(p);
                    stack.last_mut().unwrap().3.push(Segment::Slot(p));
                }
                None => violations.push(TemplateViolation::Unknown { name: tag.into(), line }),
            }
        }
        let advance = open + 2 + close + 2;
        consumed += advance;
        rest = &rest[advance..];
    }
    if !rest.is_empty() {
        stack.last_mut().unwrap().3.push(Segment::Text(rest.to_string()));
    }
    while stack.len() > 1 {
        let (_, name, line, inner) = stack.pop().unwrap();
        violations.push(TemplateViolation::UnclosedSection { name, line });
        stack.last_mut().unwrap().3.extend(inner);
    }

    for p in Placeholder::ALL {
        match slots.iter().filter(|s| **s == p).count() {
            0 => violations.push(TemplateViolation::Missing(p.name())),
            1 => {}
            _ => violations.push(TemplateViolation::Duplicate(p.name())),
        }
    }
    for pair in slots.windows(2) {
        if pair[1] < pair[0] {
            violations.push(TemplateViolation::OutOfOrder { name: pair[1].name(), after: pair[0].name() });
        }
    }
    (stack.pop().unwrap().3, violations)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = "A {{background}}\n{{#interview}}I: {{interview}}\n{{/interview}}{{#demographics}}D: {{demographics}}\n{{/demographics}}S: {{survey_items}}\nF: {{format_instruction}}";

    #[test]
    fn renders_sections_conditionally() {
        let t = PromptTemplate::parse(FULL).unwrap();
        let mut v = TemplateValues { background: "bg", survey_items: "s", format_instruction: "f", ..Default::default() };
        assert_eq!(t.render(&v), "A bg\nS: s\nF: f");
        v.interview = Some("iv");
        assert_eq!(t.render(&v), "A bg\nI: iv\nS: s\nF: f");
        v.demographics = Some("dm");
        assert_eq!(t.render(&v), "A bg\nI: iv\nD: dm\nS: s\nF: f");
    }

    #[test]
    fn missing_survey_items_is_named() {
        let src = FULL.replace("{{survey_items}}", "");
        let v = check_template(&src);
        assert_eq!(v, vec![TemplateViolation::Missing("survey_items")]);
        assert!(v[0].to_string().contains("{{survey_items}}"));
    }

    #[test]
    fn order_duplicates_and_unknowns() {
        let src = "{{format_instruction}} {{background}} {{interview}} {{demographics}} {{survey_items}} {{survey_items}} {{nope}}";
        let v = check_template(src);
        assert!(v.contains(&TemplateViolation::Duplicate("survey_items")));
        assert!(v.iter().any(|x| matches!(x, TemplateViolation::Unknown { name, line: 1 } if name == "nope")));
        assert!(v.iter().any(|x| matches!(x, TemplateViolation::OutOfOrder { name: "background", .. })));
    }

    #[test]
    fn unclosed_and_stray_sections() {
        let src = "{{background}}\n{{#interview}}{{interview}}{{demographics}}{{survey_items}}{{format_instruction}}{{/demographics}}";
        let v = check_template(src);
        assert!(v.iter().any(|x| matches!(x, TemplateViolation::UnclosedSection { line: 2, .. })));
        assert!(v.iter().any(|x| matches!(x, TemplateViolation::UnexpectedClose { .. })));
        let v = check_template("{{#survey_items}}{{/survey_items}}");
        assert!(v.iter().any(|x| matches!(x, TemplateViolation::SectionNotOptional { .. })));
        assert!(check_template("{{background").iter().any(|x| matches!(x, TemplateViolation::Unterminated { .. })));
    }
}
