//! HTML-level element extraction. The crawler is not a rendering engine: it
//! follows anchors and submits forms found by scanning the page text, which
//! is all the deterministic fixtures need.

use std::sync::OnceLock;

use regex::Regex;

#[derive(Debug, Clone, PartialEq)]
pub enum PageElement {
    Anchor {
        href: String,
        /// Locator of the element on its page, e.g. `/a[2]`.
        path: String,
    },
    Form {
        action: String,
        method: String,
        /// Field name plus any fixed value baked into the markup.
        fields: Vec<(String, Option<String>)>,
        path: String,
    },
}

fn anchor_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"(?is)<a\s[^>]*?href="([^"]*)"[^>]*>"#).unwrap())
}

fn form_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"(?is)<form\s[^>]*?>.*?</form>"#).unwrap())
}

fn form_action_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"(?is)action="([^"]*)""#).unwrap())
}

fn form_method_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"(?is)method="([^"]*)""#).unwrap())
}

fn input_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"(?is)<(?:input|textarea)\s[^>]*?>"#).unwrap())
}

fn attr_re(name: &str) -> Regex {
    Regex::new(&format!(r#"(?is){name}="([^"]*)""#)).unwrap()
}

/// Elements in document order: anchors first as they appear, then forms.
pub fn extract_elements(body: &str) -> Vec<PageElement> {
    let mut elements = Vec::new();
    for (i, cap) in anchor_re().captures_iter(body).enumerate() {
        elements.push(PageElement::Anchor {
            href: cap[1].to_string(),
            path: format!("/a[{}]", i + 1),
        });
    }
    let name_re = attr_re("name");
    let value_re = attr_re("value");
    for (i, m) in form_re().find_iter(body).enumerate() {
        let form_html = m.as_str();
        let action = form_action_re()
            .captures(form_html)
            .map(|c| c[1].to_string())
            .unwrap_or_default();
        let method = form_method_re()
            .captures(form_html)
            .map(|c| c[1].to_uppercase())
            .unwrap_or_else(|| "GET".to_string());
        let mut fields = Vec::new();
        for input in input_re().find_iter(form_html) {
            let input_html = input.as_str();
            if let Some(name) = name_re.captures(input_html) {
                let value = value_re.captures(input_html).map(|c| c[1].to_string());
                fields.push((name[1].to_string(), value));
            }
        }
        elements.push(PageElement::Form {
            action,
            method,
            fields,
            path: format!("/form[{}]", i + 1),
        });
    }
    elements
}

/// All anchor targets of a page, resolved against the page URL.
pub fn anchor_urls(body: &str, page_url: &str) -> Vec<String> {
    let base = url::Url::parse(page_url).ok();
    anchor_re()
        .captures_iter(body)
        .filter_map(|cap| resolve(base.as_ref(), &cap[1]))
        .collect()
}

pub fn resolve(base: Option<&url::Url>, href: &str) -> Option<String> {
    match url::Url::parse(href) {
        Ok(abs) => Some(abs.to_string()),
        Err(_) => base?.join(href).ok().map(|u| u.to_string()),
    }
}
