//! Web-specific predicates and transformations the relations call: output
//! equality by bounded edit distance, credential rewriting, reachability
//! and retrievability against crawl data, action classification, and small
//! string utilities.

use regex::Regex;

use crate::collected::CollectedData;
use crate::config::{ComparatorSettings, DetectionSettings};
use crate::model::{Action, InputSequence, User, WebAction, WebOutput};
use crate::smrl::ast::TypeLit;
use crate::textdist::within_threshold;

#[derive(Debug, thiserror::Error)]
pub enum WebUtilError {
    #[error("invalid pattern in comparator settings: {0}")]
    Pattern(#[from] regex::Error),
    #[error("no crawl data collected for user `{0}`")]
    NoCrawlData(String),
    #[error("no login action found in any collected sequence")]
    NoLoginAction,
}

/// Output comparison and error/alert detection, built from campaign config.
#[derive(Debug)]
pub struct Comparator {
    threshold: f64,
    error_re: Regex,
    alert_re: Regex,
    script_region_re: Regex,
    scrub: Vec<Regex>,
}

impl Comparator {
    pub fn from_settings(settings: &ComparatorSettings) -> Result<Comparator, WebUtilError> {
        Ok(Comparator {
            threshold: settings.similarity_threshold,
            error_re: Regex::new(&settings.error_pattern)?,
            alert_re: Regex::new(&settings.alert_pattern)?,
            script_region_re: Regex::new(r"(?is)<script[^>]*>.*?</script>")?,
            scrub: settings
                .scrub_patterns
                .iter()
                .map(|p| Regex::new(p))
                .collect::<Result<_, _>>()?,
        })
    }

    pub fn similarity_threshold(&self) -> f64 {
        self.threshold
    }

    fn normalize(&self, body: &str) -> String {
        let mut text = body.to_string();
        for re in &self.scrub {
            text = re.replace_all(&text, "").into_owned();
        }
        text
    }

    /// Two pages are equal when their edit distance stays within the
    /// threshold fraction of the longer raw body. Reflexive and symmetric,
    /// deliberately not transitive.
    pub fn outputs_equal(&self, a: &WebOutput, b: &WebOutput) -> bool {
        let budget_len = a.body.chars().count().max(b.body.chars().count());
        let na = self.normalize(&a.body);
        let nb = self.normalize(&b.body);
        let budget = self.threshold * budget_len as f64;
        crate::textdist::levenshtein(&na, &nb) as f64 <= budget
    }

    pub fn bodies_equal(&self, a: &str, b: &str) -> bool {
        within_threshold(&self.normalize(a), &self.normalize(b), self.threshold)
    }

    /// Errors are transport failures, HTTP error statuses, or pages whose
    /// body matches the configured error pattern.
    pub fn is_error(&self, o: &WebOutput) -> bool {
        o.status == 0 || o.status >= 400 || self.error_re.is_match(&o.body)
    }

    /// An executable dialog marker: the alert pattern inside an actual
    /// script element. HTML-escaped payloads never form a script element.
    pub fn has_alert_marker(&self, body: &str) -> bool {
        self.script_region_re
            .find_iter(body)
            .any(|region| self.alert_re.is_match(region.as_str()))
    }
}

/// Pattern-driven recognition of login/signup/reset actions.
#[derive(Debug)]
pub struct ActionClassifier {
    login_res: Vec<Regex>,
    signup_res: Vec<Regex>,
    reset_res: Vec<Regex>,
    username_re: Regex,
    password_re: Regex,
    threshold: f64,
}

impl ActionClassifier {
    pub fn from_settings(
        detection: &DetectionSettings,
        comparator: &ComparatorSettings,
    ) -> Result<ActionClassifier, WebUtilError> {
        let compile = |patterns: &[String]| -> Result<Vec<Regex>, regex::Error> {
            patterns.iter().map(|p| Regex::new(p)).collect()
        };
        Ok(ActionClassifier {
            login_res: compile(&detection.login_url_patterns)?,
            signup_res: compile(&detection.signup_url_patterns)?,
            reset_res: compile(&detection.reset_password_url_patterns)?,
            username_re: Regex::new(&detection.username_field_pattern)?,
            password_re: Regex::new(&detection.password_field_pattern)?,
            threshold: comparator.similarity_threshold,
        })
    }

    pub fn similarity_threshold(&self) -> f64 {
        self.threshold
    }

    pub fn url_matches_login(&self, url: &str) -> bool {
        let path = url_path(url);
        self.login_res.iter().any(|re| re.is_match(&path))
    }

    pub fn is_username_field(&self, name: &str) -> bool {
        self.username_re.is_match(name)
    }

    pub fn is_password_field(&self, name: &str) -> bool {
        self.password_re.is_match(name)
    }

    fn credential_shaped(&self, a: &WebAction) -> bool {
        a.form_inputs.iter().any(|(n, _)| self.username_re.is_match(n))
            && a.form_inputs.iter().any(|(n, _)| self.password_re.is_match(n))
    }

    pub fn is_login(&self, action: &Action) -> bool {
        let Action::Web(w) = action else { return false };
        let path = url_path(&w.url);
        self.login_res.iter().any(|re| re.is_match(&path)) && self.credential_shaped(w)
    }

    pub fn is_signup(&self, action: &Action) -> bool {
        let Action::Web(w) = action else { return false };
        let path = url_path(&w.url);
        self.signup_res.iter().any(|re| re.is_match(&path)) && self.credential_shaped(w)
    }

    pub fn is_reset_password(&self, action: &Action) -> bool {
        let Action::Web(w) = action else { return false };
        let path = url_path(&w.url);
        self.reset_res.iter().any(|re| re.is_match(&path)) && !w.form_inputs.is_empty()
    }

    /// True when an earlier action of the same sequence performs a login.
    pub fn after_login(&self, actions: &[Action], index: usize) -> bool {
        actions[..index.min(actions.len())]
            .iter()
            .any(|a| self.is_login(a))
    }
}

fn url_path(url: &str) -> String {
    match url::Url::parse(url) {
        Ok(parsed) => parsed.path().to_string(),
        Err(_) => url.split('?').next().unwrap_or(url).to_string(),
    }
}

/// Lowercase scheme and host, drop default ports, sort query parameters by
/// name. Used for set-membership queries only; mutation APIs keep order.
pub fn normalize_url(raw: &str) -> String {
    match url::Url::parse(raw) {
        Ok(parsed) => {
            let mut pairs: Vec<(String, String)> = parsed
                .query_pairs()
                .map(|(k, v)| (k.into_owned(), v.into_owned()))
                .collect();
            pairs.sort();
            let mut out = format!(
                "{}://{}",
                parsed.scheme().to_lowercase(),
                parsed.host_str().unwrap_or("").to_lowercase()
            );
            if let Some(port) = parsed.port() {
                out.push_str(&format!(":{port}"));
            }
            out.push_str(parsed.path());
            if !pairs.is_empty() {
                let query: String = url::form_urlencoded::Serializer::new(String::new())
                    .extend_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
                    .finish();
                out.push('?');
                out.push_str(&query);
            }
            out
        }
        Err(_) => raw.to_string(),
    }
}

/// Groups requests that differ only in parameter values: host, path and the
/// sorted parameter names.
pub fn url_shape_key(action: &WebAction) -> String {
    let mut names: Vec<&str> = action.parameters.iter().map(|(n, _)| n.as_str()).collect();
    names.sort();
    format!("{}#{}", normalize_url(&action.url), names.join(","))
}

/// Deep copy of a sequence in which login actions carry `user`'s
/// credentials and every action acts as `user`.
pub fn change_credentials(
    seq: &InputSequence,
    user: &User,
    classifier: &ActionClassifier,
) -> InputSequence {
    let mut copy = crate::model::clone_input(seq);
    for action in &mut copy.actions {
        let is_login = classifier.is_login(action);
        if let Action::Web(w) = action {
            if is_login {
                for (name, value) in &mut w.form_inputs {
                    if classifier.is_username_field(name) {
                        *value = user.username.clone();
                    } else if classifier.is_password_field(name) {
                        *value = user.password.clone();
                    }
                }
            }
            w.user = user.clone();
        }
    }
    copy
}

/// True iff the URL is absent from everything the user's crawl could reach.
pub fn cannot_reach_through_gui(
    collected: &CollectedData,
    user: &User,
    url: &str,
) -> Result<bool, WebUtilError> {
    let set = collected
        .reachable_set(user)
        .ok_or_else(|| WebUtilError::NoCrawlData(user.id.clone()))?;
    Ok(!set.contains(&normalize_url(url)))
}

/// True iff some output recorded for the user during data collection equals
/// the given output.
pub fn user_can_retrieve_content(
    collected: &CollectedData,
    user: &User,
    output: &WebOutput,
    comparator: &Comparator,
) -> bool {
    collected
        .outputs_for(user)
        .any(|recorded| comparator.outputs_equal(recorded, output))
}

/// Reflexive supervisor relation from configured (supervisor, subordinate)
/// id pairs; unknown users supervise nothing.
pub fn is_supervisor_of(pairs: &[(String, String)], a: &User, b: &User) -> bool {
    a.id == b.id || pairs.iter().any(|(s, o)| *s == a.id && *o == b.id)
}

/// The first login action in any collected sequence, re-credentialed to the
/// given user.
pub fn login_action_for(
    collected: &CollectedData,
    user: &User,
    classifier: &ActionClassifier,
) -> Result<Action, WebUtilError> {
    for seq in collected.source_inputs() {
        for action in &seq.actions {
            if classifier.is_login(action) {
                let single = InputSequence::new("login-probe", crate::model::Origin::Derived, vec![action.clone()]);
                let recred = change_credentials(&single, user, classifier);
                return Ok(recred.actions.into_iter().next().expect("one action"));
            }
        }
    }
    Err(WebUtilError::NoLoginAction)
}

/// Percent-encode every byte outside the URL-safe set, UTF-8 wise.
pub fn encode_url(s: &str) -> String {
    let mut out = String::new();
    for byte in s.bytes() {
        match byte {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => {
                out.push(byte as char)
            }
            other => out.push_str(&format!("%{other:02X}")),
        }
    }
    out
}

/// Prepend an attack character to a value (the `beginning` injection site).
pub fn special_char_injection_beginning(value: &str, ch: &str) -> String {
    format!("{ch}{value}")
}

/// Boolean for "true"/"false" in any case, Int for decimal integers,
/// String otherwise.
pub fn type_of(value: &str) -> TypeLit {
    let lower = value.to_ascii_lowercase();
    if lower == "true" || lower == "false" {
        TypeLit::Boolean
    } else if !value.is_empty() && value.parse::<i64>().is_ok() {
        TypeLit::Int
    } else {
        TypeLit::String
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Origin, Session};

    fn comparator() -> Comparator {
        Comparator::from_settings(&ComparatorSettings::default()).unwrap()
    }

    fn classifier() -> ActionClassifier {
        ActionClassifier::from_settings(
            &DetectionSettings::default(),
            &ComparatorSettings::default(),
        )
        .unwrap()
    }

    fn output(body: &str) -> WebOutput {
        WebOutput::new(200, body, Session::new())
    }

    #[test]
    fn identical_bodies_are_equal() {
        let c = comparator();
        assert!(c.outputs_equal(&output("hello world"), &output("hello world")));
    }

    #[test]
    fn one_edit_in_hundred_chars_is_equal_and_three_in_three_is_not() {
        let c = comparator();
        let a = "x".repeat(100);
        let mut b = a.clone();
        b.replace_range(0..1, "y");
        assert!(c.outputs_equal(&output(&a), &output(&b)));
        assert!(!c.outputs_equal(&output("abc"), &output("xyz")));
    }

    #[test]
    fn outputs_equal_is_reflexive_and_symmetric() {
        let c = comparator();
        let long = "x".repeat(50);
        let bodies = ["", "same", long.as_str(), "other page entirely"];
        for a in bodies {
            assert!(c.outputs_equal(&output(a), &output(a)));
            for b in bodies {
                assert_eq!(
                    c.outputs_equal(&output(a), &output(b)),
                    c.outputs_equal(&output(b), &output(a))
                );
            }
        }
    }

    #[test]
    fn scrub_patterns_mask_varying_tokens() {
        let settings = ComparatorSettings {
            scrub_patterns: vec!["sid=[0-9a-f]+".to_string()],
            ..ComparatorSettings::default()
        };
        let c = Comparator::from_settings(&settings).unwrap();
        let long = "z".repeat(100);
        let a = format!("{long} sid=aaaa");
        let b = format!("{long} sid=ffffffffffffffffffff");
        assert!(c.outputs_equal(&output(&a), &output(&b)));
    }

    #[test]
    fn error_detection_by_status_and_pattern() {
        let c = comparator();
        assert!(c.is_error(&WebOutput::new(404, "", Session::new())));
        assert!(!c.is_error(&output("Welcome")));
        assert!(c.is_error(&output("Access denied to this page")));
        assert!(c.is_error(&WebOutput::network_failure()));
    }

    #[test]
    fn alert_marker_requires_script_context() {
        let c = comparator();
        assert!(c.has_alert_marker("<p><SCRIPT>alert('XSS');</SCRIPT></p>"));
        assert!(!c.has_alert_marker("&lt;SCRIPT&gt;alert('XSS');&lt;/SCRIPT&gt;"));
        assert!(!c.has_alert_marker(""));
        assert!(!c.has_alert_marker("<script>var x = 1;</script>"));
    }

    #[test]
    fn login_detection_needs_url_and_credential_fields() {
        let cls = classifier();
        let u = User::new("u", "devel", "pw", "user");
        let login = Action::Web(WebAction::post(
            "http://sut/login",
            vec![("user".into(), "devel".into()), ("pass".into(), "pw".into())],
            u.clone(),
        ));
        assert!(cls.is_login(&login));
        let not_login_url = Action::Web(WebAction::post(
            "http://sut/comment",
            vec![("user".into(), "x".into()), ("pass".into(), "y".into())],
            u.clone(),
        ));
        assert!(!cls.is_login(&not_login_url));
        let no_fields = Action::Web(WebAction::get("http://sut/login", u.clone()));
        assert!(!cls.is_login(&no_fields));

        let signup = Action::Web(WebAction::post(
            "http://sut/signup",
            vec![("new_user".into(), "n".into()), ("pass".into(), "p".into())],
            u,
        ));
        assert!(cls.is_signup(&signup));
        assert!(!cls.is_login(&signup));
    }

    #[test]
    fn after_login_is_positional() {
        let cls = classifier();
        let u = User::new("u", "devel", "pw", "user");
        let actions = vec![
            Action::Web(WebAction::get("http://sut/", u.clone())),
            Action::Web(WebAction::post(
                "http://sut/login",
                vec![("user".into(), "devel".into()), ("pass".into(), "pw".into())],
                u.clone(),
            )),
            Action::Web(WebAction::get("http://sut/home", u)),
        ];
        assert!(!cls.after_login(&actions, 0));
        assert!(!cls.after_login(&actions, 1));
        assert!(cls.after_login(&actions, 2));
    }

    #[test]
    fn change_credentials_rewrites_every_login_and_user() {
        let cls = classifier();
        let devel = User::new("devel", "devel", "devel-pw", "user");
        let tester = User::new("tester", "tester", "tester-pw", "user");
        let login = |u: &User| {
            Action::Web(WebAction::post(
                "http://sut/login",
                vec![
                    ("user".into(), u.username.clone()),
                    ("pass".into(), u.password.clone()),
                ],
                u.clone(),
            ))
        };
        let seq = InputSequence::new(
            "s",
            Origin::Crawler,
            vec![
                login(&devel),
                Action::Web(WebAction::get("http://sut/x", devel.clone())),
                login(&devel),
            ],
        );
        let swapped = change_credentials(&seq, &tester, &cls);
        for action in &swapped.actions {
            assert_eq!(action.as_web().unwrap().user.id, "tester");
        }
        for idx in [0, 2] {
            let w = swapped.actions[idx].as_web().unwrap();
            assert_eq!(w.form_inputs[0].1, "tester");
            assert_eq!(w.form_inputs[1].1, "tester-pw");
        }
        // Source untouched.
        assert_eq!(seq.actions[0].as_web().unwrap().form_inputs[0].1, "devel");
        // Empty sequence stays empty.
        let empty = InputSequence::new("e", Origin::Crawler, vec![]);
        assert!(change_credentials(&empty, &tester, &cls).is_empty());
    }

    #[test]
    fn url_normalization_sorts_parameters_and_lowercases_host() {
        assert_eq!(
            normalize_url("HTTP://SUT:80/path?b=2&a=1"),
            "http://sut/path?a=1&b=2"
        );
        assert_eq!(
            normalize_url("https://sut/path?b=2&a=1"),
            normalize_url("https://sut/path?a=1&b=2")
        );
    }

    #[test]
    fn supervisor_relation_is_reflexive_and_configured() {
        let pairs = vec![("admin".to_string(), "tester".to_string())];
        let admin = User::new("admin", "admin", "p", "admin");
        let tester = User::new("tester", "tester", "p", "user");
        assert!(is_supervisor_of(&pairs, &admin, &tester));
        assert!(!is_supervisor_of(&pairs, &tester, &admin));
        assert!(is_supervisor_of(&pairs, &tester, &tester));
        let ghost = User::new("ghost", "g", "p", "user");
        assert!(!is_supervisor_of(&pairs, &ghost, &admin));
    }

    #[test]
    fn encode_url_covers_ascii_and_utf8() {
        assert_eq!(encode_url("abc"), "abc");
        assert_eq!(encode_url("a b"), "a%20b");
        assert_eq!(encode_url("é"), "%C3%A9");
    }

    #[test]
    fn special_char_injection_prepends() {
        assert_eq!(special_char_injection_beginning("x", "'"), "'x");
        assert_eq!(special_char_injection_beginning("", "%"), "%");
        assert_eq!(special_char_injection_beginning("1", "\u{0}"), "\u{0}1");
    }

    #[test]
    fn type_of_table() {
        assert_eq!(type_of("true"), TypeLit::Boolean);
        assert_eq!(type_of("FALSE"), TypeLit::Boolean);
        assert_eq!(type_of("42"), TypeLit::Int);
        assert_eq!(type_of("-7"), TypeLit::Int);
        assert_eq!(type_of("tru"), TypeLit::String);
        assert_eq!(type_of(""), TypeLit::String);
    }
}
