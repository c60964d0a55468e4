//! Interaction data model: users, sessions, actions, input sequences and the
//! outputs the system under test produces for them, plus the mutation
//! primitives relations use to derive follow-up inputs.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

/// A system user. The anonymous visitor is a distinguished user with empty
/// credentials so every action carries a user for reachability queries.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct User {
    pub id: String,
    pub username: String,
    pub password: String,
    pub role: String,
}

impl User {
    pub fn new(id: &str, username: &str, password: &str, role: &str) -> Self {
        User {
            id: id.to_string(),
            username: username.to_string(),
            password: password.to_string(),
            role: role.to_string(),
        }
    }

    pub fn anonymous() -> Self {
        User::new("anonymous", "", "", "guest")
    }

    pub fn is_anonymous(&self) -> bool {
        self.username.is_empty() && self.password.is_empty()
    }
}

/// Transfer channel for a web action. Follow-up inputs flip this to probe
/// behavior differences between the encrypted and plaintext endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Http,
    Https,
}

impl Channel {
    pub fn parse(s: &str) -> Option<Channel> {
        match s.to_ascii_lowercase().as_str() {
            "http" => Some(Channel::Http),
            "https" => Some(Channel::Https),
            _ => None,
        }
    }
}

/// Cookie set carried across the actions of one sequence. Names are unique;
/// insertion order is preserved so serialization round-trips losslessly.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    cookies: Vec<(String, String)>,
}

impl Session {
    pub fn new() -> Self {
        Session::default()
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.cookies
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_str())
    }

    /// Insert or replace, keeping the original position on replace.
    pub fn set_cookie(&mut self, name: &str, value: &str) {
        match self.cookies.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = value.to_string(),
            None => self.cookies.push((name.to_string(), value.to_string())),
        }
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.cookies
    }

    pub fn is_empty(&self) -> bool {
        self.cookies.is_empty()
    }

    pub fn clear(&mut self) {
        self.cookies.clear();
    }

    /// `name=value; name2=value2` form used on the Cookie request header.
    pub fn to_cookie_header(&self) -> String {
        self.cookies
            .iter()
            .map(|(n, v)| format!("{n}={v}"))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// What kind of page element triggered a recorded action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Anchor,
    SubmitButton,
    /// Actions ingested from scripts have no originating element.
    None,
}

/// One browser-level interaction: a request with everything a relation may
/// want to rewrite (URL parameters, form inputs, session, channel).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WebAction {
    /// Absolute URL without the query string; `parameters` holds the query.
    pub url: String,
    pub method: String,
    pub parameters: Vec<(String, String)>,
    pub form_inputs: Vec<(String, String)>,
    /// URL of the page on which the triggering element lived ("" for scripts).
    pub element_url: String,
    /// XPath-like locator of the triggering element ("" for scripts).
    pub element_path: String,
    pub element_kind: ElementKind,
    pub user: User,
    pub session_override: Option<Session>,
    pub channel: Channel,
    /// 0-based index within the owning sequence, kept in sync on edits.
    pub position: usize,
}

impl WebAction {
    pub fn get(url: &str, user: User) -> Self {
        WebAction {
            url: url.to_string(),
            method: "GET".to_string(),
            parameters: Vec::new(),
            form_inputs: Vec::new(),
            element_url: String::new(),
            element_path: String::new(),
            element_kind: ElementKind::None,
            user,
            session_override: None,
            channel: Channel::Https,
            position: 0,
        }
    }

    pub fn post(url: &str, form_inputs: Vec<(String, String)>, user: User) -> Self {
        WebAction {
            method: "POST".to_string(),
            form_inputs,
            ..WebAction::get(url, user)
        }
    }

    /// Full URL including the encoded query string.
    pub fn full_url(&self) -> String {
        if self.parameters.is_empty() {
            return self.url.clone();
        }
        let query: String = url::form_urlencoded::Serializer::new(String::new())
            .extend_pairs(self.parameters.iter().map(|(k, v)| (k.as_str(), v.as_str())))
            .finish();
        format!("{}?{}", self.url, query)
    }

    pub fn set_parameter_value(&mut self, index: usize, value: &str) -> bool {
        match self.parameters.get_mut(index) {
            Some(slot) => {
                slot.1 = value.to_string();
                true
            }
            None => false,
        }
    }

    pub fn set_form_input(&mut self, index: usize, value: &str) -> bool {
        match self.form_inputs.get_mut(index) {
            Some(slot) => {
                slot.1 = value.to_string();
                true
            }
            None => false,
        }
    }

    pub fn set_channel(&mut self, channel: Channel) -> bool {
        self.channel = channel;
        true
    }

    pub fn set_session(&mut self, session: Session) -> bool {
        self.session_override = Some(session);
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    Web(WebAction),
    Wait { duration_ms: u64, position: usize },
    ResetSut { position: usize },
}

impl Action {
    pub fn position(&self) -> usize {
        match self {
            Action::Web(a) => a.position,
            Action::Wait { position, .. } => *position,
            Action::ResetSut { position } => *position,
        }
    }

    fn set_position(&mut self, pos: usize) {
        match self {
            Action::Web(a) => a.position = pos,
            Action::Wait { position, .. } => *position = pos,
            Action::ResetSut { position } => *position = pos,
        }
    }

    pub fn as_web(&self) -> Option<&WebAction> {
        match self {
            Action::Web(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_web_mut(&mut self) -> Option<&mut WebAction> {
        match self {
            Action::Web(a) => Some(a),
            _ => None,
        }
    }

    /// The acting user; wait and reset actions act as nobody in particular.
    pub fn user(&self) -> User {
        match self {
            Action::Web(a) => a.user.clone(),
            _ => User::anonymous(),
        }
    }
}

/// Where an input sequence came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Crawler,
    Script,
    Derived,
}

static NEXT_DERIVED_ID: AtomicU64 = AtomicU64::new(0);

fn fresh_derived_id() -> String {
    format!("d{}", NEXT_DERIVED_ID.fetch_add(1, Ordering::Relaxed))
}

/// Ordered actions a user performs against the system under test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSequence {
    pub id: String,
    pub origin: Origin,
    /// Id of the sequence this one was derived from, when `origin == Derived`.
    pub source_id: Option<String>,
    pub actions: Vec<Action>,
}

impl InputSequence {
    pub fn new(id: &str, origin: Origin, actions: Vec<Action>) -> Self {
        let mut seq = InputSequence {
            id: id.to_string(),
            origin,
            source_id: None,
            actions,
        };
        seq.renumber();
        seq
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    fn renumber(&mut self) {
        for (i, a) in self.actions.iter_mut().enumerate() {
            a.set_position(i);
        }
    }

    /// Structural equality over actions only; identity fields are ignored.
    pub fn same_actions(&self, other: &InputSequence) -> bool {
        self.actions == other.actions
    }

    /// In-place insert with renumbering, for relations that grow a follow-up
    /// they already registered.
    pub fn insert_action(&mut self, index: usize, action: Action) -> Result<(), PositionError> {
        if index > self.len() {
            return Err(PositionError::OutOfRange {
                index,
                len: self.len(),
            });
        }
        self.actions.insert(index, action);
        self.renumber();
        Ok(())
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PositionError {
    #[error("index {index} out of range for sequence of length {len}")]
    OutOfRange { index: usize, len: usize },
    #[error("invalid range {from}..{to} for sequence of length {len}")]
    BadRange { from: usize, to: usize, len: usize },
}

/// Deep, independent copy with a fresh identity and `origin = Derived`.
pub fn clone_input(src: &InputSequence) -> InputSequence {
    InputSequence {
        id: fresh_derived_id(),
        origin: Origin::Derived,
        source_id: Some(src.id.clone()),
        actions: src.actions.clone(),
    }
}

/// Copy of `seq` with `action` inserted at `index`; later positions shift by
/// one and every action is renumbered.
pub fn add_action(
    seq: &InputSequence,
    index: usize,
    action: Action,
) -> Result<InputSequence, PositionError> {
    if index > seq.len() {
        return Err(PositionError::OutOfRange {
            index,
            len: seq.len(),
        });
    }
    let mut out = clone_input(seq);
    out.actions.insert(index, action);
    out.renumber();
    Ok(out)
}

/// Actions `[from, to)` copied into a new sequence renumbered from 0.
pub fn sublist(
    seq: &InputSequence,
    from: usize,
    to: usize,
) -> Result<InputSequence, PositionError> {
    if from > to || to > seq.len() {
        return Err(PositionError::BadRange {
            from,
            to,
            len: seq.len(),
        });
    }
    let mut out = clone_input(seq);
    out.actions = seq.actions[from..to].to_vec();
    out.renumber();
    Ok(out)
}

/// Copy of `seq` with `seq[from]` duplicated at index `to`.
pub fn copy_action_to(
    seq: &InputSequence,
    from: usize,
    to: usize,
) -> Result<InputSequence, PositionError> {
    let dup = seq
        .actions
        .get(from)
        .cloned()
        .ok_or(PositionError::OutOfRange {
            index: from,
            len: seq.len(),
        })?;
    add_action(seq, to, dup)
}

/// Response of the system under test to one action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WebOutput {
    pub status: u16,
    pub body: String,
    /// Cookie state after applying this response's Set-Cookie headers.
    pub session: Session,
    pub has_alert: bool,
    pub is_empty_file: bool,
    /// (method, url) pairs issued while producing this output.
    pub request_log: Vec<(String, String)>,
}

impl WebOutput {
    pub fn new(status: u16, body: &str, session: Session) -> Self {
        WebOutput {
            status,
            body: body.to_string(),
            session,
            has_alert: false,
            is_empty_file: body.is_empty(),
            request_log: Vec::new(),
        }
    }

    /// Placeholder output for wait/reset actions, which have no response.
    pub fn synthetic(session: Session) -> Self {
        WebOutput::new(200, "", session)
    }

    /// Stand-in for a transport failure; relations observe it instead of the
    /// whole run aborting.
    pub fn network_failure() -> Self {
        WebOutput::new(0, "", Session::new())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(n: usize) -> InputSequence {
        let u = User::new("u1", "devel", "pw", "user");
        let actions = (0..n)
            .map(|i| Action::Web(WebAction::get(&format!("http://sut/p{i}"), u.clone())))
            .collect();
        InputSequence::new("s0", Origin::Crawler, actions)
    }

    #[test]
    fn clone_empty_sequence_is_distinct() {
        let s = seq(0);
        let c = clone_input(&s);
        assert!(c.is_empty());
        assert_ne!(c.id, s.id);
        assert_eq!(c.origin, Origin::Derived);
        assert_eq!(c.source_id.as_deref(), Some("s0"));
    }

    #[test]
    fn clone_preserves_positions() {
        let s = seq(3);
        let c = clone_input(&s);
        let positions: Vec<usize> = c.actions.iter().map(|a| a.position()).collect();
        assert_eq!(positions, vec![0, 1, 2]);
    }

    #[test]
    fn mutating_clone_leaves_source_untouched() {
        let mut s = seq(2);
        s.actions[0]
            .as_web_mut()
            .unwrap()
            .parameters
            .push(("id".into(), "1".into()));
        let mut c = clone_input(&s);
        assert!(c.actions[0].as_web_mut().unwrap().set_parameter_value(0, "x"));
        assert_eq!(s.actions[0].as_web().unwrap().parameters[0].1, "1");
        assert_eq!(c.actions[0].as_web().unwrap().parameters[0].1, "x");
    }

    #[test]
    fn add_action_at_zero_into_empty() {
        let s = seq(0);
        let a = Action::Web(WebAction::get("http://sut/x", User::anonymous()));
        let out = add_action(&s, 0, a).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.actions[0].position(), 0);
    }

    #[test]
    fn add_action_in_middle_renumbers() {
        let s = seq(3);
        let a = Action::Web(WebAction::get("http://sut/x", User::anonymous()));
        let out = add_action(&s, 1, a).unwrap();
        let urls: Vec<&str> = out
            .actions
            .iter()
            .map(|a| a.as_web().unwrap().url.as_str())
            .collect();
        assert_eq!(
            urls,
            vec!["http://sut/p0", "http://sut/x", "http://sut/p1", "http://sut/p2"]
        );
        let positions: Vec<usize> = out.actions.iter().map(|a| a.position()).collect();
        assert_eq!(positions, vec![0, 1, 2, 3]);
    }

    #[test]
    fn add_action_at_len_appends() {
        let s = seq(2);
        let a = Action::Wait {
            duration_ms: 5,
            position: 0,
        };
        let out = add_action(&s, 2, a).unwrap();
        assert_eq!(out.actions[2].position(), 2);
        assert!(matches!(out.actions[2], Action::Wait { .. }));
    }

    #[test]
    fn add_action_out_of_range_is_rejected() {
        let s = seq(1);
        let a = Action::ResetSut { position: 0 };
        assert_eq!(
            add_action(&s, 3, a),
            Err(PositionError::OutOfRange { index: 3, len: 1 })
        );
    }

    #[test]
    fn sublist_full_range_copies_all() {
        let s = seq(3);
        let out = sublist(&s, 0, 3).unwrap();
        assert!(out.same_actions(&s));
    }

    #[test]
    fn sublist_empty_range() {
        let s = seq(3);
        let out = sublist(&s, 2, 2).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn sublist_middle_renumbers_from_zero() {
        let s = seq(4);
        let out = sublist(&s, 1, 3).unwrap();
        let urls: Vec<&str> = out
            .actions
            .iter()
            .map(|a| a.as_web().unwrap().url.as_str())
            .collect();
        assert_eq!(urls, vec!["http://sut/p1", "http://sut/p2"]);
        assert_eq!(out.actions[0].position(), 0);
        assert_eq!(out.actions[1].position(), 1);
    }

    #[test]
    fn sublist_bad_range_is_rejected() {
        let s = seq(2);
        assert!(sublist(&s, 1, 5).is_err());
        assert!(sublist(&s, 2, 1).is_err());
    }

    #[test]
    fn copy_action_to_duplicates_and_shifts() {
        let s = seq(3);
        let out = copy_action_to(&s, 0, 2).unwrap();
        let urls: Vec<&str> = out
            .actions
            .iter()
            .map(|a| a.as_web().unwrap().url.as_str())
            .collect();
        assert_eq!(
            urls,
            vec!["http://sut/p0", "http://sut/p1", "http://sut/p0", "http://sut/p2"]
        );
    }

    #[test]
    fn indexed_mutations_report_range_failures() {
        let mut a = WebAction::get("http://sut/p", User::anonymous());
        a.form_inputs.push(("a".into(), "1".into()));
        a.form_inputs.push(("b".into(), "2".into()));
        assert!(!a.set_form_input(5, "x"));
        assert_eq!(a.form_inputs[0].1, "1");
        assert_eq!(a.form_inputs[1].1, "2");
        assert!(a.set_form_input(1, "x"));
        assert_eq!(a.form_inputs[1].1, "x");
    }

    #[test]
    fn set_channel_flips() {
        let mut a = WebAction::get("https://sut/p", User::anonymous());
        assert_eq!(a.channel, Channel::Https);
        assert!(a.set_channel(Channel::Http));
        assert_eq!(a.channel, Channel::Http);
    }

    #[test]
    fn session_set_cookie_replaces_in_place() {
        let mut s = Session::new();
        s.set_cookie("sid", "1");
        s.set_cookie("elevated", "true");
        s.set_cookie("sid", "2");
        assert_eq!(s.entries(), &[("sid".into(), "2".into()), ("elevated".into(), "true".into())]);
        assert_eq!(s.to_cookie_header(), "sid=2; elevated=true");
    }

    #[test]
    fn full_url_appends_encoded_query() {
        let mut a = WebAction::get("http://sut/search", User::anonymous());
        a.parameters.push(("q".into(), "a b".into()));
        assert_eq!(a.full_url(), "http://sut/search?q=a+b");
    }
}
