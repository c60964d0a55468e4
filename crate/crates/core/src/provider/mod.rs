//! Data provider: exposes collected interaction data, configured SUT data
//! and attack payload catalogs through indexed data functions, and drives
//! the circular-view enumeration the engine iterates over.

mod payloads;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::collected::CollectedData;
use crate::model::{Action, InputSequence, User};
use crate::smrl::ast::TypeLit;

/// Every data function of the language. Declaration order is the canonical
/// iteration order: Input first, then User, then the rest alphabetically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DataKind {
    Input,
    User,
    Action,
    ActionAvailableWithoutLogin,
    Crlf,
    CodeInjection,
    CommandInjection,
    FileWithInvalidType,
    HttpMethod,
    LdapInjection,
    Log,
    Output,
    ParameterValueUsedByOtherUsers,
    RandomAdminFilePath,
    RandomFilePath,
    RandomValue,
    SqlInjection,
    SpecialCharacters,
    StaticInjection,
    WeakPassword,
    XmlInjectedFile,
    XQueryInjection,
    XssInjection,
}

impl DataKind {
    pub const ALL: [DataKind; 23] = [
        DataKind::Input,
        DataKind::User,
        DataKind::Action,
        DataKind::ActionAvailableWithoutLogin,
        DataKind::Crlf,
        DataKind::CodeInjection,
        DataKind::CommandInjection,
        DataKind::FileWithInvalidType,
        DataKind::HttpMethod,
        DataKind::LdapInjection,
        DataKind::Log,
        DataKind::Output,
        DataKind::ParameterValueUsedByOtherUsers,
        DataKind::RandomAdminFilePath,
        DataKind::RandomFilePath,
        DataKind::RandomValue,
        DataKind::SqlInjection,
        DataKind::SpecialCharacters,
        DataKind::StaticInjection,
        DataKind::WeakPassword,
        DataKind::XmlInjectedFile,
        DataKind::XQueryInjection,
        DataKind::XssInjection,
    ];

    pub fn function_name(&self) -> &'static str {
        match self {
            DataKind::Input => "Input",
            DataKind::User => "User",
            DataKind::Action => "Action",
            DataKind::ActionAvailableWithoutLogin => "ActionAvailableWithoutLogin",
            DataKind::Crlf => "CRLFAttackString",
            DataKind::CodeInjection => "CodeInjectionString",
            DataKind::CommandInjection => "CommandInjection",
            DataKind::FileWithInvalidType => "FileWithInvalidType",
            DataKind::HttpMethod => "HttpMethod",
            DataKind::LdapInjection => "LDAPInjectionString",
            DataKind::Log => "Log",
            DataKind::Output => "Output",
            DataKind::ParameterValueUsedByOtherUsers => "ParameterValueUsedByOtherUsers",
            DataKind::RandomAdminFilePath => "RandomAdminFilePath",
            DataKind::RandomFilePath => "RandomFilePath",
            DataKind::RandomValue => "RandomValue",
            DataKind::SqlInjection => "SQLInjectionString",
            DataKind::SpecialCharacters => "SpecialCharacters",
            DataKind::StaticInjection => "StaticInjectionString",
            DataKind::WeakPassword => "WeakPassword",
            DataKind::XmlInjectedFile => "XMLInjectedFile",
            DataKind::XQueryInjection => "XQueryInjection",
            DataKind::XssInjection => "XSSInjectionString",
        }
    }

    pub fn from_function_name(name: &str) -> Option<DataKind> {
        // The printed relations also use a lowercase, pluralized spelling.
        if name == "parameterValuesUsedByOtherUsers" {
            return Some(DataKind::ParameterValueUsedByOtherUsers);
        }
        DataKind::ALL
            .iter()
            .copied()
            .find(|k| k.function_name() == name)
    }

    pub fn is_payload(&self) -> bool {
        matches!(
            self,
            DataKind::Crlf
                | DataKind::CodeInjection
                | DataKind::CommandInjection
                | DataKind::FileWithInvalidType
                | DataKind::HttpMethod
                | DataKind::LdapInjection
                | DataKind::SqlInjection
                | DataKind::SpecialCharacters
                | DataKind::StaticInjection
                | DataKind::WeakPassword
                | DataKind::XmlInjectedFile
                | DataKind::XQueryInjection
                | DataKind::XssInjection
        )
    }

    pub fn is_file_payload(&self) -> bool {
        matches!(self, DataKind::FileWithInvalidType | DataKind::XmlInjectedFile)
    }

    /// Kinds the engine enumerates views over. Outputs are computed, and
    /// other-user parameter values depend on a concrete action, so neither
    /// rotates.
    pub fn is_rotatable(&self) -> bool {
        !matches!(self, DataKind::Output | DataKind::ParameterValueUsedByOtherUsers)
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ProviderError {
    #[error("no data for kind {0}")]
    Empty(&'static str),
    #[error("index {index} beyond catalog {kind} of {len} entries")]
    PayloadIndex {
        kind: &'static str,
        index: usize,
        len: usize,
    },
    #[error("unknown random value type {0}")]
    UnknownRandomType(String),
}

/// Collected and configured data plus the per-kind rotation state.
#[derive(Debug, Clone)]
pub struct ProviderState {
    inputs: Vec<InputSequence>,
    users: Vec<User>,
    /// (sequence index, action index) into `inputs`, flattened in order.
    actions: Vec<(usize, usize)>,
    actions_without_login: Vec<(usize, usize)>,
    file_paths: Vec<String>,
    admin_paths: Vec<String>,
    log_paths: Vec<String>,
    payloads: BTreeMap<DataKind, Vec<String>>,
    random_budget: usize,
    seed: u64,
    views: BTreeMap<DataKind, ViewState>,
}

#[derive(Debug, Clone, Copy, Default)]
struct ViewState {
    offset: usize,
    consumed: usize,
}

impl ProviderState {
    /// Assemble provider data from crawl sessions and scripts. Input items
    /// keep file order: crawler-derived sequences first, then scripts. Users
    /// are the distinct acting users in first-seen order plus configured
    /// extras.
    pub fn from_collected(
        collected: &CollectedData,
        extra_users: &[User],
        login_detector: &dyn Fn(&Action) -> bool,
        cfg: &ProviderConfig,
    ) -> ProviderState {
        let inputs = collected.source_inputs();
        let mut users: Vec<User> = Vec::new();
        for seq in &inputs {
            for action in &seq.actions {
                if let Action::Web(w) = action {
                    if !users.contains(&w.user) {
                        users.push(w.user.clone());
                    }
                }
            }
        }
        for u in extra_users {
            if !users.contains(u) {
                users.push(u.clone());
            }
        }

        let mut actions = Vec::new();
        let mut actions_without_login = Vec::new();
        for (si, seq) in inputs.iter().enumerate() {
            let first_login = seq.actions.iter().position(login_detector);
            for (ai, _) in seq.actions.iter().enumerate() {
                actions.push((si, ai));
                if first_login.map_or(true, |login_at| ai < login_at) {
                    actions_without_login.push((si, ai));
                }
            }
        }

        let mut payloads = BTreeMap::new();
        for kind in DataKind::ALL {
            if kind.is_payload() {
                let entries = load_catalog(kind, cfg.payload_dir.as_deref());
                payloads.insert(kind, entries);
            }
        }

        ProviderState {
            inputs,
            users,
            actions,
            actions_without_login,
            file_paths: cfg.file_paths.clone(),
            admin_paths: cfg.admin_paths.clone(),
            log_paths: cfg.log_paths.clone(),
            payloads,
            random_budget: cfg.random_value_budget,
            seed: cfg.seed,
            views: BTreeMap::new(),
        }
    }

    pub fn inputs(&self) -> &[InputSequence] {
        &self.inputs
    }

    pub fn users(&self) -> &[User] {
        &self.users
    }

    fn item_count(&self, kind: DataKind) -> usize {
        match kind {
            DataKind::Input => self.inputs.len(),
            DataKind::User => self.users.len(),
            DataKind::Action => self.actions.len(),
            DataKind::ActionAvailableWithoutLogin => self.actions_without_login.len(),
            DataKind::RandomFilePath => self.file_paths.len(),
            DataKind::RandomAdminFilePath => self.admin_paths.len(),
            DataKind::Log => self.log_paths.len(),
            DataKind::RandomValue => self.random_budget,
            DataKind::Output | DataKind::ParameterValueUsedByOtherUsers => 0,
            kind => self.payloads.get(&kind).map_or(0, Vec::len),
        }
    }

    /// Number of distinct views a full enumeration of `kind` presents.
    pub fn view_count(&self, kind: DataKind) -> usize {
        self.item_count(kind)
    }

    pub fn has_more_views(&mut self, kind: DataKind) -> bool {
        let total = self.view_count(kind);
        let view = self.views.entry(kind).or_default();
        if view.consumed >= total {
            // The kind resets for the next enclosing iteration.
            *view = ViewState::default();
            false
        } else {
            true
        }
    }

    pub fn next_view(&mut self, kind: DataKind) {
        let view = self.views.entry(kind).or_default();
        view.offset = view.consumed;
        view.consumed += 1;
    }

    pub fn current_offset(&self, kind: DataKind) -> usize {
        self.views.get(&kind).map_or(0, |v| v.offset)
    }

    fn rotated(&self, kind: DataKind, dsl_index: usize) -> Result<usize, ProviderError> {
        let n = self.item_count(kind);
        if n == 0 {
            return Err(ProviderError::Empty(kind.function_name()));
        }
        let offset = self.current_offset(kind);
        // DSL indices are 1-based; wrap around the rotated item list.
        Ok((offset + dsl_index.saturating_sub(1)) % n)
    }

    pub fn input(&self, dsl_index: usize) -> Result<&InputSequence, ProviderError> {
        let at = self.rotated(DataKind::Input, dsl_index)?;
        Ok(&self.inputs[at])
    }

    pub fn user(&self, dsl_index: usize) -> Result<&User, ProviderError> {
        let at = self.rotated(DataKind::User, dsl_index)?;
        Ok(&self.users[at])
    }

    /// (sequence index, action index) of the i-th action item.
    pub fn action(&self, dsl_index: usize) -> Result<(usize, usize), ProviderError> {
        let at = self.rotated(DataKind::Action, dsl_index)?;
        Ok(self.actions[at])
    }

    pub fn action_available_without_login(
        &self,
        dsl_index: usize,
    ) -> Result<(usize, usize), ProviderError> {
        let at = self.rotated(DataKind::ActionAvailableWithoutLogin, dsl_index)?;
        Ok(self.actions_without_login[at])
    }

    /// Text item of a payload or SUT-path kind, rotated like the rest.
    pub fn text_item(&self, kind: DataKind, dsl_index: usize) -> Result<String, ProviderError> {
        let at = self.rotated(kind, dsl_index)?;
        let list = match kind {
            DataKind::RandomFilePath => &self.file_paths,
            DataKind::RandomAdminFilePath => &self.admin_paths,
            DataKind::Log => &self.log_paths,
            kind if kind.is_payload() => &self.payloads[&kind],
            other => return Err(ProviderError::Empty(other.function_name())),
        };
        Ok(list[at].clone())
    }

    /// Stable, 1-based catalog lookup that ignores the current view.
    pub fn payload(&self, kind: DataKind, index: usize) -> Result<String, ProviderError> {
        let list = self
            .payloads
            .get(&kind)
            .ok_or(ProviderError::Empty(kind.function_name()))?;
        list.get(index.saturating_sub(1))
            .cloned()
            .ok_or(ProviderError::PayloadIndex {
                kind: kind.function_name(),
                index,
                len: list.len(),
            })
    }

    /// Deterministic value for the current RandomValue view.
    pub fn random_value(&self, type_name: TypeLit) -> RandomValue {
        self.random_value_at(type_name, self.current_offset(DataKind::RandomValue))
    }

    pub fn random_value_at(&self, type_name: TypeLit, i: usize) -> RandomValue {
        let h = mix(self.seed, type_name as u64, i as u64);
        match type_name {
            TypeLit::Boolean => RandomValue::Bool((self.seed.wrapping_add(i as u64)) % 2 == 0),
            TypeLit::Int => RandomValue::Int((h % 1_000_000) as i64),
            TypeLit::String => RandomValue::Str(format!("rv{h:016x}")),
        }
    }

    /// Distinct values other users gave the same parameter of the same
    /// request shape, in first-seen order. The match groups URLs by path and
    /// parameter names, ignoring the parameter values being compared.
    pub fn parameter_values_used_by_other_users(
        &self,
        action: &crate::model::WebAction,
        par_index: usize,
    ) -> Vec<String> {
        let key = crate::webutils::url_shape_key(action);
        let mut values = Vec::new();
        for seq in &self.inputs {
            for other in &seq.actions {
                let Action::Web(w) = other else { continue };
                if w.user == action.user
                    || par_index >= w.parameters.len()
                    || crate::webutils::url_shape_key(w) != key
                {
                    continue;
                }
                let value = w.parameters[par_index].1.clone();
                if !values.contains(&value) {
                    values.push(value);
                }
            }
        }
        values
    }

    pub fn resolve_action<'a>(&'a self, at: (usize, usize)) -> Option<&'a Action> {
        self.inputs.get(at.0).and_then(|s| s.actions.get(at.1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RandomValue {
    Bool(bool),
    Int(i64),
    Str(String),
}

fn mix(seed: u64, tag: u64, i: u64) -> u64 {
    // splitmix64 over the three inputs.
    let mut z = seed ^ tag.wrapping_mul(0x9e3779b97f4a7c15) ^ i.wrapping_mul(0xbf58476d1ce4e5b9);
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Provider slice of the campaign configuration.
#[derive(Debug, Clone, Default)]
pub struct ProviderConfig {
    pub file_paths: Vec<String>,
    pub admin_paths: Vec<String>,
    pub log_paths: Vec<String>,
    pub payload_dir: Option<std::path::PathBuf>,
    pub random_value_budget: usize,
    pub seed: u64,
}

impl ProviderConfig {
    pub fn from_campaign(cfg: &crate::config::CampaignConfig) -> ProviderConfig {
        ProviderConfig {
            file_paths: cfg.paths.files.clone(),
            admin_paths: cfg.paths.admin_files.clone(),
            log_paths: cfg.paths.logs.clone(),
            payload_dir: cfg.payload_dir.clone(),
            random_value_budget: cfg.random_value_budget,
            seed: cfg.seed,
        }
    }
}

fn load_catalog(kind: DataKind, dir: Option<&Path>) -> Vec<String> {
    if let Some(dir) = dir {
        let path = dir.join(format!("{}.txt", kind.function_name()));
        if let Ok(text) = std::fs::read_to_string(&path) {
            let entries: Vec<String> = text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| {
                    if kind.is_file_payload() {
                        dir.join(l.trim()).to_string_lossy().into_owned()
                    } else {
                        l.to_string()
                    }
                })
                .collect();
            if !entries.is_empty() {
                return entries;
            }
        }
    }
    payloads::default_entries(kind)
        .iter()
        .map(|s| s.to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Origin, WebAction};

    fn provider_with(users: &[&str], input_count: usize) -> ProviderState {
        let mut collected = CollectedData::default();
        for (i, name) in users.iter().enumerate() {
            let user = User::new(name, name, "pw", "user");
            let seq = InputSequence::new(
                &format!("s{i}"),
                Origin::Script,
                vec![Action::Web(WebAction::get("http://sut/a", user))],
            );
            collected.script_inputs.push(seq);
        }
        for i in users.len()..input_count {
            let user = User::new(users[0], users[0], "pw", "user");
            let seq = InputSequence::new(
                &format!("s{i}"),
                Origin::Script,
                vec![Action::Web(WebAction::get("http://sut/b", user))],
            );
            collected.script_inputs.push(seq);
        }
        let cfg = ProviderConfig {
            random_value_budget: 100,
            seed: 1,
            ..ProviderConfig::default()
        };
        ProviderState::from_collected(&collected, &[], &|_| false, &cfg)
    }

    #[test]
    fn views_rotate_left_by_one() {
        let mut p = provider_with(&["u1", "u2", "u3"], 3);
        let mut seen = Vec::new();
        while p.has_more_views(DataKind::User) {
            p.next_view(DataKind::User);
            let view: Vec<String> = (1..=3).map(|i| p.user(i).unwrap().username.clone()).collect();
            seen.push(view);
        }
        assert_eq!(
            seen,
            vec![
                vec!["u1", "u2", "u3"],
                vec!["u2", "u3", "u1"],
                vec!["u3", "u1", "u2"],
            ]
        );
        // Exhausted kinds reset for the next enclosing iteration.
        assert!(p.has_more_views(DataKind::User));
    }

    #[test]
    fn single_item_yields_one_identical_view() {
        let mut p = provider_with(&["solo"], 1);
        let mut count = 0;
        while p.has_more_views(DataKind::User) {
            p.next_view(DataKind::User);
            assert_eq!(p.user(1).unwrap().username, "solo");
            count += 1;
        }
        assert_eq!(count, 1);
    }

    #[test]
    fn random_value_kind_is_capped_by_budget() {
        let mut p = provider_with(&["u"], 1);
        let mut count = 0;
        while p.has_more_views(DataKind::RandomValue) {
            p.next_view(DataKind::RandomValue);
            count += 1;
        }
        assert_eq!(count, 100);
    }

    #[test]
    fn dsl_index_wraps_modulo_item_count() {
        let mut p = provider_with(&["u1", "u2", "u3"], 3);
        p.has_more_views(DataKind::Input);
        p.next_view(DataKind::Input);
        p.has_more_views(DataKind::Input);
        p.next_view(DataKind::Input); // offset 1
        assert_eq!(p.input(1).unwrap().id, "s1");
        assert_eq!(p.input(4).unwrap().id, "s1"); // (1 + 3) mod 3
        assert_eq!(p.input(2).unwrap().id, "s2");
    }

    #[test]
    fn convenience_index_equals_one() {
        let p = provider_with(&["u1", "u2"], 2);
        assert_eq!(p.user(1).unwrap().username, "u1");
    }

    #[test]
    fn empty_kind_is_an_error() {
        let p = provider_with(&["u1"], 1);
        assert_eq!(
            p.text_item(DataKind::Log, 1),
            Err(ProviderError::Empty("Log"))
        );
    }

    #[test]
    fn payload_lookup_is_one_based_and_stable() {
        let p = provider_with(&["u1"], 1);
        assert_eq!(
            p.payload(DataKind::XssInjection, 1).unwrap(),
            "<SCRIPT>alert('XSS');</SCRIPT>"
        );
        assert_eq!(p.payload(DataKind::SqlInjection, 1).unwrap(), "'or '1' = '1");
        assert_eq!(p.payload(DataKind::Crlf, 1).unwrap(), ");die(2");
        assert!(p.payload(DataKind::Crlf, 99).is_err());
    }

    #[test]
    fn random_values_are_deterministic_and_boolean_alternates() {
        let p = provider_with(&["u1"], 1);
        assert_eq!(
            p.random_value_at(TypeLit::String, 7),
            p.random_value_at(TypeLit::String, 7)
        );
        let b0 = p.random_value_at(TypeLit::Boolean, 0);
        let b1 = p.random_value_at(TypeLit::Boolean, 1);
        assert_ne!(b0, b1);
    }

    #[test]
    fn other_user_parameter_values_are_filtered_and_ordered() {
        let a = User::new("a", "a", "pw", "user");
        let b = User::new("b", "b", "pw", "user");
        let mk = |user: &User, val: &str| {
            let mut w = WebAction::get("http://sut/profile", user.clone());
            w.parameters.push(("id".into(), val.into()));
            InputSequence::new(
                &format!("{}-{val}", user.id),
                Origin::Script,
                vec![Action::Web(w)],
            )
        };
        let mut collected = CollectedData::default();
        collected.script_inputs.push(mk(&a, "1"));
        collected.script_inputs.push(mk(&b, "2"));
        collected.script_inputs.push(mk(&b, "3"));
        collected.script_inputs.push(mk(&b, "2"));
        let cfg = ProviderConfig {
            random_value_budget: 100,
            ..ProviderConfig::default()
        };
        let p = ProviderState::from_collected(&collected, &[], &|_| false, &cfg);

        let query = collected.script_inputs[0].actions[0].as_web().unwrap();
        assert_eq!(
            p.parameter_values_used_by_other_users(query, 0),
            vec!["2".to_string(), "3".to_string()]
        );
        // From b's point of view only a's value is foreign.
        let query_b = collected.script_inputs[1].actions[0].as_web().unwrap();
        assert_eq!(
            p.parameter_values_used_by_other_users(query_b, 0),
            vec!["1".to_string()]
        );
    }
}
