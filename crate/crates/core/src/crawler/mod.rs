//! Crawler: builds a per-user state graph of the system under test, records
//! every action and output, and derives source input sequences from the
//! graph's depth-first spanning tree.

pub mod html;
pub mod script;
pub mod store;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::executor::{perform, SutTarget, Transport};
use crate::model::{
    Action, Channel, ElementKind, InputSequence, Origin, Session, User, WebAction, WebOutput,
};
use crate::webutils::ActionClassifier;

use html::PageElement;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrawlState {
    pub id: usize,
    pub url: String,
    pub representative_body: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrawlEdge {
    pub id: usize,
    pub from_state: usize,
    pub to_state: usize,
    pub action: Action,
    pub output: WebOutput,
    pub element_path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrawlSession {
    pub user: User,
    pub timestamp: u64,
    pub sut: String,
    pub root_state: usize,
    pub states: Vec<CrawlState>,
    pub edges: Vec<CrawlEdge>,
    /// Root-to-leaf paths of the DFS spanning tree, as edge-id lists.
    pub derived_inputs: Vec<Vec<usize>>,
    /// Requests spent while exploring.
    pub budget_spent: usize,
}

impl CrawlSession {
    /// The recorded source inputs, one per derived edge path.
    pub fn input_sequences(&self) -> Vec<InputSequence> {
        self.derived_inputs
            .iter()
            .enumerate()
            .map(|(k, path)| {
                let actions = path
                    .iter()
                    .map(|edge_id| self.edges[*edge_id].action.clone())
                    .collect();
                InputSequence::new(&format!("crawl:{}:{k}", self.user.id), Origin::Crawler, actions)
            })
            .collect()
    }
}

/// First existing state whose representative body stays within the
/// similarity threshold; None means the page forms a new state.
pub fn classify_state(states: &[CrawlState], body: &str, threshold: f64) -> Option<usize> {
    states
        .iter()
        .find(|s| crate::textdist::within_threshold(&s.representative_body, body, threshold))
        .map(|s| s.id)
}

/// Root-to-leaf action paths over the DFS spanning tree of the recorded
/// graph. Adjacency follows edge-id order; an edge to an already-visited
/// state is kept in the graph but cut from the tree, so paths stay finite.
pub fn derive_edge_paths(
    root: usize,
    state_count: usize,
    edges: &[(usize, usize, usize)], // (edge id, from, to)
) -> Vec<Vec<usize>> {
    let mut adjacency: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for (id, from, to) in edges {
        adjacency.entry(*from).or_default().push((*id, *to));
    }
    let mut visited = vec![false; state_count];
    visited[root] = true;
    let mut paths = Vec::new();
    let mut path = Vec::new();
    dfs(root, &adjacency, &mut visited, &mut path, &mut paths);
    paths
}

fn dfs(
    state: usize,
    adjacency: &BTreeMap<usize, Vec<(usize, usize)>>,
    visited: &mut Vec<bool>,
    path: &mut Vec<usize>,
    paths: &mut Vec<Vec<usize>>,
) {
    let mut extended = false;
    if let Some(next) = adjacency.get(&state) {
        for (edge_id, to) in next {
            if !visited[*to] {
                visited[*to] = true;
                extended = true;
                path.push(*edge_id);
                dfs(*to, adjacency, visited, path, paths);
                path.pop();
            }
        }
    }
    if !extended && !path.is_empty() {
        paths.push(path.clone());
    }
}

/// Derive source inputs for a recorded session (used when loading sessions
/// persisted by older runs that lack the path lists).
pub fn derive_source_inputs(session: &CrawlSession) -> Vec<Vec<usize>> {
    let edges: Vec<(usize, usize, usize)> = session
        .edges
        .iter()
        .map(|e| (e.id, e.from_state, e.to_state))
        .collect();
    derive_edge_paths(session.root_state, session.states.len(), &edges)
}

#[derive(Debug, thiserror::Error)]
pub enum CrawlError {
    #[error("system under test unreachable at {url}: {message}")]
    Unreachable { url: String, message: String },
}

pub struct CrawlConfig {
    pub max_states: usize,
    pub max_actions: usize,
    /// (field-name regex, value) pairs tried in order when filling forms.
    pub form_fill: Vec<(regex::Regex, String)>,
    pub default_fill: String,
}

impl CrawlConfig {
    pub fn from_campaign(cfg: &crate::config::CampaignConfig) -> CrawlConfig {
        CrawlConfig {
            max_states: cfg.crawl.max_states,
            max_actions: cfg.crawl.max_actions,
            form_fill: cfg
                .crawl
                .form_fill
                .iter()
                .filter_map(|(p, v)| regex::Regex::new(p).ok().map(|re| (re, v.clone())))
                .collect(),
            default_fill: cfg.crawl.default_fill.clone(),
        }
    }

    fn fill_value(&self, field: &str) -> String {
        for (re, value) in &self.form_fill {
            if re.is_match(field) {
                return value.clone();
            }
        }
        self.default_fill.clone()
    }
}

/// Explore the user interface of the SUT as `user`, depth first. Every page
/// load is classified against known states by edit distance; edges to known
/// states are recorded but not traversed. Each exploration step replays the
/// path from the root on a fresh session, so recorded outputs match what an
/// independent replay of the derived sequence would see.
pub fn crawl(
    transport: &mut dyn Transport,
    target: &SutTarget,
    classifier: &ActionClassifier,
    cfg: &CrawlConfig,
    user: &User,
) -> Result<CrawlSession, CrawlError> {
    let root_url = target.rebase("/", Channel::Https);
    let mut session = Session::new();
    let mut probe = WebAction::get(&root_url, user.clone());
    probe.element_path = "/".to_string();
    let root_output = perform(transport, target, &probe, &mut session, 0);
    if root_output.status == 0 {
        return Err(CrawlError::Unreachable {
            url: root_url,
            message: "no response".to_string(),
        });
    }

    let mut crawl = Crawl {
        transport,
        target,
        classifier,
        cfg,
        user,
        states: vec![CrawlState {
            id: 0,
            url: root_url.clone(),
            representative_body: root_output.body.clone(),
        }],
        edges: Vec::new(),
        actions_spent: 1,
    };
    crawl.explore(0, &[]);

    let edges_flat: Vec<(usize, usize, usize)> = crawl
        .edges
        .iter()
        .map(|e| (e.id, e.from_state, e.to_state))
        .collect();
    let derived_inputs = derive_edge_paths(0, crawl.states.len(), &edges_flat);
    Ok(CrawlSession {
        user: user.clone(),
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        sut: target.secure_base.clone(),
        root_state: 0,
        states: crawl.states,
        edges: crawl.edges,
        derived_inputs,
        budget_spent: crawl.actions_spent,
    })
}

struct Crawl<'a> {
    transport: &'a mut dyn Transport,
    target: &'a SutTarget,
    classifier: &'a ActionClassifier,
    cfg: &'a CrawlConfig,
    user: &'a User,
    states: Vec<CrawlState>,
    edges: Vec<CrawlEdge>,
    actions_spent: usize,
}

impl Crawl<'_> {
    fn explore(&mut self, state_id: usize, path: &[usize]) {
        if self.states.len() >= self.cfg.max_states {
            return;
        }
        let page_url = self.states[state_id].url.clone();
        let body = self.states[state_id].representative_body.clone();
        for element in html::extract_elements(&body) {
            if self.actions_spent >= self.cfg.max_actions
                || self.states.len() >= self.cfg.max_states
            {
                return;
            }
            let Some(action) = self.action_for(&element, &page_url) else {
                continue;
            };
            // Replay the discovery path on a fresh session, then act.
            let mut session = Session::new();
            for edge_id in path {
                let replayed = self.edges[*edge_id].action.clone();
                if let Action::Web(w) = &replayed {
                    perform(self.transport, self.target, w, &mut session, 0);
                    self.actions_spent += 1;
                }
            }
            let output = perform(self.transport, self.target, &action, &mut session, 0);
            self.actions_spent += 1;

            let threshold = self.classifier.similarity_threshold();
            let (to_state, fresh) = match classify_state(&self.states, &output.body, threshold) {
                Some(existing) => (existing, false),
                None => {
                    let id = self.states.len();
                    self.states.push(CrawlState {
                        id,
                        url: action.full_url(),
                        representative_body: output.body.clone(),
                    });
                    (id, true)
                }
            };
            let edge_id = self.edges.len();
            let element_path = action.element_path.clone();
            self.edges.push(CrawlEdge {
                id: edge_id,
                from_state: state_id,
                to_state,
                action: Action::Web(action),
                output,
                element_path,
            });
            if fresh {
                let mut deeper = path.to_vec();
                deeper.push(edge_id);
                self.explore(to_state, &deeper);
            }
        }
    }

    fn action_for(&self, element: &PageElement, page_url: &str) -> Option<WebAction> {
        let base = url::Url::parse(page_url).ok();
        match element {
            PageElement::Anchor { href, path } => {
                let resolved = html::resolve(base.as_ref(), href)?;
                // Stay on the system under test.
                if !resolved.starts_with(self.target.secure_base.trim_end_matches('/')) {
                    return None;
                }
                let (url_part, params) = split_query(&resolved);
                let mut action = WebAction::get(&url_part, self.user.clone());
                action.parameters = params;
                action.element_url = page_url.to_string();
                action.element_path = path.clone();
                action.element_kind = ElementKind::Anchor;
                Some(action)
            }
            PageElement::Form {
                action: form_action,
                method,
                fields,
                path,
            } => {
                let resolved = html::resolve(base.as_ref(), form_action)?;
                if !resolved.starts_with(self.target.secure_base.trim_end_matches('/')) {
                    return None;
                }
                let filled = self.fill_fields(&resolved, fields);
                let mut action = WebAction::get(&resolved, self.user.clone());
                action.method = method.clone();
                if method.eq_ignore_ascii_case("GET") {
                    action.parameters = filled;
                } else {
                    action.form_inputs = filled;
                }
                action.element_url = page_url.to_string();
                action.element_path = path.clone();
                action.element_kind = ElementKind::SubmitButton;
                Some(action)
            }
        }
    }

    /// Markup values win, then the user's credentials on login forms, then
    /// the configured per-field defaults.
    fn fill_fields(
        &self,
        form_url: &str,
        fields: &[(String, Option<String>)],
    ) -> Vec<(String, String)> {
        let is_login_form = self.classifier.url_matches_login(form_url) && !self.user.is_anonymous();
        fields
            .iter()
            .map(|(name, preset)| {
                let value = if let Some(preset) = preset {
                    preset.clone()
                } else if is_login_form && self.classifier.is_username_field(name) {
                    self.user.username.clone()
                } else if is_login_form && self.classifier.is_password_field(name) {
                    self.user.password.clone()
                } else {
                    self.cfg.fill_value(name)
                };
                (name.clone(), value)
            })
            .collect()
    }
}

pub fn split_query(url: &str) -> (String, Vec<(String, String)>) {
    match url::Url::parse(url) {
        Ok(mut parsed) => {
            let params: Vec<(String, String)> = parsed
                .query_pairs()
                .map(|(k, v)| (k.into_owned(), v.into_owned()))
                .collect();
            parsed.set_query(None);
            (parsed.to_string(), params)
        }
        Err(_) => (url.to_string(), Vec::new()),
    }
}

/// URLs a user's crawl can reach: every action URL plus every anchor on a
/// recorded page, normalized for set membership.
pub fn reachable_urls(session: &CrawlSession) -> BTreeSet<String> {
    let mut urls = BTreeSet::new();
    for edge in &session.edges {
        if let Action::Web(w) = &edge.action {
            urls.insert(crate::webutils::normalize_url(&w.full_url()));
        }
    }
    for state in &session.states {
        for anchor in html::anchor_urls(&state.representative_body, &state.url) {
            urls.insert(crate::webutils::normalize_url(&anchor));
        }
    }
    urls
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_matches_first_state_within_threshold() {
        let states = vec![
            CrawlState {
                id: 0,
                url: "u0".into(),
                representative_body: "x".repeat(1000),
            },
            CrawlState {
                id: 1,
                url: "u1".into(),
                representative_body: "y".repeat(1000),
            },
        ];
        let body_identical = "x".repeat(1000);
        assert_eq!(classify_state(&states, &body_identical, 0.05), Some(0));

        let mut one_off = "x".repeat(999);
        one_off.push('z');
        assert_eq!(classify_state(&states, &one_off, 0.05), Some(0));

        let mut twenty_percent = "x".repeat(800);
        twenty_percent.push_str(&"q".repeat(200));
        assert_eq!(classify_state(&states, &twenty_percent, 0.05), None);
    }

    #[test]
    fn dfs_paths_enumerate_leaves() {
        // root -> A (e0), root -> B (e1), A -> C (e2)
        let edges = vec![(0, 0, 1), (1, 0, 2), (2, 1, 3)];
        let paths = derive_edge_paths(0, 4, &edges);
        assert_eq!(paths, vec![vec![0, 2], vec![1]]);
    }

    #[test]
    fn single_state_graph_has_no_sequences() {
        let paths = derive_edge_paths(0, 1, &[]);
        assert!(paths.is_empty());
    }

    #[test]
    fn cycle_edges_are_cut_at_first_revisit() {
        // root -> A (e0), A -> root (e1: back edge), A -> B (e2)
        let edges = vec![(0, 0, 1), (1, 1, 0), (2, 1, 2)];
        let paths = derive_edge_paths(0, 3, &edges);
        assert_eq!(paths, vec![vec![0, 2]]);
    }
}
