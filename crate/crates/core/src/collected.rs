//! Everything data collection produced for a campaign: crawl sessions plus
//! script-derived sequences. Source inputs, reachability sets and recorded
//! outputs are all answered from here.

use std::collections::BTreeSet;
use std::path::Path;

use crate::crawler::script::{ingest_script, LoginTemplate, ScriptError};
use crate::crawler::store::{load_session, StoreError};
use crate::crawler::{reachable_urls, CrawlSession};
use crate::model::{InputSequence, User, WebOutput};

#[derive(Debug, Clone, Default)]
pub struct CollectedData {
    pub sessions: Vec<CrawlSession>,
    pub script_inputs: Vec<InputSequence>,
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Script(#[from] ScriptError),
}

impl CollectedData {
    /// Load sessions and scripts in the given file order.
    pub fn load(
        session_paths: &[std::path::PathBuf],
        script_paths: &[std::path::PathBuf],
        base_url: &str,
        users: &[User],
        login: &LoginTemplate,
    ) -> Result<CollectedData, LoadError> {
        let mut data = CollectedData::default();
        for path in session_paths {
            data.sessions.push(load_session(path)?);
        }
        for path in script_paths {
            data.script_inputs
                .push(ingest_script(path, base_url, users, login)?);
        }
        Ok(data)
    }

    /// Session files found in a directory, sorted by file name.
    pub fn session_files(dir: &Path) -> std::io::Result<Vec<std::path::PathBuf>> {
        let mut files: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().map_or(false, |x| x == "json"))
            .collect();
        files.sort();
        Ok(files)
    }

    /// All source inputs: crawler-derived sequences in session order, then
    /// script sequences.
    pub fn source_inputs(&self) -> Vec<InputSequence> {
        let mut inputs = Vec::new();
        for session in &self.sessions {
            inputs.extend(session.input_sequences());
        }
        inputs.extend(self.script_inputs.iter().cloned());
        inputs
    }

    pub fn has_crawl_for(&self, user: &User) -> bool {
        self.sessions.iter().any(|s| s.user.id == user.id)
    }

    /// Normalized URLs reachable through the GUI for a user, across all of
    /// that user's crawl sessions. None when the user was never crawled.
    pub fn reachable_set(&self, user: &User) -> Option<BTreeSet<String>> {
        let mut found = false;
        let mut urls = BTreeSet::new();
        for session in &self.sessions {
            if session.user.id == user.id {
                found = true;
                urls.extend(reachable_urls(session));
            }
        }
        found.then_some(urls)
    }

    /// Every output recorded for a user during data collection.
    pub fn outputs_for<'a>(&'a self, user: &'a User) -> impl Iterator<Item = &'a WebOutput> + 'a {
        self.sessions
            .iter()
            .filter(move |s| s.user.id == user.id)
            .flat_map(|s| s.edges.iter().map(|e| &e.output))
    }
}
