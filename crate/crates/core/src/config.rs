//! Campaign configuration: the one file that tells the toolchain where the
//! system under test lives, who may log in, and how outputs are judged.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::User;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SutConfig {
    /// Base URL for the default (encrypted) channel.
    pub base_url: String,
    /// Base URL for the plaintext channel a relation may switch to.
    pub insecure_base_url: String,
    #[serde(default = "default_reset_endpoint")]
    pub reset_endpoint: String,
    /// Stateful systems force the engine to serialize executions.
    #[serde(default)]
    pub stateless: bool,
    /// Accept self-signed certificates when testing over TLS.
    #[serde(default)]
    pub insecure_tls: bool,
}

fn default_reset_endpoint() -> String {
    "/__test__/reset".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Credential {
    pub id: String,
    pub username: String,
    pub password: String,
    #[serde(default = "default_role")]
    pub role: String,
}

fn default_role() -> String {
    "user".to_string()
}

impl Credential {
    pub fn to_user(&self) -> User {
        User::new(&self.id, &self.username, &self.password, &self.role)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparatorSettings {
    /// Fraction of the longer page length tolerated as edit distance.
    #[serde(default = "default_threshold")]
    pub similarity_threshold: f64,
    /// Pages matching this pattern (or status >= 400) count as errors.
    #[serde(default = "default_error_pattern")]
    pub error_pattern: String,
    /// A script region matching this marks the output as raising a dialog.
    #[serde(default = "default_alert_pattern")]
    pub alert_pattern: String,
    /// Regexes scrubbed from bodies before comparison. Off by default.
    #[serde(default)]
    pub scrub_patterns: Vec<String>,
}

fn default_threshold() -> f64 {
    0.05
}

fn default_error_pattern() -> String {
    "(?i)access denied|error:|forbidden".to_string()
}

fn default_alert_pattern() -> String {
    r"alert\s*\(".to_string()
}

impl Default for ComparatorSettings {
    fn default() -> Self {
        ComparatorSettings {
            similarity_threshold: default_threshold(),
            error_pattern: default_error_pattern(),
            alert_pattern: default_alert_pattern(),
            scrub_patterns: Vec::new(),
        }
    }
}

/// URL and form-field shapes used to recognize logins, signups and password
/// resets; pattern-driven because they vary per system under test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSettings {
    #[serde(default = "default_login_patterns")]
    pub login_url_patterns: Vec<String>,
    #[serde(default = "default_signup_patterns")]
    pub signup_url_patterns: Vec<String>,
    #[serde(default = "default_reset_password_patterns")]
    pub reset_password_url_patterns: Vec<String>,
    #[serde(default = "default_username_fields")]
    pub username_field_pattern: String,
    #[serde(default = "default_password_fields")]
    pub password_field_pattern: String,
}

fn default_login_patterns() -> Vec<String> {
    vec!["/login".to_string()]
}

fn default_signup_patterns() -> Vec<String> {
    vec!["/signup".to_string(), "/register".to_string()]
}

fn default_reset_password_patterns() -> Vec<String> {
    vec!["/reset-password".to_string(), "/forgot".to_string()]
}

fn default_username_fields() -> String {
    "(?i)^(user|username|login|email|new_user)$".to_string()
}

fn default_password_fields() -> String {
    "(?i)^(pass|password|pwd|confirm)$".to_string()
}

impl Default for DetectionSettings {
    fn default() -> Self {
        DetectionSettings {
            login_url_patterns: default_login_patterns(),
            signup_url_patterns: default_signup_patterns(),
            reset_password_url_patterns: default_reset_password_patterns(),
            username_field_pattern: default_username_fields(),
            password_field_pattern: default_password_fields(),
        }
    }
}

/// Path manifests backing the SUT-data functions; a black-box campaign
/// cannot inspect the server's file system, so these are declared up front.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PathManifests {
    #[serde(default)]
    pub files: Vec<String>,
    #[serde(default)]
    pub admin_files: Vec<String>,
    #[serde(default)]
    pub logs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrawlSettings {
    #[serde(default = "default_max_states")]
    pub max_states: usize,
    #[serde(default = "default_max_actions")]
    pub max_actions: usize,
    /// (field-name regex, value) pairs tried in order when filling forms.
    #[serde(default)]
    pub form_fill: Vec<(String, String)>,
    #[serde(default = "default_fill_value")]
    pub default_fill: String,
}

fn default_max_states() -> usize {
    50
}

fn default_max_actions() -> usize {
    400
}

fn default_fill_value() -> String {
    "test".to_string()
}

impl Default for CrawlSettings {
    fn default() -> Self {
        CrawlSettings {
            max_states: default_max_states(),
            max_actions: default_max_actions(),
            form_fill: Vec::new(),
            default_fill: default_fill_value(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub sut: SutConfig,
    #[serde(default)]
    pub credentials: Vec<Credential>,
    /// Crawl and test as the anonymous visitor too.
    #[serde(default = "default_true")]
    pub include_anonymous: bool,
    /// (supervisor id, subordinate id): the first may access the second's URLs.
    #[serde(default)]
    pub supervisors: Vec<(String, String)>,
    #[serde(default)]
    pub comparator: ComparatorSettings,
    #[serde(default)]
    pub detection: DetectionSettings,
    #[serde(default)]
    pub paths: PathManifests,
    /// Directory of payload catalogs overriding the built-in ones.
    #[serde(default)]
    pub payload_dir: Option<PathBuf>,
    /// Hand-written interaction scripts ingested as extra source inputs.
    #[serde(default)]
    pub scripts: Vec<PathBuf>,
    #[serde(default = "default_random_budget")]
    pub random_value_budget: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub per_mr_time_budget_secs: Option<u64>,
    #[serde(default)]
    pub crawl: CrawlSettings,
}

fn default_true() -> bool {
    true
}

fn default_random_budget() -> usize {
    100
}

fn default_parallelism() -> usize {
    1
}

impl CampaignConfig {
    pub fn load(path: &Path) -> Result<CampaignConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: CampaignConfig = toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        let text = toml::to_string_pretty(self).expect("config serializes");
        std::fs::write(path, text).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = self.comparator.similarity_threshold;
        if !(t > 0.0 && t < 1.0) {
            return Err(ConfigError::Invalid(format!(
                "similarity_threshold must lie in (0,1), got {t}"
            )));
        }
        if self.credentials.is_empty() && !self.include_anonymous {
            return Err(ConfigError::Invalid(
                "need at least one credential or the anonymous user".to_string(),
            ));
        }
        Ok(())
    }

    /// `MST_SEED` overrides the configured random seed.
    pub fn apply_env_overrides(&mut self) {
        if let Ok(seed) = std::env::var("MST_SEED") {
            if let Ok(seed) = seed.parse() {
                self.seed = seed;
            }
        }
    }

    /// Users a campaign acts as: anonymous first when enabled, then the
    /// configured credentials in order.
    pub fn users(&self) -> Vec<User> {
        let mut users = Vec::new();
        if self.include_anonymous {
            users.push(User::anonymous());
        }
        users.extend(self.credentials.iter().map(Credential::to_user));
        users
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CampaignConfig {
        CampaignConfig {
            sut: SutConfig {
                base_url: "http://127.0.0.1:8080".into(),
                insecure_base_url: "http://127.0.0.1:8081".into(),
                reset_endpoint: default_reset_endpoint(),
                stateless: false,
                insecure_tls: false,
            },
            credentials: vec![Credential {
                id: "admin".into(),
                username: "admin".into(),
                password: "admin-pw".into(),
                role: "admin".into(),
            }],
            include_anonymous: true,
            supervisors: vec![("admin".into(), "tester".into())],
            comparator: ComparatorSettings::default(),
            detection: DetectionSettings::default(),
            paths: PathManifests {
                files: vec!["readme.txt".into()],
                admin_files: vec![],
                logs: vec![],
            },
            payload_dir: None,
            scripts: vec![],
            random_value_budget: 100,
            seed: 7,
            parallelism: 1,
            per_mr_time_budget_secs: None,
            crawl: CrawlSettings::default(),
        }
    }

    #[test]
    fn toml_round_trip() {
        let cfg = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("campaign.toml");
        cfg.save(&path).unwrap();
        let loaded = CampaignConfig::load(&path).unwrap();
        assert_eq!(loaded, cfg);
    }

    #[test]
    fn threshold_outside_unit_interval_is_rejected() {
        let mut cfg = sample();
        cfg.comparator.similarity_threshold = 1.5;
        assert!(cfg.validate().is_err());
        cfg.comparator.similarity_threshold = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn anonymous_user_listed_first() {
        let users = sample().users();
        assert!(users[0].is_anonymous());
        assert_eq!(users[1].username, "admin");
    }
}
