//! Line-oriented interaction scripts, the hand-written complement to
//! crawling. One script maps 1:1 to a source input sequence.
//!
//! ```text
//! # comment
//! login devel
//! get /home
//! post /jobs task=backup
//! wait 1000
//! reset
//! ```

use std::path::Path;

use crate::model::{Action, ElementKind, InputSequence, Origin, User, WebAction};

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("{file}:{line}: unknown verb `{verb}`")]
    UnknownVerb {
        file: String,
        line: usize,
        verb: String,
    },
    #[error("{file}:{line}: {message}")]
    Malformed {
        file: String,
        line: usize,
        message: String,
    },
    #[error("{file}:{line}: unknown user `{name}`")]
    UnknownUser {
        file: String,
        line: usize,
        name: String,
    },
    #[error("cannot read script {file}: {source}")]
    Io {
        file: String,
        source: std::io::Error,
    },
}

/// Concrete login-form shape used to expand `login <user>` lines.
pub struct LoginTemplate {
    pub url: String,
    pub username_field: String,
    pub password_field: String,
}

impl Default for LoginTemplate {
    fn default() -> Self {
        LoginTemplate {
            url: "/login".to_string(),
            username_field: "user".to_string(),
            password_field: "pass".to_string(),
        }
    }
}

pub fn ingest_script(
    path: &Path,
    base_url: &str,
    users: &[User],
    login: &LoginTemplate,
) -> Result<InputSequence, ScriptError> {
    let file = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ScriptError::Io {
        file: file.clone(),
        source,
    })?;
    let seq_id = format!(
        "script:{}",
        path.file_stem().map(|s| s.to_string_lossy()).unwrap_or_default()
    );
    parse_script(&text, &file, &seq_id, base_url, users, login)
}

pub fn parse_script(
    text: &str,
    file: &str,
    seq_id: &str,
    base_url: &str,
    users: &[User],
    login: &LoginTemplate,
) -> Result<InputSequence, ScriptError> {
    let mut current_user = User::anonymous();
    let mut actions = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut words = trimmed.split_whitespace();
        let verb = words.next().unwrap();
        match verb {
            "login" => {
                let name = words.next().ok_or_else(|| ScriptError::Malformed {
                    file: file.to_string(),
                    line,
                    message: "login needs a user name".to_string(),
                })?;
                let user = users
                    .iter()
                    .find(|u| u.id == name || u.username == name)
                    .ok_or_else(|| ScriptError::UnknownUser {
                        file: file.to_string(),
                        line,
                        name: name.to_string(),
                    })?
                    .clone();
                current_user = user.clone();
                let mut action = WebAction::post(
                    &absolute(base_url, &login.url),
                    vec![
                        (login.username_field.clone(), user.username.clone()),
                        (login.password_field.clone(), user.password.clone()),
                    ],
                    user,
                );
                action.element_kind = ElementKind::None;
                actions.push(Action::Web(action));
            }
            "get" | "post" => {
                let target = words.next().ok_or_else(|| ScriptError::Malformed {
                    file: file.to_string(),
                    line,
                    message: format!("{verb} needs a URL"),
                })?;
                let pairs: Result<Vec<(String, String)>, ScriptError> = words
                    .map(|w| {
                        w.split_once('=')
                            .map(|(k, v)| (k.to_string(), v.to_string()))
                            .ok_or_else(|| ScriptError::Malformed {
                                file: file.to_string(),
                                line,
                                message: format!("expected key=value, got `{w}`"),
                            })
                    })
                    .collect();
                let pairs = pairs?;
                let (url_part, mut params) = crate::crawler::split_query(&absolute(base_url, target));
                let mut action = WebAction::get(&url_part, current_user.clone());
                if verb == "get" {
                    params.extend(pairs);
                    action.parameters = params;
                } else {
                    action.method = "POST".to_string();
                    action.parameters = params;
                    action.form_inputs = pairs;
                }
                actions.push(Action::Web(action));
            }
            "wait" => {
                let ms = words
                    .next()
                    .and_then(|w| w.parse().ok())
                    .ok_or_else(|| ScriptError::Malformed {
                        file: file.to_string(),
                        line,
                        message: "wait needs a millisecond count".to_string(),
                    })?;
                actions.push(Action::Wait {
                    duration_ms: ms,
                    position: 0,
                });
            }
            "reset" => actions.push(Action::ResetSut { position: 0 }),
            other => {
                return Err(ScriptError::UnknownVerb {
                    file: file.to_string(),
                    line,
                    verb: other.to_string(),
                })
            }
        }
    }
    Ok(InputSequence::new(seq_id, Origin::Script, actions))
}

fn absolute(base_url: &str, target: &str) -> String {
    if target.starts_with("http://") || target.starts_with("https://") {
        target.to_string()
    } else {
        format!("{}{}", base_url.trim_end_matches('/'), target)
    }
}
