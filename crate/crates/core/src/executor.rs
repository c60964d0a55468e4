//! Executes input sequences against the system under test: lazy per-action
//! output resolution with caching, cookie carry-over, channel switching,
//! simulated time and SUT reset.

use std::collections::HashMap;
use std::rc::Rc;

use crate::model::{Action, Channel, InputSequence, Session, WebAction, WebOutput};
use crate::webutils::Comparator;

/// Header carrying the accumulated simulated-time offset. The fixture
/// interprets it; real systems are free to ignore it.
pub const CLOCK_HEADER: &str = "X-MST-Clock-Offset-Ms";

#[derive(Debug, Clone)]
pub struct HttpRequest {
    pub method: String,
    pub url: String,
    pub headers: Vec<(String, String)>,
    /// URL-encoded body; implies `application/x-www-form-urlencoded`.
    pub form_body: Option<String>,
}

#[derive(Debug, Clone)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
    /// (name, value) pairs from Set-Cookie headers, in header order.
    pub set_cookies: Vec<(String, String)>,
}

#[derive(Debug, thiserror::Error)]
#[error("transport failure for {method} {url}: {message}")]
pub struct TransportError {
    pub method: String,
    pub url: String,
    pub message: String,
}

pub trait Transport: Send {
    fn send(&mut self, req: &HttpRequest) -> Result<HttpResponse, TransportError>;
}

/// Blocking HTTP client used for real campaigns.
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new(insecure_tls: bool) -> Result<ReqwestTransport, reqwest::Error> {
        let client = reqwest::blocking::Client::builder()
            .danger_accept_invalid_certs(insecure_tls)
            .redirect(reqwest::redirect::Policy::none())
            .build()?;
        Ok(ReqwestTransport { client })
    }
}

impl Transport for ReqwestTransport {
    fn send(&mut self, req: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let method = reqwest::Method::from_bytes(req.method.as_bytes()).map_err(|e| {
            TransportError {
                method: req.method.clone(),
                url: req.url.clone(),
                message: e.to_string(),
            }
        })?;
        let mut builder = self.client.request(method, &req.url);
        for (name, value) in &req.headers {
            builder = builder.header(name, value);
        }
        if let Some(body) = &req.form_body {
            builder = builder
                .header("Content-Type", "application/x-www-form-urlencoded")
                .body(body.clone());
        }
        let response = builder.send().map_err(|e| TransportError {
            method: req.method.clone(),
            url: req.url.clone(),
            message: e.to_string(),
        })?;
        let status = response.status().as_u16();
        let set_cookies = response
            .headers()
            .get_all("set-cookie")
            .iter()
            .filter_map(|v| v.to_str().ok())
            .filter_map(parse_set_cookie)
            .collect();
        let body = response.text().map_err(|e| TransportError {
            method: req.method.clone(),
            url: req.url.clone(),
            message: e.to_string(),
        })?;
        Ok(HttpResponse {
            status,
            body,
            set_cookies,
        })
    }
}

/// Name/value of a Set-Cookie header; attributes are ignored.
pub fn parse_set_cookie(header: &str) -> Option<(String, String)> {
    let first = header.split(';').next()?;
    let (name, value) = first.split_once('=')?;
    Some((name.trim().to_string(), value.trim().to_string()))
}

/// Where requests go: both channel base URLs plus the reset endpoint.
#[derive(Debug, Clone)]
pub struct SutTarget {
    pub secure_base: String,
    pub insecure_base: String,
    pub reset_endpoint: String,
}

impl SutTarget {
    pub fn from_campaign(cfg: &crate::config::CampaignConfig) -> SutTarget {
        SutTarget {
            secure_base: cfg.sut.base_url.clone(),
            insecure_base: cfg.sut.insecure_base_url.clone(),
            reset_endpoint: cfg.sut.reset_endpoint.clone(),
        }
    }

    /// Rebase an absolute URL onto the base of the requested channel.
    pub fn rebase(&self, url: &str, channel: Channel) -> String {
        let base = match channel {
            Channel::Https => &self.secure_base,
            Channel::Http => &self.insecure_base,
        };
        match url::Url::parse(url) {
            Ok(parsed) => {
                let mut rebased = base.trim_end_matches('/').to_string();
                rebased.push_str(parsed.path());
                if let Some(q) = parsed.query() {
                    rebased.push('?');
                    rebased.push_str(q);
                }
                rebased
            }
            Err(_) => format!("{}{}", base.trim_end_matches('/'), url),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct JournalEntry {
    pub method: String,
    pub url: String,
    pub sequence_id: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ExecError {
    #[error("output position {position} out of range for sequence {sequence} of length {len}")]
    Position {
        sequence: String,
        position: usize,
        len: usize,
    },
}

/// Send a single web action: compose the URL for the action's channel,
/// attach the session (an override wins), carry the simulated clock, and
/// fold Set-Cookie headers back into the session.
pub fn perform(
    transport: &mut dyn Transport,
    target: &SutTarget,
    action: &WebAction,
    session: &mut Session,
    clock_offset_ms: u64,
) -> WebOutput {
    let url = target.rebase(&action.full_url(), action.channel);
    let effective = action.session_override.as_ref().unwrap_or(session);
    let mut headers = Vec::new();
    if !effective.is_empty() {
        headers.push(("Cookie".to_string(), effective.to_cookie_header()));
    }
    if clock_offset_ms > 0 {
        headers.push((CLOCK_HEADER.to_string(), clock_offset_ms.to_string()));
    }
    let form_body = if action.method.eq_ignore_ascii_case("GET") || action.form_inputs.is_empty() {
        None
    } else {
        Some(
            url::form_urlencoded::Serializer::new(String::new())
                .extend_pairs(action.form_inputs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
                .finish(),
        )
    };
    let request = HttpRequest {
        method: action.method.to_uppercase(),
        url: url.clone(),
        headers,
        form_body,
    };
    match transport.send(&request) {
        Ok(response) => {
            for (name, value) in &response.set_cookies {
                session.set_cookie(name, value);
            }
            let mut output = WebOutput::new(response.status, &response.body, session.clone());
            output.request_log = vec![(request.method.clone(), url)];
            output
        }
        Err(e) => {
            log::warn!("request failed, surfacing as status-0 output: {e}");
            let mut output = WebOutput::network_failure();
            output.session = session.clone();
            output.request_log = vec![(request.method, url)];
            output
        }
    }
}

struct RunState {
    session: Session,
    clock_offset_ms: u64,
    outputs: Vec<Rc<WebOutput>>,
}

/// Per-evaluation execution state: output cache, request journal and the
/// sequences' cookie sessions.
pub struct ExecutionContext {
    transport: Box<dyn Transport>,
    target: SutTarget,
    comparator: Rc<Comparator>,
    /// Whether relation flags asked for dialog observables to be preserved.
    keep_dialogs_open: bool,
    runs: HashMap<String, RunState>,
    journal: Vec<JournalEntry>,
}

impl ExecutionContext {
    pub fn new(
        transport: Box<dyn Transport>,
        target: SutTarget,
        comparator: Rc<Comparator>,
    ) -> ExecutionContext {
        ExecutionContext {
            transport,
            target,
            comparator,
            keep_dialogs_open: false,
            runs: HashMap::new(),
            journal: Vec::new(),
        }
    }

    pub fn set_keep_dialogs_open(&mut self, keep: bool) {
        self.keep_dialogs_open = keep;
    }

    pub fn journal(&self) -> &[JournalEntry] {
        &self.journal
    }

    pub fn journal_len(&self) -> usize {
        self.journal.len()
    }

    /// Output of action `i`, executing the unexecuted prefix `0..=i` first.
    /// Follow-up sequences start from a fresh session; wait and reset
    /// actions yield synthetic empty outputs at their positions.
    pub fn output_of(
        &mut self,
        seq: &InputSequence,
        i: usize,
    ) -> Result<Rc<WebOutput>, ExecError> {
        if i >= seq.len() {
            return Err(ExecError::Position {
                sequence: seq.id.clone(),
                position: i,
                len: seq.len(),
            });
        }
        let mut run = self.runs.remove(&seq.id).unwrap_or(RunState {
            session: Session::new(),
            clock_offset_ms: 0,
            outputs: Vec::new(),
        });
        while run.outputs.len() <= i {
            let action = &seq.actions[run.outputs.len()];
            let output = match action {
                Action::Wait { duration_ms, .. } => {
                    run.clock_offset_ms += duration_ms;
                    WebOutput::synthetic(run.session.clone())
                }
                Action::ResetSut { .. } => {
                    let request = HttpRequest {
                        method: "POST".to_string(),
                        url: self
                            .target
                            .rebase(&self.target.reset_endpoint.clone(), Channel::Https),
                        headers: Vec::new(),
                        form_body: None,
                    };
                    let ok = matches!(
                        self.transport.send(&request),
                        Ok(HttpResponse { status, .. }) if (200..300).contains(&status)
                    );
                    if !ok {
                        log::warn!("reset endpoint did not confirm");
                    }
                    self.journal.push(JournalEntry {
                        method: request.method,
                        url: request.url,
                        sequence_id: seq.id.clone(),
                    });
                    run.session.clear();
                    WebOutput::synthetic(run.session.clone())
                }
                Action::Web(w) => {
                    let mut output = perform(
                        self.transport.as_mut(),
                        &self.target,
                        w,
                        &mut run.session,
                        run.clock_offset_ms,
                    );
                    for (method, url) in &output.request_log {
                        self.journal.push(JournalEntry {
                            method: method.clone(),
                            url: url.clone(),
                            sequence_id: seq.id.clone(),
                        });
                    }
                    let raised = self.comparator.has_alert_marker(&output.body);
                    if raised && !self.keep_dialogs_open {
                        log::debug!("dialog observed and dismissed at {}[{}]", seq.id, w.position);
                    }
                    output.has_alert = raised && self.keep_dialogs_open;
                    output
                }
            };
            run.outputs.push(Rc::new(output));
        }
        let out = run.outputs[i].clone();
        self.runs.insert(seq.id.clone(), run);
        Ok(out)
    }

    /// POST to the configured reset endpoint; true on a 2xx confirmation.
    pub fn reset_sut(&mut self) -> bool {
        if self.target.reset_endpoint.is_empty() {
            log::warn!("no reset endpoint configured");
            return false;
        }
        let request = HttpRequest {
            method: "POST".to_string(),
            url: self
                .target
                .rebase(&self.target.reset_endpoint.clone(), Channel::Https),
            headers: Vec::new(),
            form_body: None,
        };
        matches!(
            self.transport.send(&request),
            Ok(HttpResponse { status, .. }) if (200..300).contains(&status)
        )
    }

    /// Total simulated clock offset accumulated by a sequence's waits.
    pub fn clock_offset(&self, sequence_id: &str) -> u64 {
        self.runs
            .get(sequence_id)
            .map_or(0, |r| r.clock_offset_ms)
    }
}

/// Closure-backed transport for tests and deterministic replays.
pub struct StubTransport<F: FnMut(&HttpRequest) -> HttpResponse + Send> {
    handler: F,
}

impl<F: FnMut(&HttpRequest) -> HttpResponse + Send> StubTransport<F> {
    pub fn new(handler: F) -> Self {
        StubTransport { handler }
    }
}

impl<F: FnMut(&HttpRequest) -> HttpResponse + Send> Transport for StubTransport<F> {
    fn send(&mut self, req: &HttpRequest) -> Result<HttpResponse, TransportError> {
        Ok((self.handler)(req))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ComparatorSettings;
    use crate::model::{InputSequence, Origin, User};
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn target() -> SutTarget {
        SutTarget {
            secure_base: "https://sut".to_string(),
            insecure_base: "http://sut-plain".to_string(),
            reset_endpoint: "/__test__/reset".to_string(),
        }
    }

    fn comparator() -> Rc<Comparator> {
        Rc::new(Comparator::from_settings(&ComparatorSettings::default()).unwrap())
    }

    fn seq(urls: &[&str]) -> InputSequence {
        let u = User::new("u", "u", "p", "user");
        InputSequence::new(
            "s",
            Origin::Script,
            urls.iter()
                .map(|p| Action::Web(WebAction::get(&format!("https://sut{p}"), u.clone())))
                .collect(),
        )
    }

    #[test]
    fn prefix_executes_once_per_action() {
        let hits = Arc::new(AtomicUsize::new(0));
        let hits2 = hits.clone();
        let transport = StubTransport::new(move |req: &HttpRequest| {
            hits2.fetch_add(1, Ordering::SeqCst);
            HttpResponse {
                status: 200,
                body: format!("page {}", req.url),
                set_cookies: vec![],
            }
        });
        let mut ctx = ExecutionContext::new(Box::new(transport), target(), comparator());
        let s = seq(&["/a", "/b", "/c"]);
        ctx.output_of(&s, 0).unwrap();
        ctx.output_of(&s, 2).unwrap();
        ctx.output_of(&s, 1).unwrap();
        assert_eq!(hits.load(Ordering::SeqCst), 3);
        assert_eq!(ctx.journal().len(), 3);
    }

    #[test]
    fn set_cookies_carry_to_later_actions() {
        let transport = StubTransport::new(|req: &HttpRequest| {
            if req.url.ends_with("/login") {
                HttpResponse {
                    status: 200,
                    body: "ok".into(),
                    set_cookies: vec![("sid".into(), "s1".into())],
                }
            } else {
                let cookie = req
                    .headers
                    .iter()
                    .find(|(n, _)| n == "Cookie")
                    .map(|(_, v)| v.clone())
                    .unwrap_or_default();
                HttpResponse {
                    status: 200,
                    body: format!("cookie={cookie}"),
                    set_cookies: vec![],
                }
            }
        });
        let mut ctx = ExecutionContext::new(Box::new(transport), target(), comparator());
        let s = seq(&["/login", "/home"]);
        let out = ctx.output_of(&s, 1).unwrap();
        assert_eq!(out.body, "cookie=sid=s1");
        assert_eq!(out.session.get("sid"), Some("s1"));
    }

    #[test]
    fn channel_switch_rebases_onto_insecure_base() {
        let transport = StubTransport::new(|req: &HttpRequest| HttpResponse {
            status: 200,
            body: req.url.clone(),
            set_cookies: vec![],
        });
        let mut ctx = ExecutionContext::new(Box::new(transport), target(), comparator());
        let mut s = seq(&["/login"]);
        s.actions[0].as_web_mut().unwrap().set_channel(Channel::Http);
        let out = ctx.output_of(&s, 0).unwrap();
        assert_eq!(out.body, "http://sut-plain/login");
    }

    #[test]
    fn waits_accumulate_into_clock_header() {
        let transport = StubTransport::new(|req: &HttpRequest| {
            let clock = req
                .headers
                .iter()
                .find(|(n, _)| n == CLOCK_HEADER)
                .map(|(_, v)| v.clone())
                .unwrap_or_else(|| "absent".into());
            HttpResponse {
                status: 200,
                body: clock,
                set_cookies: vec![],
            }
        });
        let mut ctx = ExecutionContext::new(Box::new(transport), target(), comparator());
        let u = User::anonymous();
        let s = InputSequence::new(
            "w",
            Origin::Script,
            vec![
                Action::Web(WebAction::get("https://sut/a", u.clone())),
                Action::Wait {
                    duration_ms: 1000,
                    position: 0,
                },
                Action::Wait {
                    duration_ms: 500,
                    position: 0,
                },
                Action::Web(WebAction::get("https://sut/b", u)),
            ],
        );
        assert_eq!(ctx.output_of(&s, 0).unwrap().body, "absent");
        let after = ctx.output_of(&s, 3).unwrap();
        assert_eq!(after.body, "1500");
        // Wait actions produce synthetic empty outputs at their positions.
        let wait_out = ctx.output_of(&s, 1).unwrap();
        assert!(wait_out.is_empty_file);
    }

    #[test]
    fn reset_clears_session_and_hits_endpoint() {
        let transport = StubTransport::new(|req: &HttpRequest| {
            if req.url.ends_with("/__test__/reset") {
                return HttpResponse {
                    status: 200,
                    body: "reset".into(),
                    set_cookies: vec![],
                };
            }
            if req.url.ends_with("/login") {
                return HttpResponse {
                    status: 200,
                    body: "in".into(),
                    set_cookies: vec![("sid".into(), "x".into())],
                };
            }
            let has_cookie = req.headers.iter().any(|(n, _)| n == "Cookie");
            HttpResponse {
                status: 200,
                body: format!("cookie:{has_cookie}"),
                set_cookies: vec![],
            }
        });
        let mut ctx = ExecutionContext::new(Box::new(transport), target(), comparator());
        let u = User::anonymous();
        let s = InputSequence::new(
            "r",
            Origin::Script,
            vec![
                Action::Web(WebAction::get("https://sut/login", u.clone())),
                Action::ResetSut { position: 0 },
                Action::Web(WebAction::get("https://sut/page", u)),
            ],
        );
        let out = ctx.output_of(&s, 2).unwrap();
        assert_eq!(out.body, "cookie:false");
    }

    #[test]
    fn session_override_wins_for_its_action_only() {
        let transport = StubTransport::new(|req: &HttpRequest| {
            let cookie = req
                .headers
                .iter()
                .find(|(n, _)| n == "Cookie")
                .map(|(_, v)| v.clone())
                .unwrap_or_default();
            if req.url.ends_with("/login") {
                HttpResponse {
                    status: 200,
                    body: "in".into(),
                    set_cookies: vec![("sid".into(), "mine".into())],
                }
            } else {
                HttpResponse {
                    status: 200,
                    body: cookie,
                    set_cookies: vec![],
                }
            }
        });
        let mut ctx = ExecutionContext::new(Box::new(transport), target(), comparator());
        let u = User::anonymous();
        let mut transplanted = Session::new();
        transplanted.set_cookie("sid", "stolen");
        let mut override_action = WebAction::get("https://sut/a", u.clone());
        override_action.set_session(transplanted);
        let s = InputSequence::new(
            "o",
            Origin::Script,
            vec![
                Action::Web(WebAction::get("https://sut/login", u.clone())),
                Action::Web(override_action),
                Action::Web(WebAction::get("https://sut/b", u)),
            ],
        );
        assert_eq!(ctx.output_of(&s, 1).unwrap().body, "sid=stolen");
        assert_eq!(ctx.output_of(&s, 2).unwrap().body, "sid=mine");
    }

    #[test]
    fn transport_failure_becomes_status_zero_output() {
        struct Failing;
        impl Transport for Failing {
            fn send(&mut self, req: &HttpRequest) -> Result<HttpResponse, TransportError> {
                Err(TransportError {
                    method: req.method.clone(),
                    url: req.url.clone(),
                    message: "connection refused".into(),
                })
            }
        }
        let mut ctx = ExecutionContext::new(Box::new(Failing), target(), comparator());
        let s = seq(&["/a"]);
        let out = ctx.output_of(&s, 0).unwrap();
        assert_eq!(out.status, 0);
        assert_eq!(ctx.journal().len(), 1);
    }
}
