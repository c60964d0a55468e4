//! A small self-hosted web application with seeded vulnerabilities and a
//! corrected twin. `mode = vulnerable` misbehaves in six distinct ways
//! (plaintext-channel login, session fixation on signup, authorization
//! bypass on direct requests, reflected script injection, unchecked file
//! and profile object access, a trusted client-side role cookie, and
//! ignored password aging); `mode = patched` closes every hole. All HTML is
//! deterministic so text-distance comparisons are stable.

pub mod mini;

use std::collections::HashMap;
use std::future::IntoFuture;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{Extension, RawQuery, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Vulnerable,
    Patched,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "vulnerable" => Some(Mode::Vulnerable),
            "patched" => Some(Mode::Patched),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FixtureConfig {
    pub mode: Mode,
    pub port: u16,
    pub insecure_port: u16,
    /// Sessions older than this (by simulated clock) demand a password
    /// change in patched mode.
    pub password_max_age_ms: u64,
}

impl FixtureConfig {
    pub fn new(mode: Mode) -> FixtureConfig {
        FixtureConfig {
            mode,
            port: 0,
            insecure_port: 0,
            password_max_age_ms: 1000 * 60 * 60 * 24 * 180,
        }
    }
}

/// The clock-offset header the test executor sends; simulated milliseconds.
pub const CLOCK_HEADER: &str = "X-MST-Clock-Offset-Ms";

struct UserRecord {
    password: String,
    role: String,
    profile_id: u64,
    bio: String,
}

#[derive(Default)]
struct MutableState {
    users: HashMap<String, UserRecord>,
    /// session id -> username
    sessions: HashMap<String, String>,
    /// username -> pending task names, in arrival order
    jobs: HashMap<String, Vec<String>>,
    next_profile_id: u64,
}

pub struct AppState {
    mode: Mode,
    password_max_age_ms: u64,
    state: Mutex<MutableState>,
    next_sid: AtomicU64,
    files: HashMap<&'static str, &'static str>,
}

const CHROME_HEADER: &str = "<html><head><title>Orchard Works</title></head><body>\n\
<div class=\"masthead\">Orchard Works &mdash; small-team build and release coordination.\n\
The workspace tracks build profiles, shared documents and review queues for every member\n\
of the team, with a lightweight account system for collaborators and visiting reviewers.</div>\n";

const CHROME_FOOTER: &str = "<div class=\"footer\">Orchard Works workspace &middot; build 41 &middot;\n\
All activity on this workspace is recorded for review. Shared documents live in the file\n\
area; build profiles and review queues are listed on each member dashboard.</div>\n</body></html>\n";

const README_TXT: &str = "Orchard Works shared notes\n--------------------------\n\
Welcome to the team workspace. Build profiles are managed from the dashboard.\n\
Review queues drain overnight; put long-running jobs in the queue before 18:00.\n\
The staging environment rebuilds at the top of every hour. Keep shared\ndocuments short.\n";

const GUIDE_TXT: &str = "Orchard Works reviewer guide\n----------------------------\n\
Reviewers see only queues they are assigned to. Use the dashboard links to\n\
open a build profile, then attach your notes to the review thread. Approval\n\
requires two members. Rebase before requesting a second pass.\n";

const ADMIN_KEYS_TXT: &str = "orchard signing material (restricted)\n\
signing-key-1: 9f31c0de77aa41d2b6c55c31b02a9e10\nsigning-key-2: 41b2a7f0c9d84e66a1be00cc78d21f55\n\
release-token: rel-7c220a9b55e1\nssh-fingerprint: SHA256:gN0c3Qw1xX9uVb2m\n";

const APP_LOG_TXT: &str = "2031-01-01T00:00:00Z boot workspace build 41\n\
2031-01-01T00:00:01Z queue drained 0 tasks\n2031-01-01T00:00:02Z staging rebuild scheduled\n\
2031-01-01T00:00:03Z retention sweep kept 14 documents\n";

const CONFIG_BODY: &str = "[core]\nworkers = 4\nqueue_depth = 128\nstaging_rebuild_minutes = 60\n\
[retention]\ndocuments = 14\nreview_threads = 90\n[release]\nchannel = stable\n\
signing = enabled\napprovals_required = 2\n";

fn bio_for(username: &str, role: &str) -> String {
    match username {
        "admin" => "Coordinates releases and owns the signing material. Keeps the \
                    staging rebuild schedule and the retention sweeps running, and is \
                    the escalation point for broken build profiles."
            .to_string(),
        "devel" => "Maintains the build profiles for the numerics stack and tends the \
                    overnight review queue. Collects reproducible-build notes in the \
                    shared documents area, one page per toolchain."
            .to_string(),
        "tester" => "Runs the acceptance matrix against staging after every rebuild \
                    and files review threads for regressions. Keeps a private list of \
                    flaky suites pinned to the dashboard."
            .to_string(),
        other => format!("Recently joined collaborator ({role}). The workspace pages for \
                          {other} have not been customized yet."),
    }
}

fn pristine_users() -> HashMap<String, UserRecord> {
    let mut users = HashMap::new();
    for (name, password, role, profile_id) in [
        ("admin", "admin-pw", "admin", 1),
        ("devel", "devel-pw", "user", 2),
        ("tester", "tester-pw", "user", 3),
    ] {
        users.insert(
            name.to_string(),
            UserRecord {
                password: password.to_string(),
                role: role.to_string(),
                profile_id,
                bio: bio_for(name, role),
            },
        );
    }
    users
}

impl AppState {
    pub fn new(config: &FixtureConfig) -> AppState {
        let mut files = HashMap::new();
        files.insert("readme.txt", README_TXT);
        files.insert("notes/guide.txt", GUIDE_TXT);
        files.insert("secret/admin-keys.txt", ADMIN_KEYS_TXT);
        files.insert("logs/app.log", APP_LOG_TXT);
        AppState {
            mode: config.mode,
            password_max_age_ms: config.password_max_age_ms,
            state: Mutex::new(MutableState {
                users: pristine_users(),
                sessions: HashMap::new(),
                jobs: HashMap::new(),
                next_profile_id: 4,
            }),
            next_sid: AtomicU64::new(1),
            files,
        }
    }

    fn reset(&self) {
        let mut state = self.state.lock().unwrap();
        state.users = pristine_users();
        state.sessions.clear();
        state.jobs.clear();
        state.next_profile_id = 4;
    }

    fn fresh_sid(&self) -> String {
        format!("s{}", self.next_sid.fetch_add(1, Ordering::SeqCst))
    }
}

/// Marks which listener the request came in on.
#[derive(Debug, Clone, Copy)]
struct PlainChannel(bool);

fn page(body: &str) -> String {
    format!("{CHROME_HEADER}{body}{CHROME_FOOTER}")
}

fn error_page(status: StatusCode, message: &str) -> Response {
    (status, page(&format!("<div class=\"error\">Error: {message}</div>\n"))).into_response()
}

fn html_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
        .replace('\'', "&#39;")
}

fn cookies(headers: &HeaderMap) -> HashMap<String, String> {
    let mut out = HashMap::new();
    for value in headers.get_all("cookie") {
        let Ok(text) = value.to_str() else { continue };
        for pair in text.split(';') {
            if let Some((name, value)) = pair.split_once('=') {
                out.insert(name.trim().to_string(), value.trim().to_string());
            }
        }
    }
    out
}

fn clock_offset(headers: &HeaderMap) -> u64 {
    headers
        .get(CLOCK_HEADER)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse().ok())
        .unwrap_or(0)
}

fn parse_form(body: &str) -> HashMap<String, String> {
    form_urlencoded::parse(body.as_bytes())
        .map(|(k, v)| (k.into_owned(), v.into_owned()))
        .collect()
}

fn parse_query(query: &Option<String>) -> HashMap<String, String> {
    match query {
        Some(q) => form_urlencoded::parse(q.as_bytes())
            .map(|(k, v)| (k.into_owned(), v.into_owned()))
            .collect(),
        None => HashMap::new(),
    }
}

/// The logged-in username for the request, if its sid is known.
fn session_user(state: &AppState, headers: &HeaderMap) -> Option<String> {
    let sid = cookies(headers).get("sid").cloned()?;
    state.state.lock().unwrap().sessions.get(&sid).cloned()
}

/// Patched mode demands a password change on any authenticated request once
/// the simulated clock passed the password's maximum age.
fn aging_demand(state: &AppState, headers: &HeaderMap) -> Option<Response> {
    if state.mode == Mode::Patched
        && session_user(state, headers).is_some()
        && clock_offset(headers) >= state.password_max_age_ms
    {
        return Some(
            page(
                "<div class=\"notice\">Your password has aged out of the workspace policy.\n\
                 Set a new password to continue; all other actions are paused until then.</div>\n",
            )
            .into_response(),
        );
    }
    None
}

fn role_of(state: &AppState, username: &str) -> String {
    state
        .state
        .lock()
        .unwrap()
        .users
        .get(username)
        .map(|u| u.role.clone())
        .unwrap_or_else(|| "user".to_string())
}

// ---- handlers -------------------------------------------------------------

async fn landing(State(state): State<Arc<AppState>>, headers: HeaderMap) -> Response {
    if let Some(demand) = aging_demand(&state, &headers) {
        return demand;
    }
    let body = "<div class=\"intro\">Sign in to reach your dashboard, search the shared\n\
        documents, or register a collaborator account.</div>\n\
        <form action=\"/login\" method=\"post\">\n\
          <input type=\"text\" name=\"user\">\n\
          <input type=\"password\" name=\"pass\">\n\
          <button type=\"submit\">Sign in</button>\n\
        </form>\n\
        <form action=\"/search\" method=\"get\">\n\
          <input type=\"text\" name=\"q\">\n\
          <button type=\"submit\">Search documents</button>\n\
        </form>\n\
        <form action=\"/signup\" method=\"post\">\n\
          <input type=\"text\" name=\"new_user\">\n\
          <input type=\"password\" name=\"pass\">\n\
          <input type=\"password\" name=\"confirm\">\n\
          <button type=\"submit\">Register</button>\n\
        </form>\n";
    page(body).into_response()
}

async fn login(
    State(state): State<Arc<AppState>>,
    Extension(PlainChannel(plain)): Extension<PlainChannel>,
    headers: HeaderMap,
    body: String,
) -> Response {
    if state.mode == Mode::Patched && plain {
        // Deliberately bare so it shares nothing with the regular pages.
        return (
            StatusCode::FORBIDDEN,
            "Error: insecure transport. Signing in over the plaintext port is disabled.\n",
        )
            .into_response();
    }
    if let Some(demand) = aging_demand(&state, &headers) {
        return demand;
    }
    let form = parse_form(&body);
    let (Some(user), Some(pass)) = (form.get("user"), form.get("pass")) else {
        return error_page(StatusCode::BAD_REQUEST, "missing credentials.");
    };
    let ok = {
        let state = state.state.lock().unwrap();
        state
            .users
            .get(user.as_str())
            .is_some_and(|u| &u.password == pass)
    };
    if !ok {
        return error_page(StatusCode::FORBIDDEN, "bad credentials.");
    }
    let sid = state.fresh_sid();
    let elevated = role_of(&state, user) == "admin";
    state
        .state
        .lock()
        .unwrap()
        .sessions
        .insert(sid.clone(), user.clone());
    let body = page(
        "<div class=\"notice\">Signed in. Your session is active on this browser.</div>\n\
         <a href=\"/home\">Continue to dashboard</a>\n",
    );
    (
        [
            ("Set-Cookie".to_string(), format!("sid={sid}")),
            ("Set-Cookie".to_string(), format!("elevated={elevated}")),
        ],
        body,
    )
        .into_response()
}

async fn signup(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    body: String,
) -> Response {
    if let Some(demand) = aging_demand(&state, &headers) {
        return demand;
    }
    let form = parse_form(&body);
    let (Some(user), Some(pass)) = (form.get("new_user"), form.get("pass")) else {
        return error_page(StatusCode::BAD_REQUEST, "missing registration fields.");
    };
    if user.is_empty() {
        return error_page(StatusCode::BAD_REQUEST, "missing registration fields.");
    }
    {
        let mut inner = state.state.lock().unwrap();
        match inner.users.get(user.as_str()) {
            Some(existing) if &existing.password != pass => {
                return error_page(StatusCode::FORBIDDEN, "bad credentials.");
            }
            Some(_) => {} // registering an existing account signs it in again
            None => {
                let profile_id = inner.next_profile_id;
                inner.next_profile_id += 1;
                inner.users.insert(
                    user.clone(),
                    UserRecord {
                        password: pass.clone(),
                        role: "user".to_string(),
                        profile_id,
                        bio: bio_for(user, "user"),
                    },
                );
            }
        }
    }
    let body = page(
        "<div class=\"notice\">Account ready. The workspace has registered this\n\
         collaborator and signed the browser in.</div>\n",
    );
    let presented = cookies(&headers).get("sid").cloned();
    match (state.mode, presented) {
        (Mode::Vulnerable, Some(sid)) => {
            // Adopts whatever session id the client presented: the session
            // is never rotated at this authentication boundary.
            state
                .state
                .lock()
                .unwrap()
                .sessions
                .insert(sid, user.clone());
            body.into_response()
        }
        (Mode::Vulnerable, None) => {
            let sid = state.fresh_sid();
            state
                .state
                .lock()
                .unwrap()
                .sessions
                .insert(sid.clone(), user.clone());
            ([("Set-Cookie".to_string(), format!("sid={sid}"))], body).into_response()
        }
        (Mode::Patched, _) => {
            let sid = state.fresh_sid();
            state
                .state
                .lock()
                .unwrap()
                .sessions
                .insert(sid.clone(), user.clone());
            let elevated = role_of(&state, user) == "admin";
            (
                [
                    ("Set-Cookie".to_string(), format!("sid={sid}")),
                    ("Set-Cookie".to_string(), format!("elevated={elevated}")),
                ],
                body,
            )
                .into_response()
        }
    }
}

async fn home(State(state): State<Arc<AppState>>, headers: HeaderMap) -> Response {
    if let Some(demand) = aging_demand(&state, &headers) {
        return demand;
    }
    let Some(user) = session_user(&state, &headers) else {
        return error_page(StatusCode::FORBIDDEN, "access denied. Sign in first.");
    };
    let (role, profile_id, bio) = {
        let inner = state.state.lock().unwrap();
        let record = inner.users.get(&user).expect("session user exists");
        (record.role.clone(), record.profile_id, record.bio.clone())
    };
    let mut body = format!(
        "<div class=\"dash\">Dashboard for {user} ({role}).</div>\n<div class=\"bio\">{bio}</div>\n"
    );
    if role == "admin" {
        body.push_str("<a href=\"/admin/config\">Workspace configuration</a>\n");
        body.push_str(
            "<form action=\"/prefs\" method=\"post\">\n  <input type=\"text\" name=\"theme\">\n\
             <button type=\"submit\">Save preferences</button>\n</form>\n",
        );
    }
    body.push_str(&format!("<a href=\"/profile?id={profile_id}\">My profile</a>\n"));
    body.push_str("<a href=\"/file?path=readme.txt\">Shared notes</a>\n");
    body.push_str(
        "<form action=\"/jobs\" method=\"post\">\n  <input type=\"text\" name=\"task\">\n\
         <button type=\"submit\">Queue a task</button>\n</form>\n",
    );
    body.push_str(
        "<form action=\"/search\" method=\"get\">\n  <input type=\"text\" name=\"q\">\n\
         <button type=\"submit\">Search documents</button>\n</form>\n",
    );
    page(&body).into_response()
}

async fn admin_config(State(state): State<Arc<AppState>>, headers: HeaderMap) -> Response {
    if let Some(demand) = aging_demand(&state, &headers) {
        return demand;
    }
    let Some(user) = session_user(&state, &headers) else {
        return error_page(StatusCode::FORBIDDEN, "access denied. Sign in first.");
    };
    if state.mode == Mode::Patched && role_of(&state, &user) != "admin" {
        return error_page(StatusCode::FORBIDDEN, "access denied. Administrators only.");
    }
    // Raw configuration text, identical regardless of who retrieved it.
    CONFIG_BODY.into_response()
}

async fn search(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    RawQuery(query): RawQuery,
) -> Response {
    if let Some(demand) = aging_demand(&state, &headers) {
        return demand;
    }
    let params = parse_query(&query);
    let q = params.get("q").cloned().unwrap_or_default();
    let echoed = match state.mode {
        Mode::Vulnerable => q.clone(),
        Mode::Patched => html_escape(&q),
    };
    let body = format!(
        "<div class=\"results\">Results for {echoed}</div>\n\
         <div class=\"hint\">No documents matched. Shared documents are indexed on every\n\
         staging rebuild; queue a task if something you expect is missing.</div>\n"
    );
    page(&body).into_response()
}

async fn file(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    RawQuery(query): RawQuery,
) -> Response {
    if let Some(demand) = aging_demand(&state, &headers) {
        return demand;
    }
    let Some(user) = session_user(&state, &headers) else {
        return error_page(StatusCode::FORBIDDEN, "access denied. Sign in first.");
    };
    let params = parse_query(&query);
    let Some(path) = params.get("path") else {
        return error_page(StatusCode::BAD_REQUEST, "missing path.");
    };
    let Some(content) = state.files.get(path.as_str()) else {
        return error_page(StatusCode::NOT_FOUND, "no such file.");
    };
    if state.mode == Mode::Patched {
        // Only what the dashboards actually link is served.
        let _ = user;
        if path != "readme.txt" {
            return error_page(StatusCode::FORBIDDEN, "access denied. File not shared.");
        }
    }
    (*content).into_response()
}

async fn profile(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    RawQuery(query): RawQuery,
) -> Response {
    if let Some(demand) = aging_demand(&state, &headers) {
        return demand;
    }
    let Some(user) = session_user(&state, &headers) else {
        return error_page(StatusCode::FORBIDDEN, "access denied. Sign in first.");
    };
    let params = parse_query(&query);
    let Some(id) = params.get("id").and_then(|v| v.parse::<u64>().ok()) else {
        return error_page(StatusCode::NOT_FOUND, "no such profile.");
    };
    let inner = state.state.lock().unwrap();
    let Some((name, record)) = inner.users.iter().find(|(_, u)| u.profile_id == id) else {
        return error_page(StatusCode::NOT_FOUND, "no such profile.");
    };
    if state.mode == Mode::Patched && inner.users.get(&user).map(|u| u.profile_id) != Some(id) {
        return error_page(StatusCode::FORBIDDEN, "access denied. Own profile only.");
    }
    // Profile content is a pure function of the profile id.
    format!(
        "Profile #{id}\nusername: {name}\nrole: {}\nbio: {}\n",
        record.role, record.bio
    )
    .into_response()
}

async fn prefs(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    body: String,
) -> Response {
    if let Some(demand) = aging_demand(&state, &headers) {
        return demand;
    }
    let Some(user) = session_user(&state, &headers) else {
        return error_page(StatusCode::FORBIDDEN, "access denied. Sign in first.");
    };
    let _ = parse_form(&body); // the theme value itself is never echoed
    let elevated = match state.mode {
        // Trusts the client-side cookie as-is.
        Mode::Vulnerable => cookies(&headers).get("elevated").map(String::as_str) == Some("true"),
        Mode::Patched => role_of(&state, &user) == "admin",
    };
    let mut text = String::from(
        "Preferences saved.\nTheme locked to the workspace default palette.\n\
         Digest notifications stay on the standard schedule.\n",
    );
    if elevated {
        text.push_str(
            "Elevated controls unlocked:\n- replica pool sizing\n- audit log export\n\
             - maintenance window overrides\n- signing key rotation\n- retention sweep tuning\n",
        );
    }
    text.into_response()
}

async fn jobs(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    body: String,
) -> Response {
    if let Some(demand) = aging_demand(&state, &headers) {
        return demand;
    }
    let Some(user) = session_user(&state, &headers) else {
        return error_page(StatusCode::FORBIDDEN, "access denied. Sign in first.");
    };
    let form = parse_form(&body);
    let task = form.get("task").cloned().unwrap_or_default();
    let pending = {
        let mut inner = state.state.lock().unwrap();
        let queue = inner.jobs.entry(user.clone()).or_default();
        queue.push(task);
        queue.len()
    };
    let bio = state
        .state
        .lock()
        .unwrap()
        .users
        .get(&user)
        .map(|u| u.bio.clone())
        .unwrap_or_default();
    let body = format!(
        "<div class=\"queue\">Queue receipt for {user}: {pending} task(s) pending.\n\
         Tasks drain on the overnight schedule.</div>\n<div class=\"bio\">{bio}</div>\n"
    );
    page(&body).into_response()
}

async fn jobs_cancel(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    body: String,
) -> Response {
    if let Some(demand) = aging_demand(&state, &headers) {
        return demand;
    }
    let Some(user) = session_user(&state, &headers) else {
        return error_page(StatusCode::FORBIDDEN, "access denied. Sign in first.");
    };
    let form = parse_form(&body);
    let task = form.get("task").cloned().unwrap_or_default();
    let removed = {
        let mut inner = state.state.lock().unwrap();
        let queue = inner.jobs.entry(user.clone()).or_default();
        match queue.iter().position(|t| *t == task) {
            Some(at) => {
                queue.remove(at);
                true
            }
            None => false,
        }
    };
    if !removed {
        return error_page(StatusCode::NOT_FOUND, "no such queued task.");
    }
    let bio = state
        .state
        .lock()
        .unwrap()
        .users
        .get(&user)
        .map(|u| u.bio.clone())
        .unwrap_or_default();
    page(&format!(
        "<div class=\"queue\">Task cancelled for {user}. The overnight schedule will skip it.</div>\n\
         <div class=\"bio\">{bio}</div>\n"
    ))
    .into_response()
}

async fn reset(State(state): State<Arc<AppState>>) -> Response {
    state.reset();
    "reset-ok\n".into_response()
}

pub fn router(state: Arc<AppState>, plain_channel: bool) -> Router {
    Router::new()
        .route("/", get(landing))
        .route("/login", post(login))
        .route("/signup", post(signup))
        .route("/home", get(home))
        .route("/admin/config", get(admin_config))
        .route("/search", get(search))
        .route("/file", get(file))
        .route("/profile", get(profile))
        .route("/prefs", post(prefs))
        .route("/jobs", post(jobs))
        .route("/jobs/cancel", post(jobs_cancel))
        .route("/__test__/reset", post(reset))
        .layer(Extension(PlainChannel(plain_channel)))
        .with_state(state)
}

/// A fixture serving on background threads; dropping the handle stops it.
pub struct FixtureHandle {
    pub base_url: String,
    pub insecure_base_url: String,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl FixtureHandle {
    pub fn stop(mut self) {
        self.shutdown_now();
    }

    fn shutdown_now(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}

impl Drop for FixtureHandle {
    fn drop(&mut self) {
        self.shutdown_now();
    }
}

/// Bind both listeners (port 0 picks free ports) and serve until stopped.
pub fn spawn(config: FixtureConfig) -> std::io::Result<FixtureHandle> {
    let state = Arc::new(AppState::new(&config));
    spawn_with_routers(
        config.port,
        config.insecure_port,
        router(state.clone(), false),
        router(state, true),
    )
}

pub(crate) fn spawn_with_routers(
    port: u16,
    insecure_port: u16,
    secure: Router,
    insecure: Router,
) -> std::io::Result<FixtureHandle> {
    let (ready_tx, ready_rx) = std::sync::mpsc::channel::<std::io::Result<(SocketAddr, SocketAddr)>>();
    let (shutdown_tx, shutdown_rx) = tokio::sync::oneshot::channel::<()>();
    let thread = std::thread::spawn(move || {
        let runtime = tokio::runtime::Builder::new_current_thread()
            .enable_all()
            .build()
            .expect("tokio runtime");
        runtime.block_on(async move {
            let bind = |p: u16| async move {
                tokio::net::TcpListener::bind(("127.0.0.1", p)).await
            };
            let (secure_listener, insecure_listener) = match (bind(port).await, bind(insecure_port).await) {
                (Ok(a), Ok(b)) => {
                    let addrs = (a.local_addr().unwrap(), b.local_addr().unwrap());
                    let _ = ready_tx.send(Ok(addrs));
                    (a, b)
                }
                (a, b) => {
                    let err = a.err().or(b.err()).unwrap();
                    let _ = ready_tx.send(Err(err));
                    return;
                }
            };
            let serve_secure = axum::serve(secure_listener, secure);
            let serve_insecure = axum::serve(insecure_listener, insecure);
            tokio::select! {
                _ = serve_secure.into_future() => {}
                _ = serve_insecure.into_future() => {}
                _ = shutdown_rx => {}
            }
        });
    });
    let (secure_addr, insecure_addr) = ready_rx
        .recv()
        .map_err(|_| std::io::Error::other("fixture thread died before binding"))??;
    Ok(FixtureHandle {
        base_url: format!("http://{secure_addr}"),
        insecure_base_url: format!("http://{insecure_addr}"),
        shutdown: Some(shutdown_tx),
        thread: Some(thread),
    })
}
