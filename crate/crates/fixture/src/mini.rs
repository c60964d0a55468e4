//! A three-page mini site (login, stats, and a start-node page that only
//! one user's GUI links) used to replicate the worked bypass-authorization
//! scenario at the smallest possible scale.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;

use crate::FixtureHandle;

pub struct MiniState {
    /// username -> password; both accounts may reach /stats, only devel's
    /// GUI links /startSlave.
    users: HashMap<&'static str, &'static str>,
    sessions: Mutex<HashMap<String, String>>,
    next_sid: AtomicU64,
}

impl Default for MiniState {
    fn default() -> Self {
        let mut users = HashMap::new();
        users.insert("devel", "devel-pw");
        users.insert("tester", "tester-pw");
        MiniState {
            users,
            sessions: Mutex::new(HashMap::new()),
            next_sid: AtomicU64::new(1),
        }
    }
}

fn session_user(state: &MiniState, headers: &HeaderMap) -> Option<String> {
    let cookie = headers.get("cookie")?.to_str().ok()?;
    let sid = cookie.split(';').find_map(|pair| {
        let (name, value) = pair.split_once('=')?;
        (name.trim() == "sid").then(|| value.trim().to_string())
    })?;
    state.sessions.lock().unwrap().get(&sid).cloned()
}

async fn landing() -> Response {
    "<html><body><p>Build node console. Sign in to see node statistics.</p>\n\
     <form action=\"/login\" method=\"post\">\n  <input type=\"text\" name=\"user\">\n\
     <input type=\"password\" name=\"pass\">\n  <button type=\"submit\">Sign in</button>\n\
     </form></body></html>\n"
        .into_response()
}

async fn login(State(state): State<Arc<MiniState>>, body: String) -> Response {
    let form: HashMap<String, String> = form_urlencoded::parse(body.as_bytes())
        .map(|(k, v)| (k.into_owned(), v.into_owned()))
        .collect();
    let (Some(user), Some(pass)) = (form.get("user"), form.get("pass")) else {
        return (StatusCode::BAD_REQUEST, "Error: missing credentials.\n").into_response();
    };
    if state.users.get(user.as_str()) != Some(&pass.as_str()) {
        return (StatusCode::FORBIDDEN, "Error: bad credentials.\n").into_response();
    }
    let sid = format!("m{}", state.next_sid.fetch_add(1, Ordering::SeqCst));
    state
        .sessions
        .lock()
        .unwrap()
        .insert(sid.clone(), user.clone());
    (
        [("Set-Cookie".to_string(), format!("sid={sid}"))],
        "<html><body><p>Signed in to the build node console.</p>\n\
         <a href=\"/stats\">Node statistics</a></body></html>\n",
    )
        .into_response()
}

async fn stats(State(state): State<Arc<MiniState>>, headers: HeaderMap) -> Response {
    let Some(user) = session_user(&state, &headers) else {
        return (StatusCode::FORBIDDEN, "Error: access denied.\n").into_response();
    };
    let mut body = String::from(
        "<html><body><p>Node statistics: 3 executors idle, queue empty, last build green.\n\
         Upness 41 days; scheduler tick 500ms; workspace cache warm.</p>\n",
    );
    if user == "devel" {
        body.push_str("<a href=\"/startSlave\">Start build node</a>\n");
    }
    body.push_str("</body></html>\n");
    body.into_response()
}

async fn start_slave(State(state): State<Arc<MiniState>>, headers: HeaderMap) -> Response {
    if session_user(&state, &headers).is_none() {
        return (StatusCode::FORBIDDEN, "Error: access denied.\n").into_response();
    }
    // Served identically to any signed-in user: the seeded bypass.
    "<html><body><p>Build node starting. Executor pool expanding to 4; warm cache\n\
     attached; scheduler resumes on next tick.</p></body></html>\n"
        .into_response()
}

async fn reset(State(state): State<Arc<MiniState>>) -> Response {
    state.sessions.lock().unwrap().clear();
    "reset-ok\n".into_response()
}

pub fn router(state: Arc<MiniState>) -> Router {
    Router::new()
        .route("/", get(landing))
        .route("/login", post(login))
        .route("/stats", get(stats))
        .route("/startSlave", get(start_slave))
        .route("/__test__/reset", post(reset))
        .with_state(state)
}

/// Serve the mini site on two ephemeral ports (the second is never special;
/// campaigns only need both bases configured).
pub fn spawn() -> std::io::Result<FixtureHandle> {
    let state = Arc::new(MiniState::default());
    crate::spawn_with_routers(0, 0, router(state.clone()), router(state))
}
