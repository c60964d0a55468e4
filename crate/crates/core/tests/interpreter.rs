//! Interpreter semantics against a stub system under test: operator truth
//! tables, follow-up definition rules, short-circuiting, registry hygiene
//! and determinism.

use std::rc::Rc;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use mst_core::collected::CollectedData;
use mst_core::config::{ComparatorSettings, DetectionSettings};
use mst_core::executor::{ExecutionContext, HttpRequest, HttpResponse, StubTransport, SutTarget};
use mst_core::model::{Action, InputSequence, Origin, User, WebAction};
use mst_core::provider::{ProviderConfig, ProviderState};
use mst_core::smrl::eval::{evaluate_relation, EvalContext, Verdict};
use mst_core::smrl::parse_file;
use mst_core::webutils::{ActionClassifier, Comparator};

struct Harness {
    collected: CollectedData,
    provider: ProviderState,
    comparator: Comparator,
    classifier: ActionClassifier,
    hits: Arc<AtomicUsize>,
}

fn sequence(id: &str, user: &User, urls: &[&str]) -> InputSequence {
    let actions = urls
        .iter()
        .map(|path| {
            let (url, query) = match path.split_once('?') {
                Some((base, q)) => {
                    let params = q
                        .split('&')
                        .filter_map(|p| p.split_once('='))
                        .map(|(k, v)| (k.to_string(), v.to_string()))
                        .collect();
                    (format!("https://sut{base}"), params)
                }
                None => (format!("https://sut{path}"), Vec::new()),
            };
            let mut action = WebAction::get(&url, user.clone());
            action.parameters = query;
            Action::Web(action)
        })
        .collect();
    InputSequence::new(id, Origin::Script, actions)
}

impl Harness {
    fn new(inputs: Vec<InputSequence>, users: Vec<User>) -> Harness {
        let collected = CollectedData {
            sessions: vec![],
            script_inputs: inputs,
        };
        let comparator = Comparator::from_settings(&ComparatorSettings::default()).unwrap();
        let classifier = ActionClassifier::from_settings(
            &DetectionSettings::default(),
            &ComparatorSettings::default(),
        )
        .unwrap();
        let provider = ProviderState::from_collected(
            &collected,
            &users,
            &|_| false,
            &ProviderConfig {
                random_value_budget: 100,
                seed: 1,
                file_paths: vec!["readme.txt".into()],
                ..ProviderConfig::default()
            },
        );
        Harness {
            collected,
            provider,
            comparator,
            classifier,
            hits: Arc::new(AtomicUsize::new(0)),
        }
    }

    fn single() -> Harness {
        let u = User::new("u1", "u1", "pw", "user");
        Harness::new(
            vec![sequence("s0", &u, &["/a?x=1", "/b"])],
            vec![u, User::new("u2", "u2", "pw", "user")],
        )
    }

    fn executor(&self) -> ExecutionContext {
        let hits = self.hits.clone();
        // Echoes the request line so outputs differ whenever URLs differ.
        let transport = StubTransport::new(move |req: &HttpRequest| {
            hits.fetch_add(1, Ordering::SeqCst);
            HttpResponse {
                status: 200,
                body: format!("echo {} {}", req.method, req.url),
                set_cookies: vec![("sid".into(), "stub".into())],
            }
        });
        ExecutionContext::new(
            Box::new(transport),
            SutTarget {
                secure_base: "https://sut".into(),
                insecure_base: "http://sut-plain".into(),
                reset_endpoint: "/__test__/reset".into(),
            },
            Rc::new(Comparator::from_settings(&ComparatorSettings::default()).unwrap()),
        )
    }

    fn evaluate(&mut self, body: &str) -> Verdict {
        self.try_evaluate(body).expect("evaluation error")
    }

    fn try_evaluate(&mut self, body: &str) -> Result<Verdict, mst_core::smrl::EvalError> {
        let source = format!("package t\nMR T {{{{ {body} }}}}");
        let file = parse_file(&source).expect("parse");
        let mut executor = self.executor();
        let mut ctx = EvalContext::new(
            &self.provider,
            &mut executor,
            &self.collected,
            &self.comparator,
            &self.classifier,
            &[],
        );
        evaluate_relation(&file.relations[0], &mut ctx)
    }
}

fn holds(v: &Verdict) -> bool {
    matches!(v, Verdict::Holds)
}

#[test]
fn implies_truth_table() {
    let mut h = Harness::single();
    assert!(holds(&h.evaluate("IMPLIES(FALSE, FALSE)")));
    assert!(holds(&h.evaluate("IMPLIES(FALSE, TRUE)")));
    assert!(holds(&h.evaluate("IMPLIES(TRUE, TRUE)")));
    assert!(!holds(&h.evaluate("IMPLIES(TRUE, FALSE)")));
}

#[test]
fn and_or_not_truth_tables() {
    let mut h = Harness::single();
    for (expr, expected) in [
        ("AND(TRUE, TRUE)", true),
        ("AND(TRUE, FALSE)", false),
        ("AND(FALSE, TRUE)", false),
        ("AND(FALSE, FALSE)", false),
        ("AND(TRUE, TRUE, FALSE)", false),
        ("AND(TRUE, TRUE, TRUE)", true),
        ("OR(TRUE, TRUE)", true),
        ("OR(TRUE, FALSE)", true),
        ("OR(FALSE, TRUE)", true),
        ("OR(FALSE, FALSE)", false),
        ("OR(FALSE, FALSE, TRUE)", true),
        ("NOT(TRUE)", false),
        ("NOT(FALSE)", true),
    ] {
        let body = format!("IMPLIES(TRUE, {expr})");
        assert_eq!(holds(&h.evaluate(&body)), expected, "{expr}");
    }
}

#[test]
fn create_binds_once_and_returns_false_after() {
    let mut h = Harness::single();
    assert!(holds(&h.evaluate("CREATE(Input(2), Input(1))")));
    // The second definition of the same identifier fails, and a false
    // metamorphic statement is a violation.
    let v = h.evaluate("CREATE(Input(2), Input(1))\nCREATE(Input(2), Input(1))");
    assert!(!holds(&v));
}

#[test]
fn equal_defines_then_compares() {
    let mut h = Harness::single();
    assert!(holds(&h.evaluate(
        "CREATE(Input(2), Input(1))\nEQUAL(Input(2), Input(1))"
    )));
    // EQUAL on an unbound identifier behaves like CREATE.
    assert!(holds(&h.evaluate(
        "EQUAL(Input(2), Input(1))\nEQUAL(Input(2), Input(1))"
    )));
    // A bound-and-diverged follow-up no longer compares equal.
    let v = h.evaluate(
        "CREATE(Input(2), Input(1))\n\
         IMPLIES(Input(2).actions().get(0).setParameterValue(0, \"inj\"), TRUE)\n\
         EQUAL(Input(2), Input(1))",
    );
    assert!(!holds(&v));
}

#[test]
fn source_inputs_cannot_be_redefined_after_reading() {
    let mut h = Harness::single();
    // Reading Input(1) as source data then trying to CREATE it fails.
    let v = h.evaluate(
        "var n = Input(1).actions().size\nIMPLIES(n > 0, CREATE(Input(1), Input(1)))",
    );
    assert!(!holds(&v));
}

#[test]
fn short_circuit_issues_no_requests() {
    let mut h = Harness::single();
    assert!(holds(&h.evaluate(
        "IMPLIES(FALSE && isError(Output(Input(1), 0)), TRUE)"
    )));
    assert_eq!(h.hits.load(Ordering::SeqCst), 0, "&& must short-circuit");

    assert!(holds(&h.evaluate(
        "IMPLIES(FALSE, isError(Output(Input(1), 0)))"
    )));
    assert_eq!(h.hits.load(Ordering::SeqCst), 0, "IMPLIES must short-circuit");

    assert!(holds(&h.evaluate(
        "IMPLIES(TRUE || isError(Output(Input(1), 0)), TRUE)"
    )));
    assert_eq!(h.hits.load(Ordering::SeqCst), 0, "|| must short-circuit");
}

#[test]
fn followup_registry_is_erased_each_outermost_iteration() {
    let mut h = Harness::single();
    // Two actions drive two outermost iterations; without erasure the
    // second CREATE returns false and violates the inner implication.
    let v = h.evaluate(
        "for (Action a : Input(1).actions()) { IMPLIES(TRUE, CREATE(Input(2), Input(1))) }",
    );
    assert!(holds(&v));
}

#[test]
fn evaluation_is_deterministic_under_fixed_views() {
    let mut h = Harness::single();
    let body = "for (Action a : Input(1).actions()) {\n\
                 IMPLIES(notTried(a.url) && CREATE(Input(2), Input(1)) && \
                 Input(2).actions().get(0).setParameterValue(0, \"probe\"), \
                 different(Output(Input(1), 0), Output(Input(2), 0))) }";
    let first = holds(&h.evaluate(body));
    let second = holds(&h.evaluate(body));
    assert_eq!(first, second);
    assert!(first, "mutated URL echoes differently, so the outputs differ");
}

#[test]
fn not_tried_is_true_exactly_once_per_key() {
    let mut h = Harness::single();
    // First query true: the implication's conclusion is reached.
    assert!(!holds(&h.evaluate("IMPLIES(notTried(\"k\"), FALSE)")));
    // Within one evaluation a repeat is false.
    assert!(holds(&h.evaluate(
        "notTried(\"k\")\nIMPLIES(notTried(\"k\"), FALSE)"
    )));
    // Different user in the two-key variant gives a fresh tuple.
    let v = h.evaluate(
        "notTried(User(1), \"url\")\nIMPLIES(notTried(User(2), \"url\"), FALSE)",
    );
    assert!(!holds(&v));
}

#[test]
fn violation_context_carries_followup_requests() {
    let mut h = Harness::single();
    let v = h.evaluate(
        "IMPLIES(CREATE(Input(2), Input(1)) && \
         Input(2).actions().get(0).setParameterValue(0, \"inj\"), \
         EQUAL(Output(Input(1), 0), Output(Input(2), 0)))",
    );
    match v {
        Verdict::Violated(ctx) => {
            assert_eq!(ctx.followup_inputs.len(), 1);
            assert!(
                ctx.followup_requests
                    .iter()
                    .any(|(_, url)| url.contains("x=inj")),
                "{:?}",
                ctx.followup_requests
            );
            assert_eq!(ctx.source_inputs.len(), 1);
            assert!(!ctx.outputs.is_empty());
        }
        Verdict::Holds => panic!("expected a violation"),
    }
}

#[test]
fn mutating_a_followup_never_touches_the_source() {
    let mut h = Harness::single();
    let before = h.provider.inputs()[0].clone();
    let v = h.evaluate(
        "IMPLIES(CREATE(Input(2), Input(1)) && \
         Input(2).actions().get(0).setParameterValue(0, \"inj\"), TRUE)",
    );
    assert!(holds(&v));
    assert_eq!(h.provider.inputs()[0], before);
}

#[test]
fn mutating_source_input_is_an_error() {
    let mut h = Harness::single();
    let err = h
        .try_evaluate("IMPLIES(Input(1).actions().get(0).setParameterValue(0, \"x\"), TRUE)")
        .unwrap_err();
    assert!(err.to_string().contains("cannot be mutated"), "{err}");
}

#[test]
fn failed_indexed_mutation_returns_false_not_error() {
    let mut h = Harness::single();
    // Parameter index 5 does not exist: the left side degrades to false.
    let v = h.evaluate(
        "IMPLIES(CREATE(Input(2), Input(1)) && \
         Input(2).actions().get(0).setParameterValue(5, \"x\"), FALSE)",
    );
    assert!(holds(&v));
}

#[test]
fn runtime_type_error_is_distinct_from_violation() {
    let mut h = Harness::single();
    let err = h.try_evaluate("IMPLIES(notTried(Output(Input(1), 0)), TRUE)");
    assert!(err.is_err());
}

#[test]
fn output_positions_past_the_end_error() {
    let mut h = Harness::single();
    let err = h.try_evaluate("IMPLIES(isError(Output(Input(1), 9)), TRUE)");
    assert!(err.is_err());
}

#[test]
fn string_concatenation_and_arithmetic() {
    let mut h = Harness::single();
    // 0 + url concatenates into a fresh notTried key; arithmetic still works.
    let v = h.evaluate(
        "for (var x = 0; x < 1; x++) {\n\
           IMPLIES(notTried(x + Input(1).actions().get(0).url) && 1 + 2 * 3 == 7, FALSE) }",
    );
    assert!(!holds(&v));
}

#[test]
fn wait_and_reset_values_insert_as_actions() {
    let mut h = Harness::single();
    let v = h.evaluate(
        "IMPLIES(CREATE(Input(2), Input(1)) && \
         Input(2).addAction(0, Wait(1000)) && \
         Input(2).addAction(0, new ResetSUTAction()), \
         EQUAL(Output(Input(2), 1), Output(Input(2), 1)))",
    );
    assert!(holds(&v));
}

#[test]
fn sessions_flow_through_cookie_mutations() {
    let mut h = Harness::single();
    // The stub sets sid=stub on every response; flipping a boolean cookie
    // through the Cookie constructor must land in the transplanted session.
    let v = h.evaluate(
        "var session = Output(Input(1), 0).session as CookieSession\n\
         IMPLIES(CREATE(Input(2), Input(1)) && \
         session.setCookie(new Cookie(\"elevated\", String.valueOf(!Boolean.valueOf(\"false\")))) && \
         Input(2).actions().get(1).setSession(session), \
         EQUAL(Output(Input(2), 1), Output(Input(2), 1)))",
    );
    assert!(holds(&v));
}

#[test]
fn type_of_and_type_names_compare() {
    let mut h = Harness::single();
    let v = h.evaluate(
        "var t = typeOf(\"true\")\nIMPLIES(t == Boolean && typeOf(\"42\") == Int && \
         typeOf(\"x\") == String && \"word\" != Boolean, FALSE)",
    );
    assert!(!holds(&v), "all type predicates hold, so FALSE is reached");
}
