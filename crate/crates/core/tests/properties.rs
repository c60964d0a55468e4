//! Property tests for the spec-level invariants: renumbering, isolation,
//! serialization round-trips, view completeness, comparator symmetry and
//! crawler state separation.

use proptest::prelude::*;

use mst_core::collected::CollectedData;
use mst_core::crawler::{classify_state, CrawlState};
use mst_core::model::{
    add_action, clone_input, sublist, Action, InputSequence, Origin, Session, User, WebAction,
};
use mst_core::provider::{DataKind, ProviderConfig, ProviderState};
use mst_core::smrl::{parse_file, print_file};
use mst_core::textdist::levenshtein;

fn arb_action() -> impl Strategy<Value = Action> {
    let user = User::new("u", "u", "p", "user");
    prop_oneof![
        ("[a-z]{1,8}", proptest::collection::vec(("[a-z]{1,4}", "[a-z0-9]{0,4}"), 0..3)).prop_map(
            move |(path, params)| {
                let mut w = WebAction::get(&format!("https://sut/{path}"), User::new("u", "u", "p", "user"));
                w.parameters = params
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .collect();
                Action::Web(w)
            }
        ),
        (0u64..10_000).prop_map(|duration_ms| Action::Wait {
            duration_ms,
            position: 0
        }),
        Just(Action::ResetSut { position: 0 }),
    ]
    .prop_map(move |a| {
        let _ = &user;
        a
    })
}

fn arb_sequence() -> impl Strategy<Value = InputSequence> {
    proptest::collection::vec(arb_action(), 0..8)
        .prop_map(|actions| InputSequence::new("s", Origin::Crawler, actions))
}

#[derive(Debug, Clone)]
enum EditOp {
    Insert(usize),
    Sublist(usize, usize),
    SetParam(usize, String),
    SetForm(usize, String),
}

fn arb_ops() -> impl Strategy<Value = Vec<EditOp>> {
    proptest::collection::vec(
        prop_oneof![
            (0usize..8).prop_map(EditOp::Insert),
            (0usize..8, 0usize..8).prop_map(|(a, b)| EditOp::Sublist(a.min(b), a.max(b))),
            (0usize..3, "[a-z]{0,6}").prop_map(|(i, v)| EditOp::SetParam(i, v)),
            (0usize..3, "[a-z]{0,6}").prop_map(|(i, v)| EditOp::SetForm(i, v)),
        ],
        1..6,
    )
}

proptest! {
    /// Positions are exactly 0..n-1 after any add_action/sublist chain.
    #[test]
    fn renumbering_invariant(seq in arb_sequence(), ops in arb_ops()) {
        let mut current = seq;
        for op in ops {
            current = match op {
                EditOp::Insert(at) => {
                    let at = at.min(current.len());
                    add_action(&current, at, Action::ResetSut { position: 99 }).unwrap()
                }
                EditOp::Sublist(from, to) => {
                    let to = to.min(current.len());
                    let from = from.min(to);
                    sublist(&current, from, to).unwrap()
                }
                EditOp::SetParam(..) | EditOp::SetForm(..) => current,
            };
            for (i, action) in current.actions.iter().enumerate() {
                prop_assert_eq!(action.position(), i);
            }
        }
    }

    /// No mutation applied to a derived copy is observable on its source.
    #[test]
    fn isolation_invariant(seq in arb_sequence(), ops in arb_ops()) {
        let source = seq;
        let frozen = source.clone();
        let mut derived = clone_input(&source);
        for op in ops {
            match op {
                EditOp::Insert(at) => {
                    let at = at.min(derived.len());
                    derived = add_action(&derived, at, Action::Wait { duration_ms: 1, position: 0 }).unwrap();
                }
                EditOp::Sublist(from, to) => {
                    let to = to.min(derived.len());
                    let from = from.min(to);
                    derived = sublist(&derived, from, to).unwrap();
                }
                EditOp::SetParam(i, v) => {
                    if let Some(w) = derived.actions.get_mut(0).and_then(|a| a.as_web_mut()) {
                        let _ = w.set_parameter_value(i, &v);
                    }
                }
                EditOp::SetForm(i, v) => {
                    if let Some(w) = derived.actions.get_mut(0).and_then(|a| a.as_web_mut()) {
                        let _ = w.set_form_input(i, &v);
                    }
                }
            }
            prop_assert_eq!(&source, &frozen);
        }
    }

    /// Sessions serialize and parse back losslessly for random cookie maps.
    #[test]
    fn session_round_trip(pairs in proptest::collection::btree_map("[a-zA-Z][a-zA-Z0-9_-]{0,10}", "[ -~]{0,16}", 0..8)) {
        let mut session = Session::new();
        for (name, value) in &pairs {
            // Cookie values travel on headers; keep separators out.
            let value = value.replace([';', '='], "_");
            session.set_cookie(name, &value);
        }
        let text = serde_json::to_string(&session).unwrap();
        let parsed: Session = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(parsed, session);
    }

    /// Edit distance is symmetric and zero exactly on equal strings.
    #[test]
    fn distance_symmetry(a in "[ -~]{0,40}", b in "[ -~]{0,40}") {
        prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
        prop_assert_eq!(levenshtein(&a, &a), 0);
        if a != b {
            prop_assert!(levenshtein(&a, &b) > 0);
        }
    }

    /// Over a full nested enumeration of kinds the offset tuples cover all
    /// combinations exactly once.
    #[test]
    fn view_completeness(sizes in proptest::collection::vec(1usize..4, 1..3)) {
        let users: Vec<User> = (0..sizes[0])
            .map(|i| User::new(&format!("u{i}"), &format!("u{i}"), "p", "user"))
            .collect();
        let input_count = *sizes.get(1).unwrap_or(&1);
        let mut collected = CollectedData::default();
        for i in 0..input_count {
            let u = users[i % users.len()].clone();
            collected.script_inputs.push(InputSequence::new(
                &format!("s{i}"),
                Origin::Script,
                vec![Action::Web(WebAction::get("https://sut/a", u))],
            ));
        }
        let mut provider = ProviderState::from_collected(
            &collected,
            &users,
            &|_| false,
            &ProviderConfig { random_value_budget: 100, ..ProviderConfig::default() },
        );
        let kinds = [DataKind::Input, DataKind::User];
        let expected: usize = provider.view_count(DataKind::Input) * provider.view_count(DataKind::User);

        let mut seen = std::collections::BTreeSet::new();
        fn walk(
            level: usize,
            kinds: &[DataKind],
            provider: &mut ProviderState,
            seen: &mut std::collections::BTreeSet<Vec<usize>>,
        ) {
            if level == kinds.len() {
                let tuple: Vec<usize> = kinds.iter().map(|k| provider.current_offset(*k)).collect();
                assert!(seen.insert(tuple), "assignment repeated");
                return;
            }
            while provider.has_more_views(kinds[level]) {
                provider.next_view(kinds[level]);
                walk(level + 1, kinds, provider, seen);
            }
        }
        walk(0, &kinds, &mut provider, &mut seen);
        prop_assert_eq!(seen.len(), expected);
    }

    /// Print-then-parse is the identity on parsed relation files.
    #[test]
    fn parse_print_round_trip(
        flag in any::<bool>(),
        n in 1i64..1000,
        s in "[a-z ]{0,12}",
        depth_choice in 0u8..3,
    ) {
        let inner = match depth_choice {
            0 => format!("IMPLIES(notTried(\"{s}\") && {n} > 0, TRUE)"),
            1 => format!(
                "for (Action a : Input(1).actions()) {{ var pos = a.getPosition();\n\
                 IMPLIES(isLogin(a) && pos + {n} >= {n}, OR(Output(Input(1), pos).emptyFile, NOT(FALSE))) }}"
            ),
            _ => format!(
                "for (var x = {n}; x > 0; x--) {{ IMPLIES(EQUAL(Input(2), changeCredentials(Input(1), User())), \
                 different(Output(Input(1), 0), Output(Input(2), 0))) }}"
            ),
        };
        let source = format!(
            "package p.q\nMR R {{{{ {} {inner} }}}}",
            if flag { "keepDialogsOpen = true;" } else { "" }
        );
        let first = parse_file(&source).unwrap();
        let printed = print_file(&first);
        let second = parse_file(&printed).unwrap();
        prop_assert_eq!(first, second);
    }

    /// States accepted as new by classification stay pairwise separated by
    /// more than the threshold fraction of the longer body.
    #[test]
    fn state_separation(bodies in proptest::collection::vec("[a-d]{20,60}", 1..12)) {
        let threshold = 0.05;
        let mut states: Vec<CrawlState> = Vec::new();
        for body in &bodies {
            if classify_state(&states, body, threshold).is_none() {
                states.push(CrawlState {
                    id: states.len(),
                    url: String::new(),
                    representative_body: body.clone(),
                });
            }
        }
        for (i, a) in states.iter().enumerate() {
            for b in states.iter().skip(i + 1) {
                let longest = a
                    .representative_body
                    .chars()
                    .count()
                    .max(b.representative_body.chars().count());
                let distance = levenshtein(&a.representative_body, &b.representative_body);
                prop_assert!(
                    distance as f64 > threshold * longest as f64,
                    "states {i} and {} too close: {distance} vs {}",
                    b.id,
                    threshold * longest as f64
                );
            }
        }
    }
}
