//! The shipped relation catalog and the template-element classifier that
//! maps a relation onto the known precondition/follow-up/output-condition
//! patterns.

use serde::{Deserialize, Serialize};

use crate::provider::DataKind;
use crate::smrl::ast::{visit_exprs, Expr, RelationAst, Stmt};
use crate::smrl::{check_relation, parse_file, CheckError, ParseError};

/// The eleven template-element booleans: which preconditions a relation
/// states, how it derives follow-up inputs, and what it verifies on outputs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternVector {
    pub user_precondition: bool,
    pub action_precondition: bool,
    pub same_user: bool,
    pub different_user: bool,
    pub same_actions: bool,
    pub actions_subset: bool,
    pub added_actions: bool,
    pub modified_actions: bool,
    pub verify_equality: bool,
    pub verify_difference: bool,
    pub verify_other_predicate: bool,
}

impl PatternVector {
    fn as_row(&self) -> [bool; 11] {
        [
            self.user_precondition,
            self.action_precondition,
            self.same_user,
            self.different_user,
            self.same_actions,
            self.actions_subset,
            self.added_actions,
            self.modified_actions,
            self.verify_equality,
            self.verify_difference,
            self.verify_other_predicate,
        ]
    }
}

/// The known pattern rows, P1..P23, as (id, element row) pairs.
const PATTERN_ROWS: [(u8, [u8; 11]); 23] = [
    (1, [1, 1, 1, 0, 0, 0, 0, 1, 0, 0, 1]),
    (2, [0, 1, 1, 0, 0, 0, 0, 1, 1, 0, 1]),
    (3, [0, 1, 1, 0, 0, 0, 1, 0, 0, 1, 0]),
    (4, [0, 1, 1, 0, 0, 0, 0, 1, 0, 0, 1]),
    (5, [0, 1, 1, 0, 0, 0, 0, 1, 0, 1, 1]),
    (6, [1, 1, 1, 0, 0, 0, 0, 1, 0, 1, 1]),
    (7, [1, 1, 1, 0, 0, 0, 0, 1, 1, 0, 1]),
    (8, [0, 1, 1, 0, 0, 0, 0, 1, 0, 1, 0]),
    (9, [1, 0, 1, 0, 0, 0, 0, 1, 0, 0, 1]),
    (10, [1, 1, 0, 1, 1, 0, 0, 0, 0, 1, 1]),
    (11, [0, 1, 1, 0, 1, 0, 0, 0, 0, 0, 1]),
    (12, [0, 0, 1, 0, 0, 0, 1, 0, 1, 0, 0]),
    (13, [1, 1, 0, 1, 0, 1, 0, 0, 0, 1, 1]),
    (14, [0, 1, 0, 1, 1, 0, 0, 1, 0, 1, 0]),
    (15, [0, 1, 1, 0, 0, 1, 0, 0, 0, 1, 1]),
    (16, [0, 1, 1, 0, 0, 1, 0, 1, 0, 1, 1]),
    (17, [0, 1, 1, 0, 1, 0, 0, 0, 0, 1, 0]),
    (18, [0, 1, 1, 0, 1, 0, 0, 1, 0, 0, 1]),
    (19, [1, 1, 0, 1, 0, 0, 0, 1, 0, 1, 1]),
    (20, [1, 1, 0, 1, 0, 0, 1, 0, 0, 0, 1]),
    (21, [1, 1, 0, 1, 0, 1, 0, 0, 1, 0, 0]),
    (22, [1, 1, 1, 0, 0, 1, 0, 0, 0, 1, 1]),
    (23, [1, 1, 0, 1, 1, 0, 0, 0, 1, 0, 1]),
];

/// Exact row lookup for a classified vector.
pub fn pattern_id(vector: &PatternVector) -> Option<u8> {
    let row = vector.as_row();
    PATTERN_ROWS
        .iter()
        .find(|(_, r)| r.iter().zip(row).all(|(a, b)| (*a == 1) == b))
        .map(|(id, _)| *id)
}

#[derive(Debug, thiserror::Error)]
pub enum ClassifyError {
    #[error("relation {0} has no implication")]
    NoImplication(String),
}

/// Syntactic classification against the template: preconditions are the
/// conjuncts left of the first follow-up definition on the implication's
/// left side; the follow-up strategy comes from which constructors and
/// mutators appear; the output condition from the right side's structure.
pub fn classify_pattern(mr: &RelationAst) -> Result<(PatternVector, Option<u8>), ClassifyError> {
    let implies = find_implies(&mr.body).ok_or_else(|| ClassifyError::NoImplication(mr.name.clone()))?;
    let (lhs, rhs) = implies;

    let mut vector = PatternVector::default();

    let conjuncts = flatten_conjunction(lhs);
    let mut followup_seen = false;
    for conjunct in &conjuncts {
        if is_followup_definition(conjunct) {
            followup_seen = true;
            continue;
        }
        if !followup_seen && !is_constant(conjunct) {
            if references_user(conjunct) {
                vector.user_precondition = true;
            } else {
                vector.action_precondition = true;
            }
        }
    }

    // Follow-up strategy from the constructors and mutators anywhere in the
    // relation body.
    let mut any_followup = false;
    let mut calls: Vec<String> = Vec::new();
    visit_exprs(&mr.body, &mut |e| match e {
        Expr::Call { name, args } => {
            if (name == "CREATE" || name == "EQUAL") && args[0].as_input_ref().is_some() {
                any_followup = true;
            }
            calls.push(name.clone());
        }
        Expr::MethodCall { name, .. } => calls.push(name.clone()),
        _ => {}
    });
    let has = |name: &str| calls.iter().any(|c| c == name);
    if has("changeCredentials") {
        vector.different_user = true;
    }
    if has("sublist") {
        vector.actions_subset = true;
    }
    if has("addAction") || has("copyActionTo") {
        vector.added_actions = true;
    }
    if has("setParameterValue") || has("setFormInput") || has("setChannel") || has("setSession") {
        vector.modified_actions = true;
    }
    if any_followup {
        if vector.different_user {
            vector.same_user = false;
        } else {
            vector.same_user = true;
        }
        if !vector.actions_subset && !vector.added_actions && !vector.modified_actions {
            vector.same_actions = true;
        }
    }

    classify_output_condition(rhs, &mut vector);
    let id = pattern_id(&vector);
    Ok((vector, id))
}

fn find_implies(stmts: &[Stmt]) -> Option<(&Expr, &Expr)> {
    let mut found: Option<(&Expr, &Expr)> = None;
    visit_exprs(stmts, &mut |e| {
        if found.is_none() {
            if let Expr::Call { name, args } = e {
                if name == "IMPLIES" && args.len() == 2 {
                    found = Some((&args[0], &args[1]));
                }
            }
        }
    });
    found
}

/// Split nested AND / `&&` structure into conjuncts, left to right.
fn flatten_conjunction(e: &Expr) -> Vec<&Expr> {
    let mut out = Vec::new();
    fn walk<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
        match e {
            Expr::Binary {
                op: super::smrl::ast::BinOp::And,
                lhs,
                rhs,
            } => {
                walk(lhs, out);
                walk(rhs, out);
            }
            Expr::Call { name, args } if name == "AND" => {
                for a in args {
                    walk(a, out);
                }
            }
            other => out.push(other),
        }
    }
    walk(e, &mut out);
    out
}

/// Constant operators state nothing about users or actions.
fn is_constant(e: &Expr) -> bool {
    matches!(e, Expr::Bool(_))
        || matches!(e, Expr::Call { name, args } if args.is_empty() && (name == "TRUE" || name == "FALSE"))
}

fn is_followup_definition(e: &Expr) -> bool {
    matches!(e, Expr::Call { name, args }
        if (name == "CREATE" || name == "EQUAL") && args.first().is_some_and(|a| a.as_input_ref().is_some()))
}

/// A precondition concerns the user when it mentions the User data function,
/// the supervisor or retrievability predicates, or keys notTried by user.
fn references_user(e: &Expr) -> bool {
    let mut yes = false;
    let single = [Stmt::Expr(e.clone())];
    visit_exprs(&single, &mut |inner| match inner {
        Expr::Call { name, args } => {
            if name == "isSupervisorOf" || name == "userCanRetrieveContent" {
                yes = true;
            }
            if name == "User" {
                yes = true;
            }
            if name == "notTried" && args.len() == 2 && mentions_user_expr(&args[0]) {
                yes = true;
            }
        }
        _ => {}
    });
    yes
}

fn mentions_user_expr(e: &Expr) -> bool {
    let mut yes = false;
    let single = [Stmt::Expr(e.clone())];
    visit_exprs(&single, &mut |inner| match inner {
        Expr::Call { name, .. } if name == "User" => yes = true,
        Expr::MethodCall { name, .. } if name == "getUser" => yes = true,
        Expr::Field { name, .. } if name == "user" => yes = true,
        _ => {}
    });
    yes
}

fn classify_output_condition(rhs: &Expr, vector: &mut PatternVector) {
    let single = [Stmt::Expr(rhs.clone())];
    visit_exprs(&single, &mut |e| match e {
        Expr::Call { name, args } => match name.as_str() {
            "different" => vector.verify_difference = true,
            "EQUAL" if args.first().is_some_and(|a| a.as_input_ref().is_none()) => {
                vector.verify_equality = true
            }
            "isError" | "userCanRetrieveContent" | "isLogin" | "isSignup" | "isResetPassword"
            | "afterLogin" | "cannotReachThroughGUI" | "isSupervisorOf" => {
                vector.verify_other_predicate = true
            }
            _ => {}
        },
        Expr::MethodCall { name, .. } if name == "isError" => {
            vector.verify_other_predicate = true
        }
        Expr::Field { name, .. } if name == "hasAlert" || name == "emptyFile" => {
            vector.verify_other_predicate = true
        }
        _ => {}
    });
}

/// One shipped catalog relation with its identifiers and classification.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub identifiers: Vec<String>,
    pub title: String,
    pub source: &'static str,
    pub ast: RelationAst,
    pub vector: PatternVector,
    pub pattern_id: Option<u8>,
    pub input_kinds: Vec<DataKind>,
}

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("catalog entry {name}: {source}")]
    Parse { name: String, source: ParseError },
    #[error("catalog entry {name}: {source}")]
    Check { name: String, source: CheckError },
    #[error("catalog entry {name}: {source}")]
    Classify {
        name: String,
        source: ClassifyError,
    },
}

const SOURCES: [(&str, &[&str], &str, &str); 12] = [
    (
        "CWE_266_269_280_OTG_AUTHZ_002",
        &["CWE-266", "CWE-269", "CWE-280", "OTG-AUTHZ-002"],
        "Bypassing authorization schema",
        include_str!("../../../../catalog/CWE_266_269_280_OTG_AUTHZ_002.smrl"),
    ),
    (
        "CWE_287a_425_OTG_AUTHN_001",
        &["CWE-287", "CWE-425", "OTG-AUTHN-001"],
        "Credentials transported over an encrypted channel",
        include_str!("../../../../catalog/CWE_287a_425_OTG_AUTHN_001.smrl"),
    ),
    (
        "CWE_302_471_472_784_807",
        &["CWE-302", "CWE-471", "CWE-472", "CWE-784", "CWE-807"],
        "Assumed-immutable elements",
        include_str!("../../../../catalog/CWE_302_471_472_784_807.smrl"),
    ),
    (
        "CWE_79_a_XSSreflected",
        &["CWE-79"],
        "Reflected cross-site scripting",
        include_str!("../../../../catalog/CWE_79_a_XSSreflected.smrl"),
    ),
    (
        "CWE_286_OTG_AUTHZ_002c",
        &["CWE-286", "OTG-AUTHZ-002"],
        "Incorrect user management",
        include_str!("../../../../catalog/CWE_286_OTG_AUTHZ_002c.smrl"),
    ),
    (
        "CWE_841",
        &["CWE-841"],
        "Improper enforcement of behavioral workflow",
        include_str!("../../../../catalog/CWE_841.smrl"),
    ),
    (
        "OTG_SESS_003",
        &["OTG-SESS-003"],
        "Session fixation",
        include_str!("../../../../catalog/OTG_SESS_003.smrl"),
    ),
    (
        "CWE_262_263_309_324",
        &["CWE-262", "CWE-263", "CWE-309", "CWE-324"],
        "Password aging",
        include_str!("../../../../catalog/CWE_262_263_309_324.smrl"),
    ),
    (
        "CWE_20_73_99_219_220_528_530_642_732_OTG_AUTHZ_001a",
        &["CWE-20", "OTG-AUTHZ-001"],
        "Directory traversal and file include",
        include_str!("../../../../catalog/CWE_20_73_99_219_220_528_530_642_732_OTG_AUTHZ_001a.smrl"),
    ),
    (
        "CWE_15_639_OTG_AUTHZ_004",
        &["CWE-15", "CWE-639", "OTG-AUTHZ-004"],
        "Externally controlled object references",
        include_str!("../../../../catalog/CWE_15_639_OTG_AUTHZ_004.smrl"),
    ),
    (
        "CWE_94_96_B",
        &["CWE-94", "CWE-96"],
        "Static code injection",
        include_str!("../../../../catalog/CWE_94_96_B.smrl"),
    ),
    (
        "CWE_792_793_794_795_796_797_A",
        &["CWE-792", "CWE-793", "CWE-794", "CWE-795", "CWE-796", "CWE-797"],
        "Incomplete filtering of special elements",
        include_str!("../../../../catalog/CWE_792_793_794_795_796_797_A.smrl"),
    ),
];

/// Parse, check and classify the shipped catalog.
pub fn catalog_entries() -> Result<Vec<CatalogEntry>, CatalogError> {
    let mut entries = Vec::new();
    for (name, identifiers, title, source) in SOURCES {
        let file = parse_file(source).map_err(|e| CatalogError::Parse {
            name: name.to_string(),
            source: e,
        })?;
        for ast in file.relations {
            check_relation(&ast).map_err(|e| CatalogError::Check {
                name: ast.name.clone(),
                source: e,
            })?;
            let (vector, id) = classify_pattern(&ast).map_err(|e| CatalogError::Classify {
                name: ast.name.clone(),
                source: e,
            })?;
            let input_kinds = crate::smrl::extract_source_input_types(&ast)
                .into_iter()
                .collect();
            entries.push(CatalogEntry {
                name: ast.name.clone(),
                identifiers: identifiers.iter().map(|s| s.to_string()).collect(),
                title: title.to_string(),
                source,
                ast,
                vector,
                pattern_id: id,
                input_kinds,
            });
        }
    }
    Ok(entries)
}
