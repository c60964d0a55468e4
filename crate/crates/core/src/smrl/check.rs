//! Static validation: variables bound before use, operator arities, and a
//! closed registry of function, method and field names. Unknown names are
//! rejected up front instead of failing mid-execution.

use std::collections::BTreeSet;

use super::ast::*;
use crate::provider::DataKind;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CheckError {
    #[error("relation {relation}: unbound variable `{name}`")]
    UnboundVariable { relation: String, name: String },
    #[error("relation {relation}: operator {op} takes {expected}, got {got} arguments")]
    Arity {
        relation: String,
        op: String,
        expected: String,
        got: usize,
    },
    #[error("relation {relation}: unknown function `{name}`")]
    UnknownFunction { relation: String, name: String },
    #[error("relation {relation}: unknown method `{name}`")]
    UnknownMethod { relation: String, name: String },
    #[error("relation {relation}: unknown field `{name}`")]
    UnknownField { relation: String, name: String },
    #[error("relation {relation}: unknown cast target `{name}`")]
    UnknownCast { relation: String, name: String },
    #[error("relation {relation}: unknown class `{name}`")]
    UnknownClass { relation: String, name: String },
    #[error("relation {relation}: {op} must name its follow-up with Input(...)")]
    FollowupNotInputRef { relation: String, op: String },
}

const WEB_FUNCTIONS: &[&str] = &[
    "changeCredentials",
    "copyActionTo",
    "addAction",
    "sublist",
    "cannotReachThroughGUI",
    "isLogin",
    "isSignup",
    "isResetPassword",
    "afterLogin",
    "isError",
    "isSupervisorOf",
    "userCanRetrieveContent",
    "notTried",
    "EncodeUrl",
    "encodeUrl",
    "SCInjection_beginning",
    "typeOf",
    "different",
    "Wait",
    "LoginAction",
];

const METHODS: &[&str] = &[
    "actions",
    "get",
    "size",
    "getPosition",
    "getUrl",
    "getElementURL",
    "getUser",
    "getParameters",
    "getParameterValue",
    "setParameterValue",
    "setFormInput",
    "setChannel",
    "setSession",
    "addAction",
    "containFormInput",
    "getSession",
    "isError",
    "setCookie",
    "valueOf",
];

const FIELDS: &[&str] = &[
    "actions",
    "url",
    "user",
    "parameters",
    "formInputs",
    "position",
    "session",
    "hasAlert",
    "emptyFile",
    "size",
    "isClickOnButton",
    "keyValueMappings",
    "entrySet",
    "key",
    "value",
];

fn known_function(name: &str) -> bool {
    Expr::is_operator_name(name)
        || DataKind::from_function_name(name).is_some()
        || WEB_FUNCTIONS.contains(&name)
}

/// Validate one relation. Called on every catalog entry at load time and by
/// the `check` subcommand.
pub fn check_relation(mr: &RelationAst) -> Result<(), CheckError> {
    check_bindings(mr)?;
    let mut result = Ok(());
    visit_exprs(&mr.body, &mut |e| {
        if result.is_err() {
            return;
        }
        result = check_expr(mr, e);
    });
    result
}

fn check_expr(mr: &RelationAst, e: &Expr) -> Result<(), CheckError> {
    let relation = mr.name.clone();
    match e {
        Expr::Call { name, args } => {
            if Expr::is_operator_name(name) {
                let expected: Option<(usize, usize)> = match name.as_str() {
                    "IMPLIES" | "CREATE" | "EQUAL" => Some((2, 2)),
                    "NOT" => Some((1, 1)),
                    "AND" | "OR" => Some((2, usize::MAX)),
                    "TRUE" | "FALSE" => Some((0, 0)),
                    _ => None,
                };
                if let Some((lo, hi)) = expected {
                    if args.len() < lo || args.len() > hi {
                        return Err(CheckError::Arity {
                            relation,
                            op: name.clone(),
                            expected: if lo == hi {
                                format!("{lo}")
                            } else if hi == usize::MAX {
                                format!("at least {lo}")
                            } else {
                                format!("{lo}..{hi}")
                            },
                            got: args.len(),
                        });
                    }
                }
                if name == "CREATE" && args[0].as_input_ref().is_none() {
                    return Err(CheckError::FollowupNotInputRef {
                        relation,
                        op: name.clone(),
                    });
                }
                Ok(())
            } else if known_function(name) {
                Ok(())
            } else {
                Err(CheckError::UnknownFunction {
                    relation,
                    name: name.clone(),
                })
            }
        }
        Expr::MethodCall { name, .. } => {
            if METHODS.contains(&name.as_str()) {
                Ok(())
            } else {
                Err(CheckError::UnknownMethod {
                    relation,
                    name: name.clone(),
                })
            }
        }
        Expr::Field { name, .. } => {
            if FIELDS.contains(&name.as_str()) {
                Ok(())
            } else {
                Err(CheckError::UnknownField {
                    relation,
                    name: name.clone(),
                })
            }
        }
        Expr::Cast { type_name, .. } => {
            if type_name == "CookieSession" {
                Ok(())
            } else {
                Err(CheckError::UnknownCast {
                    relation,
                    name: type_name.clone(),
                })
            }
        }
        Expr::New { class, .. } => {
            if class == "Cookie" || class == "ResetSUTAction" {
                Ok(())
            } else {
                Err(CheckError::UnknownClass {
                    relation,
                    name: class.clone(),
                })
            }
        }
        _ => Ok(()),
    }
}

fn check_bindings(mr: &RelationAst) -> Result<(), CheckError> {
    let mut scope: Vec<String> = Vec::new();
    check_block(&mr.name, &mr.body, &mut scope)
}

fn check_block(relation: &str, stmts: &[Stmt], scope: &mut Vec<String>) -> Result<(), CheckError> {
    let depth = scope.len();
    for stmt in stmts {
        match stmt {
            Stmt::ForEach {
                binder,
                iterable,
                body,
                ..
            } => {
                check_bound(relation, iterable, scope)?;
                scope.push(binder.clone());
                check_block(relation, body, scope)?;
                scope.pop();
            }
            Stmt::ForCounter {
                var,
                init,
                cond,
                body,
                ..
            } => {
                check_bound(relation, init, scope)?;
                scope.push(var.clone());
                check_bound(relation, cond, scope)?;
                check_block(relation, body, scope)?;
                scope.pop();
            }
            Stmt::VarDecl { name, value } => {
                check_bound(relation, value, scope)?;
                scope.push(name.clone());
            }
            Stmt::FlagSet { .. } => {}
            Stmt::Expr(e) => check_bound(relation, e, scope)?,
        }
    }
    scope.truncate(depth);
    Ok(())
}

fn check_bound(relation: &str, expr: &Expr, scope: &[String]) -> Result<(), CheckError> {
    let mut result = Ok(());
    let single = [Stmt::Expr(expr.clone())];
    visit_exprs(&single, &mut |e| {
        if result.is_err() {
            return;
        }
        if let Expr::Ident(name) = e {
            if !scope.contains(name) {
                result = Err(CheckError::UnboundVariable {
                    relation: relation.to_string(),
                    name: name.clone(),
                });
            }
        }
    });
    result
}

/// Every data-function kind syntactically referenced anywhere in the
/// relation, nested calls included.
pub fn extract_source_input_types(mr: &RelationAst) -> BTreeSet<DataKind> {
    let mut kinds = BTreeSet::new();
    visit_exprs(&mr.body, &mut |e| {
        if let Expr::Call { name, .. } = e {
            if let Some(kind) = DataKind::from_function_name(name) {
                kinds.insert(kind);
            }
        }
    });
    kinds
}
