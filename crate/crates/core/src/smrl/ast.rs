//! Abstract syntax of the metamorphic relation language.

use std::collections::BTreeMap;
use std::fmt;

/// One parsed `.smrl` file: a package declaration and its relations.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationFile {
    pub package: String,
    pub relations: Vec<RelationAst>,
}

/// A single metamorphic relation.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationAst {
    pub package: String,
    pub name: String,
    /// Boolean flags assigned at the top of the body, e.g. `keepDialogsOpen`.
    pub flags: BTreeMap<String, bool>,
    pub body: Vec<Stmt>,
}

impl RelationAst {
    pub fn keep_dialogs_open(&self) -> bool {
        self.flags.get("keepDialogsOpen").copied().unwrap_or(false)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    /// `for (Type x : expr) { ... }`; the element type is optional.
    ForEach {
        type_name: Option<String>,
        binder: String,
        iterable: Expr,
        body: Vec<Stmt>,
    },
    /// `for (var x = init; cond; x++/x--) { ... }`
    ForCounter {
        var: String,
        init: Expr,
        cond: Expr,
        update: CounterUpdate,
        body: Vec<Stmt>,
    },
    VarDecl {
        name: String,
        value: Expr,
    },
    /// `name = true;` at statement level configures a relation flag.
    FlagSet {
        name: String,
        value: bool,
    },
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum CounterUpdate {
    Increment(String),
    Decrement(String),
}

/// Type names usable as values, e.g. in `type == Boolean`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TypeLit {
    Boolean,
    String,
    Int,
}

impl fmt::Display for TypeLit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeLit::Boolean => write!(f, "Boolean"),
            TypeLit::String => write!(f, "String"),
            TypeLit::Int => write!(f, "Int"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    And,
    Or,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    Add,
    Sub,
    Mul,
}

impl BinOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Gt => ">",
            BinOp::Le => "<=",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(i64),
    Str(String),
    Bool(bool),
    TypeLiteral(TypeLit),
    Ident(String),
    Unary {
        op: UnOp,
        expr: Box<Expr>,
    },
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    /// Free function call: data functions, web utilities and operators.
    Call {
        name: String,
        args: Vec<Expr>,
    },
    MethodCall {
        recv: Box<Expr>,
        name: String,
        args: Vec<Expr>,
    },
    Field {
        recv: Box<Expr>,
        name: String,
    },
    Cast {
        expr: Box<Expr>,
        type_name: String,
    },
    New {
        class: String,
        args: Vec<Expr>,
    },
}

impl Expr {
    pub fn call(name: &str, args: Vec<Expr>) -> Expr {
        Expr::Call {
            name: name.to_string(),
            args,
        }
    }

    /// The metamorphic operators of the language.
    pub fn is_operator_name(name: &str) -> bool {
        matches!(
            name,
            "IMPLIES" | "AND" | "OR" | "NOT" | "TRUE" | "FALSE" | "CREATE" | "EQUAL"
        )
    }

    /// True for expressions whose top node is a metamorphic operator; a false
    /// result from one of these at statement level violates the relation.
    pub fn is_metamorphic(&self) -> bool {
        matches!(self, Expr::Call { name, .. } if Expr::is_operator_name(name))
    }

    /// Does this expression reference `Input(k)` for a literal k? Used to give
    /// CREATE/EQUAL their follow-up-definition reading.
    pub fn as_input_ref(&self) -> Option<&Expr> {
        match self {
            Expr::Call { name, args } if name == "Input" && args.len() == 1 => Some(&args[0]),
            _ => None,
        }
    }
}

/// Walk every expression of a statement list, depth first.
pub fn visit_exprs<'a>(stmts: &'a [Stmt], f: &mut impl FnMut(&'a Expr)) {
    fn walk_expr<'a>(e: &'a Expr, f: &mut impl FnMut(&'a Expr)) {
        f(e);
        match e {
            Expr::Unary { expr, .. } => walk_expr(expr, f),
            Expr::Binary { lhs, rhs, .. } => {
                walk_expr(lhs, f);
                walk_expr(rhs, f);
            }
            Expr::Call { args, .. } | Expr::New { args, .. } => {
                for a in args {
                    walk_expr(a, f);
                }
            }
            Expr::MethodCall { recv, args, .. } => {
                walk_expr(recv, f);
                for a in args {
                    walk_expr(a, f);
                }
            }
            Expr::Field { recv, .. } => walk_expr(recv, f),
            Expr::Cast { expr, .. } => walk_expr(expr, f),
            _ => {}
        }
    }
    for stmt in stmts {
        match stmt {
            Stmt::ForEach { iterable, body, .. } => {
                walk_expr(iterable, f);
                visit_exprs(body, f);
            }
            Stmt::ForCounter {
                init, cond, body, ..
            } => {
                walk_expr(init, f);
                walk_expr(cond, f);
                visit_exprs(body, f);
            }
            Stmt::VarDecl { value, .. } => walk_expr(value, f),
            Stmt::FlagSet { .. } => {}
            Stmt::Expr(e) => walk_expr(e, f),
        }
    }
}
