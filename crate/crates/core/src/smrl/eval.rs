//! Direct interpretation of parsed relations. Boolean operators follow the
//! nested-condition semantics the truth-table suite pins down; follow-up
//! inputs live in a per-evaluation registry that is erased at the start of
//! every outermost loop iteration.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::ast::*;
use crate::collected::CollectedData;
use crate::executor::{ExecError, ExecutionContext};
use crate::model::{self, Action, Channel, ElementKind, InputSequence, Session, User, WebOutput};
use crate::provider::{DataKind, ProviderError, ProviderState, RandomValue};
use crate::webutils::{self, ActionClassifier, Comparator, WebUtilError};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    WebUtil(#[from] WebUtilError),
    #[error(transparent)]
    Position(#[from] model::PositionError),
    #[error("type error: expected {expected}, found {found}")]
    Type {
        expected: &'static str,
        found: String,
    },
    #[error("{function} takes {expected} arguments, got {got}")]
    Arity {
        function: String,
        expected: String,
        got: usize,
    },
    #[error("source input Input({index}) cannot be mutated; CREATE a follow-up first")]
    MutateSource { index: usize },
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("unknown member `{0}`")]
    UnknownMember(String),
    #[error("unbound variable `{0}`")]
    Unbound(String),
}

/// Result of one relation evaluation under one view assignment.
#[derive(Debug)]
pub enum Verdict {
    Holds,
    Violated(ViolationContext),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TouchedOutput {
    pub sequence_id: String,
    pub position: usize,
    pub status: u16,
    pub body: String,
}

/// What the failing expression saw: the inputs logged since the previous
/// expression boundary, their outputs, and the requests the follow-up
/// inputs issued.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViolationContext {
    pub expression_index: usize,
    pub source_inputs: Vec<InputSequence>,
    pub followup_inputs: Vec<InputSequence>,
    pub outputs: Vec<TouchedOutput>,
    pub followup_requests: Vec<(String, String)>,
}

#[derive(Clone)]
pub enum SeqHandle {
    /// `Input(k)`: resolves through the follow-up registry, then collected data.
    Dsl(usize),
    /// A derived sequence value not (or not yet) registered.
    Val(Rc<RefCell<InputSequence>>),
}

#[derive(Clone)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Str(String),
    TypeName(TypeLit),
    UserV(User),
    InputRef(usize),
    Seq(Rc<RefCell<InputSequence>>),
    ActionsOf(SeqHandle),
    ActionAt(SeqHandle, usize),
    ActionVal(Rc<Action>),
    OutputV(Rc<WebOutput>),
    SessionV(Rc<RefCell<Session>>),
    CookieV(String, String),
    Entry(String, String),
    EntryList(Rc<Vec<(String, String)>>),
    StrList(Rc<Vec<String>>),
    OutputList(Rc<Vec<Rc<WebOutput>>>),
}

impl Value {
    fn kind(&self) -> String {
        match self {
            Value::Bool(_) => "boolean".into(),
            Value::Int(_) => "int".into(),
            Value::Str(_) => "string".into(),
            Value::TypeName(_) => "type name".into(),
            Value::UserV(_) => "user".into(),
            Value::InputRef(_) | Value::Seq(_) => "input sequence".into(),
            Value::ActionsOf(_) => "action list".into(),
            Value::ActionAt(..) | Value::ActionVal(_) => "action".into(),
            Value::OutputV(_) => "output".into(),
            Value::SessionV(_) => "session".into(),
            Value::CookieV(..) => "cookie".into(),
            Value::Entry(..) => "map entry".into(),
            Value::EntryList(_) => "entry list".into(),
            Value::StrList(_) => "string list".into(),
            Value::OutputList(_) => "output list".into(),
        }
    }
}

pub struct EvalContext<'a> {
    pub provider: &'a ProviderState,
    pub executor: &'a mut ExecutionContext,
    pub collected: &'a CollectedData,
    pub comparator: &'a Comparator,
    pub classifier: &'a ActionClassifier,
    pub supervisors: &'a [(String, String)],
    /// Keys already probed by notTried within this evaluation.
    tried: HashSet<Vec<String>>,
    registry: BTreeMap<usize, Rc<RefCell<InputSequence>>>,
    source_read: BTreeSet<usize>,
    scopes: Vec<(String, Value)>,
    expression_index: usize,
    touched_outputs: Vec<TouchedOutput>,
}

enum Flow {
    Continue,
    Violated(Box<ViolationContext>),
}

pub fn evaluate_relation(mr: &RelationAst, ctx: &mut EvalContext) -> Result<Verdict, EvalError> {
    ctx.executor.set_keep_dialogs_open(mr.keep_dialogs_open());
    ctx.begin_outermost_iteration();
    match ctx.exec_block(&mr.body, 0)? {
        Flow::Continue => Ok(Verdict::Holds),
        Flow::Violated(v) => Ok(Verdict::Violated(*v)),
    }
}

impl<'a> EvalContext<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        provider: &'a ProviderState,
        executor: &'a mut ExecutionContext,
        collected: &'a CollectedData,
        comparator: &'a Comparator,
        classifier: &'a ActionClassifier,
        supervisors: &'a [(String, String)],
    ) -> EvalContext<'a> {
        EvalContext {
            provider,
            executor,
            collected,
            comparator,
            classifier,
            supervisors,
            tried: HashSet::new(),
            registry: BTreeMap::new(),
            source_read: BTreeSet::new(),
            scopes: Vec::new(),
            expression_index: 0,
            touched_outputs: Vec::new(),
        }
    }

    /// Erase the follow-up registry; the hook the registry-hygiene tests use.
    pub fn begin_outermost_iteration(&mut self) {
        self.registry.clear();
        self.source_read.clear();
        self.touched_outputs.clear();
    }

    pub fn followup_registry_len(&self) -> usize {
        self.registry.len()
    }

    fn expression_pass(&mut self) {
        self.touched_outputs.clear();
    }

    fn exec_block(&mut self, stmts: &[Stmt], depth: usize) -> Result<Flow, EvalError> {
        let scope_base = self.scopes.len();
        for stmt in stmts {
            match stmt {
                Stmt::VarDecl { name, value } => {
                    let v = self.eval(value)?;
                    self.scopes.push((name.clone(), v));
                }
                Stmt::FlagSet { .. } => {}
                Stmt::ForEach {
                    binder,
                    iterable,
                    body,
                    ..
                } => {
                    let iterable = self.eval(iterable)?;
                    let items = self.enumerate(iterable)?;
                    for item in items {
                        if depth == 0 {
                            self.begin_outermost_iteration();
                        }
                        self.scopes.push((binder.clone(), item));
                        let inner = self.scopes.len();
                        let flow = self.exec_block(body, depth + 1)?;
                        self.scopes.truncate(inner - 1);
                        if let Flow::Violated(v) = flow {
                            self.scopes.truncate(scope_base);
                            return Ok(Flow::Violated(v));
                        }
                    }
                }
                Stmt::ForCounter {
                    var,
                    init,
                    cond,
                    update,
                    body,
                } => {
                    let mut counter = self.expect_int(init)?;
                    self.scopes.push((var.clone(), Value::Int(counter)));
                    loop {
                        if depth == 0 {
                            self.begin_outermost_iteration();
                        }
                        self.set_var(var, Value::Int(counter));
                        let go = {
                            let v = self.eval(cond)?;
                            self.truthy(v)?
                        };
                        if !go {
                            break;
                        }
                        let inner = self.scopes.len();
                        let flow = self.exec_block(body, depth + 1)?;
                        self.scopes.truncate(inner);
                        if let Flow::Violated(v) = flow {
                            self.scopes.truncate(scope_base);
                            return Ok(Flow::Violated(v));
                        }
                        counter += match update {
                            CounterUpdate::Increment(_) => 1,
                            CounterUpdate::Decrement(_) => -1,
                        };
                    }
                    self.scopes.pop();
                }
                Stmt::Expr(e) if e.is_metamorphic() => {
                    self.expression_index += 1;
                    let value = self.eval(e)?;
                    if !self.truthy(value)? {
                        let violation = self.build_violation();
                        self.scopes.truncate(scope_base);
                        return Ok(Flow::Violated(Box::new(violation)));
                    }
                    self.expression_pass();
                }
                Stmt::Expr(e) => {
                    self.eval(e)?;
                }
            }
        }
        self.scopes.truncate(scope_base);
        Ok(Flow::Continue)
    }

    fn build_violation(&mut self) -> ViolationContext {
        let followup_inputs: Vec<InputSequence> = self
            .registry
            .values()
            .map(|rc| rc.borrow().clone())
            .collect();
        let followup_ids: BTreeSet<&str> =
            followup_inputs.iter().map(|s| s.id.as_str()).collect();
        let mut followup_requests: Vec<(String, String)> = Vec::new();
        for entry in self.executor.journal() {
            if followup_ids.contains(entry.sequence_id.as_str()) {
                let pair = (entry.method.clone(), entry.url.clone());
                if !followup_requests.contains(&pair) {
                    followup_requests.push(pair);
                }
            }
        }
        let source_inputs = self
            .source_read
            .iter()
            .filter_map(|k| self.provider.input(*k).ok().cloned())
            .collect();
        ViolationContext {
            expression_index: self.expression_index,
            source_inputs,
            followup_inputs,
            outputs: self.touched_outputs.clone(),
            followup_requests,
        }
    }

    fn set_var(&mut self, name: &str, value: Value) {
        if let Some(slot) = self.scopes.iter_mut().rev().find(|(n, _)| n == name) {
            slot.1 = value;
        }
    }

    fn lookup(&self, name: &str) -> Result<Value, EvalError> {
        self.scopes
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| EvalError::Unbound(name.to_string()))
    }

    fn enumerate(&mut self, value: Value) -> Result<Vec<Value>, EvalError> {
        match value {
            Value::ActionsOf(handle) => {
                let len = self.seq_snapshot(&handle)?.len();
                Ok((0..len)
                    .map(|i| Value::ActionAt(handle.clone(), i))
                    .collect())
            }
            Value::EntryList(entries) => Ok(entries
                .iter()
                .map(|(k, v)| Value::Entry(k.clone(), v.clone()))
                .collect()),
            Value::StrList(items) => Ok(items.iter().map(|s| Value::Str(s.clone())).collect()),
            Value::OutputList(outputs) => {
                Ok(outputs.iter().map(|o| Value::OutputV(o.clone())).collect())
            }
            other => Err(EvalError::Type {
                expected: "iterable",
                found: other.kind(),
            }),
        }
    }

    // ---- sequence resolution -------------------------------------------

    fn seq_snapshot(&mut self, handle: &SeqHandle) -> Result<InputSequence, EvalError> {
        match handle {
            SeqHandle::Dsl(k) => self.dsl_snapshot(*k),
            SeqHandle::Val(rc) => Ok(rc.borrow().clone()),
        }
    }

    fn dsl_snapshot(&mut self, k: usize) -> Result<InputSequence, EvalError> {
        if let Some(rc) = self.registry.get(&k) {
            return Ok(rc.borrow().clone());
        }
        let item = self.provider.input(k)?;
        self.source_read.insert(k);
        Ok(item.clone())
    }

    fn seq_mut(&mut self, handle: &SeqHandle) -> Result<Rc<RefCell<InputSequence>>, EvalError> {
        match handle {
            SeqHandle::Val(rc) => Ok(rc.clone()),
            SeqHandle::Dsl(k) => self
                .registry
                .get(k)
                .cloned()
                .ok_or(EvalError::MutateSource { index: *k }),
        }
    }

    fn seq_from_value(&mut self, value: Value) -> Result<InputSequence, EvalError> {
        match value {
            Value::InputRef(k) => self.dsl_snapshot(k),
            Value::Seq(rc) => Ok(rc.borrow().clone()),
            other => Err(EvalError::Type {
                expected: "input sequence",
                found: other.kind(),
            }),
        }
    }

    fn action_snapshot(&mut self, value: &Value) -> Result<Action, EvalError> {
        match value {
            Value::ActionAt(handle, idx) => {
                let seq = self.seq_snapshot(handle)?;
                seq.actions
                    .get(*idx)
                    .cloned()
                    .ok_or(model::PositionError::OutOfRange {
                        index: *idx,
                        len: seq.len(),
                    })
                    .map_err(EvalError::from)
            }
            Value::ActionVal(a) => Ok(a.as_ref().clone()),
            other => Err(EvalError::Type {
                expected: "action",
                found: other.kind(),
            }),
        }
    }

    /// Apply a mutation to the web action behind an action place. Indexed
    /// failures return false so a conjunction degrades instead of aborting.
    fn mutate_action(
        &mut self,
        value: &Value,
        f: impl FnOnce(&mut crate::model::WebAction) -> bool,
    ) -> Result<Value, EvalError> {
        match value {
            Value::ActionAt(handle, idx) => {
                let rc = self.seq_mut(handle)?;
                let mut seq = rc.borrow_mut();
                let len = seq.len();
                let action = seq
                    .actions
                    .get_mut(*idx)
                    .ok_or(model::PositionError::OutOfRange { index: *idx, len })?;
                match action.as_web_mut() {
                    Some(w) => Ok(Value::Bool(f(w))),
                    None => Err(EvalError::Type {
                        expected: "web action",
                        found: "wait/reset action".into(),
                    }),
                }
            }
            other => Err(EvalError::Type {
                expected: "action within a sequence",
                found: other.kind(),
            }),
        }
    }

    // ---- outputs ---------------------------------------------------------

    fn output_at(&mut self, seq_value: Value, position: usize) -> Result<Rc<WebOutput>, EvalError> {
        let seq = self.seq_from_value(seq_value)?;
        let output = self.executor.output_of(&seq, position)?;
        self.touched_outputs.push(TouchedOutput {
            sequence_id: seq.id.clone(),
            position,
            status: output.status,
            body: output.body.clone(),
        });
        Ok(output)
    }

    // ---- value helpers ---------------------------------------------------

    fn truthy(&self, value: Value) -> Result<bool, EvalError> {
        match value {
            Value::Bool(b) => Ok(b),
            other => Err(EvalError::Type {
                expected: "boolean",
                found: other.kind(),
            }),
        }
    }

    fn int_of(&self, value: Value) -> Result<i64, EvalError> {
        match value {
            Value::Int(i) => Ok(i),
            other => Err(EvalError::Type {
                expected: "int",
                found: other.kind(),
            }),
        }
    }

    fn expect_int(&mut self, e: &Expr) -> Result<i64, EvalError> {
        let v = self.eval(e)?;
        self.int_of(v)
    }

    fn index_of(&mut self, e: &Expr) -> Result<usize, EvalError> {
        let i = self.expect_int(e)?;
        Ok(i.max(0) as usize)
    }

    fn str_of(&self, value: Value) -> Result<String, EvalError> {
        match value {
            Value::Str(s) => Ok(s),
            Value::Int(i) => Ok(i.to_string()),
            Value::Bool(b) => Ok(b.to_string()),
            Value::TypeName(t) => Ok(t.to_string()),
            other => Err(EvalError::Type {
                expected: "string",
                found: other.kind(),
            }),
        }
    }

    fn user_of(&self, value: Value) -> Result<User, EvalError> {
        match value {
            Value::UserV(u) => Ok(u),
            other => Err(EvalError::Type {
                expected: "user",
                found: other.kind(),
            }),
        }
    }

    fn key_of(&self, value: &Value) -> Result<String, EvalError> {
        match value {
            Value::Str(s) => Ok(s.clone()),
            Value::Int(i) => Ok(i.to_string()),
            Value::UserV(u) => Ok(format!("user:{}", u.id)),
            other => Err(EvalError::Type {
                expected: "notTried key",
                found: other.kind(),
            }),
        }
    }

    fn values_equal(&mut self, a: &Value, b: &Value) -> Result<bool, EvalError> {
        Ok(match (a, b) {
            (Value::OutputV(x), Value::OutputV(y)) => self.comparator.outputs_equal(x, y),
            (Value::SessionV(x), Value::SessionV(y)) => x.borrow().entries() == y.borrow().entries(),
            (Value::Bool(x), Value::Bool(y)) => x == y,
            (Value::Int(x), Value::Int(y)) => x == y,
            (Value::Str(x), Value::Str(y)) => x == y,
            (Value::TypeName(x), Value::TypeName(y)) => x == y,
            (Value::UserV(x), Value::UserV(y)) => x == y,
            (Value::Entry(k1, v1), Value::Entry(k2, v2)) => k1 == k2 && v1 == v2,
            (Value::InputRef(_) | Value::Seq(_), Value::InputRef(_) | Value::Seq(_)) => {
                let x = self.seq_from_value(a.clone())?;
                let y = self.seq_from_value(b.clone())?;
                x.same_actions(&y)
            }
            _ => false,
        })
    }

    // ---- expression evaluation -------------------------------------------

    fn eval(&mut self, e: &Expr) -> Result<Value, EvalError> {
        match e {
            Expr::Int(i) => Ok(Value::Int(*i)),
            Expr::Str(s) => Ok(Value::Str(s.clone())),
            Expr::Bool(b) => Ok(Value::Bool(*b)),
            Expr::TypeLiteral(t) => Ok(Value::TypeName(*t)),
            Expr::Ident(name) => self.lookup(name),
            Expr::Unary { op, expr } => {
                let v = self.eval(expr)?;
                match op {
                    UnOp::Not => Ok(Value::Bool(!self.truthy(v)?)),
                    UnOp::Neg => Ok(Value::Int(-self.int_of(v)?)),
                }
            }
            Expr::Binary { op, lhs, rhs } => self.eval_binary(*op, lhs, rhs),
            Expr::Call { name, args } => self.eval_call(name, args),
            Expr::MethodCall { recv, name, args } => self.eval_method(recv, name, args),
            Expr::Field { recv, name } => self.eval_field(recv, name),
            Expr::Cast { expr, type_name } => {
                let v = self.eval(expr)?;
                match (v, type_name.as_str()) {
                    (Value::SessionV(s), "CookieSession") => Ok(Value::SessionV(s)),
                    (other, t) => Err(EvalError::Type {
                        expected: "session castable to CookieSession",
                        found: format!("{} as {t}", other.kind()),
                    }),
                }
            }
            Expr::New { class, args } => match class.as_str() {
                "Cookie" => {
                    let name = self.eval(&args[0]).and_then(|v| self.str_of(v))?;
                    let value = self.eval(&args[1]).and_then(|v| self.str_of(v))?;
                    Ok(Value::CookieV(name, value))
                }
                "ResetSUTAction" => Ok(Value::ActionVal(Rc::new(Action::ResetSut { position: 0 }))),
                other => Err(EvalError::UnknownFunction(format!("new {other}"))),
            },
        }
    }

    fn eval_binary(&mut self, op: BinOp, lhs: &Expr, rhs: &Expr) -> Result<Value, EvalError> {
        match op {
            BinOp::And => {
                let l = self.eval(lhs)?;
                if !self.truthy(l)? {
                    return Ok(Value::Bool(false));
                }
                let r = self.eval(rhs)?;
                Ok(Value::Bool(self.truthy(r)?))
            }
            BinOp::Or => {
                let l = self.eval(lhs)?;
                if self.truthy(l)? {
                    return Ok(Value::Bool(true));
                }
                let r = self.eval(rhs)?;
                Ok(Value::Bool(self.truthy(r)?))
            }
            BinOp::Eq | BinOp::Ne => {
                let l = self.eval(lhs)?;
                let r = self.eval(rhs)?;
                let eq = self.values_equal(&l, &r)?;
                Ok(Value::Bool(if op == BinOp::Eq { eq } else { !eq }))
            }
            BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge => {
                let l = self.eval(lhs)?;
                let r = self.eval(rhs)?;
                let (l, r) = (self.int_of(l)?, self.int_of(r)?);
                Ok(Value::Bool(match op {
                    BinOp::Lt => l < r,
                    BinOp::Gt => l > r,
                    BinOp::Le => l <= r,
                    BinOp::Ge => l >= r,
                    _ => unreachable!(),
                }))
            }
            BinOp::Add => {
                let l = self.eval(lhs)?;
                let r = self.eval(rhs)?;
                match (&l, &r) {
                    (Value::Str(_), _) | (_, Value::Str(_)) => {
                        Ok(Value::Str(format!("{}{}", self.str_of(l)?, self.str_of(r)?)))
                    }
                    _ => Ok(Value::Int(self.int_of(l)? + self.int_of(r)?)),
                }
            }
            BinOp::Sub => {
                let l = self.eval(lhs)?;
                let r = self.eval(rhs)?;
                Ok(Value::Int(self.int_of(l)? - self.int_of(r)?))
            }
            BinOp::Mul => {
                let l = self.eval(lhs)?;
                let r = self.eval(rhs)?;
                Ok(Value::Int(self.int_of(l)? * self.int_of(r)?))
            }
        }
    }

    fn eval_call(&mut self, name: &str, args: &[Expr]) -> Result<Value, EvalError> {
        match name {
            "TRUE" => return Ok(Value::Bool(true)),
            "FALSE" => return Ok(Value::Bool(false)),
            "NOT" => {
                let v = self.eval(&args[0])?;
                return Ok(Value::Bool(!self.truthy(v)?));
            }
            "AND" => {
                for arg in args {
                    let v = self.eval(arg)?;
                    if !self.truthy(v)? {
                        return Ok(Value::Bool(false));
                    }
                }
                return Ok(Value::Bool(true));
            }
            "OR" => {
                for arg in args {
                    let v = self.eval(arg)?;
                    if self.truthy(v)? {
                        return Ok(Value::Bool(true));
                    }
                }
                return Ok(Value::Bool(false));
            }
            "IMPLIES" => {
                let premise = self.eval(&args[0])?;
                if !self.truthy(premise)? {
                    return Ok(Value::Bool(true));
                }
                let conclusion = self.eval(&args[1])?;
                return Ok(Value::Bool(self.truthy(conclusion)?));
            }
            "CREATE" => return self.define_followup(true, args),
            "EQUAL" => {
                if args[0].as_input_ref().is_some() {
                    return self.define_followup(false, args);
                }
                let a = self.eval(&args[0])?;
                let b = self.eval(&args[1])?;
                let eq = self.values_equal(&a, &b)?;
                return Ok(Value::Bool(eq));
            }
            _ => {}
        }

        if let Some(kind) = DataKind::from_function_name(name) {
            return self.eval_data_function(kind, name, args);
        }

        match name {
            "changeCredentials" => {
                let seq_v = self.eval(&args[0])?;
                let seq = self.seq_from_value(seq_v)?;
                let user_v = self.eval(&args[1])?;
                let user = self.user_of(user_v)?;
                let derived = webutils::change_credentials(&seq, &user, self.classifier);
                Ok(Value::Seq(Rc::new(RefCell::new(derived))))
            }
            "copyActionTo" => {
                let seq_v = self.eval(&args[0])?;
                let seq = self.seq_from_value(seq_v)?;
                let from = self.index_of(&args[1])?;
                let to = self.index_of(&args[2])?;
                let derived = model::copy_action_to(&seq, from, to)?;
                Ok(Value::Seq(Rc::new(RefCell::new(derived))))
            }
            "addAction" => {
                let seq_v = self.eval(&args[0])?;
                let seq = self.seq_from_value(seq_v)?;
                let at = self.index_of(&args[1])?;
                let action_v = self.eval(&args[2])?;
                let action = self.action_snapshot(&action_v)?;
                let derived = model::add_action(&seq, at, action)?;
                Ok(Value::Seq(Rc::new(RefCell::new(derived))))
            }
            "sublist" => {
                let seq_v = self.eval(&args[0])?;
                let seq = self.seq_from_value(seq_v)?;
                let from = self.index_of(&args[1])?;
                let to = self.index_of(&args[2])?;
                let derived = model::sublist(&seq, from, to)?;
                Ok(Value::Seq(Rc::new(RefCell::new(derived))))
            }
            "cannotReachThroughGUI" => {
                let user_v = self.eval(&args[0])?;
                let user = self.user_of(user_v)?;
                let url_v = self.eval(&args[1])?;
                let url = self.str_of(url_v)?;
                Ok(Value::Bool(webutils::cannot_reach_through_gui(
                    self.collected,
                    &user,
                    &url,
                )?))
            }
            "isLogin" | "isSignup" | "isResetPassword" => {
                let v = self.eval(&args[0])?;
                let action = self.action_snapshot(&v)?;
                let result = match name {
                    "isLogin" => self.classifier.is_login(&action),
                    "isSignup" => self.classifier.is_signup(&action),
                    _ => self.classifier.is_reset_password(&action),
                };
                Ok(Value::Bool(result))
            }
            "afterLogin" => {
                let v = self.eval(&args[0])?;
                match v {
                    Value::ActionAt(handle, idx) => {
                        let seq = self.seq_snapshot(&handle)?;
                        Ok(Value::Bool(self.classifier.after_login(&seq.actions, idx)))
                    }
                    Value::ActionVal(_) => Ok(Value::Bool(false)),
                    other => Err(EvalError::Type {
                        expected: "action",
                        found: other.kind(),
                    }),
                }
            }
            "isError" => {
                let v = self.eval(&args[0])?;
                match v {
                    Value::OutputV(o) => Ok(Value::Bool(self.comparator.is_error(&o))),
                    other => Err(EvalError::Type {
                        expected: "output",
                        found: other.kind(),
                    }),
                }
            }
            "isSupervisorOf" => {
                let a = self.eval(&args[0])?;
                let a = self.user_of(a)?;
                let b = self.eval(&args[1])?;
                let b = self.user_of(b)?;
                Ok(Value::Bool(webutils::is_supervisor_of(
                    self.supervisors,
                    &a,
                    &b,
                )))
            }
            "userCanRetrieveContent" => {
                let user = self.eval(&args[0])?;
                let user = self.user_of(user)?;
                let output = self.eval(&args[1])?;
                match output {
                    Value::OutputV(o) => Ok(Value::Bool(webutils::user_can_retrieve_content(
                        self.collected,
                        &user,
                        &o,
                        self.comparator,
                    ))),
                    other => Err(EvalError::Type {
                        expected: "output",
                        found: other.kind(),
                    }),
                }
            }
            "notTried" => {
                if args.is_empty() || args.len() > 2 {
                    return Err(EvalError::Arity {
                        function: name.to_string(),
                        expected: "1..2".to_string(),
                        got: args.len(),
                    });
                }
                let mut key = Vec::new();
                for arg in args {
                    let v = self.eval(arg)?;
                    key.push(self.key_of(&v)?);
                }
                Ok(Value::Bool(self.tried.insert(key)))
            }
            "EncodeUrl" | "encodeUrl" => {
                let v = self.eval(&args[0])?;
                Ok(Value::Str(webutils::encode_url(&self.str_of(v)?)))
            }
            "SCInjection_beginning" => {
                let value = self.eval(&args[0])?;
                let value = self.str_of(value)?;
                let ch = self.eval(&args[1])?;
                let ch = self.str_of(ch)?;
                Ok(Value::Str(webutils::special_char_injection_beginning(
                    &value, &ch,
                )))
            }
            "typeOf" => {
                let v = self.eval(&args[0])?;
                Ok(Value::TypeName(match v {
                    Value::Bool(_) => TypeLit::Boolean,
                    Value::Int(_) => TypeLit::Int,
                    Value::Str(s) => webutils::type_of(&s),
                    other => {
                        return Err(EvalError::Type {
                            expected: "string",
                            found: other.kind(),
                        })
                    }
                }))
            }
            "different" => {
                let a = self.eval(&args[0])?;
                let b = self.eval(&args[1])?;
                let eq = self.values_equal(&a, &b)?;
                Ok(Value::Bool(!eq))
            }
            "Wait" => {
                let ms = self.expect_int(&args[0])?;
                Ok(Value::ActionVal(Rc::new(Action::Wait {
                    duration_ms: ms.max(0) as u64,
                    position: 0,
                })))
            }
            "LoginAction" => {
                let user = self.eval(&args[0])?;
                let user = self.user_of(user)?;
                let action =
                    webutils::login_action_for(self.collected, &user, self.classifier)?;
                Ok(Value::ActionVal(Rc::new(action)))
            }
            other => Err(EvalError::UnknownFunction(other.to_string())),
        }
    }

    fn eval_data_function(
        &mut self,
        kind: DataKind,
        name: &str,
        args: &[Expr],
    ) -> Result<Value, EvalError> {
        let dsl_index = |me: &mut Self, args: &[Expr]| -> Result<usize, EvalError> {
            if args.is_empty() {
                Ok(1)
            } else {
                me.index_of(&args[0])
            }
        };
        match kind {
            DataKind::Input => {
                let k = dsl_index(self, args)?;
                Ok(Value::InputRef(k))
            }
            DataKind::User => {
                let k = dsl_index(self, args)?;
                Ok(Value::UserV(self.provider.user(k)?.clone()))
            }
            DataKind::Output => {
                if args.is_empty() || args.len() > 2 {
                    return Err(EvalError::Arity {
                        function: name.to_string(),
                        expected: "1..2".to_string(),
                        got: args.len(),
                    });
                }
                let seq_v = self.eval(&args[0])?;
                if args.len() == 2 {
                    let pos = self.index_of(&args[1])?;
                    let output = self.output_at(seq_v, pos)?;
                    Ok(Value::OutputV(output))
                } else {
                    let seq = self.seq_from_value(seq_v)?;
                    let mut outputs = Vec::new();
                    for i in 0..seq.len() {
                        outputs.push(self.output_at(Value::Seq(Rc::new(RefCell::new(seq.clone()))), i)?);
                    }
                    Ok(Value::OutputList(Rc::new(outputs)))
                }
            }
            DataKind::Action => {
                let k = dsl_index(self, args)?;
                let (si, ai) = self.provider.action(k)?;
                self.provider_action_ref(si, ai)
            }
            DataKind::ActionAvailableWithoutLogin => {
                let k = dsl_index(self, args)?;
                let (si, ai) = self.provider.action_available_without_login(k)?;
                self.provider_action_ref(si, ai)
            }
            DataKind::RandomValue => {
                let v = self.eval(&args[0])?;
                match v {
                    Value::TypeName(t) => Ok(match self.provider.random_value(t) {
                        RandomValue::Bool(b) => Value::Bool(b),
                        RandomValue::Int(i) => Value::Int(i),
                        RandomValue::Str(s) => Value::Str(s),
                    }),
                    other => Err(EvalError::Type {
                        expected: "type name",
                        found: other.kind(),
                    }),
                }
            }
            DataKind::ParameterValueUsedByOtherUsers => {
                let action_v = self.eval(&args[0])?;
                let action = self.action_snapshot(&action_v)?;
                let par = self.index_of(&args[1])?;
                match action.as_web() {
                    Some(w) => Ok(Value::StrList(Rc::new(
                        self.provider.parameter_values_used_by_other_users(w, par),
                    ))),
                    None => Err(EvalError::Type {
                        expected: "web action",
                        found: "wait/reset action".into(),
                    }),
                }
            }
            kind => {
                let k = dsl_index(self, args)?;
                Ok(Value::Str(self.provider.text_item(kind, k)?))
            }
        }
    }

    fn provider_action_ref(&mut self, si: usize, ai: usize) -> Result<Value, EvalError> {
        let seq = self.provider.inputs()[si].clone();
        let handle = SeqHandle::Val(Rc::new(RefCell::new(seq)));
        Ok(Value::ActionAt(handle, ai))
    }

    fn define_followup(&mut self, create: bool, args: &[Expr]) -> Result<Value, EvalError> {
        let index_expr = args[0].as_input_ref().expect("checked as input ref");
        let k = {
            let i = self.eval(index_expr)?;
            self.int_of(i)?.max(0) as usize
        };
        let already_bound = self.registry.contains_key(&k);
        let already_source = self.source_read.contains(&k);
        if already_bound || already_source {
            if create {
                // The identifier already names an input.
                return Ok(Value::Bool(false));
            }
            let value_v = self.eval(&args[1])?;
            let value = self.seq_from_value(value_v)?;
            let existing = if already_bound {
                self.registry[&k].borrow().clone()
            } else {
                self.provider.input(k)?.clone()
            };
            return Ok(Value::Bool(existing.same_actions(&value)));
        }
        let value_v = self.eval(&args[1])?;
        let value = self.seq_from_value(value_v)?;
        let bound = model::clone_input(&value);
        self.registry.insert(k, Rc::new(RefCell::new(bound)));
        Ok(Value::Bool(true))
    }

    fn eval_method(
        &mut self,
        recv: &Expr,
        name: &str,
        args: &[Expr],
    ) -> Result<Value, EvalError> {
        let recv_v = self.eval(recv)?;
        match (&recv_v, name) {
            (Value::InputRef(k), "actions") => Ok(Value::ActionsOf(SeqHandle::Dsl(*k))),
            (Value::Seq(rc), "actions") => Ok(Value::ActionsOf(SeqHandle::Val(rc.clone()))),
            (Value::InputRef(k), "addAction") => {
                let at = self.index_of(&args[0])?;
                let action_v = self.eval(&args[1])?;
                let action = self.action_snapshot(&action_v)?;
                let rc = self.seq_mut(&SeqHandle::Dsl(*k))?;
                rc.borrow_mut().insert_action(at, action)?;
                Ok(Value::Bool(true))
            }
            (Value::Seq(rc), "addAction") => {
                let at = self.index_of(&args[0])?;
                let action_v = self.eval(&args[1])?;
                let action = self.action_snapshot(&action_v)?;
                rc.borrow_mut().insert_action(at, action)?;
                Ok(Value::Bool(true))
            }
            (Value::ActionsOf(handle), "get") => {
                let i = self.index_of(&args[0])?;
                let len = self.seq_snapshot(handle)?.len();
                if i >= len {
                    return Err(model::PositionError::OutOfRange { index: i, len }.into());
                }
                Ok(Value::ActionAt(handle.clone(), i))
            }
            (Value::ActionsOf(handle), "size") => {
                Ok(Value::Int(self.seq_snapshot(handle)?.len() as i64))
            }
            (Value::ActionAt(..) | Value::ActionVal(_), "getPosition") => {
                let action = self.action_snapshot(&recv_v)?;
                Ok(Value::Int(action.position() as i64))
            }
            (Value::ActionAt(..) | Value::ActionVal(_), "getUrl") => {
                let action = self.action_snapshot(&recv_v)?;
                match action.as_web() {
                    Some(w) => Ok(Value::Str(w.full_url())),
                    None => Ok(Value::Str(String::new())),
                }
            }
            (Value::ActionAt(..) | Value::ActionVal(_), "getElementURL") => {
                let action = self.action_snapshot(&recv_v)?;
                match action.as_web() {
                    Some(w) => Ok(Value::Str(w.element_url.clone())),
                    None => Ok(Value::Str(String::new())),
                }
            }
            (Value::ActionAt(..) | Value::ActionVal(_), "getUser") => {
                let action = self.action_snapshot(&recv_v)?;
                Ok(Value::UserV(action.user()))
            }
            (Value::ActionAt(..) | Value::ActionVal(_), "getParameters") => {
                let action = self.action_snapshot(&recv_v)?;
                let params = action.as_web().map(|w| w.parameters.clone()).unwrap_or_default();
                Ok(Value::EntryList(Rc::new(params)))
            }
            (Value::ActionAt(..) | Value::ActionVal(_), "getParameterValue") => {
                let action = self.action_snapshot(&recv_v)?;
                let i = self.index_of(&args[0])?;
                let params = action.as_web().map(|w| w.parameters.clone()).unwrap_or_default();
                params
                    .get(i)
                    .map(|(_, v)| Value::Str(v.clone()))
                    .ok_or(model::PositionError::OutOfRange {
                        index: i,
                        len: params.len(),
                    })
                    .map_err(EvalError::from)
            }
            (Value::ActionAt(..), "setParameterValue") => {
                let i = self.index_of(&args[0])?;
                let v = self.eval(&args[1])?;
                let v = self.str_of(v)?;
                self.mutate_action(&recv_v, |w| w.set_parameter_value(i, &v))
            }
            (Value::ActionAt(..), "setFormInput") => {
                let i = self.index_of(&args[0])?;
                let v = self.eval(&args[1])?;
                let v = self.str_of(v)?;
                self.mutate_action(&recv_v, |w| w.set_form_input(i, &v))
            }
            (Value::ActionAt(..), "setChannel") => {
                let v = self.eval(&args[0])?;
                let v = self.str_of(v)?;
                let channel = Channel::parse(&v).ok_or(EvalError::UnknownChannel(v))?;
                self.mutate_action(&recv_v, |w| w.set_channel(channel))
            }
            (Value::ActionAt(..), "setSession") => {
                let v = self.eval(&args[0])?;
                let session = match v {
                    Value::SessionV(s) => s.borrow().clone(),
                    other => {
                        return Err(EvalError::Type {
                            expected: "session",
                            found: other.kind(),
                        })
                    }
                };
                self.mutate_action(&recv_v, |w| w.set_session(session))
            }
            (Value::ActionAt(..) | Value::ActionVal(_), "containFormInput") => {
                let action = self.action_snapshot(&recv_v)?;
                Ok(Value::Bool(
                    action.as_web().map_or(false, |w| !w.form_inputs.is_empty()),
                ))
            }
            (Value::OutputV(o), "getSession") => {
                Ok(Value::SessionV(Rc::new(RefCell::new(o.session.clone()))))
            }
            (Value::OutputV(o), "isError") => Ok(Value::Bool(self.comparator.is_error(o))),
            (Value::SessionV(s), "setCookie") => {
                let v = self.eval(&args[0])?;
                match v {
                    Value::CookieV(name, value) => {
                        s.borrow_mut().set_cookie(&name, &value);
                        Ok(Value::Bool(true))
                    }
                    other => Err(EvalError::Type {
                        expected: "cookie",
                        found: other.kind(),
                    }),
                }
            }
            (Value::TypeName(TypeLit::String), "valueOf") => {
                let v = self.eval(&args[0])?;
                Ok(Value::Str(self.str_of(v)?))
            }
            (Value::TypeName(TypeLit::Boolean), "valueOf") => {
                let v = self.eval(&args[0])?;
                match v {
                    Value::Bool(b) => Ok(Value::Bool(b)),
                    other => {
                        let s = self.str_of(other)?;
                        Ok(Value::Bool(s.eq_ignore_ascii_case("true")))
                    }
                }
            }
            (Value::EntryList(entries), "size") => Ok(Value::Int(entries.len() as i64)),
            (_, other) => Err(EvalError::UnknownMember(other.to_string())),
        }
    }

    fn eval_field(&mut self, recv: &Expr, name: &str) -> Result<Value, EvalError> {
        let recv_v = self.eval(recv)?;
        match (&recv_v, name) {
            (Value::InputRef(k), "actions") => Ok(Value::ActionsOf(SeqHandle::Dsl(*k))),
            (Value::Seq(rc), "actions") => Ok(Value::ActionsOf(SeqHandle::Val(rc.clone()))),
            (Value::ActionsOf(handle), "size") => {
                Ok(Value::Int(self.seq_snapshot(handle)?.len() as i64))
            }
            (Value::ActionAt(..) | Value::ActionVal(_), "url") => {
                let action = self.action_snapshot(&recv_v)?;
                match action.as_web() {
                    Some(w) => Ok(Value::Str(w.full_url())),
                    None => Ok(Value::Str(String::new())),
                }
            }
            (Value::ActionAt(..) | Value::ActionVal(_), "user") => {
                let action = self.action_snapshot(&recv_v)?;
                Ok(Value::UserV(action.user()))
            }
            (Value::ActionAt(..) | Value::ActionVal(_), "position") => {
                let action = self.action_snapshot(&recv_v)?;
                Ok(Value::Int(action.position() as i64))
            }
            (Value::ActionAt(..) | Value::ActionVal(_), "parameters") => {
                let action = self.action_snapshot(&recv_v)?;
                let params = action.as_web().map(|w| w.parameters.clone()).unwrap_or_default();
                Ok(Value::EntryList(Rc::new(params)))
            }
            (Value::ActionAt(..) | Value::ActionVal(_), "formInputs") => {
                let action = self.action_snapshot(&recv_v)?;
                let inputs = action
                    .as_web()
                    .map(|w| w.form_inputs.clone())
                    .unwrap_or_default();
                Ok(Value::EntryList(Rc::new(inputs)))
            }
            (Value::ActionAt(..) | Value::ActionVal(_), "isClickOnButton") => {
                let action = self.action_snapshot(&recv_v)?;
                Ok(Value::Bool(action.as_web().map_or(false, |w| {
                    w.element_kind == ElementKind::SubmitButton
                })))
            }
            (Value::OutputV(o), "session") => {
                Ok(Value::SessionV(Rc::new(RefCell::new(o.session.clone()))))
            }
            (Value::OutputV(o), "hasAlert") => Ok(Value::Bool(o.has_alert)),
            (Value::OutputV(o), "emptyFile") => Ok(Value::Bool(o.is_empty_file)),
            (Value::SessionV(s), "keyValueMappings") => {
                Ok(Value::EntryList(Rc::new(s.borrow().entries().to_vec())))
            }
            (Value::EntryList(_), "entrySet") => Ok(recv_v.clone()),
            (Value::EntryList(entries), "size") => Ok(Value::Int(entries.len() as i64)),
            (Value::Entry(k, _), "key") => Ok(Value::Str(k.clone())),
            (Value::Entry(_, v), "value") => Ok(Value::Str(v.clone())),
            (_, other) => Err(EvalError::UnknownMember(other.to_string())),
        }
    }
}
