//! Recursive-descent parser for `.smrl` sources. Only the language subset
//! the catalog relations exercise is accepted; anything else is a parse
//! error rather than silently ignored.

use std::collections::BTreeMap;

use super::ast::*;
use super::lexer::{lex, LexError, Pos, Tok, Token};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ParseError {
    #[error("{0}")]
    Lex(#[from] LexError),
    #[error("{pos}: expected {expected}, found {found}")]
    Unexpected {
        pos: Pos,
        expected: String,
        found: String,
    },
    #[error("{pos}: {message}")]
    Invalid { pos: Pos, message: String },
}

pub fn parse_file(source: &str) -> Result<RelationFile, ParseError> {
    let tokens = lex(source)?;
    let mut p = Parser { tokens, at: 0 };
    p.file()
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.at].tok
    }

    fn peek2(&self) -> &Tok {
        &self.tokens[(self.at + 1).min(self.tokens.len() - 1)].tok
    }

    fn pos(&self) -> Pos {
        self.tokens[self.at].pos
    }

    fn bump(&mut self) -> Tok {
        let tok = self.tokens[self.at].tok.clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        tok
    }

    fn unexpected<T>(&self, expected: &str) -> Result<T, ParseError> {
        Err(ParseError::Unexpected {
            pos: self.pos(),
            expected: expected.to_string(),
            found: self.peek().to_string(),
        })
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.unexpected(expected)
        }
    }

    fn ident(&mut self, expected: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(name)
            }
            _ => self.unexpected(expected),
        }
    }

    fn keyword(&mut self, word: &str) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Ident(name) if name == word => {
                self.bump();
                Ok(())
            }
            _ => self.unexpected(&format!("`{word}`")),
        }
    }

    fn at_keyword(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Ident(name) if name == word)
    }

    fn eat_semi(&mut self) {
        while *self.peek() == Tok::Semi {
            self.bump();
        }
    }

    fn dotted(&mut self) -> Result<String, ParseError> {
        let mut parts = vec![self.ident("package segment")?];
        while *self.peek() == Tok::Dot {
            self.bump();
            if *self.peek() == Tok::Star {
                self.bump();
                parts.push("*".to_string());
                break;
            }
            parts.push(self.ident("package segment")?);
        }
        Ok(parts.join("."))
    }

    fn file(&mut self) -> Result<RelationFile, ParseError> {
        self.keyword("package")?;
        let package = self.dotted()?;
        self.eat_semi();
        while self.at_keyword("import") {
            self.bump();
            self.dotted()?;
            self.eat_semi();
        }
        let mut relations: Vec<RelationAst> = Vec::new();
        while self.at_keyword("MR") {
            let mr = self.relation(&package)?;
            if relations.iter().any(|r| r.name == mr.name) {
                return Err(ParseError::Invalid {
                    pos: self.pos(),
                    message: format!("duplicate relation name {}", mr.name),
                });
            }
            relations.push(mr);
        }
        if relations.is_empty() {
            return self.unexpected("`MR`");
        }
        self.expect(Tok::Eof, "end of file")?;
        Ok(RelationFile { package, relations })
    }

    fn relation(&mut self, package: &str) -> Result<RelationAst, ParseError> {
        self.keyword("MR")?;
        let start = self.pos();
        let name = self.ident("relation name")?;
        self.expect(Tok::LBrace, "`{`")?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut flags = BTreeMap::new();
        let mut body = Vec::new();
        while *self.peek() != Tok::RBrace {
            match self.statement()? {
                Stmt::FlagSet { name, value } => {
                    flags.insert(name, value);
                }
                stmt => body.push(stmt),
            }
        }
        self.expect(Tok::RBrace, "`}`")?;
        self.expect(Tok::RBrace, "`}`")?;
        if body.is_empty() {
            return Err(ParseError::Invalid {
                pos: start,
                message: format!("relation {name} has an empty body"),
            });
        }
        Ok(RelationAst {
            package: package.to_string(),
            name,
            flags,
            body,
        })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut stmts = Vec::new();
        while *self.peek() != Tok::RBrace {
            stmts.push(self.statement()?);
        }
        self.expect(Tok::RBrace, "`}`")?;
        Ok(stmts)
    }

    fn statement(&mut self) -> Result<Stmt, ParseError> {
        if self.at_keyword("for") {
            return self.for_statement();
        }
        if self.at_keyword("var") {
            self.bump();
            let name = self.ident("variable name")?;
            self.expect(Tok::Assign, "`=`")?;
            let value = self.expression()?;
            self.eat_semi();
            return Ok(Stmt::VarDecl { name, value });
        }
        // Flag assignment: IDENT = <boolean literal>
        if matches!(self.peek(), Tok::Ident(_)) && *self.peek2() == Tok::Assign {
            let pos = self.pos();
            let name = self.ident("flag name")?;
            self.bump(); // `=`
            let value = match self.expression()? {
                Expr::Bool(b) => b,
                _ => {
                    return Err(ParseError::Invalid {
                        pos,
                        message: format!("only boolean flag assignments are supported ({name})"),
                    })
                }
            };
            self.eat_semi();
            return Ok(Stmt::FlagSet { name, value });
        }
        let expr = self.expression()?;
        self.eat_semi();
        Ok(Stmt::Expr(expr))
    }

    fn for_statement(&mut self) -> Result<Stmt, ParseError> {
        self.keyword("for")?;
        self.expect(Tok::LParen, "`(`")?;
        if self.at_keyword("var") {
            // Counter form: for (var x = init; cond; x++/x--)
            self.bump();
            let var = self.ident("counter name")?;
            self.expect(Tok::Assign, "`=`")?;
            let init = self.expression()?;
            self.expect(Tok::Semi, "`;`")?;
            let cond = self.expression()?;
            self.expect(Tok::Semi, "`;`")?;
            let name = self.ident("counter name")?;
            let update = match self.bump() {
                Tok::PlusPlus => CounterUpdate::Increment(name),
                Tok::MinusMinus => CounterUpdate::Decrement(name),
                _ => return self.unexpected("`++` or `--`"),
            };
            self.expect(Tok::RParen, "`)`")?;
            let body = self.block()?;
            return Ok(Stmt::ForCounter {
                var,
                init,
                cond,
                update,
                body,
            });
        }
        // Element form: for (Type? binder : iterable)
        let first = self.ident("loop binder or element type")?;
        let (type_name, binder) = match self.peek().clone() {
            Tok::Colon => (None, first),
            Tok::Lt => {
                // Generic element type, e.g. Entry<String,String>
                self.bump();
                let mut params = vec![self.ident("type parameter")?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    params.push(self.ident("type parameter")?);
                }
                self.expect(Tok::Gt, "`>`")?;
                let binder = self.ident("loop binder")?;
                (Some(format!("{first}<{}>", params.join(","))), binder)
            }
            Tok::Ident(_) => {
                let binder = self.ident("loop binder")?;
                (Some(first), binder)
            }
            _ => return self.unexpected("`:` or loop binder"),
        };
        self.expect(Tok::Colon, "`:`")?;
        let iterable = self.expression()?;
        self.expect(Tok::RParen, "`)`")?;
        let body = self.block()?;
        Ok(Stmt::ForEach {
            type_name,
            binder,
            iterable,
            body,
        })
    }

    fn expression(&mut self) -> Result<Expr, ParseError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.and_expr()?;
        while *self.peek() == Tok::OrOr {
            self.bump();
            let rhs = self.and_expr()?;
            lhs = Expr::Binary {
                op: BinOp::Or,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.equality_expr()?;
        while *self.peek() == Tok::AndAnd {
            self.bump();
            let rhs = self.equality_expr()?;
            lhs = Expr::Binary {
                op: BinOp::And,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn equality_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.relational_expr()?;
        loop {
            let op = match self.peek() {
                Tok::EqEq => BinOp::Eq,
                Tok::NotEq => BinOp::Ne,
                _ => break,
            };
            self.bump();
            let rhs = self.relational_expr()?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn relational_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.additive_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Lt => BinOp::Lt,
                Tok::Gt => BinOp::Gt,
                Tok::Le => BinOp::Le,
                Tok::Ge => BinOp::Ge,
                _ => break,
            };
            self.bump();
            let rhs = self.additive_expr()?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn additive_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.multiplicative_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.multiplicative_expr()?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn multiplicative_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary_expr()?;
        while *self.peek() == Tok::Star {
            self.bump();
            let rhs = self.unary_expr()?;
            lhs = Expr::Binary {
                op: BinOp::Mul,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn unary_expr(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Tok::Bang => {
                self.bump();
                Ok(Expr::Unary {
                    op: UnOp::Not,
                    expr: Box::new(self.unary_expr()?),
                })
            }
            Tok::Minus => {
                self.bump();
                Ok(Expr::Unary {
                    op: UnOp::Neg,
                    expr: Box::new(self.unary_expr()?),
                })
            }
            _ => self.postfix_expr(),
        }
    }

    fn postfix_expr(&mut self) -> Result<Expr, ParseError> {
        let mut expr = self.primary_expr()?;
        loop {
            match self.peek() {
                Tok::Dot => {
                    self.bump();
                    let name = self.ident("member name")?;
                    if *self.peek() == Tok::LParen {
                        let args = self.call_args()?;
                        expr = Expr::MethodCall {
                            recv: Box::new(expr),
                            name,
                            args,
                        };
                    } else {
                        expr = Expr::Field {
                            recv: Box::new(expr),
                            name,
                        };
                    }
                }
                Tok::Ident(word) if word == "as" => {
                    self.bump();
                    let type_name = self.ident("type name")?;
                    expr = Expr::Cast {
                        expr: Box::new(expr),
                        type_name,
                    };
                }
                _ => break,
            }
        }
        Ok(expr)
    }

    fn call_args(&mut self) -> Result<Vec<Expr>, ParseError> {
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            args.push(self.expression()?);
            while *self.peek() == Tok::Comma {
                self.bump();
                args.push(self.expression()?);
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(args)
    }

    fn primary_expr(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(value) => {
                self.bump();
                Ok(Expr::Int(value))
            }
            Tok::Str(value) => {
                self.bump();
                Ok(Expr::Str(value))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expression()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => match name.as_str() {
                "true" => {
                    self.bump();
                    Ok(Expr::Bool(true))
                }
                "false" => {
                    self.bump();
                    Ok(Expr::Bool(false))
                }
                "Boolean" if *self.peek2() != Tok::LParen => {
                    self.bump();
                    Ok(Expr::TypeLiteral(TypeLit::Boolean))
                }
                "String" if *self.peek2() != Tok::LParen => {
                    self.bump();
                    Ok(Expr::TypeLiteral(TypeLit::String))
                }
                "Int" if *self.peek2() != Tok::LParen => {
                    self.bump();
                    Ok(Expr::TypeLiteral(TypeLit::Int))
                }
                "new" => {
                    self.bump();
                    let class = self.ident("class name")?;
                    let args = self.call_args()?;
                    Ok(Expr::New { class, args })
                }
                // TRUE and FALSE are operators; the parentheses are optional.
                "TRUE" | "FALSE" if *self.peek2() != Tok::LParen => {
                    self.bump();
                    Ok(Expr::Call { name, args: vec![] })
                }
                _ => {
                    self.bump();
                    if *self.peek() == Tok::LParen {
                        let args = self.call_args()?;
                        Ok(Expr::Call { name, args })
                    } else {
                        Ok(Expr::Ident(name))
                    }
                }
            },
            _ => self.unexpected("expression"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_ok(src: &str) -> RelationFile {
        parse_file(src).expect("parse")
    }

    #[test]
    fn minimal_relation() {
        let file = parse_ok("package a.b\nMR M {{ IMPLIES(TRUE(), FALSE()) }}");
        assert_eq!(file.package, "a.b");
        assert_eq!(file.relations.len(), 1);
        assert_eq!(file.relations[0].name, "M");
        assert_eq!(file.relations[0].body.len(), 1);
    }

    #[test]
    fn empty_body_is_rejected() {
        let err = parse_file("package p\nMR X {{ }}").unwrap_err();
        assert!(err.to_string().contains("empty body"), "{err}");
    }

    #[test]
    fn duplicate_names_in_one_file_are_rejected() {
        let err =
            parse_file("package p\nMR X {{ TRUE() }} MR X {{ TRUE() }}").unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn imports_are_parsed_and_ignored() {
        let file = parse_ok("package p;\nimport smrl.mr.language.Action;\nMR M {{ TRUE() }}");
        assert_eq!(file.relations.len(), 1);
    }

    #[test]
    fn flag_assignment_lands_in_flags() {
        let file = parse_ok("package p\nMR M {{ keepDialogsOpen = true; TRUE() }}");
        assert_eq!(file.relations[0].flags.get("keepDialogsOpen"), Some(&true));
        assert!(file.relations[0].keep_dialogs_open());
    }

    #[test]
    fn for_each_with_and_without_type() {
        let file = parse_ok(
            "package p\nMR M {{ for (Action a : Input(1).actions()) { TRUE() } \
             for (v : values(a, 0)) { TRUE() } }}",
        );
        match &file.relations[0].body[0] {
            Stmt::ForEach {
                type_name, binder, ..
            } => {
                assert_eq!(type_name.as_deref(), Some("Action"));
                assert_eq!(binder, "a");
            }
            other => panic!("expected for-each, got {other:?}"),
        }
        match &file.relations[0].body[1] {
            Stmt::ForEach { type_name, .. } => assert_eq!(type_name.as_deref(), None),
            other => panic!("expected for-each, got {other:?}"),
        }
    }

    #[test]
    fn generic_binder_type() {
        let file = parse_ok(
            "package p\nMR M {{ for (Entry<String,String> cookie : mappings(1)) { TRUE() } }}",
        );
        match &file.relations[0].body[0] {
            Stmt::ForEach { type_name, .. } => {
                assert_eq!(type_name.as_deref(), Some("Entry<String,String>"))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn counter_loop_with_decrement() {
        let file = parse_ok(
            "package p\nMR M {{ for (var y = Input(1).actions().size() - 1; y > 0; y--) { TRUE() } }}",
        );
        match &file.relations[0].body[0] {
            Stmt::ForCounter { var, update, .. } => {
                assert_eq!(var, "y");
                assert_eq!(update, &CounterUpdate::Decrement("y".into()));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn precedence_of_mixed_expression() {
        let file = parse_ok("package p\nMR M {{ var x = 1 + 2 * 3 == 7 && true\nTRUE() }}");
        match &file.relations[0].body[0] {
            Stmt::VarDecl { value, .. } => match value {
                Expr::Binary { op: BinOp::And, lhs, .. } => match lhs.as_ref() {
                    Expr::Binary { op: BinOp::Eq, .. } => {}
                    other => panic!("expected ==, got {other:?}"),
                },
                other => panic!("expected &&, got {other:?}"),
            },
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cast_and_member_chains() {
        let file = parse_ok(
            "package p\nMR M {{ var s = Output(Input(1), pos).session as CookieSession\nTRUE() }}",
        );
        match &file.relations[0].body[0] {
            Stmt::VarDecl { value, .. } => match value {
                Expr::Cast { type_name, expr } => {
                    assert_eq!(type_name, "CookieSession");
                    assert!(matches!(expr.as_ref(), Expr::Field { name, .. } if name == "session"));
                }
                other => panic!("expected cast, got {other:?}"),
            },
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_reports_position_and_expectation() {
        let err = parse_file("package p\nMR M {{ IMPLIES(TRUE(), ) }}").unwrap_err();
        let text = err.to_string();
        assert!(text.starts_with("2:"), "{text}");
        assert!(text.contains("expected expression"), "{text}");
    }
}
