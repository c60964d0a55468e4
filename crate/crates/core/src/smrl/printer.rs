//! Canonical pretty-printer. Printing an AST and reparsing the result yields
//! an equal AST, which the round-trip tests lean on.

use std::fmt::Write;

use super::ast::*;

pub fn print_file(file: &RelationFile) -> String {
    let mut out = String::new();
    writeln!(out, "package {}", file.package).unwrap();
    for mr in &file.relations {
        out.push('\n');
        out.push_str(&print_relation(mr));
    }
    out
}

pub fn print_relation(mr: &RelationAst) -> String {
    let mut out = String::new();
    writeln!(out, "MR {} {{", mr.name).unwrap();
    writeln!(out, " {{").unwrap();
    for (flag, value) in &mr.flags {
        writeln!(out, "  {flag} = {value};").unwrap();
    }
    for stmt in &mr.body {
        print_stmt(&mut out, stmt, 2);
    }
    writeln!(out, " }}").unwrap();
    writeln!(out, "}}").unwrap();
    out
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push(' ');
    }
}

fn print_stmt(out: &mut String, stmt: &Stmt, level: usize) {
    indent(out, level);
    match stmt {
        Stmt::ForEach {
            type_name,
            binder,
            iterable,
            body,
        } => {
            match type_name {
                Some(t) => writeln!(out, "for ({t} {binder} : {}) {{", print_expr(iterable)),
                None => writeln!(out, "for ({binder} : {}) {{", print_expr(iterable)),
            }
            .unwrap();
            for s in body {
                print_stmt(out, s, level + 1);
            }
            indent(out, level);
            out.push_str("}\n");
        }
        Stmt::ForCounter {
            var,
            init,
            cond,
            update,
            body,
        } => {
            let step = match update {
                CounterUpdate::Increment(n) => format!("{n}++"),
                CounterUpdate::Decrement(n) => format!("{n}--"),
            };
            writeln!(
                out,
                "for (var {var} = {}; {}; {step}) {{",
                print_expr(init),
                print_expr(cond)
            )
            .unwrap();
            for s in body {
                print_stmt(out, s, level + 1);
            }
            indent(out, level);
            out.push_str("}\n");
        }
        Stmt::VarDecl { name, value } => {
            writeln!(out, "var {name} = {};", print_expr(value)).unwrap();
        }
        Stmt::FlagSet { name, value } => {
            writeln!(out, "{name} = {value};").unwrap();
        }
        Stmt::Expr(e) => {
            writeln!(out, "{};", print_expr(e)).unwrap();
        }
    }
}

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Binary { op, .. } => match op {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul => 6,
        },
        Expr::Unary { .. } => 7,
        Expr::Cast { .. } => 8,
        _ => 9,
    }
}

pub fn print_expr(e: &Expr) -> String {
    match e {
        Expr::Int(v) => v.to_string(),
        Expr::Str(s) => {
            let mut quoted = String::from("\"");
            for c in s.chars() {
                match c {
                    '"' => quoted.push_str("\\\""),
                    '\\' => quoted.push_str("\\\\"),
                    '\n' => quoted.push_str("\\n"),
                    '\t' => quoted.push_str("\\t"),
                    '\r' => quoted.push_str("\\r"),
                    c if (c as u32) < 0x20 => {
                        write!(quoted, "\\u{:04x}", c as u32).unwrap();
                    }
                    c => quoted.push(c),
                }
            }
            quoted.push('"');
            quoted
        }
        Expr::Bool(b) => b.to_string(),
        Expr::TypeLiteral(t) => t.to_string(),
        Expr::Ident(name) => name.clone(),
        Expr::Unary { op, expr } => {
            let symbol = match op {
                UnOp::Not => "!",
                UnOp::Neg => "-",
            };
            format!("{symbol}{}", child(expr, 7))
        }
        Expr::Binary { op, lhs, rhs } => {
            let level = precedence(e);
            format!(
                "{} {} {}",
                child(lhs, level),
                op.symbol(),
                // Right operand parenthesized at equal precedence to keep
                // left associativity through a reparse.
                child_strict(rhs, level)
            )
        }
        Expr::Call { name, args } => format!("{name}({})", arg_list(args)),
        Expr::MethodCall { recv, name, args } => {
            format!("{}.{name}({})", child(recv, 9), arg_list(args))
        }
        Expr::Field { recv, name } => format!("{}.{name}", child(recv, 9)),
        Expr::Cast { expr, type_name } => format!("{} as {type_name}", child(expr, 8)),
        Expr::New { class, args } => format!("new {class}({})", arg_list(args)),
    }
}

fn arg_list(args: &[Expr]) -> String {
    args.iter().map(print_expr).collect::<Vec<_>>().join(", ")
}

fn child(e: &Expr, parent_level: u8) -> String {
    if precedence(e) < parent_level {
        format!("({})", print_expr(e))
    } else {
        print_expr(e)
    }
}

fn child_strict(e: &Expr, parent_level: u8) -> String {
    if precedence(e) <= parent_level {
        format!("({})", print_expr(e))
    } else {
        print_expr(e)
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse_file;
    use super::*;

    fn round_trip(src: &str) {
        let first = parse_file(src).expect("initial parse");
        let printed = print_file(&first);
        let second = parse_file(&printed)
            .unwrap_or_else(|e| panic!("reparse failed: {e}\n--- printed ---\n{printed}"));
        assert_eq!(first, second, "--- printed ---\n{printed}");
    }

    #[test]
    fn round_trip_nested_loops_and_operators() {
        round_trip(
            "package p.q\nMR M {{\n keepDialogsOpen = true;\n \
             for (Action action : Input(1).actions()) {\n  var pos = action.getPosition();\n  \
             for (var x = 0; x < action.parameters.size; x++) {\n   \
             IMPLIES(notTried(x + action.url) && !Output(Input(1), pos).hasAlert && \
             CREATE(Input(2), Input(1)), OR(Output(Input(2), pos).emptyFile, \
             !Output(Input(2), pos).hasAlert));\n  }\n }\n}}",
        );
    }

    #[test]
    fn round_trip_casts_news_and_precedence() {
        round_trip(
            "package p\nMR M {{\n var session = Output(Input(1), pos).session as CookieSession\n \
             var updated = session.setCookie(new Cookie(cookie.key, \
             String.valueOf(!Boolean.valueOf(cookie.value))))\n \
             var arith = 1 + 2 * 3 - (4 + 5) * 60 * 60 * 1000\n \
             IMPLIES(arith > 0 || arith <= 0 - 1, TRUE)\n}}",
        );
    }

    #[test]
    fn associativity_survives_reparse() {
        let src = "package p\nMR M {{ var a = 1 - 2 - 3\nTRUE }}";
        let file = parse_file(src).unwrap();
        let printed = print_file(&file);
        assert!(printed.contains("1 - 2 - 3"), "{printed}");
        assert_eq!(parse_file(&printed).unwrap(), file);
    }
}
