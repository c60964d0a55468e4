//! Tokenizer for the relation language. Whitespace-insensitive; `//` and
//! `/* */` comments are skipped.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    // punctuation
    LBrace,
    RBrace,
    LParen,
    RParen,
    Semi,
    Colon,
    Comma,
    Dot,
    Assign,
    Bang,
    Plus,
    Minus,
    Star,
    Lt,
    Gt,
    Le,
    Ge,
    EqEq,
    NotEq,
    AndAnd,
    OrOr,
    PlusPlus,
    MinusMinus,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Int(n) => write!(f, "integer {n}"),
            Tok::Str(_) => write!(f, "string literal"),
            Tok::LBrace => write!(f, "`{{`"),
            Tok::RBrace => write!(f, "`}}`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::Semi => write!(f, "`;`"),
            Tok::Colon => write!(f, "`:`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Dot => write!(f, "`.`"),
            Tok::Assign => write!(f, "`=`"),
            Tok::Bang => write!(f, "`!`"),
            Tok::Plus => write!(f, "`+`"),
            Tok::Minus => write!(f, "`-`"),
            Tok::Star => write!(f, "`*`"),
            Tok::Lt => write!(f, "`<`"),
            Tok::Gt => write!(f, "`>`"),
            Tok::Le => write!(f, "`<=`"),
            Tok::Ge => write!(f, "`>=`"),
            Tok::EqEq => write!(f, "`==`"),
            Tok::NotEq => write!(f, "`!=`"),
            Tok::AndAnd => write!(f, "`&&`"),
            Tok::OrOr => write!(f, "`||`"),
            Tok::PlusPlus => write!(f, "`++`"),
            Tok::MinusMinus => write!(f, "`--`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("{pos}: {message}")]
pub struct LexError {
    pub pos: Pos,
    pub message: String,
}

pub fn lex(source: &str) -> Result<Vec<Token>, LexError> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = source.chars().collect();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;

    macro_rules! push {
        ($tok:expr, $pos:expr) => {
            tokens.push(Token { tok: $tok, pos: $pos })
        };
    }

    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };

        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => advance(1, &mut i, &mut col),
            '/' if chars.get(i + 1) == Some(&'/') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '/' if chars.get(i + 1) == Some(&'*') => {
                i += 2;
                col += 2;
                loop {
                    if i >= chars.len() {
                        return Err(LexError {
                            pos,
                            message: "unterminated block comment".to_string(),
                        });
                    }
                    if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                        i += 2;
                        col += 2;
                        break;
                    }
                    if chars[i] == '\n' {
                        line += 1;
                        col = 1;
                    } else {
                        col += 1;
                    }
                    i += 1;
                }
            }
            '"' | '\'' => {
                let quote = c;
                i += 1;
                col += 1;
                let mut s = String::new();
                loop {
                    match chars.get(i) {
                        None | Some('\n') => {
                            return Err(LexError {
                                pos,
                                message: "unterminated string literal".to_string(),
                            })
                        }
                        Some(&ch) if ch == quote => {
                            i += 1;
                            col += 1;
                            break;
                        }
                        Some('\\') => {
                            let esc = chars.get(i + 1).copied().ok_or(LexError {
                                pos,
                                message: "dangling escape".to_string(),
                            })?;
                            let translated = match esc {
                                'n' => Some('\n'),
                                't' => Some('\t'),
                                'r' => Some('\r'),
                                '0' => Some('\0'),
                                '\\' | '"' | '\'' => Some(esc),
                                'u' => None,
                                other => {
                                    return Err(LexError {
                                        pos,
                                        message: format!("unknown escape \\{other}"),
                                    })
                                }
                            };
                            match translated {
                                Some(ch) => {
                                    s.push(ch);
                                    i += 2;
                                    col += 2;
                                }
                                None => {
                                    // \uXXXX
                                    let hex: String =
                                        chars.get(i + 2..i + 6).unwrap_or(&[]).iter().collect();
                                    let code =
                                        u32::from_str_radix(&hex, 16).map_err(|_| LexError {
                                            pos,
                                            message: format!("bad unicode escape \\u{hex}"),
                                        })?;
                                    s.push(char::from_u32(code).ok_or(LexError {
                                        pos,
                                        message: format!("invalid code point \\u{hex}"),
                                    })?);
                                    i += 6;
                                    col += 6;
                                }
                            }
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                            col += 1;
                        }
                    }
                }
                push!(Tok::Str(s), pos);
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                    col += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let value = text.parse().map_err(|_| LexError {
                    pos,
                    message: format!("integer literal {text} out of range"),
                })?;
                push!(Tok::Int(value), pos);
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                    col += 1;
                }
                push!(Tok::Ident(chars[start..i].iter().collect()), pos);
            }
            _ => {
                let two: String = chars[i..chars.len().min(i + 2)].iter().collect();
                let tok = match two.as_str() {
                    "==" => Some(Tok::EqEq),
                    "!=" => Some(Tok::NotEq),
                    "<=" => Some(Tok::Le),
                    ">=" => Some(Tok::Ge),
                    "&&" => Some(Tok::AndAnd),
                    "||" => Some(Tok::OrOr),
                    "++" => Some(Tok::PlusPlus),
                    "--" => Some(Tok::MinusMinus),
                    _ => None,
                };
                if let Some(tok) = tok {
                    push!(tok, pos);
                    advance(2, &mut i, &mut col);
                    continue;
                }
                let tok = match c {
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ';' => Tok::Semi,
                    ':' => Tok::Colon,
                    ',' => Tok::Comma,
                    '.' => Tok::Dot,
                    '=' => Tok::Assign,
                    '!' => Tok::Bang,
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '<' => Tok::Lt,
                    '>' => Tok::Gt,
                    other => {
                        return Err(LexError {
                            pos,
                            message: format!("unexpected character `{other}`"),
                        })
                    }
                };
                push!(tok, pos);
                advance(1, &mut i, &mut col);
            }
        }
    }

    tokens.push(Token {
        tok: Tok::Eof,
        pos: Pos { line, col },
    });
    Ok(tokens)
}
