use std::fmt;

use crate::rational::Rational;

use super::{Pos, SyntaxError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Number(Rational),
    // keywords
    Nothing,
    Emit,
    Pause,
    Abort,
    Suspend,
    Immediate,
    If,
    Else,
    Input,
    Output,
    Signal,
    Cont,
    Do,
    Until,
    Loop,
    True,
    False,
    Ttl,
    Param,
    TyRatio,
    TyInteger,
    TyBoolean,
    OpPlus,
    OpTimes,
    // punctuation
    Semi,
    Comma,
    Colon,
    Question,
    Prime,
    Assign,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    OrOr,
    AndAnd,
    Bang,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(name) => return write!(f, "identifier `{name}`"),
            Tok::Number(n) => return write!(f, "number `{n}`"),
            Tok::Nothing => "`nothing`",
            Tok::Emit => "`emit`",
            Tok::Pause => "`pause`",
            Tok::Abort => "`abort`",
            Tok::Suspend => "`suspend`",
            Tok::Immediate => "`immediate`",
            Tok::If => "`if`",
            Tok::Else => "`else`",
            Tok::Input => "`input`",
            Tok::Output => "`output`",
            Tok::Signal => "`signal`",
            Tok::Cont => "`cont`",
            Tok::Do => "`do`",
            Tok::Until => "`until`",
            Tok::Loop => "`loop`",
            Tok::True => "`true`",
            Tok::False => "`false`",
            Tok::Ttl => "`TTL`",
            Tok::Param => "`param`",
            Tok::TyRatio => "`ratio`",
            Tok::TyInteger => "`integer`",
            Tok::TyBoolean => "`boolean`",
            Tok::OpPlus => "`op+`",
            Tok::OpTimes => "`op*`",
            Tok::Semi => "`;`",
            Tok::Comma => "`,`",
            Tok::Colon => "`:`",
            Tok::Question => "`?`",
            Tok::Prime => "`'`",
            Tok::Assign => "`=`",
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::LBrace => "`{`",
            Tok::RBrace => "`}`",
            Tok::LBracket => "`[`",
            Tok::RBracket => "`]`",
            Tok::OrOr => "`||`",
            Tok::AndAnd => "`&&`",
            Tok::Bang => "`!`",
            Tok::EqEq => "`==`",
            Tok::NotEq => "`!=`",
            Tok::Lt => "`<`",
            Tok::Le => "`<=`",
            Tok::Gt => "`>`",
            Tok::Ge => "`>=`",
            Tok::Plus => "`+`",
            Tok::Minus => "`-`",
            Tok::Star => "`*`",
            Tok::Eof => "end of input",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

fn keyword(word: &str) -> Option<Tok> {
    Some(match word {
        "nothing" => Tok::Nothing,
        "emit" => Tok::Emit,
        "pause" => Tok::Pause,
        "abort" => Tok::Abort,
        "suspend" => Tok::Suspend,
        "immediate" => Tok::Immediate,
        "if" => Tok::If,
        "else" => Tok::Else,
        "input" => Tok::Input,
        "output" => Tok::Output,
        "signal" => Tok::Signal,
        "cont" => Tok::Cont,
        "do" => Tok::Do,
        "until" => Tok::Until,
        "loop" => Tok::Loop,
        "true" => Tok::True,
        "false" => Tok::False,
        "TTL" => Tok::Ttl,
        "param" => Tok::Param,
        "ratio" => Tok::TyRatio,
        "integer" | "int" => Tok::TyInteger,
        "boolean" | "bool" => Tok::TyBoolean,
        _ => return None,
    })
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    col: u32,
}

impl Cursor<'_> {
    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            col: self.col,
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_ident_continue(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

/// Splits source text into tokens. Identifiers may carry a `#n` suffix,
/// which only the rewriter generates; it keeps fresh names disjoint from
/// anything a user can write without it.
pub fn lex(source: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut cur = Cursor {
        chars: source.chars().peekable(),
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        // whitespace and comments
        loop {
            match cur.peek() {
                Some(c) if c.is_whitespace() => {
                    cur.bump();
                }
                Some('/') => {
                    let start = cur.pos();
                    let mut look = cur.chars.clone();
                    look.next();
                    match look.next() {
                        Some('/') => {
                            while let Some(c) = cur.bump() {
                                if c == '\n' {
                                    break;
                                }
                            }
                        }
                        Some('*') => {
                            cur.bump();
                            cur.bump();
                            let mut closed = false;
                            while let Some(c) = cur.bump() {
                                if c == '*' && cur.eat('/') {
                                    closed = true;
                                    break;
                                }
                            }
                            if !closed {
                                return Err(SyntaxError::Lex {
                                    pos: start,
                                    msg: "unterminated block comment".into(),
                                });
                            }
                        }
                        _ => break,
                    }
                }
                _ => break,
            }
        }
        let pos = cur.pos();
        let Some(c) = cur.bump() else {
            out.push(Token { tok: Tok::Eof, pos });
            return Ok(out);
        };
        let tok = match c {
            ';' => Tok::Semi,
            ',' => Tok::Comma,
            ':' => Tok::Colon,
            '?' => Tok::Question,
            '\'' => Tok::Prime,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '=' => {
                if cur.eat('=') {
                    Tok::EqEq
                } else {
                    Tok::Assign
                }
            }
            '!' => {
                if cur.eat('=') {
                    Tok::NotEq
                } else {
                    Tok::Bang
                }
            }
            '<' => {
                if cur.eat('=') {
                    Tok::Le
                } else {
                    Tok::Lt
                }
            }
            '>' => {
                if cur.eat('=') {
                    Tok::Ge
                } else {
                    Tok::Gt
                }
            }
            '|' => {
                if cur.eat('|') {
                    Tok::OrOr
                } else {
                    return Err(SyntaxError::Lex {
                        pos,
                        msg: "expected `||`".into(),
                    });
                }
            }
            '&' => {
                if cur.eat('&') {
                    Tok::AndAnd
                } else {
                    return Err(SyntaxError::Lex {
                        pos,
                        msg: "expected `&&`".into(),
                    });
                }
            }
            c if c.is_ascii_digit() => lex_number(&mut cur, c, pos)?,
            c if is_ident_start(c) => {
                let mut word = String::from(c);
                while let Some(c) = cur.peek() {
                    if is_ident_continue(c) {
                        word.push(c);
                        cur.bump();
                    } else {
                        break;
                    }
                }
                if word == "op" {
                    if cur.eat('+') {
                        Tok::OpPlus
                    } else if cur.eat('*') {
                        Tok::OpTimes
                    } else {
                        return Err(SyntaxError::Lex {
                            pos,
                            msg: "expected `op+` or `op*`".into(),
                        });
                    }
                } else if let Some(kw) = keyword(&word) {
                    kw
                } else {
                    if cur.peek() == Some('#') {
                        cur.bump();
                        word.push('#');
                        let mut digits = 0;
                        while let Some(d) = cur.peek().filter(char::is_ascii_digit) {
                            word.push(d);
                            cur.bump();
                            digits += 1;
                        }
                        if digits == 0 {
                            return Err(SyntaxError::Lex {
                                pos,
                                msg: "expected digits after `#`".into(),
                            });
                        }
                    }
                    Tok::Ident(word)
                }
            }
            other => {
                return Err(SyntaxError::Lex {
                    pos,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        };
        out.push(Token { tok, pos });
    }
}

/// Integers, exact decimals (`1.25`) and fractions written without spaces (`3/4`).
fn lex_number(cur: &mut Cursor<'_>, first: char, pos: Pos) -> Result<Tok, SyntaxError> {
    let mut text = String::from(first);
    while let Some(d) = cur.peek().filter(char::is_ascii_digit) {
        text.push(d);
        cur.bump();
    }
    let mut look = cur.chars.clone();
    match (look.next(), look.next()) {
        (Some('.'), Some(d)) if d.is_ascii_digit() => {
            cur.bump();
            text.push('.');
            while let Some(d) = cur.peek().filter(char::is_ascii_digit) {
                text.push(d);
                cur.bump();
            }
        }
        (Some('/'), Some(d)) if d.is_ascii_digit() => {
            cur.bump();
            text.push('/');
            while let Some(d) = cur.peek().filter(char::is_ascii_digit) {
                text.push(d);
                cur.bump();
            }
        }
        _ => {}
    }
    text.parse::<Rational>()
        .map(Tok::Number)
        .map_err(|e| SyntaxError::Lex {
            pos,
            msg: e.to_string(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        lex(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn lexes_flow_action() {
        assert_eq!(
            toks("do {a' = 1/2} until (a <= 2)"),
            vec![
                Tok::Do,
                Tok::LBrace,
                Tok::Ident("a".into()),
                Tok::Prime,
                Tok::Assign,
                Tok::Number(Rational::new(1, 2)),
                Tok::RBrace,
                Tok::Until,
                Tok::LParen,
                Tok::Ident("a".into()),
                Tok::Le,
                Tok::Number(Rational::from(2)),
                Tok::RParen,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn combine_ops_and_comments() {
        assert_eq!(
            toks("cont a op+ = 1; // note\n/* block */ op*"),
            vec![
                Tok::Cont,
                Tok::Ident("a".into()),
                Tok::OpPlus,
                Tok::Assign,
                Tok::Number(Rational::one()),
                Tok::Semi,
                Tok::OpTimes,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn generated_suffix_and_positions() {
        let t = lex("emit\n  R#3").unwrap();
        assert_eq!(t[1].tok, Tok::Ident("R#3".into()));
        assert_eq!(t[1].pos, Pos { line: 2, col: 3 });
        assert!(lex("R#").is_err());
        assert!(lex("a | b").is_err());
        assert!(lex("a $ b").is_err());
    }
}
