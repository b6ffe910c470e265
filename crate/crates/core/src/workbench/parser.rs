//! Lexer and recursive-descent parser for the toy language.
//!
//! ```text
//! program  := function+
//! function := "fn" IDENT "(" [IDENT ("," IDENT)*] ")" block
//! block    := "{" stmt* "}"
//! stmt     := IDENT "=" expr ";"
//!           | "if" "(" expr ")" block ["else" (block | if-stmt)]
//!           | "while" "(" expr ")" block
//!           | "return" [expr] ";"
//!           | "print" "(" expr ")" ";"
//!           | expr ";"
//! expr     := or ["?" expr ":" expr]
//! or       := and ("||" and)*
//! and      := eq ("&&" eq)*
//! eq       := rel (("==" | "!=") rel)*
//! rel      := add (("<" | "<=" | ">" | ">=") add)*
//! add      := mul (("+" | "-") mul)*
//! mul      := unary (("*" | "/" | "%") unary)*
//! unary    := ("-" | "!") unary | primary
//! primary  := INT | STRING | "true" | "false" | IDENT ["(" args ")"] | "(" expr ")"
//! ```
//!
//! Line comments start with `//`. Strings accept the escapes `\"`, `\\`,
//! `\n` and `\t`.

use super::ast::{BinOp, Expr, Function, Program, Stmt, StmtKind, UnOp};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at {line}:{column}: {message}")]
pub struct ParseError {
    pub line: u32,
    pub column: u32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Int(i64),
    Str(String),
    Ident(String),
    Fn,
    If,
    Else,
    While,
    Return,
    Print,
    True,
    False,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Question,
    Colon,
    Assign,
    Op(BinOp),
    Not,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: u32,
    column: u32,
}

fn lex(source: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let err = |line, column, message: String| ParseError {
        line,
        column,
        message,
    };

    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut u32| {
            *i += n;
            *col += n as u32;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i, &mut col);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let push = |out: &mut Vec<Token>, tok| {
            out.push(Token {
                tok,
                line: tl,
                column: tc,
            })
        };
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            col += (i - start) as u32;
            let v = text
                .parse::<i64>()
                .map_err(|_| err(tl, tc, format!("integer literal out of range: {text}")))?;
            push(&mut out, Tok::Int(v));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += (i - start) as u32;
            let tok = match word.as_str() {
                "fn" => Tok::Fn,
                "if" => Tok::If,
                "else" => Tok::Else,
                "while" => Tok::While,
                "return" => Tok::Return,
                "print" => Tok::Print,
                "true" => Tok::True,
                "false" => Tok::False,
                _ => Tok::Ident(word),
            };
            push(&mut out, tok);
            continue;
        }
        if c == '"' {
            let mut s = String::new();
            i += 1;
            col += 1;
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(err(tl, tc, "unterminated string".into())),
                    Some('"') => {
                        i += 1;
                        col += 1;
                        break;
                    }
                    Some('\\') => {
                        let esc = match chars.get(i + 1) {
                            Some('"') => '"',
                            Some('\\') => '\\',
                            Some('n') => '\n',
                            Some('t') => '\t',
                            _ => return Err(err(line, col, "invalid escape".into())),
                        };
                        s.push(esc);
                        i += 2;
                        col += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                        col += 1;
                    }
                }
            }
            push(&mut out, Tok::Str(s));
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let two_tok = match two.as_str() {
            "==" => Some(Tok::Op(BinOp::Eq)),
            "!=" => Some(Tok::Op(BinOp::Ne)),
            "<=" => Some(Tok::Op(BinOp::Le)),
            ">=" => Some(Tok::Op(BinOp::Ge)),
            "&&" => Some(Tok::Op(BinOp::And)),
            "||" => Some(Tok::Op(BinOp::Or)),
            _ => None,
        };
        if let Some(t) = two_tok {
            push(&mut out, t);
            advance(2, &mut i, &mut col);
            continue;
        }
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            ',' => Tok::Comma,
            ';' => Tok::Semi,
            '?' => Tok::Question,
            ':' => Tok::Colon,
            '=' => Tok::Assign,
            '!' => Tok::Not,
            '+' => Tok::Op(BinOp::Add),
            '-' => Tok::Op(BinOp::Sub),
            '*' => Tok::Op(BinOp::Mul),
            '/' => Tok::Op(BinOp::Div),
            '%' => Tok::Op(BinOp::Rem),
            '<' => Tok::Op(BinOp::Lt),
            '>' => Tok::Op(BinOp::Gt),
            other => return Err(err(tl, tc, format!("unexpected character {other:?}"))),
        };
        push(&mut out, tok);
        advance(1, &mut i, &mut col);
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    next_id: u32,
}

/// Parses toy-language source. Statement IDs are assigned in source order
/// starting at 1.
pub fn parse_program(source: &str) -> Result<Program, ParseError> {
    let mut p = Parser {
        tokens: lex(source)?,
        pos: 0,
        next_id: 1,
    };
    let mut functions = Vec::new();
    while p.peek() != &Tok::Eof {
        functions.push(p.function()?);
    }
    if functions.is_empty() {
        return Err(p.error("expected at least one function"));
    }
    for (i, f) in functions.iter().enumerate() {
        if functions[..i].iter().any(|g| g.name == f.name) {
            return Err(ParseError {
                line: f.line,
                column: 1,
                message: format!("duplicate function {}", f.name),
            });
        }
    }
    Ok(Program {
        functions,
        statement_count: p.next_id - 1,
    })
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn here(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if t != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        let t = self.here();
        ParseError {
            line: t.line,
            column: t.column,
            message: message.into(),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected {what}, found {:?}", self.peek())))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(name)
            }
            other => Err(self.error(format!("expected identifier, found {other:?}"))),
        }
    }

    fn alloc_id(&mut self) -> u32 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn function(&mut self) -> Result<Function, ParseError> {
        let line = self.here().line;
        self.expect(Tok::Fn, "`fn`")?;
        let id = self.alloc_id();
        let name = self.ident()?;
        self.expect(Tok::LParen, "`(`")?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                params.push(self.ident()?);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        let body = self.block()?;
        Ok(Function {
            id,
            line,
            name,
            params,
            body,
        })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut stmts = Vec::new();
        loop {
            match self.peek() {
                Tok::RBrace => {
                    self.bump();
                    return Ok(stmts);
                }
                Tok::Eof => return Err(self.error("unbalanced braces: expected `}`")),
                _ => stmts.push(self.stmt()?),
            }
        }
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let line = self.here().line;
        let id = self.alloc_id();
        let kind = match self.peek().clone() {
            Tok::If => return self.if_stmt(id, line),
            Tok::While => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let cond = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                let body = self.block()?;
                StmtKind::While { cond, body }
            }
            Tok::Return => {
                self.bump();
                let value = if *self.peek() == Tok::Semi {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Return(value)
            }
            Tok::Print => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Print(e)
            }
            Tok::Ident(name) if self.tokens[self.pos + 1].tok == Tok::Assign => {
                self.bump();
                self.bump();
                let value = self.expr()?;
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Assign { name, value }
            }
            _ => {
                let e = self.expr()?;
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Expr(e)
            }
        };
        Ok(Stmt { id, line, kind })
    }

    fn if_stmt(&mut self, id: u32, line: u32) -> Result<Stmt, ParseError> {
        self.expect(Tok::If, "`if`")?;
        self.expect(Tok::LParen, "`(`")?;
        let cond = self.expr()?;
        self.expect(Tok::RParen, "`)`")?;
        let then_block = self.block()?;
        let else_block = if *self.peek() == Tok::Else {
            self.bump();
            if *self.peek() == Tok::If {
                let nested_line = self.here().line;
                let nested_id = self.alloc_id();
                Some(vec![self.if_stmt(nested_id, nested_line)?])
            } else {
                Some(self.block()?)
            }
        } else {
            None
        };
        Ok(Stmt {
            id,
            line,
            kind: StmtKind::If {
                cond,
                then_block,
                else_block,
            },
        })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let cond = self.binary(1)?;
        if *self.peek() == Tok::Question {
            self.bump();
            let a = self.expr()?;
            self.expect(Tok::Colon, "`:`")?;
            let b = self.expr()?;
            return Ok(Expr::Cond(Box::new(cond), Box::new(a), Box::new(b)));
        }
        Ok(cond)
    }

    /// Precedence climbing over left-associative binary operators.
    fn binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Tok::Op(op) = *self.peek() {
            if op.precedence() < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(op.precedence() + 1)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Tok::Op(BinOp::Sub) => {
                self.bump();
                Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)))
            }
            Tok::Not => {
                self.bump();
                Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.bump() {
            Tok::Int(v) => Ok(Expr::Int(v)),
            Tok::Str(s) => Ok(Expr::Str(s)),
            Tok::True => Ok(Expr::Bool(true)),
            Tok::False => Ok(Expr::Bool(false)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if *self.peek() != Tok::LParen {
                    return Ok(Expr::Var(name));
                }
                self.bump();
                let mut args = Vec::new();
                if *self.peek() != Tok::RParen {
                    loop {
                        args.push(self.expr()?);
                        if *self.peek() == Tok::Comma {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::Call(name, args))
            }
            other => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.error(format!("expected expression, found {other:?}")))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_function_is_one_statement() {
        let p = parse_program("fn main() {}").unwrap();
        assert_eq!(p.statement_count(), 1);
        assert_eq!(p.entry().name, "main");
    }

    #[test]
    fn unbalanced_braces_rejected() {
        let e = parse_program("fn main() { x = 1;").unwrap_err();
        assert!(e.message.contains("unbalanced"), "{e}");
        assert!(parse_program("fn main() { x = 1; }}").is_err());
    }

    #[test]
    fn ids_follow_source_order() {
        let src = "fn f(a) {\n  if (a > 1) {\n    b = 2;\n  } else if (a < 0) {\n    b = 3;\n  } else {\n    b = 4;\n  }\n  return b;\n}\n";
        let p = parse_program(src).unwrap();
        assert_eq!(p.statement_count(), 7);
        let lines = p.statement_lines();
        assert_eq!(
            lines,
            vec![
                Some(1),
                Some(2),
                Some(3),
                Some(4),
                Some(5),
                Some(7),
                Some(9)
            ]
        );
    }

    #[test]
    fn precedence_and_ternary() {
        let p = parse_program("fn f() { x = 1 + 2 * 3 == 7 ? \"a\" : \"b\"; }").unwrap();
        let StmtKind::Assign { value, .. } = &p.entry().body[0].kind else {
            panic!()
        };
        let Expr::Cond(c, _, _) = value else { panic!() };
        assert!(matches!(**c, Expr::Binary(BinOp::Eq, _, _)));
    }

    #[test]
    fn error_positions() {
        let e = parse_program("fn f() {\n  x = ;\n}").unwrap_err();
        assert_eq!((e.line, e.column), (2, 7));
        let e = parse_program("fn f() { s = \"abc; }").unwrap_err();
        assert!(e.message.contains("unterminated"));
    }

    #[test]
    fn duplicate_functions_rejected() {
        assert!(parse_program("fn f() {} fn f() {}").is_err());
        assert!(parse_program("").is_err());
    }
}
