//! Textual formula language.
//!
//! ```text
//! formula := ('exists'|'forall') VAR '.' formula | 'atleast' '[' INT ']' VAR '.' formula | or
//! or      := and ('|' and)*
//! and     := unary ('&' unary)*
//! unary   := '!' unary | atom
//! atom    := '(' formula ')' | 'true' | 'false' | VAR '=' VAR | VAR '!=' VAR | PRED '(' VAR ')'
//!          | VAR '~' INT ':' INT VAR | 'loc' '[' INT ']' VAR '{' formula '}'
//! ```
//!
//! Variables may carry fresh-name suffixes (`x#1`); a `#` not glued to an identifier starts a
//! line comment. Predicate names may end in a bracketed tag such as `CC<P|11,12|ge2>`.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result, SourceSpan};
use crate::formula::Formula;

const RESERVED: [&str; 6] = ["exists", "forall", "atleast", "loc", "true", "false"];

fn is_tag_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == ',' || c == '|'
}

/// PRED lexical rule.
pub fn is_pred_name(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_uppercase() => {}
        _ => return false,
    }
    let rest: &str = chars.as_str();
    let (head, tag) = match rest.find('<') {
        Some(k) => (&rest[..k], Some(&rest[k..])),
        None => (rest, None),
    };
    if !head.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return false;
    }
    match tag {
        None => true,
        Some(t) => {
            t.len() >= 2
                && t.ends_with('>')
                && t[1..t.len() - 1].chars().all(is_tag_char)
        }
    }
}

/// VAR lexical rule, including `#k` suffixes; reserved words are rejected.
pub fn is_var_name(s: &str) -> bool {
    let mut parts = s.split('#');
    let head = parts.next().unwrap_or("");
    let mut chars = head.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {}
        _ => return false,
    }
    if !chars.all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return false;
    }
    if RESERVED.contains(&head) && !s.contains('#') {
        return false;
    }
    parts.all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_digit()))
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Var(String),
    Pred(String),
    Int(usize),
    Kw(&'static str),
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    span: SourceSpan,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut pos = 0;
    let mut line = 1;
    let mut line_start = 0;
    let span = |s: usize, e: usize, line: usize, ls: usize| SourceSpan {
        start: s,
        end: e,
        line,
        column: s - ls + 1,
    };
    while pos < bytes.len() {
        let c = bytes[pos] as char;
        if c == '\n' {
            pos += 1;
            line += 1;
            line_start = pos;
            continue;
        }
        if c.is_ascii_whitespace() {
            pos += 1;
            continue;
        }
        if c == '#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        if c.is_ascii_lowercase() {
            while pos < bytes.len() && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'_') {
                pos += 1;
            }
            while pos + 1 < bytes.len() && bytes[pos] == b'#' && bytes[pos + 1].is_ascii_digit() {
                pos += 1;
                while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                    pos += 1;
                }
            }
            let word = &text[start..pos];
            let tok = match RESERVED.iter().find(|k| **k == word) {
                Some(k) => Tok::Kw(k),
                None => Tok::Var(word.to_string()),
            };
            out.push(Token { tok, span: span(start, pos, line, line_start) });
            continue;
        }
        if c.is_ascii_uppercase() {
            while pos < bytes.len() && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'_') {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'<' {
                let mut q = pos + 1;
                while q < bytes.len() && is_tag_char(bytes[q] as char) {
                    q += 1;
                }
                if q >= bytes.len() || bytes[q] != b'>' {
                    return Err(Error::Syntax {
                        msg: "unterminated predicate tag".into(),
                        span: span(start, q.min(bytes.len()), line, line_start),
                    });
                }
                pos = q + 1;
            }
            out.push(Token {
                tok: Tok::Pred(text[start..pos].to_string()),
                span: span(start, pos, line, line_start),
            });
            continue;
        }
        if c.is_ascii_digit() {
            while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                pos += 1;
            }
            let n: usize = text[start..pos].parse().map_err(|_| Error::Syntax {
                msg: "integer too large".into(),
                span: span(start, pos, line, line_start),
            })?;
            out.push(Token { tok: Tok::Int(n), span: span(start, pos, line, line_start) });
            continue;
        }
        let two = if pos + 1 < bytes.len() { &text[pos..pos + 2] } else { "" };
        let sym: &'static str = if two == "!=" {
            "!="
        } else {
            match c {
                '(' => "(",
                ')' => ")",
                '{' => "{",
                '}' => "}",
                '[' => "[",
                ']' => "]",
                '.' => ".",
                '|' => "|",
                '&' => "&",
                '!' => "!",
                '=' => "=",
                '~' => "~",
                ':' => ":",
                _ => {
                    let ch = text[pos..].chars().next().unwrap_or(c);
                    let w = ch.len_utf8();
                    return Err(Error::Syntax {
                        msg: format!("unexpected character `{ch}`"),
                        span: span(pos, pos + w, line, line_start),
                    });
                }
            }
        };
        pos += sym.len();
        out.push(Token { tok: Tok::Sym(sym), span: span(start, pos, line, line_start) });
    }
    out.push(Token {
        tok: Tok::Eof,
        span: span(bytes.len(), bytes.len(), line, line_start),
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn err<T>(&self, msg: String) -> Result<T> {
        Err(Error::Syntax { msg, span: self.toks[self.pos].span })
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, sym: &'static str) -> Result<()> {
        if *self.peek() == Tok::Sym(sym) {
            self.next();
            Ok(())
        } else {
            self.err(format!("expected `{sym}`, found {}", describe(self.peek())))
        }
    }

    fn var(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Var(v) => {
                self.next();
                Ok(v)
            }
            Tok::Kw(k) => self.err(format!("reserved word `{k}` used as a variable")),
            t => self.err(format!("expected a variable, found {}", describe(&t))),
        }
    }

    fn int(&mut self) -> Result<usize> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.next();
                Ok(n)
            }
            t => self.err(format!("expected an integer, found {}", describe(&t))),
        }
    }

    fn formula(&mut self) -> Result<Formula> {
        match self.peek().clone() {
            Tok::Kw(k @ ("exists" | "forall")) => {
                self.next();
                let x = self.var()?;
                self.expect(".")?;
                let body = self.formula()?;
                Ok(if k == "exists" {
                    Formula::Exists(x, Box::new(body))
                } else {
                    Formula::Forall(x, Box::new(body))
                })
            }
            Tok::Kw("atleast") => {
                self.next();
                self.expect("[")?;
                let k = self.int()?;
                if k == 0 {
                    self.pos -= 1;
                    return self.err("atleast needs k >= 1".into());
                }
                self.expect("]")?;
                let y = self.var()?;
                self.expect(".")?;
                let body = self.formula()?;
                Ok(Formula::AtLeast(k, y, Box::new(body)))
            }
            _ => self.or(),
        }
    }

    fn or(&mut self) -> Result<Formula> {
        let mut items = alloc::vec![self.and()?];
        while *self.peek() == Tok::Sym("|") {
            self.next();
            items.push(self.and()?);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { Formula::Or(items) })
    }

    fn and(&mut self) -> Result<Formula> {
        let mut items = alloc::vec![self.unary()?];
        while *self.peek() == Tok::Sym("&") {
            self.next();
            items.push(self.unary()?);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { Formula::And(items) })
    }

    fn unary(&mut self) -> Result<Formula> {
        if *self.peek() == Tok::Sym("!") {
            self.next();
            return Ok(Formula::Not(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Formula> {
        match self.peek().clone() {
            Tok::Sym("(") => {
                self.next();
                let f = self.formula()?;
                self.expect(")")?;
                Ok(f)
            }
            Tok::Kw("true") => {
                self.next();
                Ok(Formula::Const(true))
            }
            Tok::Kw("false") => {
                self.next();
                Ok(Formula::Const(false))
            }
            Tok::Kw("loc") => {
                self.next();
                self.expect("[")?;
                let r = self.int()?;
                self.expect("]")?;
                let x = self.var()?;
                self.expect("{")?;
                let body = self.formula()?;
                self.expect("}")?;
                Ok(Formula::Local(x, r, Box::new(body)))
            }
            Tok::Pred(p) => {
                self.next();
                self.expect("(")?;
                let x = self.var()?;
                self.expect(")")?;
                Ok(Formula::Pred(p, x))
            }
            Tok::Var(_) => {
                let x = self.var()?;
                match self.peek().clone() {
                    Tok::Sym("=") => {
                        self.next();
                        let y = self.var()?;
                        Ok(Formula::Eq(x, y))
                    }
                    Tok::Sym("!=") => {
                        self.next();
                        let y = self.var()?;
                        Ok(Formula::Not(Box::new(Formula::Eq(x, y))))
                    }
                    Tok::Sym("~") => {
                        self.next();
                        let i = self.int()?;
                        self.expect(":")?;
                        let j = self.int()?;
                        let y = self.var()?;
                        Ok(Formula::Rel(i, j, x, y))
                    }
                    t => self.err(format!("expected `=`, `!=` or `~` after variable, found {}", describe(&t))),
                }
            }
            Tok::Kw(k @ ("exists" | "forall" | "atleast")) => self.err(format!(
                "quantifier `{k}` must be parenthesised inside a connective"
            )),
            t => self.err(format!("expected a formula, found {}", describe(&t))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Var(v) => format!("variable `{v}`"),
        Tok::Pred(p) => format!("predicate `{p}`"),
        Tok::Int(n) => format!("integer `{n}`"),
        Tok::Kw(k) => format!("keyword `{k}`"),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::Eof => "end of input".to_string(),
    }
}

pub fn parse_formula(text: &str) -> Result<Formula> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let f = p.formula()?;
    if *p.peek() != Tok::Eof {
        return p.err(format!("unexpected {} after formula", describe(p.peek())));
    }
    Ok(f)
}

/// Prints with minimal parentheses; `parse_formula(&print_formula(f)) == f`.
pub fn print_formula(f: &Formula) -> String {
    let mut out = String::new();
    pr_formula(f, &mut out);
    out
}

fn is_quant(f: &Formula) -> bool {
    matches!(f, Formula::Exists(..) | Formula::Forall(..) | Formula::AtLeast(..))
}

fn pr_formula(f: &Formula, out: &mut String) {
    match f {
        Formula::Exists(x, g) => {
            out.push_str("exists ");
            out.push_str(x);
            out.push_str(". ");
            pr_formula(g, out);
        }
        Formula::Forall(x, g) => {
            out.push_str("forall ");
            out.push_str(x);
            out.push_str(". ");
            pr_formula(g, out);
        }
        Formula::AtLeast(k, y, g) => {
            out.push_str(&format!("atleast[{k}] {y}. "));
            pr_formula(g, out);
        }
        _ => pr_or(f, out),
    }
}

fn pr_or(f: &Formula, out: &mut String) {
    match f {
        Formula::Or(gs) => {
            for (k, g) in gs.iter().enumerate() {
                if k > 0 {
                    out.push_str(" | ");
                }
                if matches!(g, Formula::Or(_)) || is_quant(g) {
                    paren(g, out);
                } else {
                    pr_and(g, out);
                }
            }
        }
        _ => pr_and(f, out),
    }
}

fn pr_and(f: &Formula, out: &mut String) {
    match f {
        Formula::And(gs) => {
            for (k, g) in gs.iter().enumerate() {
                if k > 0 {
                    out.push_str(" & ");
                }
                if matches!(g, Formula::And(_) | Formula::Or(_)) || is_quant(g) {
                    paren(g, out);
                } else {
                    pr_unary(g, out);
                }
            }
        }
        _ => pr_unary(f, out),
    }
}

fn pr_unary(f: &Formula, out: &mut String) {
    match f {
        Formula::Not(g) => match &**g {
            Formula::Eq(x, y) => {
                out.push_str(x);
                out.push_str(" != ");
                out.push_str(y);
            }
            Formula::And(_) | Formula::Or(_) => {
                out.push('!');
                paren(g, out);
            }
            g2 if is_quant(g2) => {
                out.push('!');
                paren(g2, out);
            }
            _ => {
                out.push('!');
                pr_unary(g, out);
            }
        },
        _ => pr_atom(f, out),
    }
}

fn paren(f: &Formula, out: &mut String) {
    out.push('(');
    pr_formula(f, out);
    out.push(')');
}

fn pr_atom(f: &Formula, out: &mut String) {
    match f {
        Formula::Const(true) => out.push_str("true"),
        Formula::Const(false) => out.push_str("false"),
        Formula::Pred(p, x) => {
            out.push_str(p);
            out.push('(');
            out.push_str(x);
            out.push(')');
        }
        Formula::Rel(i, j, x, y) => out.push_str(&format!("{x} ~{i}:{j} {y}")),
        Formula::Eq(x, y) => {
            out.push_str(x);
            out.push_str(" = ");
            out.push_str(y);
        }
        Formula::Local(x, r, g) => {
            out.push_str(&format!("loc[{r}] {x} {{ "));
            pr_formula(g, out);
            out.push_str(" }");
        }
        _ => paren(f, out),
    }
}
