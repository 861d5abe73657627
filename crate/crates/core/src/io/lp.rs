//! Plain-text LP subset.
//!
//! ```text
//! // comment
//! max: 3 x + 2 y - z;
//! subject to
//! c1: x + y <= 1;
//! -x + 2.5 z >= -1;
//! c3: x + 1/3 y + z = 1;
//! bin x y z;
//! ```
//!
//! Statements end with `;` (the last may omit it). A term is an optional
//! sign, an optional coefficient (decimal or `p/q`), an optional `*` and a
//! variable name. Unnamed rows are called `r1`, `r2`, … . Variables are
//! numbered in order of first appearance. Without a declaration section
//! every variable is binary; once any `bin`/`int` section appears, each
//! variable must be declared `bin`.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{canonicalize, BlpInstance, RawInstance, RawRow, RowSense, Sense, VarType};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Colon,
    Semi,
    Plus,
    Minus,
    Star,
    Slash,
    Le,
    Ge,
    Eq,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn perr(line: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        col,
        msg: msg.into(),
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '[' | ']')
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let at = |k: usize| chars.get(k).copied();
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && at(i + 1) == Some('/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        let start = i;
        let tok = if is_ident_start(c) {
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else if c.is_ascii_digit() || (c == '.' && at(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            while at(i).is_some_and(|d| d.is_ascii_digit()) {
                i += 1;
            }
            if at(i) == Some('.') {
                i += 1;
                while at(i).is_some_and(|d| d.is_ascii_digit()) {
                    i += 1;
                }
            }
            if matches!(at(i), Some('e' | 'E')) {
                let mut k = i + 1;
                if matches!(at(k), Some('+' | '-')) {
                    k += 1;
                }
                if at(k).is_some_and(|d| d.is_ascii_digit()) {
                    i = k;
                    while at(i).is_some_and(|d| d.is_ascii_digit()) {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| perr(start_line, start_col, format!("bad number `{s}`")))?;
            Tok::Num(v)
        } else {
            let two = (c, at(i + 1));
            let (tok, len) = match two {
                ('<', Some('=')) | ('=', Some('<')) => (Tok::Le, 2),
                ('>', Some('=')) | ('=', Some('>')) => (Tok::Ge, 2),
                ('<', _) => (Tok::Le, 1),
                ('>', _) => (Tok::Ge, 1),
                ('=', _) => (Tok::Eq, 1),
                (':', _) => (Tok::Colon, 1),
                (';', _) => (Tok::Semi, 1),
                ('+', _) => (Tok::Plus, 1),
                ('-', _) => (Tok::Minus, 1),
                ('*', _) => (Tok::Star, 1),
                ('/', _) => (Tok::Slash, 1),
                _ => return Err(perr(line, col, format!("unexpected character `{c}`"))),
            };
            i += len;
            tok
        };
        col += i - start;
        out.push(Token {
            tok,
            line: start_line,
            col: start_col,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

const OBJECTIVE_KEYWORDS: [(&str, Sense); 6] = [
    ("min", Sense::Minimize),
    ("minimize", Sense::Minimize),
    ("minimise", Sense::Minimize),
    ("max", Sense::Maximize),
    ("maximize", Sense::Maximize),
    ("maximise", Sense::Maximize),
];

fn declaration_type(word: &str) -> Option<VarType> {
    match word {
        "bin" | "binary" => Some(VarType::Binary),
        "int" | "integer" | "general" => Some(VarType::Integer),
        _ => None,
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    names: Vec<String>,
    index: HashMap<String, usize>,
    /// First use of each variable, for error locations.
    first_use: Vec<(usize, usize)>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].tok
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn var(&mut self, name: &str, line: usize, col: usize) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        self.first_use.push((line, col));
        i
    }

    /// Optional sign followed by a number, optionally `p/q`.
    fn number(&mut self) -> Result<Option<f64>> {
        let Tok::Num(v) = self.peek().tok else {
            return Ok(None);
        };
        self.next();
        if self.peek().tok == Tok::Slash {
            self.next();
            let t = self.next();
            let Tok::Num(d) = t.tok else {
                return Err(perr(t.line, t.col, "expected a denominator after `/`"));
            };
            if d == 0.0 {
                return Err(perr(t.line, t.col, "zero denominator"));
            }
            return Ok(Some(v / d));
        }
        Ok(Some(v))
    }

    fn expect_end(&mut self) -> Result<()> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Semi => {
                self.next();
                Ok(())
            }
            Tok::Eof => Ok(()),
            _ => Err(perr(t.line, t.col, "expected `;`")),
        }
    }

    /// Linear expression up to (not including) a sense token or `;`.
    fn expr(&mut self) -> Result<Vec<(usize, f64)>> {
        let mut terms = Vec::new();
        let mut first = true;
        loop {
            let t = self.peek().clone();
            let mut sign = 1.0;
            match t.tok {
                Tok::Plus => {
                    self.next();
                }
                Tok::Minus => {
                    self.next();
                    sign = -1.0;
                }
                _ if first => {}
                _ => return Ok(terms),
            }
            first = false;
            loop {
                match self.peek().tok {
                    Tok::Plus => {}
                    Tok::Minus => sign = -sign,
                    _ => break,
                }
                self.next();
            }
            let term_start = self.peek().clone();
            if !matches!(term_start.tok, Tok::Num(_) | Tok::Ident(_)) {
                if sign == 1.0 && t.tok != Tok::Plus {
                    return Ok(terms);
                }
                return Err(perr(term_start.line, term_start.col, "expected a term"));
            }
            let coef = self.number()?;
            if coef.is_some() && self.peek().tok == Tok::Star {
                self.next();
            }
            let v = self.peek().clone();
            match v.tok {
                Tok::Ident(name) => {
                    self.next();
                    let i = self.var(&name, v.line, v.col);
                    terms.push((i, sign * coef.unwrap_or(1.0)));
                }
                _ => {
                    return Err(perr(
                        term_start.line,
                        term_start.col,
                        "constant terms are not supported; expected a variable",
                    ))
                }
            }
        }
    }

    fn sense(&mut self) -> Result<RowSense> {
        let t = self.next();
        match t.tok {
            Tok::Le => Ok(RowSense::Le),
            Tok::Ge => Ok(RowSense::Ge),
            Tok::Eq => Ok(RowSense::Eq),
            _ => Err(perr(t.line, t.col, "expected `<=`, `>=` or `=`")),
        }
    }

    fn rhs(&mut self) -> Result<f64> {
        let t = self.peek().clone();
        let sign = match t.tok {
            Tok::Minus => {
                self.next();
                -1.0
            }
            Tok::Plus => {
                self.next();
                1.0
            }
            _ => 1.0,
        };
        let at = self.peek().clone();
        match self.number()? {
            Some(v) => Ok(sign * v),
            None => Err(perr(at.line, at.col, "expected a numeric right-hand side")),
        }
    }
}

/// Parses LP text into a raw (uncanonicalized) instance.
pub fn parse_lp(text: &str) -> Result<RawInstance> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        names: Vec::new(),
        index: HashMap::new(),
        first_use: Vec::new(),
    };
    let mut sense = None;
    let mut objective: Vec<(usize, f64)> = Vec::new();
    let mut rows: Vec<RawRow> = Vec::new();
    let mut row_names: HashSet<String> = HashSet::new();
    let mut declared: HashMap<String, VarType> = HashMap::new();
    let mut any_declaration = false;

    loop {
        let t = p.peek().clone();
        match &t.tok {
            Tok::Eof => break,
            Tok::Semi => {
                p.next();
                continue;
            }
            Tok::Ident(word) => {
                let lower = word.to_ascii_lowercase();
                let next = p.peek2().clone();
                if next == Tok::Colon {
                    if let Some(&(_, s)) = OBJECTIVE_KEYWORDS.iter().find(|(k, _)| *k == lower) {
                        if sense.is_some() {
                            return Err(perr(t.line, t.col, "duplicate objective"));
                        }
                        p.next();
                        p.next();
                        sense = Some(s);
                        objective = p.expr()?;
                        p.expect_end()?;
                        continue;
                    }
                }
                let header = match (lower.as_str(), &next) {
                    ("subject", Tok::Ident(w)) if w.eq_ignore_ascii_case("to") => true,
                    ("such", Tok::Ident(w)) if w.eq_ignore_ascii_case("that") => true,
                    _ => false,
                };
                if header {
                    p.next();
                    p.next();
                    if p.peek().tok == Tok::Colon {
                        p.next();
                    }
                    continue;
                }
                if let Some(ty) = declaration_type(&lower) {
                    if matches!(next, Tok::Ident(_) | Tok::Semi | Tok::Eof) {
                        p.next();
                        any_declaration = true;
                        while let Tok::Ident(name) = p.peek().tok.clone() {
                            let v = p.next();
                            p.var(&name, v.line, v.col);
                            if declared
                                .insert(name.clone(), ty)
                                .is_some_and(|old| old != ty)
                            {
                                return Err(perr(
                                    v.line,
                                    v.col,
                                    format!("`{name}` declared twice"),
                                ));
                            }
                        }
                        p.expect_end()?;
                        continue;
                    }
                }
            }
            _ => {}
        }
        // constraint
        let mut name = None;
        if let (Tok::Ident(n), Tok::Colon) = (&t.tok, p.peek2()) {
            name = Some(n.clone());
            p.next();
            p.next();
        }
        let terms = p.expr()?;
        if terms.is_empty() {
            let at = p.peek();
            return Err(perr(at.line, at.col, "expected a linear expression"));
        }
        let row_sense = p.sense()?;
        let rhs = p.rhs()?;
        p.expect_end()?;
        let name = name.unwrap_or_else(|| format!("r{}", rows.len() + 1));
        if !row_names.insert(name.clone()) {
            return Err(perr(
                t.line,
                t.col,
                format!("duplicate constraint name `{name}`"),
            ));
        }
        rows.push(RawRow {
            name,
            terms,
            sense: row_sense,
            rhs,
        });
    }

    let Some(sense) = sense else {
        return Err(perr(1, 1, "missing objective (`min:` or `max:`)"));
    };
    let n = p.names.len();
    let mut obj: Vec<Option<f64>> = vec![None; n];
    for (i, c) in objective {
        // keep the sign of a lone zero coefficient
        obj[i] = Some(obj[i].map_or(c, |o| o + c));
    }
    let obj: Vec<f64> = obj.into_iter().map(|c| c.unwrap_or(0.0)).collect();
    let mut var_types = Vec::with_capacity(n);
    for name in &p.names {
        let ty = if any_declaration {
            declared.get(name).copied().unwrap_or(VarType::Continuous)
        } else {
            VarType::Binary
        };
        if ty != VarType::Binary {
            return Err(Error::UnsupportedVariableType { name: name.clone() });
        }
        var_types.push(ty);
    }
    Ok(RawInstance {
        sense,
        var_names: p.names,
        var_types,
        objective: obj,
        rows,
    })
}

/// `parse_lp` followed by canonicalization.
pub fn read_lp(text: &str) -> Result<BlpInstance> {
    canonicalize(&parse_lp(text)?)
}

fn term(out: &mut String, coef: f64, name: &str) {
    let _ = write!(out, " {coef:+.16e} {name}");
}

/// Canonical text: a `min:` objective listing every variable in index
/// order, one `<=` row per constraint, and a `bin` section.
pub fn write_lp(inst: &BlpInstance) -> String {
    let names = inst.var_names();
    let mut out = String::from("min:");
    for (i, (&c, name)) in inst.objective().iter().zip(names).enumerate() {
        if i > 0 && i % 8 == 0 {
            out.push_str("\n    ");
        }
        term(&mut out, c, name);
    }
    out.push_str(";\n\nsubject to\n");
    for (j, row) in inst.rows().iter().enumerate() {
        let _ = write!(out, "{}:", inst.cons_names()[j]);
        for (k, &(i, a)) in row.iter().enumerate() {
            if k > 0 && k % 8 == 0 {
                out.push_str("\n    ");
            }
            term(&mut out, a, &names[i]);
        }
        let _ = writeln!(out, " <= {:.16e};", inst.rhs()[j]);
    }
    out.push_str("\nbin");
    for (i, name) in names.iter().enumerate() {
        if i > 0 && i % 16 == 0 {
            out.push_str("\n   ");
        }
        out.push(' ');
        out.push_str(name);
    }
    out.push_str(";\n");
    out
}
