//! Quantifier-free formulas: AST, parser, printer, sort inference and
//! evaluation.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Structure, Value};
use crate::error::{Error, Result};
use crate::fp_linalg::FpVector;

/// A variable component. Indices are written 1-based: `x_1`, `y0_2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    X(usize),
    Y(usize, usize),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X(i) => write!(f, "x_{i}"),
            Var::Y(b, i) => write!(f, "y{b}_{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(Var),
    /// Group identity `e`.
    Identity,
    /// Group generator `g<v>`.
    Gen(usize),
    /// Relational element constant.
    Elem(usize),
    /// Vector literal `vec(c_1, .., c_m)`.
    Vector(Vec<i64>),
    /// Group product, or vector addition.
    Mul(Box<Term>, Box<Term>),
    Inv(Box<Term>),
    Pow(Box<Term>, i64),
    /// Group commutator `[t, t]`.
    Comm(Box<Term>, Box<Term>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Atom {
    Eq(Term, Term),
    Comm(Term, Term),
    Central(Term),
    Rel(String, Vec<Term>),
    Less(Term, Term),
    Dot(Term, Term, i64),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Atom(Atom),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
}

/// Which kind of structure a formula speaks about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortKind {
    Relational,
    Group,
    Bilinear,
}

/// A formula `φ(x; y_0, .., y_{k-1})` with its variable partition.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParsedFormula {
    pub x_arity: usize,
    pub y_arities: Vec<usize>,
    pub body: Formula,
}

/// Values for the object tuple `x` and each parameter tuple `y_j`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Assignment {
    pub x: Vec<Value>,
    pub y: Vec<Vec<Value>>,
}

impl Assignment {
    fn get(&self, v: Var) -> Option<&Value> {
        match v {
            Var::X(i) => self.x.get(i.checked_sub(1)?),
            Var::Y(b, i) => self.y.get(b)?.get(i.checked_sub(1)?),
        }
    }
}

// ---------------------------------------------------------------- printing

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Identity => write!(f, "e"),
            Term::Gen(i) => write!(f, "g{i}"),
            Term::Elem(i) => write!(f, "{i}"),
            Term::Vector(cs) => {
                write!(f, "vec(")?;
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
            Term::Mul(a, b) => {
                write!(f, "{a}*")?;
                if matches!(**b, Term::Mul(..)) {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
            Term::Inv(a) => {
                write_postfix_base(f, a)?;
                write!(f, "^-1")
            }
            Term::Pow(a, k) => {
                write_postfix_base(f, a)?;
                write!(f, "^{k}")
            }
            Term::Comm(a, b) => write!(f, "[{a}, {b}]"),
        }
    }
}

fn write_postfix_base(f: &mut fmt::Formatter<'_>, t: &Term) -> fmt::Result {
    if matches!(t, Term::Mul(..)) {
        write!(f, "({t})")
    } else {
        write!(f, "{t}")
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Eq(a, b) => write!(f, "{a} = {b}"),
            Atom::Comm(a, b) => write!(f, "Comm({a}, {b})"),
            Atom::Central(a) => write!(f, "Central({a})"),
            Atom::Rel(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            Atom::Less(a, b) => write!(f, "{a} < {b}"),
            Atom::Dot(a, b, c) => write!(f, "dot({a}, {b}) = {c}"),
        }
    }
}

impl Formula {
    fn precedence(&self) -> u8 {
        match self {
            Formula::Or(..) => 0,
            Formula::And(..) => 1,
            Formula::Not(_) | Formula::Atom(_) => 2,
        }
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn not(a: Formula) -> Formula {
        Formula::Not(Box::new(a))
    }

    /// Every atom, left to right.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        fn walk<'a>(f: &'a Formula, out: &mut Vec<&'a Atom>) {
            match f {
                Formula::Atom(a) => out.push(a),
                Formula::Not(a) => walk(a, out),
                Formula::And(a, b) | Formula::Or(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
        walk(self, &mut out);
        out
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = |f: &mut fmt::Formatter<'_>, child: &Formula, strict: bool| {
            let paren = if strict {
                child.precedence() <= self.precedence()
            } else {
                child.precedence() < self.precedence()
            };
            if paren {
                write!(f, "({child})")
            } else {
                write!(f, "{child}")
            }
        };
        match self {
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Not(a) => {
                write!(f, "!")?;
                if let Formula::Atom(_) = **a {
                    write!(f, "({a})")
                } else {
                    side(f, a, false)
                }
            }
            Formula::And(a, b) => {
                side(f, a, false)?;
                write!(f, " & ")?;
                side(f, b, true)
            }
            Formula::Or(a, b) => {
                side(f, a, false)?;
                write!(f, " | ")?;
                side(f, b, true)
            }
        }
    }
}

impl fmt::Display for ParsedFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "vars x={}", self.x_arity)?;
        for (j, a) in self.y_arities.iter().enumerate() {
            write!(f, ", y{j}={a}")?;
        }
        write!(f, "; {}", self.body)
    }
}

impl Serialize for ParsedFormula {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ParsedFormula {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_formula(&s).map_err(serde::de::Error::custom)
    }
}

// ----------------------------------------------------------------- lexing

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Sym(char),
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(text[start..i].to_string())));
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                i += 1;
            }
            let v = text[start..i].parse().map_err(|_| Error::Syntax {
                pos: start,
                msg: "integer literal too large".into(),
            })?;
            out.push((start, Tok::Int(v)));
        } else if "()[],*^-=!&|<;".contains(c) {
            out.push((i, Tok::Sym(c)));
            i += 1;
        } else {
            return Err(Error::Syntax {
                pos: i,
                msg: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

fn parse_var(s: &str) -> Option<Var> {
    if let Some(rest) = s.strip_prefix("x_") {
        return rest.parse().ok().map(Var::X);
    }
    let rest = s.strip_prefix('y')?;
    let (b, i) = rest.split_once('_')?;
    Some(Var::Y(b.parse().ok()?, i.parse().ok()?))
}

fn parse_gen(s: &str) -> Option<usize> {
    let rest = s.strip_prefix('g')?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok()
}

// ---------------------------------------------------------------- parsing

struct Parser<'a> {
    text: &'a str,
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser<'_> {
    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.0).unwrap_or(self.text.len())
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|t| &t.1)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            pos: self.offset(),
            msg: msg.into(),
        })
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn int(&mut self) -> Result<i64> {
        let neg = self.eat('-');
        match self.peek() {
            Some(&Tok::Int(v)) => {
                self.pos += 1;
                Ok(if neg { -v } else { v })
            }
            _ => self.err("expected an integer"),
        }
    }

    fn header(&mut self) -> Result<Option<(usize, Vec<usize>)>> {
        if self.peek() != Some(&Tok::Ident("vars".into())) {
            return Ok(None);
        }
        self.pos += 1;
        let mut x = None;
        let mut ys: Vec<Option<usize>> = Vec::new();
        loop {
            let name = match self.peek() {
                Some(Tok::Ident(s)) => s.clone(),
                _ => return self.err("expected `x` or `y<j>` in header"),
            };
            self.pos += 1;
            self.expect('=')?;
            let a = self.int()?;
            if a < 1 {
                return self.err("tuple arity must be at least 1");
            }
            let a = a as usize;
            if name == "x" {
                x = Some(a);
            } else if let Some(j) = name.strip_prefix('y').and_then(|j| j.parse::<usize>().ok()) {
                if ys.len() <= j {
                    ys.resize(j + 1, None);
                }
                ys[j] = Some(a);
            } else {
                return self.err(format!("unknown header entry `{name}`"));
            }
            if self.eat(';') {
                break;
            }
            self.expect(',')?;
        }
        let x = x.unwrap_or(1);
        if ys.iter().any(Option::is_none) {
            return self.err("header skips a parameter block");
        }
        Ok(Some((x, ys.into_iter().map(|a| a.unwrap()).collect())))
    }

    fn formula(&mut self) -> Result<Formula> {
        let mut f = self.conj()?;
        while self.eat('|') {
            let g = self.conj()?;
            f = Formula::or(f, g);
        }
        Ok(f)
    }

    fn conj(&mut self) -> Result<Formula> {
        let mut f = self.unary()?;
        while self.eat('&') {
            let g = self.unary()?;
            f = Formula::and(f, g);
        }
        Ok(f)
    }

    fn unary(&mut self) -> Result<Formula> {
        if self.eat('!') {
            return Ok(Formula::not(self.unary()?));
        }
        if self.peek() == Some(&Tok::Sym('(')) {
            let save = self.pos;
            self.pos += 1;
            if let Ok(f) = self.formula() {
                if self.eat(')') {
                    return Ok(f);
                }
            }
            self.pos = save;
        }
        Ok(Formula::Atom(self.atom()?))
    }

    fn args(&mut self) -> Result<Vec<Term>> {
        self.expect('(')?;
        let mut out = Vec::new();
        if self.eat(')') {
            return Ok(out);
        }
        loop {
            out.push(self.term()?);
            if self.eat(')') {
                return Ok(out);
            }
            self.expect(',')?;
        }
    }

    fn atom(&mut self) -> Result<Atom> {
        let start = self.pos;
        if let Some(Tok::Ident(name)) = self.peek().cloned() {
            if self.peek_at(1) == Some(&Tok::Sym('(')) && parse_var(&name).is_none() && parse_gen(&name).is_none() && name != "vec" {
                self.pos += 1;
                let args = self.args()?;
                let atom_text = |args: &[Term]| {
                    format!("{name}({})", args.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", "))
                };
                let arity_err = |want: usize, args: &[Term]| {
                    Err(Error::Sort {
                        atom: atom_text(args),
                        msg: format!("`{name}` takes {want} argument(s), got {}", args.len()),
                    })
                };
                return match name.as_str() {
                    "Comm" => match <[Term; 2]>::try_from(args) {
                        Ok([a, b]) => Ok(Atom::Comm(a, b)),
                        Err(args) => arity_err(2, &args),
                    },
                    "Central" => match <[Term; 1]>::try_from(args) {
                        Ok([a]) => Ok(Atom::Central(a)),
                        Err(args) => arity_err(1, &args),
                    },
                    "dot" => {
                        let [a, b] = match <[Term; 2]>::try_from(args) {
                            Ok(ab) => ab,
                            Err(args) => return arity_err(2, &args),
                        };
                        self.expect('=')?;
                        let c = self.int()?;
                        Ok(Atom::Dot(a, b, c))
                    }
                    _ => {
                        if args.is_empty() {
                            self.pos = start;
                            return self.err(format!("relation `{name}` needs arguments"));
                        }
                        Ok(Atom::Rel(name, args))
                    }
                };
            }
        }
        let a = self.term()?;
        if self.eat('=') {
            Ok(Atom::Eq(a, self.term()?))
        } else if self.eat('<') {
            Ok(Atom::Less(a, self.term()?))
        } else {
            self.err("expected `=` or `<` after a term")
        }
    }

    fn term(&mut self) -> Result<Term> {
        let mut t = self.postfix()?;
        while self.eat('*') {
            let u = self.postfix()?;
            t = Term::Mul(Box::new(t), Box::new(u));
        }
        Ok(t)
    }

    fn postfix(&mut self) -> Result<Term> {
        let mut t = self.primary()?;
        while self.eat('^') {
            let k = self.int()?;
            t = if k == -1 {
                Term::Inv(Box::new(t))
            } else {
                Term::Pow(Box::new(t), k)
            };
        }
        Ok(t)
    }

    fn primary(&mut self) -> Result<Term> {
        match self.peek().cloned() {
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let t = self.term()?;
                self.expect(')')?;
                Ok(t)
            }
            Some(Tok::Sym('[')) => {
                self.pos += 1;
                let a = self.term()?;
                self.expect(',')?;
                let b = self.term()?;
                self.expect(']')?;
                Ok(Term::Comm(Box::new(a), Box::new(b)))
            }
            Some(Tok::Int(v)) => {
                self.pos += 1;
                Ok(Term::Elem(v as usize))
            }
            Some(Tok::Ident(s)) => {
                if s == "vec" {
                    self.pos += 1;
                    self.expect('(')?;
                    let mut cs = vec![self.int()?];
                    while self.eat(',') {
                        cs.push(self.int()?);
                    }
                    self.expect(')')?;
                    return Ok(Term::Vector(cs));
                }
                if s == "e" {
                    self.pos += 1;
                    return Ok(Term::Identity);
                }
                if let Some(g) = parse_gen(&s) {
                    self.pos += 1;
                    return Ok(Term::Gen(g));
                }
                match parse_var(&s) {
                    Some(Var::X(0)) | Some(Var::Y(_, 0)) => self.err(format!("variable `{s}`: indices start at 1")),
                    Some(v) => {
                        self.pos += 1;
                        Ok(Term::Var(v))
                    }
                    None => self.err(format!("unknown identifier `{s}`")),
                }
            }
            _ => self.err("expected a term"),
        }
    }
}

fn term_vars(t: &Term, out: &mut Vec<Var>) {
    match t {
        Term::Var(v) => out.push(*v),
        Term::Mul(a, b) | Term::Comm(a, b) => {
            term_vars(a, out);
            term_vars(b, out);
        }
        Term::Inv(a) | Term::Pow(a, _) => term_vars(a, out),
        _ => {}
    }
}

fn atom_terms(a: &Atom) -> Vec<&Term> {
    match a {
        Atom::Eq(x, y) | Atom::Comm(x, y) | Atom::Less(x, y) | Atom::Dot(x, y, _) => vec![x, y],
        Atom::Central(x) => vec![x],
        Atom::Rel(_, args) => args.iter().collect(),
    }
}

impl ParsedFormula {
    pub fn k(&self) -> usize {
        self.y_arities.len()
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        for a in self.body.atoms() {
            for t in atom_terms(a) {
                term_vars(t, &mut out);
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// The structure kind the formula's atoms and terms require, if any.
    pub fn sort(&self) -> Result<Option<SortKind>> {
        let mut found: Option<(SortKind, String)> = None;
        let mut note = |k: SortKind, atom: &Atom| -> Result<()> {
            match &found {
                Some((prev, _)) if *prev != k => Err(Error::Sort {
                    atom: atom.to_string(),
                    msg: format!("mixes {prev:?} and {k:?} constructs"),
                }),
                Some(_) => Ok(()),
                None => {
                    found = Some((k, atom.to_string()));
                    Ok(())
                }
            }
        };
        for a in self.body.atoms() {
            match a {
                Atom::Comm(..) | Atom::Central(_) => note(SortKind::Group, a)?,
                Atom::Rel(..) | Atom::Less(..) => note(SortKind::Relational, a)?,
                Atom::Dot(..) => note(SortKind::Bilinear, a)?,
                Atom::Eq(..) => {}
            }
            for t in atom_terms(a) {
                let mut kinds = Vec::new();
                term_kinds(t, &mut kinds);
                for k in kinds {
                    note(k, a)?;
                }
            }
        }
        Ok(found.map(|f| f.0))
    }
}

fn term_kinds(t: &Term, out: &mut Vec<SortKind>) {
    match t {
        Term::Identity | Term::Gen(_) | Term::Comm(..) => out.push(SortKind::Group),
        Term::Elem(_) => out.push(SortKind::Relational),
        Term::Vector(_) => out.push(SortKind::Bilinear),
        _ => {}
    }
    match t {
        Term::Mul(a, b) | Term::Comm(a, b) => {
            term_kinds(a, out);
            term_kinds(b, out);
        }
        Term::Inv(a) | Term::Pow(a, _) => term_kinds(a, out),
        _ => {}
    }
}

/// Parses `[vars x=<a>, y0=<a>, ..;] <formula>`. Without a header the
/// partition is inferred from the largest indices used.
pub fn parse_formula(text: &str) -> Result<ParsedFormula> {
    let toks = lex(text)?;
    let mut p = Parser { text, toks, pos: 0 };
    let header = p.header()?;
    let body = p.formula()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input");
    }
    let mut f = ParsedFormula {
        x_arity: 1,
        y_arities: Vec::new(),
        body,
    };
    let vars = f.vars();
    let mut x_used = 1;
    let mut y_used: Vec<usize> = Vec::new();
    for v in &vars {
        match *v {
            Var::X(i) => x_used = x_used.max(i),
            Var::Y(b, i) => {
                if y_used.len() <= b {
                    y_used.resize(b + 1, 1);
                }
                y_used[b] = y_used[b].max(i);
            }
        }
    }
    match header {
        Some((x, ys)) => {
            let bad = vars.iter().find(|v| match **v {
                Var::X(i) => i > x,
                Var::Y(b, i) => b >= ys.len() || i > ys[b],
            });
            if let Some(v) = bad {
                return Err(Error::Syntax {
                    pos: 0,
                    msg: format!("variable {v} exceeds the declared partition"),
                });
            }
            f.x_arity = x;
            f.y_arities = ys;
        }
        None => {
            f.x_arity = x_used;
            f.y_arities = y_used;
        }
    }
    f.sort()?;
    Ok(f)
}

/// Parses a bare term, such as a group word `[g0, g2]*g1^2`.
pub fn parse_term(text: &str) -> Result<Term> {
    let toks = lex(text)?;
    let mut p = Parser { text, toks, pos: 0 };
    let t = p.term()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(t)
}

// -------------------------------------------------------------- evaluation

fn sort_err<T>(atom: &Atom, msg: impl Into<String>) -> Result<T> {
    Err(Error::Sort {
        atom: atom.to_string(),
        msg: msg.into(),
    })
}

fn eval_term(t: &Term, s: &Structure, asg: &Assignment, atom: &Atom) -> Result<Value> {
    let sub = |t: &Term| eval_term(t, s, asg, atom);
    match t {
        Term::Var(v) => {
            let val = asg.get(*v).ok_or_else(|| Error::UnboundVariable(v.to_string()))?;
            if !s.accepts(val) {
                return sort_err(atom, format!("value bound to {v} does not belong to the structure"));
            }
            Ok(val.clone())
        }
        Term::Identity => match s {
            Structure::Group(g) => Ok(Value::Group(g.identity())),
            _ => sort_err(atom, "`e` needs a group"),
        },
        Term::Gen(v) => match s {
            Structure::Group(g) if *v < g.n() => Ok(Value::Group(g.generator(*v))),
            Structure::Group(g) => sort_err(atom, format!("generator g{v} out of range for {} generators", g.n())),
            _ => sort_err(atom, "generators need a group"),
        },
        Term::Elem(i) => match s {
            Structure::Relational(r) if *i < r.universe_size => Ok(Value::Elem(*i)),
            Structure::Relational(r) => sort_err(atom, format!("element {i} out of range for universe {}", r.universe_size)),
            _ => sort_err(atom, "element constants need a relational structure"),
        },
        Term::Vector(cs) => match s {
            Structure::Bilinear(b) if cs.len() == b.m => Ok(Value::Vector(FpVector::new(b.p, cs.iter().copied()))),
            Structure::Bilinear(b) => sort_err(atom, format!("vector literal of length {} in dimension {}", cs.len(), b.m)),
            _ => sort_err(atom, "vector literals need the bilinear structure"),
        },
        Term::Mul(a, b) => match (s, sub(a)?, sub(b)?) {
            (Structure::Group(g), Value::Group(x), Value::Group(y)) => Ok(Value::Group(g.multiply(&x, &y)?)),
            (Structure::Bilinear(_), Value::Vector(x), Value::Vector(y)) => Ok(Value::Vector(x.add(&y))),
            _ => sort_err(atom, "`*` needs group elements or vectors"),
        },
        Term::Inv(a) => match (s, sub(a)?) {
            (Structure::Group(g), Value::Group(x)) => Ok(Value::Group(g.inverse(&x)?)),
            (Structure::Bilinear(_), Value::Vector(x)) => Ok(Value::Vector(x.neg())),
            _ => sort_err(atom, "`^-1` needs a group element or a vector"),
        },
        Term::Pow(a, k) => match (s, sub(a)?) {
            (Structure::Group(g), Value::Group(x)) => Ok(Value::Group(g.power(&x, *k)?)),
            (Structure::Bilinear(_), Value::Vector(x)) => Ok(Value::Vector(x.scale(*k))),
            _ => sort_err(atom, "`^` needs a group element or a vector"),
        },
        Term::Comm(a, b) => match (s, sub(a)?, sub(b)?) {
            (Structure::Group(g), Value::Group(x), Value::Group(y)) => Ok(Value::Group(g.commutator(&x, &y)?)),
            _ => sort_err(atom, "commutators need group elements"),
        },
    }
}

fn eval_atom(a: &Atom, s: &Structure, asg: &Assignment) -> Result<bool> {
    let t = |x: &Term| eval_term(x, s, asg, a);
    match a {
        Atom::Eq(x, y) => {
            let (u, v) = (t(x)?, t(y)?);
            Ok(u == v)
        }
        Atom::Comm(x, y) => match (s, t(x)?, t(y)?) {
            (Structure::Group(g), Value::Group(u), Value::Group(v)) => Ok(g.commute(&u, &v)),
            _ => sort_err(a, "Comm needs a group"),
        },
        Atom::Central(x) => match (s, t(x)?) {
            (Structure::Group(g), Value::Group(u)) => Ok(g.is_central(&u)),
            _ => sort_err(a, "Central needs a group"),
        },
        Atom::Rel(name, args) => match s {
            Structure::Relational(r) => {
                let Some(rel) = r.relation(name) else {
                    return sort_err(a, format!("unknown relation `{name}`"));
                };
                if rel.arity != args.len() {
                    return sort_err(a, format!("`{name}` has arity {}", rel.arity));
                }
                let mut tuple = Vec::with_capacity(args.len());
                for x in args {
                    match t(x)? {
                        Value::Elem(i) => tuple.push(i),
                        _ => return sort_err(a, "relation arguments must be elements"),
                    }
                }
                Ok(r.holds(name, &tuple))
            }
            _ => sort_err(a, "relation atoms need a relational structure"),
        },
        Atom::Less(x, y) => match (s, t(x)?, t(y)?) {
            (Structure::Relational(r), Value::Elem(u), Value::Elem(v)) if r.ordered => Ok(u < v),
            _ => sort_err(a, "`<` needs an ordered relational structure"),
        },
        Atom::Dot(x, y, c) => match (s, t(x)?, t(y)?) {
            (Structure::Bilinear(b), Value::Vector(u), Value::Vector(v)) => {
                Ok(b.dot(&u, &v) == c.rem_euclid(b.p as i64) as u32)
            }
            _ => sort_err(a, "dot needs the bilinear structure"),
        },
    }
}

fn eval_formula(f: &Formula, s: &Structure, asg: &Assignment) -> Result<bool> {
    Ok(match f {
        Formula::Atom(a) => eval_atom(a, s, asg)?,
        Formula::Not(a) => !eval_formula(a, s, asg)?,
        Formula::And(a, b) => eval_formula(a, s, asg)? && eval_formula(b, s, asg)?,
        Formula::Or(a, b) => eval_formula(a, s, asg)? || eval_formula(b, s, asg)?,
    })
}

/// Value of `t` in `s` under `asg`.
pub fn evaluate_term(t: &Term, s: &Structure, asg: &Assignment) -> Result<Value> {
    let atom = Atom::Eq(t.clone(), t.clone());
    eval_term(t, s, asg, &atom)
}

/// Standard satisfaction of `f` in `s` under `asg`.
pub fn evaluate(f: &ParsedFormula, s: &Structure, asg: &Assignment) -> Result<bool> {
    if let Some(k) = f.sort()? {
        if k != s.kind() {
            let atom = f.body.atoms().first().map(|a| a.to_string()).unwrap_or_default();
            return Err(Error::Sort {
                atom,
                msg: format!("formula needs a {k:?} structure, got {:?}", s.kind()),
            });
        }
    }
    eval_formula(&f.body, s, asg)
}
