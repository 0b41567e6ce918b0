//! XPath 1.0 over the arena DOM: full expression grammar, all axes except
//! `namespace`, and the core function library.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::html::dom::{Document, NodeData, NodeId};
use crate::num::{floor, round_half_up as round};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("invalid xpath `{expr}`: {reason}")]
pub struct XPathError {
    pub expr: String,
    pub reason: String,
}

/// A node in XPath's data model: a DOM node or an attribute of an element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Item {
    Node(NodeId),
    Attr(NodeId, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Nodes(Vec<Item>),
    Str(String),
    Num(f64),
    Bool(bool),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Slash,
    DSlash,
    LParen,
    RParen,
    LBrack,
    RBrack,
    Dot,
    DDot,
    At,
    Comma,
    DColon,
    Pipe,
    Plus,
    Minus,
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
    /// `*` as a name test.
    Star,
    /// `*` as multiplication.
    Mul,
    /// `and`, `or`, `div`, `mod` in operator position.
    OpName(String),
    Literal(String),
    Number(f64),
    Name(String),
    Var(String),
}

fn lex(src: &str) -> Result<Vec<Tok>, String> {
    let chars: Vec<char> = src.chars().collect();
    let mut out: Vec<Tok> = Vec::new();
    let mut i = 0;
    // Operator position: a preceding token exists and is not one of
    // @ :: ( [ , or an operator.
    let operator_position = |out: &Vec<Tok>| match out.last() {
        None => false,
        Some(t) => !matches!(
            t,
            Tok::At
                | Tok::DColon
                | Tok::LParen
                | Tok::LBrack
                | Tok::Comma
                | Tok::Slash
                | Tok::DSlash
                | Tok::Pipe
                | Tok::Plus
                | Tok::Minus
                | Tok::Eq
                | Tok::Neq
                | Tok::Lt
                | Tok::Le
                | Tok::Gt
                | Tok::Ge
                | Tok::Mul
                | Tok::OpName(_)
        ),
    };
    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let tok = match c {
            '/' if next == Some('/') => {
                i += 2;
                Tok::DSlash
            }
            '/' => {
                i += 1;
                Tok::Slash
            }
            '(' => {
                i += 1;
                Tok::LParen
            }
            ')' => {
                i += 1;
                Tok::RParen
            }
            '[' => {
                i += 1;
                Tok::LBrack
            }
            ']' => {
                i += 1;
                Tok::RBrack
            }
            '.' if next == Some('.') => {
                i += 2;
                Tok::DDot
            }
            '.' if !next.is_some_and(|n| n.is_ascii_digit()) => {
                i += 1;
                Tok::Dot
            }
            '@' => {
                i += 1;
                Tok::At
            }
            ',' => {
                i += 1;
                Tok::Comma
            }
            ':' if next == Some(':') => {
                i += 2;
                Tok::DColon
            }
            '|' => {
                i += 1;
                Tok::Pipe
            }
            '+' => {
                i += 1;
                Tok::Plus
            }
            '-' => {
                i += 1;
                Tok::Minus
            }
            '=' => {
                i += 1;
                Tok::Eq
            }
            '!' if next == Some('=') => {
                i += 2;
                Tok::Neq
            }
            '<' if next == Some('=') => {
                i += 2;
                Tok::Le
            }
            '<' => {
                i += 1;
                Tok::Lt
            }
            '>' if next == Some('=') => {
                i += 2;
                Tok::Ge
            }
            '>' => {
                i += 1;
                Tok::Gt
            }
            '*' => {
                i += 1;
                if operator_position(&out) {
                    Tok::Mul
                } else {
                    Tok::Star
                }
            }
            '"' | '\'' => {
                let end = chars[i + 1..]
                    .iter()
                    .position(|x| *x == c)
                    .ok_or_else(|| "unterminated string literal".to_string())?;
                let s: String = chars[i + 1..i + 1 + end].iter().collect();
                i += end + 2;
                Tok::Literal(s)
            }
            '$' => {
                i += 1;
                let start = i;
                while i < chars.len() && is_name_char(chars[i]) {
                    i += 1;
                }
                Tok::Var(chars[start..i].iter().collect())
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                Tok::Number(s.parse().map_err(|_| "bad number".to_string())?)
            }
            c if is_name_start(c) => {
                let start = i;
                while i < chars.len() && is_name_char(chars[i]) {
                    i += 1;
                }
                // QName prefix or `prefix:*`.
                if i + 1 < chars.len() && chars[i] == ':' && chars[i + 1] != ':' {
                    i += 1;
                    if chars[i] == '*' {
                        i += 1;
                    } else {
                        while i < chars.len() && is_name_char(chars[i]) {
                            i += 1;
                        }
                    }
                }
                let name: String = chars[start..i].iter().collect();
                if operator_position(&out) && matches!(name.as_str(), "and" | "or" | "div" | "mod") {
                    Tok::OpName(name)
                } else {
                    Tok::Name(name)
                }
            }
            other => return Err(alloc::format!("unexpected character `{other}`")),
        };
        out.push(tok);
    }
    Ok(out)
}

fn is_name_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-' || c == '.'
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Axis {
    Child,
    Descendant,
    DescendantOrSelf,
    Parent,
    Ancestor,
    AncestorOrSelf,
    FollowingSibling,
    PrecedingSibling,
    Following,
    Preceding,
    Attribute,
    SelfAxis,
}

impl Axis {
    fn parse(name: &str) -> Option<Axis> {
        Some(match name {
            "child" => Axis::Child,
            "descendant" => Axis::Descendant,
            "descendant-or-self" => Axis::DescendantOrSelf,
            "parent" => Axis::Parent,
            "ancestor" => Axis::Ancestor,
            "ancestor-or-self" => Axis::AncestorOrSelf,
            "following-sibling" => Axis::FollowingSibling,
            "preceding-sibling" => Axis::PrecedingSibling,
            "following" => Axis::Following,
            "preceding" => Axis::Preceding,
            "attribute" => Axis::Attribute,
            "self" => Axis::SelfAxis,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
enum NodeTest {
    Name(String),
    Any,
    Text,
    Node,
    Comment,
}

#[derive(Clone, Debug, PartialEq)]
struct Step {
    axis: Axis,
    test: NodeTest,
    preds: Vec<Expr>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BinOp {
    Or,
    And,
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Union,
}

#[derive(Clone, Debug, PartialEq)]
enum Expr {
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    /// `absolute` paths start at the document root.
    Path { absolute: bool, steps: Vec<Step> },
    Filter { primary: Box<Expr>, preds: Vec<Expr>, steps: Vec<Step> },
    Literal(String),
    Number(f64),
    Call(String, Vec<Expr>),
}

/// A compiled XPath expression.
#[derive(Clone, Debug, PartialEq)]
pub struct XPath {
    source: String,
    expr: Expr,
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

type PResult<T> = Result<T, String>;

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k)
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok) -> PResult<()> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(alloc::format!("expected {t:?}"))
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.binary(0)
    }

    fn op_at(&self, level: usize) -> Option<BinOp> {
        let t = self.peek()?;
        let op = match (level, t) {
            (0, Tok::OpName(n)) if n == "or" => BinOp::Or,
            (1, Tok::OpName(n)) if n == "and" => BinOp::And,
            (2, Tok::Eq) => BinOp::Eq,
            (2, Tok::Neq) => BinOp::Neq,
            (3, Tok::Lt) => BinOp::Lt,
            (3, Tok::Le) => BinOp::Le,
            (3, Tok::Gt) => BinOp::Gt,
            (3, Tok::Ge) => BinOp::Ge,
            (4, Tok::Plus) => BinOp::Add,
            (4, Tok::Minus) => BinOp::Sub,
            (5, Tok::Mul) => BinOp::Mul,
            (5, Tok::OpName(n)) if n == "div" => BinOp::Div,
            (5, Tok::OpName(n)) if n == "mod" => BinOp::Mod,
            _ => return None,
        };
        Some(op)
    }

    fn binary(&mut self, level: usize) -> PResult<Expr> {
        if level == 6 {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        while let Some(op) = self.op_at(level) {
            self.pos += 1;
            let rhs = self.binary(level + 1)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat(&Tok::Minus) {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let mut lhs = self.path()?;
        while self.eat(&Tok::Pipe) {
            let rhs = self.path()?;
            lhs = Expr::Bin(BinOp::Union, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn starts_primary(&self) -> bool {
        match self.peek() {
            Some(Tok::LParen | Tok::Literal(_) | Tok::Number(_) | Tok::Var(_)) => true,
            Some(Tok::Name(n)) => {
                self.peek_at(1) == Some(&Tok::LParen)
                    && !matches!(n.as_str(), "node" | "text" | "comment" | "processing-instruction")
            }
            _ => false,
        }
    }

    fn path(&mut self) -> PResult<Expr> {
        if self.starts_primary() {
            let primary = self.primary()?;
            let mut preds = Vec::new();
            while self.peek() == Some(&Tok::LBrack) {
                preds.push(self.predicate()?);
            }
            let mut steps = Vec::new();
            self.relative_tail(&mut steps)?;
            if preds.is_empty() && steps.is_empty() {
                return Ok(primary);
            }
            return Ok(Expr::Filter {
                primary: Box::new(primary),
                preds,
                steps,
            });
        }
        let mut steps = Vec::new();
        let absolute = match self.peek() {
            Some(Tok::Slash) => {
                self.pos += 1;
                if self.starts_step() {
                    self.relative(&mut steps)?;
                }
                true
            }
            Some(Tok::DSlash) => {
                self.pos += 1;
                steps.push(descendant_or_self());
                self.relative(&mut steps)?;
                true
            }
            _ => {
                self.relative(&mut steps)?;
                false
            }
        };
        Ok(Expr::Path { absolute, steps })
    }

    fn starts_step(&self) -> bool {
        matches!(
            self.peek(),
            Some(Tok::Dot | Tok::DDot | Tok::At | Tok::Star | Tok::Name(_))
        )
    }

    fn relative(&mut self, steps: &mut Vec<Step>) -> PResult<()> {
        steps.push(self.step()?);
        self.relative_tail(steps)
    }

    fn relative_tail(&mut self, steps: &mut Vec<Step>) -> PResult<()> {
        loop {
            match self.peek() {
                Some(Tok::Slash) => {
                    self.pos += 1;
                    steps.push(self.step()?);
                }
                Some(Tok::DSlash) => {
                    self.pos += 1;
                    steps.push(descendant_or_self());
                    steps.push(self.step()?);
                }
                _ => return Ok(()),
            }
        }
    }

    fn step(&mut self) -> PResult<Step> {
        if self.eat(&Tok::Dot) {
            return Ok(Step {
                axis: Axis::SelfAxis,
                test: NodeTest::Node,
                preds: Vec::new(),
            });
        }
        if self.eat(&Tok::DDot) {
            return Ok(Step {
                axis: Axis::Parent,
                test: NodeTest::Node,
                preds: Vec::new(),
            });
        }
        let mut axis = Axis::Child;
        if self.eat(&Tok::At) {
            axis = Axis::Attribute;
        } else if let (Some(Tok::Name(n)), Some(Tok::DColon)) = (self.peek(), self.peek_at(1)) {
            axis = Axis::parse(n).ok_or_else(|| alloc::format!("unknown axis `{n}`"))?;
            self.pos += 2;
        }
        let test = match self.peek().cloned() {
            Some(Tok::Star) => {
                self.pos += 1;
                NodeTest::Any
            }
            Some(Tok::Name(n)) => {
                self.pos += 1;
                if self.peek() == Some(&Tok::LParen) {
                    self.pos += 1;
                    if n == "processing-instruction" {
                        if let Some(Tok::Literal(_)) = self.peek() {
                            self.pos += 1;
                        }
                    }
                    self.expect(&Tok::RParen)?;
                    match n.as_str() {
                        "node" => NodeTest::Node,
                        "text" => NodeTest::Text,
                        "comment" => NodeTest::Comment,
                        // No processing instructions exist in HTML DOMs.
                        "processing-instruction" => NodeTest::Name(String::from("\u{0}")),
                        _ => return Err(alloc::format!("unknown node type `{n}`")),
                    }
                } else {
                    NodeTest::Name(n.to_ascii_lowercase())
                }
            }
            other => return Err(alloc::format!("expected a step, found {other:?}")),
        };
        let mut preds = Vec::new();
        while self.peek() == Some(&Tok::LBrack) {
            preds.push(self.predicate()?);
        }
        Ok(Step { axis, test, preds })
    }

    fn predicate(&mut self) -> PResult<Expr> {
        self.expect(&Tok::LBrack)?;
        let e = self.expr()?;
        self.expect(&Tok::RBrack)?;
        Ok(e)
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().cloned() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Literal(s)) => {
                self.pos += 1;
                Ok(Expr::Literal(s))
            }
            Some(Tok::Number(n)) => {
                self.pos += 1;
                Ok(Expr::Number(n))
            }
            Some(Tok::Var(v)) => Err(alloc::format!("unbound variable `${v}`")),
            Some(Tok::Name(n)) => {
                self.pos += 2;
                let mut args = Vec::new();
                if !self.eat(&Tok::RParen) {
                    loop {
                        args.push(self.expr()?);
                        if self.eat(&Tok::Comma) {
                            continue;
                        }
                        self.expect(&Tok::RParen)?;
                        break;
                    }
                }
                check_arity(&n, args.len())?;
                Ok(Expr::Call(n, args))
            }
            other => Err(alloc::format!("unexpected token {other:?}")),
        }
    }
}

fn descendant_or_self() -> Step {
    Step {
        axis: Axis::DescendantOrSelf,
        test: NodeTest::Node,
        preds: Vec::new(),
    }
}

fn check_arity(name: &str, n: usize) -> PResult<()> {
    let ok = match name {
        "last" | "position" | "true" | "false" => n == 0,
        "count" | "not" | "boolean" | "sum" | "floor" | "ceiling" | "round" => n == 1,
        "string" | "number" | "string-length" | "normalize-space" | "local-name" | "name" => n <= 1,
        "starts-with" | "contains" | "substring-before" | "substring-after" => n == 2,
        "substring" => n == 2 || n == 3,
        "translate" => n == 3,
        "concat" => n >= 2,
        _ => return Err(alloc::format!("unknown function `{name}()`")),
    };
    if ok {
        Ok(())
    } else {
        Err(alloc::format!("wrong number of arguments to `{name}()`"))
    }
}

#[derive(Clone, Copy)]
struct Ctx {
    item: Item,
    pos: usize,
    size: usize,
}

impl XPath {
    pub fn parse(src: &str) -> Result<Self, XPathError> {
        let err = |reason: String| XPathError {
            expr: src.to_string(),
            reason,
        };
        let toks = lex(src).map_err(err)?;
        if toks.is_empty() {
            return Err(err("empty expression".to_string()));
        }
        let mut p = Parser { toks, pos: 0 };
        let expr = p.expr().map_err(err)?;
        if p.pos != p.toks.len() {
            return Err(err(alloc::format!("unexpected token {:?}", p.toks[p.pos])));
        }
        Ok(XPath {
            source: src.to_string(),
            expr,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Evaluates with `context` (the document root when `None`) as the
    /// context node.
    pub fn evaluate(&self, doc: &Document, context: Option<NodeId>) -> Value {
        let ctx = Ctx {
            item: Item::Node(context.unwrap_or(Document::ROOT)),
            pos: 1,
            size: 1,
        };
        Eval { doc }.eval(&self.expr, ctx)
    }

    /// Element results in document order. Non-node-set results and
    /// non-element nodes are errors, as in WebDriver's "invalid selector".
    pub fn select_elements(&self, doc: &Document, context: Option<NodeId>) -> Result<Vec<NodeId>, XPathError> {
        let err = |reason: &str| XPathError {
            expr: self.source.clone(),
            reason: reason.to_string(),
        };
        match self.evaluate(doc, context) {
            Value::Nodes(items) => items
                .into_iter()
                .map(|it| match it {
                    Item::Node(n) if doc.element(n).is_some() => Ok(n),
                    _ => Err(err("result is not an element")),
                })
                .collect(),
            _ => Err(err("result is not a node-set")),
        }
    }
}

struct Eval<'a> {
    doc: &'a Document,
}

impl Eval<'_> {
    fn eval(&self, e: &Expr, ctx: Ctx) -> Value {
        match e {
            Expr::Literal(s) => Value::Str(s.clone()),
            Expr::Number(n) => Value::Num(*n),
            Expr::Neg(inner) => Value::Num(-self.number(&self.eval(inner, ctx))),
            Expr::Bin(op, a, b) => self.binop(*op, a, b, ctx),
            Expr::Path { absolute, steps } => {
                let start = if *absolute { Item::Node(Document::ROOT) } else { ctx.item };
                Value::Nodes(self.walk(alloc::vec![start], steps))
            }
            Expr::Filter { primary, preds, steps } => {
                let Value::Nodes(mut items) = self.eval(primary, ctx) else {
                    // Predicates and steps need a node-set; anything else
                    // selects nothing.
                    return Value::Nodes(Vec::new());
                };
                for p in preds {
                    items = self.filter(items, p);
                }
                Value::Nodes(self.walk(items, steps))
            }
            Expr::Call(name, args) => self.call(name, args, ctx),
        }
    }

    fn binop(&self, op: BinOp, a: &Expr, b: &Expr, ctx: Ctx) -> Value {
        match op {
            BinOp::Or => Value::Bool(self.boolean(&self.eval(a, ctx)) || self.boolean(&self.eval(b, ctx))),
            BinOp::And => Value::Bool(self.boolean(&self.eval(a, ctx)) && self.boolean(&self.eval(b, ctx))),
            BinOp::Union => {
                let mut out = match self.eval(a, ctx) {
                    Value::Nodes(n) => n,
                    _ => Vec::new(),
                };
                if let Value::Nodes(more) = self.eval(b, ctx) {
                    out.extend(more);
                }
                out.sort();
                out.dedup();
                Value::Nodes(out)
            }
            BinOp::Eq | BinOp::Neq | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                let (x, y) = (self.eval(a, ctx), self.eval(b, ctx));
                Value::Bool(self.compare(op, &x, &y))
            }
            _ => {
                let x = self.number(&self.eval(a, ctx));
                let y = self.number(&self.eval(b, ctx));
                Value::Num(match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => x / y,
                    _ => x % y,
                })
            }
        }
    }

    fn compare(&self, op: BinOp, x: &Value, y: &Value) -> bool {
        match (x, y) {
            (Value::Nodes(xs), Value::Nodes(ys)) => xs.iter().any(|a| {
                let sa = self.string_value(*a);
                ys.iter().any(|b| self.compare_atoms(op, &Value::Str(sa.clone()), &Value::Str(self.string_value(*b))))
            }),
            (Value::Nodes(xs), other) => match other {
                Value::Bool(_) => self.compare_atoms(op, &Value::Bool(!xs.is_empty()), other),
                _ => xs
                    .iter()
                    .any(|a| self.compare_atoms(op, &Value::Str(self.string_value(*a)), other)),
            },
            (other, Value::Nodes(ys)) => match other {
                Value::Bool(_) => self.compare_atoms(op, other, &Value::Bool(!ys.is_empty())),
                _ => ys
                    .iter()
                    .any(|b| self.compare_atoms(op, other, &Value::Str(self.string_value(*b)))),
            },
            _ => self.compare_atoms(op, x, y),
        }
    }

    fn compare_atoms(&self, op: BinOp, x: &Value, y: &Value) -> bool {
        match op {
            BinOp::Eq | BinOp::Neq => {
                let eq = match (x, y) {
                    (Value::Bool(_), _) | (_, Value::Bool(_)) => self.boolean(x) == self.boolean(y),
                    (Value::Num(_), _) | (_, Value::Num(_)) => self.number(x) == self.number(y),
                    _ => self.string(x) == self.string(y),
                };
                if op == BinOp::Eq {
                    eq
                } else {
                    !eq
                }
            }
            _ => {
                let (a, b) = (self.number(x), self.number(y));
                match op {
                    BinOp::Lt => a < b,
                    BinOp::Le => a <= b,
                    BinOp::Gt => a > b,
                    _ => a >= b,
                }
            }
        }
    }

    fn walk(&self, mut items: Vec<Item>, steps: &[Step]) -> Vec<Item> {
        for step in steps {
            let mut next: Vec<Item> = Vec::new();
            for it in &items {
                let mut candidates: Vec<Item> = self
                    .axis(*it, step.axis)
                    .into_iter()
                    .filter(|c| self.test(*c, step))
                    .collect();
                for p in &step.preds {
                    candidates = self.filter(candidates, p);
                }
                next.extend(candidates);
            }
            next.sort();
            next.dedup();
            items = next;
        }
        items
    }

    /// Applies a predicate; positions follow the order of `items`.
    fn filter(&self, items: Vec<Item>, pred: &Expr) -> Vec<Item> {
        let size = items.len();
        items
            .into_iter()
            .enumerate()
            .filter(|(i, it)| {
                let ctx = Ctx {
                    item: *it,
                    pos: i + 1,
                    size,
                };
                match self.eval(pred, ctx) {
                    Value::Num(n) => n == (i + 1) as f64,
                    v => self.boolean(&v),
                }
            })
            .map(|(_, it)| it)
            .collect()
    }

    /// Nodes along `axis` in axis order (reverse axes nearest first).
    fn axis(&self, item: Item, axis: Axis) -> Vec<Item> {
        let d = self.doc;
        let node = match item {
            Item::Node(n) => n,
            Item::Attr(owner, _) => {
                return match axis {
                    Axis::SelfAxis => alloc::vec![item],
                    Axis::Parent => alloc::vec![Item::Node(owner)],
                    Axis::Ancestor | Axis::AncestorOrSelf => {
                        let mut v = Vec::new();
                        if axis == Axis::AncestorOrSelf {
                            v.push(item);
                        }
                        v.push(Item::Node(owner));
                        v.extend(self.ancestors_with_root(owner).into_iter().map(Item::Node));
                        v
                    }
                    Axis::Following => self.following(owner, true),
                    Axis::Preceding => self.preceding(owner),
                    _ => Vec::new(),
                };
            }
        };
        let nodes = |v: Vec<NodeId>| v.into_iter().map(Item::Node).collect::<Vec<_>>();
        match axis {
            Axis::Child => nodes(d.children(node).to_vec()),
            Axis::Descendant => nodes(d.descendants(node).collect()),
            Axis::DescendantOrSelf => {
                let mut v = alloc::vec![node];
                v.extend(d.descendants(node));
                nodes(v)
            }
            Axis::Parent => nodes(d.parent(node).into_iter().collect()),
            Axis::Ancestor => nodes(self.ancestors_with_root(node)),
            Axis::AncestorOrSelf => {
                let mut v = alloc::vec![node];
                v.extend(self.ancestors_with_root(node));
                nodes(v)
            }
            Axis::FollowingSibling => nodes(d.following_siblings(node)),
            Axis::PrecedingSibling => nodes(d.preceding_siblings(node)),
            Axis::Following => self.following(node, false),
            Axis::Preceding => self.preceding(node),
            Axis::Attribute => match d.element(node) {
                Some(e) => (0..e.attrs.len()).map(|i| Item::Attr(node, i)).collect(),
                None => Vec::new(),
            },
            Axis::SelfAxis => alloc::vec![item],
        }
    }

    fn ancestors_with_root(&self, node: NodeId) -> Vec<NodeId> {
        let mut v: Vec<NodeId> = self.doc.ancestors(node).collect();
        if node != Document::ROOT {
            v.push(Document::ROOT);
        }
        v
    }

    /// Everything after `node` in document order, excluding descendants
    /// (unless starting from an attribute, whose owner's descendants follow
    /// it).
    fn following(&self, node: NodeId, include_descendants: bool) -> Vec<Item> {
        let d = self.doc;
        let mut out = Vec::new();
        if include_descendants {
            out.extend(d.descendants(node).map(Item::Node));
        }
        let mut cur = node;
        loop {
            for s in d.following_siblings(cur) {
                out.push(Item::Node(s));
                out.extend(d.descendants(s).map(Item::Node));
            }
            match d.parent(cur) {
                Some(p) => cur = p,
                None => break,
            }
        }
        out
    }

    /// Everything before `node` in document order, excluding ancestors,
    /// nearest first.
    fn preceding(&self, node: NodeId) -> Vec<Item> {
        let d = self.doc;
        let mut out = Vec::new();
        let mut cur = node;
        loop {
            for s in d.preceding_siblings(cur) {
                let mut sub: Vec<NodeId> = alloc::vec![s];
                sub.extend(d.descendants(s));
                out.extend(sub.into_iter().rev().map(Item::Node));
            }
            match d.parent(cur) {
                Some(p) => cur = p,
                None => break,
            }
        }
        out
    }

    fn test(&self, item: Item, step: &Step) -> bool {
        let d = self.doc;
        match item {
            Item::Attr(n, i) => {
                if step.axis != Axis::Attribute && step.axis != Axis::SelfAxis {
                    return matches!(step.test, NodeTest::Node);
                }
                let name = &d.element(n).expect("attribute owner").attrs[i].0;
                match &step.test {
                    NodeTest::Any | NodeTest::Node => true,
                    NodeTest::Name(t) => t == name,
                    _ => false,
                }
            }
            Item::Node(n) => match (&step.test, &d.node(n).data) {
                (NodeTest::Node, _) => true,
                (NodeTest::Text, NodeData::Text(_)) => true,
                (NodeTest::Comment, NodeData::Comment(_)) => true,
                (NodeTest::Any, NodeData::Element(_)) => step.axis != Axis::Attribute,
                (NodeTest::Name(t), NodeData::Element(e)) => step.axis != Axis::Attribute && *t == e.name,
                _ => false,
            },
        }
    }

    fn string_value(&self, item: Item) -> String {
        match item {
            Item::Attr(n, i) => self.doc.element(n).expect("attribute owner").attrs[i].1.clone(),
            Item::Node(n) => self.doc.text_content(n),
        }
    }

    fn string(&self, v: &Value) -> String {
        match v {
            Value::Str(s) => s.clone(),
            Value::Num(n) => number_to_string(*n),
            Value::Bool(b) => if *b { "true" } else { "false" }.to_string(),
            Value::Nodes(items) => items.first().map(|i| self.string_value(*i)).unwrap_or_default(),
        }
    }

    fn number(&self, v: &Value) -> f64 {
        match v {
            Value::Num(n) => *n,
            Value::Bool(b) => {
                if *b {
                    1.0
                } else {
                    0.0
                }
            }
            _ => string_to_number(&self.string(v)),
        }
    }

    fn boolean(&self, v: &Value) -> bool {
        match v {
            Value::Bool(b) => *b,
            Value::Num(n) => *n != 0.0 && !n.is_nan(),
            Value::Str(s) => !s.is_empty(),
            Value::Nodes(items) => !items.is_empty(),
        }
    }

    fn call(&self, name: &str, args: &[Expr], ctx: Ctx) -> Value {
        let arg = |i: usize| self.eval(&args[i], ctx);
        let str_arg = |i: usize| {
            if args.len() > i {
                self.string(&arg(i))
            } else {
                self.string_value(ctx.item)
            }
        };
        match name {
            "last" => Value::Num(ctx.size as f64),
            "position" => Value::Num(ctx.pos as f64),
            "count" => Value::Num(match arg(0) {
                Value::Nodes(n) => n.len() as f64,
                _ => 0.0,
            }),
            "local-name" | "name" => {
                let item = if args.is_empty() {
                    Some(ctx.item)
                } else {
                    match arg(0) {
                        Value::Nodes(n) => n.first().copied(),
                        _ => None,
                    }
                };
                Value::Str(match item {
                    Some(Item::Node(n)) => self.doc.tag(n).unwrap_or("").to_string(),
                    Some(Item::Attr(n, i)) => self.doc.element(n).expect("owner").attrs[i].0.clone(),
                    None => String::new(),
                })
            }
            "string" => Value::Str(str_arg(0)),
            "concat" => Value::Str(args.iter().map(|a| self.string(&self.eval(a, ctx))).collect()),
            "starts-with" => Value::Bool(str_arg(0).starts_with(&str_arg(1))),
            "contains" => Value::Bool(str_arg(0).contains(&str_arg(1))),
            "substring-before" => {
                let (s, t) = (str_arg(0), str_arg(1));
                Value::Str(s.find(&t).map(|p| s[..p].to_string()).unwrap_or_default())
            }
            "substring-after" => {
                let (s, t) = (str_arg(0), str_arg(1));
                Value::Str(s.find(&t).map(|p| s[p + t.len()..].to_string()).unwrap_or_default())
            }
            "substring" => {
                let s: Vec<char> = str_arg(0).chars().collect();
                let start = round(self.number(&arg(1)));
                let end = if args.len() == 3 {
                    start + round(self.number(&arg(2)))
                } else {
                    f64::INFINITY
                };
                Value::Str(
                    s.iter()
                        .enumerate()
                        .filter(|(i, _)| {
                            let p = (*i + 1) as f64;
                            p >= start && p < end
                        })
                        .map(|(_, c)| *c)
                        .collect(),
                )
            }
            "string-length" => Value::Num(str_arg(0).chars().count() as f64),
            "normalize-space" => Value::Str(str_arg(0).split_whitespace().collect::<Vec<_>>().join(" ")),
            "translate" => {
                let (s, from, to) = (str_arg(0), str_arg(1), str_arg(2));
                let from: Vec<char> = from.chars().collect();
                let to: Vec<char> = to.chars().collect();
                Value::Str(
                    s.chars()
                        .filter_map(|c| match from.iter().position(|f| *f == c) {
                            Some(i) => to.get(i).copied(),
                            None => Some(c),
                        })
                        .collect(),
                )
            }
            "boolean" => Value::Bool(self.boolean(&arg(0))),
            "not" => Value::Bool(!self.boolean(&arg(0))),
            "true" => Value::Bool(true),
            "false" => Value::Bool(false),
            "number" => Value::Num(if args.is_empty() {
                string_to_number(&self.string_value(ctx.item))
            } else {
                self.number(&arg(0))
            }),
            "sum" => Value::Num(match arg(0) {
                Value::Nodes(n) => n.iter().map(|i| string_to_number(&self.string_value(*i))).sum(),
                _ => f64::NAN,
            }),
            "floor" => Value::Num(floor(self.number(&arg(0)))),
            "ceiling" => Value::Num(-floor(-self.number(&arg(0)))),
            "round" => Value::Num(round(self.number(&arg(0)))),
            _ => Value::Nodes(Vec::new()),
        }
    }
}

fn string_to_number(s: &str) -> f64 {
    let t = s.trim();
    let valid = !t.is_empty()
        && t.strip_prefix('-').unwrap_or(t).chars().all(|c| c.is_ascii_digit() || c == '.')
        && t.matches('.').count() <= 1
        && t != "-"
        && t != "."
        && t != "-.";
    if valid {
        t.parse().unwrap_or(f64::NAN)
    } else {
        f64::NAN
    }
}

fn number_to_string(n: f64) -> String {
    if n.is_nan() {
        "NaN".to_string()
    } else if n.is_infinite() {
        if n > 0.0 { "Infinity" } else { "-Infinity" }.to_string()
    } else if n == floor(n) && n.abs() < 1e15 {
        alloc::format!("{}", n as i64)
    } else {
        alloc::format!("{n}")
    }
}

/// Quotes `value` as an XPath string literal, falling back to `concat()`
/// when it holds both quote kinds.
pub fn quote(value: &str) -> String {
    if !value.contains('\'') {
        alloc::format!("'{value}'")
    } else if !value.contains('"') {
        alloc::format!("\"{value}\"")
    } else {
        let parts: Vec<String> = value.split('\'').map(|p| alloc::format!("'{p}'")).collect();
        alloc::format!("concat({})", parts.join(", \"'\", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAGE: &str = r#"<html><body><div id="mail" class="w"><label for="m">Mail</label><input id="m" name="mail"></div>
        <form id="f"><input type="radio" name="c" value="r"><input type="radio" name="c" value="b">
        <select name="s"><option value="1">One</option><option value="2">Two</option></select></form></body></html>"#;

    fn sel(x: &str) -> Vec<NodeId> {
        let doc = Document::parse(PAGE);
        XPath::parse(x).unwrap().select_elements(&doc, None).unwrap()
    }

    fn tags(x: &str) -> Vec<String> {
        let doc = Document::parse(PAGE);
        sel(x).into_iter().map(|n| doc.tag(n).unwrap().to_string()).collect()
    }

    #[test]
    fn common_locators() {
        assert_eq!(tags("//div[@id='mail']"), ["div"]);
        assert_eq!(tags("//input[@name=\"mail\"]"), ["input"]);
        assert_eq!(tags("//input[@type='radio' and @name='c']").len(), 2);
        assert_eq!(tags("(//input[@type='radio'])[2]"), ["input"]);
        assert_eq!(tags("//input[@type='radio'][last()]").len(), 1);
        assert_eq!(tags("//label[text()='Mail']/following-sibling::input"), ["input"]);
        assert_eq!(tags("//label[contains(normalize-space(.), 'Mai')]/.."), ["div"]);
        assert_eq!(tags("//select/option[. = 'Two']"), ["option"]);
        assert_eq!(tags("//form//*[@name]").len(), 3);
        assert_eq!(tags("//input[@id='m']/ancestor::*[1]"), ["div"]);
        assert_eq!(tags("//div | //form"), ["div", "form"]);
        assert_eq!(tags("//option[position() mod 2 = 0]").len(), 1);
        assert_eq!(tags("//option[@value * 2 = 4]").len(), 1);
        assert_eq!(tags("/html/body/div").len(), 1);
        assert_eq!(tags("//INPUT[@id='m']").len(), 1);
    }

    #[test]
    fn scalar_results() {
        let doc = Document::parse(PAGE);
        let v = XPath::parse("count(//input)").unwrap().evaluate(&doc, None);
        assert_eq!(v, Value::Num(3.0));
        let v = XPath::parse("substring('12345', 1.5, 2.6)").unwrap().evaluate(&doc, None);
        assert_eq!(v, Value::Str("234".into()));
        assert!(XPath::parse("count(//input)").unwrap().select_elements(&doc, None).is_err());
        assert!(XPath::parse("//input/@name").unwrap().select_elements(&doc, None).is_err());
    }

    #[test]
    fn syntax_errors() {
        for bad in ["", "//div[", "//div[@id='x'", "foo(", "//bogus::div", "//div]", "unknownfn()"] {
            assert!(XPath::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn quoting() {
        let doc = Document::parse(r#"<input name="it's &quot;x&quot;">"#);
        let x = alloc::format!("//input[@name={}]", quote("it's \"x\""));
        assert_eq!(XPath::parse(&x).unwrap().select_elements(&doc, None).unwrap().len(), 1);
    }
}
