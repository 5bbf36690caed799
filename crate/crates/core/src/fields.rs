//! Analytic scalar fields.
//!
//! A small expression language over the coordinates `x1..xd` with exact
//! symbolic differentiation. Coefficients, sources, strengths, boundary data
//! and reference solutions are all stated in this language, e.g.
//!
//! ```
//! use splitritz::fields::Expr;
//!
//! let kappa = Expr::parse("norm(x1,x2)^2+1", 2).unwrap();
//! assert_eq!(kappa.eval(&[0.0, 0.0]).unwrap(), 1.0);
//! let dk = kappa.diff(0);
//! assert!((dk.eval(&[1.0, 1.0]).unwrap() - 2.0).abs() < 1e-14);
//! ```
//!
//! Grammar (lowest to highest precedence, binary operators left associative):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' exponent)*
//! exponent:= int | '-' int | '(' '-'? int ')'
//! primary := number | 'pi' | var | func '(' expr ')' | 'norm' '(' var (',' var)* ')' | '(' expr ')'
//! ```
//!
//! Functions: `sin cos exp ln sqrt abs arctan sign`. `sign(0)` evaluates to 0.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("variable x{index} at position {pos} is out of range for dimension {dim}")]
    VariableOutOfRange {
        index: usize,
        dim: usize,
        pos: usize,
    },
    #[error("unknown function `{name}` at position {pos}")]
    UnknownFunction { name: String, pos: usize },
    #[error("domain error: {func} of {arg}")]
    Domain { func: &'static str, arg: f64 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("point has dimension {got}, expression expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Arctan,
    Sign,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Arctan => "arctan",
            Func::Sign => "sign",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "arctan" => Func::Arctan,
            "sign" => Func::Sign,
            _ => return None,
        })
    }

    fn apply(self, a: f64) -> Result<f64, ExprError> {
        Ok(match self {
            Func::Sin => a.sin(),
            Func::Cos => a.cos(),
            Func::Exp => a.exp(),
            Func::Ln => {
                if !(a > 0.0) {
                    return Err(ExprError::Domain { func: "ln", arg: a });
                }
                a.ln()
            }
            Func::Sqrt => {
                if !(a >= 0.0) {
                    return Err(ExprError::Domain {
                        func: "sqrt",
                        arg: a,
                    });
                }
                a.sqrt()
            }
            Func::Abs => a.abs(),
            Func::Arctan => a.atan(),
            Func::Sign => {
                if a > 0.0 {
                    1.0
                } else if a < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        })
    }
}

/// Expression tree. Variable indices are zero based (`x1` is `Var(0)`).
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, i32),
    Call(Func, Box<Node>),
    Norm(Vec<usize>),
}

// Simplifying constructors. They fold constants and drop 0/1 identities.

fn num(v: f64) -> Node {
    Node::Num(v)
}

fn is_num(n: &Node, v: f64) -> bool {
    matches!(n, Node::Num(c) if *c == v)
}

fn neg(a: Node) -> Node {
    match a {
        Node::Num(c) => num(-c),
        Node::Neg(inner) => *inner,
        other => Node::Neg(Box::new(other)),
    }
}

fn add(a: Node, b: Node) -> Node {
    match (a, b) {
        (Node::Num(x), Node::Num(y)) => num(x + y),
        (a, b) if is_num(&a, 0.0) => b,
        (a, b) if is_num(&b, 0.0) => a,
        (a, Node::Neg(b)) => sub(a, *b),
        (a, b) => Node::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Node, b: Node) -> Node {
    match (a, b) {
        (Node::Num(x), Node::Num(y)) => num(x - y),
        (a, b) if is_num(&b, 0.0) => a,
        (a, b) if is_num(&a, 0.0) => neg(b),
        (a, b) => Node::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Node, b: Node) -> Node {
    match (a, b) {
        (Node::Num(x), Node::Num(y)) => num(x * y),
        (a, _) if is_num(&a, 0.0) => num(0.0),
        (_, b) if is_num(&b, 0.0) => num(0.0),
        (a, b) if is_num(&a, 1.0) => b,
        (a, b) if is_num(&b, 1.0) => a,
        (a, b) if is_num(&a, -1.0) => neg(b),
        (a, b) if is_num(&b, -1.0) => neg(a),
        (a, b) => Node::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Node, b: Node) -> Node {
    match (a, b) {
        (Node::Num(x), Node::Num(y)) if y != 0.0 => num(x / y),
        (a, b) if is_num(&b, 1.0) => a,
        (a, b) if is_num(&a, 0.0) && !is_num(&b, 0.0) => num(0.0),
        (a, b) => Node::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Node, n: i32) -> Node {
    match (a, n) {
        (_, 0) => num(1.0),
        (a, 1) => a,
        (Node::Num(x), n) if x != 0.0 || n > 0 => num(x.powi(n)),
        (a, n) => Node::Pow(Box::new(a), n),
    }
}

fn call(f: Func, a: Node) -> Node {
    Node::Call(f, Box::new(a))
}

impl Node {
    fn eval(&self, x: &[f64]) -> Result<f64, ExprError> {
        Ok(match self {
            Node::Num(c) => *c,
            Node::Var(i) => x[*i],
            Node::Neg(a) => -a.eval(x)?,
            Node::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Node::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Node::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Node::Div(a, b) => {
                let num = a.eval(x)?;
                let den = b.eval(x)?;
                if den == 0.0 {
                    return Err(ExprError::DivisionByZero);
                }
                num / den
            }
            Node::Pow(a, n) => {
                let base = a.eval(x)?;
                if base == 0.0 && *n < 0 {
                    return Err(ExprError::DivisionByZero);
                }
                base.powi(*n)
            }
            Node::Call(f, a) => f.apply(a.eval(x)?)?,
            Node::Norm(vars) => vars.iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt(),
        })
    }

    fn diff(&self, i: usize) -> Node {
        match self {
            Node::Num(_) => num(0.0),
            Node::Var(j) => num(if *j == i { 1.0 } else { 0.0 }),
            Node::Neg(a) => neg(a.diff(i)),
            Node::Add(a, b) => add(a.diff(i), b.diff(i)),
            Node::Sub(a, b) => sub(a.diff(i), b.diff(i)),
            Node::Mul(a, b) => add(mul(a.diff(i), (**b).clone()), mul((**a).clone(), b.diff(i))),
            Node::Div(a, b) => {
                let da = a.diff(i);
                let db = b.diff(i);
                if is_num(&db, 0.0) {
                    div(da, (**b).clone())
                } else {
                    div(
                        sub(mul(da, (**b).clone()), mul((**a).clone(), db)),
                        pow((**b).clone(), 2),
                    )
                }
            }
            Node::Pow(a, n) => mul(mul(num(*n as f64), pow((**a).clone(), n - 1)), a.diff(i)),
            Node::Call(f, a) => {
                let da = a.diff(i);
                if is_num(&da, 0.0) {
                    return num(0.0);
                }
                let a = (**a).clone();
                let outer = match f {
                    Func::Sin => call(Func::Cos, a),
                    Func::Cos => neg(call(Func::Sin, a)),
                    Func::Exp => call(Func::Exp, a),
                    Func::Ln => return div(da, a),
                    Func::Sqrt => return div(da, mul(num(2.0), call(Func::Sqrt, a))),
                    Func::Abs => call(Func::Sign, a),
                    Func::Arctan => return div(da, add(num(1.0), pow(a, 2))),
                    Func::Sign => return num(0.0),
                };
                mul(outer, da)
            }
            Node::Norm(vars) => {
                if vars.contains(&i) {
                    div(Node::Var(i), Node::Norm(vars.clone()))
                } else {
                    num(0.0)
                }
            }
        }
    }

    fn max_var(&self) -> Option<usize> {
        match self {
            Node::Num(_) => None,
            Node::Var(i) => Some(*i),
            Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => a.max_var(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.max_var().max(b.max_var())
            }
            Node::Norm(v) => v.iter().copied().max(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Node::Add(..) | Node::Sub(..) => 1,
            Node::Mul(..) | Node::Div(..) => 2,
            Node::Neg(_) => 3,
            Node::Num(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => 3,
            Node::Pow(..) => 4,
            _ => 5,
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let child = |f: &mut fmt::Formatter<'_>, n: &Node, paren: bool| -> fmt::Result {
            if paren {
                write!(f, "(")?;
                n.write(f)?;
                write!(f, ")")
            } else {
                n.write(f)
            }
        };
        match self {
            Node::Num(c) => write_number(f, *c),
            Node::Var(i) => write!(f, "x{}", i + 1),
            Node::Neg(a) => {
                write!(f, "-")?;
                child(f, a, a.precedence() < 3)
            }
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                let (op, p) = match self {
                    Node::Add(..) => ("+", 1),
                    Node::Sub(..) => ("-", 1),
                    Node::Mul(..) => ("*", 2),
                    _ => ("/", 2),
                };
                child(f, a, a.precedence() < p)?;
                write!(f, "{op}")?;
                child(f, b, b.precedence() <= p)
            }
            Node::Pow(a, n) => {
                child(f, a, a.precedence() < 5)?;
                if *n < 0 {
                    write!(f, "^({n})")
                } else {
                    write!(f, "^{n}")
                }
            }
            Node::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.write(f)?;
                write!(f, ")")
            }
            Node::Norm(vars) => {
                write!(f, "norm(")?;
                for (k, v) in vars.iter().enumerate() {
                    if k > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "x{}", v + 1)?;
                }
                write!(f, ")")
            }
        }
    }
}

fn write_number(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    // `{:?}` is the shortest representation that parses back to the same bits.
    let s = format!("{c:?}");
    let s = s.strip_suffix(".0").unwrap_or(&s);
    f.write_str(s)
}

/// A parsed field together with its ambient dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    dim: usize,
}

impl Expr {
    pub fn parse(src: &str, dim: usize) -> Result<Expr, ExprError> {
        let root = Parser::new(src, dim).parse()?;
        Ok(Expr { root, dim })
    }

    /// Wrap an already built tree. Fails if it references a variable beyond `dim`.
    pub fn from_node(root: Node, dim: usize) -> Result<Expr, ExprError> {
        if let Some(i) = root.max_var() {
            if i >= dim {
                return Err(ExprError::VariableOutOfRange {
                    index: i + 1,
                    dim,
                    pos: 0,
                });
            }
        }
        Ok(Expr { root, dim })
    }

    pub fn constant(value: f64, dim: usize) -> Expr {
        Expr {
            root: num(value),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node(&self) -> &Node {
        &self.root
    }

    /// Constant value if the tree is a single literal.
    pub fn as_constant(&self) -> Option<f64> {
        match self.root {
            Node::Num(c) => Some(c),
            _ => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, ExprError> {
        if x.len() != self.dim {
            return Err(ExprError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        self.root.eval(x)
    }

    /// Partial derivative with respect to coordinate `i` (zero based).
    pub fn diff(&self, i: usize) -> Expr {
        assert!(
            i < self.dim,
            "coordinate {i} out of range for dimension {}",
            self.dim
        );
        Expr {
            root: self.root.diff(i),
            dim: self.dim,
        }
    }

    pub fn gradient(&self) -> Vec<Expr> {
        (0..self.dim).map(|i| self.diff(i)).collect()
    }

    pub fn laplacian(&self) -> Expr {
        let root = (0..self.dim)
            .map(|i| self.root.diff(i).diff(i))
            .fold(num(0.0), add);
        Expr {
            root,
            dim: self.dim,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.write(f)
    }
}

/// A field together with its symbolic gradient and Laplacian.
#[derive(Debug, Clone)]
pub struct DiffField {
    pub value: Expr,
    pub grad: Vec<Expr>,
    pub laplacian: Expr,
}

impl DiffField {
    pub fn new(value: Expr) -> DiffField {
        let grad = value.gradient();
        let laplacian = value.laplacian();
        DiffField {
            value,
            grad,
            laplacian,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.value.as_constant().is_some()
    }

    pub fn eval_grad(&self, x: &[f64], out: &mut [f64]) -> Result<(), ExprError> {
        for (o, g) in out.iter_mut().zip(&self.grad) {
            *o = g.eval(x)?;
        }
        Ok(())
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, dim: usize) -> Self {
        Parser {
            src: src.as_bytes(),
            pos: 0,
            dim,
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ExprError> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected `{}`", c as char))
        }
    }

    fn parse(mut self) -> Result<Node, ExprError> {
        if self.peek().is_none() {
            return self.err("empty expression");
        }
        let node = self.expr()?;
        if self.peek().is_some() {
            return self.err("unexpected trailing input");
        }
        Ok(node)
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                let rhs = self.term()?;
                lhs = Node::Add(Box::new(lhs), Box::new(rhs));
            } else if self.eat(b'-') {
                let rhs = self.term()?;
                lhs = Node::Sub(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                let rhs = self.unary()?;
                lhs = Node::Mul(Box::new(lhs), Box::new(rhs));
            } else if self.eat(b'/') {
                let rhs = self.unary()?;
                lhs = Node::Div(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat(b'-') {
            let inner = self.unary()?;
            // A negated literal is stored as a negative literal.
            return Ok(match inner {
                Node::Num(c) => Node::Num(-c),
                other => Node::Neg(Box::new(other)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let mut base = self.primary()?;
        while self.eat(b'^') {
            let n = self.exponent()?;
            base = Node::Pow(Box::new(base), n);
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<i32, ExprError> {
        let paren = self.eat(b'(');
        let negative = self.eat(b'-');
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected integer exponent");
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'.' | b'e' | b'E') {
            return self.err("exponent must be an integer");
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let mut n: i32 = match text.parse() {
            Ok(n) => n,
            Err(_) => {
                self.pos = start;
                return self.err("exponent too large");
            }
        };
        if negative {
            n = -n;
        }
        if paren {
            self.expect(b')')?;
        }
        Ok(n)
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            None => self.err("unexpected end of input"),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(b')')?;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => self.err(format!("unexpected character `{}`", c as char)),
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut count = digits(self);
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            count += digits(self);
        }
        if count == 0 {
            return self.err("malformed number");
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
                return self.err("malformed exponent in number");
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match text.parse::<f64>() {
            Ok(v) => Ok(Node::Num(v)),
            Err(_) => {
                self.pos = start;
                self.err("malformed number")
            }
        }
    }

    fn ident(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        if name == "pi" {
            return Ok(Node::Num(std::f64::consts::PI));
        }
        if let Some(idx) = self.variable(name, start)? {
            return Ok(Node::Var(idx));
        }
        if name == "norm" {
            self.expect(b'(')?;
            let mut vars = Vec::new();
            loop {
                self.skip_ws();
                let vstart = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let vname = std::str::from_utf8(&self.src[vstart..self.pos]).unwrap();
                match self.variable(vname, vstart)? {
                    Some(i) => vars.push(i),
                    None => {
                        self.pos = vstart;
                        return self.err("norm() takes a list of variables");
                    }
                }
                if self.eat(b')') {
                    break;
                }
                self.expect(b',')?;
            }
            return Ok(Node::Norm(vars));
        }
        let func = Func::from_name(name).ok_or_else(|| ExprError::UnknownFunction {
            name: name.to_string(),
            pos: start,
        })?;
        self.expect(b'(')?;
        let arg = self.expr()?;
        self.expect(b')')?;
        Ok(Node::Call(func, Box::new(arg)))
    }

    fn variable(&self, name: &str, pos: usize) -> Result<Option<usize>, ExprError> {
        let Some(rest) = name.strip_prefix('x') else {
            return Ok(None);
        };
        if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
            return Ok(None);
        }
        let index: usize = rest.parse().map_err(|_| ExprError::Syntax {
            pos,
            msg: "bad variable index".into(),
        })?;
        if index == 0 || index > self.dim {
            return Err(ExprError::VariableOutOfRange {
                index,
                dim: self.dim,
                pos,
            });
        }
        Ok(Some(index - 1))
    }
}
