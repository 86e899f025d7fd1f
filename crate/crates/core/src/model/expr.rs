//! A small expression language for user-defined reaction functionals.
//!
//! An expression reads the history segment only through point evaluations
//! `u(s)` with a constant lag `s ∈ [-h, 0]`, so `u(0)*(1 - u(-h))` is the
//! delayed KPP-Fisher nonlinearity. Supported syntax:
//!
//! * numbers, named parameters (always including `h`) and `pi`
//! * `+ - * / ^`, unary minus and parentheses
//! * `exp ln sqrt abs` and the binary `max min pow`

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Exp,
    Ln,
    Sqrt,
    Abs,
    Max,
    Min,
    Pow,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "exp" => (Func::Exp, 1),
            "ln" | "log" => (Func::Ln, 1),
            "sqrt" => (Func::Sqrt, 1),
            "abs" => (Func::Abs, 1),
            "max" => (Func::Max, 2),
            "min" => (Func::Min, 2),
            "pow" => (Func::Pow, 2),
            _ => return None,
        })
    }
}

/// A compiled expression. Point evaluations are numbered in order of first
/// appearance; [`Expr::probes`] lists their lags.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    probes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Probe(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

impl Expr {
    /// Parses `src`. `params` supplies named constants; `h` is always bound.
    pub fn compile(src: &str, h: f64, params: &BTreeMap<String, f64>) -> Result<Self> {
        let tokens = tokenize(src)?;
        let mut parser = Parser { tokens, pos: 0, h, params, probes: Vec::new() };
        let root = parser.expr()?;
        if parser.pos != parser.tokens.len() {
            return Err(Error::Expression(format!("unexpected trailing input at token {}", parser.pos)));
        }
        Ok(Self { root, probes: parser.probes })
    }

    pub fn probes(&self) -> &[f64] {
        &self.probes
    }

    /// Evaluates with `values[j]` standing for `u(probes[j])`.
    pub fn eval(&self, values: &[f64]) -> f64 {
        eval_node(&self.root, values)
    }
}

fn eval_node(node: &Node, values: &[f64]) -> f64 {
    match node {
        Node::Const(v) => *v,
        Node::Probe(j) => values[*j],
        Node::Neg(a) => -eval_node(a, values),
        Node::Bin(op, a, b) => {
            let (x, y) = (eval_node(a, values), eval_node(b, values));
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => x / y,
                BinOp::Pow => x.powf(y),
            }
        }
        Node::Call(f, args) => {
            let x = eval_node(&args[0], values);
            match f {
                Func::Exp => x.exp(),
                Func::Ln => x.ln(),
                Func::Sqrt => x.sqrt(),
                Func::Abs => x.abs(),
                Func::Max => x.max(eval_node(&args[1], values)),
                Func::Min => x.min(eval_node(&args[1], values)),
                Func::Pow => x.powf(eval_node(&args[1], values)),
            }
        }
    }
}

fn has_probe(node: &Node) -> bool {
    match node {
        Node::Const(_) => false,
        Node::Probe(_) => true,
        Node::Neg(a) => has_probe(a),
        Node::Bin(_, a, b) => has_probe(a) || has_probe(b),
        Node::Call(_, args) => args.iter().any(has_probe),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        match ch {
            c if c.is_whitespace() => i += 1,
            '(' => {
                out.push(Token::LParen);
                i += 1;
            }
            ')' => {
                out.push(Token::RParen);
                i += 1;
            }
            ',' => {
                out.push(Token::Comma);
                i += 1;
            }
            '+' | '-' | '*' | '/' | '^' => {
                out.push(Token::Op(ch));
                i += 1;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                // exponent part: 1e-3, 2.5E+4
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let v = text.parse::<f64>().map_err(|_| Error::Expression(format!("bad number '{text}'")))?;
                out.push(Token::Num(v));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Token::Ident(chars[start..i].iter().collect()));
            }
            other => return Err(Error::Expression(format!("unexpected character '{other}'"))),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    h: f64,
    params: &'a BTreeMap<String, f64>,
    probes: Vec<f64>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Token) -> Result<()> {
        match self.next() {
            Some(t) if t == want => Ok(()),
            other => Err(Error::Expression(format!("expected {want:?}, found {other:?}"))),
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if op == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if op == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        if let Some(Token::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if let Some(Token::Op('+')) = self.peek() {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.next() {
            Some(Token::Num(v)) => Ok(Node::Const(v)),
            Some(Token::LParen) => {
                let e = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(e)
            }
            Some(Token::Ident(name)) => {
                if let Some(Token::LParen) = self.peek() {
                    self.pos += 1;
                    self.call(&name)
                } else {
                    self.constant(&name)
                }
            }
            other => Err(Error::Expression(format!("unexpected token {other:?}"))),
        }
    }

    fn constant(&self, name: &str) -> Result<Node> {
        match name {
            "h" => Ok(Node::Const(self.h)),
            "pi" => Ok(Node::Const(std::f64::consts::PI)),
            _ => self
                .params
                .get(name)
                .map(|v| Node::Const(*v))
                .ok_or_else(|| Error::Expression(format!("unknown identifier '{name}'"))),
        }
    }

    fn call(&mut self, name: &str) -> Result<Node> {
        let mut args = vec![self.expr()?];
        while let Some(Token::Comma) = self.peek() {
            self.pos += 1;
            args.push(self.expr()?);
        }
        self.expect(Token::RParen)?;

        if name == "u" {
            if args.len() != 1 || has_probe(&args[0]) {
                return Err(Error::Expression("u() takes one constant lag".into()));
            }
            let lag = eval_node(&args[0], &[]);
            if !(lag <= 1e-12 && lag >= -self.h - 1e-12) {
                return Err(Error::Expression(format!("lag {lag} outside [-h, 0] with h = {}", self.h)));
            }
            let lag = lag.clamp(-self.h, 0.0);
            let idx = match self.probes.iter().position(|p| *p == lag) {
                Some(i) => i,
                None => {
                    self.probes.push(lag);
                    self.probes.len() - 1
                }
            };
            return Ok(Node::Probe(idx));
        }

        let (func, arity) =
            Func::lookup(name).ok_or_else(|| Error::Expression(format!("unknown function '{name}'")))?;
        if args.len() != arity {
            return Err(Error::Expression(format!("{name} takes {arity} argument(s), got {}", args.len())));
        }
        Ok(Node::Call(func, args))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn compile(src: &str, h: f64) -> Expr {
        Expr::compile(src, h, &BTreeMap::new()).unwrap()
    }

    #[test]
    fn kpp_expression() {
        let e = compile("u(0)*(1-u(-h))", 2.0);
        assert_eq!(e.probes(), &[0.0, -2.0]);
        assert_eq!(e.eval(&[0.5, 0.0]), 0.5);
        assert_eq!(e.eval(&[0.5, 0.5]), 0.25);
    }

    #[test]
    fn precedence_and_power() {
        let e = compile("1 + 2*3^2 - -4/2", 0.0);
        assert_eq!(e.eval(&[]), 1.0 + 18.0 + 2.0);
        let e = compile("2^3^2", 0.0);
        assert_eq!(e.eval(&[]), 512.0);
        let e = compile("-2^2", 0.0);
        assert_eq!(e.eval(&[]), -4.0);
    }

    #[test]
    fn parameters_and_functions() {
        let mut params = BTreeMap::new();
        params.insert("p".to_string(), 2.0);
        let e = Expr::compile("-u(0) + p*u(-h)*exp(-u(-h))", 1.0, &params).unwrap();
        let k = 2f64.ln();
        assert!(e.eval(&[k, k]).abs() < 1e-15);
        let e = compile("max(u(0), 0.5) + min(1, 2) + pow(2, 1e1)", 0.0);
        assert_eq!(e.eval(&[0.1]), 0.5 + 1.0 + 1024.0);
    }

    #[test]
    fn repeated_lags_share_a_probe() {
        let e = compile("u(-h/2) * u(-0.5) + u(0)", 1.0);
        assert_eq!(e.probes(), &[-0.5, 0.0]);
    }

    #[test]
    fn rejects_bad_input() {
        let p = BTreeMap::new();
        assert!(Expr::compile("u(1)", 1.0, &p).is_err());
        assert!(Expr::compile("u(u(0))", 1.0, &p).is_err());
        assert!(Expr::compile("foo(1)", 1.0, &p).is_err());
        assert!(Expr::compile("q * 2", 1.0, &p).is_err());
        assert!(Expr::compile("(1 + 2", 1.0, &p).is_err());
        assert!(Expr::compile("1 2", 1.0, &p).is_err());
        assert!(Expr::compile("max(1)", 1.0, &p).is_err());
        assert!(Expr::compile("1 $ 2", 1.0, &p).is_err());
    }
}
