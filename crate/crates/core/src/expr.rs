//! A small arithmetic expression language for user-defined maps.
//!
//! Grammar (whitespace insignificant, `^` right-associative, unary minus
//! binding looser than `^` so `-x^2` means `-(x^2)`):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | 'x' | 'x'K | '(' expr ')' | func '(' expr (',' expr)* ')'
//! func   := sin | cos | exp | tanh | abs | sqrt | min | max
//! ```
//!
//! Every parse or evaluation failure carries the byte offset of the offending
//! token or node. There is no implicit multiplication: `2x` is an error.

use crate::{Error, Result};

/// Parsed expression node, annotated with its source byte offset.
#[derive(Clone, Debug)]
pub struct ExprAst {
    pub node: ExprNode,
    pub offset: usize,
}

/// Structural equality ignores source offsets.
impl PartialEq for ExprAst {
    fn eq(&self, other: &Self) -> bool {
        self.node == other.node
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprNode {
    Constant(f64),
    /// Zero-based variable index; `x` is index 0, `x3` is index 2.
    Variable(usize),
    Neg(Box<ExprAst>),
    Binary {
        op: BinOp,
        left: Box<ExprAst>,
        right: Box<ExprAst>,
    },
    Call {
        func: Func,
        args: Vec<ExprAst>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Tanh,
    Abs,
    Sqrt,
    Min,
    Max,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Tanh => "tanh",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "tanh" => Func::Tanh,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }
}

/// Parses a single expression for maps of the given dimension.
pub fn parse_expression(src: &str, dim: usize) -> Result<ExprAst> {
    if src.trim().is_empty() {
        return Err(Error::Parse {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let mut parser = Parser::new(src)?;
    let ast = parser.expr()?;
    parser.expect_eof()?;
    check_variables(&ast, dim)?;
    Ok(ast)
}

/// Parses `d` comma-separated component expressions; the dimension is the
/// component count and every variable index must stay within it.
pub fn parse_map_components(src: &str) -> Result<Vec<ExprAst>> {
    if src.trim().is_empty() {
        return Err(Error::Parse {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let mut parser = Parser::new(src)?;
    let mut components = vec![parser.expr()?];
    while parser.peek_kind() == TokKind::Comma {
        parser.bump();
        components.push(parser.expr()?);
    }
    parser.expect_eof()?;
    let dim = components.len();
    for c in &components {
        check_variables(c, dim)?;
    }
    Ok(components)
}

fn check_variables(ast: &ExprAst, dim: usize) -> Result<()> {
    match &ast.node {
        ExprNode::Constant(_) => Ok(()),
        ExprNode::Variable(idx) => {
            if *idx >= dim {
                Err(Error::Parse {
                    offset: ast.offset,
                    message: format!("variable x{} exceeds dimension {dim}", idx + 1),
                })
            } else {
                Ok(())
            }
        }
        ExprNode::Neg(inner) => check_variables(inner, dim),
        ExprNode::Binary { left, right, .. } => {
            check_variables(left, dim)?;
            check_variables(right, dim)
        }
        ExprNode::Call { args, .. } => {
            for a in args {
                check_variables(a, dim)?;
            }
            Ok(())
        }
    }
}

/// Evaluates an expression at a point given as a coordinate slice.
///
/// Domain failures (division by zero, square root of a negative, non-finite
/// intermediate results) are reported with the offset of the offending node.
pub fn eval_ast(ast: &ExprAst, x: &[f64]) -> Result<f64> {
    let value = match &ast.node {
        ExprNode::Constant(c) => *c,
        ExprNode::Variable(idx) => {
            if *idx >= x.len() {
                return Err(Error::Eval {
                    offset: ast.offset,
                    message: format!("variable x{} exceeds point dimension {}", idx + 1, x.len()),
                });
            }
            x[*idx]
        }
        ExprNode::Neg(inner) => -eval_ast(inner, x)?,
        ExprNode::Binary { op, left, right } => {
            let l = eval_ast(left, x)?;
            let r = eval_ast(right, x)?;
            match op {
                BinOp::Add => l + r,
                BinOp::Sub => l - r,
                BinOp::Mul => l * r,
                BinOp::Div => {
                    if r == 0.0 {
                        return Err(Error::Eval {
                            offset: ast.offset,
                            message: "division by zero".into(),
                        });
                    }
                    l / r
                }
                BinOp::Pow => l.powf(r),
            }
        }
        ExprNode::Call { func, args } => {
            let a0 = eval_ast(&args[0], x)?;
            match func {
                Func::Sin => a0.sin(),
                Func::Cos => a0.cos(),
                Func::Exp => a0.exp(),
                Func::Tanh => a0.tanh(),
                Func::Abs => a0.abs(),
                Func::Sqrt => {
                    if a0 < 0.0 {
                        return Err(Error::Eval {
                            offset: ast.offset,
                            message: format!("square root of negative value {a0}"),
                        });
                    }
                    a0.sqrt()
                }
                Func::Min => a0.min(eval_ast(&args[1], x)?),
                Func::Max => a0.max(eval_ast(&args[1], x)?),
            }
        }
    };
    if !value.is_finite() {
        return Err(Error::Eval {
            offset: ast.offset,
            message: format!("non-finite result {value}"),
        });
    }
    Ok(value)
}

/// Renders the expression so that re-parsing yields a structurally identical
/// tree (parenthesizing by precedence).
pub fn pretty_print(ast: &ExprAst) -> String {
    fn prec(node: &ExprNode) -> u8 {
        match node {
            ExprNode::Binary { op: BinOp::Add, .. } | ExprNode::Binary { op: BinOp::Sub, .. } => 1,
            ExprNode::Binary { op: BinOp::Mul, .. } | ExprNode::Binary { op: BinOp::Div, .. } => 2,
            ExprNode::Neg(_) => 3,
            ExprNode::Binary { op: BinOp::Pow, .. } => 4,
            _ => 5,
        }
    }
    fn wrap(child: &ExprAst, min_prec: u8, out: &mut String) {
        if prec(&child.node) < min_prec {
            out.push('(');
            render(child, out);
            out.push(')');
        } else {
            render(child, out);
        }
    }
    fn render(ast: &ExprAst, out: &mut String) {
        match &ast.node {
            ExprNode::Constant(c) => out.push_str(&format!("{c}")),
            ExprNode::Variable(idx) => out.push_str(&format!("x{}", idx + 1)),
            ExprNode::Neg(inner) => {
                out.push('-');
                wrap(inner, 3, out);
            }
            ExprNode::Binary { op, left, right } => match op {
                BinOp::Add | BinOp::Sub => {
                    wrap(left, 1, out);
                    out.push(if *op == BinOp::Add { '+' } else { '-' });
                    wrap(right, 2, out);
                }
                BinOp::Mul | BinOp::Div => {
                    wrap(left, 2, out);
                    out.push(if *op == BinOp::Mul { '*' } else { '/' });
                    wrap(right, 3, out);
                }
                BinOp::Pow => {
                    wrap(left, 5, out);
                    out.push('^');
                    wrap(right, 3, out);
                }
            },
            ExprNode::Call { func, args } => {
                out.push_str(func.name());
                out.push('(');
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    render(a, out);
                }
                out.push(')');
            }
        }
    }
    let mut out = String::new();
    render(ast, &mut out);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum TokKind {
    Number,
    Ident,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    kind: TokKind,
    offset: usize,
    number: f64,
    text: String,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self> {
        Ok(Parser {
            tokens: lex(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_kind(&self) -> TokKind {
        self.tokens[self.pos].kind
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect_eof(&self) -> Result<()> {
        let t = self.peek();
        if t.kind != TokKind::Eof {
            return Err(Error::Parse {
                offset: t.offset,
                message: format!("trailing tokens starting at `{}`", t.text),
            });
        }
        Ok(())
    }

    fn expect(&mut self, kind: TokKind, what: &str) -> Result<Token> {
        let t = self.peek().clone();
        if t.kind != kind {
            return Err(Error::Parse {
                offset: t.offset,
                message: format!("expected {what}, found `{}`", t.text),
            });
        }
        Ok(self.bump())
    }

    fn expr(&mut self) -> Result<ExprAst> {
        let mut left = self.term()?;
        loop {
            let kind = self.peek_kind();
            let op = match kind {
                TokKind::Plus => BinOp::Add,
                TokKind::Minus => BinOp::Sub,
                _ => break,
            };
            let tok = self.bump();
            let right = self.term()?;
            left = ExprAst {
                offset: tok.offset,
                node: ExprNode::Binary {
                    op,
                    left: Box::new(left),
                    right: Box::new(right),
                },
            };
        }
        Ok(left)
    }

    fn term(&mut self) -> Result<ExprAst> {
        let mut left = self.unary()?;
        loop {
            let kind = self.peek_kind();
            let op = match kind {
                TokKind::Star => BinOp::Mul,
                TokKind::Slash => BinOp::Div,
                _ => break,
            };
            let tok = self.bump();
            let right = self.unary()?;
            left = ExprAst {
                offset: tok.offset,
                node: ExprNode::Binary {
                    op,
                    left: Box::new(left),
                    right: Box::new(right),
                },
            };
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<ExprAst> {
        if self.peek_kind() == TokKind::Minus {
            let tok = self.bump();
            let inner = self.unary()?;
            return Ok(ExprAst {
                offset: tok.offset,
                node: ExprNode::Neg(Box::new(inner)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<ExprAst> {
        let base = self.atom()?;
        if self.peek_kind() == TokKind::Caret {
            let tok = self.bump();
            // Right-associative; the exponent may itself start with '-'.
            let exponent = self.unary()?;
            return Ok(ExprAst {
                offset: tok.offset,
                node: ExprNode::Binary {
                    op: BinOp::Pow,
                    left: Box::new(base),
                    right: Box::new(exponent),
                },
            });
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<ExprAst> {
        let t = self.peek().clone();
        match t.kind {
            TokKind::Number => {
                self.bump();
                Ok(ExprAst {
                    offset: t.offset,
                    node: ExprNode::Constant(t.number),
                })
            }
            TokKind::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(TokKind::RParen, "closing parenthesis")?;
                Ok(inner)
            }
            TokKind::Ident => {
                self.bump();
                if let Some(idx) = variable_index(&t.text) {
                    return Ok(ExprAst {
                        offset: t.offset,
                        node: ExprNode::Variable(idx),
                    });
                }
                if let Some(func) = Func::from_name(&t.text) {
                    self.expect(TokKind::LParen, "argument list")?;
                    let mut args = vec![self.expr()?];
                    while self.peek_kind() == TokKind::Comma {
                        self.bump();
                        args.push(self.expr()?);
                    }
                    self.expect(TokKind::RParen, "closing parenthesis")?;
                    if args.len() != func.arity() {
                        return Err(Error::Parse {
                            offset: t.offset,
                            message: format!(
                                "{} expects {} argument(s), got {}",
                                func.name(),
                                func.arity(),
                                args.len()
                            ),
                        });
                    }
                    return Ok(ExprAst {
                        offset: t.offset,
                        node: ExprNode::Call { func, args },
                    });
                }
                Err(Error::Parse {
                    offset: t.offset,
                    message: format!("unknown identifier `{}`", t.text),
                })
            }
            _ => Err(Error::Parse {
                offset: t.offset,
                message: format!("expected a value, found `{}`", t.text),
            }),
        }
    }
}

fn variable_index(text: &str) -> Option<usize> {
    if text == "x" {
        return Some(0);
    }
    let rest = text.strip_prefix('x')?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let k: usize = rest.parse().ok()?;
    if k == 0 {
        return None;
    }
    Some(k - 1)
}

fn lex(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0usize;
    while i < bytes.len() {
        let b = bytes[i];
        if b.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let offset = i;
        let simple = match b {
            b'+' => Some(TokKind::Plus),
            b'-' => Some(TokKind::Minus),
            b'*' => Some(TokKind::Star),
            b'/' => Some(TokKind::Slash),
            b'^' => Some(TokKind::Caret),
            b'(' => Some(TokKind::LParen),
            b')' => Some(TokKind::RParen),
            b',' => Some(TokKind::Comma),
            _ => None,
        };
        if let Some(kind) = simple {
            tokens.push(Token {
                kind,
                offset,
                number: 0.0,
                text: (b as char).to_string(),
            });
            i += 1;
            continue;
        }
        if b.is_ascii_digit() {
            let mut j = i;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if j < bytes.len() && bytes[j] == b'.' {
                j += 1;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
            }
            if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                let mut k = j + 1;
                if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                    k += 1;
                }
                if k < bytes.len() && bytes[k].is_ascii_digit() {
                    while k < bytes.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                    }
                    j = k;
                }
            }
            let text = &src[i..j];
            let number: f64 = text.parse().map_err(|_| Error::Parse {
                offset,
                message: format!("bad number literal `{text}`"),
            })?;
            if !number.is_finite() {
                return Err(Error::Parse {
                    offset,
                    message: format!("number literal `{text}` out of range"),
                });
            }
            tokens.push(Token {
                kind: TokKind::Number,
                offset,
                number,
                text: text.to_string(),
            });
            i = j;
            continue;
        }
        if b.is_ascii_alphabetic() || b == b'_' {
            let mut j = i;
            while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                j += 1;
            }
            tokens.push(Token {
                kind: TokKind::Ident,
                offset,
                number: 0.0,
                text: src[i..j].to_string(),
            });
            i = j;
            continue;
        }
        return Err(Error::Parse {
            offset,
            message: format!("unexpected character `{}`", &src[i..].chars().next().unwrap()),
        });
    }
    tokens.push(Token {
        kind: TokKind::Eof,
        offset: bytes.len(),
        number: 0.0,
        text: "end of input".into(),
    });
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn eval1(src: &str, x: f64) -> f64 {
        let ast = parse_expression(src, 1).unwrap();
        eval_ast(&ast, &[x]).unwrap()
    }

    #[test]
    fn cubic_map_fixed_points() {
        for x in [0.0, 1.0, -1.0] {
            assert_abs_diff_eq!(eval1("x - x^3", x), 0.0);
        }
        assert_abs_diff_eq!(eval1("x - x^3", 2.0), -6.0);
    }

    #[test]
    fn power_is_right_associative() {
        assert_abs_diff_eq!(eval1("2^3^2", 0.0), 512.0);
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        assert_abs_diff_eq!(eval1("-x^2", 3.0), -9.0);
        assert_abs_diff_eq!(eval1("(-x)^2", 3.0), 9.0);
    }

    #[test]
    fn constants_and_functions() {
        assert_abs_diff_eq!(eval1("5", 123.0), 5.0);
        assert_abs_diff_eq!(eval1("tanh(3*x)", 0.0), 0.0);
        assert_abs_diff_eq!(eval1("min(x, 2)", 5.0), 2.0);
        assert_abs_diff_eq!(eval1("max(-1, x)", -4.0), -1.0);
        assert_abs_diff_eq!(eval1("2^-1", 0.0), 0.5);
    }

    #[test]
    fn errors_carry_offsets() {
        match parse_expression("x + foo", 1) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse_expression("min(x)", 1) {
            Err(Error::Parse { .. }) => {}
            other => panic!("expected arity error, got {other:?}"),
        }
        match parse_expression("(x + 1", 1) {
            Err(Error::Parse { .. }) => {}
            other => panic!("expected paren error, got {other:?}"),
        }
        match parse_expression("x 2", 1) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("expected trailing-token error, got {other:?}"),
        }
        match parse_expression("x2", 1) {
            Err(Error::Parse { .. }) => {}
            other => panic!("expected dimension error, got {other:?}"),
        }
    }

    #[test]
    fn eval_domain_errors() {
        let ast = parse_expression("sqrt(x)", 1).unwrap();
        assert!(eval_ast(&ast, &[-1.0]).is_err());
        let ast = parse_expression("1 / x", 1).unwrap();
        assert!(eval_ast(&ast, &[0.0]).is_err());
        let ast = parse_expression("exp(x)", 1).unwrap();
        assert!(eval_ast(&ast, &[1e4]).is_err()); // overflow reported, not inf
    }

    #[test]
    fn map_components_infer_dimension() {
        let comps = parse_map_components("x2, x1").unwrap();
        assert_eq!(comps.len(), 2);
        assert!(parse_map_components("x2").is_err()); // x2 needs dim >= 2
        let comps = parse_map_components("min(x1, x2), x1 * x2").unwrap();
        assert_eq!(comps.len(), 2);
    }

    #[test]
    fn pretty_print_round_trips_structurally() {
        let srcs = ["x - x^3", "-x^2", "2^3^2", "min(x, 1) * max(x, -1)", "-(x + 1) / (x - 2)"];
        for src in srcs {
            let ast = parse_expression(src, 1).unwrap();
            let printed = pretty_print(&ast);
            let reparsed = parse_expression(&printed, 1).unwrap();
            assert_eq!(ast, reparsed, "round trip failed for `{src}` -> `{printed}`");
        }
    }
}
