//! Line-oriented model file format.
//!
//! ```text
//! # comment
//! [dims] K=10 N=10 R=7 l=4
//! [domain] complex
//! [A] generic
//! [transform] f1 = id
//! [column] b_n = (x1 + x2*n)/(x3 + x4*n)
//! [column] b_3 = x1          # explicit row, overrides the template
//! [scaling_invariant] true
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::C64;

use super::column::ColumnModel;
use super::expr::{BinOp, Builtin, Expr};
use super::factor::{ASpec, Domain, FactorModel, ScalingDeclaration};
use super::transform::{Primitive, Transform};
use super::ModelError;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    /// 0-based byte offset within the parsed fragment.
    pos: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, (usize, String)> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| (start, format!("malformed number '{text}'")))?;
            out.push(Token { tok: Tok::Num(v), pos: start });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(src[start..i].to_string()), pos: start });
        } else if "+-*/^(),".contains(c) {
            out.push(Token { tok: Tok::Sym(c), pos: i });
            i += 1;
        } else {
            return Err((i, format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

/// Constant subexpressions are folded so that rendered complex literals
/// such as `(1.5 + 2.0*i)` parse back to a single constant.
fn fold(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
    if let (Expr::Const(a), Expr::Const(b)) = (&lhs, &rhs) {
        let v = match op {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => a / b,
        };
        if v.re.is_finite() && v.im.is_finite() {
            return Expr::Const(v);
        }
    }
    Expr::binary(op, lhs, rhs)
}

struct ExprParser {
    tokens: Vec<Token>,
    idx: usize,
    end: usize,
}

type PResult<T> = Result<T, (usize, String)>;

impl ExprParser {
    fn new(src: &str) -> PResult<Self> {
        Ok(Self { tokens: lex(src)?, idx: 0, end: src.len() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.idx).map(|t| &t.tok)
    }

    fn pos(&self) -> usize {
        self.tokens.get(self.idx).map_or(self.end, |t| t.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.idx += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> PResult<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err((self.pos(), format!("expected '{c}'")))
        }
    }

    fn finish(&self) -> PResult<()> {
        match self.tokens.get(self.idx) {
            None => Ok(()),
            Some(t) => Err((t.pos, "unexpected trailing input".into())),
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinOp::Add
            } else if self.eat('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            lhs = fold(op, lhs, self.term()?);
        }
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                BinOp::Mul
            } else if self.eat('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            lhs = fold(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat('-') {
            return Ok(match self.unary()? {
                Expr::Const(c) => Expr::Const(-c),
                e => Expr::Neg(Box::new(e)),
            });
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Expr> {
        let base = self.atom()?;
        if self.eat('^') {
            let at = self.pos();
            let exponent = self.unary()?;
            if exponent.max_var().is_some() {
                return Err((at, "exponent may only depend on the row token n".into()));
            }
            return Ok(Expr::pow(base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> PResult<Expr> {
        let at = self.pos();
        let tok = self.tokens.get(self.idx).cloned().ok_or((at, "unexpected end of expression".to_string()))?;
        self.idx += 1;
        match tok.tok {
            Tok::Num(v) => Ok(Expr::constant(v)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Sym(c) => Err((at, format!("unexpected '{c}'"))),
            Tok::Ident(name) => self.ident(&name, at),
        }
    }

    fn ident(&mut self, name: &str, at: usize) -> PResult<Expr> {
        match name {
            "n" => return Ok(Expr::Row),
            "i" => return Ok(Expr::Const(C64::new(0.0, 1.0))),
            _ => {}
        }
        if let Some(kind) = Builtin::from_name(name) {
            self.expect('(')?;
            let degree_at = self.pos();
            let degree = self.expr()?;
            if degree.max_var().is_some() {
                return Err((degree_at, format!("{name} degree may only depend on n")));
            }
            self.expect(',')?;
            let arg = self.expr()?;
            self.expect(')')?;
            return Ok(Expr::builtin(kind, degree, arg));
        }
        if let Some(digits) = name.strip_prefix('x') {
            if let Ok(j) = digits.parse::<usize>() {
                if j >= 1 && !digits.starts_with('0') {
                    return Ok(Expr::var(j));
                }
            }
        }
        Err((at, format!("unknown identifier '{name}'")))
    }
}

/// Parse a single expression in the row-template grammar.
pub fn parse_expr(src: &str) -> Result<Expr, ModelError> {
    parse_expr_at(src, 1, 1)
}

fn parse_expr_at(src: &str, line: usize, col0: usize) -> Result<Expr, ModelError> {
    let to_err = |(pos, message): (usize, String)| ModelError::Parse { line, column: col0 + pos, message };
    let mut p = ExprParser::new(src).map_err(to_err)?;
    let e = p.expr().map_err(to_err)?;
    p.finish().map_err(to_err)?;
    Ok(e)
}

fn constant_value(e: &Expr) -> Option<C64> {
    if e.max_var().is_some() || e.mentions_row() {
        return None;
    }
    let v = e.expand(0).ok()?;
    match v {
        super::expr::RatExpr::Const(c) => Some(c),
        _ => None,
    }
}

fn parse_primitive(src: &str, line: usize, col0: usize) -> Result<Primitive, ModelError> {
    let trimmed = src.trim();
    let lead = src.len() - src.trim_start().len();
    let col = col0 + lead;
    let (name, args) = match trimmed.find('(') {
        Some(open) => {
            if !trimmed.ends_with(')') {
                return Err(ModelError::Parse { line, column: col + trimmed.len(), message: "expected ')'".into() });
            }
            (trimmed[..open].trim(), Some((&trimmed[open + 1..trimmed.len() - 1], col + open + 1)))
        }
        None => (trimmed, None),
    };
    let constants = |args: Option<(&str, usize)>, want: usize| -> Result<Vec<C64>, ModelError> {
        let Some((text, at)) = args else {
            return Err(ModelError::Parse {
                line,
                column: col,
                message: format!("primitive '{name}' needs {want} argument(s)"),
            });
        };
        let mut out = Vec::new();
        let mut offset = 0;
        for piece in text.split(',') {
            let e = parse_expr_at(piece, line, at + offset)?;
            let v = constant_value(&e).ok_or_else(|| ModelError::Parse {
                line,
                column: at + offset,
                message: "primitive arguments must be constants".into(),
            })?;
            out.push(v);
            offset += piece.len() + 1;
        }
        if out.len() != want {
            return Err(ModelError::Parse {
                line,
                column: col,
                message: format!("primitive '{name}' needs {want} argument(s), got {}", out.len()),
            });
        }
        Ok(out)
    };
    let no_args = |p: Primitive| -> Result<Primitive, ModelError> {
        match args {
            None => Ok(p),
            Some(_) => {
                Err(ModelError::Parse { line, column: col, message: format!("primitive '{name}' takes no arguments") })
            }
        }
    };
    match name {
        "id" => no_args(Primitive::Identity),
        "tan_half" => no_args(Primitive::TanHalf),
        "cos" => no_args(Primitive::Cos),
        "sin" => no_args(Primitive::Sin),
        "exp" => match args {
            None => Ok(Primitive::Exp(C64::new(1.0, 0.0))),
            Some(_) => Ok(Primitive::Exp(constants(args, 1)?[0])),
        },
        "affine" => {
            let v = constants(args, 2)?;
            Ok(Primitive::Affine(v[0], v[1]))
        }
        other => Err(ModelError::UnknownPrimitive { line, column: col, name: other.to_string() }),
    }
}

#[derive(Default)]
struct Draft {
    dims: Option<(usize, usize, usize, usize)>,
    domain: Option<Domain>,
    transforms: BTreeMap<usize, (Primitive, usize)>,
    template: Option<Expr>,
    rows: BTreeMap<usize, (Expr, usize)>,
    scaling: Option<ScalingDeclaration>,
}

fn parse_dims(body: &str, line: usize, col0: usize) -> Result<(usize, usize, usize, usize), ModelError> {
    let mut vals: BTreeMap<&str, usize> = BTreeMap::new();
    let mut offset = 0;
    for piece in body.split_whitespace() {
        let at = col0 + body[offset..].find(piece).unwrap_or(0) + offset;
        offset = at - col0 + piece.len();
        let err = |message: String| ModelError::Parse { line, column: at, message };
        let (key, value) = piece.split_once('=').ok_or_else(|| err(format!("expected KEY=value, got '{piece}'")))?;
        if !matches!(key, "K" | "N" | "R" | "l") {
            return Err(err(format!("unknown dimension '{key}'")));
        }
        let v: usize = value.parse().map_err(|_| err(format!("dimension {key} must be a positive integer")))?;
        if v == 0 {
            return Err(err(format!("dimension {key} must be positive")));
        }
        if vals.insert(key, v).is_some() {
            return Err(err(format!("dimension {key} given twice")));
        }
    }
    let get = |k: &str| {
        vals.get(k).copied().ok_or_else(|| ModelError::Parse {
            line,
            column: col0,
            message: format!("[dims] is missing {k}"),
        })
    };
    Ok((get("K")?, get("N")?, get("R")?, get("l")?))
}

/// Parse a model file into a validated [`FactorModel`].
pub fn parse_model(text: &str) -> Result<FactorModel, ModelError> {
    let mut d = Draft::default();
    let mut first_column_line = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let lead = content.len() - content.trim_start().len();
        let content_trim = content.trim();
        if content_trim.is_empty() {
            continue;
        }
        let err = |column: usize, message: String| ModelError::Parse { line, column, message };
        if !content_trim.starts_with('[') {
            return Err(err(lead + 1, "expected a [section] header".into()));
        }
        let close = content_trim.find(']').ok_or_else(|| err(lead + 1, "unterminated section header".into()))?;
        let section = &content_trim[1..close];
        let body = &content_trim[close + 1..];
        let body_col = lead + close + 2 + (body.len() - body.trim_start().len());
        let body = body.trim();
        match section {
            "dims" => {
                if d.dims.is_some() {
                    return Err(err(lead + 1, "[dims] given twice".into()));
                }
                d.dims = Some(parse_dims(body, line, body_col)?);
            }
            "domain" => {
                d.domain = Some(match body {
                    "real" => Domain::Real,
                    "complex" => Domain::Complex,
                    other => return Err(err(body_col, format!("unknown domain '{other}'"))),
                })
            }
            "A" => {
                if body != "generic" {
                    return Err(err(body_col, format!("only '[A] generic' is supported in files, got '{body}'")));
                }
            }
            "transform" => {
                let (lhs, rhs) =
                    body.split_once('=').ok_or_else(|| err(body_col, "expected 'f<j> = <primitive>'".into()))?;
                let j: usize = lhs
                    .trim()
                    .strip_prefix('f')
                    .and_then(|s| s.parse().ok())
                    .filter(|&j| j >= 1)
                    .ok_or_else(|| err(body_col, format!("expected f<j>, got '{}'", lhs.trim())))?;
                let prim = parse_primitive(rhs, line, body_col + lhs.len() + 1)?;
                if d.transforms.insert(j, (prim, line)).is_some() {
                    return Err(err(body_col, format!("f{j} given twice")));
                }
            }
            "column" => {
                let (lhs, rhs) =
                    body.split_once('=').ok_or_else(|| err(body_col, "expected 'b_n = <expression>'".into()))?;
                let target = lhs.trim();
                let expr_col = body_col + lhs.len() + 1 + (rhs.len() - rhs.trim_start().len());
                let expr = parse_expr_at(rhs.trim(), line, expr_col)?;
                first_column_line.get_or_insert(line);
                match target.strip_prefix("b_") {
                    Some("n") => {
                        if d.template.replace(expr).is_some() {
                            return Err(err(body_col, "b_n template given twice".into()));
                        }
                    }
                    Some(idx) => {
                        let row: usize = idx
                            .parse()
                            .ok()
                            .filter(|&r| r >= 1)
                            .ok_or_else(|| err(body_col, format!("expected b_n or b_<row>, got '{target}'")))?;
                        if d.rows.insert(row, (expr, line)).is_some() {
                            return Err(err(body_col, format!("row b_{row} given twice")));
                        }
                    }
                    None => return Err(err(body_col, format!("expected b_n or b_<row>, got '{target}'"))),
                }
            }
            "scaling_invariant" => {
                d.scaling = Some(match body {
                    "true" => ScalingDeclaration::DeclaredTrue,
                    "false" => ScalingDeclaration::DeclaredFalse,
                    "unknown" => ScalingDeclaration::Unknown,
                    other => return Err(err(body_col, format!("expected true|false|unknown, got '{other}'"))),
                })
            }
            other => return Err(err(lead + 2, format!("unknown section [{other}]"))),
        }
    }

    let (k, n, r, l) =
        d.dims.ok_or(ModelError::Parse { line: 1, column: 1, message: "missing [dims] section".into() })?;
    if d.template.is_none() && d.rows.is_empty() {
        return Err(ModelError::Parse {
            line: text.lines().count().max(1),
            column: 1,
            message: "missing [column] section".into(),
        });
    }
    let mut coords = vec![Primitive::Identity; l];
    for (&j, &(prim, line)) in &d.transforms {
        if j > l {
            return Err(ModelError::DimensionMismatch(format!("line {line}: transform f{j} but l = {l}")));
        }
        coords[j - 1] = prim;
    }
    if let Some((&row, &(_, line))) = d.rows.iter().find(|(&row, _)| row > n) {
        return Err(ModelError::DimensionMismatch(format!("line {line}: row b_{row} but N = {n}")));
    }
    let rows = d.rows.into_iter().map(|(row, (e, _))| (row, e)).collect();
    let column = ColumnModel::new(n, l, d.template, rows, Transform::new(coords))?;
    FactorModel::new(
        k,
        r,
        d.domain.unwrap_or(Domain::Complex),
        ASpec::GenericDense,
        column,
        d.scaling.unwrap_or(ScalingDeclaration::Unknown),
    )
}

/// Render a model in the file format. Structured `A` has no file form.
pub fn serialize_model(model: &FactorModel) -> Result<String, ModelError> {
    if !matches!(model.a_spec(), ASpec::GenericDense) {
        return Err(ModelError::Unsupported("structured A specifications cannot be written to a model file".into()));
    }
    let cm = model.column();
    let mut out = String::new();
    let _ = writeln!(out, "[dims] K={} N={} R={} l={}", model.k(), model.n(), model.r(), model.l());
    let _ = writeln!(out, "[domain] {}", model.domain());
    let _ = writeln!(out, "[A] generic");
    for (j, p) in cm.transform().coords().iter().enumerate() {
        let _ = writeln!(out, "[transform] f{} = {}", j + 1, p);
    }
    if let Some(t) = cm.template() {
        let _ = writeln!(out, "[column] b_n = {t}");
    }
    for (row, e) in cm.overrides() {
        let _ = writeln!(out, "[column] b_{row} = {e}");
    }
    let _ = writeln!(out, "[scaling_invariant] {}", model.scaling());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const RATIONAL: &str = "\
# rational sources, p = q = 1
[dims] K=10 N=10 R=7 l=4
[domain] complex
[A] generic
[column] b_n = (x1 + x2*n)/(x3 + x4*n)
[scaling_invariant] true
";

    #[test]
    fn parses_rational_spec() {
        let m = parse_model(RATIONAL).unwrap();
        assert_eq!((m.k(), m.n(), m.r(), m.l()), (10, 10, 7, 4));
        assert_eq!(m.scaling(), ScalingDeclaration::DeclaredTrue);
        assert!(m.column().transform().is_identity());
        let row3 = parse_expr("x1 + 3*x2").unwrap();
        let x = [C64::new(0.5, 1.0), C64::new(-2.0, 0.25), C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let p = row3.expand(3).unwrap().eval(&x, 4, 1e-12).unwrap();
        let got = m.column().rows()[2].numerator.eval(&x, 4, 1e-12).unwrap();
        assert_eq!(p, got);
    }

    #[test]
    fn precedence_and_unary_minus() {
        let e = parse_expr("-x1^2 + 2*x1/4").unwrap();
        let v = e.expand(1).unwrap().eval(&[C64::new(3.0, 0.0)], 1, 1e-12).unwrap();
        assert_eq!(v, C64::new(-9.0 + 1.5, 0.0));
        let e = parse_expr("2^-1 * x1").unwrap();
        let v = e.expand(1).unwrap().eval(&[C64::new(3.0, 0.0)], 1, 1e-12).unwrap();
        assert_eq!(v, C64::new(1.5, 0.0));
    }

    #[test]
    fn unknown_primitive_is_reported() {
        let text = "[dims] K=2 N=3 R=1 l=1\n[transform] f1 = sinh\n[column] b_n = x1^n\n";
        match parse_model(text) {
            Err(ModelError::UnknownPrimitive { line, name, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(name, "sinh");
            }
            other => panic!("unexpected {other:?}"),
        }
        let msg = parse_model(text).unwrap_err().to_string();
        assert!(msg.contains("unknown primitive"), "{msg}");
    }

    #[test]
    fn syntax_errors_carry_location() {
        let text = "[dims] K=2 N=3 R=1 l=1\n[column] b_n = (x1 + )\n";
        match parse_model(text) {
            Err(ModelError::Parse { line, column, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(column, 22);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn transform_beyond_l_is_a_dimension_error() {
        let text = "[dims] K=2 N=3 R=1 l=1\n[transform] f2 = cos\n[column] b_n = x1\n";
        assert!(matches!(parse_model(text), Err(ModelError::DimensionMismatch(_))));
    }

    #[test]
    fn missing_sections() {
        assert!(parse_model("[column] b_n = x1\n").is_err());
        assert!(parse_model("[dims] K=1 N=2 R=1 l=1\n").is_err());
        assert!(parse_model("[dims] K=1 N=2 R=1\n[column] b_n = x1\n").is_err());
    }

    #[test]
    fn transform_parameters() {
        let text = "[dims] K=2 N=4 R=1 l=2\n[transform] f1 = exp(i)\n[transform] f2 = affine(1, -2.5)\n[column] b_n = x1^(n-1)*x2\n";
        let m = parse_model(text).unwrap();
        assert_eq!(
            m.column().transform().coords(),
            &[Primitive::Exp(C64::new(0.0, 1.0)), Primitive::Affine(C64::new(1.0, 0.0), C64::new(-2.5, 0.0))]
        );
    }

    #[test]
    fn serialize_round_trips() {
        let text = "[dims] K=3 N=5 R=2 l=3\n[domain] real\n[transform] f2 = tan_half\n[transform] f3 = exp(0.5*i)\n\
                    [column] b_n = x1^n/n + tanQ(n, x2) - 1e-3*chebP(n, x3)\n[column] b_2 = (x1 - i)/(2.5 + x3)\n";
        let m = parse_model(text).unwrap();
        let again = parse_model(&serialize_model(&m).unwrap()).unwrap();
        assert_eq!(m, again);
    }
}
