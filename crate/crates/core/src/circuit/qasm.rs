//! OpenQASM 3 interchange.
//!
//! Export writes `stdgates.inc` names for the abstract gates and emits
//! definitions for the native families (`prx`, `gpi`, `gpi2`, `ms`) in terms
//! of the built-in `U` gate and standard gates, so the output is
//! self-contained. The parser accepts the subset the exporter produces plus
//! simple constant expressions in parameters (`pi`, `+ - * /`, parentheses).

use std::fmt::Write as _;

use super::gates::{GateKind, GateSpec};
use super::Circuit;
use crate::error::{invalid, Error, Result};

const NATIVE_DEFS: &str = "\
gate prx(theta, phi) a { U(theta, phi - pi/2, pi/2 - phi) a; }
gate gpi(phi) a { U(pi, phi, pi - phi) a; }
gate gpi2(phi) a { U(pi/2, phi - pi/2, pi/2 - phi) a; }
gate ms(phi0, phi1) a, b { rz(-phi0) a; rz(-phi1) b; h a; h b; cx a, b; rz(pi/2) b; cx a, b; h a; h b; rz(phi0) a; rz(phi1) b; }
";

fn qasm_name(kind: GateKind) -> Option<&'static str> {
    Some(match kind {
        GateKind::H => "h",
        GateKind::S => "s",
        GateKind::T => "t",
        GateKind::X => "x",
        GateKind::Y => "y",
        GateKind::Z => "z",
        GateKind::Cnot => "cx",
        GateKind::Cz => "cz",
        GateKind::Prx => "prx",
        GateKind::Gpi => "gpi",
        GateKind::Gpi2 => "gpi2",
        GateKind::Ms => "ms",
        GateKind::RawUnitary => return None,
    })
}

fn kind_from_name(name: &str) -> Option<GateKind> {
    Some(match name {
        "h" => GateKind::H,
        "s" => GateKind::S,
        "t" => GateKind::T,
        "x" => GateKind::X,
        "y" => GateKind::Y,
        "z" => GateKind::Z,
        "cx" | "CX" | "cnot" => GateKind::Cnot,
        "cz" => GateKind::Cz,
        "prx" => GateKind::Prx,
        "gpi" => GateKind::Gpi,
        "gpi2" => GateKind::Gpi2,
        "ms" => GateKind::Ms,
        _ => return None,
    })
}

/// Serializes `c`; when `measure` is set every qubit is measured into a
/// classical register `c` at the end.
pub fn to_qasm(c: &Circuit, measure: bool) -> Result<String> {
    c.validate()?;
    let mut out = String::new();
    writeln!(out, "OPENQASM 3.0;").unwrap();
    writeln!(out, "include \"stdgates.inc\";").unwrap();
    out.push_str(NATIVE_DEFS);
    writeln!(out, "qubit[{}] q;", c.n_qubits).unwrap();
    if measure {
        writeln!(out, "bit[{}] c;", c.n_qubits).unwrap();
    }
    for g in &c.gates {
        let name = qasm_name(g.kind).ok_or_else(|| {
            invalid("RawUnitary gates must be decomposed before OpenQASM export")
        })?;
        out.push_str(name);
        if !g.params.is_empty() {
            let ps: Vec<String> = g.params.iter().map(|p| format!("{p:?}")).collect();
            write!(out, "({})", ps.join(", ")).unwrap();
        }
        let qs: Vec<String> = g.targets.iter().map(|t| format!("q[{t}]")).collect();
        writeln!(out, " {};", qs.join(", ")).unwrap();
    }
    if measure {
        writeln!(out, "c = measure q;").unwrap();
    }
    Ok(out)
}

/// Parses a program produced by [`to_qasm`] (or a compatible hand-written
/// one) back into a circuit with the `Custom` ensemble tag.
pub fn from_qasm(src: &str) -> Result<Circuit> {
    let mut n_qubits = None;
    let mut gates = Vec::new();
    let mut depth_braces = 0i32;
    for (lineno, raw) in src.lines().enumerate() {
        let line_no = lineno + 1;
        let err = |msg: String| Error::Qasm { line: line_no, msg };
        let line = raw.split("//").next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        // Gate definitions are skipped wholesale; their bodies may span lines.
        if depth_braces > 0 || line.starts_with("gate ") {
            depth_braces += line.matches('{').count() as i32 - line.matches('}').count() as i32;
            continue;
        }
        if line.starts_with("OPENQASM") || line.starts_with("include") || line.starts_with("bit") {
            continue;
        }
        if line.contains("measure") || line.starts_with("barrier") {
            continue;
        }
        let stmt = line
            .strip_suffix(';')
            .ok_or_else(|| err("missing ';'".into()))?
            .trim();
        if let Some(rest) = stmt.strip_prefix("qubit[") {
            let (size, name) = rest.split_once(']').ok_or_else(|| err("bad qubit decl".into()))?;
            if name.trim() != "q" {
                return Err(err(format!("unsupported register name '{}'", name.trim())));
            }
            n_qubits = Some(size.trim().parse::<usize>().map_err(|e| err(e.to_string()))?);
            continue;
        }
        let (head, operands) = split_call(stmt).ok_or_else(|| err(format!("cannot parse '{stmt}'")))?;
        let (name, params) = match head.split_once('(') {
            Some((n, rest)) => {
                let inner = rest.strip_suffix(')').ok_or_else(|| err("unbalanced '('".into()))?;
                let ps = split_top_level(inner)
                    .into_iter()
                    .map(|p| eval_expr(p).map_err(|m| err(m)))
                    .collect::<Result<Vec<f64>>>()?;
                (n.trim(), ps)
            }
            None => (head.trim(), vec![]),
        };
        let kind = kind_from_name(name).ok_or_else(|| err(format!("unknown gate '{name}'")))?;
        let targets = operands
            .split(',')
            .map(|o| {
                let o = o.trim();
                o.strip_prefix("q[")
                    .and_then(|r| r.strip_suffix(']'))
                    .and_then(|i| i.trim().parse::<usize>().ok())
                    .ok_or_else(|| err(format!("bad operand '{o}'")))
            })
            .collect::<Result<Vec<usize>>>()?;
        let g = GateSpec { kind, targets, params, matrix: None };
        g.validate().map_err(|e| err(e.to_string()))?;
        gates.push(g);
    }
    let n = n_qubits.ok_or(Error::Qasm { line: 0, msg: "no qubit declaration".into() })?;
    let c = Circuit::with_gates(n, gates);
    c.validate()?;
    Ok(c)
}

/// Splits `name(params) operands` at the first space outside parentheses.
fn split_call(stmt: &str) -> Option<(&str, &str)> {
    let mut depth = 0;
    for (i, ch) in stmt.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ' ' if depth == 0 => return Some((&stmt[..i], stmt[i..].trim())),
            _ => {}
        }
    }
    None
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0, 0);
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

/// Recursive-descent evaluator for constant parameter expressions.
fn eval_expr(src: &str) -> std::result::Result<f64, String> {
    struct P<'a> {
        s: &'a [u8],
        i: usize,
    }
    impl P<'_> {
        fn ws(&mut self) {
            while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
                self.i += 1;
            }
        }
        fn expr(&mut self) -> std::result::Result<f64, String> {
            let mut v = self.term()?;
            loop {
                self.ws();
                match self.s.get(self.i) {
                    Some(b'+') => {
                        self.i += 1;
                        v += self.term()?;
                    }
                    Some(b'-') => {
                        self.i += 1;
                        v -= self.term()?;
                    }
                    _ => return Ok(v),
                }
            }
        }
        fn term(&mut self) -> std::result::Result<f64, String> {
            let mut v = self.factor()?;
            loop {
                self.ws();
                match self.s.get(self.i) {
                    Some(b'*') => {
                        self.i += 1;
                        v *= self.factor()?;
                    }
                    Some(b'/') => {
                        self.i += 1;
                        v /= self.factor()?;
                    }
                    _ => return Ok(v),
                }
            }
        }
        fn factor(&mut self) -> std::result::Result<f64, String> {
            self.ws();
            match self.s.get(self.i) {
                Some(b'-') => {
                    self.i += 1;
                    Ok(-self.factor()?)
                }
                Some(b'+') => {
                    self.i += 1;
                    self.factor()
                }
                Some(b'(') => {
                    self.i += 1;
                    let v = self.expr()?;
                    self.ws();
                    if self.s.get(self.i) != Some(&b')') {
                        return Err("expected ')'".into());
                    }
                    self.i += 1;
                    Ok(v)
                }
                Some(_) => {
                    let start = self.i;
                    while self.i < self.s.len()
                        && (self.s[self.i].is_ascii_alphanumeric()
                            || self.s[self.i] == b'.'
                            || ((self.s[self.i] == b'-' || self.s[self.i] == b'+')
                                && self.i > start
                                && matches!(self.s[self.i - 1], b'e' | b'E')
                                && self.s[start].is_ascii_digit()))
                    {
                        self.i += 1;
                    }
                    let tok = std::str::from_utf8(&self.s[start..self.i]).unwrap();
                    match tok {
                        "pi" | "π" => Ok(std::f64::consts::PI),
                        "tau" => Ok(std::f64::consts::TAU),
                        _ => tok.parse::<f64>().map_err(|_| format!("bad number '{tok}'")),
                    }
                }
                None => Err("unexpected end of expression".into()),
            }
        }
    }
    let mut p = P { s: src.as_bytes(), i: 0 };
    let v = p.expr()?;
    p.ws();
    if p.i != p.s.len() {
        return Err(format!("trailing input in '{src}'"));
    }
    Ok(v)
}
