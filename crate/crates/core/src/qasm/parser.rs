use super::{Circuit, GateKind, GateName, QasmError, Source};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(usize),
    Real(String),
    Str,
    Sym(char),
    Arrow,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> QasmError {
    QasmError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<Token>, QasmError> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
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
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            let s = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                advance(1, &mut i, &mut col);
            }
            Tok::Ident(chars[s..i].iter().collect())
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let s = i;
            let mut real = false;
            while i < chars.len() {
                let d = chars[i];
                if d.is_ascii_digit() {
                    advance(1, &mut i, &mut col);
                } else if d == '.' || d == 'e' || d == 'E' {
                    real = true;
                    advance(1, &mut i, &mut col);
                    if (d == 'e' || d == 'E') && matches!(chars.get(i), Some('+') | Some('-')) {
                        advance(1, &mut i, &mut col);
                    }
                } else {
                    break;
                }
            }
            let lit: String = chars[s..i].iter().collect();
            if real {
                lit.parse::<f64>()
                    .map_err(|_| syntax(start_line, start_col, format!("bad number `{lit}`")))?;
                Tok::Real(lit)
            } else {
                Tok::Int(
                    lit.parse()
                        .map_err(|_| syntax(start_line, start_col, format!("bad integer `{lit}`")))?,
                )
            }
        } else if c == '"' {
            advance(1, &mut i, &mut col);
            while i < chars.len() && chars[i] != '"' {
                if chars[i] == '\n' {
                    return Err(syntax(start_line, start_col, "unterminated string"));
                }
                advance(1, &mut i, &mut col);
            }
            if i >= chars.len() {
                return Err(syntax(start_line, start_col, "unterminated string"));
            }
            advance(1, &mut i, &mut col);
            Tok::Str
        } else if c == '-' && chars.get(i + 1) == Some(&'>') {
            advance(2, &mut i, &mut col);
            Tok::Arrow
        } else if ";,[](){}+-*/^".contains(c) {
            advance(1, &mut i, &mut col);
            Tok::Sym(c)
        } else {
            return Err(syntax(line, col, format!("unexpected character `{c}`")));
        };
        tokens.push(Token {
            tok,
            line: start_line,
            column: start_col,
        });
    }
    Ok(tokens)
}

struct Register {
    name: String,
    offset: usize,
    size: usize,
}

/// A gate argument: a whole register or one indexed qubit.
enum Arg {
    Whole { offset: usize, size: usize },
    Single(usize),
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    qregs: Vec<Register>,
    cregs: Vec<Register>,
    num_qubits: usize,
    num_clbits: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eof_error(&self) -> QasmError {
        let (line, column) = self
            .tokens
            .last()
            .map(|t| (t.line, t.column))
            .unwrap_or((1, 1));
        syntax(line, column, "unexpected end of input")
    }

    fn next(&mut self) -> Result<Token, QasmError> {
        let t = self.tokens.get(self.pos).cloned().ok_or_else(|| self.eof_error())?;
        self.pos += 1;
        Ok(t)
    }

    fn expect_sym(&mut self, c: char) -> Result<Token, QasmError> {
        let t = self.next()?;
        if t.tok == Tok::Sym(c) {
            Ok(t)
        } else {
            Err(syntax(t.line, t.column, format!("expected `{c}`, found {:?}", t.tok)))
        }
    }

    fn expect_ident(&mut self) -> Result<(String, Token), QasmError> {
        let t = self.next()?;
        match &t.tok {
            Tok::Ident(s) => Ok((s.clone(), t)),
            other => Err(syntax(t.line, t.column, format!("expected identifier, found {other:?}"))),
        }
    }

    fn expect_int(&mut self) -> Result<usize, QasmError> {
        let t = self.next()?;
        match t.tok {
            Tok::Int(v) => Ok(v),
            other => Err(syntax(t.line, t.column, format!("expected integer, found {other:?}"))),
        }
    }

    fn declare(&mut self, quantum: bool) -> Result<(), QasmError> {
        let (name, tok) = self.expect_ident()?;
        self.expect_sym('[')?;
        let size = self.expect_int()?;
        self.expect_sym(']')?;
        self.expect_sym(';')?;
        if size == 0 {
            return Err(syntax(tok.line, tok.column, "register of size zero"));
        }
        let (regs, counter) = if quantum {
            (&mut self.qregs, &mut self.num_qubits)
        } else {
            (&mut self.cregs, &mut self.num_clbits)
        };
        if regs.iter().any(|r| r.name == name) {
            return Err(syntax(tok.line, tok.column, format!("register `{name}` redeclared")));
        }
        regs.push(Register {
            name,
            offset: *counter,
            size,
        });
        *counter += size;
        Ok(())
    }

    fn argument(&mut self, quantum: bool) -> Result<Arg, QasmError> {
        let (name, tok) = self.expect_ident()?;
        let regs = if quantum { &self.qregs } else { &self.cregs };
        let Some(reg) = regs.iter().find(|r| r.name == name) else {
            return Err(syntax(tok.line, tok.column, format!("undeclared register `{name}`")));
        };
        let (offset, size) = (reg.offset, reg.size);
        if self.peek().map(|t| &t.tok) == Some(&Tok::Sym('[')) {
            self.pos += 1;
            let idx = self.expect_int()?;
            self.expect_sym(']')?;
            if idx >= size {
                return Err(QasmError::IndexOutOfRange {
                    line: tok.line,
                    message: format!("{name}[{idx}] but register has size {size}"),
                });
            }
            Ok(Arg::Single(offset + idx))
        } else {
            Ok(Arg::Whole { offset, size })
        }
    }

    fn argument_list(&mut self) -> Result<Vec<Arg>, QasmError> {
        let mut args = vec![self.argument(true)?];
        loop {
            let t = self.next()?;
            match t.tok {
                Tok::Sym(',') => args.push(self.argument(true)?),
                Tok::Sym(';') => return Ok(args),
                other => {
                    return Err(syntax(t.line, t.column, format!("expected `,` or `;`, found {other:?}")))
                }
            }
        }
    }

    /// Skips a parenthesised parameter list and returns the number of top-level expressions.
    fn skip_params(&mut self) -> Result<usize, QasmError> {
        let open = self.expect_sym('(')?;
        let mut depth = 0usize;
        let mut count = 0usize;
        let mut in_expr = false;
        loop {
            let t = self.next()?;
            match t.tok {
                Tok::Sym('(') => {
                    depth += 1;
                    in_expr = true;
                }
                Tok::Sym(')') if depth == 0 => {
                    if in_expr {
                        count += 1;
                    } else if count > 0 {
                        return Err(syntax(t.line, t.column, "empty parameter"));
                    }
                    return Ok(count);
                }
                Tok::Sym(')') => depth -= 1,
                Tok::Sym(',') if depth == 0 => {
                    if !in_expr {
                        return Err(syntax(t.line, t.column, "empty parameter"));
                    }
                    count += 1;
                    in_expr = false;
                }
                Tok::Sym(';') => return Err(syntax(open.line, open.column, "unclosed parameter list")),
                Tok::Ident(_) | Tok::Int(_) | Tok::Real(_) | Tok::Sym(_) => in_expr = true,
                other => return Err(syntax(t.line, t.column, format!("unexpected {other:?} in parameters"))),
            }
        }
    }

    fn expand(&self, args: &[Arg], line: usize) -> Result<Vec<Vec<usize>>, QasmError> {
        let mut width = None;
        for a in args {
            if let Arg::Whole { size, .. } = a {
                match width {
                    None => width = Some(*size),
                    Some(w) if w != *size => {
                        return Err(QasmError::InvalidOperands {
                            line,
                            message: "register arguments differ in size".into(),
                        })
                    }
                    _ => {}
                }
            }
        }
        let rows = width.unwrap_or(1);
        Ok((0..rows)
            .map(|i| {
                args.iter()
                    .map(|a| match *a {
                        Arg::Whole { offset, .. } => offset + i,
                        Arg::Single(q) => q,
                    })
                    .collect()
            })
            .collect())
    }

    fn gate_statement(&mut self, circuit: &mut Circuit, name: String, tok: Token) -> Result<(), QasmError> {
        let Some(gate) = GateName::from_qasm(&name) else {
            return Err(QasmError::UnsupportedGate {
                name,
                line: tok.line,
            });
        };
        let given = if self.peek().map(|t| &t.tok) == Some(&Tok::Sym('(')) {
            self.skip_params()?
        } else {
            0
        };
        if given != gate.num_params() {
            return Err(syntax(
                tok.line,
                tok.column,
                format!("`{name}` takes {} parameter(s), got {given}", gate.num_params()),
            ));
        }
        let args = self.argument_list()?;
        if args.len() != gate.arity() {
            return Err(QasmError::InvalidOperands {
                line: tok.line,
                message: format!("`{name}` takes {} operand(s), got {}", gate.arity(), args.len()),
            });
        }
        for ops in self.expand(&args, tok.line)? {
            if ops.len() == 2 && ops[0] == ops[1] {
                return Err(QasmError::InvalidOperands {
                    line: tok.line,
                    message: format!("`{name}` applied twice to qubit {}", ops[0]),
                });
            }
            circuit.push(GateKind::from_name(gate), ops);
        }
        Ok(())
    }

    fn measure(&mut self, circuit: &mut Circuit, tok: Token) -> Result<(), QasmError> {
        let q = self.argument(true)?;
        let arrow = self.next()?;
        if arrow.tok != Tok::Arrow {
            return Err(syntax(arrow.line, arrow.column, "expected `->`"));
        }
        let c = self.argument(false)?;
        self.expect_sym(';')?;
        let qubits: Vec<usize> = match (q, c) {
            (Arg::Single(q), Arg::Single(_)) => vec![q],
            (Arg::Whole { offset, size }, Arg::Whole { size: csize, .. }) if size == csize => {
                (offset..offset + size).collect()
            }
            _ => {
                return Err(QasmError::InvalidOperands {
                    line: tok.line,
                    message: "measure operands must both be indexed or equal-size registers".into(),
                })
            }
        };
        for q in qubits {
            circuit.push(GateKind::Measure, vec![q]);
        }
        Ok(())
    }

    fn barrier(&mut self, circuit: &mut Circuit) -> Result<(), QasmError> {
        let args = self.argument_list()?;
        let mut qubits = Vec::new();
        for a in args {
            match a {
                Arg::Whole { offset, size } => qubits.extend(offset..offset + size),
                Arg::Single(q) => qubits.push(q),
            }
        }
        circuit.push(GateKind::Barrier, qubits);
        Ok(())
    }
}

/// Parses the supported OpenQASM 2.0 subset. The circuit is named `circuit`;
/// callers usually rename it after the source file.
pub fn parse_qasm(text: &str) -> Result<Circuit, QasmError> {
    let mut p = Parser {
        tokens: tokenize(text)?,
        pos: 0,
        qregs: Vec::new(),
        cregs: Vec::new(),
        num_qubits: 0,
        num_clbits: 0,
    };
    // Registers may be declared anywhere, so gates are collected first and the
    // qubit count is fixed at the end.
    let mut circuit = Circuit::new("circuit", 0, Source::Parsed);
    let mut first = true;
    while let Some(tok) = p.peek().cloned() {
        p.pos += 1;
        let name = match &tok.tok {
            Tok::Ident(s) => s.clone(),
            other => return Err(syntax(tok.line, tok.column, format!("unexpected {other:?}"))),
        };
        match name.as_str() {
            "OPENQASM" => {
                if !first {
                    return Err(syntax(tok.line, tok.column, "OPENQASM must be the first statement"));
                }
                let v = p.next()?;
                match &v.tok {
                    Tok::Int(2) => {}
                    Tok::Real(lit) if lit == "2.0" => {}
                    Tok::Int(_) | Tok::Real(_) => {
                        return Err(syntax(v.line, v.column, "only OpenQASM 2.0 is supported"))
                    }
                    _ => return Err(syntax(v.line, v.column, "expected version number")),
                }
                p.expect_sym(';')?;
            }
            "include" => {
                let s = p.next()?;
                if s.tok != Tok::Str {
                    return Err(syntax(s.line, s.column, "expected file name string"));
                }
                p.expect_sym(';')?;
            }
            "qreg" => p.declare(true)?,
            "creg" => p.declare(false)?,
            "measure" => p.measure(&mut circuit, tok)?,
            "barrier" => p.barrier(&mut circuit)?,
            "gate" | "opaque" => {
                let (gname, _) = p.expect_ident()?;
                return Err(QasmError::UnsupportedGate {
                    name: gname,
                    line: tok.line,
                });
            }
            "reset" => {
                return Err(QasmError::UnsupportedGate {
                    name,
                    line: tok.line,
                })
            }
            "if" => return Err(syntax(tok.line, tok.column, "classically controlled operations are not supported")),
            _ => p.gate_statement(&mut circuit, name, tok)?,
        }
        first = false;
    }
    if p.num_qubits == 0 {
        return Err(syntax(1, 1, "no quantum register declared"));
    }
    circuit.num_qubits = p.num_qubits;
    Ok(circuit)
}
