use super::{BinOp, Expr, Func, Node, ParseError, ParseErrorKind, Var};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

fn lex(source: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = source.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut k = i + 1;
                if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                    k += 1;
                }
                if k < bytes.len() && bytes[k].is_ascii_digit() {
                    while k < bytes.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                    }
                    i = k;
                }
            }
            let text = &source[start..i];
            let value: f64 = text.parse().map_err(|_| ParseError {
                pos: start,
                kind: ParseErrorKind::BadNumber(text.into()),
            })?;
            if !value.is_finite() {
                return Err(ParseError {
                    pos: start,
                    kind: ParseErrorKind::BadNumber(text.into()),
                });
            }
            out.push((Tok::Num(value), start));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(source[start..i].into()), start));
            continue;
        }
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            _ => {
                let ch = source[start..].chars().next().unwrap_or(c);
                return Err(ParseError {
                    pos: start,
                    kind: ParseErrorKind::Lexical(ch),
                });
            }
        };
        out.push((tok, start));
        i += 1;
    }
    Ok(out)
}

pub(super) struct Parser {
    tokens: Vec<(Tok, usize)>,
    at: usize,
    end: usize,
    dim: usize,
    /// Offsets of currently open parentheses.
    open: Vec<usize>,
}

impl Parser {
    pub(super) fn new(source: &str, dim: usize) -> Result<Self, ParseError> {
        Ok(Self {
            tokens: lex(source)?,
            at: 0,
            end: source.len(),
            dim,
            open: Vec::new(),
        })
    }

    pub(super) fn parse(mut self) -> Result<Expr, ParseError> {
        if self.tokens.is_empty() {
            return Err(self.error(self.end, ParseErrorKind::Empty));
        }
        let e = self.expr()?;
        match self.tokens.get(self.at) {
            None => Ok(e),
            Some((Tok::RParen, pos)) => Err(self.error(*pos, ParseErrorKind::Unbalanced)),
            Some((tok, pos)) => Err(self.error(*pos, ParseErrorKind::Unexpected(describe(tok)))),
        }
    }

    fn error(&self, pos: usize, kind: ParseErrorKind) -> ParseError {
        ParseError { pos, kind }
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.at).map(|(t, _)| t)
    }

    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        match self.tokens.get(self.at) {
            Some(t) => {
                self.at += 1;
                Ok(t.clone())
            }
            None => match self.open.last() {
                Some(&pos) => Err(self.error(pos, ParseErrorKind::Unbalanced)),
                None => Err(self.error(self.end, ParseErrorKind::UnexpectedEnd)),
            },
        }
    }

    fn binary(op: BinOp, lhs: Expr, rhs: Expr, pos: usize) -> Expr {
        Expr {
            node: Node::Binary(op, Box::new(lhs), Box::new(rhs)),
            pos,
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            let (_, pos) = self.next()?;
            let rhs = self.term()?;
            lhs = Self::binary(op, lhs, rhs, pos);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinOp::Mul } else { BinOp::Div };
            let (_, pos) = self.next()?;
            let rhs = self.unary()?;
            lhs = Self::binary(op, lhs, rhs, pos);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if let Some(Tok::Op('-')) = self.peek() {
            let (_, pos) = self.next()?;
            let inner = self.unary()?;
            return Ok(Expr {
                node: Node::Neg(Box::new(inner)),
                pos,
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if let Some(Tok::Op('^')) = self.peek() {
            let (_, pos) = self.next()?;
            let exponent = self.unary()?;
            return Ok(Self::binary(BinOp::Pow, base, exponent, pos));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let (tok, pos) = self.next()?;
        match tok {
            Tok::Num(v) => Ok(Expr {
                node: Node::Num(v),
                pos,
            }),
            Tok::LParen => {
                self.open.push(pos);
                let inner = self.expr()?;
                match self.next() {
                    Ok((Tok::RParen, _)) => {
                        self.open.pop();
                        Ok(inner)
                    }
                    Ok((tok, p)) => Err(self.error(p, ParseErrorKind::Unexpected(describe(&tok)))),
                    Err(e) => Err(e),
                }
            }
            Tok::Ident(name) => self.identifier(name, pos),
            Tok::RParen => Err(self.error(pos, ParseErrorKind::Unbalanced)),
            tok => Err(self.error(pos, ParseErrorKind::Unexpected(describe(&tok)))),
        }
    }

    fn identifier(&mut self, name: String, pos: usize) -> Result<Expr, ParseError> {
        if let Some(func) = Func::from_name(&name) {
            return self.call(func, pos);
        }
        let var = match name.as_str() {
            "x" => Some(Var::X),
            "y" => Some(Var::Y),
            _ => name
                .strip_prefix('z')
                .filter(|d| !d.is_empty() && !d.starts_with('0') && d.bytes().all(|b| b.is_ascii_digit()))
                .and_then(|d| d.parse::<usize>().ok())
                .filter(|&k| k >= 1 && k <= self.dim)
                .map(|k| Var::Z(k - 1)),
        };
        match var {
            Some(v) => Ok(Expr {
                node: Node::Var(v),
                pos,
            }),
            None => Err(self.error(pos, ParseErrorKind::UnknownIdentifier(name))),
        }
    }

    fn call(&mut self, func: Func, pos: usize) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(Tok::LParen) => {}
            _ => return Err(self.error(pos, ParseErrorKind::MissingCall(func.name()))),
        }
        let (_, open_pos) = self.next()?;
        if let Some(Tok::RParen) = self.peek() {
            return Err(self.error(
                pos,
                ParseErrorKind::Arity {
                    name: func.name(),
                    found: 0,
                },
            ));
        }
        self.open.push(open_pos);
        let mut args = vec![self.expr()?];
        loop {
            match self.next()? {
                (Tok::RParen, _) => break,
                (Tok::Comma, _) => args.push(self.expr()?),
                (tok, p) => return Err(self.error(p, ParseErrorKind::Unexpected(describe(&tok)))),
            }
        }
        self.open.pop();
        if args.len() != 1 {
            return Err(self.error(
                pos,
                ParseErrorKind::Arity {
                    name: func.name(),
                    found: args.len(),
                },
            ));
        }
        let arg = args.pop().expect("one argument");
        Ok(Expr {
            node: Node::Call(func, Box::new(arg)),
            pos,
        })
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => v.to_string(),
        Tok::Ident(s) => s.clone(),
        Tok::Op(c) => c.to_string(),
        Tok::LParen => "(".into(),
        Tok::RParen => ")".into(),
        Tok::Comma => ",".into(),
    }
}
