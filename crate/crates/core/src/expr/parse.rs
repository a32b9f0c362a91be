use super::{ExprError, Func, Node, ScalarExpr};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next(&mut self) -> Result<(Tok, usize), ExprError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        if c.is_ascii_digit() || c == b'.' {
            return self.number(start).map(|x| (Tok::Num(x), start));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
                self.pos += 1;
            }
            let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
            return Ok((Tok::Ident(name), start));
        }
        self.pos += 1;
        let tok = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c as char),
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            _ => {
                return Err(ExprError::Syntax { pos: start, msg: format!("unexpected character '{}'", c as char) });
            }
        };
        Ok((tok, start))
    }

    fn number(&mut self, start: usize) -> Result<f64, ExprError> {
        let digits = |l: &mut Self| {
            let s = l.pos;
            while l.pos < l.src.len() && l.src[l.pos].is_ascii_digit() {
                l.pos += 1;
            }
            l.pos - s
        };
        let mut n = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            return Err(ExprError::Syntax { pos: start, msg: "malformed number".into() });
        }
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                // not an exponent; leave the 'e' for the next token
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map_err(|_| ExprError::Syntax { pos: start, msg: format!("malformed number '{text}'") })
    }
}

struct Parser<'a> {
    lex: Lexer<'a>,
    tok: Tok,
    pos: usize,
    coords: &'a [String],
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<(), ExprError> {
        let (t, p) = self.lex.next()?;
        self.tok = t;
        self.pos = p;
        Ok(())
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ExprError> {
        if self.tok != t {
            return Err(self.unexpected(what));
        }
        self.bump()
    }

    fn unexpected(&self, wanted: &str) -> ExprError {
        let found = match &self.tok {
            Tok::Num(x) => format!("number {x}"),
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Op(c) => format!("'{c}'"),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::End => "end of input".into(),
        };
        ExprError::Syntax { pos: self.pos, msg: format!("expected {wanted}, found {found}") }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.tok {
                Tok::Op('+') => {
                    self.bump()?;
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Op('-') => {
                    self.bump()?;
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            match self.tok {
                Tok::Op('*') => {
                    self.bump()?;
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Op('/') => {
                    self.bump()?;
                    lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.tok == Tok::Op('-') {
            self.bump()?;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.tok == Tok::Op('^') {
            self.bump()?;
            return Ok(Node::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        match self.tok.clone() {
            Tok::Num(x) => {
                self.bump()?;
                Ok(Node::Num(x))
            }
            Tok::LParen => {
                self.bump()?;
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let at = self.pos;
                self.bump()?;
                if let Some(k) = self.coords.iter().position(|c| *c == name) {
                    return Ok(Node::Var(k));
                }
                if let Some(f) = Func::from_name(&name) {
                    self.expect(Tok::LParen, "'(' after function name")?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "')'")?;
                    return Ok(Node::Call(f, Box::new(arg)));
                }
                if name == "pi" {
                    return Ok(Node::Num(std::f64::consts::PI));
                }
                Err(ExprError::UnknownSymbol { name, pos: at })
            }
            _ => Err(self.unexpected("a number, identifier or '('")),
        }
    }
}

/// Parses `src` as a scalar expression in the coordinates `coords`.
pub fn parse_scalar(src: &str, coords: &[String]) -> Result<ScalarExpr, ExprError> {
    if src.trim().is_empty() {
        return Err(ExprError::Syntax { pos: 0, msg: "empty expression".into() });
    }
    let mut p = Parser { lex: Lexer { src: src.as_bytes(), pos: 0 }, tok: Tok::End, pos: 0, coords };
    p.bump()?;
    let node = p.expr()?;
    if p.tok != Tok::End {
        return Err(p.unexpected("an operator or end of input"));
    }
    Ok(ScalarExpr::from_node(node, coords))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xy() -> Vec<String> {
        vec!["x".into(), "y".into()]
    }

    #[test]
    fn grammar_cases() {
        assert!(parse_scalar("x^2 + sin(y)", &xy()).is_ok());
        assert!(parse_scalar("  -(-x) * 1.5e+2 / .5 ", &xy()).is_ok());
        let e = parse_scalar("2^3^2", &xy()).unwrap();
        assert_eq!(e.eval(&[0.0, 0.0]).unwrap(), 512.0);
        let e = parse_scalar("-x^2", &xy()).unwrap();
        assert_eq!(e.eval(&[3.0, 0.0]).unwrap(), -9.0);
        let e = parse_scalar("2^-1", &xy()).unwrap();
        assert_eq!(e.eval(&[0.0, 0.0]).unwrap(), 0.5);
        let e = parse_scalar("cos(pi)", &xy()).unwrap();
        assert_eq!(e.eval(&[0.0, 0.0]).unwrap(), -1.0);
    }

    #[test]
    fn unknown_symbol_named() {
        match parse_scalar("z", &xy()) {
            Err(ExprError::UnknownSymbol { name, pos }) => {
                assert_eq!(name, "z");
                assert_eq!(pos, 0);
            }
            other => panic!("{other:?}"),
        }
        match parse_scalar("x + foo(y)", &xy()) {
            Err(ExprError::UnknownSymbol { name, .. }) => assert_eq!(name, "foo"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_positions() {
        let pos = |s: &str| match parse_scalar(s, &xy()) {
            Err(ExprError::Syntax { pos, .. }) => pos,
            other => panic!("{other:?}"),
        };
        assert_eq!(pos("x +"), 3);
        assert_eq!(pos("(x"), 2);
        assert_eq!(pos("x y"), 2);
        assert_eq!(pos("2x"), 1);
        assert_eq!(pos("x $ y"), 2);
        assert_eq!(pos(""), 0);
        assert_eq!(pos("sin x"), 4);
    }

    #[test]
    fn coordinate_shadows_constant() {
        let c = vec!["pi".to_string()];
        let e = parse_scalar("pi*2", &c).unwrap();
        assert_eq!(e.eval(&[1.0]).unwrap(), 2.0);
    }
}
