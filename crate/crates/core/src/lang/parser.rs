use std::collections::BTreeMap;

use super::lexer::{lex, Tok, Token};
use super::{
    check_routine, BinOp, Block, CheckOrigin, Clause, Expr, Instr, InstrKind, Local, NodeId, Param,
    ParseError, ParseErrorKind, Quantifier, Routine, Span, Type, UnOp,
};

/// Parses and type-checks one routine.
pub fn parse(source: &str) -> Result<Routine, ParseError> {
    let lexed = lex(source)?;
    let mut p = Parser {
        tokens: lexed.tokens,
        markers: lexed.markers,
        pos: 0,
    };
    let mut routine = p.routine()?;
    p.expect_eof()?;
    routine.renumber();
    check_routine(&routine)?;
    Ok(routine)
}

struct Parser {
    tokens: Vec<Token>,
    markers: BTreeMap<u32, (u32, u32)>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Int(v) => format!("integer `{v}`"),
        Tok::Kw(k) => format!("`{k}`"),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::Eof => "end of input".to_string(),
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> PResult<T> {
        Err(ParseError::new(
            ParseErrorKind::Syntax(format!("expected {expected}, found {}", describe(self.peek()))),
            self.span(),
        ))
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Kw(k) if *k == kw)
    }

    fn at_sym(&self, sym: &str) -> bool {
        matches!(self.peek(), Tok::Sym(s) if *s == sym)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        if self.at_sym(sym) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<Span> {
        let span = self.span();
        if self.eat_kw(kw) {
            Ok(span)
        } else {
            self.error(&format!("`{kw}`"))
        }
    }

    fn expect_sym(&mut self, sym: &str) -> PResult<()> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            self.error(&format!("`{sym}`"))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.error("identifier"),
        }
    }

    fn expect_eof(&mut self) -> PResult<()> {
        if matches!(self.peek(), Tok::Eof) {
            Ok(())
        } else {
            self.error("end of input")
        }
    }

    fn ty(&mut self) -> PResult<Type> {
        let t = match self.peek() {
            Tok::Kw("INTEGER") => Type::Integer,
            Tok::Kw("BOOLEAN") => Type::Boolean,
            Tok::Kw("ARRAY") => Type::Array,
            _ => return self.error("type (INTEGER, BOOLEAN or ARRAY)"),
        };
        self.bump();
        Ok(t)
    }

    fn routine(&mut self) -> PResult<Routine> {
        let span = self.expect_kw("routine")?;
        let name = self.ident()?;
        self.expect_sym("(")?;
        let mut params = Vec::new();
        if !self.at_sym(")") {
            loop {
                let name = self.ident()?;
                self.expect_sym(":")?;
                let ty = self.ty()?;
                params.push(Param { name, ty });
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        let mut require = None;
        let mut require_span = span;
        if self.at_kw("require") {
            self.bump();
            require_span = self.span();
            require = Some(self.expr()?);
        }
        let mut locals = Vec::new();
        if self.eat_kw("local") {
            while matches!(self.peek(), Tok::Ident(_)) {
                let name = self.ident()?;
                self.expect_sym(":")?;
                let ty = self.ty()?;
                let init = if self.eat_sym(":=") { Some(self.expr()?) } else { None };
                locals.push(Local { name, ty, init });
                self.eat_sym(";");
            }
        }
        self.expect_kw("do")?;
        let body = self.block(false)?;
        let mut ensure = Vec::new();
        if self.eat_kw("ensure") {
            while matches!(self.peek(), Tok::Ident(_)) {
                let span = self.span();
                let tag = self.ident()?;
                self.expect_sym(":")?;
                let expr = self.expr()?;
                ensure.push(Clause { tag, expr, span });
                self.eat_sym(";");
            }
        }
        self.expect_kw("end")?;
        Ok(Routine {
            name,
            params,
            require,
            require_span,
            locals,
            body,
            ensure,
            span,
        })
    }

    fn block(&mut self, in_from: bool) -> PResult<Block> {
        let mut out = Vec::new();
        loop {
            while self.eat_sym(";") {}
            let starts_instr = match self.peek() {
                Tok::Ident(_) => true,
                Tok::Kw("if" | "from" | "check") => true,
                Tok::Kw("until") => !in_from,
                _ => false,
            };
            if !starts_instr {
                return Ok(out);
            }
            out.push(self.instr()?);
        }
    }

    fn instr(&mut self) -> PResult<Instr> {
        let span = self.span();
        let placeholder = NodeId::new(0);
        let kind = match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                if self.eat_sym("[") {
                    let index = self.expr()?;
                    self.expect_sym("]")?;
                    self.expect_sym(":=")?;
                    let value = self.expr()?;
                    InstrKind::AssignIndex {
                        array: name,
                        index,
                        value,
                    }
                } else {
                    self.expect_sym(":=")?;
                    let value = self.expr()?;
                    InstrKind::Assign { target: name, value }
                }
            }
            Tok::Kw("if") => {
                self.bump();
                self.if_rest()?
            }
            Tok::Kw("from") | Tok::Kw("until") => {
                let from = if self.eat_kw("from") { Some(self.block(true)?) } else { None };
                self.expect_kw("until")?;
                let until = self.expr()?;
                self.expect_kw("loop")?;
                let body = self.block(false)?;
                self.expect_kw("end")?;
                InstrKind::Loop {
                    from,
                    until,
                    body,
                    label: String::new(),
                }
            }
            Tok::Kw("check") => {
                self.bump();
                let tag = match (self.peek().clone(), self.peek_at(1)) {
                    (Tok::Ident(t), Tok::Sym(":")) => {
                        self.bump();
                        self.bump();
                        Some(t)
                    }
                    _ => None,
                };
                let cond = self.expr()?;
                let end = self.expect_kw("end")?;
                let origin = match self.markers.get(&end.line) {
                    Some(&(col, target)) if col > end.col => CheckOrigin::Seeded { target },
                    _ => CheckOrigin::User,
                };
                InstrKind::Check { cond, tag, origin }
            }
            _ => return self.error("instruction"),
        };
        Ok(Instr::new(placeholder, span, kind))
    }

    /// After `if` (or `elseif`): `cond then block [elseif ...|else block] end`.
    fn if_rest(&mut self) -> PResult<InstrKind> {
        let cond = self.expr()?;
        self.expect_kw("then")?;
        let then_branch = self.block(false)?;
        let else_branch = if self.at_kw("elseif") {
            let span = self.span();
            self.bump();
            let nested = self.if_rest()?;
            // The nested `if_rest` consumed the shared `end`.
            return Ok(InstrKind::If {
                cond,
                then_branch,
                else_branch: Some(vec![Instr::new(NodeId::new(0), span, nested)]),
            });
        } else if self.eat_kw("else") {
            Some(self.block(false)?)
        } else {
            None
        };
        self.expect_kw("end")?;
        Ok(InstrKind::If {
            cond,
            then_branch,
            else_branch,
        })
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.implies()
    }

    fn implies(&mut self) -> PResult<Expr> {
        let lhs = self.or()?;
        if self.eat_kw("implies") {
            let rhs = self.implies()?;
            return Ok(Expr::binary(BinOp::Implies, lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> PResult<Expr> {
        let mut lhs = self.and()?;
        while self.eat_kw("or") {
            let rhs = self.and()?;
            lhs = Expr::binary(BinOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> PResult<Expr> {
        let mut lhs = self.comparison()?;
        while self.eat_kw("and") {
            let rhs = self.comparison()?;
            lhs = Expr::binary(BinOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn comparison(&mut self) -> PResult<Expr> {
        let lhs = self.additive()?;
        let op = match self.peek() {
            Tok::Sym("<") => BinOp::Lt,
            Tok::Sym("<=") => BinOp::Le,
            Tok::Sym(">") => BinOp::Gt,
            Tok::Sym(">=") => BinOp::Ge,
            Tok::Sym("=") => BinOp::Eq,
            Tok::Sym("/=") => BinOp::Ne,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.additive()?;
        if matches!(self.peek(), Tok::Sym("<" | "<=" | ">" | ">=" | "=" | "/=")) {
            return self.error("end of comparison (comparisons do not chain)");
        }
        Ok(Expr::binary(op, lhs, rhs))
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("+") => BinOp::Add,
                Tok::Sym("-") => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.multiplicative()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn multiplicative(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("*") => BinOp::Mul,
                Tok::Kw("div") => BinOp::Div,
                Tok::Kw("mod") => BinOp::Mod,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat_kw("not") {
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)));
        }
        if self.eat_sym("-") {
            // A minus sign directly before a literal is part of the literal.
            if let Tok::Int(v) = *self.peek() {
                self.bump();
                return Ok(Expr::Int(-v));
            }
            return Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Int(v))
            }
            Tok::Kw("true") => {
                self.bump();
                Ok(Expr::Bool(true))
            }
            Tok::Kw("false") => {
                self.bump();
                Ok(Expr::Bool(false))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Kw("across") => {
                self.bump();
                let lo = self.expr()?;
                self.expect_sym("..")?;
                let hi = self.expr()?;
                self.expect_kw("as")?;
                let var = self.ident()?;
                // Quantifier words are only reserved in this position.
                let quantifier = match self.peek() {
                    Tok::Ident(w) if w == "all" => Quantifier::All,
                    Tok::Ident(w) if w == "some" => Quantifier::Some,
                    Tok::Ident(w) if w == "sum" => Quantifier::Sum,
                    Tok::Ident(w) if w == "product" => Quantifier::Product,
                    _ => return self.error("`all`, `some`, `sum` or `product`"),
                };
                self.bump();
                let body = self.expr()?;
                self.expect_kw("end")?;
                Ok(Expr::Across {
                    var,
                    lo: Box::new(lo),
                    hi: Box::new(hi),
                    quantifier,
                    body: Box::new(body),
                })
            }
            Tok::Ident(name) => {
                self.bump();
                if self.eat_sym("[") {
                    let index = self.expr()?;
                    self.expect_sym("]")?;
                    Ok(Expr::Index {
                        array: name,
                        index: Box::new(index),
                    })
                } else if self.at_sym(".") && matches!(self.peek_at(1), Tok::Ident(s) if s == "count") {
                    self.bump();
                    self.bump();
                    Ok(Expr::Count(name))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            _ => self.error("expression"),
        }
    }
}
