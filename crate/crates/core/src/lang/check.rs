use std::collections::{BTreeMap, BTreeSet};

use super::{
    BinOp, Block, CheckOrigin, Expr, InstrKind, ParseError, ParseErrorKind, Routine, Span, Type,
    UnOp,
};

/// Validates declarations, name resolution, typing and tag uniqueness.
pub fn check_routine(r: &Routine) -> Result<(), ParseError> {
    let mut env: BTreeMap<String, Type> = BTreeMap::new();
    let mut params = BTreeSet::new();
    for p in &r.params {
        if env.insert(p.name.clone(), p.ty).is_some() {
            return Err(dup(format!("variable `{}`", p.name), r.span));
        }
        params.insert(p.name.clone());
    }
    let mut scope = Scope {
        env: env.clone(),
        bound: Vec::new(),
    };
    if let Some(req) = &r.require {
        scope.expect(req, Type::Boolean, r.require_span)?;
    }
    for l in &r.locals {
        if let Some(init) = &l.init {
            // Initializers see parameters and earlier locals only.
            scope.expect(init, l.ty, r.span)?;
        }
        if scope.env.insert(l.name.clone(), l.ty).is_some() {
            return Err(dup(format!("variable `{}`", l.name), r.span));
        }
    }
    let mut ck = Checker {
        scope,
        params,
        tags: BTreeSet::new(),
        targets: BTreeSet::new(),
        labels: BTreeSet::new(),
    };
    ck.block(&r.body)?;
    for clause in &r.ensure {
        if !ck.tags.insert(clause.tag.clone()) {
            return Err(dup(format!("tag `{}`", clause.tag), clause.span));
        }
        ck.scope.expect(&clause.expr, Type::Boolean, clause.span)?;
    }
    Ok(())
}

fn dup(what: String, span: Span) -> ParseError {
    ParseError::new(ParseErrorKind::Duplicate(what), span)
}

fn type_err(msg: String, span: Span) -> ParseError {
    ParseError::new(ParseErrorKind::Type(msg), span)
}

struct Scope {
    env: BTreeMap<String, Type>,
    bound: Vec<String>,
}

impl Scope {
    fn lookup(&self, name: &str, span: Span) -> Result<Type, ParseError> {
        if self.bound.iter().any(|b| b == name) {
            return Ok(Type::Integer);
        }
        self.env
            .get(name)
            .copied()
            .ok_or_else(|| ParseError::new(ParseErrorKind::Unresolved(name.to_string()), span))
    }

    fn expect(&mut self, e: &Expr, want: Type, span: Span) -> Result<(), ParseError> {
        let got = self.infer(e, span)?;
        if got != want {
            return Err(type_err(format!("expected {want}, found {got} in `{e}`"), span));
        }
        Ok(())
    }

    fn infer(&mut self, e: &Expr, span: Span) -> Result<Type, ParseError> {
        Ok(match e {
            Expr::Int(_) => Type::Integer,
            Expr::Bool(_) => Type::Boolean,
            Expr::Var(n) => self.lookup(n, span)?,
            Expr::Index { array, index } => {
                if self.lookup(array, span)? != Type::Array {
                    return Err(type_err(format!("`{array}` is not an array"), span));
                }
                self.expect(index, Type::Integer, span)?;
                Type::Integer
            }
            Expr::Count(array) => {
                if self.lookup(array, span)? != Type::Array {
                    return Err(type_err(format!("`{array}` is not an array"), span));
                }
                Type::Integer
            }
            Expr::Unary(UnOp::Not, inner) => {
                self.expect(inner, Type::Boolean, span)?;
                Type::Boolean
            }
            Expr::Unary(UnOp::Neg, inner) => {
                self.expect(inner, Type::Integer, span)?;
                Type::Integer
            }
            Expr::Binary(op, l, r) => {
                if op.is_arithmetic() {
                    self.expect(l, Type::Integer, span)?;
                    self.expect(r, Type::Integer, span)?;
                    Type::Integer
                } else if op.is_logical() {
                    self.expect(l, Type::Boolean, span)?;
                    self.expect(r, Type::Boolean, span)?;
                    Type::Boolean
                } else if matches!(op, BinOp::Eq | BinOp::Ne) {
                    let lt = self.infer(l, span)?;
                    if lt == Type::Array {
                        return Err(type_err(format!("arrays cannot be compared in `{e}`"), span));
                    }
                    self.expect(r, lt, span)?;
                    Type::Boolean
                } else {
                    self.expect(l, Type::Integer, span)?;
                    self.expect(r, Type::Integer, span)?;
                    Type::Boolean
                }
            }
            Expr::Across {
                var,
                lo,
                hi,
                quantifier,
                body,
            } => {
                if self.env.contains_key(var) || self.bound.contains(var) {
                    return Err(dup(format!("variable `{var}`"), span));
                }
                self.expect(lo, Type::Integer, span)?;
                self.expect(hi, Type::Integer, span)?;
                self.bound.push(var.clone());
                let want = match quantifier {
                    super::Quantifier::All | super::Quantifier::Some => Type::Boolean,
                    super::Quantifier::Sum | super::Quantifier::Product => Type::Integer,
                };
                let res = self.expect(body, want, span);
                self.bound.pop();
                res?;
                want
            }
        })
    }
}

struct Checker {
    scope: Scope,
    params: BTreeSet<String>,
    tags: BTreeSet<String>,
    targets: BTreeSet<u32>,
    labels: BTreeSet<String>,
}

impl Checker {
    fn writable(&self, name: &str, span: Span) -> Result<Type, ParseError> {
        let ty = self.scope.lookup(name, span)?;
        if self.params.contains(name) {
            return Err(type_err(format!("parameter `{name}` is read-only"), span));
        }
        Ok(ty)
    }

    fn block(&mut self, block: &Block) -> Result<(), ParseError> {
        for instr in block {
            let span = instr.span;
            match &instr.kind {
                InstrKind::Assign { target, value } => {
                    let ty = self.writable(target, span)?;
                    self.scope.expect(value, ty, span)?;
                }
                InstrKind::AssignIndex { array, index, value } => {
                    if self.writable(array, span)? != Type::Array {
                        return Err(type_err(format!("`{array}` is not an array"), span));
                    }
                    self.scope.expect(index, Type::Integer, span)?;
                    self.scope.expect(value, Type::Integer, span)?;
                }
                InstrKind::If {
                    cond,
                    then_branch,
                    else_branch,
                } => {
                    self.scope.expect(cond, Type::Boolean, span)?;
                    self.block(then_branch)?;
                    if let Some(b) = else_branch {
                        self.block(b)?;
                    }
                }
                InstrKind::Loop {
                    from,
                    until,
                    body,
                    label,
                } => {
                    if !self.labels.insert(label.clone()) {
                        return Err(dup(format!("loop label `{label}`"), span));
                    }
                    if let Some(b) = from {
                        self.block(b)?;
                    }
                    self.scope.expect(until, Type::Boolean, span)?;
                    self.block(body)?;
                }
                InstrKind::Check { cond, tag, origin } => {
                    self.scope.expect(cond, Type::Boolean, span)?;
                    if let Some(t) = tag {
                        if !self.tags.insert(t.clone()) {
                            return Err(dup(format!("tag `{t}`"), span));
                        }
                    }
                    if let CheckOrigin::Seeded { target } = origin {
                        if tag.is_some() {
                            return Err(type_err("seeded checks carry no tag".into(), span));
                        }
                        if *target != 0 && !self.targets.insert(*target) {
                            return Err(dup(format!("target {target}"), span));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use crate::lang::{parse, ParseErrorKind};

    fn kind(src: &str) -> ParseErrorKind {
        parse(src).unwrap_err().kind
    }

    #[test]
    fn rejects_unresolved() {
        assert!(matches!(
            kind("routine f () local x: INTEGER do x := y end"),
            ParseErrorKind::Unresolved(n) if n == "y"
        ));
    }

    #[test]
    fn rejects_type_mismatch() {
        assert!(matches!(
            kind("routine f () local x: INTEGER do x := true end"),
            ParseErrorKind::Type(_)
        ));
        assert!(matches!(
            kind("routine f () local x: INTEGER do if x then x := 1 end end"),
            ParseErrorKind::Type(_)
        ));
    }

    #[test]
    fn rejects_duplicate_tags_and_names() {
        assert!(matches!(
            kind("routine f (x: INTEGER) local x: INTEGER do end"),
            ParseErrorKind::Duplicate(_)
        ));
        assert!(matches!(
            kind("routine f (x: INTEGER) do check ok: x > 0 end ensure ok: x > 0 end"),
            ParseErrorKind::Duplicate(_)
        ));
    }

    #[test]
    fn parameters_are_read_only() {
        assert!(matches!(kind("routine f (x: INTEGER) do x := 1 end"), ParseErrorKind::Type(_)));
    }

    #[test]
    fn error_location_points_at_instruction() {
        let e = parse("routine f ()\n  local x: INTEGER\n  do\n    x := z\n  end").unwrap_err();
        assert_eq!((e.line, e.col), (4, 5));
    }

    #[test]
    fn quantifier_variable_scoped() {
        parse("routine f (a: ARRAY) require across 0 .. a.count - 1 as k all a[k] >= 0 end do end").unwrap();
        assert!(matches!(
            kind("routine f (a: ARRAY) require (across 0 .. 1 as k all k >= 0 end) and k > 0 do end"),
            ParseErrorKind::Unresolved(_)
        ));
    }
}
