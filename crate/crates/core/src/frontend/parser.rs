use super::ast::*;
use super::lexer::{tokenize, Keyword, Token, TokenKind};
use super::FrontendError;
use crate::value::Value;

type PResult<T> = Result<T, FrontendError>;

/// Parses a single SELECT statement (an optional trailing `;` is allowed).
pub fn parse(sql: &str) -> PResult<Select> {
    match parse_statement(sql)? {
        Statement::Select(s) => Ok(s),
        Statement::Explain(_) => Err(FrontendError::Unsupported("EXPLAIN is not a query".into())),
    }
}

/// Parses `SELECT ...` or `EXPLAIN [QUERY PLAN] SELECT ...`.
pub fn parse_statement(sql: &str) -> PResult<Statement> {
    let tokens = tokenize(sql)?;
    let mut p = Parser { tokens, pos: 0 };
    let stmt = if p.eat_word("EXPLAIN") {
        if p.eat_word("QUERY") {
            p.expect_word("PLAN")?;
        }
        Statement::Explain(p.select()?)
    } else {
        Statement::Select(p.select()?)
    };
    p.eat(&TokenKind::Semicolon);
    p.expect_eof()?;
    Ok(stmt)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_at(&self, n: usize) -> &TokenKind {
        &self.tokens[(self.pos + n).min(self.tokens.len() - 1)].kind
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.kind != TokenKind::Eof {
            self.pos += 1;
        }
        t
    }

    fn prev_span(&self) -> Span {
        self.tokens[self.pos.saturating_sub(1)].span
    }

    fn error(&self, expected: &[&str]) -> FrontendError {
        let t = self.peek();
        FrontendError::Syntax {
            line: t.span.line,
            column: t.span.column,
            found: t.kind.to_string(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if &self.peek().kind == kind {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: Keyword) -> bool {
        self.eat(&TokenKind::Keyword(kw))
    }

    fn expect(&mut self, kind: TokenKind) -> PResult<Span> {
        if self.peek().kind == kind {
            Ok(self.advance().span)
        } else {
            Err(self.error(&[&kind.to_string()]))
        }
    }

    fn expect_kw(&mut self, kw: Keyword) -> PResult<Span> {
        self.expect(TokenKind::Keyword(kw))
    }

    /// Non-reserved words such as EXPLAIN, matched case-insensitively.
    fn eat_word(&mut self, word: &str) -> bool {
        match &self.peek().kind {
            TokenKind::Ident(w) if w.eq_ignore_ascii_case(word) => {
                self.advance();
                true
            }
            _ => false,
        }
    }

    fn expect_word(&mut self, word: &str) -> PResult<()> {
        if self.eat_word(word) {
            Ok(())
        } else {
            Err(self.error(&[word]))
        }
    }

    fn expect_eof(&self) -> PResult<()> {
        if self.peek().kind == TokenKind::Eof {
            Ok(())
        } else {
            Err(self.error(&["end of input"]))
        }
    }

    fn ident(&mut self) -> PResult<Ident> {
        match &self.peek().kind {
            TokenKind::Ident(s) | TokenKind::QuotedIdent(s) => {
                let name = s.clone();
                let span = self.advance().span;
                Ok(Ident { name, span })
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn select(&mut self) -> PResult<Select> {
        let start = self.expect_kw(Keyword::Select)?;
        let distinct = self.eat_kw(Keyword::Distinct);
        if !distinct {
            self.eat_kw(Keyword::All);
        }
        let mut items = vec![self.select_item()?];
        while self.eat(&TokenKind::Comma) {
            items.push(self.select_item()?);
        }
        self.expect_kw(Keyword::From)?;
        let mut from = vec![self.ident()?];
        while self.eat(&TokenKind::Comma) {
            from.push(self.ident()?);
        }
        let selection = if self.eat_kw(Keyword::Where) {
            Some(self.expr()?)
        } else {
            None
        };
        let mut group_by = Vec::new();
        if self.eat_kw(Keyword::Group) {
            self.expect_kw(Keyword::By)?;
            group_by.push(self.expr()?);
            while self.eat(&TokenKind::Comma) {
                group_by.push(self.expr()?);
            }
        }
        let having = if self.eat_kw(Keyword::Having) {
            Some(self.expr()?)
        } else {
            None
        };
        let mut order_by = Vec::new();
        if self.eat_kw(Keyword::Order) {
            self.expect_kw(Keyword::By)?;
            loop {
                let expr = self.expr()?;
                let desc = if self.eat_kw(Keyword::Desc) {
                    true
                } else {
                    self.eat_kw(Keyword::Asc);
                    false
                };
                order_by.push(OrderItem { expr, desc });
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        let limit = if self.eat_kw(Keyword::Limit) {
            Some(self.unary()?)
        } else {
            None
        };
        let offset = if self.eat_kw(Keyword::Offset) {
            Some(self.unary()?)
        } else {
            None
        };
        let union = if self.eat_kw(Keyword::Union) {
            self.eat_kw(Keyword::All);
            Some(Box::new(self.select()?))
        } else {
            None
        };
        Ok(Select {
            distinct,
            items,
            from,
            selection,
            group_by,
            having,
            order_by,
            limit,
            offset,
            union,
            span: start.to(self.prev_span()),
        })
    }

    fn select_item(&mut self) -> PResult<SelectItem> {
        if self.peek().kind == TokenKind::Star {
            return Ok(SelectItem::Star(self.advance().span));
        }
        let expr = self.expr()?;
        let bare_alias = matches!(
            self.peek().kind,
            TokenKind::Ident(_) | TokenKind::QuotedIdent(_)
        );
        let alias = if self.eat_kw(Keyword::As) || bare_alias {
            Some(self.ident()?)
        } else {
            None
        };
        Ok(SelectItem::Expr { expr, alias })
    }

    pub fn expr(&mut self) -> PResult<AstExpr> {
        self.or()
    }

    fn binary(op: BinaryOp, left: AstExpr, right: AstExpr) -> AstExpr {
        let span = left.span().to(right.span());
        AstExpr::Binary {
            op,
            left: Box::new(left),
            right: Box::new(right),
            span,
        }
    }

    fn or(&mut self) -> PResult<AstExpr> {
        let mut left = self.and()?;
        while self.eat_kw(Keyword::Or) {
            let right = self.and()?;
            left = Self::binary(BinaryOp::Or, left, right);
        }
        Ok(left)
    }

    fn and(&mut self) -> PResult<AstExpr> {
        let mut left = self.not()?;
        while self.eat_kw(Keyword::And) {
            let right = self.not()?;
            left = Self::binary(BinaryOp::And, left, right);
        }
        Ok(left)
    }

    fn not(&mut self) -> PResult<AstExpr> {
        if self.peek().kind == TokenKind::Keyword(Keyword::Not) {
            let start = self.advance().span;
            let expr = self.not()?;
            let span = start.to(expr.span());
            return Ok(AstExpr::Not {
                expr: Box::new(expr),
                span,
            });
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult<AstExpr> {
        let left = self.additive()?;
        let op = match self.peek().kind {
            TokenKind::Eq => BinaryOp::Eq,
            TokenKind::Ne => BinaryOp::Ne,
            TokenKind::Lt => BinaryOp::Lt,
            TokenKind::Le => BinaryOp::Le,
            TokenKind::Gt => BinaryOp::Gt,
            TokenKind::Ge => BinaryOp::Ge,
            TokenKind::Keyword(Keyword::Between) => {
                self.advance();
                let lo = self.additive()?;
                self.expect_kw(Keyword::And)?;
                let hi = self.additive()?;
                let ge = Self::binary(BinaryOp::Ge, left.clone(), lo);
                let le = Self::binary(BinaryOp::Le, left, hi);
                return Ok(Self::binary(BinaryOp::And, ge, le));
            }
            TokenKind::Keyword(Keyword::Not)
                if self.peek_at(1) == &TokenKind::Keyword(Keyword::In) =>
            {
                let start = self.advance().span;
                let e = self.in_tail(left)?;
                let span = start.to(e.span());
                return Ok(AstExpr::Not {
                    expr: Box::new(e),
                    span,
                });
            }
            TokenKind::Keyword(Keyword::In) => return self.in_tail(left),
            _ => return Ok(left),
        };
        self.advance();
        let right = self.additive()?;
        Ok(Self::binary(op, left, right))
    }

    fn in_tail(&mut self, left: AstExpr) -> PResult<AstExpr> {
        self.expect_kw(Keyword::In)?;
        self.expect(TokenKind::LParen)?;
        if self.peek().kind != TokenKind::Keyword(Keyword::Select) {
            return Err(self.error(&["SELECT"]));
        }
        let subquery = self.select()?;
        let end = self.expect(TokenKind::RParen)?;
        let span = left.span().to(end);
        Ok(AstExpr::InSubquery {
            expr: Box::new(left),
            subquery: Box::new(subquery),
            span,
        })
    }

    fn additive(&mut self) -> PResult<AstExpr> {
        let mut left = self.multiplicative()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Plus => BinaryOp::Add,
                TokenKind::Minus => BinaryOp::Sub,
                _ => return Ok(left),
            };
            self.advance();
            let right = self.multiplicative()?;
            left = Self::binary(op, left, right);
        }
    }

    fn multiplicative(&mut self) -> PResult<AstExpr> {
        let mut left = self.unary()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Star => BinaryOp::Mul,
                TokenKind::Slash => BinaryOp::Div,
                _ => return Ok(left),
            };
            self.advance();
            let right = self.unary()?;
            left = Self::binary(op, left, right);
        }
    }

    fn unary(&mut self) -> PResult<AstExpr> {
        if self.peek().kind == TokenKind::Minus {
            let start = self.advance().span;
            // Fold the sign into numeric literals so i64::MIN is expressible.
            match self.peek().kind.clone() {
                TokenKind::Int(v) => {
                    let end = self.advance().span;
                    let value = if v <= i64::MAX as u64 + 1 {
                        Value::Int64((v as i64).wrapping_neg())
                    } else {
                        return Err(self.error(&["integer within 64 bits"]));
                    };
                    return Ok(AstExpr::Literal {
                        value,
                        span: start.to(end),
                    });
                }
                TokenKind::Float(v) => {
                    let end = self.advance().span;
                    return Ok(AstExpr::Literal {
                        value: Value::Float32(-v),
                        span: start.to(end),
                    });
                }
                _ => {}
            }
            let expr = self.unary()?;
            if let AstExpr::Literal {
                value: Value::Int64(v),
                span,
            } = &expr
            {
                if *v != i64::MIN {
                    return Ok(AstExpr::Literal {
                        value: Value::Int64(-v),
                        span: start.to(*span),
                    });
                }
            }
            if let AstExpr::Literal {
                value: Value::Float32(v),
                span,
            } = &expr
            {
                return Ok(AstExpr::Literal {
                    value: Value::Float32(-v),
                    span: start.to(*span),
                });
            }
            let span = start.to(expr.span());
            return Ok(AstExpr::Neg {
                expr: Box::new(expr),
                span,
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<AstExpr> {
        let tok = self.peek().clone();
        let literal = |value, p: &mut Self| {
            p.advance();
            Ok(AstExpr::Literal {
                value,
                span: tok.span,
            })
        };
        match &tok.kind {
            TokenKind::Int(v) => {
                if *v > i64::MAX as u64 {
                    return Err(self.error(&["integer within 64 bits"]));
                }
                literal(Value::Int64(*v as i64), self)
            }
            TokenKind::Float(v) => literal(Value::Float32(*v), self),
            TokenKind::Str(s) => literal(Value::Str(s.clone()), self),
            TokenKind::Keyword(Keyword::Null) => literal(Value::Null, self),
            TokenKind::Keyword(Keyword::True) => literal(Value::Bool(true), self),
            TokenKind::Keyword(Keyword::False) => literal(Value::Bool(false), self),
            TokenKind::LParen => {
                self.advance();
                if self.peek().kind == TokenKind::Keyword(Keyword::Select) {
                    let select = self.select()?;
                    let end = self.expect(TokenKind::RParen)?;
                    return Ok(AstExpr::Subquery {
                        select: Box::new(select),
                        span: tok.span.to(end),
                    });
                }
                let e = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(e)
            }
            TokenKind::Ident(_) | TokenKind::QuotedIdent(_) => {
                let first = self.ident()?;
                if self.peek().kind == TokenKind::LParen {
                    return self.call(first);
                }
                if self.eat(&TokenKind::Dot) {
                    let column = self.ident()?;
                    let span = first.span.to(column.span);
                    return Ok(AstExpr::Column {
                        table: Some(first),
                        column,
                        span,
                    });
                }
                let span = first.span;
                Ok(AstExpr::Column {
                    table: None,
                    column: first,
                    span,
                })
            }
            _ => Err(self.error(&["expression"])),
        }
    }

    fn call(&mut self, name: Ident) -> PResult<AstExpr> {
        self.expect(TokenKind::LParen)?;
        let mut distinct = false;
        let mut star = false;
        let mut args = Vec::new();
        if self.eat(&TokenKind::Star) {
            star = true;
        } else if self.peek().kind != TokenKind::RParen {
            distinct = self.eat_kw(Keyword::Distinct);
            args.push(self.expr()?);
            while self.eat(&TokenKind::Comma) {
                args.push(self.expr()?);
            }
        }
        let end = self.expect(TokenKind::RParen)?;
        let span = name.span.to(end);
        Ok(AstExpr::Call {
            name,
            distinct,
            star,
            args,
            span,
        })
    }
}
