//! Recursive-descent parser. Produces an unresolved tree (slots and callee
//! indices are filled in by [`super::check`]).

use super::ast::*;
use super::error::{ParseError, Pos, SyntaxError};
use super::lexer::{tokenize, Tok, Token};

const UNRESOLVED: usize = usize::MAX;

pub(super) fn parse_unresolved(src: &str) -> Result<Program, ParseError> {
    let tokens = tokenize(src)?;
    let mut p = Parser {
        tokens,
        at: 0,
        next_site: 0,
    };
    p.program()
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
    next_site: SiteId,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.at].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.at + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn pos(&self) -> Pos {
        self.tokens[self.at].pos
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.at].tok.clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[&str]) -> SyntaxError {
        SyntaxError {
            pos: self.pos(),
            message: format!("unexpected {}", self.peek().describe()),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_punct(&mut self, p: &'static str) -> Result<(), SyntaxError> {
        if self.is_punct(p) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&[&format!("`{p}`")]))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), SyntaxError> {
        if self.is_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&[&format!("`{kw}`")]))
        }
    }

    fn ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek() {
            Tok::Ident(s) if !is_reserved(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected(&["identifier"])),
        }
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut name = "main".to_string();
        if self.is_keyword("program") {
            self.bump();
            name = self.ident()?;
            self.expect_punct(";")?;
        }
        let mut classes = Vec::new();
        while !matches!(self.peek(), Tok::Eof) {
            classes.push(self.class()?);
        }
        if classes.is_empty() {
            return Err(self.unexpected(&["`class`"]).into());
        }
        Ok(Program { name, classes })
    }

    fn class(&mut self) -> Result<Class, ParseError> {
        self.expect_keyword("class")?;
        let name = self.ident()?;
        self.expect_punct("{")?;
        let mut methods = Vec::new();
        while !self.is_punct("}") {
            if !self.is_keyword("fn") {
                return Err(self.unexpected(&["`fn`", "`}`"]).into());
            }
            methods.push(self.method()?);
        }
        self.bump();
        Ok(Class { name, methods })
    }

    fn method(&mut self) -> Result<Method, ParseError> {
        self.expect_keyword("fn")?;
        let name = self.ident()?;
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.is_punct(")") {
            loop {
                let pname = self.ident()?;
                self.expect_punct(":")?;
                let ty = self.scalar_type()?;
                params.push(Param { name: pname, ty });
                if self.is_punct(",") {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        let ret = if self.is_punct("->") {
            self.bump();
            Some(self.scalar_type()?)
        } else {
            None
        };
        let body = self.block()?;
        Ok(Method {
            name,
            params,
            ret,
            body,
            frame_size: 0,
        })
    }

    fn scalar_type(&mut self) -> Result<ScalarType, SyntaxError> {
        let ty = match self.peek() {
            Tok::Ident(s) if s == "int" => ScalarType::Int,
            Tok::Ident(s) if s == "bool" => ScalarType::Bool,
            _ => return Err(self.unexpected(&["`int`", "`bool`"])),
        };
        self.bump();
        Ok(ty)
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.is_punct("}") {
            if matches!(self.peek(), Tok::Eof) {
                return Err(self.unexpected(&["`}`"]).into());
            }
            stmts.push(self.stmt()?);
        }
        self.bump();
        Ok(stmts)
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let kw = match self.peek() {
            Tok::Ident(s) => s.clone(),
            _ => return Err(self.unexpected(&["statement"]).into()),
        };
        match kw.as_str() {
            "let" => {
                self.bump();
                let name = self.ident()?;
                self.expect_punct("=")?;
                let value = self.expr()?;
                self.expect_punct(";")?;
                Ok(Stmt::Let {
                    var: Var {
                        name,
                        slot: UNRESOLVED,
                    },
                    value,
                })
            }
            "if" => self.if_stmt(),
            "while" => {
                let pos = self.pos();
                self.bump();
                let site = self.alloc_site();
                self.expect_punct("(")?;
                let cond = self.expr()?;
                self.expect_punct(")")?;
                let max_iter = match self.peek() {
                    Tok::Annot(a) if a == "maxiter" => {
                        self.bump();
                        match self.bump() {
                            Tok::Int(k) if k >= 1 && k <= u32::MAX as u64 => k as u32,
                            _ => {
                                return Err(SyntaxError {
                                    pos: self.tokens[self.at - 1].pos,
                                    message: "`@maxiter` needs a positive iteration bound".into(),
                                    expected: vec!["integer".into()],
                                }
                                .into())
                            }
                        }
                    }
                    Tok::Annot(_) => return Err(self.unexpected(&["`@maxiter`"]).into()),
                    _ => return Err(ParseError::UnboundedLoop { pos }),
                };
                let body = self.block()?;
                Ok(Stmt::While {
                    site,
                    cond,
                    max_iter,
                    body,
                })
            }
            "return" => {
                self.bump();
                if self.is_punct(";") {
                    self.bump();
                    return Ok(Stmt::Return(None));
                }
                let e = self.expr()?;
                self.expect_punct(";")?;
                Ok(Stmt::Return(Some(e)))
            }
            "trap" => {
                self.bump();
                let id = match self.peek() {
                    Tok::Str(s) if !s.is_empty() => s.clone(),
                    _ => return Err(self.unexpected(&["trap identifier string"]).into()),
                };
                self.bump();
                let guard = if self.is_keyword("if") {
                    self.bump();
                    self.expect_punct("(")?;
                    let g = self.expr()?;
                    self.expect_punct(")")?;
                    Some(g)
                } else {
                    None
                };
                self.expect_punct(";")?;
                Ok(Stmt::Trap { id, guard })
            }
            _ => {
                let name = self.ident()?;
                if self.is_punct("=") {
                    self.bump();
                    let value = self.expr()?;
                    self.expect_punct(";")?;
                    Ok(Stmt::Assign {
                        var: Var {
                            name,
                            slot: UNRESOLVED,
                        },
                        value,
                    })
                } else if self.is_punct("(") {
                    let call = self.call_args(name)?;
                    self.expect_punct(";")?;
                    Ok(Stmt::Call(call))
                } else {
                    Err(self.unexpected(&["`=`", "`(`"]).into())
                }
            }
        }
    }

    fn if_stmt(&mut self) -> Result<Stmt, ParseError> {
        self.expect_keyword("if")?;
        let site = self.alloc_site();
        self.expect_punct("(")?;
        let cond = self.expr()?;
        self.expect_punct(")")?;
        let then_block = self.block()?;
        let else_block = if self.is_keyword("else") {
            self.bump();
            if self.is_keyword("if") {
                Some(vec![self.if_stmt()?])
            } else {
                Some(self.block()?)
            }
        } else {
            None
        };
        Ok(Stmt::If {
            site,
            cond,
            then_block,
            else_block,
        })
    }

    fn alloc_site(&mut self) -> SiteId {
        let s = self.next_site;
        self.next_site += 1;
        s
    }

    fn call_args(&mut self, name: String) -> Result<Call, ParseError> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        if !self.is_punct(")") {
            loop {
                args.push(self.expr()?);
                if self.is_punct(",") {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(Call {
            name,
            method: UNRESOLVED,
            args,
        })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.binary(1)
    }

    fn binary_op(&self) -> Option<BinaryOp> {
        let p = match self.peek() {
            Tok::Punct(p) => *p,
            _ => return None,
        };
        Some(match p {
            "||" => BinaryOp::Or,
            "&&" => BinaryOp::And,
            "==" => BinaryOp::Cmp(Comparator::Eq),
            "!=" => BinaryOp::Cmp(Comparator::Ne),
            "<" => BinaryOp::Cmp(Comparator::Lt),
            "<=" => BinaryOp::Cmp(Comparator::Le),
            ">" => BinaryOp::Cmp(Comparator::Gt),
            ">=" => BinaryOp::Cmp(Comparator::Ge),
            "+" => BinaryOp::Arith(ArithOp::Add),
            "-" => BinaryOp::Arith(ArithOp::Sub),
            "*" => BinaryOp::Arith(ArithOp::Mul),
            "/" => BinaryOp::Arith(ArithOp::Div),
            "%" => BinaryOp::Arith(ArithOp::Rem),
            _ => return None,
        })
    }

    /// Precedence climbing; all binary operators are left-associative.
    fn binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binary_op() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.is_punct("-") {
            self.bump();
            if let Tok::Int(v) = *self.peek() {
                self.bump();
                // -(2^63) is the only literal that does not fit before negation.
                return Ok(Expr::Int((v as i64).wrapping_neg()));
            }
            let operand = self.unary()?;
            return Ok(Expr::Unary {
                op: UnaryOp::Neg,
                operand: Box::new(operand),
            });
        }
        if self.is_punct("!") {
            self.bump();
            let operand = self.unary()?;
            return Ok(Expr::Unary {
                op: UnaryOp::Not,
                operand: Box::new(operand),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                if v > i64::MAX as u64 {
                    return Err(SyntaxError::new(self.pos(), "integer literal out of range").into());
                }
                self.bump();
                Ok(Expr::Int(v as i64))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.bump();
                Ok(Expr::Bool(s == "true"))
            }
            Tok::Ident(s) if Builtin::from_name(&s).is_some() && matches!(self.peek_at(1), Tok::Punct("(")) => {
                self.bump();
                self.expect_punct("(")?;
                let arg = self.expr()?;
                self.expect_punct(")")?;
                Ok(Expr::Builtin {
                    func: Builtin::from_name(&s).unwrap(),
                    arg: Box::new(arg),
                })
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                if self.is_punct("(") {
                    Ok(Expr::Call(self.call_args(name)?))
                } else {
                    Ok(Expr::Var(Var {
                        name,
                        slot: UNRESOLVED,
                    }))
                }
            }
            _ => Err(self.unexpected(&["expression"]).into()),
        }
    }
}

const RESERVED: [&str; 15] = [
    "program", "class", "fn", "let", "if", "else", "while", "return", "trap", "true", "false",
    "int", "bool", "abs", "i32",
];

fn is_reserved(s: &str) -> bool {
    RESERVED.contains(&s)
}
