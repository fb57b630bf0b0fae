//! Name resolution and type checking.

use super::ast::*;
use super::error::ParseError;
use std::collections::{HashMap, HashSet};

pub(super) fn resolve(program: &mut Program) -> Result<(), ParseError> {
    let mut class_names = HashSet::new();
    for class in &program.classes {
        if !class_names.insert(class.name.clone()) {
            return Err(ParseError::Duplicate {
                kind: "class",
                name: class.name.clone(),
            });
        }
    }

    let mut traps = HashSet::new();
    for class in &mut program.classes {
        let mut sigs: HashMap<String, (usize, Vec<ScalarType>, Option<ScalarType>)> = HashMap::new();
        for (i, m) in class.methods.iter().enumerate() {
            let sig = (i, m.param_types().collect(), m.ret);
            if sigs.insert(m.name.clone(), sig).is_some() {
                return Err(ParseError::Duplicate {
                    kind: "method",
                    name: format!("{}.{}", class.name, m.name),
                });
            }
        }
        for method in &mut class.methods {
            let mut cx = MethodCx {
                context: format!("{}.{}", class.name, method.name),
                sigs: &sigs,
                scopes: vec![HashMap::new()],
                frame_size: 0,
                ret: method.ret,
                traps: &mut traps,
            };
            for p in &method.params {
                cx.declare(&p.name, p.ty)?;
            }
            cx.block(&mut method.body)?;
            method.frame_size = cx.frame_size;
        }
    }
    Ok(())
}

type Sigs = HashMap<String, (usize, Vec<ScalarType>, Option<ScalarType>)>;

struct MethodCx<'a> {
    context: String,
    sigs: &'a Sigs,
    scopes: Vec<HashMap<String, (usize, ScalarType)>>,
    frame_size: usize,
    ret: Option<ScalarType>,
    traps: &'a mut HashSet<String>,
}

impl MethodCx<'_> {
    fn type_error(&self, message: impl Into<String>) -> ParseError {
        ParseError::Type {
            context: self.context.clone(),
            message: message.into(),
        }
    }

    fn lookup(&self, name: &str) -> Option<(usize, ScalarType)> {
        self.scopes.iter().rev().find_map(|s| s.get(name).copied())
    }

    fn declare(&mut self, name: &str, ty: ScalarType) -> Result<usize, ParseError> {
        if self.lookup(name).is_some() {
            return Err(ParseError::Duplicate {
                kind: "variable",
                name: format!("{}::{}", self.context, name),
            });
        }
        let slot = self.frame_size;
        self.frame_size += 1;
        self.scopes.last_mut().unwrap().insert(name.to_string(), (slot, ty));
        Ok(slot)
    }

    fn block(&mut self, stmts: &mut [Stmt]) -> Result<(), ParseError> {
        self.scopes.push(HashMap::new());
        for s in stmts.iter_mut() {
            self.stmt(s)?;
        }
        self.scopes.pop();
        Ok(())
    }

    fn condition(&mut self, e: &mut Expr, what: &str) -> Result<(), ParseError> {
        if e.contains_call() {
            return Err(self.type_error(format!("method calls are not allowed in {what}")));
        }
        match self.expr(e)? {
            ScalarType::Bool => Ok(()),
            t => Err(self.type_error(format!("{what} must be bool, found {t}"))),
        }
    }

    fn stmt(&mut self, s: &mut Stmt) -> Result<(), ParseError> {
        match s {
            Stmt::Let { var, value } => {
                let ty = self.expr(value)?;
                var.slot = self.declare(&var.name, ty)?;
            }
            Stmt::Assign { var, value } => {
                let ty = self.expr(value)?;
                let (slot, declared) = self
                    .lookup(&var.name)
                    .ok_or_else(|| self.type_error(format!("unknown variable `{}`", var.name)))?;
                if declared != ty {
                    return Err(self.type_error(format!(
                        "cannot assign {ty} to `{}` of type {declared}",
                        var.name
                    )));
                }
                var.slot = slot;
            }
            Stmt::If {
                cond,
                then_block,
                else_block,
                ..
            } => {
                self.condition(cond, "condition")?;
                self.block(then_block)?;
                if let Some(b) = else_block {
                    self.block(b)?;
                }
            }
            Stmt::While { cond, body, .. } => {
                self.condition(cond, "condition")?;
                self.block(body)?;
            }
            Stmt::Return(value) => match (value.as_mut(), self.ret) {
                (None, None) => {}
                (Some(e), Some(expected)) => {
                    let ty = self.expr(e)?;
                    if ty != expected {
                        return Err(self.type_error(format!("returns {ty}, expected {expected}")));
                    }
                }
                (None, Some(expected)) => {
                    return Err(self.type_error(format!("missing {expected} return value")))
                }
                (Some(_), None) => return Err(self.type_error("method has no return type")),
            },
            Stmt::Trap { id, guard } => {
                if !self.traps.insert(id.clone()) {
                    return Err(ParseError::Duplicate {
                        kind: "trap",
                        name: id.clone(),
                    });
                }
                if let Some(g) = guard {
                    self.condition(g, "trap guard")?;
                }
            }
            Stmt::Call(call) => {
                self.call(call)?;
            }
        }
        Ok(())
    }

    fn call(&mut self, call: &mut Call) -> Result<Option<ScalarType>, ParseError> {
        let (index, params, ret) = self
            .sigs
            .get(&call.name)
            .cloned()
            .ok_or_else(|| self.type_error(format!("unknown method `{}`", call.name)))?;
        if params.len() != call.args.len() {
            return Err(self.type_error(format!(
                "`{}` takes {} arguments, {} given",
                call.name,
                params.len(),
                call.args.len()
            )));
        }
        for (arg, expected) in call.args.iter_mut().zip(params) {
            let ty = self.expr(arg)?;
            if ty != expected {
                return Err(self.type_error(format!(
                    "argument to `{}` is {ty}, expected {expected}",
                    call.name
                )));
            }
        }
        call.method = index;
        Ok(ret)
    }

    fn expr(&mut self, e: &mut Expr) -> Result<ScalarType, ParseError> {
        Ok(match e {
            Expr::Int(_) => ScalarType::Int,
            Expr::Bool(_) => ScalarType::Bool,
            Expr::Var(var) => {
                let (slot, ty) = self
                    .lookup(&var.name)
                    .ok_or_else(|| self.type_error(format!("unknown variable `{}`", var.name)))?;
                var.slot = slot;
                ty
            }
            Expr::Unary { op, operand } => {
                let ty = self.expr(operand)?;
                let want = match op {
                    UnaryOp::Neg => ScalarType::Int,
                    UnaryOp::Not => ScalarType::Bool,
                };
                if ty != want {
                    return Err(self.type_error(format!("operand of unary operator is {ty}, expected {want}")));
                }
                want
            }
            Expr::Binary { op, lhs, rhs } => {
                let (l, r) = (self.expr(lhs)?, self.expr(rhs)?);
                let op = *op;
                let mismatch = |cx: &Self| {
                    cx.type_error(format!("operands of `{}` are {l} and {r}", op.symbol()))
                };
                match op {
                    BinaryOp::Arith(_) => {
                        if l != ScalarType::Int || r != ScalarType::Int {
                            return Err(mismatch(self));
                        }
                        ScalarType::Int
                    }
                    BinaryOp::Cmp(Comparator::Eq | Comparator::Ne) => {
                        if l != r {
                            return Err(mismatch(self));
                        }
                        ScalarType::Bool
                    }
                    BinaryOp::Cmp(_) => {
                        if l != ScalarType::Int || r != ScalarType::Int {
                            return Err(mismatch(self));
                        }
                        ScalarType::Bool
                    }
                    BinaryOp::And | BinaryOp::Or => {
                        if l != ScalarType::Bool || r != ScalarType::Bool {
                            return Err(mismatch(self));
                        }
                        ScalarType::Bool
                    }
                }
            }
            Expr::Builtin { func, arg } => {
                let ty = self.expr(arg)?;
                if ty != ScalarType::Int {
                    return Err(self.type_error(format!("`{}` expects int, found {ty}", func.name())));
                }
                ScalarType::Int
            }
            Expr::Call(call) => {
                let name = call.name.clone();
                self.call(call)?
                    .ok_or_else(|| self.type_error(format!("`{name}` returns no value")))?
            }
        })
    }
}
