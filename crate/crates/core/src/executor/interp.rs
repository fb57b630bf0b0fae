use super::distance::{branch_distance, K};
use crate::minilang::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_steps: u64,
    pub max_call_depth: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_steps: 10_000,
            max_call_depth: 64,
        }
    }
}

/// A single invocation of a method with concrete arguments.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TestCase {
    pub method: MethodRef,
    pub args: Vec<Value>,
}

impl TestCase {
    /// Total argument magnitude; smaller tests are preferred on ties.
    pub fn size(&self) -> u128 {
        self.args.iter().map(Value::magnitude).sum()
    }
}

/// Outcomes and closest distances observed at one predicate site over an
/// execution (a site inside a loop may run many times).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredicateRecord {
    pub last_outcome: bool,
    pub took_true: bool,
    pub took_false: bool,
    pub true_distance: f64,
    pub false_distance: f64,
}

impl PredicateRecord {
    pub fn distance(&self, polarity: Polarity) -> f64 {
        match polarity {
            Polarity::True => self.true_distance,
            Polarity::False => self.false_distance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    /// Step, iteration or call-depth cap reached.
    Exhausted,
    /// Division or remainder by zero.
    ArithmeticFault,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub predicates: BTreeMap<SiteId, PredicateRecord>,
    pub covered: BTreeSet<TargetId>,
    pub traps_hit: BTreeSet<String>,
    pub termination: Termination,
    pub steps: u64,
    pub return_value: Option<Value>,
}

impl ExecutionTrace {
    pub fn exhausted(&self) -> bool {
        self.termination == Termination::Exhausted
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("no method {0:?} in program")]
    UnknownMethod(MethodRef),
    #[error("method `{method}` takes {expected} arguments, {given} given")]
    Arity {
        method: String,
        expected: usize,
        given: usize,
    },
    #[error("argument {index} of `{method}` must be {expected}")]
    ArgType {
        method: String,
        index: usize,
        expected: ScalarType,
    },
    #[error("execution limits must be positive")]
    InvalidLimits,
}

/// Check that a test case matches its method's signature.
pub fn check_test(program: &Program, test: &TestCase) -> Result<(), ExecError> {
    let method = program
        .classes
        .get(test.method.class)
        .and_then(|c| c.methods.get(test.method.method))
        .ok_or(ExecError::UnknownMethod(test.method))?;
    if method.params.len() != test.args.len() {
        return Err(ExecError::Arity {
            method: method.name.clone(),
            expected: method.params.len(),
            given: test.args.len(),
        });
    }
    for (index, (p, a)) in method.params.iter().zip(&test.args).enumerate() {
        if p.ty != a.ty() {
            return Err(ExecError::ArgType {
                method: method.name.clone(),
                index,
                expected: p.ty,
            });
        }
    }
    Ok(())
}

/// Run one test with branch instrumentation.
pub fn execute(program: &Program, test: &TestCase, limits: &Limits) -> Result<ExecutionTrace, ExecError> {
    check_test(program, test)?;
    if limits.max_steps == 0 || limits.max_call_depth == 0 {
        return Err(ExecError::InvalidLimits);
    }
    let mut it = Interp {
        class: &program.classes[test.method.class],
        limits,
        steps: 0,
        depth: 0,
        predicates: BTreeMap::new(),
        traps: BTreeSet::new(),
    };
    let result = it.invoke(test.method.method, test.args.clone());
    let (termination, return_value) = match result {
        Ok(v) => (Termination::Completed, v),
        Err(Abort::Exhausted) => (Termination::Exhausted, None),
        Err(Abort::Fault) => (Termination::ArithmeticFault, None),
    };
    let covered = it
        .predicates
        .iter()
        .flat_map(|(site, r)| {
            let t = r.took_true.then(|| BranchTarget::id_for(*site, Polarity::True));
            let f = r.took_false.then(|| BranchTarget::id_for(*site, Polarity::False));
            t.into_iter().chain(f)
        })
        .collect();
    Ok(ExecutionTrace {
        predicates: it.predicates,
        covered,
        traps_hit: it.traps,
        termination,
        steps: it.steps,
        return_value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Abort {
    Exhausted,
    Fault,
}

enum Flow {
    Next,
    Return(Option<Value>),
}

#[derive(Debug, Clone, Copy)]
struct Cond {
    value: bool,
    to_true: f64,
    to_false: f64,
}

impl Cond {
    fn atom(value: bool) -> Cond {
        Cond {
            value,
            to_true: if value { 0.0 } else { K },
            to_false: if value { K } else { 0.0 },
        }
    }
}

struct Interp<'p> {
    class: &'p Class,
    limits: &'p Limits,
    steps: u64,
    depth: usize,
    predicates: BTreeMap<SiteId, PredicateRecord>,
    traps: BTreeSet<String>,
}

impl<'p> Interp<'p> {
    fn tick(&mut self) -> Result<(), Abort> {
        self.steps += 1;
        if self.steps > self.limits.max_steps {
            Err(Abort::Exhausted)
        } else {
            Ok(())
        }
    }

    fn invoke(&mut self, index: usize, args: Vec<Value>) -> Result<Option<Value>, Abort> {
        if self.depth >= self.limits.max_call_depth {
            return Err(Abort::Exhausted);
        }
        let method: &'p Method = &self.class.methods[index];
        let mut frame = args;
        frame.resize(method.frame_size.max(frame.len()), Value::Int(0));
        self.depth += 1;
        let flow = self.block(&method.body, &mut frame);
        self.depth -= 1;
        match flow? {
            Flow::Return(v) => Ok(v),
            Flow::Next => Ok(method.ret.map(Value::default_for)),
        }
    }

    fn block(&mut self, stmts: &'p [Stmt], frame: &mut Vec<Value>) -> Result<Flow, Abort> {
        for s in stmts {
            if let Flow::Return(v) = self.stmt(s, frame)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Next)
    }

    fn stmt(&mut self, s: &'p Stmt, frame: &mut Vec<Value>) -> Result<Flow, Abort> {
        self.tick()?;
        match s {
            Stmt::Let { var, value } | Stmt::Assign { var, value } => {
                let v = self.eval(value, frame)?;
                frame[var.slot] = v;
            }
            Stmt::If {
                site,
                cond,
                then_block,
                else_block,
            } => {
                if self.predicate(*site, cond, frame)? {
                    return self.block(then_block, frame);
                } else if let Some(b) = else_block {
                    return self.block(b, frame);
                }
            }
            Stmt::While {
                site,
                cond,
                max_iter,
                body,
            } => {
                let mut iterations = 0u32;
                while self.predicate(*site, cond, frame)? {
                    if iterations == *max_iter {
                        return Err(Abort::Exhausted);
                    }
                    iterations += 1;
                    self.tick()?;
                    if let Flow::Return(v) = self.block(body, frame)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            Stmt::Return(value) => {
                let v = match value {
                    Some(e) => Some(self.eval(e, frame)?),
                    None => None,
                };
                return Ok(Flow::Return(v));
            }
            Stmt::Trap { id, guard } => {
                let fire = match guard {
                    Some(g) => self.eval_bool(g, frame)?,
                    None => true,
                };
                if fire {
                    self.traps.insert(id.clone());
                }
            }
            Stmt::Call(call) => {
                self.call(call, frame)?;
            }
        }
        Ok(Flow::Next)
    }

    fn predicate(&mut self, site: SiteId, cond: &'p Expr, frame: &[Value]) -> Result<bool, Abort> {
        let c = self.cond(cond, frame)?;
        let rec = self.predicates.entry(site).or_insert(PredicateRecord {
            last_outcome: c.value,
            took_true: false,
            took_false: false,
            true_distance: f64::INFINITY,
            false_distance: f64::INFINITY,
        });
        rec.last_outcome = c.value;
        if c.value {
            rec.took_true = true;
        } else {
            rec.took_false = true;
        }
        rec.true_distance = rec.true_distance.min(c.to_true);
        rec.false_distance = rec.false_distance.min(c.to_false);
        Ok(c.value)
    }

    /// Evaluate a call-free boolean expression together with its distances
    /// to either outcome. `and` sums, `or` takes the minimum, `!` swaps.
    fn cond(&mut self, e: &'p Expr, frame: &[Value]) -> Result<Cond, Abort> {
        match e {
            Expr::Binary {
                op: BinaryOp::Cmp(cmp),
                lhs,
                rhs,
            } => {
                let a = as_int(self.eval(lhs, frame)?);
                let b = as_int(self.eval(rhs, frame)?);
                Ok(Cond {
                    value: cmp.holds(a, b),
                    to_true: branch_distance(*cmp, a, b, true),
                    to_false: branch_distance(*cmp, a, b, false),
                })
            }
            Expr::Binary {
                op: op @ (BinaryOp::And | BinaryOp::Or),
                lhs,
                rhs,
            } => {
                let a = self.cond(lhs, frame)?;
                let is_and = *op == BinaryOp::And;
                // The right operand only runs for real when the left one
                // does not short-circuit; otherwise a fault in it is moot.
                let short_circuits = a.value != is_and;
                let b = match self.cond(rhs, frame) {
                    Ok(b) => b,
                    Err(_) if short_circuits => Cond::atom(false),
                    Err(e) => return Err(e),
                };
                Ok(if is_and {
                    Cond {
                        value: a.value && b.value,
                        to_true: a.to_true + b.to_true,
                        to_false: a.to_false.min(b.to_false),
                    }
                } else {
                    Cond {
                        value: a.value || b.value,
                        to_true: a.to_true.min(b.to_true),
                        to_false: a.to_false + b.to_false,
                    }
                })
            }
            Expr::Unary {
                op: UnaryOp::Not,
                operand,
            } => {
                let c = self.cond(operand, frame)?;
                Ok(Cond {
                    value: !c.value,
                    to_true: c.to_false,
                    to_false: c.to_true,
                })
            }
            other => Ok(Cond::atom(as_bool(self.eval(other, frame)?))),
        }
    }

    fn eval_bool(&mut self, e: &'p Expr, frame: &[Value]) -> Result<bool, Abort> {
        Ok(as_bool(self.eval(e, frame)?))
    }

    fn eval(&mut self, e: &'p Expr, frame: &[Value]) -> Result<Value, Abort> {
        Ok(match e {
            Expr::Int(v) => Value::Int(*v),
            Expr::Bool(b) => Value::Bool(*b),
            Expr::Var(v) => frame[v.slot],
            Expr::Unary { op, operand } => {
                let v = self.eval(operand, frame)?;
                match op {
                    UnaryOp::Neg => Value::Int(as_int(v).wrapping_neg()),
                    UnaryOp::Not => Value::Bool(!as_bool(v)),
                }
            }
            Expr::Binary { op, lhs, rhs } => match op {
                BinaryOp::And => {
                    Value::Bool(self.eval_bool(lhs, frame)? && self.eval_bool(rhs, frame)?)
                }
                BinaryOp::Or => {
                    Value::Bool(self.eval_bool(lhs, frame)? || self.eval_bool(rhs, frame)?)
                }
                BinaryOp::Cmp(cmp) => {
                    let a = as_int(self.eval(lhs, frame)?);
                    let b = as_int(self.eval(rhs, frame)?);
                    Value::Bool(cmp.holds(a, b))
                }
                BinaryOp::Arith(op) => {
                    let a = as_int(self.eval(lhs, frame)?);
                    let b = as_int(self.eval(rhs, frame)?);
                    Value::Int(arith(*op, a, b)?)
                }
            },
            Expr::Builtin { func, arg } => {
                let v = as_int(self.eval(arg, frame)?);
                Value::Int(match func {
                    Builtin::Abs => v.wrapping_abs(),
                    Builtin::I32 => v as i32 as i64,
                })
            }
            Expr::Call(call) => self.call(call, frame)?.unwrap_or(Value::Int(0)),
        })
    }

    fn call(&mut self, call: &'p Call, frame: &[Value]) -> Result<Option<Value>, Abort> {
        let mut args = Vec::with_capacity(call.args.len());
        for a in &call.args {
            args.push(self.eval(a, frame)?);
        }
        self.invoke(call.method, args)
    }
}

fn arith(op: ArithOp, a: i64, b: i64) -> Result<i64, Abort> {
    Ok(match op {
        ArithOp::Add => a.wrapping_add(b),
        ArithOp::Sub => a.wrapping_sub(b),
        ArithOp::Mul => a.wrapping_mul(b),
        ArithOp::Div if b == 0 => return Err(Abort::Fault),
        ArithOp::Div => a.wrapping_div(b),
        ArithOp::Rem if b == 0 => return Err(Abort::Fault),
        ArithOp::Rem => a.wrapping_rem(b),
    })
}

fn as_int(v: Value) -> i64 {
    match v {
        Value::Int(i) => i,
        Value::Bool(b) => b as i64,
    }
}

fn as_bool(v: Value) -> bool {
    match v {
        Value::Bool(b) => b,
        Value::Int(i) => i != 0,
    }
}
