//! Syntax tree for MiniLang subject programs.
//!
//! The tree produced by the parser is already resolved: variables carry a
//! frame slot and call sites carry the callee's index within the class.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Identifies a conditional (`if` or `while`) within a program. Sites are
/// numbered in pre-order across the whole program, starting at zero.
pub type SiteId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarType {
    Int,
    Bool,
}

impl fmt::Display for ScalarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarType::Int => f.write_str("int"),
            ScalarType::Bool => f.write_str("bool"),
        }
    }
}

/// A runtime scalar. Integers wrap on overflow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
}

impl Value {
    pub fn ty(&self) -> ScalarType {
        match self {
            Value::Int(_) => ScalarType::Int,
            Value::Bool(_) => ScalarType::Bool,
        }
    }

    pub fn default_for(ty: ScalarType) -> Value {
        match ty {
            ScalarType::Int => Value::Int(0),
            ScalarType::Bool => Value::Bool(false),
        }
    }

    /// Magnitude used for test-size comparisons.
    pub fn magnitude(&self) -> u128 {
        match *self {
            Value::Int(v) => v.unsigned_abs() as u128,
            Value::Bool(b) => b as u128,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub name: String,
    pub classes: Vec<Class>,
}

impl Program {
    pub fn class(&self, name: &str) -> Option<(usize, &Class)> {
        self.classes.iter().enumerate().find(|(_, c)| c.name == name)
    }

    pub fn method(&self, r: MethodRef) -> &Method {
        &self.classes[r.class].methods[r.method]
    }

    /// Number of conditionals (and therefore sites) in the program.
    pub fn site_count(&self) -> u32 {
        self.classes
            .iter()
            .flat_map(|c| c.methods.iter())
            .map(|m| count_sites(&m.body))
            .sum()
    }
}

fn count_sites(block: &[Stmt]) -> u32 {
    block
        .iter()
        .map(|s| match s {
            Stmt::If {
                then_block,
                else_block,
                ..
            } => 1 + count_sites(then_block) + else_block.as_deref().map_or(0, count_sites),
            Stmt::While { body, .. } => 1 + count_sites(body),
            _ => 0,
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Class {
    pub name: String,
    pub methods: Vec<Method>,
}

impl Class {
    pub fn method_index(&self, name: &str) -> Option<usize> {
        self.methods.iter().position(|m| m.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MethodRef {
    pub class: usize,
    pub method: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: ScalarType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Method {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: Option<ScalarType>,
    pub body: Vec<Stmt>,
    /// Frame size: parameters occupy the first slots, then every `let`.
    pub frame_size: usize,
}

impl Method {
    pub fn param_types(&self) -> impl Iterator<Item = ScalarType> + '_ {
        self.params.iter().map(|p| p.ty)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Var {
    pub name: String,
    pub slot: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Let {
        var: Var,
        value: Expr,
    },
    Assign {
        var: Var,
        value: Expr,
    },
    If {
        site: SiteId,
        cond: Expr,
        then_block: Vec<Stmt>,
        else_block: Option<Vec<Stmt>>,
    },
    While {
        site: SiteId,
        cond: Expr,
        max_iter: u32,
        body: Vec<Stmt>,
    },
    Return(Option<Expr>),
    /// Bug trap: executing it (with a true guard, if any) records a hit.
    /// The guard is instrumentation, not program logic, so it is not a
    /// coverage target.
    Trap {
        id: String,
        guard: Option<Expr>,
    },
    Call(Call),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Call {
    pub name: String,
    pub method: usize,
    pub args: Vec<Expr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    /// Wrapping absolute value.
    Abs,
    /// Truncate to 32 bits and sign-extend, as a Java `int` would.
    I32,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Abs => "abs",
            Builtin::I32 => "i32",
        }
    }

    pub fn from_name(name: &str) -> Option<Builtin> {
        match name {
            "abs" => Some(Builtin::Abs),
            "i32" => Some(Builtin::I32),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Eq => "==",
            Comparator::Ne => "!=",
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
        }
    }

    pub fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            Comparator::Eq => lhs == rhs,
            Comparator::Ne => lhs != rhs,
            Comparator::Lt => lhs < rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Gt => lhs > rhs,
            Comparator::Ge => lhs >= rhs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
            ArithOp::Rem => "%",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Arith(ArithOp),
    Cmp(Comparator),
    And,
    Or,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Arith(op) => op.symbol(),
            BinaryOp::Cmp(c) => c.symbol(),
            BinaryOp::And => "&&",
            BinaryOp::Or => "||",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Cmp(Comparator::Eq | Comparator::Ne) => 3,
            BinaryOp::Cmp(_) => 4,
            BinaryOp::Arith(ArithOp::Add | ArithOp::Sub) => 5,
            BinaryOp::Arith(_) => 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Var(Var),
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Builtin {
        func: Builtin,
        arg: Box<Expr>,
    },
    Call(Call),
}

impl Expr {
    pub fn contains_call(&self) -> bool {
        match self {
            Expr::Call(_) => true,
            Expr::Int(_) | Expr::Bool(_) | Expr::Var(_) => false,
            Expr::Unary { operand, .. } => operand.contains_call(),
            Expr::Binary { lhs, rhs, .. } => lhs.contains_call() || rhs.contains_call(),
            Expr::Builtin { arg, .. } => arg.contains_call(),
        }
    }
}
