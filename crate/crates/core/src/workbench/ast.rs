use serde::{Deserialize, Serialize};

/// Stable 1-based identifier of an executable statement.
pub type StmtId = u32;

/// A parsed toy-language program.
///
/// Every executable statement carries an ID in `1..=statement_count()`,
/// assigned in source order. Function headers are executable statements
/// too: a header is "executed" each time the function is entered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub functions: Vec<Function>,
    pub(crate) statement_count: u32,
}

impl Program {
    /// Number of statement IDs allocated (the `l` of the program).
    ///
    /// Mutations keep the numbering of the program they were applied to, so a
    /// mutant with a deleted `else` block still reports the original count.
    pub fn statement_count(&self) -> u32 {
        self.statement_count
    }

    /// The entry function is the first function in the source.
    pub fn entry(&self) -> &Function {
        &self.functions[0]
    }

    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }

    /// Source line of every statement ID, indexed by `id - 1`. IDs that no
    /// longer exist (deleted by a mutation) map to `None`.
    pub fn statement_lines(&self) -> Vec<Option<u32>> {
        let mut lines = vec![None; self.statement_count as usize];
        for f in &self.functions {
            lines[f.id as usize - 1] = Some(f.line);
            visit_block(&f.body, &mut |s| lines[s.id as usize - 1] = Some(s.line));
        }
        lines
    }

    pub(crate) fn find_stmt_mut(&mut self, id: StmtId) -> Option<&mut Stmt> {
        self.functions
            .iter_mut()
            .find_map(|f| find_in_block_mut(&mut f.body, id))
    }

    pub fn find_stmt(&self, id: StmtId) -> Option<&Stmt> {
        self.functions
            .iter()
            .find_map(|f| find_in_block(&f.body, id))
    }
}

fn find_in_block(block: &[Stmt], id: StmtId) -> Option<&Stmt> {
    for s in block {
        if s.id == id {
            return Some(s);
        }
        let found = match &s.kind {
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => find_in_block(then_block, id)
                .or_else(|| else_block.as_deref().and_then(|b| find_in_block(b, id))),
            StmtKind::While { body, .. } => find_in_block(body, id),
            _ => None,
        };
        if found.is_some() {
            return found;
        }
    }
    None
}

fn find_in_block_mut(block: &mut [Stmt], id: StmtId) -> Option<&mut Stmt> {
    for s in block {
        if s.id == id {
            return Some(s);
        }
        let found = match &mut s.kind {
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => match find_in_block_mut(then_block, id) {
                Some(s) => Some(s),
                None => else_block
                    .as_deref_mut()
                    .and_then(|b| find_in_block_mut(b, id)),
            },
            StmtKind::While { body, .. } => find_in_block_mut(body, id),
            _ => None,
        };
        if found.is_some() {
            return found;
        }
    }
    None
}

/// Pre-order walk over every statement nested in `block`.
pub fn visit_block<'a>(block: &'a [Stmt], f: &mut impl FnMut(&'a Stmt)) {
    for s in block {
        f(s);
        match &s.kind {
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => {
                visit_block(then_block, f);
                if let Some(b) = else_block {
                    visit_block(b, f);
                }
            }
            StmtKind::While { body, .. } => visit_block(body, f),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Function {
    /// Statement ID of the header.
    pub id: StmtId,
    pub line: u32,
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub id: StmtId,
    pub line: u32,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Assign {
        name: String,
        value: Expr,
    },
    If {
        cond: Expr,
        then_block: Vec<Stmt>,
        else_block: Option<Vec<Stmt>>,
    },
    While {
        cond: Expr,
        body: Vec<Stmt>,
    },
    Return(Option<Expr>),
    Print(Expr),
    Expr(Expr),
}

impl StmtKind {
    /// Expressions owned directly by this statement (not by nested blocks).
    pub fn own_exprs(&self) -> Vec<&Expr> {
        match self {
            StmtKind::Assign { value, .. } => vec![value],
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => vec![cond],
            StmtKind::Return(e) => e.iter().collect(),
            StmtKind::Print(e) | StmtKind::Expr(e) => vec![e],
        }
    }

    pub(crate) fn own_exprs_mut(&mut self) -> Vec<&mut Expr> {
        match self {
            StmtKind::Assign { value, .. } => vec![value],
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => vec![cond],
            StmtKind::Return(e) => e.iter_mut().collect(),
            StmtKind::Print(e) | StmtKind::Expr(e) => vec![e],
        }
    }

    pub fn is_predicate(&self) -> bool {
        matches!(self, StmtKind::If { .. } | StmtKind::While { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Int(i64),
    Str(String),
    Bool(bool),
    Var(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// `cond ? then : else`
    Cond(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

impl Expr {
    /// Pre-order traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Unary(_, e) => e.visit(f),
            Expr::Binary(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::Cond(c, a, b) => {
                c.visit(f);
                a.visit(f);
                b.visit(f);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.visit(f)),
            _ => {}
        }
    }

    pub(crate) fn visit_mut(&mut self, f: &mut impl FnMut(&mut Expr)) {
        f(self);
        match self {
            Expr::Unary(_, e) => e.visit_mut(f),
            Expr::Binary(_, a, b) => {
                a.visit_mut(f);
                b.visit_mut(f);
            }
            Expr::Cond(c, a, b) => {
                c.visit_mut(f);
                a.visit_mut(f);
                b.visit_mut(f);
            }
            Expr::Call(_, args) => args.iter_mut().for_each(|a| a.visit_mut(f)),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }

    pub const ARITHMETIC: [BinOp; 4] = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div];
    pub const RELATIONAL: [BinOp; 6] = [
        BinOp::Eq,
        BinOp::Ne,
        BinOp::Lt,
        BinOp::Le,
        BinOp::Gt,
        BinOp::Ge,
    ];
    pub const LOGICAL: [BinOp; 2] = [BinOp::And, BinOp::Or];

    /// Operators a mutation may swap this one for.
    pub fn swap_family(self) -> &'static [BinOp] {
        if Self::ARITHMETIC.contains(&self) {
            &Self::ARITHMETIC
        } else if Self::RELATIONAL.contains(&self) {
            &Self::RELATIONAL
        } else if Self::LOGICAL.contains(&self) {
            &Self::LOGICAL
        } else {
            &[]
        }
    }
}
