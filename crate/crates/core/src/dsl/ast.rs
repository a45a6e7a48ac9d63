use std::fmt;

/// Elementary functions available in expressions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Log,
    Exp,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Log => "log",
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "log" => Func::Log,
            "exp" => Func::Exp,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Func::Log => x.ln(),
            Func::Exp => x.exp(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Sqrt => x.sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }
}

/// Index inside `r[...]`: a 1-based literal or a variable bound by `sum`/`prod`.
#[derive(Clone, Debug, PartialEq)]
pub enum Index {
    Literal(usize),
    Bound(String),
}

/// Parsed expression over symbolic indices, before instantiation at a dimension.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Param(String),
    Var(Index),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
    Sum(String, Box<Expr>),
    Prod(String, Box<Expr>),
    /// Elementary symmetric polynomial `e_k`; expands to an explicit subset
    /// sum once the dimension is known.
    ESym(u32),
}

impl Expr {
    /// True when no `r[...]` uses a literal index. Such expressions only see
    /// the variables through full-range sums and products, hence are
    /// invariant under permutations of the variables.
    pub fn uses_only_bound_indices(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Param(_) | Expr::ESym(_) => true,
            Expr::Var(Index::Literal(_)) => false,
            Expr::Var(Index::Bound(_)) => true,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.uses_only_bound_indices(),
            Expr::Sum(_, a) | Expr::Prod(_, a) => a.uses_only_bound_indices(),
            Expr::Bin(_, a, b) => a.uses_only_bound_indices() && b.uses_only_bound_indices(),
        }
    }

    /// Largest literal index used, if any.
    pub fn max_literal_index(&self) -> Option<usize> {
        match self {
            Expr::Var(Index::Literal(k)) => Some(*k),
            Expr::Const(_) | Expr::Param(_) | Expr::ESym(_) | Expr::Var(_) => None,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.max_literal_index(),
            Expr::Sum(_, a) | Expr::Prod(_, a) => a.max_literal_index(),
            Expr::Bin(_, a, b) => match (a.max_literal_index(), b.max_literal_index()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    pub fn params(&self, out: &mut Vec<String>) {
        match self {
            Expr::Param(name) => {
                if !out.contains(name) {
                    out.push(name.clone());
                }
            }
            Expr::Const(_) | Expr::Var(_) | Expr::ESym(_) => {}
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.params(out),
            Expr::Sum(_, a) | Expr::Prod(_, a) => a.params(out),
            Expr::Bin(_, a, b) => {
                a.params(out);
                b.params(out);
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(v) => write!(f, "{v}"),
            Expr::Param(name) => write!(f, "{name}"),
            Expr::Var(Index::Literal(k)) => write!(f, "r[{k}]"),
            Expr::Var(Index::Bound(name)) => write!(f, "r[{name}]"),
            Expr::Neg(a) => write!(f, "-({a})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Pow(a, k) => write!(f, "pow({a}, {k})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Sum(var, a) => write!(f, "sum({var}, {a})"),
            Expr::Prod(var, a) => write!(f, "prod({var}, {a})"),
            Expr::ESym(k) => write!(f, "esym({k})"),
        }
    }
}
