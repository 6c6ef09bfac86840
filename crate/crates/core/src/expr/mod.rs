//! Expression graphs for smooth real functions on regions of C² ≅ R⁴.

mod complex;
mod diff;
mod eval;
mod field;
mod node;
mod parse;

use std::collections::{HashMap, HashSet};

pub use complex::CExpr;
pub use eval::{EvalError, Instr, Tape};
pub use field::{
    compose_holo, wirtinger, wirtinger_max, Box4, ComplexField, HoloMap, HoloPoly, Point4, ScalarField, DEFAULT_MAX_ORDER,
};
pub use node::{Constant, Expr, Func, Op, Rational, Var};
pub use parse::{parse_expr, parse_field, Params, ParseError};

/// Post-order (children before parents) list of the distinct nodes reachable from `roots`.
pub fn topo_order(roots: &[Expr]) -> Vec<Expr> {
    topo_order_until(roots, |_| false)
}

/// Post-order traversal that does not descend below nodes for which `stop` holds.
pub(crate) fn topo_order_until(roots: &[Expr], stop: impl Fn(&Expr) -> bool) -> Vec<Expr> {
    let mut seen: HashSet<u64> = HashSet::new();
    let mut out = Vec::new();
    let mut stack: Vec<(Expr, bool)> = roots.iter().rev().map(|e| (e.clone(), false)).collect();
    while let Some((e, expanded)) = stack.pop() {
        if expanded {
            out.push(e);
            continue;
        }
        if !seen.insert(e.id()) {
            continue;
        }
        if stop(&e) {
            out.push(e);
            continue;
        }
        stack.push((e.clone(), true));
        for c in e.children().into_iter().rev() {
            if !seen.contains(&c.id()) {
                stack.push((c.clone(), false));
            }
        }
    }
    out
}

/// Replaces each coordinate variable by the corresponding expression in `subs` (indexed x, y, u, v).
pub fn substitute(e: &Expr, subs: &[Expr; 4]) -> Expr {
    substitute_many(std::slice::from_ref(e), subs).pop().expect("one output")
}

pub fn substitute_many(roots: &[Expr], subs: &[Expr; 4]) -> Vec<Expr> {
    let mut memo: HashMap<u64, Expr> = HashMap::new();
    for n in topo_order(roots) {
        let get = |c: &Expr| memo[&c.id()].clone();
        let out = match n.op() {
            Op::Const(_) => n.clone(),
            Op::Var(v) => subs[v.index()].clone(),
            Op::Add(a, b) => get(a).add(&get(b)),
            Op::Mul(a, b) => get(a).mul(&get(b)),
            Op::Div(a, b) => get(a).div(&get(b)),
            Op::Neg(a) => get(a).neg(),
            Op::Powi(a, k) => get(a).powi(*k),
            Op::Func(f, a) => Expr::func(*f, &get(a)),
        };
        memo.insert(n.id(), out);
    }
    roots.iter().map(|r| memo[&r.id()].clone()).collect()
}
