//! Flattened evaluation tapes with domain checking.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Weak};

use super::node::{Expr, Func, Node, Op};
use super::topo_order;

/// One tape instruction; operands index earlier slots.
#[derive(Clone, Copy, Debug)]
pub enum Instr {
    Const(f64),
    Var(usize),
    Add(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Neg(u32),
    Powi(u32, i32),
    Func(Func, u32),
}

/// An evaluation failed because an operation left its domain.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalError {
    pub op: &'static str,
    pub argument: f64,
    /// DSL text of the offending subexpression, truncated.
    pub node: String,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} out of domain (argument {:e}) at node {}", self.op, self.argument, self.node)
    }
}

impl std::error::Error for EvalError {}

/// A compiled multi-output evaluator.
pub struct Tape {
    instrs: Vec<Instr>,
    outputs: Vec<u32>,
    // weak so a tape cached on its own root does not keep the graph alive
    nodes: Vec<Weak<Node>>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape")
            .field("len", &self.instrs.len())
            .field("outputs", &self.outputs.len())
            .finish()
    }
}

impl Tape {
    pub fn compile(roots: &[Expr]) -> Tape {
        let order = topo_order(roots);
        let mut slot: HashMap<u64, u32> = HashMap::with_capacity(order.len());
        let mut instrs = Vec::with_capacity(order.len());
        for (i, n) in order.iter().enumerate() {
            let s = |c: &Expr| slot[&c.id()];
            let ins = match n.op() {
                Op::Const(c) => Instr::Const(c.value()),
                Op::Var(v) => Instr::Var(v.index()),
                Op::Add(a, b) => Instr::Add(s(a), s(b)),
                Op::Mul(a, b) => Instr::Mul(s(a), s(b)),
                Op::Div(a, b) => Instr::Div(s(a), s(b)),
                Op::Neg(a) => Instr::Neg(s(a)),
                Op::Powi(a, k) => Instr::Powi(s(a), *k),
                Op::Func(f, a) => Instr::Func(*f, s(a)),
            };
            instrs.push(ins);
            slot.insert(n.id(), i as u32);
        }
        let outputs = roots.iter().map(|r| slot[&r.id()]).collect();
        Tape {
            instrs,
            outputs,
            nodes: order.iter().map(Expr::downgrade).collect(),
        }
    }

    /// The cached single-output tape of an expression.
    pub fn of(e: &Expr) -> Arc<Tape> {
        e.node()
            .tape
            .get_or_init(|| Arc::new(Tape::compile(std::slice::from_ref(e))))
            .clone()
    }

    pub fn instrs(&self) -> &[Instr] {
        &self.instrs
    }

    pub fn outputs(&self) -> &[u32] {
        &self.outputs
    }

    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }

    pub(crate) fn node_text(&self, slot: usize) -> String {
        let Some(e) = Expr::upgrade(&self.nodes[slot]) else {
            return "<released>".to_string();
        };
        let mut s = e.to_string();
        if s.len() > 160 {
            let mut cut = 157;
            while !s.is_char_boundary(cut) {
                cut -= 1;
            }
            s.truncate(cut);
            s.push_str("...");
        }
        s
    }

    fn fail(&self, slot: usize, op: &'static str, argument: f64) -> EvalError {
        EvalError {
            op,
            argument,
            node: self.node_text(slot),
        }
    }

    /// Evaluates all outputs at `p`, writing them into `out`.
    pub fn eval_into(&self, p: &[f64; 4], scratch: &mut Vec<f64>, out: &mut [f64]) -> Result<(), EvalError> {
        scratch.clear();
        scratch.reserve(self.instrs.len());
        for (i, ins) in self.instrs.iter().enumerate() {
            let g = |k: u32| scratch[k as usize];
            let val = match *ins {
                Instr::Const(c) => c,
                Instr::Var(v) => p[v],
                Instr::Add(a, b) => g(a) + g(b),
                Instr::Mul(a, b) => g(a) * g(b),
                Instr::Div(a, b) => {
                    let d = g(b);
                    if d == 0.0 {
                        return Err(self.fail(i, "division", d));
                    }
                    g(a) / d
                }
                Instr::Neg(a) => -g(a),
                Instr::Powi(a, k) => {
                    let x = g(a);
                    if k < 0 && x == 0.0 {
                        return Err(self.fail(i, "negative power", x));
                    }
                    x.powi(k)
                }
                Instr::Func(f, a) => {
                    let x = g(a);
                    match f {
                        Func::Exp => x.exp(),
                        Func::Ln => {
                            if x <= 0.0 {
                                return Err(self.fail(i, "ln", x));
                            }
                            x.ln()
                        }
                        Func::Sin => x.sin(),
                        Func::Cos => x.cos(),
                        Func::Tan => {
                            if x.cos().abs() < 1e-15 {
                                return Err(self.fail(i, "tan", x));
                            }
                            x.tan()
                        }
                        Func::Sqrt => {
                            if x < 0.0 {
                                return Err(self.fail(i, "sqrt", x));
                            }
                            x.sqrt()
                        }
                        Func::Flat => super::node::flat(x),
                    }
                }
            };
            if !val.is_finite() {
                return Err(self.fail(i, "non-finite result", val));
            }
            scratch.push(val);
        }
        for (o, &s) in out.iter_mut().zip(&self.outputs) {
            *o = scratch[s as usize];
        }
        Ok(())
    }

    pub fn eval(&self, p: &[f64; 4]) -> Result<Vec<f64>, EvalError> {
        let mut scratch = Vec::new();
        let mut out = vec![0.0; self.outputs.len()];
        self.eval_into(p, &mut scratch, &mut out)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Var;

    #[test]
    fn domain_errors_name_the_node() {
        let x = Expr::var(Var::X);
        let f = x.ln().add(&Expr::var(Var::U));
        let err = Tape::of(&f).eval(&[-1.0, 0.0, 0.0, 0.0]).unwrap_err();
        assert_eq!(err.op, "ln");
        assert_eq!(err.node, "ln(x)");
        let g = Expr::one().div(&x);
        assert_eq!(Tape::of(&g).eval(&[0.0; 4]).unwrap_err().op, "division");
    }

    #[test]
    fn multi_output_tapes_share_work() {
        let x = Expr::var(Var::X);
        let s = x.sin();
        let t = Tape::compile(&[s.clone(), s.mul(&s)]);
        let v = t.eval(&[0.5, 0.0, 0.0, 0.0]).unwrap();
        assert!((v[0] - 0.5f64.sin()).abs() < 1e-15);
        assert!((v[1] - 0.5f64.sin().powi(2)).abs() < 1e-15);
        assert_eq!(t.len(), 3);
    }
}
