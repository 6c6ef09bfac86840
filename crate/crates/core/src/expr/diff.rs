//! Symbolic partial derivatives with per-node caching.

use super::node::{Expr, Func, Op, Var};
use super::topo_order_until;

impl Expr {
    /// Partial derivative with respect to a real coordinate.
    ///
    /// Results are cached on every visited node, so repeated and iterated
    /// differentiation of shared subgraphs is paid for once.
    pub fn diff(&self, v: Var) -> Expr {
        let slot = v.index();
        if let Some(d) = self.node().derivs[slot].get() {
            return d.clone();
        }
        let order = topo_order_until(std::slice::from_ref(self), |e| e.node().derivs[slot].get().is_some());
        for n in order {
            if n.node().derivs[slot].get().is_some() {
                continue;
            }
            let d = |c: &Expr| c.node().derivs[slot].get().expect("child derivative computed first").clone();
            let out = match n.op() {
                Op::Const(_) => Expr::zero(),
                Op::Var(w) => {
                    if *w == v {
                        Expr::one()
                    } else {
                        Expr::zero()
                    }
                }
                Op::Add(a, b) => d(a).add(&d(b)),
                Op::Mul(a, b) => d(a).mul(b).add(&a.mul(&d(b))),
                Op::Div(a, b) => {
                    let (da, db) = (d(a), d(b));
                    if db.is_zero() {
                        da.div(b)
                    } else {
                        da.sub(&n.mul(&db)).div(b)
                    }
                }
                Op::Neg(a) => d(a).neg(),
                Op::Powi(a, k) => {
                    let da = d(a);
                    if da.is_zero() {
                        Expr::zero()
                    } else {
                        Expr::int(*k as i64).mul(&a.powi(k - 1)).mul(&da)
                    }
                }
                Op::Func(f, a) => {
                    let da = d(a);
                    if da.is_zero() {
                        Expr::zero()
                    } else {
                        let outer = match f {
                            Func::Exp => n.clone(),
                            Func::Ln => Expr::one().div(a),
                            Func::Sin => a.cos(),
                            Func::Cos => a.sin().neg(),
                            Func::Tan => Expr::one().add(&n.powi(2)),
                            Func::Sqrt => Expr::rational(1, 2).div(&n),
                            Func::Flat => n.mul(&a.powi(-2)),
                        };
                        outer.mul(&da)
                    }
                }
            };
            // a concurrent thread may have won the race; both results are structurally equal
            let _ = n.node().derivs[slot].set(out);
        }
        self.node().derivs[slot].get().expect("root derivative computed").clone()
    }

    /// Iterated partial derivative, applying `vars` left to right.
    pub fn diff_n(&self, vars: &[Var]) -> Expr {
        vars.iter().fold(self.clone(), |e, v| e.diff(*v))
    }
}
