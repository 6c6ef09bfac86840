//! Complex-valued expressions as pairs of real graphs, with Wirtinger derivatives.

use super::node::{Expr, Var};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CExpr {
    pub re: Expr,
    pub im: Expr,
}

impl CExpr {
    pub fn new(re: Expr, im: Expr) -> CExpr {
        CExpr { re, im }
    }

    pub fn real(re: Expr) -> CExpr {
        CExpr { re, im: Expr::zero() }
    }

    pub fn zero() -> CExpr {
        CExpr::real(Expr::zero())
    }

    pub fn one() -> CExpr {
        CExpr::real(Expr::one())
    }

    pub fn i() -> CExpr {
        CExpr::new(Expr::zero(), Expr::one())
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn add(&self, o: &CExpr) -> CExpr {
        CExpr::new(self.re.add(&o.re), self.im.add(&o.im))
    }

    pub fn sub(&self, o: &CExpr) -> CExpr {
        CExpr::new(self.re.sub(&o.re), self.im.sub(&o.im))
    }

    pub fn neg(&self) -> CExpr {
        CExpr::new(self.re.neg(), self.im.neg())
    }

    pub fn conj(&self) -> CExpr {
        CExpr::new(self.re.clone(), self.im.neg())
    }

    pub fn mul(&self, o: &CExpr) -> CExpr {
        CExpr::new(
            self.re.mul(&o.re).sub(&self.im.mul(&o.im)),
            self.re.mul(&o.im).add(&self.im.mul(&o.re)),
        )
    }

    /// Multiplication by a real expression.
    pub fn scale(&self, s: &Expr) -> CExpr {
        CExpr::new(self.re.mul(s), self.im.mul(s))
    }

    /// Division by a real expression.
    pub fn div_real(&self, s: &Expr) -> CExpr {
        CExpr::new(self.re.div(s), self.im.div(s))
    }

    pub fn mul_i(&self) -> CExpr {
        CExpr::new(self.im.neg(), self.re.clone())
    }

    pub fn abs2(&self) -> Expr {
        self.re.powi(2).add(&self.im.powi(2))
    }

    fn half(e: Expr) -> Expr {
        e.mul(&Expr::rational(1, 2))
    }

    /// ∂/∂z = ½(∂x − i∂y).
    pub fn dz(&self) -> CExpr {
        self.holo_derivative(Var::X, Var::Y, false)
    }

    /// ∂/∂z̄ = ½(∂x + i∂y).
    pub fn dzbar(&self) -> CExpr {
        self.holo_derivative(Var::X, Var::Y, true)
    }

    pub fn dw(&self) -> CExpr {
        self.holo_derivative(Var::U, Var::V, false)
    }

    pub fn dwbar(&self) -> CExpr {
        self.holo_derivative(Var::U, Var::V, true)
    }

    fn holo_derivative(&self, re_var: Var, im_var: Var, anti: bool) -> CExpr {
        let (ax, ay) = (self.re.diff(re_var), self.re.diff(im_var));
        let (bx, by) = (self.im.diff(re_var), self.im.diff(im_var));
        if anti {
            CExpr::new(CExpr::half(ax.sub(&by)), CExpr::half(bx.add(&ay)))
        } else {
            CExpr::new(CExpr::half(ax.add(&by)), CExpr::half(bx.sub(&ay)))
        }
    }

    /// Applies the holomorphic vector field V = a ∂z + b ∂w.
    pub fn apply_holo(&self, a: &CExpr, b: &CExpr) -> CExpr {
        a.mul(&self.dz()).add(&b.mul(&self.dw()))
    }

    /// Applies the antiholomorphic field V̄ = ā ∂z̄ + b̄ ∂w̄ for V = a ∂z + b ∂w.
    pub fn apply_antiholo(&self, a: &CExpr, b: &CExpr) -> CExpr {
        a.conj().mul(&self.dzbar()).add(&b.conj().mul(&self.dwbar()))
    }
}
