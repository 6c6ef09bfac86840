//! Hash-consed expression nodes.
//!
//! Every structurally distinct expression exists at most once in the process
//! wide interner, so pointer equality is structural equality and shared
//! subexpressions are represented once. Nodes are immutable; the only
//! interior state is a set of write-once caches (partial derivatives and a
//! compiled evaluation tape).

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock, Weak};

use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::eval::Tape;

pub type Rational = Ratio<i128>;

/// Real coordinates of C² = R⁴, ordered (x, y, u, v) with z = x + iy, w = u + iv.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    X = 0,
    Y = 1,
    U = 2,
    V = 3,
}

impl Var {
    pub const ALL: [Var; 4] = [Var::X, Var::Y, Var::U, Var::V];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::U => "u",
            Var::V => "v",
        }
    }

    pub fn from_index(i: usize) -> Var {
        Var::ALL[i]
    }
}

/// A constant leaf. Rationals stay exact until evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Constant {
    Rational(Rational),
    Real(f64),
}

impl Constant {
    pub fn value(&self) -> f64 {
        match self {
            Constant::Rational(q) => q
                .to_f64()
                .unwrap_or_else(|| *q.numer() as f64 / *q.denom() as f64),
            Constant::Real(v) => *v,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Constant::Rational(q) => q.is_zero(),
            Constant::Real(v) => *v == 0.0,
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Constant::Rational(q) => q.is_one(),
            Constant::Real(v) => *v == 1.0,
        }
    }

    pub fn is_minus_one(&self) -> bool {
        match self {
            Constant::Rational(q) => *q == -Rational::one(),
            Constant::Real(v) => *v == -1.0,
        }
    }

    /// Exact integer value, if this is an integral rational.
    pub fn as_integer(&self) -> Option<i128> {
        match self {
            Constant::Rational(q) if q.is_integer() => Some(*q.numer()),
            _ => None,
        }
    }

    fn key(&self) -> ConstKey {
        match self {
            Constant::Rational(q) => ConstKey::Rational(*q.numer(), *q.denom()),
            Constant::Real(v) => {
                // -0.0 and 0.0 intern to the same leaf
                let v = if *v == 0.0 { 0.0 } else { *v };
                ConstKey::Real(v.to_bits())
            }
        }
    }

    pub(crate) fn add(a: Constant, b: Constant) -> Constant {
        match (a, b) {
            (Constant::Rational(p), Constant::Rational(q)) => match checked_add(p, q) {
                Some(r) => Constant::Rational(r),
                None => Constant::Real(a.value() + b.value()),
            },
            _ => Constant::Real(a.value() + b.value()),
        }
    }

    pub(crate) fn mul(a: Constant, b: Constant) -> Constant {
        match (a, b) {
            (Constant::Rational(p), Constant::Rational(q)) => match checked_mul(p, q) {
                Some(r) => Constant::Rational(r),
                None => Constant::Real(a.value() * b.value()),
            },
            _ => Constant::Real(a.value() * b.value()),
        }
    }

    pub(crate) fn neg(a: Constant) -> Constant {
        match a {
            Constant::Rational(p) => Constant::Rational(-p),
            Constant::Real(v) => Constant::Real(-v),
        }
    }

    /// Quotient; `None` on division by an exact zero.
    pub(crate) fn div(a: Constant, b: Constant) -> Option<Constant> {
        if b.is_zero() {
            return None;
        }
        Some(match (a, b) {
            (Constant::Rational(p), Constant::Rational(q)) => match checked_div(p, q) {
                Some(r) => Constant::Rational(r),
                None => Constant::Real(a.value() / b.value()),
            },
            _ => Constant::Real(a.value() / b.value()),
        })
    }

    pub(crate) fn powi(a: Constant, n: i32) -> Option<Constant> {
        if n < 0 && a.is_zero() {
            return None;
        }
        Some(match a {
            Constant::Rational(p) => {
                let mut acc = Some(Rational::one());
                let base = if n < 0 { p.recip() } else { p };
                for _ in 0..n.unsigned_abs() {
                    acc = acc.and_then(|x| checked_mul(x, base));
                }
                match acc {
                    Some(r) => Constant::Rational(r),
                    None => Constant::Real(a.value().powi(n)),
                }
            }
            Constant::Real(v) => Constant::Real(v.powi(n)),
        })
    }

    pub fn is_negative(&self) -> bool {
        match self {
            Constant::Rational(q) => q.is_negative(),
            Constant::Real(v) => *v < 0.0,
        }
    }
}

impl From<i64> for Constant {
    fn from(v: i64) -> Self {
        Constant::Rational(Rational::from_integer(v as i128))
    }
}

fn checked_add(p: Rational, q: Rational) -> Option<Rational> {
    let (a, b) = (*p.numer(), *p.denom());
    let (c, d) = (*q.numer(), *q.denom());
    let num = a.checked_mul(d)?.checked_add(c.checked_mul(b)?)?;
    let den = b.checked_mul(d)?;
    Some(Rational::new(num, den))
}

fn checked_mul(p: Rational, q: Rational) -> Option<Rational> {
    let num = p.numer().checked_mul(*q.numer())?;
    let den = p.denom().checked_mul(*q.denom())?;
    Some(Rational::new(num, den))
}

fn checked_div(p: Rational, q: Rational) -> Option<Rational> {
    checked_mul(p, q.recip())
}

/// Unary function nodes of the field alphabet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Tan,
    Sqrt,
    /// exp(−1/t) for t > 0 and 0 otherwise; smooth, with all derivatives vanishing at 0.
    Flat,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sqrt => "sqrt",
            Func::Flat => "flat",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "sqrt" => Func::Sqrt,
            "flat" => Func::Flat,
            _ => return None,
        })
    }
}

#[derive(Debug)]
pub enum Op {
    Const(Constant),
    Var(Var),
    Add(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Neg(Expr),
    Powi(Expr, i32),
    Func(Func, Expr),
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum ConstKey {
    Rational(i128, i128),
    Real(u64),
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Key {
    Const(ConstKey),
    Var(Var),
    Add(u64, u64),
    Mul(u64, u64),
    Div(u64, u64),
    Neg(u64),
    Powi(u64, i32),
    Func(Func, u64),
}

pub struct Node {
    id: u64,
    op: Op,
    pub(crate) derivs: [OnceLock<Expr>; 4],
    pub(crate) tape: OnceLock<Arc<Tape>>,
}

impl Node {
    fn take_edges(&mut self, out: &mut Vec<Expr>) {
        let op = std::mem::replace(&mut self.op, Op::Const(Constant::Real(0.0)));
        match op {
            Op::Const(_) | Op::Var(_) => {}
            Op::Add(a, b) | Op::Mul(a, b) | Op::Div(a, b) => {
                out.push(a);
                out.push(b);
            }
            Op::Neg(a) | Op::Powi(a, _) | Op::Func(_, a) => out.push(a),
        }
        for d in self.derivs.iter_mut() {
            if let Some(e) = d.take() {
                out.push(e);
            }
        }
    }
}

// Long chains would otherwise be freed recursively and could exhaust the stack.
impl Drop for Node {
    fn drop(&mut self) {
        let mut pending = Vec::new();
        self.take_edges(&mut pending);
        while let Some(e) = pending.pop() {
            if let Ok(mut node) = Arc::try_unwrap(e.0) {
                node.take_edges(&mut pending);
            }
        }
    }
}

/// Shared handle to an interned expression node.
#[derive(Clone)]
pub struct Expr(Arc<Node>);

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.id.hash(state)
    }
}

/// Fully parenthesized DSL text. Re-parsing it gives a field with identical values.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // explicit stack so very deep graphs print without recursion
        enum Item<'a> {
            Node(&'a Expr),
            Text(&'static str),
            Owned(String),
        }
        let mut stack = vec![Item::Node(self)];
        while let Some(item) = stack.pop() {
            match item {
                Item::Text(s) => f.write_str(s)?,
                Item::Owned(s) => f.write_str(&s)?,
                Item::Node(e) => match e.op() {
                    Op::Const(c) => f.write_str(&format_constant(c))?,
                    Op::Var(v) => f.write_str(v.name())?,
                    Op::Add(a, b) | Op::Mul(a, b) | Op::Div(a, b) => {
                        let sym = match e.op() {
                            Op::Add(..) => " + ",
                            Op::Mul(..) => "*",
                            _ => "/",
                        };
                        stack.push(Item::Text(")"));
                        stack.push(Item::Node(b));
                        stack.push(Item::Text(sym));
                        stack.push(Item::Node(a));
                        f.write_str("(")?;
                    }
                    Op::Neg(a) => {
                        stack.push(Item::Text(")"));
                        stack.push(Item::Node(a));
                        f.write_str("(-")?;
                    }
                    Op::Powi(a, n) => {
                        stack.push(Item::Owned(format!(")^({n}))")));
                        stack.push(Item::Node(a));
                        f.write_str("((")?;
                    }
                    Op::Func(g, a) => {
                        stack.push(Item::Text(")"));
                        stack.push(Item::Node(a));
                        f.write_str(g.name())?;
                        f.write_str("(")?;
                    }
                },
            }
        }
        Ok(())
    }
}

fn format_constant(c: &Constant) -> String {
    match c {
        Constant::Rational(q) if q.is_integer() => {
            if q.is_negative() {
                format!("({})", q.numer())
            } else {
                format!("{}", q.numer())
            }
        }
        Constant::Rational(q) => format!("({}/{})", q.numer(), q.denom()),
        Constant::Real(v) => {
            let s = format!("{v:e}");
            if *v < 0.0 {
                format!("({s})")
            } else {
                s
            }
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr#{}({})", self.0.id, self)
    }
}

struct Interner {
    map: HashMap<Key, Weak<Node>>,
    inserts_since_sweep: usize,
}

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn interner() -> &'static Mutex<Interner> {
    static INTERNER: OnceLock<Mutex<Interner>> = OnceLock::new();
    INTERNER.get_or_init(|| {
        Mutex::new(Interner {
            map: HashMap::new(),
            inserts_since_sweep: 0,
        })
    })
}

fn intern(key: Key, make: impl FnOnce() -> Op) -> Expr {
    let mut guard = interner().lock().unwrap_or_else(|e| e.into_inner());
    if let Some(node) = guard.map.get(&key).and_then(Weak::upgrade) {
        return Expr(node);
    }
    let node = Arc::new(Node {
        id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
        op: make(),
        derivs: Default::default(),
        tape: OnceLock::new(),
    });
    guard.map.insert(key, Arc::downgrade(&node));
    guard.inserts_since_sweep += 1;
    if guard.inserts_since_sweep > 1 << 18 && guard.inserts_since_sweep > guard.map.len() / 2 {
        guard.map.retain(|_, w| w.strong_count() > 0);
        guard.inserts_since_sweep = 0;
    }
    Expr(node)
}

impl Expr {
    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn op(&self) -> &Op {
        &self.0.op
    }

    pub(crate) fn node(&self) -> &Node {
        &self.0
    }

    pub(crate) fn downgrade(&self) -> Weak<Node> {
        Arc::downgrade(&self.0)
    }

    pub(crate) fn upgrade(w: &Weak<Node>) -> Option<Expr> {
        w.upgrade().map(Expr)
    }

    pub fn constant(c: Constant) -> Expr {
        intern(Key::Const(c.key()), || Op::Const(c))
    }

    pub fn rational(num: i128, den: i128) -> Expr {
        Expr::constant(Constant::Rational(Rational::new(num, den)))
    }

    pub fn int(n: i64) -> Expr {
        Expr::constant(Constant::from(n))
    }

    pub fn real(v: f64) -> Expr {
        Expr::constant(Constant::Real(v))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn var(v: Var) -> Expr {
        intern(Key::Var(v), || Op::Var(v))
    }

    pub fn as_const(&self) -> Option<Constant> {
        match self.op() {
            Op::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const().is_some_and(|c| c.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self.as_const().is_some_and(|c| c.is_one())
    }

    /// Children in evaluation order.
    pub fn children(&self) -> Vec<&Expr> {
        match self.op() {
            Op::Const(_) | Op::Var(_) => vec![],
            Op::Add(a, b) | Op::Mul(a, b) | Op::Div(a, b) => vec![a, b],
            Op::Neg(a) | Op::Powi(a, _) | Op::Func(_, a) => vec![a],
        }
    }

    pub fn add(&self, other: &Expr) -> Expr {
        let (a, b) = (self, other);
        if let (Some(p), Some(q)) = (a.as_const(), b.as_const()) {
            return Expr::constant(Constant::add(p, q));
        }
        if a.is_zero() {
            return b.clone();
        }
        if b.is_zero() {
            return a.clone();
        }
        if let Op::Neg(inner) = b.op() {
            if inner == a {
                return Expr::zero();
            }
        }
        if let Op::Neg(inner) = a.op() {
            if inner == b {
                return Expr::zero();
            }
        }
        let (a, b) = ordered(a, b);
        intern(Key::Add(a.id(), b.id()), || Op::Add(a.clone(), b.clone()))
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Expr {
        match self.op() {
            Op::Const(c) => Expr::constant(Constant::neg(*c)),
            Op::Neg(a) => a.clone(),
            _ => intern(Key::Neg(self.id()), || Op::Neg(self.clone())),
        }
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        let (a, b) = (self, other);
        match (a.as_const(), b.as_const()) {
            (Some(p), Some(q)) => return Expr::constant(Constant::mul(p, q)),
            (Some(p), None) => return b.scale_const(p),
            (None, Some(q)) => return a.scale_const(q),
            (None, None) => {}
        }
        // sign pull-out keeps constants at the front
        if let Op::Neg(x) = a.op() {
            return x.mul(b).neg();
        }
        if let Op::Neg(y) = b.op() {
            return a.mul(y).neg();
        }
        // c*x * y  ->  c*(x*y)
        if let Op::Mul(c, x) = a.op() {
            if let Some(k) = c.as_const() {
                return x.mul(b).scale_const(k);
            }
        }
        if let Op::Mul(c, y) = b.op() {
            if let Some(k) = c.as_const() {
                return a.mul(y).scale_const(k);
            }
        }
        // power merging on a common base
        let (base_a, exp_a) = a.as_power();
        let (base_b, exp_b) = b.as_power();
        if base_a == base_b {
            return base_a.powi(exp_a + exp_b);
        }
        let (a, b) = ordered(a, b);
        intern(Key::Mul(a.id(), b.id()), || Op::Mul(a.clone(), b.clone()))
    }

    fn scale_const(&self, c: Constant) -> Expr {
        if c.is_zero() {
            return Expr::zero();
        }
        if c.is_one() {
            return self.clone();
        }
        if c.is_minus_one() {
            return self.neg();
        }
        if let Some(k) = self.as_const() {
            return Expr::constant(Constant::mul(c, k));
        }
        if let Op::Neg(x) = self.op() {
            return x.scale_const(Constant::neg(c));
        }
        if let Op::Mul(k, x) = self.op() {
            if let Some(k) = k.as_const() {
                return x.scale_const(Constant::mul(c, k));
            }
        }
        if c.is_negative() {
            return self.scale_const(Constant::neg(c)).neg();
        }
        let k = Expr::constant(c);
        intern(Key::Mul(k.id(), self.id()), || Op::Mul(k.clone(), self.clone()))
    }

    fn as_power(&self) -> (Expr, i32) {
        match self.op() {
            Op::Powi(b, n) => (b.clone(), *n),
            _ => (self.clone(), 1),
        }
    }

    pub fn div(&self, other: &Expr) -> Expr {
        let (a, b) = (self, other);
        if b.is_one() {
            return a.clone();
        }
        if a.is_zero() {
            return Expr::zero();
        }
        if let (Some(p), Some(q)) = (a.as_const(), b.as_const()) {
            if let Some(r) = Constant::div(p, q) {
                return Expr::constant(r);
            }
        }
        if let Some(q) = b.as_const() {
            if let (Constant::Rational(_), Some(inv)) = (q, Constant::div(Constant::from(1), q)) {
                return a.scale_const(inv);
            }
        }
        if a == b {
            return Expr::one();
        }
        intern(Key::Div(a.id(), b.id()), || Op::Div(a.clone(), b.clone()))
    }

    pub fn powi(&self, n: i32) -> Expr {
        if n == 0 {
            return Expr::one();
        }
        if n == 1 {
            return self.clone();
        }
        if let Some(c) = self.as_const() {
            if let Some(r) = Constant::powi(c, n) {
                return Expr::constant(r);
            }
        }
        if let Op::Powi(base, m) = self.op() {
            if let Some(mn) = m.checked_mul(n) {
                return base.powi(mn);
            }
        }
        intern(Key::Powi(self.id(), n), || Op::Powi(self.clone(), n))
    }

    pub fn func(f: Func, a: &Expr) -> Expr {
        if let Some(c) = a.as_const() {
            let exact = match (f, c.as_integer()) {
                (Func::Exp, Some(0)) | (Func::Cos, Some(0)) | (Func::Sqrt, Some(1)) => Some(Expr::one()),
                (Func::Ln, Some(1)) => Some(Expr::zero()),
                (Func::Sin, Some(0)) | (Func::Tan, Some(0)) | (Func::Sqrt, Some(0)) => Some(Expr::zero()),
                _ => None,
            };
            if let Some(e) = exact {
                return e;
            }
            let v = c.value();
            let folded = match f {
                Func::Exp => v.exp(),
                Func::Ln if v > 0.0 => v.ln(),
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Tan if v.cos() != 0.0 => v.tan(),
                Func::Sqrt if v >= 0.0 => v.sqrt(),
                Func::Flat => flat(v),
                // out-of-domain constants stay symbolic so evaluation reports the node
                _ => f64::NAN,
            };
            if folded.is_finite() {
                return Expr::real(folded);
            }
        }
        intern(Key::Func(f, a.id()), || Op::Func(f, a.clone()))
    }

    pub fn exp(&self) -> Expr {
        Expr::func(Func::Exp, self)
    }
    pub fn ln(&self) -> Expr {
        Expr::func(Func::Ln, self)
    }
    pub fn sin(&self) -> Expr {
        Expr::func(Func::Sin, self)
    }
    pub fn cos(&self) -> Expr {
        Expr::func(Func::Cos, self)
    }
    pub fn tan(&self) -> Expr {
        Expr::func(Func::Tan, self)
    }
    pub fn sqrt(&self) -> Expr {
        Expr::func(Func::Sqrt, self)
    }
    pub fn flat(&self) -> Expr {
        Expr::func(Func::Flat, self)
    }

    /// Real power `self^alpha` as `exp(alpha * ln(self))`, integer exponents excepted.
    pub fn powf(&self, alpha: f64) -> Expr {
        if alpha.fract() == 0.0 && alpha.abs() < i32::MAX as f64 {
            return self.powi(alpha as i32);
        }
        if alpha == 0.5 {
            return self.sqrt();
        }
        self.ln().mul(&Expr::real(alpha)).exp()
    }

    /// Number of distinct nodes reachable from this expression.
    pub fn node_count(&self) -> usize {
        super::topo_order(std::slice::from_ref(self)).len()
    }
}

fn ordered<'a>(a: &'a Expr, b: &'a Expr) -> (&'a Expr, &'a Expr) {
    // constants first, then by id: canonical operand order for commutative ops
    match (a.as_const().is_some(), b.as_const().is_some()) {
        (false, true) => (b, a),
        (true, false) => (a, b),
        _ if a.id() <= b.id() => (a, b),
        _ => (b, a),
    }
}

impl std::ops::Add for &Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        Expr::add(self, rhs)
    }
}

impl std::ops::Sub for &Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        Expr::sub(self, rhs)
    }
}

impl std::ops::Mul for &Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        Expr::mul(self, rhs)
    }
}

impl std::ops::Div for &Expr {
    type Output = Expr;
    fn div(self, rhs: &Expr) -> Expr {
        Expr::div(self, rhs)
    }
}

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interning_shares_structure() {
        let x = Expr::var(Var::X);
        let y = Expr::var(Var::Y);
        let a = &x + &y;
        let b = &y + &x;
        assert_eq!(a, b);
        assert_eq!((&a * &a).node_count(), (&b * &b).node_count());
    }

    #[test]
    fn rational_constants_stay_exact() {
        let third = Expr::rational(1, 3);
        let sum = &(&third + &third) + &third;
        assert!(sum.is_one());
        let k = 3i128;
        let c = Expr::rational(1, k * k);
        match c.as_const().unwrap() {
            Constant::Rational(q) => assert_eq!(q, Rational::new(1, 9)),
            Constant::Real(_) => panic!("expected rational"),
        }
    }

    #[test]
    fn identities_and_power_merging() {
        let x = Expr::var(Var::X);
        assert_eq!(&x * &Expr::one(), x);
        assert!((&x * &Expr::zero()).is_zero());
        assert_eq!(&x * &x, x.powi(2));
        assert_eq!(&x.powi(2) * &x.powi(3), x.powi(5));
        assert_eq!(x.powi(2).powi(3), x.powi(6));
        assert!((&x - &x).is_zero());
        assert_eq!(x.neg().neg(), x);
    }

    #[test]
    fn overflowing_rationals_fall_back_to_reals() {
        let big = Expr::constant(Constant::Rational(Rational::new(i128::MAX / 2, 7)));
        let p = &big * &big;
        assert!(matches!(p.as_const(), Some(Constant::Real(_))));
    }
}

/// exp(−1/t) for t > 0, else 0.
pub(crate) fn flat(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}
