//! Truncated multivariate Taylor series in (x, y, u, v).
//!
//! A jet of order `m` at a point holds the Taylor coefficients of all
//! monomials of total degree ≤ m. Monomials are stored graded by degree, so
//! a jet of lower order is a prefix of the layout of a higher one and a
//! single [`JetSpace`] serves every order up to its maximum.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::expr::{EvalError, Func, Instr, Tape};

pub type Mono = [u8; 4];

/// Monomial tables for jets up to a fixed order.
#[derive(Debug)]
pub struct JetSpace {
    order: usize,
    monos: Vec<Mono>,
    /// `deg_start[d]` is the index of the first monomial of degree d; one extra sentinel.
    deg_start: Vec<usize>,
    index: HashMap<Mono, usize>,
    /// (i, j, k) with monos[i] + monos[j] = monos[k], sorted by deg(monos[k]).
    pairs: Vec<(u32, u32, u32)>,
    /// `pair_end[m]` is the number of leading pairs whose product has degree ≤ m.
    pair_end: Vec<usize>,
    /// For each variable, (source index, target index, multiplicity) of ∂/∂var.
    diff_maps: [Vec<(u32, u32, f64)>; 4],
}

impl JetSpace {
    pub fn new(order: usize) -> JetSpace {
        let mut monos = Vec::new();
        let mut deg_start = Vec::new();
        for d in 0..=order {
            deg_start.push(monos.len());
            // lexicographic within a degree
            for a in (0..=d).rev() {
                for b in (0..=d - a).rev() {
                    for c in (0..=d - a - b).rev() {
                        let e = d - a - b - c;
                        monos.push([a as u8, b as u8, c as u8, e as u8]);
                    }
                }
            }
        }
        deg_start.push(monos.len());
        let index: HashMap<Mono, usize> = monos.iter().enumerate().map(|(i, m)| (*m, i)).collect();
        let deg = |m: &Mono| m.iter().map(|&t| t as usize).sum::<usize>();
        let mut pairs = Vec::new();
        for (i, a) in monos.iter().enumerate() {
            for (j, b) in monos.iter().enumerate() {
                if deg(a) + deg(b) <= order {
                    let s = [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]];
                    pairs.push((i as u32, j as u32, index[&s] as u32));
                }
            }
        }
        pairs.sort_by_key(|&(_, _, k)| (deg(&monos[k as usize]), k));
        let mut pair_end = vec![0; order + 1];
        for (m, end) in pair_end.iter_mut().enumerate() {
            *end = pairs.partition_point(|&(_, _, k)| deg(&monos[k as usize]) <= m);
        }
        let diff_maps = [0, 1, 2, 3].map(|v| {
            let mut out = Vec::new();
            for (i, m) in monos.iter().enumerate() {
                if m[v] > 0 {
                    let mut t = *m;
                    t[v] -= 1;
                    out.push((i as u32, index[&t] as u32, m[v] as f64));
                }
            }
            out
        });
        JetSpace {
            order,
            monos,
            deg_start,
            index,
            pairs,
            pair_end,
            diff_maps,
        }
    }

    /// Shared space for the given order.
    pub fn shared(order: usize) -> Arc<JetSpace> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<JetSpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut g = cache.lock().unwrap_or_else(|e| e.into_inner());
        g.entry(order).or_insert_with(|| Arc::new(JetSpace::new(order))).clone()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of monomials of degree ≤ m.
    pub fn len(&self, m: usize) -> usize {
        self.deg_start[m + 1]
    }

    pub fn mono(&self, i: usize) -> Mono {
        self.monos[i]
    }

    pub fn index_of(&self, m: &Mono) -> Option<usize> {
        self.index.get(m).copied()
    }
}

/// Real jet of a given order.
#[derive(Clone, Debug)]
pub struct Jet {
    pub order: usize,
    pub c: Vec<f64>,
}

impl Jet {
    pub fn constant(sp: &JetSpace, order: usize, v: f64) -> Jet {
        let mut c = vec![0.0; sp.len(order)];
        c[0] = v;
        Jet { order, c }
    }

    /// The coordinate function `t_var` expanded at `p`.
    pub fn variable(sp: &JetSpace, order: usize, var: usize, at: f64) -> Jet {
        let mut j = Jet::constant(sp, order, at);
        if order >= 1 {
            j.c[1 + var] = 1.0;
        }
        j
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Coefficient of a monomial (zero beyond the order).
    pub fn coeff(&self, sp: &JetSpace, m: &Mono) -> f64 {
        match sp.index_of(m) {
            Some(i) if i < self.c.len() => self.c[i],
            _ => 0.0,
        }
    }

    /// Partial derivative ∂^m at the base point: coefficient times m!.
    pub fn partial(&self, sp: &JetSpace, m: &Mono) -> f64 {
        let fact: f64 = m.iter().map(|&k| (1..=k as u64).product::<u64>() as f64).product();
        self.coeff(sp, m) * fact
    }

    pub fn truncate(&self, sp: &JetSpace, order: usize) -> Jet {
        let order = order.min(self.order);
        Jet {
            order,
            c: self.c[..sp.len(order)].to_vec(),
        }
    }

    fn common(&self, o: &Jet) -> usize {
        self.order.min(o.order)
    }

    pub fn add(&self, sp: &JetSpace, o: &Jet) -> Jet {
        let m = self.common(o);
        let n = sp.len(m);
        Jet {
            order: m,
            c: (0..n).map(|i| self.c[i] + o.c[i]).collect(),
        }
    }

    pub fn sub(&self, sp: &JetSpace, o: &Jet) -> Jet {
        let m = self.common(o);
        let n = sp.len(m);
        Jet {
            order: m,
            c: (0..n).map(|i| self.c[i] - o.c[i]).collect(),
        }
    }

    pub fn neg(&self) -> Jet {
        Jet {
            order: self.order,
            c: self.c.iter().map(|t| -t).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            order: self.order,
            c: self.c.iter().map(|t| t * s).collect(),
        }
    }

    pub fn add_const(&self, s: f64) -> Jet {
        let mut j = self.clone();
        j.c[0] += s;
        j
    }

    pub fn mul(&self, sp: &JetSpace, o: &Jet) -> Jet {
        let m = self.common(o);
        let mut c = vec![0.0; sp.len(m)];
        for &(i, j, k) in &sp.pairs[..sp.pair_end[m]] {
            c[k as usize] += self.c[i as usize] * o.c[j as usize];
        }
        Jet { order: m, c }
    }

    /// Σ coeffs[n]·(self − self(0))ⁿ, the composition with a univariate series.
    pub fn compose(&self, sp: &JetSpace, coeffs: &[f64]) -> Jet {
        let mut d = self.clone();
        d.c[0] = 0.0;
        let top = self.order.min(coeffs.len() - 1);
        let mut acc = Jet::constant(sp, self.order, coeffs[top]);
        for n in (0..top).rev() {
            acc = acc.mul(sp, &d).add_const(coeffs[n]);
        }
        acc
    }

    pub fn powi(&self, sp: &JetSpace, n: i32) -> Jet {
        if n < 0 {
            return self.recip(sp).powi(sp, -n);
        }
        let mut result = Jet::constant(sp, self.order, 1.0);
        let mut base = self.clone();
        let mut k = n as u32;
        while k > 0 {
            if k & 1 == 1 {
                result = result.mul(sp, &base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(sp, &base);
            }
        }
        result
    }

    pub fn recip(&self, sp: &JetSpace) -> Jet {
        let a = self.value();
        let coeffs: Vec<f64> = (0..=self.order).map(|n| (-1f64).powi(n as i32) / a.powi(n as i32 + 1)).collect();
        self.compose(sp, &coeffs)
    }

    pub fn div(&self, sp: &JetSpace, o: &Jet) -> Jet {
        self.mul(sp, &o.recip(sp))
    }

    /// Applies an elementary function via its Taylor coefficients at the base value.
    pub fn func(&self, sp: &JetSpace, f: Func) -> Jet {
        let a = self.value();
        let n = self.order;
        let coeffs: Vec<f64> = match f {
            Func::Exp => {
                let e = a.exp();
                let mut out = vec![e];
                for k in 1..=n {
                    out.push(out[k - 1] / k as f64);
                }
                out
            }
            Func::Ln => {
                let mut out = vec![a.ln()];
                for k in 1..=n {
                    out.push((-1f64).powi(k as i32 + 1) / (k as f64 * a.powi(k as i32)));
                }
                out
            }
            Func::Sqrt => binomial_series(a, 0.5, n),
            Func::Sin | Func::Cos => {
                let (s, c) = a.sin_cos();
                // derivatives cycle through sin, cos, -sin, -cos
                let cycle = match f {
                    Func::Sin => [s, c, -s, -c],
                    _ => [c, -s, -c, s],
                };
                let mut fact = 1.0;
                (0..=n)
                    .map(|k| {
                        if k > 0 {
                            fact *= k as f64;
                        }
                        cycle[k % 4] / fact
                    })
                    .collect()
            }
            Func::Tan => {
                // (k+1) T_{k+1} = [k = 0] + Σ_{j ≤ k} T_j T_{k-j}
                let mut t = vec![a.tan()];
                for k in 0..n {
                    let mut s: f64 = (0..=k).map(|j| t[j] * t[k - j]).sum();
                    if k == 0 {
                        s += 1.0;
                    }
                    t.push(s / (k + 1) as f64);
                }
                t
            }
            Func::Flat if a <= 0.0 => return self.scale(0.0),
            Func::Flat => {
                // exp of the series of −1/t at a
                let h: Vec<f64> = (0..=n).map(|k| -(-1f64).powi(k as i32) / a.powi(k as i32 + 1)).collect();
                let mut e = vec![h[0].exp()];
                for k in 1..=n {
                    let s: f64 = (1..=k).map(|j| j as f64 * h[j] * e[k - j]).sum();
                    e.push(s / k as f64);
                }
                e
            }
        };
        self.compose(sp, &coeffs)
    }

    /// ∂/∂t_var; the order drops by one.
    pub fn diff(&self, sp: &JetSpace, var: usize) -> Jet {
        assert!(self.order > 0, "cannot differentiate an order-0 jet");
        let m = self.order - 1;
        let mut c = vec![0.0; sp.len(m)];
        for &(src, dst, mult) in &sp.diff_maps[var] {
            if (src as usize) < self.c.len() {
                c[dst as usize] += mult * self.c[src as usize];
            }
        }
        Jet { order: m, c }
    }
}

/// Coefficients of (a + t)^α in t.
fn binomial_series(a: f64, alpha: f64, n: usize) -> Vec<f64> {
    let mut out = vec![a.powf(alpha)];
    for k in 1..=n {
        let prev = out[k - 1];
        out.push(prev * (alpha - (k as f64 - 1.0)) / (k as f64 * a));
    }
    out
}

/// Evaluates every output of a tape on jets expanded at `p`.
pub fn eval_tape(sp: &JetSpace, tape: &Tape, p: &[f64; 4], order: usize) -> Result<Vec<Jet>, EvalError> {
    let mut slots: Vec<Jet> = Vec::with_capacity(tape.len());
    let fail = |i: usize, op: &'static str, arg: f64| EvalError {
        op,
        argument: arg,
        node: tape.node_text(i),
    };
    for (i, ins) in tape.instrs().iter().enumerate() {
        let g = |k: u32| &slots[k as usize];
        let j = match *ins {
            Instr::Const(c) => Jet::constant(sp, order, c),
            Instr::Var(v) => Jet::variable(sp, order, v, p[v]),
            Instr::Add(a, b) => g(a).add(sp, g(b)),
            Instr::Mul(a, b) => g(a).mul(sp, g(b)),
            Instr::Div(a, b) => {
                if g(b).value() == 0.0 {
                    return Err(fail(i, "division", 0.0));
                }
                g(a).div(sp, g(b))
            }
            Instr::Neg(a) => g(a).neg(),
            Instr::Powi(a, k) => {
                if k < 0 && g(a).value() == 0.0 {
                    return Err(fail(i, "negative power", 0.0));
                }
                g(a).powi(sp, k)
            }
            Instr::Func(f, a) => {
                let x = g(a).value();
                let bad = match f {
                    Func::Ln => x <= 0.0,
                    Func::Sqrt => x <= 0.0,
                    Func::Tan => x.cos().abs() < 1e-15,
                    _ => false,
                };
                if bad {
                    return Err(fail(i, f.name(), x));
                }
                g(a).func(sp, f)
            }
        };
        if !j.c.iter().all(|t| t.is_finite()) {
            return Err(fail(i, "non-finite result", j.value()));
        }
        slots.push(j);
    }
    Ok(tape.outputs().iter().map(|&s| slots[s as usize].clone()).collect())
}

/// Complex jet as a pair of real jets.
#[derive(Clone, Debug)]
pub struct CJet {
    pub re: Jet,
    pub im: Jet,
}

impl CJet {
    pub fn real(re: Jet) -> CJet {
        let im = re.scale(0.0);
        CJet { re, im }
    }

    pub fn order(&self) -> usize {
        self.re.order.min(self.im.order)
    }

    pub fn value(&self) -> num_complex::Complex64 {
        num_complex::Complex64::new(self.re.value(), self.im.value())
    }

    pub fn add(&self, sp: &JetSpace, o: &CJet) -> CJet {
        CJet {
            re: self.re.add(sp, &o.re),
            im: self.im.add(sp, &o.im),
        }
    }

    pub fn sub(&self, sp: &JetSpace, o: &CJet) -> CJet {
        CJet {
            re: self.re.sub(sp, &o.re),
            im: self.im.sub(sp, &o.im),
        }
    }

    pub fn conj(&self) -> CJet {
        CJet {
            re: self.re.clone(),
            im: self.im.neg(),
        }
    }

    pub fn scale(&self, s: f64) -> CJet {
        CJet {
            re: self.re.scale(s),
            im: self.im.scale(s),
        }
    }

    pub fn mul(&self, sp: &JetSpace, o: &CJet) -> CJet {
        CJet {
            re: self.re.mul(sp, &o.re).sub(sp, &self.im.mul(sp, &o.im)),
            im: self.re.mul(sp, &o.im).add(sp, &self.im.mul(sp, &o.re)),
        }
    }

    pub fn mul_real(&self, sp: &JetSpace, o: &Jet) -> CJet {
        CJet {
            re: self.re.mul(sp, o),
            im: self.im.mul(sp, o),
        }
    }

    pub fn abs2(&self, sp: &JetSpace) -> Jet {
        self.re.mul(sp, &self.re).add(sp, &self.im.mul(sp, &self.im))
    }

    fn wirtinger(&self, sp: &JetSpace, re_var: usize, im_var: usize, anti: bool) -> CJet {
        let (ax, ay) = (self.re.diff(sp, re_var), self.re.diff(sp, im_var));
        let (bx, by) = (self.im.diff(sp, re_var), self.im.diff(sp, im_var));
        if anti {
            CJet {
                re: ax.sub(sp, &by).scale(0.5),
                im: bx.add(sp, &ay).scale(0.5),
            }
        } else {
            CJet {
                re: ax.add(sp, &by).scale(0.5),
                im: bx.sub(sp, &ay).scale(0.5),
            }
        }
    }

    pub fn dz(&self, sp: &JetSpace) -> CJet {
        self.wirtinger(sp, 0, 1, false)
    }

    pub fn dzbar(&self, sp: &JetSpace) -> CJet {
        self.wirtinger(sp, 0, 1, true)
    }

    pub fn dw(&self, sp: &JetSpace) -> CJet {
        self.wirtinger(sp, 2, 3, false)
    }

    pub fn dwbar(&self, sp: &JetSpace) -> CJet {
        self.wirtinger(sp, 2, 3, true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expr, Params};

    fn jets(src: &str, p: [f64; 4], order: usize) -> (Arc<JetSpace>, Jet) {
        let sp = JetSpace::shared(order);
        let e = parse_expr(src, &Params::new()).unwrap();
        let j = eval_tape(&sp, &Tape::of(&e), &p, order).unwrap().remove(0);
        (sp, j)
    }

    #[test]
    fn layout_counts() {
        let sp = JetSpace::new(12);
        assert_eq!(sp.len(12), 1820);
        assert_eq!(sp.len(0), 1);
        assert_eq!(sp.len(1), 5);
    }

    #[test]
    fn polynomial_partials_are_exact() {
        let (sp, j) = jets("x^3*y^2 + u*v", [0.5, -1.0, 2.0, 3.0], 6);
        assert!((j.partial(&sp, &[3, 2, 0, 0]) - 12.0).abs() < 1e-12);
        assert!((j.partial(&sp, &[2, 1, 0, 0]) - 6.0 * 0.5 * 2.0 * -1.0).abs() < 1e-12);
        assert!((j.partial(&sp, &[0, 0, 1, 1]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn elementary_functions_match_closed_forms() {
        let x0 = 0.3;
        let (sp, j) = jets("tan(x)", [x0, 0.0, 0.0, 0.0], 5);
        let sec2 = 1.0 / x0.cos().powi(2);
        let t = x0.tan();
        // tan'' = 2 sec² tan
        assert!((j.partial(&sp, &[2, 0, 0, 0]) - 2.0 * sec2 * t).abs() < 1e-12);
        let (sp, j) = jets("ln(cos(x))", [x0, 0.0, 0.0, 0.0], 3);
        assert!((j.partial(&sp, &[2, 0, 0, 0]) + sec2).abs() < 1e-12);
        let (sp, j) = jets("sqrt(1 + x)", [x0, 0.0, 0.0, 0.0], 3);
        assert!((j.partial(&sp, &[2, 0, 0, 0]) + 0.25 * (1.0 + x0).powf(-1.5)).abs() < 1e-12);
        let (sp, j) = jets("exp(2*x)/(1+y)", [x0, 0.0, 0.0, 0.0], 4);
        assert!((j.partial(&sp, &[2, 1, 0, 0]) + 4.0 * (2.0 * x0).exp()).abs() < 1e-10);
    }

    #[test]
    fn derivative_lowers_order() {
        let (sp, j) = jets("x^2*v", [1.0, 0.0, 0.0, 2.0], 4);
        let d = j.diff(&sp, 3);
        assert_eq!(d.order, 3);
        assert!((d.value() - 1.0).abs() < 1e-15);
        assert!((d.partial(&sp, &[2, 0, 0, 0]) - 2.0).abs() < 1e-15);
    }
}
