//! Symbolic phrases: sums of bracketed words in `z`, `conj(z)` and constants.
//!
//! A monomial is a binary multiplication tree; the tree shape IS the
//! bracketing, which matters because octonion multiplication is not
//! associative. Differentiation produces operator phrases with distinguished
//! slot leaves, one per derivative direction; those stay exact, so solvers can
//! use true Fréchet matrices instead of finite differences.
//!
//! No simplification happens beyond folding adjacent constant leaves and
//! dropping zero terms. Canonicalizing non-associative words is out of scope.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

use crate::algebra::CdNum;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhraseError {
    #[error("term `{0}` is not reducible to the left-algorithm shape (a*z^n)*b")]
    NotLeftReducible(String),
    #[error("negative power one: integrand has a 1/z term, route it to the logarithmic integral")]
    NegativePowerOne,
    #[error("slot {0} missing a substituted value")]
    MissingSlot(u8),
}

/// Which variable a derivative is taken against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wrt {
    Z,
    ConjZ,
}

/// A node of a monomial tree. `Slot` leaves appear only inside
/// [`OperatorPhrase`] terms and absorb the derivative direction:
/// a slot with `conj` set evaluates to the conjugate of the fed value.
#[derive(Debug, Clone, PartialEq)]
pub enum Tree {
    Const(CdNum),
    Var,
    ConjVar,
    Slot { index: u8, conj: bool },
    Mul(Box<Tree>, Box<Tree>),
}

impl Tree {
    fn mul(l: Tree, r: Tree) -> Tree {
        Tree::Mul(Box::new(l), Box::new(r))
    }

    /// Fold sibling constant pairs and report whether the subtree is the
    /// exact zero constant.
    fn fold(self) -> Tree {
        match self {
            Tree::Mul(l, r) => {
                let l = l.fold();
                let r = r.fold();
                if let (Tree::Const(a), Tree::Const(b)) = (&l, &r) {
                    return Tree::Const(a * b);
                }
                Tree::mul(l, r)
            }
            t => t,
        }
    }

    fn has_zero_const(&self) -> bool {
        match self {
            Tree::Const(c) => c.norm_sq() == 0.0,
            Tree::Mul(l, r) => l.has_zero_const() || r.has_zero_const(),
            _ => false,
        }
    }

    fn eval(&self, z: &CdNum, zc: &CdNum, slots: &[CdNum]) -> Result<CdNum, PhraseError> {
        Ok(match self {
            Tree::Const(c) => c.clone(),
            Tree::Var => z.clone(),
            Tree::ConjVar => zc.clone(),
            Tree::Slot { index, conj } => {
                let v = slots
                    .get(*index as usize)
                    .ok_or(PhraseError::MissingSlot(*index))?;
                if *conj {
                    v.conj()
                } else {
                    v.clone()
                }
            }
            Tree::Mul(l, r) => &l.eval(z, zc, slots)? * &r.eval(z, zc, slots)?,
        })
    }

    /// conj(x*y) = conj(y)*conj(x) in every Cayley-Dickson algebra.
    fn conj(&self) -> Tree {
        match self {
            Tree::Const(c) => Tree::Const(c.conj()),
            Tree::Var => Tree::ConjVar,
            Tree::ConjVar => Tree::Var,
            Tree::Slot { index, conj } => Tree::Slot {
                index: *index,
                conj: !conj,
            },
            Tree::Mul(l, r) => Tree::mul(r.conj(), l.conj()),
        }
    }

    fn diff(&self, wrt: Wrt, slot: u8, out: &mut Vec<Tree>) {
        match self {
            Tree::Var if wrt == Wrt::Z => out.push(Tree::Slot {
                index: slot,
                conj: false,
            }),
            Tree::ConjVar if wrt == Wrt::ConjZ => out.push(Tree::Slot {
                index: slot,
                conj: true,
            }),
            Tree::Mul(l, r) => {
                let mut dl = Vec::new();
                l.diff(wrt, slot, &mut dl);
                for d in dl {
                    out.push(Tree::mul(d, (**r).clone()));
                }
                let mut dr = Vec::new();
                r.diff(wrt, slot, &mut dr);
                for d in dr {
                    out.push(Tree::mul((**l).clone(), d));
                }
            }
            _ => {}
        }
    }

    fn subst(&self, inner: &Phrase, inner_conj: &Phrase) -> Phrase {
        match self {
            Tree::Const(c) => Phrase::constant(c.clone()),
            Tree::Var => inner.clone(),
            Tree::ConjVar => inner_conj.clone(),
            Tree::Slot { .. } => Phrase {
                terms: vec![self.clone()],
            },
            Tree::Mul(l, r) => &l.subst(inner, inner_conj) * &r.subst(inner, inner_conj),
        }
    }

    fn leaves<'a>(&'a self, out: &mut Vec<&'a Tree>) {
        match self {
            Tree::Mul(l, r) => {
                l.leaves(out);
                r.leaves(out);
            }
            t => out.push(t),
        }
    }

    /// Left-leaning run of `n` Var leaves; `n = 0` nothing, `n >= 1` a word.
    fn var_run(n: u32) -> Tree {
        let mut t = Tree::Var;
        for _ in 1..n {
            t = Tree::mul(t, Tree::Var);
        }
        t
    }

    fn is_var_run(&self) -> Option<u32> {
        match self {
            Tree::Var => Some(1),
            Tree::Mul(l, r) if matches!(**r, Tree::Var) => l.is_var_run().map(|n| n + 1),
            _ => None,
        }
    }

    /// Drop real-constant leaves (the center of the algebra), keeping shape.
    fn strip_real(&self) -> Option<Tree> {
        match self {
            Tree::Const(c) if c.im().norm_sq() == 0.0 => None,
            Tree::Mul(l, r) => match (l.strip_real(), r.strip_real()) {
                (None, None) => None,
                (Some(t), None) | (None, Some(t)) => Some(t),
                (Some(a), Some(b)) => Some(Tree::mul(a, b)),
            },
            t => Some(t.clone()),
        }
    }
}

fn is_real(c: &CdNum) -> bool {
    c.im().norm_sq() == 0.0
}

/// A symbolic sum of monomials in `z` and `conj(z)` with constants. Total to
/// evaluate on all of A_r.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Phrase {
    terms: Vec<Tree>,
}

impl Phrase {
    pub fn zero() -> Phrase {
        Phrase { terms: Vec::new() }
    }

    pub fn var() -> Phrase {
        Phrase {
            terms: vec![Tree::Var],
        }
    }

    pub fn conj_var() -> Phrase {
        Phrase {
            terms: vec![Tree::ConjVar],
        }
    }

    pub fn constant(c: CdNum) -> Phrase {
        Phrase::from_terms(vec![Tree::Const(c)])
    }

    pub fn real(level: u8, v: f64) -> Phrase {
        Phrase::constant(CdNum::real(level, v))
    }

    /// `z^n` as a left-leaning run; `n = 0` is the constant one at level 0.
    pub fn var_pow(n: u32) -> Phrase {
        if n == 0 {
            Phrase::constant(CdNum::one(0))
        } else {
            Phrase {
                terms: vec![Tree::var_run(n)],
            }
        }
    }

    pub fn from_terms(terms: Vec<Tree>) -> Phrase {
        let terms = terms
            .into_iter()
            .map(Tree::fold)
            .filter(|t| !t.has_zero_const())
            .collect();
        Phrase { terms }
    }

    pub fn terms(&self) -> &[Tree] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// True when every constant leaf is real; such phrases commute with
    /// everything they are composed with on a single complex plane.
    pub fn has_real_coefficients(&self) -> bool {
        fn check(t: &Tree) -> bool {
            match t {
                Tree::Const(c) => is_real(c),
                Tree::Mul(l, r) => check(l) && check(r),
                _ => true,
            }
        }
        self.terms.iter().all(check)
    }

    pub fn contains_conj(&self) -> bool {
        fn check(t: &Tree) -> bool {
            match t {
                Tree::ConjVar => true,
                Tree::Mul(l, r) => check(l) || check(r),
                _ => false,
            }
        }
        self.terms.iter().any(check)
    }

    pub fn eval(&self, z: &CdNum) -> CdNum {
        let zc = z.conj();
        let mut acc = CdNum::zero(z.level());
        for t in &self.terms {
            acc = &acc + &t.eval(z, &zc, &[]).expect("plain phrases have no slots");
        }
        acc
    }

    pub fn conj(&self) -> Phrase {
        Phrase::from_terms(self.terms.iter().map(Tree::conj).collect())
    }

    pub fn scale(&self, s: f64) -> Phrase {
        if s == 0.0 {
            return Phrase::zero();
        }
        Phrase::from_terms(
            self.terms
                .iter()
                .map(|t| Tree::mul(Tree::Const(CdNum::real(0, s)), t.clone()))
                .collect(),
        )
    }

    pub fn pow(&self, n: u32) -> Phrase {
        if n == 0 {
            return Phrase::constant(CdNum::one(0));
        }
        let mut acc = self.clone();
        for _ in 1..n {
            acc = &acc * self;
        }
        acc
    }

    /// Leibnitz expansion: one summand per matching leaf, the slot replacing
    /// that leaf. `D_z` of `conj(z)` is zero and vice versa.
    pub fn diff(&self, wrt: Wrt) -> OperatorPhrase {
        let mut terms = Vec::new();
        for t in &self.terms {
            t.diff(wrt, 0, &mut terms);
        }
        OperatorPhrase { terms, arity: 1 }
    }

    /// Substitute `inner` for z (and its conjugate phrase for conj(z)).
    pub fn compose(&self, inner: &Phrase) -> Phrase {
        let inner_conj = inner.conj();
        let mut acc = Phrase::zero();
        for t in &self.terms {
            acc = &acc + &t.subst(inner, &inner_conj);
        }
        acc
    }

    /// Left-algorithm antiderivative: each term must be a central-scalar
    /// multiple of a word reducible to `(a * z^n) * b`; the result has
    /// `diff(..).slot(1)` equal to the integrand. Valid for r <= 3 where
    /// two-generated subalgebras are associative.
    pub fn antiderivative_left(&self) -> Result<Phrase, PhraseError> {
        let mut out = Vec::new();
        for t in &self.terms {
            let shape = LeftShape::of(t)?;
            out.push(shape.antiderivative_tree());
        }
        Ok(Phrase::from_terms(out))
    }

    /// The left-shape decomposition of every term, used by quadrature mode to
    /// build the hat operator.
    pub fn left_shapes(&self) -> Result<Vec<LeftShape>, PhraseError> {
        self.terms.iter().map(LeftShape::of).collect()
    }
}

impl Add for &Phrase {
    type Output = Phrase;
    fn add(self, rhs: &Phrase) -> Phrase {
        let mut terms = self.terms.clone();
        terms.extend(rhs.terms.iter().cloned());
        Phrase::from_terms(terms)
    }
}

impl Sub for &Phrase {
    type Output = Phrase;
    fn sub(self, rhs: &Phrase) -> Phrase {
        self + &-rhs
    }
}

impl Neg for &Phrase {
    type Output = Phrase;
    fn neg(self) -> Phrase {
        self.scale(-1.0)
    }
}

impl Mul for &Phrase {
    type Output = Phrase;
    fn mul(self, rhs: &Phrase) -> Phrase {
        let mut terms = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for a in &self.terms {
            for b in &rhs.terms {
                terms.push(Tree::mul(a.clone(), b.clone()));
            }
        }
        Phrase::from_terms(terms)
    }
}

impl Add for Phrase {
    type Output = Phrase;
    fn add(self, rhs: Phrase) -> Phrase {
        &self + &rhs
    }
}

impl Mul for Phrase {
    type Output = Phrase;
    fn mul(self, rhs: Phrase) -> Phrase {
        &self * &rhs
    }
}

/// One monomial in the left-algorithm normal form `scalar * (a * z^n) * b`.
#[derive(Debug, Clone)]
pub struct LeftShape {
    pub scalar: f64,
    pub a: Option<CdNum>,
    pub n: u32,
    pub b: Option<CdNum>,
}

impl LeftShape {
    pub fn of(term: &Tree) -> Result<LeftShape, PhraseError> {
        let not_reducible = || PhraseError::NotLeftReducible(format!("{}", TreeDisplay(term)));
        // central real scalars come out first
        let mut scalar = 1.0;
        {
            let mut leaves = Vec::new();
            term.leaves(&mut leaves);
            for l in &leaves {
                match l {
                    Tree::Const(c) if is_real(c) => scalar *= c.re(),
                    Tree::Const(_) | Tree::Var => {}
                    _ => return Err(not_reducible()),
                }
            }
        }
        let stripped = match term.strip_real() {
            None => {
                // pure scalar term: scalar * z^0
                return Ok(LeftShape {
                    scalar,
                    a: None,
                    n: 0,
                    b: None,
                });
            }
            Some(t) => t,
        };
        let mut leaves = Vec::new();
        stripped.leaves(&mut leaves);
        // pattern [a?][z*n][b?]
        let mut idx = 0;
        let a = match leaves.first() {
            Some(Tree::Const(c)) => {
                idx += 1;
                Some((*c).clone())
            }
            _ => None,
        };
        let mut n = 0u32;
        while idx < leaves.len() && matches!(leaves[idx], Tree::Var) {
            n += 1;
            idx += 1;
        }
        let b = match leaves.get(idx) {
            Some(Tree::Const(c)) => {
                idx += 1;
                Some((*c).clone())
            }
            None => None,
            _ => return Err(not_reducible()),
        };
        if idx != leaves.len() {
            return Err(not_reducible());
        }
        // Bracketing: with a trailing constant the root multiplication must
        // attach it last ((a z^n) b); anything inside the a/z prefix is fine
        // because the subalgebra generated by two elements is associative.
        if b.is_some() && n > 0 {
            match &stripped {
                Tree::Mul(_, r) if matches!(**r, Tree::Const(_)) => {}
                _ => return Err(not_reducible()),
            }
        }
        Ok(LeftShape { scalar, a, n, b })
    }

    /// `(a z^{n+1}/(n+1)) b` with the central scalar folded in.
    fn antiderivative_tree(&self) -> Tree {
        let s = self.scalar / (self.n as f64 + 1.0);
        let run = Tree::var_run(self.n + 1);
        let core = match &self.a {
            Some(a) => Tree::mul(Tree::Const(a.scale(s)), run),
            None if s == 1.0 => run,
            None => Tree::mul(Tree::Const(CdNum::real(0, s)), run),
        };
        match &self.b {
            Some(b) => Tree::mul(core, Tree::Const(b.clone())),
            None => core,
        }
    }

    /// The hat operator of this monomial applied to `h` at `z`: the unique
    /// derivative-of-antiderivative with `hat(z).1 = f(z)`, i.e.
    /// `scalar * (a * [sum_j z^j h z^{n-j}] / (n+1)) * b`.
    pub fn hat_apply(&self, z: &CdNum, h: &CdNum) -> CdNum {
        let level = z.level();
        let mut sum = CdNum::zero(level);
        // powers z^0..z^n
        let mut pows = Vec::with_capacity(self.n as usize + 1);
        let mut p = CdNum::one(level);
        for _ in 0..=self.n {
            pows.push(p.clone());
            p = &p * z;
        }
        for j in 0..=(self.n as usize) {
            sum = &sum + &(&(&pows[j] * h) * &pows[self.n as usize - j]);
        }
        let mut out = sum.scale(self.scalar / (self.n as f64 + 1.0));
        if let Some(a) = &self.a {
            out = a * &out;
        }
        if let Some(b) = &self.b {
            out = &out * b;
        }
        out
    }
}

/// A phrase with slot leaves: an R-homogeneous operator-valued expression.
/// Arity-k operators eat k direction arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorPhrase {
    terms: Vec<Tree>,
    arity: u8,
}

impl OperatorPhrase {
    pub fn arity(&self) -> u8 {
        self.arity
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, z: &CdNum, slots: &[CdNum]) -> Result<CdNum, PhraseError> {
        if slots.len() < self.arity as usize {
            return Err(PhraseError::MissingSlot(slots.len() as u8));
        }
        let zc = z.conj();
        let mut acc = CdNum::zero(z.level());
        for t in &self.terms {
            acc = &acc + &t.eval(z, &zc, slots)?;
        }
        Ok(acc)
    }

    /// Differentiate once more; the new direction gets the next slot index.
    pub fn diff(&self, wrt: Wrt) -> OperatorPhrase {
        let mut terms = Vec::new();
        for t in &self.terms {
            t.diff(wrt, self.arity, &mut terms);
        }
        OperatorPhrase {
            terms,
            arity: self.arity + 1,
        }
    }
}

struct TreeDisplay<'a>(&'a Tree);

impl fmt::Display for TreeDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_tree(self.0, f)
    }
}

fn write_const(c: &CdNum, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if is_real(c) {
        return write!(f, "{}", c.re());
    }
    // unit basis element?
    let nonzero: Vec<usize> = (0..c.dim()).filter(|&k| c.coeff(k) != 0.0).collect();
    if nonzero.len() == 1 && nonzero[0] > 0 && c.coeff(nonzero[0]) == 1.0 {
        return write!(f, "e{}", nonzero[0]);
    }
    write!(f, "(")?;
    for (k, v) in c.coeffs().iter().enumerate() {
        if k > 0 {
            write!(f, ",")?;
        }
        write!(f, "{v}")?;
    }
    write!(f, ")")
}

fn write_tree(t: &Tree, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if let Some(n) = t.is_var_run() {
        if n == 1 {
            return write!(f, "z");
        }
        return write!(f, "z^{n}");
    }
    match t {
        Tree::Const(c) => write_const(c, f),
        Tree::Var => write!(f, "z"),
        Tree::ConjVar => write!(f, "conj(z)"),
        Tree::Slot { index, conj } => {
            if *conj {
                write!(f, "conj(h{index})")
            } else {
                write!(f, "h{index}")
            }
        }
        Tree::Mul(l, r) => {
            write_tree(l, f)?;
            write!(f, "*")?;
            let right_simple =
                r.is_var_run().is_some() || !matches!(**r, Tree::Mul(_, _));
            if right_simple {
                write_tree(r, f)
            } else {
                write!(f, "(")?;
                write_tree(r, f)?;
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for Phrase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write_tree(t, f)?;
        }
        Ok(())
    }
}

impl fmt::Display for OperatorPhrase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write_tree(t, f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cd(rng: &mut ChaCha8Rng, level: u8) -> CdNum {
        let coeffs = (0..1usize << level).map(|_| rng.gen_range(-1.0..1.0)).collect();
        CdNum::from_coeffs(level, coeffs).unwrap()
    }

    fn e(level: u8, k: usize) -> Phrase {
        Phrase::constant(CdNum::basis(level, k))
    }

    #[test]
    fn eval_examples() {
        // z * conj(z) at 1 + i1 is |z|^2 = 2
        let p = &Phrase::var() * &Phrase::conj_var();
        let z = &CdNum::one(2) + &CdNum::basis(2, 1);
        assert!(p.eval(&z).approx_eq(&CdNum::real(2, 2.0), 1e-15));

        // z^2 at i1 is -1
        assert!(Phrase::var_pow(2)
            .eval(&CdNum::basis(2, 1))
            .approx_eq(&CdNum::real(2, -1.0), 1e-15));

        // (i1 z) i2 at z = 1 is i3
        let p = &(&e(2, 1) * &Phrase::var()) * &e(2, 2);
        assert!(p.eval(&CdNum::one(2)).approx_eq(&CdNum::basis(2, 3), 1e-15));
    }

    #[test]
    fn diff_basic_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let z = random_cd(&mut rng, 3);
        let h = random_cd(&mut rng, 3);

        // D_z(z).h = h
        let d = Phrase::var().diff(Wrt::Z);
        assert!(d.eval(&z, &[h.clone()]).unwrap().approx_eq(&h, 1e-15));

        // D_z(conj z).h = 0
        let d = Phrase::conj_var().diff(Wrt::Z);
        assert!(d.eval(&z, &[h.clone()]).unwrap().approx_eq(&CdNum::zero(3), 1e-15));

        // D_conj(conj z).h = conj(h)
        let d = Phrase::conj_var().diff(Wrt::ConjZ);
        assert!(d.eval(&z, &[h.clone()]).unwrap().approx_eq(&h.conj(), 1e-15));

        // D_z(z^2).h at z = i1, h = i2 vanishes (anticommuting units)
        let d = Phrase::var_pow(2).diff(Wrt::Z);
        let got = d
            .eval(&CdNum::basis(2, 1), &[CdNum::basis(2, 2)])
            .unwrap();
        assert!(got.approx_eq(&CdNum::zero(2), 1e-15));
    }

    #[test]
    fn diff_is_leibnitz_sum_of_slots() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..50 {
            // three random linear factors (a + b z), product left-bracketed
            let fs: Vec<Phrase> = (0..3)
                .map(|_| {
                    &Phrase::constant(random_cd(&mut rng, 3))
                        + &(&Phrase::constant(random_cd(&mut rng, 3)) * &Phrase::var())
                })
                .collect();
            let prod = &(&fs[0] * &fs[1]) * &fs[2];
            let z = random_cd(&mut rng, 3);
            let h = random_cd(&mut rng, 3);
            let sym = prod.diff(Wrt::Z).eval(&z, &[h.clone()]).unwrap();
            // slot-by-slot expansion
            let d: Vec<CdNum> = fs
                .iter()
                .map(|p| p.diff(Wrt::Z).eval(&z, &[h.clone()]).unwrap())
                .collect();
            let v: Vec<CdNum> = fs.iter().map(|p| p.eval(&z)).collect();
            let expect = &(&(&d[0] * &v[1]) * &v[2])
                + &(&(&(&v[0] * &d[1]) * &v[2]) + &(&(&v[0] * &v[1]) * &d[2]));
            assert!(sym.approx_eq(&expect, 1e-10 * expect.norm().max(1.0)));
        }
    }

    #[test]
    fn second_derivative_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..30 {
            let p = &(&Phrase::constant(random_cd(&mut rng, 3)) * &Phrase::var_pow(3))
                + &(&(&e(3, 1) * &Phrase::var_pow(2)) * &Phrase::constant(random_cd(&mut rng, 3)));
            let d2 = p.diff(Wrt::Z).diff(Wrt::Z);
            let z = random_cd(&mut rng, 3);
            let h = random_cd(&mut rng, 3);
            let v = random_cd(&mut rng, 3);
            let hv = d2.eval(&z, &[h.clone(), v.clone()]).unwrap();
            let vh = d2.eval(&z, &[v, h]).unwrap();
            assert!(hv.approx_eq(&vh, 1e-9 * hv.norm().max(1.0)));
        }
    }

    #[test]
    fn antiderivative_left_examples() {
        // 1 -> z
        let g = Phrase::constant(CdNum::one(0)).antiderivative_left().unwrap();
        assert_eq!(g, Phrase::var());

        // (i1 z) i2 -> (i1 z^2/2) i2
        let p = &(&e(2, 1) * &Phrase::var()) * &e(2, 2);
        let g = p.antiderivative_left().unwrap();
        let want = &(&Phrase::constant(CdNum::basis(2, 1).scale(0.5)) * &Phrase::var_pow(2)) * &e(2, 2);
        assert_eq!(g, want);

        // differentiation at slot value 1 recovers the integrand
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for _ in 0..20 {
            let p = &(&Phrase::constant(random_cd(&mut rng, 3)) * &Phrase::var_pow(3))
                + &(&(&Phrase::constant(random_cd(&mut rng, 3)) * &Phrase::var_pow(2))
                    * &Phrase::constant(random_cd(&mut rng, 3)));
            let g = p.antiderivative_left().unwrap();
            let dg = g.diff(Wrt::Z);
            for _ in 0..20 {
                let z = random_cd(&mut rng, 3);
                let got = dg.eval(&z, &[CdNum::one(3)]).unwrap();
                let want = p.eval(&z);
                assert!(got.approx_eq(&want, 1e-10 * want.norm().max(1.0)));
            }
        }
    }

    #[test]
    fn antiderivative_rejects_bad_shapes() {
        // conj(z) is outside the left algorithm
        assert!(matches!(
            Phrase::conj_var().antiderivative_left(),
            Err(PhraseError::NotLeftReducible(_))
        ));
        // a (z b): trailing constant bracketed inside
        let p = Phrase::from_terms(vec![Tree::mul(
            Tree::Const(CdNum::basis(2, 1)),
            Tree::mul(Tree::Var, Tree::Const(CdNum::basis(2, 2))),
        )]);
        assert!(p.antiderivative_left().is_err());
        // a (b z^n): two non-real constants on the left
        let p = Phrase::from_terms(vec![Tree::mul(
            Tree::Const(CdNum::basis(2, 1)),
            Tree::mul(Tree::Const(CdNum::basis(2, 2)), Tree::Var),
        )]);
        assert!(p.antiderivative_left().is_err());
    }

    #[test]
    fn compose_matches_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        // outer = z^2, inner = z + 1
        let outer = Phrase::var_pow(2);
        let inner = &Phrase::var() + &Phrase::real(0, 1.0);
        let comp = outer.compose(&inner);
        for _ in 0..20 {
            let z = random_cd(&mut rng, 3);
            let want = outer.eval(&inner.eval(&z));
            assert!(comp.eval(&z).approx_eq(&want, 1e-10 * want.norm().max(1.0)));
        }
        // outer = conj(z), inner = i1 z
        let outer = Phrase::conj_var();
        let inner = &e(3, 1) * &Phrase::var();
        let comp = outer.compose(&inner);
        for _ in 0..20 {
            let z = random_cd(&mut rng, 3);
            let want = inner.eval(&z).conj();
            assert!(comp.eval(&z).approx_eq(&want, 1e-12));
        }
    }

    #[test]
    fn print_parse_shapes() {
        let p = &(&e(2, 1) * &Phrase::var()) * &e(2, 2);
        assert_eq!(p.to_string(), "e1*z*e2");
        let p = &e(2, 1) * &(&Phrase::var() * &e(2, 2));
        assert_eq!(p.to_string(), "e1*(z*e2)");
        assert_eq!(Phrase::var_pow(3).to_string(), "z^3");
        let q = &Phrase::var_pow(2) + &(&(&e(2, 1) * &Phrase::var()) * &e(2, 2));
        assert_eq!(q.to_string(), "z^2 + e1*z*e2");
    }

    #[test]
    fn operator_phrase_is_linear_in_slot() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let p = &(&Phrase::constant(random_cd(&mut rng, 3)) * &Phrase::var_pow(3))
            + &(&Phrase::var() * &Phrase::conj_var());
        let d = p.diff(Wrt::Z);
        for _ in 0..20 {
            let z = random_cd(&mut rng, 3);
            let h1 = random_cd(&mut rng, 3);
            let h2 = random_cd(&mut rng, 3);
            let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let lhs = d
                .eval(&z, &[&h1.scale(a) + &h2.scale(b)])
                .unwrap();
            let rhs = &d.eval(&z, &[h1]).unwrap().scale(a) + &d.eval(&z, &[h2]).unwrap().scale(b);
            assert!(lhs.approx_eq(&rhs, 1e-10 * rhs.norm().max(1.0)));
        }
    }
}
