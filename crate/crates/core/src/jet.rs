//! Multivariate hyper-dual numbers.
//!
//! A `Jet` with `k` units is a truncated polynomial in commuting
//! infinitesimals `ε_0 .. ε_{k-1}` with `ε_i² = 0`. Coefficient `c[mask]`
//! multiplies the monomial `Π_{i ∈ mask} ε_i`, so a `Jet` carries every mixed
//! partial derivative that is at most first order in each unit. Nesting
//! directional derivatives only ever appends a unit, which lets code pick the
//! differentiation depth at runtime (vector-field brackets of arbitrary height)
//! without generic recursion.
//!
//! Operands with different unit counts are combined by embedding the smaller
//! one, since units are always allocated as a prefix.

use smallvec::SmallVec;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

type Coeffs = SmallVec<[f64; 8]>;

/// Upper bound on units; `3^MAX_UNITS` multiplies per product.
pub const MAX_UNITS: u32 = 12;

#[derive(Clone, PartialEq)]
pub struct Jet {
    units: u32,
    c: Coeffs,
}

impl Jet {
    /// A constant with `units` infinitesimal slots.
    pub fn constant(value: f64, units: u32) -> Self {
        assert!(units <= MAX_UNITS, "jet unit count {units} exceeds {MAX_UNITS}");
        let mut c: Coeffs = SmallVec::from_elem(0.0, 1 << units);
        c[0] = value;
        Self { units, c }
    }

    pub fn zero(units: u32) -> Self {
        Self::constant(0.0, units)
    }

    /// `value + ε_unit`.
    pub fn variable(value: f64, units: u32, unit: u32) -> Self {
        assert!(unit < units);
        let mut j = Self::constant(value, units);
        j.c[1 << unit] = 1.0;
        j
    }

    pub fn units(&self) -> u32 {
        self.units
    }

    pub fn real(&self) -> f64 {
        self.c[0]
    }

    pub fn coeff(&self, mask: usize) -> f64 {
        self.c[mask]
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&v| v == 0.0)
    }

    /// Embeds into a jet with `units` slots; the new slots carry zero.
    pub fn lift(&self, units: u32) -> Self {
        assert!(units >= self.units && units <= MAX_UNITS);
        if units == self.units {
            return self.clone();
        }
        let mut c: Coeffs = SmallVec::from_elem(0.0, 1 << units);
        c[..self.c.len()].copy_from_slice(&self.c);
        Self { units, c }
    }

    /// Adds `ε_unit · direction`; `unit` must be one of the existing slots.
    pub fn perturb(&self, unit: u32, direction: &Jet) -> Self {
        assert!(unit < self.units);
        let d = direction.lift(self.units);
        let bit = 1usize << unit;
        let mut out = self.clone();
        for mask in 0..out.c.len() {
            if mask & bit == 0 {
                out.c[mask | bit] += d.c[mask];
            }
        }
        out
    }

    /// Coefficient of the product of the top `drop` units, as a jet over the
    /// remaining ones.
    pub fn extract_top(&self, drop: u32) -> Self {
        assert!(drop <= self.units);
        let units = self.units - drop;
        let high = ((1usize << drop) - 1) << units;
        let len = 1usize << units;
        let mut c: Coeffs = SmallVec::from_elem(0.0, len);
        for (mask, slot) in c.iter_mut().enumerate() {
            *slot = self.c[mask | high];
        }
        Self { units, c }
    }

    /// Part of the jet free of the top `drop` units.
    pub fn truncate_top(&self, drop: u32) -> Self {
        assert!(drop <= self.units);
        let units = self.units - drop;
        Self {
            units,
            c: SmallVec::from_slice(&self.c[..1usize << units]),
        }
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            units: self.units,
            c: self.c.iter().map(|v| v * k).collect(),
        }
    }

    /// `f(a + n) = Σ_m f⁽ᵐ⁾(a)/m! · nᵐ`; `derivs[m] = f⁽ᵐ⁾(a)` for
    /// `m = 0..=units`.
    fn compose(&self, derivs: &[f64]) -> Self {
        let units = self.units;
        let mut nil = self.clone();
        nil.c[0] = 0.0;
        let mut out = Jet::constant(derivs[0], units);
        let mut power = Jet::constant(1.0, units);
        let mut factorial = 1.0;
        for (m, d) in derivs.iter().enumerate().skip(1) {
            power = &power * &nil;
            if power.is_zero() {
                break;
            }
            factorial *= m as f64;
            out += &power.scale(d / factorial);
        }
        out
    }

    pub fn powf(&self, p: f64) -> Self {
        let a = self.real();
        let mut derivs = Vec::with_capacity(self.units as usize + 1);
        let mut coeff = 1.0;
        for m in 0..=self.units {
            derivs.push(coeff * a.powf(p - m as f64));
            coeff *= p - m as f64;
        }
        self.compose(&derivs)
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    pub fn recip(&self) -> Self {
        let a = self.real();
        let mut derivs = Vec::with_capacity(self.units as usize + 1);
        let mut term = 1.0 / a;
        for m in 0..=self.units {
            derivs.push(term);
            term *= -((m + 1) as f64) / a;
        }
        self.compose(&derivs)
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut out = Jet::constant(1.0, self.units);
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    fn aligned<'a>(a: &'a Jet, b: &'a Jet) -> (std::borrow::Cow<'a, Jet>, std::borrow::Cow<'a, Jet>) {
        use std::borrow::Cow;
        match a.units.cmp(&b.units) {
            std::cmp::Ordering::Equal => (Cow::Borrowed(a), Cow::Borrowed(b)),
            std::cmp::Ordering::Less => (Cow::Owned(a.lift(b.units)), Cow::Borrowed(b)),
            std::cmp::Ordering::Greater => (Cow::Borrowed(a), Cow::Owned(b.lift(a.units))),
        }
    }
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet{}{:?}", self.units, self.c.as_slice())
    }
}

impl From<f64> for Jet {
    fn from(v: f64) -> Self {
        Jet::constant(v, 0)
    }
}

impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, rhs: &'a Jet) -> Jet {
        let (a, b) = Jet::aligned(self, rhs);
        Jet {
            units: a.units,
            c: a.c.iter().zip(&b.c).map(|(x, y)| x + y).collect(),
        }
    }
}

impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, rhs: &'a Jet) -> Jet {
        let (a, b) = Jet::aligned(self, rhs);
        Jet {
            units: a.units,
            c: a.c.iter().zip(&b.c).map(|(x, y)| x - y).collect(),
        }
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &'a Jet) -> Jet {
        let (a, b) = Jet::aligned(self, rhs);
        let len = a.c.len();
        let mut c: Coeffs = SmallVec::from_elem(0.0, len);
        for (s, slot) in c.iter_mut().enumerate() {
            // sum over submasks of s
            let mut sub = s;
            let mut acc = 0.0;
            loop {
                acc += a.c[sub] * b.c[s ^ sub];
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & s;
            }
            *slot = acc;
        }
        Jet { units: a.units, c }
    }
}

impl<'a> Div<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn div(self, rhs: &'a Jet) -> Jet {
        if rhs.units == 0 {
            return self.scale(1.0 / rhs.real());
        }
        self * &rhs.recip()
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, k: f64) -> Jet {
        self.scale(k)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, k: f64) -> Jet {
        self.scale(k)
    }
}

macro_rules! owned_binop {
    ($tr:ident, $m:ident) => {
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl<'a> $tr<&'a Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &'a Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
    };
}

owned_binop!(Add, add);
owned_binop!(Sub, sub);
owned_binop!(Mul, mul);
owned_binop!(Div, div);

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        if rhs.units > self.units {
            *self = self.lift(rhs.units);
        }
        for (mask, v) in rhs.c.iter().enumerate() {
            self.c[mask] += v;
        }
    }
}

impl AddAssign<Jet> for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        *self += &rhs;
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        if rhs.units > self.units {
            *self = self.lift(rhs.units);
        }
        for (mask, v) in rhs.c.iter().enumerate() {
            self.c[mask] -= v;
        }
    }
}

/// Lifts every entry to `units` and adds `ε_unit · direction`.
pub fn perturb_vec(base: &[Jet], unit: u32, direction: &[Jet]) -> Vec<Jet> {
    let units = unit + 1;
    base.iter()
        .zip(direction)
        .map(|(b, d)| b.lift(units.max(b.units)).perturb(unit, d))
        .collect()
}

pub fn max_units(v: &[Jet]) -> u32 {
    v.iter().map(Jet::units).max().unwrap_or(0)
}

pub fn constants(v: &[f64], units: u32) -> Vec<Jet> {
    v.iter().map(|&x| Jet::constant(x, units)).collect()
}

pub fn reals(v: &[Jet]) -> Vec<f64> {
    v.iter().map(Jet::real).collect()
}

pub fn dot(a: &[Jet], b: &[Jet]) -> Jet {
    let units = max_units(a).max(max_units(b));
    let mut acc = Jet::zero(units);
    for (x, y) in a.iter().zip(b) {
        acc += &(x * y);
    }
    acc
}
