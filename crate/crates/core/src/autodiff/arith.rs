//! Scalar arithmetic abstracted over plain evaluation and tape recording, so
//! residual formulas are written once and used on both paths.

use super::tape::{Tape, Var};

pub trait Arith {
    type S: Copy;

    fn cst(&mut self, c: f64) -> Self::S;
    fn add(&mut self, a: Self::S, b: Self::S) -> Self::S;
    fn sub(&mut self, a: Self::S, b: Self::S) -> Self::S;
    fn mul(&mut self, a: Self::S, b: Self::S) -> Self::S;
    fn scale(&mut self, a: Self::S, c: f64) -> Self::S;
    fn offset(&mut self, a: Self::S, c: f64) -> Self::S;
}

/// Plain `f64` evaluation.
#[derive(Clone, Copy, Debug, Default)]
pub struct Eval;

impl Arith for Eval {
    type S = f64;

    fn cst(&mut self, c: f64) -> f64 {
        c
    }
    fn add(&mut self, a: f64, b: f64) -> f64 {
        a + b
    }
    fn sub(&mut self, a: f64, b: f64) -> f64 {
        a - b
    }
    fn mul(&mut self, a: f64, b: f64) -> f64 {
        a * b
    }
    fn scale(&mut self, a: f64, c: f64) -> f64 {
        c * a
    }
    fn offset(&mut self, a: f64, c: f64) -> f64 {
        a + c
    }
}

impl Arith for Tape {
    type S = Var;

    fn cst(&mut self, c: f64) -> Var {
        self.constant(c)
    }
    fn add(&mut self, a: Var, b: Var) -> Var {
        Tape::add(self, a, b)
    }
    fn sub(&mut self, a: Var, b: Var) -> Var {
        Tape::sub(self, a, b)
    }
    fn mul(&mut self, a: Var, b: Var) -> Var {
        Tape::mul(self, a, b)
    }
    fn scale(&mut self, a: Var, c: f64) -> Var {
        Tape::scale(self, a, c)
    }
    fn offset(&mut self, a: Var, c: f64) -> Var {
        Tape::offset(self, a, c)
    }
}
