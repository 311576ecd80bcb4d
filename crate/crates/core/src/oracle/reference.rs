//! Independent scalar re-implementation of the network loss.
//!
//! Written directly over a flat parameter vector with plain loops and generic
//! scalars, sharing no code with the batched forward/backward path. With
//! hyper-dual numbers it yields exact first and second derivatives, which
//! makes it the materializing oracle for per-sample gradients and explicit
//! Hessians.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::model::{Activation, Example, LossKind, ModelParams, ModelSpec, Target};

pub trait Scalar: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> {
    fn constant(v: f64) -> Self;
    fn re(self) -> f64;
    fn tanh(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
}

impl Scalar for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn re(self) -> f64 {
        self
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
}

/// `re + e1·ε₁ + e2·ε₂ + e12·ε₁ε₂` with `ε₁² = ε₂² = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperDual {
    pub re: f64,
    pub e1: f64,
    pub e2: f64,
    pub e12: f64,
}

impl HyperDual {
    fn chain(self, f: f64, df: f64, d2f: f64) -> Self {
        HyperDual { re: f, e1: df * self.e1, e2: df * self.e2, e12: df * self.e12 + d2f * self.e1 * self.e2 }
    }
}

impl Add for HyperDual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        HyperDual { re: self.re + o.re, e1: self.e1 + o.e1, e2: self.e2 + o.e2, e12: self.e12 + o.e12 }
    }
}

impl Sub for HyperDual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        HyperDual { re: self.re - o.re, e1: self.e1 - o.e1, e2: self.e2 - o.e2, e12: self.e12 - o.e12 }
    }
}

impl Mul for HyperDual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        HyperDual {
            re: self.re * o.re,
            e1: self.re * o.e1 + self.e1 * o.re,
            e2: self.re * o.e2 + self.e2 * o.re,
            e12: self.re * o.e12 + self.e1 * o.e2 + self.e2 * o.e1 + self.e12 * o.re,
        }
    }
}

impl Neg for HyperDual {
    type Output = Self;
    fn neg(self) -> Self {
        HyperDual { re: -self.re, e1: -self.e1, e2: -self.e2, e12: -self.e12 }
    }
}

impl Scalar for HyperDual {
    fn constant(v: f64) -> Self {
        HyperDual { re: v, e1: 0.0, e2: 0.0, e12: 0.0 }
    }
    fn re(self) -> f64 {
        self.re
    }
    fn tanh(self) -> Self {
        let t = self.re.tanh();
        let d = 1.0 - t * t;
        self.chain(t, d, -2.0 * t * d)
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e, e)
    }
    fn ln(self) -> Self {
        self.chain(self.re.ln(), 1.0 / self.re, -1.0 / (self.re * self.re))
    }
}

fn activate<S: Scalar>(act: Activation, x: S) -> S {
    match act {
        Activation::Identity => x,
        Activation::Relu => {
            if x.re() > 0.0 {
                x
            } else {
                S::constant(0.0)
            }
        }
        Activation::Tanh => x.tanh(),
    }
}

/// Loss of one example at the flat parameter vector `flat`.
pub fn reference_loss<S: Scalar>(spec: &ModelSpec, flat: &[S], ex: &Example) -> S {
    let t_len = spec.seq_len;
    let d0 = spec.input_dim();
    let mut total = S::constant(0.0);
    for pos in 0..t_len {
        let mut a: Vec<S> = ex.features[pos * d0..(pos + 1) * d0].iter().map(|&v| S::constant(v)).collect();
        let mut at = 0;
        for layer in 0..spec.n_layers() {
            let (d_in, d_out) = (spec.dims[layer], spec.dims[layer + 1]);
            let w = &flat[at..at + d_in * d_out];
            at += d_in * d_out;
            let mut s = vec![S::constant(0.0); d_out];
            for (k, sk) in s.iter_mut().enumerate() {
                for j in 0..d_in {
                    *sk = *sk + a[j] * w[j * d_out + k];
                }
            }
            if spec.bias[layer] {
                for (k, sk) in s.iter_mut().enumerate() {
                    *sk = *sk + flat[at + k];
                }
                at += d_out;
            }
            a = if layer + 1 < spec.n_layers() {
                s.into_iter().map(|v| activate(spec.activations[layer], v)).collect()
            } else {
                s
            };
        }
        total = total + position_loss(spec, &a, &ex.target, pos);
    }
    total
}

fn position_loss<S: Scalar>(spec: &ModelSpec, out: &[S], target: &Target, pos: usize) -> S {
    let d_out = spec.output_dim();
    match spec.loss {
        LossKind::Mse => {
            let y: Vec<f64> = match target {
                Target::Class(c) => {
                    let k = if c.len() == 1 { c[0] } else { c[pos] };
                    (0..d_out).map(|i| if i == k { 1.0 } else { 0.0 }).collect()
                }
                Target::Regression(v) if v.len() == d_out => v.clone(),
                Target::Regression(v) => v[pos * d_out..(pos + 1) * d_out].to_vec(),
            };
            let mut acc = S::constant(0.0);
            for (o, yi) in out.iter().zip(y) {
                let d = *o - S::constant(yi);
                acc = acc + d * d;
            }
            S::constant(0.5) * acc
        }
        LossKind::SoftmaxCrossEntropy => {
            let Target::Class(c) = target else { panic!("cross-entropy needs class targets") };
            let k = if c.len() == 1 { c[0] } else { c[pos] };
            let m = out.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.re()));
            let mut z = S::constant(0.0);
            for o in out {
                z = z + (*o - S::constant(m)).exp();
            }
            S::constant(m) + z.ln() - out[k]
        }
    }
}

fn seeded(flat: &[f64], i: usize, j: Option<usize>) -> Vec<HyperDual> {
    flat.iter()
        .enumerate()
        .map(|(k, &v)| HyperDual {
            re: v,
            e1: if k == i { 1.0 } else { 0.0 },
            e2: if Some(k) == j { 1.0 } else { 0.0 },
            e12: 0.0,
        })
        .collect()
}

fn check(spec: &ModelSpec, params: &ModelParams) -> Result<Vec<f64>> {
    if !params.matches_spec(spec) {
        return Err(Error::dims("reference", "parameters do not match the model spec"));
    }
    Ok(params.flatten())
}

/// Exact per-sample gradient, flattened in [`ModelParams::flatten`] order.
pub fn reference_gradient(spec: &ModelSpec, params: &ModelParams, ex: &Example) -> Result<Vec<f64>> {
    let flat = check(spec, params)?;
    Ok(crate::par::map_range(flat.len(), |i| reference_loss(spec, &seeded(&flat, i, None), ex).e1))
}

/// Exact Hessian of one example's loss, dense `P x P`.
pub fn reference_hessian(spec: &ModelSpec, params: &ModelParams, ex: &Example) -> Result<Vec<Vec<f64>>> {
    let flat = check(spec, params)?;
    let p = flat.len();
    let upper = crate::par::map_range(p, |i| {
        (i..p).map(|j| reference_loss(spec, &seeded(&flat, i, Some(j)), ex).e12).collect::<Vec<f64>>()
    });
    let mut h = vec![vec![0.0; p]; p];
    for (i, row) in upper.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            h[i][i + off] = v;
            h[i + off][i] = v;
        }
    }
    Ok(h)
}

pub fn reference_loss_value(spec: &ModelSpec, params: &ModelParams, ex: &Example) -> Result<f64> {
    let flat = check(spec, params)?;
    Ok(reference_loss(spec, &flat, ex))
}

pub fn mat_vec(h: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    h.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

pub fn flat_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
