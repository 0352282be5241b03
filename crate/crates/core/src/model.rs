//! SDE coefficients `dX = b(X) dt + √ε σ(X) dW` and the built-in benchmark models.
//!
//! Coefficients are pure maps written into caller-owned buffers so that the
//! action kernels can evaluate them in tight loops without allocating.
//! Matrices are `d × d` and stored row-major.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Drift and diffusion of an SDE together with the derivatives the
/// minimizer needs.
///
/// Implementations must be pure: the same `x` always yields the same output.
pub trait Coefficients: Send + Sync {
    fn dim(&self) -> usize;

    /// `b(x)`.
    fn drift(&self, x: &[f64], out: &mut [f64]);

    /// Jacobian of `b`, `out[i * d + j] = ∂b_i / ∂x_j`.
    fn drift_jacobian(&self, x: &[f64], out: &mut [f64]);

    /// `σ(x)`.
    fn diffusion(&self, x: &[f64], out: &mut [f64]);

    /// `σ(x)⁻¹`, supplied analytically.
    fn diffusion_inverse(&self, x: &[f64], out: &mut [f64]);

    /// `∂σ / ∂x_k`. The default is zero, which is right for additive noise.
    fn diffusion_partial(&self, _x: &[f64], _k: usize, out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// An SDE model: coefficients plus the regularity metadata the drivers rely on.
#[derive(Clone)]
pub struct Model {
    name: String,
    lipschitz: f64,
    additive: bool,
    coefficients: Arc<dyn Coefficients>,
}

impl fmt::Debug for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Model")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("lipschitz", &self.lipschitz)
            .field("additive", &self.additive)
            .finish()
    }
}

impl Model {
    /// Wraps user coefficients. `lipschitz` is the declared global constant
    /// `L` with `|b(x)-b(y)| + |σ(x)-σ(y)| ≤ L|x-y|`; it is never inferred.
    pub fn new(
        name: impl Into<String>,
        lipschitz: f64,
        additive: bool,
        coefficients: Arc<dyn Coefficients>,
    ) -> Result<Self> {
        if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
            return Err(Error::Config(format!(
                "lipschitz constant must be finite and nonnegative, got {lipschitz}"
            )));
        }
        if coefficients.dim() == 0 {
            return Err(Error::Config("state dimension must be positive".into()));
        }
        Ok(Self {
            name: name.into(),
            lipschitz,
            additive,
            coefficients,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.coefficients.dim()
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// True iff σ does not depend on the state.
    pub fn is_additive(&self) -> bool {
        self.additive
    }

    pub fn coefficients(&self) -> &Arc<dyn Coefficients> {
        &self.coefficients
    }

    /// Largest step admitted by the θ-method LDP, `1/(2L)` (infinite for `L = 0`).
    pub fn max_step(&self) -> f64 {
        if self.lipschitz == 0.0 {
            f64::INFINITY
        } else {
            1.0 / (2.0 * self.lipschitz)
        }
    }

    pub fn drift(&self, x: &[f64], out: &mut [f64]) {
        self.coefficients.drift(x, out)
    }

    pub fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) {
        self.coefficients.drift_jacobian(x, out)
    }

    pub fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        self.coefficients.diffusion(x, out)
    }

    pub fn diffusion_inverse(&self, x: &[f64], out: &mut [f64]) {
        self.coefficients.diffusion_inverse(x, out)
    }

    pub fn diffusion_partial(&self, x: &[f64], k: usize, out: &mut [f64]) {
        if self.additive {
            out.fill(0.0);
        } else {
            self.coefficients.diffusion_partial(x, k, out)
        }
    }

    /// Same diffusion, zero drift. Used by the small-time construction.
    pub fn driftless(&self) -> Model {
        Model {
            name: format!("{}-driftless", self.name),
            lipschitz: self.lipschitz,
            additive: self.additive,
            coefficients: Arc::new(Driftless(self.coefficients.clone())),
        }
    }
}

/// Closed-form one-point rate functions of the Gaussian built-ins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExactRate {
    /// `|x - x₀|² / (2 s² T)` for `dX = √ε s dW`.
    Brownian { scale: f64 },
    /// Scalar `dX = (a X + c) dt + √ε s dW`: the terminal law is Gaussian with
    /// mean `m(T)` and variance `ε V(T)`, so `I(x) = (x - m)² / (2V)`.
    LinearGaussian { a: f64, c: f64, s: f64 },
}

impl ExactRate {
    pub fn eval(&self, x: &[f64], x0: &[f64], t_end: f64) -> f64 {
        match *self {
            ExactRate::Brownian { scale } => {
                let sq: f64 = x.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum();
                sq / (2.0 * scale * scale * t_end)
            }
            ExactRate::LinearGaussian { a, c, s } => {
                let (m, v) = linear_gaussian_moments(a, c, s, x0[0], t_end);
                (x[0] - m).powi(2) / (2.0 * v)
            }
        }
    }
}

/// Mean and (unit-ε) variance of the terminal value of the scalar linear SDE.
fn linear_gaussian_moments(a: f64, c: f64, s: f64, x0: f64, t_end: f64) -> (f64, f64) {
    if a == 0.0 {
        return (x0 + c * t_end, s * s * t_end);
    }
    let growth = (a * t_end).exp_m1();
    let mean = x0 + (a * x0 + c) * growth / a;
    let var = s * s * (2.0 * a * t_end).exp_m1() / (2.0 * a);
    (mean, var)
}

/// A registry entry: model plus its closed-form rate when one exists.
#[derive(Debug, Clone)]
pub struct ModelEntry {
    pub model: Model,
    pub exact_rate: Option<ExactRate>,
    pub description: String,
}

/// Looks up a built-in model by name.
///
/// Accepted names: `brownian`, `brownian(d)`, `ou-additive(a)`, `mult-sine`,
/// and the scalar families `scalar-additive(a, c, s)` and
/// `scalar-sine(a, c, base, amp)`.
pub fn builtin_model(name: &str) -> Result<ModelEntry> {
    let name = name.trim();
    let (family, params) = match name.find('(') {
        Some(open) => {
            let close = name
                .rfind(')')
                .filter(|&c| c > open && c == name.len() - 1)
                .ok_or_else(|| Error::UnknownModel(name.to_string()))?;
            let params = name[open + 1..close]
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::UnknownModel(name.to_string()))?;
            (name[..open].trim(), params)
        }
        None => (name, Vec::new()),
    };
    preset(family, &params)
}

/// Builds a model from a family name and numeric parameters.
pub fn preset(family: &str, params: &[f64]) -> Result<ModelEntry> {
    let arity = |n: usize| -> Result<()> {
        if params.len() == n {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "model `{family}` takes {n} parameter(s), got {}",
                params.len()
            )))
        }
    };
    match family {
        "brownian" => {
            let dim = match params {
                [] => 1,
                [d] if *d >= 1.0 && d.fract() == 0.0 => *d as usize,
                _ => {
                    return Err(Error::Config(
                        "brownian takes an optional positive integer dimension".into(),
                    ))
                }
            };
            let model = Model::new("brownian", 0.0, true, Arc::new(Brownian { dim }))?;
            Ok(ModelEntry {
                model,
                exact_rate: Some(ExactRate::Brownian { scale: 1.0 }),
                description: format!("b = 0, σ = I in dimension {dim}"),
            })
        }
        "ou-additive" => {
            arity(1)?;
            let a = params[0];
            scalar_additive(a, 0.0, 1.0).map(|mut e| {
                e.model.name = format!("ou-additive({a})");
                e.description = format!("b(x) = {a}·x, σ = 1");
                e
            })
        }
        "scalar-additive" => {
            arity(3)?;
            scalar_additive(params[0], params[1], params[2])
        }
        "mult-sine" => {
            arity(0)?;
            scalar_sine(-1.0, 0.0, 2.0, 1.0).map(|mut e| {
                e.model.name = "mult-sine".into();
                e.description = "b(x) = -x, σ(x) = 2 + sin x".into();
                e
            })
        }
        "scalar-sine" => {
            arity(4)?;
            scalar_sine(params[0], params[1], params[2], params[3])
        }
        other => Err(Error::UnknownModel(other.to_string())),
    }
}

fn scalar_additive(a: f64, c: f64, s: f64) -> Result<ModelEntry> {
    if !(a.is_finite() && c.is_finite() && s.is_finite()) || s == 0.0 {
        return Err(Error::Config(
            "scalar-additive needs finite a, c and nonzero s".into(),
        ));
    }
    let model = Model::new(
        format!("scalar-additive({a},{c},{s})"),
        a.abs(),
        true,
        Arc::new(ScalarAdditive { a, c, s }),
    )?;
    Ok(ModelEntry {
        model,
        exact_rate: Some(ExactRate::LinearGaussian { a, c, s }),
        description: format!("b(x) = {a}·x + {c}, σ = {s}"),
    })
}

fn scalar_sine(a: f64, c: f64, base: f64, amp: f64) -> Result<ModelEntry> {
    if !(a.is_finite() && c.is_finite() && base.is_finite() && amp.is_finite())
        || base.abs() <= amp.abs()
    {
        return Err(Error::Config(
            "scalar-sine needs |base| > |amp| so that σ stays invertible".into(),
        ));
    }
    let model = Model::new(
        format!("scalar-sine({a},{c},{base},{amp})"),
        a.abs() + amp.abs(),
        amp == 0.0,
        Arc::new(ScalarSine { a, c, base, amp }),
    )?;
    Ok(ModelEntry {
        model,
        exact_rate: None,
        description: format!("b(x) = {a}·x + {c}, σ(x) = {base} + {amp}·sin x"),
    })
}

#[derive(Debug)]
struct Brownian {
    dim: usize,
}

fn write_identity(d: usize, out: &mut [f64]) {
    out.fill(0.0);
    for i in 0..d {
        out[i * d + i] = 1.0;
    }
}

impl Coefficients for Brownian {
    fn dim(&self) -> usize {
        self.dim
    }
    fn drift(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn drift_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn diffusion(&self, _x: &[f64], out: &mut [f64]) {
        write_identity(self.dim, out);
    }
    fn diffusion_inverse(&self, _x: &[f64], out: &mut [f64]) {
        write_identity(self.dim, out);
    }
}

#[derive(Debug)]
struct ScalarAdditive {
    a: f64,
    c: f64,
    s: f64,
}

impl Coefficients for ScalarAdditive {
    fn dim(&self) -> usize {
        1
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.a * x[0] + self.c;
    }
    fn drift_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = self.a;
    }
    fn diffusion(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = self.s;
    }
    fn diffusion_inverse(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = 1.0 / self.s;
    }
}

#[derive(Debug)]
struct ScalarSine {
    a: f64,
    c: f64,
    base: f64,
    amp: f64,
}

impl Coefficients for ScalarSine {
    fn dim(&self) -> usize {
        1
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.a * x[0] + self.c;
    }
    fn drift_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = self.a;
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.base + self.amp * x[0].sin();
    }
    fn diffusion_inverse(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 1.0 / (self.base + self.amp * x[0].sin());
    }
    fn diffusion_partial(&self, x: &[f64], _k: usize, out: &mut [f64]) {
        out[0] = self.amp * x[0].cos();
    }
}

struct Driftless(Arc<dyn Coefficients>);

impl Coefficients for Driftless {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn drift(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn drift_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        self.0.diffusion(x, out)
    }
    fn diffusion_inverse(&self, x: &[f64], out: &mut [f64]) {
        self.0.diffusion_inverse(x, out)
    }
    fn diffusion_partial(&self, x: &[f64], k: usize, out: &mut [f64]) {
        self.0.diffusion_partial(x, k, out)
    }
}

/// Spectral norm of a row-major square matrix.
pub(crate) fn spectral_norm(d: usize, m: &[f64]) -> f64 {
    if d == 1 {
        return m[0].abs();
    }
    DMatrix::from_row_slice(d, d, m).singular_values().max()
}

/// Estimates the Lipschitz ratio `(|b(x)-b(y)| + |σ(x)-σ(y)|) / |x-y|` as a
/// maximum over `samples` random pairs drawn in the box `[-radius, radius]^d`.
///
/// Half the pairs are close neighbours so that local slopes are probed as
/// well as global ones.
pub fn check_lipschitz(model: &Model, samples: usize, radius: f64, rng_seed: u64) -> Result<f64> {
    if samples < 2 {
        return Err(Error::Domain(format!(
            "check_lipschitz needs at least 2 samples, got {samples}"
        )));
    }
    if !(radius > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {radius}")));
    }
    let d = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let (mut x, mut y) = (vec![0.0; d], vec![0.0; d]);
    let (mut bx, mut by) = (vec![0.0; d], vec![0.0; d]);
    let (mut sx, mut sy) = (vec![0.0; d * d], vec![0.0; d * d]);
    let mut best: f64 = 0.0;
    for i in 0..samples {
        for v in x.iter_mut() {
            *v = rng.random_range(-radius..=radius);
        }
        let spread = if i % 2 == 0 { radius } else { 1e-3 * radius };
        for (yv, xv) in y.iter_mut().zip(&x) {
            *yv = xv + rng.random_range(-spread..=spread);
        }
        let dist = norm_diff(&x, &y);
        if dist == 0.0 {
            continue;
        }
        model.drift(&x, &mut bx);
        model.drift(&y, &mut by);
        model.diffusion(&x, &mut sx);
        model.diffusion(&y, &mut sy);
        for (a, b) in sx.iter_mut().zip(&sy) {
            *a -= b;
        }
        let ratio = (norm_diff(&bx, &by) + spectral_norm(d, &sx)) / dist;
        best = best.max(ratio);
    }
    Ok(best)
}

pub(crate) fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_builtin_names() {
        assert_eq!(builtin_model("brownian").unwrap().model.dim(), 1);
        assert_eq!(builtin_model("brownian(3)").unwrap().model.dim(), 3);
        let ou = builtin_model("ou-additive(-1)").unwrap();
        assert_eq!(ou.model.lipschitz(), 1.0);
        assert!(ou.model.is_additive());
        let ms = builtin_model("mult-sine").unwrap();
        assert_eq!(ms.model.lipschitz(), 2.0);
        assert!(!ms.model.is_additive());
        assert!(ms.exact_rate.is_none());
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert!(matches!(builtin_model("geometric"), Err(Error::UnknownModel(_))));
        assert!(matches!(builtin_model("ou-additive(x)"), Err(Error::UnknownModel(_))));
        assert!(builtin_model("ou-additive").is_err());
        assert!(builtin_model("scalar-sine(1,0,1,2)").is_err());
    }

    #[test]
    fn brownian_exact_rate() {
        let e = builtin_model("brownian").unwrap().exact_rate.unwrap();
        assert_eq!(e.eval(&[1.0], &[0.0], 1.0), 0.5);
        assert_eq!(e.eval(&[3.0], &[1.0], 2.0), 1.0);
    }

    #[test]
    fn ou_exact_rate_matches_closed_form() {
        let e = builtin_model("ou-additive(-1)").unwrap().exact_rate.unwrap();
        let a: f64 = -1.0;
        let expected = a * ((-a).exp() * 1.0 - 0.0).powi(2) / (1.0 - (-2.0 * a).exp());
        assert!((e.eval(&[1.0], &[0.0], 1.0) - expected).abs() < 1e-14);
        assert!((expected - 1.156_517_642_749_665_5).abs() < 1e-12);
        // zero exactly at the skeleton endpoint
        let x0 = 0.7;
        let skel = x0 * (a * 2.0).exp();
        assert!(e.eval(&[skel], &[x0], 2.0).abs() < 1e-28);
    }

    #[test]
    fn lipschitz_spot_checks() {
        let b = builtin_model("brownian").unwrap().model;
        assert_eq!(check_lipschitz(&b, 100, 10.0, 1).unwrap(), 0.0);
        let ou = builtin_model("ou-additive(1)").unwrap().model;
        assert!(check_lipschitz(&ou, 1000, 10.0, 2).unwrap() <= 1.0 + 1e-9);
        let ms = builtin_model("mult-sine").unwrap().model;
        let est = check_lipschitz(&ms, 10_000, 10.0, 3).unwrap();
        assert!(est <= 2.0 + 1e-9);
        assert!(est > 1.5);
        assert!(check_lipschitz(&ms, 1, 10.0, 3).is_err());
    }
}
