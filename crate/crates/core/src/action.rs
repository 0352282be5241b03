//! Freidlin–Wentzell action `A(φ)` and its θ-method analogue `B_h(φ)` on
//! piecewise-linear paths, with analytic gradients in the interior nodes.
//!
//! ```text
//! A(φ)   = ½ ∫₀ᵀ |σ⁻¹(φ(t)) (φ'(t) − b(φ(t)))|² dt
//! B_h(φ) = ½ ∫₀ᵀ |σ⁻¹(φ(t̂)) (φ'(t) − b((1−θ)φ(t̂) + θφ(ť)))|² dt
//! ```
//!
//! `A` is integrated by a per-subinterval quadrature. `B_h` has constant
//! coefficients on each θ-step and `φ'` is piecewise constant, so it is
//! summed exactly.

use crate::error::{Error, Result};
use crate::model::Model;
use crate::path::GridPath;

/// Quadrature rule applied on each path subinterval for `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Quadrature {
    Midpoint,
    #[default]
    GaussLegendre2,
    GaussLegendre3,
}

impl Quadrature {
    /// Gauss–Legendre rule with `k ∈ {2, 3}` points.
    pub fn gauss_legendre(k: usize) -> Result<Self> {
        match k {
            2 => Ok(Quadrature::GaussLegendre2),
            3 => Ok(Quadrature::GaussLegendre3),
            _ => Err(Error::Config(format!(
                "Gauss-Legendre quadrature supports 2 or 3 points, got {k}"
            ))),
        }
    }

    /// Nodes on `[0, 1]` and weights summing to one.
    fn rule(self) -> &'static [(f64, f64)] {
        const GL2: f64 = 0.211_324_865_405_187_1; // ½ − 1/(2√3)
        const GL3: f64 = 0.112_701_665_379_258_3; // ½ − ½√(3/5)
        match self {
            Quadrature::Midpoint => &[(0.5, 1.0)],
            Quadrature::GaussLegendre2 => &[(GL2, 0.5), (1.0 - GL2, 0.5)],
            Quadrature::GaussLegendre3 => &[
                (GL3, 5.0 / 18.0),
                (0.5, 4.0 / 9.0),
                (1.0 - GL3, 5.0 / 18.0),
            ],
        }
    }
}

impl std::str::FromStr for Quadrature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "midpoint" => Ok(Quadrature::Midpoint),
            "gl2" | "gauss-legendre-2" => Ok(Quadrature::GaussLegendre2),
            "gl3" | "gauss-legendre-3" => Ok(Quadrature::GaussLegendre3),
            other => Err(Error::Config(format!("unknown quadrature `{other}`"))),
        }
    }
}

/// Which functional to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActionSpec {
    /// `A(φ)`.
    Continuous { quadrature: Quadrature },
    /// `B_h(φ)` on a θ-grid of `steps` subintervals; the path grid must
    /// refine it.
    Discrete { theta: f64, steps: usize },
}

impl ActionSpec {
    pub fn continuous() -> Self {
        ActionSpec::Continuous {
            quadrature: Quadrature::default(),
        }
    }

    pub fn discrete(theta: f64, steps: usize) -> Self {
        ActionSpec::Discrete { theta, steps }
    }

    /// Checks θ and grid compatibility against `path`.
    pub fn validate(&self, path: &GridPath) -> Result<()> {
        if let ActionSpec::Discrete { theta, steps } = *self {
            if !(0.0..=1.0).contains(&theta) {
                return Err(Error::Config(format!("theta ∈ [0,1] required, got {theta}")));
            }
            if steps == 0 || path.steps() % steps != 0 {
                return Err(Error::Config(format!(
                    "path grid of {} steps does not refine the θ-grid of {steps} steps",
                    path.steps()
                )));
            }
        }
        Ok(())
    }

    /// Evaluates the action.
    pub fn value(&self, model: &Model, path: &GridPath) -> Result<f64> {
        self.validate(path)?;
        check_dims(model, path)?;
        let mut k = Kernel::new(model);
        Ok(match *self {
            ActionSpec::Continuous { quadrature } => k.continuous(path, quadrature, None),
            ActionSpec::Discrete { theta, steps } => k.discrete(path, theta, steps, None),
        })
    }

    /// Evaluates the action and its gradient with respect to *all* nodes
    /// (endpoints included, node-major).
    pub fn value_and_full_gradient(
        &self,
        model: &Model,
        path: &GridPath,
        grad: &mut [f64],
    ) -> Result<f64> {
        self.validate(path)?;
        check_dims(model, path)?;
        if grad.len() != path.nodes().len() {
            return Err(Error::Domain("gradient buffer has the wrong length".into()));
        }
        grad.fill(0.0);
        let mut k = Kernel::new(model);
        Ok(match *self {
            ActionSpec::Continuous { quadrature } => k.continuous(path, quadrature, Some(grad)),
            ActionSpec::Discrete { theta, steps } => k.discrete(path, theta, steps, Some(grad)),
        })
    }
}

fn check_dims(model: &Model, path: &GridPath) -> Result<()> {
    if model.dim() != path.dim() {
        return Err(Error::Domain(format!(
            "model dimension {} does not match path dimension {}",
            model.dim(),
            path.dim()
        )));
    }
    Ok(())
}

/// `A(φ)` by the given quadrature.
pub fn continuous_action(model: &Model, path: &GridPath, quadrature: Quadrature) -> Result<f64> {
    ActionSpec::Continuous { quadrature }.value(model, path)
}

/// `B_h(φ)` evaluated exactly on a θ-grid of `steps` subintervals.
pub fn discrete_action(model: &Model, path: &GridPath, theta: f64, steps: usize) -> Result<f64> {
    ActionSpec::Discrete { theta, steps }.value(model, path)
}

/// Gradient of the action with respect to the interior nodes; `N − 1`
/// vectors of length `d`, node-major.
pub fn action_gradient(spec: &ActionSpec, model: &Model, path: &GridPath) -> Result<Vec<f64>> {
    let mut full = vec![0.0; path.nodes().len()];
    spec.value_and_full_gradient(model, path, &mut full)?;
    let d = path.dim();
    Ok(full[d..path.steps() * d].to_vec())
}

/// Reusable buffers for coefficient evaluations.
struct Kernel<'m> {
    model: &'m Model,
    d: usize,
    point: Vec<f64>,
    drift: Vec<f64>,
    jac: Vec<f64>,
    sinv: Vec<f64>,
    dsigma: Vec<f64>,
    resid: Vec<f64>,
    r: Vec<f64>,
    p: Vec<f64>,
    tmp: Vec<f64>,
    g_state: Vec<f64>,
    p_sum: Vec<f64>,
    sigma_sum: Vec<f64>,
}

impl<'m> Kernel<'m> {
    fn new(model: &'m Model) -> Self {
        let d = model.dim();
        Self {
            model,
            d,
            point: vec![0.0; d],
            drift: vec![0.0; d],
            jac: vec![0.0; d * d],
            sinv: vec![0.0; d * d],
            dsigma: vec![0.0; d * d],
            resid: vec![0.0; d],
            r: vec![0.0; d],
            p: vec![0.0; d],
            tmp: vec![0.0; d],
            g_state: vec![0.0; d],
            p_sum: vec![0.0; d],
            sigma_sum: vec![0.0; d],
        }
    }

    /// Gradient of `½|r|²` through the state dependence of σ⁻¹ at `at`,
    /// given `r` and `p = σ⁻ᵀ r`: component `k` is `−p · (∂_kσ r)`.
    /// Added into `g_state`.
    fn add_sigma_term(&mut self, at: &[f64]) {
        if self.model.is_additive() {
            return;
        }
        let d = self.d;
        for k in 0..d {
            self.model.diffusion_partial(at, k, &mut self.dsigma);
            matvec(d, &self.dsigma, &self.r, &mut self.tmp);
            self.g_state[k] -= dot(&self.p, &self.tmp);
        }
    }

    fn continuous(&mut self, path: &GridPath, quad: Quadrature, mut grad: Option<&mut [f64]>) -> f64 {
        let d = self.d;
        let dt = path.step();
        let mut total = 0.0;
        for n in 0..path.steps() {
            let (a, b) = (path.node(n), path.node(n + 1));
            for &(s, w) in quad.rule() {
                for i in 0..d {
                    self.point[i] = a[i] + s * (b[i] - a[i]);
                }
                self.model.drift(&self.point, &mut self.drift);
                self.model.diffusion_inverse(&self.point, &mut self.sinv);
                for i in 0..d {
                    self.resid[i] = (b[i] - a[i]) / dt - self.drift[i];
                }
                matvec(d, &self.sinv, &self.resid, &mut self.r);
                total += 0.5 * dt * w * dot(&self.r, &self.r);

                let Some(g) = grad.as_deref_mut() else { continue };
                mtvec(d, &self.sinv, &self.r, &mut self.p);
                self.model.drift_jacobian(&self.point, &mut self.jac);
                mtvec(d, &self.jac, &self.p, &mut self.g_state);
                for v in self.g_state.iter_mut() {
                    *v = -*v;
                }
                let point = std::mem::take(&mut self.point);
                self.add_sigma_term(&point);
                self.point = point;
                // φ(t) = (1−s) a + s b,  φ' = (b − a)/dt
                let (ga, gb) = g.split_at_mut((n + 1) * d);
                let ga = &mut ga[n * d..];
                for i in 0..d {
                    ga[i] += dt * w * (1.0 - s) * self.g_state[i] - w * self.p[i];
                    gb[i] += dt * w * s * self.g_state[i] + w * self.p[i];
                }
            }
        }
        total
    }

    fn discrete(
        &mut self,
        path: &GridPath,
        theta: f64,
        steps: usize,
        mut grad: Option<&mut [f64]>,
    ) -> f64 {
        let d = self.d;
        let sub = path.steps() / steps;
        let delta = path.step();
        let mut total = 0.0;
        for n in 0..steps {
            let (lo, hi) = (n * sub, (n + 1) * sub);
            let (ya, yb) = (path.node(lo), path.node(hi));
            for i in 0..d {
                self.point[i] = (1.0 - theta) * ya[i] + theta * yb[i];
            }
            self.model.drift(&self.point, &mut self.drift);
            self.model.diffusion_inverse(ya, &mut self.sinv);
            if grad.is_some() {
                self.model.drift_jacobian(&self.point, &mut self.jac);
            }
            // accumulated over sub-steps: Σ p_j (for the drift term) and the σ term
            self.p_sum.fill(0.0);
            self.sigma_sum.fill(0.0);
            for j in lo..hi {
                let (za, zb) = (path.node(j), path.node(j + 1));
                for i in 0..d {
                    self.resid[i] = (zb[i] - za[i]) / delta - self.drift[i];
                }
                matvec(d, &self.sinv, &self.resid, &mut self.r);
                total += 0.5 * delta * dot(&self.r, &self.r);

                let Some(g) = grad.as_deref_mut() else { continue };
                mtvec(d, &self.sinv, &self.r, &mut self.p);
                for i in 0..d {
                    g[j * d + i] -= self.p[i];
                    g[(j + 1) * d + i] += self.p[i];
                    self.p_sum[i] += self.p[i];
                }
                self.g_state.fill(0.0);
                self.add_sigma_term(ya);
                for i in 0..d {
                    self.sigma_sum[i] += self.g_state[i];
                }
            }
            let Some(g) = grad.as_deref_mut() else { continue };
            // drift evaluated at (1−θ) y_lo + θ y_hi
            mtvec(d, &self.jac, &self.p_sum, &mut self.tmp);
            for i in 0..d {
                g[lo * d + i] += delta * (self.sigma_sum[i] - (1.0 - theta) * self.tmp[i]);
                g[hi * d + i] -= delta * theta * self.tmp[i];
            }
        }
        total
    }
}

/// `out = M v` for row-major `M`.
#[inline]
pub(crate) fn matvec(d: usize, m: &[f64], v: &[f64], out: &mut [f64]) {
    if d == 1 {
        out[0] = m[0] * v[0];
        return;
    }
    for i in 0..d {
        out[i] = dot(&m[i * d..(i + 1) * d], v);
    }
}

/// `out = Mᵀ v` for row-major `M`.
#[inline]
fn mtvec(d: usize, m: &[f64], v: &[f64], out: &mut [f64]) {
    if d == 1 {
        out[0] = m[0] * v[0];
        return;
    }
    out.fill(0.0);
    for i in 0..d {
        for j in 0..d {
            out[j] += m[i * d + j] * v[i];
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
