//! Shallow sigmoid networks `g(x) = Σ β_i φ(w_i·x + b_i) + b_0` with
//! box-bounded parameters, optionally saturated at `1 − t`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Logistic sigmoid, evaluated without overflow for large |z|.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Box constraints: `|w_ij|, |b_i| ≤ a1`, `|β_i| ≤ a2`, `|b_0| ≤ a3`, and the
/// output cap `g ≤ 1 − t` when `trunc` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "t")]
    pub trunc: Option<f64>,
}

impl ParamBounds {
    pub fn new(a1: f64, a2: f64, a3: f64, trunc: Option<f64>) -> Result<Self> {
        for (name, a) in [("a1", a1), ("a2", a2), ("a3", a3)] {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::InvalidSpec(format!("{name} must be finite and >= 0, got {a}")));
            }
        }
        if let Some(t) = trunc {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::InvalidSpec(format!("truncation level must lie in (0, 1), got {t}")));
            }
        }
        Ok(Self { a1, a2, a3, trunc })
    }

    pub fn ones() -> Self {
        Self { a1: 1.0, a2: 1.0, a3: 1.0, trunc: None }
    }

    /// `k·a2 + a3`, the largest |g| any in-box network can output.
    pub fn output_bound(&self, k: usize) -> f64 {
        k as f64 * self.a2 + self.a3
    }

    pub fn cap(&self) -> Option<f64> {
        self.trunc.map(|t| 1.0 - t)
    }
}

/// A network class, expanded to concrete bounds once `k` is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkClassSpec {
    Generic(ParamBounds),
    /// `(√k ln k, 2c/k, c)`.
    Star {
        c: f64,
    },
    /// `(√k ln k, 2m/k, m)` with output cap `1 − t`.
    TruncatedStar {
        m: f64,
        t: f64,
    },
    /// `(1, 1, 1)`.
    Ones,
}

impl NetworkClassSpec {
    /// `Star(0.5 ln k)`, the growing-scale class used by the rate results.
    pub fn half_log_star(k: usize) -> Self {
        NetworkClassSpec::Star { c: 0.5 * (k as f64).ln() }
    }

    /// `TruncatedStar(0.5 ln k, 1/ln k)`.
    pub fn half_log_truncated_star(k: usize) -> Self {
        let l = (k as f64).ln();
        NetworkClassSpec::TruncatedStar { m: 0.5 * l, t: 1.0 / l }
    }

    pub fn is_truncated(&self) -> bool {
        match self {
            NetworkClassSpec::Generic(b) => b.trunc.is_some(),
            NetworkClassSpec::TruncatedStar { .. } => true,
            NetworkClassSpec::Star { .. } | NetworkClassSpec::Ones => false,
        }
    }

    pub fn expand(&self, k: usize) -> Result<ParamBounds> {
        match *self {
            NetworkClassSpec::Generic(b) => ParamBounds::new(b.a1, b.a2, b.a3, b.trunc),
            NetworkClassSpec::Ones => Ok(ParamBounds::ones()),
            NetworkClassSpec::Star { c } => {
                let (a1, kf) = star_width(k)?;
                ParamBounds::new(a1, 2.0 * c / kf, c, None)
            }
            NetworkClassSpec::TruncatedStar { m, t } => {
                let (a1, kf) = star_width(k)?;
                ParamBounds::new(a1, 2.0 * m / kf, m, Some(t))
            }
        }
    }
}

fn star_width(k: usize) -> Result<(f64, f64)> {
    if k < 2 {
        return Err(Error::InvalidSpec(format!("star classes need k >= 2 (ln k > 0), got k = {k}")));
    }
    let kf = k as f64;
    Ok((kf.sqrt() * kf.ln(), kf))
}

/// Free-function form of [`NetworkClassSpec::expand`].
pub fn expand_bounds(spec: &NetworkClassSpec, k: usize) -> Result<ParamBounds> {
    spec.expand(k)
}

/// Parameters of a k-neuron network on `R^d`, stored flat as
/// `[W (k×d, row-major) | b (k) | β (k) | b_0]`.
///
/// Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    k: usize,
    d: usize,
    theta: Vec<f64>,
}

impl NetParams {
    pub fn zeros(k: usize, d: usize) -> Self {
        Self { k, d, theta: vec![0.0; k * d + 2 * k + 1] }
    }

    pub fn from_parts(k: usize, d: usize, w: &[f64], b: &[f64], beta: &[f64], b0: f64) -> Result<Self> {
        if w.len() != k * d || b.len() != k || beta.len() != k {
            return Err(Error::InvalidSpec(format!(
                "parameter shapes W={} b={} beta={} do not match k={k}, d={d}",
                w.len(),
                b.len(),
                beta.len()
            )));
        }
        let mut theta = Vec::with_capacity(k * d + 2 * k + 1);
        theta.extend_from_slice(w);
        theta.extend_from_slice(b);
        theta.extend_from_slice(beta);
        theta.push(b0);
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("network parameters must be finite".into()));
        }
        Ok(Self { k, d, theta })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn w(&self) -> &[f64] {
        &self.theta[..self.k * self.d]
    }

    /// Row `i` of W.
    pub fn w_row(&self, i: usize) -> &[f64] {
        &self.theta[i * self.d..(i + 1) * self.d]
    }

    pub fn b(&self) -> &[f64] {
        let s = self.k * self.d;
        &self.theta[s..s + self.k]
    }

    pub fn beta(&self) -> &[f64] {
        let s = self.k * self.d + self.k;
        &self.theta[s..s + self.k]
    }

    pub fn beta_mut(&mut self) -> &mut [f64] {
        let s = self.k * self.d + self.k;
        &mut self.theta[s..s + self.k]
    }

    pub fn b0(&self) -> f64 {
        self.theta[self.theta.len() - 1]
    }

    pub fn set_b0(&mut self, v: f64) {
        let last = self.theta.len() - 1;
        self.theta[last] = v;
    }

    /// Box bound for the flat entry `idx`.
    fn bound_of(&self, idx: usize, bounds: &ParamBounds) -> f64 {
        let hidden = self.k * self.d + self.k;
        if idx < hidden {
            bounds.a1
        } else if idx < hidden + self.k {
            bounds.a2
        } else {
            bounds.a3
        }
    }

    /// Network output before the `1 − t` cap.
    pub fn raw_output(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.d);
        let (b, beta) = (self.b(), self.beta());
        let mut out = self.b0();
        for i in 0..self.k {
            out += beta[i] * sigmoid(dot(self.w_row(i), x) + b[i]);
        }
        out
    }

    /// `g(x)`, capped at `1 − t` when the bounds carry a truncation level.
    pub fn forward(&self, bounds: &ParamBounds, x: &[f64]) -> f64 {
        let raw = self.raw_output(x);
        match bounds.cap() {
            Some(cap) => raw.min(cap),
            None => raw,
        }
    }

    /// `g(x)`, with `s · ∂g/∂θ` added into `grad` where `s = scale_of(g(x))`.
    ///
    /// In the saturated region of a truncated network (raw output above
    /// `1 − t`) the gradient is zero and `scale_of` is not called.
    pub fn forward_accumulate<E>(
        &self,
        bounds: &ParamBounds,
        x: &[f64],
        grad: &mut NetParams,
        scale_of: impl FnOnce(f64) -> std::result::Result<f64, E>,
    ) -> std::result::Result<f64, E> {
        debug_assert_eq!(grad.theta.len(), self.theta.len());
        let (k, d) = (self.k, self.d);
        let b_off = k * d;
        let beta_off = b_off + k;

        let mut stack = [0.0f64; 64];
        let mut heap;
        let acts: &mut [f64] = if k <= stack.len() {
            &mut stack[..k]
        } else {
            heap = vec![0.0; k];
            &mut heap
        };
        let mut raw = self.b0();
        for (i, a) in acts.iter_mut().enumerate() {
            let s = sigmoid(dot(self.w_row(i), x) + self.theta[b_off + i]);
            *a = s;
            raw += self.theta[beta_off + i] * s;
        }
        if let Some(cap) = bounds.cap() {
            if raw > cap {
                return Ok(cap);
            }
        }
        let scale = scale_of(raw)?;
        if scale != 0.0 {
            for (i, &s) in acts.iter().enumerate() {
                let beta = self.theta[beta_off + i];
                grad.theta[beta_off + i] += scale * s;
                let dz = scale * beta * s * (1.0 - s);
                grad.theta[b_off + i] += dz;
                for (gj, xj) in grad.theta[i * d..(i + 1) * d].iter_mut().zip(x) {
                    *gj += dz * xj;
                }
            }
            let last = grad.theta.len() - 1;
            grad.theta[last] += scale;
        }
        Ok(raw)
    }

    /// `∂g/∂θ` at `x`, shaped like the parameters.
    pub fn grad_params(&self, bounds: &ParamBounds, x: &[f64]) -> NetParams {
        let mut g = NetParams::zeros(self.k, self.d);
        let _ = self.forward_accumulate(bounds, x, &mut g, |_| Ok::<_, std::convert::Infallible>(1.0));
        g
    }

    /// Clamp every entry into its box.
    pub fn project_in_place(&mut self, bounds: &ParamBounds) {
        for idx in 0..self.theta.len() {
            let a = self.bound_of(idx, bounds);
            self.theta[idx] = self.theta[idx].clamp(-a, a);
        }
    }

    pub fn project(&self, bounds: &ParamBounds) -> NetParams {
        let mut p = self.clone();
        p.project_in_place(bounds);
        p
    }

    pub fn in_box(&self, bounds: &ParamBounds) -> bool {
        self.theta.iter().enumerate().all(|(idx, v)| v.abs() <= self.bound_of(idx, bounds))
    }

    /// Entries uniform in `[−min(0.1, a), min(0.1, a)]` for each group's bound `a`.
    pub fn init<R: Rng + ?Sized>(k: usize, d: usize, bounds: &ParamBounds, rng: &mut R) -> NetParams {
        let mut p = NetParams::zeros(k, d);
        for idx in 0..p.theta.len() {
            let r = p.bound_of(idx, bounds).min(0.1);
            let u: f64 = rng.random();
            p.theta[idx] = (2.0 * u - 1.0) * r;
        }
        p
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// JSON checkpoint of a trained network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub k: usize,
    pub d: usize,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(rename = "W")]
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub beta: Vec<f64>,
    pub b0: f64,
}

impl Checkpoint {
    pub fn new(params: &NetParams, bounds: &ParamBounds) -> Self {
        Self {
            k: params.k,
            d: params.d,
            a1: bounds.a1,
            a2: bounds.a2,
            a3: bounds.a3,
            t: bounds.trunc,
            w: params.w().to_vec(),
            b: params.b().to_vec(),
            beta: params.beta().to_vec(),
            b0: params.b0(),
        }
    }

    pub fn into_parts(self) -> Result<(NetParams, ParamBounds)> {
        let bounds = ParamBounds::new(self.a1, self.a2, self.a3, self.t)?;
        let params = NetParams::from_parts(self.k, self.d, &self.w, &self.b, &self.beta, self.b0)?;
        Ok((params, bounds))
    }
}
