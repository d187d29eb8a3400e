//! Exact gradients of the 3D box losses with respect to the 10 regressed
//! parameters, by forward-mode differentiation with a fixed-width
//! derivative vector, plus a central-difference verifier.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::geometry::{inverse_lift, Box3D, GeometryError, Theta10};
use crate::losses::{disentangled_loss_3d_params, entangled_loss_3d_params, HuberParams};
use crate::scalar::Real;

/// Dual number carrying a value and `N` partial derivatives. Arithmetic
/// follows the sum/product/chain rules exactly and is deterministic for a
/// fixed evaluation order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<const N: usize> {
    pub re: f64,
    pub eps: [f64; N],
}

/// Dual number over the 10-parameter box encoding.
pub type Dual10 = Dual<10>;

impl<const N: usize> Dual<N> {
    pub fn constant(value: f64) -> Self {
        Self {
            re: value,
            eps: [0.0; N],
        }
    }

    /// A variable seeded with unit derivative in coordinate `index`.
    pub fn variable(value: f64, index: usize) -> Self {
        let mut eps = [0.0; N];
        eps[index] = 1.0;
        Self { re: value, eps }
    }

    fn map_eps(&self, factor: f64) -> [f64; N] {
        self.eps.map(|e| e * factor)
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut eps = self.eps;
        for (e, r) in eps.iter_mut().zip(rhs.eps) {
            *e += r;
        }
        Self {
            re: self.re + rhs.re,
            eps,
        }
    }
}

impl<const N: usize> Sub for Dual<N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut eps = self.eps;
        for (e, r) in eps.iter_mut().zip(rhs.eps) {
            *e -= r;
        }
        Self {
            re: self.re - rhs.re,
            eps,
        }
    }
}

impl<const N: usize> Mul for Dual<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut eps = self.eps;
        for (e, r) in eps.iter_mut().zip(rhs.eps) {
            *e = *e * rhs.re + self.re * r;
        }
        Self {
            re: self.re * rhs.re,
            eps,
        }
    }
}

impl<const N: usize> Div for Dual<N> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let denom = rhs.re * rhs.re;
        let mut eps = self.eps;
        for (e, r) in eps.iter_mut().zip(rhs.eps) {
            *e = (*e * rhs.re - self.re * r) / denom;
        }
        Self {
            re: self.re / rhs.re,
            eps,
        }
    }
}

impl<const N: usize> Neg for Dual<N> {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            re: -self.re,
            eps: self.map_eps(-1.0),
        }
    }
}

impl<const N: usize> Real for Dual<N> {
    fn from_f64(x: f64) -> Self {
        Self::constant(x)
    }

    fn value(self) -> f64 {
        self.re
    }

    fn exp(self) -> Self {
        let value = self.re.exp();
        Self {
            re: value,
            eps: self.map_eps(value),
        }
    }

    fn ln(self) -> Self {
        Self {
            re: self.re.ln(),
            eps: self.map_eps(1.0 / self.re),
        }
    }

    fn sqrt(self) -> Self {
        let value = self.re.sqrt();
        Self {
            re: value,
            eps: self.map_eps(0.5 / value),
        }
    }

    fn abs(self) -> Self {
        // Subgradient 0 at the origin.
        let sign = if self.re > 0.0 {
            1.0
        } else if self.re < 0.0 {
            -1.0
        } else {
            0.0
        };
        Self {
            re: self.re.abs(),
            eps: self.map_eps(sign),
        }
    }

    fn sin(self) -> Self {
        Self {
            re: self.re.sin(),
            eps: self.map_eps(self.re.cos()),
        }
    }

    fn cos(self) -> Self {
        Self {
            re: self.re.cos(),
            eps: self.map_eps(-self.re.sin()),
        }
    }

    fn atan2(self, x: Self) -> Self {
        // d atan2(y, x) = (x dy - y dx) / (x^2 + y^2); undefined at the
        // origin, where the derivative becomes NaN and is caught upstream.
        let denom = x.re * x.re + self.re * self.re;
        let mut eps = self.eps;
        for (e, dx) in eps.iter_mut().zip(x.eps) {
            *e = (x.re * *e - self.re * dx) / denom;
        }
        Self {
            re: self.re.atan2(x.re),
            eps,
        }
    }
}

/// Which 3D loss to differentiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Entangled,
    Disentangled,
}

/// Differentiation failures.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum GradError {
    /// The loss (or one of its disentangled hybrids) is undefined at the
    /// evaluation point.
    #[error("loss undefined at evaluation point: {0}")]
    UndefinedAtPoint(GeometryError),
}

impl From<GeometryError> for GradError {
    fn from(e: GeometryError) -> Self {
        GradError::UndefinedAtPoint(e)
    }
}

/// Analytic gradient and central-difference verification data.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub analytic: [f64; 10],
    pub numeric: [f64; 10],
    pub max_rel_err: f64,
    pub step: f64,
}

fn seed10(at: &[f64; 10]) -> [Dual10; 10] {
    let mut seeded = [Dual10::constant(0.0); 10];
    for (i, &v) in at.iter().enumerate() {
        seeded[i] = Dual10::variable(v, i);
    }
    seeded
}

/// Gradient of a scalar function of 10 parameters by dual-number seeding.
pub fn gradient10<E>(
    f: impl Fn(&[Dual10; 10]) -> Result<Dual10, E>,
    at: &[f64; 10],
) -> Result<[f64; 10], E> {
    f(&seed10(at)).map(|out| out.eps)
}

/// Central finite differences `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn central_difference10<E>(
    f: impl Fn(&[f64; 10]) -> Result<f64, E>,
    at: &[f64; 10],
    step: f64,
) -> Result<[f64; 10], E> {
    let mut numeric = [0.0; 10];
    for i in 0..10 {
        let mut plus = *at;
        let mut minus = *at;
        plus[i] += step;
        minus[i] -= step;
        numeric[i] = (f(&plus)? - f(&minus)?) / (2.0 * step);
    }
    Ok(numeric)
}

/// Relative error with a unit floor:
/// `max_i |a_i - n_i| / max(1, |a_i|, |n_i|)`.
pub fn max_relative_error(analytic: &[f64; 10], numeric: &[f64; 10]) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..10 {
        let denom = 1.0_f64.max(analytic[i].abs()).max(numeric[i].abs());
        worst = worst.max((analytic[i] - numeric[i]).abs() / denom);
    }
    worst
}

fn loss_closure_value(
    kind: LossKind,
    theta: &Theta10,
    gt: &Box3D,
    gt_params: &[f64; 10],
    huber: &HuberParams,
    at: &[f64; 10],
) -> Result<f64, GeometryError> {
    match kind {
        LossKind::Entangled => entangled_loss_3d_params(at, theta, gt, huber),
        LossKind::Disentangled => disentangled_loss_3d_params(at, gt_params, theta, gt, huber),
    }
}

fn gt_params_for(theta: &Theta10, gt: &Box3D) -> Result<[f64; 10], GradError> {
    let ctx = theta.context;
    let gt_theta = inverse_lift(gt, ctx.anchor, ctx.depth, ctx.ref_size, ctx.intrinsics)?;
    Ok(gt_theta.params())
}

/// Loss value at `theta` (shared by both differentiation routes).
pub fn loss_value(
    kind: LossKind,
    theta: &Theta10,
    gt: &Box3D,
    huber: &HuberParams,
) -> Result<f64, GradError> {
    let gt_params = gt_params_for(theta, gt)?;
    loss_closure_value(kind, theta, gt, &gt_params, huber, &theta.params()).map_err(Into::into)
}

/// Exact gradient of the selected 3D loss with respect to the 10 regressed
/// parameters.
pub fn grad_loss(
    kind: LossKind,
    theta: &Theta10,
    gt: &Box3D,
    huber: &HuberParams,
) -> Result<[f64; 10], GradError> {
    let gt_params = gt_params_for(theta, gt)?;
    let grad = gradient10(
        |p| match kind {
            LossKind::Entangled => entangled_loss_3d_params(p, theta, gt, huber),
            LossKind::Disentangled => disentangled_loss_3d_params(p, &gt_params, theta, gt, huber),
        },
        &theta.params(),
    )?;
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(GradError::UndefinedAtPoint(
            GeometryError::NonPositiveDepth {
                z: theta.decode().z,
            },
        ));
    }
    Ok(grad)
}

/// Verify the analytic gradient against central finite differences.
pub fn check_gradient(
    kind: LossKind,
    theta: &Theta10,
    gt: &Box3D,
    huber: &HuberParams,
    step: f64,
) -> Result<GradientReport, GradError> {
    let gt_params = gt_params_for(theta, gt)?;
    let analytic = grad_loss(kind, theta, gt, huber)?;
    let numeric = central_difference10(
        |p| loss_closure_value(kind, theta, gt, &gt_params, huber, p),
        &theta.params(),
        step,
    )?;
    Ok(GradientReport {
        analytic,
        numeric,
        max_rel_err: max_relative_error(&analytic, &numeric),
        step,
    })
}
