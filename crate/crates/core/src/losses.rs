//! Detection losses: focal confidence loss, signed-IoU box loss, corner
//! Huber loss, self-supervised 3D confidence, and the disentangling
//! transformation that splits a single metric-space loss into per-group
//! terms without changing its nature.

use crate::geometry::{
    inverse_lift, lift_params, siou, Box2D, Box3D, BoxParams2D, GeometryError, Theta10,
};
use crate::scalar::Real;

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before logs.
pub const PROB_EPS: f64 = 1e-7;

/// Focal loss hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalParams {
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for FocalParams {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            gamma: 2.0,
        }
    }
}

/// Huber knee parameter (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuberParams {
    pub delta: f64,
}

impl Default for HuberParams {
    fn default() -> Self {
        Self { delta: 3.0 }
    }
}

/// Temperature of the loss-to-confidence remapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceTemp {
    pub t: f64,
}

impl Default for ConfidenceTemp {
    fn default() -> Self {
        Self { t: 1.0 }
    }
}

/// Per-head loss weights applied when combining 2D and 3D terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub head_2d: f64,
    pub head_3d: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            head_2d: 1.0,
            head_3d: 0.5,
        }
    }
}

impl LossWeights {
    pub fn combine(&self, loss_2d: f64, loss_3d: f64) -> f64 {
        self.head_2d * loss_2d + self.head_3d * loss_3d
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Focal loss for a binary confidence target:
/// `-alpha*y*(1-p)^gamma*log(p) - (1-alpha)*(1-y)*p^gamma*log(1-p)`.
pub fn focal_loss(p: f64, y: bool, params: &FocalParams) -> f64 {
    let p = clamp_prob(p);
    if y {
        -params.alpha * (1.0 - p).powf(params.gamma) * p.ln()
    } else {
        -(1.0 - params.alpha) * p.powf(params.gamma) * (1.0 - p).ln()
    }
}

/// 2D box loss `1 - siou(pred, gt)`, in `[0, 2]`; zero iff the boxes are
/// identical.
pub fn loss_2d_bb(pred: &Box2D, gt: &Box2D) -> Result<f64, GeometryError> {
    Ok(1.0 - siou(pred, gt)?)
}

/// Huber penalty: quadratic inside the knee, linear outside, C1 at the
/// junction.
pub fn huber<T: Real>(x: T, delta: f64) -> T {
    let a = x.abs();
    if a.value() <= delta {
        x * x * T::from_f64(0.5)
    } else {
        a * T::from_f64(delta) - T::from_f64(0.5 * delta * delta)
    }
}

/// Corner loss kernel: `(1/8) * sum_ij huber(pred_ij - gt_ij)` over the 24
/// entries of the corner matrices.
pub fn corner_loss<T: Real>(pred: &[[T; 8]; 3], gt: &[[f64; 8]; 3], params: &HuberParams) -> T {
    let mut acc = T::from_f64(0.0);
    for row in 0..3 {
        for col in 0..8 {
            acc = acc + huber(pred[row][col] - T::from_f64(gt[row][col]), params.delta);
        }
    }
    acc * T::from_f64(1.0 / 8.0)
}

/// 3D box loss between corner matrices in matching canonical order.
pub fn loss_3d_bb(pred: &Box3D, gt: &Box3D, params: &HuberParams) -> f64 {
    corner_loss(pred.corners(), gt.corners(), params)
}

/// Remap a nonnegative 3D box loss into a self-supervision target in
/// `(0, 1]`: `exp(-l3d / T)`.
pub fn confidence_target(l3d: f64, temp: &ConfidenceTemp) -> f64 {
    (-l3d / temp.t).exp()
}

/// Binary cross entropy against a (possibly soft) target probability.
pub fn bce(p: f64, target: f64) -> f64 {
    let p = clamp_prob(p);
    -target * p.ln() - (1.0 - target) * (1.0 - p).ln()
}

/// Unconditioned 3D confidence by the law of total probability:
/// `p3d = p3d_given_2d * p2d`.
pub fn fuse_confidence(p2d: f64, p3d_given_2d: f64) -> f64 {
    p3d_given_2d * p2d
}

/// A named group of parameter indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGroup {
    pub name: String,
    pub indices: Vec<usize>,
}

/// An ordered partition of the regressed parameter indices into named
/// groups.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupDecomposition {
    groups: Vec<ParamGroup>,
    n_params: usize,
}

impl GroupDecomposition {
    /// Build a decomposition, verifying the groups partition
    /// `0..n_params` (disjoint and exhaustive).
    pub fn new(groups: Vec<ParamGroup>, n_params: usize) -> Result<Self, LossError> {
        let mut seen = vec![false; n_params];
        for group in &groups {
            for &idx in &group.indices {
                if idx >= n_params || seen[idx] {
                    return Err(LossError::InvalidDecomposition);
                }
                seen[idx] = true;
            }
        }
        if seen.iter().all(|&s| s) {
            Ok(Self { groups, n_params })
        } else {
            Err(LossError::InvalidDecomposition)
        }
    }

    /// The 4-group decomposition of the 10-parameter 3D box encoding:
    /// depth, projected center, rotation, dimensions.
    pub fn for_3d() -> Self {
        Self::new(
            vec![
                ParamGroup {
                    name: "depth".into(),
                    indices: vec![0],
                },
                ParamGroup {
                    name: "proj_center".into(),
                    indices: vec![1, 2],
                },
                ParamGroup {
                    name: "rotation".into(),
                    indices: vec![6, 7, 8, 9],
                },
                ParamGroup {
                    name: "dims".into(),
                    indices: vec![3, 4, 5],
                },
            ],
            10,
        )
        .expect("static decomposition is a partition")
    }

    /// The 2-group decomposition of the 4-parameter 2D box encoding:
    /// center, size.
    pub fn for_2d() -> Self {
        Self::new(
            vec![
                ParamGroup {
                    name: "center".into(),
                    indices: vec![0, 1],
                },
                ParamGroup {
                    name: "size".into(),
                    indices: vec![2, 3],
                },
            ],
            4,
        )
        .expect("static decomposition is a partition")
    }

    pub fn groups(&self) -> &[ParamGroup] {
        &self.groups
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }
}

/// Errors from loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum LossError {
    #[error("group decomposition does not partition the parameter indices")]
    InvalidDecomposition,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Disentangled loss value: the total and the per-group terms that sum
/// to it.
#[derive(Debug, Clone, PartialEq)]
pub struct DisentangledLoss {
    pub total: f64,
    pub terms: Vec<(String, f64)>,
}

impl DisentangledLoss {
    pub fn term_values(&self) -> Vec<f64> {
        self.terms.iter().map(|(_, v)| *v).collect()
    }
}

/// Disentangling transformation: replicate a base loss once per parameter
/// group, each copy evaluated on a hybrid parametrization that takes that
/// group from the prediction and everything else from the ground truth.
///
/// `loss_of_params` must evaluate the base loss of the decoded
/// parametrization against the fixed ground truth, i.e.
/// `params -> L(psi(params), y_hat)`.
pub fn disentangle<E>(
    loss_of_params: impl Fn(&[f64]) -> Result<f64, E>,
    groups: &GroupDecomposition,
    theta: &[f64],
    theta_hat: &[f64],
) -> Result<DisentangledLoss, E> {
    debug_assert_eq!(theta.len(), groups.n_params());
    debug_assert_eq!(theta_hat.len(), groups.n_params());
    let mut terms = Vec::with_capacity(groups.groups().len());
    let mut total = 0.0;
    for group in groups.groups() {
        let mut hybrid = theta_hat.to_vec();
        for &idx in &group.indices {
            hybrid[idx] = theta[idx];
        }
        let term = loss_of_params(&hybrid)?;
        total += term;
        terms.push((group.name.clone(), term));
    }
    Ok(DisentangledLoss { total, terms })
}

/// Entangled 3D loss kernel `corner_loss(lift(params), gt)`, generic over
/// the scalar type for differentiation.
pub fn entangled_loss_3d_params<T: Real>(
    params: &[T; 10],
    theta: &Theta10,
    gt: &Box3D,
    huber_params: &HuberParams,
) -> Result<T, GeometryError> {
    let corners = lift_params(params, &theta.context)?;
    Ok(corner_loss(&corners, gt.corners(), huber_params))
}

/// Disentangled 3D loss kernel over raw parameters; the ground-truth
/// parametrization `gt_params` must come from `inverse_lift` under the
/// prediction's context.
pub fn disentangled_loss_3d_params<T: Real>(
    params: &[T; 10],
    gt_params: &[f64; 10],
    theta: &Theta10,
    gt: &Box3D,
    huber_params: &HuberParams,
) -> Result<T, GeometryError> {
    let groups = GroupDecomposition::for_3d();
    let mut total = T::from_f64(0.0);
    for group in groups.groups() {
        let mut hybrid: [T; 10] = gt_params.map(T::from_f64);
        for &idx in &group.indices {
            hybrid[idx] = params[idx];
        }
        let corners = lift_params(&hybrid, &theta.context)?;
        total = total + corner_loss(&corners, gt.corners(), huber_params);
    }
    Ok(total)
}

/// Disentangled 3D box loss. The ground-truth parametrization is recovered
/// through the inverse lifting under the prediction's own context, so a
/// single decoder serves every term.
pub fn disentangled_loss_3d(
    theta: &Theta10,
    gt: &Box3D,
    huber_params: &HuberParams,
) -> Result<DisentangledLoss, LossError> {
    let ctx = theta.context;
    let gt_theta = inverse_lift(gt, ctx.anchor, ctx.depth, ctx.ref_size, ctx.intrinsics)?;
    let gt_corners = *gt.corners();
    let loss = |p: &[f64]| -> Result<f64, GeometryError> {
        let params: [f64; 10] = p.try_into().expect("10 parameters");
        let pred = lift_params(&params, &ctx)?;
        Ok(corner_loss(&pred, &gt_corners, huber_params))
    };
    Ok(disentangle(
        loss,
        &GroupDecomposition::for_3d(),
        &theta.params(),
        &gt_theta.params(),
    )?)
}

/// Disentangled 2D box loss over the anchor-relative encoding, with the
/// signed-IoU base loss.
pub fn disentangled_loss_2d(
    params: &BoxParams2D,
    gt: &Box2D,
) -> Result<DisentangledLoss, LossError> {
    let anchor = params.anchor;
    let gt_params = BoxParams2D::encode(gt, anchor)?;
    let loss = |p: &[f64]| -> Result<f64, GeometryError> {
        let hybrid = BoxParams2D::from_params(p.try_into().expect("4 parameters"), anchor);
        loss_2d_bb(&hybrid.decode(), gt)
    };
    Ok(disentangle(
        loss,
        &GroupDecomposition::for_2d(),
        &params.params(),
        &gt_params.params(),
    )?)
}

/// Entangled 3D loss of a parametrized prediction against a ground-truth
/// box: `loss_3d_bb(lift(theta), gt)`.
pub fn entangled_loss_3d(
    theta: &Theta10,
    gt: &Box3D,
    huber_params: &HuberParams,
) -> Result<f64, GeometryError> {
    entangled_loss_3d_params(&theta.params(), theta, gt, huber_params)
}
