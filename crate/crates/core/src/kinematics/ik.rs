//! Damped least-squares inverse kinematics.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::chain::KinematicChain;
use super::fk::{forward_kinematics, jacobian};
use super::KinError;
use crate::transform::{RigidPose, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IkParams {
    pub w_pos: f64,
    pub w_rot: f64,
    pub max_iterations: usize,
    pub pos_tol: f64,
    pub rot_tol: f64,
    pub initial_damping: f64,
}

impl Default for IkParams {
    fn default() -> Self {
        IkParams { w_pos: 1.0, w_rot: 1.0, max_iterations: 200, pos_tol: 1e-4, rot_tol: 1e-3, initial_damping: 1e-3 }
    }
}

impl IkParams {
    pub fn position_only() -> Self {
        IkParams { w_rot: 0.0, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IkSolution {
    pub q: Vec<f64>,
    pub pos_error: f64,
    pub rot_error: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Weighted squared error after each accepted step, starting at `init`.
    pub cost_history: Vec<f64>,
}

/// Position error and rotation-vector error `log(R_target · R_eeᵀ)`, both in
/// the base frame.
pub fn pose_error(target: &RigidPose, ee: &RigidPose) -> (Vec3, Vec3) {
    let dp = target.translation - ee.translation;
    let dr = (target.rotation * ee.rotation.inverse()).scaled_axis();
    (dp, dr)
}

struct Eval {
    dp: Vec3,
    dr: Vec3,
    cost: f64,
}

fn evaluate(chain: &KinematicChain, q: &[f64], target: &RigidPose, p: &IkParams) -> Result<Eval, KinError> {
    let ee = forward_kinematics(chain, q)?.ee;
    let (dp, dr) = pose_error(target, &ee);
    let cost = p.w_pos * dp.norm_squared() + p.w_rot * dr.norm_squared();
    Ok(Eval { dp, dr, cost })
}

fn converged(e: &Eval, p: &IkParams) -> bool {
    let pos_ok = p.w_pos == 0.0 || e.dp.norm() < p.pos_tol;
    let rot_ok = p.w_rot == 0.0 || e.dr.norm() < p.rot_tol;
    pos_ok && rot_ok
}

/// Minimizes `w_pos‖Δp‖² + w_rot‖Δθ‖²` from `init`, clamping to joint
/// limits every step. Returns a best-effort solution with
/// `converged = false` when the target is not reached within the cap.
pub fn ik_solve(
    chain: &KinematicChain,
    target: &RigidPose,
    init: &[f64],
    params: &IkParams,
) -> Result<IkSolution, KinError> {
    chain.check_dof(init)?;
    if !target.translation.iter().all(|v| v.is_finite()) {
        return Err(KinError::NonFiniteTarget);
    }
    let (sp, sr) = (params.w_pos.sqrt(), params.w_rot.sqrt());
    let n = chain.dof();
    let mut q = init.to_vec();
    chain.clamp(&mut q);
    let mut cur = evaluate(chain, &q, target, params)?;
    let mut history = vec![cur.cost];
    let mut lambda = params.initial_damping;
    let mut iterations = 0;

    while !converged(&cur, params) && iterations < params.max_iterations {
        iterations += 1;
        let (mut jac, _) = jacobian(chain, &q)?;
        jac.rows_mut(0, 3).scale_mut(sp);
        jac.rows_mut(3, 3).scale_mut(sr);
        let mut e = DVector::zeros(6);
        e.fixed_rows_mut::<3>(0).copy_from(&(cur.dp * sp));
        e.fixed_rows_mut::<3>(3).copy_from(&(cur.dr * sr));
        let jt = jac.transpose();
        let lhs = &jt * &jac + DMatrix::identity(n, n) * lambda;
        let Some(dq) = lhs.cholesky().map(|c| c.solve(&(&jt * e))) else {
            lambda *= 10.0;
            continue;
        };
        let mut cand: Vec<f64> = q.iter().zip(dq.iter()).map(|(a, d)| a + d).collect();
        chain.clamp(&mut cand);
        let next = evaluate(chain, &cand, target, params)?;
        if next.cost < cur.cost {
            q = cand;
            cur = next;
            history.push(cur.cost);
            lambda /= 3.0;
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    Ok(IkSolution {
        pos_error: cur.dp.norm(),
        rot_error: cur.dr.norm(),
        converged: converged(&cur, params),
        q,
        iterations,
        cost_history: history,
    })
}

/// Runs `ik_solve` from `init`, then from up to `restarts` seeded uniform
/// in-limit configurations, returning the first converged solution or the
/// one with the lowest weighted error.
pub fn ik_solve_with_restarts(
    chain: &KinematicChain,
    target: &RigidPose,
    init: &[f64],
    params: &IkParams,
    restarts: usize,
    seed: u64,
) -> Result<IkSolution, KinError> {
    let score = |s: &IkSolution| params.w_pos * s.pos_error.powi(2) + params.w_rot * s.rot_error.powi(2);
    let mut best = ik_solve(chain, target, init, params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..restarts {
        if best.converged {
            break;
        }
        let start: Vec<f64> = chain.joints.iter().map(|j| rng.random_range(j.lower..=j.upper)).collect();
        let sol = ik_solve(chain, target, &start, params)?;
        if sol.converged || score(&sol) < score(&best) {
            best = sol;
        }
    }
    Ok(best)
}
