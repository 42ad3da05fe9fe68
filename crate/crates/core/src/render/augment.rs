//! Training-time rigid augmentation: one z-axis yaw plus one translation
//! applied to the cloud and every action label of a transition.

use super::{in_workspace, PointCloud, RenderError};
use crate::geom::{add3, Quat, Vec3};
use crate::sim::Action;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Translation perturbation range, +-0.125 m per axis.
pub const AUGMENT_MAX_SHIFT: f64 = 0.125;
/// Yaw perturbation range, +-45 degrees.
pub const AUGMENT_MAX_YAW: f64 = std::f64::consts::FRAC_PI_4;

/// A sampled rigid perturbation: yaw about the workspace vertical axis
/// (which passes through the xy center, the origin), then a shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidYawShift {
    pub yaw: f64,
    pub shift: Vec3,
}

impl RigidYawShift {
    pub const IDENTITY: RigidYawShift = RigidYawShift {
        yaw: 0.0,
        shift: [0.0, 0.0, 0.0],
    };

    pub fn apply_to_point(&self, p: Vec3) -> Vec3 {
        add3(Quat::from_yaw(self.yaw).rotate(p), self.shift)
    }

    pub fn apply_to_cloud(&self, cloud: &PointCloud) -> PointCloud {
        PointCloud {
            points: cloud.points.iter().map(|p| self.apply_to_point(*p)).collect(),
            colors: cloud.colors.clone(),
        }
    }

    pub fn apply_to_action(&self, action: &Action) -> Action {
        Action {
            translation: self.apply_to_point(action.translation),
            rotation: Quat::from_yaw(self.yaw)
                .mul(action.rotation)
                .normalized()
                .canonicalized(),
            gripper_open: action.gripper_open,
            collision_allowed: action.collision_allowed,
        }
    }
}

/// Draw a perturbation whose transformed action translations all stay in
/// the workspace, resampling a bounded number of times. Draw order per
/// try: shift x, y, z, then yaw.
pub fn sample_augment(actions: &[Action], seed: u64) -> Result<RigidYawShift, RenderError> {
    const MAX_TRIES: usize = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_TRIES {
        let shift = [
            rng.random_range(-AUGMENT_MAX_SHIFT..AUGMENT_MAX_SHIFT),
            rng.random_range(-AUGMENT_MAX_SHIFT..AUGMENT_MAX_SHIFT),
            rng.random_range(-AUGMENT_MAX_SHIFT..AUGMENT_MAX_SHIFT),
        ];
        let yaw = rng.random_range(-AUGMENT_MAX_YAW..AUGMENT_MAX_YAW);
        let xf = RigidYawShift { yaw, shift };
        if actions
            .iter()
            .all(|a| in_workspace(xf.apply_to_point(a.translation)))
        {
            return Ok(xf);
        }
    }
    Err(RenderError::AugmentExhausted { tries: MAX_TRIES })
}

/// Perturb a cloud and its action labels with one shared rigid transform.
pub fn augment(
    cloud: &PointCloud,
    actions: &[Action],
    seed: u64,
) -> Result<(PointCloud, Vec<Action>), RenderError> {
    let xf = sample_augment(actions, seed)?;
    Ok((
        xf.apply_to_cloud(cloud),
        actions.iter().map(|a| xf.apply_to_action(a)).collect(),
    ))
}
