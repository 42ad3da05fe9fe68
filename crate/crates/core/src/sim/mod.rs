//! Deterministic toy manipulation environment: templated language tasks
//! over colored tabletop objects, kinematic (teleport) dynamics with a
//! grasp radius, a scripted expert emitting keyframe demonstrations, and
//! geometric success predicates.
//!
//! Three task families, each with three color variants (nine tasks):
//! push a block onto a flat target, pick a block and place it on a raised
//! pad, and press a button. Every scene contains all candidate objects of
//! its family, so the instruction is what disambiguates the goal.

mod expert;
mod task;
mod world;

pub use expert::scripted_expert;
pub use task::{sample_scene, sample_task};
pub use world::{check_success, observe, step};

use crate::geom::{Pose, Quat, Vec3};
use crate::render::{in_workspace, WORKSPACE_MAX, WORKSPACE_MIN};
use thiserror::Error;

pub const BLOCK_SIZE: f64 = 0.04;
pub const TARGET_DISC_RADIUS: f64 = 0.05;
pub const TARGET_THICKNESS: f64 = 0.004;
/// Push success: block center within this xy radius of the target center.
pub const TARGET_RADIUS: f64 = 0.06;
pub const PAD_HALF: f64 = 0.045;
pub const PAD_HEIGHT: f64 = 0.012;
pub const PAD_SUCCESS_RADIUS: f64 = 0.06;
pub const BUTTON_RADIUS: f64 = 0.03;
pub const BUTTON_HEIGHT: f64 = 0.016;
/// A closed gripper carries the nearest block within this distance.
pub const GRASP_RADIUS: f64 = 0.05;
/// A closed gripper this close to a button's top depresses it.
pub const PRESS_RADIUS: f64 = 0.03;
/// Height slack for "resting on" checks.
pub const REST_TOL: f64 = 0.01;
/// Object centers keep this margin from the workspace walls.
pub const PLACEMENT_MARGIN: f64 = 0.08;
pub const MIN_SEPARATION: f64 = 0.13;
pub const GRIPPER_START: Vec3 = [0.0, 0.0, 0.30];
/// Cap on observation cloud size.
pub const POINT_BUDGET: usize = 4096;

pub const COLOR_NAMES: [&str; 3] = ["red", "green", "blue"];
pub const COLOR_RGB: [[f64; 3]; 3] = [
    [0.85, 0.15, 0.10],
    [0.10, 0.75, 0.20],
    [0.15, 0.25, 0.85],
];

pub const FAMILY_COUNT: usize = 3;
pub const VARIANTS_PER_FAMILY: usize = 3;
pub const TASK_COUNT: usize = FAMILY_COUNT * VARIANTS_PER_FAMILY;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scene placement failed after {tries} rejection rounds")]
    PlacementFailed { tries: usize },
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("task {0} is unsolvable in this scene")]
    Unreachable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskFamily {
    PushToTarget = 0,
    PickAndPlace = 1,
    PressButton = 2,
}

impl TaskFamily {
    pub fn all() -> [TaskFamily; FAMILY_COUNT] {
        [
            TaskFamily::PushToTarget,
            TaskFamily::PickAndPlace,
            TaskFamily::PressButton,
        ]
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> TaskFamily {
        TaskFamily::all()[i]
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskFamily::PushToTarget => "push",
            TaskFamily::PickAndPlace => "place",
            TaskFamily::PressButton => "press",
        }
    }
}

/// One task: a family plus a color variant. The manipulated object takes
/// the variant color; push/place destinations take the next color.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TaskSpec {
    pub family: TaskFamily,
    pub variant: usize,
}

impl TaskSpec {
    pub fn all() -> Vec<TaskSpec> {
        let mut out = Vec::with_capacity(TASK_COUNT);
        for family in TaskFamily::all() {
            for variant in 0..VARIANTS_PER_FAMILY {
                out.push(TaskSpec { family, variant });
            }
        }
        out
    }

    /// Dense id in 0..TASK_COUNT, used for contrastive negative masking.
    pub fn task_id(&self) -> usize {
        self.family.index() * VARIANTS_PER_FAMILY + self.variant
    }

    pub fn from_task_id(id: usize) -> TaskSpec {
        TaskSpec {
            family: TaskFamily::from_index(id / VARIANTS_PER_FAMILY),
            variant: id % VARIANTS_PER_FAMILY,
        }
    }

    pub fn object_color(&self) -> usize {
        self.variant
    }

    pub fn destination_color(&self) -> usize {
        (self.variant + 1) % VARIANTS_PER_FAMILY
    }

    /// Render the instruction template for this variant.
    pub fn instruction(&self) -> String {
        let c1 = COLOR_NAMES[self.object_color()];
        let c2 = COLOR_NAMES[self.destination_color()];
        match self.family {
            TaskFamily::PushToTarget => format!("push the {} block to the {} target", c1, c2),
            TaskFamily::PickAndPlace => format!("put the {} block on the {} pad", c1, c2),
            TaskFamily::PressButton => format!("press the {} button", c1),
        }
    }

    /// Short stable name, e.g. "push-red-green".
    pub fn name(&self) -> String {
        let c1 = COLOR_NAMES[self.object_color()];
        match self.family {
            TaskFamily::PressButton => format!("{}-{}", self.family.name(), c1),
            _ => format!(
                "{}-{}-{}",
                self.family.name(),
                c1,
                COLOR_NAMES[self.destination_color()]
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObjKind {
    Block,
    TargetDisc,
    Pad,
    Button { depressed: bool },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneObject {
    pub id: u32,
    pub kind: ObjKind,
    pub color: usize,
    pub pose: Pose,
    /// Characteristic extent: block edge, disc/button radius, pad half-width.
    pub size: f64,
}

/// Full simulator state. `clamped` records whether the last step had to
/// clamp an out-of-bounds command.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneState {
    pub objects: Vec<SceneObject>,
    pub gripper: Pose,
    pub gripper_open: bool,
    pub clamped: bool,
}

impl SceneState {
    pub fn find(&self, kind_matches: impl Fn(&ObjKind) -> bool, color: usize) -> Option<&SceneObject> {
        self.objects
            .iter()
            .find(|o| kind_matches(&o.kind) && o.color == color)
    }

    pub fn block(&self, color: usize) -> Option<&SceneObject> {
        self.find(|k| matches!(k, ObjKind::Block), color)
    }

    /// Check the documented invariants: centers in bounds, unit poses.
    pub fn validate(&self) -> Result<(), SimError> {
        for o in &self.objects {
            if !in_workspace(o.pose.position) {
                return Err(SimError::InvalidAction(format!(
                    "object {} outside workspace at {:?}",
                    o.id, o.pose.position
                )));
            }
            if (o.pose.rotation.norm() - 1.0).abs() >= 1e-9 {
                return Err(SimError::InvalidAction(format!(
                    "object {} rotation not unit",
                    o.id
                )));
            }
        }
        Ok(())
    }
}

/// End-effector command: a target pose plus gripper and collision bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub translation: Vec3,
    pub rotation: Quat,
    pub gripper_open: bool,
    pub collision_allowed: bool,
}

impl Action {
    pub fn validate(&self) -> Result<(), SimError> {
        if !in_workspace(self.translation) {
            return Err(SimError::InvalidAction(format!(
                "translation {:?} outside workspace [{:?}, {:?}]",
                self.translation, WORKSPACE_MIN, WORKSPACE_MAX
            )));
        }
        if (self.rotation.norm() - 1.0).abs() >= 1e-9 {
            return Err(SimError::InvalidAction("rotation not unit".into()));
        }
        if self.rotation.w < 0.0 {
            return Err(SimError::InvalidAction(
                "rotation not hemisphere-canonical (w < 0)".into(),
            ));
        }
        Ok(())
    }
}

/// One demonstration: ordered (state, action) keyframes plus the success
/// flag of replaying them through the dynamics.
#[derive(Debug, Clone)]
pub struct Episode {
    pub task: TaskSpec,
    pub instruction: String,
    pub keyframes: Vec<(SceneState, Action)>,
    pub success: bool,
}

impl Episode {
    /// Keyframe validity: at least two keyframes, consecutive actions
    /// differ in pose or gripper bit.
    pub fn validate(&self) -> Result<(), SimError> {
        if self.keyframes.len() < 2 {
            return Err(SimError::InvalidAction("fewer than 2 keyframes".into()));
        }
        for w in self.keyframes.windows(2) {
            let (a, b) = (&w[0].1, &w[1].1);
            if a.translation == b.translation
                && a.rotation == b.rotation
                && a.gripper_open == b.gripper_open
            {
                return Err(SimError::InvalidAction(
                    "consecutive keyframes identical".into(),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_tasks_with_stable_ids() {
        let all = TaskSpec::all();
        assert_eq!(all.len(), TASK_COUNT);
        for (i, t) in all.iter().enumerate() {
            assert_eq!(t.task_id(), i);
            assert_eq!(TaskSpec::from_task_id(i), *t);
        }
    }

    #[test]
    fn push_template_renders() {
        let t = TaskSpec {
            family: TaskFamily::PushToTarget,
            variant: 0,
        };
        assert_eq!(t.instruction(), "push the red block to the green target");
    }

    #[test]
    fn every_variant_renders_nonempty() {
        for t in TaskSpec::all() {
            assert!(!t.instruction().is_empty());
            assert!(!t.name().is_empty());
        }
    }
}
