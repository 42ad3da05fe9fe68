//! Kinematic dynamics, success predicates, and observation synthesis.
//!
//! Dynamics are teleport-style: the gripper jumps to the commanded pose.
//! If the incoming state has the gripper closed, the nearest block within
//! the grasp radius rides along rigidly; opening the gripper drops the
//! carried block onto whatever supports it (a pad top or the table).
//! Buttons depress when a closed gripper reaches their top. There is no
//! contact physics — the expert's waypoints are poses for a planner in
//! the real setting, and nothing downstream depends on contact forces.

use super::*;
use crate::geom::{dist3, dist_xy, Pose, Vec3};
use crate::render::{clamp_to_workspace, PointCloud};

/// Nearest block within the grasp radius of the gripper, if any; ties
/// break toward the lower object id (stable ordering).
fn carried_block(state: &SceneState) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, o) in state.objects.iter().enumerate() {
        if !matches!(o.kind, ObjKind::Block) {
            continue;
        }
        let d = dist3(o.pose.position, state.gripper.position);
        if d <= GRASP_RADIUS {
            let better = match best {
                None => true,
                Some((_, bd)) => d < bd,
            };
            if better {
                best = Some((i, d));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Support height under a block at the given xy: the top of a pad that
/// contains it, else the table plane.
fn support_top(objects: &[SceneObject], xy: Vec3) -> f64 {
    let mut top: f64 = 0.0;
    for o in objects {
        if let ObjKind::Pad = o.kind {
            let dx = (xy[0] - o.pose.position[0]).abs();
            let dy = (xy[1] - o.pose.position[1]).abs();
            if dx <= o.size && dy <= o.size {
                top = top.max(PAD_HEIGHT);
            }
        }
    }
    top
}

/// Advance the scene by one commanded keyframe. Out-of-bounds commands
/// are clamped and flagged in the returned state.
pub fn step(state: &SceneState, action: &Action) -> SceneState {
    let mut next = state.clone();
    next.clamped = false;

    let target = clamp_to_workspace(action.translation);
    if target != action.translation {
        next.clamped = true;
    }

    // Attachment is decided from the incoming state: a closed gripper
    // carries the nearest block within reach through this motion.
    let carried = if !state.gripper_open {
        carried_block(state)
    } else {
        None
    };

    let old_gripper = state.gripper;
    let new_gripper = Pose::new(target, action.rotation);
    next.gripper = new_gripper;

    if let Some(i) = carried {
        // Rigid ride-along: preserve the object's pose relative to the
        // gripper across the motion.
        let relative = old_gripper.inverse().compose(state.objects[i].pose);
        next.objects[i].pose = new_gripper.compose(relative);
        next.objects[i].pose.rotation = next.objects[i].pose.rotation.normalized().canonicalized();

        if action.gripper_open {
            // Release: settle onto the supporting surface below.
            let xy = next.objects[i].pose.position;
            let rest = support_top(&next.objects, xy) + BLOCK_SIZE / 2.0;
            next.objects[i].pose.position = [xy[0], xy[1], rest];
        } else {
            // Keep carried blocks inside the workspace like any command.
            next.objects[i].pose.position = clamp_to_workspace(next.objects[i].pose.position);
        }
    }

    next.gripper_open = action.gripper_open;

    if !action.gripper_open {
        for o in &mut next.objects {
            if let ObjKind::Button { depressed } = &mut o.kind {
                let top = [
                    o.pose.position[0],
                    o.pose.position[1],
                    o.pose.position[2] + BUTTON_HEIGHT / 2.0,
                ];
                if dist3(next.gripper.position, top) <= PRESS_RADIUS {
                    *depressed = true;
                }
            }
        }
    }
    next
}

/// Geometric success predicate for a task in a state.
pub fn check_success(state: &SceneState, task: &TaskSpec) -> bool {
    match task.family {
        TaskFamily::PushToTarget => {
            let (Some(block), Some(disc)) = (
                state.block(task.object_color()),
                state.find(|k| matches!(k, ObjKind::TargetDisc), task.destination_color()),
            ) else {
                return false;
            };
            dist_xy(block.pose.position, disc.pose.position) <= TARGET_RADIUS
                && block.pose.position[2] <= BLOCK_SIZE / 2.0 + REST_TOL
        }
        TaskFamily::PickAndPlace => {
            let (Some(block), Some(pad)) = (
                state.block(task.object_color()),
                state.find(|k| matches!(k, ObjKind::Pad), task.destination_color()),
            ) else {
                return false;
            };
            let rest = PAD_HEIGHT + BLOCK_SIZE / 2.0;
            dist_xy(block.pose.position, pad.pose.position) <= PAD_SUCCESS_RADIUS
                && (block.pose.position[2] - rest).abs() <= REST_TOL
        }
        TaskFamily::PressButton => state
            .find(|k| matches!(k, ObjKind::Button { .. }), task.object_color())
            .map(|o| matches!(o.kind, ObjKind::Button { depressed: true }))
            .unwrap_or(false),
    }
}

/// Fixed grid of sample points on an axis-aligned face of a cube with
/// half-extent `h`, in the local frame.
fn cube_face_points(h: f64, axis: usize, sign: f64, grid: usize, out: &mut Vec<Vec3>) {
    for i in 0..grid {
        for j in 0..grid {
            let a = ((i as f64 + 0.5) / grid as f64) * 2.0 * h - h;
            let b = ((j as f64 + 0.5) / grid as f64) * 2.0 * h - h;
            let mut p = [0.0; 3];
            p[axis] = sign * h;
            p[(axis + 1) % 3] = a;
            p[(axis + 2) % 3] = b;
            out.push(p);
        }
    }
}

/// Deterministic surface-sampled colored cloud of the whole scene: table
/// plane, every object, and a gripper marker whose finger spacing encodes
/// the open/closed state. Pure function of the state — no randomness.
pub fn observe(state: &SceneState) -> PointCloud {
    let mut points: Vec<Vec3> = Vec::with_capacity(1500);
    let mut colors: Vec<[f64; 3]> = Vec::with_capacity(1500);

    // Table plane.
    const TABLE_GRID: usize = 24;
    let span = WORKSPACE_MAX[0] - WORKSPACE_MIN[0];
    for i in 0..TABLE_GRID {
        for j in 0..TABLE_GRID {
            points.push([
                WORKSPACE_MIN[0] + (i as f64 + 0.5) / TABLE_GRID as f64 * span,
                WORKSPACE_MIN[1] + (j as f64 + 0.5) / TABLE_GRID as f64 * span,
                0.0,
            ]);
            colors.push([0.55, 0.55, 0.55]);
        }
    }

    for o in &state.objects {
        let color = COLOR_RGB[o.color];
        let mut local: Vec<Vec3> = Vec::new();
        match o.kind {
            ObjKind::Block => {
                let h = o.size / 2.0;
                for axis in 0..3 {
                    for sign in [-1.0, 1.0] {
                        cube_face_points(h, axis, sign, 4, &mut local);
                    }
                }
            }
            ObjKind::TargetDisc => {
                disc_points(o.size, TARGET_THICKNESS / 2.0, 7, &mut local);
            }
            ObjKind::Pad => {
                let grid = 6;
                for i in 0..grid {
                    for j in 0..grid {
                        local.push([
                            ((i as f64 + 0.5) / grid as f64) * 2.0 * o.size - o.size,
                            ((j as f64 + 0.5) / grid as f64) * 2.0 * o.size - o.size,
                            PAD_HEIGHT / 2.0,
                        ]);
                    }
                }
            }
            ObjKind::Button { depressed } => {
                // A pressed button sits visibly lower.
                let top = if depressed {
                    BUTTON_HEIGHT * 0.1
                } else {
                    BUTTON_HEIGHT / 2.0
                };
                disc_points(o.size, top, 5, &mut local);
            }
        }
        for p in local {
            points.push(o.pose.transform(p));
            colors.push(color);
        }
    }

    // Gripper marker: two finger columns whose spacing encodes openness,
    // plus a crossbar; all posed by the gripper frame so yaw is visible.
    let finger = if state.gripper_open { 0.028 } else { 0.010 };
    let gripper_color = [0.15, 0.15, 0.18];
    for side in [-1.0, 1.0] {
        for k in 0..4 {
            points.push(state.gripper.transform([
                side * finger,
                0.0,
                -0.012 * k as f64,
            ]));
            colors.push(gripper_color);
        }
    }
    for k in 0..3 {
        points.push(state.gripper.transform([
            (k as f64 - 1.0) * finger,
            0.0,
            0.012,
        ]));
        colors.push(gripper_color);
    }

    PointCloud::new(points, colors)
        .expect("matching point/color counts")
        .capped(POINT_BUDGET)
}

/// Grid samples on a horizontal disc of radius `r` at height `z`, local frame.
fn disc_points(r: f64, z: f64, grid: usize, out: &mut Vec<Vec3>) {
    for i in 0..grid {
        for j in 0..grid {
            let x = ((i as f64 + 0.5) / grid as f64) * 2.0 * r - r;
            let y = ((j as f64 + 0.5) / grid as f64) * 2.0 * r - r;
            if x * x + y * y <= r * r {
                out.push([x, y, z]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Quat;

    fn empty_scene() -> SceneState {
        SceneState {
            objects: vec![],
            gripper: Pose::at(GRIPPER_START),
            gripper_open: true,
            clamped: false,
        }
    }

    fn block_at(color: usize, pos: Vec3) -> SceneObject {
        SceneObject {
            id: 0,
            kind: ObjKind::Block,
            color,
            pose: Pose::at(pos),
            size: BLOCK_SIZE,
        }
    }

    fn move_to(p: Vec3, open: bool) -> Action {
        Action {
            translation: p,
            rotation: Quat::IDENTITY,
            gripper_open: open,
            collision_allowed: false,
        }
    }

    #[test]
    fn move_without_grasp_only_moves_gripper() {
        let mut scene = empty_scene();
        scene.objects.push(block_at(0, [0.1, 0.1, 0.02]));
        let next = step(&scene, &move_to([0.2, -0.1, 0.1], true));
        assert_eq!(next.gripper.position, [0.2, -0.1, 0.1]);
        assert_eq!(next.objects[0].pose.position, [0.1, 0.1, 0.02]);
    }

    #[test]
    fn close_then_translate_carries_block() {
        let mut scene = empty_scene();
        scene.objects.push(block_at(0, [0.1, 0.1, 0.02]));
        let grasped = step(&scene, &move_to([0.1, 0.1, 0.02], false));
        assert!(!grasped.gripper_open);
        let t = [-0.05, 0.08, 0.1];
        let moved = step(
            &grasped,
            &move_to([0.1 + t[0], 0.1 + t[1], 0.02 + t[2]], false),
        );
        let p = moved.objects[0].pose.position;
        assert!(dist3(p, [0.1 + t[0], 0.1 + t[1], 0.02 + t[2]]) < 1e-12);
    }

    #[test]
    fn release_drops_block_to_support_plane() {
        let mut scene = empty_scene();
        scene.objects.push(block_at(0, [0.0, 0.0, 0.02]));
        let grasped = step(&scene, &move_to([0.0, 0.0, 0.02], false));
        let lifted = step(&grasped, &move_to([0.05, 0.05, 0.2], false));
        assert!((lifted.objects[0].pose.position[2] - 0.2).abs() < 1e-12);
        let released = step(&lifted, &move_to([0.05, 0.05, 0.2], true));
        let rest = released.objects[0].pose.position[2];
        assert!((rest - BLOCK_SIZE / 2.0).abs() < 1e-12, "rest z {}", rest);
    }

    #[test]
    fn release_on_pad_rests_on_pad_top() {
        let mut scene = empty_scene();
        scene.objects.push(block_at(0, [0.0, 0.0, 0.02]));
        scene.objects.push(SceneObject {
            id: 1,
            kind: ObjKind::Pad,
            color: 1,
            pose: Pose::at([0.15, 0.0, PAD_HEIGHT / 2.0]),
            size: PAD_HALF,
        });
        let grasped = step(&scene, &move_to([0.0, 0.0, 0.02], false));
        let over = step(&grasped, &move_to([0.15, 0.0, 0.15], false));
        let released = step(&over, &move_to([0.15, 0.0, 0.15], true));
        let z = released.objects[0].pose.position[2];
        assert!(
            (z - (PAD_HEIGHT + BLOCK_SIZE / 2.0)).abs() < 1e-12,
            "rest z {}",
            z
        );
    }

    #[test]
    fn out_of_bounds_command_clamped_and_flagged() {
        let scene = empty_scene();
        let next = step(&scene, &move_to([1.0, 0.0, 0.1], true));
        assert!(next.clamped);
        assert_eq!(next.gripper.position[0], WORKSPACE_MAX[0]);
    }

    #[test]
    fn closed_gripper_at_button_top_depresses_it() {
        let mut scene = empty_scene();
        scene.objects.push(SceneObject {
            id: 0,
            kind: ObjKind::Button { depressed: false },
            color: 2,
            pose: Pose::at([0.1, -0.1, BUTTON_HEIGHT / 2.0]),
            size: BUTTON_RADIUS,
        });
        let next = step(&scene, &move_to([0.1, -0.1, BUTTON_HEIGHT], false));
        assert!(matches!(next.objects[0].kind, ObjKind::Button { depressed: true }));
    }

    #[test]
    fn success_boundary_is_exact() {
        let task = TaskSpec {
            family: TaskFamily::PushToTarget,
            variant: 0,
        };
        let mut scene = empty_scene();
        scene.objects.push(SceneObject {
            id: 1,
            kind: ObjKind::TargetDisc,
            color: task.destination_color(),
            pose: Pose::at([0.0, 0.0, TARGET_THICKNESS / 2.0]),
            size: TARGET_DISC_RADIUS,
        });
        // Exactly at center.
        scene.objects.push(block_at(0, [0.0, 0.0, BLOCK_SIZE / 2.0]));
        assert!(check_success(&scene, &task));
        // Just outside the radius.
        scene.objects[1].pose.position = [TARGET_RADIUS + 1e-6, 0.0, BLOCK_SIZE / 2.0];
        assert!(!check_success(&scene, &task));
        // Exactly on the radius counts.
        scene.objects[1].pose.position = [TARGET_RADIUS, 0.0, BLOCK_SIZE / 2.0];
        assert!(check_success(&scene, &task));
    }

    #[test]
    fn empty_table_observation_has_only_table_and_gripper() {
        let cloud = observe(&empty_scene());
        // 24x24 table grid + 8 finger + 3 crossbar points.
        assert_eq!(cloud.len(), 24 * 24 + 11);
    }

    #[test]
    fn translating_object_translates_exactly_its_points() {
        let mut scene = empty_scene();
        scene.objects.push(block_at(1, [0.0, 0.0, 0.02]));
        let before = observe(&scene);
        let t = [0.07, -0.03, 0.04];
        scene.objects[0].pose.position = crate::geom::add3([0.0, 0.0, 0.02], t);
        let after = observe(&scene);
        assert_eq!(before.len(), after.len());
        let mut moved = 0;
        for (a, b) in before.points.iter().zip(&after.points) {
            if a != b {
                assert!(dist3(crate::geom::add3(*a, t), *b) < 1e-12);
                moved += 1;
            }
        }
        assert_eq!(moved, 96); // exactly the block's surface points
    }

    #[test]
    fn red_block_contributes_red_dominant_points() {
        let mut scene = empty_scene();
        scene.objects.push(block_at(0, [0.1, 0.0, 0.02]));
        let cloud = observe(&scene);
        let red = COLOR_RGB[0];
        let n = cloud
            .colors
            .iter()
            .filter(|c| **c == red && c[0] > c[1] && c[0] > c[2])
            .count();
        assert_eq!(n, 96);
    }
}
