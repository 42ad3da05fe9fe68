//! Seeded scene sampling: non-overlapping object placement by rejection.

use super::*;
use crate::geom::{dist_xy, Pose};
use crate::seeds;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sample a task uniformly and lay out its scene. Deterministic in the
/// seed; placement rejection-samples and panics loudly if a legal layout
/// cannot be found (which does not happen at these densities).
pub fn sample_task(seed: u64) -> (TaskSpec, SceneState, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::mix(seed, &[seeds::tag("task-pick")]));
    let family = TaskFamily::from_index(rng.random_range(0..FAMILY_COUNT));
    let variant = rng.random_range(0..VARIANTS_PER_FAMILY);
    let task = TaskSpec { family, variant };
    let state = sample_scene(&task, seed);
    let instruction = task.instruction();
    (task, state, instruction)
}

/// Lay out the scene for a given task. All candidate objects of the
/// family are present (three colors), so instructions carry information.
pub fn sample_scene(task: &TaskSpec, seed: u64) -> SceneState {
    try_sample_scene(task, seed).expect("scene placement failed")
}

fn try_sample_scene(task: &TaskSpec, seed: u64) -> Result<SceneState, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::mix(
        seed,
        &[seeds::tag("scene"), task.task_id() as u64],
    ));

    // (kind, color, size, rest height) for each object in the scene.
    let mut wanted: Vec<(ObjKind, usize, f64, f64)> = Vec::new();
    match task.family {
        TaskFamily::PushToTarget => {
            for c in 0..3 {
                wanted.push((ObjKind::Block, c, BLOCK_SIZE, BLOCK_SIZE / 2.0));
            }
            for c in 0..3 {
                wanted.push((
                    ObjKind::TargetDisc,
                    c,
                    TARGET_DISC_RADIUS,
                    TARGET_THICKNESS / 2.0,
                ));
            }
        }
        TaskFamily::PickAndPlace => {
            for c in 0..3 {
                wanted.push((ObjKind::Block, c, BLOCK_SIZE, BLOCK_SIZE / 2.0));
            }
            for c in 0..3 {
                wanted.push((ObjKind::Pad, c, PAD_HALF, PAD_HEIGHT / 2.0));
            }
        }
        TaskFamily::PressButton => {
            for c in 0..3 {
                wanted.push((
                    ObjKind::Button { depressed: false },
                    c,
                    BUTTON_RADIUS,
                    BUTTON_HEIGHT / 2.0,
                ));
            }
        }
    }

    const ROUNDS: usize = 40;
    const TRIES_PER_OBJECT: usize = 300;
    let lo = WORKSPACE_MIN[0] + PLACEMENT_MARGIN;
    let hi = WORKSPACE_MAX[0] - PLACEMENT_MARGIN;

    for _ in 0..ROUNDS {
        let mut placed: Vec<[f64; 3]> = Vec::with_capacity(wanted.len());
        let mut ok = true;
        'objects: for (_, _, _, rest_z) in &wanted {
            for _ in 0..TRIES_PER_OBJECT {
                let candidate = [
                    rng.random_range(lo..hi),
                    rng.random_range(lo..hi),
                    *rest_z,
                ];
                if placed.iter().all(|p| dist_xy(*p, candidate) >= MIN_SEPARATION) {
                    placed.push(candidate);
                    continue 'objects;
                }
            }
            ok = false;
            break;
        }
        if !ok {
            continue;
        }
        let objects = wanted
            .iter()
            .zip(&placed)
            .enumerate()
            .map(|(i, ((kind, color, size, _), pos))| SceneObject {
                id: i as u32,
                kind: *kind,
                color: *color,
                pose: Pose::at(*pos),
                size: *size,
            })
            .collect();
        return Ok(SceneState {
            objects,
            gripper: Pose::at(GRIPPER_START),
            gripper_open: true,
            clamped: false,
        });
    }
    Err(SimError::PlacementFailed { tries: ROUNDS })
}
