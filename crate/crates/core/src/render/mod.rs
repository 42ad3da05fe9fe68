//! Point-cloud construction, five-view orthographic rendering, and the
//! training-time rigid augmentations.
//!
//! The five cameras are the axis-aligned faces of the workspace box
//! (front, left, right, behind, top). Projection is orthographic, so
//! `project_point` and pixel-center unprojection are exact inverses and
//! the rendered xyz channels carry true world coordinates.

mod augment;
mod views;

pub use augment::{augment, sample_augment, RigidYawShift, AUGMENT_MAX_SHIFT, AUGMENT_MAX_YAW};
pub use views::{render_views, render_views_with_index, write_view_planes, VirtualViews, CHANNELS};

use crate::geom::Vec3;
use thiserror::Error;

/// Axis-aligned workspace box. The x/y extents are centered so yaw
/// augmentation rotates the box onto itself; all faces are square.
pub const WORKSPACE_MIN: Vec3 = [-0.3, -0.3, 0.0];
pub const WORKSPACE_MAX: Vec3 = [0.3, 0.3, 0.6];

/// Box edge length (equal on all axes).
pub const WORKSPACE_EXTENT: f64 = 0.6;

pub fn workspace_center() -> Vec3 {
    [
        0.5 * (WORKSPACE_MIN[0] + WORKSPACE_MAX[0]),
        0.5 * (WORKSPACE_MIN[1] + WORKSPACE_MAX[1]),
        0.5 * (WORKSPACE_MIN[2] + WORKSPACE_MAX[2]),
    ]
}

pub fn in_workspace(p: Vec3) -> bool {
    (0..3).all(|i| p[i] >= WORKSPACE_MIN[i] && p[i] <= WORKSPACE_MAX[i])
}

pub fn clamp_to_workspace(p: Vec3) -> Vec3 {
    [
        p[0].clamp(WORKSPACE_MIN[0], WORKSPACE_MAX[0]),
        p[1].clamp(WORKSPACE_MIN[1], WORKSPACE_MAX[1]),
        p[2].clamp(WORKSPACE_MIN[2], WORKSPACE_MAX[2]),
    ]
}

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("render: point cloud is empty after workspace clipping")]
    EmptyCloud,
    #[error("render: point/color count mismatch: {points} vs {colors}")]
    LengthMismatch { points: usize, colors: usize },
    #[error("augment: no in-bounds transform found in {tries} tries")]
    AugmentExhausted { tries: usize },
    #[error("render: io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Fused colored observation of the scene.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub colors: Vec<[f64; 3]>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>, colors: Vec<[f64; 3]>) -> Result<Self, RenderError> {
        if points.len() != colors.len() {
            return Err(RenderError::LengthMismatch {
                points: points.len(),
                colors: colors.len(),
            });
        }
        Ok(PointCloud { points, colors })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Drop points outside the workspace box.
    pub fn clipped(&self) -> PointCloud {
        let mut points = Vec::with_capacity(self.points.len());
        let mut colors = Vec::with_capacity(self.colors.len());
        for (p, c) in self.points.iter().zip(&self.colors) {
            if in_workspace(*p) {
                points.push(*p);
                colors.push(*c);
            }
        }
        PointCloud { points, colors }
    }

    /// Deterministic stride downsample to at most `budget` points.
    pub fn capped(self, budget: usize) -> PointCloud {
        if self.points.len() <= budget || budget == 0 {
            return self;
        }
        let stride = self.points.len().div_ceil(budget);
        let points: Vec<Vec3> = self.points.iter().step_by(stride).copied().collect();
        let colors: Vec<[f64; 3]> = self.colors.iter().step_by(stride).copied().collect();
        PointCloud { points, colors }
    }
}

/// The five cube-face views, in the fixed model ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViewId {
    Front = 0,
    Left = 1,
    Right = 2,
    Behind = 3,
    Top = 4,
}

pub const VIEW_COUNT: usize = 5;

pub const ALL_VIEWS: [ViewId; VIEW_COUNT] = [
    ViewId::Front,
    ViewId::Left,
    ViewId::Right,
    ViewId::Behind,
    ViewId::Top,
];

/// Orthographic cube-face camera: signed unit axes for image columns
/// (`u`), image rows (`v`, increasing downward), and depth (`d`, from the
/// near face). The axes satisfy u x v = d.
#[derive(Debug, Clone, Copy)]
pub struct ViewCamera {
    pub view: ViewId,
    u_axis: Vec3,
    v_axis: Vec3,
    d_axis: Vec3,
}

/// The five cameras in model order. Axis conventions:
/// front  (looking +y): u=+x, v=-z; behind (looking -y): u=-x, v=-z;
/// left   (looking +x): u=-y, v=-z; right  (looking -x): u=+y, v=-z;
/// top    (looking -z): u=+x, v=-y.
pub fn cameras() -> [ViewCamera; VIEW_COUNT] {
    [
        ViewCamera {
            view: ViewId::Front,
            u_axis: [1.0, 0.0, 0.0],
            v_axis: [0.0, 0.0, -1.0],
            d_axis: [0.0, 1.0, 0.0],
        },
        ViewCamera {
            view: ViewId::Left,
            u_axis: [0.0, -1.0, 0.0],
            v_axis: [0.0, 0.0, -1.0],
            d_axis: [1.0, 0.0, 0.0],
        },
        ViewCamera {
            view: ViewId::Right,
            u_axis: [0.0, 1.0, 0.0],
            v_axis: [0.0, 0.0, -1.0],
            d_axis: [-1.0, 0.0, 0.0],
        },
        ViewCamera {
            view: ViewId::Behind,
            u_axis: [-1.0, 0.0, 0.0],
            v_axis: [0.0, 0.0, -1.0],
            d_axis: [0.0, -1.0, 0.0],
        },
        ViewCamera {
            view: ViewId::Top,
            u_axis: [1.0, 0.0, 0.0],
            v_axis: [0.0, -1.0, 0.0],
            d_axis: [0.0, 0.0, -1.0],
        },
    ]
}

/// Continuous projection of a world point: (row, col) in [0, res] and
/// normalized depth in [0, 1] from the near face.
#[derive(Debug, Clone, Copy)]
pub struct Projection {
    pub row: f64,
    pub col: f64,
    pub depth: f64,
    /// False when the input point lay outside the workspace box; the
    /// returned coordinates are then clamped to the image.
    pub in_bounds: bool,
}

impl ViewCamera {
    /// Minimum of the signed-axis coordinate over the workspace box.
    fn axis_min(axis: Vec3) -> f64 {
        (0..3)
            .map(|i| {
                if axis[i] > 0.0 {
                    axis[i] * WORKSPACE_MIN[i]
                } else {
                    axis[i] * WORKSPACE_MAX[i]
                }
            })
            .sum()
    }

    pub fn project(&self, p: Vec3, resolution: usize) -> Projection {
        let in_bounds = in_workspace(p);
        let q = if in_bounds { p } else { clamp_to_workspace(p) };
        let res = resolution as f64;
        let col = (crate::geom::dot3(q, self.u_axis) - Self::axis_min(self.u_axis))
            / WORKSPACE_EXTENT
            * res;
        let row = (crate::geom::dot3(q, self.v_axis) - Self::axis_min(self.v_axis))
            / WORKSPACE_EXTENT
            * res;
        let depth =
            (crate::geom::dot3(q, self.d_axis) - Self::axis_min(self.d_axis)) / WORKSPACE_EXTENT;
        Projection {
            row,
            col,
            depth,
            in_bounds,
        }
    }

    /// World point of a pixel center at the given normalized depth;
    /// exact inverse of `project` for in-bounds points.
    pub fn unproject_pixel_center(
        &self,
        row: usize,
        col: usize,
        depth: f64,
        resolution: usize,
    ) -> Vec3 {
        let res = resolution as f64;
        let u = (col as f64 + 0.5) / res * WORKSPACE_EXTENT + Self::axis_min(self.u_axis);
        let v = (row as f64 + 0.5) / res * WORKSPACE_EXTENT + Self::axis_min(self.v_axis);
        let d = depth * WORKSPACE_EXTENT + Self::axis_min(self.d_axis);
        let mut p = [0.0; 3];
        for i in 0..3 {
            p[i] = self.u_axis[i] * u + self.v_axis[i] * v + self.d_axis[i] * d;
        }
        p
    }

    /// Pixel indices nearest to a projected point (row, col), clamped to
    /// the image. Halfway coordinates round toward the higher index.
    pub fn project_to_pixel(&self, p: Vec3, resolution: usize) -> (usize, usize, bool) {
        let pr = self.project(p, resolution);
        let clamp = |x: f64| -> usize {
            let i = (x - 0.5).round();
            (i.max(0.0) as usize).min(resolution - 1)
        };
        (clamp(pr.row), clamp(pr.col), pr.in_bounds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn camera_axes_form_right_handed_frames() {
        for cam in cameras() {
            let u = cam.u_axis;
            let v = cam.v_axis;
            let d = cam.d_axis;
            let cross = [
                u[1] * v[2] - u[2] * v[1],
                u[2] * v[0] - u[0] * v[2],
                u[0] * v[1] - u[1] * v[0],
            ];
            assert_eq!(cross, d, "{:?}", cam.view);
        }
    }

    #[test]
    fn workspace_min_corner_projects_to_image_corner() {
        // The min corner lands on a corner of every view's image
        // rectangle: both coordinates are 0 or the full resolution.
        let res = 32;
        for cam in cameras() {
            let p = cam.project(WORKSPACE_MIN, res);
            assert!(p.in_bounds);
            for coord in [p.row, p.col] {
                assert!(
                    coord.abs() < 1e-12 || (coord - res as f64).abs() < 1e-12,
                    "{:?}: corner at ({}, {})",
                    cam.view,
                    p.row,
                    p.col
                );
            }
        }
    }

    #[test]
    fn workspace_center_projects_to_image_center() {
        let res = 32;
        for cam in cameras() {
            let p = cam.project(workspace_center(), res);
            assert!((p.row - 16.0).abs() < 1e-12 && (p.col - 16.0).abs() < 1e-12);
            assert!((p.depth - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn project_unproject_roundtrip() {
        let res = 24;
        for cam in cameras() {
            for row in [0usize, 7, 23] {
                for col in [0usize, 11, 23] {
                    let p = cam.unproject_pixel_center(row, col, 0.37, res);
                    let proj = cam.project(p, res);
                    assert!(
                        (proj.row - (row as f64 + 0.5)).abs() < 1e-9
                            && (proj.col - (col as f64 + 0.5)).abs() < 1e-9
                            && (proj.depth - 0.37).abs() < 1e-9,
                        "{:?} ({},{}) -> {:?}",
                        cam.view,
                        row,
                        col,
                        (proj.row, proj.col, proj.depth)
                    );
                }
            }
        }
    }

    #[test]
    fn out_of_bounds_point_is_flagged_and_clamped() {
        let cam = cameras()[0];
        let p = cam.project([0.0, 0.0, 1.7], 32);
        assert!(!p.in_bounds);
        assert!(p.row >= 0.0 && p.row <= 32.0);
    }

    #[test]
    fn cap_keeps_budget_and_determinism() {
        let n = 1000;
        let points: Vec<Vec3> = (0..n).map(|i| [i as f64 * 1e-4, 0.0, 0.1]).collect();
        let colors = vec![[0.5, 0.5, 0.5]; n];
        let pc = PointCloud::new(points, colors).unwrap();
        let a = pc.clone().capped(300);
        let b = pc.capped(300);
        assert!(a.len() <= 300);
        assert_eq!(a, b);
    }
}
