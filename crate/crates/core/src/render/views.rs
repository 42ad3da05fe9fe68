//! Z-buffer splatting of point clouds into five 7-channel views.

use super::{cameras, PointCloud, RenderError, ViewCamera, VIEW_COUNT};
use crate::par;
use std::io::Write;
use std::path::Path;

/// Channel order within each view image.
pub const CHANNELS: usize = 7;
pub const CH_R: usize = 0;
pub const CH_G: usize = 1;
pub const CH_B: usize = 2;
pub const CH_DEPTH: usize = 3;
pub const CH_X: usize = 4;
pub const CH_Y: usize = 5;
pub const CH_Z: usize = 6;

/// Five orthographic view images with RGB, depth, and world-xyz channels,
/// stored as [view][channel][row][col]. Background pixels carry zero RGB,
/// depth 0, and the workspace center as xyz.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualViews {
    pub resolution: usize,
    data: Vec<f64>,
}

impl VirtualViews {
    fn background(resolution: usize) -> VirtualViews {
        let center = super::workspace_center();
        let px = resolution * resolution;
        let mut data = vec![0.0; VIEW_COUNT * CHANNELS * px];
        for view in 0..VIEW_COUNT {
            for (ch, value) in [(CH_X, center[0]), (CH_Y, center[1]), (CH_Z, center[2])] {
                let base = (view * CHANNELS + ch) * px;
                data[base..base + px].fill(value);
            }
        }
        VirtualViews { resolution, data }
    }

    #[inline]
    fn idx(&self, view: usize, ch: usize, row: usize, col: usize) -> usize {
        ((view * CHANNELS + ch) * self.resolution + row) * self.resolution + col
    }

    pub fn get(&self, view: usize, ch: usize, row: usize, col: usize) -> f64 {
        self.data[self.idx(view, ch, row, col)]
    }

    fn set(&mut self, view: usize, ch: usize, row: usize, col: usize, v: f64) {
        let i = self.idx(view, ch, row, col);
        self.data[i] = v;
    }

    /// One full channel plane of one view, row-major.
    pub fn plane(&self, view: usize, ch: usize) -> &[f64] {
        let px = self.resolution * self.resolution;
        let base = (view * CHANNELS + ch) * px;
        &self.data[base..base + px]
    }

    /// All seven channel values at a pixel.
    pub fn pixel(&self, view: usize, row: usize, col: usize) -> [f64; CHANNELS] {
        let mut out = [0.0; CHANNELS];
        for (ch, slot) in out.iter_mut().enumerate() {
            *slot = self.get(view, ch, row, col);
        }
        out
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }
}

/// Splat a clipped cloud into the five views. Per pixel the nearest point
/// (smallest depth) wins; exact depth ties keep the lower point index.
pub fn render_views(
    cloud: &PointCloud,
    cams: &[ViewCamera; VIEW_COUNT],
    resolution: usize,
) -> Result<VirtualViews, RenderError> {
    render_views_with_index(cloud, cams, resolution).map(|(v, _)| v)
}

/// As [`render_views`], also returning the winning point index per pixel
/// ([view][row*res+col], `None` for background).
pub fn render_views_with_index(
    cloud: &PointCloud,
    cams: &[ViewCamera; VIEW_COUNT],
    resolution: usize,
) -> Result<(VirtualViews, Vec<Vec<Option<usize>>>), RenderError> {
    let cloud = cloud.clipped();
    if cloud.is_empty() {
        return Err(RenderError::EmptyCloud);
    }
    let px = resolution * resolution;

    // Each view is splatted independently; the per-view loop visits
    // points in index order so the tie rule is scheduling-independent.
    let per_view: Vec<(Vec<f64>, Vec<Option<usize>>)> = par::map_range(VIEW_COUNT, |v| {
        let cam = &cams[v];
        let mut depth = vec![f64::INFINITY; px];
        let mut winner: Vec<Option<usize>> = vec![None; px];
        for (i, p) in cloud.points.iter().enumerate() {
            let proj = cam.project(*p, resolution);
            let row = (proj.row as usize).min(resolution - 1);
            let col = (proj.col as usize).min(resolution - 1);
            let at = row * resolution + col;
            if proj.depth < depth[at] {
                depth[at] = proj.depth;
                winner[at] = Some(i);
            }
        }
        (depth, winner)
    });

    let mut views = VirtualViews::background(resolution);
    for (v, (depth, winner)) in per_view.iter().enumerate() {
        for row in 0..resolution {
            for col in 0..resolution {
                let at = row * resolution + col;
                if let Some(i) = winner[at] {
                    let p = cloud.points[i];
                    let c = cloud.colors[i];
                    views.set(v, CH_R, row, col, c[0]);
                    views.set(v, CH_G, row, col, c[1]);
                    views.set(v, CH_B, row, col, c[2]);
                    views.set(v, CH_DEPTH, row, col, depth[at]);
                    views.set(v, CH_X, row, col, p[0]);
                    views.set(v, CH_Y, row, col, p[1]);
                    views.set(v, CH_Z, row, col, p[2]);
                }
            }
        }
    }
    Ok((views, per_view.into_iter().map(|(_, w)| w).collect()))
}

/// Dump one view's channels for inspection: RGB as a binary PPM plus one
/// binary PGM per remaining channel, normalized to [0,255] over the
/// workspace value range. Files are `<prefix>_rgb.ppm`,
/// `<prefix>_depth.pgm`, `<prefix>_{x,y,z}.pgm`.
pub fn write_view_planes(
    views: &VirtualViews,
    view: usize,
    prefix: &Path,
) -> Result<(), RenderError> {
    let res = views.resolution;
    let to8 = |v: f64| -> u8 { (v.clamp(0.0, 1.0) * 255.0).round() as u8 };

    let mut rgb = Vec::with_capacity(res * res * 3);
    for row in 0..res {
        for col in 0..res {
            for ch in [CH_R, CH_G, CH_B] {
                rgb.push(to8(views.get(view, ch, row, col)));
            }
        }
    }
    let mut f = std::fs::File::create(with_suffix(prefix, "_rgb.ppm"))?;
    write!(f, "P6\n{} {}\n255\n", res, res)?;
    f.write_all(&rgb)?;

    let spans: [(usize, &str, f64, f64); 4] = [
        (CH_DEPTH, "_depth.pgm", 0.0, 1.0),
        (CH_X, "_x.pgm", super::WORKSPACE_MIN[0], super::WORKSPACE_MAX[0]),
        (CH_Y, "_y.pgm", super::WORKSPACE_MIN[1], super::WORKSPACE_MAX[1]),
        (CH_Z, "_z.pgm", super::WORKSPACE_MIN[2], super::WORKSPACE_MAX[2]),
    ];
    for (ch, suffix, lo, hi) in spans {
        let mut gray = Vec::with_capacity(res * res);
        for row in 0..res {
            for col in 0..res {
                let v = (views.get(view, ch, row, col) - lo) / (hi - lo);
                gray.push(to8(v));
            }
        }
        let mut f = std::fs::File::create(with_suffix(prefix, suffix))?;
        write!(f, "P5\n{} {}\n255\n", res, res)?;
        f.write_all(&gray)?;
    }
    Ok(())
}

fn with_suffix(prefix: &Path, suffix: &str) -> std::path::PathBuf {
    let mut name = prefix.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    prefix.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::super::workspace_center;
    use super::*;

    fn single_point_cloud(p: [f64; 3]) -> PointCloud {
        PointCloud::new(vec![p], vec![[0.9, 0.1, 0.2]]).unwrap()
    }

    #[test]
    fn empty_cloud_rejected() {
        let pc = PointCloud::new(vec![[9.0, 9.0, 9.0]], vec![[0.0; 3]]).unwrap();
        assert!(matches!(
            render_views(&pc, &cameras(), 8),
            Err(RenderError::EmptyCloud)
        ));
    }

    #[test]
    fn single_center_point_hits_one_pixel_per_view() {
        let center = workspace_center();
        let pc = single_point_cloud(center);
        let (views, winners) = render_views_with_index(&pc, &cameras(), 16).unwrap();
        for v in 0..VIEW_COUNT {
            let hits: Vec<usize> = (0..256).filter(|&i| winners[v][i].is_some()).collect();
            assert_eq!(hits.len(), 1, "view {} has {} hits", v, hits.len());
            let (row, col) = (hits[0] / 16, hits[0] % 16);
            let px = views.pixel(v, row, col);
            assert_eq!([px[CH_X], px[CH_Y], px[CH_Z]], center);
        }
    }

    #[test]
    fn z_buffer_keeps_nearer_point() {
        // Two points on the same front-view ray; smaller y is nearer.
        let pc = PointCloud::new(
            vec![[0.0, -0.1, 0.3], [0.0, 0.2, 0.3]],
            vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        )
        .unwrap();
        let (views, winners) = render_views_with_index(&pc, &cameras(), 16).unwrap();
        let (front, _) = (0usize, ());
        let hit = (0..256).find(|&i| winners[front][i].is_some()).unwrap();
        assert_eq!(winners[front][hit], Some(0));
        let (row, col) = (hit / 16, hit % 16);
        assert_eq!(views.get(front, CH_R, row, col), 1.0);
    }

    #[test]
    fn equal_depth_tie_keeps_lower_index() {
        // Identical points: index 0 must win everywhere it lands.
        let pc = PointCloud::new(
            vec![[0.05, 0.05, 0.2], [0.05, 0.05, 0.2]],
            vec![[0.2, 0.2, 0.2], [0.8, 0.8, 0.8]],
        )
        .unwrap();
        let (_, winners) = render_views_with_index(&pc, &cameras(), 16).unwrap();
        for v in 0..VIEW_COUNT {
            for w in winners[v].iter().flatten() {
                assert_eq!(*w, 0);
            }
        }
    }

    #[test]
    fn foreground_xyz_matches_an_input_point_exactly() {
        // Brute-force scan: every foreground pixel's xyz is a cloud point.
        let mut points = Vec::new();
        let mut colors = Vec::new();
        let mut s = 7u64;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            points.push([
                next() * 0.6 - 0.3,
                next() * 0.6 - 0.3,
                next() * 0.6,
            ]);
            colors.push([next(), next(), next()]);
        }
        let pc = PointCloud::new(points.clone(), colors).unwrap();
        let (views, winners) = render_views_with_index(&pc, &cameras(), 12).unwrap();
        for v in 0..VIEW_COUNT {
            for row in 0..12 {
                for col in 0..12 {
                    if winners[v][row * 12 + col].is_none() {
                        continue;
                    }
                    let px = views.pixel(v, row, col);
                    let xyz = [px[CH_X], px[CH_Y], px[CH_Z]];
                    assert!(
                        points.contains(&xyz),
                        "view {} pixel ({},{}) xyz {:?} not in cloud",
                        v,
                        row,
                        col,
                        xyz
                    );
                }
            }
        }
    }

    #[test]
    fn rendering_is_byte_identical() {
        let pc = PointCloud::new(
            vec![[0.1, 0.0, 0.2], [-0.2, 0.1, 0.05], [0.0, -0.25, 0.4]],
            vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        )
        .unwrap();
        let a = render_views(&pc, &cameras(), 20).unwrap();
        let b = render_views(&pc, &cameras(), 20).unwrap();
        let bits = |v: &VirtualViews| -> Vec<u64> { v.raw().iter().map(|x| x.to_bits()).collect() };
        assert_eq!(bits(&a), bits(&b));
    }
}
