use serde::{Deserialize, Serialize};

use super::{displayed_rotation, SimConfig, SimState};
use crate::error::Result;
use crate::geometry::{RotationMatrix, Vec3};

/// What the operator sees on one tick: 2D primitives in pixel coordinates
/// (u to the right, v down).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewFrame {
    pub sphere_center: (f64, f64),
    pub sphere_radius_px: f64,
    /// Outline of each cube; empty when a cube is clipped.
    pub cube_polygons: [Vec<(f64, f64)>; 3],
    pub annulus: (f64, f64),
    pub tick: u64,
    pub visible: bool,
}

/// Renders `state` through the displayed camera for `config`.
pub fn project(state: &SimState, config: &SimConfig) -> Result<ViewFrame> {
    let (r, _) = displayed_rotation(config)?;
    Ok(project_with(state, config, &r))
}

pub(super) fn project_with(state: &SimState, config: &SimConfig, r: &RotationMatrix) -> ViewFrame {
    let k = &config.intrinsics;
    let (cx, cy) = k.center();
    // camera looks down its own -Z axis
    let to_pixel = |p: Vec3| -> Option<(f64, f64, f64)> {
        let c = r.transpose_mul_vec(p);
        let depth = -c.z;
        (depth > k.near_clip).then(|| {
            (
                k.focal_length * c.x / depth + cx,
                -k.focal_length * c.y / depth + cy,
                depth,
            )
        })
    };

    let (sphere_center, sphere_radius_px, visible) = match to_pixel(state.rel_pos) {
        Some((u, v, depth)) => (
            (u, v),
            k.focal_length * config.scene.sphere_radius / depth,
            true,
        ),
        None => ((cx, cy), 0.0, false),
    };

    let half = 0.5 * config.scene.cube_edge;
    let cube_polygons = config.scene.cube_offsets.map(|offset| {
        let center = state.rel_pos + offset;
        let mut pts = Vec::with_capacity(8);
        for sx in [-half, half] {
            for sy in [-half, half] {
                for sz in [-half, half] {
                    match to_pixel(center + Vec3::new(sx, sy, sz)) {
                        Some((u, v, _)) => pts.push((u, v)),
                        None => return Vec::new(),
                    }
                }
            }
        }
        convex_hull(pts)
    });

    ViewFrame {
        sphere_center,
        sphere_radius_px,
        cube_polygons,
        annulus: (k.annulus_inner, k.annulus_outer),
        tick: state.tick,
        visible,
    }
}

/// Andrew's monotone chain; counter-clockwise in (u, v) order, no repeated end point.
fn convex_hull(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// True when the projected sphere disc covers the inner circle and fits inside
/// the outer one.
pub fn check_success(view: &ViewFrame, config: &SimConfig) -> bool {
    if !view.visible {
        return false;
    }
    let (cx, cy) = config.intrinsics.center();
    let (inner, outer) = view.annulus;
    let offset = (view.sphere_center.0 - cx).hypot(view.sphere_center.1 - cy);
    offset + inner <= view.sphere_radius_px && offset + view.sphere_radius_px <= outer
}
