//! Geometric stability oracle: penetration via voxel flood fill, contact and
//! support-polygon analysis, quasi-static settling, and the weighted
//! stability/penetration score used to gate placement candidates.
//!
//! The oracle works purely on point clouds. Solidity of the support is
//! recovered by flood-filling an occupancy grid from its boundary: voxels
//! holding support points form the shell, unreachable free voxels are
//! interior. Settling is greedy potential-energy descent over a small motion
//! set (straight drop plus tilts about contact-hull edges).

use std::collections::HashMap;

use nalgebra::{Matrix3, Point3, Vector3};
use thiserror::Error;

use crate::metrics::ScoreWeights;
use crate::scene::{
    centroid, pose_to_transform, rot_axis_angle, rotation_angle, support_diameter, transform_cloud,
    transform_to_pose, Aabb, Pose6D, RigidTransform, SegmentedScene,
};

#[derive(Debug, Error)]
pub enum StabilityError {
    #[error("voxel size {voxel} outside (0, {max}]")]
    BadVoxel { voxel: f64, max: f64 },
    #[error("need at least {need} support points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("settle did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("initial penetration fraction {fraction} exceeds limit")]
    InitialPenetration { fraction: f64 },
}

/// Pose category mirroring the dataset label set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Stable,
    Separation,
    Penetration,
    UnstableContact,
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Category::Stable => "stable",
            Category::Separation => "separation",
            Category::Penetration => "penetration",
            Category::UnstableContact => "unstable_contact",
        };
        f.write_str(s)
    }
}

/// Oracle tuning knobs. Defaults follow the desk-scale conventions used
/// throughout: 5 mm voxels, contact tolerance of two voxels, and settle
/// steps well below the 1 cm / 10° stability verification thresholds.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityParams {
    /// Occupancy voxel edge (m).
    pub voxel: f64,
    /// Contact tolerance (m); a point this close to support or table counts
    /// as touching.
    pub tau_c: f64,
    /// Penetration fraction above which a pose is categorized penetration.
    pub pen_tol: f64,
    /// Fraction at which the penetration score reaches zero.
    pub pen_ref: f64,
    /// Maximum initial penetration fraction settle accepts.
    pub max_pen: f64,
    /// Margin (m) below which the stability score starts degrading.
    pub m_ref: f64,
    /// Settle translation step (m).
    pub settle_dz: f64,
    /// Settle rotation step (rad).
    pub settle_dtheta: f64,
    /// Settle termination threshold on centroid descent (m).
    pub settle_eps: f64,
    /// Settle iteration budget.
    pub settle_max_iter: usize,
    /// Displacement bound (m) for the stable category.
    pub stable_disp: f64,
    /// Rotation bound (rad) for the stable category.
    pub stable_rot: f64,
}

impl Default for StabilityParams {
    fn default() -> Self {
        let voxel = 0.005;
        StabilityParams {
            voxel,
            tau_c: 2.0 * voxel,
            pen_tol: 0.005,
            pen_ref: 0.05,
            max_pen: 0.02,
            m_ref: 0.05,
            settle_dz: voxel / 2.0,
            settle_dtheta: 1f64.to_radians(),
            settle_eps: 1e-5,
            settle_max_iter: 2000,
            stable_disp: 0.01,
            stable_rot: 10f64.to_radians(),
        }
    }
}

/// Classification plus the weighted score of one object pose.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct StabilityReport {
    pub category: Category,
    pub s_pen: f64,
    pub s_stab: f64,
    pub score: f64,
    pub settle_displacement: f64,
    pub settle_rotation: f64,
    pub margin: f64,
    pub pen_fraction: f64,
    pub afforded_by_support: bool,
}

pub const VOXEL_FREE: u8 = 0;
pub const VOXEL_SHELL: u8 = 1;
pub const VOXEL_INTERIOR: u8 = 2;

/// Voxelization of the support with {free, shell, interior} states.
#[derive(Clone, Debug)]
pub struct OccupancyGrid {
    voxel: f64,
    origin: Point3<f64>,
    dims: [usize; 3],
    cells: Vec<u8>,
}

/// Build the grid over the support AABB plus a two-voxel margin; voxels
/// containing support points become shell, free voxels unreachable from the
/// boundary become interior.
pub fn build_occupancy(
    support_points: &[Point3<f64>],
    voxel: f64,
) -> Result<OccupancyGrid, StabilityError> {
    if support_points.len() < 8 {
        return Err(StabilityError::TooFewPoints {
            need: 8,
            got: support_points.len(),
        });
    }
    let diam = support_diameter(support_points).expect("\u{2265}8 points");
    let max_voxel = diam / 4.0;
    if !(voxel > 0.0 && voxel <= max_voxel) {
        return Err(StabilityError::BadVoxel {
            voxel,
            max: max_voxel,
        });
    }
    let bb = Aabb::of(support_points);
    let origin = Point3::from(bb.min.coords - Vector3::repeat(2.0 * voxel));
    let ext = bb.extent() + Vector3::repeat(4.0 * voxel);
    let dims = [
        (ext.x / voxel).ceil() as usize + 1,
        (ext.y / voxel).ceil() as usize + 1,
        (ext.z / voxel).ceil() as usize + 1,
    ];
    let mut grid = OccupancyGrid {
        voxel,
        origin,
        dims,
        cells: vec![VOXEL_FREE; dims[0] * dims[1] * dims[2]],
    };
    for p in support_points {
        if let Some(i) = grid.cell_index(p) {
            grid.cells[i] = VOXEL_SHELL;
        }
    }
    grid.flood_fill_interior();
    Ok(grid)
}

impl OccupancyGrid {
    pub fn voxel_size(&self) -> f64 {
        self.voxel
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    fn coords_of(&self, p: &Point3<f64>) -> Option<[usize; 3]> {
        let rel = (p - self.origin) / self.voxel;
        let mut c = [0usize; 3];
        for i in 0..3 {
            let v = rel[i].floor();
            if v < 0.0 || v >= self.dims[i] as f64 {
                return None;
            }
            c[i] = v as usize;
        }
        Some(c)
    }

    fn flat(&self, c: [usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    /// Flat cell index of a point; `None` when outside the grid.
    pub fn cell_index(&self, p: &Point3<f64>) -> Option<usize> {
        self.coords_of(p).map(|c| self.flat(c))
    }

    /// Cell state at a point; outside the grid counts as free.
    pub fn state_at(&self, p: &Point3<f64>) -> u8 {
        self.cell_index(p).map_or(VOXEL_FREE, |i| self.cells[i])
    }

    pub fn interior_count(&self) -> usize {
        self.cells.iter().filter(|&&s| s == VOXEL_INTERIOR).count()
    }

    fn flood_fill_interior(&mut self) {
        let [nx, ny, nz] = self.dims;
        let mut reached = vec![false; self.cells.len()];
        let mut queue = std::collections::VecDeque::new();
        let mut push = |reached: &mut Vec<bool>,
                        queue: &mut std::collections::VecDeque<[usize; 3]>,
                        c: [usize; 3],
                        cells: &[u8],
                        flat: usize| {
            if !reached[flat] && cells[flat] == VOXEL_FREE {
                reached[flat] = true;
                queue.push_back(c);
            }
        };
        for x in 0..nx {
            for y in 0..ny {
                for z in 0..nz {
                    if x == 0 || y == 0 || z == 0 || x == nx - 1 || y == ny - 1 || z == nz - 1 {
                        let c = [x, y, z];
                        let f = self.flat(c);
                        push(&mut reached, &mut queue, c, &self.cells, f);
                    }
                }
            }
        }
        while let Some(c) = queue.pop_front() {
            for axis in 0..3 {
                for dir in [-1isize, 1] {
                    let mut n = [c[0] as isize, c[1] as isize, c[2] as isize];
                    n[axis] += dir;
                    if n[0] < 0
                        || n[1] < 0
                        || n[2] < 0
                        || n[0] >= nx as isize
                        || n[1] >= ny as isize
                        || n[2] >= nz as isize
                    {
                        continue;
                    }
                    let nc = [n[0] as usize, n[1] as usize, n[2] as usize];
                    let f = self.flat(nc);
                    push(&mut reached, &mut queue, nc, &self.cells, f);
                }
            }
        }
        for (i, cell) in self.cells.iter_mut().enumerate() {
            if *cell == VOXEL_FREE && !reached[i] {
                *cell = VOXEL_INTERIOR;
            }
        }
    }

    /// Distance from `p` to the nearest non-interior voxel center, by an
    /// expanding ring search around the point's own voxel.
    fn depth_at(&self, p: &Point3<f64>) -> f64 {
        let Some(c) = self.coords_of(p) else {
            return 0.0;
        };
        let max_r = *self.dims.iter().max().unwrap() as isize;
        let mut best = f64::INFINITY;
        let mut found_at: Option<isize> = None;
        for r in 0..=max_r {
            if let Some(f) = found_at {
                if r > f + 2 {
                    break;
                }
            }
            for dx in -r..=r {
                for dy in -r..=r {
                    for dz in -r..=r {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != r {
                            continue;
                        }
                        let n = [
                            c[0] as isize + dx,
                            c[1] as isize + dy,
                            c[2] as isize + dz,
                        ];
                        let outside = n.iter().zip(&self.dims).any(|(&v, &d)| v < 0 || v >= d as isize);
                        let state = if outside {
                            VOXEL_FREE
                        } else {
                            self.cells[self.flat([n[0] as usize, n[1] as usize, n[2] as usize])]
                        };
                        if state != VOXEL_INTERIOR {
                            let center = self.origin
                                + Vector3::new(
                                    (n[0] as f64 + 0.5) * self.voxel,
                                    (n[1] as f64 + 0.5) * self.voxel,
                                    (n[2] as f64 + 0.5) * self.voxel,
                                );
                            let d = (p - center).norm();
                            if d < best {
                                best = d;
                            }
                            if found_at.is_none() {
                                found_at = Some(r);
                            }
                        }
                    }
                }
            }
        }
        if best.is_finite() {
            best
        } else {
            0.0
        }
    }
}

/// Share of object points inside interior voxels plus the deepest point's
/// distance to the nearest non-interior voxel center. (0, 0) when nothing
/// penetrates.
pub fn penetration_report(object_points: &[Point3<f64>], grid: &OccupancyGrid) -> (f64, f64) {
    if object_points.is_empty() {
        return (0.0, 0.0);
    }
    let mut inside = 0usize;
    let mut max_depth = 0.0f64;
    for p in object_points {
        if grid.state_at(p) == VOXEL_INTERIOR {
            inside += 1;
            max_depth = max_depth.max(grid.depth_at(p));
        }
    }
    (inside as f64 / object_points.len() as f64, max_depth)
}

/// Uniform hash grid for fixed-radius neighbor tests.
pub(crate) struct PointGrid {
    cell: f64,
    map: HashMap<(i64, i64, i64), Vec<u32>>,
    points: Vec<Point3<f64>>,
}

impl PointGrid {
    pub(crate) fn build(points: &[Point3<f64>], cell: f64) -> PointGrid {
        let mut map: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            let key = (
                (p.x / cell).floor() as i64,
                (p.y / cell).floor() as i64,
                (p.z / cell).floor() as i64,
            );
            map.entry(key).or_default().push(i as u32);
        }
        PointGrid {
            cell,
            map,
            points: points.to_vec(),
        }
    }

    /// Nearest stored point within `r` of `p`, if any. Requires r <= cell.
    pub(crate) fn nearest_within(&self, p: &Point3<f64>, r: f64) -> Option<(usize, f64)> {
        debug_assert!(r <= self.cell + 1e-12);
        let r2 = r * r;
        let kx = (p.x / self.cell).floor() as i64;
        let ky = (p.y / self.cell).floor() as i64;
        let kz = (p.z / self.cell).floor() as i64;
        let mut best: Option<(usize, f64)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = self.map.get(&(kx + dx, ky + dy, kz + dz)) {
                        for &i in ids {
                            let d2 = (self.points[i as usize] - p).norm_squared();
                            if d2 <= r2 && best.map_or(true, |(_, b)| d2 < b) {
                                best = Some((i as usize, d2));
                            }
                        }
                    }
                }
            }
        }
        best
    }

    pub(crate) fn point(&self, i: usize) -> Point3<f64> {
        self.points[i]
    }
}

/// Contact analysis result.
#[derive(Clone, Debug)]
pub struct SupportMargin {
    /// Object points touching support or table.
    pub contacts: Vec<Point3<f64>>,
    /// Supporting-surface anchor of each contact: the nearest support point,
    /// or the table projection. The support polygon is built over these, so
    /// it cannot extend past the physical edge of the support.
    pub locations: Vec<Point3<f64>>,
    /// Signed distance (m) from the projected centroid to the contact hull;
    /// positive inside, `NEG_INFINITY` when there are no contacts.
    pub margin: f64,
    /// True when at least one contact touches support points.
    pub afforded_by_support: bool,
}

/// Contacts within `tau_c` of support points or the table plane, the signed
/// support-polygon margin of the centroid projection, and whether the
/// support itself participates.
pub fn support_margin(
    object_points: &[Point3<f64>],
    support_points: &[Point3<f64>],
    table_z: f64,
    tau_c: f64,
) -> SupportMargin {
    let index = PointGrid::build(support_points, tau_c.max(1e-6));
    support_margin_indexed(object_points, &index, table_z, tau_c)
}

pub(crate) fn support_margin_indexed(
    object_points: &[Point3<f64>],
    support_index: &PointGrid,
    table_z: f64,
    tau_c: f64,
) -> SupportMargin {
    let mut contacts = Vec::new();
    let mut afforded = false;
    for p in object_points {
        let on_support = support_index.has_within(p, tau_c);
        let on_table = (p.z - table_z).abs() <= tau_c;
        if on_support {
            afforded = true;
        }
        if on_support || on_table {
            contacts.push(*p);
        }
    }
    if contacts.is_empty() {
        return SupportMargin {
            contacts,
            margin: f64::NEG_INFINITY,
            afforded_by_support: false,
        };
    }
    let c = centroid(object_points);
    let hull = convex_hull_2d(&contacts);
    let margin = signed_margin(&hull, (c.x, c.y));
    SupportMargin {
        contacts,
        margin,
        afforded_by_support: afforded,
    }
}

/// Andrew's monotone chain over xy projections; returns CCW hull vertex
/// positions as (x, y, index into input).
fn convex_hull_2d(points: &[Point3<f64>]) -> Vec<(f64, f64, usize)> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| {
        points[a]
            .x
            .total_cmp(&points[b].x)
            .then(points[a].y.total_cmp(&points[b].y))
            .then(a.cmp(&b))
    });
    idx.dedup_by(|&mut a, &mut b| points[a].x == points[b].x && points[a].y == points[b].y);
    if idx.len() <= 2 {
        return idx.into_iter().map(|i| (points[i].x, points[i].y, i)).collect();
    }
    let cross = |o: usize, a: usize, b: usize| -> f64 {
        (points[a].x - points[o].x) * (points[b].y - points[o].y)
            - (points[a].y - points[o].y) * (points[b].x - points[o].x)
    };
    let mut lower: Vec<usize> = Vec::new();
    for &i in &idx {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], i) <= 0.0 {
            lower.pop();
        }
        lower.push(i);
    }
    let mut upper: Vec<usize> = Vec::new();
    for &i in idx.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], i) <= 0.0 {
            upper.pop();
        }
        upper.push(i);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        // collinear input: keep the two extremes
        let mut ext = vec![*idx.first().unwrap(), *idx.last().unwrap()];
        ext.dedup();
        return ext.into_iter().map(|i| (points[i].x, points[i].y, i)).collect();
    }
    lower
        .into_iter()
        .map(|i| (points[i].x, points[i].y, i))
        .collect()
}

fn dist_point_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let ab = (b.0 - a.0, b.1 - a.1);
    let ap = (p.0 - a.0, p.1 - a.1);
    let len2 = ab.0 * ab.0 + ab.1 * ab.1;
    let t = if len2 > 0.0 {
        ((ap.0 * ab.0 + ap.1 * ab.1) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = (a.0 + t * ab.0, a.1 + t * ab.1);
    ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt()
}

/// Signed distance from `c` to the hull boundary: positive inside, negative
/// outside, zero on the boundary. Degenerate hulls (point/segment) are
/// all-boundary, so the result is -distance.
fn signed_margin(hull: &[(f64, f64, usize)], c: (f64, f64)) -> f64 {
    match hull.len() {
        0 => f64::NEG_INFINITY,
        1 => {
            let d = ((c.0 - hull[0].0).powi(2) + (c.1 - hull[0].1).powi(2)).sqrt();
            if d == 0.0 {
                0.0
            } else {
                -d
            }
        }
        2 => {
            let d = dist_point_segment(c, (hull[0].0, hull[0].1), (hull[1].0, hull[1].1));
            if d == 0.0 {
                0.0
            } else {
                -d
            }
        }
        _ => {
            let mut inside = true;
            let mut min_d = f64::INFINITY;
            for i in 0..hull.len() {
                let a = hull[i];
                let b = hull[(i + 1) % hull.len()];
                let cross = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
                if cross < 0.0 {
                    inside = false;
                }
                min_d = min_d.min(dist_point_segment(c, (a.0, a.1), (b.0, b.1)));
            }
            if inside {
                min_d
            } else {
                -min_d
            }
        }
    }
}

/// Outcome of quasi-static settling.
#[derive(Clone, Copy, Debug)]
pub struct SettleOutcome {
    /// Settled pose (delta from the initial object cloud).
    pub pose: Pose6D,
    /// Centroid offset between input pose and settled pose (m).
    pub displacement: f64,
    /// Geodesic rotation between input pose and settled pose (rad).
    pub rotation: f64,
    pub iterations: usize,
}

/// Scene-wide immutable context: occupancy grid, support neighbor index, and
/// parameters. Build once per scene, then score any number of poses.
pub struct StabilityContext {
    pub grid: OccupancyGrid,
    support_index: PointGrid,
    pub support_points: Vec<Point3<f64>>,
    pub support_aabb: Aabb,
    pub support_diam: f64,
    pub table_z: f64,
    pub params: StabilityParams,
}

impl StabilityContext {
    pub fn new(scene: &SegmentedScene, params: StabilityParams) -> Result<Self, StabilityError> {
        Self::from_support(scene.support_points(), params)
    }

    pub fn from_support(
        support_points: Vec<Point3<f64>>,
        params: StabilityParams,
    ) -> Result<Self, StabilityError> {
        let grid = build_occupancy(&support_points, params.voxel)?;
        let support_index = PointGrid::build(&support_points, params.tau_c.max(1e-6));
        let support_aabb = Aabb::of(&support_points);
        let support_diam = support_diameter(&support_points).expect("grid build checked count");
        Ok(StabilityContext {
            grid,
            support_index,
            support_points,
            support_aabb,
            support_diam,
            table_z: 0.0,
            params,
        })
    }

    /// Penetration fraction counting both interior voxels and points sunk
    /// below the table plane.
    pub fn penetration_fraction(&self, points: &[Point3<f64>]) -> f64 {
        if points.is_empty() {
            return 0.0;
        }
        let below = self.table_z - self.params.voxel / 2.0;
        let n = points
            .iter()
            .filter(|p| p.z < below || self.grid.state_at(p) == VOXEL_INTERIOR)
            .count();
        n as f64 / points.len() as f64
    }

    pub fn contacts(&self, points: &[Point3<f64>]) -> SupportMargin {
        support_margin_indexed(points, &self.support_index, self.table_z, self.params.tau_c)
    }

    /// A candidate motion is admissible when no point crosses the table
    /// plane and no point enters an interior voxel or a shell voxel it was
    /// not already in.
    fn motion_admissible(&self, before: &[Point3<f64>], after: &[Point3<f64>]) -> bool {
        for (p_old, p_new) in before.iter().zip(after) {
            if p_new.z < self.table_z - 1e-9 {
                return false;
            }
            match self.grid.state_at(p_new) {
                VOXEL_INTERIOR => return false,
                VOXEL_SHELL => {
                    let same_cell = self.grid.cell_index(p_old) == self.grid.cell_index(p_new);
                    if !same_cell {
                        return false;
                    }
                }
                _ => {}
            }
        }
        true
    }

    /// Greedy energy descent from `pose`: apply whichever admissible motion
    /// (drop by dz, or ±dθ tilt about a contact-hull edge) lowers the object
    /// centroid the most, until no motion improves by more than `settle_eps`.
    pub fn settle(
        &self,
        object_initial: &[Point3<f64>],
        pose: &Pose6D,
    ) -> Result<SettleOutcome, StabilityError> {
        let p = &self.params;
        let t_init = pose_to_transform(pose);
        let mut points = transform_cloud(object_initial, &t_init);
        let frac = self.penetration_fraction(&points);
        if frac > p.max_pen {
            return Err(StabilityError::InitialPenetration { fraction: frac });
        }
        let c_start = centroid(&points);
        let r_start = t_init.r;
        let mut t_cur = t_init;
        let mut iterations = 0usize;

        loop {
            if iterations >= p.settle_max_iter {
                return Err(StabilityError::NoConvergence {
                    iterations: p.settle_max_iter,
                });
            }
            let c_cur = centroid(&points);
            // candidate motions: (transform, resulting centroid z)
            let mut candidates: Vec<RigidTransform> = Vec::new();
            candidates.push(RigidTransform::new(
                Matrix3::identity(),
                Vector3::new(0.0, 0.0, -p.settle_dz),
            ));
            let contact = self.contacts(&points);
            for (anchor, dir) in rotation_axes(&contact.contacts) {
                for sign in [1.0, -1.0] {
                    let r = rot_axis_angle(&dir, sign * p.settle_dtheta);
                    let t = anchor.coords - r * anchor.coords;
                    candidates.push(RigidTransform::new(r, t));
                }
            }
            let mut best: Option<(f64, RigidTransform)> = None;
            for m in &candidates {
                let cz_new = m.apply(&c_cur).z;
                let drop = c_cur.z - cz_new;
                if drop <= p.settle_eps {
                    continue;
                }
                if let Some((best_drop, _)) = best {
                    if drop <= best_drop {
                        continue;
                    }
                }
                let moved = transform_cloud(&points, m);
                if self.motion_admissible(&points, &moved) {
                    best = Some((drop, *m));
                }
            }
            match best {
                Some((_, m)) => {
                    points = transform_cloud(&points, &m);
                    t_cur = m.compose(&t_cur);
                    iterations += 1;
                }
                None => break,
            }
        }

        let c_end = centroid(&points);
        debug_assert!(c_end.z <= c_start.z + 1e-12, "settle must not climb");
        Ok(SettleOutcome {
            pose: transform_to_pose(&t_cur),
            displacement: (c_end - c_start).norm(),
            rotation: rotation_angle(&r_start, &t_cur.r),
            iterations,
        })
    }

    /// Categorize a pose and compute its weighted score.
    ///
    /// Penetrating poses skip the settle probe (settling from inside the
    /// support is undefined); separated poses score s_stab = 0; contact
    /// poses are settled and the stability score decays with the probe's
    /// displacement and rotation.
    pub fn classify(
        &self,
        object_initial: &[Point3<f64>],
        pose: &Pose6D,
        weights: &ScoreWeights,
    ) -> Result<StabilityReport, StabilityError> {
        let t = pose_to_transform(pose);
        let points = transform_cloud(object_initial, &t);
        self.classify_points(object_initial, pose, &points, weights)
    }

    pub(crate) fn classify_points(
        &self,
        object_initial: &[Point3<f64>],
        pose: &Pose6D,
        points: &[Point3<f64>],
        weights: &ScoreWeights,
    ) -> Result<StabilityReport, StabilityError> {
        let p = &self.params;
        let frac = self.penetration_fraction(points);
        let s_pen = (1.0 - frac / p.pen_ref).max(0.0);
        let contact = self.contacts(points);
        let ramp = |margin: f64| -> f64 {
            if margin == f64::NEG_INFINITY {
                0.0
            } else {
                (1.0 + margin / p.m_ref).clamp(0.0, 1.0)
            }
        };
        if frac > p.pen_tol {
            let s_stab = if contact.contacts.is_empty() {
                0.0
            } else {
                ramp(contact.margin)
            };
            return Ok(StabilityReport {
                category: Category::Penetration,
                s_pen,
                s_stab,
                score: weights.alpha * s_stab + weights.beta * s_pen,
                settle_displacement: 0.0,
                settle_rotation: 0.0,
                margin: contact.margin,
                pen_fraction: frac,
                afforded_by_support: contact.afforded_by_support,
            });
        }
        if contact.contacts.is_empty() {
            return Ok(StabilityReport {
                category: Category::Separation,
                s_pen,
                s_stab: 0.0,
                score: weights.beta * s_pen,
                settle_displacement: 0.0,
                settle_rotation: 0.0,
                margin: f64::NEG_INFINITY,
                pen_fraction: frac,
                afforded_by_support: false,
            });
        }
        let probe = self.settle(object_initial, pose)?;
        let stable = probe.displacement <= p.stable_disp && probe.rotation <= p.stable_rot;
        let decay =
            (-(probe.displacement / p.stable_disp) - probe.rotation / p.stable_rot).exp();
        let s_stab = ramp(contact.margin) * decay;
        Ok(StabilityReport {
            category: if stable {
                Category::Stable
            } else {
                Category::UnstableContact
            },
            s_pen,
            s_stab,
            score: weights.alpha * s_stab + weights.beta * s_pen,
            settle_displacement: probe.displacement,
            settle_rotation: probe.rotation,
            margin: contact.margin,
            pen_fraction: frac,
            afforded_by_support: contact.afforded_by_support,
        })
    }
}

/// Tilt axes for the settle probe: one horizontal axis per contact-hull
/// edge, anchored at the edge's 3D midpoint. Degenerate hulls fall back to
/// the two world axes through the contact (single point) or the segment
/// direction plus its horizontal perpendicular (two points).
fn rotation_axes(contacts: &[Point3<f64>]) -> Vec<(Point3<f64>, Vector3<f64>)> {
    if contacts.is_empty() {
        return Vec::new();
    }
    let hull = convex_hull_2d(contacts);
    match hull.len() {
        1 => {
            let a = contacts[hull[0].2];
            vec![(a, Vector3::x()), (a, Vector3::y())]
        }
        2 => {
            let a = contacts[hull[0].2];
            let b = contacts[hull[1].2];
            let mid = Point3::from((a.coords + b.coords) / 2.0);
            let mut dir = Vector3::new(b.x - a.x, b.y - a.y, 0.0);
            if dir.norm() < 1e-12 {
                dir = Vector3::x();
            } else {
                dir.normalize_mut();
            }
            let perp = Vector3::new(-dir.y, dir.x, 0.0);
            vec![(mid, dir), (mid, perp)]
        }
        n => {
            let mut axes = Vec::with_capacity(n);
            for i in 0..n {
                let a = contacts[hull[i].2];
                let b = contacts[hull[(i + 1) % n].2];
                let mut dir = Vector3::new(b.x - a.x, b.y - a.y, 0.0);
                if dir.norm() < 1e-12 {
                    continue;
                }
                dir.normalize_mut();
                let mid = Point3::from((a.coords + b.coords) / 2.0);
                axes.push((mid, dir));
            }
            axes
        }
    }
}

/// One-off convenience wrappers over [`StabilityContext`].
pub fn settle(
    scene: &SegmentedScene,
    pose: &Pose6D,
    params: StabilityParams,
) -> Result<SettleOutcome, StabilityError> {
    let ctx = StabilityContext::new(scene, params)?;
    ctx.settle(&scene.object_points(), pose)
}

pub fn classify_and_score(
    scene: &SegmentedScene,
    pose: &Pose6D,
    weights: &ScoreWeights,
    params: StabilityParams,
) -> Result<StabilityReport, StabilityError> {
    let ctx = StabilityContext::new(scene, params)?;
    ctx.classify(&scene.object_points(), pose, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::{sample_box, sample_cylinder};
    use approx::assert_relative_eq;

    fn hollow_unit_box(spacing: f64) -> Vec<Point3<f64>> {
        sample_box(
            Point3::new(0.0, 0.0, 0.5),
            Vector3::new(0.5, 0.5, 0.5),
            spacing,
        )
    }

    #[test]
    fn occupancy_interior_matches_volume() {
        let shell = hollow_unit_box(0.01);
        let grid = build_occupancy(&shell, 0.02).unwrap();
        let interior = grid.interior_count();
        assert!(interior > 0);
        let vol = interior as f64 * 0.02f64.powi(3);
        // enclosed volume shrinks by roughly one voxel layer per side
        let expect = (1.0 - 2.0 * 0.02f64).powi(3);
        assert!(
            (vol - expect).abs() / expect < 0.20,
            "volume {vol} vs {expect}"
        );
    }

    #[test]
    fn occupancy_flat_support_has_no_interior() {
        let mut plane = Vec::new();
        for i in 0..40 {
            for j in 0..40 {
                plane.push(Point3::new(i as f64 * 0.01, j as f64 * 0.01, 0.0));
            }
        }
        let grid = build_occupancy(&plane, 0.02).unwrap();
        assert_eq!(grid.interior_count(), 0);
    }

    #[test]
    fn occupancy_rejects_bad_voxel() {
        let shell = hollow_unit_box(0.05);
        assert!(matches!(
            build_occupancy(&shell, 1.0),
            Err(StabilityError::BadVoxel { .. })
        ));
        assert!(matches!(
            build_occupancy(&shell[..4].to_vec(), 0.02),
            Err(StabilityError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn penetration_report_cases() {
        let shell = hollow_unit_box(0.01);
        let grid = build_occupancy(&shell, 0.02).unwrap();
        // far outside
        let out = vec![Point3::new(5.0, 5.0, 5.0)];
        assert_eq!(penetration_report(&out, &grid), (0.0, 0.0));
        // all interior
        let center = vec![Point3::new(0.0, 0.0, 0.5)];
        let (f, d) = penetration_report(&center, &grid);
        assert_relative_eq!(f, 1.0);
        assert!(d > 0.0);
        // constructed 10%: 1 of 10 points inside
        let mut mixed = vec![Point3::new(0.0, 0.0, 0.5)];
        for i in 0..9 {
            mixed.push(Point3::new(3.0 + i as f64, 0.0, 0.0));
        }
        let (f, _) = penetration_report(&mixed, &grid);
        assert_relative_eq!(f, 0.1);
    }

    #[test]
    fn penetration_monotone_with_depth() {
        let shell = hollow_unit_box(0.01);
        let grid = build_occupancy(&shell, 0.02).unwrap();
        // small cloud lowered into the box through the top
        let probe: Vec<Point3<f64>> = (0..5)
            .flat_map(|i| {
                (0..5).map(move |j| {
                    Point3::new(-0.1 + i as f64 * 0.05, -0.1 + j as f64 * 0.05, 0.0)
                })
            })
            .collect();
        let mut last = -1.0;
        for step in 0..5 {
            let dz = 1.2 - 0.15 * step as f64;
            let moved: Vec<_> = probe
                .iter()
                .map(|p| Point3::new(p.x, p.y, p.z + dz))
                .collect();
            let (f, _) = penetration_report(&moved, &grid);
            assert!(f >= last, "fraction must not decrease: {f} < {last}");
            last = f;
        }
        assert!(last > 0.0);
    }

    #[test]
    fn margin_centered_patch() {
        // unit-square contact patch resting on the table plane
        let mut object = Vec::new();
        for i in 0..11 {
            for j in 0..11 {
                object.push(Point3::new(
                    i as f64 * 0.1 - 0.5,
                    j as f64 * 0.1 - 0.5,
                    0.0,
                ));
            }
        }
        // support far away so it plays no role
        let support = vec![Point3::new(10.0, 10.0, 0.0), Point3::new(10.1, 10.0, 0.0)];
        let m = support_margin(&object, &support, 0.0, 0.01);
        assert_relative_eq!(m.margin, 0.5, epsilon = 1e-9);
        assert!(!m.afforded_by_support);

        // centroid exactly over the hull edge: add mass so centroid sits on x = 0.5
        let mut overhang = object.clone();
        for i in 0..110 {
            overhang.push(Point3::new(
                0.5 + (i % 11) as f64 * 0.1,
                (i / 11) as f64 * 0.1 - 0.5,
                0.5,
            ));
        }
        let m2 = support_margin(&overhang, &support, 0.0, 0.01);
        assert!(m2.margin.abs() < 0.06, "near-edge margin, got {}", m2.margin);
    }

    #[test]
    fn margin_outside_hull_is_negative() {
        // contacts form a small square; the bulk of mass hangs to +x
        let mut object = Vec::new();
        for i in 0..6 {
            for j in 0..6 {
                object.push(Point3::new(
                    i as f64 * 0.02,
                    j as f64 * 0.02,
                    0.0,
                ));
            }
        }
        // heavy overhang: centroid lands 0.1 beyond the patch's +x edge
        let n_over = object.len();
        let patch_max_x = 0.10;
        // place overhang so overall centroid_x = patch_max_x + 0.1
        let cx_patch = 0.05;
        let target = patch_max_x + 0.1;
        let over_x = 2.0 * target - cx_patch;
        for i in 0..n_over {
            object.push(Point3::new(over_x, (i % 6) as f64 * 0.02, 0.3));
        }
        let support = vec![Point3::new(10.0, 10.0, 0.0), Point3::new(10.1, 10.0, 0.0)];
        let m = support_margin(&object, &support, 0.0, 0.005);
        assert_relative_eq!(m.margin, -0.1, epsilon = 1e-6);
        // no contacts at all -> -inf sentinel
        let afloat: Vec<_> = object.iter().map(|p| Point3::new(p.x, p.y, p.z + 1.0)).collect();
        let m3 = support_margin(&afloat, &support, 0.0, 0.005);
        assert_eq!(m3.margin, f64::NEG_INFINITY);
    }

    fn desk_scene() -> (Vec<Point3<f64>>, StabilityContext) {
        // support: solid-ish step (box) 0.1 tall; object: 6 cm cube cloud
        let support = sample_box(
            Point3::new(0.0, 0.0, 0.05),
            Vector3::new(0.075, 0.075, 0.05),
            0.004,
        );
        let object = sample_box(Point3::origin(), Vector3::new(0.03, 0.03, 0.03), 0.006);
        let ctx = StabilityContext::from_support(support, StabilityParams::default()).unwrap();
        (object, ctx)
    }

    #[test]
    fn settle_flat_cube_on_table_is_equilibrium() {
        let (object, ctx) = desk_scene();
        // cube resting on the table, far from the support
        let pose = Pose6D::new(Vector3::new(0.4, 0.0, 0.03), Vector3::zeros());
        let out = ctx.settle(&object, &pose).unwrap();
        assert!(out.displacement <= 1e-6, "displacement {}", out.displacement);
        assert!(out.rotation <= 1e-6, "rotation {}", out.rotation);
    }

    #[test]
    fn settle_floating_cube_drops_to_contact() {
        let (object, ctx) = desk_scene();
        let pose = Pose6D::new(Vector3::new(0.4, 0.0, 0.08), Vector3::zeros());
        let out = ctx.settle(&object, &pose).unwrap();
        assert!(
            (out.displacement - 0.05).abs() <= 0.01,
            "displacement {}",
            out.displacement
        );
        assert!(out.rotation.to_degrees() < 2.0);
    }

    #[test]
    fn settle_overhanging_cube_topples() {
        let (object, ctx) = desk_scene();
        // cube on top of the step with its centroid 1 mm past the +x edge
        let pose = Pose6D::new(Vector3::new(0.075 + 0.001, 0.0, 0.1305), Vector3::zeros());
        let out = ctx.settle(&object, &pose).unwrap();
        assert!(
            out.rotation.to_degrees() > 10.0,
            "expected topple, rotated {}°",
            out.rotation.to_degrees()
        );
    }

    #[test]
    fn settle_rejects_buried_pose() {
        let (object, ctx) = desk_scene();
        let pose = Pose6D::new(Vector3::new(0.0, 0.0, 0.05), Vector3::zeros());
        assert!(matches!(
            ctx.settle(&object, &pose),
            Err(StabilityError::InitialPenetration { .. })
        ));
    }

    #[test]
    fn classify_categories() {
        let (object, ctx) = desk_scene();
        let w = ScoreWeights::default();
        // floating pose: separation, score = beta * s_pen
        let float = Pose6D::new(Vector3::new(0.4, 0.0, 0.3), Vector3::zeros());
        let rep = ctx.classify(&object, &float, &w).unwrap();
        assert_eq!(rep.category, Category::Separation);
        assert_relative_eq!(rep.s_stab, 0.0);
        assert_relative_eq!(rep.score, 0.5 * rep.s_pen, epsilon = 1e-12);
        assert_relative_eq!(rep.s_pen, 1.0);

        // seated on table: stable, s_pen = 1, high score
        let seated = Pose6D::new(Vector3::new(0.4, 0.0, 0.03), Vector3::zeros());
        let rep = ctx.classify(&object, &seated, &w).unwrap();
        assert_eq!(rep.category, Category::Stable);
        assert_relative_eq!(rep.s_pen, 1.0);
        assert!(rep.score >= 0.99, "score {}", rep.score);

        // buried: penetration
        let buried = Pose6D::new(Vector3::new(0.0, 0.0, 0.05), Vector3::zeros());
        let rep = ctx.classify(&object, &buried, &w).unwrap();
        assert_eq!(rep.category, Category::Penetration);
        assert!(rep.s_pen < 1.0);
    }

    #[test]
    fn classify_is_idempotent_at_settled_pose() {
        let (object, ctx) = desk_scene();
        let pose = Pose6D::new(Vector3::new(0.4, 0.0, 0.055), Vector3::zeros());
        let settled = ctx.settle(&object, &pose).unwrap();
        let again = ctx.settle(&object, &settled.pose).unwrap();
        assert!(again.displacement <= 1e-6);
        assert!(again.rotation <= 1e-6);
    }

    #[test]
    fn settle_on_support_top_never_climbs_and_stays_clean() {
        let (object, ctx) = desk_scene();
        // drop onto the step top
        let pose = Pose6D::new(Vector3::new(0.0, 0.0, 0.2), Vector3::zeros());
        let out = ctx.settle(&object, &pose).unwrap();
        let t = pose_to_transform(&out.pose);
        let pts = transform_cloud(&object, &t);
        assert!(ctx.penetration_fraction(&pts) <= ctx.params.max_pen);
        // came to rest near the step top (z centroid ~ 0.13)
        let c = centroid(&pts);
        assert!(
            (c.z - 0.13).abs() < 0.012,
            "resting height off: {}",
            c.z
        );
    }

    #[test]
    fn rod_settles_across_slot_rims() {
        // two parallel rails with a 3 cm gap; rod lies across them
        let mut support = sample_box(
            Point3::new(-0.03, 0.0, 0.025),
            Vector3::new(0.015, 0.06, 0.025),
            0.004,
        );
        support.extend(sample_box(
            Point3::new(0.03, 0.0, 0.025),
            Vector3::new(0.015, 0.06, 0.025),
            0.004,
        ));
        let ctx = StabilityContext::from_support(support, StabilityParams::default()).unwrap();
        let rod = sample_cylinder(Point3::new(0.0, 0.0, -0.06), 0.008, 0.12, 0.004);
        // rod axis along x (rotate the upright rod by 90° about y), above the gap
        let pose = Pose6D::new(
            Vector3::new(0.0, 0.0, 0.08),
            Vector3::new(0.0, std::f64::consts::FRAC_PI_2, 0.0),
        );
        let out = ctx.settle(&rod, &pose).unwrap();
        let pts = transform_cloud(&rod, &pose_to_transform(&out.pose));
        let m = ctx.contacts(&pts);
        assert!(m.afforded_by_support, "rod should rest on the rails");
        // contacts on both rails
        let left = m.contacts.iter().any(|p| p.x < -0.01);
        let right = m.contacts.iter().any(|p| p.x > 0.01);
        assert!(left && right, "contacts must span the gap");
    }
}
