//! Segmented point-cloud scenes and rigid-motion primitives.
//!
//! Everything downstream (stability scoring, grasp planning, graph building)
//! works in a single world frame: the origin sits at the center of the
//! support's bottom face, z points up. Scenes loaded from `.pts` files are
//! re-anchored to that frame on load.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{Matrix3, Point3, Vector3};
use thiserror::Error;

/// Fixed frame identifier carried by every scene.
pub const SCENE_FRAME: &str = "support_bottom";

/// Header line expected at the top of a `.pts` file.
pub const PTS_HEADER: &str = "# frame=support_bottom units=m";

/// Canonical scene size after per-label resampling.
pub const DEFAULT_SCENE_SIZE: usize = 2048;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene file not found: {0}")]
    MissingFile(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("scene has no points labeled {0}")]
    EmptyClass(&'static str),
    #[error("bad sample count {k} for {len} points")]
    BadCount { k: usize, len: usize },
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Per-point segmentation tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Object = 0,
    Support = 1,
    Table = 2,
}

impl Label {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Label::Object),
            1 => Some(Label::Support),
            2 => Some(Label::Table),
            _ => None,
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Label::Object => "object",
            Label::Support => "support",
            Label::Table => "table",
        };
        f.write_str(s)
    }
}

/// 6-DOF pose: translation in meters plus fixed-axis X-Y-Z Euler angles in
/// radians, each normalized to (-pi, pi].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose6D {
    pub t: Vector3<f64>,
    pub o: Vector3<f64>,
}

/// Wrap an angle into (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let x = a.rem_euclid(2.0 * PI);
    if x > PI {
        x - 2.0 * PI
    } else {
        x
    }
}

impl Pose6D {
    pub fn new(t: Vector3<f64>, o: Vector3<f64>) -> Self {
        Pose6D {
            t,
            o: o.map(normalize_angle),
        }
    }

    pub fn identity() -> Self {
        Pose6D {
            t: Vector3::zeros(),
            o: Vector3::zeros(),
        }
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Pose6D::new(
            Vector3::new(a[0], a[1], a[2]),
            Vector3::new(a[3], a[4], a[5]),
        )
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.t.x, self.t.y, self.t.z, self.o.x, self.o.y, self.o.z]
    }

    pub fn is_finite(&self) -> bool {
        self.t.iter().chain(self.o.iter()).all(|v| v.is_finite())
    }
}

impl serde::Serialize for Pose6D {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> serde::Deserialize<'de> for Pose6D {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let a = <[f64; 6]>::deserialize(d)?;
        if !a.iter().all(|v| v.is_finite()) {
            return Err(serde::de::Error::custom("pose components must be finite"));
        }
        Ok(Pose6D::from_array(a))
    }
}

/// Rotation matrix plus translation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    pub r: Matrix3<f64>,
    pub t: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            r: Matrix3::identity(),
            t: Vector3::zeros(),
        }
    }

    pub fn new(r: Matrix3<f64>, t: Vector3<f64>) -> Self {
        RigidTransform { r, t }
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.r * p.coords + self.t)
    }

    pub fn apply_dir(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.r * v
    }

    /// self ∘ other: apply `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            r: self.r * other.r,
            t: self.r * other.t + self.t,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.r.transpose();
        RigidTransform {
            r: rt,
            t: -(rt * self.t),
        }
    }

    /// R^T R = I and det R = 1, both within `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        let e = self.r.transpose() * self.r - Matrix3::identity();
        e.iter().all(|v| v.abs() <= tol) && (self.r.determinant() - 1.0).abs() <= tol
    }
}

fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Rotation about an arbitrary axis (Rodrigues).
pub fn rot_axis_angle(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let u = axis.normalize();
    let (s, c) = angle.sin_cos();
    let k = Matrix3::new(0.0, -u.z, u.y, u.z, 0.0, -u.x, -u.y, u.x, 0.0);
    Matrix3::identity() + k * s + k * k * (1.0 - c)
}

/// Fixed-axis X-Y-Z convention: R = Rz(γ)·Ry(β)·Rx(α).
pub fn pose_to_transform(p: &Pose6D) -> RigidTransform {
    RigidTransform {
        r: rot_z(p.o.z) * rot_y(p.o.y) * rot_x(p.o.x),
        t: p.t,
    }
}

/// Inverse of [`pose_to_transform`]. Near the β = ±π/2 singularity the
/// α/γ split is not unique; γ is pinned to 0 there.
pub fn transform_to_pose(t: &RigidTransform) -> Pose6D {
    let r = &t.r;
    let sy = -r[(2, 0)];
    let beta = sy.clamp(-1.0, 1.0).asin();
    let cb = (1.0 - sy * sy).max(0.0).sqrt();
    let (alpha, gamma) = if cb > 1e-9 {
        (
            f64::atan2(r[(2, 1)], r[(2, 2)]),
            f64::atan2(r[(1, 0)], r[(0, 0)]),
        )
    } else {
        // gimbal lock: only α ± γ is observable
        (f64::atan2(-r[(1, 2)], r[(1, 1)]), 0.0)
    };
    Pose6D::new(t.t, Vector3::new(alpha, beta, gamma))
}

/// Apply T to every point, preserving order (index i maps to index i).
pub fn transform_cloud(points: &[Point3<f64>], t: &RigidTransform) -> Vec<Point3<f64>> {
    points.iter().map(|p| t.apply(p)).collect()
}

/// Relative rotation taking node-i directions to node-j directions plus the
/// geodesic angle between the two orientations.
pub fn relative_rotation(t_i: &RigidTransform, t_j: &RigidTransform) -> (Matrix3<f64>, f64) {
    let r = t_j.r * t_i.r.transpose();
    let angle = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
    (r, angle)
}

/// Geodesic angle between two rotation matrices.
pub fn rotation_angle(r_a: &Matrix3<f64>, r_b: &Matrix3<f64>) -> f64 {
    let r = r_b * r_a.transpose();
    ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

pub fn centroid(points: &[Point3<f64>]) -> Point3<f64> {
    let mut acc = Vector3::zeros();
    for p in points {
        acc += p.coords;
    }
    Point3::from(acc / points.len().max(1) as f64)
}

/// Greedy max-min subsampling. The first pick is the point nearest the
/// centroid; each next pick maximizes its distance to the selected set.
/// Ties break to the lowest index, so the result is deterministic for a
/// fixed input ordering.
pub fn farthest_point_indices(points: &[Point3<f64>], k: usize) -> Result<Vec<usize>, SceneError> {
    if k == 0 || k > points.len() {
        return Err(SceneError::BadCount {
            k,
            len: points.len(),
        });
    }
    let c = centroid(points);
    let mut first = 0usize;
    let mut best = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d = (p - c).norm_squared();
        if d < best {
            best = d;
            first = i;
        }
    }
    let mut chosen = Vec::with_capacity(k);
    chosen.push(first);
    let mut min_d: Vec<f64> = points
        .iter()
        .map(|p| (p - points[first]).norm_squared())
        .collect();
    while chosen.len() < k {
        let mut next = 0usize;
        let mut best = f64::NEG_INFINITY;
        for (i, &d) in min_d.iter().enumerate() {
            if d > best {
                best = d;
                next = i;
            }
        }
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            let d = (p - points[next]).norm_squared();
            if d < min_d[i] {
                min_d[i] = d;
            }
        }
    }
    Ok(chosen)
}

/// See [`farthest_point_indices`].
pub fn farthest_point_sample(
    points: &[Point3<f64>],
    k: usize,
) -> Result<Vec<Point3<f64>>, SceneError> {
    Ok(farthest_point_indices(points, k)?
        .into_iter()
        .map(|i| points[i])
        .collect())
}

/// Per-point unit normals from the k-nearest-neighbor covariance, oriented
/// away from the cloud centroid.
pub fn estimate_normals(points: &[Point3<f64>], k: usize) -> Result<Vec<Vector3<f64>>, SceneError> {
    if k < 3 || points.len() < k {
        return Err(SceneError::TooFewPoints {
            need: k.max(3),
            got: points.len(),
        });
    }
    let c = centroid(points);
    let mut normals = Vec::with_capacity(points.len());
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        dist.clear();
        for (j, q) in points.iter().enumerate() {
            dist.push(((p - q).norm_squared(), j));
        }
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let neigh = &dist[..k];
        let mut mean = Vector3::zeros();
        for &(_, j) in neigh {
            mean += points[j].coords;
        }
        mean /= k as f64;
        let mut cov = Matrix3::zeros();
        for &(_, j) in neigh {
            let d = points[j].coords - mean;
            cov += d * d.transpose();
        }
        let eig = cov.symmetric_eigen();
        let mut smallest = 0usize;
        for idx in 1..3 {
            if eig.eigenvalues[idx] < eig.eigenvalues[smallest] {
                smallest = idx;
            }
        }
        let mut n: Vector3<f64> = eig.eigenvectors.column(smallest).into();
        let norm = n.norm();
        if norm > 0.0 {
            n /= norm;
        } else {
            n = Vector3::z();
        }
        let radial = p - c;
        if n.dot(&radial) < 0.0 {
            n = -n;
        }
        let _ = i;
        normals.push(n);
    }
    Ok(normals)
}

/// Maximum pairwise distance of the support cloud (the L term of the
/// diversity distance).
pub fn support_diameter(points: &[Point3<f64>]) -> Result<f64, SceneError> {
    if points.len() < 2 {
        return Err(SceneError::TooFewPoints {
            need: 2,
            got: points.len(),
        });
    }
    let mut best = 0.0f64;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let d = (points[i] - points[j]).norm_squared();
            if d > best {
                best = d;
            }
        }
    }
    Ok(best.sqrt())
}

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn of(points: &[Point3<f64>]) -> Aabb {
        let mut min = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut max = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            for i in 0..3 {
                min[i] = min[i].min(p[i]);
                max[i] = max[i].max(p[i]);
            }
        }
        Aabb { min, max }
    }

    pub fn center(&self) -> Point3<f64> {
        Point3::from((self.min.coords + self.max.coords) / 2.0)
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }
}

/// Labeled point cloud in the support-bottom world frame.
#[derive(Clone, Debug)]
pub struct SegmentedScene {
    points: Vec<Point3<f64>>,
    labels: Vec<Label>,
}

impl SegmentedScene {
    /// Validate labels/finiteness and resample to `scene_size` points with
    /// per-label proportional quotas (farthest-point per label; labels whose
    /// count falls short of their quota are padded by cycling the sampled
    /// order).
    pub fn new(
        points: Vec<Point3<f64>>,
        labels: Vec<Label>,
        scene_size: usize,
    ) -> Result<Self, SceneError> {
        assert_eq!(points.len(), labels.len());
        if points
            .iter()
            .any(|p| !p.coords.iter().all(|v| v.is_finite()))
        {
            return Err(SceneError::Parse {
                line: 0,
                msg: "non-finite coordinate".into(),
            });
        }
        let split = |want: Label| -> Vec<Point3<f64>> {
            points
                .iter()
                .zip(&labels)
                .filter(|(_, l)| **l == want)
                .map(|(p, _)| *p)
                .collect()
        };
        let object = split(Label::Object);
        let support = split(Label::Support);
        let table = split(Label::Table);
        if object.is_empty() {
            return Err(SceneError::EmptyClass("object"));
        }
        if support.is_empty() {
            return Err(SceneError::EmptyClass("support"));
        }
        let quotas = proportional_quotas(&[object.len(), support.len(), table.len()], scene_size);
        let mut out_points = Vec::with_capacity(scene_size);
        let mut out_labels = Vec::with_capacity(scene_size);
        for (cls, (label, quota)) in [
            (&object, (Label::Object, quotas[0])),
            (&support, (Label::Support, quotas[1])),
            (&table, (Label::Table, quotas[2])),
        ] {
            if quota == 0 || cls.is_empty() {
                continue;
            }
            let base = farthest_point_indices(cls, quota.min(cls.len()))
                .expect("class verified non-empty");
            for i in 0..quota {
                out_points.push(cls[base[i % base.len()]]);
                out_labels.push(label);
            }
        }
        Ok(SegmentedScene {
            points: out_points,
            labels: out_labels,
        })
    }

    pub fn frame(&self) -> &'static str {
        SCENE_FRAME
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn points_with_label(&self, want: Label) -> Vec<Point3<f64>> {
        self.points
            .iter()
            .zip(&self.labels)
            .filter(|(_, l)| **l == want)
            .map(|(p, _)| *p)
            .collect()
    }

    pub fn object_points(&self) -> Vec<Point3<f64>> {
        self.points_with_label(Label::Object)
    }

    pub fn support_points(&self) -> Vec<Point3<f64>> {
        self.points_with_label(Label::Support)
    }

    pub fn table_points(&self) -> Vec<Point3<f64>> {
        self.points_with_label(Label::Table)
    }

    /// Parse the `.pts` format from any reader. The cloud is re-anchored so
    /// the support AABB's bottom center lands at the origin.
    pub fn parse_pts<R: BufRead>(reader: R, scene_size: usize) -> Result<Self, SceneError> {
        let mut points = Vec::new();
        let mut labels = Vec::new();
        let mut saw_header = false;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if !saw_header {
                if trimmed != PTS_HEADER {
                    return Err(SceneError::Parse {
                        line: idx + 1,
                        msg: format!("expected header `{PTS_HEADER}`"),
                    });
                }
                saw_header = true;
                continue;
            }
            let mut fields = trimmed.split_whitespace();
            let mut coord = [0.0f64; 3];
            for c in &mut coord {
                let tok = fields.next().ok_or_else(|| SceneError::Parse {
                    line: idx + 1,
                    msg: "expected `x y z label`".into(),
                })?;
                *c = tok.parse::<f64>().map_err(|e| SceneError::Parse {
                    line: idx + 1,
                    msg: format!("bad coordinate `{tok}`: {e}"),
                })?;
                if !c.is_finite() {
                    return Err(SceneError::Parse {
                        line: idx + 1,
                        msg: "non-finite coordinate".into(),
                    });
                }
            }
            let tok = fields.next().ok_or_else(|| SceneError::Parse {
                line: idx + 1,
                msg: "missing label".into(),
            })?;
            let raw: u8 = tok.parse().map_err(|e| SceneError::Parse {
                line: idx + 1,
                msg: format!("bad label `{tok}`: {e}"),
            })?;
            let label = Label::from_u8(raw).ok_or_else(|| SceneError::Parse {
                line: idx + 1,
                msg: format!("label {raw} outside {{0,1,2}}"),
            })?;
            if fields.next().is_some() {
                return Err(SceneError::Parse {
                    line: idx + 1,
                    msg: "trailing fields".into(),
                });
            }
            points.push(Point3::new(coord[0], coord[1], coord[2]));
            labels.push(label);
        }
        if !saw_header {
            return Err(SceneError::Parse {
                line: 1,
                msg: format!("expected header `{PTS_HEADER}`"),
            });
        }
        // re-anchor: support bottom center -> origin
        let support: Vec<Point3<f64>> = points
            .iter()
            .zip(&labels)
            .filter(|(_, l)| **l == Label::Support)
            .map(|(p, _)| *p)
            .collect();
        if support.is_empty() {
            return Err(SceneError::EmptyClass("support"));
        }
        let bb = Aabb::of(&support);
        let anchor = Vector3::new(
            (bb.min.x + bb.max.x) / 2.0,
            (bb.min.y + bb.max.y) / 2.0,
            bb.min.z,
        );
        for p in &mut points {
            p.coords -= anchor;
        }
        SegmentedScene::new(points, labels, scene_size)
    }

    pub fn load(path: &Path, scene_size: usize) -> Result<Self, SceneError> {
        let file = std::fs::File::open(path)
            .map_err(|_| SceneError::MissingFile(path.display().to_string()))?;
        Self::parse_pts(std::io::BufReader::new(file), scene_size)
    }

    pub fn write_pts<W: Write>(&self, mut w: W) -> Result<(), SceneError> {
        writeln!(w, "{PTS_HEADER}")?;
        for (p, l) in self.points.iter().zip(&self.labels) {
            writeln!(w, "{} {} {} {}", p.x, p.y, p.z, l.as_u8())?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), SceneError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_pts(&mut f)
    }
}

/// Largest-remainder split of `total` across class counts; non-empty object
/// and support classes always receive at least one slot.
fn proportional_quotas(counts: &[usize; 3], total: usize) -> [usize; 3] {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return [0, 0, 0];
    }
    let mut quotas = [0usize; 3];
    let mut rema = [(0.0f64, 0usize); 3];
    let mut assigned = 0usize;
    for i in 0..3 {
        let exact = counts[i] as f64 * total as f64 / n as f64;
        quotas[i] = exact.floor() as usize;
        rema[i] = (exact - exact.floor(), i);
        assigned += quotas[i];
    }
    let mut order = rema;
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut left = total.saturating_sub(assigned);
    for (_, i) in order {
        if left == 0 {
            break;
        }
        if counts[i] > 0 {
            quotas[i] += 1;
            left -= 1;
        }
    }
    // leftovers when some classes were empty
    while left > 0 {
        let donor = (0..3).max_by_key(|&j| counts[j]).expect("three classes");
        quotas[donor] += 1;
        left -= 1;
    }
    // object (0) and support (1) must survive resampling
    for i in 0..2 {
        if counts[i] > 0 && quotas[i] == 0 {
            let donor = (0..3).max_by_key(|&j| quotas[j]).expect("three classes");
            quotas[donor] -= 1;
            quotas[i] += 1;
        }
    }
    quotas
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn pts(v: &[(f64, f64, f64)]) -> Vec<Point3<f64>> {
        v.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect()
    }

    #[test]
    fn pose_zero_gives_identity() {
        let t = pose_to_transform(&Pose6D::identity());
        assert!(t.is_valid(1e-12));
        assert_eq!(t.t, Vector3::zeros());
        assert_relative_eq!(t.r, Matrix3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn pose_rotation_x_quarter_turn() {
        let p = Pose6D::new(Vector3::zeros(), Vector3::new(FRAC_PI_2, 0.0, 0.0));
        let t = pose_to_transform(&p);
        let out = t.apply(&Point3::new(0.0, 1.0, 0.0));
        assert_relative_eq!(out, Point3::new(0.0, 0.0, 1.0), epsilon = 1e-12);
    }

    #[test]
    fn pose_rotation_z_quarter_turn() {
        let p = Pose6D::new(Vector3::zeros(), Vector3::new(0.0, 0.0, FRAC_PI_2));
        let t = pose_to_transform(&p);
        let out = t.apply(&Point3::new(1.0, 0.0, 0.0));
        assert_relative_eq!(out, Point3::new(0.0, 1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn transform_cloud_identity_and_translation() {
        let cloud = pts(&[(0.0, 0.0, 0.0), (1.0, 2.0, 3.0)]);
        let id = transform_cloud(&cloud, &RigidTransform::identity());
        assert_eq!(id, cloud);
        let shift = RigidTransform::new(Matrix3::identity(), Vector3::new(1.0, 0.0, 0.0));
        let moved = transform_cloud(&cloud[..1].to_vec(), &shift);
        assert_eq!(moved[0], Point3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn transform_inverse_round_trips() {
        let p = Pose6D::new(Vector3::new(0.4, -0.2, 0.9), Vector3::new(0.3, -1.1, 2.0));
        let t = pose_to_transform(&p);
        let cloud = pts(&[(0.1, 0.2, 0.3), (-1.0, 0.5, 2.0), (3.0, -2.0, 0.1)]);
        let back = transform_cloud(&transform_cloud(&cloud, &t), &t.inverse());
        for (a, b) in back.iter().zip(&cloud) {
            assert_relative_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn relative_rotation_cases() {
        let a = pose_to_transform(&Pose6D::new(
            Vector3::zeros(),
            Vector3::new(0.0, 0.0, 30f64.to_radians()),
        ));
        let b = pose_to_transform(&Pose6D::new(
            Vector3::zeros(),
            Vector3::new(0.0, 0.0, FRAC_PI_2),
        ));
        let (r, angle) = relative_rotation(&a, &b);
        assert_relative_eq!(angle, PI / 3.0, epsilon = 1e-12);
        assert_relative_eq!(r, rot_z(PI / 3.0), epsilon = 1e-12);

        let (_, zero) = relative_rotation(&a, &a);
        assert_relative_eq!(zero, 0.0, epsilon = 1e-12);

        let flip = pose_to_transform(&Pose6D::new(Vector3::zeros(), Vector3::new(PI, 0.0, 0.0)));
        let (_, half) = relative_rotation(&flip, &RigidTransform::identity());
        assert_relative_eq!(half, PI, epsilon = 1e-9);
    }

    #[test]
    fn fps_exhaustive_and_errors() {
        let cloud = pts(&[(0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0)]);
        let all = farthest_point_sample(&cloud, 3).unwrap();
        assert_eq!(all.len(), 3);
        for p in &cloud {
            assert!(all.contains(p));
        }
        assert!(matches!(
            farthest_point_sample(&cloud, 0),
            Err(SceneError::BadCount { .. })
        ));
        assert!(matches!(
            farthest_point_sample(&cloud, 4),
            Err(SceneError::BadCount { .. })
        ));
    }

    #[test]
    fn fps_collinear_matches_greedy_oracle() {
        // centroid of {0,1,2,10} is 3.25 -> nearest is x=2; farthest from it is x=10
        let cloud = pts(&[
            (0.0, 0.0, 0.0),
            (1.0, 0.0, 0.0),
            (2.0, 0.0, 0.0),
            (10.0, 0.0, 0.0),
        ]);
        let got = farthest_point_indices(&cloud, 2).unwrap();
        assert_eq!(got, vec![2, 3]);
    }

    #[test]
    fn normals_on_plane_are_vertical() {
        let mut cloud = Vec::new();
        for i in 0..12 {
            for j in 0..12 {
                cloud.push(Point3::new(i as f64 * 0.01, j as f64 * 0.01, 0.0));
            }
        }
        let normals = estimate_normals(&cloud, 8).unwrap();
        for n in &normals {
            assert_relative_eq!(n.norm(), 1.0, epsilon = 1e-9);
            assert!(n.z.abs() > 1.0 - 1e-9);
        }
    }

    #[test]
    fn normals_on_sphere_point_radially() {
        let mut cloud = Vec::new();
        let n_lat = 24;
        let n_lon = 48;
        for i in 1..n_lat {
            let phi = PI * i as f64 / n_lat as f64;
            for j in 0..n_lon {
                let th = 2.0 * PI * j as f64 / n_lon as f64;
                cloud.push(Point3::new(
                    phi.sin() * th.cos(),
                    phi.sin() * th.sin(),
                    phi.cos(),
                ));
            }
        }
        let normals = estimate_normals(&cloud, 16).unwrap();
        let mut good = 0usize;
        for (p, n) in cloud.iter().zip(&normals) {
            let radial = p.coords.normalize();
            if n.dot(&radial).clamp(-1.0, 1.0).acos().to_degrees() < 10.0 {
                good += 1;
            }
        }
        assert!(good as f64 >= 0.95 * cloud.len() as f64);
    }

    #[test]
    fn normals_reject_tiny_k() {
        let cloud = pts(&[(0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0)]);
        assert!(matches!(
            estimate_normals(&cloud, 2),
            Err(SceneError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn diameter_analytic_cases() {
        let cube = pts(&[
            (0., 0., 0.),
            (1., 0., 0.),
            (0., 1., 0.),
            (0., 0., 1.),
            (1., 1., 0.),
            (1., 0., 1.),
            (0., 1., 1.),
            (1., 1., 1.),
        ]);
        assert_relative_eq!(
            support_diameter(&cube).unwrap(),
            3f64.sqrt(),
            epsilon = 1e-12
        );
        let two = pts(&[(0., 0., 0.), (0., 3., 4.)]);
        assert_relative_eq!(support_diameter(&two).unwrap(), 5.0, epsilon = 1e-12);
        assert!(matches!(
            support_diameter(&two[..1].to_vec()),
            Err(SceneError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn scene_resampling_preserves_counts() {
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for i in 0..1024 {
            points.push(Point3::new(i as f64 * 1e-3, 0.0, 0.5));
            labels.push(Label::Object);
        }
        for i in 0..896 {
            points.push(Point3::new(0.0, i as f64 * 1e-3, 0.0));
            labels.push(Label::Support);
        }
        for i in 0..128 {
            points.push(Point3::new(i as f64 * 1e-3, 1.0, 0.0));
            labels.push(Label::Table);
        }
        let scene = SegmentedScene::new(points, labels, 2048).unwrap();
        assert_eq!(scene.len(), 2048);
        assert_eq!(scene.object_points().len(), 1024);
        assert_eq!(scene.support_points().len(), 896);
        assert_eq!(scene.table_points().len(), 128);
    }

    #[test]
    fn scene_requires_object_and_support() {
        let points = pts(&[(0., 0., 0.), (1., 0., 0.)]);
        let labels = vec![Label::Table, Label::Table];
        assert!(matches!(
            SegmentedScene::new(points, labels, 2),
            Err(SceneError::EmptyClass(_))
        ));
    }

    #[test]
    fn pts_rejects_bad_label() {
        let text = format!("{PTS_HEADER}\n0 0 0 7\n");
        let err = SegmentedScene::parse_pts(text.as_bytes(), 16).unwrap_err();
        assert!(matches!(err, SceneError::Parse { .. }));
    }

    #[test]
    fn pts_round_trip_recenters_support() {
        let text =
            format!("{PTS_HEADER}\n0.5 0.5 1.0 0\n1.0 1.0 0.5 1\n2.0 2.0 0.5 1\n0.0 0.0 0.0 2\n");
        let scene = SegmentedScene::parse_pts(text.as_bytes(), 4).unwrap();
        let sup = scene.support_points();
        let bb = Aabb::of(&sup);
        assert_relative_eq!(bb.min.z, 0.0, epsilon = 1e-12);
        assert_relative_eq!((bb.min.x + bb.max.x) / 2.0, 0.0, epsilon = 1e-12);
        let mut buf = Vec::new();
        scene.write_pts(&mut buf).unwrap();
        let again = SegmentedScene::parse_pts(buf.as_slice(), 4).unwrap();
        assert_eq!(scene.points(), again.points());
    }

    #[test]
    fn angle_normalization_boundaries() {
        assert_relative_eq!(normalize_angle(PI), PI);
        assert_relative_eq!(normalize_angle(-PI), PI);
        assert_relative_eq!(normalize_angle(3.0 * PI), PI);
        assert_relative_eq!(normalize_angle(-0.5), -0.5);
        assert_relative_eq!(normalize_angle(2.0 * PI + 0.25), 0.25, epsilon = 1e-12);
    }
}
