//! Deterministic surface samplers for procedural desk-scale geometry.
//!
//! All samplers are RNG-free: points come from cell-centered grids over each
//! face, so a given shape always produces the same cloud. `spacing` is the
//! target inter-point distance; a surface of area A yields roughly
//! A / spacing² points.

use nalgebra::{Point3, Vector3};

/// Cell-centered 1D grid over [-half, half].
fn axis_grid(len: f64, spacing: f64) -> Vec<f64> {
    let n = ((len / spacing).round() as usize).max(1);
    (0..n)
        .map(|i| (i as f64 + 0.5) / n as f64 * len - len / 2.0)
        .collect()
}

/// All six faces of an axis-aligned box.
pub fn sample_box(center: Point3<f64>, half: Vector3<f64>, spacing: f64) -> Vec<Point3<f64>> {
    let mut out = Vec::new();
    let (hx, hy, hz) = (half.x, half.y, half.z);
    // ±z faces
    for &z in &[-hz, hz] {
        for &x in &axis_grid(2.0 * hx, spacing) {
            for &y in &axis_grid(2.0 * hy, spacing) {
                out.push(center + Vector3::new(x, y, z));
            }
        }
    }
    // ±y faces
    for &y in &[-hy, hy] {
        for &x in &axis_grid(2.0 * hx, spacing) {
            for &z in &axis_grid(2.0 * hz, spacing) {
                out.push(center + Vector3::new(x, y, z));
            }
        }
    }
    // ±x faces
    for &x in &[-hx, hx] {
        for &y in &axis_grid(2.0 * hy, spacing) {
            for &z in &axis_grid(2.0 * hz, spacing) {
                out.push(center + Vector3::new(x, y, z));
            }
        }
    }
    out
}

/// Lateral surface of an upright cylinder; `bottom` is the axis point at the
/// lower cap.
pub fn sample_cylinder_lateral(
    bottom: Point3<f64>,
    radius: f64,
    height: f64,
    spacing: f64,
) -> Vec<Point3<f64>> {
    let n_theta = (((2.0 * std::f64::consts::PI * radius) / spacing).round() as usize).max(3);
    let mut out = Vec::new();
    for &dz in &axis_grid(height, spacing) {
        let z = bottom.z + height / 2.0 + dz;
        for j in 0..n_theta {
            let th = 2.0 * std::f64::consts::PI * j as f64 / n_theta as f64;
            out.push(Point3::new(
                bottom.x + radius * th.cos(),
                bottom.y + radius * th.sin(),
                z,
            ));
        }
    }
    out
}

/// Flat horizontal annulus (set `r_inner` to 0 for a full disk).
pub fn sample_annulus(
    center: Point3<f64>,
    r_inner: f64,
    r_outer: f64,
    spacing: f64,
) -> Vec<Point3<f64>> {
    let width = r_outer - r_inner;
    if width <= 0.0 {
        return Vec::new();
    }
    let n_r = ((width / spacing).round() as usize).max(1);
    let mut out = Vec::new();
    for i in 0..n_r {
        let r = r_inner + (i as f64 + 0.5) / n_r as f64 * width;
        let n_theta = (((2.0 * std::f64::consts::PI * r) / spacing).round() as usize).max(1);
        for j in 0..n_theta {
            let th = 2.0 * std::f64::consts::PI * j as f64 / n_theta as f64;
            out.push(Point3::new(
                center.x + r * th.cos(),
                center.y + r * th.sin(),
                center.z,
            ));
        }
    }
    out
}

/// Closed cylinder: lateral surface plus both caps.
pub fn sample_cylinder(
    bottom: Point3<f64>,
    radius: f64,
    height: f64,
    spacing: f64,
) -> Vec<Point3<f64>> {
    let mut out = sample_cylinder_lateral(bottom, radius, height, spacing);
    out.extend(sample_annulus(bottom, 0.0, radius, spacing));
    out.extend(sample_annulus(
        Point3::new(bottom.x, bottom.y, bottom.z + height),
        0.0,
        radius,
        spacing,
    ));
    out
}

/// Open-topped vessel: outer wall, inner wall, outer bottom, cavity floor,
/// and the top rim ring. The cavity stays connected to the outside, so a
/// flood fill only closes off the wall material itself.
pub fn sample_beaker(
    bottom: Point3<f64>,
    r_outer: f64,
    wall: f64,
    height: f64,
    floor: f64,
    spacing: f64,
) -> Vec<Point3<f64>> {
    let r_inner = r_outer - wall;
    let mut out = sample_cylinder_lateral(bottom, r_outer, height, spacing);
    let cavity_bottom = Point3::new(bottom.x, bottom.y, bottom.z + floor);
    out.extend(sample_cylinder_lateral(
        cavity_bottom,
        r_inner,
        height - floor,
        spacing,
    ));
    out.extend(sample_annulus(bottom, 0.0, r_outer, spacing));
    out.extend(sample_annulus(cavity_bottom, 0.0, r_inner, spacing));
    out.extend(sample_annulus(
        Point3::new(bottom.x, bottom.y, bottom.z + height),
        r_inner,
        r_outer,
        spacing,
    ));
    out
}
