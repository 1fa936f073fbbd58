//! PCA oriented bounding box of a rotated box surface sample.

use graspcloud::geometry::pca_obb;
use nalgebra::{Point3, Rotation3, Vector3};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let half = [0.05, 0.02, 0.03];
    let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), 35f64.to_radians());
    let offset = Vector3::new(0.1, -0.05, 0.6);
    let steps = 20;
    let mut points = Vec::new();
    for i in 0..=steps {
        for j in 0..=steps {
            for k in 0..=steps {
                let f = |n: usize, h: f64| -h + 2.0 * h * n as f64 / steps as f64;
                let p = Vector3::new(f(i, half[0]), f(j, half[1]), f(k, half[2]));
                points.push(Point3::from(rot * p + offset));
            }
        }
    }

    let obb = pca_obb(&points)?;
    println!("center       {:.4?}", obb.center.coords.as_slice());
    for (axis, h) in obb.axes.iter().zip(obb.half_extents) {
        println!("axis {:>7.4?}  half extent {:.4} m", axis.as_slice(), h);
    }
    let all_inside = points.iter().all(|p| obb.contains(p, 1e-9));
    println!("every input point inside: {all_inside}");
    Ok(())
}
