//! Table hull and prism extrusion: which points of a cloud sit on top of
//! the support surface.

use graspcloud::geometry::{
    convex_hull_on_plane, points_in_prism, ransac_plane, ExtrusionParams, Prism, RansacParams,
};
use nalgebra::Point3;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut points = Vec::new();
    // a 1 m x 1 m table on z = 0 sampled every 2 cm
    for i in 0..=50 {
        for j in 0..=50 {
            points.push(Point3::new(
                -0.5 + 0.02 * i as f64,
                -0.5 + 0.02 * j as f64,
                0.0,
            ));
        }
    }
    let table = points.len();
    // two stacks of points above the table and one beside it
    for k in 1..=10 {
        let h = 0.01 * k as f64;
        points.push(Point3::new(0.1, 0.1, h));
        points.push(Point3::new(-0.2, 0.3, h));
        points.push(Point3::new(0.9, 0.0, h));
    }

    let fit = ransac_plane(&points, &RansacParams::default())?;
    let mut fit = fit;
    if fit.plane.normal.z < 0.0 {
        fit.plane = fit.plane.flipped();
    }
    let hull = convex_hull_on_plane(&points, &fit)?;
    println!(
        "plane inliers {} of {table} table points",
        fit.inlier_indices.len()
    );
    println!(
        "hull: {} vertices, area {:.3} m^2",
        hull.vertices().len(),
        hull.area()
    );

    let prism = Prism::new(hull, fit.plane, ExtrusionParams::default())?;
    let inside = points_in_prism(&points, &prism);
    println!("{} points inside the prism (expected 20)", inside.len());
    for &i in inside.iter().take(4) {
        println!("  {:?}", points[i].coords.as_slice());
    }
    Ok(())
}
