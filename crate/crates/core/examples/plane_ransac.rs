//! Seeded RANSAC on a noisy tilted plane with a large share of outliers,
//! followed by the total-least-squares refit it already performs.

use graspcloud::geometry::{ransac_plane, Plane, RansacParams};
use nalgebra::{Point2, Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = Plane::new(Vector3::new(0.2, -0.9, -0.3), 0.7).expect("nonzero normal");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, 0.001)?;

    let mut points: Vec<Point3<f64>> = (0..1000)
        .map(|_| {
            let q = Point2::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
            truth.lift(&q) + truth.normal * noise.sample(&mut rng)
        })
        .collect();
    for _ in 0..430 {
        points.push(Point3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ));
    }

    let fit = ransac_plane(
        &points,
        &RansacParams {
            seed: 42,
            ..Default::default()
        },
    )?;
    let aligned = if fit.plane.normal.dot(&truth.normal) < 0.0 {
        fit.plane.flipped()
    } else {
        fit.plane
    };
    let angle = aligned.normal.angle(&truth.normal).to_degrees();
    let recall = fit.inlier_indices.iter().filter(|&&i| i < 1000).count() as f64 / 1000.0;

    println!("normal error  {angle:.4} deg");
    println!("offset error  {:.3} mm", (aligned.d - truth.d).abs() * 1e3);
    println!(
        "inliers       {} (recall {:.1}%)",
        fit.inlier_indices.len(),
        recall * 100.0
    );
    println!("iterations    {}", fit.iterations_run);
    Ok(())
}
