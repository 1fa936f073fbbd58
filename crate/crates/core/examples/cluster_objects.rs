//! Grid-accelerated DBSCAN separating three blobs and scattered noise.

use graspcloud::geometry::{dbscan, Assignment};
use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let centers = [[0.0, 0.0, 0.5], [0.15, 0.0, 0.5], [0.0, 0.2, 0.45]];
    let mut points = Vec::new();
    for c in centers {
        for _ in 0..400 {
            points.push(Point3::new(
                c[0] + rng.random_range(-0.03..0.03),
                c[1] + rng.random_range(-0.03..0.03),
                c[2] + rng.random_range(-0.03..0.03),
            ));
        }
    }
    for _ in 0..30 {
        points.push(Point3::new(
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(0.0..1.0),
        ));
    }

    let clustering = dbscan(&points, 0.02, 10);
    println!(
        "{} clusters, {} noise points",
        clustering.cluster_count(),
        clustering.noise_count()
    );
    for (id, members) in clustering.members().iter().enumerate() {
        let n = members.len() as f64;
        let c = members.iter().fold([0.0; 3], |acc, &i| {
            [
                acc[0] + points[i].x / n,
                acc[1] + points[i].y / n,
                acc[2] + points[i].z / n,
            ]
        });
        println!(
            "  cluster {id}: {} points around ({:.3}, {:.3}, {:.3})",
            members.len(),
            c[0],
            c[1],
            c[2]
        );
    }
    let first_noise = clustering
        .assignments()
        .iter()
        .position(|a| *a == Assignment::Noise);
    println!("first noise index: {first_noise:?}");
}
