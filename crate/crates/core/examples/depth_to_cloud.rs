//! Render a synthetic depth frame, deproject it through the pinhole model
//! and write the labeled cloud as binary PLY.
//!
//! cargo run --release --example depth_to_cloud -- [out.ply]

use graspcloud::cloud::io::{save_cloud, PlyEncoding};
use graspcloud::cloud::{deproject_indexed, edge_mask, validity_filter};
use graspcloud::harness::{synth_scene, SceneSpec, Shape};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "cloud.ply".into());
    let spec = SceneSpec::single(Shape::Sphere { radius: 0.035 });
    let synth = synth_scene(&spec)?;
    let intr = synth.intrinsics;
    println!(
        "frame {}x{}, fx = {:.0} px, {} valid pixels",
        intr.width,
        intr.height,
        intr.fx,
        synth.frame.valid_count()
    );

    let filtered = validity_filter(&synth.frame, intr.depth_scale, 0.1, 2.0);
    let masked = edge_mask(&filtered, 2)?;
    let (cloud, pixels) = deproject_indexed(&masked, &intr)?;
    let labels = pixels.iter().map(|&p| synth.labels[p as usize]).collect();
    let cloud = cloud.with_labels(labels)?;

    let nearest = cloud
        .points()
        .iter()
        .map(|p| p.z)
        .fold(f64::INFINITY, f64::min);
    println!("{} points, nearest z = {:.4} m", cloud.len(), nearest);
    save_cloud(&cloud, &out, PlyEncoding::BinaryLittleEndian)?;
    println!("wrote {out}");
    Ok(())
}
