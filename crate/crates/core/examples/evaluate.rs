//! Accuracy evaluation over seeded primitive scenes, with and without
//! depth noise.
//!
//! cargo run --release --example evaluate -- [scene count]

use graspcloud::harness::{primitive_scenes, run_eval, EvalConfig, NoiseModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let count = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(20);
    let noises = [
        ("noiseless", NoiseModel::default()),
        (
            "sigma 2 mm + 0.5% outliers",
            NoiseModel {
                depth_sigma: 0.002,
                outlier_fraction: 0.005,
            },
        ),
    ];
    for (label, noise) in noises {
        let report = run_eval(&primitive_scenes(count, 7, noise), &EvalConfig::default())?;
        println!(
            "{label}: {} frames, {} failed, {} missed, {} spurious",
            report.frames, report.failed_frames, report.missed_objects, report.spurious_detections
        );
        for (kind, s) in &report.per_kind {
            println!(
                "  {kind:<15} n={:<3} rmse {:.3} mm  std {:.3} mm",
                s.count,
                s.rmse * 1e3,
                s.std * 1e3
            );
        }
        if let Some(s) = report.overall {
            println!("  overall         rmse {:.3} mm", s.rmse * 1e3);
        }
        println!(
            "  median frame latency {:.2} ms",
            report.timing.map(|t| t.end_to_end.p50).unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
