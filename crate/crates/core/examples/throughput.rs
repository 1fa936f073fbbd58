//! Latency benchmark against the 33.3 ms per-frame budget, with the
//! per-stage breakdown.
//!
//! cargo run --release --example throughput -- [frames] [width] [height]

use graspcloud::harness::bench;
use graspcloud::PipelineConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<usize>());
    let frames = args.next().transpose()?.unwrap_or(100);
    let width = args.next().transpose()?.unwrap_or(800);
    let height = args.next().transpose()?.unwrap_or(600);

    let report = bench(frames, width, height, 0, &PipelineConfig::default())?;
    println!(
        "{frames} frames at {width}x{height}, median {} points",
        report.median_points
    );
    for (stage, p) in &report.stages {
        println!("  {stage:<10} p50 {:>7.3} ms  p95 {:>7.3} ms", p.p50, p.p95);
    }
    println!(
        "end to end p50 {:.2} ms, p95 {:.2} ms, {:.1} fps, budget {} ms: {}",
        report.end_to_end.p50,
        report.end_to_end.p95,
        report.fps,
        report.budget_ms,
        if report.pass { "met" } else { "missed" }
    );
    Ok(())
}
