//! Handle extraction from score rows and the per-category IoU used to grade
//! a segmentation against ground truth.

use graspcloud::segmentation::{extract_handles, iou_report, HandleExtractorParams};
use graspcloud::{CategoryCode, PointCloud, Scores};
use nalgebra::Point3;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    use CategoryCode::{Background as G, Body as B, Handle as H};

    let truth = [G, G, B, B, B, H, H, H];
    let pred = [G, B, B, B, H, H, H, G];
    let report = iou_report(&pred, &truth)?;
    for c in CategoryCode::ALL {
        println!("{:<10} IoU {:.3}", c.name(), report.get(c));
    }

    // 30 points along a bar, the last 12 scored as handle
    let points: Vec<Point3<f64>> = (0..30)
        .map(|i| Point3::new(0.002 * i as f64, 0.0, 0.5))
        .collect();
    let rows = (0..30)
        .map(|i| {
            if i >= 18 {
                [0.1, 0.2, 0.7]
            } else {
                [0.1, 0.8, 0.1]
            }
        })
        .collect();
    let cloud = PointCloud::new(points)?;
    let params = HandleExtractorParams {
        min_handle_points: 10,
        dbscan_min_pts: 0,
        ..Default::default()
    };
    let handle = extract_handles(&cloud, &Scores::new(rows), &params)?;
    println!("handle points {:?}", handle.source_indices);
    println!(
        "handle centroid x = {:.4} m",
        handle.centroid().expect("nonempty").x
    );
    Ok(())
}
