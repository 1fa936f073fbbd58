//! End-to-end detection on a rendered frame with three primitives. With no
//! category scores every object is grasped across its bounding box.

use graspcloud::grasp::detect_frame;
use graspcloud::harness::{synth_scene, ObjectSpec, SceneSpec, Shape};
use graspcloud::PipelineConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut spec = SceneSpec::single(Shape::Cuboid {
        length: 0.10,
        width: 0.04,
        height: 0.06,
    });
    spec.camera.height = 0.7;
    spec.objects[0].position = [0.0, 0.0];
    spec.objects[0].yaw_deg = 25.0;
    spec.objects.push(ObjectSpec {
        shape: Shape::Sphere { radius: 0.035 },
        position: [0.12, 0.07],
        yaw_deg: 0.0,
    });
    spec.objects.push(ObjectSpec {
        shape: Shape::Cylinder {
            radius: 0.025,
            length: 0.14,
            lying: true,
        },
        position: [-0.12, -0.06],
        yaw_deg: -40.0,
    });
    let synth = synth_scene(&spec)?;

    let det = detect_frame(
        &synth.frame,
        &synth.intrinsics,
        None,
        &PipelineConfig::default(),
    )?;
    println!(
        "{} points, {} objects, {:.2} ms",
        det.cloud.len(),
        det.scene.objects.len(),
        det.timings.total()
    );
    for o in &det.scene.objects {
        let truth = synth
            .truth
            .objects
            .iter()
            .min_by(|a, b| {
                let da = (a.reference_center - o.grasp.midpoint()).norm();
                let db = (b.reference_center - o.grasp.midpoint()).norm();
                da.total_cmp(&db)
            })
            .expect("scene has objects");
        println!(
            "object {} ({:>8}): width {:.2} mm, truth {:.2} mm, {} points",
            o.id,
            truth.kind,
            o.grasp.pair_distance * 1e3,
            truth.pair_distance * 1e3,
            o.indices.len()
        );
    }
    Ok(())
}
