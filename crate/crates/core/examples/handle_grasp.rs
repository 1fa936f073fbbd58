//! Handle-mode grasping. One-hot scores from the renderer's labels stand in
//! for a segmentation network; the pipeline extracts the handle points and
//! pinches across the handle instead of the body.

use graspcloud::grasp::{detect_frame, GraspMode};
use graspcloud::harness::{synth_scene, SceneSpec, Shape};
use graspcloud::{PipelineConfig, Scores};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for width in [0.0148, 0.02, 0.025] {
        let mut spec = SceneSpec::single(Shape::Handled {
            body_radius: 0.04,
            body_height: 0.10,
            handle_length: 0.06,
            handle_width: width,
            handle_thickness: 0.008,
        });
        spec.objects[0].position = [-0.07, 0.0];
        spec.objects[0].yaw_deg = 30.0;
        spec.camera.height = 0.4;
        let synth = synth_scene(&spec)?;
        let pixel_scores = Scores::one_hot(&synth.labels);

        let config = PipelineConfig::default();
        let plain = detect_frame(&synth.frame, &synth.intrinsics, None, &config)?;
        let det = detect_frame(
            &synth.frame,
            &synth.intrinsics,
            Some(&pixel_scores),
            &config,
        )?;
        let o = &det.scene.objects[0];
        assert_eq!(o.mode, GraspMode::Complex);
        println!(
            "handle {:.1} mm: complex {:.3} mm from {} handle points (error {:+.3} mm), simple would give {:.1} mm",
            width * 1e3,
            o.grasp.pair_distance * 1e3,
            o.handle_indices.len(),
            (o.grasp.pair_distance - width) * 1e3,
            plain.scene.objects[0].grasp.pair_distance * 1e3,
        );
    }
    Ok(())
}
