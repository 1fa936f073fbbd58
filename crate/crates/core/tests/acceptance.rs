//! Acceptance criteria 1-8, one PASS/FAIL line each.
//!
//! Runs as a plain binary so the lines are always shown and the throughput
//! measurement has the CPU to itself.

use std::process::Command;
use std::time::Instant;

use graspcloud::geometry::{
    convex_hull_2d, dbscan, pca_obb, ransac_plane, Assignment, Plane, RansacParams,
};
use graspcloud::grasp::rmse_pair_distance;
use graspcloud::harness::{
    bench, handled_scenes, primitive_scenes, run_eval, EvalConfig, NoiseModel, ScoreSource,
};
use graspcloud::intent::Observation;
use graspcloud::segmentation::{extract_handles, iou, HandleExtractorParams};
use graspcloud::{
    CategoryCode, GraspMode, PipelineConfig, PointCloud, Scores, TriggerConfig, TriggerState,
};
use nalgebra::{Point2, Point3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::Value;

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

// ---------------------------------------------------------------- 1

fn plane_recovery() -> Verdict {
    let start = Instant::now();
    let (mut worst_angle, mut worst_offset, mut worst_recall) = (0.0f64, 0.0f64, 1.0f64);
    let noise = Normal::new(0.0, 0.001).unwrap();
    for scene in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + scene);
        let truth = Plane::new(random_unit(&mut rng), rng.random_range(-1.0..1.0)).unwrap();
        let mut points: Vec<Point3<f64>> = (0..1000)
            .map(|_| {
                let q = Point2::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
                truth.lift(&q) + truth.normal * noise.sample(&mut rng)
            })
            .collect();
        // outliers make up 30 % of the cloud
        let centre = truth.lift(&Point2::origin());
        for _ in 0..429 {
            let off = Vector3::new(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
            );
            points.push(centre + off);
        }
        let params = RansacParams {
            seed: scene,
            ..Default::default()
        };
        let Ok(fit) = ransac_plane(&points, &params) else {
            return verdict(false, format!("scene {scene}: no plane"));
        };
        let p = if fit.plane.normal.dot(&truth.normal) < 0.0 {
            fit.plane.flipped()
        } else {
            fit.plane
        };
        worst_angle = worst_angle.max(p.normal.angle(&truth.normal).to_degrees());
        worst_offset = worst_offset.max((p.d - truth.d).abs());
        let recall = fit.inlier_indices.iter().filter(|&&i| i < 1000).count() as f64 / 1000.0;
        worst_recall = worst_recall.min(recall);
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst_angle <= 0.5 && worst_offset <= 1e-3 && worst_recall >= 0.99 && secs < 5.0,
        format!(
            "50 scenes: worst normal {worst_angle:.3} deg (<= 0.5), worst offset {:.3} mm (<= 1), min recall {:.2}% (>= 99), {secs:.2} s (< 5)",
            worst_offset * 1e3,
            worst_recall * 100.0
        ),
    )
}

// ---------------------------------------------------------------- 2

/// Quadratic DBSCAN: core flags from full neighbour counts, clusters grown
/// by breadth-first search from each unvisited core point in index order,
/// borders attached to their lowest-index core neighbour.
fn reference_dbscan(points: &[Point3<f64>], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let near = |i: usize, j: usize| (points[i] - points[j]).norm_squared() <= eps * eps;
    let core: Vec<bool> = (0..n)
        .map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts)
        .collect();
    let mut cluster: Vec<Option<usize>> = vec![None; n];
    let mut next = 0;
    for s in 0..n {
        if !core[s] || cluster[s].is_some() {
            continue;
        }
        let mut queue = std::collections::VecDeque::from([s]);
        cluster[s] = Some(next);
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                if core[j] && cluster[j].is_none() && near(i, j) {
                    cluster[j] = Some(next);
                    queue.push_back(j);
                }
            }
        }
        next += 1;
    }
    (0..n)
        .map(|i| {
            if core[i] {
                cluster[i]
            } else {
                (0..n)
                    .find(|&j| core[j] && near(i, j))
                    .and_then(|j| cluster[j])
            }
        })
        .collect()
}

/// Renumbers cluster labels by order of first appearance.
fn canonical(labels: &[Option<usize>]) -> Vec<Option<usize>> {
    let mut seen: Vec<usize> = Vec::new();
    labels
        .iter()
        .map(|l| {
            l.map(|c| match seen.iter().position(|&x| x == c) {
                Some(k) => k,
                None => {
                    seen.push(c);
                    seen.len() - 1
                }
            })
        })
        .collect()
}

/// O(n^3) hull: `i -> j` is an edge when every other point lies strictly
/// left of it or strictly inside the segment.
fn reference_hull(points: &[Point2<f64>]) -> Option<Vec<Point2<f64>>> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    let n = pts.len();
    let cross = |a: Point2<f64>, b: Point2<f64>, c: Point2<f64>| {
        (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
    };
    let mut next = vec![None; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let edge = (0..n).filter(|&k| k != i && k != j).all(|k| {
                let c = cross(pts[i], pts[j], pts[k]);
                let t = (pts[k] - pts[i]).dot(&(pts[j] - pts[i]));
                c > 0.0 || (c == 0.0 && t > 0.0 && t < (pts[j] - pts[i]).norm_squared())
            });
            if edge {
                next[i] = Some(j);
            }
        }
    }
    let start = (0..n).find(|&i| next[i].is_some())?;
    let mut out = vec![pts[start]];
    let mut cur = next[start]?;
    while cur != start {
        out.push(pts[cur]);
        cur = next[cur]?;
        if out.len() > n {
            return None;
        }
    }
    (out.len() >= 3).then_some(out)
}

fn oracle_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut dbscan_bad = 0;
    for case in 0..100 {
        let n = rng.random_range(1..=500);
        let blobs = rng.random_range(1..6);
        let centres: Vec<Vector3<f64>> = (0..blobs)
            .map(|_| Vector3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        let spread = rng.random_range(0.02..0.2);
        let points: Vec<Point3<f64>> = (0..n)
            .map(|_| {
                let c = centres[rng.random_range(0..blobs)];
                Point3::from(c + Vector3::new(rng.random(), rng.random(), rng.random()) * spread)
            })
            .collect();
        let eps = rng.random_range(0.01..0.08);
        let min_pts = rng.random_range(1..12);
        let got: Vec<Option<usize>> = dbscan(&points, eps, min_pts)
            .assignments()
            .iter()
            .map(|a| match a {
                Assignment::Noise => None,
                Assignment::Cluster(c) => Some(*c),
            })
            .collect();
        if canonical(&got) != canonical(&reference_dbscan(&points, eps, min_pts)) {
            eprintln!("dbscan mismatch in case {case}");
            dbscan_bad += 1;
        }
    }
    let mut hull_bad = 0;
    for case in 0..100 {
        let n = rng.random_range(3..=50);
        // even cases use a coarse integer grid to force duplicates and collinear runs
        let pts: Vec<Point2<f64>> = (0..n)
            .map(|_| {
                if case % 2 == 0 {
                    Point2::new(rng.random_range(0..6) as f64, rng.random_range(0..6) as f64)
                } else {
                    Point2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                }
            })
            .collect();
        let got = convex_hull_2d(&pts).ok().map(|h| h.vertices().to_vec());
        if got != reference_hull(&pts) {
            eprintln!("hull mismatch in case {case}");
            hull_bad += 1;
        }
    }
    verdict(
        dbscan_bad == 0 && hull_bad == 0,
        format!(
            "DBSCAN {}/100 partitions equal, hull {}/100 vertex lists equal",
            100 - dbscan_bad,
            100 - hull_bad
        ),
    )
}

// ---------------------------------------------------------------- 3

fn obb_correctness() -> Verdict {
    let half = [0.07, 0.03, 0.045];
    let steps = [14, 6, 9];
    let mut grid = Vec::new();
    for i in 0..=steps[0] {
        for j in 0..=steps[1] {
            for k in 0..=steps[2] {
                let f = |n: usize, s: usize, h: f64| -h + 2.0 * h * n as f64 / s as f64;
                grid.push(Point3::new(
                    0.2 + f(i, steps[0], half[0]),
                    -0.1 + f(j, steps[1], half[1]),
                    0.5 + f(k, steps[2], half[2]),
                ));
            }
        }
    }
    let base = pca_obb(&grid).unwrap();
    // extents come back sorted largest first
    let sorted = [half[0], half[2], half[1]];
    let extent_err = base
        .half_extents
        .iter()
        .zip(sorted)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let rot =
            Rotation3::new(random_unit(&mut rng) * rng.random_range(0.0..std::f64::consts::PI));
        let shift = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let moved: Vec<Point3<f64>> = grid.iter().map(|p| rot * p + shift).collect();
        let obb = pca_obb(&moved).unwrap();
        worst = worst.max(((rot * base.center + shift) - obb.center).norm());
        for k in 0..3 {
            worst = worst.max((obb.half_extents[k] - base.half_extents[k]).abs());
            let expected = rot * base.axes[k];
            worst = worst.max(
                (obb.axes[k] - expected)
                    .norm()
                    .min((obb.axes[k] + expected).norm()),
            );
        }
    }
    verdict(
        extent_err <= 1e-9 && worst <= 1e-6,
        format!("half-extent error {extent_err:.1e} (<= 1e-9), worst equivariance deviation {worst:.1e} over 20 motions (<= 1e-6)"),
    )
}

// ---------------------------------------------------------------- 4

fn simple_accuracy() -> Verdict {
    let config = EvalConfig::default();
    let mut parts = Vec::new();
    let mut pass = true;
    for (label, sigma, bound) in [("sigma 2 mm", 0.002, 0.01), ("noiseless", 0.0, 0.001)] {
        let scenes = primitive_scenes(
            100,
            4,
            NoiseModel {
                depth_sigma: sigma,
                outlier_fraction: 0.0,
            },
        );
        let report = run_eval(&scenes, &config).unwrap();
        let (est, truth): (Vec<f64>, Vec<f64>) = report
            .estimates
            .iter()
            .map(|e| (e.estimate, e.truth))
            .unzip();
        let rmse = report.overall.map(|s| s.rmse).unwrap_or(f64::INFINITY);
        let recomputed = (est
            .iter()
            .zip(&truth)
            .map(|(e, t)| (e - t).powi(2))
            .sum::<f64>()
            / est.len() as f64)
            .sqrt();
        let complete = report.failed_frames == 0 && report.missed_objects == 0 && est.len() == 100;
        let ok = complete && rmse <= bound && (rmse - recomputed).abs() <= 1e-12;
        pass &= ok;
        parts.push(format!(
            "{label}: RMSE {:.3} mm over {} objects (<= {} mm), {} failed, {} missed",
            rmse * 1e3,
            est.len(),
            bound * 1e3,
            report.failed_frames,
            report.missed_objects
        ));
    }
    verdict(pass, parts.join("; "))
}

// ---------------------------------------------------------------- 5

fn handle_accuracy() -> Verdict {
    let config = EvalConfig {
        scores: ScoreSource::OneHotTruth,
        ..Default::default()
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, width) in [("handle 20 mm", 0.02), ("spoon 14.8 mm", 0.0148)] {
        let report = run_eval(
            &handled_scenes(12, 5, width, (0.3, 0.6), NoiseModel::default()),
            &config,
        )
        .unwrap();
        let errors: Vec<f64> = report
            .estimates
            .iter()
            .filter(|e| e.mode == GraspMode::Complex)
            .map(|e| (e.estimate - width).abs())
            .collect();
        let worst = errors.iter().copied().fold(0.0, f64::max);
        let ok = errors.len() == 12 && worst <= 1e-3;
        pass &= ok;
        parts.push(format!(
            "{label}: worst error {:.3} mm over {} complex grasps (<= 1 mm)",
            worst * 1e3,
            errors.len()
        ));
    }

    use CategoryCode::{Background as G, Body as B, Handle as H};
    let same = iou(&[H, B, G], &[H, B, G], H).unwrap();
    let disjoint = iou(&[H, G, G], &[G, H, G], H).unwrap();
    let third = iou(&[H, H, G], &[G, H, H], H).unwrap();
    let arithmetic = same == 1.0 && disjoint == 0.0 && (third - 1.0 / 3.0).abs() < 1e-15;
    pass &= arithmetic;

    let labels: Vec<CategoryCode> = (0..60).map(|i| CategoryCode::ALL[i % 3]).collect();
    let points: Vec<Point3<f64>> = (0..60)
        .map(|i| Point3::new(0.001 * i as f64, 0.0, 0.5))
        .collect();
    let cloud = PointCloud::new(points).unwrap();
    let params = HandleExtractorParams {
        dbscan_min_pts: 0,
        ..Default::default()
    };
    let handle = extract_handles(&cloud, &Scores::one_hot(&labels), &params).unwrap();
    let expected: Vec<usize> = (0..60).filter(|i| labels[*i] == H).collect();
    let identity = handle.source_indices == expected;
    pass &= identity;
    parts.push(format!(
        "IoU cases 1/0/one-third {}, one-hot extraction identity {}",
        if arithmetic { "ok" } else { "wrong" },
        if identity { "ok" } else { "wrong" }
    ));
    verdict(pass, parts.join("; "))
}

// ---------------------------------------------------------------- 6

fn trigger_timing() -> Verdict {
    let config = TriggerConfig::default();
    let mut pass = true;
    let mut parts = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_late = 0.0f64;
    for _ in 0..20 {
        let start = rng.random_range(0.45..0.8);
        let speed = rng.random_range(0.05..0.2);
        let phase = rng.random_range(0.0..1.0 / 30.0);
        let mut state = TriggerState::new();
        let mut t_star = None;
        let mut commands = Vec::new();
        for k in 0..900 {
            let t = phase + k as f64 / 30.0;
            let range = (start - speed * t).max(0.05);
            if t_star.is_none() && range <= config.arm_distance {
                t_star = Some(t);
            }
            if let Some(cmd) = state
                .step(
                    Observation {
                        object_id: 0,
                        range,
                        t,
                    },
                    &config,
                )
                .unwrap()
            {
                commands.push(cmd.t);
            }
        }
        let t_star = t_star.unwrap();
        let ok = commands.len() == 1
            && commands[0] >= t_star + 3.0 - 1e-9
            && commands[0] <= t_star + 3.0 + 1.0 / 30.0 + 1e-9;
        if let Some(&c) = commands.first() {
            worst_late = worst_late.max(c - t_star - 3.0);
        }
        pass &= ok;
    }
    parts.push(format!(
        "20 approaches: one command each, worst delay past t*+3 s {:.4} s (<= {:.4})",
        worst_late,
        1.0 / 30.0
    ));

    let mut state = TriggerState::new();
    let mut commands = 0;
    for k in 0..300 {
        let t = k as f64 / 30.0;
        let range = if t < 1.0 {
            0.5
        } else if t < 2.0 {
            0.29
        } else {
            0.35
        };
        if state
            .step(
                Observation {
                    object_id: 0,
                    range,
                    t,
                },
                &config,
            )
            .unwrap()
            .is_some()
        {
            commands += 1;
        }
    }
    pass &= commands == 0;
    parts.push(format!("hysteresis exit: {commands} commands (0)"));
    verdict(pass, parts.join("; "))
}

// ---------------------------------------------------------------- 7

fn throughput() -> Verdict {
    let config = PipelineConfig::default();
    let full = bench(100, 800, 600, 0, &config).unwrap();
    let tiny = bench(100, 100, 100, 0, &config).unwrap();
    for (stage, p) in &full.stages {
        println!(
            "      {stage:<10} p50 {:>7.3} ms  p95 {:>7.3} ms",
            p.p50, p.p95
        );
    }
    let per_point =
        |r: &graspcloud::harness::BenchReport| r.end_to_end.p50 / r.median_points as f64 * 1e6;
    verdict(
        full.pass && full.end_to_end.p50 < 33.3,
        format!(
            "800x600 median {:.2} ms (< 33.3), p95 {:.2} ms, {:.1} fps; 100x100 median {:.2} ms; {:.1} vs {:.1} ns/point",
            full.end_to_end.p50,
            full.end_to_end.p95,
            full.fps,
            tiny.end_to_end.p50,
            per_point(&full),
            per_point(&tiny)
        ),
    )
}

// ---------------------------------------------------------------- 8

fn strip_timing(mut v: Value) -> Value {
    v.as_object_mut().expect("report object").remove("timing");
    v
}

fn determinism() -> Verdict {
    let run = || {
        let out = Command::new(env!("CARGO_BIN_EXE_graspcloud"))
            .args([
                "eval",
                "--count",
                "24",
                "--seed",
                "8",
                "--sigma",
                "0.002",
                "--outliers",
                "0.005",
                "--scores",
                "one-hot",
            ])
            .output()
            .expect("binary runs");
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        strip_timing(serde_json::from_slice(&out.stdout).expect("json report"))
    };
    let (a, b) = (run(), run());
    let scenes = primitive_scenes(
        10,
        8,
        NoiseModel {
            depth_sigma: 0.002,
            outlier_fraction: 0.005,
        },
    );
    let config = EvalConfig::default();
    let lib_a = run_eval(&scenes, &config).unwrap().without_timing();
    let lib_b = run_eval(&scenes, &config).unwrap().without_timing();
    let exact = |x: &graspcloud::harness::EvalReport| serde_json::to_string(x).unwrap();
    let same_rmse = lib_a
        .overall
        .map(|s| {
            let est: Vec<f64> = lib_a
                .estimates
                .iter()
                .map(|e| e.estimate - e.truth)
                .collect();
            let direct = rmse_pair_distance(&est, 0.0).unwrap();
            s.rmse.to_bits() == direct.to_bits() || (s.rmse - direct).abs() < 1e-15
        })
        .unwrap_or(false);
    verdict(
        a == b && exact(&lib_a) == exact(&lib_b) && lib_a == lib_b && same_rmse,
        format!(
            "CLI eval runs {}, library runs {}, {} estimates compared",
            if a == b { "identical" } else { "differ" },
            if lib_a == lib_b {
                "identical"
            } else {
                "differ"
            },
            a["estimates"].as_array().map_or(0, |e| e.len())
        ),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("plane recovery", plane_recovery),
        ("oracle equivalence", oracle_equivalence),
        ("OBB correctness", obb_correctness),
        ("simple-mode accuracy", simple_accuracy),
        ("handle-mode accuracy", handle_accuracy),
        ("trigger timing", trigger_timing),
        ("throughput", throughput),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        println!(
            "{} criterion {} {name}: {} [{:.1} s]",
            if v.pass { "PASS" } else { "FAIL" },
            k + 1,
            v.detail,
            start.elapsed().as_secs_f64()
        );
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} of 8 criteria passed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
