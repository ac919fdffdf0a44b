mod common;

use common::criteria::{layout_recovery, smoothness_by_lambda};
use common::{capsule_point, min_pairwise_angle};
use vibroshield::feedback::{canonical_angles, spherical_to_direction};
use vibroshield::layout::io::{read_layout, read_model, write_layout, write_model};
use vibroshield::layout::{generate_synthetic_dataset, optimize_layout, train, BodyModel, Hyperparameters};
use vibroshield::ActuatorLayout;

#[test]
fn zero_noise_sphere_data_recovers_surface_points() {
    let r = layout_recovery();
    assert!(r.within_2cm * 10 >= 32 * 9, "{}/32 within 2 cm", r.within_2cm);
}

#[test]
fn smoothness_penalty_lowers_grid_variation() {
    let (tv0, tv1) = smoothness_by_lambda();
    assert!(tv1 <= tv0, "lambda 0: {tv0}, lambda 0.1: {tv1}");
}

#[test]
fn capsule_oracle_matches_body_projection() {
    let body = BodyModel::capsule(0.16, 0.4);
    for &(t, p) in canonical_angles().iter() {
        let truth = capsule_point(0.16, 0.4, t, p);
        assert!(body.signed_distance(&truth).abs() < 1e-12);
        let (_, normal) = body.project_to_surface(&truth);
        assert!((normal - spherical_to_direction(t, p)).norm() < 1e-9);
    }
}

#[test]
fn layout_file_round_trips() {
    let body = BodyModel::default();
    let data = generate_synthetic_dataset(&body, 46, 2, 1);
    let hp = Hyperparameters {
        epochs: 20,
        ..Hyperparameters::default()
    };
    let (model, _) = train(&data, &hp).unwrap();
    let layout = optimize_layout(&model, &body);

    let mut csv = Vec::new();
    write_layout(&mut csv, &layout).unwrap();
    let text = String::from_utf8(csv.clone()).unwrap();
    assert_eq!(text.lines().next().unwrap(), "index,theta,phi,rx,ry,rz,px,py,pz");
    assert_eq!(text.lines().count(), 33);
    let back = read_layout(csv.as_slice()).unwrap();
    assert_eq!(back.directions().len(), 32);
    for (a, b) in back.directions().iter().zip(layout.directions()) {
        assert!((a - b).norm() < 1e-12);
    }
    for (a, b) in back.positions().unwrap().iter().zip(layout.positions().unwrap()) {
        assert!((a - b).norm() < 1e-12);
    }

    let mut json = Vec::new();
    write_model(&mut json, &model).unwrap();
    let restored = read_model(json.as_slice()).unwrap();
    assert_eq!(restored.network.predict(1.0, 0.5), model.network.predict(1.0, 0.5));
}

#[test]
fn direction_only_layout_file_is_accepted() {
    let mut csv = Vec::new();
    write_layout(&mut csv, &ActuatorLayout::canonical()).unwrap();
    let back = read_layout(csv.as_slice()).unwrap();
    assert!(back.positions().is_none());
    assert!(min_pairwise_angle(back.directions()) > 0.3);
}

#[test]
fn shuffled_layout_file_is_rejected() {
    let mut csv = Vec::new();
    write_layout(&mut csv, &ActuatorLayout::canonical()).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.swap(1, 2);
    assert!(read_layout(lines.join("\n").as_bytes()).is_err());
}
