//! Actuator layout optimization: learn where on the body each perceived
//! direction is felt, then place one actuator per canonical direction.

pub mod body;
pub mod dataset;
pub mod io;
pub mod mlp;

pub use body::{BodyModel, Patch, PerceptionModel};
pub use dataset::{generate_study, generate_synthetic_dataset, MappingSample};
pub use mlp::{train, Hyperparameters, InputEncoding, LossParts, Mlp, MlpModel, TrainError, TrainReport};

use crate::feedback::{canonical_angles, ActuatorLayout};
use crate::geometry::Vec3;

/// Evaluates the model at the 32 canonical directions and snaps each
/// prediction onto the body surface.
pub fn optimize_layout(model: &MlpModel, body: &BodyModel) -> ActuatorLayout {
    let angles = canonical_angles();
    let raw = model.network.predict_many(&angles);
    let positions: Vec<Vec3> = (0..angles.len())
        .map(|k| {
            let p = Vec3::new(raw[[k, 0]], raw[[k, 1]], raw[[k, 2]]);
            body.project_to_surface(&p).0
        })
        .collect();
    ActuatorLayout::with_positions(positions).expect("canonical set has 32 entries")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_has_32_surface_points_in_canonical_order() {
        let body = BodyModel::default();
        let data = generate_synthetic_dataset(&body, 46, 5, 3);
        let hp = Hyperparameters {
            epochs: 5,
            ..Hyperparameters::default()
        };
        let (model, _) = train(&data, &hp).unwrap();
        let layout = optimize_layout(&model, &body);
        let positions = layout.positions().unwrap();
        assert_eq!(positions.len(), 32);
        for p in positions {
            assert!(body.signed_distance(p).abs() < 1e-9);
        }
        assert_eq!(layout.directions(), ActuatorLayout::canonical().directions());
    }
}
