use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::body::BodyModel;
use crate::feedback::direction_to_spherical;
use crate::geometry::Vec3;

/// Keeps reported polar angles strictly inside `(0, pi)`.
const THETA_MARGIN: f64 = 1e-6;

/// One pointing trial: the actuator that vibrated and the direction the
/// participant reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappingSample {
    pub participant_id: u32,
    pub actuator_id: u32,
    pub position: Vec3,
    pub reported_theta: f64,
    pub reported_phi: f64,
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(phi: f64) -> f64 {
    let mut w = (phi + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

/// Pulls `phi` toward zero by at most `bias`.
fn bias_toward_front(phi: f64, bias: f64) -> f64 {
    phi - phi.signum() * phi.abs().min(bias)
}

/// Synthetic pointing data for one participant.
pub fn generate_synthetic_dataset(
    body: &BodyModel,
    n_actuators: usize,
    reps: usize,
    seed: u64,
) -> Vec<MappingSample> {
    assert!(n_actuators >= 1 && reps >= 1, "need at least one actuator and one repetition");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sites = place_sites(body, n_actuators, &mut rng);
    report(body, &sites, reps, 0, &mut rng)
}

/// Several participants sharing one actuator grid, each with an independent
/// noise stream.
pub fn generate_study(
    body: &BodyModel,
    participants: u32,
    n_actuators: usize,
    reps: usize,
    seed: u64,
) -> Vec<MappingSample> {
    assert!(n_actuators >= 1 && reps >= 1, "need at least one actuator and one repetition");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sites = place_sites(body, n_actuators, &mut rng);
    (0..participants)
        .flat_map(|pid| {
            let mut stream = ChaCha8Rng::seed_from_u64(seed);
            stream.set_stream(u64::from(pid) + 1);
            report(body, &sites, reps, pid, &mut stream)
        })
        .collect()
}

fn place_sites(body: &BodyModel, n: usize, rng: &mut ChaCha8Rng) -> Vec<(Vec3, Vec3)> {
    (0..n).map(|_| body.sample_surface(rng)).collect()
}

fn report(
    body: &BodyModel,
    sites: &[(Vec3, Vec3)],
    reps: usize,
    participant_id: u32,
    rng: &mut ChaCha8Rng,
) -> Vec<MappingSample> {
    let p = body.perception;
    let theta_noise = Normal::new(0.0, p.sigma_theta).expect("sigma_theta must be finite and >= 0");
    let phi_noise = Normal::new(0.0, p.sigma_phi).expect("sigma_phi must be finite and >= 0");
    let mut out = Vec::with_capacity(sites.len() * reps);
    for _ in 0..reps {
        for (id, (position, normal)) in sites.iter().enumerate() {
            let (theta, phi) = direction_to_spherical(normal);
            let theta = (theta + theta_noise.sample(rng)).clamp(THETA_MARGIN, PI - THETA_MARGIN);
            let phi = wrap_angle(bias_toward_front(phi, p.azimuth_bias) + phi_noise.sample(rng));
            out.push(MappingSample {
                participant_id,
                actuator_id: id as u32,
                position: *position,
                reported_theta: theta,
                reported_phi: phi,
            });
        }
    }
    out
}
