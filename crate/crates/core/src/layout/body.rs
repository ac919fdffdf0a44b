//! Synthetic upper-body surface: a vertical capsule torso with optional
//! shoulder spheres. Stands in for a scanned mannequin.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;

/// How reported directions deviate from the true surface normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerceptionModel {
    /// Azimuthal pull toward the front (rad).
    pub azimuth_bias: f64,
    pub sigma_theta: f64,
    pub sigma_phi: f64,
}

impl Default for PerceptionModel {
    fn default() -> Self {
        Self {
            azimuth_bias: 10f64.to_radians(),
            sigma_theta: 0.18,
            sigma_phi: 0.53,
        }
    }
}

impl PerceptionModel {
    pub fn exact() -> Self {
        Self {
            azimuth_bias: 0.0,
            sigma_theta: 0.0,
            sigma_phi: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyModel {
    pub radius: f64,
    /// Length of the cylindrical section between the two caps.
    pub height: f64,
    /// Zero disables the shoulders.
    pub shoulder_radius: f64,
    /// Shoulder sphere center for the left side; the right one is mirrored in y.
    pub shoulder_center: Vec3,
    pub perception: PerceptionModel,
}

impl Default for BodyModel {
    fn default() -> Self {
        Self {
            radius: 0.16,
            height: 0.40,
            shoulder_radius: 0.07,
            shoulder_center: Vec3::new(0.0, 0.17, 0.17),
            perception: PerceptionModel::default(),
        }
    }
}

/// Surface regions used to count actuator placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Patch {
    /// Cylindrical side: flat along the torso axis.
    Side,
    TopCap,
    BottomCap,
    Shoulder,
}

impl Patch {
    pub fn is_curved(self) -> bool {
        !matches!(self, Patch::Side)
    }
}

#[derive(Debug, Clone, Copy)]
enum Primitive {
    Capsule { radius: f64, half_height: f64 },
    Sphere { center: Vec3, radius: f64 },
}

impl Primitive {
    fn signed_distance(&self, p: &Vec3) -> f64 {
        match *self {
            Primitive::Capsule {
                radius,
                half_height,
            } => {
                let axis = Vec3::new(0.0, 0.0, p.z.clamp(-half_height, half_height));
                (p - axis).norm() - radius
            }
            Primitive::Sphere { center, radius } => (p - center).norm() - radius,
        }
    }

    /// Nearest surface point and its outward normal.
    fn project(&self, p: &Vec3) -> (Vec3, Vec3) {
        let (anchor, radius) = match *self {
            Primitive::Capsule {
                radius,
                half_height,
            } => (Vec3::new(0.0, 0.0, p.z.clamp(-half_height, half_height)), radius),
            Primitive::Sphere { center, radius } => (center, radius),
        };
        let offset = p - anchor;
        let len = offset.norm();
        let normal = if len > 1e-12 {
            offset / len
        } else {
            Vec3::x()
        };
        (anchor + normal * radius, normal)
    }

    fn area(&self) -> f64 {
        match *self {
            Primitive::Capsule {
                radius,
                half_height,
            } => 4.0 * PI * radius * radius + 2.0 * PI * radius * 2.0 * half_height,
            Primitive::Sphere { radius, .. } => 4.0 * PI * radius * radius,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec3, Vec3) {
        match *self {
            Primitive::Capsule {
                radius,
                half_height,
            } => {
                let caps = 4.0 * PI * radius * radius;
                let side = 2.0 * PI * radius * 2.0 * half_height;
                if rng.random::<f64>() * (caps + side) < side {
                    let angle = rng.random::<f64>() * 2.0 * PI;
                    let z = (rng.random::<f64>() * 2.0 - 1.0) * half_height;
                    let n = Vec3::new(angle.cos(), angle.sin(), 0.0);
                    (n * radius + Vec3::new(0.0, 0.0, z), n)
                } else {
                    let n = uniform_sphere(rng);
                    let cap = if n.z >= 0.0 { half_height } else { -half_height };
                    (n * radius + Vec3::new(0.0, 0.0, cap), n)
                }
            }
            Primitive::Sphere { center, radius } => {
                let n = uniform_sphere(rng);
                (center + n * radius, n)
            }
        }
    }
}

fn uniform_sphere<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    let z: f64 = rng.random::<f64>() * 2.0 - 1.0;
    let angle = rng.random::<f64>() * 2.0 * PI;
    let r = (1.0 - z * z).max(0.0).sqrt();
    Vec3::new(r * angle.cos(), r * angle.sin(), z)
}

impl BodyModel {
    /// Torso only, no shoulders, exact perception.
    pub fn capsule(radius: f64, height: f64) -> Self {
        Self {
            radius,
            height,
            shoulder_radius: 0.0,
            perception: PerceptionModel::exact(),
            ..Self::default()
        }
    }

    pub fn with_perception(mut self, perception: PerceptionModel) -> Self {
        self.perception = perception;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.radius > 0.0 && self.height > 0.0) {
            return Err("body radius and height must be positive".into());
        }
        if self.shoulder_radius < 0.0 {
            return Err("shoulder radius must be non-negative".into());
        }
        Ok(())
    }

    fn primitives(&self) -> Vec<Primitive> {
        let mut out = vec![Primitive::Capsule {
            radius: self.radius,
            half_height: self.height / 2.0,
        }];
        if self.shoulder_radius > 0.0 {
            let c = self.shoulder_center;
            for y in [c.y, -c.y] {
                out.push(Primitive::Sphere {
                    center: Vec3::new(c.x, y, c.z),
                    radius: self.shoulder_radius,
                });
            }
        }
        out
    }

    /// Negative inside the body.
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.primitives()
            .iter()
            .map(|prim| prim.signed_distance(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Nearest point on the outer surface of the union, with its normal.
    pub fn project_to_surface(&self, p: &Vec3) -> (Vec3, Vec3) {
        let prims = self.primitives();
        let mut best: Option<(f64, Vec3, Vec3)> = None;
        for (i, prim) in prims.iter().enumerate() {
            let (s, n) = prim.project(p);
            let buried = prims
                .iter()
                .enumerate()
                .any(|(j, other)| j != i && other.signed_distance(&s) < -1e-9);
            if buried {
                continue;
            }
            let d = (s - p).norm();
            if best.is_none_or(|(bd, _, _)| d < bd) {
                best = Some((d, s, n));
            }
        }
        let (_, s, n) = best.unwrap_or_else(|| {
            let (s, n) = prims[0].project(p);
            (0.0, s, n)
        });
        (s, n)
    }

    /// Area-uniform point on the outer surface, with its normal.
    pub fn sample_surface<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec3, Vec3) {
        let prims = self.primitives();
        let total: f64 = prims.iter().map(Primitive::area).sum();
        loop {
            let mut pick = rng.random::<f64>() * total;
            let mut chosen = 0;
            for (i, prim) in prims.iter().enumerate() {
                if pick < prim.area() {
                    chosen = i;
                    break;
                }
                pick -= prim.area();
                chosen = i;
            }
            let (p, n) = prims[chosen].sample(rng);
            let buried = prims
                .iter()
                .enumerate()
                .any(|(j, other)| j != chosen && other.signed_distance(&p) < 0.0);
            if !buried {
                return (p, n);
            }
        }
    }

    pub fn patch(&self, p: &Vec3) -> Patch {
        let half = self.height / 2.0;
        let capsule = Primitive::Capsule {
            radius: self.radius,
            half_height: half,
        };
        if self.shoulder_radius > 0.0 && capsule.signed_distance(p) > 1e-6 {
            return Patch::Shoulder;
        }
        if p.z > half {
            Patch::TopCap
        } else if p.z < -half {
            Patch::BottomCap
        } else {
            Patch::Side
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn samples_lie_on_surface_with_outward_normals() {
        let body = BodyModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let (p, n) = body.sample_surface(&mut rng);
            assert!(body.signed_distance(&p).abs() < 1e-9);
            assert!((n.norm() - 1.0).abs() < 1e-12);
            assert!(body.signed_distance(&(p + n * 1e-4)) > 0.0);
        }
    }

    #[test]
    fn projection_lands_on_surface() {
        let body = BodyModel::default();
        for p in [
            Vec3::new(0.5, 0.0, 0.0),
            Vec3::new(0.0, 0.3, 0.3),
            Vec3::new(0.01, 0.0, -0.05),
            Vec3::new(0.0, 0.0, 1.0),
        ] {
            let (s, _) = body.project_to_surface(&p);
            assert!(body.signed_distance(&s).abs() < 1e-9, "{p:?} -> {s:?}");
        }
    }

    #[test]
    fn capsule_projection_is_radial() {
        let body = BodyModel::capsule(0.2, 0.4);
        let (s, n) = body.project_to_surface(&Vec3::new(1.0, 0.0, 0.1));
        assert!((s - Vec3::new(0.2, 0.0, 0.1)).norm() < 1e-12);
        assert!((n - Vec3::x()).norm() < 1e-12);
    }

    #[test]
    fn patches() {
        let body = BodyModel::default();
        assert_eq!(body.patch(&Vec3::new(0.16, 0.0, 0.0)), Patch::Side);
        assert_eq!(body.patch(&Vec3::new(0.0, 0.0, 0.36)), Patch::TopCap);
        assert_eq!(body.patch(&Vec3::new(0.0, 0.0, -0.36)), Patch::BottomCap);
        assert_eq!(body.patch(&Vec3::new(0.0, 0.24, 0.17)), Patch::Shoulder);
    }
}
