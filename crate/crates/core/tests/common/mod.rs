//! Independent reference computations shared by the integration tests and
//! the acceptance runner. Nothing here calls the solver or the analytic
//! derivatives under test.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix3};
use rand::Rng;
use vibroshield::feedback::spherical_to_direction;
use vibroshield::{SafetyField, Vec3};

pub const FD_STEP: f64 = 1e-5;

pub fn fd_grad(field: &SafetyField, q: &Vec3, step: f64) -> Vec3 {
    Vec3::from_fn(|k, _| {
        let mut plus = *q;
        let mut minus = *q;
        plus[k] += step;
        minus[k] -= step;
        (field.eval_h(&plus) - field.eval_h(&minus)) / (2.0 * step)
    })
}

/// Columns are central differences of the analytic gradient.
pub fn fd_hess(field: &SafetyField, q: &Vec3, step: f64) -> Matrix3<f64> {
    let mut out = Matrix3::zeros();
    for k in 0..3 {
        let mut plus = *q;
        let mut minus = *q;
        plus[k] += step;
        minus[k] -= step;
        let col = (field.grad_h(&plus).unwrap() - field.grad_h(&minus).unwrap()) / (2.0 * step);
        out.set_column(k, &col);
    }
    out
}

/// `|a - b| <= tol * max(|a|, |b|, floor)`.
pub fn close_rel(a: f64, b: f64, tol: f64, floor: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(floor)
}

pub fn random_vec<R: Rng>(rng: &mut R, half: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-half..half),
        rng.random_range(-half..half),
        rng.random_range(-half..half),
    )
}

pub fn random_unit<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v = random_vec(rng, 1.0);
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn random_plane<R: Rng>(rng: &mut R) -> SafetyField {
    SafetyField::plane(random_vec(rng, 3.0), random_unit(rng)).unwrap()
}

pub fn random_superellipsoid<R: Rng>(rng: &mut R) -> SafetyField {
    let scale = Vec3::new(
        rng.random_range(0.3..2.0),
        rng.random_range(0.3..2.0),
        rng.random_range(0.3..2.0),
    );
    let exponent = [2, 4, 6][rng.random_range(0..3)];
    SafetyField::superellipsoid(random_vec(rng, 3.0), scale, exponent).unwrap()
}

pub fn random_sphere_margin<R: Rng>(rng: &mut R) -> SafetyField {
    SafetyField::sphere_margin(random_vec(rng, 3.0), rng.random_range(0.2..2.0)).unwrap()
}

/// Minimum-norm correction onto `a . u >= b` by nested grid refinement over
/// the boundary plane (the optimum of an infeasible point lies on it).
pub fn grid_halfspace_projection(u: &Vec3, a: &Vec3, b: f64) -> Vec3 {
    if a.dot(u) >= b {
        return *u;
    }
    let n = a.normalize();
    let anchor = n * (b / a.norm());
    let e1 = n.cross(&if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() }).normalize();
    let e2 = n.cross(&e1);
    let mut center = (0.0, 0.0);
    let mut half = u.norm() + (anchor - u).norm() + 1.0;
    const CELLS: i32 = 20;
    while half > 1e-11 {
        let mut best = (f64::INFINITY, center);
        for i in -CELLS..=CELLS {
            for j in -CELLS..=CELLS {
                let s = center.0 + half * f64::from(i) / f64::from(CELLS);
                let t = center.1 + half * f64::from(j) / f64::from(CELLS);
                let d = (anchor + e1 * s + e2 * t - u).norm_squared();
                if d < best.0 {
                    best = (d, (s, t));
                }
            }
        }
        center = best.1;
        half *= 2.0 / f64::from(CELLS);
    }
    anchor + e1 * center.0 + e2 * center.1
}

/// Projection onto `{u : a_i . u >= b_i}` by enumerating active sets and
/// solving each equality-constrained problem through its KKT system.
pub fn kkt_enumeration(u: &Vec3, cs: &[(Vec3, f64)]) -> Option<Vec3> {
    let m = cs.len();
    let mut best: Option<(f64, Vec3)> = None;
    for mask in 0u32..(1 << m) {
        let active: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let x = if active.is_empty() {
            *u
        } else {
            let k = active.len();
            let a = DMatrix::from_fn(k, 3, |r, c| cs[active[r]].0[c]);
            let rhs = DVector::from_fn(k, |r, _| cs[active[r]].1 - cs[active[r]].0.dot(u));
            let gram = &a * a.transpose();
            let Some(lambda) = gram.clone().lu().solve(&rhs) else {
                continue;
            };
            if (&gram * &lambda - &rhs).norm() > 1e-9 * (1.0 + rhs.norm()) {
                continue;
            }
            if lambda.iter().any(|&l| l < -1e-12) {
                continue;
            }
            let step = a.transpose() * lambda;
            u + Vec3::new(step[0], step[1], step[2])
        };
        let feasible = cs.iter().all(|(a, b)| a.dot(&x) >= b - 1e-9 * (1.0 + b.abs()));
        if !feasible {
            continue;
        }
        let d = (x - u).norm();
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, x));
        }
    }
    best.map(|(_, x)| x)
}

/// Smallest angle (rad) between any two of the given unit vectors.
pub fn min_pairwise_angle(dirs: &[Vec3]) -> f64 {
    let mut min = f64::INFINITY;
    for i in 0..dirs.len() {
        for j in i + 1..dirs.len() {
            let c = dirs[i].dot(&dirs[j]).clamp(-1.0, 1.0);
            min = min.min(c.acos());
        }
    }
    min
}

/// Surface point of a shoulderless capsule (axis z, centered at the
/// origin) whose outward normal has spherical angles `(theta, phi)`.
/// Points on the cylindrical side are taken at mid-height.
pub fn capsule_point(radius: f64, height: f64, theta: f64, phi: f64) -> Vec3 {
    let d = spherical_to_direction(theta, phi);
    let half = height / 2.0;
    if (theta - std::f64::consts::FRAC_PI_2).abs() < 1e-12 {
        Vec3::new(radius * phi.cos(), radius * phi.sin(), 0.0)
    } else if theta < std::f64::consts::FRAC_PI_2 {
        Vec3::new(0.0, 0.0, half) + d * radius
    } else {
        Vec3::new(0.0, 0.0, -half) + d * radius
    }
}

pub mod criteria;
