use nalgebra::{Matrix3, Point3, Rotation3, Translation3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{centroid, Rigid};

/// Relative singular-value floor below which a point set counts as collinear.
const COLLINEAR_RATIO: f64 = 1e-9;

/// Closed-form least-squares rigid fit: the `T` minimizing `sum_i |p_i - T q_i|^2`.
pub fn solve_rigid_registration(p: &[Point3<f64>], q: &[Point3<f64>]) -> Result<Rigid> {
    if p.len() != q.len() {
        return Err(Error::Structural(format!(
            "{} target points but {} source points",
            p.len(),
            q.len()
        )));
    }
    if p.len() < 3 {
        return Err(Error::DegenerateConfiguration(format!(
            "need at least 3 correspondences, got {}",
            p.len()
        )));
    }
    if p.iter().chain(q).any(|x| x.iter().any(|v| !v.is_finite())) {
        return Err(Error::Validation("non-finite correspondence".into()));
    }
    let pc = centroid(p);
    let qc = centroid(q);
    for (set, c, name) in [(p, &pc, "target"), (q, &qc, "source")] {
        let scatter = set
            .iter()
            .fold(Matrix3::zeros(), |acc, x| acc + (x - c) * (x - c).transpose());
        let sv = scatter.symmetric_eigenvalues();
        let mut s = [sv[0].abs(), sv[1].abs(), sv[2].abs()];
        s.sort_by(|a, b| b.total_cmp(a));
        if s[0] == 0.0 || s[1] <= COLLINEAR_RATIO * s[0] {
            return Err(Error::DegenerateConfiguration(format!("{name} points are collinear")));
        }
    }

    let h = q
        .iter()
        .zip(p)
        .fold(Matrix3::zeros(), |acc, (a, b)| acc + (a - qc) * (b - pc).transpose());
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d));
    let r = v * fix * u.transpose();
    let r = Rotation3::from_matrix_unchecked(r);
    let t = pc.coords - r * qc.coords;
    Ok(Rigid::from_parts(Translation3::from(t), r))
}

/// `sum_i |p_i - T q_i|^2`.
pub fn registration_residual(p: &[Point3<f64>], q: &[Point3<f64>], t: &Rigid) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - t * b).norm_squared()).sum()
}

/// Root-mean-square correspondence error of `t`.
pub fn registration_rmse(p: &[Point3<f64>], q: &[Point3<f64>], t: &Rigid) -> f64 {
    (registration_residual(p, q, t) / p.len().max(1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rotation;
    use proptest::prelude::*;

    fn cloud() -> Vec<Point3<f64>> {
        vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(0.3, 0.0, 0.1),
            Point3::new(0.0, 0.2, -0.1),
            Point3::new(0.1, 0.1, 0.4),
            Point3::new(-0.2, 0.3, 0.2),
        ]
    }

    #[test]
    fn identical_sets_give_identity() {
        let p = cloud();
        let t = solve_rigid_registration(&p, &p).unwrap();
        assert!((t.to_homogeneous() - Rigid::identity().to_homogeneous()).norm() < 1e-12);
        assert!(registration_residual(&p, &p, &t) < 1e-24);
    }

    #[test]
    fn recovers_rotation_about_y_and_translation() {
        let q = cloud();
        let truth = Rigid::from_parts(
            Translation3::new(0.1, 0.2, 0.3),
            rotation(Vector3::y(), 30f64.to_radians()),
        );
        let p: Vec<_> = q.iter().map(|x| truth * x).collect();
        let t = solve_rigid_registration(&p, &q).unwrap();
        assert!(registration_rmse(&p, &q, &t) < 1e-9);
        assert!((t.rotation.matrix() - truth.rotation.matrix()).norm() < 1e-9);
    }

    #[test]
    fn too_few_or_collinear_points_are_rejected() {
        let p = cloud();
        assert!(matches!(
            solve_rigid_registration(&p[..2], &p[..2]),
            Err(Error::DegenerateConfiguration(_))
        ));
        let line: Vec<_> = (0..5).map(|i| Point3::new(i as f64, 2.0 * i as f64, 0.5)).collect();
        assert!(matches!(
            solve_rigid_registration(&line, &line),
            Err(Error::DegenerateConfiguration(_))
        ));
    }

    #[test]
    fn mirrored_input_still_gives_proper_rotation() {
        let q = cloud();
        let p: Vec<_> = q.iter().map(|x| Point3::new(-x.x, x.y, x.z)).collect();
        let t = solve_rigid_registration(&p, &q).unwrap();
        assert!((t.rotation.matrix().determinant() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn output_is_a_proper_rotation(
            ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in 0.1f64..1.0,
            angle in -3.0f64..3.0,
            noise in proptest::collection::vec(-0.01f64..0.01, 15),
        ) {
            let q = cloud();
            let g = Rigid::from_parts(Translation3::new(ax, ay, az), rotation(Vector3::new(ax, ay, az), angle));
            let p: Vec<_> = q
                .iter()
                .enumerate()
                .map(|(i, x)| g * x + Vector3::new(noise[3 * i], noise[3 * i + 1], noise[3 * i + 2]))
                .collect();
            let t = solve_rigid_registration(&p, &q).unwrap();
            let r = t.rotation.matrix();
            prop_assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-9);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
        }
    }
}
