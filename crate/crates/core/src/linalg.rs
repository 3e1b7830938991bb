//! Small fixed-size 3D helpers. Matrices are row-major `[[f64; 3]; 3]`;
//! symmetric matrices are packed as `[xx, yy, zz, xy, xz, yz]`.

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];
pub type Sym3 = [f64; 6];

pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub fn transpose(a: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

pub fn mat_vec(a: &Mat3, v: &Vec3) -> Vec3 {
    [
        a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
        a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
        a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
    ]
}

/// `R diag(d) Rᵀ`.
pub fn rotate_diag(r: &Mat3, d: &Vec3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = r[i][0] * d[0] * r[j][0] + r[i][1] * d[1] * r[j][1] + r[i][2] * d[2] * r[j][2];
        }
    }
    out
}

pub fn pack_sym(m: &Mat3) -> Sym3 {
    [m[0][0], m[1][1], m[2][2], m[0][1], m[0][2], m[1][2]]
}

pub fn unpack_sym(s: &Sym3) -> Mat3 {
    [[s[0], s[3], s[4]], [s[3], s[1], s[5]], [s[4], s[5], s[2]]]
}

pub fn quat_norm(q: &[f64; 4]) -> f64 {
    (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt()
}

pub fn quat_normalize(q: &[f64; 4]) -> [f64; 4] {
    let n = quat_norm(q);
    [q[0] / n, q[1] / n, q[2] / n, q[3] / n]
}

/// Hamilton product, quaternions stored `(w, x, y, z)`.
pub fn quat_mul(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

/// Rotation matrix of a unit quaternion `(w, x, y, z)`.
pub fn quat_to_mat(q: &[f64; 4]) -> Mat3 {
    let [w, x, y, z] = *q;
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

/// Partial derivatives of [`quat_to_mat`] with respect to `w, x, y, z`.
pub fn quat_to_mat_jacobian(q: &[f64; 4]) -> [Mat3; 4] {
    let [w, x, y, z] = *q;
    let s = |m: Mat3| m.map(|row| row.map(|v| 2.0 * v));
    [
        s([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]]),
        s([[0.0, y, z], [y, -2.0 * x, -w], [z, w, -2.0 * x]]),
        s([[-2.0 * y, x, w], [x, 0.0, z], [-w, z, -2.0 * y]]),
        s([[-2.0 * z, -w, x], [w, -2.0 * z, y], [x, y, 0.0]]),
    ]
}

pub fn frobenius_dot(a: &Mat3, b: &Mat3) -> f64 {
    let mut acc = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            acc += a[i][j] * b[i][j];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_quaternion_is_identity_matrix() {
        assert_eq!(quat_to_mat(&[1.0, 0.0, 0.0, 0.0]), IDENTITY);
    }

    #[test]
    fn rotation_matrix_is_orthonormal() {
        let q = quat_normalize(&[0.3, -0.5, 0.7, 0.2]);
        let r = quat_to_mat(&q);
        let rrt = mat_mul(&r, &transpose(&r));
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((rrt[i][j] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn product_of_quaternions_composes_rotations() {
        let a = quat_normalize(&[0.9, 0.1, -0.3, 0.2]);
        let b = quat_normalize(&[0.4, 0.5, 0.1, -0.6]);
        let lhs = quat_to_mat(&quat_mul(&a, &b));
        let rhs = mat_mul(&quat_to_mat(&a), &quat_to_mat(&b));
        for i in 0..3 {
            for j in 0..3 {
                assert!((lhs[i][j] - rhs[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let q = [0.6, -0.2, 0.5, 0.3];
        let jac = quat_to_mat_jacobian(&q);
        let h = 1e-6;
        for c in 0..4 {
            let mut qp = q;
            let mut qm = q;
            qp[c] += h;
            qm[c] -= h;
            let (rp, rm) = (quat_to_mat(&qp), quat_to_mat(&qm));
            for i in 0..3 {
                for j in 0..3 {
                    let fd = (rp[i][j] - rm[i][j]) / (2.0 * h);
                    assert!((fd - jac[c][i][j]).abs() < 1e-8, "c={c} i={i} j={j}");
                }
            }
        }
    }
}
