//! Small fixed-size vector helpers.

pub type Vec3 = [f64; 3];

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

#[inline]
pub fn dist2(a: Vec3, b: Vec3) -> f64 {
    let d = sub(a, b);
    dot(d, d)
}

pub fn normalize(a: Vec3) -> Vec3 {
    let n = norm(a);
    if n == 0.0 {
        a
    } else {
        scale(a, 1.0 / n)
    }
}

/// Places atom D bonded to `c` with bond length `bond`, angle b-c-D `angle_deg` and dihedral
/// a-b-c-D `dihedral_deg` (natural extension reference frame).
pub fn place(a: Vec3, b: Vec3, c: Vec3, bond: f64, angle_deg: f64, dihedral_deg: f64) -> Vec3 {
    let theta = angle_deg.to_radians();
    let phi = dihedral_deg.to_radians();
    let bc = normalize(sub(c, b));
    let n = normalize(cross(sub(b, a), bc));
    let m = cross(n, bc);
    let d2 = [
        -bond * theta.cos(),
        bond * theta.sin() * phi.cos(),
        bond * theta.sin() * phi.sin(),
    ];
    [
        c[0] + bc[0] * d2[0] + m[0] * d2[1] + n[0] * d2[2],
        c[1] + bc[1] * d2[0] + m[1] * d2[1] + n[1] * d2[2],
        c[2] + bc[2] * d2[0] + m[2] * d2[1] + n[2] * d2[2],
    ]
}

pub fn angle_deg(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    let u = normalize(sub(a, b));
    let v = normalize(sub(c, b));
    dot(u, v).clamp(-1.0, 1.0).acos().to_degrees()
}

pub fn dihedral_deg(a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> f64 {
    let b0 = sub(a, b);
    let b1 = normalize(sub(c, b));
    let b2 = sub(d, c);
    let v = sub(b0, scale(b1, dot(b0, b1)));
    let w = sub(b2, scale(b1, dot(b2, b1)));
    let x = dot(v, w);
    let y = dot(cross(b1, v), w);
    y.atan2(x).to_degrees()
}

/// Row-major 3x3 rotation matrix.
pub type Mat3 = [[f64; 3]; 3];

pub fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

/// Rotation from a unit quaternion (w, x, y, z).
pub fn quaternion_to_matrix(q: [f64; 4]) -> Mat3 {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    let [w, x, y, z] = q.map(|v| v / n);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

/// Uniformly distributed rotation from three uniforms in [0, 1) (Shoemake's method).
pub fn uniform_rotation(u1: f64, u2: f64, u3: f64) -> Mat3 {
    let tau = std::f64::consts::TAU;
    let a = (1.0 - u1).sqrt();
    let b = u1.sqrt();
    quaternion_to_matrix([
        b * (tau * u3).cos(),
        a * (tau * u2).sin(),
        a * (tau * u2).cos(),
        b * (tau * u3).sin(),
    ])
}
