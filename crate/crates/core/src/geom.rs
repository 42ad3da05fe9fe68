//! Rigid-body geometry: 3-vectors, unit quaternions, and the intrinsic
//! X-Y-Z Euler decomposition used for rotation binning.

pub type Vec3 = [f64; 3];

pub fn add3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale3(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm3(a: Vec3) -> f64 {
    dot3(a, a).sqrt()
}

pub fn dist3(a: Vec3, b: Vec3) -> f64 {
    norm3(sub3(a, b))
}

/// Planar (xy) distance, used by the tabletop success predicates.
pub fn dist_xy(a: Vec3, b: Vec3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// Unit quaternion, scalar-first Hamilton convention: composing
/// `a.mul(b)` rotates by `b` first, then `a`, matching matrix products.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Quat {
        let n = norm3(axis);
        debug_assert!(n > 0.0, "zero rotation axis");
        let half = angle * 0.5;
        let s = half.sin() / n;
        Quat {
            w: half.cos(),
            x: axis[0] * s,
            y: axis[1] * s,
            z: axis[2] * s,
        }
    }

    /// Rotation about the world z axis.
    pub fn from_yaw(angle: f64) -> Quat {
        Quat::from_axis_angle([0.0, 0.0, 1.0], angle)
    }

    pub fn norm(self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(self) -> Quat {
        let n = self.norm();
        Quat {
            w: self.w / n,
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        }
    }

    /// Map onto the w >= 0 hemisphere (q and -q are the same rotation).
    /// At w == 0 the first nonzero component is made positive.
    pub fn canonicalized(self) -> Quat {
        let flip = if self.w != 0.0 {
            self.w < 0.0
        } else if self.x != 0.0 {
            self.x < 0.0
        } else if self.y != 0.0 {
            self.y < 0.0
        } else {
            self.z < 0.0
        };
        if flip {
            Quat {
                w: -self.w,
                x: -self.x,
                y: -self.y,
                z: -self.z,
            }
        } else {
            self
        }
    }

    pub fn mul(self, o: Quat) -> Quat {
        Quat {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }

    /// Rotate a vector: v' = q v q*.
    pub fn rotate(self, v: Vec3) -> Vec3 {
        let Quat { w, x, y, z } = self;
        // 2 * cross(q.xyz, v)
        let tx = 2.0 * (y * v[2] - z * v[1]);
        let ty = 2.0 * (z * v[0] - x * v[2]);
        let tz = 2.0 * (x * v[1] - y * v[0]);
        [
            v[0] + w * tx + (y * tz - z * ty),
            v[1] + w * ty + (z * tx - x * tz),
            v[2] + w * tz + (x * ty - y * tx),
        ]
    }

    /// Geodesic angle between two rotations, in radians.
    pub fn angle_to(self, o: Quat) -> f64 {
        let dot = (self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z).abs();
        2.0 * dot.clamp(-1.0, 1.0).acos()
    }

    /// Inverse rotation (conjugate, for unit quaternions).
    pub fn conjugate(self) -> Quat {
        Quat {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }
}

/// Rigid pose: position plus orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    pub rotation: Quat,
}

impl Pose {
    pub fn new(position: Vec3, rotation: Quat) -> Pose {
        Pose { position, rotation }
    }

    pub fn at(position: Vec3) -> Pose {
        Pose {
            position,
            rotation: Quat::IDENTITY,
        }
    }

    /// Apply this pose to a point expressed in the local frame.
    pub fn transform(self, local: Vec3) -> Vec3 {
        add3(self.rotation.rotate(local), self.position)
    }

    /// Pose composition: `a.compose(b)` applies `b` first, then `a`.
    pub fn compose(self, b: Pose) -> Pose {
        Pose {
            position: self.transform(b.position),
            rotation: self.rotation.mul(b.rotation),
        }
    }

    pub fn inverse(self) -> Pose {
        let inv_rot = self.rotation.conjugate();
        Pose {
            position: scale3(inv_rot.rotate(self.position), -1.0),
            rotation: inv_rot,
        }
    }
}

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = a % two_pi;
    if r <= -std::f64::consts::PI {
        r += two_pi;
    } else if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// Compose intrinsic X-Y-Z Euler angles (radians) into a quaternion:
/// R = Rx(a) * Ry(b) * Rz(c).
pub fn euler_xyz_to_quat(a: f64, b: f64, c: f64) -> Quat {
    let qx = Quat::from_axis_angle([1.0, 0.0, 0.0], a);
    let qy = Quat::from_axis_angle([0.0, 1.0, 0.0], b);
    let qz = Quat::from_axis_angle([0.0, 0.0, 1.0], c);
    qx.mul(qy).mul(qz).normalized().canonicalized()
}

/// Decompose a rotation into intrinsic X-Y-Z Euler angles (radians).
///
/// The primary branch keeps the middle angle in [-pi/2, pi/2]. When both
/// outer angles land in the flipped half (|a| > pi/2 and |c| > pi/2) the
/// equivalent triple (a+pi, pi-b, c+pi) is returned instead, so rotations
/// close to a single-axis turn decompose as that single-axis turn. Exact
/// gimbal lock (middle angle +-pi/2) folds the whole z rotation into the
/// x angle; no input raises an error.
pub fn quat_to_euler_xyz(q: Quat) -> (f64, f64, f64) {
    let Quat { w, x, y, z } = q.normalized();
    let r02 = 2.0 * (x * z + w * y);
    let (a, b, c);
    if r02.abs() >= 1.0 - 1e-12 {
        // Gimbal branch: only a +- c is observable; put it all in a.
        let r10 = 2.0 * (x * y + w * z);
        let r11 = 1.0 - 2.0 * (x * x + z * z);
        b = if r02 > 0.0 {
            std::f64::consts::FRAC_PI_2
        } else {
            -std::f64::consts::FRAC_PI_2
        };
        a = r10.atan2(r11);
        c = 0.0;
    } else {
        let r12 = 2.0 * (y * z - w * x);
        let r22 = 1.0 - 2.0 * (x * x + y * y);
        let r01 = 2.0 * (x * y - w * z);
        let r00 = 1.0 - 2.0 * (y * y + z * z);
        b = r02.clamp(-1.0, 1.0).asin();
        a = (-r12).atan2(r22);
        c = (-r01).atan2(r00);
    }
    if a.cos() < 0.0 && c.cos() < 0.0 {
        (
            wrap_angle(a + std::f64::consts::PI),
            std::f64::consts::PI - b,
            wrap_angle(c + std::f64::consts::PI),
        )
    } else {
        (a, b, c)
    }
}
