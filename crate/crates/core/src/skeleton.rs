//! Named skeleton joints, the anchors of every measurement.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{Point3, TriangleMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Joint {
    Head,
    Neck,
    LeftShoulder,
    RightShoulder,
    LeftElbow,
    RightElbow,
    LeftWrist,
    RightWrist,
    /// Upper spine, the chest joint.
    UpperSpine,
    MidSpine,
    Pelvis,
    LeftHip,
    RightHip,
    LeftKnee,
    RightKnee,
    LeftAnkle,
    RightAnkle,
}

impl Joint {
    pub const ALL: [Joint; 17] = [
        Joint::Head,
        Joint::Neck,
        Joint::LeftShoulder,
        Joint::RightShoulder,
        Joint::LeftElbow,
        Joint::RightElbow,
        Joint::LeftWrist,
        Joint::RightWrist,
        Joint::UpperSpine,
        Joint::MidSpine,
        Joint::Pelvis,
        Joint::LeftHip,
        Joint::RightHip,
        Joint::LeftKnee,
        Joint::RightKnee,
        Joint::LeftAnkle,
        Joint::RightAnkle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Joint::Head => "head",
            Joint::Neck => "neck",
            Joint::LeftShoulder => "left_shoulder",
            Joint::RightShoulder => "right_shoulder",
            Joint::LeftElbow => "left_elbow",
            Joint::RightElbow => "right_elbow",
            Joint::LeftWrist => "left_wrist",
            Joint::RightWrist => "right_wrist",
            Joint::UpperSpine => "upper_spine",
            Joint::MidSpine => "mid_spine",
            Joint::Pelvis => "pelvis",
            Joint::LeftHip => "left_hip",
            Joint::RightHip => "right_hip",
            Joint::LeftKnee => "left_knee",
            Joint::RightKnee => "right_knee",
            Joint::LeftAnkle => "left_ankle",
            Joint::RightAnkle => "right_ankle",
        }
    }
}

impl fmt::Display for Joint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Joint {
    type Err = SkeletonError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Joint::ALL
            .into_iter()
            .find(|j| j.name() == s)
            .ok_or_else(|| SkeletonError::UnknownJoint(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum SkeletonError {
    #[error("missing joint {0:?}")]
    MissingJoint(String),
    #[error("unknown joint {0:?}")]
    UnknownJoint(String),
    #[error("joint {0:?} listed more than once")]
    DuplicateJoint(String),
    #[error("joint {joint} is {distance:.3} m outside the mesh")]
    JointOutsideMesh { joint: Joint, distance: f64 },
    #[error("skeleton JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Complete set of joint positions in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    joints: BTreeMap<Joint, Point3>,
}

impl Skeleton {
    /// Requires every joint in [`Joint::ALL`].
    pub fn new(joints: BTreeMap<Joint, Point3>) -> Result<Self, SkeletonError> {
        if let Some(missing) = Joint::ALL.iter().find(|j| !joints.contains_key(j)) {
            return Err(SkeletonError::MissingJoint(missing.name().to_string()));
        }
        Ok(Self { joints })
    }

    pub fn get(&self, joint: Joint) -> Point3 {
        self.joints[&joint]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Joint, Point3)> + '_ {
        self.joints.iter().map(|(&j, &p)| (j, p))
    }

    pub fn map_points(&self, f: impl Fn(Point3) -> Point3) -> Self {
        Self {
            joints: self.joints.iter().map(|(&j, &p)| (j, f(p))).collect(),
        }
    }

    /// Parses `{"joint_name": [x, y, z], ...}`. Duplicate keys are rejected.
    pub fn from_json(text: &str) -> Result<Self, SkeletonError> {
        let entries: Vec<(String, [f64; 3])> = {
            let raw: serde_json::Value = serde_json::from_str(text)?;
            let obj = raw.as_object().ok_or_else(|| {
                SkeletonError::Json(serde::de::Error::custom("expected a JSON object"))
            })?;
            let mut out = Vec::with_capacity(obj.len());
            for (k, v) in obj {
                out.push((k.clone(), serde_json::from_value(v.clone())?));
            }
            out
        };
        if let Some(dup) = duplicate_key(text) {
            return Err(SkeletonError::DuplicateJoint(dup));
        }
        let mut joints = BTreeMap::new();
        for (name, [x, y, z]) in entries {
            let joint: Joint = name.parse()?;
            joints.insert(joint, Point3::new(x, y, z));
        }
        Self::new(joints)
    }

    pub fn to_json(&self) -> String {
        let map: BTreeMap<&str, [f64; 3]> = self
            .joints
            .iter()
            .map(|(j, p)| (j.name(), [p.x, p.y, p.z]))
            .collect();
        serde_json::to_string_pretty(&map).expect("joint map serializes")
    }

    /// Each joint must be inside the surface or within `tolerance` of it.
    pub fn check_against(&self, mesh: &TriangleMesh, tolerance: f64) -> Result<(), SkeletonError> {
        for (joint, p) in self.iter() {
            if winding_number(mesh, &p) > 0.5 {
                continue;
            }
            let distance = distance_to_mesh(mesh, &p);
            if distance > tolerance {
                return Err(SkeletonError::JointOutsideMesh { joint, distance });
            }
        }
        Ok(())
    }
}

// serde_json keeps the last of duplicate keys; catch them from the raw text
fn duplicate_key(text: &str) -> Option<String> {
    let mut de = serde_json::Deserializer::from_str(text);
    struct Keys(Option<String>);
    impl<'de> serde::de::Visitor<'de> for Keys {
        type Value = Option<String>;
        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("object")
        }
        fn visit_map<A: serde::de::MapAccess<'de>>(self, mut m: A) -> Result<Self::Value, A::Error> {
            let mut seen = std::collections::HashSet::new();
            let mut dup = self.0;
            while let Some(k) = m.next_key::<String>()? {
                let _: serde::de::IgnoredAny = m.next_value()?;
                if !seen.insert(k.clone()) && dup.is_none() {
                    dup = Some(k);
                }
            }
            Ok(dup)
        }
    }
    serde::Deserializer::deserialize_map(&mut de, Keys(None)).ok().flatten()
}

/// Generalized winding number; counts overlapping closed components additively.
pub fn winding_number(mesh: &TriangleMesh, p: &Point3) -> f64 {
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.triangle_points(t).map(|v| v - p);
        let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
        let num = a.dot(&b.cross(&c));
        let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
        total += 2.0 * num.atan2(den);
    }
    total / (4.0 * PI)
}

pub fn distance_to_mesh(mesh: &TriangleMesh, p: &Point3) -> f64 {
    (0..mesh.triangles.len())
        .map(|t| {
            let [a, b, c] = mesh.triangle_points(t);
            (closest_point_on_triangle(p, &a, &b, &c) - p).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Closest point on a triangle (Ericson, Real-Time Collision Detection 5.1.5).
fn closest_point_on_triangle(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> Point3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}
