use super::{Point3, TriangleMesh};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub point: Point3,
    pub distance: f64,
    pub triangle: usize,
}

const LEAF_SIZE: usize = 4;
const EPS: f64 = 1e-12;
const BOX_PAD: f64 = 1e-9;
/// Hits closer than this (relative to distance) count as the same distance.
const TIE: f64 = 1e-9;

fn tie_window(d: f64) -> f64 {
    d + TIE * d.max(1.0)
}

/// Collects hits; the winner is the smallest triangle id among those tied
/// with the nearest, independent of the order hits arrive in.
struct Nearest {
    min: f64,
    hits: Vec<(f64, usize)>,
}

impl Nearest {
    fn new() -> Self {
        Self {
            min: f64::INFINITY,
            hits: Vec::new(),
        }
    }

    fn limit(&self) -> f64 {
        tie_window(self.min)
    }

    fn push(&mut self, d: f64, t: usize) {
        if d <= self.limit() {
            self.min = self.min.min(d);
            self.hits.push((d, t));
        }
    }

    fn finish(self, origin: &Point3, direction: &Point3) -> Option<RayHit> {
        let limit = self.limit();
        self.hits
            .into_iter()
            .filter(|&(d, _)| d <= limit)
            .min_by_key(|&(_, t)| t)
            .map(|(distance, triangle)| RayHit {
                point: origin + direction * distance,
                distance,
                triangle,
            })
    }
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: Point3,
    hi: Point3,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            lo: Point3::repeat(f64::INFINITY),
            hi: Point3::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Point3) {
        self.lo = self.lo.inf(p);
        self.hi = self.hi.sup(p);
    }

    fn merge(&mut self, o: &Aabb) {
        self.lo = self.lo.inf(&o.lo);
        self.hi = self.hi.sup(&o.hi);
    }

    /// Entry distance of the ray into the box, if it enters before `t_max`.
    fn hit(&self, origin: &Point3, inv_dir: &Point3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for k in 0..3 {
            let a = (self.lo[k] - origin[k]) * inv_dir[k];
            let b = (self.hi[k] - origin[k]) * inv_dir[k];
            let (near, far) = if a <= b { (a, b) } else { (b, a) };
            // NaN (0 * inf) means the ray is parallel and on the slab boundary
            if !near.is_nan() {
                t0 = t0.max(near);
            }
            if !far.is_nan() {
                t1 = t1.min(far);
            }
            if t0 > t1 * (1.0 + 1e-12) + 1e-12 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// Bounding volume hierarchy over a mesh's triangles (median split on the
/// longest axis of centroid bounds).
#[derive(Debug, Clone)]
pub struct Bvh<'a> {
    mesh: &'a TriangleMesh,
    nodes: Vec<Node>,
    order: Vec<usize>,
}

impl<'a> Bvh<'a> {
    pub fn new(mesh: &'a TriangleMesh) -> Self {
        let mut order: Vec<usize> = (0..mesh.triangles.len()).collect();
        let boxes: Vec<Aabb> = (0..mesh.triangles.len())
            .map(|t| {
                let mut b = Aabb::empty();
                for p in mesh.triangle_points(t) {
                    b.grow(&p);
                }
                // pad so rays grazing a flat box are not lost to rounding
                let pad = Point3::repeat(BOX_PAD * b.lo.abs().max().max(b.hi.abs().max()).max(1.0));
                b.lo -= pad;
                b.hi += pad;
                b
            })
            .collect();
        let centroids: Vec<Point3> = boxes.iter().map(|b| (b.lo + b.hi) * 0.5).collect();
        let mut nodes = Vec::new();
        if !order.is_empty() {
            let n = order.len();
            build(&mut nodes, &mut order, 0, n, &boxes, &centroids);
        }
        Self { mesh, nodes, order }
    }

    pub fn mesh(&self) -> &TriangleMesh {
        self.mesh
    }

    /// Nearest hit along the ray. Equal distances resolve to the smallest
    /// triangle id, so the result does not depend on traversal order.
    pub fn raycast(&self, origin: &Point3, direction: &Point3) -> Option<RayHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Point3::new(1.0 / direction.x, 1.0 / direction.y, 1.0 / direction.z);
        let mut best = Nearest::new();
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if self.nodes[i].bounds().hit(origin, &inv, best.limit()).is_none() {
                continue;
            }
            match self.nodes[i] {
                Node::Leaf { start, end, .. } => {
                    for &t in &self.order[start..end] {
                        if let Some(d) = intersect(self.mesh, t, origin, direction) {
                            best.push(d, t);
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        best.finish(origin, direction)
    }
}

fn build(
    nodes: &mut Vec<Node>,
    order: &mut [usize],
    start: usize,
    end: usize,
    boxes: &[Aabb],
    centroids: &[Point3],
) -> usize {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &t in &order[start..end] {
        bounds.merge(&boxes[t]);
        cbounds.grow(&centroids[t]);
    }
    let index = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { bounds, start, end });
        return index;
    }
    let extent = cbounds.hi - cbounds.lo;
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };
    let mid = (start + end) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        centroids[a][axis]
            .total_cmp(&centroids[b][axis])
            .then(a.cmp(&b))
    });
    nodes.push(Node::Leaf {
        bounds,
        start,
        end,
    });
    let left = build(nodes, order, start, mid, boxes, centroids);
    let right = build(nodes, order, mid, end, boxes, centroids);
    nodes[index] = Node::Inner {
        bounds,
        left,
        right,
    };
    index
}

/// Möller–Trumbore with inclusive edges, so a ray through a shared edge hits
/// both neighbours and the tie-break picks one.
fn intersect(mesh: &TriangleMesh, t: usize, origin: &Point3, dir: &Point3) -> Option<f64> {
    let [a, b, c] = mesh.triangle_points(t);
    let e1 = b - a;
    let e2 = c - a;
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < EPS * e1.norm() * e2.norm() {
        return None;
    }
    let inv_det = 1.0 / det;
    let s = origin - a;
    let u = s.dot(&p) * inv_det;
    if !(-EPS..=1.0 + EPS).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv_det;
    if v < -EPS || u + v > 1.0 + EPS {
        return None;
    }
    let dist = e2.dot(&q) * inv_det;
    (dist > EPS).then_some(dist)
}

/// Single-ray query without a prebuilt hierarchy.
pub fn raycast(mesh: &TriangleMesh, origin: &Point3, direction: &Point3) -> Option<RayHit> {
    let mut best = Nearest::new();
    for t in 0..mesh.triangles.len() {
        if let Some(d) = intersect(mesh, t, origin, direction) {
            best.push(d, t);
        }
    }
    best.finish(origin, direction)
}
