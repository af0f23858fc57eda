use super::ray::{intersect_sheared, ShearedRay, T_EPSILON};
use super::{FacingFilter, Point3, Ray, RayHit, TriangleMesh, Vector3};

const MAX_LEAF_TRIANGLES: usize = 4;
const STACK_DEPTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Point3::from(Vector3::repeat(f64::INFINITY)),
            max: Point3::from(Vector3::repeat(f64::NEG_INFINITY)),
        }
    }

    pub fn grow(&mut self, p: &Point3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn contains(&self, other: &Aabb, slack: f64) -> bool {
        (0..3).all(|k| other.min[k] >= self.min[k] - slack && other.max[k] <= self.max[k] + slack)
    }

    /// Entry distance of the ray into the box, if it overlaps `[0, t_max]`.
    fn entry(&self, origin: &Point3, inv_dir: &Vector3, t_max: f64) -> Option<f64> {
        let mut t0 = -T_EPSILON;
        let mut t1 = t_max;
        for k in 0..3 {
            if inv_dir[k].is_infinite() {
                // Direction component is zero: the slab is either always or never crossed.
                if origin[k] < self.min[k] || origin[k] > self.max[k] {
                    return None;
                }
                continue;
            }
            let a = (self.min[k] - origin[k]) * inv_dir[k];
            let b = (self.max[k] - origin[k]) * inv_dir[k];
            let (near, far) = if a <= b { (a, b) } else { (b, a) };
            t0 = t0.max(near);
            // Conservative far bound against rounding in the slab products.
            t1 = t1.min(far + far.abs() * 4.0 * f64::EPSILON);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

/// One node of a flattened BVH in depth-first order.
///
/// Internal nodes have `count == 0`; their left child is the next node and
/// `index` holds the right child. Leaves cover `count` entries of the
/// triangle permutation starting at `index`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvhNode {
    pub bounds: Aabb,
    pub index: u32,
    pub count: u32,
}

impl BvhNode {
    pub fn is_leaf(&self) -> bool {
        self.count > 0
    }
}

/// Bounding volume hierarchy over a mesh's triangles.
///
/// Built by median split on the longest axis of the centroid bounds, with at
/// most four triangles per leaf. The tree stores indices only; queries take
/// the mesh it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Bvh {
    nodes: Vec<BvhNode>,
    order: Vec<u32>,
}

struct BuildItem {
    tri: u32,
    centroid: Point3,
    bounds: Aabb,
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Bvh {
        let mut items: Vec<BuildItem> = (0..mesh.triangle_count())
            .map(|i| {
                let mut bounds = Aabb::empty();
                for p in mesh.corners(i) {
                    bounds.grow(&p);
                }
                BuildItem {
                    tri: i as u32,
                    centroid: mesh.centroid(i),
                    bounds,
                }
            })
            .collect();
        let mut nodes = Vec::with_capacity(2 * items.len() / MAX_LEAF_TRIANGLES + 1);
        build_recursive(&mut items, 0, &mut nodes);
        Bvh {
            nodes,
            order: items.iter().map(|it| it.tri).collect(),
        }
    }

    pub fn nodes(&self) -> &[BvhNode] {
        &self.nodes
    }

    /// Triangle ids in leaf order.
    pub fn triangle_order(&self) -> &[u32] {
        &self.order
    }

    pub fn leaf_triangles(&self, node: &BvhNode) -> &[u32] {
        &self.order[node.index as usize..(node.index + node.count) as usize]
    }

    /// Nearest hit among triangles passing `filter`; ties go to the lowest
    /// triangle id.
    pub fn raycast_first_hit(
        &self,
        mesh: &TriangleMesh,
        ray: &Ray,
        filter: FacingFilter,
    ) -> Option<RayHit> {
        let dir = ray.direction();
        let inv_dir = Vector3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let sheared = ShearedRay::new(dir);
        let origin = ray.origin();

        let mut best_t = ray.t_max();
        let mut best: Option<(u32, super::Facing)> = None;
        let mut stack = [0u32; STACK_DEPTH];
        let mut top = 0usize;

        self.nodes[0].bounds.entry(origin, &inv_dir, best_t)?;
        stack[0] = 0;
        top += 1;

        while top > 0 {
            top -= 1;
            let node = &self.nodes[stack[top] as usize];
            if node.is_leaf() {
                for &tri in self.leaf_triangles(node) {
                    let corners = mesh.corners(tri as usize);
                    let bounded = ray.with_t_max(best_t);
                    if let Some((t, facing)) = intersect_sheared(
                        &bounded,
                        &sheared,
                        &corners,
                        &mesh.normals()[tri as usize],
                        filter,
                    ) {
                        let better = match best {
                            None => true,
                            Some((id, _)) => t < best_t || (t == best_t && tri < id),
                        };
                        if better {
                            best_t = t;
                            best = Some((tri, facing));
                        }
                    }
                }
                continue;
            }
            let left = stack[top] + 1;
            let right = node.index;
            let tl = self.nodes[left as usize].bounds.entry(origin, &inv_dir, best_t);
            let tr = self.nodes[right as usize].bounds.entry(origin, &inv_dir, best_t);
            // Push the farther child first so the nearer one is popped next.
            match (tl, tr) {
                (Some(a), Some(b)) => {
                    let (near, far) = if a <= b { (left, right) } else { (right, left) };
                    stack[top] = far;
                    stack[top + 1] = near;
                    top += 2;
                }
                (Some(_), None) => {
                    stack[top] = left;
                    top += 1;
                }
                (None, Some(_)) => {
                    stack[top] = right;
                    top += 1;
                }
                (None, None) => {}
            }
        }

        best.map(|(triangle, facing)| RayHit {
            t: best_t,
            triangle,
            point: ray.at(best_t),
            facing,
        })
    }
}

fn build_recursive(items: &mut [BuildItem], offset: u32, nodes: &mut Vec<BvhNode>) -> usize {
    let mut bounds = Aabb::empty();
    let mut centroid_bounds = Aabb::empty();
    for it in items.iter() {
        bounds = bounds.union(&it.bounds);
        centroid_bounds.grow(&it.centroid);
    }
    let me = nodes.len();
    nodes.push(BvhNode {
        bounds,
        index: offset,
        count: items.len() as u32,
    });
    if items.len() <= MAX_LEAF_TRIANGLES {
        return me;
    }

    let extent = centroid_bounds.max - centroid_bounds.min;
    let axis = extent.imax();
    let mid = items.len() / 2;
    items.select_nth_unstable_by(mid, |a, b| {
        a.centroid[axis]
            .total_cmp(&b.centroid[axis])
            .then(a.tri.cmp(&b.tri))
    });
    let (lo, hi) = items.split_at_mut(mid);
    build_recursive(lo, offset, nodes);
    let right = build_recursive(hi, offset + mid as u32, nodes);
    nodes[me].index = right as u32;
    nodes[me].count = 0;
    me
}
