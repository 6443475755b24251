use std::collections::HashMap;
use std::f64::consts::PI;

use rand::Rng;

use super::{
    closest_on_triangle, Aabb, Bvh, Closest, GeomError, Point, SeededRng, Surface, Transformable,
    UnitBoxTransform,
};

/// Triangle soup with a nearest-point hierarchy.
///
/// Zero-area triangles are dropped at construction; the number dropped is
/// kept in [`TriMesh::dropped_degenerate`].
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Point<3>>,
    faces: Vec<[u32; 3]>,
    cumulative_area: Vec<f64>,
    bvh: Bvh<3>,
    dropped_degenerate: usize,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point<3>>, faces: Vec<[u32; 3]>) -> Result<Self, GeomError> {
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(GeomError::NonFinite("mesh vertices"));
        }
        for (f, face) in faces.iter().enumerate() {
            for &i in face {
                if i as usize >= vertices.len() {
                    return Err(GeomError::BadIndex {
                        element: f,
                        index: i as usize,
                        count: vertices.len(),
                    });
                }
            }
        }
        let before = faces.len();
        let faces: Vec<[u32; 3]> = faces
            .into_iter()
            .filter(|f| !is_degenerate(&vertices, f))
            .collect();
        let dropped_degenerate = before - faces.len();
        if dropped_degenerate > 0 {
            log::warn!("dropped {dropped_degenerate} degenerate triangles");
        }

        let mut cumulative_area = Vec::with_capacity(faces.len());
        let mut total = 0.0;
        let boxes: Vec<Aabb<3>> = faces
            .iter()
            .map(|f| {
                let [a, b, c] = corners(&vertices, f);
                total += 0.5 * (b - a).cross(&(c - a)).norm();
                cumulative_area.push(total);
                Aabb::from_points([&a, &b, &c])
            })
            .collect();
        let bvh = Bvh::build(&boxes);
        Ok(Self {
            vertices,
            faces,
            cumulative_area,
            bvh,
            dropped_degenerate,
        })
    }

    pub fn vertices(&self) -> &[Point<3>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn dropped_degenerate(&self) -> usize {
        self.dropped_degenerate
    }

    pub fn triangle(&self, face: usize) -> [Point<3>; 3] {
        corners(&self.vertices, &self.faces[face])
    }

    /// Icosahedron refined `subdivisions` times and pushed onto the sphere.
    pub fn icosphere(center: Point<3>, radius: f64, subdivisions: u32) -> Self {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut verts: Vec<Point<3>> = [
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ]
        .iter()
        .map(|v| Point::<3>::new(v[0], v[1], v[2]).normalize())
        .collect();
        let mut faces: Vec<[u32; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
            let mut mid = |a: u32, b: u32, verts: &mut Vec<Point<3>>| -> u32 {
                let key = (a.min(b), a.max(b));
                *midpoints.entry(key).or_insert_with(|| {
                    verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                    (verts.len() - 1) as u32
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for [a, b, c] in faces {
                let ab = mid(a, b, &mut verts);
                let bc = mid(b, c, &mut verts);
                let ca = mid(c, a, &mut verts);
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        let verts = verts.into_iter().map(|v| center + v * radius).collect();
        Self::new(verts, faces).expect("icosphere is well formed")
    }

    /// Open hemisphere `z >= center.z`, a UV grid with `rings` latitude bands.
    pub fn half_sphere(center: Point<3>, radius: f64, rings: usize, segments: usize) -> Self {
        let mut verts = vec![center + Point::<3>::new(0.0, 0.0, radius)];
        for i in 1..=rings {
            let theta = 0.5 * PI * i as f64 / rings as f64;
            for j in 0..segments {
                let phi = 2.0 * PI * j as f64 / segments as f64;
                verts.push(
                    center
                        + Point::<3>::new(
                            radius * theta.sin() * phi.cos(),
                            radius * theta.sin() * phi.sin(),
                            radius * theta.cos(),
                        ),
                );
            }
        }
        let ring = |i: usize, j: usize| (1 + (i - 1) * segments + j % segments) as u32;
        let mut faces = Vec::new();
        for j in 0..segments {
            faces.push([0, ring(1, j), ring(1, j + 1)]);
        }
        for i in 1..rings {
            for j in 0..segments {
                faces.push([ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)]);
                faces.push([ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)]);
            }
        }
        Self::new(verts, faces).expect("half sphere is well formed")
    }

    /// Cylinder side wall around the z axis without caps.
    pub fn open_cylinder(center: Point<3>, radius: f64, height: f64, rings: usize, segments: usize) -> Self {
        let mut verts = Vec::new();
        for i in 0..=rings {
            let z = -0.5 * height + height * i as f64 / rings as f64;
            for j in 0..segments {
                let phi = 2.0 * PI * j as f64 / segments as f64;
                verts.push(center + Point::<3>::new(radius * phi.cos(), radius * phi.sin(), z));
            }
        }
        let at = |i: usize, j: usize| (i * segments + j % segments) as u32;
        let mut faces = Vec::new();
        for i in 0..rings {
            for j in 0..segments {
                faces.push([at(i, j), at(i, j + 1), at(i + 1, j + 1)]);
                faces.push([at(i, j), at(i + 1, j + 1), at(i + 1, j)]);
            }
        }
        Self::new(verts, faces).expect("cylinder is well formed")
    }

    /// Square `z = center.z` of side `size` with a square hole of side `hole`,
    /// triangulated on a regular `cells x cells` grid.
    pub fn plane_with_hole(center: Point<3>, size: f64, hole: f64, cells: usize) -> Self {
        let n = cells + 1;
        let mut verts = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let x = -0.5 * size + size * j as f64 / cells as f64;
                let y = -0.5 * size + size * i as f64 / cells as f64;
                verts.push(center + Point::<3>::new(x, y, 0.0));
            }
        }
        let mut faces = Vec::new();
        for i in 0..cells {
            for j in 0..cells {
                let cx = -0.5 * size + size * (j as f64 + 0.5) / cells as f64;
                let cy = -0.5 * size + size * (i as f64 + 0.5) / cells as f64;
                if cx.abs() < 0.5 * hole && cy.abs() < 0.5 * hole {
                    continue;
                }
                let v = |a: usize, b: usize| (a * n + b) as u32;
                faces.push([v(i, j), v(i, j + 1), v(i + 1, j + 1)]);
                faces.push([v(i, j), v(i + 1, j + 1), v(i + 1, j)]);
            }
        }
        Self::new(verts, faces).expect("plane is well formed")
    }
}

fn corners(vertices: &[Point<3>], f: &[u32; 3]) -> [Point<3>; 3] {
    [vertices[f[0] as usize], vertices[f[1] as usize], vertices[f[2] as usize]]
}

fn is_degenerate(vertices: &[Point<3>], f: &[u32; 3]) -> bool {
    let [a, b, c] = corners(vertices, f);
    let cross = (b - a).cross(&(c - a)).norm();
    let longest = (b - a).norm_squared().max((c - a).norm_squared()).max((c - b).norm_squared());
    cross <= 1e-12 * longest
}

impl Surface<3> for TriMesh {
    fn element_count(&self) -> usize {
        self.faces.len()
    }

    fn closest(&self, p: &Point<3>) -> Option<Closest<3>> {
        self.bvh
            .nearest(p, |f| {
                let [a, b, c] = self.triangle(f);
                let q = closest_on_triangle(p, &a, &b, &c);
                ((p - q).norm_squared(), q)
            })
            .map(|(element, d2, point)| Closest {
                point,
                distance: d2.sqrt(),
                element,
            })
    }

    fn bounds(&self) -> Aabb<3> {
        Aabb::from_points(self.faces.iter().flatten().map(|&i| &self.vertices[i as usize]))
    }

    fn measure(&self) -> f64 {
        self.cumulative_area.last().copied().unwrap_or(0.0)
    }

    fn sample_one(&self, rng: &mut SeededRng) -> Point<3> {
        let target = rng.random::<f64>() * self.measure();
        let f = self
            .cumulative_area
            .partition_point(|&c| c <= target)
            .min(self.faces.len() - 1);
        let [a, b, c] = self.triangle(f);
        let s = rng.random::<f64>().sqrt();
        let r2 = rng.random::<f64>();
        a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2)
    }
}

impl Transformable<3> for TriMesh {
    fn transformed(&self, t: &UnitBoxTransform<3>) -> Self {
        let vertices = self.vertices.iter().map(|v| t.apply(v)).collect();
        let mut out = Self::new(vertices, self.faces.clone()).expect("transform keeps a valid mesh");
        out.dropped_degenerate = self.dropped_degenerate;
        out
    }
}
