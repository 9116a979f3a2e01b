//! Randomized single-cell meshes shared by the integration tests.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;

use cnc_vem::geometry::{mean_point, newell_normal, Vec3};
use cnc_vem::mesh::{generate_box, generate_prism, FaceSpec, KindRule, MeshBuilder};
use cnc_vem::Mesh64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub struct TestCell {
    pub name: String,
    pub mesh: Mesh64,
}

impl TestCell {
    pub fn labels(&self) -> Vec<String> {
        self.mesh.boundary_labels().iter().map(|s| s.to_string()).collect()
    }

    /// Same cell with the labelled faces selected by `mask` made nonconforming.
    pub fn tagged(&self, mask: u32) -> Mesh64 {
        let nc: Vec<String> = self
            .labels()
            .into_iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, l)| l)
            .collect();
        self.mesh.tag_face_kinds(&KindRule::new(nc)).expect("labels exist")
    }

    pub fn all_mask(&self) -> u32 {
        (1u32 << self.labels().len()) - 1
    }
}

pub fn random_box(rng: &mut ChaCha8Rng) -> Mesh64 {
    let lo: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
    let hi: [f64; 3] = std::array::from_fn(|d| lo[d] + rng.gen_range(0.3..2.0));
    generate_box([1, 1, 1], lo, hi).unwrap()
}

/// Box with the corner at `hi` cut off by a plane: 10 vertices, 7 faces (one label per face).
pub fn truncated_box(rng: &mut ChaCha8Rng) -> Mesh64 {
    let d: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.5..1.5));
    let t: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.2..0.7));
    let corner = |i: usize, j: usize, k: usize| Vec3::new(i as f64 * d[0], j as f64 * d[1], k as f64 * d[2]);
    let mut b = MeshBuilder::new();
    // corners 000..110 without 111, then the three cut points
    let corners = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0), (0, 0, 1), (1, 0, 1), (0, 1, 1)];
    for &(i, j, k) in &corners {
        b.vertices.push(corner(i, j, k));
    }
    b.vertices.push(Vec3::new(d[0] * (1.0 - t[0]), d[1], d[2])); // 7: on the x edge
    b.vertices.push(Vec3::new(d[0], d[1] * (1.0 - t[1]), d[2])); // 8: on the y edge
    b.vertices.push(Vec3::new(d[0], d[1], d[2] * (1.0 - t[2]))); // 9: on the z edge
    let loops: [&[usize]; 7] = [
        &[0, 2, 6, 4],
        &[0, 4, 5, 1],
        &[0, 1, 3, 2],
        &[1, 3, 9, 8, 5],
        &[2, 3, 9, 7, 6],
        &[4, 5, 8, 7, 6],
        &[7, 8, 9],
    ];
    finish_single_cell(b, &loops)
}

/// Random convex prism with 3 to 7 sides and a sheared top.
pub fn random_prism(rng: &mut ChaCha8Rng) -> Mesh64 {
    let n = rng.gen_range(3..=7);
    let mut angles: Vec<f64> = (0..n)
        .map(|i| 2.0 * PI * (i as f64 + rng.gen_range(-0.3..0.3)) / n as f64)
        .collect();
    angles.sort_by(f64::total_cmp);
    let base: Vec<[f64; 2]> = angles.iter().map(|a| [a.cos(), a.sin()]).collect();
    let height = rng.gen_range(0.4..1.5);
    let shear = [rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)];
    generate_prism(&base, height, shear).unwrap()
}

/// Cell of a polar mesh: a ring sector between two radii, or a wedge touching the axis.
pub fn polar_cell(rng: &mut ChaCha8Rng, wedge: bool) -> Mesh64 {
    let n_theta = rng.gen_range(6..=24) as f64;
    let (t0, t1) = {
        let t = rng.gen_range(0.0..2.0 * PI);
        (t, t + 2.0 * PI / n_theta)
    };
    let r1 = rng.gen_range(0.3..1.0);
    let height = rng.gen_range(0.1..0.6);
    let base = if wedge {
        vec![[0.0, 0.0], [r1 * t0.cos(), r1 * t0.sin()], [r1 * t1.cos(), r1 * t1.sin()]]
    } else {
        let r0 = r1 * rng.gen_range(0.4..0.85);
        vec![
            [r0 * t0.cos(), r0 * t0.sin()],
            [r1 * t0.cos(), r1 * t0.sin()],
            [r1 * t1.cos(), r1 * t1.sin()],
            [r0 * t1.cos(), r0 * t1.sin()],
        ]
    };
    generate_prism(&base, height, [0.0, 0.0]).unwrap()
}

/// Hexahedron with a random trapezoidal base and a sheared top.
pub fn random_hexahedron(rng: &mut ChaCha8Rng) -> Mesh64 {
    let base = [
        [0.0, 0.0],
        [rng.gen_range(0.8..1.2), rng.gen_range(-0.1..0.1)],
        [rng.gen_range(0.9..1.3), rng.gen_range(0.8..1.2)],
        [rng.gen_range(-0.2..0.2), rng.gen_range(0.7..1.1)],
    ];
    generate_prism(&base, rng.gen_range(0.6..1.4), [rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)]).unwrap()
}

fn finish_single_cell(mut b: MeshBuilder<f64>, loops: &[&[usize]]) -> Mesh64 {
    let center = mean_point(&b.vertices);
    let mut cell = Vec::new();
    let mut tags = BTreeMap::new();
    for (i, l) in loops.iter().enumerate() {
        let pts: Vec<Vec3<f64>> = l.iter().map(|&v| b.vertices[v]).collect();
        let outward = newell_normal(&pts).dot(&(mean_point(&pts) - center)) > 0.0;
        b.faces.push(FaceSpec {
            vertices: l.to_vec(),
            surface: None,
        });
        cell.push((i, outward));
        tags.insert(format!("f{i}"), vec![i]);
    }
    b.cells.push(cell);
    b.boundary_tags = tags;
    b.build().unwrap()
}

/// At least 20 planar cells: boxes, truncated boxes, prisms and polar sectors.
pub fn cell_suite(rng: &mut ChaCha8Rng) -> Vec<TestCell> {
    let mut out = Vec::new();
    for i in 0..6 {
        out.push(TestCell { name: format!("box{i}"), mesh: random_box(rng) });
        out.push(TestCell { name: format!("truncated{i}"), mesh: truncated_box(rng) });
        out.push(TestCell { name: format!("prism{i}"), mesh: random_prism(rng) });
        out.push(TestCell { name: format!("polar{i}"), mesh: polar_cell(rng, i % 3 == 0) });
    }
    out
}
