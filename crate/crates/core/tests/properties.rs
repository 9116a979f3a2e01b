mod common;

use std::sync::Arc;

use cnc_vem::elasticity::{assemble, local_stiffness, solve_problem, Discretization, Material, NeumannMode};
use cnc_vem::geometry::Vec3;
use cnc_vem::harness::{manufactured_problem, ExactSolution, PolynomialSolution};
use cnc_vem::mesh::{generate_box, mesh_from_json, mesh_to_json};
use cnc_vem::sparse::CsrMatrix;
use cnc_vem::{Mesh64, SolverKind};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{cell_suite, random_hexahedron, random_prism, truncated_box, TestCell};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

fn labels(mesh: &Mesh64) -> Vec<String> {
    mesh.boundary_labels().iter().map(|s| s.to_string()).collect()
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn box_refinement_halves_every_diameter(n in 1usize..4, w in 0.2f64..3.0) {
        let coarse = generate_box::<f64>([n; 3], [0.0; 3], [w, w, w]).unwrap();
        let fine = generate_box::<f64>([2 * n; 3], [0.0; 3], [w, w, w]).unwrap();
        let hc = coarse.cell_geometry(0).diameter;
        for c in 0..fine.num_cells() {
            prop_assert!((fine.cell_geometry(c).diameter - hc / 2.0).abs() < 1e-14 * hc);
        }
    }

    #[test]
    fn prism_volume_ignores_shear(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_prism(&mut rng);
        // volume = base area x height, independent of the top shift
        let bottom = m.boundary_tags()["bottom"][0];
        let top = m.boundary_tags()["top"][0];
        let height = m.face_geometry(top).centroid.z - m.face_geometry(bottom).centroid.z;
        let expected = m.face_geometry(bottom).area * height;
        prop_assert!((m.cell_geometry(0).volume - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn json_round_trip_preserves_geometry(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = truncated_box(&mut rng);
        let back: Mesh64 = mesh_from_json(&mesh_to_json(&m)).unwrap();
        prop_assert_eq!(back.faces().len(), m.faces().len());
        prop_assert_eq!(labels(&back), labels(&m));
        prop_assert!((back.cell_geometry(0).volume - m.cell_geometry(0).volume).abs() < 1e-14);
    }

    #[test]
    fn csr_product_matches_dense(entries in prop::collection::vec((0usize..8, 0usize..8, -5.0f64..5.0), 1..40),
                                 x in prop::collection::vec(-1.0f64..1.0, 8)) {
        let a = CsrMatrix::from_triplets(8, entries.clone());
        let mut dense = nalgebra::DMatrix::<f64>::zeros(8, 8);
        for (i, j, v) in &entries {
            dense[(*i, *j)] += v;
        }
        let mut y = vec![0.0; 8];
        a.mul_vec(&x, &mut y);
        let yd = &dense * nalgebra::DVector::from_column_slice(&x);
        for i in 0..8 {
            prop_assert!((y[i] - yd[i]).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn stiffness_scales_linearly_with_the_cell(seed in any::<u64>(), s in 0.1f64..10.0, k in 1usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_prism(&mut rng);
        let scaled = m.transformed(s, Vec3::new(0.3, -2.0, 1.0)).unwrap();
        let mat = Material { lambda: 1.7, mu: 0.6 };
        let a = local_stiffness(&Discretization::new(m, k).unwrap().elements[0], &mat);
        let b = local_stiffness(&Discretization::new(scaled, k).unwrap().elements[0], &mat);
        // both terms of the 3D elastic energy scale like the length
        prop_assert!((b - a.clone() * s).amax() < 1e-9 * s * a.amax());
    }

    #[test]
    fn stiffness_is_symmetric_positive_semidefinite(seed in any::<u64>(), mask in any::<u32>(), k in 1usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let suite = cell_suite(&mut rng);
        let cell = &suite[(seed % suite.len() as u64) as usize];
        let mesh = cell.tagged(mask & cell.all_mask());
        let a = local_stiffness(&Discretization::new(mesh, k).unwrap().elements[0], &Material { lambda: 1.0, mu: 1.0 });
        prop_assert!((&a - a.transpose()).amax() < 1e-12 * a.amax());
        let min = a.clone().symmetric_eigen().eigenvalues.min();
        prop_assert!(min > -1e-10 * a.amax());
    }

    #[test]
    fn random_hexahedra_pass_the_patch_test(seed in any::<u64>(), mask in 0u32..64, k in 1usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cell = TestCell { name: "hex".into(), mesh: random_hexahedron(&mut rng) };
        let mesh = cell.tagged(mask);
        let exact = Arc::new(PolynomialSolution::random(k, seed));
        let names = labels(&mesh);
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let problem = manufactured_problem(exact.clone(), Material { lambda: 2.0, mu: 1.0 }, &refs,
                                           &["bottom", "side0", "side1"], NeumannMode::Face);
        let (disc, u) = solve_problem(mesh, k, &problem, SolverKind::Direct).unwrap();
        let reference = disc.interpolate(&|x| exact.value(x));
        let err = u.iter().zip(&reference).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        prop_assert!(err < 1e-8, "error {}", err);
    }

    #[test]
    fn assembly_is_reproducible(n in 1usize..3, k in 1usize..=2) {
        let mesh = generate_box::<f64>([n, n, 2], [0.0; 3], [1.0; 3]).unwrap();
        let exact = Arc::new(PolynomialSolution::random(k + 1, 3));
        let names = labels(&mesh);
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let problem = manufactured_problem(exact, Material { lambda: 1.0, mu: 1.0 }, &refs, &["z0"], NeumannMode::Face);
        let disc = Discretization::new(mesh, k).unwrap();
        let a = assemble(&disc, &problem).unwrap();
        let b = assemble(&disc, &problem).unwrap();
        prop_assert_eq!(a.matrix, b.matrix);
        prop_assert_eq!(a.rhs, b.rhs);
    }
}
