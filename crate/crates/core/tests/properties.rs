use cr_augment::analysis::{fit_rate, RATE_FLOOR};
use cr_augment::assembly::{assemble_cr, assemble_p1, evaluate_cr, DofMap};
use cr_augment::dense::{symmetric_eigen, DenseMatrix};
use cr_augment::eigen::{ah_orthonormalize, dense_gevp, gram};
use cr_augment::mesh::{refine_uniform, uniform_mesh};
use cr_augment::pcg::{LinearSolver, Preconditioner};
use cr_augment::sparse::dot;
use cr_augment::transfer::p1_to_cr_embedding;
use proptest::prelude::*;

fn matrix_from(entries: &[f64], n: usize) -> DenseMatrix {
    let mut b = DenseMatrix::zeros(n, n);
    b.data.copy_from_slice(&entries[..n * n]);
    b
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mesh_counts(n in 1usize..24) {
        let mesh = uniform_mesh(n).unwrap();
        prop_assert_eq!(mesh.num_vertices(), (n + 1) * (n + 1));
        prop_assert_eq!(mesh.num_triangles(), 2 * n * n);
        prop_assert_eq!(mesh.num_edges(), 3 * n * n + 2 * n);
        prop_assert_eq!(mesh.num_interior_edges(), 3 * n * n - 2 * n);
        prop_assert_eq!(mesh.num_vertices() + mesh.num_triangles(), mesh.num_edges() + 1);
        let area: f64 = (0..mesh.num_triangles()).map(|t| mesh.signed_area(t)).sum();
        prop_assert!((area - 1.0).abs() < 1e-12);
        prop_assert!((0..mesh.num_triangles()).all(|t| mesh.signed_area(t) > 0.0));
    }

    #[test]
    fn refinement_matches_uniform_counts(n in 1usize..12) {
        let refined = refine_uniform(&uniform_mesh(n).unwrap());
        let direct = uniform_mesh(2 * n).unwrap();
        prop_assert_eq!(refined.num_vertices(), direct.num_vertices());
        prop_assert_eq!(refined.num_edges(), direct.num_edges());
        prop_assert!(refined.validate().is_ok());
    }

    #[test]
    fn cr_matrices_are_symmetric_and_positive(n in 1usize..10, seed in any::<u64>()) {
        let sys = assemble_cr(&uniform_mesh(n).unwrap()).unwrap();
        prop_assert!(sys.stiffness.is_symmetric(1e-14));
        let x: Vec<f64> = (0..sys.dofs.len()).map(|i| ((i as u64 ^ seed) % 97) as f64 - 48.0).collect();
        if x.iter().any(|&v| v != 0.0) {
            prop_assert!(sys.stiffness.inner(&x, &x) > 0.0);
            prop_assert!(sys.mass.inner(&x, &x) > 0.0);
        }
    }

    #[test]
    fn embedding_preserves_values(coarse_n in 1usize..5, levels in 0u32..3, c in proptest::collection::vec(-1.0f64..1.0, 16)) {
        let coarse = uniform_mesh(coarse_n).unwrap();
        let fine = uniform_mesh(coarse_n << levels).unwrap();
        let emb = p1_to_cr_embedding(&coarse, &fine).unwrap();
        let coeffs: Vec<f64> = (0..emb.coarse_dim()).map(|i| c[i % c.len()]).collect();
        let fine_coeffs = emb.prolong(&coeffs);
        // The coarse P1 function and its CR image agree at interior points.
        let points = [[0.31, 0.57], [0.5, 0.5 + 1e-9], [0.83, 0.12]];
        let on_fine = evaluate_cr(&fine, &DofMap::cr(&fine), &fine_coeffs, &points).unwrap();
        let p1_as_cr = p1_to_cr_embedding(&coarse, &coarse).unwrap().prolong(&coeffs);
        let on_coarse = evaluate_cr(&coarse, &DofMap::cr(&coarse), &p1_as_cr, &points).unwrap();
        for (a, b) in on_fine.iter().zip(&on_coarse) {
            prop_assert!((a - b).abs() < 1e-8);
        }
        let p1 = assemble_p1(&coarse).unwrap();
        let cr = assemble_cr(&fine).unwrap();
        let lhs = cr.stiffness.inner(&fine_coeffs, &fine_coeffs);
        let rhs = p1.stiffness.inner(&coeffs, &coeffs);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1.0));
    }

    #[test]
    fn dense_pencil_residuals(n in 1usize..9, a in proptest::collection::vec(-1.0f64..1.0, 64), b in proptest::collection::vec(-1.0f64..1.0, 64)) {
        let (x, y) = (matrix_from(&a, n), matrix_from(&b, n));
        let mut am = x.transpose().matmul(&x);
        let mut mm = y.transpose().matmul(&y);
        for i in 0..n {
            am[(i, i)] += 0.5;
            mm[(i, i)] += 1.0;
        }
        let pairs = dense_gevp(&am, &mm).unwrap();
        for (v, &l) in pairs.vectors.iter().zip(&pairs.eigenvalues) {
            let (av, mv) = (am.mul_vec(v), mm.mul_vec(v));
            let r: f64 = av.iter().zip(&mv).map(|(p, q)| (p - l * q).powi(2)).sum::<f64>().sqrt();
            prop_assert!(r <= 1e-10 * (1.0 + l) * dot(&mv, &mv).sqrt().max(1.0));
            prop_assert!((mm.inner(v, v) - 1.0).abs() < 1e-10);
        }
        prop_assert!(pairs.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn symmetric_eigen_trace(n in 1usize..9, a in proptest::collection::vec(-1.0f64..1.0, 64)) {
        let mut s = matrix_from(&a, n);
        s.symmetrize();
        let eig = symmetric_eigen(&s).unwrap();
        let trace: f64 = (0..n).map(|i| s[(i, i)]).sum();
        let frob: f64 = s.data.iter().map(|x| x * x).sum();
        prop_assert!((eig.values.iter().sum::<f64>() - trace).abs() < 1e-12 * (1.0 + frob));
        prop_assert!((eig.values.iter().map(|x| x * x).sum::<f64>() - frob).abs() < 1e-11 * (1.0 + frob));
    }

    #[test]
    fn orthonormalization_gives_identity_gram(count in 1usize..6, seed in any::<u64>()) {
        let sys = assemble_cr(&uniform_mesh(4).unwrap()).unwrap();
        let n = sys.dofs.len();
        let cols: Vec<Vec<f64>> = (0..count)
            .map(|j| (0..n).map(|i| (((i * 31 + j * 17) as u64).wrapping_mul(seed | 1) % 1000) as f64 / 500.0 - 1.0).collect())
            .collect();
        let q = ah_orthonormalize(&cols, &sys.stiffness, 1e-10).unwrap();
        let g = gram(&q, &sys.stiffness);
        for i in 0..q.len() {
            for j in 0..q.len() {
                let expected = if i == j { 1.0 } else { 0.0 };
                prop_assert!((g[(i, j)] - expected).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn pcg_residual_bound(n in 2usize..12, seed in any::<u64>()) {
        let sys = assemble_cr(&uniform_mesh(n).unwrap()).unwrap();
        let rhs: Vec<f64> = (0..sys.dofs.len()).map(|i| ((i as u64).wrapping_mul(seed | 3) % 101) as f64 - 50.0).collect();
        let solver = LinearSolver::new(&sys.stiffness, Preconditioner::jacobi(&sys.stiffness).unwrap(), 1e-10, 10_000);
        let (x, _) = solver.solve(&rhs).unwrap();
        let ax = sys.stiffness.mul_vec(&x);
        let r: f64 = ax.iter().zip(&rhs).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        prop_assert!(r <= 1e-10 * dot(&rhs, &rhs).sqrt() + 1e-300);
    }

    #[test]
    fn geometric_sequences_fit_exactly(first in 1e-3f64..1.0, ratio in 0.01f64..0.9, len in 3usize..8) {
        let errors: Vec<f64> = (0..len).map(|l| first * ratio.powi(l as i32)).collect();
        prop_assume!(errors.iter().all(|&e| e > RATE_FLOOR));
        prop_assert!((fit_rate(&errors, RATE_FLOOR).unwrap() - ratio).abs() < 1e-10);
    }
}
