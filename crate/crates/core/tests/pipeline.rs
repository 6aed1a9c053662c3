use std::sync::Arc;

use feec_heat_core::hodge::{expected_harmonic_dim, harmonic_basis, hodge_laplacian_solve, MixedPair};
use feec_heat_core::mesh::{build_square_annulus, read_mesh, write_mesh};
use feec_heat_core::mms::{convergence_study, run_level, CaseName, InitKind, ManufacturedCase};

#[test]
fn study_errors_positive_and_decreasing() {
    for (name, r) in [(CaseName::Annulus2d, 1), (CaseName::Annulus2d, 2), (CaseName::Square2dSteady, 1)] {
        let case = ManufacturedCase::by_name(name);
        let t = convergence_study(&case, r, 3, 1e-3, 0.01, InitKind::EllipticProjection).unwrap();
        assert_eq!(t.rows.len(), 3);
        for w in t.rows.windows(2) {
            let (a, b) = (&w[0].errors, &w[1].errors);
            assert!(b.sigma > 0.0 && b.dsigma > 0.0 && b.u > 0.0);
            assert!(b.sigma < a.sigma && b.dsigma < a.dsigma && b.u < a.u, "{name} r={r}");
            assert_eq!(w[1].h, 0.5 * w[0].h);
        }
    }
}

#[test]
fn study_rows_match_single_runs() {
    let case = ManufacturedCase::by_name(CaseName::Annulus2d);
    let t = convergence_study(&case, 1, 2, 2e-3, 0.01, InitKind::Zero).unwrap();
    let run = run_level(&case, 1, 1, 2e-3, 0.01, InitKind::Zero).unwrap();
    assert_eq!(t.rows[1].errors, run.errors);
    assert_eq!(run.steps, 5);
    assert_eq!(run.harmonic_dim, None);
    assert!(run.max_codifferential_residual <= 1e-10);
}

#[test]
fn annulus_mesh_survives_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("annulus.mesh");
    let mesh = build_square_annulus(4).unwrap();
    write_mesh(&mesh, &path).unwrap();
    let back = read_mesh(&path).unwrap();
    assert_eq!(expected_harmonic_dim(&back), 1);
    let (a, b) = (MixedPair::new(Arc::new(mesh), 1).unwrap(), MixedPair::new(Arc::new(back), 1).unwrap());
    assert_eq!(a.m_u.to_dense(), b.m_u.to_dense());
    assert_eq!(a.k.to_dense(), b.k.to_dense());
}

#[test]
fn harmonic_source_has_zero_solution() {
    // f = harmonic form: u = 0, sigma = 0, p = f
    let p = MixedPair::new(Arc::new(build_square_annulus(8).unwrap()), 1).unwrap();
    let h = harmonic_basis(&p, 1).unwrap();
    let q = h.fields[0].clone();
    let f = move |x: &feec_heat_core::geometry::Vec3| {
        let mesh = q.space.mesh();
        let c = (0..mesh.num_cells())
            .find(|&c| mesh.cell_geometry(c).barycentric(x).iter().all(|&l| l >= -1e-12))
            .unwrap();
        let g = mesh.cell_geometry(c);
        let mut scratch = feec_heat_core::elements::BasisValues::with_len(q.space.local_dim());
        q.eval(c, &g, &g.barycentric(x), &mut scratch).0
    };
    let sol = hodge_laplacian_solve(&p, &h, &f).unwrap();
    assert!(p.norm_u(&sol.u.coeffs) < 1e-10);
    assert!((sol.p_coeffs[0].abs() - 1.0).abs() < 1e-10);
}
