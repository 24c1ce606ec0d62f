mod common;

use std::f64::consts::FRAC_PI_4;

use num_complex::Complex64;
use slevolve_core::affine::AffineParams;
use slevolve_core::centred::{betas, periodic_search, CentredParams, Family, SearchOptions, Signature};
use slevolve_core::meshverify::{
    affine_family, centred_family, cone_mesh, cone_residuals, distance_to_plane, mesh_affine, mesh_centred,
    orientation_consistent, signed_volume, sl_residuals, ClosedFamily, ExportFormat, Mesh, Projection, RotatedPlane,
    Tangents,
};
use slevolve_core::ode::OdeOptions;
use slevolve_core::threefold::{conformal_map, cross_section, Affine3, Affine3Variant};

use common::linspace;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn planes_have_the_expected_phase() {
    let flat = RotatedPlane { phases: vec![0.3, -0.3, 0.0] };
    let r = sl_residuals(&flat, &[vec![0.1, 0.2, 0.3], vec![-1.0, 0.5, 2.0]], Tangents::Analytic).unwrap();
    assert!(r.max_residual() <= 1e-12);
    let tilted = RotatedPlane { phases: vec![FRAC_PI_4, 0.0, 0.0] };
    let r = sl_residuals(&tilted, &[vec![0.4, 0.1, -0.2]], Tangents::Analytic).unwrap();
    assert!(r.max_omega_residual <= 1e-12);
    assert!((r.max_im_omega_residual - FRAC_PI_4.sin()).abs() <= 1e-10);
    let fd = sl_residuals(&tilted, &[vec![0.4, 0.1, -0.2]], Tangents::FiniteDifference(1e-4)).unwrap();
    assert!((fd.max_im_omega_residual - FRAC_PI_4.sin()).abs() <= 1e-10);
}

#[test]
fn zero_invariant_families_are_planar() {
    let sig = Signature::new(2, vec![2.0, 3.0, 1.2]).unwrap();
    let p = CentredParams::new(2, sig.alphas.clone(), 0.0, 1.0).unwrap();
    let phases: Vec<f64> = p.initial_w().unwrap().iter().map(|z| z.arg()).collect();
    let mesh = mesh_centred(&p, 1.0, (-1.0, 1.0), 5, 4, 1.5, OdeOptions::tight()).unwrap();
    assert!(mesh.vertices.iter().all(|v| distance_to_plane(v, &phases) <= 1e-10));

    let q = AffineParams::new(2, sig.alphas.clone(), 0.0, c(0.4, 0.0)).unwrap();
    let mut phases: Vec<f64> = q.initial_state().unwrap().w.iter().map(|z| z.arg()).collect();
    phases.push(0.0);
    let mesh = mesh_affine(&q, (-1.0, 1.0), 5, 4, 1.5, OdeOptions::tight()).unwrap();
    assert!(mesh.vertices.iter().all(|v| distance_to_plane(v, &phases) <= 1e-10));
}

#[test]
fn cone_residuals_do_not_depend_on_radius() {
    let alphas = [1.0, 1.5, 3.0];
    let sig = Signature::new(1, alphas.to_vec()).unwrap();
    let p = CentredParams::new(1, alphas.to_vec(), 0.6 * sig.a_max(), 0.0).unwrap();
    let cs = cross_section(alphas).unwrap();
    let grid = conformal_map(&p, &linspace(0.0, cs.period().unwrap(), 12), &linspace(-1.0, 1.0, 12), OdeOptions::tight()).unwrap();
    let base = cone_residuals(&grid, 1.0);
    assert!(base.max_residual() <= 1e-8);
    for r in [0.1, 2.5, 40.0] {
        let other = cone_residuals(&grid, r);
        assert!((other.max_omega_residual - base.max_omega_residual).abs() <= 1e-12);
        assert!((other.max_im_omega_residual - base.max_im_omega_residual).abs() <= 1e-12);
    }
    let mesh = cone_mesh(&grid, &[0.5, 1.0, 2.0]).unwrap();
    assert_eq!(mesh.shape, vec![3, 12, 12]);
    assert!(mesh.analytic_report().unwrap().max_residual() <= 1e-8);
    assert!(cone_mesh(&grid, &[0.0]).is_err());
}

#[test]
fn periodic_family_closes_up() {
    let sol = periodic_search(&Family::Sym, &SearchOptions::default()).unwrap().remove(0);
    let p = sol.params(1.0).unwrap();
    let span = sol.b as f64 * sol.period;
    let mesh = mesh_centred(&p, 1.0, (0.0, span), 3, 6, 1.0, OdeOptions::tight()).unwrap();
    let block = mesh.vertices.len() / 3;
    for k in 0..block {
        assert!(max_gap(&mesh.vertices[k], &mesh.vertices[2 * block + k]) <= 1e-6);
    }
}

#[test]
fn affine_mesh_matches_closed_form() {
    let q = AffineParams::new(2, vec![1.0, 1.0], 0.35, c(0.1, 0.2)).unwrap();
    let s = q.initial_state().unwrap();
    let sol = Affine3::from_initial(Affine3Variant::A2, s.w[0], s.w[1], s.beta).unwrap();
    let mesh = mesh_affine(&q, (-0.5, 0.8), 6, 5, 1.0, OdeOptions::tight()).unwrap();
    for (p, v) in mesh.params.iter().zip(&mesh.vertices) {
        let z = sol.point(p[1], p[2], p[0]);
        let want: Vec<f64> = z.iter().flat_map(|w| [w.re, w.im]).collect();
        assert!(max_gap(v, &want) <= 1e-8);
    }
}

#[test]
fn case_d_paraboloids_translate_each_period() {
    let sig = Signature::new(2, vec![2.0, 3.0, 1.2]).unwrap();
    let q = AffineParams::new(2, sig.alphas.clone(), 0.3 * sig.a_max(), c(0.0, 0.0)).unwrap();
    let b = betas(&q.centred().unwrap()).unwrap();
    let fam = affine_family(&q, &[0.0, b.period], 1.0, OdeOptions::tight()).unwrap();
    // after one period the letters have turned through the betas and the
    // last coordinate has moved by -i A T
    let shift = c(0.0, -q.big_a * b.period);
    for qq in [vec![0.2, -0.3, 0.5], vec![-0.9, 0.1, 0.0]] {
        let (v0, _) = fam.sample(0, &qq);
        let (v1, _) = fam.sample(1, &qq);
        let mut want = Vec::new();
        for j in 0..3 {
            let z = c(v0[2 * j], v0[2 * j + 1]) * Complex64::from_polar(1.0, b.betas[j]);
            want.extend([z.re, z.im]);
        }
        want.extend([v0[6] + shift.re, v0[7] + shift.im]);
        assert!(max_gap(&v1, &want) <= 1e-8, "{}", max_gap(&v1, &want));
    }
}

#[test]
fn generic_centred_family_is_special_lagrangian() {
    let sig = Signature::new(2, vec![2.0, 3.0, 1.2]).unwrap();
    let p = CentredParams::new(2, sig.alphas.clone(), 0.5 * sig.a_max(), 1.0).unwrap();
    let fam = centred_family(&p, 1.0, &linspace(-2.0, 2.0, 21), 2.0, OdeOptions::tight()).unwrap();
    let r = fam.residuals(300, 5).unwrap();
    assert!(r.max_residual() <= 1e-6 && r.sample_count >= 290);
}

#[test]
fn finite_difference_frames_converge_at_second_order() {
    let sol = Affine3::new(Affine3Variant::A1, c(0.8, 0.2), c(0.3, -0.4), c(0.0, 0.0)).unwrap();
    let fam = ClosedFamily::affine3(sol, 1.0).unwrap();
    let err = |n: usize| {
        let mesh = fam.mesh(&linspace(-0.5, 0.5, n + 1), n).unwrap();
        mesh.fd_report().unwrap().max_residual()
    };
    let (coarse, fine) = (err(8), err(16));
    assert!(fine < coarse && coarse / fine > 3.0, "{coarse} -> {fine}");
}

#[test]
fn serialisation_formats() {
    let sol = Affine3::new(Affine3Variant::A2, c(0.8, 0.2), c(0.3, -0.4), c(0.0, 0.0)).unwrap();
    let mesh = ClosedFamily::affine3(sol, 1.0).unwrap().mesh(&linspace(0.0, 1.0, 3), 2).unwrap();
    let back = Mesh::from_json(&mesh.to_json().unwrap()).unwrap();
    assert_eq!(back, mesh);
    assert_eq!(mesh.csv_header(), "t,param1,param2,x1,y1,x2,y2,x3,y3,res_omega,res_imomega");
    assert_eq!(mesh.to_csv().lines().count(), 1 + 27);
    let obj = mesh.to_obj(None).unwrap();
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 27);
    assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), mesh.faces.len());
    assert!(orientation_consistent(&mesh.faces));
    let ply = mesh.to_ply(Some(&"0,2,4".parse::<Projection>().unwrap())).unwrap();
    assert!(ply.contains("element vertex 27"));
    assert!("stl".parse::<ExportFormat>().is_err());
    let mut broken = mesh.clone();
    broken.vertices.pop();
    assert!(Mesh::from_json(&broken.to_json().unwrap()).is_err());
}

#[test]
fn unit_cube_volume() {
    let pts: Vec<[f64; 3]> = (0..8).map(|i| [(i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64]).collect();
    let faces = vec![
        [0, 2, 3, 1],
        [4, 5, 7, 6],
        [0, 1, 5, 4],
        [2, 6, 7, 3],
        [0, 4, 6, 2],
        [1, 3, 7, 5],
    ];
    assert!(orientation_consistent(&faces));
    assert!((signed_volume(&pts, &faces) - 1.0).abs() <= 1e-15);
    let flipped: Vec<[usize; 4]> = faces.iter().map(|f| [f[3], f[2], f[1], f[0]]).collect();
    assert!((signed_volume(&pts, &flipped) + 1.0).abs() <= 1e-15);
    let mut mixed = faces.clone();
    mixed[0] = flipped[0];
    assert!(!orientation_consistent(&mixed));
}
