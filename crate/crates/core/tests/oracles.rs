use num_complex::Complex64;
use zeroscope::oracle::{brute_force_z, density_of_states, dos_cylinder, transfer_matrix_z};
use zeroscope::zeros::{polynomial_roots, ZeroKind};
use zeroscope::{build_chain, build_cylinder};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn periodic_chain_matches_transfer_eigenvalues() {
    // weight e^{-K s s'}: eigenvalues 2 cosh K and -2 sinh K
    for &(n, k) in &[(5, c(0.3, 0.7)), (8, c(-0.45, 0.2)), (11, c(0.9, -1.1))] {
        let z = brute_force_z(&build_chain(n, true, k, c(0.0, 0.0)).unwrap())
            .unwrap()
            .to_complex();
        let exact = (2.0 * k.cosh()).powi(n as i32) + (-2.0 * k.sinh()).powi(n as i32);
        assert!(rel(z, exact) < 1e-12, "N={n}: {z} vs {exact}");
    }
}

#[test]
fn free_spins_in_a_field() {
    let h = c(0.4, -0.3);
    let model = build_chain(6, false, c(0.0, 0.0), h).unwrap();
    let z = brute_force_z(&model).unwrap().to_complex();
    assert!(rel(z, (2.0 * h.cosh()).powi(6)) < 1e-13);
}

#[test]
fn transfer_matrix_agrees_with_enumeration_and_dos() {
    for &(n, l) in &[(3, 2), (3, 4), (4, 3)] {
        let (kx, ky, h) = (c(0.31, -0.2), c(-0.12, 0.45), c(0.2, 0.1));
        let model = build_cylinder(n, l, kx, ky, h).unwrap();
        let brute = brute_force_z(&model).unwrap();
        let tm = transfer_matrix_z(n, l, kx, ky, h).unwrap();
        assert!(rel(tm.to_complex(), brute.to_complex()) < 1e-11, "{n}x{l}");

        let iso = build_cylinder(n, l, kx, kx, h).unwrap();
        let dos = density_of_states(&iso).unwrap();
        let from_dos = dos.partition_function(kx, h).to_complex();
        assert!(
            rel(from_dos, brute_force_z(&iso).unwrap().to_complex()) < 1e-11,
            "{n}x{l} dos"
        );
    }
}

#[test]
fn cylinder_dos_matches_enumeration() {
    let model = build_cylinder(3, 3, c(0.1, 0.0), c(0.1, 0.0), c(0.0, 0.0)).unwrap();
    let a = dos_cylinder(3, 3).unwrap();
    let b = density_of_states(&model).unwrap();
    assert_eq!(a.total(), 512);
    assert_eq!(a.entries().collect::<Vec<_>>(), b.entries().collect::<Vec<_>>());
}

#[test]
fn three_by_three_fisher_roots() {
    let dos = dos_cylinder(3, 3).unwrap();
    let roots = polynomial_roots(&dos, ZeroKind::Fisher, c(0.0, 0.0)).unwrap();
    let nonzero: Vec<Complex64> = roots.iter().copied().filter(|x| x.norm() > 0.0).collect();
    assert_eq!(roots.len() - nonzero.len(), 3);
    assert_eq!(nonzero.iter().filter(|x| (*x + 1.0).norm() < 1e-9).count(), 4);
    let frozen = [
        c(-0.4532, 0.4905),
        c(0.2289, 0.6654),
        c(0.5984, 1.5976),
        c(1.6260, 1.4227),
    ];
    for z in frozen {
        for w in [z, z.conj()] {
            let d = nonzero.iter().map(|r| (r - w).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-4, "root near {w} missing ({d})");
        }
    }
}
