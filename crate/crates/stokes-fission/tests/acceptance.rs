//! Acceptance suite: every release criterion as one test, each printing a
//! pass/fail line (visible with `cargo test --test acceptance -- --nocapture`).

use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use stokes_fission::exponent::{rat, Coeff, Exponent};
use stokes_fission::fission::FissionModel;
use stokes_fission::fusion::{fuse, internally_fused_double, twisted_double};
use stokes_fission::linalg::{frob, inverse, random_invertible, rel_err, zeros, BlockStructure};
use stokes_fission::qh::{verify_space, AxiomReport, QhSpace};
use stokes_fission::stokes::IrregularClass;
use stokes_fission::twisted::{in_twist_coset, Automorphism};
use stokes_fission::{presets, tol};

fn load(name: &str) -> IrregularClass {
    presets::load(name).expect("preset exists")
}

fn report_line(criterion: &str, pass: bool, detail: &str) {
    println!("{}: {} - {}", if pass { "PASS" } else { "FAIL" }, criterion, detail);
    assert!(pass, "{} failed: {}", criterion, detail);
}

/// Criterion 1: the Airy class reproduces its adjoint cover of total degree
/// three, three apples, and three singular directions of dimension one, all
/// as exact integers, in under a second.
#[test]
fn criterion_1_airy() {
    let start = Instant::now();
    let airy = load("airy");
    let cover = airy.adjoint_cover();
    let cover_degree: u32 = cover.iter().map(|(c, _)| c.ram()).sum();
    let four = Exponent::monomial(rat(3, 2), Coeff::from_int(4)).unwrap();
    let has_zero = cover.iter().any(|(c, m)| c.is_zero() && *m == 2);
    let has_four = cover
        .iter()
        .any(|(c, m)| c.representative().same_circle(&four) && *m == 1);
    let apples: usize = cover
        .iter()
        .filter(|(c, _)| !c.is_zero())
        .map(|(c, m)| (c.deg() as usize) * (*m as usize))
        .sum();
    let s = airy.singular_directions();
    let dims_ok = s.directions.len() == 3 && s.directions.iter().all(|d| d.dim == 1);
    let elapsed = start.elapsed();
    let pass = cover.len() == 2
        && cover_degree == 3
        && has_zero
        && has_four
        && apples == 3
        && dims_ok
        && elapsed.as_secs_f64() < 1.0;
    report_line(
        "criterion 1 (Airy)",
        pass,
        &format!(
            "cover degree {}, apples {}, |A| = {} with unit dims, {:.3}s",
            cover_degree,
            apples,
            s.directions.len(),
            elapsed.as_secs_f64()
        ),
    );
}

/// Criterion 2: the cube-root class has an adjoint cover of degree seven
/// (the zero circle with multiplicity 3 plus two degree-3 circles), exactly
/// two apples and two singular directions of dimension one.
#[test]
fn criterion_2_cuberoot() {
    let class = load("cuberoot");
    let cover = class.adjoint_cover();
    let cover_degree: u32 = cover.iter().map(|(c, _)| c.ram()).sum();
    let zero_ok = cover.iter().any(|(c, m)| c.is_zero() && *m == 3);
    let nonzero: Vec<_> = cover.iter().filter(|(c, _)| !c.is_zero()).collect();
    let circles_ok = nonzero.len() == 2 && nonzero.iter().all(|(c, m)| c.ram() == 3 && *m == 1);
    let apples: usize = nonzero.iter().map(|(c, m)| (c.deg() as usize) * (*m as usize)).sum();
    let s = class.singular_directions();
    let dirs_ok = s.directions.len() == 2 && s.directions.iter().all(|d| d.dim == 1);
    let pass = cover_degree == 7 && zero_ok && circles_ok && apples == 2 && dirs_ok;
    report_line(
        "criterion 2 (cube root)",
        pass,
        &format!(
            "cover degree {}, apples {}, |A| = {}",
            cover_degree,
            apples,
            s.directions.len()
        ),
    );
}

/// Criterion 3: the half-integer family has exactly k singular directions
/// with alternating upper/lower n x n blocks of dimension n^2, Levi
/// GL_n x GL_n and anti-diagonal twist coset.
#[test]
fn criterion_3_half_pole_family() {
    let mut detail = String::new();
    let mut pass = true;
    for k in [1i64, 3, 5] {
        for n in [1u32, 2] {
            let class = IrregularClass::new(vec![(
                Exponent::monomial(rat(k, 2), Coeff::from_int(1)).unwrap(),
                n,
            )])
            .unwrap();
            let s = class.singular_directions();
            let count_ok = s.directions.len() == k as usize;
            let alt_ok = s.directions.iter().enumerate().all(|(i, d)| {
                let expect = if i % 2 == 0 { vec![(0usize, 1usize)] } else { vec![(1, 0)] };
                let got: Vec<(usize, usize)> = d.roots.iter().map(|p| (p.row, p.col)).collect();
                got == expect && d.dim == (n * n) as usize
            });
            let fg = class.formal_group();
            let levi_ok = fg.blocks == vec![n as usize, n as usize];
            let mut support = fg.coset_support();
            support.sort_unstable();
            let coset_ok = support == vec![(0, 1), (1, 0)];
            pass &= count_ok && alt_ok && levi_ok && coset_ok;
            detail.push_str(&format!("(n={},k={}: {} dirs) ", n, k, s.directions.len()));
        }
    }
    report_line("criterion 3 (half-integer family)", pass, &detail);
}

/// Random exact-mode class with ramifications at most 4 and rank at most 6.
fn random_class(rng: &mut StdRng) -> IrregularClass {
    loop {
        let circles = rng.gen_range(1..=2);
        let mut entries = Vec::new();
        let mut rank = 0u32;
        for _ in 0..circles {
            let denom = *[1i64, 2, 3, 4].get(rng.gen_range(0..4)).unwrap();
            let numer = rng.gen_range(1..=6);
            let terms = if rng.gen_bool(0.3) { 2 } else { 1 };
            let mut raw = Vec::new();
            for t in 0..terms {
                let e = rat(numer - t, denom);
                if e <= rat(0, 1) {
                    continue;
                }
                let m = *[1u32, 2, 3, 4, 6].get(rng.gen_range(0..5)).unwrap();
                let j = rng.gen_range(0..m as i64);
                let scale = rat(*[1i64, 2, -1, 3].get(rng.gen_range(0..4)).unwrap(), 1);
                let coeff = Coeff::Exact(
                    stokes_fission::cyclo::Cyclo::root_of_unity(m, j).scale(&scale),
                );
                raw.push((e, coeff));
            }
            let q = match Exponent::normalize(raw) {
                Ok(q) if !q.is_zero() => q,
                _ => continue,
            };
            let mult = rng.gen_range(1..=2);
            rank += mult * q.ramification();
            entries.push((q, mult));
        }
        if entries.is_empty() || rank > 6 {
            continue;
        }
        match IrregularClass::new(entries) {
            Ok(class) => return class,
            Err(_) => continue,
        }
    }
}

/// Criterion 4: untwisting oracle on 50 random exact-mode classes: the
/// lifted singular set is the full preimage, first-sheet dimensions agree
/// direction by direction, and the descent condition holds. Under a minute.
#[test]
fn criterion_4_untwisting_oracle() {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(424242);
    let mut checked = 0;
    let mut pass = true;
    for _ in 0..50 {
        let class = random_class(&mut rng);
        let rep = class.untwist();
        let count_ok =
            rep.lifted.directions.len() == (rep.r as usize) * rep.base.directions.len();
        if !(rep.ok && count_ok && class.check_descent()) {
            pass = false;
            eprintln!("untwisting failed for a class of rank {}", class.rank());
        }
        checked += 1;
    }
    let elapsed = start.elapsed();
    let pass = pass && checked == 50 && elapsed.as_secs_f64() < 60.0;
    report_line(
        "criterion 4 (untwisting oracle)",
        pass,
        &format!("{} random classes in {:.2}s", checked, elapsed.as_secs_f64()),
    );
}

fn meets_criterion_5(report: &AxiomReport) -> bool {
    report.qh1_max < tol::QH_AXIOM
        && report.qh2_max < tol::QH_AXIOM
        && report.equivariance_max < tol::EQUIVARIANCE
        && report.invariance_max < tol::EQUIVARIANCE
        && report.qh3_kernel_max == 0
}

/// Criterion 5: the twisted quasi-Hamiltonian axiom suite over at least 100
/// random points per preset, within five minutes total.
#[test]
fn criterion_5_axiom_suite() {
    let start = Instant::now();
    let names = ["airy", "cuberoot", "p1h-n1-k1", "p1h-n1-k3", "p1h-n2-k3"];
    let mut pass = true;
    let mut detail = String::new();
    for name in names {
        let model = FissionModel::from_class(name, &load(name)).unwrap();
        let report = verify_space(&model, 100, tol::QH_AXIOM);
        let ok = meets_criterion_5(&report);
        pass &= ok;
        detail.push_str(&format!(
            "{}: qh1 {:.1e} qh2 {:.1e} equi {:.1e} inv {:.1e} ker {}; ",
            name,
            report.qh1_max,
            report.qh2_max,
            report.equivariance_max,
            report.invariance_max,
            report.qh3_kernel_max
        ));
    }
    let elapsed = start.elapsed();
    pass &= elapsed.as_secs_f64() < 300.0;
    report_line(
        "criterion 5 (axiom suite)",
        pass,
        &format!("{} ({:.1}s)", detail, elapsed.as_secs_f64()),
    );
}

/// Criterion 6: fusion certification: a fused pair of fission spaces and the
/// doubles (identity and inner twists) meet the criterion-5 thresholds, and
/// the fused moment twist is the composite of the factor twists.
#[test]
fn criterion_6_fusion() {
    let mut pass = true;
    let mut detail = String::new();
    // A(Q) (*) A(Q') for two rank-2 classes.
    let a = FissionModel::from_class("p1h-n1-k1", &load("p1h-n1-k1")).unwrap();
    let b = FissionModel::from_class("airy", &load("airy")).unwrap();
    let fused = fuse(Box::new(a), 0, Box::new(b), 0).unwrap();
    let report = verify_space(&fused, 100, tol::QH_AXIOM);
    pass &= meets_criterion_5(&report);
    pass &= fused.actions()[0].twist.equivalent(&Automorphism::Identity, 2);
    detail.push_str(&format!("A(*)A qh1 {:.1e}; ", report.qh1_max));
    // Twisted doubles.
    let mut rng = StdRng::seed_from_u64(99);
    let inner = Automorphism::Inner(random_invertible(2, &mut rng));
    for (label, phi, psi) in [
        ("D(id,id)", Automorphism::Identity, Automorphism::Identity),
        ("D(inner,inner)", inner.clone(), inner.clone()),
    ] {
        let dd = internally_fused_double(2, &phi, &psi);
        let report = verify_space(&dd, 100, tol::QH_AXIOM);
        pass &= meets_criterion_5(&report);
        let expected = phi.compose(&psi).compose(&phi.inverse()).compose(&psi.inverse());
        pass &= dd.actions()[0].twist.equivalent(&expected, 2);
        detail.push_str(&format!("{} qh1 {:.1e}; ", label, report.qh1_max));
        // The unfused double's fused K-moment twist composes as well.
        let d = twisted_double(2, &phi, &psi);
        let chi_product = d.actions()[0].twist.clone();
        let a_chi = stokes_fission::fusion::ConjugacyOrbit::twist_of_group("a", 2, &phi);
        let b_chi =
            stokes_fission::fusion::ConjugacyOrbit::twist_of_group("b", 2, &psi.inverse());
        let expected = a_chi.chi().compose(b_chi.chi());
        pass &= chi_product.equivalent(&expected, 4);
    }
    report_line("criterion 6 (fusion certification)", pass, &detail);
}

/// Criterion 7: ten thousand randomized closure and two-member-quotient
/// checks on twist cosets H(del), at 1e-10.
#[test]
fn criterion_7_bitorsor() {
    let mut rng = StdRng::seed_from_u64(7777);
    let presets = ["airy", "cuberoot", "p1h-n2-k3", "p1h-n1-k5"];
    let mut checks = 0usize;
    let mut pass = true;
    let per_preset = 10_000 / presets.len() / 3;
    for name in presets {
        let model = FissionModel::from_class(name, &load(name)).unwrap();
        let blocks = model.blocks();
        let p = model.permutation_matrix();
        for _ in 0..per_preset {
            let h1 = blocks.random_block_diagonal(&mut rng) * p;
            let h2 = blocks.random_block_diagonal(&mut rng) * p;
            let d = blocks.random_block_diagonal(&mut rng);
            // Left and right multiplication by the Levi stays in the coset.
            pass &= in_twist_coset(&(&d * &h1), blocks, p);
            checks += 1;
            pass &= in_twist_coset(&(&h1 * &d), blocks, p);
            checks += 1;
            // Any two members differ by a left Levi factor.
            let quot = &h1 * inverse(&h2);
            pass &= blocks.off_diagonal_defect(&quot) < tol::COSET;
            checks += 1;
        }
    }
    // Top up to 10^4 checks with the square-root coset.
    let model = FissionModel::from_class("p1h-n1-k1", &load("p1h-n1-k1")).unwrap();
    while checks < 10_000 {
        let h1 = model.blocks().random_block_diagonal(&mut rng) * model.permutation_matrix();
        pass &= in_twist_coset(&h1, model.blocks(), model.permutation_matrix());
        checks += 1;
    }
    report_line("criterion 7 (bitorsor cosets)", pass, &format!("{} checks", checks));
}

/// Criterion 8: the one-level parabolic span property and the root-set
/// periodicity hold on every one-level preset.
#[test]
fn criterion_8_one_level_structure() {
    let mut pass = true;
    let mut detail = String::new();
    for name in [
        "airy",
        "cuberoot",
        "p1h-n1-k1",
        "p1h-n1-k3",
        "p1h-n1-k5",
        "p1h-n2-k1",
        "p1h-n2-k3",
        "p1h-n2-k5",
    ] {
        let model = FissionModel::from_class(name, &load(name)).unwrap();
        let report = model.parabolic_span_check().unwrap();
        let periodic = model.periodicity_check();
        pass &= report.ok && periodic;
        detail.push_str(&format!("{}: l = {}; ", name, report.l));
    }
    report_line("criterion 8 (one-level structure)", pass, &detail);
}

/// Sampled fission points satisfy the defining membership conditions of
/// Stokes representations (classification round trip).
#[test]
fn sampled_points_are_stokes_representations() {
    use stokes_fission::fusion::{check_representation, StokesRepresentation};
    let mut rng = StdRng::seed_from_u64(31);
    for name in ["airy", "p1h-n2-k3"] {
        let model = FissionModel::from_class(name, &load(name)).unwrap();
        for _ in 0..5 {
            let p = model.sample_point(&mut rng);
            let rep = StokesRepresentation::from_fission_point(&model, &p);
            let report = check_representation(&rep, std::slice::from_ref(&model)).unwrap();
            assert!(report.pass);
        }
    }
}

/// The omega-matrix may be degenerate on its own while the stacked kernel
/// vanishes; both ranks are reported.
#[test]
fn qh3_reports_both_ranks() {
    let mut rng = StdRng::seed_from_u64(32);
    let model = FissionModel::from_class("p1h-n1-k1", &load("p1h-n1-k1")).unwrap();
    let p = model.sample_point(&mut rng);
    let k = model.qh3_kernel(&p);
    assert_eq!(k.kernel_dim, 0);
    assert_eq!(k.dim, 7);
    // dim 7 is odd, so omega alone is always degenerate here.
    assert!(k.omega_rank < k.dim);
}

/// Unipotent closure of Stokes factors under products and Levi conjugation,
/// with exact log/exp round trips.
#[test]
fn unipotent_closure() {
    let mut rng = StdRng::seed_from_u64(33);
    let model = FissionModel::from_class("p1h-n2-k3", &load("p1h-n2-k3")).unwrap();
    let p = model.sample_point(&mut rng);
    let q = model.sample_point(&mut rng);
    for d in 0..model.directions() {
        let prod = &p.s[d] * &q.s[d];
        let log = stokes_fission::linalg::log_unipotent(&prod);
        assert!(model.stokes_defect(d, &log) < tol::EXACT_MATRIX);
        let back = stokes_fission::linalg::expm(&log);
        assert!(rel_err(&back, &prod) < tol::EXACT_MATRIX);
    }
    // The zero tangent flows nowhere.
    let n = model.rank();
    let zero = zeros(n, n);
    assert!(frob(&zero) == 0.0);
    let _ = BlockStructure::new(vec![n]);
}

/// Assembly over two boundary circles fuses the fission spaces along the
/// common G-factor, keeps the H-factors, and exposes the reduction as the
/// moment-constraint predicate; the fused space passes a residual check.
#[test]
fn two_boundary_assembly() {
    use stokes_fission::fusion::{assemble, SurfaceData};
    let surface = SurfaceData {
        genus: 0,
        boundary: vec![load("p1h-n1-k1"), load("airy")],
        twists: vec![],
    };
    let assembly = assemble(&surface).unwrap();
    // dim = (4 + 2 + 1) + (4 + 2 + 3), Hom_S subtracts 2 dim G.
    assert_eq!(assembly.space.dim(), 7 + 9);
    assert_eq!(assembly.dim_homs(), 16 - 8);
    assert_eq!(assembly.dim_h(), 4);
    // One fused G plus the two residual H-factors.
    assert_eq!(assembly.space.actions().len(), 3);
    let report = verify_space(assembly.space.as_ref(), 25, tol::QH_AXIOM);
    assert!(meets_criterion_5(&report), "{:?}", report);
    let mut rng = StdRng::seed_from_u64(77);
    let p = assembly.space.sample(&mut rng);
    assert!(assembly.moment_constraint(&p) > 0.0);
}

/// The random-class generator behind the untwisting oracle actually covers
/// the whole advertised ramification range.
#[test]
fn untwisting_oracle_generator_covers_ramifications() {
    let mut rng = StdRng::seed_from_u64(424242);
    let mut seen = std::collections::BTreeSet::new();
    let mut multi_circle = 0;
    for _ in 0..50 {
        let class = random_class(&mut rng);
        for e in class.entries() {
            seen.insert(e.circle.ram());
        }
        if class.entries().len() > 1 {
            multi_circle += 1;
        }
    }
    assert!(seen.contains(&1) && seen.contains(&2) && seen.contains(&3) && seen.contains(&4),
        "ramifications seen: {:?}", seen);
    assert!(multi_circle >= 5, "multi-circle classes: {}", multi_circle);
}
