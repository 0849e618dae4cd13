//! Acceptance suite: one PASS/FAIL line per criterion.

use std::collections::BTreeMap;
use std::process::Command;
use std::time::{Duration, Instant};

use holonomy_lab::connection::{build_omega, draw_samples, flatness_check, flatness_with_quotient, lemma_identities_check};
use holonomy_lab::lie::{GradedTensor, Word};
use holonomy_lab::moebius::{build_group, GroupKind};
use holonomy_lab::monodromy::{bch, is_lie_element, monodromy_check};
use holonomy_lab::presentation::{
    compare_presentations, full_dimensions, graded_quotient, make_presentation, symmetry_check, Variant,
};
use num_rational::BigRational;
use num_traits::{One, Zero};

const GROUP_BUDGET: Duration = Duration::from_secs(5);
const LEMMA_BUDGET: Duration = Duration::from_secs(30);
const FLATNESS_BUDGET: Duration = Duration::from_secs(300);
const DIMS_BUDGET: Duration = Duration::from_secs(120);
const EQUIV_BUDGET: Duration = Duration::from_secs(120);
const MONODROMY_BUDGET: Duration = Duration::from_secs(300);
const BCH_BUDGET: Duration = Duration::from_secs(10);

const LEMMA_POINTS: usize = 20;
const FLATNESS_SAMPLES: usize = 30;
const MONODROMY_STEPS: usize = 512;
const LEADING_TOL: f64 = 1e-4;
const DEFECT_TOL: f64 = 1e-6;
const INVERSE_TOL: f64 = 1e-8;
const COMPOSITION_TOL: f64 = 1e-6;

struct Line {
    id: u8,
    name: &'static str,
    pass: bool,
    details: String,
    elapsed: Duration,
}

fn run(id: u8, name: &'static str, budget: Duration, f: impl FnOnce() -> (bool, String)) -> Line {
    let start = Instant::now();
    let (ok, details) = f();
    let elapsed = start.elapsed();
    let details = format!("{details}; budget {}s", budget.as_secs());
    let line = Line {
        id,
        name,
        pass: ok && elapsed <= budget,
        details,
        elapsed,
    };
    println!(
        "{} [{}] {}: {} ({:.2}s)",
        if line.pass { "PASS" } else { "FAIL" },
        line.id,
        line.name,
        line.details,
        line.elapsed.as_secs_f64()
    );
    line
}

fn expected_exceptional(kind: GroupKind) -> usize {
    match kind {
        GroupKind::Cyclic(_) => 2,
        GroupKind::Dihedral(n) => 2 * n as usize + 2,
        GroupKind::Tetrahedral => 14,
        GroupKind::Octahedral => 26,
        GroupKind::Icosahedral => 62,
    }
}

fn group_combinatorics() -> (bool, String) {
    let kinds = [
        (GroupKind::Cyclic(2), 2),
        (GroupKind::Cyclic(3), 3),
        (GroupKind::Cyclic(5), 5),
        (GroupKind::Cyclic(7), 7),
        (GroupKind::Dihedral(2), 4),
        (GroupKind::Dihedral(3), 6),
        (GroupKind::Dihedral(5), 10),
        (GroupKind::Tetrahedral, 12),
        (GroupKind::Octahedral, 24),
        (GroupKind::Icosahedral, 60),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (kind, order) in kinds {
        let start = Instant::now();
        let g = build_group(kind).expect("group builds");
        let good = g.order() == order
            && g.num_exceptional() == expected_exceptional(kind)
            && g.partition_sum() + 1 == order
            && g.verify().is_empty()
            && start.elapsed() <= GROUP_BUDGET;
        ok &= good;
        parts.push(format!("{kind}:{}/{}", g.order(), g.num_exceptional()));
    }
    (ok, format!("order/exceptional {}", parts.join(" ")))
}

fn lemma_identities() -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for kind in [GroupKind::Cyclic(2), GroupKind::Cyclic(4), GroupKind::Dihedral(3), GroupKind::Tetrahedral] {
        let g = build_group(kind).unwrap();
        let r = lemma_identities_check(&g, LEMMA_POINTS, 0);
        let good = r
            .first
            .iter()
            .chain(&r.second)
            .all(|e| e.trials >= LEMMA_POINTS && e.passed == e.trials);
        ok &= good;
        parts.push(format!("{kind}:{}+{}", r.first.len(), r.second.len()));
    }
    (ok, format!("{LEMMA_POINTS} exact points per element, identities {}", parts.join(" ")))
}

fn flatness() -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for (n, kind) in [
        (2, GroupKind::Cyclic(2)),
        (2, GroupKind::Cyclic(3)),
        (2, GroupKind::Dihedral(3)),
        (3, GroupKind::Cyclic(2)),
    ] {
        let g = build_group(kind).unwrap();
        let r = flatness_check(n, &g, FLATNESS_SAMPLES, 0, 1000).expect("flatness runs");
        let grid = r.grid.as_ref().map(|c| c.all_zero).unwrap_or(true);
        let flat = r.samples.len() == FLATNESS_SAMPLES && r.all_zero() && grid;

        let p = make_presentation(n, &g, Variant::P).without_family(6);
        let q = graded_quotient(&p, 2).unwrap();
        let omega = build_omega(n, &g);
        let samples = draw_samples(n, &g, FLATNESS_SAMPLES, 0).unwrap();
        let control = flatness_with_quotient(&omega, &g, &q, p.generators(), &samples).unwrap();
        let nonzero = control.iter().filter(|v| !v.all_zero()).count();

        ok &= flat && nonzero > 0;
        parts.push(format!("({n},{kind}) zero={flat} control_nonzero={nonzero}"));
    }
    (ok, parts.join(" "))
}

fn presentation_dims() -> (bool, String) {
    let c2 = build_group(GroupKind::Cyclic(2)).unwrap();
    let p = make_presentation(2, &c2, Variant::P);
    let q = graded_quotient(&p, 1).unwrap();
    let mut ok = q.dims()[0] == 4;
    let mut parts = vec![format!("dim1(2,C2)={}", q.dims()[0])];
    for (n, kind) in [(2, GroupKind::Cyclic(2)), (2, GroupKind::Cyclic(3)), (3, GroupKind::Cyclic(2))] {
        let g = build_group(kind).unwrap();
        let p = make_presentation(n, &g, Variant::P);
        let dims = graded_quotient(&p, 3).unwrap().dims();
        let full = full_dimensions(&p, 3).unwrap();
        let shuffled: Vec<Vec<usize>> =
            (1..=3).map(|seed| graded_quotient(&p.shuffled(seed), 3).unwrap().dims()).collect();
        let sym = symmetry_check(&p, &g).iter().all(|v| v.degree1 && v.degree2);
        let good = dims == full && shuffled.iter().all(|s| *s == dims) && sym;
        ok &= good;
        parts.push(format!("({n},{kind}) dims={dims:?} full_agrees={} symmetry={sym}", dims == full));
    }
    (ok, parts.join(" "))
}

fn t_vs_p() -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for (n, kind) in [(2, GroupKind::Cyclic(2)), (2, GroupKind::Cyclic(3)), (3, GroupKind::Cyclic(2))] {
        let g = build_group(kind).unwrap();
        let t = make_presentation(n, &g, Variant::T);
        let p = make_presentation(n, &g, Variant::P);
        let r = compare_presentations(&t, &p, 3).unwrap();
        ok &= r.equivalent();
        parts.push(format!("({n},{kind}) {:?}={:?}", r.dims_left, r.dims_right));
    }
    (ok, parts.join(" "))
}

fn monodromy() -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for kind in [GroupKind::Cyclic(2), GroupKind::Cyclic(3)] {
        let g = build_group(kind).unwrap();
        let r = monodromy_check(2, &g, 3, MONODROMY_STEPS, 0).expect("transport succeeds");
        let leading = r.loops.iter().all(|l| {
            l.leading.magnitude_error <= LEADING_TOL
                && l.leading.phase_error <= LEADING_TOL
                && l.leading.off_label < LEADING_TOL
        });
        let good = leading
            && r.max_defect() < DEFECT_TOL
            && r.defects_converge()
            && r.max_inverse_error() < INVERSE_TOL
            && r.max_composition_error() < COMPOSITION_TOL;
        ok &= good;
        parts.push(format!(
            "(2,{kind}) loops={} defect={:.1e} strict_decreases={}/{} inverse={:.1e} composition={:.1e}",
            r.loops.len(),
            r.max_defect(),
            r.strict_decreases(),
            r.loops.len(),
            r.max_inverse_error(),
            r.max_composition_error()
        ));
    }
    (ok, parts.join(" "))
}

// Word polynomials over Q, kept independent of the library's tensor type.
type Poly = BTreeMap<Word, BigRational>;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn poly_add(a: &Poly, b: &Poly, scale: &BigRational) -> Poly {
    let mut out = a.clone();
    for (w, c) in b {
        let e = out.entry(w.clone()).or_insert_with(BigRational::zero);
        *e += c * scale;
    }
    out.retain(|_, c| !c.is_zero());
    out
}

fn poly_mul(a: &Poly, b: &Poly, max_degree: usize) -> Poly {
    let mut out = Poly::new();
    for (u, x) in a {
        for (v, y) in b {
            if u.len() + v.len() > max_degree {
                continue;
            }
            let w: Word = u.iter().chain(v).copied().collect();
            *out.entry(w).or_insert_with(BigRational::zero) += x * y;
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

fn poly_pow(a: &Poly, k: usize, max_degree: usize) -> Poly {
    let mut out = Poly::from([(Vec::new(), BigRational::one())]);
    for _ in 0..k {
        out = poly_mul(&out, a, max_degree);
    }
    out
}

fn factorial(k: usize) -> i64 {
    (1..=k as i64).product()
}

/// `log(Σ x^p y^q / (p! q!))` through degree `max_degree`.
fn series_oracle(x: &Poly, y: &Poly, max_degree: usize) -> Poly {
    let mut product = Poly::new();
    for a in 0..=max_degree {
        for b in 0..=max_degree - a {
            let term = poly_mul(&poly_pow(x, a, max_degree), &poly_pow(y, b, max_degree), max_degree);
            product = poly_add(&product, &term, &q(1, factorial(a) * factorial(b)));
        }
    }
    let mut u = product;
    u.remove(&Vec::new());
    let mut log = Poly::new();
    for m in 1..=max_degree {
        let sign = if m % 2 == 1 { 1 } else { -1 };
        log = poly_add(&log, &poly_pow(&u, m, max_degree), &q(sign, m as i64));
    }
    log
}

fn commutator(a: &Poly, b: &Poly, max_degree: usize) -> Poly {
    poly_add(&poly_mul(a, b, max_degree), &poly_mul(b, a, max_degree), &q(-1, 1))
}

fn to_tensor(p: &Poly, letters: usize, max_degree: usize) -> GradedTensor<BigRational> {
    GradedTensor::from_terms(letters, max_degree, p.iter().map(|(w, c)| (w.clone(), c.clone())))
}

fn to_poly(t: &GradedTensor<BigRational>) -> Poly {
    let mut out = Poly::new();
    for part in t.parts() {
        for (w, c) in part {
            if !c.is_zero() {
                out.insert(w.clone(), c.clone());
            }
        }
    }
    out
}

fn degree_part(p: &Poly, k: usize) -> Poly {
    p.iter().filter(|(w, _)| w.len() == k).map(|(w, c)| (w.clone(), c.clone())).collect()
}

fn bch_checks() -> (bool, String) {
    const D: usize = 3;
    let a = Poly::from([(vec![0], q(1, 1))]);
    let b = Poly::from([(vec![1], q(1, 1))]);
    let x = to_tensor(&a, 2, D);
    let y = to_tensor(&b, 2, D);
    let z = to_poly(&bch(&x, &y));

    let half_bracket = poly_add(&Poly::new(), &commutator(&a, &b, D), &q(1, 2));
    let degree2 = degree_part(&z, 2) == half_bracket;

    let identity = bch(&x, &GradedTensor::zero(2, D)) == x;
    let cancel = bch(&x, &x.neg()).is_zero();

    let oracle = series_oracle(&a, &b, D);
    let closed = poly_add(
        &poly_add(&Poly::new(), &commutator(&a, &commutator(&a, &b, D), D), &q(1, 12)),
        &commutator(&b, &commutator(&b, &a, D), D),
        &q(1, 12),
    );
    let degree3 = degree_part(&z, 3) == degree_part(&oracle, 3) && degree_part(&oracle, 3) == closed;

    // Mixed inputs on three letters, compared through the whole truncation.
    let v = Poly::from([(vec![1], q(2, 1)), (vec![2], q(1, 1))]);
    let bc = commutator(&Poly::from([(vec![1], q(1, 1))]), &Poly::from([(vec![2], q(1, 1))]), D);
    let u_lie = poly_add(&Poly::from([(vec![0], q(1, 1)), (vec![2], q(-3, 1))]), &bc, &q(1, 2));
    let mixed_bch = to_poly(&bch(&to_tensor(&u_lie, 3, D), &to_tensor(&v, 3, D)));
    let mixed = mixed_bch == series_oracle(&u_lie, &v, D) && is_lie_element(&to_tensor(&mixed_bch, 3, D));

    let ok = degree2 && identity && cancel && degree3 && mixed;
    (
        ok,
        format!("degree2_half_bracket={degree2} bch(x,0)=x:{identity} bch(x,-x)=0:{cancel} degree3_oracle={degree3} mixed_oracle={mixed}"),
    )
}

fn strip_timing(mut v: serde_json::Value) -> serde_json::Value {
    if let Some(obj) = v.as_object_mut() {
        obj.remove("timing");
    }
    v
}

fn determinism() -> (bool, String) {
    let bin = env!("CARGO_BIN_EXE_holonomy-lab");
    let runs: Vec<(bool, serde_json::Value)> = (0..2)
        .map(|_| {
            let out = Command::new(bin).args(["all", "--seed", "0"]).output().expect("binary runs");
            let value = serde_json::from_slice(&out.stdout).expect("json report");
            (out.status.success(), strip_timing(value))
        })
        .collect();
    let same = runs[0].1 == runs[1].1;
    let exited = runs.iter().all(|(s, _)| *s);
    let checks = runs[0].1["checks"].as_array().map(|c| c.len()).unwrap_or(0);
    (same && exited && checks > 0, format!("two `all` runs, {checks} checks, identical without timing: {same}"))
}

#[test]
fn acceptance() {
    let lines = [run(1, "group combinatorics", GROUP_BUDGET * 10, group_combinatorics),
        run(2, "lemma identities", LEMMA_BUDGET, lemma_identities),
        run(3, "flatness", FLATNESS_BUDGET, flatness),
        run(4, "presentation dimensions", DIMS_BUDGET, presentation_dims),
        run(5, "t_n vs p_n", EQUIV_BUDGET, t_vs_p),
        run(6, "monodromy", MONODROMY_BUDGET, monodromy),
        run(7, "bch", BCH_BUDGET, bch_checks),
        run(8, "determinism", Duration::from_secs(600), determinism)];
    let failed: Vec<u8> = lines.iter().filter(|l| !l.pass).map(|l| l.id).collect();
    println!("acceptance: {}/{} criteria pass", lines.len() - failed.len(), lines.len());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
