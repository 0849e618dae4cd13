//! One function per subcommand; each returns its checks in a fixed order.

use std::time::Instant;

use holonomy_lab::connection::{flatness_check, flatness_with_quotient, build_omega, draw_samples, lemma_identities_check, FlatnessReport};
use holonomy_lab::moebius::{build_group, FiniteGroupData, GroupKind};
use holonomy_lab::monodromy::monodromy_check;
use holonomy_lab::presentation::{
    compare_presentations, full_dimensions, graded_quotient, make_presentation, symmetry_check, Variant,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;

pub const GRID_CAP: usize = 1000;
pub const NEGATIVE_CONTROL_FAMILY: u8 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub details: Value,
}

impl Check {
    pub fn new(name: &str, pass: bool, details: Value) -> Self {
        Check {
            name: name.to_string(),
            status: if pass { Status::Pass } else { Status::Fail },
            details,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// Errors that make the configuration unusable (exit code 2).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct Unsupported(pub String);

/// A run of one subcommand: checks, CSV rows, elapsed milliseconds.
pub struct Outcome {
    pub checks: Vec<Check>,
    pub csv: Vec<Vec<String>>,
    pub csv_header: Vec<String>,
    pub elapsed_ms: u128,
}

fn group_of(cfg: &RunConfig) -> Result<FiniteGroupData, Unsupported> {
    build_group(cfg.group).map_err(|e| Unsupported(e.to_string()))
}

pub fn expected_exceptional(kind: GroupKind) -> usize {
    match kind {
        GroupKind::Cyclic(_) => 2,
        GroupKind::Dihedral(n) => 2 * n as usize + 2,
        GroupKind::Tetrahedral => 14,
        GroupKind::Octahedral => 26,
        GroupKind::Icosahedral => 62,
    }
}

fn timed(f: impl FnOnce() -> Result<(Vec<Check>, Vec<String>, Vec<Vec<String>>), Unsupported>) -> Result<Outcome, Unsupported> {
    let start = Instant::now();
    let (checks, csv_header, csv) = f()?;
    Ok(Outcome {
        checks,
        csv,
        csv_header,
        elapsed_ms: start.elapsed().as_millis(),
    })
}

pub fn run_group(cfg: &RunConfig) -> Result<Outcome, Unsupported> {
    timed(|| {
        let g = group_of(cfg)?;
        let kind = cfg.group;
        let failures = g.verify();
        let checks = vec![
            Check::new(
                "group.order",
                g.order() == kind.classical_order(),
                json!({"group": kind.to_string(), "order": g.order(), "expected": kind.classical_order()}),
            ),
            Check::new(
                "group.exceptional_count",
                g.num_exceptional() == expected_exceptional(kind),
                json!({"count": g.num_exceptional(), "expected": expected_exceptional(kind), "points": g.exceptional_table()}),
            ),
            Check::new(
                "group.partition_sum",
                g.partition_sum() + 1 == g.order(),
                json!({"sum": g.partition_sum(), "expected": g.order() - 1}),
            ),
            Check::new("group.invariants", failures.is_empty(), json!({"failures": failures})),
        ];
        Ok((checks, Vec::new(), Vec::new()))
    })
}

pub fn run_dims(cfg: &RunConfig) -> Result<Outcome, Unsupported> {
    timed(|| {
        let g = group_of(cfg)?;
        let p = make_presentation(cfg.n, &g, Variant::P);
        let q = graded_quotient(&p, cfg.degree).map_err(|e| Unsupported(e.to_string()))?;
        let dims = q.dims();
        let full = full_dimensions(&p, cfg.degree).map_err(|e| Unsupported(e.to_string()))?;
        let shuffled = graded_quotient(&p.shuffled(cfg.seed), cfg.degree)
            .map_err(|e| Unsupported(e.to_string()))?
            .dims();
        let expected_degree1 = p.num_generators() - q.linear_rank();
        let mut checks = vec![
            Check::new(
                "dims.degree1",
                dims[0] == expected_degree1 && q.linear_rank() == cfg.n,
                json!({"dim": dims[0], "generators": p.num_generators(), "linear_rank": q.linear_rank()}),
            ),
            Check::new(
                "dims.elimination_agrees",
                dims == full,
                json!({"group": cfg.group.to_string(), "n": cfg.n, "D": cfg.degree, "eliminated": dims, "full": full}),
            ),
            Check::new("dims.shuffle_stable", dims == shuffled, json!({"dims": dims, "shuffled": shuffled, "seed": cfg.seed})),
        ];
        if cfg.degree >= 2 {
            let verdicts = symmetry_check(&p, &g);
            let ok = verdicts.iter().all(|v| v.degree1 && v.degree2);
            checks.push(Check::new("dims.symmetry", ok, json!({"verdicts": verdicts})));
        }
        let header = ["degree", "free_dim", "ideal_rank", "dim"].map(String::from).to_vec();
        let rows = (1..=cfg.degree)
            .map(|k| {
                let d = q.degree(k);
                vec![k.to_string(), d.free_dim.to_string(), d.ideal_rank.to_string(), d.dim.to_string()]
            })
            .collect();
        Ok((checks, header, rows))
    })
}

fn flatness_rows(report: &FlatnessReport) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (s, verdict) in report.samples.iter().enumerate() {
        for pair in &verdict.pairs {
            rows.push(vec![
                s.to_string(),
                verdict.sample.join(" ; "),
                format!("{}{}", pair.i, pair.k),
                pair.nonzero.to_string(),
                if pair.nonzero == 0 { "zero" } else { "nonzero" }.to_string(),
            ]);
        }
    }
    rows
}

pub fn run_flatness(cfg: &RunConfig) -> Result<Outcome, Unsupported> {
    timed(|| {
        let g = group_of(cfg)?;
        let report = flatness_check(cfg.n, &g, cfg.samples, cfg.seed, GRID_CAP).map_err(|e| Unsupported(e.to_string()))?;
        let sample_pass = report.samples.iter().all(|s| s.all_zero());
        let mut checks = vec![Check::new(
            "flatness.samples",
            sample_pass,
            json!({
                "samples": report.samples.len(),
                "nonzero_samples": report.nonzero_samples(),
                "degree_bound": report.degree_bound,
                "total_degree_bound": report.total_degree_bound,
                "grid_points_needed": report.grid_points_needed,
                "samples_exceed_grid": report.samples_exceed_grid,
            }),
        )];
        if let Some(grid) = &report.grid {
            checks.push(Check::new("flatness.grid_certificate", grid.all_zero, serde_json::to_value(grid).unwrap()));
        }
        if cfg.n >= 2 {
            let p = make_presentation(cfg.n, &g, Variant::P).without_family(NEGATIVE_CONTROL_FAMILY);
            let q = graded_quotient(&p, 2).map_err(|e| Unsupported(e.to_string()))?;
            let omega = build_omega(cfg.n, &g);
            let samples = draw_samples(cfg.n, &g, cfg.samples, cfg.seed).map_err(|e| Unsupported(e.to_string()))?;
            let verdicts = flatness_with_quotient(&omega, &g, &q, p.generators(), &samples).map_err(|e| Unsupported(e.to_string()))?;
            let nonzero = verdicts.iter().filter(|v| !v.all_zero()).count();
            checks.push(Check::new(
                "flatness.negative_control",
                nonzero >= 1,
                json!({"removed_family": NEGATIVE_CONTROL_FAMILY, "nonzero_samples": nonzero, "samples": verdicts.len()}),
            ));
        }
        let header = ["sample", "point", "pair", "nonzero_coordinates", "verdict"].map(String::from).to_vec();
        Ok((checks, header, flatness_rows(&report)))
    })
}

pub fn run_lemma(cfg: &RunConfig) -> Result<Outcome, Unsupported> {
    timed(|| {
        let g = group_of(cfg)?;
        let r = lemma_identities_check(&g, cfg.samples, cfg.seed);
        let first = r.first.iter().all(|e| e.passed == e.trials && e.trials == cfg.samples);
        let second = r.second.iter().all(|e| e.passed == e.trials && e.trials == cfg.samples);
        let checks = vec![
            Check::new("lemma.first_identity", first, json!({"elements": r.first})),
            Check::new("lemma.second_identity", second, json!({"pairs": r.second})),
        ];
        Ok((checks, Vec::new(), Vec::new()))
    })
}

pub fn run_monodromy(cfg: &RunConfig) -> Result<Outcome, Unsupported> {
    timed(|| {
        let g = group_of(cfg)?;
        let r = match monodromy_check(cfg.n, &g, cfg.degree, cfg.steps, cfg.seed) {
            Ok(r) => r,
            Err(holonomy_lab::monodromy::MonodromyError::Presentation(e)) => return Err(Unsupported(e.to_string())),
            Err(e) => {
                return Ok((vec![Check::new("monodromy.transport", false, json!({"error": e.to_string()}))], Vec::new(), Vec::new()))
            }
        };
        let checks = vec![
            Check::new("monodromy.leading_terms", r.leading_pass(), json!({"loops": r.loops})),
            Check::new(
                "monodromy.group_like",
                r.max_defect() < 1e-6,
                json!({"max_defect": r.max_defect(), "tolerance": 1e-6}),
            ),
            Check::new(
                "monodromy.defect_doubling",
                r.defects_converge(),
                json!({
                    "strict_decreases": r.strict_decreases(),
                    "loops": r.loops.len(),
                    "defects": r.loops.iter().map(|l| json!({"label": l.label, "steps": l.series.group_like_defect, "doubled": l.defect_doubled, "floor": l.defect_floor})).collect::<Vec<_>>(),
                }),
            ),
            Check::new(
                "monodromy.inverse_and_constant",
                r.max_inverse_error() < 1e-8,
                json!({"constant_error": r.constant_error, "max_inverse_error": r.max_inverse_error(), "tolerance": 1e-8}),
            ),
            Check::new(
                "monodromy.antihomomorphism",
                r.max_composition_error() < 1e-6,
                json!({"compositions": r.compositions, "tolerance": 1e-6}),
            ),
        ];
        Ok((checks, Vec::new(), Vec::new()))
    })
}

pub fn run_equiv(cfg: &RunConfig) -> Result<Outcome, Unsupported> {
    timed(|| {
        let g = group_of(cfg)?;
        let t = make_presentation(cfg.n, &g, Variant::T);
        let p = make_presentation(cfg.n, &g, Variant::P);
        let r = compare_presentations(&t, &p, cfg.degree).map_err(|e| Unsupported(e.to_string()))?;
        let checks = vec![Check::new("equiv.t_vs_p", r.equivalent(), serde_json::to_value(&r).unwrap())];
        Ok((checks, Vec::new(), Vec::new()))
    })
}
