//! Per-command sweeps. Points are evaluated in parallel and collected in
//! grid order, so the table does not depend on the worker count.

use rayon::prelude::*;

use micromaser::correlation::{exact_correlation, xi_ansatz_e, xi_master_m, xi_mean_field, xi_sumrule, Method};
use micromaser::phase::{branch_minimum_x, classify, phase_diagram, BoundaryKind, Competitor, Phase};
use micromaser::potential::{enumerate_saddles, SaddleKind};
use micromaser::trapping::{dip_scan, x_of_trapping};
use micromaser::{stationary_distribution, theta_eff_sq, MaserParams, DEFAULT_TAIL_TOL};

use crate::config::{Command, SweepConfig, Value};
use crate::output::{Cell, Table};

type Field = Result<Cell, String>;

/// Mean-field branches and trapping levels listed by `trapping-scan`.
const TRAPPING_BRANCHES: usize = 3;

fn num(r: micromaser::Result<f64>) -> Field {
    r.map(Cell::Num).map_err(|e| e.to_string())
}

fn text(s: &str) -> Field {
    Ok(Cell::Text(s.to_string()))
}

fn assemble(columns: &[&'static str], rows: Vec<Vec<Field>>) -> Table {
    let mut table = Table::new(columns);
    for row in rows {
        let cells = row.into_iter().map(|f| f.unwrap_or_else(|e| table.fail(e))).collect();
        table.rows.push(cells);
    }
    table
}

/// Parameter points in grid order: flux outermost, then `θ`, then `a`.
fn points(config: &SweepConfig) -> Vec<MaserParams> {
    let base = config.base_params();
    let fixed = |v: Option<Value>| v.map_or(vec![0.0], |v| v.points());
    let mut out = Vec::new();
    for flux in config.flux.points() {
        for theta in fixed(config.theta) {
            for a in config.a.points() {
                out.push(MaserParams { a, theta, flux, ..base });
            }
        }
    }
    out
}

fn per_point<F>(config: &SweepConfig, f: F) -> Vec<Vec<Field>>
where
    F: Fn(&MaserParams) -> Vec<Vec<Field>> + Sync,
{
    points(config).par_iter().map(&f).collect::<Vec<_>>().into_iter().flatten().collect()
}

fn phase_cells(p: &MaserParams) -> [Field; 3] {
    let point = classify(p);
    let (name, branch) = match point.phase {
        Phase::Thermal => ("thermal", None),
        Phase::Maser(k) => ("maser", Some(k)),
        Phase::Coexistence(first, _) => (
            "coexistence",
            match first {
                Competitor::Thermal => None,
                Competitor::Maser(k) => Some(k),
            },
        ),
    };
    [text(name), Ok(branch.map_or(Cell::Empty, |k| Cell::Int(k as i64))), Ok(Cell::Num(point.order_parameter))]
}

fn moments(p: &MaserParams) -> [Field; 2] {
    match stationary_distribution(p, DEFAULT_TAIL_TOL) {
        Ok(d) => [Ok(Cell::Num(d.mean_x())), Ok(Cell::Num(d.std_x()))],
        Err(e) => [Err(e.to_string()), Err(e.to_string())],
    }
}

fn order_scan(config: &SweepConfig) -> Table {
    let columns = ["theta", "N", "x_mean", "x_std", "phase", "branch", "x_mean_field", "slope", "v0"];
    let rows = per_point(config, |p| {
        let point = classify(p);
        let [x_mean, x_std] = moments(p);
        let [phase, branch, x_mf] = phase_cells(p);
        let v0 = match point.phase {
            Phase::Maser(k) | Phase::Coexistence(Competitor::Maser(k), _) => {
                Cell::opt(point.minima.iter().find(|s| s.branch == k).and_then(|s| s.v0))
            }
            _ => Cell::Num(0.0),
        };
        vec![vec![
            Ok(Cell::Num(p.theta)),
            Ok(Cell::Num(p.flux)),
            x_mean,
            x_std,
            phase,
            branch,
            x_mf,
            Ok(Cell::opt(point.slope)),
            Ok(v0),
        ]]
    });
    assemble(&columns, rows)
}

fn potential_branches(config: &SweepConfig) -> Table {
    let columns = ["theta", "branch", "kind", "phi", "x", "v0", "curvature"];
    let rows = per_point(config, |p| {
        enumerate_saddles(p)
            .into_iter()
            .map(|s| {
                let kind = match s.kind {
                    SaddleKind::Minimum => "minimum",
                    SaddleKind::Maximum => "maximum",
                };
                vec![
                    Ok(Cell::Num(p.theta)),
                    Ok(Cell::Int(s.branch as i64)),
                    text(kind),
                    Ok(Cell::Num(s.phi)),
                    Ok(Cell::Num(s.x)),
                    Ok(Cell::opt(s.v0)),
                    Ok(Cell::Num(s.curvature)),
                ]
            })
            .collect()
    });
    assemble(&columns, rows)
}

fn boundary_name(kind: BoundaryKind) -> (&'static str, Option<usize>) {
    match kind {
        BoundaryKind::SecondOrderThermalMaser => ("second_order_thermal_maser", None),
        BoundaryKind::FirstOrderMaserMaser(k) => ("first_order_maser_maser", Some(k)),
        BoundaryKind::FirstOrderThermalMaser(k) => ("first_order_thermal_maser", Some(k)),
        BoundaryKind::SecondOrderMaserThermal(k) => ("second_order_maser_thermal", Some(k)),
        BoundaryKind::ThermalValidity(k) => ("thermal_validity", Some(k)),
    }
}

fn phase_diagram_table(config: &SweepConfig) -> Table {
    let columns = ["kind", "k", "a", "theta", "residual"];
    let params = config.base_params();
    let diagram = phase_diagram(params.nb, params.delta, &config.a.points());
    let mut rows = Vec::new();
    for boundary in &diagram.boundaries {
        let (name, k) = boundary_name(boundary.kind);
        for v in &boundary.points {
            rows.push(vec![
                text(name),
                Ok(k.map_or(Cell::Empty, |k| Cell::Int(k as i64))),
                Ok(Cell::Num(v.a)),
                Ok(Cell::Num(v.theta)),
                Ok(Cell::Num(v.residual)),
            ]);
        }
    }
    for t in &diagram.triple_points {
        rows.push(vec![
            text("triple_point"),
            Ok(Cell::Int(t.k as i64)),
            Ok(Cell::Num(t.a)),
            Ok(Cell::Num(t.theta)),
            Ok(Cell::Empty),
        ]);
    }
    assemble(&columns, rows)
}

fn thermal_profile(config: &SweepConfig) -> Table {
    let columns = ["theta", "theta_eff_sq", "n_mean_thermal", "x_mean_thermal", "x_mean"];
    let rows = per_point(config, |p| {
        let te2 = theta_eff_sq(p.theta, p.delta);
        let denom = 1.0 + (1.0 - 2.0 * p.a) * te2;
        let n = (denom > 0.0).then(|| (p.nb + p.a * te2) / denom);
        let [x_mean, _] = moments(p);
        vec![vec![
            Ok(Cell::Num(p.theta)),
            Ok(Cell::Num(te2)),
            Ok(Cell::opt(n)),
            Ok(Cell::opt(n.map(|n| n / p.flux))),
            x_mean,
        ]]
    });
    assemble(&columns, rows)
}

fn order_vs_a(config: &SweepConfig) -> Table {
    let columns = ["a", "x_mean", "x_std", "phase", "branch", "x_mean_field"];
    let rows = per_point(config, |p| {
        let [x_mean, x_std] = moments(p);
        let [phase, branch, x_mf] = phase_cells(p);
        vec![vec![Ok(Cell::Num(p.a)), x_mean, x_std, phase, branch, x_mf]]
    });
    assemble(&columns, rows)
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Exact => "exact",
        Method::AnsatzE => "ansatz",
        Method::MasterM => "master",
        Method::MeanField => "mean_field",
        Method::Barrier => "barrier",
        Method::SumRule => "sum_rule",
    }
}

fn correlation_scan(config: &SweepConfig) -> Table {
    let columns = ["theta", "N", "lambda_nz", "gamma_xi_exact", "ln_gamma_xi_exact", "method"];
    let rows = per_point(config, |p| {
        let head = [Ok(Cell::Num(p.theta)), Ok(Cell::Num(p.flux))];
        let tail = match exact_correlation(p) {
            Ok(c) => [
                Ok(Cell::Num(c.lambda_nz)),
                Ok(Cell::Num(c.gamma_xi)),
                Ok(Cell::Num(c.ln_gamma_xi)),
                text(method_name(c.method)),
            ],
            Err(e) => {
                let e = e.to_string();
                [Err(e.clone()), Err(e.clone()), Err(e), Ok(Cell::Empty)]
            }
        };
        vec![head.into_iter().chain(tail).collect()]
    });
    assemble(&columns, rows)
}

fn correlation_compare(config: &SweepConfig) -> Table {
    let columns = ["theta", "gamma_xi_exact", "gamma_xi_E", "gamma_xi_M", "gamma_xi_MF"];
    let rows = per_point(config, |p| {
        let g = |r: micromaser::Result<micromaser::correlation::CorrelationResult>| num(r.map(|c| c.gamma_xi));
        vec![vec![
            Ok(Cell::Num(p.theta)),
            g(exact_correlation(p)),
            g(xi_ansatz_e(p)),
            g(xi_master_m(p)),
            g(xi_mean_field(p)),
        ]]
    });
    assemble(&columns, rows)
}

fn trapping_scan(config: &SweepConfig) -> Table {
    let columns = [
        "theta",
        "N",
        "x_mean",
        "x_std",
        "x_mf_0",
        "x_mf_1",
        "x_mf_2",
        "x_trap_1",
        "x_trap_2",
        "x_trap_3",
        "dip",
        "theta_tr_nearest",
        "ln_gamma_xi_exact",
    ];
    let base = config.base_params();
    let thetas = config.theta.map_or(vec![], |t| t.points());
    let mut rows = Vec::new();
    for flux in config.flux.points() {
        let at = MaserParams { flux, ..base };
        let dips = dip_scan(&at, &thetas);
        let per_theta: Vec<Vec<Field>> = thetas
            .par_iter()
            .enumerate()
            .map(|(i, &theta)| {
                let p = at.with_theta(theta);
                let [x_mean, x_std] = moments(&p);
                let mut row = vec![Ok(Cell::Num(theta)), Ok(Cell::Num(flux)), x_mean, x_std];
                for k in 0..TRAPPING_BRANCHES {
                    row.push(Ok(Cell::opt(branch_minimum_x(p.a, p.delta, k, theta))));
                }
                for k in 1..=TRAPPING_BRANCHES {
                    let level = x_of_trapping(theta, p.delta, k).ok().filter(|l| l.physical).map(|l| l.x);
                    row.push(Ok(Cell::opt(level)));
                }
                match &dips {
                    Ok(report) => {
                        let dip = report.dips.iter().find(|d| d.theta == thetas[i]);
                        row.push(Ok(Cell::Int(dip.is_some() as i64)));
                        row.push(Ok(Cell::opt(dip.and_then(|d| d.nearest).map(|s| s.theta_tr))));
                    }
                    Err(e) => {
                        row.push(Err(e.to_string()));
                        row.push(Ok(Cell::Empty));
                    }
                }
                row.push(num(exact_correlation(&p).map(|c| c.ln_gamma_xi)));
                row
            })
            .collect();
        rows.extend(per_theta);
    }
    assemble(&columns, rows)
}

fn sumrule_check(config: &SweepConfig) -> Table {
    let columns = ["theta", "gamma_xi_exact", "gamma_xi_sumrule", "relative_difference"];
    let rows = per_point(config, |p| {
        let exact = exact_correlation(p).map(|c| c.gamma_xi);
        let sum = xi_sumrule(p).map(|c| c.gamma_xi);
        let rel = match (&exact, &sum) {
            (Ok(e), Ok(s)) => Ok(Cell::Num(s / e - 1.0)),
            _ => Ok(Cell::Empty),
        };
        vec![vec![Ok(Cell::Num(p.theta)), num(exact), num(sum), rel]]
    });
    assemble(&columns, rows)
}

/// Evaluates the configured sweep.
pub fn run(config: &SweepConfig) -> Table {
    match config.command {
        Command::OrderScan => order_scan(config),
        Command::PotentialBranches => potential_branches(config),
        Command::PhaseDiagram => phase_diagram_table(config),
        Command::ThermalProfile => thermal_profile(config),
        Command::OrderVsA => order_vs_a(config),
        Command::CorrelationScan => correlation_scan(config),
        Command::CorrelationCompare => correlation_compare(config),
        Command::TrappingScan => trapping_scan(config),
        Command::SumruleCheck => sumrule_check(config),
    }
}
