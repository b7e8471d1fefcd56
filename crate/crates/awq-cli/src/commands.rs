use crate::config::Validated;
use crate::error::{CliError, CliResult};
use crate::table::{Format, Row, Table};
use awq::multivariate::{gr_aw, mv_pbeta_closed, mv_pbeta_sum, mv_w, mv_wtilde, MultiIndex};
use awq::qseries::C64;
use awq::univariate::{asc, aw, pbeta_closed, pbeta_recurrence, pbeta_sum, v_eig, v_eig_series, vtilde_eig, vtilde_grid};
use awq::verify::{reports_to_csv, run_suite, Report, Suite, SuiteConfig};
use clap::ValueEnum;

pub const DEFAULT_SEED: u64 = 20240611;
const DEFAULT_ROUTE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalTarget {
    /// Al-Salam-Chihara Q_n(x; q^k s, q^k/s | q^2)
    Asc,
    /// Askey-Wilson p_n(x; a, b, c, d | q^2) at the parameters of β
    Aw,
    /// v_{x,s}(n): recurrence and series routes
    V,
    /// ṽ_{y,t}(n) on the grid: terminating and base-inverted routes
    Vtilde,
    /// P_β(x, t q^{-k-2m}): sum, closed form and y-recurrence
    Pbeta,
    /// Multivariate Askey-Wilson polynomial P_N(m; x; α | q^2)
    Gr,
    /// Multivariate P_β: product of sums and closed form
    #[value(name = "mv_pbeta")]
    MvPbeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableKind {
    /// Weights w̃ on the grid and w at the evaluation points
    Weights,
    /// Grid points y_j = t q^{-K_j - 2M_j}
    Grid,
    /// The vector α_0..α_{N+2}
    Alpha,
}

fn label(m: &[usize]) -> String {
    m.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn wrap<T>(check: String, r: awq::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::from_awq(check, e))
}

/// Largest pairwise distance between routes, relative to the largest magnitude.
fn spread(values: &[C64]) -> f64 {
    let scale = values.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut out: f64 = 0.0;
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            out = out.max((a - b).norm() / scale);
        }
    }
    out
}

pub fn eval(target: EvalTarget, cfg: &Validated, tol: Option<f64>) -> CliResult<Table> {
    let p = &cfg.params;
    let (q, k) = (p.q, p.k);
    let beta = cfg.beta.beta();
    let mut table = Table::default();
    let tol = tol.unwrap_or(DEFAULT_ROUTE_TOL);
    match target {
        EvalTarget::Asc | EvalTarget::Aw | EvalTarget::V => {
            for (i, pt) in cfg.points(1)?.iter().enumerate() {
                let x = pt[0];
                for n in 0..=p.degree {
                    let ctx = format!("eval {target:?} (n={n}, point {i})").to_lowercase();
                    let row = Row::new().cell("point", i).complex("x", x).cell("n", n);
                    let row = match target {
                        EvalTarget::Asc => {
                            let qk = q.powf(k);
                            let s = cfg.beta.s();
                            row.complex("value", wrap(ctx, asc(n, x, qk * s, qk / s, q * q))?)
                        }
                        EvalTarget::Aw => {
                            let [a, b, c, d] = beta.aw_parameters();
                            row.complex("value", wrap(ctx, aw(n, x, a, b, c, d, q * q))?)
                        }
                        _ => {
                            let s = cfg.beta.s();
                            let rec = wrap(ctx.clone(), v_eig(n, x, s, k, q))?;
                            let ser = wrap(ctx, v_eig_series(n, x, s, k, q))?;
                            row.complex("recurrence", rec).complex("series", ser).cell("spread", spread(&[rec, ser]))
                        }
                    };
                    table.push(row);
                }
            }
        }
        EvalTarget::Vtilde => {
            let t = cfg.beta.t();
            for m in 0..=p.degree {
                let y = cfg.beta.grid_point(m).value;
                for n in 0..=p.degree {
                    let ctx = format!("eval vtilde (n={n}, m={m})");
                    let term = wrap(ctx.clone(), vtilde_grid(n, m, t, k, q))?;
                    let inv = wrap(ctx, vtilde_eig(n, C64::new(y, 0.0), t, k, q))?;
                    table.push(
                        Row::new()
                            .cell("m", m)
                            .cell("y", y)
                            .cell("n", n)
                            .complex("terminating", term)
                            .complex("inverted", inv)
                            .cell("spread", spread(&[term, inv])),
                    );
                }
            }
        }
        EvalTarget::Pbeta => {
            for (i, pt) in cfg.points(1)?.iter().enumerate() {
                let x = pt[0];
                let rec = wrap(format!("eval pbeta recurrence (point {i})"), pbeta_recurrence(x, p.degree, beta, &cfg.ctx))?;
                for (m, &r) in rec.iter().enumerate() {
                    let ctx = format!("eval pbeta (m={m}, point {i})");
                    let sum = wrap(ctx.clone(), pbeta_sum(x, m, &cfg.beta, &cfg.ctx))?;
                    let closed = wrap(ctx, pbeta_closed(x, m, beta, &cfg.ctx))?;
                    let d = spread(&[sum, closed, r]);
                    table.push(
                        Row::new()
                            .cell("point", i)
                            .complex("x", x)
                            .cell("m", m)
                            .complex("sum", sum)
                            .complex("closed", closed)
                            .complex("recurrence", r)
                            .cell("spread", d)
                            .cell("tol", tol)
                            .cell("agree", d <= tol),
                    );
                }
            }
        }
        EvalTarget::Gr | EvalTarget::MvPbeta => {
            let mb = cfg.mbeta.beta();
            let n = cfg.mbeta.n();
            let alpha = mb.alpha();
            for (i, x) in cfg.points(n)?.iter().enumerate() {
                for m in MultiIndex::all_up_to(n, p.degree) {
                    let m = m.m.clone();
                    let ctx = format!("eval {target:?} (m={}, point {i})", label(&m)).to_lowercase();
                    let row = Row::new().cell("point", i).cell("m", label(&m));
                    let row = if target == EvalTarget::Gr {
                        row.complex("value", wrap(ctx, gr_aw(&m, x, &alpha, q * q))?)
                    } else {
                        let sum = wrap(ctx.clone(), mv_pbeta_sum(x, &m, &cfg.mbeta, &cfg.ctx))?;
                        let closed = wrap(ctx, mv_pbeta_closed(x, &m, mb, &cfg.ctx))?;
                        let d = spread(&[sum, closed]);
                        row.complex("sum", sum).complex("closed", closed).cell("spread", d).cell("tol", tol).cell("agree", d <= tol)
                    };
                    table.push(row);
                }
            }
        }
    }
    Ok(table)
}

pub fn table(kind: TableKind, cfg: &Validated) -> CliResult<Table> {
    let mb = cfg.mbeta.beta();
    let n = cfg.mbeta.n();
    let grid = cfg.mbeta.grid();
    let mut table = Table::default();
    match kind {
        TableKind::Alpha => {
            for (j, a) in mb.alpha().values.iter().enumerate() {
                table.push(Row::new().cell("j", j).complex("alpha", *a));
            }
        }
        TableKind::Grid => {
            for m in MultiIndex::all_up_to(n, cfg.params.degree) {
                let mut row = Row::new().cell("m", label(&m.m));
                for (j, y) in grid.point_with_t(&m.m).iter().enumerate().skip(1) {
                    row = row.cell(&format!("y{j}"), *y);
                }
                table.push(row);
            }
        }
        TableKind::Weights => {
            for m in MultiIndex::all_up_to(n, cfg.params.degree) {
                let w = wrap(format!("table weights (m={})", label(&m.m)), mv_wtilde(&m.m, &grid, &cfg.ctx))?;
                table.push(Row::new().cell("kind", "wtilde").cell("at", label(&m.m)).cell("value", w));
            }
            for (i, x) in cfg.points(n)?.iter().enumerate() {
                let w = wrap(format!("table weights (point {i})"), mv_w(x, mb.s, &mb.kvec, mb.q, &cfg.ctx))?;
                table.push(Row::new().cell("kind", "w").cell("at", format!("point {i}")).cell("value", w));
            }
        }
    }
    Ok(table)
}

/// Runs a suite and renders its reports. Failing checks are returned by name
/// alongside the rendered output so the caller can still write it.
pub fn verify(suite: Suite, cfg: &Validated, seed: u64, tol: Option<f64>, format: Format) -> CliResult<(String, Vec<String>)> {
    let scfg = SuiteConfig::new(cfg.params.suite.clone(), seed, tol).map_err(|e| CliError::from_awq("verify", e))?;
    let reports: Vec<Report> = run_suite(suite, &scfg);
    let failed = reports.iter().filter(|r| !r.pass).map(|r| r.check.clone()).collect();
    let text = match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&reports).map_err(|e| CliError::Io(e.into()))?;
            s.push('\n');
            s
        }
        Format::Csv => reports_to_csv(&reports).map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))?,
    };
    Ok((text, failed))
}
