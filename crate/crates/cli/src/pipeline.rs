//! Pipelines behind the subcommands. Each writes canonical CSV plus a derived SVG.

use crate::config::{header, load_spec, spec_hash, RunConfig};
use crate::svg::{line_plot, Series};
use crate::{AcceptanceFailure, ValidationError};
use anyhow::{Context, Result};
use bsgrowth::bsmap::BSMap;
use bsgrowth::group::{CycleKind, VertexKind};
use bsgrowth::ldp::{batch_rng, deviation_rate, DeviationExperiment, DEFAULT_DEPTHS};
use bsgrowth::markov::MarkovPartition;
use bsgrowth::thermo::{
    pressure_poincare, rate, PressureCurve, RateCurve, SpectrumCurve, Thermo, ThermoConfig,
};
use bsgrowth::tracing::{Frame, SymbolicGeodesic, Tracer};
use bsgrowth::{GroupPresentation, GroupSpec};
use std::fmt::Write as _;
use std::path::Path;

/// A validated configuration with its group, boundary map and partition built.
pub struct Session {
    pub config: RunConfig,
    pub spec: GroupSpec,
    pub group: GroupPresentation,
    pub bs: BSMap,
    pub partition: MarkovPartition,
}

impl Session {
    pub fn open(config: RunConfig) -> Result<Session> {
        config.validate()?;
        let spec = load_spec(&config.group)?;
        let group = GroupPresentation::build(&spec).context("building group")?;
        let bs = BSMap::new(&group, config.orientation, config.skip_even_corner_gate)
            .context("constructing the boundary map")?;
        let partition = MarkovPartition::new(&bs).context("building the Markov partition")?;
        Ok(Session {
            config,
            spec,
            group,
            bs,
            partition,
        })
    }

    pub fn thermo(&self) -> Result<Thermo<'_>> {
        let cfg = ThermoConfig {
            depth: self.config.depth,
            ..ThermoConfig::default()
        };
        Ok(Thermo::new(&self.bs, &self.partition, cfg)?)
    }

    fn header(&self, kind: &str, extra: &[(&str, String)]) -> String {
        header(&self.config, &self.spec, kind, extra)
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
}

fn csv(header: String, columns: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = header;
    s.push_str(&columns.join(","));
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

/// Diagnostic trail of `group validate`.
pub fn validate_group(config: &RunConfig) -> Result<Vec<String>> {
    config.validate()?;
    let spec = load_spec(&config.group)?;
    let mut out = vec![format!("group {} (sha256:{})", spec.name, spec_hash(&spec))];
    let group = GroupPresentation::build(&spec).context("building group")?;
    out.push(format!("sides: {}, generators: {}", group.m(), group.m() / 2));
    out.push(format!(
        "kind: {}",
        if group.is_first_kind() { "first kind" } else { "second kind" }
    ));
    let cusps = group.cusps();
    if cusps.is_empty() {
        out.push("cusps: none".into());
    } else {
        out.push(format!(
            "cusps: {} boundary vertices ({})",
            cusps.len(),
            cusps.iter().map(|c| format!("v{}", c + 1)).collect::<Vec<_>>().join(", ")
        ));
    }
    let improper = group
        .vertices
        .iter()
        .filter(|v| matches!(v.kind, VertexKind::Improper { .. }))
        .count();
    if improper > 0 {
        out.push(format!("free sides: {improper}"));
    }
    for (i, c) in group.cycles.iter().enumerate() {
        let what = match &c.kind {
            CycleKind::Interior { n, angle_sum } => format!("interior, length {n}, angle sum {angle_sum:.6}"),
            CycleKind::Cusp { .. } => "cusp".into(),
            CycleKind::Improper => "free".into(),
        };
        out.push(format!(
            "cycle {}: vertices {:?}, {what}",
            i + 1,
            c.vertices.iter().map(|v| v + 1).collect::<Vec<_>>()
        ));
    }
    let report = group.even_corner_check();
    let interior = group.cycles.iter().any(|c| matches!(c.kind, CycleKind::Interior { .. }));
    out.push(match (report.passed, interior) {
        (true, false) => "even corners: pass (no interior vertices)".into(),
        (true, true) => "even corners: pass".into(),
        (false, _) => format!("even corners: FAIL ({})", report.violations.join("; ")),
    });
    if !report.passed && !config.skip_even_corner_gate {
        return Err(ValidationError(out.join("\n")).into());
    }
    let bs = BSMap::new(&group, config.orientation, config.skip_even_corner_gate)
        .context("constructing the boundary map")?;
    out.push(format!("boundary map: orientation {:?}, domain length {:.6}", bs.orientation(), bs.domain_length()));
    for w in &bs.warnings {
        out.push(format!("warning: {w}"));
    }
    let p = MarkovPartition::new(&bs).context("building the Markov partition")?;
    out.push(format!(
        "Markov partition: {} cells ({} cusp), cusp level {}, W' residual {:.2e}, (M2) residual {:.2e}",
        p.len(),
        p.cusp_cells().len(),
        p.level(),
        p.w_prime.invariance_residual,
        p.m2_residual
    ));
    Ok(out)
}

pub fn beta_grid(s: &Session, th: &Thermo) -> Result<Vec<f64>> {
    Ok(match &s.config.betas {
        Some(b) => b.clone(),
        None => th.default_beta_grid()?,
    })
}

pub fn write_pressure(s: &Session, th: &Thermo, curve: &PressureCurve) -> Result<()> {
    let extra = [
        ("delta", format!("[{}, {}]", curve.delta.0, curve.delta.1)),
        ("transfer_block", th.graph.r.to_string()),
        ("n_max", th.config.n_max.to_string()),
    ];
    let body = csv(
        s.header("pressure", &extra),
        &["beta", "lower", "upper", "estimate", "naive", "method", "block_len"],
        curve.points.iter().map(|p| {
            vec![
                num(p.beta),
                num(p.lower),
                num(p.upper),
                num(p.estimate),
                num(p.naive),
                p.method.as_str().to_string(),
                p.block_len.to_string(),
            ]
        }),
    );
    write(&s.config.out, "pressure.csv", &body)?;
    let svg = line_plot(
        &format!("Pressure, {}", s.spec.name),
        "beta",
        "P(beta)",
        &[
            Series { label: "lower", points: curve.points.iter().map(|p| (p.beta, p.lower)).collect(), dashed: true },
            Series { label: "upper", points: curve.points.iter().map(|p| (p.beta, p.upper)).collect(), dashed: true },
            Series { label: "midpoint", points: curve.points.iter().map(|p| (p.beta, p.mid())).collect(), dashed: false },
        ],
    );
    write(&s.config.out, "pressure.svg", &svg)
}

pub fn write_spectrum(s: &Session, sp: &SpectrumCurve) -> Result<()> {
    let mut extra = vec![
        ("alpha_minus", num(sp.alpha_minus)),
        ("alpha_plus", num(sp.alpha_plus)),
        ("alpha_minus_cycle", format!("[{}, {}]", sp.cycle_alpha_minus.0, sp.cycle_alpha_minus.1)),
        ("alpha_plus_cycle", format!("[{}, {}]", sp.cycle_alpha_plus.0, sp.cycle_alpha_plus.1)),
        ("alpha_minus_slope", num(sp.slope_alpha_minus)),
        ("alpha_plus_slope", num(sp.slope_alpha_plus)),
        ("alpha_g", num(sp.alpha_g)),
    ];
    for w in &sp.warnings {
        extra.push(("warning", w.clone()));
    }
    let body = csv(
        s.header("spectrum", &extra),
        &["alpha", "b", "b_lower", "b_upper", "beta", "interior"],
        sp.points.iter().map(|p| {
            vec![num(p.alpha), num(p.b), num(p.b_lower), num(p.b_upper), num(p.beta), p.interior.to_string()]
        }),
    );
    write(&s.config.out, "spectrum.csv", &body)?;
    let svg = line_plot(
        &format!("Growth-rate spectrum, {}", s.spec.name),
        "alpha",
        "b(alpha)",
        &[
            Series { label: "b", points: sp.points.iter().map(|p| (p.alpha, p.b)).collect(), dashed: false },
            Series { label: "bracket", points: sp.points.iter().map(|p| (p.alpha, p.b_lower)).collect(), dashed: true },
            Series { label: "", points: sp.points.iter().map(|p| (p.alpha, p.b_upper)).collect(), dashed: true },
        ],
    );
    write(&s.config.out, "spectrum.svg", &svg)
}

pub fn write_rate(s: &Session, rc: &RateCurve) -> Result<()> {
    let extra = [
        ("left_slope", num(rc.left_slope)),
        ("right_slope", num(rc.right_slope)),
        ("convexity_defect", num(rc.convexity_defect)),
    ];
    let body = csv(
        s.header("rate", &extra),
        &["alpha", "i", "i_lower", "i_upper"],
        rc.points.iter().map(|p| vec![num(p.alpha), num(p.i), num(p.i_lower), num(p.i_upper)]),
    );
    write(&s.config.out, "rate.csv", &body)?;
    let svg = line_plot(
        &format!("Rate function, {}", s.spec.name),
        "alpha",
        "I(alpha)",
        &[Series { label: "I", points: rc.points.iter().map(|p| (p.alpha, p.i)).collect(), dashed: false }],
    );
    write(&s.config.out, "rate.svg", &svg)
}

pub fn write_ldp(s: &Session, ex: &DeviationExperiment) -> Result<()> {
    let extra = [
        ("interval", format!("[{}, {}]", ex.interval.0, ex.interval.1)),
        ("fitted_rate", num(ex.fitted_rate)),
        ("fitted_intercept", num(ex.fitted_intercept)),
        ("predicted_rate", ex.predicted_rate.map(num).unwrap_or_else(|| "none".into())),
    ];
    let body = csv(
        s.header("ldp", &extra),
        &["n", "hits", "fraction", "lograte", "flagged"],
        ex.rows.iter().map(|r| {
            vec![r.n.to_string(), r.hits.to_string(), num(r.fraction), num(r.lograte), r.flagged.to_string()]
        }),
    );
    write(&s.config.out, "ldp.csv", &body)?;
    let mut series = vec![Series {
        label: "log fraction",
        points: ex.rows.iter().filter(|r| r.hits > 0).map(|r| (r.n as f64, r.fraction.ln())).collect(),
        dashed: false,
    }];
    if let Some(p) = ex.predicted_rate {
        let n0 = ex.rows.first().map(|r| r.n as f64).unwrap_or(0.0);
        let n1 = ex.rows.last().map(|r| r.n as f64).unwrap_or(1.0);
        let c = ex.fitted_intercept + ex.fitted_rate * n0 - p * n0;
        series.push(Series { label: "predicted slope", points: vec![(n0, c + p * n0), (n1, c + p * n1)], dashed: true });
    }
    let svg = line_plot(&format!("Deviation decay, {}", s.spec.name), "n", "log fraction", &series);
    write(&s.config.out, "ldp.svg", &svg)
}

/// Default deviation interval: below `α_G` when there is room, above it otherwise.
pub fn default_interval(sp: &SpectrumCurve) -> (f64, f64) {
    let g = sp.alpha_g;
    if g - 0.1 > sp.alpha_minus + 0.05 {
        ((g - 0.5).max(sp.alpha_minus + 0.01), g - 0.1)
    } else {
        (g + 0.1, (g + 0.5).min(sp.alpha_plus - 0.01))
    }
}

pub fn run_ldp(s: &Session, sp: &SpectrumCurve, rc: &RateCurve) -> Result<DeviationExperiment> {
    let interval = s.config.interval.unwrap_or_else(|| default_interval(sp));
    Ok(deviation_rate(
        &s.bs,
        interval,
        (sp.alpha_minus, sp.alpha_plus),
        &DEFAULT_DEPTHS,
        s.config.samples,
        s.config.seed,
        Some(rc),
    )?)
}

/// Cells of the partition with successor lists.
pub fn write_markov(s: &Session) -> Result<()> {
    let p = &s.partition;
    let extra = [
        ("cusp_level", p.level().to_string()),
        ("w_prime_points", p.w_prime.points.len().to_string()),
        ("w_prime_residual", num(p.w_prime.invariance_residual)),
        ("m2_residual", num(p.m2_residual)),
    ];
    let body = csv(
        s.header("markov", &extra),
        &["cell", "start", "end", "branch", "cusp", "transient", "successors"],
        p.cells.iter().enumerate().map(|(i, c)| {
            vec![
                i.to_string(),
                num(c.arc.start()),
                num(c.arc.end()),
                (c.branch + 1).to_string(),
                c.cusp.map(|v| (v + 1).to_string()).unwrap_or_default(),
                p.transient.contains(&i).to_string(),
                p.succ[i].iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "),
            ]
        }),
    );
    write(&s.config.out, "markov.csv", &body)
}

#[derive(Clone, Debug)]
pub struct TraceSummary {
    pub geodesics: usize,
    pub passed: usize,
    pub vertex_frames: usize,
    pub failures: Vec<String>,
}

/// Cutting sequences of random geodesics, with the parallel check and a per-step CSV.
pub fn run_trace(s: &Session, count: usize, depth: usize) -> Result<TraceSummary> {
    let tracer = Tracer::new(&s.bs, depth);
    let mut rng = batch_rng(s.config.seed, 0);
    let mut rows = Vec::new();
    let mut summary = TraceSummary { geodesics: count, passed: 0, vertex_frames: 0, failures: Vec::new() };
    for g in 0..count {
        let geo = SymbolicGeodesic::random(&s.bs, &s.partition, depth, &mut rng);
        let rec = tracer.trace(&geo, depth)?;
        let rep = bsgrowth::tracing::parallel_report(&rec);
        summary.vertex_frames += rep.vertex_frames;
        if rep.passed {
            summary.passed += 1;
        } else if summary.failures.len() < 5 {
            summary.failures.push(format!("geodesic {g}: frame {:?} fails", rep.first_failure));
        }
        for k in 0..depth {
            let frame = match rec.frames[k] {
                Frame::Same => "same",
                Frame::Side => "side",
                Frame::Vertex => "vertex",
                Frame::Apart => "apart",
            };
            rows.push(vec![
                g.to_string(),
                (k + 1).to_string(),
                (rec.letters[k] + 1).to_string(),
                (rec.expansion[k] + 1).to_string(),
                num(rec.t[k]),
                num(rec.lyapunov[k]),
                frame.to_string(),
            ]);
        }
    }
    let extra = [("geodesics", count.to_string()), ("depth", depth.to_string())];
    let body = csv(
        s.header("trace", &extra),
        &["geodesic", "k", "cutting_letter", "expansion_letter", "t", "lyapunov", "frame"],
        rows,
    );
    write(&s.config.out, "trace.csv", &body)?;
    Ok(summary)
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    /// Failing an acceptance-tagged check makes `report` exit with status 3.
    pub acceptance: bool,
    pub passed: bool,
    pub detail: String,
}

pub struct Report {
    pub summary: Vec<String>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.acceptance && !c.passed).collect()
    }
}

/// Full pipeline: pressure, spectrum, rate, LDP, Poincaré check and the invariant suite.
pub fn run_report(config: RunConfig) -> Result<Report> {
    let s = Session::open(config)?;
    let th = s.thermo()?;
    let delta = th.delta()?;
    let grid = beta_grid(&s, &th)?;
    let curve = th.pressure_curve(&grid)?;
    write_pressure(&s, &th, &curve)?;
    let sp = th.spectrum(&curve, s.config.alphas.as_deref().unwrap_or(&[]))?;
    write_spectrum(&s, &sp)?;
    let rc = rate(&sp);
    write_rate(&s, &rc)?;
    let ex = run_ldp(&s, &sp, &rc)?;
    write_ldp(&s, &ex)?;
    write_markov(&s)?;

    let cusped = s.group.has_cusp();
    let first_kind = s.group.is_first_kind();
    let dmid = 0.5 * (delta.0 + delta.1);
    let mut checks = Vec::new();
    let mut check = |name, acceptance, passed, detail: String| {
        checks.push(Check { name, acceptance, passed, detail })
    };
    let p = &s.partition;
    check("w-prime-invariance", true, p.w_prime.invariance_residual <= 1e-9, format!("residual {:.2e}", p.w_prime.invariance_residual));
    check("markov-m2", true, p.m2_residual <= 1e-9, format!("residual {:.2e}", p.m2_residual));
    let tr = run_trace(&s, s.config.geodesics, 30)?;
    check(
        "parallel-lemma",
        true,
        tr.passed == tr.geodesics,
        format!("{}/{} geodesics, {} vertex frames", tr.passed, tr.geodesics, tr.vertex_frames),
    );
    if first_kind {
        check(
            "delta-equals-one",
            true,
            delta.0 <= 1.0 && 1.0 <= delta.1,
            format!("[{:.6}, {:.6}]", delta.0, delta.1),
        );
    }
    let p1 = th.pressure(1.0)?;
    if !first_kind && !cusped {
        check("pressure-negative-at-one", true, p1.upper < 0.0, format!("P(1) in [{:.6}, {:.6}]", p1.lower, p1.upper));
    }
    let (cmin, _) = th.cycle_mean_brackets();
    let contains0 = cmin.0 <= 1e-9 && cmin.1 >= -1e-9;
    check(
        "parabolic-detector",
        true,
        if cusped { contains0 } else { !contains0 && cmin.0 > 0.05 },
        format!("min cycle mean in [{:.6}, {:.6}]", cmin.0, cmin.1),
    );
    if cusped {
        let beyond = th.pressure_via_induced(delta.1 + 0.2)?;
        check(
            "boundary-regime",
            true,
            beyond.method == bsgrowth::thermo::Method::Boundary,
            format!("method at beta = {:.4}: {}", delta.1 + 0.2, beyond.method.as_str()),
        );
    }
    let betas = [0.0, 0.5, 1.0];
    let poinc = pressure_poincare(&s.group, &betas, s.config.poincare_depth)?;
    let mut worst: f64 = 0.0;
    for e in &poinc {
        let d = th.pressure_direct(e.beta);
        let gap = (d.lower - 0.02 - e.estimate).max(e.estimate - d.upper - 0.02).max(0.0);
        worst = worst.max(gap);
    }
    check("poincare-consistency", true, worst == 0.0, format!("largest excess {worst:.2e} at depth {}", s.config.poincare_depth));
    let bmax = sp.points.iter().map(|p| p.b).fold(f64::NEG_INFINITY, f64::max);
    check("spectrum-maximum", true, (bmax - dmid).abs() <= 0.05, format!("max b {bmax:.6}, delta {dmid:.6}"));
    // Brackets rather than midpoints: b may exceed 1 by up to the width of the δ bracket.
    let bmin = sp.points.iter().map(|p| p.b_upper).fold(f64::INFINITY, f64::min);
    let blow = sp.points.iter().map(|p| p.b_lower).fold(f64::NEG_INFINITY, f64::max);
    check("spectrum-range", false, bmin >= -1e-9 && blow <= 1.0 + 1e-9, format!("b brackets within [{bmin:.6}, {blow:.6}]"));
    let imin = rc.points.iter().map(|p| p.i_upper).fold(f64::INFINITY, f64::min);
    check("rate-nonnegative", false, imin >= -1e-6, format!("min upper I {imin:.3e}"));
    check("rate-convex", false, rc.convexity_defect <= 1e-6, format!("defect {:.3e}", rc.convexity_defect));
    if cusped {
        let dec = sp.points.windows(2).all(|w| w[1].b < w[0].b);
        check("spectrum-decreasing", true, dec, format!("{} points", sp.points.len()));
        let left = sp.points.first().map(|p| p.b).unwrap_or(f64::NAN);
        check("spectrum-left-end", true, (left - dmid).abs() <= 0.1, format!("b(alpha_1) {left:.6}"));
        check(
            "rate-left-slope",
            true,
            (rc.left_slope - (1.0 - dmid)).abs() <= 0.15,
            format!("slope {:.4}, 1 - delta {:.4}", rc.left_slope, 1.0 - dmid),
        );
    }
    if let Some(err) = ex.relative_error().filter(|_| ex.predicted_rate.is_some_and(|p| p.abs() >= 0.05)) {
        check("ldp-calibration", false, err <= 0.25, format!("fitted {:.5}, predicted {:.5}", ex.fitted_rate, ex.predicted_rate.unwrap_or(f64::NAN)));
    }

    let mut summary = vec![
        format!("group: {}", s.spec.name),
        format!("kind: {}{}", if first_kind { "first" } else { "second" }, if cusped { ", cusped" } else { "" }),
        format!("δ bracket [{:.6}, {:.6}]", delta.0, delta.1),
    ];
    if cusped && contains0 {
        summary.push("α⁻ ≈ 0 (cusp present)".into());
    } else {
        summary.push(format!("α⁻ = {:.6}", sp.alpha_minus));
    }
    summary.push(format!("α⁺ = {:.6}", sp.alpha_plus));
    summary.push(format!("α_G = {:.6}", sp.alpha_g));
    summary.push(if p1.upper < 0.0 {
        format!("P(1) < 0: [{:.6}, {:.6}]", p1.lower, p1.upper)
    } else {
        format!("P(1) in [{:.6}, {:.6}]", p1.lower, p1.upper)
    });
    summary.push(format!(
        "LDP on [{:.4}, {:.4}]: fitted rate {:.5}, predicted {}",
        ex.interval.0,
        ex.interval.1,
        ex.fitted_rate,
        ex.predicted_rate.map(|x| format!("{x:.5}")).unwrap_or_else(|| "n/a".into())
    ));
    for w in &sp.warnings {
        summary.push(format!("warning: {w}"));
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    summary.push(format!("invariants: {passed}/{} passed", checks.len()));

    let body = csv(
        s.header("invariants", &[]),
        &["check", "acceptance", "passed", "detail"],
        checks.iter().map(|c| vec![c.name.to_string(), c.acceptance.to_string(), c.passed.to_string(), format!("\"{}\"", c.detail)]),
    );
    write(&s.config.out, "invariants.csv", &body)?;
    let mut text = s.header("summary", &[]);
    for l in &summary {
        let _ = writeln!(text, "{l}");
    }
    write(&s.config.out, "summary.txt", &text)?;
    Ok(Report { summary, checks })
}

/// Runs the report and converts failed acceptance checks into an error.
pub fn report_or_fail(config: RunConfig) -> Result<Report> {
    let r = run_report(config)?;
    let failed: Vec<String> = r.failures().iter().map(|c| format!("{}: {}", c.name, c.detail)).collect();
    if failed.is_empty() {
        Ok(r)
    } else {
        Err(AcceptanceFailure(failed).into())
    }
}
