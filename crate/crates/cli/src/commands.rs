//! One function per subcommand. Each returns an [`Outcome`]; guard-rail
//! failures are [`UsageError`]s, which map to exit code 2.

use std::sync::Arc;

use anyhow::{Context, Result};
use polyharm::balls::CayleyBall;
use polyharm::dimension::estimate_dimension;
use polyharm::harmonic::{harnack_ratio, is_harmonic, solve_dirichlet, ScalarField};
use polyharm::inequalities::{battery, default_battery, InequalityReport};
use polyharm::polytable::symbolic_kernel_dim;
use polyharm::rough::extension::{w_radius, ProductExtension, Provenance};
use polyharm::rough::{
    injectivize, make_subdivided_lattice, run_mvl_suite, FiniteGraph, MvlSuiteConfig, RoughContext,
    RoughIsometry,
};
use polyharm::volume::{
    doubling_constants, estimate_degree, growth_function, pansu_ratios, rvc_threshold, GrowthSeries,
};
use polyharm::{cache, GroupElement, GroupSpec};
use serde_json::{json, Value};

use crate::config::Resolved;
use crate::expr::{Boundary, Formula};
use crate::report::{csv_text, Outcome};
use crate::UsageError;

fn to_value<T: serde::Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("payload serializes")
}

fn coord_header(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

/// Growth series, through the ball cache when a cache directory is set.
pub fn growth_series(res: &Resolved) -> Result<GrowthSeries> {
    let n = res.nmax();
    let series = match &res.config.cache_dir {
        Some(dir) => {
            let ball = cache::load_or_enumerate(&res.spec, &res.generators, &res.spec.identity(), n, dir)
                .with_context(|| format!("ball cache at {}", dir.display()))?;
            let beta = (0..=n).map(|r| ball.count_within(r) as u64).collect();
            GrowthSeries::new(res.spec.clone(), res.generators.clone(), beta)?
        }
        None => growth_function(&res.spec, &res.generators, n)?,
    };
    Ok(series.with_nominal_degree(res.spec.homogeneous_dimension()))
}

pub fn growth(res: &Resolved) -> Result<Outcome> {
    let series = growth_series(res)?;
    let degree = res.degree();
    let doubling = doubling_constants(&series);
    let pansu = pansu_ratios(&series, degree)?;
    let rows = series.beta().iter().enumerate().map(|(n, b)| {
        let dbl = doubling
            .get(n.wrapping_sub(1))
            .filter(|_| n >= 1)
            .map(|r| format!("{}", *r.numer() as f64 / *r.denom() as f64))
            .unwrap_or_default();
        let ratio = if n == 0 { String::new() } else { pansu.ratios[n - 1].to_string() };
        vec![n.to_string(), b.to_string(), dbl, ratio]
    });
    let csv = csv_text(&["n", "beta", "doubling", "pansu_ratio"], rows);
    Ok(Outcome {
        payload: json!({
            "spec": res.spec.text(),
            "generators": res.generators.convention(),
            "nmax": res.nmax(),
            "degree": degree,
            "beta": series.beta(),
            "doubling": doubling.iter().map(|r| format!("{}/{}", r.numer(), r.denom())).collect::<Vec<_>>(),
            "pansu": pansu,
        }),
        csv: Some(csv),
        text: None,
        passed: true,
    })
}

pub fn pansu(res: &Resolved) -> Result<Outcome> {
    let series = growth_series(res)?;
    let degree = res.degree();
    let p = pansu_ratios(&series, degree)?;
    let est = res
        .degree_window()
        .map(|(lo, hi)| estimate_degree(&series, lo, hi))
        .transpose()?;
    let csv = csv_text(
        &["n", "ratio"],
        p.ratios.iter().enumerate().map(|(i, r)| vec![(i + 1).to_string(), r.to_string()]),
    );
    Ok(Outcome {
        payload: json!({
            "spec": res.spec.text(),
            "pansu": p,
            "degree_estimate": est,
            "note": "tail statistics are finite-range estimates",
        }),
        csv: Some(csv),
        text: None,
        passed: true,
    })
}

pub fn rvc(res: &Resolved) -> Result<Outcome> {
    let series = growth_series(res)?;
    let degree = res.degree();
    let results: Vec<_> = res.thetas.iter().map(|t| rvc_threshold(&series, degree, t)).collect();
    let csv = csv_text(
        &["theta", "degree", "r0", "grid_max", "pairs_checked"],
        results.iter().map(|r| {
            vec![
                r.theta.clone(),
                degree.to_string(),
                r.r0.map(|v| v.to_string()).unwrap_or_else(|| "not found".into()),
                r.grid_max.to_string(),
                r.pairs_checked.to_string(),
            ]
        }),
    );
    Ok(Outcome {
        payload: json!({
            "spec": res.spec.text(),
            "degree": degree,
            "nmax": res.nmax(),
            "thresholds": results,
        }),
        csv: Some(csv),
        text: None,
        passed: true,
    })
}

fn boundary(res: &Resolved, default: &str) -> Result<Boundary, UsageError> {
    Boundary::parse(res.config.boundary.as_deref().unwrap_or(default))
}

pub fn dirichlet(res: &Resolved) -> Result<Outcome> {
    let r = res.config.inner.unwrap_or(res.config.radius);
    let data = boundary(res, "x1")?;
    let ball = Arc::new(CayleyBall::enumerate(&res.spec, &res.generators, &res.spec.identity(), r + 1)?);
    let sphere = ball.boundary(r)?;
    let g: Vec<f64> = sphere
        .iter()
        .map(|i| data.value(ball.vertex(i)))
        .collect::<Result<_>>()?;
    let sol = solve_dirichlet(&ball, r, &g, res.solve_options())?;
    let (lo, hi) = g.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let u = sol.field.values();
    let max_principle = u.iter().all(|&v| lo <= v && v <= hi);
    let n = res.spec.coord_len();
    let mut header = vec!["index".to_string()];
    header.extend(coord_header(n));
    header.push("value".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let csv = csv_text(
        &header,
        (0..ball.len()).map(|i| {
            let mut row = vec![i.to_string()];
            row.extend(ball.vertex(i).coords().iter().map(|c| c.to_string()));
            row.push(u[i].to_string());
            row
        }),
    );
    let passed = sol.residual <= sol.tol && max_principle;
    Ok(Outcome {
        payload: json!({
            "spec": res.spec.text(),
            "interior_radius": r,
            "boundary": data.describe(),
            "vertices": ball.len(),
            "residual": sol.residual,
            "tol": sol.tol,
            "iterations": sol.iterations,
            "boundary_min": lo,
            "boundary_max": hi,
            "max_principle": max_principle,
        }),
        csv: Some(csv),
        text: None,
        passed,
    })
}

fn battery_report(res: &Resolved) -> Result<polyharm::inequalities::BatteryReport> {
    let fields = default_battery(&res.spec, res.config.random_fields);
    Ok(battery(&res.spec, &res.generators, &res.config.scales, &fields, res.config.seed)?)
}

fn inequality_outcome(rep: &InequalityReport) -> Outcome {
    let csv = csv_text(
        &["scale", "constant", "field_id"],
        rep.rows.iter().map(|r| {
            vec![
                r.scale.to_string(),
                r.constant.map(|c| c.to_string()).unwrap_or_default(),
                r.field_id.clone(),
            ]
        }),
    );
    Outcome {
        payload: json!({ "report": rep, "spread": rep.spread() }),
        csv: Some(csv),
        text: None,
        passed: true,
    }
}

pub fn poincare(res: &Resolved) -> Result<Outcome> {
    Ok(inequality_outcome(&battery_report(res)?.poincare))
}

pub fn meanvalue(res: &Resolved) -> Result<Outcome> {
    Ok(inequality_outcome(&battery_report(res)?.mean_value))
}

/// Uses the formula itself when it is harmonic on `B(radius)`, otherwise its
/// harmonic extension from the sphere of radius `radius + 1`.
pub fn harnack(res: &Resolved) -> Result<Outcome> {
    let r = res.config.radius;
    let n = res.config.inner.unwrap_or(r);
    if n > r {
        return Err(UsageError(format!("--inner {n} exceeds --radius {r}")).into());
    }
    let data = boundary(res, "x1 + 10")?;
    let ball = Arc::new(CayleyBall::enumerate(&res.spec, &res.generators, &res.spec.identity(), r + 1)?);
    let values: Vec<f64> = ball.vertices().iter().map(|g| data.value(g)).collect::<Result<_>>()?;
    let direct = ScalarField::new(ball.clone(), values)?;
    let scale = direct.values().iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let (field, source) = if is_harmonic(&direct, r, 1e-12 * scale)?.harmonic {
        (direct, "formula")
    } else {
        let sphere = ball.boundary(r)?;
        let g: Vec<f64> = sphere.iter().map(|i| direct.value(i)).collect();
        (solve_dirichlet(&ball, r, &g, res.solve_options())?.field, "dirichlet")
    };
    let ratio = harnack_ratio(&field, n)?;
    Ok(Outcome {
        payload: json!({
            "spec": res.spec.text(),
            "boundary": data.describe(),
            "radius": r,
            "ball": n,
            "source": source,
            "ratio": ratio,
        }),
        csv: None,
        text: Some(ratio.to_string()),
        passed: true,
    })
}

pub fn dim(res: &Resolved) -> Result<Outcome> {
    let schedule = res.schedule();
    let d = res.config.d;
    if schedule.len() < 2 {
        return Err(UsageError("dim needs at least two schedule radii to test saturation".into()).into());
    }
    if d > schedule[0] / 2 {
        return Err(UsageError(format!(
            "degree {d} is too high for the schedule {schedule:?}: need d <= {}",
            schedule[0] / 2
        ))
        .into());
    }
    let est = estimate_dimension(&res.spec, &res.generators, d, &schedule, res.config.rel_tol)?;
    let passed = est.saturated && est.matches_oracle() != Some(false);
    let csv = csv_text(
        &["radius", "rank"],
        est.schedule.iter().zip(&est.ranks).map(|(r, k)| vec![r.to_string(), k.to_string()]),
    );
    Ok(Outcome {
        payload: to_value(&est),
        csv: Some(csv),
        text: None,
        passed,
    })
}

pub fn oracle(res: &Resolved) -> Result<Outcome> {
    let dim = match (res.config.big_d, &res.spec) {
        (Some(d), _) => d as usize,
        (None, GroupSpec::Lattice { dim }) => *dim,
        (None, _) => return Err(UsageError("the oracle covers Z^D only; pass --D".into()).into()),
    };
    if dim == 0 {
        return Err(UsageError("--D must be at least 1".into()).into());
    }
    let k = symbolic_kernel_dim(dim, res.config.d)?;
    Ok(Outcome {
        payload: json!({ "D": dim, "d": res.config.d, "kernel_dim": k }),
        csv: None,
        text: Some(k.to_string()),
        passed: true,
    })
}

fn read_csv_rows(path: &std::path::Path) -> Result<Vec<Vec<i64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        rows.push(
            rec.iter()
                .map(|s| s.parse::<i64>().with_context(|| format!("{}: bad integer `{s}`", path.display())))
                .collect::<Result<_>>()?,
        );
    }
    Ok(rows)
}

/// The map under test: a CSV pair (edges `u,v`; images `x,coords..`) or the
/// subdivided lattice.
pub fn rough_map(res: &Resolved) -> Result<RoughIsometry> {
    let rc = &res.config.rough;
    match (&rc.graph_csv, &rc.map_csv) {
        (Some(g), Some(m)) => {
            let edges: Vec<(u32, u32)> = read_csv_rows(g)?
                .into_iter()
                .map(|r| match r.as_slice() {
                    [u, v] => Ok((*u as u32, *v as u32)),
                    _ => Err(anyhow::anyhow!("edge rows need two columns")),
                })
                .collect::<Result<_>>()?;
            let map = read_csv_rows(m)?;
            let n = map.len();
            let mut images = vec![None; n];
            for row in map {
                let (x, coords) = row.split_first().context("empty map row")?;
                let slot = images
                    .get_mut(*x as usize)
                    .with_context(|| format!("map row for vertex {x} out of range"))?;
                *slot = Some(GroupElement::new(coords.iter().copied()));
            }
            let images = images
                .into_iter()
                .enumerate()
                .map(|(i, g)| g.with_context(|| format!("no image for vertex {i}")))
                .collect::<Result<_>>()?;
            let graph = FiniteGraph::from_edges(n, &edges)?;
            Ok(RoughIsometry::new(graph, 0, res.spec.clone(), res.generators.clone(), images, rc.a, rc.b)?)
        }
        (None, None) => {
            let dim = res
                .rough_dim()
                .ok_or_else(|| UsageError("built-in rough map needs Z^D with D <= 3, or --graph-csv/--map-csv".into()))?;
            let x = make_subdivided_lattice(dim, res.rough_window(dim))?;
            Ok(RoughIsometry::subdivision(&x))
        }
        _ => Err(UsageError("--graph-csv and --map-csv go together".into()).into()),
    }
}

pub fn rough_check(res: &Resolved) -> Result<Outcome> {
    let phi = rough_map(res)?;
    let ctx = RoughContext::new(&phi)?;
    let check = ctx.check()?;
    let (inverse, composition) = if check.density_violations == 0 {
        let inv = ctx.rough_inverse()?;
        (Some(ctx.check_inverse(&inv)), Some(ctx.check_composition(&inv)))
    } else {
        (None, None)
    };
    let inj = injectivize(&phi, phi.graph.max_degree().max(1));
    let injectivity = match &inj {
        Ok(i) => json!({
            "q": i.q,
            "max_fiber": i.max_fiber,
            "injective": i.is_injective(),
            "projects": i.projects_to(&phi),
        }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let passed = check.passed()
        && inverse.as_ref().is_some_and(|r| r.passed())
        && composition.as_ref().is_some_and(|r| r.passed())
        && inj.as_ref().is_ok_and(|i| i.is_injective());
    Ok(Outcome {
        payload: json!({
            "spec": phi.spec.text(),
            "source_vertices": phi.len(),
            "target_radius": ctx.target_radius,
            "check": check,
            "inverse": inverse,
            "composition": composition,
            "injectivization": injectivity,
        }),
        csv: None,
        text: None,
        passed,
    })
}

pub fn rough_extend(res: &Resolved) -> Result<Outcome> {
    let dim = res
        .rough_dim()
        .ok_or_else(|| UsageError("rough-extend runs on the subdivided Z^D, D <= 3".into()))?;
    let rc = &res.config.rough;
    let degree_bound = 2 * dim;
    let q = polyharm::rough::injectivity_order(degree_bound, 2.0, 1.0)?;
    let w = w_radius(1.0, q);
    let window = rc.window.unwrap_or(rc.region + w + 1);
    let x = make_subdivided_lattice(dim, window)?;
    let phi = RoughIsometry::subdivision(&x);
    let inj = injectivize(&phi, x.degree_bound())?;
    let region = Arc::new(CayleyBall::enumerate(&inj.spec, &inj.generators, &inj.spec.identity(), rc.region)?);
    let op = ProductExtension::new(&inj, region.clone(), w, x.complete_fiber_radius())?;
    let formula = Formula::parse(res.config.boundary.as_deref().unwrap_or("x1"))?;
    let u: Vec<f64> = x
        .doubled
        .iter()
        .map(|g| formula.eval(&g.coords().iter().map(|&c| c as f64 / 2.0).collect::<Vec<_>>()))
        .collect::<Result<_>>()?;
    let e = op.apply_batch(&[&u])?.remove(0);
    let direct = op.provenance().iter().filter(|p| matches!(p, Provenance::Direct(_))).count();
    let u_sup = u.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut header = vec!["index".to_string()];
    header.extend(coord_header(dim));
    header.extend(["residue", "value", "provenance", "count"].map(String::from));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let csv = csv_text(
        &header,
        (0..region.len()).map(|i| {
            let mut row = vec![i.to_string()];
            row.extend(region.vertex(i).coords().iter().map(|c| c.to_string()));
            let p = op.provenance()[i];
            row.push(e.values[i].to_string());
            row.push(match p {
                Provenance::Direct(x) => format!("direct:{x}"),
                Provenance::Averaged(_) => "averaged".into(),
            });
            row.push(p.count().to_string());
            row
        }),
    );
    Ok(Outcome {
        payload: json!({
            "spec": inj.spec.text(),
            "q": q,
            "w_radius": w,
            "w_rule": "b + floor(q/2)",
            "window": window,
            "region_radius": rc.region,
            "region_vertices": region.len(),
            "direct_vertices": direct,
            "field": formula.text(),
            "sup_source": u_sup,
            "sup_extension": e.sup_norm(),
        }),
        csv: Some(csv),
        text: None,
        passed: e.sup_norm() <= u_sup,
    })
}

pub fn mvl_config(res: &Resolved) -> Result<MvlSuiteConfig> {
    let dim = res.rough_dim().unwrap_or(2);
    let point = |head: &[i64], residue: i64| -> Vec<i64> {
        let mut v = vec![0; dim + 1];
        for (i, c) in head.iter().take(dim).enumerate() {
            v[i] = *c;
        }
        v[dim] = residue;
        v
    };
    let rc = &res.config.rough;
    Ok(MvlSuiteConfig {
        dim,
        fields: rc.mvl_fields,
        seed: res.config.seed,
        radii: rc.mvl_radii.clone(),
        probes: vec![point(&[], 0), point(&[1], 0), point(&[], 5), point(&[2, 1], 3)],
        ..MvlSuiteConfig::default()
    })
}

pub fn rough_mvl(res: &Resolved) -> Result<Outcome> {
    let rep = run_mvl_suite(&mvl_config(res)?)?;
    let csv = csv_text(
        &["r", "max_c", "min_c", "source_max_c"],
        rep.rows.iter().zip(&rep.source_rows).map(|(a, b)| {
            vec![a.r.to_string(), a.max_c.to_string(), a.min_c.to_string(), b.max_c.to_string()]
        }),
    );
    Ok(Outcome {
        passed: rep.passed(),
        payload: to_value(&rep),
        csv: Some(csv),
        text: None,
    })
}
