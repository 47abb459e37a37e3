//! The twelve acceptance criteria. Each prints one PASS/FAIL line; the test
//! fails if any criterion does.

use std::sync::Arc;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use polyharm::dimension::{energy_lower_bound, energy_probe, estimate_dimension, DEFAULT_REL_TOL};
use polyharm::harmonic::{harnack_ratio, solve_dirichlet_with, ScalarField};
use polyharm::inequalities::{battery, default_battery, mean_value_constant, DEFAULT_SEED};
use polyharm::polytable::symbolic_kernel_dim;
use polyharm::rough::{injectivize, make_subdivided_lattice, run_mvl_suite, MvlSuiteConfig, RoughContext, RoughIsometry};
use polyharm::solver::SolveOptions;
use polyharm::volume::{doubling_constants, estimate_degree, growth_function, pansu_ratios, rvc_threshold};
use polyharm::{CayleyBall, GroupElement, GroupSpec};
use polyharm_cli::config::RunConfig;
use polyharm_cli::pipeline::pipeline_all;
use polyharm_cli::report::Report;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(t: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let e = t.elapsed();
    ensure(e < limit, format!("{what} took {e:?}, limit {limit:?}"))
}

fn lattice(dim: usize) -> GroupSpec {
    GroupSpec::lattice(dim).unwrap()
}

/// `|{p in Z^2 : |p_1| + |p_2| <= n}|` by direct enumeration of the square.
fn count_l1_disc(n: i64) -> u64 {
    let mut c = 0;
    for x in -n..=n {
        for y in -n..=n {
            if x.abs() + y.abs() <= n {
                c += 1;
            }
        }
    }
    c
}

fn growth_exactness() -> Check {
    let t = Instant::now();
    let spec = lattice(2);
    let s = growth_function(&spec, &spec.standard_generators(), 60).map_err(|e| e.to_string())?;
    within(t, Duration::from_secs(5), "growth to n = 60")?;
    for n in 0..=60u64 {
        let closed = 2 * n * n + 2 * n + 1;
        ensure(s.beta()[n as usize] == closed, format!("beta({n}) = {} != {closed}", s.beta()[n as usize]))?;
        ensure(count_l1_disc(n as i64) == closed, format!("enumeration at {n} disagrees"))?;
    }
    ensure(s.beta()[1] == 5 && s.beta()[2] == 13, "hand counts at n = 1, 2")?;
    Ok(format!("beta(60) = {} in {:?}", s.beta()[60], t.elapsed()))
}

fn pansu_convergence() -> Check {
    let spec = lattice(2);
    let s = growth_function(&spec, &spec.standard_generators(), 60).map_err(|e| e.to_string())?;
    let p = pansu_ratios(&s, 2).map_err(|e| e.to_string())?;
    let r50 = p.ratios[49];
    ensure((r50 - 2.0).abs() <= 0.05, format!("beta(50)/50^2 = {r50}"))?;
    ensure(p.ratios[1..].windows(2).all(|w| w[1] < w[0]), "ratios not decreasing from n = 2")?;
    Ok(format!("beta(50)/2500 = {r50:.6}"))
}

fn doubling() -> Check {
    let spec = lattice(2);
    let s = growth_function(&spec, &spec.standard_generators(), 60).map_err(|e| e.to_string())?;
    let dc = doubling_constants(&s);
    ensure(dc.len() >= 30, "need n up to 30")?;
    let four = Ratio::new(4u64, 1);
    for (i, c) in dc.iter().take(30).enumerate() {
        ensure(*c <= four, format!("beta(2n)/beta(n) = {c} at n = {}", i + 1))?;
        // Cross-check against the closed form in integers.
        let n = i as u64 + 1;
        let b = |m: u64| 2 * m * m + 2 * m + 1;
        ensure(*c == Ratio::new(b(2 * n), b(n)), format!("ratio mismatch at n = {n}"))?;
    }
    Ok(format!("max = {}", dc.iter().take(30).max().unwrap()))
}

fn rvc() -> Check {
    let spec = lattice(1);
    let s = growth_function(&spec, &spec.standard_generators(), 100).map_err(|e| e.to_string())?;
    let theta = "0.1".parse().map_err(|e: polyharm::Error| e.to_string())?;
    let r = rvc_threshold(&s, 1, &theta);
    ensure(r.r0 == Some(1), format!("R0 = {:?}", r.r0))?;
    // Independent check: (2R+1) r 10 <= 11 R (2r+1) on the whole grid.
    for big in 1..=50u64 {
        for small in 1..=big {
            ensure(
                (2 * big + 1) * small * 10 <= 11 * big * (2 * small + 1),
                format!("pair ({small}, {big}) fails"),
            )?;
        }
    }
    Ok(format!("R0 = 1 over {} pairs", r.pairs_checked))
}

fn degree_estimation() -> Check {
    let mut out = Vec::new();
    for (spec, n, window, expect) in [
        (lattice(2), 50, (10, 50), 2),
        (lattice(3), 20, (5, 20), 3),
        (GroupSpec::Heisenberg, 20, (10, 20), 4),
    ] {
        let t = Instant::now();
        let s = growth_function(&spec, &spec.standard_generators(), n).map_err(|e| e.to_string())?;
        if matches!(spec, GroupSpec::Heisenberg) {
            within(t, Duration::from_secs(60), "Heisenberg BFS to radius 20")?;
        }
        let e = estimate_degree(&s, window.0, window.1).map_err(|e| e.to_string())?;
        ensure(e.d_rounded == expect, format!("{}: d_hat = {}", spec.text(), e.d_hat))?;
        out.push(format!("{} {:.3}", spec.text(), e.d_hat));
    }
    Ok(out.join(", "))
}

fn dirichlet() -> Check {
    let t = Instant::now();
    let spec = lattice(2);
    let ball = Arc::new(
        CayleyBall::enumerate(&spec, &spec.standard_generators(), &spec.identity(), 21).map_err(|e| e.to_string())?,
    );
    let f = |g: &GroupElement| {
        let c = g.coords();
        (c[0] * c[0] - c[1] * c[1]) as f64
    };
    let sol = solve_dirichlet_with(&ball, 20, f, SolveOptions::default()).map_err(|e| e.to_string())?;
    within(t, Duration::from_secs(10), "Dirichlet solve")?;
    ensure(sol.residual <= 1e-10, format!("residual {:e}", sol.residual))?;
    let dev = (0..ball.len())
        .map(|i| (sol.field.value(i) - f(ball.vertex(i))).abs())
        .fold(0.0, f64::max);
    ensure(dev <= 1e-10, format!("deviation {dev:e}"))?;
    let sphere = ball.boundary(20).map_err(|e| e.to_string())?;
    let (lo, hi) = sphere
        .iter()
        .map(|i| f(ball.vertex(i)))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    ensure(
        sol.field.values().iter().all(|&v| lo <= v && v <= hi),
        "maximum principle violated",
    )?;
    Ok(format!("residual {:.1e}, deviation {dev:.1e}, {:?}", sol.residual, t.elapsed()))
}

fn dimension_vs_oracle() -> Check {
    let expected = [((2, 1), 3), ((2, 2), 5), ((2, 3), 7), ((3, 2), 9)];
    let cases: Vec<(usize, u32)> = (0..=3)
        .map(|d| (1, d))
        .chain((0..=3).map(|d| (2, d)))
        .chain((0..=2).map(|d| (3, d)))
        .collect();
    let mut slowest = Duration::ZERO;
    for (dim, d) in cases {
        let t = Instant::now();
        let spec = lattice(dim);
        let schedule: &[u32] = if dim == 3 { &[8, 10, 12] } else { &[8, 12, 16, 20] };
        let est = estimate_dimension(&spec, &spec.standard_generators(), d, schedule, DEFAULT_REL_TOL)
            .map_err(|e| e.to_string())?;
        let oracle = symbolic_kernel_dim(dim, d).map_err(|e| e.to_string())?;
        ensure(
            est.saturated_rank == Some(oracle),
            format!("Z^{dim}, d = {d}: ranks {:?}, oracle {oracle}", est.ranks),
        )?;
        if let Some((_, v)) = expected.iter().find(|(k, _)| *k == (dim, d)) {
            ensure(oracle == *v, format!("oracle({dim}, {d}) = {oracle}, expected {v}"))?;
        }
        ensure(
            est.rank_stable(&[1e-9, 1e-8, 1e-7, 1e-6]),
            format!("Z^{dim}, d = {d}: rank not stable"),
        )?;
        within(t, Duration::from_secs(120), &format!("case ({dim}, {d})"))?;
        slowest = slowest.max(t.elapsed());
    }
    Ok(format!("11 cases, slowest {slowest:?}"))
}

fn rank_bound_shape() -> Check {
    let spec = lattice(2);
    let mut ranks = Vec::new();
    for d in 1..=3u32 {
        let est = estimate_dimension(&spec, &spec.standard_generators(), d, &[8, 12, 16, 20], DEFAULT_REL_TOL)
            .map_err(|e| e.to_string())?;
        let r = est.saturated_rank.ok_or("not saturated")? as u32;
        ensure(r == 2 * d + 1 && r <= 3 * d, format!("d = {d}: rank {r}"))?;
        ranks.push(r);
    }
    Ok(format!("ranks {ranks:?}"))
}

fn energy() -> Check {
    let spec = lattice(2);
    let ball = Arc::new(
        CayleyBall::enumerate(&spec, &spec.standard_generators(), &spec.identity(), 40).map_err(|e| e.to_string())?,
    );
    let field = |f: &dyn Fn(f64, f64) -> f64| {
        ScalarField::from_fn(ball.clone(), |g| f(g.coords()[0] as f64, g.coords()[1] as f64)).unwrap()
    };
    let a = [field(&|_, _| 1.0), field(&|x, _| x), field(&|_, y| y)];
    let b = [field(&|x, _| 1.0 + x), field(&|x, y| x - 2.0 * y), field(&|_, y| 3.0 * y + 1.0)];
    let pa = energy_probe(&a, 20, 2.0, 1e-12).map_err(|e| e.to_string())?;
    let pb = energy_probe(&b, 20, 2.0, 1e-12).map_err(|e| e.to_string())?;
    let bound = energy_lower_bound(3, 2.0, 1, 2, 0.1);
    ensure(pa.ratio >= bound, format!("ratio {} < {bound}", pa.ratio))?;
    ensure(pa.ratio <= 3.0, format!("ratio {} > k", pa.ratio))?;
    let rel = (pa.ratio - pb.ratio).abs() / pa.ratio;
    ensure(rel <= 1e-8, format!("basis dependence {rel:e}"))?;
    Ok(format!("ratio {:.6} >= {bound:.6}, basis spread {rel:.1e}", pa.ratio))
}

fn inequality_stability() -> Check {
    let spec = lattice(2);
    let gens = spec.standard_generators();
    let rep = battery(&spec, &gens, &[2, 4, 8], &default_battery(&spec, 4), DEFAULT_SEED).map_err(|e| e.to_string())?;
    let spread = rep.poincare.spread();
    ensure(spread <= 3.0, format!("Poincaré spread {spread}"))?;

    let ball = Arc::new(CayleyBall::enumerate(&spec, &gens, &spec.identity(), 3).map_err(|e| e.to_string())?);
    let u = ScalarField::from_fn(ball.clone(), |g| g.coords()[0] as f64).map_err(|e| e.to_string())?;
    let p = ball.index_of(&GroupElement::new([1, 0])).unwrap();
    let c = mean_value_constant(&u, p, 1, 1e-12).map_err(|e| e.to_string())?;
    // By hand: B_p(1) = {(1,0), (0,0), (2,0), (1,1), (1,-1)}, u² sums to 7.
    let squares: [i64; 5] = [1, 0, 4, 1, 1];
    let hand = Ratio::new(5, squares.iter().sum());
    ensure(hand == Ratio::new(5, 7), "hand value")?;
    ensure(c == Some(5.0 / 7.0), format!("mean value constant {c:?}"))?;

    let v = ScalarField::from_fn(ball, |g| g.coords()[0] as f64 + 10.0).map_err(|e| e.to_string())?;
    let h = harnack_ratio(&v, 1).map_err(|e| e.to_string())?;
    ensure(h == 11.0 / 9.0, format!("Harnack ratio {h}"))?;
    Ok(format!("Poincaré spread {spread:.3}, C = 5/7, Harnack = 11/9"))
}

fn rough_suite() -> Check {
    let t = Instant::now();
    let x = make_subdivided_lattice(2, 15).map_err(|e| e.to_string())?;
    let phi = RoughIsometry::subdivision(&x);
    let ctx = RoughContext::new(&phi).map_err(|e| e.to_string())?;
    let check = ctx.check().map_err(|e| e.to_string())?;
    ensure(check.passed(), format!("(2, 1) check: {check:?}"))?;
    let inj = injectivize(&phi, x.degree_bound()).map_err(|e| e.to_string())?;
    ensure(inj.q == 4u64.pow(2 + 1), format!("q = {}", inj.q))?;
    ensure(inj.is_injective() && inj.projects_to(&phi), "injectivized map")?;

    let mvl = run_mvl_suite(&MvlSuiteConfig::default()).map_err(|e| e.to_string())?;
    ensure(mvl.linearity.fields == 20 && mvl.linearity.exact, "E not exactly linear")?;
    ensure(mvl.linearity.injective, "E not injective on the direct branch")?;
    ensure(mvl.config.fields == 20 && mvl.config.radii == vec![10, 20, 40], "suite configuration")?;
    ensure(mvl.ratio <= 10.0, format!("mean-value ratio {}", mvl.ratio))?;
    ensure(mvl.sup_norm_ok, "sup norm grew")?;

    let wx = make_subdivided_lattice(2, 20).map_err(|e| e.to_string())?;
    let wphi = RoughIsometry::subdivision(&wx);
    let wctx = RoughContext::new(&wphi).map_err(|e| e.to_string())?;
    let inv = wctx.rough_inverse().map_err(|e| e.to_string())?;
    let radii: Vec<u32> = (12..=2 * wx.window).collect();
    let rows = wctx.volume_sandwich(&inv, 0, &radii, 0.25).map_err(|e| e.to_string())?;
    ensure(rows.iter().all(|r| r.holds && r.inclusion), "volume sandwich")?;
    within(t, Duration::from_secs(300), "rough suite")?;
    Ok(format!(
        "q = {}, MVL ratio {:.3}, sandwich on R in [12, {}], {:?}",
        inj.q,
        mvl.ratio,
        2 * wx.window,
        t.elapsed()
    ))
}

fn determinism() -> Check {
    let res = RunConfig::default().resolve().map_err(|e| e.to_string())?;
    let a = pipeline_all(&res);
    let b = pipeline_all(&res);
    let ra = Report::new("all", &res.config, &a.outcome, a.timings);
    let rb = Report::new("all", &res.config, &b.outcome, b.timings);
    ensure(ra.config_hash == rb.config_hash, "config hash")?;
    ensure(ra.determinism_hash == rb.determinism_hash, "determinism hash differs")?;
    let strip = |r: &Report| {
        let mut v = serde_json::to_value(r).unwrap();
        v.as_object_mut().unwrap().remove("timings");
        serde_json::to_string(&v).unwrap()
    };
    ensure(strip(&ra) == strip(&rb), "reports differ outside timings")?;
    ensure(ra.compute_hash() == ra.determinism_hash, "hash does not match content")?;
    Ok(format!("hash {}", &ra.determinism_hash[..16]))
}

#[test]
fn acceptance() {
    type Criterion = (&'static str, fn() -> Check);
    let criteria: [Criterion; 12] = [
        ("growth exactness", growth_exactness),
        ("Pansu convergence", pansu_convergence),
        ("volume doubling", doubling),
        ("RVC threshold", rvc),
        ("degree estimation", degree_estimation),
        ("Dirichlet solver", dirichlet),
        ("dimension vs oracle", dimension_vs_oracle),
        ("rank shape 2d+1 <= 3d", rank_bound_shape),
        ("energy probe", energy),
        ("inequality stability", inequality_stability),
        ("rough suite", rough_suite),
        ("determinism", determinism),
    ];
    let mut failures = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                println!("FAIL {:>2} {name}: {why}", i + 1);
                failures.push(format!("{} {name}", i + 1));
            }
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
