//! `all`: growth, rvc, dim, inequalities and (optionally) the rough suite,
//! run in sequence. A failing stage is recorded and the others still run.

use std::collections::BTreeMap;
use std::time::Instant;

use anyhow::Result;
use polyharm::cache;
use polyharm::dimension::NO_ORACLE;
use serde_json::{json, Map, Value};

use crate::commands;
use crate::config::Resolved;
use crate::report::Outcome;

pub struct PipelineRun {
    pub outcome: Outcome,
    pub timings: BTreeMap<String, f64>,
}

fn stage(
    name: &str,
    f: impl FnOnce() -> Result<Outcome>,
    stages: &mut Map<String, Value>,
    errors: &mut Map<String, Value>,
    failed: &mut Vec<String>,
    timings: &mut BTreeMap<String, f64>,
) {
    let t = Instant::now();
    match f() {
        Ok(o) => {
            if !o.passed {
                failed.push(name.to_string());
            }
            stages.insert(name.into(), json!({ "passed": o.passed, "payload": o.payload }));
        }
        Err(e) => {
            errors.insert(name.into(), Value::String(format!("{e:#}")));
        }
    }
    timings.insert(name.into(), t.elapsed().as_secs_f64());
}

pub fn pipeline_all(res: &Resolved) -> PipelineRun {
    let mut stages = Map::new();
    let mut errors = Map::new();
    let mut failed = Vec::new();
    let mut timings = BTreeMap::new();

    stage(
        "growth",
        || {
            let mut o = commands::growth(res)?;
            if let Some(dir) = &res.config.cache_dir {
                // Also cache the ball used by the solver-based stages.
                let ball = polyharm::CayleyBall::enumerate(
                    &res.spec,
                    &res.generators,
                    &res.spec.identity(),
                    res.config.radius,
                )?;
                let path = cache::store(&ball, dir)?;
                o.payload["cached_ball"] = json!(path.file_name().map(|p| p.to_string_lossy().to_string()));
            }
            Ok(o)
        },
        &mut stages,
        &mut errors,
        &mut failed,
        &mut timings,
    );
    stage("rvc", || commands::rvc(res), &mut stages, &mut errors, &mut failed, &mut timings);
    stage(
        "dim",
        || {
            let mut o = commands::dim(res)?;
            let label = o.payload["oracle_label"].clone();
            o.payload["label"] = if o.payload["oracle"].is_null() { json!(NO_ORACLE) } else { label };
            Ok(o)
        },
        &mut stages,
        &mut errors,
        &mut failed,
        &mut timings,
    );
    stage(
        "inequalities",
        || {
            let p = commands::poincare(res)?;
            let m = commands::meanvalue(res)?;
            Ok(Outcome {
                payload: json!({ "poincare": p.payload, "mean_value": m.payload }),
                passed: p.passed && m.passed,
                ..Outcome::default()
            })
        },
        &mut stages,
        &mut errors,
        &mut failed,
        &mut timings,
    );
    if res.rough_enabled() {
        stage(
            "rough",
            || {
                let check = commands::rough_check(res)?;
                let mut payload = json!({ "check": check.payload });
                let mut passed = check.passed;
                if res.config.rough.mvl {
                    let m = commands::rough_mvl(res)?;
                    passed &= m.passed;
                    payload["mvl"] = m.payload;
                }
                Ok(Outcome {
                    payload,
                    passed,
                    ..Outcome::default()
                })
            },
            &mut stages,
            &mut errors,
            &mut failed,
            &mut timings,
        );
    }
    let passed = errors.is_empty() && failed.is_empty();
    PipelineRun {
        outcome: Outcome {
            payload: json!({
                "stages": stages,
                "errors": errors,
                "failed_checks": failed,
            }),
            csv: None,
            text: None,
            passed,
        },
        timings,
    }
}
