//! Subcommand implementations.

use std::time::Instant;

use anyhow::{bail, Context, Result};
use num_rational::BigRational;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use trifree::defect::DefectSampler;
use trifree::glauber_low::LowSampler;
use trifree::oracle::Oracle;
use trifree::pipeline::{count_high, count_low, sample_high, ImbalanceTable};
use trifree::rng::Streams;
use trifree::scalar::rational_from_str;
use trifree::{Partition, Side};

use crate::config::*;
use crate::emit::Emitter;
use crate::experiments::*;
use crate::selftest;

/// Runs one subcommand. Returns false when a selftest criterion failed.
pub fn execute(cmd: &Command) -> Result<bool> {
    let common = cmd.common();
    if let Some(t) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let start = Instant::now();
    let streams = Streams::new(common.seed);
    let mut out = Emitter::create(&common.out_dir())?;
    let (results, ok) = match cmd {
        Command::SampleLow(a) => (sample_low(a, &streams, &mut out)?, true),
        Command::SampleHigh(a) => (sample_high_cmd(a, &streams, &mut out)?, true),
        Command::SampleDefects(a) => (sample_defects(a, &streams, &mut out)?, true),
        Command::Count(a) => (count(a, &streams)?, true),
        Command::MixTime(a) => (mix_time(a, &streams, &mut out)?, true),
        Command::SlowMix(a) => (slow_mix(a, &streams, &mut out)?, true),
        Command::Oracle(a) => (oracle(a, &mut out)?, true),
        Command::Selftest(a) => selftest_cmd(a)?,
    };
    out.timing(start.elapsed().as_secs_f64())?;
    let path = out.manifest(cmd.name(), common.seed, cmd, &results)?;
    eprintln!("wrote {}", path.display());
    Ok(ok)
}

#[derive(Serialize)]
struct LowRow {
    index: usize,
    edges: usize,
    max_degree: usize,
    triangle_free: bool,
}

fn sample_low(a: &SampleLowArgs, streams: &Streams, out: &mut Emitter) -> Result<Value> {
    let cfg = a.constants.low(a.n, a.density.p()?);
    let sampler = LowSampler::new(cfg)?;
    let graphs: Vec<_> = (0..a.samples)
        .into_par_iter()
        .map(|i| sampler.sample(a.eps, &mut streams.rng("sample-low", i as u64, "chain")))
        .collect();
    let mut rows = Vec::new();
    for (i, g) in graphs.iter().enumerate() {
        out.graph(&format!("graphs/sample_{i:05}.txt"), g)?;
        rows.push(LowRow {
            index: i,
            edges: g.edge_count(),
            max_degree: g.max_degree(),
            triangle_free: g.is_triangle_free(),
        });
    }
    out.csv("samples.csv", &rows)?;
    let mean = rows.iter().map(|r| r.edges as f64).sum::<f64>() / rows.len().max(1) as f64;
    Ok(json!({
        "steps_per_sample": cfg.burn_in_steps(a.eps),
        "in_regime": cfg.in_regime(),
        "samples": a.samples,
        "mean_edges": mean,
    }))
}

#[derive(Serialize)]
struct HighRow {
    index: usize,
    imbalance: i64,
    a: String,
    defect_edges: usize,
    crossing_edges: usize,
    cut_fraction: f64,
    expander: bool,
}

fn sample_high_cmd(a: &SampleHighArgs, streams: &Streams, out: &mut Emitter) -> Result<Value> {
    let lambda = a.density.lambda()?;
    let cfg = a.constants.pipeline(a.n, lambda);
    let table = ImbalanceTable::build(&cfg, a.eps, a.delta, &mut streams.rng("sample-high", 0, "table"))?;
    let records: Vec<_> = (0..a.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.rng("sample-high", i as u64, "sample");
            let s = sample_high(&cfg, &table, a.eps, &mut rng)?;
            let mut rng = streams.rng("sample-high", i as u64, "expander");
            let e = expander_report(&s.graph, &s.partition, lambda, a.expander_pairs, &mut rng);
            Ok((s, e))
        })
        .collect::<trifree::Result<_>>()?;
    let mut rows = Vec::new();
    for (i, (s, e)) in records.iter().enumerate() {
        out.graph(&format!("graphs/sample_{i:05}.txt"), &s.graph)?;
        let members: Vec<String> = s.partition.members(Side::A).iter().map(|v| v.to_string()).collect();
        rows.push(HighRow {
            index: i,
            imbalance: s.imbalance,
            a: members.join(" "),
            defect_edges: s.diagnostics.defect_edges,
            crossing_edges: s.diagnostics.crossing_edges,
            cut_fraction: alignment(&s.graph, &s.partition),
            expander: e.is_expander(),
        });
    }
    out.csv("samples.csv", &rows)?;
    let expanders: Vec<&ExpanderReport> = records.iter().map(|(_, e)| e).collect();
    out.json("expander.json", &expanders)?;
    Ok(json!({
        "cap": cfg.defect.cap(),
        "in_regime": cfg.defect.in_regime(),
        "table": table,
        "samples": a.samples,
        "mean_cut_fraction": rows.iter().map(|r| r.cut_fraction).sum::<f64>() / rows.len().max(1) as f64,
        "expanders": rows.iter().filter(|r| r.expander).count(),
    }))
}

#[derive(Serialize)]
struct DefectRow {
    index: usize,
    size: usize,
    max_degree: usize,
    in_omega: bool,
    edges: String,
}

fn sample_defects(a: &SampleDefectsArgs, streams: &Streams, out: &mut Emitter) -> Result<Value> {
    let lambda = a.density.lambda()?;
    let cfg = a.constants.high(a.n, lambda);
    let part = Partition::canonical(a.n, a.size_a.unwrap_or(a.n.div_ceil(2)));
    let sampler = DefectSampler::for_accuracy(part, cfg, a.eps)?;
    let states: Vec<_> = (0..a.samples)
        .into_par_iter()
        .map(|i| sampler.sample(a.eps, &mut streams.rng("sample-defects", i as u64, "chain")))
        .collect::<trifree::Result<_>>()?;
    let rows: Vec<DefectRow> = states
        .iter()
        .enumerate()
        .map(|(i, s)| DefectRow {
            index: i,
            size: s.size(),
            max_degree: s.max_degree(),
            in_omega: s.omega(lambda).member,
            edges: s.defects().edges().map(|e| format!("{}-{}", e.i(), e.j())).collect::<Vec<_>>().join(" "),
        })
        .collect();
    out.csv("defects.csv", &rows)?;
    Ok(json!({
        "cap": sampler.cap(),
        "steps_per_sample": if sampler.cap() == 0 { 0 } else { cfg.burn_in_steps(a.eps) },
        "samples": a.samples,
        "mean_size": rows.iter().map(|r| r.size as f64).sum::<f64>() / rows.len().max(1) as f64,
    }))
}

fn count(a: &CountArgs, streams: &Streams) -> Result<Value> {
    let mut rng = streams.rng("count", 0, "estimate");
    match a.regime {
        Regime::Low => {
            let cfg = a.constants.low(a.n, a.density.p()?);
            let est = count_low(&cfg, a.eps, a.delta, &mut rng)?;
            Ok(json!({
                "regime": a.regime,
                "estimate_log": est.log_value,
                "eps": est.eps,
                "success_prob": 1.0 - est.delta,
                "per_k": [],
                "seed": a.common.seed,
            }))
        }
        Regime::High => {
            let cfg = a.constants.pipeline(a.n, a.density.lambda()?);
            let c = count_high(&cfg, a.eps, a.delta, &mut rng)?;
            Ok(json!({
                "regime": a.regime,
                "estimate_log": c.log_mu.log_value,
                "estimate_log_weak_normalizer": c.log_z_weak.log_value,
                "eps": c.log_mu.eps,
                "success_prob": 1.0 - c.log_mu.delta,
                "per_k": c.table.entries,
                "seed": a.common.seed,
            }))
        }
    }
}

fn mix_time(a: &MixTimeArgs, streams: &Streams, out: &mut Emitter) -> Result<Value> {
    let cfg = a.constants.low(a.n, a.density.p()?);
    let grid = if a.grid.is_empty() { default_grid(&cfg) } else { a.grid.clone() };
    let report = run_mixing_experiment(&cfg, &grid, a.samples, a.max_steps, streams)?;
    match &report {
        MixingReport::Oracle { points } => out.csv("mixing.csv", points)?,
        MixingReport::Coupling { times, .. } => {
            #[derive(Serialize)]
            struct Row {
                pair: usize,
                steps: Option<u64>,
            }
            let rows: Vec<Row> = times.iter().enumerate().map(|(pair, &steps)| Row { pair, steps }).collect();
            out.csv("coupling.csv", &rows)?;
        }
    }
    let mut results = json!({ "report": report });
    if a.contraction_trials > 0 {
        let cs: Vec<f64> = (1..=7).map(|i| i as f64 / 10.0).collect();
        let rows = run_contraction_sweep(&cfg, &cs, a.contraction_trials, streams)?;
        out.csv("contraction.csv", &rows)?;
        results["contraction"] = serde_json::to_value(&rows)?;
    }
    if let MixingReport::Oracle { .. } = report {
        // the points are in mixing.csv
        results["report"] = json!({ "mode": "oracle", "points": grid.len() });
    }
    Ok(results)
}

#[derive(Serialize)]
struct TraceRow {
    step: u64,
    cut_size: usize,
    edges: usize,
    alignment: f64,
}

fn trace_rows(t: &BottleneckTrace) -> Vec<TraceRow> {
    (0..t.alignment.len())
        .map(|i| TraceRow {
            step: i as u64 * t.interval,
            cut_size: t.cut_size[i],
            edges: t.edges[i],
            alignment: t.alignment[i],
        })
        .collect()
}

fn slow_mix(a: &SlowMixArgs, streams: &Streams, out: &mut Emitter) -> Result<Value> {
    let mut params = SlowMixParams::new(a.n);
    if let Some(l) = a.lambda {
        params.lambda = l;
    }
    if let Some(p) = a.control_p {
        params.control_p = p;
    }
    params.steps = a.steps;
    params.runs = a.runs;
    params.interval = a.interval;
    params.control_steps = a.control_steps;
    params.control_interval = a.control_interval;
    params.empty_start = a.empty_start;
    params.expander_pairs = a.expander_pairs;
    let pipeline = a.constants.pipeline(a.n, params.lambda);
    let rep = run_slow_mix_demo(&params, &pipeline, streams)?;
    for (r, t) in rep.demo.iter().enumerate() {
        out.csv(&format!("trace_run{r:02}.csv"), &trace_rows(t))?;
    }
    out.csv("control_trace.csv", &trace_rows(&rep.control.trace))?;
    #[derive(Serialize)]
    struct AcfRow {
        lag_steps: u64,
        autocorrelation: f64,
    }
    let acf: Vec<AcfRow> = rep
        .control
        .autocorrelation
        .iter()
        .enumerate()
        .map(|(k, &a)| AcfRow {
            lag_steps: k as u64 * rep.control.trace.interval,
            autocorrelation: a,
        })
        .collect();
    out.csv("control_acf.csv", &acf)?;
    out.json("expander.json", &rep.expander)?;
    Ok(json!({
        "params": params,
        "partitions": rep.partitions,
        "alignment_minima": rep.demo.iter().map(|t| t.alignment_min).collect::<Vec<_>>(),
        "flips": rep.demo.iter().map(|t| &t.flips).collect::<Vec<_>>(),
        "aligned_runs": rep.runs_aligned(selftest::ALIGNMENT_THRESHOLD),
        "control_decorrelation_steps": rep.control.decorrelation_steps,
        "start_expanders": rep.expander.iter().filter(|e| e.is_expander()).count(),
    }))
}

fn rational_arg(name: &str, v: &Option<String>) -> Result<Option<BigRational>> {
    v.as_ref()
        .map(|s| rational_from_str(s).with_context(|| format!("--{name} {s:?} is not a number")))
        .transpose()
}

fn oracle(a: &OracleArgs, out: &mut Emitter) -> Result<Value> {
    let oracle = Oracle::default();
    let p = rational_arg("p", &a.p)?;
    let lambda = rational_arg("lambda", &a.lambda)?;
    let one = BigRational::from_integer(1.into());
    let lambda = match (lambda, &p) {
        (Some(l), _) => Some(l),
        (None, Some(p)) if *p < one => Some(p / (&one - p)),
        (None, Some(_)) => bail!("p must be below 1"),
        (None, None) => None,
    };
    let f = |q: &BigRational| num_traits_f64(q);
    match a.quantity {
        Quantity::Z => {
            let poly = oracle.triangle_free_polynomial(a.n)?;
            Ok(json!({ "coefficients": poly.coeffs(), "count": poly.value_at_one() }))
        }
        Quantity::Mu => {
            let p = match (p, &lambda) {
                (Some(p), _) => p,
                (None, Some(l)) => l / (&one + l),
                (None, None) => bail!("--p or --lambda is required"),
            };
            let mu = oracle.exact_mu(a.n, &p)?;
            Ok(json!({ "p": p.to_string(), "mu": mu.to_string(), "mu_f64": f(&mu) }))
        }
        Quantity::Nu => {
            let lambda = lambda.context("--p or --lambda is required")?;
            let part = Partition::canonical(a.n, a.size_a.unwrap_or(a.n.div_ceil(2)));
            let (dist, z) = oracle.exact_nu(&part, &lambda, a.cap)?;
            let file = out.dir().join("nu.csv");
            dist.to_f64()
                .write_csv(std::fs::File::create(&file).with_context(|| format!("creating {}", file.display()))?)?;
            Ok(json!({
                "lambda": lambda.to_string(),
                "sizes": part.sizes(),
                "cap": a.cap,
                "normalizer": z.to_string(),
                "normalizer_f64": f(&z),
                "states": dist.support_len(),
                "distribution": "nu.csv",
            }))
        }
        Quantity::Weak => {
            let poly = oracle.exact_weak_normalizer(a.n, a.cap, a.max_imbalance)?;
            let value = lambda.as_ref().map(|l| poly.eval(l));
            Ok(json!({
                "coefficients": poly.coeffs(),
                "cap": a.cap,
                "max_imbalance": a.max_imbalance,
                "value": value.as_ref().map(|v| v.to_string()),
                "value_f64": value.as_ref().map(f),
            }))
        }
    }
}

fn num_traits_f64(q: &BigRational) -> f64 {
    use trifree::Scalar;
    q.to_f64_lossy()
}

fn selftest_cmd(a: &SelftestArgs) -> Result<(Value, bool)> {
    let ids: Vec<u32> = if a.only.is_empty() { selftest::ALL.to_vec() } else { a.only.clone() };
    let mut outcomes = Vec::new();
    for id in ids {
        let o = selftest::run_criterion(id, a.scale, a.common.seed)?;
        println!("{}", o.line());
        outcomes.push(o);
    }
    let ok = outcomes.iter().all(|o| o.pass);
    Ok((json!({ "scale": a.scale, "outcomes": outcomes }), ok))
}
