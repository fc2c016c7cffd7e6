mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;
use tamp_core::bt::Outcome;
use tamp_core::dmp::load_demo_file;
use tamp_core::opt::lenient_f64;
use tamp_core::opt::table2::{self, table2_cases};
use tamp_core::opt::{optimize, Status};
use tamp_core::sim::{evaluate, execute, learn_skill, plan_task, LearnConfig, Scenario, SkillBundle, TaskPlan};
use tamp_core::stl::{breakdown, parse_with, robustness, ParseOptions, SignalTrace, TimeUnit};
use tamp_core::task::abstract_to_ltl;

use config::Overrides;

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "tamp", version, about = "Learn skills, plan under STL constraints, execute and evaluate tasks")]
struct Cli {
    /// TOML overrides (seed, max_ticks, [optimizer], [learn]).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the scenario seed (GMM initialisation).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Learn skill bundles, from a scenario's skill table or from demo files.
    Learn {
        #[arg(long, conflicts_with_all = ["skill", "demos"])]
        scenario: Option<PathBuf>,
        #[arg(long, requires = "demos")]
        skill: Option<String>,
        demos: Vec<PathBuf>,
    },
    /// Compile the task and optimize every action's motion.
    Plan { scenario: PathBuf },
    /// Execute the planned task and evaluate the log.
    Run {
        scenario: PathBuf,
        /// Re-plan even if a plan for this scenario exists in the output directory.
        #[arg(long)]
        fresh: bool,
    },
    /// Robustness of an STL formula on a trace CSV.
    Eval {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        formula: String,
        #[arg(long, default_value_t = 0)]
        t0: usize,
        /// Interval bounds are in seconds rather than samples.
        #[arg(long)]
        seconds: bool,
    },
    /// Write artifacts for offline plotting and checking.
    Export {
        #[command(subcommand)]
        what: Export,
    },
}

#[derive(Subcommand)]
enum Export {
    /// The four benchmark constraint cases: demo, learned and optimized paths.
    Table2 {
        /// Only this case (via-point, obstacle, space-limit, velocity-limit).
        #[arg(long)]
        case: Option<String>,
    },
    /// The compiled behaviour tree and LTL chain of a scenario's task.
    Blueprint { scenario: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: &Cli) -> Result<ExitCode> {
    let mut ov = Overrides::load(cli.config.as_deref())?;
    if cli.seed.is_some() {
        ov.seed = cli.seed;
    }
    let out = &cli.out_dir;
    match &cli.cmd {
        Cmd::Learn { scenario: Some(path), .. } => {
            let sc = load_scenario(path, &ov)?;
            let skills = sc.learn_skills()?;
            write_skills(out, &skills)?;
        }
        Cmd::Learn { scenario: None, skill, demos } => {
            let skill = skill.as_deref().context("either --scenario or --skill with demo files is required")?;
            if demos.is_empty() {
                bail!("no demonstration files given");
            }
            let demos = demos
                .iter()
                .map(|p| load_demo_file(p).with_context(|| format!("{}", p.display())))
                .collect::<Result<Vec<_>>>()?;
            let mut cfg = ov.learn(&LearnConfig::default())?;
            cfg.gmm.seed = ov.seed.unwrap_or(0);
            let b = learn_skill(skill, &demos, &cfg)?;
            write_skills(out, &BTreeMap::from([(skill.to_owned(), b)]))?;
        }
        Cmd::Plan { scenario } => {
            let sc = load_scenario(scenario, &ov)?;
            let plan = plan(&sc, out)?;
            let failed = plan.actions.iter().filter(|a| a.status == Status::Failed).count();
            if failed > 0 {
                bail!("{failed} action(s) could not be planned");
            }
        }
        Cmd::Run { scenario, fresh } => {
            let sc = load_scenario(scenario, &ov)?;
            return run(&sc, out, *fresh);
        }
        Cmd::Eval { trace, formula, t0, seconds } => {
            let report = eval(trace, formula, *t0, *seconds)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Cmd::Export { what: Export::Table2 { case } } => export_table2(out, case.as_deref(), &ov)?,
        Cmd::Export { what: Export::Blueprint { scenario } } => {
            let sc = load_scenario(scenario, &ov)?;
            write_blueprint(out, &sc)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn load_scenario(path: &Path, ov: &Overrides) -> Result<Scenario> {
    let mut sc = Scenario::load(path).with_context(|| format!("loading {}", path.display()))?;
    ov.apply(&mut sc.spec)?;
    Ok(sc)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn create(path: &Path) -> Result<fs::File> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    info!("wrote {}", path.display());
    fs::File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn write_skills(out: &Path, skills: &BTreeMap<String, SkillBundle>) -> Result<()> {
    for (id, b) in skills {
        write_json(&out.join("skills").join(format!("{id}.json")), b)?;
    }
    Ok(())
}

/// Bundles from `out/skills` where present, learned (and written) otherwise.
fn skills(sc: &Scenario, out: &Path) -> Result<BTreeMap<String, SkillBundle>> {
    let mut found = BTreeMap::new();
    let mut missing = false;
    for id in sc.spec.skills.keys() {
        let p = out.join("skills").join(format!("{id}.json"));
        if p.is_file() {
            let b = SkillBundle::from_json(&fs::read_to_string(&p)?).with_context(|| format!("{}", p.display()))?;
            found.insert(id.clone(), b);
        } else {
            missing = true;
        }
    }
    if !missing {
        info!("using skill bundles from {}", out.join("skills").display());
        return Ok(found);
    }
    let learned = sc.learn_skills()?;
    write_skills(out, &learned)?;
    Ok(learned)
}

fn write_blueprint(out: &Path, sc: &Scenario) -> Result<()> {
    let ltl = abstract_to_ltl(&sc.task);
    write_json(&out.join("blueprint.json"), &sc.blueprint)?;
    fs::write(out.join("ltl.txt"), format!("{}\n{}\n", ltl.outline(), ltl.render()))?;
    Ok(())
}

fn plan(sc: &Scenario, out: &Path) -> Result<TaskPlan> {
    write_blueprint(out, sc)?;
    let skills = skills(sc, out)?;
    let plan = plan_task(sc, &skills)?;
    for a in &plan.actions {
        match a.status {
            Status::Satisfied => info!("{}: satisfied, robustness {:.4}", a.name, a.robustness),
            s => warn!("{}: {s:?}, robustness {:.4} under `{}`", a.name, a.robustness, a.constraint),
        }
    }
    write_json(&out.join("plan.json"), &plan)?;
    Ok(plan)
}

fn run(sc: &Scenario, out: &Path, fresh: bool) -> Result<ExitCode> {
    let plan_path = out.join("plan.json");
    let existing = match fresh || !plan_path.is_file() {
        true => None,
        false => {
            let text = fs::read_to_string(&plan_path)?;
            let v: serde_json::Value = serde_json::from_str(&text)?;
            tamp_core::sim::check_schema(&v, SCHEMA_VERSION)?;
            let p: TaskPlan = serde_json::from_value(v)?;
            (p.scenario == sc.spec.name).then_some(p)
        }
    };
    let plan = match existing {
        Some(p) => {
            info!("using plan {}", plan_path.display());
            write_blueprint(out, sc)?;
            p
        }
        None => self::plan(sc, out)?,
    };
    let skills = skills(sc, out)?;
    let log = execute(sc, &skills, Some(&plan))?;
    log.write_csv(create(&out.join("execution.csv"))?)?;
    let mut tr = log.trace()?;
    tr.derive_velocity("y", "vel")?;
    tr.write_csv(create(&out.join("trace.csv"))?)?;
    write_json(&out.join("events.json"), &log.events)?;
    let ev = evaluate(&log, sc)?;
    write_json(&out.join("evaluation.json"), &ev)?;
    let summary = log.summary();
    write_json(&out.join("summary.json"), &summary)?;
    println!(
        "{}: {:?} after {} ticks, epsilon {:?}, robustness {:.4} ({})",
        sc.spec.name,
        log.outcome,
        summary.ticks,
        summary.epsilon_sequence,
        ev.robustness,
        if ev.satisfied { "satisfied" } else { "violated" }
    );
    Ok(match log.outcome {
        Outcome::Success => ExitCode::SUCCESS,
        Outcome::Fault(_) => ExitCode::FAILURE,
        _ => ExitCode::from(2),
    })
}

#[derive(Serialize)]
struct EvalReport {
    schema_version: u32,
    formula: String,
    t0: usize,
    #[serde(with = "lenient_f64")]
    robustness: f64,
    satisfied: bool,
    subformulas: Vec<SubReport>,
}

#[derive(Serialize)]
struct SubReport {
    formula: String,
    #[serde(with = "lenient_f64")]
    robustness: f64,
}

fn eval(trace: &Path, formula: &str, t0: usize, seconds: bool) -> Result<EvalReport> {
    let mut tr = SignalTrace::read_csv(fs::File::open(trace).with_context(|| format!("{}", trace.display()))?)?;
    // velocities are derived on demand so position-only traces can be checked
    for (pos, vel) in [("y", "vel"), ("q", "qvel")] {
        if tr.channel(&format!("{vel}.x")).is_none() && tr.vector(pos).is_some() {
            tr.derive_velocity(pos, vel)?;
        }
    }
    let time_unit = if seconds { TimeUnit::Seconds { dt: tr.dt() } } else { TimeUnit::Samples };
    let f = parse_with(formula, ParseOptions { time_unit })?;
    let rho = robustness(&f, &tr, t0)?;
    let subformulas =
        breakdown(&f, &tr, t0)?.into_iter().map(|(formula, robustness)| SubReport { formula, robustness }).collect();
    Ok(EvalReport { schema_version: SCHEMA_VERSION, formula: f.to_string(), t0, robustness: rho, satisfied: rho >= 0.0, subformulas })
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Geometry {
    ViaPoint { center: [f64; 3], radius: f64 },
    Obstacle { center: [f64; 3], radius: f64 },
    Band { channel: String, lower: f64, upper: f64, window: [usize; 2] },
    VelocityLimit { channel: String, upper: f64, window: [usize; 2] },
}

#[derive(Serialize)]
struct CaseMeta {
    schema_version: u32,
    name: String,
    constraint: String,
    dt: f64,
    geometry: Geometry,
    status: Status,
    #[serde(with = "lenient_f64")]
    robustness_learned: f64,
    #[serde(with = "lenient_f64")]
    robustness_optimized: f64,
}

fn geometry(name: &str) -> Geometry {
    match name {
        "via-point" => Geometry::ViaPoint { center: table2::VIA_POINT, radius: 0.01 },
        "obstacle" => Geometry::Obstacle { center: table2::OBSTACLE_CENTER, radius: table2::OBSTACLE_RADIUS },
        "space-limit" => Geometry::Band { channel: "y.y".into(), lower: -4.0, upper: 2.0, window: [90, 150] },
        _ => Geometry::VelocityLimit { channel: "vel.z".into(), upper: 0.005, window: [30, 120] },
    }
}

fn export_table2(out: &Path, only: Option<&str>, ov: &Overrides) -> Result<()> {
    let mut cases = table2_cases()?;
    if let Some(name) = only {
        cases.retain(|c| c.name == name);
        if cases.is_empty() {
            bail!("unknown case `{name}` (via-point, obstacle, space-limit, velocity-limit)");
        }
    }
    for mut case in cases {
        let dir = out.join("table2").join(case.name);
        case.problem.config = ov.optimizer(&case.problem.config)?;
        let p = &case.problem;
        let dt = p.model.params.dt;
        let mut demo = SignalTrace::new(dt, case.demo.len())?;
        for (d, axis) in ["x", "y", "z"].iter().enumerate() {
            demo.insert(format!("y.{axis}"), case.demo.iter().map(|r| r[d]).collect())?;
        }
        demo.derive_velocity("y", "vel")?;
        demo.write_csv(create(&dir.join("demo.csv"))?)?;
        let learned = p.model.rollout_with(&p.f_lrn, p.y_init, p.y_goal)?;
        learned.write_csv(create(&dir.join("learned.csv"))?)?;
        let r = optimize(p)?;
        r.trace.write_csv(create(&dir.join("optimized.csv"))?)?;
        let report = r.report(p);
        write_json(&dir.join("report.json"), &report)?;
        let meta = CaseMeta {
            schema_version: SCHEMA_VERSION,
            name: case.name.to_owned(),
            constraint: p.constraint.to_string(),
            dt,
            geometry: geometry(case.name),
            status: r.status,
            robustness_learned: robustness(&p.constraint, &learned, 0)?,
            robustness_optimized: r.robustness_exact,
        };
        write_json(&dir.join("case.json"), &meta)?;
        if r.status != Status::Satisfied {
            warn!("{}: {:?}, robustness {:.4}", case.name, r.status, r.robustness_exact);
        }
    }
    Ok(())
}
