use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_traits::{Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use drseu_core::acts::{Act, Labels, Lottery, Menu, SeuPair};
use drseu_core::axioms::{check_cib, check_nuc, run_axiom, AxiomId, ProbeBattery, Status, Verdict, Witness};
use drseu_core::comparative::{blackwell_compare, compare_bias, invert_bias, test_function, StepCdf};
use drseu_core::dynamic::{simulate_paths, DynamicModel, DynamicOracle, History, ModelClass};
use drseu_core::fixtures;
use drseu_core::history_axioms::{run_history_axiom, HistoryAxiom, HistoryBattery};
use drseu_core::identify::{models_equivalent, recover_kernels, recover_static, revealed_support, static_equivalent};
use drseu_core::io::{self, AnyModel, BatteryFile, Dataset, DirectionFile, Report, ReportValue, UniverseFile};
use drseu_core::preferences::{
    act_lattice, check_bellman, check_martingale, check_strong_dominance, check_weak_dominance, dlr_value, identify_delta, learns_faster,
    strong_dominance_instances, DeltaSearch, DlrMeasure, MartingaleScale,
};
use drseu_core::rational::{fmt_q, parse_q, q, Q};
use drseu_core::static_model::{hoeffding_bound, scf_bar, simulate, ChoiceOracle, RseuModel};
use drseu_core::{Error, Result};

#[derive(Parser)]
#[command(name = "drseu", version, about = "Random subjective expected utility: simulate, check, identify and compare")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args, Clone, Default)]
struct Sources {
    /// Model document (.toml or .json); repeat for two-agent comparisons
    #[arg(long)]
    model: Vec<PathBuf>,
    /// Count dataset (.csv with a .json sidecar); repeat for two-agent comparisons
    #[arg(long)]
    dataset: Vec<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Exact choice probabilities on a battery, and sampled counts with --n
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        battery: Option<PathBuf>,
        /// Sample size per menu; the counts go to --out as a dataset
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run axiom and representation checks on a model or dataset
    Check {
        #[command(flatten)]
        src: Sources,
        #[arg(long)]
        universe: Option<PathBuf>,
        #[arg(long)]
        battery: Option<PathBuf>,
        /// Comma-separated check ids, e.g. MONO,LIN,EXT
        #[arg(long)]
        axioms: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "1e-9")]
        tolerance: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover a representation over a candidate universe
    Identify {
        #[command(flatten)]
        src: Sources,
        #[arg(long)]
        universe: PathBuf,
        /// Where to write the recovered model document
        #[arg(long)]
        out: PathBuf,
    },
    /// Invert the bias weights of two agents and compare them coordinatewise
    CompareBias {
        #[command(flatten)]
        src: Sources,
        #[arg(long)]
        direction: PathBuf,
        #[arg(long)]
        battery: PathBuf,
        #[arg(long, default_value = "1e-9")]
        tolerance: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Is agent 1 more informed than agent 2 (SOSD of test functions)?
    CompareInfo {
        #[command(flatten)]
        src: Sources,
        #[arg(long)]
        battery: PathBuf,
        /// Report path; test-function samples go next to it as CSV
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Does agent 1 learn its taste faster than agent 2?
    CompareLearning {
        #[command(flatten)]
        src: Sources,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a worked fixture end to end
    Demo {
        which: DemoName,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DemoName {
    Hire,
    Wsd,
}

/// A finished command: its report and whether everything it checked came out as required.
struct Outcome {
    report: Report,
    ok: bool,
}

impl From<Report> for Outcome {
    fn from(report: Report) -> Self {
        let ok = report.all_passed();
        Outcome { report, ok }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let (out, result) = match cli.cmd {
        Cmd::Simulate { model, battery, n, seed, out } => {
            let r = simulate_cmd(&model, battery.as_deref(), n, seed, out.as_deref());
            // the dataset, not the report, goes to --out
            (if n.is_some() { None } else { out }, r)
        }
        Cmd::Check { src, universe, battery, axioms, seed, tolerance, out } => {
            (out, check_cmd(&src, universe.as_deref(), battery.as_deref(), axioms.as_deref(), seed, &tolerance))
        }
        Cmd::Identify { src, universe, out } => (None, identify_cmd(&src, &universe, &out)),
        Cmd::CompareBias { src, direction, battery, tolerance, out } => (out, compare_bias_cmd(&src, &direction, &battery, &tolerance)),
        Cmd::CompareInfo { src, battery, out } => {
            let r = compare_info_cmd(&src, &battery, out.as_deref());
            (out, r)
        }
        Cmd::CompareLearning { src, out } => (out, compare_learning_cmd(&src)),
        Cmd::Demo { which, out } => (out, demo_cmd(which)),
    };
    match result.and_then(|o| emit(&o.report, out.as_deref()).map(|_| o.ok)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("DRSEU_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| Error::Parse(format!("DRSEU_THREADS={v:?} is not a thread count")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Error::Precondition(e.to_string()))?;
    }
    Ok(())
}

/// Summary lines to stdout; the JSON report to `out`, or to stdout when there is none.
fn emit(report: &Report, out: Option<&Path>) -> Result<()> {
    let mut text: String = report.summary.iter().map(|l| format!("{l}\n")).collect();
    if out.is_none() {
        text += &report.to_json()?;
    }
    let mut stdout = std::io::stdout().lock();
    // a closed pipe (e.g. `| head`) is not an error
    match stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(Error::Io(e.to_string())),
        _ => {}
    }
    match out {
        Some(p) => report.save(p),
        None => Ok(()),
    }
}

fn tolerance(s: &str) -> Result<Q> {
    let t = parse_q(s)?;
    if t < Q::zero() {
        return Err(Error::Parse(format!("negative tolerance {s}")));
    }
    Ok(t)
}

enum Source {
    Model(AnyModel),
    Data(Dataset),
}

impl Source {
    fn load_all(src: &Sources) -> Result<Vec<(String, Source)>> {
        let mut out = Vec::new();
        for p in &src.model {
            out.push((p.display().to_string(), Source::Model(io::load_model(p)?)));
        }
        for p in &src.dataset {
            out.push((p.display().to_string(), Source::Data(io::load_dataset(p)?)));
        }
        Ok(out)
    }

    fn one(src: &Sources) -> Result<(String, Source)> {
        let mut all = Self::load_all(src)?;
        if all.len() != 1 {
            return Err(Error::Precondition("give exactly one --model or --dataset".into()));
        }
        Ok(all.remove(0))
    }

    fn two(src: &Sources) -> Result<[(String, Source); 2]> {
        let all = Self::load_all(src)?;
        all.try_into().map_err(|_| Error::Precondition("give exactly two sources (--model and/or --dataset)".into()))
    }

    fn is_static(&self) -> bool {
        match self {
            Source::Model(m) => matches!(m, AnyModel::Static(_)),
            Source::Data(d) => d.is_static() && d.states.len() == 1,
        }
    }

    fn static_oracle(&self) -> Result<Box<dyn ChoiceOracle>> {
        match self {
            Source::Model(m) => Ok(Box::new(m.as_static()?.clone())),
            Source::Data(d) => Ok(Box::new(d.static_table()?)),
        }
    }

    fn dynamic_oracle(&self) -> Result<Box<dyn DynamicOracle>> {
        match self {
            Source::Model(m) => Ok(Box::new(m.as_dynamic()?.clone())),
            Source::Data(d) => Ok(Box::new(d.dynamic_table()?)),
        }
    }

    fn model(&self) -> Option<&AnyModel> {
        match self {
            Source::Model(m) => Some(m),
            Source::Data(_) => None,
        }
    }
}

fn qs(xs: &[Q]) -> Vec<String> {
    xs.iter().map(fmt_q).collect()
}

fn block_value(name: &str, operation: &str, rows: &[Vec<Q>]) -> ReportValue {
    ReportValue { name: name.into(), operation: operation.into(), value: rows.iter().map(|r| qs(r).join(" ")).collect() }
}

/// Battery file menus, or menus drawn from a random pool of six acts.
fn static_menus(battery: Option<&Path>, n_states: usize, n_prizes: Option<usize>, seed: u64) -> Result<Vec<Menu>> {
    match battery {
        Some(p) => io::load_battery(p),
        None => {
            let nz = n_prizes.ok_or_else(|| Error::Precondition("datasets need --battery".into()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(ProbeBattery::from_pool(&fixtures::random_pool(&mut rng, n_states, nz, 6))?.menus)
        }
    }
}

fn probe_battery(menus: Vec<Menu>, from_file: bool, seed: u64) -> Result<ProbeBattery> {
    if !from_file {
        // from_pool already set the mixers
        let pool: Vec<Act> = menus.iter().flat_map(|m| m.acts().iter().cloned()).collect();
        let mut uniq: Vec<Act> = Vec::new();
        for f in pool {
            if !uniq.contains(&f) {
                uniq.push(f);
            }
        }
        let mut b = ProbeBattery::new(menus)?;
        b.mixers = uniq.into_iter().take(6).collect();
        return Ok(b.with_seed(seed));
    }
    let mut b = ProbeBattery::new(menus)?;
    let mut mixers: Vec<Act> = Vec::new();
    for m in &b.menus {
        for f in m.acts() {
            if !mixers.contains(f) && mixers.len() < 6 {
                mixers.push(f.clone());
            }
        }
    }
    b.mixers = mixers;
    Ok(b.with_seed(seed))
}

fn simulate_cmd(model: &Path, battery: Option<&Path>, n: Option<u64>, seed: u64, out: Option<&Path>) -> Result<Outcome> {
    let m = io::load_model(model)?;
    let mut report = Report::new("simulate").input("model", model.display()).input("seed", seed);
    if let Some(b) = battery {
        report = report.input("battery", b.display());
    }
    if let Some(n) = n {
        report = report.input("n", n);
    }
    let dataset_out = match (n, out) {
        (Some(_), Some(p)) if p.extension().and_then(|e| e.to_str()) == Some("csv") => Some(p),
        (Some(_), _) => return Err(Error::Precondition("--n needs --out <file.csv> for the sampled dataset".into())),
        _ => None,
    };
    match &m {
        AnyModel::Static(sm) => {
            let menus = static_menus(battery, sm.states().len(), Some(sm.prizes().len()), seed)?;
            let mut data = Dataset::new(vec![sm.states().clone()])?;
            let mut worst = 0.0f64;
            for (i, menu) in menus.iter().enumerate() {
                let exact = sm.ascf_menu(menu)?;
                report.values.push(block_value(&format!("menu {i}"), "ascf", &exact));
                if let Some(n) = n {
                    let block = simulate(sm, menu, n, seed.wrapping_add(i as u64))?;
                    worst = worst.max(block.max_deviation(&exact));
                    data.add(History::empty(), menu.clone(), block.counts)?;
                }
            }
            report = report.with_battery(&menus);
            if let (Some(n), Some(p)) = (n, dataset_out) {
                io::save_dataset(&data, p)?;
                hoeffding_verdict(&mut report, worst, n, menus.len());
            }
        }
        AnyModel::Dynamic(dm) => {
            let menus = match battery {
                Some(p) => io::load_battery(p)?,
                None => {
                    let dims = dm.dims();
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let mut v = dims.probe_menus(0);
                    v.push(fixtures::random_dynamic_menu(&mut rng, &dims, 0, 3));
                    v
                }
            };
            let sizes: Vec<usize> = dm.state_spaces().iter().map(|l| l.len()).collect();
            let mut data = Dataset::new(dm.state_spaces().to_vec())?;
            for (i, menu) in menus.iter().enumerate() {
                report.values.push(block_value(&format!("menu {i}"), "conditional_ascf", &dm.conditional_menu(&History::empty(), menu)?));
                if let Some(n) = n {
                    for (h, m, c) in simulate_paths(dm, menu, n, seed.wrapping_add(i as u64))?.step_counts(&sizes) {
                        data.add(h, m, c)?;
                    }
                }
            }
            report = report.with_battery(&menus);
            if let Some(p) = dataset_out {
                io::save_dataset(&data, p)?;
                report.summary.push(format!("wrote {} count blocks to {}", data.blocks.len(), p.display()));
            }
        }
    }
    Ok(report.into())
}

/// Sampled frequencies against three Hoeffding half-widths at level 1e-3 per cell.
fn hoeffding_verdict(report: &mut Report, worst: f64, n: u64, menus: usize) {
    let bound = 3.0 * hoeffding_bound(n, 1e-3);
    let v = if worst <= bound {
        Verdict::pass("SAMPLING", menus)
    } else {
        Verdict::fail("SAMPLING", menus, Witness { relation: format!("max |freq − ρ| = {worst} > {bound}"), ..Default::default() })
    };
    report.summary.push(format!("sampling: {} (max deviation {worst:.5}, bound {bound:.5})", v.status));
    report.verdicts.push(v);
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum CheckId {
    Static(AxiomId),
    History(HistoryAxiom),
    Cib,
    Nuc,
    WeakDominance,
    StrongDominance,
    Bellman,
    Martingale,
}

impl std::str::FromStr for CheckId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        Ok(match up.as_str() {
            "CIB" => CheckId::Cib,
            "NUC" => CheckId::Nuc,
            "WEAK_DOMINANCE" | "WD" => CheckId::WeakDominance,
            "STRONG_DOMINANCE" | "SD" => CheckId::StrongDominance,
            "BELLMAN" => CheckId::Bellman,
            "MARTINGALE" | "GL" => CheckId::Martingale,
            _ => match up.parse::<AxiomId>() {
                Ok(a) => CheckId::Static(a),
                Err(_) => CheckId::History(up.parse::<HistoryAxiom>().map_err(|_| Error::Parse(format!("unknown check {s:?}")))?),
            },
        })
    }
}

struct StaticCtx<'a> {
    oracle: &'a dyn ChoiceOracle,
    model: Option<&'a RseuModel>,
    support: Option<Vec<SeuPair>>,
    battery: ProbeBattery,
}

fn run_static_check(id: CheckId, cx: &StaticCtx) -> Result<Verdict> {
    let need_support = || cx.support.clone().ok_or_else(|| Error::Precondition(format!("{id:?} on a dataset needs --universe")));
    let need_model = || cx.model.ok_or_else(|| Error::Precondition(format!("{id:?} needs a model")));
    match id {
        CheckId::Static(a) => run_axiom(a, cx.oracle, &cx.battery),
        CheckId::Cib => check_cib(cx.oracle, &need_support()?, &cx.battery),
        CheckId::Nuc => check_nuc(cx.oracle, &need_support()?, &cx.battery),
        CheckId::WeakDominance => check_weak_dominance(&DlrMeasure::from_model(need_model()?)?, &cx.battery.menus),
        CheckId::StrongDominance => {
            let m = need_model()?;
            let pref = DlrMeasure::from_model(m)?;
            let prizes: Vec<Lottery> = (0..m.prizes().len()).map(Lottery::prize).collect();
            let pool = act_lattice(&prizes, m.states().len(), 64);
            check_strong_dominance(&pref, &strong_dominance_instances(&pref, &cx.battery.menus, &pool)?)
        }
        other => Err(Error::Class(format!("{other:?} applies to dynamic models"))),
    }
}

fn run_dynamic_check(id: CheckId, oracle: &dyn DynamicOracle, model: Option<&DynamicModel>, battery: Option<&HistoryBattery>, tol: &Q) -> Result<Verdict> {
    let need_model = || model.ok_or_else(|| Error::Precondition(format!("{id:?} needs a model")));
    match id {
        CheckId::History(h) => {
            let b = battery.ok_or_else(|| Error::Precondition("history axioms on a dataset need constructed menus; give a model".into()))?;
            run_history_axiom(h, oracle, b)
        }
        CheckId::Bellman => Ok(check_bellman(need_model()?, tol)?.0),
        CheckId::Martingale => check_martingale(need_model()?, MartingaleScale::Filtration, tol),
        other => Err(Error::Class(format!("{other:?} applies to static models"))),
    }
}

fn summarize(report: &mut Report) {
    for v in &report.verdicts {
        let mut line = format!("{}: {}", v.check, v.status);
        if let Some(w) = &v.witness {
            line += &format!(" ({})", w.relation);
        }
        if let Some(n) = &v.note {
            line += &format!(" [{n}]");
        }
        report.summary.push(line);
    }
}

fn check_cmd(src: &Sources, universe: Option<&Path>, battery: Option<&Path>, axioms: Option<&str>, seed: u64, tol: &str) -> Result<Outcome> {
    let tol = tolerance(tol)?;
    let (name, source) = Source::one(src)?;
    let mut report = Report::new("check").input("source", &name).input("seed", seed).input("tolerance", fmt_q(&tol));
    if let Some(u) = universe {
        report = report.input("universe", u.display());
    }
    if let Some(b) = battery {
        report = report.input("battery", b.display());
    }
    let ids: Vec<CheckId> = match axioms {
        Some(list) => list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect::<Result<_>>()?,
        None if source.is_static() => AxiomId::ALL.iter().map(|&a| CheckId::Static(a)).collect(),
        None => {
            let mut v: Vec<CheckId> = HistoryAxiom::ALL.iter().map(|&h| CheckId::History(h)).collect();
            if let Some(AnyModel::Dynamic(m)) = source.model() {
                match m.class() {
                    ModelClass::Evolving => v.push(CheckId::Bellman),
                    ModelClass::Gl => v.extend([CheckId::Bellman, CheckId::Martingale]),
                    ModelClass::Drseu => {}
                }
            }
            v
        }
    };
    report = report.input("axioms", ids.iter().map(|i| format!("{i:?}")).collect::<Vec<_>>().join(","));
    if source.is_static() {
        let oracle = source.static_oracle()?;
        let model = match source.model() {
            Some(m) => Some(m.as_static()?),
            None => None,
        };
        let n_prizes = model.map(|m| m.prizes().len());
        // a dataset without --battery is probed on the menus it observed
        let (menus, listed) = match (battery, &source) {
            (None, Source::Data(d)) => (d.blocks.keys().map(|(_, m)| m.clone()).collect(), true),
            _ => (static_menus(battery, oracle.n_states(), n_prizes, seed)?, battery.is_some()),
        };
        let support = match (model, universe) {
            (Some(m), _) => Some(m.support().to_vec()),
            (None, Some(u)) => {
                let u = io::load_document::<UniverseFile>(u)?.static_universe()?;
                Some(revealed_support(oracle.as_ref(), &u)?.into_iter().map(|k| u.seus()[k].clone()).collect())
            }
            (None, None) => None,
        };
        let cx = StaticCtx { oracle: oracle.as_ref(), model, support, battery: probe_battery(menus, listed, seed)? };
        report.verdicts = ids.par_iter().map(|&id| run_static_check(id, &cx)).collect::<Result<_>>()?;
        report = report.with_battery(&cx.battery.menus);
    } else {
        let oracle = source.dynamic_oracle()?;
        let model = match source.model() {
            Some(m) => Some(m.as_dynamic()?),
            None => None,
        };
        let hb = match model {
            Some(m) if ids.iter().any(|i| matches!(i, CheckId::History(_))) => Some(HistoryBattery::for_model(m, seed)?),
            _ => None,
        };
        report.verdicts = ids.par_iter().map(|&id| run_dynamic_check(id, oracle.as_ref(), model, hb.as_ref(), &tol)).collect::<Result<_>>()?;
        if let Some(b) = &hb {
            let mut menus: Vec<Menu> = b.hcont.iter().map(|i| i.menu.clone()).collect();
            menus.sort();
            menus.dedup();
            report = report.with_battery(&menus);
        }
        if let Some(m) = model.filter(|m| ids.contains(&CheckId::Bellman) && m.delta().is_some()) {
            let (_, fit) = check_bellman(m, &tol)?;
            report.values.push(ReportValue::scalar("delta", "check_bellman", &fit.delta));
            report.values.push(ReportValue::scalar("residual", "check_bellman", &fit.residual));
        }
    }
    summarize(&mut report);
    Ok(report.into())
}

fn identify_cmd(src: &Sources, universe: &Path, out: &Path) -> Result<Outcome> {
    let (name, source) = Source::one(src)?;
    let ufile: UniverseFile = io::load_document(universe)?;
    let mut report = Report::new("identify").input("source", &name).input("universe", universe.display()).input("out", out.display());
    if source.is_static() {
        let oracle = source.static_oracle()?;
        let u = ufile.static_universe()?;
        let rec = recover_static(oracle.as_ref(), &u)?;
        let mu: Vec<Q> = (0..rec.model.support().len()).map(|k| rec.model.weight(k)).collect();
        report.values.push(ReportValue::vector("mu", "recover_static", &mu));
        if let Some(m) = source.model() {
            let same = static_equivalent(m.as_static()?, &rec.model);
            report.verdicts.push(if same {
                Verdict::pass("RECOVERY", 1)
            } else {
                Verdict::fail("RECOVERY", 1, Witness { relation: "recovered model differs from the source".into(), ..Default::default() })
            });
        }
        report.summary.push(format!("recovered {} support elements, μ = ({})", mu.len(), qs(&mu).join(", ")));
        report.provenance = rec.provenance.clone();
        io::save_recovered(&AnyModel::Static(rec.model), rec.provenance, out)?;
    } else {
        let oracle = source.dynamic_oracle()?;
        let u = ufile.dynamic_universe()?;
        let prizes = match (source.model(), &ufile.prizes) {
            (Some(m), _) => m.as_dynamic()?.prizes().clone(),
            (None, Some(p)) => Labels::new(p.clone())?,
            (None, None) => return Err(Error::Schema("dataset identification needs `prizes` in the universe file".into())),
        };
        let rec = recover_kernels(oracle.as_ref(), &u, &prizes)?;
        let nodes: usize = rec.model.levels().iter().map(Vec::len).sum();
        report.summary.push(format!("recovered {nodes} subjective states over {} periods", rec.model.levels().len()));
        if let Some(AnyModel::Dynamic(m)) = source.model() {
            let eq = models_equivalent(m, &rec.model, ModelClass::Drseu)?;
            report.verdicts.push(if eq.equivalent {
                Verdict::pass("RECOVERY", nodes)
            } else {
                Verdict::fail("RECOVERY", nodes, Witness { relation: eq.reason.unwrap_or_default(), ..Default::default() })
            });
            if m.class() != ModelClass::Drseu && m.horizon() > 0 {
                let d = identify_delta(m, &History::empty(), m.prizes().len(), DeltaSearch::default())?;
                report.values.push(ReportValue::scalar("delta", "identify_delta", &d));
                report.summary.push(format!("δ = {}", fmt_q(&d)));
            }
        }
        let prov: Vec<_> = rec.provenance.iter().flatten().cloned().collect();
        report.provenance = prov.clone();
        io::save_recovered(&AnyModel::Dynamic(rec.model), prov, out)?;
    }
    summarize(&mut report);
    Ok(report.into())
}

fn compare_bias_cmd(src: &Sources, direction: &Path, battery: &Path, tol: &str) -> Result<Outcome> {
    let tol = tolerance(tol)?;
    let [(n1, s1), (n2, s2)] = Source::two(src)?;
    let dir: DirectionFile = io::load_document(direction)?;
    let spec = dir.spec()?;
    let acts = dir.acts()?;
    let menus = io::load_battery(battery)?;
    let (o1, o2) = (s1.static_oracle()?, s2.static_oracle()?);
    let c = compare_bias(o1.as_ref(), o2.as_ref(), &spec, &dir.utility(), &acts, &menus, &tol)?;
    let mut report = Report::new("compare-bias")
        .input("agent1", &n1)
        .input("agent2", &n2)
        .input("direction", direction.display())
        .input("battery", battery.display())
        .input("tolerance", fmt_q(&tol))
        .with_battery(&menus);
    report.values.push(ReportValue::vector("a1", "invert_bias", &c.first.weights));
    report.values.push(ReportValue::vector("a2", "invert_bias", &c.second.weights));
    report.values.push(ReportValue::scalar("residual1", "invert_bias", &c.first.residual));
    report.values.push(ReportValue::scalar("residual2", "invert_bias", &c.second.residual));
    report.verdicts.push(if c.first_less_biased {
        Verdict::pass("LESS_BIASED(1,2)", menus.len())
    } else {
        let w = (0..c.first.weights.len()).find(|&w| c.first.weights[w] > c.second.weights[w]).unwrap_or(0);
        Verdict::fail(
            "LESS_BIASED(1,2)",
            menus.len(),
            Witness { relation: format!("a₁ ≤ a₂ fails at signal {w}"), lhs: Some(c.first.weights[w].clone()), rhs: Some(c.second.weights[w].clone()), ..Default::default() },
        )
    });
    report.summary.push(format!("a1 = ({})", qs(&c.first.weights).join(", ")));
    report.summary.push(format!("a2 = ({})", qs(&c.second.weights).join(", ")));
    report.summary.push(format!("reverse order holds: {}", c.second_less_biased));
    summarize(&mut report);
    Ok(report.into())
}

fn compare_info_cmd(src: &Sources, battery: &Path, out: Option<&Path>) -> Result<Outcome> {
    let [(n1, s1), (n2, s2)] = Source::two(src)?;
    let bfile: BatteryFile = io::load_document(battery)?;
    let menus = bfile.menus()?;
    let acts = bfile.test_acts()?;
    let (o1, o2) = (s1.static_oracle()?, s2.static_oracle()?);
    let v = blackwell_compare(o1.as_ref(), o2.as_ref(), &acts, &menus)?;
    let mut report = Report::new("compare-info").input("agent1", &n1).input("agent2", &n2).input("battery", battery.display()).with_battery(&menus);
    report.verdicts.push(v);
    if let Some(p) = out {
        let mut cdfs: Vec<(String, StepCdf)> = Vec::new();
        for (i, m) in menus.iter().enumerate() {
            cdfs.push((format!("agent1 menu {i}"), test_function(o1.as_ref(), m, &acts)?));
            cdfs.push((format!("agent2 menu {i}"), test_function(o2.as_ref(), m, &acts)?));
        }
        let csv = p.with_extension("csv");
        io::write_cdf_csv(&csv, &cdfs, 101)?;
        report = report.input("samples", csv.display());
    }
    summarize(&mut report);
    Ok(report.into())
}

fn compare_learning_cmd(src: &Sources) -> Result<Outcome> {
    let [(n1, s1), (n2, s2)] = Source::two(src)?;
    let model = |s: &Source| s.model().ok_or_else(|| Error::Precondition("learning speed compares models".into())).and_then(|m| m.as_dynamic().cloned());
    let (m1, m2) = (model(&s1)?, model(&s2)?);
    let fwd = learns_faster(&m1, &m2)?;
    let back = learns_faster(&m2, &m1)?;
    let mut report = Report::new("compare-learning").input("agent1", &n1).input("agent2", &n2);
    report.verdicts.push(if fwd {
        Verdict::pass("LEARNS_FASTER(1,2)", m1.horizon() + 1)
    } else {
        Verdict::fail("LEARNS_FASTER(1,2)", m1.horizon() + 1, Witness { relation: "agent 2 is certain of its taste at a period where agent 1 is not".into(), ..Default::default() })
    });
    report.summary.push(format!("learns_faster(2,1) = {back}"));
    summarize(&mut report);
    Ok(report.into())
}

fn demo_cmd(which: DemoName) -> Result<Outcome> {
    match which {
        DemoName::Wsd => demo_wsd(),
        DemoName::Hire => demo_hire(),
    }
}

fn demo_wsd() -> Result<Outcome> {
    let m = fixtures::wsd_model();
    let pref = DlrMeasure::from_model(&m)?;
    let (f, g) = fixtures::wsd_acts();
    let single = Menu::singleton(f.clone());
    let both = Menu::new(vec![f, g.clone()])?;
    let (v1, v2) = (dlr_value(&pref, &single)?, dlr_value(&pref, &both)?);
    let menus = vec![single.clone(), both];
    let weak = check_weak_dominance(&pref, &menus)?;
    let prizes: Vec<Lottery> = (0..4).map(Lottery::prize).collect();
    let pool = act_lattice(&prizes, 2, 64);
    let inst: Vec<_> = strong_dominance_instances(&pref, &[single], &pool)?.into_iter().filter(|i| i.dominated == g).collect();
    let strong = check_strong_dominance(&pref, &inst)?;
    let mut report = Report::new("demo wsd").with_battery(&menus);
    report.values.push(ReportValue::scalar("V({f})", "dlr_value", &v1));
    report.values.push(ReportValue::scalar("V({f,g})", "dlr_value", &v2));
    report.summary.push(format!("strong dominance: {}, weak dominance: {}", strong.status, weak.status));
    report.summary.push(format!("V({{f}}) = {}, V({{f,g}}) = {}", fmt_q(&v1), fmt_q(&v2)));
    if let Some(w) = &strong.witness {
        report.summary.push(format!("witness: {{f,g}} ≻ {{f}} ({} > {})", w.lhs.as_ref().map(fmt_q).unwrap_or_default(), w.rhs.as_ref().map(fmt_q).unwrap_or_default()));
    }
    let ok = strong.status == Status::Fail && weak.passed() && v1 == q(1, 3) && v2 == q(1, 2);
    report.verdicts = vec![strong, weak];
    Ok(Outcome { report, ok })
}

fn hire_probability(q_hat: Q, prefers: bool) -> Result<Q> {
    let m = fixtures::hire_model(q_hat, &fixtures::hire_tastes(prefers));
    Ok(scf_bar(&m.ascf_menu(&fixtures::hire_menu())?)[0].clone())
}

fn demo_hire() -> Result<Outcome> {
    let (q1, q2) = (q(3, 4), q(1, 4));
    let menu = fixtures::hire_menu();
    let battery = ProbeBattery::new(vec![menu.clone()])?;
    let biased = fixtures::hire_single(q1.clone());
    let cib = check_cib(&biased, biased.support(), &battery)?;
    let nuc = check_nuc(&biased, biased.support(), &battery)?;

    let fair = (hire_probability(q(1, 2), false)?, hire_probability(q(1, 2), false)?);
    let skewed = (hire_probability(q1.clone(), false)?, hire_probability(q2.clone(), false)?);
    let gap = &skewed.0 - &skewed.1;

    let employer = fixtures::hire_employer(q1.clone(), q2.clone());
    let fit = invert_bias(&employer, &fixtures::hire_bias_spec(), &employer.support()[0].utility, &fixtures::hire_test_acts(), &fixtures::hire_bias_battery(), &q(1, 1_000_000_000))?;
    let expected = [q(2, 1) * &q1 - q(1, 1), q(1, 1) - q(2, 1) * &q2];
    let close = fit.weights.iter().zip(&expected).all(|(a, b)| (a - b).abs() <= q(1, 1_000_000));

    let mut report = Report::new("demo hire").with_battery(&[menu]);
    report.values.push(ReportValue::vector("hire probability, fair beliefs", "ascf", &[fair.0.clone(), fair.1.clone()]));
    report.values.push(ReportValue::vector("hire probability, q̂ = (3/4, 1/4)", "ascf", &[skewed.0.clone(), skewed.1.clone()]));
    report.values.push(ReportValue::vector("a", "invert_bias", &fit.weights));
    report.summary.push(format!("CIB with q̂₁ = 3/4: {}, NUC: {}", cib.status, nuc.status));
    report.summary.push(format!("fair beliefs: P(hire | s0') = {}, P(hire | s0'') = {}", fmt_q(&fair.0), fmt_q(&fair.1)));
    report.summary.push(format!("incorrect beliefs: hiring gap = {}", fmt_q(&gap)));
    report.summary.push(format!("recovered bias a = ({}), closed form ({})", qs(&fit.weights).join(", "), qs(&expected).join(", ")));
    let ok = cib.status == Status::Fail && nuc.passed() && fair.0 == fair.1 && gap > Q::zero() && close;
    report.verdicts = vec![cib, nuc];
    Ok(Outcome { report, ok })
}
