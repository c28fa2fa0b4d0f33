//! File formats: model documents (TOML or JSON), count datasets (CSV plus a JSON sidecar),
//! probe batteries, candidate universes and JSON reports.
//!
//! Rationals are written as "p/q" strings. Readers also accept integers and decimals.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use num_traits::{One, Zero};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::acts::{Act, Belief, Labels, Menu, Outcome, SeuPair, Utility};
use crate::axioms::Verdict;
use crate::comparative::{BiasSpec, StepCdf, TestActs};
use crate::dynamic::{DynamicModel, DynamicTable, History, ModelClass, Node, Step, Taste};
use crate::error::{Error, Result};
use crate::identify::{CandidateUniverse, DynamicUniverse, Provenance};
use crate::rational::{fmt_q, Q};
use crate::static_model::{AscfTable, ModelFlags, RseuModel, Stage, TieBreakCascade};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Toml,
    Json,
}

impl Format {
    pub fn of(path: &Path) -> Result<Format> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("toml") => Ok(Format::Toml),
            Some("json") => Ok(Format::Json),
            _ => Err(Error::Parse(format!("{}: expected a .toml or .json file", path.display()))),
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Parses a TOML or JSON document; parse errors carry the position reported by the parser.
pub fn parse_document<T: DeserializeOwned>(text: &str, format: Format) -> Result<T> {
    match format {
        Format::Toml => toml::from_str(text).map_err(|e| Error::Parse(e.to_string())),
        Format::Json => serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string())),
    }
}

pub fn render_document<T: Serialize>(doc: &T, format: Format) -> Result<String> {
    match format {
        Format::Toml => toml::to_string_pretty(doc).map_err(|e| Error::Parse(e.to_string())),
        Format::Json => serde_json::to_string_pretty(doc).map(|s| s + "\n").map_err(|e| Error::Parse(e.to_string())),
    }
}

pub fn load_document<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let format = Format::of(path)?;
    parse_document(&read_text(path)?, format).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        e => e,
    })
}

pub fn save_document<T: Serialize>(doc: &T, path: &Path) -> Result<()> {
    write_text(path, &render_document(doc, Format::of(path)?)?)
}

/// A utility written either as a prize vector or as an explicit consequence table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UtilitySpec {
    Prizes(#[serde(with = "crate::rational::serde_qvec")] Vec<Q>),
    Table(Utility),
}

impl UtilitySpec {
    fn of(u: &Utility, n_prizes: usize) -> Self {
        let v = u.prize_vector(n_prizes);
        if Utility::over_prizes(v.clone()) == *u {
            UtilitySpec::Prizes(v)
        } else {
            UtilitySpec::Table(u.clone())
        }
    }

    fn utility(self) -> Utility {
        match self {
            UtilitySpec::Prizes(v) => Utility::over_prizes(v),
            UtilitySpec::Table(u) => u,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    #[serde(with = "crate::rational::serde_q")]
    pub weight: Q,
    #[serde(with = "crate::rational::serde_qvec")]
    pub belief: Vec<Q>,
    pub utility: UtilitySpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeuSpec {
    #[serde(with = "crate::rational::serde_qvec")]
    pub belief: Vec<Q>,
    pub utility: UtilitySpec,
}

impl SeuSpec {
    fn of(s: &SeuPair, n_prizes: usize) -> Self {
        SeuSpec { belief: s.belief.probs().to_vec(), utility: UtilitySpec::of(&s.utility, n_prizes) }
    }

    fn build(self, where_: &str) -> Result<SeuPair> {
        Ok(SeuPair::new(belief_at(self.belief, where_)?, self.utility.utility()))
    }
}

/// One element of a static support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportSpec {
    #[serde(with = "crate::rational::serde_qvec")]
    pub belief: Vec<Q>,
    pub utility: UtilitySpec,
    /// μ(k, s) for each objective state.
    #[serde(with = "crate::rational::serde_qvec")]
    pub joint: Vec<Q>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cascade: Vec<StageSpec>,
}

/// One subjective state θ_t. `index` within its period is the order of appearance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub period: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<usize>,
    #[serde(with = "crate::rational::serde_qvec")]
    pub belief: Vec<Q>,
    /// Label of the realized objective state s_t.
    pub state: String,
    #[serde(with = "crate::rational::serde_q")]
    pub prob: Q,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility: Option<UtilitySpec>,
    #[serde(default, with = "crate::rational::serde_opt_qvec", skip_serializing_if = "Option::is_none")]
    pub felicity: Option<Vec<Q>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taste: Option<Taste>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cascade: Vec<StageSpec>,
}

/// The model document. Static models fill `states` and `support`; dynamic ones fill
/// `periods` and `nodes`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpecFile {
    pub class: String,
    pub prizes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub states: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub periods: Vec<Vec<String>>,
    #[serde(default, with = "crate::rational::serde_opt_q", skip_serializing_if = "Option::is_none")]
    pub delta: Option<Q>,
    #[serde(default)]
    pub flags: ModelFlags,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub support: Vec<SupportSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<NodeSpec>,
    /// Probes behind recovered numbers; ignored when loading.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub provenance: Vec<Provenance>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnyModel {
    Static(RseuModel),
    Dynamic(DynamicModel),
}

impl AnyModel {
    pub fn as_static(&self) -> Result<&RseuModel> {
        match self {
            AnyModel::Static(m) => Ok(m),
            AnyModel::Dynamic(_) => Err(Error::Class("expected a static (rseu) model".into())),
        }
    }

    pub fn as_dynamic(&self) -> Result<&DynamicModel> {
        match self {
            AnyModel::Dynamic(m) => Ok(m),
            AnyModel::Static(_) => Err(Error::Class("expected a dynamic model".into())),
        }
    }
}

/// Re-labels an invariant error with the element it came from.
fn at(where_: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Invariant { invariant, detail } => Error::invariant(invariant, format!("{where_}: {detail}")),
        Error::Shape(m) => Error::Shape(format!("{where_}: {m}")),
        e => e,
    }
}

fn belief_at(probs: Vec<Q>, where_: &str) -> Result<Belief> {
    Belief::new(probs).map_err(at(where_))
}

fn cascade_at(stages: Vec<StageSpec>, where_: &str) -> Result<TieBreakCascade> {
    let stages = stages
        .into_iter()
        .enumerate()
        .map(|(j, s)| Ok(Stage { weight: s.weight, aux: SeuPair::new(belief_at(s.belief, &format!("{where_} cascade stage {j}"))?, s.utility.utility()) }))
        .collect::<Result<Vec<_>>>()?;
    let c = TieBreakCascade { stages };
    c.validate().map_err(at(where_))?;
    Ok(c)
}

fn stages_of(c: &TieBreakCascade, n_prizes: usize) -> Vec<StageSpec> {
    c.stages
        .iter()
        .map(|s| StageSpec { weight: s.weight.clone(), belief: s.aux.belief.probs().to_vec(), utility: UtilitySpec::of(&s.aux.utility, n_prizes) })
        .collect()
}

fn labels(v: Vec<String>, what: &str) -> Result<Labels> {
    Labels::new(v).map_err(|e| Error::Schema(format!("{what}: {e}")))
}

impl ModelSpecFile {
    pub fn from_static(m: &RseuModel) -> Self {
        let nz = m.prizes().len();
        let support = m
            .support()
            .iter()
            .enumerate()
            .map(|(k, s)| SupportSpec {
                belief: s.belief.probs().to_vec(),
                utility: UtilitySpec::of(&s.utility, nz),
                joint: m.joint()[k].clone(),
                cascade: stages_of(&m.cascades()[k], nz),
            })
            .collect();
        ModelSpecFile {
            class: "rseu".into(),
            prizes: m.prizes().as_slice().to_vec(),
            states: m.states().as_slice().to_vec(),
            periods: Vec::new(),
            delta: None,
            flags: m.flags(),
            support,
            nodes: Vec::new(),
            provenance: Vec::new(),
        }
    }

    pub fn from_dynamic(m: &DynamicModel) -> Self {
        let nz = m.prizes().len();
        let mut nodes = Vec::new();
        for (t, level) in m.levels().iter().enumerate() {
            for n in level {
                let (mut utility, mut felicity, mut taste) = (None, None, None);
                match &n.taste {
                    Taste::Prize { values } => utility = Some(UtilitySpec::Prizes(values.clone())),
                    Taste::Table { utility: u } => utility = Some(UtilitySpec::Table(u.clone())),
                    Taste::Felicity { values } => felicity = Some(values.clone()),
                    other => taste = Some(other.clone()),
                }
                nodes.push(NodeSpec {
                    period: t,
                    parent: n.parent,
                    belief: n.belief.probs().to_vec(),
                    state: m.states(t).label(n.state).to_string(),
                    prob: n.prob.clone(),
                    utility,
                    felicity,
                    taste,
                    cascade: stages_of(&n.cascade, nz),
                });
            }
        }
        ModelSpecFile {
            class: m.class().to_string(),
            prizes: m.prizes().as_slice().to_vec(),
            states: Vec::new(),
            periods: m.state_spaces().iter().map(|l| l.as_slice().to_vec()).collect(),
            delta: m.delta().cloned(),
            flags: m.flags(),
            support: Vec::new(),
            nodes,
            provenance: Vec::new(),
        }
    }

    pub fn from_model(m: &AnyModel) -> Self {
        match m {
            AnyModel::Static(m) => Self::from_static(m),
            AnyModel::Dynamic(m) => Self::from_dynamic(m),
        }
    }

    pub fn build(self) -> Result<AnyModel> {
        let prizes = labels(self.prizes, "prizes")?;
        if self.class.eq_ignore_ascii_case("rseu") {
            if !self.nodes.is_empty() || !self.periods.is_empty() {
                return Err(Error::Schema("rseu model with dynamic fields (nodes, periods)".into()));
            }
            if self.support.is_empty() {
                return Err(Error::Schema("rseu model without a support".into()));
            }
            let states = labels(self.states, "states")?;
            let (mut support, mut joint, mut cascades) = (Vec::new(), Vec::new(), Vec::new());
            for (k, s) in self.support.into_iter().enumerate() {
                let where_ = format!("support element {k}");
                support.push(SeuPair::new(belief_at(s.belief, &where_)?, s.utility.utility()));
                joint.push(s.joint);
                cascades.push(cascade_at(s.cascade, &where_)?);
            }
            return RseuModel::new(prizes, states, support, joint, cascades, self.flags).map(AnyModel::Static);
        }
        let class: ModelClass = self.class.parse().map_err(|_| Error::Schema(format!("unknown model class {:?}", self.class)))?;
        if !self.support.is_empty() || !self.states.is_empty() {
            return Err(Error::Schema(format!("{class} model with static fields (states, support)")));
        }
        if self.periods.is_empty() {
            return Err(Error::Schema(format!("{class} model without periods")));
        }
        if class != ModelClass::Drseu && self.delta.is_none() {
            return Err(Error::Schema(format!("{class} model without delta")));
        }
        let states = self.periods.into_iter().enumerate().map(|(t, v)| labels(v, &format!("period {t} states"))).collect::<Result<Vec<_>>>()?;
        let mut levels: Vec<Vec<Node>> = vec![Vec::new(); states.len()];
        for (j, n) in self.nodes.into_iter().enumerate() {
            let t = n.period;
            if t >= states.len() {
                return Err(Error::Schema(format!("node entry {j}: period {t} beyond the horizon")));
            }
            let where_ = format!("node ({t},{})", levels[t].len());
            let taste = match (n.utility, n.felicity, n.taste) {
                (Some(UtilitySpec::Prizes(values)), None, None) => Taste::Prize { values },
                (Some(UtilitySpec::Table(utility)), None, None) => Taste::Table { utility },
                (None, Some(values), None) => Taste::Felicity { values },
                (None, None, Some(taste)) => taste,
                _ => return Err(Error::Schema(format!("{where_}: exactly one of utility, felicity, taste"))),
            };
            let state = states[t].index(&n.state).ok_or_else(|| Error::Schema(format!("{where_}: unknown state {:?}", n.state)))?;
            levels[t].push(Node {
                parent: n.parent,
                belief: belief_at(n.belief, &where_)?,
                taste,
                state,
                prob: n.prob,
                cascade: cascade_at(n.cascade, &where_)?,
            });
        }
        DynamicModel::new(prizes, states, levels, self.delta, class, self.flags).map(AnyModel::Dynamic)
    }
}

pub fn load_model(path: &Path) -> Result<AnyModel> {
    load_document::<ModelSpecFile>(path)?.build()
}

pub fn save_model(model: &AnyModel, path: &Path) -> Result<()> {
    save_document(&ModelSpecFile::from_model(model), path)
}

/// Writes a model document with the probes behind its recovered numbers.
pub fn save_recovered(model: &AnyModel, provenance: Vec<Provenance>, path: &Path) -> Result<()> {
    let mut doc = ModelSpecFile::from_model(model);
    doc.provenance = provenance;
    save_document(&doc, path)
}

/// An act written as one prize per state, or in full.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActSpec {
    Prizes(Vec<usize>),
    Full(Act),
}

impl ActSpec {
    pub fn of(f: &Act) -> Self {
        let prizes: Option<Vec<usize>> = f
            .rows()
            .iter()
            .map(|l| match l.entries().collect::<Vec<_>>().as_slice() {
                [(Outcome::Prize(z), p)] if p.is_one() => Some(*z),
                _ => None,
            })
            .collect();
        match prizes {
            Some(v) => ActSpec::Prizes(v),
            None => ActSpec::Full(f.clone()),
        }
    }

    pub fn act(&self) -> Result<Act> {
        match self {
            ActSpec::Prizes(v) if v.is_empty() => Err(Error::invariant("one lottery per state", "act has no rows")),
            ActSpec::Prizes(v) => Ok(Act::from_prizes(v)),
            ActSpec::Full(f) => Ok(f.clone()),
        }
    }
}

/// A list of probe menus, optionally with the anchor acts of the test functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryFile {
    pub menus: Vec<Vec<ActSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst: Option<ActSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best: Option<ActSpec>,
}

impl BatteryFile {
    pub fn of(menus: &[Menu]) -> Self {
        BatteryFile { menus: menus.iter().map(|m| m.acts().iter().map(ActSpec::of).collect()).collect(), worst: None, best: None }
    }

    pub fn with_acts(mut self, acts: &TestActs) -> Self {
        self.worst = Some(ActSpec::of(&acts.worst));
        self.best = Some(ActSpec::of(&acts.best));
        self
    }

    pub fn test_acts(&self) -> Result<TestActs> {
        match (&self.worst, &self.best) {
            (Some(w), Some(b)) => Ok(TestActs { worst: w.act()?, best: b.act()? }),
            _ => Err(Error::Schema("battery file needs `worst` and `best` acts for test functions".into())),
        }
    }

    pub fn menus(&self) -> Result<Vec<Menu>> {
        self.menus
            .iter()
            .enumerate()
            .map(|(i, m)| Menu::new(m.iter().map(ActSpec::act).collect::<Result<Vec<_>>>()?).map_err(at(&format!("menu {i}"))))
            .collect()
    }
}

pub fn load_battery(path: &Path) -> Result<Vec<Menu>> {
    load_document::<BatteryFile>(path)?.menus()
}

/// Candidate SEU preferences: `candidates` for static recovery, `levels` for dynamic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniverseFile {
    /// Prize labels, needed when a dynamic universe is used with a dataset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prizes: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<SeuSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<Vec<SeuSpec>>,
}

impl UniverseFile {
    pub fn of_static(u: &CandidateUniverse, n_prizes: usize) -> Self {
        UniverseFile { prizes: None, candidates: u.seus().iter().map(|s| SeuSpec::of(s, n_prizes)).collect(), levels: Vec::new() }
    }

    pub fn of_dynamic(u: &DynamicUniverse, n_prizes: usize) -> Self {
        UniverseFile { prizes: None, candidates: Vec::new(), levels: u.levels.iter().map(|l| l.seus().iter().map(|s| SeuSpec::of(s, n_prizes)).collect()).collect() }
    }

    pub fn static_universe(&self) -> Result<CandidateUniverse> {
        if self.candidates.is_empty() {
            return Err(Error::Schema("universe file has no candidates".into()));
        }
        let seus = self.candidates.iter().cloned().enumerate().map(|(k, s)| s.build(&format!("candidate {k}"))).collect::<Result<Vec<_>>>()?;
        CandidateUniverse::new(seus)
    }

    pub fn dynamic_universe(&self) -> Result<DynamicUniverse> {
        if self.levels.is_empty() {
            return Err(Error::Schema("universe file has no levels".into()));
        }
        let mut levels = Vec::new();
        for (t, l) in self.levels.iter().enumerate() {
            let seus = l.iter().cloned().enumerate().map(|(k, s)| s.build(&format!("period {t} candidate {k}"))).collect::<Result<Vec<_>>>()?;
            levels.push(CandidateUniverse::new(seus)?);
        }
        Ok(DynamicUniverse { levels })
    }
}

/// Inputs for bias inversion: the signal structure, the bias directions, the common
/// taste and the two anchor acts of the test functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionFile {
    #[serde(with = "crate::rational::serde_qvec")]
    pub prior: Vec<Q>,
    pub truth: Vec<Vec<String>>,
    pub direction: Vec<Vec<String>>,
    #[serde(with = "crate::rational::serde_qvec")]
    pub utility: Vec<Q>,
    pub worst: ActSpec,
    pub best: ActSpec,
}

impl DirectionFile {
    pub fn spec(&self) -> Result<BiasSpec> {
        let beliefs = |rows: &[Vec<String>], what: &str| -> Result<Vec<Belief>> {
            rows.iter()
                .enumerate()
                .map(|(w, r)| {
                    let probs = r.iter().map(|x| crate::rational::parse_q(x)).collect::<Result<Vec<_>>>()?;
                    belief_at(probs, &format!("{what} {w}"))
                })
                .collect()
        };
        let n = self.prior.len();
        BiasSpec::new(self.prior.clone(), beliefs(&self.truth, "truth")?, beliefs(&self.direction, "direction")?, vec![Q::zero(); n])
    }

    pub fn utility(&self) -> Utility {
        Utility::over_prizes(self.utility.clone())
    }

    pub fn acts(&self) -> Result<TestActs> {
        Ok(TestActs { worst: self.worst.act()?, best: self.best.act()? })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservedStep {
    pub menu: String,
    pub act: String,
    pub state: String,
}

/// Definitions behind the ids used in a dataset's CSV rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    /// State labels of each period.
    pub periods: Vec<Vec<String>>,
    pub acts: BTreeMap<String, ActSpec>,
    pub menus: BTreeMap<String, Vec<String>>,
    /// Observed histories; the empty history is implicit under the id "h0" unless listed.
    #[serde(default)]
    pub histories: BTreeMap<String, Vec<ObservedStep>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub history_id: String,
    pub period: usize,
    pub menu_id: String,
    pub act_id: String,
    pub state_id: String,
    pub count: u64,
}

/// Count data: for each (history, menu), counts of (act, state) pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub states: Vec<Labels>,
    pub blocks: BTreeMap<(History, Menu), Vec<Vec<u64>>>,
}

fn frequencies(counts: &[Vec<u64>]) -> Vec<Vec<Q>> {
    let total: u64 = counts.iter().flatten().sum();
    counts.iter().map(|r| r.iter().map(|&c| Q::new((c as i64).into(), (total as i64).into())).collect()).collect()
}

impl Dataset {
    pub fn new(states: Vec<Labels>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Shape("dataset without periods".into()));
        }
        Ok(Dataset { states, blocks: BTreeMap::new() })
    }

    pub fn add(&mut self, h: History, menu: Menu, counts: Vec<Vec<u64>>) -> Result<()> {
        let t = h.len();
        if t >= self.states.len() || counts.len() != menu.len() || counts.iter().any(|r| r.len() != self.states[t].len()) {
            return Err(Error::Shape(format!("count block for menu {menu} does not match its period")));
        }
        if counts.iter().flatten().all(|&c| c == 0) {
            return Err(Error::DataInconsistency(format!("menu {menu} has no observations")));
        }
        let block = self.blocks.entry((h, menu)).or_insert_with(|| vec![vec![0; counts[0].len()]; counts.len()]);
        for (r, c) in block.iter_mut().zip(&counts) {
            for (x, y) in r.iter_mut().zip(c) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn is_static(&self) -> bool {
        self.blocks.keys().all(|(h, _)| h.is_empty())
    }

    /// Sampled frequencies of the period-0 blocks.
    pub fn static_table(&self) -> Result<AscfTable> {
        if !self.is_static() {
            return Err(Error::Class("dataset has non-empty histories; use the dynamic table".into()));
        }
        AscfTable::empirical(self.blocks.iter().map(|((_, m), c)| (m.clone(), frequencies(c))).collect())
    }

    pub fn dynamic_table(&self) -> Result<DynamicTable> {
        let mut t = DynamicTable::new(self.states.iter().map(Labels::len).collect())?;
        for ((h, m), c) in &self.blocks {
            t.insert(h.clone(), m.clone(), frequencies(c))?;
        }
        Ok(t)
    }
}

/// The sidecar sits next to the CSV with a `.json` extension.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn load_dataset(csv_path: &Path) -> Result<Dataset> {
    let side: DatasetSidecar = load_document(&sidecar_path(csv_path))?;
    let states = side.periods.iter().enumerate().map(|(t, v)| labels(v.clone(), &format!("period {t} states"))).collect::<Result<Vec<_>>>()?;
    let acts = side.acts.iter().map(|(id, a)| Ok((id.clone(), a.act()?))).collect::<Result<BTreeMap<_, _>>>()?;
    let menus = side
        .menus
        .iter()
        .map(|(id, ids)| {
            let members = ids
                .iter()
                .map(|a| acts.get(a).cloned().ok_or_else(|| Error::Schema(format!("menu {id}: unknown act {a:?}"))))
                .collect::<Result<Vec<_>>>()?;
            Ok((id.clone(), Menu::new(members).map_err(at(&format!("menu {id}")))?))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    let state_of = |t: usize, s: &str| -> Result<usize> {
        states.get(t).and_then(|l| l.index(s)).ok_or_else(|| Error::Schema(format!("unknown state {s:?} in period {t}")))
    };
    let mut histories: BTreeMap<String, History> = BTreeMap::new();
    histories.insert("h0".into(), History::empty());
    for (id, steps) in &side.histories {
        let mut out = Vec::new();
        for (t, st) in steps.iter().enumerate() {
            let menu = menus.get(&st.menu).ok_or_else(|| Error::Schema(format!("history {id}: unknown menu {:?}", st.menu)))?;
            let act = acts.get(&st.act).ok_or_else(|| Error::Schema(format!("history {id}: unknown act {:?}", st.act)))?;
            out.push(Step::new(menu.clone(), act.clone(), state_of(t, &st.state)?)?);
        }
        histories.insert(id.clone(), History::new(out)?);
    }

    let mut reader = csv::Reader::from_path(csv_path).map_err(|e| Error::Io(format!("{}: {e}", csv_path.display())))?;
    let mut grouped: BTreeMap<(String, String), Vec<Vec<u64>>> = BTreeMap::new();
    for (line, row) in reader.deserialize::<DatasetRow>().enumerate() {
        let row = row.map_err(|e| Error::Parse(format!("{} row {}: {e}", csv_path.display(), line + 1)))?;
        let where_ = format!("{} row {}", csv_path.display(), line + 1);
        let h = histories.get(&row.history_id).ok_or_else(|| Error::Schema(format!("{where_}: unknown history {:?}", row.history_id)))?;
        if h.len() != row.period {
            return Err(Error::DataInconsistency(format!("{where_}: history {} has length {}, row says period {}", row.history_id, h.len(), row.period)));
        }
        let menu = menus.get(&row.menu_id).ok_or_else(|| Error::Schema(format!("{where_}: unknown menu {:?}", row.menu_id)))?;
        let act = acts.get(&row.act_id).ok_or_else(|| Error::Schema(format!("{where_}: unknown act {:?}", row.act_id)))?;
        let i = menu.index_of(act).ok_or_else(|| Error::Schema(format!("{where_}: act {} is not in menu {}", row.act_id, row.menu_id)))?;
        let s = state_of(row.period, &row.state_id).map_err(|e| Error::Schema(format!("{where_}: {e}")))?;
        let block = grouped.entry((row.history_id.clone(), row.menu_id.clone())).or_insert_with(|| vec![vec![0; states[row.period].len()]; menu.len()]);
        block[i][s] += row.count;
    }
    let mut data = Dataset::new(states)?;
    for ((hid, mid), counts) in grouped {
        if counts.iter().flatten().all(|&c| c == 0) {
            return Err(Error::DataInconsistency(format!("history {hid}, menu {mid}: counts total zero")));
        }
        data.add(histories[&hid].clone(), menus[&mid].clone(), counts)?;
    }
    Ok(data)
}

/// Writes the CSV and its sidecar. Ids are assigned in first-seen order.
pub fn save_dataset(data: &Dataset, csv_path: &Path) -> Result<()> {
    let mut act_ids: Vec<Act> = Vec::new();
    let mut menu_ids: Vec<Menu> = Vec::new();
    let mut hist_ids: Vec<History> = vec![History::empty()];
    let intern = |v: &mut Vec<Menu>, m: &Menu| -> usize {
        v.iter().position(|x| x == m).unwrap_or_else(|| {
            v.push(m.clone());
            v.len() - 1
        })
    };
    let note_menu = |menus: &mut Vec<Menu>, acts: &mut Vec<Act>, m: &Menu| -> usize {
        for f in m.acts() {
            if !acts.contains(f) {
                acts.push(f.clone());
            }
        }
        intern(menus, m)
    };
    for (h, m) in data.blocks.keys() {
        for st in h.steps() {
            note_menu(&mut menu_ids, &mut act_ids, &st.menu);
        }
        note_menu(&mut menu_ids, &mut act_ids, m);
        if !hist_ids.contains(h) {
            hist_ids.push(h.clone());
        }
    }
    let aid = |f: &Act| format!("f{}", act_ids.iter().position(|x| x == f).unwrap());
    let mid = |m: &Menu| format!("A{}", menu_ids.iter().position(|x| x == m).unwrap());
    let hid = |h: &History| format!("h{}", hist_ids.iter().position(|x| x == h).unwrap());

    let side = DatasetSidecar {
        periods: data.states.iter().map(|l| l.as_slice().to_vec()).collect(),
        acts: act_ids.iter().map(|f| (aid(f), ActSpec::of(f))).collect(),
        menus: menu_ids.iter().map(|m| (mid(m), m.acts().iter().map(aid).collect())).collect(),
        histories: hist_ids[1..]
            .iter()
            .map(|h| {
                let steps = h
                    .steps()
                    .iter()
                    .enumerate()
                    .map(|(t, st)| ObservedStep { menu: mid(&st.menu), act: aid(&st.act), state: data.states[t].label(st.state).to_string() })
                    .collect();
                (hid(h), steps)
            })
            .collect(),
    };
    save_document(&side, &sidecar_path(csv_path))?;

    let mut w = csv::Writer::from_path(csv_path).map_err(|e| Error::Io(format!("{}: {e}", csv_path.display())))?;
    for ((h, m), counts) in &data.blocks {
        for (i, r) in counts.iter().enumerate() {
            for (s, &c) in r.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let row = DatasetRow { history_id: hid(h), period: h.len(), menu_id: mid(m), act_id: aid(&m.acts()[i]), state_id: data.states[h.len()].label(s).to_string(), count: c };
                w.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// A reported number and the operation that produced it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportValue {
    pub name: String,
    pub operation: String,
    pub value: Vec<String>,
}

impl ReportValue {
    pub fn scalar(name: &str, operation: &str, x: &Q) -> Self {
        ReportValue { name: name.into(), operation: operation.into(), value: vec![fmt_q(x)] }
    }

    pub fn vector(name: &str, operation: &str, xs: &[Q]) -> Self {
        ReportValue { name: name.into(), operation: operation.into(), value: xs.iter().map(fmt_q).collect() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    /// Input files and parameters, so every value can be recomputed.
    pub inputs: BTreeMap<String, String>,
    /// Human-readable lines, also printed by the CLI.
    pub summary: Vec<String>,
    pub verdicts: Vec<Verdict>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub battery: Vec<Vec<ActSpec>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<ReportValue>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub provenance: Vec<Provenance>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Report { command: command.into(), ..Default::default() }
    }

    pub fn input(mut self, key: &str, value: impl ToString) -> Self {
        self.inputs.insert(key.into(), value.to_string());
        self
    }

    pub fn with_battery(mut self, menus: &[Menu]) -> Self {
        self.battery = BatteryFile::of(menus).menus;
        self
    }

    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(Verdict::passed)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map(|s| s + "\n").map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_json()?)
    }
}

/// Plot-ready (a, F(a)) samples, one block per labelled cdf.
pub fn write_cdf_csv(path: &Path, cdfs: &[(String, StepCdf)], n: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    w.write_record(["menu", "a", "F"]).map_err(|e| Error::Io(e.to_string()))?;
    for (name, f) in cdfs {
        for (a, v) in f.samples(n) {
            w.write_record([name.clone(), a.to_string(), v.to_string()]).map_err(|e| Error::Io(e.to_string()))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{hire_single, random_dynamic_model, random_utility, wsd_model, DynShape};
    use crate::preferences::{bellman_build, gl_build, EvolvingPrimitives, GlPrimitives};
    use crate::rational::{q, qi};
    use crate::static_model::simulate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn round_trip(m: &AnyModel, ext: &str) -> AnyModel {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(format!("m.{ext}"));
        save_model(m, &p).unwrap();
        load_model(&p).unwrap()
    }

    #[test]
    fn static_models_round_trip() {
        for m in [hire_single(q(3, 4)), wsd_model()] {
            let m = AnyModel::Static(m);
            assert_eq!(round_trip(&m, "toml"), m);
            assert_eq!(round_trip(&m, "json"), m);
        }
    }

    #[test]
    fn dynamic_models_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let m = AnyModel::Dynamic(random_dynamic_model(&mut rng, DynShape::default()));
            assert_eq!(round_trip(&m, "toml"), m);
            assert_eq!(round_trip(&m, "json"), m);
        }
    }

    #[test]
    fn evolving_and_gl_models_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let base = random_dynamic_model(&mut rng, DynShape::default());
        let nz = base.prizes().len();
        let fel: Vec<Vec<Vec<Q>>> = base.levels().iter().map(|l| l.iter().map(|_| random_utility(&mut rng, nz).prize_vector(nz)).collect()).collect();
        let ev = bellman_build(&EvolvingPrimitives::new(base.clone(), fel, q(9, 10)).unwrap()).unwrap();
        let last = base.levels().last().unwrap().iter().map(|_| random_utility(&mut rng, nz).prize_vector(nz)).collect();
        let gl = bellman_build(&gl_build(&GlPrimitives { skeleton: base, terminal: last, delta: q(1, 2) }).unwrap()).unwrap();
        for m in [ev, gl] {
            let m = AnyModel::Dynamic(m);
            assert_eq!(round_trip(&m, "toml"), m);
        }
    }

    const BAD_BELIEF: &str = r#"
class = "drseu"
prizes = ["x", "y"]
periods = [["a", "b"]]

[[nodes]]
period = 0
belief = ["1/3", "1/3"]
state = "a"
prob = "1"
utility = ["0", "1"]
"#;

    #[test]
    fn bad_belief_names_the_node() {
        let e = parse_document::<ModelSpecFile>(BAD_BELIEF, Format::Toml).unwrap().build().unwrap_err();
        match e {
            Error::Invariant { invariant, detail } => {
                assert_eq!(invariant, "simplex membership");
                assert!(detail.contains("node (0,0)") && detail.contains("2/3"), "{detail}");
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn gl_without_delta_is_a_schema_error() {
        let text = BAD_BELIEF.replace("drseu", "gl").replace("[\"1/3\", \"1/3\"]", "[\"1/2\", \"1/2\"]").replace("utility = [\"0\", \"1\"]", "felicity = [\"-1/2\", \"1/2\"]");
        let e = parse_document::<ModelSpecFile>(&text, Format::Toml).unwrap().build().unwrap_err();
        assert!(matches!(e, Error::Schema(_)), "{e:?}");
    }

    #[test]
    fn parse_errors_carry_a_position() {
        let e = parse_document::<ModelSpecFile>("class = \n", Format::Toml).unwrap_err();
        assert!(matches!(&e, Error::Parse(m) if m.contains("line 1")), "{e:?}");
        let e = parse_document::<ModelSpecFile>("{\"class\": 3}", Format::Json).unwrap_err();
        assert!(matches!(&e, Error::Parse(m) if m.contains("column")), "{e:?}");
    }

    #[test]
    fn dataset_round_trip_and_tables() {
        let m = hire_single(q(3, 4));
        let (hire, _) = crate::fixtures::hire_acts();
        let menu = crate::fixtures::hire_menu();
        let block = simulate(&m, &menu, 400, 7).unwrap();
        let mut data = Dataset::new(vec![m.states().clone()]).unwrap();
        data.add(History::empty(), menu.clone(), block.counts.clone()).unwrap();
        let single = Menu::singleton(hire);
        data.add(History::empty(), single.clone(), vec![vec![3, 5]]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        save_dataset(&data, &p).unwrap();
        let back = load_dataset(&p).unwrap();
        assert_eq!(back, data);
        let table = back.static_table().unwrap();
        use crate::static_model::ChoiceOracle;
        assert_eq!(table.choice(&single).unwrap(), vec![vec![q(3, 8), q(5, 8)]]);
    }

    #[test]
    fn dynamic_dataset_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = random_dynamic_model(&mut rng, DynShape::default());
        let root = m.dims().probe_menus(0).remove(0);
        let paths = crate::dynamic::simulate_paths(&m, &root, 200, 3).unwrap();
        let mut data = Dataset::new(m.state_spaces().to_vec()).unwrap();
        let sizes: Vec<usize> = m.state_spaces().iter().map(Labels::len).collect();
        for (h, menu, c) in paths.step_counts(&sizes) {
            data.add(h, menu, c).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("paths.csv");
        save_dataset(&data, &p).unwrap();
        assert_eq!(load_dataset(&p).unwrap(), data);
        assert!(!data.is_static());
        data.dynamic_table().unwrap();
    }

    #[test]
    fn zero_total_block_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.csv");
        fs::write(&p, "history_id,period,menu_id,act_id,state_id,count\nh0,0,A,f,a,0\n").unwrap();
        fs::write(sidecar_path(&p), r#"{"periods": [["a"]], "acts": {"f": [0]}, "menus": {"A": ["f"]}}"#).unwrap();
        assert!(matches!(load_dataset(&p), Err(Error::DataInconsistency(_))));
        fs::write(&p, "history_id,period,menu_id,act_id,state_id,count\nh0,0,A,f,a,-2\n").unwrap();
        assert!(matches!(load_dataset(&p), Err(Error::Parse(_))));
    }

    #[test]
    fn utility_spec_prefers_vectors() {
        let u = Utility::over_prizes(vec![qi(0), q(1, 2)]);
        assert_eq!(UtilitySpec::of(&u, 2), UtilitySpec::Prizes(vec![qi(0), q(1, 2)]));
        let t = Utility::table(BTreeMap::from([(Outcome::Prize(1), qi(1))]), qi(0));
        assert!(matches!(UtilitySpec::of(&t, 2), UtilitySpec::Table(_)));
    }
}
