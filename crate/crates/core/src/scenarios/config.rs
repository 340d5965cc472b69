//! TOML run configuration.
//!
//! ```toml
//! [scenario]
//! name = "epr_bell"          # stern_gerlach | epr_bell | sdc_chain | weak_sweep
//! trials = 10000
//! seed = 42
//!
//! [scenario.params]          # scenario-specific, all optional
//! alice_angles = [0.0, 90.0] # degrees
//!
//! [engine]
//! theory = "endqt"           # grw | mwi | relational | endqt
//!
//! [engine.endqt]             # optional subtable named after the theory
//! initiators = [{ label = "L_A", kind = "A" }]
//!
//! [output]                   # optional
//! dir = "out"
//! format = "csv"             # csv | json
//! prefix = "bell"
//! ```
//!
//! Every problem found is reported, each prefixed with its key path.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use super::{Arm, EprBellParams, Scenario, SdcChainParams, SternGerlachParams, WeakSweepParams};
use crate::decomodels::ScheduleEntry;
use crate::differentiation::StabilityParams;
use crate::error::{Error, Result};
use crate::theories::{EnDqtParams, GrwParams, InitiatorKind, MwiVariant, RelationalVariant, TheoryEngine};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format \"{other}\" (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutputSettings {
    pub dir: Option<PathBuf>,
    pub format: OutputFormat,
    /// File name stem for every output; defaults to the scenario name.
    pub prefix: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub scenario: Scenario,
    pub engine: TheoryEngine,
    pub seed: u64,
    pub trials: usize,
    pub output: OutputSettings,
}

/// Parses and validates a configuration.
pub fn load_config(text: &str) -> Result<Config> {
    from_table(&parse_table(text)?)
}

pub fn parse_table(text: &str) -> Result<Table> {
    text.parse::<Table>()
        .map_err(|e| Error::Config(vec![format!("syntax: {}", e.message())]))
}

/// Replaces the value at a dotted key path, creating tables on the way.
pub fn set_path(table: &mut Table, path: &str, value: Value) -> Result<()> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(vec![format!("bad key path \"{path}\"")]));
    }
    let (last, parents) = keys.split_last().expect("split yields at least one key");
    let mut cur = table;
    for k in parents {
        let next = cur.entry(k.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = next
            .as_table_mut()
            .ok_or_else(|| Error::Config(vec![format!("{path}: '{k}' is not a table")]))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

pub fn from_table(root: &Table) -> Result<Config> {
    let mut c = Checker::default();
    c.known(root, "", &["scenario", "engine", "output"]);

    let scenario_t = c.table(root, "", "scenario", true);
    let engine_t = c.table(root, "", "engine", true);
    let output_t = c.table(root, "", "output", false);

    let mut scenario = None;
    let (mut trials, mut seed) = (0, 0);
    if let Some(st) = scenario_t {
        c.known(st, "scenario", &["name", "trials", "seed", "params", "schedule"]);
        trials = c.usize(st, "scenario", "trials").unwrap_or(1);
        if trials == 0 {
            c.err("scenario.trials must be >= 1");
        }
        seed = c.u64(st, "scenario", "seed").unwrap_or(0);
        let params = c.table(st, "scenario", "params", false).cloned().unwrap_or_default();
        scenario = match c.string(st, "scenario", "name", true).as_deref() {
            Some("stern_gerlach") => Some(Scenario::SternGerlachInterferometer(c.stern_gerlach(&params))),
            Some("epr_bell") => Some(Scenario::EprBell(c.epr_bell(&params))),
            Some("sdc_chain") => Some(Scenario::SdcChain(c.sdc_chain(&params, st.get("schedule")))),
            Some("weak_sweep") => Some(Scenario::WeakMeasurementSweep(c.weak(&params))),
            Some(other) => {
                c.err(format!(
                    "scenario.name: unknown scenario \"{other}\" (expected stern_gerlach, epr_bell, sdc_chain or weak_sweep)"
                ));
                None
            }
            None => None,
        };
        if st.contains_key("schedule") && !matches!(scenario, Some(Scenario::SdcChain(_)) | None) {
            c.err("scenario.schedule is only used by sdc_chain");
        }
    }

    let engine = engine_t.and_then(|et| c.engine(et));

    let mut output = OutputSettings::default();
    if let Some(ot) = output_t {
        c.known(ot, "output", &["dir", "format", "prefix"]);
        output.dir = c.string(ot, "output", "dir", false).map(PathBuf::from);
        if let Some(f) = c.string(ot, "output", "format", false) {
            match f.parse() {
                Ok(f) => output.format = f,
                Err(e) => c.err(format!("output.format: {e}")),
            }
        }
        if let Some(p) = c.string(ot, "output", "prefix", false) {
            if p.is_empty() || p.contains(['/', '\\']) {
                c.err("output.prefix must be a non-empty file name stem");
            }
            output.prefix = p;
        }
    }

    if let (Some(s), Some(e)) = (&scenario, &engine) {
        if let Err(Error::Config(errs)) = s.validate() {
            c.errs.extend(errs.into_iter().map(|m| format!("scenario.params: {m}")));
        }
        if let Err(Error::Config(errs)) = s.check_engine(e) {
            c.errs.extend(errs);
        }
    }
    if !c.errs.is_empty() {
        return Err(Error::Config(c.errs));
    }
    let scenario = scenario.expect("no errors implies a scenario");
    if output.prefix.is_empty() {
        output.prefix = scenario.name().to_string();
    }
    Ok(Config {
        scenario,
        engine: engine.expect("no errors implies an engine"),
        seed,
        trials,
        output,
    })
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

#[derive(Default)]
struct Checker {
    errs: Vec<String>,
}

impl Checker {
    fn err(&mut self, msg: impl Into<String>) {
        self.errs.push(msg.into());
    }

    fn known(&mut self, t: &Table, at: &str, keys: &[&str]) {
        for k in t.keys() {
            if !keys.contains(&k.as_str()) {
                self.err(format!("{}: unknown key", join(at, k)));
            }
        }
    }

    fn missing(&mut self, at: &str, key: &str) {
        self.err(format!("{}: missing required key", join(at, key)));
    }

    fn wrong(&mut self, at: &str, key: &str, want: &str) {
        self.err(format!("{}: expected {want}", join(at, key)));
    }

    fn table<'a>(&mut self, t: &'a Table, at: &str, key: &str, required: bool) -> Option<&'a Table> {
        match t.get(key) {
            None => {
                if required {
                    self.missing(at, key);
                }
                None
            }
            Some(Value::Table(x)) => Some(x),
            Some(_) => {
                self.wrong(at, key, "a table");
                None
            }
        }
    }

    fn string(&mut self, t: &Table, at: &str, key: &str, required: bool) -> Option<String> {
        match t.get(key) {
            None => {
                if required {
                    self.missing(at, key);
                }
                None
            }
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.wrong(at, key, "a string");
                None
            }
        }
    }

    fn f64(&mut self, t: &Table, at: &str, key: &str) -> Option<f64> {
        match t.get(key)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                self.wrong(at, key, "a number");
                None
            }
        }
    }

    fn positive(&mut self, t: &Table, at: &str, key: &str) -> Option<f64> {
        let v = self.f64(t, at, key)?;
        if v > 0.0 && v.is_finite() {
            Some(v)
        } else {
            self.err(format!("{} must be > 0", join(at, key)));
            None
        }
    }

    fn u64(&mut self, t: &Table, at: &str, key: &str) -> Option<u64> {
        match t.get(key)? {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            _ => {
                self.wrong(at, key, "a non-negative integer");
                None
            }
        }
    }

    fn usize(&mut self, t: &Table, at: &str, key: &str) -> Option<usize> {
        self.u64(t, at, key).map(|v| v as usize)
    }

    fn numbers(&mut self, t: &Table, at: &str, key: &str) -> Option<Vec<f64>> {
        let Value::Array(xs) = t.get(key)? else {
            self.wrong(at, key, "an array of numbers");
            return None;
        };
        let out: Option<Vec<f64>> = xs
            .iter()
            .map(|v| match v {
                Value::Float(x) => Some(*x),
                Value::Integer(i) => Some(*i as f64),
                _ => None,
            })
            .collect();
        if out.is_none() {
            self.wrong(at, key, "an array of numbers");
        }
        out
    }

    fn pair(&mut self, t: &Table, at: &str, key: &str) -> Option<[f64; 2]> {
        let xs = self.numbers(t, at, key)?;
        match xs.as_slice() {
            [a, b] => Some([*a, *b]),
            _ => {
                self.wrong(at, key, "exactly two numbers");
                None
            }
        }
    }

    fn stern_gerlach(&mut self, t: &Table) -> SternGerlachParams {
        let at = "scenario.params";
        self.known(
            t,
            at,
            &[
                "detector_arm",
                "spin_up_weight",
                "detector_size",
                "magnet_time",
                "detector_time",
                "hold",
                "dt",
            ],
        );
        let mut p = SternGerlachParams::default();
        match self.string(t, at, "detector_arm", false).as_deref() {
            Some("up") => p.detector_arm = Arm::Up,
            Some("down") => p.detector_arm = Arm::Down,
            Some(other) => self.err(format!(
                "{at}.detector_arm: expected \"up\" or \"down\", got \"{other}\""
            )),
            None => {}
        }
        if let Some(w) = self.f64(t, at, "spin_up_weight") {
            p.spin_up_weight = w;
        }
        if let Some(n) = self.usize(t, at, "detector_size") {
            p.detector_size = n;
        }
        for (key, slot) in [
            ("magnet_time", &mut p.magnet_time),
            ("detector_time", &mut p.detector_time),
            ("hold", &mut p.hold),
            ("dt", &mut p.dt),
        ] {
            if let Some(v) = self.positive(t, at, key) {
                *slot = v;
            }
        }
        p
    }

    fn epr_bell(&mut self, t: &Table) -> EprBellParams {
        let at = "scenario.params";
        self.known(
            t,
            at,
            &["alice_angles", "bob_angles", "phase", "apparatus_size", "hold"],
        );
        let mut p = EprBellParams::default();
        if let Some(a) = self.pair(t, at, "alice_angles") {
            p.alice_angles = a.map(f64::to_radians);
        }
        if let Some(b) = self.pair(t, at, "bob_angles") {
            p.bob_angles = b.map(f64::to_radians);
        }
        if let Some(ph) = self.f64(t, at, "phase") {
            p.phase = ph;
        }
        if let Some(n) = self.usize(t, at, "apparatus_size") {
            p.apparatus_size = n;
        }
        if let Some(h) = self.positive(t, at, "hold") {
            p.hold = h;
        }
        p
    }

    fn sdc_chain(&mut self, t: &Table, schedule: Option<&Value>) -> SdcChainParams {
        let at = "scenario.params";
        self.known(t, at, &["s1_amplitudes", "s2_amplitudes", "sizes", "hold", "dt"]);
        let mut p = SdcChainParams::default();
        for (key, slot) in [
            ("s1_amplitudes", &mut p.s1_amplitudes),
            ("s2_amplitudes", &mut p.s2_amplitudes),
        ] {
            if let Some(a) = self.pair(t, at, key) {
                *slot = a;
            }
        }
        if let Some(sizes) = self.table(t, at, "sizes", false) {
            let mut out = BTreeMap::new();
            for k in sizes.keys() {
                if let Some(n) = self.usize(sizes, &join(at, "sizes"), k) {
                    out.insert(k.clone(), n);
                }
            }
            p.sizes = out;
        }
        if let Some(h) = self.positive(t, at, "hold") {
            p.hold = h;
        }
        if let Some(dt) = self.positive(t, at, "dt") {
            p.dt = dt;
        }
        match schedule {
            None => {}
            Some(Value::Array(entries)) => {
                let mut out = Vec::new();
                for (i, v) in entries.iter().enumerate() {
                    let at = format!("scenario.schedule[{i}]");
                    let Value::Table(e) = v else {
                        self.err(format!("{at}: expected a table"));
                        continue;
                    };
                    self.known(e, &at, &["start", "end", "decohered", "environment", "tag", "strength"]);
                    let num = |c: &mut Self, k: &str| {
                        let v = c.f64(e, &at, k);
                        if v.is_none() && !e.contains_key(k) {
                            c.missing(&at, k);
                        }
                        v
                    };
                    let (start, end, strength) = (num(self, "start"), num(self, "end"), num(self, "strength"));
                    let a = self.string(e, &at, "decohered", true);
                    let b = self.string(e, &at, "environment", true);
                    let tag = self.string(e, &at, "tag", true);
                    if let (Some(s), Some(en), Some(g), Some(a), Some(b), Some(tag)) = (start, end, strength, a, b, tag)
                    {
                        out.push(ScheduleEntry::new(s, en, &a, &b, &tag, g));
                    }
                }
                p.schedule = out;
            }
            Some(_) => self.err("scenario.schedule: expected an array of tables"),
        }
        p
    }

    fn weak(&mut self, t: &Table) -> WeakSweepParams {
        let at = "scenario.params";
        self.known(t, at, &["strengths"]);
        let mut p = WeakSweepParams::default();
        if let Some(s) = self.numbers(t, at, "strengths") {
            p.strengths = s;
        }
        p
    }

    fn engine(&mut self, et: &Table) -> Option<TheoryEngine> {
        let at = "engine";
        let theory = self.string(et, at, "theory", true)?;
        let allowed: &[&str] = match theory.as_str() {
            "grw" | "mwi" | "relational" | "endqt" => &["theory", theory.as_str()],
            other => {
                self.err(format!(
                    "engine.theory: unknown theory \"{other}\" (expected grw, mwi, relational or endqt)"
                ));
                return None;
            }
        };
        self.known(et, at, allowed);
        let sub = self.table(et, at, &theory, false).cloned().unwrap_or_default();
        let at = format!("engine.{theory}");
        match theory.as_str() {
            "grw" => {
                self.known(&sub, &at, &["lambda", "sigma"]);
                let lambda = if sub.contains_key("lambda") {
                    self.positive(&sub, &at, "lambda")
                } else {
                    Some(1e-2)
                };
                let sigma = if sub.contains_key("sigma") {
                    self.positive(&sub, &at, "sigma")
                } else {
                    Some(0.25)
                };
                GrwParams::new(lambda?, sigma?).ok().map(TheoryEngine::Grw)
            }
            "mwi" => {
                self.known(&sub, &at, &["variant"]);
                match self.string(&sub, &at, "variant", false).as_deref() {
                    None | Some("quasi_local") => Some(TheoryEngine::Mwi(MwiVariant::QuasiLocal)),
                    Some("local") => Some(TheoryEngine::Mwi(MwiVariant::Local)),
                    Some("global") => Some(TheoryEngine::Mwi(MwiVariant::Global)),
                    Some(other) => {
                        self.err(format!(
                            "{at}.variant: unknown variant \"{other}\" (expected quasi_local, local or global)"
                        ));
                        None
                    }
                }
            }
            "relational" => {
                self.known(&sub, &at, &["variant"]);
                match self.string(&sub, &at, "variant", false).as_deref() {
                    None | Some("rqm") => Some(TheoryEngine::Relational(RelationalVariant::Rqm)),
                    Some("single_world") => Some(TheoryEngine::Relational(RelationalVariant::SingleWorld)),
                    Some(other) => {
                        self.err(format!(
                            "{at}.variant: unknown variant \"{other}\" (expected rqm or single_world)"
                        ));
                        None
                    }
                }
            }
            _ => self.endqt(&sub, &at).map(TheoryEngine::EnDqt),
        }
    }

    fn endqt(&mut self, t: &Table, at: &str) -> Option<EnDqtParams> {
        self.known(
            t,
            at,
            &[
                "initiators",
                "seeds",
                "composites",
                "commute_tol",
                "eps",
                "window",
                "size_threshold",
            ],
        );
        let before = self.errs.len();
        let mut p = EnDqtParams::default();
        if let Some(v) = t.get("initiators") {
            for (i, item) in v.as_array().map(Vec::as_slice).unwrap_or_default().iter().enumerate() {
                let here = format!("{at}.initiators[{i}]");
                let Some(e) = item.as_table() else {
                    self.err(format!("{here}: expected {{ label, kind }}"));
                    continue;
                };
                self.known(e, &here, &["label", "kind"]);
                let label = self.string(e, &here, "label", true);
                let kind = match self.string(e, &here, "kind", true).as_deref() {
                    Some("A") => Some(InitiatorKind::A),
                    Some("B") => Some(InitiatorKind::B),
                    Some(other) => {
                        self.err(format!("{here}.kind: expected \"A\" or \"B\", got \"{other}\""));
                        None
                    }
                    None => None,
                };
                if let (Some(l), Some(k)) = (label, kind) {
                    p.initiators.push((l, k));
                }
            }
            if !v.is_array() {
                self.wrong(at, "initiators", "an array");
            }
        }
        if let Some(v) = t.get("seeds") {
            match v.as_array() {
                Some(xs) => {
                    for (i, item) in xs.iter().enumerate() {
                        match item.as_array().map(Vec::as_slice) {
                            Some([Value::String(h), Value::String(g)]) => p.seeds.push((h.clone(), g.clone())),
                            _ => self.err(format!("{at}.seeds[{i}]: expected [holder, target]")),
                        }
                    }
                }
                None => self.wrong(at, "seeds", "an array of [holder, target] pairs"),
            }
        }
        if let Some(v) = t.get("composites") {
            for (i, item) in v.as_array().map(Vec::as_slice).unwrap_or_default().iter().enumerate() {
                let here = format!("{at}.composites[{i}]");
                let Some(e) = item.as_table() else {
                    self.err(format!("{here}: expected {{ label, parts }}"));
                    continue;
                };
                self.known(e, &here, &["label", "parts"]);
                let label = self.string(e, &here, "label", true);
                let parts: Option<Vec<String>> = match e.get("parts") {
                    Some(Value::Array(xs)) => xs.iter().map(|x| x.as_str().map(str::to_string)).collect(),
                    _ => None,
                };
                if parts.is_none() {
                    self.wrong(&here, "parts", "an array of factor labels");
                }
                if let (Some(l), Some(ps)) = (label, parts) {
                    p.composites.push((l, ps));
                }
            }
            if !v.is_array() {
                self.wrong(at, "composites", "an array");
            }
        }
        let mut stability = StabilityParams::default();
        if let Some(x) = self.positive(t, at, "commute_tol") {
            p.commute_tol = x;
        }
        if let Some(x) = self.positive(t, at, "eps") {
            stability.eps = x;
        }
        if let Some(x) = self.f64(t, at, "window") {
            if (0.0..=1.0).contains(&x) {
                stability.window = x;
            } else {
                self.err(format!("{at}.window must be in [0, 1]"));
            }
        }
        if let Some(n) = self.usize(t, at, "size_threshold") {
            stability.size_threshold = n;
        }
        p.stability = stability;
        if self.errs.len() == before {
            if let Err(e) = crate::theories::DcLedger::from_params(&p) {
                self.err(format!("{at}: {e}"));
            }
        }
        Some(p)
    }
}
