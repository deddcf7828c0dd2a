//! Run configuration: defaults, the optional `MVL_CONFIG` file, and
//! command-line overrides, merged in that order of increasing precedence.

use mvl_core::Config;
use serde::{Deserialize, Serialize};

/// The resolved run configuration every command executes under. This is
/// what the JSON report echoes back, so two runs with equal `RunConfig`
/// (and equal inputs) must produce identical output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub int_min: i64,
    pub int_max: i64,
    pub refs: u32,
    pub gran: i64,
    pub determinize: bool,
    pub seed: u64,
    /// Worker count: an execution detail like timing, excluded from the
    /// report so parallelism degree cannot change report bytes.
    #[serde(skip)]
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let c = Config::default();
        RunConfig {
            int_min: c.int_min,
            int_max: c.int_max,
            refs: c.refs,
            gran: c.gran,
            determinize: c.determinize,
            seed: 0,
            jobs: 1,
        }
    }
}

impl RunConfig {
    pub fn core(&self) -> Config {
        Config {
            int_min: self.int_min,
            int_max: self.int_max,
            refs: self.refs,
            gran: self.gran,
            determinize: self.determinize,
        }
    }
}

/// Partial settings from the config file or command line; `None` means
/// "inherit from the layer below".
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Integer range as "A..B".
    pub ints: Option<String>,
    pub refs: Option<u32>,
    pub gran: Option<i64>,
    pub determinize: Option<bool>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    /// Per-command settings that may also live in the config file.
    pub bound: Option<usize>,
    pub mode: Option<String>,
    pub budget: Option<usize>,
}

impl Overrides {
    /// Later layers win field by field.
    pub fn layered(mut self, over: Overrides) -> Overrides {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(ints, refs, gran, determinize, seed, jobs, bound, mode, budget);
        self
    }
}

/// Parse an "A..B" integer range.
pub fn parse_ints(s: &str) -> Result<(i64, i64), String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("bad integer range '{s}', expected A..B"))?;
    let lo: i64 = a.trim().parse().map_err(|_| format!("bad range bound '{a}'"))?;
    let hi: i64 = b.trim().parse().map_err(|_| format!("bad range bound '{b}'"))?;
    if lo > hi {
        return Err(format!("empty integer range '{s}'"));
    }
    Ok((lo, hi))
}

/// Settings a command runs with after merging all layers.
#[derive(Clone, Debug)]
pub struct Settings {
    pub run: RunConfig,
    pub bound: Option<usize>,
    pub mode: Option<String>,
    pub budget: Option<usize>,
}

/// Read the `MVL_CONFIG` file if the environment variable is set.
pub fn file_overrides() -> Result<Overrides, String> {
    let Ok(path) = std::env::var("MVL_CONFIG") else {
        return Ok(Overrides::default());
    };
    if path.is_empty() {
        return Ok(Overrides::default());
    }
    let text = std::fs::read_to_string(&path)
        .map_err(|e| format!("cannot read MVL_CONFIG file '{path}': {e}"))?;
    toml::from_str(&text).map_err(|e| format!("bad MVL_CONFIG file '{path}': {e}"))
}

/// Merge defaults, config file, and command-line flags.
pub fn resolve(base: RunConfig, flags: Overrides) -> Result<Settings, String> {
    let merged = file_overrides()?.layered(flags);
    let mut run = base;
    if let Some(ints) = &merged.ints {
        let (lo, hi) = parse_ints(ints)?;
        run.int_min = lo;
        run.int_max = hi;
    }
    if let Some(r) = merged.refs {
        run.refs = r;
    }
    if let Some(g) = merged.gran {
        if g < 1 {
            return Err(format!("granularity must be at least 1, got {g}"));
        }
        run.gran = g;
    }
    if let Some(d) = merged.determinize {
        run.determinize = d;
    }
    if let Some(s) = merged.seed {
        run.seed = s;
    }
    if let Some(j) = merged.jobs {
        run.jobs = j.max(1);
    }
    Ok(Settings { run, bound: merged.bound, mode: merged.mode, budget: merged.budget })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ints_range_parses() {
        assert_eq!(parse_ints("0..2"), Ok((0, 2)));
        assert_eq!(parse_ints("-1..1"), Ok((-1, 1)));
        assert!(parse_ints("2..0").is_err());
        assert!(parse_ints("07").is_err());
        assert!(parse_ints("a..b").is_err());
    }

    #[test]
    fn layering_later_fields_win() {
        let file = Overrides { ints: Some("0..1".into()), refs: Some(3), ..Default::default() };
        let flags = Overrides { refs: Some(1), seed: Some(7), ..Default::default() };
        let merged = file.layered(flags);
        assert_eq!(merged.ints.as_deref(), Some("0..1"));
        assert_eq!(merged.refs, Some(1));
        assert_eq!(merged.seed, Some(7));
    }

    #[test]
    fn toml_overrides_parse() {
        let o: Overrides = toml::from_str(
            "ints = \"0..1\"\nrefs = 1\ngran = 2\ndeterminize = false\nseed = 9\njobs = 2\nbound = 3\nmode = \"structural\"\n",
        )
        .expect("parses");
        let s = {
            // Bypass the environment: layer directly over defaults.
            let mut run = RunConfig::default();
            let merged = Overrides::default().layered(o);
            if let Some(i) = &merged.ints {
                let (lo, hi) = parse_ints(i).unwrap();
                run.int_min = lo;
                run.int_max = hi;
            }
            run.refs = merged.refs.unwrap();
            run.gran = merged.gran.unwrap();
            run.determinize = merged.determinize.unwrap();
            run
        };
        assert_eq!((s.int_min, s.int_max, s.refs, s.gran, s.determinize), (0, 1, 1, 2, false));
    }

    #[test]
    fn unknown_config_keys_rejected() {
        assert!(toml::from_str::<Overrides>("granularity = 4\n").is_err());
    }

    #[test]
    fn jobs_not_serialized() {
        let run = RunConfig { jobs: 8, ..RunConfig::default() };
        let v = serde_json::to_value(&run).unwrap();
        assert!(v.get("jobs").is_none());
        assert!(v.get("seed").is_some());
    }
}
