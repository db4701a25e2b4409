//! Run configuration: flat `key = value` lines grouped under `[section]`
//! headers. `#` starts a comment. Unknown sections, unknown keys and
//! duplicates are errors.
//!
//! ```text
//! seed = 0
//!
//! [manifold]
//! kind = sphere          # sphere | stiefel
//! n = 50
//!
//! [problem]
//! mu = 0.1
//! spectrum = harmonic    # harmonic | power:<alpha> ; or matrix = <file>
//! spectrum_seed = 7
//!
//! [algorithm]
//! mode = parallel_transport, projection
//! grad_source = first_order
//! rounds = 100000
//! delta = 0.1
//!
//! [output]
//! dir = out
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::ManifoldDescriptor;
use crate::oracles::Spectrum;
use crate::optimizer::{TracePolicy, TransportMode};

pub const DEFAULT_WARMUP_DRAWS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum MatrixSource {
    File(PathBuf),
    Generated { spectrum: Spectrum, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemSpec {
    pub source: MatrixSource,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GradSourceSpec {
    FirstOrder,
    ZerothOrder { delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Budget {
    /// Schedule derived from `N` and `delta`.
    Rounds { rounds: usize, delta: f64 },
    /// Fixed `K`, `T`, `D`, optionally `eta`.
    Explicit {
        epochs: usize,
        iterations: usize,
        clip_radius: f64,
        step_size: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GradBound {
    Warmup,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgorithmSpec {
    pub modes: Vec<TransportMode>,
    pub source: GradSourceSpec,
    pub budget: Budget,
    pub grad_bound: GradBound,
    pub warmup_draws: usize,
    pub target_epsilon: Option<f64>,
    pub lipschitz: Option<f64>,
    pub curvature_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub label: String,
    pub seed: u64,
    pub manifold: ManifoldDescriptor,
    pub problem: ProblemSpec,
    pub algorithm: AlgorithmSpec,
    pub output_dir: PathBuf,
    pub trace_policy: TracePolicy,
    pub record_wallclock: bool,
    /// SHA-256 of the configuration text, hex encoded.
    pub hash: String,
}

const KEYS: &[(&str, &[&str])] = &[
    ("", &["seed", "label"]),
    ("manifold", &["kind", "n", "p"]),
    ("problem", &["kind", "mu", "matrix", "spectrum", "spectrum_seed"]),
    (
        "algorithm",
        &[
            "mode",
            "grad_source",
            "zo_delta",
            "rounds",
            "delta",
            "epochs",
            "iterations",
            "clip_radius",
            "step_size",
            "grad_bound",
            "warmup_draws",
            "target_epsilon",
            "lipschitz",
            "curvature_bound",
        ],
    ),
    ("output", &["dir", "trace_policy", "record_wallclock"]),
];

struct Entry {
    value: String,
    line: usize,
    used: bool,
}

struct Table {
    source: String,
    entries: BTreeMap<(String, String), Entry>,
}

impl Table {
    fn parse(source: &str, text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let loc = || format!("{source}:{line}");
            let l = raw.split('#').next().unwrap_or("").trim();
            if l.is_empty() {
                continue;
            }
            if let Some(rest) = l.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::parse(loc(), format!("malformed section header {l:?}")))?
                    .trim();
                if !KEYS.iter().any(|(s, _)| *s == name) || name.is_empty() {
                    return Err(Error::parse(loc(), format!("unknown section [{name}]")));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = l
                .split_once('=')
                .ok_or_else(|| Error::parse(loc(), format!("expected `key = value`, got {l:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let allowed = KEYS
                .iter()
                .find(|(s, _)| *s == section)
                .map(|(_, keys)| *keys)
                .unwrap_or(&[]);
            if !allowed.contains(&key) {
                let place = if section.is_empty() { "top level".to_string() } else { format!("[{section}]") };
                return Err(Error::parse(loc(), format!("unknown key `{key}` in {place}")));
            }
            if value.is_empty() {
                return Err(Error::parse(loc(), format!("key `{key}` has no value")));
            }
            let slot = (section.clone(), key.to_string());
            if let Some(prev) = entries.get(&slot) {
                let prev: &Entry = prev;
                return Err(Error::parse(loc(), format!("duplicate key `{key}` (first set on line {})", prev.line)));
            }
            entries.insert(
                slot,
                Entry {
                    value: value.to_string(),
                    line,
                    used: false,
                },
            );
        }
        Ok(Table {
            source: source.to_string(),
            entries,
        })
    }

    fn raw(&mut self, section: &str, key: &str) -> Option<(String, String)> {
        let source = &self.source;
        self.entries
            .get_mut(&(section.to_string(), key.to_string()))
            .map(|e| {
                e.used = true;
                (e.value.clone(), format!("{source}:{}", e.line))
            })
    }

    fn get<T: std::str::FromStr>(&mut self, section: &str, key: &str) -> Result<Option<T>> {
        match self.raw(section, key) {
            None => Ok(None),
            Some((v, loc)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::parse(loc, format!("invalid value {v:?} for `{key}`"))),
        }
    }

    fn location(&self, section: &str, key: &str) -> String {
        match self.entries.get(&(section.to_string(), key.to_string())) {
            Some(e) => format!("{}:{}", self.source, e.line),
            None => self.source.clone(),
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn parse_spectrum(v: &str, loc: String) -> Result<Spectrum> {
    if v == "harmonic" {
        return Ok(Spectrum::Harmonic);
    }
    if let Some(a) = v.strip_prefix("power:") {
        let alpha: f64 = a
            .trim()
            .parse()
            .map_err(|_| Error::parse(loc.clone(), format!("invalid power exponent {a:?}")))?;
        return Ok(Spectrum::Power(alpha));
    }
    if let Some(list) = v.strip_prefix("explicit:") {
        let vals = list
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::parse(loc.clone(), format!("invalid eigenvalue list {list:?}")))?;
        return Ok(Spectrum::Explicit(vals));
    }
    Err(Error::parse(loc, format!("unknown spectrum {v:?} (harmonic, power:<alpha>, explicit:<list>)")))
}

fn parse_mode(v: &str, loc: &str) -> Result<TransportMode> {
    match v {
        "parallel_transport" | "pt" => Ok(TransportMode::ParallelTransport),
        "projection" => Ok(TransportMode::Projection),
        other => Err(Error::parse(loc, format!("unknown mode {other:?}"))),
    }
}

fn check_delta(value: f64, key: &str, loc: String) -> Result<()> {
    if !(value > 0.0 && value <= 1.0) {
        return Err(Error::parse(loc, format!("`{key}` = {value} is out of range (0, 1]")));
    }
    Ok(())
}

/// Reads and validates a configuration file. A relative `matrix` path is
/// resolved against the file's directory.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    let mut cfg = parse_config_str(&text, &path.display().to_string(), stem)?;
    if let MatrixSource::File(f) = &mut cfg.problem.source {
        if f.is_relative() {
            if let Some(dir) = path.parent() {
                *f = dir.join(&*f);
            }
        }
    }
    Ok(cfg)
}

/// Parses configuration text; `source` names it in diagnostics and
/// `default_label` applies when no `label` key is given.
pub fn parse_config_str(text: &str, source: &str, default_label: &str) -> Result<RunConfig> {
    let mut t = Table::parse(source, text)?;

    let seed = t.get("", "seed")?.unwrap_or(0u64);
    let label = t.raw("", "label").map(|(v, _)| v).unwrap_or_else(|| default_label.to_string());

    let kind = t.raw("manifold", "kind").map(|(v, _)| v).unwrap_or_else(|| "sphere".into());
    let n: usize = t
        .get("manifold", "n")?
        .ok_or_else(|| Error::parse(source, "missing required key `n` in [manifold]"))?;
    let p: Option<usize> = t.get("manifold", "p")?;
    let manifold = match kind.as_str() {
        "sphere" => {
            if p.is_some() {
                return Err(Error::parse(t.location("manifold", "p"), "`p` applies only to stiefel"));
            }
            if n < 2 {
                return Err(Error::parse(t.location("manifold", "n"), "sphere needs n >= 2"));
            }
            ManifoldDescriptor::Sphere { n }
        }
        "stiefel" => {
            let p = p.ok_or_else(|| Error::parse(source, "stiefel needs `p` in [manifold]"))?;
            if p < 1 || p > n || n * p < 2 {
                return Err(Error::parse(t.location("manifold", "p"), format!("stiefel needs 1 <= p <= n, got n = {n}, p = {p}")));
            }
            ManifoldDescriptor::Stiefel { n, p }
        }
        other => {
            return Err(Error::parse(t.location("manifold", "kind"), format!("unknown manifold kind {other:?}")))
        }
    };

    if let Some((k, loc)) = t.raw("problem", "kind") {
        if k != "sparse_pca" {
            return Err(Error::parse(loc, format!("unknown problem kind {k:?}")));
        }
    }
    let mu = t.get("problem", "mu")?.unwrap_or(0.1f64);
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::parse(t.location("problem", "mu"), format!("mu must be >= 0, got {mu}")));
    }
    let matrix = t.raw("problem", "matrix");
    let spectrum = t.raw("problem", "spectrum");
    let spectrum_seed: Option<u64> = t.get("problem", "spectrum_seed")?;
    let source_spec = match matrix {
        Some((file, loc)) => {
            if spectrum.is_some() || spectrum_seed.is_some() {
                return Err(Error::parse(loc, "`matrix` excludes `spectrum` and `spectrum_seed`"));
            }
            MatrixSource::File(PathBuf::from(file))
        }
        None => MatrixSource::Generated {
            spectrum: match spectrum {
                Some((v, loc)) => parse_spectrum(&v, loc)?,
                None => Spectrum::Harmonic,
            },
            seed: spectrum_seed.unwrap_or(0),
        },
    };

    let modes = match t.raw("algorithm", "mode") {
        None => vec![TransportMode::ParallelTransport],
        Some((v, loc)) => {
            let mut modes = Vec::new();
            for m in v.split(',').map(str::trim) {
                let m = parse_mode(m, &loc)?;
                if modes.contains(&m) {
                    return Err(Error::parse(loc, format!("mode {} listed twice", m.label())));
                }
                modes.push(m);
            }
            modes
        }
    };
    let zo_delta: Option<f64> = t.get("algorithm", "zo_delta")?;
    let source_key = t.raw("algorithm", "grad_source");
    let grad_source = match source_key.as_ref().map(|(v, _)| v.as_str()) {
        None | Some("first_order") => {
            if zo_delta.is_some() {
                return Err(Error::parse(t.location("algorithm", "zo_delta"), "`zo_delta` requires grad_source = zeroth_order"));
            }
            GradSourceSpec::FirstOrder
        }
        Some("zeroth_order") => {
            let delta = zo_delta.unwrap_or(0.01);
            check_delta(delta, "zo_delta", t.location("algorithm", "zo_delta"))?;
            GradSourceSpec::ZerothOrder { delta }
        }
        Some(other) => {
            return Err(Error::parse(
                source_key.as_ref().map(|(_, l)| l.clone()).unwrap_or_default(),
                format!("unknown grad_source {other:?} (first_order or zeroth_order)"),
            ))
        }
    };

    let rounds: Option<usize> = t.get("algorithm", "rounds")?;
    let delta: Option<f64> = t.get("algorithm", "delta")?;
    let epochs: Option<usize> = t.get("algorithm", "epochs")?;
    let iterations: Option<usize> = t.get("algorithm", "iterations")?;
    let clip_radius: Option<f64> = t.get("algorithm", "clip_radius")?;
    let step_size: Option<f64> = t.get("algorithm", "step_size")?;
    if let Some(d) = delta {
        check_delta(d, "delta", t.location("algorithm", "delta"))?;
    }
    let explicit = epochs.is_some() || iterations.is_some() || clip_radius.is_some() || step_size.is_some();
    let budget = match (rounds, explicit) {
        (Some(_), true) => {
            return Err(Error::parse(
                t.location("algorithm", "rounds"),
                "`rounds`/`delta` and `epochs`/`iterations`/`clip_radius`/`step_size` are mutually exclusive",
            ))
        }
        (Some(rounds), false) => Budget::Rounds {
            rounds,
            delta: delta.ok_or_else(|| Error::parse(source, "`rounds` needs `delta` in [algorithm]"))?,
        },
        (None, true) => {
            if delta.is_some() {
                return Err(Error::parse(t.location("algorithm", "delta"), "`delta` is derived as clip_radius * iterations in an explicit schedule"));
            }
            let need = |v: Option<f64>, k: &str| v.ok_or_else(|| Error::parse(source, format!("explicit schedule needs `{k}`")));
            Budget::Explicit {
                epochs: epochs.ok_or_else(|| Error::parse(source, "explicit schedule needs `epochs`"))?,
                iterations: iterations.ok_or_else(|| Error::parse(source, "explicit schedule needs `iterations`"))?,
                clip_radius: need(clip_radius, "clip_radius")?,
                step_size,
            }
        }
        (None, false) => {
            return Err(Error::parse(source, "[algorithm] needs either `rounds` and `delta` or `epochs`, `iterations` and `clip_radius`"))
        }
    };

    let grad_bound = match t.raw("algorithm", "grad_bound") {
        None => GradBound::Warmup,
        Some((v, _)) if v == "warmup" => GradBound::Warmup,
        Some((v, loc)) => {
            let g: f64 = v.parse().map_err(|_| Error::parse(loc.clone(), format!("grad_bound must be a number or `warmup`, got {v:?}")))?;
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::parse(loc, format!("grad_bound must be positive, got {g}")));
            }
            GradBound::Fixed(g)
        }
    };
    let warmup_draws = t.get("algorithm", "warmup_draws")?.unwrap_or(DEFAULT_WARMUP_DRAWS);
    let target_epsilon: Option<f64> = t.get("algorithm", "target_epsilon")?;
    let lipschitz: Option<f64> = t.get("algorithm", "lipschitz")?;
    let curvature_bound = t.get("algorithm", "curvature_bound")?.unwrap_or(1.0f64);
    if let Some(e) = target_epsilon {
        if !(e > 0.0) {
            return Err(Error::parse(t.location("algorithm", "target_epsilon"), "target_epsilon must be positive"));
        }
        if !matches!(budget, Budget::Rounds { .. }) {
            return Err(Error::parse(t.location("algorithm", "target_epsilon"), "target_epsilon needs a `rounds`/`delta` schedule"));
        }
    }

    let output_dir = PathBuf::from(t.raw("output", "dir").map(|(v, _)| v).unwrap_or_else(|| "out".into()));
    let trace_policy = match t.raw("output", "trace_policy") {
        None => TracePolicy::PerEpoch,
        Some((v, loc)) => match v.as_str() {
            "full" => TracePolicy::Full,
            "per_epoch" => TracePolicy::PerEpoch,
            "final_only" => TracePolicy::FinalOnly,
            other => return Err(Error::parse(loc, format!("unknown trace_policy {other:?}"))),
        },
    };
    let record_wallclock = t.get("output", "record_wallclock")?.unwrap_or(false);

    // Capability checks against the declared manifold.
    if let ManifoldDescriptor::Stiefel { .. } = manifold {
        if modes.contains(&TransportMode::ParallelTransport) {
            return Err(Error::Unsupported {
                manifold: manifold.to_string(),
                operation: "parallel_transport (use mode = projection)",
            });
        }
        if let GradSourceSpec::ZerothOrder { .. } = grad_source {
            return Err(Error::Unsupported {
                manifold: manifold.to_string(),
                operation: "exp_map (zeroth-order estimator)",
            });
        }
    }

    debug_assert!(t.entries.values().all(|e| e.used));
    Ok(RunConfig {
        label,
        seed,
        manifold,
        problem: ProblemSpec {
            source: source_spec,
            mu,
        },
        algorithm: AlgorithmSpec {
            modes,
            source: grad_source,
            budget,
            grad_bound,
            warmup_draws,
            target_epsilon,
            lipschitz,
            curvature_bound,
        },
        output_dir,
        trace_policy,
        record_wallclock,
        hash: sha256_hex(text.as_bytes()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[manifold]\nn = 10\n[algorithm]\nrounds = 1000\ndelta = 0.1\n";

    fn parse(text: &str) -> Result<RunConfig> {
        parse_config_str(text, "test.cfg", "test")
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.trace_policy, TracePolicy::PerEpoch);
        assert_eq!(c.algorithm.grad_bound, GradBound::Warmup);
        assert_eq!(c.algorithm.warmup_draws, 1000);
        assert_eq!(c.algorithm.modes, vec![TransportMode::ParallelTransport]);
        assert_eq!(c.algorithm.source, GradSourceSpec::FirstOrder);
        assert_eq!(c.manifold, ManifoldDescriptor::Sphere { n: 10 });
        assert_eq!(c.seed, 0);
        assert_eq!(c.label, "test");
        assert_eq!(c.hash.len(), 64);
    }

    #[test]
    fn unknown_key_names_line() {
        let err = parse("[manifold]\nn = 10\nradius = 2\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("test.cfg:3") && msg.contains("radius"), "{msg}");
    }

    #[test]
    fn delta_out_of_range() {
        let err = parse("[manifold]\nn = 10\n[algorithm]\nrounds = 1000\ndelta = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("out of range"), "{err}");
    }

    #[test]
    fn stiefel_with_parallel_transport_rejected() {
        let err = parse("[manifold]\nkind = stiefel\nn = 5\np = 2\n[algorithm]\nmode = parallel_transport\nrounds = 1000\ndelta = 0.1\n").unwrap_err();
        assert!(matches!(err, Error::Unsupported { .. }), "{err}");
        let ok = parse("[manifold]\nkind = stiefel\nn = 5\np = 2\n[algorithm]\nmode = projection\nrounds = 1000\ndelta = 0.1\n");
        assert!(ok.is_ok());
    }

    #[test]
    fn duplicates_and_malformed_lines() {
        assert!(parse("seed = 1\nseed = 2\n[manifold]\nn = 3\n").unwrap_err().to_string().contains("duplicate"));
        assert!(parse("[manifold\nn = 3\n").is_err());
        assert!(parse("[nowhere]\n").is_err());
        assert!(parse("[manifold]\nn\n").is_err());
        assert!(parse("[manifold]\nn = three\n").unwrap_err().to_string().contains("test.cfg:2"));
    }

    #[test]
    fn explicit_schedule_and_modes() {
        let c = parse(
            "[manifold]\nn = 50\n[algorithm]\nmode = parallel_transport, projection\nepochs = 500\niterations = 200\nclip_radius = 5e-4\ngrad_bound = 2.5\n",
        )
        .unwrap();
        assert_eq!(c.algorithm.modes.len(), 2);
        assert_eq!(c.algorithm.grad_bound, GradBound::Fixed(2.5));
        assert!(matches!(c.algorithm.budget, Budget::Explicit { epochs: 500, iterations: 200, .. }));
        assert!(parse("[manifold]\nn = 5\n[algorithm]\nrounds = 1000\ndelta = 0.1\nepochs = 3\n").is_err());
    }

    #[test]
    fn zeroth_order_settings() {
        let c = parse("[manifold]\nn = 5\n[algorithm]\ngrad_source = zeroth_order\nzo_delta = 0.05\nrounds = 1000\ndelta = 0.1\n").unwrap();
        assert_eq!(c.algorithm.source, GradSourceSpec::ZerothOrder { delta: 0.05 });
        assert!(parse("[manifold]\nn = 5\n[algorithm]\nzo_delta = 0.05\nrounds = 1000\ndelta = 0.1\n").is_err());
    }

    #[test]
    fn spectra() {
        let c = parse("[manifold]\nn = 5\n[problem]\nspectrum = power:2\nspectrum_seed = 3\n[algorithm]\nrounds = 1000\ndelta = 0.1\n").unwrap();
        assert_eq!(
            c.problem.source,
            MatrixSource::Generated {
                spectrum: Spectrum::Power(2.0),
                seed: 3
            }
        );
        assert!(parse("[manifold]\nn = 5\n[problem]\nspectrum = flat\n[algorithm]\nrounds = 1000\ndelta = 0.1\n").is_err());
    }
}
