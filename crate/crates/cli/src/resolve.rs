//! Loading inputs: distributions, families, test functions, bundles and
//! configs that refer to them by name.

use std::fs;
use std::path::{Path, PathBuf};

use evalab::constructions::ConstructionBundle;
use evalab::distributions::{Dataset, DiscreteDistribution, Domain};
use evalab::scores::TestFunction;
use evalab::test_families::{
    all_binary_family, interval_family, no_taxonomy_family, singleton_family, threshold_family, FunctionFamily,
};
use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::CliError;

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

pub fn parse_json<T: DeserializeOwned>(text: &str, what: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Input(format!("invalid {what}: {e}")))
}

fn from_value<T: DeserializeOwned>(value: Value, what: &str) -> Result<T, CliError> {
    serde_json::from_value(value).map_err(|e| CliError::Input(format!("invalid {what}: {e}")))
}

pub fn load_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    parse_json(&read_text(path)?, what)
}

/// A family from a file or a built-in name: `all_binary_N`, `threshold_N`,
/// `singleton_N`, `interval_N` (labels `x0..`) or `no_taxonomy_K_N`.
pub fn builtin_family(name: &str) -> Option<Result<FunctionFamily, CliError>> {
    let number = |s: &str| s.parse::<usize>().ok();
    let build = |n: Option<usize>, f: fn(Domain) -> evalab::Result<FunctionFamily>| {
        n.map(|n| Domain::indexed(n).and_then(f).map_err(CliError::from))
    };
    if let Some(rest) = name.strip_prefix("all_binary_") {
        return build(number(rest), all_binary_family);
    }
    if let Some(rest) = name.strip_prefix("threshold_") {
        return build(number(rest), threshold_family);
    }
    if let Some(rest) = name.strip_prefix("singleton_") {
        return build(number(rest), singleton_family);
    }
    if let Some(rest) = name.strip_prefix("interval_") {
        return build(number(rest), interval_family);
    }
    if let Some(rest) = name.strip_prefix("no_taxonomy_") {
        let (k, n) = rest.split_once('_')?;
        return Some(no_taxonomy_family(number(k)?, number(n)?).map_err(CliError::from));
    }
    None
}

pub fn load_family(spec: &str, base: &Path) -> Result<FunctionFamily, CliError> {
    match builtin_family(spec) {
        Some(family) => family,
        None => load_json(&base.join(spec), "function family"),
    }
}

pub fn load_distribution(path: &Path) -> Result<DiscreteDistribution, CliError> {
    load_json(path, "distribution")
}

pub fn load_test_function(path: &Path) -> Result<TestFunction, CliError> {
    load_json(path, "test function")
}

/// Loads a bundle and re-verifies its analytic facts.
pub fn load_bundle(path: &Path) -> Result<ConstructionBundle, CliError> {
    let bundle: ConstructionBundle = load_json(path, "construction bundle")?;
    let failed: Vec<String> =
        bundle.verify()?.into_iter().filter(|c| !c.holds).map(|c| c.description).collect();
    if !failed.is_empty() {
        return Err(CliError::Input(format!("bundle {} fails its facts: {}", path.display(), failed.join("; "))));
    }
    Ok(bundle)
}

/// A sample file: a JSON array of labels, or labels separated by
/// whitespace or commas.
pub fn load_sample(path: &Path, domain: &Domain) -> Result<Dataset, CliError> {
    let text = read_text(path)?;
    let labels: Vec<String> = if text.trim_start().starts_with('[') {
        parse_json(&text, "sample")?
    } else {
        text.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).map(String::from).collect()
    };
    Ok(Dataset::from_labels(domain.clone(), &labels)?)
}

/// Resolves references inside a config document. Strings in distribution
/// slots name a bundle role or a distribution file; strings in `family`
/// slots name a built-in family or a family file; a string `g` names the
/// bundle's test function (`"bundle"`) or a file. Relative paths are taken
/// from the config's directory.
pub struct Resolver {
    base: PathBuf,
    bundle: Option<ConstructionBundle>,
    pub inputs: Vec<PathBuf>,
}

impl Resolver {
    pub fn new(config_path: &Path, doc: &Value) -> Result<Self, CliError> {
        let base = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut inputs = vec![config_path.to_path_buf()];
        let bundle = match doc.get("bundle") {
            Some(Value::String(p)) => {
                let path = base.join(p);
                let bundle = load_bundle(&path)?;
                inputs.push(path);
                Some(bundle)
            }
            Some(_) => return Err(CliError::Input("`bundle` must be a file path".into())),
            None => None,
        };
        Ok(Resolver { base, bundle, inputs })
    }

    fn distribution(&mut self, value: &Value) -> Result<Value, CliError> {
        let Value::String(name) = value else { return Ok(value.clone()) };
        if let Some(q) = self.bundle.as_ref().and_then(|b| b.distributions.get(name)) {
            return Ok(serde_json::to_value(q).expect("distribution serializes"));
        }
        let path = self.base.join(name);
        if !path.is_file() {
            return Err(CliError::Input(format!("`{name}` is neither a bundle role nor a file")));
        }
        let q = load_distribution(&path)?;
        self.inputs.push(path);
        Ok(serde_json::to_value(q).expect("distribution serializes"))
    }

    fn family(&mut self, value: &Value) -> Result<Value, CliError> {
        let Value::String(name) = value else { return Ok(value.clone()) };
        let family = load_family(name, &self.base)?;
        if builtin_family(name).is_none() {
            self.inputs.push(self.base.join(name));
        }
        Ok(serde_json::to_value(family).expect("family serializes"))
    }

    fn test_function(&mut self, value: &Value) -> Result<Value, CliError> {
        let Value::String(name) = value else { return Ok(value.clone()) };
        let g = if name == "bundle" {
            self.bundle
                .as_ref()
                .and_then(|b| b.test_function.clone())
                .ok_or_else(|| CliError::Input("`g: bundle` needs a bundle with a test function".into()))?
        } else {
            let path = self.base.join(name);
            let g = load_test_function(&path)?;
            self.inputs.push(path);
            g
        };
        Ok(serde_json::to_value(g).expect("test function serializes"))
    }

    /// Resolves a `metric` or `score` object in place.
    fn descriptor(&mut self, value: &mut Value) -> Result<(), CliError> {
        if let Some(obj) = value.as_object_mut() {
            if let Some(f) = obj.get("family").cloned() {
                obj.insert("family".into(), self.family(&f)?);
            }
            if let Some(g) = obj.get("g").cloned() {
                obj.insert("g".into(), self.test_function(&g)?);
            }
        }
        Ok(())
    }

    fn selector(&mut self, value: &mut Value) -> Result<(), CliError> {
        if let Some(obj) = value.as_object_mut() {
            if let Some(d) = obj.get("distribution").cloned() {
                obj.insert("distribution".into(), self.distribution(&d)?);
            }
            if let Some(Value::Array(list)) = obj.get("distributions").cloned() {
                let resolved = list.iter().map(|d| self.distribution(d)).collect::<Result<Vec<_>, _>>()?;
                obj.insert("distributions".into(), Value::Array(resolved));
            }
        }
        Ok(())
    }

    /// Resolves a trial-config object: `q1`, `q2`, `selector`, `metric`,
    /// `score`.
    pub fn trial_config(&mut self, doc: &Value) -> Result<Value, CliError> {
        let mut doc = doc.clone();
        let obj = doc.as_object_mut().ok_or_else(|| CliError::Input("config must be an object".into()))?;
        obj.remove("bundle");
        for key in ["q1", "q2"] {
            if let Some(v) = obj.get(key).cloned() {
                obj.insert(key.into(), self.distribution(&v)?);
            }
        }
        if let Some(v) = obj.get_mut("selector") {
            self.selector(v)?;
        }
        for key in ["metric", "score"] {
            if let Some(v) = obj.get_mut(key) {
                self.descriptor(v)?;
            }
        }
        obj.entry("schema_version").or_insert(Value::from(evalab::experiments::REPORT_SCHEMA_VERSION));
        Ok(doc)
    }

    /// Resolves a probe target object.
    pub fn probe_target(&mut self, target: &Value) -> Result<Value, CliError> {
        let mut target = target.clone();
        let obj = target.as_object_mut().ok_or_else(|| CliError::Input("probe target must be an object".into()))?;
        if let Some(config) = obj.get("config").cloned() {
            let mut config = config;
            if let Some(c) = config.as_object_mut() {
                c.entry("master_seed").or_insert(Value::from(0u64));
            }
            obj.insert("config".into(), self.trial_config(&config)?);
        }
        for key in ["qstar", "q"] {
            if let Some(v) = obj.get(key).cloned() {
                obj.insert(key.into(), self.distribution(&v)?);
            }
        }
        for key in ["metric", "score"] {
            if let Some(v) = obj.get_mut(key) {
                self.descriptor(v)?;
            }
        }
        Ok(target)
    }

    pub fn finish<T: DeserializeOwned>(value: Value, what: &str) -> Result<T, CliError> {
        from_value(value, what)
    }
}
