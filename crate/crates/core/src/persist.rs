//! Model serialization: a human-readable TOML document with a metadata block
//! and one named parameter block per layout entry. Floats render in Rust's
//! shortest round-trippable form, so a load/save cycle reproduces parameters
//! bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diff::ParamVector;
use crate::error::{Error, Result};
use crate::method1::Method1Model;
use crate::method2::{DirectModel, Method2Model};
use crate::pmploss::TrialModel;
use crate::train::AnyModel;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    model: ModelMeta,
    #[serde(rename = "param", default)]
    params: Vec<ParamBlock>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelMeta {
    method: String,
    problem: String,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    hidden: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamBlock {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn meta_of(model: &AnyModel) -> ModelMeta {
    match model {
        AnyModel::Method1(m) => ModelMeta {
            method: "method1".into(),
            problem: m.problem_id.as_str().into(),
            seed: m.seed,
            hidden: Some(m.hidden),
            m: None,
            n: None,
        },
        AnyModel::Method2(m) => ModelMeta {
            method: "fourier-layer".into(),
            problem: m.problem_id.as_str().into(),
            seed: m.seed,
            hidden: Some(m.hidden),
            m: Some(m.m),
            n: Some(m.n),
        },
        AnyModel::Direct(m) => ModelMeta {
            method: "direct".into(),
            problem: m.problem_id.as_str().into(),
            seed: m.seed,
            hidden: None,
            m: Some(m.m),
            n: Some(m.n),
        },
    }
}

/// Serializes a model to its TOML document.
pub fn model_to_string(model: &AnyModel) -> Result<String> {
    let pv = model.param_vector();
    let params = pv
        .unpack()
        .into_iter()
        .map(|(spec, data)| ParamBlock {
            name: spec.name,
            shape: spec.shape,
            data,
        })
        .collect();
    let file = ModelFile {
        model: meta_of(model),
        params,
    };
    toml::to_string_pretty(&file).map_err(|e| Error::Config(format!("serialize model: {e}")))
}

/// Parses a model from its TOML document, validating the method's field
/// presence and every block's name, shape and length.
pub fn model_from_str(text: &str) -> Result<AnyModel> {
    let file: ModelFile =
        toml::from_str(text).map_err(|e| Error::Config(format!("parse model: {e}")))?;
    let meta = &file.model;
    let problem = meta.problem.parse()?;
    let require = |field: Option<usize>, name: &str| {
        field.ok_or_else(|| Error::Config(format!("method `{}` needs `{name}`", meta.method)))
    };
    let forbid = |field: Option<usize>, name: &str| {
        if field.is_some() {
            Err(Error::Config(format!(
                "method `{}` does not take `{name}`",
                meta.method
            )))
        } else {
            Ok(())
        }
    };

    let skeleton = match meta.method.as_str() {
        "method1" => {
            forbid(meta.m, "m")?;
            forbid(meta.n, "n")?;
            AnyModel::Method1(Method1Model::init(
                problem,
                require(meta.hidden, "hidden")?,
                meta.seed,
            )?)
        }
        "fourier-layer" => AnyModel::Method2(Method2Model::init(
            problem,
            require(meta.m, "m")?,
            require(meta.n, "n")?,
            require(meta.hidden, "hidden")?,
            meta.seed,
        )?),
        "direct" => {
            forbid(meta.hidden, "hidden")?;
            AnyModel::Direct(DirectModel::init(
                problem,
                require(meta.m, "m")?,
                require(meta.n, "n")?,
                meta.seed,
            )?)
        }
        other => return Err(Error::Config(format!("unknown method tag `{other}`"))),
    };

    // Blocks must match the expected layout exactly, in order.
    let layout = skeleton.layout();
    let expected = layout.blocks();
    if file.params.len() != expected.len() {
        return Err(Error::Config(format!(
            "expected {} parameter blocks, found {}",
            expected.len(),
            file.params.len()
        )));
    }
    let mut blocks = Vec::with_capacity(expected.len());
    for (got, want) in file.params.into_iter().zip(expected) {
        if got.name != want.name || got.shape != want.shape {
            return Err(Error::Config(format!(
                "parameter block `{}` {:?} does not match expected `{}` {:?}",
                got.name, got.shape, want.name, want.shape
            )));
        }
        blocks.push((want.clone(), got.data));
    }
    let pv = ParamVector::pack(blocks)?;
    skeleton.with_values(&pv.values)
}

/// Atomically writes `contents` to `path` (write to a sibling temp file, then
/// rename over the target).
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn save_model(path: &Path, model: &AnyModel) -> Result<()> {
    write_atomic(path, &model_to_string(model)?)
}

pub fn load_model(path: &Path) -> Result<AnyModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("read model {}: {e}", path.display())))?;
    model_from_str(&text)
}
