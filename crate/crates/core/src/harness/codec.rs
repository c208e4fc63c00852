//! Versioned JSON model files.
//!
//! ```text
//! file     := { "version": 1, "schema_digest": hex16, "schema": schema, "model": payload }
//! payload  := { "conditional": conditional-model }
//!           | { "network": factored-model }
//!           | { "mixture": gaussian-mixture }
//! ```
//!
//! Trees are nested records, so parsing runs without serde_json's recursion
//! limit and on a growable stack.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bnet::{FactoredModel, GaussianMixture};
use crate::cond::ConditionalModel;
use crate::data::Schema;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Conditional(ConditionalModel),
    Network(FactoredModel),
    Mixture(GaussianMixture),
}

#[derive(Serialize)]
struct FileOut<'a> {
    version: u64,
    schema_digest: String,
    schema: &'a Schema,
    model: &'a Model,
}

#[derive(Deserialize)]
struct FileIn {
    schema_digest: String,
    schema: Schema,
    model: Model,
}

#[derive(Deserialize)]
struct Header {
    version: u64,
}

/// Parses JSON of any nesting depth, reporting line and column on failure.
pub fn from_json_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    de.disable_recursion_limit();
    let value = T::deserialize(serde_stacker::Deserializer::new(&mut de)).map_err(Error::from_json)?;
    de.end().map_err(Error::from_json)?;
    Ok(value)
}

pub fn encode_model(model: &Model, schema: &Schema) -> Result<String> {
    let file = FileOut {
        version: FORMAT_VERSION,
        schema_digest: schema.digest(),
        schema,
        model,
    };
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::new(&mut out);
    file.serialize(serde_stacker::Serializer::new(&mut ser)).map_err(|e| Error::Internal(e.to_string()))?;
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

/// Decodes a model file, checking the format version before anything else
/// and the schema digest against the embedded schema.
pub fn decode_model(text: &str) -> Result<(Model, Schema)> {
    let header: Header = from_json_str(text)?;
    if header.version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: header.version,
            expected: FORMAT_VERSION,
        });
    }
    let file: FileIn = from_json_str(text)?;
    file.schema.check()?;
    let digest = file.schema.digest();
    if digest != file.schema_digest {
        return Err(Error::Data(format!(
            "model file schema digest {} does not match its schema ({digest})",
            file.schema_digest
        )));
    }
    Ok((file.model, file.schema))
}
