use std::fs;
use std::path::{Path, PathBuf};

use catstream_core::data::{read_dataset, read_manifest, DataError};
use catstream_core::{Instance, ModelDims};

use crate::CliError;

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Manifest to use for `data`: the explicit one, else `manifest.txt` beside it.
fn manifest_for(data: &Path, explicit: Option<&str>) -> Option<PathBuf> {
    match explicit {
        Some(p) => Some(PathBuf::from(p)),
        None => {
            let sibling = data.with_file_name("manifest.txt");
            sibling.exists().then_some(sibling)
        }
    }
}

/// Reads a dataset and the model dimensions that go with it. Without a
/// manifest the vocabulary is taken as one past the largest id seen.
pub fn load_dataset(data: &Path, manifest: Option<&str>) -> Result<(Vec<Instance>, ModelDims), CliError> {
    let instances = read_dataset(data)?;
    if instances.is_empty() {
        return Err(DataError::Config(format!("{} holds no instances", data.display())).into());
    }
    let dims = match manifest_for(data, manifest) {
        Some(path) => {
            let m = read_manifest(&path)?;
            m.validate(&instances)?;
            ModelDims { dimension: m.dimension, attributes: m.attribute_count }
        }
        None => {
            let dimension = instances.iter().filter_map(Instance::max_feature).max().map_or(1, |m| m + 1);
            log::warn!("no manifest for {}; assuming dimension {dimension}", data.display());
            ModelDims { dimension, attributes: instances[0].attributes.len() }
        }
    };
    Ok((instances, dims))
}
