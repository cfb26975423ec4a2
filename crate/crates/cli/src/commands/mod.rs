pub mod ablate;
pub mod eval;
pub mod gradcheck;
pub mod infer;
pub mod synth;
pub mod train;

use std::path::{Path, PathBuf};

use sacnet::data::{load_dataset, Sample};
use sacnet::net::NetConfig;

use crate::failure::{CmdResult, Context, Failure};

pub fn create_dir(dir: &Path) -> CmdResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::data(format!("cannot create {}: {e}", dir.display())))
}

/// Loads a dataset and checks every image fits the network input.
pub fn load_training_data(root: &Path, net: &NetConfig) -> CmdResult<Vec<Sample>> {
    if !root.is_dir() {
        return Err(Failure::data(format!("dataset not found: {}", root.display())));
    }
    let data = load_dataset(root).context(format!("loading dataset {}", root.display()))?;
    for s in &data {
        let sh = s.image.shape();
        if (sh.h, sh.w) != (net.input_size, net.input_size) {
            return Err(Failure::data(format!(
                "sample {} is {}x{}, network expects {}x{}",
                s.id, sh.w, sh.h, net.input_size, net.input_size
            )));
        }
    }
    Ok(data)
}

/// Files of `dir` with extension `ext`, sorted by name.
pub fn list_files(dir: &Path, ext: &str) -> CmdResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Failure::data(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == ext))
        .collect();
    files.sort();
    Ok(files)
}

pub fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// `dir/sub` when it exists, else `dir`; lets commands accept either a
/// dataset root or the image or mask folder itself.
pub fn prefer_subdir(dir: &Path, sub: &str) -> PathBuf {
    let nested = dir.join(sub);
    if nested.is_dir() {
        nested
    } else {
        dir.to_path_buf()
    }
}
