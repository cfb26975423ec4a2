//! On-disk layout: `root/images/<id>.ppm`, `root/masks/<id>.pgm` and
//! `root/index.txt` with one id per line.

use std::fs;
use std::path::{Path, PathBuf};

use super::pnm::{load_image, load_mask, save_tensor};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    /// `(1, 3, h, w)` in `[0, 1]`.
    pub image: Tensor<f32>,
    /// `(1, 1, h, w)` with values in `{0, 1}`.
    pub mask: Tensor<f32>,
}

impl Sample {
    pub fn new(id: impl Into<String>, image: Tensor<f32>, mask: Tensor<f32>) -> Result<Self> {
        let id = id.into();
        let (si, sm) = (image.shape(), mask.shape());
        if si.b != 1 || si.c != 3 || sm.b != 1 || sm.c != 1 || (si.h, si.w) != (sm.h, sm.w) {
            return Err(Error::ShapeMismatch {
                op: "Sample::new",
                lhs: si,
                rhs: sm,
            });
        }
        crate::net::check_binary(&mask)?;
        Ok(Sample { id, image, mask })
    }
}

pub fn image_path(root: &Path, id: &str) -> PathBuf {
    root.join("images").join(format!("{id}.ppm"))
}

pub fn mask_path(root: &Path, id: &str) -> PathBuf {
    root.join("masks").join(format!("{id}.pgm"))
}

pub fn read_index(root: &Path) -> Result<Vec<String>> {
    let path = root.join("index.txt");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let ids: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect();
    if ids.is_empty() {
        return Err(Error::format(path, "index lists no samples"));
    }
    Ok(ids)
}

pub fn load_sample(root: &Path, id: &str) -> Result<Sample> {
    let image = load_image(&image_path(root, id))?;
    let mask = load_mask(&mask_path(root, id))?;
    Sample::new(id, image, mask).map_err(|e| Error::format(root.join(id), e.to_string()))
}

pub fn load_dataset(root: &Path) -> Result<Vec<Sample>> {
    read_index(root)?.iter().map(|id| load_sample(root, id)).collect()
}

pub fn write_dataset(root: &Path, samples: &[Sample]) -> Result<()> {
    for sub in ["images", "masks"] {
        let dir = root.join(sub);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let mut index = String::new();
    for s in samples {
        save_tensor(&image_path(root, &s.id), &s.image)?;
        save_tensor(&mask_path(root, &s.id), &s.mask)?;
        index.push_str(&s.id);
        index.push('\n');
    }
    let path = root.join("index.txt");
    fs::write(&path, index).map_err(|e| Error::io(&path, e))
}
