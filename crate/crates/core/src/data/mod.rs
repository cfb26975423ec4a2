//! Image and mask I/O plus a synthetic dataset generator.

mod dataset;
mod pnm;
mod synth;

pub use dataset::{image_path, load_dataset, load_sample, mask_path, read_index, write_dataset, Sample};
pub use pnm::{
    decode_pnm, encode_pnm, load_gray, load_image, load_mask, quantize, read_pnm, save_tensor, to_pnm, write_pnm, Pnm,
};
pub use synth::{synth_dataset, synth_sample, ShapeKind, SynthConfig, MAX_FOREGROUND, MIN_FOREGROUND};
