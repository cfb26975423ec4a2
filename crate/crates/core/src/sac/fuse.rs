use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Debug)]
pub struct FuseVjp<T> {
    scans: Vec<Tensor<T>>,
    weights: Tensor<T>,
    per_factor: usize,
}

#[derive(Clone, Debug)]
pub struct FuseGrads<T> {
    pub scans: Vec<Tensor<T>>,
    pub weights: Tensor<T>,
}

/// Weighted concatenation of scan outputs.
///
/// `scans` holds `n * per_factor` maps in factor-major order (all directions
/// of factor 1, then factor 2, ...). Every map of factor `k` is multiplied by
/// weight channel `k`, broadcast over its channels, and all products are
/// concatenated in the given order.
pub fn fuse_round<T: Real>(
    scans: &[Tensor<T>],
    per_factor: usize,
    weights: &Tensor<T>,
) -> Result<(Tensor<T>, FuseVjp<T>)> {
    let n = weights.shape().c;
    if per_factor == 0 || scans.len() != n * per_factor {
        return Err(Error::invalid(
            "fuse_round",
            format!("{} scan maps for {n} factors x {per_factor} directions", scans.len()),
        ));
    }
    let mut weighted = Vec::with_capacity(scans.len());
    for (i, scan) in scans.iter().enumerate() {
        let wk = weights.slice_channels(i / per_factor, 1)?;
        weighted.push(scan.mul(&wk)?);
    }
    let refs: Vec<_> = weighted.iter().collect();
    let out = Tensor::concat_channels(&refs)?;
    Ok((
        out,
        FuseVjp {
            scans: scans.to_vec(),
            weights: weights.clone(),
            per_factor,
        },
    ))
}

impl<T: Real> FuseVjp<T> {
    pub fn backward(&self, dy: &Tensor<T>) -> FuseGrads<T> {
        let ws = self.weights.shape();
        let mut dweights = Tensor::zeros(ws);
        let mut dscans = Vec::with_capacity(self.scans.len());
        let mut start = 0;
        for (i, scan) in self.scans.iter().enumerate() {
            let k = i / self.per_factor;
            let ss = scan.shape();
            let block = dy.slice_channels(start, ss.c).expect("cotangent shaped like output");
            start += ss.c;
            let mut ds = Tensor::zeros(ss);
            for b in 0..ss.b {
                let wk = self.weights.plane(b, k).to_vec();
                let mut dw = vec![T::zero(); ss.plane()];
                for c in 0..ss.c {
                    let g = block.plane(b, c);
                    let v = scan.plane(b, c);
                    for (p, d) in ds.plane_mut(b, c).iter_mut().enumerate() {
                        *d = g[p] * wk[p];
                        dw[p] += g[p] * v[p];
                    }
                }
                for (d, v) in dweights.plane_mut(b, k).iter_mut().zip(dw) {
                    *d += v;
                }
            }
            dscans.push(ds);
        }
        FuseGrads {
            scans: dscans,
            weights: dweights,
        }
    }
}
