use crate::tensor::{Real, Tensor};

#[derive(Clone, Debug)]
pub struct ReluVjp<T> {
    input: Tensor<T>,
}

impl<T: Real> ReluVjp<T> {
    pub fn backward(&self, dy: &Tensor<T>) -> Tensor<T> {
        let mut dx = dy.clone();
        for (d, &x) in dx.data_mut().iter_mut().zip(self.input.data()) {
            if x <= T::zero() {
                *d = T::zero();
            }
        }
        dx
    }
}

pub fn relu<T: Real>(x: &Tensor<T>) -> (Tensor<T>, ReluVjp<T>) {
    (
        x.map(|v| if v < T::zero() { T::zero() } else { v }),
        ReluVjp { input: x.clone() },
    )
}

#[derive(Clone, Debug)]
pub struct SigmoidVjp<T> {
    output: Tensor<T>,
}

impl<T: Real> SigmoidVjp<T> {
    pub fn backward(&self, dy: &Tensor<T>) -> Tensor<T> {
        let mut dx = dy.clone();
        for (d, &s) in dx.data_mut().iter_mut().zip(self.output.data()) {
            *d *= s * (T::one() - s);
        }
        dx
    }

    pub fn output(&self) -> &Tensor<T> {
        &self.output
    }
}

#[inline]
pub fn sigmoid_scalar<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn sigmoid<T: Real>(x: &Tensor<T>) -> (Tensor<T>, SigmoidVjp<T>) {
    let y = x.map(sigmoid_scalar);
    (y.clone(), SigmoidVjp { output: y })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_keeps_nan() {
        let (y, _) = relu(&Tensor::from_vec((1, 1, 1, 2), vec![f32::NAN, -1.0]).unwrap());
        assert!(y.data()[0].is_nan());
        assert_eq!(y.data()[1], 0.0);
    }

    #[test]
    fn relu_values() {
        let x = Tensor::from_vec((1, 3, 1, 1), vec![-1.0f32, 0.0, 2.0]).unwrap();
        let (y, vjp) = relu(&x);
        assert_eq!(y.data(), &[0.0, 0.0, 2.0]);
        let g = vjp.backward(&Tensor::full(x.shape(), 5.0));
        assert_eq!(g.data(), &[0.0, 0.0, 5.0]);
    }

    #[test]
    fn sigmoid_at_zero() {
        let x = Tensor::from_vec((1, 1, 1, 1), vec![0.0f32]).unwrap();
        let (y, vjp) = sigmoid(&x);
        assert_eq!(y.data(), &[0.5]);
        let g = vjp.backward(&Tensor::full(x.shape(), 2.0));
        assert_eq!(g.data(), &[0.5]);
    }

    #[test]
    fn sigmoid_is_bounded_and_stable() {
        let x = Tensor::from_vec((1, 4, 1, 1), vec![-200.0f64, -20.0, 20.0, 200.0]).unwrap();
        let (y, _) = sigmoid(&x);
        assert!(y.is_finite());
        assert!(y.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(y.data()[1] > 0.0 && y.data()[2] < 1.0);
        assert!((y.data()[1] + y.data()[2] - 1.0).abs() < 1e-15);
    }
}
