use crate::error::Result;
use crate::tensor::Tensor;

/// Largest relative error between reverse-mode and central-difference
/// gradients of `sum(f(x))` at `point`. The denominator of each coordinate
/// is `max(|analytic|, |numeric|, 1e-8)`.
pub fn grad_check<F>(f: F, point: &Tensor<f64>, h: f64) -> Result<f64>
where
    F: Fn(&Tensor<f64>) -> Result<Tensor<f64>>,
{
    let shape = point.shape().to_vec();
    let x = Tensor::param(&shape, point.data().to_vec())?;
    f(&x)?.sum().backward();
    let analytic = x.grad().unwrap_or_else(|| vec![0.0; x.len()]);

    let eval =
        |data: Vec<f64>| -> Result<f64> { Ok(f(&Tensor::new(&shape, data)?)?.data().iter().sum()) };
    let mut worst = 0.0f64;
    for i in 0..point.len() {
        let mut plus = point.data().to_vec();
        let mut minus = plus.clone();
        plus[i] += h;
        minus[i] -= h;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * h);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_function_has_zero_error() {
        let p = Tensor::new(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        let e = grad_check(|_| Ok(Tensor::scalar(4.0)), &p, 1e-5).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn elementwise_ops() {
        let p = Tensor::new(&[2, 3], vec![0.3, -1.2, 0.8, 2.0, -0.1, 0.05]).unwrap();
        let g = Tensor::new(&[3], vec![1.1, 0.9, 1.3]).unwrap();
        let b = Tensor::new(&[3], vec![0.1, -0.2, 0.3]).unwrap();
        let e = grad_check(|x| Ok(x.gelu().layer_norm(&g, &b, 1e-5)?.mul(x)?), &p, 1e-5).unwrap();
        assert!(e < 1e-6, "{e}");
    }
}
