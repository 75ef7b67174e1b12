use super::{EngineError, Result, Tensor};

/// `a` followed by `b`. Both operands must be rank 1.
pub fn concat(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    for (name, t) in [("left", a), ("right", b)] {
        if t.rank() != 1 {
            return Err(EngineError::Config(format!(
                "concat {name} operand must be rank 1, got shape {:?}",
                t.shape()
            )));
        }
    }
    let mut data = Vec::with_capacity(a.len() + b.len());
    data.extend_from_slice(a.data());
    data.extend_from_slice(b.data());
    Ok(Tensor::vector(data))
}

/// Backward of [`concat`]: splits a rank-1 gradient at index `n`.
pub fn split_grad(grad: &Tensor, n: usize) -> Result<(Tensor, Tensor)> {
    if grad.rank() != 1 || n > grad.len() {
        return Err(EngineError::Config(format!(
            "cannot split gradient of shape {:?} at {n}",
            grad.shape()
        )));
    }
    let (head, tail) = grad.data().split_at(n);
    Ok((Tensor::vector(head.to_vec()), Tensor::vector(tail.to_vec())))
}
