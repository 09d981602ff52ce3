//! Append-only operation record with reverse-mode differentiation.

use crate::error::{AdError, Result};
use crate::kernels;
use crate::params::{ParamId, ParamStore};
use crate::tensor::{Dtype, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub usize);

/// Per-channel batch statistics emitted by a train-mode batch norm, consumed
/// by the owning layer's running-average update.
#[derive(Debug, Clone)]
pub struct BnBatchStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

#[derive(Debug)]
enum Op<T> {
    Input,
    Param(ParamId),
    Conv2d {
        input: NodeId,
        weight: NodeId,
        stride: usize,
        padding: usize,
    },
    BatchNorm {
        input: NodeId,
        gamma: NodeId,
        beta: NodeId,
        mean: Vec<T>,
        invstd: Vec<T>,
        through_stats: bool,
    },
    Relu {
        input: NodeId,
    },
    Linear {
        input: NodeId,
        weight: NodeId,
        bias: NodeId,
    },
    GlobalAvgPool {
        input: NodeId,
    },
    SoftmaxCrossEntropy {
        logits: NodeId,
        labels: Vec<usize>,
        probs: Tensor<T>,
    },
    Lincomb {
        terms: Vec<(NodeId, T)>,
    },
    Mul {
        a: NodeId,
        b: NodeId,
    },
    Sum {
        input: NodeId,
    },
}

#[derive(Debug)]
struct Node<T> {
    op: Op<T>,
    value: Tensor<T>,
}

/// Records forward operations in topological order; `backward` replays the
/// gradient rules in reverse and accumulates into parameter grads.
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Dtype> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op<T>, value: Tensor<T>) -> NodeId {
        debug_assert!(value.all_finite(), "non-finite values out of {op:?}");
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    /// Leaf holding a constant (non-trainable) tensor.
    pub fn input(&mut self, value: Tensor<T>) -> NodeId {
        self.push(Op::Input, value)
    }

    /// Leaf referencing a trainable parameter; backward accumulates into it.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> NodeId {
        self.push(Op::Param(id), store.value(id).clone())
    }

    pub fn conv2d(
        &mut self,
        input: NodeId,
        weight: NodeId,
        stride: usize,
        padding: usize,
    ) -> Result<NodeId> {
        let out =
            kernels::conv2d_forward(self.value(input), self.value(weight), stride, padding)?;
        Ok(self.push(
            Op::Conv2d {
                input,
                weight,
                stride,
                padding,
            },
            out,
        ))
    }

    /// Train-mode batch norm: normalizes with batch statistics and returns
    /// them so the caller can fold them into running averages.
    pub fn batch_norm_train(
        &mut self,
        input: NodeId,
        gamma: NodeId,
        beta: NodeId,
        eps: f64,
    ) -> Result<(NodeId, BnBatchStats<T>)> {
        let stats = kernels::bn_batch_stats(self.value(input), eps)?;
        let out = kernels::bn_apply(
            self.value(input),
            self.value(gamma),
            self.value(beta),
            &stats.mean,
            &stats.invstd,
        )?;
        let id = self.push(
            Op::BatchNorm {
                input,
                gamma,
                beta,
                mean: stats.mean.clone(),
                invstd: stats.invstd.clone(),
                through_stats: true,
            },
            out,
        );
        Ok((
            id,
            BnBatchStats {
                mean: stats.mean,
                var: stats.var,
            },
        ))
    }

    /// Eval-mode batch norm: normalizes with frozen running statistics.
    pub fn batch_norm_eval(
        &mut self,
        input: NodeId,
        gamma: NodeId,
        beta: NodeId,
        running_mean: &[T],
        running_var: &[T],
        eps: f64,
    ) -> Result<NodeId> {
        let epsv = T::cast(eps);
        let invstd: Vec<T> = running_var
            .iter()
            .map(|v| T::one() / (*v + epsv).sqrt())
            .collect();
        let out = kernels::bn_apply(
            self.value(input),
            self.value(gamma),
            self.value(beta),
            running_mean,
            &invstd,
        )?;
        Ok(self.push(
            Op::BatchNorm {
                input,
                gamma,
                beta,
                mean: running_mean.to_vec(),
                invstd,
                through_stats: false,
            },
            out,
        ))
    }

    pub fn relu(&mut self, input: NodeId) -> NodeId {
        let out = kernels::relu_forward(self.value(input));
        self.push(Op::Relu { input }, out)
    }

    pub fn linear(&mut self, input: NodeId, weight: NodeId, bias: NodeId) -> Result<NodeId> {
        let out =
            kernels::linear_forward(self.value(input), self.value(weight), self.value(bias))?;
        Ok(self.push(
            Op::Linear {
                input,
                weight,
                bias,
            },
            out,
        ))
    }

    pub fn global_avg_pool(&mut self, input: NodeId) -> Result<NodeId> {
        let out = kernels::global_avg_pool_forward(self.value(input))?;
        Ok(self.push(Op::GlobalAvgPool { input }, out))
    }

    pub fn softmax_cross_entropy(&mut self, logits: NodeId, labels: &[usize]) -> Result<NodeId> {
        let (loss, probs) =
            kernels::softmax_cross_entropy_forward(self.value(logits), labels)?;
        Ok(self.push(
            Op::SoftmaxCrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            Tensor::scalar(loss),
        ))
    }

    /// Weighted sum Σ wᵢ·termᵢ of same-shape tensors, evaluated left to
    /// right. A leading unit weight contributes its term bitwise.
    pub fn lincomb(&mut self, terms: &[(NodeId, T)]) -> Result<NodeId> {
        let first = terms
            .first()
            .ok_or_else(|| AdError::Unsupported("empty linear combination".into()))?;
        let shape = self.value(first.0).shape().to_vec();
        for (id, _) in terms {
            if self.value(*id).shape() != shape.as_slice() {
                return Err(AdError::ShapeMismatch {
                    context: "lincomb terms",
                    expected: shape.clone(),
                    got: self.value(*id).shape().to_vec(),
                });
            }
        }
        let mut out = if first.1 == T::one() {
            self.value(first.0).clone()
        } else {
            self.value(first.0).map(|v| v * first.1)
        };
        for (id, wt) in &terms[1..] {
            let src = self.value(*id).data();
            for (o, s) in out.data_mut().iter_mut().zip(src) {
                *o = *o + *wt * *s;
            }
        }
        Ok(self.push(
            Op::Lincomb {
                terms: terms.to_vec(),
            },
            out,
        ))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.lincomb(&[(a, T::one()), (b, T::one())])
    }

    /// Elementwise product of same-shape tensors.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(AdError::ShapeMismatch {
                context: "mul operands",
                expected: self.value(a).shape().to_vec(),
                got: self.value(b).shape().to_vec(),
            });
        }
        let out = Tensor::from_vec(
            self.value(a).shape(),
            self.value(a)
                .data()
                .iter()
                .zip(self.value(b).data())
                .map(|(x, y)| *x * *y)
                .collect(),
        );
        Ok(self.push(Op::Mul { a, b }, out))
    }

    pub fn sum(&mut self, input: NodeId) -> NodeId {
        let total = self.value(input).data().iter().copied().sum();
        self.push(Op::Sum { input }, Tensor::scalar(total))
    }

    /// Gradients of the scalar `loss` with respect to every node, or `None`
    /// for nodes the loss does not depend on.
    pub fn node_gradients(&self, loss: NodeId) -> Result<Vec<Option<Tensor<T>>>> {
        let loss_value = self.value(loss);
        if !loss_value.is_scalar() {
            return Err(AdError::NotAScalar {
                shape: loss_value.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::filled(loss_value.shape(), T::one()));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Input | Op::Param(_) => {}
                Op::Conv2d {
                    input,
                    weight,
                    stride,
                    padding,
                } => {
                    let (gx, gw) = kernels::conv2d_backward(
                        self.value(*input),
                        self.value(*weight),
                        *stride,
                        *padding,
                        &g,
                    )?;
                    accumulate(&mut grads[input.0], gx);
                    accumulate(&mut grads[weight.0], gw);
                }
                Op::BatchNorm {
                    input,
                    gamma,
                    beta,
                    mean,
                    invstd,
                    through_stats,
                } => {
                    let (gx, gg, gb) = if *through_stats {
                        kernels::bn_backward_train(
                            self.value(*input),
                            self.value(*gamma),
                            mean,
                            invstd,
                            &g,
                        )?
                    } else {
                        kernels::bn_backward_eval(
                            self.value(*input),
                            self.value(*gamma),
                            mean,
                            invstd,
                            &g,
                        )?
                    };
                    accumulate(&mut grads[input.0], gx);
                    accumulate(&mut grads[gamma.0], gg);
                    accumulate(&mut grads[beta.0], gb);
                }
                Op::Relu { input } => {
                    let gx = kernels::relu_backward(self.value(*input), &g);
                    accumulate(&mut grads[input.0], gx);
                }
                Op::Linear {
                    input,
                    weight,
                    bias,
                } => {
                    let (gx, gw, gb) =
                        kernels::linear_backward(self.value(*input), self.value(*weight), &g)?;
                    accumulate(&mut grads[input.0], gx);
                    accumulate(&mut grads[weight.0], gw);
                    accumulate(&mut grads[bias.0], gb);
                }
                Op::GlobalAvgPool { input } => {
                    let gx =
                        kernels::global_avg_pool_backward(self.value(*input).shape(), &g)?;
                    accumulate(&mut grads[input.0], gx);
                }
                Op::SoftmaxCrossEntropy { logits, labels, probs } => {
                    let gx = kernels::softmax_cross_entropy_backward(
                        probs,
                        labels,
                        g.scalar_value(),
                    );
                    accumulate(&mut grads[logits.0], gx);
                }
                Op::Lincomb { terms } => {
                    for (id, wt) in terms {
                        let gt = g.map(|v| v * *wt);
                        accumulate(&mut grads[id.0], gt);
                    }
                }
                Op::Mul { a, b } => {
                    let ga = Tensor::from_vec(
                        g.shape(),
                        g.data()
                            .iter()
                            .zip(self.value(*b).data())
                            .map(|(gv, bv)| *gv * *bv)
                            .collect(),
                    );
                    let gb = Tensor::from_vec(
                        g.shape(),
                        g.data()
                            .iter()
                            .zip(self.value(*a).data())
                            .map(|(gv, av)| *gv * *av)
                            .collect(),
                    );
                    accumulate(&mut grads[a.0], ga);
                    accumulate(&mut grads[b.0], gb);
                }
                Op::Sum { input } => {
                    let gx = Tensor::filled(self.value(*input).shape(), g.scalar_value());
                    accumulate(&mut grads[input.0], gx);
                }
            }
            grads[i] = Some(g);
        }
        Ok(grads)
    }

    /// Reverse pass from the scalar `loss`, adding into each reachable
    /// parameter's grad. Calling twice without zeroing doubles the grads.
    pub fn backward(&self, loss: NodeId, store: &mut ParamStore<T>) -> Result<()> {
        let grads = self.node_gradients(loss)?;
        for (node, grad) in self.nodes.iter().zip(&grads) {
            if let (Op::Param(pid), Some(g)) = (&node.op, grad) {
                store.accumulate_grad(*pid, g)?;
            }
        }
        Ok(())
    }
}

fn accumulate<T: Dtype>(slot: &mut Option<Tensor<T>>, g: Tensor<T>) {
    match slot {
        None => *slot = Some(g),
        Some(acc) => {
            for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                *a = *a + *b;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grad_of_weighted_sum_is_the_other_factor() {
        let mut store = ParamStore::new();
        let w = store.register("w", Tensor::from_vec(&[3], vec![1.0_f64, -2.0, 0.5]));
        let mut tape = Tape::new();
        let wn = tape.param(&store, w);
        let xn = tape.input(Tensor::from_vec(&[3], vec![4.0, 5.0, 6.0]));
        let prod = tape.mul(wn, xn).unwrap();
        let loss = tape.sum(prod);
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(store.get(w).grad.data(), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        let mut store = ParamStore::new();
        let w = store.register("w", Tensor::from_vec(&[3], vec![-1.0_f64, 0.0, 2.0]));
        let mut tape = Tape::new();
        let wn = tape.param(&store, w);
        let r = tape.relu(wn);
        let loss = tape.sum(r);
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(store.get(w).grad.data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn backward_twice_doubles_grads() {
        let mut store = ParamStore::new();
        let w = store.register("w", Tensor::from_vec(&[2], vec![1.0_f64, 2.0]));
        let mut tape = Tape::new();
        let wn = tape.param(&store, w);
        let loss = tape.sum(wn);
        tape.backward(loss, &mut store).unwrap();
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(store.get(w).grad.data(), &[2.0, 2.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut store = ParamStore::new();
        let w = store.register("w", Tensor::from_vec(&[2], vec![1.0_f64, 2.0]));
        let mut tape = Tape::new();
        let wn = tape.param(&store, w);
        let err = tape.backward(wn, &mut store).unwrap_err();
        assert!(matches!(err, AdError::NotAScalar { .. }));
    }

    #[test]
    fn lincomb_with_unit_leading_weight_is_bitwise_identity() {
        let mut tape = Tape::<f32>::new();
        let x = tape.input(Tensor::from_vec(&[3], vec![0.1, 0.2, 0.3]));
        let z = tape.input(Tensor::zeros(&[3]));
        let out = tape.lincomb(&[(x, 1.0), (z, 0.5), (z, 0.5)]).unwrap();
        assert_eq!(tape.value(out).data(), tape.value(x).data());
    }

    #[test]
    fn shared_parameter_grads_accumulate_across_uses() {
        // loss = sum(w) + sum(w) ⇒ grad = 2.
        let mut store = ParamStore::new();
        let w = store.register("w", Tensor::from_vec(&[2], vec![1.0_f64, 2.0]));
        let mut tape = Tape::new();
        let w1 = tape.param(&store, w);
        let w2 = tape.param(&store, w);
        let s = tape.add(w1, w2).unwrap();
        let loss = tape.sum(s);
        tape.backward(loss, &mut store).unwrap();
        // Same parameter read through two leaves: each leaf contributes one.
        assert_eq!(store.get(w).grad.data(), &[2.0, 2.0]);
    }
}
