//! Model assembly, scheme-wired forward passes, and parameter accounting.

use crate::config::{ModelConfig, SchemeKind};
use crate::error::{Result, StackError};
use crate::init::Initializer;
use tensor_autodiff::{Dtype, NodeId, ParamId, ParamStore, Tape, Tensor};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy)]
struct ConvSpec {
    weight: ParamId,
    stride: usize,
    padding: usize,
}

#[derive(Debug, Clone, Copy)]
struct BnSpec {
    gamma: ParamId,
    beta: ParamId,
    stats: usize,
}

/// Pre-activation residual branch: BN → ReLU → conv3×3(s) → BN → ReLU →
/// conv3×3(1). Shape-preserving exactly when C_in = C_out and s = 1.
#[derive(Debug, Clone, Copy)]
struct ResidualFn {
    bn1: BnSpec,
    conv1: ConvSpec,
    bn2: BnSpec,
    conv2: ConvSpec,
}

/// 1×1 strided conv + BN on the skip path, inserted where a block changes
/// shape.
#[derive(Debug, Clone, Copy)]
struct Projection {
    conv: ConvSpec,
    bn: BnSpec,
}

#[derive(Debug, Clone, Copy)]
struct BlockSpec {
    f: ResidualFn,
    proj: Option<Projection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Wiring {
    Euler,
    Rk(SchemeKind),
    Tm,
}

#[derive(Debug, Clone)]
struct StageSpec {
    blocks: Vec<BlockSpec>,
    wiring: Wiring,
}

/// Batch-norm running statistics: training state persisted in checkpoints,
/// frozen during eval.
#[derive(Debug, Clone)]
pub struct RunningStats<T> {
    pub path: String,
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

type StatUpdate<T> = (usize, Vec<T>, Vec<T>);

/// A built residual network: stem conv → scheme-wired stages → BN → ReLU →
/// global average pool → linear classifier.
pub struct Model<T> {
    config: ModelConfig,
    store: ParamStore<T>,
    bn_stats: Vec<RunningStats<T>>,
    stem: ConvSpec,
    stages: Vec<StageSpec>,
    final_bn: BnSpec,
    head_weight: ParamId,
    head_bias: ParamId,
    train_steps: u64,
}

impl<T: Dtype> std::fmt::Debug for Model<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Model")
            .field("scheme", &self.config.scheme)
            .field("depth", &self.config.nominal_depth())
            .field("params", &self.param_count())
            .finish()
    }
}

struct Builder<T> {
    store: ParamStore<T>,
    stats: Vec<RunningStats<T>>,
    init: Initializer,
}

impl<T: Dtype> Builder<T> {
    fn conv(
        &mut self,
        path: &str,
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
        padding: usize,
    ) -> ConvSpec {
        let w = self.init.kaiming(&[cout, cin, k, k], cin * k * k);
        ConvSpec {
            weight: self.store.register(format!("{path}.weight"), w),
            stride,
            padding,
        }
    }

    fn bn(&mut self, path: &str, c: usize) -> BnSpec {
        let gamma = self
            .store
            .register(format!("{path}.gamma"), Tensor::filled(&[c], T::one()));
        let beta = self
            .store
            .register(format!("{path}.beta"), Tensor::zeros(&[c]));
        let stats = self.stats.len();
        self.stats.push(RunningStats {
            path: path.to_string(),
            mean: vec![T::zero(); c],
            var: vec![T::one(); c],
        });
        BnSpec { gamma, beta, stats }
    }

    fn residual(&mut self, path: &str, cin: usize, cout: usize, stride: usize) -> ResidualFn {
        ResidualFn {
            bn1: self.bn(&format!("{path}.bn1"), cin),
            conv1: self.conv(&format!("{path}.conv1"), cin, cout, 3, stride, 1),
            bn2: self.bn(&format!("{path}.bn2"), cout),
            conv2: self.conv(&format!("{path}.conv2"), cout, cout, 3, 1, 1),
        }
    }
}

impl<T: Dtype> Model<T> {
    pub fn build(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut b = Builder {
            store: ParamStore::new(),
            stats: Vec::new(),
            init: Initializer::new(config.seed),
        };

        let stem = b.conv("stem", config.in_channels, config.stem_channels, 3, 1, 1);

        let mut channels = config.stem_channels;
        let mut stages = Vec::with_capacity(config.stages.len());
        for (si, st) in config.stages.iter().enumerate() {
            let mut blocks = Vec::with_capacity(st.blocks);
            for bi in 0..st.blocks {
                let path = format!("stage{}.block{}", si + 1, bi + 1);
                let (cin, stride) = if bi == 0 {
                    (channels, st.stride)
                } else {
                    (st.channels, 1)
                };
                let f = b.residual(&path, cin, st.channels, stride);
                let proj = if cin != st.channels || stride != 1 {
                    Some(Projection {
                        conv: b.conv(&format!("{path}.proj"), cin, st.channels, 1, stride, 0),
                        bn: b.bn(&format!("{path}.proj.bn"), st.channels),
                    })
                } else {
                    None
                };
                blocks.push(BlockSpec { f, proj });
            }
            let wiring = if config.stage_uses_tm(si) {
                Wiring::Tm
            } else {
                match config.scheme {
                    SchemeKind::Euler | SchemeKind::Tm => Wiring::Euler,
                    rk => Wiring::Rk(rk),
                }
            };
            stages.push(StageSpec { blocks, wiring });
            channels = st.channels;
        }

        let final_bn = b.bn("final_bn", channels);
        let head_w = b.init.kaiming(&[config.classes, channels], channels);
        let head_weight = b.store.register("head.weight", head_w);
        let head_bias = b
            .store
            .register("head.bias", Tensor::zeros(&[config.classes]));

        Ok(Self {
            config: config.clone(),
            store: b.store,
            bn_stats: b.stats,
            stem,
            stages,
            final_bn,
            head_weight,
            head_bias,
            train_steps: 0,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore<T> {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    pub fn bn_stats(&self) -> &[RunningStats<T>] {
        &self.bn_stats
    }

    pub fn bn_stats_mut(&mut self) -> &mut [RunningStats<T>] {
        &mut self.bn_stats
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn set_train_steps(&mut self, steps: u64) {
        self.train_steps = steps;
    }

    pub fn add_train_steps(&mut self, steps: u64) {
        self.train_steps += steps;
    }

    /// Total element count over all registered parameters.
    pub fn param_count(&self) -> usize {
        self.store.total_elements()
    }

    /// Parameter totals grouped by top-level path segment, in
    /// registration order (stem, stage1, …, final_bn, head).
    pub fn param_counts_by_group(&self) -> Vec<(String, usize)> {
        let mut groups: Vec<(String, usize)> = Vec::new();
        for (_, p) in self.store.iter() {
            let group = p.name.split('.').next().unwrap_or(&p.name).to_string();
            match groups.last_mut() {
                Some((g, n)) if *g == group => *n += p.value.numel(),
                _ => groups.push((group, p.value.numel())),
            }
        }
        groups
    }

    fn check_input(&self, batch: &Tensor<T>) -> Result<()> {
        let dims = batch.dims4("model input").map_err(StackError::Engine)?;
        if dims[1] != self.config.in_channels {
            return Err(StackError::Engine(tensor_autodiff::AdError::ShapeMismatch {
                context: "model input channels",
                expected: vec![self.config.in_channels],
                got: batch.shape().to_vec(),
            }));
        }
        Ok(())
    }

    /// Train-mode forward: batch statistics normalize, running statistics
    /// are updated in place. Returns the tape and the logits node.
    pub fn forward_train(&mut self, batch: &Tensor<T>) -> Result<(Tape<T>, NodeId)> {
        self.check_input(batch)?;
        let mut tape = Tape::new();
        let x = tape.input(batch.clone());
        let mut updates = Vec::new();
        let logits = self.forward_inner(&mut tape, x, Mode::Train, &mut updates)?;
        let momentum = T::cast(BN_MOMENTUM);
        let keep = T::cast(1.0 - BN_MOMENTUM);
        for (slot, mean, var) in updates {
            let stats = &mut self.bn_stats[slot];
            for (r, m) in stats.mean.iter_mut().zip(&mean) {
                *r = keep * *r + momentum * *m;
            }
            for (r, v) in stats.var.iter_mut().zip(&var) {
                *r = keep * *r + momentum * *v;
            }
        }
        Ok((tape, logits))
    }

    /// Eval-mode forward: frozen running statistics, `&self` only.
    pub fn forward_eval(&self, batch: &Tensor<T>) -> Result<(Tape<T>, NodeId)> {
        self.check_input(batch)?;
        let mut tape = Tape::new();
        let x = tape.input(batch.clone());
        let mut updates = Vec::new();
        let logits = self.forward_inner(&mut tape, x, Mode::Eval, &mut updates)?;
        debug_assert!(updates.is_empty());
        Ok((tape, logits))
    }

    pub fn logits_eval(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        let (tape, logits) = self.forward_eval(batch)?;
        Ok(tape.value(logits).clone())
    }

    /// Argmax per row; ties break toward the lowest class index.
    pub fn predict(&self, batch: &Tensor<T>) -> Result<Vec<usize>> {
        let logits = self.logits_eval(batch)?;
        let [n, c] = logits.dims2("logits").map_err(StackError::Engine)?;
        let mut out = Vec::with_capacity(n);
        for ni in 0..n {
            let row = &logits.data()[ni * c..(ni + 1) * c];
            let mut best = 0;
            for (j, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = j;
                }
            }
            out.push(best);
        }
        Ok(out)
    }

    fn bn_forward(
        &self,
        tape: &mut Tape<T>,
        spec: BnSpec,
        x: NodeId,
        mode: Mode,
        updates: &mut Vec<StatUpdate<T>>,
    ) -> Result<NodeId> {
        let gamma = tape.param(&self.store, spec.gamma);
        let beta = tape.param(&self.store, spec.beta);
        match mode {
            Mode::Train => {
                let (y, stats) = tape.batch_norm_train(x, gamma, beta, BN_EPS)?;
                updates.push((spec.stats, stats.mean, stats.var));
                Ok(y)
            }
            Mode::Eval => {
                let stats = &self.bn_stats[spec.stats];
                Ok(tape.batch_norm_eval(x, gamma, beta, &stats.mean, &stats.var, BN_EPS)?)
            }
        }
    }

    fn conv_forward(&self, tape: &mut Tape<T>, spec: ConvSpec, x: NodeId) -> Result<NodeId> {
        let w = tape.param(&self.store, spec.weight);
        Ok(tape.conv2d(x, w, spec.stride, spec.padding)?)
    }

    fn residual_forward(
        &self,
        tape: &mut Tape<T>,
        f: &ResidualFn,
        x: NodeId,
        mode: Mode,
        updates: &mut Vec<StatUpdate<T>>,
    ) -> Result<NodeId> {
        let h = self.bn_forward(tape, f.bn1, x, mode, updates)?;
        let h = tape.relu(h);
        let h = self.conv_forward(tape, f.conv1, h)?;
        let h = self.bn_forward(tape, f.bn2, h, mode, updates)?;
        let h = tape.relu(h);
        self.conv_forward(tape, f.conv2, h)
    }

    /// x + F(x), or proj(x) + F(x) where the block changes shape.
    fn euler_block(
        &self,
        tape: &mut Tape<T>,
        block: &BlockSpec,
        x: NodeId,
        mode: Mode,
        updates: &mut Vec<StatUpdate<T>>,
    ) -> Result<NodeId> {
        let f = self.residual_forward(tape, &block.f, x, mode, updates)?;
        let short = match &block.proj {
            Some(p) => {
                let s = self.conv_forward(tape, p.conv, x)?;
                self.bn_forward(tape, p.bn, s, mode, updates)?
            }
            None => x,
        };
        Ok(tape.add(short, f)?)
    }

    /// Multi-stage block sharing one residual function: k₁ = F(x),
    /// kᵢ = F(x + τ·Σ aᵢⱼkⱼ), out = x + τ·Σ bᵢkᵢ.
    fn rk_block(
        &self,
        tape: &mut Tape<T>,
        kind: SchemeKind,
        block: &BlockSpec,
        x: NodeId,
        mode: Mode,
        updates: &mut Vec<StatUpdate<T>>,
    ) -> Result<NodeId> {
        debug_assert!(block.proj.is_none(), "rk wiring needs shape-preserving F");
        let coeffs = kind.coefficients();
        let tau = self.config.tau;
        let mut ks: Vec<NodeId> = Vec::with_capacity(coeffs.stages());
        for row in coeffs.stage_matrix {
            let stage_in = if row.is_empty() {
                x
            } else {
                let mut terms = vec![(x, T::one())];
                for (j, a) in row.iter().enumerate() {
                    if *a != 0.0 {
                        terms.push((ks[j], T::cast(tau * a)));
                    }
                }
                tape.lincomb(&terms)?
            };
            ks.push(self.residual_forward(tape, &block.f, stage_in, mode, updates)?);
        }
        let mut terms = vec![(x, T::one())];
        for (k, b) in ks.iter().zip(coeffs.stage_weights) {
            terms.push((*k, T::cast(tau * b)));
        }
        Ok(tape.lincomb(&terms)?)
    }

    fn stage_forward(
        &self,
        tape: &mut Tape<T>,
        stage_index: usize,
        stage: &StageSpec,
        x: NodeId,
        mode: Mode,
        updates: &mut Vec<StatUpdate<T>>,
    ) -> Result<NodeId> {
        match stage.wiring {
            Wiring::Euler => {
                let mut cur = x;
                for block in &stage.blocks {
                    cur = self.euler_block(tape, block, cur, mode, updates)?;
                }
                Ok(cur)
            }
            Wiring::Rk(kind) => {
                let mut cur = x;
                for block in &stage.blocks {
                    cur = if block.proj.is_some() {
                        // Shape-changing entry blocks run as Euler blocks.
                        self.euler_block(tape, block, cur, mode, updates)?
                    } else {
                        self.rk_block(tape, kind, block, cur, mode, updates)?
                    };
                }
                Ok(cur)
            }
            Wiring::Tm => {
                if stage.blocks.len() < 4 {
                    return Err(StackError::InsufficientBlocks {
                        stage: stage_index,
                        blocks: stage.blocks.len(),
                    });
                }
                // Boot: three Euler blocks seed the activation history.
                let x1 = self.euler_block(tape, &stage.blocks[0], x, mode, updates)?;
                let x2 = self.euler_block(tape, &stage.blocks[1], x1, mode, updates)?;
                let x3 = self.euler_block(tape, &stage.blocks[2], x2, mode, updates)?;
                let (mut prev2, mut prev, mut cur) = (x1, x2, x3);
                for block in &stage.blocks[3..] {
                    let shape = tape.value(cur).shape().to_vec();
                    if tape.value(prev).shape() != shape || tape.value(prev2).shape() != shape
                    {
                        return Err(StackError::Engine(
                            tensor_autodiff::AdError::ShapeMismatch {
                                context: "tm activation history",
                                expected: shape,
                                got: tape.value(prev).shape().to_vec(),
                            },
                        ));
                    }
                    let f = self.residual_forward(tape, &block.f, cur, mode, updates)?;
                    let next =
                        tm_combine(tape, cur, prev, prev2, f, T::cast(self.config.tau))?;
                    prev2 = prev;
                    prev = cur;
                    cur = next;
                }
                Ok(cur)
            }
        }
    }

    fn forward_inner(
        &self,
        tape: &mut Tape<T>,
        x: NodeId,
        mode: Mode,
        updates: &mut Vec<StatUpdate<T>>,
    ) -> Result<NodeId> {
        let mut cur = self.conv_forward(tape, self.stem, x)?;
        for (si, stage) in self.stages.iter().enumerate() {
            cur = self.stage_forward(tape, si, stage, cur, mode, updates)?;
        }
        cur = self.bn_forward(tape, self.final_bn, cur, mode, updates)?;
        cur = tape.relu(cur);
        cur = tape.global_avg_pool(cur)?;
        let w = tape.param(&self.store, self.head_weight);
        let b = tape.param(&self.store, self.head_bias);
        Ok(tape.linear(cur, w, b)?)
    }

    /// Zeroes the final conv of every residual branch, making every block's
    /// F vanish identically.
    pub fn zero_residual_branch_final_convs(&mut self) {
        let ids: Vec<ParamId> = self
            .stages
            .iter()
            .flat_map(|s| s.blocks.iter().map(|b| b.f.conv2.weight))
            .collect();
        for id in ids {
            for v in self.store.get_mut(id).value.data_mut() {
                *v = T::zero();
            }
        }
    }

    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }

    pub fn blocks_in_stage(&self, stage: usize) -> usize {
        self.stages[stage].blocks.len()
    }

    /// Runs one residual branch F standalone on `x` (eval mode).
    pub fn eval_residual(&self, stage: usize, block: usize, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let xn = tape.input(x.clone());
        let mut updates = Vec::new();
        let out = self.residual_forward(
            &mut tape,
            &self.stages[stage].blocks[block].f,
            xn,
            Mode::Eval,
            &mut updates,
        )?;
        Ok(tape.value(out).clone())
    }

    /// Runs one block (with its stage's single-block wiring) standalone on
    /// `x` in eval mode: Euler wiring for Euler/entry blocks, the scheme's
    /// stage arithmetic otherwise.
    pub fn eval_block(&self, stage: usize, block: usize, x: &Tensor<T>) -> Result<Tensor<T>> {
        let spec = &self.stages[stage].blocks[block];
        let mut tape = Tape::new();
        let xn = tape.input(x.clone());
        let mut updates = Vec::new();
        let out = match self.stages[stage].wiring {
            Wiring::Rk(kind) if spec.proj.is_none() => {
                self.rk_block(&mut tape, kind, spec, xn, Mode::Eval, &mut updates)?
            }
            _ => self.euler_block(&mut tape, spec, xn, Mode::Eval, &mut updates)?,
        };
        Ok(tape.value(out).clone())
    }

    /// Runs a whole stage on `x` in eval mode, returning every block
    /// boundary activation (boot outputs included, input excluded).
    pub fn eval_stage_trace(&self, stage: usize, x: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let spec = &self.stages[stage];
        let mut tape = Tape::new();
        let xn = tape.input(x.clone());
        let mut updates = Vec::new();
        let mut outs = Vec::with_capacity(spec.blocks.len());
        match spec.wiring {
            Wiring::Euler => {
                let mut cur = xn;
                for block in &spec.blocks {
                    cur = self.euler_block(&mut tape, block, cur, Mode::Eval, &mut updates)?;
                    outs.push(tape.value(cur).clone());
                }
            }
            Wiring::Rk(kind) => {
                let mut cur = xn;
                for block in &spec.blocks {
                    cur = if block.proj.is_some() {
                        self.euler_block(&mut tape, block, cur, Mode::Eval, &mut updates)?
                    } else {
                        self.rk_block(&mut tape, kind, block, cur, Mode::Eval, &mut updates)?
                    };
                    outs.push(tape.value(cur).clone());
                }
            }
            Wiring::Tm => return self.tm_stage_trace(stage, spec, x),
        }
        Ok(outs)
    }

    /// Runs a stage under forced Taylor-multistep wiring, regardless of the
    /// model's scheme; errors when the stage is too shallow to boot.
    pub fn eval_tm_stage_trace(&self, stage: usize, x: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        self.tm_stage_trace(stage, &self.stages[stage], x)
    }

    fn tm_stage_trace(
        &self,
        stage_index: usize,
        spec: &StageSpec,
        x: &Tensor<T>,
    ) -> Result<Vec<Tensor<T>>> {
        if spec.blocks.len() < 4 {
            return Err(StackError::InsufficientBlocks {
                stage: stage_index,
                blocks: spec.blocks.len(),
            });
        }
        let mut tape = Tape::new();
        let xn = tape.input(x.clone());
        let mut updates = Vec::new();
        let mut outs = Vec::with_capacity(spec.blocks.len());
        let x1 = self.euler_block(&mut tape, &spec.blocks[0], xn, Mode::Eval, &mut updates)?;
        let x2 = self.euler_block(&mut tape, &spec.blocks[1], x1, Mode::Eval, &mut updates)?;
        let x3 = self.euler_block(&mut tape, &spec.blocks[2], x2, Mode::Eval, &mut updates)?;
        outs.push(tape.value(x1).clone());
        outs.push(tape.value(x2).clone());
        outs.push(tape.value(x3).clone());
        let (mut prev2, mut prev, mut cur) = (x1, x2, x3);
        for block in &spec.blocks[3..] {
            let f = self.residual_forward(&mut tape, &block.f, cur, Mode::Eval, &mut updates)?;
            let next = tm_combine(&mut tape, cur, prev, prev2, f, T::cast(self.config.tau))?;
            outs.push(tape.value(next).clone());
            prev2 = prev;
            prev = cur;
            cur = next;
        }
        Ok(outs)
    }
}

/// The Taylor-multistep activation update
/// `1.5·x_cur − x_prev + 0.5·x_prev2 + τ·f`, arranged as
/// `x_cur + ½(x_cur − x_prev) + ½(x_prev2 − x_prev) + τ·f` so a constant
/// history with vanishing F reproduces `x_cur` bitwise.
pub fn tm_combine<T: Dtype>(
    tape: &mut Tape<T>,
    x_cur: NodeId,
    x_prev: NodeId,
    x_prev2: NodeId,
    f: NodeId,
    tau: T,
) -> std::result::Result<NodeId, tensor_autodiff::AdError> {
    let d1 = tape.lincomb(&[(x_cur, T::one()), (x_prev, -T::one())])?;
    let d2 = tape.lincomb(&[(x_prev2, T::one()), (x_prev, -T::one())])?;
    let half = T::cast(0.5);
    tape.lincomb(&[(x_cur, T::one()), (d1, half), (d2, half), (f, tau)])
}
