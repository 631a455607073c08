//! Runtime network instantiated from graph descriptors: forward, backward,
//! parameter iteration, SGD stepping.

use crate::accounting::{GraphNode, LayerKind, ModelGraph};
use crate::nn::{
    avgpool_backward, avgpool_forward, batchnorm_backward, batchnorm_forward, conv2d_backward,
    conv2d_forward, fc_backward, fc_forward, maxpool_backward, maxpool_forward, BatchNormParams,
    BnCache, ConvSpec, ConvWeights, FcWeights, PoolCache, SgdState,
};
use crate::onedconv::{
    onedconv_backward, onedconv_forward, square_offset, OneDConvCache, ShapeConvWeights,
};
use crate::tensor::Tensor;
use crate::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Gradient and momentum buffers mirroring one parameter.
#[derive(Debug, Clone)]
struct GradBuf {
    grad: Vec<f64>,
    vel: Vec<f64>,
}

impl GradBuf {
    fn new(len: usize) -> GradBuf {
        GradBuf {
            grad: vec![0.0; len],
            vel: vec![0.0; len],
        }
    }

    fn acc(&mut self, g: &[f64]) {
        for (a, b) in self.grad.iter_mut().zip(g) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone)]
enum RtLayer {
    Conv {
        name: String,
        spec: ConvSpec,
        wts: ConvWeights,
        k_buf: GradBuf,
        b_buf: Option<GradBuf>,
    },
    OneD {
        name: String,
        spec: ConvSpec,
        wts: ConvWeights,
        sw: ShapeConvWeights,
        k_buf: GradBuf,
        b_buf: Option<GradBuf>,
        sk_buf: GradBuf,
        sb_buf: GradBuf,
    },
    Bn {
        name: String,
        params: BatchNormParams,
        g_buf: GradBuf,
        b_buf: GradBuf,
    },
    Relu,
    MaxPool {
        kernel: usize,
        stride: usize,
    },
    AvgPool {
        kernel: usize,
        stride: usize,
    },
    Fc {
        name: String,
        w: FcWeights,
        w_buf: GradBuf,
        b_buf: GradBuf,
    },
}

#[derive(Debug, Clone)]
enum RtNode {
    Layer(RtLayer),
    Residual {
        main: Vec<RtNode>,
        shortcut: Vec<RtNode>,
    },
}

#[derive(Debug, Clone)]
enum LayerCache {
    Conv(Tensor),
    OneD(Box<OneDConvCache>),
    Bn(BnCache),
    Relu(Tensor),
    Pool(PoolCache),
    Fc(Tensor),
}

/// Per-node forward state consumed by the backward pass (opaque).
#[derive(Debug, Clone)]
pub struct NodeCache(NodeCacheImpl);

#[derive(Debug, Clone)]
enum NodeCacheImpl {
    Layer(LayerCache),
    Residual {
        main: Vec<NodeCache>,
        shortcut: Vec<NodeCache>,
        pre: Tensor,
    },
}

/// Trainable model built from a [`ModelGraph`].
#[derive(Debug, Clone)]
pub struct Network {
    nodes: Vec<RtNode>,
    pub classes: usize,
    pub input: [usize; 3],
}

fn build_nodes(desc: &[GraphNode], rng: &mut ChaCha8Rng) -> Result<Vec<RtNode>> {
    let mut out = Vec::with_capacity(desc.len());
    for node in desc {
        match node {
            GraphNode::Layer(l) => out.push(RtNode::Layer(build_layer(l.name.clone(), &l.kind, rng)?)),
            GraphNode::Residual { main, shortcut, .. } => out.push(RtNode::Residual {
                main: build_nodes(main, rng)?,
                shortcut: build_nodes(shortcut, rng)?,
            }),
        }
    }
    Ok(out)
}

fn build_layer(name: String, kind: &LayerKind, rng: &mut ChaCha8Rng) -> Result<RtLayer> {
    Ok(match kind {
        LayerKind::Conv(spec) => {
            let wts = ConvWeights::init(spec, rng);
            let k_len = wts.kernel.len();
            let b_len = wts.bias.as_ref().map(|b| b.len());
            RtLayer::Conv {
                name,
                spec: *spec,
                wts,
                k_buf: GradBuf::new(k_len),
                b_buf: b_len.map(GradBuf::new),
            }
        }
        LayerKind::OneDConv(spec) => {
            let wts = ConvWeights::init(spec, rng);
            // zero-init shape weights: step 0 is exactly the vanilla network
            let sw = ShapeConvWeights::zeros(spec);
            let k_len = wts.kernel.len();
            let b_len = wts.bias.as_ref().map(|b| b.len());
            let sk_len = sw.kernel.len();
            let sb_len = sw.bias.len();
            RtLayer::OneD {
                name,
                spec: *spec,
                wts,
                sw,
                k_buf: GradBuf::new(k_len),
                b_buf: b_len.map(GradBuf::new),
                sk_buf: GradBuf::new(sk_len),
                sb_buf: GradBuf::new(sb_len),
            }
        }
        LayerKind::BatchNorm { channels } => RtLayer::Bn {
            name,
            params: BatchNormParams::new(*channels),
            g_buf: GradBuf::new(*channels),
            b_buf: GradBuf::new(*channels),
        },
        LayerKind::Relu => RtLayer::Relu,
        LayerKind::MaxPool { kernel, stride } => RtLayer::MaxPool {
            kernel: *kernel,
            stride: *stride,
        },
        LayerKind::AvgPool { kernel, stride } => RtLayer::AvgPool {
            kernel: *kernel,
            stride: *stride,
        },
        LayerKind::Fc { in_dim, out_dim } => {
            let w = FcWeights::init(*in_dim, *out_dim, rng);
            RtLayer::Fc {
                name,
                w_buf: GradBuf::new(w.weight.len()),
                b_buf: GradBuf::new(w.bias.len()),
                w,
            }
        }
    })
}

fn forward_nodes(
    nodes: &mut [RtNode],
    x: &Tensor,
    training: bool,
    caches: &mut Vec<NodeCache>,
) -> Result<Tensor> {
    let mut cur = x.clone();
    for node in nodes {
        match node {
            RtNode::Layer(layer) => {
                let (y, cache) = forward_layer(layer, &cur, training)?;
                caches.push(NodeCache(NodeCacheImpl::Layer(cache)));
                cur = y;
            }
            RtNode::Residual { main, shortcut } => {
                let mut main_caches = Vec::new();
                let m = forward_nodes(main, &cur, training, &mut main_caches)?;
                let (s, short_caches) = if shortcut.is_empty() {
                    (cur.clone(), Vec::new())
                } else {
                    let mut sc = Vec::new();
                    let s = forward_nodes(shortcut, &cur, training, &mut sc)?;
                    (s, sc)
                };
                let pre = m.add(&s)?;
                let y = pre.relu();
                caches.push(NodeCache(NodeCacheImpl::Residual {
                    main: main_caches,
                    shortcut: short_caches,
                    pre,
                }));
                cur = y;
            }
        }
    }
    Ok(cur)
}

fn forward_layer(layer: &mut RtLayer, x: &Tensor, training: bool) -> Result<(Tensor, LayerCache)> {
    match layer {
        RtLayer::Conv { spec, wts, .. } => {
            let y = conv2d_forward(x, spec, wts)?;
            Ok((y, LayerCache::Conv(x.clone())))
        }
        RtLayer::OneD { spec, wts, sw, .. } => {
            let (y, cache) = onedconv_forward(x, spec, wts, sw)?;
            Ok((y, LayerCache::OneD(Box::new(cache))))
        }
        RtLayer::Bn { params, .. } => {
            let (y, cache) = batchnorm_forward(x, params, training)?;
            Ok((y, LayerCache::Bn(cache)))
        }
        RtLayer::Relu => Ok((x.relu(), LayerCache::Relu(x.clone()))),
        RtLayer::MaxPool { kernel, stride } => {
            let (y, cache) = maxpool_forward(x, *kernel, *stride)?;
            Ok((y, LayerCache::Pool(cache)))
        }
        RtLayer::AvgPool { kernel, stride } => {
            let (y, cache) = avgpool_forward(x, *kernel, *stride)?;
            Ok((y, LayerCache::Pool(cache)))
        }
        RtLayer::Fc { w, .. } => {
            let y = fc_forward(x, w)?;
            Ok((y, LayerCache::Fc(x.clone())))
        }
    }
}

fn relu_mask_grad(x: &Tensor, grad_y: &Tensor) -> Tensor {
    let mut g = grad_y.clone();
    for (gv, &xv) in g.data_mut().iter_mut().zip(x.data()) {
        if xv <= 0.0 {
            *gv = 0.0;
        }
    }
    g
}

fn backward_nodes(nodes: &mut [RtNode], caches: &[NodeCache], grad: &Tensor) -> Result<Tensor> {
    debug_assert_eq!(nodes.len(), caches.len());
    let mut cur = grad.clone();
    for (node, cache) in nodes.iter_mut().zip(caches.iter()).rev() {
        match (node, &cache.0) {
            (RtNode::Layer(layer), NodeCacheImpl::Layer(lc)) => {
                cur = backward_layer(layer, lc, &cur)?;
            }
            (
                RtNode::Residual { main, shortcut },
                NodeCacheImpl::Residual {
                    main: mc,
                    shortcut: sc,
                    pre,
                },
            ) => {
                let gpre = relu_mask_grad(pre, &cur);
                let gm = backward_nodes(main, mc, &gpre)?;
                let gs = if shortcut.is_empty() {
                    gpre
                } else {
                    backward_nodes(shortcut, sc, &gpre)?
                };
                cur = gm.add(&gs)?;
            }
            _ => {
                return Err(Error::ShapeMismatch {
                    expected: "cache aligned with node".into(),
                    got: "mismatched cache kind".into(),
                })
            }
        }
    }
    Ok(cur)
}

fn backward_layer(layer: &mut RtLayer, cache: &LayerCache, grad_y: &Tensor) -> Result<Tensor> {
    match (layer, cache) {
        (
            RtLayer::Conv {
                spec,
                wts,
                k_buf,
                b_buf,
                ..
            },
            LayerCache::Conv(x),
        ) => {
            let grads = conv2d_backward(x, spec, wts, grad_y)?;
            k_buf.acc(grads.kernel.data());
            if let (Some(buf), Some(gb)) = (b_buf.as_mut(), grads.bias.as_ref()) {
                buf.acc(gb);
            }
            Ok(grads.x)
        }
        (
            RtLayer::OneD {
                wts,
                sw,
                k_buf,
                b_buf,
                sk_buf,
                sb_buf,
                ..
            },
            LayerCache::OneD(c),
        ) => {
            let grads = onedconv_backward(c, wts, sw, grad_y)?;
            k_buf.acc(grads.kernel.data());
            if let (Some(buf), Some(gb)) = (b_buf.as_mut(), grads.bias.as_ref()) {
                buf.acc(gb);
            }
            sk_buf.acc(grads.shape_kernel.data());
            sb_buf.acc(&grads.shape_bias);
            Ok(grads.x)
        }
        (RtLayer::Bn { g_buf, b_buf, .. }, LayerCache::Bn(c)) => {
            let (gx, gg, gb) = batchnorm_backward(c, grad_y)?;
            g_buf.acc(&gg);
            b_buf.acc(&gb);
            Ok(gx)
        }
        (RtLayer::Relu, LayerCache::Relu(x)) => Ok(relu_mask_grad(x, grad_y)),
        (RtLayer::MaxPool { .. }, LayerCache::Pool(c)) => maxpool_backward(c, grad_y),
        (RtLayer::AvgPool { .. }, LayerCache::Pool(c)) => avgpool_backward(c, grad_y),
        (
            RtLayer::Fc {
                w, w_buf, b_buf, ..
            },
            LayerCache::Fc(x),
        ) => {
            let grads = fc_backward(x, w, grad_y)?;
            w_buf.acc(&grads.weight);
            b_buf.acc(&grads.bias);
            Ok(grads.x)
        }
        _ => Err(Error::ShapeMismatch {
            expected: "cache aligned with layer".into(),
            got: "mismatched cache kind".into(),
        }),
    }
}

/// Aggregate offset deviation statistics of one OneDConv layer over some
/// forward passes: deviation is `|d_i - (i - center) * w_pad|`.
#[derive(Debug, Clone)]
pub struct OffsetStats {
    pub name: String,
    pub sum_abs_dev: f64,
    pub count: u64,
    pub max_dev: f64,
    pub max_sample: usize,
    pub max_filter: usize,
    pub max_row: usize,
    pub max_col: usize,
    /// Raw offset value at the maximum deviation.
    pub max_offset: f64,
}

impl OffsetStats {
    fn new(name: String) -> OffsetStats {
        OffsetStats {
            name,
            sum_abs_dev: 0.0,
            count: 0,
            max_dev: -1.0,
            max_sample: 0,
            max_filter: 0,
            max_row: 0,
            max_col: 0,
            max_offset: 0.0,
        }
    }

    pub fn mean_dev(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum_abs_dev / self.count as f64
        }
    }

    fn absorb(&mut self, cache: &OneDConvCache, sample_base: usize) {
        let d = cache.offsets();
        let [n, filters, h, w] = d.shape();
        let w_pad = cache.w_pad();
        for b in 0..n {
            for i in 0..filters {
                let square = square_offset(i, filters, w_pad);
                for r in 0..h {
                    for c in 0..w {
                        let dev = (d.at(b, i, r, c) - square).abs();
                        self.sum_abs_dev += dev;
                        self.count += 1;
                        if dev > self.max_dev {
                            self.max_dev = dev;
                            self.max_sample = sample_base + b;
                            self.max_filter = i;
                            self.max_row = r;
                            self.max_col = c;
                            self.max_offset = d.at(b, i, r, c);
                        }
                    }
                }
            }
        }
    }
}

fn collect_offsets(
    nodes: &[RtNode],
    caches: &[NodeCache],
    sample_base: usize,
    out: &mut Vec<OffsetStats>,
    idx: &mut usize,
) {
    for (node, cache) in nodes.iter().zip(caches) {
        match (node, &cache.0) {
            (
                RtNode::Layer(RtLayer::OneD { name, .. }),
                NodeCacheImpl::Layer(LayerCache::OneD(c)),
            ) => {
                if *idx == out.len() {
                    out.push(OffsetStats::new(name.clone()));
                }
                out[*idx].absorb(c, sample_base);
                *idx += 1;
            }
            (
                RtNode::Residual { main, shortcut },
                NodeCacheImpl::Residual {
                    main: mc,
                    shortcut: sc,
                    ..
                },
            ) => {
                collect_offsets(main, mc, sample_base, out, idx);
                collect_offsets(shortcut, sc, sample_base, out, idx);
            }
            _ => {}
        }
    }
}

type ParamVisitor<'v> = dyn FnMut(&str, &mut [f64], &mut [f64], &mut [f64]) + 'v;
type StateVisitor<'v> = dyn FnMut(&str, Vec<usize>, &[f64]) + 'v;
type StateVisitorMut<'v> = dyn FnMut(&str, Vec<usize>, &mut [f64]) -> Result<()> + 'v;

fn visit_layer_params(layer: &mut RtLayer, f: &mut ParamVisitor<'_>) {
    match layer {
        RtLayer::Conv {
            name,
            wts,
            k_buf,
            b_buf,
            ..
        } => {
            f(
                &format!("{name}.kernel"),
                wts.kernel.data_mut(),
                &mut k_buf.grad,
                &mut k_buf.vel,
            );
            if let (Some(b), Some(buf)) = (wts.bias.as_mut(), b_buf.as_mut()) {
                f(&format!("{name}.bias"), b, &mut buf.grad, &mut buf.vel);
            }
        }
        RtLayer::OneD {
            name,
            wts,
            sw,
            k_buf,
            b_buf,
            sk_buf,
            sb_buf,
            ..
        } => {
            f(
                &format!("{name}.kernel"),
                wts.kernel.data_mut(),
                &mut k_buf.grad,
                &mut k_buf.vel,
            );
            if let (Some(b), Some(buf)) = (wts.bias.as_mut(), b_buf.as_mut()) {
                f(&format!("{name}.bias"), b, &mut buf.grad, &mut buf.vel);
            }
            f(
                &format!("{name}.shape_kernel"),
                sw.kernel.data_mut(),
                &mut sk_buf.grad,
                &mut sk_buf.vel,
            );
            f(
                &format!("{name}.shape_bias"),
                &mut sw.bias,
                &mut sb_buf.grad,
                &mut sb_buf.vel,
            );
        }
        RtLayer::Bn {
            name,
            params,
            g_buf,
            b_buf,
        } => {
            f(
                &format!("{name}.gamma"),
                &mut params.gamma,
                &mut g_buf.grad,
                &mut g_buf.vel,
            );
            f(
                &format!("{name}.beta"),
                &mut params.beta,
                &mut b_buf.grad,
                &mut b_buf.vel,
            );
        }
        RtLayer::Fc {
            name,
            w,
            w_buf,
            b_buf,
        } => {
            f(
                &format!("{name}.weight"),
                &mut w.weight,
                &mut w_buf.grad,
                &mut w_buf.vel,
            );
            f(
                &format!("{name}.bias"),
                &mut w.bias,
                &mut b_buf.grad,
                &mut b_buf.vel,
            );
        }
        RtLayer::Relu | RtLayer::MaxPool { .. } | RtLayer::AvgPool { .. } => {}
    }
}

fn visit_nodes_params(nodes: &mut [RtNode], f: &mut ParamVisitor<'_>) {
    for node in nodes {
        match node {
            RtNode::Layer(l) => visit_layer_params(l, f),
            RtNode::Residual { main, shortcut } => {
                visit_nodes_params(main, f);
                visit_nodes_params(shortcut, f);
            }
        }
    }
}

impl Network {
    /// Instantiates the graph with weights drawn from a deterministic stream:
    /// the same seed gives the vanilla and OneDConv variants identical main
    /// weights because shape weights are zero-initialized without consuming
    /// random draws.
    pub fn from_graph(g: &ModelGraph, seed: u64) -> Result<Network> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Network {
            nodes: build_nodes(&g.nodes, &mut rng)?,
            classes: g.classes,
            input: g.input,
        })
    }

    pub fn forward(&mut self, x: &Tensor, training: bool) -> Result<(Tensor, Vec<NodeCache>)> {
        let mut caches = Vec::with_capacity(self.nodes.len());
        let y = forward_nodes(&mut self.nodes, x, training, &mut caches)?;
        Ok((y, caches))
    }

    /// Accumulates parameter gradients; returns the input gradient.
    pub fn backward(&mut self, caches: &[NodeCache], grad_logits: &Tensor) -> Result<Tensor> {
        backward_nodes(&mut self.nodes, caches, grad_logits)
    }

    pub fn zero_grads(&mut self) {
        self.visit_params(&mut |_, _, grad, _| grad.fill(0.0));
    }

    pub fn step(&mut self, sgd: &SgdState) {
        let s = *sgd;
        self.visit_params(&mut move |_, value, grad, vel| {
            crate::nn::sgd_step(value, grad, vel, &s);
        });
    }

    /// Visits every trainable parameter as (name, values, grads, velocity).
    pub fn visit_params(&mut self, f: &mut ParamVisitor<'_>) {
        visit_nodes_params(&mut self.nodes, f);
    }

    /// Visits every persisted buffer (trainable parameters plus batch-norm
    /// running statistics) for checkpointing.
    pub fn visit_state(&mut self, f: &mut StateVisitor<'_>) {
        // shapes: kernels keep their 4-d shape, vectors are 1-d
        fn go(nodes: &mut [RtNode], f: &mut StateVisitor<'_>) {
            for node in nodes {
                match node {
                    RtNode::Layer(l) => state_of_layer(l, f),
                    RtNode::Residual { main, shortcut } => {
                        go(main, f);
                        go(shortcut, f);
                    }
                }
            }
        }
        go(&mut self.nodes, f);
    }

    /// Applies `f` to every persisted buffer, allowing in-place mutation
    /// (checkpoint loading).
    pub fn visit_state_mut(&mut self, f: &mut StateVisitorMut<'_>) -> Result<()> {
        fn go(nodes: &mut [RtNode], f: &mut StateVisitorMut<'_>) -> Result<()> {
            for node in nodes {
                match node {
                    RtNode::Layer(l) => state_of_layer_mut(l, f)?,
                    RtNode::Residual { main, shortcut } => {
                        go(main, f)?;
                        go(shortcut, f)?;
                    }
                }
            }
            Ok(())
        }
        go(&mut self.nodes, f)
    }

    pub fn has_onedconv(&self) -> bool {
        fn any(nodes: &[RtNode]) -> bool {
            nodes.iter().any(|n| match n {
                RtNode::Layer(RtLayer::OneD { .. }) => true,
                RtNode::Layer(_) => false,
                RtNode::Residual { main, shortcut } => any(main) || any(shortcut),
            })
        }
        any(&self.nodes)
    }

    /// Offset deviation statistics per OneDConv layer for one forward pass;
    /// `sample_base` offsets the reported sample index of the maximum.
    pub fn offset_stats(&self, caches: &[NodeCache], sample_base: usize) -> Vec<OffsetStats> {
        let mut out = Vec::new();
        let mut idx = 0;
        collect_offsets(&self.nodes, caches, sample_base, &mut out, &mut idx);
        out
    }

    /// Merges per-batch offset statistics layer by layer.
    pub fn merge_offset_stats(total: &mut Vec<OffsetStats>, batch: Vec<OffsetStats>) {
        if total.is_empty() {
            *total = batch;
            return;
        }
        for (t, b) in total.iter_mut().zip(batch) {
            t.sum_abs_dev += b.sum_abs_dev;
            t.count += b.count;
            if b.max_dev > t.max_dev {
                t.max_dev = b.max_dev;
                t.max_sample = b.max_sample;
                t.max_filter = b.max_filter;
                t.max_row = b.max_row;
                t.max_col = b.max_col;
                t.max_offset = b.max_offset;
            }
        }
    }
}

fn state_of_layer(layer: &mut RtLayer, f: &mut StateVisitor<'_>) {
    match layer {
        RtLayer::Conv { name, wts, .. } => {
            let shape = wts.kernel.shape().to_vec();
            f(&format!("{name}.kernel"), shape, wts.kernel.data());
            if let Some(b) = &wts.bias {
                f(&format!("{name}.bias"), vec![b.len()], b);
            }
        }
        RtLayer::OneD { name, wts, sw, .. } => {
            let shape = wts.kernel.shape().to_vec();
            f(&format!("{name}.kernel"), shape, wts.kernel.data());
            if let Some(b) = &wts.bias {
                f(&format!("{name}.bias"), vec![b.len()], b);
            }
            let shape = sw.kernel.shape().to_vec();
            f(&format!("{name}.shape_kernel"), shape, sw.kernel.data());
            f(&format!("{name}.shape_bias"), vec![sw.bias.len()], &sw.bias);
        }
        RtLayer::Bn { name, params, .. } => {
            let c = params.channels();
            f(&format!("{name}.gamma"), vec![c], &params.gamma);
            f(&format!("{name}.beta"), vec![c], &params.beta);
            f(&format!("{name}.running_mean"), vec![c], &params.running_mean);
            f(&format!("{name}.running_var"), vec![c], &params.running_var);
        }
        RtLayer::Fc { name, w, .. } => {
            f(
                &format!("{name}.weight"),
                vec![w.out_dim, w.in_dim],
                &w.weight,
            );
            f(&format!("{name}.bias"), vec![w.bias.len()], &w.bias);
        }
        RtLayer::Relu | RtLayer::MaxPool { .. } | RtLayer::AvgPool { .. } => {}
    }
}

fn state_of_layer_mut(layer: &mut RtLayer, f: &mut StateVisitorMut<'_>) -> Result<()> {
    match layer {
        RtLayer::Conv { name, wts, .. } => {
            let shape = wts.kernel.shape().to_vec();
            f(&format!("{name}.kernel"), shape, wts.kernel.data_mut())?;
            if let Some(b) = wts.bias.as_mut() {
                let len = b.len();
                f(&format!("{name}.bias"), vec![len], b)?;
            }
        }
        RtLayer::OneD { name, wts, sw, .. } => {
            let shape = wts.kernel.shape().to_vec();
            f(&format!("{name}.kernel"), shape, wts.kernel.data_mut())?;
            if let Some(b) = wts.bias.as_mut() {
                let len = b.len();
                f(&format!("{name}.bias"), vec![len], b)?;
            }
            let shape = sw.kernel.shape().to_vec();
            f(&format!("{name}.shape_kernel"), shape, sw.kernel.data_mut())?;
            let len = sw.bias.len();
            f(&format!("{name}.shape_bias"), vec![len], &mut sw.bias)?;
        }
        RtLayer::Bn { name, params, .. } => {
            let c = params.channels();
            f(&format!("{name}.gamma"), vec![c], &mut params.gamma)?;
            f(&format!("{name}.beta"), vec![c], &mut params.beta)?;
            f(
                &format!("{name}.running_mean"),
                vec![c],
                &mut params.running_mean,
            )?;
            f(
                &format!("{name}.running_var"),
                vec![c],
                &mut params.running_var,
            )?;
        }
        RtLayer::Fc { name, w, .. } => {
            f(
                &format!("{name}.weight"),
                vec![w.out_dim, w.in_dim],
                &mut w.weight,
            )?;
            let len = w.bias.len();
            f(&format!("{name}.bias"), vec![len], &mut w.bias)?;
        }
        RtLayer::Relu | RtLayer::MaxPool { .. } | RtLayer::AvgPool { .. } => {}
    }
    Ok(())
}
