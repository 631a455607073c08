//! Model graph descriptors with closed-form parameter and FLOPs accounting,
//! cross-validated by an instrumented scalar operation counter.

use crate::nn::ConvSpec;
use crate::tensor::Tensor;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    Vanilla,
    OneDConv,
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Variant> {
        match s {
            "vanilla" => Ok(Variant::Vanilla),
            "onedconv" => Ok(Variant::OneDConv),
            other => Err(Error::Config(format!("unknown variant '{}'", other))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Conv(ConvSpec),
    OneDConv(ConvSpec),
    BatchNorm { channels: usize },
    Relu,
    MaxPool { kernel: usize, stride: usize },
    AvgPool { kernel: usize, stride: usize },
    Fc { in_dim: usize, out_dim: usize },
}

/// One layer with its extents resolved at build time, `(C, H, W)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDescriptor {
    pub name: String,
    pub kind: LayerKind,
    pub in_shape: [usize; 3],
    pub out_shape: [usize; 3],
}

/// Graph node: a plain layer or a residual block computing
/// `relu(main(x) + shortcut(x))` (empty shortcut = identity).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GraphNode {
    Layer(LayerDescriptor),
    Residual {
        name: String,
        main: Vec<GraphNode>,
        shortcut: Vec<GraphNode>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelGraph {
    pub input: [usize; 3],
    pub classes: usize,
    pub nodes: Vec<GraphNode>,
}

/// Trainable parameters and (separately) batch-norm running statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ParamCount {
    pub trainable: u64,
    pub running_stats: u64,
}

struct Builder {
    cur: [usize; 3],
    nodes: Vec<GraphNode>,
    variant: Variant,
}

impl Builder {
    fn new(input: [usize; 3], variant: Variant) -> Builder {
        Builder {
            cur: input,
            nodes: Vec::new(),
            variant,
        }
    }

    fn push_layer(nodes: &mut Vec<GraphNode>, cur: &mut [usize; 3], name: &str, kind: LayerKind) {
        let in_shape = *cur;
        let out_shape = match &kind {
            LayerKind::Conv(spec) | LayerKind::OneDConv(spec) => {
                let (h, w) = spec
                    .out_extents(cur[1], cur[2])
                    .expect("builder extents stay valid");
                [spec.out_channels, h, w]
            }
            LayerKind::BatchNorm { .. } | LayerKind::Relu => *cur,
            LayerKind::MaxPool { kernel, stride } | LayerKind::AvgPool { kernel, stride } => [
                cur[0],
                (cur[1] - kernel) / stride + 1,
                (cur[2] - kernel) / stride + 1,
            ],
            LayerKind::Fc { out_dim, .. } => [*out_dim, 1, 1],
        };
        *cur = out_shape;
        nodes.push(GraphNode::Layer(LayerDescriptor {
            name: name.into(),
            kind,
            in_shape,
            out_shape,
        }));
    }

    /// 3x3 convolution (replaced by OneDConv in that variant), no bias.
    fn conv3(nodes: &mut Vec<GraphNode>, cur: &mut [usize; 3], variant: Variant, name: &str, out: usize, stride: usize) {
        let spec = ConvSpec::new(cur[0], out, 3)
            .with_stride(stride)
            .with_bias(false);
        let kind = match variant {
            Variant::Vanilla => LayerKind::Conv(spec),
            Variant::OneDConv => LayerKind::OneDConv(spec),
        };
        Self::push_layer(nodes, cur, name, kind);
    }

    fn bn_relu(nodes: &mut Vec<GraphNode>, cur: &mut [usize; 3], name: &str) {
        let c = cur[0];
        Self::push_layer(nodes, cur, &format!("{name}.bn"), LayerKind::BatchNorm { channels: c });
        Self::push_layer(nodes, cur, &format!("{name}.relu"), LayerKind::Relu);
    }

    /// Standard basic block: two 3x3 convolutions, projection shortcut when
    /// the extents change. The trailing ReLU lives in the residual node.
    fn basic_block(&mut self, name: &str, out: usize, stride: usize) {
        let mut main_cur = self.cur;
        let mut main = Vec::new();
        Self::conv3(&mut main, &mut main_cur, self.variant, &format!("{name}.conv1"), out, stride);
        let c = main_cur[0];
        Self::push_layer(&mut main, &mut main_cur, &format!("{name}.bn1"), LayerKind::BatchNorm { channels: c });
        Self::push_layer(&mut main, &mut main_cur, &format!("{name}.relu1"), LayerKind::Relu);
        Self::conv3(&mut main, &mut main_cur, self.variant, &format!("{name}.conv2"), out, 1);
        Self::push_layer(&mut main, &mut main_cur, &format!("{name}.bn2"), LayerKind::BatchNorm { channels: out });

        let mut shortcut = Vec::new();
        if stride != 1 || self.cur[0] != out {
            let mut sc_cur = self.cur;
            // 1x1 projections are not 3x3 kernels; they stay vanilla in both
            // variants.
            let spec = ConvSpec {
                in_channels: sc_cur[0],
                out_channels: out,
                kernel: 1,
                stride,
                padding: 0,
                has_bias: false,
            };
            Self::push_layer(&mut shortcut, &mut sc_cur, &format!("{name}.shortcut.conv"), LayerKind::Conv(spec));
            Self::push_layer(&mut shortcut, &mut sc_cur, &format!("{name}.shortcut.bn"), LayerKind::BatchNorm { channels: out });
            debug_assert_eq!(sc_cur, main_cur);
        }

        self.cur = main_cur;
        self.nodes.push(GraphNode::Residual {
            name: name.into(),
            main,
            shortcut,
        });
    }

    fn layer(&mut self, name: &str, kind: LayerKind) {
        Self::push_layer(&mut self.nodes, &mut self.cur, name, kind);
    }
}

/// The 18-layer residual network: a stride-2 stem, four stages of two basic
/// blocks at 64/128/256/512 channels, global average pooling, and a
/// `classes`-way fully connected head. In the OneDConv variant every 3x3
/// convolution is replaced.
pub fn build_resnet18(variant: Variant, classes: usize, input: [usize; 3]) -> ModelGraph {
    let mut b = Builder::new(input, variant);
    Builder::conv3(&mut b.nodes, &mut b.cur, variant, "conv1", 64, 2);
    Builder::bn_relu(&mut b.nodes, &mut b.cur, "conv1");
    let stages: [(&str, usize, usize); 4] = [
        ("conv2_x", 64, 1),
        ("conv3_x", 128, 2),
        ("conv4_x", 256, 2),
        ("conv5_x", 512, 2),
    ];
    for (stage, channels, first_stride) in stages {
        b.basic_block(&format!("{stage}.0"), channels, first_stride);
        b.basic_block(&format!("{stage}.1"), channels, 1);
    }
    let pool = b.cur[1];
    b.layer(
        "avgpool",
        LayerKind::AvgPool {
            kernel: pool,
            stride: pool,
        },
    );
    let in_dim = b.cur[0];
    b.layer(
        "fc",
        LayerKind::Fc {
            in_dim,
            out_dim: classes,
        },
    );
    ModelGraph {
        input,
        classes,
        nodes: b.nodes,
    }
}

/// Desk-scale network: conv 16, pool, conv 32, pool, fc, with BN+ReLU after
/// each convolution.
pub fn build_tiny_cnn(variant: Variant, classes: usize, input: [usize; 3]) -> ModelGraph {
    let mut b = Builder::new(input, variant);
    Builder::conv3(&mut b.nodes, &mut b.cur, variant, "conv1", 16, 1);
    Builder::bn_relu(&mut b.nodes, &mut b.cur, "conv1");
    b.layer("pool1", LayerKind::MaxPool { kernel: 2, stride: 2 });
    Builder::conv3(&mut b.nodes, &mut b.cur, variant, "conv2", 32, 1);
    Builder::bn_relu(&mut b.nodes, &mut b.cur, "conv2");
    b.layer("pool2", LayerKind::MaxPool { kernel: 2, stride: 2 });
    let in_dim = b.cur[0] * b.cur[1] * b.cur[2];
    b.layer(
        "fc",
        LayerKind::Fc {
            in_dim,
            out_dim: classes,
        },
    );
    ModelGraph {
        input,
        classes,
        nodes: b.nodes,
    }
}

/// Extra parameters a OneDConv layer carries over its vanilla twin:
/// `(K-1) * (C_in * K^2 + 1)`, independent of the output channel count.
pub fn onedconv_overhead_params(spec: &ConvSpec) -> u64 {
    ((spec.kernel - 1) * (spec.in_channels * spec.kernel * spec.kernel + 1)) as u64
}

fn layer_params(l: &LayerDescriptor) -> ParamCount {
    match &l.kind {
        LayerKind::Conv(spec) => ParamCount {
            trainable: (spec.kernel * spec.kernel * spec.in_channels * spec.out_channels
                + if spec.has_bias { spec.out_channels } else { 0 })
                as u64,
            running_stats: 0,
        },
        LayerKind::OneDConv(spec) => {
            let vanilla = (spec.kernel * spec.kernel * spec.in_channels * spec.out_channels
                + if spec.has_bias { spec.out_channels } else { 0 })
                as u64;
            ParamCount {
                trainable: vanilla + onedconv_overhead_params(spec),
                running_stats: 0,
            }
        }
        LayerKind::BatchNorm { channels } => ParamCount {
            trainable: 2 * *channels as u64,
            running_stats: 2 * *channels as u64,
        },
        LayerKind::Fc { in_dim, out_dim } => ParamCount {
            trainable: (in_dim * out_dim + out_dim) as u64,
            running_stats: 0,
        },
        LayerKind::Relu | LayerKind::MaxPool { .. } | LayerKind::AvgPool { .. } => {
            ParamCount::default()
        }
    }
}

fn walk<'a>(nodes: &'a [GraphNode], out: &mut Vec<&'a LayerDescriptor>) {
    for n in nodes {
        match n {
            GraphNode::Layer(l) => out.push(l),
            GraphNode::Residual { main, shortcut, .. } => {
                walk(main, out);
                walk(shortcut, out);
            }
        }
    }
}

/// Flat view of every layer descriptor in network order (shortcut layers
/// after their block's main path).
pub fn layers(g: &ModelGraph) -> Vec<&LayerDescriptor> {
    let mut out = Vec::new();
    walk(&g.nodes, &mut out);
    out
}

/// Exact parameter count over the whole graph.
pub fn count_params(g: &ModelGraph) -> ParamCount {
    let mut total = ParamCount::default();
    for l in layers(g) {
        let p = layer_params(l);
        total.trainable += p.trainable;
        total.running_stats += p.running_stats;
    }
    total
}

/// Closed-form FLOPs `(main, overhead)` of one layer, 2 ops per
/// multiply-accumulate, `H`/`W` being the layer's output extents:
/// `main = 2*H*W*C_out*(C_in*K^2 + 1)`, and for OneDConv additionally
/// `overhead = 2*H*W*(K-1)*(C_in*K^2 + 1)`. Non-convolution layers count 0.
pub fn count_flops(l: &LayerDescriptor) -> (u64, u64) {
    match &l.kind {
        LayerKind::Conv(spec) => {
            let (h, w) = (l.out_shape[1] as u64, l.out_shape[2] as u64);
            let term = (spec.in_channels * spec.kernel * spec.kernel + 1) as u64;
            (2 * h * w * spec.out_channels as u64 * term, 0)
        }
        LayerKind::OneDConv(spec) => {
            let (h, w) = (l.out_shape[1] as u64, l.out_shape[2] as u64);
            let term = (spec.in_channels * spec.kernel * spec.kernel + 1) as u64;
            (
                2 * h * w * spec.out_channels as u64 * term,
                2 * h * w * (spec.kernel - 1) as u64 * term,
            )
        }
        _ => (0, 0),
    }
}

/// Graph totals of [`count_flops`].
pub fn graph_flops(g: &ModelGraph) -> (u64, u64) {
    layers(g).iter().fold((0, 0), |(m, o), l| {
        let (lm, lo) = count_flops(l);
        (m + lm, o + lo)
    })
}

/// Counts every floating multiply and add a scalar reference execution of the
/// layer performs. The bias is applied as a multiply-accumulate so a vanilla
/// convolution with bias reproduces the closed form exactly.
pub fn measured_flops(l: &LayerDescriptor, input: &Tensor) -> Result<u64> {
    let [n, cin, h, w] = input.shape();
    if n == 0 || cin == 0 || h == 0 || w == 0 {
        return Ok(0);
    }
    match &l.kind {
        LayerKind::Conv(spec) => {
            if cin != spec.in_channels {
                return Err(Error::ChannelMismatch {
                    expected: spec.in_channels,
                    got: cin,
                });
            }
            let mut counter = OpCounter::default();
            counted_conv(input, spec, &mut counter)?;
            Ok(counter.total())
        }
        LayerKind::OneDConv(spec) => {
            if cin != spec.in_channels {
                return Err(Error::ChannelMismatch {
                    expected: spec.in_channels,
                    got: cin,
                });
            }
            let mut counter = OpCounter::default();
            counted_onedconv(input, spec, &mut counter)?;
            Ok(counter.total())
        }
        _ => Ok(0),
    }
}

#[derive(Debug, Default)]
struct OpCounter {
    muls: u64,
    adds: u64,
}

impl OpCounter {
    #[inline]
    fn mul(&mut self, a: f64, b: f64) -> f64 {
        self.muls += 1;
        a * b
    }

    #[inline]
    fn add(&mut self, a: f64, b: f64) -> f64 {
        self.adds += 1;
        a + b
    }

    #[inline]
    fn mac(&mut self, acc: f64, a: f64, b: f64) -> f64 {
        let p = self.mul(a, b);
        self.add(acc, p)
    }

    fn total(&self) -> u64 {
        self.muls + self.adds
    }
}

fn deterministic_weights(len: usize) -> Vec<f64> {
    (0..len).map(|i| 0.25 + 0.5 * ((i % 7) as f64) / 7.0).collect()
}

fn counted_conv(x: &Tensor, spec: &ConvSpec, counter: &mut OpCounter) -> Result<()> {
    let [n, cin, h, w] = x.shape();
    let (ho, wo) = spec.out_extents(h, w)?;
    let k = spec.kernel;
    let kernel = deterministic_weights(spec.out_channels * cin * k * k);
    let bias = deterministic_weights(spec.out_channels);
    let pad = spec.padding as isize;
    for b in 0..n {
        for o in 0..spec.out_channels {
            for i in 0..ho {
                for j in 0..wo {
                    let mut acc = 0.0;
                    for c in 0..cin {
                        for ki in 0..k {
                            for kj in 0..k {
                                let hh = (i * spec.stride + ki) as isize - pad;
                                let ww = (j * spec.stride + kj) as isize - pad;
                                let v = if hh >= 0 && ww >= 0 && (hh as usize) < h && (ww as usize) < w {
                                    x.at(b, c, hh as usize, ww as usize)
                                } else {
                                    0.0
                                };
                                acc = counter.mac(acc, kernel[((o * cin + c) * k + ki) * k + kj], v);
                            }
                        }
                    }
                    // bias folded in as one multiply-accumulate
                    let _ = counter.mac(acc, 1.0, bias[o]);
                }
            }
        }
    }
    Ok(())
}

fn counted_onedconv(x: &Tensor, spec: &ConvSpec, counter: &mut OpCounter) -> Result<()> {
    let [n, cin, h, w] = x.shape();
    let (ho, wo) = spec.out_extents(h, w)?;
    let k = spec.kernel;
    let k2 = k / 2;
    let w_pad = w + 2 * spec.padding;
    let h_pad = h + 2 * spec.padding;
    let center = k / 2;

    // Shape convolution: an ordinary convolution with K-1 output channels.
    let shape_spec = ConvSpec {
        in_channels: cin,
        out_channels: k - 1,
        kernel: k,
        stride: spec.stride,
        padding: spec.padding,
        has_bias: true,
    };
    counted_conv(x, &shape_spec, counter)?;
    // Offset values do not change the count; a fixed fractional delta
    // exercises the full interpolation path.
    let shape_val = 0.3;

    let kernel = deterministic_weights(spec.out_channels * cin * k * k);
    let bias = deterministic_weights(spec.out_channels);

    let fetch = |b: usize, c: usize, p: i64| -> f64 {
        if p < 0 {
            return 0.0;
        }
        let (ph, pw) = ((p as usize) / w_pad, (p as usize) % w_pad);
        if ph >= h_pad
            || ph < spec.padding
            || pw < spec.padding
            || ph >= h + spec.padding
            || pw >= w + spec.padding
        {
            0.0
        } else {
            x.at(b, c, ph - spec.padding, pw - spec.padding)
        }
    };

    let mut samples = vec![0.0; cin * k * k];
    for b in 0..n {
        for i in 0..ho {
            for j in 0..wo {
                // gaps and cumulative offsets
                let mut d = vec![0.0; k];
                let mut gaps = vec![0.0; k - 1];
                for gp in gaps.iter_mut() {
                    *gp = counter.add(w_pad as f64, shape_val);
                }
                let mut acc = 0.0;
                for fi in center + 1..k {
                    acc = counter.add(acc, gaps[fi - 1]);
                    d[fi] = acc;
                }
                acc = 0.0;
                for fi in (0..center).rev() {
                    acc = counter.add(acc, -gaps[fi]);
                    d[fi] = acc;
                }

                let base = ((i * spec.stride + k2) * w_pad + j * spec.stride + k2) as i64;

                // Interpolated samples are shared across output channels, so
                // they are gathered once per location.
                for fi in 0..k {
                    let fl = d[fi].floor();
                    let frac = counter.add(d[fi], -fl);
                    let one_minus = counter.add(1.0, -frac);
                    for c in 0..cin {
                        for t in 0..k {
                            let pos = base + (t as i64 - k2 as i64) + fl as i64;
                            let a = counter.mul(one_minus, fetch(b, c, pos));
                            let bq = counter.mul(frac, fetch(b, c, pos + 1));
                            samples[(c * k + fi) * k + t] = counter.add(a, bq);
                        }
                    }
                }

                for o in 0..spec.out_channels {
                    let mut out = 0.0;
                    for c in 0..cin {
                        for fi in 0..k {
                            for t in 0..k {
                                out = counter.mac(
                                    out,
                                    kernel[((o * cin + c) * k + fi) * k + t],
                                    samples[(c * k + fi) * k + t],
                                );
                            }
                        }
                    }
                    let _ = counter.mac(out, 1.0, bias[o]);
                }
            }
        }
    }
    Ok(())
}

pub fn graph_to_json(g: &ModelGraph) -> String {
    serde_json::to_string_pretty(g).expect("graph serializes")
}

pub fn graph_from_json(s: &str) -> Result<ModelGraph> {
    serde_json::from_str(s).map_err(|e| Error::Config(format!("bad graph json: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resnet18_vanilla_params_match_reported() {
        let g = build_resnet18(Variant::Vanilla, 10, [3, 32, 32]);
        let p = count_params(&g).trainable;
        // 11.17 M within 2%
        let target = 11_170_000.0;
        assert!(
            ((p as f64) - target).abs() / target < 0.02,
            "vanilla params {}",
            p
        );
    }

    #[test]
    fn resnet18_onedconv_params_match_reported() {
        let g = build_resnet18(Variant::OneDConv, 10, [3, 32, 32]);
        let p = count_params(&g).trainable;
        let target = 11_240_000.0;
        assert!(
            ((p as f64) - target).abs() / target < 0.02,
            "onedconv params {}",
            p
        );
    }

    #[test]
    fn variant_difference_is_exact_overhead_sum() {
        let v = build_resnet18(Variant::Vanilla, 10, [3, 32, 32]);
        let o = build_resnet18(Variant::OneDConv, 10, [3, 32, 32]);
        let diff = count_params(&o).trainable - count_params(&v).trainable;
        let expected: u64 = layers(&o)
            .iter()
            .filter_map(|l| match &l.kind {
                LayerKind::OneDConv(spec) => Some(onedconv_overhead_params(spec)),
                _ => None,
            })
            .sum();
        assert_eq!(diff, expected);
    }

    #[test]
    fn tiny_cnn_hand_sum() {
        let g = build_tiny_cnn(Variant::Vanilla, 10, [1, 32, 32]);
        // conv1 1*16*9 + bn 32 + conv2 16*32*9 + bn 64 + fc 2048*10+10
        assert_eq!(count_params(&g).trainable, 144 + 32 + 4608 + 64 + 20490);
        let o = build_tiny_cnn(Variant::OneDConv, 10, [1, 32, 32]);
        // shape convs: 2*(9*1+1) + 2*(9*16+1)
        assert_eq!(count_params(&o).trainable, 25338 + 20 + 290);
    }

    #[test]
    fn single_conv_param_examples() {
        let spec = ConvSpec::new(3, 64, 3);
        let l = LayerDescriptor {
            name: "c".into(),
            kind: LayerKind::Conv(spec),
            in_shape: [3, 32, 32],
            out_shape: [64, 32, 32],
        };
        assert_eq!(layer_params(&l).trainable, 1792);
        let l1 = LayerDescriptor {
            kind: LayerKind::OneDConv(spec),
            ..l
        };
        assert_eq!(layer_params(&l1).trainable, 1792 + 56);
    }

    #[test]
    fn empty_graph_counts_zero() {
        let g = ModelGraph {
            input: [0, 0, 0],
            classes: 0,
            nodes: Vec::new(),
        };
        assert_eq!(count_params(&g).trainable, 0);
    }

    #[test]
    fn flops_reference_layer() {
        let spec = ConvSpec::new(3, 64, 3);
        let l = LayerDescriptor {
            name: "c".into(),
            kind: LayerKind::OneDConv(spec),
            in_shape: [3, 32, 32],
            out_shape: [64, 32, 32],
        };
        let (main, overhead) = count_flops(&l);
        assert_eq!(main, 3_670_016);
        assert_eq!(overhead, 114_688);
        // overhead/main = (K-1)/C_out
        assert!((overhead as f64 / main as f64 - 2.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn k1_conv_has_zero_overhead() {
        let spec = ConvSpec {
            in_channels: 4,
            out_channels: 8,
            kernel: 1,
            stride: 1,
            padding: 0,
            has_bias: false,
        };
        let l = LayerDescriptor {
            name: "p".into(),
            kind: LayerKind::Conv(spec),
            in_shape: [4, 8, 8],
            out_shape: [8, 8, 8],
        };
        assert_eq!(count_flops(&l).1, 0);
    }

    #[test]
    fn overhead_ratio_holds_per_layer() {
        let g = build_resnet18(Variant::OneDConv, 10, [3, 32, 32]);
        for l in layers(&g) {
            if let LayerKind::OneDConv(spec) = &l.kind {
                let (main, overhead) = count_flops(l);
                let expected = (spec.kernel - 1) as f64 / spec.out_channels as f64;
                assert!((overhead as f64 / main as f64 - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn measured_matches_closed_form_vanilla() {
        let spec = ConvSpec::new(2, 3, 3);
        let l = LayerDescriptor {
            name: "c".into(),
            kind: LayerKind::Conv(spec),
            in_shape: [2, 6, 6],
            out_shape: [3, 6, 6],
        };
        let x = Tensor::filled([1, 2, 6, 6], 0.5);
        let measured = measured_flops(&l, &x).unwrap();
        let expected = 2 * 6 * 6 * 3 * (2 * 9 + 1);
        assert_eq!(measured, expected as u64);
    }

    #[test]
    fn measured_onedconv_overhead_within_2x() {
        let spec = ConvSpec::new(2, 8, 3);
        let vanilla = LayerDescriptor {
            name: "c".into(),
            kind: LayerKind::Conv(spec),
            in_shape: [2, 6, 6],
            out_shape: [8, 6, 6],
        };
        let oned = LayerDescriptor {
            kind: LayerKind::OneDConv(spec),
            ..vanilla.clone()
        };
        let x = Tensor::filled([1, 2, 6, 6], 0.5);
        let m_vanilla = measured_flops(&vanilla, &x).unwrap();
        let m_oned = measured_flops(&oned, &x).unwrap();
        let measured_overhead = m_oned - m_vanilla;
        let (_, formula_overhead) = count_flops(&oned);
        let ratio = measured_overhead as f64 / formula_overhead as f64;
        assert!(
            ratio >= 1.0 && ratio <= 2.0,
            "measured overhead ratio {}",
            ratio
        );
    }

    #[test]
    fn zero_extent_input_counts_zero() {
        let spec = ConvSpec::new(2, 3, 3);
        let l = LayerDescriptor {
            name: "c".into(),
            kind: LayerKind::Conv(spec),
            in_shape: [2, 6, 6],
            out_shape: [3, 6, 6],
        };
        let x = Tensor::zeros([0, 2, 6, 6]);
        assert_eq!(measured_flops(&l, &x).unwrap(), 0);
    }

    #[test]
    fn graph_json_round_trip_preserves_counts() {
        for variant in [Variant::Vanilla, Variant::OneDConv] {
            let g = build_resnet18(variant, 10, [3, 32, 32]);
            let rebuilt = graph_from_json(&graph_to_json(&g)).unwrap();
            assert_eq!(count_params(&g), count_params(&rebuilt));
            assert_eq!(graph_flops(&g), graph_flops(&rebuilt));
        }
    }

    #[test]
    fn resnet_head_shape() {
        let g = build_resnet18(Variant::Vanilla, 10, [3, 32, 32]);
        let all = layers(&g);
        let fc = all.last().unwrap();
        assert!(matches!(
            fc.kind,
            LayerKind::Fc {
                in_dim: 512,
                out_dim: 10
            }
        ));
        assert_eq!(fc.out_shape, [10, 1, 1]);
    }
}
