//! Python bindings: the tensor type plus the main operator, baseline,
//! accounting, data and training entry points.

use onedconv_core::accounting::{
    build_resnet18, build_tiny_cnn, count_flops, count_params, graph_flops, layers, Variant,
};
use onedconv_core::data::{
    load_idx, sample_params, warp, DistortionSpec,
};
use onedconv_core::gradcheck::{check, CheckOp};
use onedconv_core::nn::{conv2d_forward, ConvSpec, ConvWeights};
use onedconv_core::onedconv::{
    linear_sample, offsets_from_shape, onedconv_forward, ShapeConvWeights,
};
use onedconv_core::tensor::{flat_index, FlatView, Tensor};
use onedconv_core::train::{metrics_csv, parse_config, train};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: onedconv_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Dense 4-D tensor (batch, channels, height, width), row-major.
#[pyclass(name = "Tensor", from_py_object)]
#[derive(Clone)]
struct PyTensor {
    inner: Tensor,
}

#[pymethods]
impl PyTensor {
    #[new]
    #[pyo3(signature = (shape, values=None, fill=0.0))]
    fn new(shape: [usize; 4], values: Option<Vec<f64>>, fill: f64) -> PyResult<Self> {
        let inner = match values {
            Some(v) => Tensor::from_vec(shape, v).map_err(err)?,
            None => Tensor::filled(shape, fill),
        };
        Ok(PyTensor { inner })
    }

    #[getter]
    fn shape(&self) -> [usize; 4] {
        self.inner.shape()
    }

    fn at(&self, b: usize, c: usize, h: usize, w: usize) -> f64 {
        self.inner.at(b, c, h, w)
    }

    /// Flat row-major copy of the data.
    fn tolist(&self) -> Vec<f64> {
        self.inner.data().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Tensor(shape={:?})", self.inner.shape())
    }
}

/// h * width + w
#[pyfunction(name = "flat_index")]
fn py_flat_index(h: usize, w: usize, width: usize) -> usize {
    flat_index(h, w, width)
}

/// Linear interpolation with zero extension over a flattened plane.
#[pyfunction(name = "linear_sample")]
fn py_linear_sample(plane: Vec<f64>, width: usize, l: f64) -> f64 {
    linear_sample(&FlatView::new(&plane, width), l)
}

fn conv_spec(x: &PyTensor, kernel: &PyTensor, stride: usize, padding: Option<usize>, has_bias: bool) -> ConvSpec {
    let [cout, cin, k, _] = kernel.inner.shape();
    let _ = x;
    ConvSpec {
        in_channels: cin,
        out_channels: cout,
        kernel: k,
        stride,
        padding: padding.unwrap_or(k / 2),
        has_bias,
    }
}

/// Vanilla dense convolution; kernel is (C_out, C_in, K, K).
#[pyfunction(name = "conv2d")]
#[pyo3(signature = (x, kernel, bias=None, stride=1, padding=None))]
fn py_conv2d(
    x: &PyTensor,
    kernel: &PyTensor,
    bias: Option<Vec<f64>>,
    stride: usize,
    padding: Option<usize>,
) -> PyResult<PyTensor> {
    let spec = conv_spec(x, kernel, stride, padding, bias.is_some());
    let wts = ConvWeights {
        kernel: kernel.inner.clone(),
        bias,
    };
    Ok(PyTensor {
        inner: conv2d_forward(&x.inner, &spec, &wts).map_err(err)?,
    })
}

/// OneDConv forward; returns (y, offsets). The shape kernel is
/// (K-1, C_in, K, K) and `shape_bias` has K-1 entries.
#[pyfunction(name = "onedconv")]
#[pyo3(signature = (x, kernel, shape_kernel, shape_bias, bias=None, stride=1, padding=None))]
fn py_onedconv(
    x: &PyTensor,
    kernel: &PyTensor,
    shape_kernel: &PyTensor,
    shape_bias: Vec<f64>,
    bias: Option<Vec<f64>>,
    stride: usize,
    padding: Option<usize>,
) -> PyResult<(PyTensor, PyTensor)> {
    let spec = conv_spec(x, kernel, stride, padding, bias.is_some());
    let wts = ConvWeights {
        kernel: kernel.inner.clone(),
        bias,
    };
    let sw = ShapeConvWeights {
        kernel: shape_kernel.inner.clone(),
        bias: shape_bias,
    };
    let (y, cache) = onedconv_forward(&x.inner, &spec, &wts, &sw).map_err(err)?;
    Ok((
        PyTensor { inner: y },
        PyTensor {
            inner: cache.offsets().clone(),
        },
    ))
}

/// Cumulative offsets from a (N, K-1, H, W) shape map.
#[pyfunction(name = "offsets_from_shape")]
fn py_offsets_from_shape(shape_map: &PyTensor, w_pad: usize) -> PyTensor {
    PyTensor {
        inner: offsets_from_shape(&shape_map.inner, w_pad),
    }
}

fn parse_variant(variant: &str) -> PyResult<Variant> {
    variant.parse().map_err(err)
}

/// (trainable_params, main_flops, overhead_flops) for a built-in model.
#[pyfunction(name = "account")]
#[pyo3(signature = (model="resnet18", variant="onedconv", classes=10, channels=3))]
fn py_account(model: &str, variant: &str, classes: usize, channels: usize) -> PyResult<(u64, u64, u64)> {
    let variant = parse_variant(variant)?;
    let g = match model {
        "resnet18" => build_resnet18(variant, classes, [channels, 32, 32]),
        "tiny-cnn" => build_tiny_cnn(variant, classes, [channels, 32, 32]),
        other => return Err(PyValueError::new_err(format!("unknown model '{other}'"))),
    };
    let params = count_params(&g).trainable;
    let (main, overhead) = graph_flops(&g);
    Ok((params, main, overhead))
}

/// Closed-form per-layer FLOPs (main, overhead) of every convolution layer.
#[pyfunction(name = "layer_flops")]
#[pyo3(signature = (model="resnet18", variant="onedconv", classes=10, channels=3))]
fn py_layer_flops(
    model: &str,
    variant: &str,
    classes: usize,
    channels: usize,
) -> PyResult<Vec<(String, u64, u64)>> {
    let variant = parse_variant(variant)?;
    let g = match model {
        "resnet18" => build_resnet18(variant, classes, [channels, 32, 32]),
        "tiny-cnn" => build_tiny_cnn(variant, classes, [channels, 32, 32]),
        other => return Err(PyValueError::new_err(format!("unknown model '{other}'"))),
    };
    Ok(layers(&g)
        .into_iter()
        .map(|l| {
            let (m, o) = count_flops(l);
            (l.name.clone(), m, o)
        })
        .filter(|(_, m, _)| *m > 0)
        .collect())
}

/// Finite-difference check; returns (max_rel_err, pass).
#[pyfunction(name = "gradcheck")]
#[pyo3(signature = (op, seed=0, tol=None))]
fn py_gradcheck(op: &str, seed: u64, tol: Option<f64>) -> PyResult<(f64, bool)> {
    let op = match op {
        "conv2d" => CheckOp::Conv2d,
        "fc" => CheckOp::Fc,
        "batchnorm" => CheckOp::BatchNorm,
        "softmax_ce" => CheckOp::SoftmaxCe,
        "onedconv" => CheckOp::OneDConv,
        other => return Err(PyValueError::new_err(format!("unknown op '{other}'"))),
    };
    let report = check(op, seed, tol.unwrap_or(op.default_tol())).map_err(err)?;
    Ok((report.max_rel(), report.pass))
}

/// Warp one plane: scale -> rotate -> translate about the center.
#[pyfunction(name = "warp_image")]
#[pyo3(signature = (values, h, w, angle_deg=0.0, scale=1.0, tx=0.0, ty=0.0))]
fn py_warp(values: Vec<f64>, h: usize, w: usize, angle_deg: f64, scale: f64, tx: f64, ty: f64) -> PyResult<Vec<f64>> {
    if values.len() != h * w {
        return Err(PyValueError::new_err("values length must equal h*w"));
    }
    Ok(warp(&values, h, w, angle_deg, scale, tx, ty))
}

/// Per-image distortion parameters (angle_deg, scale, tx, ty).
#[pyfunction(name = "distortion_params")]
fn py_distortion_params(mode: &str, seed: u64, index: usize) -> PyResult<(f64, f64, f64, f64)> {
    let spec = match mode {
        "rotated" => DistortionSpec::rotated(seed),
        "rts" => DistortionSpec::rts(seed),
        "identity" => DistortionSpec::identity(seed),
        other => return Err(PyValueError::new_err(format!("unknown mode '{other}'"))),
    };
    let p = sample_params(&spec, index);
    Ok((p.angle_deg, p.scale, p.tx, p.ty))
}

/// Load an IDX pair; returns (images tensor, labels).
#[pyfunction(name = "load_idx")]
#[pyo3(signature = (images, labels, limit=None))]
fn py_load_idx(images: &str, labels: &str, limit: Option<usize>) -> PyResult<(PyTensor, Vec<usize>)> {
    let ds = load_idx(images, labels, limit).map_err(err)?;
    Ok((PyTensor { inner: ds.images }, ds.labels))
}

/// Write a synthetic digit IDX pair.
#[pyfunction(name = "write_digits")]
fn py_write_digits(images: &str, labels: &str, count: usize, seed: u64) -> PyResult<()> {
    onedconv_core::data::write_digit_idx(images, labels, count, seed).map_err(err)
}

/// Run a training config (key=value text); returns the metrics CSV.
#[pyfunction(name = "train_from_config")]
fn py_train(config_text: &str) -> PyResult<String> {
    let cfg = parse_config(config_text).map_err(err)?;
    let (_, metrics) = train(&cfg).map_err(err)?;
    Ok(metrics_csv(&metrics))
}

#[pymodule]
fn onedconv_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTensor>()?;
    m.add_function(wrap_pyfunction!(py_flat_index, m)?)?;
    m.add_function(wrap_pyfunction!(py_linear_sample, m)?)?;
    m.add_function(wrap_pyfunction!(py_conv2d, m)?)?;
    m.add_function(wrap_pyfunction!(py_onedconv, m)?)?;
    m.add_function(wrap_pyfunction!(py_offsets_from_shape, m)?)?;
    m.add_function(wrap_pyfunction!(py_account, m)?)?;
    m.add_function(wrap_pyfunction!(py_layer_flops, m)?)?;
    m.add_function(wrap_pyfunction!(py_gradcheck, m)?)?;
    m.add_function(wrap_pyfunction!(py_warp, m)?)?;
    m.add_function(wrap_pyfunction!(py_distortion_params, m)?)?;
    m.add_function(wrap_pyfunction!(py_load_idx, m)?)?;
    m.add_function(wrap_pyfunction!(py_write_digits, m)?)?;
    m.add_function(wrap_pyfunction!(py_train, m)?)?;
    Ok(())
}
