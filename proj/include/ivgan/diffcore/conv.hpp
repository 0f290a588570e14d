#pragma once

// 2-D convolution and its adjoint, both as im2col + GEMM. Semantics are
// cross-correlation (no kernel flip), the usual deep-learning convention.
//
//   conv2d:            x [N,C,H,W],  w [O,C,kh,kw],  b [O]  ->  [N,O,Ho,Wo]
//                      Ho = floor((H + 2p - kh) / s) + 1
//   conv2d_transpose:  x [N,C,H,W],  w [C,O,kh,kw],  b [O]  ->  [N,O,Ho,Wo]
//                      Ho = (H - 1) s - 2p + kh
//
// conv2d_transpose(y, w) is the exact adjoint of conv2d(., w) for bias-free
// calls with matching geometry.

#include <Eigen/Core>

#include <cstddef>
#include <string>
#include <vector>

#include "ivgan/diffcore/tensor.hpp"

namespace ivgan::ops {

struct ConvGeometry {
    std::size_t stride = 1;
    std::size_t padding = 0;
};

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

struct Im2ColDims {
    std::size_t channels, height, width;  // image
    std::size_t kh, kw, stride, pad;
    std::size_t out_h, out_w;  // sliding-window grid
};

/// image [C,H,W] -> columns [C*kh*kw, out_h*out_w]
template <class T>
void im2col(const T* image, const Im2ColDims& d, T* cols)
{
    const std::size_t n_cols = d.out_h * d.out_w;
    for (std::size_t c = 0; c < d.channels; ++c) {
        for (std::size_t i = 0; i < d.kh; ++i) {
            for (std::size_t j = 0; j < d.kw; ++j) {
                T* row = cols + ((c * d.kh + i) * d.kw + j) * n_cols;
                for (std::size_t oy = 0; oy < d.out_h; ++oy) {
                    const long iy = static_cast<long>(oy * d.stride + i) - static_cast<long>(d.pad);
                    T* dst = row + oy * d.out_w;
                    if (iy < 0 || iy >= static_cast<long>(d.height)) {
                        for (std::size_t ox = 0; ox < d.out_w; ++ox) {
                            dst[ox] = T{0};
                        }
                        continue;
                    }
                    const T* src = image + (c * d.height + static_cast<std::size_t>(iy)) * d.width;
                    for (std::size_t ox = 0; ox < d.out_w; ++ox) {
                        const long ix = static_cast<long>(ox * d.stride + j) - static_cast<long>(d.pad);
                        dst[ox] = (ix < 0 || ix >= static_cast<long>(d.width)) ? T{0}
                                                                                : src[static_cast<std::size_t>(ix)];
                    }
                }
            }
        }
    }
}

/// Adjoint of im2col: scatter-add columns back into image [C,H,W].
template <class T>
void col2im(const T* cols, const Im2ColDims& d, T* image)
{
    const std::size_t n_cols = d.out_h * d.out_w;
    for (std::size_t c = 0; c < d.channels; ++c) {
        for (std::size_t i = 0; i < d.kh; ++i) {
            for (std::size_t j = 0; j < d.kw; ++j) {
                const T* row = cols + ((c * d.kh + i) * d.kw + j) * n_cols;
                for (std::size_t oy = 0; oy < d.out_h; ++oy) {
                    const long iy = static_cast<long>(oy * d.stride + i) - static_cast<long>(d.pad);
                    if (iy < 0 || iy >= static_cast<long>(d.height)) {
                        continue;
                    }
                    T* dst = image + (c * d.height + static_cast<std::size_t>(iy)) * d.width;
                    const T* src = row + oy * d.out_w;
                    for (std::size_t ox = 0; ox < d.out_w; ++ox) {
                        const long ix = static_cast<long>(ox * d.stride + j) - static_cast<long>(d.pad);
                        if (ix >= 0 && ix < static_cast<long>(d.width)) {
                            dst[static_cast<std::size_t>(ix)] += src[ox];
                        }
                    }
                }
            }
        }
    }
}

template <class T>
void check_conv_inputs(const char* op, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                       std::size_t w_in_axis, std::size_t w_out_axis, ConvGeometry g)
{
    if (x.rank() != 4) {
        throw ShapeError(std::string(op) + ": input must be [N,C,H,W], got " + shape_str(x.shape()));
    }
    if (w.rank() != 4) {
        throw ShapeError(std::string(op) + ": weight must be rank 4, got " + shape_str(w.shape()));
    }
    if (g.stride < 1) {
        throw ShapeError(std::string(op) + ": stride must be >= 1");
    }
    if (w.dim(w_in_axis) != x.dim(1)) {
        throw ShapeError(std::string(op) + ": input has " + std::to_string(x.dim(1)) +
                         " channels but weight " + shape_str(w.shape()) + " expects " +
                         std::to_string(w.dim(w_in_axis)));
    }
    if (b.defined() && (b.rank() != 1 || b.dim(0) != w.dim(w_out_axis))) {
        throw ShapeError(std::string(op) + ": bias shape " + shape_str(b.shape()) + " does not match " +
                         std::to_string(w.dim(w_out_axis)) + " output channels");
    }
}

}  // namespace detail

inline std::size_t conv_output_size(std::size_t in, std::size_t kernel, ConvGeometry g)
{
    return (in + 2 * g.padding - kernel) / g.stride + 1;
}

inline std::size_t conv_transpose_output_size(std::size_t in, std::size_t kernel, ConvGeometry g)
{
    return (in - 1) * g.stride + kernel - 2 * g.padding;
}

/// Cross-correlation. `bias` may be an undefined tensor.
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, ConvGeometry g)
{
    detail::check_conv_inputs("conv2d", x, weight, bias, 1, 0, g);
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t o = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
    if (h + 2 * g.padding < kh || w + 2 * g.padding < kw) {
        throw ShapeError("conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                         " does not fit padded input " + std::to_string(h + 2 * g.padding) + "x" +
                         std::to_string(w + 2 * g.padding));
    }
    const detail::Im2ColDims dims{c, h, w, kh, kw, g.stride, g.padding, conv_output_size(h, kh, g),
                                  conv_output_size(w, kw, g)};
    const std::size_t k = c * kh * kw;
    const std::size_t cols_n = dims.out_h * dims.out_w;

    std::vector<T> out(n * o * cols_n);
    std::vector<T> cols(k * cols_n);
    detail::ConstMatMap<T> wm(weight.values().data(), static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(k));
    for (std::size_t b = 0; b < n; ++b) {
        detail::im2col(x.values().data() + b * c * h * w, dims, cols.data());
        detail::ConstMatMap<T> cm(cols.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(cols_n));
        detail::MatMap<T> om(out.data() + b * o * cols_n, static_cast<Eigen::Index>(o),
                             static_cast<Eigen::Index>(cols_n));
        om.noalias() = wm * cm;
        if (bias.defined()) {
            for (std::size_t oc = 0; oc < o; ++oc) {
                om.row(static_cast<Eigen::Index>(oc)).array() += bias.values()[oc];
            }
        }
    }

    auto xn = x.node_ptr();
    auto wn = weight.node_ptr();
    auto bn = bias.defined() ? bias.node_ptr() : nullptr;
    return ivgan::detail::make_result<T>(
        "conv2d", Shape{n, o, dims.out_h, dims.out_w}, std::move(out), {&x, &weight, &bias},
        [xn, wn, bn, dims, n, o, k, cols_n](ivgan::detail::Node<T>& self) {
            auto* gx = ivgan::detail::grad_of(xn);
            auto* gw = ivgan::detail::grad_of(wn);
            auto* gb = ivgan::detail::grad_of(bn);
            const std::size_t image_n = dims.channels * dims.height * dims.width;
            std::vector<T> cols(k * cols_n);
            detail::ConstMatMap<T> wm(wn->value.data(), static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(k));
            for (std::size_t b = 0; b < n; ++b) {
                detail::ConstMatMap<T> dy(self.grad.data() + b * o * cols_n, static_cast<Eigen::Index>(o),
                                          static_cast<Eigen::Index>(cols_n));
                if (gw) {
                    detail::im2col(xn->value.data() + b * image_n, dims, cols.data());
                    detail::ConstMatMap<T> cm(cols.data(), static_cast<Eigen::Index>(k),
                                              static_cast<Eigen::Index>(cols_n));
                    detail::MatMap<T> gwm(gw->data(), static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(k));
                    gwm.noalias() += dy * cm.transpose();
                }
                if (gb) {
                    for (std::size_t oc = 0; oc < o; ++oc) {
                        (*gb)[oc] += dy.row(static_cast<Eigen::Index>(oc)).sum();
                    }
                }
                if (gx) {
                    detail::MatMap<T> dcols(cols.data(), static_cast<Eigen::Index>(k),
                                            static_cast<Eigen::Index>(cols_n));
                    dcols.noalias() = wm.transpose() * dy;
                    detail::col2im(cols.data(), dims, gx->data() + b * image_n);
                }
            }
        });
}

/// Transposed convolution (gradient of conv2d w.r.t. its input). `bias` may be
/// an undefined tensor.
template <class T>
Tensor<T> conv2d_transpose(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, ConvGeometry g)
{
    detail::check_conv_inputs("conv2d_transpose", x, weight, bias, 0, 1, g);
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t o = weight.dim(1), kh = weight.dim(2), kw = weight.dim(3);
    if ((h - 1) * g.stride + kh <= 2 * g.padding || (w - 1) * g.stride + kw <= 2 * g.padding) {
        throw ShapeError("conv2d_transpose: padding " + std::to_string(g.padding) +
                         " leaves no output for input " + shape_str(x.shape()));
    }
    const std::size_t out_h = conv_transpose_output_size(h, kh, g);
    const std::size_t out_w = conv_transpose_output_size(w, kw, g);
    // Geometry of the forward conv that this op is the adjoint of: its image is
    // our output, its sliding-window grid is our input grid.
    const detail::Im2ColDims dims{o, out_h, out_w, kh, kw, g.stride, g.padding, h, w};
    const std::size_t k = o * kh * kw;
    const std::size_t hw = h * w;
    const std::size_t out_image = o * out_h * out_w;

    std::vector<T> out(n * out_image, T{0});
    std::vector<T> cols(k * hw);
    detail::ConstMatMap<T> wm(weight.values().data(), static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k));
    for (std::size_t b = 0; b < n; ++b) {
        detail::ConstMatMap<T> xm(x.values().data() + b * c * hw, static_cast<Eigen::Index>(c),
                                  static_cast<Eigen::Index>(hw));
        detail::MatMap<T> cm(cols.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(hw));
        cm.noalias() = wm.transpose() * xm;
        T* dst = out.data() + b * out_image;
        detail::col2im(cols.data(), dims, dst);
        if (bias.defined()) {
            for (std::size_t oc = 0; oc < o; ++oc) {
                const T bv = bias.values()[oc];
                for (std::size_t i = 0; i < out_h * out_w; ++i) {
                    dst[oc * out_h * out_w + i] += bv;
                }
            }
        }
    }

    auto xn = x.node_ptr();
    auto wn = weight.node_ptr();
    auto bn = bias.defined() ? bias.node_ptr() : nullptr;
    return ivgan::detail::make_result<T>(
        "conv2d_transpose", Shape{n, o, out_h, out_w}, std::move(out), {&x, &weight, &bias},
        [xn, wn, bn, dims, n, c, k, hw, out_image](ivgan::detail::Node<T>& self) {
            auto* gx = ivgan::detail::grad_of(xn);
            auto* gw = ivgan::detail::grad_of(wn);
            auto* gb = ivgan::detail::grad_of(bn);
            const std::size_t plane = dims.height * dims.width;
            std::vector<T> cols(k * hw);
            detail::ConstMatMap<T> wm(wn->value.data(), static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k));
            for (std::size_t b = 0; b < n; ++b) {
                const T* dy = self.grad.data() + b * out_image;
                if (gb) {
                    for (std::size_t oc = 0; oc < dims.channels; ++oc) {
                        T s{0};
                        for (std::size_t i = 0; i < plane; ++i) {
                            s += dy[oc * plane + i];
                        }
                        (*gb)[oc] += s;
                    }
                }
                if (!gx && !gw) {
                    continue;
                }
                detail::im2col(dy, dims, cols.data());
                detail::ConstMatMap<T> cm(cols.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(hw));
                if (gx) {
                    detail::MatMap<T> gxm(gx->data() + b * c * hw, static_cast<Eigen::Index>(c),
                                          static_cast<Eigen::Index>(hw));
                    gxm.noalias() += wm * cm;
                }
                if (gw) {
                    detail::ConstMatMap<T> xm(xn->value.data() + b * c * hw, static_cast<Eigen::Index>(c),
                                              static_cast<Eigen::Index>(hw));
                    detail::MatMap<T> gwm(gw->data(), static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k));
                    gwm.noalias() += xm * cm.transpose();
                }
            }
        });
}

}  // namespace ivgan::ops
