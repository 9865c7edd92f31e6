#include "ehrnet/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <thread>

namespace ehrnet {

namespace {

// Static-chunk parallel for. Each index is processed by exactly one thread and
// every output element keeps its sequential accumulation order, so results are
// bit-identical to a serial run.
void parallel_for(std::int64_t begin, std::int64_t end, const std::function<void(std::int64_t)>& fn) {
    const std::int64_t n = end - begin;
    if (n <= 0) return;
    unsigned hw = std::thread::hardware_concurrency();
    if (hw <= 1 || n == 1) {
        for (std::int64_t i = begin; i < end; ++i) fn(i);
        return;
    }
    const std::int64_t nthreads = std::min<std::int64_t>(hw, n);
    std::vector<std::thread> pool;
    pool.reserve(nthreads - 1);
    auto worker = [&](std::int64_t t) {
        const std::int64_t chunk = (n + nthreads - 1) / nthreads;
        const std::int64_t lo = begin + t * chunk;
        const std::int64_t hi = std::min(end, lo + chunk);
        for (std::int64_t i = lo; i < hi; ++i) fn(i);
    };
    for (std::int64_t t = 1; t < nthreads; ++t) pool.emplace_back(worker, t);
    worker(0);
    for (auto& th : pool) th.join();
}

int conv_out_size(int in, int k, int stride, int padding) {
    return (in + 2 * padding - k) / stride + 1;
}

void check_conv_args(const Tensor& input, const Tensor& weights, std::span<const float> bias,
                     int stride, int padding, int groups) {
    if (stride < 1) throw ConfigError("conv2d: stride must be >= 1, got " + std::to_string(stride));
    if (padding < 0) throw ConfigError("conv2d: padding must be >= 0, got " + std::to_string(padding));
    if (groups < 1) throw ConfigError("conv2d: groups must be >= 1, got " + std::to_string(groups));
    const int in_ch = input.channels();
    const int out_ch = weights.dims[0];
    if (weights.dims[2] != weights.dims[3])
        throw ConfigError("conv2d: only square kernels supported, weights " + weights.shape_str());
    if (in_ch % groups != 0)
        throw ConfigError("conv2d: input channels " + std::to_string(in_ch) +
                          " not divisible by groups " + std::to_string(groups));
    if (out_ch % groups != 0)
        throw ConfigError("conv2d: output channels " + std::to_string(out_ch) +
                          " not divisible by groups " + std::to_string(groups));
    if (weights.dims[1] != in_ch / groups)
        throw ConfigError("conv2d: weights expect " + std::to_string(weights.dims[1]) +
                          " input channels per group, input has " + std::to_string(in_ch) + "/" +
                          std::to_string(groups) + " (input " + input.shape_str() + ", weights " +
                          weights.shape_str() + ")");
    if (!bias.empty() && static_cast<int>(bias.size()) != out_ch)
        throw ConfigError("conv2d: bias length " + std::to_string(bias.size()) +
                          " != output channels " + std::to_string(out_ch));
    const int k = weights.dims[2];
    if (conv_out_size(input.height(), k, stride, padding) < 1 ||
        conv_out_size(input.width(), k, stride, padding) < 1)
        throw ConfigError("conv2d: kernel " + std::to_string(k) + " does not fit input " +
                          input.shape_str() + " with stride " + std::to_string(stride) +
                          ", padding " + std::to_string(padding));
}

// Depthwise path: one input channel per output channel, direct loops.
void conv_depthwise(const Tensor& in, const Tensor& w, std::span<const float> bias,
                    int stride, int padding, Tensor& out) {
    const int k = w.dims[2];
    const int oh = out.height(), ow = out.width(), ih = in.height(), iw = in.width();
    for (int n = 0; n < in.batch(); ++n) {
        parallel_for(0, out.channels(), [&](std::int64_t c) {
            const float* src = &in.data[in.index(n, static_cast<int>(c), 0, 0)];
            const float* ker = &w.data[w.index(static_cast<int>(c), 0, 0, 0)];
            float* dst = &out.data[out.index(n, static_cast<int>(c), 0, 0)];
            const float b = bias.empty() ? 0.0f : bias[c];
            for (int oy = 0; oy < oh; ++oy) {
                const int iy0 = oy * stride - padding;
                for (int ox = 0; ox < ow; ++ox) {
                    const int ix0 = ox * stride - padding;
                    float acc = b;
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = iy0 + ky;
                        if (iy < 0 || iy >= ih) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ix0 + kx;
                            if (ix < 0 || ix >= iw) continue;
                            acc += src[iy * iw + ix] * ker[ky * k + kx];
                        }
                    }
                    dst[oy * ow + ox] = acc;
                }
            }
        });
    }
}

// General path: im2col over row tiles, then an (oc x K) * (K x cols) product
// with a contiguous inner axis so the compiler can vectorize.
void conv_im2col(const Tensor& in, const Tensor& w, std::span<const float> bias,
                 int stride, int padding, int groups, Tensor& out) {
    const int k = w.dims[2];
    const int icpg = in.channels() / groups;
    const int ocpg = out.channels() / groups;
    const int oh = out.height(), ow = out.width(), ih = in.height(), iw = in.width();
    const int K = icpg * k * k;

    const bool pointwise = (k == 1 && stride == 1 && padding == 0);
    const int rows_per_tile = std::max(1, 16384 / std::max(1, ow));
    const int ntiles = (oh + rows_per_tile - 1) / rows_per_tile;

    for (int n = 0; n < in.batch(); ++n) {
        for (int g = 0; g < groups; ++g) {
            const float* wg = &w.data[static_cast<std::int64_t>(g) * ocpg * K];
            const float* src = &in.data[in.index(n, g * icpg, 0, 0)];
            float* dstg = &out.data[out.index(n, g * ocpg, 0, 0)];

            if (pointwise) {
                // B is the input itself: (K x H*W) with rows = channels.
                const std::int64_t cols = static_cast<std::int64_t>(oh) * ow;
                parallel_for(0, ocpg, [&](std::int64_t oc) {
                    float* dst = dstg + oc * cols;
                    const float b = bias.empty() ? 0.0f : bias[g * ocpg + oc];
                    std::fill(dst, dst + cols, b);
                    const float* wrow = wg + oc * K;
                    for (int kk = 0; kk < K; ++kk) {
                        const float a = wrow[kk];
                        const float* brow = src + static_cast<std::int64_t>(kk) * cols;
                        for (std::int64_t j = 0; j < cols; ++j) dst[j] += a * brow[j];
                    }
                });
                continue;
            }

            parallel_for(0, ntiles, [&](std::int64_t tile) {
                const int oy0 = static_cast<int>(tile) * rows_per_tile;
                const int oy1 = std::min(oh, oy0 + rows_per_tile);
                const std::int64_t cols = static_cast<std::int64_t>(oy1 - oy0) * ow;
                std::vector<float> bt(static_cast<size_t>(K) * cols);
                // Row order (ic, ky, kx) matches the weight layout so the
                // accumulation order equals the naive loop's.
                for (int ic = 0; ic < icpg; ++ic) {
                    const float* plane = src + static_cast<std::int64_t>(ic) * ih * iw;
                    for (int ky = 0; ky < k; ++ky) {
                        for (int kx = 0; kx < k; ++kx) {
                            float* brow = bt.data() +
                                          (static_cast<std::int64_t>(ic) * k * k + ky * k + kx) * cols;
                            std::int64_t j = 0;
                            for (int oy = oy0; oy < oy1; ++oy) {
                                const int iy = oy * stride - padding + ky;
                                if (iy < 0 || iy >= ih) {
                                    for (int ox = 0; ox < ow; ++ox) brow[j++] = 0.0f;
                                    continue;
                                }
                                const float* line = plane + static_cast<std::int64_t>(iy) * iw;
                                for (int ox = 0; ox < ow; ++ox) {
                                    const int ix = ox * stride - padding + kx;
                                    brow[j++] = (ix < 0 || ix >= iw) ? 0.0f : line[ix];
                                }
                            }
                        }
                    }
                }
                for (int oc = 0; oc < ocpg; ++oc) {
                    float* dst = dstg + static_cast<std::int64_t>(oc) * oh * ow +
                                 static_cast<std::int64_t>(oy0) * ow;
                    const float b = bias.empty() ? 0.0f : bias[g * ocpg + oc];
                    std::fill(dst, dst + cols, b);
                    const float* wrow = wg + static_cast<std::int64_t>(oc) * K;
                    for (int kk = 0; kk < K; ++kk) {
                        const float a = wrow[kk];
                        const float* brow = bt.data() + static_cast<std::int64_t>(kk) * cols;
                        for (std::int64_t j = 0; j < cols; ++j) dst[j] += a * brow[j];
                    }
                }
            });
        }
    }
}

} // namespace

Tensor conv2d(const Tensor& input, const Tensor& weights, std::span<const float> bias,
              int stride, int padding, int groups) {
    check_conv_args(input, weights, bias, stride, padding, groups);
    const int k = weights.dims[2];
    Tensor out(input.batch(), weights.dims[0], conv_out_size(input.height(), k, stride, padding),
               conv_out_size(input.width(), k, stride, padding));
    if (groups == input.channels() && weights.dims[0] == input.channels())
        conv_depthwise(input, weights, bias, stride, padding, out);
    else
        conv_im2col(input, weights, bias, stride, padding, groups, out);
    return out;
}

Tensor conv2d_transposed(const Tensor& input, const Tensor& weights, int stride, int padding) {
    if (stride < 1)
        throw ConfigError("conv2d_transposed: stride must be >= 1, got " + std::to_string(stride));
    if (padding < 0)
        throw ConfigError("conv2d_transposed: padding must be >= 0");
    if (weights.dims[0] != input.channels())
        throw ConfigError("conv2d_transposed: weights expect " + std::to_string(weights.dims[0]) +
                          " input channels, input " + input.shape_str());
    if (weights.dims[2] != weights.dims[3])
        throw ConfigError("conv2d_transposed: only square kernels supported");
    const int k = weights.dims[2];
    const int oh = (input.height() - 1) * stride - 2 * padding + k;
    const int ow = (input.width() - 1) * stride - 2 * padding + k;
    if (oh < 1 || ow < 1)
        throw ConfigError("conv2d_transposed: degenerate output " + std::to_string(oh) + "x" +
                          std::to_string(ow));
    const int in_ch = input.channels(), out_ch = weights.dims[1];
    const int ih = input.height(), iw = input.width();
    Tensor out(input.batch(), out_ch, oh, ow);

    // Gather formulation: out(oy,ox) sums input(iy,ix) where
    // iy*stride + ky - padding == oy for some kernel tap ky.
    for (int n = 0; n < input.batch(); ++n) {
        parallel_for(0, out_ch, [&](std::int64_t oc) {
            float* dst = &out.data[out.index(n, static_cast<int>(oc), 0, 0)];
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    float acc = 0.0f;
                    for (int ic = 0; ic < in_ch; ++ic) {
                        const float* src = &input.data[input.index(n, ic, 0, 0)];
                        const float* ker = &weights.data[weights.index(ic, static_cast<int>(oc), 0, 0)];
                        for (int ky = 0; ky < k; ++ky) {
                            const int t = oy + padding - ky;
                            if (t < 0 || t % stride != 0) continue;
                            const int iy = t / stride;
                            if (iy >= ih) continue;
                            for (int kx = 0; kx < k; ++kx) {
                                const int u = ox + padding - kx;
                                if (u < 0 || u % stride != 0) continue;
                                const int ix = u / stride;
                                if (ix >= iw) continue;
                                acc += src[iy * iw + ix] * ker[ky * k + kx];
                            }
                        }
                    }
                    dst[oy * ow + ox] = acc;
                }
            }
        });
    }
    return out;
}

Tensor batchnorm_inference(const Tensor& input, std::span<const float> mean,
                           std::span<const float> variance, std::span<const float> gamma,
                           std::span<const float> beta, float epsilon) {
    const size_t c = static_cast<size_t>(input.channels());
    if (mean.size() != c || variance.size() != c || gamma.size() != c || beta.size() != c)
        throw ConfigError("batchnorm_inference: parameter vectors must have length " +
                          std::to_string(c) + ", got " + std::to_string(mean.size()) + "/" +
                          std::to_string(variance.size()) + "/" + std::to_string(gamma.size()) +
                          "/" + std::to_string(beta.size()));
    for (float v : variance)
        if (v < 0.0f) throw ConfigError("batchnorm_inference: negative variance");
    Tensor out = input;
    const std::int64_t plane = static_cast<std::int64_t>(input.height()) * input.width();
    for (int n = 0; n < input.batch(); ++n) {
        for (int ch = 0; ch < input.channels(); ++ch) {
            const float scale = gamma[ch] / std::sqrt(variance[ch] + epsilon);
            const float shift = beta[ch] - mean[ch] * scale;
            float* p = &out.data[out.index(n, ch, 0, 0)];
            for (std::int64_t i = 0; i < plane; ++i) p[i] = p[i] * scale + shift;
        }
    }
    return out;
}

Tensor activation(const Tensor& input, Activation kind) {
    Tensor out = input;
    switch (kind) {
    case Activation::relu:
        for (float& v : out.data) v = v > 0.0f ? v : 0.0f;
        break;
    case Activation::swish:
        for (float& v : out.data) v = v / (1.0f + std::exp(-v));
        break;
    case Activation::sigmoid:
        for (float& v : out.data) v = 1.0f / (1.0f + std::exp(-v));
        break;
    }
    return out;
}

Tensor upsample_nearest(const Tensor& input, int factor) {
    if (factor < 1) throw ConfigError("upsample_nearest: factor must be >= 1");
    if (factor == 1) return input;
    Tensor out(input.batch(), input.channels(), input.height() * factor, input.width() * factor);
    const int ih = input.height(), iw = input.width();
    for (int n = 0; n < input.batch(); ++n)
        for (int c = 0; c < input.channels(); ++c) {
            const float* src = &input.data[input.index(n, c, 0, 0)];
            float* dst = &out.data[out.index(n, c, 0, 0)];
            for (int y = 0; y < ih * factor; ++y) {
                const float* line = src + (y / factor) * iw;
                for (int x = 0; x < iw * factor; ++x) dst[y * iw * factor + x] = line[x / factor];
            }
        }
    return out;
}

Tensor maxpool_window(const Tensor& input, int window) {
    if (window < 1 || window % 2 == 0)
        throw ConfigError("maxpool_window: window must be odd and >= 1, got " +
                          std::to_string(window));
    if (window == 1) return input;
    const int r = window / 2;
    const int h = input.height(), w = input.width();
    Tensor out(input.batch(), input.channels(), h, w);
    for (int n = 0; n < input.batch(); ++n)
        for (int c = 0; c < input.channels(); ++c) {
            const float* src = &input.data[input.index(n, c, 0, 0)];
            float* dst = &out.data[out.index(n, c, 0, 0)];
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    float m = -std::numeric_limits<float>::infinity();
                    const int y0 = std::max(0, y - r), y1 = std::min(h - 1, y + r);
                    const int x0 = std::max(0, x - r), x1 = std::min(w - 1, x + r);
                    for (int yy = y0; yy <= y1; ++yy)
                        for (int xx = x0; xx <= x1; ++xx) m = std::max(m, src[yy * w + xx]);
                    dst[y * w + x] = m;
                }
        }
    return out;
}

Tensor elementwise_add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw ConfigError("elementwise_add: shape mismatch " + a.shape_str() + " vs " +
                          b.shape_str());
    Tensor out = a;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

Tensor concat_channels(const std::vector<const Tensor*>& inputs) {
    if (inputs.empty()) throw ConfigError("concat_channels: no inputs");
    const Tensor& first = *inputs.front();
    int total_ch = 0;
    for (const Tensor* t : inputs) {
        if (t->batch() != first.batch() || t->height() != first.height() ||
            t->width() != first.width())
            throw ConfigError("concat_channels: mismatched batch/spatial dims " + t->shape_str() +
                              " vs " + first.shape_str());
        total_ch += t->channels();
    }
    Tensor out(first.batch(), total_ch, first.height(), first.width());
    const std::int64_t plane = static_cast<std::int64_t>(first.height()) * first.width();
    for (int n = 0; n < first.batch(); ++n) {
        int co = 0;
        for (const Tensor* t : inputs) {
            std::memcpy(&out.data[out.index(n, co, 0, 0)], &t->data[t->index(n, 0, 0, 0)],
                        sizeof(float) * plane * t->channels());
            co += t->channels();
        }
    }
    return out;
}

Tensor global_avg_pool(const Tensor& input) {
    Tensor out(input.batch(), input.channels(), 1, 1);
    const std::int64_t plane = static_cast<std::int64_t>(input.height()) * input.width();
    for (int n = 0; n < input.batch(); ++n)
        for (int c = 0; c < input.channels(); ++c) {
            const float* src = &input.data[input.index(n, c, 0, 0)];
            double s = 0.0;
            for (std::int64_t i = 0; i < plane; ++i) s += src[i];
            out.at(n, c, 0, 0) = static_cast<float>(s / static_cast<double>(plane));
        }
    return out;
}

Tensor multiply_channels(const Tensor& input, const Tensor& gate) {
    if (gate.batch() != input.batch() || gate.channels() != input.channels() ||
        gate.height() != 1 || gate.width() != 1)
        throw ConfigError("multiply_channels: gate must be (n, c, 1, 1), got " + gate.shape_str() +
                          " for input " + input.shape_str());
    Tensor out = input;
    const std::int64_t plane = static_cast<std::int64_t>(input.height()) * input.width();
    for (int n = 0; n < input.batch(); ++n)
        for (int c = 0; c < input.channels(); ++c) {
            const float g = gate.at(n, c, 0, 0);
            float* p = &out.data[out.index(n, c, 0, 0)];
            for (std::int64_t i = 0; i < plane; ++i) p[i] *= g;
        }
    return out;
}

Tensor dense(const Tensor& input, std::span<const float> weights, std::span<const float> bias,
             int out_features) {
    if (input.height() != 1 || input.width() != 1)
        throw ConfigError("dense: expected pooled (n, c, 1, 1) input, got " + input.shape_str());
    const int in_features = input.channels();
    if (weights.size() != static_cast<size_t>(in_features) * out_features)
        throw ConfigError("dense: weight count " + std::to_string(weights.size()) + " != " +
                          std::to_string(in_features) + "*" + std::to_string(out_features));
    if (!bias.empty() && static_cast<int>(bias.size()) != out_features)
        throw ConfigError("dense: bias length mismatch");
    Tensor out(input.batch(), out_features, 1, 1);
    for (int n = 0; n < input.batch(); ++n)
        for (int o = 0; o < out_features; ++o) {
            float acc = bias.empty() ? 0.0f : bias[o];
            const float* w = weights.data() + static_cast<std::int64_t>(o) * in_features;
            for (int i = 0; i < in_features; ++i) acc += w[i] * input.at(n, i, 0, 0);
            out.at(n, o, 0, 0) = acc;
        }
    return out;
}

} // namespace ehrnet
