#include "morphoreg/tensor/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace morphoreg::tensor {

auto to_string(const Shape& shape) -> std::string {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        os << (i ? "," : "") << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
template <typename S>
using MapM = Eigen::Map<Mat<S>>;
template <typename S>
using CMapM = Eigen::Map<const Mat<S>>;

template <typename T>
using GradSlots = std::span<std::vector<T>* const>;

// Records on the operands' tape if any, else returns a plain tensor.
template <typename T, typename Fn>
auto emit(Shape shape, std::vector<T> values, std::vector<const BasicTensor<T>*> inputs, Fn&& backward)
    -> BasicTensor<T> {
    BasicTape<T>* tape = nullptr;
    for (const auto* t : inputs) {
        if (t->on_tape()) {
            tape = t->tape();
            break;
        }
    }
    if (tape == nullptr) {
        return BasicTensor<T>(std::move(shape), std::move(values));
    }
    return tape->record(std::move(shape), std::move(values), std::move(inputs),
                        typename BasicTape<T>::BackwardFn(std::forward<Fn>(backward)));
}

template <typename T>
auto to_double(std::span<const T> src) -> std::vector<double> {
    return std::vector<double>(src.begin(), src.end());
}

void require(bool ok, const std::string& what) {
    if (!ok) {
        throw ShapeError(what);
    }
}

struct ConvGeometry {
    std::size_t n, c, d, h, w;
    std::size_t o, k, stride, pad;
    std::size_t od, oh, ow;

    [[nodiscard]] auto patch() const -> std::size_t { return c * k * k * k; }
    [[nodiscard]] auto out_voxels() const -> std::size_t { return od * oh * ow; }
    [[nodiscard]] auto in_voxels() const -> std::size_t { return d * h * w; }
};

// Range of output columns [lo, hi) whose tap `offset` lands inside [0, extent).
struct TapRange {
    std::size_t lo, hi;
};

inline auto tap_range(std::size_t out_extent, std::size_t stride, std::size_t offset, std::size_t pad,
                      std::size_t extent) -> TapRange {
    // need 0 <= o*stride + offset - pad < extent
    std::size_t lo = 0;
    if (offset < pad) {
        lo = (pad - offset + stride - 1) / stride;
    }
    std::size_t hi = 0;
    if (extent + pad > offset) {
        hi = std::min(out_extent, (extent + pad - offset - 1) / stride + 1);
    }
    return {std::min(lo, hi), hi};
}

// Column buffer laid out as a [patch, out_voxels] row-major matrix, i.e. an
// (out_voxels x patch) column-major matrix for Eigen.
template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* cols) {
    const auto P = g.out_voxels();
    const auto k = g.k;
    std::size_t row = 0;
    for (std::size_t c = 0; c < g.c; ++c) {
        const T* xc = x + c * g.in_voxels();
        for (std::size_t dz = 0; dz < k; ++dz) {
            const auto zr = tap_range(g.od, g.stride, dz, g.pad, g.d);
            for (std::size_t dy = 0; dy < k; ++dy) {
                const auto yr = tap_range(g.oh, g.stride, dy, g.pad, g.h);
                for (std::size_t dx = 0; dx < k; ++dx, ++row) {
                    const auto xr = tap_range(g.ow, g.stride, dx, g.pad, g.w);
                    T* dst = cols + row * P;
                    std::fill(dst, dst + P, T{0});
                    for (std::size_t z = zr.lo; z < zr.hi; ++z) {
                        const auto iz = z * g.stride + dz - g.pad;
                        for (std::size_t y = yr.lo; y < yr.hi; ++y) {
                            const auto iy = y * g.stride + dy - g.pad;
                            T* out = dst + (z * g.oh + y) * g.ow;
                            const T* xrow = xc + (iz * g.h + iy) * g.w;
                            if (xr.lo == xr.hi) {
                                continue;
                            }
                            if (g.stride == 1) {
                                std::copy(xrow + xr.lo + dx - g.pad, xrow + xr.hi + dx - g.pad, out + xr.lo);
                            } else {
                                for (std::size_t xo = xr.lo; xo < xr.hi; ++xo) {
                                    out[xo] = xrow[xo * g.stride + dx - g.pad];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

// Scatter-adds a column-gradient buffer back onto the input layout.
template <typename T>
void col2im(const T* cols, const ConvGeometry& g, T* dx) {
    const auto P = g.out_voxels();
    const auto k = g.k;
    std::size_t row = 0;
    for (std::size_t c = 0; c < g.c; ++c) {
        T* xc = dx + c * g.in_voxels();
        for (std::size_t dz = 0; dz < k; ++dz) {
            const auto zr = tap_range(g.od, g.stride, dz, g.pad, g.d);
            for (std::size_t dy = 0; dy < k; ++dy) {
                const auto yr = tap_range(g.oh, g.stride, dy, g.pad, g.h);
                for (std::size_t ddx = 0; ddx < k; ++ddx, ++row) {
                    const auto xr = tap_range(g.ow, g.stride, ddx, g.pad, g.w);
                    const T* src = cols + row * P;
                    for (std::size_t z = zr.lo; z < zr.hi; ++z) {
                        const auto iz = z * g.stride + dz - g.pad;
                        for (std::size_t y = yr.lo; y < yr.hi; ++y) {
                            const auto iy = y * g.stride + dy - g.pad;
                            const T* in = src + (z * g.oh + y) * g.ow;
                            T* xrow = xc + (iz * g.h + iy) * g.w;
                            for (std::size_t xo = xr.lo; xo < xr.hi; ++xo) {
                                xrow[xo * g.stride + ddx - g.pad] += in[xo];
                            }
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

template <typename T>
auto conv3d(const BasicTensor<T>& input, const BasicTensor<T>& kernel, const BasicTensor<T>& bias,
            std::size_t stride, std::size_t padding) -> BasicTensor<T> {
    require(input.rank() == 5, "conv3d input must be [N,C,D,H,W], got " + to_string(input.shape()));
    require(kernel.rank() == 5, "conv3d kernel must be [O,C,k,k,k], got " + to_string(kernel.shape()));
    const auto k = kernel.dim(2);
    require(kernel.dim(3) == k && kernel.dim(4) == k, "conv3d kernel must be cubic, got " + to_string(kernel.shape()));
    require(kernel.dim(1) == input.dim(1), "conv3d channel mismatch: input " + to_string(input.shape()) +
                                               " vs kernel " + to_string(kernel.shape()));
    require(bias.rank() == 1 && bias.dim(0) == kernel.dim(0),
            "conv3d bias " + to_string(bias.shape()) + " does not match kernel " + to_string(kernel.shape()));
    require(stride > 0, "conv3d stride must be positive");
    for (std::size_t ax = 2; ax < 5; ++ax) {
        require(k <= input.dim(ax) + 2 * padding, "conv3d kernel " + to_string(kernel.shape()) +
                                                     " larger than padded input " + to_string(input.shape()));
    }

    ConvGeometry g{};
    g.n = input.dim(0);
    g.c = input.dim(1);
    g.d = input.dim(2);
    g.h = input.dim(3);
    g.w = input.dim(4);
    g.o = kernel.dim(0);
    g.k = k;
    g.stride = stride;
    g.pad = padding;
    g.od = (g.d + 2 * padding - k) / stride + 1;
    g.oh = (g.h + 2 * padding - k) / stride + 1;
    g.ow = (g.w + 2 * padding - k) / stride + 1;

    const auto P = g.out_voxels();
    const auto K = g.patch();
    const auto Pi = static_cast<Eigen::Index>(P);
    const auto Ki = static_cast<Eigen::Index>(K);
    const auto Oi = static_cast<Eigen::Index>(g.o);
    CMapM<T> w_t(kernel.data().data(), Ki, Oi);
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias.data().data(), Oi);

    std::vector<T> out(g.n * g.o * P);
    std::vector<T> cols(P * K);
    const auto x = input.data();
    for (std::size_t n = 0; n < g.n; ++n) {
        im2col(x.data() + n * g.c * g.in_voxels(), g, cols.data());
        CMapM<T> a(cols.data(), Pi, Ki);
        MapM<T> y(out.data() + n * g.o * P, Pi, Oi);
        y.noalias() = a * w_t;
        y.rowwise() += b;
    }

    auto xbuf = input.buffer();
    auto wbuf = kernel.buffer();
    return emit<T>({g.n, g.o, g.od, g.oh, g.ow}, std::move(out), {&input, &kernel, &bias},
                   [g, xbuf, wbuf](std::span<const T> grad, GradSlots<T> gi) {
                       const auto P = g.out_voxels();
                       const auto K = g.patch();
                       const auto Pi = static_cast<Eigen::Index>(P);
                       const auto Ki = static_cast<Eigen::Index>(K);
                       const auto Oi = static_cast<Eigen::Index>(g.o);
                       CMapM<T> w_t(wbuf->data(), Ki, Oi);
                       std::vector<T> cols(P * K);
                       for (std::size_t n = 0; n < g.n; ++n) {
                           CMapM<T> dy(grad.data() + n * g.o * P, Pi, Oi);
                           if (gi[1] != nullptr) {
                               im2col(xbuf->data() + n * g.c * g.in_voxels(), g, cols.data());
                               CMapM<T> a(cols.data(), Pi, Ki);
                               MapM<T> dw(gi[1]->data(), Ki, Oi);
                               dw.noalias() += a.transpose() * dy;
                           }
                           if (gi[2] != nullptr) {
                               for (std::size_t o = 0; o < g.o; ++o) {
                                   const T* col = grad.data() + (n * g.o + o) * P;
                                   (*gi[2])[o] += static_cast<T>(std::accumulate(col, col + P, 0.0));
                               }
                           }
                           if (gi[0] != nullptr) {
                               MapM<T> da(cols.data(), Pi, Ki);
                               da.noalias() = dy * w_t.transpose();
                               col2im(cols.data(), g, gi[0]->data() + n * g.c * g.in_voxels());
                           }
                       }
                   });
}

template <typename T>
auto maxpool3d(const BasicTensor<T>& input, std::size_t k, std::size_t stride) -> BasicTensor<T> {
    require(input.rank() == 5, "maxpool3d input must be [N,C,D,H,W], got " + to_string(input.shape()));
    require(k > 0 && stride > 0, "maxpool3d window and stride must be positive");
    for (std::size_t ax = 2; ax < 5; ++ax) {
        require(k <= input.dim(ax),
                "maxpool3d window " + std::to_string(k) + " larger than input " + to_string(input.shape()));
    }
    const auto N = input.dim(0), C = input.dim(1), D = input.dim(2), H = input.dim(3), W = input.dim(4);
    const auto od = (D - k) / stride + 1, oh = (H - k) / stride + 1, ow = (W - k) / stride + 1;
    std::vector<T> out(N * C * od * oh * ow);
    auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
    const auto x = input.data();
    std::size_t o = 0;
    for (std::size_t nc = 0; nc < N * C; ++nc) {
        const auto base = nc * D * H * W;
        for (std::size_t z = 0; z < od; ++z) {
            for (std::size_t y = 0; y < oh; ++y) {
                for (std::size_t xo = 0; xo < ow; ++xo, ++o) {
                    std::size_t best = base + ((z * stride) * H + y * stride) * W + xo * stride;
                    for (std::size_t dz = 0; dz < k; ++dz) {
                        for (std::size_t dy = 0; dy < k; ++dy) {
                            for (std::size_t dx = 0; dx < k; ++dx) {
                                const auto idx = base + ((z * stride + dz) * H + y * stride + dy) * W + xo * stride + dx;
                                if (x[idx] > x[best]) {
                                    best = idx;
                                }
                            }
                        }
                    }
                    out[o] = x[best];
                    (*argmax)[o] = best;
                }
            }
        }
    }
    return emit<T>({N, C, od, oh, ow}, std::move(out), {&input}, [argmax](std::span<const T> g, GradSlots<T> gi) {
        if (gi[0] == nullptr) {
            return;
        }
        auto& dst = *gi[0];
        for (std::size_t i = 0; i < g.size(); ++i) {
            dst[(*argmax)[i]] += g[i];
        }
    });
}

template <typename T>
auto linear(const BasicTensor<T>& input, const BasicTensor<T>& weight, const BasicTensor<T>& bias)
    -> BasicTensor<T> {
    require(input.rank() == 2 && weight.rank() == 2 && bias.rank() == 1,
            "linear expects input [N,F], weight [F,G], bias [G]; got " + to_string(input.shape()) + ", " +
                to_string(weight.shape()) + ", " + to_string(bias.shape()));
    require(input.dim(1) == weight.dim(0), "linear dimension mismatch: input " + to_string(input.shape()) +
                                               " vs weight " + to_string(weight.shape()));
    require(bias.dim(0) == weight.dim(1),
            "linear bias " + to_string(bias.shape()) + " does not match weight " + to_string(weight.shape()));
    const auto N = input.dim(0), F = input.dim(1), G = weight.dim(1);
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using CMapR = Eigen::Map<const RowMat>;
    const auto xd = to_double(input.data());
    const auto wd = to_double(weight.data());
    const auto bd = to_double(bias.data());
    CMapR x(xd.data(), static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(F));
    CMapR w(wd.data(), static_cast<Eigen::Index>(F), static_cast<Eigen::Index>(G));
    RowMat y = x * w;
    y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bd.data(), static_cast<Eigen::Index>(G));
    std::vector<T> out(N * G);
    std::transform(y.data(), y.data() + y.size(), out.begin(), [](double v) { return static_cast<T>(v); });

    auto xbuf = input.buffer();
    auto wbuf = weight.buffer();
    return emit<T>({N, G}, std::move(out), {&input, &weight, &bias},
                   [N, F, G, xbuf, wbuf](std::span<const T> grad, GradSlots<T> gi) {
                       const auto gd = to_double(grad);
                       CMapR dy(gd.data(), static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(G));
                       if (gi[0] != nullptr) {
                           const auto wd = to_double(std::span<const T>(*wbuf));
                           CMapR w(wd.data(), static_cast<Eigen::Index>(F), static_cast<Eigen::Index>(G));
                           RowMat dx = dy * w.transpose();
                           for (std::size_t i = 0; i < N * F; ++i) {
                               (*gi[0])[i] += static_cast<T>(dx.data()[i]);
                           }
                       }
                       if (gi[1] != nullptr) {
                           const auto xd = to_double(std::span<const T>(*xbuf));
                           CMapR x(xd.data(), static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(F));
                           RowMat dw = x.transpose() * dy;
                           for (std::size_t i = 0; i < F * G; ++i) {
                               (*gi[1])[i] += static_cast<T>(dw.data()[i]);
                           }
                       }
                       if (gi[2] != nullptr) {
                           Eigen::RowVectorXd db = dy.colwise().sum();
                           for (std::size_t i = 0; i < G; ++i) {
                               (*gi[2])[i] += static_cast<T>(db[static_cast<Eigen::Index>(i)]);
                           }
                       }
                   });
}

template <typename T>
auto relu(const BasicTensor<T>& input) -> BasicTensor<T> {
    std::vector<T> out(input.size());
    const auto x = input.data();
    std::transform(x.begin(), x.end(), out.begin(), [](T v) { return v > T{0} ? v : T{0}; });
    auto xbuf = input.buffer();
    return emit<T>(input.shape(), std::move(out), {&input}, [xbuf](std::span<const T> g, GradSlots<T> gi) {
        if (gi[0] == nullptr) {
            return;
        }
        const auto& x = *xbuf;
        auto& dst = *gi[0];
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (x[i] > T{0}) {
                dst[i] += g[i];
            }
        }
    });
}

template <typename T>
auto add(const BasicTensor<T>& a, const BasicTensor<T>& b) -> BasicTensor<T> {
    require(a.shape() == b.shape(), "add shape mismatch: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    std::vector<T> out(a.size());
    std::transform(a.data().begin(), a.data().end(), b.data().begin(), out.begin(), std::plus<>{});
    return emit<T>(a.shape(), std::move(out), {&a, &b}, [](std::span<const T> g, GradSlots<T> gi) {
        for (auto* slot : gi) {
            if (slot != nullptr) {
                for (std::size_t i = 0; i < g.size(); ++i) {
                    (*slot)[i] += g[i];
                }
            }
        }
    });
}

template <typename T>
auto softmax(const BasicTensor<T>& input, std::size_t axis) -> BasicTensor<T> {
    require(axis < input.rank(),
            "softmax axis " + std::to_string(axis) + " out of range for shape " + to_string(input.shape()));
    const auto& s = input.shape();
    const auto outer = numel(Shape(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(axis)));
    const auto len = s[axis];
    const auto inner = numel(Shape(s.begin() + static_cast<std::ptrdiff_t>(axis) + 1, s.end()));
    const auto x = input.data();
    std::vector<T> out(input.size());
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
            const auto base = o * len * inner + i;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < len; ++j) {
                mx = std::max(mx, static_cast<double>(x[base + j * inner]));
            }
            double sum = 0.0;
            for (std::size_t j = 0; j < len; ++j) {
                sum += std::exp(static_cast<double>(x[base + j * inner]) - mx);
            }
            for (std::size_t j = 0; j < len; ++j) {
                out[base + j * inner] = static_cast<T>(std::exp(static_cast<double>(x[base + j * inner]) - mx) / sum);
            }
        }
    }
    auto ybuf = std::make_shared<const std::vector<T>>(out);
    return emit<T>(s, std::move(out), {&input},
                   [ybuf, outer, len, inner](std::span<const T> g, GradSlots<T> gi) {
                       if (gi[0] == nullptr) {
                           return;
                       }
                       const auto& y = *ybuf;
                       auto& dst = *gi[0];
                       for (std::size_t o = 0; o < outer; ++o) {
                           for (std::size_t i = 0; i < inner; ++i) {
                               const auto base = o * len * inner + i;
                               double dot = 0.0;
                               for (std::size_t j = 0; j < len; ++j) {
                                   dot += static_cast<double>(g[base + j * inner]) * y[base + j * inner];
                               }
                               for (std::size_t j = 0; j < len; ++j) {
                                   const auto idx = base + j * inner;
                                   dst[idx] += static_cast<T>(y[idx] * (static_cast<double>(g[idx]) - dot));
                               }
                           }
                       }
                   });
}

template <typename T>
auto global_avg_pool(const BasicTensor<T>& input) -> BasicTensor<T> {
    require(input.rank() == 5, "global_avg_pool input must be [N,C,D,H,W], got " + to_string(input.shape()));
    const auto N = input.dim(0), C = input.dim(1);
    const auto V = input.dim(2) * input.dim(3) * input.dim(4);
    const auto x = input.data();
    std::vector<T> out(N * C);
    for (std::size_t nc = 0; nc < N * C; ++nc) {
        double sum = 0.0;
        for (std::size_t v = 0; v < V; ++v) {
            sum += static_cast<double>(x[nc * V + v]);
        }
        out[nc] = static_cast<T>(sum / static_cast<double>(V));
    }
    return emit<T>({N, C}, std::move(out), {&input}, [V](std::span<const T> g, GradSlots<T> gi) {
        if (gi[0] == nullptr) {
            return;
        }
        auto& dst = *gi[0];
        for (std::size_t nc = 0; nc < g.size(); ++nc) {
            const auto share = static_cast<T>(static_cast<double>(g[nc]) / static_cast<double>(V));
            for (std::size_t v = 0; v < V; ++v) {
                dst[nc * V + v] += share;
            }
        }
    });
}

template <typename T>
auto stack(const std::vector<BasicTensor<T>>& parts) -> BasicTensor<T> {
    require(!parts.empty(), "stack of zero tensors");
    const auto& shape = parts.front().shape();
    BasicTape<T>* tape = nullptr;
    std::vector<const BasicTensor<T>*> inputs;
    std::vector<T> out;
    out.reserve(parts.size() * parts.front().size());
    for (const auto& p : parts) {
        require(p.shape() == shape, "stack shape mismatch: " + to_string(shape) + " vs " + to_string(p.shape()));
        if (p.on_tape()) {
            if (tape != nullptr && tape != p.tape()) {
                throw std::logic_error("operands belong to different tapes");
            }
            tape = p.tape();
        }
        inputs.push_back(&p);
        out.insert(out.end(), p.data().begin(), p.data().end());
    }
    Shape out_shape{parts.size()};
    out_shape.insert(out_shape.end(), shape.begin(), shape.end());
    const auto chunk = parts.front().size();
    return emit<T>(std::move(out_shape), std::move(out), std::move(inputs),
                   [chunk](std::span<const T> g, GradSlots<T> gi) {
                       for (std::size_t p = 0; p < gi.size(); ++p) {
                           if (gi[p] != nullptr) {
                               for (std::size_t i = 0; i < chunk; ++i) {
                                   (*gi[p])[i] += g[p * chunk + i];
                               }
                           }
                       }
                   });
}

template <typename T>
auto mix_heads(const BasicTensor<T>& weights, const BasicTensor<T>& heads) -> BasicTensor<T> {
    require(weights.rank() == 2 && heads.rank() == 3 && weights.dim(0) == heads.dim(0) &&
                weights.dim(1) == heads.dim(2),
            "mix_heads expects weights [H,M] and heads [H,N,M]; got " + to_string(weights.shape()) + " and " +
                to_string(heads.shape()));
    const auto H = heads.dim(0), N = heads.dim(1), M = heads.dim(2);
    const auto w = weights.data();
    const auto x = heads.data();
    std::vector<T> out(N * M);
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t m = 0; m < M; ++m) {
            double sum = 0.0;
            for (std::size_t h = 0; h < H; ++h) {
                sum += static_cast<double>(w[h * M + m]) * static_cast<double>(x[(h * N + n) * M + m]);
            }
            out[n * M + m] = static_cast<T>(sum);
        }
    }
    auto wbuf = weights.buffer();
    auto xbuf = heads.buffer();
    return emit<T>({N, M}, std::move(out), {&weights, &heads},
                   [H, N, M, wbuf, xbuf](std::span<const T> g, GradSlots<T> gi) {
                       const auto& w = *wbuf;
                       const auto& x = *xbuf;
                       if (gi[0] != nullptr) {
                           for (std::size_t h = 0; h < H; ++h) {
                               for (std::size_t m = 0; m < M; ++m) {
                                   double sum = 0.0;
                                   for (std::size_t n = 0; n < N; ++n) {
                                       sum += static_cast<double>(g[n * M + m]) * x[(h * N + n) * M + m];
                                   }
                                   (*gi[0])[h * M + m] += static_cast<T>(sum);
                               }
                           }
                       }
                       if (gi[1] != nullptr) {
                           for (std::size_t h = 0; h < H; ++h) {
                               for (std::size_t n = 0; n < N; ++n) {
                                   for (std::size_t m = 0; m < M; ++m) {
                                       (*gi[1])[(h * N + n) * M + m] += g[n * M + m] * w[h * M + m];
                                   }
                               }
                           }
                       }
                   });
}

template <typename T>
auto mse_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target) -> BasicTensor<T> {
    require(pred.shape() == target.shape(),
            "mse_loss shape mismatch: " + to_string(pred.shape()) + " vs " + to_string(target.shape()));
    const auto p = pred.data();
    const auto t = target.data();
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = static_cast<double>(p[i]) - static_cast<double>(t[i]);
        sum += d * d;
    }
    const auto count = static_cast<double>(p.size());
    auto pbuf = pred.buffer();
    auto tbuf = target.buffer();
    return emit<T>({1}, {static_cast<T>(sum / count)}, {&pred, &target},
                   [pbuf, tbuf, count](std::span<const T> g, GradSlots<T> gi) {
                       const auto& p = *pbuf;
                       const auto& t = *tbuf;
                       const double scale = 2.0 * static_cast<double>(g[0]) / count;
                       for (std::size_t i = 0; i < p.size(); ++i) {
                           const double d = scale * (static_cast<double>(p[i]) - static_cast<double>(t[i]));
                           if (gi[0] != nullptr) {
                               (*gi[0])[i] += static_cast<T>(d);
                           }
                           if (gi[1] != nullptr) {
                               (*gi[1])[i] -= static_cast<T>(d);
                           }
                       }
                   });
}

#define MORPHOREG_INSTANTIATE_OPS(T)                                                                          \
    template auto conv3d<T>(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, std::size_t, \
                            std::size_t) -> BasicTensor<T>;                                                   \
    template auto maxpool3d<T>(const BasicTensor<T>&, std::size_t, std::size_t) -> BasicTensor<T>;           \
    template auto linear<T>(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&)              \
        -> BasicTensor<T>;                                                                                    \
    template auto relu<T>(const BasicTensor<T>&) -> BasicTensor<T>;                                           \
    template auto add<T>(const BasicTensor<T>&, const BasicTensor<T>&) -> BasicTensor<T>;                     \
    template auto softmax<T>(const BasicTensor<T>&, std::size_t) -> BasicTensor<T>;                           \
    template auto global_avg_pool<T>(const BasicTensor<T>&) -> BasicTensor<T>;                                \
    template auto stack<T>(const std::vector<BasicTensor<T>>&) -> BasicTensor<T>;                             \
    template auto mix_heads<T>(const BasicTensor<T>&, const BasicTensor<T>&) -> BasicTensor<T>;               \
    template auto mse_loss<T>(const BasicTensor<T>&, const BasicTensor<T>&) -> BasicTensor<T>;

MORPHOREG_INSTANTIATE_OPS(float)
MORPHOREG_INSTANTIATE_OPS(double)

#undef MORPHOREG_INSTANTIATE_OPS

}  // namespace morphoreg::tensor
