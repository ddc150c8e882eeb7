#include "otfm/neuralop.hpp"

#include <cmath>
#include <complex>
#include <cstring>
#include <sstream>
#include <stdexcept>

#include "otfm/fft.hpp"
#include "otfm/parallel.hpp"
#include "otfm/rng.hpp"

namespace otfm {

void FnoConfig::validate() const {
    if (n_layers < 1) throw std::invalid_argument("FnoConfig: n_layers must be >= 1");
    if (width < 1 || lift_dim < 1 || proj_dim < 1)
        throw std::invalid_argument("FnoConfig: channel counts must be >= 1");
    if (modes < 1) throw std::invalid_argument("FnoConfig: modes must be >= 1");
}

namespace {

// Canonical flat layout. The spectral tensor of layer l is stored as
// [block][out][in][ky][kx][re, im].
struct Layout {
    int in_ch, width, lift, proj, layers, modes;
    std::size_t lift1_w, lift1_b, lift2_w, lift2_b;
    std::size_t layer_stride, spec0, byp_w0, byp_b0;
    std::size_t proj1_w, proj1_b, proj2_w, proj2_b;
    std::size_t total;

    explicit Layout(const FnoConfig& c)
        : in_ch(FnoConfig::input_channels), width(c.width), lift(c.lift_dim), proj(c.proj_dim),
          layers(c.n_layers), modes(c.modes) {
        std::size_t at = 0;
        auto take = [&at](std::size_t n) {
            const std::size_t r = at;
            at += n;
            return r;
        };
        lift1_w = take(static_cast<std::size_t>(lift) * in_ch);
        lift1_b = take(static_cast<std::size_t>(lift));
        lift2_w = take(static_cast<std::size_t>(width) * lift);
        lift2_b = take(static_cast<std::size_t>(width));
        const std::size_t spec_n = 2ull * width * width * modes * modes * 2ull;
        spec0 = at;
        byp_w0 = spec0 + spec_n;
        byp_b0 = byp_w0 + static_cast<std::size_t>(width) * width;
        layer_stride = spec_n + static_cast<std::size_t>(width) * width + width;
        at += layer_stride * static_cast<std::size_t>(layers);
        proj1_w = take(static_cast<std::size_t>(proj) * width);
        proj1_b = take(static_cast<std::size_t>(proj));
        proj2_w = take(static_cast<std::size_t>(proj));
        proj2_b = take(1);
        total = at;
    }

    std::size_t spec(int layer) const { return spec0 + layer_stride * static_cast<std::size_t>(layer); }
    std::size_t byp_w(int layer) const { return byp_w0 + layer_stride * static_cast<std::size_t>(layer); }
    std::size_t byp_b(int layer) const { return byp_b0 + layer_stride * static_cast<std::size_t>(layer); }
};

template <typename T>
T gelu(T x) {
    return T(0.5) * x * (T(1) + std::erf(x * T(0.7071067811865475)));
}

template <typename T>
T gelu_grad(T x) {
    const T phi = T(0.5) * (T(1) + std::erf(x * T(0.7071067811865475)));
    const T dens = std::exp(T(-0.5) * x * x) * T(0.3989422804014327);
    return phi + x * dens;
}

// y[o][:] = sum_i W[o][i] x[i][:] + b[o]
template <typename T>
void affine_forward(const T* w, const T* b, int out_ch, int in_ch, std::size_t n, const T* x, T* y) {
    for (int o = 0; o < out_ch; ++o) {
        T* yo = y + static_cast<std::size_t>(o) * n;
        const T bo = b[o];
        for (std::size_t k = 0; k < n; ++k) yo[k] = bo;
        for (int i = 0; i < in_ch; ++i) {
            const T wv = w[static_cast<std::size_t>(o) * in_ch + i];
            const T* xi = x + static_cast<std::size_t>(i) * n;
            for (std::size_t k = 0; k < n; ++k) yo[k] += wv * xi[k];
        }
    }
}

// Accumulates parameter gradients and (optionally) the input cotangent.
template <typename T>
void affine_backward(const T* w, int out_ch, int in_ch, std::size_t n, const T* x, const T* ybar,
                     T* wbar, T* bbar, T* xbar) {
    for (int o = 0; o < out_ch; ++o) {
        const T* yo = ybar + static_cast<std::size_t>(o) * n;
        T bacc = T(0);
        for (std::size_t k = 0; k < n; ++k) bacc += yo[k];
        bbar[o] += bacc;
        for (int i = 0; i < in_ch; ++i) {
            const T* xi = x + static_cast<std::size_t>(i) * n;
            T acc = T(0);
            for (std::size_t k = 0; k < n; ++k) acc += yo[k] * xi[k];
            wbar[static_cast<std::size_t>(o) * in_ch + i] += acc;
        }
    }
    if (!xbar) return;
    for (int i = 0; i < in_ch; ++i) {
        T* xb = xbar + static_cast<std::size_t>(i) * n;
        for (std::size_t k = 0; k < n; ++k) xb[k] = T(0);
        for (int o = 0; o < out_ch; ++o) {
            const T wv = w[static_cast<std::size_t>(o) * in_ch + i];
            const T* yo = ybar + static_cast<std::size_t>(o) * n;
            for (std::size_t k = 0; k < n; ++k) xb[k] += wv * yo[k];
        }
    }
}

// Engine-side parameter mirror in precision T. Spectral weights are
// reordered per retained mode, [layer][block][ky][kx][out][in], so the
// per-mode channel mixing is a contiguous complex matrix.
template <typename T>
struct EngineParams {
    Layout lay;
    std::vector<T> pw;                     // canonical layout, pointwise tensors only
    std::vector<std::complex<T>> spec;     // reordered spectral weights
    int modes, width, layers;

    explicit EngineParams(const OperatorParams& p) : lay(p.config) {
        modes = p.config.modes;
        width = p.config.width;
        layers = p.config.n_layers;
        pw.resize(lay.total);
        for (std::size_t i = 0; i < lay.total; ++i) pw[i] = static_cast<T>(p.flat[i]);
        spec.resize(2ull * layers * modes * modes * width * width);
        for (int l = 0; l < layers; ++l) {
            const double* src = p.flat.data() + lay.spec(l);
            for (int b = 0; b < 2; ++b)
                for (int o = 0; o < width; ++o)
                    for (int i = 0; i < width; ++i)
                        for (int py = 0; py < modes; ++py)
                            for (int px = 0; px < modes; ++px) {
                                const std::size_t canon =
                                    ((((static_cast<std::size_t>(b) * width + o) * width + i) * modes + py) * modes + px) * 2;
                                spec[mode_matrix_base(l, b, py, px) + static_cast<std::size_t>(o) * width + i] =
                                    std::complex<T>(static_cast<T>(src[canon]), static_cast<T>(src[canon + 1]));
                            }
        }
    }

    std::size_t mode_matrix_base(int layer, int block, int py, int px) const {
        const std::size_t mm = static_cast<std::size_t>(modes) * modes;
        const std::size_t ww = static_cast<std::size_t>(width) * width;
        return (((static_cast<std::size_t>(layer) * 2 + block) * mm) + static_cast<std::size_t>(py) * modes + px) * ww;
    }
};

// Gradient buffer in engine order; folded back to canonical double layout.
template <typename T>
struct EngineGrads {
    std::vector<T> pw;
    std::vector<std::complex<T>> spec;

    explicit EngineGrads(const EngineParams<T>& ep) : pw(ep.lay.total, T(0)), spec(ep.spec.size()) {}

    void add_to_canonical(const EngineParams<T>& ep, std::vector<double>& out) const {
        for (std::size_t i = 0; i < pw.size(); ++i) out[i] += static_cast<double>(pw[i]);
        const int w = ep.width, m = ep.modes;
        for (int l = 0; l < ep.layers; ++l) {
            double* dst = out.data() + ep.lay.spec(l);
            for (int b = 0; b < 2; ++b)
                for (int o = 0; o < w; ++o)
                    for (int i = 0; i < w; ++i)
                        for (int py = 0; py < m; ++py)
                            for (int px = 0; px < m; ++px) {
                                const std::size_t canon =
                                    ((((static_cast<std::size_t>(b) * w + o) * w + i) * m + py) * m + px) * 2;
                                const std::complex<T> g =
                                    spec[ep.mode_matrix_base(l, b, py, px) + static_cast<std::size_t>(o) * w + i];
                                dst[canon] += static_cast<double>(g.real());
                                dst[canon + 1] += static_cast<double>(g.imag());
                            }
        }
    }
};

template <typename T>
struct Workspace {
    GridSpec grid;
    int nx, ny, ncols, width, modes, layers, lift, proj;
    std::size_t n;
    bool pow2;
    std::size_t lanes; // packed channel pairs

    std::vector<T> x0, lift_pre, lift_act;
    std::vector<std::vector<T>> h;     // layers+1 activations of width channels
    std::vector<std::vector<T>> z;     // pre-activation per layer
    std::vector<std::vector<std::complex<T>>> xblk; // cached block inputs per layer
    std::vector<T> proj_pre, proj_act, out;

    std::vector<std::complex<T>> spec_scratch; // ny x ncols
    std::vector<std::complex<T>> yblk;         // 2*m*m*width
    std::vector<std::complex<T>> zpack;        // ny*nx*lanes
    std::vector<std::complex<T>> col0;         // width*ny, kx = 0 column work
    std::vector<T> hbar_a, hbar_b, chan_scratch;
    std::vector<T> lift_bar, proj_bar;

    Workspace(const GridSpec& g, const FnoConfig& c) : grid(g) {
        nx = g.nx;
        ny = g.ny;
        ncols = nx / 2 + 1;
        width = c.width;
        modes = c.modes;
        layers = c.n_layers;
        lift = c.lift_dim;
        proj = c.proj_dim;
        n = static_cast<std::size_t>(g.num_nodes());
        pow2 = (nx & (nx - 1)) == 0 && (ny & (ny - 1)) == 0;
        lanes = static_cast<std::size_t>((width + 1) / 2);
        x0.resize(static_cast<std::size_t>(FnoConfig::input_channels) * n);
        lift_pre.resize(static_cast<std::size_t>(lift) * n);
        lift_act.resize(static_cast<std::size_t>(lift) * n);
        h.assign(static_cast<std::size_t>(layers) + 1, std::vector<T>(static_cast<std::size_t>(width) * n));
        z.assign(static_cast<std::size_t>(layers), std::vector<T>(static_cast<std::size_t>(width) * n));
        xblk.assign(static_cast<std::size_t>(layers),
                    std::vector<std::complex<T>>(2ull * modes * modes * width));
        proj_pre.resize(static_cast<std::size_t>(proj) * n);
        proj_act.resize(static_cast<std::size_t>(proj) * n);
        out.resize(n);
        spec_scratch.resize(static_cast<std::size_t>(ny) * ncols);
        yblk.resize(2ull * modes * modes * width);
        zpack.resize(n * lanes);
        col0.resize(static_cast<std::size_t>(width) * ny);
        hbar_a.resize(static_cast<std::size_t>(std::max({width, lift, proj})) * n);
        hbar_b.resize(static_cast<std::size_t>(std::max({width, lift, proj})) * n);
        chan_scratch.resize(n);
        lift_bar.resize(static_cast<std::size_t>(lift) * n);
        proj_bar.resize(static_cast<std::size_t>(proj) * n);
    }

    int block_row(int block, int py) const { return block == 0 ? py : ny - modes + py; }
    bool use_packed(const EvalOptions& opts) const { return pow2 && !opts.force_scalar_spectral; }
};

// ---------------------------------------------------------------------------
// Spectral-branch primitives. blk holds per-mode channel vectors indexed
// [(block*m + py)*m + px][channel]; the scalar path transforms channels one
// at a time, the packed path batches channel pairs into complex lanes so
// the butterflies of both FFT axes vectorize.
// ---------------------------------------------------------------------------

// blk <- retained blocks of the unnormalized forward transform per channel.
template <typename T>
void spectral_forward_blocks(Workspace<T>& ws, const T* h, std::complex<T>* blk, bool packed) {
    const int w = ws.width, m = ws.modes;
    if (!packed) {
        for (int c = 0; c < w; ++c) {
            fft::r2c_2d(h + static_cast<std::size_t>(c) * ws.n, ws.nx, ws.ny, ws.spec_scratch.data());
            for (int b = 0; b < 2; ++b)
                for (int py = 0; py < m; ++py) {
                    const int row = ws.block_row(b, py);
                    for (int px = 0; px < m; ++px)
                        blk[((static_cast<std::size_t>(b) * m + py) * m + px) * w + c] =
                            ws.spec_scratch[static_cast<std::size_t>(row) * ws.ncols + px];
                }
        }
        return;
    }
    const std::size_t V = ws.lanes;
    for (std::size_t p = 0; p < V; ++p) {
        const T* a = h + 2 * p * ws.n;
        const T* b = (2 * p + 1 < static_cast<std::size_t>(w)) ? h + (2 * p + 1) * ws.n : nullptr;
        for (std::size_t k = 0; k < ws.n; ++k)
            ws.zpack[k * V + p] = std::complex<T>(a[k], b ? b[k] : T(0));
    }
    fft::transform_2d_lanes(ws.zpack.data(), ws.nx, ws.ny, V, false);
    for (int bb = 0; bb < 2; ++bb)
        for (int py = 0; py < m; ++py) {
            const int row = ws.block_row(bb, py);
            const int mrow = (ws.ny - row) % ws.ny;
            for (int px = 0; px < m; ++px) {
                const int mcol = (ws.nx - px) % ws.nx;
                const std::complex<T>* zk = ws.zpack.data() + (static_cast<std::size_t>(row) * ws.nx + px) * V;
                const std::complex<T>* zm = ws.zpack.data() + (static_cast<std::size_t>(mrow) * ws.nx + mcol) * V;
                std::complex<T>* dst = blk + ((static_cast<std::size_t>(bb) * m + py) * m + px) * w;
                for (std::size_t p = 0; p < V; ++p) {
                    const std::complex<T> s = zk[p] + std::conj(zm[p]);
                    const std::complex<T> d = zk[p] - std::conj(zm[p]);
                    dst[2 * p] = T(0.5) * s;
                    if (2 * p + 1 < static_cast<std::size_t>(w))
                        dst[2 * p + 1] = std::complex<T>(T(0.5) * d.imag(), T(-0.5) * d.real());
                }
            }
        }
}

// blk <- retained blocks of Herm(weight(kx)/N * forward transform) of zbar:
// the adjoint of the inverse-with-1/N used by the layer forward.
template <typename T>
void spectral_adjoint_blocks(Workspace<T>& ws, const T* zbar, std::complex<T>* blk, bool packed) {
    const int w = ws.width, m = ws.modes;
    const T inv_n = T(1.0 / static_cast<double>(ws.n));
    if (!packed) {
        for (int c = 0; c < w; ++c) {
            fft::r2c_2d(zbar + static_cast<std::size_t>(c) * ws.n, ws.nx, ws.ny, ws.spec_scratch.data());
            for (auto& v : ws.spec_scratch) v *= inv_n;
            for (int kx = 1; kx < ws.ncols - 1; ++kx)
                for (int ky = 0; ky < ws.ny; ++ky)
                    ws.spec_scratch[static_cast<std::size_t>(ky) * ws.ncols + kx] *= T(2);
            fft::hermitianize_boundary_cols(ws.spec_scratch.data(), ws.nx, ws.ny);
            for (int b = 0; b < 2; ++b)
                for (int py = 0; py < m; ++py) {
                    const int row = ws.block_row(b, py);
                    for (int px = 0; px < m; ++px)
                        blk[((static_cast<std::size_t>(b) * m + py) * m + px) * w + c] =
                            ws.spec_scratch[static_cast<std::size_t>(row) * ws.ncols + px];
                }
        }
        return;
    }
    const std::size_t V = ws.lanes;
    for (std::size_t p = 0; p < V; ++p) {
        const T* a = zbar + 2 * p * ws.n;
        const T* b = (2 * p + 1 < static_cast<std::size_t>(w)) ? zbar + (2 * p + 1) * ws.n : nullptr;
        for (std::size_t k = 0; k < ws.n; ++k)
            ws.zpack[k * V + p] = std::complex<T>(a[k], b ? b[k] : T(0));
    }
    fft::transform_2d_lanes(ws.zpack.data(), ws.nx, ws.ny, V, false);

    // Per-channel transform value at an arbitrary full-spectrum mode.
    auto unpack = [&](int row, int col, std::size_t p, std::complex<T>& fa, std::complex<T>& fb) {
        const std::complex<T> zk = ws.zpack[(static_cast<std::size_t>(row) * ws.nx + col) * V + p];
        const std::complex<T> zm =
            std::conj(ws.zpack[(static_cast<std::size_t>((ws.ny - row) % ws.ny) * ws.nx + (ws.nx - col) % ws.nx) * V + p]);
        const std::complex<T> s = zk + zm, d = zk - zm;
        fa = T(0.5) * s;
        fb = std::complex<T>(T(0.5) * d.imag(), T(-0.5) * d.real());
    };

    for (int bb = 0; bb < 2; ++bb)
        for (int py = 0; py < m; ++py) {
            const int row = ws.block_row(bb, py);
            for (int px = 0; px < m; ++px) {
                std::complex<T>* dst = blk + ((static_cast<std::size_t>(bb) * m + py) * m + px) * w;
                for (std::size_t p = 0; p < V; ++p) {
                    std::complex<T> fa, fb;
                    unpack(row, px, p, fa, fb);
                    if (px == 0) {
                        // Hermitian projection couples (0, ky) with (0, -ky).
                        std::complex<T> ga, gb;
                        unpack((ws.ny - row) % ws.ny, 0, p, ga, gb);
                        fa = T(0.5) * (fa + std::conj(ga));
                        fb = T(0.5) * (fb + std::conj(gb));
                        dst[2 * p] = inv_n * fa;
                        if (2 * p + 1 < static_cast<std::size_t>(w)) dst[2 * p + 1] = inv_n * fb;
                    } else {
                        dst[2 * p] = T(2) * inv_n * fa;
                        if (2 * p + 1 < static_cast<std::size_t>(w)) dst[2 * p + 1] = T(2) * inv_n * fb;
                    }
                }
            }
        }
}

// out (+)= scale * inverse of the block-embedded spectrum with real
// projection; halve_interior applies the 1/2 factor of the r2c adjoint to
// the kx > 0 block columns.
template <typename T>
void spectral_inverse_add(Workspace<T>& ws, const std::complex<T>* blk, T* out, T scale,
                          bool halve_interior, bool add, bool packed) {
    const int w = ws.width, m = ws.modes;
    if (!packed) {
        for (int c = 0; c < w; ++c) {
            std::fill(ws.spec_scratch.begin(), ws.spec_scratch.end(), std::complex<T>(0, 0));
            for (int b = 0; b < 2; ++b)
                for (int py = 0; py < m; ++py) {
                    const int row = ws.block_row(b, py);
                    for (int px = 0; px < m; ++px) {
                        std::complex<T> v = blk[((static_cast<std::size_t>(b) * m + py) * m + px) * w + c];
                        if (halve_interior && px != 0 && px != ws.nx / 2) v *= T(0.5);
                        ws.spec_scratch[static_cast<std::size_t>(row) * ws.ncols + px] = v;
                    }
                }
            fft::c2r_2d(ws.spec_scratch.data(), ws.nx, ws.ny, ws.chan_scratch.data());
            T* dst = out + static_cast<std::size_t>(c) * ws.n;
            if (add)
                for (std::size_t k = 0; k < ws.n; ++k) dst[k] += scale * ws.chan_scratch[k];
            else
                for (std::size_t k = 0; k < ws.n; ++k) dst[k] = scale * ws.chan_scratch[k];
        }
        return;
    }

    const std::size_t V = ws.lanes;
    // kx = 0 column: gather all stored rows per channel, then apply the
    // Hermitian projection; the column is self-mirrored.
    std::fill(ws.col0.begin(), ws.col0.end(), std::complex<T>(0, 0));
    for (int bb = 0; bb < 2; ++bb)
        for (int py = 0; py < m; ++py) {
            const int row = ws.block_row(bb, py);
            const std::complex<T>* src = blk + ((static_cast<std::size_t>(bb) * m + py) * m + 0) * w;
            for (int c = 0; c < w; ++c) ws.col0[static_cast<std::size_t>(c) * ws.ny + row] = src[c];
        }
    for (int c = 0; c < w; ++c) fft::hermitianize_col(ws.col0.data() + static_cast<std::size_t>(c) * ws.ny, ws.ny, 1);

    std::fill(ws.zpack.begin(), ws.zpack.end(), std::complex<T>(0, 0));
    for (int row = 0; row < ws.ny; ++row)
        for (std::size_t p = 0; p < V; ++p) {
            const std::complex<T> a = ws.col0[2 * p * static_cast<std::size_t>(ws.ny) + row];
            const std::complex<T> b = (2 * p + 1 < static_cast<std::size_t>(w))
                                          ? ws.col0[(2 * p + 1) * static_cast<std::size_t>(ws.ny) + row]
                                          : std::complex<T>(0, 0);
            ws.zpack[(static_cast<std::size_t>(row) * ws.nx) * V + p] =
                a + std::complex<T>(T(0), T(1)) * b;
        }
    const T interior = halve_interior ? T(0.5) : T(1);
    for (int bb = 0; bb < 2; ++bb)
        for (int py = 0; py < m; ++py) {
            const int row = ws.block_row(bb, py);
            const int mrow = (ws.ny - row) % ws.ny;
            for (int px = 1; px < m; ++px) {
                const std::complex<T>* src = blk + ((static_cast<std::size_t>(bb) * m + py) * m + px) * w;
                std::complex<T>* zk = ws.zpack.data() + (static_cast<std::size_t>(row) * ws.nx + px) * V;
                std::complex<T>* zm = ws.zpack.data() + (static_cast<std::size_t>(mrow) * ws.nx + ws.nx - px) * V;
                for (std::size_t p = 0; p < V; ++p) {
                    const std::complex<T> a = interior * src[2 * p];
                    const std::complex<T> b = (2 * p + 1 < static_cast<std::size_t>(w))
                                                  ? interior * src[2 * p + 1]
                                                  : std::complex<T>(0, 0);
                    zk[p] = a + std::complex<T>(T(0), T(1)) * b;
                    zm[p] = std::conj(a) + std::complex<T>(T(0), T(1)) * std::conj(b);
                }
            }
        }
    fft::transform_2d_lanes(ws.zpack.data(), ws.nx, ws.ny, V, true);
    for (std::size_t p = 0; p < V; ++p) {
        T* d0 = out + 2 * p * ws.n;
        T* d1 = (2 * p + 1 < static_cast<std::size_t>(w)) ? out + (2 * p + 1) * ws.n : nullptr;
        if (add) {
            for (std::size_t k = 0; k < ws.n; ++k) {
                d0[k] += scale * ws.zpack[k * V + p].real();
                if (d1) d1[k] += scale * ws.zpack[k * V + p].imag();
            }
        } else {
            for (std::size_t k = 0; k < ws.n; ++k) {
                d0[k] = scale * ws.zpack[k * V + p].real();
                if (d1) d1[k] = scale * ws.zpack[k * V + p].imag();
            }
        }
    }
}

template <typename T>
void require_finite(const std::vector<T>& v, const char* where) {
    for (const T x : v)
        if (!std::isfinite(static_cast<double>(x))) {
            std::ostringstream os;
            os << "fno: non-finite activation in " << where;
            throw std::runtime_error(os.str());
        }
}

// Forward pass; caches everything backward needs in the workspace.
template <typename T>
void forward_pass(const EngineParams<T>& ep, Workspace<T>& ws, double t, const double* field,
                  const EvalOptions& opts, bool check_finite) {
    const Layout& L = ep.lay;
    const std::size_t n = ws.n;
    const int w = ws.width, m = ws.modes;
    const bool lin = opts.linear_activations;

    // Input stack: field, constant t, normalized coordinates in [0,1).
    for (std::size_t k = 0; k < n; ++k) ws.x0[k] = static_cast<T>(field[k]);
    for (std::size_t k = 0; k < n; ++k) ws.x0[n + k] = static_cast<T>(t);
    for (int iy = 0; iy < ws.ny; ++iy)
        for (int ix = 0; ix < ws.nx; ++ix) {
            const std::size_t k = static_cast<std::size_t>(iy) * ws.nx + ix;
            ws.x0[2 * n + k] = opts.coord_channels ? static_cast<T>(static_cast<double>(ix) / ws.nx) : T(0);
            ws.x0[3 * n + k] = opts.coord_channels ? static_cast<T>(static_cast<double>(iy) / ws.ny) : T(0);
        }

    affine_forward(ep.pw.data() + L.lift1_w, ep.pw.data() + L.lift1_b, ws.lift, L.in_ch, n, ws.x0.data(),
                   ws.lift_pre.data());
    for (std::size_t k = 0; k < ws.lift_pre.size(); ++k)
        ws.lift_act[k] = lin ? ws.lift_pre[k] : gelu(ws.lift_pre[k]);
    affine_forward(ep.pw.data() + L.lift2_w, ep.pw.data() + L.lift2_b, w, ws.lift, n, ws.lift_act.data(),
                   ws.h[0].data());

    const bool packed = ws.use_packed(opts);
    for (int l = 0; l < ws.layers; ++l) {
        auto& hin = ws.h[static_cast<std::size_t>(l)];
        auto& zout = ws.z[static_cast<std::size_t>(l)];
        auto& xblk = ws.xblk[static_cast<std::size_t>(l)];

        // Spectral branch: transform all channels, keep the two corner
        // blocks, mix channels per retained mode.
        spectral_forward_blocks(ws, hin.data(), xblk.data(), packed);
        for (int b = 0; b < 2; ++b)
            for (int py = 0; py < m; ++py)
                for (int px = 0; px < m; ++px) {
                    const std::complex<T>* xin = xblk.data() + ((static_cast<std::size_t>(b) * m + py) * m + px) * w;
                    const std::complex<T>* mat = ep.spec.data() + ep.mode_matrix_base(l, b, py, px);
                    std::complex<T>* yout = ws.yblk.data() + ((static_cast<std::size_t>(b) * m + py) * m + px) * w;
                    for (int o = 0; o < w; ++o) {
                        std::complex<T> acc(0, 0);
                        const std::complex<T>* row = mat + static_cast<std::size_t>(o) * w;
                        for (int i = 0; i < w; ++i) acc += row[i] * xin[i];
                        yout[o] = acc;
                    }
                }

        // Bypass branch writes the pre-activation, spectral branch adds.
        affine_forward(ep.pw.data() + L.byp_w(l), ep.pw.data() + L.byp_b(l), w, w, n, hin.data(), zout.data());
        spectral_inverse_add(ws, ws.yblk.data(), zout.data(), T(1.0 / static_cast<double>(n)), false, true,
                             packed);
        if (check_finite) {
            std::ostringstream os;
            os << "spectral layer " << l;
            require_finite(zout, os.str().c_str());
        }

        auto& hout = ws.h[static_cast<std::size_t>(l) + 1];
        const bool act = !lin && (l + 1 < ws.layers);
        for (std::size_t k = 0; k < zout.size(); ++k) hout[k] = act ? gelu(zout[k]) : zout[k];
    }

    affine_forward(ep.pw.data() + L.proj1_w, ep.pw.data() + L.proj1_b, ws.proj, w, n,
                   ws.h[static_cast<std::size_t>(ws.layers)].data(), ws.proj_pre.data());
    for (std::size_t k = 0; k < ws.proj_pre.size(); ++k)
        ws.proj_act[k] = lin ? ws.proj_pre[k] : gelu(ws.proj_pre[k]);
    affine_forward(ep.pw.data() + L.proj2_w, ep.pw.data() + L.proj2_b, 1, ws.proj, n, ws.proj_act.data(),
                   ws.out.data());
    if (check_finite) require_finite(ws.out, "projection output");
}

// Backward from the output cotangent; adds into the gradient buffers.
template <typename T>
void backward_pass(const EngineParams<T>& ep, Workspace<T>& ws, const EvalOptions& opts, const T* outbar,
                   EngineGrads<T>& g) {
    const Layout& L = ep.lay;
    const std::size_t n = ws.n;
    const int w = ws.width, m = ws.modes;
    const bool lin = opts.linear_activations;

    // Projection pair.
    affine_backward(ep.pw.data() + L.proj2_w, 1, ws.proj, n, ws.proj_act.data(), outbar,
                    g.pw.data() + L.proj2_w, g.pw.data() + L.proj2_b, ws.proj_bar.data());
    if (!lin)
        for (std::size_t k = 0; k < ws.proj_bar.size(); ++k) ws.proj_bar[k] *= gelu_grad(ws.proj_pre[k]);
    T* hbar = ws.hbar_a.data();
    affine_backward(ep.pw.data() + L.proj1_w, ws.proj, w, n, ws.h[static_cast<std::size_t>(ws.layers)].data(),
                    ws.proj_bar.data(), g.pw.data() + L.proj1_w, g.pw.data() + L.proj1_b, hbar);

    const bool packed = ws.use_packed(opts);
    T* hbar_next = ws.hbar_b.data();
    for (int l = ws.layers - 1; l >= 0; --l) {
        auto& zl = ws.z[static_cast<std::size_t>(l)];
        auto& hin = ws.h[static_cast<std::size_t>(l)];
        auto& xblk = ws.xblk[static_cast<std::size_t>(l)];

        // Through the activation into the pre-activation cotangent (reuse hbar).
        const bool act = !lin && (l + 1 < ws.layers);
        if (act)
            for (std::size_t k = 0; k < zl.size(); ++k) hbar[k] *= gelu_grad(zl[k]);

        // Spectral branch cotangent: adjoint of (embed blocks -> inverse/N).
        spectral_adjoint_blocks(ws, hbar, ws.yblk.data(), packed);

        // Per-mode: weight grads and block-input cotangent.
        std::vector<std::complex<T>> xbar_blk(xblk.size());
        for (int b = 0; b < 2; ++b)
            for (int py = 0; py < m; ++py)
                for (int px = 0; px < m; ++px) {
                    const std::size_t mode = (static_cast<std::size_t>(b) * m + py) * m + px;
                    const std::complex<T>* xin = xblk.data() + mode * w;
                    const std::complex<T>* ybar = ws.yblk.data() + mode * w;
                    const std::complex<T>* mat = ep.spec.data() + ep.mode_matrix_base(l, b, py, px);
                    std::complex<T>* mbar = g.spec.data() + ep.mode_matrix_base(l, b, py, px);
                    std::complex<T>* xbar = xbar_blk.data() + mode * w;
                    for (int o = 0; o < w; ++o) {
                        const std::complex<T> yb = ybar[o];
                        const std::complex<T>* row = mat + static_cast<std::size_t>(o) * w;
                        std::complex<T>* rowbar = mbar + static_cast<std::size_t>(o) * w;
                        for (int i = 0; i < w; ++i) {
                            rowbar[i] += yb * std::conj(xin[i]);
                            xbar[i] += yb * std::conj(row[i]);
                        }
                    }
                }

        // Input cotangent of the spectral branch: adjoint of r2c with the
        // blocks embedded in an otherwise zero half-spectrum.
        spectral_inverse_add(ws, xbar_blk.data(), hbar_next, T(1), true, false, packed);

        // Bypass branch: grads plus its own input cotangent, added on top of
        // the spectral contribution.
        affine_backward(ep.pw.data() + L.byp_w(l), w, w, n, hin.data(), hbar, g.pw.data() + L.byp_w(l),
                        g.pw.data() + L.byp_b(l), static_cast<T*>(nullptr));
        for (int i = 0; i < w; ++i) {
            T* dst = hbar_next + static_cast<std::size_t>(i) * n;
            for (int o = 0; o < w; ++o) {
                const T wv = ep.pw[L.byp_w(l) + static_cast<std::size_t>(o) * w + i];
                const T* yb = hbar + static_cast<std::size_t>(o) * n;
                for (std::size_t k = 0; k < n; ++k) dst[k] += wv * yb[k];
            }
        }
        std::swap(hbar, hbar_next);
    }

    // Lifting pair.
    affine_backward(ep.pw.data() + L.lift2_w, w, ws.lift, n, ws.lift_act.data(), hbar,
                    g.pw.data() + L.lift2_w, g.pw.data() + L.lift2_b, ws.lift_bar.data());
    if (!lin)
        for (std::size_t k = 0; k < ws.lift_bar.size(); ++k) ws.lift_bar[k] *= gelu_grad(ws.lift_pre[k]);
    affine_backward(ep.pw.data() + L.lift1_w, ws.lift, L.in_ch, n, ws.x0.data(), ws.lift_bar.data(),
                    g.pw.data() + L.lift1_w, g.pw.data() + L.lift1_b, static_cast<T*>(nullptr));
}

void check_grid_capacity(const FnoConfig& c, const GridSpec& g) {
    if (c.modes > g.nx / 2 || c.modes > g.ny / 2) {
        std::ostringstream os;
        os << "fno: modes=" << c.modes << " exceed grid " << g.describe() << "; need nx, ny >= "
           << c.min_grid_edge();
        throw std::invalid_argument(os.str());
    }
}

template <typename T>
double loss_and_grad_impl(const OperatorParams& params, const std::vector<TrainingSample>& batch,
                          std::vector<double>& grads, int workers, const EvalOptions& opts) {
    params.config.validate();
    if (batch.empty()) throw std::invalid_argument("fno_loss_and_grad: empty batch");
    const GridSpec grid = batch.front().f_t->grid;
    for (const auto& s : batch) {
        require_same_grid(s.f_t->grid, grid, "fno_loss_and_grad");
        require_same_grid(s.v_target->grid, grid, "fno_loss_and_grad");
        if (!(s.t >= 0.0 && s.t <= 1.0)) throw std::invalid_argument("fno_loss_and_grad: t outside [0, 1]");
    }
    check_grid_capacity(params.config, grid);

    const EngineParams<T> ep(params);
    const int b = static_cast<int>(batch.size());
    if (workers < 1) workers = 1;
    if (workers > b) workers = b;

    std::vector<EngineGrads<T>> worker_grads;
    worker_grads.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) worker_grads.emplace_back(ep);
    std::vector<double> worker_loss(static_cast<std::size_t>(workers), 0.0);

    const double cellw = grid.cell_weight();
    parallel_shards(b, workers, [&](int shard, int begin, int end) {
        Workspace<T> ws(grid, params.config);
        std::vector<T> outbar(ws.n);
        for (int s = begin; s < end; ++s) {
            const auto& item = batch[static_cast<std::size_t>(s)];
            forward_pass(ep, ws, item.t, item.f_t->values.data(), opts, true);
            double local = 0.0;
            const double* v = item.v_target->values.data();
            for (std::size_t k = 0; k < ws.n; ++k) {
                const double r = static_cast<double>(ws.out[k]) - v[k];
                local += r * r;
                outbar[k] = static_cast<T>(2.0 * cellw * r);
            }
            worker_loss[static_cast<std::size_t>(shard)] += cellw * local;
            backward_pass(ep, ws, opts, outbar.data(), worker_grads[static_cast<std::size_t>(shard)]);
        }
    });

    grads.assign(params.flat.size(), 0.0);
    double loss = 0.0;
    for (int i = 0; i < workers; ++i) {
        worker_grads[static_cast<std::size_t>(i)].add_to_canonical(ep, grads);
        loss += worker_loss[static_cast<std::size_t>(i)];
    }
    const double inv_b = 1.0 / static_cast<double>(b);
    for (auto& v : grads) v *= inv_b;
    return loss * inv_b;
}

} // namespace

std::int64_t count_params(const FnoConfig& config) {
    config.validate();
    return static_cast<std::int64_t>(Layout(config).total);
}

std::vector<std::pair<std::string, std::vector<int>>> parameter_shapes(const FnoConfig& config) {
    config.validate();
    std::vector<std::pair<std::string, std::vector<int>>> shapes;
    const int w = config.width, m = config.modes;
    shapes.emplace_back("lift1_w", std::vector<int>{config.lift_dim, FnoConfig::input_channels});
    shapes.emplace_back("lift1_b", std::vector<int>{config.lift_dim});
    shapes.emplace_back("lift2_w", std::vector<int>{w, config.lift_dim});
    shapes.emplace_back("lift2_b", std::vector<int>{w});
    for (int l = 0; l < config.n_layers; ++l) {
        const std::string tag = std::to_string(l);
        shapes.emplace_back("spectral_" + tag, std::vector<int>{2, w, w, m, m, 2});
        shapes.emplace_back("bypass_w_" + tag, std::vector<int>{w, w});
        shapes.emplace_back("bypass_b_" + tag, std::vector<int>{w});
    }
    shapes.emplace_back("proj1_w", std::vector<int>{config.proj_dim, w});
    shapes.emplace_back("proj1_b", std::vector<int>{config.proj_dim});
    shapes.emplace_back("proj2_w", std::vector<int>{1, config.proj_dim});
    shapes.emplace_back("proj2_b", std::vector<int>{1});
    return shapes;
}

namespace {

OperatorParams init_impl(const FnoConfig& config, std::uint64_t seed, bool all_random) {
    config.validate();
    const Layout lay(config);
    OperatorParams p;
    p.config = config;
    p.flat.assign(lay.total, 0.0);
    Rng rng(seed);

    auto uniform_block = [&](std::size_t at, std::size_t count, int fan_in) {
        const double a = std::sqrt(1.0 / fan_in);
        for (std::size_t i = 0; i < count; ++i) p.flat[at + i] = rng.uniform(-a, a);
    };

    uniform_block(lay.lift1_w, static_cast<std::size_t>(lay.lift) * lay.in_ch, lay.in_ch);
    uniform_block(lay.lift1_b, static_cast<std::size_t>(lay.lift), lay.in_ch);
    uniform_block(lay.lift2_w, static_cast<std::size_t>(lay.width) * lay.lift, lay.lift);
    uniform_block(lay.lift2_b, static_cast<std::size_t>(lay.width), lay.lift);

    const double spec_scale = 1.0 / (static_cast<double>(config.width) * config.modes);
    for (int l = 0; l < config.n_layers; ++l) {
        const std::size_t spec_n = 2ull * config.width * config.width * config.modes * config.modes * 2ull;
        for (std::size_t i = 0; i < spec_n; ++i) p.flat[lay.spec(l) + i] = spec_scale * rng.gaussian();
        uniform_block(lay.byp_w(l), static_cast<std::size_t>(config.width) * config.width, config.width);
        uniform_block(lay.byp_b(l), static_cast<std::size_t>(config.width), config.width);
    }

    uniform_block(lay.proj1_w, static_cast<std::size_t>(lay.proj) * lay.width, lay.width);
    uniform_block(lay.proj1_b, static_cast<std::size_t>(lay.proj), lay.width);
    if (all_random) {
        uniform_block(lay.proj2_w, static_cast<std::size_t>(lay.proj), lay.proj);
        uniform_block(lay.proj2_b, 1, lay.proj);
    } // else final projection stays zero: a fresh model is the zero field.
    return p;
}

} // namespace

OperatorParams init_params(const FnoConfig& config, std::uint64_t seed) {
    return init_impl(config, seed, false);
}

OperatorParams init_params_random(const FnoConfig& config, std::uint64_t seed) {
    return init_impl(config, seed, true);
}

Field fno_forward(const OperatorParams& params, double t, const Field& f, const EvalOptions& opts) {
    params.config.validate();
    f.grid.validate();
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("fno_forward: t outside [0, 1]");
    check_grid_capacity(params.config, f.grid);
    if (params.flat.size() != static_cast<std::size_t>(count_params(params.config)))
        throw std::invalid_argument("fno_forward: parameter vector does not match config");

    const EngineParams<double> ep(params);
    Workspace<double> ws(f.grid, params.config);
    forward_pass(ep, ws, t, f.values.data(), opts, false);
    Field out(f.grid);
    for (std::size_t k = 0; k < ws.n; ++k) out.values[k] = ws.out[k];
    return out;
}

namespace {

template <typename T>
std::vector<Field> forward_batch_impl(const OperatorParams& params, double t,
                                      const std::vector<Field>& fields, int workers,
                                      const EvalOptions& opts) {
    params.config.validate();
    if (fields.empty()) return {};
    const GridSpec grid = fields.front().grid;
    for (const auto& f : fields) require_same_grid(f.grid, grid, "fno_forward_batch");
    check_grid_capacity(params.config, grid);

    const EngineParams<T> ep(params);
    std::vector<Field> out(fields.size(), Field(grid));
    parallel_shards(static_cast<int>(fields.size()), workers, [&](int, int begin, int end) {
        Workspace<T> ws(grid, params.config);
        for (int s = begin; s < end; ++s) {
            forward_pass(ep, ws, t, fields[static_cast<std::size_t>(s)].values.data(), opts, false);
            for (std::size_t k = 0; k < ws.n; ++k)
                out[static_cast<std::size_t>(s)].values[k] = static_cast<double>(ws.out[k]);
        }
    });
    return out;
}

} // namespace

std::vector<Field> fno_forward_batch(const OperatorParams& params, double t,
                                     const std::vector<Field>& fields, int workers, bool f32,
                                     const EvalOptions& opts) {
    return f32 ? forward_batch_impl<float>(params, t, fields, workers, opts)
               : forward_batch_impl<double>(params, t, fields, workers, opts);
}

double fno_loss_and_grad(const OperatorParams& params, const std::vector<TrainingSample>& batch,
                         std::vector<double>& grads, int workers, const EvalOptions& opts) {
    return loss_and_grad_impl<double>(params, batch, grads, workers, opts);
}

double fno_loss_and_grad_f32(const OperatorParams& params, const std::vector<TrainingSample>& batch,
                             std::vector<double>& grads, int workers, const EvalOptions& opts) {
    return loss_and_grad_impl<float>(params, batch, grads, workers, opts);
}

} // namespace otfm
