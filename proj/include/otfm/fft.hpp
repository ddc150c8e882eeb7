#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <unordered_map>
#include <vector>

// Minimal mixed-radix complex FFT. Power-of-two lengths take an iterative
// radix-2 path; other lengths (e.g. 48 = 2^4*3) go through a recursive
// Cooley-Tukey split with radix 2/3/5 and a naive fallback for other prime
// factors. Forward transforms are unnormalized; inverse transforms are
// unnormalized too (callers apply 1/n where their convention requires it).

namespace otfm::fft {

template <typename T>
struct Plan {
    int n = 0;
    bool pow2 = false;
    std::vector<std::complex<T>> twiddle;     // exp(-2*pi*i*k/n), k = 0..n-1
    std::vector<int> bitrev;                  // power-of-two path only
    std::vector<int> factors;                 // general path only

    explicit Plan(int length) : n(length) {
        if (n < 1) throw std::invalid_argument("fft: length must be positive");
        pow2 = (n & (n - 1)) == 0;
        twiddle.resize(n);
        const double two_pi = 6.283185307179586476925286766559;
        for (int k = 0; k < n; ++k) {
            const double a = -two_pi * static_cast<double>(k) / static_cast<double>(n);
            twiddle[k] = std::complex<T>(static_cast<T>(std::cos(a)), static_cast<T>(std::sin(a)));
        }
        if (pow2) {
            bitrev.resize(n);
            int log2n = 0;
            while ((1 << log2n) < n) ++log2n;
            for (int i = 0; i < n; ++i) {
                int r = 0;
                for (int b = 0; b < log2n; ++b)
                    if (i & (1 << b)) r |= 1 << (log2n - 1 - b);
                bitrev[i] = r;
            }
        } else {
            // Odd factors first: the recursion then bottoms out on
            // power-of-two tails served by the fast iterative path.
            int m = n;
            int twos = 0;
            while (m % 2 == 0) {
                ++twos;
                m /= 2;
            }
            for (int p = 3; p * p <= m; p += 2)
                while (m % p == 0) {
                    factors.push_back(p);
                    m /= p;
                }
            if (m > 1) factors.push_back(m);
            for (int i = 0; i < twos; ++i) factors.push_back(2);
        }
    }
};

template <typename T>
std::shared_ptr<const Plan<T>> plan_for(int n);

namespace detail {

template <typename T>
inline std::complex<T> tw(const Plan<T>& plan, long index, bool inverse) {
    const std::complex<T> w = plan.twiddle[static_cast<std::size_t>(index % plan.n)];
    return inverse ? std::conj(w) : w;
}

template <typename T>
void radix2_inplace(const Plan<T>& plan, std::complex<T>* a, bool inverse) {
    const int n = plan.n;
    for (int i = 0; i < n; ++i) {
        const int j = plan.bitrev[i];
        if (i < j) std::swap(a[i], a[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        const int half = len >> 1;
        const int step = n / len;
        for (int i = 0; i < n; i += len) {
            for (int k = 0; k < half; ++k) {
                const std::complex<T> w = inverse ? std::conj(plan.twiddle[k * step])
                                                  : plan.twiddle[k * step];
                const std::complex<T> u = a[i + k];
                const std::complex<T> v = a[i + k + half] * w;
                a[i + k] = u + v;
                a[i + k + half] = u - v;
            }
        }
    }
}

// Recursive out-of-place mixed radix: out receives the transform of the
// stride-spaced input sequence. Radices up to 13 use stack buffers; larger
// prime factors take the (rare) heap branch.
template <typename T>
void mixed_radix(const Plan<T>& plan, const std::complex<T>* in, std::complex<T>* out,
                 int n, int stride, std::size_t depth, bool inverse) {
    if (n == 1) {
        out[0] = in[0];
        return;
    }
    if ((n & (n - 1)) == 0) {
        // Power-of-two tail: gather the strided subsequence and run the
        // iterative transform on it.
        for (int i = 0; i < n; ++i) out[i] = in[static_cast<std::ptrdiff_t>(i) * stride];
        radix2_inplace(*plan_for<T>(n), out, inverse);
        return;
    }
    const int r = plan.factors[depth];
    const int m = n / r;
    for (int s = 0; s < r; ++s)
        mixed_radix(plan, in + static_cast<std::ptrdiff_t>(s) * stride, out + static_cast<std::ptrdiff_t>(s) * m,
                    m, stride * r, depth + 1, inverse);

    const long table_step = plan.n / n;
    constexpr int kStackRadix = 13;
    std::complex<T> t_stack[kStackRadix], col_stack[kStackRadix], wq_stack[kStackRadix * kStackRadix];
    std::vector<std::complex<T>> heap;
    std::complex<T>* t = t_stack;
    std::complex<T>* col = col_stack;
    std::complex<T>* wq = wq_stack;
    if (r > kStackRadix) {
        heap.resize(2 * static_cast<std::size_t>(r) + static_cast<std::size_t>(r) * r);
        t = heap.data();
        col = heap.data() + r;
        wq = heap.data() + 2 * r;
    }
    // Root-of-unity micro table and per-s running twiddle indices replace
    // modulo lookups in the hot loop.
    for (int s = 0; s < r; ++s)
        for (int q = 0; q < r; ++q)
            wq[s * r + q] = tw(plan, static_cast<long>(plan.n / r) * s * q, inverse);
    long idx[kStackRadix] = {};
    std::vector<long> idx_heap;
    long* index = idx;
    if (r > kStackRadix) {
        idx_heap.assign(static_cast<std::size_t>(r), 0);
        index = idx_heap.data();
    }
    for (int k2 = 0; k2 < m; ++k2) {
        t[0] = out[k2];
        for (int s = 1; s < r; ++s) {
            const std::complex<T> w = inverse ? std::conj(plan.twiddle[static_cast<std::size_t>(index[s])])
                                              : plan.twiddle[static_cast<std::size_t>(index[s])];
            t[s] = out[static_cast<std::ptrdiff_t>(s) * m + k2] * w;
            // table_step * s = plan.n * s / n < plan.n, so one subtract wraps.
            index[s] += table_step * s;
            if (index[s] >= plan.n) index[s] -= plan.n;
        }
        for (int q = 0; q < r; ++q) {
            std::complex<T> acc = t[0];
            const std::complex<T>* wrow = wq + q; // wq[s*r+q] column access
            for (int s = 1; s < r; ++s) acc += t[s] * wrow[s * r];
            col[q] = acc;
        }
        for (int q = 0; q < r; ++q) out[static_cast<std::ptrdiff_t>(q) * m + k2] = col[q];
    }
}

} // namespace detail

// Transform a contiguous length-n complex sequence in place.
template <typename T>
void transform(const Plan<T>& plan, std::complex<T>* data, bool inverse) {
    if (plan.pow2) {
        detail::radix2_inplace(plan, data, inverse);
        return;
    }
    static thread_local std::vector<std::complex<T>> scratch;
    scratch.resize(static_cast<std::size_t>(plan.n));
    detail::mixed_radix(plan, data, scratch.data(), plan.n, 1, 0, inverse);
    for (int i = 0; i < plan.n; ++i) data[i] = scratch[static_cast<std::size_t>(i)];
}

// Shared plan cache; plans are immutable after construction.
template <typename T>
std::shared_ptr<const Plan<T>> plan_for(int n) {
    static std::mutex mutex;
    static std::unordered_map<int, std::shared_ptr<const Plan<T>>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    auto plan = std::make_shared<const Plan<T>>(n);
    cache.emplace(n, plan);
    return plan;
}

// ---------------------------------------------------------------------------
// 2D helpers on row-major ny x nx data.
// ---------------------------------------------------------------------------

template <typename T>
void transform_rows(const Plan<T>& plan, std::complex<T>* data, int nrows, bool inverse) {
    for (int r = 0; r < nrows; ++r) transform(plan, data + static_cast<std::ptrdiff_t>(r) * plan.n, inverse);
}

template <typename T>
void transform_cols(const Plan<T>& plan, std::complex<T>* data, int ncols, int row_stride, bool inverse) {
    static thread_local std::vector<std::complex<T>> line;
    line.resize(static_cast<std::size_t>(plan.n));
    for (int c = 0; c < ncols; ++c) {
        for (int r = 0; r < plan.n; ++r) line[static_cast<std::size_t>(r)] = data[static_cast<std::ptrdiff_t>(r) * row_stride + c];
        transform(plan, line.data(), inverse);
        for (int r = 0; r < plan.n; ++r) data[static_cast<std::ptrdiff_t>(r) * row_stride + c] = line[static_cast<std::size_t>(r)];
    }
}

// Real-to-half-complex 2D transform: input real (ny x nx), output complex
// (ny x (nx/2+1)), unnormalized forward. Row pairs share one complex FFT.
template <typename T>
void r2c_2d(const T* real_in, int nx, int ny, std::complex<T>* half_out) {
    const auto px = plan_for<T>(nx);
    const auto py = plan_for<T>(ny);
    const int ncols = nx / 2 + 1;
    static thread_local std::vector<std::complex<T>> z;
    z.resize(static_cast<std::size_t>(nx));
    for (int y = 0; y < ny; y += 2) {
        const T* a = real_in + static_cast<std::ptrdiff_t>(y) * nx;
        const T* b = real_in + static_cast<std::ptrdiff_t>(y + 1) * nx;
        for (int x = 0; x < nx; ++x) z[static_cast<std::size_t>(x)] = std::complex<T>(a[x], b[x]);
        transform(*px, z.data(), false);
        std::complex<T>* ra = half_out + static_cast<std::ptrdiff_t>(y) * ncols;
        std::complex<T>* rb = half_out + static_cast<std::ptrdiff_t>(y + 1) * ncols;
        for (int k = 0; k < ncols; ++k) {
            const std::complex<T> zk = z[static_cast<std::size_t>(k)];
            const std::complex<T> zm = std::conj(z[static_cast<std::size_t>((nx - k) % nx)]);
            ra[k] = std::complex<T>(T(0.5), T(0)) * (zk + zm);
            rb[k] = std::complex<T>(T(0), T(-0.5)) * (zk - zm);
        }
    }
    transform_cols(*py, half_out, ncols, ncols, false);
}

// Hermitian projection of one self-mirrored column (stride between ky
// entries given by `stride`).
template <typename T>
void hermitianize_col(std::complex<T>* col, int ny, int stride) {
    for (int ky = 1; ky < ny / 2 + (ny % 2); ++ky) {
        const int km = ny - ky;
        std::complex<T>& a = col[static_cast<std::ptrdiff_t>(ky) * stride];
        std::complex<T>& b = col[static_cast<std::ptrdiff_t>(km) * stride];
        const std::complex<T> h = std::complex<T>(T(0.5), T(0)) * (a + std::conj(b));
        a = h;
        b = std::conj(h);
    }
    col[0] = std::complex<T>(col[0].real(), T(0));
    if (ny % 2 == 0)
        col[static_cast<std::ptrdiff_t>(ny / 2) * stride] =
            std::complex<T>(col[static_cast<std::ptrdiff_t>(ny / 2) * stride].real(), T(0));
}

// Hermitianize the self-mirrored columns (kx = 0 and kx = nx/2) in place.
// c2r_2d of an arbitrary half-spectrum is defined as the real part of the
// inverse of the conjugate-mirrored full spectrum; only these two columns
// can violate the required symmetry, so projecting them makes the fast
// row-pair inverse exact.
template <typename T>
void hermitianize_boundary_cols(std::complex<T>* half, int nx, int ny) {
    const int ncols = nx / 2 + 1;
    hermitianize_col(half, ny, ncols);
    hermitianize_col(half + nx / 2, ny, ncols);
}

// Radix-2 transform over plan.n elements that are contiguous chunks of
// `chunk` complexes; the butterflies vectorize across the chunk. Used to
// batch many transforms that share a geometry (2D axes, channel lanes).
template <typename T>
void transform_chunks(const Plan<T>& plan, std::complex<T>* a, std::size_t chunk, bool inverse) {
    const int n = plan.n;
    for (int i = 0; i < n; ++i) {
        const int j = plan.bitrev[i];
        if (i < j)
            std::swap_ranges(a + static_cast<std::size_t>(i) * chunk, a + static_cast<std::size_t>(i) * chunk + chunk,
                             a + static_cast<std::size_t>(j) * chunk);
    }
    for (int len = 2; len <= n; len <<= 1) {
        const int half = len >> 1;
        const int step = n / len;
        for (int base = 0; base < n; base += len) {
            for (int k = 0; k < half; ++k) {
                const std::complex<T> w = inverse ? std::conj(plan.twiddle[static_cast<std::size_t>(k) * step])
                                                  : plan.twiddle[static_cast<std::size_t>(k) * step];
                std::complex<T>* pa = a + static_cast<std::size_t>(base + k) * chunk;
                std::complex<T>* pb = a + static_cast<std::size_t>(base + k + half) * chunk;
                for (std::size_t q = 0; q < chunk; ++q) {
                    const std::complex<T> u = pa[q];
                    const std::complex<T> v = pb[q] * w;
                    pa[q] = u + v;
                    pb[q] = u - v;
                }
            }
        }
    }
}

// In-place 2D transform of [ny][nx][lanes] complex data (power-of-two axes
// only): x-butterflies vectorize over the lanes, y-butterflies over whole
// rows.
template <typename T>
void transform_2d_lanes(std::complex<T>* z, int nx, int ny, std::size_t lanes, bool inverse) {
    const auto px = plan_for<T>(nx);
    const auto py = plan_for<T>(ny);
    for (int y = 0; y < ny; ++y)
        transform_chunks(*px, z + static_cast<std::size_t>(y) * nx * lanes, lanes, inverse);
    transform_chunks(*py, z, static_cast<std::size_t>(nx) * lanes, inverse);
}

// Half-complex to real 2D inverse, unnormalized (sums over all modes of the
// mirrored full spectrum with no 1/(nx*ny)). Mutates a working copy.
template <typename T>
void c2r_2d(const std::complex<T>* half_in, int nx, int ny, T* real_out) {
    const auto px = plan_for<T>(nx);
    const auto py = plan_for<T>(ny);
    const int ncols = nx / 2 + 1;
    static thread_local std::vector<std::complex<T>> work;
    work.assign(half_in, half_in + static_cast<std::ptrdiff_t>(ny) * ncols);
    hermitianize_boundary_cols(work.data(), nx, ny);
    transform_cols(*py, work.data(), ncols, ncols, true);
    static thread_local std::vector<std::complex<T>> z;
    z.resize(static_cast<std::size_t>(nx));
    for (int y = 0; y < ny; y += 2) {
        const std::complex<T>* ra = work.data() + static_cast<std::ptrdiff_t>(y) * ncols;
        const std::complex<T>* rb = work.data() + static_cast<std::ptrdiff_t>(y + 1) * ncols;
        for (int k = 0; k <= nx / 2; ++k) z[static_cast<std::size_t>(k)] = ra[k] + std::complex<T>(T(0), T(1)) * rb[k];
        for (int k = nx / 2 + 1; k < nx; ++k)
            z[static_cast<std::size_t>(k)] = std::conj(ra[nx - k]) + std::complex<T>(T(0), T(1)) * std::conj(rb[nx - k]);
        transform(*px, z.data(), true);
        T* a = real_out + static_cast<std::ptrdiff_t>(y) * nx;
        T* b = real_out + static_cast<std::ptrdiff_t>(y + 1) * nx;
        for (int x = 0; x < nx; ++x) {
            a[x] = z[static_cast<std::size_t>(x)].real();
            b[x] = z[static_cast<std::size_t>(x)].imag();
        }
    }
}

} // namespace otfm::fft
