#include "evsnn/kernels.hpp"

namespace evsnn::kernels {

void conv_current_serial(const std::uint8_t* slab, const SpatialGeometry& g,
                         const double* weights, int out_begin, int out_end,
                         double* current) {
    const int plane = g.out_w * g.features;
    for (int n = out_begin; n < out_end; ++n) {
        const int f = n % g.features;
        const int ox = (n / g.features) % g.out_w;
        const int oy = n / plane;
        const double* wf = weights +
            static_cast<std::size_t>(f) * g.kernel_h * g.kernel_w * g.in_c;
        double acc = 0.0;
        for (int ky = 0; ky < g.kernel_h; ++ky) {
            const int iy = oy * g.stride - g.padding + ky;
            if (iy < 0 || iy >= g.in_h) continue;
            const std::uint8_t* row =
                slab + static_cast<std::size_t>(iy - g.slab_row0) * g.in_w * g.in_c;
            for (int kx = 0; kx < g.kernel_w; ++kx) {
                const int ix = ox * g.stride - g.padding + kx;
                if (ix < 0 || ix >= g.in_w) continue;
                const std::uint8_t* px = row + static_cast<std::size_t>(ix) * g.in_c;
                const double* wk = wf + (ky * g.kernel_w + kx) * g.in_c;
                for (int c = 0; c < g.in_c; ++c) {
                    if (px[c]) acc += wk[c];
                }
            }
        }
        current[n - out_begin] = acc;
    }
}

void pool_current_serial(const std::uint8_t* slab, const SpatialGeometry& g,
                         int out_begin, int out_end, double* current) {
    const int plane = g.out_w * g.features;
    for (int n = out_begin; n < out_end; ++n) {
        const int c = n % g.features;
        const int ox = (n / g.features) % g.out_w;
        const int oy = n / plane;
        double acc = 0.0;
        for (int ky = 0; ky < g.kernel_h; ++ky) {
            const int iy = oy * g.stride + ky;
            if (iy >= g.in_h) continue;
            const std::uint8_t* row =
                slab + static_cast<std::size_t>(iy - g.slab_row0) * g.in_w * g.in_c;
            for (int kx = 0; kx < g.kernel_w; ++kx) {
                const int ix = ox * g.stride + kx;
                if (ix >= g.in_w) continue;
                if (row[static_cast<std::size_t>(ix) * g.in_c + c]) acc += 1.0;
            }
        }
        current[n - out_begin] = acc;
    }
}

void full_current_serial(const std::uint8_t* in, int in_size,
                         const double* weights, int out_begin, int out_end,
                         double* current) {
    for (int n = out_begin; n < out_end; ++n) {
        const double* wn = weights + static_cast<std::size_t>(n) * in_size;
        double acc = 0.0;
        for (int i = 0; i < in_size; ++i) {
            if (in[i]) acc += wn[i];
        }
        current[n - out_begin] = acc;
    }
}

void lif_update_serial(double* v, const double* current, double theta,
                       double lambda, int n, std::uint8_t* spikes) {
    for (int i = 0; i < n; ++i) {
        const double leaked = lambda * v[i];
        const double vp = leaked + current[i];
        const bool fired = vp >= theta;
        spikes[i] = fired ? 1 : 0;
        v[i] = fired ? 0.0 : vp;
    }
}

std::int64_t fx_mul(std::int64_t a, std::int64_t b, int frac_bits) {
    // Integer division truncates toward zero, so |fx_mul(lambda, v)| <= |v|
    // for lambda in [0, 1].
    return (a * b) / (std::int64_t{1} << frac_bits);
}

void conv_current_fx_serial(const std::uint8_t* slab, const SpatialGeometry& g,
                            const std::int64_t* weights, int out_begin,
                            int out_end, std::int64_t* current) {
    const int plane = g.out_w * g.features;
    for (int n = out_begin; n < out_end; ++n) {
        const int f = n % g.features;
        const int ox = (n / g.features) % g.out_w;
        const int oy = n / plane;
        const std::int64_t* wf = weights +
            static_cast<std::size_t>(f) * g.kernel_h * g.kernel_w * g.in_c;
        std::int64_t acc = 0;
        for (int ky = 0; ky < g.kernel_h; ++ky) {
            const int iy = oy * g.stride - g.padding + ky;
            if (iy < 0 || iy >= g.in_h) continue;
            const std::uint8_t* row =
                slab + static_cast<std::size_t>(iy - g.slab_row0) * g.in_w * g.in_c;
            for (int kx = 0; kx < g.kernel_w; ++kx) {
                const int ix = ox * g.stride - g.padding + kx;
                if (ix < 0 || ix >= g.in_w) continue;
                const std::uint8_t* px = row + static_cast<std::size_t>(ix) * g.in_c;
                const std::int64_t* wk = wf + (ky * g.kernel_w + kx) * g.in_c;
                for (int c = 0; c < g.in_c; ++c) {
                    if (px[c]) acc += wk[c];
                }
            }
        }
        current[n - out_begin] = acc;
    }
}

void pool_current_fx_serial(const std::uint8_t* slab, const SpatialGeometry& g,
                            int out_begin, int out_end, std::int64_t* current,
                            std::int64_t one) {
    const int plane = g.out_w * g.features;
    for (int n = out_begin; n < out_end; ++n) {
        const int c = n % g.features;
        const int ox = (n / g.features) % g.out_w;
        const int oy = n / plane;
        std::int64_t acc = 0;
        for (int ky = 0; ky < g.kernel_h; ++ky) {
            const int iy = oy * g.stride + ky;
            if (iy >= g.in_h) continue;
            const std::uint8_t* row =
                slab + static_cast<std::size_t>(iy - g.slab_row0) * g.in_w * g.in_c;
            for (int kx = 0; kx < g.kernel_w; ++kx) {
                const int ix = ox * g.stride + kx;
                if (ix >= g.in_w) continue;
                if (row[static_cast<std::size_t>(ix) * g.in_c + c]) acc += one;
            }
        }
        current[n - out_begin] = acc;
    }
}

void full_current_fx_serial(const std::uint8_t* in, int in_size,
                            const std::int64_t* weights, int out_begin,
                            int out_end, std::int64_t* current) {
    for (int n = out_begin; n < out_end; ++n) {
        const std::int64_t* wn = weights + static_cast<std::size_t>(n) * in_size;
        std::int64_t acc = 0;
        for (int i = 0; i < in_size; ++i) {
            if (in[i]) acc += wn[i];
        }
        current[n - out_begin] = acc;
    }
}

void lif_update_fx_serial(std::int64_t* v, const std::int64_t* current,
                          std::int64_t theta, std::int64_t lambda, int frac_bits,
                          int n, std::uint8_t* spikes) {
    for (int i = 0; i < n; ++i) {
        const std::int64_t vp = fx_mul(lambda, v[i], frac_bits) + current[i];
        const bool fired = vp >= theta;
        spikes[i] = fired ? 1 : 0;
        v[i] = fired ? 0 : vp;
    }
}

} // namespace evsnn::kernels
