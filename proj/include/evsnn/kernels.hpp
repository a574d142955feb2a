#ifndef EVSNN_KERNELS_HPP
#define EVSNN_KERNELS_HPP

#include <cstdint>

namespace evsnn::kernels {

// Inner loops of the LIF engine. Each kernel exists twice: a plain serial
// reference and an OpenMP version parallel over output neurons. Both follow
// the same canonical reduction order per neuron — (ky, kx, c) ascending for
// spatial layers, ascending input index for dense layers — so spike trains
// are bit-identical between the two and across thread counts.
//
// Spatial kernels read an input slab that may be a row window of the full
// plane: `slab_row0` is the plane row of the slab's first row, bounds checks
// use the full plane height `in_h`. Output neurons are flattened (y, x, c)
// with the channel fastest; `current` holds one slot per neuron of
// [out_begin, out_end).
struct SpatialGeometry {
    int in_h = 0;
    int in_w = 0;
    int in_c = 0;
    int slab_row0 = 0;
    int slab_rows = 0;
    int out_w = 0;
    int features = 0; // output channels
    int kernel_h = 0;
    int kernel_w = 0;
    int stride = 1;
    int padding = 0;
};

// Convolution currents: weights laid out [feature][ky][kx][in_c].
void conv_current_serial(const std::uint8_t* slab, const SpatialGeometry& g,
                         const double* weights, int out_begin, int out_end,
                         double* current);
void conv_current_parallel(const std::uint8_t* slab, const SpatialGeometry& g,
                           const double* weights, int out_begin, int out_end,
                           double* current);

// Pooling currents: unit weights over the window, channels preserved
// (features == in_c, padding == 0).
void pool_current_serial(const std::uint8_t* slab, const SpatialGeometry& g,
                         int out_begin, int out_end, double* current);
void pool_current_parallel(const std::uint8_t* slab, const SpatialGeometry& g,
                           int out_begin, int out_end, double* current);

// Dense currents: weights laid out [out][in], input index fastest.
void full_current_serial(const std::uint8_t* in, int in_size,
                         const double* weights, int out_begin, int out_end,
                         double* current);
void full_current_parallel(const std::uint8_t* in, int in_size,
                           const double* weights, int out_begin, int out_end,
                           double* current);

// One LIF timestep over n neurons: vp = lambda*v + current, spike on
// vp >= theta, hard reset to zero.
void lif_update_serial(double* v, const double* current, double theta,
                       double lambda, int n, std::uint8_t* spikes);
void lif_update_parallel(double* v, const double* current, double theta,
                         double lambda, int n, std::uint8_t* spikes);

// Fixed-point variants: Q(63 - frac_bits).frac_bits two's-complement values,
// products rescaled by truncation toward zero.
std::int64_t fx_mul(std::int64_t a, std::int64_t b, int frac_bits);

void conv_current_fx_serial(const std::uint8_t* slab, const SpatialGeometry& g,
                            const std::int64_t* weights, int out_begin,
                            int out_end, std::int64_t* current);
void conv_current_fx_parallel(const std::uint8_t* slab, const SpatialGeometry& g,
                              const std::int64_t* weights, int out_begin,
                              int out_end, std::int64_t* current);
void pool_current_fx_serial(const std::uint8_t* slab, const SpatialGeometry& g,
                            int out_begin, int out_end, std::int64_t* current,
                            std::int64_t one);
void pool_current_fx_parallel(const std::uint8_t* slab, const SpatialGeometry& g,
                              int out_begin, int out_end, std::int64_t* current,
                              std::int64_t one);
void full_current_fx_serial(const std::uint8_t* in, int in_size,
                            const std::int64_t* weights, int out_begin,
                            int out_end, std::int64_t* current);
void full_current_fx_parallel(const std::uint8_t* in, int in_size,
                              const std::int64_t* weights, int out_begin,
                              int out_end, std::int64_t* current);
void lif_update_fx_serial(std::int64_t* v, const std::int64_t* current,
                          std::int64_t theta, std::int64_t lambda, int frac_bits,
                          int n, std::uint8_t* spikes);
void lif_update_fx_parallel(std::int64_t* v, const std::int64_t* current,
                            std::int64_t theta, std::int64_t lambda,
                            int frac_bits, int n, std::uint8_t* spikes);

} // namespace evsnn::kernels

#endif
