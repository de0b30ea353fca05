#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace vit5 {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values encountered inside a layer; carries the layer index.
struct NumericError : std::runtime_error {
    int layer;
    NumericError(const std::string& msg, int layer_index)
        : std::runtime_error(msg), layer(layer_index) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// ---------------------------------------------------------------------------
// Shapes
// ---------------------------------------------------------------------------

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// ---------------------------------------------------------------------------
// Precision mode
//
// One global mode per run. In f32 mode every op output (and every gradient
// accumulation) is quantized to float, so all stored values are exactly
// f32-representable; in f64 mode values are kept at full double precision
// for gradient verification.
// ---------------------------------------------------------------------------

enum class Precision { f32, f64 };

Precision precision();
void set_precision(Precision p);

struct PrecisionScope {
    explicit PrecisionScope(Precision p) : prev_(precision()) { set_precision(p); }
    ~PrecisionScope() { set_precision(prev_); }
    PrecisionScope(const PrecisionScope&) = delete;
    PrecisionScope& operator=(const PrecisionScope&) = delete;

private:
    Precision prev_;
};

inline double quantize_value(double v, Precision p) {
    return p == Precision::f32 ? static_cast<double>(static_cast<float>(v)) : v;
}

void quantize_buffer(std::vector<double>& data);

// ---------------------------------------------------------------------------
// Grad mode
// ---------------------------------------------------------------------------

bool grad_enabled();
void set_grad_enabled(bool on);

struct NoGradScope {
    NoGradScope() : prev_(grad_enabled()) { set_grad_enabled(false); }
    ~NoGradScope() { set_grad_enabled(prev_); }
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

private:
    bool prev_;
};

// ---------------------------------------------------------------------------
// Numeric diagnostics (verification mode only)
// ---------------------------------------------------------------------------

namespace diag {
bool nan_flag();
void set_nan_flag();
void reset_nan_flag();
}  // namespace diag

// ---------------------------------------------------------------------------
// Deterministic parallelism
//
// parallel_for splits [0, n) into contiguous chunks executed by a fixed-size
// worker pool. Every index is processed by exactly one worker and all
// arithmetic inside a chunk is sequential, so results are bit-identical for
// any worker count. Reductions that must stay ordered are not parallelized.
// ---------------------------------------------------------------------------

int worker_count();
void set_worker_count(int n);  // n <= 0 selects hardware concurrency

// fn(begin, end) over disjoint subranges of [0, n). min_chunk bounds the
// smallest chunk so tiny loops stay serial.
void parallel_for(std::int64_t n, std::int64_t min_chunk,
                  const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace vit5
