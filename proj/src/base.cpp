#include "vit5/base.hpp"

#include <atomic>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

namespace vit5 {

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (std::int64_t e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {
Precision g_precision = Precision::f32;
bool g_grad_enabled = true;
std::atomic<bool> g_nan_flag{false};
}  // namespace

Precision precision() { return g_precision; }
void set_precision(Precision p) { g_precision = p; }

void quantize_buffer(std::vector<double>& data) {
    if (g_precision != Precision::f32) return;
    for (double& v : data) v = static_cast<double>(static_cast<float>(v));
}

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool on) { g_grad_enabled = on; }

namespace diag {
bool nan_flag() { return g_nan_flag.load(std::memory_order_relaxed); }
void set_nan_flag() { g_nan_flag.store(true, std::memory_order_relaxed); }
void reset_nan_flag() { g_nan_flag.store(false, std::memory_order_relaxed); }
}  // namespace diag

// ---------------------------------------------------------------------------
// Worker pool
// ---------------------------------------------------------------------------

namespace {

class WorkerPool {
public:
    explicit WorkerPool(int workers) : workers_(workers) {
        for (int i = 0; i < workers_ - 1; ++i) {
            threads_.emplace_back([this] { worker_loop(); });
        }
    }

    ~WorkerPool() {
        {
            std::unique_lock lock(mu_);
            stop_ = true;
            ++generation_;
        }
        cv_.notify_all();
        for (auto& t : threads_) t.join();
    }

    int workers() const { return workers_; }

    void run(std::int64_t chunks, const std::function<void(std::int64_t)>& chunk_fn) {
        if (chunks <= 1 || workers_ <= 1) {
            for (std::int64_t i = 0; i < chunks; ++i) chunk_fn(i);
            return;
        }
        {
            std::unique_lock lock(mu_);
            chunk_fn_ = &chunk_fn;
            total_chunks_ = chunks;
            next_chunk_.store(0, std::memory_order_relaxed);
            pending_ = chunks;
            ++generation_;
        }
        cv_.notify_all();
        drain();
        {
            std::unique_lock lock(mu_);
            done_cv_.wait(lock, [this] { return pending_ == 0; });
            chunk_fn_ = nullptr;
        }
    }

private:
    void drain() {
        while (true) {
            const std::int64_t i = next_chunk_.fetch_add(1, std::memory_order_relaxed);
            if (i >= total_chunks_) break;
            (*chunk_fn_)(i);
            finish_one();
        }
    }

    void finish_one() {
        std::unique_lock lock(mu_);
        if (--pending_ == 0) done_cv_.notify_all();
    }

    void worker_loop() {
        std::uint64_t seen = 0;
        while (true) {
            {
                std::unique_lock lock(mu_);
                cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
                if (stop_) return;
                seen = generation_;
            }
            while (true) {
                const std::int64_t i = next_chunk_.fetch_add(1, std::memory_order_relaxed);
                if (i >= total_chunks_) break;
                (*chunk_fn_)(i);
                finish_one();
            }
        }
    }

    const int workers_;
    std::vector<std::thread> threads_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    const std::function<void(std::int64_t)>* chunk_fn_ = nullptr;
    std::int64_t total_chunks_ = 0;
    std::atomic<std::int64_t> next_chunk_{0};
    std::int64_t pending_ = 0;
    std::uint64_t generation_ = 0;
    bool stop_ = false;
};

int g_requested_workers = 0;  // 0 => hardware concurrency
std::unique_ptr<WorkerPool> g_pool;
std::mutex g_pool_mu;

int resolve_workers(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

WorkerPool& pool() {
    std::unique_lock lock(g_pool_mu);
    const int want = resolve_workers(g_requested_workers);
    if (!g_pool || g_pool->workers() != want) {
        g_pool.reset();
        g_pool = std::make_unique<WorkerPool>(want);
    }
    return *g_pool;
}

}  // namespace

int worker_count() { return resolve_workers(g_requested_workers); }

void set_worker_count(int n) {
    std::unique_lock lock(g_pool_mu);
    g_requested_workers = n;
    g_pool.reset();
}

void parallel_for(std::int64_t n, std::int64_t min_chunk,
                  const std::function<void(std::int64_t, std::int64_t)>& fn) {
    if (n <= 0) return;
    if (min_chunk < 1) min_chunk = 1;
    const int workers = worker_count();
    std::int64_t chunks = std::min<std::int64_t>(workers, (n + min_chunk - 1) / min_chunk);
    if (chunks <= 1) {
        fn(0, n);
        return;
    }
    const std::int64_t per = (n + chunks - 1) / chunks;
    const std::int64_t actual_chunks = (n + per - 1) / per;
    pool().run(actual_chunks, [&](std::int64_t i) {
        const std::int64_t begin = i * per;
        const std::int64_t end = std::min(n, begin + per);
        if (begin < end) fn(begin, end);
    });
}

}  // namespace vit5
