#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace ferro {

/** Worker count: FERRO_GAMMA_THREADS caps it, 0 or unset means hardware concurrency. */
inline unsigned thread_count()
{
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const char* env = std::getenv("FERRO_GAMMA_THREADS");
    if (!env || !*env) return hw;
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end == env || v < 0) return hw;
    if (v == 0) return hw;
    return static_cast<unsigned>(v);
}

/**
 * Runs body(begin, end) over fixed-size chunks of [0, n). Chunk boundaries do
 * not depend on the thread count, so per-chunk partial results combined in
 * chunk order are reproducible.
 */
template <class Body>
void for_chunks(std::size_t n, std::size_t chunk, Body&& body)
{
    if (n == 0) return;
    chunk = std::max<std::size_t>(chunk, 1);
    std::size_t nchunks = (n + chunk - 1) / chunk;
    unsigned nt = std::min<std::size_t>(thread_count(), nchunks);
    if (nt <= 1) {
        for (std::size_t c = 0; c < nchunks; ++c)
            body(c, c * chunk, std::min(n, (c + 1) * chunk));
        return;
    }
    std::exception_ptr err;
    std::mutex err_mutex;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < nt; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t c = t; c < nchunks; c += nt)
                    body(c, c * chunk, std::min(n, (c + 1) * chunk));
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

/** Deterministic parallel sum: partials per chunk, added in chunk order. */
template <class Term>
double parallel_sum(std::size_t n, std::size_t chunk, Term&& term)
{
    if (n == 0) return 0.0;
    chunk = std::max<std::size_t>(chunk, 1);
    std::vector<double> partial((n + chunk - 1) / chunk, 0.0);
    for_chunks(n, chunk, [&](std::size_t c, std::size_t b, std::size_t e) {
        double s = 0.0;
        for (std::size_t i = b; i < e; ++i) s += term(i);
        partial[c] = s;
    });
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

} // namespace ferro
