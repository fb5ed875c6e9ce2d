/*
 * Copyright 2026 The sgformer-cpp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <sgf/alloc_stats.hpp>

#include <atomic>

namespace sgf {
namespace {

std::atomic<std::size_t> g_current{0};
std::atomic<std::size_t> g_peak{0};
std::atomic<std::size_t> g_budget{0};

} // namespace

std::size_t AllocStats::current_bytes() noexcept { return g_current.load(); }

std::size_t AllocStats::peak_bytes() noexcept { return g_peak.load(); }

void AllocStats::reset_peak() noexcept { g_peak.store(g_current.load()); }

void AllocStats::set_budget(std::size_t bytes) noexcept { g_budget.store(bytes); }

std::size_t AllocStats::budget() noexcept { return g_budget.load(); }

void AllocStats::on_alloc(std::size_t bytes) {
    const std::size_t now = g_current.fetch_add(bytes) + bytes;
    const std::size_t limit = g_budget.load();
    if (limit != 0 && now > limit) {
        g_current.fetch_sub(bytes);
        throw std::bad_alloc();
    }
    std::size_t peak = g_peak.load();
    while (now > peak && !g_peak.compare_exchange_weak(peak, now)) {
    }
}

void AllocStats::on_free(std::size_t bytes) noexcept { g_current.fetch_sub(bytes); }

} // namespace sgf
