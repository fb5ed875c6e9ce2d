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

#pragma once

#include <cstddef>
#include <cstdint>
#include <new>

namespace sgf {

// Process-wide counters for bytes held by Matrix storage. This is what the
// benchmark harness reports as peak memory; it deliberately ignores anything
// not allocated through TrackingAllocator.
struct AllocStats {
    static std::size_t current_bytes() noexcept;
    static std::size_t peak_bytes() noexcept;
    // Resets the peak to the current level.
    static void reset_peak() noexcept;
    // 0 disables the budget. Allocations that would push current above the
    // budget throw std::bad_alloc.
    static void set_budget(std::size_t bytes) noexcept;
    static std::size_t budget() noexcept;

    static void on_alloc(std::size_t bytes);
    static void on_free(std::size_t bytes) noexcept;
};

template <typename T>
struct TrackingAllocator {
    using value_type = T;

    TrackingAllocator() noexcept = default;
    template <typename U>
    TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        const std::size_t bytes = n * sizeof(T);
        AllocStats::on_alloc(bytes);
        try {
            return static_cast<T*>(::operator new(bytes, std::align_val_t{64}));
        } catch (...) {
            AllocStats::on_free(bytes);
            throw;
        }
    }

    void deallocate(T* p, std::size_t n) noexcept {
        ::operator delete(p, std::align_val_t{64});
        AllocStats::on_free(n * sizeof(T));
    }

    template <typename U>
    bool operator==(const TrackingAllocator<U>&) const noexcept { return true; }
};

// Restores the budget on scope exit.
class ScopedAllocBudget {
public:
    explicit ScopedAllocBudget(std::size_t bytes) : previous_(AllocStats::budget()) {
        AllocStats::set_budget(bytes);
    }
    ~ScopedAllocBudget() { AllocStats::set_budget(previous_); }
    ScopedAllocBudget(const ScopedAllocBudget&) = delete;
    ScopedAllocBudget& operator=(const ScopedAllocBudget&) = delete;

private:
    std::size_t previous_;
};

} // namespace sgf
