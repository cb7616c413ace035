/* Copyright 2026 The grserve Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

namespace grserve {

// Per-thread count of heap allocations made through CountingAllocator.
// Caches and beam pools allocate through it so tests can assert that the
// steady-state decode loop performs no allocations.
struct AllocationCounter {
  static std::uint64_t count() noexcept { return counter(); }
  static std::uint64_t bytes() noexcept { return byte_counter(); }

  static std::uint64_t& counter() noexcept {
    thread_local std::uint64_t n = 0;
    return n;
  }
  static std::uint64_t& byte_counter() noexcept {
    thread_local std::uint64_t n = 0;
    return n;
  }
};

template <typename T>
struct CountingAllocator {
  using value_type = T;

  CountingAllocator() noexcept = default;
  template <typename U>
  CountingAllocator(const CountingAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    ++AllocationCounter::counter();
    AllocationCounter::byte_counter() += n * sizeof(T);
    return std::allocator<T>{}.allocate(n);
  }
  void deallocate(T* p, std::size_t n) noexcept {
    std::allocator<T>{}.deallocate(p, n);
  }

  template <typename U>
  bool operator==(const CountingAllocator<U>&) const noexcept {
    return true;
  }
};

template <typename T>
using CountedVector = std::vector<T, CountingAllocator<T>>;

}  // namespace grserve
