#pragma once

namespace psv {

/// Keeps large tensor buffers on the heap instead of fresh mmap pages.
/// Training allocates and frees many multi-megabyte arrays per step; with the
/// default glibc thresholds each one is a page-faulting mmap/munmap pair.
void configure_allocator();

}  // namespace psv
