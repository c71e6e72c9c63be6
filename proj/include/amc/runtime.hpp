#pragma once

namespace amc {

/// Keeps freed tensor buffers in the heap instead of returning them to the OS.
/// Training allocates and frees the same large blocks every step; without this
/// glibc maps and unmaps them each time. Call once at startup; no-op elsewhere.
void retain_freed_memory();

}  // namespace amc
