#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mergemeter {

enum class Dtype : uint8_t { f32, f16 };

size_t dtype_size(Dtype d);
std::string_view dtype_name(Dtype d);
Dtype dtype_from_name(std::string_view s);

// One named tensor. Values are held as f32 in memory regardless of the
// declared storage dtype; f16 entries are widened on load and rounded to
// nearest-even on write.
struct TensorEntry {
    std::string name;
    Dtype dtype = Dtype::f32;
    std::vector<int64_t> shape;
    std::vector<float> values;

    size_t numel() const;
    bool operator==(const TensorEntry &) const = default;
};

// Entries are kept in lexicographic name order; serialization is a pure
// function of (names, dtypes, shapes, values).
struct Checkpoint {
    std::vector<TensorEntry> entries;

    const TensorEntry * find(std::string_view name) const;
    bool operator==(const Checkpoint &) const = default;
};

// Sorts entries and validates invariants (unique non-empty names,
// shape/value-count agreement).
Checkpoint make_checkpoint(std::vector<TensorEntry> entries);

// Element-wise delta against a base checkpoint. Deltas are always f32.
struct TaskVector {
    std::vector<TensorEntry> entries;
    uint64_t base_digest = 0;

    bool operator==(const TaskVector &) const = default;
};

// ---------------------------------------------------------------------------
// MMK1 container
//
//   "MMK1" | u64 LE header length | UTF-8 JSON header | tensor payloads
//
// The header maps tensor_name -> {dtype, shape, byte_offset, byte_length};
// payloads are little-endian and 64-byte aligned (header padded with
// spaces so the data section starts on a 64-byte boundary).
// ---------------------------------------------------------------------------

std::vector<uint8_t> serialize_container(const Checkpoint & ckpt);
Checkpoint parse_container(std::span<const uint8_t> bytes);

void write_container(const Checkpoint & ckpt, const std::filesystem::path & path);
Checkpoint read_container(const std::filesystem::path & path);

// FNV-1a of the canonical container bytes; equals the hash of the file on
// disk for anything written by write_container.
uint64_t checkpoint_digest(const Checkpoint & ckpt);

// Task-vector files reuse the container layout plus a reserved "__meta__"
// header key carrying the base digest.
void write_task_vector(const TaskVector & tau, const std::filesystem::path & path);
TaskVector read_task_vector(const std::filesystem::path & path);

// ---------------------------------------------------------------------------
// Task-vector arithmetic
// ---------------------------------------------------------------------------

TaskVector task_vector(const Checkpoint & theta_t, const Checkpoint & theta_0);

// theta_0 + scale * tau, element-wise in f32. Storage dtype follows the
// base entry so a zero scale reproduces theta_0 exactly.
Checkpoint apply_task_vector(const Checkpoint & theta_0, const TaskVector & tau, double scale,
                             bool override_digest = false);

// Shared layout check: identical names and shapes, in order.
void require_same_layout(const std::vector<TensorEntry> & a, const std::vector<TensorEntry> & b,
                         std::string_view what);

} // namespace mergemeter
