#include "mergemeter/tensor_store.hpp"

#include "mergemeter/error.hpp"
#include "mergemeter/numeric.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace mergemeter {

using json = nlohmann::json;

namespace {

constexpr char kMagic[4] = {'M', 'M', 'K', '1'};
constexpr size_t kAlign = 64;
constexpr std::string_view kMetaKey = "__meta__";

size_t align_up(size_t n) { return (n + kAlign - 1) / kAlign * kAlign; }

void append_u64_le(std::vector<uint8_t> & out, uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
}

uint64_t read_u64_le(const uint8_t * p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<uint64_t>(p[i]) << (8 * i);
    }
    return v;
}

void append_tensor_payload(std::vector<uint8_t> & out, const TensorEntry & e) {
    if (e.dtype == Dtype::f32) {
        for (float v : e.values) {
            uint32_t bits;
            std::memcpy(&bits, &v, sizeof(bits));
            for (int i = 0; i < 4; ++i) {
                out.push_back(static_cast<uint8_t>(bits >> (8 * i)));
            }
        }
    } else {
        for (float v : e.values) {
            const uint16_t h = f32_to_f16(v);
            out.push_back(static_cast<uint8_t>(h & 0xff));
            out.push_back(static_cast<uint8_t>(h >> 8));
        }
    }
}

std::vector<uint8_t> serialize_with_meta(const std::vector<TensorEntry> & entries, const json * meta) {
    json header = json::object();
    std::vector<size_t> offsets(entries.size());
    size_t cursor = 0;
    for (size_t i = 0; i < entries.size(); ++i) {
        const auto & e = entries[i];
        cursor = align_up(cursor);
        offsets[i] = cursor;
        const size_t byte_length = e.numel() * dtype_size(e.dtype);
        header[e.name] = {
            {"dtype", dtype_name(e.dtype)},
            {"shape", e.shape},
            {"byte_offset", cursor},
            {"byte_length", byte_length},
        };
        cursor += byte_length;
    }
    if (meta != nullptr) {
        header[std::string(kMetaKey)] = *meta;
    }

    std::string header_str = header.dump();
    // pad so the data section starts 64-byte aligned within the file
    const size_t prefix = sizeof(kMagic) + sizeof(uint64_t);
    while ((prefix + header_str.size()) % kAlign != 0) {
        header_str.push_back(' ');
    }

    std::vector<uint8_t> out;
    out.reserve(prefix + header_str.size() + cursor);
    out.insert(out.end(), kMagic, kMagic + sizeof(kMagic));
    append_u64_le(out, header_str.size());
    out.insert(out.end(), header_str.begin(), header_str.end());

    const size_t data_start = out.size();
    for (size_t i = 0; i < entries.size(); ++i) {
        out.resize(data_start + offsets[i], 0);
        append_tensor_payload(out, entries[i]);
    }
    return out;
}

struct ParsedContainer {
    std::vector<TensorEntry> entries;
    json meta;
    bool has_meta = false;
};

ParsedContainer parse_with_meta(std::span<const uint8_t> bytes) {
    if (bytes.size() < sizeof(kMagic) + sizeof(uint64_t) ||
        std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        fail_validation("not an MMK1 container (bad magic)");
    }
    const uint64_t header_len = read_u64_le(bytes.data() + sizeof(kMagic));
    const size_t prefix = sizeof(kMagic) + sizeof(uint64_t);
    if (prefix + header_len > bytes.size()) {
        fail_validation("truncated container: header extends past end of file");
    }

    json header;
    try {
        header = json::parse(bytes.begin() + prefix, bytes.begin() + prefix + header_len);
    } catch (const json::exception & ex) {
        fail_validation(std::string("malformed container header: ") + ex.what());
    }
    if (!header.is_object()) {
        fail_validation("container header is not a map");
    }

    const std::span<const uint8_t> data = bytes.subspan(prefix + header_len);
    ParsedContainer out;
    for (const auto & [name, desc] : header.items()) {
        if (name == kMetaKey) {
            out.meta = desc;
            out.has_meta = true;
            continue;
        }
        TensorEntry e;
        e.name = name;
        try {
            e.dtype = dtype_from_name(desc.at("dtype").get<std::string>());
            e.shape = desc.at("shape").get<std::vector<int64_t>>();
            const auto byte_offset = desc.at("byte_offset").get<uint64_t>();
            const auto byte_length = desc.at("byte_length").get<uint64_t>();
            for (int64_t dim : e.shape) {
                if (dim <= 0) {
                    fail_validation("tensor '" + name + "' has non-positive dimension");
                }
            }
            const size_t n = e.numel();
            if (byte_length != n * dtype_size(e.dtype)) {
                fail_validation("tensor '" + name + "': byte_length does not match shape and dtype");
            }
            if (byte_offset + byte_length > data.size()) {
                fail_validation("truncated container: tensor '" + name + "' payload is missing bytes");
            }
            e.values.resize(n);
            const uint8_t * p = data.data() + byte_offset;
            if (e.dtype == Dtype::f32) {
                for (size_t i = 0; i < n; ++i) {
                    uint32_t bits = 0;
                    for (int k = 0; k < 4; ++k) {
                        bits |= static_cast<uint32_t>(p[4 * i + k]) << (8 * k);
                    }
                    std::memcpy(&e.values[i], &bits, sizeof(float));
                }
            } else {
                for (size_t i = 0; i < n; ++i) {
                    const uint16_t h = static_cast<uint16_t>(p[2 * i] | (p[2 * i + 1] << 8));
                    e.values[i] = f16_to_f32(h);
                }
            }
        } catch (const json::exception & ex) {
            fail_validation("tensor '" + name + "': bad header entry: " + ex.what());
        }
        out.entries.push_back(std::move(e));
    }
    // json objects iterate in key order, but re-sort defensively
    std::sort(out.entries.begin(), out.entries.end(),
              [](const TensorEntry & a, const TensorEntry & b) { return a.name < b.name; });
    return out;
}

void validate_entries(const std::vector<TensorEntry> & entries) {
    for (size_t i = 0; i < entries.size(); ++i) {
        const auto & e = entries[i];
        if (e.name.empty()) {
            fail_validation("tensor names must be non-empty");
        }
        if (i > 0 && entries[i - 1].name == e.name) {
            fail_validation("duplicate tensor name '" + e.name + "'");
        }
        for (int64_t dim : e.shape) {
            if (dim <= 0) {
                fail_validation("tensor '" + e.name + "' has non-positive dimension");
            }
        }
        if (e.numel() != e.values.size()) {
            fail_validation("tensor '" + e.name + "': shape implies " + std::to_string(e.numel()) +
                            " values, got " + std::to_string(e.values.size()));
        }
    }
}

std::vector<uint8_t> read_file_bytes(const std::filesystem::path & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail_io("cannot open '" + path.string() + "' for reading");
    }
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
        fail_io("read error on '" + path.string() + "'");
    }
    return bytes;
}

void write_file_bytes(const std::filesystem::path & path, std::span<const uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        fail_io("cannot open '" + path.string() + "' for writing");
    }
    out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        fail_io("write error on '" + path.string() + "'");
    }
}

} // namespace

size_t dtype_size(Dtype d) { return d == Dtype::f32 ? 4 : 2; }

std::string_view dtype_name(Dtype d) { return d == Dtype::f32 ? "f32" : "f16"; }

Dtype dtype_from_name(std::string_view s) {
    if (s == "f32") {
        return Dtype::f32;
    }
    if (s == "f16") {
        return Dtype::f16;
    }
    fail_validation("unsupported dtype '" + std::string(s) + "' (expected f32 or f16)");
}

size_t TensorEntry::numel() const {
    size_t n = 1;
    for (int64_t dim : shape) {
        n *= static_cast<size_t>(dim);
    }
    return n;
}

const TensorEntry * Checkpoint::find(std::string_view name) const {
    const auto it = std::lower_bound(entries.begin(), entries.end(), name,
                                     [](const TensorEntry & e, std::string_view n) { return e.name < n; });
    return it != entries.end() && it->name == name ? &*it : nullptr;
}

Checkpoint make_checkpoint(std::vector<TensorEntry> entries) {
    std::sort(entries.begin(), entries.end(),
              [](const TensorEntry & a, const TensorEntry & b) { return a.name < b.name; });
    validate_entries(entries);
    return Checkpoint{std::move(entries)};
}

std::vector<uint8_t> serialize_container(const Checkpoint & ckpt) {
    validate_entries(ckpt.entries);
    return serialize_with_meta(ckpt.entries, nullptr);
}

Checkpoint parse_container(std::span<const uint8_t> bytes) {
    auto parsed = parse_with_meta(bytes);
    validate_entries(parsed.entries);
    return Checkpoint{std::move(parsed.entries)};
}

void write_container(const Checkpoint & ckpt, const std::filesystem::path & path) {
    write_file_bytes(path, serialize_container(ckpt));
}

Checkpoint read_container(const std::filesystem::path & path) {
    return parse_container(read_file_bytes(path));
}

uint64_t checkpoint_digest(const Checkpoint & ckpt) {
    const auto bytes = serialize_container(ckpt);
    return fnv1a64(bytes.data(), bytes.size());
}

void write_task_vector(const TaskVector & tau, const std::filesystem::path & path) {
    validate_entries(tau.entries);
    char digest[19];
    std::snprintf(digest, sizeof(digest), "0x%016llx", static_cast<unsigned long long>(tau.base_digest));
    const json meta = {{"kind", "task_vector"}, {"base_digest", digest}};
    write_file_bytes(path, serialize_with_meta(tau.entries, &meta));
}

TaskVector read_task_vector(const std::filesystem::path & path) {
    auto parsed = parse_with_meta(read_file_bytes(path));
    validate_entries(parsed.entries);
    TaskVector tau;
    tau.entries = std::move(parsed.entries);
    if (!parsed.has_meta || !parsed.meta.contains("base_digest")) {
        fail_validation("'" + path.string() + "' has no base_digest metadata; not a task-vector file");
    }
    tau.base_digest = std::strtoull(parsed.meta["base_digest"].get<std::string>().c_str(), nullptr, 16);
    return tau;
}

void require_same_layout(const std::vector<TensorEntry> & a, const std::vector<TensorEntry> & b,
                         std::string_view what) {
    if (a.size() != b.size()) {
        fail_validation(std::string(what) + ": tensor counts differ (" + std::to_string(a.size()) +
                        " vs " + std::to_string(b.size()) + ")");
    }
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i].name != b[i].name) {
            fail_validation(std::string(what) + ": tensor name mismatch ('" + a[i].name + "' vs '" +
                            b[i].name + "')");
        }
        if (a[i].shape != b[i].shape) {
            fail_validation(std::string(what) + ": shape mismatch for tensor '" + a[i].name + "'");
        }
    }
}

TaskVector task_vector(const Checkpoint & theta_t, const Checkpoint & theta_0) {
    require_same_layout(theta_t.entries, theta_0.entries, "task_vector");
    TaskVector tau;
    tau.base_digest = checkpoint_digest(theta_0);
    tau.entries.reserve(theta_t.entries.size());
    for (size_t i = 0; i < theta_t.entries.size(); ++i) {
        const auto & ft = theta_t.entries[i];
        const auto & base = theta_0.entries[i];
        TensorEntry d{ft.name, Dtype::f32, ft.shape, {}};
        d.values.resize(ft.values.size());
        for (size_t k = 0; k < ft.values.size(); ++k) {
            d.values[k] = ft.values[k] - base.values[k];
        }
        tau.entries.push_back(std::move(d));
    }
    return tau;
}

Checkpoint apply_task_vector(const Checkpoint & theta_0, const TaskVector & tau, double scale,
                             bool override_digest) {
    require_same_layout(theta_0.entries, tau.entries, "apply_task_vector");
    const uint64_t digest = checkpoint_digest(theta_0);
    if (digest != tau.base_digest) {
        if (!override_digest) {
            fail_validation("task vector was derived from a different base checkpoint "
                            "(digest mismatch; pass the override flag to apply anyway)");
        }
        std::fprintf(stderr, "warning: applying task vector despite base digest mismatch\n");
    }
    Checkpoint out;
    out.entries.reserve(theta_0.entries.size());
    for (size_t i = 0; i < theta_0.entries.size(); ++i) {
        const auto & base = theta_0.entries[i];
        const auto & d = tau.entries[i];
        TensorEntry e{base.name, base.dtype, base.shape, {}};
        e.values.resize(base.values.size());
        for (size_t k = 0; k < base.values.size(); ++k) {
            e.values[k] = static_cast<float>(static_cast<double>(base.values[k]) +
                                             scale * static_cast<double>(d.values[k]));
        }
        out.entries.push_back(std::move(e));
    }
    return out;
}

} // namespace mergemeter
