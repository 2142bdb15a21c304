#pragma once

// Single-file binary checkpoint, little-endian:
//
//   magic  "UNXTCKP1"                          8 bytes
//   u32    format version (currently 1)
//   u32    scalar width in bytes (4 or 8)
//   u64    completed optimizer steps
//   u64    config length, then that many UTF-8 bytes (resolved config echo)
//   u64    entry count
//   entry: u8 kind (0 weights, 1 first moment, 2 second moment)
//          u64 name length + name
//          4 x i64 tensor dims (n,c,h,w)
//          numel x scalar payload
//   magic  "UNXTEND1"                          8 bytes
//
// Entries appear in registry order (weights first, then per-parameter moment
// pairs), so identical state serializes to identical bytes. Loading stages
// the whole file and validates the footer before touching any parameter.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "unext/core/error.hpp"
#include "unext/core/tensor.hpp"
#include "unext/nn/parameter.hpp"
#include "unext/train/adamw.hpp"

namespace unext {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format requires a little-endian host");

inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
    int64_t step = 0;
    std::string config_json;
    uint32_t scalar_width = 0;
};

namespace ckpt_detail {

inline constexpr char kMagic[9] = "UNXTCKP1";
inline constexpr char kFooter[9] = "UNXTEND1";

template <typename V>
void put(std::string& out, V v) {
    char buf[sizeof(V)];
    std::memcpy(buf, &v, sizeof(V));
    out.append(buf, sizeof(V));
}

struct Cursor {
    const char* p;
    size_t left;
    const std::string& path;

    void take(void* dst, size_t n) {
        if (n > left) throw IoError("truncated checkpoint " + path);
        std::memcpy(dst, p, n);
        p += n;
        left -= n;
    }
    template <typename V>
    V get() {
        V v;
        take(&v, sizeof(V));
        return v;
    }
    std::string get_str(size_t n) {
        if (n > left) throw IoError("truncated checkpoint " + path);
        std::string s(p, n);
        p += n;
        left -= n;
        return s;
    }
};

template <typename T>
void put_tensor(std::string& out, uint8_t kind, const std::string& name, const Tensor<T>& t) {
    put<uint8_t>(out, kind);
    put<uint64_t>(out, name.size());
    out.append(name);
    const Shape4 s = t.shape();
    put<int64_t>(out, s.n);
    put<int64_t>(out, s.c);
    put<int64_t>(out, s.h);
    put<int64_t>(out, s.w);
    out.append(reinterpret_cast<const char*>(t.data()), sizeof(T) * static_cast<size_t>(t.size()));
}

} // namespace ckpt_detail

template <typename T>
void save_checkpoint(const std::string& path, const ParamRegistry<T>& registry,
                     const AdamW<T>* opt, int64_t step, const std::string& config_json) {
    using namespace ckpt_detail;
    require(step >= 0, "checkpoint step must be >= 0");
    std::string body;
    body.append(kMagic, 8);
    put<uint32_t>(body, kCheckpointVersion);
    put<uint32_t>(body, static_cast<uint32_t>(sizeof(T)));
    put<uint64_t>(body, static_cast<uint64_t>(step));
    put<uint64_t>(body, config_json.size());
    body.append(config_json);

    uint64_t entries = registry.size();
    if (opt) {
        for (const auto& [name, p] : registry) {
            (void)p;
            if (opt->slots().count(name)) entries += 2;
        }
    }
    put<uint64_t>(body, entries);
    for (const auto& [name, p] : registry) {
        put_tensor(body, 0, name, p->values);
    }
    if (opt) {
        for (const auto& [name, p] : registry) {
            (void)p;
            auto it = opt->slots().find(name);
            if (it == opt->slots().end()) continue;
            put_tensor(body, 1, name, it->second.m);
            put_tensor(body, 2, name, it->second.v);
        }
    }
    body.append(kFooter, 8);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + path);
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    out.flush();
    if (!out) throw IoError("short write on checkpoint " + path);
}

// Reads only the header: step, config echo, and scalar width. Lets a caller
// rebuild the right model before committing to a full load.
inline CheckpointMeta read_checkpoint_meta(const std::string& path) {
    using namespace ckpt_detail;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path);
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Cursor cur{blob.data(), blob.size(), path};

    char magic[8];
    cur.take(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0) throw IoError("bad checkpoint magic in " + path);
    const uint32_t version = cur.get<uint32_t>();
    if (version != kCheckpointVersion) {
        throw IoError("checkpoint version " + std::to_string(version) + " in " + path +
                      ", expected " + std::to_string(kCheckpointVersion));
    }
    CheckpointMeta meta;
    meta.scalar_width = cur.get<uint32_t>();
    if (meta.scalar_width != 4 && meta.scalar_width != 8) {
        throw IoError("checkpoint scalar width " + std::to_string(meta.scalar_width) + " in " +
                      path + ", expected 4 or 8");
    }
    meta.step = static_cast<int64_t>(cur.get<uint64_t>());
    meta.config_json = cur.get_str(cur.get<uint64_t>());
    return meta;
}

// Restores parameters (and optimizer moments when `opt` is given) from a
// checkpoint written by save_checkpoint. The file must cover exactly the
// registry's tensors; nothing is modified unless the whole file validates.
template <typename T>
CheckpointMeta load_checkpoint(const std::string& path, ParamRegistry<T>& registry, AdamW<T>* opt) {
    using namespace ckpt_detail;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path);
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Cursor cur{blob.data(), blob.size(), path};

    char magic[8];
    cur.take(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0) throw IoError("bad checkpoint magic in " + path);
    const uint32_t version = cur.get<uint32_t>();
    if (version != kCheckpointVersion) {
        throw IoError("checkpoint version " + std::to_string(version) + " in " + path +
                      ", expected " + std::to_string(kCheckpointVersion));
    }
    const uint32_t width = cur.get<uint32_t>();
    if (width != sizeof(T)) {
        throw IoError("checkpoint scalar width " + std::to_string(width) + " in " + path +
                      ", expected " + std::to_string(sizeof(T)));
    }
    CheckpointMeta meta;
    meta.scalar_width = width;
    meta.step = static_cast<int64_t>(cur.get<uint64_t>());
    meta.config_json = cur.get_str(cur.get<uint64_t>());
    const uint64_t entries = cur.get<uint64_t>();

    struct Staged {
        uint8_t kind;
        std::string name;
        Tensor<T> t;
    };
    std::vector<Staged> staged;
    staged.reserve(entries);
    for (uint64_t e = 0; e < entries; ++e) {
        Staged st;
        st.kind = cur.get<uint8_t>();
        if (st.kind > 2) throw IoError("unknown tensor kind in " + path);
        st.name = cur.get_str(cur.get<uint64_t>());
        Shape4 s;
        s.n = cur.get<int64_t>();
        s.c = cur.get<int64_t>();
        s.h = cur.get<int64_t>();
        s.w = cur.get<int64_t>();
        if (s.n <= 0 || s.c <= 0 || s.h <= 0 || s.w <= 0) {
            throw IoError("invalid tensor dims for " + st.name + " in " + path);
        }
        st.t = Tensor<T>(s);
        cur.take(st.t.data(), sizeof(T) * static_cast<size_t>(st.t.size()));
        staged.push_back(std::move(st));
    }
    char footer[8];
    cur.take(footer, 8);
    if (std::memcmp(footer, kFooter, 8) != 0 || cur.left != 0) {
        throw IoError("corrupt checkpoint tail in " + path);
    }

    size_t value_entries = 0;
    for (const Staged& st : staged) {
        if (st.kind != 0) continue;
        Parameter<T>* p = registry.find(st.name);
        if (!p) throw IoError("checkpoint tensor " + st.name + " has no matching parameter");
        require_shape(st.t.shape(), p->values.shape(), ("checkpoint tensor " + st.name).c_str());
        ++value_entries;
    }
    if (value_entries != registry.size()) {
        throw IoError("checkpoint covers " + std::to_string(value_entries) + " of " +
                      std::to_string(registry.size()) + " parameters");
    }
    for (Staged& st : staged) {
        if (st.kind == 0) {
            registry.find(st.name)->values = std::move(st.t);
        } else if (opt) {
            Parameter<T>* p = registry.find(st.name);
            if (!p) throw IoError("checkpoint moment " + st.name + " has no matching parameter");
            require_shape(st.t.shape(), p->values.shape(), ("checkpoint moment " + st.name).c_str());
            auto& slot = opt->slots()[st.name];
            if (st.kind == 1) {
                slot.m = std::move(st.t);
            } else {
                slot.v = std::move(st.t);
            }
        }
    }
    if (opt) opt->set_t(meta.step);
    return meta;
}

} // namespace unext
