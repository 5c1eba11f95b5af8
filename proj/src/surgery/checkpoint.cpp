#include "surgery/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "core/error.hpp"

namespace steadapt {

namespace {
constexpr const char* kMagic = "STEADAPT-CKPT v1";

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");
}  // namespace

void write_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ostringstream manifest;
    manifest << kMagic << "\n";
    manifest << "config_hash " << (ckpt.config_hash.empty() ? "-" : ckpt.config_hash) << "\n";
    manifest << "tensors " << ckpt.tensors.size() << "\n";
    std::uint64_t offset = 0;
    for (const auto& [name, e] : ckpt.tensors) {
        manifest << name << " f32 ";
        for (size_t i = 0; i < e.shape.size(); ++i) manifest << (i ? "x" : "") << e.shape[i];
        manifest << " " << (e.trainable ? 1 : 0) << " " << offset << "\n";
        offset += e.data.size() * sizeof(float);
    }
    manifest << "data\n";

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open checkpoint for writing: " + path);
    const std::string head = manifest.str();
    f.write(head.data(), static_cast<std::streamsize>(head.size()));
    for (const auto& [name, e] : ckpt.tensors)
        f.write(reinterpret_cast<const char*>(e.data.data()),
                static_cast<std::streamsize>(e.data.size() * sizeof(float)));
    if (!f) throw IoError("write failed: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(f, line) || line != kMagic)
        throw IoError("not a checkpoint file: " + path);

    Checkpoint ckpt;
    std::string word;
    if (!std::getline(f, line)) throw IoError("truncated checkpoint: " + path);
    {
        std::istringstream is(line);
        is >> word >> ckpt.config_hash;
        if (word != "config_hash") throw IoError("malformed checkpoint header: " + path);
        if (ckpt.config_hash == "-") ckpt.config_hash.clear();
    }
    size_t count = 0;
    if (!std::getline(f, line)) throw IoError("truncated checkpoint: " + path);
    {
        std::istringstream is(line);
        is >> word >> count;
        if (word != "tensors") throw IoError("malformed checkpoint header: " + path);
    }

    struct Row {
        std::string name;
        Shape shape;
        bool trainable;
        std::uint64_t offset;
        std::uint64_t count;
    };
    std::vector<Row> rows;
    rows.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        if (!std::getline(f, line)) throw IoError("truncated manifest: " + path);
        std::istringstream is(line);
        Row r;
        std::string dtype, dims;
        int tr = 0;
        is >> r.name >> dtype >> dims >> tr >> r.offset;
        if (!is || dtype != "f32") throw IoError("malformed manifest line: " + line);
        r.trainable = tr != 0;
        r.count = 1;
        size_t pos = 0;
        while (pos < dims.size()) {
            size_t next = dims.find('x', pos);
            const std::string d = dims.substr(pos, next == std::string::npos ? next : next - pos);
            r.shape.push_back(std::stoi(d));
            r.count *= static_cast<std::uint64_t>(r.shape.back());
            if (next == std::string::npos) break;
            pos = next + 1;
        }
        rows.push_back(std::move(r));
    }
    if (!std::getline(f, line) || line != "data") throw IoError("missing data section: " + path);

    const std::streampos data_start = f.tellg();
    for (const Row& r : rows) {
        Checkpoint::Entry e;
        e.shape = r.shape;
        e.trainable = r.trainable;
        e.data.resize(r.count);
        f.seekg(data_start + static_cast<std::streamoff>(r.offset));
        f.read(reinterpret_cast<char*>(e.data.data()),
               static_cast<std::streamsize>(r.count * sizeof(float)));
        if (!f) throw IoError("truncated tensor data for " + r.name + ": " + path);
        ckpt.tensors.emplace(r.name, std::move(e));
    }
    return ckpt;
}

}  // namespace steadapt
