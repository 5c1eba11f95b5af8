#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace steadapt {

// Flat named-tensor archive. One file: a text manifest (name, dtype, shape,
// trainable flag, byte offset into the data section) followed by raw blobs,
// each little-endian IEEE-754 float32 in C order. Saving the same state twice
// yields byte-identical files.
struct Checkpoint {
    struct Entry {
        Shape shape;
        bool trainable = true;
        std::vector<float> data;
    };

    std::map<std::string, Entry> tensors;  // name-sorted
    std::string config_hash;

    bool has(const std::string& name) const { return tensors.count(name) != 0; }
};

void write_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace steadapt
