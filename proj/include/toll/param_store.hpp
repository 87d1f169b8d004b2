#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "toll/tensor.hpp"

namespace toll {

// Named parameter tensors with stable creation order plus per-parameter
// AdamW state. Shapes are immutable after creation.
class ParamStore {
public:
    struct Entry {
        std::string name;
        Tensor value;
        Tensor m;  // first moment
        Tensor v;  // second moment
        int64_t step = 0;
    };

    void create(const std::string& name, Tensor init);
    bool has(const std::string& name) const { return index_.count(name) > 0; }
    Tensor& value(const std::string& name);
    const Tensor& value(const std::string& name) const;
    Entry& entry(const std::string& name);

    const std::vector<Entry>& entries() const { return entries_; }
    std::vector<Entry>& entries() { return entries_; }
    size_t size() const { return entries_.size(); }

    // Deep copy without entries whose name starts with any of the prefixes.
    ParamStore clone_without(const std::vector<std::string>& prefixes) const;

private:
    std::vector<Entry> entries_;
    std::map<std::string, size_t> index_;
};

// Tensor-file container: a text manifest (name, shape, byte offset) followed
// by one little-endian 64-bit-float blob, row-major.
void write_tensor_file(const std::string& path, const std::vector<std::pair<std::string, Tensor>>& tensors);
std::vector<std::pair<std::string, Tensor>> read_tensor_file(const std::string& path);

}  // namespace toll
