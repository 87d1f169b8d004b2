#include "toll/param_store.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace toll {

void ParamStore::create(const std::string& name, Tensor init) {
    if (has(name)) throw error("parameter already exists: " + name);
    Entry e;
    e.name = name;
    e.m = Tensor::zeros(init.shape);
    e.v = Tensor::zeros(init.shape);
    e.value = std::move(init);
    index_[name] = entries_.size();
    entries_.push_back(std::move(e));
}

Tensor& ParamStore::value(const std::string& name) { return entry(name).value; }

const Tensor& ParamStore::value(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw error("unknown parameter: " + name);
    return entries_[it->second].value;
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw error("unknown parameter: " + name);
    return entries_[it->second];
}

ParamStore ParamStore::clone_without(const std::vector<std::string>& prefixes) const {
    ParamStore out;
    for (const auto& e : entries_) {
        bool skip = false;
        for (const auto& p : prefixes) {
            if (e.name.rfind(p, 0) == 0) {
                skip = true;
                break;
            }
        }
        if (skip) continue;
        out.index_[e.name] = out.entries_.size();
        out.entries_.push_back(e);
    }
    return out;
}

static_assert(std::endian::native == std::endian::little, "blob format is little-endian");

void write_tensor_file(const std::string& path, const std::vector<std::pair<std::string, Tensor>>& tensors) {
    std::ostringstream manifest;
    int64_t offset = 0;
    for (const auto& [name, t] : tensors) {
        manifest << name << " " << t.shape.size();
        for (int64_t d : t.shape) manifest << " " << d;
        manifest << " " << offset << "\n";
        offset += t.size() * static_cast<int64_t>(sizeof(double));
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw error("cannot open for writing: " + path);
    f << "toll-tensors 1 " << tensors.size() << " " << offset << "\n";
    f << manifest.str();
    f << "blob\n";
    for (const auto& [name, t] : tensors) {
        f.write(reinterpret_cast<const char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    }
    if (!f) throw error("write failed: " + path);
}

std::vector<std::pair<std::string, Tensor>> read_tensor_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw parse_error("cannot open: " + path);
    std::string magic;
    int version = 0;
    size_t count = 0;
    int64_t blob_bytes = 0;
    f >> magic >> version >> count >> blob_bytes;
    if (magic != "toll-tensors" || version != 1) throw parse_error(path + ": not a toll-tensors file");
    struct Rec {
        std::string name;
        std::vector<int64_t> shape;
        int64_t offset;
    };
    std::vector<Rec> recs;
    for (size_t i = 0; i < count; ++i) {
        Rec r;
        size_t ndims = 0;
        f >> r.name >> ndims;
        r.shape.resize(ndims);
        for (auto& d : r.shape) f >> d;
        f >> r.offset;
        if (!f) throw parse_error(path + ": truncated manifest at entry " + std::to_string(i));
        recs.push_back(std::move(r));
    }
    std::string sep;
    f >> sep;
    if (sep != "blob") throw parse_error(path + ": missing blob separator");
    f.get();  // newline before raw bytes
    std::vector<char> blob(static_cast<size_t>(blob_bytes));
    f.read(blob.data(), blob_bytes);
    if (f.gcount() != blob_bytes) throw parse_error(path + ": truncated blob");

    std::vector<std::pair<std::string, Tensor>> out;
    for (const auto& r : recs) {
        Tensor t = Tensor::zeros(r.shape);
        if (r.offset + t.size() * static_cast<int64_t>(sizeof(double)) > blob_bytes) {
            throw parse_error(path + ": tensor " + r.name + " overruns blob");
        }
        std::memcpy(t.data.data(), blob.data() + r.offset, t.data.size() * sizeof(double));
        out.emplace_back(r.name, std::move(t));
    }
    return out;
}

}  // namespace toll
